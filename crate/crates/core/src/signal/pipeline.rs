//! Raw stream to feature grid, and feature grid to GP design matrix.

use std::fmt;
use std::str::FromStr;

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::{
    detect_contact_patch, downsample_resolution, resample_patch, segment_revolutions, Axis,
    PatchFeatures, RawStream, DEFAULT_HALF_SPAN_DEG, DEFAULT_STEP_DEG,
};
use crate::error::{Error, Result};

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::InvalidConfig(format!("unknown axis '{other}'"))),
        }
    }
}

impl Serialize for Axis {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name().to_string())
    }
}

impl<'de> Deserialize<'de> for Axis {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Set of acceleration axes used as GP inputs, kept in x, y, z order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AxisSet(Vec<Axis>);

impl AxisSet {
    pub fn new(axes: &[Axis]) -> Result<Self> {
        let mut v = axes.to_vec();
        v.sort();
        v.dedup();
        if v.is_empty() {
            return Err(Error::InvalidConfig("axis set is empty".into()));
        }
        Ok(AxisSet(v))
    }

    pub fn all() -> Self {
        AxisSet(Axis::ALL.to_vec())
    }

    pub fn axes(&self) -> &[Axis] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The five configurations compared in the input selection study.
    pub fn study_set() -> Vec<AxisSet> {
        ["y", "xy", "yz", "xz", "xyz"]
            .iter()
            .map(|s| s.parse().expect("static axis names"))
            .collect()
    }
}

impl FromStr for AxisSet {
    type Err = Error;

    /// Accepts `xyz`, `x,y,z` or `{x,y,z}`.
    fn from_str(s: &str) -> Result<Self> {
        let axes = s
            .chars()
            .filter(|c| !matches!(c, ',' | '{' | '}' | ' '))
            .map(|c| c.to_string().parse())
            .collect::<Result<Vec<Axis>>>()?;
        if axes.is_empty() {
            return Err(Error::InvalidConfig(format!("no axes in '{s}'")));
        }
        let set = AxisSet::new(&axes)?;
        if set.len() != axes.len() {
            return Err(Error::InvalidConfig(format!("repeated axis in '{s}'")));
        }
        Ok(set)
    }
}

impl fmt::Display for AxisSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.0 {
            write!(f, "{}", a.name())?;
        }
        Ok(())
    }
}

/// Preprocessing settings: low-pass filter and patch grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub cutoff_hz: f64,
    pub order: usize,
    pub half_span_deg: f64,
    pub step_deg: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            cutoff_hz: 400.0,
            order: 5,
            half_span_deg: DEFAULT_HALF_SPAN_DEG,
            step_deg: DEFAULT_STEP_DEG,
        }
    }
}

/// Which part of the feature grid feeds the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub axes: AxisSet,
    pub resolution_deg: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            axes: AxisSet::all(),
            resolution_deg: 5.0,
        }
    }
}

impl FeatureConfig {
    pub fn new(axes: AxisSet, resolution_deg: f64) -> Self {
        FeatureConfig {
            axes,
            resolution_deg,
        }
    }

    /// Model input row for one rotation.
    pub fn row(&self, features: &PatchFeatures) -> Result<Vec<f64>> {
        let reduced = if (features.step_deg - self.resolution_deg).abs() < 1e-12 {
            features.clone()
        } else {
            downsample_resolution(features, self.resolution_deg)?
        };
        Ok(reduced.flatten(self.axes.axes()))
    }

    /// Design matrix (one row per rotation) and lateral force targets.
    pub fn design(&self, features: &[PatchFeatures]) -> Result<(Mat<f64>, Vec<f64>)> {
        let rows = features
            .iter()
            .map(|f| self.row(f))
            .collect::<Result<Vec<_>>>()?;
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidData("feature rows differ in length".into()));
        }
        let x = Mat::from_fn(rows.len(), d, |i, j| rows[i][j]);
        let y = features.iter().map(|f| f.labels.fy_n).collect();
        Ok((x, y))
    }
}

/// Filter, segment, locate the patch and resample every complete revolution.
pub fn preprocess(stream: &RawStream, config: &PreprocessConfig) -> Result<Vec<PatchFeatures>> {
    stream.validate()?;
    if stream.is_empty() {
        return Ok(Vec::new());
    }
    let filtered = stream.filtered(config.cutoff_hz, config.order)?;
    segment_revolutions(&filtered)?
        .iter()
        .map(|rev| {
            let window = detect_contact_patch(rev)?;
            resample_patch(rev, &window, config.half_span_deg, config.step_deg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Labels;

    #[test]
    fn axis_set_parsing() {
        let a: AxisSet = "zy".parse().unwrap();
        assert_eq!(a.axes(), &[Axis::Y, Axis::Z]);
        assert_eq!(a.to_string(), "yz");
        assert_eq!("{x,y,z}".parse::<AxisSet>().unwrap(), AxisSet::all());
        assert!("xw".parse::<AxisSet>().is_err());
        assert!("xx".parse::<AxisSet>().is_err());
        assert!("".parse::<AxisSet>().is_err());
        assert_eq!(AxisSet::study_set().len(), 5);
    }

    fn grid(fy: f64) -> PatchFeatures {
        PatchFeatures {
            rotation_id: 0,
            labels: Labels {
                fy_n: fy,
                fz_n: 2080.0,
                slip_deg: 1.0,
                speed_kmh: 30.0,
            },
            center_deg: 180.0,
            start_deg: 145.0,
            step_deg: 0.5,
            accel: [vec![1.0; 140], vec![2.0; 140], vec![3.0; 140]],
        }
    }

    #[test]
    fn design_dimensions() {
        let feats = vec![grid(1.0), grid(-2.0)];
        let full = FeatureConfig::new(AxisSet::all(), 0.5);
        let (x, y) = full.design(&feats).unwrap();
        assert_eq!((x.nrows(), x.ncols()), (2, 420));
        assert_eq!(y, vec![1.0, -2.0]);
        let (x, _) = FeatureConfig::default().design(&feats).unwrap();
        assert_eq!(x.ncols(), 42);
        assert_eq!((x[(0, 0)], x[(0, 14)], x[(0, 41)]), (1.0, 2.0, 3.0));
        let (x, _) = FeatureConfig::new("y".parse().unwrap(), 10.0).design(&feats).unwrap();
        assert_eq!(x.ncols(), 7);
        assert!(FeatureConfig::new(AxisSet::all(), 3.0).design(&feats).is_err());
    }
}
