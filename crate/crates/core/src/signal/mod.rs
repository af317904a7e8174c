//! Accelerometer stream preprocessing.
//!
//! A raw 10 kHz tri-axial stream is low-pass filtered, cut into encoder
//! revolutions, and each revolution is reduced to a fixed angular grid
//! centred on the contact patch. The grid has the same number of points at
//! every rolling speed, which is what makes the features usable as GP inputs.

mod butterworth;
mod patch;
mod pipeline;

use std::collections::BTreeMap;

pub use butterworth::{butterworth_lowpass, Biquad, SosFilter};
pub use patch::{
    detect_contact_patch, downsample_resolution, resample_patch, segment_revolutions,
    DEFAULT_HALF_SPAN_DEG, DEFAULT_STEP_DEG, MAX_PATCH_SPAN_DEG,
};
pub use pipeline::{preprocess, AxisSet, FeatureConfig, PreprocessConfig};

use crate::error::{Error, Result};

/// Accelerometer axis in the sensor body frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    /// Longitudinal (circumferential).
    X,
    /// Lateral.
    Y,
    /// Radial.
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }
}

/// Ground-truth labels recorded for one tire rotation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Labels {
    pub fy_n: f64,
    pub fz_n: f64,
    pub slip_deg: f64,
    pub speed_kmh: f64,
}

/// A continuous accelerometer recording with encoder angles.
///
/// Accelerations are in g. `rotation_id` tags every sample with the
/// rotation it was recorded in; `labels` holds one entry per rotation id.
#[derive(Debug, Clone, PartialEq)]
pub struct RawStream {
    pub sample_rate: f64,
    pub time_s: Vec<f64>,
    pub encoder_deg: Vec<f64>,
    pub accel: [Vec<f64>; 3],
    pub rotation_id: Vec<u64>,
    pub labels: BTreeMap<u64, Labels>,
}

impl RawStream {
    pub fn empty(sample_rate: f64) -> Self {
        RawStream {
            sample_rate,
            time_s: Vec::new(),
            encoder_deg: Vec::new(),
            accel: [Vec::new(), Vec::new(), Vec::new()],
            rotation_id: Vec::new(),
            labels: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.time_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_s.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::InvalidData(format!(
                "sample rate must be positive, got {}",
                self.sample_rate
            )));
        }
        let n = self.time_s.len();
        let lens = [
            self.encoder_deg.len(),
            self.accel[0].len(),
            self.accel[1].len(),
            self.accel[2].len(),
            self.rotation_id.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::InvalidData(format!(
                "channel lengths differ: time {n}, encoder/ax/ay/az/rotation {lens:?}"
            )));
        }
        if let Some(id) = self.rotation_id.iter().find(|id| !self.labels.contains_key(id)) {
            return Err(Error::InvalidData(format!("rotation {id} has no labels")));
        }
        Ok(())
    }

    /// Returns a copy with all three acceleration channels low-pass filtered.
    pub fn filtered(&self, cutoff_hz: f64, order: usize) -> Result<RawStream> {
        let filter = SosFilter::butterworth_lowpass(order, cutoff_hz, self.sample_rate)?;
        let mut out = self.clone();
        for ch in out.accel.iter_mut() {
            if ch.is_empty() {
                continue;
            }
            *ch = filter.apply(ch)?;
        }
        Ok(out)
    }
}

/// One full encoder revolution cut out of a [`RawStream`].
#[derive(Debug, Clone, PartialEq)]
pub struct RawRevolution {
    /// Ordinal of the revolution within the segmented stream.
    pub rotation_index: u64,
    /// Rotation id carried by the source stream.
    pub rotation_id: u64,
    pub encoder_deg: Vec<f64>,
    pub accel: [Vec<f64>; 3],
    pub labels: Labels,
}

impl RawRevolution {
    pub fn len(&self) -> usize {
        self.encoder_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encoder_deg.is_empty()
    }

    pub fn channel(&self, axis: Axis) -> &[f64] {
        &self.accel[axis.index()]
    }
}

/// Contact patch boundaries in the encoder frame, each wrapped to `[0, 360)`.
///
/// `exit_deg` follows `entry_deg` going forward around the circle; the
/// unwrapped span is [`PatchWindow::width`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchWindow {
    pub entry_deg: f64,
    pub center_deg: f64,
    pub exit_deg: f64,
}

impl PatchWindow {
    pub fn width(&self) -> f64 {
        (self.exit_deg - self.entry_deg).rem_euclid(360.0)
    }
}

/// Patch-centred acceleration grid for one rotation.
///
/// Point `k` of every axis sits at encoder angle `start_deg + k * step_deg`
/// (wrapped), where `start_deg = center - half_span`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchFeatures {
    pub rotation_id: u64,
    pub labels: Labels,
    pub center_deg: f64,
    pub start_deg: f64,
    pub step_deg: f64,
    pub accel: [Vec<f64>; 3],
}

impl PatchFeatures {
    pub fn points_per_axis(&self) -> usize {
        self.accel[0].len()
    }

    pub fn axis(&self, axis: Axis) -> &[f64] {
        &self.accel[axis.index()]
    }

    /// Grid angles relative to the patch centre.
    pub fn relative_angles(&self) -> Vec<f64> {
        let offset = self.start_deg - self.center_deg;
        (0..self.points_per_axis())
            .map(|k| offset + k as f64 * self.step_deg)
            .collect()
    }

    /// Axis-major concatenation of the selected axes, ascending angle within each.
    pub fn flatten(&self, axes: &[Axis]) -> Vec<f64> {
        let mut out = Vec::with_capacity(axes.len() * self.points_per_axis());
        for &a in axes {
            out.extend_from_slice(self.axis(a));
        }
        out
    }
}
