//! CSV formats: raw streams, feature grids, predictions and reports.
//!
//! Floats are written in scientific notation with 17 significant digits so a
//! write/read cycle is lossless and equal inputs give byte-identical files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::{CorrelationProfile, MetricsReport, SlipBin, StudyResult};
use crate::gpr::Prediction;
use crate::signal::{Axis, Labels, PatchFeatures, RawStream};

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 10_000.0;

pub const RAW_COLUMNS: [&str; 10] = [
    "t_s",
    "encoder_deg",
    "ax_g",
    "ay_g",
    "az_g",
    "rotation_id",
    "Fy_N",
    "Fz_N",
    "slip_deg",
    "speed_kmh",
];

pub const FEATURE_LABEL_COLUMNS: [&str; 8] = [
    "rotation_id",
    "Fy_N",
    "Fz_N",
    "slip_deg",
    "speed_kmh",
    "center_deg",
    "start_deg",
    "step_deg",
];

pub const PREDICTION_COLUMNS: [&str; 10] = [
    "rotation_id",
    "Fy_N",
    "Fz_N",
    "slip_deg",
    "speed_kmh",
    "mean_N",
    "variance_N2",
    "predictive_variance_N2",
    "lo_N",
    "hi_N",
];

/// Lossless decimal rendering of a float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) struct Out {
    w: BufWriter<File>,
    path: std::path::PathBuf,
}

impl Out {
    pub(crate) fn create(path: &Path) -> Result<Self> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Out {
            w: BufWriter::with_capacity(1 << 20, f),
            path: path.to_path_buf(),
        })
    }

    pub(crate) fn line(&mut self, fields: &[String]) -> Result<()> {
        let s = fields.join(",");
        writeln!(self.w, "{s}").map_err(|e| Error::io(&self.path, e))
    }

    pub(crate) fn finish(mut self) -> Result<()> {
        self.w.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Header-mapped CSV reader producing located errors.
struct In<'a> {
    path: &'a Path,
    reader: csv::Reader<File>,
    header: Vec<String>,
}

impl<'a> In<'a> {
    fn open(path: &'a Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(file);
        let header = reader
            .headers()
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(str::to_string)
            .collect::<Vec<_>>();
        let mut seen = std::collections::HashSet::new();
        for (i, h) in header.iter().enumerate() {
            if !seen.insert(h.as_str()) {
                return Err(Error::format(path, 1, i + 1, format!("duplicate column '{h}'")));
            }
        }
        Ok(In {
            path,
            reader,
            header,
        })
    }

    /// Index of every required column; any other column is rejected.
    fn map(&self, required: &[&str], extra: impl Fn(&str) -> bool) -> Result<Vec<usize>> {
        for (i, h) in self.header.iter().enumerate() {
            if !required.contains(&h.as_str()) && !extra(h) {
                return Err(Error::format(self.path, 1, i + 1, format!("unexpected column '{h}'")));
            }
        }
        required
            .iter()
            .map(|name| {
                self.header.iter().position(|h| h == name).ok_or_else(|| {
                    Error::format(self.path, 1, 1, format!("missing column '{name}'"))
                })
            })
            .collect()
    }

    fn for_each(&mut self, mut f: impl FnMut(&Row<'_>) -> Result<()>) -> Result<()> {
        let mut record = csv::StringRecord::new();
        loop {
            match self.reader.read_record(&mut record) {
                Ok(false) => return Ok(()),
                Ok(true) => {
                    let line = record.position().map_or(0, |p| p.line() as usize);
                    f(&Row {
                        path: self.path,
                        line,
                        record: &record,
                    })?;
                }
                Err(e) => return Err(csv_error(self.path, e)),
            }
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::format(
            path,
            line,
            (len as usize).min(expected_len as usize) + 1,
            format!("expected {expected_len} fields, found {len}"),
        ),
        other => Error::format(path, line, 1, format!("{other:?}")),
    }
}

struct Row<'a> {
    path: &'a Path,
    line: usize,
    record: &'a csv::StringRecord,
}

impl Row<'_> {
    fn err(&self, col: usize, msg: impl Into<String>) -> Error {
        Error::format(self.path, self.line, col + 1, msg)
    }

    fn f64(&self, col: usize) -> Result<f64> {
        let s = &self.record[col];
        let v: f64 = s
            .parse()
            .map_err(|_| self.err(col, format!("not a number: '{s}'")))?;
        if !v.is_finite() {
            return Err(self.err(col, format!("non-finite value '{s}'")));
        }
        Ok(v)
    }

    fn u64(&self, col: usize) -> Result<u64> {
        let s = &self.record[col];
        s.parse()
            .map_err(|_| self.err(col, format!("not an unsigned integer: '{s}'")))
    }
}

fn label_fields(l: &Labels) -> [String; 4] {
    [fmt_f64(l.fy_n), fmt_f64(l.fz_n), fmt_f64(l.slip_deg), fmt_f64(l.speed_kmh)]
}

fn read_labels(row: &Row<'_>, cols: &[usize]) -> Result<Labels> {
    Ok(Labels {
        fy_n: row.f64(cols[0])?,
        fz_n: row.f64(cols[1])?,
        slip_deg: row.f64(cols[2])?,
        speed_kmh: row.f64(cols[3])?,
    })
}

pub fn write_raw_csv(path: &Path, stream: &RawStream) -> Result<()> {
    stream.validate()?;
    let mut out = Out::create(path)?;
    out.line(&RAW_COLUMNS.map(String::from))?;
    for i in 0..stream.len() {
        let id = stream.rotation_id[i];
        let [fy, fz, slip, speed] = label_fields(&stream.labels[&id]);
        out.line(&[
            fmt_f64(stream.time_s[i]),
            fmt_f64(stream.encoder_deg[i]),
            fmt_f64(stream.accel[0][i]),
            fmt_f64(stream.accel[1][i]),
            fmt_f64(stream.accel[2][i]),
            id.to_string(),
            fy,
            fz,
            slip,
            speed,
        ])?;
    }
    out.finish()
}

/// Sample rate implied by the time column; integral rates are snapped.
fn infer_sample_rate(time: &[f64]) -> f64 {
    if time.len() < 2 {
        return DEFAULT_SAMPLE_RATE_HZ;
    }
    let rate = (time.len() - 1) as f64 / (time[time.len() - 1] - time[0]);
    let r = rate.round();
    if (rate - r).abs() <= 1e-6 * r {
        r
    } else {
        rate
    }
}

pub fn read_raw_csv(path: &Path) -> Result<RawStream> {
    let mut input = In::open(path)?;
    let cols = input.map(&RAW_COLUMNS, |_| false)?;
    let mut s = RawStream::empty(DEFAULT_SAMPLE_RATE_HZ);
    let mut labels: BTreeMap<u64, Labels> = BTreeMap::new();
    input.for_each(|row| {
        let t = row.f64(cols[0])?;
        if let Some(&prev) = s.time_s.last() {
            if t <= prev {
                return Err(row.err(cols[0], format!("time not increasing: {prev} -> {t}")));
            }
        }
        let enc = row.f64(cols[1])?;
        if !(0.0..360.0).contains(&enc) {
            return Err(row.err(cols[1], format!("encoder angle {enc} outside [0, 360)")));
        }
        s.time_s.push(t);
        s.encoder_deg.push(enc);
        for a in 0..3 {
            s.accel[a].push(row.f64(cols[2 + a])?);
        }
        let id = row.u64(cols[5])?;
        let l = read_labels(row, &cols[6..])?;
        match labels.get(&id) {
            Some(prev) if *prev != l => {
                return Err(row.err(cols[6], format!("labels change within rotation {id}")))
            }
            Some(_) => {}
            None => {
                labels.insert(id, l);
            }
        }
        s.rotation_id.push(id);
        Ok(())
    })?;
    s.labels = labels;
    s.sample_rate = infer_sample_rate(&s.time_s);
    Ok(s)
}

pub fn write_features_csv(path: &Path, features: &[PatchFeatures]) -> Result<()> {
    let points = features.first().map_or(0, PatchFeatures::points_per_axis);
    if features.iter().any(|f| f.points_per_axis() != points) {
        return Err(Error::InvalidInput("feature grids differ in size".into()));
    }
    let mut out = Out::create(path)?;
    let mut header: Vec<String> = FEATURE_LABEL_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..3 * points).map(|i| format!("f_{i}")));
    out.line(&header)?;
    for f in features {
        let mut row = vec![f.rotation_id.to_string()];
        row.extend(label_fields(&f.labels));
        row.extend([fmt_f64(f.center_deg), fmt_f64(f.start_deg), fmt_f64(f.step_deg)]);
        row.extend(f.flatten(&Axis::ALL).into_iter().map(fmt_f64));
        out.line(&row)?;
    }
    out.finish()
}

pub fn read_features_csv(path: &Path) -> Result<Vec<PatchFeatures>> {
    let mut input = In::open(path)?;
    let is_feature = |h: &str| {
        h.strip_prefix("f_")
            .is_some_and(|i| i.parse::<usize>().is_ok_and(|n| n.to_string() == i))
    };
    let cols = input.map(&FEATURE_LABEL_COLUMNS, is_feature)?;
    let nf = input.header.iter().filter(|h| is_feature(h)).count();
    if nf % 3 != 0 {
        return Err(Error::format(path, 1, 1, format!("{nf} feature columns is not a multiple of 3")));
    }
    let fcols: Vec<usize> = (0..nf)
        .map(|i| {
            let name = format!("f_{i}");
            input
                .header
                .iter()
                .position(|h| *h == name)
                .ok_or_else(|| Error::format(path, 1, 1, format!("missing column '{name}'")))
        })
        .collect::<Result<_>>()?;
    let points = nf / 3;
    let mut out = Vec::new();
    input.for_each(|row| {
        let mut accel: [Vec<f64>; 3] = Default::default();
        for (i, &c) in fcols.iter().enumerate() {
            accel[i / points].push(row.f64(c)?);
        }
        out.push(PatchFeatures {
            rotation_id: row.u64(cols[0])?,
            labels: read_labels(row, &cols[1..5])?,
            center_deg: row.f64(cols[5])?,
            start_deg: row.f64(cols[6])?,
            step_deg: row.f64(cols[7])?,
            accel,
        });
        Ok(())
    })?;
    Ok(out)
}

/// One evaluated rotation: ground truth and posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRecord {
    pub rotation_id: u64,
    pub labels: Labels,
    pub prediction: Prediction,
}

pub fn write_predictions_csv(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    let mut out = Out::create(path)?;
    out.line(&PREDICTION_COLUMNS.map(String::from))?;
    for r in records {
        let p = &r.prediction;
        let mut row = vec![r.rotation_id.to_string()];
        row.extend(label_fields(&r.labels));
        row.extend(
            [
                p.mean,
                p.variance,
                p.predictive_variance,
                p.interval_95.0,
                p.interval_95.1,
            ]
            .map(fmt_f64),
        );
        out.line(&row)?;
    }
    out.finish()
}

pub fn read_predictions_csv(path: &Path) -> Result<Vec<PredictionRecord>> {
    let mut input = In::open(path)?;
    let c = input.map(&PREDICTION_COLUMNS, |_| false)?;
    let mut out = Vec::new();
    input.for_each(|row| {
        let variance = row.f64(c[6])?;
        let predictive = row.f64(c[7])?;
        if variance < 0.0 || predictive < 0.0 {
            return Err(row.err(c[6], "negative variance"));
        }
        out.push(PredictionRecord {
            rotation_id: row.u64(c[0])?,
            labels: read_labels(row, &c[1..5])?,
            prediction: Prediction {
                mean: row.f64(c[5])?,
                variance,
                predictive_variance: predictive,
                interval_95: (row.f64(c[8])?, row.f64(c[9])?),
            },
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn write_metrics_csv(path: &Path, m: &MetricsReport) -> Result<()> {
    let mut out = Out::create(path)?;
    out.line(&["nrmse_pct", "pearson_r", "mean_abs_err_N", "coverage_95", "n"].map(String::from))?;
    out.line(&[
        fmt_f64(m.nrmse),
        fmt_f64(m.pearson_r),
        fmt_f64(m.mean_abs_err),
        fmt_f64(m.coverage_95),
        m.n.to_string(),
    ])?;
    out.finish()
}

/// Prediction against rotation index, with the 95% band.
pub fn write_plot_csv(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    let mut out = Out::create(path)?;
    out.line(&["index", "rotation_id", "truth_N", "mean_N", "lo_N", "hi_N"].map(String::from))?;
    for (i, r) in records.iter().enumerate() {
        out.line(&[
            i.to_string(),
            r.rotation_id.to_string(),
            fmt_f64(r.labels.fy_n),
            fmt_f64(r.prediction.mean),
            fmt_f64(r.prediction.interval_95.0),
            fmt_f64(r.prediction.interval_95.1),
        ])?;
    }
    out.finish()
}

pub fn write_slip_bins_csv(path: &Path, bins: &[SlipBin]) -> Result<()> {
    let mut out = Out::create(path)?;
    out.line(&["slip_lo_deg", "slip_hi_deg", "n", "mean_abs_err_N", "std_abs_err_N"].map(String::from))?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for b in bins {
        out.line(&[
            fmt_f64(b.lo_deg),
            fmt_f64(b.hi_deg),
            b.n.to_string(),
            opt(b.mean_abs_err),
            opt(b.std_abs_err),
        ])?;
    }
    out.finish()
}

pub fn write_study_csv(path: &Path, results: &[StudyResult]) -> Result<()> {
    let mut out = Out::create(path)?;
    out.line(
        &[
            "config", "inputs", "reps", "min", "q1", "median", "q3", "max", "mean", "std", "nrmse_reps",
        ]
        .map(String::from),
    )?;
    for r in results {
        let s = &r.stats;
        out.line(&[
            r.label.clone(),
            r.input_dim.to_string(),
            r.nrmse.len().to_string(),
            fmt_f64(s.min),
            fmt_f64(s.q1),
            fmt_f64(s.median),
            fmt_f64(s.q3),
            fmt_f64(s.max),
            fmt_f64(s.mean),
            fmt_f64(s.std),
            r.nrmse.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(";"),
        ])?;
    }
    out.finish()
}

pub fn write_profile_csv(path: &Path, p: &CorrelationProfile) -> Result<()> {
    let mut out = Out::create(path)?;
    out.line(&["angle_deg", "r_x", "r_y", "r_z", "flagged"].map(String::from))?;
    for (k, a) in p.relative_angles.iter().enumerate() {
        let flags: String = Axis::ALL
            .iter()
            .filter(|ax| p.flagged.contains(&(**ax, k)))
            .map(|ax| ax.name())
            .collect();
        out.line(&[
            fmt_f64(*a),
            fmt_f64(p.r[0][k]),
            fmt_f64(p.r[1][k]),
            fmt_f64(p.r[2][k]),
            flags,
        ])?;
    }
    out.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::fs;

    fn labels(slip: f64) -> Labels {
        Labels {
            fy_n: -123.456_789_012_345_67 * slip,
            fz_n: 2080.0,
            slip_deg: slip,
            speed_kmh: 30.0,
        }
    }

    fn stream() -> RawStream {
        let mut s = RawStream::empty(10_000.0);
        for k in 0..50 {
            s.time_s.push(k as f64 / 10_000.0);
            s.encoder_deg.push((k as f64 * 17.3).rem_euclid(360.0));
            s.accel[0].push((k as f64).sin() / 3.0);
            s.accel[1].push(1e-300 * k as f64);
            s.accel[2].push(94.0 + k as f64 * 0.1);
            s.rotation_id.push(k / 20);
        }
        for id in 0..3 {
            s.labels.insert(id, labels(id as f64 + 0.1));
        }
        s
    }

    #[test]
    fn raw_round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("raw.csv");
        let s = stream();
        write_raw_csv(&p, &s).unwrap();
        assert_eq!(read_raw_csv(&p).unwrap(), s);
        let q = dir.path().join("raw2.csv");
        write_raw_csv(&q, &s).unwrap();
        assert_eq!(fs::read(&p).unwrap(), fs::read(&q).unwrap());
    }

    #[test]
    fn raw_header_only_and_shuffled_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        fs::write(&p, RAW_COLUMNS.join(",") + "\n").unwrap();
        let s = read_raw_csv(&p).unwrap();
        assert!(s.is_empty());

        let cols = [
            "rotation_id", "az_g", "t_s", "ax_g", "Fy_N", "encoder_deg", "ay_g", "speed_kmh", "Fz_N",
            "slip_deg",
        ];
        let text = format!("{}\n3,90.5,0.5,1.5,-10,12,0.25,60,4160,2\n", cols.join(","));
        fs::write(&p, text).unwrap();
        let s = read_raw_csv(&p).unwrap();
        assert_eq!(s.accel[2], vec![90.5]);
        assert_eq!(s.encoder_deg, vec![12.0]);
        assert_eq!(s.labels[&3].fy_n, -10.0);
    }

    #[test]
    fn raw_reader_errors_are_located() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        let head = RAW_COLUMNS.join(",");
        let cases = [
            (format!("{head}\n0,1,2,3,4,0,1,1,1,1\n0,2,2,3,4,0,1,1,1,1\n"), 3, 1),
            (format!("{head}\n0,1,2,NaN,4,0,1,1,1,1\n"), 2, 4),
            (format!("{head}\n0,1,2,x,4,0,1,1,1,1\n"), 2, 4),
            (format!("{head}\n0,1,2,3,4,0,1,1,1,1\n1,2,2,3,4,0,2,1,1,1\n"), 3, 7),
            (format!("{head}\n0,1,2,3\n"), 2, 5),
            ("t_s,encoder_deg\n".to_string(), 1, 1),
            (format!("{head},extra\n"), 1, 11),
        ];
        for (text, line, col) in cases {
            fs::write(&p, &text).unwrap();
            match read_raw_csv(&p) {
                Err(Error::Format { line: l, column: c, .. }) => {
                    assert_eq!((l, c), (line, col), "{text}")
                }
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    fn features(points: usize, n: usize) -> Vec<PatchFeatures> {
        (0..n)
            .map(|i| PatchFeatures {
                rotation_id: i as u64 + 7,
                labels: labels(i as f64 * 0.37),
                center_deg: 181.25,
                start_deg: 146.25,
                step_deg: 70.0 / points as f64,
                accel: [
                    (0..points).map(|k| (k * i) as f64 / 7.0).collect(),
                    (0..points).map(|k| -(k as f64) / 3.0).collect(),
                    (0..points).map(|k| 1e5 / (k as f64 + 1.0)).collect(),
                ],
            })
            .collect()
    }

    #[test]
    fn feature_round_trip_and_widths() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        for points in [140, 14] {
            let f = features(points, 4);
            write_features_csv(&p, &f).unwrap();
            let text = fs::read_to_string(&p).unwrap();
            let header = text.lines().next().unwrap();
            assert_eq!(header.split(',').filter(|h| h.starts_with("f_")).count(), 3 * points);
            assert_eq!(read_features_csv(&p).unwrap(), f);
        }
        write_features_csv(&p, &[]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap().lines().count(), 1);
        assert!(read_features_csv(&p).unwrap().is_empty());
    }

    #[test]
    fn prediction_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        let recs: Vec<_> = (0..5)
            .map(|i| PredictionRecord {
                rotation_id: i,
                labels: labels(i as f64),
                prediction: Prediction {
                    mean: 0.1 * i as f64,
                    variance: 2.0 / 3.0,
                    predictive_variance: 1.0 / 3.0 + 2.0 / 3.0,
                    interval_95: (-1.0 / 7.0, 1.0 / 7.0),
                },
            })
            .collect();
        write_predictions_csv(&p, &recs).unwrap();
        assert_eq!(read_predictions_csv(&p).unwrap(), recs);
    }

    proptest! {
        #[test]
        fn float_formatting_is_lossless(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
