//! Revolution segmentation, contact patch detection and angular resampling.

use super::{Axis, PatchFeatures, PatchWindow, RawRevolution, RawStream};
use crate::error::{Error, Result};

pub const DEFAULT_HALF_SPAN_DEG: f64 = 35.0;
pub const DEFAULT_STEP_DEG: f64 = 0.5;
/// Entry-to-exit search range; the patch is always narrower than this.
pub const MAX_PATCH_SPAN_DEG: f64 = 70.0;

const GRID_TOL: f64 = 1e-9;

/// Splits a stream at encoder wraps and keeps only complete revolutions.
///
/// A run between two wraps is complete when it starts within one sample step
/// of 0° and ends within one sample step of 360°. Leading and trailing
/// partial revolutions are dropped.
pub fn segment_revolutions(stream: &RawStream) -> Result<Vec<RawRevolution>> {
    stream.validate()?;
    let enc = &stream.encoder_deg;
    if let Some(i) = enc.iter().position(|a| !(a.is_finite() && (0.0..360.0).contains(a))) {
        return Err(Error::InvalidData(format!(
            "encoder angle {} at sample {i} outside [0, 360)",
            enc[i]
        )));
    }

    let mut bounds = vec![0usize];
    for i in 1..enc.len() {
        let d = enc[i] - enc[i - 1];
        if d > 0.0 {
            continue;
        }
        // A genuine wrap drops by most of a turn; anything else runs backwards.
        if d < -180.0 {
            bounds.push(i);
        } else {
            return Err(Error::InvalidData(format!(
                "encoder not increasing at sample {i}: {} -> {}",
                enc[i - 1],
                enc[i]
            )));
        }
    }
    bounds.push(enc.len());

    let mut out = Vec::new();
    for w in bounds.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo < 2 {
            continue;
        }
        let seg = &enc[lo..hi];
        let max_step = seg.windows(2).map(|p| p[1] - p[0]).fold(0.0f64, f64::max);
        let tol = 1.5 * max_step;
        if seg[0] > tol || seg[seg.len() - 1] < 360.0 - tol {
            continue;
        }
        let rotation_id = stream.rotation_id[lo + (hi - lo) / 2];
        let labels = stream.labels[&rotation_id];
        out.push(RawRevolution {
            rotation_index: out.len() as u64,
            rotation_id,
            encoder_deg: seg.to_vec(),
            accel: [
                stream.accel[0][lo..hi].to_vec(),
                stream.accel[1][lo..hi].to_vec(),
                stream.accel[2][lo..hi].to_vec(),
            ],
            labels,
        });
    }
    Ok(out)
}

/// Locates the contact patch from the longitudinal channel.
///
/// Entry is the global minimum; exit is the largest sample within
/// [`MAX_PATCH_SPAN_DEG`] after it, searching forward around the circle.
/// The exit must be a strict interior peak of the search range.
pub fn detect_contact_patch(rev: &RawRevolution) -> Result<PatchWindow> {
    let fail = |reason: &str| Error::PatchDetection {
        rotation: rev.rotation_index,
        reason: reason.to_string(),
    };
    let ax = rev.channel(Axis::X);
    let enc = &rev.encoder_deg;
    if ax.len() < 3 || ax.len() != enc.len() {
        return Err(fail("revolution too short"));
    }
    if ax.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData(format!(
            "non-finite longitudinal sample in rotation {}",
            rev.rotation_index
        )));
    }

    let n = ax.len();
    let b = (0..n).fold(0, |m, i| if ax[i] < ax[m] { i } else { m });

    let mut best: Option<usize> = None;
    let mut last_in_range = None;
    for step in 1..n {
        let j = (b + step) % n;
        let ahead = (enc[j] - enc[b]).rem_euclid(360.0);
        if ahead >= MAX_PATCH_SPAN_DEG {
            break;
        }
        last_in_range = Some(j);
        if best.is_none_or(|m| ax[j] > ax[m]) {
            best = Some(j);
        }
    }
    let d = match best {
        Some(d) if ax[d] > ax[b] => d,
        _ => return Err(fail("no maximum after the entry minimum")),
    };
    if Some(d) == last_in_range {
        return Err(fail("exit maximum sits on the search boundary"));
    }

    let entry = enc[b];
    let width = (enc[d] - entry).rem_euclid(360.0);
    Ok(PatchWindow {
        entry_deg: entry,
        center_deg: (entry + width / 2.0).rem_euclid(360.0),
        exit_deg: enc[d],
    })
}

fn grid_count(span: f64, step: f64) -> Option<usize> {
    let k = span / step;
    let r = k.round();
    ((k - r).abs() < GRID_TOL && r >= 1.0).then_some(r as usize)
}

/// Linearly interpolates every axis onto `centre - half_span + k * step`.
///
/// A revolution covering the full circle is treated as periodic so windows
/// straddling 0° are handled; a partial revolution must contain the whole
/// requested span.
pub fn resample_patch(
    rev: &RawRevolution,
    window: &PatchWindow,
    half_span: f64,
    step: f64,
) -> Result<PatchFeatures> {
    if !(half_span > 0.0 && step > 0.0 && half_span.is_finite() && step.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "half span {half_span} and step {step} must be positive"
        )));
    }
    let count = grid_count(2.0 * half_span, step).ok_or_else(|| {
        Error::InvalidConfig(format!("step {step} does not divide span {}", 2.0 * half_span))
    })?;
    let enc = &rev.encoder_deg;
    if enc.len() < 2 {
        return Err(Error::InvalidWindow("revolution has fewer than two samples".into()));
    }
    if enc.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidData(format!(
            "encoder angles not increasing within rotation {}",
            rev.rotation_index
        )));
    }

    let first = enc[0];
    let last = enc[enc.len() - 1];
    let max_step = enc.windows(2).map(|p| p[1] - p[0]).fold(0.0f64, f64::max);
    let periodic = first + 360.0 - last <= 1.5 * max_step;
    let start = window.center_deg - half_span;

    if periodic {
        if 2.0 * half_span >= 360.0 {
            return Err(Error::InvalidWindow(format!(
                "span {} exceeds one revolution",
                2.0 * half_span
            )));
        }
    } else {
        let (lo, hi) = (start, window.center_deg + half_span);
        if lo < first || hi > last {
            return Err(Error::InvalidWindow(format!(
                "span [{lo}, {hi}] not covered by rotation {} ([{first}, {last}])",
                rev.rotation_index
            )));
        }
    }

    let mut accel = [
        Vec::with_capacity(count),
        Vec::with_capacity(count),
        Vec::with_capacity(count),
    ];
    for k in 0..count {
        let mut t = start + k as f64 * step;
        if periodic {
            t = first + (t - first).rem_euclid(360.0);
        }
        let i = enc.partition_point(|&a| a <= t);
        // Bracket [lo, hi] with the wrap segment closing the circle.
        let (lo, hi, a_lo, a_hi) = if i == 0 {
            // Only reachable for t == first after rem_euclid rounding.
            (0, 0, first, first)
        } else if i == enc.len() {
            (enc.len() - 1, 0, last, first + 360.0)
        } else {
            (i - 1, i, enc[i - 1], enc[i])
        };
        let w = if a_hi > a_lo { (t - a_lo) / (a_hi - a_lo) } else { 0.0 };
        for (axis, out) in accel.iter_mut().enumerate() {
            let ch = &rev.accel[axis];
            let y0 = ch[lo];
            out.push(if w == 0.0 { y0 } else { y0 + w * (ch[hi] - y0) });
        }
    }

    Ok(PatchFeatures {
        rotation_id: rev.rotation_id,
        labels: rev.labels,
        center_deg: window.center_deg,
        start_deg: start.rem_euclid(360.0),
        step_deg: step,
        accel,
    })
}

/// Keeps every `step / features.step_deg`-th grid point on each axis.
pub fn downsample_resolution(features: &PatchFeatures, step: f64) -> Result<PatchFeatures> {
    let bad = || {
        Error::InvalidConfig(format!(
            "resolution {step}° must be a multiple of {}° dividing {} points",
            features.step_deg,
            features.points_per_axis()
        ))
    };
    if !(step > 0.0 && step.is_finite()) {
        return Err(bad());
    }
    let ratio = grid_count(step, features.step_deg).ok_or_else(bad)?;
    let n = features.points_per_axis();
    if n % ratio != 0 {
        return Err(bad());
    }
    let pick = |v: &Vec<f64>| v.iter().step_by(ratio).copied().collect::<Vec<_>>();
    Ok(PatchFeatures {
        step_deg: step,
        accel: [
            pick(&features.accel[0]),
            pick(&features.accel[1]),
            pick(&features.accel[2]),
        ],
        ..features.clone()
    })
}
