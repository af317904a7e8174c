//! Synthetic flat-track data: Magic Formula lateral force and a parametric
//! inner-liner accelerometer signature.
//!
//! The patch is a raised-cosine window of half-width growing with load as
//! `Fz^(1/3)`. Inside it the radial channel dips from the centripetal level,
//! the longitudinal channel swings through an S-shape with a small positive
//! offset (rolling resistance), and the lateral channel follows `Fy/Fz`
//! (so positive slip reads negative) with a skew towards the trailing edge.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Labels, RawRevolution, RawStream};

pub const STANDARD_GRAVITY: f64 = 9.806_65;
pub const LOADS_N: [f64; 3] = [2080.0, 4160.0, 6240.0];
pub const SPEEDS_KMH: [f64; 2] = [30.0, 60.0];
pub const PRESSURE_KPA: f64 = 220.0;

/// Generator constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TireParams {
    pub radius_m: f64,
    pub sample_rate_hz: f64,
    pub patch_center_deg: f64,
    pub mf_b_per_deg: f64,
    pub mf_c: f64,
    pub mf_mu: f64,
    pub mf_e: f64,
    /// Patch half-width at `ref_load_n`.
    pub half_width_deg: f64,
    pub ref_load_n: f64,
    pub width_exponent: f64,
    pub lateral_gain_g: f64,
    pub lateral_skew: f64,
    /// Peak of the longitudinal S-shape at `long_ref_load_n` and `long_ref_speed_kmh`.
    pub long_amplitude_g: f64,
    pub long_ref_load_n: f64,
    pub long_ref_speed_kmh: f64,
    pub rolling_offset_g: f64,
    /// Radial level reached at the patch centre is `-radial_dip_g * Fz / ref_load_n`.
    pub radial_dip_g: f64,
    pub noise_g: f64,
    pub noise_slip_factor: f64,
    pub noise_load_factor: f64,
    pub noise_ref_load_n: f64,
}

impl Default for TireParams {
    fn default() -> Self {
        TireParams {
            radius_m: 0.3,
            sample_rate_hz: 10_000.0,
            patch_center_deg: 180.0,
            mf_b_per_deg: 0.25,
            mf_c: 1.3,
            mf_mu: 0.9,
            mf_e: -0.1,
            half_width_deg: 12.0,
            ref_load_n: 4160.0,
            width_exponent: 1.0 / 3.0,
            lateral_gain_g: 10.0,
            lateral_skew: 0.3,
            long_amplitude_g: 18.0,
            long_ref_load_n: 2080.0,
            long_ref_speed_kmh: 60.0,
            rolling_offset_g: 1.0,
            radial_dip_g: 20.0,
            noise_g: 0.5,
            noise_slip_factor: 2.0,
            noise_load_factor: 1.0,
            noise_ref_load_n: 6240.0,
        }
    }
}

/// Peak of `sin(u) * (1 + cos u) / 2` on `[-pi, pi]`, reached at `u = pi/3`.
const S_SHAPE_PEAK: f64 = 0.649_519_052_838_329;

impl TireParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("radius_m", self.radius_m),
            ("sample_rate_hz", self.sample_rate_hz),
            ("mf_b_per_deg", self.mf_b_per_deg),
            ("mf_c", self.mf_c),
            ("mf_mu", self.mf_mu),
            ("half_width_deg", self.half_width_deg),
            ("ref_load_n", self.ref_load_n),
            ("width_exponent", self.width_exponent),
            ("lateral_gain_g", self.lateral_gain_g),
            ("long_amplitude_g", self.long_amplitude_g),
            ("long_ref_load_n", self.long_ref_load_n),
            ("long_ref_speed_kmh", self.long_ref_speed_kmh),
            ("radial_dip_g", self.radial_dip_g),
            ("noise_ref_load_n", self.noise_ref_load_n),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("synth.{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("lateral_skew", self.lateral_skew),
            ("rolling_offset_g", self.rolling_offset_g),
            ("noise_g", self.noise_g),
            ("noise_slip_factor", self.noise_slip_factor),
            ("noise_load_factor", self.noise_load_factor),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "synth.{name} must be non-negative, got {v}"
                )));
            }
        }
        if !self.mf_e.is_finite() || !(0.0..360.0).contains(&self.patch_center_deg) {
            return Err(Error::InvalidConfig("synth.mf_e or patch_center_deg out of range".into()));
        }
        Ok(())
    }

    /// Contact patch half-width at vertical load `fz_n`.
    pub fn half_width_at(&self, fz_n: f64) -> f64 {
        self.half_width_deg * (fz_n / self.ref_load_n).powf(self.width_exponent)
    }

    pub fn noise_std(&self, slip_deg: f64, fz_n: f64) -> f64 {
        self.noise_g
            * (1.0
                + self.noise_slip_factor * slip_deg.abs() / 8.0
                + self.noise_load_factor * fz_n / self.noise_ref_load_n)
    }
}

/// Lateral force from the Magic Formula; positive slip gives negative force.
pub fn magic_formula_fy(slip_deg: f64, fz_n: f64, params: &TireParams) -> Result<f64> {
    if !(fz_n > 0.0 && fz_n.is_finite()) {
        return Err(Error::InvalidInput(format!("vertical load must be positive, got {fz_n}")));
    }
    let ba = params.mf_b_per_deg * slip_deg;
    let d = params.mf_mu * fz_n;
    Ok(-d * (params.mf_c * (ba - params.mf_e * (ba - ba.atan())).atan()).sin())
}

/// Operating point of one rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingState {
    pub slip_deg: f64,
    pub fz_n: f64,
    pub speed_kmh: f64,
}

impl OperatingState {
    fn validate(&self) -> Result<()> {
        if !(self.fz_n > 0.0 && self.speed_kmh > 0.0 && self.slip_deg.abs() <= 90.0) {
            return Err(Error::InvalidInput(format!("invalid operating state {self:?}")));
        }
        Ok(())
    }

    pub fn labels(&self, params: &TireParams) -> Result<Labels> {
        Ok(Labels {
            fy_n: magic_formula_fy(self.slip_deg, self.fz_n, params)?,
            fz_n: self.fz_n,
            slip_deg: self.slip_deg,
            speed_kmh: self.speed_kmh,
        })
    }
}

/// Noiseless `(Ac_x, Ac_y, Ac_z)` in g at `theta_deg` from the patch centre.
pub fn signature(theta_deg: f64, state: &OperatingState, params: &TireParams) -> [f64; 3] {
    let v = state.speed_kmh / 3.6;
    let centripetal = v * v / (STANDARD_GRAVITY * params.radius_m);
    let theta = (theta_deg + 180.0).rem_euclid(360.0) - 180.0;
    let half = params.half_width_at(state.fz_n);
    if theta.abs() >= half {
        return [0.0, 0.0, centripetal];
    }
    let u = PI * theta / half;
    let w = 0.5 * (1.0 + u.cos());

    let speed_ratio = state.speed_kmh / params.long_ref_speed_kmh;
    let ax_peak = params.long_amplitude_g * (state.fz_n / params.long_ref_load_n) * speed_ratio * speed_ratio;
    let ax = ax_peak / S_SHAPE_PEAK * u.sin() * w + params.rolling_offset_g * w;

    let fy = magic_formula_fy(state.slip_deg, state.fz_n, params).unwrap_or(0.0);
    let ay = (fy / state.fz_n) * params.lateral_gain_g * w * (1.0 + params.lateral_skew * theta / half);

    let dip = params.radial_dip_g * state.fz_n / params.ref_load_n;
    let az = centripetal - (centripetal + dip) * w;
    [ax, ay, az]
}

/// Encoder increment per sample at `speed_kmh`.
pub fn degrees_per_sample(speed_kmh: f64, params: &TireParams) -> f64 {
    (speed_kmh / 3.6) / params.radius_m * (180.0 / PI) / params.sample_rate_hz
}

/// One revolution starting at encoder 0°, with Gaussian noise drawn from `rng`
/// (pass `None` for the noiseless signature).
pub fn synth_revolution(
    state: &OperatingState,
    params: &TireParams,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<RawRevolution> {
    state.validate()?;
    let labels = state.labels(params)?;
    let step = degrees_per_sample(state.speed_kmh, params);
    let n = (360.0 / step).ceil() as usize;
    let encoder_deg: Vec<f64> = (0..n).map(|k| k as f64 * step).filter(|a| *a < 360.0).collect();
    let mut accel = [
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    ];
    for &a in &encoder_deg {
        let s = signature(a - params.patch_center_deg, state, params);
        for (ch, v) in accel.iter_mut().zip(s) {
            ch.push(v);
        }
    }
    if let Some(rng) = rng {
        let sd = params.noise_std(state.slip_deg, state.fz_n);
        if sd > 0.0 {
            let normal = Normal::new(0.0, sd).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            for ch in accel.iter_mut() {
                for v in ch.iter_mut() {
                    *v += normal.sample(rng);
                }
            }
        }
    }
    Ok(RawRevolution {
        rotation_index: 0,
        rotation_id: 0,
        encoder_deg,
        accel,
        labels,
    })
}

/// How the slip angle evolves over the rotations of a maneuver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SlipProfile {
    /// Continuous sweep 0 → +A → −A → 0 every `period` rotations.
    Triangular { amplitude_deg: f64, period: usize },
    /// Piecewise-constant `(slip, hold)` blocks, cycled.
    Step { schedule: Vec<(f64, usize)> },
}

impl SlipProfile {
    /// Set 2 schedule: 0 → 8 → −8 → −1 in 1° blocks of `hold` rotations.
    pub fn staircase(hold: usize) -> Self {
        let mut levels: Vec<f64> = (0..=8).map(f64::from).collect();
        levels.extend((-8..=7).rev().map(f64::from));
        levels.extend((-7..=-1).map(f64::from));
        SlipProfile::Step {
            schedule: levels.into_iter().map(|s| (s, hold)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SlipProfile::Triangular {
                amplitude_deg,
                period,
            } => {
                if !(*amplitude_deg >= 0.0 && *amplitude_deg <= 8.0) || *period == 0 {
                    return Err(Error::InvalidConfig(
                        "triangular profile needs 0 <= amplitude <= 8 and period >= 1".into(),
                    ));
                }
            }
            SlipProfile::Step { schedule } => {
                if schedule.is_empty()
                    || schedule.iter().any(|(s, h)| *h == 0 || !(s.abs() <= 8.0))
                {
                    return Err(Error::InvalidConfig(
                        "step profile needs non-empty blocks with |slip| <= 8 and hold >= 1".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Slip angle of rotation `r` of the maneuver.
    pub fn slip_at(&self, r: usize) -> f64 {
        match self {
            SlipProfile::Triangular {
                amplitude_deg,
                period,
            } => {
                let p = (r % period) as f64 / *period as f64;
                let tri = if p < 0.25 {
                    4.0 * p
                } else if p < 0.75 {
                    2.0 - 4.0 * p
                } else {
                    4.0 * p - 4.0
                };
                amplitude_deg * tri
            }
            SlipProfile::Step { schedule } => {
                let cycle: usize = schedule.iter().map(|(_, h)| h).sum();
                let mut k = r % cycle;
                for &(s, h) in schedule {
                    if k < h {
                        return s;
                    }
                    k -= h;
                }
                unreachable!("offset within one cycle")
            }
        }
    }
}

/// One (load, speed) block of a data set.
#[derive(Debug, Clone, PartialEq)]
pub struct ManeuverSpec {
    pub vertical_load_n: f64,
    pub speed_kmh: f64,
    pub pressure_kpa: f64,
    pub slip_profile: SlipProfile,
    pub n_rotations: usize,
}

/// Layout of a synthetic data set: every (load, speed) combination in turn,
/// each with the same number of rotations and slip profile.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    /// Distinguishes the noise streams of data sets generated from one seed.
    pub id: u8,
    pub loads_n: Vec<f64>,
    pub speeds_kmh: Vec<f64>,
    pub rotations_per_combo: usize,
    pub profile: SlipProfile,
}

impl DatasetSpec {
    /// Data set 1 (912 rotations, triangular sweep) or 2 (3552, held steps).
    pub fn standard(which: u8) -> Result<Self> {
        let (rotations_per_combo, profile) = match which {
            1 => (
                152,
                SlipProfile::Triangular {
                    amplitude_deg: 8.0,
                    period: 76,
                },
            ),
            2 => (592, SlipProfile::staircase(16)),
            other => {
                return Err(Error::InvalidConfig(format!("data set must be 1 or 2, got {other}")))
            }
        };
        Ok(DatasetSpec {
            id: which,
            loads_n: LOADS_N.to_vec(),
            speeds_kmh: SPEEDS_KMH.to_vec(),
            rotations_per_combo,
            profile,
        })
    }

    pub fn total_rotations(&self) -> usize {
        self.loads_n.len() * self.speeds_kmh.len() * self.rotations_per_combo
    }

    pub fn maneuvers(&self) -> Vec<ManeuverSpec> {
        let mut out = Vec::new();
        for &load in &self.loads_n {
            for &speed in &self.speeds_kmh {
                out.push(ManeuverSpec {
                    vertical_load_n: load,
                    speed_kmh: speed,
                    pressure_kpa: PRESSURE_KPA,
                    slip_profile: self.profile.clone(),
                    n_rotations: self.rotations_per_combo,
                });
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        if self.rotations_per_combo == 0 || self.loads_n.is_empty() || self.speeds_kmh.is_empty() {
            return Err(Error::InvalidConfig("data set has no rotations".into()));
        }
        if self.loads_n.iter().chain(&self.speeds_kmh).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig("loads and speeds must be positive".into()));
        }
        Ok(())
    }

    /// Operating point of every rotation, in stream order.
    pub fn states(&self) -> Vec<OperatingState> {
        self.maneuvers()
            .iter()
            .flat_map(|m| {
                (0..m.n_rotations).map(move |r| OperatingState {
                    slip_deg: m.slip_profile.slip_at(r),
                    fz_n: m.vertical_load_n,
                    speed_kmh: m.speed_kmh,
                })
            })
            .collect()
    }
}

/// Noise generator for rotation `rotation` of data set `id`.
pub fn rotation_rng(seed: u64, id: u8, rotation: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (u64::from(id) << 56));
    rng.set_stream(rotation);
    rng
}

/// Generates the continuous raw stream of a data set.
///
/// Rotations follow each other without gaps; each starts at encoder 0° and
/// carries its own rotation id and labels. Output depends only on the inputs.
pub fn generate_dataset(spec: &DatasetSpec, params: &TireParams, seed: u64) -> Result<RawStream> {
    spec.validate()?;
    params.validate()?;
    let mut stream = RawStream::empty(params.sample_rate_hz);
    let dt = 1.0 / params.sample_rate_hz;
    for (r, state) in spec.states().iter().enumerate() {
        let id = r as u64;
        let mut rng = rotation_rng(seed, spec.id, id);
        let rev = synth_revolution(state, params, Some(&mut rng))?;
        let start = stream.len();
        stream
            .time_s
            .extend((0..rev.len()).map(|k| (start + k) as f64 * dt));
        stream.encoder_deg.extend_from_slice(&rev.encoder_deg);
        for (dst, src) in stream.accel.iter_mut().zip(&rev.accel) {
            dst.extend_from_slice(src);
        }
        stream.rotation_id.extend(std::iter::repeat_n(id, rev.len()));
        stream.labels.insert(id, rev.labels);
    }
    Ok(stream)
}
