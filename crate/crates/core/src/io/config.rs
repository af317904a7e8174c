//! Flat `section.key = value` configuration with `#` comments.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::gpr::GprConfig;
use crate::signal::{AxisSet, FeatureConfig, PreprocessConfig};
use crate::synth::{DatasetSpec, SlipProfile, TireParams};

/// Settings of the evaluation studies.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub repetitions: usize,
    pub train_frac: f64,
    pub k: usize,
    /// Optimizer starts per fit inside the holdout studies.
    pub study_restarts: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            repetitions: 20,
            train_frac: 0.7,
            k: 5,
            study_restarts: 5,
        }
    }
}

/// Everything a pipeline run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub preprocess: PreprocessConfig,
    pub features: FeatureConfig,
    pub gpr: GprConfig,
    pub tire: TireParams,
    pub set1: DatasetSpec,
    pub set2: DatasetSpec,
    pub eval: EvalSettings,
    pub bench_repeats: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            preprocess: PreprocessConfig::default(),
            features: FeatureConfig::default(),
            gpr: GprConfig::default(),
            tire: TireParams::default(),
            set1: DatasetSpec::standard(1).expect("set 1"),
            set2: DatasetSpec::standard(2).expect("set 2"),
            eval: EvalSettings::default(),
            bench_repeats: 10,
        }
    }
}

fn parse_num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse()
        .map_err(|_| format!("cannot parse {v:?} as a number"))
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got {v:?}")),
    }
}

fn parse_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split(',').map(|s| parse_num(s.trim())).collect()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

fn triangular(spec: &mut DatasetSpec) -> std::result::Result<(&mut f64, &mut usize), String> {
    match &mut spec.profile {
        SlipProfile::Triangular {
            amplitude_deg,
            period,
        } => Ok((amplitude_deg, period)),
        SlipProfile::Step { .. } => Err("data set does not use a triangular profile".into()),
    }
}

fn set_hold(spec: &mut DatasetSpec, hold: usize) -> std::result::Result<(), String> {
    match &mut spec.profile {
        SlipProfile::Step { schedule } => {
            schedule.iter_mut().for_each(|b| b.1 = hold);
            Ok(())
        }
        SlipProfile::Triangular { .. } => Err("data set does not use a step profile".into()),
    }
}

fn hold_of(spec: &DatasetSpec) -> Option<usize> {
    match &spec.profile {
        SlipProfile::Step { schedule } => schedule.first().map(|b| b.1),
        SlipProfile::Triangular { .. } => None,
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses config text; `origin` only labels errors.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("");
            if content.trim().is_empty() {
                continue;
            }
            let Some(eq) = content.find('=') else {
                let col = raw.len() - raw.trim_start().len() + 1;
                return Err(Error::format(origin, line, col, "expected `key = value`"));
            };
            let key = content[..eq].trim();
            let value = content[eq + 1..].trim();
            let key_col = raw.len() - raw.trim_start().len() + 1;
            let value_col = eq + 2 + (content[eq + 1..].len() - content[eq + 1..].trim_start().len());
            if key.is_empty() {
                return Err(Error::format(origin, line, key_col, "empty key"));
            }
            if seen.iter().any(|k| k == key) {
                return Err(Error::format(origin, line, key_col, format!("duplicate key {key}")));
            }
            seen.push(key.to_string());
            cfg.set(key, value).map_err(|(m, on_key)| {
                Error::format(origin, line, if on_key { key_col } else { value_col }, m)
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one key. The flag in the error says whether the key itself
    /// (rather than its value) is at fault.
    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), (String, bool)> {
        let val = |r: std::result::Result<(), String>| r.map_err(|m| (m, false));
        let (section, name) = key.split_once('.').unwrap_or(("", key));
        match (section, name) {
            ("", "seed") => val(parse_num(v).map(|x| self.seed = x)),
            ("filter", "cutoff_hz") => val(parse_num(v).map(|x| self.preprocess.cutoff_hz = x)),
            ("filter", "order") => val(parse_num(v).map(|x| self.preprocess.order = x)),
            ("patch", "half_span_deg") => val(parse_num(v).map(|x| self.preprocess.half_span_deg = x)),
            ("patch", "step_deg") => val(parse_num(v).map(|x| self.preprocess.step_deg = x)),
            ("features", "axes") => val(v
                .parse::<AxisSet>()
                .map(|a| self.features.axes = a)
                .map_err(|e| e.to_string())),
            ("features", "resolution_deg") => {
                val(parse_num(v).map(|x| self.features.resolution_deg = x))
            }
            ("gpr", "restarts") => val(parse_num(v).map(|x| self.gpr.restarts = x)),
            ("gpr", "ard") => val(parse_bool(v).map(|x| self.gpr.ard = x)),
            ("gpr", "init_signal_variance") => {
                val(parse_num(v).map(|x| self.gpr.init_signal_variance = x))
            }
            ("gpr", "init_length_scale") => val(if v == "auto" {
                self.gpr.init_length_scale = None;
                Ok(())
            } else {
                parse_num(v).map(|x| self.gpr.init_length_scale = Some(x))
            }),
            ("gpr", "init_noise_variance") => {
                val(parse_num(v).map(|x| self.gpr.init_noise_variance = x))
            }
            ("gpr", "signal_variance_min") => val(parse_num(v).map(|x| self.gpr.signal_variance_bounds.0 = x)),
            ("gpr", "signal_variance_max") => val(parse_num(v).map(|x| self.gpr.signal_variance_bounds.1 = x)),
            ("gpr", "length_scale_min") => val(parse_num(v).map(|x| self.gpr.length_scale_bounds.0 = x)),
            ("gpr", "length_scale_max") => val(parse_num(v).map(|x| self.gpr.length_scale_bounds.1 = x)),
            ("gpr", "noise_variance_min") => val(parse_num(v).map(|x| self.gpr.noise_variance_bounds.0 = x)),
            ("gpr", "noise_variance_max") => val(parse_num(v).map(|x| self.gpr.noise_variance_bounds.1 = x)),
            ("gpr", "max_iter") => val(parse_num(v).map(|x| self.gpr.ascent.max_iter = x)),
            ("gpr", "grad_tol") => val(parse_num(v).map(|x| self.gpr.ascent.grad_tol = x)),
            ("gpr", "value_tol") => val(parse_num(v).map(|x| self.gpr.ascent.value_tol = x)),
            ("gpr", "memory") => val(parse_num(v).map(|x| self.gpr.ascent.memory = x)),
            ("gpr", "max_step") => val(parse_num(v).map(|x| self.gpr.ascent.max_step = x)),
            ("gpr", "jitter_ladder") => val(parse_list(v).map(|x| self.gpr.jitter_ladder = x)),
            ("synth", field) => self.set_tire(field, v),
            ("dataset", "loads_n") => val(parse_list(v).map(|x| {
                self.set1.loads_n = x.clone();
                self.set2.loads_n = x;
            })),
            ("dataset", "speeds_kmh") => val(parse_list(v).map(|x| {
                self.set1.speeds_kmh = x.clone();
                self.set2.speeds_kmh = x;
            })),
            ("set1", "rotations_per_combo") => {
                val(parse_num(v).map(|x| self.set1.rotations_per_combo = x))
            }
            ("set1", "amplitude_deg") => val(parse_num(v).and_then(|x| {
                *triangular(&mut self.set1)?.0 = x;
                Ok(())
            })),
            ("set1", "period") => val(parse_num(v).and_then(|x| {
                *triangular(&mut self.set1)?.1 = x;
                Ok(())
            })),
            ("set2", "rotations_per_combo") => {
                val(parse_num(v).map(|x| self.set2.rotations_per_combo = x))
            }
            ("set2", "hold") => val(parse_num(v).and_then(|x| set_hold(&mut self.set2, x))),
            ("eval", "repetitions") => val(parse_num(v).map(|x| self.eval.repetitions = x)),
            ("eval", "train_frac") => val(parse_num(v).map(|x| self.eval.train_frac = x)),
            ("eval", "k") => val(parse_num(v).map(|x| self.eval.k = x)),
            ("eval", "study_restarts") => val(parse_num(v).map(|x| self.eval.study_restarts = x)),
            ("bench", "repeats") => val(parse_num(v).map(|x| self.bench_repeats = x)),
            _ => Err((format!("unknown key {key}"), true)),
        }
    }

    fn set_tire(&mut self, field: &str, v: &str) -> std::result::Result<(), (String, bool)> {
        let Ok(Value::Object(mut map)) = serde_json::to_value(&self.tire) else {
            unreachable!("tire parameters serialize to an object")
        };
        if !map.contains_key(field) {
            return Err((format!("unknown key synth.{field}"), true));
        }
        let x: f64 = parse_num(v).map_err(|m| (m, false))?;
        let num = serde_json::Number::from_f64(x).ok_or(("value must be finite".to_string(), false))?;
        map.insert(field.to_string(), Value::Number(num));
        self.tire = serde_json::from_value(Value::Object(map)).map_err(|e| (e.to_string(), false))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.preprocess;
        let nyquist = self.tire.sample_rate_hz / 2.0;
        if !(p.cutoff_hz > 0.0 && p.cutoff_hz < nyquist) {
            return Err(Error::InvalidConfig(format!(
                "filter cutoff {} Hz must lie in (0, {nyquist}) Hz",
                p.cutoff_hz
            )));
        }
        if p.order == 0 {
            return Err(Error::InvalidConfig("filter order must be at least 1".into()));
        }
        if !(p.half_span_deg > 0.0 && p.half_span_deg < 180.0 && p.step_deg > 0.0) {
            return Err(Error::InvalidConfig("patch span and step must be positive".into()));
        }
        let points = 2.0 * p.half_span_deg / p.step_deg;
        if (points - points.round()).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "step {} does not divide the patch span {}",
                p.step_deg,
                2.0 * p.half_span_deg
            )));
        }
        let ratio = self.features.resolution_deg / p.step_deg;
        let pts = 2.0 * p.half_span_deg / self.features.resolution_deg;
        if !(ratio >= 1.0) || (ratio - ratio.round()).abs() > 1e-9 || (pts - pts.round()).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "resolution {} is not a multiple of the patch step {} dividing the span",
                self.features.resolution_deg, p.step_deg
            )));
        }
        self.gpr.validate()?;
        self.tire.validate()?;
        self.set1.validate()?;
        self.set2.validate()?;
        let e = &self.eval;
        if e.repetitions == 0 || e.k < 2 || e.study_restarts == 0 {
            return Err(Error::InvalidConfig(
                "eval needs repetitions >= 1, k >= 2 and study_restarts >= 1".into(),
            ));
        }
        if !(e.train_frac > 0.0 && e.train_frac < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train fraction {} outside (0, 1)",
                e.train_frac
            )));
        }
        if self.bench_repeats == 0 {
            return Err(Error::InvalidConfig("bench repeats must be at least 1".into()));
        }
        Ok(())
    }

    /// Config text that parses back to `self`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let g = &self.gpr;
        kv("seed", self.seed.to_string());
        kv("filter.cutoff_hz", format!("{:?}", self.preprocess.cutoff_hz));
        kv("filter.order", self.preprocess.order.to_string());
        kv("patch.half_span_deg", format!("{:?}", self.preprocess.half_span_deg));
        kv("patch.step_deg", format!("{:?}", self.preprocess.step_deg));
        kv("features.axes", self.features.axes.to_string());
        kv("features.resolution_deg", format!("{:?}", self.features.resolution_deg));
        kv("gpr.restarts", g.restarts.to_string());
        kv("gpr.ard", g.ard.to_string());
        kv("gpr.init_signal_variance", format!("{:?}", g.init_signal_variance));
        kv(
            "gpr.init_length_scale",
            g.init_length_scale.map_or("auto".into(), |l| format!("{l:?}")),
        );
        kv("gpr.init_noise_variance", format!("{:?}", g.init_noise_variance));
        kv("gpr.signal_variance_min", format!("{:?}", g.signal_variance_bounds.0));
        kv("gpr.signal_variance_max", format!("{:?}", g.signal_variance_bounds.1));
        kv("gpr.length_scale_min", format!("{:?}", g.length_scale_bounds.0));
        kv("gpr.length_scale_max", format!("{:?}", g.length_scale_bounds.1));
        kv("gpr.noise_variance_min", format!("{:?}", g.noise_variance_bounds.0));
        kv("gpr.noise_variance_max", format!("{:?}", g.noise_variance_bounds.1));
        kv("gpr.max_iter", g.ascent.max_iter.to_string());
        kv("gpr.grad_tol", format!("{:?}", g.ascent.grad_tol));
        kv("gpr.value_tol", format!("{:?}", g.ascent.value_tol));
        kv("gpr.memory", g.ascent.memory.to_string());
        kv("gpr.max_step", format!("{:?}", g.ascent.max_step));
        kv("gpr.jitter_ladder", join(&g.jitter_ladder));
        if let Ok(Value::Object(map)) = serde_json::to_value(&self.tire) {
            for (k, v) in map {
                let x = v.as_f64().unwrap_or(f64::NAN);
                kv(&format!("synth.{k}"), format!("{x:?}"));
            }
        }
        kv("dataset.loads_n", join(&self.set1.loads_n));
        kv("dataset.speeds_kmh", join(&self.set1.speeds_kmh));
        kv("set1.rotations_per_combo", self.set1.rotations_per_combo.to_string());
        if let SlipProfile::Triangular {
            amplitude_deg,
            period,
        } = &self.set1.profile
        {
            kv("set1.amplitude_deg", format!("{amplitude_deg:?}"));
            kv("set1.period", period.to_string());
        }
        kv("set2.rotations_per_combo", self.set2.rotations_per_combo.to_string());
        if let Some(h) = hold_of(&self.set2) {
            kv("set2.hold", h.to_string());
        }
        kv("eval.repetitions", self.eval.repetitions.to_string());
        kv("eval.train_frac", format!("{:?}", self.eval.train_frac));
        kv("eval.k", self.eval.k.to_string());
        kv("eval.study_restarts", self.eval.study_restarts.to_string());
        kv("bench.repeats", self.bench_repeats.to_string());
        s
    }

    /// Data set 1 or 2 as configured.
    pub fn dataset(&self, which: u8) -> Result<&DatasetSpec> {
        match which {
            1 => Ok(&self.set1),
            2 => Ok(&self.set2),
            other => Err(Error::InvalidConfig(format!("data set must be 1 or 2, got {other}"))),
        }
    }
}
