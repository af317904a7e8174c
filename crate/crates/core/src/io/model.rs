//! Model container: 8-byte magic, little-endian `u32` version, JSON body.
//!
//! The body stores the standardized training data, hyperparameters, the
//! solve vector and a SHA-256 checksum of the hyperparameters. The Cholesky
//! factor is recomputed on load.

use std::fs;
use std::path::Path;

use faer::Mat;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gpr::{Standardizer, TrainedModel};
use crate::kernel::{rows_of, Hyperparameters};
use crate::signal::FeatureConfig;

pub const MODEL_MAGIC: &[u8; 8] = b"ITIREGP\0";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Body {
    feature_config: Option<FeatureConfig>,
    standardizer: Standardizer,
    hyperparameters: Hyperparameters,
    hyperparameter_sha256: String,
    n: usize,
    d: usize,
    /// Standardized inputs, row-major.
    x: Vec<f64>,
    y: Vec<f64>,
    alpha: Vec<f64>,
    jitter: f64,
    jitter_ladder: Vec<f64>,
}

pub fn hyperparameter_checksum(h: &Hyperparameters) -> String {
    let mut hasher = Sha256::new();
    hasher.update(h.signal_variance.to_le_bytes());
    for l in &h.length_scales {
        hasher.update(l.to_le_bytes());
    }
    hasher.update(h.noise_variance.to_le_bytes());
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    let x = model.train_inputs();
    let body = Body {
        feature_config: model.feature_config.clone(),
        standardizer: model.standardizer.clone(),
        hyperparameters: model.hyper.clone(),
        hyperparameter_sha256: hyperparameter_checksum(&model.hyper),
        n: x.nrows(),
        d: x.ncols(),
        x: rows_of(x),
        y: model.y.clone(),
        alpha: model.alpha.clone(),
        jitter: model.jitter(),
        jitter_ladder: model.jitter_ladder.clone(),
    };
    let mut bytes = MODEL_MAGIC.to_vec();
    bytes.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    let json = serde_json::to_vec(&body)
        .map_err(|e| Error::InvalidData(format!("cannot serialize model: {e}")))?;
    bytes.extend_from_slice(&json);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::format(path, 1, 1, msg);
    if bytes.len() < 12 || &bytes[..8] != MODEL_MAGIC {
        return Err(bad("not a model file (bad magic header)"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != MODEL_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let body: Body = serde_json::from_slice(&bytes[12..])
        .map_err(|e| Error::format(path, e.line(), e.column(), e.to_string()))?;
    if hyperparameter_checksum(&body.hyperparameters) != body.hyperparameter_sha256 {
        return Err(bad("hyperparameter checksum mismatch"));
    }
    if body.x.len() != body.n * body.d || body.y.len() != body.n || body.alpha.len() != body.n {
        return Err(bad("training data dimensions disagree"));
    }
    let x = Mat::from_fn(body.n, body.d, |i, j| body.x[i * body.d + j]);
    let mut model = TrainedModel::from_parts(
        x,
        body.y,
        body.hyperparameters,
        body.standardizer,
        &body.jitter_ladder,
    )?;
    if model.jitter() != body.jitter {
        return Err(bad("recomputed factorization needed a different jitter"));
    }
    let scale = body.alpha.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if model
        .alpha
        .iter()
        .zip(&body.alpha)
        .any(|(a, b)| (a - b).abs() > 1e-8 * scale)
    {
        return Err(bad("stored solve vector disagrees with the recomputed one"));
    }
    model.feature_config = body.feature_config;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpr::{fit, GprConfig};
    use crate::signal::AxisSet;

    fn model() -> TrainedModel {
        let x = Mat::from_fn(25, 3, |i, j| ((i * (j + 3)) as f64 * 0.37).sin() * (j + 1) as f64);
        let y: Vec<f64> = (0..25).map(|i| 100.0 * x[(i, 0)] - 40.0 * x[(i, 2)]).collect();
        let cfg = GprConfig {
            restarts: 2,
            ..Default::default()
        };
        fit(x.as_ref(), &y, &cfg)
            .unwrap()
            .with_feature_config(FeatureConfig::new(AxisSet::all(), 5.0))
    }

    #[test]
    fn round_trip_predicts_identically() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.itgp");
        let m = model();
        save_model(&m, &p).unwrap();
        let back = load_model(&p).unwrap();
        assert_eq!(back.feature_config(), m.feature_config());
        assert_eq!(back.hyperparameters(), m.hyperparameters());
        for k in 0..10 {
            let q = [k as f64 * 0.1, -0.3, 1.0 - k as f64 * 0.05];
            let (a, b) = (m.predict(&q).unwrap(), back.predict(&q).unwrap());
            assert!((a.mean - b.mean).abs() <= 1e-12 * a.mean.abs().max(1.0));
            assert!((a.variance - b.variance).abs() <= 1e-12 * a.variance.abs().max(1.0));
        }
        let q = dir.path().join("m2.itgp");
        save_model(&back, &q).unwrap();
        assert_eq!(fs::read(&p).unwrap(), fs::read(&q).unwrap());
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.itgp");
        save_model(&model(), &p).unwrap();
        let good = fs::read(&p).unwrap();

        let mut b = good.clone();
        b[0] = b'X';
        fs::write(&p, &b).unwrap();
        assert!(matches!(load_model(&p), Err(Error::Format { .. })));

        let mut b = good.clone();
        b[8..12].copy_from_slice(&7u32.to_le_bytes());
        fs::write(&p, &b).unwrap();
        assert!(matches!(
            load_model(&p),
            Err(Error::UnsupportedVersion { found: 7, expected: 1, .. })
        ));

        let text = String::from_utf8(good[12..].to_vec()).unwrap();
        let tampered = text.replacen("\"noise_variance\":", "\"noise_variance\":1.5e-1,\"_\":", 1);
        let mut b = good[..12].to_vec();
        b.extend_from_slice(tampered.as_bytes());
        fs::write(&p, &b).unwrap();
        assert!(matches!(load_model(&p), Err(Error::Format { .. })));

        fs::write(&p, &good[..good.len() - 5]).unwrap();
        assert!(matches!(load_model(&p), Err(Error::Format { .. })));
    }
}
