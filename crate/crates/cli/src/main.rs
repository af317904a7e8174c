//! `itire` command-line driver.

mod svg;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use itire::eval::{
    bench_latency, correlation_profile, error_by_slip, input_selection_study, kfold_cv,
    resolution_study, MetricsReport, StudyConfig, StudyResult, DEFAULT_SLIP_FILTER_DEG,
    STUDY_STEPS_DEG,
};
use itire::gpr::{fit, GprConfig, Prediction};
use itire::io::{self, PipelineConfig, PredictionRecord};
use itire::signal::{preprocess, AxisSet, FeatureConfig, PatchFeatures};
use itire::synth::generate_dataset;
use itire::{Error, Mat};

#[derive(Parser, Debug)]
#[command(name = "itire", version, about = "Lateral tire force estimation from intelligent-tire accelerations")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Key-value configuration file (defaults apply otherwise).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize raw accelerometer streams for data set 1 and/or 2.
    Generate {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        set: Option<u8>,
    },
    /// Filter, segment and resample a raw stream into patch features.
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Fit a GP model on a feature file.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        features: FeatureArgs,
    },
    /// Predict every rotation of a feature file.
    Predict {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Metrics and plot data for a predictions file, or for k-fold
    /// predictions of a feature file when `--k` is given.
    Evaluate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        /// Also render the prediction chart as SVG.
        #[arg(long)]
        svg: bool,
        #[command(flatten)]
        features: FeatureArgs,
    },
    /// Holdout study over the five axis configurations.
    StudyInputs {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        resolution: Option<f64>,
    },
    /// Holdout study over the patch resolutions 0.5, 1, 2.5, 5 and 10 degrees.
    StudyResolution {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        axes: Option<AxisSet>,
    },
    /// Per-point correlation of the 0.5 degree grid with the lateral force.
    Correlate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SLIP_FILTER_DEG)]
        slip_filter: f64,
    },
    /// Single-prediction latency of a saved model.
    Bench {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
struct FeatureArgs {
    #[arg(long)]
    axes: Option<AxisSet>,
    #[arg(long)]
    resolution: Option<f64>,
}

/// A module error tagged with the pipeline stage that raised it.
struct Failure {
    stage: &'static str,
    error: Error,
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure>;
}

impl<T> Stage<T> for itire::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|error| Failure { stage, error })
    }
}

struct Run {
    cfg: PipelineConfig,
    out: PathBuf,
    manifest: Vec<PathBuf>,
}

impl Run {
    fn artifact(&mut self, name: &str) -> PathBuf {
        let p = self.out.join(name);
        self.manifest.push(p.clone());
        p
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<(), Failure> {
        let p = self.artifact(name);
        fs::write(&p, text)
            .map_err(|e| Error::Io { path: p.clone(), source: e })
            .stage("write")
    }

    fn feature_config(&self, args: &FeatureArgs) -> Result<FeatureConfig, Failure> {
        let fc = FeatureConfig::new(
            args.axes.clone().unwrap_or_else(|| self.cfg.features.axes.clone()),
            args.resolution.unwrap_or(self.cfg.features.resolution_deg),
        );
        if !(fc.resolution_deg > 0.0) {
            return Err(Failure {
                stage: "config",
                error: Error::InvalidConfig(format!("resolution {} must be positive", fc.resolution_deg)),
            });
        }
        Ok(fc)
    }

    fn study_config(&self, reps: Option<usize>) -> StudyConfig {
        StudyConfig {
            repetitions: reps.unwrap_or(self.cfg.eval.repetitions),
            train_frac: self.cfg.eval.train_frac,
            seed: self.cfg.seed,
            gpr: GprConfig {
                restarts: self.cfg.eval.study_restarts,
                ..self.cfg.gpr.clone()
            },
        }
    }
}

fn read_features(path: &Path) -> Result<Vec<PatchFeatures>, Failure> {
    io::read_features_csv(path).stage("read features")
}

fn stem_suffix(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
    stem.strip_prefix("raw_").unwrap_or(stem).to_string()
}

fn records(features: &[PatchFeatures], preds: Vec<Prediction>) -> Vec<PredictionRecord> {
    features
        .iter()
        .zip(preds)
        .map(|(f, p)| PredictionRecord {
            rotation_id: f.rotation_id,
            labels: f.labels,
            prediction: p,
        })
        .collect()
}

fn design_only(features: &[PatchFeatures], fc: &FeatureConfig) -> itire::Result<Mat<f64>> {
    Ok(fc.design(features)?.0)
}

fn fit_log(model: &itire::gpr::TrainedModel, fc: &FeatureConfig) -> String {
    let h = model.hyperparameters();
    let mut s = String::new();
    let _ = writeln!(s, "features = {}@{}", fc.axes, fc.resolution_deg);
    let _ = writeln!(s, "n_train = {}", model.n_train());
    let _ = writeln!(s, "input_dim = {}", model.input_dim());
    let _ = writeln!(s, "log_likelihood = {:.12e}", model.log_likelihood());
    let _ = writeln!(s, "jitter = {:e}", model.jitter());
    let _ = writeln!(s, "# hyperparameters in standardized units");
    let _ = writeln!(s, "signal_variance = {:.12e}", h.signal_variance);
    let _ = writeln!(s, "noise_variance = {:.12e}", h.noise_variance);
    for (i, l) in h.length_scales.iter().enumerate() {
        let _ = writeln!(s, "length_scale[{i}] = {l:.12e}");
    }
    for t in model.fit_trace() {
        let _ = writeln!(
            s,
            "start {}: log_likelihood = {:.12e}, iterations = {}, evaluations = {}, converged = {}",
            t.start, t.log_likelihood, t.iterations, t.evaluations, t.converged
        );
    }
    s
}

fn evaluation_reports(run: &mut Run, recs: &[PredictionRecord], svg: bool) -> Result<MetricsReport, Failure> {
    let preds: Vec<Prediction> = recs.iter().map(|r| r.prediction).collect();
    let truth: Vec<f64> = recs.iter().map(|r| r.labels.fy_n).collect();
    let labels: Vec<_> = recs.iter().map(|r| r.labels).collect();
    let m = MetricsReport::compute(&preds, &truth).stage("metrics")?;
    let bins = error_by_slip(&preds, &labels, 1.0).stage("metrics")?;
    let p = run.artifact("metrics.csv");
    io::write_metrics_csv(&p, &m).stage("write")?;
    let p = run.artifact("plot_data.csv");
    io::write_plot_csv(&p, recs).stage("write")?;
    let p = run.artifact("slip_errors.csv");
    io::write_slip_bins_csv(&p, &bins).stage("write")?;

    let mut s = String::new();
    let _ = writeln!(s, "rotations: {}", m.n);
    let _ = writeln!(s, "NRMSE: {:.4} %", m.nrmse);
    let _ = writeln!(s, "Pearson R: {:.5}", m.pearson_r);
    let _ = writeln!(s, "mean |error|: {:.2} N", m.mean_abs_err);
    let _ = writeln!(s, "95% interval coverage: {:.4}", m.coverage_95);
    let _ = writeln!(s, "mean |error| by slip bin:");
    for b in &bins {
        match (b.mean_abs_err, b.std_abs_err) {
            (Some(mu), sd) => {
                let _ = writeln!(
                    s,
                    "  [{:+.0}, {:+.0}) deg: n = {}, {:.2} N (std {})",
                    b.lo_deg,
                    b.hi_deg,
                    b.n,
                    mu,
                    sd.map_or("n/a".to_string(), |v| format!("{v:.2} N"))
                );
            }
            (None, _) => {
                let _ = writeln!(s, "  [{:+.0}, {:+.0}) deg: empty", b.lo_deg, b.hi_deg);
            }
        }
    }
    run.write_text("summary.txt", &s)?;
    if svg {
        run.write_text("prediction.svg", &svg::prediction_chart(recs))?;
    }
    Ok(m)
}

fn study_summary(results: &[StudyResult]) -> String {
    let mut s = String::from("config inputs mean_nrmse_pct std median q1 q3\n");
    for r in results {
        let b = &r.stats;
        let _ = writeln!(
            s,
            "{} {} {:.4} {:.4} {:.4} {:.4} {:.4}",
            r.label, r.input_dim, b.mean, b.std, b.median, b.q1, b.q3
        );
    }
    s
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.common.config {
        Some(p) => PipelineConfig::load(p).stage("config")?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        cfg.seed = seed;
    }
    fs::create_dir_all(&cli.common.out)
        .map_err(|e| Error::Io { path: cli.common.out.clone(), source: e })
        .stage("output directory")?;
    let mut run = Run {
        cfg,
        out: cli.common.out,
        manifest: Vec::new(),
    };

    match cli.command {
        Command::Generate { set } => {
            let sets: Vec<u8> = set.map_or(vec![1, 2], |s| vec![s]);
            for which in sets {
                let spec = run.cfg.dataset(which).stage("generate")?.clone();
                let stream = generate_dataset(&spec, &run.cfg.tire, run.cfg.seed).stage("generate")?;
                let p = run.artifact(&format!("raw_set{which}.csv"));
                io::write_raw_csv(&p, &stream).stage("write")?;
                println!("set {which}: {} rotations, {} samples", spec.total_rotations(), stream.len());
            }
        }
        Command::Preprocess { input } => {
            let stream = io::read_raw_csv(&input).stage("read raw")?;
            let feats = preprocess(&stream, &run.cfg.preprocess).stage("preprocess")?;
            let p = run.artifact(&format!("features_{}.csv", stem_suffix(&input)));
            io::write_features_csv(&p, &feats).stage("write")?;
            println!("{} rotations", feats.len());
        }
        Command::Train { input, features } => {
            let fc = run.feature_config(&features)?;
            let feats = read_features(&input)?;
            let (x, y) = fc.design(&feats).stage("features")?;
            let gpr = GprConfig {
                seed: run.cfg.seed,
                ..run.cfg.gpr.clone()
            };
            let model = fit(x.as_ref(), &y, &gpr).stage("train")?.with_feature_config(fc.clone());
            let p = run.artifact("model.itgp");
            io::save_model(&model, &p).stage("write")?;
            run.write_text("fit_log.txt", &fit_log(&model, &fc))?;
            println!("log-likelihood {:.6}", model.log_likelihood());
        }
        Command::Predict { input, model } => {
            let model = io::load_model(&model).stage("load model")?;
            let fc = model.feature_config().cloned().ok_or(Failure {
                stage: "load model",
                error: Error::InvalidData("model file carries no feature configuration".into()),
            })?;
            let feats = read_features(&input)?;
            let x = design_only(&feats, &fc).stage("features")?;
            let preds = model.predict_batch(x.as_ref()).stage("predict")?;
            let p = run.artifact("predictions.csv");
            io::write_predictions_csv(&p, &records(&feats, preds)).stage("write")?;
        }
        Command::Evaluate {
            input,
            k,
            svg,
            features,
        } => {
            let recs = match k {
                Some(k) => {
                    let fc = run.feature_config(&features)?;
                    let feats = read_features(&input)?;
                    let gpr = run.cfg.gpr.clone();
                    let folds = kfold_cv(&feats, &fc, k, &gpr, run.cfg.seed).stage("k-fold")?;
                    let recs: Vec<PredictionRecord> = folds
                        .iter()
                        .map(|f| PredictionRecord {
                            rotation_id: f.rotation_id,
                            labels: f.labels,
                            prediction: f.prediction,
                        })
                        .collect();
                    let p = run.artifact("predictions_kfold.csv");
                    io::write_predictions_csv(&p, &recs).stage("write")?;
                    recs
                }
                None => io::read_predictions_csv(&input).stage("read predictions")?,
            };
            let m = evaluation_reports(&mut run, &recs, svg)?;
            println!(
                "NRMSE {:.4} %  R {:.5}  coverage {:.4}  n {}",
                m.nrmse, m.pearson_r, m.coverage_95, m.n
            );
        }
        Command::StudyInputs {
            input,
            reps,
            resolution,
        } => {
            let feats = read_features(&input)?;
            let res = resolution.unwrap_or(run.cfg.features.resolution_deg);
            let sc = run.study_config(reps);
            let results =
                input_selection_study(&feats, &AxisSet::study_set(), res, &sc).stage("input study")?;
            let p = run.artifact("study_inputs.csv");
            io::write_study_csv(&p, &results).stage("write")?;
            print!("{}", study_summary(&results));
        }
        Command::StudyResolution { input, reps, axes } => {
            let feats = read_features(&input)?;
            let axes = axes.unwrap_or_else(|| run.cfg.features.axes.clone());
            let sc = run.study_config(reps);
            let results =
                resolution_study(&feats, &axes, &STUDY_STEPS_DEG, &sc).stage("resolution study")?;
            let p = run.artifact("study_resolution.csv");
            io::write_study_csv(&p, &results).stage("write")?;
            print!("{}", study_summary(&results));
        }
        Command::Correlate { input, slip_filter } => {
            let feats = read_features(&input)?;
            let profile = correlation_profile(&feats, slip_filter).stage("correlate")?;
            for (axis, k) in &profile.flagged {
                eprintln!("warning: constant {} channel at point {k}; r reported as 0", axis.name());
            }
            let p = run.artifact("correlation.csv");
            io::write_profile_csv(&p, &profile).stage("write")?;
            for axis in itire::signal::Axis::ALL {
                println!("max |r| {}: {:.4}", axis.name(), profile.max_abs_r(axis));
            }
        }
        Command::Bench { input, model } => {
            let model = io::load_model(&model).stage("load model")?;
            let fc = model.feature_config().cloned().ok_or(Failure {
                stage: "load model",
                error: Error::InvalidData("model file carries no feature configuration".into()),
            })?;
            let feats = read_features(&input)?;
            let x = design_only(&feats, &fc).stage("features")?;
            let lat = bench_latency(&model, x.as_ref(), run.cfg.bench_repeats).stage("bench")?;
            let text = format!(
                "n_train,input_dim,repeats,predictions,mean_s,std_s\n{},{},{},{},{},{}\n",
                model.n_train(),
                model.input_dim(),
                run.cfg.bench_repeats,
                lat.predictions,
                io::fmt_f64(lat.mean_s),
                io::fmt_f64(lat.std_s)
            );
            run.write_text("bench.csv", &text)?;
            println!(
                "mean latency {:.4} ms (std {:.4} ms) over {} predictions",
                lat.mean_s * 1e3,
                lat.std_s * 1e3,
                lat.predictions
            );
        }
    }
    for p in &run.manifest {
        println!("artifact: {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { stage, error }) => {
            let msg = error.to_string().replace('\n', " ");
            eprintln!("itire: {stage} failed: {msg}");
            ExitCode::from(if error.is_numerical() { 4 } else { 3 })
        }
    }
}
