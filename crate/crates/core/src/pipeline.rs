//! Evaluation protocol and the desk-scale reproduction run.
//!
//! Evaluation draws fresh AWGN for every test record from `(seed, snr, id)`,
//! so every method sees exactly the same noisy data. Each method is scored by
//! the mean per-record NMSE and by the `-3 dB` crossover of its permittivity
//! spectrum against the ground-truth spectrum over the same records.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::ann::{infer, infer_batch, train, MlpModel, TrainConfig, TrainingData, TrainingReport};
use crate::config::RunConfig;
use crate::dataset::{build_dataset, load_training_data, open_dataset, partition, DatasetConfig, Split};
use crate::error::{Error, Result};
use crate::forward::{add_awgn, ForwardModel, ScatteringMatrix};
use crate::inversion::{born_invert, csi_invert, dbim_invert, estimate_lambda, CsiConfig, DbimConfig};
use crate::medium::DielectricMap;
use crate::metrics::{image_set_spectrum, minus3db_crossover, nmse, RadialSpectrum};
use crate::rng::{self, tag};

/// Split fractions (train, validation, test).
pub const DEFAULT_FRACTIONS: [f64; 3] = [0.85, 0.10, 0.05];

/// Noisy copies of `inputs`; `snr_db = inf` returns clones.
pub fn noisy_inputs(data: &TrainingData, snr_db: f64, seed: u64) -> Result<Vec<ScatteringMatrix>> {
    data.ids
        .iter()
        .zip(&data.inputs)
        .map(|(&id, s)| add_awgn(s, snr_db, &mut rng::stream(seed, &[tag::EVAL, snr_db.to_bits(), id])))
        .collect()
}

/// A reconstruction method under evaluation.
pub enum Estimator<'a> {
    Ann { name: String, model: &'a MlpModel },
    Born(DbimConfig),
    Dbim(DbimConfig),
    Csi(CsiConfig),
}

impl Estimator<'_> {
    pub fn name(&self) -> String {
        match self {
            Estimator::Ann { name, .. } => name.clone(),
            Estimator::Born(_) => "born".into(),
            Estimator::Dbim(_) => "dbim".into(),
            Estimator::Csi(_) => "csi".into(),
        }
    }

    fn run(&self, model: &ForwardModel, inputs: &[ScatteringMatrix]) -> Result<(Vec<DielectricMap>, f64, usize)> {
        let grid = model.grid();
        let start = Instant::now();
        let (maps, clamped) = match self {
            Estimator::Ann { model: net, .. } => {
                let out = infer_batch(net, inputs, &grid)?;
                let clamped = out.iter().map(|o| o.clamped).sum();
                (out.into_iter().map(|o| o.map).collect(), clamped)
            }
            Estimator::Born(cfg) | Estimator::Dbim(cfg) => {
                let mut cfg = cfg.clone();
                if cfg.lambda.is_none() {
                    cfg.lambda = Some(cfg.reg_factor * estimate_lambda(model, cfg.power_iterations)?);
                }
                let dbim = matches!(self, Estimator::Dbim(_));
                let maps = inputs
                    .iter()
                    .map(|s| {
                        if dbim {
                            dbim_invert(model, s, &cfg)
                        } else {
                            born_invert(model, s, &cfg)
                        }
                        .map(|r| r.estimate)
                    })
                    .collect::<Result<Vec<_>>>()?;
                (maps, 0)
            }
            Estimator::Csi(cfg) => {
                let maps = inputs
                    .iter()
                    .map(|s| csi_invert(model, s, cfg).map(|r| r.estimate))
                    .collect::<Result<Vec<_>>>()?;
                (maps, 0)
            }
        };
        let per = start.elapsed().as_secs_f64() / inputs.len().max(1) as f64;
        Ok((maps, per, clamped))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodScore {
    pub name: String,
    /// Mean over records of the permittivity NMSE.
    pub nmse_eps: f64,
    pub nmse_sigma: f64,
    pub spectrum: RadialSpectrum,
    /// `-3 dB` crossover of the permittivity spectrum against ground truth.
    pub crossover: f64,
    pub seconds_per_sample: f64,
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub snr_db: f64,
    pub n_samples: usize,
    pub truth: RadialSpectrum,
    pub methods: Vec<MethodScore>,
}

impl Evaluation {
    pub fn method(&self, name: &str) -> Option<&MethodScore> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "snr_db = {}", self.snr_db);
        let _ = writeln!(s, "samples = {}", self.n_samples);
        let _ = writeln!(s, "{:<12} {:>12} {:>12} {:>10} {:>12}", "method", "nmse_eps", "nmse_sigma", "crossover", "s/sample");
        for m in &self.methods {
            let _ = writeln!(
                s,
                "{:<12} {:>12.5e} {:>12.5e} {:>10.4} {:>12.4e}",
                m.name, m.nmse_eps, m.nmse_sigma, m.crossover, m.seconds_per_sample
            );
        }
        s
    }

    pub fn crossover_csv(&self) -> String {
        let mut s = String::from("method,nmse_eps,nmse_sigma,crossover,seconds_per_sample,clamped\n");
        for m in &self.methods {
            let _ = writeln!(
                s,
                "{},{:.12e},{:.12e},{:.6},{:.6e},{}",
                m.name, m.nmse_eps, m.nmse_sigma, m.crossover, m.seconds_per_sample, m.clamped
            );
        }
        s
    }

    /// Write `summary.txt`, `scores.csv` and one `spectrum-<name>.csv` per curve.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = vec![
            (dir.join("summary.txt"), self.summary_text()),
            (dir.join("scores.csv"), self.crossover_csv()),
            (dir.join("spectrum-truth.csv"), self.truth.to_csv()),
        ];
        for m in &self.methods {
            files.push((dir.join(format!("spectrum-{}.csv", m.name)), m.spectrum.to_csv()));
        }
        for (p, text) in &files {
            std::fs::write(p, text).map_err(|e| Error::io(p, e))?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }
}

/// Score every estimator on `data` (noise-free inputs, noise added here).
pub fn evaluate(
    model: &ForwardModel,
    data: &TrainingData,
    estimators: &[Estimator],
    snr_db: f64,
    seed: u64,
) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::invalid("nothing to evaluate: the test set is empty"));
    }
    if estimators.is_empty() {
        return Err(Error::invalid("nothing to evaluate: no methods given"));
    }
    let inputs = noisy_inputs(data, snr_db, seed)?;
    let eps = |maps: &[DielectricMap]| -> Vec<Array2<f64>> { maps.iter().map(|m| m.eps_r.clone()).collect() };
    let truth = image_set_spectrum(&eps(&data.targets))?;
    let mut methods = Vec::new();
    for est in estimators {
        let (maps, per, clamped) = est.run(model, &inputs)?;
        let mut sum = (0.0, 0.0);
        for (m, t) in maps.iter().zip(&data.targets) {
            let (a, b) = nmse(m, t)?;
            sum.0 += a;
            sum.1 += b;
        }
        let n = maps.len() as f64;
        let spectrum = image_set_spectrum(&eps(&maps))?;
        let crossover = minus3db_crossover(&spectrum, &truth)?;
        log::info!("{}: nmse_eps {:.4e}, crossover {crossover:.4}", est.name(), sum.0 / n);
        methods.push(MethodScore {
            name: est.name(),
            nmse_eps: sum.0 / n,
            nmse_sigma: sum.1 / n,
            spectrum,
            crossover,
            seconds_per_sample: per,
            clamped,
        });
    }
    Ok(Evaluation {
        snr_db,
        n_samples: data.len(),
        truth,
        methods,
    })
}

/// Settings of the desk-scale reproduction on top of a [`RunConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeskOptions {
    pub n_per_class: usize,
    /// Hidden widths compared in the node sweep; every net has the configured depth.
    pub node_sweep: Vec<usize>,
    /// Width of the reference network (must be in `node_sweep`).
    pub reference_width: usize,
    /// Low-SNR robustness evaluation (dB).
    pub low_snr_db: f64,
    pub split_seed: u64,
    pub dataset_seed: u64,
    pub eval_seed: u64,
}

impl Default for DeskOptions {
    fn default() -> Self {
        DeskOptions {
            n_per_class: 500,
            node_sweep: vec![64, 256],
            reference_width: 256,
            low_snr_db: 5.0,
            split_seed: 7,
            dataset_seed: 2024,
            eval_seed: 99,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeskReport {
    pub trainings: Vec<(usize, TrainingReport)>,
    pub eval_high: Evaluation,
    pub eval_low: Evaluation,
    /// Median single-sample ANN latency (s).
    pub latency: f64,
    pub seconds: f64,
    pub dataset_seconds: f64,
}

impl DeskReport {
    pub fn training(&self, width: usize) -> Option<&TrainingReport> {
        self.trainings.iter().find(|(w, _)| *w == width).map(|(_, r)| r)
    }

    pub fn summary_text(&self, reference_width: usize) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# desk reproduction");
        let _ = writeln!(s, "total_seconds = {:.1}", self.seconds);
        let _ = writeln!(s, "dataset_seconds = {:.1}", self.dataset_seconds);
        for (w, r) in &self.trainings {
            let first = r.epochs.first().map_or(f64::NAN, |e| e.train_loss);
            let last = r.epochs.last().map_or(f64::NAN, |e| e.train_loss);
            let secs: f64 = r.epochs.iter().map(|e| e.seconds).sum();
            let _ = writeln!(s, "width {w}: train loss {first:.4e} -> {last:.4e} over {} epochs ({secs:.1} s)", r.epochs.len());
        }
        let _ = writeln!(s, "reference width = {reference_width}");
        let _ = writeln!(s, "latency_ms = {:.3}", self.latency * 1e3);
        let _ = writeln!(s, "\n[high snr]\n{}", self.eval_high.summary_text());
        let _ = writeln!(s, "[low snr]\n{}", self.eval_low.summary_text());
        s
    }
}

pub fn ann_name(width: usize) -> String {
    format!("ann-{width}")
}

/// Build the desk dataset, train the node sweep and evaluate at both SNRs.
///
/// Everything is written under `out`; the dataset is reused if already
/// complete there.
pub fn run_desk(cfg: &RunConfig, opts: &DeskOptions, out: &Path) -> Result<DeskReport> {
    let start = Instant::now();
    if !opts.node_sweep.contains(&opts.reference_width) {
        return Err(Error::invalid("reference width must be part of the node sweep"));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let ds_dir = out.join("dataset");
    let ds_cfg = DatasetConfig {
        experiment: cfg.experiment.clone(),
        phantom: cfg.phantom.clone(),
    };
    let t0 = Instant::now();
    build_dataset(&ds_dir, &ds_cfg, opts.n_per_class, opts.dataset_seed, &mut |done, total| {
        log::info!("dataset: {done}/{total}");
    })?;
    let dataset_seconds = t0.elapsed().as_secs_f64();
    let (store, mut manifest) = open_dataset(&ds_dir)?;
    manifest.split = Some(partition(&manifest, DEFAULT_FRACTIONS, opts.split_seed)?);
    manifest.save(&ds_dir)?;
    let train_set = load_training_data(&store, &manifest, Split::Train)?;
    let valid_set = load_training_data(&store, &manifest, Split::Validation)?;
    let test_set = load_training_data(&store, &manifest, Split::Test)?;

    let depth = cfg.training.hidden_layers.len().max(1);
    let model_dir = out.join("models");
    std::fs::create_dir_all(&model_dir).map_err(|e| Error::io(&model_dir, e))?;
    let mut nets = Vec::new();
    let mut trainings = Vec::new();
    for &w in &opts.node_sweep {
        let tc = TrainConfig {
            hidden_layers: vec![w; depth],
            ..cfg.training.clone()
        };
        log::info!("training {}", ann_name(w));
        let (net, mut report) = train(&train_set, &valid_set, &tc)?;
        let path = model_dir.join(format!("{}.mwtm", ann_name(w)));
        net.save(&path)?;
        report.model_path = Some(path.display().to_string());
        let csv = model_dir.join(format!("{}-report.csv", ann_name(w)));
        std::fs::write(&csv, report.to_csv()).map_err(|e| Error::io(&csv, e))?;
        nets.push((w, net));
        trainings.push((w, report));
    }

    let fm = ForwardModel::new(&cfg.experiment)?;
    let mut estimators: Vec<Estimator> = nets
        .iter()
        .map(|(w, net)| Estimator::Ann {
            name: ann_name(*w),
            model: net,
        })
        .collect();
    estimators.push(Estimator::Born(cfg.dbim.clone()));
    let snr_high = cfg.training.snr_db;
    let eval_high = evaluate(&fm, &test_set, &estimators, snr_high, opts.eval_seed)?;
    eval_high.write(&out.join(format!("eval-{snr_high}dB")))?;

    let reference = &nets.iter().find(|(w, _)| *w == opts.reference_width).expect("checked").1;
    let low = [Estimator::Ann {
        name: ann_name(opts.reference_width),
        model: reference,
    }];
    let eval_low = evaluate(&fm, &test_set, &low, opts.low_snr_db, opts.eval_seed)?;
    eval_low.write(&out.join(format!("eval-{}dB", opts.low_snr_db)))?;

    let sample = add_awgn(&test_set.inputs[0], snr_high, &mut rng::stream(opts.eval_seed, &[tag::EVAL]))?;
    let mut times: Vec<f64> = (0..21)
        .map(|_| infer(reference, &sample, &fm.grid()).map(|r| r.seconds))
        .collect::<Result<_>>()?;
    times.sort_by(f64::total_cmp);
    let latency = times[times.len() / 2];

    let report = DeskReport {
        trainings,
        eval_high,
        eval_low,
        latency,
        seconds: start.elapsed().as_secs_f64(),
        dataset_seconds,
    };
    let summary = out.join("summary.txt");
    std::fs::write(&summary, report.summary_text(opts.reference_width)).map_err(|e| Error::io(&summary, e))?;
    Ok(report)
}
