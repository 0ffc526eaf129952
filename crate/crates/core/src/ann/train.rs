use ndarray::{Array2, ArrayView2};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::time::Instant;

use super::adam::{adam_step, AdamState};
use super::encode::{decode_target, encode_input, encode_target, raw_features, InputNorm, TargetScaling};
use super::model::MlpModel;
use super::{MlpArchitecture, TrainConfig};
use crate::error::{Error, Result};
use crate::forward::{add_awgn, ScatteringMatrix};
use crate::grid::Grid;
use crate::medium::DielectricMap;
use crate::rng::{self, tag};

/// Noise-free inputs and their ground-truth maps; `ids` seed the per-sample noise.
#[derive(Debug, Clone, Default)]
pub struct TrainingData {
    pub ids: Vec<u64>,
    pub inputs: Vec<ScatteringMatrix>,
    pub targets: Vec<DielectricMap>,
}

impl TrainingData {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn check(&self, what: &str) -> Result<()> {
        if self.inputs.len() != self.ids.len() || self.targets.len() != self.ids.len() {
            return Err(Error::invalid(format!("{what} set has mismatched lengths")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    pub epochs: Vec<EpochStats>,
    /// Hex SHA-256 of the hyper-parameters and architecture.
    pub config_hash: String,
    pub model_path: Option<String>,
}

impl TrainingReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,validation_loss,seconds\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{:.12e},{:.12e},{:.3}", e.epoch, e.train_loss, e.validation_loss, e.seconds);
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "config_hash = \"{}\"", self.config_hash);
        if let Some(p) = &self.model_path {
            let _ = writeln!(s, "model = \"{p}\"");
        }
        let _ = writeln!(s, "epochs = {}", self.epochs.len());
        if let (Some(first), Some(last)) = (self.epochs.first(), self.epochs.last()) {
            let _ = writeln!(s, "first_train_loss = {:e}", first.train_loss);
            let _ = writeln!(s, "final_train_loss = {:e}", last.train_loss);
            let _ = writeln!(s, "final_validation_loss = {:e}", last.validation_loss);
        }
        let total: f64 = self.epochs.iter().map(|e| e.seconds).sum();
        let _ = writeln!(s, "wall_seconds = {total:.3}");
        s
    }
}

fn config_hash(cfg: &TrainConfig, arch: &MlpArchitecture) -> String {
    let text = format!("{cfg:?}|{arch:?}");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn noisy_features(s: &ScatteringMatrix, snr_db: f64, seed: u64, tags: &[u64], norm: &InputNorm) -> Result<Vec<f64>> {
    if snr_db == f64::INFINITY {
        return encode_input(s, norm);
    }
    let noisy = add_awgn(s, snr_db, &mut rng::stream(seed, tags))?;
    encode_input(&noisy, norm)
}

fn stack(rows: &[Vec<f64>], width: usize) -> Array2<f64> {
    let mut a = Array2::zeros((rows.len(), width));
    for (mut dst, src) in a.rows_mut().into_iter().zip(rows) {
        dst.as_slice_mut().expect("row").copy_from_slice(src);
    }
    a
}

/// Mini-batch Adam on mean-squared error over scaled targets.
///
/// Statistics for input z-scoring and target scaling come from the clean
/// training inputs. Each epoch visits the training set in a seeded
/// permutation and draws fresh noise per sample at `cfg.snr_db`. The output
/// bias starts at the mean training target so the untrained network predicts
/// the average map.
pub fn train(train: &TrainingData, validation: &TrainingData, cfg: &TrainConfig) -> Result<(MlpModel, TrainingReport)> {
    cfg.validate()?;
    train.check("training")?;
    validation.check("validation")?;
    if train.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    let raws: Vec<Vec<f64>> = train.inputs.iter().map(raw_features).collect();
    let input_norm = InputNorm::fit(raws.iter().map(|r| r.as_slice()))?;
    let target_scaling = TargetScaling::fit(train.targets.iter())?;
    let targets: Vec<Vec<f64>> = train.targets.iter().map(|t| encode_target(t, &target_scaling)).collect();
    let arch = MlpArchitecture::new(raws[0].len(), cfg.hidden_layers.clone(), targets[0].len(), cfg.activation)?;

    let mut model = MlpModel::init(arch.clone(), &mut rng::stream(cfg.seed, &[tag::INIT]))?;
    model.input_norm = input_norm;
    model.target_scaling = target_scaling;
    model.data_fingerprint = train.inputs[0].fingerprint;
    if train.inputs.iter().chain(&validation.inputs).any(|s| s.fingerprint != model.data_fingerprint) {
        return Err(Error::ConfigMismatch("training inputs come from different measurement setups".into()));
    }
    let out_layer = model.n_layers() - 1;
    let mut mean_target = vec![0.0; arch.output_dim];
    for t in &targets {
        for (m, v) in mean_target.iter_mut().zip(t) {
            *m += v / targets.len() as f64;
        }
    }
    model.bias_mut(out_layer).copy_from_slice(&mean_target);
    for w in model.weights_mut(out_layer) {
        *w *= cfg.output_init_scale;
    }

    let val_targets: Vec<Vec<f64>> = validation
        .targets
        .iter()
        .map(|t| encode_target(t, &model.target_scaling))
        .collect();

    let mut adam = AdamState::new(model.params.len(), cfg.learning_rate).with_betas(cfg.beta1, cfg.beta2, cfg.eps_adam);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        let order = rng::permutation(train.len(), cfg.seed, &[tag::SHUFFLE, epoch as u64]);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let xs = chunk
                .iter()
                .map(|&i| {
                    noisy_features(
                        &train.inputs[i],
                        cfg.snr_db,
                        cfg.seed,
                        &[tag::NOISE, epoch as u64, train.ids[i]],
                        &model.input_norm,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let ts: Vec<Vec<f64>> = chunk.iter().map(|&i| targets[i].clone()).collect();
            let x = stack(&xs, arch.input_dim);
            let t = stack(&ts, arch.output_dim);
            let g = model.backward_batch(&x.view(), &t.view())?;
            if !g.loss.is_finite() {
                return Err(Error::Numerical(format!("training diverged in epoch {epoch}")));
            }
            loss_sum += g.loss * chunk.len() as f64;
            adam_step(&mut adam, &g.grad, &mut model.params)
                .map_err(|e| Error::Numerical(format!("epoch {epoch}: {e}")))?;
        }
        let train_loss = loss_sum / train.len() as f64;
        let validation_loss = if validation.is_empty() {
            f64::NAN
        } else {
            let xs = (0..validation.len())
                .map(|i| {
                    noisy_features(
                        &validation.inputs[i],
                        cfg.snr_db,
                        cfg.seed,
                        &[tag::VALID, validation.ids[i]],
                        &model.input_norm,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let y = model.forward_batch(&stack(&xs, arch.input_dim).view())?;
            mse(&y.view(), &val_targets)
        };
        if !train_loss.is_finite() {
            return Err(Error::Numerical(format!("training diverged in epoch {epoch}")));
        }
        log::info!("epoch {epoch}: train {train_loss:.4e}, validation {validation_loss:.4e}");
        epochs.push(EpochStats {
            epoch,
            train_loss,
            validation_loss,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let report = TrainingReport {
        epochs,
        config_hash: config_hash(cfg, &arch),
        model_path: None,
    };
    Ok((model, report))
}

fn mse(y: &ArrayView2<f64>, targets: &[Vec<f64>]) -> f64 {
    let n = y.ncols() as f64 * targets.len() as f64;
    y.rows()
        .into_iter()
        .zip(targets)
        .map(|(r, t)| r.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum::<f64>()
        / n
}

fn warn_fingerprint(model: &MlpModel, s: &ScatteringMatrix) {
    if model.data_fingerprint != [0; 32] && s.fingerprint != model.data_fingerprint {
        log::warn!("input data come from a different measurement setup than the training data");
    }
}

/// Result of one inference.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub map: DielectricMap,
    /// Outputs clamped into the training range while decoding.
    pub clamped: usize,
    pub seconds: f64,
}

/// Encode, run the network and decode onto `grid`.
pub fn infer(model: &MlpModel, s: &ScatteringMatrix, grid: &Grid) -> Result<Inference> {
    let start = Instant::now();
    warn_fingerprint(model, s);
    let x = encode_input(s, &model.input_norm)?;
    let y = super::model::mlp_forward(model, &x)?;
    let (map, clamped) = decode_target(&y, &model.target_scaling, grid)?;
    if clamped > 0 {
        log::debug!("{clamped} outputs clamped to the training range");
    }
    Ok(Inference {
        map,
        clamped,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Batched inference; identical to calling [`infer`] per sample.
pub fn infer_batch(model: &MlpModel, inputs: &[ScatteringMatrix], grid: &Grid) -> Result<Vec<Inference>> {
    let start = Instant::now();
    if let Some(s) = inputs.first() {
        warn_fingerprint(model, s);
    }
    let xs = inputs
        .iter()
        .map(|s| encode_input(s, &model.input_norm))
        .collect::<Result<Vec<_>>>()?;
    if xs.is_empty() {
        return Ok(Vec::new());
    }
    let y = model.forward_batch(&stack(&xs, model.arch.input_dim).view())?;
    let per = start.elapsed().as_secs_f64() / inputs.len() as f64;
    y.rows()
        .into_iter()
        .map(|row| {
            let (map, clamped) = decode_target(row.as_slice().expect("row"), &model.target_scaling, grid)?;
            Ok(Inference {
                map,
                clamped,
                seconds: per,
            })
        })
        .collect()
}
