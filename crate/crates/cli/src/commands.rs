//! Subcommand implementations.

use anyhow::{anyhow, bail, Context, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use mwtomo::ann::{infer, train, MlpModel};
use mwtomo::config::RunConfig;
use mwtomo::dataset::{
    build_dataset, load_training_data, open_dataset, partition, DatasetConfig, DatasetManifest, Split, RECORDS_FILE,
};
use mwtomo::forward::{add_awgn, ForwardModel, ScatteringMatrix};
use mwtomo::inversion::{born_invert, csi_invert, dbim_invert, InversionResult};
use mwtomo::phantom::{export_phantom, generate_phantom, BreastClass};
use mwtomo::pipeline::{evaluate, run_desk, DeskOptions, Estimator, DEFAULT_FRACTIONS};
use mwtomo::raster::{self, DType};
use mwtomo::rng::{self, tag};
use mwtomo::{contrast_of, DielectricMap};

use crate::manifest::RunLog;
use crate::render::{write_preview, Scale};
use crate::{
    Cli, Command, DatasetArgs, EvaluateArgs, ForwardArgs, InferArgs, InvertArgs, Method, PhantomArgs, RenderArgs,
    ReproDeskArgs, TrainArgs,
};

/// Bad arguments detected after parsing; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

/// Fixed color scales so previews are comparable across runs and methods.
const EPS_SCALE: Scale = Scale { min: 1.0, max: 60.0 };
const SIGMA_SCALE: Scale = Scale { min: 0.0, max: 2.0 };

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let start = Instant::now();
    let mut log = RunLog::default();
    if let Some(c) = &cli.config {
        log.input(c);
    }
    let (name, out) = match &cli.command {
        Command::Phantom(a) => ("phantom", phantom(&cfg, a, &mut log)?),
        Command::Dataset(a) => ("dataset", dataset(&cfg, a, &mut log)?),
        Command::Forward(a) => ("forward", forward(&cfg, a, &mut log)?),
        Command::Train(a) => ("train", train_cmd(&cfg, a, &mut log)?),
        Command::Infer(a) => ("infer", infer_cmd(&cfg, a, &mut log)?),
        Command::Invert(a) => ("invert", invert(&cfg, a, &mut log)?),
        Command::Evaluate(a) => ("evaluate", evaluate_cmd(&cfg, a, &mut log)?),
        Command::Render(a) => ("render", render(a, &mut log)?),
        Command::ReproDesk(a) => ("repro-desk", repro_desk(&cfg, a, &mut log)?),
    };
    let path = log.write(&out, name, &cfg, start.elapsed().as_secs_f64())?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_text(path: PathBuf, text: &str, log: &mut RunLog) -> Result<()> {
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    log.output(path);
    Ok(())
}

/// Write `<prefix>eps.mwtr`, `<prefix>sigma.mwtr` and their previews.
fn write_map(dir: &Path, prefix: &str, map: &DielectricMap, log: &mut RunLog) -> Result<()> {
    for (stem, a, scale) in [("eps", &map.eps_r, EPS_SCALE), ("sigma", &map.sigma, SIGMA_SCALE)] {
        let stem = format!("{prefix}{stem}");
        let path = dir.join(format!("{stem}.mwtr"));
        raster::write(&path, a, DType::F64)?;
        log.output(path);
        log.outputs(write_preview(dir, &stem, a, Some(scale))?);
    }
    Ok(())
}

fn maybe_noisy(s: ScatteringMatrix, snr: Option<f64>, seed: u64) -> Result<ScatteringMatrix> {
    match snr {
        Some(snr) => Ok(add_awgn(&s, snr, &mut rng::stream(seed, &[tag::NOISE]))?),
        None => Ok(s),
    }
}

fn phantom(cfg: &RunConfig, a: &PhantomArgs, log: &mut RunLog) -> Result<PathBuf> {
    let class = BreastClass::from_str(&a.class).map_err(|e| usage(format!("--class: {e}")))?;
    let seed = a.seed.unwrap_or(cfg.experiment.seed);
    let e = &cfg.experiment;
    let p = generate_phantom(class, &e.grid, &e.background, &cfg.phantom, seed)?;
    create_dir(&a.out)?;
    log.outputs(export_phantom(&p, &a.out)?);
    log.outputs(write_preview(&a.out, "eps", &p.dielectrics.eps_r, Some(EPS_SCALE))?);
    log.outputs(write_preview(&a.out, "sigma", &p.dielectrics.sigma, Some(SIGMA_SCALE))?);
    log.outputs(write_preview(
        &a.out,
        "labels",
        &p.labels.labels.mapv(f64::from),
        Some(Scale { min: 0.0, max: 5.0 }),
    )?);
    let pct = p.tissue_percentages();
    let mut text = format!("class = {class}\nseed = {seed}\ngrid = {0} x {0}\n", e.grid.n);
    let _ = writeln!(
        text,
        "adipose_pct = {:.3}\ntransitional_pct = {:.3}\nfibroglandular_pct = {:.3}",
        pct[0], pct[1], pct[2]
    );
    if let Some(g) = &p.geometry {
        let _ = writeln!(text, "geometry = {g:?}");
    }
    write_text(a.out.join("phantom.txt"), &text, log)?;
    Ok(a.out.clone())
}

fn dataset(cfg: &RunConfig, a: &DatasetArgs, log: &mut RunLog) -> Result<PathBuf> {
    let records = a.out.join(RECORDS_FILE);
    if records.exists() && !a.resume {
        return Err(usage(format!(
            "{} already exists; pass --resume to continue it",
            records.display()
        )));
    }
    let seed = a.seed.unwrap_or(cfg.experiment.seed);
    let ds_cfg = DatasetConfig {
        experiment: cfg.experiment.clone(),
        phantom: cfg.phantom.clone(),
    };
    build_dataset(&a.out, &ds_cfg, a.n_per_class, seed, &mut |done, total| {
        log::info!("dataset: {done}/{total} records");
    })?;
    let (_, mut manifest) = open_dataset(&a.out)?;
    let split = partition(&manifest, DEFAULT_FRACTIONS, a.split_seed)?;
    println!(
        "{} records: {} train, {} validation, {} test",
        manifest.n_records,
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );
    manifest.split = Some(split);
    let m = manifest.save(&a.out)?;
    log.output(records);
    log.output(m);
    Ok(a.out.clone())
}

fn forward(cfg: &RunConfig, a: &ForwardArgs, log: &mut RunLog) -> Result<PathBuf> {
    let eps = raster::read(&a.eps)?;
    let sigma = raster::read(&a.sigma)?;
    log.input(&a.eps);
    log.input(&a.sigma);
    let e = &cfg.experiment;
    let map = DielectricMap::new(e.grid, eps, sigma)?;
    let chi = contrast_of(&map, &e.background, e.frequency)?;
    let model = ForwardModel::new(e)?;
    let s = model.scattering_matrix(&chi)?;
    let s = maybe_noisy(s, a.snr, a.seed.unwrap_or(e.seed))?;
    create_dir(&a.out)?;
    let path = a.out.join("matrix.mwts");
    s.write(&path)?;
    log.output(path);
    Ok(a.out.clone())
}

fn require_split(manifest: &DatasetManifest, dir: &Path) -> Result<()> {
    if manifest.split.is_none() {
        bail!("{} has no train/validation/test split", dir.display());
    }
    Ok(())
}

fn train_cmd(cfg: &RunConfig, a: &TrainArgs, log: &mut RunLog) -> Result<PathBuf> {
    let (store, manifest) = open_dataset(&a.dataset)?;
    require_split(&manifest, &a.dataset)?;
    let train_set = load_training_data(&store, &manifest, Split::Train)?;
    let valid_set = load_training_data(&store, &manifest, Split::Validation)?;
    log.input(&store.path);
    let mut tc = cfg.training.clone();
    if let Some(s) = a.seed {
        tc.seed = s;
    }
    let (net, mut report) = train(&train_set, &valid_set, &tc)?;
    create_dir(&a.out)?;
    let path = a.out.join("model.mwtm");
    net.save(&path)?;
    report.model_path = Some(path.display().to_string());
    log.output(path);
    write_text(a.out.join("report.csv"), &report.to_csv(), log)?;
    write_text(a.out.join("summary.txt"), &report.to_text(), log)?;
    Ok(a.out.clone())
}

fn infer_cmd(cfg: &RunConfig, a: &InferArgs, log: &mut RunLog) -> Result<PathBuf> {
    let net = MlpModel::load(&a.model)?;
    let s = ScatteringMatrix::read(&a.input)?;
    log.input(&a.model);
    log.input(&a.input);
    let s = maybe_noisy(s, a.snr, a.seed.unwrap_or(cfg.experiment.seed))?;
    let out = infer(&net, &s, &cfg.experiment.grid)?;
    create_dir(&a.out)?;
    write_map(&a.out, "", &out.map, log)?;
    let text = format!(
        "method = ann\nsnr_db = {}\nclamped_pixels = {}\nseconds = {:.6}\n",
        a.snr.map_or("none".into(), |v| v.to_string()),
        out.clamped,
        out.seconds
    );
    write_text(a.out.join("summary.txt"), &text, log)?;
    Ok(a.out.clone())
}

fn invert(cfg: &RunConfig, a: &InvertArgs, log: &mut RunLog) -> Result<PathBuf> {
    if a.method == Method::Ann {
        let model = a
            .model
            .clone()
            .ok_or_else(|| usage("--method ann requires --model"))?;
        let args = InferArgs {
            model,
            input: a.input.clone(),
            snr: a.snr,
            seed: a.seed,
            out: a.out.clone(),
        };
        return infer_cmd(cfg, &args, log);
    }
    let e = &cfg.experiment;
    let s = ScatteringMatrix::read(&a.input)?;
    log.input(&a.input);
    let s = maybe_noisy(s, a.snr, a.seed.unwrap_or(e.seed))?;
    let model = ForwardModel::new(e)?;
    let mut dbim = cfg.dbim.clone();
    let mut csi = cfg.csi.clone();
    if let Some(n) = a.iters {
        dbim.iterations = n;
        csi.iterations = n;
    }
    let (name, result): (&str, InversionResult) = match a.method {
        Method::Born => ("born", born_invert(&model, &s, &dbim)?),
        Method::Dbim => ("dbim", dbim_invert(&model, &s, &dbim)?),
        Method::Csi => ("csi", csi_invert(&model, &s, &csi)?),
        Method::Ann => unreachable!(),
    };
    create_dir(&a.out)?;
    write_map(&a.out, "", &result.estimate, log)?;
    write_text(a.out.join("residuals.csv"), &result.residual_csv(), log)?;
    let mut text = format!(
        "method = {name}\niterations = {}\nseconds = {:.6}\n",
        result.iterations, result.seconds
    );
    if let Some(l) = result.lambda {
        let _ = writeln!(text, "lambda = {l:.6e}");
    }
    if let Some(r) = result.residuals.last() {
        let _ = writeln!(text, "final_residual = {r:.6e}");
    }
    write_text(a.out.join("summary.txt"), &text, log)?;
    Ok(a.out.clone())
}

fn evaluate_cmd(cfg: &RunConfig, a: &EvaluateArgs, log: &mut RunLog) -> Result<PathBuf> {
    let (store, manifest) = open_dataset(&a.dataset)?;
    require_split(&manifest, &a.dataset)?;
    if manifest.config.experiment.fingerprint() != cfg.experiment.fingerprint() {
        return Err(anyhow!(mwtomo::Error::ConfigMismatch(format!(
            "{} was built for a different measurement setup than the current configuration",
            a.dataset.display()
        ))));
    }
    log.input(&store.path);
    let mut test = load_training_data(&store, &manifest, Split::Test)?;
    if let Some(n) = a.limit {
        test.ids.truncate(n);
        test.inputs.truncate(n);
        test.targets.truncate(n);
    }
    let nets = a
        .models
        .iter()
        .map(|p| {
            log.input(p);
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "ann".into());
            Ok((name, MlpModel::load(p)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut estimators: Vec<Estimator> = nets
        .iter()
        .map(|(name, model)| Estimator::Ann {
            name: name.clone(),
            model,
        })
        .collect();
    for b in &a.baselines {
        estimators.push(match b {
            Method::Born => Estimator::Born(cfg.dbim.clone()),
            Method::Dbim => Estimator::Dbim(cfg.dbim.clone()),
            Method::Csi => Estimator::Csi(cfg.csi.clone()),
            Method::Ann => return Err(usage("networks are passed with --model, not --baseline")),
        });
    }
    let model = ForwardModel::new(&manifest.config.experiment)?;
    let seed = a.seed.unwrap_or(cfg.experiment.seed);
    let eval = evaluate(&model, &test, &estimators, a.snr, seed)?;
    log.outputs(eval.write(&a.out)?);
    print!("{}", eval.summary_text());
    Ok(a.out.clone())
}

fn render(a: &RenderArgs, log: &mut RunLog) -> Result<PathBuf> {
    create_dir(&a.out)?;
    for p in &a.inputs {
        let img = raster::read(p)?;
        log.input(p);
        let auto = Scale::of(&img);
        let scale = Scale {
            min: a.min.unwrap_or(auto.min),
            max: a.max.unwrap_or(auto.max),
        };
        if !(scale.min.is_finite() && scale.max.is_finite() && scale.max > scale.min) {
            return Err(usage(format!("invalid color scale [{}, {}]", scale.min, scale.max)));
        }
        let stem = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "image".into());
        let files = write_preview(&a.out, &stem, &img, Some(scale)).with_context(|| format!("rendering {}", p.display()))?;
        log.outputs(files);
    }
    Ok(a.out.clone())
}

fn repro_desk(cfg: &RunConfig, a: &ReproDeskArgs, log: &mut RunLog) -> Result<PathBuf> {
    let opts = DeskOptions {
        n_per_class: a.n_per_class,
        node_sweep: a.widths.clone(),
        reference_width: a.reference_width,
        ..DeskOptions::default()
    };
    let report = run_desk(cfg, &opts, &a.out)?;
    let summary = a.out.join("summary.txt");
    print!("{}", report.summary_text(a.reference_width));
    log.output(summary);
    Ok(a.out.clone())
}
