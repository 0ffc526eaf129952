//! Training database: generation, storage, splitting and streaming.
//!
//! A store is a directory holding `records.mwtd` (see [`store`]) and
//! `manifest.toml`. Record `i` has phantom id `i`; its class is `i mod 4`, so
//! growing `n_per_class` appends records without touching existing ones.
//! Scattering matrices are stored noise-free.

pub mod store;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::path::{Path, PathBuf};

use crate::ann::TrainingData;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::forward::ForwardModel;
use crate::phantom::{generate_phantom, BreastClass, PhantomConfig};
use crate::rng::{self, tag};

pub use store::{DatasetRecord, DatasetStore, Layout, StoreHeader};

pub const FORMAT_VERSION: u32 = 1;
pub const RECORDS_FILE: &str = "records.mwtd";
pub const MANIFEST_FILE: &str = "manifest.toml";
/// Derived seeds tried after the nominal one fails.
pub const MAX_RECORD_RETRIES: u64 = 3;

/// Configuration that determines record contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub experiment: ExperimentConfig,
    pub phantom: PhantomConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "validation" | "valid" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            _ => Err(Error::invalid(format!("unknown split `{s}`"))),
        }
    }
}

/// Split assignment, stored by phantom id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub fractions: [f64; 3],
    pub train: Vec<u64>,
    pub validation: Vec<u64>,
    pub test: Vec<u64>,
}

impl SplitAssignment {
    pub fn ids(&self, split: Split) -> &[u64] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub master_seed: u64,
    pub n_per_class: usize,
    pub n_records: usize,
    /// Records per class, in class order I..IV.
    pub counts: [usize; 4],
    /// Hex fingerprint of the measurement configuration.
    pub fingerprint: String,
    pub config: DatasetConfig,
    pub split: Option<SplitAssignment>,
}

impl DatasetManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: DatasetManifest = toml::from_str(&text).map_err(|e| Error::Corrupt {
            location: path.display().to_string(),
            message: e.to_string(),
        })?;
        if m.format_version != FORMAT_VERSION {
            return Err(Error::Corrupt {
                location: path.display().to_string(),
                message: format!("unsupported format version {}", m.format_version),
            });
        }
        Ok(m)
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let text = toml::to_string_pretty(self).map_err(|e| Error::invalid(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn split(&self) -> Result<&SplitAssignment> {
        self.split
            .as_ref()
            .ok_or_else(|| Error::invalid("dataset manifest has no split assignment"))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Class of phantom `id`.
pub fn class_of(id: u64) -> BreastClass {
    BreastClass::from_index((id % 4) as usize).expect("index < 4")
}

/// Nominal generation seed of phantom `id`.
pub fn record_seed(master_seed: u64, id: u64, retry: u64) -> u64 {
    if retry == 0 {
        rng::derive_seed(master_seed, &[tag::PHANTOM, id])
    } else {
        rng::derive_seed(master_seed, &[tag::RETRY, id, retry])
    }
}

fn make_record(model: &ForwardModel, phantom_cfg: &PhantomConfig, master_seed: u64, id: u64) -> Result<DatasetRecord> {
    let cfg = &model.config;
    let class = class_of(id);
    let mut last = None;
    for retry in 0..=MAX_RECORD_RETRIES {
        let seed = record_seed(master_seed, id, retry);
        let attempt = generate_phantom(class, &cfg.grid, &cfg.background, phantom_cfg, seed)
            .and_then(|p| model.phantom_matrix(&p).map(|s| (p, s)));
        match attempt {
            Ok((p, matrix)) => {
                return Ok(DatasetRecord {
                    phantom_id: id,
                    class_id: class,
                    seed,
                    dielectrics: p.dielectrics,
                    labels: p.labels,
                    matrix,
                })
            }
            Err(e) => {
                log::warn!("phantom {id} (seed {seed}) failed: {e}; retrying with a derived seed");
                last = Some(e);
            }
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Generate (or extend) the store in `dir` to `4 * n_per_class` records.
///
/// Records already present are checksum-verified and kept; generation resumes
/// after the last complete record. Content depends only on the configuration
/// and `master_seed`. `progress` is called with (done, total) after each batch.
pub fn build_dataset(
    dir: &Path,
    config: &DatasetConfig,
    n_per_class: usize,
    master_seed: u64,
    progress: &mut dyn FnMut(usize, usize),
) -> Result<DatasetStore> {
    if n_per_class == 0 {
        return Err(Error::invalid("n_per_class must be >= 1"));
    }
    config.experiment.validate()?;
    config.phantom.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let model = ForwardModel::new(&config.experiment)?;
    let grid = config.experiment.grid;
    let header = StoreHeader {
        layout: Layout {
            n: grid.n,
            views: model.n_views(),
            receivers: model.n_receivers(),
        },
        frequency: config.experiment.frequency,
        fingerprint: config.experiment.fingerprint(),
    };
    let total = 4 * n_per_class;
    let path = dir.join(RECORDS_FILE);
    let mut store = if path.exists() {
        let s = DatasetStore::open(&path, grid)?;
        if let Ok(m) = DatasetManifest::load(dir) {
            if m.master_seed != master_seed || m.config != *config {
                return Err(Error::ConfigMismatch(format!(
                    "{} was built with a different configuration or seed",
                    dir.display()
                )));
            }
        }
        if s.header != header {
            return Err(Error::ConfigMismatch(format!(
                "{} was built for a different measurement setup",
                path.display()
            )));
        }
        s.verify()?;
        if s.n_records > total {
            return Err(Error::invalid(format!(
                "store already holds {} records, more than the {total} requested",
                s.n_records
            )));
        }
        s
    } else {
        DatasetStore::create(&path, header.clone(), grid)?
    };

    let batch = (rayon::current_num_threads() * 4).max(8);
    progress(store.n_records, total);
    while store.n_records < total {
        let start = store.n_records;
        let end = (start + batch).min(total);
        let encoded = (start..end)
            .into_par_iter()
            .map(|i| {
                make_record(&model, &config.phantom, master_seed, i as u64)
                    .map(|r| store::encode_record(&r, &header.layout))
            })
            .collect::<Result<Vec<_>>>()?;
        store.append(&encoded)?;
        progress(store.n_records, total);
    }
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        master_seed,
        n_per_class,
        n_records: total,
        counts: [n_per_class; 4],
        fingerprint: hex(&header.fingerprint),
        config: config.clone(),
        split: None,
    };
    manifest.save(dir)?;
    Ok(store)
}

/// Open a store and its manifest, checking that they agree.
pub fn open_dataset(dir: &Path) -> Result<(DatasetStore, DatasetManifest)> {
    let manifest = DatasetManifest::load(dir)?;
    let store = DatasetStore::open(&dir.join(RECORDS_FILE), manifest.config.experiment.grid)?;
    if store.n_records < manifest.n_records {
        return Err(Error::Corrupt {
            location: store.path.display().to_string(),
            message: format!("{} records present, manifest lists {}", store.n_records, manifest.n_records),
        });
    }
    if hex(&store.header.fingerprint) != manifest.fingerprint {
        return Err(Error::Corrupt {
            location: store.path.display().to_string(),
            message: "record file and manifest fingerprints differ".into(),
        });
    }
    Ok((store, manifest))
}

/// Largest-remainder rounding of `total * weights[i] / sum(weights)`.
fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for i in order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Stratified random split of the manifest's records.
///
/// Validation and test sizes are `round(fraction * total)`, training takes the
/// rest; each split's size is spread over the classes in proportion to class
/// sizes, and members are drawn from a per-class seeded shuffle.
pub fn partition(manifest: &DatasetManifest, fractions: [f64; 3], seed: u64) -> Result<SplitAssignment> {
    if fractions.iter().any(|&f| !(f > 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split fractions must be positive and sum to 1, got {fractions:?}"
        )));
    }
    let total = manifest.n_records;
    if total == 0 {
        return Err(Error::invalid("dataset is empty"));
    }
    let mut by_class: Vec<Vec<u64>> = vec![Vec::new(); 4];
    for id in 0..total as u64 {
        by_class[class_of(id).index()].push(id);
    }
    let sizes: Vec<f64> = by_class.iter().map(|c| c.len() as f64).collect();
    let n_val = (fractions[1] * total as f64).round() as usize;
    let n_test = (fractions[2] * total as f64).round() as usize;
    if n_val + n_test > total {
        return Err(Error::invalid("split fractions leave no training records"));
    }
    let val_per = largest_remainder(n_val, &sizes);
    let test_per = largest_remainder(n_test, &sizes);
    let mut out = SplitAssignment {
        seed,
        fractions,
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for (c, ids) in by_class.iter().enumerate() {
        if val_per[c] + test_per[c] > ids.len() {
            return Err(Error::invalid(format!("class {} is too small to split", c + 1)));
        }
        let order = rng::permutation(ids.len(), seed, &[tag::SPLIT, c as u64]);
        let shuffled: Vec<u64> = order.iter().map(|&i| ids[i]).collect();
        let (v, rest) = shuffled.split_at(val_per[c]);
        let (t, tr) = rest.split_at(test_per[c]);
        out.validation.extend_from_slice(v);
        out.test.extend_from_slice(t);
        out.train.extend_from_slice(tr);
    }
    out.train.sort_unstable();
    out.validation.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

/// Batches of one split for one epoch, in a seeded order.
pub struct SplitStream<'a> {
    store: &'a DatasetStore,
    file: File,
    order: Vec<u64>,
    batch_size: usize,
    pos: usize,
}

impl Iterator for SplitStream<'_> {
    type Item = Result<Vec<DatasetRecord>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let batch = self.order[self.pos..end]
            .iter()
            .map(|&id| self.store.read_with(&mut self.file, id as usize))
            .collect();
        self.pos = end;
        Some(batch)
    }
}

/// Stream `split` in batches; the order is a permutation seeded by
/// `(shuffle_seed, epoch)`.
pub fn stream_split<'a>(
    store: &'a DatasetStore,
    manifest: &DatasetManifest,
    split: Split,
    batch_size: usize,
    shuffle_seed: u64,
    epoch: u64,
) -> Result<SplitStream<'a>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be >= 1"));
    }
    let ids = manifest.split()?.ids(split);
    let perm = rng::permutation(ids.len(), shuffle_seed, &[tag::SHUFFLE, epoch]);
    let file = File::open(&store.path).map_err(|e| Error::io(&store.path, e))?;
    Ok(SplitStream {
        store,
        file,
        order: perm.into_iter().map(|i| ids[i]).collect(),
        batch_size,
        pos: 0,
    })
}

/// Read every record of `split`, in id order.
pub fn load_split(store: &DatasetStore, manifest: &DatasetManifest, split: Split) -> Result<Vec<DatasetRecord>> {
    let mut file = File::open(&store.path).map_err(|e| Error::io(&store.path, e))?;
    manifest
        .split()?
        .ids(split)
        .iter()
        .map(|&id| store.read_with(&mut file, id as usize))
        .collect()
}

/// Noise-free inputs and targets of `split` for training or evaluation.
pub fn load_training_data(store: &DatasetStore, manifest: &DatasetManifest, split: Split) -> Result<TrainingData> {
    let records = load_split(store, manifest, split)?;
    let mut data = TrainingData::default();
    for r in records {
        data.ids.push(r.phantom_id);
        data.inputs.push(r.matrix);
        data.targets.push(r.dielectrics);
    }
    Ok(data)
}
