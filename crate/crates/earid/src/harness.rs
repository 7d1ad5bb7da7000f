//! The four experimental conditions and the runner that trains and scores
//! each condition x repeat cell.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use earid_core::augment::AugmentConfig;
use earid_core::edge::CannyParams;
use earid_core::geometry::ZoomSpec;
use earid_core::nn::TrainConfig;
use earid_core::seed;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{absolute, scan_dataset, split_manifest, write_manifest, DatasetManifest, DatasetProfile, Split};
use crate::expand::expand_dataset;
use crate::preprocess::{canny_manifest, zoom_manifest};
use crate::report::{ExperimentReport, ReportRow};
use crate::training::{default_arch, evaluate, evaluate_split, train};
use crate::{jobs, Error, Result};

pub const CONFIG_VERSION: &str = "expcfg_v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
pub enum Condition {
    /// Resize only.
    #[serde(rename = "BM")]
    #[value(name = "BM", alias = "bm")]
    Bm,
    /// Zoom, then Canny.
    #[serde(rename = "PP")]
    #[value(name = "PP", alias = "pp")]
    Pp,
    /// Zoom, then augmentation.
    #[serde(rename = "AZ")]
    #[value(name = "AZ", alias = "az")]
    Az,
    /// Zoom, Canny, then augmentation.
    #[serde(rename = "CES")]
    #[value(name = "CES", alias = "ces")]
    Ces,
}

impl Condition {
    pub const ALL: [Condition; 4] = [Condition::Bm, Condition::Pp, Condition::Az, Condition::Ces];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Bm => "BM",
            Condition::Pp => "PP",
            Condition::Az => "AZ",
            Condition::Ces => "CES",
        }
    }

    fn zooms(self) -> bool {
        self != Condition::Bm
    }

    fn edges(self) -> bool {
        matches!(self, Condition::Pp | Condition::Ces)
    }

    fn augments(self) -> bool {
        matches!(self, Condition::Az | Condition::Ces)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown condition {s:?}")))
    }
}

/// Everything one experiment run depends on. `train.seed` is replaced by
/// the per-cell seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: String,
    pub dataset_root: PathBuf,
    pub profile: DatasetProfile,
    #[serde(default = "all_conditions")]
    pub conditions: Vec<Condition>,
    #[serde(default)]
    pub canny: CannyParams,
    #[serde(default)]
    pub zoom: ZoomSpec,
    #[serde(default)]
    pub augment: AugmentConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    pub output_dir: PathBuf,
    /// Off by default so repeated runs produce byte-identical reports.
    #[serde(default)]
    pub record_wall_time: bool,
}

fn all_conditions() -> Vec<Condition> {
    Condition::ALL.to_vec()
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_repeats() -> usize {
    3
}

impl ExperimentConfig {
    pub fn new(dataset_root: impl Into<PathBuf>, profile: DatasetProfile, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            version: CONFIG_VERSION.into(),
            dataset_root: dataset_root.into(),
            profile,
            conditions: all_conditions(),
            canny: CannyParams::default(),
            zoom: ZoomSpec::default(),
            augment: AugmentConfig::default(),
            train: TrainConfig::default(),
            test_fraction: default_test_fraction(),
            master_seed: 0,
            repeats: default_repeats(),
            output_dir: output_dir.into(),
            record_wall_time: false,
        }
    }

    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.dataset_root = base.join(&cfg.dataset_root);
        cfg.output_dir = base.join(&cfg.output_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::SchemaVersionMismatch {
                expected: CONFIG_VERSION.into(),
                found: self.version.clone(),
            });
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be >= 1".into()));
        }
        if self.conditions.is_empty() {
            return Err(Error::Config("no conditions selected".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        self.canny.validate()?;
        self.zoom.validate()?;
        self.augment.validate()?;
        self.train.validate()?;
        Ok(())
    }

    /// SHA-256 over the canonical JSON of the config, without `output_dir`
    /// (where results go does not change them).
    pub fn digest(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output_dir");
        }
        let bytes = serde_json::to_vec(&value).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Seed shared by all conditions of one repeat, so their splits match.
pub fn split_seed(master_seed: u64, repeat: usize) -> u64 {
    seed::mix(master_seed, &[seed::fnv1a(b"split"), repeat as u64])
}

/// Seed of one condition x repeat cell; drives augmentation and training.
pub fn cell_seed(master_seed: u64, cond: Condition, repeat: usize) -> u64 {
    seed::mix(master_seed, &[seed::fnv1a(cond.name().as_bytes()), repeat as u64])
}

/// Builds the condition's view of a split manifest. Test records get the
/// same per-image preprocessing as training records but are never
/// augmented.
pub fn prepare_condition(
    m: &DatasetManifest,
    cond: Condition,
    cfg: &ExperimentConfig,
    cell_seed: u64,
    workdir: &Path,
    jobs: usize,
) -> Result<DatasetManifest> {
    let mut out = m.clone();
    if cond.zooms() && cfg.profile.zoom_enabled {
        out = zoom_manifest(&out, &cfg.zoom, &workdir.join("zoom"), jobs)?;
    }
    if cond.edges() {
        out = canny_manifest(&out, &cfg.canny, &workdir.join("edges"), jobs)?;
    }
    if cond.augments() {
        out = expand_dataset(&out, &cfg.augment, cell_seed, workdir, jobs)?;
    }
    Ok(out)
}

fn cell_dir(output_dir: &Path, cond: Condition, repeat: usize) -> PathBuf {
    output_dir.join("cells").join(format!("{}_r{repeat}", cond.name()))
}

struct Cell {
    cond: Condition,
    repeat: usize,
}

/// Runs every condition x repeat cell and writes the reports, per-cell
/// manifests and checkpoints under `output_dir`. A failing cell yields a
/// row carrying the error instead of aborting the run.
///
/// With `jobs > 1` cells run concurrently; rows and artifacts are the same
/// as in a sequential run.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentReport> {
    cfg.validate()?;
    let digest = cfg.digest();
    let out_dir = absolute(&cfg.output_dir)?;
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let (scanned, warnings) = scan_dataset(&cfg.dataset_root, &cfg.profile)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    let splits = (0..cfg.repeats)
        .map(|r| split_manifest(&scanned, cfg.test_fraction, split_seed(cfg.master_seed, r)))
        .collect::<Result<Vec<_>>>()?;

    let mut conditions = cfg.conditions.clone();
    conditions.sort();
    conditions.dedup();
    let cells: Vec<Cell> = conditions
        .iter()
        .flat_map(|&cond| (0..cfg.repeats).map(move |repeat| Cell { cond, repeat }))
        .collect();
    // Parallelism goes to whole cells; inside a cell everything is sequential.
    let rows = jobs::map(jobs, &cells, |cell| {
        let seed_value = cell_seed(cfg.master_seed, cell.cond, cell.repeat);
        let started = Instant::now();
        let result = run_cell(cfg, &splits[cell.repeat], cell, seed_value, &out_dir);
        let wall_time_s = if cfg.record_wall_time {
            started.elapsed().as_secs_f64()
        } else {
            0.0
        };
        let (train_accuracy, test_accuracy, error) = match result {
            Ok((tr, te)) => (Some(tr), Some(te), None),
            Err(e) => {
                log::error!("{} repeat {}: {e}", cell.cond, cell.repeat);
                (None, None, Some(e.to_string()))
            }
        };
        Ok(ReportRow {
            condition: cell.cond,
            repeat: cell.repeat,
            seed: seed_value,
            train_accuracy,
            test_accuracy,
            wall_time_s,
            config_digest: digest.clone(),
            error,
        })
    })?;
    let report = ExperimentReport { rows };
    for format in crate::report::ReportFormat::ALL {
        report.write(format, &out_dir.join(format!("report.{}", format.extension())))?;
    }
    let mut config_text = serde_json::to_string_pretty(cfg).expect("config serializes");
    config_text.push('\n');
    let config_path = out_dir.join("config.json");
    fs::write(&config_path, config_text).map_err(|e| Error::io(&config_path, e))?;
    let digest_path = out_dir.join("config.sha256");
    fs::write(&digest_path, format!("{digest}\n")).map_err(|e| Error::io(&digest_path, e))?;
    Ok(report)
}

fn run_cell(
    cfg: &ExperimentConfig,
    split: &DatasetManifest,
    cell: &Cell,
    seed_value: u64,
    out_dir: &Path,
) -> Result<(f64, f64)> {
    let dir = cell_dir(out_dir, cell.cond, cell.repeat);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let prepared = prepare_condition(split, cell.cond, cfg, seed_value, &dir, 1)?;
    write_manifest(&prepared, &dir.join("manifest.json"))?;
    let train_cfg = TrainConfig {
        seed: seed_value,
        ..cfg.train.clone()
    };
    let arch = default_arch(&prepared, &train_cfg);
    let (classifier, _) = train(&prepared, &train_cfg, &arch, 1)?;
    classifier.save(&dir.join("checkpoint.json"))?;
    let batch = train_cfg.batch_size;
    let train_acc = evaluate_split(&classifier, &prepared, Split::Train, batch, 1)?;
    let test_acc = evaluate(&classifier, &prepared, batch, 1)?;
    log::info!(
        "{} repeat {}: train {train_acc:.3}, test {test_acc:.3}",
        cell.cond,
        cell.repeat
    );
    Ok((train_acc, test_acc))
}
