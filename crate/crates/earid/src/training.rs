//! Training and evaluation of the compact classifier on manifests, plus
//! the JSON checkpoint format.

use std::fs;
use std::path::Path;

use earid_core::geometry::resize_bilinear;
use earid_core::nn::{accuracy, fit, ArchSpec, CompactCnn, EpochMetrics, SampleSet, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetManifest, Split};
use crate::io::load_image;
use crate::{jobs, Error, Result};

pub const CHECKPOINT_FORMAT: &str = "earid_checkpoint_v1";

/// A trained network together with the label order of its outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub model: CompactCnn,
    /// `labels[k]` is the subject predicted by output `k`.
    pub labels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    arch: ArchSpec,
    labels: Vec<String>,
    params: Vec<f64>,
}

impl Classifier {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.into(),
            arch: self.model.arch().clone(),
            labels: self.labels.clone(),
            params: self.model.params().to_vec(),
        };
        let text = serde_json::to_string(&file).expect("checkpoint serializes");
        crate::io::write_file(path, text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        let file: CheckpointFile = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if file.format != CHECKPOINT_FORMAT {
            return Err(Error::SchemaVersionMismatch {
                expected: CHECKPOINT_FORMAT.into(),
                found: file.format,
            });
        }
        if file.labels.len() != file.arch.class_count {
            return Err(Error::Config(format!(
                "{}: {} labels for {} classes",
                path.display(),
                file.labels.len(),
                file.arch.class_count
            )));
        }
        Ok(Self {
            model: CompactCnn::from_params(file.arch, file.params)?,
            labels: file.labels,
        })
    }

    fn class_of(&self, label: &str) -> Result<usize> {
        self.labels
            .binary_search_by(|l| l.as_str().cmp(label))
            .map_err(|_| Error::UnknownLabel(label.to_string()))
    }
}

/// Loads one split as RGB tensors resized to `input_size` squares. Class
/// indices follow `labels`, which must be sorted.
pub fn load_samples(
    m: &DatasetManifest,
    split: Split,
    labels: &[String],
    input_size: usize,
    jobs: usize,
) -> Result<SampleSet> {
    let records: Vec<_> = m.in_split(split).collect();
    let items = jobs::map(jobs, &records, |r| {
        let load = || -> Result<(Vec<f64>, usize)> {
            let class = labels
                .binary_search_by(|l| l.as_str().cmp(&r.label))
                .map_err(|_| Error::UnknownLabel(r.label.clone()))?;
            let img = load_image(&r.path)?.to_rgb();
            let img = resize_bilinear(&img, input_size, input_size)?;
            Ok((img.to_chw(), class))
        };
        load().map_err(|e| e.at(&r.path))
    })?;
    let mut set = SampleSet::new(3, input_size, input_size);
    for (item, class) in items {
        set.push(&item, class)?;
    }
    Ok(set)
}

/// The compact architecture sized for `m` and `cfg`.
pub fn default_arch(m: &DatasetManifest, cfg: &TrainConfig) -> ArchSpec {
    ArchSpec::compact(cfg.input_size, m.labels().len())
}

/// Trains on the TRAIN split. Output `k` stands for the `k`-th label of the
/// whole manifest in sorted order.
pub fn train(
    m: &DatasetManifest,
    cfg: &TrainConfig,
    arch: &ArchSpec,
    jobs: usize,
) -> Result<(Classifier, Vec<EpochMetrics>)> {
    cfg.validate()?;
    let labels = m.labels();
    if arch.input_size != cfg.input_size || arch.class_count != labels.len() || arch.input_channels != 3 {
        return Err(Error::Config(format!(
            "architecture expects {}-channel {}px input and {} classes; data has 3 channels, \
             input_size {} and {} labels",
            arch.input_channels,
            arch.input_size,
            arch.class_count,
            cfg.input_size,
            labels.len()
        )));
    }
    if m.count(Split::Train) == 0 {
        return Err(Error::EmptyTrainSplit);
    }
    let data = load_samples(m, Split::Train, &labels, cfg.input_size, jobs)?;
    let mut model = CompactCnn::init(arch.clone(), cfg.seed)?;
    let history = fit(&mut model, &data, cfg, |e| {
        log::info!(
            "epoch {}: loss {:.4}, train accuracy {:.3}",
            e.epoch,
            e.loss,
            e.train_accuracy
        )
    })?;
    Ok((Classifier { model, labels }, history))
}

/// Accuracy on one split. Argmax ties go to the lowest class index.
pub fn evaluate_split(c: &Classifier, m: &DatasetManifest, split: Split, batch_size: usize, jobs: usize) -> Result<f64> {
    if m.count(split) == 0 {
        return Err(match split {
            Split::Train => Error::EmptyTrainSplit,
            _ => Error::EmptyTestSplit,
        });
    }
    for r in m.in_split(split) {
        c.class_of(&r.label)?;
    }
    let data = load_samples(m, split, &c.labels, c.model.arch().input_size, jobs)?;
    Ok(accuracy(&c.model, &data, batch_size)?)
}

/// Test-split accuracy.
pub fn evaluate(c: &Classifier, m: &DatasetManifest, batch_size: usize, jobs: usize) -> Result<f64> {
    evaluate_split(c, m, Split::Test, batch_size, jobs)
}
