//! Offline dataset expansion: every TRAIN image gets `chains_per_image`
//! augmented copies written as PNG.

use std::fs;
use std::path::{Path, PathBuf};

use earid_core::augment::{apply_chain, sample_chain, AugmentConfig};
use earid_core::seed;

use crate::dataset::{DatasetManifest, Provenance, Record, Split};
use crate::io::{load_image, save_image};
use crate::{jobs, Error, Result};

/// File-system safe stem for a record id. The hash suffix keeps ids that
/// sanitize to the same text apart.
pub(crate) fn file_stem(id: &str) -> String {
    let clean: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    format!("{clean}_{:08x}", seed::fnv1a(id.as_bytes()) as u32)
}

/// Expands the TRAIN split. Originals are kept, TEST records are copied
/// through untouched and each augmented record directly follows its source.
///
/// Chain `k` of record `id` is drawn from `chain_seed(master_seed, id, k)`,
/// so the output does not depend on `jobs`.
pub fn expand_dataset(
    m: &DatasetManifest,
    cfg: &AugmentConfig,
    master_seed: u64,
    out_dir: &Path,
    jobs: usize,
) -> Result<DatasetManifest> {
    cfg.validate()?;
    if cfg.chains_per_image == 0 {
        return Ok(m.clone());
    }
    let aug_dir = out_dir.join("aug");
    fs::create_dir_all(&aug_dir).map_err(|e| Error::io(&aug_dir, e))?;
    let augmented = jobs::map(jobs, &m.records, |r| {
        if r.split != Split::Train {
            return Ok(Vec::new());
        }
        augment_record(r, cfg, master_seed, &aug_dir).map_err(|e| e.at(&r.path))
    })?;
    let mut records = Vec::with_capacity(m.records.len() * (1 + cfg.chains_per_image));
    for (r, extra) in m.records.iter().zip(augmented) {
        records.push(r.clone());
        records.extend(extra);
    }
    Ok(DatasetManifest {
        records,
        ..m.clone()
    })
}

fn augment_record(r: &Record, cfg: &AugmentConfig, master_seed: u64, dir: &Path) -> Result<Vec<Record>> {
    let img = load_image(&r.path)?;
    let stem = file_stem(&r.id);
    (0..cfg.chains_per_image)
        .map(|k| {
            let chain = sample_chain(cfg, seed::chain_seed(master_seed, &r.id, k as u64), &r.id)?;
            let out = apply_chain(&img, &chain)?;
            let path: PathBuf = dir.join(format!("{stem}_aug{k}.png"));
            save_image(&out, &path)?;
            Ok(Record {
                id: format!("{}#aug{k}", r.id),
                path,
                label: r.label.clone(),
                split: Split::Train,
                provenance: Provenance::Augmented,
                chain: Some(chain),
            })
        })
        .collect()
}
