//! Per-image preprocessing stages applied to whole manifests.

use std::fs;
use std::path::Path;

use earid_core::edge::{canny, CannyParams};
use earid_core::geometry::{zoom_crop, ZoomSpec};
use earid_core::Image;

use crate::dataset::{DatasetManifest, Provenance, Record};
use crate::expand::file_stem;
use crate::io::{load_image, save_image};
use crate::{jobs, Error, Result};

/// Zoom-crops every record into `out_dir`. Provenance is unchanged.
pub fn zoom_manifest(m: &DatasetManifest, spec: &ZoomSpec, out_dir: &Path, jobs: usize) -> Result<DatasetManifest> {
    spec.validate()?;
    map_images(m, out_dir, jobs, None, |img| Ok(zoom_crop(img, spec)?))
}

/// Replaces every image by its Canny edge map replicated to three channels.
pub fn canny_manifest(
    m: &DatasetManifest,
    params: &CannyParams,
    out_dir: &Path,
    jobs: usize,
) -> Result<DatasetManifest> {
    params.validate()?;
    map_images(m, out_dir, jobs, Some(Provenance::EdgeMap), |img| {
        Ok(canny(img, params)?.to_rgb())
    })
}

fn map_images(
    m: &DatasetManifest,
    out_dir: &Path,
    jobs: usize,
    provenance: Option<Provenance>,
    f: impl Fn(&Image) -> Result<Image> + Sync + Send,
) -> Result<DatasetManifest> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let records = jobs::map(jobs, &m.records, |r| {
        let run = || -> Result<Record> {
            let out = f(&load_image(&r.path)?)?;
            let path = out_dir.join(format!("{}.png", file_stem(&r.id)));
            save_image(&out, &path)?;
            Ok(Record {
                path,
                provenance: provenance.unwrap_or(r.provenance),
                ..r.clone()
            })
        };
        run().map_err(|e| e.at(&r.path))
    })?;
    Ok(DatasetManifest {
        records,
        ..m.clone()
    })
}
