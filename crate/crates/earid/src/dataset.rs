//! Dataset manifests: scanning image trees, stratified splits and the
//! `manifest_v1` JSON format.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Component, Path, PathBuf};

use earid_core::augment::TransformChain;
use earid_core::seed;
use rand::seq::SliceRandom;
use regex::Regex;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::io::{image_size, is_image_path, write_file};
use crate::{Error, Result};

pub const MANIFEST_VERSION: &str = "manifest_v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Split {
    Train,
    Test,
    Unsplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Original,
    Augmented,
    EdgeMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub path: PathBuf,
    /// Subject identifier.
    pub label: String,
    pub split: Split,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<TransformChain>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub dataset_name: String,
    pub class_count: usize,
    pub created_with_seed: Option<u64>,
    pub records: Vec<Record>,
}

impl DatasetManifest {
    /// Builds a manifest, deriving `class_count` from the records.
    pub fn new(dataset_name: impl Into<String>, records: Vec<Record>, seed: Option<u64>) -> Self {
        let mut m = Self {
            dataset_name: dataset_name.into(),
            class_count: 0,
            created_with_seed: seed,
            records,
        };
        m.class_count = m.labels().len();
        m
    }

    /// Distinct labels in sorted order; a label's position is its class index.
    pub fn labels(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.records.iter().map(|r| r.label.as_str()).collect();
        set.into_iter().map(String::from).collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.records.iter().filter(|r| r.split == split).count()
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.split == split)
    }

    /// Checks the manifest invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::MalformedManifest(m));
        if self.class_count != self.labels().len() {
            return bad(format!(
                "class_count {} but {} distinct labels",
                self.class_count,
                self.labels().len()
            ));
        }
        let mut ids = BTreeSet::new();
        for r in &self.records {
            if !ids.insert(r.id.as_str()) {
                return bad(format!("duplicate record id {:?}", r.id));
            }
            if (r.provenance == Provenance::Augmented) != r.chain.is_some() {
                return bad(format!(
                    "record {:?}: a chain must be present exactly for augmented records",
                    r.id
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// One directory per subject; the directory name is the label.
    PerSubjectDirs,
    /// Labels come from a regex capture on the file name.
    FilenamePattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub layout: Layout,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_pattern: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_resolution: Option<(usize, usize)>,
    #[serde(default = "default_true")]
    pub zoom_enabled: bool,
}

fn default_true() -> bool {
    true
}

impl DatasetProfile {
    /// Fixed 492x702 images, zoom applied.
    pub fn ami() -> Self {
        Self {
            layout: Layout::PerSubjectDirs,
            label_pattern: None,
            expected_resolution: Some(earid_core::geometry::AMI_SOURCE_SIZE),
            zoom_enabled: true,
        }
    }

    /// Variable resolution, no zoom.
    pub fn earvn() -> Self {
        Self {
            layout: Layout::PerSubjectDirs,
            label_pattern: None,
            expected_resolution: None,
            zoom_enabled: false,
        }
    }

    fn pattern(&self) -> Result<Option<Regex>> {
        match self.layout {
            Layout::PerSubjectDirs => Ok(None),
            Layout::FilenamePattern => {
                let text = self
                    .label_pattern
                    .as_deref()
                    .ok_or_else(|| Error::InvalidPattern("<missing>".into()))?;
                let re = Regex::new(text).map_err(|e| Error::InvalidPattern(e.to_string()))?;
                if re.captures_len() != 2 {
                    return Err(Error::InvalidPattern(text.into()));
                }
                Ok(Some(re))
            }
        }
    }
}

/// Slash-separated path of `path` below `root`.
fn relative_id(path: &Path, root: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// One record per image under `root`, sorted by path, plus warnings for
/// images whose size differs from the profile's expected resolution.
pub fn scan_dataset(root: &Path, profile: &DatasetProfile) -> Result<(DatasetManifest, Vec<String>)> {
    if !root.is_dir() {
        return Err(Error::FileNotFound(root.to_path_buf()));
    }
    let root = absolute(root)?;
    let pattern = profile.pattern()?;
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for entry in WalkDir::new(&root).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::UnreadableFile {
            path: e.path().map(Path::to_path_buf).unwrap_or_else(|| root.clone()),
            reason: e.to_string(),
        })?;
        let path = entry.path();
        if !entry.file_type().is_file() || !is_image_path(path) {
            continue;
        }
        let label = match &pattern {
            None => path
                .parent()
                .filter(|p| *p != root)
                .and_then(|p| p.file_name())
                .map(|n| n.to_string_lossy().into_owned()),
            Some(re) => path
                .file_name()
                .and_then(|n| re.captures(&n.to_string_lossy()).map(|c| c[1].to_string())),
        }
        .ok_or_else(|| Error::NoLabelMatch(path.to_path_buf()))?;
        let size = image_size(path)?;
        if let Some(expected) = profile.expected_resolution {
            if size != expected {
                warnings.push(format!(
                    "{}: {}x{} differs from expected {}x{}",
                    path.display(),
                    size.0,
                    size.1,
                    expected.0,
                    expected.1
                ));
            }
        }
        records.push(Record {
            id: relative_id(path, &root),
            path: path.to_path_buf(),
            label,
            split: Split::Unsplit,
            provenance: Provenance::Original,
            chain: None,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset(root));
    }
    records.sort_by(|a, b| a.id.cmp(&b.id));
    let name = root
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok((DatasetManifest::new(name, records, None), warnings))
}

/// Number of test records for a label with `n` records.
pub fn test_count(n: usize, test_fraction: f64) -> usize {
    // The epsilon keeps exact products such as 0.2 * 5 from rounding up.
    let k = (test_fraction * n as f64 - 1e-9).ceil().max(1.0) as usize;
    k.min(n - 1)
}

/// Stratified split: per label, `ceil(fraction * n)` records chosen by a
/// seeded shuffle go to TEST, the rest to TRAIN.
pub fn split_manifest(m: &DatasetManifest, test_fraction: f64, seed_value: u64) -> Result<DatasetManifest> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in m.records.iter().enumerate() {
        groups.entry(r.label.as_str()).or_default().push(i);
    }
    let mut out = m.clone();
    for (label, mut members) in groups {
        if members.len() < 2 {
            return Err(Error::SingletonClass(label.to_string()));
        }
        members.sort_by(|&a, &b| m.records[a].id.cmp(&m.records[b].id));
        let mut rng = seed::rng(seed::mix(seed_value, &[seed::fnv1a(label.as_bytes())]));
        members.shuffle(&mut rng);
        let k = test_count(members.len(), test_fraction);
        for (rank, &i) in members.iter().enumerate() {
            out.records[i].split = if rank < k { Split::Test } else { Split::Train };
        }
    }
    out.created_with_seed = Some(seed_value);
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    version: String,
    dataset_name: String,
    class_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    records: Vec<Record>,
}

/// Writes `manifest_v1` JSON; record paths are stored relative to the
/// manifest's directory.
pub fn write_manifest(m: &DatasetManifest, path: &Path) -> Result<()> {
    let dir = absolute(path.parent().unwrap_or(Path::new(".")))?;
    let mut records = m.records.clone();
    for r in &mut records {
        let abs = absolute(&r.path)?;
        r.path = relative_to(&abs, &dir);
    }
    let file = ManifestFile {
        version: MANIFEST_VERSION.into(),
        dataset_name: m.dataset_name.clone(),
        class_count: m.class_count,
        seed: m.created_with_seed,
        records,
    };
    let mut text = serde_json::to_string_pretty(&file).expect("manifest serializes");
    text.push('\n');
    write_file(path, text)
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::io(path, e),
    })?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::MalformedManifest(e.to_string()))?;
    match value.get("version").and_then(|v| v.as_str()) {
        Some(MANIFEST_VERSION) => {}
        found => {
            return Err(Error::SchemaVersionMismatch {
                expected: MANIFEST_VERSION.into(),
                found: found.unwrap_or("<missing>").into(),
            })
        }
    }
    let file: ManifestFile =
        serde_json::from_value(value).map_err(|e| Error::MalformedManifest(e.to_string()))?;
    let dir = absolute(path.parent().unwrap_or(Path::new(".")))?;
    let mut records = file.records;
    for r in &mut records {
        r.path = normalize(&dir.join(&r.path));
    }
    let m = DatasetManifest {
        dataset_name: file.dataset_name,
        class_count: file.class_count,
        created_with_seed: file.seed,
        records,
    };
    m.validate()?;
    Ok(m)
}

/// Absolute, lexically normalized form of `path`.
pub(crate) fn absolute(path: &Path) -> Result<PathBuf> {
    let abs = std::path::absolute(path).map_err(|e| Error::io(path, e))?;
    Ok(normalize(&abs))
}

/// Resolves `.` and `..` without touching the file system.
fn normalize(path: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for c in path.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                if !out.pop() {
                    out.push("..");
                }
            }
            other => out.push(other),
        }
    }
    out
}

/// `target` expressed relative to the directory `base`; both absolute.
fn relative_to(target: &Path, base: &Path) -> PathBuf {
    let t: Vec<_> = target.components().collect();
    let b: Vec<_> = base.components().collect();
    let common = t.iter().zip(&b).take_while(|(x, y)| x == y).count();
    let mut out = PathBuf::new();
    for _ in common..b.len() {
        out.push("..");
    }
    for c in &t[common..] {
        out.push(c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths() {
        assert_eq!(
            relative_to(Path::new("/a/b/c.png"), Path::new("/a/d")),
            PathBuf::from("../b/c.png")
        );
        assert_eq!(
            relative_to(Path::new("/a/b/c.png"), Path::new("/a/b")),
            PathBuf::from("c.png")
        );
        assert_eq!(normalize(Path::new("/a/./b/../c")), PathBuf::from("/a/c"));
    }

    #[test]
    fn test_counts_use_ceiling() {
        assert_eq!(test_count(7, 0.2), 2);
        assert_eq!(test_count(5, 0.2), 1);
        assert_eq!(test_count(7, 0.1), 1);
        assert_eq!(test_count(2, 0.9), 1);
        assert_eq!(test_count(30, 0.2), 6);
    }
}
