//! Dataset ingestion and construction.
//!
//! Datasets are described by a JSON manifest pointing at local files, either
//! one CSV per view plus a label CSV, or an IDX image/label pair that is cut
//! into four quarter views.

mod csv_io;
mod idx;
mod synth;
mod task;
mod views;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MultiviewDataset, Table};

pub use csv_io::{read_label_column, read_table, write_dataset_csv, write_table_csv};
pub use idx::{read_idx_images, read_idx_labels, IdxImages};
pub use synth::{synth_multiview, SynthParams};
pub use task::{balance_negatives, make_task, one_vs_rest, sample_indices, split_indices};
pub use views::{quarter_indices, quarter_views, QUARTER_NAMES};

/// Default overlap used for overlapping quarter views.
pub const DEFAULT_OVERLAP: f64 = 0.25;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    #[default]
    Csv,
    Idx,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewSpec {
    pub name: String,
    pub path: PathBuf,
}

/// File-based description of a dataset. Relative paths are resolved
/// against the directory holding the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub labels: PathBuf,
    #[serde(default)]
    pub views: Vec<ViewSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_class: Option<String>,
    #[serde(default)]
    pub format: DataFormat,
    /// CSV files start with a header row.
    #[serde(default)]
    pub header: bool,
    /// IDX image file (format `idx` only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<PathBuf>,
    /// Quarter overlap for IDX images; 0 gives disjoint quarters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlap: Option<f64>,
    /// Use only the first `limit` IDX images.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| Error::data(path, Some(e.line()), e.to_string()))?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(manifest)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// Views plus raw class identifiers, before binarisation.
#[derive(Clone, Debug, PartialEq)]
pub struct MulticlassDataset {
    pub views: Vec<Table>,
    pub classes: Vec<String>,
    pub view_names: Vec<String>,
}

impl MulticlassDataset {
    pub fn n_samples(&self) -> usize {
        self.classes.len()
    }

    /// Distinct class identifiers in order of first appearance.
    pub fn class_ids(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in &self.classes {
            if !out.contains(c) {
                out.push(c.clone());
            }
        }
        out
    }

    pub fn subset(&self, idx: &[usize]) -> MulticlassDataset {
        MulticlassDataset {
            views: self.views.iter().map(|t| t.select_rows(idx)).collect(),
            classes: idx.iter().map(|&i| self.classes[i].clone()).collect(),
            view_names: self.view_names.clone(),
        }
    }
}

fn load_idx(manifest: &DatasetManifest) -> Result<(Vec<Table>, Vec<String>, Vec<String>)> {
    let images_path = manifest
        .images
        .as_ref()
        .map(|p| manifest.resolve(p))
        .ok_or_else(|| Error::input("idx manifests need an `images` entry"))?;
    let labels_path = manifest.resolve(&manifest.labels);
    let mut images = read_idx_images(&images_path)?;
    let mut labels = read_idx_labels(&labels_path)?;
    if images.count != labels.len() {
        return Err(Error::data(
            &images_path,
            None,
            format!(
                "{} images but {} labels in {}",
                images.count,
                labels.len(),
                labels_path.display()
            ),
        ));
    }
    if let Some(limit) = manifest.limit {
        images.truncate(limit);
        labels.truncate(limit);
    }
    let overlap = manifest.overlap.unwrap_or(0.0);
    let views = quarter_views(&images.to_table(), images.rows, images.cols, overlap)?;
    let classes = labels.iter().map(u8::to_string).collect();
    let names = QUARTER_NAMES.iter().map(|s| s.to_string()).collect();
    Ok((views, classes, names))
}

fn load_csv(
    manifest: &DatasetManifest,
    allow_empty: bool,
) -> Result<(Vec<Table>, Vec<String>, Vec<String>)> {
    if manifest.views.is_empty() {
        return Err(Error::input("manifest lists no views"));
    }
    let labels_path = manifest.resolve(&manifest.labels);
    let classes = if allow_empty && !labels_path.exists() {
        None
    } else {
        Some(read_label_column(&labels_path, manifest.header)?)
    };
    if !allow_empty && classes.as_ref().is_none_or(Vec::is_empty) {
        return Err(Error::data(&labels_path, None, "labels file is empty"));
    }
    let mut views = Vec::with_capacity(manifest.views.len());
    let mut first: Option<(PathBuf, usize)> = None;
    for spec in &manifest.views {
        let path = manifest.resolve(&spec.path);
        let table = read_table(&path, manifest.header)?;
        match &first {
            Some((p0, n0)) if *n0 != table.n_rows() => {
                return Err(Error::data(
                    &path,
                    None,
                    format!(
                        "has {} rows but {} has {}",
                        table.n_rows(),
                        p0.display(),
                        n0
                    ),
                ));
            }
            None => first = Some((path.clone(), table.n_rows())),
            _ => {}
        }
        views.push(table);
    }
    let m = views[0].n_rows();
    let classes = classes.unwrap_or_default();
    if (!classes.is_empty() || !allow_empty) && classes.len() != m {
        return Err(Error::data(
            &labels_path,
            None,
            format!(
                "has {} labels but {} has {} rows",
                classes.len(),
                first.map(|f| f.0.display().to_string()).unwrap_or_default(),
                m
            ),
        ));
    }
    let names = manifest.views.iter().map(|v| v.name.clone()).collect();
    Ok((views, classes, names))
}

/// Loads views and raw class identifiers.
pub fn load_multiclass(manifest: &DatasetManifest) -> Result<MulticlassDataset> {
    let (views, classes, view_names) = match manifest.format {
        DataFormat::Csv => load_csv(manifest, false)?,
        DataFormat::Idx => load_idx(manifest)?,
    };
    if classes.is_empty() {
        return Err(Error::data(
            manifest.resolve(&manifest.labels),
            None,
            "no labels",
        ));
    }
    Ok(MulticlassDataset {
        views,
        classes,
        view_names,
    })
}

/// Loads a dataset and maps labels to +1 for the manifest's positive class
/// and -1 for everything else.
pub fn load_csv_multiview(manifest: &DatasetManifest) -> Result<MultiviewDataset> {
    let positive = manifest
        .positive_class
        .as_deref()
        .ok_or_else(|| Error::input("manifest has no positive_class"))?;
    let mc = load_multiclass(manifest)?;
    one_vs_rest(&mc, positive)
}

/// Loads only the feature views; labels are optional and the data may be
/// empty. Used for prediction.
pub fn load_views(manifest: &DatasetManifest) -> Result<(Vec<Table>, Vec<String>)> {
    let (views, _, names) = match manifest.format {
        DataFormat::Csv => load_csv(manifest, true)?,
        DataFormat::Idx => load_idx(manifest)?,
    };
    Ok((views, names))
}
