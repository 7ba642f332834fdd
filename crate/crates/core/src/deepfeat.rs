//! Deep semantic features produced outside this crate (one pooled CNN
//! activation vector per video) and the join with NSS features and labels.

use std::collections::HashMap;
use std::path::Path;

use crate::features::{read_feature_csv, write_feature_csv, Columns};
use crate::frameio::DatasetManifest;
use crate::{Error, Result};

/// Width of the final average-pooling layer of DenseNet-201.
pub const DEEP_DIM: usize = 1920;

const DEEP_COLUMNS: Columns = Columns {
    prefix: "d",
    min_width: 4,
};

#[derive(Clone, Debug, PartialEq)]
pub struct DeepFeatureVector {
    pub video_id: String,
    pub values: Vec<f64>,
}

/// Reads `video_id,d0000..d{dim-1}` rows, checking width and finiteness.
pub fn read_deep_features(path: &Path, dim: usize) -> Result<Vec<DeepFeatureVector>> {
    Ok(read_feature_csv(path, DEEP_COLUMNS, dim)?
        .into_iter()
        .map(|(video_id, values)| DeepFeatureVector { video_id, values })
        .collect())
}

pub fn write_deep_features(path: &Path, dim: usize, rows: &[DeepFeatureVector]) -> Result<()> {
    let rows: Vec<(String, Vec<f64>)> = rows
        .iter()
        .map(|r| (r.video_id.clone(), r.values.clone()))
        .collect();
    write_feature_csv(path, DEEP_COLUMNS, dim, &rows)
}

/// One labelled training example.
#[derive(Clone, Debug, PartialEq)]
pub struct JoinedRow {
    pub video_id: String,
    pub nss: Vec<f64>,
    /// Absent when the run uses NSS features only.
    pub deep: Option<Vec<f64>>,
    pub mos: f64,
}

fn index<T>(rows: &[T], id: impl Fn(&T) -> &str) -> HashMap<&str, &T> {
    rows.iter().map(|r| (id(r), r)).collect()
}

/// Inner join on `video_id` in manifest order. Every manifest id must be
/// present in each supplied feature set; extra feature rows are ignored.
pub fn join_features(
    manifest: &DatasetManifest,
    nss: &[(String, Vec<f64>)],
    deep: Option<&[DeepFeatureVector]>,
) -> Result<Vec<JoinedRow>> {
    let nss_idx = index(nss, |r| r.0.as_str());
    let deep_idx = deep.map(|d| index(d, |r| r.video_id.as_str()));
    let mut missing = Vec::new();
    let mut rows = Vec::with_capacity(manifest.len());
    for m in &manifest.rows {
        let n = nss_idx.get(m.video_id.as_str());
        let d = deep_idx.as_ref().map(|idx| idx.get(m.video_id.as_str()));
        if n.is_none() {
            missing.push(format!("{} (nss)", m.video_id));
        }
        if let Some(None) = d {
            missing.push(format!("{} (deep)", m.video_id));
        }
        if let (Some(n), d) = (n, d) {
            rows.push(JoinedRow {
                video_id: m.video_id.clone(),
                nss: n.1.clone(),
                deep: d.flatten().map(|d| d.values.clone()),
                mos: m.mos,
            });
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingIds(missing));
    }
    Ok(rows)
}
