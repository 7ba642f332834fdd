use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRow {
    pub video_id: String,
    /// Resolved against the manifest's directory when relative.
    pub path: PathBuf,
    pub mos: f64,
}

/// Labelled dataset: one row per video with its mean opinion score.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetManifest {
    pub rows: Vec<ManifestRow>,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Reads a `video_id,path,mos` CSV. Row numbers in errors are file line
/// numbers (the header is line 1).
pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let base = path.parent().unwrap_or(Path::new(""));
    let fmt_err = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| fmt_err(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| fmt_err(e.to_string()))?.clone();
    let expected = ["video_id", "path", "mos"];
    if headers.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(fmt_err(format!(
            "expected header `video_id,path,mos`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| fmt_err(e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let row_err = |message: String| Error::Row {
            path: path.to_path_buf(),
            row: line,
            message,
        };
        let video_id = rec[0].trim().to_string();
        if video_id.is_empty() {
            return Err(row_err("empty video_id".into()));
        }
        let mos_text = rec[2].trim();
        let mos: f64 = mos_text
            .parse()
            .map_err(|_| row_err(format!("mos `{mos_text}` is not a number")))?;
        if !mos.is_finite() {
            return Err(row_err(format!("mos `{mos_text}` is not finite")));
        }
        if !seen.insert(video_id.clone()) {
            return Err(row_err(format!("duplicate video_id `{video_id}`")));
        }
        let p = PathBuf::from(rec[1].trim());
        let path = if p.is_relative() { base.join(p) } else { p };
        rows.push(ManifestRow {
            video_id,
            path,
            mos,
        });
    }
    Ok(DatasetManifest { rows })
}
