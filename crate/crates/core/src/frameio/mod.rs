//! Video input: Y4M streams, PNG frame directories and dataset manifests.

mod manifest;
mod png;
mod y4m;

pub use manifest::{read_manifest, DatasetManifest, ManifestRow};
pub use png::{has_png_frames, read_png_dir};
pub use y4m::{
    read_y4m, rgb_to_yuv444, write_y4m, yuv_to_rgb, Chroma, Y4mHeader, Y4mReader, Y4mWriter,
    YuvFrame, YuvMatrix,
};

use std::path::Path;

use crate::{Error, Plane, Result};

/// One decoded sRGB frame with samples in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbFrame {
    pub r: Plane,
    pub g: Plane,
    pub b: Plane,
    pub index: usize,
}

impl RgbFrame {
    pub fn new(r: Plane, g: Plane, b: Plane, index: usize) -> Result<Self> {
        r.ensure_same_dims(&g)?;
        r.ensure_same_dims(&b)?;
        Ok(RgbFrame { r, g, b, index })
    }

    pub fn gray(width: usize, height: usize, value: f64, index: usize) -> Self {
        let p = Plane::filled(width, height, value);
        RgbFrame {
            r: p.clone(),
            g: p.clone(),
            b: p,
            index,
        }
    }

    pub fn width(&self) -> usize {
        self.r.width()
    }

    pub fn height(&self) -> usize {
        self.r.height()
    }
}

/// Reads a video from a `.y4m` file or a directory of PNG frames.
pub fn read_video(path: &Path, matrix: YuvMatrix) -> Result<Vec<RgbFrame>> {
    if path.is_dir() {
        read_png_dir(path)
    } else if path.is_file() {
        read_y4m(path, matrix)
    } else {
        Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{}: no such file or directory", path.display()),
        )))
    }
}
