use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageReader};

use super::RgbFrame;
use crate::{Error, Plane, Result};

fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("png"))
        })
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Whether `dir` holds at least one PNG frame.
pub fn has_png_frames(dir: &Path) -> bool {
    png_files(dir).map(|f| !f.is_empty()).unwrap_or(false)
}

fn to_frame(img: DynamicImage, index: usize) -> RgbFrame {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut r = Plane::new(w, h);
    let mut g = Plane::new(w, h);
    let mut b = Plane::new(w, h);
    let wide = matches!(
        img,
        DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
            | DynamicImage::ImageRgb16(_)
            | DynamicImage::ImageRgba16(_)
    );
    if wide {
        let buf = img.into_rgb16();
        for (x, y, px) in buf.enumerate_pixels() {
            let (i, j) = (y as usize, x as usize);
            r.set(i, j, px[0] as f64 / 65535.0);
            g.set(i, j, px[1] as f64 / 65535.0);
            b.set(i, j, px[2] as f64 / 65535.0);
        }
    } else {
        let buf = img.into_rgb8();
        for (x, y, px) in buf.enumerate_pixels() {
            let (i, j) = (y as usize, x as usize);
            r.set(i, j, px[0] as f64 / 255.0);
            g.set(i, j, px[1] as f64 / 255.0);
            b.set(i, j, px[2] as f64 / 255.0);
        }
    }
    RgbFrame { r, g, b, index }
}

/// Reads every `*.png` in `dir`, ordered by file name.
pub fn read_png_dir(dir: &Path) -> Result<Vec<RgbFrame>> {
    let files = png_files(dir)?;
    if files.is_empty() {
        return Err(Error::Image {
            path: dir.to_path_buf(),
            message: "no PNG frames found".into(),
        });
    }
    let mut frames: Vec<RgbFrame> = Vec::with_capacity(files.len());
    for path in files {
        let img = ImageReader::open(&path)
            .and_then(|r| r.with_guessed_format())
            .map_err(|e| Error::Image {
                path: path.clone(),
                message: e.to_string(),
            })?
            .decode()
            .map_err(|e| Error::Image {
                path: path.clone(),
                message: e.to_string(),
            })?;
        let frame = to_frame(img, frames.len());
        if let Some(first) = frames.first() {
            if first.r.dims() != frame.r.dims() {
                return Err(Error::Image {
                    path,
                    message: format!(
                        "frame is {}x{}, expected {}x{}",
                        frame.width(),
                        frame.height(),
                        first.width(),
                        first.height()
                    ),
                });
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}
