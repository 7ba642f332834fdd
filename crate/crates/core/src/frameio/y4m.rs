//! YUV4MPEG2 reading and writing for 8-bit 4:2:0 and 4:4:4 streams.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::RgbFrame;
use crate::{Error, Plane, Result};

const SIGNATURE: &str = "YUV4MPEG2";
const FRAME_TAG: &[u8] = b"FRAME";
const MAX_LINE: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chroma {
    C420,
    C444,
}

impl Chroma {
    fn chroma_dims(self, width: usize, height: usize) -> (usize, usize) {
        match self {
            Chroma::C420 => (width.div_ceil(2), height.div_ceil(2)),
            Chroma::C444 => (width, height),
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Chroma::C420 => "420jpeg",
            Chroma::C444 => "444",
        }
    }
}

/// YUV to RGB matrix. Both variants are full range.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum YuvMatrix {
    #[default]
    Bt601,
    Bt709,
}

impl YuvMatrix {
    /// Luma weights `(Kr, Kb)`.
    fn weights(self) -> (f64, f64) {
        match self {
            YuvMatrix::Bt601 => (0.299, 0.114),
            YuvMatrix::Bt709 => (0.2126, 0.0722),
        }
    }
}

impl FromStr for YuvMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bt601" => Ok(YuvMatrix::Bt601),
            "bt709" => Ok(YuvMatrix::Bt709),
            other => Err(Error::arg(format!("unknown matrix `{other}` (bt601, bt709)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Y4mHeader {
    pub width: usize,
    pub height: usize,
    pub chroma: Chroma,
    pub framerate: (u32, u32),
    /// Tokens we do not interpret (interlacing, aspect, X-extensions),
    /// preserved for writing.
    pub extra: Vec<String>,
}

impl Y4mHeader {
    pub fn new(width: usize, height: usize, chroma: Chroma) -> Self {
        Y4mHeader {
            width,
            height,
            chroma,
            framerate: (30, 1),
            extra: Vec::new(),
        }
    }

    fn frame_len(&self) -> usize {
        let (cw, ch) = self.chroma.chroma_dims(self.width, self.height);
        self.width * self.height + 2 * cw * ch
    }

    fn parse(line: &str) -> Result<Self> {
        let mut tokens = line.split(' ');
        let mut offset = 0u64;
        let sig = tokens.next().unwrap_or("");
        if sig != SIGNATURE {
            return Err(Error::Y4mHeader {
                offset: 0,
                message: format!("expected `{SIGNATURE}` signature"),
            });
        }
        offset += sig.len() as u64 + 1;

        let mut width = None;
        let mut height = None;
        let mut chroma = Chroma::C420;
        let mut framerate = (30, 1);
        let mut extra = Vec::new();
        for tok in tokens {
            let at = offset;
            offset += tok.len() as u64 + 1;
            if tok.is_empty() {
                continue;
            }
            let bad = |what: &str| Error::Y4mHeader {
                offset: at,
                message: format!("invalid {what} `{tok}`"),
            };
            let (key, val) = tok.split_at(1);
            match key {
                "W" => width = Some(val.parse::<usize>().map_err(|_| bad("width"))?),
                "H" => height = Some(val.parse::<usize>().map_err(|_| bad("height"))?),
                "F" => {
                    let (n, d) = val.split_once(':').ok_or_else(|| bad("frame rate"))?;
                    framerate = (
                        n.parse().map_err(|_| bad("frame rate"))?,
                        d.parse().map_err(|_| bad("frame rate"))?,
                    );
                }
                "C" => {
                    chroma = match val {
                        "420" | "420jpeg" | "420paldv" | "420mpeg2" => Chroma::C420,
                        "444" => Chroma::C444,
                        _ => {
                            return Err(Error::Y4mHeader {
                                offset: at,
                                message: format!("unsupported colorspace `{val}` (8-bit 420 or 444 only)"),
                            })
                        }
                    }
                }
                "I" | "A" | "X" => extra.push(tok.to_string()),
                _ => return Err(bad("header token")),
            }
        }
        let width = width.ok_or(Error::Y4mHeader {
            offset,
            message: "missing width".into(),
        })?;
        let height = height.ok_or(Error::Y4mHeader {
            offset,
            message: "missing height".into(),
        })?;
        if width == 0 || height == 0 {
            return Err(Error::Y4mHeader {
                offset: 0,
                message: format!("empty frame size {width}x{height}"),
            });
        }
        Ok(Y4mHeader {
            width,
            height,
            chroma,
            framerate,
            extra,
        })
    }

    fn to_line(&self) -> String {
        let mut s = format!(
            "{SIGNATURE} W{} H{} F{}:{}",
            self.width, self.height, self.framerate.0, self.framerate.1
        );
        for e in &self.extra {
            s.push(' ');
            s.push_str(e);
        }
        s.push_str(" C");
        s.push_str(self.chroma.tag());
        s.push('\n');
        s
    }
}

/// Raw 8-bit planes of one frame, chroma at native (possibly subsampled)
/// resolution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct YuvFrame {
    pub y: Vec<u8>,
    pub u: Vec<u8>,
    pub v: Vec<u8>,
}

/// Streaming frame reader. Yields raw YUV frames in display order.
pub struct Y4mReader<R> {
    inner: R,
    header: Y4mHeader,
    offset: u64,
    index: usize,
    done: bool,
}

fn read_line<R: BufRead>(r: &mut R, offset: u64) -> Result<Option<Vec<u8>>> {
    let mut buf = Vec::new();
    let n = r.by_ref().take(MAX_LINE as u64).read_until(b'\n', &mut buf)?;
    if n == 0 {
        return Ok(None);
    }
    if buf.last() != Some(&b'\n') {
        return Err(Error::Y4mHeader {
            offset: offset + n as u64,
            message: "unterminated header line".into(),
        });
    }
    buf.pop();
    Ok(Some(buf))
}

impl<R: BufRead> Y4mReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let line = read_line(&mut inner, 0)?.ok_or(Error::Y4mHeader {
            offset: 0,
            message: "empty stream".into(),
        })?;
        let text = std::str::from_utf8(&line).map_err(|e| Error::Y4mHeader {
            offset: e.valid_up_to() as u64,
            message: "header is not ASCII".into(),
        })?;
        let header = Y4mHeader::parse(text)?;
        Ok(Y4mReader {
            inner,
            header,
            offset: line.len() as u64 + 1,
            index: 0,
            done: false,
        })
    }

    pub fn header(&self) -> &Y4mHeader {
        &self.header
    }

    pub fn next_frame(&mut self) -> Result<Option<YuvFrame>> {
        if self.done {
            return Ok(None);
        }
        let start = self.offset;
        let line = match read_line(&mut self.inner, start) {
            Ok(Some(l)) => l,
            Ok(None) => {
                self.done = true;
                return Ok(None);
            }
            Err(Error::Y4mHeader { .. }) => {
                self.done = true;
                return Err(Error::Y4mTruncated {
                    index: self.index,
                    message: format!("incomplete FRAME marker at byte {start}"),
                });
            }
            Err(e) => return Err(e),
        };
        if !line.starts_with(FRAME_TAG)
            || !(line.len() == FRAME_TAG.len() || line[FRAME_TAG.len()] == b' ')
        {
            self.done = true;
            return Err(Error::Y4mHeader {
                offset: start,
                message: format!("expected FRAME marker for frame {}", self.index),
            });
        }
        self.offset += line.len() as u64 + 1;

        let (w, h) = (self.header.width, self.header.height);
        let (cw, ch) = self.header.chroma.chroma_dims(w, h);
        let mut data = vec![0u8; self.header.frame_len()];
        let mut filled = 0;
        while filled < data.len() {
            let n = self.inner.read(&mut data[filled..])?;
            if n == 0 {
                self.done = true;
                return Err(Error::Y4mTruncated {
                    index: self.index,
                    message: format!("expected {} bytes, got {filled}", data.len()),
                });
            }
            filled += n;
        }
        self.offset += data.len() as u64;
        self.index += 1;
        let v = data.split_off(w * h + cw * ch);
        let u = data.split_off(w * h);
        Ok(Some(YuvFrame { y: data, u, v }))
    }
}

impl<R: BufRead> Iterator for Y4mReader<R> {
    type Item = Result<YuvFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame().transpose()
    }
}

pub struct Y4mWriter<W: Write> {
    inner: W,
    header: Y4mHeader,
}

impl<W: Write> Y4mWriter<W> {
    pub fn new(mut inner: W, header: Y4mHeader) -> Result<Self> {
        inner.write_all(header.to_line().as_bytes())?;
        Ok(Y4mWriter { inner, header })
    }

    pub fn write_frame(&mut self, frame: &YuvFrame) -> Result<()> {
        let (w, h) = (self.header.width, self.header.height);
        let (cw, ch) = self.header.chroma.chroma_dims(w, h);
        if frame.y.len() != w * h || frame.u.len() != cw * ch || frame.v.len() != cw * ch {
            return Err(Error::DimensionMismatch(format!(
                "frame planes do not match {w}x{h} {:?}",
                self.header.chroma
            )));
        }
        self.inner.write_all(b"FRAME\n")?;
        self.inner.write_all(&frame.y)?;
        self.inner.write_all(&frame.u)?;
        self.inner.write_all(&frame.v)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Converts raw YUV to sRGB planes in `[0, 1]`. 4:2:0 chroma is upsampled by
/// nearest neighbour.
pub fn yuv_to_rgb(frame: &YuvFrame, header: &Y4mHeader, matrix: YuvMatrix, index: usize) -> RgbFrame {
    let (w, h) = (header.width, header.height);
    let (cw, _) = header.chroma.chroma_dims(w, h);
    let (kr, kb) = matrix.weights();
    let kg = 1.0 - kr - kb;
    let rv = 2.0 * (1.0 - kr);
    let bu = 2.0 * (1.0 - kb);
    let gu = 2.0 * kb * (1.0 - kb) / kg;
    let gv = 2.0 * kr * (1.0 - kr) / kg;
    let sub = header.chroma == Chroma::C420;

    let mut r = Plane::new(w, h);
    let mut g = Plane::new(w, h);
    let mut b = Plane::new(w, h);
    for i in 0..h {
        for j in 0..w {
            let ci = if sub { (i / 2) * cw + j / 2 } else { i * cw + j };
            let y = frame.y[i * w + j] as f64;
            let u = frame.u[ci] as f64 - 128.0;
            let v = frame.v[ci] as f64 - 128.0;
            r.set(i, j, ((y + rv * v) / 255.0).clamp(0.0, 1.0));
            g.set(i, j, ((y - gu * u - gv * v) / 255.0).clamp(0.0, 1.0));
            b.set(i, j, ((y + bu * u) / 255.0).clamp(0.0, 1.0));
        }
    }
    RgbFrame { r, g, b, index }
}

/// Forward conversion to full-range 4:4:4, used to write synthetic test
/// videos.
pub fn rgb_to_yuv444(frame: &RgbFrame, matrix: YuvMatrix) -> YuvFrame {
    let (kr, kb) = matrix.weights();
    let kg = 1.0 - kr - kb;
    let q = |x: f64| x.round().clamp(0.0, 255.0) as u8;
    let n = frame.r.len();
    let mut out = YuvFrame {
        y: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
        v: Vec::with_capacity(n),
    };
    for ((&r, &g), &b) in frame
        .r
        .as_slice()
        .iter()
        .zip(frame.g.as_slice())
        .zip(frame.b.as_slice())
    {
        let (r, g, b) = (r * 255.0, g * 255.0, b * 255.0);
        let y = kr * r + kg * g + kb * b;
        out.y.push(q(y));
        out.u.push(q((b - y) / (2.0 * (1.0 - kb)) + 128.0));
        out.v.push(q((r - y) / (2.0 * (1.0 - kr)) + 128.0));
    }
    out
}

pub fn read_y4m(path: &Path, matrix: YuvMatrix) -> Result<Vec<RgbFrame>> {
    let mut reader = Y4mReader::new(BufReader::new(File::open(path)?))?;
    let header = reader.header().clone();
    let mut frames = Vec::new();
    while let Some(f) = reader.next_frame()? {
        frames.push(yuv_to_rgb(&f, &header, matrix, frames.len()));
    }
    Ok(frames)
}

/// Writes RGB frames as a 4:4:4 Y4M file.
pub fn write_y4m(path: &Path, frames: &[RgbFrame], matrix: YuvMatrix) -> Result<()> {
    let first = frames
        .first()
        .ok_or_else(|| Error::arg("cannot write a video with no frames"))?;
    let header = Y4mHeader::new(first.width(), first.height(), Chroma::C444);
    let mut w = Y4mWriter::new(BufWriter::new(File::create(path)?), header)?;
    for f in frames {
        w.write_frame(&rgb_to_yuv444(f, matrix))?;
    }
    w.finish()?;
    Ok(())
}
