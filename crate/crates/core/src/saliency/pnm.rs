//! Netpbm reader (P2/P3/P5/P6, 8-bit) and P5 writer.

use std::io::Write;
use std::path::Path;

use super::{GrayImage, SaliencyError, SaliencyMap};

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.data.len() {
            let c = self.data[self.pos];
            if c == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn read_uint(&mut self, what: &str) -> Result<u32, SaliencyError> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(SaliencyError::MalformedHeader {
                offset: start,
                message: format!("expected {what}"),
            });
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| SaliencyError::MalformedHeader {
                offset: start,
                message: format!("{what} out of range"),
            })
    }
}

/// Decode an in-memory netpbm image to grayscale in `[0, 1]`.
///
/// Colour inputs are reduced with Rec.601 luma weights.
pub fn decode_gray(data: &[u8]) -> Result<GrayImage, SaliencyError> {
    if data.len() < 2 || data[0] != b'P' {
        return Err(SaliencyError::UnsupportedFormat("missing 'P' magic".into()));
    }
    let (channels, binary) = match data[1] {
        b'2' => (1usize, false),
        b'5' => (1, true),
        b'3' => (3, false),
        b'6' => (3, true),
        other => {
            return Err(SaliencyError::UnsupportedFormat(format!(
                "netpbm variant P{}",
                other as char
            )))
        }
    };
    let mut cur = Cursor { data, pos: 2 };
    let width = cur.read_uint("width")?;
    let height = cur.read_uint("height")?;
    let maxval_offset = cur.pos;
    let maxval = cur.read_uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(SaliencyError::MalformedHeader {
            offset: 2,
            message: "zero image dimension".into(),
        });
    }
    if maxval == 0 || maxval > 255 {
        return Err(SaliencyError::UnsupportedFormat(format!(
            "maxval {maxval} (only 8-bit images, offset {maxval_offset})"
        )));
    }
    let n = width as usize * height as usize;
    let mut samples = Vec::with_capacity(n * channels);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        if cur.pos >= data.len() || !data[cur.pos].is_ascii_whitespace() {
            return Err(SaliencyError::MalformedHeader {
                offset: cur.pos,
                message: "expected whitespace before raster".into(),
            });
        }
        let start = cur.pos + 1;
        let end = start + n * channels;
        if data.len() < end {
            return Err(SaliencyError::MalformedHeader {
                offset: data.len(),
                message: format!("raster truncated: need {} bytes", n * channels),
            });
        }
        samples.extend(data[start..end].iter().map(|&b| b as u32));
    } else {
        for _ in 0..n * channels {
            samples.push(cur.read_uint("sample")?);
        }
    }
    if let Some(pos) = samples.iter().position(|&s| s > maxval) {
        return Err(SaliencyError::MalformedHeader {
            offset: cur.pos,
            message: format!("sample {pos} exceeds maxval {maxval}"),
        });
    }
    let scale = maxval as f64;
    let pixels = if channels == 1 {
        samples.iter().map(|&s| s as f64 / scale).collect()
    } else {
        samples
            .chunks_exact(3)
            .map(|rgb| {
                let luma = 0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64;
                (luma / scale).clamp(0.0, 1.0)
            })
            .collect()
    };
    GrayImage::new(width as usize, height as usize, pixels)
}

pub fn load_gray(path: &Path) -> Result<GrayImage, SaliencyError> {
    let data = std::fs::read(path)?;
    decode_gray(&data)
}

/// Encode values in `[0, 1]` as binary P5, scaling to 0–255 with half-up rounding.
pub fn encode_p5(width: usize, height: usize, values: &[f64]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(values.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8));
    out
}

pub fn write_map_p5(map: &SaliencyMap, path: &Path) -> Result<(), SaliencyError> {
    let bytes = encode_p5(map.width, map.height, &map.values);
    std::fs::File::create(path)?.write_all(&bytes)?;
    Ok(())
}

pub fn write_gray_p5(img: &GrayImage, path: &Path) -> Result<(), SaliencyError> {
    let bytes = encode_p5(img.width, img.height, &img.pixels);
    std::fs::File::create(path)?.write_all(&bytes)?;
    Ok(())
}
