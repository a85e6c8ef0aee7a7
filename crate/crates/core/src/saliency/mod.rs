//! Spectral-residual saliency.
//!
//! The image is resampled to a square power-of-two working grid, its log
//! amplitude spectrum is compared against a Gaussian-smoothed copy, and the
//! residual is recombined with the original phase. The squared magnitude of
//! the inverse transform, min–max normalized, is the saliency map.

mod fft;
mod pnm;

use std::io::Write;
use std::path::Path;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fmt::format_real;
use crate::geometry::BBox;

pub use fft::{fft2, ComplexGrid};
pub use pnm::{decode_gray, encode_p5, load_gray, write_gray_p5, write_map_p5};

#[derive(Debug, Error)]
pub enum SaliencyError {
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed header at byte {offset}: {message}")]
    MalformedHeader { offset: usize, message: String },
    #[error("grid {0}x{1} is not a power of two in both dimensions")]
    NonPowerOfTwo(usize, usize),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, SaliencyError> {
        if width == 0 || height == 0 {
            return Err(SaliencyError::InvalidImage("zero dimension".into()));
        }
        if pixels.len() != width * height {
            return Err(SaliencyError::InvalidImage(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|p| !p.is_finite() || !(0.0..=1.0).contains(p)) {
            return Err(SaliencyError::InvalidImage(format!("pixel {i} outside [0, 1]")));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl SaliencyMap {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrParams {
    pub work_size: usize,
    pub gaussian_sigma: f64,
    pub log_epsilon: f64,
}

impl Default for SrParams {
    fn default() -> Self {
        Self {
            work_size: 64,
            gaussian_sigma: 2.0,
            log_epsilon: 1e-8,
        }
    }
}

impl SrParams {
    pub fn kernel_radius(&self) -> usize {
        (3.0 * self.gaussian_sigma).ceil() as usize
    }

    pub fn validate(&self) -> Result<(), SaliencyError> {
        if ![32, 64, 128, 256].contains(&self.work_size) {
            return Err(SaliencyError::InvalidParams(format!(
                "work size {} not in {{32, 64, 128, 256}}",
                self.work_size
            )));
        }
        if !(self.gaussian_sigma.is_finite() && self.gaussian_sigma > 0.0) {
            return Err(SaliencyError::InvalidParams("sigma must be positive".into()));
        }
        if !(self.log_epsilon.is_finite() && self.log_epsilon > 0.0) {
            return Err(SaliencyError::InvalidParams("log epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Bilinear resampling with pixel-center alignment and edge clamping.
pub fn resize_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> GrayImage {
    assert!(out_w >= 1 && out_h >= 1, "output size must be positive");
    if out_w == img.width && out_h == img.height {
        return img.clone();
    }
    let sample_axis = |i: usize, out: usize, inp: usize| -> (usize, usize, f64) {
        let src = ((i as f64 + 0.5) * inp as f64 / out as f64 - 0.5).clamp(0.0, (inp - 1) as f64);
        let lo = src.floor() as usize;
        let hi = (lo + 1).min(inp - 1);
        (lo, hi, src - lo as f64)
    };
    let cols: Vec<_> = (0..out_w).map(|x| sample_axis(x, out_w, img.width)).collect();
    let mut pixels = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let (y0, y1, fy) = sample_axis(y, out_h, img.height);
        for &(x0, x1, fx) in &cols {
            let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
            let bottom = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
            pixels.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    GrayImage {
        width: out_w,
        height: out_h,
        pixels,
    }
}

fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let raw: Vec<f64> = (-r..=r)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Separable Gaussian blur with replicate-edge padding.
fn gaussian_blur(values: &[f64], width: usize, height: usize, sigma: f64, radius: usize) -> Vec<f64> {
    let kernel = gaussian_kernel(sigma, radius);
    let r = radius as isize;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;

    let mut horizontal = vec![0.0; values.len()];
    for y in 0..height {
        let row = &values[y * width..(y + 1) * width];
        for x in 0..width {
            horizontal[y * width + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * row[clamp(x as isize + k as isize - r, width)])
                .sum();
        }
    }
    let mut out = vec![0.0; values.len()];
    for y in 0..height {
        for x in 0..width {
            out[y * width + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * horizontal[clamp(y as isize + k as isize - r, height) * width + x])
                .sum();
        }
    }
    out
}

/// Min–max normalize into `[0, 1]`; a flat input (range below 1e-12) maps to zeros.
fn normalize(values: &mut [f64]) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if range.is_nan() || range < 1e-12 {
        values.iter_mut().for_each(|v| *v = 0.0);
    } else {
        values
            .iter_mut()
            .for_each(|v| *v = ((*v - min) / range).clamp(0.0, 1.0));
    }
}

/// Saliency map on the square working grid, before resampling back.
pub fn spectral_residual_work(img: &GrayImage, params: &SrParams) -> Result<SaliencyMap, SaliencyError> {
    params.validate()?;
    let n = params.work_size;
    let work = resize_bilinear(img, n, n);

    let lo = work.pixels.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = work.pixels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-12 {
        // a flat image has an empty non-DC spectrum and no residual structure
        return Ok(SaliencyMap {
            width: n,
            height: n,
            values: vec![0.0; n * n],
        });
    }

    let spectrum = fft2(&ComplexGrid::from_real(n, n, &work.pixels), false)?;
    let log_amp: Vec<f64> = spectrum
        .data
        .iter()
        .map(|c| (c.norm() + params.log_epsilon).ln())
        .collect();
    let smoothed = gaussian_blur(&log_amp, n, n, params.gaussian_sigma, params.kernel_radius());
    let recombined = ComplexGrid {
        width: n,
        height: n,
        data: spectrum
            .data
            .iter()
            .zip(log_amp.iter().zip(&smoothed))
            .map(|(c, (l, ls))| Complex64::from_polar((l - ls).exp(), c.arg()))
            .collect(),
    };
    let back = fft2(&recombined, true)?;
    let mut values: Vec<f64> = back.data.iter().map(|c| c.norm_sqr()).collect();
    normalize(&mut values);
    Ok(SaliencyMap {
        width: n,
        height: n,
        values,
    })
}

pub fn spectral_residual(img: &GrayImage, params: &SrParams) -> Result<SaliencyMap, SaliencyError> {
    let work = spectral_residual_work(img, params)?;
    if work.width == img.width && work.height == img.height {
        return Ok(work);
    }
    let as_image = GrayImage {
        width: work.width,
        height: work.height,
        pixels: work.values,
    };
    let resized = resize_bilinear(&as_image, img.width, img.height);
    Ok(SaliencyMap {
        width: resized.width,
        height: resized.height,
        values: resized.pixels,
    })
}

/// How map values inside a box are reduced to a single score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SaliencyReduce {
    #[default]
    Mean,
    Max,
    Sum,
}

/// Reduce the map over pixels whose centers fall inside `b` (half-open).
/// Returns `None` when no pixel center is covered.
pub fn object_saliency(map: &SaliencyMap, b: &BBox, reduce: SaliencyReduce) -> Option<f64> {
    let span = |start: f64, len: f64, limit: usize| -> (usize, usize) {
        let lo = (start - 0.5).ceil().max(0.0) as usize;
        let hi = ((start + len - 0.5).ceil().max(0.0) as usize).min(limit);
        (lo, hi)
    };
    let (x0, x1) = span(b.x, b.w, map.width);
    let (y0, y1) = span(b.y, b.h, map.height);
    if x0 >= x1 || y0 >= y1 {
        return None;
    }
    let values = (y0..y1).flat_map(|y| (x0..x1).map(move |x| (x, y)));
    let count = ((x1 - x0) * (y1 - y0)) as f64;
    Some(match reduce {
        SaliencyReduce::Mean => values.map(|(x, y)| map.get(x, y)).sum::<f64>() / count,
        SaliencyReduce::Sum => values.map(|(x, y)| map.get(x, y)).sum(),
        SaliencyReduce::Max => values.map(|(x, y)| map.get(x, y)).fold(f64::MIN, f64::max),
    })
}

/// Row-major CSV text, one image row per line, full precision.
pub fn render_map_csv(map: &SaliencyMap) -> String {
    let mut out = String::new();
    for row in map.values.chunks_exact(map.width) {
        let line: Vec<String> = row.iter().map(|v| format_real(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_map_csv(map: &SaliencyMap, path: &Path) -> Result<(), SaliencyError> {
    std::fs::File::create(path)?.write_all(render_map_csv(map).as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> GrayImage {
        let pixels = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        GrayImage::new(w, h, pixels).unwrap()
    }

    #[test]
    fn resize_constant_and_identity() {
        let c = img(5, 3, |_, _| 0.25);
        let r = resize_bilinear(&c, 11, 7);
        assert!(r.pixels.iter().all(|&p| (p - 0.25).abs() < 1e-15));
        let g = img(4, 4, |x, y| (x + 4 * y) as f64 / 15.0);
        assert_eq!(resize_bilinear(&g, 4, 4), g);
    }

    #[test]
    fn resize_monotone_row() {
        let row = img(2, 1, |x, _| x as f64);
        let r = resize_bilinear(&row, 4, 1);
        assert!(r.pixels.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(r.pixels, vec![0.0, 0.25, 0.75, 1.0]);
    }

    #[test]
    fn constant_image_gives_zero_map() {
        let m = spectral_residual(&img(40, 30, |_, _| 0.7), &SrParams::default()).unwrap();
        assert_eq!((m.width, m.height), (40, 30));
        assert!(m.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_is_most_salient() {
        let m = spectral_residual(
            &img(64, 64, |x, y| if (x, y) == (32, 32) { 1.0 } else { 0.0 }),
            &SrParams::default(),
        )
        .unwrap();
        let (x, y) = m.argmax();
        assert!(x.abs_diff(32) <= 1 && y.abs_diff(32) <= 1);
    }

    #[test]
    fn map_is_normalized_and_sized() {
        let m = spectral_residual(
            &img(50, 37, |x, y| ((x * 13 + y * 7) % 17) as f64 / 16.0),
            &SrParams::default(),
        )
        .unwrap();
        assert_eq!((m.width, m.height), (50, 37));
        assert!(m.values.iter().all(|v| (0.0..=1.0).contains(v)));
        let work = spectral_residual_work(
            &img(64, 64, |x, y| ((x * 13 + y * 7) % 17) as f64 / 16.0),
            &SrParams::default(),
        )
        .unwrap();
        let max = work.values.iter().copied().fold(0.0, f64::max);
        let min = work.values.iter().copied().fold(1.0, f64::min);
        assert_eq!((min, max), (0.0, 1.0));
    }

    #[test]
    fn rejects_bad_work_size() {
        let p = SrParams {
            work_size: 48,
            ..SrParams::default()
        };
        assert!(matches!(
            spectral_residual(&img(8, 8, |_, _| 0.0), &p),
            Err(SaliencyError::InvalidParams(_))
        ));
    }

    #[test]
    fn kernel_radius_is_three_sigma() {
        assert_eq!(SrParams::default().kernel_radius(), 6);
        let p = SrParams {
            gaussian_sigma: 1.1,
            ..SrParams::default()
        };
        assert_eq!(p.kernel_radius(), 4);
    }

    #[test]
    fn object_saliency_reductions() {
        let uniform = SaliencyMap {
            width: 4,
            height: 4,
            values: vec![0.5; 16],
        };
        assert_eq!(
            object_saliency(&uniform, &BBox::new(1.0, 1.0, 2.0, 2.0), SaliencyReduce::Mean),
            Some(0.5)
        );
        let ramp = SaliencyMap {
            width: 3,
            height: 2,
            values: vec![0.0, 0.5, 1.0, 0.2, 0.2, 0.2],
        };
        assert_eq!(
            object_saliency(&ramp, &BBox::new(0.0, 0.0, 3.0, 1.0), SaliencyReduce::Mean),
            Some(0.5)
        );
        let whole = object_saliency(&ramp, &BBox::new(0.0, 0.0, 3.0, 2.0), SaliencyReduce::Mean).unwrap();
        assert!((whole - 2.1 / 6.0).abs() < 1e-15);
        assert_eq!(
            object_saliency(&ramp, &BBox::new(0.0, 0.0, 3.0, 1.0), SaliencyReduce::Max),
            Some(1.0)
        );
        assert_eq!(
            object_saliency(&ramp, &BBox::new(0.0, 0.0, 3.0, 1.0), SaliencyReduce::Sum),
            Some(1.5)
        );
        // a sliver that covers no pixel center
        assert_eq!(
            object_saliency(&ramp, &BBox::new(0.6, 0.0, 0.3, 1.0), SaliencyReduce::Mean),
            None
        );
    }
}
