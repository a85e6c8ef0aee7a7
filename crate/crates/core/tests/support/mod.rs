//! Independent oracles and fixture generators shared by the integration and
//! acceptance tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use semrel::saliency::GrayImage;
use semrel::sim::SplitMix64;

use serde_json::{json, Value};

/// Fixture directory, whether this module is compiled into the core crate's
/// tests or included by path from another crate.
pub fn fixture_dir() -> std::path::PathBuf {
    let here = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let own = here.join("tests/fixtures");
    if own.is_dir() {
        own
    } else {
        here.join("../core/tests/fixtures")
    }
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    fixture_dir().join(name)
}

pub fn kitchen_doc() -> Value {
    serde_json::from_str(&std::fs::read_to_string(fixture("kitchen_01.json")).unwrap()).unwrap()
}

// ---------------------------------------------------------------- validation

/// bbox kind, embedding kind, blank name, unknown field, bad text embedding,
/// duplicate id
pub type ObjectDefects = (Option<u8>, Option<u8>, bool, bool, bool, bool);

#[derive(Debug, Clone)]
pub struct Defects {
    pub caption: bool,
    pub image_id: bool,
    pub image_embedding: bool,
    pub unknown_top: bool,
    pub sentence_dim: bool,
    pub image_path: bool,
    /// Per object: bbox defect kind, embedding defect kind, blank name,
    /// unknown field, non-numeric text embedding, duplicate id.
    pub objects: Vec<ObjectDefects>,
}

impl Defects {
    pub fn count(&self) -> usize {
        let top = [
            self.caption,
            self.image_id,
            self.image_embedding,
            self.unknown_top,
            self.sentence_dim,
            self.image_path,
        ];
        top.iter().filter(|b| **b).count()
            + self
                .objects
                .iter()
                .map(|o| {
                    usize::from(o.0.is_some())
                        + usize::from(o.1.is_some())
                        + [o.2, o.3, o.4, o.5].iter().filter(|b| **b).count()
                })
                .sum::<usize>()
    }

    pub fn apply(&self, doc: &mut Value) {
        if self.caption {
            doc.as_object_mut().unwrap().remove("caption");
        }
        if self.image_id {
            doc["image_id"] = json!("has space");
        }
        if self.image_embedding {
            doc["image_embedding"] = json!([1.0, 2.0, 3.0]);
        }
        if self.unknown_top {
            doc["detector"] = json!("unknown");
        }
        if self.sentence_dim {
            doc["caption_sentence_embeddings"][1] = json!([0.1, 0.2, 0.3]);
        }
        if self.image_path {
            doc["image_path"] = json!(5);
        }
        for (i, o) in self.objects.iter().enumerate() {
            let obj = &mut doc["objects"][i];
            match o.0 {
                Some(0) => obj["bbox"]["w"] = json!(-1.0),
                Some(1) => obj["bbox"]["x"] = json!(5000.0),
                Some(_) => obj["bbox"]["w"] = json!(500.0),
                None => {}
            }
            match o.1 {
                Some(0) => obj["embedding"] = json!([0.5]),
                Some(_) => obj["embedding"] = json!([0.0, 0.0, 0.0, 0.0]),
                None => {}
            }
            if o.2 {
                obj["name"] = json!("   ");
            }
            if o.3 {
                obj["score"] = json!(0.93);
            }
            if o.4 {
                obj["name_text_embedding"][0] = json!("x");
            }
            if o.5 && i > 0 {
                obj["object_id"] = json!("obj_0");
            }
        }
    }
}

impl Defects {
    /// Each slot set with probability one half.
    pub fn random(rng: &mut SplitMix64) -> Self {
        let mut flip = || rng.next_u64() & 1 == 1;
        let top = [flip(), flip(), flip(), flip(), flip(), flip()];
        let objects = (0..3)
            .map(|i| {
                let bbox = (rng.next_u64() % 4).checked_sub(1).map(|k| k as u8);
                let emb = (rng.next_u64() % 3).checked_sub(1).map(|k| k as u8);
                let mut flip = || rng.next_u64() & 1 == 1;
                (bbox, emb, flip(), flip(), flip(), i > 0 && flip())
            })
            .collect();
        Self {
            caption: top[0],
            image_id: top[1],
            image_embedding: top[2],
            unknown_top: top[3],
            sentence_dim: top[4],
            image_path: top[5],
            objects,
        }
    }
}

// ---------------------------------------------------------------- saliency

/// Ten 64×64 test images. Each carries a faint random texture so that no
/// spectral bin is exactly zero; zero bins have no defined phase and any two
/// FFT implementations may disagree on them.
type Shape = fn(f64, f64) -> f64;

pub fn saliency_fixtures() -> Vec<(&'static str, GrayImage)> {
    let n = 64;
    let mut rng = SplitMix64::seed_from_u64(2024);
    let shapes: [(&str, Shape); 10] = [
        ("impulse", |x, y| if x == 40.0 && y == 21.0 { 1.0 } else { 0.2 }),
        ("rectangle", |x, y| {
            if (10.0..30.0).contains(&x) && (35.0..50.0).contains(&y) {
                0.9
            } else {
                0.1
            }
        }),
        ("disc", |x, y| {
            if (x - 32.0).powi(2) + (y - 32.0).powi(2) < 100.0 {
                0.8
            } else {
                0.3
            }
        }),
        ("gradient", |x, y| 0.1 + 0.6 * x / 63.0 + 0.2 * y / 63.0),
        ("grating", |x, _| 0.5 + 0.4 * (2.0 * PI * x / 8.0).sin()),
        ("two-blobs", |x, y| {
            0.1 + 0.8 * (-((x - 15.0).powi(2) + (y - 15.0).powi(2)) / 20.0).exp()
                + 0.5 * (-((x - 45.0).powi(2) + (y - 40.0).powi(2)) / 40.0).exp()
        }),
        ("checker-odd", |x, y| {
            let c = ((x / 8.0).floor() + (y / 8.0).floor()) as i64 % 2;
            if x > 50.0 && y > 50.0 {
                0.5
            } else if c == 0 {
                0.2
            } else {
                0.7
            }
        }),
        ("noise", |_, _| 0.5),
        ("bars", |x, y| {
            if (y as i64 % 10) < 3 && x > 5.0 && x < 58.0 {
                0.85
            } else {
                0.25
            }
        }),
        ("ring", |x, y| {
            let r = ((x - 30.0).powi(2) + (y - 34.0).powi(2)).sqrt();
            if (12.0..16.0).contains(&r) {
                0.9
            } else {
                0.2
            }
        }),
    ];
    shapes
        .iter()
        .map(|(name, f)| {
            let texture = if *name == "noise" { 0.45 } else { 0.05 };
            let pixels = (0..n * n)
                .map(|i| {
                    let base = f((i % n) as f64, (i / n) as f64);
                    (base + texture * (rng.next_f64() - 0.5)).clamp(0.0, 1.0)
                })
                .collect();
            (*name, GrayImage::new(n, n, pixels).unwrap())
        })
        .collect()
}

type C = (f64, f64);

fn cmul(a: C, b: C) -> C {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

/// Textbook O(n²) DFT along one line, with 1/n scaling on the inverse.
fn dft_line(input: &[C], inverse: bool) -> Vec<C> {
    let n = input.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    (0..n)
        .map(|k| {
            let mut acc = (0.0, 0.0);
            for (t, &v) in input.iter().enumerate() {
                let angle = sign * 2.0 * PI * ((k * t) % n) as f64 / n as f64;
                let w = cmul(v, (angle.cos(), angle.sin()));
                acc = (acc.0 + w.0, acc.1 + w.1);
            }
            if inverse {
                (acc.0 / n as f64, acc.1 / n as f64)
            } else {
                acc
            }
        })
        .collect()
}

/// Direct 2-D DFT of a row-major grid.
pub fn dft2(data: &[C], w: usize, h: usize, inverse: bool) -> Vec<C> {
    let mut rows = vec![(0.0, 0.0); w * h];
    for y in 0..h {
        let line = dft_line(&data[y * w..(y + 1) * w], inverse);
        rows[y * w..(y + 1) * w].copy_from_slice(&line);
    }
    let mut out = vec![(0.0, 0.0); w * h];
    for x in 0..w {
        let col: Vec<C> = (0..h).map(|y| rows[y * w + x]).collect();
        for (y, v) in dft_line(&col, inverse).into_iter().enumerate() {
            out[y * w + x] = v;
        }
    }
    out
}

/// Spectral residual on a square power-of-two image, computed with the
/// direct DFT and a direct 2-D Gaussian convolution (replicate edges).
pub fn direct_spectral_residual(pixels: &[f64], n: usize, sigma: f64, eps: f64) -> Vec<f64> {
    let spectrum = dft2(&pixels.iter().map(|&p| (p, 0.0)).collect::<Vec<_>>(), n, n, false);
    let amp: Vec<f64> = spectrum.iter().map(|c| (c.0 * c.0 + c.1 * c.1).sqrt()).collect();
    let log_amp: Vec<f64> = amp.iter().map(|a| (a + eps).ln()).collect();
    let radius = (3.0 * sigma).ceil() as i64;
    let weight = |d: i64| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp();
    let norm: f64 = (-radius..=radius).map(weight).sum();
    let at = |x: i64, y: i64| {
        let cx = x.clamp(0, n as i64 - 1) as usize;
        let cy = y.clamp(0, n as i64 - 1) as usize;
        log_amp[cy * n + cx]
    };
    let mut residual_spec = vec![(0.0, 0.0); n * n];
    for y in 0..n as i64 {
        for x in 0..n as i64 {
            let mut s = 0.0;
            for dy in -radius..=radius {
                for dx in -radius..=radius {
                    s += weight(dx) * weight(dy) * at(x + dx, y + dy);
                }
            }
            let smoothed = s / (norm * norm);
            let i = (y as usize) * n + x as usize;
            let r = (log_amp[i] - smoothed).exp();
            let (re, im) = spectrum[i];
            let mag = amp[i];
            let unit = if mag > 0.0 { (re / mag, im / mag) } else { (1.0, 0.0) };
            residual_spec[i] = (r * unit.0, r * unit.1);
        }
    }
    let back = dft2(&residual_spec, n, n, true);
    let energy: Vec<f64> = back.iter().map(|c| c.0 * c.0 + c.1 * c.1).collect();
    let lo = energy.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = energy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    energy
        .iter()
        .map(|e| if hi - lo < 1e-12 { 0.0 } else { (e - lo) / (hi - lo) })
        .collect()
}

pub fn circular_shift(pixels: &[f64], n: usize, dx: usize, dy: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for y in 0..n {
        for x in 0..n {
            out[((y + dy) % n) * n + (x + dx) % n] = pixels[y * n + x];
        }
    }
    out
}

// ---------------------------------------------------------------- smooths

/// `z = sin(x) + N(0, sigma²)` with `x ~ U(0, 2π)`, from a SplitMix64 stream.
pub fn sin_sample(seed: u64, n: usize, sigma: f64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let x: Vec<f64> = (0..n).map(|_| rng.uniform(0.0, 2.0 * PI)).collect();
    let z = x.iter().map(|v| v.sin() + sigma * rng.normal()).collect();
    (x, z)
}

pub fn noise_sample(seed: u64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let x: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
    let z = (0..n).map(|_| rng.normal()).collect();
    (x, z)
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}
