mod support;

use proptest::prelude::*;
use semrel::saliency::{fft2, spectral_residual, ComplexGrid, GrayImage, SrParams};
use semrel::sim::SplitMix64;
use support::{circular_shift, dft2, direct_spectral_residual, saliency_fixtures};

#[test]
fn matches_direct_dft_pipeline() {
    let params = SrParams::default();
    for (name, img) in saliency_fixtures() {
        let ours = spectral_residual(&img, &params).unwrap();
        let oracle = direct_spectral_residual(&img.pixels, 64, params.gaussian_sigma, params.log_epsilon);
        let worst = ours
            .values
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "{name}: max abs diff {worst}");
    }
}

#[test]
fn circular_shift_equivariance() {
    let params = SrParams::default();
    for (name, img) in saliency_fixtures() {
        let base = spectral_residual(&img, &params).unwrap();
        for (dx, dy) in [(1, 0), (0, 5), (17, 33), (63, 63)] {
            let shifted = GrayImage::new(64, 64, circular_shift(&img.pixels, 64, dx, dy)).unwrap();
            let map = spectral_residual(&shifted, &params).unwrap();
            let expected = circular_shift(&base.values, 64, dx, dy);
            let worst = map
                .values
                .iter()
                .zip(&expected)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(worst < 1e-9, "{name} shift ({dx},{dy}): {worst}");
        }
    }
}

#[test]
fn constant_image_gives_zero_map() {
    for level in [0.0, 0.37, 1.0] {
        for (w, h) in [(64, 64), (50, 30)] {
            let img = GrayImage::new(w, h, vec![level; w * h]).unwrap();
            let map = spectral_residual(&img, &SrParams::default()).unwrap();
            assert_eq!((map.width, map.height), (w, h));
            assert!(map.values.iter().all(|v| *v == 0.0));
        }
    }
}

#[test]
fn impulse_is_the_peak() {
    let (_, img) = saliency_fixtures().remove(0);
    let map = spectral_residual(&img, &SrParams::default()).unwrap();
    assert_eq!(map.argmax(), (40, 21));
}

#[test]
fn fft_matches_direct_dft() {
    let mut rng = SplitMix64::seed_from_u64(77);
    for (w, h) in [(8, 8), (16, 4), (32, 64)] {
        let data: Vec<(f64, f64)> = (0..w * h).map(|_| (rng.normal(), rng.normal())).collect();
        let grid = ComplexGrid {
            width: w,
            height: h,
            data: data
                .iter()
                .map(|&(re, im)| rustfft::num_complex::Complex64::new(re, im))
                .collect(),
        };
        let ours = fft2(&grid, false).unwrap();
        let direct = dft2(&data, w, h, false);
        for (a, b) in ours.data.iter().zip(&direct) {
            assert!((a.re - b.0).abs() < 1e-9 && (a.im - b.1).abs() < 1e-9);
        }
    }
}

fn relative_roundtrip_error(w: usize, h: usize, seed: u64) -> f64 {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let grid = ComplexGrid {
        width: w,
        height: h,
        data: (0..w * h)
            .map(|_| rustfft::num_complex::Complex64::new(rng.normal(), rng.normal()))
            .collect(),
    };
    let back = fft2(&fft2(&grid, false).unwrap(), true).unwrap();
    let norm = grid.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let diff = grid
        .data
        .iter()
        .zip(&back.data)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    diff / norm
}

proptest! {
    #[test]
    fn fft_roundtrip(wexp in 3u32..7, hexp in 3u32..7, seed in any::<u64>()) {
        let err = relative_roundtrip_error(1 << wexp, 1 << hexp, seed);
        prop_assert!(err < 1e-9, "relative error {}", err);
    }
}
