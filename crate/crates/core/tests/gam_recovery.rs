mod support;

use nalgebra::DMatrix;
use proptest::prelude::*;
use semrel::gam::{
    bspline_basis, default_lambda_grid, fit_model, fit_penalized, gaussian_aic, select_lambdas, DesignBlock, Frame,
    ModelSpec, PenalizedProblem, SmoothTermSpec, TermKind, PARTIAL_EFFECT_POINTS,
};
use support::{noise_sample, rmse, sin_sample};

fn frame(x: &[f64], z: &[f64]) -> Frame {
    Frame::new(x.len())
        .with_numeric("y", z.iter().map(|v| v.exp()).collect())
        .unwrap()
        .with_numeric("x", x.to_vec())
        .unwrap()
}

#[test]
fn recovers_sine() {
    let (x, z) = sin_sample(17, 500, 0.1);
    let data = frame(&x, &z);
    let smooth = fit_model(&ModelSpec::new("y").smooth("x"), &data).unwrap();
    let flat = fit_model(&ModelSpec::new("y"), &data).unwrap();
    let truth: Vec<f64> = x.iter().map(|v| v.sin()).collect();
    let err = rmse(&smooth.fit.fitted, &truth);
    assert!(err < 0.05, "rmse {err}");
    assert!(
        smooth.fit.aic < flat.fit.aic - 100.0,
        "{} vs {}",
        smooth.fit.aic,
        flat.fit.aic
    );
    let f = &smooth.fit;
    assert!((f.aic - gaussian_aic(f.n_used, f.rss, f.edf_total)).abs() < 1e-9);
    let n = f.n_used as f64;
    assert!((f.aic - (n * (f.rss / n).ln() + 2.0 * (f.edf_total + 1.0))).abs() < 1e-9);
}

#[test]
fn sine_lambda_is_interior_and_noise_lambda_is_maximal() {
    let grid = default_lambda_grid();
    let (x, z) = sin_sample(5, 500, 0.1);
    let fit = fit_model(&ModelSpec::new("y").smooth("x"), &frame(&x, &z)).unwrap();
    let lambda = fit.fit.lambdas[0].lambda;
    assert!(lambda > grid[0] && lambda < grid[grid.len() - 1], "lambda {lambda}");

    let (x, z) = noise_sample(9, 500);
    let fit = fit_model(&ModelSpec::new("y").smooth("x"), &frame(&x, &z)).unwrap();
    let lambda = fit.fit.lambdas[0].lambda;
    assert!(lambda >= grid[grid.len() - 2], "noise lambda {lambda}");
}

#[test]
fn affine_transform_of_covariate_changes_nothing() {
    let (x, z) = sin_sample(23, 300, 0.2);
    let base = fit_model(&ModelSpec::new("y").smooth("x"), &frame(&x, &z)).unwrap();
    for (a, b) in [(2.5, -7.0), (0.01, 100.0), (1000.0, 3.0)] {
        let moved: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let fit = fit_model(&ModelSpec::new("y").smooth("x"), &frame(&moved, &z)).unwrap();
        assert!((fit.fit.aic - base.fit.aic).abs() < 1e-8);
        assert!((fit.fit.edf_total - base.fit.edf_total).abs() < 1e-8);
        for (p, q) in fit.fit.fitted.iter().zip(&base.fit.fitted) {
            assert!((p - q).abs() < 1e-8);
        }
    }
}

#[test]
fn adding_a_block_never_increases_rss() {
    let (x, z) = sin_sample(31, 200, 0.3);
    let (w, _) = noise_sample(32, 200);
    let bx = bspline_basis(&x, &SmoothTermSpec::new("x")).unwrap();
    let bw = bspline_basis(&w, &SmoothTermSpec::new("w")).unwrap();
    let smooth = |name: &str, b: &semrel::gam::BSplineBasis, v: &[f64]| DesignBlock {
        name: name.into(),
        kind: TermKind::Smooth,
        columns: b.design(v),
        penalty: Some(b.penalty()),
    };
    for lambda in [1e-3, 1.0, 1e3] {
        let small = fit_penalized(&[DesignBlock::intercept(200), smooth("x", &bx, &x)], &z, &[lambda]).unwrap();
        let big = fit_penalized(
            &[DesignBlock::intercept(200), smooth("x", &bx, &x), smooth("w", &bw, &w)],
            &z,
            &[lambda, 1.0],
        )
        .unwrap();
        assert!(big.rss <= small.rss + 1e-9, "{} > {}", big.rss, small.rss);
    }
}

#[test]
fn huge_lambda_leaves_a_linear_smooth() {
    // the second-difference penalty does not touch straight lines, so the
    // smooth shrinks to its linear part (one edf) rather than to nothing
    let (x, z) = sin_sample(41, 300, 0.1);
    let b = bspline_basis(&x, &SmoothTermSpec::new("x")).unwrap();
    let blocks = [
        DesignBlock::intercept(300),
        DesignBlock {
            name: "s(x)".into(),
            kind: TermKind::Smooth,
            columns: b.design(&x),
            penalty: Some(b.penalty()),
        },
    ];
    let fit = fit_penalized(&blocks, &z, &[1e12]).unwrap();
    assert!((fit.term_edf("s(x)").unwrap() - 1.0).abs() < 1e-4);
}

#[test]
fn partial_effects_are_centered() {
    let (x, z) = sin_sample(3, 400, 0.1);
    let fit = fit_model(&ModelSpec::new("y").smooth("x"), &frame(&x, &z)).unwrap();
    let coefs = fit.fit.block_coefficients("s(x)").unwrap();
    let at_data = fit.smooths[0].basis.evaluate(&x, coefs);
    let mean = at_data.iter().sum::<f64>() / at_data.len() as f64;
    assert!(mean.abs() < 1e-8, "mean {mean}");
    let curve = fit.partial_effect("s(x)", PARTIAL_EFFECT_POINTS).unwrap();
    assert_eq!(curve.len(), PARTIAL_EFFECT_POINTS);
    // the sampled curve follows sin(x) minus its data mean
    let offset = x.iter().map(|v| v.sin()).sum::<f64>() / x.len() as f64;
    let err = rmse(
        &curve.iter().map(|p| p.1).collect::<Vec<_>>(),
        &curve.iter().map(|p| p.0.sin() - offset).collect::<Vec<_>>(),
    );
    assert!(err < 0.1, "curve rmse {err}");
}

#[test]
fn coordinate_descent_with_one_block_is_grid_search() {
    let (x, z) = sin_sample(8, 250, 0.4);
    let b = bspline_basis(&x, &SmoothTermSpec::new("x")).unwrap();
    let blocks = [
        DesignBlock::intercept(250),
        DesignBlock {
            name: "s(x)".into(),
            kind: TermKind::Smooth,
            columns: b.design(&x),
            penalty: Some(b.penalty()),
        },
    ];
    let problem = PenalizedProblem::new(&blocks, &z).unwrap();
    let grid = default_lambda_grid();
    let chosen = select_lambdas(&problem, std::slice::from_ref(&grid)).unwrap();
    let best = grid
        .iter()
        .map(|&l| (l, problem.gcv(&[l]).unwrap()))
        .fold(
            (f64::NAN, f64::INFINITY),
            |acc, (l, g)| if g < acc.1 { (l, g) } else { acc },
        );
    assert_eq!(chosen.lambdas[0], best.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn edf_is_bounded(seed in 0u64..10_000, lambda_exp in -4i32..5, ridge in 0.0f64..50.0) {
        let (x, z) = sin_sample(seed, 60, 0.5);
        let b = bspline_basis(&x, &SmoothTermSpec::new("x")).unwrap();
        let groups = DMatrix::from_fn(60, 3, |i, j| if i % 3 == j { 1.0 } else { 0.0 });
        let blocks = [
            DesignBlock::intercept(60),
            DesignBlock { name: "s(x)".into(), kind: TermKind::Smooth, columns: b.design(&x), penalty: Some(b.penalty()) },
            DesignBlock::ridge("re(g)", groups),
        ];
        let p = 1 + b.size() + 3;
        let fit = fit_penalized(&blocks, &z, &[10f64.powi(lambda_exp), ridge]).unwrap();
        prop_assert!(fit.edf_total >= 1.0 - 1e-9 && fit.edf_total <= p as f64 + 1e-9);
        prop_assert!((fit.aic - gaussian_aic(fit.n_used, fit.rss, fit.edf_total)).abs() < 1e-9);
    }
}
