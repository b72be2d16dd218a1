//! Shared fixtures for the integration suites.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use ndarray_linalg::c64;

use spectrace::systems::{
    build_from_jordan, difference_transform, observe, simulate_discrete, AffineSystem,
    JordanSpec, ObservedSeries,
};

pub fn cx(re: f64) -> c64 {
    c64::new(re, 0.0)
}

pub fn rvec(v: &[f64]) -> Array1<c64> {
    v.iter().map(|&x| cx(x)).collect()
}

/// The 8-dimensional defective fixture used across the suite: eigenvalues 0.3
/// (one 3-block), 0.5 (one 2-block), 0.6 and -0.2 (simple and double simple),
/// conjugated by a block-diagonal similarity matrix.
pub fn jordan8_spec() -> JordanSpec {
    let mut u = Array2::<c64>::eye(8);
    for i in 3..6 {
        for j in i..6 {
            u[[i, j]] = cx(1.0);
        }
    }
    u[[6, 6]] = cx(1.0);
    u[[6, 7]] = cx(2.0);
    u[[7, 6]] = cx(2.0);
    u[[7, 7]] = cx(1.0);
    JordanSpec::new(
        vec![cx(0.3), cx(0.5), cx(0.6), cx(-0.2)],
        vec![vec![3], vec![2], vec![1], vec![1, 1]],
        u,
    )
    .unwrap()
}

pub fn jordan8_system() -> AffineSystem {
    let spec = jordan8_spec();
    let b = rvec(&[8.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0]);
    let c = rvec(&[1.0; 8]);
    build_from_jordan(&spec, b, c).unwrap()
}

/// Differenced trajectory of the affine fixture restricted to `omega`, with
/// `m` differenced samples.
pub fn jordan8_series(omega: &[usize], m: usize) -> ObservedSeries {
    let sys = jordan8_system();
    let traj = simulate_discrete(&sys, m + 1).unwrap();
    difference_transform(&observe(&traj, omega).unwrap()).unwrap()
}

/// Jordan specification of a symmetric circulant (ring transition) operator:
/// symbol values grouped by the frequency symmetry m <-> d-m, with the
/// matching DFT columns as similarity.
pub fn circulant_dft_spec(d: usize, k: usize) -> JordanSpec {
    use std::f64::consts::PI;
    assert!(k % 2 == 0 && k >= 2 && k < d);
    let sym = |m: usize| -> f64 {
        (1..=k / 2)
            .map(|j| 2.0 * (2.0 * PI * j as f64 * m as f64 / d as f64).cos())
            .sum::<f64>()
            / k as f64
    };
    let mut u = Array2::<c64>::zeros((d, d));
    let mut col = 0usize;
    let mut eigenvalues = Vec::new();
    let mut blocks = Vec::new();
    for m in 0..=d / 2 {
        let mut freqs = vec![m];
        if m != 0 && 2 * m != d {
            freqs.push(d - m);
        }
        eigenvalues.push(cx(sym(m)));
        blocks.push(vec![1; freqs.len()]);
        for &f in &freqs {
            for j in 0..d {
                let th = 2.0 * PI * j as f64 * f as f64 / d as f64;
                u[[j, col]] = c64::new(th.cos(), th.sin()) / (d as f64).sqrt();
            }
            col += 1;
        }
    }
    JordanSpec::new(eigenvalues, blocks, u).unwrap()
}

/// Symmetric Hausdorff distance between two finite point sets.
pub fn hausdorff(a: &[c64], b: &[c64]) -> f64 {
    let one_way = |xs: &[c64], ys: &[c64]| {
        xs.iter()
            .map(|x| ys.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0f64, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

/// Distance from `z` to the closest element of `set`.
pub fn min_dist(set: &[c64], z: c64) -> f64 {
    set.iter().map(|x| (x - z).norm()).fold(f64::INFINITY, f64::min)
}
