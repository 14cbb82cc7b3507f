//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use isac_core::ofdm::Constellation;
use isac_core::Complex64;
use nalgebra::{DMatrix, SymmetricEigen};

/// Gauss–Hermite nodes and weights for `∫ f(t) e^{-t²} dt` (Golub–Welsch).
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut out: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Mutual information of a uniform input over `c` on `y = x + z`,
/// `z ~ CN(0, σ²)`, by product-rule Gauss–Hermite quadrature over `z`.
pub fn mi_quadrature(c: &Constellation, sigma2: f64, nodes: usize) -> f64 {
    let gh = gauss_hermite(nodes);
    let sigma = sigma2.sqrt();
    let points = c.points();
    let q = points.len() as f64;
    let mut expectation = 0.0;
    for &x in points {
        for &(t1, w1) in &gh {
            for &(t2, w2) in &gh {
                let z = Complex64::new(sigma * t1, sigma * t2);
                let z2 = z.norm_sqr();
                let exps: Vec<f64> = points.iter().map(|&xp| (z2 - (x - xp + z).norm_sqr()) / sigma2).collect();
                let max = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + exps.iter().map(|e| (e - max).exp()).sum::<f64>().ln();
                expectation += w1 * w2 / std::f64::consts::PI * lse / std::f64::consts::LN_2;
            }
        }
    }
    q.log2() - expectation / q
}

/// First RCS at which `pd` reaches `level`, linearly interpolated between
/// grid points. `None` if it never does.
pub fn crossing(grid: &[f64], pd: &[f64], level: f64) -> Option<f64> {
    if pd.first().is_some_and(|&p| p >= level) {
        return Some(grid[0]);
    }
    for i in 1..grid.len() {
        if pd[i] >= level && pd[i - 1] < level {
            let f = (level - pd[i - 1]) / (pd[i] - pd[i - 1]);
            return Some(grid[i - 1] + f * (grid[i] - grid[i - 1]));
        }
    }
    None
}

#[test]
fn quadrature_integrates_gaussian_moments() {
    let gh = gauss_hermite(20);
    let pi = std::f64::consts::PI;
    let m0: f64 = gh.iter().map(|(_, w)| w).sum();
    let m2: f64 = gh.iter().map(|(t, w)| w * t * t).sum();
    let m4: f64 = gh.iter().map(|(t, w)| w * t.powi(4)).sum();
    assert!((m0 - pi.sqrt()).abs() < 1e-12);
    assert!((m2 - pi.sqrt() / 2.0).abs() < 1e-12);
    assert!((m4 - 3.0 * pi.sqrt() / 4.0).abs() < 1e-12);
}
