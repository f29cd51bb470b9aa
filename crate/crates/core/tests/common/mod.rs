//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use vbpomdp::gm::{GaussianComponent, GaussianMixture, MixtureKind};
use vbpomdp::quadrature::{composite_1d, composite_2d};
use vbpomdp::rng::StreamRng;

/// Random component with mean in `[-2, 2]ᴺ` and covariance `AAᵀ/2 + I/5`.
pub fn random_component(rng: &mut StreamRng, dim: usize, weight: f64) -> GaussianComponent {
    let mean = DVector::from_fn(dim, |_, _| rng.random_range(-2.0..2.0));
    let a = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    let cov = &a * a.transpose() * 0.5 + DMatrix::identity(dim, dim) * 0.2;
    GaussianComponent::new(weight, mean, cov).unwrap()
}

pub fn random_mixture(rng: &mut StreamRng, dim: usize, size: usize, kind: MixtureKind) -> GaussianMixture {
    let comps = (0..size)
        .map(|_| {
            let w = rng.random_range(0.1..1.0);
            let w = if kind == MixtureKind::RewardOrAlpha && rng.random_bool(0.3) { -w } else { w };
            random_component(rng, dim, w)
        })
        .collect::<Vec<_>>();
    if kind == MixtureKind::Belief {
        return GaussianMixture::belief_from(dim, comps).unwrap();
    }
    GaussianMixture::new(dim, kind, comps).unwrap()
}

/// Axis-aligned box covering every component out to 12 standard deviations.
pub fn support<'a>(comps: impl IntoIterator<Item = &'a GaussianComponent>) -> (Vec<f64>, Vec<f64>) {
    let mut lo: Vec<f64> = Vec::new();
    let mut hi: Vec<f64> = Vec::new();
    for c in comps {
        if lo.is_empty() {
            lo = vec![f64::INFINITY; c.dim()];
            hi = vec![f64::NEG_INFINITY; c.dim()];
        }
        for i in 0..c.dim() {
            let r = 12.0 * c.cov()[(i, i)].sqrt();
            lo[i] = lo[i].min(c.mean()[i] - r);
            hi[i] = hi[i].max(c.mean()[i] + r);
        }
    }
    (lo, hi)
}

/// Tensor Gauss–Legendre integral over a 1-D or 2-D box.
pub fn integrate(lo: &[f64], hi: &[f64], f: impl Fn(&[f64]) -> f64) -> f64 {
    match lo.len() {
        1 => composite_1d(lo[0], hi[0], 96, 12, |x| f(&[x])),
        2 => composite_2d((lo[0], hi[0]), (lo[1], hi[1]), 36, 10, |x, y| f(&[x, y])),
        n => panic!("no quadrature oracle in {n} dimensions"),
    }
}

/// Zeroth, first and second moments `(m, μ, Σ)` of a nonnegative density.
pub fn moments(lo: &[f64], hi: &[f64], f: impl Fn(&[f64]) -> f64) -> (f64, DVector<f64>, DMatrix<f64>) {
    let n = lo.len();
    let mass = integrate(lo, hi, &f);
    let mean = DVector::from_fn(n, |i, _| integrate(lo, hi, |s| s[i] * f(s)) / mass);
    let cov = DMatrix::from_fn(n, n, |i, j| {
        integrate(lo, hi, |s| (s[i] - mean[i]) * (s[j] - mean[j]) * f(s)) / mass
    });
    (mass, mean, cov)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Largest entrywise difference scaled by the reference's largest entry.
pub fn rel_err_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max() / b.abs().max().max(1e-12)
}

pub fn rel_err_vec(a: &DVector<f64>, b: &DVector<f64>, scale: f64) -> f64 {
    (a - b).abs().max() / scale
}
