//! Variational lower bounds for Gaussian × softmax products.
//!
//! For a target class `j` the softmax class probability is rewritten with
//! logits relative to `j`,
//!
//! ```text
//! p(j | s) = 1 / (1 + Σ_{c≠j} exp(z_c)),   z_c = (w_c − w_j)ᵀs + (b_c − b_j)
//! ```
//!
//! and bounded below in two steps: `1 + Σ exp(z_c) ≤ Π (1 + exp(z_c))`, then
//! the logistic bound
//! `log(1 + eᶻ) ≤ log(1 + e^ξ) + (z − ξ)/2 + λ(ξ)(z² − ξ²)` for each term.
//! The result `f(s) = exp(g + hᵀs − ½ sᵀKs) ≤ p(j|s)` is an unnormalized
//! Gaussian in `s`, so `prior × f` stays Gaussian. The variational
//! parameters `ξ_c` are fitted by EM, which increases the bound mass `Ĉ`
//! monotonically. For two classes the bound is exact at `z = ±ξ`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::gm::{GaussianComponent, GaussianMixture, MixtureKind};
use crate::linalg;
use crate::softmax::SoftmaxModel;

/// Convergence controls for the EM loop.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VbOptions {
    /// Stop once `|Δ log Ĉ|` falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for VbOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 100 }
    }
}

/// One `ξ_c` per softmax class; the entry of the target class is unused and
/// kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalParams {
    pub xi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VbResult {
    /// Normalized Gaussian approximation of the posterior `p(s | o = j)`.
    pub posterior: GaussianComponent,
    /// `log Ĉ`, the log of the bound mass `∫ φ(s|μ,Σ) f(s) ds`.
    pub log_mass: f64,
    pub iterations: usize,
    pub converged: bool,
    pub params: VariationalParams,
    /// `log Ĉ` after every E-step, in order.
    pub trace: Vec<f64>,
}

impl VbResult {
    pub fn mass(&self) -> f64 {
        self.log_mass.exp()
    }
}

/// `λ(ξ) = tanh(ξ/2) / (4ξ)`, with the limit `1/8` at zero.
pub fn lambda_of_xi(xi: f64) -> f64 {
    let x = xi.abs();
    if x < 1e-4 {
        0.125 - x * x / 96.0
    } else {
        (0.5 * x).tanh() / (4.0 * x)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Relative-logit terms `(u_c, v_c)` for every class other than `target`,
/// with `v_c` already shifted to the prior mean.
struct RelativeTerms {
    u: Vec<DVector<f64>>,
    v: Vec<f64>,
    classes: Vec<usize>,
}

impl RelativeTerms {
    fn new(model: &SoftmaxModel, target: usize, origin: &DVector<f64>) -> Self {
        let wj = &model.classes()[target];
        let mut u = Vec::new();
        let mut v = Vec::new();
        let mut classes = Vec::new();
        for (c, class) in model.classes().iter().enumerate() {
            if c == target {
                continue;
            }
            let uc = DVector::from_iterator(wj.w.len(), class.w.iter().zip(&wj.w).map(|(a, b)| a - b));
            let vc = class.b - wj.b + uc.dot(origin);
            u.push(uc);
            v.push(vc);
            classes.push(c);
        }
        Self { u, v, classes }
    }

    /// `ξ_c² = E[z_c²]` under a Gaussian with (shifted) mean `m`, cov `cov`.
    fn fit_xi(&self, m: &DVector<f64>, cov: &DMatrix<f64>) -> Vec<f64> {
        self.u
            .iter()
            .zip(&self.v)
            .map(|(u, v)| {
                let mean = u.dot(m) + v;
                let var = (cov * u).dot(u).max(0.0);
                (mean * mean + var).sqrt()
            })
            .collect()
    }
}

/// Bound `f = exp(g + hᵀt − ½tᵀKt)` in shifted coordinates `t = s − μ₀`.
fn bound_terms(terms: &RelativeTerms, xi: &[f64], n: usize) -> (f64, DVector<f64>, DMatrix<f64>) {
    let mut g = 0.0;
    let mut h = DVector::zeros(n);
    let mut k = DMatrix::zeros(n, n);
    for ((u, &v), &x) in terms.u.iter().zip(&terms.v).zip(xi) {
        let lam = lambda_of_xi(x);
        k += u * u.transpose() * (2.0 * lam);
        h -= u * (0.5 + 2.0 * lam * v);
        g -= softplus(x) - 0.5 * x - lam * x * x + lam * v * v + 0.5 * v;
    }
    (g, h, k)
}

/// Variational approximation of `φ(s | μ, Σ) · p(o = class | s)`.
///
/// The prior's weight is ignored (it must be positive); the returned
/// `log_mass` is relative to the normalized prior density, so
/// `φ(s|μ,Σ) f(s) = Ĉ · posterior(s)`.
pub fn vb_gaussian_product(
    prior: &GaussianComponent,
    model: &SoftmaxModel,
    class: usize,
    opts: VbOptions,
) -> Result<VbResult> {
    if !(prior.weight() > 0.0) {
        return Err(Error::InvalidArgument("prior weight must be positive".into()));
    }
    check_dim(model.dimension(), prior.dim())?;
    if class >= model.num_classes() {
        return Err(Error::InvalidArgument(format!("class index {class} out of range")));
    }
    let n = prior.dim();
    let mu0 = prior.mean();
    let cov0 = prior.cov();
    let prec0 = linalg::inverse_spd(cov0)?;
    let logdet0 = linalg::log_det_spd(cov0).ok_or(Error::NotPositiveDefinite)?;
    let terms = RelativeTerms::new(model, class, mu0);

    let mut xi = terms.fit_xi(&DVector::zeros(n), cov0);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut last: Option<(f64, DVector<f64>, DMatrix<f64>, Vec<f64>)> = None;

    for _ in 0..opts.max_iter.max(1) {
        let (g, h, k) = bound_terms(&terms, &xi, n);
        let precision = &prec0 + &k;
        let chol = precision
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Degenerate("posterior precision is not positive definite".into()))?;
        let cov = chol.inverse();
        let shift = &cov * &h;
        let logdet_p = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let log_mass = g + 0.5 * h.dot(&shift) - 0.5 * logdet0 - 0.5 * logdet_p;
        if !log_mass.is_finite() || shift.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("non-finite bound".into()));
        }
        let prev = trace.last().copied();
        trace.push(log_mass);
        let next_xi = terms.fit_xi(&shift, &cov);
        last = Some((log_mass, shift, cov, xi));
        if let Some(p) = prev {
            if (log_mass - p).abs() < opts.tol {
                converged = true;
                break;
            }
        }
        xi = next_xi;
    }

    let (log_mass, shift, cov, xi_used) = last.expect("at least one iteration");
    let mut full_xi = vec![0.0; model.num_classes()];
    for (&c, x) in terms.classes.iter().zip(xi_used) {
        full_xi[c] = x;
    }
    let posterior = GaussianComponent::from_parts(1.0, mu0 + shift, cov)
        .map_err(|_| Error::Degenerate("posterior covariance is not positive definite".into()))?;
    Ok(VbResult {
        posterior,
        log_mass,
        iterations: trace.len(),
        converged,
        params: VariationalParams { xi: full_xi },
        trace,
    })
}

/// Variational approximation of `mixture(s) · p(label | s)`.
///
/// Emits one component per (mixand, class in label), in that order, with
/// weight `w_k · Ĉ_{k,c}`. Negative weights pass through as signs: the bound
/// is fitted to the component's shape only. The result is alpha-kind.
pub fn vb_mixture_product(
    mixture: &GaussianMixture,
    model: &SoftmaxModel,
    label: &str,
    opts: VbOptions,
) -> Result<GaussianMixture> {
    check_dim(model.dimension(), mixture.dimension())?;
    let classes = model.label_classes(label)?;
    let mut out = Vec::with_capacity(mixture.len() * classes.len());
    for comp in mixture.components() {
        let shape = comp.with_weight(1.0);
        for &c in classes {
            let r = vb_gaussian_product(&shape, model, c, opts)?;
            let (_, mean, cov) = r.posterior.into_parts();
            out.push(GaussianComponent::from_parts(comp.weight() * r.log_mass.exp(), mean, cov)?);
        }
    }
    Ok(GaussianMixture::from_parts_unchecked(mixture.dimension(), MixtureKind::RewardOrAlpha, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::softmax::SoftmaxClass;

    fn binary() -> SoftmaxModel {
        SoftmaxModel::with_class_names(
            1,
            vec![SoftmaxClass::new(vec![1.0], 0.0), SoftmaxClass::new(vec![-1.0], 0.0)],
            &["pos", "neg"],
        )
        .unwrap()
    }

    #[test]
    fn lambda_values() {
        assert_eq!(lambda_of_xi(0.0), 0.125);
        assert_eq!(lambda_of_xi(1.7), lambda_of_xi(-1.7));
        assert!((lambda_of_xi(2.0) - 1f64.tanh() / 8.0).abs() < 1e-15);
        assert!((lambda_of_xi(2.0) - 0.095_198_7).abs() < 1e-6);
        // continuity across the series cut-over
        assert!((lambda_of_xi(1.0001e-4) - lambda_of_xi(0.9999e-4)).abs() < 1e-12);
        let mut prev = lambda_of_xi(0.0);
        for i in 1..200 {
            let v = lambda_of_xi(i as f64 * 0.05);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn uniform_softmax_leaves_prior_unchanged() {
        let m = SoftmaxModel::with_class_names(
            2,
            vec![SoftmaxClass::new(vec![0.0, 0.0], 0.0); 2],
            &["a", "b"],
        )
        .unwrap();
        let prior = GaussianComponent::from_slices(1.0, &[1.0, -3.0], &[2.0, 0.4, 0.4, 1.0]).unwrap();
        let r = vb_gaussian_product(&prior, &m, 0, VbOptions::default()).unwrap();
        assert!((r.mass() - 0.5).abs() < 1e-9);
        assert!((r.posterior.mean() - prior.mean()).abs().max() < 1e-12);
        assert!((r.posterior.cov() - prior.cov()).abs().max() < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn binary_classes_are_mirror_images() {
        let prior = GaussianComponent::scalar(1.0, 0.0, 1.0).unwrap();
        let m = binary();
        let a = vb_gaussian_product(&prior, &m, 0, VbOptions::default()).unwrap();
        let b = vb_gaussian_product(&prior, &m, 1, VbOptions::default()).unwrap();
        assert!(a.mass() <= 0.5);
        assert!(a.posterior.mean()[0] > 0.0);
        assert!((a.posterior.mean()[0] + b.posterior.mean()[0]).abs() < 1e-9);
        assert!((a.log_mass - b.log_mass).abs() < 1e-9);
    }

    #[test]
    fn em_trace_is_monotone() {
        let prior = GaussianComponent::scalar(1.0, 1.5, 2.0).unwrap();
        let r = vb_gaussian_product(&prior, &binary(), 1, VbOptions { tol: 1e-12, max_iter: 200 }).unwrap();
        for w in r.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-10, "{:?}", r.trace);
        }
        assert!(r.converged);
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let prior = GaussianComponent::scalar(1.0, 1.5, 2.0).unwrap();
        let r = vb_gaussian_product(&prior, &binary(), 1, VbOptions { tol: 0.0, max_iter: 3 }).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn rejects_bad_inputs() {
        let prior = GaussianComponent::scalar(1.0, 0.0, 1.0).unwrap();
        assert!(vb_gaussian_product(&prior, &binary(), 2, VbOptions::default()).is_err());
        assert!(vb_gaussian_product(&prior.with_weight(-1.0), &binary(), 0, VbOptions::default()).is_err());
        let wide = GaussianComponent::from_slices(1.0, &[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            vb_gaussian_product(&wide, &binary(), 0, VbOptions::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mixture_product_sizes_and_signs() {
        let m = crate::softmax::build_relative_model(crate::softmax::RelativeLayout::DetectNoDetect3, 1.0).unwrap();
        let alpha = GaussianMixture::new(
            1,
            MixtureKind::RewardOrAlpha,
            vec![
                GaussianComponent::scalar(2.0, -1.0, 1.0).unwrap(),
                GaussianComponent::scalar(-3.0, 2.0, 0.5).unwrap(),
            ],
        )
        .unwrap();
        let out = vb_mixture_product(&alpha, &m, crate::softmax::NO_DETECT, VbOptions::default()).unwrap();
        assert_eq!(out.len(), 4);
        assert_eq!(out.kind(), MixtureKind::RewardOrAlpha);
        assert!(out.components()[0].weight() > 0.0 && out.components()[1].weight() > 0.0);
        assert!(out.components()[2].weight() < 0.0 && out.components()[3].weight() < 0.0);
        assert!(vb_mixture_product(&alpha, &m, "Maybe", VbOptions::default()).is_err());
    }

    #[test]
    fn uniform_mixture_product_halves_weights() {
        let m = SoftmaxModel::with_class_names(1, vec![SoftmaxClass::new(vec![0.0], 0.0); 2], &["a", "b"]).unwrap();
        let g = GaussianMixture::new(1, MixtureKind::Belief, vec![GaussianComponent::scalar(1.0, 0.3, 0.7).unwrap()]).unwrap();
        let out = vb_mixture_product(&g, &m, "a", VbOptions::default()).unwrap();
        let c = &out.components()[0];
        assert!((c.weight() - 0.5).abs() < 1e-9);
        assert!((c.mean()[0] - 0.3).abs() < 1e-12 && (c.cov()[(0, 0)] - 0.7).abs() < 1e-12);
    }
}
