//! Gaussian components and Gaussian mixtures.
//!
//! A [`GaussianMixture`] is used for three different things: normalized
//! beliefs, strictly positive (but unnormalized) observation likelihoods, and
//! reward or alpha functions whose weights may have either sign. The
//! [`MixtureKind`] tag records which of these a mixture is and the
//! constructor enforces the matching weight constraints.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::rng;

/// A weighted multivariate normal density `w · φ(s | μ, Σ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComponentRecord", into = "ComponentRecord")]
pub struct GaussianComponent {
    weight: f64,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianComponent {
    /// Builds a component, rejecting asymmetric or non positive definite
    /// covariances.
    pub fn new(weight: f64, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if !cov.is_square() {
            return Err(Error::InvalidArgument("covariance must be square".into()));
        }
        check_dim(cov.nrows(), mean.len())?;
        if !weight.is_finite() || mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite weight or mean".into()));
        }
        linalg::check_symmetric(&cov)?;
        let mut cov = cov;
        linalg::symmetrize(&mut cov);
        linalg::check_positive_definite(&cov)?;
        Ok(Self { weight, mean, cov })
    }

    /// Convenience constructor from plain slices; `cov` is row-major.
    pub fn from_slices(weight: f64, mean: &[f64], cov: &[f64]) -> Result<Self> {
        let n = mean.len();
        if cov.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: cov.len() });
        }
        Self::new(weight, DVector::from_column_slice(mean), DMatrix::from_row_slice(n, n, cov))
    }

    /// One-dimensional component with variance `var`.
    pub fn scalar(weight: f64, mean: f64, var: f64) -> Result<Self> {
        Self::from_slices(weight, &[mean], &[var])
    }

    /// Isotropic component `w · φ(s | μ, var·I)`.
    pub fn isotropic(weight: f64, mean: &[f64], var: f64) -> Result<Self> {
        let n = mean.len();
        Self::new(weight, DVector::from_column_slice(mean), DMatrix::identity(n, n) * var)
    }

    /// Internal constructor for covariances that are positive definite by
    /// construction. Symmetrizes and runs a Cholesky check only.
    pub(crate) fn from_parts(weight: f64, mean: DVector<f64>, mut cov: DMatrix<f64>) -> Result<Self> {
        linalg::symmetrize(&mut cov);
        if !linalg::is_cholesky_pd(&cov) || !weight.is_finite() || mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { weight, mean, cov })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn with_weight(&self, weight: f64) -> Self {
        Self { weight, mean: self.mean.clone(), cov: self.cov.clone() }
    }

    pub(crate) fn into_parts(self) -> (f64, DVector<f64>, DMatrix<f64>) {
        (self.weight, self.mean, self.cov)
    }

    /// Log of the normalized density `φ(point | μ, Σ)` (weight excluded).
    pub fn log_density(&self, point: &[f64]) -> Result<f64> {
        check_dim(self.dim(), point.len())?;
        linalg::log_normal_sum_cov(point, self.mean.as_slice(), self.cov.as_slice(), None)
            .ok_or(Error::NotPositiveDefinite)
    }

    /// `w · φ(point | μ, Σ)`.
    pub fn evaluate(&self, point: &[f64]) -> Result<f64> {
        Ok(self.weight * self.log_density(point)?.exp())
    }

    pub fn log_det_cov(&self) -> f64 {
        linalg::log_det_spd(&self.cov).unwrap_or(f64::NEG_INFINITY)
    }
}

/// What a mixture represents, and therefore which weights it may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixtureKind {
    /// Normalized probability density: positive weights summing to one.
    Belief,
    /// Positive weights, any total.
    Likelihood,
    /// Weights of any sign.
    RewardOrAlpha,
}

/// A finite weighted sum of Gaussian components over `ℝᴺ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureRecord", into = "MixtureRecord")]
pub struct GaussianMixture {
    dimension: usize,
    kind: MixtureKind,
    components: Vec<GaussianComponent>,
}

impl GaussianMixture {
    pub fn new(dimension: usize, kind: MixtureKind, components: Vec<GaussianComponent>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidMixture("dimension must be positive".into()));
        }
        for c in &components {
            check_dim(dimension, c.dim())?;
        }
        let m = Self { dimension, kind, components };
        m.check_kind()?;
        Ok(m)
    }

    /// Mixture with no components (evaluates to zero everywhere).
    pub fn empty(dimension: usize, kind: MixtureKind) -> Self {
        Self { dimension, kind, components: Vec::new() }
    }

    /// Belief from components whose weights are positive; the weights are
    /// rescaled to sum to one.
    pub fn belief_from(dimension: usize, components: Vec<GaussianComponent>) -> Result<Self> {
        normalize(&Self::new(dimension, MixtureKind::Likelihood, components)?)
    }

    pub(crate) fn from_parts_unchecked(
        dimension: usize,
        kind: MixtureKind,
        components: Vec<GaussianComponent>,
    ) -> Self {
        debug_assert!(components.iter().all(|c| c.dim() == dimension));
        Self { dimension, kind, components }
    }

    fn check_kind(&self) -> Result<()> {
        match self.kind {
            MixtureKind::RewardOrAlpha => Ok(()),
            MixtureKind::Likelihood => {
                if self.components.iter().all(|c| c.weight > 0.0) {
                    Ok(())
                } else {
                    Err(Error::InvalidMixture("likelihood weights must be positive".into()))
                }
            }
            MixtureKind::Belief => {
                if self.components.iter().any(|c| !(c.weight > 0.0)) {
                    return Err(Error::InvalidMixture("belief weights must be positive".into()));
                }
                let total = self.total_weight();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidMixture(format!("belief weights sum to {total}")));
                }
                Ok(())
            }
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn kind(&self) -> MixtureKind {
        self.kind
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn into_components(self) -> Vec<GaussianComponent> {
        self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Signed sum of weights.
    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// Re-tags the mixture, re-checking the weight constraints of `kind`.
    pub fn with_kind(self, kind: MixtureKind) -> Result<Self> {
        let m = Self { kind, ..self };
        m.check_kind()?;
        Ok(m)
    }

    /// Multiplies every weight by `factor`; the result is an alpha-kind
    /// mixture unless `factor` is positive and the kind is not a belief.
    pub fn scaled(&self, factor: f64) -> Self {
        let kind = match self.kind {
            MixtureKind::Likelihood if factor > 0.0 => MixtureKind::Likelihood,
            _ => MixtureKind::RewardOrAlpha,
        };
        Self {
            dimension: self.dimension,
            kind,
            components: self.components.iter().map(|c| c.with_weight(c.weight * factor)).collect(),
        }
    }

    /// Concatenation of components; the result is alpha-kind.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        check_dim(self.dimension, other.dimension)?;
        let mut components = self.components.clone();
        components.extend(other.components.iter().cloned());
        Ok(Self { dimension: self.dimension, kind: MixtureKind::RewardOrAlpha, components })
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64> {
        evaluate(self, point)
    }

    /// Weighted mean `Σ wμ / Σ w`.
    pub fn mean(&self) -> Result<DVector<f64>> {
        let total = self.total_weight();
        if total == 0.0 {
            return Err(Error::ZeroWeight);
        }
        let mut acc = DVector::zeros(self.dimension);
        for c in &self.components {
            acc += &c.mean * c.weight;
        }
        Ok(acc / total)
    }

    /// Weighted covariance of the mixture about its mean.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        let mean = self.mean()?;
        let total = self.total_weight();
        let mut acc = DMatrix::zeros(self.dimension, self.dimension);
        for c in &self.components {
            let d = &c.mean - &mean;
            acc += (&c.cov + &d * d.transpose()) * c.weight;
        }
        Ok(acc / total)
    }

    /// Draws one point. Requires nonnegative weights with positive sum.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>> {
        let total = self.total_weight();
        if self.components.iter().any(|c| c.weight < 0.0) || !(total > 0.0) {
            return Err(Error::NonPositiveMass);
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = self.components.len() - 1;
        for (i, c) in self.components.iter().enumerate() {
            if u < c.weight {
                pick = i;
                break;
            }
            u -= c.weight;
        }
        let c = &self.components[pick];
        sample_normal(rng, &c.mean, &c.cov)
    }
}

/// One draw from `N(mean, cov)`.
pub fn sample_normal<R: Rng + ?Sized>(rng: &mut R, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_dim(mean.len(), cov.nrows())?;
    let l = cov.clone().cholesky().ok_or(Error::NotPositiveDefinite)?.unpack();
    let z = DVector::from_iterator(mean.len(), (0..mean.len()).map(|_| Distribution::<f64>::sample(&StandardNormal, rng)));
    Ok(mean + l * z)
}

/// `Σ_m w_m · φ(point | μ_m, Σ_m)`.
pub fn evaluate(mixture: &GaussianMixture, point: &[f64]) -> Result<f64> {
    check_dim(mixture.dimension, point.len())?;
    let mut acc = 0.0;
    for c in &mixture.components {
        acc += c.evaluate(point)?;
    }
    Ok(acc)
}

/// Pointwise product of two weighted Gaussians, which is again a weighted
/// Gaussian: weight `w_a w_b φ(μ_b | μ_a, Σ_a + Σ_b)`, covariance
/// `(Σ_a⁻¹ + Σ_b⁻¹)⁻¹`, mean `C (Σ_a⁻¹ μ_a + Σ_b⁻¹ μ_b)`.
pub fn gaussian_product(a: &GaussianComponent, b: &GaussianComponent) -> Result<GaussianComponent> {
    check_dim(a.dim(), b.dim())?;
    let log_overlap = linalg::log_normal_sum_cov(
        b.mean.as_slice(),
        a.mean.as_slice(),
        a.cov.as_slice(),
        Some(b.cov.as_slice()),
    )
    .ok_or(Error::Singular)?;
    // Σ_a (Σ_a+Σ_b)⁻¹ Σ_b avoids inverting the factors individually.
    let sum = &a.cov + &b.cov;
    let chol = sum.cholesky().ok_or(Error::Singular)?;
    let cov = &a.cov * chol.solve(&b.cov);
    let mean = &b.cov * chol.solve(&a.mean) + &a.cov * chol.solve(&b.mean);
    GaussianComponent::from_parts(a.weight * b.weight * log_overlap.exp(), mean, cov)
}

/// `∫ f(s) g(s) ds = Σ_{k,q} w_k w_q φ(μ_q | μ_k, Σ_k + Σ_q)`.
pub fn inner_product(f: &GaussianMixture, g: &GaussianMixture) -> Result<f64> {
    check_dim(f.dimension, g.dimension)?;
    let mut acc = 0.0;
    for a in &f.components {
        let mut row = 0.0;
        for b in &g.components {
            let l = linalg::log_normal_sum_cov(
                b.mean.as_slice(),
                a.mean.as_slice(),
                a.cov.as_slice(),
                Some(b.cov.as_slice()),
            )
            .ok_or(Error::Singular)?;
            row += b.weight * l.exp();
        }
        acc += a.weight * row;
    }
    Ok(acc)
}

/// Moment-preserving merge of two weighted Gaussians.
///
/// The cross term is scaled by `w_a w_b / w_m²` so that the merged component
/// carries the pair's total mass, mean and second moment.
pub fn moment_merge(a: &GaussianComponent, b: &GaussianComponent) -> Result<GaussianComponent> {
    check_dim(a.dim(), b.dim())?;
    let total = a.weight + b.weight;
    if total == 0.0 {
        return Err(Error::ZeroWeight);
    }
    let (mean, cov) = merge_shape(a, a.weight, b, b.weight);
    GaussianComponent::from_parts(total, mean, cov)
}

/// Merged mean and covariance using the supplied (nonzero-sum) weights.
pub(crate) fn merge_shape(
    a: &GaussianComponent,
    wa: f64,
    b: &GaussianComponent,
    wb: f64,
) -> (DVector<f64>, DMatrix<f64>) {
    let total = wa + wb;
    let fa = wa / total;
    let fb = wb / total;
    let mean = &a.mean * fa + &b.mean * fb;
    let d = &a.mean - &b.mean;
    let cov = &a.cov * fa + &b.cov * fb + linalg::outer(&d) * (fa * fb);
    (mean, cov)
}

/// The three `J` terms of the integral squared difference.
fn isd_terms(f: &GaussianMixture, g: &GaussianMixture) -> Result<(f64, f64, f64)> {
    Ok((inner_product(f, f)?, inner_product(f, g)?, inner_product(g, g)?))
}

/// Integral squared difference `∫ (f − g)²`, or its normalized form
/// `√(ISD / (J_ff + J_gg)) ∈ [0, 1]`.
pub fn mixture_isd(f: &GaussianMixture, g: &GaussianMixture, normalized: bool) -> Result<f64> {
    check_dim(f.dimension, g.dimension)?;
    let (jff, jfg, jgg) = isd_terms(f, g)?;
    // J_fg computed as ⟨f,g⟩ is symmetric only up to rounding; average both
    // orders so ISD(f,g) == ISD(g,f) bit for bit.
    let jgf = inner_product(g, f)?;
    let cross = 0.5 * (jfg + jgf);
    let isd = ((jff + jgg) - 2.0 * cross).max(0.0);
    if !normalized {
        return Ok(isd);
    }
    let denom = jff + jgg;
    if denom <= 0.0 {
        return Ok(0.0);
    }
    Ok((isd / denom).sqrt().min(1.0))
}

/// Rescales positive weights to sum to one and tags the result as a belief.
pub fn normalize(mixture: &GaussianMixture) -> Result<GaussianMixture> {
    if mixture.is_empty() || mixture.components.iter().any(|c| !(c.weight > 0.0) || !c.weight.is_finite()) {
        return Err(Error::NonPositiveMass);
    }
    let max = mixture.components.iter().map(|c| c.weight).fold(0.0, f64::max);
    // Tiny weights are first brought to unit scale so the sum cannot underflow.
    let pre = if max < 1e-100 { 1.0 / max } else { 1.0 };
    let total: f64 = mixture.components.iter().map(|c| c.weight * pre).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::NonPositiveMass);
    }
    let components = mixture
        .components
        .iter()
        .map(|c| c.with_weight(c.weight * pre / total))
        .collect();
    Ok(GaussianMixture { dimension: mixture.dimension, kind: MixtureKind::Belief, components })
}

/// Parameters for random benchmark mixtures: uniform means, Wishart
/// covariances, uniform weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureGenSpec {
    pub dimension: usize,
    pub components: usize,
    pub mean_low: Vec<f64>,
    pub mean_high: Vec<f64>,
    pub wishart_dof: usize,
    pub wishart_scale: f64,
    pub weight_low: f64,
    pub weight_high: f64,
    pub seed: u64,
}

impl MixtureGenSpec {
    /// Means uniform on `[0, 10]ᴺ`, covariances `Wishart(N, 2·I)`, weights
    /// uniform on `(0, 1)`.
    pub fn benchmark(dimension: usize, components: usize, seed: u64) -> Self {
        Self {
            dimension,
            components,
            mean_low: vec![0.0; dimension],
            mean_high: vec![10.0; dimension],
            wishart_dof: dimension,
            wishart_scale: 2.0,
            weight_low: 0.0,
            weight_high: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.dimension == 0 || self.components == 0 {
            return bad("dimension and component count must be positive");
        }
        if self.mean_low.len() != self.dimension || self.mean_high.len() != self.dimension {
            return bad("mean range must have one entry per axis");
        }
        if self.mean_low.iter().zip(&self.mean_high).any(|(l, h)| !(l < h)) {
            return bad("mean range low must be below high");
        }
        if !(self.weight_low < self.weight_high) || self.weight_high <= 0.0 {
            return bad("weight range low must be below a positive high");
        }
        if self.wishart_dof < self.dimension || !(self.wishart_scale > 0.0) {
            return bad("wishart degrees of freedom must be at least the dimension");
        }
        Ok(())
    }
}

/// Draws a random mixture; component `m` uses random stream `(seed, m)`.
pub fn random_mixture(spec: &MixtureGenSpec) -> Result<GaussianMixture> {
    spec.validate()?;
    let n = spec.dimension;
    let components = (0..spec.components)
        .map(|m| {
            let mut rng = rng::stream(spec.seed, m as u64);
            let mean = DVector::from_iterator(
                n,
                (0..n).map(|i| rng.random_range(spec.mean_low[i]..spec.mean_high[i])),
            );
            let weight = loop {
                let w = rng.random_range(spec.weight_low..spec.weight_high);
                if w > 0.0 {
                    break w;
                }
            };
            loop {
                let cov = sample_wishart(&mut rng, n, spec.wishart_dof, spec.wishart_scale);
                if let Ok(c) = GaussianComponent::new(weight, mean.clone(), cov) {
                    return c;
                }
            }
        })
        .collect();
    Ok(GaussianMixture { dimension: n, kind: MixtureKind::Likelihood, components })
}

fn sample_wishart<R: Rng>(rng: &mut R, n: usize, dof: usize, scale: f64) -> DMatrix<f64> {
    let sd = scale.sqrt();
    let mut acc = DMatrix::zeros(n, n);
    for _ in 0..dof {
        let x = DVector::from_iterator(n, (0..n).map(|_| sd * Distribution::<f64>::sample(&StandardNormal, rng)));
        acc += linalg::outer(&x);
    }
    acc
}

#[derive(Serialize, Deserialize)]
struct ComponentRecord {
    weight: f64,
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
}

impl TryFrom<ComponentRecord> for GaussianComponent {
    type Error = Error;

    fn try_from(r: ComponentRecord) -> Result<Self> {
        let cov = linalg::matrix_from_rows(&r.covariance, r.mean.len())?;
        GaussianComponent::new(r.weight, DVector::from_vec(r.mean), cov)
    }
}

impl From<GaussianComponent> for ComponentRecord {
    fn from(c: GaussianComponent) -> Self {
        ComponentRecord {
            weight: c.weight,
            mean: c.mean.iter().copied().collect(),
            covariance: linalg::matrix_to_rows(&c.cov),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct MixtureRecord {
    dimension: usize,
    kind: MixtureKind,
    components: Vec<GaussianComponent>,
}

impl TryFrom<MixtureRecord> for GaussianMixture {
    type Error = Error;

    fn try_from(r: MixtureRecord) -> Result<Self> {
        GaussianMixture::new(r.dimension, r.kind, r.components)
    }
}

impl From<GaussianMixture> for MixtureRecord {
    fn from(m: GaussianMixture) -> Self {
        MixtureRecord { dimension: m.dimension, kind: m.kind, components: m.components }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c1(w: f64, m: f64, v: f64) -> GaussianComponent {
        GaussianComponent::scalar(w, m, v).unwrap()
    }

    #[test]
    fn standard_normal_mode() {
        let g = GaussianMixture::new(1, MixtureKind::Belief, vec![c1(1.0, 0.0, 1.0)]).unwrap();
        assert!((g.evaluate(&[0.0]).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn empty_mixture_is_zero() {
        let g = GaussianMixture::empty(3, MixtureKind::RewardOrAlpha);
        assert_eq!(g.evaluate(&[1.0, 2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_rejects_wrong_dimension() {
        let g = GaussianMixture::new(1, MixtureKind::Belief, vec![c1(1.0, 0.0, 1.0)]).unwrap();
        assert_eq!(
            g.evaluate(&[0.0, 1.0]),
            Err(Error::DimensionMismatch { expected: 1, found: 2 })
        );
    }

    #[test]
    fn construction_rejects_bad_covariances() {
        assert_eq!(
            GaussianComponent::from_slices(1.0, &[0.0, 0.0], &[1.0, 0.5, 0.4, 1.0]),
            Err(Error::NotSymmetric)
        );
        assert_eq!(
            GaussianComponent::from_slices(1.0, &[0.0, 0.0], &[1.0, 1.0, 1.0, 1.0]),
            Err(Error::NotPositiveDefinite)
        );
        assert_eq!(
            GaussianComponent::from_slices(1.0, &[0.0, 0.0], &[1.0, 0.0, 0.0, 1e-14]),
            Err(Error::NotPositiveDefinite)
        );
    }

    #[test]
    fn belief_kind_enforces_normalization() {
        let r = GaussianMixture::new(1, MixtureKind::Belief, vec![c1(0.5, 0.0, 1.0)]);
        assert!(matches!(r, Err(Error::InvalidMixture(_))));
        let r = GaussianMixture::new(1, MixtureKind::Likelihood, vec![c1(-0.5, 0.0, 1.0)]);
        assert!(matches!(r, Err(Error::InvalidMixture(_))));
        assert!(GaussianMixture::new(1, MixtureKind::RewardOrAlpha, vec![c1(-0.5, 0.0, 1.0)]).is_ok());
    }

    #[test]
    fn product_of_identical_means_keeps_mean() {
        let a = GaussianComponent::from_slices(1.0, &[1.0, -2.0], &[2.0, 0.3, 0.3, 1.0]).unwrap();
        let p = gaussian_product(&a, &a).unwrap();
        assert!((p.mean() - a.mean()).abs().max() < 1e-12);
        assert!((p.cov() - a.cov() * 0.5).abs().max() < 1e-12);
    }

    #[test]
    fn merge_of_identical_halves_is_identity() {
        let a = GaussianComponent::from_slices(0.5, &[1.0, 2.0], &[1.0, 0.2, 0.2, 3.0]).unwrap();
        let m = moment_merge(&a, &a).unwrap();
        assert!((m.weight() - 1.0).abs() < 1e-15);
        assert!((m.mean() - a.mean()).abs().max() < 1e-15);
        assert!((m.cov() - a.cov()).abs().max() < 1e-15);
    }

    #[test]
    fn merge_rejects_zero_total_weight() {
        assert_eq!(moment_merge(&c1(1.0, 0.0, 1.0), &c1(-1.0, 1.0, 1.0)), Err(Error::ZeroWeight));
    }

    #[test]
    fn normalize_cases() {
        let g = GaussianMixture::new(1, MixtureKind::Likelihood, vec![c1(2.0, 0.0, 1.0), c1(2.0, 1.0, 1.0)]).unwrap();
        let n = normalize(&g).unwrap();
        assert_eq!(n.kind(), MixtureKind::Belief);
        assert_eq!(n.components()[0].weight(), 0.5);
        assert_eq!(normalize(&n).unwrap(), n);

        let tiny = GaussianMixture::new(
            1,
            MixtureKind::Likelihood,
            vec![c1(1e-300, 0.0, 1.0), c1(1e-300, 1.0, 1.0)],
        )
        .unwrap();
        let n = normalize(&tiny).unwrap();
        assert!((n.components()[0].weight() - 0.5).abs() < 1e-15);

        let neg = GaussianMixture::new(1, MixtureKind::RewardOrAlpha, vec![c1(-1.0, 0.0, 1.0)]).unwrap();
        assert_eq!(normalize(&neg), Err(Error::NonPositiveMass));
    }

    #[test]
    fn isd_of_identical_mixtures_is_zero() {
        let g = GaussianMixture::new(1, MixtureKind::Likelihood, vec![c1(0.3, 0.0, 1.0), c1(0.7, 2.0, 0.5)]).unwrap();
        assert!(mixture_isd(&g, &g, false).unwrap().abs() < 1e-15);
        assert!(mixture_isd(&g, &g, true).unwrap().abs() < 1e-7);
    }

    #[test]
    fn json_schema_round_trip() {
        let g = GaussianMixture::new(
            2,
            MixtureKind::RewardOrAlpha,
            vec![GaussianComponent::from_slices(-1.5, &[1.0, 2.0], &[1.0, 0.1, 0.1, 2.0]).unwrap()],
        )
        .unwrap();
        let text = serde_json::to_string(&g).unwrap();
        assert!(text.contains("\"kind\":\"reward-or-alpha\""));
        assert!(text.contains("\"covariance\":[[1.0,0.1],[0.1,2.0]]"));
        let back: GaussianMixture = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
        let bad = text.replace("[[1.0,0.1],[0.1,2.0]]", "[[1.0,3.0],[3.0,2.0]]");
        assert!(serde_json::from_str::<GaussianMixture>(&bad).is_err());
    }

    #[test]
    fn random_mixture_is_deterministic() {
        let spec = MixtureGenSpec::benchmark(2, 40, 11);
        assert_eq!(random_mixture(&spec).unwrap(), random_mixture(&spec).unwrap());
        let other = MixtureGenSpec { seed: 12, ..spec.clone() };
        assert_ne!(random_mixture(&spec).unwrap(), random_mixture(&other).unwrap());
    }

    #[test]
    fn random_mixture_rejects_bad_spec() {
        let mut spec = MixtureGenSpec::benchmark(2, 4, 1);
        spec.wishart_dof = 1;
        assert!(random_mixture(&spec).is_err());
    }
}
