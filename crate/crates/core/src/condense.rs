//! Gaussian mixture condensation.
//!
//! [`runnalls`] greedily merges the pair of components with the smallest
//! upper bound on the KL divergence the merge introduces. [`cluster_condense`]
//! first partitions the components with k-means and runs Runnalls inside each
//! cluster with a budget proportional to the cluster's size, which avoids
//! the quadratic cost over the full mixture.
//!
//! Mixtures with signed weights (alpha functions) are handled by making all
//! bound and clustering decisions on `|w|` and only merging components of
//! the same sign, so total signed mass is always preserved.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gm::{merge_shape, GaussianComponent, GaussianMixture};
use crate::linalg;
use crate::rng;

/// Pairwise distance between two (normalized) Gaussian components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterMetric {
    Euclidean,
    SymKl,
    Jsd,
    Wasserstein2,
    Bhattacharyya,
}

impl ClusterMetric {
    pub const ALL: [ClusterMetric; 5] = [
        ClusterMetric::SymKl,
        ClusterMetric::Jsd,
        ClusterMetric::Euclidean,
        ClusterMetric::Wasserstein2,
        ClusterMetric::Bhattacharyya,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClusterMetric::Euclidean => "euclidean",
            ClusterMetric::SymKl => "symkl",
            ClusterMetric::Jsd => "jsd",
            ClusterMetric::Wasserstein2 => "wasserstein2",
            ClusterMetric::Bhattacharyya => "bhattacharyya",
        }
    }
}

impl std::str::FromStr for ClusterMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClusterMetric::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondenseConfig {
    pub target_size: usize,
    pub cluster_count: usize,
    pub metric: ClusterMetric,
    pub kmeans_max_iter: usize,
    pub seed: u64,
}

impl Default for CondenseConfig {
    fn default() -> Self {
        Self { target_size: 20, cluster_count: 4, metric: ClusterMetric::Euclidean, kmeans_max_iter: 20, seed: 0 }
    }
}

impl CondenseConfig {
    pub fn with_target(target_size: usize) -> Self {
        Self { target_size, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cluster_count == 0 || self.target_size < self.cluster_count {
            return Err(Error::InvalidArgument(format!(
                "condensation needs target size ({}) >= cluster count ({}) >= 1",
                self.target_size, self.cluster_count
            )));
        }
        Ok(())
    }
}

/// Upper bound on the KL divergence introduced by merging `a` and `b`:
/// `½[(w_a+w_b) log|Σ_m| − w_a log|Σ_a| − w_b log|Σ_b|]`, on `|w|`.
pub fn kl_merge_bound(a: &GaussianComponent, b: &GaussianComponent) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    let la = linalg::log_det_spd(a.cov()).ok_or(Error::Singular)?;
    let lb = linalg::log_det_spd(b.cov()).ok_or(Error::Singular)?;
    let (wa, wb) = (a.weight().abs(), b.weight().abs());
    if wa + wb == 0.0 {
        return Ok(0.0);
    }
    let (_, cov) = merge_shape(a, wa, b, wb);
    let lm = linalg::log_det_spd(&cov).ok_or(Error::Singular)?;
    Ok(0.5 * ((wa + wb) * lm - wa * la - wb * lb))
}

/// Slice-based twin of [`kl_merge_bound`] for the Runnalls inner loop.
fn bound_fast(a: &Slot, b: &Slot) -> f64 {
    let (wa, wb) = (a.weight.abs(), b.weight.abs());
    let total = wa + wb;
    if total == 0.0 {
        return 0.0;
    }
    let n = a.mean.len();
    let (fa, fb) = (wa / total, wb / total);
    let (ca, cb) = (a.cov.as_slice(), b.cov.as_slice());
    let lm = linalg::with_scratch(n, |m, d| {
        for i in 0..n {
            d[i] = a.mean[i] - b.mean[i];
        }
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = fa * ca[i * n + j] + fb * cb[i * n + j] + fa * fb * d[i] * d[j];
            }
        }
        if linalg::cholesky_in_place(m, n) {
            linalg::cholesky_log_det(m, n)
        } else {
            f64::INFINITY
        }
    });
    0.5 * (total * lm - wa * a.logdet - wb * b.logdet)
}

struct Slot {
    weight: f64,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    logdet: f64,
}

impl Slot {
    fn new(c: &GaussianComponent) -> Self {
        Self { weight: c.weight(), mean: c.mean().clone(), cov: c.cov().clone(), logdet: c.log_det_cov() }
    }

    fn same_sign(&self, other: &Slot) -> bool {
        (self.weight >= 0.0) == (other.weight >= 0.0)
    }
}

/// Greedy Runnalls reduction to at most `target` components. Pairs are
/// ranked by [`kl_merge_bound`]; ties go to the lowest `(i, j)`.
pub fn runnalls(mixture: &GaussianMixture, target: usize) -> Result<GaussianMixture> {
    if target == 0 {
        return Err(Error::InvalidArgument("target size must be at least 1".into()));
    }
    let m = mixture.len();
    if m <= target {
        return Ok(mixture.clone());
    }
    let mut slots: Vec<Slot> = mixture.components().iter().map(Slot::new).collect();
    let mut active = vec![true; m];
    // b[i*m + j] for i < j; +∞ for mixed-sign pairs.
    let mut b = vec![f64::INFINITY; m * m];
    let pair = |slots: &[Slot], i: usize, j: usize| {
        if slots[i].same_sign(&slots[j]) {
            bound_fast(&slots[i], &slots[j])
        } else {
            f64::INFINITY
        }
    };
    for i in 0..m {
        for j in (i + 1)..m {
            b[i * m + j] = pair(&slots, i, j);
        }
    }
    let row_min = |b: &[f64], active: &[bool], i: usize| {
        let mut best = (f64::INFINITY, usize::MAX);
        for j in (i + 1)..m {
            if active[j] && b[i * m + j] < best.0 {
                best = (b[i * m + j], j);
            }
        }
        best
    };
    let mut best: Vec<(f64, usize)> = (0..m).map(|i| row_min(&b, &active, i)).collect();

    let mut size = m;
    while size > target {
        let mut pick = (f64::INFINITY, usize::MAX, usize::MAX);
        for i in 0..m {
            if active[i] && best[i].1 != usize::MAX && best[i].0 < pick.0 {
                pick = (best[i].0, i, best[i].1);
            }
        }
        let (i, j) = if pick.1 == usize::MAX {
            // Only mixed-sign pairs remain: take the lowest |w| bound.
            fallback_pair(&slots, &active)
        } else {
            (pick.1, pick.2)
        };

        let (wi, wj) = (slots[i].weight, slots[j].weight);
        let (mean, mut cov) = if wi.abs() + wj.abs() > 0.0 {
            merge_shape(&to_component(&slots[i]), wi.abs(), &to_component(&slots[j]), wj.abs())
        } else {
            (slots[i].mean.clone(), slots[i].cov.clone())
        };
        linalg::symmetrize(&mut cov);
        let logdet = linalg::log_det_spd(&cov).ok_or(Error::Singular)?;
        slots[i] = Slot { weight: wi + wj, mean, cov, logdet };
        active[j] = false;
        size -= 1;

        for k in 0..m {
            if !active[k] || k == i {
                continue;
            }
            let (lo, hi) = if k < i { (k, i) } else { (i, k) };
            b[lo * m + hi] = pair(&slots, lo, hi);
        }
        best[i] = row_min(&b, &active, i);
        for k in 0..i {
            if !active[k] {
                continue;
            }
            let v = b[k * m + i];
            if best[k].1 == j || best[k].1 == i {
                best[k] = row_min(&b, &active, k);
            } else if v < best[k].0 || (v == best[k].0 && i < best[k].1) {
                best[k] = (v, i);
            }
        }
        for k in (i + 1)..m {
            if active[k] && k < j && best[k].1 == j {
                best[k] = row_min(&b, &active, k);
            }
        }
    }

    let components = slots
        .into_iter()
        .zip(active)
        .filter(|(_, a)| *a)
        .map(|(s, _)| GaussianComponent::from_parts(s.weight, s.mean, s.cov))
        .collect::<Result<Vec<_>>>()?;
    Ok(GaussianMixture::from_parts_unchecked(mixture.dimension(), mixture.kind(), components))
}

fn to_component(s: &Slot) -> GaussianComponent {
    GaussianComponent::from_parts(s.weight, s.mean.clone(), s.cov.clone())
        .expect("slot covariance stays positive definite")
}

fn fallback_pair(slots: &[Slot], active: &[bool]) -> (usize, usize) {
    let m = slots.len();
    let mut pick = (f64::INFINITY, 0, 1);
    let mut first = None;
    for i in 0..m {
        if !active[i] {
            continue;
        }
        for j in (i + 1)..m {
            if !active[j] {
                continue;
            }
            first.get_or_insert((i, j));
            let v = bound_fast(&slots[i], &slots[j]);
            if v < pick.0 {
                pick = (v, i, j);
            }
        }
    }
    if pick.0.is_finite() {
        (pick.1, pick.2)
    } else {
        first.expect("at least two active components")
    }
}

/// Distance between the normalized densities of `a` and `b` (weights are
/// ignored).
pub fn pair_distance(a: &GaussianComponent, b: &GaussianComponent, metric: ClusterMetric) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    if metric == ClusterMetric::Euclidean {
        return Ok((a.mean() - b.mean()).norm());
    }
    if a.mean() == b.mean() && a.cov() == b.cov() {
        return Ok(0.0);
    }
    let d = match metric {
        ClusterMetric::Euclidean => unreachable!(),
        ClusterMetric::SymKl => 0.5 * (kl_gauss(a, b)? + kl_gauss(b, a)?),
        ClusterMetric::Jsd => {
            let (mean, cov) = merge_shape(a, 0.5, b, 0.5);
            let mid = GaussianComponent::from_parts(1.0, mean, cov)?;
            0.5 * (kl_gauss(a, &mid)? + kl_gauss(b, &mid)?)
        }
        ClusterMetric::Wasserstein2 => {
            let root_b = linalg::sqrtm_spd(b.cov());
            let cross = linalg::sqrtm_spd(&(&root_b * a.cov() * &root_b));
            let tr = (a.cov() + b.cov() - cross * 2.0).trace();
            ((a.mean() - b.mean()).norm_squared() + tr).max(0.0).sqrt()
        }
        ClusterMetric::Bhattacharyya => {
            let avg = (a.cov() + b.cov()) * 0.5;
            let diff = a.mean() - b.mean();
            let chol = avg.clone().cholesky().ok_or(Error::Singular)?;
            let maha = diff.dot(&chol.solve(&diff));
            let ld = linalg::log_det_spd(&avg).ok_or(Error::Singular)?;
            let la = linalg::log_det_spd(a.cov()).ok_or(Error::Singular)?;
            let lb = linalg::log_det_spd(b.cov()).ok_or(Error::Singular)?;
            0.125 * maha + 0.5 * (ld - 0.5 * (la + lb))
        }
    };
    Ok(d.max(0.0))
}

/// `KL(p || q)` between normalized Gaussians.
fn kl_gauss(p: &GaussianComponent, q: &GaussianComponent) -> Result<f64> {
    let n = p.dim() as f64;
    let chol = q.cov().clone().cholesky().ok_or(Error::Singular)?;
    let tr = chol.solve(p.cov()).trace();
    let diff = q.mean() - p.mean();
    let maha = diff.dot(&chol.solve(&diff));
    let lq = linalg::log_det_spd(q.cov()).ok_or(Error::Singular)?;
    let lp = linalg::log_det_spd(p.cov()).ok_or(Error::Singular)?;
    Ok(0.5 * (tr + maha - n + lq - lp))
}

/// Partitions component indices into at most `k` nonempty clusters with
/// Lloyd iterations under `metric`. Seeding is farthest-point from a
/// seed-chosen first component; centroids are `|w|`-weighted averages of
/// member means and covariances.
pub fn kmeans_cluster(
    mixture: &GaussianMixture,
    k: usize,
    metric: ClusterMetric,
    max_iter: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    let m = mixture.len();
    if k == 0 {
        return Err(Error::InvalidArgument("cluster count must be positive".into()));
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    if k >= m {
        return Ok((0..m).map(|i| vec![i]).collect());
    }
    let comps = mixture.components();
    let shape = |c: &GaussianComponent| c.with_weight(1.0);

    let first = rng::stream(seed, 0).random_range(0..m);
    let mut centroids = vec![shape(&comps[first])];
    let mut nearest: Vec<f64> = comps
        .iter()
        .map(|c| pair_distance(c, &centroids[0], metric))
        .collect::<Result<_>>()?;
    while centroids.len() < k {
        let mut pick = (f64::NEG_INFINITY, 0);
        for (i, &d) in nearest.iter().enumerate() {
            if d > pick.0 {
                pick = (d, i);
            }
        }
        let c = shape(&comps[pick.1]);
        for (i, comp) in comps.iter().enumerate() {
            nearest[i] = nearest[i].min(pair_distance(comp, &c, metric)?);
        }
        centroids.push(c);
    }

    let mut assign = vec![usize::MAX; m];
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for (i, comp) in comps.iter().enumerate() {
            let mut best = (f64::INFINITY, 0);
            for (c, cen) in centroids.iter().enumerate() {
                let d = pair_distance(comp, cen, metric)?;
                if d < best.0 {
                    best = (d, c);
                }
            }
            if assign[i] != best.1 {
                assign[i] = best.1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (c, cen) in centroids.iter_mut().enumerate() {
            if let Some(updated) = centroid(comps, &assign, c) {
                *cen = updated;
            }
        }
    }

    let mut clusters = vec![Vec::new(); k];
    for (i, &c) in assign.iter().enumerate() {
        clusters[c].push(i);
    }
    clusters.retain(|c| !c.is_empty());
    Ok(clusters)
}

fn centroid(comps: &[GaussianComponent], assign: &[usize], cluster: usize) -> Option<GaussianComponent> {
    let members: Vec<&GaussianComponent> =
        comps.iter().zip(assign).filter(|(_, &a)| a == cluster).map(|(c, _)| c).collect();
    if members.is_empty() {
        return None;
    }
    let n = members[0].dim();
    let mut total: f64 = members.iter().map(|c| c.weight().abs()).sum();
    let uniform = total == 0.0;
    if uniform {
        total = members.len() as f64;
    }
    let mut mean = DVector::zeros(n);
    let mut cov = DMatrix::zeros(n, n);
    for c in &members {
        let w = if uniform { 1.0 } else { c.weight().abs() } / total;
        mean += c.mean() * w;
        cov += c.cov() * w;
    }
    GaussianComponent::from_parts(1.0, mean, cov).ok()
}

/// Per-cluster component budgets `max(1, ⌊h·M̃/M⌋)`, trimmed so they never
/// sum past `target`.
pub(crate) fn cluster_budgets(sizes: &[usize], total: usize, target: usize) -> Vec<usize> {
    let mut budgets: Vec<usize> = sizes.iter().map(|&h| (h * target / total).max(1)).collect();
    while budgets.iter().sum::<usize>() > target {
        let (idx, _) = budgets
            .iter()
            .enumerate()
            .filter(|(_, &b)| b > 1)
            .fold((usize::MAX, 0), |acc, (i, &b)| if b > acc.1 { (i, b) } else { acc });
        if idx == usize::MAX {
            break;
        }
        budgets[idx] -= 1;
    }
    budgets
}

/// Clustering-based condensation: k-means into `K` submixtures, Runnalls
/// within each to a size-proportional budget, then concatenation in cluster
/// order.
pub fn cluster_condense(mixture: &GaussianMixture, config: &CondenseConfig) -> Result<GaussianMixture> {
    config.validate()?;
    let m = mixture.len();
    if m <= config.target_size {
        return Ok(mixture.clone());
    }
    let clusters = kmeans_cluster(mixture, config.cluster_count, config.metric, config.kmeans_max_iter, config.seed)?;
    let sizes: Vec<usize> = clusters.iter().map(Vec::len).collect();
    let budgets = cluster_budgets(&sizes, m, config.target_size);
    let comps = mixture.components();
    let parts: Vec<GaussianMixture> = clusters
        .par_iter()
        .zip(budgets.par_iter())
        .map(|(idx, &budget)| {
            let sub = GaussianMixture::from_parts_unchecked(
                mixture.dimension(),
                mixture.kind(),
                idx.iter().map(|&i| comps[i].clone()).collect(),
            );
            runnalls(&sub, budget)
        })
        .collect::<Result<_>>()?;
    let components = parts.into_iter().flat_map(GaussianMixture::into_components).collect();
    Ok(GaussianMixture::from_parts_unchecked(mixture.dimension(), mixture.kind(), components))
}
