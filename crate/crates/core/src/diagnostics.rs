//! Self-checks shared by the command-line tools and the test suites: VB
//! bound probes against quadrature, and condensation benchmarks against
//! full Runnalls reduction.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::condense::{cluster_condense, runnalls, ClusterMetric, CondenseConfig};
use crate::error::{Error, Result};
use crate::gm::{mixture_isd, random_mixture, GaussianComponent, MixtureGenSpec};
use crate::quadrature::{composite_1d, composite_2d};
use crate::rng;
use crate::softmax::{SoftmaxClass, SoftmaxModel};
use crate::vb::{vb_gaussian_product, VbOptions};

/// A random `(prior, softmax, class)` triple.
#[derive(Debug, Clone, PartialEq)]
pub struct VbProbe {
    pub case: usize,
    pub prior: GaussianComponent,
    pub model: SoftmaxModel,
    pub class: usize,
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Distribution::<f64>::sample(&StandardNormal, rng)
}

/// Probe `case` under `seed`: odd cases are 2-D, even cases 1-D; 2 to 4
/// classes with standard-normal-scaled weights and biases.
pub fn vb_probe(seed: u64, case: usize) -> Result<VbProbe> {
    let mut rng = rng::stream(seed, case as u64);
    let dim = 1 + case % 2;
    let classes = rng.random_range(2..=4usize);
    let softmax = (0..classes)
        .map(|_| SoftmaxClass::new((0..dim).map(|_| 2.0 * normal(&mut rng)).collect(), normal(&mut rng)))
        .collect();
    let names: Vec<String> = (0..classes).map(|c| format!("c{c}")).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let model = SoftmaxModel::with_class_names(dim, softmax, &names)?;
    let mean: Vec<f64> = (0..dim).map(|_| 1.5 * normal(&mut rng)).collect();
    let a = DMatrix::from_fn(dim, dim, |_, _| normal(&mut rng));
    let cov = &a * a.transpose() * 0.5 + DMatrix::identity(dim, dim) * 0.1;
    let prior = GaussianComponent::new(1.0, DVector::from_vec(mean), cov)?;
    let class = rng.random_range(0..classes);
    Ok(VbProbe { case, prior, model, class })
}

/// `∫ φ(s | μ, Σ) p(class | s) ds` by Gauss–Legendre quadrature in the
/// whitened coordinates of the prior (1-D and 2-D only).
pub fn softmax_gaussian_mass(prior: &GaussianComponent, model: &SoftmaxModel, class: usize) -> Result<f64> {
    let n = prior.dim();
    let chol = prior.cov().clone().cholesky().ok_or(Error::NotPositiveDefinite)?.unpack();
    let mu = prior.mean();
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let prob = |s: &[f64]| model.class_probs(s).map(|p| p[class]).unwrap_or(f64::NAN);
    const SPAN: f64 = 9.0;
    let value = match n {
        1 => composite_1d(-SPAN, SPAN, 72, 12, |z| phi(z) * prob(&[mu[0] + chol[(0, 0)] * z])),
        2 => composite_2d((-SPAN, SPAN), (-SPAN, SPAN), 48, 10, |z0, z1| {
            let s = [mu[0] + chol[(0, 0)] * z0, mu[1] + chol[(1, 0)] * z0 + chol[(1, 1)] * z1];
            phi(z0) * phi(z1) * prob(&s)
        }),
        _ => return Err(Error::InvalidArgument("quadrature oracle supports 1-D and 2-D only".into())),
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidArgument("non-finite quadrature value".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VbCheckRow {
    pub case: usize,
    pub dimension: usize,
    pub c_quadrature: f64,
    pub c_hat: f64,
    /// `C − Ĉ`; nonnegative up to quadrature error when the bound holds.
    pub gap: f64,
    pub iterations: usize,
    /// `log Ĉ` never decreased between EM iterations.
    pub monotone: bool,
}

/// Runs `cases` probes; rows are ordered by case.
pub fn vb_check(cases: usize, seed: u64, opts: VbOptions) -> Result<Vec<VbCheckRow>> {
    (0..cases)
        .into_par_iter()
        .map(|case| {
            let probe = vb_probe(seed, case)?;
            let exact = softmax_gaussian_mass(&probe.prior, &probe.model, probe.class)?;
            let vb = vb_gaussian_product(&probe.prior, &probe.model, probe.class, opts)?;
            let monotone = vb.trace.windows(2).all(|w| w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0));
            Ok(VbCheckRow {
                case,
                dimension: probe.prior.dim(),
                c_quadrature: exact,
                c_hat: vb.mass(),
                gap: exact - vb.mass(),
                iterations: vb.iterations,
                monotone,
            })
        })
        .collect()
}

pub const VB_CHECK_CSV_HEADER: &str = "case,dimension,cQuadrature,cHat,gap,iterations";

pub fn vb_check_csv_row(r: &VbCheckRow) -> String {
    format!("{},{},{},{},{},{}", r.case, r.dimension, r.c_quadrature, r.c_hat, r.gap, r.iterations)
}

/// One benchmark sweep: every metric × dimension, `runs` random inputs each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchSpec {
    pub metrics: Vec<ClusterMetric>,
    pub dimensions: Vec<usize>,
    pub runs: usize,
    pub input_size: usize,
    pub target_size: usize,
    pub cluster_count: usize,
    pub seed: u64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            metrics: ClusterMetric::ALL.to_vec(),
            dimensions: vec![1, 2, 4],
            runs: 10,
            input_size: 400,
            target_size: 20,
            cluster_count: 4,
            seed: 0,
        }
    }
}

/// Deterministic part of a benchmark row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub metric: ClusterMetric,
    pub dimension: usize,
    pub run: usize,
    pub input_size: usize,
    pub output_size: usize,
    pub weight_error: f64,
    pub nisd: f64,
    pub runnalls_nisd: f64,
}

/// Wall-clock part of a benchmark row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchTiming {
    pub hybrid_secs: f64,
    pub runnalls_secs: f64,
}

/// Runs `spec` sequentially so timings are not distorted by sharing cores.
/// Inputs depend on `(seed, dimension, run)` only, so every metric sees the
/// same mixtures, and the full Runnalls reference is computed once per input.
pub fn condense_bench(spec: &BenchSpec) -> Result<Vec<(BenchRow, BenchTiming)>> {
    if spec.target_size == 0 || spec.input_size < spec.target_size {
        return Err(Error::InvalidArgument("benchmark needs 0 < target ≤ input size".into()));
    }
    let mut rows = Vec::new();
    for &dim in &spec.dimensions {
        for run in 0..spec.runs {
            let input_seed = rng::substream(spec.seed, dim as u64, run as u64).random::<u64>();
            let input = random_mixture(&MixtureGenSpec::benchmark(dim, spec.input_size, input_seed))?;
            let start = Instant::now();
            let reference = runnalls(&input, spec.target_size)?;
            let runnalls_secs = start.elapsed().as_secs_f64();
            let runnalls_nisd = mixture_isd(&input, &reference, true)?;
            for &metric in &spec.metrics {
                let config = CondenseConfig {
                    target_size: spec.target_size,
                    cluster_count: spec.cluster_count,
                    metric,
                    seed: input_seed,
                    ..CondenseConfig::default()
                };
                let start = Instant::now();
                let out = cluster_condense(&input, &config)?;
                let hybrid_secs = start.elapsed().as_secs_f64();
                rows.push((
                    BenchRow {
                        metric,
                        dimension: dim,
                        run,
                        input_size: spec.input_size,
                        output_size: out.len(),
                        weight_error: (out.total_weight() - input.total_weight()).abs(),
                        nisd: mixture_isd(&input, &out, true)?,
                        runnalls_nisd,
                    },
                    BenchTiming { hybrid_secs, runnalls_secs },
                ));
            }
        }
    }
    Ok(rows)
}

pub const BENCH_CSV_HEADER: &str = "metric,dimension,run,inputSize,outputSize,weightError,nisd,runnallsNisd";
pub const BENCH_TIMING_CSV_HEADER: &str = "metric,dimension,run,hybridSecs,runnallsSecs";

pub fn bench_csv_row(r: &BenchRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        r.metric.name(),
        r.dimension,
        r.run,
        r.input_size,
        r.output_size,
        r.weight_error,
        r.nisd,
        r.runnalls_nisd
    )
}

pub fn bench_timing_csv_row(r: &BenchRow, t: &BenchTiming) -> String {
    format!("{},{},{},{},{}", r.metric.name(), r.dimension, r.run, t.hybrid_secs, t.runnalls_secs)
}
