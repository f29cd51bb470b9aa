//! Two-sample tests for comparing batches.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    /// Two-sided p-value.
    pub p: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Welch's unequal-variance t-test with Welch–Satterthwaite degrees of
/// freedom. Identical constant samples give `t = 0`, `p = 1`.
pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument("each sample needs at least two values".into()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        if ma == mb {
            return Ok(TestResult { statistic: 0.0, p: 1.0 });
        }
        return Err(Error::InvalidArgument("both samples have zero variance".into()));
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(TestResult { statistic: t, p })
}

/// Pooled two-proportion z-test for `k_a / n_a` versus `k_b / n_b`.
pub fn proportion_ztest(k_a: usize, n_a: usize, k_b: usize, n_b: usize) -> Result<TestResult> {
    if n_a == 0 || n_b == 0 || k_a > n_a || k_b > n_b {
        return Err(Error::InvalidArgument("counts must satisfy 0 ≤ k ≤ n, n > 0".into()));
    }
    let (pa, pb) = (k_a as f64 / n_a as f64, k_b as f64 / n_b as f64);
    let pool = (k_a + k_b) as f64 / (n_a + n_b) as f64;
    let se = (pool * (1.0 - pool) * (1.0 / n_a as f64 + 1.0 / n_b as f64)).sqrt();
    if se == 0.0 {
        return Ok(TestResult { statistic: 0.0, p: 1.0 });
    }
    let z = (pa - pb) / se;
    let p = 2.0 * Normal::standard().cdf(-z.abs());
    Ok(TestResult { statistic: z, p })
}

/// Standard error of the difference of two sample means.
pub fn pooled_se(a: &[f64], b: &[f64]) -> f64 {
    let (_, va) = mean_var(a);
    let (_, vb) = mean_var(b);
    (va / a.len() as f64 + vb / b.len() as f64).sqrt()
}
