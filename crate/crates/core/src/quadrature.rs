//! Gauss–Legendre quadrature on bounded boxes.
//!
//! Used as an independent numerical reference for the closed-form Gaussian
//! algebra and the variational bounds (it never calls into them).

/// Nodes and weights of an `order`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..(n + 1) / 2 {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Points and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (mid + half * x, w * half))
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite rule with `panels` equal panels of an `order`-point rule.
pub fn composite_1d(a: f64, b: f64, panels: usize, order: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let rule = GaussLegendre::new(order);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let lo = a + h * p as f64;
            rule.integrate(lo, lo + h, &mut f)
        })
        .sum()
}

/// Adaptive composite rule. Panels are bisected until the 20-point estimate
/// of a panel agrees with the sum over its halves to within the panel's share
/// of `tol · |∫f|` (the magnitude is estimated from a fixed 64-panel pass).
pub fn adaptive_1d(a: f64, b: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    let rule = GaussLegendre::new(20);
    let rough = composite_1d(a, b, 64, 10, &f).abs().max(1e-300);
    let budget = tol * rough;
    let width = b - a;
    let mut stack = vec![(a, b, rule.integrate(a, b, &f), 0usize)];
    let mut total = 0.0;
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = rule.integrate(lo, mid, &f);
        let right = rule.integrate(mid, hi, &f);
        let err = (left + right - whole).abs();
        if depth >= 40 || err <= budget * (hi - lo) / width {
            total += left + right;
        } else {
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    total
}

/// Tensor-product composite rule on `[a0,b0] × [a1,b1]`.
pub fn composite_2d(
    x: (f64, f64),
    y: (f64, f64),
    panels: usize,
    order: usize,
    mut f: impl FnMut(f64, f64) -> f64,
) -> f64 {
    let rule = GaussLegendre::new(order);
    let hx = (x.1 - x.0) / panels as f64;
    let hy = (y.1 - y.0) / panels as f64;
    let mut acc = 0.0;
    for px in 0..panels {
        let xlo = x.0 + hx * px as f64;
        for (xv, xw) in rule.mapped(xlo, xlo + hx) {
            for py in 0..panels {
                let ylo = y.0 + hy * py as f64;
                for (yv, yw) in rule.mapped(ylo, ylo + hy) {
                    acc += xw * yw * f(xv, yv);
                }
            }
        }
    }
    acc
}
