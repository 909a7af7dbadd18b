//! Gauss-Legendre quadrature with cached node tables.
//!
//! Nodes and weights on [-1, 1] are computed once per order by Newton
//! iteration on the Legendre polynomial and cached for reuse; pricing code
//! integrates on arbitrary intervals via the affine map.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    fn compute(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Chebyshev initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_deriv(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Cached rule of the given order.
    pub fn get(n: usize) -> &'static GaussLegendre {
        static CACHE: OnceLock<Mutex<HashMap<usize, &'static GaussLegendre>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap();
        guard
            .entry(n)
            .or_insert_with(|| Box::leak(Box::new(GaussLegendre::compute(n))))
    }

    /// Integrate `f` over [a, b] with this rule.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (b + a);
        let h = 0.5 * (b - a);
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(c + h * x);
        }
        acc * h
    }
}

fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrate `f` over [a, b], doubling the node count from `n0` until two
/// successive estimates agree to `rel_tol` (relative to the larger magnitude)
/// or `n_max` is reached. Returns the finer estimate.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    n0: usize,
    n_max: usize,
    rel_tol: f64,
    mut f: F,
) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut n = n0;
    let mut prev = GaussLegendre::get(n).integrate(a, b, &mut f);
    loop {
        n *= 2;
        let cur = GaussLegendre::get(n).integrate(a, b, &mut f);
        let scale = cur.abs().max(prev.abs()).max(1e-300);
        if (cur - prev).abs() <= rel_tol * scale || n >= n_max {
            return cur;
        }
        prev = cur;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exactness() {
        // n-point rule is exact for degree 2n-1.
        let rule = GaussLegendre::get(4);
        let exact = 2.0 / 8.0 * (1.0 - (-1.0f64).powi(8)) + 2.0 / 3.0; // int x^7 dx = 0 over [-1,1]; x^2 -> 2/3
        let got = rule.integrate(-1.0, 1.0, |x| x.powi(7) + x * x);
        assert!((got - 2.0 / 3.0).abs() < 1e-14, "got {got}, exact {exact}");
    }

    #[test]
    fn weights_sum_to_interval_length() {
        for n in [1, 2, 8, 32, 64, 128] {
            let rule = GaussLegendre::get(n);
            let s: f64 = rule.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n}: weight sum {s}");
        }
    }

    #[test]
    fn adaptive_matches_closed_form() {
        let got = integrate_adaptive(0.0, 2.0, 8, 512, 1e-12, |x| (3.0 * x).exp());
        let exact = ((6.0f64).exp() - 1.0) / 3.0;
        assert!((got / exact - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(integrate_adaptive(1.0, 1.0, 8, 64, 1e-9, |_| 1.0), 0.0);
    }
}
