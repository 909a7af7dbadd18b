//! Multivariate standard-normal CDF and related kernels.
//!
//! The closed-form prices in this crate reduce to CDFs of correlated standard
//! normals whose correlation comes from nested observation times,
//! `r_ij = sqrt(v_i / v_j)` for accumulated variances `v_i <= v_j`, possibly
//! with the last coordinate sign-flipped. The kernel here is general:
//! dimension 1 and 2 use scalar/bivariate routines, higher dimensions use a
//! Cholesky-reordered separation-of-variables transform integrated with a
//! randomly shifted rank-1 lattice. Shifts come from a fixed seed, so results
//! are deterministic for fixed inputs.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Scalar normal helpers
// ---------------------------------------------------------------------------

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal inverse CDF. Arguments are clamped away from {0, 1}.
pub fn norm_inv_cdf(p: f64) -> f64 {
    let p = p.clamp(1e-300, 1.0 - 1e-16);
    -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p)
}

// ---------------------------------------------------------------------------
// Correlation matrices
// ---------------------------------------------------------------------------

/// Correlation matrix: symmetric, unit diagonal, positive definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrMatrix {
    dim: usize,
    entries: Vec<f64>, // row-major dim x dim
}

impl CorrMatrix {
    /// Validate and wrap a dense symmetric matrix.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("correlation matrix must have dim >= 1"));
        }
        if entries.len() != dim * dim {
            return Err(Error::domain(
                "correlation matrix entries have wrong length",
            ));
        }
        for i in 0..dim {
            if (entries[i * dim + i] - 1.0).abs() > 1e-12 {
                return Err(Error::domain("correlation matrix diagonal must be 1"));
            }
            for j in 0..i {
                let a = entries[i * dim + j];
                let b = entries[j * dim + i];
                if (a - b).abs() > 1e-12 {
                    return Err(Error::domain("correlation matrix must be symmetric"));
                }
                if !a.is_finite() || a.abs() >= 1.0 {
                    return Err(Error::domain(
                        "off-diagonal correlations must lie strictly inside (-1, 1)",
                    ));
                }
            }
        }
        let m = CorrMatrix { dim, entries };
        if cholesky(&m.entries, dim).is_none() {
            return Err(Error::domain("correlation matrix is not positive definite"));
        }
        Ok(m)
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        CorrMatrix { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    fn sub_matrix(&self, keep: &[usize]) -> CorrMatrix {
        let d = keep.len();
        let mut entries = vec![0.0; d * d];
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                entries[a * d + b] = self.entry(i, j);
            }
        }
        CorrMatrix { dim: d, entries }
    }
}

/// Nested-time correlation: entries `r_ij = sqrt(v_i / v_j)` for `i <= j`,
/// where `v_i` is the variance accumulated from `t` to `obs_times[i]`.
pub fn nested_corr<F: Fn(f64) -> f64>(
    t: f64,
    obs_times: &[f64],
    variance_fn: F,
) -> Result<CorrMatrix> {
    if obs_times.is_empty() {
        return Err(Error::domain("nested_corr: need at least one time"));
    }
    if obs_times[0] <= t || obs_times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain(
            "nested_corr: observation times must be strictly ascending and after t",
        ));
    }
    let vars: Vec<f64> = obs_times.iter().map(|&ti| variance_fn(ti)).collect();
    if vars[0] <= 0.0 || vars.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain(
            "nested_corr: accumulated variance must be strictly increasing and positive",
        ));
    }
    Ok(corr_from_variances(&vars, None))
}

/// Build the nested correlation directly from accumulated variances, with an
/// optional sign per coordinate (flipping coordinate i negates row/column i).
pub(crate) fn corr_from_variances(vars: &[f64], signs: Option<&[f64]>) -> CorrMatrix {
    let d = vars.len();
    let mut entries = vec![0.0; d * d];
    for i in 0..d {
        entries[i * d + i] = 1.0;
        for j in i + 1..d {
            let mut r = (vars[i] / vars[j]).sqrt();
            if let Some(s) = signs {
                r *= s[i] * s[j];
            }
            entries[i * d + j] = r;
            entries[j * d + i] = r;
        }
    }
    CorrMatrix { dim: d, entries }
}

/// Negate the off-diagonal entries of the last row and column.
pub fn flip_last_sign(corr: &CorrMatrix) -> CorrMatrix {
    let d = corr.dim;
    let mut out = corr.clone();
    for i in 0..d - 1 {
        out.entries[i * d + (d - 1)] = -out.entries[i * d + (d - 1)];
        out.entries[(d - 1) * d + i] = -out.entries[(d - 1) * d + i];
    }
    out
}

// ---------------------------------------------------------------------------
// MVN problems
// ---------------------------------------------------------------------------

/// Upper-limit MVN problem: `P(Y_1 <= a_1, ..., Y_m <= a_m)` for zero-mean,
/// unit-variance Gaussians with the given correlation. Limits may be
/// `f64::INFINITY` (coordinate dropped) or `f64::NEG_INFINITY` (probability 0).
#[derive(Debug, Clone)]
pub struct MvnProblem {
    pub limits: Vec<f64>,
    pub corr: CorrMatrix,
}

impl MvnProblem {
    pub fn new(limits: Vec<f64>, corr: CorrMatrix) -> Result<Self> {
        if limits.len() != corr.dim() {
            return Err(Error::domain(
                "limits length must equal correlation dimension",
            ));
        }
        if limits.iter().any(|a| a.is_nan()) {
            return Err(Error::domain("limits must not be NaN"));
        }
        Ok(MvnProblem { limits, corr })
    }
}

/// CDF value with an error estimate (three standard errors of the shifted
/// lattice estimates; effectively machine precision for dimensions 1 and 2).
#[derive(Debug, Clone, Copy)]
pub struct MvnResult {
    pub value: f64,
    pub error: f64,
}

/// Dimension cap for `mvn_cdf`, overridable via `CBOND_MAX_MVN_DIM`.
pub fn max_mvn_dim() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var("CBOND_MAX_MVN_DIM")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(12)
    })
}

/// Multivariate standard normal CDF to absolute tolerance `tol`.
///
/// Deterministic for fixed inputs; the returned error estimate is a
/// high-confidence bound on the absolute error.
pub fn mvn_cdf(problem: &MvnProblem, tol: f64) -> Result<MvnResult> {
    if tol <= 0.0 {
        return Err(Error::domain("mvn_cdf: tol must be positive"));
    }
    if problem.limits.contains(&f64::NEG_INFINITY) {
        return Ok(MvnResult {
            value: 0.0,
            error: 0.0,
        });
    }
    // Drop +inf coordinates: they marginalize away exactly.
    let keep: Vec<usize> = (0..problem.limits.len())
        .filter(|&i| problem.limits[i].is_finite())
        .collect();
    let limits: Vec<f64> = keep.iter().map(|&i| problem.limits[i]).collect();
    let m = limits.len();
    if m == 0 {
        return Ok(MvnResult {
            value: 1.0,
            error: 0.0,
        });
    }
    let cap = max_mvn_dim();
    if m > cap {
        return Err(Error::Dimension { dim: m, max: cap });
    }
    if m == 1 {
        return Ok(MvnResult {
            value: norm_cdf(limits[0]),
            error: 1e-15,
        });
    }
    let corr = if keep.len() == problem.corr.dim() {
        problem.corr.clone()
    } else {
        problem.corr.sub_matrix(&keep)
    };
    if m == 2 {
        let value = bvn_cdf(limits[0], limits[1], corr.entry(0, 1));
        return Ok(MvnResult {
            value,
            error: 5e-15,
        });
    }
    // The nested-time correlations produced by the pricing formulas have the
    // Markov product structure r_ij = r_ik r_kj; those reduce to a chain of
    // one-dimensional convolutions, far cheaper and more accurate than the
    // lattice at these dimensions.
    if let Some(blocks) = markov_blocks(&corr) {
        return markov_cdf(&limits, &blocks, tol);
    }
    sov_lattice(&limits, &corr, tol)
}

// ---------------------------------------------------------------------------
// Markov-chain evaluation for product correlations
// ---------------------------------------------------------------------------

/// A maximal run of coordinates with `corr(i,j) = s_i s_j sqrt(v_i / v_j)`;
/// coordinates in different blocks are independent.
struct MarkovBlock {
    start: usize,
    vars: Vec<f64>,
    signs: Vec<f64>,
}

/// Detect the product structure. Interior transitions with nearly coincident
/// variances are rejected (the convolution grid could not resolve them; such
/// inputs fall back to the lattice).
fn markov_blocks(corr: &CorrMatrix) -> Option<Vec<MarkovBlock>> {
    let m = corr.dim();
    let mut blocks: Vec<MarkovBlock> = Vec::new();
    let mut cur = MarkovBlock {
        start: 0,
        vars: vec![1.0],
        signs: vec![1.0],
    };
    for i in 1..m {
        let rho = corr.entry(i - 1, i);
        if rho.abs() < 1e-13 {
            blocks.push(std::mem::replace(
                &mut cur,
                MarkovBlock {
                    start: i,
                    vars: vec![1.0],
                    signs: vec![1.0],
                },
            ));
            continue;
        }
        let prev_v = *cur.vars.last().unwrap();
        let prev_s = *cur.signs.last().unwrap();
        cur.vars.push(prev_v / (rho * rho));
        cur.signs.push(prev_s * rho.signum());
    }
    blocks.push(cur);
    // Validate every pair against the implied product form.
    for b in &blocks {
        for i in 0..b.vars.len() {
            for j in i + 1..b.vars.len() {
                let expected = b.signs[i] * b.signs[j] * (b.vars[i] / b.vars[j]).sqrt();
                if (corr.entry(b.start + i, b.start + j) - expected).abs() > 5e-12 {
                    return None;
                }
            }
        }
        // Interior (non-final) transitions must be well separated.
        for i in 0..b.vars.len().saturating_sub(2) {
            if b.vars[i + 1] - b.vars[i] < 1e-3 * b.vars[i + 1] {
                return None;
            }
        }
    }
    // Cross-block independence.
    let mut starts: Vec<(usize, usize)> = blocks.iter().map(|b| (b.start, b.vars.len())).collect();
    starts.sort_unstable();
    for w in 0..blocks.len() {
        let (s1, l1) = starts[w];
        for &(s2, l2) in &starts[w + 1..] {
            for i in s1..s1 + l1 {
                for j in s2..s2 + l2 {
                    if corr.entry(i, j).abs() > 5e-12 {
                        return None;
                    }
                }
            }
        }
    }
    Some(blocks)
}

const MARKOV_GRIDS: [usize; 4] = [40, 64, 96, 144];
const MARKOV_REACH: f64 = 8.3;

/// CDF of one Markov block on a Gauss-Legendre grid of `g` points per level.
///
/// The block is the law of a Brownian path observed at increasing variances;
/// each coordinate constrains the path above or below a level. The last
/// constraint is applied analytically as a conditional-normal factor (so a
/// barely-later final observation stays exact), with the integration panel
/// split at the kink it introduces.
fn markov_block_cdf(limits: &[f64], block: &MarkovBlock, g: usize) -> f64 {
    let n = block.vars.len();
    if n == 1 {
        return norm_cdf(limits[block.start]);
    }
    let rule = crate::math::quad::GaussLegendre::get(g);
    // W-space thresholds: sign +1 keeps W <= b, sign -1 keeps W >= b.
    let bounds: Vec<f64> = (0..n)
        .map(|i| block.signs[i] * limits[block.start + i] * block.vars[i].sqrt())
        .collect();

    // Integration interval for level i (all but the final constraint).
    let interval = |i: usize| -> Option<(f64, f64)> {
        let reach = MARKOV_REACH * block.vars[i].sqrt();
        let (mut lo, mut hi) = (-reach, reach);
        if block.signs[i] > 0.0 {
            hi = hi.min(bounds[i]);
        } else {
            lo = lo.max(bounds[i]);
        }
        (lo < hi).then_some((lo, hi))
    };

    // Accumulated weighted density on levels 0 .. n-3.
    let sqrt_v0 = block.vars[0].sqrt();
    let mut nodes: Vec<f64> = Vec::with_capacity(g);
    let mut f: Vec<f64> = Vec::with_capacity(g);
    let Some((lo0, hi0)) = interval(0) else {
        return 0.0;
    };
    let (c0, h0) = (0.5 * (hi0 + lo0), 0.5 * (hi0 - lo0));
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let wpt = c0 + h0 * x;
        nodes.push(wpt);
        f.push(w * h0 * norm_pdf(wpt / sqrt_v0) / sqrt_v0);
    }
    for i in 1..n.saturating_sub(2) {
        let Some((lo, hi)) = interval(i) else {
            return 0.0;
        };
        let dv = block.vars[i] - block.vars[i - 1];
        let sd = dv.sqrt();
        let (c, h) = (0.5 * (hi + lo), 0.5 * (hi - lo));
        let mut new_nodes = Vec::with_capacity(g);
        let mut new_f = Vec::with_capacity(g);
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let wp = c + h * x;
            let mut acc = 0.0;
            for (wq, fq) in nodes.iter().zip(&f) {
                acc += fq * norm_pdf((wp - wq) / sd);
            }
            new_nodes.push(wp);
            new_f.push(w * h * acc / sd);
        }
        nodes = new_nodes;
        f = new_f;
    }

    // The final constraint enters analytically as the conditional-normal
    // factor, which keeps a barely-later final observation exact. The
    // penultimate level is re-integrated with a panel split at the kink the
    // factor introduces.
    let sd_last = (block.vars[n - 1] - block.vars[n - 2]).sqrt();
    let b_last = bounds[n - 1];
    let s_last = block.signs[n - 1];
    let factor = |w: f64| {
        if s_last > 0.0 {
            norm_cdf((b_last - w) / sd_last)
        } else {
            norm_cdf((w - b_last) / sd_last)
        }
    };
    let Some((lo, hi)) = interval(n - 2) else {
        return 0.0;
    };
    // Partition so the factor's transition zone around the threshold gets its
    // own panels at its own scale.
    let mut cuts = vec![lo];
    for c in [b_last - 8.0 * sd_last, b_last, b_last + 8.0 * sd_last] {
        if c > lo && c < hi {
            cuts.push(c);
        }
    }
    cuts.push(hi);
    let segments: Vec<(f64, f64)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();
    // Density of the penultimate level at an arbitrary point.
    let penultimate_density = |wp: f64| -> f64 {
        if n == 2 {
            norm_pdf(wp / sqrt_v0) / sqrt_v0
        } else {
            let sd = (block.vars[n - 2] - block.vars[n - 3]).sqrt();
            let mut acc = 0.0;
            for (wq, fq) in nodes.iter().zip(&f) {
                acc += fq * norm_pdf((wp - wq) / sd);
            }
            acc / sd
        }
    };
    let mut total = 0.0;
    for &(seg_lo, seg_hi) in &segments {
        let (c, h) = (0.5 * (seg_hi + seg_lo), 0.5 * (seg_hi - seg_lo));
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let wp = c + h * x;
            total += w * h * penultimate_density(wp) * factor(wp);
        }
    }
    total
}

fn markov_cdf(limits: &[f64], blocks: &[MarkovBlock], tol: f64) -> Result<MvnResult> {
    let mut prev = f64::NAN;
    let mut result = MvnResult {
        value: 0.0,
        error: f64::INFINITY,
    };
    for (step, &g) in MARKOV_GRIDS.iter().enumerate() {
        let mut p = 1.0;
        for b in blocks {
            p *= markov_block_cdf(limits, b, g);
        }
        if step > 0 {
            let err = (p - prev).abs().max(1e-14);
            result = MvnResult {
                value: p.clamp(0.0, 1.0),
                error: err,
            };
            if err <= tol.max(2e-14) {
                return Ok(result);
            }
        }
        prev = p;
    }
    Ok(result)
}

/// Density-weighted slice of the MVN with coordinate `index` pinned at its
/// limit: `phi(a_i) * P(Y_j <= a_j for j != i | Y_i = a_i)`. This is the
/// partial derivative of `mvn_cdf` with respect to `a_i`.
pub fn mvn_boundary_slice(problem: &MvnProblem, index: usize, tol: f64) -> Result<f64> {
    let m = problem.limits.len();
    if index >= m {
        return Err(Error::domain("mvn_boundary_slice: index out of range"));
    }
    let ai = problem.limits[index];
    if !ai.is_finite() {
        return Err(Error::domain(
            "mvn_boundary_slice: pinned limit must be finite",
        ));
    }
    let density = norm_pdf(ai);
    if m == 1 {
        return Ok(density);
    }
    // Condition the remaining coordinates on Y_index = a_i.
    let others: Vec<usize> = (0..m).filter(|&j| j != index).collect();
    let d = others.len();
    let mut limits = Vec::with_capacity(d);
    let mut sigma = Vec::with_capacity(d);
    for &j in &others {
        let r = problem.corr.entry(j, index);
        let s = (1.0 - r * r).max(0.0).sqrt();
        if s == 0.0 {
            return Err(Error::domain("mvn_boundary_slice: degenerate correlation"));
        }
        sigma.push(s);
        limits.push((problem.limits[j] - r * ai) / s);
    }
    let mut entries = vec![0.0; d * d];
    for a in 0..d {
        entries[a * d + a] = 1.0;
        for b in 0..a {
            let (ja, jb) = (others[a], others[b]);
            let r = (problem.corr.entry(ja, jb)
                - problem.corr.entry(ja, index) * problem.corr.entry(jb, index))
                / (sigma[a] * sigma[b]);
            let r = r.clamp(-1.0 + 1e-14, 1.0 - 1e-14);
            entries[a * d + b] = r;
            entries[b * d + a] = r;
        }
    }
    let cond = MvnProblem {
        limits,
        corr: CorrMatrix { dim: d, entries },
    };
    Ok(density * mvn_cdf(&cond, tol)?.value)
}

// ---------------------------------------------------------------------------
// Bivariate CDF (Drezner-Wesolowsky / Genz)
// ---------------------------------------------------------------------------

// Gauss-Legendre half-rules used by the bivariate routine; the full rule
// evaluates at 1 -/+ x for each listed (weight, node) pair.
#[allow(clippy::excessive_precision)]
const GL6: [(f64, f64); 3] = [
    (0.1713244923791705, -0.9324695142031522),
    (0.3607615730481384, -0.6612093864662647),
    (0.4679139345726904, -0.2386191860831970),
];
#[allow(clippy::excessive_precision)]
const GL12: [(f64, f64); 6] = [
    (0.04717533638651177, -0.9815606342467191),
    (0.1069393259953183, -0.9041172563704750),
    (0.1600783285433464, -0.7699026741943050),
    (0.2031674267230659, -0.5873179542866171),
    (0.2334925365383547, -0.3678314989981802),
    (0.2491470458134029, -0.1252334085114692),
];
#[allow(clippy::excessive_precision)]
const GL20: [(f64, f64); 10] = [
    (0.01761400713915212, -0.9931285991850949),
    (0.04060142980038694, -0.9639719272779138),
    (0.06267204833410906, -0.9122344282513259),
    (0.08327674157670475, -0.8391169718222188),
    (0.1019301198172404, -0.7463319064601508),
    (0.1181945319615184, -0.6360536807265150),
    (0.1316886384491766, -0.5108670019508271),
    (0.1420961093183821, -0.3737060887154196),
    (0.1491729864726037, -0.2277858511416451),
    (0.1527533871307259, -0.07652652113349733),
];

fn bvn_quadrature(rho_abs: f64) -> &'static [(f64, f64)] {
    if rho_abs < 0.3 {
        &GL6
    } else if rho_abs < 0.75 {
        &GL12
    } else {
        &GL20
    }
}

/// Bivariate standard normal CDF `P(X <= h, Y <= k)` with correlation `rho`.
///
/// Moderate correlations use the Drezner-Wesolowsky single integral; `rho`
/// close to 1 uses the Genz expansion around the perfectly correlated case,
/// and negative strong correlation reduces to it through the complement
/// identity `P(X<=h, Y<=k; rho) = Phi(h) - P(X<=h, Y<=-k; -rho)`.
pub fn bvn_cdf(h: f64, k: f64, rho: f64) -> f64 {
    let p = if rho.abs() <= 0.925 {
        bvn_moderate(h, k, rho)
    } else if rho > 0.0 {
        bvn_strong_positive(h, k, rho)
    } else {
        norm_cdf(h) - bvn_strong_positive(h, -k, -rho)
    };
    p.clamp(0.0, 1.0)
}

fn bvn_moderate(h: f64, k: f64, rho: f64) -> f64 {
    let mut bvn = 0.0;
    if rho != 0.0 {
        let hs = 0.5 * (h * h + k * k);
        let hk = h * k;
        let asr = 0.5 * rho.asin();
        for &(w, x) in bvn_quadrature(rho.abs()) {
            for is in [-1.0, 1.0] {
                let sn = (asr * (1.0 + is * x)).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn *= asr / (2.0 * std::f64::consts::PI);
    }
    bvn + norm_cdf(h) * norm_cdf(k)
}

/// `P(X <= h, Y <= k)` for 0.925 < rho < 1, via `P(X > -h, Y > -k)`.
fn bvn_strong_positive(h: f64, k: f64, rho: f64) -> f64 {
    let sqrt_two_pi = (2.0 * std::f64::consts::PI).sqrt();
    // Genz tail expansion for P(X > h', Y > k') with h' = -h, k' = -k.
    let hp = -h;
    let kp = -k;
    let hk = hp * kp;
    let mut bvn = 0.0;
    if rho < 1.0 {
        let a_s = (1.0 - rho) * (1.0 + rho);
        let mut a = a_s.sqrt();
        let b_s = (hp - kp) * (hp - kp);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        let asr = -0.5 * (b_s / a_s + hk);
        if asr > -100.0 {
            bvn = a
                * asr.exp()
                * (1.0 - c * (b_s - a_s) * (1.0 - d * b_s / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
        }
        if -hk < 100.0 {
            let b = b_s.sqrt();
            bvn -= (-0.5 * hk).exp()
                * sqrt_two_pi
                * norm_cdf(-b / a)
                * b
                * (1.0 - c * b_s * (1.0 - d * b_s / 5.0) / 3.0);
        }
        a *= 0.5;
        for &(w, x) in &GL20 {
            for is in [-1.0, 1.0] {
                let xs = {
                    let t = a * (1.0 + is * x);
                    t * t
                };
                let rs = (1.0 - xs).sqrt();
                let asr = -0.5 * (b_s / xs + hk);
                if asr > -100.0 {
                    bvn += a
                        * w
                        * asr.exp()
                        * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                            - (1.0 + c * xs * (1.0 + d * xs)));
                }
            }
        }
        bvn *= -1.0 / (2.0 * std::f64::consts::PI);
    }
    bvn + norm_cdf(-hp.max(kp))
}

// ---------------------------------------------------------------------------
// Separation-of-variables lattice integration (m >= 3)
// ---------------------------------------------------------------------------

const LATTICE_SHIFTS: usize = 8;
const LATTICE_SEED: u64 = 0x00c0_ffee_cb0d_2024;

// Prime point counts for the rank-1 lattice ladder (roughly doubling).
const LATTICE_SIZES: [u64; 9] = [1021, 2039, 4093, 8191, 16381, 32749, 65521, 131071, 262139];

fn cholesky(entries: &[f64], dim: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut s = entries[i * dim + j];
            for k in 0..j {
                s -= l[i * dim + k] * l[j * dim + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * dim + i] = s.sqrt();
            } else {
                l[i * dim + j] = s / l[j * dim + j];
            }
        }
    }
    Some(l)
}

/// Cholesky factorization with greedy variable reordering: at each step pick
/// the remaining variable with the smallest conditional probability, which
/// concentrates the integrand's variation in the outer integration variables.
fn reordered_cholesky(limits: &[f64], corr: &CorrMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = limits.len();
    let mut c = corr.entries.clone();
    let mut a = limits.to_vec();
    let mut l = vec![0.0; m * m];
    let mut y = vec![0.0; m];
    for i in 0..m {
        // Select the pivot minimizing Phi of the conditional limit.
        let mut best = i;
        let mut best_p = f64::INFINITY;
        for j in i..m {
            let mut denom = c[j * m + j];
            let mut num = a[j];
            for k in 0..i {
                denom -= l[j * m + k] * l[j * m + k];
                num -= l[j * m + k] * y[k];
            }
            if denom <= 0.0 {
                continue;
            }
            let p = norm_cdf(num / denom.sqrt());
            if p < best_p {
                best_p = p;
                best = j;
            }
        }
        if best != i {
            a.swap(i, best);
            for r in 0..m {
                c.swap(r * m + i, r * m + best);
            }
            for col in 0..m {
                c.swap(i * m + col, best * m + col);
            }
            for k in 0..i {
                l.swap(i * m + k, best * m + k);
            }
        }
        let mut diag = c[i * m + i];
        let mut num = a[i];
        for k in 0..i {
            diag -= l[i * m + k] * l[i * m + k];
            num -= l[i * m + k] * y[k];
        }
        if diag <= 0.0 {
            return Err(Error::domain("correlation matrix is not positive definite"));
        }
        let lii = diag.sqrt();
        l[i * m + i] = lii;
        for r in i + 1..m {
            let mut s = c[r * m + i];
            for k in 0..i {
                s -= l[r * m + k] * l[i * m + k];
            }
            l[r * m + i] = s / lii;
        }
        // Conditional expectation of a standard normal truncated to (-inf, s],
        // used only to steer the pivot choice at later steps.
        let ai = num / lii;
        let cdf = norm_cdf(ai).max(1e-300);
        y[i] = -norm_pdf(ai) / cdf;
    }
    // a holds the permuted original limits; l the matching Cholesky factor.
    Ok((l, a))
}

/// Integrand for one lattice point: the sequential conditioned product.
#[inline]
fn sov_integrand(l: &[f64], a: &[f64], m: usize, w: &[f64], ys: &mut [f64]) -> f64 {
    let mut e = norm_cdf(a[0] / l[0]);
    let mut f = e;
    for i in 1..m {
        if f == 0.0 {
            return 0.0;
        }
        ys[i - 1] = norm_inv_cdf(w[i - 1] * e);
        let mut num = a[i];
        for k in 0..i {
            num -= l[i * m + k] * ys[k];
        }
        e = norm_cdf(num / l[i * m + i]);
        f *= e;
    }
    f
}

/// Korobov generating vector `(1, a, a^2, ...) mod n` for a prime `n`,
/// selected as the best of a seeded candidate sample under the standard
/// `P_2` quality criterion for the weighted Korobov space. Cached per
/// `(dim, n)`; the search is deterministic.
fn korobov_generator(s: usize, n: u64) -> &'static [u64] {
    use std::collections::HashMap;
    use std::sync::Mutex;
    type GeneratorCache = Mutex<HashMap<(usize, u64), &'static [u64]>>;
    static CACHE: OnceLock<GeneratorCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard.entry((s, n)).or_insert_with(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(LATTICE_SEED ^ n ^ ((s as u64) << 32));
        let mut best: Vec<u64> = Vec::new();
        let mut best_score = f64::INFINITY;
        let candidates: usize = 64;
        for _ in 0..candidates {
            let a = rng.gen_range(2..n - 1);
            let z = korobov_powers(a, n, s);
            let score = p2_score(&z, n);
            if score < best_score {
                best_score = score;
                best = z;
            }
        }
        Box::leak(best.into_boxed_slice())
    })
}

fn korobov_powers(a: u64, n: u64, s: usize) -> Vec<u64> {
    let mut z = Vec::with_capacity(s);
    let mut cur = 1u64;
    for _ in 0..s {
        z.push(cur);
        cur = (cur as u128 * a as u128 % n as u128) as u64;
    }
    z
}

/// Worst-case error proxy in the Korobov space of smoothness 2:
/// `P_2(z) = -1 + (1/n) * sum_k prod_j (1 + 2 pi^2 B_2({k z_j / n}))`.
fn p2_score(z: &[u64], n: u64) -> f64 {
    let c = 2.0 * std::f64::consts::PI * std::f64::consts::PI;
    let nf = n as f64;
    let mut total = 0.0;
    for k in 0..n {
        let mut prod = 1.0;
        for &zj in z {
            let x = (k as u128 * zj as u128 % n as u128) as f64 / nf;
            prod *= 1.0 + c * (x * x - x + 1.0 / 6.0);
        }
        total += prod;
    }
    total / nf - 1.0
}

fn sov_lattice(limits: &[f64], corr: &CorrMatrix, tol: f64) -> Result<MvnResult> {
    let m = limits.len();
    let (l, a) = reordered_cholesky(limits, corr)?;
    let s = m - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(LATTICE_SEED ^ (m as u64));
    let shifts: Vec<Vec<f64>> = (0..LATTICE_SHIFTS)
        .map(|_| (0..s).map(|_| rng.gen::<f64>()).collect())
        .collect();

    let mut w = vec![0.0; s];
    let mut ys = vec![0.0; s];
    let mut result = MvnResult {
        value: 0.0,
        error: f64::INFINITY,
    };
    for (level, &n) in LATTICE_SIZES.iter().enumerate() {
        let z = korobov_generator(s, n);
        let mut estimates = [0.0f64; LATTICE_SHIFTS];
        for (sh, shift) in shifts.iter().enumerate() {
            let mut acc = 0.0;
            for k in 0..n {
                for j in 0..s {
                    // Randomly shifted lattice point with baker's transform.
                    let v = ((k as u128 * z[j] as u128 % n as u128) as f64 / n as f64 + shift[j])
                        .fract();
                    w[j] = (2.0 * v - 1.0).abs();
                }
                acc += sov_integrand(&l, &a, m, &w, &mut ys);
            }
            estimates[sh] = acc / n as f64;
        }
        let mean = estimates.iter().sum::<f64>() / LATTICE_SHIFTS as f64;
        let var = estimates
            .iter()
            .map(|e| (e - mean) * (e - mean))
            .sum::<f64>()
            / (LATTICE_SHIFTS as f64 - 1.0);
        let err = 3.0 * (var / LATTICE_SHIFTS as f64).sqrt();
        result = MvnResult {
            value: mean.clamp(0.0, 1.0),
            error: err,
        };
        // Skip the smallest rungs for wider problems.
        if err <= tol && (level >= 1 || s <= 2) {
            break;
        }
    }
    Ok(result)
}
