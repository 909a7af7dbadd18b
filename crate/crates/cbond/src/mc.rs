//! Monte Carlo oracle for both rate models.
//!
//! Paths are sampled exactly per interval: lognormal firm-value increments
//! under a constant rate, and the jointly Gaussian triple (rate, integrated
//! rate, log firm value) under Vasicek rates, so no discretization bias
//! confounds the closed-form comparisons. The unexpected default time comes
//! from an exponential clock per interval. Every path owns a counter-based
//! random stream keyed by its index, which makes estimates bit-identical for
//! any worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bond::{BarrierSchedule, CouponBondSpec, PayoutSchedule};
use crate::error::{Error, Result};
use crate::term_structure::{f1, f2, vasicek_b, zcb_price, OneFactorMarket, VasicekMarket};

/// Simulation controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Euler substeps per interval for the two-factor validation mode;
    /// 1 selects exact per-interval sampling.
    #[serde(default = "default_substeps")]
    pub substeps_per_interval: usize,
    /// Antithetic variates (paired sign-flipped paths).
    #[serde(default)]
    pub antithetic: bool,
}

fn default_substeps() -> usize {
    1
}

impl SimConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        SimConfig {
            n_paths,
            seed,
            substeps_per_interval: 1,
            antithetic: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::domain("mc: n_paths must be at least 1"));
        }
        if self.substeps_per_interval == 0 {
            return Err(Error::domain(
                "mc: substeps_per_interval must be at least 1",
            ));
        }
        Ok(())
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Claim {
    Bond,
    Equity,
}

/// Per-path variate source: a fixed stream per path index, with antithetic
/// pairs sharing a stream and flipping draws.
struct PathRng {
    rng: ChaCha8Rng,
    flip: bool,
}

impl PathRng {
    fn new(seed: u64, path: usize, antithetic: bool) -> Self {
        let (stream, flip) = if antithetic {
            ((path / 2) as u64, path % 2 == 1)
        } else {
            (path as u64, false)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        PathRng { rng, flip }
    }

    fn normal(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        if self.flip {
            -z
        } else {
            z
        }
    }

    /// Uniform in (0, 1); antithetic uses the reflection.
    fn uniform(&mut self) -> f64 {
        let u: f64 = self.rng.gen();
        let u = if self.flip { 1.0 - u } else { u };
        u.clamp(f64::MIN_POSITIVE, 1.0 - 1e-16)
    }

    /// Exponential clock draw.
    fn exponential(&mut self) -> f64 {
        -(-self.uniform()).ln_1p()
    }
}

/// Deterministic parallel estimate: paths are grouped into fixed blocks whose
/// partial sums are combined in index order.
fn estimate<F: Fn(usize) -> f64 + Sync>(config: &SimConfig, path_value: F) -> McEstimate {
    const BLOCK: usize = 4096;
    let n = config.n_paths;
    let blocks = n.div_ceil(BLOCK);
    let partials: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let hi = ((b + 1) * BLOCK).min(n);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for p in lo..hi {
                let v = path_value(p);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (sum, sum_sq) = partials
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0).max(1.0)).max(0.0);
    McEstimate {
        mean,
        std_error: (var / nf).sqrt(),
        n_paths: n,
    }
}

// ---------------------------------------------------------------------------
// One factor
// ---------------------------------------------------------------------------

fn one_factor_path(
    spec: &CouponBondSpec,
    market: &OneFactorMarket,
    payouts: &PayoutSchedule,
    barriers: &BarrierSchedule,
    v0: f64,
    claim: Claim,
    rng: &mut PathRng,
) -> f64 {
    let n = spec.count();
    let (r, b, sig) = (market.rate, market.dividend, market.firm_vol);
    let drift = r - b - 0.5 * sig * sig;
    let mut v = v0;
    let mut value = 0.0;
    for i in 0..n {
        let t_start = spec.interval_start(i);
        let dt = spec.time(i) - t_start;
        let lam = spec.intensities[i];
        if lam > 0.0 {
            let e = rng.exponential();
            if e < lam * dt {
                // Unexpected default strictly inside the interval.
                if claim == Claim::Equity {
                    return value;
                }
                let tau_off = e / lam;
                let tau = t_start + tau_off;
                let z = rng.normal();
                let v_tau = v * (drift * tau_off + sig * tau_off.sqrt() * z).exp();
                let phi = payouts.phi_constant_rate(spec, r, tau, i);
                let recovery = (spec.recovery * v_tau).min(phi);
                return value + (-r * tau).exp() * recovery;
            }
        }
        let z = rng.normal();
        v *= (drift * dt + sig * dt.sqrt() * z).exp();
        let t_pay = spec.time(i);
        let disc = (-r * t_pay).exp();
        if i + 1 == n {
            // Maturity: full payout above the terminal barrier, recovery below.
            if v >= spec.terminal_barrier() {
                match claim {
                    Claim::Bond => value += disc * payouts.cbar[n - 1],
                    Claim::Equity => value += disc * (v - spec.terminal_barrier()),
                }
            } else if claim == Claim::Bond {
                value += disc * spec.recovery * v;
            }
        } else if v < barriers.barrier(i) {
            // Expected default at the coupon date (ties survive).
            if claim == Claim::Bond {
                value += disc * spec.recovery * v;
            }
            return value;
        } else {
            match claim {
                Claim::Bond => value += disc * payouts.cbar[i],
                Claim::Equity => value -= disc * spec.coupon_amounts[i],
            }
        }
    }
    value
}

/// Monte Carlo bond price under the constant-rate model.
pub fn mc_price_one_factor(
    spec: &CouponBondSpec,
    market: &OneFactorMarket,
    barriers: &BarrierSchedule,
    v0: f64,
    config: &SimConfig,
) -> Result<McEstimate> {
    spec.validate()?;
    config.validate()?;
    let payouts = PayoutSchedule::untaxed(spec);
    Ok(estimate(config, |p| {
        let mut rng = PathRng::new(config.seed, p, config.antithetic);
        one_factor_path(spec, market, &payouts, barriers, v0, Claim::Bond, &mut rng)
    }))
}

/// Monte Carlo equity price under the constant-rate model.
pub fn mc_equity_one_factor(
    spec: &CouponBondSpec,
    market: &OneFactorMarket,
    barriers: &BarrierSchedule,
    v0: f64,
    config: &SimConfig,
) -> Result<McEstimate> {
    spec.validate()?;
    config.validate()?;
    let payouts = PayoutSchedule::untaxed(spec);
    Ok(estimate(config, |p| {
        let mut rng = PathRng::new(config.seed, p, config.antithetic);
        one_factor_path(
            spec,
            market,
            &payouts,
            barriers,
            v0,
            Claim::Equity,
            &mut rng,
        )
    }))
}

// ---------------------------------------------------------------------------
// Two factors
// ---------------------------------------------------------------------------

/// Lower Cholesky factor of the covariance of `(eps_r, eps_I, eps_lnV)` over
/// a horizon `dt` with constant firm volatility; degenerate rate volatility
/// collapses the rate rows.
fn triple_chol(market: &VasicekMarket, sv: f64, dt: f64) -> [[f64; 3]; 3] {
    let sr = market.rate_vol;
    let a2 = market.a2;
    let bb = vasicek_b(a2, 0.0, dt);
    let x = a2 * dt;
    let v_rr = sr * sr * dt * {
        // (1 - e^{-2x}) / (2x) with the x -> 0 limit.
        let y = 2.0 * x;
        if y.abs() < 1e-10 {
            1.0 - 0.5 * y
        } else {
            -(-y).exp_m1() / y
        }
    };
    let v_ii = sr * sr * dt * dt * dt * f2(x);
    let v_vv = sv * sv * dt;
    let c_ri = sr * sr * bb * bb * 0.5;
    let c_rv = market.rho * sr * sv * bb;
    let c_iv = market.rho * sr * sv * dt * dt * f1(x);
    let mut l = [[0.0; 3]; 3];
    l[0][0] = v_rr.max(0.0).sqrt();
    if l[0][0] > 0.0 {
        l[1][0] = c_ri / l[0][0];
        l[2][0] = c_rv / l[0][0];
    }
    l[1][1] = (v_ii - l[1][0] * l[1][0]).max(0.0).sqrt();
    if l[1][1] > 0.0 {
        l[2][1] = (c_iv - l[1][0] * l[2][0]) / l[1][1];
    }
    l[2][2] = (v_vv - l[2][0] * l[2][0] - l[2][1] * l[2][1])
        .max(0.0)
        .sqrt();
    l
}

/// Exact one-step update over `dt`: returns `(r_end, int r du, ln V ratio)`.
fn two_factor_step(
    market: &VasicekMarket,
    sv: f64,
    r: f64,
    dt: f64,
    rng: &mut PathRng,
) -> (f64, f64, f64) {
    let bb = vasicek_b(market.a2, 0.0, dt);
    let mean_r = r + (market.a1 - market.a2 * r) * bb;
    let mean_i = r * bb + market.a1 * dt * dt * f1(market.a2 * dt);
    let l = triple_chol(market, sv, dt);
    let (z1, z2, z3) = (rng.normal(), rng.normal(), rng.normal());
    let eps_r = l[0][0] * z1;
    let eps_i = l[1][0] * z1 + l[1][1] * z2;
    let eps_v = l[2][0] * z1 + l[2][1] * z2 + l[2][2] * z3;
    let int_r = mean_i + eps_i;
    let dlnv = int_r - market.dividend * dt - 0.5 * sv * sv * dt + eps_v;
    (mean_r + eps_r, int_r, dlnv)
}

/// Euler refinement of the same step, for validating the exact covariance.
fn two_factor_step_euler(
    market: &VasicekMarket,
    sv: f64,
    r0: f64,
    dt: f64,
    substeps: usize,
    rng: &mut PathRng,
) -> (f64, f64, f64) {
    let h = dt / substeps as f64;
    let sq = h.sqrt();
    let rho = market.rho;
    let rho_c = (1.0 - rho * rho).max(0.0).sqrt();
    let mut r = r0;
    let mut int_r = 0.0;
    let mut dlnv = 0.0;
    for _ in 0..substeps {
        let z1 = rng.normal();
        let z2 = rng.normal();
        int_r += r * h;
        dlnv += (r - market.dividend - 0.5 * sv * sv) * h + sv * sq * (rho * z1 + rho_c * z2);
        r += (market.a1 - market.a2 * r) * h + market.rate_vol * sq * z1;
    }
    (r, int_r, dlnv)
}

#[allow(clippy::too_many_arguments)]
fn two_factor_path(
    spec: &CouponBondSpec,
    market: &VasicekMarket,
    payouts: &PayoutSchedule,
    barriers: &BarrierSchedule,
    v0: f64,
    r0: f64,
    claim: Claim,
    substeps: usize,
    rng: &mut PathRng,
) -> f64 {
    let n = spec.count();
    let t_n = spec.maturity();
    let mut v = v0;
    let mut r = r0;
    let mut disc_exponent = 0.0; // int_0^t r du
    let mut value = 0.0;
    for i in 0..n {
        let lam = spec.intensities[i];
        let interval = (spec.interval_start(i), spec.time(i));
        // Default time for this interval, if any.
        let default_off = if lam > 0.0 {
            let e = rng.exponential();
            (e < lam * (interval.1 - interval.0)).then(|| e / lam)
        } else {
            None
        };
        // Segment boundaries: volatility breakpoints, plus the default time.
        let mut cuts = vec![interval.0];
        cuts.extend(market.firm_vol.breakpoints_within(interval.0, interval.1));
        if let Some(off) = default_off {
            let tau = interval.0 + off;
            if !cuts.contains(&tau) {
                cuts.push(tau);
            }
        }
        cuts.push(interval.1);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let default_tau = default_off.map(|off| interval.0 + off);
        for seg in cuts.windows(2) {
            let (s0, s1) = (seg[0], seg[1]);
            if s1 <= s0 {
                continue;
            }
            let sv = market.firm_vol.value_at(s0);
            let (r_new, int_r, dlnv) = if substeps > 1 {
                two_factor_step_euler(market, sv, r, s1 - s0, substeps, rng)
            } else {
                two_factor_step(market, sv, r, s1 - s0, rng)
            };
            r = r_new;
            disc_exponent += int_r;
            v *= dlnv.exp();
            if let Some(tau) = default_tau {
                if (s1 - tau).abs() < 1e-15 && tau < interval.1 {
                    // Unexpected default at tau.
                    if claim == Claim::Equity {
                        return value;
                    }
                    let z = zcb_price(market, r, tau, t_n).unwrap_or(f64::NAN);
                    let cap = payouts.phi_maturity_units(i) * z;
                    let recovery = (spec.recovery * v).min(cap);
                    return value + (-disc_exponent).exp() * recovery;
                }
            }
        }
        // Coupon date T_{i+1}.
        let disc = (-disc_exponent).exp();
        if i + 1 == n {
            if v >= spec.terminal_barrier() {
                match claim {
                    Claim::Bond => value += disc * payouts.cbar[n - 1],
                    Claim::Equity => value += disc * (v - spec.terminal_barrier()),
                }
            } else if claim == Claim::Bond {
                value += disc * spec.recovery * v;
            }
        } else {
            let z = zcb_price(market, r, spec.time(i), t_n).unwrap_or(f64::NAN);
            if v < barriers.barrier(i) * z {
                if claim == Claim::Bond {
                    value += disc * spec.recovery * v;
                }
                return value;
            }
            match claim {
                Claim::Bond => value += disc * payouts.cbar[i] * z,
                Claim::Equity => value -= disc * spec.coupon_amounts[i] * z,
            }
        }
    }
    value
}

/// Monte Carlo bond price under Vasicek rates.
pub fn mc_price_two_factor(
    spec: &CouponBondSpec,
    market: &VasicekMarket,
    barriers: &BarrierSchedule,
    v0: f64,
    r0: f64,
    config: &SimConfig,
) -> Result<McEstimate> {
    spec.validate()?;
    config.validate()?;
    let payouts = PayoutSchedule::untaxed(spec);
    Ok(estimate(config, |p| {
        let mut rng = PathRng::new(config.seed, p, config.antithetic);
        two_factor_path(
            spec,
            market,
            &payouts,
            barriers,
            v0,
            r0,
            Claim::Bond,
            config.substeps_per_interval,
            &mut rng,
        )
    }))
}

/// Monte Carlo equity price under Vasicek rates.
pub fn mc_equity_two_factor(
    spec: &CouponBondSpec,
    market: &VasicekMarket,
    barriers: &BarrierSchedule,
    v0: f64,
    r0: f64,
    config: &SimConfig,
) -> Result<McEstimate> {
    spec.validate()?;
    config.validate()?;
    let payouts = PayoutSchedule::untaxed(spec);
    Ok(estimate(config, |p| {
        let mut rng = PathRng::new(config.seed, p, config.antithetic);
        two_factor_path(
            spec,
            market,
            &payouts,
            barriers,
            v0,
            r0,
            Claim::Equity,
            config.substeps_per_interval,
            &mut rng,
        )
    }))
}
