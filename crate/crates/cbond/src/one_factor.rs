//! Pricing under a constant short rate.
//!
//! Equity and defaultable-bond prices are combinations of higher-order
//! binaries observed at the remaining coupon dates, with expected-default
//! barriers solved backward from the equity, exponential survival weights
//! for the jump intensity, and an integral over the unexpected default time
//! in each interval. The initial-price breakdown and bankruptcy cost are
//! assembled independently from the multivariate-normal terms, which
//! cross-checks the binary route.

use crate::binaries::{
    binary_price, binary_price_dr, binary_price_dx, BinaryKind, BinaryOrder, DiffusionSpec,
    PRICING_MVN_TOL,
};
use crate::bond::{BarrierSchedule, CouponBondSpec, PayoutSchedule, PriceBreakdown};
use crate::error::{Error, Result};
use crate::math::brent::brent;
use crate::math::quad::integrate_adaptive;
use crate::mvn::{corr_from_variances, mvn_cdf, MvnProblem};
use crate::term_structure::OneFactorMarket;

const QUAD_REL_TOL: f64 = 1e-9;
const QUAD_N0: usize = 32;
const QUAD_N_MAX: usize = 256;
const BARRIER_REL_TOL: f64 = 1e-12;

fn diffusion(market: &OneFactorMarket) -> DiffusionSpec<'static> {
    DiffusionSpec::Constant {
        rate: market.rate,
        dividend: market.dividend,
        sigma: market.firm_vol,
    }
}

fn survival(spec: &CouponBondSpec, t1: f64, t2: f64) -> f64 {
    (-spec.hazard_integral(t1, t2)).exp()
}

// ---------------------------------------------------------------------------
// Equity
// ---------------------------------------------------------------------------

/// Equity value in interval `i` with the barriers above index `i` already
/// known; `t` may sit at the interval's left endpoint (the ex-coupon limit).
fn equity_in_interval(
    spec: &CouponBondSpec,
    market: &OneFactorMarket,
    ks: &[f64],
    i: usize,
    v: f64,
    t: f64,
) -> Result<f64> {
    let n = spec.count();
    let payouts = PayoutSchedule::untaxed(spec);
    let spec_d = diffusion(market);
    let times: Vec<f64> = (i..n).map(|k| spec.time(k)).collect();
    let barriers: Vec<f64> = ks[i..n].to_vec();
    let asset = BinaryOrder {
        kind: BinaryKind::Asset,
        signs: vec![1.0; n - i],
        barriers: barriers.clone(),
        obs_times: times.clone(),
    };
    let mut value = survival(spec, t, spec.maturity()) * binary_price(&asset, &spec_d, v, t)?;
    for m in i..n {
        let cb = payouts.cbar[m];
        if cb == 0.0 {
            continue;
        }
        let bond = BinaryOrder {
            kind: BinaryKind::Bond,
            signs: vec![1.0; m - i + 1],
            barriers: barriers[..=m - i].to_vec(),
            obs_times: times[..=m - i].to_vec(),
        };
        value -= cb * survival(spec, t, spec.time(m)) * binary_price(&bond, &spec_d, v, t)?;
    }
    Ok(value)
}

/// Equity price `E_i(V, t)`. At or past maturity the terminal payoff
/// `(V - F - C_N) 1{V >= F + C_N}` applies.
pub fn equity_price(
    spec: &CouponBondSpec,
    market: &OneFactorMarket,
    barriers: &BarrierSchedule,
    v: f64,
    t: f64,
) -> Result<f64> {
    spec.validate()?;
    if v <= 0.0 {
        return Err(Error::domain("equity_price: firm value must be positive"));
    }
    if t >= spec.maturity() {
        let k_n = spec.terminal_barrier();
        return Ok(if v >= k_n { v - k_n } else { 0.0 });
    }
    let i = spec.interval_index(t);
    equity_in_interval(spec, market, barriers.values(), i, v, t)
}

/// Equity value and its partial derivatives in `v` and `r` at fixed
/// barriers, used for barrier sensitivities.
fn equity_partials(
    spec: &CouponBondSpec,
    market: &OneFactorMarket,
    ks: &[f64],
    i: usize,
    v: f64,
    t: f64,
) -> Result<(f64, f64, f64)> {
    let n = spec.count();
    let payouts = PayoutSchedule::untaxed(spec);
    let spec_d = diffusion(market);
    let times: Vec<f64> = (i..n).map(|k| spec.time(k)).collect();
    let barriers: Vec<f64> = ks[i..n].to_vec();
    let zeros = vec![0.0; n - i];
    let asset = BinaryOrder {
        kind: BinaryKind::Asset,
        signs: vec![1.0; n - i],
        barriers: barriers.clone(),
        obs_times: times.clone(),
    };
    let sv = survival(spec, t, spec.maturity());
    let (p, p_dv) = binary_price_dx(&asset, &spec_d, v, t)?;
    let (_, p_dr) = binary_price_dr(&asset, &spec_d, v, t, &zeros)?;
    let mut value = sv * p;
    let mut d_v = sv * p_dv;
    let mut d_r = sv * p_dr;
    for m in i..n {
        let cb = payouts.cbar[m];
        if cb == 0.0 {
            continue;
        }
        let bond = BinaryOrder {
            kind: BinaryKind::Bond,
            signs: vec![1.0; m - i + 1],
            barriers: barriers[..=m - i].to_vec(),
            obs_times: times[..=m - i].to_vec(),
        };
        let w = cb * survival(spec, t, spec.time(m));
        let (q, q_dv) = binary_price_dx(&bond, &spec_d, v, t)?;
        let (_, q_dr) = binary_price_dr(&bond, &spec_d, v, t, &zeros[..=m - i])?;
        value -= w * q;
        d_v -= w * q_dv;
        d_r -= w * q_dr;
    }
    Ok((value, d_v, d_r))
}

// ---------------------------------------------------------------------------
// Barriers
// ---------------------------------------------------------------------------

/// Solve the expected-default barriers by backward recursion: `K_N = F + C_N`
/// and `K_i` the root of `E_i(V, T_i) = C_i` (zero when `C_i` is zero).
pub fn solve_barriers(spec: &CouponBondSpec, market: &OneFactorMarket) -> Result<BarrierSchedule> {
    spec.validate()?;
    let n = spec.count();
    let mut ks = vec![0.0; n];
    ks[n - 1] = spec.terminal_barrier();
    for j in (1..n).rev() {
        // Interval index j starts at T_j = spec.time(j - 1).
        let coupon = spec.coupon_amounts[j - 1];
        if coupon == 0.0 {
            ks[j - 1] = 0.0;
            continue;
        }
        let t_j = spec.time(j - 1);
        let f =
            |v: f64| equity_in_interval(spec, market, &ks, j, v, t_j).unwrap_or(f64::NAN) - coupon;
        let scale = spec.face + spec.coupon_amounts.iter().sum::<f64>();
        let lo = 1e-12 * scale.max(1.0);
        let mut hi = (2.0 * coupon).max(ks[j]).max(scale);
        let mut grew = 0;
        while f(hi) <= 0.0 {
            hi *= 2.0;
            grew += 1;
            if grew > 200 {
                return Err(Error::numerical(
                    "solve_barriers: failed to bracket the root",
                ));
            }
        }
        ks[j - 1] = brent(f, lo, hi, BARRIER_REL_TOL, 200)?;
    }
    Ok(BarrierSchedule::from_values(ks))
}

// ---------------------------------------------------------------------------
// Bond price (binary route)
// ---------------------------------------------------------------------------

struct BondComponents {
    survival: f64,
    coupon: f64,
    expected: f64,
    unexpected: f64,
}

impl BondComponents {
    fn total(&self) -> f64 {
        self.survival + self.coupon + self.expected + self.unexpected
    }
}

fn terminal_payoff(payouts: &PayoutSchedule, spec: &CouponBondSpec, v: f64) -> f64 {
    let n = spec.count();
    if v >= spec.terminal_barrier() {
        payouts.cbar[n - 1]
    } else {
        spec.recovery * v
    }
}

fn bond_components(
    spec: &CouponBondSpec,
    market: &OneFactorMarket,
    payouts: &PayoutSchedule,
    barriers: &BarrierSchedule,
    v: f64,
    t: f64,
) -> Result<BondComponents> {
    let n = spec.count();
    let i = spec.interval_index(t);
    let ks = barriers.values();
    let spec_d = diffusion(market);
    let delta = spec.recovery;
    let times: Vec<f64> = (i..n).map(|k| spec.time(k)).collect();
    let kslice: Vec<f64> = ks[i..n].to_vec();

    let mut out = BondComponents {
        survival: 0.0,
        coupon: 0.0,
        expected: 0.0,
        unexpected: 0.0,
    };
    for m in i..n {
        let surv = survival(spec, t, spec.time(m));
        let cb = payouts.cbar[m];
        if cb > 0.0 {
            let bond = BinaryOrder {
                kind: BinaryKind::Bond,
                signs: vec![1.0; m - i + 1],
                barriers: kslice[..=m - i].to_vec(),
                obs_times: times[..=m - i].to_vec(),
            };
            let p = surv * cb * binary_price(&bond, &spec_d, v, t)?;
            if m == n - 1 {
                out.survival += p;
            } else {
                out.coupon += p;
            }
        }
        if delta > 0.0 && ks[m] > 0.0 {
            let mut signs = vec![1.0; m - i + 1];
            *signs.last_mut().unwrap() = -1.0;
            let asset = BinaryOrder {
                kind: BinaryKind::Asset,
                signs,
                barriers: kslice[..=m - i].to_vec(),
                obs_times: times[..=m - i].to_vec(),
            };
            out.expected += surv * delta * binary_price(&asset, &spec_d, v, t)?;
        }
        // Unexpected default within (max(t, T_m), T_{m+1}].
        let lam = spec.intensities[m];
        if lam > 0.0 && delta > 0.0 {
            let lo = if m == i { t } else { spec.interval_start(m) };
            let hi = spec.time(m);
            let surv_lo = survival(spec, t, lo);
            let k_coords: Vec<f64> = kslice[..m - i].to_vec();
            let t_coords: Vec<f64> = times[..m - i].to_vec();
            let (without_loss, with_loss) = integrate_pair(lo, hi, |tau| {
                let weight = lam * surv_lo * (-lam * (tau - lo)).exp();
                let phi = payouts.phi_constant_rate(spec, market.rate, tau, m);
                if phi <= 0.0 {
                    return (0.0, 0.0);
                }
                let m_barrier = phi / delta;
                let mut barriers_b = k_coords.clone();
                barriers_b.push(m_barrier);
                let mut obs = t_coords.clone();
                obs.push(tau);
                let bond = BinaryOrder {
                    kind: BinaryKind::Bond,
                    signs: vec![1.0; obs.len()],
                    barriers: barriers_b.clone(),
                    obs_times: obs.clone(),
                };
                let mut signs = vec![1.0; obs.len()];
                *signs.last_mut().unwrap() = -1.0;
                let asset = BinaryOrder {
                    kind: BinaryKind::Asset,
                    signs,
                    barriers: barriers_b,
                    obs_times: obs,
                };
                let pb = binary_price(&bond, &spec_d, v, t).unwrap_or(f64::NAN);
                let pa = binary_price(&asset, &spec_d, v, t).unwrap_or(f64::NAN);
                (weight * phi * pb, weight * delta * pa)
            });
            out.unexpected += without_loss;
            out.expected += with_loss;
        }
    }
    Ok(out)
}

/// Adaptive Gauss-Legendre integration of a pair of integrands sharing the
/// same nodes, refined until the pair's sum stabilizes.
fn integrate_pair<F: Fn(f64) -> (f64, f64)>(a: f64, b: f64, f: F) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let eval = |n: usize| {
        let rule = crate::math::quad::GaussLegendre::get(n);
        let c = 0.5 * (b + a);
        let h = 0.5 * (b - a);
        let mut acc = (0.0, 0.0);
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let (p, q) = f(c + h * x);
            acc.0 += w * p;
            acc.1 += w * q;
        }
        (acc.0 * h, acc.1 * h)
    };
    let mut n = QUAD_N0;
    let mut prev = eval(n);
    loop {
        n *= 2;
        let cur = eval(n);
        let scale = (cur.0.abs() + cur.1.abs())
            .max(prev.0.abs() + prev.1.abs())
            .max(1e-300);
        if ((cur.0 - prev.0).abs() + (cur.1 - prev.1).abs()) <= QUAD_REL_TOL * scale
            || n >= QUAD_N_MAX
        {
            return cur;
        }
        prev = cur;
    }
}

/// Defaultable bond price `B_i(V, t)`; at or past maturity the terminal
/// payoff applies.
pub fn bond_price(
    spec: &CouponBondSpec,
    market: &OneFactorMarket,
    barriers: &BarrierSchedule,
    v: f64,
    t: f64,
) -> Result<f64> {
    spec.validate()?;
    if v <= 0.0 {
        return Err(Error::domain("bond_price: firm value must be positive"));
    }
    let payouts = PayoutSchedule::untaxed(spec);
    if t >= spec.maturity() {
        return Ok(terminal_payoff(&payouts, spec, v));
    }
    Ok(bond_components(spec, market, &payouts, barriers, v, t)?.total())
}

/// Tax-adjusted bond price: coupon income is taxed at the spec's rate, the
/// principal is not, and the default barriers are the untaxed ones. Only the
/// regime `delta <= 1 / (1 + c_N)` is supported.
pub fn taxed_bond_price(
    spec: &CouponBondSpec,
    market: &OneFactorMarket,
    barriers: &BarrierSchedule,
    v: f64,
    t: f64,
) -> Result<f64> {
    spec.validate()?;
    if v <= 0.0 {
        return Err(Error::domain(
            "taxed_bond_price: firm value must be positive",
        ));
    }
    check_tax_case(spec)?;
    let tax = spec.tax_rate.unwrap_or(0.0);
    let payouts = PayoutSchedule::taxed(spec, tax);
    if t >= spec.maturity() {
        return Ok(terminal_payoff(&payouts, spec, v));
    }
    Ok(bond_components(spec, market, &payouts, barriers, v, t)?.total())
}

pub(crate) fn check_tax_case(spec: &CouponBondSpec) -> Result<()> {
    // Case I: F / delta >= F + C_N, i.e. recovery of the principal alone can
    // never exceed the full terminal claim.
    if spec.recovery * spec.terminal_barrier() > spec.face {
        return Err(Error::unsupported(format!(
            "tax adjustment requires recovery <= 1/(1 + c_N) (case I); got recovery {} with final coupon rate {}",
            spec.recovery,
            spec.final_coupon_rate()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Initial breakdown and bankruptcy cost (multivariate-normal route)
// ---------------------------------------------------------------------------

/// Terms shared by the initial-price representation, the bankruptcy cost
/// and the analytic duration, assembled directly from the normal CDF with
/// the nested correlation (independent of the binary evaluator).
struct GTerms {
    /// Survival-to-payment weights times `N_{m+1}(d^-_1..d^-_{m+1})`.
    g_minus: Vec<f64>,
    /// Expected-default weights times `N_{m+1}(d^+_1..d^+_m, -d^+_{m+1})`.
    g_tilde: Vec<f64>,
    /// Full-survival `N_N(d^+; A_N)` with dividend-and-hazard weight.
    g_plus_full: f64,
    /// `int g^-_{m+1}(tau) dtau` per interval (unexpected default without loss).
    int_gbar: Vec<f64>,
    /// `int gtilde_{m+1}(tau) dtau` per interval (unexpected default with loss).
    int_gtilde: Vec<f64>,
}

fn d_plus_minus(market: &OneFactorMarket, v0: f64, barrier: f64, horizon: f64) -> (f64, f64) {
    if barrier <= 0.0 {
        return (f64::INFINITY, f64::INFINITY);
    }
    let sig = market.firm_vol;
    let sv = sig * horizon.sqrt();
    let core = (v0 / barrier).ln() + (market.rate - market.dividend) * horizon;
    (
        (core + 0.5 * sig * sig * horizon) / sv,
        (core - 0.5 * sig * sig * horizon) / sv,
    )
}

fn g_terms(
    spec: &CouponBondSpec,
    market: &OneFactorMarket,
    payouts: &PayoutSchedule,
    barriers: &BarrierSchedule,
    v0: f64,
) -> Result<GTerms> {
    let n = spec.count();
    let b = market.dividend;
    let delta = spec.recovery;
    let mut d_plus = Vec::with_capacity(n);
    let mut d_minus = Vec::with_capacity(n);
    let mut vars = Vec::with_capacity(n);
    for k in 0..n {
        let (dp, dm) = d_plus_minus(market, v0, barriers.barrier(k), spec.time(k));
        d_plus.push(dp);
        d_minus.push(dm);
        vars.push(market.firm_vol * market.firm_vol * spec.time(k));
    }

    let mvn = |limits: Vec<f64>, signs: &[f64], vars: &[f64]| -> Result<f64> {
        let corr = corr_from_variances(vars, Some(signs));
        Ok(mvn_cdf(&MvnProblem::new(limits, corr)?, PRICING_MVN_TOL)?.value)
    };

    let mut g_minus = Vec::with_capacity(n);
    let mut g_tilde = Vec::with_capacity(n);
    for m in 0..n {
        let surv = survival(spec, 0.0, spec.time(m));
        let plus_signs = vec![1.0; m + 1];
        g_minus.push(surv * mvn(d_minus[..=m].to_vec(), &plus_signs, &vars[..=m])?);
        let mut flip_signs = vec![1.0; m + 1];
        flip_signs[m] = -1.0;
        let mut lims = d_plus[..=m].to_vec();
        lims[m] = -lims[m];
        g_tilde.push(surv * (-b * spec.time(m)).exp() * mvn(lims, &flip_signs, &vars[..=m])?);
    }
    let g_plus_full = survival(spec, 0.0, spec.maturity())
        * (-b * spec.maturity()).exp()
        * mvn(d_plus.clone(), &vec![1.0; n], &vars)?;

    let sig = market.firm_vol;
    let mut int_gbar = Vec::with_capacity(n);
    let mut int_gtilde = Vec::with_capacity(n);
    for m in 0..n {
        let lam = spec.intensities[m];
        if lam == 0.0 || delta == 0.0 {
            int_gbar.push(0.0);
            int_gtilde.push(0.0);
            continue;
        }
        let lo = spec.interval_start(m);
        let hi = spec.time(m);
        let surv_lo = survival(spec, 0.0, lo);
        let phi0 = payouts.phi_constant_rate(spec, market.rate, 0.0, m);
        let (gbar, gtilde) = integrate_pair(lo, hi, |tau| {
            let m_barrier = payouts.phi_constant_rate(spec, market.rate, tau, m) / delta;
            let sv = sig * tau.sqrt();
            let core = (v0 / m_barrier).ln() + (market.rate - b) * tau;
            let d_t_plus = (core + 0.5 * sig * sig * tau) / sv;
            let d_t_minus = (core - 0.5 * sig * sig * tau) / sv;
            let mut tau_vars = vars[..m].to_vec();
            tau_vars.push(sig * sig * tau);
            let mut lim_bar = d_minus[..m].to_vec();
            lim_bar.push(d_t_minus);
            let plus_signs = vec![1.0; m + 1];
            let gbar_tau = mvn(lim_bar, &plus_signs, &tau_vars).unwrap_or(f64::NAN);
            let mut lim_tilde = d_plus[..m].to_vec();
            lim_tilde.push(-d_t_plus);
            let mut flip_signs = vec![1.0; m + 1];
            flip_signs[m] = -1.0;
            let gtilde_tau = mvn(lim_tilde, &flip_signs, &tau_vars).unwrap_or(f64::NAN);
            let w_bar = surv_lo * (-lam * (tau - lo)).exp();
            let w_tilde = w_bar * (-b * tau).exp();
            (w_bar * gbar_tau, w_tilde * gtilde_tau)
        });
        // phi0 multiplies outside: Phi_m(tau) e^{-r tau} = Phi_m(0).
        let _ = phi0;
        int_gbar.push(gbar);
        int_gtilde.push(gtilde);
    }
    Ok(GTerms {
        g_minus,
        g_tilde,
        g_plus_full,
        int_gbar,
        int_gtilde,
    })
}

/// Initial bond price split per the closed-form representation: survival
/// face value, interim coupons, recovery terms `delta V`, and the
/// unexpected-default-without-loss integrals.
pub fn bond_initial_breakdown(
    spec: &CouponBondSpec,
    market: &OneFactorMarket,
    barriers: &BarrierSchedule,
    v0: f64,
) -> Result<PriceBreakdown> {
    spec.validate()?;
    if v0 <= 0.0 {
        return Err(Error::domain(
            "bond_initial_breakdown: firm value must be positive",
        ));
    }
    let payouts = PayoutSchedule::untaxed(spec);
    let g = g_terms(spec, market, &payouts, barriers, v0)?;
    let n = spec.count();
    let z = |k: usize| market.discount(0.0, spec.time(k));

    let survival_pv = payouts.cbar[n - 1] * z(n - 1) * g.g_minus[n - 1];
    let coupon_pv: f64 = (0..n - 1)
        .map(|k| payouts.cbar[k] * z(k) * g.g_minus[k])
        .sum();
    let unexpected_default_pv: f64 = (0..n)
        .map(|m| {
            spec.intensities[m]
                * payouts.phi_constant_rate(spec, market.rate, 0.0, m)
                * g.int_gbar[m]
        })
        .sum();
    let expected_default_pv: f64 = (0..n)
        .map(|m| spec.recovery * v0 * (g.g_tilde[m] + spec.intensities[m] * g.int_gtilde[m]))
        .sum();
    let total = survival_pv + coupon_pv + unexpected_default_pv + expected_default_pv;
    Ok(PriceBreakdown {
        total,
        survival_pv,
        coupon_pv,
        expected_default_pv,
        unexpected_default_pv,
    })
}

/// Present value lost to default frictions: the gap in the accounting
/// identity `V = equity + debt + bankruptcy cost`.
pub fn bankruptcy_cost(
    spec: &CouponBondSpec,
    market: &OneFactorMarket,
    barriers: &BarrierSchedule,
    v0: f64,
) -> Result<f64> {
    spec.validate()?;
    if v0 <= 0.0 {
        return Err(Error::domain(
            "bankruptcy_cost: firm value must be positive",
        ));
    }
    let payouts = PayoutSchedule::untaxed(spec);
    let g = g_terms(spec, market, &payouts, barriers, v0)?;
    let n = spec.count();
    let mut cost = v0 - v0 * g.g_plus_full;
    for m in 0..n {
        let lam = spec.intensities[m];
        let phi0 = payouts.phi_constant_rate(spec, market.rate, 0.0, m);
        cost -= v0 * spec.recovery * g.g_tilde[m]
            + lam * (v0 * spec.recovery * g.int_gtilde[m] + phi0 * g.int_gbar[m]);
    }
    Ok(cost)
}

// ---------------------------------------------------------------------------
// Duration
// ---------------------------------------------------------------------------

/// Rate sensitivities `dK_i/dr` of the solved barriers, by implicit
/// differentiation of `E_i(K_i, T_i; r) = C_i` (zero for zero barriers and
/// for the contractual terminal barrier).
fn barrier_rate_sensitivities(
    spec: &CouponBondSpec,
    market: &OneFactorMarket,
    barriers: &BarrierSchedule,
) -> Result<Vec<f64>> {
    let n = spec.count();
    let ks = barriers.values();
    let mut out = vec![0.0; n];
    for j in 1..n {
        let k = ks[j - 1];
        if k == 0.0 {
            continue;
        }
        let t_j = spec.time(j - 1);
        let (_, de_dv, de_dr) = equity_partials(spec, market, ks, j, k, t_j)?;
        out[j - 1] = -de_dr / de_dv;
    }
    Ok(out)
}

/// Full rate derivative of the bond price at `t = 0`, including the motion
/// of the solved barriers and of the recovery thresholds with `r` when
/// `with_barrier_motion` is set.
fn bond_rate_derivative(
    spec: &CouponBondSpec,
    market: &OneFactorMarket,
    barriers: &BarrierSchedule,
    v0: f64,
    with_barrier_motion: bool,
) -> Result<f64> {
    let n = spec.count();
    let ks = barriers.values();
    let payouts = PayoutSchedule::untaxed(spec);
    let spec_d = diffusion(market);
    let delta = spec.recovery;
    let times: Vec<f64> = (0..n).map(|k| spec.time(k)).collect();

    let dln_k: Vec<f64> = if with_barrier_motion {
        let dk = barrier_rate_sensitivities(spec, market, barriers)?;
        (0..n)
            .map(|j| if ks[j] > 0.0 { dk[j] / ks[j] } else { 0.0 })
            .collect()
    } else {
        vec![0.0; n]
    };

    let mut deriv = 0.0;
    for m in 0..n {
        let surv = survival(spec, 0.0, times[m]);
        let cb = payouts.cbar[m];
        if cb > 0.0 {
            let bond = BinaryOrder {
                kind: BinaryKind::Bond,
                signs: vec![1.0; m + 1],
                barriers: ks[..=m].to_vec(),
                obs_times: times[..=m].to_vec(),
            };
            let (_, dp) = binary_price_dr(&bond, &spec_d, v0, 0.0, &dln_k[..=m])?;
            deriv += surv * cb * dp;
        }
        if delta > 0.0 && ks[m] > 0.0 {
            let mut signs = vec![1.0; m + 1];
            signs[m] = -1.0;
            let asset = BinaryOrder {
                kind: BinaryKind::Asset,
                signs,
                barriers: ks[..=m].to_vec(),
                obs_times: times[..=m].to_vec(),
            };
            let (_, dp) = binary_price_dr(&asset, &spec_d, v0, 0.0, &dln_k[..=m])?;
            deriv += surv * delta * dp;
        }
        let lam = spec.intensities[m];
        if lam > 0.0 && delta > 0.0 {
            let lo = spec.interval_start(m);
            let hi = times[m];
            let surv_lo = survival(spec, 0.0, lo);
            let integrand = |tau: f64| {
                let weight = lam * surv_lo * (-lam * (tau - lo)).exp();
                let phi = payouts.phi_constant_rate(spec, market.rate, tau, m);
                let phi_dr = payouts.phi_constant_rate_dr(spec, market.rate, tau, m);
                let m_barrier = phi / delta;
                let mut barr = ks[..m].to_vec();
                barr.push(m_barrier);
                let mut obs = times[..m].to_vec();
                obs.push(tau);
                let mut dln = dln_k[..m].to_vec();
                // The recovery threshold moves with r through the default-free
                // value, in both variants: it is part of the payoff, not a
                // solved barrier.
                dln.push(phi_dr / phi);
                let bond = BinaryOrder {
                    kind: BinaryKind::Bond,
                    signs: vec![1.0; m + 1],
                    barriers: barr.clone(),
                    obs_times: obs.clone(),
                };
                let mut signs = vec![1.0; m + 1];
                signs[m] = -1.0;
                let asset = BinaryOrder {
                    kind: BinaryKind::Asset,
                    signs,
                    barriers: barr,
                    obs_times: obs,
                };
                let (pb, dpb) =
                    binary_price_dr(&bond, &spec_d, v0, 0.0, &dln).unwrap_or((f64::NAN, f64::NAN));
                let (_, dpa) =
                    binary_price_dr(&asset, &spec_d, v0, 0.0, &dln).unwrap_or((f64::NAN, f64::NAN));
                weight * (phi_dr * pb + phi * dpb + delta * dpa)
            };
            deriv += integrate_adaptive(lo, hi, QUAD_N0, QUAD_N_MAX, QUAD_REL_TOL, integrand);
        }
    }
    Ok(deriv)
}

/// Analytic duration `-(dB_0/dr) / B_0` of the defaultable bond at `t = 0`,
/// accounting for the dependence of the solved barriers and recovery
/// thresholds on the rate.
pub fn duration(
    spec: &CouponBondSpec,
    market: &OneFactorMarket,
    barriers: &BarrierSchedule,
    v0: f64,
) -> Result<f64> {
    spec.validate()?;
    let price = bond_price(spec, market, barriers, v0, 0.0)?;
    if price <= 0.0 {
        return Err(Error::domain("duration: bond price must be positive"));
    }
    let deriv = bond_rate_derivative(spec, market, barriers, v0, true)?;
    Ok(-deriv / price)
}

/// Duration of the default-free discrete coupon bond at time `t < T_1`: the
/// convex combination of the remaining horizons weighted by discounted
/// payouts.
pub fn default_free_duration(spec: &CouponBondSpec, rate: f64, t: f64) -> Result<f64> {
    spec.validate()?;
    if t >= spec.time(0) {
        return Err(Error::domain(
            "default_free_duration: t must precede the first coupon",
        ));
    }
    let payouts = PayoutSchedule::untaxed(spec);
    let phi = payouts.phi_constant_rate(spec, rate, t, 0);
    let weighted: f64 = (0..spec.count())
        .map(|k| payouts.cbar[k] * (-rate * (spec.time(k) - t)).exp() * (spec.time(k) - t))
        .sum();
    Ok(weighted / phi)
}
