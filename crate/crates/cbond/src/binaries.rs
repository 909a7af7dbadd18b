//! Higher-order asset and bond binary options.
//!
//! An order-m binary pays at the last observation date `T_m` conditional on
//! the underlying being above (+) or below (-) a barrier at each of the m
//! observation dates. The bond kind pays one unit of cash, the asset kind
//! pays the underlying. Two coefficient regimes are supported: constant
//! `(r, q, sigma)`, and zero rate with dividend `q` and a deterministic
//! time-dependent volatility given through its accumulated variance, which
//! is the regime of relative prices under a stochastic-rate numeraire.

use crate::error::{Error, Result};
use crate::mvn::{corr_from_variances, mvn_boundary_slice, mvn_cdf, MvnProblem};

/// Absolute tolerance passed to the MVN kernel by pricing code.
pub(crate) const PRICING_MVN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryKind {
    Asset,
    Bond,
}

/// Exercise structure of an order-m binary.
#[derive(Debug, Clone)]
pub struct BinaryOrder {
    pub kind: BinaryKind,
    /// +1.0 for "above the barrier", -1.0 for "below".
    pub signs: Vec<f64>,
    /// Barriers; a zero barrier with sign + is a certain event and is
    /// dropped from the indicator.
    pub barriers: Vec<f64>,
    /// Strictly ascending observation dates; payout at the last one.
    pub obs_times: Vec<f64>,
}

impl BinaryOrder {
    pub fn order(&self) -> usize {
        self.obs_times.len()
    }

    pub fn payout_time(&self) -> f64 {
        *self.obs_times.last().unwrap()
    }

    fn validate(&self, t: f64) -> Result<()> {
        let m = self.obs_times.len();
        if m == 0 || self.signs.len() != m || self.barriers.len() != m {
            return Err(Error::domain(
                "binary: signs, barriers, obs_times must share length >= 1",
            ));
        }
        if self.obs_times[0] <= t || self.obs_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain(
                "binary: observation dates must be strictly ascending and after valuation",
            ));
        }
        for (&k, &s) in self.barriers.iter().zip(&self.signs) {
            if k < 0.0 || (k == 0.0 && s < 0.0) {
                return Err(Error::domain(
                    "binary: barriers must be positive (zero only with sign +)",
                ));
            }
            if s != 1.0 && s != -1.0 {
                return Err(Error::domain("binary: signs must be +1 or -1"));
            }
        }
        Ok(())
    }
}

/// Coefficient regime of the underlying diffusion.
#[derive(Clone, Copy)]
pub enum DiffusionSpec<'a> {
    /// Risk-free rate, dividend rate and volatility all constant.
    Constant {
        rate: f64,
        dividend: f64,
        sigma: f64,
    },
    /// Zero rate, dividend rate `q`, and volatility specified through the
    /// accumulated variance `variance(t, T) = int_t^T sigma^2(u) du`.
    DeterministicVol {
        dividend: f64,
        variance: &'a dyn Fn(f64, f64) -> f64,
    },
}

impl DiffusionSpec<'_> {
    fn rate(&self) -> f64 {
        match self {
            DiffusionSpec::Constant { rate, .. } => *rate,
            DiffusionSpec::DeterministicVol { .. } => 0.0,
        }
    }

    fn dividend(&self) -> f64 {
        match self {
            DiffusionSpec::Constant { dividend, .. } => *dividend,
            DiffusionSpec::DeterministicVol { dividend, .. } => *dividend,
        }
    }

    fn accumulated_variance(&self, t: f64, until: f64) -> Result<f64> {
        let v = match self {
            DiffusionSpec::Constant { sigma, .. } => sigma * sigma * (until - t),
            DiffusionSpec::DeterministicVol { variance, .. } => variance(t, until),
        };
        if v <= 0.0 {
            return Err(Error::domain(
                "binary: accumulated variance must be positive",
            ));
        }
        Ok(v)
    }
}

/// Per-coordinate data after dropping certain events.
struct Assembled {
    signs: Vec<f64>,
    sqrt_vars: Vec<f64>,
    /// Signed limits for the MVN problem, + variant (asset) and - variant (bond).
    limits_plus: Vec<f64>,
    limits_minus: Vec<f64>,
    /// Observation horizons `T_j - t` of the kept coordinates.
    horizons: Vec<f64>,
    /// Position of each kept coordinate in the original order.
    kept: Vec<usize>,
    corr: crate::mvn::CorrMatrix,
}

fn assemble(order: &BinaryOrder, spec: &DiffusionSpec, x: f64, t: f64) -> Result<Assembled> {
    let drift = spec.rate() - spec.dividend();
    let mut signs = Vec::new();
    let mut vars = Vec::new();
    let mut sqrt_vars = Vec::new();
    let mut limits_plus = Vec::new();
    let mut limits_minus = Vec::new();
    let mut horizons = Vec::new();
    let mut kept = Vec::new();
    for (j, (&k, (&s, &tj))) in order
        .barriers
        .iter()
        .zip(order.signs.iter().zip(&order.obs_times))
        .enumerate()
    {
        if k == 0.0 {
            continue; // certain event under sign +
        }
        let v = spec.accumulated_variance(t, tj)?;
        let sv = v.sqrt();
        let core = (x / k).ln() + drift * (tj - t);
        signs.push(s);
        vars.push(v);
        sqrt_vars.push(sv);
        limits_plus.push(s * (core + 0.5 * v) / sv);
        limits_minus.push(s * (core - 0.5 * v) / sv);
        horizons.push(tj - t);
        kept.push(j);
    }
    let corr = corr_from_variances(&vars, Some(&signs));
    Ok(Assembled {
        signs,
        sqrt_vars,
        limits_plus,
        limits_minus,
        horizons,
        kept,
        corr,
    })
}

fn prefactor(order: &BinaryOrder, spec: &DiffusionSpec, x: f64, t: f64) -> f64 {
    let dt = order.payout_time() - t;
    match order.kind {
        BinaryKind::Bond => (-spec.rate() * dt).exp(),
        BinaryKind::Asset => x * (-spec.dividend() * dt).exp(),
    }
}

/// Price of the binary at underlying level `x` and time `t`.
pub fn binary_price(order: &BinaryOrder, spec: &DiffusionSpec, x: f64, t: f64) -> Result<f64> {
    order.validate(t)?;
    if x <= 0.0 {
        return Err(Error::domain("binary: underlying must be positive"));
    }
    let asm = assemble(order, spec, x, t)?;
    let limits = match order.kind {
        BinaryKind::Asset => asm.limits_plus,
        BinaryKind::Bond => asm.limits_minus,
    };
    let n = mvn_cdf(&MvnProblem::new(limits, asm.corr)?, PRICING_MVN_TOL)?.value;
    Ok(prefactor(order, spec, x, t) * n)
}

/// Price and d(price)/dx.
pub fn binary_price_dx(
    order: &BinaryOrder,
    spec: &DiffusionSpec,
    x: f64,
    t: f64,
) -> Result<(f64, f64)> {
    order.validate(t)?;
    if x <= 0.0 {
        return Err(Error::domain("binary: underlying must be positive"));
    }
    let asm = assemble(order, spec, x, t)?;
    let limits = match order.kind {
        BinaryKind::Asset => &asm.limits_plus,
        BinaryKind::Bond => &asm.limits_minus,
    };
    let problem = MvnProblem::new(limits.clone(), asm.corr.clone())?;
    let n = mvn_cdf(&problem, PRICING_MVN_TOL)?.value;
    let mut dn_dx = 0.0;
    for j in 0..limits.len() {
        let slice = mvn_boundary_slice(&problem, j, PRICING_MVN_TOL)?;
        dn_dx += slice * asm.signs[j] / (x * asm.sqrt_vars[j]);
    }
    let pref = prefactor(order, spec, x, t);
    let price = pref * n;
    let d_x = match order.kind {
        BinaryKind::Bond => pref * dn_dx,
        BinaryKind::Asset => price / x + pref * dn_dx,
    };
    Ok((price, d_x))
}

/// Price and d(price)/dr for the constant-coefficient regime.
///
/// `dln_barrier_dr[j]` supplies the sensitivity of `ln K_j` to the rate for
/// barriers that themselves move with `r` (solved default thresholds, or
/// recovery thresholds built from discounted values); pass zeros for fixed
/// barriers.
pub fn binary_price_dr(
    order: &BinaryOrder,
    spec: &DiffusionSpec,
    x: f64,
    t: f64,
    dln_barrier_dr: &[f64],
) -> Result<(f64, f64)> {
    order.validate(t)?;
    if x <= 0.0 {
        return Err(Error::domain("binary: underlying must be positive"));
    }
    if !matches!(spec, DiffusionSpec::Constant { .. }) {
        return Err(Error::domain(
            "binary rate sensitivity requires constant coefficients",
        ));
    }
    if dln_barrier_dr.len() != order.order() {
        return Err(Error::domain("binary: dln_barrier_dr length mismatch"));
    }
    let asm = assemble(order, spec, x, t)?;
    let limits = match order.kind {
        BinaryKind::Asset => &asm.limits_plus,
        BinaryKind::Bond => &asm.limits_minus,
    };
    let problem = MvnProblem::new(limits.clone(), asm.corr.clone())?;
    let n = mvn_cdf(&problem, PRICING_MVN_TOL)?.value;
    let mut dn_dr = 0.0;
    for j in 0..limits.len() {
        let slice = mvn_boundary_slice(&problem, j, PRICING_MVN_TOL)?;
        let dlimit =
            asm.signs[j] * (asm.horizons[j] - dln_barrier_dr[asm.kept[j]]) / asm.sqrt_vars[j];
        dn_dr += slice * dlimit;
    }
    let pref = prefactor(order, spec, x, t);
    let price = pref * n;
    let d_r = match order.kind {
        BinaryKind::Bond => -(order.payout_time() - t) * price + pref * dn_dr,
        BinaryKind::Asset => pref * dn_dr,
    };
    Ok((price, d_r))
}
