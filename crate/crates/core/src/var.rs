//! Value-at-Risk in return space: lower `alpha`-quantiles from fitted models
//! (CDF inversion or simulation) and from observed returns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Family, ReturnDistribution};
use crate::real::Real;
use crate::roots::bisect_decreasing;
use crate::seed;

pub const DEFAULT_N_SIM: usize = 1_000_000;
pub const MIN_N_SIM: usize = 10_000;
/// Bisection stops once the bracket is this narrow in x.
pub const CDF_X_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum VarMethod {
    CdfBisection,
    Simulation,
    Historical,
}

impl VarMethod {
    pub fn name(self) -> &'static str {
        match self {
            VarMethod::CdfBisection => "cdf-bisection",
            VarMethod::Simulation => "simulation",
            VarMethod::Historical => "historical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaRRequest {
    pub alpha: f64,
    pub method: VarMethod,
    pub n_sim: usize,
    pub seed: u64,
}

impl VaRRequest {
    pub fn new(alpha: f64, method: VarMethod) -> Self {
        Self {
            alpha,
            method,
            n_sim: DEFAULT_N_SIM,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::Config(format!("alpha must lie in (0, 0.5), got {}", self.alpha)));
        }
        if self.method == VarMethod::Simulation && self.n_sim < MIN_N_SIM {
            return Err(Error::Config(format!("n_sim must be at least {MIN_N_SIM}")));
        }
        Ok(())
    }

    /// Evaluate the request against a fitted model, or against `returns`
    /// for the historical method.
    pub fn estimate<T: Real, M: ReturnDistribution<T>>(&self, model: &M, returns: &[T]) -> Result<VaREstimate<T>> {
        self.validate()?;
        let alpha = T::lit(self.alpha);
        match self.method {
            VarMethod::CdfBisection => model_var_cdf(model, alpha),
            VarMethod::Simulation => model_var_sim(model, alpha, self.n_sim, self.seed),
            VarMethod::Historical => historical_var(returns, alpha),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaREstimate<T> {
    /// Return-space quantile, usually negative.
    pub value: T,
    /// Loss-space figure, `-value`.
    pub loss: T,
    pub alpha: T,
    pub method: VarMethod,
    /// `None` for the historical method.
    pub family: Option<Family>,
    /// Simulation only.
    pub standard_error: Option<T>,
}

impl<T: Real> VaREstimate<T> {
    fn new(value: T, alpha: T, method: VarMethod, family: Option<Family>, se: Option<T>) -> Self {
        Self {
            value,
            loss: -value,
            alpha,
            method,
            family,
            standard_error: se,
        }
    }
}

/// The default alpha grid, 0.001 to 0.100 in steps of 0.001.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=100).map(|i| i as f64 / 1000.0).collect()
}

fn check_level<T: Real>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha < T::one() {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Interpolated order statistic at 0-based position `alpha·(n − 1)` of
/// sorted values.
fn sorted_quantile<T: Real>(sorted: &[T], alpha: T) -> T {
    let h = alpha * T::lit((sorted.len() - 1) as f64);
    let lo = h.floor();
    let i = lo.to_usize().unwrap_or(0).min(sorted.len() - 1);
    if i + 1 >= sorted.len() {
        return sorted[i];
    }
    let frac = h - lo;
    sorted[i] + frac * (sorted[i + 1] - sorted[i])
}

fn sort_values<T: Real>(values: &mut [T]) {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
}

/// Empirical `alpha`-quantile of observed returns.
pub fn historical_var<T: Real>(values: &[T], alpha: T) -> Result<VaREstimate<T>> {
    check_level(alpha)?;
    let need = (T::one() / alpha).ceil().to_usize().unwrap_or(usize::MAX);
    if values.len() < need.max(1) {
        return Err(Error::Size(format!(
            "historical VaR at alpha={alpha} needs at least {need} observations, got {}",
            values.len()
        )));
    }
    let mut sorted = values.to_vec();
    sort_values(&mut sorted);
    Ok(VaREstimate::new(
        sorted_quantile(&sorted, alpha),
        alpha,
        VarMethod::Historical,
        None,
        None,
    ))
}

/// Invert the model CDF at `alpha`. Uses the closed-form quantile when the
/// model has one, otherwise widens a bracket geometrically and bisects.
pub fn model_var_cdf<T: Real, M: ReturnDistribution<T>>(model: &M, alpha: T) -> Result<VaREstimate<T>> {
    check_level(alpha)?;
    let value = match model.quantile_closed_form(alpha) {
        Some(q) => q,
        None => invert_cdf(model, alpha)?,
    };
    Ok(VaREstimate::new(value, alpha, VarMethod::CdfBisection, Some(model.family()), None))
}

fn invert_cdf<T: Real, M: ReturnDistribution<T>>(model: &M, alpha: T) -> Result<T> {
    let (centre, spread) = model.location_scale();
    let mut step = spread.max(T::lit(1e-3) * centre.abs().max(T::one()));
    let (mut lo, mut hi) = (centre - step, centre + step);
    let mut widen = 0;
    while model.cdf(lo) > alpha || model.cdf(hi) < alpha {
        if widen > 200 || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Degenerate(format!("could not bracket the {alpha} quantile")));
        }
        step = step * T::lit(2.0);
        if model.cdf(lo) > alpha {
            lo = centre - step;
        }
        if model.cdf(hi) < alpha {
            hi = centre + step;
        }
        widen += 1;
    }
    Ok(bisect_decreasing(|x| alpha - model.cdf(x), lo, hi, T::lit(CDF_X_TOL)).value())
}

/// Sorted draws from a model, reusable across alpha levels so that the
/// simulated VaR curve is monotone.
#[derive(Debug, Clone)]
pub struct SimulatedQuantiles<T> {
    sorted: Vec<T>,
    family: Family,
}

impl<T: Real> SimulatedQuantiles<T> {
    pub fn new<M: ReturnDistribution<T>>(model: &M, n_sim: usize, seed: u64) -> Result<Self> {
        if n_sim < MIN_N_SIM {
            return Err(Error::Size(format!("n_sim must be at least {MIN_N_SIM}, got {n_sim}")));
        }
        let mut rng = seed::rng(seed);
        let mut sorted: Vec<T> = (0..n_sim).map(|_| model.draw(&mut rng)).collect();
        sort_values(&mut sorted);
        Ok(Self {
            sorted,
            family: model.family(),
        })
    }

    /// Empirical quantile with standard error `sqrt(α(1−α)/n) / f(q)`.
    pub fn estimate<M: ReturnDistribution<T>>(&self, model: &M, alpha: T) -> Result<VaREstimate<T>> {
        check_level(alpha)?;
        let q = sorted_quantile(&self.sorted, alpha);
        let n = T::lit(self.sorted.len() as f64);
        let se = (alpha * (T::one() - alpha) / n).sqrt() / model.pdf(q);
        Ok(VaREstimate::new(q, alpha, VarMethod::Simulation, Some(self.family), Some(se)))
    }
}

pub fn model_var_sim<T: Real, M: ReturnDistribution<T>>(
    model: &M,
    alpha: T,
    n_sim: usize,
    seed: u64,
) -> Result<VaREstimate<T>> {
    check_level(alpha)?;
    SimulatedQuantiles::new(model, n_sim, seed)?.estimate(model, alpha)
}
