//! Mixtures of mirrored Weibull distributions and their EM fitter.
//!
//! Fitting works on the mirrored sample `y = c − x`, where each component is
//! a plain two-parameter Weibull. Components are stored by role
//! (`scale`, `shape`); the shape update solves the profile score equation
//!
//! ```text
//! 1/k = Σ z y^k ln y / Σ z y^k − Σ z ln y / Σ z
//! ```
//!
//! and the scale follows in closed form as `(Σ z y^k / Σ z)^(1/k)`.

use serde::{Deserialize, Serialize};

use crate::em::{self, EmConfig, EmModel, FitResult, Responsibilities};
use crate::error::{Error, Result};
use crate::mweibull::{
    self, mirror_constant, mom_estimate, MirroredWeibullParams, WeibullParams, SHAPE_MAX,
    SHAPE_MIN,
};
use crate::real::{log_sum_exp, Real};
use crate::returns::ReturnSeries;
use crate::roots::newton_decreasing;

/// Simplex tolerance on the weights.
const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Column mass below which a component counts as empty.
const COLLAPSE_MASS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmwMixture<T> {
    weights: Vec<T>,
    components: Vec<WeibullParams<T>>,
    c: T,
}

fn check_simplex<T: Real>(weights: &[T]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::Domain("mixture needs at least one component".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= T::zero()) || !w.is_finite()) {
        return Err(Error::Domain(format!("weights must be non-negative, got {w}")));
    }
    let sum: T = weights.iter().copied().sum();
    let tol = T::lit(WEIGHT_SUM_TOL).max(T::epsilon() * T::lit(4.0 * weights.len() as f64));
    if (sum - T::one()).abs() > tol {
        return Err(Error::Domain(format!("weights sum to {sum}, not 1")));
    }
    Ok(())
}

pub(crate) fn normalize<T: Real>(weights: &mut [T]) {
    let sum: T = weights.iter().copied().sum();
    for w in weights.iter_mut() {
        *w = *w / sum;
    }
}

impl<T: Real> MmwMixture<T> {
    pub fn new(weights: Vec<T>, components: Vec<WeibullParams<T>>, c: T) -> Result<Self> {
        if weights.len() != components.len() {
            return Err(Error::Size(format!(
                "{} weights but {} components",
                weights.len(),
                components.len()
            )));
        }
        check_simplex(&weights)?;
        for p in &components {
            WeibullParams::new(p.scale, p.shape)?;
        }
        if !c.is_finite() {
            return Err(Error::Domain(format!("mirror constant must be finite, got {c}")));
        }
        Ok(Self {
            weights,
            components,
            c,
        })
    }

    pub fn single(p: MirroredWeibullParams<T>) -> Self {
        Self {
            weights: vec![T::one()],
            components: vec![p.unmirrored()],
            c: p.c,
        }
    }

    pub fn g(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn components(&self) -> &[WeibullParams<T>] {
        &self.components
    }

    pub fn c(&self) -> T {
        self.c
    }

    pub fn component(&self, i: usize) -> MirroredWeibullParams<T> {
        self.components[i].mirrored(self.c)
    }

    /// Same mixture with components reordered: component `i` of the result
    /// is component `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            weights: perm.iter().map(|&i| self.weights[i]).collect(),
            components: perm.iter().map(|&i| self.components[i]).collect(),
            c: self.c,
        }
    }

    pub fn pdf(&self, x: T) -> T {
        mixture_pdf(x, self)
    }

    pub fn cdf(&self, x: T) -> T {
        mixture_cdf(x, self)
    }

    /// Weighted log densities `ln π_i + ln f_W(y)` for `ln y`.
    fn joint_ln(&self, ln_y: T, out: &mut [T]) {
        for ((o, w), p) in out.iter_mut().zip(&self.weights).zip(&self.components) {
            *o = w.ln() + p.ln_pdf_from_ln(ln_y);
        }
    }
}

pub fn mixture_pdf<T: Real>(x: T, m: &MmwMixture<T>) -> T {
    (0..m.g())
        .map(|i| m.weights[i] * mweibull::mw_pdf(x, &m.component(i)))
        .sum()
}

pub fn mixture_cdf<T: Real>(x: T, m: &MmwMixture<T>) -> T {
    let f: T = (0..m.g())
        .map(|i| m.weights[i] * mweibull::mw_cdf(x, &m.component(i)))
        .sum();
    f.min(T::one())
}

/// Observed-data log-likelihood of return values under the mixture.
pub fn log_likelihood<T: Real>(values: &[T], m: &MmwMixture<T>) -> Result<T> {
    let mut buf = vec![T::zero(); m.g()];
    let mut total = T::zero();
    for (j, &x) in values.iter().enumerate() {
        if x > m.c {
            return Err(Error::Domain(format!(
                "observation {j} (x = {x}) exceeds mirror constant c = {}",
                m.c
            )));
        }
        let y = m.c - x;
        let lp = if y > T::zero() {
            m.joint_ln(y.ln(), &mut buf);
            log_sum_exp(&buf)
        } else {
            mixture_pdf(x, m).ln()
        };
        if !(lp > T::neg_infinity()) || lp.is_nan() {
            return Err(Error::ZeroDensity {
                index: j,
                value: x.as_f64(),
            });
        }
        total = total + lp;
    }
    Ok(total)
}

/// The mirrored sample in the form the E and M steps consume.
#[derive(Debug, Clone)]
pub struct MirroredSample<T> {
    pub y: Vec<T>,
    pub ln_y: Vec<T>,
}

impl<T: Real> MirroredSample<T> {
    pub fn new(y: Vec<T>) -> Result<Self> {
        if let Some(v) = y.iter().find(|v| !(**v > T::zero())) {
            return Err(Error::Domain(format!("mirrored sample must be positive, got {v}")));
        }
        let ln_y = y.iter().map(|v| v.ln()).collect();
        Ok(Self { y, ln_y })
    }

    pub fn from_returns(values: &[T], c: T) -> Result<Self> {
        let y = values
            .iter()
            .map(|&x| mweibull::mirror_transform(x, c))
            .collect::<Result<Vec<_>>>()?;
        Self::new(y)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Starting point of an EM run.
#[derive(Debug, Clone)]
pub struct Initialization<T> {
    pub model: MmwMixture<T>,
    pub z: Responsibilities<T>,
    /// Components whose moment-matched shape hit the bracket edge.
    pub clamped: usize,
}

/// Hard clustering of `y`, then per-cluster method-of-moments estimates.
/// Weights are cluster proportions.
pub fn initialize<T: Real>(
    y: &[T],
    c: T,
    cfg: &EmConfig,
    seed: u64,
) -> Result<Initialization<T>> {
    cfg.validate()?;
    cfg.check_size(y.len())?;
    let g = cfg.g;
    let n = T::lit(y.len() as f64);
    let mut last_err = None;
    for attempt in 0..em::INIT_ATTEMPTS {
        let labels = em::initial_labels(y, g, cfg.init, crate::seed::derive(seed, &[attempt as u64]))?;
        let z = Responsibilities::from_labels(&labels, g);
        let mut components = Vec::with_capacity(g);
        let mut weights = Vec::with_capacity(g);
        let mut clamped = 0;
        let mut failed = None;
        for i in 0..g {
            let w: Vec<T> = z.column(i).collect();
            weights.push(z.column_sum(i) / n);
            match mom_estimate(y, &w) {
                Ok(est) => {
                    clamped += usize::from(est.clamped);
                    components.push(est.params);
                }
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            }
        }
        match failed {
            None => {
                normalize(&mut weights);
                return Ok(Initialization {
                    model: MmwMixture::new(weights, components, c)?,
                    z,
                    clamped,
                });
            }
            // Deterministic splits cannot be reseeded.
            Some(e) if cfg.init == em::InitMethod::QuantileSplit || g == 1 => return Err(e),
            Some(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or(Error::EmptyCluster {
        attempts: em::INIT_ATTEMPTS,
    }))
}

/// E-step: responsibilities computed in log space with per-row max
/// subtraction.
pub fn e_step<T: Real>(y: &[T], m: &MmwMixture<T>) -> Result<Responsibilities<T>> {
    let sample = MirroredSample::new(y.to_vec())?;
    Ok(m.posterior(&sample)?.0)
}

/// Per-component result of an M-step.
#[derive(Debug, Clone, PartialEq)]
pub struct MStep<T> {
    pub weights: Vec<T>,
    pub components: Vec<WeibullParams<T>>,
    /// One flag per component: shape solve ended on a bracket edge.
    pub clamped: Vec<bool>,
}

/// M-step from responsibilities. `shape_hints` seed the shape solves
/// (previous iterate); any positive guesses are fine.
pub fn m_step<T: Real>(
    sample: &MirroredSample<T>,
    z: &Responsibilities<T>,
    shape_hints: Option<&[T]>,
) -> Result<MStep<T>> {
    let n = sample.len();
    if z.n() != n {
        return Err(Error::Size(format!(
            "{} responsibilities rows for {n} observations",
            z.n()
        )));
    }
    let g = z.g();
    let nf = T::lit(n as f64);
    let min_weight = T::lit(0.5) / nf;
    let mut weights = Vec::with_capacity(g);
    let mut components = Vec::with_capacity(g);
    let mut clamped = Vec::with_capacity(g);
    for i in 0..g {
        let zi: Vec<T> = z.column(i).collect();
        let mass: T = zi.iter().copied().sum();
        if mass < T::lit(COLLAPSE_MASS) {
            return Err(Error::ComponentCollapse {
                component: i,
                message: format!("responsibility mass {mass}"),
            });
        }
        let weight = mass / nf;
        if weight < min_weight {
            return Err(Error::ComponentCollapse {
                component: i,
                message: format!("weight {weight} below 1/(2n)"),
            });
        }
        let hint = shape_hints.map_or(T::one(), |h| h[i]);
        let (params, edge) = weighted_weibull_mle(&sample.ln_y, &zi, mass, hint)
            .map_err(|e| match e {
                Error::Degenerate(message) => Error::ComponentCollapse { component: i, message },
                e => e,
            })?;
        weights.push(weight);
        components.push(params);
        clamped.push(edge);
    }
    normalize(&mut weights);
    Ok(MStep {
        weights,
        components,
        clamped,
    })
}

/// Weighted Weibull maximum likelihood from `ln y`: shape from the profile
/// score equation, scale in closed form.
fn weighted_weibull_mle<T: Real>(
    ln_y: &[T],
    z: &[T],
    mass: T,
    hint: T,
) -> Result<(WeibullParams<T>, bool)> {
    let mean_ln = ln_y.iter().zip(z).map(|(&l, &w)| w * l).sum::<T>() / mass;
    let spread = ln_y
        .iter()
        .zip(z)
        .map(|(&l, &w)| w * (l - mean_ln) * (l - mean_ln))
        .sum::<T>()
        / mass;
    if !(spread > T::epsilon() * T::lit(16.0) * (T::one() + mean_ln * mean_ln)) {
        return Err(Error::Degenerate("zero spread among weighted observations".into()));
    }
    let max_ln = ln_y
        .iter()
        .zip(z)
        .filter(|(_, &w)| w > T::zero())
        .map(|(&l, _)| l)
        .fold(T::neg_infinity(), T::max);

    // score(k) = 1/k − (A(k) − B), A the y^k-tilted mean of ln y; decreasing in k.
    let score = |k: T| {
        let (mut s0, mut s1, mut s2) = (T::zero(), T::zero(), T::zero());
        for (&l, &w) in ln_y.iter().zip(z) {
            if w > T::zero() {
                let d = l - max_ln;
                let t = w * (k * d).exp();
                s0 = s0 + t;
                s1 = s1 + t * d;
                s2 = s2 + t * d * d;
            }
        }
        let a = s1 / s0;
        let var = (s2 / s0 - a * a).max(T::zero());
        let value = k.recip() - (a + max_ln - mean_ln);
        (value, -(k * k).recip() - var)
    };
    let solve = newton_decreasing(
        score,
        T::lit(SHAPE_MIN),
        T::lit(SHAPE_MAX),
        hint,
        T::ROOT_TOL * T::lit(1e-2),
    );
    let shape = solve.value();
    let s0: T = ln_y
        .iter()
        .zip(z)
        .filter(|(_, &w)| w > T::zero())
        .map(|(&l, &w)| w * (shape * (l - max_ln)).exp())
        .sum();
    let scale = (max_ln + (s0 / mass).ln() / shape).exp();
    Ok((WeibullParams { scale, shape }, solve.is_clamped()))
}

impl<T: Real> EmModel<T> for MmwMixture<T> {
    type Data = MirroredSample<T>;

    fn g(&self) -> usize {
        self.weights.len()
    }

    fn free_params(g: usize) -> usize {
        3 * g - 1
    }

    fn posterior(&self, data: &MirroredSample<T>) -> Result<(Responsibilities<T>, T)> {
        let g = self.g();
        let mut z = vec![T::zero(); data.len() * g];
        let mut ll = T::zero();
        for (j, &ly) in data.ln_y.iter().enumerate() {
            let row = &mut z[j * g..(j + 1) * g];
            self.joint_ln(ly, row);
            let lse = log_sum_exp(row);
            if !lse.is_finite() {
                return Err(Error::ZeroDensity {
                    index: j,
                    value: (self.c - data.y[j]).as_f64(),
                });
            }
            for v in row.iter_mut() {
                *v = (*v - lse).exp();
            }
            ll = ll + lse;
        }
        Ok((Responsibilities::from_rows(data.len(), g, z)?, ll))
    }

    fn maximize(&self, data: &MirroredSample<T>, z: &Responsibilities<T>) -> Result<(Self, usize)> {
        let hints: Vec<T> = self.components.iter().map(|p| p.shape).collect();
        let step = m_step(data, z, Some(&hints))?;
        let clamped = step.clamped.iter().filter(|&&c| c).count();
        Ok((
            Self {
                weights: step.weights,
                components: step.components,
                c: self.c,
            },
            clamped,
        ))
    }
}

pub type MmwFit<T> = FitResult<MmwMixture<T>, T>;

/// EM from a given starting model on return values.
pub fn fit_em_from<T: Real>(values: &[T], init: MmwMixture<T>, cfg: &EmConfig) -> Result<MmwFit<T>> {
    let sample = MirroredSample::from_returns(values, init.c)?;
    em::run_em(&sample, values.len(), init, cfg)
}

/// Fit a `cfg.g`-component MMW mixture to return values.
pub fn fit_em_values<T: Real>(values: &[T], cfg: &EmConfig) -> Result<MmwFit<T>> {
    cfg.validate()?;
    cfg.check_size(values.len())?;
    let c = mirror_constant(values)?;
    let sample = MirroredSample::from_returns(values, c)?;
    let starts = if cfg.init == em::InitMethod::QuantileSplit || cfg.g == 1 {
        1
    } else {
        cfg.n_starts
    };
    em::best_of_starts(starts, cfg.seed, |_, seed| {
        let init = initialize(&sample.y, c, cfg, seed)?;
        let mut fit = em::run_em(&sample, values.len(), init.model, cfg)?;
        fit.clamped_solves += init.clamped;
        Ok(fit)
    })
}

pub fn fit_em<T: Real>(returns: &ReturnSeries<T>, cfg: &EmConfig) -> Result<MmwFit<T>> {
    fit_em_values(returns.values(), cfg)
}

/// Fit every `g` in `g_range` and keep the lowest BIC (`m = 3g − 1`).
pub fn select_g_values<T: Real>(values: &[T], g_range: &[usize], cfg: &EmConfig) -> Result<MmwFit<T>> {
    em::select_by_bic(g_range, |g| {
        fit_em_values(
            values,
            &EmConfig {
                g,
                seed: crate::seed::derive(cfg.seed, &[g as u64]),
                ..cfg.clone()
            },
        )
    })
}

pub fn select_g<T: Real>(returns: &ReturnSeries<T>, g_range: &[usize], cfg: &EmConfig) -> Result<MmwFit<T>> {
    select_g_values(returns.values(), g_range, cfg)
}

/// Draw `n` returns from the mixture.
pub fn sample_mixture<T: Real>(m: &MmwMixture<T>, n: usize, seed: u64) -> Vec<T> {
    use rand::Rng as _;
    let mut rng = crate::seed::rng(seed);
    (0..n)
        .map(|_| {
            let i = pick_component(m.weights(), rng.gen::<f64>());
            mweibull::mw_draw(&m.component(i), &mut rng)
        })
        .collect()
}

pub(crate) fn pick_component<T: Real>(weights: &[T], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w.as_f64();
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}
