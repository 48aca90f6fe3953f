//! Family-agnostic view of fitted models: a common distribution interface,
//! fitting dispatch and the tagged JSON document.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, GaussianMixture, TMixture};
use crate::em::{self, EmConfig, FitResult};
use crate::error::Result;
use crate::mixture::{self, MmwMixture};
use crate::mweibull;
use crate::real::Real;
use crate::seed;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Mmw,
    Gmm,
    Tmm,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Mmw, Family::Gmm, Family::Tmm];

    pub fn name(self) -> &'static str {
        match self {
            Family::Mmw => "mmw",
            Family::Gmm => "gmm",
            Family::Tmm => "tmm",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A univariate return distribution.
pub trait ReturnDistribution<T: Real> {
    fn family(&self) -> Family;
    fn pdf(&self, x: T) -> T;
    fn cdf(&self, x: T) -> T;
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> T;
    /// A central point and a spread, used to start quantile brackets.
    fn location_scale(&self) -> (T, T);
    /// Exact quantile when one is available.
    fn quantile_closed_form(&self, _level: T) -> Option<T> {
        None
    }
}

impl<T: Real> ReturnDistribution<T> for MmwMixture<T> {
    fn family(&self) -> Family {
        Family::Mmw
    }

    fn pdf(&self, x: T) -> T {
        MmwMixture::pdf(self, x)
    }

    fn cdf(&self, x: T) -> T {
        MmwMixture::cdf(self, x)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let i = mixture::pick_component(self.weights(), rng.gen::<f64>());
        mweibull::mw_draw(&self.component(i), rng)
    }

    fn location_scale(&self) -> (T, T) {
        let spread = self
            .components()
            .iter()
            .map(|p| p.scale)
            .fold(T::zero(), T::max);
        (self.c(), spread)
    }

    fn quantile_closed_form(&self, level: T) -> Option<T> {
        if self.g() == 1 {
            mweibull::mw_quantile(level, &self.component(0)).ok()
        } else {
            None
        }
    }
}

impl<T: Real> ReturnDistribution<T> for GaussianMixture<T> {
    fn family(&self) -> Family {
        Family::Gmm
    }

    fn pdf(&self, x: T) -> T {
        GaussianMixture::pdf(self, x)
    }

    fn cdf(&self, x: T) -> T {
        GaussianMixture::cdf(self, x)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        GaussianMixture::draw(self, rng)
    }

    fn location_scale(&self) -> (T, T) {
        let mean = self.weights.iter().zip(&self.means).map(|(&w, &m)| w * m).sum();
        let sd = self.variances.iter().map(|v| v.sqrt()).fold(T::zero(), T::max);
        (mean, sd)
    }
}

impl<T: Real> ReturnDistribution<T> for TMixture<T> {
    fn family(&self) -> Family {
        Family::Tmm
    }

    fn pdf(&self, x: T) -> T {
        TMixture::pdf(self, x)
    }

    fn cdf(&self, x: T) -> T {
        TMixture::cdf(self, x)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        TMixture::draw(self, rng)
    }

    fn location_scale(&self) -> (T, T) {
        let loc = self.weights.iter().zip(&self.locations).map(|(&w, &m)| w * m).sum();
        let s = self.scales.iter().copied().fold(T::zero(), T::max);
        (loc, s)
    }
}

/// Any fitted model, tagged by family in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FittedModel<T> {
    Mmw(MmwMixture<T>),
    Gmm(GaussianMixture<T>),
    Tmm(TMixture<T>),
}

impl<T: Real> FittedModel<T> {
    pub fn family(&self) -> Family {
        match self {
            FittedModel::Mmw(_) => Family::Mmw,
            FittedModel::Gmm(_) => Family::Gmm,
            FittedModel::Tmm(_) => Family::Tmm,
        }
    }

    pub fn g(&self) -> usize {
        match self {
            FittedModel::Mmw(m) => m.g(),
            FittedModel::Gmm(m) => m.weights.len(),
            FittedModel::Tmm(m) => m.weights.len(),
        }
    }
}

macro_rules! delegate {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            FittedModel::Mmw($m) => $e,
            FittedModel::Gmm($m) => $e,
            FittedModel::Tmm($m) => $e,
        }
    };
}

impl<T: Real> ReturnDistribution<T> for FittedModel<T> {
    fn family(&self) -> Family {
        FittedModel::family(self)
    }

    fn pdf(&self, x: T) -> T {
        delegate!(self, m => ReturnDistribution::pdf(m, x))
    }

    fn cdf(&self, x: T) -> T {
        delegate!(self, m => ReturnDistribution::cdf(m, x))
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        delegate!(self, m => ReturnDistribution::draw(m, rng))
    }

    fn location_scale(&self) -> (T, T) {
        delegate!(self, m => m.location_scale())
    }

    fn quantile_closed_form(&self, level: T) -> Option<T> {
        delegate!(self, m => m.quantile_closed_form(level))
    }
}

pub type ModelFit<T> = FitResult<FittedModel<T>, T>;

fn wrap<M, T>(fit: FitResult<M, T>, f: impl FnOnce(M) -> FittedModel<T>) -> ModelFit<T> {
    FitResult {
        model: f(fit.model),
        loglik_trace: fit.loglik_trace,
        n_iter: fit.n_iter,
        converged: fit.converged,
        loglik: fit.loglik,
        bic: fit.bic,
        n_params: fit.n_params,
        n_obs: fit.n_obs,
        start: fit.start,
        clamped_solves: fit.clamped_solves,
    }
}

/// Fit a `cfg.g`-component model of `family`.
pub fn fit_family<T: Real>(family: Family, values: &[T], cfg: &EmConfig) -> Result<ModelFit<T>> {
    Ok(match family {
        Family::Mmw => wrap(mixture::fit_em_values(values, cfg)?, FittedModel::Mmw),
        Family::Gmm => wrap(baselines::fit_gmm_values(values, cfg)?, FittedModel::Gmm),
        Family::Tmm => wrap(baselines::fit_tmm_values(values, cfg)?, FittedModel::Tmm),
    })
}

/// Fit every `g` in `g_range` and keep the lowest BIC. Each `g` gets its
/// own seed derived from `cfg.seed`.
pub fn select_family<T: Real>(
    family: Family,
    values: &[T],
    g_range: &[usize],
    cfg: &EmConfig,
) -> Result<ModelFit<T>> {
    em::select_by_bic(g_range, |g| {
        fit_family(
            family,
            values,
            &EmConfig {
                g,
                seed: seed::derive(cfg.seed, &[g as u64]),
                ..cfg.clone()
            },
        )
    })
}

/// Component-count policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GSpec {
    Fixed(usize),
    Auto(Vec<usize>),
}

impl GSpec {
    /// BIC selection over `1..=g_max`.
    pub fn auto(g_max: usize) -> Self {
        GSpec::Auto((1..=g_max).collect())
    }

    pub fn fit<T: Real>(&self, family: Family, values: &[T], cfg: &EmConfig) -> Result<ModelFit<T>> {
        match self {
            GSpec::Fixed(g) => fit_family(family, values, &EmConfig { g: *g, ..cfg.clone() }),
            GSpec::Auto(range) => select_family(family, values, range, cfg),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mweibull::WeibullParams;

    #[test]
    fn json_carries_family_tag() {
        let m = FittedModel::Mmw(
            MmwMixture::new(vec![1.0], vec![WeibullParams::new(2.0, 1.5).unwrap()], 10.0).unwrap(),
        );
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.starts_with(r#"{"family":"mmw","weights":[1.0],"components":[{"scale":2.0,"shape":1.5}]"#), "{s}");
        let back: FittedModel<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);

        let g = FittedModel::Gmm(GaussianMixture::new(vec![1.0], vec![0.0], vec![1.0]).unwrap());
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"family":"gmm","weights":[1.0],"means":[0.0],"variances":[1.0]}"#);
    }

    #[test]
    fn dispatch_uses_family_parameter_counts() {
        let x = mixture::sample_mixture(
            &MmwMixture::new(vec![1.0], vec![WeibullParams::new(3.0, 2.0).unwrap()], 12.0).unwrap(),
            400,
            3,
        );
        let cfg = EmConfig::with_g(2);
        for (family, m) in [(Family::Mmw, 5), (Family::Gmm, 5), (Family::Tmm, 7)] {
            let fit = fit_family(family, &x, &cfg).unwrap();
            assert_eq!(fit.model.family(), family);
            assert_eq!(fit.n_params, m);
        }
    }

    #[test]
    fn fixed_and_auto_agree_on_single_range() {
        let x = mixture::sample_mixture(
            &MmwMixture::new(vec![1.0], vec![WeibullParams::new(3.0, 2.0).unwrap()], 12.0).unwrap(),
            300,
            4,
        );
        let cfg = EmConfig::with_g(1);
        let fixed = GSpec::Fixed(1).fit(Family::Gmm, &x, &cfg).unwrap();
        let auto = GSpec::Auto(vec![1]).fit(Family::Gmm, &x, &cfg).unwrap();
        assert_eq!(fixed.model, auto.model);
    }
}
