//! Gaussian and Student-t mixture baselines, fitted with the same EM driver,
//! stopping rule and multi-start policy as the mirrored Weibull mixture.

use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::em::{self, EmConfig, EmModel, FitResult, Responsibilities};
use crate::error::{Error, Result};
use crate::mixture::{normalize, pick_component};
use crate::real::{log_sum_exp, Real};
use crate::returns::ReturnSeries;
use crate::roots::bisect_decreasing;
use crate::special::{digamma, ln_gamma, normal_cdf, student_t_cdf};

/// Variance floor relative to the sample variance.
const VARIANCE_FLOOR: f64 = 1e-8;
pub const DOF_MIN: f64 = 0.5;
pub const DOF_MAX: f64 = 200.0;
const DOF_START: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture<T> {
    pub weights: Vec<T>,
    pub means: Vec<T>,
    pub variances: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TMixture<T> {
    pub weights: Vec<T>,
    pub locations: Vec<T>,
    pub scales: Vec<T>,
    pub dofs: Vec<T>,
}

/// Return values plus the variance floor used by both baselines.
#[derive(Debug, Clone)]
pub struct BaselineData<T> {
    pub x: Vec<T>,
    pub var_floor: T,
}

impl<T: Real> BaselineData<T> {
    pub fn new(x: &[T]) -> Self {
        let n = T::lit(x.len() as f64);
        let mean = x.iter().copied().sum::<T>() / n;
        let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let floor = (var * T::lit(VARIANCE_FLOOR)).max(T::min_positive_value());
        Self {
            x: x.to_vec(),
            var_floor: floor,
        }
    }
}

fn check_lengths<T>(n: usize, parts: &[&[T]]) -> Result<()> {
    if n == 0 || parts.iter().any(|p| p.len() != n) {
        return Err(Error::Size("mixture parameter vectors must be nonempty and equal length".into()));
    }
    Ok(())
}

fn check_weights<T: Real>(w: &[T]) -> Result<()> {
    let sum: T = w.iter().copied().sum();
    if w.iter().any(|v| !(*v >= T::zero())) || (sum - T::one()).abs() > T::lit(1e-9) {
        return Err(Error::Domain("weights must be non-negative and sum to 1".into()));
    }
    Ok(())
}

fn check_mass<T: Real>(i: usize, mass: T, n: usize) -> Result<T> {
    let nf = T::lit(n as f64);
    if mass < T::lit(1e-10) || mass / nf < T::lit(0.5) / nf {
        return Err(Error::ComponentCollapse {
            component: i,
            message: format!("responsibility mass {mass}"),
        });
    }
    Ok(mass / nf)
}

impl<T: Real> GaussianMixture<T> {
    pub fn new(weights: Vec<T>, means: Vec<T>, variances: Vec<T>) -> Result<Self> {
        check_lengths(weights.len(), &[&means, &variances])?;
        check_weights(&weights)?;
        if variances.iter().any(|v| !(*v > T::zero())) {
            return Err(Error::Domain("variances must be positive".into()));
        }
        Ok(Self {
            weights,
            means,
            variances,
        })
    }

    fn ln_component(&self, i: usize, x: T) -> T {
        let d = x - self.means[i];
        let v = self.variances[i];
        -T::lit(0.5) * ((T::lit(2.0) * T::PI() * v).ln() + d * d / v)
    }

    pub fn pdf(&self, x: T) -> T {
        (0..self.weights.len())
            .map(|i| self.weights[i] * self.ln_component(i, x).exp())
            .sum()
    }

    pub fn cdf(&self, x: T) -> T {
        (0..self.weights.len())
            .map(|i| self.weights[i] * normal_cdf((x - self.means[i]) / self.variances[i].sqrt()))
            .sum::<T>()
            .min(T::one())
    }

    pub fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> T {
        let i = pick_component(&self.weights, rng.gen::<f64>());
        let z: f64 = StandardNormal.sample(rng);
        self.means[i] + self.variances[i].sqrt() * T::lit(z)
    }
}

impl<T: Real> EmModel<T> for GaussianMixture<T> {
    type Data = BaselineData<T>;

    fn g(&self) -> usize {
        self.weights.len()
    }

    fn free_params(g: usize) -> usize {
        3 * g - 1
    }

    fn posterior(&self, data: &BaselineData<T>) -> Result<(Responsibilities<T>, T)> {
        let g = self.g();
        let lw: Vec<T> = self.weights.iter().map(|w| w.ln()).collect();
        posterior_rows(&data.x, g, |x, i| lw[i] + self.ln_component(i, x))
    }

    fn maximize(&self, data: &BaselineData<T>, z: &Responsibilities<T>) -> Result<(Self, usize)> {
        let n = data.x.len();
        let mut weights = Vec::with_capacity(self.g());
        let mut means = Vec::with_capacity(self.g());
        let mut variances = Vec::with_capacity(self.g());
        for i in 0..self.g() {
            let mass = z.column_sum(i);
            weights.push(check_mass(i, mass, n)?);
            let mean = z.column(i).zip(&data.x).map(|(w, &x)| w * x).sum::<T>() / mass;
            let var = z
                .column(i)
                .zip(&data.x)
                .map(|(w, &x)| w * (x - mean) * (x - mean))
                .sum::<T>()
                / mass;
            means.push(mean);
            variances.push(var.max(data.var_floor));
        }
        normalize(&mut weights);
        Ok((
            Self {
                weights,
                means,
                variances,
            },
            0,
        ))
    }
}

impl<T: Real> TMixture<T> {
    pub fn new(weights: Vec<T>, locations: Vec<T>, scales: Vec<T>, dofs: Vec<T>) -> Result<Self> {
        check_lengths(weights.len(), &[&locations, &scales, &dofs])?;
        check_weights(&weights)?;
        if scales.iter().chain(&dofs).any(|v| !(*v > T::zero())) {
            return Err(Error::Domain("scales and degrees of freedom must be positive".into()));
        }
        Ok(Self {
            weights,
            locations,
            scales,
            dofs,
        })
    }

    fn ln_component(&self, i: usize, x: T) -> T {
        let nu = self.dofs[i];
        let half = T::lit(0.5);
        let d = (x - self.locations[i]) / self.scales[i];
        ln_gamma((nu + T::one()) * half) - ln_gamma(nu * half)
            - half * (nu * T::PI()).ln()
            - self.scales[i].ln()
            - (nu + T::one()) * half * (d * d / nu).ln_1p()
    }

    pub fn pdf(&self, x: T) -> T {
        (0..self.weights.len())
            .map(|i| self.weights[i] * self.ln_component(i, x).exp())
            .sum()
    }

    pub fn cdf(&self, x: T) -> T {
        (0..self.weights.len())
            .map(|i| {
                self.weights[i] * student_t_cdf((x - self.locations[i]) / self.scales[i], self.dofs[i])
            })
            .sum::<T>()
            .min(T::one())
    }

    pub fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> T {
        let i = pick_component(&self.weights, rng.gen::<f64>());
        let t: f64 = StudentT::new(self.dofs[i].as_f64())
            .expect("positive degrees of freedom")
            .sample(rng);
        self.locations[i] + self.scales[i] * T::lit(t)
    }
}

impl<T: Real> EmModel<T> for TMixture<T> {
    type Data = BaselineData<T>;

    fn g(&self) -> usize {
        self.weights.len()
    }

    fn free_params(g: usize) -> usize {
        4 * g - 1
    }

    fn posterior(&self, data: &BaselineData<T>) -> Result<(Responsibilities<T>, T)> {
        let g = self.g();
        let lw: Vec<T> = self.weights.iter().map(|w| w.ln()).collect();
        posterior_rows(&data.x, g, |x, i| lw[i] + self.ln_component(i, x))
    }

    fn maximize(&self, data: &BaselineData<T>, z: &Responsibilities<T>) -> Result<(Self, usize)> {
        let n = data.x.len();
        let g = self.g();
        let half = T::lit(0.5);
        let mut next = self.clone();
        let mut clamped = 0;
        for i in 0..g {
            let mass = z.column_sum(i);
            next.weights[i] = check_mass(i, mass, n)?;
            let nu = self.dofs[i];
            // Latent precision weights at the current parameters.
            let u: Vec<T> = data
                .x
                .iter()
                .map(|&x| {
                    let d = (x - self.locations[i]) / self.scales[i];
                    (nu + T::one()) / (nu + d * d)
                })
                .collect();
            let zu: T = z.column(i).zip(&u).map(|(w, &u)| w * u).sum();
            let loc = z
                .column(i)
                .zip(&u)
                .zip(&data.x)
                .map(|((w, &u), &x)| w * u * x)
                .sum::<T>()
                / zu;
            let var = z
                .column(i)
                .zip(&u)
                .zip(&data.x)
                .map(|((w, &u), &x)| w * u * (x - loc) * (x - loc))
                .sum::<T>()
                / mass;
            next.locations[i] = loc;
            next.scales[i] = var.max(data.var_floor).sqrt();

            let mean_log_term = z
                .column(i)
                .zip(&u)
                .map(|(w, &u)| w * (u.ln() - u))
                .sum::<T>()
                / mass;
            let a = (nu + T::one()) * half;
            let constant = T::one() + mean_log_term + digamma(a) - a.ln();
            let solve = bisect_decreasing(
                |ln_nu: T| {
                    let h = ln_nu.exp() * half;
                    h.ln() - digamma(h) + constant
                },
                T::lit(DOF_MIN.ln()),
                T::lit(DOF_MAX.ln()),
                T::ROOT_TOL,
            );
            clamped += usize::from(solve.is_clamped());
            next.dofs[i] = solve.value().exp();
        }
        normalize(&mut next.weights);
        Ok((next, clamped))
    }
}

fn posterior_rows<T: Real>(
    x: &[T],
    g: usize,
    joint: impl Fn(T, usize) -> T,
) -> Result<(Responsibilities<T>, T)> {
    let mut z = vec![T::zero(); x.len() * g];
    let mut ll = T::zero();
    for (j, &xj) in x.iter().enumerate() {
        let row = &mut z[j * g..(j + 1) * g];
        for (i, r) in row.iter_mut().enumerate() {
            *r = joint(xj, i);
        }
        let lse = log_sum_exp(row);
        if !lse.is_finite() {
            return Err(Error::ZeroDensity {
                index: j,
                value: xj.as_f64(),
            });
        }
        for r in row.iter_mut() {
            *r = (*r - lse).exp();
        }
        ll = ll + lse;
    }
    Ok((Responsibilities::from_rows(x.len(), g, z)?, ll))
}

/// Per-cluster weights, means and (1/n) variances from hard labels.
fn cluster_moments<T: Real>(x: &[T], labels: &[usize], g: usize, floor: T) -> (Vec<T>, Vec<T>, Vec<T>) {
    let z = Responsibilities::<T>::from_labels(labels, g);
    let n = T::lit(x.len() as f64);
    let mut w = Vec::with_capacity(g);
    let mut m = Vec::with_capacity(g);
    let mut v = Vec::with_capacity(g);
    for i in 0..g {
        let mass = z.column_sum(i);
        let mean = z.column(i).zip(x).map(|(a, &b)| a * b).sum::<T>() / mass;
        let var = z
            .column(i)
            .zip(x)
            .map(|(a, &b)| a * (b - mean) * (b - mean))
            .sum::<T>()
            / mass;
        w.push(mass / n);
        m.push(mean);
        v.push(var.max(floor));
    }
    normalize(&mut w);
    (w, m, v)
}

fn starts(cfg: &EmConfig) -> usize {
    if cfg.init == em::InitMethod::QuantileSplit || cfg.g == 1 {
        1
    } else {
        cfg.n_starts
    }
}

pub type GmmFit<T> = FitResult<GaussianMixture<T>, T>;
pub type TmmFit<T> = FitResult<TMixture<T>, T>;

pub fn fit_gmm_values<T: Real>(values: &[T], cfg: &EmConfig) -> Result<GmmFit<T>> {
    cfg.validate()?;
    cfg.check_size(values.len())?;
    let data = BaselineData::new(values);
    em::best_of_starts(starts(cfg), cfg.seed, |_, seed| {
        let labels = em::initial_labels(values, cfg.g, cfg.init, seed)?;
        let (w, m, v) = cluster_moments(values, &labels, cfg.g, data.var_floor);
        em::run_em(&data, values.len(), GaussianMixture::new(w, m, v)?, cfg)
    })
}

pub fn fit_gmm<T: Real>(returns: &ReturnSeries<T>, cfg: &EmConfig) -> Result<GmmFit<T>> {
    fit_gmm_values(returns.values(), cfg)
}

pub fn fit_tmm_values<T: Real>(values: &[T], cfg: &EmConfig) -> Result<TmmFit<T>> {
    cfg.validate()?;
    cfg.check_size(values.len())?;
    let data = BaselineData::new(values);
    em::best_of_starts(starts(cfg), cfg.seed, |_, seed| {
        let labels = em::initial_labels(values, cfg.g, cfg.init, seed)?;
        let (w, m, v) = cluster_moments(values, &labels, cfg.g, data.var_floor);
        let scales = v.iter().map(|v| v.sqrt()).collect();
        let dofs = vec![T::lit(DOF_START); cfg.g];
        em::run_em(&data, values.len(), TMixture::new(w, m, scales, dofs)?, cfg)
    })
}

pub fn fit_tmm<T: Real>(returns: &ReturnSeries<T>, cfg: &EmConfig) -> Result<TmmFit<T>> {
    fit_tmm_values(returns.values(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn normal_sample(n: usize, mean: f64, sd: f64, s: u64) -> Vec<f64> {
        let mut rng = seed::rng(s);
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                mean + sd * z
            })
            .collect()
    }

    #[test]
    fn gmm_single_component_is_sample_moments() {
        let x = normal_sample(500, 1.0, 2.0, 1);
        let fit = fit_gmm_values(&x, &EmConfig::with_g(1)).unwrap();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!((fit.model.means[0] - mean).abs() < 1e-12);
        assert!((fit.model.variances[0] - var).abs() < 1e-10);
        assert_eq!(fit.n_params, 2);
    }

    #[test]
    fn gmm_separates_two_clouds() {
        let mut x = normal_sample(600, -5.0, 1.0, 2);
        x.extend(normal_sample(400, 6.0, 1.5, 3));
        let fit = fit_gmm_values(&x, &EmConfig { seed: 4, ..EmConfig::with_g(2) }).unwrap();
        let mut means = fit.model.means.clone();
        means.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((means[0] / -5.0 - 1.0).abs() < 0.05);
        assert!((means[1] / 6.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn gmm_huge_tol_single_iteration() {
        let x = normal_sample(200, 0.0, 1.0, 5);
        let fit = fit_gmm_values(&x, &EmConfig { tol: 1e6, ..EmConfig::with_g(2) }).unwrap();
        assert_eq!(fit.n_iter, 1);
    }

    #[test]
    fn tmm_recovers_heavy_tail_dof() {
        let mut rng = seed::rng(8);
        let t = StudentT::new(4.0).unwrap();
        let x: Vec<f64> = (0..10_000).map(|_| 0.5 + 2.0 * t.sample(&mut rng)).collect();
        let fit = fit_tmm_values(&x, &EmConfig::with_g(1)).unwrap();
        let nu = fit.model.dofs[0];
        assert!((3.0..=5.5).contains(&nu), "nu = {nu}");
        assert_eq!(fit.n_params, 3);

        // Profile-likelihood oracle over a ν grid with location/scale refitted
        // by the same fixed-point equations at each ν.
        let profile = |nu: f64| {
            let (mut loc, mut scale) = (0.5, 2.0);
            for _ in 0..300 {
                let u: Vec<f64> = x
                    .iter()
                    .map(|&v| (nu + 1.0) / (nu + ((v - loc) / scale).powi(2)))
                    .collect();
                let su: f64 = u.iter().sum();
                loc = u.iter().zip(&x).map(|(u, v)| u * v).sum::<f64>() / su;
                scale = (u.iter().zip(&x).map(|(u, v)| u * (v - loc).powi(2)).sum::<f64>()
                    / x.len() as f64)
                    .sqrt();
            }
            let m = TMixture::new(vec![1.0], vec![loc], vec![scale], vec![nu]).unwrap();
            x.iter().map(|&v| m.pdf(v).ln()).sum::<f64>()
        };
        let grid: Vec<f64> = (0..=40).map(|i| 2.0 + 0.125 * i as f64).collect();
        let best = grid
            .iter()
            .copied()
            .max_by(|a, b| profile(*a).partial_cmp(&profile(*b)).unwrap())
            .unwrap();
        assert!((best - nu).abs() <= 0.25, "grid best {best} vs fitted {nu}");
    }

    #[test]
    fn tmm_single_location_is_weighted_mean_fixed_point() {
        let x = normal_sample(400, 3.0, 1.0, 9);
        let cfg = EmConfig {
            tol: 1e-12,
            max_iter: 5000,
            ..EmConfig::with_g(1)
        };
        let m = fit_tmm_values(&x, &cfg).unwrap().model;
        let (loc, s, nu) = (m.locations[0], m.scales[0], m.dofs[0]);
        let u: Vec<f64> = x.iter().map(|&v| (nu + 1.0) / (nu + ((v - loc) / s).powi(2))).collect();
        let weighted = u.iter().zip(&x).map(|(u, v)| u * v).sum::<f64>() / u.iter().sum::<f64>();
        assert!((weighted - loc).abs() < 1e-6);
    }

    #[test]
    fn t_density_approaches_gaussian() {
        let t = TMixture::new(vec![1.0], vec![0.3], vec![1.7], vec![1e7]).unwrap();
        let g = GaussianMixture::new(vec![1.0], vec![0.3], vec![1.7 * 1.7]).unwrap();
        for i in -40..=40 {
            let x = 0.2 * i as f64;
            assert!((t.pdf(x) - g.pdf(x)).abs() < 1e-6);
            assert!((t.cdf(x) - g.cdf(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn tmm_at_large_dof_matches_gmm() {
        // Stratified normal quantiles: no sampling noise, so ν runs to the
        // upper bracket edge.
        let n = 4000;
        let x: Vec<f64> = (0..n)
            .map(|j| {
                let p = (j as f64 + 0.5) / n as f64;
                let root = bisect_decreasing(|z: f64| p - normal_cdf(z), -10.0, 10.0, 1e-13);
                -1.0 + 2.0 * root.value()
            })
            .collect();
        // The likelihood is flat in ν out here, so iterate well past the
        // default stopping rule.
        let tight = EmConfig {
            tol: 1e-12,
            max_iter: 100_000,
            ..EmConfig::with_g(1)
        };
        let t = fit_tmm_values(&x, &tight).unwrap();
        let g = fit_gmm_values(&x, &EmConfig::with_g(1)).unwrap();
        assert!(t.model.dofs[0] > 150.0, "nu = {}", t.model.dofs[0]);
        let (lo, hi) = (x[0], x[n - 1]);
        let mut sup: f64 = 0.0;
        for i in 0..=400 {
            let v = lo + (hi - lo) * i as f64 / 400.0;
            sup = sup.max((t.model.pdf(v) - g.model.pdf(v)).abs());
        }
        assert!(sup < 1e-3, "sup-norm gap {sup}");
    }

    #[test]
    fn baseline_traces_ascend() {
        let mut x = normal_sample(700, -2.0, 1.0, 11);
        x.extend(normal_sample(300, 3.0, 3.0, 12));
        let cfg = EmConfig { seed: 1, ..EmConfig::with_g(3) };
        for trace in [
            fit_gmm_values(&x, &cfg).unwrap().loglik_trace,
            fit_tmm_values(&x, &cfg).unwrap().loglik_trace,
        ] {
            for w in trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-8);
            }
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(GaussianMixture::new(vec![1.0], vec![0.0], vec![0.0]).is_err());
        assert!(TMixture::new(vec![0.5, 0.5], vec![0.0], vec![1.0], vec![3.0]).is_err());
    }
}
