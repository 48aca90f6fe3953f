//! Family-agnostic EM driver: configuration, responsibilities, the
//! iterate/stop loop, multi-start, and BIC selection of the component count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::seed;

pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_N_STARTS: usize = 5;
/// Reseeding attempts before an initialization with empty clusters fails.
pub const INIT_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InitMethod {
    Kmeans,
    QuantileSplit,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub g: usize,
    pub max_iter: usize,
    /// Stop once successive log-likelihoods differ by less than this.
    pub tol: f64,
    pub init: InitMethod,
    pub n_starts: usize,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            g: 2,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            init: InitMethod::Kmeans,
            n_starts: DEFAULT_N_STARTS,
            seed: 0,
        }
    }
}

impl EmConfig {
    pub fn with_g(g: usize) -> Self {
        Self {
            g,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.g == 0 {
            return Err(Error::Config("g must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.n_starts == 0 {
            return Err(Error::Config("n_starts must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn check_size(&self, n: usize) -> Result<()> {
        if n < 2 * self.g {
            return Err(Error::Size(format!(
                "{} components need at least {} observations, got {n}",
                self.g,
                2 * self.g
            )));
        }
        Ok(())
    }
}

/// Posterior membership probabilities, `n` rows by `g` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities<T> {
    n: usize,
    g: usize,
    z: Vec<T>,
}

impl<T: Real> Responsibilities<T> {
    pub fn from_rows(n: usize, g: usize, z: Vec<T>) -> Result<Self> {
        if z.len() != n * g {
            return Err(Error::Size(format!(
                "responsibility matrix needs {} entries, got {}",
                n * g,
                z.len()
            )));
        }
        Ok(Self { n, g, z })
    }

    /// One-hot matrix from hard labels.
    pub fn from_labels(labels: &[usize], g: usize) -> Self {
        let mut z = vec![T::zero(); labels.len() * g];
        for (j, &l) in labels.iter().enumerate() {
            z[j * g + l] = T::one();
        }
        Self {
            n: labels.len(),
            g,
            z,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn get(&self, j: usize, i: usize) -> T {
        self.z[j * self.g + i]
    }

    pub fn row(&self, j: usize) -> &[T] {
        &self.z[j * self.g..(j + 1) * self.g]
    }

    pub fn column(&self, i: usize) -> impl Iterator<Item = T> + '_ {
        self.z.iter().skip(i).step_by(self.g).copied()
    }

    pub fn column_sum(&self, i: usize) -> T {
        self.column(i).sum()
    }
}

/// What a model family must provide for the shared EM loop.
pub trait EmModel<T: Real>: Clone + Send + Sync {
    /// Precomputed per-observation data the E and M steps work on.
    type Data: Sync + ?Sized;

    fn g(&self) -> usize;

    /// Free parameters of a `g`-component model of this family.
    fn free_params(g: usize) -> usize;

    /// E-step: responsibilities and the observed-data log-likelihood at the
    /// current parameters.
    fn posterior(&self, data: &Self::Data) -> Result<(Responsibilities<T>, T)>;

    /// M-step. Returns the updated model and how many inner solves hit a
    /// bracket edge.
    fn maximize(&self, data: &Self::Data, z: &Responsibilities<T>) -> Result<(Self, usize)>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult<M, T> {
    pub model: M,
    /// Observed-data log-likelihood at the initial parameters, then after
    /// every EM iteration.
    pub loglik_trace: Vec<T>,
    pub n_iter: usize,
    pub converged: bool,
    pub loglik: T,
    pub bic: T,
    pub n_params: usize,
    pub n_obs: usize,
    /// Which start of a multi-start run produced this fit.
    pub start: usize,
    /// Inner root solves that ended on a bracket edge.
    pub clamped_solves: usize,
}

pub fn bic<T: Real>(n_params: usize, n_obs: usize, loglik: T) -> T {
    T::lit(n_params as f64) * T::lit(n_obs as f64).ln() - T::lit(2.0) * loglik
}

/// Iterate E and M steps from `init` until the log-likelihood change drops
/// below `cfg.tol` or `cfg.max_iter` iterations have run.
pub fn run_em<T: Real, M: EmModel<T>>(
    data: &M::Data,
    n_obs: usize,
    init: M,
    cfg: &EmConfig,
) -> Result<FitResult<M, T>> {
    cfg.validate()?;
    let tol = T::lit(cfg.tol);
    let mut model = init;
    let (mut z, mut ll) = model.posterior(data)?;
    let mut trace = vec![ll];
    let mut clamped = 0;
    let mut converged = false;
    let mut n_iter = 0;
    while n_iter < cfg.max_iter {
        let (next, c) = model.maximize(data, &z)?;
        clamped += c;
        let (next_z, next_ll) = next.posterior(data)?;
        n_iter += 1;
        if next_ll < ll - T::ASCENT_SLACK {
            return Err(Error::AscentViolation {
                iteration: n_iter,
                previous: ll.as_f64(),
                current: next_ll.as_f64(),
            });
        }
        trace.push(next_ll);
        let delta = (next_ll - ll).abs();
        model = next;
        z = next_z;
        ll = next_ll;
        if delta < tol {
            converged = true;
            break;
        }
    }
    let n_params = M::free_params(model.g());
    Ok(FitResult {
        bic: bic(n_params, n_obs, ll),
        model,
        loglik_trace: trace,
        n_iter,
        converged,
        loglik: ll,
        n_params,
        n_obs,
        start: 0,
        clamped_solves: clamped,
    })
}

/// Run `n_starts` independent fits and keep the highest final
/// log-likelihood (earliest start on ties). `attempt(start, seed)` builds
/// and runs one start.
pub fn best_of_starts<T: Real, M: EmModel<T>>(
    n_starts: usize,
    root_seed: u64,
    attempt: impl Fn(usize, u64) -> Result<FitResult<M, T>> + Sync,
) -> Result<FitResult<M, T>> {
    let outcomes: Vec<Result<FitResult<M, T>>> = (0..n_starts)
        .into_par_iter()
        .map(|s| {
            attempt(s, seed::derive(root_seed, &[s as u64])).map(|mut f| {
                f.start = s;
                f
            })
        })
        .collect();
    let mut best: Option<FitResult<M, T>> = None;
    let mut failures = Vec::new();
    for (s, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(fit) => {
                if best.as_ref().map_or(true, |b| fit.loglik > b.loglik) {
                    best = Some(fit);
                }
            }
            Err(e) => failures.push(format!("start {s}: {e}")),
        }
    }
    best.ok_or(Error::FitFailure(failures))
}

/// Fit each `g` and keep the lowest BIC; ties go to the smaller `g`.
/// Individual failures are skipped unless every `g` fails.
pub fn select_by_bic<T: Real, M: Send>(
    g_range: &[usize],
    fit: impl Fn(usize) -> Result<FitResult<M, T>> + Sync,
) -> Result<FitResult<M, T>> {
    if g_range.is_empty() {
        return Err(Error::Config("empty range of component counts".into()));
    }
    let mut gs = g_range.to_vec();
    gs.sort_unstable();
    gs.dedup();
    let fits: Vec<Result<FitResult<M, T>>> = gs.par_iter().map(|&g| fit(g)).collect();
    let mut best: Option<FitResult<M, T>> = None;
    let mut failures = Vec::new();
    for (g, f) in gs.iter().zip(fits) {
        match f {
            Ok(f) => {
                if best.as_ref().map_or(true, |b| f.bic < b.bic) {
                    best = Some(f);
                }
            }
            Err(e) => failures.push(format!("g={g}: {e}")),
        }
    }
    best.ok_or(Error::FitFailure(failures))
}

/// Seeded 1-D k-means (k-means++ seeding, Lloyd iterations). Clusters are
/// relabelled by increasing centre. Returns `None` when a cluster ends up
/// with fewer than `min_size` members.
pub fn kmeans_1d<T: Real, R: Rng + ?Sized>(
    values: &[T],
    k: usize,
    min_size: usize,
    rng: &mut R,
) -> Option<Vec<usize>> {
    let n = values.len();
    let mut centres: Vec<T> = Vec::with_capacity(k);
    centres.push(values[rng.gen_range(0..n)]);
    while centres.len() < k {
        let d2: Vec<f64> = values
            .iter()
            .map(|&v| {
                centres
                    .iter()
                    .map(|&c| ((v - c) * (v - c)).as_f64())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let mut target = rng.gen::<f64>() * total;
        let mut pick = n - 1;
        for (j, &d) in d2.iter().enumerate() {
            if target < d {
                pick = j;
                break;
            }
            target -= d;
        }
        centres.push(values[pick]);
    }

    let nearest = |v: T, centres: &[T]| {
        let mut best = 0;
        for i in 1..centres.len() {
            if (v - centres[i]).abs() < (v - centres[best]).abs() {
                best = i;
            }
        }
        best
    };
    let mut labels: Vec<usize> = values.iter().map(|&v| nearest(v, &centres)).collect();
    for _ in 0..100 {
        let mut sums = vec![T::zero(); k];
        let mut counts = vec![0usize; k];
        for (&v, &l) in values.iter().zip(&labels) {
            sums[l] = sums[l] + v;
            counts[l] += 1;
        }
        if counts.iter().any(|&c| c == 0) {
            return None;
        }
        for i in 0..k {
            centres[i] = sums[i] / T::lit(counts[i] as f64);
        }
        let next: Vec<usize> = values.iter().map(|&v| nearest(v, &centres)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    let mut counts = vec![0usize; k];
    for &l in &labels {
        counts[l] += 1;
    }
    if counts.iter().any(|&c| c < min_size) {
        return None;
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| centres[a].partial_cmp(&centres[b]).expect("finite centres"));
    let mut rank = vec![0; k];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    Some(labels.into_iter().map(|l| rank[l]).collect())
}

/// Sorted sample cut into `k` equal-count blocks; labels follow input order.
pub fn quantile_split<T: Real>(values: &[T], k: usize) -> Vec<usize> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut labels = vec![0; n];
    for (rank, &j) in idx.iter().enumerate() {
        labels[j] = (rank * k / n).min(k - 1);
    }
    labels
}

/// Uniform random allocation. `None` if a cluster gets fewer than
/// `min_size` members.
pub fn random_allocation<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    min_size: usize,
    rng: &mut R,
) -> Option<Vec<usize>> {
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let mut counts = vec![0usize; k];
    for &l in &labels {
        counts[l] += 1;
    }
    counts.iter().all(|&c| c >= min_size).then_some(labels)
}

/// Hard labels from the configured initializer, reseeding up to
/// [`INIT_ATTEMPTS`] times.
pub fn initial_labels<T: Real>(
    values: &[T],
    k: usize,
    method: InitMethod,
    seed: u64,
) -> Result<Vec<usize>> {
    const MIN_SIZE: usize = 2;
    if method == InitMethod::QuantileSplit || k == 1 {
        return Ok(quantile_split(values, k));
    }
    for attempt in 0..INIT_ATTEMPTS {
        let mut rng = seed::rng(seed::derive(seed, &[attempt as u64]));
        let labels = match method {
            InitMethod::Kmeans => kmeans_1d(values, k, MIN_SIZE, &mut rng),
            InitMethod::Random => random_allocation(values.len(), k, MIN_SIZE, &mut rng),
            InitMethod::QuantileSplit => unreachable!(),
        };
        if let Some(l) = labels {
            return Ok(l);
        }
    }
    Err(Error::EmptyCluster {
        attempts: INIT_ATTEMPTS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bic_arithmetic() {
        let b = bic(5, 100, -250.0_f64);
        assert!((b - (5.0 * 100f64.ln() + 500.0)).abs() < 1e-12);
        assert!((b - 523.025_850_929_940_5).abs() < 1e-9);
    }

    #[test]
    fn kmeans_splits_separated_clouds() {
        let v = [10.0_f64, 10.5, 11.0, 1.0, 1.5, 2.0];
        let mut rng = seed::rng(3);
        let labels = kmeans_1d(&v, 2, 1, &mut rng).unwrap();
        assert_eq!(labels, vec![1, 1, 1, 0, 0, 0]);
        let z = Responsibilities::<f64>::from_labels(&labels, 2);
        assert_eq!(z.column(0).collect::<Vec<_>>(), vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn quantile_split_blocks() {
        let v = [5.0_f64, 1.0, 4.0, 2.0, 3.0, 6.0];
        assert_eq!(quantile_split(&v, 2), vec![1, 0, 1, 0, 0, 1]);
        assert_eq!(quantile_split(&v, 3), vec![2, 0, 1, 0, 1, 2]);
    }

    #[test]
    fn initializer_gives_up_after_reseeding() {
        // Only two distinct values: three clusters of size ≥ 2 are impossible with k-means.
        let v = [1.0_f64, 1.0, 1.0, 5.0, 5.0, 5.0];
        assert!(matches!(
            initial_labels(&v, 3, InitMethod::Kmeans, 0),
            Err(Error::EmptyCluster { attempts: INIT_ATTEMPTS })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(EmConfig::default().validate().is_ok());
        assert!(EmConfig { g: 0, ..Default::default() }.validate().is_err());
        assert!(EmConfig { tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(EmConfig { n_starts: 0, ..Default::default() }.validate().is_err());
        assert!(EmConfig { max_iter: 0, ..Default::default() }.validate().is_err());
    }
}
