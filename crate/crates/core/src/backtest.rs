//! Exceedance tests (Kupiec, Christoffersen), rolling one-step-ahead VaR
//! forecasts and their scoring.

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::em::EmConfig;
use crate::error::{Error, Result};
use crate::model::{Family, FittedModel, GSpec};
use crate::real::Real;
use crate::returns::ReturnSeries;
use crate::seed;
use crate::special::chi2_sf_1df;
use crate::var::{historical_var, model_var_cdf};

pub const DEFAULT_WINDOW: usize = 250;
/// Forecasts per segment when aggregating Kupiec failures.
pub const FAILURE_SEGMENT: usize = 250;
/// Significance level of the pass/fail verdicts.
pub const TEST_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExceedanceSeries {
    pub dates: Vec<NaiveDate>,
    pub indicators: Vec<u8>,
}

impl ExceedanceSeries {
    pub fn count(&self) -> usize {
        self.indicators.iter().map(|&i| usize::from(i)).sum()
    }

    pub fn len(&self) -> usize {
        self.indicators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indicators.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    #[serde(rename = "lr")]
    pub statistic: f64,
    #[serde(rename = "p")]
    pub p_value: f64,
    pub df: u32,
    pub verdict: Verdict,
}

impl TestResult {
    fn from_statistic(lr: f64) -> Result<Self> {
        let lr = lr.max(0.0);
        let p = chi2_sf_1df(lr)?;
        Ok(Self {
            statistic: lr,
            p_value: p,
            df: 1,
            verdict: if p < TEST_LEVEL { Verdict::Fail } else { Verdict::Pass },
        })
    }
}

/// Indicator 1 where the realized return is strictly below the forecast.
pub fn exceedances<T: Real>(
    realized: &ReturnSeries<T>,
    forecast_dates: &[NaiveDate],
    var: &[T],
) -> Result<ExceedanceSeries> {
    if forecast_dates.len() != var.len() || realized.len() != var.len() {
        return Err(Error::Alignment(format!(
            "{} realized returns, {} forecast dates, {} forecasts",
            realized.len(),
            forecast_dates.len(),
            var.len()
        )));
    }
    if var.is_empty() {
        return Err(Error::Size("no forecasts to evaluate".into()));
    }
    if let Some(i) = (0..var.len()).find(|&i| realized.dates()[i] != forecast_dates[i]) {
        return Err(Error::Alignment(format!(
            "realized date {} does not match forecast date {}",
            realized.dates()[i],
            forecast_dates[i]
        )));
    }
    let indicators = realized
        .values()
        .iter()
        .zip(var)
        .map(|(r, v)| u8::from(r < v))
        .collect();
    Ok(ExceedanceSeries {
        dates: forecast_dates.to_vec(),
        indicators,
    })
}

/// `a·ln(b)` with `0·ln 0 = 0`.
fn xlny(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * b.ln()
    }
}

/// Proportion-of-failures likelihood ratio for `n_exceed` exceedances in
/// `n_obs` days at tail probability `alpha`.
pub fn kupiec_test(n_exceed: usize, n_obs: usize, alpha: f64) -> Result<TestResult> {
    if n_obs == 0 || n_exceed > n_obs {
        return Err(Error::Domain(format!("need 0 <= N <= T and T >= 1, got N={n_exceed}, T={n_obs}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let (n, t) = (n_exceed as f64, n_obs as f64);
    let rate = n / t;
    let lr = -2.0 * (xlny(t - n, (1.0 - alpha) / (1.0 - rate)) + xlny(n, alpha / rate));
    TestResult::from_statistic(lr)
}

/// First-order transition counts `[n00, n01, n10, n11]`.
pub fn transition_counts(indicators: &[u8]) -> [usize; 4] {
    let mut n = [0; 4];
    for w in indicators.windows(2) {
        n[usize::from(w[0] != 0) * 2 + usize::from(w[1] != 0)] += 1;
    }
    n
}

/// Independence likelihood ratio. `None` when the sequence never leaves
/// one of the two states, so a conditional rate is undefined.
pub fn christoffersen_test(indicators: &[u8]) -> Result<Option<TestResult>> {
    if indicators.len() < 2 {
        return Err(Error::Size("independence test needs at least 2 indicators".into()));
    }
    let [n00, n01, n10, n11] = transition_counts(indicators).map(|v| v as f64);
    if n10 + n11 == 0.0 || n00 + n01 == 0.0 {
        return Ok(None);
    }
    let pi = (n01 + n11) / (n00 + n01 + n10 + n11);
    let pi01 = n01 / (n00 + n01);
    let pi11 = n11 / (n10 + n11);
    // ln L0 − ln L1, term by term.
    let ln_ratio = xlny(n00, (1.0 - pi) / (1.0 - pi01))
        + xlny(n01, pi / pi01)
        + xlny(n10, (1.0 - pi) / (1.0 - pi11))
        + xlny(n11, pi / pi11);
    TestResult::from_statistic(-2.0 * ln_ratio).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingConfig {
    pub window: usize,
    pub family: Family,
    pub g: GSpec,
    pub em: EmConfig,
    pub alpha: f64,
}

/// One-day-ahead forecast for `date`, fitted on the preceding window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast<T> {
    pub date: NaiveDate,
    /// Position of the forecast day in the return series.
    pub index: usize,
    pub realized: T,
    /// `None` when the window's fit failed.
    pub var: Option<T>,
    /// Historical VaR of the same window.
    pub hist_var: T,
    pub converged: bool,
    pub g: Option<usize>,
    pub n_iter: usize,
    /// Realized return above the fitted mirror constant (MMW only).
    pub beyond_support: bool,
    pub reason: Option<String>,
}

/// Fit one window and forecast day `t` at every level in `alphas`.
fn window_forecasts<T: Real>(
    returns: &ReturnSeries<T>,
    t: usize,
    cfg: &RollingConfig,
    alphas: &[f64],
) -> Result<Vec<Forecast<T>>> {
    let train = &returns.values()[t - cfg.window..t];
    let realized = returns.values()[t];
    let em = EmConfig {
        seed: seed::derive(cfg.em.seed, &[seed::label(cfg.family.name()), t as u64]),
        ..cfg.em.clone()
    };
    let fit = cfg.g.fit(cfg.family, train, &em);
    alphas
        .iter()
        .map(|&a| {
            let alpha = T::lit(a);
            let mut f = Forecast {
                date: returns.dates()[t],
                index: t,
                realized,
                var: None,
                hist_var: historical_var(train, alpha)?.value,
                converged: false,
                g: None,
                n_iter: 0,
                beyond_support: false,
                reason: None,
            };
            let var = fit
                .as_ref()
                .map_err(|e| e.to_string())
                .and_then(|fit| model_var_cdf(&fit.model, alpha).map(|v| (fit, v.value)).map_err(|e| e.to_string()));
            match var {
                Ok((fit, v)) => {
                    if let FittedModel::Mmw(m) = &fit.model {
                        f.beyond_support = realized > m.c();
                    }
                    f.var = Some(v);
                    f.converged = fit.converged;
                    f.g = Some(fit.model.g());
                    f.n_iter = fit.n_iter;
                }
                Err(e) => f.reason = Some(e),
            }
            Ok(f)
        })
        .collect()
}

/// Refit on each trailing window of `cfg.window` returns and forecast the
/// next day's VaR at `cfg.alpha`. Windows run in parallel; output is in
/// date order.
pub fn rolling_forecast<T: Real>(returns: &ReturnSeries<T>, cfg: &RollingConfig) -> Result<Vec<Forecast<T>>> {
    Ok(rolling_forecast_levels(returns, cfg, &[cfg.alpha])?.remove(0))
}

/// As [`rolling_forecast`], fitting each window once and forecasting at
/// every level in `alphas` (`cfg.alpha` is ignored). Indexed
/// `[alpha][day]`.
pub fn rolling_forecast_levels<T: Real>(
    returns: &ReturnSeries<T>,
    cfg: &RollingConfig,
    alphas: &[f64],
) -> Result<Vec<Vec<Forecast<T>>>> {
    cfg.em.validate()?;
    if cfg.window == 0 || returns.len() <= cfg.window {
        return Err(Error::Size(format!(
            "need more than {} returns for a rolling forecast, got {}",
            cfg.window,
            returns.len()
        )));
    }
    if alphas.is_empty() {
        return Err(Error::Config("no alpha levels requested".into()));
    }
    if let Some(a) = alphas.iter().find(|&&a| !(a > 0.0 && a < 0.5)) {
        return Err(Error::Config(format!("alpha must lie in (0, 0.5), got {a}")));
    }
    let per_day: Vec<Vec<Forecast<T>>> = (cfg.window..returns.len())
        .into_par_iter()
        .map(|t| window_forecasts(returns, t, cfg, alphas))
        .collect::<Result<_>>()?;
    let mut out: Vec<Vec<Forecast<T>>> = vec![Vec::with_capacity(per_day.len()); alphas.len()];
    for day in per_day {
        for (k, f) in day.into_iter().enumerate() {
            out[k].push(f);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastEntry<T> {
    pub date: NaiveDate,
    pub var: Option<T>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingForecast {
    pub date: NaiveDate,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport<T> {
    pub family: Family,
    pub alpha: f64,
    pub window: usize,
    pub forecasts: Vec<ForecastEntry<T>>,
    /// Indicators for the forecasts that exist, in date order.
    pub exceedances: Vec<u8>,
    pub n_exceed: usize,
    pub n_evaluated: usize,
    pub kupiec: TestResult,
    /// `null` when the independence test is not applicable.
    pub christoffersen: Option<TestResult>,
    /// Mean squared gap between model and historical VaR of the same window.
    pub mse: T,
    /// Share of non-overlapping forecast segments where Kupiec rejects.
    pub failure_rate: f64,
    pub missing: Vec<MissingForecast>,
    pub beyond_support: usize,
}

/// Share of segments of `FAILURE_SEGMENT` consecutive indicators where the
/// Kupiec test fails. A trailing partial segment counts only when it is the
/// only one.
pub fn failure_rate(indicators: &[u8], alpha: f64) -> Result<f64> {
    if indicators.is_empty() {
        return Err(Error::Size("no indicators".into()));
    }
    let segments: Vec<&[u8]> = if indicators.len() < FAILURE_SEGMENT {
        vec![indicators]
    } else {
        indicators.chunks_exact(FAILURE_SEGMENT).collect()
    };
    let mut failed = 0;
    for s in &segments {
        let n = s.iter().map(|&i| usize::from(i)).sum();
        if kupiec_test(n, s.len(), alpha)?.verdict == Verdict::Fail {
            failed += 1;
        }
    }
    Ok(failed as f64 / segments.len() as f64)
}

/// Score a forecast series against the realized returns it was built from.
pub fn score_forecasts<T: Real>(
    forecasts: &[Forecast<T>],
    returns: &ReturnSeries<T>,
    cfg: &RollingConfig,
) -> Result<BacktestReport<T>> {
    let ok: Vec<&Forecast<T>> = forecasts.iter().filter(|f| f.var.is_some()).collect();
    if ok.is_empty() {
        let reasons = forecasts.iter().filter_map(|f| f.reason.clone()).collect();
        return Err(Error::FitFailure(reasons));
    }
    let idx: Vec<usize> = ok.iter().map(|f| f.index).collect();
    if idx.iter().any(|&i| i >= returns.len()) {
        return Err(Error::Alignment("forecast index beyond the return series".into()));
    }
    let realized = ReturnSeries::new(
        idx.iter().map(|&i| returns.dates()[i]).collect(),
        idx.iter().map(|&i| returns.values()[i]).collect(),
    )?;
    let dates: Vec<NaiveDate> = ok.iter().map(|f| f.date).collect();
    let var: Vec<T> = ok.iter().map(|f| f.var.expect("filtered")).collect();
    let exc = exceedances(&realized, &dates, &var)?;
    let n_exceed = exc.count();
    let kupiec = kupiec_test(n_exceed, exc.len(), cfg.alpha)?;
    let christoffersen = if exc.len() >= 2 {
        christoffersen_test(&exc.indicators)?
    } else {
        None
    };
    let mse = ok
        .iter()
        .map(|f| {
            let d = f.var.expect("filtered") - f.hist_var;
            d * d
        })
        .sum::<T>()
        / T::lit(ok.len() as f64);
    Ok(BacktestReport {
        family: cfg.family,
        alpha: cfg.alpha,
        window: cfg.window,
        forecasts: forecasts
            .iter()
            .map(|f| ForecastEntry {
                date: f.date,
                var: f.var,
                converged: f.converged,
            })
            .collect(),
        failure_rate: failure_rate(&exc.indicators, cfg.alpha)?,
        n_exceed,
        n_evaluated: exc.len(),
        exceedances: exc.indicators,
        kupiec,
        christoffersen,
        mse,
        missing: forecasts
            .iter()
            .filter_map(|f| {
                f.reason.as_ref().map(|r| MissingForecast {
                    date: f.date,
                    reason: r.clone(),
                })
            })
            .collect(),
        beyond_support: forecasts.iter().filter(|f| f.beyond_support).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct products of per-step likelihoods.
    fn brute_kupiec(seq: &[u8], alpha: f64) -> f64 {
        let n = seq.iter().filter(|&&i| i == 1).count() as f64;
        let rate = n / seq.len() as f64;
        let (mut l0, mut l1) = (1.0f64, 1.0f64);
        for &i in seq {
            if i == 1 {
                l0 *= alpha;
                l1 *= rate;
            } else {
                l0 *= 1.0 - alpha;
                l1 *= 1.0 - rate;
            }
        }
        -2.0 * (l0 / l1).ln()
    }

    fn brute_christoffersen(seq: &[u8]) -> Option<f64> {
        let mut counts = [[0.0f64; 2]; 2];
        for w in seq.windows(2) {
            counts[w[0] as usize][w[1] as usize] += 1.0;
        }
        let from0 = counts[0][0] + counts[0][1];
        let from1 = counts[1][0] + counts[1][1];
        if from0 == 0.0 || from1 == 0.0 {
            return None;
        }
        let pi = (counts[0][1] + counts[1][1]) / (from0 + from1);
        let p = [counts[0][1] / from0, counts[1][1] / from1];
        let (mut l0, mut l1) = (1.0f64, 1.0f64);
        for w in seq.windows(2) {
            let (a, b) = (w[0] as usize, w[1] as usize);
            l0 *= if b == 1 { pi } else { 1.0 - pi };
            l1 *= if b == 1 { p[a] } else { 1.0 - p[a] };
        }
        Some(-2.0 * (l0 / l1).ln())
    }

    #[test]
    fn kupiec_worked_value() {
        let r = kupiec_test(5, 250, 0.01).unwrap();
        assert!((r.statistic - 1.9568).abs() < 1e-3, "{}", r.statistic);
        assert!((r.p_value - 0.162).abs() < 1e-3);
        assert_eq!(r.verdict, Verdict::Pass);
        let exact = kupiec_test(5, 100, 0.05).unwrap();
        assert_eq!(exact.statistic, 0.0);
        assert_eq!(exact.p_value, 1.0);
        assert!(kupiec_test(3, 2, 0.05).is_err());
        assert!(kupiec_test(0, 0, 0.05).is_err());
    }

    #[test]
    fn tests_match_brute_force_exhaustively() {
        for t in 1..=12usize {
            for bits in 0u32..(1 << t) {
                let seq: Vec<u8> = (0..t).map(|k| ((bits >> k) & 1) as u8).collect();
                let n = seq.iter().filter(|&&i| i == 1).count();
                for alpha in [0.01, 0.05, 0.3] {
                    let lr = kupiec_test(n, t, alpha).unwrap().statistic;
                    let oracle = brute_kupiec(&seq, alpha).max(0.0);
                    assert!((lr - oracle).abs() < 1e-9 * oracle.max(1.0), "{seq:?}");
                }
                if t >= 2 {
                    let lr = christoffersen_test(&seq).unwrap().map(|r| r.statistic);
                    let oracle = brute_christoffersen(&seq).map(|v| v.max(0.0));
                    match (lr, oracle) {
                        (Some(a), Some(b)) => assert!((a - b).abs() < 1e-9 * b.max(1.0), "{seq:?}"),
                        (None, None) => {}
                        other => panic!("{seq:?}: {other:?}"),
                    }
                }
            }
        }
    }

    #[test]
    fn christoffersen_examples() {
        // n00 = n01 = n10 = n11 = 2.
        let equal = [0u8, 0, 1, 1, 0, 0, 1, 1, 0];
        let [n00, n01, n10, n11] = transition_counts(&equal);
        assert_eq!(n01 as f64 / (n00 + n01) as f64, n11 as f64 / (n10 + n11) as f64);
        assert!(christoffersen_test(&equal).unwrap().unwrap().statistic.abs() < 1e-12);

        let seq = [0u8, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 1];
        let lr = christoffersen_test(&seq).unwrap().unwrap().statistic;
        assert!((lr - brute_christoffersen(&seq).unwrap()).abs() < 1e-12);

        assert_eq!(christoffersen_test(&[0, 0, 0, 0, 1]).unwrap(), None);
        assert!(christoffersen_test(&[1]).is_err());
    }

    #[test]
    fn exceedance_rules() {
        let dates: Vec<NaiveDate> = ReturnSeries::undated(vec![0.0; 5]).unwrap().dates().to_vec();
        let realized = ReturnSeries::new(dates.clone(), vec![-3.0, -1.0, -2.0, 0.5, -2.5]).unwrap();
        let var = [-2.0, -2.0, -2.0, -2.0, -2.0];
        let e = exceedances(&realized, &dates, &var).unwrap();
        assert_eq!(e.indicators, vec![1, 0, 0, 0, 1]);
        assert_eq!(e.count(), 2);
        let above = exceedances(&realized, &dates, &[-10.0; 5]).unwrap();
        assert_eq!(above.count(), 0);
        let mut shifted = dates.clone();
        shifted[2] = dates[4] + chrono::Duration::days(1);
        assert!(matches!(exceedances(&realized, &shifted, &var), Err(Error::Alignment(_))));
        assert!(matches!(exceedances(&realized, &dates[..4], &var[..4]), Err(Error::Alignment(_))));
    }

    #[test]
    fn failure_rate_segments() {
        let mut calibrated = vec![0u8; 500];
        for i in (0..500).step_by(20) {
            calibrated[i] = 1;
        }
        assert_eq!(failure_rate(&calibrated, 0.05).unwrap(), 0.0);
        let mut second_bad = calibrated.clone();
        for v in &mut second_bad[250..300] {
            *v = 1;
        }
        assert_eq!(failure_rate(&second_bad, 0.05).unwrap(), 0.5);
        // A trailing partial segment is ignored.
        second_bad.extend([1u8; 100]);
        assert_eq!(failure_rate(&second_bad, 0.05).unwrap(), 0.5);
        assert_eq!(failure_rate(&[1u8; 10], 0.05).unwrap(), 1.0);
    }

    fn toy_forecast(i: usize, date: NaiveDate, realized: f64, var: Option<f64>, hist: f64) -> Forecast<f64> {
        Forecast {
            date,
            index: i,
            realized,
            var,
            hist_var: hist,
            converged: var.is_some(),
            g: var.map(|_| 1),
            n_iter: 1,
            beyond_support: false,
            reason: var.is_none().then(|| "failed".to_string()),
        }
    }

    fn toy_cfg() -> RollingConfig {
        RollingConfig {
            window: 2,
            family: Family::Gmm,
            g: GSpec::Fixed(1),
            em: EmConfig::with_g(1),
            alpha: 0.05,
        }
    }

    #[test]
    fn score_two_point_toy() {
        let r = ReturnSeries::undated(vec![0.0, 0.0, -1.0, -4.0]).unwrap();
        let d = r.dates().to_vec();
        let fc = vec![
            toy_forecast(2, d[2], -1.0, Some(-3.0), -2.0),
            toy_forecast(3, d[3], -4.0, Some(-3.5), -1.5),
        ];
        let rep = score_forecasts(&fc, &r, &toy_cfg()).unwrap();
        assert!((rep.mse - (1.0 + 4.0) / 2.0).abs() < 1e-15);
        assert_eq!(rep.exceedances, vec![0, 1]);
        assert_eq!(rep.n_exceed, 1);

        let same = vec![
            toy_forecast(2, d[2], -1.0, Some(-2.0), -2.0),
            toy_forecast(3, d[3], -4.0, None, -1.5),
        ];
        let rep = score_forecasts(&same, &r, &toy_cfg()).unwrap();
        assert_eq!(rep.mse, 0.0);
        assert_eq!(rep.missing.len(), 1);
        assert_eq!(rep.forecasts.len(), 2);
        assert_eq!(rep.christoffersen, None);
    }

    #[test]
    fn rolling_boundary_and_determinism() {
        let x = crate::mixture::sample_mixture(
            &crate::mixture::MmwMixture::new(
                vec![1.0],
                vec![crate::mweibull::WeibullParams::new(3.0, 2.5).unwrap()],
                8.0,
            )
            .unwrap(),
            61,
            5,
        );
        let r = ReturnSeries::undated(x).unwrap();
        let cfg = RollingConfig {
            window: 60,
            family: Family::Mmw,
            g: GSpec::Fixed(1),
            em: EmConfig::with_g(1),
            alpha: 0.05,
        };
        let a = rolling_forecast(&r, &cfg).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].date, r.dates()[60]);
        assert_eq!(a, rolling_forecast(&r, &cfg).unwrap());
        assert!(rolling_forecast(&r.slice(0, 60), &cfg).is_err());
    }
}
