//! The `mmw` command-line tool: `stats`, `fit`, `var` and `backtest`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;
use serde::Serialize;

use crate::backtest::{self, BacktestReport, RollingConfig, DEFAULT_WINDOW};
use crate::em::{EmConfig, InitMethod, DEFAULT_MAX_ITER, DEFAULT_N_STARTS, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::model::{Family, GSpec, ModelFit, ReturnDistribution};
use crate::report::{self, ModelDocument, Provenance, Stamped};
use crate::returns::{self, Frequency, ReturnSeries, SummaryStats};
use crate::seed;
use crate::var::{self, SimulatedQuantiles, VaREstimate, VarMethod, DEFAULT_N_SIM, MIN_N_SIM};

pub const OUT_DIR_ENV: &str = "MMW_OUT_DIR";
const DEFAULT_PRICE_COLUMN: &str = "close";

#[derive(Debug, Parser)]
#[command(name = "mmw", version, about = "Mirrored Weibull mixture models for return distributions and Value-at-Risk")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Summary statistics of the return series.
    Stats(StatsArgs),
    /// Fit mixture models; write model JSON, density curves and a histogram.
    Fit(FitArgs),
    /// VaR at the requested levels and along an alpha grid.
    Var(VarArgs),
    /// Rolling one-day-ahead VaR forecasts with coverage tests.
    Backtest(BacktestArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "date")]
    pub date_col: String,
    /// Price column; returns are computed as 100·ln(p[t]/p[t−1]). Defaults
    /// to "close" when no returns column is given.
    #[arg(long, conflicts_with = "returns_col")]
    pub price_col: Option<String>,
    /// Column of returns already in percent.
    #[arg(long)]
    pub returns_col: Option<String>,
    /// chrono format string; ISO dates by default.
    #[arg(long)]
    pub date_format: Option<String>,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = ".")]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyChoice {
    Mmw,
    Gmm,
    Tmm,
    All,
}

impl FamilyChoice {
    pub fn families(self) -> Vec<Family> {
        match self {
            FamilyChoice::Mmw => vec![Family::Mmw],
            FamilyChoice::Gmm => vec![Family::Gmm],
            FamilyChoice::Tmm => vec![Family::Tmm],
            FamilyChoice::All => Family::ALL.to_vec(),
        }
    }
}

/// `auto` or a fixed component count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GChoice {
    Auto,
    Fixed(usize),
}

impl FromStr for GChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(GChoice::Auto);
        }
        match s.parse::<usize>() {
            Ok(g) if g >= 1 => Ok(GChoice::Fixed(g)),
            _ => Err(format!("expected `auto` or a positive integer, got `{s}`")),
        }
    }
}

impl fmt::Display for GChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GChoice::Auto => f.write_str("auto"),
            GChoice::Fixed(g) => write!(f, "{g}"),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub family: FamilyChoice,
    /// Component count, or `auto` for BIC selection over 1..=g-max.
    #[arg(long, alias = "fixed-g", default_value = "auto")]
    pub g: GChoice,
    #[arg(long, default_value_t = 4)]
    pub g_max: usize,
    #[arg(long, default_value_t = DEFAULT_N_STARTS)]
    pub n_starts: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, value_enum, default_value = "kmeans")]
    pub init: InitMethod,
}

impl ModelArgs {
    fn g_spec(&self) -> GSpec {
        match self.g {
            GChoice::Auto => GSpec::auto(self.g_max),
            GChoice::Fixed(g) => GSpec::Fixed(g),
        }
    }

    fn em(&self, seed: u64) -> EmConfig {
        EmConfig {
            g: match self.g {
                GChoice::Fixed(g) => g,
                GChoice::Auto => 1,
            },
            max_iter: self.max_iter,
            tol: self.tol,
            init: self.init,
            n_starts: self.n_starts,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.g_max == 0 {
            return Err(Error::Config("--g-max must be at least 1".into()));
        }
        self.em(0).validate()
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StatsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Histogram bins.
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// Points on the density curve.
    #[arg(long, default_value_t = 512)]
    pub grid_points: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VarArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Tail probability; repeat for several levels.
    #[arg(long = "alpha", default_values_t = [0.01, 0.05])]
    pub alphas: Vec<f64>,
    /// Estimation method; repeat for several.
    #[arg(long = "method", value_enum, default_values_t = [VarMethod::CdfBisection, VarMethod::Simulation, VarMethod::Historical])]
    pub methods: Vec<VarMethod>,
    #[arg(long, default_value_t = DEFAULT_N_SIM)]
    pub n_sim: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BacktestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long = "alpha", default_values_t = [0.01])]
    pub alphas: Vec<f64>,
    /// Training window length.
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
}

fn check_alphas(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::Config("at least one --alpha is required".into()));
    }
    match alphas.iter().find(|&&a| !(a > 0.0 && a < 0.5)) {
        Some(a) => Err(Error::Config(format!("--alpha must lie in (0, 0.5), got {a}"))),
        None => Ok(()),
    }
}

/// Loaded input with its content hash.
struct Loaded {
    returns: ReturnSeries<f64>,
    sha256: String,
}

impl InputArgs {
    /// Fill in the default price column.
    fn resolved(&self) -> Self {
        let mut r = self.clone();
        if r.returns_col.is_none() && r.price_col.is_none() {
            r.price_col = Some(DEFAULT_PRICE_COLUMN.into());
        }
        r
    }

    fn load(&self) -> Result<Loaded> {
        let bytes = fs::read(&self.input)?;
        let sha256 = report::sha256_hex(&bytes[..])?;
        let format = self.date_format.as_deref();
        let returns = match (&self.returns_col, &self.price_col) {
            (Some(col), _) => returns::load_returns(&bytes[..], &self.date_col, col, format)?,
            (None, col) => {
                let col = col.as_deref().unwrap_or(DEFAULT_PRICE_COLUMN);
                returns::log_returns(&returns::load_prices(&bytes[..], &self.date_col, col, format)?)?
            }
        };
        Ok(Loaded { returns, sha256 })
    }

    fn prepare_out(&self) -> Result<()> {
        fs::create_dir_all(&self.out)?;
        Ok(())
    }

    fn provenance<C>(&self, command: &str, sha256: &str, config: C) -> Provenance<C> {
        Provenance::new(command, self.seed, &self.input, sha256.to_string(), config)
    }
}

/// Parse arguments and run. Returns the process exit code.
pub fn run_from<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Run a parsed command. `Ok(false)` means outputs were written but some
/// requested computation failed.
pub fn execute(command: &Command) -> Result<bool> {
    match command {
        Command::Stats(a) => cmd_stats(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Var(a) => cmd_var(a),
        Command::Backtest(a) => cmd_backtest(a),
    }
}

#[derive(Debug, Serialize)]
struct StatsBody {
    frequency: Frequency,
    first_date: String,
    last_date: String,
    stats: SummaryStats<f64>,
}

pub fn cmd_stats(args: &StatsArgs) -> Result<bool> {
    let args = StatsArgs {
        input: args.input.resolved(),
    };
    let data = args.input.load()?;
    let stats = returns::summary_stats(data.returns.values())?;
    let r = &data.returns;
    let body = StatsBody {
        frequency: r.frequency(),
        first_date: r.dates()[0].to_string(),
        last_date: r.dates()[r.len() - 1].to_string(),
        stats,
    };
    println!(
        "{:>6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "n", "min", "max", "mean", "std.dev", "skewness", "kurtosis"
    );
    println!(
        "{:>6} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
        stats.n, stats.min, stats.max, stats.mean, stats.std_dev, stats.skewness, stats.kurtosis
    );
    args.input.prepare_out()?;
    let doc = Stamped {
        body,
        provenance: args.input.provenance("stats", &data.sha256, &args),
    };
    report::write_json(&args.input.out.join("stats.json"), &doc)?;
    Ok(true)
}

#[derive(Debug, Serialize)]
struct FamilyFailure {
    family: Family,
    error: String,
}

/// Fit each requested family. Seeds depend only on the root seed and the
/// family.
fn fit_families(values: &[f64], model: &ModelArgs, root: u64) -> (Vec<ModelFit<f64>>, Vec<FamilyFailure>) {
    let mut fits = Vec::new();
    let mut failures = Vec::new();
    for family in model.family.families() {
        let seed = seed::derive(root, &[seed::label("fit"), seed::label(family.name())]);
        match model.g_spec().fit(family, values, &model.em(seed)) {
            Ok(f) => fits.push(f),
            Err(e) => {
                warn!("{family} fit failed: {e}");
                failures.push(FamilyFailure {
                    family,
                    error: e.to_string(),
                });
            }
        }
    }
    (fits, failures)
}

fn print_fits(fits: &[ModelFit<f64>]) {
    println!("{:>6} {:>3} {:>14} {:>14} {:>9}", "family", "g", "loglik", "bic", "converged");
    for f in fits {
        println!(
            "{:>6} {:>3} {:>14.4} {:>14.4} {:>9}",
            f.model.family().name(),
            f.model.g(),
            f.loglik,
            f.bic,
            f.converged
        );
    }
}

fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v}")
}

#[derive(Debug, Serialize)]
struct FitSummary {
    models: Vec<ModelDocument<f64>>,
    failures: Vec<FamilyFailure>,
    best_bic: Option<Family>,
}

pub fn cmd_fit(args: &FitArgs) -> Result<bool> {
    let args = FitArgs {
        input: args.input.resolved(),
        ..args.clone()
    };
    args.model.validate()?;
    if args.bins == 0 || args.grid_points < 2 {
        return Err(Error::Config("--bins must be >= 1 and --grid-points >= 2".into()));
    }
    let data = args.input.load()?;
    let x = data.returns.values();
    let (fits, failures) = fit_families(x, &args.model, args.input.seed);
    args.input.prepare_out()?;
    let out = &args.input.out;
    for fit in &fits {
        let doc = Stamped {
            body: ModelDocument::from(fit),
            provenance: args.input.provenance("fit", &data.sha256, &args),
        };
        report::write_json(&out.join(format!("model_{}.json", fit.model.family())), &doc)?;
    }

    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mut header = vec!["x".to_string()];
    header.extend(fits.iter().map(|f| f.model.family().name().to_string()));
    let n_pts = args.grid_points;
    let rows = (0..n_pts).map(|i| {
        let v = lo + (hi - lo) * i as f64 / (n_pts - 1) as f64;
        let mut row = vec![num(v)];
        row.extend(fits.iter().map(|f| num(f.model.pdf(v))));
        row
    });
    write_csv(&out.join("density.csv"), &header, rows)?;

    let width = (hi - lo) / args.bins as f64;
    let mut counts = vec![0usize; args.bins];
    for &v in x {
        let b = if width > 0.0 { ((v - lo) / width) as usize } else { 0 };
        counts[b.min(args.bins - 1)] += 1;
    }
    let n = x.len() as f64;
    let header: Vec<String> = ["bin_left", "bin_right", "count", "density"].map(String::from).to_vec();
    let rows = counts.iter().enumerate().map(|(i, &c)| {
        let left = lo + width * i as f64;
        let dens = if width > 0.0 { c as f64 / (n * width) } else { 0.0 };
        vec![num(left), num(left + width), c.to_string(), num(dens)]
    });
    write_csv(&out.join("histogram.csv"), &header, rows)?;

    print_fits(&fits);
    let best_bic = fits
        .iter()
        .min_by(|a, b| a.bic.partial_cmp(&b.bic).expect("finite BIC"))
        .map(|f| f.model.family());
    let all_failed = fits.is_empty();
    let summary = Stamped {
        body: FitSummary {
            models: fits.iter().map(ModelDocument::from).collect(),
            failures,
            best_bic,
        },
        provenance: args.input.provenance("fit", &data.sha256, &args),
    };
    report::write_json(&out.join("fit_summary.json"), &summary)?;
    if all_failed {
        return Err(Error::FitFailure(
            summary.body.failures.iter().map(|f| format!("{}: {}", f.family, f.error)).collect(),
        ));
    }
    Ok(true)
}

#[derive(Debug, Serialize)]
struct Agreement {
    family: Family,
    alpha: f64,
    cdf: f64,
    sim: f64,
    standard_error: f64,
    within_3se: bool,
}

#[derive(Debug, Serialize)]
struct EstimateFailure {
    family: Option<Family>,
    alpha: f64,
    method: VarMethod,
    error: String,
}

#[derive(Debug, Serialize)]
struct VarBody {
    models: Vec<ModelDocument<f64>>,
    var_estimates: Vec<VaREstimate<f64>>,
    agreement: Vec<Agreement>,
    failures: Vec<EstimateFailure>,
    fit_failures: Vec<FamilyFailure>,
}

pub fn cmd_var(args: &VarArgs) -> Result<bool> {
    let args = VarArgs {
        input: args.input.resolved(),
        ..args.clone()
    };
    args.model.validate()?;
    check_alphas(&args.alphas)?;
    if args.methods.contains(&VarMethod::Simulation) && args.n_sim < MIN_N_SIM {
        return Err(Error::Config(format!("--n-sim must be at least {MIN_N_SIM}")));
    }
    let mut methods = args.methods.clone();
    methods.sort();
    methods.dedup();
    let data = args.input.load()?;
    let x = data.returns.values();
    let wants = |m| methods.contains(&m);
    let needs_model = wants(VarMethod::CdfBisection) || wants(VarMethod::Simulation);
    let (fits, fit_failures) = if needs_model {
        fit_families(x, &args.model, args.input.seed)
    } else {
        (Vec::new(), Vec::new())
    };
    let sims: Vec<Option<SimulatedQuantiles<f64>>> = fits
        .iter()
        .map(|f| {
            let seed = seed::derive(args.input.seed, &[seed::label("var"), seed::label(f.model.family().name())]);
            wants(VarMethod::Simulation)
                .then(|| SimulatedQuantiles::new(&f.model, args.n_sim, seed))
                .transpose()
        })
        .collect::<Result<_>>()?;

    let mut estimates = Vec::new();
    let mut failures = Vec::new();
    let mut agreement = Vec::new();
    let mut record = |family: Option<Family>, alpha: f64, method, r: Result<VaREstimate<f64>>| match r {
        Ok(e) => {
            estimates.push(e.clone());
            Some(e)
        }
        Err(e) => {
            failures.push(EstimateFailure {
                family,
                alpha,
                method,
                error: e.to_string(),
            });
            None
        }
    };
    for (fit, sim) in fits.iter().zip(&sims) {
        let family = Some(fit.model.family());
        for &alpha in &args.alphas {
            let cdf = wants(VarMethod::CdfBisection)
                .then(|| record(family, alpha, VarMethod::CdfBisection, var::model_var_cdf(&fit.model, alpha)))
                .flatten();
            let simulated = sim
                .as_ref()
                .and_then(|s| record(family, alpha, VarMethod::Simulation, s.estimate(&fit.model, alpha)));
            if let (Some(c), Some(s)) = (cdf, simulated) {
                let se = s.standard_error.unwrap_or(f64::NAN);
                agreement.push(Agreement {
                    family: fit.model.family(),
                    alpha,
                    cdf: c.value,
                    sim: s.value,
                    standard_error: se,
                    within_3se: (c.value - s.value).abs() <= 3.0 * se,
                });
            }
        }
    }
    if wants(VarMethod::Historical) {
        for &alpha in &args.alphas {
            record(None, alpha, VarMethod::Historical, var::historical_var(x, alpha));
        }
    }

    args.input.prepare_out()?;
    let out = &args.input.out;
    let mut header = vec!["alpha".to_string()];
    for f in &fits {
        let name = f.model.family().name();
        if wants(VarMethod::CdfBisection) {
            header.push(format!("{name}_cdf"));
        }
        if wants(VarMethod::Simulation) {
            header.push(format!("{name}_sim"));
            header.push(format!("{name}_sim_se"));
        }
    }
    if wants(VarMethod::Historical) {
        header.push("historical".into());
    }
    let mut rows = Vec::new();
    for alpha in var::default_alpha_grid() {
        let mut row = vec![num(alpha)];
        for (f, sim) in fits.iter().zip(&sims) {
            if wants(VarMethod::CdfBisection) {
                row.push(var::model_var_cdf(&f.model, alpha).map(|e| num(e.value)).unwrap_or_default());
            }
            if let Some(s) = sim {
                match s.estimate(&f.model, alpha) {
                    Ok(e) => {
                        row.push(num(e.value));
                        row.push(num(e.standard_error.unwrap_or(f64::NAN)));
                    }
                    Err(_) => row.extend([String::new(), String::new()]),
                }
            }
        }
        if wants(VarMethod::Historical) {
            row.push(var::historical_var(x, alpha).map(|e| num(e.value)).unwrap_or_default());
        }
        rows.push(row);
    }
    write_csv(&out.join("var_curve.csv"), &header, rows)?;

    println!("{:>6} {:>7} {:>14} {:>12} {:>10}", "family", "alpha", "method", "VaR", "std.err");
    for e in &estimates {
        println!(
            "{:>6} {:>7} {:>14} {:>12.4} {:>10}",
            e.family.map_or("-", Family::name),
            e.alpha,
            e.method.name(),
            e.value,
            e.standard_error.map_or("-".to_string(), |s| format!("{s:.4}"))
        );
    }
    let ok = failures.is_empty() && fit_failures.is_empty();
    let doc = Stamped {
        body: VarBody {
            models: fits.iter().map(ModelDocument::from).collect(),
            var_estimates: estimates,
            agreement,
            failures,
            fit_failures,
        },
        provenance: args.input.provenance("var", &data.sha256, &args),
    };
    report::write_json(&out.join("var.json"), &doc)?;
    Ok(ok)
}

pub fn cmd_backtest(args: &BacktestArgs) -> Result<bool> {
    let args = BacktestArgs {
        input: args.input.resolved(),
        ..args.clone()
    };
    args.model.validate()?;
    check_alphas(&args.alphas)?;
    if args.window == 0 {
        return Err(Error::Config("--window must be at least 1".into()));
    }
    let data = args.input.load()?;
    let r = &data.returns;
    if r.len() <= args.window {
        return Err(Error::Size(format!(
            "need more than {} returns for a {}-day window, got {}",
            args.window,
            args.window,
            r.len()
        )));
    }
    let root = seed::derive(args.input.seed, &[seed::label("backtest")]);
    args.input.prepare_out()?;
    let out = &args.input.out;
    let mut ok = true;
    // [family][alpha] → report
    let mut reports: Vec<(Family, Vec<BacktestReport<f64>>, Vec<Vec<backtest::Forecast<f64>>>)> = Vec::new();
    for family in args.model.family.families() {
        let cfg = RollingConfig {
            window: args.window,
            family,
            g: args.model.g_spec(),
            em: args.model.em(root),
            alpha: args.alphas[0],
        };
        let levels = match backtest::rolling_forecast_levels(r, &cfg, &args.alphas) {
            Ok(l) => l,
            Err(e) => {
                warn!("{family} backtest failed: {e}");
                ok = false;
                continue;
            }
        };
        let mut family_reports = Vec::new();
        for (forecasts, &alpha) in levels.iter().zip(&args.alphas) {
            match backtest::score_forecasts(forecasts, r, &RollingConfig { alpha, ..cfg.clone() }) {
                Ok(rep) => family_reports.push(rep),
                Err(e) => {
                    warn!("{family} at alpha={alpha}: {e}");
                    ok = false;
                }
            }
        }
        reports.push((family, family_reports, levels));
    }

    println!(
        "{:>6} {:>6} {:>5} {:>5} {:>10} {:>8} {:>10} {:>8} {:>10} {:>8}",
        "family", "alpha", "N", "T", "LR_POF", "p", "LR_IND", "p", "MSE", "fail"
    );
    for (family, reps, _) in &reports {
        for rep in reps {
            let (ind, ind_p) = rep
                .christoffersen
                .map_or(("n/a".to_string(), "n/a".to_string()), |t| {
                    (format!("{:.4}", t.statistic), format!("{:.4}", t.p_value))
                });
            println!(
                "{:>6} {:>6} {:>5} {:>5} {:>10.4} {:>8.4} {:>10} {:>8} {:>10.4} {:>8.4}",
                family.name(),
                rep.alpha,
                rep.n_exceed,
                rep.n_evaluated,
                rep.kupiec.statistic,
                rep.kupiec.p_value,
                ind,
                ind_p,
                rep.mse,
                rep.failure_rate
            );
            let doc = Stamped {
                body: rep,
                provenance: args.input.provenance("backtest", &data.sha256, &args),
            };
            report::write_json(&out.join(format!("backtest_{}_{}.json", family, rep.alpha)), &doc)?;
        }
    }

    let header: Vec<String> = ["date", "realized", "var_gmm", "var_tmm", "var_mmw", "var_hist"]
        .map(String::from)
        .to_vec();
    for (k, &alpha) in args.alphas.iter().enumerate() {
        let column = |family: Family, i: usize| -> String {
            reports
                .iter()
                .find(|(f, _, _)| *f == family)
                .and_then(|(_, _, levels)| levels[k][i].var)
                .map(num)
                .unwrap_or_default()
        };
        let rows = (args.window..r.len()).enumerate().map(|(i, t)| {
            let hist = var::historical_var(&r.values()[t - args.window..t], alpha)
                .map(|e| num(e.value))
                .unwrap_or_default();
            vec![
                r.dates()[t].to_string(),
                num(r.values()[t]),
                column(Family::Gmm, i),
                column(Family::Tmm, i),
                column(Family::Mmw, i),
                hist,
            ]
        });
        write_csv(&out.join(format!("forecasts_{alpha}.csv")), &header, rows)?;
    }
    Ok(ok && !reports.is_empty())
}
