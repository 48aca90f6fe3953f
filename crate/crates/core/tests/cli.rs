use std::path::{Path, PathBuf};

use clap::Parser;
use serde_json::Value;

use mmw_core::cli::{self, Cli};
use mmw_core::mixture::{self, MmwMixture};
use mmw_core::mweibull::{mw_pdf, MirroredWeibullParams, WeibullParams};
use mmw_core::Error;

fn write_returns(dir: &Path, values: &[f64]) -> PathBuf {
    let start = chrono::NaiveDate::from_ymd_opt(2001, 1, 31).unwrap();
    let mut text = String::from("date,r\n");
    for (i, v) in values.iter().enumerate() {
        let d = start.checked_add_months(chrono::Months::new(i as u32)).unwrap();
        text += &format!("{d},{v}\n");
    }
    let path = dir.join("returns.csv");
    std::fs::write(&path, text).unwrap();
    path
}

fn args(cmd: &str, input: &Path, out: &Path, extra: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = vec!["mmw", cmd, "--input"].into_iter().map(String::from).collect();
    v.push(input.display().to_string());
    v.push("--out".into());
    v.push(out.display().to_string());
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn two_component() -> MmwMixture<f64> {
    MmwMixture::new(
        vec![0.4, 0.6],
        vec![WeibullParams::new(4.0, 1.5).unwrap(), WeibullParams::new(12.0, 6.0).unwrap()],
        20.0,
    )
    .unwrap()
}

#[test]
fn empty_file_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.csv");
    std::fs::write(&input, "").unwrap();
    let a = args("stats", &input, dir.path(), &[]);
    let parsed = Cli::try_parse_from(&a).unwrap();
    assert!(matches!(cli::execute(&parsed.command), Err(Error::Schema(_))));
    assert_ne!(cli::run_from(&a), 0);
}

#[test]
fn missing_column_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    std::fs::write(&input, "day,open\n2020-01-01,1\n2020-01-02,2\n").unwrap();
    let a = args("fit", &input, dir.path(), &["--family", "mmw", "--g", "1"]);
    let parsed = Cli::try_parse_from(&a).unwrap();
    assert!(matches!(cli::execute(&parsed.command), Err(Error::Schema(_))));
    assert_ne!(cli::run_from(&a), 0);
    assert!(!dir.path().join("model_mmw.json").exists());
}

#[test]
fn three_point_stats() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_returns(dir.path(), &[-1.0, 0.0, 1.0]);
    assert_eq!(cli::run_from(args("stats", &input, dir.path(), &["--returns-col", "r"])), 0);
    let doc = read_json(&dir.path().join("stats.json"));
    let s = &doc["stats"];
    assert_eq!(s["n"], 3);
    assert_eq!(s["mean"].as_f64().unwrap(), 0.0);
    assert_eq!(s["skewness"].as_f64().unwrap(), 0.0);
    assert!((s["std_dev"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    // m2 = m4 = 2/3
    assert!((s["kurtosis"].as_f64().unwrap() - 1.5).abs() < 1e-12);
    assert_eq!(doc["frequency"], "monthly");
    assert_eq!(doc["provenance"]["command"], "stats");
}

#[test]
fn single_mmw_component_matches_its_density_curve() {
    let dir = tempfile::tempdir().unwrap();
    let x = mixture::sample_mixture(&two_component(), 400, 3);
    let input = write_returns(dir.path(), &x);
    let code = cli::run_from(args("fit", &input, dir.path(), &["--returns-col", "r", "--family", "mmw", "--g", "1"]));
    assert_eq!(code, 0);
    assert!(!dir.path().join("model_gmm.json").exists());
    let doc = read_json(&dir.path().join("model_mmw.json"));
    assert_eq!(doc["family"], "mmw");
    assert_eq!(doc["g"], 1);
    assert_eq!(doc["weights"][0].as_f64().unwrap(), 1.0);
    let comp = &doc["components"][0];
    let p = MirroredWeibullParams::new(
        comp["scale"].as_f64().unwrap(),
        comp["shape"].as_f64().unwrap(),
        doc["c"].as_f64().unwrap(),
    )
    .unwrap();
    let mut rdr = csv::Reader::from_path(dir.path().join("density.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["x", "mmw"]);
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let (xv, d): (f64, f64) = (rec[0].parse().unwrap(), rec[1].parse().unwrap());
        assert!((d - mw_pdf(xv, &p)).abs() <= 1e-12 * (1.0 + d), "x={xv}");
        rows += 1;
    }
    assert_eq!(rows, 512);
}

#[test]
fn fit_all_prefers_mmw_on_mmw_data() {
    let dir = tempfile::tempdir().unwrap();
    let x = mixture::sample_mixture(&two_component(), 1500, 11);
    let input = write_returns(dir.path(), &x);
    let extra = ["--returns-col", "r", "--family", "all", "--g", "auto", "--g-max", "3", "--n-starts", "2"];
    assert_eq!(cli::run_from(args("fit", &input, dir.path(), &extra)), 0);
    for fam in ["mmw", "gmm", "tmm"] {
        assert!(dir.path().join(format!("model_{fam}.json")).exists());
    }
    let summary = read_json(&dir.path().join("fit_summary.json"));
    assert_eq!(summary["best_bic"], "mmw");
    assert_eq!(summary["models"].as_array().unwrap().len(), 3);
    let mut hist = csv::Reader::from_path(dir.path().join("histogram.csv")).unwrap();
    let total: u64 = hist.records().map(|r| r.unwrap()[2].parse::<u64>().unwrap()).sum();
    assert_eq!(total, 1500);
}

#[test]
fn var_summary_has_one_row_per_alpha_and_method() {
    let dir = tempfile::tempdir().unwrap();
    let x = mixture::sample_mixture(&two_component(), 300, 5);
    let input = write_returns(dir.path(), &x);
    let extra = ["--returns-col", "r", "--g", "1", "--n-sim", "20000", "--alpha", "0.01", "--alpha", "0.05"];
    assert_eq!(cli::run_from(args("var", &input, dir.path(), &extra)), 0);
    let doc = read_json(&dir.path().join("var.json"));
    let est = doc["var_estimates"].as_array().unwrap();
    for fam in ["mmw", "gmm", "tmm"] {
        for method in ["cdf-bisection", "simulation"] {
            let rows: Vec<_> = est.iter().filter(|e| e["family"] == fam && e["method"] == method).collect();
            assert_eq!(rows.len(), 2, "{fam} {method}");
            assert!(rows[0]["value"].as_f64() < rows[1]["value"].as_f64());
        }
    }
    assert_eq!(est.iter().filter(|e| e["method"] == "historical").count(), 2);
    assert_eq!(doc["agreement"].as_array().unwrap().len(), 6);
}

#[test]
fn backtest_window_250_on_300_returns_gives_50_forecasts() {
    let dir = tempfile::tempdir().unwrap();
    let x = mixture::sample_mixture(&two_component(), 300, 9);
    let input = write_returns(dir.path(), &x);
    let extra = ["--returns-col", "r", "--family", "mmw", "--g", "1", "--alpha", "0.05", "--window", "250"];
    assert_eq!(cli::run_from(args("backtest", &input, dir.path(), &extra)), 0);
    let doc = read_json(&dir.path().join("backtest_mmw_0.05.json"));
    let forecasts = doc["forecasts"].as_array().unwrap().len();
    let missing = doc["missing"].as_array().unwrap().len();
    assert_eq!(forecasts + missing, 50);
    assert_eq!(doc["n_evaluated"].as_u64().unwrap() as usize, forecasts);
    let rows = csv::Reader::from_path(dir.path().join("forecasts_0.05.csv")).unwrap().records().count();
    assert_eq!(rows, 50);
}

#[test]
fn backtest_needs_more_than_one_window() {
    let dir = tempfile::tempdir().unwrap();
    let x = mixture::sample_mixture(&two_component(), 250, 9);
    let input = write_returns(dir.path(), &x);
    let extra = ["--returns-col", "r", "--family", "mmw", "--g", "1", "--window", "250"];
    assert_ne!(cli::run_from(args("backtest", &input, dir.path(), &extra)), 0);
}
