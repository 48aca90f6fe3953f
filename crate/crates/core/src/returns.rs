//! Price and return series: CSV ingestion, log returns, summary statistics.

use std::io::Read;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

pub const DEFAULT_DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries<T> {
    dates: Vec<NaiveDate>,
    prices: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Daily,
    Monthly,
    Other,
}

/// Dated log returns in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries<T> {
    dates: Vec<NaiveDate>,
    values: Vec<T>,
    frequency: Frequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats<T> {
    pub n: usize,
    pub min: T,
    pub max: T,
    pub mean: T,
    pub std_dev: T,
    pub skewness: T,
    /// Non-excess (a Gaussian has 3).
    pub kurtosis: T,
}

fn check_increasing(dates: &[NaiveDate]) -> Result<()> {
    for (i, w) in dates.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(Error::Data {
                row: i + 2,
                message: format!("dates not strictly increasing ({} then {})", w[0], w[1]),
            });
        }
    }
    Ok(())
}

impl<T: Real> PriceSeries<T> {
    pub fn new(dates: Vec<NaiveDate>, prices: Vec<T>) -> Result<Self> {
        if dates.len() != prices.len() {
            return Err(Error::Size(format!(
                "{} dates but {} prices",
                dates.len(),
                prices.len()
            )));
        }
        check_increasing(&dates)?;
        if let Some(i) = prices.iter().position(|p| !(p.is_finite() && *p > T::zero())) {
            return Err(Error::Data {
                row: i + 1,
                message: format!("price must be positive and finite, got {}", prices[i]),
            });
        }
        Ok(Self { dates, prices })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> &[T] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// Multiply every price by a positive constant.
    pub fn scaled(&self, factor: T) -> Result<Self> {
        Self::new(
            self.dates.clone(),
            self.prices.iter().map(|&p| p * factor).collect(),
        )
    }
}

impl<T: Real> ReturnSeries<T> {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<T>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::Size(format!(
                "{} dates but {} returns",
                dates.len(),
                values.len()
            )));
        }
        check_increasing(&dates)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data {
                row: i + 1,
                message: "return is not finite".into(),
            });
        }
        let frequency = infer_frequency(&dates);
        Ok(Self {
            dates,
            values,
            frequency,
        })
    }

    /// Series with consecutive synthetic daily dates starting 2000-01-01.
    pub fn undated(values: Vec<T>) -> Result<Self> {
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
        let dates = (0..values.len())
            .map(|i| start + Duration::days(i as i64))
            .collect();
        Self::new(dates, values)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Contiguous sub-series `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            dates: self.dates[start..end].to_vec(),
            values: self.values[start..end].to_vec(),
            frequency: self.frequency,
        }
    }
}

fn infer_frequency(dates: &[NaiveDate]) -> Frequency {
    if dates.len() < 2 {
        return Frequency::Other;
    }
    let mut gaps: Vec<i64> = dates
        .windows(2)
        .map(|w| (w[1] - w[0]).num_days())
        .collect();
    gaps.sort_unstable();
    match gaps[gaps.len() / 2] {
        1..=4 => Frequency::Daily,
        25..=35 => Frequency::Monthly,
        _ => Frequency::Other,
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| {
            Error::Schema(format!(
                "column '{name}' not found (have: {})",
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })
}

/// Read (date, value) pairs from two named columns, sorted by date.
fn read_columns<R: Read, T: Real>(
    source: R,
    date_column: &str,
    value_column: &str,
    date_format: Option<&str>,
    validate: impl Fn(f64) -> Option<String>,
) -> Result<(Vec<NaiveDate>, Vec<T>)> {
    let fmt = date_format.unwrap_or(DEFAULT_DATE_FORMAT);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(Error::Schema("missing header row".into()));
    }
    let di = column_index(&headers, date_column)?;
    let vi = column_index(&headers, value_column)?;

    let mut rows: Vec<(NaiveDate, T, usize)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let raw_date = record.get(di).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw_date, fmt).map_err(|e| Error::Data {
            row,
            message: format!("cannot parse date '{raw_date}' with format '{fmt}': {e}"),
        })?;
        let raw = record.get(vi).unwrap_or("");
        if raw.is_empty() {
            return Err(Error::Data {
                row,
                message: format!("blank '{value_column}' cell"),
            });
        }
        let v: f64 = raw.parse().map_err(|_| Error::Data {
            row,
            message: format!("cannot parse '{raw}' as a number"),
        })?;
        if !v.is_finite() {
            return Err(Error::Data {
                row,
                message: format!("non-finite value '{raw}'"),
            });
        }
        if let Some(message) = validate(v) {
            return Err(Error::Data { row, message });
        }
        rows.push((date, T::lit(v), row));
    }
    if rows.is_empty() {
        return Err(Error::Schema("no data rows".into()));
    }
    rows.sort_by_key(|r| r.0);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::Data {
                row: w[1].2,
                message: format!("duplicate date {}", w[1].0),
            });
        }
    }
    Ok(rows.into_iter().map(|(d, v, _)| (d, v)).unzip())
}

/// Load adjusted closing prices from a CSV with a header row.
pub fn load_prices<R: Read, T: Real>(
    source: R,
    date_column: &str,
    price_column: &str,
    date_format: Option<&str>,
) -> Result<PriceSeries<T>> {
    let (dates, prices) = read_columns(source, date_column, price_column, date_format, |p| {
        (p <= 0.0).then(|| format!("price must be positive, got {p}"))
    })?;
    PriceSeries::new(dates, prices)
}

/// Load a pre-computed return column (already in percent).
pub fn load_returns<R: Read, T: Real>(
    source: R,
    date_column: &str,
    return_column: &str,
    date_format: Option<&str>,
) -> Result<ReturnSeries<T>> {
    let (dates, values) =
        read_columns(source, date_column, return_column, date_format, |_| None)?;
    ReturnSeries::new(dates, values)
}

/// `100 · ln(p[t+1] / p[t])`, dated at the later day of each pair.
pub fn log_returns<T: Real>(prices: &PriceSeries<T>) -> Result<ReturnSeries<T>> {
    if prices.len() < 2 {
        return Err(Error::Size(format!(
            "need at least 2 prices for a return, got {}",
            prices.len()
        )));
    }
    let hundred = T::lit(100.0);
    let values = prices
        .prices
        .windows(2)
        .map(|w| hundred * (w[1] / w[0]).ln())
        .collect();
    ReturnSeries::new(prices.dates[1..].to_vec(), values)
}

/// Sample statistics: std dev with n−1, skewness/kurtosis from 1/n central
/// moments.
pub fn summary_stats<T: Real>(values: &[T]) -> Result<SummaryStats<T>> {
    let n = values.len();
    if n < 3 {
        return Err(Error::Size(format!(
            "summary statistics need at least 3 observations, got {n}"
        )));
    }
    let nf = T::lit(n as f64);
    let mean = values.iter().copied().sum::<T>() / nf;
    let (mut m2, mut m3, mut m4) = (T::zero(), T::zero(), T::zero());
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 = m2 + d2;
        m3 = m3 + d2 * d;
        m4 = m4 + d2 * d2;
    }
    if m2 <= T::zero() {
        return Err(Error::Degenerate("constant series has no skewness or kurtosis".into()));
    }
    let std_dev = (m2 / (nf - T::one())).sqrt();
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    let min = values.iter().copied().fold(T::infinity(), T::min);
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    Ok(SummaryStats {
        n,
        // Rounding can push the mean a hair outside [min, max] for near-constant data.
        min,
        max,
        mean: mean.max(min).min(max),
        std_dev,
        skewness: m3 / m2.powf(T::lit(1.5)),
        kurtosis: m4 / (m2 * m2),
    })
}
