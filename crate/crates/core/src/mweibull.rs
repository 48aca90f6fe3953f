//! The mirrored Weibull distribution.
//!
//! A mirrored Weibull variable is `X = c − Y` with `Y ~ Weibull(scale, shape)`,
//! so it lives on `(−∞, c]`. The mirror constant `c` is fixed from the data
//! (ceiling of the absolute sample maximum) and is not a free parameter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::roots::bisect_decreasing;
use crate::seed;
use crate::special::ln_gamma;

/// Bracket for every shape solve.
pub const SHAPE_MIN: f64 = 0.05;
pub const SHAPE_MAX: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams<T> {
    pub scale: T,
    pub shape: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MirroredWeibullParams<T> {
    pub scale: T,
    pub shape: T,
    pub c: T,
}

impl<T: Real> WeibullParams<T> {
    pub fn new(scale: T, shape: T) -> Result<Self> {
        if !(scale > T::zero() && scale.is_finite()) {
            return Err(Error::Domain(format!("scale must be positive, got {scale}")));
        }
        if !(shape > T::zero() && shape.is_finite()) {
            return Err(Error::Domain(format!("shape must be positive, got {shape}")));
        }
        Ok(Self { scale, shape })
    }

    pub fn mirrored(self, c: T) -> MirroredWeibullParams<T> {
        MirroredWeibullParams {
            scale: self.scale,
            shape: self.shape,
            c,
        }
    }

    /// Weibull density on `y ≥ 0`.
    pub fn pdf(&self, y: T) -> T {
        if y < T::zero() {
            return T::zero();
        }
        let r = y / self.scale;
        self.shape / self.scale * r.powf(self.shape - T::one()) * (-r.powf(self.shape)).exp()
    }

    /// Log density for `y > 0`, written in terms of `ln y`.
    #[inline]
    pub fn ln_pdf_from_ln(&self, ln_y: T) -> T {
        let ln_r = ln_y - self.scale.ln();
        self.shape.ln() - self.scale.ln() + (self.shape - T::one()) * ln_r
            - (self.shape * ln_r).exp()
    }

    pub fn ln_pdf(&self, y: T) -> T {
        if y <= T::zero() {
            return self.pdf(y).ln();
        }
        self.ln_pdf_from_ln(y.ln())
    }

    /// Weibull CDF on `y ≥ 0`.
    pub fn cdf(&self, y: T) -> T {
        if y <= T::zero() {
            return T::zero();
        }
        -(-(y / self.scale).powf(self.shape)).exp_m1()
    }

    pub fn mean(&self) -> T {
        self.scale * ln_gamma(T::one() + self.shape.recip()).exp()
    }
}

impl<T: Real> MirroredWeibullParams<T> {
    pub fn new(scale: T, shape: T, c: T) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::Domain(format!("mirror constant must be finite, got {c}")));
        }
        Ok(WeibullParams::new(scale, shape)?.mirrored(c))
    }

    pub fn unmirrored(&self) -> WeibullParams<T> {
        WeibullParams {
            scale: self.scale,
            shape: self.shape,
        }
    }
}

/// `ceil(|max(values)|)`, bumped by one when the maximum sits on that
/// integer so every mirrored point `c − x` is strictly positive.
pub fn mirror_constant<T: Real>(values: &[T]) -> Result<T> {
    if values.is_empty() {
        return Err(Error::Size("mirror constant of an empty series".into()));
    }
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    let c = max.abs().ceil();
    if c - max < T::lit(1e-9) {
        Ok(c + T::one())
    } else {
        Ok(c)
    }
}

/// `y = c − x`; requires `x ≤ c`.
pub fn mirror_transform<T: Real>(x: T, c: T) -> Result<T> {
    if x > c {
        return Err(Error::Domain(format!("x = {x} exceeds mirror constant c = {c}")));
    }
    Ok(c - x)
}

/// Density of the mirrored Weibull; zero above `c`.
pub fn mw_pdf<T: Real>(x: T, p: &MirroredWeibullParams<T>) -> T {
    if x > p.c {
        return T::zero();
    }
    p.unmirrored().pdf(p.c - x)
}

/// `exp(−((c − x)/scale)^shape)` below `c`, saturating at 1 above.
pub fn mw_cdf<T: Real>(x: T, p: &MirroredWeibullParams<T>) -> T {
    if x >= p.c {
        return T::one();
    }
    (-((p.c - x) / p.scale).powf(p.shape)).exp()
}

/// Closed-form inverse of [`mw_cdf`].
pub fn mw_quantile<T: Real>(level: T, p: &MirroredWeibullParams<T>) -> Result<T> {
    if !(level > T::zero() && level < T::one()) {
        return Err(Error::Domain(format!("probability level must be in (0, 1), got {level}")));
    }
    Ok(p.c - p.scale * (-level.ln()).powf(p.shape.recip()))
}

/// One inverse-transform draw.
pub fn mw_draw<T: Real, R: rand::Rng + ?Sized>(p: &MirroredWeibullParams<T>, rng: &mut R) -> T {
    let u = seed::open_unit(rng);
    // u ∈ (0, 1) so the quantile is defined; `(−ln u)^(1/shape)` is evaluated
    // in f64 before narrowing.
    let q = (-u.ln()).powf(1.0 / p.shape.as_f64());
    p.c - p.scale * T::lit(q)
}

/// `n` inverse-transform draws, deterministic in `seed`.
pub fn mw_sample<T: Real>(p: &MirroredWeibullParams<T>, n: usize, seed: u64) -> Vec<T> {
    let mut rng = seed::rng(seed);
    (0..n).map(|_| mw_draw(p, &mut rng)).collect()
}

/// Result of a method-of-moments fit. `clamped` is set when the sample's
/// coefficient of variation lies outside what the shape bracket can reach.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomEstimate<T> {
    pub params: WeibullParams<T>,
    pub clamped: bool,
}

/// `ln(1 + CV²)` of a Weibull with the given shape; decreasing in shape.
fn ln_one_plus_cv2<T: Real>(shape: T) -> T {
    let inv = shape.recip();
    ln_gamma(T::one() + inv + inv) - ln_gamma(T::one() + inv) * T::lit(2.0)
}

/// Method-of-moments Weibull fit to a weighted positive sample.
///
/// The shape matches the sample's squared coefficient of variation
/// `s²/ȳ² = Γ(1+2/k)/Γ(1+1/k)² − 1` (bisection on `ln k` over
/// `[0.05, 100]`), then `scale = ȳ / Γ(1 + 1/k)`. The variance uses the
/// `Σw − 1` denominator.
pub fn mom_estimate<T: Real>(y: &[T], weights: &[T]) -> Result<MomEstimate<T>> {
    if y.len() != weights.len() {
        return Err(Error::Size(format!(
            "{} values but {} weights",
            y.len(),
            weights.len()
        )));
    }
    let total: T = weights.iter().copied().sum();
    if total <= T::one() {
        return Err(Error::Size(format!(
            "weighted sample size must exceed 1, got {total}"
        )));
    }
    if let Some(v) = y.iter().zip(weights).find(|(v, w)| **w > T::zero() && **v <= T::zero()) {
        return Err(Error::Domain(format!("sample must be positive, got {}", v.0)));
    }
    let mean = y.iter().zip(weights).map(|(&v, &w)| w * v).sum::<T>() / total;
    let ss: T = y
        .iter()
        .zip(weights)
        .map(|(&v, &w)| {
            let d = v - mean;
            w * d * d
        })
        .sum();
    let var = ss / (total - T::one());
    if !(var > T::epsilon() * mean * mean) {
        return Err(Error::Degenerate("weighted sample has zero variance".into()));
    }
    let target = (var / (mean * mean)).ln_1p();
    let solve = bisect_decreasing(
        |ln_k: T| ln_one_plus_cv2(ln_k.exp()) - target,
        T::lit(SHAPE_MIN.ln()),
        T::lit(SHAPE_MAX.ln()),
        T::ROOT_TOL,
    );
    if solve.is_clamped() {
        log::warn!("method-of-moments shape outside [{SHAPE_MIN}, {SHAPE_MAX}]; clamped");
    }
    let shape = solve.value().exp();
    let scale = mean / ln_gamma(T::one() + shape.recip()).exp();
    Ok(MomEstimate {
        params: WeibullParams { scale, shape },
        clamped: solve.is_clamped(),
    })
}
