//! Bracketed scalar root finding.

use crate::real::Real;

/// Outcome of a bracketed solve. When the function does not change sign
/// over the bracket the nearer edge is returned and the solve is flagged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bracketed<T> {
    Root(T),
    /// Sign did not change; value clamped to the lower edge.
    ClampedLow(T),
    /// Sign did not change; value clamped to the upper edge.
    ClampedHigh(T),
}

impl<T: Copy> Bracketed<T> {
    pub fn value(self) -> T {
        match self {
            Bracketed::Root(x) | Bracketed::ClampedLow(x) | Bracketed::ClampedHigh(x) => x,
        }
    }

    pub fn is_clamped(self) -> bool {
        !matches!(self, Bracketed::Root(_))
    }
}

/// Bisection for a root of a non-increasing `f` on `[lo, hi]`, stopped once
/// the bracket is narrower than `tol`.
pub fn bisect_decreasing<T: Real>(
    mut f: impl FnMut(T) -> T,
    lo: T,
    hi: T,
    tol: T,
) -> Bracketed<T> {
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    if fa <= T::zero() {
        return if fa == T::zero() {
            Bracketed::Root(a)
        } else {
            Bracketed::ClampedLow(a)
        };
    }
    let fb = f(b);
    if fb >= T::zero() {
        return if fb == T::zero() {
            Bracketed::Root(b)
        } else {
            Bracketed::ClampedHigh(b)
        };
    }
    let two = T::lit(2.0);
    for _ in 0..200 {
        let mid = (a + b) / two;
        if b - a <= tol || mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm > T::zero() {
            a = mid;
        } else if fm < T::zero() {
            b = mid;
        } else {
            return Bracketed::Root(mid);
        }
    }
    Bracketed::Root((a + b) / two)
}

/// Newton iteration safeguarded by a sign bracket for a decreasing `f`.
/// `f` returns `(value, derivative)`. Steps leaving the bracket, or not
/// converging faster than bisection, fall back to bisection.
pub fn newton_decreasing<T: Real>(
    mut f: impl FnMut(T) -> (T, T),
    lo: T,
    hi: T,
    start: T,
    rel_tol: T,
) -> Bracketed<T> {
    let (flo, _) = f(lo);
    if flo <= T::zero() {
        return if flo == T::zero() {
            Bracketed::Root(lo)
        } else {
            Bracketed::ClampedLow(lo)
        };
    }
    let (fhi, _) = f(hi);
    if fhi >= T::zero() {
        return if fhi == T::zero() {
            Bracketed::Root(hi)
        } else {
            Bracketed::ClampedHigh(hi)
        };
    }
    let two = T::lit(2.0);
    let (mut a, mut b) = (lo, hi);
    let mut x = if start > a && start < b { start } else { (a + b) / two };
    let mut prev_step = b - a;
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        if fx == T::zero() {
            return Bracketed::Root(x);
        }
        if fx > T::zero() {
            a = x;
        } else {
            b = x;
        }
        let width = b - a;
        if width <= rel_tol * x.abs().max(T::min_positive_value()) {
            break;
        }
        let newton = x - fx / dfx;
        // Newton is kept while it stays inside the bracket and its step is
        // shrinking at least as fast as bisection would.
        let fast = (two * fx).abs() <= (prev_step * dfx).abs();
        let next = if dfx < T::zero() && newton > a && newton < b && fast {
            newton
        } else {
            (a + b) / two
        };
        prev_step = next - x;
        let done = (next - x).abs() <= rel_tol * x.abs();
        x = next;
        if done {
            break;
        }
    }
    Bracketed::Root(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_finds_sqrt_two() {
        let r = bisect_decreasing(|x: f64| 2.0 - x * x, 0.0, 2.0, 1e-12);
        assert!((r.value() - 2f64.sqrt()).abs() < 1e-11);
        assert!(!r.is_clamped());
    }

    #[test]
    fn bisection_clamps_when_unbracketed() {
        let r = bisect_decreasing(|x: f64| 10.0 - x, 0.0, 2.0, 1e-12);
        assert_eq!(r, Bracketed::ClampedHigh(2.0));
        let r = bisect_decreasing(|x: f64| -1.0 - x, 0.0, 2.0, 1e-12);
        assert_eq!(r, Bracketed::ClampedLow(0.0));
    }

    #[test]
    fn newton_agrees_with_bisection() {
        let f = |x: f64| (1.0 / x - x.ln(), -1.0 / (x * x) - 1.0 / x);
        let n = newton_decreasing(f, 0.1, 10.0, 5.0, 1e-14).value();
        let b = bisect_decreasing(|x: f64| f(x).0, 0.1, 10.0, 1e-14).value();
        assert!((n - b).abs() < 1e-12, "{n} vs {b}");
    }
}
