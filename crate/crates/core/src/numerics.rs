//! Scalar special functions and root finding shared by the solvers.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Residual bound and iteration budget for the iterative solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings<T> {
    tolerance: T,
    max_iterations: usize,
}

impl<T: Scalar> SolverSettings<T> {
    pub fn new(tolerance: T, max_iterations: usize) -> Result<Self> {
        if !(tolerance > T::zero()) || !tolerance.is_finite() {
            return Err(Error::invalid("tolerance", "must be a positive finite number"));
        }
        if max_iterations == 0 {
            return Err(Error::invalid("max_iterations", "must be at least 1"));
        }
        Ok(Self {
            tolerance,
            max_iterations,
        })
    }

    /// Settings for the Nash sweeps: ε = 1e-10 (f64) and at most 10⁵ sweeps.
    pub fn nash_default() -> Self {
        Self {
            tolerance: T::lit(T::NASH_TOLERANCE),
            max_iterations: 100_000,
        }
    }

    pub fn tolerance(&self) -> T {
        self.tolerance
    }

    pub fn max_iterations(&self) -> usize {
        self.max_iterations
    }

    pub fn with_tolerance(self, tolerance: T) -> Result<Self> {
        Self::new(tolerance, self.max_iterations)
    }
}

impl<T: Scalar> Default for SolverSettings<T> {
    fn default() -> Self {
        Self {
            tolerance: T::lit(T::DEFAULT_TOLERANCE),
            max_iterations: 200,
        }
    }
}

const HALLEY_MAX_ITER: usize = 64;

/// Principal branch of the Lambert W function for `x ≥ 0`.
///
/// Halley iteration on `w·e^w = x`, seeded with `ln(1+x)` below `e` and with
/// `ln x − ln ln x` above. The update is written in terms of `w − x·e^{−w}`
/// so that nothing overflows for `x` up to the largest finite value.
pub fn lambert_w0<T: Scalar>(x: T) -> Result<T> {
    if !x.is_finite() {
        return Err(Error::NonFinite("lambert_w0 argument"));
    }
    if x < T::zero() {
        return Err(Error::invalid(
            "x",
            format!("lambert_w0 is defined here only for x >= 0, got {x}"),
        ));
    }
    if x == T::zero() {
        return Ok(T::zero());
    }
    let e = T::E();
    let mut w = if x < e {
        x.ln_1p()
    } else {
        let l = x.ln();
        l - l.ln()
    };
    Ok(halley_w(w_residual_linear(x), &mut w))
}

/// `W(e^y)` for any real `y`, without forming `e^y` when it would be large.
///
/// For `y ≥ 64` solves `w + ln w = y` directly, which is the logarithm of
/// `w·e^w = e^y`.
pub fn lambert_w0_exp<T: Scalar>(y: T) -> Result<T> {
    if !y.is_finite() {
        return Err(Error::NonFinite("lambert_w0_exp argument"));
    }
    if y < T::lit(64.0) {
        return lambert_w0(y.exp());
    }
    let ly = y.ln();
    let mut w = y - ly + ly / y;
    let two = T::lit(2.0);
    for _ in 0..HALLEY_MAX_ITER {
        // h(w) = w + ln w − y, h' = 1 + 1/w, h'' = −1/w²
        let h = w + w.ln() - y;
        let h1 = T::one() + w.recip();
        let h2 = -(w * w).recip();
        let step = h / (h1 - h * h2 / (two * h1));
        w -= step;
        if step.abs() <= T::epsilon() * w.abs() * T::lit(4.0) {
            break;
        }
    }
    Ok(w)
}

// f(w)/e^w for f(w) = w·e^w − x.
fn w_residual_linear<T: Scalar>(x: T) -> impl Fn(T) -> T {
    move |w: T| w - x * (-w).exp()
}

fn halley_w<T: Scalar>(residual: impl Fn(T) -> T, w: &mut T) -> T {
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    for _ in 0..HALLEY_MAX_ITER {
        let t = residual(*w);
        if t == T::zero() {
            break;
        }
        let wp1 = *w + T::one();
        let step = t / (wp1 - (*w + two) * t / (two * wp1));
        *w -= step;
        if step.abs() <= T::epsilon() * four * w.abs().max(T::min_positive_value()) {
            break;
        }
    }
    *w
}

/// Finds a root of `f` on `[lo, hi]` by Brent's method.
///
/// Requires a sign change on the bracket. Returns once `|f(x)| ≤ tolerance`
/// or the bracket has shrunk to a few ulps around the root.
pub fn solve_scalar_root<T, F>(f: F, lo: T, hi: T, settings: &SolverSettings<T>) -> Result<T>
where
    T: Scalar,
    F: Fn(T) -> T,
{
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::invalid("bracket", format!("[{lo}, {hi}] is not a finite interval")));
    }
    let tol = settings.tolerance();
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if !(fa.is_finite() && fb.is_finite()) {
        return Err(Error::NonFinite("root bracket evaluation"));
    }
    if fa.abs() <= tol {
        return Ok(a);
    }
    if fb.abs() <= tol {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoSignChange {
            lo: lo.as_f64(),
            hi: hi.as_f64(),
            f_lo: fa.as_f64(),
            f_hi: fb.as_f64(),
        });
    }

    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..settings.max_iterations() {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let xtol = two * T::epsilon() * b.abs();
        let m = (c - b) / two;
        if fb.abs() <= tol || m.abs() <= xtol || fb == T::zero() {
            return Ok(b);
        }
        if e.abs() >= xtol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * m * s;
                q = T::one() - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (two * m * qa * (qa - r) - (b - a) * (r - T::one()));
                q = (qa - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            } else {
                p = -p;
            }
            if two * p < (three * m * q - (xtol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > xtol { d } else { xtol.copysign_like(m) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(Error::NonFinite("root function evaluation"));
        }
    }
    Err(Error::NotConverged {
        solver: "solve_scalar_root",
        iterations: settings.max_iterations(),
        residual: fb.abs().as_f64(),
    })
}

trait CopySignLike {
    fn copysign_like(self, sign: Self) -> Self;
}

impl<T: Scalar> CopySignLike for T {
    fn copysign_like(self, sign: T) -> T {
        if sign < T::zero() {
            -self.abs()
        } else {
            self.abs()
        }
    }
}

/// `ln Σ exp(vᵢ)` with the maximum shifted out.
pub fn log_sum_exp<T: Scalar>(values: &[T]) -> Result<T> {
    if values.is_empty() {
        return Err(Error::invalid("values", "log_sum_exp of an empty list"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("log_sum_exp input"));
    }
    Ok(lse(values))
}

/// Unchecked variant: tolerates `-inf` entries (they contribute nothing) and
/// returns `-inf` if every entry is `-inf`.
pub(crate) fn lse<T: Scalar>(values: &[T]) -> T {
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let sum: T = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Normalizes log-weights into probabilities in place.
pub(crate) fn softmax_in_place<T: Scalar>(log_weights: &mut [T]) {
    let total = lse(log_weights);
    for w in log_weights.iter_mut() {
        *w = (*w - total).exp();
    }
}
