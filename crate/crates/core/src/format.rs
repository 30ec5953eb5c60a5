//! Fixed-precision rendering for CSV and JSON output.

use crate::scalar::Scalar;

/// Default number of significant digits in emitted files.
pub const DEFAULT_DIGITS: usize = 6;

/// Rounds `x` to `digits` significant digits.
pub fn round_significant(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let digits = digits.max(1);
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}

/// Shortest decimal text of `x` rounded to `digits` significant digits.
pub fn render<T: Scalar>(x: T, digits: usize) -> String {
    let v = round_significant(x.as_f64(), digits);
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (1e-5..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub(crate) fn join_row<I: IntoIterator<Item = String>>(cells: I) -> String {
    cells.into_iter().collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_significant_digits() {
        assert_eq!(render(15.496_743_f64, 6), "15.4967");
        assert_eq!(render(15.496_743_f64, 3), "15.5");
        assert_eq!(render(0.0_f64, 6), "0");
        assert_eq!(render(1.0_f64, 6), "1");
        assert_eq!(render(-2.5e-9_f64, 3), "-2.5e-9");
        assert_eq!(render(123_456_789.0_f64, 4), "123500000");
    }
}
