//! Pure Nash equilibrium of the price game between the `n` sellers.
//!
//! In normalized prices `z_i = β_i p_i/(1−r)` each seller's best response is
//! `z_i = W(c_i / Σ_{j≠i} c_j e^{1−z_j}) + 1`, where `c_j = e^{g_j/(1−r)}` and
//! the sum includes the no-purchase slot (`c = 1`, `z = 0`). The solver sweeps
//! these updates in ascending index order until the fixed-point residual norm
//! drops below `ε`.

use std::io::Write;

use log::{debug, warn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::format::{join_row, render};
use crate::model::{equilibrium_shares, seller_revenues, MarketParams, NormalizedPrices, Prices, Shares};
use crate::monopoly::check_r_grid;
use crate::numerics::{lambert_w0_exp, solve_scalar_root, SolverSettings};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct NashResult<T> {
    pub prices: Prices<T>,
    pub normalized_price: NormalizedPrices<T>,
    pub shares: Shares<T>,
    pub revenues: Vec<T>,
    /// Full sweeps performed (zero for the homogeneous closed form).
    pub iterations: usize,
    /// Euclidean norm of the fixed-point residuals at the returned point.
    pub residual: T,
    /// False if the residual ever increased between sweeps.
    pub residual_monotone: bool,
}

impl<T: Scalar> NashResult<T> {
    fn assemble(
        params: &MarketParams<T>,
        z: Vec<T>,
        iterations: usize,
        residual_monotone: bool,
    ) -> Result<Self> {
        let normalized_price = NormalizedPrices::new(z)?;
        let prices = normalized_price.to_prices(params)?;
        let shares = equilibrium_shares(params, &prices)?;
        let revenues = seller_revenues(params, &prices)?.per_seller;
        let residual = residual_norm(&params.log_c(), normalized_price.as_slice())?;
        Ok(Self {
            prices,
            normalized_price,
            shares,
            revenues,
            iterations,
            residual,
            residual_monotone,
        })
    }
}

// ln Σ_{j≠i} c_j e^{1−z_j}, no-purchase term included as e^1.
fn log_rival_mass<T: Scalar>(log_c: &[T], z: &[T], i: usize) -> T {
    let one = T::one();
    let mut max = one;
    for j in 0..z.len() {
        if j != i {
            max = max.max(log_c[j] - z[j] + one);
        }
    }
    let mut sum = (one - max).exp();
    for j in 0..z.len() {
        if j != i {
            sum += (log_c[j] - z[j] + one - max).exp();
        }
    }
    max + sum.ln()
}

fn best_response_z<T: Scalar>(log_c: &[T], z: &[T], i: usize) -> Result<T> {
    Ok(lambert_w0_exp(log_c[i] - log_rival_mass(log_c, z, i))? + T::one())
}

/// `z_i − 1 − W(c_i / Σ_{j≠i} c_j e^{1−z_j})` for each seller.
pub fn fixed_point_residuals<T: Scalar>(
    params: &MarketParams<T>,
    z: &NormalizedPrices<T>,
) -> Result<Vec<T>> {
    if z.len() != params.n() {
        return Err(Error::DimensionMismatch {
            name: "z",
            expected: params.n(),
            actual: z.len(),
        });
    }
    let log_c = params.log_c();
    (0..z.len())
        .map(|i| Ok(z.as_slice()[i] - best_response_z(&log_c, z.as_slice(), i)?))
        .collect()
}

fn residual_norm<T: Scalar>(log_c: &[T], z: &[T]) -> Result<T> {
    let mut acc = T::zero();
    for i in 0..z.len() {
        let d = z[i] - best_response_z(log_c, z, i)?;
        acc += d * d;
    }
    Ok(acc.sqrt())
}

/// Gauss-Seidel best-response sweeps from `z0` (all ones by default).
pub fn nash_solve<T: Scalar>(
    params: &MarketParams<T>,
    settings: &SolverSettings<T>,
    z0: Option<&NormalizedPrices<T>>,
) -> Result<NashResult<T>> {
    let n = params.n();
    let mut z = match z0 {
        Some(z0) if z0.len() != n => {
            return Err(Error::DimensionMismatch {
                name: "z0",
                expected: n,
                actual: z0.len(),
            })
        }
        Some(z0) => z0.as_slice().to_vec(),
        None => vec![T::one(); n],
    };
    let log_c = params.log_c();
    let mut previous = T::infinity();
    let mut monotone = true;
    for sweep in 1..=settings.max_iterations() {
        for i in 0..n {
            z[i] = best_response_z(&log_c, &z, i)?;
        }
        let residual = residual_norm(&log_c, &z)?;
        if !residual.is_finite() {
            return Err(Error::NonFinite("nash residual"));
        }
        if residual > previous {
            monotone = false;
        }
        previous = residual;
        if residual < settings.tolerance() {
            if !monotone {
                warn!("nash sweeps converged but the residual was not monotone");
            }
            debug!("nash converged after {sweep} sweeps, residual {:e}", residual.as_f64());
            return NashResult::assemble(params, z, sweep, monotone);
        }
    }
    Err(Error::NotConverged {
        solver: "nash_solve",
        iterations: settings.max_iterations(),
        residual: previous.as_f64(),
    })
}

/// Second derivative of seller `i`'s revenue in its own price.
///
/// `w_i'' = −(β_i/(1−r)) φ_i (1−φ_i) (1 + z_i φ_i) + (β_i/(1−r)) φ_i(1−φ_i)·κ`
/// where `κ = β_i p_i (1−φ_i)/(1−r) − 1` is the scaled first-order gap; at a
/// best response `κ = 0`.
pub fn own_revenue_curvature<T: Scalar>(
    params: &MarketParams<T>,
    prices: &Prices<T>,
    i: usize,
) -> Result<T> {
    let shares = equilibrium_shares(params, prices)?;
    let phi = shares.get(i);
    let s = params.beta()[i] / params.damping();
    let z = s * prices.as_slice()[i];
    let one = T::one();
    // w' = φ(1 − z(1−φ)); φ' = −sφ(1−φ); z' = s
    let gap = one - z * (one - phi);
    let dphi = -s * phi * (one - phi);
    let dgap = -s * (one - phi) + z * dphi;
    Ok(dphi * gap + phi * dgap)
}

/// Seller `player`'s revenue-maximizing price against fixed rival prices,
/// from the first-order condition `β_i p_i (1 − φ*_i) = 1 − r`.
pub fn best_response<T: Scalar>(
    params: &MarketParams<T>,
    opponent_prices: &[T],
    player: usize,
    settings: &SolverSettings<T>,
) -> Result<T> {
    let n = params.n();
    if player >= n {
        return Err(Error::invalid("player", format!("index {player} out of range for {n} sellers")));
    }
    if opponent_prices.len() + 1 != n {
        return Err(Error::DimensionMismatch {
            name: "opponent_prices",
            expected: n - 1,
            actual: opponent_prices.len(),
        });
    }
    let mut full: Vec<T> = opponent_prices.to_vec();
    full.insert(player, T::zero());
    let base = Prices::new(full)?;
    let beta = params.beta()[player];
    let d = params.damping();
    let foc = |p: T| -> T {
        match base
            .with_price(player, p)
            .and_then(|pr| equilibrium_shares(params, &pr))
        {
            Ok(sh) => beta * p * (T::one() - sh.get(player)) - d,
            Err(_) => T::nan(),
        }
    };
    let mut hi = T::lit(2.0) * d / beta;
    let mut expansions = 0;
    while foc(hi) <= T::zero() {
        if expansions == 200 {
            return Err(Error::NoSignChange {
                lo: 0.0,
                hi: hi.as_f64(),
                f_lo: foc(T::zero()).as_f64(),
                f_hi: foc(hi).as_f64(),
            });
        }
        hi *= T::lit(2.0);
        expansions += 1;
    }
    let p = solve_scalar_root(foc, T::zero(), hi, settings)?;
    let curvature = own_revenue_curvature(params, &base.with_price(player, p)?, player)?;
    if !(curvature < T::zero()) {
        return Err(Error::NotConverged {
            solver: "best_response second-order check",
            iterations: 0,
            residual: curvature.as_f64(),
        });
    }
    Ok(p)
}

/// Equilibrium when every product has the same intrinsic utility `g`.
///
/// The common normalized price solves `(z−1)e^z + z ĉ(n−1) = n ĉ` with
/// `ĉ = e^{g/(1−r)}`; it lies in `(1, n/(n−1))` for `n ≥ 2`. Sensitivities may
/// differ, giving `p_i = (1−r) z/β_i`.
pub fn homogeneous_nash<T: Scalar>(
    params: &MarketParams<T>,
    settings: &SolverSettings<T>,
) -> Result<NashResult<T>> {
    let g = params
        .uniform_g()
        .ok_or(Error::HeterogeneousUtility("homogeneous_nash"))?;
    let n = params.n();
    let a = g / params.damping();
    let z = if n == 1 {
        lambert_w0_exp(a - T::one())? + T::one()
    } else {
        homogeneous_gap_root(n, a, settings)?
    };
    NashResult::assemble(params, vec![z; n], 0, true)
}

// Writes z = b − δ with b = n/(n−1) and solves for u = ln δ:
// ln(n−1) + u − ln(b − 1 − δ) − (b − δ − a) = 0, increasing in u. Working
// with ln δ keeps full relative precision in the gap to b even when it is
// far below the spacing of doubles near b.
fn homogeneous_gap_root<T: Scalar>(n: usize, a: T, settings: &SolverSettings<T>) -> Result<T> {
    let one = T::one();
    let nf = T::from_usize(n).expect("n fits scalar");
    let m = nf - one;
    let b = nf / m;
    let width = b - one;
    let ln_m = m.ln();
    let g = |u: T| {
        let delta = u.exp();
        ln_m + u - (width - delta).ln() - (b - delta - a)
    };
    let mut hi_eps = T::lit(1e-3);
    let mut hi = (width * (one - hi_eps)).ln();
    while g(hi) <= T::zero() {
        hi_eps *= T::lit(1e-3);
        if hi_eps < T::min_positive_value() {
            return Err(Error::NonFinite("homogeneous gap bracket"));
        }
        hi = (width * (one - hi_eps)).ln();
    }
    let mut lo = (width.ln() + b - a - ln_m).min(hi) - T::lit(10.0);
    while g(lo) >= T::zero() {
        lo = lo - T::lit(10.0) - lo.abs();
        if !lo.is_finite() {
            return Err(Error::NonFinite("homogeneous gap bracket"));
        }
    }
    let u = solve_scalar_root(g, lo, hi, settings)?;
    Ok(b - u.exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NashSweepRow<T> {
    pub r: T,
    pub result: NashResult<T>,
}

/// One equilibrium per grid value; rows come back in grid order.
pub fn nash_r_sweep<T: Scalar>(
    base: &MarketParams<T>,
    r_grid: &[T],
    settings: &SolverSettings<T>,
) -> Result<Vec<NashSweepRow<T>>> {
    check_r_grid(r_grid)?;
    r_grid
        .par_iter()
        .map(|&r| {
            let params = base.with_r(r)?;
            Ok(NashSweepRow {
                r,
                result: nash_solve(&params, settings, None)?,
            })
        })
        .collect()
}

/// Writes `r,p_1..p_n,phi_1..phi_n,phi_nopurchase,w_1..w_n,iterations,residual`.
pub fn write_sweep_csv<T: Scalar, W: Write>(
    rows: &[NashSweepRow<T>],
    mut out: W,
    digits: usize,
) -> Result<()> {
    let n = rows.first().map(|r| r.result.prices.len()).unwrap_or(0);
    let mut header = vec!["r".to_string()];
    header.extend((1..=n).map(|i| format!("p_{i}")));
    header.extend((1..=n).map(|i| format!("phi_{i}")));
    header.push("phi_nopurchase".into());
    header.extend((1..=n).map(|i| format!("w_{i}")));
    header.push("iterations".into());
    header.push("residual".into());
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let res = &row.result;
        let cells = std::iter::once(render(row.r, digits))
            .chain(res.prices.as_slice().iter().map(|&v| render(v, digits)))
            .chain(res.shares.as_slice().iter().map(|&v| render(v, digits)))
            .chain(res.revenues.iter().map(|&v| render(v, digits)))
            .chain(std::iter::once(res.iterations.to_string()))
            .chain(std::iter::once(render(res.residual, digits)));
        writeln!(out, "{}", join_row(cells))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monopoly::monopoly_price_uniform_beta;

    fn settings() -> SolverSettings<f64> {
        SolverSettings::nash_default()
    }

    #[test]
    fn symmetric_market_gives_equal_prices() {
        let m = MarketParams::with_uniform_beta(vec![0.7; 4], 0.3, 0.45).unwrap();
        let res = nash_solve(&m, &settings(), None).unwrap();
        let p = res.prices.as_slice();
        assert!(p.iter().all(|&v| (v - p[0]).abs() < 1e-10));
    }

    #[test]
    fn equilibrium_satisfies_first_order_identity() {
        let m = MarketParams::new(vec![1.2, 0.4, 2.0], vec![0.3, 0.1, 0.7], 0.65).unwrap();
        let res = nash_solve(&m, &settings(), None).unwrap();
        assert!(res.residual < 1e-10);
        for i in 0..3 {
            let lhs = m.beta()[i] * res.prices.as_slice()[i] * (1.0 - res.shares.get(i));
            assert!((lhs - (1.0 - m.r())).abs() < 1e-9);
            assert!(res.normalized_price.as_slice()[i] > 1.0);
        }
        let fp = fixed_point_residuals(&m, &res.normalized_price).unwrap();
        assert!(fp.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn best_response_reproduces_equilibrium() {
        let m = MarketParams::with_uniform_beta(vec![0.993, 0.480, 0.159], 0.1, 0.4).unwrap();
        let res = nash_solve(&m, &settings(), None).unwrap();
        let s = SolverSettings::default();
        for i in 0..3 {
            let mut others = res.prices.as_slice().to_vec();
            let own = others.remove(i);
            let br = best_response(&m, &others, i, &s).unwrap();
            assert!((br - own).abs() < 1e-8, "player {i}: {br} vs {own}");
        }
    }

    #[test]
    fn best_response_grid_oracle() {
        let m = MarketParams::new(vec![1.0, 1.0], vec![1.0, 1.0], 0.5).unwrap();
        let step = 1e-4;
        let mut best = (0.0, f64::NEG_INFINITY);
        for k in 0..100_000 {
            let p1 = k as f64 * step;
            let w = seller_revenues(&m, &Prices::new(vec![p1, 2.0]).unwrap()).unwrap().per_seller[0];
            if w > best.1 {
                best = (p1, w);
            }
        }
        let br = best_response(&m, &[2.0], 0, &SolverSettings::default()).unwrap();
        assert!((br - best.0).abs() <= step, "{br} vs grid {}", best.0);
    }

    #[test]
    fn best_response_against_absent_rivals_is_monopoly() {
        let (g, b, r) = (1.3f64, 0.5, 0.3);
        let m = MarketParams::with_uniform_beta(vec![g, 0.8], b, r).unwrap();
        let br = best_response(&m, &[1e3], 0, &SolverSettings::default()).unwrap();
        let solo = MarketParams::new(vec![g], vec![b], r).unwrap();
        let mono = monopoly_price_uniform_beta(&solo).unwrap().prices.as_slice()[0];
        assert!((br - mono).abs() < 1e-8);
    }

    #[test]
    fn best_response_input_checks() {
        let m = MarketParams::with_uniform_beta(vec![1.0, 0.5], 1.0, 0.5).unwrap();
        let s = SolverSettings::default();
        assert!(best_response(&m, &[1.0], 2, &s).is_err());
        assert!(best_response(&m, &[1.0, 2.0], 0, &s).is_err());
    }

    #[test]
    fn curvature_matches_finite_difference() {
        let m = MarketParams::new(vec![1.0, 0.3], vec![0.4, 0.9], 0.35).unwrap();
        for p0 in [0.5, 1.7, 4.0] {
            let prices = Prices::new(vec![p0, 1.1]).unwrap();
            let w = |p: f64| {
                seller_revenues(&m, &prices.with_price(0, p).unwrap()).unwrap().per_seller[0]
            };
            let h = 1e-4;
            let fd = (w(p0 + h) - 2.0 * w(p0) + w(p0 - h)) / (h * h);
            let an = own_revenue_curvature(&m, &prices, 0).unwrap();
            assert!((fd - an).abs() < 1e-5 * an.abs().max(1.0), "{fd} vs {an}");
        }
    }

    #[test]
    fn homogeneous_matches_general() {
        for (n, r) in [(2usize, 0.5), (3, 0.2), (5, 0.9), (7, 0.97)] {
            let m = MarketParams::new(vec![0.8; n], (0..n).map(|i| 0.1 + 0.05 * i as f64).collect(), r)
                .unwrap();
            let h = homogeneous_nash(&m, &SolverSettings::default()).unwrap();
            let g = nash_solve(&m, &settings(), None).unwrap();
            for (a, b) in h.prices.as_slice().iter().zip(g.prices.as_slice()) {
                assert!((a - b).abs() < 1e-9, "n={n} r={r}: {a} vs {b}");
            }
            let z = h.normalized_price.as_slice()[0];
            assert!(z < n as f64 / (n as f64 - 1.0));
        }
    }

    #[test]
    fn homogeneous_two_product_scalar_oracle() {
        // (z−1)e^z + z = 2 by bisection
        let f = |z: f64| (z - 1.0) * z.exp() + z - 2.0;
        let (mut lo, mut hi) = (1.0, 2.0);
        while hi - lo > 1e-15 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let m = MarketParams::new(vec![0.0, 0.0], vec![1.0, 1.0], 0.5).unwrap();
        let h = homogeneous_nash(&m, &SolverSettings::default()).unwrap();
        assert!((h.normalized_price.as_slice()[0] - lo).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_rejects_distinct_utilities() {
        let m = MarketParams::with_uniform_beta(vec![1.0, 0.9], 1.0, 0.5).unwrap();
        assert!(matches!(
            homogeneous_nash(&m, &SolverSettings::default()),
            Err(Error::HeterogeneousUtility(_))
        ));
    }

    #[test]
    fn single_seller_equilibrium_is_monopoly() {
        let m = MarketParams::new(vec![2.2], vec![0.4], 0.6).unwrap();
        let nash = nash_solve(&m, &settings(), None).unwrap();
        let mono = monopoly_price_uniform_beta(&m).unwrap();
        assert!((nash.prices.as_slice()[0] - mono.prices.as_slice()[0]).abs() < 1e-9);
        let h = homogeneous_nash(&m, &SolverSettings::default()).unwrap();
        assert!((h.prices.as_slice()[0] - mono.prices.as_slice()[0]).abs() < 1e-9);
    }

    #[test]
    fn budget_exhaustion_reported() {
        let m = MarketParams::with_uniform_beta(vec![0.993, 0.480, 0.159], 0.1, 0.8).unwrap();
        let tight = SolverSettings::new(1e-10, 1).unwrap();
        assert!(matches!(
            nash_solve(&m, &tight, None),
            Err(Error::NotConverged { .. })
        ));
        let z0 = NormalizedPrices::new(vec![1.0]).unwrap();
        assert!(nash_solve(&m, &settings(), Some(&z0)).is_err());
    }

    #[test]
    fn sweep_csv_header() {
        let m = MarketParams::with_uniform_beta(vec![1.0, 0.5], 0.1, 0.5).unwrap();
        let rows = nash_r_sweep(&m, &[0.2, 0.4, 0.6], &settings()).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf, 6).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r,p_1,p_2,phi_1,phi_2,phi_nopurchase,w_1,w_2,iterations,residual\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
