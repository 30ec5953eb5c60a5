//! Joint (collusive) pricing that maximizes total expected revenue `R(p)`.
//!
//! At an interior optimum every product satisfies
//! `p_i/(1−r) − 1/β_i = R(p)/(1−r)`, so the whole price vector is fixed by one
//! scalar `t`: `p_i(t) = (1−r)(t + 1/β_i)`. With a common `β` this reduces to
//! the closed form `z = W(Σ_i c_i / e) + 1`, `c_i = e^{g_i/(1−r)}`.

use std::io::Write;

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::format::{join_row, render};
use crate::model::{equilibrium_shares, seller_revenues, MarketParams, NormalizedPrices, Prices, Shares};
use crate::numerics::{lambert_w0_exp, lse, solve_scalar_root, SolverSettings};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct MonopolyResult<T> {
    pub prices: Prices<T>,
    pub normalized_price: NormalizedPrices<T>,
    pub shares: Shares<T>,
    pub total_revenue: T,
    /// Euclidean norm of `∇R` at `prices`.
    pub gradient_norm: T,
}

impl<T: Scalar> MonopolyResult<T> {
    fn assemble(params: &MarketParams<T>, prices: Prices<T>) -> Result<Self> {
        let normalized_price = NormalizedPrices::from_prices(params, &prices)?;
        let shares = equilibrium_shares(params, &prices)?;
        let total_revenue = seller_revenues(params, &prices)?.total;
        let gradient_norm = revenue_gradient(params, &prices)?
            .iter()
            .map(|&g| g * g)
            .sum::<T>()
            .sqrt();
        Ok(Self {
            prices,
            normalized_price,
            shares,
            total_revenue,
            gradient_norm,
        })
    }
}

/// `∂R/∂p_k = φ*_k [β_k R/(1−r) + 1 − β_k p_k/(1−r)]`.
pub fn revenue_gradient<T: Scalar>(params: &MarketParams<T>, prices: &Prices<T>) -> Result<Vec<T>> {
    let shares = equilibrium_shares(params, prices)?;
    let d = params.damping();
    let total: T = prices
        .as_slice()
        .iter()
        .zip(shares.products())
        .map(|(&p, &s)| p * s)
        .sum();
    Ok((0..params.n())
        .map(|k| {
            let b = params.beta()[k];
            shares.get(k) * (b * (total - prices.as_slice()[k]) / d + T::one())
        })
        .collect())
}

/// Closed-form optimum for a common price sensitivity.
pub fn monopoly_price_uniform_beta<T: Scalar>(params: &MarketParams<T>) -> Result<MonopolyResult<T>> {
    let beta = params
        .uniform_beta()
        .ok_or(Error::HeterogeneousBeta("monopoly_price_uniform_beta (use monopoly_price_general)"))?;
    let z = uniform_normalized_price(params)?;
    let p = params.damping() * z / beta;
    MonopolyResult::assemble(params, Prices::uniform(params.n(), p)?)
}

// z^M = W(e^{ln Σ c_i − 1}) + 1
fn uniform_normalized_price<T: Scalar>(params: &MarketParams<T>) -> Result<T> {
    let y = lse(&params.log_c()) - T::one();
    Ok(lambert_w0_exp(y)? + T::one())
}

/// Optimum for arbitrary sensitivities via the scalar fixed point
/// `t = R(p(t))/(1−r)`.
pub fn monopoly_price_general<T: Scalar>(
    params: &MarketParams<T>,
    settings: &SolverSettings<T>,
) -> Result<MonopolyResult<T>> {
    let d = params.damping();
    let prices_at = |t: T| -> Vec<T> {
        params
            .beta()
            .iter()
            .map(|&b| d * (t + b.recip()))
            .collect()
    };
    let residual = |t: T| -> T {
        let p = Prices::new(prices_at(t));
        match p.and_then(|p| seller_revenues(params, &p)) {
            Ok(rev) => t - rev.total / d,
            Err(_) => T::nan(),
        }
    };

    let max_g = params.g().iter().copied().fold(T::neg_infinity(), T::max);
    let min_beta = params.beta().iter().copied().fold(T::infinity(), T::min);
    let mut hi = (max_g / d).max(T::zero()) + min_beta.recip() + T::lit(10.0);
    // Small sensitivities need a wider bracket than the default.
    let mut expansions = 0;
    while residual(hi) <= T::zero() {
        if expansions == 200 {
            return Err(Error::NoSignChange {
                lo: 0.0,
                hi: hi.as_f64(),
                f_lo: residual(T::zero()).as_f64(),
                f_hi: residual(hi).as_f64(),
            });
        }
        hi *= T::lit(2.0);
        expansions += 1;
    }
    let t = solve_scalar_root(residual, T::zero(), hi, settings)?;
    let result = MonopolyResult::assemble(params, Prices::new(prices_at(t))?)?;
    if result.gradient_norm > settings.tolerance() {
        warn!(
            "monopoly first-order residual {} exceeds tolerance {}",
            result.gradient_norm,
            settings.tolerance()
        );
    }
    Ok(result)
}

/// Closed form when `β` is common, the scalar solver otherwise.
pub fn monopoly_price<T: Scalar>(
    params: &MarketParams<T>,
    settings: &SolverSettings<T>,
) -> Result<MonopolyResult<T>> {
    if params.uniform_beta().is_some() {
        monopoly_price_uniform_beta(params)
    } else {
        monopoly_price_general(params, settings)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonopolySweepRow<T> {
    pub r: T,
    pub result: MonopolyResult<T>,
}

impl<T: Scalar> MonopolySweepRow<T> {
    /// Price of product 1 (the common price when `β` is uniform).
    pub fn price(&self) -> T {
        self.result.prices.as_slice()[0]
    }

    pub fn no_purchase_share(&self) -> T {
        self.result.shares.no_purchase()
    }

    pub fn first_share(&self) -> T {
        self.result.shares.get(0)
    }

    pub fn total_revenue(&self) -> T {
        self.result.total_revenue
    }
}

pub(crate) fn check_r_grid<T: Scalar>(r_grid: &[T]) -> Result<()> {
    if r_grid.is_empty() {
        return Err(Error::invalid("r_grid", "must contain at least one value"));
    }
    if let Some(&r) = r_grid.iter().find(|&&r| !(r > T::zero() && r < T::one())) {
        return Err(Error::invalid(
            "r_grid",
            format!("every value must lie in the open interval (0, 1), got {r}"),
        ));
    }
    if r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("r_grid", "must be strictly increasing"));
    }
    Ok(())
}

/// One monopoly solve per grid value; rows come back in grid order.
pub fn monopoly_r_sweep<T: Scalar>(
    base: &MarketParams<T>,
    r_grid: &[T],
    settings: &SolverSettings<T>,
) -> Result<Vec<MonopolySweepRow<T>>> {
    check_r_grid(r_grid)?;
    r_grid
        .par_iter()
        .map(|&r| {
            let params = base.with_r(r)?;
            Ok(MonopolySweepRow {
                r,
                result: monopoly_price(&params, settings)?,
            })
        })
        .collect()
}

/// Index where the final strictly increasing run of `values` begins, if that
/// run spans at least two points. Applied to `R(p^M(r))` over a grid it is the
/// empirical `r*` past which revenue keeps rising.
pub fn increasing_tail_start<T: Scalar>(values: &[T]) -> Option<usize> {
    if values.len() < 2 {
        return None;
    }
    let mut start = values.len() - 1;
    while start > 0 && values[start - 1] < values[start] {
        start -= 1;
    }
    (start < values.len() - 1).then_some(start)
}

/// Writes `r,p_mono,phi_nopurchase,phi_1,total_revenue`.
pub fn write_sweep_csv<T: Scalar, W: Write>(
    rows: &[MonopolySweepRow<T>],
    mut out: W,
    digits: usize,
) -> Result<()> {
    writeln!(out, "r,p_mono,phi_nopurchase,phi_1,total_revenue")?;
    for row in rows {
        let cells = [
            row.r,
            row.price(),
            row.no_purchase_share(),
            row.first_share(),
            row.total_revenue(),
        ]
        .into_iter()
        .map(|v| render(v, digits));
        writeln!(out, "{}", join_row(cells))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::lambert_w0;

    fn paper_market(r: f64) -> MarketParams<f64> {
        MarketParams::with_uniform_beta(vec![0.993, 0.480, 0.159], 0.1, r).unwrap()
    }

    #[test]
    fn single_product_zero_quality_grid_oracle() {
        // maximize p e^{-p}/(1+e^{-p}) by grid search, the r → 0 limit
        let mut best = (0.0, 0.0);
        for i in 0..=400_000 {
            let p = i as f64 * 1e-5;
            let v = p * (-p).exp() / (1.0 + (-p).exp());
            if v > best.1 {
                best = (p, v);
            }
        }
        assert!((best.0 - 1.278_46).abs() < 2e-5);
        let m = MarketParams::new(vec![0.0], vec![1.0], 1e-9).unwrap();
        let res = monopoly_price_uniform_beta(&m).unwrap();
        assert!((res.prices.as_slice()[0] - best.0).abs() < 2e-5);
        let w = lambert_w0((-1.0f64).exp()).unwrap() + 1.0;
        assert!((res.prices.as_slice()[0] - w).abs() < 1e-8);
    }

    #[test]
    fn heterogeneous_beta_rejected_by_closed_form() {
        let m = MarketParams::new(vec![1.0, 0.5], vec![0.1, 0.2], 0.5).unwrap();
        assert!(matches!(
            monopoly_price_uniform_beta(&m),
            Err(Error::HeterogeneousBeta(_))
        ));
    }

    #[test]
    fn two_routes_agree() {
        let s = SolverSettings::default();
        for r in [0.05, 0.2, 0.5, 0.8, 0.95, 0.99] {
            let m = paper_market(r);
            let a = monopoly_price_uniform_beta(&m).unwrap();
            let b = monopoly_price_general(&m, &s).unwrap();
            for (x, y) in a.prices.as_slice().iter().zip(b.prices.as_slice()) {
                assert!((x - y).abs() < 1e-9, "r = {r}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn closed_form_single_product() {
        let s = SolverSettings::default();
        let (g, b, r) = (1.7, 0.3, 0.35);
        let m = MarketParams::new(vec![g], vec![b], r).unwrap();
        let res = monopoly_price_general(&m, &s).unwrap();
        let z = lambert_w0(f64::exp(g / (1.0 - r)) / std::f64::consts::E).unwrap() + 1.0;
        assert!((res.prices.as_slice()[0] - (1.0 - r) / b * z).abs() < 1e-9);
    }

    #[test]
    fn general_beats_grid() {
        let m = MarketParams::new(vec![1.0, 0.5], vec![0.1, 0.2], 0.5).unwrap();
        let res = monopoly_price_general(&m, &SolverSettings::default()).unwrap();
        let mut best = f64::NEG_INFINITY;
        for i in 0..400 {
            for j in 0..400 {
                let p = Prices::new(vec![i as f64 * 0.1, j as f64 * 0.1]).unwrap();
                best = best.max(seller_revenues(&m, &p).unwrap().total);
            }
        }
        assert!(res.total_revenue >= best - 1e-12, "{} < {best}", res.total_revenue);
        assert!(res.gradient_norm <= 1e-12);
    }

    #[test]
    fn small_beta_needs_bracket_expansion() {
        let m = MarketParams::new(vec![3.0, 0.2], vec![0.01, 0.02], 0.5).unwrap();
        let res = monopoly_price_general(&m, &SolverSettings::default()).unwrap();
        assert!(res.gradient_norm < 1e-10);
    }

    #[test]
    fn zero_price_gradient_is_share() {
        let m = paper_market(0.4);
        let p = Prices::uniform(3, 0.0).unwrap();
        let grad = revenue_gradient(&m, &p).unwrap();
        let phi = equilibrium_shares(&m, &p).unwrap();
        for k in 0..3 {
            assert!((grad[k] - phi.get(k)).abs() < 1e-15);
        }
    }

    #[test]
    fn normalized_price_times_outside_share_is_one() {
        for r in [0.1, 0.3, 0.6, 0.9, 0.999] {
            let res = monopoly_price_uniform_beta(&paper_market(r)).unwrap();
            let z = res.normalized_price.as_slice()[0];
            assert!((z * res.shares.no_purchase() - 1.0).abs() < 1e-10, "r = {r}");
            assert!(res.gradient_norm < 1e-10);
        }
    }

    #[test]
    fn price_rises_with_quality() {
        let base = paper_market(0.5);
        let p0 = monopoly_price_uniform_beta(&base).unwrap().prices.as_slice()[0];
        for i in 0..3 {
            let mut g = base.g().to_vec();
            g[i] += 0.1;
            let p1 = monopoly_price_uniform_beta(&base.with_g(g).unwrap())
                .unwrap()
                .prices
                .as_slice()[0];
            assert!(p1 > p0);
        }
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let s = SolverSettings::default();
        let m = paper_market(0.5);
        assert!(monopoly_r_sweep(&m, &[0.0, 0.5], &s).is_err());
        assert!(monopoly_r_sweep(&m, &[0.5, 1.0], &s).is_err());
        assert!(monopoly_r_sweep(&m, &[0.5, 0.4], &s).is_err());
        assert!(monopoly_r_sweep::<f64>(&m, &[], &s).is_err());
    }

    #[test]
    fn revenue_rises_near_one() {
        let grid: Vec<f64> = (0..10).map(|i| 0.9 + 0.01 * i as f64).collect();
        let rows = monopoly_r_sweep(&paper_market(0.5), &grid, &SolverSettings::default()).unwrap();
        let rev: Vec<f64> = rows.iter().map(|r| r.total_revenue()).collect();
        assert!(rev.windows(2).all(|w| w[1] > w[0]), "{rev:?}");
        assert_eq!(increasing_tail_start(&rev), Some(0));
    }

    #[test]
    fn tail_start_detection() {
        assert_eq!(increasing_tail_start(&[3.0, 2.0, 1.0, 2.0, 4.0]), Some(2));
        assert_eq!(increasing_tail_start(&[3.0, 2.0, 1.0]), None);
        assert_eq!(increasing_tail_start::<f64>(&[1.0]), None);
    }

    #[test]
    fn sweep_csv_header() {
        let rows = monopoly_r_sweep(&paper_market(0.5), &[0.2, 0.4], &SolverSettings::default())
            .unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf, 6).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r,p_mono,phi_nopurchase,phi_1,total_revenue\n0.2,15.4967,"));
        assert_eq!(text.lines().count(), 3);
    }
}
