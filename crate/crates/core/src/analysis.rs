//! Monopoly versus competition comparisons, the classic logit baseline and
//! the reference table generator.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::competition::{nash_r_sweep, nash_solve, NashResult, NashSweepRow};
use crate::error::{Error, Result};
use crate::format::{join_row, render};
use crate::model::{expected_consumer_utility, ConsumerUtilities, MarketParams, Prices, Shares};
use crate::monopoly::{monopoly_price_uniform_beta, monopoly_r_sweep, MonopolyResult};
use crate::numerics::{lse, softmax_in_place, SolverSettings};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport<T> {
    pub r: T,
    pub mono: MonopolyResult<T>,
    pub nash: NashResult<T>,
    /// `p^M − p_i^C` per product.
    pub price_gaps: Vec<T>,
    /// `v_i(p^C) − v_i(p^M)` per product.
    pub utility_gaps: Vec<T>,
    pub utilities_mono: ConsumerUtilities<T>,
    pub utilities_nash: ConsumerUtilities<T>,
    pub argmax_product_mono: usize,
    pub argmax_product_nash: usize,
}

impl<T: Scalar> ComparisonReport<T> {
    pub fn min_price_gap(&self) -> T {
        self.price_gaps.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn min_utility_gap(&self) -> T {
        self.utility_gaps.iter().copied().fold(T::infinity(), T::min)
    }
}

fn log_shares<T: Scalar>(params: &MarketParams<T>, prices: &Prices<T>) -> Result<Vec<T>> {
    let mut a = params.log_attraction(prices)?;
    a.push(T::zero());
    let norm = lse(&a);
    a.iter_mut().for_each(|v| *v -= norm);
    Ok(a)
}

/// Monopoly and competitive prices side by side with the consumer utilities
/// they induce after `horizon` consumers. Requires a common `β`.
pub fn compare<T: Scalar>(
    params: &MarketParams<T>,
    horizon: u64,
    settings: &SolverSettings<T>,
) -> Result<ComparisonReport<T>> {
    let beta = params
        .uniform_beta()
        .ok_or(Error::HeterogeneousBeta("compare"))?;
    let mono = monopoly_price_uniform_beta(params)?;
    let nash = nash_solve(params, settings, None)?;
    let utilities_mono = expected_consumer_utility(params, &mono.prices, horizon)?;
    let utilities_nash = expected_consumer_utility(params, &nash.prices, horizon)?;
    let ln_mono = log_shares(params, &mono.prices)?;
    let ln_nash = log_shares(params, &nash.prices)?;
    let p_mono = mono.prices.as_slice();
    let p_nash = nash.prices.as_slice();
    let r = params.r();
    let price_gaps = (0..params.n()).map(|i| p_mono[i] - p_nash[i]).collect();
    let utility_gaps = (0..params.n())
        .map(|i| r * (ln_nash[i] - ln_mono[i]) + beta * (p_mono[i] - p_nash[i]))
        .collect();
    Ok(ComparisonReport {
        r,
        argmax_product_mono: utilities_mono.best,
        argmax_product_nash: utilities_nash.best,
        mono,
        nash,
        price_gaps,
        utility_gaps,
        utilities_mono,
        utilities_nash,
    })
}

/// Logit shares without network effects: `exp(g_i − β_i p_i)` normalized
/// against the no-purchase weight 1. `r` is ignored.
pub fn classic_mnl_probabilities<T: Scalar>(
    params: &MarketParams<T>,
    prices: &Prices<T>,
) -> Result<Shares<T>> {
    params.check_prices(prices)?;
    let mut w: Vec<T> = (0..params.n())
        .map(|i| params.g()[i] - params.beta()[i] * prices.as_slice()[i])
        .collect();
    w.push(T::zero());
    softmax_in_place(&mut w);
    Ok(Shares::from_raw(w))
}

/// `start, start+step, …` up to `stop`; `stop` is included when the grid
/// lands on it to within `1e-9·step`.
pub fn linear_grid<T: Scalar>(start: T, stop: T, step: T) -> Result<Vec<T>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
        return Err(Error::invalid("grid", "start, stop and step must be finite"));
    }
    if !(step > T::zero()) {
        return Err(Error::invalid("grid", "step must be positive"));
    }
    if stop < start {
        return Err(Error::invalid("grid", "stop must not be below start"));
    }
    let span = (stop - start) / step;
    let count = (span + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
    if count > 10_000_000 {
        return Err(Error::invalid("grid", "more than 10^7 points"));
    }
    Ok((0..=count)
        .map(|k| start + step * T::from_usize(k).expect("index fits scalar"))
        .collect())
}

/// Positions where a series fails to decrease.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrendReport {
    pub decreasing: bool,
    pub violations: Vec<usize>,
}

/// Whether the no-purchase share at the competitive prices falls along the
/// sweep. Informational only.
pub fn no_purchase_trend<T: Scalar>(rows: &[NashSweepRow<T>]) -> TrendReport {
    let values: Vec<T> = rows.iter().map(|r| r.result.shares.no_purchase()).collect();
    let violations: Vec<usize> = values
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] >= w[0])
        .map(|(i, _)| i + 1)
        .collect();
    TrendReport {
        decreasing: violations.is_empty(),
        violations,
    }
}

/// Index of the first interior point where `values` stops falling and starts
/// rising.
pub fn turning_point<T: Scalar>(values: &[T]) -> Option<usize> {
    (1..values.len().saturating_sub(1))
        .find(|&i| values[i] < values[i - 1] && values[i] <= values[i + 1])
}

pub const EXAMPLE_G: [f64; 3] = [0.993, 0.480, 0.159];
pub const EXAMPLE_R: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
pub const FIGURE_G: [f64; 5] = [0.850, 0.733, 0.416, 0.256, 0.139];
pub const EXAMPLE_BETA: f64 = 0.1;
pub const UTILITY_HORIZON: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub anchor: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
    pub utility_horizon: u64,
    pub notes: Vec<String>,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_rows<W: Write>(mut out: W, header: &str, rows: Vec<Vec<String>>) -> Result<()> {
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{}", join_row(row))?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the reference tables and figure data into `dir` and returns the
/// manifest, which is also saved as `manifest.json`.
pub fn reproduce_tables(dir: &Path, digits: usize) -> Result<Manifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let settings = SolverSettings::<f64>::nash_default();
    let example = MarketParams::with_uniform_beta(EXAMPLE_G.to_vec(), EXAMPLE_BETA, 0.5)?;
    let f = |v: f64| render(v, digits);

    let nash_rows = nash_r_sweep(&example, &EXAMPLE_R, &settings)?;
    write_rows(
        create(dir, "table_s4_nash.csv")?,
        "r,p_1,p_2,p_3,phi_1,w_1",
        nash_rows
            .iter()
            .map(|row| {
                let res = &row.result;
                let mut cells = vec![f(row.r)];
                cells.extend(res.prices.as_slice().iter().map(|&v| f(v)));
                cells.push(f(res.shares.get(0)));
                cells.push(f(res.revenues[0]));
                cells
            })
            .collect(),
    )?;

    write_rows(
        create(dir, "table_appB_shares.csv")?,
        "r,phi_1,phi_2,phi_3,w_1,w_2,w_3",
        nash_rows
            .iter()
            .map(|row| {
                let res = &row.result;
                let mut cells = vec![f(row.r)];
                cells.extend(res.shares.products().iter().map(|&v| f(v)));
                cells.extend(res.revenues.iter().map(|&v| f(v)));
                cells
            })
            .collect(),
    )?;

    let reports: Vec<ComparisonReport<f64>> = EXAMPLE_R
        .par_iter()
        .map(|&r| compare(&example.with_r(r)?, UTILITY_HORIZON, &settings))
        .collect::<Result<_>>()?;
    write_rows(
        create(dir, "table_s5_utilities.csv")?,
        "r,j_nash,j_mono,p_nash_j,p_mono,v_nash_j,v_mono_j",
        reports
            .iter()
            .map(|rep| {
                let (jc, jm) = (rep.argmax_product_nash, rep.argmax_product_mono);
                let price_c = rep.nash.prices.as_slice().get(jc).copied().unwrap_or(0.0);
                vec![
                    f(rep.r),
                    (jc + 1).to_string(),
                    (jm + 1).to_string(),
                    f(price_c),
                    f(rep.mono.prices.as_slice()[0]),
                    f(rep.utilities_nash.values[jc]),
                    f(rep.utilities_mono.values[jm]),
                ]
            })
            .collect(),
    )?;

    let figure = MarketParams::with_uniform_beta(FIGURE_G.to_vec(), EXAMPLE_BETA, 0.5)?;
    let grid = linear_grid(0.05, 0.95, 0.05)?;
    let mono = monopoly_r_sweep(&figure, &grid, &settings)?;
    let nash = nash_r_sweep(&figure, &grid, &settings)?;
    let n = figure.n();

    let mut header = String::from("r,p_mono");
    (1..=n).for_each(|i| header.push_str(&format!(",p_nash_{i}")));
    write_rows(
        create(dir, "fig_appD_prices.csv")?,
        &header,
        mono.iter()
            .zip(&nash)
            .map(|(m, c)| {
                let mut cells = vec![f(m.r), f(m.price())];
                cells.extend(c.result.prices.as_slice().iter().map(|&v| f(v)));
                cells
            })
            .collect(),
    )?;
    write_rows(
        create(dir, "fig_appD_revenue.csv")?,
        "r,revenue_mono,revenue_nash",
        mono.iter()
            .zip(&nash)
            .map(|(m, c)| {
                let total: f64 = c.result.revenues.iter().sum();
                vec![f(m.r), f(m.total_revenue()), f(total)]
            })
            .collect(),
    )?;
    let share_row = |r: f64, s: &Shares<f64>| {
        let bought: f64 = s.products().iter().sum();
        vec![f(r), f(bought), f(s.no_purchase())]
    };
    write_rows(
        create(dir, "fig_appD_shares_mono.csv")?,
        "r,products_total,phi_nopurchase",
        mono.iter().map(|m| share_row(m.r, &m.result.shares)).collect(),
    )?;
    write_rows(
        create(dir, "fig_appD_shares_nash.csv")?,
        "r,products_total,phi_nopurchase",
        nash.iter().map(|c| share_row(c.r, &c.result.shares)).collect(),
    )?;

    let trend = no_purchase_trend(&nash);
    if !trend.decreasing {
        info!("no-purchase share under competition rises at grid indices {:?}", trend.violations);
    }
    let w1: Vec<f64> = nash.iter().map(|c| c.result.revenues[0]).collect();
    let mut notes = vec![
        "three-product example: g = (0.993, 0.480, 0.159), beta = 0.1, r in {0.2, 0.4, 0.6, 0.8}".to_string(),
        format!(
            "consumer utilities use horizon k = {UTILITY_HORIZON}; the example text states k = 10K but its values match 10^7"
        ),
        "five-product figures: g = (0.850, 0.733, 0.416, 0.256, 0.139), beta = 0.1, r = 0.05:0.95:0.05".to_string(),
        format!(
            "no-purchase share under competition decreasing along the figure grid: {}",
            trend.decreasing
        ),
    ];
    if let Some(i) = turning_point(&w1) {
        notes.push(format!("w_1 under competition turns upward at r = {}", f(grid[i])));
    }
    let entry = |file: &str, anchor: &str| ManifestEntry {
        file: file.into(),
        anchor: anchor.into(),
    };
    let manifest = Manifest {
        files: vec![
            entry("table_s4_nash.csv", "competitive prices example: p^C, phi_1, w_1 for r in {0.2, 0.4, 0.6, 0.8}"),
            entry("table_s5_utilities.csv", "consumer utility example: monopoly vs competition"),
            entry("table_appB_shares.csv", "competitive shares and revenues example"),
            entry("fig_appD_prices.csv", "figure: competitive vs monopoly prices over r"),
            entry("fig_appD_revenue.csv", "figure: total revenue, competition vs monopoly"),
            entry("fig_appD_shares_mono.csv", "figure: purchased vs no-purchase share at monopoly prices"),
            entry("fig_appD_shares_nash.csv", "figure: purchased vs no-purchase share at competitive prices"),
        ],
        utility_horizon: UTILITY_HORIZON,
        notes,
    };
    let mut out = create(dir, "manifest.json")?;
    serde_json::to_writer_pretty(&mut out, &manifest).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(manifest)
}
