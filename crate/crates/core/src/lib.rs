//! Pricing and simulation for multinomial logit markets in which past
//! purchases feed back into utility through a term `r ln d_i`.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix `f64`.

pub mod analysis;
pub mod competition;
pub mod dynamics;
pub mod error;
pub mod format;
pub mod model;
pub mod monopoly;
pub mod numerics;
pub mod scalar;

pub use analysis::{classic_mnl_probabilities, compare, linear_grid, reproduce_tables, ComparisonReport, Manifest};
pub use competition::{best_response, homogeneous_nash, nash_r_sweep, nash_solve, NashResult};
pub use dynamics::{integrate_mean_field, run, run_with, RunOptions, SamplingMode, SimulationState, SimulationTrace};
pub use error::{Error, Result};
pub use model::{
    choice_probabilities, equilibrium_shares, expected_consumer_utility, seller_revenues, total_revenue,
    MarketParams, NormalizedPrices, Prices, Shares,
};
pub use monopoly::{monopoly_price, monopoly_price_general, monopoly_price_uniform_beta, monopoly_r_sweep, revenue_gradient, MonopolyResult};
pub use numerics::{lambert_w0, log_sum_exp, solve_scalar_root, SolverSettings};
pub use scalar::Scalar;

pub type Market = MarketParams<f64>;
pub type PriceVector = Prices<f64>;
pub type NormalizedPriceVector = NormalizedPrices<f64>;
pub type ShareVector = Shares<f64>;
pub type Monopoly = MonopolyResult<f64>;
pub type Nash = NashResult<f64>;
pub type Settings = SolverSettings<f64>;
pub type Trace = SimulationTrace<f64>;
pub type Comparison = ComparisonReport<f64>;
