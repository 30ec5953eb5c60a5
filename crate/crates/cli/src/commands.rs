use std::io::Write;

use log::info;
use netlogit::competition::{self, homogeneous_nash, nash_r_sweep, nash_solve};
use netlogit::dynamics::{run_with, write_trace_csv, RunOptions, SamplingMode};
use netlogit::monopoly::{self, monopoly_price, monopoly_r_sweep};
use netlogit::{compare, reproduce_tables, Market, Monopoly, Nash, PriceVector, Settings};
use serde_json::{json, Value};

use crate::args::{Cli, Command, CompareArgs, PriceCommand, Sampling, SimulateArgs, SweepArgs, SweepMode};
use crate::config::{load_market, parse_grid};
use crate::output::{io_err, market_json, sink, write_json};
use crate::CliError;

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match cli.common.threads {
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?
            .install(|| run_command(cli)),
        None => run_command(cli),
    }
}

fn run_command(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Price(PriceCommand::Mono) => price_mono(cli),
        Command::Price(PriceCommand::Nash { homogeneous }) => price_nash(cli, *homogeneous),
        Command::Simulate(args) => simulate(cli, args),
        Command::Sweep(args) => sweep(cli, args),
        Command::Compare(args) => compare_cmd(cli, args),
        Command::Reproduce(args) => {
            let manifest = reproduce_tables(&args.out_dir, cli.common.digits)?;
            let value = serde_json::to_value(&manifest).expect("manifest serializes");
            write_json(value, cli.common.digits, cli.common.out.as_deref())
        }
    }
}

fn settings(cli: &Cli, base: Settings) -> Result<Settings, CliError> {
    let tolerance = cli.common.eps.unwrap_or(base.tolerance());
    let budget = cli.common.max_iter.unwrap_or(base.max_iterations());
    Ok(Settings::new(tolerance, budget)?)
}

fn mono_settings(cli: &Cli) -> Result<Settings, CliError> {
    settings(cli, Settings::default())
}

fn nash_settings(cli: &Cli) -> Result<Settings, CliError> {
    settings(cli, Settings::nash_default())
}

fn mono_json(m: &Market, res: &Monopoly) -> Value {
    let mut v = json!({
        "market": market_json(m),
        "prices": res.prices.as_slice(),
        "normalized_price": res.normalized_price.as_slice(),
        "shares": res.shares.products(),
        "phi_nopurchase": res.shares.no_purchase(),
        "total_revenue": res.total_revenue,
        "gradient_norm": res.gradient_norm,
    });
    if m.uniform_beta().is_some() {
        v["p_mono"] = json!(res.prices.as_slice()[0]);
    }
    v
}

fn nash_json(m: &Market, res: &Nash, solver: &str) -> Value {
    json!({
        "market": market_json(m),
        "solver": solver,
        "prices": res.prices.as_slice(),
        "normalized_price": res.normalized_price.as_slice(),
        "shares": res.shares.products(),
        "phi_nopurchase": res.shares.no_purchase(),
        "revenues": res.revenues,
        "total_revenue": res.revenues.iter().sum::<f64>(),
        "iterations": res.iterations,
        "residual": res.residual,
        "residual_monotone": res.residual_monotone,
    })
}

fn price_mono(cli: &Cli) -> Result<(), CliError> {
    let m = load_market(&cli.common)?;
    let res = monopoly_price(&m, &mono_settings(cli)?)?;
    write_json(mono_json(&m, &res), cli.common.digits, cli.common.out.as_deref())
}

fn price_nash(cli: &Cli, homogeneous: bool) -> Result<(), CliError> {
    let m = load_market(&cli.common)?;
    let (res, solver) = if homogeneous {
        (homogeneous_nash(&m, &mono_settings(cli)?)?, "homogeneous")
    } else {
        (nash_solve(&m, &nash_settings(cli)?, None)?, "gauss-seidel")
    };
    write_json(nash_json(&m, &res, solver), cli.common.digits, cli.common.out.as_deref())
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<(), CliError> {
    let m = load_market(&cli.common)?;
    let prices = match &args.prices {
        Some(p) => PriceVector::new(p.clone())?,
        None => nash_solve(&m, &nash_settings(cli)?, None)?.prices,
    };
    let mut opts = RunOptions::new(args.consumers, cli.common.seed, args.checkpoint_every);
    opts.mode = match args.mode {
        Sampling::Categorical => SamplingMode::Categorical,
        Sampling::Gumbel => SamplingMode::Gumbel,
    };
    let trace = run_with(&m, &prices, &opts)?;
    let digits = cli.common.digits;
    let mut out = sink(cli.common.out.as_deref())?;
    write_trace_csv(&trace, &mut out, digits)?;
    out.flush().map_err(io_err)?;
    drop(out);
    let summary = json!({
        "consumers": args.consumers,
        "seed": cli.common.seed,
        "checkpoints": trace.checkpoints.len(),
        "prices": prices.as_slice(),
        "final_shares": trace.final_shares().as_slice(),
        "equilibrium_shares": trace.equilibrium.as_slice(),
        "final_l1": trace.final_l1(),
    });
    let text = serde_json::to_string(&crate::output::round_json(summary, digits)).expect("summary serializes");
    if cli.common.out.is_some() {
        println!("{text}");
    } else {
        eprintln!("{text}");
    }
    Ok(())
}

fn sweep(cli: &Cli, args: &SweepArgs) -> Result<(), CliError> {
    let m = load_market(&cli.common)?;
    let grid = parse_grid(&args.r_grid)?;
    let digits = cli.common.digits;
    let mut out = sink(cli.common.out.as_deref())?;
    if matches!(args.mode, SweepMode::Mono | SweepMode::Both) {
        let rows = monopoly_r_sweep(&m, &grid, &mono_settings(cli)?)?;
        let revenue: Vec<f64> = rows.iter().map(|r| r.total_revenue()).collect();
        if let Some(i) = monopoly::increasing_tail_start(&revenue) {
            info!("monopoly revenue increases from r = {} to the end of the grid", grid[i]);
        }
        monopoly::write_sweep_csv(&rows, &mut out, digits)?;
    }
    if args.mode == SweepMode::Both {
        writeln!(out).map_err(io_err)?;
    }
    if matches!(args.mode, SweepMode::Nash | SweepMode::Both) {
        let rows = nash_r_sweep(&m, &grid, &nash_settings(cli)?)?;
        let w1: Vec<f64> = rows.iter().map(|r| r.result.revenues[0]).collect();
        if let Some(i) = netlogit::analysis::turning_point(&w1) {
            info!("w_1 under competition turns upward at r = {}", grid[i]);
        }
        let trend = netlogit::analysis::no_purchase_trend(&rows);
        if !trend.decreasing {
            info!("no-purchase share under competition rises at grid indices {:?}", trend.violations);
        }
        competition::write_sweep_csv(&rows, &mut out, digits)?;
    }
    out.flush().map_err(io_err)
}

fn compare_cmd(cli: &Cli, args: &CompareArgs) -> Result<(), CliError> {
    let m = load_market(&cli.common)?;
    let rep = compare(&m, args.horizon, &nash_settings(cli)?)?;
    let (jc, jm) = (rep.argmax_product_nash, rep.argmax_product_mono);
    let value = json!({
        "market": market_json(&m),
        "horizon": args.horizon,
        "monopoly": {
            "price": rep.mono.prices.as_slice()[0],
            "utilities": rep.utilities_mono.values,
            "best_choice": jm + 1,
            "best_overall": rep.utilities_mono.best_overall + 1,
            "best_utility": rep.utilities_mono.values[jm],
            "total_revenue": rep.mono.total_revenue,
        },
        "competition": {
            "prices": rep.nash.prices.as_slice(),
            "utilities": rep.utilities_nash.values,
            "best_choice": jc + 1,
            "best_overall": rep.utilities_nash.best_overall + 1,
            "best_price": rep.nash.prices.as_slice().get(jc).copied(),
            "best_utility": rep.utilities_nash.values[jc],
            "total_revenue": rep.nash.revenues.iter().sum::<f64>(),
        },
        "price_gaps": rep.price_gaps,
        "utility_gaps": rep.utility_gaps,
    });
    write_json(value, cli.common.digits, cli.common.out.as_deref())
}
