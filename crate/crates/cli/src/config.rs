use std::fs;

use netlogit::model::{BetaSpec, MarketDocument};
use netlogit::{linear_grid, Market};

use crate::args::Common;
use crate::CliError;

/// Market from the config file with command-line overrides applied.
pub fn load_market(common: &Common) -> Result<Market, CliError> {
    let mut doc = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            Some(
                serde_json::from_str::<MarketDocument>(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
            )
        }
        None => None,
    };
    if doc.is_none() {
        match (&common.g, &common.beta, common.r) {
            (Some(g), Some(beta), Some(r)) => {
                doc = Some(MarketDocument {
                    g: g.clone(),
                    beta: beta_spec(beta),
                    r,
                })
            }
            _ => {
                return Err(CliError::Config(
                    "no market given: pass --config or all of --g, --beta and --r".into(),
                ))
            }
        }
    }
    let mut doc = doc.expect("document present");
    if let Some(g) = &common.g {
        doc.g = g.clone();
    }
    if let Some(beta) = &common.beta {
        doc.beta = beta_spec(beta);
    }
    if let Some(r) = common.r {
        doc.r = r;
    }
    Ok(Market::from_document(&doc)?)
}

fn beta_spec(values: &[f64]) -> BetaSpec {
    match values {
        [b] => BetaSpec::Common(*b),
        bs => BetaSpec::PerProduct(bs.to_vec()),
    }
}

/// Parses `start:stop:step`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        return Err(CliError::Config(format!("r-grid `{spec}` must have the form start:stop:step")));
    };
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Config(format!("r-grid `{spec}`: `{s}` is not a number")))
    };
    Ok(linear_grid(num(start)?, num(stop)?, num(step)?)?)
}
