use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use netlogit::format::round_significant;
use serde_json::{json, Map, Value};

use crate::CliError;

/// Opens `path`, or stdout when absent.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => {
            let f = File::create(p)
                .map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

pub fn io_err(e: io::Error) -> CliError {
    CliError::Config(format!("write failed: {e}"))
}

/// Rounds every float in `value` to `digits` significant digits.
pub fn round_json(value: Value, digits: usize) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let v = round_significant(n.as_f64().unwrap_or(f64::NAN), digits);
            serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(|v| round_json(v, digits)).collect()),
        Value::Object(o) => Value::Object(
            o.into_iter()
                .map(|(k, v)| (k, round_json(v, digits)))
                .collect::<Map<_, _>>(),
        ),
        other => other,
    }
}

pub fn write_json(value: Value, digits: usize, path: Option<&Path>) -> Result<(), CliError> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, &round_json(value, digits))
        .map_err(|e| CliError::Config(format!("write failed: {e}")))?;
    writeln!(out).map_err(io_err)?;
    out.flush().map_err(io_err)
}

pub fn market_json(m: &netlogit::Market) -> Value {
    json!({ "g": m.g(), "beta": m.beta(), "r": m.r() })
}
