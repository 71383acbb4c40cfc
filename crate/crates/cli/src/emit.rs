// SPDX-License-Identifier: Apache-2.0

use std::io::Write;
use std::path::Path;

use crate::config::Format;
use crate::run::ResultRow;
use crate::CliError;

pub const HEADER: [&str; 11] = [
    "scenario",
    "rate_per_s",
    "connections",
    "total_packets",
    "packets_through_app",
    "pct_through_app",
    "throughput_rps",
    "p50_ms",
    "p95_ms",
    "failed_flows",
    "seed",
];

/// Six significant digits; zero prints as `0.000000`.
pub fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0.000000".into() } else { v.to_string() };
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // Rounding can carry into a new digit, e.g. 9.999996 -> 10.00000.
    let carried = s.trim_start_matches('-').split('.').next().map_or(0, str::len) as i32 > magnitude.max(0) + 1;
    if carried && decimals > 0 {
        format!("{v:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

/// `v` rounded to what [`sig6`] prints.
pub fn round6(v: f64) -> f64 {
    sig6(v).parse().unwrap_or(v)
}

fn record(row: &ResultRow) -> Vec<String> {
    let opt_f = |v: Option<f64>| v.map(sig6).unwrap_or_default();
    let opt_u = |v: Option<u64>| v.map(|n| n.to_string()).unwrap_or_default();
    vec![
        row.scenario.name().to_string(),
        opt_f(row.rate_per_s),
        row.connections.map(|n| n.to_string()).unwrap_or_default(),
        opt_u(row.total_packets),
        opt_u(row.packets_through_app),
        opt_f(row.pct_through_app),
        sig6(row.throughput_rps),
        opt_f(row.p50_ms),
        opt_f(row.p95_ms),
        opt_u(row.failed_flows),
        row.seed.to_string(),
    ]
}

/// Serializes rows in the requested format.
pub fn render(rows: &[ResultRow], format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(HEADER).map_err(|e| CliError::Render(e.to_string()))?;
            for row in rows {
                w.write_record(record(row)).map_err(|e| CliError::Render(e.to_string()))?;
            }
            w.into_inner().map_err(|e| CliError::Render(e.to_string()))
        }
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(rows).map_err(|e| CliError::Render(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
    }
}

/// Writes rows to `path`, or standard output when `None`.
pub fn emit(rows: &[ResultRow], format: Format, path: Option<&Path>) -> Result<(), CliError> {
    let bytes = render(rows, format)?;
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|source| CliError::Write {
            path: p.to_owned(),
            source,
        }),
        None => std::io::stdout().lock().write_all(&bytes).map_err(|source| CliError::Write {
            path: "<stdout>".into(),
            source,
        }),
    }
}
