//! Artifact writers: CSV with 17-significant-digit floats and LF endings,
//! self-describing JSON, and the metadata sidecar that lets any result file
//! be reproduced from its recorded configuration.

use std::path::{Path, PathBuf};

use kubo::{ConductivityResult, Method};
use num_complex::Complex64;
use serde_json::json;

use crate::{CliError, FormatArg};

pub struct RunContext {
    /// Full command echo: subcommand name and every flag value.
    pub echo: serde_json::Value,
    pub method: Option<Method>,
    pub wall_time_s: f64,
}

impl RunContext {
    fn header(&self) -> serde_json::Value {
        json!({
            "run": self.echo,
            "version": env!("CARGO_PKG_VERSION"),
            "method": self.method,
            "wall_time_s": self.wall_time_s,
        })
    }
}

/// 17 significant digits, the smallest count that round-trips every f64.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn axis(i: usize, d: usize) -> String {
    if d <= 3 {
        ["x", "y", "z"][i].to_string()
    } else {
        format!("a{i}")
    }
}

/// One header row, then one row per frequency: omega followed by the d^2
/// tensor entries in row-major order, each as a re/im column pair.
pub fn conductivity_csv(r: &ConductivityResult) -> String {
    let d = r.dim;
    let mut out = String::from("omega");
    for l in 0..d {
        for m in 0..d {
            let (al, am) = (axis(l, d), axis(m, d));
            out.push_str(&format!(",re_sigma_{al}{am},im_sigma_{al}{am}"));
        }
    }
    out.push('\n');
    for (i, &w) in r.omegas.iter().enumerate() {
        out.push_str(&fmt(w));
        for l in 0..d {
            for m in 0..d {
                let z = r.entry(i, l, m);
                out.push(',');
                out.push_str(&fmt(z.re));
                out.push(',');
                out.push_str(&fmt(z.im));
            }
        }
        out.push('\n');
    }
    out
}

/// CSV results get their metadata in `<stem>.json` next to the data file;
/// if that would collide with the data file itself, `.meta.json` is used.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let p = out.with_extension("json");
    if p == out {
        out.with_extension("meta.json")
    } else {
        p
    }
}

pub fn write_conductivity(
    r: &ConductivityResult,
    ctx: &RunContext,
    path: &Path,
    format: FormatArg,
) -> Result<(), CliError> {
    let mut meta = ctx.header();
    meta["result_metadata"] = serde_json::to_value(&r.metadata)
        .map_err(|e| CliError::Usage(format!("metadata: {e}")))?;
    match format {
        FormatArg::Csv => {
            std::fs::write(path, conductivity_csv(r))?;
            write_json(&sidecar_path(path), &meta)
        }
        FormatArg::Json => {
            let sigma: Vec<Vec<[f64; 2]>> = (0..r.omegas.len())
                .map(|i| {
                    let mut flat = Vec::with_capacity(r.dim * r.dim);
                    for l in 0..r.dim {
                        for m in 0..r.dim {
                            let z = r.entry(i, l, m);
                            flat.push([z.re, z.im]);
                        }
                    }
                    flat
                })
                .collect();
            meta["data"] = json!({ "dim": r.dim, "omegas": r.omegas, "sigma": sigma });
            write_json(path, &meta)
        }
    }
}

pub fn write_mass(
    inv_m: &[Vec<f64>],
    ctx: &RunContext,
    path: &Path,
    format: FormatArg,
) -> Result<(), CliError> {
    let d = inv_m.len();
    let meta = ctx.header();
    match format {
        FormatArg::Csv => {
            let mut out = String::new();
            let labels: Vec<String> = (0..d)
                .flat_map(|l| (0..d).map(move |m| (l, m)))
                .map(|(l, m)| format!("inv_m_{}{}", axis(l, d), axis(m, d)))
                .collect();
            out.push_str(&labels.join(","));
            out.push('\n');
            let row: Vec<String> =
                inv_m.iter().flat_map(|r| r.iter().map(|&v| fmt(v))).collect();
            out.push_str(&row.join(","));
            out.push('\n');
            std::fs::write(path, out)?;
            write_json(&sidecar_path(path), &meta)
        }
        FormatArg::Json => {
            let mut meta = meta;
            meta["data"] = json!({ "dim": d, "inv_m": inv_m });
            write_json(path, &meta)
        }
    }
}

pub struct EstimateRow {
    pub axis: String,
    pub estimate: Complex64,
    pub stderr: f64,
    pub reference: Complex64,
}

pub fn estimate_rows(
    estimate: &[Complex64],
    stderr: &[f64],
    reference: &[Complex64],
) -> Vec<EstimateRow> {
    let d = estimate.len();
    (0..d)
        .map(|l| EstimateRow {
            axis: axis(l, d),
            estimate: estimate[l],
            stderr: stderr[l],
            reference: reference[l],
        })
        .collect()
}

pub fn print_estimates(rows: &[EstimateRow], reference_name: &str) {
    for row in rows {
        println!(
            "direction {}: estimate = {:+.9e} {:+.9e}i, stderr = {:.3e}, {} = {:+.9e} {:+.9e}i",
            row.axis,
            row.estimate.re,
            row.estimate.im,
            row.stderr,
            reference_name,
            row.reference.re,
            row.reference.im,
        );
    }
}

pub fn write_estimates(
    rows: &[EstimateRow],
    reference_name: &str,
    ctx: &RunContext,
    path: &Path,
    format: FormatArg,
) -> Result<(), CliError> {
    let meta = ctx.header();
    match format {
        FormatArg::Csv => {
            let mut out = format!(
                "direction,re_estimate,im_estimate,stderr,re_{0},im_{0}\n",
                reference_name
            );
            for r in rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.axis,
                    fmt(r.estimate.re),
                    fmt(r.estimate.im),
                    fmt(r.stderr),
                    fmt(r.reference.re),
                    fmt(r.reference.im),
                ));
            }
            std::fs::write(path, out)?;
            write_json(&sidecar_path(path), &meta)
        }
        FormatArg::Json => {
            let mut meta = meta;
            let data: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "direction": r.axis,
                        "estimate": [r.estimate.re, r.estimate.im],
                        "stderr": r.stderr,
                        reference_name: [r.reference.re, r.reference.im],
                    })
                })
                .collect();
            meta["data"] = json!(data);
            write_json(path, &meta)
        }
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Usage(format!("metadata: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
