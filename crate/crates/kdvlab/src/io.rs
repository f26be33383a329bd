//! On-disk formats: CSV series, binary field snapshots, and JSON summaries.
//!
//! Numbers are written with 17 significant digits so every f64 round-trips
//! exactly; identical data always serializes to identical bytes, which is
//! what makes rerun-and-diff a meaningful regression check.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::evolution::{EvolutionTrace, TravelReport};
use crate::groundstate::{CurveRow, GroundState};
use crate::spectral::{Field, Grid};
use crate::stability::StabilityReport;
use crate::{Error, Result};

/// `f64` to text with exact round-trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.17e}")
}

/// Writes `x,u` rows for a single field.
pub fn write_field_csv(path: &Path, field: &Field) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "x,u")?;
    let grid = field.grid();
    for (j, v) in field.values().iter().enumerate() {
        writeln!(out, "{},{}", fmt_f64(grid.x(j)), fmt_f64(*v))?;
    }
    out.flush()?;
    Ok(())
}

/// Binary snapshot layout: `n: u64 LE`, `L: f64 LE`, `time: f64 LE`, then
/// `n` sample values as `f64 LE`.
pub fn write_field_bin(path: &Path, field: &Field, time: f64) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&(field.len() as u64).to_le_bytes())?;
    out.write_all(&field.grid().length().to_le_bytes())?;
    out.write_all(&time.to_le_bytes())?;
    for v in field.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a binary snapshot back; the stored grid shape must match `grid`.
pub fn read_field_bin(path: &Path, grid: &Arc<Grid>) -> Result<(Field, f64)> {
    let mut input = BufReader::new(File::open(path)?);
    let mut u64buf = [0u8; 8];
    input.read_exact(&mut u64buf)?;
    let n = u64::from_le_bytes(u64buf) as usize;
    input.read_exact(&mut u64buf)?;
    let length = f64::from_le_bytes(u64buf);
    input.read_exact(&mut u64buf)?;
    let time = f64::from_le_bytes(u64buf);
    if n != grid.n() || length != grid.length() {
        return Err(Error::GridMismatch);
    }
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        input.read_exact(&mut u64buf)?;
        values.push(f64::from_le_bytes(u64buf));
    }
    Ok((Field::new(grid, values)?, time))
}

/// Writes the sampled series of a run; distance/shift columns appear only
/// when the run tracked a reference.
pub fn write_trace_csv(path: &Path, trace: &EvolutionTrace) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let tracked = trace.distances.is_some();
    if tracked {
        writeln!(out, "t,energy,charge,distance,tau")?;
    } else {
        writeln!(out, "t,energy,charge")?;
    }
    for (i, &t) in trace.times.iter().enumerate() {
        if tracked {
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt_f64(t),
                fmt_f64(trace.energies[i]),
                fmt_f64(trace.charges[i]),
                fmt_f64(trace.distances.as_ref().expect("tracked")[i]),
                fmt_f64(trace.taus.as_ref().expect("tracked")[i]),
            )?;
        } else {
            writeln!(
                out,
                "{},{},{}",
                fmt_f64(t),
                fmt_f64(trace.energies[i]),
                fmt_f64(trace.charges[i]),
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes the per-sample track of a travel measurement.
pub fn write_travel_csv(path: &Path, report: &TravelReport) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "t,tau,distance")?;
    for s in &report.samples {
        writeln!(out, "{},{},{}", fmt_f64(s.t), fmt_f64(s.tau), fmt_f64(s.distance))?;
    }
    out.flush()?;
    Ok(())
}

/// One row per perturbation; failed rows carry the error text and empty
/// numeric cells.
pub fn write_stability_csv(path: &Path, report: &StabilityReport) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "kind,epsilon,initial_distance,max_distance,final_distance,passed,error")?;
    for row in &report.rows {
        match &row.outcome {
            Ok(v) => writeln!(
                out,
                "{},{},{},{},{},{},",
                row.spec.kind_name(),
                fmt_f64(row.spec.epsilon()),
                fmt_f64(v.initial_distance),
                fmt_f64(v.max_distance),
                fmt_f64(v.final_distance),
                v.passed,
            )?,
            Err(msg) => writeln!(
                out,
                "{},{},,,,,{}",
                row.spec.kind_name(),
                fmt_f64(row.spec.epsilon()),
                msg.replace(',', ";"),
            )?,
        }
    }
    out.flush()?;
    Ok(())
}

/// One row per swept charge. `shift_speed` maps frame speeds back to the
/// unshifted family for the extra column.
pub fn write_curve_csv(path: &Path, rows: &[CurveRow], shift_speed: f64) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "charge,speed,speed_unshifted,energy,residual,converged,error")?;
    for row in rows {
        match &row.outcome {
            Ok(v) => writeln!(
                out,
                "{},{},{},{},{},{},",
                fmt_f64(row.charge),
                fmt_f64(v.speed),
                fmt_f64(v.speed + shift_speed),
                fmt_f64(v.energy),
                fmt_f64(v.residual),
                v.converged,
            )?,
            Err(msg) => writeln!(
                out,
                "{},,,,,,{}",
                fmt_f64(row.charge),
                msg.replace(',', ";"),
            )?,
        }
    }
    out.flush()?;
    Ok(())
}

/// Summary record of a minimizer run.
pub fn ground_state_json(gs: &GroundState) -> serde_json::Value {
    serde_json::json!({
        "mode": gs.mode.as_str(),
        "charge": gs.charge_target,
        "energy": gs.energy,
        "multiplier": gs.multiplier,
        "speed": gs.speed,
        "residual": gs.residual,
        "iterations": gs.iterations,
        "converged": gs.converged,
    })
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Reads a whole JSON file into a deserializable type.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let mut text = String::new();
    BufReader::new(File::open(path)?).read_to_string(&mut text)?;
    Ok(serde_json::from_str(&text)?)
}

/// Reads the header line of a CSV file (diagnostics helper).
pub fn read_csv_header(path: &Path) -> Result<String> {
    let mut line = String::new();
    BufReader::new(File::open(path)?).read_line(&mut line)?;
    Ok(line.trim_end().to_string())
}
