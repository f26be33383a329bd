//! Batch front-end: a JSON config in, a run directory out.
//!
//! Every run writes `manifest.json` first, echoing the fully-resolved
//! configuration (defaults injected), so a run directory is reproducible
//! from its own manifest. Data files are CSV and raw binary snapshots;
//! summaries are JSON. Exit codes: 0 success, 2 invalid input, 3 numerical
//! failure, 4 I/O failure.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Parser;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::evolution::{evolve, travel_test, EvolveOptions, EvolutionTrace};
use crate::groundstate::{
    minimize_energy_at_charge, nls_ground_state, solitary_wave, speed_charge_curve,
    MinimizerOptions,
};
use crate::io;
use crate::model::{Interval, NonlinearityModel};
use crate::spectral::{Field, Grid};
use crate::stability::{
    stability_experiment, subadditivity_check, PerturbationSpec, StabilityOptions,
};
use crate::{Error, Result};

/// Command-line flags.
#[derive(Debug, Parser)]
#[command(name = "kdvlab", about = "Solitary-wave experiments for generalized KdV equations")]
pub struct CliArgs {
    /// Run configuration file (JSON).
    #[arg(long)]
    pub config: PathBuf,

    /// Directory to create for this run's outputs.
    #[arg(long)]
    pub out: PathBuf,

    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,

    /// Suppress progress output on stdout.
    #[arg(long)]
    pub quiet: bool,
}

/// A complete run description. Parsing is strict: unknown keys are errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub grid: GridSpec,
    pub command: CommandSpec,
}

/// Potential family selector plus the gauge-shift switch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: FamilyName,
    /// Power exponent; required for `mkdv` (integer) and `abs_power`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    /// Coefficients of s^2, s^3, ...; required for `polynomial`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
    /// Replace W by W + (1 - W''(0)/2) s^2 when W''(0) <= 0, recording the
    /// frame speed, so the minimizer's coercivity condition holds.
    #[serde(default = "default_true")]
    pub auto_gauge_shift: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Mkdv,
    AbsPower,
    Polynomial,
}

/// Periodic box: `n` samples on `[0, L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(rename = "L", default = "default_length")]
    pub length: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n: default_n(), length: default_length() }
    }
}

/// Sampling window for assumption checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    Gkdv,
    Nls,
}

/// Initial condition for `evolve` runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `amplitude * exp(-(x - center)^2 / (2 width^2))`, wrapped periodically.
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<f64>,
    },
    /// Closed-form solitary wave at the given frame speed (single-power
    /// potentials only).
    Soliton {
        speed: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<f64>,
    },
    /// Binary snapshot produced by an earlier run; must match the grid.
    File { path: PathBuf },
}

/// The experiment to run, with per-command parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CommandSpec {
    /// Evaluate the structural conditions on `W` and report each verdict.
    CheckModel {
        #[serde(default = "default_range")]
        range: RangeSpec,
        #[serde(default = "default_check_samples")]
        samples: usize,
    },
    /// Minimize the energy on a constraint sphere and store the profile.
    GroundState {
        /// Constraint value: charge `integral(u^2)/2` in gkdv mode, mass
        /// `integral(u^2)` in nls mode.
        charge: f64,
        #[serde(default = "default_mode")]
        mode: ModeName,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default = "default_max_iterations")]
        max_iterations: usize,
    },
    /// Integrate an initial state and record conserved-quantity series.
    Evolve {
        initial: InitialSpec,
        #[serde(default = "default_dt")]
        dt: f64,
        t_end: f64,
        #[serde(default = "default_sample_stride")]
        sample_stride: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        snapshot_stride: Option<f64>,
        #[serde(default = "default_true")]
        dealias: bool,
    },
    /// Minimize at a charge, evolve the profile, compare measured and
    /// predicted translation speeds.
    TravelTest {
        charge: f64,
        #[serde(default = "default_dt")]
        dt: f64,
        #[serde(default = "default_travel_t_end")]
        t_end: f64,
        #[serde(default = "default_sample_stride")]
        sample_stride: f64,
    },
    /// Perturb a ground state several ways and measure orbital excursions.
    Stability {
        charge: f64,
        perturbations: Vec<PerturbationSpec>,
        #[serde(default = "default_dt")]
        dt: f64,
        #[serde(default = "default_stability_t_end")]
        t_end: f64,
        #[serde(default = "default_sample_stride")]
        sample_stride: f64,
        #[serde(default = "default_ratio")]
        ratio: f64,
        #[serde(default = "default_distance_floor")]
        distance_floor: f64,
    },
    /// Sweep ground states over a list of charges.
    SpeedCurve {
        charges: Vec<f64>,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default = "default_max_iterations")]
        max_iterations: usize,
    },
    /// Compare minimal energies at c1, c2 and c1+c2.
    Subadditivity {
        c1: f64,
        c2: f64,
        #[serde(default)]
        margin: f64,
    },
}

fn default_true() -> bool {
    true
}
fn default_n() -> usize {
    1024
}
fn default_length() -> f64 {
    80.0
}
fn default_range() -> RangeSpec {
    RangeSpec { min: -1e6, max: 1e6 }
}
fn default_check_samples() -> usize {
    10_000
}
fn default_mode() -> ModeName {
    ModeName::Gkdv
}
fn default_tol() -> f64 {
    1e-10
}
fn default_max_iterations() -> usize {
    100_000
}
fn default_dt() -> f64 {
    1e-3
}
fn default_sample_stride() -> f64 {
    0.1
}
fn default_travel_t_end() -> f64 {
    10.0
}
fn default_stability_t_end() -> f64 {
    20.0
}
fn default_ratio() -> f64 {
    10.0
}
fn default_distance_floor() -> f64 {
    1e-6
}

impl RunConfig {
    /// Strict parse from JSON text.
    pub fn from_json(text: &str) -> Result<RunConfig> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<RunConfig> {
        RunConfig::from_json(&std::fs::read_to_string(path)?)
    }

    /// Makes implicit defaults explicit so the manifest stands alone:
    /// currently the initial-condition center, which defaults to mid-domain.
    pub fn resolve_defaults(&mut self) {
        let mid = self.grid.length / 2.0;
        if let CommandSpec::Evolve { initial, .. } = &mut self.command {
            match initial {
                InitialSpec::Gaussian { center, .. } | InitialSpec::Soliton { center, .. } => {
                    center.get_or_insert(mid);
                }
                InitialSpec::File { .. } => {}
            }
        }
    }
}

impl ModelSpec {
    /// Builds the model, applying the gauge shift when requested.
    pub fn build(&self) -> Result<NonlinearityModel> {
        let base = match self.family {
            FamilyName::Mkdv => {
                self.reject_coeffs()?;
                let k = self.require_k()?;
                if k.fract() != 0.0 || !(1.0..=64.0).contains(&k) {
                    return Err(Error::Config(format!(
                        "mkdv needs an integer exponent k in [1, 64], got {k}"
                    )));
                }
                NonlinearityModel::mkdv(k as u32)?
            }
            FamilyName::AbsPower => {
                self.reject_coeffs()?;
                NonlinearityModel::abs_power(self.require_k()?)?
            }
            FamilyName::Polynomial => {
                if self.k.is_some() {
                    return Err(Error::Config(
                        "field \"k\" is not valid for the polynomial family".to_string(),
                    ));
                }
                let coeffs = self.coeffs.as_ref().ok_or_else(|| {
                    Error::Config("polynomial family needs \"coeffs\"".to_string())
                })?;
                NonlinearityModel::polynomial(coeffs)?
            }
        };
        if self.auto_gauge_shift {
            Ok(base.gauge_shifted().0)
        } else {
            Ok(base)
        }
    }

    fn require_k(&self) -> Result<f64> {
        self.k.ok_or_else(|| {
            Error::Config(format!("family {:?} needs the exponent field \"k\"", self.family))
        })
    }

    fn reject_coeffs(&self) -> Result<()> {
        if self.coeffs.is_some() {
            return Err(Error::Config(
                "field \"coeffs\" is only valid for the polynomial family".to_string(),
            ));
        }
        Ok(())
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<Grid>> {
        Grid::new(self.n, self.length)
    }
}

/// Full CLI entry point: configure the worker pool, load the config, run.
pub fn run(args: &CliArgs) -> Result<()> {
    if let Some(jobs) = args.jobs {
        // A second initialization (e.g. in-process reuse) keeps the first
        // pool; that is fine for a bound that only caps parallelism.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let mut config = RunConfig::from_path(&args.config)?;
    execute(&mut config, &args.out, args.quiet)
}

/// Resolves the config, writes the manifest, dispatches the command.
///
/// The manifest goes out before any numerics so that failed runs still
/// leave a reproducible record.
pub fn execute(config: &mut RunConfig, out: &Path, quiet: bool) -> Result<()> {
    config.resolve_defaults();
    let model = config.model.build()?;
    let grid = config.grid.build()?;

    std::fs::create_dir_all(out)?;
    io::write_json(&out.join("manifest.json"), &serde_json::to_value(&*config)?)?;

    match config.command.clone() {
        CommandSpec::CheckModel { range, samples } => {
            cmd_check_model(&model, range, samples, out, quiet)
        }
        CommandSpec::GroundState { charge, mode, tol, max_iterations } => {
            cmd_ground_state(&model, &grid, charge, mode, tol, max_iterations, out, quiet)
        }
        CommandSpec::Evolve { initial, dt, t_end, sample_stride, snapshot_stride, dealias } => {
            cmd_evolve(
                &model,
                &grid,
                &initial,
                dt,
                t_end,
                sample_stride,
                snapshot_stride,
                dealias,
                out,
                quiet,
            )
        }
        CommandSpec::TravelTest { charge, dt, t_end, sample_stride } => {
            cmd_travel_test(&model, &grid, charge, dt, t_end, sample_stride, out, quiet)
        }
        CommandSpec::Stability {
            charge,
            perturbations,
            dt,
            t_end,
            sample_stride,
            ratio,
            distance_floor,
        } => {
            let opts = StabilityOptions { dt, sample_stride, ratio, distance_floor };
            cmd_stability(&model, &grid, charge, &perturbations, t_end, &opts, out, quiet)
        }
        CommandSpec::SpeedCurve { charges, tol, max_iterations } => {
            cmd_speed_curve(&model, &grid, &charges, tol, max_iterations, out, quiet)
        }
        CommandSpec::Subadditivity { c1, c2, margin } => {
            cmd_subadditivity(&model, &grid, c1, c2, margin, out, quiet)
        }
    }
}

fn say(quiet: bool, msg: &str) {
    if !quiet {
        println!("{msg}");
    }
}

fn cmd_check_model(
    model: &NonlinearityModel,
    range: RangeSpec,
    samples: usize,
    out: &Path,
    quiet: bool,
) -> Result<()> {
    let report = model.check_assumptions(Interval::new(range.min, range.max), samples)?;
    io::write_json(
        &out.join("assumptions.json"),
        &json!({
            "all_passed": report.all_passed(),
            "report": report,
        }),
    )?;
    for check in &report.checks {
        let verdict = if check.passed { "pass" } else { "FAIL" };
        match &check.note {
            Some(note) => say(quiet, &format!("{:?}: {} ({})", check.name, verdict, note)),
            None => say(quiet, &format!("{:?}: {}", check.name, verdict)),
        }
    }
    say(
        quiet,
        if report.all_passed() { "assumptions: all passed" } else { "assumptions: FAILURES" },
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_ground_state(
    model: &NonlinearityModel,
    grid: &Arc<Grid>,
    charge: f64,
    mode: ModeName,
    tol: f64,
    max_iterations: usize,
    out: &Path,
    quiet: bool,
) -> Result<()> {
    let opts = MinimizerOptions { tol, max_iterations, ..Default::default() };
    let gs = match mode {
        ModeName::Gkdv => minimize_energy_at_charge(model, grid, charge, &opts)?,
        ModeName::Nls => nls_ground_state(model, grid, charge, &opts)?,
    };
    io::write_json(&out.join("ground_state.json"), &io::ground_state_json(&gs))?;
    io::write_field_csv(&out.join("profile.csv"), &gs.profile)?;
    io::write_field_bin(&out.join("profile.bin"), &gs.profile, 0.0)?;
    say(
        quiet,
        &format!(
            "ground state: energy {:.6e}, speed {:.6e}, residual {:.3e}, {} iterations",
            gs.energy, gs.speed, gs.residual, gs.iterations
        ),
    );
    if !gs.converged {
        return Err(Error::NotConverged { residual: gs.residual, iterations: gs.iterations });
    }
    Ok(())
}

fn make_initial(
    spec: &InitialSpec,
    model: &NonlinearityModel,
    grid: &Arc<Grid>,
) -> Result<Field> {
    let mid = grid.length() / 2.0;
    match spec {
        InitialSpec::Gaussian { amplitude, width, center } => {
            if !(amplitude.is_finite() && width.is_finite() && *width > 0.0) {
                return Err(Error::Config(format!(
                    "gaussian initial data needs finite amplitude and width > 0, got {amplitude}, {width}"
                )));
            }
            let c = center.unwrap_or(mid);
            let (a, w, g) = (*amplitude, *width, grid.clone());
            Field::from_fn(grid, move |x| {
                let d = g.wrap_displacement(x - c);
                a * (-d * d / (2.0 * w * w)).exp()
            })
        }
        InitialSpec::Soliton { speed, center } => {
            solitary_wave(model, grid, *speed, center.unwrap_or(mid))
        }
        InitialSpec::File { path } => Ok(io::read_field_bin(path, grid)?.0),
    }
}

fn write_evolution_outputs(
    trace: &EvolutionTrace,
    dt: f64,
    blow_up_time: Option<f64>,
    out: &Path,
    quiet: bool,
) -> Result<()> {
    io::write_trace_csv(&out.join("trace.csv"), trace)?;
    io::write_field_bin(
        &out.join("final_state.bin"),
        &trace.final_state,
        *trace.times.last().expect("traces always hold the initial sample"),
    )?;
    io::write_field_csv(&out.join("final_state.csv"), &trace.final_state)?;

    let snapdir = out.join("snapshots");
    std::fs::create_dir_all(&snapdir)?;
    for (i, (t, state)) in trace.snapshots.iter().enumerate() {
        io::write_field_bin(&snapdir.join(format!("snapshot_{i:06}.bin")), state, *t)?;
    }

    io::write_json(
        &out.join("evolve.json"),
        &json!({
            "dt": dt,
            "t_end_reached": trace.times.last(),
            "samples": trace.times.len(),
            "energy_drift": trace.energy_drift,
            "charge_drift": trace.charge_drift,
            "well_posedness_guaranteed": trace.well_posedness_guaranteed,
            "blow_up_time": blow_up_time,
        }),
    )?;
    say(
        quiet,
        &format!(
            "evolved to t = {:.6}: energy drift {:.3e}, charge drift {:.3e}",
            trace.times.last().expect("nonempty"),
            trace.energy_drift,
            trace.charge_drift
        ),
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_evolve(
    model: &NonlinearityModel,
    grid: &Arc<Grid>,
    initial: &InitialSpec,
    dt: f64,
    t_end: f64,
    sample_stride: f64,
    snapshot_stride: Option<f64>,
    dealias: bool,
    out: &Path,
    quiet: bool,
) -> Result<()> {
    let u0 = make_initial(initial, model, grid)?;
    let opts = EvolveOptions {
        sample_stride,
        snapshot_stride,
        dealias,
        reference: Some(u0.clone()),
    };
    match evolve(&u0, model, dt, t_end, &opts) {
        Ok(trace) => write_evolution_outputs(&trace, dt, None, out, quiet),
        Err(Error::BlowUp { time, trace }) => {
            write_evolution_outputs(&trace, dt, Some(time), out, quiet)?;
            Err(Error::BlowUp { time, trace })
        }
        Err(e) => Err(e),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_travel_test(
    model: &NonlinearityModel,
    grid: &Arc<Grid>,
    charge: f64,
    dt: f64,
    t_end: f64,
    sample_stride: f64,
    out: &Path,
    quiet: bool,
) -> Result<()> {
    let gs = minimize_energy_at_charge(model, grid, charge, &MinimizerOptions::default())?;
    io::write_json(&out.join("ground_state.json"), &io::ground_state_json(&gs))?;
    io::write_field_csv(&out.join("profile.csv"), &gs.profile)?;
    let report = travel_test(&gs, model, dt, t_end, sample_stride)?;
    io::write_travel_csv(&out.join("travel.csv"), &report)?;
    let denom = report.predicted_speed.abs().max(f64::MIN_POSITIVE);
    io::write_json(
        &out.join("travel.json"),
        &json!({
            "measured_speed": report.measured_speed,
            "predicted_speed": report.predicted_speed,
            "relative_speed_error": (report.measured_speed - report.predicted_speed).abs() / denom,
            "max_orbital_distance": report.max_orbital_distance,
            "well_posedness_guaranteed": report.well_posedness_guaranteed,
        }),
    )?;
    say(
        quiet,
        &format!(
            "travel: measured {:.8}, predicted {:.8}, max orbital distance {:.3e}",
            report.measured_speed, report.predicted_speed, report.max_orbital_distance
        ),
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_stability(
    model: &NonlinearityModel,
    grid: &Arc<Grid>,
    charge: f64,
    perturbations: &[PerturbationSpec],
    t_end: f64,
    opts: &StabilityOptions,
    out: &Path,
    quiet: bool,
) -> Result<()> {
    let gs = minimize_energy_at_charge(model, grid, charge, &MinimizerOptions::default())?;
    io::write_json(&out.join("ground_state.json"), &io::ground_state_json(&gs))?;
    let report = stability_experiment(&gs, model, perturbations, t_end, opts)?;
    io::write_stability_csv(&out.join("stability.csv"), &report)?;

    let rows: Vec<serde_json::Value> = report
        .rows
        .iter()
        .map(|row| match &row.outcome {
            Ok(v) => json!({
                "perturbation": row.spec,
                "initial_distance": v.initial_distance,
                "max_distance": v.max_distance,
                "final_distance": v.final_distance,
                "passed": v.passed,
            }),
            Err(msg) => json!({
                "perturbation": row.spec,
                "error": msg,
            }),
        })
        .collect();
    let all_passed = report
        .rows
        .iter()
        .all(|row| matches!(&row.outcome, Ok(v) if v.passed));
    io::write_json(
        &out.join("stability.json"),
        &json!({
            "t_end": report.t_end,
            "ratio": report.ratio,
            "well_posedness_guaranteed": report.well_posedness_guaranteed,
            "all_passed": all_passed,
            "rows": rows,
        }),
    )?;
    for row in &report.rows {
        match &row.outcome {
            Ok(v) => say(
                quiet,
                &format!(
                    "{} eps {:.1e}: initial {:.3e}, max {:.3e}, {}",
                    row.spec.kind_name(),
                    row.spec.epsilon(),
                    v.initial_distance,
                    v.max_distance,
                    if v.passed { "pass" } else { "FAIL" }
                ),
            ),
            Err(msg) => say(
                quiet,
                &format!("{} eps {:.1e}: error: {msg}", row.spec.kind_name(), row.spec.epsilon()),
            ),
        }
    }
    Ok(())
}

fn cmd_speed_curve(
    model: &NonlinearityModel,
    grid: &Arc<Grid>,
    charges: &[f64],
    tol: f64,
    max_iterations: usize,
    out: &Path,
    quiet: bool,
) -> Result<()> {
    let opts = MinimizerOptions { tol, max_iterations, ..Default::default() };
    let rows = speed_charge_curve(model, grid, charges, &opts)?;
    io::write_curve_csv(&out.join("curve.csv"), &rows, model.shift_speed())?;
    for row in &rows {
        match &row.outcome {
            Ok(v) => say(
                quiet,
                &format!("charge {:.6}: speed {:.8}, energy {:.8}", row.charge, v.speed, v.energy),
            ),
            Err(msg) => say(quiet, &format!("charge {:.6}: error: {msg}", row.charge)),
        }
    }
    Ok(())
}

fn cmd_subadditivity(
    model: &NonlinearityModel,
    grid: &Arc<Grid>,
    c1: f64,
    c2: f64,
    margin: f64,
    out: &Path,
    quiet: bool,
) -> Result<()> {
    let report = subadditivity_check(model, grid, c1, c2, margin, &MinimizerOptions::default())?;
    io::write_json(
        &out.join("subadditivity.json"),
        &json!({
            "c1": report.c1,
            "c2": report.c2,
            "energy_c1": report.energy_c1,
            "energy_c2": report.energy_c2,
            "energy_sum": report.energy_sum,
            "margin": report.margin,
            "strict": report.strict,
        }),
    )?;
    say(
        quiet,
        &format!(
            "subadditivity: e({}) + e({}) = {:.8}, e({}) = {:.8}, strict: {}",
            report.c1,
            report.c2,
            report.energy_c1 + report.energy_c2,
            report.c1 + report.c2,
            report.energy_sum,
            report.strict,
        ),
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn minimal_evolve_config() -> &'static str {
        r#"{
            "model": { "family": "mkdv", "k": 1 },
            "command": {
                "type": "evolve",
                "initial": { "kind": "gaussian", "amplitude": 0.5, "width": 2.0 },
                "t_end": 1.0
            }
        }"#
    }

    #[test]
    fn defaults_are_injected_on_parse() {
        let cfg = RunConfig::from_json(minimal_evolve_config()).unwrap();
        assert_eq!(cfg.grid, GridSpec { n: 1024, length: 80.0 });
        assert!(cfg.model.auto_gauge_shift);
        match &cfg.command {
            CommandSpec::Evolve { dt, sample_stride, snapshot_stride, dealias, .. } => {
                assert_eq!(*dt, 1e-3);
                assert_eq!(*sample_stride, 0.1);
                assert_eq!(*snapshot_stride, None);
                assert!(dealias);
            }
            other => panic!("wrong command: {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_at_every_level() {
        let top = r#"{ "model": {"family":"mkdv","k":1}, "command": {"type":"subadditivity","c1":1,"c2":1}, "extra": 0 }"#;
        assert!(RunConfig::from_json(top).is_err());

        let in_model =
            r#"{ "model": {"family":"mkdv","k":1,"order":3}, "command": {"type":"subadditivity","c1":1,"c2":1} }"#;
        assert!(RunConfig::from_json(in_model).is_err());

        let in_command = r#"{ "model": {"family":"mkdv","k":1}, "command": {"type":"subadditivity","c1":1,"c2":1,"c3":1} }"#;
        assert!(RunConfig::from_json(in_command).is_err());

        let in_grid = r#"{ "model": {"family":"mkdv","k":1}, "grid": {"n":256,"L":40,"dx":0.1}, "command": {"type":"subadditivity","c1":1,"c2":1} }"#;
        assert!(RunConfig::from_json(in_grid).is_err());
    }

    #[test]
    fn model_spec_validation_catches_family_mismatches() {
        let frac = ModelSpec {
            family: FamilyName::Mkdv,
            k: Some(1.5),
            coeffs: None,
            auto_gauge_shift: true,
        };
        assert_eq!(frac.build().unwrap_err().exit_code(), 2);

        let missing = ModelSpec {
            family: FamilyName::AbsPower,
            k: None,
            coeffs: None,
            auto_gauge_shift: true,
        };
        assert_eq!(missing.build().unwrap_err().exit_code(), 2);

        let stray_coeffs = ModelSpec {
            family: FamilyName::Mkdv,
            k: Some(1.0),
            coeffs: Some(vec![1.0]),
            auto_gauge_shift: true,
        };
        assert_eq!(stray_coeffs.build().unwrap_err().exit_code(), 2);

        let stray_k = ModelSpec {
            family: FamilyName::Polynomial,
            k: Some(1.0),
            coeffs: Some(vec![0.0, -1.0]),
            auto_gauge_shift: false,
        };
        assert_eq!(stray_k.build().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn gauge_shift_flag_controls_the_frame() {
        let spec = ModelSpec {
            family: FamilyName::Mkdv,
            k: Some(1.0),
            coeffs: None,
            auto_gauge_shift: true,
        };
        let shifted = spec.build().unwrap();
        assert_eq!(shifted.shift_speed(), 2.0);
        assert_eq!(shifted.e0(), 1.0);

        let raw = ModelSpec { auto_gauge_shift: false, ..spec }.build().unwrap();
        assert_eq!(raw.shift_speed(), 0.0);
        assert_eq!(raw.e0(), 0.0);
    }

    #[test]
    fn manifests_echo_resolved_defaults_and_round_trip() {
        let mut cfg = RunConfig::from_json(minimal_evolve_config()).unwrap();
        cfg.resolve_defaults();
        match &cfg.command {
            CommandSpec::Evolve { initial: InitialSpec::Gaussian { center, .. }, .. } => {
                assert_eq!(*center, Some(40.0));
            }
            other => panic!("wrong command: {other:?}"),
        }
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert!(text.contains("\"L\": 80.0"));
        assert!(text.contains("\"auto_gauge_shift\": true"));
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn check_model_run_writes_manifest_and_report() {
        let dir = tempdir().unwrap();
        let out = dir.path().join("run");
        let mut cfg = RunConfig {
            model: ModelSpec {
                family: FamilyName::Mkdv,
                k: Some(3.0),
                coeffs: None,
                auto_gauge_shift: true,
            },
            grid: GridSpec::default(),
            command: CommandSpec::CheckModel {
                range: default_range(),
                samples: default_check_samples(),
            },
        };
        execute(&mut cfg, &out, true).unwrap();

        let manifest: RunConfig = io::read_json(&out.join("manifest.json")).unwrap();
        assert_eq!(manifest, cfg);

        let report: serde_json::Value = io::read_json(&out.join("assumptions.json")).unwrap();
        assert_eq!(report["all_passed"], serde_json::Value::Bool(true));
        assert_eq!(report["report"]["checks"].as_array().unwrap().len(), 6);
    }

    #[test]
    fn invalid_charge_maps_to_a_validation_error() {
        let dir = tempdir().unwrap();
        let mut cfg = RunConfig {
            model: ModelSpec {
                family: FamilyName::Mkdv,
                k: Some(1.0),
                coeffs: None,
                auto_gauge_shift: true,
            },
            grid: GridSpec { n: 128, length: 40.0 },
            command: CommandSpec::GroundState {
                charge: 0.0,
                mode: ModeName::Gkdv,
                tol: 1e-10,
                max_iterations: 10,
            },
        };
        let err = execute(&mut cfg, &dir.path().join("run"), true).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn initial_conditions_resolve_against_model_and_grid() {
        let grid = Grid::new(128, 40.0).unwrap();
        let model = NonlinearityModel::kdv();

        let g = make_initial(
            &InitialSpec::Gaussian { amplitude: 2.0, width: 1.5, center: None },
            &model,
            &grid,
        )
        .unwrap();
        let peak = g.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((peak - 2.0).abs() < 1e-12);

        let s = make_initial(
            &InitialSpec::Soliton { speed: 1.0, center: Some(10.0) },
            &model,
            &grid,
        )
        .unwrap();
        let expected = solitary_wave(&model, &grid, 1.0, 10.0).unwrap();
        assert_eq!(s.values(), expected.values());

        // Soliton initial data needs a closed form; mixed polynomials have none.
        let mixed = NonlinearityModel::polynomial(&[1.0, -1.0, -0.5]).unwrap();
        let err = make_initial(&InitialSpec::Soliton { speed: 1.0, center: None }, &mixed, &grid)
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);

        let bad = make_initial(
            &InitialSpec::Gaussian { amplitude: 1.0, width: 0.0, center: None },
            &model,
            &grid,
        )
        .unwrap_err();
        assert_eq!(bad.exit_code(), 2);
    }

    #[test]
    fn perturbation_specs_parse_inside_stability_commands() {
        let text = r#"{
            "model": { "family": "mkdv", "k": 1 },
            "grid": { "n": 256, "L": 40.0 },
            "command": {
                "type": "stability",
                "charge": 6.0,
                "perturbations": [
                    { "kind": "scale", "epsilon": 1e-3 },
                    { "kind": "bump", "epsilon": 1e-3, "offset": 2.0 },
                    { "kind": "noise", "epsilon": 1e-3, "seed": 7 }
                ]
            }
        }"#;
        let cfg = RunConfig::from_json(text).unwrap();
        match &cfg.command {
            CommandSpec::Stability { perturbations, t_end, ratio, distance_floor, .. } => {
                assert_eq!(perturbations.len(), 3);
                assert_eq!(*t_end, 20.0);
                assert_eq!(*ratio, 10.0);
                assert_eq!(*distance_floor, 1e-6);
            }
            other => panic!("wrong command: {other:?}"),
        }
    }
}
