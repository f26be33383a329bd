//! Orbital-stability experiments: perturb a computed ground state, evolve,
//! and measure how far the flow strays from the profile's translation
//! orbit. Stability is reported as a ratio verdict (max excursion within a
//! configured multiple of the initial offset), the quantitative stand-in
//! for the qualitative epsilon-delta definition.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evolution::{evolve, EvolveOptions};
use crate::functionals::h1_norm;
use crate::groundstate::{minimize_energy_at_charge, GroundState, MinimizerOptions};
use crate::model::NonlinearityModel;
use crate::spectral::{Field, Grid};
use crate::{Error, Result};

fn default_bump_width() -> f64 {
    1.0
}

/// A reproducible perturbation of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PerturbationSpec {
    /// `u -> (1 + epsilon) u`.
    Scale { epsilon: f64 },
    /// Adds `epsilon * exp(-(x - L/2 - offset)^2 / (2 width^2))`.
    Bump {
        epsilon: f64,
        offset: f64,
        #[serde(default = "default_bump_width")]
        width: f64,
    },
    /// Adds seeded band-limited noise (`|k| <= k_max / 4`) of unit H1 norm,
    /// scaled by epsilon. The band keeps perturbed data in the resolved
    /// subspace so verdicts are not contaminated by under-resolution.
    Noise { epsilon: f64, seed: u64 },
}

impl PerturbationSpec {
    pub fn epsilon(&self) -> f64 {
        match *self {
            PerturbationSpec::Scale { epsilon }
            | PerturbationSpec::Bump { epsilon, .. }
            | PerturbationSpec::Noise { epsilon, .. } => epsilon,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            PerturbationSpec::Scale { .. } => "scale",
            PerturbationSpec::Bump { .. } => "bump",
            PerturbationSpec::Noise { .. } => "noise",
        }
    }

    fn validate(&self) -> Result<()> {
        let eps = self.epsilon();
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::domain(format!(
                "perturbation strength must be nonnegative, got {eps}"
            )));
        }
        if let PerturbationSpec::Bump { offset, width, .. } = *self {
            if !offset.is_finite() {
                return Err(Error::domain("bump offset must be finite"));
            }
            if !(width.is_finite() && width > 0.0) {
                return Err(Error::domain(format!("bump width must be positive, got {width}")));
            }
        }
        Ok(())
    }
}

/// Applies a perturbation; deterministic given the spec, and the identity
/// at `epsilon = 0`.
pub fn perturb(u: &Field, spec: &PerturbationSpec) -> Result<Field> {
    spec.validate()?;
    if spec.epsilon() == 0.0 {
        return Ok(u.clone());
    }
    let grid = u.grid();
    match *spec {
        PerturbationSpec::Scale { epsilon } => {
            let vals = u.values().iter().map(|v| (1.0 + epsilon) * v).collect();
            Field::new(grid, vals)
        }
        PerturbationSpec::Bump { epsilon, offset, width } => {
            let center = grid.length() / 2.0 + offset;
            let vals = u
                .values()
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    let d = grid.wrap_displacement(grid.x(j) - center);
                    v + epsilon * (-d * d / (2.0 * width * width)).exp()
                })
                .collect();
            Field::new(grid, vals)
        }
        PerturbationSpec::Noise { epsilon, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let white: Vec<f64> = (0..grid.n()).map(|_| rng.gen::<f64>() - 0.5).collect();
            let mut spectrum = Field::from_vec_unchecked(grid.clone(), white).to_spectrum();
            let band = grid.k_max() / 4.0;
            spectrum.scale_by(|k| if k.abs() <= band { 1.0 } else { 0.0 });
            let shaped = spectrum.to_field();
            let norm = h1_norm(&shaped);
            if norm == 0.0 {
                return Err(Error::domain("noise field vanished after band limiting"));
            }
            let scale = epsilon / norm;
            let vals = u
                .values()
                .iter()
                .zip(shaped.values())
                .map(|(v, w)| v + scale * w)
                .collect();
            Field::new(grid, vals)
        }
    }
}

/// Knobs for a stability run.
#[derive(Debug, Clone, Copy)]
pub struct StabilityOptions {
    pub dt: f64,
    pub sample_stride: f64,
    /// A row passes when its max excursion stays within `ratio` times the
    /// initial distance (or within `distance_floor` absolutely, so the
    /// unperturbed row is not judged by a 0/0 ratio).
    pub ratio: f64,
    pub distance_floor: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions { dt: 1e-3, sample_stride: 0.1, ratio: 10.0, distance_floor: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StabilityValues {
    /// Orbital distance right after the perturbation.
    pub initial_distance: f64,
    /// Max orbital distance to the unperturbed orbit over the run.
    pub max_distance: f64,
    pub final_distance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct StabilityRow {
    pub spec: PerturbationSpec,
    /// Measured excursions, or the error message for a failed row.
    pub outcome: std::result::Result<StabilityValues, String>,
}

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    pub t_end: f64,
    pub ratio: f64,
    /// False flags runs on models whose global existence is not guaranteed.
    pub well_posedness_guaranteed: bool,
}

/// Perturbs the ground state once per spec, evolves each over `[0, t_end]`,
/// and measures excursions from the profile's translation orbit. Rows run
/// as independent parallel jobs; per-row failures are recorded, not fatal.
pub fn stability_experiment(
    gs: &GroundState,
    model: &NonlinearityModel,
    specs: &[PerturbationSpec],
    t_end: f64,
    opts: &StabilityOptions,
) -> Result<StabilityReport> {
    if !gs.converged {
        return Err(Error::NotConverged { residual: gs.residual, iterations: gs.iterations });
    }
    if !(opts.dt.is_finite() && opts.dt > 0.0) {
        return Err(Error::domain(format!("time step must be positive, got {}", opts.dt)));
    }
    if !(opts.ratio.is_finite() && opts.ratio >= 1.0) {
        return Err(Error::domain(format!("acceptance ratio must be >= 1, got {}", opts.ratio)));
    }
    if !(opts.distance_floor.is_finite() && opts.distance_floor >= 0.0) {
        return Err(Error::domain("distance floor must be nonnegative"));
    }

    let rows = specs
        .par_iter()
        .map(|spec| {
            let outcome = run_row(gs, model, spec, t_end, opts).map_err(|e| e.to_string());
            StabilityRow { spec: *spec, outcome }
        })
        .collect();

    Ok(StabilityReport {
        rows,
        t_end,
        ratio: opts.ratio,
        well_posedness_guaranteed: model.base_holds(),
    })
}

fn run_row(
    gs: &GroundState,
    model: &NonlinearityModel,
    spec: &PerturbationSpec,
    t_end: f64,
    opts: &StabilityOptions,
) -> Result<StabilityValues> {
    let perturbed = perturb(&gs.profile, spec)?;
    let evolve_opts = EvolveOptions {
        sample_stride: opts.sample_stride,
        reference: Some(gs.profile.clone()),
        ..EvolveOptions::default()
    };
    let trace = evolve(&perturbed, model, opts.dt, t_end, &evolve_opts)?;
    let distances = trace.distances.as_ref().expect("reference tracking was enabled");
    let initial_distance = distances[0];
    let max_distance = distances.iter().cloned().fold(0.0, f64::max);
    let final_distance = *distances.last().expect("at least the initial sample exists");
    let passed = max_distance <= (opts.ratio * initial_distance).max(opts.distance_floor);
    Ok(StabilityValues { initial_distance, max_distance, final_distance, passed })
}

/// Energies entering a strict-subadditivity certificate.
#[derive(Debug, Clone, Copy)]
pub struct SubadditivityReport {
    pub c1: f64,
    pub c2: f64,
    pub energy_c1: f64,
    pub energy_c2: f64,
    pub energy_sum: f64,
    pub margin: f64,
    /// `e(c1 + c2) < e(c1) + e(c2) - margin`.
    pub strict: bool,
}

/// Runs the three minimizations behind the strict-subadditivity inequality,
/// the energetic mechanism that prevents a ground state from splitting into
/// two far-apart pieces of smaller charge.
pub fn subadditivity_check(
    model: &NonlinearityModel,
    grid: &Arc<Grid>,
    c1: f64,
    c2: f64,
    margin: f64,
    opts: &MinimizerOptions,
) -> Result<SubadditivityReport> {
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(Error::domain(format!("margin must be nonnegative, got {margin}")));
    }
    let energy_c1 = minimize_energy_at_charge(model, grid, c1, opts)?.energy;
    let energy_c2 = if c2 == c1 {
        energy_c1
    } else {
        minimize_energy_at_charge(model, grid, c2, opts)?.energy
    };
    let energy_sum = minimize_energy_at_charge(model, grid, c1 + c2, opts)?.energy;
    Ok(SubadditivityReport {
        c1,
        c2,
        energy_c1,
        energy_c2,
        energy_sum,
        margin,
        strict: energy_sum < energy_c1 + energy_c2 - margin,
    })
}

/// Minimal energy per unit of constrained charge, the binding diagnostic:
/// profiles with a lower ratio than the vacuum's quadratic response hold
/// together.
pub fn hylomorphy_ratio(gs: &GroundState) -> Result<f64> {
    if !gs.converged {
        return Err(Error::NotConverged { residual: gs.residual, iterations: gs.iterations });
    }
    if gs.charge_target <= 0.0 {
        return Err(Error::domain("hylomorphy ratio needs a positive constraint value"));
    }
    Ok(gs.energy / gs.charge_target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{charge, energy, h1_distance};

    fn grid(n: usize, length: f64) -> Arc<Grid> {
        Grid::new(n, length).unwrap()
    }

    fn sample_profile(g: &Arc<Grid>) -> Field {
        Field::from_fn(g, |x| 2.0 / ((x - g.length() / 2.0) / 2.0).cosh()).unwrap()
    }

    #[test]
    fn zero_strength_perturbations_are_the_identity() {
        let g = grid(256, 40.0);
        let u = sample_profile(&g);
        for spec in [
            PerturbationSpec::Scale { epsilon: 0.0 },
            PerturbationSpec::Bump { epsilon: 0.0, offset: 3.0, width: 1.0 },
            PerturbationSpec::Noise { epsilon: 0.0, seed: 42 },
        ] {
            let out = perturb(&u, &spec).unwrap();
            assert_eq!(out.values(), u.values());
        }
    }

    #[test]
    fn scaling_obeys_the_quadratic_charge_law() {
        let g = grid(256, 40.0);
        let u = sample_profile(&g);
        let eps = 0.125;
        let out = perturb(&u, &PerturbationSpec::Scale { epsilon: eps }).unwrap();
        let expected = (1.0 + eps) * (1.0 + eps) * charge(&u);
        assert!((charge(&out) - expected).abs() <= 1e-14 * expected);
    }

    #[test]
    fn bump_distance_is_linear_in_strength() {
        let g = grid(256, 40.0);
        let u = sample_profile(&g);
        let (eps, offset, width) = (1e-2, 3.0, 1.0);
        let out = perturb(&u, &PerturbationSpec::Bump { epsilon: eps, offset, width }).unwrap();
        let gauss = Field::from_fn(&g, |x| {
            let d = x - g.length() / 2.0 - offset;
            (-d * d / (2.0 * width * width)).exp()
        })
        .unwrap();
        let dist = h1_distance(&out, &u).unwrap();
        assert!((dist - eps * h1_norm(&gauss)).abs() <= 1e-12);
    }

    #[test]
    fn noise_is_seeded_band_limited_and_unit_normalized() {
        let g = grid(256, 40.0);
        let u = sample_profile(&g);
        let spec = PerturbationSpec::Noise { epsilon: 1e-2, seed: 7 };
        let a = perturb(&u, &spec).unwrap();
        let b = perturb(&u, &spec).unwrap();
        assert_eq!(a.values(), b.values());

        let c = perturb(&u, &PerturbationSpec::Noise { epsilon: 1e-2, seed: 8 }).unwrap();
        assert_ne!(a.values(), c.values());

        let diff_vals: Vec<f64> =
            a.values().iter().zip(u.values()).map(|(x, y)| x - y).collect();
        let diff = Field::new(&g, diff_vals).unwrap();
        assert!((h1_norm(&diff) - 1e-2).abs() <= 1e-12);

        let spectrum = diff.to_spectrum();
        let band = g.k_max() / 4.0;
        let outside = spectrum
            .coeffs()
            .iter()
            .zip(g.wavenumbers())
            .filter(|(_, &k)| k.abs() > band)
            .map(|(c, _)| c.norm())
            .fold(0.0f64, f64::max);
        let peak = spectrum.coeffs().iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        assert!(outside <= 1e-12 * peak);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let g = grid(256, 40.0);
        let u = sample_profile(&g);
        assert!(perturb(&u, &PerturbationSpec::Scale { epsilon: -0.1 }).is_err());
        assert!(
            perturb(&u, &PerturbationSpec::Bump { epsilon: 0.1, offset: 0.0, width: 0.0 })
                .is_err()
        );
        assert!(
            perturb(&u, &PerturbationSpec::Bump { epsilon: 0.1, offset: f64::NAN, width: 1.0 })
                .is_err()
        );
    }

    #[test]
    fn spec_json_round_trips_and_defaults_the_bump_width() {
        let spec: PerturbationSpec =
            serde_json::from_str(r#"{"kind":"bump","epsilon":0.01,"offset":2.5}"#).unwrap();
        assert_eq!(spec, PerturbationSpec::Bump { epsilon: 0.01, offset: 2.5, width: 1.0 });
        let text = serde_json::to_string(&spec).unwrap();
        let back: PerturbationSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        assert!(serde_json::from_str::<PerturbationSpec>(
            r#"{"kind":"scale","epsilon":0.1,"extra":1}"#
        )
        .is_err());
    }

    #[test]
    fn experiment_rows_track_excursions_from_the_orbit() {
        let model = NonlinearityModel::mkdv(1).unwrap().gauge_shifted().0;
        let g = grid(512, 60.0);
        let gs =
            minimize_energy_at_charge(&model, &g, 6.0, &MinimizerOptions::default()).unwrap();
        let specs = [
            PerturbationSpec::Scale { epsilon: 0.0 },
            PerturbationSpec::Scale { epsilon: 1e-3 },
            PerturbationSpec::Bump { epsilon: 1e-3, offset: 2.0, width: 1.0 },
        ];
        let report =
            stability_experiment(&gs, &model, &specs, 1.0, &StabilityOptions::default()).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert!(report.well_posedness_guaranteed);

        for row in &report.rows {
            let v = row.outcome.as_ref().expect("row evolved");
            assert!(v.max_distance >= v.initial_distance - 1e-12);
        }
        let unperturbed = report.rows[0].outcome.as_ref().unwrap();
        assert!(unperturbed.initial_distance <= 1e-12);
        assert!(unperturbed.max_distance <= 1e-6);
        assert!(unperturbed.passed);
    }

    #[test]
    fn experiment_requires_a_converged_state() {
        let model = NonlinearityModel::mkdv(1).unwrap().gauge_shifted().0;
        let g = grid(256, 40.0);
        let mut gs =
            minimize_energy_at_charge(&model, &g, 2.0, &MinimizerOptions::default()).unwrap();
        gs.converged = false;
        let specs = [PerturbationSpec::Scale { epsilon: 1e-3 }];
        assert!(matches!(
            stability_experiment(&gs, &model, &specs, 1.0, &StabilityOptions::default()),
            Err(Error::NotConverged { .. })
        ));
    }

    #[test]
    fn subadditivity_holds_strictly_for_the_cubic_family() {
        // Closed-form energies for the shifted cubic family give
        // 2 e(6) - e(12) = 19.464... - 16.8, so a unit margin is safe.
        let model = NonlinearityModel::mkdv(1).unwrap().gauge_shifted().0;
        let g = grid(1024, 80.0);
        let opts = MinimizerOptions::default();
        let report = subadditivity_check(&model, &g, 6.0, 6.0, 1.0, &opts).unwrap();
        assert!(report.strict);
        assert_eq!(report.energy_c1, report.energy_c2);
        assert!(report.energy_sum < report.energy_c1 + report.energy_c2 - 1.0);

        let swapped = subadditivity_check(&model, &g, 6.0, 6.0, 1.0, &opts).unwrap();
        assert_eq!(report.energy_sum, swapped.energy_sum);

        assert!(subadditivity_check(&model, &g, 0.0, 6.0, 1.0, &opts).is_err());
        assert!(subadditivity_check(&model, &g, 6.0, 6.0, -1.0, &opts).is_err());
    }

    #[test]
    fn hylomorphy_ratio_reports_energy_per_charge() {
        let base = NonlinearityModel::polynomial(&[0.25, -1.0]).unwrap();
        let g = grid(512, 60.0);
        let gs = minimize_energy_at_charge(&base, &g, 3.0, &MinimizerOptions::default()).unwrap();
        let ratio = hylomorphy_ratio(&gs).unwrap();
        assert!((ratio - gs.energy / 3.0).abs() <= 1e-15);

        // A quadratic gauge shift moves the ratio by exactly twice the
        // added coefficient: the energy gains beta * integral(u^2).
        let beta = 0.75;
        let shifted = base.shifted_by(beta);
        let shifted_energy = energy(&gs.profile, &shifted);
        assert!(((shifted_energy - gs.energy) / 3.0 - 2.0 * beta).abs() <= 1e-12);

        let mut unconverged = gs.clone();
        unconverged.converged = false;
        assert!(hylomorphy_ratio(&unconverged).is_err());
    }
}
