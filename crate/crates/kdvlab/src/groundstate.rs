//! Constrained energy minimization: solitary-wave profiles as minimizers of
//! `E(u) = integral(u_x^2/2 + W(u))` on spheres of fixed charge (or fixed
//! mass, in the Schrodinger mode).
//!
//! The descent is a Sobolev-preconditioned projected gradient method: the
//! L2 gradient `-u_xx + W'(u)` is projected onto the tangent space of the
//! constraint sphere, smoothed by `(I - dxx)^{-1}` (diagonal in transform
//! space), re-projected, and followed with an Armijo backtracking line
//! search; the iterate is rescaled onto the sphere after every step. This
//! ordering makes the search direction provably of descent type, so the
//! recorded energy history is non-increasing.

use std::sync::Arc;

use rayon::prelude::*;

use crate::functionals::{charge, energy, l2_inner, l2_norm};
use crate::model::NonlinearityModel;
use crate::spectral::{Field, Grid};
use crate::{Error, Result};

/// Which evolution problem the minimizer profile is a ground state for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dispersive flow; the constraint is the charge `integral(u^2)/2` and
    /// the profile travels at speed `-multiplier`.
    Gkdv,
    /// Schrodinger flow; the constraint is the mass `integral(u^2)` and the
    /// profile is a standing wave with frequency `multiplier`.
    Nls,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Gkdv => "gkdv",
            Mode::Nls => "nls",
        }
    }
}

/// Tuning for the constrained descent.
#[derive(Debug, Clone)]
pub struct MinimizerOptions {
    /// Convergence threshold on the L2 norm of the projected gradient.
    pub tol: f64,
    pub max_iterations: usize,
    /// Initial line-search step.
    pub sigma0: f64,
    /// Armijo sufficient-decrease factor.
    pub armijo: f64,
    /// Energy below this aborts with a supercritical-collapse error: the
    /// functional is unbounded below on the sphere and no minimizer exists.
    pub energy_floor: f64,
}

impl Default for MinimizerOptions {
    fn default() -> Self {
        MinimizerOptions {
            tol: 1e-10,
            max_iterations: 100_000,
            sigma0: 1.0,
            armijo: 1e-4,
            energy_floor: -1e8,
        }
    }
}

impl MinimizerOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::domain("tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::domain("iteration cap must be at least 1"));
        }
        if !(self.sigma0.is_finite() && self.sigma0 > 0.0) {
            return Err(Error::domain("initial step must be positive"));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(Error::domain("Armijo factor must lie in (0, 1)"));
        }
        if !self.energy_floor.is_finite() {
            return Err(Error::domain("energy floor must be finite"));
        }
        Ok(())
    }
}

/// A converged (or best-effort) constrained minimizer.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub mode: Mode,
    /// Profile recentered so its peak sits at mid-domain, positive there
    /// when the potential is even.
    pub profile: Field,
    /// The model the minimization ran under (including any gauge shift).
    pub model: NonlinearityModel,
    /// The constraint value: charge in dispersive mode, mass in Schrodinger
    /// mode.
    pub charge_target: f64,
    pub energy: f64,
    /// Lagrange multiplier of the constraint at the minimizer.
    pub multiplier: f64,
    /// Traveling speed in this model's frame (dispersive mode, equals
    /// `-multiplier`) or standing-wave frequency (Schrodinger mode, equals
    /// `multiplier`).
    pub speed: f64,
    /// Dispersive mode: L2 norm of the projected gradient. Schrodinger
    /// mode: L2 norm of the stationary-equation defect
    /// `-u_xx/2 + W'(u)/2 - omega u`.
    pub residual: f64,
    /// Accepted descent steps.
    pub iterations: usize,
    pub converged: bool,
    /// Energy after each accepted step, starting from the initial guess.
    pub energy_history: Vec<f64>,
}

/// Minimizes the energy at fixed charge and extracts the traveling speed.
///
/// Requires `W''(0) > 0`; apply a gauge shift first for models where the
/// quadratic part vanishes or is negative. Hitting the iteration cap is not
/// an error: the best iterate is returned with `converged` false.
pub fn minimize_energy_at_charge(
    model: &NonlinearityModel,
    grid: &Arc<Grid>,
    charge_target: f64,
    opts: &MinimizerOptions,
) -> Result<GroundState> {
    if !(charge_target.is_finite() && charge_target > 0.0) {
        return Err(Error::domain(format!(
            "charge target must be positive, got {charge_target}"
        )));
    }
    build_ground_state(model, grid, Mode::Gkdv, charge_target, opts)
}

/// Minimizes the energy at fixed mass `integral(u^2)` for the Schrodinger
/// flow and extracts the standing-wave frequency.
///
/// The potential must be even so that `W` is a function of `|psi|` and the
/// real positive representative of the phase orbit is a ground state.
pub fn nls_ground_state(
    model: &NonlinearityModel,
    grid: &Arc<Grid>,
    mass_target: f64,
    opts: &MinimizerOptions,
) -> Result<GroundState> {
    if !(mass_target.is_finite() && mass_target > 0.0) {
        return Err(Error::domain(format!(
            "mass target must be positive, got {mass_target}"
        )));
    }
    if !model.is_even() {
        return Err(Error::domain(
            "Schrodinger mode needs an even potential so W is a function of |psi|".to_string(),
        ));
    }
    build_ground_state(model, grid, Mode::Nls, mass_target, opts)
}

fn build_ground_state(
    model: &NonlinearityModel,
    grid: &Arc<Grid>,
    mode: Mode,
    target: f64,
    opts: &MinimizerOptions,
) -> Result<GroundState> {
    opts.validate()?;
    if model.e0() <= 0.0 {
        return Err(Error::domain(
            "minimization needs W''(0) > 0; gauge-shift the model first".to_string(),
        ));
    }

    // Both constraints are spheres of the same L2 functional; run the core
    // in charge units (half the mass).
    let charge_units = match mode {
        Mode::Gkdv => target,
        Mode::Nls => target / 2.0,
    };
    let core = descend(model, grid, charge_units, opts)?;
    let profile = normalize_profile(&core.profile, model, charge_units);

    // Multiplier of the mode's own constraint functional, from the Lagrange
    // identity E'(u) = lambda V'(u) paired with u.
    let r = raw_gradient(&profile, model)?;
    let uu = l2_inner(&profile, &profile);
    let lambda_charge = l2_inner(&r, &profile) / uu;
    let pg_norm = {
        let vals: Vec<f64> = r
            .values()
            .iter()
            .zip(profile.values())
            .map(|(ri, ui)| ri - lambda_charge * ui)
            .collect();
        l2_norm(&Field::from_vec_unchecked(grid.clone(), vals))
    };
    let converged = pg_norm <= opts.tol;

    let (multiplier, speed, residual) = match mode {
        Mode::Gkdv => (lambda_charge, -lambda_charge, pg_norm),
        // Mass has V' = 2u, so omega is half the charge multiplier, and the
        // stationary defect -u_xx/2 + W'(u)/2 - omega u is half the
        // projected gradient.
        Mode::Nls => (lambda_charge / 2.0, lambda_charge / 2.0, pg_norm / 2.0),
    };

    Ok(GroundState {
        mode,
        profile,
        model: model.clone(),
        charge_target: target,
        energy: core.energy,
        multiplier,
        speed,
        residual,
        iterations: core.iterations,
        converged,
        energy_history: core.energy_history,
    })
}

struct DescentOutcome {
    profile: Field,
    energy: f64,
    iterations: usize,
    energy_history: Vec<f64>,
}

fn descend(
    model: &NonlinearityModel,
    grid: &Arc<Grid>,
    charge_target: f64,
    opts: &MinimizerOptions,
) -> Result<DescentOutcome> {
    let length = grid.length();
    let seed = Field::from_fn(grid, |x| (-(x - length / 2.0).powi(2) / 4.0).exp())
        .expect("Gaussian seed is finite");
    let mut u = rescale_to_charge(&seed, charge_target)
        .ok_or_else(|| Error::domain("initial guess has no charge to rescale"))?;

    let mut e_old = energy(&u, model);
    let mut history = vec![e_old];
    let mut iterations = 0;
    // Near the minimizer the energy flatlines at rounding level and a
    // sufficient-decrease test can no longer certify progress; from that
    // point the merit switches to the residual norm itself.
    let mut polishing = false;

    for it in 1..=opts.max_iterations {
        let r = raw_gradient(&u, model)?;
        let uu = l2_inner(&u, &u);
        let lambda = l2_inner(&r, &u) / uu;
        let pg = combine(&r, u.values(), -lambda);
        let pg_norm = l2_norm(&pg);
        if pg_norm < opts.tol {
            break;
        }

        // Smooth the tangential gradient, then re-project: the direction
        // stays tangent and its pairing with the gradient is the positive
        // quantity <pg, (I - dxx)^{-1} pg>.
        let smoothed = precondition(&pg);
        let along = l2_inner(&smoothed, &u) / uu;
        let dir = combine(&smoothed, u.values(), -along);
        let slope = l2_inner(&r, &dir);
        if slope.is_nan() || slope <= 0.0 {
            // Rounding has exhausted the descent direction.
            break;
        }

        // Trial step from the quadratic model along the direction: the
        // constrained second derivative is <d, (-dxx + W''(u) - lambda) d>.
        let sigma_model = {
            let dxx = dir.derivative(2).expect("second derivative is a valid order");
            let hd: Vec<f64> = dir
                .values()
                .iter()
                .zip(dxx.values())
                .zip(u.values())
                .map(|((&di, &ddi), &ui)| {
                    (model.w_second_raw(ui) - lambda) * di - ddi
                })
                .collect();
            let curvature = l2_inner(&dir, &Field::from_vec_unchecked(grid.clone(), hd));
            if curvature > 0.0 { slope / curvature } else { opts.sigma0 }
        };

        // Once the best certifiable decrease drops below what f64 can
        // represent against the energy, the sufficient-decrease test is
        // vacuous (it would accept rounding noise forever); hand over to
        // the residual-guarded polish.
        if opts.armijo * sigma_model * slope <= 8.0 * f64::EPSILON * e_old.abs() {
            polishing = true;
        }

        let mut accepted = None;
        if !polishing {
            let mut sigma = sigma_model;
            for _ in 0..60 {
                if let Some(w) = step_to(&u, &dir, sigma, charge_target) {
                    let e_new = energy(&w, model);
                    if e_new.is_finite() {
                        if e_new < opts.energy_floor {
                            return Err(Error::SupercriticalCollapse {
                                energy: e_new,
                                iteration: it,
                            });
                        }
                        if e_new <= e_old - opts.armijo * sigma * slope {
                            accepted = Some((w, e_new));
                            break;
                        }
                    }
                }
                sigma /= 2.0;
            }
            if accepted.is_none() {
                polishing = true;
            }
        }
        if polishing {
            let mut sigma = sigma_model;
            for _ in 0..20 {
                if let Some(w) = step_to(&u, &dir, sigma, charge_target) {
                    let r_w = raw_gradient(&w, model)?;
                    let lam_w = l2_inner(&r_w, &w) / l2_inner(&w, &w);
                    let pg_w = l2_norm(&combine(&r_w, w.values(), -lam_w));
                    if pg_w < pg_norm {
                        accepted = Some((w, e_old));
                        break;
                    }
                }
                sigma /= 2.0;
            }
        }

        match accepted {
            Some((w, e_new)) => {
                u = w;
                if !polishing {
                    e_old = e_new;
                    history.push(e_new);
                }
                iterations = it;
            }
            // No representable step makes progress in either merit.
            None => break,
        }
    }

    let final_energy = energy(&u, model);
    Ok(DescentOutcome { profile: u, energy: final_energy, iterations, energy_history: history })
}

/// `base + factor * other`, pointwise.
fn combine(base: &Field, other: &[f64], factor: f64) -> Field {
    let vals: Vec<f64> = base
        .values()
        .iter()
        .zip(other)
        .map(|(x, y)| x + factor * y)
        .collect();
    Field::from_vec_unchecked(base.grid().clone(), vals)
}

/// One rescaled trial iterate `rescale(u - sigma * dir)`.
fn step_to(u: &Field, dir: &Field, sigma: f64, charge_target: f64) -> Option<Field> {
    let vals: Vec<f64> = u
        .values()
        .iter()
        .zip(dir.values())
        .map(|(ui, di)| ui - sigma * di)
        .collect();
    rescale_to_charge(&Field::from_vec_unchecked(u.grid().clone(), vals), charge_target)
}

/// `-u_xx + W'(u)`, the L2 gradient of the energy.
fn raw_gradient(u: &Field, model: &NonlinearityModel) -> Result<Field> {
    let uxx = u.derivative(2).expect("second derivative is a valid order");
    let vals: Vec<f64> = u
        .values()
        .iter()
        .zip(uxx.values())
        .map(|(&ui, &di)| model.w_prime_raw(ui) - di)
        .collect();
    if !vals.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("energy gradient"));
    }
    Ok(Field::from_vec_unchecked(u.grid().clone(), vals))
}

/// `(I - dxx)^{-1}`, diagonal in transform space.
fn precondition(u: &Field) -> Field {
    let mut spectrum = u.to_spectrum();
    spectrum.scale_by(|k| 1.0 / (1.0 + k * k));
    spectrum.to_field()
}

fn rescale_to_charge(u: &Field, target: f64) -> Option<Field> {
    let c = charge(u);
    if !(c.is_finite() && c > 0.0) {
        return None;
    }
    let scale = (target / c).sqrt();
    let vals: Vec<f64> = u.values().iter().map(|v| v * scale).collect();
    if !vals.iter().all(|v| v.is_finite()) {
        return None;
    }
    Some(Field::from_vec_unchecked(u.grid().clone(), vals))
}

/// Recenters the peak at mid-domain (sub-grid accurate), fixes the sign for
/// even potentials, and re-pins the constraint.
fn normalize_profile(u: &Field, model: &NonlinearityModel, charge_units: f64) -> Field {
    let grid = u.grid();
    let n = u.len();
    let vals = u.values();
    let peak = (0..n)
        .max_by(|&a, &b| {
            vals[a].abs().partial_cmp(&vals[b].abs()).expect("finite values")
        })
        .expect("fields are nonempty");

    // Parabolic sub-grid refinement of the |u| maximum.
    let ym = vals[(peak + n - 1) % n].abs();
    let y0 = vals[peak].abs();
    let yp = vals[(peak + 1) % n].abs();
    let denom = ym - 2.0 * y0 + yp;
    let offset = if denom.abs() > 0.0 { 0.5 * (ym - yp) / denom } else { 0.0 };
    let x_peak = grid.x(peak) + offset.clamp(-0.5, 0.5) * grid.dx();

    let mut out = u.translate(x_peak - grid.length() / 2.0);
    if model.is_even() && out.values()[n / 2] < 0.0 {
        let flipped: Vec<f64> = out.values().iter().map(|v| -v).collect();
        out = Field::from_vec_unchecked(grid.clone(), flipped);
    }
    rescale_to_charge(&out, charge_units).unwrap_or(out)
}

/// One row of a charge sweep.
#[derive(Debug, Clone)]
pub struct CurveRow {
    pub charge: f64,
    /// Minimizer outcome, or the error message for a failed row.
    pub outcome: std::result::Result<CurveValues, String>,
}

#[derive(Debug, Clone, Copy)]
pub struct CurveValues {
    /// Speed in the minimization model's frame.
    pub speed: f64,
    pub energy: f64,
    pub residual: f64,
    pub converged: bool,
}

/// Runs one minimization per charge; rows keep input order and failures are
/// recorded per-row rather than aborting the sweep. Sweep entries run as
/// independent parallel jobs.
pub fn speed_charge_curve(
    model: &NonlinearityModel,
    grid: &Arc<Grid>,
    charges: &[f64],
    opts: &MinimizerOptions,
) -> Result<Vec<CurveRow>> {
    if charges.is_empty() {
        return Err(Error::domain("charge sweep needs at least one charge"));
    }
    if !charges.windows(2).all(|w| w[0] < w[1]) || charges[0] <= 0.0 {
        return Err(Error::domain(
            "charges must be strictly increasing and positive".to_string(),
        ));
    }
    Ok(charges
        .par_iter()
        .map(|&c| {
            let outcome = minimize_energy_at_charge(model, grid, c, opts)
                .map(|gs| CurveValues {
                    speed: gs.speed,
                    energy: gs.energy,
                    residual: gs.residual,
                    converged: gs.converged,
                })
                .map_err(|e| e.to_string());
            CurveRow { charge: c, outcome }
        })
        .collect())
}

/// Residual of the standing wave `u(x) e^{-i omega t}` in the Schrodinger
/// flow at `t = 0`: the L2 norm of `omega u - (-u_xx/2 + W'(u)/2)`.
///
/// Identical to the stationary-equation defect already reported in
/// `residual`, recomputed here through the time-derivative route.
pub fn nls_standing_wave_residual(gs: &GroundState) -> Result<f64> {
    if gs.mode != Mode::Nls {
        return Err(Error::domain("standing-wave residual needs a Schrodinger-mode state"));
    }
    let u = &gs.profile;
    let uxx = u.derivative(2).expect("second derivative is a valid order");
    let omega = gs.speed;
    let vals: Vec<f64> = u
        .values()
        .iter()
        .zip(uxx.values())
        .map(|(&ui, &di)| omega * ui - (-0.5 * di + 0.5 * gs.model.w_prime_raw(ui)))
        .collect();
    Ok(l2_norm(&Field::from_vec_unchecked(u.grid().clone(), vals)))
}

/// Closed-form solitary wave `A sech^{2/k}(B (x - center))` traveling at
/// `speed` in this model's frame, for single-power potentials.
///
/// Solves the profile equation `phi'' = c_eff phi - alpha (k+2) phi^{k+1}`
/// with `c_eff = speed + W''(0)`, which requires `c_eff > 0` for decay.
pub fn solitary_wave(
    model: &NonlinearityModel,
    grid: &Arc<Grid>,
    speed: f64,
    center: f64,
) -> Result<Field> {
    if !speed.is_finite() || !center.is_finite() {
        return Err(Error::domain("speed and center must be finite"));
    }
    let (alpha, k) = model.pure_power().ok_or_else(|| {
        Error::domain("closed-form solitary waves exist only for single-power potentials")
    })?;
    let c_eff = speed + 2.0 * model.e0();
    if c_eff <= 0.0 {
        return Err(Error::domain(format!(
            "no decaying profile: speed + W''(0) = {c_eff} must be positive"
        )));
    }
    let amplitude = (c_eff / (2.0 * alpha)).powf(1.0 / k);
    let width = k * c_eff.sqrt() / 2.0;
    let g = grid.clone();
    Field::from_fn(grid, move |x| {
        let d = g.wrap_displacement(x - center);
        amplitude * (1.0 / (width * d).cosh()).powf(2.0 / k)
    })
}
