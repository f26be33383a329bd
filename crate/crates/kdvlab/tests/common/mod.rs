//! Oracles shared by the integration suites.
//!
//! Everything here is frozen test-side: profiles come from the sech solution
//! of the traveling-wave equation `phi'' = c_eff phi - alpha (k+2) phi^{k+1}`,
//! charges from plain Riemann sums of those formulas, and speeds from the
//! power laws those integrals imply. Library output never feeds an oracle.

#![allow(dead_code)]

use std::sync::Arc;

use kdvlab::model::NonlinearityModel;
use kdvlab::spectral::{Field, Grid};

pub fn grid(n: usize, length: f64) -> Arc<Grid> {
    Grid::new(n, length).unwrap()
}

/// Power-family model in the frame the minimizer needs (`W''(0) = 2`).
pub fn shifted_mkdv(k: u32) -> NonlinearityModel {
    NonlinearityModel::mkdv(k).unwrap().gauge_shifted().0
}

/// Solitary profile of the shifted power family at shifted speed `speed`:
/// `A sech^{2/k}(B (x - center))` with `A = (c_eff/(2 alpha))^{1/k}`,
/// `B = k sqrt(c_eff)/2`, `alpha = 1/((k+2)(k+1))` and `c_eff = speed + 2`.
pub fn sech_profile(k: u32, speed: f64, grid: &Arc<Grid>, center: f64) -> Field {
    let kf = k as f64;
    let alpha = 1.0 / ((kf + 2.0) * (kf + 1.0));
    let c_eff = speed + 2.0;
    assert!(c_eff > 0.0, "no decaying profile at shifted speed {speed}");
    let a = (c_eff / (2.0 * alpha)).powf(1.0 / kf);
    let b = kf * c_eff.sqrt() / 2.0;
    let length = grid.length();
    Field::from_fn(grid, move |x| {
        let mut d = (x - center).rem_euclid(length);
        if d > length / 2.0 {
            d -= length;
        }
        a * (1.0 / (b * d).cosh()).powf(2.0 / kf)
    })
    .unwrap()
}

/// The classic single soliton `(c/2) sech^2(sqrt(c) (x - center) / 2)` of
/// `u_t + u_xxx + 6 u u_x = 0` written for the potential `W = -s^3`.
pub fn kdv_soliton(c: f64, grid: &Arc<Grid>, center: f64) -> Field {
    let length = grid.length();
    Field::from_fn(grid, move |x| {
        let mut d = (x - center).rem_euclid(length);
        if d > length / 2.0 {
            d -= length;
        }
        let s = 1.0 / (c.sqrt() * d / 2.0).cosh();
        c / 2.0 * s * s
    })
    .unwrap()
}

/// Test-side charge quadrature `dx * sum(u^2) / 2`, independent of the
/// library's functionals.
pub fn quadrature_charge(u: &Field) -> f64 {
    u.grid().dx() * u.values().iter().map(|v| v * v).sum::<f64>() / 2.0
}

/// Charge of the k = 1 shifted-family wave as a function of its effective
/// speed `c = speed + 2`: the `3c sech^2` profile integrates to `12 c^{3/2}`.
pub fn cubic_charge_law(c_eff: f64) -> f64 {
    12.0 * c_eff.powf(1.5)
}

/// Periodically wrapped Gaussian `amplitude exp(-(x-center)^2 / (2 width^2))`.
pub fn gaussian(grid: &Arc<Grid>, amplitude: f64, width: f64, center: f64) -> Field {
    let length = grid.length();
    Field::from_fn(grid, move |x| {
        let mut d = (x - center).rem_euclid(length);
        if d > length / 2.0 {
            d -= length;
        }
        amplitude * (-d * d / (2.0 * width * width)).exp()
    })
    .unwrap()
}

/// Slope of the least-squares line through `(t, y)`; the measured-speed
/// estimator used when a test fits translation tracks itself.
pub fn fit_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let cov: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let var: f64 = t.iter().map(|a| (a - tm) * (a - tm)).sum();
    cov / var
}

/// Prints the per-criterion verdict line and fails the test with `detail`
/// when the criterion does not hold.
pub fn criterion(index: usize, name: &str, pass: bool, detail: &str) {
    println!("ACCEPTANCE {index} {name}: {}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "acceptance criterion {index} ({name}) failed: {detail}");
}
