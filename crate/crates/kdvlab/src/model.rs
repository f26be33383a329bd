//! Nonlinear potentials `W` and the structural conditions the rest of the
//! crate relies on.
//!
//! A model is `W(s) = W_family(s) + beta * s^2` where `beta` is an optional
//! quadratic gauge correction. Writing `W(s) = E0 * s^2 + N(s)` with
//! `E0 = W''(0)/2`, the non-quadratic part `N` is unchanged by the gauge
//! shift, which only re-labels the traveling-frame speed.

use serde::Serialize;

use crate::{Error, Result};

/// Built-in potential families.
///
/// - `Mkdv { k }`: `W(s) = -s^(k+2) / ((k+2)(k+1))`, integer `k >= 1`.
///   `k = 1` gives the classic modified-KdV cubic `-s^3/6`.
/// - `AbsPower { k }`: `W(s) = -|s|^(k+2)` for real `k > 0`, with the odd
///   continuation `W'(s) = -(k+2) |s|^k s`.
/// - `Polynomial { coeffs }`: `W(s) = sum_i coeffs[i] * s^(i+2)`, so the
///   constant and linear terms are structurally zero.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Mkdv { k: u32 },
    AbsPower { k: f64 },
    Polynomial { coeffs: Vec<f64> },
}

/// A potential together with its gauge bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearityModel {
    family: Family,
    /// Quadratic coefficient added by gauge shifts, zero for raw models.
    gauge_quadratic: f64,
    /// Frame speed introduced by gauge shifts: a profile traveling at speed
    /// `c` in this model's evolution travels at `c + shift_speed` in the
    /// unshifted model's evolution.
    shift_speed: f64,
}

impl NonlinearityModel {
    pub fn mkdv(k: u32) -> Result<NonlinearityModel> {
        if k < 1 {
            return Err(Error::domain("mkdv exponent k must be a positive integer"));
        }
        Ok(NonlinearityModel { family: Family::Mkdv { k }, gauge_quadratic: 0.0, shift_speed: 0.0 })
    }

    pub fn abs_power(k: f64) -> Result<NonlinearityModel> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::domain(format!("abs_power exponent must be positive, got {k}")));
        }
        Ok(NonlinearityModel {
            family: Family::AbsPower { k },
            gauge_quadratic: 0.0,
            shift_speed: 0.0,
        })
    }

    pub fn polynomial(coeffs: &[f64]) -> Result<NonlinearityModel> {
        if coeffs.is_empty() {
            return Err(Error::domain("polynomial model needs at least the s^2 coefficient"));
        }
        if !coeffs.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite("polynomial coefficients"));
        }
        Ok(NonlinearityModel {
            family: Family::Polynomial { coeffs: coeffs.to_vec() },
            gauge_quadratic: 0.0,
            shift_speed: 0.0,
        })
    }

    /// `W(s) = -s^3`, the quadratic-flux KdV potential
    /// (`u_t + u_xxx + 6 u u_x = 0`).
    pub fn kdv() -> NonlinearityModel {
        NonlinearityModel::polynomial(&[0.0, -1.0]).expect("static coefficients")
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn shift_speed(&self) -> f64 {
        self.shift_speed
    }

    fn family_quadratic(&self) -> f64 {
        match &self.family {
            Family::Mkdv { .. } | Family::AbsPower { .. } => 0.0,
            Family::Polynomial { coeffs } => coeffs[0],
        }
    }

    /// Coefficient `E0` in `W(s) = E0 s^2 + N(s)`, gauge term included.
    pub fn e0(&self) -> f64 {
        self.family_quadratic() + self.gauge_quadratic
    }

    fn check_arg(s: f64) -> Result<()> {
        if s.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite("potential argument"))
        }
    }

    pub fn w(&self, s: f64) -> Result<f64> {
        Self::check_arg(s)?;
        Ok(self.w_raw(s))
    }

    pub fn w_prime(&self, s: f64) -> Result<f64> {
        Self::check_arg(s)?;
        Ok(self.w_prime_raw(s))
    }

    pub fn w_second(&self, s: f64) -> Result<f64> {
        Self::check_arg(s)?;
        Ok(self.w_second_raw(s))
    }

    pub(crate) fn w_raw(&self, s: f64) -> f64 {
        let base = match &self.family {
            Family::Mkdv { k } => {
                let k = *k;
                -s.powi(k as i32 + 2) / ((k + 2) as f64 * (k + 1) as f64)
            }
            Family::AbsPower { k } => -s.abs().powf(k + 2.0),
            Family::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for &a in coeffs.iter().rev() {
                    acc = acc * s + a;
                }
                acc * s * s
            }
        };
        base + self.gauge_quadratic * s * s
    }

    pub(crate) fn w_prime_raw(&self, s: f64) -> f64 {
        let base = match &self.family {
            Family::Mkdv { k } => {
                let k = *k;
                -s.powi(k as i32 + 1) / (k + 1) as f64
            }
            Family::AbsPower { k } => -(k + 2.0) * s.abs().powf(*k) * s,
            Family::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for (i, &a) in coeffs.iter().enumerate().rev() {
                    acc = acc * s + a * (i + 2) as f64;
                }
                acc * s
            }
        };
        base + 2.0 * self.gauge_quadratic * s
    }

    pub(crate) fn w_second_raw(&self, s: f64) -> f64 {
        let base = match &self.family {
            Family::Mkdv { k } => -s.powi(*k as i32),
            Family::AbsPower { k } => -(k + 2.0) * (k + 1.0) * s.abs().powf(*k),
            Family::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for (i, &a) in coeffs.iter().enumerate().rev() {
                    acc = acc * s + a * ((i + 2) * (i + 1)) as f64;
                }
                acc
            }
        };
        base + 2.0 * self.gauge_quadratic
    }

    /// Non-quadratic part `N(s) = W(s) - E0 s^2`; invariant under the gauge
    /// shift.
    pub fn n_part(&self, s: f64) -> Result<f64> {
        Ok(self.w(s)? - self.e0() * s * s)
    }

    fn n_prime_raw(&self, s: f64) -> f64 {
        self.w_prime_raw(s) - 2.0 * self.e0() * s
    }

    /// When `W''(0) <= 0`, returns a model with an added quadratic chosen so
    /// the new `E0` is exactly 1 (`W''(0) = 2`), plus the frame speed the
    /// addition introduces. Models that already have `W''(0) > 0` are
    /// returned unchanged with speed 0, so the operation is idempotent.
    pub fn gauge_shifted(&self) -> (NonlinearityModel, f64) {
        let e0 = self.e0();
        if 2.0 * e0 > 0.0 {
            return (self.clone(), 0.0);
        }
        let added = 1.0 - e0;
        let (shifted, speed) = (self.shifted_by(added), 2.0 * added);
        (shifted, speed)
    }

    /// Applies an explicit quadratic gauge shift `W += beta s^2`, recording
    /// the frame speed `2 beta` it introduces. Prefer [`gauge_shifted`],
    /// which picks `beta` automatically; this exists to study frame
    /// equivalence with a caller-chosen shift.
    ///
    /// [`gauge_shifted`]: NonlinearityModel::gauge_shifted
    pub fn shifted_by(&self, beta: f64) -> NonlinearityModel {
        let mut shifted = self.clone();
        shifted.gauge_quadratic += beta;
        shifted.shift_speed += 2.0 * beta;
        shifted
    }

    /// Whether `W(-s) = W(s)`, i.e. the potential factors through `|s|`.
    pub fn is_even(&self) -> bool {
        match &self.family {
            Family::Mkdv { k } => k % 2 == 0,
            Family::AbsPower { .. } => true,
            Family::Polynomial { coeffs } => {
                coeffs.iter().enumerate().all(|(i, &a)| i % 2 == 0 || a == 0.0)
            }
        }
    }

    /// If the non-quadratic part is a single negative power
    /// `N(s) = -alpha * s^(k+2)` (or `-alpha |s|^(k+2)`), returns
    /// `(alpha, k)`. These are the families with closed-form solitary waves.
    pub fn pure_power(&self) -> Option<(f64, f64)> {
        match &self.family {
            Family::Mkdv { k } => {
                let kf = *k as f64;
                Some((1.0 / ((kf + 2.0) * (kf + 1.0)), kf))
            }
            Family::AbsPower { k } => Some((1.0, *k)),
            Family::Polynomial { coeffs } => {
                let mut found = None;
                for (i, &a) in coeffs.iter().enumerate().skip(1) {
                    if a != 0.0 {
                        if found.is_some() {
                            return None;
                        }
                        found = Some((i, a));
                    }
                }
                match found {
                    Some((i, a)) if a < 0.0 => Some((-a, i as f64)),
                    _ => None,
                }
            }
        }
    }

    /// Whether `limsup_{s -> +-inf} -W''(s)/s^4 <= 0`, the dispersive
    /// well-posedness condition. Decided from the leading behavior of each
    /// family.
    pub fn base_holds(&self) -> bool {
        match &self.family {
            Family::Mkdv { k } => (*k as f64) < 4.0,
            Family::AbsPower { k } => *k < 4.0,
            Family::Polynomial { coeffs } => {
                let top = match coeffs.iter().rposition(|&a| a != 0.0) {
                    None => return true,
                    Some(t) => t,
                };
                let degree = top + 2;
                let lead = coeffs[top];
                if degree < 6 {
                    true
                } else if degree == 6 {
                    lead >= 0.0
                } else if degree % 2 == 0 {
                    lead > 0.0
                } else {
                    false
                }
            }
        }
    }

    /// Runs the six structural checks over `range` and reports witnesses.
    pub fn check_assumptions(&self, range: Interval, samples: usize) -> Result<AssumptionReport> {
        range.validate()?;
        if !(range.min < 0.0 && range.max > 0.0) {
            return Err(Error::domain("assumption sample range must span both signs"));
        }
        if samples < 100 {
            return Err(Error::domain(format!("need at least 100 samples, got {samples}")));
        }
        let checks = vec![
            self.check_wa(),
            self.check_wb(),
            self.check_w1(range, samples),
            self.check_wp(range, samples),
            self.check_w0(range, samples),
            self.check_base(range),
        ];
        Ok(AssumptionReport { range_min: range.min, range_max: range.max, samples, checks })
    }

    fn check_wa(&self) -> AssumptionCheck {
        let w0 = self.w_raw(0.0);
        let wp0 = self.w_prime_raw(0.0);
        AssumptionCheck {
            name: AssumptionName::Wa,
            passed: w0 == 0.0 && wp0 == 0.0,
            witness: vec![w0, wp0],
            note: None,
        }
    }

    fn check_wb(&self) -> AssumptionCheck {
        let w2 = self.w_second_raw(0.0);
        AssumptionCheck {
            name: AssumptionName::Wb,
            passed: w2 > 0.0,
            witness: vec![w2],
            note: None,
        }
    }

    fn check_w1(&self, range: Interval, samples: usize) -> AssumptionCheck {
        let count = samples.max(10_000);
        let hi = range.max;
        let lo = hi * 1e-12;
        let ratio = (hi / lo).ln() / (count - 1) as f64;
        let e0 = self.e0();
        let mut best_s = lo;
        let mut best_n = f64::INFINITY;
        for i in 0..count {
            let s = lo * (ratio * i as f64).exp();
            let n = self.w_raw(s) - e0 * s * s;
            if n < best_n {
                best_n = n;
                best_s = s;
            }
            if n < 0.0 {
                return AssumptionCheck {
                    name: AssumptionName::W1,
                    passed: true,
                    witness: vec![s, n],
                    note: None,
                };
            }
        }
        AssumptionCheck {
            name: AssumptionName::W1,
            passed: false,
            witness: vec![best_s, best_n],
            note: Some("no positive s with negative non-quadratic part found".into()),
        }
    }

    fn check_wp(&self, range: Interval, samples: usize) -> AssumptionCheck {
        match &self.family {
            Family::Mkdv { .. } | Family::AbsPower { .. } => {
                let (alpha, k) = self.pure_power().expect("single-power families");
                let q = k + 2.0;
                let c = alpha * q;
                AssumptionCheck {
                    name: AssumptionName::Wp,
                    passed: q > 2.0,
                    witness: vec![q, q, c, c],
                    note: None,
                }
            }
            Family::Polynomial { coeffs } => {
                if coeffs.iter().skip(1).all(|&a| a == 0.0) {
                    return AssumptionCheck {
                        name: AssumptionName::Wp,
                        passed: true,
                        witness: vec![3.0, 3.0, 0.0, 0.0],
                        note: Some("non-quadratic part vanishes; bound holds trivially".into()),
                    };
                }
                let abs_np = |s: f64| self.n_prime_raw(s).abs().max(self.n_prime_raw(-s).abs());
                let half = (samples / 2).max(50);
                let near = log_spaced(1e-4, 1e-2, half);
                let far = log_spaced(range.max / 100.0, range.max, half);
                let r_hat = fit_log_slope(&near, abs_np) + 1.0;
                let q_hat = fit_log_slope(&far, abs_np) + 1.0;
                let c1 = near
                    .iter()
                    .map(|&s| abs_np(s) / s.powf(r_hat - 1.0))
                    .fold(0.0f64, f64::max);
                let c2 =
                    far.iter().map(|&s| abs_np(s) / s.powf(q_hat - 1.0)).fold(0.0f64, f64::max);
                AssumptionCheck {
                    name: AssumptionName::Wp,
                    passed: r_hat > 2.0 && q_hat > 2.0,
                    witness: vec![q_hat, r_hat, c1, c2],
                    note: None,
                }
            }
        }
    }

    fn check_w0(&self, range: Interval, samples: usize) -> AssumptionCheck {
        let (p, c, note): (f64, f64, Option<String>) = match &self.family {
            Family::Mkdv { k } => {
                let kf = *k as f64;
                (kf + 2.0, 1.0 / ((kf + 2.0) * (kf + 1.0)), None)
            }
            Family::AbsPower { k } => (k + 2.0, 1.0, None),
            Family::Polynomial { .. } => {
                // Estimate the growth of the negative part from samples.
                let e0 = self.e0();
                let neg_part = |s: f64| {
                    let n = self.w_raw(s) - e0 * s * s;
                    (-n).max(0.0)
                };
                let half = (samples / 2).max(50);
                let far = log_spaced(range.max / 100.0, range.max, half);
                let worst = |s: f64| neg_part(s).max(neg_part(-s));
                if far.iter().all(|&s| worst(s) == 0.0) {
                    (3.0, 0.0, Some("non-quadratic part is nonnegative at large |s|".into()))
                } else {
                    let p_hat = fit_log_slope(&far, worst);
                    let c_hat =
                        far.iter().map(|&s| worst(s) / s.powf(p_hat)).fold(0.0f64, f64::max);
                    (p_hat, c_hat, None)
                }
            }
        };
        let note = note.or(if p >= 6.0 {
            Some(format!(
                "negative-part growth exponent p = {p:.3} is >= 6; not enforced as a failure"
            ))
        } else {
            None
        });
        AssumptionCheck { name: AssumptionName::W0, passed: true, witness: vec![p, c], note }
    }

    fn check_base(&self, range: Interval) -> AssumptionCheck {
        let passed = self.base_holds();
        let ratio = |s: f64| -self.w_second_raw(s) / s.powi(4);
        let v_lo = ratio(range.min);
        let v_hi = ratio(range.max);
        // Witness the violating side if any, else the larger sampled value.
        let (s, v) = if v_hi >= v_lo { (range.max, v_hi) } else { (range.min, v_lo) };
        AssumptionCheck {
            name: AssumptionName::Base,
            passed,
            witness: vec![s, v],
            note: if passed {
                None
            } else {
                Some("second derivative outgrows s^4; dispersive control fails".into())
            },
        }
    }
}

/// Closed real interval used for assumption sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub fn new(min: f64, max: f64) -> Interval {
        Interval { min, max }
    }

    fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::NonFinite("sample range"));
        }
        if self.min >= self.max {
            return Err(Error::domain(format!(
                "empty sample range [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

impl Default for Interval {
    fn default() -> Self {
        Interval { min: -1e6, max: 1e6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AssumptionName {
    Wa,
    Wb,
    W1,
    Wp,
    W0,
    Base,
}

pub const ASSUMPTION_ORDER: [AssumptionName; 6] = [
    AssumptionName::Wa,
    AssumptionName::Wb,
    AssumptionName::W1,
    AssumptionName::Wp,
    AssumptionName::W0,
    AssumptionName::Base,
];

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionCheck {
    pub name: AssumptionName,
    pub passed: bool,
    /// Numeric evidence: the probe points and values behind the verdict.
    pub witness: Vec<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub range_min: f64,
    pub range_max: f64,
    pub samples: usize,
    /// Always the six named checks, in [`ASSUMPTION_ORDER`] order.
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: AssumptionName) -> &AssumptionCheck {
        self.checks
            .iter()
            .find(|c| c.name == name)
            .expect("report always carries the six named checks")
    }
}

fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    let step = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| lo * (step * i as f64).exp()).collect()
}

/// Least-squares slope of `log10 f(s)` against `log10 s`; zero-valued
/// samples are skipped.
fn fit_log_slope(points: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &s in points {
        let v = f(s);
        if v > 0.0 {
            xs.push(s.log10());
            ys.push(v.log10());
        }
    }
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}
