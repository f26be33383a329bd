//! Randomized invariants of the public API: symmetry, scaling and
//! bookkeeping identities that must hold for every input, not just the
//! hand-picked ones in the unit tests.

mod common;

use common::grid;
use kdvlab::functionals::{charge, energy, h1_distance, h1_norm, orbital_distance};
use kdvlab::model::NonlinearityModel;
use kdvlab::spectral::Field;
use kdvlab::stability::{perturb, PerturbationSpec};
use proptest::prelude::*;
use std::f64::consts::PI;

const N: usize = 128;
const L: f64 = 20.0;

/// Smooth band-limited field from a handful of Fourier modes; every spectral
/// identity tested here is exact for such inputs up to rounding.
fn mode_field(amps: &[f64], phases: &[f64]) -> Field {
    let g = grid(N, L);
    let (amps, phases) = (amps.to_vec(), phases.to_vec());
    Field::from_fn(&g, move |x| {
        amps.iter()
            .zip(&phases)
            .enumerate()
            .map(|(m, (a, p))| a * (2.0 * PI * (m + 1) as f64 * x / L + p).sin())
            .sum()
    })
    .unwrap()
}

fn amps() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 1..5)
}

fn phases() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..(2.0 * PI), 5)
}

fn any_builtin_model() -> impl Strategy<Value = NonlinearityModel> {
    prop_oneof![
        (1u32..=3).prop_map(|k| NonlinearityModel::mkdv(k).unwrap()),
        (0.5..3.5f64).prop_map(|k| NonlinearityModel::abs_power(k).unwrap()),
        prop::collection::vec(-1.0..1.0f64, 1..4)
            .prop_filter("nonzero leading coefficient", |c| {
                c.last().map(|v| v.abs() > 1e-3).unwrap_or(false)
            })
            .prop_map(|c| NonlinearityModel::polynomial(&c).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn translation_round_trips_and_preserves_invariants(
        a in amps(), p in phases(), tau in -30.0..30.0f64
    ) {
        let u = mode_field(&a, &p);
        let shifted = u.translate(tau);
        let back = shifted.translate(-tau);
        let scale = h1_norm(&u).max(1.0);

        prop_assert!(h1_distance(&back, &u).unwrap() <= 1e-11 * scale);
        prop_assert!((charge(&shifted) - charge(&u)).abs() <= 1e-11 * scale * scale);

        let model = NonlinearityModel::mkdv(2).unwrap().gauge_shifted().0;
        let de = (energy(&shifted, &model) - energy(&u, &model)).abs();
        prop_assert!(de <= 1e-10 * (1.0 + energy(&u, &model).abs()));
    }

    #[test]
    fn charge_scales_quadratically(a in amps(), p in phases(), factor in 0.1..3.0f64) {
        let u = mode_field(&a, &p);
        let g = u.grid().clone();
        let scaled =
            Field::new(&g, u.values().iter().map(|v| factor * v).collect()).unwrap();
        let expected = factor * factor * charge(&u);
        prop_assert!((charge(&scaled) - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
    }

    #[test]
    fn orbital_distance_is_a_translation_quotient(
        a in amps(), p in phases(), b in amps(), q in phases(), tau in -30.0..30.0f64
    ) {
        let u = mode_field(&a, &p);
        let v = mode_field(&b, &q);

        // Quotienting over shifts can only shrink the distance.
        let plain = h1_distance(&u, &v).unwrap();
        let orbital = orbital_distance(&u, &v).unwrap().distance;
        prop_assert!(orbital <= plain + 1e-12);

        // A pure translate lies on the orbit itself.
        let on_orbit = orbital_distance(&u.translate(tau), &u).unwrap().distance;
        prop_assert!(on_orbit <= 1e-9 * h1_norm(&u).max(1.0));
    }

    #[test]
    fn gauge_shift_bookkeeping_is_consistent(
        model in any_builtin_model(), a in amps(), p in phases()
    ) {
        let u = mode_field(&a, &p);
        let (shifted, speed) = model.gauge_shifted();

        // The recorded frame speed prices the added quadratic term exactly:
        // E_shifted - E = beta int(u^2) = speed * charge.
        let de = energy(&u, &shifted) - energy(&u, &model);
        let book = speed * charge(&u);
        prop_assert!((de - book).abs() <= 1e-10 * (1.0 + de.abs()));
        prop_assert!(shifted.e0() > 0.0);

        // Re-shifting a coercive model is the identity with zero speed.
        let (again, second_speed) = shifted.gauge_shifted();
        prop_assert_eq!(second_speed, 0.0);
        prop_assert_eq!(again.e0(), shifted.e0());
        let du = energy(&u, &again) - energy(&u, &shifted);
        prop_assert_eq!(du, 0.0);
    }

    #[test]
    fn perturbation_strengths_are_calibrated(
        a in amps(), p in phases(),
        eps in 1e-4..0.1f64, offset in -8.0..8.0f64, seed in 0u64..1000
    ) {
        let u = mode_field(&a, &p);

        // Noise injects exactly eps of H1-normalized disturbance.
        let noisy = perturb(&u, &PerturbationSpec::Noise { epsilon: eps, seed }).unwrap();
        let dn = h1_distance(&noisy, &u).unwrap();
        prop_assert!((dn - eps).abs() <= 1e-9 * eps, "noise: {} vs {}", dn, eps);

        // Bump strength is the bump amplitude, so the induced distance is
        // exactly linear in eps with slope equal to the shape's H1 norm
        // (about 1.63 at unit width).
        let bump = |e: f64| PerturbationSpec::Bump { epsilon: e, offset, width: 1.0 };
        let d1 = h1_distance(&perturb(&u, &bump(eps)).unwrap(), &u).unwrap();
        let d2 = h1_distance(&perturb(&u, &bump(2.0 * eps)).unwrap(), &u).unwrap();
        prop_assert!((d2 - 2.0 * d1).abs() <= 1e-9 * d1, "bump: {} vs {}", d2, 2.0 * d1);
        prop_assert!(d1 / eps > 1.0 && d1 / eps < 2.0, "bump slope {}", d1 / eps);

        // The multiplicative kind rescales the charge by (1 + eps)^2.
        let v = perturb(&u, &PerturbationSpec::Scale { epsilon: eps }).unwrap();
        let expected = (1.0 + eps) * (1.0 + eps) * charge(&u);
        prop_assert!((charge(&v) - expected).abs() <= 1e-12 * (1.0 + expected));
    }

    #[test]
    fn potential_derivatives_match_central_differences(
        model in any_builtin_model(), s in -10.0..10.0f64
    ) {
        let h = 1e-4;
        let central = (model.w(s + h).unwrap() - model.w(s - h).unwrap()) / (2.0 * h);
        let err = (model.w_prime(s).unwrap() - central).abs();
        // Quadratic-order agreement with a family-level constant: the
        // largest third derivative over the box is below 1e4 here.
        prop_assert!(err <= 1e4 * h * h, "s = {s}, err = {err}");
    }

    #[test]
    fn spectral_derivative_is_exact_on_band_limited_input(
        a in amps(), p in phases()
    ) {
        let u = mode_field(&a, &p);
        let du = u.derivative(1).unwrap();
        let g = u.grid().clone();
        let (av, pv) = (a.clone(), p.clone());
        let analytic = Field::from_fn(&g, move |x| {
            av.iter()
                .zip(&pv)
                .enumerate()
                .map(|(m, (amp, ph))| {
                    let k = 2.0 * PI * (m + 1) as f64 / L;
                    amp * k * (k * x + ph).cos()
                })
                .sum()
        })
        .unwrap();
        let scale = h1_norm(&u).max(1.0);
        for (c, e) in du.values().iter().zip(analytic.values()) {
            prop_assert!((c - e).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn run_configs_survive_a_json_round_trip(
        n_exp in 6u32..11, length in 10.0..200.0f64,
        charge in 0.1..50.0f64, dt in 1e-4..1e-2f64, t_end in 0.1..5.0f64
    ) {
        use kdvlab::cli::{CommandSpec, FamilyName, GridSpec, ModelSpec, RunConfig};
        let cfg = RunConfig {
            model: ModelSpec {
                family: FamilyName::Mkdv,
                k: Some(2.0),
                coeffs: None,
                auto_gauge_shift: true,
            },
            grid: GridSpec { n: 1 << n_exp, length },
            command: CommandSpec::TravelTest {
                charge,
                dt,
                t_end,
                sample_stride: 0.1,
            },
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

/// Translating by a full period is the identity on the dot; fractional
/// shifts move the peak where they should. Deterministic companion to the
/// randomized round-trip above.
#[test]
fn translate_by_full_period_is_identity() {
    let g = grid(N, L);
    let u = Field::from_fn(&g, |x| (2.0 * PI * x / L).sin() + 0.3 * (4.0 * PI * x / L).cos())
        .unwrap();
    let cycled = u.translate(L);
    for (a, b) in cycled.values().iter().zip(u.values()) {
        assert!((a - b).abs() <= 1e-12);
    }
}
