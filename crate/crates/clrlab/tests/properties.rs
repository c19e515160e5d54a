//! Property tests for the structural invariants: spectrum generation,
//! schedule shape, parameter prescriptions, config round-trips, and the
//! residual decompositions recorded in traces.

use nalgebra::DVector;
use proptest::prelude::*;

use clrlab::config::ExperimentConfig;
use clrlab::optimizers::{gradient_descent, RunConfig};
use clrlab::problems::{build_quadratic, Problem, Rotation, ThetaStarMode};
use clrlab::schedules::{
    iterations_to_accuracy, thm1_params, ClrSchedule, Regime, Schedule,
};
use clrlab::spectra::{make_bimodal_spectrum, BimodalLayout, Placement, Spectrum};

fn placements() -> impl Strategy<Value = Placement> {
    prop_oneof![
        Just(Placement::Endpoints),
        Just(Placement::Equispaced),
        Just(Placement::UniformRandom),
    ]
}

/// Random valid two-cluster layouts with well-separated intervals.
fn layouts() -> impl Strategy<Value = BimodalLayout> {
    (2usize..24, 1.0f64..4.0, 10.0f64..2000.0, placements()).prop_flat_map(
        |(p, lower_hi, upper_hi, placement)| {
            (1usize..p, Just(p), Just(lower_hi), Just(upper_hi), Just(placement)).prop_map(
                |(r, p, lower_hi, upper_hi, placement)| BimodalLayout {
                    p,
                    r,
                    upper: (upper_hi / 2.0, upper_hi),
                    lower: (1.0, lower_hi),
                    placement,
                },
            )
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_spectra_satisfy_invariants(layout in layouts(), seed in any::<u64>()) {
        let spectrum = make_bimodal_spectrum(&layout, seed).unwrap();
        let eigs = spectrum.eigenvalues();
        prop_assert_eq!(eigs.len(), layout.p);
        prop_assert_eq!(spectrum.split_index(), layout.r);
        for (i, &lam) in eigs.iter().enumerate() {
            prop_assert!(lam > 0.0);
            if i > 0 {
                prop_assert!(lam <= eigs[i - 1]);
            }
            let (lo, hi) = if i < layout.r { layout.upper } else { layout.lower };
            prop_assert!((lo..=hi).contains(&lam), "eig {lam} outside [{lo}, {hi}]");
        }
        let c = spectrum.condition_numbers();
        prop_assert!(c.kappa_plus * c.kappa_minus <= c.kappa * (1.0 + 1e-12));
        prop_assert!(c.kappa >= 1.0 && c.kappa_plus >= 1.0 && c.kappa_minus >= 1.0);
    }

    #[test]
    fn spectrum_generation_is_pure(layout in layouts(), seed in any::<u64>()) {
        let a = make_bimodal_spectrum(&layout, seed).unwrap();
        let b = make_bimodal_spectrum(&layout, seed).unwrap();
        for (x, y) in a.eigenvalues().iter().zip(b.eigenvalues()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn spectrum_text_round_trips(layout in layouts(), seed in any::<u64>()) {
        let spectrum = make_bimodal_spectrum(&layout, seed).unwrap();
        let back: Spectrum = spectrum.to_string().parse().unwrap();
        prop_assert_eq!(spectrum, back);
    }

    #[test]
    fn schedule_is_periodic_with_one_unstable_step(
        period in 2usize..50,
        eta_plus in 1e-6f64..1.0,
        eta_minus in 1e-6f64..10.0,
    ) {
        let schedule = ClrSchedule::new(period, eta_plus, eta_minus).unwrap();
        for t in 0..(4 * period) {
            prop_assert_eq!(schedule.rate_at(t), schedule.rate_at(t % period));
            prop_assert_eq!(schedule.rate_at(t), schedule.rate_at(t + period));
        }
        for k in 0..4 {
            let unstable_steps = (k * period..(k + 1) * period)
                .filter(|&t| schedule.rate_at(t) == eta_minus)
                .count();
            // eta_plus == eta_minus would make the count ambiguous; the
            // strategy ranges overlap, so guard against that draw.
            if eta_plus != eta_minus {
                prop_assert_eq!(unstable_steps, 1);
            }
        }
    }

    #[test]
    fn thm1_period_satisfies_its_inequality(layout in layouts(), seed in any::<u64>()) {
        let spectrum = make_bimodal_spectrum(&layout, seed).unwrap();
        let c = spectrum.condition_numbers();
        let params = thm1_params(&c).unwrap();
        let required = c.kappa_plus * (2.0 * c.kappa / (2.0 * c.kappa_minus - 1.0)).ln() + 1.0;
        prop_assert!(params.period > 1);
        prop_assert!(params.period as f64 >= required);
        prop_assert!(params.contraction_base > 0.0 && params.contraction_base < 1.0);
    }

    #[test]
    fn prescribed_schedule_is_unstable_when_kappa_large(
        upper_hi in 100.0f64..10000.0,
        lower_hi in 1.0f64..4.0,
        r in 1usize..8,
        seed in any::<u64>(),
    ) {
        // kappa = upper_hi, kappa_minus = lower_hi here, and
        // upper_hi > 2 lower_hi guarantees eta_minus > 2/L.
        let layout = BimodalLayout {
            p: 16,
            r,
            upper: (upper_hi / 2.0, upper_hi),
            lower: (1.0, lower_hi),
            placement: Placement::Endpoints,
        };
        let spectrum = make_bimodal_spectrum(&layout, seed).unwrap();
        let c = spectrum.condition_numbers();
        prop_assume!(c.kappa > 2.0 * c.kappa_minus);
        let params = thm1_params(&c).unwrap();
        prop_assert!(params.schedule().is_unstable(c.smoothness));
    }

    #[test]
    fn iterations_to_accuracy_is_a_sufficient_period_multiple(
        layout in layouts(),
        eps_exp in 1.0f64..12.0,
    ) {
        let spectrum = make_bimodal_spectrum(&layout, 0).unwrap();
        let c = spectrum.condition_numbers();
        let params = thm1_params(&c).unwrap();
        let eps = 10f64.powf(-eps_exp);
        let t = iterations_to_accuracy(&params, c.kappa_minus, eps).unwrap();
        prop_assert_eq!(t % params.period, 0);
        prop_assert!(t as f64 >= 2.0 * params.period as f64 * c.kappa_minus * (1.0 / eps).ln());
        let previous_multiple = (t - params.period) as f64;
        prop_assert!(
            previous_multiple < 2.0 * params.period as f64 * c.kappa_minus * (1.0 / eps).ln()
        );
    }

    #[test]
    fn config_round_trip_is_identity(
        p in 2usize..200,
        seed in any::<u64>(),
        target_exp in 1.0f64..12.0,
        period_scale in 0.5f64..4.0,
        override_period in proptest::option::of(2usize..100),
        nonlinear in any::<bool>(),
        emit_svg in any::<bool>(),
    ) {
        let config = ExperimentConfig {
            p,
            r: 1 + p / 4,
            seed,
            target: 10f64.powf(-target_exp),
            period_scale,
            override_period,
            nonlinear,
            emit_svg,
            regime: if nonlinear { Regime::NonlinearThm2 } else { Regime::LinearThm1 },
            ..ExperimentConfig::default()
        };
        let text = config.emit();
        let back: ExperimentConfig = text.parse().unwrap();
        prop_assert_eq!(&config, &back);
        prop_assert_eq!(back.emit(), text);
    }
}

proptest! {
    // Trace-level properties run full optimizations; keep the case count low.
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn trace_components_are_pythagorean_and_boundaries_recorded(
        seed in any::<u64>(),
        rotated in any::<bool>(),
    ) {
        let layout = BimodalLayout {
            p: 12,
            r: 3,
            upper: (50.0, 100.0),
            lower: (1.0, 2.0),
            placement: Placement::UniformRandom,
        };
        let spectrum = make_bimodal_spectrum(&layout, seed).unwrap();
        let rotation = if rotated { Rotation::RandomOrthogonal } else { Rotation::None };
        let problem = build_quadratic(&spectrum, rotation, ThetaStarMode::RandomUnit, seed).unwrap();
        let params = thm1_params(&spectrum.condition_numbers()).unwrap();
        let cfg = RunConfig {
            max_iterations: 400,
            record_every: 3,
            ..RunConfig::origin(12)
        };
        let trace = gradient_descent(
            &problem,
            &Schedule::Cyclical(params.schedule()),
            &cfg,
        ).unwrap();
        for row in trace.rows() {
            let lhs = row.residual * row.residual;
            let rhs = row.a_norm * row.a_norm + row.b_norm * row.b_norm;
            prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.max(1e-300));
        }
        let final_t = trace.final_row().t;
        let mut boundary = 0;
        while boundary <= final_t {
            prop_assert!(trace.row_at(boundary).is_some(), "missing t={boundary}");
            boundary += params.period;
        }
    }

    #[test]
    fn quadratic_gradient_identity_holds(
        seed in any::<u64>(),
        rotated in any::<bool>(),
    ) {
        // grad f(theta) = H (theta - theta_star) for both representations.
        let layout = BimodalLayout {
            p: 8,
            r: 2,
            upper: (500.0, 1000.0),
            lower: (1.0, 2.0),
            placement: Placement::UniformRandom,
        };
        let spectrum = make_bimodal_spectrum(&layout, seed).unwrap();
        let rotation = if rotated { Rotation::RandomOrthogonal } else { Rotation::None };
        let problem = build_quadratic(&spectrum, rotation, ThetaStarMode::RandomUnit, seed).unwrap();
        let mut rng = clrlab::rng::Rng::seed_from_u64(seed ^ 0x5a5a);
        use clrlab::problems::GradientOracle;
        for _ in 0..5 {
            let theta = rng.normal_vector(8);
            let h = problem.hessian(&theta).unwrap();
            let direct = h * (&theta - problem.theta_star());
            let grad = problem.gradient(&theta);
            let diff = (&grad - &direct).norm();
            prop_assert!(diff <= 1e-12 * grad.norm().max(1.0));
        }
    }
}

/// The per-step contraction factors from the one-period analysis, asserted
/// on diagonal endpoints problems: stable steps contract the upper
/// projection by at least (1 - 1/kappa_plus) and never grow the lower one;
/// the unstable step contracts the lower projection by at least
/// (1 - 1/kappa_minus) while growing the upper one by at most
/// kappa / kappa_minus.
#[test]
fn per_period_projection_recursions_hold_on_diagonal_problems() {
    for kappa in [100.0, 10_000.0] {
        let layout = BimodalLayout {
            p: 12,
            r: 3,
            upper: (kappa / 2.0, kappa),
            lower: (1.0, 2.0),
            placement: Placement::Endpoints,
        };
        let spectrum = make_bimodal_spectrum(&layout, 0).unwrap();
        let c = spectrum.condition_numbers();
        let params = thm1_params(&c).unwrap();
        let period = params.period;
        // theta_star = 0 keeps the residual equal to the iterate, so each
        // step scales the projections without subtraction rounding.
        let problem = build_quadratic(
            &spectrum,
            Rotation::None,
            ThetaStarMode::Given(DVector::zeros(12)),
            5,
        )
        .unwrap();
        let mut rng = clrlab::rng::Rng::seed_from_u64(5);
        let cfg = RunConfig {
            max_iterations: 6 * period,
            target_relative_residual: 1e-15,
            theta0: rng.unit_vector(12),
            ..RunConfig::origin(12)
        };
        let trace = gradient_descent(
            &problem,
            &Schedule::Cyclical(params.schedule()),
            &cfg,
        )
        .unwrap();
        let slack = 1.0 + 1e-9;
        for pair in trace.rows().windows(2) {
            let (prev, next) = (&pair[0], &pair[1]);
            assert_eq!(next.t, prev.t + 1);
            if prev.t % period == period - 1 {
                // unstable step
                assert!(
                    next.b_norm <= (1.0 - 1.0 / c.kappa_minus) * prev.b_norm * slack + 1e-300,
                    "kappa={kappa} t={}: b grew past the unstable contraction",
                    prev.t
                );
                assert!(
                    next.a_norm <= c.kappa / c.kappa_minus * prev.a_norm * slack + 1e-300,
                    "kappa={kappa} t={}: a grew past kappa/kappa_minus",
                    prev.t
                );
            } else {
                assert!(
                    next.a_norm <= (1.0 - 1.0 / c.kappa_plus) * prev.a_norm * slack + 1e-300,
                    "kappa={kappa} t={}: stable step failed to contract a",
                    prev.t
                );
                assert!(
                    next.b_norm <= prev.b_norm * slack + 1e-300,
                    "kappa={kappa} t={}: b grew during a stable step",
                    prev.t
                );
            }
        }
    }
}

#[test]
fn trace_of_fixed_point_is_all_zero() {
    let spectrum = Spectrum::new(vec![10.0, 1.0], 1).unwrap();
    let star = DVector::from_vec(vec![0.5, -0.5]);
    let problem = build_quadratic(
        &spectrum,
        Rotation::None,
        ThetaStarMode::Given(star.clone()),
        0,
    )
    .unwrap();
    let cfg = RunConfig {
        theta0: star,
        ..RunConfig::origin(2)
    };
    let trace = gradient_descent(&problem, &Schedule::Constant(0.1), &cfg).unwrap();
    assert!(trace.rows().iter().all(|row| row.residual == 0.0));
}
