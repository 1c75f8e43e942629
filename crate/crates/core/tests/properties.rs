//! Property tests across model families.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use reslevy::analytics::{log_grid, overshoot_probability};
use reslevy::exec::{map_replicas, map_replicas_sequential};
use reslevy::path::CrossingKind;
use reslevy::resurrection::{audit_jump_removal, resurrect_path, AbsorptionPolicy};
use reslevy::{first_passage_below, make_model, ExpJumps, LevyModel, ModelSpec, SimParams};

fn exp_jumps() -> impl Strategy<Value = ExpJumps> {
    (0.1f64..3.0, 0.2f64..4.0, 0.1f64..3.0, 0.2f64..4.0).prop_map(|(ru, mu, rd, md)| ExpJumps {
        rate_up: ru,
        mu_up: mu,
        rate_down: rd,
        mu_down: md,
    })
}

/// Admissible stable parameters away from the `alpha = 1` seam.
fn stable_params() -> impl Strategy<Value = (f64, f64)> {
    prop_oneof![0.3f64..0.9, 1.1f64..1.9].prop_flat_map(|alpha| {
        let (lo, hi) = if alpha < 1.0 {
            (0.05, 0.95)
        } else {
            (
                (1.0 - 1.0 / alpha + 0.02).max(0.05),
                (1.0 / alpha - 0.02).min(0.95),
            )
        };
        (Just(alpha), lo..hi)
    })
}

fn any_spec() -> impl Strategy<Value = ModelSpec> {
    prop_oneof![
        (-1.0f64..1.0, exp_jumps())
            .prop_map(|(drift, jumps)| ModelSpec::CompoundPoissonDrift { drift, jumps }),
        stable_params().prop_map(|(alpha, rho_bar)| ModelSpec::Stable {
            alpha,
            rho_bar,
            scale: 1.0
        }),
        (0.2f64..0.9).prop_map(|alpha| ModelSpec::StableSubordinatorNeg { alpha }),
        (0.3f64..3.0, 0.3f64..3.0)
            .prop_map(|(shape, rate)| ModelSpec::GammaSubordinatorNeg { shape, rate }),
        (0.2f64..1.5, -1.0f64..1.0, exp_jumps()).prop_map(|(sigma, drift, jumps)| {
            ModelSpec::BrownianCompoundPoisson {
                sigma,
                drift,
                jumps,
            }
        }),
    ]
}

fn subordinator_spec() -> impl Strategy<Value = ModelSpec> {
    prop_oneof![
        (0.2f64..0.9).prop_map(|alpha| ModelSpec::StableSubordinatorNeg { alpha }),
        (0.3f64..3.0, 0.3f64..3.0)
            .prop_map(|(shape, rate)| ModelSpec::GammaSubordinatorNeg { shape, rate }),
    ]
}

fn model(spec: ModelSpec) -> LevyModel {
    make_model(spec).expect("strategy yields admissible parameters")
}

fn sim_params() -> SimParams {
    SimParams {
        budget: Some(50.0),
        ..SimParams::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tail_is_monotone_on_a_log_grid(spec in any_spec()) {
        let m = model(spec);
        let grid = log_grid(1e-4, 1e4, 12);
        prop_assert!(grid.len() >= 96);
        let tails: Vec<f64> = grid.iter().map(|&x| m.tail_neg(x).unwrap()).collect();
        for (w, x) in tails.windows(2).zip(&grid) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12), "tail increases at {}: {} -> {}", x, w[0], w[1]);
            prop_assert!(w[1] >= 0.0);
        }
    }

    #[test]
    fn flags_are_a_function_of_the_spec(spec in any_spec()) {
        let (a, b) = (model(spec), model(spec));
        prop_assert_eq!(a.flags, b.flags);
        prop_assert_eq!(a.family_name(), spec.family_name());
        let json = serde_json::to_value(spec).unwrap();
        prop_assert_eq!(json["family"].as_str(), Some(spec.family_name()));
    }

    #[test]
    fn overshoot_probability_is_a_probability(spec in subordinator_spec(), x in 1e-3f64..1e3) {
        let p = overshoot_probability(&model(spec), x).unwrap();
        prop_assert!((0.0..=1.0 + 1e-9).contains(&p), "p = {}", p);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn first_passage_invariants(spec in any_spec(), start in 0.1f64..3.0, seed in any::<u64>()) {
        let m = model(spec);
        let params = sim_params();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fp = first_passage_below(&m, start, &params, &mut rng).unwrap();
        if fp.hit() {
            prop_assert!(fp.tau.is_finite() && fp.tau >= 0.0);
            prop_assert_eq!(fp.tau, fp.elapsed);
            prop_assert!(fp.pre >= 0.0, "pre = {}", fp.pre);
            prop_assert!(fp.post <= 0.0, "post = {}", fp.post);
            prop_assert_eq!(fp.crept, fp.kind == CrossingKind::Creep);
            if fp.crept {
                prop_assert!(m.flags.creeps_down);
                prop_assert_eq!(fp.post, 0.0);
            }
        } else {
            prop_assert_eq!(fp.kind, CrossingKind::NotHit);
            prop_assert!(fp.tau.is_infinite());
            prop_assert!(fp.pre > 0.0);
        }
    }

    #[test]
    fn resurrected_paths_pass_the_audit(spec in any_spec(), start in 0.2f64..2.0, seed in any::<u64>()) {
        let m = model(spec);
        // a coarser level-relative cutoff keeps the jump count per
        // excursion near 1e3 for the infinite-activity families
        let params = SimParams { truncation_rel: 1e-2, ..sim_params() };
        let policy = AbsorptionPolicy {
            n_max: 500,
            max_path_nodes: 200_000,
            ..AbsorptionPolicy::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trace = resurrect_path(&m, start, 5.0, &params, &policy, &mut rng).unwrap();
        let audit = audit_jump_removal(&trace);
        prop_assert!(audit.passed(), "{:?}", audit);
        prop_assert!(trace.path.values.iter().all(|&z| z >= 0.0));
        prop_assert!(trace.tau_seq.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(trace.pos_seq.iter().all(|&z| z >= 0.0));
    }
}

#[test]
fn parallel_and_sequential_replicas_agree() {
    let m = model(ModelSpec::Stable {
        alpha: 1.5,
        rho_bar: 0.5,
        scale: 1.0,
    });
    let params = sim_params();
    let run = |i: usize| {
        let mut rng = reslevy::exec::substream(5, reslevy::exec::domain::PATHS, i as u64);
        let fp = first_passage_below(&m, 1.0, &params, &mut rng).unwrap();
        (fp.tau.to_bits(), fp.pre.to_bits(), fp.post.to_bits())
    };
    assert_eq!(map_replicas(200, run), map_replicas_sequential(200, run));
}

#[test]
fn subordinator_laplace_transform_matches_simulation() {
    // E exp(-lambda (x - X_t)) = exp(-t phi(lambda)) for a negative subordinator
    let m = model(ModelSpec::GammaSubordinatorNeg {
        shape: 2.0,
        rate: 1.5,
    });
    let (t, lambda, n) = (0.7, 0.8, 20_000);
    let params = SimParams::default();
    let vals = map_replicas(n, |i| {
        let mut rng = reslevy::exec::substream(9, reslevy::exec::domain::ORACLE, i as u64);
        let p = reslevy::sample_path(&m, 10.0, t, &params, &mut rng).unwrap();
        (-lambda * (10.0 - p.values.last().unwrap())).exp()
    });
    let mean = vals.iter().sum::<f64>() / n as f64;
    // Gamma(a, b) Laplace exponent a ln(1 + lambda / b)
    let exact = (-t * 2.0 * (1.0 + lambda / 1.5f64).ln()).exp();
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    assert!(
        (mean - exact).abs() < 4.0 * sd / (n as f64).sqrt() + 1e-3,
        "{mean} vs {exact}"
    );
}
