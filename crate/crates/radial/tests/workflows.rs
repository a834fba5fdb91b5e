use radial::exponents::{build_exponent_table, validate_regime};
use radial::intersection::intersection_growth;
use radial::muscan::{bounded_solution_census, classify_mu, log_grid, MuClass, ScanOptions};
use radial::shooting::{first_zero, FirstZero};
use radial::singular::{convergence_to_singular, singular_extend};
use radial::{CoefficientProfile, Error, ForcingProfile, ProblemSpec, SolverOptions};

fn forced(mu: f64) -> ProblemSpec {
    ProblemSpec::new(
        13,
        2.0,
        CoefficientProfile::PurePower { alpha: 0.0, k0: 1.0 },
        ForcingProfile::PowerDecayBump { nu: 0.0, q: 14.0, amplitude: 1.0 },
        mu,
    )
    .unwrap()
}

#[test]
fn weighted_nonlinearity_stays_oscillatory() {
    // N = 13 <= 10 + 4α for α = 1, so every supercritical p lies below p_JL(1).
    let spec = ProblemSpec::homogeneous(13, 3.0, 1.0, 1.0).unwrap();
    assert!(spec.table().p_jl_alpha.is_infinite());
    let table = intersection_growth(&spec, &[1e2, 1e4, 1e6], 1.0, &SolverOptions::default()).unwrap();
    let counts: Vec<usize> = table.rows.iter().map(|r| r.count).collect();
    assert!(table.nondecreasing, "{counts:?}");
    assert!(counts[2] > counts[0], "{counts:?}");
}

#[test]
fn regular_solutions_approach_the_singular_one() {
    let spec = ProblemSpec::homogeneous(13, 2.0, 0.0, 1.0).unwrap();
    let probes = log_grid(0.5, 2.0, 9);
    let rows = convergence_to_singular(&spec, &[1e2, 1e4, 1e6], &probes, &SolverOptions::default()).unwrap();
    assert!(rows.windows(2).all(|w| w[1].sup_u < w[0].sup_u));
}

#[test]
fn blended_coefficient_changes_far_exponents_only() {
    let k = CoefficientProfile::BlendedPower { alpha: 0.0, k0: 1.0, beta: 1.0, k_inf: 2.0, blend_radius: 1.0 };
    let spec = ProblemSpec::new(13, 2.0, k, ForcingProfile::Zero, 0.0).unwrap();
    let t = spec.table();
    let pure = build_exponent_table(13, 2.0, 0.0, 0.0, 1.0, 1.0).unwrap();
    assert_eq!(t.theta, pure.theta);
    assert_eq!(t.gamma, pure.gamma);
    assert_eq!(t.theta_tilde, 3.0);
    assert!(validate_regime(t).supercritical_at_inf);
    let star = singular_extend(&spec, 1e-2, &SolverOptions::default()).unwrap();
    let (u, _) = star.eval(1e-4).unwrap();
    assert!((u * 1e-8 / t.gamma - 1.0).abs() < 1e-6);
}

#[test]
fn positivity_failure_moves_inward_with_mu() {
    let opts = SolverOptions::default();
    let radius = |mu: f64| singular_extend(&forced(mu), 10.0, &opts).unwrap().first_zero();
    let (a, b) = (radius(4e4).unwrap(), radius(4e5).unwrap());
    assert!(b < a, "{a} {b}");
    assert_eq!(radius(100.0), None);
}

#[test]
fn large_forcing_kills_regular_solutions() {
    let opts = SolverOptions::default();
    match first_zero(&forced(1e6), 1.0, 10.0, &opts).unwrap() {
        FirstZero::At { r0 } => assert!(r0 < 10.0),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        first_zero(&ProblemSpec::homogeneous(13, 2.0, 0.0, 1.0).unwrap(), 1.0, 1e3, &opts).unwrap(),
        FirstZero::NotFoundBelow { .. }
    ));
}

#[test]
fn classification_labels_the_two_ends() {
    let opts = ScanOptions::default();
    assert!(classify_mu(&forced(0.0), 0.0, None, &opts).unwrap().class.is_slow());
    let top = classify_mu(&forced(0.0), 1e6, None, &opts).unwrap();
    assert!(matches!(top.class, MuClass::PositivityFailure { .. }), "{:?}", top.class);
}

#[test]
fn census_requires_a_positive_singular_solution() {
    let err = bounded_solution_census(&forced(1e6), &[10.0, 100.0], 1e3, 1.0, &SolverOptions::default());
    assert!(matches!(err, Err(Error::Positivity { .. })));
}
