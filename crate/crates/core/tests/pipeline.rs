use proptest::prelude::*;
use wallstrip::energy::energy_f;
use wallstrip::grid::{extract_trace, ScalarField, Side, StripGrid};
use wallstrip::io::{load_field, load_json, save_field, save_json};
use wallstrip::micro::{energy_e0, energy_eeps, minimize_eeps, MicroParams};
use wallstrip::minimize::{minimize_wall, SolveOptions, SolveSummary};
use wallstrip::nonlocal1d::{energy_fbar, factor_two_check};
use wallstrip::params::WallParams;
use wallstrip::verify::{run_verification, Fault, VerifyOptions, VerifyReport};

fn tight() -> SolveOptions {
    SolveOptions { grad_tol: 1e-10, energy_tol: 1e-20, ..Default::default() }
}

#[test]
fn saved_minimizer_reloads_with_identical_energy_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let g = StripGrid::new(6.0, 121, 11).unwrap();
    let p = WallParams::new(2.0, 0.3, 2).unwrap();
    let r = minimize_wall(&g, &p, &SolveOptions::default()).unwrap();
    let path = dir.path().join("wall.csv");
    save_field(&path, &r.field).unwrap();
    let back = load_field(&path).unwrap();
    assert_eq!(energy_f(&back, &p).total.to_bits(), r.energy.total.to_bits());

    let json = dir.path().join("summary.json");
    save_json(&json, &r.summary(&p)).unwrap();
    let s: SolveSummary = load_json(&json).unwrap();
    assert_eq!(s.energy, r.energy);
    assert_eq!(s.params, p);
}

#[test]
fn zero_field_minimizer_splits_into_two_boundary_energies() {
    // Without a field the minimizer is harmonic, so its energy is twice the
    // boundary energy of its (mirror-symmetric) trace.
    let g = StripGrid::new(10.0, 401, 41).unwrap();
    let p = WallParams::new(1.0, 0.0, 1).unwrap();
    let r = minimize_wall(&g, &p, &tight()).unwrap();
    let trace = extract_trace(&r.field, Side::Bottom);
    let fbar = energy_fbar(&trace, 1.0).unwrap().energy.total;
    let rel = (r.energy.total - 2.0 * fbar).abs() / r.energy.total;
    assert!(rel < 2e-2, "{} vs 2 x {fbar}: {rel}", r.energy.total);

    // The same split holds for the harmonic extension of that trace on a
    // strip five units shorter than the trace window.
    let inner = StripGrid::new(5.0, 201, 41).unwrap();
    let check = factor_two_check(&trace, 1.0, &inner).unwrap();
    assert!(check.rel_err < 2e-2, "{check:?}");
}

#[test]
fn reduced_energy_minimizers_approach_the_symmetric_local_wall() {
    let g = StripGrid::new(6.0, 61, 11).unwrap();
    let p = WallParams::new(1.0, 0.0, 1).unwrap();
    let opts = SolveOptions { grad_tol: 1e-8, energy_tol: 1e-14, ..Default::default() };
    let local = minimize_wall(&g, &p, &opts).unwrap();
    let mut mirror = Vec::new();
    for eps in [0.1, 0.01, 0.001] {
        let micro = MicroParams::with_eps(eps).unwrap();
        let r = minimize_eeps(&g, &p, &micro, &opts).unwrap();
        assert!(r.converged);
        assert!(r.monotone.ok);
        assert!(r.symmetry.x_point_err <= 1e-8, "{:?}", r.symmetry);
        assert!(r.energy.total > local.energy.total);
        let again = energy_eeps(&r.field, &p, &micro).unwrap();
        assert!((again.total - r.energy.total).abs() < 1e-9 * r.energy.total);
        assert_eq!(energy_e0(&r.field, &p).total, energy_f(&r.field, &p).total);
        mirror.push(r.symmetry.y_mirror_err);
    }
    assert!(mirror.windows(2).all(|w| w[1] < w[0]), "{mirror:?}");
}

#[test]
fn verification_report_serializes_and_names_the_injected_fault() {
    let r = run_verification(&VerifyOptions { fast: true, seed: 11, fault: Some(Fault::BoundaryGradientSign) });
    assert!(!r.passed);
    assert_eq!(r.failures, vec!["gradient_consistency".to_string()]);
    let text = serde_json::to_string(&r).unwrap();
    let back: VerifyReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back.checks.len(), r.checks.len());
    assert_eq!(back.failures, r.failures);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_is_invariant_under_the_y_mirror(seed in any::<u64>(), gamma in 0.05f64..20.0, h in 0.0f64..3.0) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = StripGrid::new(2.0, 17, 9).unwrap();
        let f = ScalarField::from_fn(g, |_, _| rng.gen_range(-5.0..5.0));
        let m = ScalarField {
            grid: g,
            values: (0..g.len()).map(|q| f.get(q % g.nx, g.ny - 1 - q / g.nx)).collect(),
        };
        let p = WallParams::new(gamma, h, 1).unwrap();
        let (a, b) = (energy_f(&f, &p).total, energy_f(&m, &p).total);
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn minimized_energy_never_exceeds_the_starting_energy(gamma in 0.1f64..10.0, h in 0.0f64..1.0, k in 1i32..3) {
        let g = StripGrid::new(3.0, 31, 7).unwrap();
        let p = WallParams::new(gamma, h, k).unwrap();
        let opts = SolveOptions { max_iters: 300, ..Default::default() };
        let start = wallstrip::minimize::initial_field(&g, &p, &opts.init).unwrap();
        let r = minimize_wall(&g, &p, &opts).unwrap();
        prop_assert!(r.energy.total <= energy_f(&start, &p).total);
    }
}
