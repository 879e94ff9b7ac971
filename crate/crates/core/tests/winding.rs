use std::f64::consts::FRAC_PI_2;

use wallstrip::grid::{first_crossing, StripGrid};
use wallstrip::micro::{minimize_eeps, MicroParams};
use wallstrip::minimize::{infimum_estimate, minimize_wall, GridDensity, SolveOptions};
use wallstrip::params::WallParams;

fn tight() -> SolveOptions {
    SolveOptions { grad_tol: 1e-10, energy_tol: 1e-20, ..Default::default() }
}

/// Distance between the `3 pi/2` and `pi/2` crossings of a double wall.
fn separation(gamma: f64, h: f64, m: f64) -> f64 {
    let g = StripGrid::new(m, (10.0 * 2.0 * m) as usize + 1, 11).unwrap();
    let r = minimize_wall(&g, &WallParams::new(gamma, h, 2).unwrap(), &tight()).unwrap();
    assert!(r.converged);
    let upper = first_crossing(&r.field, 3.0 * FRAC_PI_2).unwrap();
    let lower = first_crossing(&r.field, FRAC_PI_2).unwrap();
    lower - upper
}

#[test]
fn double_wall_without_field_splits_as_the_window_grows() {
    let (a, b) = (separation(1.0, 0.0, 10.0), separation(1.0, 0.0, 20.0));
    assert!(b > a + 5.0, "separations {a} and {b}");
}

#[test]
fn double_wall_in_a_field_stays_bound() {
    let (a, b) = (separation(1.0, 0.5, 10.0), separation(1.0, 0.5, 20.0));
    assert!((a - b).abs() < 0.05 * a, "separations {a} and {b}");
}

#[test]
fn single_wall_energy_does_not_increase_with_the_window() {
    let p = WallParams::new(0.5, 0.0, 1).unwrap();
    let rows = infimum_estimate(&p, &[4.0, 8.0, 16.0], GridDensity { cells_per_unit: 10.0, ny: 11 }, &tight()).unwrap();
    assert!(rows.iter().all(|r| r.converged));
    assert!(rows.windows(2).all(|w| w[1].energy <= w[0].energy), "{rows:?}");
}

#[test]
fn single_winding_beats_double_winding_for_the_reduced_energy() {
    let g = StripGrid::new(6.0, 61, 11).unwrap();
    let opts = SolveOptions { grad_tol: 1e-8, energy_tol: 1e-14, ..Default::default() };
    for eps in [0.1, 0.01] {
        let micro = MicroParams::with_eps(eps).unwrap();
        let one = minimize_eeps(&g, &WallParams::new(1.0, 0.0, 1).unwrap(), &micro, &opts).unwrap();
        let two = minimize_eeps(&g, &WallParams::new(1.0, 0.0, 2).unwrap(), &micro, &opts).unwrap();
        assert!(one.energy.total < two.energy.total, "eps {eps}: {} vs {}", one.energy.total, two.energy.total);
    }
}
