//! Executable invariant suite behind `wallstrip verify`.
//!
//! Every check is a small, seeded numerical experiment with a fixed
//! tolerance. The fast mode shrinks grids and sample counts; the checks
//! themselves are the same.

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::{kernel_k_eps, symbol_khat_eps, Profile};
use crate::energy::{boundary_gradient, el_residual, energy_and_grad, energy_f};
use crate::grid::{extract_trace, recenter, shift_trace, x_average, ScalarField, Side, StripGrid, Trace};
use crate::io::{read_field_csv, read_trace_csv, write_field_csv, write_trace_csv, TraceMeta};
use crate::micro::{
    calibrate_lower_bound_constant, exchange_from_components, lower_bound_terms, nonlocal_energy, ChargeField,
    MicroParams,
};
use crate::minimize::{minimize_wall, Init, SolveOptions};
use crate::nonlocal1d::{energy_fbar, poisson_extend, relax_fbar, residual_eq11, residual_with_kernel, Kernel};
use crate::params::WallParams;

/// Deliberate defects for testing the suite itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Flip the sign of the boundary-penalty part of the gradient.
    BoundaryGradientSign,
}

impl std::str::FromStr for Fault {
    type Err = crate::error::WallError;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s {
            "boundary_gradient_sign" => Ok(Fault::BoundaryGradientSign),
            other => Err(crate::error::WallError::InvalidParams(format!("unknown fault {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    pub fast: bool,
    pub seed: u64,
    pub fault: Option<Fault>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub module: String,
    pub passed: bool,
    /// The measured quantity compared against `tolerance`.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyReport {
    pub fast: bool,
    pub seed: u64,
    pub passed: bool,
    pub failures: Vec<String>,
    pub checks: Vec<CheckResult>,
}

struct Outcome {
    passed: bool,
    value: f64,
    tolerance: f64,
    detail: String,
}

fn at_most(value: f64, tolerance: f64, detail: impl Into<String>) -> Outcome {
    Outcome { passed: value <= tolerance, value, tolerance, detail: detail.into() }
}

fn holds(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed: ok, value: if ok { 0.0 } else { 1.0 }, tolerance: 0.0, detail: detail.into() }
}

type Check = fn(&VerifyOptions, &mut ChaCha8Rng) -> crate::error::Result<Outcome>;

const CHECKS: &[(&str, &str, Check)] = &[
    ("trace_recenter_commutes", "grid", trace_recenter_commutes),
    ("x_average_affine_exact", "grid", x_average_affine_exact),
    ("gradient_consistency", "energy", gradient_consistency),
    ("flip_symmetry", "energy", flip_symmetry),
    ("nonnegative_parts", "energy", nonnegative_parts),
    ("residual_refines", "energy", residual_refines),
    ("monotone_descent_and_clamp", "minimize", monotone_descent_and_clamp),
    ("uniqueness_up_to_translation", "minimize", uniqueness_up_to_translation),
    ("flip_covariance", "minimize", flip_covariance),
    ("kernel_symbol_pair", "analytic", kernel_symbol_pair),
    ("planar_profile_harmonic", "analytic", planar_profile_harmonic),
    ("vortex_cauchy_residual", "analytic", vortex_cauchy_residual),
    ("trace_energy_nonnegative", "nonlocal1d", trace_energy_nonnegative),
    ("trace_residual_is_gradient", "nonlocal1d", trace_residual_is_gradient),
    ("relaxation_monotone", "nonlocal1d", relaxation_monotone),
    ("extension_recovers_trace", "nonlocal1d", extension_recovers_trace),
    ("nonlocal_form_psd_symmetric", "micro", nonlocal_form_psd_symmetric),
    ("lower_bound_calibrated", "micro", lower_bound_calibrated),
    ("exchange_identity", "micro", exchange_identity),
    ("csv_round_trip", "cli", csv_round_trip),
];

/// Names of all checks, in execution order.
pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.0).collect()
}

pub fn run_verification(opts: &VerifyOptions) -> VerifyReport {
    let mut checks = Vec::new();
    for (i, &(name, module, check)) in CHECKS.iter().enumerate() {
        // Each check gets its own stream so that results do not depend on
        // which other checks ran.
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(i as u64 + 1)));
        let t = Instant::now();
        let out = check(opts, &mut rng).unwrap_or_else(|e| Outcome {
            passed: false,
            value: f64::NAN,
            tolerance: 0.0,
            detail: format!("error: {e}"),
        });
        checks.push(CheckResult {
            name: name.into(),
            module: module.into(),
            passed: out.passed,
            value: out.value,
            tolerance: out.tolerance,
            detail: out.detail,
            seconds: t.elapsed().as_secs_f64(),
        });
    }
    let failures: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    VerifyReport { fast: opts.fast, seed: opts.seed, passed: failures.is_empty(), failures, checks }
}

fn random_field(g: StripGrid, rng: &mut ChaCha8Rng, amp: f64) -> ScalarField {
    ScalarField::from_fn(g, |_, _| rng.gen_range(-amp..amp))
}

/// A decreasing wall with a mild tilt in `y`, flat near the ends.
fn tilted_wall(g: StripGrid, width: f64, tilt: f64) -> ScalarField {
    let edge = g.m - 2.0 * g.hx();
    ScalarField::from_fn(g, |x, y| {
        if x <= -edge {
            PI
        } else if x >= edge {
            0.0
        } else {
            2.0 * (-(x + tilt * (y - 0.5)) / width).exp().atan()
        }
    })
}

fn trace_recenter_commutes(_: &VerifyOptions, rng: &mut ChaCha8Rng) -> crate::error::Result<Outcome> {
    let g = StripGrid::new(6.0, 121, 9)?;
    let off = rng.gen_range(-1.5..1.5);
    let f = ScalarField::from_fn(g, |x, y| 2.0 * (-(x - off) * (1.0 + 0.2 * y)).exp().atan());
    let (moved, shift) = recenter(&f, 1)?;
    let a = extract_trace(&moved, Side::Bottom);
    let b = shift_trace(&extract_trace(&f, Side::Bottom), shift);
    Ok(at_most(a.sup_distance(&b), 1e-12, format!("shift {shift:.6}")))
}

fn x_average_affine_exact(_: &VerifyOptions, rng: &mut ChaCha8Rng) -> crate::error::Result<Outcome> {
    let g = StripGrid::new(2.0, 11, 7)?;
    let (a, b) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
    let f = ScalarField::from_fn(g, |x, y| a * x.sin() + b * (1.0 + x * x) * y);
    let mut worst = 0.0f64;
    for i in 0..g.nx {
        let x = g.x(i);
        let want = a * x.sin() + 0.5 * b * (1.0 + x * x);
        worst = worst.max((x_average(&f, i)? - want).abs());
    }
    Ok(at_most(worst, 1e-13, ""))
}

fn gradient_consistency(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> crate::error::Result<Outcome> {
    let n = if opts.fast { 17 } else { 33 };
    let count = if opts.fast { 3 } else { 10 };
    let g = StripGrid::new(2.0, n, n)?;
    let mut worst = 0.0f64;
    for _ in 0..count {
        let p = WallParams::new(rng.gen_range(0.1..10.0), rng.gen_range(0.0..2.0), 1)?;
        let f = random_field(g, rng, 4.0);
        let (_, mut grad) = energy_and_grad(&f, &p);
        if opts.fault == Some(Fault::BoundaryGradientSign) {
            let b = boundary_gradient(&f, &p);
            for (v, bv) in grad.values.iter_mut().zip(&b.values) {
                *v -= 2.0 * bv;
            }
        }
        let dir = random_field(g, rng, 1.0);
        let t = 1e-5;
        let plus = ScalarField { grid: g, values: f.values.iter().zip(&dir.values).map(|(a, d)| a + t * d).collect() };
        let minus = ScalarField { grid: g, values: f.values.iter().zip(&dir.values).map(|(a, d)| a - t * d).collect() };
        let fd = (energy_f(&plus, &p).total - energy_f(&minus, &p).total) / (2.0 * t);
        let an: f64 = grad.values.iter().zip(&dir.values).map(|(a, b)| a * b).sum();
        worst = worst.max((fd - an).abs() / an.abs().max(1e-12));
    }
    Ok(at_most(worst, 1e-6, format!("{count} random fields on {n}x{n}")))
}

fn flip_symmetry(_: &VerifyOptions, rng: &mut ChaCha8Rng) -> crate::error::Result<Outcome> {
    let g = StripGrid::new(3.0, 31, 9)?;
    let mut worst = 0.0f64;
    for k in [1, 2] {
        let p = WallParams::new(rng.gen_range(0.5..5.0), rng.gen_range(0.0..1.0), k)?;
        let f = random_field(g, rng, 4.0);
        let kpi = p.left_value();
        let neg = f.map(|v| -v);
        let refl = ScalarField {
            grid: g,
            values: (0..g.len()).map(|q| kpi - f.get(g.nx - 1 - q % g.nx, q / g.nx)).collect(),
        };
        let e = energy_f(&f, &p).total;
        // The reflected field feels the field term through cos(k pi - t),
        // which equals cos t only for even k.
        let pe = if k % 2 == 0 { p } else { WallParams { h: 0.0, ..p } };
        let e0 = energy_f(&f, &pe).total;
        worst = worst.max((energy_f(&neg, &p).total - e).abs() / e);
        worst = worst.max((energy_f(&refl, &pe).total - e0).abs() / e0);
    }
    Ok(at_most(worst, 1e-14, "relative energy change under both flips"))
}

fn nonnegative_parts(_: &VerifyOptions, rng: &mut ChaCha8Rng) -> crate::error::Result<Outcome> {
    let g = StripGrid::new(2.0, 21, 7)?;
    let mut lowest = f64::INFINITY;
    for _ in 0..20 {
        let p = WallParams::new(rng.gen_range(0.01..50.0), rng.gen_range(0.0..5.0), 1)?;
        let e = energy_f(&random_field(g, rng, 10.0), &p);
        lowest = lowest.min(e.dirichlet).min(e.zeeman).min(e.boundary).min(e.nonlocal);
    }
    Ok(Outcome { passed: lowest >= 0.0, value: -lowest, tolerance: 0.0, detail: format!("smallest part {lowest:.3e}") })
}

fn solve_opts(tight: bool) -> SolveOptions {
    if tight {
        SolveOptions { grad_tol: 1e-10, energy_tol: 1e-20, ..Default::default() }
    } else {
        SolveOptions::default()
    }
}

fn residual_refines(opts: &VerifyOptions, _: &mut ChaCha8Rng) -> crate::error::Result<Outcome> {
    let p = WallParams::new(1.0, 0.0, 1)?;
    let (m, nx, ny) = if opts.fast { (4.0, 41, 5) } else { (6.0, 61, 7) };
    let sup = |nx: usize, ny: usize| -> crate::error::Result<f64> {
        let r = minimize_wall(&StripGrid::new(m, nx, ny)?, &p, &solve_opts(true))?;
        let e = el_residual(&r.field, &p);
        Ok(e.sup_bottom.max(e.sup_top))
    };
    let (a, b) = (sup(nx, ny)?, sup(2 * nx - 1, 2 * ny - 1)?);
    Ok(at_most(b / a, 0.6, format!("edge residual {a:.3e} -> {b:.3e}")))
}

fn monotone_descent_and_clamp(opts: &VerifyOptions, _: &mut ChaCha8Rng) -> crate::error::Result<Outcome> {
    let g = if opts.fast { StripGrid::new(4.0, 41, 7)? } else { StripGrid::new(6.0, 121, 11)? };
    let mut ok = true;
    let mut detail = String::new();
    for p in [WallParams::new(1.0, 0.0, 1)?, WallParams::new(1.0, 0.5, 2)?] {
        let r = minimize_wall(&g, &p, &SolveOptions { max_iters: 2000, ..Default::default() })?;
        let (lo, hi) = p.clamp_range();
        let mono = r.history.windows(2).all(|w| w[1] <= w[0]);
        let clamp = r.field.values.iter().all(|&v| v >= lo && v <= hi);
        ok &= mono && clamp;
        detail += &format!("k={}: monotone {mono}, clamped {clamp}; ", p.k);
    }
    Ok(holds(ok, detail))
}

fn uniqueness_up_to_translation(opts: &VerifyOptions, _: &mut ChaCha8Rng) -> crate::error::Result<Outcome> {
    let g = if opts.fast { StripGrid::new(6.0, 121, 11)? } else { StripGrid::new(8.0, 241, 21)? };
    let p = WallParams::new(1.0, 0.0, 1)?;
    let a = minimize_wall(&g, &p, &SolveOptions { init: Init::LinearRamp, ..solve_opts(true) })?;
    let b = minimize_wall(&g, &p, &SolveOptions { init: Init::TanhProfile, ..solve_opts(true) })?;
    Ok(at_most(a.field.sup_distance(&b.field), 1e-6, format!("energies {:.12} and {:.12}", a.energy.total, b.energy.total)))
}

fn flip_covariance(_: &VerifyOptions, _: &mut ChaCha8Rng) -> crate::error::Result<Outcome> {
    let g = StripGrid::new(4.0, 41, 7)?;
    let opts = SolveOptions { max_iters: 500, ..Default::default() };
    let a = minimize_wall(&g, &WallParams::new(1.0, 0.0, 1)?, &opts)?;
    let b = minimize_wall(&g, &WallParams::new(1.0, 0.0, -1)?, &opts)?;
    let worst = a.field.values.iter().zip(&b.field.values).fold(0.0f64, |m, (x, y)| m.max((x + y).abs()));
    Ok(at_most(worst, 0.0, "k and -k minimizers are exact negatives"))
}

fn kernel_symbol_pair(opts: &VerifyOptions, _: &mut ChaCha8Rng) -> crate::error::Result<Outcome> {
    let (eps, h, half) = (0.1, 1e-3, 25.0);
    let n = (half / h) as usize;
    let samples: Vec<f64> = (0..n).map(|i| kernel_k_eps((i as f64 + 0.5) * h, eps)).collect::<Result<_, _>>()?;
    let step = if opts.fast { 2.0 } else { 0.5 };
    let mut worst = 0.0f64;
    let mut k = 0.0;
    while k <= 10.0 {
        let s: f64 = samples.iter().enumerate().map(|(i, v)| 2.0 * h * v * (k * (i as f64 + 0.5) * h).cos()).sum();
        worst = worst.max((s - symbol_khat_eps(k, eps)?).abs());
        k += step;
    }
    Ok(at_most(worst, 1e-4, "midpoint transform on [-25, 25], spacing 1e-3"))
}

fn planar_profile_harmonic(_: &VerifyOptions, _: &mut ChaCha8Rng) -> crate::error::Result<Outcome> {
    let lap = |h: f64| {
        let f = |x: f64, y: f64| Profile::LargeGamma2d.angle(x, y);
        let mut worst = 0.0f64;
        for i in -10..=10 {
            for j in 3..=7 {
                let (x, y) = (0.1 * i as f64 + 0.05, 0.1 * j as f64);
                let l = (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - 4.0 * f(x, y)) / (h * h);
                worst = worst.max(l.abs());
            }
        }
        worst
    };
    let (a, b) = (lap(0.02), lap(0.01));
    Ok(at_most(b / a, 0.3, format!("5-point Laplacian {a:.3e} -> {b:.3e}")))
}

fn vortex_cauchy_residual(opts: &VerifyOptions, _: &mut ChaCha8Rng) -> crate::error::Result<Outcome> {
    let gamma = 10.0;
    let h = if opts.fast { 0.005 } else { 0.0025 };
    let p = Profile::BoundaryVortex { gamma };
    let t = Trace::sample_symmetric(20.0, h, |x| p.angle(x, 0.0));
    let r = residual_with_kernel(&t, gamma, Kernel::Cauchy)?;
    let sup = t.xs().iter().zip(&r.values).filter(|(x, _)| x.abs() <= 10.0).fold(0.0f64, |m, (_, v)| m.max(v.abs()));
    Ok(at_most(sup, 1e-2, format!("spacing {h}, |x| <= 10")))
}

fn random_flat_trace(rng: &mut ChaCha8Rng) -> Trace {
    let k = rng.gen_range(1..3) as f64;
    let (w, c) = (rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0));
    let bump = rng.gen_range(-0.3..0.3);
    Trace::sample_symmetric(15.0, 0.05, move |x| {
        let s = 0.5 * (1.0 - ((x - c) / w).tanh());
        k * PI * s + bump * (-(x - c) * (x - c)).exp()
    })
}

fn trace_energy_nonnegative(_: &VerifyOptions, rng: &mut ChaCha8Rng) -> crate::error::Result<Outcome> {
    let mut lowest = f64::INFINITY;
    for _ in 0..8 {
        let e = energy_fbar(&random_flat_trace(rng), rng.gen_range(0.1..10.0))?.energy.total;
        lowest = lowest.min(e);
    }
    let zero = energy_fbar(&Trace::sample(-5.0, 5.0, 101, |_| 2.0 * PI), 1.0)?.energy.total;
    Ok(Outcome {
        passed: lowest > 0.0 && zero.abs() <= 1e-20,
        value: zero.abs(),
        tolerance: 1e-20,
        detail: format!("smallest over random walls {lowest:.3e}, constant 2 pi gives {zero:.3e}"),
    })
}

fn trace_residual_is_gradient(_: &VerifyOptions, rng: &mut ChaCha8Rng) -> crate::error::Result<Outcome> {
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let tr = random_flat_trace(rng);
        let gamma = rng.gen_range(0.5..5.0);
        let n = tr.len();
        let res = residual_eq11(&tr, gamma)?;
        let dir: Vec<f64> = (0..n).map(|i| if i == 0 || i == n - 1 { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
        let s = 1e-5;
        let at = |sign: f64| -> crate::error::Result<f64> {
            let v = tr.values.iter().zip(&dir).map(|(a, d)| a + sign * s * d).collect();
            Ok(energy_fbar(&Trace::new(tr.x0, tr.spacing, v)?, gamma)?.energy.total)
        };
        let fd = (at(1.0)? - at(-1.0)?) / (2.0 * s);
        let an: f64 = res.values.iter().zip(&dir).map(|(r, d)| tr.spacing * r * d).sum();
        worst = worst.max((fd - an).abs() / an.abs());
    }
    Ok(at_most(worst, 1e-4, "directional derivative, spacing-weighted residual"))
}

fn relaxation_monotone(opts: &VerifyOptions, _: &mut ChaCha8Rng) -> crate::error::Result<Outcome> {
    let gamma = 10.0;
    let p = Profile::BoundaryVortex { gamma };
    let h = if opts.fast { 0.05 } else { 0.01 };
    let init = Trace::sample_symmetric(20.0, h, |x| p.angle(1.3 * x, 0.0));
    let r = relax_fbar(&init, gamma, &SolveOptions { max_iters: 5000, ..Default::default() })?;
    let ok = r.history.windows(2).all(|w| w[1] <= w[0]) && r.energy.total <= r.initial_energy;
    Ok(holds(ok, format!("{} accepted steps, {:.6} -> {:.6}", r.iterations, r.initial_energy, r.energy.total)))
}

fn extension_recovers_trace(_: &VerifyOptions, rng: &mut ChaCha8Rng) -> crate::error::Result<Outcome> {
    let g = StripGrid::new(4.0, 81, 11)?;
    let c = rng.gen_range(-1.0..1.0);
    let t = Trace::sample_symmetric(12.0, 0.01, |x| PI * 0.5 * (1.0 - (x - c).tanh()));
    let f = poisson_extend(&t, &g)?;
    let bottom = extract_trace(&f, Side::Bottom);
    let worst = (0..g.nx).fold(0.0f64, |m, i| m.max((bottom.values[i] - t.eval(g.x(i))).abs()));
    Ok(at_most(worst, 1e-6, "bottom row of the extension vs the trace"))
}

fn nonlocal_form_psd_symmetric(_: &VerifyOptions, rng: &mut ChaCha8Rng) -> crate::error::Result<Outcome> {
    let edges = vec![0.0, 0.05, 0.2, 0.5, 0.8, 0.95, 1.0];
    let p = MicroParams::with_eps(0.1)?;
    let mut mk = || {
        ChargeField::from_fn(0.0, 0.1, 24, edges.clone(), |x, _| if x < 0.2 || x > 2.2 { 0.0 } else { rng.gen_range(-1.0..1.0) })
    };
    let (a, b) = (mk()?, mk()?);
    let comb = |s: f64, x: &ChargeField, y: &ChargeField| ChargeField {
        values: x.values.iter().zip(&y.values).map(|(u, v)| u + s * v).collect(),
        ..x.clone()
    };
    let e = |f: &ChargeField| nonlocal_energy(f, &p);
    let (ea, eb) = (e(&a)?, e(&b)?);
    let ab = 0.25 * (e(&comb(1.0, &a, &b))? - e(&comb(-1.0, &a, &b))?);
    let ba = 0.25 * (e(&comb(1.0, &b, &a))? - e(&comb(-1.0, &b, &a))?);
    let asym = (ab - ba).abs() / (ea + eb);
    let psd = ea >= 0.0 && eb >= 0.0 && ab * ab <= ea * eb * (1.0 + 1e-12);
    Ok(Outcome {
        passed: psd && asym <= 1e-12,
        value: asym,
        tolerance: 1e-12,
        detail: format!("energies {ea:.6e}, {eb:.6e}; Cauchy-Schwarz {psd}"),
    })
}

fn lower_bound_calibrated(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> crate::error::Result<Outcome> {
    let g = StripGrid::new(4.0, 41, 11)?;
    let p = MicroParams::with_eps(0.01)?;
    let count = if opts.fast { 3 } else { 6 };
    let fields: Vec<ScalarField> =
        (0..count).map(|_| tilted_wall(g, rng.gen_range(0.3..1.5), rng.gen_range(-1.0..1.0))).collect();
    let beta = 0.5;
    let c = calibrate_lower_bound_constant(&fields, &p, beta)?;
    let mut ok = c.is_finite();
    for f in &fields {
        ok &= lower_bound_terms(f, &p)?.holds(beta, c);
    }
    Ok(holds(ok, format!("calibrated C = {c:.4e} at beta = {beta}, eps = {}", p.eps)))
}

fn exchange_identity(_: &VerifyOptions, rng: &mut ChaCha8Rng) -> crate::error::Result<Outcome> {
    let g = StripGrid::new(2.0, 21, 9)?;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let f = random_field(g, rng, 4.0);
        let a = exchange_from_components(&f);
        let b = energy_f(&f, &WallParams { gamma: 1.0, h: 0.0, k: 1 }).dirichlet;
        worst = worst.max((a - b).abs() / b);
    }
    Ok(at_most(worst, 1e-10, "chain-rule exchange vs angle Dirichlet energy"))
}

fn csv_round_trip(_: &VerifyOptions, rng: &mut ChaCha8Rng) -> crate::error::Result<Outcome> {
    let g = StripGrid::new(3.3, 17, 5)?;
    let f = random_field(g, rng, 7.0);
    let mut buf = Vec::new();
    write_field_csv(&f, &mut buf)?;
    let back = read_field_csv(buf.as_slice(), g)?;
    let t = Trace::sample_symmetric(4.0, 0.1, |x| (x * FRAC_PI_2).atan() / 3.0);
    let mut tbuf = Vec::new();
    write_trace_csv(&t, &mut tbuf)?;
    let tback = read_trace_csv(tbuf.as_slice(), TraceMeta::of(&t))?;
    let ok = f.values.iter().zip(&back.values).all(|(a, b)| a.to_bits() == b.to_bits())
        && t.values.iter().zip(&tback.values).all(|(a, b)| a.to_bits() == b.to_bits());
    Ok(holds(ok, "field and trace CSV round trips are bit-identical"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn injected_fault_is_caught_by_the_gradient_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let opts = VerifyOptions { fast: true, seed: 0, fault: Some(Fault::BoundaryGradientSign) };
        let out = gradient_consistency(&opts, &mut rng).unwrap();
        assert!(!out.passed, "value {}", out.value);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = gradient_consistency(&VerifyOptions { fault: None, ..opts }, &mut rng).unwrap();
        assert!(out.passed, "value {}", out.value);
    }

    #[test]
    fn fast_suite_passes() {
        let r = run_verification(&VerifyOptions { fast: true, seed: 7, fault: None });
        for c in &r.checks {
            eprintln!("{:32} {:5} {:.3e} <= {:.1e} ({:.2}s) {}", c.name, c.passed, c.value, c.tolerance, c.seconds, c.detail);
        }
        assert!(r.passed, "failures: {:?}", r.failures);
    }

    #[test]
    fn names_are_unique() {
        let mut n = check_names();
        n.sort();
        n.dedup();
        assert_eq!(n.len(), CHECKS.len());
    }
}
