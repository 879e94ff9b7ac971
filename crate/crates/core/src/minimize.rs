//! Discrete minimizers of the strip energy over the truncated classes.
//!
//! A class is fixed by `k`: the column at `x = -M` is held at `k*pi`, the
//! column at `x = M` at `0`, and all other nodes move inside
//! `[min(0, k pi), max(0, k pi)]`.

use serde::{Deserialize, Serialize};

use crate::descent::{descend, Constraints, DescentConfig, Objective, StopReason};
use crate::energy::{diff_slice, energy_f, eval_slice, mass_weights, EnergyBreakdown};
use crate::error::{Result, WallError};
use crate::grid::{build_grid, recenter, shift_field, ScalarField, StripGrid};
use crate::params::WallParams;

/// Starting configuration of a solve.
#[derive(Clone, Debug, Default)]
pub enum Init {
    /// `k pi * clamp((M - x) / 2M, 0, 1)`, independent of `y`.
    #[default]
    LinearRamp,
    /// A `tanh` step of width `1/(2 sqrt(gamma))`, independent of `y`.
    TanhProfile,
    Custom(ScalarField),
}

impl std::str::FromStr for Init {
    type Err = WallError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear_ramp" | "ramp" => Ok(Init::LinearRamp),
            "tanh_profile" | "tanh" => Ok(Init::TanhProfile),
            other => Err(WallError::InvalidParams(format!("unknown init '{other}' (linear_ramp, tanh_profile)"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub energy_tol: f64,
    pub init: Init,
    /// Recenter the iterate every this many steps; `0` disables it.
    pub recenter_every: usize,
    /// Solve on a grid with half the resolution first and prolong.
    pub continuation: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iters: 200_000,
            grad_tol: 1e-8,
            energy_tol: 1e-12,
            init: Init::LinearRamp,
            recenter_every: 0,
            continuation: false,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || !(self.grad_tol > 0.0) || !(self.energy_tol > 0.0) {
            return Err(WallError::InvalidParams("tolerances and max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub ok: bool,
    /// Largest forward difference with the wrong sign (0 if none).
    pub worst_violation: f64,
    /// Whether every forward difference on the central half of the grid
    /// has the expected sign strictly.
    pub strict_central: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub y_mirror_err: f64,
    pub x_point_err: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub rate_right: f64,
    pub rate_left: f64,
    pub fit_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropertyReport {
    pub monotone: MonotoneReport,
    pub symmetry: SymmetryReport,
    /// `None` when the tails are out of range for a fit; see `decay_error`.
    pub decay: Option<DecayReport>,
    pub decay_error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    /// Final iterate translated so its column average crosses `k pi/2` at
    /// `x = 0` (left untranslated if it has no crossing).
    pub field: ScalarField,
    /// Translation applied to the raw iterate.
    pub shift: f64,
    pub energy: EnergyBreakdown,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub grad_norm: f64,
    pub properties: PropertyReport,
    pub warnings: Vec<String>,
    /// Total energy after each accepted step of the final-grid solve.
    pub history: Vec<f64>,
}

/// Serializable summary of a [`SolveReport`] (everything except the field).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveSummary {
    pub params: WallParams,
    pub grid: StripGrid,
    pub energy: EnergyBreakdown,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub grad_norm: f64,
    pub shift: f64,
    pub properties: PropertyReport,
    pub warnings: Vec<String>,
}

impl SolveReport {
    pub fn summary(&self, params: &WallParams) -> SolveSummary {
        SolveSummary {
            params: *params,
            grid: self.field.grid,
            energy: self.energy,
            iterations: self.iterations,
            converged: self.converged,
            stop_reason: self.stop_reason,
            grad_norm: self.grad_norm,
            shift: self.shift,
            properties: self.properties.clone(),
            warnings: self.warnings.clone(),
        }
    }
}

/// Builds the initial field for a solve, with the caps already in place.
pub fn initial_field(grid: &StripGrid, params: &WallParams, init: &Init) -> Result<ScalarField> {
    let kpi = params.left_value();
    let m = grid.m;
    let mut f = match init {
        Init::LinearRamp => ScalarField::from_fn(*grid, |x, _| kpi * ((m - x) / (2.0 * m)).clamp(0.0, 1.0)),
        Init::TanhProfile => {
            let w = 2.0 * params.gamma.sqrt();
            ScalarField::from_fn(*grid, |x, _| 0.5 * kpi * (1.0 - (w * x).tanh()))
        }
        Init::Custom(c) => {
            if c.grid != *grid {
                return Err(WallError::ShapeMismatch("custom initial field lives on a different grid".into()));
            }
            if !c.is_finite() {
                return Err(WallError::Inadmissible("custom initial field has non-finite values".into()));
            }
            c.clone()
        }
    };
    apply_caps(&mut f, params);
    Ok(f)
}

pub(crate) fn apply_caps(f: &mut ScalarField, params: &WallParams) {
    let g = f.grid;
    let (lo, hi) = params.clamp_range();
    for v in f.values.iter_mut() {
        *v = v.clamp(lo, hi);
    }
    for j in 0..g.ny {
        f.set(0, j, params.left_value());
        f.set(g.nx - 1, j, 0.0);
    }
}

/// Descent configuration matched to the stiffness of the discrete energy.
pub(crate) fn strip_descent_config(grid: &StripGrid, params: &WallParams, opts: &SolveOptions) -> DescentConfig {
    let (hx, hy) = (grid.hx(), grid.hy());
    let stiff = 4.0 / (hx * hx) + 4.0 / (hy * hy) + 4.0 * params.gamma / hy + params.h;
    DescentConfig {
        max_iters: opts.max_iters,
        grad_tol: opts.grad_tol,
        energy_tol: opts.energy_tol,
        initial_step: 1.0 / stiff,
        ..DescentConfig::default()
    }
}

pub(crate) fn strip_constraints(grid: &StripGrid, params: &WallParams) -> Constraints {
    let mut free = vec![true; grid.len()];
    for j in 0..grid.ny {
        free[grid.idx(0, j)] = false;
        free[grid.idx(grid.nx - 1, j)] = false;
    }
    let (lower, upper) = params.clamp_range();
    Constraints { free, metric: mass_weights(grid), lower, upper }
}

/// Bilinear interpolation of a field onto another grid of the same strip.
pub fn prolong(field: &ScalarField, target: &StripGrid) -> ScalarField {
    let src = field.grid;
    ScalarField::from_fn(*target, |x, y| {
        let sx = ((x + src.m) / src.hx()).clamp(0.0, (src.nx - 1) as f64);
        let sy = (y / src.hy()).clamp(0.0, (src.ny - 1) as f64);
        let i = (sx.floor() as usize).min(src.nx - 2);
        let j = (sy.floor() as usize).min(src.ny - 2);
        let (tx, ty) = (sx - i as f64, sy - j as f64);
        let a = (1.0 - tx) * field.get(i, j) + tx * field.get(i + 1, j);
        let b = (1.0 - tx) * field.get(i, j + 1) + tx * field.get(i + 1, j + 1);
        (1.0 - ty) * a + ty * b
    })
}

fn admissibility_warnings(grid: &StripGrid, params: &WallParams) -> Vec<String> {
    let mut w = Vec::new();
    if params.h == 0.0 && grid.m * params.gamma.sqrt() < 5.0 {
        w.push(format!(
            "M*sqrt(gamma) = {:.3} < 5: the truncation may be too short for the wall",
            grid.m * params.gamma.sqrt()
        ));
    }
    if params.k.abs() != params.minimal_class() {
        w.push(format!(
            "|k| = {} is not the minimizing class {} for h = {}; the infimum over the full line is not attained",
            params.k.abs(),
            params.minimal_class(),
            params.h
        ));
    }
    w
}

/// Minimizes the discrete energy over the truncated class `k`.
pub fn minimize_wall(grid: &StripGrid, params: &WallParams, opts: &SolveOptions) -> Result<SolveReport> {
    params.validate()?;
    opts.validate()?;
    if params.k == 0 {
        return Err(WallError::InvalidParams("k = 0 has no wall; the constant field is the minimizer".into()));
    }
    let mut x0 = initial_field(grid, params, &opts.init)?;
    let mut total_iters = 0;
    if opts.continuation && grid.nx >= 9 && grid.ny >= 5 && grid.nx % 2 == 1 && grid.ny % 2 == 1 {
        let coarse = build_grid(grid.m, (grid.nx - 1) / 2 + 1, (grid.ny - 1) / 2 + 1)?;
        let cinit = match &opts.init {
            Init::Custom(c) => Init::Custom(prolong(c, &coarse)),
            other => other.clone(),
        };
        let copts = SolveOptions { init: cinit, continuation: false, recenter_every: 0, ..opts.clone() };
        let cr = run_descent(&coarse, params, &copts, initial_field(&coarse, params, &copts.init)?);
        total_iters += cr.1;
        x0 = prolong(&cr.0, grid);
        apply_caps(&mut x0, params);
    }

    let (raw, iters, stop, grad_norm, history) = run_descent(grid, params, opts, x0);
    total_iters += iters;
    let energy = energy_f(&raw, params);
    let mut warnings = admissibility_warnings(grid, params);
    let (field, shift) = match recenter(&raw, params.k) {
        Ok(r) => r,
        Err(e) => {
            warnings.push(format!("final field not recentered: {e}"));
            (raw, 0.0)
        }
    };
    let properties = property_report(&field, params.k);
    Ok(SolveReport {
        field,
        shift,
        energy,
        iterations: total_iters,
        converged: stop.is_converged(),
        stop_reason: stop,
        grad_norm,
        properties,
        warnings,
        history,
    })
}

struct StripObjective {
    grid: StripGrid,
    params: WallParams,
}

impl Objective for StripObjective {
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        eval_slice(&self.grid, &self.params, x, Some(grad)).total
    }

    fn difference(&self, a: &[f64], b: &[f64]) -> Option<f64> {
        Some(diff_slice(&self.grid, &self.params, a, b))
    }
}

pub(crate) type DescentResult = (ScalarField, usize, StopReason, f64, Vec<f64>);

fn run_descent(grid: &StripGrid, params: &WallParams, opts: &SolveOptions, x0: ScalarField) -> DescentResult {
    let obj = StripObjective { grid: *grid, params: *params };
    run_descent_with(&obj, grid, params, opts, x0)
}

/// Runs the capped, clamped strip descent on any objective over the grid
/// values.
pub(crate) fn run_descent_with(
    obj: &dyn Objective,
    grid: &StripGrid,
    params: &WallParams,
    opts: &SolveOptions,
    x0: ScalarField,
) -> DescentResult {
    let cfg = strip_descent_config(grid, params, opts);
    let cons = strip_constraints(grid, params);
    let g = *grid;
    let p = *params;
    let k = params.k;
    let every = opts.recenter_every;
    let mut hook = move |it: usize, x: &mut [f64]| -> bool {
        if every == 0 || it % every != 0 {
            return false;
        }
        let f = ScalarField { grid: g, values: x.to_vec() };
        match crate::grid::first_crossing(&f, k as f64 * std::f64::consts::FRAC_PI_2) {
            Some(s) if s.abs() > 0.5 * g.hx() => {
                let mut moved = shift_field(&f, s);
                apply_caps(&mut moved, &p);
                x.copy_from_slice(&moved.values);
                true
            }
            _ => false,
        }
    };
    let out = descend(obj, x0.values, &cons, &cfg, Some(&mut hook));
    (ScalarField { grid: *grid, values: out.x }, out.iterations, out.stop, out.grad_norm, out.history)
}

/// Monotonicity in `x` with the given sign (`-1` for a decreasing wall),
/// allowing wrong-way steps up to `1e-12`.
pub fn check_monotone(field: &ScalarField, sign: i32) -> MonotoneReport {
    check_monotone_tol(field, sign, 1e-12)
}

/// [`check_monotone`] with an explicit tolerance for wrong-way steps.
pub fn check_monotone_tol(field: &ScalarField, sign: i32, tol: f64) -> MonotoneReport {
    let g = field.grid;
    let s = if sign < 0 { -1.0 } else { 1.0 };
    let (c0, c1) = (g.nx / 4, g.nx - g.nx / 4);
    let mut worst = 0.0f64;
    let mut strict = true;
    for j in 0..g.ny {
        for i in 0..g.nx - 1 {
            // Positive `d` means the wrong direction.
            let d = -s * (field.get(i + 1, j) - field.get(i, j));
            worst = worst.max(d);
            if i >= c0 && i + 1 < c1 && d >= 0.0 {
                strict = false;
            }
        }
    }
    MonotoneReport { ok: worst <= tol, worst_violation: worst.max(0.0), strict_central: strict }
}

/// Sup-norm defects of the two reflection symmetries of a centered wall.
pub fn check_symmetry(field: &ScalarField, k: i32) -> SymmetryReport {
    let g = field.grid;
    let kpi = k as f64 * std::f64::consts::PI;
    let mut ym = 0.0f64;
    let mut xp = 0.0f64;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let v = field.get(i, j);
            ym = ym.max((v - field.get(i, g.ny - 1 - j)).abs());
            xp = xp.max((v - (kpi - field.get(g.nx - 1 - i, j))).abs());
        }
    }
    SymmetryReport { y_mirror_err: ym, x_point_err: xp }
}

/// Least-squares exponential fits of both tails against the distance from
/// the center.
///
/// The fit uses the columns with `|x|` between `M/2` and `7M/8`: the outer
/// quarter of the grid minus the stretch next to the caps, where the hard
/// Dirichlet condition bends the tail away from a pure exponential.
pub fn check_decay(field: &ScalarField, k: i32) -> Result<DecayReport> {
    let g = field.grid;
    let kpi = k as f64 * std::f64::consts::PI;
    let (lo, hi) = (0.5 * g.m, 0.875 * g.m);
    let mut right = Vec::new();
    let mut left = Vec::new();
    for i in 0..g.nx {
        let x = g.x(i);
        let t = x.abs();
        if t < lo - 1e-12 || t > hi + 1e-12 {
            continue;
        }
        if x > 0.0 {
            let a = (0..g.ny).map(|j| field.get(i, j).abs()).fold(0.0, f64::max);
            right.push((t, a));
        } else {
            let a = (0..g.ny).map(|j| (kpi - field.get(i, j)).abs()).fold(0.0, f64::max);
            left.push((t, a));
        }
    }
    let fit = |pts: &[(f64, f64)], side: &str| -> Result<(f64, f64)> {
        if pts.len() < 3 {
            return Err(WallError::TruncationTooSmall(format!("fewer than three {side} tail columns")));
        }
        for &(t, a) in pts {
            if !(a > 0.0 && a < std::f64::consts::FRAC_PI_4) {
                return Err(WallError::TruncationTooSmall(format!(
                    "{side} tail value {a:.3e} at |x| = {t:.3} is outside (0, pi/4)"
                )));
            }
        }
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let ml = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
        let (mut stt, mut stl) = (0.0, 0.0);
        for &(t, a) in pts {
            stt += (t - mt) * (t - mt);
            stl += (t - mt) * (a.ln() - ml);
        }
        let rate = stl / stt;
        let rss: f64 = pts.iter().map(|&(t, a)| (a.ln() - ml - rate * (t - mt)).powi(2)).sum();
        Ok((rate, (rss / n).sqrt()))
    };
    let (rate_right, rr) = fit(&right, "right")?;
    let (rate_left, rl) = fit(&left, "left")?;
    Ok(DecayReport { rate_right, rate_left, fit_residual: rr.max(rl) })
}

pub fn property_report(field: &ScalarField, k: i32) -> PropertyReport {
    let monotone = check_monotone(field, if k > 0 { -1 } else { 1 });
    let symmetry = check_symmetry(field, k);
    let (decay, decay_error) = match check_decay(field, k) {
        Ok(d) => (Some(d), None),
        Err(e) => (None, Some(e.to_string())),
    };
    PropertyReport { monotone, symmetry, decay, decay_error }
}

/// Grid resolution used by [`infimum_estimate`] for every `M`.
#[derive(Clone, Copy, Debug)]
pub struct GridDensity {
    /// Cells per unit length in `x`.
    pub cells_per_unit: f64,
    pub ny: usize,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct InfimumRow {
    #[serde(rename = "M")]
    pub m: f64,
    pub energy: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Minimized energies for a list of truncation lengths at a fixed spacing.
pub fn infimum_estimate(
    params: &WallParams,
    m_list: &[f64],
    density: GridDensity,
    opts: &SolveOptions,
) -> Result<Vec<InfimumRow>> {
    let mut rows = Vec::with_capacity(m_list.len());
    for &m in m_list {
        let cells = (2.0 * m * density.cells_per_unit).round() as usize;
        // Even cell count keeps x = 0 on a node.
        let nx = cells + cells % 2 + 1;
        let grid = build_grid(m, nx, density.ny)?;
        let r = minimize_wall(&grid, params, opts)?;
        rows.push(InfimumRow { m, energy: r.energy.total, converged: r.converged, iterations: r.iterations });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_k_zero() {
        let g = build_grid(5.0, 21, 5).unwrap();
        let p = WallParams::new(1.0, 0.0, 0).unwrap();
        assert!(minimize_wall(&g, &p, &SolveOptions::default()).is_err());
    }

    #[test]
    fn initial_fields_satisfy_caps() {
        let g = build_grid(5.0, 21, 5).unwrap();
        let p = WallParams::new(1.0, 0.0, 2).unwrap();
        for init in [Init::LinearRamp, Init::TanhProfile] {
            let f = initial_field(&g, &p, &init).unwrap();
            for j in 0..g.ny {
                assert_eq!(f.get(0, j), 2.0 * PI);
                assert_eq!(f.get(g.nx - 1, j), 0.0);
            }
            assert!(f.values.iter().all(|&v| (0.0..=2.0 * PI).contains(&v)));
        }
    }

    #[test]
    fn monotone_checks() {
        let g = build_grid(6.0, 121, 5).unwrap();
        let wall = ScalarField::from_fn(g, |x, _| PI - 2.0 * (2.0 * x).exp().atan());
        let r = check_monotone(&wall, -1);
        assert!(r.ok && r.strict_central);
        let s = ScalarField::from_fn(g, |x, _| x.sin());
        assert!(!check_monotone(&s, -1).ok);
    }

    #[test]
    fn symmetry_checks() {
        let g = build_grid(3.0, 31, 9).unwrap();
        let flat = ScalarField::from_fn(g, |x, _| x.cos());
        assert_eq!(check_symmetry(&flat, 1).y_mirror_err, 0.0);
        let sym = ScalarField::from_fn(g, |x, y| PI / 2.0 + x * (1.0 + (y - 0.5) * (y - 0.5)));
        let r = check_symmetry(&sym, 1);
        assert!(r.y_mirror_err < 1e-15 && r.x_point_err < 1e-14, "{r:?}");
    }

    #[test]
    fn decay_of_exact_exponential() {
        let g = build_grid(8.0, 161, 5).unwrap();
        let f = ScalarField::from_fn(g, |x, _| if x >= 0.0 { (-x).exp() } else { PI - x.exp() });
        let d = check_decay(&f, 1).unwrap();
        assert!((d.rate_right + 1.0).abs() < 1e-3, "{d:?}");
        assert!((d.rate_left + 1.0).abs() < 1e-3, "{d:?}");
        assert!(d.fit_residual < 1e-10);
        assert!(matches!(check_decay(&ScalarField::constant(g, PI / 2.0), 1), Err(WallError::TruncationTooSmall(_))));
    }

    #[test]
    fn prolongation_is_exact_for_bilinear_fields() {
        let c = build_grid(2.0, 9, 5).unwrap();
        let f = build_grid(2.0, 17, 9).unwrap();
        let lin = ScalarField::from_fn(c, |x, y| 1.0 + 2.0 * x - y + 0.5 * x * y);
        let p = prolong(&lin, &f);
        let want = ScalarField::from_fn(f, |x, y| 1.0 + 2.0 * x - y + 0.5 * x * y);
        assert!(p.sup_distance(&want) < 1e-13);
    }

    #[test]
    fn small_solve_converges_and_is_symmetric() {
        let g = build_grid(6.0, 121, 11).unwrap();
        let p = WallParams::new(1.0, 0.0, 1).unwrap();
        let r = minimize_wall(&g, &p, &SolveOptions::default()).unwrap();
        assert!(r.converged, "{:?}", r.stop_reason);
        assert!(r.energy.total > 0.0 && r.energy.total <= 4.0);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        let s = r.properties.symmetry;
        assert!(s.y_mirror_err < 1e-6 && s.x_point_err < 1e-6, "{s:?}");
        assert!(r.properties.monotone.ok);
        let (lo, hi) = p.clamp_range();
        assert!(r.field.values.iter().all(|&v| v >= lo && v <= hi));
    }

    #[test]
    fn flip_covariance() {
        let g = build_grid(4.0, 41, 7).unwrap();
        let p = WallParams::new(1.0, 0.0, 1).unwrap();
        let q = WallParams::new(1.0, 0.0, -1).unwrap();
        let opts = SolveOptions { max_iters: 300, ..Default::default() };
        let a = minimize_wall(&g, &p, &opts).unwrap();
        let b = minimize_wall(&g, &q, &opts).unwrap();
        assert_eq!(a.iterations, b.iterations);
        assert!(a.field.values.iter().zip(&b.field.values).all(|(x, y)| *x == -*y));
    }
}
