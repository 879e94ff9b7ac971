//! The one-dimensional reduction of the strip energy to its trace on `y = 0`:
//!
//! ```text
//! Fbar(t) = 1/4 int int K(x - x') (t(x) - t(x'))^2 dx dx' + gamma int sin^2 t
//! ```
//!
//! A trace is a uniform sample on a window, extended by its end values.
//! Double integrals become lattice sums over all of `Z`. Pairs with one or
//! both points in a tail are summed in closed form from precomputed tail
//! sums of the kernel, so no truncation error comes from the window. The
//! lattice sum misses the `O(h)` contribution of the near-diagonal cell; a
//! centered-difference correction restores second order.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{kernel_k, poisson_p_cdf};
use crate::descent::{descend, Constraints, DescentConfig, Objective, StopReason};
use crate::energy::{energy_f, EnergyBreakdown};
use crate::error::{Result, WallError};
use crate::grid::{ScalarField, StripGrid, Trace};
use crate::minimize::SolveOptions;
use crate::params::WallParams;
use crate::sum::pairwise_sum;

/// Maximum end slope of a trace whose tails count as flat.
pub const TAIL_SLOPE_TOL: f64 = 1e-3;
/// Tolerance for a tail value to count as a multiple of `pi`.
pub const TAIL_LEVEL_TOL: f64 = 1e-6;
/// Required overlap of a trace window beyond the grid on each side.
pub const EXTENSION_MARGIN: f64 = 5.0;

/// Interaction kernel of the lattice sums.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// The strip kernel `pi cosh(pi x) / sinh^2(pi x)`.
    Strip,
    /// Its large-`gamma` approximation `1 / (pi x^2)`. Only residuals are
    /// available: the energy of a wall diverges logarithmically.
    Cauchy,
}

/// Kernel samples `k[d] = K(d h)` and tail sums for a window of `n` points.
struct Lattice {
    h: f64,
    k: Vec<f64>,
    /// `s[m] = sum_{d >= m} k[d]` for `1 <= m <= n + 1`.
    s: Vec<f64>,
    /// `sum_{d > n} (d - n) k[d]`, the weight of left-tail/right-tail pairs.
    pair_tail: f64,
}

/// `sum_{d >= m} 1/d^2`.
fn trigamma_int(m: usize) -> f64 {
    const SWITCH: usize = 12;
    let mut head = 0.0;
    let mut m = m.max(1);
    while m < SWITCH {
        head += 1.0 / (m * m) as f64;
        m += 1;
    }
    let x = m as f64;
    let x2 = x * x;
    head + 1.0 / x + 1.0 / (2.0 * x2) + 1.0 / (6.0 * x2 * x) - 1.0 / (30.0 * x2 * x2 * x) + 1.0 / (42.0 * x2 * x2 * x2 * x)
}

impl Lattice {
    fn new(kernel: Kernel, h: f64, n: usize) -> Lattice {
        match kernel {
            Kernel::Strip => {
                // K(15) is below 1e-19; farther samples do not register.
                let dmax = ((15.0 / h).ceil() as usize).max(1);
                let mut k = vec![0.0; dmax + 1];
                for (d, kd) in k.iter_mut().enumerate().skip(1) {
                    *kd = kernel_k(d as f64 * h).expect("nonzero argument");
                }
                let len = dmax.max(n + 1) + 2;
                let mut s = vec![0.0; len];
                for m in (1..len - 1).rev() {
                    s[m] = s[m + 1] + k.get(m).copied().unwrap_or(0.0);
                }
                let pair_tail = k.iter().enumerate().skip(n + 1).map(|(d, kd)| (d - n) as f64 * kd).sum();
                s.truncate(n + 2);
                Lattice { h, k, s, pair_tail }
            }
            Kernel::Cauchy => {
                let c = 1.0 / (PI * h * h);
                let k = (0..=n).map(|d| if d == 0 { 0.0 } else { c / (d * d) as f64 }).collect();
                let s = (0..n + 2).map(|m| if m == 0 { 0.0 } else { c * trigamma_int(m) }).collect();
                Lattice { h, k, s, pair_tail: f64::INFINITY }
            }
        }
    }

    /// Band of in-window offsets that carry weight.
    fn band(&self, n: usize) -> usize {
        (self.k.len() - 1).min(n.saturating_sub(1))
    }

    /// `sum_{j in Z} k[|i - j|] (t_i - t_j)` with constant tails `tl`, `tr`.
    fn apply(&self, t: &[f64], tl: f64, tr: f64) -> Vec<f64> {
        let n = t.len();
        let band = self.band(n);
        (0..n)
            .into_par_iter()
            .map(|i| {
                let ti = t[i];
                let mut acc = 0.0;
                for d in 1..=band.min(i) {
                    acc += self.k[d] * (ti - t[i - d]);
                }
                for d in 1..=band.min(n - 1 - i) {
                    acc += self.k[d] * (ti - t[i + d]);
                }
                acc + (ti - tl) * self.s[i + 1] + (ti - tr) * self.s[n - i]
            })
            .collect()
    }

    /// Lattice part of the energy, `1/4 sum_{i != j} h^2 k (t_i - t_j)^2`.
    fn energy(&self, t: &[f64], tl: f64, tr: f64) -> f64 {
        let n = t.len();
        let band = self.band(n);
        let rows: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let ti = t[i];
                let mut acc = 0.0;
                for d in 1..=band.min(n - 1 - i) {
                    let e = ti - t[i + d];
                    acc += self.k[d] * e * e;
                }
                acc + 0.5 * ((ti - tl).powi(2) * self.s[i + 1] + (ti - tr).powi(2) * self.s[n - i])
            })
            .collect();
        let h2 = self.h * self.h;
        h2 * (0.5 * pairwise_sum(&rows) + 0.5 * (tl - tr).powi(2) * self.pair_tail)
    }

    /// `energy(b) - energy(a)` for equal tails, as products of differences.
    fn energy_diff(&self, a: &[f64], b: &[f64], tl: f64, tr: f64) -> f64 {
        let n = a.len();
        let band = self.band(n);
        let rows: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                for d in 1..=band.min(n - 1 - i) {
                    let ea = a[i] - a[i + d];
                    let eb = b[i] - b[i + d];
                    acc += self.k[d] * (eb - ea) * (eb + ea);
                }
                let di = b[i] - a[i];
                acc + 0.5 * di * ((b[i] + a[i] - 2.0 * tl) * self.s[i + 1] + (b[i] + a[i] - 2.0 * tr) * self.s[n - i])
            })
            .collect();
        0.5 * self.h * self.h * pairwise_sum(&rows)
    }
}

fn ext(t: &[f64], i: isize, tl: f64, tr: f64) -> f64 {
    if i < 0 {
        tl
    } else if i as usize >= t.len() {
        tr
    } else {
        t[i as usize]
    }
}

/// Near-diagonal correction `(1/16 pi) sum_i (t_{i+1} - t_{i-1})^2`.
fn diag_energy(t: &[f64], tl: f64, tr: f64) -> f64 {
    let n = t.len() as isize;
    let terms: Vec<f64> = (-1..=n).map(|i| (ext(t, i + 1, tl, tr) - ext(t, i - 1, tl, tr)).powi(2)).collect();
    pairwise_sum(&terms) / (16.0 * PI)
}

fn diag_diff(a: &[f64], b: &[f64], tl: f64, tr: f64) -> f64 {
    let n = a.len() as isize;
    let terms: Vec<f64> = (-1..=n)
        .map(|i| {
            let da = ext(a, i + 1, tl, tr) - ext(a, i - 1, tl, tr);
            let db = ext(b, i + 1, tl, tr) - ext(b, i - 1, tl, tr);
            (db - da) * (db + da)
        })
        .collect();
    pairwise_sum(&terms) / (16.0 * PI)
}

fn diag_grad(t: &[f64], tl: f64, tr: f64, i: usize) -> f64 {
    let i = i as isize;
    (2.0 * t[i as usize] - ext(t, i - 2, tl, tr) - ext(t, i + 2, tl, tr)) / (8.0 * PI)
}

fn trapezoid_weight(n: usize, i: usize, h: f64) -> f64 {
    if i == 0 || i == n - 1 {
        0.5 * h
    } else {
        h
    }
}

fn penalty(t: &[f64], h: f64, gamma: f64) -> f64 {
    let n = t.len();
    let terms: Vec<f64> = t.iter().enumerate().map(|(i, v)| trapezoid_weight(n, i, h) * v.sin().powi(2)).collect();
    gamma * pairwise_sum(&terms)
}

fn nearest_multiple(v: f64) -> f64 {
    (v / PI).round() * PI
}

/// Errors unless both ends of the trace are flat; returns warnings for tail
/// values that are not multiples of `pi`.
fn check_tails(trace: &Trace) -> Result<Vec<String>> {
    let n = trace.len();
    if n < 3 {
        return Err(WallError::InvalidGrid("a trace needs at least three samples here".into()));
    }
    let h = trace.spacing;
    let left = (trace.values[1] - trace.values[0]).abs() / h;
    let right = (trace.values[n - 1] - trace.values[n - 2]).abs() / h;
    if left > TAIL_SLOPE_TOL || right > TAIL_SLOPE_TOL {
        return Err(WallError::NonFlatTails(format!(
            "end slopes {left:.3e} and {right:.3e} exceed {TAIL_SLOPE_TOL:e}; widen the window"
        )));
    }
    let mut warnings = Vec::new();
    for (side, v) in [("left", trace.left_value()), ("right", trace.right_value())] {
        if (v - nearest_multiple(v)).abs() > TAIL_LEVEL_TOL {
            warnings.push(format!(
                "{side} tail {v:.6} is not a multiple of pi; its penalty outside the window is not counted"
            ));
        }
    }
    Ok(warnings)
}

/// Energy of a trace together with precondition warnings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceEnergy {
    pub energy: EnergyBreakdown,
    pub warnings: Vec<String>,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(WallError::InvalidParams(format!("gamma must be positive, got {gamma}")));
    }
    Ok(())
}

/// Reduced energy of a trace. The kernel part is reported as `nonlocal`
/// and the anisotropy part as `boundary`.
pub fn energy_fbar(trace: &Trace, gamma: f64) -> Result<TraceEnergy> {
    check_gamma(gamma)?;
    let warnings = check_tails(trace)?;
    let (t, tl, tr) = (&trace.values[..], trace.left_value(), trace.right_value());
    let lat = Lattice::new(Kernel::Strip, trace.spacing, t.len());
    let nonlocal = lat.energy(t, tl, tr) + diag_energy(t, tl, tr);
    let boundary = penalty(t, trace.spacing, gamma);
    Ok(TraceEnergy { energy: EnergyBreakdown::new(0.0, 0.0, boundary, nonlocal), warnings })
}

/// Pointwise residual of the trace Euler-Lagrange equation
/// `1/2 int (2t(x) - t(x - s) - t(x + s)) K(s) ds + gamma sin 2t(x)`.
pub fn residual_eq11(trace: &Trace, gamma: f64) -> Result<Trace> {
    residual_with_kernel(trace, gamma, Kernel::Strip)
}

/// [`residual_eq11`] with a choice of kernel. The values are the exact
/// gradient of the discrete energy divided by the spacing.
pub fn residual_with_kernel(trace: &Trace, gamma: f64, kernel: Kernel) -> Result<Trace> {
    check_gamma(gamma)?;
    check_tails(trace)?;
    let h = trace.spacing;
    let (t, tl, tr) = (&trace.values[..], trace.left_value(), trace.right_value());
    let lat = Lattice::new(kernel, h, t.len());
    let l = lat.apply(t, tl, tr);
    let values = (0..t.len()).map(|i| h * l[i] + diag_grad(t, tl, tr, i) / h + gamma * (2.0 * t[i]).sin()).collect();
    Ok(Trace { x0: trace.x0, spacing: h, values })
}

/// Harmonic extension of a trace into the strip, symmetric about `y = 1/2`.
///
/// The trace is read as piecewise constant on cells centered at its
/// samples. Its convolution with the Poisson kernel is then a finite sum of
/// jumps times the kernel's closed-form distribution function, so constant
/// data is reproduced exactly. The rows `y = 0` and `y = 1` are the trace
/// itself.
pub fn poisson_extend(trace: &Trace, grid: &StripGrid) -> Result<ScalarField> {
    let (a, b) = trace.window();
    if a > -grid.m - EXTENSION_MARGIN || b < grid.m + EXTENSION_MARGIN {
        return Err(WallError::InsufficientMargin(format!(
            "trace window [{a}, {b}] must cover [{}, {}]",
            -grid.m - EXTENSION_MARGIN,
            grid.m + EXTENSION_MARGIN
        )));
    }
    // Beyond this distance the distribution function is 0 or 1 to rounding.
    const REACH: f64 = 12.0;
    let h = trace.spacing;
    let t = &trace.values;
    let n = t.len();
    let jumps: Vec<f64> = (0..n - 1).map(|j| t[j + 1] - t[j]).collect();
    let edge = |j: usize| trace.x0 + (j as f64 + 0.5) * h;
    let half_rows = (grid.ny - 1) / 2 + 1;
    let rows: Vec<Vec<f64>> = (0..half_rows)
        .into_par_iter()
        .map(|j| {
            let y = grid.y(j);
            (0..grid.nx)
                .map(|i| {
                    let x = grid.x(i);
                    if j == 0 {
                        return trace.eval(x);
                    }
                    let lo = (((x - REACH - trace.x0) / h - 0.5).ceil().max(0.0) as usize).min(n - 1);
                    let hi = (((x + REACH - trace.x0) / h - 0.5).floor().max(-1.0) + 1.0) as usize;
                    let hi = hi.min(n - 1);
                    let mut acc = 0.0;
                    for (jj, &jump) in jumps.iter().enumerate().take(hi).skip(lo) {
                        acc += jump * poisson_p_cdf(x - edge(jj), y);
                    }
                    t[lo] + acc
                })
                .collect()
        })
        .collect();
    let mut values = vec![0.0; grid.len()];
    for j in 0..grid.ny {
        let src = if j < half_rows { j } else { grid.ny - 1 - j };
        values[j * grid.nx..(j + 1) * grid.nx].copy_from_slice(&rows[src]);
    }
    ScalarField::new(*grid, values)
}

/// Result of comparing the strip energy of the extension with twice the
/// trace energy.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FactorTwo {
    pub f_2d: f64,
    pub fbar: f64,
    pub rel_err: f64,
}

/// Evaluates the strip energy (`h = 0`) of [`poisson_extend`] and compares it
/// with `2 * energy_fbar`.
pub fn factor_two_check(trace: &Trace, gamma: f64, grid: &StripGrid) -> Result<FactorTwo> {
    let field = poisson_extend(trace, grid)?;
    let params = WallParams::new(gamma, 0.0, 1)?;
    let f_2d = energy_f(&field, &params).total;
    let fbar = energy_fbar(trace, gamma)?.energy.total;
    let scale = (2.0 * fbar).abs().max(f_2d.abs());
    let rel_err = if scale == 0.0 { 0.0 } else { (f_2d - 2.0 * fbar).abs() / scale };
    Ok(FactorTwo { f_2d, fbar, rel_err })
}

/// Outcome of [`relax_fbar`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RelaxReport {
    pub trace: Trace,
    pub energy: EnergyBreakdown,
    pub initial_energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub grad_norm: f64,
    /// Sup norm of [`residual_eq11`] over the free nodes.
    pub residual_sup: f64,
    pub history: Vec<f64>,
    pub warnings: Vec<String>,
}

struct TraceObjective {
    lat: Lattice,
    gamma: f64,
    tl: f64,
    tr: f64,
}

impl TraceObjective {
    fn value(&self, t: &[f64]) -> f64 {
        self.lat.energy(t, self.tl, self.tr) + diag_energy(t, self.tl, self.tr) + penalty(t, self.lat.h, self.gamma)
    }
}

impl Objective for TraceObjective {
    fn value_grad(&self, t: &[f64], grad: &mut [f64]) -> f64 {
        let n = t.len();
        let h = self.lat.h;
        let l = self.lat.apply(t, self.tl, self.tr);
        for i in 0..n {
            grad[i] = h * h * l[i]
                + diag_grad(t, self.tl, self.tr, i)
                + self.gamma * trapezoid_weight(n, i, h) * (2.0 * t[i]).sin();
        }
        self.value(t)
    }

    fn difference(&self, a: &[f64], b: &[f64]) -> Option<f64> {
        let n = a.len();
        let h = self.lat.h;
        let pen: Vec<f64> = (0..n)
            .map(|i| trapezoid_weight(n, i, h) * (b[i] - a[i]).sin() * (b[i] + a[i]).sin())
            .collect();
        Some(
            self.lat.energy_diff(a, b, self.tl, self.tr)
                + diag_diff(a, b, self.tl, self.tr)
                + self.gamma * pairwise_sum(&pen),
        )
    }
}

/// Minimizes the discrete trace energy from `init`, holding the end values
/// at their nearest multiples of `pi` and the sample nearest to `x = 0` at
/// their midpoint.
pub fn relax_fbar(init: &Trace, gamma: f64, opts: &SolveOptions) -> Result<RelaxReport> {
    check_gamma(gamma)?;
    opts.validate()?;
    let mut warnings = check_tails(init)?;
    let n = init.len();
    let h = init.spacing;
    let (tl, tr) = (nearest_multiple(init.left_value()), nearest_multiple(init.right_value()));
    for (side, v, m) in [("left", init.left_value(), tl), ("right", init.right_value(), tr)] {
        if (v - m).abs() > 0.05 {
            return Err(WallError::Inadmissible(format!("{side} tail {v} is not within 0.05 of a multiple of pi")));
        }
    }
    if tl == tr {
        return Err(WallError::Inadmissible("both tails sit at the same multiple of pi; there is no wall".into()));
    }
    let pin = (-init.x0 / h).round();
    if pin < 1.0 || pin >= (n - 1) as f64 {
        return Err(WallError::Inadmissible("x = 0 is not inside the trace window".into()));
    }
    let pin = pin as usize;
    if (init.x(pin)).abs() > 1e-9 * h.max(1.0) {
        warnings.push(format!("no sample at x = 0; pinning the sample at x = {:.3e}", init.x(pin)));
    }
    let mut x0 = init.values.clone();
    x0[0] = tl;
    x0[n - 1] = tr;
    x0[pin] = 0.5 * (tl + tr);

    let obj = TraceObjective { lat: Lattice::new(Kernel::Strip, h, n), gamma, tl, tr };
    let mut free = vec![true; n];
    free[0] = false;
    free[n - 1] = false;
    free[pin] = false;
    let cons = Constraints { free, metric: vec![h; n], lower: f64::NEG_INFINITY, upper: f64::INFINITY };
    let stiff = 4.0 * PI / (3.0 * h) + 1.0 / (2.0 * PI * h) + 2.0 * gamma;
    let cfg = DescentConfig {
        max_iters: opts.max_iters,
        grad_tol: opts.grad_tol,
        energy_tol: opts.energy_tol,
        initial_step: 1.0 / stiff,
        ..DescentConfig::default()
    };
    let initial_energy = obj.value(&x0);
    let out = descend(&obj, x0, &cons, &cfg, None);
    let converged = out.converged();
    let trace = Trace { x0: init.x0, spacing: h, values: out.x };
    let energy = energy_fbar(&trace, gamma)?.energy;
    let res = residual_eq11(&trace, gamma)?;
    let residual_sup = (1..n - 1).filter(|&i| i != pin).fold(0.0f64, |m, i| m.max(res.values[i].abs()));
    if !converged {
        warnings.push(format!("relaxation stopped without converging: {:?}", out.stop));
    }
    Ok(RelaxReport {
        trace,
        energy,
        initial_energy,
        iterations: out.iterations,
        converged,
        stop_reason: out.stop,
        grad_norm: out.grad_norm,
        residual_sup,
        history: out.history,
        warnings,
    })
}
