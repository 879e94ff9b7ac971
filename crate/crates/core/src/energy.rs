//! Discrete strip energy, its exact gradient, and the Euler-Lagrange residual.
//!
//! The continuum energy is
//!
//! ```text
//! F(theta) = int_strip ( |grad theta|^2 / 2 + h (1 - cos theta) ) + gamma int_edges sin^2 theta
//! ```
//!
//! The Dirichlet part is discretized edge by edge: every x-edge of row `j`
//! carries `wy(j) * (dtheta/hx)^2 * hx / 2` and every y-edge of column `i`
//! carries `wx(i) * (dtheta/hy)^2 * hy / 2`, with trapezoid weights `wx`,
//! `wy`. The other two terms use the same trapezoid weights. [`grad_f`] is
//! the exact derivative of this sum with respect to the nodal values.

use serde::{Deserialize, Serialize};

use crate::grid::{ScalarField, StripGrid, Trace};
use crate::params::WallParams;
use crate::sum::pairwise_sum;

/// Split of an energy into its terms. `total` is the sum of the four parts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub dirichlet: f64,
    pub zeeman: f64,
    pub boundary: f64,
    pub nonlocal: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(dirichlet: f64, zeeman: f64, boundary: f64, nonlocal: f64) -> Self {
        EnergyBreakdown { dirichlet, zeeman, boundary, nonlocal, total: dirichlet + zeeman + boundary + nonlocal }
    }
}

/// `1 - cos t` without cancellation for small `t`.
#[inline]
pub(crate) fn one_minus_cos(t: f64) -> f64 {
    let s = (0.5 * t).sin();
    2.0 * s * s
}

/// Energy of a flat value slice laid out as in [`ScalarField`]. When `grad`
/// is given it is overwritten with the gradient.
pub(crate) fn eval_slice(
    g: &StripGrid,
    p: &WallParams,
    theta: &[f64],
    mut grad: Option<&mut [f64]>,
) -> EnergyBreakdown {
    let (nx, ny) = (g.nx, g.ny);
    let (hx, hy) = (g.hx(), g.hy());
    if let Some(gr) = grad.as_deref_mut() {
        gr.iter_mut().for_each(|v| *v = 0.0);
    }
    let mut dx_rows = vec![0.0; ny];
    let mut dy_rows = vec![0.0; ny - 1];
    let mut z_rows = vec![0.0; ny];
    let mut b_rows = [0.0; 2];

    for j in 0..ny {
        let row = &theta[j * nx..(j + 1) * nx];
        let wy = g.wy(j);
        let c = wy / hx;
        let mut s = 0.0;
        for i in 0..nx - 1 {
            let d = row[i + 1] - row[i];
            s += d * d;
        }
        dx_rows[j] = 0.5 * c * s;
        if p.h != 0.0 {
            let mut z = 0.0;
            for (i, &t) in row.iter().enumerate() {
                z += g.wx(i) * one_minus_cos(t);
            }
            z_rows[j] = p.h * wy * z;
        }
        if let Some(gr) = grad.as_deref_mut() {
            let gr = &mut gr[j * nx..(j + 1) * nx];
            for i in 0..nx - 1 {
                let d = c * (row[i + 1] - row[i]);
                gr[i + 1] += d;
                gr[i] -= d;
            }
            if p.h != 0.0 {
                for i in 0..nx {
                    gr[i] += p.h * wy * g.wx(i) * row[i].sin();
                }
            }
        }
    }

    for j in 0..ny - 1 {
        let lo = &theta[j * nx..(j + 1) * nx];
        let hi = &theta[(j + 1) * nx..(j + 2) * nx];
        let mut s = 0.0;
        for i in 0..nx {
            let d = hi[i] - lo[i];
            s += g.wx(i) * d * d;
        }
        dy_rows[j] = 0.5 * s / hy;
        if let Some(gr) = grad.as_deref_mut() {
            for i in 0..nx {
                let d = g.wx(i) * (hi[i] - lo[i]) / hy;
                gr[(j + 1) * nx + i] += d;
                gr[j * nx + i] -= d;
            }
        }
    }

    for (slot, j) in [0, ny - 1].into_iter().enumerate() {
        let row = &theta[j * nx..(j + 1) * nx];
        let mut s = 0.0;
        for (i, &t) in row.iter().enumerate() {
            let st = t.sin();
            s += g.wx(i) * st * st;
        }
        b_rows[slot] = p.gamma * s;
        if let Some(gr) = grad.as_deref_mut() {
            for i in 0..nx {
                gr[j * nx + i] += p.gamma * g.wx(i) * (2.0 * row[i]).sin();
            }
        }
    }

    let dirichlet = pairwise_sum(&dx_rows) + pairwise_sum(&dy_rows);
    let zeeman = pairwise_sum(&z_rows);
    let boundary = b_rows[0] + b_rows[1];
    EnergyBreakdown::new(dirichlet, zeeman, boundary, 0.0)
}

/// `E(b) - E(a)` evaluated term by term as products of differences, so the
/// result is accurate relative to its own size even when both energies
/// agree to many digits.
pub(crate) fn diff_slice(g: &StripGrid, p: &WallParams, a: &[f64], b: &[f64]) -> f64 {
    let (nx, ny) = (g.nx, g.ny);
    let (hx, hy) = (g.hx(), g.hy());
    let mut rows = vec![0.0; ny];
    for (j, slot) in rows.iter_mut().enumerate() {
        let ra = &a[j * nx..(j + 1) * nx];
        let rb = &b[j * nx..(j + 1) * nx];
        let wy = g.wy(j);
        let mut s = 0.0;
        for i in 0..nx - 1 {
            let da = ra[i + 1] - ra[i];
            let db = rb[i + 1] - rb[i];
            s += (db - da) * (db + da);
        }
        let mut acc = 0.5 * wy / hx * s;
        if j + 1 < ny {
            let ua = &a[(j + 1) * nx..(j + 2) * nx];
            let ub = &b[(j + 1) * nx..(j + 2) * nx];
            let mut t = 0.0;
            for i in 0..nx {
                let da = ua[i] - ra[i];
                let db = ub[i] - rb[i];
                t += g.wx(i) * (db - da) * (db + da);
            }
            acc += 0.5 * t / hy;
        }
        if p.h != 0.0 {
            // cos a - cos b = 2 sin((a+b)/2) sin((b-a)/2)
            let mut z = 0.0;
            for i in 0..nx {
                z += g.wx(i) * 2.0 * (0.5 * (ra[i] + rb[i])).sin() * (0.5 * (rb[i] - ra[i])).sin();
            }
            acc += p.h * wy * z;
        }
        if j == 0 || j == ny - 1 {
            // sin^2 b - sin^2 a = sin(b-a) sin(b+a)
            let mut e = 0.0;
            for i in 0..nx {
                e += g.wx(i) * (rb[i] - ra[i]).sin() * (rb[i] + ra[i]).sin();
            }
            acc += p.gamma * e;
        }
        *slot = acc;
    }
    pairwise_sum(&rows)
}

/// Discrete strip energy.
pub fn energy_f(field: &ScalarField, params: &WallParams) -> EnergyBreakdown {
    eval_slice(&field.grid, params, &field.values, None)
}

/// Gradient of [`energy_f`] with respect to every nodal value, including the
/// cap columns (callers that hold those fixed simply ignore them).
pub fn grad_f(field: &ScalarField, params: &WallParams) -> ScalarField {
    let mut g = vec![0.0; field.values.len()];
    eval_slice(&field.grid, params, &field.values, Some(&mut g));
    ScalarField { grid: field.grid, values: g }
}

/// Energy and gradient in one sweep.
pub fn energy_and_grad(field: &ScalarField, params: &WallParams) -> (EnergyBreakdown, ScalarField) {
    let mut g = vec![0.0; field.values.len()];
    let e = eval_slice(&field.grid, params, &field.values, Some(&mut g));
    (e, ScalarField { grid: field.grid, values: g })
}

/// The boundary-penalty part of [`grad_f`] on its own.
pub fn boundary_gradient(field: &ScalarField, params: &WallParams) -> ScalarField {
    let g = field.grid;
    let mut out = ScalarField::constant(g, 0.0);
    for j in [0, g.ny - 1] {
        for i in 0..g.nx {
            out.set(i, j, params.gamma * g.wx(i) * (2.0 * field.get(i, j)).sin());
        }
    }
    out
}

/// Nodal quadrature weights `wx(i) * wy(j)`; dividing the gradient by them
/// gives a grid-independent approximation of the L2 gradient.
pub fn mass_weights(g: &StripGrid) -> Vec<f64> {
    let mut w = Vec::with_capacity(g.len());
    for j in 0..g.ny {
        for i in 0..g.nx {
            w.push(g.wx(i) * g.wy(j));
        }
    }
    w
}

/// Pointwise residual of the Euler-Lagrange system
/// `lap theta = h sin theta` inside and `d_nu theta + gamma sin 2 theta = 0`
/// on the two horizontal edges.
#[derive(Clone, Debug)]
pub struct ElResidual {
    /// `lap_h theta - h sin theta` on interior nodes, zero elsewhere.
    pub interior: ScalarField,
    pub boundary_bottom: Trace,
    pub boundary_top: Trace,
    pub sup_interior: f64,
    pub sup_bottom: f64,
    pub sup_top: f64,
}

pub fn el_residual(field: &ScalarField, params: &WallParams) -> ElResidual {
    let g = field.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (hx, hy) = (g.hx(), g.hy());
    let mut interior = ScalarField::constant(g, 0.0);
    let mut sup_interior = 0.0f64;
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let c = field.get(i, j);
            let lap = (field.get(i + 1, j) - 2.0 * c + field.get(i - 1, j)) / (hx * hx)
                + (field.get(i, j + 1) - 2.0 * c + field.get(i, j - 1)) / (hy * hy);
            let r = lap - params.h * c.sin();
            interior.set(i, j, r);
            sup_interior = sup_interior.max(r.abs());
        }
    }
    let edge = |j0: usize, j1: usize, j2: usize| -> Vec<f64> {
        (0..nx)
            .map(|i| {
                let t0 = field.get(i, j0);
                // One-sided second-order derivative along the outward normal.
                let dnu = (3.0 * t0 - 4.0 * field.get(i, j1) + field.get(i, j2)) / (2.0 * hy);
                dnu + params.gamma * (2.0 * t0).sin()
            })
            .collect()
    };
    let bottom = edge(0, 1, 2);
    let top = if ny >= 3 { edge(ny - 1, ny - 2, ny - 3) } else { vec![0.0; nx] };
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let (sup_bottom, sup_top) = (sup(&bottom), sup(&top));
    ElResidual {
        interior,
        boundary_bottom: Trace { x0: -g.m, spacing: hx, values: bottom },
        boundary_top: Trace { x0: -g.m, spacing: hx, values: top },
        sup_interior,
        sup_bottom,
        sup_top,
    }
}
