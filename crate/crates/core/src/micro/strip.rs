//! Self-energy of the cut-off charge as a function of the grid angles.
//!
//! For a fixed grid the charge in every rectangle is linear in the per-row
//! moments `u = d m1/dx` and `v = <m2>` of each `x` cell, so the mode
//! matrices can be contracted once with the `y` coefficients. What is left
//! per evaluation is one FFT per moment row and a small dense product per
//! mode.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::charge::{cell_coefficients, cell_moments, y_cells, Spectrum};
use super::MicroParams;
use crate::error::Result;
use crate::grid::StripGrid;
use crate::sum::pairwise_sum;

/// Precomputed evaluator of `int int rho rho' / |r - r'|` for
/// `rho = div(eta_eps m)` on a fixed grid, with the field extended by its
/// end values outside the window.
pub struct StripNonlocal {
    grid: StripGrid,
    spectrum: Spectrum,
    /// Moment rows: `u` for rows `0..ny`, then `v` for rows `0..ny`.
    dim: usize,
    /// Per mode, the `dim x dim` form including the quadrature weight.
    forms: Vec<Vec<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for StripNonlocal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StripNonlocal").field("grid", &self.grid).field("len", &self.spectrum.len).finish()
    }
}

impl StripNonlocal {
    pub fn new(grid: &StripGrid, p: &MicroParams) -> Result<Self> {
        p.validate()?;
        let ny = grid.ny;
        let ncell = grid.nx - 1;
        // Sized as for the charge of `div_eta_m`, which adds an empty cell at each end.
        let spectrum = Spectrum::new(ncell + 2, grid.hx(), p.pad_factor);
        let (edges, rows) = y_cells(ny, p.eps);
        let coef = cell_coefficients(&edges, &rows, ny, p);
        let nc = rows.len();
        let dim = 2 * ny;
        // Dense charge-from-moment map, `nc x dim`.
        let mut b = vec![0.0; nc * dim];
        for (c, (&j, cf)) in rows.iter().zip(&coef).enumerate() {
            b[c * dim + j] = cf[0];
            b[c * dim + j + 1] = cf[1];
            b[c * dim + ny + j] = cf[2];
            b[c * dim + ny + j + 1] = cf[3];
        }
        let forms = (0..spectrum.n_modes())
            .into_par_iter()
            .map(|n| {
                let g = spectrum.mode_matrix(&edges, n);
                let w = spectrum.weight(n);
                // G B, then B^T (G B).
                let mut gb = vec![0.0; nc * dim];
                for a in 0..nc {
                    for c in 0..nc {
                        let gac = g[a * nc + c];
                        if gac == 0.0 {
                            continue;
                        }
                        for r in 0..dim {
                            gb[a * dim + r] += gac * b[c * dim + r];
                        }
                    }
                }
                let mut h = vec![0.0; dim * dim];
                for a in 0..nc {
                    for r in 0..dim {
                        let bar = b[a * dim + r];
                        if bar == 0.0 {
                            continue;
                        }
                        for s in 0..dim {
                            h[r * dim + s] += w * bar * gb[a * dim + s];
                        }
                    }
                }
                // Symmetrize away the rounding of the two products.
                for r in 0..dim {
                    for s in r + 1..dim {
                        let m = 0.5 * (h[r * dim + s] + h[s * dim + r]);
                        h[r * dim + s] = m;
                        h[s * dim + r] = m;
                    }
                }
                h
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(spectrum.len);
        let inv = planner.plan_fft_inverse(spectrum.len);
        Ok(StripNonlocal { grid: *grid, spectrum, dim, forms, fwd, inv })
    }

    pub fn grid(&self) -> &StripGrid {
        &self.grid
    }

    /// Transforms moment rows laid out as `r * ncell + i`.
    fn transform(&self, rows: &[f64]) -> Vec<Vec<Complex64>> {
        let ncell = self.grid.nx - 1;
        (0..self.dim)
            .map(|r| {
                let mut buf = vec![Complex64::new(0.0, 0.0); self.spectrum.len];
                for i in 0..ncell {
                    buf[i].re = rows[r * ncell + i];
                }
                self.fwd.process(&mut buf);
                buf
            })
            .collect()
    }

    fn moments(&self, theta: &[f64]) -> Vec<f64> {
        let (u, v) = cell_moments(&self.grid, theta);
        let mut z = u;
        z.extend_from_slice(&v);
        z
    }

    /// `sum_n Re(a_n^H H_n b_n)` over the half spectrum.
    fn pairing(&self, a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
        let d = self.dim;
        let per_mode: Vec<f64> = (0..self.spectrum.n_modes())
            .map(|n| {
                let h = &self.forms[n];
                let mut acc = 0.0;
                for r in 0..d {
                    let ar = a[r][n];
                    let mut hr = Complex64::new(0.0, 0.0);
                    for s in 0..d {
                        hr += h[r * d + s] * b[s][n];
                    }
                    acc += ar.re * hr.re + ar.im * hr.im;
                }
                acc
            })
            .collect();
        pairwise_sum(&per_mode)
    }

    pub fn energy(&self, theta: &[f64]) -> f64 {
        let z = self.transform(&self.moments(theta));
        self.pairing(&z, &z)
    }

    /// Energy and its gradient with respect to the nodal angles; `grad` is
    /// overwritten.
    pub fn energy_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let g = self.grid;
        let (d, ny, ncell, len) = (self.dim, g.ny, g.nx - 1, self.spectrum.len);
        let z = self.transform(&self.moments(theta));
        let energy = self.pairing(&z, &z);

        // Y_n = H_n z_n / multiplicity, completed by conjugate symmetry so
        // that one inverse FFT gives sum_n Re(e^{i k_n x} H_n z_n).
        let mut y = vec![vec![Complex64::new(0.0, 0.0); len]; d];
        for n in 0..self.spectrum.n_modes() {
            let h = &self.forms[n];
            let inv_mult = 1.0 / self.spectrum.multiplicity(n);
            for r in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for s in 0..d {
                    acc += h[r * d + s] * z[s][n];
                }
                y[r][n] = acc * inv_mult;
                if n != 0 && 2 * n != len {
                    y[r][len - n] = (acc * inv_mult).conj();
                }
            }
        }
        let mut dz = vec![0.0; d * ncell];
        for r in 0..d {
            self.inv.process(&mut y[r]);
            for i in 0..ncell {
                dz[r * ncell + i] = 2.0 * y[r][i].re;
            }
        }

        grad.iter_mut().for_each(|v| *v = 0.0);
        let hx = g.hx();
        for j in 0..ny {
            for i in 0..g.nx {
                let t = theta[g.idx(i, j)];
                let (s, c) = t.sin_cos();
                let mut acc = 0.0;
                if i > 0 {
                    acc += -s / hx * dz[j * ncell + i - 1] + 0.5 * c * dz[(ny + j) * ncell + i - 1];
                }
                if i < ncell {
                    acc += s / hx * dz[j * ncell + i] + 0.5 * c * dz[(ny + j) * ncell + i];
                }
                grad[g.idx(i, j)] = acc;
            }
        }
        energy
    }

    /// `energy(b) - energy(a)` as a product of the moment difference and the
    /// moment sum, with the difference computed without cancellation.
    pub fn difference(&self, a: &[f64], b: &[f64]) -> f64 {
        let g = self.grid;
        let (ny, ncell) = (g.ny, g.nx - 1);
        let hx = g.hx();
        let mut diff = vec![0.0; self.dim * ncell];
        for j in 0..ny {
            for i in 0..ncell {
                let (a0, a1) = (a[g.idx(i, j)], a[g.idx(i + 1, j)]);
                let (b0, b1) = (b[g.idx(i, j)], b[g.idx(i + 1, j)]);
                let dcos = |p: f64, q: f64| -2.0 * (0.5 * (p + q)).sin() * (0.5 * (q - p)).sin();
                let dsin = |p: f64, q: f64| 2.0 * (0.5 * (p + q)).cos() * (0.5 * (q - p)).sin();
                diff[j * ncell + i] = (dcos(a1, b1) - dcos(a0, b0)) / hx;
                diff[(ny + j) * ncell + i] = 0.5 * (dsin(a0, b0) + dsin(a1, b1));
            }
        }
        let za = self.moments(a);
        let zb = self.moments(b);
        let sum: Vec<f64> = za.iter().zip(&zb).map(|(x, y)| x + y).collect();
        self.pairing(&self.transform(&diff), &self.transform(&sum))
    }
}
