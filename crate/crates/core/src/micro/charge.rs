//! Magnetic charge of the cut-off field and its spectral self-energy.
//!
//! A charge is stored as a piecewise constant density on rectangles: uniform
//! cells in `x` times a list of (possibly non-uniform) cells in `y`. The
//! self-energy
//!
//! ```text
//! I(rho) = int |rho^(k)|^2 / (2 pi |k|) d^2k = int int rho(r) rho(r') / |r - r'|
//! ```
//!
//! is evaluated with a zero-padded DFT in `x` and, for every `x` mode, the
//! exact cell-pair integrals of the partially transformed kernel in `y`.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::bessel::{k0, ki, EULER_GAMMA};
use super::{eta_eps, MicroParams};
use crate::error::{Result, WallError};
use crate::grid::{ScalarField, StripGrid};
use crate::sum::pairwise_sum;

/// Piecewise constant density on `[x0 + i dx, x0 + (i+1) dx] x [y_edges[c], y_edges[c+1]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargeField {
    pub x0: f64,
    pub dx: f64,
    /// Number of cells in `x`.
    pub nx: usize,
    pub y_edges: Vec<f64>,
    /// Cell densities, row by row: `values[c * nx + i]`.
    pub values: Vec<f64>,
}

impl ChargeField {
    pub fn new(x0: f64, dx: f64, nx: usize, y_edges: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if !(dx.is_finite() && dx > 0.0) || nx == 0 {
            return Err(WallError::InvalidGrid(format!("need dx > 0 and at least one cell, got dx={dx}, nx={nx}")));
        }
        if y_edges.len() < 2 || y_edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(WallError::InvalidGrid("y edges must be strictly increasing".into()));
        }
        let want = nx * (y_edges.len() - 1);
        if values.len() != want {
            return Err(WallError::ShapeMismatch(format!("expected {want} cell values, got {}", values.len())));
        }
        Ok(ChargeField { x0, dx, nx, y_edges, values })
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(x0: f64, dx: f64, nx: usize, y_edges: Vec<f64>, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let ny = y_edges.len().saturating_sub(1);
        let mut values = Vec::with_capacity(nx * ny);
        for c in 0..ny {
            let y = 0.5 * (y_edges[c] + y_edges[c + 1]);
            for i in 0..nx {
                values.push(f(x0 + (i as f64 + 0.5) * dx, y));
            }
        }
        ChargeField::new(x0, dx, nx, y_edges, values)
    }

    pub fn n_ycells(&self) -> usize {
        self.y_edges.len() - 1
    }

    pub fn get(&self, i: usize, c: usize) -> f64 {
        self.values[c * self.nx + i]
    }

    /// Integral of the density over the plane.
    pub fn total(&self) -> f64 {
        let per_row: Vec<f64> = (0..self.n_ycells())
            .map(|c| (self.y_edges[c + 1] - self.y_edges[c]) * pairwise_sum(&self.values[c * self.nx..(c + 1) * self.nx]))
            .collect();
        self.dx * pairwise_sum(&per_row)
    }

    pub fn scaled(&self, s: f64) -> ChargeField {
        ChargeField { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() }
    }
}

// Quadrature rules on [-1, 1].
const GL3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 0.555_555_555_555_555_6),
    (0.0, 0.888_888_888_888_888_9),
    (0.774_596_669_241_483_4, 0.555_555_555_555_555_6),
];
const GL6: [(f64, f64); 6] = [
    (-0.932_469_514_203_152_1, 0.171_324_492_379_170_4),
    (-0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
    (-0.238_619_186_083_196_9, 0.467_913_934_572_691),
    (0.238_619_186_083_196_9, 0.467_913_934_572_691),
    (0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
    (0.932_469_514_203_152_1, 0.171_324_492_379_170_4),
];

/// Smallest even length at least `target` whose only prime factors are 2, 3, 5.
pub(crate) fn padded_len(target: usize) -> usize {
    let mut n = target.max(2);
    loop {
        if n % 2 == 0 {
            let mut m = n;
            for p in [2, 3, 5] {
                while m % p == 0 {
                    m /= p;
                }
            }
            if m == 1 {
                return n;
            }
        }
        n += 1;
    }
}

/// `x` transform of `1/|r|` in the plane, averaged over the wavenumber cell
/// of mode `n`, as a function of the vertical offset `t`.
#[derive(Clone, Copy, Debug)]
enum ModeKernel {
    /// Exact average of `2 K0(|k| t)` over `|k| <= half`.
    Zero { half: f64 },
    /// Simpson average over `[a, b]` with midpoint `k`.
    Simpson { a: f64, k: f64, b: f64 },
    /// Midpoint value `2 K0(k t)`.
    Mid { k: f64 },
}

impl ModeKernel {
    fn for_mode(n: usize, delta: f64) -> Self {
        let k = n as f64 * delta;
        match n {
            0 => ModeKernel::Zero { half: 0.5 * delta },
            1..=8 => ModeKernel::Simpson { a: k - 0.5 * delta, k, b: k + 0.5 * delta },
            _ => ModeKernel::Mid { k },
        }
    }

    /// Kernel at `t > 0`.
    fn g(&self, t: f64) -> f64 {
        match *self {
            ModeKernel::Zero { half } => {
                let z = half * t;
                2.0 * ki(z) / z
            }
            ModeKernel::Simpson { a, k, b } => (k0(a * t) + 4.0 * k0(k * t) + k0(b * t)) / 3.0,
            ModeKernel::Mid { k } => 2.0 * k0(k * t),
        }
    }

    /// `g(t) + 2 ln t`, continuous at `t = 0`.
    fn regular(&self, t: f64) -> f64 {
        let (scale, limit) = match *self {
            ModeKernel::Zero { half } => (half, 2.0 * (1.0 - EULER_GAMMA - (0.5 * half).ln())),
            ModeKernel::Simpson { a, k, b } => {
                (b, -((0.5 * a).ln() + 4.0 * (0.5 * k).ln() + (0.5 * b).ln()) / 3.0 - 2.0 * EULER_GAMMA)
            }
            ModeKernel::Mid { k } => (k, -2.0 * (0.5 * k).ln() - 2.0 * EULER_GAMMA),
        };
        if scale * t < 1e-8 {
            limit
        } else {
            self.g(t) + 2.0 * t.ln()
        }
    }

    /// Largest wavenumber in the cell; sets the length scale of the kernel.
    fn k_hi(&self) -> f64 {
        match *self {
            ModeKernel::Zero { half } => half,
            ModeKernel::Simpson { b, .. } => b,
            ModeKernel::Mid { k } => k,
        }
    }

    /// Smallest wavenumber sampled, for the far-field cutoff. `None` for the
    /// zero mode, whose kernel decays only like `1/t`.
    fn k_lo(&self) -> Option<f64> {
        match *self {
            ModeKernel::Zero { .. } => None,
            ModeKernel::Simpson { a, .. } => Some(a),
            ModeKernel::Mid { k } => Some(k),
        }
    }
}

/// `int_{a1}^{b1} int_{a2}^{b2} ln|y - y'| dy' dy`.
fn log_pair(a1: f64, b1: f64, a2: f64, b2: f64) -> f64 {
    fn f(u: f64) -> f64 {
        if u == 0.0 {
            0.0
        } else {
            0.5 * u * u * u.abs().ln() - 0.75 * u * u
        }
    }
    f(b1 - a2) - f(a1 - a2) - f(b1 - b2) + f(a1 - b2)
}

/// Tensor Gauss rule of `h(|y - y'|)` over two intervals, each split into
/// panels no wider than `2 / kscale`.
fn tensor_rule(
    rule: &[(f64, f64)],
    (a1, b1): (f64, f64),
    (a2, b2): (f64, f64),
    kscale: f64,
    h: impl Fn(f64) -> f64,
) -> f64 {
    let panels = |w: f64| ((kscale * w / 2.0).ceil() as usize).clamp(1, 16);
    let (p1, p2) = (panels(b1 - a1), panels(b2 - a2));
    let (w1, w2) = ((b1 - a1) / p1 as f64, (b2 - a2) / p2 as f64);
    let mut acc = 0.0;
    for s1 in 0..p1 {
        let m1 = a1 + (s1 as f64 + 0.5) * w1;
        for s2 in 0..p2 {
            let m2 = a2 + (s2 as f64 + 0.5) * w2;
            let mut part = 0.0;
            for &(x1, v1) in rule {
                let y1 = m1 + 0.5 * w1 * x1;
                for &(x2, v2) in rule {
                    part += v1 * v2 * h((y1 - m2 - 0.5 * w2 * x2).abs());
                }
            }
            acc += part * 0.25 * w1 * w2;
        }
    }
    acc
}

/// `int_{c1} int_{c2} g(|y - y'|) dy' dy` for one mode kernel.
fn pair_integral(kern: &ModeKernel, c1: (f64, f64), c2: (f64, f64)) -> f64 {
    let gap = (c2.0 - c1.1).max(c1.0 - c2.1).max(0.0);
    if let Some(klo) = kern.k_lo() {
        if klo * gap > 40.0 {
            return 0.0;
        }
    }
    let width = (c1.1 - c1.0).max(c2.1 - c2.0);
    let ks = kern.k_hi();
    if gap < width {
        -2.0 * log_pair(c1.0, c1.1, c2.0, c2.1) + tensor_rule(&GL6, c1, c2, ks, |t| kern.regular(t))
    } else {
        tensor_rule(&GL3, c1, c2, ks, |t| kern.g(t))
    }
}

/// Symmetric matrix of cell-pair integrals for one mode, row-major `C x C`.
fn mode_matrix(edges: &[f64], kern: &ModeKernel) -> Vec<f64> {
    let nc = edges.len() - 1;
    let mut g = vec![0.0; nc * nc];
    for a in 0..nc {
        for b in a..nc {
            let v = pair_integral(kern, (edges[a], edges[a + 1]), (edges[b], edges[b + 1]));
            g[a * nc + b] = v;
            g[b * nc + a] = v;
        }
    }
    g
}

/// Layout of the discrete transform in `x`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Spectrum {
    pub len: usize,
    pub delta: f64,
    pub dx: f64,
}

impl Spectrum {
    pub fn new(ncells: usize, dx: f64, pad_factor: f64) -> Self {
        let len = padded_len((pad_factor * ncells as f64).ceil() as usize);
        Spectrum { len, delta: 2.0 * std::f64::consts::PI / (len as f64 * dx), dx }
    }

    pub fn n_modes(&self) -> usize {
        self.len / 2 + 1
    }

    /// Quadrature weight of mode `n`, including the factor two for the
    /// mirrored negative wavenumber and the transform of the cell indicator.
    pub fn weight(&self, n: usize) -> f64 {
        let mult = if n == 0 || 2 * n == self.len { 1.0 } else { 2.0 };
        let z = 0.5 * n as f64 * self.delta * self.dx;
        let sinc = if z == 0.0 { 1.0 } else { z.sin() / z };
        mult * self.delta / (2.0 * std::f64::consts::PI) * self.dx * self.dx * sinc * sinc
    }

    pub fn multiplicity(&self, n: usize) -> f64 {
        if n == 0 || 2 * n == self.len {
            1.0
        } else {
            2.0
        }
    }

    pub fn mode_matrix(&self, edges: &[f64], n: usize) -> Vec<f64> {
        mode_matrix(edges, &ModeKernel::for_mode(n, self.delta))
    }
}

/// Self-energy `int int rho rho' / |r - r'|` of a charge. The density is
/// zero-padded to `pad_factor` times its width before the transform.
///
/// Errors with [`WallError::SupportTouchesBoundary`] when the first or last
/// column of cells carries charge, since such a density has been cut off.
pub fn nonlocal_energy(field: &ChargeField, p: &MicroParams) -> Result<f64> {
    p.validate()?;
    let scale = field.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let nc = field.n_ycells();
    let nx = field.nx;
    let touches = (0..nc).any(|c| field.get(0, c).abs() > 1e-6 * scale || field.get(nx - 1, c).abs() > 1e-6 * scale);
    if touches {
        return Err(WallError::SupportTouchesBoundary);
    }
    let spectrum = Spectrum::new(nx, field.dx, p.pad_factor);
    let fft = FftPlanner::new().plan_fft_forward(spectrum.len);
    let rows: Vec<Vec<Complex64>> = (0..nc)
        .map(|c| {
            let mut buf = vec![Complex64::new(0.0, 0.0); spectrum.len];
            for i in 0..nx {
                buf[i].re = field.get(i, c);
            }
            fft.process(&mut buf);
            buf
        })
        .collect();
    let per_mode: Vec<f64> = (0..spectrum.n_modes())
        .into_par_iter()
        .map(|n| {
            let g = spectrum.mode_matrix(&field.y_edges, n);
            let mut acc = 0.0;
            for a in 0..nc {
                let za = rows[a][n];
                let mut inner = 0.0;
                for b in 0..nc {
                    let zb = rows[b][n];
                    inner += g[a * nc + b] * (za.re * zb.re + za.im * zb.im);
                }
                acc += inner;
            }
            spectrum.weight(n) * acc
        })
        .collect();
    Ok(pairwise_sum(&per_mode))
}

/// Cells in `y` for a strip with `ny` rows: the row intervals, refined to
/// sixteen cells across each cut-off layer and graded geometrically back to
/// the row spacing. Returns the edges and the row interval of every cell.
pub(crate) fn y_cells(ny: usize, eps: f64) -> (Vec<f64>, Vec<usize>) {
    let hy = 1.0 / (ny - 1) as f64;
    let mut fixed: Vec<f64> = (0..ny).map(|j| j as f64 * hy).collect();
    let fine = eps / 16.0;
    for m in 1..=16 {
        fixed.push(m as f64 * fine);
        fixed.push(1.0 - m as f64 * fine);
    }
    let mut graded = Vec::new();
    let (mut y, mut w) = (eps, fine);
    loop {
        w *= 1.5;
        y += w;
        if y >= 0.5 || w > hy {
            break;
        }
        graded.push((y, w));
        graded.push((1.0 - y, w));
    }
    fixed.sort_by(|a, b| a.total_cmp(b));
    let mut edges = fixed.clone();
    for (y, w) in graded {
        let near = fixed.iter().any(|&f| (f - y).abs() < 0.3 * w);
        if !near {
            edges.push(y);
        }
    }
    edges.sort_by(|a, b| a.total_cmp(b));
    edges.dedup_by(|b, a| (*b - *a).abs() < 1e-9);
    *edges.first_mut().unwrap() = 0.0;
    *edges.last_mut().unwrap() = 1.0;
    let rows = edges
        .windows(2)
        .map(|w| ((0.5 * (w[0] + w[1]) / hy).floor() as usize).min(ny - 2))
        .collect();
    (edges, rows)
}

/// Maps the per-cell `x` derivative of `m1` and the `x` average of `m2`
/// (both given at the grid rows) to cell averages of the charge.
///
/// Row `c` holds the coefficients of the two nodal values of row interval
/// `rows[c]`: `[b1_lo, b1_hi, b2_lo, b2_hi]`.
pub(crate) fn cell_coefficients(edges: &[f64], rows: &[usize], ny: usize, p: &MicroParams) -> Vec<[f64; 4]> {
    let hy = 1.0 / (ny - 1) as f64;
    rows.iter()
        .enumerate()
        .map(|(c, &j)| {
            let (a, b) = (edges[c], edges[c + 1]);
            let w = b - a;
            let (ylo, yhi) = (j as f64 * hy, (j + 1) as f64 * hy);
            let phi_lo = |y: f64| (yhi - y) / hy;
            let phi_hi = |y: f64| (y - ylo) / hy;
            let (mut i_lo, mut i_hi) = (0.0, 0.0);
            for (x, wt) in GL3 {
                let y = 0.5 * (a + b) + 0.5 * w * x;
                let e = eta_eps(y, p);
                i_lo += 0.5 * wt * e * phi_lo(y);
                i_hi += 0.5 * wt * e * phi_hi(y);
            }
            let (ea, eb) = (eta_eps(a, p), eta_eps(b, p));
            [i_lo, i_hi, (eb * phi_lo(b) - ea * phi_lo(a)) / w, (eb * phi_hi(b) - ea * phi_hi(a)) / w]
        })
        .collect()
}

/// Checks that the end columns are a constant multiple of `pi`, so that the
/// field extends by constants with no charge outside the window.
pub(crate) fn check_flat_tails(theta: &ScalarField) -> Result<()> {
    let g = theta.grid;
    for i in [0, g.nx - 1] {
        let col = theta.column(i);
        let spread = col.iter().fold(0.0f64, |m, v| m.max((v - col[0]).abs()));
        let s = col[0].sin().abs();
        if spread > 1e-8 || s > 1e-8 {
            return Err(WallError::NonFlatTails(format!(
                "column {i} varies by {spread:.3e} in y and has |sin theta| = {s:.3e}"
            )));
        }
    }
    Ok(())
}

/// Divergence of `eta_eps m` for `m = (cos theta, sin theta)`, averaged over
/// rectangles: the `x` cells of the grid (plus one empty cell on each side)
/// times the `y` cells of the cut-off construction.
///
/// Inside each rectangle the charge is the exact divergence of the
/// piecewise bilinear interpolant of `m`, so the total charge equals
/// `int eta_eps (m1(right) - m1(left)) dy` up to rounding.
pub fn div_eta_m(theta: &ScalarField, p: &MicroParams) -> Result<ChargeField> {
    p.validate()?;
    check_flat_tails(theta)?;
    let g = theta.grid;
    let (edges, rows) = y_cells(g.ny, p.eps);
    let coef = cell_coefficients(&edges, &rows, g.ny, p);
    let (u, v) = cell_moments(&g, &theta.values);
    let ncell = g.nx - 1;
    let nx = ncell + 2;
    let mut values = vec![0.0; nx * rows.len()];
    for (c, (&j, b)) in rows.iter().zip(&coef).enumerate() {
        for i in 0..ncell {
            values[c * nx + i + 1] = b[0] * u[j * ncell + i]
                + b[1] * u[(j + 1) * ncell + i]
                + b[2] * v[j * ncell + i]
                + b[3] * v[(j + 1) * ncell + i];
        }
    }
    ChargeField::new(-g.m - g.hx(), g.hx(), nx, edges, values)
}

/// Per row and `x` cell: `d m1/dx` and the cell average of `m2`, both of
/// the linear interpolant. Layout `j * (nx - 1) + i`.
pub(crate) fn cell_moments(g: &StripGrid, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let ncell = g.nx - 1;
    let hx = g.hx();
    let mut u = vec![0.0; ncell * g.ny];
    let mut v = vec![0.0; ncell * g.ny];
    for j in 0..g.ny {
        for i in 0..ncell {
            let (a, b) = (theta[g.idx(i, j)], theta[g.idx(i + 1, j)]);
            // cos b - cos a and sin b + sin a in product form.
            let (s, d) = (0.5 * (a + b), 0.5 * (b - a));
            u[j * ncell + i] = -2.0 * s.sin() * d.sin() / hx;
            v[j * ncell + i] = s.sin() * d.cos();
        }
    }
    (u, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(eps: f64) -> MicroParams {
        MicroParams::new(eps, Default::default(), 4.0).unwrap()
    }

    #[test]
    fn padded_lengths_are_smooth_and_even() {
        assert_eq!(padded_len(7), 8);
        assert_eq!(padded_len(121), 128);
        assert_eq!(padded_len(1201), 1250);
        for n in 2..500 {
            let m = padded_len(n);
            assert!(m >= n && m % 2 == 0);
        }
    }

    #[test]
    fn log_pair_of_unit_cell() {
        assert!((log_pair(0.0, 1.0, 0.0, 1.0) + 1.5).abs() < 1e-14);
        // Separated cells agree with a fine midpoint sum.
        let n = 400;
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                let y1 = (a as f64 + 0.5) / n as f64;
                let y2 = 2.0 + (b as f64 + 0.5) / n as f64 * 0.5;
                s += (y1 - y2).abs().ln();
            }
        }
        s *= 0.5 / (n * n) as f64;
        assert!((log_pair(0.0, 1.0, 2.0, 2.5) - s).abs() < 1e-5);
    }

    #[test]
    fn mode_kernel_regular_part_is_continuous() {
        for kern in [ModeKernel::for_mode(0, 0.3), ModeKernel::for_mode(3, 0.3), ModeKernel::for_mode(20, 0.3)] {
            let a = kern.regular(0.0);
            let b = kern.regular(1e-6);
            assert!((a - b).abs() < 1e-4, "{kern:?}: {a} vs {b}");
        }
    }

    #[test]
    fn y_cells_cover_rows_and_layers() {
        let (edges, rows) = y_cells(21, 1e-3);
        assert_eq!(edges[0], 0.0);
        assert_eq!(*edges.last().unwrap(), 1.0);
        assert!(edges.windows(2).all(|w| w[1] > w[0]));
        let hy = 0.05;
        for (c, &j) in rows.iter().enumerate() {
            assert!(edges[c] >= j as f64 * hy - 1e-12 && edges[c + 1] <= (j + 1) as f64 * hy + 1e-12);
        }
        assert!((edges[16] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn zero_angle_has_no_charge() {
        let g = StripGrid::new(3.0, 31, 11).unwrap();
        let f = div_eta_m(&ScalarField::constant(g, 0.0), &params(0.1)).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));
        assert_eq!(nonlocal_energy(&f, &params(0.1)).unwrap(), 0.0);
    }

    #[test]
    fn rejects_fields_without_flat_tails() {
        let g = StripGrid::new(3.0, 31, 11).unwrap();
        let e = div_eta_m(&ScalarField::constant(g, std::f64::consts::FRAC_PI_2), &params(0.1));
        assert!(matches!(e, Err(WallError::NonFlatTails(_))));
    }

    #[test]
    fn divergence_theorem_holds() {
        let g = StripGrid::new(6.0, 121, 21).unwrap();
        for (k, eps) in [(1, 0.1), (2, 0.01), (3, 0.3)] {
            let p = params(eps);
            let kpi = k as f64 * std::f64::consts::PI;
            let theta = ScalarField::from_fn(g, |x, y| match x {
                x if x <= -5.9 => kpi,
                x if x >= 5.9 => 0.0,
                x => k as f64 * 2.0 * (-2.0 * x * (1.0 + 0.3 * y)).exp().atan(),
            });
            let f = div_eta_m(&theta, &p).unwrap();
            // int eta (m1(right) - m1(left)) dy with exact eta integral.
            let (edges, rows) = y_cells(g.ny, eps);
            let coef = cell_coefficients(&edges, &rows, g.ny, &p);
            let jump = 1.0 - (k as f64 * std::f64::consts::PI).cos();
            let want: f64 = coef.iter().zip(edges.windows(2)).map(|(b, w)| (b[0] + b[1]) * (w[1] - w[0]) * jump).sum();
            let got = f.total();
            assert!((got - want).abs() < 1e-12 * want.abs().max(1.0), "k {k}: {got} vs {want}");
            if k % 2 == 0 {
                assert!(got.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn support_touching_the_boundary_is_rejected() {
        let f = ChargeField::from_fn(-1.0, 0.1, 20, vec![0.0, 0.5, 1.0], |_, _| 1.0).unwrap();
        assert!(matches!(nonlocal_energy(&f, &params(0.1)), Err(WallError::SupportTouchesBoundary)));
    }
}
