//! Uniform node-centered grid on the truncated strip `(-M, M) x (0, 1)`,
//! the field and trace containers, and translation pinning.
//!
//! Node `(i, j)` sits at `x = -M + i*hx`, `y = j*hy`. Values are stored
//! row by row: the flat index of `(i, j)` is `j*nx + i`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WallError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripGrid {
    #[serde(rename = "M")]
    pub m: f64,
    pub nx: usize,
    pub ny: usize,
}

/// Validating constructor for [`StripGrid`].
pub fn build_grid(m: f64, nx: usize, ny: usize) -> Result<StripGrid> {
    if !(m.is_finite() && m > 0.0) {
        return Err(WallError::InvalidGrid(format!("half length must be positive, got {m}")));
    }
    if nx < 3 || ny < 3 {
        return Err(WallError::InvalidGrid(format!(
            "need at least 3 nodes per direction, got nx={nx}, ny={ny}"
        )));
    }
    Ok(StripGrid { m, nx, ny })
}

impl StripGrid {
    pub fn new(m: f64, nx: usize, ny: usize) -> Result<Self> {
        build_grid(m, nx, ny)
    }

    pub fn hx(&self) -> f64 {
        2.0 * self.m / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        1.0 / (self.ny - 1) as f64
    }

    /// x coordinate of column `i`. Written so that `x(nx-1-i) == -x(i)`
    /// holds bitwise, which keeps mirror-symmetric data exactly symmetric.
    pub fn x(&self, i: usize) -> f64 {
        let n = (self.nx - 1) as f64;
        (2.0 * i as f64 - n) * self.m / n
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 / (self.ny - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Trapezoid weight of column `i`.
    pub fn wx(&self, i: usize) -> f64 {
        if i == 0 || i == self.nx - 1 {
            0.5 * self.hx()
        } else {
            self.hx()
        }
    }

    /// Trapezoid weight of row `j`.
    pub fn wy(&self, j: usize) -> f64 {
        if j == 0 || j == self.ny - 1 {
            0.5 * self.hy()
        } else {
            self.hy()
        }
    }

    /// Index of the column at `x = 0`, if the grid has one.
    pub fn center_column(&self) -> Option<usize> {
        if self.nx % 2 == 1 {
            Some((self.nx - 1) / 2)
        } else {
            None
        }
    }
}

/// Lifted phase sampled on the grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: StripGrid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: StripGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(WallError::ShapeMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(WallError::Malformed(format!("non-finite value at flat index {p}")));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: StripGrid, c: f64) -> Self {
        ScalarField { grid, values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: StripGrid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            let y = grid.y(j);
            for i in 0..grid.nx {
                values.push(f(grid.x(i), y));
            }
        }
        ScalarField { grid, values }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.idx(i, j);
        self.values[k] = v;
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let nx = self.grid.nx;
        &self.values[j * nx..(j + 1) * nx]
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.grid.ny).map(|j| self.get(i, j)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Largest nodewise difference to another field on the same grid.
    pub fn sup_distance(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
    }
}

/// Which horizontal edge of the strip.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bottom,
    Top,
}

/// Samples of a function of `x` on the uniform lattice `x0 + i*spacing`.
///
/// Outside the sampled window the trace is taken to be constant and equal to
/// the nearest end value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub x0: f64,
    pub spacing: f64,
    pub values: Vec<f64>,
}

impl Trace {
    pub fn new(x0: f64, spacing: f64, values: Vec<f64>) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(WallError::InvalidGrid(format!("trace spacing must be positive, got {spacing}")));
        }
        if values.len() < 2 {
            return Err(WallError::InvalidGrid("a trace needs at least two samples".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(WallError::Malformed("non-finite trace value".into()));
        }
        Ok(Trace { x0, spacing, values })
    }

    /// Samples `f` on `[a, b]` with `n` points, both ends included.
    pub fn sample(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        assert!(n >= 2 && b > a, "need n >= 2 and b > a");
        let spacing = (b - a) / (n - 1) as f64;
        let mut t = Trace { x0: a, spacing, values: Vec::with_capacity(n) };
        for i in 0..n {
            let x = t.x(i);
            t.values.push(f(x));
        }
        t
    }

    /// Samples `f` on `[-L, L]` with spacing `h`; `L/h` is rounded so that
    /// `x = 0` is a lattice point and the lattice is mirror symmetric.
    pub fn sample_symmetric(half_width: f64, h: f64, f: impl Fn(f64) -> f64) -> Self {
        let half = (half_width / h).round() as usize;
        let n = 2 * half + 1;
        let mut t = Trace { x0: -(half as f64) * h, spacing: h, values: Vec::with_capacity(n) };
        for i in 0..n {
            let x = t.x(i);
            t.values.push(f(x));
        }
        t
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.spacing
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    pub fn window(&self) -> (f64, f64) {
        (self.x0, self.x0 + (self.len() - 1) as f64 * self.spacing)
    }

    pub fn left_value(&self) -> f64 {
        self.values[0]
    }

    pub fn right_value(&self) -> f64 {
        self.values[self.len() - 1]
    }

    /// Value at lattice offset `i` (may be negative or past the end), using
    /// the constant tail extension.
    #[inline]
    pub fn at(&self, i: isize) -> f64 {
        if i < 0 {
            self.values[0]
        } else if i as usize >= self.values.len() {
            self.values[self.values.len() - 1]
        } else {
            self.values[i as usize]
        }
    }

    /// Piecewise linear interpolation with constant tails.
    pub fn eval(&self, x: f64) -> f64 {
        let s = (x - self.x0) / self.spacing;
        if s <= 0.0 {
            return self.values[0];
        }
        let last = self.len() - 1;
        if s >= last as f64 {
            return self.values[last];
        }
        let i = s.floor() as usize;
        let t = s - i as f64;
        if t == 0.0 {
            self.values[i]
        } else {
            (1.0 - t) * self.values[i] + t * self.values[i + 1]
        }
    }

    pub fn sup_distance(&self, other: &Trace) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
    }
}

/// Copies the bottom (`y = 0`) or top (`y = 1`) row of a field.
pub fn extract_trace(field: &ScalarField, side: Side) -> Trace {
    let g = field.grid;
    let j = match side {
        Side::Bottom => 0,
        Side::Top => g.ny - 1,
    };
    Trace { x0: -g.m, spacing: g.hx(), values: field.row(j).to_vec() }
}

/// Trapezoid average of column `i` over `y in [0, 1]`.
pub fn x_average(field: &ScalarField, i: usize) -> Result<f64> {
    let g = field.grid;
    if i >= g.nx {
        return Err(WallError::IndexOutOfRange { index: i, len: g.nx });
    }
    Ok(column_average(field, i))
}

fn column_average(field: &ScalarField, i: usize) -> f64 {
    let g = field.grid;
    let col = field.column(i);
    let inner = crate::sum::pairwise_sum(&col[1..g.ny - 1]);
    g.hy() * (inner + 0.5 * (col[0] + col[g.ny - 1]))
}

/// All column averages, left to right.
pub fn x_averages(field: &ScalarField) -> Vec<f64> {
    (0..field.grid.nx).map(|i| column_average(field, i)).collect()
}

/// Location of the first crossing of `level` by the column averages,
/// scanning from the left, by linear interpolation between columns.
pub fn first_crossing(field: &ScalarField, level: f64) -> Option<f64> {
    let g = field.grid;
    let avg = x_averages(field);
    for i in 0..g.nx - 1 {
        let a = avg[i] - level;
        let b = avg[i + 1] - level;
        if a == 0.0 {
            return Some(g.x(i));
        }
        if a * b < 0.0 {
            let t = a / (a - b);
            return Some(g.x(i) + t * g.hx());
        }
    }
    if avg[g.nx - 1] == level {
        return Some(g.x(g.nx - 1));
    }
    None
}

/// Returns the field translated so that `new(x) = old(x + shift)`, using
/// linear interpolation between columns and constant extension by the end
/// columns.
pub fn shift_field(field: &ScalarField, shift: f64) -> ScalarField {
    if shift == 0.0 {
        return field.clone();
    }
    let g = field.grid;
    let hx = g.hx();
    let mut out = field.clone();
    for i in 0..g.nx {
        let s = (g.x(i) + shift + g.m) / hx;
        let (i0, t) = if s <= 0.0 {
            (0, 0.0)
        } else if s >= (g.nx - 1) as f64 {
            (g.nx - 1, 0.0)
        } else {
            let f = s.floor();
            (f as usize, s - f)
        };
        for j in 0..g.ny {
            let v = if t == 0.0 {
                field.get(i0, j)
            } else {
                (1.0 - t) * field.get(i0, j) + t * field.get(i0 + 1, j)
            };
            out.set(i, j, v);
        }
    }
    out
}

/// Same translation as [`shift_field`] for a trace.
pub fn shift_trace(trace: &Trace, shift: f64) -> Trace {
    if shift == 0.0 {
        return trace.clone();
    }
    let values = (0..trace.len()).map(|i| trace.eval(trace.x(i) + shift)).collect();
    Trace { x0: trace.x0, spacing: trace.spacing, values }
}

/// Translates the field so that its column average crosses `k*pi/2` at
/// `x = 0`. Returns the translated field and the shift that was applied.
///
/// When the averages cross the level several times, the first crossing
/// from the left is used.
pub fn recenter(field: &ScalarField, k: i32) -> Result<(ScalarField, f64)> {
    let level = k as f64 * std::f64::consts::FRAC_PI_2;
    let shift = first_crossing(field, level).ok_or_else(|| {
        WallError::NotWallLike(format!("column averages never cross {level}"))
    })?;
    Ok((shift_field(field, shift), shift))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn spacing_formula() {
        let g = build_grid(1.0, 3, 3).unwrap();
        assert_eq!(g.hx(), 1.0);
        assert_eq!(g.hy(), 0.5);
        let g = build_grid(10.0, 401, 41).unwrap();
        assert!((g.hx() - 0.05).abs() < 1e-15);
        assert!((g.hy() - 0.025).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(build_grid(0.0, 3, 3).is_err());
        assert!(build_grid(-1.0, 3, 3).is_err());
        assert!(build_grid(1.0, 2, 3).is_err());
        assert!(build_grid(1.0, 3, 2).is_err());
    }

    #[test]
    fn node_coordinates_are_mirror_exact() {
        let g = build_grid(7.3, 101, 5).unwrap();
        for i in 0..g.nx {
            assert_eq!(g.x(g.nx - 1 - i), -g.x(i));
        }
        assert_eq!(g.x(0), -7.3);
        assert_eq!(g.x(50), 0.0);
        assert_eq!(g.y(4), 1.0);
    }

    #[test]
    fn traces_of_simple_fields() {
        let g = build_grid(2.0, 9, 5).unwrap();
        let c = ScalarField::constant(g, 1.25);
        assert!(extract_trace(&c, Side::Bottom).values.iter().all(|&v| v == 1.25));
        let f = ScalarField::from_fn(g, |_, y| y);
        assert!(extract_trace(&f, Side::Bottom).values.iter().all(|&v| v == 0.0));
        assert!(extract_trace(&f, Side::Top).values.iter().all(|&v| v == 1.0));
        let s = ScalarField::from_fn(g, |x, y| x * (y * (1.0 - y)));
        assert_eq!(extract_trace(&s, Side::Bottom), extract_trace(&s, Side::Top));
    }

    #[test]
    fn column_averages() {
        let g = build_grid(1.0, 5, 101).unwrap();
        assert!((x_average(&ScalarField::constant(g, PI), 2).unwrap() - PI).abs() < 1e-14);
        let lin = ScalarField::from_fn(g, |_, y| y);
        assert!((x_average(&lin, 0).unwrap() - 0.5).abs() < 1e-12);
        let s = ScalarField::from_fn(g, |_, y| (PI * y).sin());
        assert!((x_average(&s, 4).unwrap() - 2.0 / PI).abs() < 1e-3);
        assert!(x_average(&s, 5).is_err());
    }

    fn wall(g: StripGrid) -> ScalarField {
        ScalarField::from_fn(g, |x, y| PI - 2.0 * (x.exp()).atan() + 0.1 * x * (-x * x).exp() * y * (1.0 - y))
    }

    #[test]
    fn recenter_normalized_field_is_identity() {
        let g = build_grid(8.0, 161, 9).unwrap();
        let f = wall(g);
        let (r, s) = recenter(&f, 1).unwrap();
        assert!(s.abs() < 1e-12);
        assert!(r.sup_distance(&f) < 1e-12);
    }

    #[test]
    fn recenter_undoes_grid_shift() {
        let g = build_grid(8.0, 161, 9).unwrap();
        let f = wall(g);
        let hx = g.hx();
        let shifted = ScalarField::from_fn(g, |x, y| {
            let x = x - 2.0 * hx;
            PI - 2.0 * (x.exp()).atan() + 0.1 * x * (-x * x).exp() * y * (1.0 - y)
        });
        let (r, s) = recenter(&shifted, 1).unwrap();
        assert!((s - 2.0 * hx).abs() < 2.0 * hx * hx);
        // Ignore the two columns that fell off the right end.
        let mut err = 0.0f64;
        for j in 0..g.ny {
            for i in 0..g.nx - 3 {
                err = err.max((r.get(i, j) - f.get(i, j)).abs());
            }
        }
        assert!(err < 4.0 * hx * hx, "err {err}");
    }

    #[test]
    fn recenter_rejects_constant() {
        let g = build_grid(1.0, 11, 5).unwrap();
        assert!(matches!(recenter(&ScalarField::constant(g, 0.0), 1), Err(WallError::NotWallLike(_))));
    }

    #[test]
    fn trace_interpolation_and_tails() {
        let t = Trace::sample(-1.0, 1.0, 3, |x| x);
        assert_eq!(t.eval(-5.0), -1.0);
        assert_eq!(t.eval(5.0), 1.0);
        assert!((t.eval(0.25) - 0.25).abs() < 1e-15);
        assert_eq!(t.at(-3), -1.0);
        assert_eq!(t.at(7), 1.0);
        let s = Trace::sample_symmetric(2.0, 0.5, |x| x);
        assert_eq!(s.len(), 9);
        assert_eq!(s.x(4), 0.0);
    }
}
