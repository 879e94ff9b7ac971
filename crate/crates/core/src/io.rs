//! Plain-text artifacts: field and trace CSV files with JSON sidecars.
//!
//! Numbers are written with 17 significant digits, which round-trips every
//! `f64` exactly. A field `out.csv` is accompanied by `out.json` holding the
//! grid `{M, nx, ny}`; a trace by `{window, spacing}`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, WallError};
use crate::grid::{ScalarField, StripGrid, Trace};

/// Path of the JSON sidecar that goes with a CSV file.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse(s: &str, what: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| WallError::Malformed(format!("bad {what} value {s:?}: {e}")))
}

pub fn write_field_csv<W: Write>(field: &ScalarField, out: W) -> Result<()> {
    let g = field.grid;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "theta"])?;
    for j in 0..g.ny {
        for i in 0..g.nx {
            w.write_record([fmt(g.x(i)), fmt(g.y(j)), fmt(field.get(i, j))])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a field written by [`write_field_csv`] on the given grid. The
/// coordinate columns must match the grid nodes.
pub fn read_field_csv<R: Read>(input: R, grid: StripGrid) -> Result<ScalarField> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["x", "y", "theta"] {
        return Err(WallError::Malformed(format!("expected header x,y,theta, got {headers:?}")));
    }
    let tol = 1e-9 * grid.m.max(1.0);
    let mut values = Vec::with_capacity(grid.len());
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(WallError::Malformed(format!("row {n} has {} columns", rec.len())));
        }
        if n >= grid.len() {
            return Err(WallError::ShapeMismatch(format!("more than {} rows", grid.len())));
        }
        let (i, j) = (n % grid.nx, n / grid.nx);
        let (x, y) = (parse(&rec[0], "x")?, parse(&rec[1], "y")?);
        if (x - grid.x(i)).abs() > tol || (y - grid.y(j)).abs() > tol {
            return Err(WallError::Malformed(format!("row {n} at ({x}, {y}) is not node ({i}, {j})")));
        }
        values.push(parse(&rec[2], "theta")?);
    }
    ScalarField::new(grid, values)
}

/// Writes `path` and its grid sidecar.
pub fn save_field(path: &Path, field: &ScalarField) -> Result<()> {
    write_field_csv(field, BufWriter::new(File::create(path)?))?;
    save_json(&sidecar_path(path), &field.grid)
}

pub fn load_field(path: &Path) -> Result<ScalarField> {
    let grid: StripGrid = load_json(&sidecar_path(path))?;
    let grid = StripGrid::new(grid.m, grid.nx, grid.ny)?;
    read_field_csv(BufReader::new(File::open(path)?), grid)
}

/// Sidecar of a trace file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub window: (f64, f64),
    pub spacing: f64,
}

impl TraceMeta {
    pub fn of(trace: &Trace) -> Self {
        TraceMeta { window: trace.window(), spacing: trace.spacing }
    }

    fn len(&self) -> usize {
        ((self.window.1 - self.window.0) / self.spacing).round() as usize + 1
    }
}

pub fn write_trace_csv<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "theta"])?;
    for (i, v) in trace.values.iter().enumerate() {
        w.write_record([fmt(trace.x(i)), fmt(*v)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R, meta: TraceMeta) -> Result<Trace> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["x", "theta"] {
        return Err(WallError::Malformed(format!("expected header x,theta, got {headers:?}")));
    }
    let tol = 1e-9 * meta.window.0.abs().max(meta.window.1.abs()).max(1.0);
    let mut values = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(WallError::Malformed(format!("row {n} has {} columns", rec.len())));
        }
        let x = parse(&rec[0], "x")?;
        let want = meta.window.0 + n as f64 * meta.spacing;
        if (x - want).abs() > tol {
            return Err(WallError::Malformed(format!("row {n} at x = {x}, expected {want}")));
        }
        values.push(parse(&rec[1], "theta")?);
    }
    if values.len() != meta.len() {
        return Err(WallError::ShapeMismatch(format!("expected {} samples, got {}", meta.len(), values.len())));
    }
    Trace::new(meta.window.0, meta.spacing, values)
}

pub fn save_trace(path: &Path, trace: &Trace) -> Result<()> {
    write_trace_csv(trace, BufWriter::new(File::create(path)?))?;
    save_json(&sidecar_path(path), &TraceMeta::of(trace))
}

pub fn load_trace(path: &Path) -> Result<Trace> {
    let meta: TraceMeta = load_json(&sidecar_path(path))?;
    read_trace_csv(BufReader::new(File::open(path)?), meta)
}

pub fn save_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::EnergyBreakdown;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn field_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let g = StripGrid::new(3.7, 23, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = ScalarField::from_fn(g, |_, _| rng.gen_range(-10.0..10.0) * 1e-3f64.powi(rng.gen_range(0..4)));
        let path = dir.path().join("field.csv");
        save_field(&path, &f).unwrap();
        let back = load_field(&path).unwrap();
        assert_eq!(back.grid, g);
        assert!(f.values.iter().zip(&back.values).all(|(a, b)| a.to_bits() == b.to_bits()));
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x,y,theta\n"));
        let side = std::fs::read_to_string(sidecar_path(&path)).unwrap();
        assert!(side.contains("\"M\""));
    }

    #[test]
    fn trace_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let t = Trace::sample_symmetric(5.0, 0.1, |x| (x * 1.3).atan() + 1e-17 * x);
        let path = dir.path().join("trace.csv");
        save_trace(&path, &t).unwrap();
        let back = load_trace(&path).unwrap();
        assert_eq!(back.x0.to_bits(), t.x0.to_bits());
        assert!(t.values.iter().zip(&back.values).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn rejects_malformed_files() {
        let g = StripGrid::new(1.0, 3, 3).unwrap();
        assert!(read_field_csv("a,b,c\n".as_bytes(), g).is_err());
        assert!(read_field_csv("x,y,theta\n-1,0,0\n".as_bytes(), g).is_err());
        assert!(read_field_csv("x,y,theta\n0,0,0\n".as_bytes(), g).is_err());
        let meta = TraceMeta { window: (0.0, 1.0), spacing: 0.5 };
        assert!(read_trace_csv("x,theta\n0,1\n0.5,2\n".as_bytes(), meta).is_err());
        assert!(read_trace_csv("x,theta\n0,1\n0.5,oops\n1,0\n".as_bytes(), meta).is_err());
        assert!(read_trace_csv("x,theta\n0,1\n0.5,2\n1,0\n".as_bytes(), meta).is_ok());
    }

    #[test]
    fn breakdown_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let e = EnergyBreakdown::new(1.25, 0.1, 1.0 / 3.0, 0.0);
        let path = dir.path().join("e.json");
        save_json(&path, &e).unwrap();
        let back: EnergyBreakdown = load_json(&path).unwrap();
        assert_eq!(back, e);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn any_finite_value_survives_csv(v in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
            let g = StripGrid::new(1.0, 3, 3).unwrap();
            let f = ScalarField::from_fn(g, |x, y| v * (1.0 + x + y));
            let mut buf = Vec::new();
            write_field_csv(&f, &mut buf).unwrap();
            let back = read_field_csv(buf.as_slice(), g).unwrap();
            prop_assert!(f.values.iter().zip(&back.values).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
