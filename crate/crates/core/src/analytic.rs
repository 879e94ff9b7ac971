//! Closed-form kernels, symbols and wall profiles.
//!
//! All kernels are written in terms of `u = exp(-2 pi |x|)` so that they stay
//! finite and accurate for large `|x|`, where the textbook hyperbolic forms
//! overflow.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WallError};
use crate::grid::{ScalarField, Trace};

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(WallError::Domain(format!("eps = {eps} must lie in (0, 1/2)")));
    }
    Ok(())
}

/// Dirichlet-to-Neumann kernel of the unit strip, `pi cosh(pi x) / sinh^2(pi x)`.
pub fn kernel_k(x: f64) -> Result<f64> {
    if x == 0.0 || !x.is_finite() {
        return Err(WallError::Domain(format!("kernel_k is singular or undefined at x = {x}")));
    }
    let a = PI * x.abs();
    let u = (-2.0 * a).exp();
    let one_minus_u = -(-2.0 * a).exp_m1();
    Ok(2.0 * PI * (-a).exp() * (1.0 + u) / (one_minus_u * one_minus_u))
}

/// Regularized kernel, the inverse transform of [`symbol_khat_eps`].
/// It is smooth, changes sign near the origin and integrates to zero.
pub fn kernel_k_eps(x: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    if !x.is_finite() {
        return Err(WallError::Domain(format!("kernel_k_eps undefined at x = {x}")));
    }
    let a = PI * x.abs();
    let u = (-2.0 * a).exp();
    let c = (2.0 * PI * eps).cos();
    let num = (1.0 + u) * (1.0 + u * u + 2.0 * u * (c - 2.0));
    let den = 1.0 + u * u - 2.0 * u * c;
    Ok(2.0 * PI * (PI * eps).cos() * (-a).exp() * num / (den * den))
}

/// Symbol of the strip Dirichlet-to-Neumann map, `-k tanh(k/2)`.
pub fn symbol_khat(k: f64) -> f64 {
    -k * (0.5 * k).tanh()
}

/// Regularized symbol `k (sinh(k eps) - tanh(k/2) cosh(k eps))`, evaluated
/// as `-|k| sinh(|k|(1/2 - eps)) / cosh(k/2)`.
pub fn symbol_khat_eps(k: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let ak = k.abs();
    let b = ak * (0.5 - eps);
    Ok(-ak * (-ak * eps).exp() * (-(-2.0 * b).exp_m1()) / (1.0 + (-ak).exp()))
}

/// Poisson kernel of the strip for data on `y = 0` mirrored to `y = 1`.
pub fn poisson_p(x: f64, y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) || !x.is_finite() {
        return Err(WallError::Domain(format!("poisson_p needs y in [0, 1], got ({x}, {y})")));
    }
    let s = (PI * y).sin();
    if x == 0.0 && (y == 0.0 || y == 1.0) {
        return Err(WallError::Domain(format!("poisson_p has a pole at ({x}, {y})")));
    }
    let a = PI * x.abs();
    let u = (-2.0 * a).exp();
    let om = -(-2.0 * a).exp_m1();
    Ok(s * 2.0 * (-a).exp() * (1.0 + u) / (om * om + 4.0 * u * s * s))
}

/// `int_{-inf}^x P(t, y) dt`, which rises from 0 to 1.
pub fn poisson_p_cdf(x: f64, y: f64) -> f64 {
    0.5 + ((PI * x).sinh() / (PI * y).sin()).atan() / PI
}

/// Named closed-form profiles. One-dimensional profiles ignore `y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Profile {
    /// Transverse wall of the thin wire, `m = (tanh(x/sqrt2), sech(x/sqrt2))`.
    Transverse1d,
    /// `pi - 2 arctan(e^{2x})`.
    SmallGamma,
    /// `2 arctan(e^{2 sqrt(gamma) x})`, the wall of the local ODE.
    OdeWall { gamma: f64 },
    /// `pi/2 - arctan(2 gamma x)`, running from `pi` down to `0`.
    BoundaryVortex { gamma: f64 },
    /// `pi/2 - arctan(sinh(pi x) / sin(pi y))`.
    LargeGamma2d,
    /// Smooth harmonic version of `LargeGamma2d`, with the boundary
    /// vortices pulled a distance `eps` into the strip.
    LargeGammaRegularized { eps: f64 },
}

impl Profile {
    /// Builds a profile from its name; `gamma` is required by the
    /// parametrized profiles, and `LargeGammaRegularized` reads it as `eps`.
    pub fn from_name(name: &str, gamma: Option<f64>) -> Result<Profile> {
        let need = |what: &str| -> Result<f64> {
            match gamma {
                Some(g) if g > 0.0 && g.is_finite() => Ok(g),
                _ => Err(WallError::InvalidParams(format!("profile {what} needs a positive parameter"))),
            }
        };
        let p = match name {
            "transverse_1d" => Profile::Transverse1d,
            "small_gamma" => Profile::SmallGamma,
            "ode_wall" => Profile::OdeWall { gamma: need(name)? },
            "boundary_vortex" => Profile::BoundaryVortex { gamma: need(name)? },
            "large_gamma_2d" => Profile::LargeGamma2d,
            "large_gamma_regularized" => {
                let eps = need(name)?;
                check_eps(eps)?;
                Profile::LargeGammaRegularized { eps }
            }
            other => return Err(WallError::InvalidParams(format!("unknown profile '{other}'"))),
        };
        Ok(p)
    }

    pub fn is_two_dimensional(&self) -> bool {
        matches!(self, Profile::LargeGamma2d | Profile::LargeGammaRegularized { .. })
    }

    /// Angle at `(x, y)`.
    pub fn angle(&self, x: f64, y: f64) -> f64 {
        match *self {
            Profile::Transverse1d => 2.0 * (-x / SQRT_2).exp().atan(),
            Profile::SmallGamma => PI - 2.0 * (2.0 * x).exp().atan(),
            Profile::OdeWall { gamma } => 2.0 * (2.0 * gamma.sqrt() * x).exp().atan(),
            Profile::BoundaryVortex { gamma } => FRAC_PI_2 - (2.0 * gamma * x).atan(),
            Profile::LargeGamma2d => FRAC_PI_2 - ((PI * x).sinh() / (PI * y).sin()).atan(),
            Profile::LargeGammaRegularized { eps } => {
                let s = 1.0 - 2.0 * eps;
                FRAC_PI_2 - ((PI * s * x).sinh() / (PI * (s * y + eps)).sin()).atan()
            }
        }
    }

    /// Magnetization components `(cos, sin)` of the angle.
    pub fn components(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            Profile::Transverse1d => ((x / SQRT_2).tanh(), 1.0 / (x / SQRT_2).cosh()),
            _ => {
                let t = self.angle(x, y);
                (t.cos(), t.sin())
            }
        }
    }

    /// Samples the profile along `y = 0` (or the given `y` for the planar
    /// profiles) on `n` points of `[a, b]`.
    pub fn trace(&self, a: f64, b: f64, n: usize, y: f64) -> Trace {
        Trace::sample(a, b, n, |x| self.angle(x, y))
    }
}

impl FromStr for Profile {
    type Err = WallError;

    fn from_str(s: &str) -> Result<Profile> {
        match s.split_once(':') {
            Some((name, v)) => {
                let g = v
                    .parse::<f64>()
                    .map_err(|_| WallError::InvalidParams(format!("bad profile parameter '{v}'")))?;
                Profile::from_name(name, Some(g))
            }
            None => Profile::from_name(s, None),
        }
    }
}

/// Residual of the local wall ODE, `theta'' - 2 gamma sin(2 theta)`, with a
/// centered second difference. The ends use the constant tail extension.
pub fn residual_ode(trace: &Trace, gamma: f64) -> Trace {
    let h = trace.spacing;
    let n = trace.len() as isize;
    let values = (0..n)
        .map(|i| {
            let t = trace.at(i);
            (trace.at(i + 1) - 2.0 * t + trace.at(i - 1)) / (h * h) - 2.0 * gamma * (2.0 * t).sin()
        })
        .collect();
    Trace { x0: trace.x0, spacing: h, values }
}

/// Closed-form profile a strip minimizer approaches in one of the two
/// extreme regimes, and the sup distance to it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeDistance {
    pub profile: Profile,
    pub distance: f64,
}

/// Sup distance between the bottom row of a centered decreasing wall and
/// `pi - 2 arctan(e^{2 sqrt(gamma) x})`, over `|sqrt(gamma) x| <= 3`.
pub fn small_gamma_distance(field: &ScalarField, gamma: f64) -> f64 {
    let g = field.grid;
    let s = gamma.sqrt();
    (0..g.nx)
        .filter(|&i| (s * g.x(i)).abs() <= 3.0)
        .fold(0.0, |m, i| m.max((field.get(i, 0) - Profile::SmallGamma.angle(s * g.x(i), 0.0)).abs()))
}

/// Sup distance between a centered decreasing wall and the planar
/// large-`gamma` profile over `|x| <= 1`, `0.2 <= y <= 0.8`.
pub fn large_gamma_distance(field: &ScalarField) -> f64 {
    let g = field.grid;
    let mut worst = 0.0f64;
    for j in 0..g.ny {
        let y = g.y(j);
        if !(0.2 - 1e-12..=0.8 + 1e-12).contains(&y) {
            continue;
        }
        for i in 0..g.nx {
            let x = g.x(i);
            if x.abs() <= 1.0 {
                worst = worst.max((field.get(i, j) - Profile::LargeGamma2d.angle(x, y)).abs());
            }
        }
    }
    worst
}

/// Distance to the small-`gamma` profile for `gamma <= 1` and to the
/// planar one above.
pub fn regime_distance(field: &ScalarField, gamma: f64) -> RegimeDistance {
    if gamma <= 1.0 {
        RegimeDistance { profile: Profile::OdeWall { gamma }, distance: small_gamma_distance(field, gamma) }
    } else {
        RegimeDistance { profile: Profile::LargeGamma2d, distance: large_gamma_distance(field) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textbook_k(x: f64) -> f64 {
        PI * (PI * x).cosh() / (PI * x).sinh().powi(2)
    }

    #[test]
    fn kernel_values() {
        assert!((kernel_k(1.0).unwrap() - 0.27307).abs() < 1e-4);
        for &x in &[0.01, 0.3, 1.0, 2.5, 7.0] {
            let k = kernel_k(x).unwrap();
            assert!((k - textbook_k(x)).abs() <= 1e-12 * k);
            assert_eq!(k, kernel_k(-x).unwrap());
        }
        let x = 1e-4;
        assert!((x * x * kernel_k(x).unwrap() - 1.0 / PI).abs() < 1e-6);
        assert!(kernel_k(0.0).is_err());
        assert!(kernel_k(400.0).unwrap().is_finite());
    }

    #[test]
    fn regularized_kernel() {
        assert!((kernel_k_eps(1.0, 1e-6).unwrap() - kernel_k(1.0).unwrap()).abs() <= 1e-4);
        for eps in [0.01, 0.1, 0.3, 0.49] {
            for i in 1..200 {
                let x = i as f64 * 0.03;
                let ke = kernel_k_eps(x, eps).unwrap();
                assert!(ke.abs() <= kernel_k(x).unwrap() * (1.0 + 1e-12), "eps {eps} x {x}");
                assert_eq!(ke, kernel_k_eps(-x, eps).unwrap());
            }
        }
        assert!(kernel_k_eps(1.0, 0.5).is_err());
        assert!(kernel_k_eps(1.0, 0.0).is_err());
    }

    #[test]
    fn regularized_kernel_matches_textbook_form() {
        let (x, eps) = (0.37_f64, 0.12_f64);
        let (a, c) = (PI * x, (2.0 * PI * eps).cos());
        let direct = 2.0 * PI * (PI * eps).cos() * a.cosh() * (c + (2.0 * a).cosh() - 2.0)
            / (c - (2.0 * a).cosh()).powi(2);
        assert!((kernel_k_eps(x, eps).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn symbols() {
        assert_eq!(symbol_khat(0.0), 0.0);
        assert!((symbol_khat(2.0) + 2.0 * 1f64.tanh()).abs() < 1e-12);
        for eps in [0.01, 0.2, 0.45] {
            for i in 1..100 {
                let k = 0.37 * i as f64 - 18.0;
                if k == 0.0 {
                    continue;
                }
                let ke = symbol_khat_eps(k, eps).unwrap();
                let direct = k * ((k * eps).sinh() - (0.5 * k).tanh() * (k * eps).cosh());
                assert!((ke - direct).abs() <= 1e-10 * direct.abs().max(1.0));
                assert!(ke < 0.0 && ke >= symbol_khat(k) - 1e-12);
            }
        }
        assert!(symbol_khat_eps(1e4, 0.1).unwrap().is_finite());
    }

    #[test]
    fn sampled_kernel_transforms_to_symbol() {
        let (eps, h, half) = (0.1, 1e-3, 25.0);
        let n = (half / h) as i64;
        let ks: Vec<f64> = (0..n).map(|i| kernel_k_eps((i as f64 + 0.5) * h, eps).unwrap()).collect();
        for q in 0..=20 {
            let k = 0.5 * q as f64;
            let s: f64 = ks.iter().enumerate().map(|(i, v)| 2.0 * h * v * (k * (i as f64 + 0.5) * h).cos()).sum();
            assert!((s - symbol_khat_eps(k, eps).unwrap()).abs() < 1e-4, "k {k}: {s}");
        }
    }

    #[test]
    fn poisson_kernel() {
        assert!((poisson_p(0.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!(poisson_p(0.0, 0.0).is_err());
        assert!(poisson_p(0.0, 1.0).is_err());
        for y in [0.1, 0.5] {
            let h = 1e-3;
            let mass: f64 = (-20000..=20000).map(|i| h * poisson_p(i as f64 * h, y).unwrap()).sum();
            assert!((mass - 1.0).abs() < 1e-8, "y {y}: {mass}");
            for i in -50..50 {
                assert!(poisson_p(0.1 * i as f64 + 0.05, y).unwrap() > 0.0);
            }
        }
        let direct = |x: f64, y: f64| {
            2.0 * (PI * x).cosh() * (PI * y).sin() / ((2.0 * PI * x).cosh() - (2.0 * PI * y).cos())
        };
        assert!((poisson_p(0.7, 0.3).unwrap() - direct(0.7, 0.3)).abs() < 1e-14);
        let (x, y, d) = (0.4, 0.23, 1e-5);
        let deriv = (poisson_p_cdf(x + d, y) - poisson_p_cdf(x - d, y)) / (2.0 * d);
        assert!((deriv - poisson_p(x, y).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn profiles() {
        let bv = Profile::from_name("boundary_vortex", Some(3.0)).unwrap();
        assert_eq!(bv.angle(0.0, 0.0), FRAC_PI_2);
        for y in [0.1, 0.5, 0.9] {
            assert!((Profile::LargeGamma2d.angle(0.0, y) - FRAC_PI_2).abs() < 1e-15);
        }
        let sg = Profile::SmallGamma;
        assert!((sg.angle(0.0, 0.0) - FRAC_PI_2).abs() < 1e-15);
        assert!(sg.angle(40.0, 0.0) < 1e-15);
        assert!((sg.angle(-40.0, 0.0) - PI).abs() < 1e-15);
        for &x in &[-3.0, -0.4, 0.0, 1.2] {
            let (c, s) = Profile::Transverse1d.components(x, 0.0);
            let t = Profile::Transverse1d.angle(x, 0.0);
            assert!((c - t.cos()).abs() < 1e-14 && (s - t.sin()).abs() < 1e-14);
        }
        assert!(Profile::from_name("nope", None).is_err());
        assert!(Profile::from_name("ode_wall", None).is_err());
        assert_eq!("ode_wall:4".parse::<Profile>().unwrap(), Profile::OdeWall { gamma: 4.0 });
    }

    #[test]
    fn regularized_profile_tends_to_planar() {
        let p = Profile::LargeGammaRegularized { eps: 1e-9 };
        assert!((p.angle(0.3, 0.4) - Profile::LargeGamma2d.angle(0.3, 0.4)).abs() < 1e-7);
    }

    #[test]
    fn planar_profile_is_harmonic() {
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
        assert!(b < 0.3 * a && b < 0.1, "{a} {b}");
    }

    #[test]
    fn ode_residual() {
        assert!(residual_ode(&Trace::sample(-5.0, 5.0, 101, |_| 0.0), 2.0).values.iter().all(|&v| v == 0.0));
        let lin = Trace::sample(-1.0, 1.0, 21, |x| x);
        let r = residual_ode(&lin, 1.5);
        for i in 1..20 {
            let x = lin.x(i);
            assert!((r.values[i] + 3.0 * (2.0 * x).sin()).abs() < 1e-9);
        }
        let gamma = 1.7;
        let wall = Profile::OdeWall { gamma };
        let sup = |n: usize| {
            let t = wall.trace(-6.0, 6.0, n, 0.0);
            let r = residual_ode(&t, gamma);
            r.values[1..n - 1].iter().fold(0.0f64, |m, v| m.max(v.abs()))
        };
        let (a, b) = (sup(601), sup(1201));
        assert!((a / b - 4.0).abs() < 0.2, "{a} {b}");
    }

    #[test]
    fn regime_distances_vanish_on_their_profiles() {
        let g = crate::grid::StripGrid::new(40.0, 401, 11).unwrap();
        let gamma: f64 = 0.04;
        let f = ScalarField::from_fn(g, |x, _| Profile::SmallGamma.angle(gamma.sqrt() * x, 0.0));
        assert!(small_gamma_distance(&f, gamma) < 1e-15);
        assert_eq!(regime_distance(&f, gamma).profile, Profile::OdeWall { gamma });
        let g = crate::grid::StripGrid::new(2.0, 41, 11).unwrap();
        let f = ScalarField::from_fn(g, |x, y| Profile::LargeGamma2d.angle(x, y));
        assert!(large_gamma_distance(&f) < 1e-15);
        let shifted = ScalarField::from_fn(g, |x, y| Profile::LargeGamma2d.angle(x + 0.1, y));
        assert!(regime_distance(&shifted, 100.0).distance > 0.1);
    }
}
