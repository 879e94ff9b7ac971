//! Projected steepest descent with Armijo backtracking.
//!
//! All solvers in the crate share this loop. The search direction is the
//! gradient scaled by a diagonal metric (the nodal quadrature weights), the
//! first trial step of every iteration is a Barzilai-Borwein estimate, and
//! the step is halved until the Armijo condition holds. Iterates are
//! projected onto a box after each trial step, so an accepted step never
//! increases the objective and never leaves the box.

use serde::{Deserialize, Serialize};

/// A differentiable objective on `R^n`.
pub trait Objective {
    /// Returns the value at `x` and writes the gradient into `grad`.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;

    /// `f(b) - f(a)` computed without cancellation, if the objective knows
    /// how. Near a minimizer the plain difference of two values drowns in
    /// rounding long before the gradient tolerance is met.
    fn difference(&self, _a: &[f64], _b: &[f64]) -> Option<f64> {
        None
    }
}

impl<F: Fn(&[f64], &mut [f64]) -> f64> Objective for F {
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self(x, grad)
    }
}

#[derive(Clone, Debug)]
pub struct DescentConfig {
    pub max_iters: usize,
    /// Stop when the sup norm of the projected, metric-scaled gradient is
    /// at most this.
    pub grad_tol: f64,
    /// Stop when the relative energy change over `energy_window` accepted
    /// steps is at most this.
    pub energy_tol: f64,
    pub energy_window: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Step used on the first iteration and after a failed curvature
    /// estimate.
    pub initial_step: f64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        DescentConfig {
            max_iters: 100_000,
            grad_tol: 1e-8,
            energy_tol: 1e-12,
            energy_window: 10,
            armijo_c: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
            initial_step: 1e-3,
        }
    }
}

/// Which coordinates may move, the diagonal metric, and the box.
#[derive(Clone, Debug)]
pub struct Constraints {
    pub free: Vec<bool>,
    pub metric: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
}

impl Constraints {
    pub fn unconstrained(n: usize) -> Self {
        Constraints { free: vec![true; n], metric: vec![1.0; n], lower: f64::NEG_INFINITY, upper: f64::INFINITY }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    EnergyStagnation,
    MaxIterations,
    LineSearchStalled,
}

impl StopReason {
    pub fn is_converged(self) -> bool {
        matches!(self, StopReason::GradientTolerance | StopReason::EnergyStagnation)
    }
}

#[derive(Clone, Debug)]
pub struct DescentOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub stop: StopReason,
    /// Projected, metric-scaled gradient sup norm at the final iterate.
    pub grad_norm: f64,
    /// Objective after every accepted step, starting with the initial value.
    /// Entries after the first are accumulated from the accepted
    /// differences, so the sequence is non-increasing by construction.
    pub history: Vec<f64>,
}

impl DescentOutcome {
    pub fn converged(&self) -> bool {
        self.stop.is_converged()
    }
}

fn projected_direction(x: &[f64], g: &[f64], c: &Constraints, d: &mut [f64]) -> f64 {
    let mut norm = 0.0f64;
    for i in 0..x.len() {
        let mut di = 0.0;
        if c.free[i] {
            di = g[i] / c.metric[i];
            // A blocked component would push the iterate out of the box.
            if (x[i] <= c.lower && di > 0.0) || (x[i] >= c.upper && di < 0.0) {
                di = 0.0;
            }
        }
        d[i] = di;
        norm = norm.max(di.abs());
    }
    norm
}

/// Runs the descent from `x0`. `hook` is called after every accepted step
/// with the iteration count and the iterate; returning `true` signals that
/// the hook modified the iterate, which resets the step-size memory.
pub fn descend<O: Objective + ?Sized>(
    obj: &O,
    x0: Vec<f64>,
    cons: &Constraints,
    cfg: &DescentConfig,
    mut hook: Option<&mut dyn FnMut(usize, &mut [f64]) -> bool>,
) -> DescentOutcome {
    let n = x0.len();
    let mut x = x0;
    for i in 0..n {
        if cons.free[i] {
            x[i] = x[i].clamp(cons.lower, cons.upper);
        }
    }
    let mut g = vec![0.0; n];
    let mut f = obj.value_grad(&x, &mut g);
    let mut d = vec![0.0; n];
    let mut grad_norm = projected_direction(&x, &g, cons, &mut d);
    let mut history = vec![f];
    let mut running = f;
    let mut recent = std::collections::VecDeque::with_capacity(cfg.energy_window + 1);
    let mut step = cfg.initial_step;
    let mut xt = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let mut iterations = 0;

    let stop = loop {
        if grad_norm <= cfg.grad_tol {
            break StopReason::GradientTolerance;
        }
        if iterations >= cfg.max_iters {
            break StopReason::MaxIterations;
        }
        let mut alpha = step;
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let mut decrease = 0.0;
            for i in 0..n {
                xt[i] = if d[i] != 0.0 { (x[i] - alpha * d[i]).clamp(cons.lower, cons.upper) } else { x[i] };
                decrease += g[i] * (x[i] - xt[i]);
            }
            let ft = obj.value_grad(&xt, &mut gt);
            if !ft.is_finite() {
                alpha *= cfg.backtrack;
                continue;
            }
            let delta = obj.difference(&x, &xt).unwrap_or(ft - f);
            if delta <= -cfg.armijo_c * decrease && decrease > 0.0 {
                accepted = Some((ft, delta));
                break;
            }
            alpha *= cfg.backtrack;
        }
        let Some((ft, delta)) = accepted else {
            break StopReason::LineSearchStalled;
        };
        assert!(delta <= 0.0, "accepted step increased the objective by {delta}");
        iterations += 1;

        // Barzilai-Borwein estimate for the next trial step, in the metric.
        let (mut ss, mut sy) = (0.0, 0.0);
        for i in 0..n {
            if cons.free[i] {
                let s = xt[i] - x[i];
                ss += cons.metric[i] * s * s;
                sy += s * (gt[i] - g[i]);
            }
        }
        step = if sy > 0.0 && ss > 0.0 { ss / sy } else { (2.0 * alpha).max(cfg.initial_step) };

        std::mem::swap(&mut x, &mut xt);
        std::mem::swap(&mut g, &mut gt);
        f = ft;
        running += delta;
        if let Some(h) = hook.as_deref_mut() {
            if h(iterations, &mut x) {
                f = obj.value_grad(&x, &mut g);
                running = f;
                recent.clear();
                step = cfg.initial_step;
            }
        }
        history.push(running);
        grad_norm = projected_direction(&x, &g, cons, &mut d);

        // The window change is summed from the accurate differences; the
        // running value itself stops moving once they fall below its ulp.
        recent.push_back(delta);
        if recent.len() > cfg.energy_window {
            recent.pop_front();
        }
        if recent.len() == cfg.energy_window {
            let change: f64 = recent.iter().sum();
            if change.abs() <= cfg.energy_tol * running.abs().max(f64::MIN_POSITIVE) {
                break StopReason::EnergyStagnation;
            }
        }
    };
    DescentOutcome { x, value: f, iterations, stop, grad_norm, history }
}
