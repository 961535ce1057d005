// SPDX-License-Identifier: Apache-2.0

//! Matrix-free iterative solvers for the real symmetric positive definite
//! self-consistency system `(I - gamma M) x = Gamma b`.

/// Result of an iterative solve.
#[derive(Debug, Clone)]
pub struct IterativeOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual `||b - A x|| / ||x||` after each iteration,
    /// recomputed from scratch at the end.
    pub history: Vec<f64>,
    pub converged: bool,
}

impl IterativeOutcome {
    pub fn final_residual(&self) -> f64 {
        self.history.last().copied().unwrap_or(f64::INFINITY)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Preconditioned conjugate gradients.
///
/// Iterates until the true relative residual `||b - A x|| / ||x||` drops to
/// `tolerance`, then keeps going while the residual still improves, down to
/// `polish` or until `max_iterations`. The residual is recomputed explicitly
/// every `restart` iterations to stop recurrence drift.
#[allow(clippy::too_many_arguments)]
pub fn preconditioned_cg(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    precondition: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: Vec<f64>,
    tolerance: f64,
    polish: f64,
    max_iterations: usize,
    restart: usize,
) -> IterativeOutcome {
    let n = b.len();
    let mut x = x0;
    let ax = apply(&x);
    let mut r: Vec<f64> = (0..n).map(|i| b[i] - ax[i]).collect();
    let mut history = vec![norm(&r) / norm(&x).max(f64::MIN_POSITIVE)];
    let mut best = (history[0], x.clone());
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    let mut stalled = 0;

    while iterations < max_iterations {
        let current = *history.last().unwrap();
        if current <= polish || (current <= tolerance && stalled >= 3) {
            break;
        }
        let ap = apply(&p);
        iterations += 1;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        if iterations % restart.max(1) == 0 {
            let ax = apply(&x);
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
        }
        let rel = norm(&r) / norm(&x).max(f64::MIN_POSITIVE);
        history.push(rel);
        if rel < best.0 * 0.9 {
            stalled = 0;
        } else {
            stalled += 1;
        }
        if rel < best.0 {
            best = (rel, x.clone());
        }
        if !rel.is_finite() {
            break;
        }
        z = precondition(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    // Report the true residual of the best iterate.
    let x = best.1;
    let ax = apply(&x);
    let true_res = norm(&(0..n).map(|i| b[i] - ax[i]).collect::<Vec<_>>()) / norm(&x).max(f64::MIN_POSITIVE);
    history.push(true_res);
    IterativeOutcome {
        converged: true_res <= tolerance,
        x,
        iterations,
        history,
    }
}

/// Damped fixed-point iteration `x <- (1 - omega) x + omega (x + b - A x)`.
pub fn damped_fixed_point(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: Vec<f64>,
    omega: f64,
    tolerance: f64,
    max_iterations: usize,
) -> IterativeOutcome {
    let n = b.len();
    let mut x = x0;
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let ax = apply(&x);
        let r: Vec<f64> = (0..n).map(|i| b[i] - ax[i]).collect();
        let rel = norm(&r) / norm(&x).max(f64::MIN_POSITIVE);
        history.push(rel);
        if rel <= tolerance || iterations >= max_iterations || !rel.is_finite() {
            return IterativeOutcome {
                converged: rel <= tolerance,
                x,
                iterations,
                history,
            };
        }
        for i in 0..n {
            x[i] += omega * r[i];
        }
        iterations += 1;
    }
}
