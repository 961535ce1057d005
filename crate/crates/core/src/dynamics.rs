// SPDX-License-Identifier: Apache-2.0

//! Fixed-step RK4 integration of the correlation-matrix equation of motion.

use faer::linalg::matmul::matmul;
use faer::{c64, Accum, Mat, MatMut, MatRef, Par};

use crate::error::{Error, Result};
use crate::lattice::HoppingMatrix;
use crate::lindblad::{build_damping, CorrelationMatrix, DissipationSpec};

/// Integration controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveControls {
    pub t_final: f64,
    /// Upper bound on `h * (||H||_2 + max D)`.
    pub step_scale: f64,
    /// Number of evenly spaced snapshots kept besides the initial state.
    pub samples: usize,
}

impl EvolveControls {
    pub fn new(t_final: f64) -> Self {
        Self {
            t_final,
            step_scale: 0.1,
            samples: 0,
        }
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<CorrelationMatrix>,
    pub final_state: CorrelationMatrix,
    pub step: f64,
    pub steps: usize,
}

struct Generator {
    n: usize,
    hopping: Vec<f64>,
    damping: Vec<f64>,
    dephasing: f64,
    boundary: f64,
}

/// `C = re + i im`, both column-major `n x n`.
#[derive(Clone)]
struct SplitState {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl SplitState {
    fn zeros(n: usize) -> Self {
        Self {
            re: vec![0.0; n * n],
            im: vec![0.0; n * n],
        }
    }

    fn from_matrix(c: &Mat<c64>) -> Self {
        let n = c.nrows();
        let mut s = Self::zeros(n);
        for j in 0..n {
            for i in 0..n {
                let z = c[(i, j)];
                s.re[i + j * n] = z.re;
                s.im[i + j * n] = z.im;
            }
        }
        s
    }

    fn to_matrix(&self, n: usize) -> Mat<c64> {
        Mat::from_fn(n, n, |i, j| c64::new(self.re[i + j * n], self.im[i + j * n]))
    }

    /// `self = x + a k`.
    fn assign_axpy(&mut self, x: &Self, k: &Self, a: f64) {
        for (d, (x, k)) in self.re.iter_mut().zip(x.re.iter().zip(&k.re)) {
            *d = x + a * k;
        }
        for (d, (x, k)) in self.im.iter_mut().zip(x.im.iter().zip(&k.im)) {
            *d = x + a * k;
        }
    }

    /// Projects onto Hermitian matrices.
    fn symmetrize(&mut self, n: usize) {
        for j in 0..n {
            for i in j + 1..n {
                let (u, l) = (i + j * n, j + i * n);
                let r = 0.5 * (self.re[u] + self.re[l]);
                self.re[u] = r;
                self.re[l] = r;
                let m = 0.5 * (self.im[u] - self.im[l]);
                self.im[u] = m;
                self.im[l] = -m;
            }
            self.im[j + j * n] = 0.0;
        }
    }

    fn is_finite(&self) -> bool {
        self.re.iter().chain(&self.im).all(|v| v.is_finite())
    }
}

fn product(dst: &mut [f64], lhs: &[f64], rhs: &[f64], n: usize) {
    matmul(
        MatMut::from_column_major_slice_mut(dst, n, n),
        Accum::Replace,
        MatRef::from_column_major_slice(lhs, n, n),
        MatRef::from_column_major_slice(rhs, n, n),
        1.0,
        Par::Seq,
    );
}

impl Generator {
    /// With `K = H_eff C` and Hermitian `C`, `C H_eff^dag = K^dag`, so
    /// `dC/dt = -i (K - K^dag) + P`. `H` is real, so `K` takes two real
    /// products.
    fn rhs(&self, c: &SplitState, k: &mut SplitState, out: &mut SplitState) {
        let n = self.n;
        product(&mut k.re, &self.hopping, &c.re, n);
        product(&mut k.im, &self.hopping, &c.im, n);
        for j in 0..n {
            for i in 0..n {
                let at = i + j * n;
                let d = self.damping[i];
                k.re[at] += d * c.im[at];
                k.im[at] -= d * c.re[at];
            }
        }
        for j in 0..n {
            for i in 0..n {
                let (at, tr) = (i + j * n, j + i * n);
                out.re[at] = k.im[at] + k.im[tr];
                out.im[at] = k.re[tr] - k.re[at];
            }
        }
        for m in 0..n {
            out.re[m + m * n] += self.dephasing * c.re[m + m * n];
        }
        out.re[n * n - 1] += self.boundary;
    }
}

/// Integrates `C(t)` from `c0` to `controls.t_final` with classical RK4 and a
/// fixed step satisfying `h (||H||_2 + max D) <= step_scale`. The state is
/// re-Hermitized after every step.
pub fn evolve(
    c0: &CorrelationMatrix,
    h: &HoppingMatrix,
    diss: &DissipationSpec,
    controls: &EvolveControls,
) -> Result<Trajectory> {
    let n = h.sites();
    if c0.sites() != n {
        return Err(Error::Domain(format!(
            "initial state has {} sites, lattice has {n}",
            c0.sites()
        )));
    }
    if !(controls.t_final.is_finite() && controls.t_final >= 0.0) {
        return Err(Error::Domain(format!(
            "t_final must be finite and >= 0, got {}",
            controls.t_final
        )));
    }
    if controls.t_final == 0.0 {
        return Ok(Trajectory {
            times: vec![0.0],
            snapshots: vec![c0.clone()],
            final_state: c0.clone(),
            step: 0.0,
            steps: 0,
        });
    }

    let damping = build_damping(n, diss);
    let rate = h.spectral_norm() + damping.iter().cloned().fold(0.0, f64::max);
    let h_max = controls.step_scale / rate;
    let steps_f = (controls.t_final / h_max).ceil();
    if !(h_max > 0.0) || !steps_f.is_finite() || steps_f > 1e10 {
        return Err(Error::Integration {
            time: 0.0,
            reason: format!("step size underflow (h_max = {h_max:.3e})"),
        });
    }
    let steps = steps_f.max(1.0) as usize;
    let step = controls.t_final / steps as f64;

    let gen = Generator {
        n,
        hopping: (0..n * n).map(|k| h.get(k % n, k / n)).collect(),
        damping,
        dephasing: diss.dephasing(),
        boundary: diss.boundary(),
    };

    let sample_every = steps.checked_div(controls.samples).map_or(usize::MAX, |k| k.max(1));
    let mut times = vec![0.0];
    let mut snapshots = vec![c0.clone()];

    let mut c = SplitState::from_matrix(c0.matrix());
    let mut scratch = SplitState::zeros(n);
    let mut k1 = SplitState::zeros(n);
    let mut k2 = SplitState::zeros(n);
    let mut k3 = SplitState::zeros(n);
    let mut k4 = SplitState::zeros(n);
    let mut stage = SplitState::zeros(n);

    for s in 1..=steps {
        gen.rhs(&c, &mut scratch, &mut k1);
        stage.assign_axpy(&c, &k1, step / 2.0);
        gen.rhs(&stage, &mut scratch, &mut k2);
        stage.assign_axpy(&c, &k2, step / 2.0);
        gen.rhs(&stage, &mut scratch, &mut k3);
        stage.assign_axpy(&c, &k3, step);
        gen.rhs(&stage, &mut scratch, &mut k4);
        let w = step / 6.0;
        for (part, (a, (b, (d, e)))) in [
            (&mut c.re, (&k1.re, (&k2.re, (&k3.re, &k4.re)))),
            (&mut c.im, (&k1.im, (&k2.im, (&k3.im, &k4.im)))),
        ] {
            for (x, (((a, b), d), e)) in part.iter_mut().zip(a.iter().zip(b).zip(d).zip(e)) {
                *x += w * (a + 2.0 * (b + d) + e);
            }
        }
        c.symmetrize(n);

        let t = s as f64 * step;
        if !c.is_finite() {
            return Err(Error::Integration {
                time: t,
                reason: "non-finite entries in C".into(),
            });
        }
        if s % sample_every == 0 && s != steps {
            times.push(t);
            snapshots.push(CorrelationMatrix::from_matrix_unchecked(c.to_matrix(n)));
        }
    }
    let final_state = CorrelationMatrix::from_matrix_unchecked(c.to_matrix(n));
    times.push(controls.t_final);
    snapshots.push(final_state.clone());
    Ok(Trajectory {
        times,
        snapshots,
        final_state,
        step,
        steps,
    })
}
