//! A single-direction gated recurrent unit with exact backpropagation.
//!
//! The cell always scans its input slice left to right from a zero initial
//! state; the bidirectional encoder feeds it the token sequence once as-is
//! and once reversed. Per step, with `σ` the logistic function:
//!
//! ```text
//! z_t = σ(W_z x_t + U_z h_{t−1} + b_z)          update gate
//! r_t = σ(W_r x_t + U_r h_{t−1} + b_r)          reset gate
//! c_t = tanh(W_c x_t + U_c (r_t ⊙ h_{t−1}) + b_c)
//! h_t = (1 − z_t) ⊙ h_{t−1} + z_t ⊙ c_t
//! ```
//!
//! [`GruWeights::backward`] replays the algebra in reverse from the cached
//! activations, filling parameter gradients and per-step input gradients.

use rand::Rng;

use super::matrix::Matrix;
use crate::objectives::sigmoid;

/// Parameters of one GRU direction. `W_*` map the input (`d_h × d_in`),
/// `U_*` map the previous state (`d_h × d_h`), `b_*` are biases.
#[derive(Debug, Clone, PartialEq)]
pub struct GruWeights {
    pub w_update: Matrix,
    pub u_update: Matrix,
    pub b_update: Vec<f64>,
    pub w_reset: Matrix,
    pub u_reset: Matrix,
    pub b_reset: Vec<f64>,
    pub w_cand: Matrix,
    pub u_cand: Matrix,
    pub b_cand: Vec<f64>,
}

/// Per-step activations cached by [`GruWeights::forward`] for the backward
/// pass. `h[t]` is the state emitted at step `t`.
#[derive(Debug, Clone)]
pub struct GruStates {
    pub h: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
}

impl GruWeights {
    pub fn zeros(d_in: usize, d_hidden: usize) -> Self {
        GruWeights {
            w_update: Matrix::zeros(d_hidden, d_in),
            u_update: Matrix::zeros(d_hidden, d_hidden),
            b_update: vec![0.0; d_hidden],
            w_reset: Matrix::zeros(d_hidden, d_in),
            u_reset: Matrix::zeros(d_hidden, d_hidden),
            b_reset: vec![0.0; d_hidden],
            w_cand: Matrix::zeros(d_hidden, d_in),
            u_cand: Matrix::zeros(d_hidden, d_hidden),
            b_cand: vec![0.0; d_hidden],
        }
    }

    /// Uniform `[−scale, scale]` init for the input and recurrent maps; the
    /// gate biases start at zero. Draw order is fixed (update, reset,
    /// candidate; `W` before `U`; row-major) so a seed pins the parameters.
    pub fn init(d_in: usize, d_hidden: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let mut draw = |rows: usize, cols: usize| {
            Matrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..=scale))
        };
        let w_update = draw(d_hidden, d_in);
        let u_update = draw(d_hidden, d_hidden);
        let w_reset = draw(d_hidden, d_in);
        let u_reset = draw(d_hidden, d_hidden);
        let w_cand = draw(d_hidden, d_in);
        let u_cand = draw(d_hidden, d_hidden);
        GruWeights {
            w_update,
            u_update,
            b_update: vec![0.0; d_hidden],
            w_reset,
            u_reset,
            b_reset: vec![0.0; d_hidden],
            w_cand,
            u_cand,
            b_cand: vec![0.0; d_hidden],
        }
    }

    pub fn d_hidden(&self) -> usize {
        self.b_update.len()
    }

    pub fn d_in(&self) -> usize {
        self.w_update.cols()
    }

    /// Apply each weight slot to the matching slot of `other`, in a fixed
    /// canonical order. Drives elementwise ops and flattening.
    pub fn zip_mut(&mut self, other: &GruWeights, f: &mut impl FnMut(&mut f64, f64)) {
        for (a, b) in [
            (self.w_update.data_mut(), other.w_update.data()),
            (self.u_update.data_mut(), other.u_update.data()),
        ] {
            for (x, &y) in a.iter_mut().zip(b) {
                f(x, y);
            }
        }
        for (x, &y) in self.b_update.iter_mut().zip(&other.b_update) {
            f(x, y);
        }
        for (a, b) in [
            (self.w_reset.data_mut(), other.w_reset.data()),
            (self.u_reset.data_mut(), other.u_reset.data()),
        ] {
            for (x, &y) in a.iter_mut().zip(b) {
                f(x, y);
            }
        }
        for (x, &y) in self.b_reset.iter_mut().zip(&other.b_reset) {
            f(x, y);
        }
        for (a, b) in [
            (self.w_cand.data_mut(), other.w_cand.data()),
            (self.u_cand.data_mut(), other.u_cand.data()),
        ] {
            for (x, &y) in a.iter_mut().zip(b) {
                f(x, y);
            }
        }
        for (x, &y) in self.b_cand.iter_mut().zip(&other.b_cand) {
            f(x, y);
        }
    }

    /// Visit every weight in the same canonical order as [`Self::zip_mut`].
    pub fn visit(&self, f: &mut impl FnMut(f64)) {
        for block in [
            self.w_update.data(),
            self.u_update.data(),
            &self.b_update,
            self.w_reset.data(),
            self.u_reset.data(),
            &self.b_reset,
            self.w_cand.data(),
            self.u_cand.data(),
            &self.b_cand,
        ] {
            for &x in block {
                f(x);
            }
        }
    }

    /// Mutably visit every weight in canonical order.
    pub fn visit_mut(&mut self, f: &mut impl FnMut(&mut f64)) {
        for block in [
            self.w_update.data_mut(),
            self.u_update.data_mut(),
            self.b_update.as_mut_slice(),
            self.w_reset.data_mut(),
            self.u_reset.data_mut(),
            self.b_reset.as_mut_slice(),
            self.w_cand.data_mut(),
            self.u_cand.data_mut(),
            self.b_cand.as_mut_slice(),
        ] {
            for x in block {
                f(x);
            }
        }
    }

    /// Scan `xs` left to right from a zero state, caching activations.
    pub fn forward(&self, xs: &[Vec<f64>]) -> GruStates {
        let d = self.d_hidden();
        let t_max = xs.len();
        let mut states = GruStates {
            h: Vec::with_capacity(t_max),
            z: Vec::with_capacity(t_max),
            r: Vec::with_capacity(t_max),
            c: Vec::with_capacity(t_max),
        };
        let zero = vec![0.0; d];
        for (t, x) in xs.iter().enumerate() {
            let h_prev = if t == 0 { &zero } else { &states.h[t - 1] };

            let mut z = self.b_update.clone();
            self.w_update.matvec_acc(x, &mut z);
            self.u_update.matvec_acc(h_prev, &mut z);
            for v in &mut z {
                *v = sigmoid(*v);
            }

            let mut r = self.b_reset.clone();
            self.w_reset.matvec_acc(x, &mut r);
            self.u_reset.matvec_acc(h_prev, &mut r);
            for v in &mut r {
                *v = sigmoid(*v);
            }

            let gated: Vec<f64> = r.iter().zip(h_prev).map(|(ri, hi)| ri * hi).collect();
            let mut c = self.b_cand.clone();
            self.w_cand.matvec_acc(x, &mut c);
            self.u_cand.matvec_acc(&gated, &mut c);
            for v in &mut c {
                *v = v.tanh();
            }

            let h: Vec<f64> = (0..d)
                .map(|k| (1.0 - z[k]) * h_prev[k] + z[k] * c[k])
                .collect();

            states.z.push(z);
            states.r.push(r);
            states.c.push(c);
            states.h.push(h);
        }
        states
    }

    /// Backpropagate through a cached forward scan.
    ///
    /// `d_h[t]` is the loss gradient arriving at `h_t` from outside the
    /// recurrence (the scoring head). Parameter gradients accumulate into
    /// `grads`; the returned vector holds the gradient for each `xs[t]`.
    pub fn backward(
        &self,
        xs: &[Vec<f64>],
        states: &GruStates,
        d_h: &[Vec<f64>],
        grads: &mut GruWeights,
    ) -> Vec<Vec<f64>> {
        let d = self.d_hidden();
        let t_max = xs.len();
        debug_assert_eq!(states.h.len(), t_max);
        debug_assert_eq!(d_h.len(), t_max);

        let zero = vec![0.0; d];
        let mut d_xs = vec![vec![0.0; self.d_in()]; t_max];
        // Gradient flowing into h_t from steps after t.
        let mut carry = vec![0.0; d];

        for t in (0..t_max).rev() {
            let h_prev = if t == 0 { &zero } else { &states.h[t - 1] };
            let (z, r, c) = (&states.z[t], &states.r[t], &states.c[t]);

            let dht: Vec<f64> = d_h[t].iter().zip(&carry).map(|(a, b)| a + b).collect();

            // h = (1 − z) ⊙ h_prev + z ⊙ c
            let dc: Vec<f64> = (0..d).map(|k| dht[k] * z[k]).collect();
            let dz: Vec<f64> = (0..d).map(|k| dht[k] * (c[k] - h_prev[k])).collect();
            let mut dhp: Vec<f64> = (0..d).map(|k| dht[k] * (1.0 - z[k])).collect();

            // Candidate branch (tanh).
            let da_c: Vec<f64> = (0..d).map(|k| dc[k] * (1.0 - c[k] * c[k])).collect();
            let gated: Vec<f64> = r.iter().zip(h_prev).map(|(ri, hi)| ri * hi).collect();
            grads.w_cand.add_outer(&da_c, &xs[t]);
            grads.u_cand.add_outer(&da_c, &gated);
            for (g, &v) in grads.b_cand.iter_mut().zip(&da_c) {
                *g += v;
            }
            let mut grh = vec![0.0; d];
            self.u_cand.matvec_t_acc(&da_c, &mut grh);
            let dr: Vec<f64> = (0..d).map(|k| grh[k] * h_prev[k]).collect();
            for k in 0..d {
                dhp[k] += grh[k] * r[k];
            }

            // Update gate branch (sigmoid).
            let da_z: Vec<f64> = (0..d).map(|k| dz[k] * z[k] * (1.0 - z[k])).collect();
            grads.w_update.add_outer(&da_z, &xs[t]);
            grads.u_update.add_outer(&da_z, h_prev);
            for (g, &v) in grads.b_update.iter_mut().zip(&da_z) {
                *g += v;
            }
            self.u_update.matvec_t_acc(&da_z, &mut dhp);

            // Reset gate branch (sigmoid).
            let da_r: Vec<f64> = (0..d).map(|k| dr[k] * r[k] * (1.0 - r[k])).collect();
            grads.w_reset.add_outer(&da_r, &xs[t]);
            grads.u_reset.add_outer(&da_r, h_prev);
            for (g, &v) in grads.b_reset.iter_mut().zip(&da_r) {
                *g += v;
            }
            self.u_reset.matvec_t_acc(&da_r, &mut dhp);

            // Input gradient through all three gates.
            self.w_update.matvec_t_acc(&da_z, &mut d_xs[t]);
            self.w_reset.matvec_t_acc(&da_r, &mut d_xs[t]);
            self.w_cand.matvec_t_acc(&da_c, &mut d_xs[t]);

            carry = dhp;
        }
        d_xs
    }
}
