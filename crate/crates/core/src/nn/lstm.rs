//! Vanilla LSTM cell without peepholes.
//!
//! ```text
//! i = sigmoid(W_i x + U_i h + b_i)      f = sigmoid(W_f x + U_f h + b_f)
//! g = tanh(W_g x + U_g h + b_g)         o = sigmoid(W_o x + U_o h + b_o)
//! c' = f * c + i * g                    h' = o * tanh(c')
//! ```
//!
//! Parameter layout: `W` (`4H x in`), `U` (`4H x H`), `b` (`4H`), all
//! row-major with gate blocks in the order i, f, g, o.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{sigmoid, tanh};

/// Borrowed view of one LSTM layer's parameters.
#[derive(Debug, Clone, Copy)]
pub struct LstmParams<'a> {
    n_in: usize,
    hidden: usize,
    w: &'a [f64],
    u: &'a [f64],
    b: &'a [f64],
}

impl<'a> LstmParams<'a> {
    pub fn new(n_in: usize, hidden: usize, params: &'a [f64]) -> Result<Self> {
        let expected = 4 * (n_in * hidden + hidden * hidden + hidden);
        if params.len() != expected {
            return Err(Error::Dimension(format!(
                "lstm({n_in}, {hidden}) needs {expected} parameters, got {}",
                params.len()
            )));
        }
        let (w, rest) = params.split_at(4 * hidden * n_in);
        let (u, b) = rest.split_at(4 * hidden * hidden);
        Ok(LstmParams {
            n_in,
            hidden,
            w,
            u,
            b,
        })
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Pre-activations `z = W x + U h + b` for all four gates.
    fn preactivations(&self, x: &[f64], h: &[f64], z: &mut [f64]) {
        let (n_in, hd) = (self.n_in, self.hidden);
        for r in 0..4 * hd {
            let wx: f64 = self.w[r * n_in..(r + 1) * n_in]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum();
            let uh: f64 = self.u[r * hd..(r + 1) * hd]
                .iter()
                .zip(h)
                .map(|(a, b)| a * b)
                .sum();
            z[r] = self.b[r] + wx + uh;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// One time step.
pub fn lstm_step(x: &[f64], state: &LstmState, params: &LstmParams<'_>) -> Result<LstmState> {
    let hd = params.hidden;
    if x.len() != params.n_in || state.h.len() != hd || state.c.len() != hd {
        return Err(Error::Dimension(format!(
            "lstm({}, {hd}) step got input {} and state ({}, {})",
            params.n_in,
            x.len(),
            state.h.len(),
            state.c.len()
        )));
    }
    let mut z = vec![0.0; 4 * hd];
    params.preactivations(x, &state.h, &mut z);
    let mut next = LstmState::zeros(hd);
    for j in 0..hd {
        let i = sigmoid(z[j]);
        let f = sigmoid(z[hd + j]);
        let g = tanh(z[2 * hd + j]);
        let o = sigmoid(z[3 * hd + j]);
        next.c[j] = f * state.c[j] + i * g;
        next.h[j] = o * tanh(next.c[j]);
    }
    Ok(next)
}

/// Everything the backward pass needs from a forward sweep over `T` steps.
#[derive(Debug, Clone)]
pub(crate) struct SeqTrace {
    pub steps: usize,
    pub hidden: usize,
    /// `(T + 1) x H`, row 0 is the zero initial state.
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    /// `T x 4H` gate activations (i, f, g, o after their nonlinearities).
    pub gates: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

impl SeqTrace {
    /// Hidden states of steps `1..=T`, `T x H`.
    pub fn outputs(&self) -> &[f64] {
        &self.h[self.hidden..]
    }

    pub fn final_hidden(&self) -> &[f64] {
        &self.h[self.steps * self.hidden..]
    }
}

/// Runs the cell over `xs` (`T x in`) from a zero state.
pub(crate) fn forward_seq(p: &LstmParams<'_>, xs: &[f64]) -> SeqTrace {
    let (n_in, hd) = (p.n_in, p.hidden);
    let steps = xs.len() / n_in;
    let mut trace = SeqTrace {
        steps,
        hidden: hd,
        h: vec![0.0; (steps + 1) * hd],
        c: vec![0.0; (steps + 1) * hd],
        gates: vec![0.0; steps * 4 * hd],
        tanh_c: vec![0.0; steps * hd],
    };
    let mut z = vec![0.0; 4 * hd];
    for t in 0..steps {
        let x = &xs[t * n_in..(t + 1) * n_in];
        p.preactivations(x, &trace.h[t * hd..(t + 1) * hd], &mut z);
        let gates = &mut trace.gates[t * 4 * hd..(t + 1) * 4 * hd];
        for j in 0..hd {
            gates[j] = sigmoid(z[j]);
            gates[hd + j] = sigmoid(z[hd + j]);
            gates[2 * hd + j] = tanh(z[2 * hd + j]);
            gates[3 * hd + j] = sigmoid(z[3 * hd + j]);
        }
        for j in 0..hd {
            let (i, f, g, o) = (gates[j], gates[hd + j], gates[2 * hd + j], gates[3 * hd + j]);
            let c = f * trace.c[t * hd + j] + i * g;
            let tc = tanh(c);
            trace.c[(t + 1) * hd + j] = c;
            trace.tanh_c[t * hd + j] = tc;
            trace.h[(t + 1) * hd + j] = o * tc;
        }
    }
    trace
}

/// Back-propagation through time. `dh_out` (`T x H`) is the loss gradient with
/// respect to each emitted hidden state. Parameter gradients accumulate into
/// `grad` (this layer's slice); input gradients go to `dxs` when given.
pub(crate) fn backward_seq(
    p: &LstmParams<'_>,
    xs: &[f64],
    trace: &SeqTrace,
    dh_out: &[f64],
    grad: &mut [f64],
    mut dxs: Option<&mut [f64]>,
) {
    let (n_in, hd) = (p.n_in, p.hidden);
    let (gw, rest) = grad.split_at_mut(4 * hd * n_in);
    let (gu, gb) = rest.split_at_mut(4 * hd * hd);
    let mut dh_next = vec![0.0; hd];
    let mut dc_next = vec![0.0; hd];
    let mut dz = vec![0.0; 4 * hd];
    for t in (0..trace.steps).rev() {
        let gates = &trace.gates[t * 4 * hd..(t + 1) * 4 * hd];
        let c_prev = &trace.c[t * hd..(t + 1) * hd];
        let h_prev = &trace.h[t * hd..(t + 1) * hd];
        for j in 0..hd {
            let (i, f, g, o) = (gates[j], gates[hd + j], gates[2 * hd + j], gates[3 * hd + j]);
            let tc = trace.tanh_c[t * hd + j];
            let dh = dh_out[t * hd + j] + dh_next[j];
            let dc = dc_next[j] + dh * o * (1.0 - tc * tc);
            dz[j] = dc * g * i * (1.0 - i);
            dz[hd + j] = dc * c_prev[j] * f * (1.0 - f);
            dz[2 * hd + j] = dc * i * (1.0 - g * g);
            dz[3 * hd + j] = dh * tc * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        let x = &xs[t * n_in..(t + 1) * n_in];
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        if let Some(dxs) = dxs.as_deref_mut() {
            dxs[t * n_in..(t + 1) * n_in].iter_mut().for_each(|v| *v = 0.0);
        }
        for r in 0..4 * hd {
            let d = dz[r];
            gb[r] += d;
            for (g, xi) in gw[r * n_in..(r + 1) * n_in].iter_mut().zip(x) {
                *g += d * xi;
            }
            for (g, hj) in gu[r * hd..(r + 1) * hd].iter_mut().zip(h_prev) {
                *g += d * hj;
            }
            for (dh, u) in dh_next.iter_mut().zip(&p.u[r * hd..(r + 1) * hd]) {
                *dh += d * u;
            }
            if let Some(dxs) = dxs.as_deref_mut() {
                for (dx, w) in dxs[t * n_in..(t + 1) * n_in]
                    .iter_mut()
                    .zip(&p.w[r * n_in..(r + 1) * n_in])
                {
                    *dx += d * w;
                }
            }
        }
    }
}
