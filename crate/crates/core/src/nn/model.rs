use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dense;
use super::layer::{param_count, LayerKind, LayerSpec, Topology};
use super::lstm::{backward_seq, forward_seq, LstmParams, SeqTrace};
use crate::error::{Error, Result};
use crate::math::sqrt;
use crate::rng;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub epochs_run: usize,
    pub final_train_loss: Option<f64>,
    pub final_val_loss: Option<f64>,
}

/// Fixed per-feature standardisation `(x - shift) / scale` applied to every
/// input row (every step of a sequence) before the first layer. It is part of
/// the model but not a weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl InputScaling {
    /// Column means and population standard deviations of `rows`; columns
    /// with (near) zero spread keep scale 1.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Result<Self> {
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        let mut n = 0usize;
        for row in rows {
            if row.len() != dim {
                return Err(Error::Dimension(format!(
                    "scaling rows must have {dim} values, got {}",
                    row.len()
                )));
            }
            for (j, v) in row.iter().enumerate() {
                sum[j] += v;
                sq[j] += v * v;
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::Input("cannot fit input scaling on zero rows".into()));
        }
        let shift: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let scale = sq
            .iter()
            .zip(&shift)
            .map(|(q, m)| {
                let sd = sqrt((q / n as f64 - m * m).max(0.0));
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(InputScaling { shift, scale })
    }

    fn apply(&self, input: &[f64]) -> Vec<f64> {
        let m = self.shift.len();
        input
            .iter()
            .enumerate()
            .map(|(k, x)| (x - self.shift[k % m]) / self.scale[k % m])
            .collect()
    }
}

/// Architecture, flat weights, trainable mask and training metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    topology: Topology,
    layers: Vec<LayerSpec>,
    offsets: Vec<usize>,
    pub weights: Vec<f64>,
    pub trainable_mask: Vec<bool>,
    pub seed: u64,
    pub train_meta: TrainMeta,
    input_scaling: Option<InputScaling>,
}

/// Output of a forward pass plus the hidden states of every LSTM layer
/// (`T x H` each, in layer order).
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub output: Vec<f64>,
    pub lstm_states: Vec<Vec<f64>>,
}

fn offsets_of(layers: &[LayerSpec]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(layers.len() + 1);
    let mut acc = 0;
    offsets.push(0);
    for l in layers {
        acc += l.param_count();
        offsets.push(acc);
    }
    offsets
}

/// Forward caches of one pass, used by back-propagation.
struct Caches {
    lstm: Vec<(Vec<f64>, SeqTrace)>,
    /// Dense activations per evaluation point (one point for feed-forward and
    /// sequence-to-one models, one per step for sequence-to-sequence); each
    /// entry holds the stack input followed by every dense output.
    dense: Vec<Vec<Vec<f64>>>,
}

impl ModelBundle {
    /// Fresh, fully trainable model initialised from `seed`: dense weights
    /// uniform in `±sqrt(6 / (in + out))`, LSTM matrices uniform in
    /// `±sqrt(1 / hidden)`, biases zero except the LSTM forget gate (1.0).
    pub fn new(topology: Topology, layers: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        topology.validate(&layers)?;
        let mut rng = rng::from_seed(seed);
        let mut weights = Vec::with_capacity(param_count(&layers));
        for l in &layers {
            init_layer(l, &mut rng, &mut weights);
        }
        let n = weights.len();
        Ok(ModelBundle {
            topology,
            offsets: offsets_of(&layers),
            layers,
            weights,
            trainable_mask: vec![true; n],
            seed,
            train_meta: TrainMeta::default(),
            input_scaling: None,
        })
    }

    /// Reassembles a bundle from stored parts, checking every length.
    pub fn from_parts(
        topology: Topology,
        layers: Vec<LayerSpec>,
        weights: Vec<f64>,
        trainable_mask: Vec<bool>,
        seed: u64,
        train_meta: TrainMeta,
    ) -> Result<Self> {
        topology.validate(&layers)?;
        let expected = param_count(&layers);
        if weights.len() != expected {
            return Err(Error::Schema(format!(
                "architecture needs {expected} weights, got {}",
                weights.len()
            )));
        }
        if trainable_mask.len() != expected {
            return Err(Error::Schema(format!(
                "trainable mask has {} entries for {expected} weights",
                trainable_mask.len()
            )));
        }
        Ok(ModelBundle {
            topology,
            offsets: offsets_of(&layers),
            layers,
            weights,
            trainable_mask,
            seed,
            train_meta,
            input_scaling: None,
        })
    }

    pub fn input_scaling(&self) -> Option<&InputScaling> {
        self.input_scaling.as_ref()
    }

    pub fn set_input_scaling(&mut self, scaling: Option<InputScaling>) -> Result<()> {
        if let Some(s) = &scaling {
            let m = self.input_dim();
            if s.shift.len() != m || s.scale.len() != m {
                return Err(Error::Schema(format!(
                    "input scaling must have {m} entries, got shift {} and scale {}",
                    s.shift.len(),
                    s.scale.len()
                )));
            }
            if s.scale.iter().any(|v| !(v.is_finite() && *v > 0.0)) || s.shift.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation("input scaling must be finite with positive scales".into()));
            }
        }
        self.input_scaling = scaling;
        Ok(())
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Weight range `[start, end)` of layer `i`.
    pub fn layer_range(&self, i: usize) -> core::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn layer_params(&self, i: usize) -> &[f64] {
        &self.weights[self.layer_range(i)]
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    /// Output width per evaluation point (per step for sequence-to-sequence).
    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn total_weights(&self) -> usize {
        self.weights.len()
    }

    pub fn trainable_weights(&self) -> usize {
        self.trainable_mask.iter().filter(|&&t| t).count()
    }

    pub fn set_layer_trainable(&mut self, layer: usize, trainable: bool) {
        let range = self.layer_range(layer);
        self.trainable_mask[range].iter_mut().for_each(|m| *m = trainable);
    }

    fn n_lstm(&self) -> usize {
        self.layers.iter().take_while(|l| l.kind == LayerKind::Lstm).count()
    }

    /// Number of time steps in `input`, checking its length.
    fn steps_of(&self, input: &[f64]) -> Result<usize> {
        let m = self.input_dim();
        if self.topology.is_sequential() {
            if input.is_empty() || input.len() % m != 0 {
                return Err(Error::Dimension(format!(
                    "sequence input of length {} is not a whole number of {m}-wide steps",
                    input.len()
                )));
            }
            Ok(input.len() / m)
        } else if input.len() != m {
            Err(Error::Dimension(format!(
                "model expects a row of {m} values, got {}",
                input.len()
            )))
        } else {
            Ok(1)
        }
    }

    /// Expected target length for an input of `steps` steps.
    pub fn target_len(&self, steps: usize) -> usize {
        match self.topology {
            Topology::SequenceToSequence => steps * self.output_dim(),
            _ => self.output_dim(),
        }
    }

    fn lstm_params(&self, i: usize) -> LstmParams<'_> {
        let l = &self.layers[i];
        LstmParams::new(l.in_dim, l.out_dim, self.layer_params(i)).expect("validated layout")
    }

    fn dense_stack(&self, first: usize, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() - first + 1);
        acts.push(x.to_vec());
        for i in first..self.layers.len() {
            let l = &self.layers[i];
            let mut y = vec![0.0; l.out_dim];
            dense::forward(l, self.layer_params(i), &acts[acts.len() - 1], &mut y);
            acts.push(y);
        }
        acts
    }

    fn run(&self, input: &[f64]) -> Result<(Vec<f64>, Caches)> {
        let steps = self.steps_of(input)?;
        let scaled;
        let input = match &self.input_scaling {
            Some(s) => {
                scaled = s.apply(input);
                &scaled[..]
            }
            None => input,
        };
        let n_lstm = self.n_lstm();
        let mut caches = Caches {
            lstm: Vec::with_capacity(n_lstm),
            dense: Vec::new(),
        };
        let output = match self.topology {
            Topology::Feedforward => {
                let acts = self.dense_stack(0, input);
                let out = acts[acts.len() - 1].clone();
                caches.dense.push(acts);
                out
            }
            Topology::SequenceToOne => {
                let mut seq = input.to_vec();
                for i in 0..n_lstm {
                    let trace = forward_seq(&self.lstm_params(i), &seq);
                    let next = trace.outputs().to_vec();
                    caches.lstm.push((seq, trace));
                    seq = next;
                }
                let last = &caches.lstm[n_lstm - 1].1;
                let acts = self.dense_stack(n_lstm, last.final_hidden());
                let out = acts[acts.len() - 1].clone();
                caches.dense.push(acts);
                out
            }
            Topology::SequenceToSequence => {
                let enc = forward_seq(&self.lstm_params(0), input);
                let code = enc.final_hidden().to_vec();
                caches.lstm.push((input.to_vec(), enc));
                let dec_in: Vec<f64> = (0..steps).flat_map(|_| code.iter().copied()).collect();
                let dec = forward_seq(&self.lstm_params(1), &dec_in);
                let hd = dec.hidden;
                let mut out = Vec::with_capacity(steps * self.output_dim());
                for t in 0..steps {
                    let acts = self.dense_stack(2, &dec.outputs()[t * hd..(t + 1) * hd]);
                    out.extend_from_slice(&acts[acts.len() - 1]);
                    caches.dense.push(acts);
                }
                caches.lstm.push((dec_in, dec));
                out
            }
        };
        Ok((output, caches))
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.run(input)?.0)
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<ForwardTrace> {
        let (output, caches) = self.run(input)?;
        Ok(ForwardTrace {
            output,
            lstm_states: caches
                .lstm
                .into_iter()
                .map(|(_, trace)| trace.outputs().to_vec())
                .collect(),
        })
    }

    /// Mean over samples of the mean squared error over output values.
    pub fn loss(&self, samples: &[(&[f64], &[f64])]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::Input("empty batch".into()));
        }
        let mut total = 0.0;
        for (x, y) in samples {
            let out = self.forward(x)?;
            check_target(&out, y)?;
            total += out.iter().zip(*y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / out.len() as f64;
        }
        Ok(total / samples.len() as f64)
    }

    /// Loss and its gradient with respect to every weight. Entries of frozen
    /// weights are zero.
    pub fn loss_and_gradient(&self, samples: &[(&[f64], &[f64])]) -> Result<(f64, Vec<f64>)> {
        if samples.is_empty() {
            return Err(Error::Input("empty batch".into()));
        }
        let mut grad = vec![0.0; self.weights.len()];
        let mut total = 0.0;
        let batch = samples.len() as f64;
        for (x, y) in samples {
            let (out, caches) = self.run(x)?;
            check_target(&out, y)?;
            let scale = 2.0 / (out.len() as f64 * batch);
            let mut sq = 0.0;
            let dout: Vec<f64> = out
                .iter()
                .zip(*y)
                .map(|(a, b)| {
                    sq += (a - b) * (a - b);
                    scale * (a - b)
                })
                .collect();
            total += sq / out.len() as f64;
            self.backprop(&caches, &dout, &mut grad);
        }
        for (g, &trainable) in grad.iter_mut().zip(&self.trainable_mask) {
            if !trainable {
                *g = 0.0;
            }
        }
        Ok((total / batch, grad))
    }

    /// Back-propagates through the dense stack starting at layer `first`;
    /// returns the gradient with respect to the stack input.
    fn dense_backward(&self, first: usize, acts: &[Vec<f64>], dy: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let mut d = dy.to_vec();
        for i in (first..self.layers.len()).rev() {
            let l = &self.layers[i];
            let k = i - first;
            let mut dx = vec![0.0; l.in_dim];
            let range = self.layer_range(i);
            dense::backward(
                l,
                &self.weights[range.clone()],
                &acts[k],
                &acts[k + 1],
                &d,
                &mut grad[range],
                Some(&mut dx),
            );
            d = dx;
        }
        d
    }

    fn backprop(&self, caches: &Caches, dout: &[f64], grad: &mut [f64]) {
        let n_lstm = self.n_lstm();
        match self.topology {
            Topology::Feedforward => {
                self.dense_backward(0, &caches.dense[0], dout, grad);
            }
            Topology::SequenceToOne => {
                let d_final = self.dense_backward(n_lstm, &caches.dense[0], dout, grad);
                let top = &caches.lstm[n_lstm - 1].1;
                let mut dh = vec![0.0; top.steps * top.hidden];
                dh[(top.steps - 1) * top.hidden..].copy_from_slice(&d_final);
                for i in (0..n_lstm).rev() {
                    let (xs, trace) = &caches.lstm[i];
                    let range = self.layer_range(i);
                    let mut dxs = if i > 0 { Some(vec![0.0; xs.len()]) } else { None };
                    backward_seq(
                        &self.lstm_params(i),
                        xs,
                        trace,
                        &dh,
                        &mut grad[range],
                        dxs.as_deref_mut(),
                    );
                    if let Some(dxs) = dxs {
                        dh = dxs;
                    }
                }
            }
            Topology::SequenceToSequence => {
                let (dec_in, dec) = &caches.lstm[1];
                let out_dim = self.output_dim();
                let hd = dec.hidden;
                let mut dh_dec = vec![0.0; dec.steps * hd];
                for t in 0..dec.steps {
                    let d = self.dense_backward(
                        2,
                        &caches.dense[t],
                        &dout[t * out_dim..(t + 1) * out_dim],
                        grad,
                    );
                    dh_dec[t * hd..(t + 1) * hd].copy_from_slice(&d);
                }
                let mut d_dec_in = vec![0.0; dec_in.len()];
                let range = self.layer_range(1);
                backward_seq(
                    &self.lstm_params(1),
                    dec_in,
                    dec,
                    &dh_dec,
                    &mut grad[range],
                    Some(&mut d_dec_in),
                );
                let (xs, enc) = &caches.lstm[0];
                let code_dim = enc.hidden;
                let mut dh_enc = vec![0.0; enc.steps * code_dim];
                let last = &mut dh_enc[(enc.steps - 1) * code_dim..];
                for t in 0..dec.steps {
                    for (acc, d) in last.iter_mut().zip(&d_dec_in[t * code_dim..(t + 1) * code_dim]) {
                        *acc += d;
                    }
                }
                let range = self.layer_range(0);
                backward_seq(&self.lstm_params(0), xs, enc, &dh_enc, &mut grad[range], None);
            }
        }
    }
}

fn check_target(out: &[f64], target: &[f64]) -> Result<()> {
    if out.len() != target.len() {
        return Err(Error::Dimension(format!(
            "model produced {} outputs but the target has {}",
            out.len(),
            target.len()
        )));
    }
    Ok(())
}

fn init_layer<R: Rng>(l: &LayerSpec, rng: &mut R, out: &mut Vec<f64>) {
    match l.kind {
        LayerKind::Dense => {
            let a = sqrt(6.0 / (l.in_dim + l.out_dim) as f64);
            out.extend((0..l.in_dim * l.out_dim).map(|_| rng.random_range(-a..a)));
            out.extend(core::iter::repeat_n(0.0, l.out_dim));
        }
        LayerKind::Lstm => {
            let hd = l.out_dim;
            let a = sqrt(1.0 / hd as f64);
            out.extend((0..4 * hd * (l.in_dim + hd)).map(|_| rng.random_range(-a..a)));
            for gate in 0..4 {
                let bias = if gate == 1 { 1.0 } else { 0.0 };
                out.extend(core::iter::repeat_n(bias, hd));
            }
        }
    }
}
