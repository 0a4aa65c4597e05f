use alloc::format;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Dense,
    Lstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Linear,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => crate::math::tanh(z),
            Activation::Linear => z,
            Activation::Sigmoid => crate::math::sigmoid(z),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Linear => 1.0,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

/// One layer. `activation` is only meaningful (and required) for dense layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    #[serde(rename = "in")]
    pub in_dim: usize,
    #[serde(rename = "out")]
    pub out_dim: usize,
    pub activation: Option<Activation>,
}

impl LayerSpec {
    pub fn dense(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        LayerSpec {
            kind: LayerKind::Dense,
            in_dim,
            out_dim,
            activation: Some(activation),
        }
    }

    pub fn lstm(in_dim: usize, hidden: usize) -> Self {
        LayerSpec {
            kind: LayerKind::Lstm,
            in_dim,
            out_dim: hidden,
            activation: None,
        }
    }

    /// dense: `in*out + out`; lstm: `4 (in*out + out*out + out)`.
    pub fn param_count(&self) -> usize {
        let (i, o) = (self.in_dim, self.out_dim);
        match self.kind {
            LayerKind::Dense => i * o + o,
            LayerKind::Lstm => 4 * (i * o + o * o + o),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 {
            return Err(Error::Dimension(format!(
                "layer dimensions must be >= 1, got {} -> {}",
                self.in_dim, self.out_dim
            )));
        }
        match (self.kind, self.activation) {
            (LayerKind::Dense, None) => Err(Error::Architecture(
                "dense layer is missing its activation".into(),
            )),
            (LayerKind::Lstm, Some(_)) => Err(Error::Architecture(
                "lstm layers take no activation".into(),
            )),
            _ => Ok(()),
        }
    }
}

pub fn param_count(layers: &[LayerSpec]) -> usize {
    layers.iter().map(LayerSpec::param_count).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Feedforward,
    SequenceToOne,
    SequenceToSequence,
}

impl Topology {
    pub fn is_sequential(self) -> bool {
        !matches!(self, Topology::Feedforward)
    }

    /// Checks layer kinds, ordering and dimension chaining for this topology.
    pub fn validate(self, layers: &[LayerSpec]) -> Result<()> {
        for l in layers {
            l.validate()?;
        }
        let n_lstm = layers.iter().take_while(|l| l.kind == LayerKind::Lstm).count();
        if layers[n_lstm..].iter().any(|l| l.kind != LayerKind::Dense) {
            return Err(Error::Architecture(
                "lstm layers must precede all dense layers".into(),
            ));
        }
        let n_dense = layers.len() - n_lstm;
        let ok = match self {
            Topology::Feedforward => n_lstm == 0 && n_dense >= 1,
            Topology::SequenceToOne => n_lstm >= 1 && n_dense >= 1,
            Topology::SequenceToSequence => n_lstm == 2 && n_dense >= 1,
        };
        if !ok {
            return Err(Error::Architecture(format!(
                "{self:?} cannot be built from {n_lstm} lstm and {n_dense} dense layers"
            )));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::Dimension(format!(
                    "layer output {} does not feed layer input {}",
                    pair[0].out_dim, pair[1].in_dim
                )));
            }
        }
        Ok(())
    }
}
