//! Central-difference gradient checking.

use alloc::vec::Vec;

use super::model::ModelBundle;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    /// Largest `|analytic - numeric| / max(|analytic| + |numeric|, floor)`.
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub checked: usize,
}

/// Relative errors are measured against at least this magnitude, so that
/// weights with near-zero gradient do not dominate through round-off.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// Compares back-propagated gradients of every trainable weight with central
/// differences of step `h`.
pub fn check_gradient(model: &ModelBundle, samples: &[(&[f64], &[f64])], h: f64) -> Result<GradientCheck> {
    let (_, analytic) = model.loss_and_gradient(samples)?;
    let mut probe = model.clone();
    let mut result = GradientCheck {
        max_rel_error: 0.0,
        worst_index: None,
        checked: 0,
    };
    let trainable: Vec<usize> = (0..model.weights.len())
        .filter(|&i| model.trainable_mask[i])
        .collect();
    for i in trainable {
        let w = model.weights[i];
        probe.weights[i] = w + h;
        let up = probe.loss(samples)?;
        probe.weights[i] = w - h;
        let down = probe.loss(samples)?;
        probe.weights[i] = w;
        let numeric = (up - down) / (2.0 * h);
        let denom = (analytic[i].abs() + numeric.abs()).max(REL_ERROR_FLOOR);
        let rel = (analytic[i] - numeric).abs() / denom;
        result.checked += 1;
        if rel > result.max_rel_error || result.worst_index.is_none() {
            result.max_rel_error = rel;
            result.worst_index = Some(i);
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use alloc::vec;

    use super::*;
    use crate::nn::{Activation, LayerSpec, Topology};

    fn samples(len_in: usize, len_out: usize, n: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let xs = (0..n)
            .map(|s| (0..len_in).map(|i| libm::sin((s * 31 + i * 7) as f64 * 0.37)).collect())
            .collect();
        let ys = (0..n)
            .map(|s| (0..len_out).map(|i| libm::cos((s * 13 + i * 5) as f64 * 0.21)).collect())
            .collect();
        (xs, ys)
    }

    fn check(model: &ModelBundle, len_in: usize, len_out: usize) -> GradientCheck {
        let (xs, ys) = samples(len_in, len_out, 3);
        let batch: Vec<(&[f64], &[f64])> = xs.iter().zip(&ys).map(|(x, y)| (&x[..], &y[..])).collect();
        check_gradient(model, &batch, 1e-5).unwrap()
    }

    #[test]
    fn feedforward_gradients_match() {
        let m = ModelBundle::new(
            Topology::Feedforward,
            vec![
                LayerSpec::dense(4, 6, Activation::Tanh),
                LayerSpec::dense(6, 3, Activation::Sigmoid),
                LayerSpec::dense(3, 2, Activation::Linear),
            ],
            3,
        )
        .unwrap();
        let r = check(&m, 4, 2);
        assert_eq!(r.checked, m.total_weights());
        assert!(r.max_rel_error < 1e-5, "{r:?}");
    }

    #[test]
    fn sequence_to_one_gradients_match() {
        let m = ModelBundle::new(
            Topology::SequenceToOne,
            vec![
                LayerSpec::lstm(3, 4),
                LayerSpec::lstm(4, 2),
                LayerSpec::dense(2, 2, Activation::Linear),
            ],
            5,
        )
        .unwrap();
        let r = check(&m, 3 * 5, 2);
        assert!(r.max_rel_error < 1e-5, "{r:?}");
    }

    #[test]
    fn sequence_to_sequence_gradients_match() {
        let m = ModelBundle::new(
            Topology::SequenceToSequence,
            vec![
                LayerSpec::lstm(3, 2),
                LayerSpec::lstm(2, 2),
                LayerSpec::dense(2, 3, Activation::Linear),
            ],
            8,
        )
        .unwrap();
        let r = check(&m, 3 * 4, 3 * 4);
        assert!(r.max_rel_error < 1e-5, "{r:?}");
    }

    #[test]
    fn frozen_weights_are_skipped() {
        let mut m = ModelBundle::new(
            Topology::Feedforward,
            vec![
                LayerSpec::dense(2, 3, Activation::Tanh),
                LayerSpec::dense(3, 1, Activation::Linear),
            ],
            1,
        )
        .unwrap();
        m.set_layer_trainable(0, false);
        let r = check(&m, 2, 1);
        assert_eq!(r.checked, 4);
        assert!(r.max_rel_error < 1e-5);
    }
}
