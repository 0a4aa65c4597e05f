//! The four network architectures, their training loop, the elbow sweep over
//! hidden size and hidden-state extraction.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::SpendingCube;
use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, AdamConfig, InputScaling, LayerKind, LayerSpec, ModelBundle, Topology};
use crate::personality::{dominance_ranking, TraitScores, N_TRAITS};
use crate::rng;

/// Width of the feed-forward trunk layers around the bottleneck.
pub const FF_TRUNK: usize = 16;
pub const DEFAULT_FF_HIDDEN: usize = 5;
pub const DEFAULT_RNN_HIDDEN: usize = 3;
/// Relative improvement below which a larger hidden size is not worth it.
pub const ELBOW_THRESHOLD: f64 = 0.05;

const SHUFFLE_TAG: u64 = 0x5348_5546;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchKind {
    FfAutoencoder,
    FfPredictor,
    RnnAutoencoder,
    RnnPredictor,
}

impl ArchKind {
    pub const ALL: [ArchKind; 4] = [
        ArchKind::FfAutoencoder,
        ArchKind::FfPredictor,
        ArchKind::RnnAutoencoder,
        ArchKind::RnnPredictor,
    ];

    pub fn is_recurrent(self) -> bool {
        matches!(self, ArchKind::RnnAutoencoder | ArchKind::RnnPredictor)
    }

    pub fn is_predictor(self) -> bool {
        matches!(self, ArchKind::FfPredictor | ArchKind::RnnPredictor)
    }

    pub fn default_hidden(self) -> usize {
        if self.is_recurrent() {
            DEFAULT_RNN_HIDDEN
        } else {
            DEFAULT_FF_HIDDEN
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ArchKind::FfAutoencoder => "ff_autoencoder",
            ArchKind::FfPredictor => "ff_predictor",
            ArchKind::RnnAutoencoder => "rnn_autoencoder",
            ArchKind::RnnPredictor => "rnn_predictor",
        }
    }
}

/// How predictor targets encode personality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// Regression on the five standardised trait scores.
    #[default]
    TraitVector,
    /// One-hot dominant trait, fitted with MSE.
    DominantClass,
}

/// Layer stack of an architecture. Predictors have five outputs.
pub fn layers(kind: ArchKind, m: usize, h: usize) -> Result<(Topology, Vec<LayerSpec>)> {
    if m < 2 || h < 1 {
        return Err(Error::Architecture(format!(
            "{} needs at least 2 inputs and 1 hidden unit, got m={m}, h={h}",
            kind.name()
        )));
    }
    use Activation::{Linear, Tanh};
    Ok(match kind {
        ArchKind::FfAutoencoder => (
            Topology::Feedforward,
            vec![
                LayerSpec::dense(m, FF_TRUNK, Tanh),
                LayerSpec::dense(FF_TRUNK, h, Tanh),
                LayerSpec::dense(h, FF_TRUNK, Tanh),
                LayerSpec::dense(FF_TRUNK, m, Linear),
            ],
        ),
        ArchKind::FfPredictor => (
            Topology::Feedforward,
            vec![
                LayerSpec::dense(m, FF_TRUNK, Tanh),
                LayerSpec::dense(FF_TRUNK, h, Tanh),
                LayerSpec::dense(h, N_TRAITS, Linear),
            ],
        ),
        ArchKind::RnnAutoencoder => (
            Topology::SequenceToSequence,
            vec![LayerSpec::lstm(m, h), LayerSpec::lstm(h, h), LayerSpec::dense(h, m, Linear)],
        ),
        ArchKind::RnnPredictor => (
            Topology::SequenceToOne,
            vec![LayerSpec::lstm(m, h), LayerSpec::dense(h, N_TRAITS, Linear)],
        ),
    })
}

/// A freshly initialised model of the given architecture.
pub fn build(kind: ArchKind, m: usize, h: usize, seed: u64) -> Result<ModelBundle> {
    let (topology, layers) = layers(kind, m, h)?;
    ModelBundle::new(topology, layers, seed)
}

/// Parallel input and target vectors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::Dimension(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        Ok(Dataset { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn samples(&self) -> Vec<(&[f64], &[f64])> {
        self.inputs
            .iter()
            .zip(&self.targets)
            .map(|(x, y)| (&x[..], &y[..]))
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i].clone()).collect(),
        }
    }
}

/// Encodes trait scores as predictor targets.
pub fn trait_target(traits: &TraitScores, mode: TargetMode) -> Vec<f64> {
    match mode {
        TargetMode::TraitVector => traits.to_vec(),
        TargetMode::DominantClass => {
            let mut one_hot = vec![0.0; N_TRAITS];
            one_hot[dominance_ranking(traits).dominant().index()] = 1.0;
            one_hot
        }
    }
}

/// One sample per customer: the `T x m` sequence and its overall label.
pub fn sequence_dataset(cube: &SpendingCube, overall: &[TraitScores], mode: TargetMode) -> Result<Dataset> {
    check_count(cube.n_customers(), overall.len())?;
    let spend = cube.spend();
    Dataset::new(
        (0..cube.n_customers()).map(|c| spend.sequence(c).to_vec()).collect(),
        overall.iter().map(|t| trait_target(t, mode)).collect(),
    )
}

/// One sample per customer-year row with that year's label.
pub fn flat_dataset(cube: &SpendingCube, annual: &[Vec<TraitScores>], mode: TargetMode) -> Result<Dataset> {
    check_count(cube.n_customers(), annual.len())?;
    let flat = cube.spend().flatten();
    let mut targets = Vec::with_capacity(flat.n_rows());
    for years in annual {
        if years.len() != cube.n_years() {
            return Err(Error::Dimension(format!(
                "annual labels cover {} years, cube has {}",
                years.len(),
                cube.n_years()
            )));
        }
        targets.extend(years.iter().map(|t| trait_target(t, mode)));
    }
    Dataset::new((0..flat.n_rows()).map(|k| flat.row(k).to_vec()).collect(), targets)
}

/// Reconstruction data: rows for the feed-forward, sequences for the
/// recurrent autoencoder.
pub fn autoencoder_dataset(cube: &SpendingCube, recurrent: bool) -> Dataset {
    let spend = cube.spend();
    let inputs: Vec<Vec<f64>> = if recurrent {
        (0..cube.n_customers()).map(|c| spend.sequence(c).to_vec()).collect()
    } else {
        let flat = spend.flatten();
        (0..flat.n_rows()).map(|k| flat.row(k).to_vec()).collect()
    };
    Dataset {
        targets: inputs.clone(),
        inputs,
    }
}

/// Per-category standardisation fitted on every annual row of `cube`.
pub fn fit_scaling(cube: &SpendingCube) -> Result<InputScaling> {
    let flat = cube.spend().flatten();
    InputScaling::fit((0..flat.n_rows()).map(|k| flat.row(k)), flat.n_cols())
}

fn check_count(customers: usize, labels: usize) -> Result<()> {
    if customers != labels {
        return Err(Error::Dimension(format!(
            "{customers} customers but {labels} labels"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub adam: AdamConfig,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            epochs: 100,
            batch_size: 32,
            patience: 10,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    /// Training-set MSE after each epoch.
    pub train_loss_curve: Vec<f64>,
    pub initial_train_loss: f64,
    pub initial_val_loss: f64,
    /// Validation MSE of the returned (best) weights.
    pub val_loss: f64,
    /// Epoch whose weights were kept; 0 means the initial weights.
    pub best_epoch: usize,
    pub seed: u64,
}

/// Mini-batch Adam on MSE with early stopping. The weights with the lowest
/// validation loss seen (the initial weights included) are restored at the end.
pub fn train(model: &mut ModelBundle, data: &Dataset, val: &Dataset, hyper: &TrainHyper) -> Result<TrainReport> {
    if data.is_empty() || val.is_empty() {
        return Err(Error::Input("training and validation sets must be non-empty".into()));
    }
    if hyper.batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    if !(hyper.adam.learning_rate > 0.0) {
        return Err(Error::Config("learning rate must be positive".into()));
    }
    let samples = data.samples();
    let val_samples = val.samples();
    let initial_train_loss = model.loss(&samples)?;
    let initial_val_loss = model.loss(&val_samples)?;
    if !initial_train_loss.is_finite() || !initial_val_loss.is_finite() {
        return Err(Error::NanLoss { epoch: 0 });
    }

    let mut rng = rng::from_seed(rng::derive(model.seed, SHUFFLE_TAG, 0));
    let mut adam = Adam::new(hyper.adam, model.total_weights());
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut batch = Vec::with_capacity(hyper.batch_size);
    let mut curve = Vec::new();
    let mut best = (initial_val_loss, model.weights.clone(), 0usize);
    let mut since_best = 0;

    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(hyper.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| samples[i]));
            let (loss, grad) = model.loss_and_gradient(&batch)?;
            if !loss.is_finite() {
                return Err(Error::NanLoss { epoch });
            }
            let mask = core::mem::take(&mut model.trainable_mask);
            let step = adam.step(&mut model.weights, &grad, &mask);
            model.trainable_mask = mask;
            step?;
        }
        let train_loss = model.loss(&samples)?;
        let val_loss = model.loss(&val_samples)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::NanLoss { epoch });
        }
        curve.push(train_loss);
        if val_loss < best.0 {
            best = (val_loss, model.weights.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= hyper.patience {
                break;
            }
        }
    }

    let (val_loss, weights, best_epoch) = best;
    model.weights = weights;
    let epochs = curve.len();
    model.train_meta.epochs_run = epochs;
    model.train_meta.final_train_loss = Some(if best_epoch == 0 {
        initial_train_loss
    } else {
        curve[best_epoch - 1]
    });
    model.train_meta.final_val_loss = Some(val_loss);
    Ok(TrainReport {
        epochs,
        train_loss_curve: curve,
        initial_train_loss,
        initial_val_loss,
        val_loss,
        best_epoch,
        seed: model.seed,
    })
}

/// Hidden states of the first LSTM layer after each step, `T x h` row-major.
pub fn extract_states(model: &ModelBundle, sequence: &[f64]) -> Result<Vec<f64>> {
    if model.layers().first().map(|l| l.kind) != Some(LayerKind::Lstm) {
        return Err(Error::Architecture("model has no LSTM layer to read states from".into()));
    }
    let trace = model.forward_trace(sequence)?;
    Ok(trace.lstm_states.into_iter().next().unwrap_or_default())
}

/// Index of the chosen candidate: the first whose relative improvement to the
/// next candidate falls below [`ELBOW_THRESHOLD`], else the last.
pub fn choose_elbow(mean_losses: &[f64]) -> Result<usize> {
    if mean_losses.len() < 2 {
        return Err(Error::Input("the elbow rule needs at least two candidates".into()));
    }
    for i in 0..mean_losses.len() - 1 {
        let (a, b) = (mean_losses[i], mean_losses[i + 1]);
        let improvement = if a > 0.0 { (a - b) / a } else { 0.0 };
        if improvement < ELBOW_THRESHOLD {
            return Ok(i);
        }
    }
    Ok(mean_losses.len() - 1)
}

/// One training run of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElbowJob {
    pub hidden: usize,
    pub run: usize,
    pub seed: u64,
}

/// Everything an elbow run needs besides its job.
#[derive(Debug, Clone)]
pub struct ElbowSetup<'a> {
    pub train: &'a Dataset,
    pub val: &'a Dataset,
    pub n_inputs: usize,
    pub scaling: Option<InputScaling>,
    pub hyper: TrainHyper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowRow {
    pub hidden: usize,
    pub seeds: Vec<u64>,
    pub val_losses: Vec<f64>,
    pub mean_val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowResult {
    pub chosen_hidden: usize,
    pub table: Vec<ElbowRow>,
}

/// Jobs in (hidden, run) order with seeds derived from `master_seed`.
pub fn elbow_jobs(candidates: &[usize], runs: usize, master_seed: u64) -> Result<Vec<ElbowJob>> {
    if candidates.len() < 2 {
        return Err(Error::Input("the elbow sweep needs at least two hidden sizes".into()));
    }
    if candidates.windows(2).any(|w| w[0] >= w[1]) || candidates[0] == 0 {
        return Err(Error::Input("hidden sizes must be positive and strictly ascending".into()));
    }
    if runs == 0 {
        return Err(Error::Input("the elbow sweep needs at least one run per size".into()));
    }
    Ok(candidates
        .iter()
        .flat_map(|&hidden| {
            (0..runs).map(move |run| ElbowJob {
                hidden,
                run,
                seed: rng::derive(master_seed, hidden as u64, run as u64),
            })
        })
        .collect())
}

/// Trains one recurrent predictor and returns its validation loss.
pub fn run_elbow_job(setup: &ElbowSetup<'_>, job: ElbowJob) -> Result<f64> {
    let wrap = |source: Error| Error::SweepRun {
        hidden: job.hidden,
        seed: job.seed,
        source: alloc::boxed::Box::new(source),
    };
    let mut model = build(ArchKind::RnnPredictor, setup.n_inputs, job.hidden, job.seed).map_err(wrap)?;
    model.set_input_scaling(setup.scaling.clone()).map_err(wrap)?;
    let report = train(&mut model, setup.train, setup.val, &setup.hyper).map_err(wrap)?;
    Ok(report.val_loss)
}

/// Groups per-job losses (in any order) into the loss table and applies the
/// elbow rule.
pub fn assemble_elbow(jobs: &[ElbowJob], losses: &[f64]) -> Result<ElbowResult> {
    if jobs.len() != losses.len() {
        return Err(Error::Dimension(format!("{} jobs but {} losses", jobs.len(), losses.len())));
    }
    let mut pairs: Vec<(ElbowJob, f64)> = jobs.iter().copied().zip(losses.iter().copied()).collect();
    pairs.sort_by_key(|(j, _)| (j.hidden, j.run));
    let mut table: Vec<ElbowRow> = Vec::new();
    for (job, loss) in pairs {
        match table.last_mut() {
            Some(row) if row.hidden == job.hidden => {
                row.seeds.push(job.seed);
                row.val_losses.push(loss);
            }
            _ => table.push(ElbowRow {
                hidden: job.hidden,
                seeds: vec![job.seed],
                val_losses: vec![loss],
                mean_val_loss: 0.0,
            }),
        }
    }
    for row in &mut table {
        row.mean_val_loss = row.val_losses.iter().sum::<f64>() / row.val_losses.len() as f64;
    }
    let means: Vec<f64> = table.iter().map(|r| r.mean_val_loss).collect();
    let chosen = choose_elbow(&means)?;
    Ok(ElbowResult {
        chosen_hidden: table[chosen].hidden,
        table,
    })
}

/// Sequential elbow sweep over `candidates` with `runs` seeds each.
pub fn elbow_sweep(setup: &ElbowSetup<'_>, candidates: &[usize], runs: usize, master_seed: u64) -> Result<ElbowResult> {
    let jobs = elbow_jobs(candidates, runs, master_seed)?;
    let losses = jobs
        .iter()
        .map(|&job| run_elbow_job(setup, job))
        .collect::<Result<Vec<f64>>>()?;
    assemble_elbow(&jobs, &losses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::param_count;

    #[test]
    fn recurrent_predictor_count() {
        let m = build(ArchKind::RnnPredictor, 12, 3, 0).unwrap();
        assert_eq!(m.total_weights(), 4 * (12 * 3 + 9 + 3) + (3 * 5 + 5));
        assert_eq!(m.total_weights(), 212);
    }

    #[test]
    fn autoencoders_preserve_width() {
        let ff = build(ArchKind::FfAutoencoder, 12, 5, 0).unwrap();
        assert_eq!((ff.input_dim(), ff.output_dim()), (12, 12));
        let rnn = build(ArchKind::RnnAutoencoder, 12, 3, 0).unwrap();
        let out = rnn.forward(&[0.1; 72]).unwrap();
        assert_eq!(out.len(), 72);
    }

    #[test]
    fn layer_counts_match_bundles() {
        for kind in ArchKind::ALL {
            let (_, l) = layers(kind, 12, kind.default_hidden()).unwrap();
            assert_eq!(build(kind, 12, kind.default_hidden(), 3).unwrap().total_weights(), param_count(&l));
        }
        assert!(build(ArchKind::FfPredictor, 1, 3, 0).is_err());
        assert!(build(ArchKind::RnnPredictor, 4, 0, 0).is_err());
    }

    #[test]
    fn elbow_rule() {
        assert_eq!(choose_elbow(&[10.0, 4.0, 2.0, 1.95, 1.94]).unwrap(), 2);
        assert_eq!(choose_elbow(&[1.0, 1.0, 1.0]).unwrap(), 0);
        assert_eq!(choose_elbow(&[8.0, 4.0, 2.0]).unwrap(), 2);
        assert!(choose_elbow(&[1.0]).is_err());
    }

    #[test]
    fn assemble_is_order_independent() {
        let jobs = elbow_jobs(&[1, 2, 3], 2, 5).unwrap();
        let losses = [4.0, 4.2, 2.0, 2.2, 1.99, 2.01];
        let a = assemble_elbow(&jobs, &losses).unwrap();
        let mut rev_jobs = jobs.clone();
        rev_jobs.reverse();
        let mut rev_losses = losses;
        rev_losses.reverse();
        assert_eq!(assemble_elbow(&rev_jobs, &rev_losses).unwrap(), a);
        assert_eq!(a.chosen_hidden, 2);
        assert!((a.table[0].mean_val_loss - 4.1).abs() < 1e-12);
    }

    #[test]
    fn elbow_jobs_validate_candidates() {
        assert!(elbow_jobs(&[3], 2, 0).is_err());
        assert!(elbow_jobs(&[3, 2], 2, 0).is_err());
        assert!(elbow_jobs(&[1, 2], 0, 0).is_err());
        let jobs = elbow_jobs(&[1, 2], 3, 0).unwrap();
        assert_eq!(jobs.len(), 6);
        let mut seeds: Vec<u64> = jobs.iter().map(|j| j.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 6);
    }

    #[test]
    fn dominant_class_target() {
        assert_eq!(
            trait_target(&[0.2, -0.9, 0.5, 0.1, -0.3], TargetMode::DominantClass),
            vec![0.0, 1.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn zero_epochs_leave_weights() {
        let mut m = build(ArchKind::FfPredictor, 3, 2, 1).unwrap();
        let before = m.weights.clone();
        let data = Dataset::new(vec![vec![0.1, 0.2, 0.3]; 4], vec![vec![0.0; 5]; 4]).unwrap();
        let hyper = TrainHyper {
            epochs: 0,
            ..TrainHyper::default()
        };
        let report = train(&mut m, &data, &data, &hyper).unwrap();
        assert!(report.train_loss_curve.is_empty());
        assert_eq!(report.epochs, 0);
        assert_eq!(m.weights, before);
    }

    #[test]
    fn extraction_needs_lstm() {
        let m = build(ArchKind::FfPredictor, 3, 2, 1).unwrap();
        assert!(matches!(extract_states(&m, &[0.0; 3]), Err(Error::Architecture(_))));
    }
}
