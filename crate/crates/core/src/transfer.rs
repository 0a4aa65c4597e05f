//! Frozen-body transfer benchmark: a pretrained predictor body with a fresh
//! head against an identically shaped, randomly initialised network.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::dataset::SpendingCube;
use crate::error::{Error, Result};
use crate::models::{train, Dataset, TrainHyper};
use crate::nn::{Activation, LayerKind, LayerSpec, ModelBundle, Topology};
use crate::rng;
use crate::stats::{mean, sample_sd, t_critical_975};

const VALIDATION_TAG: u64 = 0x5641_4c49;
const RUN_TAG: u64 = 0x5255_4e53;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferTask {
    Liquidity,
    DefaultRate,
}

impl TransferTask {
    pub fn name(self) -> &'static str {
        match self {
            TransferTask::Liquidity => "liquidity",
            TransferTask::DefaultRate => "default_rate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub task: TransferTask,
    pub train_size: usize,
    pub runs: usize,
    pub validation_size: usize,
    pub master_seed: u64,
    /// Share of each run's sample used for fitting; the rest drives early
    /// stopping.
    pub fit_fraction: f64,
    pub hyper: TrainHyper,
}

impl TransferConfig {
    pub fn new(task: TransferTask, master_seed: u64) -> Self {
        TransferConfig {
            task,
            train_size: 100,
            runs: 20,
            validation_size: 1000,
            master_seed,
            fit_fraction: 0.8,
            hyper: TrainHyper {
                epochs: 400,
                batch_size: 32,
                patience: 25,
                adam: crate::nn::AdamConfig {
                    learning_rate: 1e-2,
                    ..Default::default()
                },
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_size < 2 {
            return Err(Error::Config(format!("train_size must be at least 2, got {}", self.train_size)));
        }
        if self.runs < 2 {
            return Err(Error::Config(format!("runs must be at least 2, got {}", self.runs)));
        }
        if self.validation_size < 1 {
            return Err(Error::Config("validation_size must be at least 1".into()));
        }
        if !(self.fit_fraction > 0.0 && self.fit_fraction < 1.0) {
            return Err(Error::Config(format!(
                "fit_fraction must lie strictly between 0 and 1, got {}",
                self.fit_fraction
            )));
        }
        let n_fit = self.n_fit();
        if n_fit == 0 || n_fit >= self.train_size {
            return Err(Error::Config(format!(
                "train_size {} with fit_fraction {} leaves no fitting or monitoring samples",
                self.train_size, self.fit_fraction
            )));
        }
        Ok(())
    }

    fn n_fit(&self) -> usize {
        (self.train_size as f64 * self.fit_fraction + 1e-9) as usize
    }
}

/// Copies the body of a trained predictor, freezes it and appends a fresh
/// trainable `dense(h -> out_dim, linear)` head in place of the old one.
pub fn freeze_and_head(pretrained: &ModelBundle, out_dim: usize, seed: u64) -> Result<ModelBundle> {
    let layers = pretrained.layers();
    let recognisable = matches!(pretrained.topology(), Topology::Feedforward | Topology::SequenceToOne)
        && layers.len() >= 2
        && layers[layers.len() - 1].kind == LayerKind::Dense;
    if !recognisable {
        return Err(Error::Architecture(
            "transfer needs a feed-forward or sequence-to-one predictor with a dense head".into(),
        ));
    }
    let body = &layers[..layers.len() - 1];
    let width = body[body.len() - 1].out_dim;
    let mut new_layers = body.to_vec();
    new_layers.push(LayerSpec::dense(width, out_dim, Activation::Linear));
    let mut model = ModelBundle::new(pretrained.topology(), new_layers, seed)?;
    let body_len = pretrained.layer_range(body.len() - 1).end;
    model.weights[..body_len].copy_from_slice(&pretrained.weights[..body_len]);
    for i in 0..body.len() {
        model.set_layer_trainable(i, false);
    }
    model.set_input_scaling(pretrained.input_scaling().cloned())?;
    Ok(model)
}

/// The random arm: the transfer architecture, freshly initialised and fully
/// trainable.
pub fn random_counterpart(transfer: &ModelBundle, seed: u64) -> Result<ModelBundle> {
    let mut model = ModelBundle::new(transfer.topology(), transfer.layers().to_vec(), seed)?;
    model.set_input_scaling(transfer.input_scaling().cloned())?;
    Ok(model)
}

/// Benchmark inputs with the configured scalar target: whole sequences for
/// recurrent bodies, each customer's mean annual row for feed-forward ones.
pub fn task_dataset(cube: &SpendingCube, task: TransferTask, recurrent: bool) -> Result<Dataset> {
    let targets = cube
        .targets()
        .ok_or_else(|| Error::Input("the dataset carries no targets".into()))?;
    let inputs = (0..cube.n_customers())
        .map(|c| {
            if recurrent {
                cube.spend().sequence(c).to_vec()
            } else {
                cube.mean_row(c)
            }
        })
        .collect();
    let values = targets
        .iter()
        .map(|t| {
            vec![match task {
                TransferTask::Liquidity => t.liquidity,
                TransferTask::DefaultRate => t.default_rate,
            }]
        })
        .collect();
    Dataset::new(inputs, values)
}

/// Sample mean and the half-width of its two-sided 95% t interval.
pub fn confidence_interval(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::Input(format!(
            "a confidence interval needs at least 2 values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("confidence interval over non-finite values".into()));
    }
    let k = values.len();
    let half = t_critical_975(k - 1) * sample_sd(values) / crate::math::sqrt(k as f64);
    Ok((mean(values), half))
}

/// Held-out validation customers and the pool runs sample from.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkPlan {
    pub validation: Vec<usize>,
    pub pool: Vec<usize>,
}

pub fn plan(n: usize, config: &TransferConfig) -> Result<BenchmarkPlan> {
    config.validate()?;
    if n < config.validation_size + config.train_size {
        return Err(Error::InsufficientData(format!(
            "{n} customers cannot supply {} validation and {} training samples",
            config.validation_size, config.train_size
        )));
    }
    let seed = rng::derive(config.master_seed, VALIDATION_TAG, 0);
    let (mut validation, mut pool) = crate::dataset::shuffled_partition(n, config.validation_size, seed);
    validation.sort_unstable();
    pool.sort_unstable();
    Ok(BenchmarkPlan { validation, pool })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub transfer_mse: f64,
    pub random_mse: f64,
    pub transfer_epochs: usize,
    pub random_epochs: usize,
    /// The transfer arm's body weights are bit-identical to the pretrained
    /// ones after training.
    pub body_intact: bool,
}

/// One paired run: both arms train on the same sample and are scored on the
/// same validation set. Targets are standardised with the sample's own mean
/// and deviation during training; reported errors are in target units.
pub fn run_one(
    pretrained: &ModelBundle,
    data: &Dataset,
    config: &TransferConfig,
    plan: &BenchmarkPlan,
    run: usize,
) -> Result<RunRecord> {
    let seed = rng::derive(config.master_seed, RUN_TAG, run as u64);
    let wrap = |source: Error| Error::BenchmarkRun {
        run,
        source: Box::new(source),
    };
    let mut r = rng::from_seed(seed);
    let picked: Vec<usize> = sample(&mut r, plan.pool.len(), config.train_size)
        .into_iter()
        .map(|i| plan.pool[i])
        .collect();
    let (fit_idx, monitor_idx) = picked.split_at(config.n_fit());

    let scale = TargetScale::fit(picked.iter().map(|&i| data.targets[i][0]));
    let fit = scale.apply(&data.subset(fit_idx));
    let monitor = scale.apply(&data.subset(monitor_idx));
    let validation = data.subset(&plan.validation);

    let mut transfer = freeze_and_head(pretrained, 1, rng::derive(seed, 1, 0)).map_err(wrap)?;
    let transfer_report = train(&mut transfer, &fit, &monitor, &config.hyper).map_err(wrap)?;
    let mut random = random_counterpart(&transfer, rng::derive(seed, 2, 0)).map_err(wrap)?;
    let random_report = train(&mut random, &fit, &monitor, &config.hyper).map_err(wrap)?;

    let body_len = transfer.layer_range(transfer.layers().len() - 2).end;
    let body_intact = transfer.weights[..body_len]
        .iter()
        .zip(&pretrained.weights[..body_len])
        .all(|(a, b)| a.to_bits() == b.to_bits());
    Ok(RunRecord {
        run,
        seed,
        transfer_mse: scale.mse(&transfer, &validation).map_err(wrap)?,
        random_mse: scale.mse(&random, &validation).map_err(wrap)?,
        transfer_epochs: transfer_report.epochs,
        random_epochs: random_report.epochs,
        body_intact,
    })
}

struct TargetScale {
    mean: f64,
    sd: f64,
}

impl TargetScale {
    fn fit(values: impl Iterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.collect();
        let sd = sample_sd(&v);
        TargetScale {
            mean: mean(&v),
            sd: if sd > 1e-12 { sd } else { 1.0 },
        }
    }

    fn apply(&self, data: &Dataset) -> Dataset {
        Dataset {
            inputs: data.inputs.clone(),
            targets: data
                .targets
                .iter()
                .map(|t| t.iter().map(|y| (y - self.mean) / self.sd).collect())
                .collect(),
        }
    }

    /// MSE of the de-standardised predictions against raw targets.
    fn mse(&self, model: &ModelBundle, data: &Dataset) -> Result<f64> {
        let mut total = 0.0;
        for (x, y) in data.inputs.iter().zip(&data.targets) {
            let out = model.forward(x)?;
            let pred = out[0] * self.sd + self.mean;
            total += (pred - y[0]) * (pred - y[0]);
        }
        let mse = total / data.len() as f64;
        if !mse.is_finite() {
            return Err(Error::Numeric("validation error is not finite".into()));
        }
        Ok(mse)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub total_weights: usize,
    pub trainable_weights: usize,
    pub mse_mean: f64,
    pub ci95_halfwidth: f64,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arms {
    pub transfer: ArmReport,
    pub random: ArmReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub task: TransferTask,
    pub config: TransferConfig,
    pub arms: Arms,
    pub per_run: Vec<RunRecord>,
}

impl BenchmarkReport {
    pub fn bodies_intact(&self) -> bool {
        self.per_run.iter().all(|r| r.body_intact)
    }
}

/// Builds the report from run records in any order.
pub fn assemble_report(pretrained: &ModelBundle, config: &TransferConfig, mut runs: Vec<RunRecord>) -> Result<BenchmarkReport> {
    runs.sort_by_key(|r| r.run);
    let transfer_model = freeze_and_head(pretrained, 1, 0)?;
    let arm = |losses: Vec<f64>, trainable: usize| -> Result<ArmReport> {
        let (mse_mean, ci95_halfwidth) = confidence_interval(&losses)?;
        Ok(ArmReport {
            total_weights: transfer_model.total_weights(),
            trainable_weights: trainable,
            mse_mean,
            ci95_halfwidth,
            losses,
        })
    };
    Ok(BenchmarkReport {
        task: config.task,
        config: config.clone(),
        arms: Arms {
            transfer: arm(runs.iter().map(|r| r.transfer_mse).collect(), transfer_model.trainable_weights())?,
            random: arm(runs.iter().map(|r| r.random_mse).collect(), transfer_model.total_weights())?,
        },
        per_run: runs,
    })
}

/// All runs in sequence.
pub fn run_benchmark(pretrained: &ModelBundle, data: &Dataset, config: &TransferConfig) -> Result<BenchmarkReport> {
    let plan = plan(data.len(), config)?;
    let runs = (0..config.runs)
        .map(|r| run_one(pretrained, data, config, &plan, r))
        .collect::<Result<Vec<_>>>()?;
    assemble_report(pretrained, config, runs)
}
