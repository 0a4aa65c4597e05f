//! The pipeline stages behind the CLI commands, with their parallel parts
//! run on a bounded thread pool.
//!
//! Every parallel stage maps independent, individually seeded jobs and
//! collects results in job order, so outputs do not depend on the thread
//! count.

use microseg_core::dataset::{shuffled_partition, SpendingCube};
use microseg_core::models::{
    assemble_elbow, autoencoder_dataset, build, elbow_jobs, extract_states, fit_scaling, flat_dataset,
    run_elbow_job, sequence_dataset, train, ArchKind, Dataset, ElbowResult, ElbowSetup, TargetMode, TrainHyper,
    TrainReport,
};
use microseg_core::nn::{ModelBundle, Topology};
use microseg_core::personality::{
    dominance_ranking, score_population, CoefficientTable, DominanceRanking, Trait, TraitScores,
};
use microseg_core::plot::render_svg;
use microseg_core::segment::{
    build_segment_tree, project_pairs, shuffled_labels, silhouette, DistanceMatrix,
    SegmentNode, Trajectory,
};
use microseg_core::stats::{mean, percentile};
use microseg_core::transfer::{assemble_report, plan, run_one, task_dataset, BenchmarkReport, TransferConfig};
use microseg_core::{rng, Error};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::{PersonalityRecord, TrajectoryRecord};

const SPLIT_TAG: u64 = 0x5350_4c54;
const PERMUTATION_TAG: u64 = 0x5045_524d;

/// Share of customers used for fitting when a command trains a model; the
/// rest drives early stopping.
pub const TRAIN_FRACTION: f64 = 0.8;

/// A rayon pool capped at `threads` workers (0 = one per core).
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    pub fn new(threads: usize) -> CliResult<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {threads} worker threads: {e}")))?;
        Ok(Parallel { pool })
    }

    /// `items.map(f)` with results in input order.
    pub fn map<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
        self.pool.install(|| items.par_iter().map(f).collect())
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

/// Where predictor labels come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSource {
    /// Standardised scores computed from spending with the coefficient table.
    Scored,
    /// The generator's latent personality stored in the dataset.
    Truth,
}

/// Overall and annual labels for every customer.
pub struct Labels {
    pub overall: Vec<TraitScores>,
    pub annual: Vec<Vec<TraitScores>>,
}

pub fn labels(cube: &SpendingCube, table: &CoefficientTable, source: TargetSource) -> CliResult<Labels> {
    match source {
        TargetSource::Scored => {
            let scores = score_population(cube, table)?;
            Ok(Labels {
                overall: scores.overall_traits(),
                annual: scores.annual_traits(),
            })
        }
        TargetSource::Truth => {
            let truth = cube
                .truth_personality()
                .ok_or_else(|| CliError::Usage("dataset has no truth_personality field".into()))?;
            Ok(Labels {
                overall: truth.to_vec(),
                annual: truth.iter().map(|p| vec![*p; cube.n_years()]).collect(),
            })
        }
    }
}

/// Personality records: every annual window of a customer, then its overall
/// window.
pub fn score_records(cube: &SpendingCube, table: &CoefficientTable) -> CliResult<Vec<PersonalityRecord>> {
    let scores = score_population(cube, table)?;
    let mut out = Vec::with_capacity(cube.n_customers() * (cube.n_years() + 1));
    for (c, id) in cube.customer_ids().iter().enumerate() {
        for p in scores.annual[c].iter().chain(std::iter::once(&scores.overall[c])) {
            out.push(PersonalityRecord {
                customer_id: id.clone(),
                window: p.window,
                traits: p.traits,
                dominance: p.dominance().indices(),
            });
        }
    }
    Ok(out)
}

/// Seeded customer split into sorted (fit, monitor) index lists.
pub fn customer_split(n: usize, seed: u64) -> CliResult<(Vec<usize>, Vec<usize>)> {
    let n_fit = (n as f64 * TRAIN_FRACTION + 1e-9) as usize;
    if n_fit == 0 || n_fit >= n {
        return Err(Error::Split(format!("cannot split {n} customers for training")).into());
    }
    let (mut fit, mut monitor) = shuffled_partition(n, n_fit, rng::derive(seed, SPLIT_TAG, 0));
    fit.sort_unstable();
    monitor.sort_unstable();
    Ok((fit, monitor))
}

/// Training data of an architecture, one sample per customer or per
/// customer-year.
pub fn arch_dataset(kind: ArchKind, cube: &SpendingCube, labels: &Labels, mode: TargetMode) -> CliResult<Dataset> {
    Ok(match kind {
        ArchKind::RnnPredictor => sequence_dataset(cube, &labels.overall, mode)?,
        ArchKind::FfPredictor => flat_dataset(cube, &labels.annual, mode)?,
        ArchKind::RnnAutoencoder => autoencoder_dataset(cube, true),
        ArchKind::FfAutoencoder => autoencoder_dataset(cube, false),
    })
}

/// Sample indices belonging to `customers`.
fn sample_rows(kind: ArchKind, customers: &[usize], years: usize) -> Vec<usize> {
    if kind.is_recurrent() {
        customers.to_vec()
    } else {
        customers.iter().flat_map(|&c| c * years..(c + 1) * years).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainSpec {
    pub kind: ArchKind,
    pub hidden: usize,
    pub mode: TargetMode,
    pub hyper: TrainHyper,
    pub seed: u64,
}

/// Builds and trains one architecture on an 80/20 customer split. Inputs are
/// standardised per category with statistics of the fitting customers;
/// autoencoders reconstruct the standardised inputs.
pub fn train_model(cube: &SpendingCube, labels: &Labels, spec: &TrainSpec) -> CliResult<(ModelBundle, TrainReport)> {
    let (fit_c, monitor_c) = customer_split(cube.n_customers(), spec.seed)?;
    let scaling = fit_scaling(&cube.select(&fit_c))?;
    let mut data = arch_dataset(spec.kind, cube, labels, spec.mode)?;
    if !spec.kind.is_predictor() {
        let m = cube.n_categories();
        for t in &mut data.targets {
            for (k, v) in t.iter_mut().enumerate() {
                *v = (*v - scaling.shift[k % m]) / scaling.scale[k % m];
            }
        }
    }
    let years = cube.n_years();
    let fit = data.subset(&sample_rows(spec.kind, &fit_c, years));
    let monitor = data.subset(&sample_rows(spec.kind, &monitor_c, years));
    let mut model = build(spec.kind, cube.n_categories(), spec.hidden, spec.seed)?;
    model.set_input_scaling(Some(scaling))?;
    let report = train(&mut model, &fit, &monitor, &spec.hyper)?;
    Ok((model, report))
}

/// Elbow sweep of recurrent-predictor hidden sizes with jobs spread over the
/// pool.
pub fn sweep(
    cube: &SpendingCube,
    labels: &Labels,
    candidates: &[usize],
    runs: usize,
    hyper: TrainHyper,
    seed: u64,
    par: &Parallel,
) -> CliResult<ElbowResult> {
    let (fit_c, monitor_c) = customer_split(cube.n_customers(), seed)?;
    let data = sequence_dataset(cube, &labels.overall, TargetMode::TraitVector)?;
    let (fit, monitor) = (data.subset(&fit_c), data.subset(&monitor_c));
    let setup = ElbowSetup {
        train: &fit,
        val: &monitor,
        n_inputs: cube.n_categories(),
        scaling: Some(fit_scaling(&cube.select(&fit_c))?),
        hyper,
    };
    let jobs = elbow_jobs(candidates, runs, seed)?;
    let losses = par
        .map(&jobs, |&job| run_elbow_job(&setup, job))
        .into_iter()
        .collect::<Result<Vec<f64>, Error>>()?;
    Ok(assemble_elbow(&jobs, &losses)?)
}

/// Hidden-state trajectories of every customer with their scored overall
/// personality.
pub fn extract(
    model: &ModelBundle,
    cube: &SpendingCube,
    table: &CoefficientTable,
    par: &Parallel,
) -> CliResult<Vec<TrajectoryRecord>> {
    if model.input_dim() != cube.n_categories() {
        return Err(Error::Dimension(format!(
            "model expects {} categories, dataset has {}",
            model.input_dim(),
            cube.n_categories()
        ))
        .into());
    }
    let scores = score_population(cube, table)?;
    let customers: Vec<usize> = (0..cube.n_customers()).collect();
    par.map(&customers, |&c| {
        let states = extract_states(model, cube.spend().sequence(c))?;
        let h = states.len() / cube.n_years();
        let p = scores.overall[c];
        Ok(TrajectoryRecord {
            customer_id: cube.customer_ids()[c].clone(),
            states: states.chunks(h).map(<[f64]>::to_vec).collect(),
            personality: p.traits,
            dominance: p.dominance().indices(),
        })
    })
    .into_iter()
    .collect()
}

pub fn to_trajectories(records: &[TrajectoryRecord]) -> CliResult<Vec<Trajectory>> {
    records
        .iter()
        .map(|r| {
            Ok(Trajectory {
                customer_id: r.customer_id.clone(),
                points: r.states.clone(),
                personality: r.personality,
                dominance: Some(DominanceRanking::from_indices(&r.dominance)?),
            })
        })
        .collect()
}

/// Silhouette of one labelling against its permutation baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub level: usize,
    /// Dominant trait of the segment examined (level 2 only).
    #[serde(rename = "within", skip_serializing_if = "Option::is_none", default)]
    pub within: Option<Trait>,
    pub members: usize,
    pub silhouette: f64,
    pub permutations: usize,
    pub baseline_mean: f64,
    pub baseline_p975: f64,
}

impl Separation {
    pub fn exceeds_baseline(&self) -> bool {
        self.silhouette > 0.0 && self.silhouette > self.baseline_p975
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub depth: usize,
    pub separation: Vec<Separation>,
    pub tree: SegmentNode,
}

fn separation(
    dm: &DistanceMatrix,
    labels: &[usize],
    level: usize,
    within: Option<Trait>,
    permutations: usize,
    seed: u64,
    par: &Parallel,
) -> CliResult<Separation> {
    let observed = silhouette(dm, labels)?;
    let ks: Vec<usize> = (0..permutations).collect();
    let seed = rng::derive(seed, PERMUTATION_TAG, level as u64);
    let baseline = par
        .map(&ks, |&k| silhouette(dm, &shuffled_labels(labels, seed, k)))
        .into_iter()
        .collect::<Result<Vec<f64>, Error>>()?;
    Ok(Separation {
        level,
        within,
        members: labels.len(),
        silhouette: observed,
        permutations,
        baseline_mean: if baseline.is_empty() { f64::NAN } else { mean(&baseline) },
        baseline_p975: if baseline.is_empty() { f64::NAN } else { percentile(&baseline, 97.5) },
    })
}

/// Segment tree plus separation of the dominant-trait labelling and of the
/// second-trait labelling inside the largest dominant segment.
pub fn segment(
    trajectories: &[Trajectory],
    depth: usize,
    permutations: usize,
    seed: u64,
    par: &Parallel,
) -> CliResult<SegmentReport> {
    let tree = build_segment_tree(trajectories, depth)?;
    let rankings: Vec<DominanceRanking> = trajectories
        .iter()
        .map(|t| t.dominance.unwrap_or_else(|| dominance_ranking(&t.personality)))
        .collect();
    let flat: Vec<Vec<f64>> = trajectories.iter().map(Trajectory::flattened).collect();
    let dm = DistanceMatrix::new(&flat)?;
    let level1: Vec<usize> = rankings.iter().map(|r| r.dominant().index()).collect();
    let mut separation_rows = vec![separation(&dm, &level1, 1, None, permutations, seed, par)?];

    let mut counts = [0usize; 5];
    for &l in &level1 {
        counts[l] += 1;
    }
    // Largest segment; ties go to the earlier trait.
    let largest = (0..5).rev().max_by_key(|&l| counts[l]).unwrap_or(0);
    let members: Vec<usize> = (0..level1.len()).filter(|&i| level1[i] == largest).collect();
    let level2: Vec<usize> = members.iter().map(|&i| rankings[i].at(1).index()).collect();
    let distinct = level2.iter().any(|&l| l != level2[0]);
    if depth >= 2 && members.len() >= 2 && distinct {
        separation_rows.push(separation(
            &dm.subset(&members),
            &level2,
            2,
            Trait::from_index(largest),
            permutations,
            seed,
            par,
        )?);
    }
    Ok(SegmentReport {
        depth,
        separation: separation_rows,
        tree,
    })
}

/// SVG of the trajectories coloured by dominant trait.
pub fn plot(trajectories: &[Trajectory]) -> CliResult<String> {
    let projections = trajectories
        .iter()
        .map(|t| project_pairs(&t.points))
        .collect::<Result<Vec<_>, Error>>()?;
    let labels: Vec<Trait> = trajectories
        .iter()
        .map(|t| t.dominance.unwrap_or_else(|| dominance_ranking(&t.personality)).dominant())
        .collect();
    Ok(render_svg(&projections, &labels)?)
}

/// Transfer benchmark with runs spread over the pool.
pub fn benchmark(
    pretrained: &ModelBundle,
    cube: &SpendingCube,
    config: &TransferConfig,
    par: &Parallel,
) -> CliResult<BenchmarkReport> {
    let recurrent = pretrained.topology() == Topology::SequenceToOne;
    let data = task_dataset(cube, config.task, recurrent)?;
    let plan = plan(data.len(), config)?;
    let runs: Vec<usize> = (0..config.runs).collect();
    let records = par
        .map(&runs, |&r| run_one(pretrained, &data, config, &plan, r))
        .into_iter()
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(assemble_report(pretrained, config, records)?)
}
