use microseg_core::models::{
    autoencoder_dataset, build, fit_scaling, sequence_dataset, train, ArchKind, Dataset, TargetMode, TrainHyper,
};
use microseg_core::nn::AdamConfig;
use microseg_core::personality::score_population;
use microseg_core::synthgen::{generate_population, GenConfig, SpendingModel};
use microseg_core::transfer::{
    assemble_report, freeze_and_head, plan, run_benchmark, run_one, task_dataset, TransferConfig, TransferTask,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn subspace_data(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis: Vec<[f64; 12]> = (0..5).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let z: [f64; 5] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            (0..12).map(|k| (0..5).map(|j| z[j] * basis[j][k]).sum::<f64>() * 0.5).collect()
        })
        .collect();
    Dataset {
        targets: rows.clone(),
        inputs: rows,
    }
}

#[test]
fn feed_forward_autoencoder_recovers_a_five_dimensional_subspace() {
    let all = subspace_data(500, 1);
    let idx: Vec<usize> = (0..500).collect();
    let (data, val) = (all.subset(&idx[..400]), all.subset(&idx[400..]));
    let mut model = build(ArchKind::FfAutoencoder, 12, 5, 3).unwrap();
    let hyper = TrainHyper {
        epochs: 500,
        batch_size: 32,
        patience: 500,
        adam: AdamConfig {
            learning_rate: 3e-3,
            ..AdamConfig::default()
        },
    };
    let report = train(&mut model, &data, &val, &hyper).unwrap();
    let last = *report.train_loss_curve.last().unwrap();
    // Loss is the per-sample sum of squares over the 12 outputs divided by 12.
    assert!(last < 1e-2, "reconstruction mse {last}");
    assert!(report.val_loss < 1e-2);
}

fn small_world() -> microseg_core::dataset::SpendingCube {
    let cfg = GenConfig {
        n_customers: 200,
        ..GenConfig::default()
    };
    generate_population(&cfg, &SpendingModel::default_synthetic()).unwrap()
}

#[test]
fn training_is_reproducible_and_reports_a_consistent_curve() {
    let cube = small_world();
    let table = SpendingModel::default_synthetic().table;
    let scores = score_population(&cube, &table).unwrap();
    let data = sequence_dataset(&cube, &scores.overall_traits(), TargetMode::TraitVector).unwrap();
    let idx: Vec<usize> = (0..200).collect();
    let (fit, val) = (data.subset(&idx[..160]), data.subset(&idx[160..]));
    let run = || {
        let mut model = build(ArchKind::RnnPredictor, 12, 3, 77).unwrap();
        model.set_input_scaling(Some(fit_scaling(&cube).unwrap())).unwrap();
        let report = train(&mut model, &fit, &val, &TrainHyper { epochs: 15, ..TrainHyper::default() }).unwrap();
        (model, report)
    };
    let (m1, r1) = run();
    let (m2, r2) = run();
    assert_eq!(r1, r2);
    assert_eq!(m1, m2);
    assert_eq!(r1.train_loss_curve.len(), r1.epochs);
    assert!(r1.train_loss_curve.iter().all(|l| l.is_finite() && *l >= 0.0));
    assert!(r1.val_loss <= r1.initial_val_loss);
}

#[test]
fn recurrent_autoencoder_reconstructs_per_step() {
    let cube = small_world();
    let data = autoencoder_dataset(&cube, true);
    assert_eq!(data.inputs[0].len(), 72);
    let model = build(ArchKind::RnnAutoencoder, 12, 3, 1).unwrap();
    assert_eq!(model.forward(&data.inputs[0]).unwrap().len(), 72);
}

#[test]
fn frozen_body_survives_two_hundred_steps() {
    let cube = small_world();
    let pretrained = build(ArchKind::RnnPredictor, 12, 3, 4).unwrap();
    let mut model = freeze_and_head(&pretrained, 1, 5).unwrap();
    let data = task_dataset(&cube, TransferTask::Liquidity, true).unwrap();
    let hyper = TrainHyper {
        epochs: 40,
        batch_size: 40,
        patience: 1000,
        adam: AdamConfig {
            learning_rate: 1e-2,
            ..AdamConfig::default()
        },
    };
    // 200 customers in batches of 40 over 40 epochs: 200 Adam steps.
    train(&mut model, &data, &data, &hyper).unwrap();
    let body = model.layer_range(0);
    assert!(model.weights[body.clone()]
        .iter()
        .zip(&pretrained.weights[body])
        .all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!(model.trainable_weights(), 4);
}

#[test]
fn benchmark_bookkeeping_and_determinism() {
    let cube = small_world();
    let pretrained = build(ArchKind::FfPredictor, 12, 5, 4).unwrap();
    let data = task_dataset(&cube, TransferTask::DefaultRate, false).unwrap();
    let mut config = TransferConfig::new(TransferTask::DefaultRate, 9);
    config.runs = 2;
    config.train_size = 40;
    config.validation_size = 60;
    config.hyper.epochs = 10;
    let report = run_benchmark(&pretrained, &data, &config).unwrap();
    assert_eq!(report.per_run.len(), 2);
    assert_eq!(report.arms.transfer.losses.len(), 2);
    assert_eq!(report.arms.random.losses.len(), 2);
    assert_eq!(report.arms.transfer.total_weights, report.arms.random.total_weights);
    assert_eq!(report.arms.transfer.trainable_weights, 6);
    assert!(report.arms.transfer.trainable_weights < report.arms.random.trainable_weights);
    assert!(report.bodies_intact());
    assert_eq!(report, run_benchmark(&pretrained, &data, &config).unwrap());

    // Runs assembled in reverse order give the same report.
    let p = plan(data.len(), &config).unwrap();
    let runs: Vec<_> = (0..2).rev().map(|r| run_one(&pretrained, &data, &config, &p, r).unwrap()).collect();
    assert_eq!(assemble_report(&pretrained, &config, runs).unwrap(), report);

    // Validation customers never appear in the pool runs sample from.
    assert!(p.validation.iter().all(|v| !p.pool.contains(v)));
}
