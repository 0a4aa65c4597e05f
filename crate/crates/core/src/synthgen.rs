//! Synthetic customer populations.
//!
//! Each customer has a latent Big-Five personality `p` (standard normal per
//! trait, truncated to `[-3, 3]`). Annual spending shares are
//! `softmax(b + alpha * C^T p + eps_t + spikes)`, with `C` the coefficient
//! table, `b` fixed base logits, `eps_t ~ N(0, sigma^2)` per year and
//! category, and, with probability `event_prob` per year, a one-year spike of
//! `event_magnitude` on one random category's logit (a car purchase, a
//! medical bill). Income is fixed at 1.0, so shares are income-normalised
//! spending.
//!
//! Every customer draws from its own stream seeded with a mix of
//! `master_seed` xor the customer index, so generation order never matters.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{SpendTensor, SpendingCube, Targets};
use crate::error::{Error, Result};
use crate::math::{dot, ln, sigmoid, softmax};
use crate::personality::{CoefficientTable, TraitScores, DEFAULT_CATEGORIES, N_TRAITS, TRAITS};
use crate::stats::symmetric_eigen;
use crate::rng;

/// Weights of the synthetic liquidity index: `w_l . p + N(0, 0.1^2)`.
pub const LIQUIDITY_WEIGHTS: TraitScores = [0.2, 0.6, -0.3, 0.1, -0.5];
/// Weights of the synthetic default rate: `10 sigmoid(w_d . p + N(0, 0.1^2))`.
pub const DEFAULT_RATE_WEIGHTS: TraitScores = [0.1, -0.8, 0.3, -0.2, 0.6];
pub const TARGET_NOISE_SD: f64 = 0.1;

pub const DEFAULT_PERSONALITY_STRENGTH: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_customers: usize,
    pub n_years: usize,
    pub n_categories: usize,
    pub personality_strength: f64,
    pub noise_sd: f64,
    pub event_prob: f64,
    pub event_magnitude: f64,
    pub master_seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_customers: 2000,
            n_years: 6,
            n_categories: 12,
            personality_strength: DEFAULT_PERSONALITY_STRENGTH,
            noise_sd: 0.05,
            event_prob: 0.1,
            event_magnitude: 2.0,
            master_seed: 42,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        fn bound(ok: bool, msg: String) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(msg))
            }
        }
        bound(
            self.n_customers >= 1,
            format!("n_customers must be >= 1, got {}", self.n_customers),
        )?;
        bound(
            self.n_years >= 2,
            format!("n_years must be >= 2, got {}", self.n_years),
        )?;
        bound(
            self.n_categories >= 2,
            format!("n_categories must be >= 2, got {}", self.n_categories),
        )?;
        let non_negative = |name: &str, v: f64| {
            bound(
                v.is_finite() && v >= 0.0,
                format!("{name} must be finite and >= 0, got {v}"),
            )
        };
        non_negative("personality_strength", self.personality_strength)?;
        non_negative("noise_sd", self.noise_sd)?;
        non_negative("event_magnitude", self.event_magnitude)?;
        bound(
            (0.0..=1.0).contains(&self.event_prob),
            format!("event_prob must lie in [0, 1], got {}", self.event_prob),
        )
    }
}

/// Coefficient table plus base logits: everything that maps a personality to
/// expected spending.
#[derive(Debug, Clone, PartialEq)]
pub struct SpendingModel {
    pub table: CoefficientTable,
    pub base_logits: Vec<f64>,
}

impl SpendingModel {
    /// The shipped 12-category table with its baseline shares.
    pub fn default_synthetic() -> Self {
        let total: f64 = DEFAULT_CATEGORIES.iter().map(|(_, s)| s).sum();
        SpendingModel {
            table: CoefficientTable::default_synthetic(),
            base_logits: DEFAULT_CATEGORIES.iter().map(|(_, s)| ln(s / total)).collect(),
        }
    }

    /// Any table with uniform baseline shares.
    pub fn uniform(table: CoefficientTable) -> Self {
        let m = table.n_categories();
        SpendingModel {
            table,
            base_logits: vec![0.0; m],
        }
    }

    pub fn n_categories(&self) -> usize {
        self.table.n_categories()
    }

    /// The same model with the table's trait space cut down to its `k`
    /// leading directions (eigenvectors of `C C^T`). Spending then depends on
    /// personality only through `k` linear combinations of the traits, so
    /// exactly `k` latent directions are observable.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if !(1..=N_TRAITS).contains(&k) {
            return Err(Error::Config(format!(
                "trait space can be truncated to 1..={N_TRAITS} directions, got {k}"
            )));
        }
        let rows = self.table.rows();
        let mut gram = vec![0.0; N_TRAITS * N_TRAITS];
        for r in &rows {
            for i in 0..N_TRAITS {
                for j in 0..N_TRAITS {
                    gram[i * N_TRAITS + j] += r[i] * r[j];
                }
            }
        }
        let (_, vectors) = symmetric_eigen(&gram, N_TRAITS);
        let mut projector = [[0.0; N_TRAITS]; N_TRAITS];
        for v in &vectors[..k] {
            for i in 0..N_TRAITS {
                for j in 0..N_TRAITS {
                    projector[i][j] += v[i] * v[j];
                }
            }
        }
        let projected: Vec<TraitScores> = rows
            .iter()
            .map(|r| core::array::from_fn(|i| dot(&projector[i], r)))
            .collect();
        Ok(SpendingModel {
            table: CoefficientTable::new(self.table.categories().to_vec(), &projected)?,
            base_logits: self.base_logits.clone(),
        })
    }
}

/// Latent quantities of one synthetic customer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub personality: TraitScores,
    pub liquidity: f64,
    pub default_rate: f64,
}

/// Targets for given noise draws. With zero noise and `p = 0` this gives
/// liquidity 0 and default rate 5.
pub fn targets_with_noise(p: &TraitScores, liquidity_noise: f64, default_noise: f64) -> (f64, f64) {
    let liquidity = dot(&LIQUIDITY_WEIGHTS, p) + liquidity_noise;
    let default_rate = 10.0 * sigmoid(dot(&DEFAULT_RATE_WEIGHTS, p) + default_noise);
    (liquidity, default_rate)
}

/// Draws target noise from `rng` and returns `(liquidity, default_rate)`.
pub fn synth_targets<R: Rng + ?Sized>(p: &TraitScores, rng: &mut R) -> (f64, f64) {
    let e_l: f64 = StandardNormal.sample(rng);
    let e_d: f64 = StandardNormal.sample(rng);
    targets_with_noise(p, TARGET_NOISE_SD * e_l, TARGET_NOISE_SD * e_d)
}

fn truncated_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let x: f64 = StandardNormal.sample(rng);
        if x.abs() <= 3.0 {
            return x;
        }
    }
}

/// Generates one customer's `T x m` shares and ground truth.
pub fn generate_customer(config: &GenConfig, model: &SpendingModel, index: usize) -> (Vec<f64>, GroundTruth) {
    let mut rng = rng::customer_stream(config.master_seed, index);
    let m = config.n_categories;
    let personality: TraitScores = core::array::from_fn(|_| truncated_normal(&mut rng));

    let mut base = model.base_logits.clone();
    for t in TRAITS {
        for (logit, c) in base.iter_mut().zip(model.table.trait_row(t)) {
            *logit += config.personality_strength * c * personality[t.index()];
        }
    }

    let mut shares = vec![0.0; config.n_years * m];
    let mut logits = vec![0.0; m];
    for year in 0..config.n_years {
        for (l, b) in logits.iter_mut().zip(&base) {
            let eps: f64 = StandardNormal.sample(&mut rng);
            *l = b + config.noise_sd * eps;
        }
        // Draws happen unconditionally so the stream layout does not depend
        // on the configuration.
        let spike = rng.random_bool(config.event_prob);
        let category = rng.random_range(0..m);
        if spike {
            logits[category] += config.event_magnitude;
        }
        softmax(&logits, &mut shares[year * m..(year + 1) * m]);
    }
    let (liquidity, default_rate) = synth_targets(&personality, &mut rng);
    (
        shares,
        GroundTruth {
            personality,
            liquidity,
            default_rate,
        },
    )
}

pub fn customer_id(index: usize) -> String {
    format!("c{index:06}")
}

/// Generates a full population. The cube carries targets and the latent
/// personalities.
pub fn generate_population(config: &GenConfig, model: &SpendingModel) -> Result<SpendingCube> {
    config.validate()?;
    if model.n_categories() != config.n_categories || model.base_logits.len() != config.n_categories {
        return Err(Error::Config(format!(
            "n_categories is {} but the spending model has {} categories",
            config.n_categories,
            model.n_categories()
        )));
    }
    let (n, t, m) = (config.n_customers, config.n_years, config.n_categories);
    let mut data = Vec::with_capacity(n * t * m);
    let mut targets = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for index in 0..n {
        let (shares, gt) = generate_customer(config, model, index);
        data.extend_from_slice(&shares);
        targets.push(Targets {
            liquidity: gt.liquidity,
            default_rate: gt.default_rate,
        });
        truth.push(gt.personality);
    }
    SpendingCube::new(
        (0..n).map(customer_id).collect(),
        SpendTensor::new(n, t, m, data)?,
        vec![1.0; n * t],
        Some(targets),
        Some(truth),
    )
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::personality::{score, TRAITS};
    use crate::stats::pearson;

    fn config(n: usize) -> GenConfig {
        GenConfig {
            n_customers: n,
            ..GenConfig::default()
        }
    }

    #[test]
    fn zero_signal_gives_identical_base_shares() {
        let cfg = GenConfig {
            n_customers: 20,
            personality_strength: 0.0,
            noise_sd: 0.0,
            event_prob: 0.0,
            ..GenConfig::default()
        };
        let model = SpendingModel::default_synthetic();
        let cube = generate_population(&cfg, &model).unwrap();
        let mut expected = vec![0.0; 12];
        softmax(&model.base_logits, &mut expected);
        for c in 0..20 {
            for y in 0..6 {
                for (a, b) in cube.spend().row(c, y).iter().zip(&expected) {
                    assert!((a - b).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn shape_and_normalisation() {
        let cube = generate_population(&config(2000), &SpendingModel::default_synthetic()).unwrap();
        assert_eq!(
            (cube.n_customers(), cube.n_years(), cube.n_categories()),
            (2000, 6, 12)
        );
        for c in 0..2000 {
            for y in 0..6 {
                let row = cube.spend().row(c, y);
                assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_personality_targets() {
        assert_eq!(targets_with_noise(&[0.0; 5], 0.0, 0.0), (0.0, 5.0));
    }

    #[test]
    fn targets_deterministic_per_stream() {
        let p = [0.3, -1.0, 0.5, 2.0, -0.2];
        let a = synth_targets(&p, &mut rng::from_seed(17));
        let b = synth_targets(&p, &mut rng::from_seed(17));
        assert_eq!(a, b);
    }

    #[test]
    fn default_rate_tracks_its_linear_predictor() {
        let cube = generate_population(&config(1000), &SpendingModel::default_synthetic()).unwrap();
        let truth = cube.truth_personality().unwrap();
        let linear: Vec<f64> = truth.iter().map(|p| dot(&DEFAULT_RATE_WEIGHTS, p)).collect();
        let rates: Vec<f64> = cube.targets().unwrap().iter().map(|t| t.default_rate).collect();
        // Brute-force Pearson correlation, independent of stats::pearson.
        let n = rates.len() as f64;
        let (mx, my) = (linear.iter().sum::<f64>() / n, rates.iter().sum::<f64>() / n);
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        for (x, y) in linear.iter().zip(&rates) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        let r = sxy / (sxx * syy).sqrt();
        assert!(r > 0.7, "correlation {r}");
        assert!((r - pearson(&linear, &rates)).abs() < 1e-12);
    }

    #[test]
    fn customer_streams_are_order_independent() {
        let cfg = config(50);
        let model = SpendingModel::default_synthetic();
        let cube = generate_population(&cfg, &model).unwrap();
        for index in [49usize, 0, 17, 33] {
            let (shares, gt) = generate_customer(&cfg, &model, index);
            assert_eq!(cube.spend().sequence(index), shares.as_slice());
            assert_eq!(cube.truth_personality().unwrap()[index], gt.personality);
        }
    }

    #[test]
    fn config_errors_name_the_bound() {
        let model = SpendingModel::default_synthetic();
        let err = generate_population(&config(0), &model).unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("n_customers")));
        let err = GenConfig {
            event_prob: 1.5,
            ..config(5)
        }
        .validate()
        .unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("event_prob")));
        let err = GenConfig {
            n_categories: 7,
            ..config(5)
        };
        assert!(generate_population(&err, &model).is_err());
    }

    #[test]
    fn zero_strength_scores_shrink_with_noise() {
        let model = SpendingModel::default_synthetic();
        let mean_abs = |sigma: f64| {
            let cfg = GenConfig {
                n_customers: 300,
                personality_strength: 0.0,
                noise_sd: sigma,
                event_prob: 0.0,
                ..GenConfig::default()
            };
            let cube = generate_population(&cfg, &model).unwrap();
            let base = score(&{
                let mut s = vec![0.0; 12];
                softmax(&model.base_logits, &mut s);
                s
            }, &model.table)
            .unwrap();
            let mut total = 0.0;
            for c in 0..300 {
                let s = score(&cube.mean_row(c), &model.table).unwrap();
                total += TRAITS.iter().map(|t| (s[t.index()] - base[t.index()]).abs()).sum::<f64>();
            }
            total / 300.0
        };
        let (big, small, none) = (mean_abs(0.5), mean_abs(0.05), mean_abs(0.0));
        assert!(big > small && small > none);
        assert!(none < 1e-15);
    }

    #[test]
    fn truncation_keeps_k_directions() {
        let full = SpendingModel::default_synthetic();
        let cut = full.truncated(3).unwrap();
        let rows = cut.table.rows();
        let mut gram = vec![0.0; 25];
        for r in &rows {
            for i in 0..5 {
                for j in 0..5 {
                    gram[i * 5 + j] += r[i] * r[j];
                }
            }
        }
        let (values, _) = symmetric_eigen(&gram, 5);
        assert!(values[2] > 1e-3, "{values:?}");
        assert!(values[3].abs() < 1e-12 && values[4].abs() < 1e-12, "{values:?}");
        let again = cut.truncated(3).unwrap();
        for (a, b) in again.table.rows().iter().zip(&rows) {
            for k in 0..5 {
                assert!((a[k] - b[k]).abs() < 1e-12);
            }
        }
        assert_eq!(full.truncated(5).unwrap().table.rows().len(), 12);
        assert!(full.truncated(0).is_err());
    }
}
