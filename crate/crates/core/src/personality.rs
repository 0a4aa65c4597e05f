//! Big-Five trait scoring from annual spending shares.
//!
//! A [`CoefficientTable`] associates every spending category with a weight in
//! `[-3, 3]` per trait. Raw trait scores are linear in the spending row; they
//! are z-scored across the population before traits are compared, and trait
//! dominance is decided on absolute values (a strongly negative extraversion
//! is a strongly positive introversion).

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::SpendingCube;
use crate::error::{Error, Result};
use crate::stats;

pub const N_TRAITS: usize = 5;

/// Big-Five traits in canonical order. The order is also the tie-break order
/// for dominance ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trait {
    Openness,
    Conscientiousness,
    Extraversion,
    Agreeableness,
    Neuroticism,
}

pub const TRAITS: [Trait; N_TRAITS] = [
    Trait::Openness,
    Trait::Conscientiousness,
    Trait::Extraversion,
    Trait::Agreeableness,
    Trait::Neuroticism,
];

impl Trait {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Trait> {
        TRAITS.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Trait::Openness => "openness",
            Trait::Conscientiousness => "conscientiousness",
            Trait::Extraversion => "extraversion",
            Trait::Agreeableness => "agreeableness",
            Trait::Neuroticism => "neuroticism",
        }
    }

    pub fn from_name(name: &str) -> Option<Trait> {
        TRAITS.iter().copied().find(|t| t.name() == name)
    }

    pub fn letter(self) -> char {
        match self {
            Trait::Openness => 'O',
            Trait::Conscientiousness => 'C',
            Trait::Extraversion => 'E',
            Trait::Agreeableness => 'A',
            Trait::Neuroticism => 'N',
        }
    }
}

pub type TraitScores = [f64; N_TRAITS];

/// Trait-by-category coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    categories: Vec<String>,
    /// Trait-major: `coefficients[trait * m + category]`.
    coefficients: Vec<f64>,
}

/// Category names and relative baseline shares of the shipped synthetic table.
pub const DEFAULT_CATEGORIES: [(&str, f64); 12] = [
    ("groceries", 0.20),
    ("housing", 0.24),
    ("travel", 0.06),
    ("books", 0.04),
    ("savings", 0.08),
    ("health", 0.06),
    ("restaurants", 0.06),
    ("entertainment", 0.05),
    ("charity", 0.04),
    ("gifts", 0.05),
    ("insurance", 0.06),
    ("clothing", 0.06),
];

/// Synthetic stand-in coefficients, one row per entry of
/// [`DEFAULT_CATEGORIES`], columns in trait order (O, C, E, A, N). These are
/// illustrative values, not the published table: each trait owns two
/// categories, with weak cross-loadings.
pub const DEFAULT_COEFFICIENTS: [TraitScores; 12] = [
    [0.00, 0.04, 0.00, 0.00, 0.00],
    [0.00, 0.06, 0.00, 0.00, 0.02],
    [0.24, 0.00, 0.06, 0.00, -0.04],
    [0.20, 0.02, -0.164, 0.00, 0.00],
    [-0.04, 0.26, -0.04, 0.00, 0.06],
    [0.00, 0.16, 0.00, 0.02, 0.04],
    [0.04, -0.06, 0.24, 0.02, 0.00],
    [0.02, -0.06, 0.20, 0.00, 0.00],
    [0.00, 0.02, 0.00, 0.26, 0.00],
    [0.02, 0.00, 0.04, 0.20, -0.02],
    [-0.04, 0.04, 0.00, 0.00, 0.22],
    [0.02, -0.04, 0.02, 0.00, 0.18],
];

impl CoefficientTable {
    /// Builds a table from per-category rows (in trait order), validating the
    /// coefficient range and category names.
    pub fn new(categories: Vec<String>, rows: &[TraitScores]) -> Result<Self> {
        if categories.len() != rows.len() {
            return Err(Error::Schema(format!(
                "{} category names but {} coefficient rows",
                categories.len(),
                rows.len()
            )));
        }
        if categories.len() < 2 {
            return Err(Error::Schema(format!(
                "a coefficient table needs at least 2 categories, got {}",
                categories.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for name in &categories {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate category '{name}'")));
            }
        }
        let m = categories.len();
        let mut coefficients = alloc::vec![0.0; N_TRAITS * m];
        for (c, row) in rows.iter().enumerate() {
            for (t, &value) in row.iter().enumerate() {
                if !value.is_finite() || !(-3.0..=3.0).contains(&value) {
                    return Err(Error::Validation(format!(
                        "category '{}', trait {}: coefficient {value} outside [-3, 3]",
                        categories[c],
                        TRAITS[t].name()
                    )));
                }
                coefficients[t * m + c] = value;
            }
        }
        Ok(CoefficientTable {
            categories,
            coefficients,
        })
    }

    /// The shipped 12-category synthetic table.
    pub fn default_synthetic() -> Self {
        let names = DEFAULT_CATEGORIES.iter().map(|(n, _)| String::from(*n)).collect();
        CoefficientTable::new(names, &DEFAULT_COEFFICIENTS).expect("default table is valid")
    }

    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn category_index(&self, name: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == name)
    }

    pub fn coefficient(&self, t: Trait, category: usize) -> f64 {
        self.coefficients[t.index() * self.n_categories() + category]
    }

    /// Coefficients of one trait over all categories.
    pub fn trait_row(&self, t: Trait) -> &[f64] {
        let m = self.n_categories();
        &self.coefficients[t.index() * m..(t.index() + 1) * m]
    }

    /// Per-category rows in trait order, the inverse of [`CoefficientTable::new`].
    pub fn rows(&self) -> Vec<TraitScores> {
        (0..self.n_categories())
            .map(|c| core::array::from_fn(|t| self.coefficient(TRAITS[t], c)))
            .collect()
    }
}

/// Raw (unstandardised) trait scores of one spending row.
pub fn score(spend_row: &[f64], table: &CoefficientTable) -> Result<TraitScores> {
    if spend_row.len() != table.n_categories() {
        return Err(Error::Dimension(format!(
            "spending row has {} categories, table has {}",
            spend_row.len(),
            table.n_categories()
        )));
    }
    Ok(core::array::from_fn(|t| {
        table
            .trait_row(TRAITS[t])
            .iter()
            .zip(spend_row)
            .map(|(c, s)| c * s)
            .sum()
    }))
}

/// Z-scores every trait column across the population (population standard
/// deviation).
pub fn standardize(raw: &[TraitScores]) -> Result<Vec<TraitScores>> {
    if raw.len() < 2 {
        return Err(Error::Input(format!(
            "standardization needs a population of at least 2, got {}",
            raw.len()
        )));
    }
    let mut means = [0.0; N_TRAITS];
    let mut sds = [0.0; N_TRAITS];
    for t in 0..N_TRAITS {
        let column: Vec<f64> = raw.iter().map(|r| r[t]).collect();
        means[t] = stats::mean(&column);
        sds[t] = stats::population_sd(&column);
        if !(sds[t] > 1e-300) {
            return Err(Error::ZeroVariance {
                trait_name: TRAITS[t].name(),
            });
        }
    }
    Ok(raw
        .iter()
        .map(|r| core::array::from_fn(|t| (r[t] - means[t]) / sds[t]))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Annual(usize),
    Overall,
}

/// Standardised trait scores for one customer and window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersonalityVector {
    pub traits: TraitScores,
    pub window: Window,
}

impl PersonalityVector {
    pub fn dominance(&self) -> DominanceRanking {
        dominance_ranking(&self.traits)
    }
}

/// Trait indices by descending absolute score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DominanceRanking {
    pub order: [Trait; N_TRAITS],
}

impl DominanceRanking {
    pub fn dominant(&self) -> Trait {
        self.order[0]
    }

    /// The trait ranked at `level` (0 = dominant).
    pub fn at(&self, level: usize) -> Trait {
        self.order[level]
    }

    pub fn indices(&self) -> [usize; N_TRAITS] {
        self.order.map(Trait::index)
    }

    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        let mut seen = [false; N_TRAITS];
        if indices.len() != N_TRAITS {
            return Err(Error::Input(format!(
                "dominance ranking needs {N_TRAITS} entries, got {}",
                indices.len()
            )));
        }
        let mut order = [Trait::Openness; N_TRAITS];
        for (slot, &i) in order.iter_mut().zip(indices) {
            let t = Trait::from_index(i)
                .ok_or_else(|| Error::Input(format!("trait index {i} out of range")))?;
            if core::mem::replace(&mut seen[i], true) {
                return Err(Error::Input(format!("trait index {i} repeated in ranking")));
            }
            *slot = t;
        }
        Ok(DominanceRanking { order })
    }
}

/// Sorts traits by descending absolute value; equal magnitudes keep canonical
/// (O, C, E, A, N) order.
pub fn dominance_ranking(traits: &TraitScores) -> DominanceRanking {
    let mut order = TRAITS;
    // Stable sort, so ties stay in canonical order.
    order.sort_by(|a, b| traits[b.index()].abs().total_cmp(&traits[a.index()].abs()));
    DominanceRanking { order }
}

/// Fraction of customers whose dominant trait is the same in every year.
/// `annual[c]` holds the yearly trait vectors of customer `c`.
pub fn window_stability(annual: &[Vec<TraitScores>]) -> Result<f64> {
    if annual.is_empty() {
        return Err(Error::Input("no customers".into()));
    }
    let mut stable = 0usize;
    for years in annual {
        if years.len() < 2 {
            return Err(Error::Input(format!(
                "window stability needs at least 2 years, got {}",
                years.len()
            )));
        }
        let first = dominance_ranking(&years[0]).dominant();
        if years.iter().all(|y| dominance_ranking(y).dominant() == first) {
            stable += 1;
        }
    }
    Ok(stable as f64 / annual.len() as f64)
}

/// Annual and overall standardised personalities of a whole population.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationScores {
    /// `annual[c][t]`; all customer-years are standardised together.
    pub annual: Vec<Vec<PersonalityVector>>,
    /// Score of each customer's mean annual spending row, standardised across
    /// customers.
    pub overall: Vec<PersonalityVector>,
}

impl PopulationScores {
    pub fn overall_traits(&self) -> Vec<TraitScores> {
        self.overall.iter().map(|p| p.traits).collect()
    }

    pub fn annual_traits(&self) -> Vec<Vec<TraitScores>> {
        self.annual
            .iter()
            .map(|years| years.iter().map(|p| p.traits).collect())
            .collect()
    }

    pub fn dominance(&self) -> Vec<DominanceRanking> {
        self.overall.iter().map(PersonalityVector::dominance).collect()
    }
}

/// Raw annual scores (`[customer][year]`) without standardisation.
pub fn raw_annual_scores(cube: &SpendingCube, table: &CoefficientTable) -> Result<Vec<Vec<TraitScores>>> {
    let spend = cube.spend();
    (0..spend.n_customers())
        .map(|c| {
            (0..spend.n_years())
                .map(|t| score(spend.row(c, t), table))
                .collect()
        })
        .collect()
}

pub fn score_population(cube: &SpendingCube, table: &CoefficientTable) -> Result<PopulationScores> {
    let spend = cube.spend();
    let (n, years) = (spend.n_customers(), spend.n_years());
    let raw_annual = raw_annual_scores(cube, table)?;
    let pooled: Vec<TraitScores> = raw_annual.iter().flatten().copied().collect();
    let annual_std = standardize(&pooled)?;
    let annual = (0..n)
        .map(|c| {
            (0..years)
                .map(|t| PersonalityVector {
                    traits: annual_std[c * years + t],
                    window: Window::Annual(t),
                })
                .collect()
        })
        .collect();
    let raw_overall: Vec<TraitScores> = (0..n)
        .map(|c| score(&cube.mean_row(c), table))
        .collect::<Result<_>>()?;
    let overall = standardize(&raw_overall)?
        .into_iter()
        .map(|traits| PersonalityVector {
            traits,
            window: Window::Overall,
        })
        .collect();
    Ok(PopulationScores { annual, overall })
}
