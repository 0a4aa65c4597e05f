//! Annual spending cubes: aggregation of classified transactions, the flat
//! `[n*T, m]` view used by feed-forward models, and customer-level splits.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::personality::TraitScores;
use crate::rng;

/// Dense `n x T x m` tensor of income-normalised spending, customer-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpendTensor {
    n_customers: usize,
    n_years: usize,
    n_categories: usize,
    data: Vec<f64>,
}

impl SpendTensor {
    pub fn new(n_customers: usize, n_years: usize, n_categories: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_customers * n_years * n_categories {
            return Err(Error::Dimension(format!(
                "spend tensor of shape [{n_customers}, {n_years}, {n_categories}] needs {} values, got {}",
                n_customers * n_years * n_categories,
                data.len()
            )));
        }
        Ok(SpendTensor {
            n_customers,
            n_years,
            n_categories,
            data,
        })
    }

    pub fn zeros(n_customers: usize, n_years: usize, n_categories: usize) -> Self {
        SpendTensor {
            n_customers,
            n_years,
            n_categories,
            data: vec![0.0; n_customers * n_years * n_categories],
        }
    }

    pub fn n_customers(&self) -> usize {
        self.n_customers
    }

    pub fn n_years(&self) -> usize {
        self.n_years
    }

    pub fn n_categories(&self) -> usize {
        self.n_categories
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, customer: usize, year: usize) -> &[f64] {
        let start = (customer * self.n_years + year) * self.n_categories;
        &self.data[start..start + self.n_categories]
    }

    pub fn row_mut(&mut self, customer: usize, year: usize) -> &mut [f64] {
        let start = (customer * self.n_years + year) * self.n_categories;
        &mut self.data[start..start + self.n_categories]
    }

    /// All years of one customer, `T * m` values.
    pub fn sequence(&self, customer: usize) -> &[f64] {
        let len = self.n_years * self.n_categories;
        &self.data[customer * len..(customer + 1) * len]
    }

    /// Row-per-customer-year view in customer-major, year-minor order.
    pub fn flatten(&self) -> FlatTable {
        FlatTable {
            rows: self.data.clone(),
            n_cols: self.n_categories,
            n_years: self.n_years,
        }
    }
}

/// The `[n*T, m]` view. Row `k` is customer `k / T`, year `k % T`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatTable {
    rows: Vec<f64>,
    n_cols: usize,
    n_years: usize,
}

impl FlatTable {
    pub fn n_rows(&self) -> usize {
        self.rows.len() / self.n_cols
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k * self.n_cols..(k + 1) * self.n_cols]
    }

    /// `(customer, year)` of row `k`.
    pub fn row_index(&self, k: usize) -> (usize, usize) {
        (k / self.n_years, k % self.n_years)
    }

    pub fn unflatten(&self) -> SpendTensor {
        SpendTensor {
            n_customers: self.n_rows() / self.n_years,
            n_years: self.n_years,
            n_categories: self.n_cols,
            data: self.rows.clone(),
        }
    }
}

/// Synthetic case-study targets of one customer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub liquidity: f64,
    pub default_rate: f64,
}

/// Per-customer annual spending shares plus optional targets and latent
/// personality. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct SpendingCube {
    customer_ids: Vec<String>,
    spend: SpendTensor,
    /// `n x T` annual incomes.
    income: Vec<f64>,
    targets: Option<Vec<Targets>>,
    truth_personality: Option<Vec<TraitScores>>,
}

impl SpendingCube {
    pub fn new(
        customer_ids: Vec<String>,
        spend: SpendTensor,
        income: Vec<f64>,
        targets: Option<Vec<Targets>>,
        truth_personality: Option<Vec<TraitScores>>,
    ) -> Result<Self> {
        let n = spend.n_customers();
        if customer_ids.len() != n {
            return Err(Error::Schema(format!(
                "{} customer ids for {n} customers",
                customer_ids.len()
            )));
        }
        if spend.n_years() == 0 || spend.n_categories() == 0 {
            return Err(Error::Schema("cube needs at least one year and one category".into()));
        }
        if income.len() != n * spend.n_years() {
            return Err(Error::Schema(format!(
                "income needs {} values, got {}",
                n * spend.n_years(),
                income.len()
            )));
        }
        if let Some(pos) = spend.data().iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            let m = spend.n_categories();
            let t = spend.n_years();
            return Err(Error::Schema(format!(
                "spend value {} at customer {}, year {}, category {} is negative or non-finite",
                spend.data()[pos],
                pos / (t * m),
                (pos / m) % t,
                pos % m
            )));
        }
        if targets.as_ref().is_some_and(|t| t.len() != n) {
            return Err(Error::Schema("targets length differs from customer count".into()));
        }
        if truth_personality.as_ref().is_some_and(|t| t.len() != n) {
            return Err(Error::Schema("truth_personality length differs from customer count".into()));
        }
        Ok(SpendingCube {
            customer_ids,
            spend,
            income,
            targets,
            truth_personality,
        })
    }

    pub fn n_customers(&self) -> usize {
        self.spend.n_customers()
    }

    pub fn n_years(&self) -> usize {
        self.spend.n_years()
    }

    pub fn n_categories(&self) -> usize {
        self.spend.n_categories()
    }

    pub fn customer_ids(&self) -> &[String] {
        &self.customer_ids
    }

    pub fn spend(&self) -> &SpendTensor {
        &self.spend
    }

    pub fn income(&self, customer: usize) -> &[f64] {
        let t = self.n_years();
        &self.income[customer * t..(customer + 1) * t]
    }

    pub fn targets(&self) -> Option<&[Targets]> {
        self.targets.as_deref()
    }

    pub fn truth_personality(&self) -> Option<&[TraitScores]> {
        self.truth_personality.as_deref()
    }

    /// Mean spending row over all years of one customer.
    pub fn mean_row(&self, customer: usize) -> Vec<f64> {
        let m = self.n_categories();
        let t = self.n_years();
        let mut mean = vec![0.0; m];
        for year in 0..t {
            for (acc, v) in mean.iter_mut().zip(self.spend.row(customer, year)) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= t as f64);
        mean
    }

    /// Sub-cube of the given customers, in the given order.
    pub fn select(&self, indices: &[usize]) -> SpendingCube {
        let t = self.n_years();
        let m = self.n_categories();
        let mut data = Vec::with_capacity(indices.len() * t * m);
        let mut income = Vec::with_capacity(indices.len() * t);
        for &i in indices {
            data.extend_from_slice(self.spend.sequence(i));
            income.extend_from_slice(self.income(i));
        }
        SpendingCube {
            customer_ids: indices.iter().map(|&i| self.customer_ids[i].clone()).collect(),
            spend: SpendTensor {
                n_customers: indices.len(),
                n_years: t,
                n_categories: m,
                data,
            },
            income,
            targets: self
                .targets
                .as_ref()
                .map(|ts| indices.iter().map(|&i| ts[i]).collect()),
            truth_personality: self
                .truth_personality
                .as_ref()
                .map(|ps| indices.iter().map(|&i| ps[i]).collect()),
        }
    }
}

/// One classified transaction. `year` is a zero-based year index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub customer: String,
    pub year: usize,
    pub category: String,
    pub amount: f64,
}

/// Sums transactions per customer, year and category and divides by the
/// annual income. Customers are those present in either input, in sorted
/// order; years without data become zero rows.
pub fn aggregate_annual(
    transactions: &[Transaction],
    incomes: &BTreeMap<(String, usize), f64>,
    categories: &[String],
    n_years: usize,
) -> Result<SpendingCube> {
    if n_years == 0 {
        return Err(Error::Ingestion("at least one year is required".into()));
    }
    let cat_index: BTreeMap<&str, usize> = categories
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    for ((customer, year), &income) in incomes {
        if !(income > 0.0 && income.is_finite()) {
            return Err(Error::Ingestion(format!(
                "income {income} for customer '{customer}', year {year} is not strictly positive"
            )));
        }
        if *year >= n_years {
            return Err(Error::Ingestion(format!(
                "income year {year} for customer '{customer}' outside 0..{n_years}"
            )));
        }
    }
    let mut customers: BTreeSet<&str> = incomes.keys().map(|(c, _)| c.as_str()).collect();
    customers.extend(transactions.iter().map(|t| t.customer.as_str()));
    let customer_ids: Vec<String> = customers.iter().map(|c| String::from(*c)).collect();
    let position: BTreeMap<&str, usize> =
        customers.iter().enumerate().map(|(i, c)| (*c, i)).collect();

    let m = categories.len();
    let mut totals = SpendTensor::zeros(customer_ids.len(), n_years, m);
    for tx in transactions {
        let cat = *cat_index
            .get(tx.category.as_str())
            .ok_or_else(|| Error::Ingestion(format!("unknown category '{}'", tx.category)))?;
        if tx.year >= n_years {
            return Err(Error::Ingestion(format!(
                "transaction year {} for customer '{}' outside 0..{n_years}",
                tx.year, tx.customer
            )));
        }
        if !incomes.contains_key(&(tx.customer.clone(), tx.year)) {
            return Err(Error::Ingestion(format!(
                "no income for customer '{}', year {}",
                tx.customer, tx.year
            )));
        }
        let c = position[tx.customer.as_str()];
        totals.row_mut(c, tx.year)[cat] += tx.amount;
    }
    let mut income = vec![0.0; customer_ids.len() * n_years];
    for ((customer, year), &value) in incomes {
        income[position[customer.as_str()] * n_years + year] = value;
    }
    for c in 0..customer_ids.len() {
        for year in 0..n_years {
            let inc = income[c * n_years + year];
            if inc > 0.0 {
                totals.row_mut(c, year).iter_mut().for_each(|v| *v /= inc);
            }
        }
    }
    SpendingCube::new(customer_ids, totals, income, None, None)
}

/// Customer-level split: the first `floor(n * train_fraction)` customers of a
/// seeded shuffle go to training. Both parts keep the original customer order.
pub fn split(cube: &SpendingCube, train_fraction: f64, seed: u64) -> Result<(SpendingCube, SpendingCube)> {
    let n = cube.n_customers();
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Split(format!(
            "train fraction {train_fraction} must lie strictly between 0 and 1"
        )));
    }
    if n < 2 {
        return Err(Error::Split(format!("cannot split {n} customer(s)")));
    }
    // Guard against products like 0.29 * 100 = 28.999999999999996.
    let n_train = (n as f64 * train_fraction + 1e-9) as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::Split(format!(
            "{n} customers with fraction {train_fraction} leaves an empty partition"
        )));
    }
    let (mut train, mut validation) = shuffled_partition(n, n_train, seed);
    train.sort_unstable();
    validation.sort_unstable();
    Ok((cube.select(&train), cube.select(&validation)))
}

/// Seeded permutation of `0..n`, cut after `first` entries.
pub fn shuffled_partition(n: usize, first: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::from_seed(seed));
    let rest = order.split_off(first);
    (order, rest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn cats(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| String::from(*s)).collect()
    }

    fn tx(customer: &str, year: usize, category: &str, amount: f64) -> Transaction {
        Transaction {
            customer: customer.into(),
            year,
            category: category.into(),
            amount,
        }
    }

    #[test]
    fn aggregates_one_customer() {
        let mut incomes = BTreeMap::new();
        incomes.insert((String::from("a"), 0), 100.0);
        let cube = aggregate_annual(
            &[
                tx("a", 0, "groceries", 50.0),
                tx("a", 0, "groceries", 25.0),
                tx("a", 0, "travel", 25.0),
            ],
            &incomes,
            &cats(&["groceries", "travel"]),
            1,
        )
        .unwrap();
        assert_eq!(cube.spend().row(0, 0), &[0.75, 0.25]);
    }

    #[test]
    fn empty_transactions_give_zero_cube() {
        let mut incomes = BTreeMap::new();
        incomes.insert((String::from("a"), 0), 10.0);
        incomes.insert((String::from("a"), 1), 10.0);
        let cube = aggregate_annual(&[], &incomes, &cats(&["x", "y", "z"]), 2).unwrap();
        assert_eq!(
            (cube.n_customers(), cube.n_years(), cube.n_categories()),
            (1, 2, 3)
        );
        assert!(cube.spend().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn aggregation_matches_sum_then_divide_oracle() {
        let mut rng = crate::rng::from_seed(5);
        let names = cats(&["a", "b", "c", "d"]);
        let customers = ["x", "y", "z"];
        let mut incomes = BTreeMap::new();
        for c in customers {
            for y in 0..2 {
                incomes.insert((String::from(c), y), rng.random_range(10.0..1000.0));
            }
        }
        let txs: Vec<Transaction> = (0..200)
            .map(|_| {
                tx(
                    customers[rng.random_range(0..3)],
                    rng.random_range(0..2),
                    &names[rng.random_range(0..4)],
                    rng.random_range(0.0..50.0),
                )
            })
            .collect();
        let cube = aggregate_annual(&txs, &incomes, &names, 2).unwrap();
        for (ci, c) in customers.iter().enumerate() {
            for y in 0..2 {
                for (k, cat) in names.iter().enumerate() {
                    let mut sum = 0.0;
                    for t in &txs {
                        if t.customer == *c && t.year == y && &t.category == cat {
                            sum += t.amount;
                        }
                    }
                    let expected = sum / incomes[&(String::from(*c), y)];
                    assert!((cube.spend().row(ci, y)[k] - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ingestion_errors_name_the_culprit() {
        let mut incomes = BTreeMap::new();
        incomes.insert((String::from("a"), 0), 100.0);
        let err = aggregate_annual(&[tx("a", 0, "cars", 1.0)], &incomes, &cats(&["x", "y"]), 1)
            .unwrap_err();
        assert!(matches!(err, Error::Ingestion(ref m) if m.contains("cars")));
        incomes.insert((String::from("b"), 0), 0.0);
        let err = aggregate_annual(&[], &incomes, &cats(&["x", "y"]), 1).unwrap_err();
        assert!(matches!(err, Error::Ingestion(ref m) if m.contains("'b'") && m.contains("year 0")));
    }

    #[test]
    fn flatten_order_and_row_index() {
        let data: Vec<f64> = (0..12).map(|v| v as f64).collect();
        let tensor = SpendTensor::new(2, 3, 2, data).unwrap();
        let flat = tensor.flatten();
        assert_eq!(flat.n_rows(), 6);
        assert_eq!(flat.row(4), &[8.0, 9.0]);
        assert_eq!(flat.row_index(4), (1, 1));
        assert_eq!(flat.unflatten(), tensor);

        let t46 = SpendTensor::zeros(4, 6, 3).flatten();
        assert_eq!(t46.row_index(13), (2, 1));
    }

    fn cube_of(n: usize) -> SpendingCube {
        let ids = (0..n).map(|i| format!("c{i}")).collect();
        SpendingCube::new(ids, SpendTensor::zeros(n, 2, 2), vec![1.0; 2 * n], None, None).unwrap()
    }

    #[test]
    fn split_sizes_disjoint_and_deterministic() {
        let cube = cube_of(10);
        let (a, b) = split(&cube, 0.8, 9).unwrap();
        assert_eq!((a.n_customers(), b.n_customers()), (8, 2));
        for id in b.customer_ids() {
            assert!(!a.customer_ids().contains(id));
        }
        let (a2, b2) = split(&cube, 0.8, 9).unwrap();
        assert_eq!(a, a2);
        assert_eq!(b, b2);
    }

    #[test]
    fn split_at_paper_scale() {
        let cube = cube_of(26_000);
        let (a, b) = split(&cube, 0.8, 1).unwrap();
        assert_eq!((a.n_customers(), b.n_customers()), (20_800, 5_200));
    }

    #[test]
    fn split_rejects_empty_partitions() {
        assert!(matches!(split(&cube_of(3), 0.2, 0), Err(Error::Split(_))));
        assert!(matches!(split(&cube_of(3), 1.0, 0), Err(Error::Split(_))));
        assert!(matches!(split(&cube_of(1), 0.5, 0), Err(Error::Split(_))));
        assert_eq!(split(&cube_of(100), 0.29, 0).unwrap().0.n_customers(), 29);
    }
}
