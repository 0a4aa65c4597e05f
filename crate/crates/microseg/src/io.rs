//! File formats: dataset and record JSONL, coefficient CSV, model JSON, plus
//! atomic writes and checksums.

use std::fs;
use std::io::Write;
use std::path::Path;

use microseg_core::dataset::{SpendTensor, SpendingCube, Targets};
use microseg_core::nn::{InputScaling, LayerSpec, ModelBundle, Topology, TrainMeta};
use microseg_core::personality::{CoefficientTable, TraitScores, Window, TRAITS};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn schema(path: &Path, line: usize, message: impl Into<String>) -> CliError {
    CliError::Schema {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse(path: &Path, line: usize, message: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable value");
    s.push('\n');
    s
}

pub fn from_json<T: DeserializeOwned>(text: &str, path: &Path) -> CliResult<T> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| parse(path, e.line(), e.to_string()))?;
    serde_json::from_value(value).map_err(|e| schema(path, 1, e.to_string()))
}

/// One compact JSON object per line.
pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("serialisable record"));
        out.push('\n');
    }
    out
}

/// Parses JSONL; blank lines are skipped and errors carry 1-based line numbers.
pub fn from_jsonl<T: DeserializeOwned>(text: &str, path: &Path) -> CliResult<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| parse(path, i + 1, e.to_string()))?;
        let record = serde_json::from_value(value).map_err(|e| schema(path, i + 1, e.to_string()))?;
        out.push((i + 1, record));
    }
    Ok(out)
}

// ---------------------------------------------------------------- datasets

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CustomerRecord {
    customer_id: String,
    spend: Vec<Vec<f64>>,
    income: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    targets: Option<Targets>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truth_personality: Option<TraitScores>,
}

pub fn dataset_to_jsonl(cube: &SpendingCube) -> String {
    let spend = cube.spend();
    let records: Vec<CustomerRecord> = (0..cube.n_customers())
        .map(|c| CustomerRecord {
            customer_id: cube.customer_ids()[c].clone(),
            spend: (0..cube.n_years()).map(|t| spend.row(c, t).to_vec()).collect(),
            income: cube.income(c).to_vec(),
            targets: cube.targets().map(|t| t[c]),
            truth_personality: cube.truth_personality().map(|p| p[c]),
        })
        .collect();
    to_jsonl(&records)
}

pub fn dataset_from_jsonl(text: &str, path: &Path) -> CliResult<SpendingCube> {
    let records: Vec<(usize, CustomerRecord)> = from_jsonl(text, path)?;
    let Some((_, first)) = records.first() else {
        return Err(schema(path, 1, "dataset contains no customers"));
    };
    let years = first.spend.len();
    let categories = first.spend.first().map_or(0, Vec::len);
    let has_targets = first.targets.is_some();
    let has_truth = first.truth_personality.is_some();
    let mut ids = Vec::with_capacity(records.len());
    let mut data = Vec::with_capacity(records.len() * years * categories);
    let mut income = Vec::with_capacity(records.len() * years);
    let mut targets = Vec::new();
    let mut truth = Vec::new();
    for (line, r) in records {
        if r.spend.len() != years || r.spend.iter().any(|row| row.len() != categories) {
            return Err(schema(
                path,
                line,
                format!("spend must be {years} x {categories} like the first record"),
            ));
        }
        if r.income.len() != years {
            return Err(schema(path, line, format!("income needs {years} values, got {}", r.income.len())));
        }
        if r.targets.is_some() != has_targets || r.truth_personality.is_some() != has_truth {
            return Err(schema(path, line, "optional fields must be present on every record or none"));
        }
        ids.push(r.customer_id);
        data.extend(r.spend.into_iter().flatten());
        income.extend(r.income);
        targets.extend(r.targets);
        truth.extend(r.truth_personality);
    }
    let n = ids.len();
    let tensor = SpendTensor::new(n, years, categories, data).map_err(|e| schema(path, 1, e.to_string()))?;
    SpendingCube::new(
        ids,
        tensor,
        income,
        has_targets.then_some(targets),
        has_truth.then_some(truth),
    )
    .map_err(|e| schema(path, 1, e.to_string()))
}

pub fn save_dataset(cube: &SpendingCube, path: &Path) -> CliResult<()> {
    write_atomic(path, dataset_to_jsonl(cube).as_bytes())
}

pub fn load_dataset(path: &Path) -> CliResult<SpendingCube> {
    dataset_from_jsonl(&read_text(path)?, path)
}

// ------------------------------------------------------------ coefficients

pub const COEFFICIENT_HEADER: [&str; 6] = [
    "category",
    "openness",
    "conscientiousness",
    "extraversion",
    "agreeableness",
    "neuroticism",
];

pub fn coefficients_to_csv(table: &CoefficientTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COEFFICIENT_HEADER).expect("in-memory write");
    for (name, row) in table.categories().iter().zip(table.rows()) {
        let mut record = vec![name.clone()];
        record.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&record).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Parses the coefficient CSV. Cell range checks are left to
/// [`CoefficientTable::new`], whose error names the offending cell.
pub fn coefficients_from_csv(text: &str, path: &Path) -> CliResult<CoefficientTable> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| parse(path, 1, e.to_string()))?;
    if header.iter().ne(COEFFICIENT_HEADER) {
        return Err(schema(
            path,
            1,
            format!("header must be {}", COEFFICIENT_HEADER.join(",")),
        ));
    }
    let mut names = Vec::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != COEFFICIENT_HEADER.len() {
            return Err(schema(path, line, format!("expected 6 fields, got {}", record.len())));
        }
        let mut row = [0.0; 5];
        for (k, t) in TRAITS.iter().enumerate() {
            let cell = &record[k + 1];
            row[k] = cell
                .parse()
                .map_err(|_| parse(path, line, format!("{} value {cell:?} is not a number", t.name())))?;
        }
        names.push(record[0].to_string());
        rows.push(row);
    }
    CoefficientTable::new(names, &rows).map_err(CliError::from)
}

pub fn load_coefficients(path: &Path) -> CliResult<CoefficientTable> {
    coefficients_from_csv(&read_text(path)?, path)
}

// ------------------------------------------------------------------ models

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    topology: Topology,
    layers: Vec<LayerSpec>,
    weights: Vec<f64>,
    trainable_mask: Vec<bool>,
    seed: u64,
    train_meta: TrainMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input_scaling: Option<InputScaling>,
    /// SHA-256 of the weights as little-endian bytes.
    checksum: String,
}

pub fn weights_checksum(weights: &[f64]) -> String {
    let bytes: Vec<u8> = weights.iter().flat_map(|w| w.to_le_bytes()).collect();
    sha256_hex(&bytes)
}

pub fn model_to_json(model: &ModelBundle) -> String {
    to_json(&ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        topology: model.topology(),
        layers: model.layers().to_vec(),
        weights: model.weights.clone(),
        trainable_mask: model.trainable_mask.clone(),
        seed: model.seed,
        train_meta: model.train_meta.clone(),
        input_scaling: model.input_scaling().cloned(),
        checksum: weights_checksum(&model.weights),
    })
}

pub fn model_from_json(text: &str, path: &Path) -> CliResult<ModelBundle> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| parse(path, e.line(), e.to_string()))?;
    match value.get("format_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(MODEL_FORMAT_VERSION) => {}
        Some(v) => return Err(schema(path, 1, format!("unsupported format_version {v}"))),
        None => return Err(schema(path, 1, "missing format_version")),
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| schema(path, 1, e.to_string()))?;
    if weights_checksum(&file.weights) != file.checksum {
        return Err(schema(path, 1, "weight checksum mismatch"));
    }
    let mut model = ModelBundle::from_parts(
        file.topology,
        file.layers,
        file.weights,
        file.trainable_mask,
        file.seed,
        file.train_meta,
    )
    .map_err(|e| schema(path, 1, e.to_string()))?;
    model
        .set_input_scaling(file.input_scaling)
        .map_err(|e| schema(path, 1, e.to_string()))?;
    Ok(model)
}

pub fn save_model(model: &ModelBundle, path: &Path) -> CliResult<()> {
    write_atomic(path, model_to_json(model).as_bytes())
}

pub fn load_model(path: &Path) -> CliResult<ModelBundle> {
    model_from_json(&read_text(path)?, path)
}

// ----------------------------------------------------------------- records

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonalityRecord {
    pub customer_id: String,
    pub window: Window,
    pub traits: TraitScores,
    pub dominance: [usize; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub customer_id: String,
    /// `T x h`.
    pub states: Vec<Vec<f64>>,
    pub personality: TraitScores,
    pub dominance: [usize; 5],
}

pub fn load_trajectories(path: &Path) -> CliResult<Vec<TrajectoryRecord>> {
    let records: Vec<(usize, TrajectoryRecord)> = from_jsonl(&read_text(path)?, path)?;
    let Some((_, first)) = records.first() else {
        return Err(schema(path, 1, "no trajectories"));
    };
    let (t, h) = (first.states.len(), first.states.first().map_or(0, Vec::len));
    for (line, r) in &records {
        if r.states.len() != t || r.states.iter().any(|p| p.len() != h) {
            return Err(schema(path, *line, format!("states must be {t} x {h} like the first record")));
        }
    }
    Ok(records.into_iter().map(|(_, r)| r).collect())
}
