//! Datasets, CSV ingestion, standardization and resampling indices.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::median;
use crate::{BoostError, Result};

/// Identifier of the generator behind every seeded draw in this crate.
pub const RNG_ALGORITHM: &str = "chacha8";

/// Seed used when the caller does not supply one.
pub const DEFAULT_SEED: u64 = 20140101;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Response {
    Continuous(Vec<f64>),
    /// Labels coded as -1.0 / +1.0.
    Binary(Vec<f64>),
    Survival { time: Vec<f64>, status: Vec<bool> },
}

impl Response {
    pub fn len(&self) -> usize {
        match self {
            Response::Continuous(y) | Response::Binary(y) => y.len(),
            Response::Survival { time, .. } => time.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Response::Continuous(_) => "continuous",
            Response::Binary(_) => "binary",
            Response::Survival { .. } => "survival",
        }
    }

    /// Numeric response for continuous and binary variants.
    pub fn values(&self) -> Option<&[f64]> {
        match self {
            Response::Continuous(y) | Response::Binary(y) => Some(y),
            Response::Survival { .. } => None,
        }
    }

    pub fn subset(&self, rows: &[usize]) -> Response {
        let pick = |v: &[f64]| rows.iter().map(|&i| v[i]).collect::<Vec<_>>();
        match self {
            Response::Continuous(y) => Response::Continuous(pick(y)),
            Response::Binary(y) => Response::Binary(pick(y)),
            Response::Survival { time, status } => Response::Survival {
                time: pick(time),
                status: rows.iter().map(|&i| status[i]).collect(),
            },
        }
    }
}

/// Records how source labels of a binary column were recoded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    pub negative: String,
    pub positive: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    names: Vec<String>,
    response: Response,
    unpenalized: BTreeSet<usize>,
    label_map: Option<LabelMap>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, names: Vec<String>, response: Response) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 || p == 0 {
            return Err(BoostError::InvalidDataset(format!("need n >= 1 and p >= 1, got {n}x{p}")));
        }
        if names.len() != p {
            return Err(BoostError::Dimension(format!("{} names for {p} columns", names.len())));
        }
        if response.len() != n {
            return Err(BoostError::Dimension(format!("response length {} for {n} rows", response.len())));
        }
        if let Some((idx, _)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(BoostError::InvalidDataset(format!(
                "non-finite predictor in row {}, column '{}'",
                idx % n + 1,
                names[idx / n]
            )));
        }
        validate_response(&response)?;
        Ok(Dataset { x, names, response, unpenalized: BTreeSet::new(), label_map: None })
    }

    /// Convenience constructor from predictor columns.
    pub fn from_columns(columns: &[Vec<f64>], response: Response) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(BoostError::Dimension("columns of unequal length".into()));
        }
        let flat: Vec<f64> = columns.iter().flatten().copied().collect();
        let x = DMatrix::from_column_slice(n, columns.len(), &flat);
        let names = (1..=columns.len()).map(|j| format!("x{j}")).collect();
        Dataset::new(x, names, response)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(BoostError::Dimension(format!("{} names for {} columns", names.len(), self.p())));
        }
        self.names = names;
        Ok(self)
    }

    pub fn with_unpenalized(mut self, unpenalized: BTreeSet<usize>) -> Result<Self> {
        if let Some(&j) = unpenalized.iter().find(|&&j| j >= self.p()) {
            return Err(BoostError::InvalidArgument(format!("unpenalized index {j} out of range")));
        }
        self.unpenalized = unpenalized;
        Ok(self)
    }

    /// Marks columns as unpenalized by name.
    pub fn with_unpenalized_names(self, names: &[String]) -> Result<Self> {
        let set = names
            .iter()
            .map(|name| self.column_index(name).ok_or_else(|| BoostError::MissingColumn(name.clone())))
            .collect::<Result<BTreeSet<_>>>()?;
        self.with_unpenalized(set)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn predictors(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.x.as_slice()[j * n..(j + 1) * n]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn response(&self) -> &Response {
        &self.response
    }

    pub fn unpenalized(&self) -> &BTreeSet<usize> {
        &self.unpenalized
    }

    pub fn label_map(&self) -> Option<&LabelMap> {
        self.label_map.as_ref()
    }

    /// Rows in the given order; duplicates are allowed (bootstrap samples).
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let x = self.x.select_rows(rows);
        Dataset {
            x,
            names: self.names.clone(),
            response: self.response.subset(rows),
            unpenalized: self.unpenalized.clone(),
            label_map: self.label_map.clone(),
        }
    }
}

fn validate_response(response: &Response) -> Result<()> {
    match response {
        Response::Continuous(y) => {
            if let Some(i) = y.iter().position(|v| !v.is_finite()) {
                return Err(BoostError::InvalidDataset(format!("non-finite response in row {}", i + 1)));
            }
        }
        Response::Binary(y) => {
            if let Some(i) = y.iter().position(|&v| v != 1.0 && v != -1.0) {
                return Err(BoostError::InvalidDataset(format!(
                    "binary response must be coded -1/+1 (row {}: {})",
                    i + 1,
                    y[i]
                )));
            }
        }
        Response::Survival { time, status } => {
            if time.len() != status.len() {
                return Err(BoostError::Dimension("time and status lengths differ".into()));
            }
            if let Some(i) = time.iter().position(|&t| !(t > 0.0 && t.is_finite())) {
                return Err(BoostError::NonPositiveTime { row: i + 1, value: time[i] });
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponseSpec {
    Continuous(String),
    /// Any two distinct labels; the lexicographically larger one becomes +1.
    Binary(String),
    Survival { time: String, status: String },
}

impl ResponseSpec {
    fn columns(&self) -> Vec<&str> {
        match self {
            ResponseSpec::Continuous(c) | ResponseSpec::Binary(c) => vec![c.as_str()],
            ResponseSpec::Survival { time, status } => vec![time.as_str(), status.as_str()],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingPolicy {
    #[default]
    Reject,
    /// Per-column median of the observed values.
    Median,
}

impl FromStr for MissingPolicy {
    type Err = BoostError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reject" => Ok(MissingPolicy::Reject),
            "median" => Ok(MissingPolicy::Median),
            other => Err(BoostError::InvalidArgument(format!("unknown missing policy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    pub missing: MissingPolicy,
    /// Restrict predictors to these columns (in this order). `None` uses every
    /// non-response column in file order.
    pub predictors: Option<Vec<String>>,
}

struct RawTable {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Result<RawTable> {
    let file = std::fs::File::open(path)
        .map_err(|source| BoostError::Io { path: path.display().to_string(), source })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers()?.iter().map(str::to_string).collect::<Vec<_>>();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok(RawTable { headers, rows })
}

impl RawTable {
    fn index_of(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| BoostError::MissingColumn(name.to_string()))
    }

    /// Parses one column; `None` entries are empty cells. Rows are 1-based in errors.
    fn numeric_column(&self, col: usize) -> Result<Vec<Option<f64>>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let cell = row.get(col).map(String::as_str).unwrap_or("");
                if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
                    return Ok(None);
                }
                cell.parse::<f64>().map(Some).map_err(|_| BoostError::ParseCell {
                    row: r + 1,
                    column: self.headers[col].clone(),
                    value: cell.to_string(),
                })
            })
            .collect()
    }

    fn complete_column(&self, col: usize) -> Result<Vec<f64>> {
        self.numeric_column(col)?
            .into_iter()
            .enumerate()
            .map(|(r, v)| v.ok_or_else(|| BoostError::MissingCell { row: r + 1, column: self.headers[col].clone() }))
            .collect()
    }

    fn predictor_matrix(&self, columns: &[usize], policy: MissingPolicy) -> Result<DMatrix<f64>> {
        let n = self.rows.len();
        let mut flat = Vec::with_capacity(n * columns.len());
        for &c in columns {
            let raw = self.numeric_column(c)?;
            match policy {
                MissingPolicy::Reject => {
                    for (r, v) in raw.iter().enumerate() {
                        flat.push(v.ok_or_else(|| BoostError::MissingCell {
                            row: r + 1,
                            column: self.headers[c].clone(),
                        })?);
                    }
                }
                MissingPolicy::Median => {
                    let observed: Vec<f64> = raw.iter().flatten().copied().collect();
                    if observed.is_empty() {
                        return Err(BoostError::InvalidDataset(format!(
                            "column '{}' has no observed values",
                            self.headers[c]
                        )));
                    }
                    let fill = median(&observed);
                    flat.extend(raw.iter().map(|v| v.unwrap_or(fill)));
                }
            }
        }
        Ok(DMatrix::from_column_slice(n, columns.len(), &flat))
    }
}

/// Reads a CSV with a header row into a [`Dataset`].
pub fn load_csv(path: impl AsRef<Path>, response: &ResponseSpec, options: &CsvOptions) -> Result<Dataset> {
    let table = read_table(path.as_ref())?;
    if table.rows.is_empty() {
        return Err(BoostError::InvalidDataset("no data rows".into()));
    }
    let response_cols = response
        .columns()
        .into_iter()
        .map(|c| table.index_of(c))
        .collect::<Result<Vec<_>>>()?;
    let predictor_cols = match &options.predictors {
        Some(names) => names.iter().map(|n| table.index_of(n)).collect::<Result<Vec<_>>>()?,
        None => (0..table.headers.len()).filter(|c| !response_cols.contains(c)).collect(),
    };
    if predictor_cols.is_empty() {
        return Err(BoostError::InvalidDataset("no predictor columns".into()));
    }
    let x = table.predictor_matrix(&predictor_cols, options.missing)?;
    let names = predictor_cols.iter().map(|&c| table.headers[c].clone()).collect();

    let mut label_map = None;
    let parsed = match response {
        ResponseSpec::Continuous(_) => Response::Continuous(table.complete_column(response_cols[0])?),
        ResponseSpec::Binary(name) => {
            let col = response_cols[0];
            let labels: Vec<&str> = table.rows.iter().map(|r| r.get(col).map_or("", String::as_str)).collect();
            if let Some(r) = labels.iter().position(|l| l.is_empty()) {
                return Err(BoostError::MissingCell { row: r + 1, column: name.clone() });
            }
            let distinct: BTreeSet<&str> = labels.iter().copied().collect();
            if distinct.len() != 2 {
                return Err(BoostError::BinaryLabels { column: name.clone(), found: distinct.len() });
            }
            let negative = *distinct.iter().next().unwrap();
            let positive = *distinct.iter().next_back().unwrap();
            label_map = Some(LabelMap { negative: negative.to_string(), positive: positive.to_string() });
            Response::Binary(labels.iter().map(|&l| if l == positive { 1.0 } else { -1.0 }).collect())
        }
        ResponseSpec::Survival { .. } => {
            let time = table.complete_column(response_cols[0])?;
            let status_raw = table.complete_column(response_cols[1])?;
            let status = status_raw
                .iter()
                .enumerate()
                .map(|(r, &s)| {
                    if s == 0.0 {
                        Ok(false)
                    } else if s == 1.0 {
                        Ok(true)
                    } else {
                        Err(BoostError::BadStatus { row: r + 1, value: s })
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Response::Survival { time, status }
        }
    };
    let mut dataset = Dataset::new(x, names, parsed)?;
    dataset.label_map = label_map;
    Ok(dataset)
}

/// Reads only the named predictor columns, in the given order (used for prediction).
pub fn load_predictors(path: impl AsRef<Path>, names: &[String], missing: MissingPolicy) -> Result<DMatrix<f64>> {
    let table = read_table(path.as_ref())?;
    let cols = names.iter().map(|n| table.index_of(n)).collect::<Result<Vec<_>>>()?;
    table.predictor_matrix(&cols, missing)
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

/// Per-column mean and sample standard deviation (n - 1 denominator).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Scaling {
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.means.len() {
            return Err(BoostError::Dimension(format!(
                "expected {} columns, got {}",
                self.means.len(),
                x.ncols()
            )));
        }
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            for v in col.iter_mut() {
                *v = (*v - self.means[j]) / self.sds[j];
            }
        }
        Ok(out)
    }

    pub fn invert(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = z.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            for v in col.iter_mut() {
                *v = *v * self.sds[j] + self.means[j];
            }
        }
        out
    }
}

pub fn standardize(d: &Dataset) -> Result<(Dataset, Scaling)> {
    let n = d.n();
    if n < 2 {
        return Err(BoostError::InvalidDataset("standardization needs at least two rows".into()));
    }
    let mut means = Vec::with_capacity(d.p());
    let mut sds = Vec::with_capacity(d.p());
    for j in 0..d.p() {
        let col = d.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        if !(sd > 1e-12 * mean.abs().max(1.0)) {
            return Err(BoostError::ConstantColumn(d.names[j].clone()));
        }
        means.push(mean);
        sds.push(sd);
    }
    let scaling = Scaling { means, sds };
    let x = scaling.apply(&d.x)?;
    let out = Dataset { x, ..d.clone() };
    Ok((out, scaling))
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    KFold(usize),
    Bootstrap(usize),
    Subsample { replicates: usize, fraction: f64 },
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeKind::KFold(k) => write!(f, "kfold:{k}"),
            SchemeKind::Bootstrap(b) => write!(f, "bootstrap:{b}"),
            SchemeKind::Subsample { replicates, fraction } => write!(f, "subsample:{replicates}:{fraction}"),
        }
    }
}

impl FromStr for SchemeKind {
    type Err = BoostError;

    /// Parses `kfold:K`, `bootstrap:B` or `subsample:B:FRACTION`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || BoostError::InvalidArgument(format!("cannot parse resampling scheme '{s}'"));
        let parts: Vec<&str> = s.split(':').collect();
        let count = |i: usize| parts.get(i).and_then(|v| v.parse::<usize>().ok()).ok_or_else(bad);
        let kind = match parts[0] {
            "kfold" if parts.len() == 2 => SchemeKind::KFold(count(1)?),
            "bootstrap" if parts.len() == 2 => SchemeKind::Bootstrap(count(1)?),
            "subsample" if parts.len() == 3 => SchemeKind::Subsample {
                replicates: count(1)?,
                fraction: parts[2].parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl SchemeKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SchemeKind::KFold(k) if k < 2 => Err(BoostError::Resampling(format!("K must be >= 2, got {k}"))),
            SchemeKind::Bootstrap(0) | SchemeKind::Subsample { replicates: 0, .. } => {
                Err(BoostError::Resampling("need at least one replicate".into()))
            }
            SchemeKind::Subsample { fraction, .. } if !(fraction > 0.0 && fraction < 1.0) => {
                Err(BoostError::Resampling(format!("fraction must lie in (0, 1), got {fraction}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResamplingScheme {
    pub kind: SchemeKind,
    pub stratified: bool,
    pub seed: u64,
}

/// One resample: training rows (bootstrap rows may repeat) and held-out rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Generates train/test index pairs. Stratification is applied when `strata`
/// is given; strata are arbitrary integer labels of length `n`.
pub fn resample_indices(scheme: &ResamplingScheme, n: usize, strata: Option<&[i64]>) -> Result<Vec<Split>> {
    scheme.kind.validate()?;
    if n == 0 {
        return Err(BoostError::Resampling("no observations".into()));
    }
    let groups: Vec<Vec<usize>> = match strata {
        Some(labels) => {
            if labels.len() != n {
                return Err(BoostError::Resampling(format!("strata length {} != n {n}", labels.len())));
            }
            let mut by_label: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
            for (i, &l) in labels.iter().enumerate() {
                by_label.entry(l).or_default().push(i);
            }
            by_label.into_values().collect()
        }
        None => vec![(0..n).collect()],
    };
    let mut rng = rng_from_seed(scheme.seed);
    let complement = |train: &[usize]| {
        let mut seen = vec![false; n];
        for &i in train {
            seen[i] = true;
        }
        (0..n).filter(|&i| !seen[i]).collect::<Vec<_>>()
    };

    match scheme.kind {
        SchemeKind::KFold(k) => {
            if n < k {
                return Err(BoostError::Resampling(format!("n = {n} is smaller than K = {k}")));
            }
            let mut fold_of = vec![0usize; n];
            let mut counter = 0usize;
            for group in &groups {
                let mut members = group.clone();
                members.shuffle(&mut rng);
                for i in members {
                    fold_of[i] = counter % k;
                    counter += 1;
                }
            }
            Ok((0..k)
                .map(|f| Split {
                    train: (0..n).filter(|&i| fold_of[i] != f).collect(),
                    test: (0..n).filter(|&i| fold_of[i] == f).collect(),
                })
                .collect())
        }
        SchemeKind::Bootstrap(b) => Ok((0..b)
            .map(|_| {
                let mut train = Vec::with_capacity(n);
                for group in &groups {
                    for _ in 0..group.len() {
                        train.push(group[rng.random_range(0..group.len())]);
                    }
                }
                train.sort_unstable();
                let test = complement(&train);
                Split { train, test }
            })
            .collect()),
        SchemeKind::Subsample { replicates, fraction } => {
            let sizes: Vec<usize> = groups
                .iter()
                .map(|g| ((fraction * g.len() as f64).round() as usize).min(g.len()))
                .collect();
            if sizes.contains(&0) {
                return Err(BoostError::Resampling("empty stratum in subsample".into()));
            }
            Ok((0..replicates)
                .map(|_| {
                    let mut train = Vec::new();
                    for (group, &size) in groups.iter().zip(&sizes) {
                        let mut members = group.clone();
                        members.shuffle(&mut rng);
                        train.extend_from_slice(&members[..size]);
                    }
                    train.sort_unstable();
                    let test = complement(&train);
                    Split { train, test }
                })
                .collect())
        }
    }
}
