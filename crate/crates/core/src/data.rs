//! Right-censored samples: records, covariate metadata, CSV ingestion,
//! normalization and resampling.
//!
//! Categorical covariates are stored as level codes (`0.0, 1.0, ...`) into
//! the owning [`CovariateSpec`]'s level list. Tree methods split on those
//! codes directly; Cox-family fits work on [`SurvivalDataset::expand_categorical`].

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRecord {
    /// Observed time `min(T, C)`.
    pub time: f64,
    /// `true` when the event was observed, `false` when censored.
    pub event: bool,
    pub covariates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CovariateKind {
    Continuous,
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CovariateSpec {
    pub name: String,
    pub kind: CovariateKind,
}

impl CovariateSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        CovariateSpec {
            name: name.into(),
            kind: CovariateKind::Continuous,
        }
    }

    pub fn categorical(name: impl Into<String>, levels: Vec<String>) -> Self {
        CovariateSpec {
            name: name.into(),
            kind: CovariateKind::Categorical { levels },
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, CovariateKind::Categorical { .. })
    }

    /// Number of levels for categorical covariates, `None` for continuous.
    pub fn n_levels(&self) -> Option<usize> {
        match &self.kind {
            CovariateKind::Continuous => None,
            CovariateKind::Categorical { levels } => Some(levels.len()),
        }
    }
}

/// An immutable collection of right-censored records.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    records: Vec<SurvivalRecord>,
    specs: Vec<CovariateSpec>,
}

/// Column divisors applied by [`normalize_columns`].
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationReport {
    pub names: Vec<String>,
    pub scales: Vec<f64>,
}

impl SurvivalDataset {
    pub fn new(records: Vec<SurvivalRecord>, specs: Vec<CovariateSpec>) -> Result<Self> {
        let mut seen = HashMap::new();
        for spec in &specs {
            if seen.insert(spec.name.as_str(), ()).is_some() {
                return Err(Error::invalid(format!("duplicate covariate name `{}`", spec.name)));
            }
            if let CovariateKind::Categorical { levels } = &spec.kind {
                if levels.is_empty() {
                    return Err(Error::invalid(format!("covariate `{}` has no levels", spec.name)));
                }
                let mut lv = HashMap::new();
                for l in levels {
                    if lv.insert(l.as_str(), ()).is_some() {
                        return Err(Error::invalid(format!(
                            "covariate `{}` repeats level `{l}`",
                            spec.name
                        )));
                    }
                }
            }
        }
        for (i, r) in records.iter().enumerate() {
            let row = i + 1;
            if !(r.time.is_finite() && r.time >= 0.0) {
                return Err(Error::Validation {
                    row,
                    message: format!("time {} is not a finite nonnegative number", r.time),
                });
            }
            if r.covariates.len() != specs.len() {
                return Err(Error::Validation {
                    row,
                    message: format!(
                        "{} covariate values, expected {}",
                        r.covariates.len(),
                        specs.len()
                    ),
                });
            }
            for (v, spec) in r.covariates.iter().zip(&specs) {
                if !v.is_finite() {
                    return Err(Error::Validation {
                        row,
                        message: format!("non-finite value for `{}`", spec.name),
                    });
                }
                if let Some(k) = spec.n_levels() {
                    if v.fract() != 0.0 || *v < 0.0 || *v >= k as f64 {
                        return Err(Error::Validation {
                            row,
                            message: format!("`{}`: {v} is not a level code", spec.name),
                        });
                    }
                }
            }
        }
        Ok(SurvivalDataset { records, specs })
    }

    /// Builds an all-continuous dataset from parallel slices.
    pub fn from_columns(
        times: &[f64],
        events: &[bool],
        columns: &[Vec<f64>],
        names: &[&str],
    ) -> Result<Self> {
        if times.len() != events.len() || columns.iter().any(|c| c.len() != times.len()) {
            return Err(Error::invalid("column lengths differ"));
        }
        if columns.len() != names.len() {
            return Err(Error::invalid("one name per column required"));
        }
        let records = (0..times.len())
            .map(|i| SurvivalRecord {
                time: times[i],
                event: events[i],
                covariates: columns.iter().map(|c| c[i]).collect(),
            })
            .collect();
        let specs = names.iter().map(|n| CovariateSpec::continuous(*n)).collect();
        SurvivalDataset::new(records, specs)
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn p(&self) -> usize {
        self.specs.len()
    }

    pub fn records(&self) -> &[SurvivalRecord] {
        &self.records
    }

    pub fn specs(&self) -> &[CovariateSpec] {
        &self.specs
    }

    pub fn names(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.name.clone()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    pub fn events(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.event).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.covariates[j]).collect()
    }

    pub fn n_events(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    pub fn has_categorical(&self) -> bool {
        self.specs.iter().any(CovariateSpec::is_categorical)
    }

    /// Rows in the given order; indices may repeat.
    pub fn subset_rows(&self, rows: &[usize]) -> SurvivalDataset {
        SurvivalDataset {
            records: rows.iter().map(|&i| self.records[i].clone()).collect(),
            specs: self.specs.clone(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> SurvivalDataset {
        SurvivalDataset {
            records: self
                .records
                .iter()
                .map(|r| SurvivalRecord {
                    time: r.time,
                    event: r.event,
                    covariates: cols.iter().map(|&j| r.covariates[j]).collect(),
                })
                .collect(),
            specs: cols.iter().map(|&j| self.specs[j].clone()).collect(),
        }
    }

    /// One-hot expansion with the first level as reference: a categorical
    /// covariate with levels `[a, b, c]` becomes indicators `x=b`, `x=c`.
    /// Continuous columns pass through unchanged.
    pub fn expand_categorical(&self) -> SurvivalDataset {
        if !self.has_categorical() {
            return self.clone();
        }
        let mut specs = Vec::new();
        for spec in &self.specs {
            match &spec.kind {
                CovariateKind::Continuous => specs.push(spec.clone()),
                CovariateKind::Categorical { levels } => {
                    for l in levels.iter().skip(1) {
                        specs.push(CovariateSpec::continuous(format!("{}={}", spec.name, l)));
                    }
                }
            }
        }
        let records = self
            .records
            .iter()
            .map(|r| {
                let mut z = Vec::with_capacity(specs.len());
                for (v, spec) in r.covariates.iter().zip(&self.specs) {
                    match spec.n_levels() {
                        None => z.push(*v),
                        Some(k) => {
                            let code = *v as usize;
                            z.extend((1..k).map(|l| if l == code { 1.0 } else { 0.0 }));
                        }
                    }
                }
                SurvivalRecord {
                    time: r.time,
                    event: r.event,
                    covariates: z,
                }
            })
            .collect();
        SurvivalDataset { records, specs }
    }

    /// Euclidean norm of each covariate column.
    pub fn column_norms(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.p()];
        for r in &self.records {
            for (a, v) in acc.iter_mut().zip(&r.covariates) {
                *a += v * v;
            }
        }
        acc.into_iter().map(f64::sqrt).collect()
    }

    pub fn to_csv_writer<W: Write>(&self, w: W, time_col: &str, event_col: &str) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec![time_col.to_string(), event_col.to_string()];
        header.extend(self.names());
        wtr.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![format!("{}", r.time), if r.event { "1" } else { "0" }.to_string()];
            for (v, spec) in r.covariates.iter().zip(&self.specs) {
                match &spec.kind {
                    CovariateKind::Continuous => row.push(format!("{v}")),
                    CovariateKind::Categorical { levels } => {
                        row.push(levels[*v as usize].clone())
                    }
                }
            }
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, time_col: &str, event_col: &str) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.to_csv_writer(file, time_col, event_col)
    }
}

pub fn load_csv(path: impl AsRef<Path>, time_col: &str, event_col: &str) -> Result<SurvivalDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, time_col, event_col)
}

/// Parses CSV text: numeric columns become continuous covariates, any
/// column with a non-numeric cell becomes categorical with levels in
/// first-appearance order. Empty cells are rejected.
pub fn read_csv<R: Read>(reader: R, time_col: &str, event_col: &str) -> Result<SurvivalDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let t_idx = header
        .iter()
        .position(|h| h == time_col)
        .ok_or_else(|| Error::MissingColumn(time_col.to_string()))?;
    let e_idx = header
        .iter()
        .position(|h| h == event_col)
        .ok_or_else(|| Error::MissingColumn(event_col.to_string()))?;
    let cov_cols: Vec<usize> = (0..header.len()).filter(|&c| c != t_idx && c != e_idx).collect();

    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for rec in rdr.records() {
        rows.push(rec?);
    }

    let mut times = Vec::with_capacity(rows.len());
    let mut events = Vec::with_capacity(rows.len());
    for (i, rec) in rows.iter().enumerate() {
        let row = i + 1;
        let cell = |c: usize| rec.get(c).map(str::trim).unwrap_or("");
        let t = cell(t_idx);
        let time: f64 = t.parse().map_err(|_| Error::Validation {
            row,
            message: format!("time `{t}` is not numeric"),
        })?;
        if !time.is_finite() || time < 0.0 {
            return Err(Error::Validation {
                row,
                message: format!("time `{t}` must be finite and nonnegative"),
            });
        }
        let event = match cell(e_idx) {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Validation {
                    row,
                    message: format!("event `{other}` is not 0 or 1"),
                })
            }
        };
        for &c in &cov_cols {
            if cell(c).is_empty() {
                return Err(Error::Validation {
                    row,
                    message: format!("missing value for `{}`", header[c]),
                });
            }
        }
        times.push(time);
        events.push(event);
    }

    let mut specs = Vec::with_capacity(cov_cols.len());
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(cov_cols.len());
    for &c in &cov_cols {
        let cells: Vec<&str> = rows.iter().map(|r| r.get(c).unwrap_or("").trim()).collect();
        let numeric: Option<Vec<f64>> = cells
            .iter()
            .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        match numeric {
            Some(values) => {
                specs.push(CovariateSpec::continuous(header[c].clone()));
                columns.push(values);
            }
            None => {
                let mut levels: Vec<String> = Vec::new();
                let mut lookup: HashMap<&str, usize> = HashMap::new();
                let codes = cells
                    .iter()
                    .map(|s| {
                        let next = lookup.len();
                        let code = *lookup.entry(s).or_insert(next);
                        if code == levels.len() {
                            levels.push(s.to_string());
                        }
                        code as f64
                    })
                    .collect();
                specs.push(CovariateSpec::categorical(header[c].clone(), levels));
                columns.push(codes);
            }
        }
    }

    let records = (0..rows.len())
        .map(|i| SurvivalRecord {
            time: times[i],
            event: events[i],
            covariates: columns.iter().map(|col| col[i]).collect(),
        })
        .collect();
    SurvivalDataset::new(records, specs)
}

/// Expands categorical covariates and scales every column to unit
/// Euclidean norm.
pub fn normalize_columns(ds: &SurvivalDataset) -> Result<(SurvivalDataset, NormalizationReport)> {
    let expanded = ds.expand_categorical();
    let norms = expanded.column_norms();
    if let Some(j) = norms.iter().position(|&s| s == 0.0) {
        return Err(Error::DegenerateColumn(expanded.specs[j].name.clone()));
    }
    let records = expanded
        .records
        .iter()
        .map(|r| SurvivalRecord {
            time: r.time,
            event: r.event,
            covariates: r.covariates.iter().zip(&norms).map(|(v, s)| v / s).collect(),
        })
        .collect();
    let report = NormalizationReport {
        names: expanded.names(),
        scales: norms,
    };
    Ok((
        SurvivalDataset {
            records,
            specs: expanded.specs,
        },
        report,
    ))
}

/// `n` draws with replacement from `0..n`.
pub fn bootstrap_indices(n: usize, rng: &mut Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Marks which of `0..n` appear at least once in `draws`.
pub fn in_bag_flags(n: usize, draws: &[usize]) -> Vec<bool> {
    let mut flags = vec![false; n];
    for &i in draws {
        flags[i] = true;
    }
    flags
}

/// A bootstrap resample of `ds` and the in-bag flags of the original rows.
pub fn bootstrap_sample(ds: &SurvivalDataset, seed: u64) -> Result<(SurvivalDataset, Vec<bool>)> {
    if ds.n() == 0 {
        return Err(Error::invalid("cannot resample an empty dataset"));
    }
    let mut rng = rng::rng_from_seed(seed);
    let draws = bootstrap_indices(ds.n(), &mut rng);
    let flags = in_bag_flags(ds.n(), &draws);
    Ok((ds.subset_rows(&draws), flags))
}

/// Random partition into a training set of `round(n·(1−f))` rows and a test
/// set with the rest. Both keep the original relative row order.
pub fn train_test_split(
    ds: &SurvivalDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(SurvivalDataset, SurvivalDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!("test fraction {test_fraction} not in (0, 1)")));
    }
    let n = ds.n();
    let n_train = (n as f64 * (1.0 - test_fraction)).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::DegenerateSplit(format!(
            "{n} rows at test fraction {test_fraction} leave an empty side"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::rng_from_seed(seed));
    let mut train_idx = idx[..n_train].to_vec();
    let mut test_idx = idx[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let train = ds.subset_rows(&train_idx);
    if train.n_events() == 0 {
        return Err(Error::DegenerateSplit("training set has no events".into()));
    }
    Ok((train, ds.subset_rows(&test_idx)))
}
