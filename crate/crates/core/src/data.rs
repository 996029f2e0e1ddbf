//! Column-major numeric datasets with a deterministic train/test split.

use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::expr::total_sum_of_squares;
use crate::rng::Generator;
use crate::scalar::Scalar;

/// Train share used by the built-in synthetic problems.
pub const SYNTHETIC_TRAIN_FRACTION: f64 = 0.5;

/// Names accepted by [`make_synthetic`].
pub const SYNTHETIC_PROBLEMS: [&str; 2] = ["poly2", "trig"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("file has no data rows")]
    Empty,
    #[error("target column `{target}` not found; available columns: {}", available.join(", "))]
    MissingTarget {
        target: String,
        available: Vec<String>,
    },
    #[error("row {row}, column `{column}`: `{value}` is not a finite number")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row} has {found} fields, header has {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("train fraction {0} must lie in (0, 1)")]
    BadFraction(f64),
    #[error("need at least two rows to split, got {0}")]
    TooFewRows(usize),
    #[error("column lengths disagree")]
    ColumnLength,
    #[error("invalid row ranges {train:?} / {test:?} for {rows} rows")]
    BadRanges {
        train: Range<usize>,
        test: Range<usize>,
        rows: usize,
    },
    #[error("training target is constant")]
    ConstantTarget,
    #[error("unknown synthetic problem `{0}` (expected poly2 or trig)")]
    UnknownProblem(String),
}

#[derive(Clone, Debug)]
pub struct Dataset<T> {
    feature_names: Vec<String>,
    columns: Vec<Vec<T>>,
    target_name: String,
    target: Vec<T>,
    train: Range<usize>,
    test: Range<usize>,
    /// Source row index of every stored row.
    row_ids: Vec<usize>,
}

impl<T: Scalar> Dataset<T> {
    pub fn from_columns(
        feature_names: Vec<String>,
        columns: Vec<Vec<T>>,
        target_name: String,
        target: Vec<T>,
        train: Range<usize>,
        test: Range<usize>,
    ) -> Result<Self, DataError> {
        let rows = target.len();
        if feature_names.len() != columns.len() || columns.iter().any(|c| c.len() != rows) {
            return Err(DataError::ColumnLength);
        }
        let overlap = train.start < test.end && test.start < train.end;
        if train.is_empty() || train.end > rows || test.end > rows || (overlap && !test.is_empty())
        {
            return Err(DataError::BadRanges { train, test, rows });
        }
        Ok(Dataset {
            feature_names,
            columns,
            target_name,
            target,
            train,
            test,
            row_ids: (0..rows).collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.target.len()
    }

    pub fn feature_count(&self) -> usize {
        self.columns.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn column(&self, feature: usize) -> &[T] {
        &self.columns[feature]
    }

    pub fn target(&self) -> &[T] {
        &self.target
    }

    pub fn train_range(&self) -> Range<usize> {
        self.train.clone()
    }

    pub fn test_range(&self) -> Range<usize> {
        self.test.clone()
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    /// Original row indices of the training rows.
    pub fn train_row_ids(&self) -> &[usize] {
        &self.row_ids[self.train.clone()]
    }

    pub fn test_row_ids(&self) -> &[usize] {
        &self.row_ids[self.test.clone()]
    }

    /// Shuffles rows with `seed` and splits them into train then test.
    fn split(
        feature_names: Vec<String>,
        columns: Vec<Vec<T>>,
        target_name: String,
        target: Vec<T>,
        train_fraction: f64,
        seed: u64,
    ) -> Result<Self, DataError> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(DataError::BadFraction(train_fraction));
        }
        let rows = target.len();
        if rows < 2 {
            return Err(DataError::TooFewRows(rows));
        }
        let mut order: Vec<usize> = (0..rows).collect();
        order.shuffle(&mut Generator::seed_from_u64(seed));
        let permute = |v: &[T]| order.iter().map(|&r| v[r]).collect::<Vec<T>>();
        let columns: Vec<Vec<T>> = columns.iter().map(|c| permute(c)).collect();
        let target = permute(&target);
        let n_train = ((rows as f64 * train_fraction).round() as usize).clamp(1, rows - 1);
        let mut ds = Dataset::from_columns(
            feature_names,
            columns,
            target_name,
            target,
            0..n_train,
            n_train..rows,
        )?;
        ds.row_ids = order;
        if !(total_sum_of_squares(&ds.target[ds.train.clone()]) > T::zero()) {
            return Err(DataError::ConstantTarget);
        }
        Ok(ds)
    }
}

/// Reads a headered CSV file; every column other than `target` becomes a
/// feature.
pub fn ingest_csv<T: Scalar>(
    path: impl AsRef<Path>,
    target: &str,
    train_fraction: f64,
    shuffle_seed: u64,
) -> Result<Dataset<T>, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, target, train_fraction, shuffle_seed)
}

pub fn read_csv<T: Scalar, R: std::io::Read>(
    reader: R,
    target: &str,
    train_fraction: f64,
    shuffle_seed: u64,
) -> Result<Dataset<T>, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let target_col =
        header
            .iter()
            .position(|h| h == target)
            .ok_or_else(|| DataError::MissingTarget {
                target: target.to_owned(),
                available: header.clone(),
            })?;
    let mut cols: Vec<Vec<T>> = vec![Vec::new(); header.len()];
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        // 1-based data row number, header excluded
        let row = k + 1;
        if record.len() != header.len() {
            return Err(DataError::RaggedRow {
                row,
                found: record.len(),
                expected: header.len(),
            });
        }
        for (j, field) in record.iter().enumerate() {
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => cols[j].push(T::lit(v)),
                _ => {
                    return Err(DataError::NonNumeric {
                        row,
                        column: header[j].clone(),
                        value: field.to_owned(),
                    })
                }
            }
        }
    }
    if cols[target_col].is_empty() {
        return Err(DataError::Empty);
    }
    let target_values = cols.remove(target_col);
    let mut names = header;
    let target_name = names.remove(target_col);
    Dataset::split(
        names,
        cols,
        target_name,
        target_values,
        train_fraction,
        shuffle_seed,
    )
}

/// Built-in noisy problems for experiments without external data.
///
/// * `poly2`: `y = x1^2 + x1*x2`, inputs uniform on [-3, 3].
/// * `trig`: `y = 1.5*sin(0.8*x1) + x2`, inputs uniform on [-3, 3].
///
/// Gaussian noise with a standard deviation of 1% of the clean target's
/// standard deviation is added.
pub fn make_synthetic<T: Scalar>(
    name: &str,
    rows: usize,
    noise_seed: u64,
) -> Result<Dataset<T>, DataError> {
    let f: fn(f64, f64) -> f64 = match name {
        "poly2" => |a, b| a * a + a * b,
        "trig" => |a, b| 1.5 * (0.8 * a).sin() + b,
        other => return Err(DataError::UnknownProblem(other.to_owned())),
    };
    if rows < 2 {
        return Err(DataError::TooFewRows(rows));
    }
    let mut rng = Generator::seed_from_u64(noise_seed);
    let x1: Vec<f64> = (0..rows).map(|_| rng.random_range(-3.0..=3.0)).collect();
    let x2: Vec<f64> = (0..rows).map(|_| rng.random_range(-3.0..=3.0)).collect();
    let clean: Vec<f64> = x1.iter().zip(&x2).map(|(&a, &b)| f(a, b)).collect();
    let sd = (total_sum_of_squares(&clean) / rows as f64).sqrt();
    let noise = Normal::new(0.0, 0.01 * sd).map_err(|_| DataError::ConstantTarget)?;
    let y: Vec<T> = clean
        .iter()
        .map(|&v| T::lit(v + noise.sample(&mut rng)))
        .collect();
    let cast = |v: Vec<f64>| v.into_iter().map(T::lit).collect::<Vec<T>>();
    Dataset::split(
        vec!["x1".into(), "x2".into()],
        vec![cast(x1), cast(x2)],
        "y".into(),
        y,
        SYNTHETIC_TRAIN_FRACTION,
        noise_seed ^ 0x5eed_5eed,
    )
}
