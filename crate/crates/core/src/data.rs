//! Datasets, covariate subsets, and CSV ingestion.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Treatment regime of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `A` takes values in {0, 1}.
    Binary,
    /// `A` is a real exposure.
    Continuous,
}

/// A subset `s` of covariate positions, stored as sorted distinct 1-based
/// indices together with the total covariate count `p`.
///
/// The complement `X_{-s}` (everything outside the subset) is what the
/// subset-CATE conditions on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CovariateSubset {
    indices: Vec<usize>,
    p: usize,
}

impl CovariateSubset {
    /// Builds a subset from 1-based indices; they need not be sorted but must
    /// be distinct and lie in `1..=p`.
    pub fn new(indices: &[usize], p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidConfig("covariate count p must be at least 1".into()));
        }
        let mut seen = BTreeSet::new();
        for &idx in indices {
            if idx == 0 || idx > p {
                return Err(Error::InvalidConfig(format!(
                    "covariate index {idx} out of range 1..={p}"
                )));
            }
            if !seen.insert(idx) {
                return Err(Error::InvalidConfig(format!("duplicate covariate index {idx}")));
            }
        }
        Ok(Self { indices: seen.into_iter().collect(), p })
    }

    /// The full set {1, ..., p}; its subset-CATE is the mean CATE.
    pub fn full(p: usize) -> Self {
        Self { indices: (1..=p).collect(), p }
    }

    /// The empty set; its subset-CATE is the CATE itself.
    pub fn empty(p: usize) -> Self {
        Self { indices: Vec::new(), p }
    }

    /// Sorted 1-based member indices.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.indices.len() == self.p
    }

    /// The complementary subset over the same `p` covariates.
    pub fn complement(&self) -> Self {
        let member: BTreeSet<usize> = self.indices.iter().copied().collect();
        Self {
            indices: (1..=self.p).filter(|i| !member.contains(i)).collect(),
            p: self.p,
        }
    }

    /// 0-based positions of the columns *kept* when this subset is dropped.
    pub(crate) fn kept_columns(&self) -> Vec<usize> {
        let member: BTreeSet<usize> = self.indices.iter().copied().collect();
        (1..=self.p).filter(|i| !member.contains(i)).map(|i| i - 1).collect()
    }
}

impl fmt::Display for CovariateSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (pos, idx) in self.indices.iter().enumerate() {
            if pos > 0 {
                write!(f, ",")?;
            }
            write!(f, "{idx}")?;
        }
        write!(f, "}}")
    }
}

/// Returns the covariate matrix with the subset's columns removed, preserving
/// the original order of the remaining columns. Dropping the empty subset is
/// the identity; dropping the full set leaves an `n x 0` matrix.
pub fn drop_columns<F: Scalar>(covariates: ArrayView2<'_, F>, subset: &CovariateSubset) -> Array2<F> {
    let kept = subset.kept_columns();
    let n = covariates.nrows();
    let mut out = Array2::zeros((n, kept.len()));
    for (dst, &src) in kept.iter().enumerate() {
        out.column_mut(dst).assign(&covariates.column(src));
    }
    out
}

/// An in-memory analysis dataset: outcome `Y`, treatment `A`, covariate
/// matrix `X`, column names, and the treatment regime.
///
/// Construction validates every structural invariant (finiteness, aligned
/// lengths, both arms present in binary mode), so downstream code can assume
/// a well-formed dataset.
#[derive(Debug, Clone)]
pub struct Dataset<F: Scalar> {
    outcome: Vec<F>,
    treatment: Vec<F>,
    covariates: Array2<F>,
    covariate_names: Vec<String>,
    mode: Mode,
}

impl<F: Scalar> Dataset<F> {
    pub fn new(
        outcome: Vec<F>,
        treatment: Vec<F>,
        covariates: Array2<F>,
        covariate_names: Vec<String>,
        mode: Mode,
    ) -> Result<Self> {
        let n = outcome.len();
        if n < 2 {
            return Err(Error::InvalidData(format!("need at least 2 rows, got {n}")));
        }
        if treatment.len() != n || covariates.nrows() != n {
            return Err(Error::InvalidData(format!(
                "misaligned lengths: outcome {n}, treatment {}, covariate rows {}",
                treatment.len(),
                covariates.nrows()
            )));
        }
        let p = covariates.ncols();
        if p == 0 {
            return Err(Error::InvalidData("need at least one covariate column".into()));
        }
        if covariate_names.len() != p {
            return Err(Error::InvalidData(format!(
                "{} covariate names for {p} columns",
                covariate_names.len()
            )));
        }
        {
            let mut names = covariate_names.clone();
            names.sort_unstable();
            names.dedup();
            if names.len() != p {
                return Err(Error::InvalidData("covariate names must be distinct".into()));
            }
        }
        for (i, v) in outcome.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidData(format!("non-finite outcome at row {}", i + 1)));
            }
        }
        for (i, v) in treatment.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidData(format!("non-finite treatment at row {}", i + 1)));
            }
        }
        if covariates.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite covariate value".into()));
        }
        if mode == Mode::Binary {
            let (mut any0, mut any1) = (false, false);
            for (i, &a) in treatment.iter().enumerate() {
                if a == F::zero() {
                    any0 = true;
                } else if a == F::one() {
                    any1 = true;
                } else {
                    return Err(Error::InvalidData(format!(
                        "binary mode requires treatment in {{0,1}}; row {} has {a}",
                        i + 1
                    )));
                }
            }
            if !any0 || !any1 {
                return Err(Error::InvalidData(
                    "binary mode requires both treatment arms to be present".into(),
                ));
            }
        }
        Ok(Self { outcome, treatment, covariates, covariate_names, mode })
    }

    pub fn n(&self) -> usize {
        self.outcome.len()
    }

    pub fn p(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn outcome(&self) -> &[F] {
        &self.outcome
    }

    pub fn treatment(&self) -> &[F] {
        &self.treatment
    }

    pub fn covariates(&self) -> ArrayView2<'_, F> {
        self.covariates.view()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Per-row indicator of membership in the treated arm (binary mode).
    pub fn treated_mask(&self) -> Vec<bool> {
        self.treatment.iter().map(|&a| a == F::one()).collect()
    }

    /// New dataset holding the given rows (in the given order). Used for fold
    /// construction; skips the both-arms re-validation because fold layouts
    /// guarantee it where it matters.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut covariates = Array2::zeros((rows.len(), self.p()));
        for (dst, &src) in rows.iter().enumerate() {
            covariates.row_mut(dst).assign(&self.covariates.row(src));
        }
        Self {
            outcome: rows.iter().map(|&i| self.outcome[i]).collect(),
            treatment: rows.iter().map(|&i| self.treatment[i]).collect(),
            covariates,
            covariate_names: self.covariate_names.clone(),
            mode: self.mode,
        }
    }

    /// Loads a dataset from a headered CSV file (RFC 4180, UTF-8, `.` decimal
    /// point). Every referenced cell must parse as a finite number; missing
    /// values are rejected.
    pub fn from_csv(path: &Path, schema: &CsvSchema) -> Result<Self> {
        schema.validate()?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| Error::Io { path: path.display().to_string(), source: io_of(e) })?;

        let headers = reader
            .headers()
            .map_err(|e| Error::InvalidData(format!("cannot read header: {e}")))?
            .clone();
        let find = |name: &str| -> Result<usize> {
            headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
                context: format!("not in CSV header of {}", path.display()),
            })
        };
        let outcome_idx = find(&schema.outcome)?;
        let treatment_idx = find(&schema.treatment)?;
        let covariate_idx: Vec<usize> =
            schema.covariates.iter().map(|c| find(c)).collect::<Result<_>>()?;

        let mut outcome = Vec::new();
        let mut treatment = Vec::new();
        let mut values: Vec<F> = Vec::new();
        for (row_idx, record) in reader.records().enumerate() {
            let row = row_idx + 1;
            let record = record.map_err(|e| Error::InvalidData(format!("row {row}: {e}")))?;
            let cell = |col: usize, name: &str| -> Result<F> {
                let raw = record.get(col).ok_or_else(|| Error::Parse {
                    row,
                    column: name.to_string(),
                    message: "missing cell".into(),
                })?;
                parse_cell(raw, row, name)
            };
            outcome.push(cell(outcome_idx, &schema.outcome)?);
            treatment.push(cell(treatment_idx, &schema.treatment)?);
            for (j, &col) in covariate_idx.iter().enumerate() {
                values.push(cell(col, &schema.covariates[j])?);
            }
        }

        let n = outcome.len();
        let p = schema.covariates.len();
        let covariates = Array2::from_shape_vec((n, p), values)
            .map_err(|e| Error::InvalidData(format!("bad covariate shape: {e}")))?;
        Self::new(outcome, treatment, covariates, schema.covariates.clone(), schema.mode)
    }

    /// Writes the dataset back out as CSV with columns
    /// `outcome, treatment, <covariates...>`. Floats are printed in shortest
    /// round-trip form, so `from_csv(write_csv(d))` reproduces `d` exactly.
    pub fn write_csv(&self, path: &Path, outcome_name: &str, treatment_name: &str) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)
            .map_err(|e| Error::Io { path: path.display().to_string(), source: io_of(e) })?;
        let mut header = vec![outcome_name.to_string(), treatment_name.to_string()];
        header.extend(self.covariate_names.iter().cloned());
        let write_err =
            |e: csv::Error| Error::Io { path: path.display().to_string(), source: io_of(e) };
        writer.write_record(&header).map_err(write_err)?;
        for i in 0..self.n() {
            let mut record = Vec::with_capacity(2 + self.p());
            record.push(format!("{}", self.outcome[i]));
            record.push(format!("{}", self.treatment[i]));
            for j in 0..self.p() {
                record.push(format!("{}", self.covariates[(i, j)]));
            }
            writer.write_record(&record).map_err(write_err)?;
        }
        writer
            .flush()
            .map_err(|e| Error::Io { path: path.display().to_string(), source: e })
    }

    /// Resolves covariate names to a subset of this dataset's columns.
    pub fn subset_of_names(&self, names: &[String]) -> Result<CovariateSubset> {
        let mut indices = Vec::with_capacity(names.len());
        for name in names {
            let pos = self
                .covariate_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::MissingColumn {
                    column: name.clone(),
                    context: "not a covariate of the loaded dataset".into(),
                })?;
            indices.push(pos + 1);
        }
        CovariateSubset::new(&indices, self.p())
    }
}

pub(crate) fn io_of(e: csv::Error) -> std::io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    }
}

fn parse_cell<F: Scalar>(raw: &str, row: usize, column: &str) -> Result<F> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(Error::Parse {
            row,
            column: column.to_string(),
            message: "missing value".into(),
        });
    }
    let parsed: f64 = trimmed.parse().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("cannot parse `{trimmed}` as a number"),
    })?;
    if !parsed.is_finite() {
        return Err(Error::Parse {
            row,
            column: column.to_string(),
            message: format!("non-finite value `{trimmed}`"),
        });
    }
    Ok(F::from_f64_lossy(parsed))
}

/// Which CSV columns play which role.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    pub outcome: String,
    pub treatment: String,
    pub covariates: Vec<String>,
    pub mode: Mode,
}

impl CsvSchema {
    fn validate(&self) -> Result<()> {
        if self.covariates.is_empty() {
            return Err(Error::InvalidConfig("schema lists no covariates".into()));
        }
        let mut all = vec![self.outcome.clone(), self.treatment.clone()];
        all.extend(self.covariates.iter().cloned());
        let total = all.len();
        all.sort_unstable();
        all.dedup();
        if all.len() != total {
            return Err(Error::InvalidConfig(
                "outcome, treatment, and covariate columns must all be distinct".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn small_binary() -> Dataset<f64> {
        Dataset::new(
            vec![1.0, 2.0, 3.0, 4.0],
            vec![0.0, 1.0, 0.0, 1.0],
            array![[0.1, 1.0], [0.2, 2.0], [0.3, 3.0], [0.4, 4.0]],
            vec!["x1".into(), "x2".into()],
            Mode::Binary,
        )
        .unwrap()
    }

    #[test]
    fn subset_validates_indices() {
        assert!(CovariateSubset::new(&[1, 3], 3).is_ok());
        assert!(CovariateSubset::new(&[0], 3).is_err());
        assert!(CovariateSubset::new(&[4], 3).is_err());
        assert!(CovariateSubset::new(&[2, 2], 3).is_err());
    }

    #[test]
    fn subset_sorts_and_prints() {
        let s = CovariateSubset::new(&[3, 1], 3).unwrap();
        assert_eq!(s.indices(), &[1, 3]);
        assert_eq!(s.to_string(), "{1,3}");
    }

    #[test]
    fn complement_is_an_involution() {
        let s = CovariateSubset::new(&[2], 4).unwrap();
        let c = s.complement();
        assert_eq!(c.indices(), &[1, 3, 4]);
        assert_eq!(c.complement(), s);
        assert!(CovariateSubset::empty(4).complement().is_full());
    }

    #[test]
    fn drop_columns_keeps_order() {
        let x = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let s = CovariateSubset::new(&[2], 3).unwrap();
        let d = drop_columns(x.view(), &s);
        assert_eq!(d, array![[1.0, 3.0], [4.0, 6.0]]);

        let idty = drop_columns(x.view(), &CovariateSubset::empty(3));
        assert_eq!(idty, x);

        let none = drop_columns(x.view(), &CovariateSubset::full(3));
        assert_eq!(none.ncols(), 0);
        assert_eq!(none.nrows(), 2);
    }

    #[test]
    fn dataset_validation_catches_problems() {
        // Treatment out of {0,1} in binary mode.
        let bad = Dataset::new(
            vec![1.0, 2.0],
            vec![0.5, 1.0],
            array![[1.0], [2.0]],
            vec!["x1".into()],
            Mode::Binary,
        );
        assert!(matches!(bad, Err(Error::InvalidData(_))));

        // One arm only.
        let single = Dataset::new(
            vec![1.0, 2.0],
            vec![1.0, 1.0],
            array![[1.0], [2.0]],
            vec!["x1".into()],
            Mode::Binary,
        );
        assert!(single.is_err());

        // Non-finite covariate.
        let nan = Dataset::new(
            vec![1.0, 2.0],
            vec![0.0, 1.0],
            array![[f64::NAN], [2.0]],
            vec!["x1".into()],
            Mode::Binary,
        );
        assert!(nan.is_err());

        // Continuous mode allows arbitrary treatments.
        let cont = Dataset::new(
            vec![1.0, 2.0],
            vec![0.5, -1.3],
            array![[1.0], [2.0]],
            vec!["x1".into()],
            Mode::Continuous,
        );
        assert!(cont.is_ok());
    }

    #[test]
    fn select_rows_reorders() {
        let d = small_binary();
        let sub = d.select_rows(&[2, 0]);
        assert_eq!(sub.n(), 2);
        assert_eq!(sub.outcome(), &[3.0, 1.0]);
        assert_eq!(sub.covariates()[(0, 1)], 3.0);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let d = Dataset::<f64>::new(
            vec![1.5, -2.25, 0.1, 4.0, 5.5, -0.125],
            vec![0.0, 1.0, 1.0, 0.0, 1.0, 0.0],
            array![
                [0.3, -1.0],
                [0.7, 2.0],
                [1.0 / 3.0, 0.0],
                [-0.9, 9.25],
                [0.0, -2.5],
                [2.0, 1.0e-7]
            ],
            vec!["x1".into(), "x2".into()],
            Mode::Binary,
        )
        .unwrap();
        d.write_csv(&path, "y", "a").unwrap();

        let schema = CsvSchema {
            outcome: "y".into(),
            treatment: "a".into(),
            covariates: vec!["x1".into(), "x2".into()],
            mode: Mode::Binary,
        };
        let back = Dataset::<f64>::from_csv(&path, &schema).unwrap();
        assert_eq!(back.n(), 6);
        assert_eq!(back.p(), 2);
        assert_eq!(back.outcome(), d.outcome());
        assert_eq!(back.treatment(), d.treatment());
        assert_eq!(back.covariates(), d.covariates());

        // And a second round trip is byte-identical.
        let path2 = dir.path().join("d2.csv");
        back.write_csv(&path2, "y", "a").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn csv_missing_column_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "y,a,x1\n1.0,0,0.5\n2.0,1,0.25\n").unwrap();
        let schema = CsvSchema {
            outcome: "y".into(),
            treatment: "a".into(),
            covariates: vec!["x1".into(), "x9".into()],
            mode: Mode::Binary,
        };
        match Dataset::<f64>::from_csv(&path, &schema) {
            Err(Error::MissingColumn { column, .. }) => assert_eq!(column, "x9"),
            other => panic!("expected missing-column error, got {other:?}"),
        }
    }

    #[test]
    fn csv_parse_error_names_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "y,a,x1,x2\n1.0,0,0.5,1.0\n2.0,1,0.25,2.0\n3.0,0,0.1,oops\n")
            .unwrap();
        let schema = CsvSchema {
            outcome: "y".into(),
            treatment: "a".into(),
            covariates: vec!["x1".into(), "x2".into()],
            mode: Mode::Binary,
        };
        match Dataset::<f64>::from_csv(&path, &schema) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "x2");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_missing_value_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "y,a,x1\n1.0,0,\n2.0,1,0.25\n").unwrap();
        let schema = CsvSchema {
            outcome: "y".into(),
            treatment: "a".into(),
            covariates: vec!["x1".into()],
            mode: Mode::Binary,
        };
        assert!(matches!(
            Dataset::<f64>::from_csv(&path, &schema),
            Err(Error::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn subset_of_names_resolves_positions() {
        let d = small_binary();
        let s = d.subset_of_names(&["x2".into()]).unwrap();
        assert_eq!(s.indices(), &[2]);
        assert!(d.subset_of_names(&["zz".into()]).is_err());
    }
}
