//! Tabular datasets: CSV ingestion for the bundled benchmark schemas and
//! generic files, stratified splitting, and per-feature standardization.
//!
//! All features are held as reals. Categorical columns of the named schemas
//! keep their ordinal codes and are only flagged as such for rendering; the
//! explainer splits every feature with thresholds.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard deviations below this are treated as this value.
pub const STD_FLOOR: f64 = 1e-8;

/// Held-out fraction used by the CLI and the HTTP service.
pub const DEFAULT_TEST_FRACTION: f64 = 0.3;
/// Split seed used by the CLI and the HTTP service, so that a test index
/// names the same row in both.
pub const DEFAULT_SPLIT_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    Numeric,
    OrdinalCategorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<String>,
}

impl FeatureMeta {
    pub fn numeric(name: impl Into<String>) -> Self {
        FeatureMeta {
            name: name.into(),
            kind: FeatureKind::Numeric,
            units: None,
        }
    }

    pub fn ordinal(name: impl Into<String>) -> Self {
        FeatureMeta {
            name: name.into(),
            kind: FeatureKind::OrdinalCategorical,
            units: None,
        }
    }

    fn with_units(mut self, units: &str) -> Self {
        self.units = Some(units.to_string());
        self
    }
}

/// Column layout of a CSV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schema {
    Iris,
    Diabetes,
    Heart,
    /// Header row with feature names, label in the last column.
    Generic,
}

impl Schema {
    pub const NAMED: [Schema; 3] = [Schema::Iris, Schema::Diabetes, Schema::Heart];

    pub fn id(self) -> &'static str {
        match self {
            Schema::Iris => "iris",
            Schema::Diabetes => "diabetes",
            Schema::Heart => "heart",
            Schema::Generic => "generic",
        }
    }

    /// File name of the bundled fixture for named schemas.
    pub fn fixture_file(self) -> Option<&'static str> {
        match self {
            Schema::Generic => None,
            s => Some(match s {
                Schema::Iris => "iris.csv",
                Schema::Diabetes => "diabetes.csv",
                _ => "heart.csv",
            }),
        }
    }

    fn features(self) -> Option<Vec<FeatureMeta>> {
        let f = match self {
            Schema::Iris => vec![
                FeatureMeta::numeric("sepal length (cm)").with_units("cm"),
                FeatureMeta::numeric("sepal width (cm)").with_units("cm"),
                FeatureMeta::numeric("petal length (cm)").with_units("cm"),
                FeatureMeta::numeric("petal width (cm)").with_units("cm"),
            ],
            Schema::Diabetes => vec![
                FeatureMeta::numeric("pregnancies"),
                FeatureMeta::numeric("glucose").with_units("mg/dL"),
                FeatureMeta::numeric("blood pressure").with_units("mm Hg"),
                FeatureMeta::numeric("skin thickness").with_units("mm"),
                FeatureMeta::numeric("insulin").with_units("mu U/ml"),
                FeatureMeta::numeric("bmi").with_units("kg/m^2"),
                FeatureMeta::numeric("diabetes pedigree"),
                FeatureMeta::numeric("age").with_units("years"),
            ],
            Schema::Heart => vec![
                FeatureMeta::numeric("age").with_units("years"),
                FeatureMeta::ordinal("sex"),
                FeatureMeta::ordinal("chest pain type"),
                FeatureMeta::numeric("resting blood pressure").with_units("mm Hg"),
                FeatureMeta::numeric("serum cholesterol").with_units("mg/dl"),
                FeatureMeta::ordinal("fasting blood sugar > 120"),
                FeatureMeta::ordinal("resting ecg"),
                FeatureMeta::numeric("max heart rate"),
                FeatureMeta::ordinal("exercise induced angina"),
                FeatureMeta::numeric("st depression"),
                FeatureMeta::ordinal("st slope"),
                FeatureMeta::numeric("major vessels colored"),
                FeatureMeta::ordinal("thal"),
            ],
            Schema::Generic => return None,
        };
        Some(f)
    }

    fn class_names(self) -> Option<Vec<String>> {
        let names: &[&str] = match self {
            Schema::Iris => &["setosa", "versicolor", "virginica"],
            Schema::Diabetes => &["negative", "positive"],
            Schema::Heart => &["no presence", "presence"],
            Schema::Generic => return None,
        };
        Some(names.iter().map(|s| s.to_string()).collect())
    }

    /// Maps a raw label cell to a class index for the named schemas.
    fn parse_label(self, raw: &str) -> Option<usize> {
        match self {
            Schema::Iris => {
                let lower = raw.trim().to_ascii_lowercase();
                let name = lower.strip_prefix("iris-").unwrap_or(&lower);
                match name {
                    "setosa" | "0" => Some(0),
                    "versicolor" | "1" => Some(1),
                    "virginica" | "2" => Some(2),
                    _ => None,
                }
            }
            Schema::Diabetes => match raw.trim() {
                "0" | "tested_negative" => Some(0),
                "1" | "tested_positive" => Some(1),
                _ => None,
            },
            // Cleveland codes 0 (no presence) and 1-4 (presence).
            Schema::Heart => {
                let v: f64 = raw.trim().parse().ok()?;
                match v {
                    0.0 => Some(0),
                    v if (1.0..=4.0).contains(&v) && v.fract() == 0.0 => Some(1),
                    _ => None,
                }
            }
            Schema::Generic => None,
        }
    }
}

impl FromStr for Schema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iris" => Ok(Schema::Iris),
            "diabetes" | "pima" => Ok(Schema::Diabetes),
            "heart" | "cleveland" => Ok(Schema::Heart),
            "generic" => Ok(Schema::Generic),
            _ => Err(Error::UnknownSchema(s.to_string())),
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// A labelled instance matrix. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub features: Vec<FeatureMeta>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    pub class_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, checking the structural invariants.
    pub fn new(
        name: impl Into<String>,
        features: Vec<FeatureMeta>,
        x: Vec<Vec<f64>>,
        y: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        let names: BTreeSet<&str> = features.iter().map(|f| f.name.as_str()).collect();
        if names.len() != features.len() {
            return Err(Error::InvalidArgument("feature names must be unique".into()));
        }
        for row in &x {
            if row.len() != features.len() {
                return Err(Error::ArityMismatch {
                    expected: features.len(),
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("non-finite feature value".into()));
            }
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= class_names.len()) {
            return Err(Error::ClassOutOfRange {
                index: bad,
                n_classes: class_names.len(),
            });
        }
        Ok(Dataset {
            name: name.into(),
            features,
            x,
            y,
            class_names,
        })
    }

    pub fn n_instances(&self) -> usize {
        self.x.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: self.features.clone(),
            x: indices.iter().map(|&i| self.x[i].clone()).collect(),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    pub fn class_index(&self, name_or_index: &str) -> Option<usize> {
        let wanted = name_or_index.trim();
        if let Some(i) = self
            .class_names
            .iter()
            .position(|c| c.eq_ignore_ascii_case(wanted))
        {
            return Some(i);
        }
        wanted.parse::<usize>().ok().filter(|&i| i < self.n_classes())
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &c in &self.y {
            counts[c] += 1;
        }
        counts
    }
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t == "?"
}

/// Loads a CSV file with a header row. Rows with a missing cell (empty or
/// `?`) are dropped.
pub fn load_csv(path: impl AsRef<Path>, schema: Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let name = match schema {
        Schema::Generic => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "generic".to_string()),
        s => s.id().to_string(),
    };
    parse_csv(&bytes, schema, name)
}

/// Loads a named schema's bundled file from `dir`.
pub fn load_fixture(dir: impl AsRef<Path>, schema: Schema) -> Result<Dataset> {
    let file = schema
        .fixture_file()
        .ok_or_else(|| Error::UnknownSchema(schema.id().to_string()))?;
    load_csv(dir.as_ref().join(file), schema)
}

/// Parses CSV content already in memory; see [`load_csv`].
pub fn parse_csv(bytes: &[u8], schema: Schema, name: impl Into<String>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);

    let header = reader
        .headers()
        .map_err(|e| Error::MalformedCsv {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    if header.len() < 2 {
        return Err(Error::MalformedCsv {
            line: 1,
            reason: "need at least one feature column and a label column".into(),
        });
    }

    let features = match schema.features() {
        Some(f) => {
            if header.len() != f.len() + 1 {
                return Err(Error::MalformedCsv {
                    line: 1,
                    reason: format!(
                        "schema '{schema}' expects {} columns, header has {}",
                        f.len() + 1,
                        header.len()
                    ),
                });
            }
            f
        }
        None => header
            .iter()
            .take(header.len() - 1)
            .map(FeatureMeta::numeric)
            .collect(),
    };
    let width = features.len() + 1;

    let mut x = Vec::new();
    let mut raw_labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::MalformedCsv {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() == 1 && record.get(0).is_some_and(|c| c.is_empty()) {
            continue;
        }
        if record.len() != width {
            return Err(Error::MalformedCsv {
                line,
                reason: format!("expected {width} cells, found {}", record.len()),
            });
        }
        if record.iter().any(is_missing) {
            continue;
        }
        let mut row = Vec::with_capacity(features.len());
        for (j, cell) in record.iter().take(features.len()).enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::MalformedCsv {
                line,
                reason: format!("non-numeric value '{cell}' in column '{}'", &header[j]),
            })?;
            if !v.is_finite() {
                return Err(Error::MalformedCsv {
                    line,
                    reason: format!("non-finite value '{cell}' in column '{}'", &header[j]),
                });
            }
            row.push(v);
        }
        x.push(row);
        raw_labels.push((line, record[features.len()].to_string()));
    }
    if x.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let (y, class_names) = match schema.class_names() {
        Some(names) => {
            let y = raw_labels
                .iter()
                .map(|(line, raw)| {
                    schema.parse_label(raw).ok_or_else(|| Error::MalformedCsv {
                        line: *line,
                        reason: format!("unrecognised class label '{raw}'"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            (y, names)
        }
        None => encode_generic_labels(&raw_labels),
    };

    Dataset::new(name, features, x, y, class_names)
}

/// Integer labels are ordered numerically, text labels lexicographically.
fn encode_generic_labels(raw: &[(usize, String)]) -> (Vec<usize>, Vec<String>) {
    let ints: Option<Vec<i64>> = raw.iter().map(|(_, s)| s.parse::<i64>().ok()).collect();
    match ints {
        Some(values) => {
            let distinct: Vec<i64> = values.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
            let y = values
                .iter()
                .map(|v| distinct.binary_search(v).expect("value drawn from set"))
                .collect();
            (y, distinct.iter().map(|v| v.to_string()).collect())
        }
        None => {
            let distinct: Vec<&str> = raw
                .iter()
                .map(|(_, s)| s.as_str())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let y = raw
                .iter()
                .map(|(_, s)| distinct.binary_search(&s.as_str()).expect("value drawn from set"))
                .collect();
            (y, distinct.iter().map(|s| s.to_string()).collect())
        }
    }
}

/// Index partition produced by [`split_indices`]. Both lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified train/test partition. Each class contributes
/// `round(count * test_fraction)` test rows, clamped so that both sides keep
/// at least one instance of every class.
pub fn split_indices(d: &Dataset, test_fraction: f64, seed: u64) -> Result<SplitIndices> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); d.n_classes()];
    for (i, &c) in d.y.iter().enumerate() {
        by_class[c].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut members) in by_class.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::DegenerateSplit {
                class: d.class_names[class].clone(),
                count: members.len(),
            });
        }
        members.shuffle(&mut rng);
        let n = members.len();
        let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

pub fn split(d: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let idx = split_indices(d, test_fraction, seed)?;
    Ok((d.subset(&idx.train), d.subset(&idx.test)))
}

/// Per-feature standardization fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Population mean and standard deviation per column, std floored at
    /// [`STD_FLOOR`].
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyDataset)?;
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
        Ok(Scaler { mean, std })
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn inverse_transform(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }
}

pub fn fit_scaler(train: &Dataset) -> Result<Scaler> {
    Scaler::fit(&train.x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(y: Vec<usize>, n_classes: usize) -> Dataset {
        let x = (0..y.len()).map(|i| vec![i as f64, (i * i) as f64]).collect();
        Dataset::new(
            "toy",
            vec![FeatureMeta::numeric("a"), FeatureMeta::numeric("b")],
            x,
            y,
            (0..n_classes).map(|c| format!("c{c}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn non_numeric_cell_is_malformed() {
        let csv = b"a,b,label\n1.0,2.0,x\n1.5,oops,y\n";
        let err = parse_csv(csv, Schema::Generic, "t").unwrap_err();
        assert!(matches!(err, Error::MalformedCsv { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn bad_arity_is_malformed() {
        let csv = b"a,b,label\n1.0,2.0,x\n1.5,y\n";
        assert!(matches!(
            parse_csv(csv, Schema::Generic, "t"),
            Err(Error::MalformedCsv { .. })
        ));
    }

    #[test]
    fn missing_tokens_drop_rows() {
        let csv = b"a,b,label\n1.0,2.0,x\n?,2.0,y\n1.0,,y\n3.0,4.0,y\n";
        let d = parse_csv(csv, Schema::Generic, "t").unwrap();
        assert_eq!(d.n_instances(), 2);
        assert_eq!(d.class_names, vec!["x", "y"]);
    }

    #[test]
    fn all_rows_missing_is_empty() {
        let csv = b"a,label\n?,x\n";
        assert!(matches!(
            parse_csv(csv, Schema::Generic, "t"),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn integer_labels_sort_numerically() {
        let csv = b"a,label\n1,10\n2,2\n3,10\n";
        let d = parse_csv(csv, Schema::Generic, "t").unwrap();
        assert_eq!(d.class_names, vec!["2", "10"]);
        assert_eq!(d.y, vec![1, 0, 1]);
    }

    #[test]
    fn heart_target_is_binarized() {
        let header = "age,sex,cp,trestbps,chol,fbs,restecg,thalach,exang,oldpeak,slope,ca,thal,num\n";
        let rows = "63,1,1,145,233,1,2,150,0,2.3,3,0,6,0\n67,1,4,160,286,0,2,108,1,1.5,2,3,3,2\n";
        let d = parse_csv(format!("{header}{rows}").as_bytes(), Schema::Heart, "heart").unwrap();
        assert_eq!(d.y, vec![0, 1]);
        assert_eq!(d.class_names, vec!["no presence", "presence"]);
    }

    #[test]
    fn named_schema_checks_column_count() {
        let csv = b"a,b,label\n1,2,setosa\n";
        assert!(matches!(
            parse_csv(csv, Schema::Iris, "iris"),
            Err(Error::MalformedCsv { line: 1, .. })
        ));
    }

    #[test]
    fn unknown_schema() {
        assert!(matches!("wine".parse::<Schema>(), Err(Error::UnknownSchema(_))));
    }

    #[test]
    fn singleton_class_cannot_be_stratified() {
        let d = toy(vec![0, 0, 0, 1], 2);
        assert!(matches!(
            split(&d, 0.3, 1),
            Err(Error::DegenerateSplit { count: 1, .. })
        ));
    }

    #[test]
    fn split_is_deterministic_and_keeps_classes() {
        let d = toy((0..40).map(|i| i % 3).collect(), 3);
        let a = split_indices(&d, 0.3, 9).unwrap();
        let b = split_indices(&d, 0.3, 9).unwrap();
        assert_eq!(a, b);
        let (train, test) = split(&d, 0.3, 9).unwrap();
        assert!(train.class_counts().iter().all(|&c| c > 0));
        assert!(test.class_counts().iter().all(|&c| c > 0));
        assert_eq!(train.n_instances() + test.n_instances(), 40);
    }

    #[test]
    fn constant_feature_scales_to_zero() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![3.0, i as f64]).collect();
        let s = Scaler::fit(&rows).unwrap();
        for r in &rows {
            assert_eq!(s.transform(r)[0], 0.0);
        }
    }

    #[test]
    fn mean_vector_maps_to_origin() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64 + 1.0]).collect();
        let s = Scaler::fit(&rows).unwrap();
        let z = s.transform(&s.mean);
        assert!(z.iter().all(|v| v.abs() < 1e-12));
    }
}
