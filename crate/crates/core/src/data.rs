//! Dataset ingestion, train-statistics z-normalization, k-fold plans and
//! support-weighted classification metrics.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Row-major `N × d` feature matrix with integer class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<usize>,
    feature_names: Vec<String>,
    class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        dim: usize,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::validation("datasets need at least one feature"));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::shape(format!(
                "{} feature values for {} rows of width {dim}",
                features.len(),
                labels.len()
            )));
        }
        if feature_names.len() != dim {
            return Err(Error::shape("one feature name per column required"));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("non-finite feature at row {}", i / dim)));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= class_names.len()) {
            return Err(Error::validation(format!(
                "label {y} outside the {} declared classes",
                class_names.len()
            )));
        }
        Ok(Self {
            features,
            dim,
            labels,
            feature_names,
            class_names,
        })
    }

    /// Unnamed features and classes `"0".."C-1"`.
    pub fn from_rows(rows: &[Vec<f64>], labels: &[usize], classes: usize) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::shape("rows have differing lengths"));
        }
        Self::new(
            rows.concat(),
            dim,
            labels.to_vec(),
            (0..dim).map(|i| format!("x{i}")).collect(),
            (0..classes).map(|c| c.to_string()).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.features.iter().skip(j).step_by(self.dim).copied()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            dim: self.dim,
            labels,
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelColumn {
    Last,
    Index(usize),
}

/// How to read a delimited file into a [`Dataset`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub delimiter: u8,
    pub has_header: bool,
    pub label_column: LabelColumn,
    /// Declared class labels in index order; inferred from the data when absent.
    pub classes: Option<Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: true,
            label_column: LabelColumn::Last,
            classes: None,
        }
    }
}

fn sort_labels(labels: BTreeSet<String>) -> Vec<String> {
    let mut out: Vec<String> = labels.into_iter().collect();
    if out.iter().all(|l| l.parse::<i64>().is_ok()) {
        out.sort_by_key(|l| l.parse::<i64>().unwrap());
    }
    out
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(schema.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Option<Vec<String>> = if schema.has_header {
        Some(reader.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };

    let malformed = |row: usize, detail: String| Error::MalformedRow {
        path: path.to_path_buf(),
        row,
        detail,
    };
    let mut width = header.as_ref().map(|h| h.len());
    let mut rows: Vec<(usize, Vec<f64>, String)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(malformed(line, format!("expected {w} fields, found {}", record.len())));
        }
        let label_idx = match schema.label_column {
            LabelColumn::Last => w - 1,
            LabelColumn::Index(i) if i < w => i,
            LabelColumn::Index(i) => return Err(malformed(line, format!("no label column {i}"))),
        };
        let mut values = Vec::with_capacity(w - 1);
        for (j, field) in record.iter().enumerate() {
            if j == label_idx {
                continue;
            }
            let v: f64 = field
                .parse()
                .map_err(|_| malformed(line, format!("column {j}: cannot parse `{field}` as a number")))?;
            if !v.is_finite() {
                return Err(malformed(line, format!("column {j}: non-finite value `{field}`")));
            }
            values.push(v);
        }
        rows.push((line, values, record[label_idx].to_string()));
    }
    if rows.is_empty() {
        return Err(Error::validation(format!("{}: no data rows", path.display())));
    }
    let w = width.unwrap_or(0);
    if w < 2 {
        return Err(Error::validation("need at least one feature column and one label column"));
    }
    let label_idx = match schema.label_column {
        LabelColumn::Last => w - 1,
        LabelColumn::Index(i) => i,
    };
    let feature_names: Vec<String> = match &header {
        Some(h) => h
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != label_idx)
            .map(|(_, n)| n.clone())
            .collect(),
        None => (0..w).filter(|&j| j != label_idx).map(|j| format!("x{j}")).collect(),
    };
    let class_names = match &schema.classes {
        Some(c) => c.clone(),
        None => sort_labels(rows.iter().map(|r| r.2.clone()).collect()),
    };
    let mut features = Vec::with_capacity(rows.len() * (w - 1));
    let mut labels = Vec::with_capacity(rows.len());
    for (line, values, label) in rows {
        let y = class_names
            .iter()
            .position(|c| *c == label)
            .ok_or_else(|| malformed(line, format!("label `{label}` is not a declared class")))?;
        features.extend(values);
        labels.push(y);
    }
    Dataset::new(features, w - 1, labels, feature_names, class_names)
}

/// Feature files of the handwritten-digit Multiple Features set, in the
/// order their columns are concatenated (76 + 216 + 64 + 240 + 47 + 6 = 649).
pub const MFEAT_FILES: [(&str, usize); 6] = [
    ("mfeat-fou", 76),
    ("mfeat-fac", 216),
    ("mfeat-kar", 64),
    ("mfeat-pix", 240),
    ("mfeat-zer", 47),
    ("mfeat-mor", 6),
];

/// Loads the six whitespace-separated `mfeat-*` files from `dir`. Rows are
/// grouped by digit, 200 consecutive rows per class.
pub fn load_mfeat(dir: &Path) -> Result<Dataset> {
    let mut blocks: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut names = Vec::new();
    for (file, width) in MFEAT_FILES {
        let path = dir.join(file);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let row = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::MalformedRow {
                    path: path.clone(),
                    row: i + 1,
                    detail: e.to_string(),
                })?;
            if row.len() != width {
                return Err(Error::MalformedRow {
                    path: path.clone(),
                    row: i + 1,
                    detail: format!("expected {width} values, found {}", row.len()),
                });
            }
            rows.push(row);
        }
        names.extend((0..width).map(|j| format!("{file}.{j}")));
        blocks.push(rows);
    }
    let n = blocks[0].len();
    if n == 0 || !n.is_multiple_of(10) || blocks.iter().any(|b| b.len() != n) {
        return Err(Error::validation(format!(
            "mfeat files must share a row count divisible by 10 (got {:?})",
            blocks.iter().map(|b| b.len()).collect::<Vec<_>>()
        )));
    }
    let per_class = n / 10;
    let mut features = Vec::with_capacity(n * names.len());
    for i in 0..n {
        for block in &blocks {
            features.extend_from_slice(&block[i]);
        }
    }
    let labels = (0..n).map(|i| i / per_class).collect();
    let dim = names.len();
    Dataset::new(features, dim, labels, names, (0..10).map(|c| c.to_string()).collect())
}

/// Per-column shift and scale estimated on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormalizationStats {
    /// Population mean and std per column; zero-variance columns get scale 1.
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::validation("cannot normalize with an empty training split"));
        }
        let n = train.len() as f64;
        let mut mean = Vec::with_capacity(train.dim());
        let mut std = Vec::with_capacity(train.dim());
        for j in 0..train.dim() {
            let m = train.column(j).sum::<f64>() / n;
            let var = train.column(j).map(|v| (v - m).powi(2)).sum::<f64>() / n;
            let s = var.sqrt();
            mean.push(m);
            std.push(if s > 0.0 { s } else { 1.0 });
        }
        Ok(Self { mean, std })
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.dim() != self.mean.len() {
            return Err(Error::shape(format!(
                "stats cover {} columns, data has {}",
                self.mean.len(),
                data.dim()
            )));
        }
        let features = data
            .features
            .chunks_exact(data.dim)
            .flat_map(|r| self.apply_row(r))
            .collect();
        Ok(Dataset {
            features,
            ..data.clone()
        })
    }
}

/// Normalizes `train` and every dataset in `others` with the training statistics.
pub fn znormalize(train: &Dataset, others: &[&Dataset]) -> Result<(Dataset, Vec<Dataset>, NormalizationStats)> {
    let stats = NormalizationStats::fit(train)?;
    let normalized = stats.apply(train)?;
    let rest = others.iter().map(|d| stats.apply(d)).collect::<Result<Vec<_>>>()?;
    Ok((normalized, rest, stats))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub test: Vec<usize>,
    pub validation: Vec<usize>,
    pub train: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub n: usize,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

/// Shuffles `0..n`, cuts it into `k` near-equal test folds (the first `n % k`
/// get one extra index) and splits each fold's remainder 75/25 into train and
/// validation.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::domain(format!("k-fold needs k >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::domain(format!("cannot split {n} samples into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let base = n / k;
    let extra = n % k;
    let mut bounds = Vec::with_capacity(k + 1);
    bounds.push(0);
    for f in 0..k {
        bounds.push(bounds[f] + base + usize::from(f < extra));
    }
    let folds = (0..k)
        .map(|f| {
            let test = order[bounds[f]..bounds[f + 1]].to_vec();
            let rest: Vec<usize> = order[..bounds[f]]
                .iter()
                .chain(&order[bounds[f + 1]..])
                .copied()
                .collect();
            let cut = rest.len() * 3 / 4;
            Fold {
                test,
                train: rest[..cut].to_vec(),
                validation: rest[cut..].to_vec(),
            }
        })
        .collect();
    Ok(FoldPlan { k, n, seed, folds })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Per-class scores weighted by class support.
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub averaging: Averaging,
    /// Classes with no true samples; they contribute nothing to the averages.
    pub zero_support_classes: Vec<usize>,
}

pub fn compute_metrics(predicted: &[usize], truth: &[usize], classes: usize) -> Result<Metrics> {
    if predicted.len() != truth.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::validation("no labels to score"));
    }
    if let Some(&bad) = predicted.iter().chain(truth).find(|&&y| y >= classes) {
        return Err(Error::validation(format!("label {bad} outside [0, {classes})")));
    }
    let n = truth.len() as f64;
    let mut tp = vec![0usize; classes];
    let mut predicted_count = vec![0usize; classes];
    let mut support = vec![0usize; classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        predicted_count[p] += 1;
        support[t] += 1;
        if p == t {
            tp[t] += 1;
        }
    }
    let mut precision = 0.0;
    let mut recall = 0.0;
    let mut f1 = 0.0;
    let mut zero_support_classes = Vec::new();
    for c in 0..classes {
        if support[c] == 0 {
            zero_support_classes.push(c);
            continue;
        }
        let weight = support[c] as f64 / n;
        let p = if predicted_count[c] > 0 {
            tp[c] as f64 / predicted_count[c] as f64
        } else {
            0.0
        };
        let r = tp[c] as f64 / support[c] as f64;
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        precision += weight * p;
        recall += weight * r;
        f1 += weight * f;
    }
    if !zero_support_classes.is_empty() {
        log::warn!("classes {zero_support_classes:?} have no true samples");
    }
    Ok(Metrics {
        accuracy: tp.iter().sum::<usize>() as f64 / n,
        precision,
        recall,
        f1,
        averaging: Averaging::Weighted,
        zero_support_classes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.3}({:.3})", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub accuracy: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    pub averaging: Averaging,
}

impl MetricsSummary {
    pub fn of(metrics: &[Metrics]) -> Self {
        let col = |f: fn(&Metrics) -> f64| MeanStd::of(&metrics.iter().map(f).collect::<Vec<_>>());
        Self {
            accuracy: col(|m| m.accuracy),
            precision: col(|m| m.precision),
            recall: col(|m| m.recall),
            f1: col(|m| m.f1),
            averaging: Averaging::Weighted,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_parsing_and_errors() {
        let f = write_temp("a,b,label\n1,2,yes\n3,4.5,no\n5,6,yes\n");
        let d = load_csv(f.path(), &CsvSchema::default()).unwrap();
        assert_eq!((d.len(), d.dim(), d.class_count()), (3, 2, 2));
        assert_eq!(d.class_names(), ["no", "yes"]);
        assert_eq!(d.labels(), [1, 0, 1]);
        assert_eq!(d.row(1), [3.0, 4.5]);

        let header_only = write_temp("a,b,label\n");
        assert!(matches!(
            load_csv(header_only.path(), &CsvSchema::default()),
            Err(Error::Validation(_))
        ));

        let bad = write_temp("a,b,label\n1,2,0\n3,x,1\n");
        match load_csv(bad.path(), &CsvSchema::default()) {
            Err(Error::MalformedRow { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }

        let schema = CsvSchema {
            classes: Some(vec!["0".into(), "1".into()]),
            ..CsvSchema::default()
        };
        let out_of_range = write_temp("a,label\n1,0\n2,2\n");
        assert!(matches!(
            load_csv(out_of_range.path(), &schema),
            Err(Error::MalformedRow { row: 3, .. })
        ));

        assert!(matches!(
            load_csv(Path::new("/nonexistent/file.csv"), &CsvSchema::default()),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn csv_without_header_and_custom_label_column() {
        let f = write_temp("2;1.5;7\n1;2.5;8\n");
        let schema = CsvSchema {
            delimiter: b';',
            has_header: false,
            label_column: LabelColumn::Index(0),
            classes: None,
        };
        let d = load_csv(f.path(), &schema).unwrap();
        assert_eq!(d.class_names(), ["1", "2"]);
        assert_eq!(d.labels(), [1, 0]);
        assert_eq!(d.row(0), [1.5, 7.0]);
    }

    #[test]
    fn mfeat_assembly() {
        let dir = tempfile::tempdir().unwrap();
        for (i, (file, width)) in MFEAT_FILES.iter().enumerate() {
            let mut text = String::new();
            for r in 0..20 {
                let row: Vec<String> = (0..*width).map(|j| format!("{}", i * 1000 + r * 10 + j % 10)).collect();
                text.push_str(&format!("  {}\n", row.join("  ")));
            }
            std::fs::write(dir.path().join(file), text).unwrap();
        }
        let d = load_mfeat(dir.path()).unwrap();
        assert_eq!((d.len(), d.dim(), d.class_count()), (20, 649, 10));
        assert_eq!(d.labels()[0], 0);
        assert_eq!(d.labels()[19], 9);
        assert_eq!(d.row(3)[0], 30.0);
        assert_eq!(d.row(3)[76], 1030.0);
    }

    #[test]
    fn znormalize_uses_train_statistics() {
        let train = Dataset::from_rows(
            &[vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0], vec![6.0, 5.0]],
            &[0, 1, 0, 1],
            2,
        )
        .unwrap();
        let test = Dataset::from_rows(&[vec![10.0, 7.0]], &[0], 2).unwrap();
        let (nt, rest, stats) = znormalize(&train, &[&test]).unwrap();
        let col: Vec<f64> = nt.column(0).collect();
        let mean = col.iter().sum::<f64>() / 4.0;
        let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
        assert!(mean.abs() < 1e-9 && (std - 1.0).abs() < 1e-9);
        assert!(nt.column(1).all(|v| v == 0.0));
        assert_eq!(stats.std[1], 1.0);
        assert!(rest[0].row(0)[0] != 0.0);
        assert_eq!(rest[0].row(0)[1], 2.0);
        let (again, _, s2) = znormalize(&nt, &[]).unwrap();
        assert!(s2.mean.iter().all(|m| m.abs() < 1e-9));
        for (a, b) in again.features().iter().zip(nt.features()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn kfold_examples() {
        let plan = kfold(10, 5, 3).unwrap();
        let mut all: Vec<usize> = plan.folds.iter().flat_map(|f| f.test.clone()).collect();
        assert!(plan.folds.iter().all(|f| f.test.len() == 2));
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(kfold(10, 5, 3).unwrap(), plan);
        assert_ne!(kfold(10, 5, 4).unwrap(), plan);

        let pima = kfold(768, 5, 0).unwrap();
        let sizes: Vec<usize> = pima.folds.iter().map(|f| f.test.len()).collect();
        assert!(sizes.iter().all(|s| *s == 153 || *s == 154));
        assert_eq!(sizes.iter().sum::<usize>(), 768);
        assert!(matches!(kfold(3, 5, 0), Err(Error::Domain(_))));
        assert!(kfold(10, 1, 0).is_err());
    }

    #[test]
    fn metric_examples() {
        let m = compute_metrics(&[1, 0, 0, 0], &[1, 1, 0, 0], 2).unwrap();
        assert_eq!(m.accuracy, 0.75);
        assert!((m.precision - 5.0 / 6.0).abs() < 1e-15);
        assert!((m.recall - 0.75).abs() < 1e-15);
        let perfect = compute_metrics(&[0, 1, 1, 0], &[0, 1, 1, 0], 2).unwrap();
        assert_eq!(
            (perfect.accuracy, perfect.precision, perfect.recall, perfect.f1),
            (1.0, 1.0, 1.0, 1.0)
        );
        let missing = compute_metrics(&[0, 0], &[0, 0], 3).unwrap();
        assert_eq!(missing.zero_support_classes, vec![1, 2]);
        assert!(compute_metrics(&[0], &[0, 1], 2).is_err());
    }

    #[test]
    fn mean_std_is_population() {
        let s = MeanStd::of(&[1.0, 3.0]);
        assert_eq!((s.mean, s.std), (2.0, 1.0));
    }

    proptest! {
        #[test]
        fn folds_partition_indices(n in 2usize..300, k in 2usize..10, seed in 0u64..50) {
            prop_assume!(k <= n);
            let plan = kfold(n, k, seed).unwrap();
            let mut seen = vec![0usize; n];
            for fold in &plan.folds {
                for &i in &fold.test {
                    seen[i] += 1;
                }
                let mut roles = vec![0usize; n];
                for &i in fold.test.iter().chain(&fold.train).chain(&fold.validation) {
                    roles[i] += 1;
                }
                prop_assert!(roles.iter().all(|&r| r == 1));
            }
            prop_assert!(seen.iter().all(|&s| s == 1));
        }

        #[test]
        fn metrics_ignore_relabeling(
            pairs in prop::collection::vec((0usize..3, 0usize..3), 1..60),
            perm_idx in 0usize..6,
        ) {
            let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let perm = perms[perm_idx];
            let (p, t): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
            let a = compute_metrics(&p, &t, 3).unwrap();
            let pp: Vec<usize> = p.iter().map(|&c| perm[c]).collect();
            let tt: Vec<usize> = t.iter().map(|&c| perm[c]).collect();
            let b = compute_metrics(&pp, &tt, 3).unwrap();
            prop_assert!((a.accuracy - b.accuracy).abs() < 1e-12);
            prop_assert!((a.precision - b.precision).abs() < 1e-12);
            prop_assert!((a.recall - b.recall).abs() < 1e-12);
            prop_assert!((a.f1 - b.f1).abs() < 1e-12);
        }
    }
}
