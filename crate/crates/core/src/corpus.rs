//! Corpus manifests, feature matrices, splitting, scaling and duplicate
//! detection.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed;

pub const MANIFEST_HEADER: [&str; 4] = ["id", "label", "score", "path"];

/// One annotated account.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusRecord {
    pub id: String,
    /// 0 = human, 1 = bot.
    pub label: u8,
    /// Third-party probability of automation, when available.
    pub external_score: Option<f64>,
    /// Edge-list file, resolved against the manifest's directory.
    pub network_path: PathBuf,
}

/// Reads a manifest with header `id,label,score,path`. Network files are
/// only referenced here, not opened.
pub fn load_manifest(path: &Path) -> Result<Vec<CorpusRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    if header.iter().ne(MANIFEST_HEADER) {
        return Err(Error::data(format!(
            "{}: expected header {:?}, found {:?}",
            path.display(),
            MANIFEST_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| Error::data(format!("manifest row {row_no}: {e}")))?;
        let id = row[0].to_string();
        if id.is_empty() {
            return Err(Error::data(format!("manifest row {row_no}: empty id")));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::data(format!("manifest row {row_no}: duplicate id {id:?}")));
        }
        let label = parse_label(&row[1]).ok_or_else(|| {
            Error::data(format!(
                "manifest row {row_no} ({id}): label {:?} is not 0 or 1",
                &row[1]
            ))
        })?;
        let external_score = parse_score(&row[2])
            .map_err(|msg| Error::data(format!("manifest row {row_no} ({id}): {msg}")))?;
        records.push(CorpusRecord {
            id,
            label,
            external_score,
            network_path: base.join(&row[3]),
        });
    }
    Ok(records)
}

/// Writes a manifest; `network_path`s are written as given.
pub fn write_manifest(path: &Path, records: &[CorpusRecord]) -> Result<()> {
    let mut out = String::from("id,label,score,path\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.id,
            r.label,
            r.external_score.map(|s| s.to_string()).unwrap_or_default(),
            r.network_path.display()
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn parse_label(s: &str) -> Option<u8> {
    match s {
        "0" => Some(0),
        "1" => Some(1),
        _ => None,
    }
}

fn parse_score(s: &str) -> std::result::Result<Option<f64>, String> {
    if s.is_empty() {
        return Ok(None);
    }
    let v: f64 = s.parse().map_err(|_| format!("score {s:?} is not a number"))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("score {v} outside [0, 1]"));
    }
    Ok(Some(v))
}

/// Named numeric columns over identified rows, carrying each row's label and
/// optional external score alongside (never inside) the predictor columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    ids: Vec<String>,
    columns: Vec<String>,
    values: DMatrix<f64>,
    labels: Vec<u8>,
    scores: Vec<Option<f64>>,
}

impl FeatureMatrix {
    pub fn new(
        ids: Vec<String>,
        columns: Vec<String>,
        values: DMatrix<f64>,
        labels: Vec<u8>,
        scores: Vec<Option<f64>>,
    ) -> Result<Self> {
        let n = ids.len();
        if values.nrows() != n || labels.len() != n || scores.len() != n {
            return Err(Error::argument(format!(
                "ragged matrix: {n} ids, {} value rows, {} labels, {} scores",
                values.nrows(),
                labels.len(),
                scores.len()
            )));
        }
        if values.ncols() != columns.len() {
            return Err(Error::argument(format!(
                "{} column names for {} columns",
                columns.len(),
                values.ncols()
            )));
        }
        let mut names = HashSet::new();
        if let Some(dup) = columns.iter().find(|c| !names.insert(c.as_str())) {
            return Err(Error::argument(format!("duplicate column name {dup:?}")));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::argument("labels must be 0 or 1"));
        }
        Ok(FeatureMatrix {
            ids,
            columns,
            values,
            labels,
            scores,
        })
    }

    /// Builds a matrix from row vectors.
    pub fn from_rows(
        ids: Vec<String>,
        columns: Vec<String>,
        rows: &[Vec<f64>],
        labels: Vec<u8>,
        scores: Vec<Option<f64>>,
    ) -> Result<Self> {
        let p = columns.len();
        if let Some(r) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::argument(format!(
                "row of length {} for {p} columns",
                r.len()
            )));
        }
        let values = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Self::new(ids, columns, values, labels, scores)
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn scores(&self) -> &[Option<f64>] {
        &self.scores
    }

    pub fn labels_f64(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| f64::from(l)).collect()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Rows at `idx`, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            columns: self.columns.clone(),
            values: self.values.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            scores: idx.iter().map(|&i| self.scores[i]).collect(),
        }
    }

    /// Keeps only the named columns, in the given order.
    pub fn select_columns(&self, names: &[String]) -> Result<FeatureMatrix> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::argument(format!("no column named {n:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureMatrix {
            ids: self.ids.clone(),
            columns: names.to_vec(),
            values: self.values.select_columns(&idx),
            labels: self.labels.clone(),
            scores: self.scores.clone(),
        })
    }

    /// Appends a predictor column.
    pub fn with_column(&self, name: &str, data: &[f64]) -> Result<FeatureMatrix> {
        if data.len() != self.n_rows() {
            return Err(Error::argument("column length differs from row count"));
        }
        let mut columns = self.columns.clone();
        columns.push(name.to_owned());
        let p = self.n_cols();
        let values = DMatrix::from_fn(self.n_rows(), p + 1, |i, j| {
            if j < p {
                self.values[(i, j)]
            } else {
                data[i]
            }
        });
        FeatureMatrix::new(
            self.ids.clone(),
            columns,
            values,
            self.labels.clone(),
            self.scores.clone(),
        )
    }

    /// Same rows with no predictor columns.
    pub fn without_columns(&self) -> FeatureMatrix {
        FeatureMatrix {
            ids: self.ids.clone(),
            columns: Vec::new(),
            values: DMatrix::zeros(self.n_rows(), 0),
            labels: self.labels.clone(),
            scores: self.scores.clone(),
        }
    }

    /// Indices of rows that have an external score.
    pub fn scored_rows(&self) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.scores[i].is_some()).collect()
    }
}

/// Writes `id,label,score,<columns...>`. Floats use the shortest decimal
/// form that parses back to the same value.
pub fn write_feature_csv(path: &Path, m: &FeatureMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    write!(w, "id,label,score").map_err(io)?;
    for c in &m.columns {
        write!(w, ",{c}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for i in 0..m.n_rows() {
        write!(w, "{},{},", m.ids[i], m.labels[i]).map_err(io)?;
        if let Some(s) = m.scores[i] {
            write!(w, "{s}").map_err(io)?;
        }
        for j in 0..m.n_cols() {
            write!(w, ",{}", m.values[(i, j)]).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_feature_csv(path: &Path) -> Result<FeatureMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.len() < 3 || header[..3] != ["id", "label", "score"] {
        return Err(Error::data(format!(
            "{}: header must start with id,label,score",
            path.display()
        )));
    }
    let columns = header[3..].to_vec();
    let (mut ids, mut labels, mut scores, mut rows) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let row_no = i + 1;
        let rec = rec.map_err(|e| Error::data(format!("feature row {row_no}: {e}")))?;
        ids.push(rec[0].to_string());
        labels.push(
            parse_label(&rec[1])
                .ok_or_else(|| Error::data(format!("feature row {row_no}: bad label {:?}", &rec[1])))?,
        );
        scores.push(parse_score(&rec[2]).map_err(|m| Error::data(format!("feature row {row_no}: {m}")))?);
        let row = rec
            .iter()
            .skip(3)
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::data(format!("feature row {row_no}: bad value {s:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    FeatureMatrix::from_rows(ids, columns, &rows, labels, scores)
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

/// Number of training rows for an `n`-row split at `ratio`: `round(ratio n)`,
/// kept within `1..n` so neither side is empty.
pub fn train_size(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64).round() as usize).clamp(1, n - 1)
}

/// Row indices of a seeded random split. With `stratified`, each class is
/// split separately at the same ratio.
pub fn split_indices(
    labels: &[u8],
    ratio: f64,
    seed: u64,
    stratified: bool,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = labels.len();
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::argument(format!("split ratio {ratio} outside (0, 1)")));
    }
    if n < 2 {
        return Err(Error::data(format!("cannot split {n} rows")));
    }
    let mut rng = seed::rng(seed);
    let (mut train, mut test);
    if stratified {
        train = Vec::new();
        test = Vec::new();
        for class in [0u8, 1] {
            let mut idx: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
            idx.shuffle(&mut rng);
            let k = (ratio * idx.len() as f64).round() as usize;
            test.extend_from_slice(&idx[k..]);
            idx.truncate(k);
            train.extend(idx);
        }
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        test = idx.split_off(train_size(n, ratio));
        train = idx;
    }
    Ok((train, test))
}

/// Seeded 80/20-style split of a matrix into `(train, test)`.
pub fn train_test_split(m: &FeatureMatrix, ratio: f64, seed: u64) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let (train, test) = split_indices(m.labels(), ratio, seed, false)?;
    Ok((m.select_rows(&train), m.select_rows(&test)))
}

/// Per-column standardization learned from a training matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    /// Sample standard deviation (n - 1 denominator); 0 for constant columns.
    pub sd: Vec<f64>,
}

impl Scaler {
    pub fn fit(train: &FeatureMatrix) -> Scaler {
        let n = train.n_rows();
        let (mut mean, mut sd) = (Vec::new(), Vec::new());
        for col in train.values.column_iter() {
            let m = if n == 0 { 0.0 } else { col.sum() / n as f64 };
            let s = if n < 2 {
                0.0
            } else {
                (col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64).sqrt()
            };
            mean.push(m);
            sd.push(s);
        }
        Scaler {
            columns: train.columns.clone(),
            mean,
            sd,
        }
    }

    /// `(x - mean) / sd` per column; constant columns become 0.
    pub fn apply(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        if m.columns != self.columns {
            return Err(Error::argument(format!(
                "scaler fitted on {} columns {:?}.. cannot scale columns {:?}..",
                self.columns.len(),
                self.columns.first(),
                m.columns.first()
            )));
        }
        let values = DMatrix::from_fn(m.n_rows(), m.n_cols(), |i, j| {
            if self.sd[j] > 0.0 {
                (m.values[(i, j)] - self.mean[j]) / self.sd[j]
            } else {
                0.0
            }
        });
        Ok(FeatureMatrix { values, ..m.clone() })
    }
}

pub fn fit_scaler(train: &FeatureMatrix) -> Scaler {
    Scaler::fit(train)
}

pub fn apply_scaler(s: &Scaler, m: &FeatureMatrix) -> Result<FeatureMatrix> {
    s.apply(m)
}

/// Groups of row ids whose predictor values are exactly equal. Groups are
/// ordered by first occurrence; singletons are omitted.
pub fn find_duplicates(m: &FeatureMatrix) -> Vec<Vec<String>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut by_key: HashMap<Vec<u64>, usize> = HashMap::new();
    for i in 0..m.n_rows() {
        // +0.0 and -0.0 compare equal, so normalize before hashing the bits.
        let key: Vec<u64> = m
            .values
            .row(i)
            .iter()
            .map(|&v| if v == 0.0 { 0u64 } else { v.to_bits() })
            .collect();
        match by_key.get(&key) {
            Some(&g) => groups[g].push(i),
            None => {
                by_key.insert(key, groups.len());
                groups.push(vec![i]);
            }
        }
    }
    groups
        .into_iter()
        .filter(|g| g.len() > 1)
        .map(|g| g.into_iter().map(|i| m.ids[i].clone()).collect())
        .collect()
}
