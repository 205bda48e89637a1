//! LIBSVM sparse text format: `<label> <idx>:<val> ...` with 1-based indices.

use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};

/// How raw labels map to `{−1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LabelMode {
    /// Exactly two distinct labels; the larger becomes `+1`.
    #[default]
    Binary,
    /// The given label becomes `+1`, every other label `−1`.
    OneVsRest(f64),
}

/// Dense rows with labels in `{−1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    /// Largest feature index seen; every row has this length.
    pub dim: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// First `n_train` rows and the rest, in file order.
    pub fn split_at(&self, n_train: usize) -> Result<(Dataset, Dataset)> {
        if n_train > self.len() {
            return Err(Error::param(format!(
                "cannot take {n_train} training rows from {} ({} rows)",
                self.name,
                self.len()
            )));
        }
        let part = |rows: &[Vec<f64>], labels: &[f64], tag: &str| Dataset {
            name: format!("{}-{tag}", self.name),
            rows: rows.to_vec(),
            labels: labels.to_vec(),
            dim: self.dim,
        };
        Ok((
            part(&self.rows[..n_train], &self.labels[..n_train], "train"),
            part(&self.rows[n_train..], &self.labels[n_train..], "test"),
        ))
    }

    /// Zero-pads (never truncates) every row to `dim` features.
    pub fn pad_to(&mut self, dim: usize) -> Result<()> {
        if dim < self.dim {
            return Err(Error::param(format!("cannot shrink {} from {} to {dim} features", self.name, self.dim)));
        }
        for r in &mut self.rows {
            r.resize(dim, 0.0);
        }
        self.dim = dim;
        Ok(())
    }
}

pub fn load_libsvm(path: impl AsRef<Path>, mode: LabelMode) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let name = path.file_stem().map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    parse_libsvm(std::io::BufReader::new(file), &name, mode)
}

/// Parses LIBSVM text. Blank lines and `#` comments are skipped.
pub fn parse_libsvm(reader: impl BufRead, name: &str, mode: LabelMode) -> Result<Dataset> {
    let mut sparse: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut raw_labels = Vec::new();
    let mut dim = 0;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let bad = |message: String| Error::Parse { line: lineno, message };
        let text = line.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let mut tokens = text.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let label: f64 = label_tok.parse().map_err(|_| bad(format!("bad label '{label_tok}'")))?;
        if !label.is_finite() {
            return Err(bad(format!("bad label '{label_tok}'")));
        }
        let mut feats = Vec::new();
        let mut last = 0;
        for tok in tokens {
            let (i, v) = tok.split_once(':').ok_or_else(|| bad(format!("expected idx:val, got '{tok}'")))?;
            let i: usize = i.parse().map_err(|_| bad(format!("bad index in '{tok}'")))?;
            let v: f64 = v.parse().map_err(|_| bad(format!("bad value in '{tok}'")))?;
            if i == 0 {
                return Err(bad("feature indices are 1-based".into()));
            }
            if i <= last {
                return Err(bad(format!("indices must increase (got {i} after {last})")));
            }
            last = i;
            dim = dim.max(i);
            feats.push((i - 1, v));
        }
        sparse.push(feats);
        raw_labels.push(label);
    }
    if sparse.is_empty() {
        return Err(Error::param(format!("dataset '{name}' is empty")));
    }
    let labels = normalize_labels(&raw_labels, mode)?;
    let rows = sparse
        .into_iter()
        .map(|feats| {
            let mut row = vec![0.0; dim];
            for (i, v) in feats {
                row[i] = v;
            }
            row
        })
        .collect();
    Ok(Dataset { name: name.to_string(), rows, labels, dim })
}

fn normalize_labels(raw: &[f64], mode: LabelMode) -> Result<Vec<f64>> {
    match mode {
        LabelMode::OneVsRest(pos) => Ok(raw.iter().map(|&l| if l == pos { 1.0 } else { -1.0 }).collect()),
        LabelMode::Binary => {
            let mut distinct: Vec<f64> = raw.to_vec();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            match distinct.as_slice() {
                [_] if distinct[0] == 1.0 || distinct[0] == -1.0 => Ok(raw.to_vec()),
                [lo, hi] => {
                    let (lo, hi) = (*lo, *hi);
                    Ok(raw.iter().map(|&l| if l == hi { 1.0 } else { debug_assert_eq!(l, lo); -1.0 }).collect())
                }
                _ => Err(Error::param(format!(
                    "binary labels expected, found {} distinct values (use one-vs-rest)",
                    distinct.len()
                ))),
            }
        }
    }
}
