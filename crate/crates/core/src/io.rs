//! JSON and CSV file formats.
//!
//! * points: `{"model": {"type": "first", "k": 2}, "points": [[...], ...], "labels": [...]}`
//! * kernel: `{"labels": [...], "matrix": [[...], ...]}`, or CSV with the labels as header
//! * Lorentz map: `{"model": ..., "matrix": [[...], ...], "base": [...]}` (`base` optional)
//! * orbit experiment: `{"generator": <map>, "base": [...], "t": 0.6, "horizon": 64}`
//! * induce request: `{"kernel": <kernel>, "permutation": [1, 0, 2]}`

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isometry::LorentzMap;
use crate::kernels::{default_labels, kernel_from_labeled_points, EmbeddingResult, KernelMatrix};
use crate::minkowski::{HyperbolicPoint, ModelTag};

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidInput(format!("{what}: rows have different lengths")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFile {
    pub labels: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
}

impl KernelFile {
    pub fn to_kernel(&self) -> Result<KernelMatrix> {
        KernelMatrix::new(self.labels.clone(), rows_to_matrix(&self.matrix, "kernel")?)
    }
}

impl From<&KernelMatrix> for KernelFile {
    fn from(k: &KernelMatrix) -> Self {
        Self {
            labels: k.labels().to_vec(),
            matrix: matrix_to_rows(k.entries()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointsFile {
    pub model: ModelTag,
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl PointsFile {
    pub fn to_points(&self) -> Result<Vec<HyperbolicPoint>> {
        self.points
            .iter()
            .enumerate()
            .map(|(i, c)| {
                HyperbolicPoint::from_slice(self.model, c)
                    .map_err(|e| Error::InvalidInput(format!("point {i}: {e}")))
            })
            .collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.labels
            .clone()
            .unwrap_or_else(|| default_labels(self.points.len(), "p"))
    }

    pub fn to_kernel(&self) -> Result<KernelMatrix> {
        let labels = self.labels();
        if labels.len() != self.points.len() {
            return Err(Error::InvalidInput("one label per point required".into()));
        }
        kernel_from_labeled_points(labels, &self.to_points()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzMapFile {
    pub model: ModelTag,
    pub matrix: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Vec<f64>>,
}

impl LorentzMapFile {
    pub fn to_map(&self) -> Result<LorentzMap> {
        let m = rows_to_matrix(&self.matrix, "matrix")?;
        LorentzMap::new(self.model, m).map_err(|e| match e {
            Error::Geometry(msg) | Error::Usage(msg) => Error::InvalidInput(msg),
            other => other,
        })
    }

    pub fn base_point(&self) -> Result<Option<HyperbolicPoint>> {
        self.base
            .as_ref()
            .map(|c| {
                HyperbolicPoint::from_slice(self.model, c)
                    .map_err(|e| Error::InvalidInput(format!("base point: {e}")))
            })
            .transpose()
    }

    pub fn from_map(m: &LorentzMap, base: Option<&HyperbolicPoint>) -> Self {
        Self {
            model: m.model(),
            matrix: matrix_to_rows(m.matrix()),
            base: base.map(|p| p.coords().iter().copied().collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSpec {
    pub generator: LorentzMapFile,
    pub base: Vec<f64>,
    pub t: f64,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InduceSpec {
    pub kernel: KernelFile,
    pub permutation: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingFile {
    pub labels: Vec<String>,
    pub model: ModelTag,
    pub points: Vec<Vec<f64>>,
    pub basepoint_index: usize,
    pub rank: usize,
    pub residual: f64,
}

impl From<&EmbeddingResult> for EmbeddingFile {
    fn from(e: &EmbeddingResult) -> Self {
        Self {
            labels: e.labels.clone(),
            model: ModelTag::First { k: e.rank },
            points: e.points.iter().map(|p| p.coords().iter().copied().collect()).collect(),
            basepoint_index: e.basepoint_index,
            rank: e.rank,
            residual: e.residual,
        }
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Square CSV matrix whose header row holds the labels.
pub fn read_kernel_csv(path: &Path) -> Result<KernelMatrix> {
    let mut reader = csv::Reader::from_path(path)?;
    let labels: Vec<String> = reader.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("bad number {s:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    KernelMatrix::new(labels, rows_to_matrix(&rows, "kernel csv")?)
}

/// Reads a kernel from kernel JSON, points JSON (via `β = B(p_i, p_j)`), or CSV.
pub fn read_kernel_input(path: &Path) -> Result<KernelMatrix> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        return read_kernel_csv(path);
    }
    let value: serde_json::Value = read_json(path)?;
    if value.get("matrix").is_some() {
        serde_json::from_value::<KernelFile>(value)?.to_kernel()
    } else if value.get("points").is_some() {
        serde_json::from_value::<PointsFile>(value)?.to_kernel()
    } else {
        Err(Error::InvalidInput(
            "expected a kernel {labels, matrix} or points {model, points} document".into(),
        ))
    }
}

/// Writes to `path`, or to standard output when `path` is `None`.
pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn to_csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_round_trip_json_and_csv() {
        let dir = tempfile::tempdir().unwrap();
        let k = KernelMatrix::new(
            vec!["a".into(), "b".into()],
            DMatrix::from_row_slice(2, 2, &[1.0, 1.5430806348152437, 1.5430806348152437, 1.0]),
        )
        .unwrap();
        let json = dir.path().join("k.json");
        fs::write(&json, to_json_bytes(&KernelFile::from(&k)).unwrap()).unwrap();
        assert_eq!(read_kernel_input(&json).unwrap(), k);

        let csv_path = dir.path().join("k.csv");
        fs::write(&csv_path, "a,b\n1,1.5430806348152437\n1.5430806348152437,1\n").unwrap();
        assert_eq!(read_kernel_input(&csv_path).unwrap(), k);
    }

    #[test]
    fn points_input() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let s = 1f64.sinh();
        fs::write(
            &path,
            format!(r#"{{"model": {{"type": "first", "k": 1}}, "points": [[1, 0], [{}, {s}]]}}"#, 1f64.cosh()),
        )
        .unwrap();
        let k = read_kernel_input(&path).unwrap();
        assert!((k.get(0, 1) - 1f64.cosh()).abs() < 1e-14);
        assert_eq!(k.labels(), &["p0", "p1"]);

        fs::write(&path, r#"{"model": {"type": "first", "k": 1}, "points": [[2, 0]]}"#).unwrap();
        assert!(matches!(read_kernel_input(&path), Err(Error::InvalidInput(_))));
        fs::write(&path, r#"{"nothing": 1}"#).unwrap();
        assert!(matches!(read_kernel_input(&path), Err(Error::InvalidInput(_))));
        fs::write(&path, "not json").unwrap();
        assert!(matches!(read_kernel_input(&path), Err(Error::Json(_))));
    }

    #[test]
    fn map_file() {
        let f = LorentzMapFile {
            model: ModelTag::First { k: 1 },
            matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            base: None,
        };
        let m = f.to_map().unwrap();
        assert_eq!(LorentzMapFile::from_map(&m, None), f);
        let bad = LorentzMapFile {
            matrix: vec![vec![2.0, 0.0], vec![0.0, 1.0]],
            ..f
        };
        assert!(matches!(bad.to_map(), Err(Error::InvalidInput(_))));
    }
}
