//! File formats: sample CSVs, edge lists and dense mixing matrices.

use std::fs;
use std::io::Write;
use std::path::Path;

use destress_core::model::Sample;
use destress_core::data::Dataset;
use destress_core::mixing::parse_dense_csv;
use destress_core::topology::Graph;
use destress_core::Mat;

use crate::error::{Result, SimError};

/// How to read a sample CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CsvOptions {
    /// 0-based column holding the label; every other column is a feature.
    pub label_column: usize,
    /// Skip the first line.
    pub header: bool,
    /// Rescale every feature vector to unit norm after loading.
    pub normalize: bool,
}

impl CsvOptions {
    pub fn new(label_column: usize) -> Self {
        Self { label_column, ..Self::default() }
    }
}

pub fn load_csv(path: impl AsRef<Path>, opts: CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| SimError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.header)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);

    let mut samples = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(err) => SimError::io(path, err),
            other => SimError::ConfigInvalid(format!("{}: {other:?}", path.display())),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(SimError::RaggedRow { line, expected, found: record.len() });
        }
        if opts.label_column >= expected {
            return Err(SimError::ConfigInvalid(format!(
                "label column {} out of range for {expected} columns",
                opts.label_column
            )));
        }
        let mut features = Vec::with_capacity(expected - 1);
        let mut label = 0.0;
        for (j, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| SimError::Parse { line, token: field.to_string() })?;
            if j == opts.label_column {
                label = value;
            } else {
                features.push(value);
            }
        }
        samples.push(Sample::new(features, label));
    }
    let mut ds = Dataset::new(samples)?;
    if opts.normalize {
        ds.normalize_features();
    }
    Ok(ds)
}

/// Writes features followed by the label, so `load_csv` with
/// `label_column = feature_dim` reads the same dataset back.
pub fn write_csv(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let mut text = String::new();
    for s in ds.samples() {
        for f in &s.features {
            text.push_str(&format!("{f},"));
        }
        text.push_str(&format!("{}\n", s.label));
    }
    write_atomic(path, text.as_bytes())
}

pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    Ok(Graph::parse_edge_list(&text)?)
}

pub fn write_edge_list(path: impl AsRef<Path>, g: &Graph) -> Result<()> {
    write_atomic(path, g.to_edge_list().as_bytes())
}

/// A dense `n x n` matrix, one comma-separated row per line.
pub fn read_mixing_csv(path: impl AsRef<Path>) -> Result<Mat> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    Ok(parse_dense_csv(&text)?)
}

/// Writes through a temporary file in the target directory, then renames,
/// so readers never observe a partial file at `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| SimError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| SimError::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| SimError::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| SimError::io(path, e.error))?;
    Ok(())
}
