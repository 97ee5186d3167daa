use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synthetic::{stand_in, Variant};
use super::{Dataset, Matrix, MlError, TaskKind};

/// How a CSV file maps onto a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvDescriptor {
    pub task_kind: TaskKind,
    /// Column holding the targets; absent for unlabelled data.
    #[serde(default)]
    pub target_column: Option<String>,
    #[serde(default)]
    pub normalize: bool,
    #[serde(default = "full_split")]
    pub split: f64,
}

fn full_split() -> f64 {
    1.0
}

/// Where a dataset's rows come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    Synthetic {
        generator: String,
        #[serde(default = "train_variant")]
        variant: Variant,
        #[serde(default)]
        seed: u64,
    },
    Csv {
        path: PathBuf,
        #[serde(flatten)]
        descriptor: CsvDescriptor,
    },
}

fn train_variant() -> Variant {
    Variant::Train
}

impl DataSource {
    pub fn synthetic(generator: &str, variant: Variant, seed: u64) -> DataSource {
        DataSource::Synthetic { generator: generator.to_string(), variant, seed }
    }

    /// Loads or generates the rows, naming the result `name`.
    pub fn materialize(&self, name: &str) -> Result<Dataset, MlError> {
        let mut d = match self {
            DataSource::Synthetic { generator, variant, seed } => stand_in(generator, *variant, *seed)
                .ok_or_else(|| MlError::Io(format!("unknown synthetic generator `{generator}`")))?,
            DataSource::Csv { path, descriptor } => load_csv(path, name, descriptor)?,
        };
        d.name = name.to_string();
        Ok(d)
    }
}

pub fn load_csv(path: &Path, name: &str, desc: &CsvDescriptor) -> Result<Dataset, MlError> {
    let file = std::fs::File::open(path).map_err(|e| MlError::Io(format!("{}: {e}", path.display())))?;
    let mut d = read_csv(file, name, desc)?;
    d.provenance = format!("csv:{}", path.display());
    Ok(d)
}

/// Parses a header plus numeric rows. Row numbers in errors count data rows
/// from 1.
pub fn read_csv(input: impl Read, name: &str, desc: &CsvDescriptor) -> Result<Dataset, MlError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
    let header = reader.headers().map_err(|e| MlError::Csv { row: 0, reason: e.to_string() })?.clone();
    let target = match &desc.target_column {
        Some(col) => Some(
            header
                .iter()
                .position(|h| h == col)
                .ok_or_else(|| MlError::Csv { row: 0, reason: format!("no column named `{col}` in header") })?,
        ),
        None => None,
    };
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = record.map_err(|e| MlError::Csv { row: row_no, reason: e.to_string() })?;
        if record.len() != header.len() {
            return Err(MlError::Csv {
                row: row_no,
                reason: format!("expected {} cells, found {}", header.len(), record.len()),
            });
        }
        let mut x = Vec::with_capacity(header.len());
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| MlError::Csv {
                row: row_no,
                reason: format!("column `{}` holds non-numeric value `{cell}`", &header[j]),
            })?;
            if Some(j) == target {
                ys.push(v);
            } else {
                x.push(v);
            }
        }
        rows.push(x);
    }
    if rows.is_empty() {
        return Err(MlError::Csv { row: 0, reason: "no data rows".into() });
    }
    let mut features = Matrix::from_rows(&rows)?;
    if desc.normalize {
        features.normalize_columns();
    }
    Dataset::new(name, desc.task_kind, features, target.map(|_| ys))?.with_split(desc.split)
}

/// Writes features as `f0..fN` and the targets, if any, as `target`.
pub fn write_csv(d: &Dataset, out: impl Write) -> Result<(), MlError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| MlError::Io(e.to_string());
    let mut header: Vec<String> = (0..d.dims()).map(|j| format!("f{j}")).collect();
    if d.targets.is_some() {
        header.push("target".into());
    }
    w.write_record(&header).map_err(io)?;
    for (i, row) in d.features.iter_rows().enumerate() {
        let mut cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(t) = &d.targets {
            cells.push(t[i].to_string());
        }
        w.write_record(&cells).map_err(io)?;
    }
    w.flush().map_err(|e| MlError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desc() -> CsvDescriptor {
        CsvDescriptor { task_kind: TaskKind::Classification, target_column: Some("y".into()), normalize: false, split: 1.0 }
    }

    #[test]
    fn errors_name_the_row() {
        let bad = "a,y\n1,0\nfoo,1\n";
        match read_csv(bad.as_bytes(), "d", &desc()) {
            Err(MlError::Csv { row, reason }) => {
                assert_eq!(row, 2);
                assert!(reason.contains("foo"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(read_csv("a,y\n1,0\n1\n".as_bytes(), "d", &desc()), Err(MlError::Csv { row: 2, .. })));
        assert!(matches!(read_csv("a,b\n1,0\n".as_bytes(), "d", &desc()), Err(MlError::Csv { row: 0, .. })));
    }

    #[test]
    fn source_json_shapes() {
        let s: DataSource = serde_json::from_str(r#"{"kind":"synthetic","generator":"iris","variant":"test","seed":4}"#).unwrap();
        assert_eq!(s, DataSource::synthetic("iris", Variant::Test, 4));
        let c: DataSource =
            serde_json::from_str(r#"{"kind":"csv","path":"x.csv","task_kind":"regression","target_column":"y"}"#).unwrap();
        assert!(matches!(c, DataSource::Csv { ref descriptor, .. } if descriptor.split == 1.0));
    }
}
