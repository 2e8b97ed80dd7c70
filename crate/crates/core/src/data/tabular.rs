use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

/// Loads a CSV with a header row. The column named `label` holds integer
/// classes; every other column is a numeric feature.
///
/// When `n_classes` is `None` it is inferred as `max(label) + 1`.
pub fn load_csv(path: impl AsRef<Path>, n_classes: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let format_err = |line: u64, reason: String| Error::Format {
        path: path.to_path_buf(),
        offset: line,
        reason,
    };

    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let label_col = headers
        .iter()
        .position(|h| h.trim() == "label")
        .ok_or_else(|| format_err(0, "no column named \"label\"".into()))?;
    let input_dim = headers.len() - 1;

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        for (col, field) in record.iter().enumerate() {
            let field = field.trim();
            if col == label_col {
                let l: usize = field
                    .parse()
                    .map_err(|_| format_err(line, format!("label {field:?} is not a class index")))?;
                labels.push(l);
            } else {
                let v: f64 = field.parse().map_err(|_| {
                    format_err(line, format!("column {:?}: {field:?} is not a number", &headers[col]))
                })?;
                features.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(format_err(1, "file contains no samples".into()));
    }
    let n_classes = n_classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1).max(2));
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    Dataset::new(name, input_dim, n_classes, features, labels)
}
