//! Feature matrices as CSV files: header `id,label,f0,…,f{D-1}`, floats
//! with 17 significant digits so the round-trip is value-exact.

use std::path::Path;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub fn save_features(fm: &FeatureMatrix, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .from_path(path)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend((0..fm.n_dims()).map(|j| format!("f{j}")));
    w.write_record(&header)?;
    for i in 0..fm.n_rows() {
        let mut record = vec![fm.ids()[i].clone(), fm.labels()[i].to_string()];
        record.extend(fm.row(i).iter().map(|v| format!("{v:.16e}")));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_features(path: &Path) -> Result<FeatureMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?
        .clone();
    if headers.len() < 3 || &headers[0] != "id" || &headers[1] != "label" {
        return Err(Error::format(format!(
            "{}: expected header id,label,f0,…; got {:?}",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let dims = headers.len() - 2;
    for (j, name) in headers.iter().skip(2).enumerate() {
        if name != format!("f{j}") {
            return Err(Error::format(format!(
                "{}: feature column {} is named {name:?}; expected \"f{j}\"",
                path.display(),
                j + 2
            )));
        }
    }

    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            line: row,
            message: e.to_string(),
        })?;
        if record.len() != dims + 2 {
            return Err(Error::format(format!(
                "row {row} has {} values; expected {} for {dims} features",
                record.len(),
                dims + 2
            )));
        }
        ids.push(record[0].to_string());
        labels.push(record[1].parse::<usize>().map_err(|_| Error::Parse {
            line: row,
            message: format!("bad label {:?}", &record[1]),
        })?);
        for field in record.iter().skip(2) {
            values.push(field.parse::<f64>().map_err(|_| Error::Parse {
                line: row,
                message: format!("bad float {field:?}"),
            })?);
        }
    }
    FeatureMatrix::new(dims, values, labels, ids)
}
