//! CSV ingestion and emission (UTF-8, RFC 4180 quoting via the `csv` crate).

use std::path::Path;

use crate::data::{Dataset, Targets, Task};
use crate::experiments::config::CsvTask;
use crate::matrix::Matrix;
use crate::{Error, Result};

/// Load a dataset from a headered CSV file.
///
/// `label_column` names the target column; every other column is a feature
/// parsed as `f64`. Regression labels parse as `f64`; classification labels
/// must be nonnegative integers (the class count is `max + 1`). Non-finite or
/// unparseable cells are rejected with their 1-based data row and column name.
pub fn load_csv_dataset(path: &Path, label_column: &str, task: CsvTask) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| {
            Error::InvalidData(format!(
                "label column '{label_column}' not found; header has: {}",
                headers.join(", ")
            ))
        })?;
    let feature_names: Vec<&String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h)
        .collect();
    if feature_names.is_empty() {
        return Err(Error::InvalidData("no feature columns".into()));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut reg_targets: Vec<f64> = Vec::new();
    let mut class_targets: Vec<usize> = Vec::new();

    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = row_idx + 1; // 1-based data row for diagnostics
        if record.len() != headers.len() {
            return Err(Error::InvalidData(format!(
                "row {row_no} has {} fields, expected {}",
                record.len(),
                headers.len()
            )));
        }
        let mut features = Vec::with_capacity(feature_names.len());
        for (col_idx, cell) in record.iter().enumerate() {
            let col_name = &headers[col_idx];
            if col_idx == label_idx {
                match task {
                    CsvTask::Regression => {
                        let v: f64 = cell.trim().parse().map_err(|_| {
                            Error::InvalidData(format!(
                                "row {row_no}, column \"{col_name}\": cannot parse '{cell}' as a number"
                            ))
                        })?;
                        if !v.is_finite() {
                            return Err(Error::InvalidData(format!(
                                "row {row_no}, column \"{col_name}\": non-finite value"
                            )));
                        }
                        reg_targets.push(v);
                    }
                    CsvTask::Classification => {
                        let v: usize = cell.trim().parse().map_err(|_| {
                            Error::InvalidData(format!(
                                "row {row_no}, column \"{col_name}\": unknown class label '{cell}' \
                                 (labels must be nonnegative integers)"
                            ))
                        })?;
                        class_targets.push(v);
                    }
                }
            } else {
                let v: f64 = cell.trim().parse().map_err(|_| {
                    Error::InvalidData(format!(
                        "row {row_no}, column \"{col_name}\": cannot parse '{cell}' as a number"
                    ))
                })?;
                if !v.is_finite() {
                    return Err(Error::InvalidData(format!(
                        "row {row_no}, column \"{col_name}\": non-finite value"
                    )));
                }
                features.push(v);
            }
        }
        rows.push(features);
    }

    if rows.is_empty() {
        return Err(Error::InvalidData("empty CSV (no data rows)".into()));
    }
    let x = Matrix::from_rows(&rows)?;
    match task {
        CsvTask::Regression => Dataset::regression(x, Matrix::column(&reg_targets)),
        CsvTask::Classification => {
            let classes = class_targets.iter().copied().max().unwrap_or(0) + 1;
            Dataset::classification(x, class_targets, classes.max(2))
        }
    }
}

/// Write a dataset back to CSV with feature columns `x0..x{p-1}` and the
/// label under `label_column`.
pub fn write_csv_dataset(path: &Path, data: &Dataset, label_column: &str) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let p = data.input_dim();
    let mut header: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
    header.push(label_column.to_string());
    writer.write_record(&header)?;
    for (i, row) in data.x().iter_rows().enumerate() {
        let mut rec: Vec<String> = row.iter().map(f64::to_string).collect();
        match data.y() {
            Targets::Real(m) => rec.push(m.get(i, 0).to_string()),
            Targets::Class(c) => rec.push(c[i].to_string()),
        }
        writer.write_record(&rec)?;
    }
    writer.flush()?;
    Ok(())
}

/// Write a metric table. Floats are formatted with Rust's shortest-roundtrip
/// `Display`, which is deterministic, so identical values give identical
/// bytes.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::InvalidData(format!(
                "table row has {} cells for {} columns",
                row.len(),
                header.len()
            )));
        }
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Task kind helper for CSV loading.
pub fn csv_task_of(task: Task) -> CsvTask {
    match task {
        Task::Regression { .. } => CsvTask::Regression,
        Task::Classification { .. } => CsvTask::Classification,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    #[test]
    fn three_row_fixture_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let x = Matrix::from_rows(&[vec![0.5, 1.0], vec![-1.25, 2.0], vec![3.5, -0.125]]).unwrap();
        let ds = Dataset::classification(x, vec![0, 1, 1], 2).unwrap();
        write_csv_dataset(&path, &ds, "y").unwrap();
        let back = load_csv_dataset(&path, "y", CsvTask::Classification).unwrap();
        assert_eq!(back.x(), ds.x());
        assert_eq!(back.class_labels().unwrap(), ds.class_labels().unwrap());
    }

    #[test]
    fn nan_cell_names_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x1,x2,y\n1.0,2.0,0\nNaN,1.0,1\n").unwrap();
        let err = load_csv_dataset(&path, "y", CsvTask::Classification).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2"), "message: {msg}");
        assert!(msg.contains("\"x1\""), "message: {msg}");
    }

    #[test]
    fn unknown_class_label_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad_label.csv");
        std::fs::write(&path, "x1,y\n1.0,cat\n").unwrap();
        let err = load_csv_dataset(&path, "y", CsvTask::Classification).unwrap_err();
        assert!(err.to_string().contains("unknown class label 'cat'"));
    }

    #[test]
    fn missing_label_column_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("no_label.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(load_csv_dataset(&path, "y", CsvTask::Regression).is_err());
    }

    #[test]
    fn empty_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "x1,y\n").unwrap();
        assert!(load_csv_dataset(&path, "y", CsvTask::Regression).is_err());
    }

    #[test]
    fn class_frequencies_match_hand_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("freq.csv");
        // Hand-written fixture: 3 of class 0, 2 of class 1, 1 of class 2.
        std::fs::write(
            &path,
            "x1,y\n0.1,0\n0.2,0\n0.3,0\n0.4,1\n0.5,1\n0.6,2\n",
        )
        .unwrap();
        let ds = load_csv_dataset(&path, "y", CsvTask::Classification).unwrap();
        let labels = ds.class_labels().unwrap();
        let count = |c: usize| labels.iter().filter(|&&l| l == c).count();
        assert_eq!((count(0), count(1), count(2)), (3, 2, 1));
    }

    #[test]
    fn quoted_fields_parse() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("quoted.csv");
        std::fs::write(&path, "\"x1\",\"y\"\n\"1.5\",\"2.5\"\n\"2.0\",\"3.5\"\n").unwrap();
        let ds = load_csv_dataset(&path, "y", CsvTask::Regression).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.x().get(0, 0), 1.5);
    }

    #[test]
    fn generated_dataset_survives_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("moons.csv");
        let ds =
            crate::experiments::synth::synth_two_moons(50, 0.1, 0.0, 0.0, &mut seeded_rng(9))
                .unwrap();
        write_csv_dataset(&path, &ds, "label").unwrap();
        let back = load_csv_dataset(&path, "label", CsvTask::Classification).unwrap();
        assert_eq!(back.len(), 50);
        assert_eq!(back.x(), ds.x());
    }
}
