use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::data::{DataFormat, DatasetManifest, ViewSpec};
use crate::error::{Error, Result};
use crate::model::{MultiviewDataset, Table};

fn reader(path: &Path, header: bool) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .from_reader(file))
}

fn record_line(record: &csv::StringRecord) -> Option<usize> {
    record.position().map(|p| p.line() as usize)
}

/// Reads a comma-separated numeric table; every row must have the same width.
pub fn read_table(path: &Path, header: bool) -> Result<Table> {
    let mut rdr = reader(path, header)?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize);
            Error::data(path, line, e.to_string())
        })?;
        let line = record_line(&rec);
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(rec.len()),
            Some(c) if c != rec.len() => {
                return Err(Error::data(
                    path,
                    line,
                    format!("row has {} cells, expected {c}", rec.len()),
                ))
            }
            _ => {}
        }
        for cell in rec.iter() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| Error::data(path, line, format!("non-numeric cell {cell:?}")))?;
            data.push(v);
        }
        rows += 1;
    }
    Table::new(rows, cols.unwrap_or(0), data)
}

/// Reads the first column of a label file as raw class identifiers.
pub fn read_label_column(path: &Path, header: bool) -> Result<Vec<String>> {
    let mut rdr = reader(path, header)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::data(path, None, e.to_string()))?;
        let cell = rec.get(0).unwrap_or("").trim();
        if cell.is_empty() && rec.len() <= 1 {
            continue;
        }
        out.push(cell.to_string());
    }
    Ok(out)
}

/// Writes a table as CSV using shortest round-trip float formatting.
pub fn write_table_csv(table: &Table, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(table.n_rows() * table.n_cols() * 8);
    for row in table.rows() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Writes `labels.csv`, one CSV per view and `manifest.json` into `dir`;
/// returns the manifest path. Labels are written as `1` / `-1` with `1`
/// as the positive class.
pub fn write_dataset_csv(data: &MultiviewDataset, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let labels: String = data.labels().iter().map(|y| format!("{y}\n")).collect();
    let labels_path = dir.join("labels.csv");
    std::fs::write(&labels_path, labels).map_err(|e| Error::io(&labels_path, e))?;
    let mut views = Vec::new();
    for (v, name) in data.view_names().iter().enumerate() {
        let file = format!("view_{v}.csv");
        write_table_csv(data.view(v), &dir.join(&file))?;
        views.push(ViewSpec {
            name: name.clone(),
            path: file.into(),
        });
    }
    let manifest = DatasetManifest {
        labels: "labels.csv".into(),
        views,
        positive_class: Some("1".into()),
        format: DataFormat::Csv,
        header: false,
        images: None,
        overlap: None,
        limit: None,
        seed: None,
        base_dir: dir.to_path_buf(),
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
