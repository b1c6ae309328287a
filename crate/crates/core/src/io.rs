//! File formats: response CSVs with a family header, 0/1 latent and
//! measurement CSVs, parameter and graph JSON, and benchmark CSV outputs.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graphs::GraphJson;
use crate::model::{
    DataMatrix, LatentMatrix, ModelParams, ParamsJson, QMatrix, ResponseFamily,
};
use crate::pipeline::BenchReport;

/// Write observations with one header row naming each column's family.
pub fn write_x_csv(path: &Path, x: &DataMatrix, families: &[ResponseFamily]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(families.iter().map(|f| f.name()))?;
    for i in 0..x.n() {
        w.write_record(x.row(i).iter().map(|v| format!("{v}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Read observations; the header names each column's family.
pub fn read_x_csv(path: &Path) -> Result<(DataMatrix, Vec<ResponseFamily>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let families: Vec<ResponseFamily> = r
        .headers()?
        .iter()
        .map(ResponseFamily::parse)
        .collect::<Result<_>>()?;
    let j = families.len();
    let mut values = Vec::new();
    let mut n = 0usize;
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != j {
            return Err(Error::Io(format!(
                "row {n} has {} fields, expected {j}",
                rec.len()
            )));
        }
        for field in rec.iter() {
            values.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Io(format!("bad number '{field}': {e}")))?,
            );
        }
        n += 1;
    }
    Ok((DataMatrix::new(n, j, values)?, families))
}

/// Write a 0/1 matrix without a header.
fn write_binary_csv(path: &Path, rows: usize, cols: usize, get: impl Fn(usize, usize) -> u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for i in 0..rows {
        w.write_record((0..cols).map(|c| get(i, c).to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn read_binary_csv(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut bits = Vec::new();
    let mut rows = 0usize;
    let mut cols = 0usize;
    for rec in r.records() {
        let rec = rec?;
        if rows == 0 {
            cols = rec.len();
        } else if rec.len() != cols {
            return Err(Error::Io(format!("ragged row {rows} in {}", path.display())));
        }
        for field in rec.iter() {
            match field.trim() {
                "0" => bits.push(0),
                "1" => bits.push(1),
                other => return Err(Error::Io(format!("expected 0/1, got '{other}'"))),
            }
        }
        rows += 1;
    }
    Ok((rows, cols, bits))
}

pub fn write_z_csv(path: &Path, z: &LatentMatrix) -> Result<()> {
    write_binary_csv(path, z.n(), z.k(), |i, c| z.get(i, c))
}

pub fn read_z_csv(path: &Path) -> Result<LatentMatrix> {
    let (n, k, bits) = read_binary_csv(path)?;
    LatentMatrix::new(n, k, bits)
}

pub fn write_q_csv(path: &Path, q: &QMatrix) -> Result<()> {
    write_binary_csv(path, q.j(), q.k(), |j, c| u8::from(q.get(j, c)))
}

pub fn read_q_csv(path: &Path) -> Result<QMatrix> {
    let (j, k, bits) = read_binary_csv(path)?;
    QMatrix::new(j, k, bits)
}

pub fn write_params_json(path: &Path, params: &ModelParams) -> Result<()> {
    let js = ParamsJson::from(params);
    fs::write(path, serde_json::to_string_pretty(&js)?)?;
    Ok(())
}

pub fn read_params_json(path: &Path) -> Result<ModelParams> {
    let js: ParamsJson = serde_json::from_str(&fs::read_to_string(path)?)?;
    js.to_params()
}

pub fn write_graph_json(path: &Path, graph: &GraphJson) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(graph)?)?;
    Ok(())
}

pub fn read_graph_json(path: &Path) -> Result<GraphJson> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// A families schema file: a JSON array of family names.
pub fn read_families_schema(path: &Path) -> Result<Vec<ResponseFamily>> {
    let names: Vec<String> = serde_json::from_str(&fs::read_to_string(path)?)?;
    names.iter().map(|s| ResponseFamily::parse(s)).collect()
}

/// Benchmark outputs: one row per replicate and one per cell.
pub fn write_bench_csvs(dir: &Path, report: &BenchReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("results.csv"))?;
    w.write_record([
        "dag", "q", "family", "n", "replicate", "shd", "q_match", "seconds",
    ])?;
    for r in &report.rows {
        w.write_record([
            r.dag.clone(),
            r.q.clone(),
            r.family.clone(),
            r.n.to_string(),
            r.replicate.to_string(),
            r.shd.map(|s| s.to_string()).unwrap_or_default(),
            r.q_match.map(|m| m.to_string()).unwrap_or_default(),
            format!("{:.3}", r.seconds),
        ])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record([
        "dag",
        "q",
        "family",
        "n",
        "replicates",
        "failures",
        "mean_shd",
        "q_match_rate",
        "mean_seconds",
    ])?;
    for s in &report.summary {
        w.write_record([
            s.dag.clone(),
            s.q.clone(),
            s.family.clone(),
            s.n.to_string(),
            s.replicates.to_string(),
            s.failures.to_string(),
            format!("{:.4}", s.mean_shd),
            format!("{:.4}", s.q_match_rate),
            format!("{:.3}", s.mean_seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}
