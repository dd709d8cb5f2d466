//! CSV ingestion into a [`ClusteredDataset`].

use std::collections::HashMap;
use std::path::Path;

use mlknock::knockgen::{detect_kinds, FeatureKind};
use mlknock::multilevel::ClusteredDataset;
use mlknock::DesignMatrix;

use crate::Failure;

const MISSING: [&str; 6] = ["", "na", "nan", "null", "n/a", "."];

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub cluster_col: String,
    pub response_col: String,
    /// Cluster-level predictors. When absent, every predictor that is
    /// constant within each cluster is taken as cluster-level.
    pub level2_cols: Option<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub data: ClusteredDataset,
    /// Original label of cluster id `i`, in order of first appearance.
    pub cluster_labels: Vec<String>,
    pub binary_columns: Vec<String>,
}

impl Ingested {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.cluster_labels.len()];
        for &c in self.data.cluster_id() {
            sizes[c as usize] += 1;
        }
        sizes
    }
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64, Failure> {
    if MISSING.contains(&raw.to_ascii_lowercase().as_str()) {
        return Err(Failure::Input(format!(
            "missing value at row {row} (line {}), column `{column}`",
            row + 1
        )));
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Failure::Input(format!(
            "non-numeric value `{raw}` at row {row} (line {}), column `{column}`",
            row + 1
        ))),
    }
}

// First cluster in which the column takes more than one value.
fn varying_cluster(col: &[f64], cluster: &[usize], clusters: usize) -> Option<usize> {
    let mut first: Vec<Option<f64>> = vec![None; clusters];
    for (&v, &g) in col.iter().zip(cluster) {
        match first[g] {
            None => first[g] = Some(v),
            Some(f) if f != v => return Some(g),
            Some(_) => {}
        }
    }
    None
}

/// Reads a CSV with a header row. The cluster column may hold integers or
/// strings; ids are assigned in order of first appearance. Rows are grouped
/// by cluster, keeping their relative order.
pub fn ingest_csv(path: &Path, options: &IngestOptions) -> Result<Ingested, Failure> {
    let input = |e: csv::Error| Failure::Input(format!("{}: {e}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(input)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(input)?
        .iter()
        .map(str::to_string)
        .collect();
    for (i, h) in header.iter().enumerate() {
        if header[..i].contains(h) {
            return Err(Failure::Input(format!("duplicate column `{h}` in header")));
        }
    }
    let find = |name: &str, flag: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Failure::Input(format!("{flag} column `{name}` not found in header")))
    };
    let cluster_at = find(&options.cluster_col, "cluster")?;
    let response_at = find(&options.response_col, "response")?;
    if cluster_at == response_at {
        return Err(Failure::Input(
            "cluster and response columns must differ".into(),
        ));
    }
    let predictors: Vec<usize> = (0..header.len())
        .filter(|&c| c != cluster_at && c != response_at)
        .collect();
    let names: Vec<String> = predictors.iter().map(|&c| header[c].clone()).collect();

    let mut labels: Vec<String> = Vec::new();
    let mut label_id: HashMap<String, usize> = HashMap::new();
    let mut cluster = Vec::new();
    let mut y = Vec::new();
    let mut columns = vec![Vec::new(); predictors.len()];
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(input)?;
        let row = i + 1;
        let label = &record[cluster_at];
        if MISSING.contains(&label.to_ascii_lowercase().as_str()) {
            return Err(Failure::Input(format!(
                "missing value at row {row} (line {}), column `{}`",
                row + 1,
                header[cluster_at]
            )));
        }
        let id = match label_id.get(label) {
            Some(&id) => id,
            None => {
                labels.push(label.to_string());
                label_id.insert(label.to_string(), labels.len() - 1);
                labels.len() - 1
            }
        };
        cluster.push(id);
        y.push(parse_cell(&record[response_at], row, &header[response_at])?);
        for (col, &c) in columns.iter_mut().zip(&predictors) {
            col.push(parse_cell(&record[c], row, &header[c])?);
        }
    }
    if y.is_empty() {
        return Err(Failure::Input(format!("{}: no data rows", path.display())));
    }

    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by_key(|&i| cluster[i]);
    let cluster: Vec<usize> = order.iter().map(|&i| cluster[i]).collect();
    let y: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let columns: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| order.iter().map(|&i| c[i]).collect())
        .collect();

    let varies = |k: usize| varying_cluster(&columns[k], &cluster, labels.len());
    let level2: Vec<bool> = match &options.level2_cols {
        None => (0..names.len()).map(|k| varies(k).is_none()).collect(),
        Some(list) => {
            let mut flags = vec![false; names.len()];
            for name in list {
                let k = names.iter().position(|n| n == name).ok_or_else(|| {
                    if *name == options.cluster_col || *name == options.response_col {
                        Failure::Input(format!("`{name}` cannot be a level-2 predictor"))
                    } else {
                        Failure::Input(format!("level-2 column `{name}` not found in header"))
                    }
                })?;
                if let Some(g) = varies(k) {
                    return Err(Failure::Input(format!(
                        "level-2 column `{name}` varies within cluster {}",
                        labels[g]
                    )));
                }
                flags[k] = true;
            }
            for (k, name) in names.iter().enumerate() {
                if !flags[k] && varies(k).is_none() {
                    log::warn!(
                        "column `{name}` is constant within every cluster but not listed as \
                         level 2; its within-cluster part is zero"
                    );
                }
            }
            flags
        }
    };

    let n = y.len();
    let pick = |want: bool| -> Result<DesignMatrix, Failure> {
        let idx: Vec<usize> = (0..names.len()).filter(|&k| level2[k] == want).collect();
        let cols: Vec<Vec<f64>> = idx.iter().map(|&k| columns[k].clone()).collect();
        Ok(DesignMatrix::from_columns(
            idx.iter().map(|&k| names[k].clone()).collect(),
            &cols,
            n,
        )?)
    };
    let x = pick(false)?;
    let z = pick(true)?;
    let binary_columns = [&x, &z]
        .iter()
        .flat_map(|m| {
            detect_kinds(m)
                .into_iter()
                .zip(m.names())
                .filter(|(kind, _)| *kind == FeatureKind::Binary)
                .map(|(_, name)| name.clone())
                .collect::<Vec<_>>()
        })
        .collect();
    let data = ClusteredDataset::new(y, x, z, cluster.iter().map(|&c| c as u64).collect())?;
    Ok(Ingested {
        data,
        cluster_labels: labels,
        binary_columns,
    })
}
