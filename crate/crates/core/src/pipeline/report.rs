//! Influence CSV, fit-report JSON and plot data.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fit::FitReport;
use crate::{Error, Result};

/// One row of the influence CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceRow {
    pub index: usize,
    pub alpha: f64,
    pub alpha_norm: f64,
    /// `inlier` or `outlier`.
    pub label_pred: String,
    pub label_true: Option<String>,
}

fn label(inlier: bool) -> String {
    if inlier { "inlier" } else { "outlier" }.to_string()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::schema(format!("{}: {e}", path.display()))
}

/// Columns `index, alpha, alpha_norm, label_pred[, label_true]`, one row per
/// point with the prediction taken at `gamma`.
pub fn write_influence_csv(
    path: &Path,
    alphas: &[f64],
    gamma: f64,
    labels_true: Option<&[bool]>,
) -> Result<()> {
    let file = fs::File::create(path)?;
    influence_csv(file, alphas, gamma, labels_true).map_err(|e| match e {
        Error::Schema(msg) => Error::schema(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// [`write_influence_csv`] into any writer.
pub fn influence_csv<W: Write>(
    writer: W,
    alphas: &[f64],
    gamma: f64,
    labels_true: Option<&[bool]>,
) -> Result<()> {
    if labels_true.is_some_and(|t| t.len() != alphas.len()) {
        return Err(Error::usage(
            "label count differs from the number of influences",
        ));
    }
    let normalized = crate::influence::normalize(alphas);
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["index", "alpha", "alpha_norm", "label_pred"];
    if labels_true.is_some() {
        header.push("label_true");
    }
    let schema = |e: csv::Error| Error::schema(e.to_string());
    w.write_record(&header).map_err(schema)?;
    for (i, (a, an)) in alphas.iter().zip(&normalized).enumerate() {
        let mut rec = vec![
            i.to_string(),
            a.to_string(),
            an.to_string(),
            label(*an <= gamma),
        ];
        if let Some(t) = labels_true {
            rec.push(label(t[i]));
        }
        w.write_record(&rec).map_err(schema)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_influence_csv(path: &Path) -> Result<Vec<InfluenceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

pub fn read_report(path: &Path) -> Result<FitReport> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::schema(format!("{}: {e}", path.display())))
}

pub fn emit_report(report: &FitReport, path: &Path) -> Result<()> {
    fs::write(path, report.to_json()?)?;
    Ok(())
}

/// Writes `influence_sorted.csv` (rank, index, normalised influence, true
/// label when known) in ascending order of influence and `influence.gp`, a
/// gnuplot script drawing it with the threshold line.
pub fn write_plot_data(dir: &Path, report: &FitReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    let data_path = dir.join("influence_sorted.csv");
    let mut order: Vec<usize> = (0..report.n).collect();
    order.sort_by(|&i, &j| {
        report.alphas_normalized[i]
            .total_cmp(&report.alphas_normalized[j])
            .then(i.cmp(&j))
    });
    let mut w = csv::Writer::from_path(&data_path).map_err(|e| csv_error(&data_path, e))?;
    let mut header = vec!["rank", "index", "alpha_norm"];
    if report.labels_true.is_some() {
        header.push("label_true");
    }
    w.write_record(&header)
        .map_err(|e| csv_error(&data_path, e))?;
    for (rank, &i) in order.iter().enumerate() {
        let mut rec = vec![
            rank.to_string(),
            i.to_string(),
            report.alphas_normalized[i].to_string(),
        ];
        if let Some(t) = &report.labels_true {
            rec.push(label(t[i]));
        }
        w.write_record(&rec).map_err(|e| csv_error(&data_path, e))?;
    }
    w.flush()?;

    let color = if report.labels_true.is_some() {
        "using 1:3:(strcol(4) eq \"inlier\" ? 0x2266cc : 0xcc2222) with points pt 7 lc rgb variable"
    } else {
        "using 1:3 with points pt 7"
    };
    let script = format!(
        "# normalised influence of each point, sorted ascending\n\
         set datafile separator ','\n\
         set key off\n\
         set xlabel 'point (sorted)'\n\
         set ylabel 'normalised influence'\n\
         set yrange [0:1.05]\n\
         set title '{kind}, N = {n}, eps = {eps}, {method:?}'\n\
         set arrow from graph 0, first {gamma} to graph 1, first {gamma} nohead dt 2\n\
         plot 'influence_sorted.csv' every ::1 {color}\n",
        kind = report.kind.name(),
        n = report.n,
        eps = report.eps,
        method = report.method,
        gamma = report.gamma,
    );
    fs::write(dir.join("influence.gp"), script)?;
    Ok(())
}
