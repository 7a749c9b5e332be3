//! Rendering of evaluation reports as text tables, JSON and two-column
//! numeric series.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::explain::ShapleyReport;
use crate::safe::{SafeReport, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Table,
    Json,
    Series,
}

impl std::str::FromStr for Format {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "table" | "text" => Ok(Format::Table),
            "json" => Ok(Format::Json),
            "series" => Ok(Format::Series),
            other => Err(crate::Error::InvalidParameter(format!("unknown format '{other}'"))),
        }
    }
}

/// `mean (sd)` with three decimals.
pub fn cell(s: &Summary) -> String {
    format!("{:.3} ({:.3})", s.mean, s.sd)
}

/// Aligns cells in columns: the first `left` columns flush left, the rest
/// flush right.
fn render(rows: &[Vec<String>], left: usize) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let mut line = String::new();
        for (c, text) in row.iter().enumerate() {
            if c > 0 {
                line.push_str("  ");
            }
            let pad = widths[c] - text.chars().count();
            if c < left {
                line.push_str(text);
                line.extend(std::iter::repeat(' ').take(pad));
            } else {
                line.extend(std::iter::repeat(' ').take(pad));
                line.push_str(text);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}

/// One row per metric (RGA, RGR, then RGE per feature) and one column per
/// target and model.
pub fn safe_table(reports: &[SafeReport]) -> String {
    let mut header = vec!["Metric".to_string()];
    let mut columns = Vec::new();
    for r in reports {
        for m in &r.models {
            header.push(format!("{} {}", r.metadata.label, m.model));
            columns.push(m);
        }
    }
    let mut features: Vec<&str> = Vec::new();
    for r in reports {
        for f in &r.metadata.features {
            if !features.contains(&f.as_str()) {
                features.push(f);
            }
        }
    }
    let mut rows = vec![header];
    rows.push(
        std::iter::once("RGA".to_string())
            .chain(columns.iter().map(|m| cell(&m.rga)))
            .collect(),
    );
    rows.push(
        std::iter::once("RGR".to_string())
            .chain(columns.iter().map(|m| cell(&m.rgr)))
            .collect(),
    );
    for f in features {
        let mut row = vec![format!("RGE {f}")];
        for m in &columns {
            row.push(
                m.rge
                    .iter()
                    .find(|s| s.feature == f)
                    .map_or_else(|| "-".to_string(), |s| cell(&s.contribution)),
            );
        }
        rows.push(row);
    }
    render(&rows, 1)
}

/// Shapley means and percentage importances (± sd across folds) per target
/// and feature, one column pair per model.
pub fn shapley_table(reports: &[ShapleyReport]) -> String {
    let mut models = Vec::new();
    let mut labels: Vec<&str> = Vec::new();
    for r in reports {
        if !models.contains(&r.model) {
            models.push(r.model);
        }
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }
    let mut header = vec!["Target".to_string(), "Feature".to_string()];
    for m in &models {
        header.push(format!("{m} Shapley"));
        header.push(format!("{m} Imp %"));
    }
    let mut rows = vec![header];
    for label in labels {
        let group: Vec<&ShapleyReport> = reports.iter().filter(|r| r.label == label).collect();
        let mut features: Vec<&str> = Vec::new();
        for r in &group {
            for f in &r.features {
                if !features.contains(&f.as_str()) {
                    features.push(f);
                }
            }
        }
        for f in features {
            let mut row = vec![label.to_string(), f.to_string()];
            for m in &models {
                let s = group
                    .iter()
                    .find(|r| r.model == *m)
                    .and_then(|r| r.summary.iter().find(|s| s.feature == f));
                match s {
                    Some(s) => {
                        row.push(format!("{:.3} ± {:.3}", s.shapley.mean, s.shapley.sd));
                        row.push(format!("{:.2} ± {:.2}", s.importance.mean, s.importance.sd));
                    }
                    None => {
                        row.push("-".into());
                        row.push("-".into());
                    }
                }
            }
            rows.push(row);
        }
    }
    render(&rows, 2)
}

fn file_stem(parts: &[&str]) -> String {
    parts
        .iter()
        .map(|p| {
            p.chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
                .collect::<String>()
        })
        .collect::<Vec<_>>()
        .join("_")
}

fn series(values: impl Iterator<Item = (usize, f64)>) -> String {
    let mut out = String::new();
    for (i, v) in values {
        writeln!(out, "{i}\t{v}").expect("writing to a string");
    }
    out
}

/// Per-fold values as `(file name, "fold<TAB>value" lines)` pairs.
pub fn safe_series(report: &SafeReport) -> Vec<(String, String)> {
    let label = report.metadata.label.as_str();
    let mut files = Vec::new();
    for m in &report.models {
        let model = m.model.label();
        files.push((
            format!("{}.tsv", file_stem(&[label, model, "rga"])),
            series(m.folds.iter().map(|f| (f.fold, f.rga))),
        ));
        files.push((
            format!("{}.tsv", file_stem(&[label, model, "rgr"])),
            series(m.folds.iter().map(|f| (f.fold, f.rgr))),
        ));
        for (k, feature) in m.rge.iter().enumerate() {
            files.push((
                format!("{}.tsv", file_stem(&[label, model, "rge", &feature.feature])),
                series(m.folds.iter().map(|f| (f.fold, f.rge[k].contribution))),
            ));
        }
    }
    files
}

pub fn shapley_series(report: &ShapleyReport) -> Vec<(String, String)> {
    report
        .features
        .iter()
        .enumerate()
        .map(|(k, feature)| {
            (
                format!(
                    "{}.tsv",
                    file_stem(&[&report.label, report.model.label(), "importance", feature])
                ),
                series(report.folds.iter().map(|f| (f.fold, f.importance[k]))),
            )
        })
        .collect()
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn read_safe_reports(path: impl AsRef<Path>) -> Result<Vec<SafeReport>> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn write(path: PathBuf, content: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&path, content)?;
    written.push(path);
    Ok(())
}

/// Writes `<stem>.txt`, `<stem>.json` and `series/*.tsv` under `dir` for
/// the requested formats; returns the paths written.
pub fn emit_report(reports: &[SafeReport], formats: &[Format], dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for f in formats {
        match f {
            Format::Table => write(dir.join(format!("{stem}.txt")), &safe_table(reports), &mut written)?,
            Format::Json => write(dir.join(format!("{stem}.json")), &to_json(reports)?, &mut written)?,
            Format::Series => {
                for r in reports {
                    for (name, content) in safe_series(r) {
                        write(dir.join("series").join(name), &content, &mut written)?;
                    }
                }
            }
        }
    }
    Ok(written)
}

pub fn emit_shapley(reports: &[ShapleyReport], formats: &[Format], dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for f in formats {
        match f {
            Format::Table => write(dir.join(format!("{stem}.txt")), &shapley_table(reports), &mut written)?,
            Format::Json => write(dir.join(format!("{stem}.json")), &to_json(reports)?, &mut written)?,
            Format::Series => {
                for r in reports {
                    for (name, content) in shapley_series(r) {
                        write(dir.join("series").join(name), &content, &mut written)?;
                    }
                }
            }
        }
    }
    Ok(written)
}
