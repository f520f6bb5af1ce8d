//! Machine-readable outputs: per-field score tables as CSV and metric
//! summaries as JSON.
//!
//! Everything written here is a pure function of its inputs — no
//! timestamps, hostnames, or other run-environment leakage — so reports
//! from identical configs and seeds are byte-identical, which is what makes
//! re-running an experiment a meaningful check.

use std::fs;
use std::path::Path;

use serde::Serialize;

use odt_core::net::{evaluate_metrics, Metrics};
use odt_core::sim::{Label, NoiseKind, Split};
use odt_core::{OdtError, Result};

/// One screened field: its manifest identity plus the screen's verdict.
#[derive(Debug, Clone)]
pub struct ScoreRow {
    pub path: String,
    pub split: Split,
    pub truth: Label,
    pub kind: NoiseKind,
    /// Rule screens report the log10 spectral peak; network screens report
    /// the predicted probability of being noisy.
    pub score: f64,
    pub predicted: Label,
}

pub fn label_name(label: Label) -> &'static str {
    match label {
        Label::Clean => "clean",
        Label::Noisy => "noisy",
    }
}

pub fn kind_name(kind: NoiseKind) -> &'static str {
    match kind {
        NoiseKind::None => "none",
        NoiseKind::Fringe => "fringe",
        NoiseKind::Broken => "broken",
    }
}

pub fn split_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Test => "test",
    }
}

/// Writes one CSV row per screened field, in input order.
pub fn write_scores_csv(path: impl AsRef<Path>, rows: &[ScoreRow]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("path,split,truth,kind,score,predicted\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.path,
            split_name(row.split),
            label_name(row.truth),
            kind_name(row.kind),
            row.score,
            label_name(row.predicted),
        ));
    }
    fs::write(path, out).map_err(|e| OdtError::io(path, e))
}

/// Reads the `path` column of rows a previous screen predicted clean.
/// Tolerant of column order as long as the header names `path` and
/// `predicted`.
pub fn read_kept_paths(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| OdtError::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| OdtError::format(path, "empty score table"))?;
    let columns: Vec<&str> = header.split(',').collect();
    let path_col = columns.iter().position(|c| *c == "path").ok_or_else(|| {
        OdtError::format(path, "score table has no `path` column")
    })?;
    let pred_col = columns.iter().position(|c| *c == "predicted").ok_or_else(|| {
        OdtError::format(path, "score table has no `predicted` column")
    })?;
    let mut kept = Vec::new();
    for (number, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(OdtError::format(
                path,
                format!("row {} has {} columns, header has {}", number + 2, fields.len(), columns.len()),
            ));
        }
        if fields[pred_col] == "clean" {
            kept.push(fields[path_col].to_string());
        }
    }
    Ok(kept)
}

/// Metrics over the rows of one split (or all rows), plus per-defect-kind
/// sensitivities. `None` sensitivities mean the subset was empty —
/// unmeasured, not perfect.
#[derive(Debug, Clone, Serialize)]
pub struct SplitReport {
    pub split: String,
    pub records: usize,
    pub metrics: Metrics,
    pub fringe_sensitivity: Option<f64>,
    pub broken_sensitivity: Option<f64>,
}

/// Evaluates score rows restricted to `split` (all rows when `None`).
pub fn split_report(rows: &[ScoreRow], split: Option<Split>) -> Result<SplitReport> {
    let subset: Vec<&ScoreRow> =
        rows.iter().filter(|r| split.is_none_or(|s| r.split == s)).collect();
    if subset.is_empty() {
        return Err(OdtError::validation(match split {
            Some(s) => format!("no rows in the {} split", split_name(s)),
            None => "no rows to evaluate".to_string(),
        }));
    }
    let predicted: Vec<Label> = subset.iter().map(|r| r.predicted).collect();
    let truth: Vec<Label> = subset.iter().map(|r| r.truth).collect();
    let metrics = evaluate_metrics(&predicted, &truth)?;
    Ok(SplitReport {
        split: split.map_or("all", split_name).to_string(),
        records: subset.len(),
        metrics,
        fringe_sensitivity: kind_sensitivity(&subset, NoiseKind::Fringe),
        broken_sensitivity: kind_sensitivity(&subset, NoiseKind::Broken),
    })
}

/// Fraction of this defect kind's noisy rows the screen rejected.
fn kind_sensitivity(rows: &[&ScoreRow], kind: NoiseKind) -> Option<f64> {
    let subset: Vec<_> =
        rows.iter().filter(|r| r.kind == kind && r.truth == Label::Noisy).collect();
    if subset.is_empty() {
        return None;
    }
    let caught = subset.iter().filter(|r| r.predicted == Label::Noisy).count();
    Some(caught as f64 / subset.len() as f64)
}

/// Serializes any report as pretty JSON with a trailing newline.
pub fn write_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| OdtError::format(path, format!("report serialization: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| OdtError::io(path, e))
}

/// Relative path and size of one emitted artifact.
#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
}

/// Lists every file under `root` (sorted, recursive) except `skip`,
/// with `/`-separated paths relative to `root`.
pub fn file_inventory(root: &Path, skip: &Path) -> Result<Vec<FileEntry>> {
    let mut entries = Vec::new();
    walk(root, root, skip, &mut entries)?;
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(entries)
}

fn walk(root: &Path, dir: &Path, skip: &Path, out: &mut Vec<FileEntry>) -> Result<()> {
    let mut children: Vec<_> = fs::read_dir(dir)
        .map_err(|e| OdtError::io(dir, e))?
        .collect::<std::io::Result<_>>()
        .map_err(|e| OdtError::io(dir, e))?;
    children.sort_by_key(|entry| entry.file_name());
    for child in children {
        let path = child.path();
        if path == skip {
            continue;
        }
        let meta = child.metadata().map_err(|e| OdtError::io(&path, e))?;
        if meta.is_dir() {
            walk(root, &path, skip, out)?;
        } else {
            let rel = path
                .strip_prefix(root)
                .expect("walk stays under root")
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            out.push(FileEntry { path: rel, bytes: meta.len() });
        }
    }
    Ok(())
}

// ==== tests ====

#[cfg(test)]
mod tests {
    use super::*;

    fn row(path: &str, split: Split, truth: Label, kind: NoiseKind, predicted: Label) -> ScoreRow {
        ScoreRow { path: path.to_string(), split, truth, kind, score: 0.5, predicted }
    }

    #[test]
    fn csv_round_trips_the_kept_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        let rows = vec![
            row("fields/a.ofc", Split::Train, Label::Clean, NoiseKind::None, Label::Clean),
            row("fields/b.ofc", Split::Test, Label::Noisy, NoiseKind::Fringe, Label::Noisy),
            row("fields/c.ofc", Split::Test, Label::Noisy, NoiseKind::Broken, Label::Clean),
        ];
        write_scores_csv(&path, &rows).unwrap();
        let kept = read_kept_paths(&path).unwrap();
        assert_eq!(kept, vec!["fields/a.ofc".to_string(), "fields/c.ofc".to_string()]);
    }

    #[test]
    fn split_report_counts_per_kind_sensitivity() {
        let rows = vec![
            row("a", Split::Test, Label::Clean, NoiseKind::None, Label::Clean),
            row("b", Split::Test, Label::Noisy, NoiseKind::Fringe, Label::Noisy),
            row("c", Split::Test, Label::Noisy, NoiseKind::Fringe, Label::Clean),
            row("d", Split::Test, Label::Noisy, NoiseKind::Broken, Label::Clean),
            row("e", Split::Train, Label::Noisy, NoiseKind::Broken, Label::Noisy),
        ];
        let report = split_report(&rows, Some(Split::Test)).unwrap();
        assert_eq!(report.records, 4);
        assert_eq!(report.fringe_sensitivity, Some(0.5));
        assert_eq!(report.broken_sensitivity, Some(0.0));
        assert!((report.metrics.accuracy - 0.5).abs() < 1e-12);

        let all = split_report(&rows, None).unwrap();
        assert_eq!(all.records, 5);
        assert_eq!(all.broken_sensitivity, Some(0.5));
        assert!(split_report(&rows[..1], Some(Split::Train)).is_err());
    }

    #[test]
    fn inventory_lists_files_sorted_and_skips_the_summary() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("sub")).unwrap();
        fs::write(dir.path().join("sub/b.bin"), b"12345").unwrap();
        fs::write(dir.path().join("a.txt"), b"xy").unwrap();
        let summary = dir.path().join("summary.json");
        fs::write(&summary, b"{}").unwrap();
        let entries = file_inventory(dir.path(), &summary).unwrap();
        let names: Vec<_> = entries.iter().map(|e| e.path.as_str()).collect();
        assert_eq!(names, vec!["a.txt", "sub/b.bin"]);
        assert_eq!(entries[1].bytes, 5);
    }
}
