use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// Writes per-trial records as CSV.
pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(Error::Csv)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `<stem>_trials.csv`, `<stem>_summary.csv` and `<stem>.txt` into `dir`.
pub fn emit<T: Serialize, S: Serialize>(
    dir: &Path,
    stem: &str,
    trials: &[T],
    summary: &S,
    table: &str,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = vec![
        dir.join(format!("{stem}_trials.csv")),
        dir.join(format!("{stem}_summary.csv")),
        dir.join(format!("{stem}.txt")),
    ];
    write_records(&files[0], trials)?;
    write_records(&files[1], std::slice::from_ref(summary))?;
    write_text(&files[2], table)?;
    Ok(files)
}

/// Plain two-column text table.
pub fn table(title: &str, rows: &[(&str, String)], footer: &[&str]) -> String {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut s = String::new();
    let _ = writeln!(s, "{title}");
    let _ = writeln!(s, "{}", "-".repeat(title.len()));
    for (k, v) in rows {
        let _ = writeln!(s, "{k:<width$}  {v}");
    }
    for f in footer {
        let _ = writeln!(s, "\n{f}");
    }
    s
}

pub fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Nearest-rank percentile, `q` in (0, 1].
pub fn percentile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}
