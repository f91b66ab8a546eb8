//! CSV rows and the JSON diagnostics sidecar.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::run::{Row, RunReport};

pub const HEADER: &str = "time,mode,mean_n,variance,mandel_q,purity,top_level_population";

fn num(x: f64) -> String {
    // 12 significant digits.
    format!("{x:.11e}")
}

fn row_line(row: &Row, with_deviation: bool) -> String {
    let mut line = format!(
        "{},{},{},{},{},{},{}",
        num(row.time),
        row.mode,
        num(row.mean_n),
        num(row.variance),
        row.mandel_q.map(num).unwrap_or_default(),
        num(row.purity),
        num(row.top_level_population),
    );
    if with_deviation {
        line.push(',');
        if let Some(dev) = row.dev_mean_n {
            line.push_str(&num(dev));
        }
    }
    line
}

pub fn write_csv<W: Write>(mut out: W, rows: &[Row], with_deviation: bool) -> io::Result<()> {
    write!(out, "{HEADER}")?;
    if with_deviation {
        write!(out, ",dev_mean_n")?;
    }
    writeln!(out)?;
    for row in rows {
        writeln!(out, "{}", row_line(row, with_deviation))?;
    }
    out.flush()
}

/// The sidecar lives next to the CSV with a `.json` extension.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Writes `path` (CSV) and its JSON sidecar.
pub fn write_report(report: &RunReport, path: &Path) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let file = io::BufWriter::new(fs::File::create(path)?);
    write_csv(file, &report.rows, report.has_deviation_column)?;
    let json = serde_json::to_string_pretty(report).map_err(io::Error::other)?;
    fs::write(sidecar_path(path), json + "\n")
}
