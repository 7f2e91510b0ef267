//! Result files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;
use crate::herald::HeraldRow;
use crate::svg::Plot;
use crate::sweep::{series, SweepRecord, Variant};

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io(dir, e))
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io(path, e))
}

pub fn write_sweep(dir: &Path, rows: &[SweepRecord], svg: bool) -> Result<Vec<PathBuf>, CliError> {
    let mut written = vec![dir.join("sweep.csv")];
    write_csv(&written[0], rows)?;
    if svg {
        let mut plot = Plot::new("Stokes/anti-Stokes cross-correlation", "delay (ps)", "g2");
        for v in Variant::ALL {
            let s = series(rows, v);
            if !s.is_empty() {
                plot = plot.with_series(v.tag(), s);
            }
        }
        let path = dir.join("sweep.svg");
        write_text(&path, &plot.render())?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_herald(dir: &Path, rows: &[HeraldRow], svg: bool) -> Result<Vec<PathBuf>, CliError> {
    let mut written = vec![dir.join("herald.csv")];
    write_csv(&written[0], rows)?;
    if svg {
        let col = |f: fn(&HeraldRow) -> f64| rows.iter().map(|r| (r.t_ps, f(r))).collect::<Vec<_>>();
        let pops = Plot::new("Heralded phonon populations", "time after herald (ps)", "probability")
            .with_series("P0 b1", col(|r| r.p0_b1))
            .with_series("P1 b1", col(|r| r.p1_b1))
            .with_series("P2 b1", col(|r| r.p2_b1))
            .with_series("P0 b2", col(|r| r.p0_b2))
            .with_series("P1 b2", col(|r| r.p1_b2))
            .with_series("P2 b2", col(|r| r.p2_b2));
        let en = Plot::new("Heralded log-negativity", "time after herald (ps)", "E_N").with_series("E_N", col(|r| r.e_n));
        for (name, plot) in [("herald_populations.svg", pops), ("herald_log_negativity.svg", en)] {
            let path = dir.join(name);
            write_text(&path, &plot.render())?;
            written.push(path);
        }
    }
    Ok(written)
}
