use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::SweepResult;

pub const SWEEP_CSV_HEADER: &str = "F_s,S_size,rmse,omega_c,Omega_c,rank_cert,clamped,failed";

// 17 significant digits: parses back to the same f64.
fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// One row per cell in result order.
pub fn write_sweep_csv(result: &SweepResult, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for c in &result.cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            num(c.fs),
            c.size,
            num(c.rmse),
            num(c.omega_c),
            num(c.time_cutoff),
            num(c.rank_certificate),
            c.clamped,
            c.failed()
        )?;
    }
    Ok(())
}

fn distinct<T: PartialEq + Copy>(values: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Writes `<stem>_surface.dat` (F_s, |S|, rmse), `<stem>_vs_fs.dat` (one
/// block per |S|) and `<stem>_vs_size.dat` (one block per F_s). Blocks are
/// separated by two blank lines; failed cells appear as NaN.
pub fn write_plot_data(
    result: &SweepResult,
    dir: impl AsRef<Path>,
    stem: &str,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let sizes = distinct(result.cells.iter().map(|c| c.size));
    let rates = distinct(result.cells.iter().map(|c| c.fs));

    let mut surface = String::from("# F_s S_size rmse\n");
    for c in &result.cells {
        let _ = writeln!(surface, "{} {} {}", num(c.fs), c.size, num(c.rmse));
    }

    let mut vs_fs = String::new();
    for &s in &sizes {
        let _ = writeln!(vs_fs, "# S_size = {s}\n# F_s rmse");
        for c in result.cells.iter().filter(|c| c.size == s) {
            let _ = writeln!(vs_fs, "{} {}", num(c.fs), num(c.rmse));
        }
        vs_fs.push_str("\n\n");
    }

    let mut vs_size = String::new();
    for &f in &rates {
        let _ = writeln!(vs_size, "# F_s = {}\n# S_size rmse", num(f));
        for c in result.cells.iter().filter(|c| c.fs == f) {
            let _ = writeln!(vs_size, "{} {}", c.size, num(c.rmse));
        }
        vs_size.push_str("\n\n");
    }

    let mut written = Vec::new();
    for (suffix, text) in [("surface", surface), ("vs_fs", vs_fs), ("vs_size", vs_size)] {
        let path = dir.join(format!("{stem}_{suffix}.dat"));
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DynamicsModel;
    use crate::experiments::{CellResult, SweepMeta};

    fn result() -> SweepResult {
        let cell = |fs: f64, size: usize, rmse: f64, failure: Option<&str>| CellResult {
            fs_multiple: fs,
            fs,
            size,
            benchmark: size == 3,
            rmse,
            omega_c: 0.5,
            time_cutoff: 10.0,
            rank_certificate: 0.25,
            clamped: false,
            undersampled: false,
            failure: failure.map(String::from),
            wall_time: 1.0,
        };
        SweepResult {
            meta: SweepMeta {
                seed: 1,
                n: 3,
                model: DynamicsModel::pd(1.0, 0.1).unwrap(),
                lambda_max: 1.0,
                basis_condition: 1.0,
                y0_norm: 1.0,
                epsilon: 1e-3,
                omega_c: 0.5,
                band_size: 2,
                time_cutoff: 10.0,
                clamped: false,
                horizon: 5.0,
                eval_step: 0.1,
            },
            cells: vec![
                cell(1.0, 2, 0.1, None),
                cell(1.0, 3, 0.05, None),
                cell(2.0, 2, f64::NAN, Some("x")),
                cell(2.0, 3, 1e-9, None),
            ],
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_sweep_csv(&result(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SWEEP_CSV_HEADER);
        assert_eq!(lines.len(), 5);
        assert_eq!(
            lines[1],
            "1.0000000000000000e0,2,1.0000000000000001e-1,5.0000000000000000e-1,1.0000000000000000e1,2.5000000000000000e-1,false,false"
        );
        assert!(lines[3].contains(",NaN,") && lines[3].ends_with(",true"));
        let parsed: f64 = lines[4].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(parsed, 1e-9);
    }

    #[test]
    fn plot_files() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_plot_data(&result(), dir.path(), "fig").unwrap();
        assert_eq!(paths.len(), 3);
        let vs_fs = fs::read_to_string(dir.path().join("fig_vs_fs.dat")).unwrap();
        assert_eq!(vs_fs.matches("# S_size").count(), 2);
        let vs_size = fs::read_to_string(dir.path().join("fig_vs_size.dat")).unwrap();
        assert!(
            vs_size.contains("3 1.0000000000000001e-9")
                || vs_size.contains("3 1.0000000000000000e-9")
        );
    }
}
