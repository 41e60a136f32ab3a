//! On-disk formats: trajectory and sample CSV, plan and spectrum JSON.
//!
//! Floats are written with 17 significant digits so every file reads back
//! to the same bits.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{Trajectory, TrajectoryMeta};
use crate::error::{Error, Result};
use crate::sampling::{SampleRecord, SamplingPlan};
use crate::spectral::SpectrumSummary;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// A time column followed by named value columns.
struct Table {
    times: Vec<f64>,
    columns: Vec<String>,
    values: DMatrix<f64>,
}

fn write_table(
    mut out: impl Write,
    columns: &[String],
    times: &[f64],
    values: &DMatrix<f64>,
) -> std::io::Result<()> {
    write!(out, "t")?;
    for c in columns {
        write!(out, ",{c}")?;
    }
    writeln!(out)?;
    for (k, t) in times.iter().enumerate() {
        write!(out, "{}", num(*t))?;
        for v in values.row(k).iter() {
            write!(out, ",{}", num(*v))?;
        }
        writeln!(out)?;
    }
    out.flush()
}

fn read_table(input: impl Read, what: &str) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| Error::format(what, e.to_string()))?
        .clone();
    if header.get(0) != Some("t") {
        return Err(Error::format(
            format!("{what} header"),
            "first column must be t",
        ));
    }
    let columns: Vec<String> = header.iter().skip(1).map(String::from).collect();
    let mut times = Vec::new();
    let mut flat = Vec::new();
    for (k, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::format(format!("{what} row {}", k + 1), e.to_string()))?;
        let mut fields = row.iter().map(|f| {
            f.trim().parse::<f64>().map_err(|_| {
                Error::format(
                    format!("{what} row {}", k + 1),
                    format!("not a number: {f:?}"),
                )
            })
        });
        times.push(fields.next().transpose()?.unwrap_or(f64::NAN));
        for v in fields {
            flat.push(v?);
        }
    }
    let values = DMatrix::from_row_slice(times.len(), columns.len(), &flat);
    Ok(Table {
        times,
        columns,
        values,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Header `t,x_0,...,x_{n-1}`, one row per time.
pub fn write_trajectory(traj: &Trajectory, out: impl Write) -> std::io::Result<()> {
    let columns: Vec<String> = (0..traj.n()).map(|i| format!("x_{i}")).collect();
    write_table(out, &columns, &traj.times, &traj.states)
}

/// The metadata is not stored; the step is taken from the first interval.
pub fn read_trajectory(input: impl Read) -> Result<Trajectory> {
    let table = read_table(input, "trajectory")?;
    for (i, c) in table.columns.iter().enumerate() {
        if *c != format!("x_{i}") {
            return Err(Error::format(
                "trajectory header",
                format!("column {} should be x_{i}, got {c}", i + 1),
            ));
        }
    }
    let step = match table.times.as_slice() {
        [t0, t1, ..] => t1 - t0,
        _ => 0.0,
    };
    Trajectory::new(
        table.times,
        table.values,
        TrajectoryMeta {
            model: None,
            seed: None,
            step,
        },
    )
}

pub fn save_trajectory(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_trajectory(traj, create(path)?).map_err(|e| Error::io(path, e))
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Trajectory> {
    let path = path.as_ref();
    read_trajectory(open(path)?)
}

/// Header `t,node_<i>,...`; values are states `x`, so the equilibrium is
/// added to the record's deviations.
pub fn write_samples(
    record: &SampleRecord,
    equilibrium: &DVector<f64>,
    out: impl Write,
) -> Result<()> {
    if let Some(&i) = record.nodes.iter().find(|&&i| i >= equilibrium.len()) {
        return Err(Error::Parameter(format!(
            "node {i} out of range for n = {}",
            equilibrium.len()
        )));
    }
    let columns: Vec<String> = record.nodes.iter().map(|i| format!("node_{i}")).collect();
    let states = DMatrix::from_fn(record.len(), record.nodes.len(), |k, c| {
        record.values[(k, c)] + equilibrium[record.nodes[c]]
    });
    write_table(out, &columns, &record.times(), &states).map_err(|e| Error::io("<samples>", e))
}

/// Inverse of [`write_samples`]: subtracts the equilibrium and checks the
/// time grid is uniform from zero.
pub fn read_samples(input: impl Read, equilibrium: &DVector<f64>) -> Result<SampleRecord> {
    let table = read_table(input, "samples")?;
    let nodes = table
        .columns
        .iter()
        .map(|c| {
            c.strip_prefix("node_")
                .and_then(|i| i.parse::<usize>().ok())
                .filter(|&i| i < equilibrium.len())
                .ok_or_else(|| {
                    Error::format(
                        "samples header",
                        format!("bad node column {c:?} for n = {}", equilibrium.len()),
                    )
                })
        })
        .collect::<Result<Vec<_>>>()?;
    if nodes.is_empty() {
        return Err(Error::format("samples header", "no node columns"));
    }
    let values = DMatrix::from_fn(table.values.nrows(), nodes.len(), |k, c| {
        table.values[(k, c)] - equilibrium[nodes[c]]
    });
    SampleRecord::from_times(&table.times, nodes, values)
}

pub fn save_samples(
    record: &SampleRecord,
    equilibrium: &DVector<f64>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    write_samples(record, equilibrium, &mut out)?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_samples(path: impl AsRef<Path>, equilibrium: &DVector<f64>) -> Result<SampleRecord> {
    let path = path.as_ref();
    read_samples(open(path)?, equilibrium)
}

pub fn plan_to_json(plan: &SamplingPlan) -> String {
    serde_json::to_string_pretty(plan).expect("plan serialization is infallible")
}

pub fn plan_from_json(text: &str) -> Result<SamplingPlan> {
    serde_json::from_str(text).map_err(|e| Error::format("plan", e.to_string()))
}

pub fn save_plan(plan: &SamplingPlan, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, plan_to_json(plan) + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_plan(path: impl AsRef<Path>) -> Result<SamplingPlan> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    plan_from_json(&text).map_err(|e| match e {
        Error::Format { message, .. } => Error::format(path.display().to_string(), message),
        other => other,
    })
}

pub fn spectrum_to_json(summary: &SpectrumSummary) -> String {
    serde_json::to_string_pretty(summary).expect("spectrum serialization is infallible")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trajectory() -> Trajectory {
        let states = DMatrix::from_row_slice(3, 2, &[1.0, 0.1, 0.5, 1.0 / 3.0, 0.25, -2e-17]);
        Trajectory::new(
            vec![0.0, 0.1, 0.2],
            states,
            TrajectoryMeta {
                model: None,
                seed: None,
                step: 0.1,
            },
        )
        .unwrap()
    }

    #[test]
    fn trajectory_round_trip_is_exact() {
        let traj = trajectory();
        let mut buf = Vec::new();
        write_trajectory(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x_0,x_1\n0.0000000000000000e0,1.0000000000000000e0,"));
        let back = read_trajectory(buf.as_slice()).unwrap();
        assert_eq!(back.times, traj.times);
        assert_eq!(back.states, traj.states);
    }

    #[test]
    fn trajectory_rejects_bad_input() {
        assert!(read_trajectory("t,y_0\n0,1\n".as_bytes()).is_err());
        assert!(read_trajectory("t,x_0\n0,abc\n".as_bytes()).is_err());
        assert!(read_trajectory("t,x_0\n0,1\n0.1\n".as_bytes()).is_err());
        assert!(read_trajectory("t,x_0\n0.5,1\n".as_bytes()).is_err());
    }

    #[test]
    fn samples_round_trip_through_state_domain() {
        let eq = DVector::from_vec(vec![10.0, 20.0, 30.0]);
        let values = DMatrix::from_row_slice(3, 2, &[1.0, -1.0, 0.5, 0.25, 0.0, 0.125]);
        let record = SampleRecord::new(4.0, vec![2, 0], values).unwrap();
        let mut buf = Vec::new();
        write_samples(&record, &eq, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,node_2,node_0\n"));
        assert!(text
            .lines()
            .nth(1)
            .unwrap()
            .ends_with(",3.1000000000000000e1,9.0000000000000000e0"));
        let back = read_samples(buf.as_slice(), &eq).unwrap();
        assert_eq!(back, record);
    }

    #[test]
    fn samples_reject_bad_headers_and_grids() {
        let eq = DVector::from_vec(vec![0.0; 3]);
        assert!(read_samples("t,node_5\n0,1\n".as_bytes(), &eq).is_err());
        assert!(read_samples("t,x_0\n0,1\n".as_bytes(), &eq).is_err());
        assert!(read_samples("t\n0\n".as_bytes(), &eq).is_err());
        assert!(read_samples("t,node_0\n".as_bytes(), &eq).is_err());
        assert!(read_samples("t,node_0\n0,1\n0.5,1\n0.7,1\n".as_bytes(), &eq).is_err());
    }
}
