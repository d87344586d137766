//! CSV files: trajectories (`k,t,state...,energy,step_distance`), convergence
//! points and diagnostics. Floats use the shortest round-trip representation.

use std::path::Path;

use gflow_core::flow::Trajectory;
use gflow_core::model::EnergyModel;

use crate::config::Space;
use crate::error::CliError;

/// Names of the state columns for a space with `n` coordinates.
pub fn state_labels(space: Space, n: usize) -> Vec<String> {
    match space {
        Space::HalfLine => vec!["u".into()],
        Space::Sphere => vec!["x".into(), "y".into(), "z".into()],
        Space::HilbertRd => (1..=n).map(|i| format!("u{i}")).collect(),
        Space::WassersteinIcdf => (1..=n).map(|i| format!("X{i}")).collect(),
    }
}

pub fn float(x: f64) -> String {
    format!("{x:?}")
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, CliError> {
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

pub fn trajectory_csv<M: EnergyModel>(model: &M, space: Space, traj: &Trajectory<M::Point>) -> Result<Vec<u8>, CliError> {
    let mut w = writer();
    let mut header = vec!["k".to_string(), "t".to_string()];
    header.extend(state_labels(space, model.coordinate_count()));
    header.push("energy".into());
    header.push("step_distance".into());
    w.write_record(&header).map_err(csv_err)?;
    for (k, p) in traj.states().iter().enumerate() {
        let mut row = vec![k.to_string(), float(k as f64 * traj.tau())];
        row.extend(model.coordinates(p).into_iter().map(float));
        row.push(float(model.energy(p)));
        row.push(if k == 0 {
            String::new()
        } else {
            float(model.distance(traj.state(k - 1), p))
        });
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

/// Rows of a trajectory file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
}

impl TrajectoryTable {
    /// Step size recovered from the first step.
    pub fn tau(&self) -> Option<f64> {
        self.times.get(1).copied()
    }
}

pub fn read_trajectory(path: &Path) -> Result<TrajectoryTable, CliError> {
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let n = header.len();
    if n < 5 || &header[0] != "k" || &header[1] != "t" || &header[n - 2] != "energy" || &header[n - 1] != "step_distance" {
        return Err(bad("header must read k,t,state...,energy,step_distance".into()));
    }
    let mut table = TrajectoryTable {
        times: Vec::new(),
        states: Vec::new(),
        energies: Vec::new(),
    };
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| -> Result<f64, CliError> {
            record[i]
                .parse::<f64>()
                .map_err(|_| bad(format!("row {row}: column {} is not a number", &header[i])))
        };
        let k: usize = record[0].parse().map_err(|_| bad(format!("row {row}: bad step index")))?;
        if k != row {
            return Err(bad(format!("row {row}: step index {k} out of sequence")));
        }
        table.times.push(num(1)?);
        table.states.push((2..n - 2).map(num).collect::<Result<_, _>>()?);
        table.energies.push(num(n - 2)?);
    }
    if table.states.len() < 2 {
        return Err(bad("a trajectory needs at least two states".into()));
    }
    Ok(table)
}

pub fn convergence_csv(rows: &[(String, f64, f64)]) -> Result<Vec<u8>, CliError> {
    let mut w = writer();
    w.write_record(["scheme", "tau", "mean_error"]).map_err(csv_err)?;
    for (scheme, tau, err) in rows {
        w.write_record([scheme.clone(), float(*tau), float(*err)]).map_err(csv_err)?;
    }
    finish(w)
}

/// One line of `diagnostics.csv`.
#[derive(Debug, Clone)]
pub struct DiagnosticsRow {
    pub scheme: String,
    pub tau: f64,
    pub check: String,
    pub worst_step: Option<usize>,
    pub worst_residual: Option<f64>,
    pub slack: Option<f64>,
    pub passed: bool,
}

pub fn diagnostics_csv(rows: &[DiagnosticsRow]) -> Result<Vec<u8>, CliError> {
    let mut w = writer();
    w.write_record(["scheme", "tau", "check", "worst_step", "worst_residual", "slack", "verdict"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.scheme.clone(),
            float(r.tau),
            r.check.clone(),
            r.worst_step.map(|k| k.to_string()).unwrap_or_default(),
            r.worst_residual.map(float).unwrap_or_default(),
            r.slack.map(float).unwrap_or_default(),
            if r.passed { "PASS" } else { "FAIL" }.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    use std::io::Write;
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}
