//! CSV and JSON writers. Floats are written with 17 significant digits so
//! files round-trip exactly and repeated runs are byte-identical.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use dualsav::driver::Snapshot;
use dualsav::{FlowPreset, RunOutput, RunSummary, StepDiagnostics};
use serde::Serialize;

use crate::CliError;

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn diagnostics_header(constraints: usize) -> Vec<String> {
    let mut header: Vec<String> = [
        "step",
        "time",
        "Q_mesh",
        "e_A",
        "e_L",
        "r_g_sq",
        "r_m_sq",
        "E_geom",
        "gap_g",
        "iso_deficit",
        "newton_iters",
        "min_edge",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=constraints).map(|i| format!("lambda_{i}")));
    header
}

pub fn write_diagnostics(
    path: &Path,
    history: &[StepDiagnostics],
    constraints: usize,
) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let csv_err = |e: csv::Error| CliError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    w.write_record(diagnostics_header(constraints)).map_err(csv_err)?;
    for d in history {
        let mut row = vec![
            d.step.to_string(),
            float(d.time),
            float(d.q_mesh),
            float(d.e_area),
            float(d.e_length),
            float(d.r_g_sq),
            float(d.r_m_sq),
            float(d.e_geom),
            float(d.gap_g),
            float(d.iso_deficit),
            d.newton_iterations.to_string(),
            float(d.min_edge),
        ];
        row.extend(d.lambdas.iter().map(|l| float(*l)));
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w, path)
}

pub fn write_snapshots(path: &Path, snapshots: &[Snapshot]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let csv_err = |e: csv::Error| CliError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    w.write_record(["time", "vertex", "x", "y"]).map_err(csv_err)?;
    for s in snapshots {
        for (j, [x, y]) in s.vertices.iter().enumerate() {
            w.write_record([float(s.time), j.to_string(), float(*x), float(*y)])
                .map_err(csv_err)?;
        }
    }
    finish(w, path)
}

#[derive(Debug, Serialize)]
pub struct WallClock {
    pub total_seconds: f64,
    /// Mean over all steps but the first.
    pub seconds_per_step: f64,
}

#[derive(Debug, Serialize)]
pub struct SummaryRecord<'a> {
    pub summary: &'a RunSummary,
    pub reference_error: Option<f64>,
    pub config: &'a FlowPreset,
    pub snapshot_times: &'a [f64],
    pub wall_clock: WallClock,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes the enabled outputs of one run into `dir`.
pub fn write_run(
    dir: &Path,
    preset: &FlowPreset,
    out: &RunOutput,
    snapshot_times: &[f64],
    emit: &crate::spec::Emit,
    total_seconds: f64,
) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    if emit.diagnostics {
        write_diagnostics(
            &dir.join("diagnostics.csv"),
            &out.history,
            preset.config.num_constraints(),
        )?;
    }
    if emit.snapshots {
        write_snapshots(&dir.join("snapshots.csv"), &out.snapshots)?;
    }
    if emit.summary {
        let record = SummaryRecord {
            summary: &out.summary,
            reference_error: out.reference_error,
            config: preset,
            snapshot_times,
            wall_clock: WallClock {
                total_seconds,
                seconds_per_step: out.step_seconds,
            },
        };
        write_json(&dir.join("summary.json"), &record)?;
    }
    Ok(())
}

/// A small table written as CSV with a header row.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let csv_err = |e: csv::Error| CliError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    finish(w, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 4.432782e-4, -2.5e-300, 1e300, 0.0] {
            let s = float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(float(1.5), "1.5000000000000000e0");
    }

    #[test]
    fn header_has_one_lambda_per_constraint() {
        let h = diagnostics_header(2);
        assert_eq!(h.len(), 14);
        assert_eq!(h[12], "lambda_1");
        assert_eq!(h[13], "lambda_2");
        assert_eq!(diagnostics_header(0).len(), 12);
    }
}
