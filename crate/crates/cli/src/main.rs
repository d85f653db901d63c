//! `dualsav` batch front end.
//!
//! ```text
//! dualsav run     --config spec.json [--out dir]
//! dualsav sweep   --config spec.json --dt 1e-3,5e-4 [--vertices 128,256]
//! dualsav compare --config spec.json --weights uniform,lagrangian_reference
//! ```
//!
//! Independent runs of a sweep or comparison execute in parallel; set
//! `DUALSAV_THREADS` to bound the thread count. Errors are reported as one
//! JSON object on stderr with a nonzero exit status.

mod output;
mod spec;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use dualsav::driver::measure_convergence;
use dualsav::{preset, run_flow, FlowPreset, MeshWeight, PresetOverrides, RunOptions, RunOutput};
use rayon::prelude::*;
use serde_json::json;

use output::float;
use spec::{parse_weight, weight_name, RunSpec};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Flow(#[from] dualsav::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Flow(e) => e.kind(),
            CliError::Io { .. } => "Io",
            CliError::Config { .. } => "ConfigParse",
            CliError::Csv { .. } => "CsvWrite",
            CliError::Usage(_) => "Usage",
        }
    }
}

#[derive(Parser)]
#[command(name = "dualsav", version, about = "Constrained planar curve flows with the dual-SAV scheme")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configuration (including any sweep or comparison it lists).
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` of the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat the run for several time steps and/or vertex counts.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        dt: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        vertices: Vec<usize>,
    },
    /// Repeat the run for several mesh weights.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', value_parser = parse_weight, required = true)]
        weights: Vec<MeshWeight>,
    },
}

struct Job {
    dir: PathBuf,
    preset: FlowPreset,
}

struct Finished {
    preset: FlowPreset,
    output: RunOutput,
}

fn build_preset(spec: &RunSpec, edit: impl FnOnce(&mut PresetOverrides)) -> Result<FlowPreset, CliError> {
    let mut overrides = spec.overrides.clone();
    edit(&mut overrides);
    Ok(preset(spec.preset, &overrides)?)
}

fn snapshot_times(spec: &RunSpec, p: &FlowPreset) -> Vec<f64> {
    spec.snapshot_times
        .clone()
        .unwrap_or_else(|| vec![0.0, p.final_time])
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("DUALSAV_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Usage(format!("DUALSAV_THREADS must be a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Usage(e.to_string()))
}

fn execute(spec: &RunSpec, jobs: Vec<Job>) -> Result<Vec<Finished>, CliError> {
    let pool = thread_pool()?;
    let results: Vec<Result<Finished, CliError>> = pool.install(|| {
        jobs.into_par_iter()
            .map(|job| {
                let times = snapshot_times(spec, &job.preset);
                let start = Instant::now();
                let output = run_flow(
                    &job.preset,
                    &RunOptions {
                        snapshot_times: times.clone(),
                    },
                )?;
                let total = start.elapsed().as_secs_f64();
                output::write_run(&job.dir, &job.preset, &output, &times, &spec.emit, total)?;
                Ok(Finished {
                    preset: job.preset,
                    output,
                })
            })
            .collect()
    });
    results.into_iter().collect()
}

fn dt_label(dt: f64) -> String {
    format!("dt_{dt:e}")
}

fn run_single(spec: &RunSpec, out: &Path) -> Result<(), CliError> {
    let p = build_preset(spec, |_| {})?;
    execute(
        spec,
        vec![Job {
            dir: out.to_path_buf(),
            preset: p,
        }],
    )?;
    Ok(())
}

fn run_sweep(spec: &RunSpec, out: &Path, dts: &[f64], vertices: &[usize]) -> Result<(), CliError> {
    if dts.is_empty() && vertices.is_empty() {
        return Err(CliError::Usage("sweep needs --dt and/or --vertices values".into()));
    }
    if !dts.is_empty() {
        let jobs = dts
            .iter()
            .map(|&dt| {
                Ok(Job {
                    dir: out.join(dt_label(dt)),
                    preset: build_preset(spec, |o| o.dt = Some(dt))?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let done = execute(spec, jobs)?;
        let errors: Option<Vec<(f64, f64)>> = done
            .iter()
            .map(|f| f.output.reference_error.map(|e| (f.preset.config.dt, e)))
            .collect();
        let eoc = match &errors {
            Some(e) => Some(measure_convergence(e)?),
            None => None,
        };
        let rows: Vec<Vec<String>> = done
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let s = &f.output.summary;
                vec![
                    float(f.preset.config.dt),
                    s.steps.to_string(),
                    f.output.reference_error.map(float).unwrap_or_default(),
                    match (&eoc, i) {
                        (Some(v), i) if i > 0 => float(v[i - 1]),
                        _ => String::new(),
                    },
                    float(s.max_q_mesh),
                    float(s.final_gap_g),
                    float(s.max_e_area),
                    float(s.max_e_length),
                    float(s.average_newton_iterations),
                ]
            })
            .collect();
        output::write_table(
            &out.join("convergence.csv"),
            &["dt", "steps", "error", "eoc", "max_Q", "gap_g", "max_e_A", "max_e_L", "avg_newton_iters"],
            &rows,
        )?;
    }
    if !vertices.is_empty() {
        let jobs = vertices
            .iter()
            .map(|&n| {
                Ok(Job {
                    dir: out.join(format!("n_{n}")),
                    preset: build_preset(spec, |o| o.vertices = Some(n))?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let done = execute(spec, jobs)?;
        let rows: Vec<Vec<String>> = done
            .iter()
            .map(|f| {
                let s = &f.output.summary;
                vec![
                    f.preset.initial.vertices.to_string(),
                    s.response_solves_per_step.map(|v| v.to_string()).unwrap_or_default(),
                    float(s.average_newton_iterations),
                    float(s.max_e_area),
                    float(s.max_e_length),
                    float(s.final_q_mesh),
                ]
            })
            .collect();
        output::write_table(
            &out.join("resolution.csv"),
            &["N", "response_solves", "avg_newton_iters", "max_e_A", "max_e_L", "final_Q"],
            &rows,
        )?;
        // timings vary between runs; keep them out of the CSV
        let timings: Vec<_> = done
            .iter()
            .map(|f| json!({"N": f.preset.initial.vertices, "seconds_per_step": f.output.step_seconds}))
            .collect();
        output::write_json(&out.join("timings.json"), &timings)?;
    }
    Ok(())
}

fn run_compare(spec: &RunSpec, out: &Path, weights: &[MeshWeight]) -> Result<(), CliError> {
    let jobs = weights
        .iter()
        .map(|&w| {
            Ok(Job {
                dir: out.join(weight_name(w)),
                preset: build_preset(spec, |o| o.mesh_weight = Some(w))?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let done = execute(spec, jobs)?;
    let rows: Vec<Vec<String>> = done
        .iter()
        .map(|f| {
            let s = &f.output.summary;
            vec![
                weight_name(f.preset.config.mesh_weight).to_string(),
                float(s.max_q_mesh),
                float(s.final_q_mesh),
                float(s.min_edge),
                float(s.max_e_area),
                float(s.average_newton_iterations),
            ]
        })
        .collect();
    output::write_table(
        &out.join("comparison.csv"),
        &["strategy", "max_Q", "final_Q", "min_edge", "max_e_A", "avg_newton_iters"],
        &rows,
    )
}

fn run_spec(spec: &RunSpec, out: &Path) -> Result<(), CliError> {
    let dts = spec.sweep.clone().unwrap_or_default();
    let ns = spec.vertices_sweep.clone().unwrap_or_default();
    if !dts.is_empty() || !ns.is_empty() {
        run_sweep(spec, out, &dts, &ns)?;
    }
    if let Some(weights) = &spec.compare {
        run_compare(spec, out, weights)?;
    }
    if dts.is_empty() && ns.is_empty() && spec.compare.is_none() {
        run_single(spec, out)?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out } => {
            let spec = RunSpec::load(&config)?;
            let out = out.unwrap_or_else(|| spec.output_dir.clone());
            run_spec(&spec, &out)
        }
        Command::Sweep {
            config,
            out,
            dt,
            vertices,
        } => {
            let spec = RunSpec::load(&config)?;
            let out = out.unwrap_or_else(|| spec.output_dir.clone());
            let dt = if dt.is_empty() && vertices.is_empty() {
                spec.sweep.clone().unwrap_or_default()
            } else {
                dt
            };
            run_sweep(&spec, &out, &dt, &vertices)
        }
        Command::Compare {
            config,
            out,
            weights,
        } => {
            let spec = RunSpec::load(&config)?;
            let out = out.unwrap_or_else(|| spec.output_dir.clone());
            run_compare(&spec, &out, &weights)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = json!({"error": e.kind(), "message": e.to_string()});
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
