//! Time loops over a preset, snapshots and convergence rates.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{run_summary, step_diagnostics, RunSummary, StepDiagnostics};
use crate::error::{Error, Result};
use crate::flows::{FlowPreset, Reference};
use crate::geometry::PolygonalCurve;
use crate::stepper::{advance_from, ConstraintTargets, SavState};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Times in `[0, T]` at which to record the curve; each is rounded to
    /// the nearest time step.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub vertices: Vec<[f64; 2]>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Initial state followed by one entry per step.
    pub history: Vec<StepDiagnostics>,
    pub snapshots: Vec<Snapshot>,
    pub final_curve: PolygonalCurve,
    pub final_sav: SavState,
    pub summary: RunSummary,
    /// Mean wall-clock seconds per step, first step excluded as warm-up.
    pub step_seconds: f64,
    /// `max_j ||x_j| − R(T)|` when the preset has an exact solution.
    pub reference_error: Option<f64>,
}

fn snapshot(step: usize, time: f64, curve: &PolygonalCurve) -> Snapshot {
    Snapshot {
        step,
        time,
        vertices: curve.vertices().iter().map(|p| [p.x, p.y]).collect(),
    }
}

/// Runs the preset from its initial curve to its final time.
pub fn run_flow(preset: &FlowPreset, options: &RunOptions) -> Result<RunOutput> {
    let cfg = &preset.config;
    cfg.validate()?;
    let steps = preset.num_steps()?;
    let dt = cfg.dt;

    let mut snapshot_steps = Vec::with_capacity(options.snapshot_times.len());
    for &t in &options.snapshot_times {
        if !(t >= 0.0 && t <= preset.final_time * (1.0 + 1e-12)) {
            return Err(Error::InvalidConfig(format!(
                "snapshot time {t} outside [0, {}]",
                preset.final_time
            )));
        }
        snapshot_steps.push(((t / dt).round() as usize).min(steps));
    }
    snapshot_steps.sort_unstable();
    snapshot_steps.dedup();

    let mut curve = preset.initial_curve()?;
    let targets = ConstraintTargets::from_curve(&curve);
    let mut sav = SavState::initialize(&curve, cfg)?;
    let mut history = Vec::with_capacity(steps + 1);
    history.push(step_diagnostics(0, 0.0, &curve, &sav, cfg, &targets, None)?);
    let mut snapshots = Vec::new();
    let mut pending = snapshot_steps.iter().peekable();
    if pending.peek() == Some(&&0) {
        snapshots.push(snapshot(0, 0.0, &curve));
        pending.next();
    }

    let mut lambdas: Option<Vec<f64>> = None;
    let mut timed = 0.0;
    for n in 1..=steps {
        let start = Instant::now();
        let out = advance_from(&curve, &sav, &targets, cfg, lambdas.as_deref())?;
        if n > 1 {
            timed += start.elapsed().as_secs_f64();
        }
        let time = n as f64 * dt;
        history.push(step_diagnostics(
            n,
            time,
            &out.curve,
            &out.sav,
            cfg,
            &targets,
            Some(&out.report),
        )?);
        curve = out.curve;
        sav = out.sav;
        lambdas = Some(out.report.lambdas);
        if pending.peek() == Some(&&n) {
            snapshots.push(snapshot(n, time, &curve));
            pending.next();
        }
    }

    let reference_error = preset.reference.map(|reference| match reference {
        Reference::ShrinkingCircle { .. } => {
            let radius = reference.radius(steps as f64 * dt);
            curve
                .vertices()
                .iter()
                .map(|x| (x.norm() - radius).abs())
                .fold(0.0, f64::max)
        }
    });

    Ok(RunOutput {
        summary: run_summary(&history),
        history,
        snapshots,
        final_curve: curve,
        final_sav: sav,
        step_seconds: if steps > 1 { timed / (steps - 1) as f64 } else { 0.0 },
        reference_error,
    })
}

/// Experimental orders `log₂(e_k / e_{k+1})` of a sweep whose time steps
/// halve successively.
pub fn measure_convergence(errors: &[(f64, f64)]) -> Result<Vec<f64>> {
    errors
        .windows(2)
        .map(|w| {
            let ((dt0, e0), (dt1, e1)) = (w[0], w[1]);
            if ((dt0 / dt1) - 2.0).abs() > 1e-12 {
                return Err(Error::MismatchedSweep(format!("{dt0} → {dt1}")));
            }
            Ok((e0 / e1).log2())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{preset, PresetName, PresetOverrides};

    #[test]
    fn convergence_orders() {
        let linear: Vec<_> = (0..4).map(|k| (1e-3 / 2f64.powi(k), 3.0e-3 / 2f64.powi(k))).collect();
        for eoc in measure_convergence(&linear).unwrap() {
            assert_eq!(eoc, 1.0);
        }
        let quadratic: Vec<_> = (0..3).map(|k| (0.1 / 2f64.powi(k), 0.01 / 4f64.powi(k))).collect();
        for eoc in measure_convergence(&quadratic).unwrap() {
            assert!((eoc - 2.0).abs() <= 1e-14);
        }
        let errors = [
            (1e-3, 4.432782e-4),
            (5e-4, 2.219714e-4),
            (2.5e-4, 1.110690e-4),
            (1.25e-4, 5.555537e-5),
        ];
        let eoc = measure_convergence(&errors).unwrap();
        for (got, want) in eoc.iter().zip([0.9978, 0.9989, 0.9995]) {
            assert!((got - want).abs() <= 1e-4);
        }
        assert_eq!(
            measure_convergence(&[(1e-3, 1.0), (3e-4, 0.5)]).unwrap_err().kind(),
            "MismatchedSweep"
        );
    }

    #[test]
    fn short_circle_run() {
        let o = PresetOverrides {
            vertices: Some(64),
            final_time: Some(0.01),
            ..Default::default()
        };
        let p = preset(PresetName::Csf, &o).unwrap();
        let out = run_flow(
            &p,
            &RunOptions {
                snapshot_times: vec![0.0, 0.005, 0.01],
            },
        )
        .unwrap();
        assert_eq!(out.history.len(), 11);
        assert_eq!(out.snapshots.len(), 3);
        assert_eq!(out.snapshots[1].step, 5);
        assert!(out.summary.max_q_mesh - 1.0 <= 1e-12);
        assert!(out.summary.dissipation_ok);
        assert!(out.reference_error.unwrap() < 1e-2);

        let bad = RunOptions {
            snapshot_times: vec![0.5],
        };
        assert!(run_flow(&p, &bad).is_err());
    }
}
