//! Per-step diagnostics and run summaries.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::assembly::{geometric_energy, FlowConfig};
use crate::error::Result;
use crate::geometry::{FrozenFrame, PolygonalCurve};
use crate::stepper::{ConstraintTargets, SavState, StepReport, DISSIPATION_SLACK};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    /// Longest over shortest edge.
    pub q_mesh: f64,
    /// `|A − A₀| / A₀`
    pub e_area: f64,
    /// `|L − L₀| / L₀`
    pub e_length: f64,
    pub r_g_sq: f64,
    pub r_m_sq: f64,
    /// Unshifted discrete geometric energy of the curve.
    pub e_geom: f64,
    /// `|r_g² − (E_geom + C_g)|`
    pub gap_g: f64,
    /// `L² / (4πA) − 1`
    pub iso_deficit: f64,
    pub newton_iterations: usize,
    pub min_edge: f64,
    pub lambdas: Vec<f64>,
    pub response_solves: usize,
    pub mesh_denominator: f64,
    pub margin_g: f64,
    pub margin_m: f64,
}

/// Diagnostics of `curve` at the given step. `report` is `None` for the
/// initial state.
pub fn step_diagnostics(
    step: usize,
    time: f64,
    curve: &PolygonalCurve,
    sav: &SavState,
    cfg: &FlowConfig,
    baseline: &ConstraintTargets,
    report: Option<&StepReport>,
) -> Result<StepDiagnostics> {
    let frame = FrozenFrame::build(curve)?;
    let lengths = &frame.edge_lengths;
    let max = lengths.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = lengths.iter().cloned().fold(f64::INFINITY, f64::min);
    let area = curve.area();
    let length = frame.total_length();
    let e_geom = geometric_energy(&frame, cfg);
    let r_g_sq = sav.r_g * sav.r_g;
    Ok(StepDiagnostics {
        step,
        time,
        q_mesh: max / min,
        e_area: (area - baseline.area).abs() / baseline.area,
        e_length: (length - baseline.length).abs() / baseline.length,
        r_g_sq,
        r_m_sq: sav.r_m * sav.r_m,
        e_geom,
        gap_g: (r_g_sq - (e_geom + cfg.c_g)).abs(),
        iso_deficit: length * length / (4.0 * PI * area) - 1.0,
        newton_iterations: report.map_or(0, |r| r.newton_iterations),
        min_edge: min,
        lambdas: report.map_or_else(|| vec![0.0; cfg.num_constraints()], |r| r.lambdas.clone()),
        response_solves: report.map_or(0, |r| r.response_solves),
        mesh_denominator: report.map_or(1.0, |r| r.mesh_denominator),
        margin_g: report.map_or(0.0, |r| r.margin_g),
        margin_m: report.map_or(0.0, |r| r.margin_m),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub final_time: f64,
    pub initial_q_mesh: f64,
    pub max_q_mesh: f64,
    pub final_q_mesh: f64,
    pub max_e_area: f64,
    pub max_e_length: f64,
    pub min_edge: f64,
    pub average_newton_iterations: f64,
    pub max_newton_iterations: usize,
    pub initial_gap_g: f64,
    pub final_gap_g: f64,
    pub final_iso_deficit: f64,
    pub initial_e_geom: f64,
    pub final_e_geom: f64,
    pub r_g_sq_monotone: bool,
    pub r_m_sq_monotone: bool,
    /// Response solves per step if constant over the run.
    pub response_solves_per_step: Option<usize>,
    pub min_mesh_denominator: f64,
    pub min_margin_g: f64,
    pub min_margin_m: f64,
    pub dissipation_ok: bool,
}

/// Summary of a history whose first entry is the initial state.
///
/// # Panics
///
/// If `history` is empty.
pub fn run_summary(history: &[StepDiagnostics]) -> RunSummary {
    let first = history.first().expect("empty diagnostics history");
    let last = history.last().unwrap();
    let steps = &history[1.min(history.len() - 1)..];
    let taken = history.len() - 1;

    let fold_max = |f: fn(&StepDiagnostics) -> f64| history.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let fold_min = |it: &[StepDiagnostics], f: fn(&StepDiagnostics) -> f64| {
        it.iter().map(f).fold(f64::INFINITY, f64::min)
    };
    let monotone = |f: fn(&StepDiagnostics) -> f64| {
        history.windows(2).all(|w| {
            let (a, b) = (f(&w[0]), f(&w[1]));
            b <= a + DISSIPATION_SLACK * a.max(1.0)
        })
    };

    let solves: Vec<usize> = steps.iter().map(|d| d.response_solves).collect();
    let response_solves_per_step = match solves.first() {
        Some(&s) if taken > 0 && solves.iter().all(|&v| v == s) => Some(s),
        _ => None,
    };
    let (min_margin_g, min_margin_m) = if taken > 0 {
        (fold_min(steps, |d| d.margin_g), fold_min(steps, |d| d.margin_m))
    } else {
        (0.0, 0.0)
    };
    let average_newton_iterations = if taken > 0 {
        steps.iter().map(|d| d.newton_iterations as f64).sum::<f64>() / taken as f64
    } else {
        0.0
    };

    RunSummary {
        steps: taken,
        final_time: last.time,
        initial_q_mesh: first.q_mesh,
        max_q_mesh: fold_max(|d| d.q_mesh),
        final_q_mesh: last.q_mesh,
        max_e_area: fold_max(|d| d.e_area),
        max_e_length: fold_max(|d| d.e_length),
        min_edge: fold_min(history, |d| d.min_edge),
        average_newton_iterations,
        max_newton_iterations: history.iter().map(|d| d.newton_iterations).max().unwrap_or(0),
        initial_gap_g: first.gap_g,
        final_gap_g: last.gap_g,
        final_iso_deficit: last.iso_deficit,
        initial_e_geom: first.e_geom,
        final_e_geom: last.e_geom,
        r_g_sq_monotone: monotone(|d| d.r_g_sq),
        r_m_sq_monotone: monotone(|d| d.r_m_sq),
        response_solves_per_step,
        min_mesh_denominator: fold_min(steps, |d| d.mesh_denominator),
        min_margin_g,
        min_margin_m,
        dissipation_ok: min_margin_g >= 0.0 && min_margin_m >= 0.0,
    }
}
