//! Constrained geometric flows of closed planar polygons.
//!
//! The crate evolves a closed polygonal curve with a stabilized dual scalar
//! auxiliary variable (SAV) parametric finite element scheme. One scalar
//! auxiliary variable tracks the physical geometric energy (length or a
//! Helfrich bending energy), a second one tracks an artificial mesh energy
//! that drives tangential vertex redistribution. Global constraints (enclosed
//! area, perimeter) are enforced by Lagrange multipliers through a small
//! reduced Newton system of dimension `K + 1`.
//!
//! Module map:
//!
//! * [`geometry`]: polygons, frozen frames, area/length and their gradients.
//! * [`assembly`]: flow configuration, frozen matrices and load vectors.
//! * [`linsolve`]: dense Cholesky and the zero-mean (H⁻¹) response path.
//! * [`stepper`]: one time step (responses, SAV updates, reduced Newton).
//! * [`flows`]: experiment presets and initial curves.
//! * [`diagnostics`]: per-step diagnostics and run summaries.
//! * [`driver`]: time loops, snapshots, convergence rates.

pub mod assembly;
pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod flows;
pub mod geometry;
pub mod linsolve;
pub mod stepper;

pub use assembly::{
    AssembledStep, ConstraintKind, EnergyKind, FlowConfig, MeshWeight, NewtonSettings,
    NormalMetricKind, NormalStabilizer,
};
pub use diagnostics::{RunSummary, StepDiagnostics};
pub use driver::{run_flow, RunOptions, RunOutput};
pub use error::{Error, Result};
pub use flows::{preset, CurveShape, FlowPreset, InitialCurve, PresetName, PresetOverrides};
pub use geometry::{FrozenFrame, Point, PolygonalCurve};
pub use stepper::{advance, ConstraintTargets, SavState, StepOutcome, StepReport};

#[cfg(test)]
mod test_support;
