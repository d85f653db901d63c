//! Experiment presets: the four reference flows with their default
//! parameters and initial curves.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assembly::{
    ConstraintKind, EnergyKind, FlowConfig, MeshWeight, NewtonSettings, NormalMetricKind,
    NormalStabilizer,
};
use crate::error::{Error, Result};
use crate::geometry::{Point, PolygonalCurve};

/// Closed parametric curve `θ ↦ p(θ)`, `θ ∈ [0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveShape {
    Circle {
        radius: f64,
    },
    /// `r(θ) = base + Σ a_k cos(kθ) + Σ b_k sin(kθ)`, modes given as `[k, a]`.
    Radial {
        base: f64,
        #[serde(default)]
        cos_modes: Vec<[f64; 2]>,
        #[serde(default)]
        sin_modes: Vec<[f64; 2]>,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
}

impl CurveShape {
    /// `1 + 0.9 cos 5θ`
    pub fn star() -> Self {
        CurveShape::Radial {
            base: 1.0,
            cos_modes: vec![[5.0, 0.9]],
            sin_modes: vec![],
        }
    }

    /// `1 + 0.2 cos 3θ + 0.1 sin 5θ`
    pub fn wobbly() -> Self {
        CurveShape::Radial {
            base: 1.0,
            cos_modes: vec![[3.0, 0.2]],
            sin_modes: vec![[5.0, 0.1]],
        }
    }

    /// Looks up `circle` (unit), `star`, `wobbly` or `ellipse` (`4 cos θ, sin θ`).
    pub fn named(name: &str) -> Result<Self> {
        match name {
            "circle" => Ok(CurveShape::Circle { radius: 1.0 }),
            "star" => Ok(Self::star()),
            "wobbly" => Ok(Self::wobbly()),
            "ellipse" => Ok(CurveShape::Ellipse { a: 4.0, b: 1.0 }),
            other => Err(Error::UnknownCurveKind(other.to_string())),
        }
    }

    pub fn point(&self, theta: f64) -> Point {
        match self {
            CurveShape::Circle { radius } => Point::new(theta.cos(), theta.sin()) * *radius,
            CurveShape::Radial {
                base,
                cos_modes,
                sin_modes,
            } => {
                let r = base
                    + cos_modes.iter().map(|[k, a]| a * (k * theta).cos()).sum::<f64>()
                    + sin_modes.iter().map(|[k, b]| b * (k * theta).sin()).sum::<f64>();
                Point::new(theta.cos(), theta.sin()) * r
            }
            CurveShape::Ellipse { a, b } => Point::new(a * theta.cos(), b * theta.sin()),
        }
    }
}

/// Initial polygon: `vertices` samples of `shape`, optionally respaced to
/// equal chord lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCurve {
    pub shape: CurveShape,
    pub vertices: usize,
    #[serde(default)]
    pub redistribute: bool,
}

pub fn make_initial_curve(initial: &InitialCurve) -> Result<PolygonalCurve> {
    let n = initial.vertices;
    if n < 3 {
        return Err(Error::TooFewVertices(n));
    }
    let thetas = if initial.redistribute {
        equal_chord_parameters(&initial.shape, n)?
    } else {
        (0..n).map(|j| TAU * j as f64 / n as f64).collect()
    };
    PolygonalCurve::from_vertices_ccw(thetas.iter().map(|&t| initial.shape.point(t)).collect())
}

/// Parameters `0 = θ₀ < θ₁ < … < θ_{N−1} < 2π` whose points have equal
/// consecutive chords, the closing chord included.
///
/// For a trial chord `h` the points are marched from `θ₀` (each next one the
/// first parameter at distance `h`); `h` is then adjusted by bisection until
/// the closing chord also equals `h`.
fn equal_chord_parameters(shape: &CurveShape, n: usize) -> Result<Vec<f64>> {
    let fine = 64 * n;
    let samples: Vec<Point> = (0..=fine).map(|i| shape.point(TAU * i as f64 / fine as f64)).collect();
    let length: f64 = samples.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let probe = TAU / fine as f64;

    // closing mismatch for chord h; None if the march runs past 2π
    let march = |h: f64| -> Option<(Vec<f64>, f64)> {
        let mut thetas = Vec::with_capacity(n);
        thetas.push(0.0);
        let mut theta = 0.0;
        for _ in 1..n {
            let origin = shape.point(theta);
            let dist = |t: f64| (shape.point(t) - origin).norm();
            let mut hi = theta;
            loop {
                hi += probe;
                if hi >= TAU {
                    return None;
                }
                if dist(hi) >= h {
                    break;
                }
            }
            let mut lo = hi - probe;
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if dist(mid) >= h {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            theta = hi;
            thetas.push(theta);
        }
        let closing = (shape.point(0.0) - shape.point(theta)).norm();
        Some((thetas, closing - h))
    };

    let mut lo = 0.5 * length / n as f64;
    let mut hi = 1.01 * length / n as f64;
    if !matches!(march(lo), Some((_, g)) if g > 0.0) {
        return Err(Error::InvalidConfig("arclength redistribution failed to bracket".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match march(mid) {
            Some((_, g)) if g > 0.0 => lo = mid,
            _ => hi = mid,
        }
    }
    march(lo)
        .map(|(t, _)| t)
        .ok_or_else(|| Error::InvalidConfig("arclength redistribution failed".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    /// Curve shortening flow of the unit circle.
    Csf,
    /// Area-preserving curve shortening flow of a five-petal star.
    Apcsf,
    /// Curve diffusion (H⁻¹ gradient flow of length).
    Cdf,
    /// Helfrich flow with area and length constraints.
    Helfrich,
}

impl PresetName {
    pub const ALL: [PresetName; 4] = [
        PresetName::Csf,
        PresetName::Apcsf,
        PresetName::Cdf,
        PresetName::Helfrich,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PresetName::Csf => "csf",
            PresetName::Apcsf => "apcsf",
            PresetName::Cdf => "cdf",
            PresetName::Helfrich => "helfrich",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

/// Exact solution used for error measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reference {
    /// Circle of radius `√(R₀² − 2t)` under curve shortening.
    ShrinkingCircle { initial_radius: f64 },
}

impl Reference {
    pub fn radius(&self, t: f64) -> f64 {
        match *self {
            Reference::ShrinkingCircle { initial_radius } => {
                (initial_radius * initial_radius - 2.0 * t).sqrt()
            }
        }
    }
}

/// Partial changes to a preset. Unset fields keep the preset defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetOverrides {
    pub vertices: Option<usize>,
    pub dt: Option<f64>,
    pub final_time: Option<f64>,
    pub shape: Option<CurveShape>,
    pub redistribute: Option<bool>,
    pub c0: Option<f64>,
    pub normal_metric: Option<NormalMetricKind>,
    pub normal_stabilizer: Option<NormalStabilizer>,
    pub tangential_beta: Option<f64>,
    pub mesh_weight: Option<MeshWeight>,
    pub constraints: Option<Vec<ConstraintKind>>,
    pub c_g: Option<f64>,
    pub c_m: Option<f64>,
    pub newton_tolerance: Option<f64>,
    pub newton_max_iterations: Option<usize>,
    pub warm_start: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowPreset {
    pub name: PresetName,
    pub config: FlowConfig,
    pub initial: InitialCurve,
    pub final_time: f64,
    #[serde(default)]
    pub reference: Option<Reference>,
}

impl FlowPreset {
    pub fn initial_curve(&self) -> Result<PolygonalCurve> {
        make_initial_curve(&self.initial)
    }

    /// Number of time steps; rejects a final time that is not a whole number
    /// of steps.
    pub fn num_steps(&self) -> Result<usize> {
        let ratio = self.final_time / self.config.dt;
        let steps = ratio.round();
        if !(steps >= 1.0) || (ratio - steps).abs() > 1e-12 * ratio.max(1.0) {
            return Err(Error::PartialFinalStep {
                final_time: self.final_time,
                dt: self.config.dt,
            });
        }
        Ok(steps as usize)
    }
}

fn defaults(name: PresetName) -> FlowPreset {
    let newton = NewtonSettings {
        tolerance: 1e-12,
        max_iterations: 20,
        warm_start: false,
    };
    let base = FlowConfig {
        energy: EnergyKind::Length,
        normal_metric: NormalMetricKind::L2,
        normal_stabilizer: NormalStabilizer::Laplacian { beta2: 10.0 },
        tangential_beta: 100.0,
        mesh_weight: MeshWeight::Uniform,
        constraints: vec![],
        c_g: 1.0,
        c_m: 1.0,
        newton,
        dt: 1e-3,
    };
    match name {
        PresetName::Csf => FlowPreset {
            name,
            config: base,
            initial: InitialCurve {
                shape: CurveShape::Circle { radius: 1.0 },
                vertices: 512,
                redistribute: false,
            },
            final_time: 0.25,
            reference: Some(Reference::ShrinkingCircle { initial_radius: 1.0 }),
        },
        PresetName::Apcsf => FlowPreset {
            name,
            config: FlowConfig {
                constraints: vec![ConstraintKind::Area],
                dt: 5e-4,
                ..base
            },
            initial: InitialCurve {
                shape: CurveShape::star(),
                vertices: 256,
                redistribute: false,
            },
            final_time: 0.5,
            reference: None,
        },
        PresetName::Cdf => FlowPreset {
            name,
            config: FlowConfig {
                normal_metric: NormalMetricKind::Hminus1,
                normal_stabilizer: NormalStabilizer::Hybrid {
                    beta4: 10.0,
                    beta2: 10.0,
                },
                tangential_beta: 10.0,
                dt: 1e-5,
                ..base
            },
            initial: InitialCurve {
                shape: CurveShape::wobbly(),
                vertices: 256,
                redistribute: true,
            },
            final_time: 0.1,
            reference: None,
        },
        PresetName::Helfrich => FlowPreset {
            name,
            config: FlowConfig {
                energy: EnergyKind::Helfrich { c0: 0.5 },
                normal_stabilizer: NormalStabilizer::Biharmonic { beta4: 10.0 },
                tangential_beta: 10.0,
                constraints: vec![ConstraintKind::Area, ConstraintKind::Length],
                newton: NewtonSettings {
                    tolerance: 1e-10,
                    ..newton
                },
                dt: 1e-4,
                ..base
            },
            initial: InitialCurve {
                shape: CurveShape::Ellipse { a: 4.0, b: 1.0 },
                vertices: 256,
                redistribute: false,
            },
            final_time: 0.5,
            reference: None,
        },
    }
}

/// Preset with overrides applied and validated.
pub fn preset(name: PresetName, overrides: &PresetOverrides) -> Result<FlowPreset> {
    let mut p = defaults(name);
    let o = overrides;
    let cfg = &mut p.config;
    if let Some(v) = o.vertices {
        p.initial.vertices = v;
    }
    if let Some(v) = o.dt {
        cfg.dt = v;
    }
    if let Some(v) = o.final_time {
        p.final_time = v;
    }
    if let Some(v) = &o.shape {
        p.initial.shape = v.clone();
        p.reference = match v {
            CurveShape::Circle { radius } if name == PresetName::Csf => {
                Some(Reference::ShrinkingCircle { initial_radius: *radius })
            }
            _ => None,
        };
    }
    if let Some(v) = o.redistribute {
        p.initial.redistribute = v;
    }
    if let Some(c0) = o.c0 {
        match &mut cfg.energy {
            EnergyKind::Helfrich { c0: current } => *current = c0,
            EnergyKind::Length => {
                return Err(Error::InvalidOverride(format!(
                    "c0 only applies to the helfrich preset, not {name}"
                )))
            }
        }
    }
    if let Some(v) = o.normal_metric {
        cfg.normal_metric = v;
    }
    if let Some(v) = o.normal_stabilizer {
        cfg.normal_stabilizer = v;
    }
    if let Some(v) = o.tangential_beta {
        cfg.tangential_beta = v;
    }
    if let Some(v) = o.mesh_weight {
        cfg.mesh_weight = v;
    }
    if let Some(v) = &o.constraints {
        cfg.constraints = v.clone();
    }
    if let Some(v) = o.c_g {
        cfg.c_g = v;
    }
    if let Some(v) = o.c_m {
        cfg.c_m = v;
    }
    if let Some(v) = o.newton_tolerance {
        cfg.newton.tolerance = v;
    }
    if let Some(v) = o.newton_max_iterations {
        cfg.newton.max_iterations = v;
    }
    if let Some(v) = o.warm_start {
        cfg.newton.warm_start = v;
    }
    cfg.validate().map_err(|e| match e {
        Error::InvalidConfig(msg) => Error::InvalidOverride(msg),
        other => other,
    })?;
    if p.initial.vertices < 3 {
        return Err(Error::InvalidOverride(format!(
            "need at least 3 vertices, got {}",
            p.initial.vertices
        )));
    }
    if !(p.final_time > 0.0) {
        return Err(Error::InvalidOverride(format!(
            "final time must be positive, got {}",
            p.final_time
        )));
    }
    Ok(p)
}
