//! Flow configuration and the frozen matrices and load vectors of one step.
//!
//! Everything here is evaluated on the known curve and stays fixed while the
//! step is solved. Vectors are nodal: entry `j` belongs to vertex `x_j`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, FrozenFrame, PolygonalCurve};
use crate::linsolve::{completed_inverse_metric, ZeroMeanContext};

/// Physical energy driving the normal motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnergyKind {
    /// Curve length.
    Length,
    /// `½ ∫ (κ − c₀)² ds`.
    Helfrich { c0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalMetricKind {
    L2,
    /// H⁻¹ metric on the lumped-mass zero-mean subspace.
    Hminus1,
}

/// Zero-order (in time) damping of the normal velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormalStabilizer {
    /// `β₂ K`
    Laplacian { beta2: f64 },
    /// `β₄ K M_L⁻¹ K`
    Biharmonic { beta4: f64 },
    /// `β₄ K M_L⁻¹ K + β₂ K`
    Hybrid { beta4: f64, beta2: f64 },
}

impl NormalStabilizer {
    fn coefficients(&self) -> (f64, f64) {
        match *self {
            NormalStabilizer::Laplacian { beta2 } => (0.0, beta2),
            NormalStabilizer::Biharmonic { beta4 } => (beta4, 0.0),
            NormalStabilizer::Hybrid { beta4, beta2 } => (beta4, beta2),
        }
    }
}

/// Weight of the artificial mesh energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshWeight {
    /// Dirichlet energy with unit weight; equidistributes the vertices.
    Uniform,
    /// Weight `|∂_ρ γ|⁻¹`: the mesh energy is half the length and exerts no
    /// tangential force, so vertices follow the normal motion only.
    LagrangianReference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Area,
    Length,
}

impl ConstraintKind {
    pub fn evaluate(&self, curve_vertices: &[geometry::Point]) -> f64 {
        match self {
            ConstraintKind::Area => geometry::signed_area(curve_vertices),
            ConstraintKind::Length => geometry::perimeter(curve_vertices),
        }
    }

    pub fn gradient(&self, curve_vertices: &[geometry::Point]) -> Vec<geometry::Point> {
        match self {
            ConstraintKind::Area => geometry::area_gradient(curve_vertices),
            ConstraintKind::Length => geometry::length_gradient(curve_vertices),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Start from the previous step's multipliers instead of zero.
    #[serde(default)]
    pub warm_start: bool,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 20,
            warm_start: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub energy: EnergyKind,
    pub normal_metric: NormalMetricKind,
    pub normal_stabilizer: NormalStabilizer,
    /// `β_τ` of the tangential stabilizer `β_τ K`.
    pub tangential_beta: f64,
    pub mesh_weight: MeshWeight,
    pub constraints: Vec<ConstraintKind>,
    /// SAV shift `C_g` of the geometric energy.
    pub c_g: f64,
    /// SAV shift `C_m` of the mesh energy.
    pub c_m: f64,
    pub newton: NewtonSettings,
    pub dt: f64,
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.normal_metric == NormalMetricKind::Hminus1
            && self.constraints.contains(&ConstraintKind::Area)
        {
            return bad(
                "the area constraint cannot be combined with the H⁻¹ metric: its gradient \
                 lies in the excluded constant mode"
                    .into(),
            );
        }
        let (beta4, beta2) = self.normal_stabilizer.coefficients();
        for (name, beta) in [
            ("beta4", beta4),
            ("beta2", beta2),
            ("tangential_beta", self.tangential_beta),
        ] {
            if !(beta >= 0.0) || !beta.is_finite() {
                return bad(format!("{name} must be finite and nonnegative, got {beta}"));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if self.constraints[..i].contains(c) {
                return bad(format!("constraint {c:?} listed twice"));
            }
        }
        for (name, v) in [("c_g", self.c_g), ("c_m", self.c_m), ("dt", self.dt)] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.newton.tolerance > 0.0) {
            return bad(format!(
                "Newton tolerance must be positive, got {}",
                self.newton.tolerance
            ));
        }
        if self.newton.max_iterations == 0 {
            return bad("Newton needs at least one iteration".into());
        }
        if let EnergyKind::Helfrich { c0 } = self.energy {
            if !c0.is_finite() {
                return bad(format!("c0 must be finite, got {c0}"));
            }
        }
        Ok(())
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }
}

/// Frozen matrices and loads of one time step.
#[derive(Debug, Clone)]
pub struct AssembledStep {
    /// `m`, the diagonal of `M_L`.
    pub mass: DVector<f64>,
    pub stiffness: DMatrix<f64>,
    /// `A_ν`: `M_L` or, for H⁻¹, `M_L (K + c m mᵀ)⁻¹ M_L`.
    pub normal_metric: DMatrix<f64>,
    /// `A_τ = M_L`.
    pub tangential_metric: DMatrix<f64>,
    pub normal_stabilizer: DMatrix<f64>,
    pub tangential_stabilizer: DMatrix<f64>,
    /// `M_ν = A_ν + Δt D_ν`
    pub stabilized_normal: DMatrix<f64>,
    /// `M_τ = A_τ + Δt D_τ`
    pub stabilized_tangential: DMatrix<f64>,
    pub geometric_load: DVector<f64>,
    pub mesh_load: DVector<f64>,
    pub constraint_loads: Vec<DVector<f64>>,
    pub geometric_energy: f64,
    pub mesh_energy: f64,
    /// `S_g = √(E_geom + C_g)`
    pub geometric_shift: f64,
    /// `S_m = √(E_mesh + C_m)`
    pub mesh_shift: f64,
    /// Present for the H⁻¹ metric.
    pub zero_mean: Option<ZeroMeanContext>,
}

impl AssembledStep {
    pub fn assemble(curve: &PolygonalCurve, frame: &FrozenFrame, cfg: &FlowConfig) -> Result<Self> {
        let (mass, stiffness) = assemble_mass_stiffness(frame)?;
        let zero_mean = match cfg.normal_metric {
            NormalMetricKind::L2 => None,
            NormalMetricKind::Hminus1 => Some(ZeroMeanContext::new(mass.clone())?),
        };
        let normal_metric = match &zero_mean {
            None => DMatrix::from_diagonal(&mass),
            Some(ctx) => completed_inverse_metric(&stiffness, ctx)?,
        };
        let stab = assemble_stabilizers(&mass, &stiffness, &normal_metric, cfg);
        let geometric_energy = geometric_energy(frame, cfg);
        let mesh_energy = mesh_energy(frame, cfg);
        Ok(Self {
            geometric_load: geometric_force(frame, &stiffness, cfg),
            mesh_load: mesh_force(frame, curve, cfg),
            constraint_loads: constraint_loads(frame, curve, cfg),
            geometric_shift: (geometric_energy + cfg.c_g).sqrt(),
            mesh_shift: (mesh_energy + cfg.c_m).sqrt(),
            geometric_energy,
            mesh_energy,
            tangential_metric: DMatrix::from_diagonal(&mass),
            normal_stabilizer: stab.normal,
            tangential_stabilizer: stab.tangential,
            stabilized_normal: stab.stabilized_normal,
            stabilized_tangential: stab.stabilized_tangential,
            normal_metric,
            mass,
            stiffness,
            zero_mean,
        })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }
}

/// Lumped masses and the periodic P1 stiffness matrix.
pub fn assemble_mass_stiffness(frame: &FrozenFrame) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = frame.len();
    let mut k = DMatrix::zeros(n, n);
    for (j, &l) in frame.edge_lengths.iter().enumerate() {
        if !(l > 0.0) {
            return Err(Error::DegenerateEdge { index: j });
        }
        let jp = (j + 1) % n;
        let w = 1.0 / l;
        k[(j, j)] += w;
        k[(jp, jp)] += w;
        k[(j, jp)] -= w;
        k[(jp, j)] -= w;
    }
    Ok((DVector::from_column_slice(&frame.lumped_masses), k))
}

/// `A_ν` alone, for callers that do not need the full step.
pub fn assemble_normal_metric(frame: &FrozenFrame, cfg: &FlowConfig) -> Result<DMatrix<f64>> {
    let (mass, stiffness) = assemble_mass_stiffness(frame)?;
    match cfg.normal_metric {
        NormalMetricKind::L2 => Ok(DMatrix::from_diagonal(&mass)),
        NormalMetricKind::Hminus1 => {
            completed_inverse_metric(&stiffness, &ZeroMeanContext::new(mass)?)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Stabilizers {
    pub normal: DMatrix<f64>,
    pub tangential: DMatrix<f64>,
    pub stabilized_normal: DMatrix<f64>,
    pub stabilized_tangential: DMatrix<f64>,
}

pub fn assemble_stabilizers(
    mass: &DVector<f64>,
    stiffness: &DMatrix<f64>,
    normal_metric: &DMatrix<f64>,
    cfg: &FlowConfig,
) -> Stabilizers {
    let (beta4, beta2) = cfg.normal_stabilizer.coefficients();
    let mut normal = stiffness * beta2;
    if beta4 != 0.0 {
        normal += biharmonic(mass, stiffness) * beta4;
    }
    let tangential = stiffness * cfg.tangential_beta;
    let mut stabilized_normal = normal_metric.clone();
    stabilized_normal += &normal * cfg.dt;
    let mut stabilized_tangential = DMatrix::from_diagonal(mass);
    stabilized_tangential += &tangential * cfg.dt;
    Stabilizers {
        normal,
        tangential,
        stabilized_normal,
        stabilized_tangential,
    }
}

/// `K M_L⁻¹ K`, using that `K` couples only periodic neighbours.
fn biharmonic(mass: &DVector<f64>, k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = mass.len();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let nbrs = [(j + n - 1) % n, j, (j + 1) % n];
        for &i in &nbrs {
            for &l in &nbrs {
                out[(i, l)] += k[(i, j)] * k[(j, l)] / mass[j];
            }
        }
    }
    out
}

/// Discrete geometric energy: `L_h` or `½ Σ m_j (κ_j − c₀)²`.
pub fn geometric_energy(frame: &FrozenFrame, cfg: &FlowConfig) -> f64 {
    match cfg.energy {
        EnergyKind::Length => frame.total_length(),
        EnergyKind::Helfrich { c0 } => bending_energy(frame, c0),
    }
}

pub fn bending_energy(frame: &FrozenFrame, c0: f64) -> f64 {
    0.5 * frame
        .lumped_masses
        .iter()
        .zip(&frame.nodal_curvatures)
        .map(|(m, k)| m * (k - c0).powi(2))
        .sum::<f64>()
}

/// `(N/2) Σ l_j²` for the uniform weight, `L_h / 2` for the Lagrangian one.
pub fn mesh_energy(frame: &FrozenFrame, cfg: &FlowConfig) -> f64 {
    match cfg.mesh_weight {
        MeshWeight::Uniform => {
            0.5 * frame.len() as f64 * frame.edge_lengths.iter().map(|l| l * l).sum::<f64>()
        }
        MeshWeight::LagrangianReference => 0.5 * frame.total_length(),
    }
}

/// Normal load `F_g`.
pub fn geometric_force(frame: &FrozenFrame, stiffness: &DMatrix<f64>, cfg: &FlowConfig) -> DVector<f64> {
    let n = frame.len();
    match cfg.energy {
        // ∇L · ν = (τ_{j−1/2} − τ_{j+1/2}) · ν_j = −m_j κ_j
        EnergyKind::Length => DVector::from_fn(n, |j, _| {
            let prev = (j + n - 1) % n;
            (frame.edge_tangents[prev] - frame.edge_tangents[j]).dot(&frame.nodal_normals[j])
        }),
        EnergyKind::Helfrich { c0 } => {
            let kappa = DVector::from_column_slice(&frame.nodal_curvatures);
            let mut f = -(stiffness * &kappa);
            for j in 0..n {
                let k = kappa[j];
                f[j] += 0.5 * frame.lumped_masses[j] * k * (k * k - c0 * c0);
            }
            f
        }
    }
}

/// Tangential load `F_m`.
pub fn mesh_force(frame: &FrozenFrame, curve: &PolygonalCurve, cfg: &FlowConfig) -> DVector<f64> {
    let x = curve.vertices();
    let n = x.len();
    match cfg.mesh_weight {
        MeshWeight::Uniform => DVector::from_fn(n, |j, _| {
            let d = 2.0 * x[j] - x[(j + n - 1) % n] - x[(j + 1) % n];
            n as f64 * d.dot(&frame.nodal_tangents[j])
        }),
        MeshWeight::LagrangianReference => DVector::from_fn(n, |j, _| {
            let prev = (j + n - 1) % n;
            0.5 * (frame.edge_tangents[prev] - frame.edge_tangents[j]).dot(&frame.nodal_tangents[j])
        }),
    }
}

/// `G_i[j] = ∇_{x_j} C_i · ν_j` for every configured constraint.
pub fn constraint_loads(
    frame: &FrozenFrame,
    curve: &PolygonalCurve,
    cfg: &FlowConfig,
) -> Vec<DVector<f64>> {
    cfg.constraints
        .iter()
        .map(|c| project_on_normals(&c.gradient(curve.vertices()), frame))
        .collect()
}

pub(crate) fn project_on_normals(grad: &[geometry::Point], frame: &FrozenFrame) -> DVector<f64> {
    DVector::from_fn(grad.len(), |j, _| grad[j].dot(&frame.nodal_normals[j]))
}
