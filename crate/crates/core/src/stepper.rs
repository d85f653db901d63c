//! One time step of the dual-SAV scheme.
//!
//! The coupled system for `(V_ν, V_τ, r_g, r_m, λ)` is reduced by linearity:
//! `K + 2` response solves against the frozen matrices, an explicit update of
//! the mesh variable `r_m`, and a Newton solve for `Ξ = (r_g, λ₁, …, λ_K)` of
//! dimension `K + 1`. Velocities are then synthesized from the responses and
//! the vertices moved along the frozen frame.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assembly::{project_on_normals, AssembledStep, ConstraintKind, FlowConfig};
use crate::error::{Error, Result};
use crate::geometry::{FrozenFrame, Point, PolygonalCurve};
use crate::linsolve::{Cholesky, ZeroMeanSolver};

/// Relative budget for round-off in the dissipation inequalities.
pub const DISSIPATION_SLACK: f64 = 1e-10;
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SavState {
    pub r_g: f64,
    pub r_m: f64,
}

impl SavState {
    /// `r_g = S_g(γ⁰)`, `r_m = S_m(γ⁰)`.
    pub fn initialize(curve: &PolygonalCurve, cfg: &FlowConfig) -> Result<Self> {
        let frame = FrozenFrame::build(curve)?;
        let e_g = crate::assembly::geometric_energy(&frame, cfg);
        let e_m = crate::assembly::mesh_energy(&frame, cfg);
        Ok(Self {
            r_g: (e_g + cfg.c_g).sqrt(),
            r_m: (e_m + cfg.c_m).sqrt(),
        })
    }
}

/// Constraint values of the initial curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintTargets {
    pub area: f64,
    pub length: f64,
}

impl ConstraintTargets {
    pub fn from_curve(curve: &PolygonalCurve) -> Self {
        Self {
            area: curve.area(),
            length: curve.length(),
        }
    }

    pub fn value(&self, kind: ConstraintKind) -> f64 {
        match kind {
            ConstraintKind::Area => self.area,
            ConstraintKind::Length => self.length,
        }
    }
}

/// Responses `M_ν V_g = −F_g`, `M_ν V_i = −G_i`, `M_τ V_m = −F_m` (normal
/// loads dual-projected first for the H⁻¹ metric).
#[derive(Debug, Clone)]
pub struct ResponseSet {
    pub geometric: DVector<f64>,
    pub constraints: Vec<DVector<f64>>,
    pub mesh: DVector<f64>,
    /// Number of linear response solves performed.
    pub solves: usize,
}

pub fn compute_responses(step: &AssembledStep) -> Result<ResponseSet> {
    let normal: Box<dyn Fn(&DVector<f64>) -> DVector<f64>> = match &step.zero_mean {
        Some(ctx) => {
            let solver = ZeroMeanSolver::new(&step.stabilized_normal, ctx)?;
            Box::new(move |f| solver.solve(&-f))
        }
        None => {
            let chol = Cholesky::factor(&step.stabilized_normal)?;
            Box::new(move |f| chol.solve(&-f))
        }
    };
    let tangential = Cholesky::factor(&step.stabilized_tangential)?;
    let geometric = normal(&step.geometric_load);
    let constraints: Vec<_> = step.constraint_loads.iter().map(|g| normal(g)).collect();
    let mesh = tangential.solve(&-&step.mesh_load);
    Ok(ResponseSet {
        solves: 2 + constraints.len(),
        geometric,
        constraints,
        mesh,
    })
}

/// `1 − (Δt / 2S_m²) F_mᵀ V_m`; at least one since `F_mᵀ V_m ≤ 0`.
pub fn mesh_update_denominator(step: &AssembledStep, v_m: &DVector<f64>, dt: f64) -> f64 {
    let s = step.mesh_shift;
    1.0 - dt / (2.0 * s * s) * step.mesh_load.dot(v_m)
}

/// Explicit mesh SAV update.
pub fn mesh_sav_update(r_m: f64, step: &AssembledStep, v_m: &DVector<f64>, dt: f64) -> f64 {
    r_m / mesh_update_denominator(step, v_m, dt)
}

/// `Ξ = (r, λ₁, …, λ_K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedUnknowns {
    pub r: f64,
    pub lambdas: Vec<f64>,
}

impl ReducedUnknowns {
    pub fn new(r: f64, lambdas: Vec<f64>) -> Self {
        Self { r, lambdas }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            1 + self.lambdas.len(),
            std::iter::once(self.r).chain(self.lambdas.iter().copied()),
        )
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        Self {
            r: v[0],
            lambdas: v.iter().skip(1).copied().collect(),
        }
    }
}

/// `V_ν(Ξ) = (r / S_g) V_g + Σ λ_i V_i`.
pub fn synthesize_normal(
    xi: &ReducedUnknowns,
    resp: &ResponseSet,
    step: &AssembledStep,
) -> DVector<f64> {
    let mut v = &resp.geometric * (xi.r / step.geometric_shift);
    for (lambda, vi) in xi.lambdas.iter().zip(&resp.constraints) {
        v.axpy(*lambda, vi, 1.0);
    }
    v
}

/// `x_j + Δt (V_ν,j ν_j + V_τ,j τ_j)` without validation.
pub fn displaced_vertices(
    curve: &PolygonalCurve,
    frame: &FrozenFrame,
    v_nu: &DVector<f64>,
    v_tau: &DVector<f64>,
    dt: f64,
) -> Vec<Point> {
    curve
        .vertices()
        .iter()
        .enumerate()
        .map(|(j, x)| x + (frame.nodal_normals[j] * v_nu[j] + frame.nodal_tangents[j] * v_tau[j]) * dt)
        .collect()
}

/// The curve `γ_h(Ξ)`. Fails with `DegenerateUpdate` if it is no longer a
/// valid counterclockwise polygon.
pub fn intermediate_curve(
    xi: &ReducedUnknowns,
    resp: &ResponseSet,
    step: &AssembledStep,
    frame: &FrozenFrame,
    curve: &PolygonalCurve,
    v_tau: &DVector<f64>,
    dt: f64,
) -> Result<PolygonalCurve> {
    let v_nu = synthesize_normal(xi, resp, step);
    let x = displaced_vertices(curve, frame, &v_nu, v_tau, dt);
    PolygonalCurve::new(x).map_err(|e| Error::DegenerateUpdate(e.to_string()))
}

/// Everything of a step that does not depend on `Ξ`.
#[derive(Debug, Clone)]
pub struct StepContext {
    pub frame: FrozenFrame,
    pub step: AssembledStep,
    pub responses: ResponseSet,
    pub mesh_denominator: f64,
    pub r_m: f64,
    /// `V_τ = (r_m^{n+1} / S_m) V_m`.
    pub v_tau: DVector<f64>,
}

impl StepContext {
    /// Frame, assembly, response solves and the mesh SAV update.
    pub fn prepare(curve: &PolygonalCurve, sav: &SavState, cfg: &FlowConfig) -> Result<Self> {
        let frame = FrozenFrame::build(curve)?;
        let step = AssembledStep::assemble(curve, &frame, cfg)?;
        let responses = compute_responses(&step)?;
        let mesh_denominator = mesh_update_denominator(&step, &responses.mesh, cfg.dt);
        let r_m = sav.r_m / mesh_denominator;
        let v_tau = &responses.mesh * (r_m / step.mesh_shift);
        Ok(Self {
            frame,
            step,
            responses,
            mesh_denominator,
            r_m,
            v_tau,
        })
    }

    pub fn reduced_system<'a>(
        &'a self,
        curve: &'a PolygonalCurve,
        r_n: f64,
        targets: &ConstraintTargets,
        cfg: &'a FlowConfig,
    ) -> ReducedSystem<'a> {
        ReducedSystem::new(self, curve, r_n, targets, cfg)
    }
}

/// The reduced residual `R(Ξ)` and its Jacobian.
#[derive(Debug)]
pub struct ReducedSystem<'a> {
    ctx: &'a StepContext,
    curve: &'a PolygonalCurve,
    constraints: &'a [ConstraintKind],
    targets: Vec<f64>,
    r_n: f64,
    dt: f64,
    // frozen inner products
    fg_vg: f64,
    fg_vj: Vec<f64>,
    gi_vg: Vec<f64>,
    gi_vj: DMatrix<f64>,
}

impl<'a> ReducedSystem<'a> {
    pub fn new(
        ctx: &'a StepContext,
        curve: &'a PolygonalCurve,
        r_n: f64,
        targets: &ConstraintTargets,
        cfg: &'a FlowConfig,
    ) -> Self {
        let step = &ctx.step;
        let resp = &ctx.responses;
        let k = resp.constraints.len();
        let f = &step.geometric_load;
        let g = &step.constraint_loads;
        Self {
            ctx,
            curve,
            constraints: &cfg.constraints,
            targets: cfg.constraints.iter().map(|c| targets.value(*c)).collect(),
            r_n,
            dt: cfg.dt,
            fg_vg: f.dot(&resp.geometric),
            fg_vj: resp.constraints.iter().map(|v| f.dot(v)).collect(),
            gi_vg: g.iter().map(|gi| gi.dot(&resp.geometric)).collect(),
            gi_vj: DMatrix::from_fn(k, k, |i, j| g[i].dot(&resp.constraints[j])),
        }
    }

    pub fn dim(&self) -> usize {
        1 + self.targets.len()
    }

    pub fn vertices(&self, xi: &ReducedUnknowns) -> Vec<Point> {
        let v_nu = synthesize_normal(xi, &self.ctx.responses, &self.ctx.step);
        displaced_vertices(self.curve, &self.ctx.frame, &v_nu, &self.ctx.v_tau, self.dt)
    }

    /// `B_i = G_iᵀ V_ν(Ξ)` from the precomputed inner products.
    fn constraint_work(&self, xi: &ReducedUnknowns) -> Vec<f64> {
        let s = self.ctx.step.geometric_shift;
        (0..self.targets.len())
            .map(|i| {
                xi.r / s * self.gi_vg[i]
                    + (0..self.targets.len())
                        .map(|j| xi.lambdas[j] * self.gi_vj[(i, j)])
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn residual(&self, xi: &ReducedUnknowns) -> Result<DVector<f64>> {
        if xi.r == 0.0 {
            return Err(Error::ZeroGeometricSav);
        }
        let s = self.ctx.step.geometric_shift;
        let k = self.targets.len();
        let fv = xi.r / s * self.fg_vg
            + (0..k).map(|j| xi.lambdas[j] * self.fg_vj[j]).sum::<f64>();
        let b = self.constraint_work(xi);
        let coupling: f64 = (0..k).map(|i| xi.lambdas[i] * b[i]).sum();
        let mut out = DVector::zeros(k + 1);
        out[0] = (xi.r - self.r_n) / self.dt - fv / (2.0 * s) - coupling / (2.0 * xi.r);
        if k > 0 {
            let x = self.vertices(xi);
            for (i, c) in self.constraints.iter().enumerate() {
                out[i + 1] = c.evaluate(&x) - self.targets[i];
            }
        }
        Ok(out)
    }

    pub fn jacobian(&self, xi: &ReducedUnknowns) -> Result<DMatrix<f64>> {
        let r = xi.r;
        if r == 0.0 {
            return Err(Error::ZeroGeometricSav);
        }
        let s = self.ctx.step.geometric_shift;
        let k = self.targets.len();
        let lam = &xi.lambdas;
        let b = self.constraint_work(xi);
        let mut jac = DMatrix::zeros(k + 1, k + 1);

        jac[(0, 0)] = 1.0 / self.dt - self.fg_vg / (2.0 * s * s)
            + (0..k).map(|i| lam[i] * b[i]).sum::<f64>() / (2.0 * r * r)
            - (0..k).map(|i| lam[i] * self.gi_vg[i]).sum::<f64>() / (2.0 * r * s);
        for j in 0..k {
            jac[(0, j + 1)] = -self.fg_vj[j] / (2.0 * s)
                - b[j] / (2.0 * r)
                - (0..k).map(|i| lam[i] * self.gi_vj[(i, j)]).sum::<f64>() / (2.0 * r);
        }
        if k > 0 {
            // constraint gradients on γ(Ξ), projected on the frozen normals
            let x = self.vertices(xi);
            let resp = &self.ctx.responses;
            for (i, c) in self.constraints.iter().enumerate() {
                let g = project_on_normals(&c.gradient(&x), &self.ctx.frame);
                jac[(i + 1, 0)] = self.dt / s * g.dot(&resp.geometric);
                for j in 0..k {
                    jac[(i + 1, j + 1)] = self.dt * g.dot(&resp.constraints[j]);
                }
            }
        }
        Ok(jac)
    }

    /// Safeguarded Newton iteration from `initial`. Returns the solution and
    /// the number of Newton updates taken.
    pub fn newton_solve(
        &self,
        initial: ReducedUnknowns,
        tolerance: f64,
        max_iterations: usize,
    ) -> Result<(ReducedUnknowns, usize, f64)> {
        let mut xi = initial;
        let mut res = self.residual(&xi)?;
        let mut res_norm = res.norm();
        if res_norm <= tolerance {
            return Ok((xi, 0, res_norm));
        }
        let r_floor = 1e-12 * self.r_n.abs();
        for iteration in 1..=max_iterations {
            let jac = self.jacobian(&xi)?;
            let delta = jac
                .lu()
                .solve(&-&res)
                .filter(|d| d.iter().all(|v| v.is_finite()))
                .ok_or(Error::SingularJacobian)?;
            let current = xi.to_vector();
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                let candidate = ReducedUnknowns::from_vector(&(&current + &delta * alpha));
                let keeps_sign = candidate.r.signum() == self.r_n.signum();
                if keeps_sign && candidate.r.abs() >= r_floor {
                    let cand_res = self.residual(&candidate)?;
                    let norm = cand_res.norm();
                    if norm.is_finite() && norm <= 1e3 * res_norm {
                        accepted = Some((candidate, cand_res, norm));
                        break;
                    }
                }
                alpha *= 0.5;
            }
            let Some((candidate, cand_res, norm)) = accepted else {
                return Err(Error::NewtonDivergence {
                    iterations: iteration,
                    residual: res_norm,
                });
            };
            let increment = alpha * delta.norm() / (1.0 + candidate.to_vector().norm());
            xi = candidate;
            res = cand_res;
            res_norm = norm;
            if res_norm <= tolerance || increment <= tolerance {
                return Ok((xi, iteration, res_norm));
            }
        }
        Err(Error::NewtonDivergence {
            iterations: max_iterations,
            residual: res_norm,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub newton_iterations: usize,
    pub residual_norm: f64,
    pub v_nu: Vec<f64>,
    pub v_tau: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub response_solves: usize,
    pub mesh_denominator: f64,
    /// Slack left in the geometric dissipation inequality (≥ 0 when it holds).
    pub margin_g: f64,
    pub margin_m: f64,
    pub dissipation_ok_g: bool,
    pub dissipation_ok_m: bool,
    pub geometric_energy: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub curve: PolygonalCurve,
    pub sav: SavState,
    pub report: StepReport,
}

/// Advances one step with the configured Newton initial guess `(r_g, 0, …)`.
pub fn advance(
    curve: &PolygonalCurve,
    sav: &SavState,
    targets: &ConstraintTargets,
    cfg: &FlowConfig,
) -> Result<StepOutcome> {
    advance_from(curve, sav, targets, cfg, None)
}

/// Like [`advance`]; with `warm_start` enabled the given multipliers seed
/// the Newton iteration.
pub fn advance_from(
    curve: &PolygonalCurve,
    sav: &SavState,
    targets: &ConstraintTargets,
    cfg: &FlowConfig,
    previous_lambdas: Option<&[f64]>,
) -> Result<StepOutcome> {
    let dt = cfg.dt;
    let ctx = StepContext::prepare(curve, sav, cfg)?;
    let system = ctx.reduced_system(curve, sav.r_g, targets, cfg);

    let k = cfg.num_constraints();
    let lambdas = match previous_lambdas {
        Some(l) if cfg.newton.warm_start && l.len() == k => l.to_vec(),
        _ => vec![0.0; k],
    };
    let (xi, iterations, residual_norm) = system.newton_solve(
        ReducedUnknowns::new(sav.r_g, lambdas),
        cfg.newton.tolerance,
        cfg.newton.max_iterations,
    )?;

    let step = &ctx.step;
    let v_nu = synthesize_normal(&xi, &ctx.responses, step);
    let new_curve = PolygonalCurve::new(system.vertices(&xi))
        .map_err(|e| Error::DegenerateUpdate(e.to_string()))?;

    let margin_g = dissipation_margin(
        sav.r_g,
        xi.r,
        &v_nu,
        &step.normal_metric,
        &step.normal_stabilizer,
        dt,
    );
    let margin_m = dissipation_margin(
        sav.r_m,
        ctx.r_m,
        &ctx.v_tau,
        &step.tangential_metric,
        &step.tangential_stabilizer,
        dt,
    );
    for (which, margin) in [("geometric", margin_g), ("mesh", margin_m)] {
        if !(margin >= 0.0) {
            return Err(Error::DissipationViolation {
                which,
                excess: -margin,
            });
        }
    }

    Ok(StepOutcome {
        curve: new_curve,
        sav: SavState {
            r_g: xi.r,
            r_m: ctx.r_m,
        },
        report: StepReport {
            newton_iterations: iterations,
            residual_norm,
            v_nu: v_nu.as_slice().to_vec(),
            v_tau: ctx.v_tau.as_slice().to_vec(),
            lambdas: xi.lambdas,
            response_solves: ctx.responses.solves,
            mesh_denominator: ctx.mesh_denominator,
            margin_g,
            margin_m,
            dissipation_ok_g: true,
            dissipation_ok_m: true,
            geometric_energy: step.geometric_energy,
        },
    })
}

/// `−Δt (VᵀAV + Δt VᵀDV) + slack − (r_new² − r_old²)`.
pub fn dissipation_margin(
    r_old: f64,
    r_new: f64,
    v: &DVector<f64>,
    metric: &DMatrix<f64>,
    stabilizer: &DMatrix<f64>,
    dt: f64,
) -> f64 {
    let bound = -dt * (v.dot(&(metric * v)) + dt * v.dot(&(stabilizer * v)));
    let slack = DISSIPATION_SLACK * r_old.powi(2).max(1.0);
    bound + slack - (r_new * r_new - r_old * r_old)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{EnergyKind, MeshWeight, NewtonSettings, NormalMetricKind, NormalStabilizer};
    use crate::test_support::{random_polygon, random_vector};

    fn length_config(constraints: Vec<ConstraintKind>) -> FlowConfig {
        FlowConfig {
            energy: EnergyKind::Length,
            normal_metric: NormalMetricKind::L2,
            normal_stabilizer: NormalStabilizer::Laplacian { beta2: 10.0 },
            tangential_beta: 100.0,
            mesh_weight: MeshWeight::Uniform,
            constraints,
            c_g: 1.0,
            c_m: 1.0,
            newton: NewtonSettings::default(),
            dt: 1e-3,
        }
    }

    #[test]
    fn responses_on_diagonal_metric() {
        let curve = random_polygon(12, 1);
        let frame = FrozenFrame::build(&curve).unwrap();
        let mut cfg = length_config(vec![]);
        cfg.normal_stabilizer = NormalStabilizer::Laplacian { beta2: 0.0 };
        let step = AssembledStep::assemble(&curve, &frame, &cfg).unwrap();
        let resp = compute_responses(&step).unwrap();
        for j in 0..12 {
            let expected = -step.geometric_load[j] / step.mass[j];
            assert!((resp.geometric[j] - expected).abs() <= 1e-14 * expected.abs().max(1.0));
        }
        let residual = &step.stabilized_tangential * &resp.mesh + &step.mesh_load;
        assert!(residual.amax() <= 1e-10 * step.mesh_load.amax().max(1.0));
        assert_eq!(resp.solves, 2);

        let mut zero = step.clone();
        zero.geometric_load.fill(0.0);
        assert_eq!(compute_responses(&zero).unwrap().geometric.amax(), 0.0);
    }

    #[test]
    fn regular_octagon_moves_inward_uniformly() {
        let curve = PolygonalCurve::regular(8, 1.0).unwrap();
        let cfg = length_config(vec![]);
        let sav = SavState::initialize(&curve, &cfg).unwrap();
        let ctx = StepContext::prepare(&curve, &sav, &cfg).unwrap();
        let vg = &ctx.responses.geometric;
        for j in 1..8 {
            assert!((vg[j] - vg[0]).abs() <= 1e-13);
        }
        // F_g = −m κ < 0, so V_g > 0 along the inward normal
        assert!(vg[0] > 0.0);
        let out = advance(&curve, &sav, &ConstraintTargets::from_curve(&curve), &cfg).unwrap();
        let radii: Vec<f64> = out.curve.vertices().iter().map(|x| x.norm()).collect();
        assert!(radii.iter().all(|r| *r < 1.0 && (r - radii[0]).abs() <= 1e-13));
    }

    #[test]
    fn mesh_update_contracts() {
        let curve = random_polygon(16, 5);
        let cfg = length_config(vec![]);
        let sav = SavState::initialize(&curve, &cfg).unwrap();
        let ctx = StepContext::prepare(&curve, &sav, &cfg).unwrap();
        assert!(ctx.mesh_denominator >= 1.0);
        assert!(ctx.r_m < sav.r_m);
        let margin = dissipation_margin(
            sav.r_m,
            ctx.r_m,
            &ctx.v_tau,
            &ctx.step.tangential_metric,
            &ctx.step.tangential_stabilizer,
            cfg.dt,
        );
        assert!(margin >= 0.0);
        assert_eq!(
            mesh_sav_update(sav.r_m, &ctx.step, &ctx.responses.mesh, cfg.dt),
            ctx.r_m
        );

        let mut step = ctx.step.clone();
        step.mesh_load.fill(0.0);
        let zero = DVector::zeros(16);
        assert_eq!(mesh_sav_update(1.7, &step, &zero, cfg.dt), 1.7);
    }

    #[test]
    fn synthesis_is_linear() {
        let curve = random_polygon(10, 2);
        let cfg = length_config(vec![ConstraintKind::Area, ConstraintKind::Length]);
        let sav = SavState::initialize(&curve, &cfg).unwrap();
        let ctx = StepContext::prepare(&curve, &sav, &cfg).unwrap();
        let (step, resp) = (&ctx.step, &ctx.responses);

        let v = synthesize_normal(&ReducedUnknowns::new(step.geometric_shift, vec![0.0, 0.0]), resp, step);
        assert!((&v - &resp.geometric).amax() <= 1e-15);
        let v = synthesize_normal(&ReducedUnknowns::new(0.0, vec![1.0, 0.0]), resp, step);
        assert_eq!(v, resp.constraints[0]);

        let x1 = random_vector(3, 3);
        let x2 = random_vector(3, 4);
        let (a, b) = (0.7, -1.3);
        let lhs = synthesize_normal(&ReducedUnknowns::from_vector(&(&x1 * a + &x2 * b)), resp, step);
        let rhs = synthesize_normal(&ReducedUnknowns::from_vector(&x1), resp, step) * a
            + synthesize_normal(&ReducedUnknowns::from_vector(&x2), resp, step) * b;
        assert!((lhs - rhs).amax() <= 1e-13 * resp.geometric.amax().max(1.0));

        let zero = ReducedUnknowns::new(0.0, vec![0.0, 0.0]);
        let still = intermediate_curve(&zero, resp, step, &ctx.frame, &curve, &DVector::zeros(10), cfg.dt)
            .unwrap();
        assert_eq!(still, curve);
    }

    #[test]
    fn uniform_normal_velocity_moves_along_normals() {
        let curve = PolygonalCurve::regular(24, 1.0).unwrap();
        let frame = FrozenFrame::build(&curve).unwrap();
        let v = DVector::from_element(24, 0.3);
        let x = displaced_vertices(&curve, &frame, &v, &DVector::zeros(24), 0.01);
        for (j, p) in x.iter().enumerate() {
            let d = p - curve.vertices()[j];
            assert!((d.norm() - 0.003).abs() <= 1e-15);
            assert!((d.normalize() - frame.nodal_normals[j]).norm() <= 1e-12);
        }
    }

    #[test]
    fn unconstrained_step_matches_closed_form() {
        let curve = random_polygon(20, 7);
        let cfg = length_config(vec![]);
        let sav = SavState::initialize(&curve, &cfg).unwrap();
        let ctx = StepContext::prepare(&curve, &sav, &cfg).unwrap();
        let s = ctx.step.geometric_shift;
        let fv = ctx.step.geometric_load.dot(&ctx.responses.geometric);
        let closed = sav.r_g / (1.0 - cfg.dt / (2.0 * s * s) * fv);

        let system = ctx.reduced_system(&curve, sav.r_g, &ConstraintTargets::from_curve(&curve), &cfg);
        let jac = system.jacobian(&ReducedUnknowns::new(sav.r_g, vec![])).unwrap();
        assert!((jac[(0, 0)] - (1.0 / cfg.dt - fv / (2.0 * s * s))).abs() <= 1e-9);

        let (xi, iterations, _) = system
            .newton_solve(ReducedUnknowns::new(sav.r_g, vec![]), 1e-12, 20)
            .unwrap();
        assert!(iterations <= 2);
        assert!((xi.r - closed).abs() <= 1e-13 * closed);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let curve = random_polygon(24, 13);
        let mut cfg = length_config(vec![ConstraintKind::Area, ConstraintKind::Length]);
        cfg.energy = EnergyKind::Helfrich { c0: 0.5 };
        cfg.normal_stabilizer = NormalStabilizer::Biharmonic { beta4: 10.0 };
        cfg.dt = 1e-4;
        let sav = SavState::initialize(&curve, &cfg).unwrap();
        let targets = ConstraintTargets::from_curve(&curve);
        let ctx = StepContext::prepare(&curve, &sav, &cfg).unwrap();
        let system = ctx.reduced_system(&curve, sav.r_g, &targets, &cfg);
        for seed in 0..20 {
            let p = random_vector(3, 50 + seed);
            let xi = ReducedUnknowns::new(sav.r_g * (1.0 + 0.1 * p[0]), vec![p[1], p[2]]);
            let jac = system.jacobian(&xi).unwrap();
            let x0 = xi.to_vector();
            let h = 1e-6;
            let mut fd = DMatrix::zeros(3, 3);
            for c in 0..3 {
                let mut xp = x0.clone();
                let mut xm = x0.clone();
                xp[c] += h;
                xm[c] -= h;
                let rp = system.residual(&ReducedUnknowns::from_vector(&xp)).unwrap();
                let rm = system.residual(&ReducedUnknowns::from_vector(&xm)).unwrap();
                fd.set_column(c, &((rp - rm) / (2.0 * h)));
            }
            let rel = (&jac - &fd).norm() / fd.norm();
            assert!(rel <= 1e-6, "seed {seed}: {rel}");
        }
        assert_eq!(
            system.residual(&ReducedUnknowns::new(0.0, vec![0.0, 0.0])),
            Err(Error::ZeroGeometricSav)
        );
    }

    #[test]
    fn constrained_step_satisfies_constraints_and_dissipates() {
        let curve = random_polygon(32, 17);
        let cfg = length_config(vec![ConstraintKind::Area]);
        let targets = ConstraintTargets::from_curve(&curve);
        let mut sav = SavState::initialize(&curve, &cfg).unwrap();
        let mut current = curve.clone();
        for _ in 0..5 {
            let out = advance(&current, &sav, &targets, &cfg).unwrap();
            assert!((out.curve.area() - targets.area).abs() <= 1e-12 * targets.area);
            assert!(out.sav.r_g.powi(2) <= sav.r_g.powi(2));
            assert!(out.sav.r_m.powi(2) <= sav.r_m.powi(2));
            assert!(out.report.margin_g >= 0.0 && out.report.margin_m >= 0.0);
            assert_eq!(out.report.response_solves, 3);
            current = out.curve;
            sav = out.sav;
        }
    }

    #[test]
    fn hminus1_step_keeps_zero_mean_velocity() {
        let curve = random_polygon(16, 23);
        let mut cfg = length_config(vec![]);
        cfg.normal_metric = NormalMetricKind::Hminus1;
        cfg.normal_stabilizer = NormalStabilizer::Hybrid { beta4: 10.0, beta2: 10.0 };
        cfg.dt = 1e-5;
        let sav = SavState::initialize(&curve, &cfg).unwrap();
        let ctx = StepContext::prepare(&curve, &sav, &cfg).unwrap();
        assert!(ctx.step.mass.dot(&ctx.responses.geometric).abs() <= 1e-12);
        let out = advance(&curve, &sav, &ConstraintTargets::from_curve(&curve), &cfg).unwrap();
        let v = DVector::from_vec(out.report.v_nu);
        assert!(ctx.step.mass.dot(&v).abs() <= 1e-10 * v.amax());
    }
}
