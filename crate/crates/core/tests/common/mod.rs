//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use dualsav::assembly::AssembledStep;
use dualsav::geometry::{FrozenFrame, PolygonalCurve};
use dualsav::stepper::{ReducedSystem, ReducedUnknowns, StepOutcome};
use dualsav::{ConstraintTargets, FlowConfig, SavState};
use nalgebra::{DMatrix, DVector};

/// Moore–Penrose inverse of a symmetric matrix by eigendecomposition.
pub fn pseudo_inverse(k: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = k.clone().symmetric_eigen();
    let n = k.nrows();
    let tol = 1e-10 * eig.eigenvalues.amax();
    let mut out = DMatrix::zeros(n, n);
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam.abs() > tol {
            let q = eig.eigenvectors.column(i);
            out += q * q.transpose() / lam;
        }
    }
    out
}

/// Orthonormal basis (columns) of `{u : mᵀu = 0}`.
pub fn zero_mean_basis(m: &DVector<f64>) -> DMatrix<f64> {
    let n = m.len();
    let u = m / m.norm();
    let eig = (DMatrix::identity(n, n) - &u * u.transpose()).symmetric_eigen();
    let cols: Vec<_> = (0..n)
        .filter(|&i| eig.eigenvalues[i] > 0.5)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    DMatrix::from_columns(&cols)
}

/// H⁻¹ response through `M_L K† M_L`, solved on the `(N−1)`-dimensional
/// zero-mean subspace.
pub fn hminus1_response(
    k: &DMatrix<f64>,
    m: &DVector<f64>,
    d: &DMatrix<f64>,
    dt: f64,
    f: &DVector<f64>,
) -> DVector<f64> {
    let ml = DMatrix::from_diagonal(m);
    let system = &ml * pseudo_inverse(k) * &ml + d * dt;
    let z = zero_mean_basis(m);
    let reduced = z.transpose() * &system * &z;
    let y = reduced
        .cholesky()
        .expect("reduced H⁻¹ system is SPD")
        .solve(&(z.transpose() * f));
    z * y
}

/// Largest relative residual of the coupled (unreduced) step equations,
/// each scaled by `max(1, largest term)`.
#[derive(Debug, Clone, Copy)]
pub struct MonolithicResiduals {
    pub normal: f64,
    pub tangential: f64,
    pub r_g: f64,
    pub r_m: f64,
    pub update: f64,
    pub constraints: f64,
    pub zero_mean: f64,
}

impl MonolithicResiduals {
    pub fn max(&self) -> f64 {
        [
            self.normal,
            self.tangential,
            self.r_g,
            self.r_m,
            self.update,
            self.constraints,
            self.zero_mean,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Substitutes the velocities and scalars of `out` into the coupled
/// velocity, SAV, node-update and constraint equations rebuilt from scratch
/// on `curve`.
pub fn monolithic_residuals(
    curve: &PolygonalCurve,
    sav: &SavState,
    targets: &ConstraintTargets,
    cfg: &FlowConfig,
    out: &StepOutcome,
) -> MonolithicResiduals {
    let frame = FrozenFrame::build(curve).unwrap();
    let step = AssembledStep::assemble(curve, &frame, cfg).unwrap();
    let v_nu = DVector::from_vec(out.report.v_nu.clone());
    let v_tau = DVector::from_vec(out.report.v_tau.clone());
    let r = out.sav.r_g;
    let r_m = out.sav.r_m;
    let lam = &out.report.lambdas;
    let dt = cfg.dt;
    let (s_g, s_m) = (step.geometric_shift, step.mesh_shift);
    let rel = |res: f64, scale: f64| res.abs() / scale.max(1.0);

    // M_ν V_ν = −(r/S_g) F_g − Σ λ_i G_i  (modulo span(m) for H⁻¹)
    let mv = &step.stabilized_normal * &v_nu;
    let mut rhs = &step.geometric_load * (-r / s_g);
    for (l, g) in lam.iter().zip(&step.constraint_loads) {
        rhs -= g * *l;
    }
    let mut res = &mv - &rhs;
    let mut zero_mean = 0.0;
    if step.zero_mean.is_some() {
        let m = &step.mass;
        res -= m * (res.sum() / m.sum());
        zero_mean = rel(m.dot(&v_nu), v_nu.amax() * m.sum());
    }
    let normal = res.amax() / mv.amax().max(rhs.amax()).max(1.0);

    let mt = &step.stabilized_tangential * &v_tau;
    let rhs_t = &step.mesh_load * (-r_m / s_m);
    let tangential = (&mt - &rhs_t).amax() / mt.amax().max(rhs_t.amax()).max(1.0);

    let fv = step.geometric_load.dot(&v_nu) / (2.0 * s_g);
    let coupling: f64 = lam
        .iter()
        .zip(&step.constraint_loads)
        .map(|(l, g)| l * g.dot(&v_nu) / (2.0 * r))
        .sum();
    let lhs = (r - sav.r_g) / dt;
    let r_g_res = rel(lhs - fv - coupling, lhs.abs().max(fv.abs()).max(coupling.abs()));

    let lhs_m = (r_m - sav.r_m) / dt;
    let fm = step.mesh_load.dot(&v_tau) / (2.0 * s_m);
    let r_m_res = rel(lhs_m - fm, lhs_m.abs().max(fm.abs()));

    let mut update: f64 = 0.0;
    for (j, x) in curve.vertices().iter().enumerate() {
        let predicted =
            x + (frame.nodal_normals[j] * v_nu[j] + frame.nodal_tangents[j] * v_tau[j]) * dt;
        update = update.max((predicted - out.curve.vertices()[j]).norm());
    }

    let constraints = cfg
        .constraints
        .iter()
        .map(|c| {
            let target = targets.value(*c);
            rel(c.evaluate(out.curve.vertices()) - target, target.abs())
        })
        .fold(0.0, f64::max);

    MonolithicResiduals {
        normal,
        tangential,
        r_g: r_g_res,
        r_m: r_m_res,
        update,
        constraints,
        zero_mean,
    }
}

/// Central-difference Jacobian of the reduced residual.
pub fn fd_jacobian(system: &ReducedSystem<'_>, xi: &ReducedUnknowns, h: f64) -> DMatrix<f64> {
    let x0 = xi.to_vector();
    let n = x0.len();
    let mut jac = DMatrix::zeros(n, n);
    for c in 0..n {
        let mut xp = x0.clone();
        let mut xm = x0.clone();
        xp[c] += h;
        xm[c] -= h;
        let rp = system.residual(&ReducedUnknowns::from_vector(&xp)).unwrap();
        let rm = system.residual(&ReducedUnknowns::from_vector(&xm)).unwrap();
        jac.set_column(c, &((rp - rm) / (2.0 * h)));
    }
    jac
}
