//! Dense symmetric positive-definite solves and the zero-mean response path
//! used by the H⁻¹ normal metric.
//!
//! [`Cholesky`] factors a dense matrix but skips the zero envelope of each
//! column, so the periodic banded matrices of the L² metric factor in
//! `O(N b²)` while fully dense H⁻¹ systems take the usual `O(N³/3)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `A = Uᵀ U` with `U` upper triangular, stored column-major. Column `i` of
/// `U` is nonzero only in rows `first[i]..=i`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    upper: Vec<f64>,
    first: Vec<usize>,
}

impl Cholesky {
    /// Factors the symmetric matrix `a`. Only the upper triangle is read.
    pub fn factor(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "Cholesky needs a square matrix");
        let src = a.as_slice();
        let first: Vec<usize> = (0..n)
            .map(|i| {
                let col = &src[i * n..i * n + i];
                col.iter().position(|&v| v != 0.0).unwrap_or(i)
            })
            .collect();

        let mut upper = vec![0.0; n * n];
        for i in 0..n {
            let fi = first[i];
            for k in fi..i {
                let lo = fi.max(first[k]);
                let (ck, ci) = (k * n, i * n);
                let mut s = src[ci + k];
                for j in lo..k {
                    s -= upper[ck + j] * upper[ci + j];
                }
                upper[ci + k] = s / upper[ck + k];
            }
            let ci = i * n;
            let mut d = src[ci + i];
            for j in fi..i {
                d -= upper[ci + j] * upper[ci + j];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: i, value: d });
            }
            upper[ci + i] = d.sqrt();
        }
        Ok(Self { n, upper, first })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        assert_eq!(x.len(), n);
        // Uᵀ y = b
        for i in 0..n {
            let ci = i * n;
            let mut s = x[i];
            for j in self.first[i]..i {
                s -= self.upper[ci + j] * x[j];
            }
            x[i] = s / self.upper[ci + i];
        }
        // U x = y
        for i in (0..n).rev() {
            let ci = i * n;
            let xi = x[i] / self.upper[ci + i];
            x[i] = xi;
            for j in self.first[i]..i {
                x[j] -= self.upper[ci + j] * xi;
            }
        }
    }
}

/// Solves `M x = b` for symmetric positive-definite `M`.
pub fn solve_spd(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(Cholesky::factor(m)?.solve(b))
}

/// Lumped masses defining the discrete zero-mean subspace `{u : mᵀu = 0}`
/// and the coefficient `c` of the rank-one completion `K + c m mᵀ`.
#[derive(Debug, Clone)]
pub struct ZeroMeanContext {
    pub mass: DVector<f64>,
    pub completion: f64,
    total_mass: f64,
}

impl ZeroMeanContext {
    /// Uses the default completion coefficient `c = 1 / (1ᵀm)`.
    pub fn new(mass: DVector<f64>) -> Result<Self> {
        let total = mass.sum();
        Self::with_completion(mass, 1.0 / total)
    }

    pub fn with_completion(mass: DVector<f64>, completion: f64) -> Result<Self> {
        let total_mass = mass.sum();
        if !(total_mass > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "zero-mean context needs positive total mass, got {total_mass}"
            )));
        }
        if !(completion > 0.0) || !completion.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "completion coefficient must be positive, got {completion}"
            )));
        }
        Ok(Self {
            mass,
            completion,
            total_mass,
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }
}

/// `F − (1ᵀF / 1ᵀm) m`.
pub fn dual_zero_mean_project(f: &DVector<f64>, ctx: &ZeroMeanContext) -> DVector<f64> {
    let mean = f.sum() / ctx.total_mass;
    f - &ctx.mass * mean
}

/// Applies `(K + c m mᵀ)⁻¹` for a symmetric positive semi-definite `K` whose
/// kernel is exactly the constants.
///
/// For any `b`, the solution is `y + α 1` where `K y = Π* b` is solved with
/// `y₀ = 0` (the pinned submatrix is positive definite and keeps the band of
/// `K`), and `α` fixes the component along the constants.
#[derive(Debug, Clone)]
pub struct CompletedStiffness {
    pinned: Cholesky,
    ctx: ZeroMeanContext,
}

impl CompletedStiffness {
    pub fn new(stiffness: &DMatrix<f64>, ctx: &ZeroMeanContext) -> Result<Self> {
        let n = stiffness.nrows();
        let pinned = stiffness.view((1, 1), (n - 1, n - 1)).into_owned();
        Ok(Self {
            pinned: Cholesky::factor(&pinned)?,
            ctx: ctx.clone(),
        })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let ctx = &self.ctx;
        let total = ctx.total_mass;
        let sum_b = b.sum();
        let mut y = dual_zero_mean_project(b, ctx);
        y[0] = 0.0;
        self.pinned.solve_in_place(&mut y.as_mut_slice()[1..]);
        let alpha = (sum_b / (ctx.completion * total) - ctx.mass.dot(&y)) / total;
        y.add_scalar_mut(alpha);
        y
    }
}

/// Dense `M_L (K + c m mᵀ)⁻¹ M_L`. On zero-mean vectors this is the discrete
/// H⁻¹ metric `M_L K† M_L`.
pub fn completed_inverse_metric(
    stiffness: &DMatrix<f64>,
    ctx: &ZeroMeanContext,
) -> Result<DMatrix<f64>> {
    let n = stiffness.nrows();
    let completed = CompletedStiffness::new(stiffness, ctx)?;
    let m = &ctx.mass;
    let mut a = DMatrix::zeros(n, n);
    let mut e = DVector::zeros(n);
    for j in 0..n {
        e[j] = m[j];
        let col = completed.solve(&e);
        e[j] = 0.0;
        for i in 0..n {
            a[(i, j)] = m[i] * col[i];
        }
    }
    // symmetric in exact arithmetic
    for j in 0..n {
        for i in 0..j {
            let s = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = s;
            a[(j, i)] = s;
        }
    }
    Ok(a)
}

/// Factorization of the bordered system
/// `[[M, m], [mᵀ, 0]] [V; μ] = [Π* F; 0]`, reusable for several loads.
#[derive(Debug, Clone)]
pub struct ZeroMeanSolver {
    chol: Cholesky,
    ctx: ZeroMeanContext,
    mass_response: DVector<f64>,
    mass_norm: f64,
}

impl ZeroMeanSolver {
    /// `system` must be symmetric positive definite on the whole space; the
    /// stabilized H⁻¹ matrix `M_L K̃⁻¹ M_L + Δt D` is.
    pub fn new(system: &DMatrix<f64>, ctx: &ZeroMeanContext) -> Result<Self> {
        let chol = Cholesky::factor(system)?;
        let mass_response = chol.solve(&ctx.mass);
        let mass_norm = ctx.mass.dot(&mass_response);
        if !(mass_norm > 0.0) || !mass_norm.is_finite() {
            return Err(Error::SingularBorderedSystem);
        }
        Ok(Self {
            chol,
            ctx: ctx.clone(),
            mass_response,
            mass_norm,
        })
    }

    /// Returns `V` with `mᵀV = 0` and `M V − Π* F ∈ span(m)`.
    pub fn solve(&self, f: &DVector<f64>) -> DVector<f64> {
        self.solve_with_multiplier(f).0
    }

    /// Also returns the border multiplier `μ` with `M V + μ m = Π* F`.
    pub fn solve_with_multiplier(&self, f: &DVector<f64>) -> (DVector<f64>, f64) {
        let projected = dual_zero_mean_project(f, &self.ctx);
        let mut v = self.chol.solve(&projected);
        let mu = self.ctx.mass.dot(&v) / self.mass_norm;
        v.axpy(-mu, &self.mass_response, 1.0);
        (v, mu)
    }
}

/// One zero-mean response solve of `(M_L K̃⁻¹ M_L + Δt D_ν) V = Π* F`.
pub fn solve_zero_mean_response(
    stiffness: &DMatrix<f64>,
    normal_stabilizer: &DMatrix<f64>,
    dt: f64,
    f: &DVector<f64>,
    ctx: &ZeroMeanContext,
) -> Result<DVector<f64>> {
    let mut system = completed_inverse_metric(stiffness, ctx)?;
    system += normal_stabilizer * dt;
    Ok(ZeroMeanSolver::new(&system, ctx)?.solve(f))
}
