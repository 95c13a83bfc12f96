//! Lyapunov certificates for connected interconnections and the disagreement
//! energy `V(x) = xᵀ(Ω ⊗ I_n)x`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SyncError};
use crate::graph::{left_fixed_vector, InterconnectionMatrix, LeftFixedVector};
use crate::linalg::{spectral_norm, sym_eig_range, symmetrize};
use crate::tol::{TAU_LYAP, TAU_SOLVE};
use crate::TimeKind;

/// `(r, Ω, ρ)` for a connected interconnection.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovCertificate {
    pub r: LeftFixedVector,
    pub omega: DMatrix<f64>,
    pub rho: f64,
    pub kind: TimeKind,
    /// Frobenius norm of the Lyapunov residual.
    pub residual: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl LyapunovCertificate {
    /// Builds `r` and `Ω` for `m`, choosing the equation by its time kind.
    pub fn for_interconnection(m: &InterconnectionMatrix) -> Result<Self> {
        let r = left_fixed_vector(m)?;
        match m.kind() {
            TimeKind::Continuous => solve_continuous_lyapunov(m, &r),
            TimeKind::Discrete => solve_discrete_lyapunov(m, &r),
        }
    }

    pub fn p(&self) -> usize {
        self.omega.nrows()
    }

    /// `V(x - x̄)`.
    pub fn energy(&self, x: &DVector<f64>, xbar: &DVector<f64>) -> Result<f64> {
        disagreement_energy(x, xbar, &self.omega)
    }

    /// `x̄ = (1rᵀ ⊗ I_n) x`.
    pub fn consensus_stack(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let p = self.p();
        if !x.len().is_multiple_of(p) {
            return Err(SyncError::Shape(format!(
                "state length {} not a multiple of p = {p}",
                x.len()
            )));
        }
        let n = x.len() / p;
        let states = DMatrix::from_column_slice(n, p, x.as_slice());
        let point = states * self.r.as_vector();
        Ok(DVector::from_fn(n * p, |k, _| point[k % n]))
    }
}

fn deflated(m: &InterconnectionMatrix, r: &LeftFixedVector) -> Result<DMatrix<f64>> {
    if r.len() != m.p() {
        return Err(SyncError::Shape(format!(
            "r has length {}, expected {}",
            r.len(),
            m.p()
        )));
    }
    Ok(m.entries() - r.projector())
}

fn finish(
    m: &InterconnectionMatrix,
    r: &LeftFixedVector,
    omega: DMatrix<f64>,
    residual: f64,
    kind: TimeKind,
) -> Result<LyapunovCertificate> {
    let scale = spectral_norm(&omega).max(1.0);
    if !(residual / scale < TAU_LYAP) {
        return Err(SyncError::LyapunovResidual(residual));
    }
    let (sigma_min, sigma_max) = sym_eig_range(&omega);
    if !(sigma_min > 0.0) {
        return Err(SyncError::LyapunovResidual(residual));
    }
    let growth = match kind {
        TimeKind::Continuous => spectral_norm(m.entries()).powi(3),
        TimeKind::Discrete => spectral_norm(&m.coupling()).powi(2),
    };
    Ok(LyapunovCertificate {
        r: r.clone(),
        rho: sigma_max * growth.max(1.0),
        omega,
        kind,
        residual,
        sigma_min,
        sigma_max,
    })
}

fn solve_vectorized(op: DMatrix<f64>, p: usize) -> Result<DMatrix<f64>> {
    let rhs = -DVector::from_column_slice(DMatrix::<f64>::identity(p, p).as_slice());
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or(SyncError::LyapunovResidual(f64::INFINITY))?;
    Ok(symmetrize(&DMatrix::from_column_slice(
        p,
        p,
        sol.as_slice(),
    )))
}

/// Solves `(Γ - 1rᵀ)ᵀΩ + Ω(Γ - 1rᵀ) = -I` through the Kronecker-vectorized system.
pub fn solve_continuous_lyapunov(
    g: &InterconnectionMatrix,
    r: &LeftFixedVector,
) -> Result<LyapunovCertificate> {
    if g.kind() != TimeKind::Continuous {
        return Err(SyncError::Unsupported(
            "continuous Lyapunov equation needs a continuous interconnection".into(),
        ));
    }
    let a = deflated(g, r)?;
    let max_real = a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_real >= -TAU_SOLVE {
        return Err(SyncError::NotHurwitz { max_real });
    }
    let p = g.p();
    let eye = DMatrix::<f64>::identity(p, p);
    let at = a.transpose();
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let omega = solve_vectorized(op, p)?;
    let residual = (&at * &omega + &omega * &a + &eye).norm();
    finish(g, r, omega, residual, TimeKind::Continuous)
}

/// Solves `(Λ - 1rᵀ)ᵀΩ(Λ - 1rᵀ) - Ω = -I` through the Kronecker-vectorized system.
pub fn solve_discrete_lyapunov(
    l: &InterconnectionMatrix,
    r: &LeftFixedVector,
) -> Result<LyapunovCertificate> {
    if l.kind() != TimeKind::Discrete {
        return Err(SyncError::Unsupported(
            "discrete Lyapunov equation needs a discrete interconnection".into(),
        ));
    }
    let a = deflated(l, r)?;
    let radius = crate::linalg::spectral_radius(&a);
    if radius >= 1.0 - TAU_SOLVE {
        return Err(SyncError::NotSchur { radius });
    }
    let p = l.p();
    let eye = DMatrix::<f64>::identity(p, p);
    let at = a.transpose();
    let op = at.kronecker(&at) - DMatrix::<f64>::identity(p * p, p * p);
    let omega = solve_vectorized(op, p)?;
    let residual = (&at * &omega * &a - &omega + &eye).norm();
    finish(l, r, omega, residual, TimeKind::Discrete)
}

/// `(x - x̄)ᵀ(Ω ⊗ I_n)(x - x̄)` without forming the Kronecker product.
pub fn disagreement_energy(
    x: &DVector<f64>,
    xbar: &DVector<f64>,
    omega: &DMatrix<f64>,
) -> Result<f64> {
    let p = omega.nrows();
    if !omega.is_square() || p == 0 || x.len() != xbar.len() || !x.len().is_multiple_of(p) {
        return Err(SyncError::Shape(format!(
            "energy needs |x| = |x̄| = n·p with p = {p}, got {} and {}",
            x.len(),
            xbar.len()
        )));
    }
    let n = x.len() / p;
    let d = DMatrix::from_column_slice(n, p, (x - xbar).as_slice());
    let gram = d.transpose() * d;
    Ok(omega.component_mul(&gram).sum())
}

/// `√(σ_max/σ_min)(1 + √p) + √p`: bound on `|x(t)|/|x(0)|` for a connected interconnection.
pub fn stability_alpha(cert: &LyapunovCertificate) -> f64 {
    let sp = (cert.p() as f64).sqrt();
    (cert.sigma_max / cert.sigma_min).sqrt() * (1.0 + sp) + sp
}

/// Growth bound for an interconnection that need not be connected.
///
/// Handles interconnections whose weak components are each connected or
/// isolated nodes; the bound is the largest per-component constant (1 for an
/// isolated node). Other structures are reported as unsupported.
pub fn stability_bound(m: &InterconnectionMatrix) -> Result<f64> {
    let mut alpha: f64 = 1.0;
    for comp in m.weak_components() {
        if comp.len() == 1 {
            continue;
        }
        let sub = m.restrict(&comp)?;
        if !sub.is_connected() {
            return Err(SyncError::Unsupported(format!(
                "component {comp:?} is weakly but not directionally connected"
            )));
        }
        alpha = alpha.max(stability_alpha(&LyapunovCertificate::for_interconnection(
            &sub,
        )?));
    }
    Ok(alpha)
}

/// Per-system radius `(σ_max/σ_min · Σ_j |x_j(0) - x̄|²)^{1/2}` around the consensus point.
pub fn consensus_ball_radius(cert: &LyapunovCertificate, x0: &DVector<f64>) -> Result<f64> {
    let xbar = cert.consensus_stack(x0)?;
    let spread = (x0 - xbar).norm_squared();
    Ok((cert.sigma_max / cert.sigma_min * spread).sqrt())
}

/// `(A ⊗ B) v` by reshaping `v` into a matrix and computing `B V Aᵀ`.
pub fn kron_apply(a: &DMatrix<f64>, b: &DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    if v.len() != a.ncols() * b.ncols() {
        return Err(SyncError::Shape(format!(
            "vector of length {} cannot multiply a ({}x{})⊗({}x{}) product",
            v.len(),
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let reshaped = DMatrix::from_column_slice(b.ncols(), a.ncols(), v.as_slice());
    let out = b * reshaped * a.transpose();
    Ok(DVector::from_column_slice(out.as_slice()))
}
