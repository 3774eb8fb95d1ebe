//! Gaussian (covariance-matrix) treatment of the ideal two-mode master
//! equation `dρ/dt = κ_a D[Ã]ρ + κ_b D[B̃]ρ` with `Ã = μa + νb†`,
//! `B̃ = μb + νa†`, `μ = cosh r`, `ν = sinh r`.
//!
//! Quadratures are ordered `(x_a, p_a, x_b, p_b)` with `a = (x + ip)/√2`, so
//! the vacuum has `var(x) = 1/2`. A jump operator `L = cᵀR` linear in the
//! quadratures contributes drift `−κ Im(Ω c c†)` and diffusion
//! `κ Re(Ω c c† Ωᵀ)` to `dσ/dt = Aσ + σAᵀ + D`.
//!
//! The steady state is the two-mode squeezed vacuum, whose EPR variance
//! `var(x₊) + var(p₋)` equals `e^{−2r} = (μ−ν)²`.

use nalgebra::{Matrix4, SMatrix, SVector, Vector4};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Result, SimError};

type M16 = SMatrix<f64, 16, 16>;
type M8 = SMatrix<f64, 8, 8>;

/// Tolerance of the physicality test `σ + iΩ/2 ≥ 0`.
pub const PHYSICALITY_TOL: f64 = 1e-9;

/// Symplectic form for `(x_a, p_a, x_b, p_b)`.
pub fn symplectic_form() -> Matrix4<f64> {
    Matrix4::new(
        0.0, 1.0, 0.0, 0.0, //
        -1.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        0.0, 0.0, -1.0, 0.0,
    )
}

/// Two-mode Gaussian state: first moments and covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

impl GaussianState {
    pub fn vacuum() -> Self {
        Self { mean: Vector4::zeros(), cov: Matrix4::identity() * 0.5 }
    }

    /// Builds and validates a state.
    pub fn new(mean: Vector4<f64>, cov: Matrix4<f64>) -> Result<Self> {
        let s = Self { mean, cov };
        s.check_physical()?;
        Ok(s)
    }

    /// Smallest eigenvalue of `σ + iΩ/2`, computed through its real 8×8
    /// representation.
    pub fn min_symplectic_eigenvalue(&self) -> f64 {
        let half_omega = symplectic_form() * 0.5;
        let mut big = M8::zeros();
        big.fixed_view_mut::<4, 4>(0, 0).copy_from(&self.cov);
        big.fixed_view_mut::<4, 4>(4, 4).copy_from(&self.cov);
        big.fixed_view_mut::<4, 4>(0, 4).copy_from(&(-half_omega));
        big.fixed_view_mut::<4, 4>(4, 0).copy_from(&half_omega);
        big.symmetric_eigenvalues().min()
    }

    pub fn is_physical(&self) -> bool {
        self.check_physical().is_ok()
    }

    pub fn check_physical(&self) -> Result<()> {
        let asym = (self.cov - self.cov.transpose()).abs().max();
        if asym > PHYSICALITY_TOL || self.cov.iter().any(|v| !v.is_finite()) {
            return Err(SimError::domain("covariance matrix must be finite and symmetric"));
        }
        let m = self.min_symplectic_eigenvalue();
        if m < -PHYSICALITY_TOL {
            return Err(SimError::domain(format!(
                "covariance violates the uncertainty principle (min eigenvalue {m:.3e})"
            )));
        }
        Ok(())
    }

    /// Two-mode squeezed vacuum with squeezing parameter `r`.
    pub fn two_mode_squeezed(r: f64) -> Self {
        let c = 0.5 * (2.0 * r).cosh();
        let s = 0.5 * (2.0 * r).sinh();
        let cov = Matrix4::new(
            c, 0.0, -s, 0.0, //
            0.0, c, 0.0, s, //
            -s, 0.0, c, 0.0, //
            0.0, s, 0.0, c,
        );
        Self { mean: Vector4::zeros(), cov }
    }
}

/// Squeezing parameter and jump rates of the ideal two-mode model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TmsSpec {
    pub r: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
}

impl TmsSpec {
    pub fn new(r: f64, kappa_a: f64, kappa_b: f64) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(SimError::domain(format!("squeezing parameter r must be >= 0 (got {r})")));
        }
        if !(kappa_a > 0.0) || !(kappa_b > 0.0) {
            return Err(SimError::domain("jump rates must be positive"));
        }
        Ok(Self { r, kappa_a, kappa_b })
    }

    pub fn mu(&self) -> f64 {
        self.r.cosh()
    }

    pub fn nu(&self) -> f64 {
        self.r.sinh()
    }
}

fn jump_contribution(c: [Complex64; 4], kappa: f64) -> (Matrix4<f64>, Matrix4<f64>) {
    let omega = symplectic_form();
    // w = Ω c
    let mut w = [Complex64::new(0.0, 0.0); 4];
    for i in 0..4 {
        for j in 0..4 {
            w[i] += c[j] * omega[(i, j)];
        }
    }
    let mut drift = Matrix4::zeros();
    let mut diff = Matrix4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            drift[(i, j)] = -kappa * (w[i] * c[j].conj()).im;
            diff[(i, j)] = kappa * (w[i] * w[j].conj()).re;
        }
    }
    (drift, diff)
}

/// Drift `A` and diffusion `D` with `dσ/dt = Aσ + σAᵀ + D`.
pub fn drift_diffusion_from_jumps(spec: &TmsSpec) -> (Matrix4<f64>, Matrix4<f64>) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (mu, nu) = (spec.mu(), spec.nu());
    // a = (x_a + i p_a)/√2, b† = (x_b − i p_b)/√2
    let a_tilde = [
        Complex64::new(mu * s, 0.0),
        Complex64::new(0.0, mu * s),
        Complex64::new(nu * s, 0.0),
        Complex64::new(0.0, -nu * s),
    ];
    let b_tilde = [
        Complex64::new(nu * s, 0.0),
        Complex64::new(0.0, -nu * s),
        Complex64::new(mu * s, 0.0),
        Complex64::new(0.0, mu * s),
    ];
    let (a1, d1) = jump_contribution(a_tilde, spec.kappa_a);
    let (a2, d2) = jump_contribution(b_tilde, spec.kappa_b);
    (a1 + a2, d1 + d2)
}

/// Solves `Aσ + σAᵀ + D = 0` through the 16×16 Kronecker system.
pub fn lyapunov_steady_state(drift: &Matrix4<f64>, diffusion: &Matrix4<f64>) -> Result<Matrix4<f64>> {
    let mut k = M16::zeros();
    let id = Matrix4::<f64>::identity();
    // Column-major vec: vec(Aσ) = (I⊗A) vec σ, vec(σAᵀ) = (A⊗I) vec σ.
    for i in 0..4 {
        for j in 0..4 {
            for p in 0..4 {
                for q in 0..4 {
                    k[(i * 4 + p, j * 4 + q)] = id[(i, j)] * drift[(p, q)] + drift[(i, j)] * id[(p, q)];
                }
            }
        }
    }
    let rhs = SVector::<f64, 16>::from_iterator(diffusion.iter().map(|v| -v));
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| SimError::Numerical("Lyapunov system is singular (no unique steady state)".into()))?;
    let sigma = Matrix4::from_iterator(sol.iter().copied());
    Ok(0.5 * (sigma + sigma.transpose()))
}

/// Unique steady state of the two-mode model.
pub fn steady_state(spec: &TmsSpec) -> Result<GaussianState> {
    let (a, d) = drift_diffusion_from_jumps(spec);
    let cov = lyapunov_steady_state(&a, &d)?;
    Ok(GaussianState { mean: Vector4::zeros(), cov })
}

/// Exact propagation `σ(t) = e^{At}(σ₀ − σ∞)e^{Aᵀt} + σ∞`, `m(t) = e^{At}m₀`.
pub fn evolve_gaussian(state0: &GaussianState, spec: &TmsSpec, t: f64) -> Result<GaussianState> {
    state0.check_physical()?;
    if !(t >= 0.0) {
        return Err(SimError::domain("time must be >= 0"));
    }
    let (a, d) = drift_diffusion_from_jumps(spec);
    let sinf = lyapunov_steady_state(&a, &d)?;
    let e = (a * t).exp();
    let cov = e * (state0.cov - sinf) * e.transpose() + sinf;
    let cov = 0.5 * (cov + cov.transpose());
    Ok(GaussianState { mean: e * state0.mean, cov })
}

/// `var((x_a + x_b)/√2) + var((p_a − p_b)/√2)`; below 1 certifies entanglement.
pub fn epr_variance(state: &GaussianState) -> f64 {
    let c = &state.cov;
    let var_xp = 0.5 * (c[(0, 0)] + c[(2, 2)] + 2.0 * c[(0, 2)]);
    let var_pm = 0.5 * (c[(1, 1)] + c[(3, 3)] - 2.0 * c[(1, 3)]);
    var_xp + var_pm
}
