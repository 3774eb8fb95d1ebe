//! Shared parameter algebra: squeezing parameters, optical depth and the
//! inseparability measure `ξ`.
//!
//! The jump operators `A = μ a + ν b†` are normalised so that `μ² − ν² = 1`.
//! The user-facing knob is `Z = (|μ| − |ν|)⁻¹`; the ideal (noise-free)
//! steady state reaches `ξ = Z⁻²`.

use serde::Serialize;

use crate::error::{Result, SimError};

/// Tolerance on the normalisation `μ² − ν² = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Coefficients of the nonlocal jump operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqueezingParams {
    pub mu: f64,
    pub nu: f64,
}

impl SqueezingParams {
    /// Validates `μ ≥ 1`, `|ν| < μ` and `μ² − ν² = 1`.
    pub fn new(mu: f64, nu: f64) -> Result<Self> {
        if !mu.is_finite() || !nu.is_finite() {
            return Err(SimError::domain("mu and nu must be finite"));
        }
        if mu < 1.0 || nu.abs() >= mu {
            return Err(SimError::domain(format!(
                "squeezing parameters need mu >= 1 and |nu| < mu (mu = {mu}, nu = {nu})"
            )));
        }
        let norm = mu * mu - nu * nu;
        if (norm - 1.0).abs() > NORMALIZATION_TOL * mu * mu {
            return Err(SimError::domain(format!(
                "squeezing parameters must satisfy mu^2 - nu^2 = 1 (got {norm})"
            )));
        }
        Ok(Self { mu, nu })
    }

    /// Rescales a pair of unnormalised weights `(μ', ν')` onto `μ² − ν² = 1`.
    pub fn normalized(mu: f64, nu: f64) -> Result<Self> {
        let norm = mu * mu - nu * nu;
        if !(norm > 0.0) || mu <= 0.0 {
            return Err(SimError::domain(format!(
                "cannot normalise (mu, nu) = ({mu}, {nu}): need |nu| < mu"
            )));
        }
        let s = norm.sqrt();
        Ok(Self { mu: mu / s, nu: nu / s })
    }

    /// `Z = (|μ| − |ν|)⁻¹`.
    pub fn z(&self) -> f64 {
        1.0 / (self.mu.abs() - self.nu.abs())
    }

    /// `(|μ| − |ν|)²`, the ideal steady-state `ξ`.
    pub fn ideal_xi(&self) -> f64 {
        let g = self.mu.abs() - self.nu.abs();
        g * g
    }
}

/// `μ = (Δ+Ω)/(2√(ΔΩ))`, `ν = (Δ−Ω)/(2√(ΔΩ))` from probe detuning and Larmor
/// frequency.
pub fn squeezing_from_detuning(delta: f64, omega: f64) -> Result<SqueezingParams> {
    let prod = delta * omega;
    if !(prod > 0.0) || !prod.is_finite() {
        return Err(SimError::domain(format!(
            "detuning and Larmor frequency need the same sign and be non-zero (delta*omega = {prod})"
        )));
    }
    // Opposite-sign branch: both negative gives the same ratio as both positive.
    let (delta, omega) = (delta.abs(), omega.abs());
    let root = 2.0 * prod.sqrt();
    let mu = (delta + omega) / root;
    let nu = (delta - omega) / root;
    if nu.abs() >= mu {
        return Err(SimError::domain("squeezing from detuning is degenerate"));
    }
    Ok(SqueezingParams { mu, nu })
}

/// Inverts `Z = (|μ| − |ν|)⁻¹` on the branch `ν ≥ 0`.
pub fn squeezing_from_z(z: f64) -> Result<SqueezingParams> {
    if !(z >= 1.0) || !z.is_finite() {
        return Err(SimError::domain(format!("Z must be finite and >= 1 (got {z})")));
    }
    Ok(SqueezingParams {
        mu: 0.5 * (z + 1.0 / z),
        nu: 0.5 * (z - 1.0 / z),
    })
}

/// `Z` of a parameter set.
pub fn z_of(params: &SqueezingParams) -> f64 {
    params.z()
}

/// `(|μ| − |ν|)²`.
pub fn xi_ideal(params: &SqueezingParams) -> f64 {
    params.ideal_xi()
}

/// Size and light-field geometry of one ensemble (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleGeometry {
    pub n_atoms: f64,
    pub length_l: f64,
    pub k_laser: f64,
    pub separation_r: f64,
}

/// Why a geometry lies outside the regime of the asymptotic formulas.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RegimeWarning {
    /// `k_L L` below the threshold.
    ShortCloud { kl: f64, threshold: f64 },
    /// `k_L` not large compared to `R/L²`.
    FarSeparated { k_laser: f64, r_over_l2: f64 },
}

impl std::fmt::Display for RegimeWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RegimeWarning::ShortCloud { kl, threshold } => {
                write!(f, "k_L L = {kl:.4} is below {threshold}")
            }
            RegimeWarning::FarSeparated { k_laser, r_over_l2 } => {
                write!(f, "k_L = {k_laser:.4e} is not >> R/L^2 = {r_over_l2:.4e}")
            }
        }
    }
}

impl EnsembleGeometry {
    pub const DEFAULT_KL_THRESHOLD: f64 = 10.0;
    /// Minimum ratio `k_L / (R/L²)` regarded as "much larger".
    pub const SEPARATION_RATIO: f64 = 10.0;

    pub fn kl(&self) -> f64 {
        self.k_laser * self.length_l
    }

    /// Regime diagnostics with the default thresholds. Never fails.
    pub fn regime_warnings(&self) -> Vec<RegimeWarning> {
        self.regime_warnings_with(Self::DEFAULT_KL_THRESHOLD)
    }

    pub fn regime_warnings_with(&self, kl_threshold: f64) -> Vec<RegimeWarning> {
        let mut out = Vec::new();
        let kl = self.kl();
        if kl < kl_threshold {
            out.push(RegimeWarning::ShortCloud { kl, threshold: kl_threshold });
        }
        let r_over_l2 = self.separation_r / (self.length_l * self.length_l);
        if self.k_laser < Self::SEPARATION_RATIO * r_over_l2 {
            out.push(RegimeWarning::FarSeparated { k_laser: self.k_laser, r_over_l2 });
        }
        out
    }
}

/// Resonant optical depth `d = 3N / (4 (k_L L)²)`.
pub fn optical_depth(geom: &EnsembleGeometry) -> Result<f64> {
    let kl = geom.kl();
    if !(kl > 0.0) {
        return Err(SimError::domain(format!("k_L L must be positive (got {kl})")));
    }
    if geom.n_atoms < 0.0 {
        return Err(SimError::domain("atom number must be non-negative"));
    }
    Ok(3.0 * geom.n_atoms / (4.0 * kl * kl))
}

/// Result of evaluating the inseparability measure
/// `ξ = [var(J_{y,I}+J_{y,II}) + var(J_{z,I}−J_{z,II})] / (|⟨J_{x,I}⟩| + |⟨J_{x,II}⟩|)`.
///
/// `mean_jx` is the per-ensemble average `(|⟨J_{x,I}⟩| + |⟨J_{x,II}⟩|)/2`, so
/// that `xi = variance_sum / (2 mean_jx)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntanglementReport {
    pub xi: f64,
    pub variance_sum: f64,
    pub mean_jx: f64,
}

impl EntanglementReport {
    pub fn new(variance_sum: f64, mean_jx: f64) -> Result<Self> {
        let mean_jx = mean_jx.abs();
        if mean_jx < 1e-12 {
            return Err(SimError::domain(
                "longitudinal spin vanishes; the entanglement measure is undefined",
            ));
        }
        let variance_sum = variance_sum.max(0.0);
        Ok(Self { xi: variance_sum / (2.0 * mean_jx), variance_sum, mean_jx })
    }

    pub fn is_entangled(&self) -> bool {
        self.xi < 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detuning_example() {
        let p = squeezing_from_detuning(2.0, 1.0).unwrap();
        assert!((p.mu - 3.0 / (2.0 * 2f64.sqrt())).abs() < 1e-15);
        assert!((p.nu - 1.0 / (2.0 * 2f64.sqrt())).abs() < 1e-15);
        assert!(squeezing_from_detuning(1.0, -1.0).is_err());
        assert!(squeezing_from_detuning(0.0, 1.0).is_err());
    }

    #[test]
    fn z_two() {
        let p = squeezing_from_z(2.0).unwrap();
        assert_eq!((p.mu, p.nu), (1.25, 0.75));
        assert!((xi_ideal(&p) - 0.25).abs() < 1e-15);
        assert!(squeezing_from_z(0.5).is_err());
    }

    #[test]
    fn normalised_rescaling() {
        let p = SqueezingParams::normalized(3.0, 1.0).unwrap();
        assert!((p.mu * p.mu - p.nu * p.nu - 1.0).abs() < 1e-14);
        assert!(SqueezingParams::normalized(1.0, 2.0).is_err());
    }

    #[test]
    fn report_rejects_zero_polarisation() {
        assert!(EntanglementReport::new(1.0, 0.0).is_err());
        let r = EntanglementReport::new(2.0, 2.0).unwrap();
        assert_eq!(r.xi, 0.5);
    }
}
