//! Laser-induced transition rates between Cs ground-state sublevels.
//!
//! Off-resonant light drives two-photon Raman transitions `a → e → b` through
//! every excited hyperfine level `e` of the line. Resonant light (optical
//! pumping) excites a single level, which then decays by its branching ratios.
//! Laser parameters are given in MHz; rates come out in MHz.

use std::str::FromStr;

use serde::Serialize;

use super::angular::hyperfine_amplitude;
use super::levels::{HyperfineLevel, LevelTable, Line, Manifold, TWICE_I};
use crate::error::{Result, SimError};

/// Natural linewidth `γ_LW` of the Cs D lines, MHz.
pub const GAMMA_LW_MHZ: f64 = 5.2;

/// Doppler suppression `k = γ/δ_Doppler` of resonant excitation in a warm vapour.
pub const K_DOPPLER: f64 = 5.0 / 380.0;

/// An excited level closer than this many linewidths counts as resonant.
pub const RESONANCE_WIDTHS: f64 = 10.0;

/// Light polarization relative to the quantization axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Polarization {
    SigmaPlus,
    SigmaMinus,
    Pi,
    /// Linear polarization perpendicular to the axis: equal σ⁺ and σ⁻ weight.
    Transverse,
}

impl Polarization {
    /// Spherical components `(q, |ε_q|²)`.
    pub fn components(self) -> &'static [(i32, f64)] {
        match self {
            Polarization::SigmaPlus => &[(1, 1.0)],
            Polarization::SigmaMinus => &[(-1, 1.0)],
            Polarization::Pi => &[(0, 1.0)],
            Polarization::Transverse => &[(-1, 0.5), (1, 0.5)],
        }
    }
}

impl FromStr for Polarization {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma+" | "σ+" => Ok(Polarization::SigmaPlus),
            "sigma-" | "σ-" => Ok(Polarization::SigmaMinus),
            "pi" | "π" => Ok(Polarization::Pi),
            "transverse" => Ok(Polarization::Transverse),
            _ => Err(SimError::domain(format!(
                "unknown polarization '{s}' (expected sigma+, sigma-, pi or transverse)"
            ))),
        }
    }
}

/// A laser field. The detuning is measured from the transition
/// `S1/2 F = reference.0 → excited F′ = reference.1` of `line`; positive is blue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaserSpec {
    pub rabi_mhz: f64,
    pub detuning_mhz: f64,
    pub reference: (i32, i32),
    pub polarization: Polarization,
    pub line: Line,
}

impl LaserSpec {
    pub fn new(rabi_mhz: f64, detuning_mhz: f64, reference: (i32, i32), polarization: Polarization, line: Line) -> Result<Self> {
        let spec = Self { rabi_mhz, detuning_mhz, reference, polarization, line };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rabi_mhz >= 0.0) || !self.rabi_mhz.is_finite() {
            return Err(SimError::domain(format!("Rabi frequency must be finite and >= 0 (got {})", self.rabi_mhz)));
        }
        if !self.detuning_mhz.is_finite() {
            return Err(SimError::domain("detuning must be finite"));
        }
        let table = LevelTable::cesium();
        table.energy(Manifold::S12, self.reference.0)?;
        table.energy(self.line.excited(), self.reference.1)?;
        Ok(())
    }

    /// Probe polarized along ŷ, perpendicular to the bias field, detuned from `F=4 → F′=5` on D2.
    pub fn probe_transverse(rabi_mhz: f64, detuning_mhz: f64) -> Self {
        Self { rabi_mhz, detuning_mhz, reference: (4, 5), polarization: Polarization::Transverse, line: Line::D2 }
    }

    /// Probe polarized along the bias field x̂, detuned from `F=4 → F′=2` on D2.
    pub fn probe_parallel(rabi_mhz: f64, detuning_mhz: f64) -> Self {
        Self { rabi_mhz, detuning_mhz, reference: (4, 2), polarization: Polarization::Pi, line: Line::D2 }
    }

    /// σ⁺ pump resonant with D1 `F=4 → F′=4`.
    pub fn pump(rabi_mhz: f64) -> Self {
        Self { rabi_mhz, detuning_mhz: 0.0, reference: (4, 4), polarization: Polarization::SigmaPlus, line: Line::D1 }
    }

    /// σ⁺ repump resonant with D2 `F=3 → F′=4`.
    pub fn repump(rabi_mhz: f64) -> Self {
        Self { rabi_mhz, detuning_mhz: 0.0, reference: (3, 4), polarization: Polarization::SigmaPlus, line: Line::D2 }
    }

    pub fn with_rabi(self, rabi_mhz: f64) -> Self {
        Self { rabi_mhz, ..self }
    }

    /// Detuning `Δ_l` of the laser from `ground F → excited F′`.
    pub fn detuning_from(&self, ground_f: i32, excited_f: i32) -> Result<f64> {
        let table = LevelTable::cesium();
        let excited = self.line.excited();
        let e_ref = table.energy(excited, self.reference.1)? - table.energy(Manifold::S12, self.reference.0)?;
        let e_l = table.energy(excited, excited_f)? - table.energy(Manifold::S12, ground_f)?;
        Ok(self.detuning_mhz + e_ref - e_l)
    }
}

/// How the amplitudes through different excited levels combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum SummationMode {
    /// `|Σ_l c_l^a c_l^b / Δ_l|²`: interfering Raman paths.
    #[default]
    Coherent,
    /// `Σ_l (c_l^a c_l^b)² / Δ_l²`: paths added as probabilities.
    Incoherent,
}

impl FromStr for SummationMode {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coherent" => Ok(SummationMode::Coherent),
            "incoherent" => Ok(SummationMode::Incoherent),
            _ => Err(SimError::domain(format!("unknown summation mode '{s}' (expected coherent or incoherent)"))),
        }
    }
}

fn line_normalization(line: Line) -> f64 {
    // Total decay of the stretched top level; by the sum rule the same for every excited level.
    let table = LevelTable::cesium();
    let excited = line.excited();
    let tjp = excited.twice_j();
    let top = *table.levels(excited).last().expect("excited manifold has levels");
    let mut total = 0.0;
    for f in table.levels(Manifold::S12) {
        for m in -f..=f {
            for q in -1..=1 {
                let a = hyperfine_amplitude(TWICE_I, 1, tjp, 2 * f, 2 * m, 2 * top, 2 * q);
                if 2 * (m + q) == 2 * top {
                    let v = a.to_f64();
                    total += v * v;
                }
            }
        }
    }
    total.sqrt()
}

fn norm_of(line: Line) -> f64 {
    use std::sync::OnceLock;
    static D1: OnceLock<f64> = OnceLock::new();
    static D2: OnceLock<f64> = OnceLock::new();
    match line {
        Line::D1 => *D1.get_or_init(|| line_normalization(Line::D1)),
        Line::D2 => *D2.get_or_init(|| line_normalization(Line::D2)),
    }
}

/// Dipole amplitude `⟨e| d_q |g⟩` normalised so that every excited level has
/// total decay 1; the D2 cycling amplitude `|4,4⟩ → |5′,5⟩` is `+1`.
///
/// Returns zero whenever a selection rule forbids the transition.
pub fn coupling_coefficient(ground: HyperfineLevel, excited: HyperfineLevel, q: i32) -> f64 {
    let line = match excited.manifold {
        Manifold::P12 => Line::D1,
        Manifold::P32 => Line::D2,
        Manifold::S12 => return 0.0,
    };
    if !ground.manifold.is_ground() || excited.m_f != ground.m_f + q || q.abs() > 1 || (excited.f - ground.f).abs() > 1 {
        return 0.0;
    }
    let a = hyperfine_amplitude(
        TWICE_I,
        1,
        excited.manifold.twice_j(),
        2 * ground.f,
        2 * ground.m_f,
        2 * excited.f,
        2 * q,
    );
    a.to_f64() / norm_of(line)
}

/// Rate of one transition with both summation variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransitionRate {
    /// Value for the requested mode, MHz.
    pub rate: f64,
    pub coherent: f64,
    pub incoherent: f64,
    /// Some contributing excited level lies within `RESONANCE_WIDTHS·γ_LW`.
    pub near_resonance: bool,
}

impl TransitionRate {
    fn zero() -> Self {
        Self { rate: 0.0, coherent: 0.0, incoherent: 0.0, near_resonance: false }
    }
}

/// Off-resonant Raman rate `a → b` from one laser, summed over its
/// polarization components and over all excited levels of its line:
/// `Ω² γ_LW |Σ_l c_l^a c_l^b / Δ_l|²` (coherent) or `Ω² γ_LW Σ_l (c_l^a c_l^b)²/Δ_l²`.
///
/// The scattered photon carries `q_s = m′ − m_b` with `|q_s| ≤ 1`.
pub fn probe_transition_rate(a: HyperfineLevel, b: HyperfineLevel, laser: &LaserSpec, mode: SummationMode) -> Result<TransitionRate> {
    laser.validate()?;
    if !a.manifold.is_ground() || !b.manifold.is_ground() {
        return Err(SimError::domain("Raman transitions connect ground-state sublevels"));
    }
    let table = LevelTable::cesium();
    let excited = laser.line.excited();
    let omega2 = laser.rabi_mhz * laser.rabi_mhz;
    let mut out = TransitionRate::zero();
    for &(q, weight) in laser.polarization.components() {
        let mp = a.m_f + q;
        let qs = mp - b.m_f;
        if qs.abs() > 1 {
            continue;
        }
        let mut amp = 0.0;
        let mut inc = 0.0;
        for fp in table.levels(excited) {
            if mp.abs() > fp {
                continue;
            }
            let e = HyperfineLevel { manifold: excited, f: fp, m_f: mp };
            let c = coupling_coefficient(a, e, q) * coupling_coefficient(b, e, qs);
            if c == 0.0 {
                continue;
            }
            let delta = laser.detuning_from(a.f, fp)?;
            if delta.abs() < RESONANCE_WIDTHS * GAMMA_LW_MHZ {
                out.near_resonance = true;
            }
            amp += c / delta;
            inc += c * c / (delta * delta);
        }
        out.coherent += weight * omega2 * GAMMA_LW_MHZ * amp * amp;
        out.incoherent += weight * omega2 * GAMMA_LW_MHZ * inc;
    }
    out.rate = match mode {
        SummationMode::Coherent => out.coherent,
        SummationMode::Incoherent => out.incoherent,
    };
    Ok(out)
}

/// `Ω²/γ_LW · c² · k`: excitation rate of one resonant transition.
pub fn resonant_rate(c: f64, laser: &LaserSpec, k_doppler: f64) -> f64 {
    laser.rabi_mhz * laser.rabi_mhz / GAMMA_LW_MHZ * c * c * k_doppler
}

/// Excitation rates from `a` by a resonant laser, one entry per excited sublevel.
///
/// Only excited levels within `RESONANCE_WIDTHS·γ_LW` of the laser count; a
/// ground level with no such level is untouched.
pub fn resonant_excitations(a: HyperfineLevel, laser: &LaserSpec, k_doppler: f64) -> Result<Vec<(HyperfineLevel, f64)>> {
    laser.validate()?;
    let table = LevelTable::cesium();
    let excited = laser.line.excited();
    let mut out = Vec::new();
    for &(q, weight) in laser.polarization.components() {
        let mp = a.m_f + q;
        for fp in table.levels(excited) {
            if mp.abs() > fp || laser.detuning_from(a.f, fp)?.abs() >= RESONANCE_WIDTHS * GAMMA_LW_MHZ {
                continue;
            }
            let e = HyperfineLevel { manifold: excited, f: fp, m_f: mp };
            let c = coupling_coefficient(a, e, q);
            if c != 0.0 {
                out.push((e, weight * resonant_rate(c, laser, k_doppler)));
            }
        }
    }
    Ok(out)
}

/// Spontaneous-decay branching of an excited sublevel into every ground sublevel.
pub fn decay_branching(excited: HyperfineLevel) -> Vec<(HyperfineLevel, f64)> {
    let table = LevelTable::cesium();
    let mut out = Vec::new();
    for f in table.levels(Manifold::S12) {
        for q in -1..=1 {
            let m = excited.m_f - q;
            if m.abs() > f {
                continue;
            }
            let g = HyperfineLevel { manifold: Manifold::S12, f, m_f: m };
            let c = coupling_coefficient(g, excited, q);
            if c != 0.0 {
                out.push((g, c * c));
            }
        }
    }
    out
}

/// Leakage ratios of a probe relative to the desired `|4,4⟩ → |4,3⟩` transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchingRatios {
    /// `Γ(|4,4⟩→|4,2⟩) / Γ(|4,4⟩→|4,3⟩)`
    pub to_4_2: f64,
    /// `Γ(|4,4⟩→|3,2⟩) / Γ(|4,4⟩→|4,3⟩)`
    pub to_3_2: f64,
}

pub fn branching_ratios(probe: &LaserSpec, mode: SummationMode) -> Result<BranchingRatios> {
    let up = HyperfineLevel::ground(4, 4);
    let desired = probe_transition_rate(up, HyperfineLevel::ground(4, 3), probe, mode)?.rate;
    if !(desired > 0.0) {
        return Err(SimError::domain("probe does not drive |4,4> -> |4,3>"));
    }
    Ok(BranchingRatios {
        to_4_2: probe_transition_rate(up, HyperfineLevel::ground(4, 2), probe, mode)?.rate / desired,
        to_3_2: probe_transition_rate(up, HyperfineLevel::ground(3, 2), probe, mode)?.rate / desired,
    })
}

/// `Z = (|μ| − |ν|)⁻¹` from the ratio `s² = Γ_heat/Γ_cool` of the two
/// opposite spin-flip rates: `Z = √((1+s)/(1−s))`.
///
/// Uses the smaller rate over the larger, so the result does not depend on
/// which of the two the encoding calls cooling.
pub fn z_from_probe(probe: &LaserSpec, mode: SummationMode) -> Result<f64> {
    let up = HyperfineLevel::ground(4, 4);
    let dn = HyperfineLevel::ground(4, 3);
    let a = probe_transition_rate(up, dn, probe, mode)?.rate;
    let b = probe_transition_rate(dn, up, probe, mode)?.rate;
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if !(hi > 0.0) || lo >= hi {
        return Err(SimError::domain("probe spin-flip rates are degenerate; Z is undefined"));
    }
    let s = (lo / hi).sqrt();
    Ok(((1.0 + s) / (1.0 - s)).sqrt())
}
