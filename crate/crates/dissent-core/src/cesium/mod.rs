//! Cesium implementation of the scheme: angular-momentum coefficients,
//! probe/pump/repump rates on the D1 and D2 lines, and their reduction to the
//! three-level model with `|↑⟩ = |4,4⟩`, `|↓⟩ = |4,3⟩` and `|h⟩` the `F = 3`
//! manifold.
//!
//! All rates of the reduced model are expressed in units of
//! `Γ = Γ_cool − Γ_heat` of the probe, which makes `μ² − ν² = 1` hold by
//! construction.

pub mod angular;
pub mod levels;
pub mod rates;

use rayon::prelude::*;
use serde::Serialize;

pub use levels::{HyperfineLevel, LevelTable, Line, Manifold};
pub use rates::{
    branching_ratios, coupling_coefficient, decay_branching, probe_transition_rate, resonant_excitations,
    resonant_rate, z_from_probe, BranchingRatios, LaserSpec, Polarization, SummationMode, TransitionRate,
    GAMMA_LW_MHZ, K_DOPPLER,
};

use crate::error::{Result, SimError};
use crate::model_core::SqueezingParams;
use crate::multilevel::{
    evolve_populations, quasi_steady_trace, stationary_populations, xi_exp_steady, MultilevelConfig,
    PopulationState, ThreeLevelRates, TracePoint,
};
use crate::two_level::log_grid;

/// Hyperfine quantum number of the encoding manifold.
pub const ENCODING_F: f64 = 4.0;

/// Population fraction of `|↑⟩` within the two-level subsystem that defines
/// the optimal pump.
pub const PUMP_TARGET_FRACTION: f64 = 0.95;

/// The lasers acting on the atoms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CesiumSetup {
    pub probe: LaserSpec,
    pub pump: Option<LaserSpec>,
    pub repump: Option<LaserSpec>,
    pub mode: SummationMode,
    pub k_doppler: f64,
    /// Phenomenological extra dephasing `Γ_d^add`, in units of `Γ`.
    pub dephase_add: f64,
}

impl CesiumSetup {
    /// Probe only, ŷ-polarized, blue detuned by `detuning_mhz` from `F=4 → F′=5`.
    pub fn probe_only(detuning_mhz: f64) -> Self {
        Self {
            probe: LaserSpec::probe_transverse(1.0, detuning_mhz),
            pump: None,
            repump: None,
            mode: SummationMode::Coherent,
            k_doppler: K_DOPPLER,
            dephase_add: 0.0,
        }
    }
}

/// Output of the three-level reduction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThreeLevelAssembly {
    pub rates: ThreeLevelRates,
    pub squeezing: SqueezingParams,
    pub z: f64,
    /// `Γ = Γ_cool − Γ_heat` of the probe, MHz.
    pub gamma_mhz: f64,
    pub warnings: Vec<String>,
}

fn up() -> HyperfineLevel {
    HyperfineLevel::ground(4, 4)
}

fn down() -> HyperfineLevel {
    HyperfineLevel::ground(4, 3)
}

fn h_level() -> HyperfineLevel {
    HyperfineLevel::ground(3, 3)
}

#[derive(Clone, Copy)]
enum Slot {
    Up,
    Down,
    H,
}

fn slot(g: HyperfineLevel) -> Option<Slot> {
    match (g.f, g.m_f) {
        (4, 4) => Some(Slot::Up),
        (4, 3) => Some(Slot::Down),
        (3, _) => Some(Slot::H),
        _ => None,
    }
}

/// Adds optical-pumping rates `from → e → g` of a resonant laser to `r`.
/// Decays into `F = 4` sublevels outside the encoding are dropped.
fn add_resonant(r: &mut ThreeLevelRates, from: HyperfineLevel, laser: &LaserSpec, k: f64, scale: f64) -> Result<()> {
    let src = slot(from).expect("source is a model level");
    for (e, rate) in resonant_excitations(from, laser, k)? {
        for (g, branch) in decay_branching(e) {
            let v = rate * branch * scale;
            match (src, slot(g)) {
                (Slot::Up, Some(Slot::Down)) => r.up_down += v,
                (Slot::Up, Some(Slot::H)) => r.up_h += v,
                (Slot::Up, Some(Slot::Up)) => r.up_up += v,
                (Slot::Down, Some(Slot::Up)) => r.down_up += v,
                (Slot::Down, Some(Slot::H)) => r.down_h += v,
                (Slot::Down, Some(Slot::Down)) => r.down_down += v,
                (Slot::H, Some(Slot::Up)) => r.h_up += v,
                (Slot::H, Some(Slot::Down)) => r.h_down += v,
                _ => {}
            }
        }
    }
    Ok(())
}

/// Aggregates every laser-induced transition into the three-level model.
///
/// Probe Raman rates supply the spin flips `↑↔↓` (whose ratio fixes `μ, ν`),
/// the losses to and returns from `F = 3`, and elastic scattering `Γ_↑↑`,
/// `Γ_↓↓`. The pump (from `|↓⟩`) and repump (from `|3,3⟩`) excite resonantly
/// and redistribute by spontaneous decay.
pub fn build_three_level_rates(setup: &CesiumSetup) -> Result<ThreeLevelAssembly> {
    let mode = setup.mode;
    let probe = &setup.probe;
    if !(probe.rabi_mhz > 0.0) {
        return Err(SimError::domain("the probe Rabi frequency must be positive"));
    }
    if !(setup.dephase_add >= 0.0) || !setup.dephase_add.is_finite() {
        return Err(SimError::domain("additional dephasing must be finite and >= 0"));
    }
    if !(setup.k_doppler >= 0.0) {
        return Err(SimError::domain("Doppler factor must be >= 0"));
    }
    let mut warnings = Vec::new();
    let mut rate = |a: HyperfineLevel, b: HyperfineLevel| -> Result<f64> {
        let t = probe_transition_rate(a, b, probe, mode)?;
        if t.near_resonance {
            warnings.push(format!(
                "probe is within {} linewidths of an excited level for |{},{}> -> |{},{}>",
                rates::RESONANCE_WIDTHS,
                a.f,
                a.m_f,
                b.f,
                b.m_f
            ));
        }
        Ok(t.rate)
    };
    let cool = rate(down(), up())?;
    let heat = rate(up(), down())?;
    if !(cool > heat) {
        return Err(SimError::domain(format!(
            "probe pumps |4,4> -> |4,3> faster than back (cool {cool:.4e} MHz, heat {heat:.4e} MHz); choose the opposite encoding or detuning"
        )));
    }
    let gamma = cool - heat;
    let s = 1.0 / gamma;
    let mut to_h = (0.0, 0.0);
    for m in -3..=3 {
        let hm = HyperfineLevel::ground(3, m);
        to_h.0 += rate(up(), hm)?;
        to_h.1 += rate(down(), hm)?;
    }
    let mut r = ThreeLevelRates {
        up_down: heat * s,
        down_up: cool * s,
        up_h: to_h.0 * s,
        down_h: to_h.1 * s,
        h_up: rate(h_level(), up())? * s,
        h_down: rate(h_level(), down())? * s,
        up_up: rate(up(), up())? * s,
        down_down: rate(down(), down())? * s,
        dephase_add: setup.dephase_add,
    };
    if let Some(pump) = &setup.pump {
        add_resonant(&mut r, down(), pump, setup.k_doppler, s)?;
        add_resonant(&mut r, up(), pump, setup.k_doppler, s)?;
    }
    if let Some(repump) = &setup.repump {
        add_resonant(&mut r, h_level(), repump, setup.k_doppler, s)?;
    }
    r.validate()?;
    let squeezing = SqueezingParams::normalized((cool * s).sqrt(), (heat * s).sqrt())?;
    warnings.dedup();
    Ok(ThreeLevelAssembly { rates: r, z: squeezing.z(), squeezing, gamma_mhz: gamma, warnings })
}

/// The optimal pump: the weakest pump that keeps `N_↑/N₂ ≥ 0.95` at all times
/// on the repump-free trajectory starting from the fully polarized state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalPump {
    /// Pump Rabi frequency squared, MHz².
    pub omega_sq_mhz2: f64,
    /// `Ω²k/(γ_LW Γ)`, the resonant pump strength in units of `Γ`.
    pub strength: f64,
    pub min_up_fraction: f64,
}

fn min_up_fraction(setup: &CesiumSetup, times: &[f64]) -> Result<f64> {
    let asm = build_three_level_rates(setup)?;
    let pops = evolve_populations(&PopulationState::polarized(), &asm.rates, times, true)?;
    Ok(pops.iter().map(|p| p.n_up / p.n2()).fold(f64::INFINITY, f64::min))
}

/// Bisection on `Ω²_pump` for [`OptimalPump`]. The setup's own pump (if any)
/// fixes the pump geometry; its strength and any repump are ignored.
pub fn optimal_pump(setup: &CesiumSetup) -> Result<OptimalPump> {
    let times = log_grid(1e-3, 1e3, 400);
    let pump = setup.pump.unwrap_or_else(|| LaserSpec::pump(0.0));
    let with = |omega_sq: f64| CesiumSetup { pump: Some(pump.with_rabi(omega_sq.sqrt())), repump: None, ..*setup };
    let gamma = build_three_level_rates(&with(0.0))?.gamma_mhz;
    // Start the bracket from a pump rate comparable to Γ.
    let mut hi = GAMMA_LW_MHZ * gamma / setup.k_doppler.max(f64::MIN_POSITIVE);
    let mut lo = 0.0;
    let mut tries = 0;
    while min_up_fraction(&with(hi), &times)? < PUMP_TARGET_FRACTION {
        lo = hi;
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(SimError::Numerical("no pump strength reaches the target polarization".into()));
        }
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if min_up_fraction(&with(mid), &times)? >= PUMP_TARGET_FRACTION {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(OptimalPump {
        omega_sq_mhz2: hi,
        strength: hi * setup.k_doppler / (GAMMA_LW_MHZ * gamma),
        min_up_fraction: min_up_fraction(&with(hi), &times)?,
    })
}

/// Setup with the optimal pump and a repump of strength
/// `x_repump = Ω²_repump / Ω²_pump,opt`.
pub fn setup_with_repump(setup: &CesiumSetup, opt: &OptimalPump, x_repump: f64) -> Result<CesiumSetup> {
    if !(x_repump >= 0.0) || !x_repump.is_finite() {
        return Err(SimError::domain(format!("x_repump must be finite and >= 0 (got {x_repump})")));
    }
    let pump = setup.pump.unwrap_or_else(|| LaserSpec::pump(0.0)).with_rabi(opt.omega_sq_mhz2.sqrt());
    let repump = setup
        .repump
        .unwrap_or_else(|| LaserSpec::repump(0.0))
        .with_rabi((x_repump * opt.omega_sq_mhz2).sqrt());
    Ok(CesiumSetup { pump: Some(pump), repump: Some(repump), ..*setup })
}

/// One point of the repump sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub x_repump: f64,
    pub dephase_add: f64,
    pub xi_exp: f64,
    pub n_up: f64,
    pub n_down: f64,
    pub n_h: f64,
}

/// `ξ_exp,∞` against `x_repump` for each `Γ_d^add`, at optical depth `d0`.
/// Rows are ordered by `dephase_add`, then by `x_repump`.
pub fn repump_sweep(setup: &CesiumSetup, d0: f64, x_grid: &[f64], dephase_adds: &[f64]) -> Result<Vec<SweepRow>> {
    if let Some(x) = x_grid.iter().find(|x| !(**x >= 0.01 && **x <= 10.0)) {
        return Err(SimError::domain(format!("x_repump grid must lie within [0.01, 10] (got {x})")));
    }
    let opt = optimal_pump(setup)?;
    let points: Vec<(f64, f64)> = dephase_adds.iter().flat_map(|&a| x_grid.iter().map(move |&x| (a, x))).collect();
    points
        .par_iter()
        .map(|&(add, x)| {
            let s = CesiumSetup { dephase_add: add, ..setup_with_repump(setup, &opt, x)? };
            let asm = build_three_level_rates(&s)?;
            let config = MultilevelConfig::new(ENCODING_F, d0, asm.squeezing)?;
            let pop = stationary_populations(&asm.rates)?;
            Ok(SweepRow {
                x_repump: x,
                dephase_add: add,
                xi_exp: xi_exp_steady(&config, &asm.rates)?,
                n_up: pop.n_up,
                n_down: pop.n_down,
                n_h: pop.n_h,
            })
        })
        .collect()
}

/// `ξ_exp(t)` with the optimal pump and repump strength `x_repump`, from the
/// fully polarized state.
pub fn pumped_trace(setup: &CesiumSetup, d0: f64, x_repump: f64, t_grid: &[f64]) -> Result<Vec<TracePoint>> {
    let opt = optimal_pump(setup)?;
    let s = setup_with_repump(setup, &opt, x_repump)?;
    let asm = build_three_level_rates(&s)?;
    let config = MultilevelConfig::new(ENCODING_F, d0, asm.squeezing)?;
    quasi_steady_trace(&config, &asm.rates, t_grid)
}
