//! Two-level model: noise-rate composition, steady-state polarization and
//! entanglement, the quasi-static `ξ(t)` and the closed moment equations for
//! the nonlocal variances.
//!
//! The moment state tracks `⟨J_x⟩` of one ensemble together with the
//! variances of `J_{y,±} = (J_{y,I} ± J_{y,II})/√2` and
//! `J_{z,±} = (J_{z,I} ± J_{z,II})/√2`. In this normalisation a coherent spin
//! state has every variance equal to `N/4` and
//! `ξ = (var J_{y,+} + var J_{z,−}) / ⟨J_x⟩`.

use serde::Serialize;

use crate::error::{Result, SimError};
use crate::model_core::{squeezing_from_z, SqueezingParams};
use crate::ode::{Dopri5, OdeOptions};

/// Rate of the undesired collective transitions relative to the entangling
/// ones (`Γ̌ = 2Γ` for the four-level scheme).
pub const CHECK_GAMMA: f64 = 2.0;

/// Where the single-particle rates come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateBreakdown {
    pub probe_cool: f64,
    pub probe_heat: f64,
    pub radiative_dephase: f64,
    pub additional_dephase: f64,
    pub pump_contribution: f64,
}

/// Single-particle cooling, heating and dephasing rates in units of `Γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseRates {
    pub cool: f64,
    pub heat: f64,
    pub dephase: f64,
    pub breakdown: Option<RateBreakdown>,
}

impl NoiseRates {
    pub fn new(cool: f64, heat: f64, dephase: f64) -> Self {
        Self { cool, heat, dephase, breakdown: None }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    /// `Γ̃ = Γ_cool + Γ_heat + Γ_d`.
    pub fn tilde_gamma(&self) -> f64 {
        self.cool + self.heat + self.dephase
    }

    /// Diagnostics that do not prevent evaluation.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.cool < self.heat {
            w.push(format!(
                "heating ({}) exceeds cooling ({}): steady polarization is negative",
                self.heat, self.cool
            ));
        }
        if self.cool < 0.0 || self.heat < 0.0 || self.dephase < 0.0 {
            w.push("negative rate supplied".to_string());
        }
        w
    }
}

/// Probe-induced rates: `Γ_cool = μ²`, `Γ_heat = ν²`,
/// `Γ_d = 2(μ²+ν²) + Γ_d^add`.
pub fn rates_probe_only(params: &SqueezingParams, gamma_d_add: f64) -> Result<NoiseRates> {
    rates_with_pump(params, 0.0, gamma_d_add)
}

/// Rates with a resonant pump of strength `x`: cooling is enhanced to
/// `(1+x)μ²`, heating is unaffected and the radiative dephasing grows to
/// `2((1+x)μ²+ν²)`.
pub fn rates_with_pump(params: &SqueezingParams, x: f64, gamma_d_add: f64) -> Result<NoiseRates> {
    if !(gamma_d_add >= 0.0) {
        return Err(SimError::domain(format!("additional dephasing must be >= 0 (got {gamma_d_add})")));
    }
    if !(x >= 0.0) {
        return Err(SimError::domain(format!("pump parameter must be >= 0 (got {x})")));
    }
    let mu2 = params.mu * params.mu;
    let nu2 = params.nu * params.nu;
    let cool = (1.0 + x) * mu2;
    let radiative = CHECK_GAMMA * ((1.0 + x) * mu2 + nu2);
    Ok(NoiseRates {
        cool,
        heat: nu2,
        dephase: radiative + gamma_d_add,
        breakdown: Some(RateBreakdown {
            probe_cool: mu2,
            probe_heat: nu2,
            radiative_dephase: radiative,
            additional_dephase: gamma_d_add,
            pump_contribution: x * mu2,
        }),
    })
}

/// `x = Ω_pump²/γ_LW² · (Δ−Ω)²/Ω_probe² · k`.
pub fn pump_parameter(
    omega_pump: f64,
    gamma_lw: f64,
    delta: f64,
    omega_larmor: f64,
    omega_probe: f64,
    k: f64,
) -> Result<f64> {
    if !(gamma_lw > 0.0) || !(omega_probe > 0.0) {
        return Err(SimError::domain("linewidth and probe Rabi frequency must be positive"));
    }
    if omega_pump < 0.0 || !(delta > 0.0) || !(omega_larmor > 0.0) {
        return Err(SimError::domain("frequencies must be positive"));
    }
    if !(k > 0.0 && k <= 1.0) {
        return Err(SimError::domain(format!("Doppler factor k must lie in (0, 1] (got {k})")));
    }
    let dw = delta - omega_larmor;
    Ok((omega_pump / gamma_lw).powi(2) * dw * dw / (omega_probe * omega_probe) * k)
}

/// `P_{2,∞} = (Γ_cool − Γ_heat)/(Γ_cool + Γ_heat)`.
pub fn steady_polarization(rates: &NoiseRates) -> Result<f64> {
    let s = rates.cool + rates.heat;
    if !(s > 0.0) {
        return Err(SimError::domain("cool + heat must be positive for a steady polarization"));
    }
    Ok((rates.cool - rates.heat) / s)
}

/// `(1/P)·(Γ̃ + d P² (|μ|−|ν|)²)/(Γ̃ + d P)` at polarization `p`.
fn xi_at_polarization(d: f64, params: &SqueezingParams, tilde: f64, p: f64) -> f64 {
    let g = params.ideal_xi();
    if tilde == 0.0 {
        // Exact cancellation of d·P in numerator and denominator.
        return g;
    }
    (tilde + d * p * p * g) / (p * (tilde + d * p))
}

/// Steady-state `ξ∞ = (1/P)(Γ̃ + d P² (|μ|−|ν|)²)/(Γ̃ + d P)`.
pub fn xi_steady(d: f64, params: &SqueezingParams, rates: &NoiseRates) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(SimError::domain(format!("optical depth must be >= 0 (got {d})")));
    }
    let tilde = rates.tilde_gamma();
    if tilde == 0.0 {
        if d == 0.0 {
            return Err(SimError::domain("no dynamics: d = 0 and all noise rates vanish"));
        }
        // Without single-particle noise the atoms stay fully polarized.
        return Ok(params.ideal_xi());
    }
    let p = steady_polarization(rates)?;
    if p <= 0.0 {
        return Err(SimError::domain(format!("steady polarization {p} is not positive; xi is undefined")));
    }
    Ok(xi_at_polarization(d, params, tilde, p))
}

/// Quasi-static `ξ(t)`: the variance relaxes at rate `Γ̃ + d P₂(t)` from its
/// coherent-state value towards the instantaneous steady value.
pub fn xi_time<P>(t: f64, d: f64, params: &SqueezingParams, rates: &NoiseRates, p2_of_t: P) -> Result<f64>
where
    P: Fn(f64) -> f64,
{
    if !(t >= 0.0) || !(d >= 0.0) {
        return Err(SimError::domain("time and optical depth must be >= 0"));
    }
    let p = p2_of_t(t);
    if !(p > 0.0) {
        return Err(SimError::domain(format!("polarization P2({t}) = {p} must be positive")));
    }
    let tilde = rates.tilde_gamma();
    let rate = tilde + d * p;
    let e = (-rate * t).exp();
    let stationary = if rate == 0.0 { 1.0 / p } else { xi_at_polarization(d, params, tilde, p) };
    Ok(e / p + stationary * (1.0 - e))
}

/// Closed-form `P₂(t)` under single-particle cooling and heating.
pub fn polarization_at(rates: &NoiseRates, p0: f64, t: f64) -> f64 {
    let s = rates.cool + rates.heat;
    if s == 0.0 {
        return p0;
    }
    let p_inf = (rates.cool - rates.heat) / s;
    p_inf + (p0 - p_inf) * (-s * t).exp()
}

/// Second moments of the nonlocal spin operators for one ensemble pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentState {
    pub mean_jx: f64,
    pub var_y_plus: f64,
    pub var_y_minus: f64,
    pub var_z_plus: f64,
    pub var_z_minus: f64,
    pub time: f64,
}

impl MomentState {
    /// Coherent spin state of `n` atoms per ensemble polarized along `+x`.
    pub fn coherent(n: f64) -> Self {
        let q = n / 4.0;
        Self { mean_jx: n / 2.0, var_y_plus: q, var_y_minus: q, var_z_plus: q, var_z_minus: q, time: 0.0 }
    }

    pub fn xi(&self) -> f64 {
        (self.var_y_plus + self.var_z_minus) / self.mean_jx.abs()
    }

    /// Single-ensemble `⟨J_y²⟩` assuming the two ensembles are equivalent.
    pub fn jy2(&self) -> f64 {
        0.5 * (self.var_y_plus + self.var_y_minus)
    }

    pub fn jz2(&self) -> f64 {
        0.5 * (self.var_z_plus + self.var_z_minus)
    }

    /// Inter-ensemble correlator `⟨J_{y,I} J_{y,II}⟩`.
    pub fn corr_y(&self) -> f64 {
        0.5 * (self.var_y_plus - self.var_y_minus)
    }

    /// Inter-ensemble correlator `⟨J_{z,I} J_{z,II}⟩`.
    pub fn corr_z(&self) -> f64 {
        0.5 * (self.var_z_plus - self.var_z_minus)
    }

    fn to_vec(self) -> [f64; 5] {
        [self.mean_jx, self.var_y_plus, self.var_y_minus, self.var_z_plus, self.var_z_minus]
    }

    fn from_slice(y: &[f64], time: f64) -> Self {
        Self { mean_jx: y[0], var_y_plus: y[1], var_y_minus: y[2], var_z_plus: y[3], var_z_minus: y[4], time }
    }

    fn validate(&self) -> Result<()> {
        let vars = [self.var_y_plus, self.var_y_minus, self.var_z_plus, self.var_z_minus];
        if vars.iter().any(|v| !(*v >= 0.0)) || !self.mean_jx.is_finite() {
            return Err(SimError::domain("moment state needs finite mean and non-negative variances"));
        }
        Ok(())
    }
}

/// Which groups of terms enter the moment equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentOptions {
    /// Atoms per ensemble.
    pub n_atoms: f64,
    /// Collective entangling channels `A`, `B` at rate `d`.
    pub entangling: bool,
    /// Single-particle cooling, heating and dephasing.
    pub single_particle: bool,
    /// Collective dephasing channels `C`, `D` at rate `d Γ̌`.
    pub include_collective_cd: bool,
    pub check_gamma: f64,
    pub ode: OdeOptions,
}

impl MomentOptions {
    pub fn new(n_atoms: f64) -> Self {
        Self {
            n_atoms,
            entangling: true,
            single_particle: true,
            include_collective_cd: false,
            check_gamma: CHECK_GAMMA,
            ode: OdeOptions::default(),
        }
    }

    pub fn with_collective_cd(mut self, on: bool) -> Self {
        self.include_collective_cd = on;
        self
    }
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self::new(1e4)
    }
}

fn moment_rhs(
    d: f64,
    params: &SqueezingParams,
    rates: &NoiseRates,
    opts: &MomentOptions,
) -> impl Fn(f64, &[f64], &mut [f64]) {
    let n = opts.n_atoms;
    let (mu, nu) = (params.mu, params.nu);
    let (cool, heat, tilde) = if opts.single_particle {
        (rates.cool, rates.heat, rates.tilde_gamma())
    } else {
        (0.0, 0.0, 0.0)
    };
    let d_ab = if opts.entangling { d } else { 0.0 };
    let kappa_cd = if opts.include_collective_cd { d * opts.check_gamma / n } else { 0.0 };
    let (mm, pp) = ((mu - nu) * (mu - nu), (mu + nu) * (mu + nu));
    move |_t, y, dy| {
        let jx = y[0];
        let p = 2.0 * jx / n;
        let decay = tilde + d_ab * p;
        let src_m = 0.25 * n * (tilde + d_ab * p * p * mm);
        let src_p = 0.25 * n * (tilde + d_ab * p * p * pp);
        dy[0] = 0.5 * n * (cool - heat) - (cool + heat) * jx;
        dy[1] = -decay * y[1] + src_m;
        dy[2] = -decay * y[2] + src_p;
        dy[3] = -decay * y[3] + src_p;
        dy[4] = -decay * y[4] + src_m;
        if kappa_cd != 0.0 {
            let s = mu * mu + nu * nu;
            let c = 2.0 * mu * nu;
            let (jy2, jz2) = (0.5 * (y[1] + y[2]), 0.5 * (y[3] + y[4]));
            let (cy, cz) = (0.5 * (y[1] - y[2]), 0.5 * (y[3] - y[4]));
            let d_jy2 = kappa_cd * s * (jz2 - jy2);
            let d_cy = -kappa_cd * (s * cy + c * cz);
            let d_cz = -kappa_cd * (s * cz + c * cy);
            dy[1] += d_jy2 + d_cy;
            dy[2] += d_jy2 - d_cy;
            dy[3] += -d_jy2 + d_cz;
            dy[4] += -d_jy2 - d_cz;
        }
    }
}

/// Integrates the moment equations with `P₂(t) = 2⟨J_x⟩/N` evaluated live and
/// returns the state at every time of `t_grid` (non-decreasing, ≥ initial time).
pub fn evolve_moments(
    initial: &MomentState,
    d: f64,
    params: &SqueezingParams,
    rates: &NoiseRates,
    t_grid: &[f64],
    opts: &MomentOptions,
) -> Result<Vec<MomentState>> {
    initial.validate()?;
    if !(opts.n_atoms > 0.0) {
        return Err(SimError::domain("atom number must be positive"));
    }
    if !(d >= 0.0) {
        return Err(SimError::domain("optical depth must be >= 0"));
    }
    let mut f = moment_rhs(d, params, rates, opts);
    let mut solver = Dopri5::new(initial.time, initial.to_vec().to_vec(), opts.ode);
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        solver.advance_to(&mut f, t)?;
        out.push(MomentState::from_slice(&solver.y, t));
    }
    Ok(out)
}

/// Integrates until the relative change of every moment over one collective
/// relaxation time `1/(Γ̃ + d P)` drops below `1e-10`, capped at `t = 10³`.
pub fn moment_steady_state(
    initial: &MomentState,
    d: f64,
    params: &SqueezingParams,
    rates: &NoiseRates,
    opts: &MomentOptions,
) -> Result<MomentState> {
    const T_CAP: f64 = 1e3;
    const REL: f64 = 1e-10;
    initial.validate()?;
    let mut f = moment_rhs(d, params, rates, opts);
    let mut solver = Dopri5::new(initial.time, initial.to_vec().to_vec(), opts.ode);
    // Single-particle relaxation of <Jx> sets the slowest time scale.
    let slow = rates.cool + rates.heat;
    loop {
        let p = (2.0 * solver.y[0] / opts.n_atoms).abs();
        let fast = rates.tilde_gamma() + d * p;
        let mut window = if fast > 0.0 { 1.0 / fast } else { 1.0 };
        if slow > 0.0 {
            window = window.min(1.0 / slow);
        }
        let before = solver.y.clone();
        let t_next = (solver.t + window).min(T_CAP);
        solver.advance_to(&mut f, t_next)?;
        let converged = before
            .iter()
            .zip(&solver.y)
            .all(|(a, b)| (a - b).abs() <= REL * b.abs().max(1e-300));
        if converged {
            return Ok(MomentState::from_slice(&solver.y, solver.t));
        }
        if solver.t >= T_CAP {
            return Err(SimError::Integrator {
                time: solver.t,
                reason: "moments did not become stationary before t = 1e3".into(),
            });
        }
    }
}

/// Noise models parameterised by the squeezing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum NoiseModel {
    ProbeOnly { gamma_d_add: f64 },
    Pumped { x: f64, gamma_d_add: f64 },
}

impl NoiseModel {
    pub fn rates(&self, params: &SqueezingParams) -> Result<NoiseRates> {
        match *self {
            NoiseModel::ProbeOnly { gamma_d_add } => rates_probe_only(params, gamma_d_add),
            NoiseModel::Pumped { x, gamma_d_add } => rates_with_pump(params, x, gamma_d_add),
        }
    }
}

/// `ξ∞` as a function of `Z` for a noise model.
pub fn xi_steady_at_z(d: f64, model: &NoiseModel, z: f64) -> Result<f64> {
    let p = squeezing_from_z(z)?;
    xi_steady(d, &p, &model.rates(&p)?)
}

/// Minimises `ξ∞` over `Z`: grid scan followed by golden-section refinement
/// inside the bracket around the best grid point. Ties go to the smaller `Z`.
pub fn xi_optimal_over_z(d: f64, model: &NoiseModel, z_grid: &[f64]) -> Result<(f64, f64)> {
    if z_grid.is_empty() {
        return Err(SimError::domain("Z grid is empty"));
    }
    let mut grid: Vec<f64> = z_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let values = grid.iter().map(|&z| xi_steady_at_z(d, model, z)).collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] < values[best] {
            best = i;
        }
    }
    if grid.len() < 3 || best == 0 || best == grid.len() - 1 {
        return Ok((grid[best], values[best]));
    }
    let (mut a, mut b) = (grid[best - 1], grid[best + 1]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = xi_steady_at_z(d, model, x1)?;
    let mut f2 = xi_steady_at_z(d, model, x2)?;
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 * b.abs() {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = xi_steady_at_z(d, model, x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = xi_steady_at_z(d, model, x2)?;
        }
    }
    let z = 0.5 * (a + b);
    let v = xi_steady_at_z(d, model, z)?;
    if v < values[best] {
        Ok((z, v))
    } else {
        Ok((grid[best], values[best]))
    }
}

/// Logarithmically spaced grid of `n ≥ 2` points from `a` to `b`.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                b
            } else {
                (la + (lb - la) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Linearly spaced grid of `n ≥ 2` points from `a` to `b`.
pub fn linear_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
        .collect()
}
