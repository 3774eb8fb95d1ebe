//! Three-level reduction of the multilevel atom: the two-level subsystem
//! `|↑⟩ = |F, F⟩`, `|↓⟩ = |F, F−1⟩` plus a lumped level `|h⟩` collecting every
//! other ground state.
//!
//! Populations follow linear rate equations. The spin variances of the
//! two-level subsystem relax quasi-statically with the live `N₂(t)`, `P₂(t)`
//! and `d(t) = d·N₂(t)/N`, and are mapped to the measurable collective spin of
//! the full hyperfine manifold. Populations are fractions of the initial atom
//! number `N`.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Result, SimError};
use crate::model_core::SqueezingParams;
use crate::two_level::NoiseRates;

/// Single-particle rates of the three-level model, in units of `Γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct ThreeLevelRates {
    pub up_down: f64,
    pub down_up: f64,
    pub up_h: f64,
    pub down_h: f64,
    pub h_up: f64,
    pub h_down: f64,
    /// Elastic (dephasing-type) scattering from `|↑⟩`.
    pub up_up: f64,
    /// Elastic (dephasing-type) scattering from `|↓⟩`.
    pub down_down: f64,
    pub dephase_add: f64,
}

impl ThreeLevelRates {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.up_down,
            self.down_up,
            self.up_h,
            self.down_h,
            self.h_up,
            self.h_down,
            self.up_up,
            self.down_down,
            self.dephase_add,
        ];
        if all.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(SimError::domain("three-level rates must be finite and >= 0"));
        }
        Ok(())
    }

    /// `Γ̄ = Γ_↑↓ + Γ_↓↑ + Γ_↑h + Γ_↓h + Γ_↑↑ + Γ_↓↓ + Γ_d^add`.
    pub fn gamma_bar(&self) -> f64 {
        self.up_down + self.down_up + self.up_h + self.down_h + self.up_up + self.down_down + self.dephase_add
    }

    /// Two-level embedding: no `h` channels, cooling `↓→↑`, heating `↑→↓`,
    /// and all dephasing lumped into `Γ_d^add`.
    pub fn from_two_level(rates: &NoiseRates) -> Self {
        Self {
            up_down: rates.heat,
            down_up: rates.cool,
            dephase_add: rates.dephase,
            ..Self::default()
        }
    }
}

/// Rate matrix acting on `(N_↑, N_↓, N_h)`.
///
/// With `conserve` set every column sums to zero. Without it the `(h, h)`
/// entry is doubled, reproducing the printed matrix for comparison.
pub fn rate_matrix(rates: &ThreeLevelRates, conserve: bool) -> Matrix3<f64> {
    let r = rates;
    let hh = r.h_up + r.h_down;
    let hh = if conserve { -hh } else { -2.0 * hh };
    Matrix3::new(
        -(r.up_down + r.up_h), r.down_up, r.h_up, //
        r.up_down, -(r.down_up + r.down_h), r.h_down, //
        r.up_h, r.down_h, hh,
    )
}

/// Level populations at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PopulationState {
    pub n_up: f64,
    pub n_down: f64,
    pub n_h: f64,
    pub time: f64,
}

impl PopulationState {
    /// Every atom in `|↑⟩`.
    pub fn polarized() -> Self {
        Self { n_up: 1.0, n_down: 0.0, n_h: 0.0, time: 0.0 }
    }

    pub fn new(n_up: f64, n_down: f64, n_h: f64) -> Result<Self> {
        let s = Self { n_up, n_down, n_h, time: 0.0 };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if [self.n_up, self.n_down, self.n_h].iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(SimError::domain("populations must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.n_up + self.n_down + self.n_h
    }

    /// `N₂ = N_↑ + N_↓`.
    pub fn n2(&self) -> f64 {
        self.n_up + self.n_down
    }

    /// `P₂ = (N_↑ − N_↓)/N₂`.
    pub fn p2(&self) -> f64 {
        (self.n_up - self.n_down) / self.n2()
    }

    /// Effective optical depth `d·N₂` (populations are fractions of `N`).
    pub fn optical_depth(&self, d0: f64) -> f64 {
        d0 * self.n2()
    }

    fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.n_up, self.n_down, self.n_h)
    }
}

/// Exact propagation `n(t) = e^{Mt} n(0)` at every grid time.
pub fn evolve_populations(
    p0: &PopulationState,
    rates: &ThreeLevelRates,
    t_grid: &[f64],
    conserve: bool,
) -> Result<Vec<PopulationState>> {
    p0.validate()?;
    rates.validate()?;
    let m = rate_matrix(rates, conserve);
    let v0 = p0.vector();
    t_grid
        .iter()
        .map(|&t| {
            if !(t >= p0.time) {
                return Err(SimError::domain("time grid must not precede the initial state"));
            }
            let v = (m * (t - p0.time)).exp() * v0;
            // Clamp round-off below zero.
            Ok(PopulationState { n_up: v[0].max(0.0), n_down: v[1].max(0.0), n_h: v[2].max(0.0), time: t })
        })
        .collect()
}

/// Long-time populations reached from the fully polarized state.
///
/// For an irreducible chain this is the normalised null vector of the
/// conserving rate matrix. When levels decouple (no `h` channels) or absorb,
/// the null space is larger and the limit depends on where the atoms start:
/// it is assembled from the closed classes reachable from `|↑⟩`, each weighted
/// by its absorption probability.
pub fn stationary_populations(rates: &ThreeLevelRates) -> Result<PopulationState> {
    rates.validate()?;
    let m = rate_matrix(rates, true);
    let v = long_time_limit(&m, &PopulationState::polarized().vector())?;
    if (m * v).amax() > 1e-9 * m.amax().max(1.0) {
        return Err(SimError::Numerical("stationary populations do not balance the rate matrix".into()));
    }
    Ok(PopulationState { n_up: v[0].max(0.0), n_down: v[1].max(0.0), n_h: v[2].max(0.0), time: f64::INFINITY })
}

/// `lim_{t→∞} e^{Mt} p₀` for a conserving rate matrix (`M[j][i]` is the rate `i → j`).
fn long_time_limit(m: &Matrix3<f64>, p0: &Vector3<f64>) -> Result<Vector3<f64>> {
    const N: usize = 3;
    let mut reach = [[false; N]; N];
    for i in 0..N {
        for j in 0..N {
            reach[i][j] = i == j || m[(j, i)] > 0.0;
        }
    }
    for k in 0..N {
        for i in 0..N {
            for j in 0..N {
                reach[i][j] |= reach[i][k] && reach[k][j];
            }
        }
    }
    let closed = |i: usize| (0..N).all(|j| !reach[i][j] || reach[j][i]);
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in (0..N).filter(|&i| closed(i)) {
        match classes.iter_mut().find(|c| reach[c[0]][i]) {
            Some(c) => c.push(i),
            None => classes.push(vec![i]),
        }
    }
    let transient: Vec<usize> = (0..N).filter(|&i| !closed(i)).collect();
    let singular = || SimError::Numerical("rate matrix has no unique stationary state".into());
    let mut out = Vector3::<f64>::zeros();
    for class in &classes {
        // Stationary distribution inside the class, one balance row replaced by normalisation.
        let k = class.len();
        let mut a = nalgebra::DMatrix::from_fn(k, k, |r, c| m[(class[r], class[c])]);
        a.row_mut(k - 1).fill(1.0);
        let mut b = nalgebra::DVector::zeros(k);
        b[k - 1] = 1.0;
        let pi = a.lu().solve(&b).ok_or_else(singular)?;
        // Probability of ending in this class from each transient state:
        // Σ_j M[j][i] a_j = 0 with a = 1 on the class and 0 on other closed states.
        let t = transient.len();
        let mut absorb = [0.0; N];
        for &i in class {
            absorb[i] = 1.0;
        }
        if t > 0 {
            let q = nalgebra::DMatrix::from_fn(t, t, |r, c| m[(transient[c], transient[r])]);
            let rhs = nalgebra::DVector::from_fn(t, |r, _| -class.iter().map(|&j| m[(j, transient[r])]).sum::<f64>());
            let h = q.lu().solve(&rhs).ok_or_else(singular)?;
            for (r, &i) in transient.iter().enumerate() {
                absorb[i] = h[r];
            }
        }
        let weight: f64 = (0..N).map(|i| absorb[i] * p0[i]).sum();
        for (r, &i) in class.iter().enumerate() {
            out[i] += weight * pi[r];
        }
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(singular());
    }
    Ok(out)
}

/// Hyperfine quantum number and collective parameters of the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultilevelConfig {
    /// `F`, a positive half-integer or integer; `1/2` reproduces the two-level model.
    pub f_quantum_number: f64,
    /// Optical depth of the fully populated ensemble.
    pub d0: f64,
    pub squeezing: SqueezingParams,
}

impl MultilevelConfig {
    pub fn new(f_quantum_number: f64, d0: f64, squeezing: SqueezingParams) -> Result<Self> {
        let twice = 2.0 * f_quantum_number;
        if !(f_quantum_number >= 0.5) || (twice - twice.round()).abs() > 1e-12 {
            return Err(SimError::domain(format!(
                "F must be a half-integer >= 1/2 (got {f_quantum_number})"
            )));
        }
        if !(d0 >= 0.0) || !d0.is_finite() {
            return Err(SimError::domain("optical depth must be finite and >= 0"));
        }
        Ok(Self { f_quantum_number, d0, squeezing })
    }
}

fn check_polarization(pop: &PopulationState) -> Result<()> {
    if !(pop.n2() > 0.0) {
        return Err(SimError::domain("the two-level subsystem is empty"));
    }
    let p = pop.p2();
    if !(p > 0.0) {
        return Err(SimError::domain(format!("polarization P2 = {p} must be positive")));
    }
    Ok(())
}

/// `Σ_{J,2}(t) = N₂(0)e^{−(Γ̄+d(t)P₂)t} + N₂(t)·(Γ̄ + d(t)P₂²(|μ|−|ν|)²)/(Γ̄ + d(t)P₂)·(1 − e^{−(Γ̄+d(t)P₂)t})`.
///
/// `n2_initial` is `N₂(0)`; a coherent spin state has `Σ_{J,2} = N₂`.
pub fn sigma_j2(t: f64, config: &MultilevelConfig, rates: &ThreeLevelRates, pop: &PopulationState, n2_initial: f64) -> Result<f64> {
    check_polarization(pop)?;
    rates.validate()?;
    let (n2, p) = (pop.n2(), pop.p2());
    let d = pop.optical_depth(config.d0);
    let g = config.squeezing.ideal_xi();
    let gb = rates.gamma_bar();
    let rate = gb + d * p;
    if rate == 0.0 {
        return Ok(n2_initial);
    }
    let e = (-rate * t).exp();
    let stationary = (gb + d * p * p * g) / rate;
    Ok(n2_initial * e + n2 * stationary * (1.0 - e))
}

/// `J_{x,exp} = J_{x,2} + (2F−1)/2 · N₂`.
pub fn jx_exp(f: f64, jx2: f64, n2: f64) -> f64 {
    jx2 + 0.5 * (2.0 * f - 1.0) * n2
}

/// `J_{y,exp} ≈ √(2F) J_{y,2}`.
pub fn jy_exp(f: f64, jy2: f64) -> f64 {
    (2.0 * f).sqrt() * jy2
}

/// `Σ_{J,exp} = 2F Σ_{J,2} + 2(2F−1) N_↓`.
pub fn sigma_exp(f: f64, sigma2: f64, n_down: f64) -> f64 {
    2.0 * f * sigma2 + 2.0 * (2.0 * f - 1.0) * n_down
}

/// `ξ_exp = (Σ_{J,2}/N₂)·2F/(P₂+2F−1) + (N_↓/N₂)·2(2F−1)/(P₂+2F−1)`.
pub fn xi_exp_longtime(t: f64, config: &MultilevelConfig, rates: &ThreeLevelRates, pop: &PopulationState, n2_initial: f64) -> Result<f64> {
    let sigma = sigma_j2(t, config, rates, pop, n2_initial)?;
    let f = config.f_quantum_number;
    let (n2, p) = (pop.n2(), pop.p2());
    let den = p + 2.0 * f - 1.0;
    let xi = sigma / n2 * 2.0 * f / den + pop.n_down / n2 * 2.0 * (2.0 * f - 1.0) / den;
    let assembled = xi_exp_assembled(sigma, f, pop);
    if (xi - assembled).abs() > 1e-12 * xi.abs().max(1.0) {
        return Err(SimError::Numerical(format!(
            "entanglement formula and spin-mapping assembly disagree ({xi} vs {assembled})"
        )));
    }
    Ok(xi)
}

/// `Σ_{J,exp} / (2 J_{x,exp})` built from the individual spin mappings.
pub fn xi_exp_assembled(sigma2: f64, f: f64, pop: &PopulationState) -> f64 {
    let jx2 = 0.5 * (pop.n_up - pop.n_down);
    sigma_exp(f, sigma2, pop.n_down) / (2.0 * jx_exp(f, jx2, pop.n2()))
}

/// Long-time `ξ_exp,∞` with stationary populations.
pub fn xi_exp_steady(config: &MultilevelConfig, rates: &ThreeLevelRates) -> Result<f64> {
    let pop = stationary_populations(rates)?;
    xi_exp_longtime(f64::INFINITY, config, rates, &pop, pop.n2())
}

/// One sample of a quasi-steady trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub time: f64,
    pub xi_exp: f64,
    pub n2: f64,
    pub p2: f64,
}

/// `ξ_exp(t)` from the fully polarized state, with populations propagated by
/// the conserving rate matrix.
pub fn quasi_steady_trace(config: &MultilevelConfig, rates: &ThreeLevelRates, t_grid: &[f64]) -> Result<Vec<TracePoint>> {
    let p0 = PopulationState::polarized();
    let pops = evolve_populations(&p0, rates, t_grid, true)?;
    pops.iter()
        .map(|pop| {
            let xi = xi_exp_longtime(pop.time, config, rates, pop, p0.n2())?;
            Ok(TracePoint { time: pop.time, xi_exp: xi, n2: pop.n2(), p2: pop.p2() })
        })
        .collect()
}

/// Shape summary of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DipSummary {
    pub min_index: usize,
    pub min_time: f64,
    pub min_value: f64,
    pub final_value: f64,
    /// Minimum strictly inside the grid and the final value above it.
    pub dip_then_rise: bool,
}

pub fn dip_summary(trace: &[TracePoint]) -> Option<DipSummary> {
    let (min_index, min_point) = trace
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.xi_exp.total_cmp(&b.1.xi_exp))?;
    let final_value = trace.last()?.xi_exp;
    Some(DipSummary {
        min_index,
        min_time: min_point.time,
        min_value: min_point.xi_exp,
        final_value,
        dip_then_rise: min_index > 0 && min_index + 1 < trace.len() && final_value > min_point.xi_exp,
    })
}
