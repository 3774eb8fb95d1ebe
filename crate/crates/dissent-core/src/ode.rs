//! Adaptive Dormand–Prince 5(4) integrator for real state vectors.
//!
//! The solver is deliberately minimal: an explicit embedded pair with FSAL,
//! a mixed absolute/relative RMS error norm and a standard step-size
//! controller. It is shared by the moment equations and by the density-matrix
//! propagation of the Lindblad oracle, both of which are non-stiff at the
//! parameters of interest.

use crate::error::{Result, SimError};

/// Step-control settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h_init: Option<f64>,
    /// Largest allowed step.
    pub h_max: f64,
    /// Hard cap on accepted + rejected steps per `advance_to` call.
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, h_init: None, h_max: f64::INFINITY, max_steps: 5_000_000 }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrator state. The right-hand side is supplied to every call rather
/// than stored, so callers may close over borrowed data.
#[derive(Debug, Clone)]
pub struct Dopri5 {
    pub t: f64,
    pub y: Vec<f64>,
    opts: OdeOptions,
    h: f64,
    k: [Vec<f64>; 7],
    fsal_valid: bool,
    tmp: Vec<f64>,
    ynew: Vec<f64>,
    /// Accepted steps since construction.
    pub n_accepted: usize,
    /// Rejected steps since construction.
    pub n_rejected: usize,
}

impl Dopri5 {
    pub fn new(t0: f64, y0: Vec<f64>, opts: OdeOptions) -> Self {
        let n = y0.len();
        let z = || vec![0.0; n];
        Self {
            t: t0,
            y: y0,
            opts,
            h: opts.h_init.unwrap_or(0.0),
            k: [z(), z(), z(), z(), z(), z(), z()],
            fsal_valid: false,
            tmp: z(),
            ynew: z(),
            n_accepted: 0,
            n_rejected: 0,
        }
    }

    fn err_norm(&self) -> f64 {
        let err = &self.tmp;
        let mut acc = 0.0;
        for i in 0..err.len() {
            let sc = self.opts.atol + self.opts.rtol * self.y[i].abs().max(self.ynew[i].abs());
            let e = err[i] / sc;
            acc += e * e;
        }
        (acc / err.len().max(1) as f64).sqrt()
    }

    fn initial_step<F>(&mut self, f: &mut F) -> f64
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        // Hairer–Wanner starting-step heuristic.
        f(self.t, &self.y, &mut self.k[0]);
        self.fsal_valid = true;
        let n = self.y.len().max(1) as f64;
        let sc = |v: f64, o: &OdeOptions| o.atol + o.rtol * v.abs();
        let d0 = (self.y.iter().map(|v| (v / sc(*v, &self.opts)).powi(2)).sum::<f64>() / n).sqrt();
        let d1 = (self
            .y
            .iter()
            .zip(&self.k[0])
            .map(|(v, dv)| (dv / sc(*v, &self.opts)).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        for i in 0..self.y.len() {
            self.tmp[i] = self.y[i] + h0 * self.k[0][i];
        }
        f(self.t + h0, &self.tmp, &mut self.k[1]);
        let d2 = (self
            .y
            .iter()
            .zip(self.k[1].iter().zip(&self.k[0]))
            .map(|(v, (a, b))| ((a - b) / sc(*v, &self.opts)).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
            / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 5.0)
        };
        (100.0 * h0).min(h1).min(self.opts.h_max)
    }

    /// Integrates up to exactly `t_end`.
    pub fn advance_to<F>(&mut self, f: &mut F, t_end: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        if t_end < self.t {
            return Err(SimError::domain("integration must proceed forward in time"));
        }
        if t_end == self.t {
            return Ok(());
        }
        if self.h <= 0.0 {
            self.h = self.initial_step(f);
        }
        if !self.fsal_valid {
            f(self.t, &self.y, &mut self.k[0]);
            self.fsal_valid = true;
        }
        let n = self.y.len();
        let mut steps = 0usize;
        while self.t < t_end {
            steps += 1;
            if steps > self.opts.max_steps {
                return Err(SimError::Integrator {
                    time: self.t,
                    reason: format!("exceeded {} steps", self.opts.max_steps),
                });
            }
            let remaining = t_end - self.t;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h.min(self.opts.h_max) };
            if h <= 16.0 * f64::EPSILON * self.t.abs().max(1.0) && !last {
                return Err(SimError::Integrator { time: self.t, reason: "step size underflow".into() });
            }
            let t = self.t;
            let (k, rest) = self.k.split_at_mut(1);
            let k1 = &k[0];
            let [k2, k3, k4, k5, k6, k7] = rest else { unreachable!() };
            let y = &self.y;
            let tmp = &mut self.tmp;
            for i in 0..n {
                tmp[i] = y[i] + h * A21 * k1[i];
            }
            f(t + C2 * h, tmp, k2);
            for i in 0..n {
                tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            f(t + C3 * h, tmp, k3);
            for i in 0..n {
                tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            f(t + C4 * h, tmp, k4);
            for i in 0..n {
                tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            f(t + C5 * h, tmp, k5);
            for i in 0..n {
                tmp[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            f(t + h, tmp, k6);
            let ynew = &mut self.ynew;
            for i in 0..n {
                ynew[i] = y[i]
                    + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            f(t + h, ynew, k7);
            for i in 0..n {
                tmp[i] = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            let err = self.err_norm();
            if !err.is_finite() {
                return Err(SimError::Integrator { time: t, reason: "non-finite error estimate".into() });
            }
            if err <= 1.0 {
                self.t = if last { t_end } else { t + h };
                std::mem::swap(&mut self.y, &mut self.ynew);
                self.k.swap(0, 6);
                self.n_accepted += 1;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // Do not let a short final step shrink the running step size.
                if !last {
                    self.h = (h * fac).min(self.opts.h_max);
                }
            } else {
                self.n_rejected += 1;
                self.h = h * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            }
        }
        Ok(())
    }

    /// Current derivative (valid after at least one call to `advance_to`).
    pub fn derivative(&self) -> &[f64] {
        &self.k[0]
    }
}

/// Integrates `y' = f(t, y)` from `t0` and records the state at every
/// entry of `t_grid` (which must be non-decreasing and start at or after `t0`).
pub fn solve_on_grid<F>(mut f: F, t0: f64, y0: &[f64], t_grid: &[f64], opts: OdeOptions) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut solver = Dopri5::new(t0, y0.to_vec(), opts);
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        solver.advance_to(&mut f, t)?;
        out.push(solver.y.clone());
    }
    Ok(out)
}
