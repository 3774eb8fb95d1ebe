//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! fails at the end if any criterion is red.

use std::io::Write;
use std::process::Command;

use dissent_core::bosonic::{epr_variance, evolve_gaussian, steady_state as tms_steady_state, GaussianState, TmsSpec};
use dissent_core::cesium::{
    branching_ratios, build_three_level_rates, optimal_pump, pumped_trace, repump_sweep, setup_with_repump,
    z_from_probe, CesiumSetup, LaserSpec, SummationMode, K_DOPPLER,
};
use dissent_core::collective_rates::{asymptotic_rate, averaged_rate_inter, averaged_rate_single, DipoleKernelParams};
use dissent_core::lindblad::{build_generator, steady_state, xi_of_density, xi_rate, ChannelFlags, DensityOperator, SmallSystem};
use dissent_core::model_core::squeezing_from_z;
use dissent_core::multilevel::{
    dip_summary, evolve_populations, xi_exp_steady, MultilevelConfig, PopulationState, ThreeLevelRates,
};
use dissent_core::two_level::{
    evolve_moments, linear_grid, log_grid, moment_steady_state, rates_probe_only, rates_with_pump, xi_optimal_over_z,
    xi_steady, MomentOptions, MomentState, NoiseModel, NoiseRates,
};
use dissent_core::Result;
use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String)>;

fn ideal_limit() -> Outcome {
    let mut worst: f64 = 0.0;
    for z in [1.0, 1.5, 2.0, 5.0, 10.0] {
        let p = squeezing_from_z(z)?;
        for d in [0.5, 30.0, 1e3] {
            // (|μ| − |ν|)² = 1/Z² for μ = (Z + 1/Z)/2, ν = (Z − 1/Z)/2.
            worst = worst.max((xi_steady(d, &p, &NoiseRates::zero())? - 1.0 / (z * z)).abs());
        }
    }
    Ok((worst <= 1e-12, format!("max |xi - 1/Z^2| = {worst:.2e}")))
}

fn formula_ode_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 1e4;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let z = rng.gen_range(1.0..8.0);
        let d = rng.gen_range(0.5..150.0);
        let add = rng.gen_range(0.0..40.0);
        let x = rng.gen_range(0.0..10.0);
        let p = squeezing_from_z(z)?;
        let r = rates_with_pump(&p, x, add)?;
        let ode = moment_steady_state(&MomentState::coherent(n), d, &p, &r, &MomentOptions::new(n))?.xi();
        let formula = xi_steady(d, &p, &r)?;
        worst = worst.max(((ode - formula) / formula).abs());
    }
    Ok((worst <= 1e-6, format!("50 random points, max relative difference {worst:.2e}")))
}

fn oracle_state(n: usize, d: f64) -> Result<DensityOperator> {
    let p = squeezing_from_z(2.0)?;
    let gen = build_generator(&SmallSystem::new(n)?, d, &p, &rates_probe_only(&p, 0.0)?, &ChannelFlags::default())?;
    steady_state(&gen)
}

fn oracle_convergence(states: &[DensityOperator]) -> Outcome {
    let p = squeezing_from_z(2.0)?;
    let rates = rates_probe_only(&p, 0.0)?;
    let formula = xi_steady(30.0, &p, &rates)?;
    let mut dev = Vec::new();
    for s in states {
        dev.push((xi_of_density(s)?.xi - formula).abs());
    }
    let monotone = dev.windows(2).all(|w| w[1] <= w[0]);
    let uncoupled = xi_steady(0.0, &p, &rates)?;
    let mut worst: f64 = 0.0;
    for n in 2..=4 {
        worst = worst.max((xi_of_density(&oracle_state(n, 0.0)?)?.xi - uncoupled).abs());
    }
    Ok((
        monotone && worst <= 1e-8,
        format!("deviations n=2,3,4: {:.4}, {:.4}, {:.4}; d=0 max difference {worst:.1e}", dev[0], dev[1], dev[2]),
    ))
}

fn collective_dephasing(states: &[DensityOperator]) -> Outcome {
    let n = 1e3;
    let p = squeezing_from_z(3.0)?;
    let opts = MomentOptions { entangling: false, single_particle: false, ..MomentOptions::new(n) }.with_collective_cd(true);
    let trace = evolve_moments(&MomentState::coherent(n), 30.0, &p, &NoiseRates::new(1.0, 0.3, 2.0), &linear_grid(0.0, 100.0, 201), &opts)?;
    let ode_drift = trace.iter().map(|s| (s.xi() - 1.0).abs()).fold(0.0, f64::max);

    let p2 = squeezing_from_z(2.0)?;
    let rates = rates_probe_only(&p2, 0.0)?;
    let drift = |n: usize, s: &DensityOperator| -> Result<f64> {
        let gen = build_generator(&SmallSystem::new(n)?, 30.0, &p2, &rates, &ChannelFlags::collective_cd_only())?;
        Ok(xi_rate(&gen, s)?.abs())
    };
    let (d2, d4) = (drift(2, &states[0])?, drift(4, &states[2])?);
    Ok((
        ode_drift <= 1e-8 && d4 < d2,
        format!("moment drift {ode_drift:.1e} over [0, 100]; oracle |dxi/dt| n=2 {d2:.3e}, n=4 {d4:.3e}"),
    ))
}

fn bosonic_steady_state() -> Outcome {
    let mut worst: f64 = 0.0;
    for r in [0.0f64, 0.5, 1.0, 2.0] {
        let v = epr_variance(&tms_steady_state(&TmsSpec::new(r, 1.0, 1.0)?)?);
        worst = worst.max((v - (-2.0 * r).exp()).abs());
        worst = worst.max((v - squeezing_from_z(r.exp())?.ideal_xi()).abs());
    }
    let spec = TmsSpec::new(1.0, 1.0, 1.0)?;
    let target = tms_steady_state(&spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut spread: f64 = 0.0;
    for _ in 0..20 {
        let m = Matrix4::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let mean = Vector4::from_fn(|_, _| rng.gen_range(-3.0..3.0));
        let s0 = GaussianState::new(mean, Matrix4::identity() * 0.5 + m * m.transpose())?;
        let s = evolve_gaussian(&s0, &spec, 60.0)?;
        spread = spread.max((s.cov - target.cov).abs().max()).max(s.mean.abs().max());
    }
    Ok((worst <= 1e-9 && spread <= 1e-8, format!("max EPR error {worst:.1e}; 20 random starts within {spread:.1e}")))
}

fn collective_rates() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for kl in [50.0, 100.0] {
        let p = DipoleKernelParams::x_polarized(kl);
        let rate = averaged_rate_single(1.0, &p)?;
        let ratio = rate.real_part / asymptotic_rate(1.0, &p);
        let im = (rate.imag_part / rate.real_part).abs();
        ok &= (ratio - 1.0).abs() <= 0.05 && im <= 0.1;
        parts.push(format!("kL={kl}: ratio {ratio:.4}, |im/re| {im:.4}"));
    }
    let p = DipoleKernelParams::x_polarized(1e7);
    let inter = averaged_rate_inter(1e-2, 1.0, &p)?.rate.real_part;
    let single = averaged_rate_single(1e-2, &p)?.real_part;
    let rel = (inter / single - 1.0).abs();
    ok &= rel <= 0.02;
    parts.push(format!("inter/single - 1 = {rel:.2e}"));
    Ok((ok, parts.join("; ")))
}

fn pump_benefit() -> Outcome {
    let grid = linear_grid(1.0, 10.0, 181);
    let opt = |x: f64, add: f64| xi_optimal_over_z(30.0, &NoiseModel::Pumped { x, gamma_d_add: add }, &grid).map(|v| v.1);
    let (a0, a5) = (opt(0.0, 20.0)?, opt(5.0, 20.0)?);
    let (b0, b5) = (opt(0.0, 37.0)?, opt(5.0, 37.0)?);
    Ok((
        a5 < a0 && b5 < 1.0 && b5 < b0,
        format!("add=20: x=0 {a0:.4}, x=5 {a5:.4}; add=37: x=0 {b0:.4}, x=5 {b5:.4}"),
    ))
}

fn cesium_anchors() -> Outcome {
    let blue = LaserSpec::probe_transverse(1.0, 700.0);
    let zb = z_from_probe(&blue, SummationMode::Coherent)?;
    let zr = z_from_probe(&LaserSpec::probe_parallel(1.0, -700.0), SummationMode::Coherent)?;
    let br = branching_ratios(&blue, SummationMode::Coherent)?;
    let ok = (zb - 2.3).abs() <= 0.1
        && (zr - 2.4).abs() <= 0.1
        && (br.to_4_2 - 0.03).abs() <= 0.01
        && (br.to_3_2 - 0.02).abs() <= 0.01
        && K_DOPPLER == 5.0 / 380.0;
    Ok((ok, format!("Z(+700) {zb:.4}, Z(-700) {zr:.4}, branching {:.4} / {:.4}", br.to_4_2, br.to_3_2)))
}

fn multilevel_steady() -> Outcome {
    let adds = [0.0, 2.0, 5.0, 10.0, 20.0];
    let xs = log_grid(0.01, 10.0, 31);
    let rows = repump_sweep(&CesiumSetup::probe_only(700.0), 30.0, &xs, &adds)?;
    let at = |k: usize, i: usize| rows[k * xs.len() + i].xi_exp;
    let min = (0..xs.len()).map(|i| at(0, i)).fold(f64::INFINITY, f64::min);
    let ordered = (0..xs.len()).all(|i| (1..adds.len()).all(|k| at(k, i) >= at(k - 1, i)));
    Ok(((min - 0.9).abs() <= 0.05 && ordered, format!("minimum xi_exp {min:.4}; ordering in add holds: {ordered}")))
}

fn quasi_steady_state() -> Outcome {
    let setup = CesiumSetup::probe_only(700.0);
    let grid = log_grid(1e-3, 1e3, 121);
    let trace = pumped_trace(&setup, 30.0, 0.0, &grid)?;
    let dip = dip_summary(&trace).expect("non-empty trace");

    let asm = build_three_level_rates(&setup_with_repump(&setup, &optimal_pump(&setup)?, 0.0)?)?;
    let start = PopulationState::new(0.7, 0.2, 0.1)?;
    let leak = evolve_populations(&start, &asm.rates, &grid, true)?
        .iter()
        .map(|p| (p.total() - 1.0).abs())
        .fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut embed: f64 = 0.0;
    for _ in 0..20 {
        let p = squeezing_from_z(rng.gen_range(1.0..8.0))?;
        let d = rng.gen_range(0.0..100.0);
        let r = rates_with_pump(&p, rng.gen_range(0.0..10.0), rng.gen_range(0.0..40.0))?;
        let cfg = MultilevelConfig::new(0.5, d, p)?;
        let three = xi_exp_steady(&cfg, &ThreeLevelRates::from_two_level(&r))?;
        let two = xi_steady(d, &p, &r)?;
        embed = embed.max(((three - two) / two).abs());
    }
    Ok((
        dip.dip_then_rise && leak <= 1e-10 && embed <= 1e-10,
        format!(
            "minimum {:.4} at t={:.3}, final {:.4}; population drift {leak:.1e}; embedding error {embed:.1e}",
            dip.min_value, dip.min_time, dip.final_value
        ),
    ))
}

const EXPERIMENTS: &[&[&str]] = &[
    &["steady"],
    &["time-evolution"],
    &["figure", "fig3"],
    &["figure", "fig4"],
    &["figure", "fig6"],
    &["figure", "fig7"],
    &["oracle"],
    &["rates", "--separation", "1"],
    &["multilevel"],
    &["cesium"],
    &["sweep", "--param", "x-pump", "--from", "0", "--to", "10"],
];

fn cli_output(args: &[&str], threads: &str) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_dissent-sim"))
        .args(args)
        .env("DISSENT_SIM_THREADS", threads)
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn determinism() -> Outcome {
    let mut differing = Vec::new();
    for args in EXPERIMENTS {
        let first = cli_output(args, "1");
        if cli_output(args, "1") != first || cli_output(args, "2") != first {
            differing.push(args.join(" "));
        }
    }
    Ok((
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} experiments byte-identical across runs and thread counts", EXPERIMENTS.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    ))
}

#[test]
fn acceptance() {
    let states: Vec<DensityOperator> = (2..=4).map(|n| oracle_state(n, 30.0).expect("oracle steady state")).collect();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("ideal limit", Box::new(ideal_limit)),
        ("formula/ODE equivalence", Box::new(formula_ode_equivalence)),
        ("oracle convergence", Box::new(|| oracle_convergence(&states))),
        ("collective-dephasing invariance", Box::new(|| collective_dephasing(&states))),
        ("bosonic steady state", Box::new(bosonic_steady_state)),
        ("collective-rate asymptotics", Box::new(collective_rates)),
        ("pump benefit", Box::new(pump_benefit)),
        ("cesium anchors", Box::new(cesium_anchors)),
        ("multilevel steady entanglement", Box::new(multilevel_steady)),
        ("quasi-steady state", Box::new(quasi_steady_state)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        // Written past the harness capture so the report shows on passing runs too.
        let mut out = std::io::stdout().lock();
        writeln!(out, "{} criterion {:>2} ({name}): {detail}", if pass { "PASS" } else { "FAIL" }, i + 1).unwrap();
        if !pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
