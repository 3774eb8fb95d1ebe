//! One function per subcommand, each producing a [`Report`].

use dissent_core::cesium::{
    self, branching_ratios, build_three_level_rates, optimal_pump, probe_transition_rate, repump_sweep,
    setup_with_repump, z_from_probe, CesiumSetup, HyperfineLevel, LaserSpec, SummationMode,
};
use dissent_core::collective_rates::{asymptotic_rate, averaged_rate_inter, averaged_rate_single, DipoleKernelParams};
use dissent_core::lindblad::finite_n_convergence_study;
use dissent_core::model_core::{squeezing_from_detuning, squeezing_from_z, EnsembleGeometry, SqueezingParams};
use dissent_core::multilevel::{
    quasi_steady_trace, stationary_populations, xi_exp_steady, MultilevelConfig, ThreeLevelRates,
};
use dissent_core::two_level::{
    evolve_moments, linear_grid, log_grid, polarization_at, rates_with_pump, steady_polarization, xi_optimal_over_z,
    xi_steady, xi_time, MomentOptions, MomentState, NoiseModel, NoiseRates,
};
use rayon::prelude::*;

use crate::args::{Command, FigureName, Opts, ProbePolarization, SweepParam};
use crate::error::{CliError, CliResult};
use crate::output::{Cell, Report, Table};

const DEFAULT_Z: f64 = 2.0;
const DEFAULT_D: f64 = 30.0;
const DEFAULT_CS_DELTA_MHZ: f64 = 700.0;
/// Additional dephasing of the `fig3` and `fig6` curves.
const ADD_SERIES: [f64; 5] = [0.0, 2.0, 5.0, 10.0, 20.0];
/// Additional dephasing of the `fig4` curves.
const PUMP_ADD_SERIES: [f64; 5] = [15.0, 20.0, 25.0, 30.0, 35.0];

pub fn run(command: &Command, command_line: String) -> CliResult<Report> {
    let mut report = Report::new(command_line);
    match command {
        Command::Steady(o) => steady(o, &mut report)?,
        Command::TimeEvolution(o) => time_evolution(o, &mut report)?,
        Command::Figure { name, opts } => figure(*name, opts, &mut report)?,
        Command::Oracle(o) => oracle(o, &mut report)?,
        Command::Rates(o) => rates(o, &mut report)?,
        Command::Multilevel(o) => multilevel(o, &mut report)?,
        Command::Cesium(o) => cesium_cmd(o, &mut report)?,
        Command::Sweep(o) => sweep(o, &mut report)?,
    }
    Ok(report)
}

fn squeezing(o: &Opts) -> CliResult<SqueezingParams> {
    match (o.z, o.delta, o.omega) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            Err(CliError::domain("give either --z or --delta/--omega, not both"))
        }
        (None, Some(delta), Some(omega)) => Ok(squeezing_from_detuning(delta, omega)?),
        (None, Some(_), None) | (None, None, Some(_)) => {
            Err(CliError::domain("--delta and --omega must be given together"))
        }
        (z, None, None) => Ok(squeezing_from_z(z.unwrap_or(DEFAULT_Z))?),
    }
}

fn pump_x(o: &Opts) -> CliResult<f64> {
    match (o.probe_only, o.x_pump) {
        (true, Some(x)) if x != 0.0 => Err(CliError::domain("--probe-only excludes a non-zero --x-pump")),
        (_, x) => Ok(x.unwrap_or(0.0)),
    }
}

fn noise(o: &Opts, params: &SqueezingParams) -> CliResult<NoiseRates> {
    Ok(rates_with_pump(params, pump_x(o)?, o.gamma_d_add.unwrap_or(0.0))?)
}

fn optical_depth(o: &Opts) -> CliResult<f64> {
    let d = o.d.unwrap_or(DEFAULT_D);
    if !(d >= 0.0) || !d.is_finite() {
        return Err(CliError::domain(format!("optical depth must be finite and >= 0 (got {d})")));
    }
    Ok(d)
}

fn points(o: &Opts, default: usize) -> CliResult<usize> {
    let n = o.points.unwrap_or(default);
    if n < 2 {
        return Err(CliError::domain("--points must be at least 2"));
    }
    Ok(n)
}

fn steady(o: &Opts, report: &mut Report) -> CliResult<()> {
    let params = squeezing(o)?;
    let d = optical_depth(o)?;
    let rates = noise(o, &params)?;
    report.notes.extend(rates.warnings());
    let xi = xi_steady(d, &params, &rates)?;
    let p2 = steady_polarization(&rates)?;
    let mut cols = vec!["z", "mu", "nu", "d", "x_pump", "gamma_d_add", "p2_inf", "xi_inf", "xi_ideal"];
    if o.verbose {
        cols.extend(["cool", "heat", "dephase", "radiative_dephase", "tilde_gamma"]);
    }
    let mut t = Table::new("steady", &cols);
    let mut row: Vec<Cell> = vec![
        params.z().into(),
        params.mu.into(),
        params.nu.into(),
        d.into(),
        pump_x(o)?.into(),
        o.gamma_d_add.unwrap_or(0.0).into(),
        p2.into(),
        xi.into(),
        params.ideal_xi().into(),
    ];
    if o.verbose {
        let radiative = rates.breakdown.map(|b| b.radiative_dephase).unwrap_or(f64::NAN);
        row.extend([rates.cool, rates.heat, rates.dephase, radiative, rates.tilde_gamma()].map(Cell::from));
    }
    t.push(row);
    report.tables.push(t);
    Ok(())
}

fn time_evolution(o: &Opts, report: &mut Report) -> CliResult<()> {
    let params = squeezing(o)?;
    let d = optical_depth(o)?;
    let rates = noise(o, &params)?;
    let n_atoms = match o.n.as_deref() {
        None => 1000.0,
        Some([n]) if *n > 0 => *n as f64,
        Some(_) => return Err(CliError::domain("time-evolution takes a single positive --n")),
    };
    let t_end = o.t_end.unwrap_or(10.0);
    if !(t_end > 0.0) {
        return Err(CliError::domain("--t-end must be positive"));
    }
    let grid = linear_grid(0.0, t_end, points(o, 201)?);
    let moments = evolve_moments(&MomentState::coherent(n_atoms), d, &params, &rates, &grid, &MomentOptions::new(n_atoms))?;
    let mut t = Table::new(
        "time_evolution",
        &["t", "p2", "xi_moments", "xi_quasi_static", "mean_jx", "var_y_plus", "var_z_minus"],
    );
    for m in &moments {
        let qs = xi_time(m.time, d, &params, &rates, |s| polarization_at(&rates, 1.0, s))?;
        t.push(vec![
            m.time.into(),
            (2.0 * m.mean_jx / n_atoms).into(),
            m.xi().into(),
            qs.into(),
            m.mean_jx.into(),
            m.var_y_plus.into(),
            m.var_z_minus.into(),
        ]);
    }
    report.tables.push(t);
    Ok(())
}

fn z_axis() -> Vec<f64> {
    linear_grid(1.0, 10.0, 91)
}

fn figure(name: FigureName, o: &Opts, report: &mut Report) -> CliResult<()> {
    match name {
        FigureName::Fig3 => fig3(o, report),
        FigureName::Fig4 => fig4(o, report),
        FigureName::Fig6 => fig6(o, report),
        FigureName::Fig7 => fig7(o, report),
    }
}

fn series_columns(axis: &str, prefix: &str, values: &[f64]) -> Vec<String> {
    std::iter::once(axis.to_string()).chain(values.iter().map(|v| format!("{prefix}{v}"))).collect()
}

fn fig3(o: &Opts, report: &mut Report) -> CliResult<()> {
    let d = optical_depth(o)?;
    let zs = z_axis();
    let rows: Vec<Vec<Cell>> = zs
        .par_iter()
        .map(|&z| {
            let mut row = vec![Cell::from(z)];
            for add in ADD_SERIES {
                let p = squeezing_from_z(z)?;
                row.push(xi_steady(d, &p, &NoiseModel::ProbeOnly { gamma_d_add: add }.rates(&p)?)?.into());
            }
            Ok(row)
        })
        .collect::<CliResult<_>>()?;
    let mut t = Table::with_columns("fig3", series_columns("z", "xi_add_", &ADD_SERIES));
    rows.into_iter().for_each(|r| t.push(r));
    report.notes.push(format!("steady-state xi versus Z, probe-only noise, d = {d}"));
    report.tables.push(t);
    Ok(())
}

fn fig4(o: &Opts, report: &mut Report) -> CliResult<()> {
    let d = optical_depth(o)?;
    let xs = linear_grid(0.0, 10.0, 41);
    let zs = z_axis();
    let rows: Vec<Vec<Cell>> = xs
        .par_iter()
        .map(|&x| {
            let mut row = vec![Cell::from(x)];
            for add in PUMP_ADD_SERIES {
                let (_, xi) = xi_optimal_over_z(d, &NoiseModel::Pumped { x, gamma_d_add: add }, &zs)?;
                row.push(xi.into());
            }
            Ok(row)
        })
        .collect::<CliResult<_>>()?;
    let mut main = Table::with_columns("fig4", series_columns("x_pump", "xi_opt_add_", &PUMP_ADD_SERIES));
    rows.into_iter().for_each(|r| main.push(r));
    let mut inset = Table::new("fig4_inset", &["z", "p2_x0", "p2_x5"]);
    for &z in &zs {
        let p = squeezing_from_z(z)?;
        let p0 = steady_polarization(&rates_with_pump(&p, 0.0, 0.0)?)?;
        let p5 = steady_polarization(&rates_with_pump(&p, 5.0, 0.0)?)?;
        inset.push(vec![z.into(), p0.into(), p5.into()]);
    }
    report.notes.push(format!("xi optimised over Z versus pump parameter, d = {d}"));
    report.tables.push(main);
    report.tables.push(inset);
    Ok(())
}

fn cesium_setup(o: &Opts) -> CliResult<CesiumSetup> {
    let delta = o.delta.unwrap_or(DEFAULT_CS_DELTA_MHZ);
    let probe = match o.probe_pol.unwrap_or(ProbePolarization::Transverse) {
        ProbePolarization::Transverse => LaserSpec::probe_transverse(1.0, delta),
        ProbePolarization::Parallel => LaserSpec::probe_parallel(1.0, delta),
    };
    Ok(CesiumSetup {
        probe,
        mode: o.mode.map(SummationMode::from).unwrap_or_default(),
        dephase_add: o.gamma_d_add.unwrap_or(0.0),
        ..CesiumSetup::probe_only(delta)
    })
}

fn fig6(o: &Opts, report: &mut Report) -> CliResult<()> {
    let d = optical_depth(o)?;
    let setup = cesium_setup(o)?;
    let xs = log_grid(0.01, 10.0, points(o, 31)?);
    let rows = repump_sweep(&setup, d, &xs, &ADD_SERIES)?;
    let mut t = Table::with_columns("fig6", series_columns("x_repump", "xi_exp_add_", &ADD_SERIES));
    for (i, &x) in xs.iter().enumerate() {
        let mut row = vec![Cell::from(x)];
        for k in 0..ADD_SERIES.len() {
            row.push(rows[k * xs.len() + i].xi_exp.into());
        }
        t.push(row);
    }
    report.notes.push(format!("cesium, d = {d}, optimal pump, stationary xi_exp versus repump strength"));
    report.tables.push(t);
    Ok(())
}

fn fig7(o: &Opts, report: &mut Report) -> CliResult<()> {
    let d = optical_depth(o)?;
    let setup = cesium_setup(o)?;
    let x_repump = o.x_repump.unwrap_or(0.0);
    let t_end = o.t_end.unwrap_or(1e3);
    if !(t_end > 1e-3) {
        return Err(CliError::domain("--t-end must exceed 1e-3"));
    }
    let grid = log_grid(1e-3, t_end, points(o, 121)?);
    let trace = cesium::pumped_trace(&setup, d, x_repump, &grid)?;
    let mut t = Table::new("fig7", &["t", "xi_exp", "n2", "p2"]);
    for p in &trace {
        t.push(vec![p.time.into(), p.xi_exp.into(), p.n2.into(), p.p2.into()]);
    }
    report.notes.push(format!("cesium quasi-steady state, d = {d}, x_repump = {x_repump}"));
    report.tables.push(t);
    Ok(())
}

fn oracle(o: &Opts, report: &mut Report) -> CliResult<()> {
    let params = squeezing(o)?;
    let d = optical_depth(o)?;
    let rates = noise(o, &params)?;
    let ns = o.n.clone().unwrap_or_else(|| vec![2, 3, 4]);
    let study = finite_n_convergence_study(&params, &rates, d, &ns)?;
    let mut t = Table::new("oracle", &["n", "xi_oracle", "xi_formula", "deviation"]);
    for r in &study.rows {
        t.push(vec![r.n.into(), r.xi_oracle.into(), r.xi_formula.into(), r.deviation.into()]);
    }
    report.notes.push(format!("deviation non-increasing in n: {}", study.monotone));
    report.tables.push(t);
    Ok(())
}

fn rates(o: &Opts, report: &mut Report) -> CliResult<()> {
    let k = o.k_laser.unwrap_or(1e7);
    let kls = o.kl.clone().unwrap_or_else(|| vec![10.0, 20.0, 50.0, 100.0]);
    let params = DipoleKernelParams::new(k, [1.0, 0.0, 0.0], 1.0)?;
    let mut cols = vec!["kl", "length_l", "real", "imag", "asymptote", "ratio_to_asymptote", "imag_over_real"];
    if o.separation.is_some() {
        cols.extend(["inter_real", "inter_imag", "inter_over_single", "in_regime"]);
    }
    let rows: Vec<Vec<Cell>> = kls
        .par_iter()
        .map(|&kl| {
            let l = kl / k;
            let single = averaged_rate_single(l, &params)?;
            let asym = asymptotic_rate(l, &params);
            let mut row: Vec<Cell> = vec![
                kl.into(),
                l.into(),
                single.real_part.into(),
                single.imag_part.into(),
                asym.into(),
                (single.real_part / asym).into(),
                (single.imag_part / single.real_part).into(),
            ];
            if let Some(r) = o.separation {
                let inter = averaged_rate_inter(l, r, &params)?;
                let geom = EnsembleGeometry { n_atoms: 1.0, length_l: l, k_laser: k, separation_r: r };
                row.extend([
                    Cell::from(inter.rate.real_part),
                    inter.rate.imag_part.into(),
                    (inter.rate.real_part / single.real_part).into(),
                    geom.regime_warnings().is_empty().into(),
                ]);
            }
            Ok(row)
        })
        .collect::<CliResult<_>>()?;
    let mut t = Table::new("rates", &cols);
    rows.into_iter().for_each(|r| t.push(r));
    report.notes.push(format!("k_laser = {k} 1/m, rates in units of Gamma"));
    report.tables.push(t);
    Ok(())
}

fn nonneg(name: &str, v: Option<f64>) -> CliResult<f64> {
    let v = v.unwrap_or(0.0);
    if !(v >= 0.0) || !v.is_finite() {
        return Err(CliError::domain(format!("--{name} must be finite and >= 0")));
    }
    Ok(v)
}

fn multilevel(o: &Opts, report: &mut Report) -> CliResult<()> {
    let params = squeezing(o)?;
    let d = optical_depth(o)?;
    let two = noise(o, &params)?;
    let rates = ThreeLevelRates {
        up_h: nonneg("leak-up", o.leak_up)?,
        down_h: nonneg("leak-down", o.leak_down)?,
        h_up: nonneg("return-up", o.return_up)?,
        h_down: nonneg("return-down", o.return_down)?,
        ..ThreeLevelRates::from_two_level(&two)
    };
    let config = MultilevelConfig::new(o.hyperfine_f.unwrap_or(4.0), d, params)?;
    let t_end = o.t_end.unwrap_or(1e3);
    if !(t_end > 1e-3) {
        return Err(CliError::domain("--t-end must exceed 1e-3"));
    }
    let grid = log_grid(1e-3, t_end, points(o, 121)?);
    let trace = quasi_steady_trace(&config, &rates, &grid)?;
    let mut t = Table::new("multilevel", &["t", "xi_exp", "n_up", "n_down", "n_h", "p2"]);
    for p in &trace {
        let n_up = 0.5 * p.n2 * (1.0 + p.p2);
        let n_down = 0.5 * p.n2 * (1.0 - p.p2);
        t.push(vec![p.time.into(), p.xi_exp.into(), n_up.into(), n_down.into(), (1.0 - p.n2).into(), p.p2.into()]);
    }
    match stationary_populations(&rates).and_then(|_| xi_exp_steady(&config, &rates)) {
        Ok(xi) => report.notes.push(format!("stationary xi_exp = {}", crate::output::format_number(xi))),
        Err(e) => report.notes.push(format!("no stationary xi_exp: {e}")),
    }
    report.tables.push(t);
    Ok(())
}

fn cesium_cmd(o: &Opts, report: &mut Report) -> CliResult<()> {
    let setup = cesium_setup(o)?;
    let up = HyperfineLevel::ground(4, 4);
    let dn = HyperfineLevel::ground(4, 3);
    let heat = probe_transition_rate(up, dn, &setup.probe, setup.mode)?;
    let cool = probe_transition_rate(dn, up, &setup.probe, setup.mode)?;
    let z = z_from_probe(&setup.probe, setup.mode)?;
    let br = branching_ratios(&setup.probe, setup.mode)?;
    if heat.near_resonance || cool.near_resonance {
        report.notes.push("probe is close to an excited-state resonance".into());
    }
    let mut probe = Table::new(
        "probe",
        &["delta_mhz", "z", "rate_4_4_to_4_3", "rate_4_3_to_4_4", "coherent_ratio", "incoherent_ratio", "ratio_4_2", "ratio_3_2"],
    );
    probe.push(vec![
        setup.probe.detuning_mhz.into(),
        z.into(),
        heat.rate.into(),
        cool.rate.into(),
        (heat.coherent / cool.coherent).into(),
        (heat.incoherent / cool.incoherent).into(),
        br.to_4_2.into(),
        br.to_3_2.into(),
    ]);
    report.notes.push("probe Rabi frequency 1 MHz; rates in MHz".into());
    report.tables.push(probe);

    let (setup, pump) = match o.x_repump {
        Some(x) => {
            let opt = optimal_pump(&setup)?;
            (setup_with_repump(&setup, &opt, x)?, Some(opt))
        }
        None => (setup, None),
    };
    let asm = match build_three_level_rates(&setup) {
        Ok(a) => a,
        Err(e) if e.is_domain() => {
            report.notes.push(format!("no three-level reduction: {e}"));
            return Ok(());
        }
        Err(e) => return Err(e.into()),
    };
    report.notes.extend(asm.warnings.iter().cloned());
    let r = asm.rates;
    let mut t = Table::new(
        "three_level",
        &[
            "z", "mu", "nu", "gamma_mhz", "up_down", "down_up", "up_h", "down_h", "h_up", "h_down", "up_up", "down_down",
            "dephase_add",
        ],
    );
    t.push(
        [
            asm.z,
            asm.squeezing.mu,
            asm.squeezing.nu,
            asm.gamma_mhz,
            r.up_down,
            r.down_up,
            r.up_h,
            r.down_h,
            r.h_up,
            r.h_down,
            r.up_up,
            r.down_down,
            r.dephase_add,
        ]
        .map(Cell::from)
        .to_vec(),
    );
    report.tables.push(t);
    if let (Some(opt), Some(x)) = (pump, o.x_repump) {
        let d = optical_depth(o)?;
        let config = MultilevelConfig::new(cesium::ENCODING_F, d, asm.squeezing)?;
        let pop = stationary_populations(&r)?;
        let xi = xi_exp_steady(&config, &r)?;
        let mut s = Table::new(
            "stationary",
            &["x_repump", "d", "pump_strength", "pump_omega_sq_mhz2", "n_up", "n_down", "n_h", "xi_exp_inf"],
        );
        s.push(vec![
            x.into(),
            d.into(),
            opt.strength.into(),
            opt.omega_sq_mhz2.into(),
            pop.n_up.into(),
            pop.n_down.into(),
            pop.n_h.into(),
            xi.into(),
        ]);
        report.tables.push(s);
    }
    Ok(())
}

fn sweep(o: &Opts, report: &mut Report) -> CliResult<()> {
    let param = o.param.ok_or_else(|| CliError::domain("sweep needs --param (z, d, gamma-d-add or x-pump)"))?;
    let (from, to) = match (o.from, o.to) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(CliError::domain("sweep needs --from and --to")),
    };
    let steps = o.steps.unwrap_or(21);
    if steps < 2 {
        return Err(CliError::domain("--steps must be at least 2"));
    }
    if o.log && !(from > 0.0 && to > 0.0) {
        return Err(CliError::domain("logarithmic sweeps need positive bounds"));
    }
    if param == SweepParam::Z && (o.delta.is_some() || o.omega.is_some()) {
        return Err(CliError::domain("a Z sweep cannot be combined with --delta/--omega"));
    }
    let values = if o.log { log_grid(from, to, steps) } else { linear_grid(from, to, steps) };
    let name = match param {
        SweepParam::Z => "z",
        SweepParam::D => "d",
        SweepParam::GammaDAdd => "gamma_d_add",
        SweepParam::XPump => "x_pump",
    };
    let rows: Vec<Vec<Cell>> = values
        .par_iter()
        .map(|&v| {
            let mut point = o.clone();
            match param {
                SweepParam::Z => point.z = Some(v),
                SweepParam::D => point.d = Some(v),
                SweepParam::GammaDAdd => point.gamma_d_add = Some(v),
                SweepParam::XPump => point.x_pump = Some(v),
            }
            let params = squeezing(&point)?;
            let rates = noise(&point, &params)?;
            let d = optical_depth(&point)?;
            Ok(vec![v.into(), steady_polarization(&rates)?.into(), xi_steady(d, &params, &rates)?.into()])
        })
        .collect::<CliResult<_>>()?;
    let mut t = Table::new("sweep", &[name, "p2_inf", "xi_inf"]);
    rows.into_iter().for_each(|r| t.push(r));
    report.tables.push(t);
    Ok(())
}
