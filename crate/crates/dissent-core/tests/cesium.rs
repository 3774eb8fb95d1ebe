//! Reference values marked "oracle" come from `tests/oracles/cesium_reference.py`,
//! an exact sympy evaluation in a different matrix-element convention.

use approx::assert_relative_eq;
use dissent_core::cesium::angular::{clebsch_gordan, wigner_3j, wigner_6j};
use dissent_core::cesium::{
    branching_ratios, build_three_level_rates, coupling_coefficient, decay_branching, optimal_pump,
    probe_transition_rate, resonant_excitations, resonant_rate, z_from_probe, CesiumSetup, HyperfineLevel, LaserSpec,
    LevelTable, Line, Manifold, SummationMode, GAMMA_LW_MHZ, K_DOPPLER,
};
use dissent_core::multilevel::{evolve_populations, PopulationState};

const ORACLE_Z_BLUE: f64 = 2.3571222950960524;
const ORACLE_Z_RED: f64 = 2.4192950782883185;
const ORACLE_RATIO_4_2: f64 = 0.027528950591846575;
const ORACLE_RATIO_3_2: f64 = 0.02394467556935723;

fn cg(tj1: i32, tm1: i32, tj2: i32, tm2: i32, tj: i32, tm: i32) -> f64 {
    clebsch_gordan(tj1, tm1, tj2, tm2, tj, tm).to_f64()
}

fn blue_probe() -> LaserSpec {
    LaserSpec::probe_transverse(1.0, 700.0)
}

#[test]
fn spin_half_coupling_table() {
    // ⟨j₁ m−½; ½ ½ | j₁+½ m⟩ = √((j₁+m+½)/(2j₁+1)) and ⟨j₁ m+½; ½ −½ | j₁+½ m⟩ = √((j₁−m+½)/(2j₁+1)).
    for tj1 in 1i32..=9 {
        let j1 = tj1 as f64 / 2.0;
        let tj = tj1 + 1;
        for tm in (-tj..=tj).step_by(2) {
            let m = tm as f64 / 2.0;
            if (tm - 1).abs() <= tj1 {
                let want = ((j1 + m + 0.5) / (2.0 * j1 + 1.0)).sqrt();
                assert_relative_eq!(cg(tj1, tm - 1, 1, 1, tj, tm), want, epsilon = 1e-14);
            }
            if (tm + 1).abs() <= tj1 {
                let want = ((j1 - m + 0.5) / (2.0 * j1 + 1.0)).sqrt();
                assert_relative_eq!(cg(tj1, tm + 1, 1, -1, tj, tm), want, epsilon = 1e-14);
            }
        }
    }
}

#[test]
fn rank_one_stretched_coupling() {
    // ⟨j₁ m−1; 1 1 | j₁+1 m⟩ = √((j₁+m)(j₁+m+1)/((2j₁+1)(2j₁+2))).
    for tj1 in 1i32..=8 {
        let j1 = tj1 as f64 / 2.0;
        for tm in (-(tj1 + 2)..=tj1 + 2).step_by(2) {
            if (tm - 2).abs() > tj1 {
                continue;
            }
            let m = tm as f64 / 2.0;
            let want = ((j1 + m) * (j1 + m + 1.0) / ((2.0 * j1 + 1.0) * (2.0 * j1 + 2.0))).sqrt();
            assert_relative_eq!(cg(tj1, tm - 2, 2, 2, tj1 + 2, tm), want, epsilon = 1e-14);
        }
    }
}

#[test]
fn coupling_coefficients_are_orthonormal() {
    // Σ_{m₁ m₂} ⟨j₁ m₁; 1 m₂ | j m⟩⟨j₁ m₁; 1 m₂ | j′ m⟩ = δ_{jj′}.
    for tj1 in [3i32, 7, 8] {
        for tm in (-(tj1 + 2)..=tj1 + 2).step_by(2) {
            for tj in (tj1 - 2..=tj1 + 2).step_by(2).filter(|&tj| tj >= tm.abs()) {
                for tjp in (tj1 - 2..=tj1 + 2).step_by(2).filter(|&t| t >= tm.abs()) {
                    let s: f64 = [-2, 0, 2].iter().map(|&tm2| cg(tj1, tm - tm2, 2, tm2, tj, tm) * cg(tj1, tm - tm2, 2, tm2, tjp, tm)).sum();
                    let want = if tj == tjp { 1.0 } else { 0.0 };
                    assert!((s - want).abs() < 1e-13, "j1 = {tj1}/2, j = {tj}/2, j' = {tjp}/2, m = {tm}/2");
                }
            }
        }
    }
}

#[test]
fn three_j_symmetries() {
    assert_relative_eq!(wigner_3j(2, 2, 0, 0, 0, 0).to_f64(), -1.0 / 3f64.sqrt(), epsilon = 1e-15);
    // Odd column permutation picks up (−1)^{j₁+j₂+j₃}.
    let a = wigner_3j(4, 2, 4, 2, -2, 0).to_f64();
    let b = wigner_3j(2, 4, 4, -2, 2, 0).to_f64();
    assert_relative_eq!(a, -b, epsilon = 1e-15);
    assert!(wigner_3j(2, 2, 6, 0, 0, 0).is_zero());
    assert!(wigner_3j(2, 2, 2, 2, 2, 0).is_zero());
}

#[test]
fn six_j_closed_form() {
    // {a b c; ½ c−½ b+½} = (−1)^s √((s−2b)(s−2c+1)/((2b+1)(2b+2)2c(2c+1))), s = a+b+c.
    for (ta, tb, tc) in [(2, 3, 3), (4, 5, 3), (6, 7, 7), (7, 8, 3), (3, 4, 5)] {
        let (a, b, c) = (ta as f64 / 2.0, tb as f64 / 2.0, tc as f64 / 2.0);
        let s = a + b + c;
        let sign = if (s.round() as i64) % 2 == 0 { 1.0 } else { -1.0 };
        let want = sign * ((s - 2.0 * b) * (s - 2.0 * c + 1.0) / ((2.0 * b + 1.0) * (2.0 * b + 2.0) * 2.0 * c * (2.0 * c + 1.0))).sqrt();
        assert_relative_eq!(wigner_6j(ta, tb, tc, 1, tc - 1, tb + 1).to_f64(), want, epsilon = 1e-14);
    }
    assert_relative_eq!(wigner_6j(2, 2, 2, 2, 2, 2).to_f64(), 1.0 / 6.0, epsilon = 1e-15);
}

#[test]
fn every_excited_sublevel_decays_at_unit_rate() {
    let table = LevelTable::cesium();
    for manifold in [Manifold::P12, Manifold::P32] {
        for fp in table.levels(manifold) {
            for mp in -fp..=fp {
                let e = HyperfineLevel::new(manifold, fp, mp).unwrap();
                let total: f64 = decay_branching(e).iter().map(|(_, b)| b).sum();
                assert!((total - 1.0).abs() < 1e-12, "{manifold} F'={fp} m'={mp}: {total}");
            }
        }
    }
}

#[test]
fn hyperfine_branching_matches_line_strengths() {
    // From the tabulated relative strength factors S_FF′ of the D lines.
    let cases = [
        (Manifold::P32, 4, 3, 5.0 / 12.0),
        (Manifold::P32, 5, 4, 1.0),
        (Manifold::P32, 2, 3, 1.0),
        (Manifold::P32, 3, 3, 0.75),
        (Manifold::P12, 3, 3, 0.25),
        (Manifold::P12, 4, 3, 7.0 / 12.0),
    ];
    for (manifold, fp, f, want) in cases {
        for mp in -fp..=fp {
            let e = HyperfineLevel::new(manifold, fp, mp).unwrap();
            let to_f: f64 = decay_branching(e).iter().filter(|(g, _)| g.f == f).map(|(_, b)| b).sum();
            assert!((to_f - want).abs() < 1e-12, "{manifold} F'={fp} -> F={f}: {to_f}");
        }
    }
}

#[test]
fn cycling_transition_is_the_unit() {
    let e = HyperfineLevel::new(Manifold::P32, 5, 5).unwrap();
    assert_relative_eq!(coupling_coefficient(HyperfineLevel::ground(4, 4), e, 1), 1.0, epsilon = 1e-14);
    assert_eq!(coupling_coefficient(HyperfineLevel::ground(4, 4), e, 0), 0.0);
    assert_eq!(coupling_coefficient(HyperfineLevel::ground(3, 3), e, 1), 0.0);
}

#[test]
fn z_anchors() {
    let blue = z_from_probe(&blue_probe(), SummationMode::Coherent).unwrap();
    assert!((blue - 2.3).abs() <= 0.1, "{blue}");
    assert_relative_eq!(blue, ORACLE_Z_BLUE, max_relative = 1e-9);
    let red = z_from_probe(&LaserSpec::probe_parallel(1.0, -700.0), SummationMode::Coherent).unwrap();
    assert!((red - 2.4).abs() <= 0.1, "{red}");
    assert_relative_eq!(red, ORACLE_Z_RED, max_relative = 1e-9);
}

#[test]
fn incoherent_summation_misses_the_anchors() {
    let blue = z_from_probe(&blue_probe(), SummationMode::Incoherent).unwrap();
    let red = z_from_probe(&LaserSpec::probe_parallel(1.0, -700.0), SummationMode::Incoherent).unwrap();
    assert!((blue - 2.3).abs() > 0.1 && (red - 2.4).abs() > 0.1, "{blue} {red}");
    let t = probe_transition_rate(HyperfineLevel::ground(4, 4), HyperfineLevel::ground(4, 3), &blue_probe(), SummationMode::Incoherent)
        .unwrap();
    assert_eq!(t.rate, t.incoherent);
    assert!(t.coherent != t.incoherent);
}

#[test]
fn branching_anchors() {
    let r = branching_ratios(&blue_probe(), SummationMode::Coherent).unwrap();
    assert!((r.to_4_2 - 0.03).abs() <= 0.01 && (r.to_3_2 - 0.02).abs() <= 0.01, "{r:?}");
    assert_relative_eq!(r.to_4_2, ORACLE_RATIO_4_2, max_relative = 1e-9);
    assert_relative_eq!(r.to_3_2, ORACLE_RATIO_3_2, max_relative = 1e-9);
    // Both leakage channels are small enough for the three-level truncation.
    assert!(r.to_4_2 <= 0.05 && r.to_3_2 <= 0.05);
}

#[test]
fn rate_ratios_do_not_depend_on_probe_power() {
    let a = z_from_probe(&blue_probe(), SummationMode::Coherent).unwrap();
    for rabi in [0.01, 0.3, 17.0] {
        let b = z_from_probe(&blue_probe().with_rabi(rabi), SummationMode::Coherent).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }
    let up = HyperfineLevel::ground(4, 4);
    let dn = HyperfineLevel::ground(4, 3);
    let r1 = probe_transition_rate(up, dn, &blue_probe(), SummationMode::Coherent).unwrap().rate;
    let r2 = probe_transition_rate(up, dn, &blue_probe().with_rabi(3.0), SummationMode::Coherent).unwrap().rate;
    assert_relative_eq!(r2 / r1, 9.0, max_relative = 1e-12);
}

#[test]
fn z_is_continuous_away_from_resonances() {
    let zs: Vec<f64> = (0..=80)
        .map(|i| {
            let delta = 400.0 + 10.0 * i as f64;
            z_from_probe(&blue_probe().with_rabi(1.0), SummationMode::Coherent)
                .and_then(|_| z_from_probe(&LaserSpec::probe_transverse(1.0, delta), SummationMode::Coherent))
                .unwrap()
        })
        .collect();
    for w in zs.windows(2) {
        assert!((w[1] - w[0]).abs() < 0.05, "{w:?}");
    }
    let asm = build_three_level_rates(&CesiumSetup::probe_only(700.0)).unwrap();
    let p = asm.squeezing;
    assert!((p.mu * p.mu - p.nu * p.nu - 1.0).abs() < 1e-12);
    assert_relative_eq!(asm.z, ORACLE_Z_BLUE, max_relative = 1e-9);
    assert!(asm.warnings.is_empty());
}

#[test]
fn near_resonant_probe_is_flagged() {
    let t = probe_transition_rate(
        HyperfineLevel::ground(4, 4),
        HyperfineLevel::ground(4, 3),
        &LaserSpec::probe_transverse(1.0, 20.0),
        SummationMode::Coherent,
    )
    .unwrap();
    assert!(t.near_resonance);
}

#[test]
fn resonant_rate_examples() {
    let pump = LaserSpec::pump(0.0);
    assert_eq!(resonant_rate(1.0, &pump, K_DOPPLER), 0.0);
    let pump = LaserSpec::pump(GAMMA_LW_MHZ);
    assert_relative_eq!(resonant_rate(1.0, &pump, K_DOPPLER), GAMMA_LW_MHZ * 5.0 / 380.0, epsilon = 1e-15);
}

#[test]
fn sigma_plus_pump_selection_rules() {
    let pump = LaserSpec::pump(1.0);
    let from_down = resonant_excitations(HyperfineLevel::ground(4, 3), &pump, K_DOPPLER).unwrap();
    assert_eq!(from_down.len(), 1);
    assert_eq!(from_down[0].0, HyperfineLevel::new(Manifold::P12, 4, 4).unwrap());
    // The stretched state is dark to σ⁺ light on F = 4 → F′ = 4.
    assert!(resonant_excitations(HyperfineLevel::ground(4, 4), &pump, K_DOPPLER).unwrap().is_empty());
    assert_eq!(pump.line, Line::D1);
}

#[test]
fn red_detuned_parallel_probe_cools() {
    let setup = CesiumSetup { probe: LaserSpec::probe_parallel(1.0, -700.0), ..CesiumSetup::probe_only(0.0) };
    let asm = build_three_level_rates(&setup).unwrap();
    assert!(asm.rates.down_up > asm.rates.up_down);
    assert_relative_eq!(asm.z, ORACLE_Z_RED, max_relative = 1e-9);
}

#[test]
fn strong_pump_without_repump_empties_the_subsystem() {
    let setup = CesiumSetup { pump: Some(LaserSpec::pump(5.0)), ..CesiumSetup::probe_only(700.0) };
    let asm = build_three_level_rates(&setup).unwrap();
    let late = evolve_populations(&PopulationState::polarized(), &asm.rates, &[1e5], true).unwrap()[0];
    // Only the probe's own Raman return from F = 3 keeps a small remnant.
    assert!(late.n_h > 0.95, "{late:?}");
    let no_return = dissent_core::multilevel::ThreeLevelRates { h_up: 0.0, h_down: 0.0, ..asm.rates };
    let late = evolve_populations(&PopulationState::polarized(), &no_return, &[1e5], true).unwrap()[0];
    assert!(late.n_h > 1.0 - 1e-9, "{late:?}");
}

#[test]
fn optimal_pump_meets_the_polarization_target() {
    let setup = CesiumSetup::probe_only(700.0);
    let opt = optimal_pump(&setup).unwrap();
    assert!(opt.min_up_fraction >= 0.95 && opt.min_up_fraction < 0.95 + 1e-6, "{opt:?}");
    let weaker = CesiumSetup { pump: Some(LaserSpec::pump((0.99 * opt.omega_sq_mhz2).sqrt())), ..setup };
    let asm = build_three_level_rates(&weaker).unwrap();
    let grid = dissent_core::two_level::log_grid(1e-3, 1e3, 400);
    let pops = evolve_populations(&PopulationState::polarized(), &asm.rates, &grid, true).unwrap();
    assert!(pops.iter().any(|p| p.n_up / p.n2() < 0.95));
}

#[test]
fn level_table_format() {
    let t = LevelTable::parse("# comment\nS1/2 3 -1.0\nS1/2 4 2.0 # trailing\n").unwrap();
    assert_eq!(t.energy(Manifold::S12, 4).unwrap(), 2.0);
    assert!(LevelTable::parse("S1/2 3 -1.0\nS1/2 3 2.0\n").is_err());
    assert!(LevelTable::parse("S1/2 9 1.0\n").is_err());
    assert!(LevelTable::parse("D7 3 1.0\n").is_err());
    assert!(LevelTable::parse("S1/2 3\n").is_err());
    let split = LevelTable::cesium().energy(Manifold::S12, 4).unwrap() - LevelTable::cesium().energy(Manifold::S12, 3).unwrap();
    assert_relative_eq!(split, 9192.631770, epsilon = 1e-6);
}
