//! Command-line flags and the `key = value` config file.
//!
//! Every flag can also be set from a config file given with `--config`; flags
//! on the command line win over file values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dissent_core::cesium::SummationMode;

use crate::error::{CliError, CliResult};
use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "dissent-sim", version, about = "Steady-state entanglement of two atomic ensembles by collective dissipation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureName {
    Fig3,
    Fig4,
    Fig6,
    Fig7,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady-state entanglement and polarization of the two-level model.
    Steady(Opts),
    /// Moment dynamics and the quasi-static estimate from a coherent state.
    TimeEvolution(Opts),
    /// Data behind one of the published figures.
    Figure {
        name: FigureName,
        #[command(flatten)]
        opts: Opts,
    },
    /// Exact small-ensemble steady states against the large-N formula.
    Oracle(Opts),
    /// Cloud-averaged collective decay rates.
    Rates(Opts),
    /// Three-level population dynamics and the measured entanglement.
    Multilevel(Opts),
    /// Cesium transition rates and the assembled three-level model.
    Cesium(Opts),
    /// Steady-state entanglement along one parameter.
    Sweep(Opts),
}

impl Command {
    pub fn opts(&self) -> &Opts {
        match self {
            Command::Steady(o)
            | Command::TimeEvolution(o)
            | Command::Oracle(o)
            | Command::Rates(o)
            | Command::Multilevel(o)
            | Command::Cesium(o)
            | Command::Sweep(o) => o,
            Command::Figure { opts, .. } => opts,
        }
    }

    pub fn opts_mut(&mut self) -> &mut Opts {
        match self {
            Command::Steady(o)
            | Command::TimeEvolution(o)
            | Command::Oracle(o)
            | Command::Rates(o)
            | Command::Multilevel(o)
            | Command::Cesium(o)
            | Command::Sweep(o) => o,
            Command::Figure { opts, .. } => opts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProbePolarization {
    /// ŷ-polarized probe, detuning measured from F=4 -> F'=5.
    Transverse,
    /// x̂-polarized probe, detuning measured from F=4 -> F'=2.
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Summation {
    Coherent,
    Incoherent,
}

impl From<Summation> for SummationMode {
    fn from(s: Summation) -> Self {
        match s {
            Summation::Coherent => SummationMode::Coherent,
            Summation::Incoherent => SummationMode::Incoherent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Z,
    D,
    GammaDAdd,
    XPump,
}

/// Flags shared by all subcommands. Unset flags fall back to the config file,
/// then to per-command defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    /// Squeezing parameter Z = 1/(|mu| - |nu|).
    #[arg(long)]
    pub z: Option<f64>,
    /// Probe detuning (two-level: in units of the Larmor scale; cesium: MHz).
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    /// Larmor frequency, same units as --delta.
    #[arg(long)]
    pub omega: Option<f64>,
    /// Optical depth.
    #[arg(long)]
    pub d: Option<f64>,
    /// Additional single-particle dephasing, units of Gamma.
    #[arg(long)]
    pub gamma_d_add: Option<f64>,
    /// Pump parameter x of the two-level model.
    #[arg(long)]
    pub x_pump: Option<f64>,
    /// Repump strength relative to the optimal pump.
    #[arg(long)]
    pub x_repump: Option<f64>,
    /// Atoms per ensemble (oracle: comma-separated list).
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// End time in units of 1/Gamma.
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Number of output samples.
    #[arg(long)]
    pub points: Option<usize>,
    /// Write the result to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// key = value file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Probe-induced noise only (no pump).
    #[arg(long)]
    pub probe_only: bool,
    /// Include the rate breakdown.
    #[arg(long)]
    pub verbose: bool,
    /// Hyperfine quantum number F of the encoding.
    #[arg(long)]
    pub hyperfine_f: Option<f64>,
    /// Three-level model: |up> -> |h> rate.
    #[arg(long)]
    pub leak_up: Option<f64>,
    /// Three-level model: |down> -> |h> rate.
    #[arg(long)]
    pub leak_down: Option<f64>,
    /// Three-level model: |h> -> |up> rate.
    #[arg(long)]
    pub return_up: Option<f64>,
    /// Three-level model: |h> -> |down> rate.
    #[arg(long)]
    pub return_down: Option<f64>,
    /// Values of k_L L (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub kl: Option<Vec<f64>>,
    /// Wave number of the probe, 1/m.
    #[arg(long)]
    pub k_laser: Option<f64>,
    /// Distance between the ensembles, m.
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long, value_enum)]
    pub probe_pol: Option<ProbePolarization>,
    #[arg(long, value_enum)]
    pub mode: Option<Summation>,
    /// Parameter swept by `sweep`.
    #[arg(long, value_enum)]
    pub param: Option<SweepParam>,
    #[arg(long, allow_hyphen_values = true)]
    pub from: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub to: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Logarithmic spacing for `sweep`.
    #[arg(long)]
    pub log: bool,
}

/// Keys accepted in a config file (flag names without the leading dashes).
pub const VALID_KEYS: &[&str] = &[
    "z",
    "delta",
    "omega",
    "d",
    "gamma-d-add",
    "x-pump",
    "x-repump",
    "n",
    "t-end",
    "points",
    "out",
    "format",
    "probe-only",
    "verbose",
    "hyperfine-f",
    "leak-up",
    "leak-down",
    "return-up",
    "return-down",
    "kl",
    "k-laser",
    "separation",
    "probe-pol",
    "mode",
    "param",
    "from",
    "to",
    "steps",
    "log",
];

/// Parse `key = value` lines; `#` starts a comment. Keys may use `-` or `_`.
pub fn parse_config(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::domain(format!("config line {}: expected 'key = value'", i + 1)))?;
        let key = key.trim().replace('_', "-");
        if !VALID_KEYS.contains(&key.as_str()) {
            return Err(CliError::domain(format!(
                "config line {}: unknown key '{key}'; valid keys: {}",
                i + 1,
                VALID_KEYS.join(", ")
            )));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(CliError::domain(format!("config line {}: duplicate key '{key}'", i + 1)));
        }
    }
    Ok(map)
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.parse().map_err(|_| CliError::domain(format!("config key '{key}': cannot parse '{v}'")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> CliResult<Vec<T>> {
    v.split(',').map(|s| parse_value(key, s.trim())).collect()
}

fn parse_enum<T: ValueEnum>(key: &str, v: &str) -> CliResult<T> {
    T::from_str(v, true).map_err(|_| CliError::domain(format!("config key '{key}': invalid value '{v}'")))
}

fn fill<T>(slot: &mut Option<T>, value: CliResult<T>) -> CliResult<()> {
    if slot.is_none() {
        *slot = Some(value?);
    }
    Ok(())
}

impl Opts {
    /// Fill unset options from a parsed config map.
    pub fn merge_config(&mut self, map: &BTreeMap<String, String>) -> CliResult<()> {
        for (k, v) in map {
            let key = k.as_str();
            match key {
                "z" => fill(&mut self.z, parse_value(key, v))?,
                "delta" => fill(&mut self.delta, parse_value(key, v))?,
                "omega" => fill(&mut self.omega, parse_value(key, v))?,
                "d" => fill(&mut self.d, parse_value(key, v))?,
                "gamma-d-add" => fill(&mut self.gamma_d_add, parse_value(key, v))?,
                "x-pump" => fill(&mut self.x_pump, parse_value(key, v))?,
                "x-repump" => fill(&mut self.x_repump, parse_value(key, v))?,
                "n" => fill(&mut self.n, parse_list(key, v))?,
                "t-end" => fill(&mut self.t_end, parse_value(key, v))?,
                "points" => fill(&mut self.points, parse_value(key, v))?,
                "out" => fill(&mut self.out, Ok(PathBuf::from(v)))?,
                "format" => fill(&mut self.format, parse_enum(key, v))?,
                "probe-only" => self.probe_only |= parse_value::<bool>(key, v)?,
                "verbose" => self.verbose |= parse_value::<bool>(key, v)?,
                "hyperfine-f" => fill(&mut self.hyperfine_f, parse_value(key, v))?,
                "leak-up" => fill(&mut self.leak_up, parse_value(key, v))?,
                "leak-down" => fill(&mut self.leak_down, parse_value(key, v))?,
                "return-up" => fill(&mut self.return_up, parse_value(key, v))?,
                "return-down" => fill(&mut self.return_down, parse_value(key, v))?,
                "kl" => fill(&mut self.kl, parse_list(key, v))?,
                "k-laser" => fill(&mut self.k_laser, parse_value(key, v))?,
                "separation" => fill(&mut self.separation, parse_value(key, v))?,
                "probe-pol" => fill(&mut self.probe_pol, parse_enum(key, v))?,
                "mode" => fill(&mut self.mode, parse_enum(key, v))?,
                "param" => fill(&mut self.param, parse_enum(key, v))?,
                "from" => fill(&mut self.from, parse_value(key, v))?,
                "to" => fill(&mut self.to, parse_value(key, v))?,
                "steps" => fill(&mut self.steps, parse_value(key, v))?,
                "log" => self.log |= parse_value::<bool>(key, v)?,
                _ => unreachable!("parse_config only admits valid keys"),
            }
        }
        Ok(())
    }

    pub fn load_config(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::domain(format!("cannot read config file {}: {e}", path.display())))?;
        self.merge_config(&parse_config(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_lists_valid_keys() {
        let err = parse_config("zz = 3").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown key 'zz'"));
        assert!(msg.contains("gamma-d-add"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn flags_override_file() {
        let map = parse_config("# comment\nz = 3\nd=10 # trailing\ngamma_d_add = 2\nn = 2,3").unwrap();
        let mut o = Opts { z: Some(1.5), ..Opts::default() };
        o.merge_config(&map).unwrap();
        assert_eq!(o.z, Some(1.5));
        assert_eq!(o.d, Some(10.0));
        assert_eq!(o.gamma_d_add, Some(2.0));
        assert_eq!(o.n, Some(vec![2, 3]));
    }

    #[test]
    fn every_valid_key_is_handled() {
        let samples = [
            ("n", "2"),
            ("kl", "50"),
            ("out", "x.csv"),
            ("format", "json"),
            ("probe-only", "true"),
            ("verbose", "false"),
            ("log", "true"),
            ("probe-pol", "parallel"),
            ("mode", "incoherent"),
            ("param", "gamma-d-add"),
            ("points", "3"),
            ("steps", "3"),
        ];
        for key in VALID_KEYS {
            let v = samples.iter().find(|(k, _)| k == key).map(|(_, v)| *v).unwrap_or("1.5");
            let map = parse_config(&format!("{key} = {v}")).unwrap();
            Opts::default().merge_config(&map).unwrap_or_else(|e| panic!("{key}: {e}"));
        }
    }
}
