//! Hyperfine level table for the Cs ground state and the D1/D2 excited states.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Result, SimError};

/// Nuclear spin of ¹³³Cs, doubled.
pub const TWICE_I: i32 = 7;

const FIXTURE: &str = include_str!("data/cs_hyperfine.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Manifold {
    /// `6S_{1/2}`
    S12,
    /// `6P_{1/2}`, upper level of D1
    P12,
    /// `6P_{3/2}`, upper level of D2
    P32,
}

impl Manifold {
    /// Electronic angular momentum `J`, doubled.
    pub fn twice_j(self) -> i32 {
        match self {
            Manifold::S12 | Manifold::P12 => 1,
            Manifold::P32 => 3,
        }
    }

    pub fn is_ground(self) -> bool {
        self == Manifold::S12
    }
}

impl FromStr for Manifold {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S1/2" => Ok(Manifold::S12),
            "P1/2" => Ok(Manifold::P12),
            "P3/2" => Ok(Manifold::P32),
            other => Err(SimError::domain(format!("unknown manifold '{other}' (expected S1/2, P1/2 or P3/2)"))),
        }
    }
}

impl fmt::Display for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Manifold::S12 => "S1/2",
            Manifold::P12 => "P1/2",
            Manifold::P32 => "P3/2",
        })
    }
}

/// Optical line connecting the ground state to an excited manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Line {
    D1,
    D2,
}

impl Line {
    pub fn excited(self) -> Manifold {
        match self {
            Line::D1 => Manifold::P12,
            Line::D2 => Manifold::P32,
        }
    }
}

impl FromStr for Line {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "D1" => Ok(Line::D1),
            "D2" => Ok(Line::D2),
            _ => Err(SimError::domain(format!("unknown line '{s}' (expected D1 or D2)"))),
        }
    }
}

/// One Zeeman sublevel `|F, m_F⟩` of a manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct HyperfineLevel {
    pub manifold: Manifold,
    pub f: i32,
    pub m_f: i32,
}

impl HyperfineLevel {
    pub fn new(manifold: Manifold, f: i32, m_f: i32) -> Result<Self> {
        if f < 0 || m_f.abs() > f {
            return Err(SimError::domain(format!("invalid sublevel F = {f}, m_F = {m_f}")));
        }
        Ok(Self { manifold, f, m_f })
    }

    pub fn ground(f: i32, m_f: i32) -> Self {
        Self::new(Manifold::S12, f, m_f).expect("valid ground sublevel")
    }
}

/// Row of the level table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelEntry {
    pub manifold: Manifold,
    pub f: i32,
    pub energy_mhz: f64,
}

/// Hyperfine energies of every manifold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelTable {
    entries: Vec<LevelEntry>,
}

impl LevelTable {
    /// Parse the whitespace-separated `manifold F energy` format; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let bad = |what: &str| SimError::domain(format!("level table line {}: {what}", lineno + 1));
            if cols.len() != 3 {
                return Err(bad("expected three columns"));
            }
            let manifold: Manifold = cols[0].parse()?;
            let f: i32 = cols[1].parse().map_err(|_| bad("F is not an integer"))?;
            let energy_mhz: f64 = cols[2].parse().map_err(|_| bad("energy is not a number"))?;
            let tf = 2 * f;
            let tj = manifold.twice_j();
            if tf < (TWICE_I - tj).abs() || tf > TWICE_I + tj {
                return Err(bad("F is not reachable from I and J"));
            }
            if entries.iter().any(|e: &LevelEntry| e.manifold == manifold && e.f == f) {
                return Err(bad("duplicate level"));
            }
            entries.push(LevelEntry { manifold, f, energy_mhz });
        }
        Ok(Self { entries })
    }

    /// The bundled Cs table.
    pub fn cesium() -> &'static LevelTable {
        static TABLE: OnceLock<LevelTable> = OnceLock::new();
        TABLE.get_or_init(|| LevelTable::parse(FIXTURE).expect("bundled level table parses"))
    }

    pub fn entries(&self) -> &[LevelEntry] {
        &self.entries
    }

    pub fn energy(&self, manifold: Manifold, f: i32) -> Result<f64> {
        self.entries
            .iter()
            .find(|e| e.manifold == manifold && e.f == f)
            .map(|e| e.energy_mhz)
            .ok_or_else(|| SimError::domain(format!("no level {manifold} F = {f} in the table")))
    }

    /// Hyperfine levels `F` of a manifold, ascending.
    pub fn levels(&self, manifold: Manifold) -> Vec<i32> {
        let mut fs: Vec<i32> = self.entries.iter().filter(|e| e.manifold == manifold).map(|e| e.f).collect();
        fs.sort_unstable();
        fs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_table_is_complete() {
        let t = LevelTable::cesium();
        assert_eq!(t.levels(Manifold::S12), vec![3, 4]);
        assert_eq!(t.levels(Manifold::P12), vec![3, 4]);
        assert_eq!(t.levels(Manifold::P32), vec![2, 3, 4, 5]);
        let split = t.energy(Manifold::S12, 4).unwrap() - t.energy(Manifold::S12, 3).unwrap();
        assert!((split - 9192.631770).abs() < 1e-6);
    }

    #[test]
    fn rejects_malformed_rows() {
        assert!(LevelTable::parse("S1/2 9 0.0").is_err());
        assert!(LevelTable::parse("X 3 0.0").is_err());
        assert!(LevelTable::parse("S1/2 3").is_err());
        assert!(LevelTable::parse("S1/2 3 1\nS1/2 3 2").is_err());
    }
}
