//! Built-in molecules with hand-authored mode sets, toy regression data, and
//! independent verification oracles.
//!
//! The files live in `crates/core/fixtures/` and are compiled into the
//! binary. Geometries are idealized (standard bond lengths and angles) and
//! modes are bond-stretch local modes; they are plausible stand-ins, not
//! optimized structures.

use ndarray::Array2;

use crate::chemio::{parse_modes, parse_xyz, ChemError, Molecule, ModeSet};
use crate::rng::RngStream;

pub mod oracles;

#[derive(Debug, Clone, Copy)]
pub struct Fixture {
    pub key: &'static str,
    pub xyz: &'static str,
    pub modes: &'static str,
}

macro_rules! fixture {
    ($key:literal) => {
        Fixture {
            key: $key,
            xyz: include_str!(concat!("../../fixtures/", $key, ".xyz")),
            modes: include_str!(concat!("../../fixtures/", $key, ".modes")),
        }
    };
}

pub const FIXTURES: [Fixture; 8] = [
    fixture!("dinitrogen"),
    fixture!("water"),
    fixture!("mpd"),
    fixture!("piperazine"),
    fixture!("eda"),
    fixture!("tmc"),
    fixture!("tpc"),
    fixture!("octadecanal"),
];

/// Amine monomers used by the synthetic benchmark.
pub const AMINES: [&str; 3] = ["mpd", "piperazine", "eda"];
/// Acyl chloride monomers used by the synthetic benchmark.
pub const ACYL_CHLORIDES: [&str; 2] = ["tmc", "tpc"];

pub fn fixture(key: &str) -> Option<&'static Fixture> {
    FIXTURES.iter().find(|f| f.key == key)
}

/// Parses a fixture by key. Panics only on an unknown key.
pub fn load(key: &str) -> Result<(Molecule, ModeSet), ChemError> {
    let f = fixture(key).unwrap_or_else(|| panic!("no fixture named {key:?}"));
    let m = parse_xyz(f.xyz)?;
    let modes = parse_modes(f.modes, &m)?;
    Ok((m, modes))
}

#[derive(Debug, Clone)]
pub struct FixtureLibrary {
    pub entries: Vec<(&'static str, Molecule, ModeSet)>,
}

impl FixtureLibrary {
    pub fn load() -> Result<Self, ChemError> {
        let entries = FIXTURES
            .iter()
            .map(|f| load(f.key).map(|(m, s)| (f.key, m, s)))
            .collect::<Result<_, _>>()?;
        Ok(FixtureLibrary { entries })
    }

    pub fn get(&self, key: &str) -> Option<(&Molecule, &ModeSet)> {
        self.entries.iter().find(|e| e.0 == key).map(|e| (&e.1, &e.2))
    }
}

/// `n` points in `[0,1]^dims` with `y = 0.1 + Σ w_j x_j`, `w_j = (-1)^j (j+1)/(2 dims)`.
pub fn linear_toy(n: usize, dims: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
    let mut rng = RngStream::for_purpose(seed, "linear-toy", 0);
    let x = Array2::from_shape_fn((n, dims), |_| rng.uniform());
    let w: Vec<f64> = (0..dims)
        .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } * (j + 1) as f64 / (2 * dims) as f64)
        .collect();
    let y = x
        .rows()
        .into_iter()
        .map(|r| 0.1 + r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    (x, y)
}

/// Random regression problem with a nonlinear target, for baseline checks.
pub fn random_regression(n: usize, dims: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
    let mut rng = RngStream::for_purpose(seed, "random-regression", 0);
    let x = Array2::from_shape_fn((n, dims), |_| rng.uniform_range(-1.0, 1.0));
    let y = x
        .rows()
        .into_iter()
        .map(|r| (2.0 * r[0]).sin() + r.iter().skip(1).map(|v| v * v).sum::<f64>() * 0.3)
        .map(|v| v + 0.05 * rng.standard_normal())
        .collect();
    (x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chemio::{MAX_ATOMS, MODE_NORM_TOL};

    #[test]
    fn every_fixture_parses_with_unit_modes() {
        let lib = FixtureLibrary::load().unwrap();
        assert_eq!(lib.entries.len(), FIXTURES.len());
        for (key, m, s) in &lib.entries {
            assert!(!s.modes.is_empty(), "{key}");
            assert!(s.modes.len() <= 3 * m.len());
            for mode in &s.modes {
                assert_eq!(mode.displacements.len(), m.len());
                assert!((mode.norm() - 1.0).abs() <= MODE_NORM_TOL, "{key}");
            }
        }
    }

    #[test]
    fn padding_limit_fixture_is_exactly_full() {
        let (m, _) = load("octadecanal").unwrap();
        assert_eq!(m.len(), MAX_ATOMS);
    }

    #[test]
    fn aromatic_amine_surrogate_size() {
        let (m, _) = load("mpd").unwrap();
        assert!((10..=20).contains(&m.len()));
    }
}
