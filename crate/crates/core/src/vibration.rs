//! Thermally bounded harmonic displacements along normal modes.
//!
//! Each mode is treated as a classical oscillator holding the environmental
//! energy `E = k_B T`. Its turning point `A = sqrt(2E / k)` bounds the mode
//! coordinate, which is drawn from a normal distribution centred on the
//! equilibrium geometry with standard deviation `sigma_fraction * A` and
//! truncated at `±A` by rejection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chemio::{Molecule, ModeSet, VibrationalMode};
use crate::rng::RngStream;

/// J/K (exact, SI 2019)
pub const BOLTZMANN: f64 = 1.380649e-23;
/// N/m per mdyn/Å
pub const MDYN_PER_ANGSTROM_IN_N_PER_M: f64 = 100.0;
const METERS_TO_ANGSTROM: f64 = 1e10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VibrationError {
    #[error("force constant must be positive and finite, got {0}")]
    ForceConstant(f64),
    #[error("temperature must be positive and finite, got {0}")]
    Temperature(f64),
    #[error("invalid vibration config: {0}")]
    Config(String),
    #[error("mode set is empty")]
    EmptyModeSet,
    #[error("mode set has {modes} atoms but molecule has {molecule}")]
    AtomCountMismatch { modes: usize, molecule: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VibrationConfig {
    /// K
    pub temperature: f64,
    pub sigma_fraction: f64,
    pub modes_per_sample: usize,
    /// Å, used when a monomer has no mode set
    pub fallback_sigma: f64,
}

impl Default for VibrationConfig {
    fn default() -> Self {
        VibrationConfig {
            temperature: 298.15,
            sigma_fraction: 1.0 / 3.0,
            modes_per_sample: 1,
            fallback_sigma: 0.03,
        }
    }
}

impl VibrationConfig {
    pub fn validate(&self) -> Result<(), VibrationError> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(VibrationError::Temperature(self.temperature));
        }
        if !(self.sigma_fraction > 0.0 && self.sigma_fraction <= 1.0) {
            return Err(VibrationError::Config(format!(
                "sigma_fraction must lie in (0, 1], got {}",
                self.sigma_fraction
            )));
        }
        if self.modes_per_sample == 0 {
            return Err(VibrationError::Config("modes_per_sample must be at least 1".into()));
        }
        if !(self.fallback_sigma >= 0.0 && self.fallback_sigma.is_finite()) {
            return Err(VibrationError::Config(format!(
                "fallback_sigma must be nonnegative, got {}",
                self.fallback_sigma
            )));
        }
        Ok(())
    }
}

/// Classical turning-point amplitude in Å for a mode of stiffness
/// `force_constant` (mdyn/Å) at `temperature` (K).
pub fn max_amplitude(force_constant: f64, temperature: f64) -> Result<f64, VibrationError> {
    if !(force_constant > 0.0 && force_constant.is_finite()) {
        return Err(VibrationError::ForceConstant(force_constant));
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(VibrationError::Temperature(temperature));
    }
    let k_si = force_constant * MDYN_PER_ANGSTROM_IN_N_PER_M;
    let energy = BOLTZMANN * temperature;
    Ok((2.0 * energy / k_si).sqrt() * METERS_TO_ANGSTROM)
}

/// Draws one mode coordinate (Å along the unit mode vector).
pub fn sample_mode_coordinate(
    mode: &VibrationalMode,
    cfg: &VibrationConfig,
    rng: &mut RngStream,
) -> Result<f64, VibrationError> {
    let amplitude = max_amplitude(mode.force_constant, cfg.temperature)?;
    Ok(truncated_normal(amplitude, cfg.sigma_fraction, rng))
}

fn truncated_normal(amplitude: f64, sigma_fraction: f64, rng: &mut RngStream) -> f64 {
    let sigma = sigma_fraction * amplitude;
    if sigma == 0.0 {
        return 0.0;
    }
    loop {
        let q = sigma * rng.standard_normal();
        if q.abs() <= amplitude {
            return q;
        }
    }
}

/// Displaces `molecule` along `modes_per_sample` distinct, uniformly chosen modes.
pub fn perturb(
    molecule: &Molecule,
    modeset: &ModeSet,
    cfg: &VibrationConfig,
    rng: &mut RngStream,
) -> Result<Molecule, VibrationError> {
    cfg.validate()?;
    if modeset.modes.is_empty() {
        return Err(VibrationError::EmptyModeSet);
    }
    if let Some(bad) = modeset
        .modes
        .iter()
        .find(|m| m.displacements.len() != molecule.atoms.len())
    {
        return Err(VibrationError::AtomCountMismatch {
            modes: bad.displacements.len(),
            molecule: molecule.atoms.len(),
        });
    }
    if cfg.modes_per_sample > modeset.modes.len() {
        return Err(VibrationError::Config(format!(
            "modes_per_sample {} exceeds the {} available modes",
            cfg.modes_per_sample,
            modeset.modes.len()
        )));
    }

    let mut out = molecule.clone();
    let chosen = rng.sample_without_replacement(modeset.modes.len(), cfg.modes_per_sample);
    for idx in chosen {
        let mode = &modeset.modes[idx];
        let q = sample_mode_coordinate(mode, cfg, rng)?;
        for (atom, d) in out.atoms.iter_mut().zip(&mode.displacements) {
            for k in 0..3 {
                atom.position[k] += q * d[k];
            }
        }
    }
    Ok(out)
}

/// Fallback jitter: every coordinate gets independent `Normal(0, fallback_sigma²)`.
pub fn perturb_isotropic(
    molecule: &Molecule,
    cfg: &VibrationConfig,
    rng: &mut RngStream,
) -> Result<Molecule, VibrationError> {
    cfg.validate()?;
    let mut out = molecule.clone();
    if cfg.fallback_sigma == 0.0 {
        return Ok(out);
    }
    for atom in &mut out.atoms {
        for c in atom.position.iter_mut() {
            *c += cfg.fallback_sigma * rng.standard_normal();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chemio::{parse_modes, parse_xyz};

    fn stretch() -> (Molecule, ModeSet) {
        let m = parse_xyz("2\nN2\nN 0 0 0.5488\nN 0 0 -0.5488").unwrap();
        let s = parse_modes("MODES 1 2\nMODE 1 2358.57 7.0034 22.95\n0 0 0.7071\n0 0 -0.7071\n", &m).unwrap();
        (m, s)
    }

    #[test]
    fn amplitude_reference_value() {
        // E = k_B T expressed in mdyn*Å (1 mdyn*Å = 1e-18 J)
        let energy = 1.380649e-23 * 298.15 / 1e-18;
        let oracle = (2.0 * energy / 1.0_f64).sqrt();
        let a = max_amplitude(1.0, 298.15).unwrap();
        assert!((a - 0.090735).abs() < 1e-5);
        assert!((a - oracle).abs() < 1e-15);
    }

    #[test]
    fn amplitude_scaling() {
        let a = max_amplitude(1.0, 298.15).unwrap();
        let b = max_amplitude(0.25, 298.15).unwrap();
        assert!((b / a - 2.0).abs() < 1e-12);
        let c = max_amplitude(4.0, 298.15).unwrap();
        assert!((c * 2.0 / a - 1.0).abs() < 1e-12);
        assert!(max_amplitude(1.0, 1e-300).unwrap() < 1e-140);
    }

    #[test]
    fn amplitude_rejects_bad_inputs() {
        assert!(max_amplitude(0.0, 300.0).is_err());
        assert!(max_amplitude(1.0, -1.0).is_err());
        assert!(max_amplitude(f64::NAN, 300.0).is_err());
    }

    #[test]
    fn zero_temperature_limit_is_identity() {
        let (m, s) = stretch();
        let cfg = VibrationConfig {
            temperature: 1e-300,
            ..Default::default()
        };
        let mut rng = RngStream::new(1, 0);
        let out = perturb(&m, &s, &cfg, &mut rng).unwrap();
        for (a, b) in out.atoms.iter().zip(&m.atoms) {
            for k in 0..3 {
                assert!((a.position[k] - b.position[k]).abs() < 1e-140);
            }
        }
    }

    #[test]
    fn stretch_moves_only_along_z_antiparallel() {
        let (m, s) = stretch();
        let cfg = VibrationConfig::default();
        for stream in 0..50 {
            let mut rng = RngStream::new(5, stream);
            let out = perturb(&m, &s, &cfg, &mut rng).unwrap();
            let d0: Vec<f64> = (0..3).map(|k| out.atoms[0].position[k] - m.atoms[0].position[k]).collect();
            let d1: Vec<f64> = (0..3).map(|k| out.atoms[1].position[k] - m.atoms[1].position[k]).collect();
            assert_eq!(&d0[..2], &[0.0, 0.0]);
            assert_eq!(&d1[..2], &[0.0, 0.0]);
            assert!(d0[2] * d1[2] <= 0.0);
            assert!((d0[2] + d1[2]).abs() < 1e-15);
        }
    }

    #[test]
    fn errors() {
        let (m, _) = stretch();
        let empty = ModeSet {
            molecule_name: "x".into(),
            modes: vec![],
        };
        let mut rng = RngStream::new(1, 0);
        assert_eq!(
            perturb(&m, &empty, &VibrationConfig::default(), &mut rng),
            Err(VibrationError::EmptyModeSet)
        );
        let three = parse_xyz("3\nw\nO 0 0 0\nH 1 0 0\nH 0 1 0").unwrap();
        let (_, s) = stretch();
        assert!(matches!(
            perturb(&three, &s, &VibrationConfig::default(), &mut rng),
            Err(VibrationError::AtomCountMismatch { .. })
        ));
        let bad = VibrationConfig {
            sigma_fraction: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn isotropic_zero_sigma_is_identity() {
        let (m, _) = stretch();
        let cfg = VibrationConfig {
            fallback_sigma: 0.0,
            ..Default::default()
        };
        let out = perturb_isotropic(&m, &cfg, &mut RngStream::new(3, 3)).unwrap();
        assert_eq!(out, m);
    }
}
