//! Fixed-length descriptor vectors and min-max scaling.
//!
//! Layout of the 444 entries:
//!
//! | index      | content                                      |
//! |------------|----------------------------------------------|
//! | 0          | aqueous-phase concentration (wt/v %)         |
//! | 1          | organic-phase concentration (wt/v %)         |
//! | 2          | test pressure (bar)                          |
//! | 3          | substrate code (PSF 0, PES 1, PAN 2)         |
//! | 4..224     | amine monomer, 55 blocks of (scalar, x, y, z)|
//! | 224..444   | acyl chloride monomer, same layout           |
//!
//! Atom blocks past a monomer's atom count are zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chemio::{Molecule, MAX_ATOMS};

pub const CONDITION_DIMS: usize = 4;
pub const ATOM_BLOCK: usize = 4;
pub const MONOMER_DIMS: usize = MAX_ATOMS * ATOM_BLOCK;
pub const FEATURE_DIMS: usize = CONDITION_DIMS + 2 * MONOMER_DIMS;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("monomer '{name}' has {count} atoms; at most {max} fit the descriptor", max = MAX_ATOMS)]
    TooManyAtoms { name: String, count: usize },
    #[error("expected {expected} values, got {found}")]
    Length { expected: usize, found: usize },
    #[error("non-finite descriptor value at index {0}")]
    NonFinite(usize),
    #[error("cannot fit a scaler on an empty set")]
    EmptyFit,
    #[error("invalid conditions: {0}")]
    Conditions(String),
    #[error("unknown substrate {0:?}")]
    Substrate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Substrate {
    Psf = 0,
    Pes = 1,
    Pan = 2,
}

impl Substrate {
    pub const ALL: [Substrate; 3] = [Substrate::Psf, Substrate::Pes, Substrate::Pan];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn parse(text: &str) -> Result<Self, FeatureError> {
        match text.trim().to_ascii_uppercase().as_str() {
            "0" | "PSF" => Ok(Substrate::Psf),
            "1" | "PES" => Ok(Substrate::Pes),
            "2" | "PAN" => Ok(Substrate::Pan),
            _ => Err(FeatureError::Substrate(text.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conditions {
    /// wt/v %
    pub aqueous_conc: f64,
    /// wt/v %
    pub organic_conc: f64,
    /// bar
    pub pressure: f64,
    pub substrate: Substrate,
}

impl Conditions {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if !(self.aqueous_conc >= 0.0 && self.aqueous_conc.is_finite()) {
            return Err(FeatureError::Conditions(format!(
                "aqueous concentration {} must be nonnegative",
                self.aqueous_conc
            )));
        }
        if !(self.organic_conc >= 0.0 && self.organic_conc.is_finite()) {
            return Err(FeatureError::Conditions(format!(
                "organic concentration {} must be nonnegative",
                self.organic_conc
            )));
        }
        if !(self.pressure > 0.0 && self.pressure.is_finite()) {
            return Err(FeatureError::Conditions(format!(
                "pressure {} must be positive",
                self.pressure
            )));
        }
        Ok(())
    }
}

/// Per-atom scalar written ahead of the coordinates in each block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomScalar {
    #[default]
    AtomicMass,
    AtomicNumber,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self, FeatureError> {
        if values.len() != FEATURE_DIMS {
            return Err(FeatureError::Length {
                expected: FEATURE_DIMS,
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite(i));
        }
        Ok(FeatureVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub fn encode(conditions: &Conditions, monomer_a: &Molecule, monomer_b: &Molecule) -> Result<FeatureVector, FeatureError> {
    encode_with(conditions, monomer_a, monomer_b, AtomScalar::AtomicMass)
}

pub fn encode_with(
    conditions: &Conditions,
    monomer_a: &Molecule,
    monomer_b: &Molecule,
    scalar: AtomScalar,
) -> Result<FeatureVector, FeatureError> {
    let mut v = vec![0.0; FEATURE_DIMS];
    v[0] = conditions.aqueous_conc;
    v[1] = conditions.organic_conc;
    v[2] = conditions.pressure;
    v[3] = conditions.substrate.code() as f64;
    write_monomer(&mut v[CONDITION_DIMS..CONDITION_DIMS + MONOMER_DIMS], monomer_a, scalar)?;
    write_monomer(&mut v[CONDITION_DIMS + MONOMER_DIMS..], monomer_b, scalar)?;
    FeatureVector::new(v)
}

fn write_monomer(slot: &mut [f64], m: &Molecule, scalar: AtomScalar) -> Result<(), FeatureError> {
    if m.atoms.len() > MAX_ATOMS {
        return Err(FeatureError::TooManyAtoms {
            name: m.name.clone(),
            count: m.atoms.len(),
        });
    }
    for (block, atom) in slot.chunks_exact_mut(ATOM_BLOCK).zip(&m.atoms) {
        block[0] = match scalar {
            AtomScalar::AtomicMass => atom.mass,
            AtomScalar::AtomicNumber => atom.atomic_number() as f64,
        };
        block[1..].copy_from_slice(&atom.position);
    }
    Ok(())
}

/// Per-dimension min-max scaler. Degenerate dimensions map to 0 and values
/// outside the fitted range are not clipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaler {
    pub fn fit<'a, I>(rows: I) -> Result<Self, FeatureError>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut iter = rows.into_iter();
        let first = iter.next().ok_or(FeatureError::EmptyFit)?;
        let mut min = first.to_vec();
        let mut max = first.to_vec();
        for row in iter {
            if row.len() != min.len() {
                return Err(FeatureError::Length {
                    expected: min.len(),
                    found: row.len(),
                });
            }
            for ((lo, hi), &x) in min.iter_mut().zip(max.iter_mut()).zip(row) {
                if x < *lo {
                    *lo = x;
                }
                if x > *hi {
                    *hi = x;
                }
            }
        }
        Ok(Scaler { min, max })
    }

    pub fn dims(&self) -> usize {
        self.min.len()
    }

    pub fn is_degenerate(&self, dim: usize) -> bool {
        self.max[dim] <= self.min[dim]
    }

    pub fn transform_value(&self, dim: usize, x: f64) -> f64 {
        let range = self.max[dim] - self.min[dim];
        if range > 0.0 {
            (x - self.min[dim]) / range
        } else {
            0.0
        }
    }

    pub fn inverse_value(&self, dim: usize, y: f64) -> f64 {
        let range = self.max[dim] - self.min[dim];
        if range > 0.0 {
            self.min[dim] + y * range
        } else {
            self.min[dim]
        }
    }

    pub fn transform_slice(&self, x: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if x.len() != self.dims() {
            return Err(FeatureError::Length {
                expected: self.dims(),
                found: x.len(),
            });
        }
        Ok(x.iter().enumerate().map(|(d, &v)| self.transform_value(d, v)).collect())
    }
}

pub fn fit_scaler(train: &[FeatureVector]) -> Result<Scaler, FeatureError> {
    Scaler::fit(train.iter().map(|v| v.as_slice()))
}

pub fn transform(scaler: &Scaler, v: &FeatureVector) -> Result<FeatureVector, FeatureError> {
    scaler.transform_slice(v.as_slice()).map(FeatureVector)
}
