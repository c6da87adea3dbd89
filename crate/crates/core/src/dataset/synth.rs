//! Seeded synthetic benchmark standing in for literature-collected records.
//!
//! Monomers come from the fixture library; conditions are uniform in
//! realistic ranges; labels are a fixed smooth function of the conditions
//! and of geometric summaries (mean pairwise distance, molecular mass) plus
//! Gaussian noise.

use std::sync::Arc;

use super::{Dataset, DatasetError, MembraneRecord, Provenance};
use crate::chemio::Molecule;
use crate::featurize::{Conditions, Substrate};
use crate::fixtures::{FixtureLibrary, ACYL_CHLORIDES, AMINES};
use crate::rng::RngStream;
use crate::vibration::{perturb, VibrationConfig};

pub const MIN_RECORDS: usize = 10;
pub const CONC_RANGE: (f64, f64) = (0.05, 2.0);
pub const PRESSURE_RANGE: (f64, f64) = (2.0, 20.0);
pub const REJECTION_NOISE: f64 = 0.02;
pub const FLUX_NOISE: f64 = 0.02;
/// Each record carries its own conformer: the fixture geometry displaced
/// along this many thermally excited modes.
pub const CONFORMER_MODES: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub rejection: f64,
    pub flux: f64,
}

fn unit(v: f64, (lo, hi): (f64, f64)) -> f64 {
    (2.0 * v - lo - hi) / (hi - lo)
}

/// Noiseless labels. Rejection is clamped to [0, 1] and flux to ≥ 0.
pub fn ground_truth(c: &Conditions, amine: &Molecule, acyl: &Molecule) -> GroundTruth {
    let a = unit(c.aqueous_conc, CONC_RANGE);
    let o = unit(c.organic_conc, CONC_RANGE);
    let p = unit(c.pressure, PRESSURE_RANGE);
    let s = [0.0, 0.04, -0.05][c.substrate as usize];
    // ~3 Å for the small amines, larger for the aromatic acyl chlorides
    let da = amine.mean_pairwise_distance() - 3.0;
    let db = acyl.mean_pairwise_distance() - 4.0;
    let ma = amine.total_mass() / 100.0 - 1.0;
    let mb = acyl.total_mass() / 200.0 - 1.0;

    let rejection = 0.62 + 0.14 * (1.6 * a + 0.8 * da).tanh() + 0.07 * o - 0.05 * o * o
        + 0.05 * p
        + 0.04 * a * p
        + s
        + 0.10 * db
        + 0.08 * ma;
    let flux = 0.55 + 0.25 * p - 0.12 * (1.2 * a + da).tanh() - 0.06 * o + 0.03 * p * o - 0.8 * s
        - 0.10 * mb
        + 0.05 * db;
    GroundTruth {
        rejection: rejection.clamp(0.0, 1.0),
        flux: flux.max(0.0),
    }
}

pub fn synth_generate(n: usize, seed: u64) -> Result<Dataset, DatasetError> {
    if n < MIN_RECORDS {
        return Err(DatasetError::TooFew {
            need: MIN_RECORDS,
            got: n,
        });
    }
    let lib = FixtureLibrary::load()?;
    let pick = |key: &str| {
        let (m, s) = lib.get(key).expect("fixture library is complete");
        (m.clone(), Arc::new(s.clone()))
    };
    let amines: Vec<_> = AMINES.iter().map(|k| pick(k)).collect();
    let acyls: Vec<_> = ACYL_CHLORIDES.iter().map(|k| pick(k)).collect();

    let mut rng = RngStream::for_purpose(seed, "synth", 0);
    let width = n.to_string().len().max(3);
    let records = (0..n)
        .map(|i| -> Result<MembraneRecord, DatasetError> {
            let (ma, sa) = &amines[rng.below(amines.len())];
            let (mb, sb) = &acyls[rng.below(acyls.len())];
            let conf = VibrationConfig {
                modes_per_sample: CONFORMER_MODES,
                ..VibrationConfig::default()
            };
            let mut crng = RngStream::for_purpose(seed, "synth-conformer", i as u64);
            let ma = &perturb(ma, sa, &conf, &mut crng)?;
            let mb = &perturb(mb, sb, &conf, &mut crng)?;
            let conditions = Conditions {
                aqueous_conc: rng.uniform_range(CONC_RANGE.0, CONC_RANGE.1),
                organic_conc: rng.uniform_range(CONC_RANGE.0, CONC_RANGE.1),
                pressure: rng.uniform_range(PRESSURE_RANGE.0, PRESSURE_RANGE.1),
                substrate: Substrate::ALL[rng.below(3)],
            };
            let truth = ground_truth(&conditions, ma, mb);
            let rejection = (truth.rejection + REJECTION_NOISE * rng.standard_normal()).clamp(0.0, 1.0);
            let flux = (truth.flux + FLUX_NOISE * rng.standard_normal()).max(0.0);
            Ok(MembraneRecord {
                id: format!("syn{i:0width$}"),
                conditions,
                monomer_a: ma.clone(),
                monomer_b: mb.clone(),
                modes_a: Some(sa.clone()),
                modes_b: Some(sb.clone()),
                rejection,
                flux,
            })
        })
        .collect::<Result<_, _>>()?;
    Dataset::new(records, Provenance::Synthetic)
}
