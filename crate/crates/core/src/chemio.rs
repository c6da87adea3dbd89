//! Molecular geometry (`.xyz`) and vibrational-mode (`.modes`) files.
//!
//! XYZ grammar: line 1 holds the atom count `N`, line 2 the molecule name,
//! lines `3..N+2` hold `symbol x y z` in Ångström. Masses always come from the
//! embedded periodic table, never from the file.
//!
//! `.modes` grammar:
//!
//! ```text
//! MODES <nmodes> <natoms>
//! MODE <index> <freq_cm-1> <reduced_mass_amu> <force_const_mdyn_per_A>
//! <dx> <dy> <dz>      # natoms lines
//! ...
//! ```
//!
//! Blank lines and `#` comments are ignored anywhere in a `.modes` file.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest molecule the 444-wide descriptor can hold.
pub const MAX_ATOMS: usize = 55;

/// Tolerance on the unit norm of a loaded mode.
pub const MODE_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChemError {
    #[error("empty input")]
    Empty,
    #[error("malformed atom count {text:?} at line {line}")]
    BadCount { line: usize, text: String },
    #[error("molecule declares {count} atoms at line {line}; between 1 and {max} are supported", max = MAX_ATOMS)]
    AtomCountOutOfRange { line: usize, count: usize },
    #[error("unknown element symbol '{symbol}' at line {line}")]
    UnknownElement { line: usize, symbol: String },
    #[error("malformed atom line {line}: {reason}")]
    BadAtomLine { line: usize, reason: String },
    #[error("atom count mismatch: expected {expected}, found {found} (line {line})")]
    AtomCountMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("malformed modes header at line {line}: {reason}")]
    BadModesHeader { line: usize, reason: String },
    #[error("malformed mode header at line {line}: {reason}")]
    BadModeHeader { line: usize, reason: String },
    #[error("malformed displacement at line {line}: {reason}")]
    BadDisplacement { line: usize, reason: String },
    #[error("mode {index} at line {line} has nonpositive frequency {frequency} cm^-1 (imaginary or zero modes are rejected)")]
    ImaginaryMode {
        line: usize,
        index: usize,
        frequency: f64,
    },
    #[error("mode {index} at line {line} has nonpositive force constant {value}")]
    NonPositiveForceConstant { line: usize, index: usize, value: f64 },
    #[error("mode {index} at line {line} has nonpositive reduced mass {value}")]
    NonPositiveReducedMass { line: usize, index: usize, value: f64 },
    #[error("mode {index} has a zero displacement field")]
    ZeroDisplacement { index: usize },
    #[error("too many modes: {nmodes} for {natoms} atoms (at most 3 per atom)")]
    TooManyModes { nmodes: usize, natoms: usize },
    #[error("truncated modes file: expected {expected} more line(s) after line {line}")]
    Truncated { line: usize, expected: usize },
    #[error("unexpected content at line {line}")]
    TrailingContent { line: usize },
    #[error("invalid atom: {0}")]
    InvalidAtom(String),
}

/// One row of the embedded periodic table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub symbol: &'static str,
    pub number: u8,
    /// IUPAC 2021 abridged standard atomic weight, amu.
    pub mass: f64,
}

const fn el(symbol: &'static str, number: u8, mass: f64) -> Element {
    Element {
        symbol,
        number,
        mass,
    }
}

static PERIODIC_TABLE: [Element; 37] = [
    el("H", 1, 1.0080),
    el("He", 2, 4.0026),
    el("Li", 3, 6.94),
    el("Be", 4, 9.0122),
    el("B", 5, 10.81),
    el("C", 6, 12.011),
    el("N", 7, 14.007),
    el("O", 8, 15.999),
    el("F", 9, 18.998),
    el("Ne", 10, 20.180),
    el("Na", 11, 22.990),
    el("Mg", 12, 24.305),
    el("Al", 13, 26.982),
    el("Si", 14, 28.085),
    el("P", 15, 30.974),
    el("S", 16, 32.06),
    el("Cl", 17, 35.45),
    el("Ar", 18, 39.95),
    el("K", 19, 39.098),
    el("Ca", 20, 40.078),
    el("Sc", 21, 44.956),
    el("Ti", 22, 47.867),
    el("V", 23, 50.942),
    el("Cr", 24, 51.996),
    el("Mn", 25, 54.938),
    el("Fe", 26, 55.845),
    el("Co", 27, 58.933),
    el("Ni", 28, 58.693),
    el("Cu", 29, 63.546),
    el("Zn", 30, 65.38),
    el("Ga", 31, 69.723),
    el("Ge", 32, 72.630),
    el("As", 33, 74.922),
    el("Se", 34, 78.971),
    el("Br", 35, 79.904),
    el("Kr", 36, 83.798),
    el("I", 53, 126.90),
];

/// Looks up an element by its case-sensitive symbol.
pub fn element(symbol: &str) -> Option<&'static Element> {
    PERIODIC_TABLE.iter().find(|e| e.symbol == symbol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub element: String,
    /// amu
    pub mass: f64,
    /// Å
    pub position: [f64; 3],
}

impl Atom {
    pub fn new(symbol: &str, position: [f64; 3]) -> Result<Self, ChemError> {
        let e = element(symbol).ok_or_else(|| ChemError::InvalidAtom(format!("unknown element '{symbol}'")))?;
        if !position.iter().all(|c| c.is_finite()) {
            return Err(ChemError::InvalidAtom("non-finite coordinate".into()));
        }
        Ok(Atom {
            element: e.symbol.to_string(),
            mass: e.mass,
            position,
        })
    }

    pub fn atomic_number(&self) -> u8 {
        element(&self.element).map_or(0, |e| e.number)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Molecule {
    pub name: String,
    pub atoms: Vec<Atom>,
}

impl Molecule {
    pub fn new(name: impl Into<String>, atoms: Vec<Atom>) -> Result<Self, ChemError> {
        if atoms.is_empty() || atoms.len() > MAX_ATOMS {
            return Err(ChemError::AtomCountOutOfRange {
                line: 0,
                count: atoms.len(),
            });
        }
        Ok(Molecule {
            name: name.into(),
            atoms,
        })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    /// Mean distance over all unordered atom pairs, 0 for a single atom.
    pub fn mean_pairwise_distance(&self) -> f64 {
        let n = self.atoms.len();
        if n < 2 {
            return 0.0;
        }
        let mut total = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                total += distance(self.atoms[i].position, self.atoms[j].position);
            }
        }
        total / (n * (n - 1) / 2) as f64
    }
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VibrationalMode {
    /// cm⁻¹, strictly positive
    pub frequency: f64,
    /// amu
    pub reduced_mass: f64,
    /// mdyn/Å
    pub force_constant: f64,
    /// Unit-norm over all 3N components, one vector per atom.
    pub displacements: Vec<[f64; 3]>,
}

impl VibrationalMode {
    pub fn norm(&self) -> f64 {
        self.displacements
            .iter()
            .flat_map(|d| d.iter())
            .map(|c| c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// Largest per-atom displacement length.
    pub fn max_atom_norm(&self) -> f64 {
        self.displacements
            .iter()
            .map(|d| (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    pub molecule_name: String,
    pub modes: Vec<VibrationalMode>,
}

impl ModeSet {
    pub fn atom_count(&self) -> Option<usize> {
        self.modes.first().map(|m| m.displacements.len())
    }
}

fn parse_finite(tok: &str) -> Option<f64> {
    tok.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn parse_xyz(text: &str) -> Result<Molecule, ChemError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, count_line) = lines.next().ok_or(ChemError::Empty)?;
    let count_text = count_line.trim();
    if count_text.is_empty() && text.trim().is_empty() {
        return Err(ChemError::Empty);
    }
    let count: usize = count_text.parse().map_err(|_| ChemError::BadCount {
        line: 1,
        text: count_text.to_string(),
    })?;
    if count == 0 || count > MAX_ATOMS {
        return Err(ChemError::AtomCountOutOfRange { line: 1, count });
    }
    let name = match lines.next() {
        Some((_, l)) => l.trim().to_string(),
        None => {
            return Err(ChemError::AtomCountMismatch {
                line: 1,
                expected: count,
                found: 0,
            })
        }
    };

    let mut atoms = Vec::with_capacity(count);
    let mut last_line = 2;
    for (lineno, line) in lines {
        last_line = lineno;
        if atoms.len() == count {
            if line.trim().is_empty() {
                continue;
            }
            return Err(ChemError::AtomCountMismatch {
                line: lineno,
                expected: count,
                found: count + 1,
            });
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            // A blank line inside the atom block ends it early.
            return Err(ChemError::AtomCountMismatch {
                line: lineno,
                expected: count,
                found: atoms.len(),
            });
        }
        if toks.len() != 4 {
            return Err(ChemError::BadAtomLine {
                line: lineno,
                reason: format!("expected 4 fields, found {}", toks.len()),
            });
        }
        let e = element(toks[0]).ok_or_else(|| ChemError::UnknownElement {
            line: lineno,
            symbol: toks[0].to_string(),
        })?;
        let mut position = [0.0; 3];
        for (k, tok) in toks[1..].iter().enumerate() {
            position[k] = parse_finite(tok).ok_or_else(|| ChemError::BadAtomLine {
                line: lineno,
                reason: format!("invalid coordinate {tok:?}"),
            })?;
        }
        atoms.push(Atom {
            element: e.symbol.to_string(),
            mass: e.mass,
            position,
        });
    }
    if atoms.len() != count {
        return Err(ChemError::AtomCountMismatch {
            line: last_line,
            expected: count,
            found: atoms.len(),
        });
    }
    Ok(Molecule { name, atoms })
}

/// Writes XYZ with 12 decimals per coordinate and no trailing newline.
pub fn serialize_xyz(m: &Molecule) -> String {
    let mut out = String::with_capacity(16 + m.atoms.len() * 56);
    let _ = write!(out, "{}\n{}", m.atoms.len(), m.name.lines().next().unwrap_or(""));
    for a in &m.atoms {
        let _ = write!(
            out,
            "\n{} {:.12} {:.12} {:.12}",
            a.element, a.position[0], a.position[1], a.position[2]
        );
    }
    out
}

struct Significant<'a> {
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
    last: usize,
}

impl<'a> Significant<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)> + 'a> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
                .filter(|(_, l)| !l.is_empty()),
        );
        Significant {
            inner: it.peekable(),
            last: 0,
        }
    }

    fn next_or(&mut self, expected: usize) -> Result<(usize, &'a str), ChemError> {
        match self.inner.next() {
            Some((n, l)) => {
                self.last = n;
                Ok((n, l))
            }
            None => Err(ChemError::Truncated {
                line: self.last,
                expected,
            }),
        }
    }
}

pub fn parse_modes(text: &str, owner: &Molecule) -> Result<ModeSet, ChemError> {
    let mut lines = Significant::new(text);
    let (hline, header) = lines.next_or(1).map_err(|_| ChemError::Empty)?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 3 || toks[0] != "MODES" {
        return Err(ChemError::BadModesHeader {
            line: hline,
            reason: "expected `MODES <nmodes> <natoms>`".into(),
        });
    }
    let parse_count = |t: &str| {
        t.parse::<usize>().map_err(|_| ChemError::BadModesHeader {
            line: hline,
            reason: format!("invalid count {t:?}"),
        })
    };
    let nmodes = parse_count(toks[1])?;
    let natoms = parse_count(toks[2])?;
    if natoms != owner.len() {
        return Err(ChemError::AtomCountMismatch {
            line: hline,
            expected: owner.len(),
            found: natoms,
        });
    }
    if nmodes > 3 * natoms {
        return Err(ChemError::TooManyModes { nmodes, natoms });
    }

    let mut modes = Vec::with_capacity(nmodes);
    for expected_index in 1..=nmodes {
        let remaining = (nmodes - expected_index + 1) * (natoms + 1);
        let (mline, mtext) = lines.next_or(remaining)?;
        let toks: Vec<&str> = mtext.split_whitespace().collect();
        if toks.len() != 5 || toks[0] != "MODE" {
            return Err(ChemError::BadModeHeader {
                line: mline,
                reason: "expected `MODE <index> <freq> <reduced_mass> <force_const>`".into(),
            });
        }
        let index: usize = toks[1].parse().map_err(|_| ChemError::BadModeHeader {
            line: mline,
            reason: format!("invalid index {:?}", toks[1]),
        })?;
        if index != expected_index {
            return Err(ChemError::BadModeHeader {
                line: mline,
                reason: format!("expected index {expected_index}, found {index}"),
            });
        }
        let mut vals = [0.0; 3];
        for (k, tok) in toks[2..].iter().enumerate() {
            vals[k] = parse_finite(tok).ok_or_else(|| ChemError::BadModeHeader {
                line: mline,
                reason: format!("invalid number {tok:?}"),
            })?;
        }
        let [frequency, reduced_mass, force_constant] = vals;
        if frequency <= 0.0 {
            return Err(ChemError::ImaginaryMode {
                line: mline,
                index,
                frequency,
            });
        }
        if reduced_mass <= 0.0 {
            return Err(ChemError::NonPositiveReducedMass {
                line: mline,
                index,
                value: reduced_mass,
            });
        }
        if force_constant <= 0.0 {
            return Err(ChemError::NonPositiveForceConstant {
                line: mline,
                index,
                value: force_constant,
            });
        }

        let mut displacements = Vec::with_capacity(natoms);
        for a in 0..natoms {
            let (dline, dtext) = lines.next_or(natoms - a)?;
            let toks: Vec<&str> = dtext.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(ChemError::BadDisplacement {
                    line: dline,
                    reason: format!("expected 3 fields, found {}", toks.len()),
                });
            }
            let mut d = [0.0; 3];
            for (k, tok) in toks.iter().enumerate() {
                d[k] = parse_finite(tok).ok_or_else(|| ChemError::BadDisplacement {
                    line: dline,
                    reason: format!("invalid number {tok:?}"),
                })?;
            }
            displacements.push(d);
        }
        let mut mode = VibrationalMode {
            frequency,
            reduced_mass,
            force_constant,
            displacements,
        };
        normalize(&mut mode).map_err(|_| ChemError::ZeroDisplacement { index })?;
        modes.push(mode);
    }
    if let Some((line, _)) = lines.inner.next() {
        return Err(ChemError::TrailingContent { line });
    }
    Ok(ModeSet {
        molecule_name: owner.name.clone(),
        modes,
    })
}

/// Rescales a mode to unit norm. Already-unit modes (within 1e-12) are left
/// untouched so that serialize/parse is bit-exact.
fn normalize(mode: &mut VibrationalMode) -> Result<(), ()> {
    let n = mode.norm();
    if !(n.is_finite() && n > 0.0) {
        return Err(());
    }
    if (n - 1.0).abs() > 1e-12 {
        for d in &mut mode.displacements {
            for c in d.iter_mut() {
                *c /= n;
            }
        }
    }
    Ok(())
}

/// Writes a `.modes` file using shortest round-trip float formatting.
pub fn serialize_modes(set: &ModeSet) -> String {
    let natoms = set.atom_count().unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "# modes for {}", set.molecule_name.lines().next().unwrap_or(""));
    let _ = writeln!(out, "MODES {} {}", set.modes.len(), natoms);
    for (i, m) in set.modes.iter().enumerate() {
        let _ = writeln!(
            out,
            "MODE {} {:?} {:?} {:?}",
            i + 1,
            m.frequency,
            m.reduced_mass,
            m.force_constant
        );
        for d in &m.displacements {
            let _ = writeln!(out, "{:?} {:?} {:?}", d[0], d[1], d[2]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_hydrogen() {
        let m = parse_xyz("1\nH\nH 0.0 0.0 0.0").unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.name, "H");
        assert_eq!(m.atoms[0].position, [0.0; 3]);
        assert!((m.atoms[0].mass - 1.008).abs() < 1e-9);
    }

    #[test]
    fn unknown_symbol_reports_line() {
        let err = parse_xyz("2\nX\nQq 0 0 0\nH 1 0 0").unwrap_err();
        assert_eq!(err.to_string(), "unknown element symbol 'Qq' at line 3");
    }

    #[test]
    fn count_errors() {
        assert!(matches!(parse_xyz("two\nX\n"), Err(ChemError::BadCount { line: 1, .. })));
        assert!(matches!(
            parse_xyz("56\nbig\n"),
            Err(ChemError::AtomCountOutOfRange { count: 56, .. })
        ));
        assert!(matches!(
            parse_xyz("3\nX\nH 0 0 0\nH 1 0 0"),
            Err(ChemError::AtomCountMismatch { expected: 3, found: 2, .. })
        ));
        assert!(matches!(
            parse_xyz("1\nX\nH 0 0 0\nH 1 0 0"),
            Err(ChemError::AtomCountMismatch { line: 4, .. })
        ));
        assert!(matches!(parse_xyz("1\nX\nH 0 nan 0"), Err(ChemError::BadAtomLine { line: 3, .. })));
        assert_eq!(parse_xyz(""), Err(ChemError::Empty));
    }

    #[test]
    fn serialize_single_atom() {
        let m = parse_xyz("1\nH\nH 0.0 0.0 0.0").unwrap();
        assert_eq!(serialize_xyz(&m), "1\nH\nH 0.000000000000 0.000000000000 0.000000000000");
    }

    #[test]
    fn twelve_significant_digits_survive() {
        let m = parse_xyz("1\nx\nC 1.23456789012 -0.5 2").unwrap();
        let text = serialize_xyz(&m);
        assert!(text.ends_with("C 1.234567890120 -0.500000000000 2.000000000000"));
        let back = parse_xyz(&text).unwrap();
        assert_eq!(back, m);
    }

    fn diatomic() -> Molecule {
        parse_xyz("2\nN2\nN 0 0 0.55\nN 0 0 -0.55").unwrap()
    }

    #[test]
    fn symmetric_stretch_loads_with_unit_norm() {
        let text = "MODES 1 2\nMODE 1 2358.6 7.0 22.9\n0 0 0.707\n0 0 -0.707\n";
        let set = parse_modes(text, &diatomic()).unwrap();
        assert_eq!(set.modes.len(), 1);
        assert!((set.modes[0].norm() - 1.0).abs() <= MODE_NORM_TOL);
        assert_eq!(set.molecule_name, "N2");
    }

    #[test]
    fn unnormalized_mode_is_rescaled() {
        let text = "# comment\n\nMODES 1 2\nMODE 1 100 1 1 # trailing\n0 0 1.4142135623730951\n0 0 -1.4142135623730951\n";
        let set = parse_modes(text, &diatomic()).unwrap();
        let recomputed: f64 = set.modes[0]
            .displacements
            .iter()
            .map(|d| d.iter().map(|c| c * c).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        assert!((recomputed - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn mode_errors() {
        let owner = diatomic();
        let e = parse_modes("MODES 1 3\nMODE 1 1 1 1\n0 0 1\n0 0 1\n0 0 1\n", &owner).unwrap_err();
        assert!(e.to_string().contains("atom count mismatch"), "{e}");
        assert!(matches!(
            parse_modes("MODES 1 2\nMODE 1 -50 1 1\n0 0 1\n0 0 -1\n", &owner),
            Err(ChemError::ImaginaryMode { .. })
        ));
        assert!(matches!(
            parse_modes("MODES 1 2\nMODE 1 50 1 0\n0 0 1\n0 0 -1\n", &owner),
            Err(ChemError::NonPositiveForceConstant { .. })
        ));
        assert!(matches!(
            parse_modes("MODES 2 2\nMODE 1 50 1 1\n0 0 1\n0 0 -1\nMODE 2 60 1 1\n0 0 1\n", &owner),
            Err(ChemError::Truncated { .. })
        ));
        assert!(matches!(
            parse_modes("MODES 1 2\nMODE 1 50 1 1\n0 0 0\n0 0 0\n", &owner),
            Err(ChemError::ZeroDisplacement { index: 1 })
        ));
        assert!(matches!(
            parse_modes("MODES 7 2\n", &owner),
            Err(ChemError::TooManyModes { .. })
        ));
    }

    #[test]
    fn modes_round_trip_exactly() {
        let owner = diatomic();
        let set = parse_modes("MODES 1 2\nMODE 1 2358.6 7.0 22.9\n0.1 0 0.707\n0 0.3 -0.707\n", &owner).unwrap();
        let again = parse_modes(&serialize_modes(&set), &owner).unwrap();
        assert_eq!(again, set);
    }

    #[test]
    fn mean_pairwise_distance_of_triangle() {
        let m = parse_xyz("3\nt\nH 0 0 0\nH 3 0 0\nH 0 4 0").unwrap();
        assert!((m.mean_pairwise_distance() - 4.0).abs() < 1e-12);
    }
}
