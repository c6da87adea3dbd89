//! CSV persistence. Geometry and mode files live in `<stem>.assets/` next to
//! the CSV, named by content hash, and are referenced by relative path.
//!
//! The first line is a comment `#provenance=<raw|augmented|synthetic>`; files
//! without it load as raw.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::{Dataset, DatasetError, MembraneRecord, Provenance};
use crate::chemio::{parse_modes, parse_xyz, serialize_modes, serialize_xyz, Molecule, ModeSet};
use crate::featurize::{Conditions, Substrate};
use crate::fsutil::atomic_write;

const HEADER: [&str; 11] = [
    "id",
    "aq_conc",
    "org_conc",
    "pressure",
    "substrate",
    "monomer_a_xyz",
    "monomer_a_modes",
    "monomer_b_xyz",
    "monomer_b_modes",
    "rejection",
    "flux",
];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn asset_dir_name(csv: &Path) -> String {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    format!("{stem}.assets")
}

fn digest(text: &str) -> String {
    let h = Sha256::digest(text.as_bytes());
    h.iter().take(10).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

struct AssetWriter {
    root: PathBuf,
    dir: String,
    written: HashMap<String, String>,
}

impl AssetWriter {
    fn put(&mut self, text: String, ext: &str) -> Result<String, DatasetError> {
        let rel = format!("{}/{}.{ext}", self.dir, digest(&text));
        if !self.written.contains_key(&rel) {
            let path = self.root.join(&rel);
            if fs::read_to_string(&path).map(|t| t != text).unwrap_or(true) {
                atomic_write(&path, text.as_bytes()).map_err(io_err(&path))?;
            }
            self.written.insert(rel.clone(), text);
        }
        Ok(rel)
    }
}

pub fn save_csv(ds: &Dataset, path: &Path) -> Result<(), DatasetError> {
    ds.validate()?;
    let root = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf();
    let mut assets = AssetWriter {
        root,
        dir: asset_dir_name(path),
        written: HashMap::new(),
    };
    let mut body = format!("#provenance={}\n", ds.provenance).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut body);
        let csv_err = |e: csv::Error| DatasetError::Schema {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        w.write_record(HEADER).map_err(csv_err)?;
        for r in &ds.records {
            let mut geom = |m: &Molecule, s: &Option<Arc<ModeSet>>| -> Result<(String, String), DatasetError> {
                let xyz = assets.put(serialize_xyz(m), "xyz")?;
                let modes = match s {
                    Some(s) => assets.put(serialize_modes(s), "modes")?,
                    None => String::new(),
                };
                Ok((xyz, modes))
            };
            let (ax, am) = geom(&r.monomer_a, &r.modes_a)?;
            let (bx, bm) = geom(&r.monomer_b, &r.modes_b)?;
            let c = &r.conditions;
            w.write_record([
                r.id.clone(),
                c.aqueous_conc.to_string(),
                c.organic_conc.to_string(),
                c.pressure.to_string(),
                format!("{:?}", c.substrate).to_ascii_uppercase(),
                ax,
                am,
                bx,
                bm,
                r.rejection.to_string(),
                r.flux.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(io_err(path))?;
    }
    atomic_write(path, &body).map_err(io_err(path))
}

#[derive(Default)]
struct AssetCache {
    molecules: HashMap<String, Molecule>,
    modes: HashMap<(String, String), Arc<ModeSet>>,
}

pub fn load_csv(path: &Path) -> Result<Dataset, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let root = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf();
    let schema = |message: String| DatasetError::Schema {
        path: path.to_path_buf(),
        message,
    };

    let mut provenance = Provenance::Raw;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some(v) = line.strip_prefix("#provenance=") {
            provenance = Provenance::parse(v).ok_or_else(|| schema(format!("unknown provenance {v:?}")))?;
        }
    }

    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| schema(e.to_string()))?.clone();
    if header.iter().map(str::trim).ne(HEADER.iter().copied()) {
        return Err(schema(format!("expected header `{}`", HEADER.join(","))));
    }

    let mut cache = AssetCache::default();
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let fail = |message: String| DatasetError::Row {
            path: path.to_path_buf(),
            row: row_no,
            message,
        };
        let row = row.map_err(|e| fail(e.to_string()))?;
        if row.len() != HEADER.len() {
            return Err(fail(format!("expected {} fields, found {}", HEADER.len(), row.len())));
        }
        let field = |k: usize| row[k].trim();
        let num = |k: usize| -> Result<f64, DatasetError> {
            field(k)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| fail(format!("{}: invalid number {:?}", HEADER[k], field(k))))
        };
        let conditions = Conditions {
            aqueous_conc: num(1)?,
            organic_conc: num(2)?,
            pressure: num(3)?,
            substrate: Substrate::parse(field(4)).map_err(|e| fail(e.to_string()))?,
        };
        let (monomer_a, modes_a) = load_pair(&root, field(5), field(6), &mut cache).map_err(&fail)?;
        let (monomer_b, modes_b) = load_pair(&root, field(7), field(8), &mut cache).map_err(&fail)?;
        let record = MembraneRecord {
            id: field(0).to_string(),
            conditions,
            monomer_a,
            monomer_b,
            modes_a,
            modes_b,
            rejection: num(9)?,
            flux: num(10)?,
        };
        record.validate().map_err(|e| fail(e.to_string()))?;
        records.push(record);
    }
    let ds = Dataset { records, provenance };
    ds.validate().map_err(|e| schema(e.to_string()))?;
    Ok(ds)
}

fn load_pair(
    root: &Path,
    xyz: &str,
    modes: &str,
    cache: &mut AssetCache,
) -> Result<(Molecule, Option<Arc<ModeSet>>), String> {
    if xyz.is_empty() {
        return Err("missing geometry file reference".into());
    }
    let read = |rel: &str| {
        let p = root.join(rel);
        fs::read_to_string(&p).map_err(|e| format!("cannot read geometry file '{}': {e}", p.display()))
    };
    if !cache.molecules.contains_key(xyz) {
        let m = parse_xyz(&read(xyz)?).map_err(|e| format!("'{xyz}': {e}"))?;
        cache.molecules.insert(xyz.to_string(), m);
    }
    let molecule = cache.molecules[xyz].clone();
    if modes.is_empty() {
        return Ok((molecule, None));
    }
    let key = (xyz.to_string(), modes.to_string());
    if !cache.modes.contains_key(&key) {
        let s = parse_modes(&read(modes)?, &molecule).map_err(|e| format!("'{modes}': {e}"))?;
        cache.modes.insert(key.clone(), Arc::new(s));
    }
    Ok((molecule, Some(cache.modes[&key].clone())))
}
