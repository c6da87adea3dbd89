use std::ffi::{c_char, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use vibaug_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0u8; 256];
    let n = unsafe { vb_last_error_message(buf.as_mut_ptr() as *mut c_char, buf.len()) };
    String::from_utf8_lossy(&buf[..n.min(255)]).into_owned()
}

fn molecule(xyz: &str) -> *mut VbMolecule {
    let t = CString::new(xyz).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { vb_molecule_parse_xyz(t.as_ptr(), &mut m) }, VbStatus::Ok);
    m
}

const N2: &str = "2\nN2\nN 0 0 0.5488\nN 0 0 -0.5488";
const N2_MODES: &str = "MODES 1 2\nMODE 1 2358.57 7.0034 22.95\n0 0 0.7071\n0 0 -0.7071\n";

#[test]
fn parse_and_read_back() {
    let m = molecule(N2);
    let mut n = 0;
    assert_eq!(unsafe { vb_molecule_atom_count(m, &mut n) }, VbStatus::Ok);
    assert_eq!(n, 2);
    let mut xyz = [0.0; 6];
    assert_eq!(unsafe { vb_molecule_coordinates(m, xyz.as_mut_ptr(), 6) }, VbStatus::Ok);
    assert_eq!(xyz[2], 0.5488);
    assert_eq!(unsafe { vb_molecule_coordinates(m, xyz.as_mut_ptr(), 5) }, VbStatus::BufferTooSmall);
    unsafe { vb_molecule_free(m) };
}

#[test]
fn errors_are_reported() {
    let t = CString::new("2\nX\nQq 0 0 0\nH 1 0 0").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { vb_molecule_parse_xyz(t.as_ptr(), &mut m) }, VbStatus::ParseError);
    assert!(m.is_null());
    assert_eq!(last_error(), "unknown element symbol 'Qq' at line 3");
    assert_eq!(unsafe { vb_molecule_parse_xyz(ptr::null(), &mut m) }, VbStatus::NullPointer);
    let mut a = 0.0;
    assert_eq!(unsafe { vb_max_amplitude(-1.0, 300.0, &mut a) }, VbStatus::InvalidArgument);
}

#[test]
fn perturb_is_seeded() {
    let m = molecule(N2);
    let t = CString::new(N2_MODES).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { vb_modeset_parse(t.as_ptr(), m, &mut s) }, VbStatus::Ok);
    let draw = || {
        let mut p = ptr::null_mut();
        assert_eq!(unsafe { vb_perturb(m, s, 298.15, 1.0 / 3.0, 1, 7, 3, &mut p) }, VbStatus::Ok);
        let mut xyz = [0.0; 6];
        unsafe { vb_molecule_coordinates(p, xyz.as_mut_ptr(), 6) };
        unsafe { vb_molecule_free(p) };
        xyz
    };
    let a = draw();
    assert_eq!(a, draw());
    assert_ne!(a[2], 0.5488);
    assert_eq!(a[0], 0.0);
    unsafe {
        vb_modeset_free(s);
        vb_molecule_free(m);
    }
}

#[test]
fn encode_and_evaluate() {
    let a = molecule("1\nh\nH 1 2 3");
    let b = molecule("1\nc\nC -1 0 0.5");
    let mut v = vec![0.0; 444];
    assert_eq!(unsafe { vb_encode(2.0, 0.1, 6.0, 2, a, b, v.as_mut_ptr(), v.len()) }, VbStatus::Ok);
    assert_eq!(&v[..8], &[2.0, 0.1, 6.0, 2.0, 1.008, 1.0, 2.0, 3.0]);
    assert_eq!(unsafe { vb_encode(2.0, 0.1, 6.0, 9, a, b, v.as_mut_ptr(), v.len()) }, VbStatus::InvalidArgument);

    let y = [1.0, 2.0, 3.0];
    let p = [1.5, 2.0, 2.5];
    let mut m = VbMetrics::default();
    assert_eq!(unsafe { vb_evaluate(y.as_ptr(), p.as_ptr(), 3, &mut m) }, VbStatus::Ok);
    assert_eq!(m.defined, VB_METRIC_PCC | VB_METRIC_R2 | VB_METRIC_MRE);
    assert!((m.r2 - 0.75).abs() < 1e-12);
    let flat = [2.0, 2.0];
    unsafe { vb_evaluate(flat.as_ptr(), flat.as_ptr(), 2, &mut m) };
    assert_eq!(m.defined & VB_METRIC_R2, 0);
    unsafe {
        vb_molecule_free(a);
        vb_molecule_free(b);
    }
}

#[test]
fn saved_model_predicts_through_the_abi() {
    use vibaug::dataset::{synth_generate, Target};
    use vibaug::experiment::{fit_pipeline, ModelConfigs, ModelKind};
    use vibaug::featurize::AtomScalar;

    let ds = synth_generate(20, 3).unwrap();
    let x = ds.features(AtomScalar::AtomicMass).unwrap();
    let mut cfg = ModelConfigs::default();
    cfg.gbr.n_stages = 10;
    let p = fit_pipeline(ModelKind::Gbr, Target::Flux, AtomScalar::AtomicMass, x.view(), &ds.labels(Target::Flux), &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gbr.json");
    vibaug::persist::save_pipeline(&p, &path).unwrap();

    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { vb_model_load(c.as_ptr(), &mut h) }, VbStatus::Ok);
    let mut out = vec![0.0; 20];
    let flat: Vec<f64> = x.iter().copied().collect();
    assert_eq!(unsafe { vb_model_predict(h, flat.as_ptr(), 20, 444, out.as_mut_ptr()) }, VbStatus::Ok);
    assert_eq!(out, p.predict(x.view()).unwrap());
    unsafe { vb_model_free(h) };

    let missing = CString::new(dir.path().join("none.json").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { vb_model_load(missing.as_ptr(), &mut h) }, VbStatus::IoError);
}

#[test]
fn header_compiles_and_links_from_c() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = manifest.join("include/vibaug.h");
    assert!(header.is_file(), "build script did not write {}", header.display());
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libvibaug_ffi.so");
    if !lib.is_file() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping C link check: no shared library or C compiler");
        return;
    }
    let exe = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("vibaug_smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg("-L")
        .arg(&profile_dir)
        .arg(format!("-Wl,-rpath,{}", profile_dir.display()))
        .arg("-lvibaug_ffi")
        .arg("-lm")
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "smoke exited with {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).contains("unknown element symbol 'Qq'"));
}
