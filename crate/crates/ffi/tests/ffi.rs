use std::ffi::{c_char, CStr, CString};
use std::io::Write;
use std::ptr;

use backdoor_ffi::*;

fn last_error() -> String {
    let p = bd_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// Columns w, x, y, z0, z1 following W -> X, Z0 -> X, Z0 -> Y, X -> Y (0.5),
/// with z1 pure noise.
fn sample(n: usize) -> (Vec<f64>, Vec<CString>, Vec<BdRole>) {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut e = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut cols = vec![Vec::with_capacity(n); 5];
    for _ in 0..n {
        let w = e();
        let z0 = e();
        let z1 = e();
        let x = 0.9 * w + 0.8 * z0 + e();
        let y = 0.5 * x + 0.7 * z0 + e();
        for (c, v) in cols.iter_mut().zip([w, x, y, z0, z1]) {
            c.push(v);
        }
    }
    let ids = ["w", "x", "y", "z0", "z1"].iter().map(|s| CString::new(*s).unwrap()).collect();
    let roles = vec![BdRole::W, BdRole::X, BdRole::Y, BdRole::Z, BdRole::Z];
    (cols.concat(), ids, roles)
}

fn dataset(n: usize) -> *mut BdDataset {
    let (values, ids, roles) = sample(n);
    let id_ptrs: Vec<*const c_char> = ids.iter().map(|s| s.as_ptr()).collect();
    let mut ds = ptr::null_mut();
    let st = unsafe { bd_dataset_from_columns(values.as_ptr(), n, 5, id_ptrs.as_ptr(), roles.as_ptr(), &mut ds) };
    assert_eq!(st, BdStatus::Ok);
    assert!(!ds.is_null());
    ds
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(bd_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn discover_then_estimate() {
    let ds = dataset(20_000);
    unsafe {
        assert_eq!(bd_dataset_n_rows(ds), 20_000);
        assert_eq!(bd_dataset_n_cols(ds), 5);
        let mut r = ptr::null_mut();
        assert_eq!(bd_discover(ds, ptr::null(), &mut r), BdStatus::Ok);
        assert_eq!(bd_result_dim(r), 2);
        let mut beta = [0.0; 2];
        assert_eq!(bd_result_beta(r, beta.as_mut_ptr(), 2), BdStatus::Ok);
        assert!((beta[0].hypot(beta[1]) - 1.0).abs() < 1e-9);
        assert!(beta[0].abs() > beta[1].abs());

        let k = bd_result_n_selected(r);
        let mut sel = vec![0usize; k];
        assert_eq!(bd_result_selected(r, sel.as_mut_ptr(), k), BdStatus::Ok);
        assert!(sel.contains(&3), "z0 (column 3) must be selected: {sel:?}");
        let mut ate = 0.0;
        assert_eq!(bd_backdoor_ate(ds, sel.as_ptr(), k, &mut ate), BdStatus::Ok);
        assert!((ate - 0.5).abs() < 0.05, "ate {ate}");

        let mut marg = 0.0;
        assert_eq!(bd_marginal_ate(ds, &mut marg), BdStatus::Ok);
        assert!(marg - 0.5 > 0.1, "marginal {marg} should be biased upward");
        let mut allz = 0.0;
        assert_eq!(bd_allz_ate(ds, &mut allz), BdStatus::Ok);
        assert!((allz - 0.5).abs() < 0.05);

        let mut json = ptr::null_mut();
        assert_eq!(bd_result_to_json(r, &mut json), BdStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(v["beta"].as_array().unwrap().len(), 2);
        assert!(bd_result_objective(r).is_finite());
        bd_string_free(json);
        bd_result_free(r);
        bd_dataset_free(ds);
    }
}

#[test]
fn config_json_overrides() {
    let ds = dataset(2_000);
    let cfg = CString::new(r#"{"lambda1": 0.0, "max_iters": 3}"#).unwrap();
    let bad = CString::new(r#"{"lambda_one": 0.0}"#).unwrap();
    unsafe {
        let mut r = ptr::null_mut();
        assert_eq!(bd_discover(ds, cfg.as_ptr(), &mut r), BdStatus::Ok);
        bd_result_free(r);
        assert_eq!(bd_discover(ds, bad.as_ptr(), &mut r), BdStatus::InvalidConfig);
        assert!(r.is_null());
        assert!(last_error().contains("lambda_one"));
        bd_dataset_free(ds);
    }
}

#[test]
fn error_codes() {
    let ds = dataset(500);
    unsafe {
        let mut out = 0.0;
        assert_eq!(bd_marginal_ate(ptr::null(), &mut out), BdStatus::NullPointer);
        assert!(last_error().contains("data"));
        let w = [0usize];
        assert_eq!(bd_backdoor_ate(ds, w.as_ptr(), 1, &mut out), BdStatus::InvalidInput);

        let mut r = ptr::null_mut();
        assert_eq!(bd_discover(ds, ptr::null(), &mut r), BdStatus::Ok);
        let mut small = [0.0; 1];
        assert_eq!(bd_result_beta(r, small.as_mut_ptr(), 1), BdStatus::BufferTooSmall);
        bd_result_free(r);
        bd_dataset_free(ds);

        // duplicate ids
        let ids = [c"a".as_ptr(), c"a".as_ptr()];
        let roles = [BdRole::X, BdRole::Y];
        let vals = [1.0, 2.0, 3.0, 4.0];
        let mut d = ptr::null_mut();
        assert_eq!(bd_dataset_from_columns(vals.as_ptr(), 2, 2, ids.as_ptr(), roles.as_ptr(), &mut d), BdStatus::InvalidInput);
        assert!(d.is_null());
        assert!(last_error().contains("duplicate"));

        // null handles are tolerated by accessors and free
        bd_dataset_free(ptr::null_mut());
        bd_result_free(ptr::null_mut());
        assert_eq!(bd_result_dim(ptr::null()), 0);
        assert!(bd_result_objective(ptr::null()).is_nan());
    }
}

#[test]
fn csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "w,x,y,z").unwrap();
    for i in 0..50 {
        let t = i as f64;
        writeln!(f, "{},{},{},{}", t.sin(), t.cos() + 0.3 * t.sin(), (2.0 * t).sin() + t.cos(), (0.7 * t).cos()).unwrap();
    }
    drop(f);
    let p = CString::new(path.to_str().unwrap()).unwrap();
    let roles = CString::new(r#"{"w":"W","x":"X","y":"Y","z":"Z"}"#).unwrap();
    let wrong = CString::new(r#"{"w":"W","x":"X","y":"Y"}"#).unwrap();
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(bd_dataset_from_csv(p.as_ptr(), roles.as_ptr(), &mut ds), BdStatus::Ok);
        assert_eq!(bd_dataset_n_rows(ds), 50);
        let mut raw = 0.0;
        assert_eq!(bd_backdoor_ate(ds, [3usize].as_ptr(), 1, &mut raw), BdStatus::Ok);
        assert_eq!(bd_dataset_standardize(ds), BdStatus::Ok);
        let mut std = 0.0;
        assert_eq!(bd_backdoor_ate(ds, [3usize].as_ptr(), 1, &mut std), BdStatus::Ok);
        assert!((raw - std).abs() < 1e-9, "{raw} vs {std}");
        bd_dataset_free(ds);

        assert_eq!(bd_dataset_from_csv(p.as_ptr(), wrong.as_ptr(), &mut ds), BdStatus::InvalidInput);
        let missing = CString::new(dir.path().join("nope.csv").to_str().unwrap()).unwrap();
        assert_eq!(bd_dataset_from_csv(missing.as_ptr(), roles.as_ptr(), &mut ds), BdStatus::Io);
    }
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/backdoor.h");
    let text = std::fs::read_to_string(header).unwrap();
    for f in ["bd_dataset_from_columns", "bd_discover", "bd_backdoor_ate", "bd_last_error", "BD_STATUS_OK"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Ok(status) = std::process::Command::new("cc").args(["-fsyntax-only", "-x", "c", header]).status() else {
        eprintln!("no C compiler; skipped syntax check");
        return;
    };
    assert!(status.success());
}
