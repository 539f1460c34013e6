use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use uwqkd_ffi::*;

fn small_config() -> *mut UwqkdConfig {
    let cfg = uwqkd_config_default();
    for (k, v) in [("simulation.photons", "20000"), ("simulation.seed", "7")] {
        let (k, v) = (CString::new(k).unwrap(), CString::new(v).unwrap());
        assert_eq!(unsafe { uwqkd_config_set(cfg, k.as_ptr(), v.as_ptr()) }, UwqkdStatus::Ok);
    }
    cfg
}

fn last_error() -> String {
    let p = uwqkd_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn simulate_select_optimize() {
    unsafe {
        let cfg = small_config();
        let mut set = ptr::null_mut();
        assert_eq!(uwqkd_simulate(cfg, &mut set), UwqkdStatus::Ok);
        assert_eq!(uwqkd_arrivals_photons(set), 20000);
        let n = uwqkd_arrivals_len(set);
        assert!(n > 0);

        let mut rec = UwqkdRecord::default();
        assert_eq!(uwqkd_arrivals_record(set, 0, &mut rec), UwqkdStatus::Ok);
        assert!(rec.weight > 0.0 && rec.delay >= 0.0);
        assert_eq!(uwqkd_arrivals_record(set, n, &mut rec), UwqkdStatus::OutOfRange);

        let mut sel = UwqkdSelection::default();
        assert_eq!(uwqkd_select(set, 0.999, &mut sel), UwqkdStatus::Ok);
        assert!(sel.bit_period_rounded >= sel.bit_period_raw);
        assert!(sel.fov_rounded >= sel.fov_raw);

        let mut sweep = ptr::null_mut();
        assert_eq!(
            uwqkd_optimize(set, sel.bit_period_rounded, sel.fov_rounded, ptr::null(), 0, &mut sweep),
            UwqkdStatus::Ok
        );
        let len = uwqkd_sweep_len(sweep);
        assert!(len > 0);
        let mut best = UwqkdSweepPoint::default();
        assert_eq!(uwqkd_sweep_optimum(sweep, &mut best), UwqkdStatus::Ok);
        for i in 0..len {
            let mut p = UwqkdSweepPoint::default();
            assert_eq!(uwqkd_sweep_point(sweep, i, &mut p), UwqkdStatus::Ok);
            assert!(p.qber.is_nan() || p.qber >= best.qber);
        }

        let mut g = 0.0;
        assert_eq!(uwqkd_gamma(set, sel.fov_rounded, best.gate, &mut g), UwqkdStatus::Ok);
        assert!((g - best.gamma).abs() <= 1e-12 * best.gamma);

        uwqkd_sweep_free(sweep);
        uwqkd_arrivals_free(set);
        uwqkd_config_free(cfg);
    }
}

#[test]
fn custom_grid_beyond_bit_period_is_a_config_error() {
    unsafe {
        let cfg = small_config();
        let mut set = ptr::null_mut();
        assert_eq!(uwqkd_simulate(cfg, &mut set), UwqkdStatus::Ok);
        let grid = [1e-12, 2e-9];
        let mut sweep = ptr::null_mut();
        let st = uwqkd_optimize(set, 1e-9, 0.5, grid.as_ptr(), grid.len(), &mut sweep);
        assert_eq!(st, UwqkdStatus::Config);
        assert!(sweep.is_null());
        assert!(last_error().contains("bit period"));
        uwqkd_arrivals_free(set);
        uwqkd_config_free(cfg);
    }
}

#[test]
fn save_and_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("a.uqkd").to_str().unwrap()).unwrap();
    unsafe {
        let cfg = small_config();
        let mut a = ptr::null_mut();
        assert_eq!(uwqkd_simulate(cfg, &mut a), UwqkdStatus::Ok);
        assert_eq!(uwqkd_arrivals_save(a, path.as_ptr()), UwqkdStatus::Ok);
        let mut b = ptr::null_mut();
        assert_eq!(uwqkd_arrivals_load(path.as_ptr(), &mut b), UwqkdStatus::Ok);
        assert_eq!(uwqkd_arrivals_len(a), uwqkd_arrivals_len(b));
        for i in 0..uwqkd_arrivals_len(a) {
            let (mut ra, mut rb) = (UwqkdRecord::default(), UwqkdRecord::default());
            uwqkd_arrivals_record(a, i, &mut ra);
            uwqkd_arrivals_record(b, i, &mut rb);
            assert_eq!(ra, rb);
        }
        uwqkd_arrivals_free(a);
        uwqkd_arrivals_free(b);
        uwqkd_config_free(cfg);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let missing = CString::new("/nonexistent/dir/x.uqkd").unwrap();
        let mut set = ptr::null_mut();
        assert_eq!(uwqkd_arrivals_load(missing.as_ptr(), &mut set), UwqkdStatus::Io);
        assert!(set.is_null());

        let bad = CString::new("medium.scattering_per_m = 0.5\n").unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(uwqkd_config_parse(bad.as_ptr(), &mut cfg), UwqkdStatus::Config);
        assert!(last_error().contains("medium.scattering_per_m"));

        assert_eq!(uwqkd_config_parse(ptr::null(), &mut cfg), UwqkdStatus::NullPointer);
        let good = CString::new("receiver.distance_m = 20\n").unwrap();
        assert_eq!(uwqkd_config_parse(good.as_ptr(), ptr::null_mut()), UwqkdStatus::NullPointer);

        let mut sel = UwqkdSelection::default();
        assert_eq!(uwqkd_select(ptr::null(), 0.5, &mut sel), UwqkdStatus::NullPointer);
        assert_eq!(uwqkd_arrivals_len(ptr::null()), 0);

        let mut q = 0.0;
        assert_eq!(uwqkd_qber(0.0, 1.0, 1e-6, &mut q), UwqkdStatus::Ok);
        assert_eq!(q, 0.5);
        assert_eq!(uwqkd_qber(0.0, 1.0, 0.0, &mut q), UwqkdStatus::Numeric);
        uwqkd_config_free(ptr::null_mut());
        uwqkd_arrivals_free(ptr::null_mut());
        uwqkd_sweep_free(ptr::null_mut());
    }
}

#[test]
fn config_set_rejects_bad_values_without_mutating() {
    unsafe {
        let cfg = uwqkd_config_default();
        let before = uwqkd_config_to_text(cfg);
        let k = CString::new("receiver.distance_m").unwrap();
        let v = CString::new("-3").unwrap();
        assert_eq!(uwqkd_config_set(cfg, k.as_ptr(), v.as_ptr()), UwqkdStatus::Config);
        let u = CString::new("no.such_key").unwrap();
        assert_eq!(uwqkd_config_set(cfg, u.as_ptr(), v.as_ptr()), UwqkdStatus::Config);
        let after = uwqkd_config_to_text(cfg);
        assert_eq!(CStr::from_ptr(before), CStr::from_ptr(after));
        let text = CStr::from_ptr(after).to_str().unwrap().to_owned();
        assert!(text.contains("receiver.distance_m = 10"));
        uwqkd_string_free(before);
        uwqkd_string_free(after);
        uwqkd_config_free(cfg);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(uwqkd_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn generated_header_declares_the_api() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/uwqkd.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in [
        "typedef struct UwqkdConfig UwqkdConfig;",
        "typedef struct UwqkdArrivals UwqkdArrivals;",
        "typedef struct UwqkdSweep UwqkdSweep;",
        "UWQKD_STATUS_CONFIG = 2",
        "UwqkdStatus uwqkd_simulate(",
        "UwqkdStatus uwqkd_optimize(",
        "void uwqkd_sweep_free(",
        "const char *uwqkd_last_error(void);",
    ] {
        assert!(text.contains(sym), "header lacks `{sym}`");
    }
}

/// The header must be valid C on its own. Skipped when no C compiler is
/// installed.
#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/uwqkd.h");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("check.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{}\"\nint main(void) {{ UwqkdArrivals *a = 0; (void)uwqkd_arrivals_len(a); return UWQKD_STATUS_OK; }}\n",
            header.display()
        ),
    )
    .unwrap();
    let Ok(status) = Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"]).arg(&src).status() else {
        eprintln!("cc not available; skipping");
        return;
    };
    assert!(status.success());
}
