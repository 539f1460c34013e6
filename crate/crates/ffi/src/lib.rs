//! C ABI over `uwqkd-core`.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `*_new`/`*_load`/`uwqkd_simulate` style constructor and released with
//! the matching `*_free`. Fallible calls return a [`UwqkdStatus`] and write
//! results through out-pointers; the message for the most recent failure
//! on the calling thread is available from [`uwqkd_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use uwqkd::analysis::{gamma, select_bit_period, select_fov, ChannelSelection};
use uwqkd::config::LinkConfig;
use uwqkd::gate::{default_gate_grid, sweep_gate, GateSweepResult, LinkBudget, SweepPoint};
use uwqkd::qber::NoiseBudget;
use uwqkd::store::{load, persist, run_campaign, ArrivalSet};
use uwqkd::Error;

/// Status codes. Values 2, 3 and 4 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UwqkdStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Io = 3,
    Numeric = 4,
    InvalidUtf8 = 5,
    OutOfRange = 6,
    Panic = 7,
}

/// Opaque link configuration.
pub struct UwqkdConfig(LinkConfig);

/// Opaque arrival set produced by a campaign or loaded from disk.
pub struct UwqkdArrivals(ArrivalSet);

/// Opaque gate sweep result.
pub struct UwqkdSweep(GateSweepResult);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UwqkdRecord {
    pub hit_x: f64,
    pub hit_y: f64,
    pub delay: f64,
    pub aoa: f64,
    pub weight: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UwqkdSelection {
    /// Seconds.
    pub bit_period_raw: f64,
    pub bit_period_rounded: f64,
    /// Radians.
    pub fov_raw: f64,
    pub fov_rounded: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UwqkdSweepPoint {
    pub gate: f64,
    pub gamma: f64,
    pub background: f64,
    pub noise: f64,
    pub qber: f64,
}

impl From<&SweepPoint> for UwqkdSweepPoint {
    fn from(p: &SweepPoint) -> Self {
        Self {
            gate: p.gate,
            gamma: p.gamma,
            background: p.background,
            noise: p.noise,
            qber: p.qber,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(err: &Error) -> UwqkdStatus {
    match err.exit_code() {
        2 => UwqkdStatus::Config,
        3 => UwqkdStatus::Io,
        _ => UwqkdStatus::Numeric,
    }
}

/// Run `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), UwqkdStatus>) -> UwqkdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            UwqkdStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            UwqkdStatus::Panic
        }
    }
}

fn core<T>(r: uwqkd::Result<T>) -> Result<T, UwqkdStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, UwqkdStatus> {
    if p.is_null() {
        set_error("null string argument");
        return Err(UwqkdStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string argument is not UTF-8");
        UwqkdStatus::InvalidUtf8
    })
}

unsafe fn obj<'a, T>(p: *const T) -> Result<&'a T, UwqkdStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null handle");
        UwqkdStatus::NullPointer
    })
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, UwqkdStatus> {
    p.as_mut().ok_or_else(|| {
        set_error("null output pointer");
        UwqkdStatus::NullPointer
    })
}

/// Message describing the last failure on this thread, or NULL. The
/// pointer stays valid until the next call into this library on the same
/// thread.
#[no_mangle]
pub extern "C" fn uwqkd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn uwqkd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default link configuration. Never NULL.
#[no_mangle]
pub extern "C" fn uwqkd_config_default() -> *mut UwqkdConfig {
    Box::into_raw(Box::new(UwqkdConfig(LinkConfig::default())))
}

/// Parse `key = value` configuration text.
///
/// # Safety
/// `text` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uwqkd_config_parse(text: *const c_char, out_cfg: *mut *mut UwqkdConfig) -> UwqkdStatus {
    guard(|| {
        let slot = out(out_cfg)?;
        let cfg = core(LinkConfig::parse(str_arg(text)?))?;
        *slot = Box::into_raw(Box::new(UwqkdConfig(cfg)));
        Ok(())
    })
}

/// Read a configuration file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uwqkd_config_load(path: *const c_char, out_cfg: *mut *mut UwqkdConfig) -> UwqkdStatus {
    guard(|| {
        let slot = out(out_cfg)?;
        let cfg = core(LinkConfig::from_file(Path::new(str_arg(path)?)))?;
        *slot = Box::into_raw(Box::new(UwqkdConfig(cfg)));
        Ok(())
    })
}

/// Set one key using the configuration text syntax. On failure the
/// configuration is left unchanged.
///
/// # Safety
/// `cfg` must come from this library; `key` and `value` must be valid
/// NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn uwqkd_config_set(cfg: *mut UwqkdConfig, key: *const c_char, value: *const c_char) -> UwqkdStatus {
    guard(|| {
        let cfg = out(cfg)?;
        let key = str_arg(key)?.trim();
        let value = str_arg(value)?;
        let mut text: String = cfg
            .0
            .to_canonical_text()
            .lines()
            .filter(|l| l.split('=').next().map(str::trim) != Some(key))
            .map(|l| format!("{l}\n"))
            .collect();
        text.push_str(&format!("{key} = {value}\n"));
        cfg.0 = core(LinkConfig::parse(&text))?;
        Ok(())
    })
}

/// Canonical configuration text. Free with [`uwqkd_string_free`].
///
/// # Safety
/// `cfg` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn uwqkd_config_to_text(cfg: *const UwqkdConfig) -> *mut c_char {
    match cfg.as_ref() {
        Some(c) => CString::new(c.0.to_canonical_text()).map_or(ptr::null_mut(), CString::into_raw),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn uwqkd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `cfg` must be NULL or a configuration from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uwqkd_config_free(cfg: *mut UwqkdConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Run the photon campaign described by `cfg`.
///
/// # Safety
/// `cfg` must come from this library and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uwqkd_simulate(cfg: *const UwqkdConfig, out_set: *mut *mut UwqkdArrivals) -> UwqkdStatus {
    guard(|| {
        let cfg = obj(cfg)?;
        let slot = out(out_set)?;
        let set = core(run_campaign(&cfg.0))?;
        *slot = Box::into_raw(Box::new(UwqkdArrivals(set)));
        Ok(())
    })
}

/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uwqkd_arrivals_load(path: *const c_char, out_set: *mut *mut UwqkdArrivals) -> UwqkdStatus {
    guard(|| {
        let slot = out(out_set)?;
        let set = core(load(Path::new(str_arg(path)?)))?;
        *slot = Box::into_raw(Box::new(UwqkdArrivals(set)));
        Ok(())
    })
}

/// # Safety
/// `set` must come from this library; `path` must be a valid string.
#[no_mangle]
pub unsafe extern "C" fn uwqkd_arrivals_save(set: *const UwqkdArrivals, path: *const c_char) -> UwqkdStatus {
    guard(|| {
        let set = obj(set)?;
        core(persist(&set.0, Path::new(str_arg(path)?)))
    })
}

/// Number of arrival records; 0 for a NULL handle.
///
/// # Safety
/// `set` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn uwqkd_arrivals_len(set: *const UwqkdArrivals) -> usize {
    set.as_ref().map_or(0, |s| s.0.len())
}

/// Photons launched in the campaign; 0 for a NULL handle.
///
/// # Safety
/// `set` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn uwqkd_arrivals_photons(set: *const UwqkdArrivals) -> u64 {
    set.as_ref().map_or(0, |s| s.0.n_photons)
}

/// # Safety
/// `set` must come from this library and `rec` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uwqkd_arrivals_record(set: *const UwqkdArrivals, index: usize, rec: *mut UwqkdRecord) -> UwqkdStatus {
    guard(|| {
        let set = obj(set)?;
        let slot = out(rec)?;
        let r = set.0.records.get(index).ok_or_else(|| {
            set_error(format!("record {index} out of range"));
            UwqkdStatus::OutOfRange
        })?;
        *slot = UwqkdRecord {
            hit_x: r.hit_x,
            hit_y: r.hit_y,
            delay: r.delay,
            aoa: r.aoa,
            weight: r.weight,
        };
        Ok(())
    })
}

/// # Safety
/// `set` must be NULL or an arrival set from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uwqkd_arrivals_free(set: *mut UwqkdArrivals) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Bit period and FoV at quantile `level`, using the weighting stored in
/// the set's configuration.
///
/// # Safety
/// `set` must come from this library and `sel` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uwqkd_select(set: *const UwqkdArrivals, level: f64, sel: *mut UwqkdSelection) -> UwqkdStatus {
    guard(|| {
        let set = &obj(set)?.0;
        let slot = out(sel)?;
        let w = set.config.analysis.weighting;
        let bp = core(select_bit_period(set, level, w))?;
        let fov = core(select_fov(set, level, w))?;
        *slot = UwqkdSelection {
            bit_period_raw: bp.raw,
            bit_period_rounded: bp.rounded,
            fov_raw: fov.raw,
            fov_rounded: fov.rounded,
        };
        Ok(())
    })
}

/// Received fraction for FoV half-angle `fov` (rad) and gate `gate` (s).
///
/// # Safety
/// `set` must come from this library and `value` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uwqkd_gamma(set: *const UwqkdArrivals, fov: f64, gate: f64, value: *mut f64) -> UwqkdStatus {
    guard(|| {
        let set = &obj(set)?.0;
        *out(value)? = gamma(set, fov, gate, set.config.analysis.gamma_weighting);
        Ok(())
    })
}

/// QBER for received fraction `gamma`, mean photons per pulse `n_s` and
/// per-detector noise `n_noise`.
///
/// # Safety
/// `value` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uwqkd_qber(gamma: f64, n_s: f64, n_noise: f64, value: *mut f64) -> UwqkdStatus {
    guard(|| {
        let slot = out(value)?;
        let noise = NoiseBudget {
            background: 0.0,
            dark: n_noise,
            per_detector: n_noise,
        };
        *slot = core(uwqkd::qber::qber(gamma, n_s, &noise))?;
        Ok(())
    })
}

/// Sweep the gate over `grid` (seconds, `grid_len` entries) for the given
/// bit period (s) and FoV (rad). A NULL grid or zero length selects the
/// default grid.
///
/// # Safety
/// `set` must come from this library; `grid` must point to `grid_len`
/// doubles when non-NULL; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uwqkd_optimize(
    set: *const UwqkdArrivals,
    bit_period: f64,
    fov: f64,
    grid: *const f64,
    grid_len: usize,
    out_sweep: *mut *mut UwqkdSweep,
) -> UwqkdStatus {
    guard(|| {
        let set = &obj(set)?.0;
        let slot = out(out_sweep)?;
        let cfg = &set.config;
        let sel = core(ChannelSelection::new(
            bit_period,
            fov,
            cfg.analysis.quantile_level,
            cfg.receiver.distance_m,
        ))?;
        let grid: Vec<f64> = if grid.is_null() || grid_len == 0 {
            default_gate_grid(bit_period)
        } else {
            std::slice::from_raw_parts(grid, grid_len).to_vec()
        };
        let budget = LinkBudget::from_config(cfg);
        let sweep = core(sweep_gate(set, &sel, &budget, &grid, cfg.analysis.gamma_weighting))?;
        *slot = Box::into_raw(Box::new(UwqkdSweep(sweep)));
        Ok(())
    })
}

/// Number of grid points in a sweep; 0 for a NULL handle.
///
/// # Safety
/// `sweep` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn uwqkd_sweep_len(sweep: *const UwqkdSweep) -> usize {
    sweep.as_ref().map_or(0, |s| s.0.points.len())
}

/// # Safety
/// `sweep` must come from this library and `point` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uwqkd_sweep_point(sweep: *const UwqkdSweep, index: usize, point: *mut UwqkdSweepPoint) -> UwqkdStatus {
    guard(|| {
        let s = obj(sweep)?;
        let slot = out(point)?;
        let p = s.0.points.get(index).ok_or_else(|| {
            set_error(format!("sweep point {index} out of range"));
            UwqkdStatus::OutOfRange
        })?;
        *slot = p.into();
        Ok(())
    })
}

/// # Safety
/// `sweep` must come from this library and `point` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uwqkd_sweep_optimum(sweep: *const UwqkdSweep, point: *mut UwqkdSweepPoint) -> UwqkdStatus {
    guard(|| {
        let s = obj(sweep)?;
        *out(point)? = s.0.optimum().into();
        Ok(())
    })
}

/// # Safety
/// `sweep` must be NULL or a sweep from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uwqkd_sweep_free(sweep: *mut UwqkdSweep) {
    if !sweep.is_null() {
        drop(Box::from_raw(sweep));
    }
}
