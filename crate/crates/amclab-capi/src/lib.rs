//! C ABI over the lab core. Every function returns a status code; results
//! come back through out-pointers, and the per-thread message behind a
//! nonzero code is available via `amclab_last_error`.
//!
//! Handles are opaque: create a lab with `amclab_lab_new` (the same
//! key=value text the CLI consumes), use it from any one thread at a time,
//! and release it with `amclab_lab_free`. Panics never unwind across the
//! boundary; they surface as `AMCLAB_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use amclab::channel::gen_sequence;
use amclab::config::RunConfig;
use amclab::datastore::CatalogEntry;
use amclab::phy::{coded_ber, label_frame, oracle_mcs, qam_ber_uncoded, McsTable};
use amclab::Error;

/// Call succeeded.
pub const AMCLAB_OK: i32 = 0;
/// A required pointer argument was null.
pub const AMCLAB_NULL_ARGUMENT: i32 = 1;
/// Configuration rejected (unknown key, invalid value, bad argument).
pub const AMCLAB_CONFIG_ERROR: i32 = 2;
/// Data malformed (wrong buffer length, out-of-range index, bad UTF-8).
pub const AMCLAB_DATA_ERROR: i32 = 3;
/// Numeric failure (non-finite input, singular channel).
pub const AMCLAB_NUMERIC_ERROR: i32 = 4;
/// A panic was caught at the boundary; state may be stale but is not corrupt.
pub const AMCLAB_PANIC: i32 = 5;

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.extend_from_slice(msg.as_bytes());
    });
}

fn code_of(err: &Error) -> i32 {
    match err {
        Error::Config(_) => AMCLAB_CONFIG_ERROR,
        Error::Data(_) | Error::Io(_) => AMCLAB_DATA_ERROR,
        Error::Numeric(_) => AMCLAB_NUMERIC_ERROR,
    }
}

fn fail(err: &Error) -> i32 {
    set_error(&err.to_string());
    code_of(err)
}

/// Runs a body under catch_unwind and reports panics as AMCLAB_PANIC.
fn guard<F: FnOnce() -> i32>(f: F) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(cause) => {
            let msg = cause
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| cause.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in library call".to_string());
            set_error(&msg);
            AMCLAB_PANIC
        }
    }
}

/// Simulation context: parsed configuration, its scenario catalog, and the
/// scheme table.
pub struct Lab {
    cfg: RunConfig,
    catalog: Vec<CatalogEntry>,
    table: McsTable,
}

/// Version of the library as a nul-terminated static string.
#[no_mangle]
pub extern "C" fn amclab_version() -> *const c_char {
    static VERSION: std::sync::OnceLock<CString> = std::sync::OnceLock::new();
    VERSION
        .get_or_init(|| CString::new(amclab::version_string()).expect("version text"))
        .as_ptr()
}

/// Copies the message behind the most recent nonzero status on this thread
/// into `buf` (nul-terminated, truncated to `cap` bytes) and returns the
/// full message length in bytes. With a null `buf` or zero `cap`, only the
/// length is returned.
#[no_mangle]
pub unsafe extern "C" fn amclab_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds a lab from the same key=value configuration text the command-line
/// tool reads. Pass an empty string for defaults. On success `*out` owns the
/// handle; free it with `amclab_lab_free`.
///
/// # Safety
/// `config` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn amclab_lab_new(config: *const c_char, out: *mut *mut Lab) -> i32 {
    guard(|| {
        if config.is_null() || out.is_null() {
            set_error("config and out must be non-null");
            return AMCLAB_NULL_ARGUMENT;
        }
        let text = match CStr::from_ptr(config).to_str() {
            Ok(t) => t,
            Err(e) => {
                set_error(&format!("config is not UTF-8: {e}"));
                return AMCLAB_DATA_ERROR;
            }
        };
        match RunConfig::parse(text) {
            Ok(cfg) => {
                let catalog = cfg.catalog();
                let lab = Box::new(Lab { cfg, catalog, table: McsTable::builtin() });
                *out = Box::into_raw(lab);
                AMCLAB_OK
            }
            Err(e) => fail(&e),
        }
    })
}

/// Releases a lab handle. Null is a no-op.
///
/// # Safety
/// `lab` must be a pointer returned by `amclab_lab_new`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn amclab_lab_free(lab: *mut Lab) {
    if !lab.is_null() {
        drop(Box::from_raw(lab));
    }
}

/// Reports the lab's array geometry and sample window length.
///
/// # Safety
/// All pointers must be valid; `lab` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn amclab_lab_geometry(
    lab: *const Lab,
    out_n_bs: *mut usize,
    out_n_ue: *mut usize,
    out_window: *mut usize,
) -> i32 {
    guard(|| {
        if lab.is_null() || out_n_bs.is_null() || out_n_ue.is_null() || out_window.is_null() {
            set_error("all arguments must be non-null");
            return AMCLAB_NULL_ARGUMENT;
        }
        let lab = &*lab;
        *out_n_bs = lab.cfg.channel.n_bs;
        *out_n_ue = lab.cfg.channel.n_ue;
        *out_window = lab.cfg.data.window;
        AMCLAB_OK
    })
}

/// Number of scenarios in the lab's catalog. Scenario arguments elsewhere
/// index this list.
///
/// # Safety
/// `lab` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn amclab_lab_scenario_count(lab: *const Lab, out: *mut usize) -> i32 {
    guard(|| {
        if lab.is_null() || out.is_null() {
            set_error("lab and out must be non-null");
            return AMCLAB_NULL_ARGUMENT;
        }
        *out = (*lab).catalog.len();
        AMCLAB_OK
    })
}

/// Largest feasible scheme index (10..=24) for a post-precoding SINR given
/// in dB, under the lab's link constants; 10 when nothing is feasible.
///
/// # Safety
/// `lab` must be a live handle and `out_mcs` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn amclab_lab_oracle_mcs(
    lab: *const Lab,
    sinr_db: f64,
    out_mcs: *mut u8,
) -> i32 {
    guard(|| {
        if lab.is_null() || out_mcs.is_null() {
            set_error("lab and out_mcs must be non-null");
            return AMCLAB_NULL_ARGUMENT;
        }
        if !sinr_db.is_finite() {
            set_error(&format!("sinr_db must be finite, got {sinr_db}"));
            return AMCLAB_NUMERIC_ERROR;
        }
        let lab = &*lab;
        *out_mcs = oracle_mcs(10f64.powf(sinr_db / 10.0), &lab.table, &lab.cfg.link);
        AMCLAB_OK
    })
}

/// Coded bit error rate of scheme `mcs` at an SINR given in dB, using the
/// lab's code-rate gain model.
///
/// # Safety
/// `lab` must be a live handle and `out_ber` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn amclab_lab_coded_ber(
    lab: *const Lab,
    sinr_db: f64,
    mcs: u8,
    out_ber: *mut f64,
) -> i32 {
    guard(|| {
        if lab.is_null() || out_ber.is_null() {
            set_error("lab and out_ber must be non-null");
            return AMCLAB_NULL_ARGUMENT;
        }
        let lab = &*lab;
        let Some(entry) = lab.table.entry(mcs) else {
            set_error(&format!("scheme index {mcs} outside the table"));
            return AMCLAB_DATA_ERROR;
        };
        if !sinr_db.is_finite() {
            set_error(&format!("sinr_db must be finite, got {sinr_db}"));
            return AMCLAB_NUMERIC_ERROR;
        }
        match coded_ber(10f64.powf(sinr_db / 10.0), entry, lab.cfg.link.coding_gain_coeff_db) {
            Ok(ber) => {
                *out_ber = ber;
                AMCLAB_OK
            }
            Err(e) => fail(&e),
        }
    })
}

/// Exact uncoded Gray-mapped square-QAM bit error rate at a linear SNR.
/// Orders 4, 16, 64, and 256 are supported.
///
/// # Safety
/// `out_ber` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn amclab_qam_ber(
    modulation_order: u32,
    snr_linear: f64,
    out_ber: *mut f64,
) -> i32 {
    guard(|| {
        if out_ber.is_null() {
            set_error("out_ber must be non-null");
            return AMCLAB_NULL_ARGUMENT;
        }
        match qam_ber_uncoded(snr_linear, modulation_order) {
            Ok(ber) => {
                *out_ber = ber;
                AMCLAB_OK
            }
            Err(e) => fail(&e),
        }
    })
}

/// First-order temporal correlation coefficient for a user moving at
/// `speed_mps` under carrier `carrier_hz` with frame period `frame_s`.
///
/// # Safety
/// `out_rho` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn amclab_doppler_rho(
    speed_mps: f64,
    carrier_hz: f64,
    frame_s: f64,
    out_rho: *mut f64,
) -> i32 {
    guard(|| {
        if out_rho.is_null() {
            set_error("out_rho must be non-null");
            return AMCLAB_NULL_ARGUMENT;
        }
        if !(speed_mps.is_finite() && carrier_hz.is_finite() && frame_s.is_finite()) {
            set_error("speed, carrier, and frame period must be finite");
            return AMCLAB_NUMERIC_ERROR;
        }
        *out_rho = amclab::channel::doppler_rho(speed_mps, carrier_hz, frame_s);
        AMCLAB_OK
    })
}

/// Generates `n_frames` channel frames of catalog scenario `scenario`
/// starting at frame `start`, into `out`: per frame a row-major
/// n_bs x n_ue matrix of interleaved (re, im) pairs, so `out_len` must be
/// exactly n_frames * n_bs * n_ue * 2. Deterministic in (config, scenario,
/// start).
///
/// # Safety
/// `lab` must be a live handle and `out` must point to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn amclab_lab_channel_frames(
    lab: *const Lab,
    scenario: usize,
    start: u32,
    n_frames: u32,
    out: *mut f64,
    out_len: usize,
) -> i32 {
    guard(|| {
        if lab.is_null() || out.is_null() {
            set_error("lab and out must be non-null");
            return AMCLAB_NULL_ARGUMENT;
        }
        let lab = &*lab;
        let Some(entry) = lab.catalog.get(scenario) else {
            set_error(&format!(
                "scenario {scenario} outside the catalog of {}",
                lab.catalog.len()
            ));
            return AMCLAB_DATA_ERROR;
        };
        let (n_bs, n_ue) = (entry.cfg.n_bs, entry.cfg.n_ue);
        let need = n_frames as usize * n_bs * n_ue * 2;
        if out_len != need {
            set_error(&format!("out_len {out_len} but geometry requires {need}"));
            return AMCLAB_DATA_ERROR;
        }
        if n_frames == 0 {
            set_error("n_frames must be positive");
            return AMCLAB_CONFIG_ERROR;
        }
        match gen_sequence(&entry.cfg, n_frames, start) {
            Ok((frames, _)) => {
                let dst = std::slice::from_raw_parts_mut(out, out_len);
                for (f, frame) in frames.iter().enumerate() {
                    let base = f * n_bs * n_ue * 2;
                    for i in 0..n_bs * n_ue {
                        dst[base + 2 * i] = frame.re[i];
                        dst[base + 2 * i + 1] = frame.im[i];
                    }
                }
                AMCLAB_OK
            }
            Err(e) => fail(&e),
        }
    })
}

/// Generates `n_frames` frames of catalog scenario `scenario` from `start`
/// and writes each user's post-precoding SINR in dB and oracle scheme index:
/// `out_sinr_db[f * n_ue + u]`, `out_mcs[f * n_ue + u]`, with `len` exactly
/// n_frames * n_ue. Fails with a numeric status if any frame in the range is
/// singular.
///
/// # Safety
/// `lab` must be a live handle; both buffers must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn amclab_lab_frame_labels(
    lab: *const Lab,
    scenario: usize,
    start: u32,
    n_frames: u32,
    out_sinr_db: *mut f64,
    out_mcs: *mut u8,
    len: usize,
) -> i32 {
    guard(|| {
        if lab.is_null() || out_sinr_db.is_null() || out_mcs.is_null() {
            set_error("lab and output buffers must be non-null");
            return AMCLAB_NULL_ARGUMENT;
        }
        let lab = &*lab;
        let Some(entry) = lab.catalog.get(scenario) else {
            set_error(&format!(
                "scenario {scenario} outside the catalog of {}",
                lab.catalog.len()
            ));
            return AMCLAB_DATA_ERROR;
        };
        let n_ue = entry.cfg.n_ue;
        let need = n_frames as usize * n_ue;
        if len != need {
            set_error(&format!("len {len} but geometry requires {need}"));
            return AMCLAB_DATA_ERROR;
        }
        if n_frames == 0 {
            set_error("n_frames must be positive");
            return AMCLAB_CONFIG_ERROR;
        }
        let frames = match gen_sequence(&entry.cfg, n_frames, start) {
            Ok((frames, _)) => frames,
            Err(e) => return fail(&e),
        };
        let sinr_dst = std::slice::from_raw_parts_mut(out_sinr_db, len);
        let mcs_dst = std::slice::from_raw_parts_mut(out_mcs, len);
        for (f, frame) in frames.iter().enumerate() {
            match label_frame(frame, &lab.table, &lab.cfg.link) {
                Ok((labels, sinrs)) => {
                    for u in 0..n_ue {
                        sinr_dst[f * n_ue + u] = 10.0 * sinrs.as_slice()[u].log10();
                        mcs_dst[f * n_ue + u] = labels[u];
                    }
                }
                Err(e) => return fail(&e),
            }
        }
        AMCLAB_OK
    })
}
