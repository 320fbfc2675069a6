//! C ABI for the simulator.
//!
//! Conventions:
//! - Fallible functions return an [`AnctStatus`] (0 = ok, negative = error).
//! - The message for the most recent error on the calling thread is available
//!   through [`anct_last_error_message`].
//! - [`AnctConfig`] and [`AnctSummary`] are opaque heap handles, released
//!   with their `_free` function. Passing NULL to a `_free` function is a no-op.
//!
//! # Safety
//!
//! Pointer arguments must be valid for the access implied by their type and
//! length. Handles must come from this library and must not be used after
//! being freed. Strings are NUL-terminated UTF-8.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use anct_core::crypto::{ctr_encrypt, CounterValue, LinkCipher};
use anct_core::model::CipherKind;
use anct_core::{run, validate_config, Metrics, ScenarioConfig};

#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnctStatus {
    Ok = 0,
    NullPointer = -1,
    InvalidUtf8 = -2,
    InvalidConfig = -3,
    BufferTooSmall = -4,
    InvalidArgument = -5,
    Panic = -6,
}

/// Scenario configuration handle.
pub struct AnctConfig {
    inner: ScenarioConfig,
}

/// Results of one finished run.
pub struct AnctSummary {
    metrics: Metrics,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: AnctStatus, msg: impl Into<String>) -> AnctStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> AnctStatus) -> AnctStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(AnctStatus::Panic, "panic inside anct-ffi"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, AnctStatus> {
    if p.is_null() {
        return Err(fail(AnctStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(AnctStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

/// Copies `s` plus a NUL into `buf`. `needed` (optional) receives the size
/// required including the NUL.
unsafe fn copy_out(s: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> AnctStatus {
    if !needed.is_null() {
        *needed = s.len() + 1;
    }
    // Deliberately leaves the last error alone, so a size query on
    // anct_last_error_message does not clobber the message being read.
    if buf.is_null() || len < s.len() + 1 {
        return AnctStatus::BufferTooSmall;
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf.cast::<u8>(), s.len());
    *buf.add(s.len()) = 0;
    AnctStatus::Ok
}

/// Writes the last error message of this thread into `buf`.
#[no_mangle]
pub unsafe extern "C" fn anct_last_error_message(
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> AnctStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    copy_out(&msg, buf, len, needed)
}

/// New configuration holding the reference scenario.
#[no_mangle]
pub extern "C" fn anct_config_new() -> *mut AnctConfig {
    Box::into_raw(Box::new(AnctConfig {
        inner: ScenarioConfig::default(),
    }))
}

/// Parses scenario text (`key = value` lines) into a new handle.
#[no_mangle]
pub unsafe extern "C" fn anct_config_parse(
    text: *const c_char,
    out: *mut *mut AnctConfig,
) -> AnctStatus {
    guard(|| {
        if out.is_null() {
            return fail(AnctStatus::NullPointer, "out is NULL");
        }
        let text = match str_arg(text, "text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match ScenarioConfig::parse(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(AnctConfig { inner }));
                AnctStatus::Ok
            }
            Err(e) => fail(AnctStatus::InvalidConfig, e.to_string()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn anct_config_set(
    cfg: *mut AnctConfig,
    key: *const c_char,
    value: *const c_char,
) -> AnctStatus {
    guard(|| {
        let Some(cfg) = cfg.as_mut() else {
            return fail(AnctStatus::NullPointer, "config is NULL");
        };
        let (key, value) = match (str_arg(key, "key"), str_arg(value, "value")) {
            (Ok(k), Ok(v)) => (k, v),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match cfg.inner.set(key, value) {
            Ok(()) => AnctStatus::Ok,
            Err(e) => fail(AnctStatus::InvalidConfig, e.to_string()),
        }
    })
}

/// Checks every scenario invariant without running.
#[no_mangle]
pub unsafe extern "C" fn anct_config_validate(cfg: *const AnctConfig) -> AnctStatus {
    guard(|| {
        let Some(cfg) = cfg.as_ref() else {
            return fail(AnctStatus::NullPointer, "config is NULL");
        };
        match validate_config(cfg.inner.clone()) {
            Ok(_) => AnctStatus::Ok,
            Err(e) => fail(AnctStatus::InvalidConfig, e.to_string()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn anct_config_free(cfg: *mut AnctConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Validates and runs the scenario to completion.
#[no_mangle]
pub unsafe extern "C" fn anct_run(cfg: *const AnctConfig, out: *mut *mut AnctSummary) -> AnctStatus {
    guard(|| {
        let Some(cfg) = cfg.as_ref() else {
            return fail(AnctStatus::NullPointer, "config is NULL");
        };
        if out.is_null() {
            return fail(AnctStatus::NullPointer, "out is NULL");
        }
        let valid = match validate_config(cfg.inner.clone()) {
            Ok(v) => v,
            Err(e) => return fail(AnctStatus::InvalidConfig, e.to_string()),
        };
        *out = Box::into_raw(Box::new(AnctSummary {
            metrics: run(&valid),
        }));
        AnctStatus::Ok
    })
}

/// Packet delivery ratio in [0, 1]; NaN for a NULL handle.
#[no_mangle]
pub unsafe extern "C" fn anct_summary_pdr(s: *const AnctSummary) -> f64 {
    s.as_ref().map_or(f64::NAN, |s| s.metrics.pdr())
}

/// Mean end-to-end delay in milliseconds; NaN when nothing was delivered.
#[no_mangle]
pub unsafe extern "C" fn anct_summary_mean_delay_ms(s: *const AnctSummary) -> f64 {
    s.as_ref()
        .and_then(|s| s.metrics.mean_delay_ms())
        .unwrap_or(f64::NAN)
}

#[no_mangle]
pub unsafe extern "C" fn anct_summary_data_sent(s: *const AnctSummary) -> u64 {
    s.as_ref().map_or(0, |s| s.metrics.data_sent)
}

#[no_mangle]
pub unsafe extern "C" fn anct_summary_delivered(s: *const AnctSummary) -> u64 {
    s.as_ref().map_or(0, |s| s.metrics.delivered)
}

#[no_mangle]
pub unsafe extern "C" fn anct_summary_control_bytes(s: *const AnctSummary) -> u64 {
    s.as_ref().map_or(0, |s| s.metrics.control_bytes)
}

#[no_mangle]
pub unsafe extern "C" fn anct_summary_drops_attacker(s: *const AnctSummary) -> u64 {
    s.as_ref().map_or(0, |s| s.metrics.drops.attacker)
}

/// Number of distinct nodes some neighbor marked malicious.
#[no_mangle]
pub unsafe extern "C" fn anct_summary_marked_nodes(s: *const AnctSummary) -> u64 {
    s.as_ref().map_or(0, |s| s.metrics.marked_nodes().len() as u64)
}

/// Writes the summary CSV row (without header) into `buf`.
#[no_mangle]
pub unsafe extern "C" fn anct_summary_csv_row(
    s: *const AnctSummary,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> AnctStatus {
    guard(|| {
        let Some(s) = s.as_ref() else {
            return fail(AnctStatus::NullPointer, "summary is NULL");
        };
        copy_out(&s.metrics.csv_row(), buf, len, needed)
    })
}

#[no_mangle]
pub unsafe extern "C" fn anct_summary_free(s: *mut AnctSummary) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Counter-mode transform of `len` bytes (encryption and decryption are the
/// same operation). `cipher` is 0 for AES-128 and 1 for the test cipher; the
/// counter is big-endian. `input` and `output` may alias.
#[no_mangle]
pub unsafe extern "C" fn anct_ctr_apply(
    cipher: u32,
    key: *const [u8; 16],
    counter: *const [u8; 16],
    input: *const u8,
    len: usize,
    output: *mut u8,
) -> AnctStatus {
    guard(|| {
        if key.is_null() || counter.is_null() || (len > 0 && (input.is_null() || output.is_null()))
        {
            return fail(AnctStatus::NullPointer, "NULL argument");
        }
        let kind = match cipher {
            0 => CipherKind::Aes128,
            1 => CipherKind::Test,
            other => return fail(AnctStatus::InvalidArgument, format!("unknown cipher {other}")),
        };
        let c = LinkCipher::new(kind, *key);
        let data = if len == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(input, len).to_vec()
        };
        let out = ctr_encrypt(&c, CounterValue(u128::from_be_bytes(*counter)), &data);
        if len > 0 {
            ptr::copy_nonoverlapping(out.as_ptr(), output, len);
        }
        AnctStatus::Ok
    })
}
