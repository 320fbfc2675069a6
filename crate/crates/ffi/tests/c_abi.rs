use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use anct_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let mut needed = 0usize;
    unsafe {
        assert_eq!(
            anct_last_error_message(ptr::null_mut(), 0, &mut needed),
            AnctStatus::BufferTooSmall
        );
        let mut buf = vec![0 as c_char; needed];
        assert_eq!(
            anct_last_error_message(buf.as_mut_ptr(), buf.len(), ptr::null_mut()),
            AnctStatus::Ok
        );
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn hex(s: &str) -> Vec<u8> {
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap())
        .collect()
}

fn small_config() -> *mut AnctConfig {
    let text = cstr("node_count = 20\nflow_count = 2\nsim_duration = 5\nrng_seed = 3\n");
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(anct_config_parse(text.as_ptr(), &mut cfg), AnctStatus::Ok);
    }
    assert!(!cfg.is_null());
    cfg
}

#[test]
fn parse_set_run() {
    unsafe {
        let cfg = small_config();
        assert_eq!(
            anct_config_set(cfg, cstr("protocol").as_ptr(), cstr("baseline_aodv").as_ptr()),
            AnctStatus::Ok
        );
        assert_eq!(anct_config_validate(cfg), AnctStatus::Ok);
        let mut s = ptr::null_mut();
        assert_eq!(anct_run(cfg, &mut s), AnctStatus::Ok);
        let sent = anct_summary_data_sent(s);
        let delivered = anct_summary_delivered(s);
        assert!(sent > 0 && delivered <= sent);
        let pdr = anct_summary_pdr(s);
        assert!((pdr - delivered as f64 / sent as f64).abs() < 1e-12);
        assert!(anct_summary_control_bytes(s) > 0);
        assert_eq!(anct_summary_drops_attacker(s), 0);
        assert_eq!(anct_summary_marked_nodes(s), 0);

        // row matches a direct run of the same scenario
        let mut needed = 0;
        assert_eq!(
            anct_summary_csv_row(s, ptr::null_mut(), 0, &mut needed),
            AnctStatus::BufferTooSmall
        );
        let mut buf = vec![0 as c_char; needed];
        assert_eq!(
            anct_summary_csv_row(s, buf.as_mut_ptr(), needed - 1, ptr::null_mut()),
            AnctStatus::BufferTooSmall
        );
        assert_eq!(
            anct_summary_csv_row(s, buf.as_mut_ptr(), needed, ptr::null_mut()),
            AnctStatus::Ok
        );
        let row = CStr::from_ptr(buf.as_ptr()).to_str().unwrap().to_string();
        assert!(row.starts_with("3,baseline_aodv,"), "{row}");
        let mut direct = anct_core::ScenarioConfig::parse(
            "node_count = 20\nflow_count = 2\nsim_duration = 5\nrng_seed = 3\nprotocol = baseline_aodv\n",
        )
        .unwrap();
        direct.protocol = anct_core::model::Protocol::BaselineAodv;
        let m = anct_core::run(&anct_core::validate_config(direct).unwrap());
        assert_eq!(row, m.csv_row());

        anct_summary_free(s);
        anct_config_free(cfg);
    }
}

#[test]
fn invalid_config_reports_message() {
    unsafe {
        let cfg = anct_config_new();
        assert_eq!(anct_config_validate(cfg), AnctStatus::Ok);
        assert_eq!(
            anct_config_set(cfg, cstr("speed").as_ptr(), cstr("fast").as_ptr()),
            AnctStatus::InvalidConfig
        );
        assert!(last_error().contains("speed"), "{}", last_error());
        assert_eq!(
            anct_config_set(cfg, cstr("delta1").as_ptr(), cstr("0.01").as_ptr()),
            AnctStatus::Ok
        );
        assert_eq!(anct_config_validate(cfg), AnctStatus::InvalidConfig);
        let mut s = ptr::null_mut();
        assert_eq!(anct_run(cfg, &mut s), AnctStatus::InvalidConfig);
        assert!(s.is_null());
        anct_config_free(cfg);

        let mut out = ptr::null_mut();
        assert_eq!(
            anct_config_parse(cstr("no equals sign").as_ptr(), &mut out),
            AnctStatus::InvalidConfig
        );
        assert!(out.is_null());
    }
}

#[test]
fn null_and_utf8_handling() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(anct_config_parse(ptr::null(), &mut out), AnctStatus::NullPointer);
        assert_eq!(
            anct_config_parse(cstr("").as_ptr(), ptr::null_mut()),
            AnctStatus::NullPointer
        );
        assert_eq!(anct_config_validate(ptr::null()), AnctStatus::NullPointer);
        assert_eq!(anct_run(ptr::null(), &mut ptr::null_mut()), AnctStatus::NullPointer);
        assert!(anct_summary_pdr(ptr::null()).is_nan());
        assert_eq!(anct_summary_delivered(ptr::null()), 0);
        assert_eq!(
            anct_summary_csv_row(ptr::null(), ptr::null_mut(), 0, ptr::null_mut()),
            AnctStatus::NullPointer
        );
        anct_config_free(ptr::null_mut());
        anct_summary_free(ptr::null_mut());

        let bad = [0xffu8 as c_char, 0];
        assert_eq!(anct_config_parse(bad.as_ptr(), &mut out), AnctStatus::InvalidUtf8);
        assert!(last_error().contains("UTF-8"));
    }
}

#[test]
fn ctr_matches_published_aes_vector() {
    let key: [u8; 16] = hex("2b7e151628aed2a6abf7158809cf4f3c").try_into().unwrap();
    let ctr: [u8; 16] = hex("f0f1f2f3f4f5f6f7f8f9fafbfcfdfeff").try_into().unwrap();
    let pt = hex("6bc1bee22e409f96e93d7e117393172aae2d8a571e03ac9c9eb76fac45af8e51");
    let ct = hex("874d6191b620e3261bef6864990db6ce9806f66b7970fdff8617187bb9fffdff");
    let mut out = vec![0u8; pt.len()];
    unsafe {
        assert_eq!(
            anct_ctr_apply(0, &key, &ctr, pt.as_ptr(), pt.len(), out.as_mut_ptr()),
            AnctStatus::Ok
        );
        assert_eq!(out, ct);
        // in place, test cipher, round trip
        let mut buf = pt.clone();
        let p = buf.as_mut_ptr();
        assert_eq!(anct_ctr_apply(1, &key, &ctr, p, buf.len(), p), AnctStatus::Ok);
        assert_ne!(buf, pt);
        assert_eq!(anct_ctr_apply(1, &key, &ctr, p, buf.len(), p), AnctStatus::Ok);
        assert_eq!(buf, pt);

        assert_eq!(
            anct_ctr_apply(7, &key, &ctr, pt.as_ptr(), pt.len(), out.as_mut_ptr()),
            AnctStatus::InvalidArgument
        );
        assert_eq!(
            anct_ctr_apply(0, ptr::null(), &ctr, pt.as_ptr(), pt.len(), out.as_mut_ptr()),
            AnctStatus::NullPointer
        );
        assert_eq!(
            anct_ctr_apply(0, &key, &ctr, ptr::null(), 0, ptr::null_mut()),
            AnctStatus::Ok
        );
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/anct.h");
    for sym in [
        "anct_last_error_message",
        "anct_config_new",
        "anct_config_parse",
        "anct_config_set",
        "anct_config_validate",
        "anct_config_free",
        "anct_run",
        "anct_summary_pdr",
        "anct_summary_mean_delay_ms",
        "anct_summary_data_sent",
        "anct_summary_delivered",
        "anct_summary_control_bytes",
        "anct_summary_drops_attacker",
        "anct_summary_marked_nodes",
        "anct_summary_csv_row",
        "anct_summary_free",
        "anct_ctr_apply",
        "ANCT_STATUS_BUFFER_TOO_SMALL = -4",
        "typedef struct AnctConfig AnctConfig;",
    ] {
        assert!(header.contains(sym), "header lacks {sym}");
    }
}

/// Compiles the header as C and C++ when a compiler is around.
#[test]
fn header_compiles() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = std::env::temp_dir().join(format!("anct-header-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("probe.c");
    std::fs::write(
        &src,
        "#include \"anct.h\"\nint main(void) { AnctConfig *c = anct_config_new(); \
         AnctStatus s = anct_config_validate(c); anct_config_free(c); return s; }\n",
    )
    .unwrap();
    for (compiler, extra) in [("cc", vec!["-std=c99"]), ("c++", vec!["-x", "c++"])] {
        let status = Command::new(compiler)
            .args(&extra)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
            .arg(&include)
            .arg(&src)
            .status();
        match status {
            Ok(s) => assert!(s.success(), "{compiler} rejected the header"),
            Err(_) => eprintln!("{compiler} not found; skipping"),
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
}
