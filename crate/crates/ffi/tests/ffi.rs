use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use netregime_ffi::*;

fn last_error() -> String {
    let p = nr_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn network_handle_round_trip() {
    unsafe {
        let mut h: *mut NrNetwork = ptr::null_mut();
        assert_eq!(nr_network_generate(50, 50.0, 7, &mut h), NrStatus::Ok);
        assert!(!h.is_null());
        assert!(nr_last_error_message().is_null());

        let mut count = 0usize;
        assert_eq!(nr_network_node_count(h, &mut count), NrStatus::Ok);
        assert_eq!(count, 100);
        let mut area = 0.0;
        assert_eq!(nr_network_area(h, &mut area), NrStatus::Ok);
        assert_eq!(area, 50.0);

        let mut json: *mut std::ffi::c_char = ptr::null_mut();
        assert_eq!(nr_network_to_json(h, &mut json), NrStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        assert!(text.contains("positions"));

        let mut h2: *mut NrNetwork = ptr::null_mut();
        assert_eq!(nr_network_from_json(json, &mut h2), NrStatus::Ok);
        let mut json2: *mut std::ffi::c_char = ptr::null_mut();
        assert_eq!(nr_network_to_json(h2, &mut json2), NrStatus::Ok);
        assert_eq!(CStr::from_ptr(json2).to_str().unwrap(), text);

        nr_string_free(json);
        nr_string_free(json2);
        nr_network_free(h);
        nr_network_free(h2);
        nr_network_free(ptr::null_mut());
        nr_string_free(ptr::null_mut());
    }
}

#[test]
fn same_seed_same_network() {
    unsafe {
        let mut a: *mut NrNetwork = ptr::null_mut();
        let mut b: *mut NrNetwork = ptr::null_mut();
        assert_eq!(nr_network_generate_for_beta(64, 4.0, 0.5, 3, &mut a), NrStatus::Ok);
        assert_eq!(nr_network_generate_for_beta(64, 4.0, 0.5, 3, &mut b), NrStatus::Ok);
        let (mut ja, mut jb) = (ptr::null_mut(), ptr::null_mut());
        nr_network_to_json(a, &mut ja);
        nr_network_to_json(b, &mut jb);
        assert_eq!(CStr::from_ptr(ja), CStr::from_ptr(jb));
        // area = n^(1 - 2 beta / alpha) for unit parameters
        let mut area = 0.0;
        nr_network_area(a, &mut area);
        assert!((area - 64f64.powf(0.75)).abs() < 1e-9 * area);
        nr_string_free(ja);
        nr_string_free(jb);
        nr_network_free(a);
        nr_network_free(b);
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let mut h: *mut NrNetwork = ptr::null_mut();
        assert_eq!(nr_network_generate(0, 1.0, 1, &mut h), NrStatus::InvalidParameter);
        assert!(h.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(nr_network_generate(4, 1.0, 1, ptr::null_mut()), NrStatus::NullPointer);
        let mut count = 0usize;
        assert_eq!(nr_network_node_count(ptr::null(), &mut count), NrStatus::InvalidParameter);
        assert!(last_error().contains("null"));

        let mut p = NrRegimePoint::default();
        assert_eq!(nr_classify(1.5, 0.0, &mut p), NrStatus::InvalidParameter);

        let bad = CString::new("{not json").unwrap();
        assert_eq!(nr_network_from_json(bad.as_ptr(), &mut h), NrStatus::InvalidParameter);

        let mut fit = NrFit::default();
        let xs = [1.0, 2.0];
        assert_eq!(nr_fit_exponent(xs.as_ptr(), xs.as_ptr(), 2, &mut fit), NrStatus::InsufficientData);
        assert_eq!(nr_fit_exponent(ptr::null(), xs.as_ptr(), 2, &mut fit), NrStatus::InvalidParameter);

        // a successful call clears the message
        assert_eq!(nr_classify(4.0, 0.5, &mut p), NrStatus::Ok);
        assert!(nr_last_error_message().is_null());
    }
}

#[test]
fn classify_matches_regime_table() {
    let cases = [
        (4.0, 1.5, 1, 1.0),
        (2.5, 0.0, 2, 2.0 - 1.25),
        (4.0, -0.5, 3, 0.0),
        (4.0, 0.5, 4, 0.75),
    ];
    for (a, b, id, e) in cases {
        let mut p = NrRegimePoint::default();
        assert_eq!(unsafe { nr_classify(a, b, &mut p) }, NrStatus::Ok);
        assert_eq!(p.regime, id);
        assert!((p.exponent - e).abs() < 1e-12);
    }
    let mut p = NrRegimePoint::default();
    unsafe { nr_classify(3.0, 0.25, &mut p) };
    assert!(p.on_alpha_three);
}

#[test]
fn scalar_functions() {
    unsafe {
        let mut v = 0.0;
        assert_eq!(nr_snr_short(100, 100.0, 4.0, &mut v), NrStatus::Ok);
        assert!((v - 1.0).abs() < 1e-12);

        assert_eq!(nr_upper_bound_exponent(4.0, 0.5, &mut v), NrStatus::Ok);
        assert!((v - 0.75).abs() < 1e-12);

        assert_eq!(nr_multihop_throughput(100, 1.0, 1.0, &mut v), NrStatus::Ok);
        assert!((v - 10.0 * 1.5f64.log2()).abs() < 1e-12);

        let mut plain = 0.0;
        let mut bursty = 0.0;
        assert_eq!(nr_hc_throughput(1024, 1.0, 4.0, false, &mut plain), NrStatus::Ok);
        assert_eq!(nr_hc_throughput(1024, 1.0, 4.0, true, &mut bursty), NrStatus::Ok);
        assert!(plain > 0.0 && bursty > 0.0);

        assert_eq!(nr_select_cut_width(0.5, 100, 4.0, &mut v), NrStatus::Ok);
        assert_eq!(v, 1.0);
        assert_eq!(nr_select_cut_width(1e6, 100, 4.0, &mut v), NrStatus::Ok);
        assert_eq!(v, 10.0);

        let mut s = NrSchemeExponents::default();
        assert_eq!(nr_scheme_exponents(4.0, 0.5, &mut s), NrStatus::Ok);
        assert!(s.hybrid_valid);
        assert!((s.hybrid - 0.75).abs() < 1e-12);
        assert_eq!(s.optimal, NR_SCHEME_HYBRID);
        assert_eq!(nr_scheme_exponents(4.0, -0.5, &mut s), NrStatus::Ok);
        assert!(!s.hybrid_valid && s.hybrid.is_nan());
    }
}

#[test]
fn cutset_report_on_handle() {
    unsafe {
        let mut h: *mut NrNetwork = ptr::null_mut();
        assert_eq!(nr_network_generate_for_beta(32, 3.0, 0.0, 11, &mut h), NrStatus::Ok);
        let mut r = NrCutsetSummary::default();
        assert_eq!(nr_cutset_report(h, 3.0, 4, 5, &mut r), NrStatus::Ok);
        assert!(r.chain_holds);
        assert!(r.mc_logdet <= r.dof_term + r.power_term);
        assert!((r.snr_s - 1.0).abs() < 1e-9);
        assert_eq!(nr_cutset_report(ptr::null(), 3.0, 4, 5, &mut r), NrStatus::InvalidParameter);
        nr_network_free(h);
    }
}

#[test]
fn crossing_and_fit() {
    unsafe {
        let mut c = NrCrossingSummary::default();
        assert_eq!(nr_crossing_probability(1024, 0.25, 20, 9, &mut c), NrStatus::Ok);
        assert!(c.all_certified);
        assert!((0.0..=1.0).contains(&c.empirical_rate));

        let xs: Vec<f64> = (1..=6).map(|k| (1u32 << k) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(0.75)).collect();
        let mut fit = NrFit::default();
        assert_eq!(nr_fit_exponent(xs.as_ptr(), ys.as_ptr(), xs.len(), &mut fit), NrStatus::Ok);
        assert!((fit.slope - 0.75).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/netregime.h")).unwrap();
    for name in [
        "nr_last_error_message",
        "nr_network_generate",
        "nr_network_generate_for_beta",
        "nr_network_free",
        "nr_network_node_count",
        "nr_network_area",
        "nr_network_to_json",
        "nr_network_from_json",
        "nr_string_free",
        "nr_classify",
        "nr_snr_short",
        "nr_upper_bound_exponent",
        "nr_scheme_exponents",
        "nr_multihop_throughput",
        "nr_hc_throughput",
        "nr_select_cut_width",
        "nr_cutset_report",
        "nr_crossing_probability",
        "nr_fit_exponent",
        "typedef struct NrNetwork NrNetwork",
        "NR_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "header is missing {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler, skipping");
        return;
    };
    assert!(cc.status.success());
    let dir = tempfile_dir();
    let src = dir.join("probe.c");
    std::fs::write(
        &src,
        "#include \"netregime.h\"\nint main(void) { NrRegimePoint p; return (int)nr_classify(4.0, 0.5, &p); }\n",
    )
    .unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"])
        .arg(concat!("-I", env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("netregime-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
