use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use xenoscope_ffi::*;

fn last_error() -> String {
    let p = xs_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn code(buf: &[c_char; 4]) -> String {
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn event_line(id: u64, actor1: &str, country1: &str, root: &str) -> CString {
    let mut c = vec![String::new(); 61];
    c[0] = id.to_string();
    c[1] = "20220615".into();
    c[5] = actor1.into();
    c[7] = country1.into();
    c[28] = root.into();
    c[59] = "20220615000000".into();
    c[60] = format!("https://src.example.net/{id}");
    CString::new(c.join("\t")).unwrap()
}

fn mention_line(id: u64, doc: &str) -> CString {
    let mut c = vec![String::new(); 16];
    c[0] = id.to_string();
    c[5] = doc.into();
    c[13] = "-2.5".into();
    CString::new(c.join("\t")).unwrap()
}

fn gkg_line(doc: &str, themes: &str) -> CString {
    let mut c = vec![String::new(); 27];
    c[0] = format!("g-{doc}");
    c[4] = doc.into();
    c[8] = themes.into();
    CString::new(c.join("\t")).unwrap()
}

#[test]
fn scalar_functions() {
    let mut sf = 0.0;
    assert_eq!(
        unsafe { xs_scaled_frequency(354, 1_787_504, 337_341_954, &mut sf) },
        XsStatus::Ok
    );
    assert!((sf - 66_807.71).abs() < 0.005);
    assert_eq!(
        unsafe { xs_scaled_frequency(1, 0, 10, &mut sf) },
        XsStatus::InvalidArgument
    );
    assert!(last_error().contains("rp"));
    assert_eq!(
        unsafe { xs_scaled_frequency(1, 1, 1, ptr::null_mut()) },
        XsStatus::NullPointer
    );

    let mut cat = XsActionCategory::Indirect;
    for root in 1..=20u8 {
        assert_eq!(unsafe { xs_categorize(root, &mut cat) }, XsStatus::Ok);
        let direct = matches!(root, 9 | 10 | 13..=20);
        assert_eq!(cat == XsActionCategory::Direct, direct, "root {root}");
    }
    assert_eq!(unsafe { xs_categorize(21, &mut cat) }, XsStatus::InvalidArgument);

    let mut root = 0u8;
    let text = CString::new("14").unwrap();
    assert_eq!(unsafe { xs_parse_root_code(text.as_ptr(), &mut root) }, XsStatus::Ok);
    assert_eq!(root, 14);
    let bad = CString::new("--").unwrap();
    assert_eq!(
        unsafe { xs_parse_root_code(bad.as_ptr(), &mut root) },
        XsStatus::ParseError
    );

    let mut pct = 0u64;
    assert_eq!(unsafe { xs_rounded_percent(8, 17, &mut pct) }, XsStatus::Ok);
    assert_eq!(pct, 47);
    assert_eq!(unsafe { xs_rounded_percent(1, 0, &mut pct) }, XsStatus::InvalidArgument);
}

#[test]
fn registry_handle() {
    let mut reg = ptr::null_mut();
    assert_eq!(unsafe { xs_registry_new(&mut reg) }, XsStatus::Ok);
    let mut out: [c_char; 4] = [0; 4];
    for (label, expected) in [("United Kingdom", "GBR"), ("us", "USA"), ("ROM", "ROU")] {
        let l = CString::new(label).unwrap();
        assert_eq!(
            unsafe { xs_registry_normalize(reg, l.as_ptr(), out.as_mut_ptr()) },
            XsStatus::Ok
        );
        assert_eq!(code(&out), expected);
    }
    let l = CString::new("Atlantis").unwrap();
    assert_eq!(
        unsafe { xs_registry_normalize(reg, l.as_ptr(), out.as_mut_ptr()) },
        XsStatus::NotFound
    );
    assert!(last_error().contains("Atlantis"));
    unsafe { xs_registry_free(reg) };
    unsafe { xs_registry_free(ptr::null_mut()) };
}

#[test]
fn session_runs_the_filter_cascade() {
    let mut session = ptr::null_mut();
    assert_eq!(
        unsafe { xs_session_new(XsMatchMode::Prefix, XsCountryStrategy::Actor1First, &mut session) },
        XsStatus::Ok
    );
    let lines_gkg = [
        gkg_line("d1", "DISCRIMINATION_IMMIGRATION_XENOPHOBIA,10;REFUGEES,3"),
        gkg_line("d2", "TAX_FNCACT,1"),
    ];
    for l in &lines_gkg {
        assert_eq!(unsafe { xs_session_add_gkg_line(session, l.as_ptr()) }, XsStatus::Ok);
    }
    for l in [
        mention_line(1, "d1"),
        mention_line(2, "d1"),
        mention_line(3, "d2"),
        mention_line(4, "d1"),
    ] {
        assert_eq!(
            unsafe { xs_session_add_mention_line(session, l.as_ptr()) },
            XsStatus::Ok
        );
    }
    for l in [
        event_line(1, "USAREF", "USA", "14"),
        event_line(2, "GOV", "USA", "01"),
        event_line(3, "REF", "GBR", "01"),
        event_line(4, "REF", "", "02"),
    ] {
        assert_eq!(unsafe { xs_session_add_event_line(session, l.as_ptr()) }, XsStatus::Ok);
    }
    let junk = CString::new("not\ta\trow").unwrap();
    assert_eq!(
        unsafe { xs_session_add_event_line(session, junk.as_ptr()) },
        XsStatus::ParseError
    );
    assert_eq!(unsafe { xs_session_skipped_lines(session) }, 1);

    let mut result = ptr::null_mut();
    assert_eq!(unsafe { xs_session_run(session, &mut result) }, XsStatus::Ok);
    let mut counters = XsCounters::default();
    assert_eq!(unsafe { xs_result_counters(result, &mut counters) }, XsStatus::Ok);
    assert_eq!(
        counters,
        XsCounters {
            initial_records: 3,
            after_ref_actor: 2,
            after_country_code: 1,
            unique_events: 1
        }
    );
    assert_eq!(unsafe { xs_result_event_count(result) }, 1);
    let mut ev = XsEvent::default();
    assert_eq!(unsafe { xs_result_event(result, 0, &mut ev) }, XsStatus::Ok);
    assert_eq!(ev.global_event_id, 1);
    assert_eq!(code(&ev.country), "USA");
    assert_eq!(ev.root_code, 14);
    assert_eq!(ev.n_source_documents, 1);
    assert_eq!(
        unsafe { xs_result_event(result, 1, &mut ev) },
        XsStatus::IndexOutOfRange
    );

    let mut split = XsGlobalSplit::default();
    assert_eq!(unsafe { xs_result_global_split(result, &mut split) }, XsStatus::Ok);
    assert_eq!((split.direct, split.indirect, split.unclassified), (1, 0, 0));

    let report = unsafe { xs_result_report(result) };
    let text = unsafe { CStr::from_ptr(report) }.to_string_lossy().into_owned();
    assert!(text.starts_with("initial_records=3\n"));
    unsafe { xs_string_free(report) };

    unsafe {
        xs_result_free(result);
        xs_session_free(session);
    }
}

#[test]
fn null_handles_are_rejected() {
    let l = CString::new("x").unwrap();
    assert_eq!(
        unsafe { xs_session_add_gkg_line(ptr::null_mut(), l.as_ptr()) },
        XsStatus::NullPointer
    );
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { xs_session_run(ptr::null(), &mut out) }, XsStatus::NullPointer);
    assert!(unsafe { xs_result_report(ptr::null()) }.is_null());
    assert_eq!(unsafe { xs_result_event_count(ptr::null()) }, 0);
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(xs_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// The generated header must compile as C when a C compiler is present.
#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/xenoscope.h");
    assert!(header.exists(), "header not generated");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in [
        "xs_session_new",
        "xs_result_counters",
        "XS_STATUS_OK",
        "typedef struct XsSession XsSession",
    ] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping compile check");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"xenoscope.h\"\nint main(void) { XsCounters c; (void)c; return XS_STATUS_OK; }\n",
    )
    .unwrap();
    let status = Command::new(cc)
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header.parent().unwrap())
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc)
            .arg("--version")
            .output()
            .is_ok_and(|o| o.status.success())
        {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
