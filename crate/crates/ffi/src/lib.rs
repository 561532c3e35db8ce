//! C ABI over the xenoscope core.
//!
//! Handles are opaque pointers created by `*_new` and released by the
//! matching `*_free`. Every fallible call returns an [`XsStatus`]; on
//! failure a message for the calling thread is available from
//! [`xs_last_error_message`]. Strings returned by the library must be
//! released with [`xs_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use xenoscope::classify::{breakdown_by_country, categorize, rounded_percent};
use xenoscope::country::CountryRegistry;
use xenoscope::filter::{run_filter_pipeline, CountryStrategy, FilterConfig, FilterOutcome, MatchMode};
use xenoscope::ingest::{parse_event_line, parse_gkg_line, parse_mention_line, FileKind, SchemaDescriptor};
use xenoscope::model::{
    parse_root_code, ActionCategory, CountryCode, CountryMetrics, EventRecord, GkgRecord, MentionRecord,
    PopulationRecord, RootCode,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    ParseError = 4,
    NotFound = 5,
    IndexOutOfRange = 6,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XsMatchMode {
    Prefix = 0,
    ExactSet = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XsCountryStrategy {
    Actor1First = 0,
    NonRefActor = 1,
    ActionGeo = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XsActionCategory {
    Indirect = 0,
    Direct = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct XsCounters {
    pub initial_records: u64,
    pub after_ref_actor: u64,
    pub after_country_code: u64,
    pub unique_events: u64,
}

/// One retained event. `country` is a NUL-terminated alpha-3 code;
/// `root_code` is 0 when the event has no usable CAMEO root code.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct XsEvent {
    pub global_event_id: u64,
    pub country: [c_char; 4],
    pub root_code: u8,
    pub n_source_documents: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct XsGlobalSplit {
    pub direct: u64,
    pub indirect: u64,
    pub unclassified: u64,
}

/// Country code lookup table.
pub struct XsRegistry {
    inner: &'static CountryRegistry,
}

/// Accumulates GDELT lines of all three kinds for one filter run.
pub struct XsSession {
    config: FilterConfig,
    schemas: [SchemaDescriptor; 3],
    gkgs: Vec<GkgRecord>,
    mentions: Vec<MentionRecord>,
    events: Vec<EventRecord>,
    skipped: u64,
}

/// Output of [`xs_session_run`].
pub struct XsResult {
    outcome: FilterOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let msg = CString::new(message.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: XsStatus, message: impl Into<String>) -> XsStatus {
    set_error(message);
    status
}

fn guard(f: impl FnOnce() -> XsStatus) -> XsStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(XsStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, XsStatus> {
    if p.is_null() {
        return Err(fail(XsStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(XsStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

macro_rules! non_null {
    ($p:expr, $name:literal) => {
        if $p.is_null() {
            return fail(XsStatus::NullPointer, concat!($name, " is null"));
        }
    };
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn xs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn xs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn xs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `F * TP / RP`. Fails with `InvalidArgument` when `rp` is 0, `tp` is 0
/// or `rp > tp`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn xs_scaled_frequency(f: u64, rp: u64, tp: u64, out: *mut f64) -> XsStatus {
    guard(|| {
        non_null!(out, "out");
        let code = CountryCode::new("XXX").expect("valid placeholder");
        let metrics = PopulationRecord::new(code, rp, tp, "")
            .ok()
            .and_then(|pop| CountryMetrics::compute(code, f, &pop));
        match metrics {
            Some(m) => {
                *out = m.scaled_frequency;
                XsStatus::Ok
            }
            None => fail(
                XsStatus::InvalidArgument,
                format!("need 0 < rp <= tp, got rp={rp} tp={tp}"),
            ),
        }
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn xs_categorize(root_code: u8, out: *mut XsActionCategory) -> XsStatus {
    guard(|| {
        non_null!(out, "out");
        match RootCode::new(root_code) {
            Ok(r) => {
                *out = match categorize(r) {
                    ActionCategory::Direct => XsActionCategory::Direct,
                    ActionCategory::Indirect => XsActionCategory::Indirect,
                };
                XsStatus::Ok
            }
            Err(e) => fail(XsStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Parses a textual root code such as `"14"`.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn xs_parse_root_code(text: *const c_char, out: *mut u8) -> XsStatus {
    guard(|| {
        non_null!(out, "out");
        let text = match str_arg(text, "text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_root_code(text) {
            Ok(r) => {
                *out = r.value();
                XsStatus::Ok
            }
            Err(e) => fail(XsStatus::ParseError, e.to_string()),
        }
    })
}

/// Round-half-up percentage of `part` in `total`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn xs_rounded_percent(part: u64, total: u64, out: *mut u64) -> XsStatus {
    guard(|| {
        non_null!(out, "out");
        if total == 0 || part > total {
            return fail(XsStatus::InvalidArgument, "need part <= total and total > 0");
        }
        *out = rounded_percent(part, total);
        XsStatus::Ok
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn xs_registry_new(out: *mut *mut XsRegistry) -> XsStatus {
    guard(|| {
        non_null!(out, "out");
        *out = Box::into_raw(Box::new(XsRegistry {
            inner: CountryRegistry::bundled(),
        }));
        XsStatus::Ok
    })
}

/// # Safety
/// `registry` must come from [`xs_registry_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn xs_registry_free(registry: *mut XsRegistry) {
    if !registry.is_null() {
        drop(Box::from_raw(registry));
    }
}

/// Resolves a country label (alpha-3, alpha-2, name or alias) and writes
/// the alpha-3 code plus NUL into `out`.
///
/// # Safety
/// `registry` must be a live handle, `raw` a NUL-terminated string and
/// `out` valid for 4 bytes.
#[no_mangle]
pub unsafe extern "C" fn xs_registry_normalize(
    registry: *const XsRegistry,
    raw: *const c_char,
    out: *mut c_char,
) -> XsStatus {
    guard(|| {
        non_null!(registry, "registry");
        non_null!(out, "out");
        let raw = match str_arg(raw, "raw") {
            Ok(r) => r,
            Err(s) => return s,
        };
        match (*registry).inner.normalize(raw) {
            Ok(code) => {
                write_code(code.as_str(), std::slice::from_raw_parts_mut(out, 4));
                XsStatus::Ok
            }
            Err(e) => fail(XsStatus::NotFound, e.to_string()),
        }
    })
}

fn write_code(code: &str, out: &mut [c_char]) {
    for (slot, b) in out.iter_mut().zip(code.bytes().chain(std::iter::repeat(0))) {
        *slot = b as c_char;
    }
    out[3] = 0;
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn xs_session_new(
    match_mode: XsMatchMode,
    strategy: XsCountryStrategy,
    out: *mut *mut XsSession,
) -> XsStatus {
    guard(|| {
        non_null!(out, "out");
        let mode = match match_mode {
            XsMatchMode::Prefix => MatchMode::Prefix,
            XsMatchMode::ExactSet => MatchMode::ExactSet,
        };
        let strategy = match strategy {
            XsCountryStrategy::Actor1First => CountryStrategy::Actor1First,
            XsCountryStrategy::NonRefActor => CountryStrategy::NonRefActor,
            XsCountryStrategy::ActionGeo => CountryStrategy::ActionGeo,
        };
        *out = Box::into_raw(Box::new(XsSession {
            config: FilterConfig::new(mode, strategy),
            schemas: FileKind::ALL.map(SchemaDescriptor::default_for),
            gkgs: Vec::new(),
            mentions: Vec::new(),
            events: Vec::new(),
            skipped: 0,
        }));
        XsStatus::Ok
    })
}

/// # Safety
/// `session` must come from [`xs_session_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn xs_session_free(session: *mut XsSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

unsafe fn add_line(session: *mut XsSession, line: *const c_char, kind: FileKind) -> XsStatus {
    guard(|| {
        non_null!(session, "session");
        let session = &mut *session;
        let line = match str_arg(line, "line") {
            Ok(l) => l.trim_end_matches(['\r', '\n']),
            Err(s) => return s,
        };
        let schema = &session.schemas[kind as usize];
        let parsed = match kind {
            FileKind::Event => parse_event_line(line, schema).map(|r| session.events.push(r)),
            FileKind::Mentions => parse_mention_line(line, schema).map(|r| session.mentions.push(r)),
            FileKind::Gkg => parse_gkg_line(line, schema).map(|r| session.gkgs.push(r)),
        };
        match parsed {
            Ok(()) => XsStatus::Ok,
            Err(e) => {
                session.skipped += 1;
                fail(XsStatus::ParseError, e.to_string())
            }
        }
    })
}

/// Adds one tab-separated Event export line. A malformed line is
/// counted as skipped and reported with `ParseError`.
///
/// # Safety
/// `session` must be a live handle and `line` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn xs_session_add_event_line(session: *mut XsSession, line: *const c_char) -> XsStatus {
    add_line(session, line, FileKind::Event)
}

/// # Safety
/// As [`xs_session_add_event_line`].
#[no_mangle]
pub unsafe extern "C" fn xs_session_add_mention_line(session: *mut XsSession, line: *const c_char) -> XsStatus {
    add_line(session, line, FileKind::Mentions)
}

/// # Safety
/// As [`xs_session_add_event_line`].
#[no_mangle]
pub unsafe extern "C" fn xs_session_add_gkg_line(session: *mut XsSession, line: *const c_char) -> XsStatus {
    add_line(session, line, FileKind::Gkg)
}

/// Number of lines rejected so far.
///
/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn xs_session_skipped_lines(session: *const XsSession) -> u64 {
    if session.is_null() {
        0
    } else {
        (*session).skipped
    }
}

/// Runs the filter cascade over everything added so far. The session
/// stays usable.
///
/// # Safety
/// `session` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn xs_session_run(session: *const XsSession, out: *mut *mut XsResult) -> XsStatus {
    guard(|| {
        non_null!(session, "session");
        non_null!(out, "out");
        let s = &*session;
        let outcome = run_filter_pipeline(&s.gkgs, &s.mentions, &s.events, &s.config, CountryRegistry::bundled());
        *out = Box::into_raw(Box::new(XsResult { outcome }));
        XsStatus::Ok
    })
}

/// # Safety
/// `result` must come from [`xs_session_run`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn xs_result_free(result: *mut XsResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `result` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn xs_result_counters(result: *const XsResult, out: *mut XsCounters) -> XsStatus {
    guard(|| {
        non_null!(result, "result");
        non_null!(out, "out");
        let c = (*result).outcome.counters;
        *out = XsCounters {
            initial_records: c.initial_records,
            after_ref_actor: c.after_ref_actor,
            after_country_code: c.after_country_code,
            unique_events: c.unique_events,
        };
        XsStatus::Ok
    })
}

/// Number of retained events; 0 for a null handle.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn xs_result_event_count(result: *const XsResult) -> usize {
    if result.is_null() {
        0
    } else {
        (*result).outcome.events.len()
    }
}

/// Event `index`, in ascending GLOBALEVENTID order.
///
/// # Safety
/// `result` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn xs_result_event(result: *const XsResult, index: usize, out: *mut XsEvent) -> XsStatus {
    guard(|| {
        non_null!(result, "result");
        non_null!(out, "out");
        let events = &(*result).outcome.events;
        let Some(e) = events.get(index) else {
            return fail(
                XsStatus::IndexOutOfRange,
                format!("index {index} out of range for {} events", events.len()),
            );
        };
        let mut ev = XsEvent {
            global_event_id: e.event.global_event_id,
            root_code: e.event.event_root_code.map_or(0, |r| r.value()),
            n_source_documents: e.source_documents.len() as u32,
            ..Default::default()
        };
        write_code(e.country.as_str(), &mut ev.country);
        *out = ev;
        XsStatus::Ok
    })
}

/// Direct / Indirect / unclassified totals over the retained events.
///
/// # Safety
/// `result` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn xs_result_global_split(result: *const XsResult, out: *mut XsGlobalSplit) -> XsStatus {
    guard(|| {
        non_null!(result, "result");
        non_null!(out, "out");
        let g = breakdown_by_country(&(*result).outcome.events).global;
        *out = XsGlobalSplit {
            direct: g.direct,
            indirect: g.indirect,
            unclassified: g.unclassified,
        };
        XsStatus::Ok
    })
}

/// Counters and diagnostics as `key=value` lines. Free with
/// [`xs_string_free`].
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn xs_result_report(result: *const XsResult) -> *mut c_char {
    if result.is_null() {
        set_error("result is null");
        return ptr::null_mut();
    }
    let o = &(*result).outcome;
    let mut s = o.counters.to_key_value();
    s.push_str(&o.diagnostics.to_key_value());
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}
