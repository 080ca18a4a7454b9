//! C ABI for fairsim.
//!
//! Objects are opaque handles created by `fs_*_new`/`fs_*_from_*` and
//! released by the matching `fs_*_free`. Every fallible call returns an
//! [`FsStatus`]; on failure [`fs_last_error`] describes what went wrong on
//! the calling thread. Strings returned through `char **` out-parameters are
//! owned by the caller and released with [`fs_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use fairsim::auditor::{judge_race, write_races_csv, RaceEntry, RaceRecord, Verdict};
use fairsim::book::{Message, OrderBook, ParticipantId, Side};
use fairsim::participants::StimulusId;
use fairsim::scenario::output::fairness_json;
use fairsim::scenario::{self, run_scenario_with, write_outputs, OutputOptions, RunOptions, RunOutput, ScenarioConfig};
use fairsim::SimTime;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Config = 3,
    NotFound = 4,
    Run = 5,
    Book = 6,
    Audit = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FsSide {
    Bid = 0,
    Ask = 1,
}

impl From<FsSide> for Side {
    fn from(s: FsSide) -> Side {
        match s {
            FsSide::Bid => Side::Bid,
            FsSide::Ask => Side::Ask,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FsRequirements {
    pub req1_max_spread_ns: u64,
    pub req2_violations: u64,
    pub req3_violations: u64,
}

/// Best price level on one side; `present` is false for an empty side.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FsBest {
    pub present: bool,
    pub price: i64,
    pub qty: u64,
}

pub struct FsScenario(ScenarioConfig);

pub struct FsRun(RunOutput);

/// Order book whose arrival clock advances by 1ns per message.
pub struct FsBook {
    book: OrderBook,
    clock: u64,
}

struct Failure(FsStatus, String);

impl Failure {
    fn new(status: FsStatus, msg: impl ToString) -> Self {
        Failure(status, msg.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FsStatus {
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|panic| {
        let msg = panic
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| panic.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        Err(Failure::new(FsStatus::Panic, msg))
    });
    match result {
        Ok(()) => {
            set_last_error("");
            FsStatus::Ok
        }
        Err(Failure(status, msg)) => {
            set_last_error(&msg);
            status
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(FsStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::new(FsStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(FsStatus::NullArgument, format!("{what} is null")))
}

unsafe fn mut_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure::new(FsStatus::NullArgument, format!("{what} is null")))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(FsStatus::NullArgument, "output pointer is null"));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|e| Failure::new(FsStatus::Io, e))?;
    put(out, c.into_raw())
}

fn config_failure(e: scenario::ConfigError) -> Failure {
    Failure::new(FsStatus::Config, e)
}

/// Message describing the last failed call on this thread, or "" after a
/// success. Valid until the next fairsim call on the same thread.
#[no_mangle]
pub extern "C" fn fs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn fs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fs_scenario_from_json(json: *const c_char, out: *mut *mut FsScenario) -> FsStatus {
    guard(|| {
        let cfg = ScenarioConfig::from_json(str_arg(json, "json")?).map_err(config_failure)?;
        put(out, Box::into_raw(Box::new(FsScenario(cfg))))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fs_scenario_from_file(path: *const c_char, out: *mut *mut FsScenario) -> FsStatus {
    guard(|| {
        let cfg = ScenarioConfig::from_file(str_arg(path, "path")?).map_err(config_failure)?;
        put(out, Box::into_raw(Box::new(FsScenario(cfg))))
    })
}

/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fs_scenario_bundled(name: *const c_char, out: *mut *mut FsScenario) -> FsStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        let cfg = scenario::bundled(name)
            .ok_or_else(|| Failure::new(FsStatus::NotFound, format!("no bundled scenario named {name}")))?
            .map_err(config_failure)?;
        put(out, Box::into_raw(Box::new(FsScenario(cfg))))
    })
}

/// Override the number of stimuli.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fs_scenario_set_races(scenario: *mut FsScenario, races: u64) -> FsStatus {
    guard(|| {
        let s = mut_arg(scenario, "scenario")?;
        let mut cfg = s.0.clone();
        cfg.stimuli.count = races;
        cfg.validate().map_err(config_failure)?;
        s.0 = cfg;
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fs_scenario_free(scenario: *mut FsScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Run `scenario` with `seed`. The event trace is not kept.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fs_run(scenario: *const FsScenario, seed: u64, out: *mut *mut FsRun) -> FsStatus {
    guard(|| {
        let s = ref_arg(scenario, "scenario")?;
        let run = run_scenario_with(&s.0, seed, RunOptions { record_trace: false })
            .map_err(|e| Failure::new(FsStatus::Run, e))?;
        put(out, Box::into_raw(Box::new(FsRun(run))))
    })
}

/// # Safety
/// `run` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fs_run_free(run: *mut FsRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of judgeable races.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fs_run_race_count(run: *const FsRun, out: *mut u64) -> FsStatus {
    guard(|| put(out, ref_arg(run, "run")?.0.report.races))
}

/// Estimated ε at `delta`.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fs_run_epsilon_at(run: *const FsRun, delta: f64, out: *mut u64) -> FsStatus {
    guard(|| {
        let eps = ref_arg(run, "run")?
            .0
            .report
            .epsilon_at(delta)
            .ok_or_else(|| Failure::new(FsStatus::Audit, format!("no estimate at delta {delta}")))?;
        put(out, eps)
    })
}

/// Estimated common latency `l` in ns.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fs_run_l_hat(run: *const FsRun, out: *mut i64) -> FsStatus {
    guard(|| {
        let l = ref_arg(run, "run")?
            .0
            .report
            .l_hat_ns
            .ok_or_else(|| Failure::new(FsStatus::Audit, "no judgeable races"))?;
        put(out, l)
    })
}

/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fs_run_requirements(run: *const FsRun, out: *mut FsRequirements) -> FsStatus {
    guard(|| {
        let r = &ref_arg(run, "run")?.0.report;
        put(
            out,
            FsRequirements {
                req1_max_spread_ns: r.req1_max_spread_ns,
                req2_violations: r.req2_violations,
                req3_violations: r.req3_violations,
            },
        )
    })
}

/// The fairness report as JSON. Free with `fs_string_free`.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fs_run_fairness_json(run: *const FsRun, out: *mut *mut c_char) -> FsStatus {
    guard(|| put_string(out, fairness_json(&ref_arg(run, "run")?.0.report)))
}

/// Per-race CSV. Free with `fs_string_free`.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fs_run_races_csv(run: *const FsRun, out: *mut *mut c_char) -> FsStatus {
    guard(|| {
        let mut buf = Vec::new();
        write_races_csv(&ref_arg(run, "run")?.0.races, &mut buf).map_err(|e| Failure::new(FsStatus::Io, e))?;
        put_string(out, String::from_utf8(buf).map_err(|e| Failure::new(FsStatus::Io, e))?)
    })
}

/// Write the standard run artifacts into `dir`.
///
/// # Safety
/// `run` must be a live handle; `dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fs_run_write_outputs(run: *const FsRun, dir: *const c_char) -> FsStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        let dir = str_arg(dir, "dir")?;
        write_outputs(Path::new(dir), &run.0, OutputOptions::default()).map_err(|e| Failure::new(FsStatus::Io, e))
    })
}

/// Judge one race: entry `i` reacted in `reaction_ns[i]` and arrived at
/// `arrival_ns[i]`, for an event at `t_e_ns`. Needs at least two entries.
///
/// # Safety
/// Both arrays must hold `n` elements; `fair` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fs_judge_race(
    t_e_ns: u64,
    reaction_ns: *const u64,
    arrival_ns: *const u64,
    n: usize,
    epsilon_ns: u64,
    fair: *mut bool,
) -> FsStatus {
    guard(|| {
        if reaction_ns.is_null() || arrival_ns.is_null() {
            return Err(Failure::new(FsStatus::NullArgument, "array is null"));
        }
        let r = std::slice::from_raw_parts(reaction_ns, n);
        let a = std::slice::from_raw_parts(arrival_ns, n);
        let rec = RaceRecord {
            stimulus: StimulusId(0),
            t_e: SimTime::from_nanos(t_e_ns),
            entries: (0..n)
                .map(|i| RaceEntry {
                    participant: ParticipantId(i as u32),
                    name: i.to_string(),
                    reaction_time: SimTime::from_nanos(r[i]),
                    t_arrival: Some(SimTime::from_nanos(a[i])),
                    won: false,
                    window: None,
                })
                .collect(),
        };
        let verdict = judge_race(&rec, SimTime::from_nanos(epsilon_ns)).map_err(|e| Failure::new(FsStatus::Audit, e))?;
        put(fair, verdict == Verdict::Fair)
    })
}

#[no_mangle]
pub extern "C" fn fs_book_new() -> *mut FsBook {
    Box::into_raw(Box::new(FsBook {
        book: OrderBook::new(),
        clock: 0,
    }))
}

/// # Safety
/// `book` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fs_book_free(book: *mut FsBook) {
    if !book.is_null() {
        drop(Box::from_raw(book));
    }
}

unsafe fn submit(book: *mut FsBook, msg: Message, filled: *mut u64) -> Result<(), Failure> {
    let b = mut_arg(book, "book")?;
    b.clock += 1;
    let outcome = b
        .book
        .process_message(&msg, SimTime::from_nanos(b.clock))
        .map_err(|e| Failure::new(FsStatus::Book, e))?;
    if !filled.is_null() {
        filled.write(outcome.trades.iter().map(|t| t.qty).sum());
    }
    Ok(())
}

/// Submit a limit order. `filled` (may be null) receives the quantity
/// executed on entry; any remainder rests.
///
/// # Safety
/// `book` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fs_book_limit(
    book: *mut FsBook,
    id: u64,
    participant: u32,
    side: FsSide,
    price: i64,
    qty: u64,
    filled: *mut u64,
) -> FsStatus {
    guard(|| submit(book, Message::limit(id, participant, side.into(), price, qty), filled))
}

/// Submit a market order; the unfilled remainder is discarded.
///
/// # Safety
/// `book` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fs_book_market(
    book: *mut FsBook,
    id: u64,
    participant: u32,
    side: FsSide,
    qty: u64,
    filled: *mut u64,
) -> FsStatus {
    guard(|| submit(book, Message::market(id, participant, side.into(), qty), filled))
}

/// Cancel a resting order. `cancelled` is false when the order is gone or
/// belongs to someone else.
///
/// # Safety
/// `book` must be a live handle; `cancelled` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fs_book_cancel(book: *mut FsBook, id: u64, participant: u32, cancelled: *mut bool) -> FsStatus {
    guard(|| {
        let b = mut_arg(book, "book")?;
        b.clock += 1;
        let outcome = b
            .book
            .process_message(&Message::cancel(id, participant), SimTime::from_nanos(b.clock))
            .map_err(|e| Failure::new(FsStatus::Book, e))?;
        put(
            cancelled,
            matches!(outcome.cancel, Some(fairsim::book::CancelOutcome::Cancelled { .. })),
        )
    })
}

/// # Safety
/// `book` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fs_book_best(book: *const FsBook, side: FsSide, out: *mut FsBest) -> FsStatus {
    guard(|| {
        let b = ref_arg(book, "book")?;
        let best = match side {
            FsSide::Bid => b.book.best_bid(),
            FsSide::Ask => b.book.best_ask(),
        };
        let value = best.map_or(FsBest::default(), |(price, qty)| FsBest {
            present: true,
            price,
            qty,
        });
        put(out, value)
    })
}

/// Library version; a static string, never freed.
#[no_mangle]
pub extern "C" fn fs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn null_handles_report_errors() {
        let mut n = 0u64;
        let status = unsafe { fs_run_race_count(ptr::null(), &mut n) };
        assert_eq!(status, FsStatus::NullArgument);
        let msg = unsafe { CStr::from_ptr(fs_last_error()) };
        assert!(msg.to_str().unwrap().contains("run"));
    }
}
