// SPDX-License-Identifier: Apache-2.0

//! C interface to the FBRA controller, the parity FEC codec and the
//! simulator. The header `include/fbra.h` is generated by the build script.
//!
//! Every fallible function returns an [`FbraStatus`]. On failure a message is
//! kept per thread and can be read with [`fbra_last_error`]. Panics never
//! cross the boundary; they surface as `FBRA_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use fbra_core::controller::{
    bounce_back, Action, ControllerConfig, ControllerDecision, ControllerState, FbraController as Core,
    ReportMeasurement, ReportOutcome,
};
use fbra_core::fec::{encode_block, try_recover, FecBlockState};
use fbra_core::types::{seq_after, BitRate, FecPacket, FeedbackReport, MediaPacket, SeqEvent, SimTime};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FbraStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Bad scenario text or controller parameters.
    Config = 3,
    /// The simulation or metrics step failed.
    Runtime = 4,
    /// The report fell inside a rate-control pause; no decision was made.
    Ignored = 5,
    /// No decision is due (tick before the feedback timeout).
    NoDecision = 6,
    /// FEC cannot rebuild the block (not exactly one packet missing).
    NotRecoverable = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FbraState {
    Stay = 0,
    Probe = 1,
    Up = 2,
    Down = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FbraAction {
    Hold = 0,
    EnableFec = 1,
    IncrementFecInterval = 2,
    RaiseRate = 3,
    Undershoot = 4,
    UndershootAndDisable = 5,
    BounceBack = 6,
    FeedbackTimeout = 7,
}

/// A loss or discard: sequence number and receiver time.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FbraSeqEvent {
    pub seq: u16,
    pub at_us: u64,
}

/// Receiver report. Event arrays may be NULL when their count is 0.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FbraReport {
    pub ssrc: u32,
    pub report_ts_us: u64,
    pub highest_seq: u16,
    pub cumulative_lost: u32,
    pub interval_sent: u32,
    pub loss_events: *const FbraSeqEvent,
    pub loss_count: usize,
    pub discard_events: *const FbraSeqEvent,
    pub discard_count: usize,
    pub owd_us: u64,
    pub jitter_us: u32,
    pub lsr_us: u64,
    pub dlsr_us: u64,
    pub is_early: bool,
}

/// Sender-side measurements over the interval the report closes.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FbraMeasurement {
    pub sending_rate_bps: u64,
    pub goodput_bps: u64,
    pub fec_rate_bps: u64,
    pub probe_fec_rate_bps: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FbraDecision {
    pub state: FbraState,
    pub action: FbraAction,
    pub target_rate_bps: u64,
    pub fec_enabled: bool,
    pub fec_interval: u8,
    /// Rate control is paused until this time when `disabled` is set.
    pub disabled: bool,
    pub disabled_until_us: u64,
}

/// Media packet. `payload` points to `payload_len` bytes.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FbraMediaPacket {
    pub ssrc: u32,
    pub seq: u16,
    pub frame_id: u32,
    pub frame_ts_us: u64,
    pub send_ts_us: u64,
    pub payload: *const u8,
    pub payload_len: usize,
    pub is_fragment: bool,
    pub fragment_index: u16,
    pub fragment_count: u16,
}

/// Opaque controller handle.
pub struct FbraController {
    inner: Core,
}

/// Opaque parity packet handle.
pub struct FbraFecPacket {
    inner: FecPacket,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: FbraStatus, msg: impl Into<String>) -> FbraStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> FbraStatus) -> FbraStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(FbraStatus::Panic, "internal panic"),
    }
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn fbra_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fbra_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn state_out(s: ControllerState) -> FbraState {
    match s {
        ControllerState::Stay => FbraState::Stay,
        ControllerState::Probe => FbraState::Probe,
        ControllerState::Up => FbraState::Up,
        ControllerState::Down => FbraState::Down,
    }
}

fn decision_out(d: &ControllerDecision) -> FbraDecision {
    let action = match d.action {
        Action::Hold => FbraAction::Hold,
        Action::EnableFec => FbraAction::EnableFec,
        Action::IncrementFecInterval => FbraAction::IncrementFecInterval,
        Action::RaiseRate => FbraAction::RaiseRate,
        Action::Undershoot { disable: false } => FbraAction::Undershoot,
        Action::Undershoot { disable: true } => FbraAction::UndershootAndDisable,
        Action::BounceBack => FbraAction::BounceBack,
        Action::FeedbackTimeout => FbraAction::FeedbackTimeout,
    };
    FbraDecision {
        state: state_out(d.new_state),
        action,
        target_rate_bps: d.target_media_rate.bps(),
        fec_enabled: d.fec_enabled,
        fec_interval: d.fec_interval,
        disabled: d.rate_control_disabled_until.is_some(),
        disabled_until_us: d.rate_control_disabled_until.map_or(0, |t| t.as_micros()),
    }
}

/// # Safety
/// `ptr` must be NULL (only when `len` is 0) or point to `len` valid items.
unsafe fn items<'a, T>(ptr: *const T, len: usize) -> Option<&'a [T]> {
    if len == 0 {
        Some(&[])
    } else if ptr.is_null() {
        None
    } else {
        Some(slice::from_raw_parts(ptr, len))
    }
}

/// Creates a controller with default parameters and the given FEC interval
/// bounds (2 <= min <= max <= 14).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn fbra_controller_new(
    fec_interval_min: u8,
    fec_interval_max: u8,
    out: *mut *mut FbraController,
) -> FbraStatus {
    guard(|| {
        if out.is_null() {
            return fail(FbraStatus::NullPointer, "out is NULL");
        }
        if !(2 <= fec_interval_min && fec_interval_min <= fec_interval_max && fec_interval_max <= 14) {
            return fail(
                FbraStatus::Config,
                format!("FEC interval bounds {fec_interval_min}..{fec_interval_max} outside 2..14"),
            );
        }
        let cfg = ControllerConfig {
            fec_interval_min,
            fec_interval_max,
            ..ControllerConfig::default()
        };
        let handle = Box::new(FbraController { inner: Core::new(cfg) });
        *out = Box::into_raw(handle);
        FbraStatus::Ok
    })
}

/// # Safety
/// `ctrl` must be NULL or a handle from [`fbra_controller_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fbra_controller_free(ctrl: *mut FbraController) {
    if !ctrl.is_null() {
        drop(Box::from_raw(ctrl));
    }
}

/// Feeds one receiver report. Writes `out` and returns `FBRA_STATUS_OK` when
/// a decision was made, `FBRA_STATUS_IGNORED` during a rate-control pause.
///
/// # Safety
/// All pointers must be valid; the report's event arrays must hold their
/// stated number of entries.
#[no_mangle]
pub unsafe extern "C" fn fbra_controller_on_report(
    ctrl: *mut FbraController,
    now_us: u64,
    report: *const FbraReport,
    meas: *const FbraMeasurement,
    out: *mut FbraDecision,
) -> FbraStatus {
    guard(|| {
        if ctrl.is_null() || report.is_null() || meas.is_null() || out.is_null() {
            return fail(FbraStatus::NullPointer, "NULL argument");
        }
        let r = &*report;
        let events = |p, n| {
            items::<FbraSeqEvent>(p, n).map(|s| {
                s.iter()
                    .map(|e| SeqEvent {
                        seq: e.seq,
                        at: SimTime(e.at_us),
                    })
                    .collect::<Vec<_>>()
            })
        };
        let (Some(loss_events), Some(discard_events)) =
            (events(r.loss_events, r.loss_count), events(r.discard_events, r.discard_count))
        else {
            return fail(FbraStatus::NullPointer, "event array is NULL with nonzero count");
        };
        let report = FeedbackReport {
            ssrc: r.ssrc,
            report_ts: SimTime(r.report_ts_us),
            highest_seq: r.highest_seq,
            cumulative_lost: r.cumulative_lost,
            interval_sent: r.interval_sent,
            loss_events,
            discard_events,
            owd_sample: SimTime(r.owd_us),
            jitter: r.jitter_us,
            lsr: SimTime(r.lsr_us),
            dlsr: SimTime(r.dlsr_us),
            is_early: r.is_early,
        };
        let m = &*meas;
        let meas = ReportMeasurement {
            sending_rate: BitRate(m.sending_rate_bps),
            goodput: BitRate(m.goodput_bps),
            fec_rate: BitRate(m.fec_rate_bps),
            probe_fec_rate: BitRate(m.probe_fec_rate_bps),
        };
        match (*ctrl).inner.on_report(SimTime(now_us), &report, meas) {
            ReportOutcome::Ignored => FbraStatus::Ignored,
            ReportOutcome::Decision(d) => {
                *out = decision_out(&d);
                FbraStatus::Ok
            }
        }
    })
}

/// Checks the feedback timeout. Writes `out` and returns `FBRA_STATUS_OK`
/// when the rate was cut, `FBRA_STATUS_NO_DECISION` otherwise.
///
/// # Safety
/// `ctrl` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fbra_controller_on_tick(
    ctrl: *mut FbraController,
    now_us: u64,
    out: *mut FbraDecision,
) -> FbraStatus {
    guard(|| {
        if ctrl.is_null() || out.is_null() {
            return fail(FbraStatus::NullPointer, "NULL argument");
        }
        match (*ctrl).inner.on_tick(SimTime(now_us)) {
            Some(d) => {
                *out = decision_out(&d);
                FbraStatus::Ok
            }
            None => FbraStatus::NoDecision,
        }
    })
}

/// # Safety
/// `ctrl` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn fbra_controller_state(ctrl: *const FbraController) -> FbraState {
    state_out((*ctrl).inner.state())
}

/// # Safety
/// `ctrl` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn fbra_controller_target_rate_bps(ctrl: *const FbraController) -> u64 {
    (*ctrl).inner.target_rate().bps()
}

/// # Safety
/// `ctrl` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn fbra_controller_fec_enabled(ctrl: *const FbraController) -> bool {
    (*ctrl).inner.fec_enabled()
}

/// # Safety
/// `ctrl` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn fbra_controller_fec_interval(ctrl: *const FbraController) -> u8 {
    (*ctrl).inner.fec_interval()
}

/// Rate after congestion for the given sending rate and goodput.
#[no_mangle]
pub extern "C" fn fbra_undershoot_bps(sending_rate_bps: u64, goodput_bps: u64) -> u64 {
    fbra_core::controller::undershoot(BitRate(sending_rate_bps), BitRate(goodput_bps)).bps()
}

/// Rate restored after a pause. Returns false (and leaves `out` alone) when
/// the report after the pause was not clean.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fbra_bounce_back_bps(stored_goodput_bps: u64, report_clean: bool, out: *mut u64) -> bool {
    if out.is_null() {
        return false;
    }
    match bounce_back(BitRate(stored_goodput_bps), report_clean) {
        Some(r) => {
            *out = r.bps();
            true
        }
        None => false,
    }
}

/// Whether 16-bit sequence number `a` comes after `b`, modulo wraparound.
#[no_mangle]
pub extern "C" fn fbra_seq_after(a: u16, b: u16) -> bool {
    seq_after(a, b)
}

unsafe fn media_in(p: &FbraMediaPacket) -> Option<MediaPacket> {
    let payload = items(p.payload, p.payload_len)?.to_vec();
    Some(MediaPacket {
        ssrc: p.ssrc,
        seq: p.seq,
        frame_id: p.frame_id,
        frame_ts: SimTime(p.frame_ts_us),
        send_ts: SimTime(p.send_ts_us),
        payload,
        is_fragment: p.is_fragment,
        fragment_index: p.fragment_index,
        fragment_count: p.fragment_count,
    })
}

/// Builds a parity packet over `count` (2..14) consecutive packets.
///
/// # Safety
/// `packets` must point to `count` packets with valid payload pointers;
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fbra_fec_encode(
    packets: *const FbraMediaPacket,
    count: usize,
    send_ts_us: u64,
    out: *mut *mut FbraFecPacket,
) -> FbraStatus {
    guard(|| {
        if out.is_null() {
            return fail(FbraStatus::NullPointer, "out is NULL");
        }
        let Some(src) = items(packets, count) else {
            return fail(FbraStatus::NullPointer, "packets is NULL");
        };
        let Some(block) = src.iter().map(|p| media_in(p)).collect::<Option<Vec<_>>>() else {
            return fail(FbraStatus::NullPointer, "payload is NULL with nonzero length");
        };
        match encode_block(&block, SimTime(send_ts_us)) {
            Ok(fec) => {
                *out = Box::into_raw(Box::new(FbraFecPacket { inner: fec }));
                FbraStatus::Ok
            }
            Err(e) => fail(FbraStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `fec` must be NULL or a handle from [`fbra_fec_encode`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fbra_fec_free(fec: *mut FbraFecPacket) {
    if !fec.is_null() {
        drop(Box::from_raw(fec));
    }
}

/// Number of media packets the parity packet covers.
///
/// # Safety
/// `fec` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn fbra_fec_block_len(fec: *const FbraFecPacket) -> u8 {
    (*fec).inner.block_len
}

/// Bytes on the wire, header included.
///
/// # Safety
/// `fec` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn fbra_fec_wire_size(fec: *const FbraFecPacket) -> usize {
    (*fec).inner.wire_size()
}

/// Rebuilds the one packet of the block missing from `received`. On success
/// the payload is copied into `buf` and `out.payload` points at it.
///
/// # Safety
/// `fec` must be a valid handle, `received` must hold `count` packets with
/// valid payloads, `buf` must have `buf_len` writable bytes and `out` must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn fbra_fec_recover(
    fec: *const FbraFecPacket,
    received: *const FbraMediaPacket,
    count: usize,
    buf: *mut u8,
    buf_len: usize,
    out: *mut FbraMediaPacket,
) -> FbraStatus {
    guard(|| {
        if fec.is_null() || out.is_null() {
            return fail(FbraStatus::NullPointer, "NULL argument");
        }
        let Some(src) = items(received, count) else {
            return fail(FbraStatus::NullPointer, "received is NULL");
        };
        let mut st = FecBlockState::new((*fec).inner.clone(), SimTime(u64::MAX));
        for p in src {
            let Some(m) = media_in(p) else {
                return fail(FbraStatus::NullPointer, "payload is NULL with nonzero length");
            };
            st.insert(m);
        }
        let Some(pkt) = try_recover(&st, SimTime::ZERO) else {
            return fail(FbraStatus::NotRecoverable, "block does not have exactly one missing packet");
        };
        if pkt.payload.len() > buf_len || (buf.is_null() && !pkt.payload.is_empty()) {
            return fail(
                FbraStatus::BufferTooSmall,
                format!("payload needs {} bytes", pkt.payload.len()),
            );
        }
        if !pkt.payload.is_empty() {
            ptr::copy_nonoverlapping(pkt.payload.as_ptr(), buf, pkt.payload.len());
        }
        *out = FbraMediaPacket {
            ssrc: pkt.ssrc,
            seq: pkt.seq,
            frame_id: pkt.frame_id,
            frame_ts_us: pkt.frame_ts.as_micros(),
            send_ts_us: pkt.send_ts.as_micros(),
            payload: buf,
            payload_len: pkt.payload.len(),
            is_fragment: pkt.is_fragment,
            fragment_index: pkt.fragment_index,
            fragment_count: pkt.fragment_count,
        };
        FbraStatus::Ok
    })
}

/// Runs a scenario given as config text with the given seed and returns its
/// metrics summary as a JSON string, to be released with
/// [`fbra_string_free`]. A schedule file path in the text is resolved
/// against `base_dir` (NULL means the working directory).
///
/// # Safety
/// `config` must be a NUL-terminated string, `base_dir` NULL or one, and
/// `out_json` valid.
#[no_mangle]
pub unsafe extern "C" fn fbra_run_scenario(
    config: *const c_char,
    base_dir: *const c_char,
    seed: u64,
    out_json: *mut *mut c_char,
) -> FbraStatus {
    guard(|| {
        if config.is_null() || out_json.is_null() {
            return fail(FbraStatus::NullPointer, "NULL argument");
        }
        let Ok(text) = CStr::from_ptr(config).to_str() else {
            return fail(FbraStatus::InvalidArgument, "config is not UTF-8");
        };
        let base = if base_dir.is_null() {
            "."
        } else {
            match CStr::from_ptr(base_dir).to_str() {
                Ok(s) => s,
                Err(_) => return fail(FbraStatus::InvalidArgument, "base_dir is not UTF-8"),
            }
        };
        let scenario = match fbra_core::netsim::Scenario::parse_config(text, Path::new(base)) {
            Ok(s) => s.with_seed(seed),
            Err(e) => return fail(FbraStatus::Config, e.to_string()),
        };
        let trace = match fbra_core::netsim::run(&scenario) {
            Ok(t) => t,
            Err(e) => return fail(FbraStatus::Runtime, e.to_string()),
        };
        let summary = fbra_core::metrics::summarize(&trace);
        let json = match serde_json::to_string(&summary) {
            Ok(j) => j,
            Err(e) => return fail(FbraStatus::Runtime, e.to_string()),
        };
        match CString::new(json) {
            Ok(c) => {
                *out_json = c.into_raw();
                FbraStatus::Ok
            }
            Err(e) => fail(FbraStatus::Runtime, e.to_string()),
        }
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fbra_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
