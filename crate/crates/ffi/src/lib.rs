//! C ABI over the beaconquiz core.
//!
//! Every object is an opaque handle created by a `bq_*_new` function and
//! released by the matching `bq_*_free`. Every fallible call returns a
//! [`BqStatus`]; on failure `bq_last_error` describes what went wrong on the
//! calling thread. Handles are not thread-safe; use each from one thread at
//! a time.

use std::cell::RefCell;
use std::collections::VecDeque;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uuid::Uuid;

use beaconquiz::game::{GameEvent, GameState, Phase, QuestionBank};
use beaconquiz::localization::{self, LocalizationFrame, SelectionPolicy};
use beaconquiz::pipeline::{FilterSet, Rejection};
use beaconquiz::room::{Corner, Point, PropagationParams, RoomModel};
use beaconquiz::scanlog::RssiSample;
use beaconquiz::server::bundled_question_bank;
use beaconquiz::sim::{self, PlayerPath, Simulator};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The sample's UUID does not belong to any beacon of the room.
    UnknownBeacon = 3,
    /// The sample is older than the last one accepted for its beacon.
    OutOfOrder = 4,
    /// The event is not allowed in the current game phase.
    IllegalTransition = 5,
    /// The output buffer is too small; the required size was written.
    BufferTooSmall = 6,
    Internal = 99,
}

/// Game phase as seen through the C ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BqPhase {
    Idle = 0,
    QuestionShown = 1,
    AnswerHighlighted = 2,
    Feedback = 3,
    Won = 4,
    GameOver = 5,
}

/// One received advertisement.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BqSample {
    pub ts_ms: u64,
    /// 0 = NW, 1 = NE, 2 = SW, 3 = SE.
    pub beacon_id: u8,
    pub uuid: [u8; 16],
    pub rssi_dbm: f64,
}

/// Output of one localization step.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BqFrame {
    pub ts_ms: u64,
    /// Selected corner, or -1.
    pub selected: i32,
    /// Normalized room coordinates.
    pub x: f64,
    pub y: f64,
    pub distances: [f64; 4],
    pub confidences: [f64; 4],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BqGameView {
    pub phase: BqPhase,
    pub question_index: u32,
    pub question_count: u32,
    pub score_level: u32,
    /// Highlighted corner, or -1.
    pub highlighted: i32,
    /// 1 or 0 in the feedback phase, -1 otherwise.
    pub feedback_correct: i32,
}

pub struct BqRoom {
    room: RoomModel,
}

pub struct BqSimulator {
    sim: Simulator,
    path: PlayerPath,
    pending: VecDeque<RssiSample>,
}

pub struct BqTracker {
    room: RoomModel,
    policy: SelectionPolicy,
    filters: FilterSet,
    frame: LocalizationFrame,
}

pub struct BqGame {
    bank: QuestionBank,
    state: GameState,
    rng: ChaCha8Rng,
    shuffle: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: BqStatus, msg: impl Into<String>) -> BqStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> BqStatus) -> BqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(BqStatus::Internal, "internal panic"),
    }
}

macro_rules! deref {
    ($p:expr) => {
        match unsafe { $p.as_ref() } {
            Some(v) => v,
            None => return fail(BqStatus::NullPointer, concat!(stringify!($p), " is null")),
        }
    };
    (mut $p:expr) => {
        match unsafe { $p.as_mut() } {
            Some(v) => v,
            None => return fail(BqStatus::NullPointer, concat!(stringify!($p), " is null")),
        }
    };
}

fn boxed<T>(out: *mut *mut T, value: T) -> BqStatus {
    unsafe { *out = Box::into_raw(Box::new(value)) };
    BqStatus::Ok
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

fn corner_arg(corner: i32) -> Result<Option<Corner>, BqStatus> {
    match corner {
        -1 => Ok(None),
        0..=3 => Ok(Corner::new(corner as u8)),
        _ => Err(fail(BqStatus::InvalidArgument, format!("corner {corner} is not in -1..=3"))),
    }
}

/// Copies `text` plus a NUL into `buf`. `len` receives the length without
/// the NUL, also when the buffer is too small.
fn copy_str(text: &str, buf: *mut c_char, cap: usize, len: *mut usize) -> BqStatus {
    if !len.is_null() {
        unsafe { *len = text.len() };
    }
    if text.len() + 1 > cap || buf.is_null() {
        return fail(BqStatus::BufferTooSmall, format!("need {} bytes", text.len() + 1));
    }
    unsafe {
        ptr::copy_nonoverlapping(text.as_ptr(), buf.cast::<u8>(), text.len());
        *buf.add(text.len()) = 0;
    }
    BqStatus::Ok
}

/// Message for the last failed call on this thread. Valid until the next
/// failing call on the same thread. Never null.
#[no_mangle]
pub extern "C" fn bq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Noise-free received power at `distance_m` from a beacon.
#[no_mangle]
pub extern "C" fn bq_mean_rssi(tx_power_1m: f64, path_loss_exponent: f64, d_min: f64, distance_m: f64) -> f64 {
    sim::mean_rssi(tx_power_1m, path_loss_exponent, d_min, distance_m)
}

// ---------------------------------------------------------------- room

/// Rectangular room with a beacon at each corner and default UUIDs.
///
/// # Safety
/// `out` must be a valid pointer to write a handle into.
#[no_mangle]
pub unsafe extern "C" fn bq_room_new(
    width_m: f64,
    depth_m: f64,
    tx_power_1m: f64,
    path_loss_exponent: f64,
    noise_sigma: f64,
    advertise_interval_ms: u64,
    out: *mut *mut BqRoom,
) -> BqStatus {
    guard(|| {
        if out.is_null() {
            return fail(BqStatus::NullPointer, "out is null");
        }
        let params = PropagationParams {
            path_loss_exponent,
            noise_sigma,
            ..PropagationParams::default()
        };
        match RoomModel::with_beacon_defaults(width_m, depth_m, params, tx_power_1m, advertise_interval_ms) {
            Ok(room) => boxed(out, BqRoom { room }),
            Err(e) => fail(BqStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Copies the 16 UUID bytes of beacon `corner` into `out`.
///
/// # Safety
/// `room` must come from `bq_room_new`; `out` must hold 16 bytes.
#[no_mangle]
pub unsafe extern "C" fn bq_room_beacon_uuid(room: *const BqRoom, corner: i32, out: *mut u8) -> BqStatus {
    guard(|| {
        let room = deref!(room);
        if out.is_null() {
            return fail(BqStatus::NullPointer, "out is null");
        }
        let Ok(Some(c)) = corner_arg(corner) else {
            return fail(BqStatus::InvalidArgument, format!("corner {corner} is not in 0..=3"));
        };
        let bytes = room.room.beacon(c).uuid.into_bytes();
        unsafe { ptr::copy_nonoverlapping(bytes.as_ptr(), out, 16) };
        BqStatus::Ok
    })
}

/// # Safety
/// `room` must come from `bq_room_new` or be null.
#[no_mangle]
pub unsafe extern "C" fn bq_room_free(room: *mut BqRoom) {
    unsafe { free(room) }
}

// ---------------------------------------------------------------- simulator

/// Simulator for `room` with the player standing in the center. The room
/// is copied; the room handle may be freed afterwards.
///
/// # Safety
/// `room` must come from `bq_room_new`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bq_simulator_new(room: *const BqRoom, seed: u64, out: *mut *mut BqSimulator) -> BqStatus {
    guard(|| {
        let room = deref!(room);
        if out.is_null() {
            return fail(BqStatus::NullPointer, "out is null");
        }
        let room = room.room.clone();
        let path = PlayerPath::stationary(room.center());
        boxed(
            out,
            BqSimulator {
                sim: Simulator::new(room, seed),
                path,
                pending: VecDeque::new(),
            },
        )
    })
}

/// Places the player at (`x_m`, `y_m`) from the current simulated time on.
///
/// # Safety
/// `sim` must come from `bq_simulator_new`.
#[no_mangle]
pub unsafe extern "C" fn bq_simulator_set_position(sim: *mut BqSimulator, x_m: f64, y_m: f64) -> BqStatus {
    guard(|| {
        let sim = deref!(mut sim);
        let p = Point::new(x_m, y_m);
        if !sim.sim.room().contains(p) {
            return fail(BqStatus::InvalidArgument, format!("({x_m}, {y_m}) is outside the room"));
        }
        sim.path = PlayerPath::stationary(p);
        BqStatus::Ok
    })
}

/// Advances the clock to `until_ms` and queues every broadcast in between.
/// `queued` receives the number of samples waiting to be drained.
///
/// # Safety
/// `sim` must come from `bq_simulator_new`; `queued` may be null.
#[no_mangle]
pub unsafe extern "C" fn bq_simulator_advance(sim: *mut BqSimulator, until_ms: u64, queued: *mut usize) -> BqStatus {
    guard(|| {
        let sim = deref!(mut sim);
        match sim.sim.advance(&sim.path, until_ms) {
            Ok(samples) => {
                sim.pending.extend(samples);
                if !queued.is_null() {
                    unsafe { *queued = sim.pending.len() };
                }
                BqStatus::Ok
            }
            Err(e) => fail(BqStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Moves up to `cap` queued samples into `buf`, oldest first.
///
/// # Safety
/// `buf` must hold `cap` samples; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bq_simulator_drain(
    sim: *mut BqSimulator,
    buf: *mut BqSample,
    cap: usize,
    written: *mut usize,
) -> BqStatus {
    guard(|| {
        let sim = deref!(mut sim);
        if written.is_null() || (buf.is_null() && cap > 0) {
            return fail(BqStatus::NullPointer, "buf or written is null");
        }
        let n = cap.min(sim.pending.len());
        for (i, s) in sim.pending.drain(..n).enumerate() {
            unsafe {
                *buf.add(i) = BqSample {
                    ts_ms: s.ts_ms,
                    beacon_id: s.beacon_id.id(),
                    uuid: s.uuid.into_bytes(),
                    rssi_dbm: s.rssi_dbm,
                }
            };
        }
        unsafe { *written = n };
        BqStatus::Ok
    })
}

/// # Safety
/// `sim` must come from `bq_simulator_new` or be null.
#[no_mangle]
pub unsafe extern "C" fn bq_simulator_free(sim: *mut BqSimulator) {
    unsafe { free(sim) }
}

// ---------------------------------------------------------------- tracker

/// Signal filters plus corner selection for `room`, with the default
/// selection policy.
///
/// # Safety
/// `room` must come from `bq_room_new`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bq_tracker_new(room: *const BqRoom, window_size: usize, out: *mut *mut BqTracker) -> BqStatus {
    guard(|| {
        let room = deref!(room);
        if out.is_null() {
            return fail(BqStatus::NullPointer, "out is null");
        }
        match FilterSet::for_room(&room.room, window_size) {
            Ok(filters) => boxed(
                out,
                BqTracker {
                    room: room.room.clone(),
                    policy: SelectionPolicy::default(),
                    filters,
                    frame: LocalizationFrame::initial(),
                },
            ),
            Err(e) => fail(BqStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Overrides the selection thresholds (meters) and the minimum confidence.
///
/// # Safety
/// `tracker` must come from `bq_tracker_new`.
#[no_mangle]
pub unsafe extern "C" fn bq_tracker_set_policy(
    tracker: *mut BqTracker,
    enter_threshold_m: f64,
    exit_threshold_m: f64,
    min_confidence: f64,
) -> BqStatus {
    guard(|| {
        let tracker = deref!(mut tracker);
        let policy = SelectionPolicy {
            enter_threshold: enter_threshold_m,
            exit_threshold: exit_threshold_m,
            min_confidence,
            ..tracker.policy
        };
        if let Err(e) = policy.validate() {
            return fail(BqStatus::InvalidArgument, e.to_string());
        }
        tracker.policy = policy;
        BqStatus::Ok
    })
}

/// Feeds one sample. Samples for unknown UUIDs or older than the last
/// accepted one for their beacon are rejected and leave the state alone.
///
/// # Safety
/// `tracker` must come from `bq_tracker_new`; `sample` must be readable.
#[no_mangle]
pub unsafe extern "C" fn bq_tracker_push(tracker: *mut BqTracker, sample: *const BqSample) -> BqStatus {
    guard(|| {
        let tracker = deref!(mut tracker);
        let s = deref!(sample);
        let Some(beacon_id) = Corner::new(s.beacon_id) else {
            return fail(BqStatus::InvalidArgument, format!("beacon id {} is not in 0..=3", s.beacon_id));
        };
        if !s.rssi_dbm.is_finite() {
            return fail(BqStatus::InvalidArgument, "rssi is not finite");
        }
        let sample = RssiSample {
            ts_ms: s.ts_ms,
            beacon_id,
            uuid: Uuid::from_bytes(s.uuid),
            rssi_dbm: s.rssi_dbm,
        };
        match tracker.filters.push_sample(&sample) {
            Ok(_) => BqStatus::Ok,
            Err(Rejection::UnknownBeacon) => fail(BqStatus::UnknownBeacon, "unknown beacon uuid"),
            Err(Rejection::OutOfOrder) => fail(BqStatus::OutOfOrder, "sample older than the last one"),
        }
    })
}

/// Runs one localization step at `now_ms` and writes the result to `out`.
///
/// # Safety
/// `tracker` must come from `bq_tracker_new`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bq_tracker_tick(tracker: *mut BqTracker, now_ms: u64, out: *mut BqFrame) -> BqStatus {
    guard(|| {
        let tracker = deref!(mut tracker);
        let out = deref!(mut out);
        tracker.frame = localization::tick(
            &tracker.filters.signals(),
            &tracker.room,
            &tracker.policy,
            &tracker.frame,
            now_ms,
        );
        let f = &tracker.frame;
        *out = BqFrame {
            ts_ms: f.ts,
            selected: f.selection.selected.map_or(-1, |c| c.id() as i32),
            x: f.position.x,
            y: f.position.y,
            distances: f.distances.map(|d| d.distance),
            confidences: f.distances.map(|d| d.confidence),
        };
        BqStatus::Ok
    })
}

/// Clears all filter windows and the selection.
///
/// # Safety
/// `tracker` must come from `bq_tracker_new`.
#[no_mangle]
pub unsafe extern "C" fn bq_tracker_reset(tracker: *mut BqTracker) -> BqStatus {
    guard(|| {
        let tracker = deref!(mut tracker);
        tracker.filters.reset();
        tracker.frame = LocalizationFrame {
            ts: tracker.frame.ts,
            ..LocalizationFrame::initial()
        };
        BqStatus::Ok
    })
}

/// # Safety
/// `tracker` must come from `bq_tracker_new` or be null.
#[no_mangle]
pub unsafe extern "C" fn bq_tracker_free(tracker: *mut BqTracker) {
    unsafe { free(tracker) }
}

// ---------------------------------------------------------------- game

fn new_game(bank: QuestionBank, seed: u64, shuffle: bool, out: *mut *mut BqGame) -> BqStatus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match GameState::start(&bank, &mut rng, shuffle) {
        Ok(state) => boxed(
            out,
            BqGame {
                bank,
                state,
                rng,
                shuffle,
            },
        ),
        Err(e) => fail(BqStatus::InvalidArgument, e.to_string()),
    }
}

/// Game over the bundled fifteen-question bank, showing its first question.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bq_game_new_bundled(seed: u64, shuffle: bool, out: *mut *mut BqGame) -> BqStatus {
    guard(|| {
        if out.is_null() {
            return fail(BqStatus::NullPointer, "out is null");
        }
        new_game(bundled_question_bank(), seed, shuffle, out)
    })
}

/// Game over a question bank given as a JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bq_game_new_from_json(
    json: *const c_char,
    seed: u64,
    shuffle: bool,
    out: *mut *mut BqGame,
) -> BqStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(BqStatus::NullPointer, "json or out is null");
        }
        let Ok(text) = unsafe { CStr::from_ptr(json) }.to_str() else {
            return fail(BqStatus::InvalidArgument, "question bank is not UTF-8");
        };
        match QuestionBank::from_json_str(text) {
            Ok(bank) => new_game(bank, seed, shuffle, out),
            Err(e) => fail(BqStatus::InvalidArgument, e.to_string()),
        }
    })
}

fn apply(game: &mut BqGame, event: GameEvent) -> BqStatus {
    match game.state.apply(&game.bank, event) {
        Ok(next) => {
            game.state = next;
            BqStatus::Ok
        }
        Err(e) => fail(BqStatus::IllegalTransition, e.to_string()),
    }
}

/// Highlights `corner` (0..=3), or clears the highlight with -1. Ignored
/// outside the question phases.
///
/// # Safety
/// `game` must come from a `bq_game_new_*` function.
#[no_mangle]
pub unsafe extern "C" fn bq_game_select(game: *mut BqGame, corner: i32) -> BqStatus {
    guard(|| {
        let game = deref!(mut game);
        match corner_arg(corner) {
            Ok(c) => apply(game, GameEvent::Select(c)),
            Err(status) => status,
        }
    })
}

/// # Safety
/// `game` must come from a `bq_game_new_*` function.
#[no_mangle]
pub unsafe extern "C" fn bq_game_confirm(game: *mut BqGame) -> BqStatus {
    guard(|| apply(deref!(mut game), GameEvent::Confirm))
}

/// # Safety
/// `game` must come from a `bq_game_new_*` function.
#[no_mangle]
pub unsafe extern "C" fn bq_game_advance(game: *mut BqGame) -> BqStatus {
    guard(|| apply(deref!(mut game), GameEvent::Advance))
}

/// Starts a new game with fresh answer placements.
///
/// # Safety
/// `game` must come from a `bq_game_new_*` function.
#[no_mangle]
pub unsafe extern "C" fn bq_game_restart(game: *mut BqGame) -> BqStatus {
    guard(|| {
        let game = deref!(mut game);
        match GameState::start(&game.bank, &mut game.rng, game.shuffle) {
            Ok(state) => {
                game.state = state;
                BqStatus::Ok
            }
            Err(e) => fail(BqStatus::Internal, e.to_string()),
        }
    })
}

/// # Safety
/// `game` must come from a `bq_game_new_*` function; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bq_game_view(game: *const BqGame, out: *mut BqGameView) -> BqStatus {
    guard(|| {
        let game = deref!(game);
        let out = deref!(mut out);
        let s = &game.state;
        let (phase, feedback) = match s.phase() {
            Phase::Idle => (BqPhase::Idle, -1),
            Phase::QuestionShown => (BqPhase::QuestionShown, -1),
            Phase::AnswerHighlighted { .. } => (BqPhase::AnswerHighlighted, -1),
            Phase::Feedback { correct } => (BqPhase::Feedback, correct as i32),
            Phase::Won => (BqPhase::Won, -1),
            Phase::GameOver => (BqPhase::GameOver, -1),
        };
        *out = BqGameView {
            phase,
            question_index: s.question_index() as u32,
            question_count: game.bank.len() as u32,
            score_level: s.score_level() as u32,
            highlighted: s.highlighted().map_or(-1, |c| c.id() as i32),
            feedback_correct: feedback,
        };
        BqStatus::Ok
    })
}

/// Copies the current question text into `buf`.
///
/// # Safety
/// `buf` must hold `cap` bytes; `len` may be null.
#[no_mangle]
pub unsafe extern "C" fn bq_game_question_text(
    game: *const BqGame,
    buf: *mut c_char,
    cap: usize,
    len: *mut usize,
) -> BqStatus {
    guard(|| {
        let game = deref!(game);
        match game.bank.question(game.state.question_index()) {
            Some(q) => copy_str(&q.text, buf, cap, len),
            None => fail(BqStatus::Internal, "no current question"),
        }
    })
}

/// Copies the answer shown at `corner` for the current question.
///
/// # Safety
/// `buf` must hold `cap` bytes; `len` may be null.
#[no_mangle]
pub unsafe extern "C" fn bq_game_answer_text(
    game: *const BqGame,
    corner: i32,
    buf: *mut c_char,
    cap: usize,
    len: *mut usize,
) -> BqStatus {
    guard(|| {
        let game = deref!(game);
        let Ok(Some(c)) = corner_arg(corner) else {
            return fail(BqStatus::InvalidArgument, format!("corner {corner} is not in 0..=3"));
        };
        let (Some(q), Some(mapping)) = (game.bank.question(game.state.question_index()), game.state.answers_mapping())
        else {
            return fail(BqStatus::IllegalTransition, "no question is shown");
        };
        copy_str(&q.answers[mapping[c.index()] as usize], buf, cap, len)
    })
}

/// Corner holding the correct answer of the current question, or -1.
///
/// # Safety
/// `game` must come from a `bq_game_new_*` function; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bq_game_correct_corner(game: *const BqGame, out: *mut i32) -> BqStatus {
    guard(|| {
        let game = deref!(game);
        let out = deref!(mut out);
        *out = game.state.correct_corner(&game.bank).map_or(-1, |c| c.id() as i32);
        BqStatus::Ok
    })
}

/// # Safety
/// `game` must come from a `bq_game_new_*` function or be null.
#[no_mangle]
pub unsafe extern "C" fn bq_game_free(game: *mut BqGame) {
    unsafe { free(game) }
}
