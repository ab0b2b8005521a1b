//! The deterministic core loop: sample source -> filters -> localization
//! -> quiz, advanced one fixed tick at a time on a virtual clock.
//!
//! Tick `k` runs at `k * period` ms. Within a tick the order is fixed:
//! start a game if idle, ingest samples, localize, apply the selection,
//! apply queued control events, handle feedback auto-advance, snapshot.
//! Everything the engine consumes can be recorded, and a recording fed back
//! through [`Source::Replay`] reproduces the snapshot stream exactly.

use std::collections::VecDeque;
use std::io::{self, Write};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;
use tracing::debug;

use crate::config::{AppConfig, ConfigError, Mode};
use crate::game::{GameState, Phase, QuestionBank};
use crate::localization::{self, LocalizationFrame, SelectionPolicy};
use crate::pipeline::{FilterSet, PipelineError};
use crate::protocol::{admit, ControlEvent};
use crate::room::{Point, RoomModel};
use crate::scanlog::RssiSample;
use crate::session::{Session, SessionEntry, SessionEvent, SessionHeader, SessionRecorder};
use crate::sim::{PlayerPath, SimError, Simulator, Trajectory};
use crate::snapshot::StateSnapshot;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("rejected: {0}")]
    Rejected(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("session recording failed: {0}")]
    Record(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineOptions {
    pub room: RoomModel,
    pub policy: SelectionPolicy,
    pub window_size: usize,
    pub tick_period_ms: u64,
    pub shuffle_answers: bool,
    pub feedback_auto_advance_ms: u64,
    pub walk_speed_mps: f64,
    pub seed: u64,
}

impl EngineOptions {
    pub fn from_config(cfg: &AppConfig) -> Result<Self, ConfigError> {
        Ok(Self {
            room: cfg.room_model()?,
            policy: cfg.policy,
            window_size: cfg.window_size,
            tick_period_ms: cfg.tick_period_ms(),
            shuffle_answers: cfg.shuffle_answers,
            feedback_auto_advance_ms: cfg.feedback_auto_advance_ms,
            walk_speed_mps: cfg.walk_speed_mps,
            seed: cfg.seed,
        })
    }

    /// Header describing a recording made with these options.
    pub fn session_header(&self) -> SessionHeader {
        SessionHeader::new(
            self.seed,
            (1000 / self.tick_period_ms.max(1)) as u32,
            self.shuffle_answers,
            self.feedback_auto_advance_ms,
        )
    }

    /// Adopts the run parameters stored in a recording's header.
    pub fn apply_header(&mut self, header: &SessionHeader) {
        self.seed = header.seed;
        self.tick_period_ms = (1000 / u64::from(header.tick_rate_hz.max(1))).max(1);
        self.shuffle_answers = header.shuffle_answers;
        self.feedback_auto_advance_ms = header.feedback_auto_advance_ms;
    }
}

pub enum Source {
    /// Simulated beacons; the player walks toward the last `move` target.
    Sim { sim: Simulator, path: PlayerPath },
    /// Recorded samples and events, consumed by timestamp.
    Replay { entries: VecDeque<SessionEntry> },
    /// Samples pushed in by the caller, stamped with the tick that drains them.
    Live { inbox: Vec<RssiSample> },
}

impl Source {
    pub fn sim(room: &RoomModel, seed: u64) -> Self {
        Source::Sim {
            sim: Simulator::new(room.clone(), seed),
            path: PlayerPath::stationary(room.center()),
        }
    }

    pub fn replay(session: Session) -> Self {
        Source::Replay {
            entries: session.entries.into(),
        }
    }

    pub fn live() -> Self {
        Source::Live { inbox: Vec::new() }
    }

    pub fn mode(&self) -> Mode {
        match self {
            Source::Sim { .. } => Mode::Sim,
            Source::Replay { .. } => Mode::Replay,
            Source::Live { .. } => Mode::Live,
        }
    }
}

type BoxedRecorder = SessionRecorder<Box<dyn Write + Send>>;

pub struct Engine {
    opts: EngineOptions,
    bank: Arc<QuestionBank>,
    filters: FilterSet,
    frame: LocalizationFrame,
    game: GameState,
    game_rng: ChaCha8Rng,
    feedback_since: Option<u64>,
    now_ms: u64,
    seq: u64,
    source: Source,
    queued: VecDeque<ControlEvent>,
    recorder: Option<BoxedRecorder>,
}

impl Engine {
    pub fn new(opts: EngineOptions, bank: Arc<QuestionBank>, source: Source) -> Result<Self, EngineError> {
        let filters = FilterSet::for_room(&opts.room, opts.window_size)?;
        // Separate stream from the simulator's so answer shuffles do not
        // depend on how many radio draws happened.
        let mut game_rng = ChaCha8Rng::seed_from_u64(opts.seed);
        game_rng.set_stream(1);
        Ok(Self {
            opts,
            bank,
            filters,
            frame: LocalizationFrame::initial(),
            game: GameState::idle(),
            game_rng,
            feedback_since: None,
            now_ms: 0,
            seq: 0,
            source,
            queued: VecDeque::new(),
            recorder: None,
        })
    }

    pub fn record_to(&mut self, sink: Box<dyn Write + Send>) -> Result<(), EngineError> {
        self.recorder = Some(SessionRecorder::new(sink, &self.opts.session_header())?);
        Ok(())
    }

    pub fn flush_recording(&mut self) -> Result<(), EngineError> {
        if let Some(rec) = &mut self.recorder {
            rec.flush()?;
        }
        Ok(())
    }

    pub fn mode(&self) -> Mode {
        self.source.mode()
    }

    pub fn options(&self) -> &EngineOptions {
        &self.opts
    }

    pub fn bank(&self) -> &QuestionBank {
        &self.bank
    }

    pub fn game(&self) -> &GameState {
        &self.game
    }

    pub fn frame(&self) -> &LocalizationFrame {
        &self.frame
    }

    pub fn filters(&self) -> &FilterSet {
        &self.filters
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    /// True position of the simulated player, meters.
    pub fn player_position(&self) -> Option<Point> {
        match &self.source {
            Source::Sim { path, .. } => Some(path.position_at(self.now_ms)),
            _ => None,
        }
    }

    /// A replay with nothing left to consume.
    pub fn is_finished(&self) -> bool {
        matches!(&self.source, Source::Replay { entries } if entries.is_empty())
    }

    /// Queues a client control event for the next tick.
    pub fn submit(&mut self, event: ControlEvent) -> Result<(), EngineError> {
        admit(&event, self.mode()).map_err(EngineError::Rejected)?;
        self.queued.push_back(event);
        Ok(())
    }

    /// Hands a live-feed sample to the engine.
    pub fn feed_live(&mut self, sample: RssiSample) -> Result<(), EngineError> {
        match &mut self.source {
            Source::Live { inbox } => {
                inbox.push(sample);
                Ok(())
            }
            _ => Err(EngineError::Rejected("live samples are only accepted in live mode".into())),
        }
    }

    fn gather(&mut self, now: u64) -> Result<(Vec<RssiSample>, Vec<ControlEvent>), EngineError> {
        let mut events: Vec<ControlEvent> = Vec::new();
        let samples = match &mut self.source {
            Source::Sim { sim, path } => sim.advance(path, now)?,
            Source::Live { inbox } => inbox
                .drain(..)
                .map(|mut s| {
                    s.ts_ms = now;
                    s
                })
                .collect(),
            Source::Replay { entries } => {
                let mut samples = Vec::new();
                while entries.front().is_some_and(|e| e.ts_ms() <= now) {
                    match entries.pop_front().expect("front checked") {
                        SessionEntry::Sample(s) => samples.push(s),
                        SessionEntry::Event(e) => events.push(e.event),
                    }
                }
                samples
            }
        };
        events.extend(self.queued.drain(..));
        Ok((samples, events))
    }

    fn apply_event(&mut self, event: ControlEvent, now: u64) {
        let result = match event {
            ControlEvent::Move(target) => {
                if let Source::Sim { path, .. } = &mut self.source {
                    let target = self.opts.room.from_normalized(target);
                    path.retarget(now, target, self.opts.walk_speed_mps);
                }
                return;
            }
            ControlEvent::Confirm => self.game.confirm(&self.bank),
            ControlEvent::Advance => self.game.advance(&self.bank),
            ControlEvent::Reset => {
                self.filters.reset();
                self.frame = LocalizationFrame {
                    ts: now,
                    ..LocalizationFrame::initial()
                };
                self.feedback_since = None;
                Ok(self.game.reset_game())
            }
        };
        match result {
            Ok(next) => self.game = next,
            Err(e) => debug!(%e, "ignored control event"),
        }
    }

    /// Runs one tick and returns its snapshot.
    pub fn tick(&mut self) -> Result<StateSnapshot, EngineError> {
        let now = self.now_ms + self.opts.tick_period_ms;
        self.now_ms = now;

        if self.game.phase() == Phase::Idle {
            if let Ok(g) = GameState::start(&self.bank, &mut self.game_rng, self.opts.shuffle_answers) {
                self.game = g;
            }
        }

        let (samples, events) = self.gather(now)?;
        for s in &samples {
            if let Some(rec) = &mut self.recorder {
                rec.sample(s)?;
            }
            if let Err(why) = self.filters.push_sample(s) {
                debug!(?why, beacon = %s.beacon_id, "sample rejected");
            }
        }

        self.frame = localization::tick(
            &self.filters.signals(),
            &self.opts.room,
            &self.opts.policy,
            &self.frame,
            now,
        );
        self.game = self.game.apply_selection(self.frame.selection.selected);

        for event in events {
            if let Some(rec) = &mut self.recorder {
                rec.event(&SessionEvent { ts_ms: now, event })?;
            }
            self.apply_event(event, now);
        }

        match self.game.phase() {
            Phase::Feedback { .. } => {
                let since = *self.feedback_since.get_or_insert(now);
                let auto = self.opts.feedback_auto_advance_ms;
                if auto > 0 && now - since >= auto {
                    if let Ok(next) = self.game.advance(&self.bank) {
                        self.game = next;
                    }
                    self.feedback_since = None;
                }
            }
            _ => self.feedback_since = None,
        }

        self.seq += 1;
        Ok(self.snapshot())
    }

    /// Snapshot of the current state under the latest sequence number.
    pub fn snapshot(&self) -> StateSnapshot {
        StateSnapshot::build(
            self.seq,
            &self.game,
            &self.bank,
            &self.frame,
            &self.filters.signals(),
            &self.opts.room,
        )
    }
}

/// Runs a recorded session to its end without wall-clock pacing and returns
/// every snapshot produced.
pub fn replay_session(
    mut opts: EngineOptions,
    bank: Arc<QuestionBank>,
    session: Session,
    seed_override: Option<u64>,
) -> Result<Vec<StateSnapshot>, EngineError> {
    if let Some(h) = &session.header {
        opts.apply_header(h);
    }
    if let Some(seed) = seed_override {
        opts.seed = seed;
    }
    let mut engine = Engine::new(opts, bank, Source::replay(session))?;
    let mut out = Vec::new();
    while !engine.is_finished() {
        out.push(engine.tick()?);
    }
    Ok(out)
}
