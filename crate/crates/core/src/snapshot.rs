//! Immutable view of one tick, as pushed to clients.

use serde::Serialize;

use crate::game::{GameState, Phase, QuestionBank};
use crate::localization::LocalizationFrame;
use crate::pipeline::FilteredSignal;
use crate::room::{Corner, CornerLabel, Point, RoomModel, CORNER_COUNT};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnswerView {
    pub corner: Corner,
    pub text: String,
    pub color: String,
    pub number: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionView {
    pub index: usize,
    pub id: String,
    pub text: String,
    /// Indexed by corner.
    pub answers: Vec<AnswerView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderView {
    pub rungs: Vec<String>,
    /// Rung currently being played for, if a question is on screen.
    pub current: Option<usize>,
    pub score_level: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeaconView {
    pub beacon_id: Corner,
    pub mean_rssi: Option<f64>,
    pub distance: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateSnapshot {
    pub seq: u64,
    pub ts_ms: u64,
    pub phase: &'static str,
    pub feedback_correct: Option<bool>,
    pub question: Option<QuestionView>,
    pub ladder: LadderView,
    pub highlighted: Option<Corner>,
    pub position: Point,
    pub beacons: Vec<BeaconView>,
    pub corners: Vec<CornerLabel>,
    pub score_level: usize,
}

impl StateSnapshot {
    pub fn build(
        seq: u64,
        game: &GameState,
        bank: &QuestionBank,
        frame: &LocalizationFrame,
        signals: &[Option<FilteredSignal>; CORNER_COUNT],
        room: &RoomModel,
    ) -> Self {
        let phase = game.phase();
        let question = if game.has_question() {
            bank.question(game.question_index())
                .zip(game.answers_mapping())
                .map(|(q, mapping)| QuestionView {
                    index: game.question_index(),
                    id: q.id.clone(),
                    text: q.text.clone(),
                    answers: Corner::ALL
                        .iter()
                        .map(|&c| {
                            let label = &room.corner_labels[c.index()];
                            AnswerView {
                                corner: c,
                                text: q.answers[usize::from(mapping[c.index()])].clone(),
                                color: label.color.clone(),
                                number: label.number,
                            }
                        })
                        .collect(),
                })
        } else {
            None
        };
        let beacons = Corner::ALL
            .iter()
            .map(|&c| {
                let d = frame.distances[c.index()];
                BeaconView {
                    beacon_id: c,
                    mean_rssi: signals[c.index()].map(|s| s.mean_rssi),
                    distance: d.distance,
                    confidence: d.confidence,
                }
            })
            .collect();
        Self {
            seq,
            ts_ms: frame.ts,
            phase: phase.name(),
            feedback_correct: match phase {
                Phase::Feedback { correct } => Some(correct),
                _ => None,
            },
            ladder: LadderView {
                rungs: bank.ladder().to_vec(),
                current: question.as_ref().map(|q| q.index),
                score_level: game.score_level(),
            },
            question,
            highlighted: game.highlighted(),
            position: frame.position,
            beacons,
            corners: room.corner_labels.to_vec(),
            score_level: game.score_level(),
        }
    }
}
