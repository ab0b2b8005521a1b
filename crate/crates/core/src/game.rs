//! Quiz state machine in the style of the classic prize-ladder TV show.
//!
//! Each question's four answers are laid onto the four room corners by a
//! per-question permutation, so walking to a corner highlights the answer
//! placed there. A wrong confirmation ends the game.

use std::fmt;
use std::io::Read;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::room::{Corner, CORNER_COUNT};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    pub answers: [String; CORNER_COUNT],
    pub correct_index: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuestionBank {
    questions: Vec<Question>,
    ladder: Vec<String>,
}

#[derive(Debug, Error)]
pub enum BankError {
    #[error("question bank is not valid JSON: {0}")]
    Json(String),
    #[error("question bank is empty")]
    Empty,
    #[error("questions[{index}] ({id}): expected 4 answers, got {got}")]
    AnswerCount { index: usize, id: String, got: usize },
    #[error("questions[{index}] ({id}): correct_index {got} out of range 0-3")]
    CorrectIndex { index: usize, id: String, got: i64 },
    #[error("questions[{index}] ({id}): {field} must not be empty")]
    EmptyText { index: usize, id: String, field: String },
    #[error("ladder has {ladder} rungs but there are {questions} questions")]
    LadderLength { ladder: usize, questions: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBank {
    questions: Vec<RawQuestion>,
    #[serde(default)]
    ladder: Option<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuestion {
    id: String,
    text: String,
    answers: Vec<String>,
    correct_index: i64,
}

impl QuestionBank {
    pub fn new(questions: Vec<Question>, ladder: Vec<String>) -> Result<Self, BankError> {
        if questions.is_empty() {
            return Err(BankError::Empty);
        }
        if ladder.len() != questions.len() {
            return Err(BankError::LadderLength {
                ladder: ladder.len(),
                questions: questions.len(),
            });
        }
        for (index, q) in questions.iter().enumerate() {
            if q.correct_index as usize >= CORNER_COUNT {
                return Err(BankError::CorrectIndex {
                    index,
                    id: q.id.clone(),
                    got: i64::from(q.correct_index),
                });
            }
            let empty = |field: String| BankError::EmptyText {
                index,
                id: q.id.clone(),
                field,
            };
            if q.text.trim().is_empty() {
                return Err(empty("text".into()));
            }
            if let Some(k) = q.answers.iter().position(|a| a.trim().is_empty()) {
                return Err(empty(format!("answers[{k}]")));
            }
        }
        Ok(Self { questions, ladder })
    }

    pub fn from_json_str(text: &str) -> Result<Self, BankError> {
        let raw: RawBank = serde_json::from_str(text).map_err(|e| BankError::Json(e.to_string()))?;
        let mut questions = Vec::with_capacity(raw.questions.len());
        for (index, q) in raw.questions.into_iter().enumerate() {
            let got = q.answers.len();
            let answers: [String; CORNER_COUNT] =
                q.answers.try_into().map_err(|_| BankError::AnswerCount {
                    index,
                    id: q.id.clone(),
                    got,
                })?;
            let correct_index = u8::try_from(q.correct_index)
                .ok()
                .filter(|&c| usize::from(c) < CORNER_COUNT)
                .ok_or_else(|| BankError::CorrectIndex {
                    index,
                    id: q.id.clone(),
                    got: q.correct_index,
                })?;
            questions.push(Question {
                id: q.id,
                text: q.text,
                answers,
                correct_index,
            });
        }
        let ladder = raw
            .ladder
            .unwrap_or_else(|| (1..=questions.len()).map(|n| format!("Level {n}")).collect());
        Self::new(questions, ladder)
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    pub fn question(&self, index: usize) -> Option<&Question> {
        self.questions.get(index)
    }

    pub fn ladder(&self) -> &[String] {
        &self.ladder
    }
}

pub fn load_question_bank<R: Read>(mut source: R) -> Result<QuestionBank, BankError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    QuestionBank::from_json_str(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum Phase {
    Idle,
    QuestionShown,
    AnswerHighlighted { corner: Corner },
    Feedback { correct: bool },
    Won,
    GameOver,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Idle => "idle",
            Phase::QuestionShown => "question_shown",
            Phase::AnswerHighlighted { .. } => "answer_highlighted",
            Phase::Feedback { .. } => "feedback",
            Phase::Won => "won",
            Phase::GameOver => "game_over",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Things that can happen to a game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GameEvent {
    Select(Option<Corner>),
    Confirm,
    Advance,
    Reset,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GameError {
    #[error("cannot start a game with an empty question bank")]
    CannotStart,
    #[error("illegal transition: {event} while {phase}")]
    IllegalTransition { phase: &'static str, event: &'static str },
}

/// Permutation placing answer slots on corners: `mapping[corner]` is the
/// index into the question's answers shown at that corner.
pub type AnswerMapping = [u8; CORNER_COUNT];

pub const IDENTITY_MAPPING: AnswerMapping = [0, 1, 2, 3];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GameState {
    phase: Phase,
    question_index: usize,
    mappings: Vec<AnswerMapping>,
    score_level: usize,
}

impl Default for GameState {
    fn default() -> Self {
        Self::idle()
    }
}

impl GameState {
    pub fn idle() -> Self {
        Self {
            phase: Phase::Idle,
            question_index: 0,
            mappings: Vec::new(),
            score_level: 0,
        }
    }

    /// Shows the first question. With `shuffle`, each question's answers
    /// are placed by an independent uniform permutation drawn from `rng`.
    pub fn start<R: Rng + ?Sized>(
        bank: &QuestionBank,
        rng: &mut R,
        shuffle: bool,
    ) -> Result<Self, GameError> {
        if bank.is_empty() {
            return Err(GameError::CannotStart);
        }
        let mappings = (0..bank.len())
            .map(|_| {
                let mut m = IDENTITY_MAPPING;
                if shuffle {
                    m.shuffle(rng);
                }
                m
            })
            .collect();
        Ok(Self {
            phase: Phase::QuestionShown,
            question_index: 0,
            mappings,
            score_level: 0,
        })
    }

    /// Game with explicit mappings, one per question.
    pub fn with_mappings(bank: &QuestionBank, mappings: Vec<AnswerMapping>) -> Result<Self, GameError> {
        if bank.is_empty() || mappings.len() != bank.len() {
            return Err(GameError::CannotStart);
        }
        Ok(Self {
            phase: Phase::QuestionShown,
            question_index: 0,
            mappings,
            score_level: 0,
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn question_index(&self) -> usize {
        self.question_index
    }

    pub fn score_level(&self) -> usize {
        self.score_level
    }

    pub fn highlighted(&self) -> Option<Corner> {
        match self.phase {
            Phase::AnswerHighlighted { corner } => Some(corner),
            _ => None,
        }
    }

    pub fn answers_mapping(&self) -> Option<AnswerMapping> {
        self.mappings.get(self.question_index).copied()
    }

    /// Whether a question is on screen (and therefore has a mapping).
    pub fn has_question(&self) -> bool {
        matches!(
            self.phase,
            Phase::QuestionShown | Phase::AnswerHighlighted { .. } | Phase::Feedback { .. }
        )
    }

    /// The corner that currently shows the correct answer.
    pub fn correct_corner(&self, bank: &QuestionBank) -> Option<Corner> {
        if !self.has_question() {
            return None;
        }
        let q = bank.question(self.question_index)?;
        let mapping = self.answers_mapping()?;
        let k = mapping.iter().position(|&slot| slot == q.correct_index)?;
        Corner::new(k as u8)
    }

    fn illegal(&self, event: &'static str) -> GameError {
        GameError::IllegalTransition {
            phase: self.phase.name(),
            event,
        }
    }

    /// Highlights the answer at the selected corner, or releases the
    /// highlight. Ignored outside the question phases.
    pub fn apply_selection(&self, selection: Option<Corner>) -> GameState {
        match self.phase {
            Phase::QuestionShown | Phase::AnswerHighlighted { .. } => GameState {
                phase: match selection {
                    Some(corner) => Phase::AnswerHighlighted { corner },
                    None => Phase::QuestionShown,
                },
                ..self.clone()
            },
            _ => self.clone(),
        }
    }

    pub fn confirm(&self, bank: &QuestionBank) -> Result<GameState, GameError> {
        let Phase::AnswerHighlighted { corner } = self.phase else {
            return Err(self.illegal("confirm"));
        };
        let question = bank
            .question(self.question_index)
            .ok_or_else(|| self.illegal("confirm"))?;
        let mapping = self.answers_mapping().ok_or_else(|| self.illegal("confirm"))?;
        let correct = mapping[corner.index()] == question.correct_index;
        Ok(GameState {
            phase: Phase::Feedback { correct },
            score_level: self.score_level + usize::from(correct),
            ..self.clone()
        })
    }

    pub fn advance(&self, bank: &QuestionBank) -> Result<GameState, GameError> {
        let Phase::Feedback { correct } = self.phase else {
            return Err(self.illegal("advance"));
        };
        let next = self.question_index + 1;
        let phase = match (correct, next < bank.len()) {
            (false, _) => Phase::GameOver,
            (true, false) => Phase::Won,
            (true, true) => Phase::QuestionShown,
        };
        Ok(GameState {
            phase,
            question_index: if phase == Phase::QuestionShown {
                next
            } else {
                self.question_index
            },
            ..self.clone()
        })
    }

    /// Back to `Idle`. Callers owning a signal pipeline should clear it too.
    pub fn reset_game(&self) -> GameState {
        GameState::idle()
    }

    pub fn apply(&self, bank: &QuestionBank, event: GameEvent) -> Result<GameState, GameError> {
        match event {
            GameEvent::Select(selection) => Ok(self.apply_selection(selection)),
            GameEvent::Confirm => self.confirm(bank),
            GameEvent::Advance => self.advance(bank),
            GameEvent::Reset => Ok(self.reset_game()),
        }
    }
}
