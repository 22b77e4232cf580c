use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::fsm::Mode;
use crate::classifier::ModelCheckpoint;
use crate::error::Result;
use crate::gesture::{ForceLevel, Gesture, GestureClass};
use crate::signal::{detect_peaks, savitzky_golay, FilterSpec, SignalWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GripCommand {
    pub gesture: Gesture,
    pub level: ForceLevel,
}

impl From<GestureClass> for GripCommand {
    fn from(c: GestureClass) -> Self {
        GripCommand {
            gesture: c.gesture,
            level: c.level,
        }
    }
}

/// Decides whether a raw window contains muscle activity at all, so that
/// rest windows do not vote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActivityGate {
    /// Minimum prominence, in sensor units, of a smoothed peak on any channel.
    pub min_prominence: f64,
    pub smoothing: FilterSpec,
}

impl Default for ActivityGate {
    fn default() -> Self {
        ActivityGate {
            min_prominence: 40.0,
            smoothing: FilterSpec::default(),
        }
    }
}

impl ActivityGate {
    pub fn is_active(&self, w: &SignalWindow) -> Result<bool> {
        for c in 0..w.channels() {
            let x = savitzky_golay(w.channel(c), &self.smoothing)?;
            if !detect_peaks(&x, self.min_prominence, 1).is_empty() {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Turns a stream of windows into grip commands by majority vote over the
/// last three classified windows.
#[derive(Debug, Clone)]
pub struct GestureCommander {
    ckpt: Option<Arc<ModelCheckpoint>>,
    gate: ActivityGate,
    votes: VecDeque<Option<GestureClass>>,
    last_emitted: Option<GestureClass>,
}

pub const VOTE_WINDOWS: usize = 3;

impl GestureCommander {
    pub fn new(ckpt: Option<Arc<ModelCheckpoint>>, gate: ActivityGate) -> Self {
        GestureCommander {
            ckpt,
            gate,
            votes: VecDeque::with_capacity(VOTE_WINDOWS),
            last_emitted: None,
        }
    }

    pub fn reset(&mut self) {
        self.votes.clear();
        self.last_emitted = None;
    }

    /// Classifies one window and returns a command when a new majority forms.
    /// Without a checkpoint, or outside grasp mode, nothing is emitted.
    pub fn push(&mut self, mode: Mode, w: &SignalWindow) -> Result<Option<GripCommand>> {
        let Some(ckpt) = &self.ckpt else {
            return Ok(None);
        };
        if mode != Mode::Grasp {
            self.reset();
            return Ok(None);
        }
        let vote = if self.gate.is_active(w)? {
            Some(ckpt.predict(w)?.class)
        } else {
            None
        };
        Ok(self.vote(vote))
    }

    /// Records a vote (`None` for an inactive window) and applies the
    /// majority rule.
    pub fn vote(&mut self, vote: Option<GestureClass>) -> Option<GripCommand> {
        if self.votes.len() == VOTE_WINDOWS {
            self.votes.pop_front();
        }
        self.votes.push_back(vote);
        if self.votes.iter().all(Option::is_none) {
            self.last_emitted = None;
            return None;
        }
        let winner = self.votes.iter().flatten().find(|c| {
            self.votes.iter().filter(|v| **v == Some(**c)).count() * 2 > VOTE_WINDOWS
        });
        match winner {
            Some(&c) if self.last_emitted != Some(c) => {
                self.last_emitted = Some(c);
                Some(c.into())
            }
            _ => None,
        }
    }
}
