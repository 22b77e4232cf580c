use serde::{Deserialize, Serialize};

use super::commander::GripCommand;
use super::feedback::{force_bin, FeedbackParams};
use crate::error::{Error, Result};
use crate::gesture::ForceLevel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Idle,
    Movement,
    Grasp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Press {
    Press,
    Release,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ButtonEvent {
    pub kind: Press,
    pub t_ms: i64,
}

impl ButtonEvent {
    pub fn press(t_ms: i64) -> Self {
        ButtonEvent { kind: Press::Press, t_ms }
    }

    pub fn release(t_ms: i64) -> Self {
        ButtonEvent {
            kind: Press::Release,
            t_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ButtonParams {
    /// Minimum hold for the movement-mode gesture.
    pub hold_ms: i64,
    /// Maximum gap between the first release and the second press of a double press.
    pub double_gap_ms: i64,
}

impl Default for ButtonParams {
    fn default() -> Self {
        ButtonParams {
            hold_ms: 3000,
            double_gap_ms: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Button {
    /// Released; `short_release` is the end of a preceding short press that
    /// may open a double press.
    Up { short_release: Option<i64> },
    Down { since: i64, second: bool },
}

/// Mode machine plus the grasp-side quantities shown to the operator.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlState {
    mode: Mode,
    button: Button,
    last_t_ms: Option<i64>,
    params: ButtonParams,
    /// Last commanded grip level, set by classified gestures in grasp mode.
    pub grip_level: Option<ForceLevel>,
    /// Force bin of the commanded grip level.
    pub commanded_bin: Option<u8>,
    /// Vibration cue 1..=8; defined whenever the mode is grasp.
    pub feedback_index: Option<u8>,
}

impl Default for ControlState {
    fn default() -> Self {
        Self::new(ButtonParams::default())
    }
}

impl ControlState {
    pub fn new(params: ButtonParams) -> Self {
        ControlState {
            mode: Mode::Idle,
            button: Button::Up { short_release: None },
            last_t_ms: None,
            params,
            grip_level: None,
            commanded_bin: None,
            feedback_index: None,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn button_down(&self) -> bool {
        matches!(self.button, Button::Down { .. })
    }

    /// Feeds one button event. Returns the mode after the event.
    ///
    /// A release after a hold of at least `hold_ms` enters movement mode. A
    /// short press whose release is followed within `double_gap_ms` by a
    /// second short press enters grasp mode on the second release. Anything
    /// else (including press-while-down and release-while-up) leaves the mode
    /// unchanged.
    pub fn on_button(&mut self, ev: ButtonEvent) -> Result<Mode> {
        if let Some(last) = self.last_t_ms {
            if ev.t_ms < last {
                return Err(Error::RejectedInput(format!(
                    "button event at {} ms precedes previous event at {last} ms",
                    ev.t_ms
                )));
            }
        }
        self.last_t_ms = Some(ev.t_ms);
        match (self.button, ev.kind) {
            (Button::Up { short_release }, Press::Press) => {
                let second = short_release.is_some_and(|r| ev.t_ms - r <= self.params.double_gap_ms);
                self.button = Button::Down {
                    since: ev.t_ms,
                    second,
                };
            }
            (Button::Down { since, second }, Press::Release) => {
                let held = ev.t_ms - since;
                if held >= self.params.hold_ms {
                    self.enter(Mode::Movement);
                    self.button = Button::Up { short_release: None };
                } else if second {
                    self.enter(Mode::Grasp);
                    self.button = Button::Up { short_release: None };
                } else {
                    self.button = Button::Up {
                        short_release: Some(ev.t_ms),
                    };
                }
            }
            // Press while down or release while up: no defined meaning.
            _ => {}
        }
        Ok(self.mode)
    }

    fn enter(&mut self, mode: Mode) {
        if self.mode == mode {
            return;
        }
        self.mode = mode;
        match mode {
            Mode::Grasp => self.feedback_index = Some(1),
            _ => self.feedback_index = None,
        }
    }

    /// Applies a classified grip command; ignored outside grasp mode.
    pub fn apply_grip(&mut self, cmd: GripCommand, fb: &FeedbackParams) -> bool {
        if self.mode != Mode::Grasp {
            return false;
        }
        self.grip_level = Some(cmd.level);
        self.commanded_bin = Some(force_bin(fb.level_force_n(cmd.level), fb.f_max_n));
        true
    }

    /// Records the cue currently driven on the vibration motor.
    pub fn set_feedback(&mut self, index: u8) {
        if self.mode == Mode::Grasp {
            self.feedback_index = Some(index);
        }
    }

    /// `true` when every field is consistent with the mode.
    pub fn is_well_formed(&self) -> bool {
        let fb_ok = match self.mode {
            Mode::Grasp => self.feedback_index.is_some_and(|i| (1..=8).contains(&i)),
            _ => self.feedback_index.is_none(),
        };
        let bin_ok = self.commanded_bin.is_none_or(|b| (1..=6).contains(&b));
        fb_ok && bin_ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(events: &[ButtonEvent]) -> Mode {
        let mut s = ControlState::default();
        for e in events {
            s.on_button(*e).unwrap();
        }
        s.mode()
    }

    #[test]
    fn hold_enters_movement() {
        assert_eq!(run(&[ButtonEvent::press(0), ButtonEvent::release(3100)]), Mode::Movement);
        assert_eq!(run(&[ButtonEvent::press(0), ButtonEvent::release(3000)]), Mode::Movement);
        assert_eq!(run(&[ButtonEvent::press(0), ButtonEvent::release(2999)]), Mode::Idle);
    }

    #[test]
    fn double_press_enters_grasp() {
        let ev = [
            ButtonEvent::press(0),
            ButtonEvent::release(100),
            ButtonEvent::press(300),
            ButtonEvent::release(400),
        ];
        assert_eq!(run(&ev), Mode::Grasp);
        let slow = [
            ButtonEvent::press(0),
            ButtonEvent::release(100),
            ButtonEvent::press(501),
            ButtonEvent::release(600),
        ];
        assert_eq!(run(&slow), Mode::Idle);
    }

    #[test]
    fn single_short_press_is_ignored() {
        assert_eq!(run(&[ButtonEvent::press(0), ButtonEvent::release(100)]), Mode::Idle);
    }

    #[test]
    fn second_long_press_is_a_hold() {
        let ev = [
            ButtonEvent::press(0),
            ButtonEvent::release(100),
            ButtonEvent::press(200),
            ButtonEvent::release(3300),
        ];
        assert_eq!(run(&ev), Mode::Movement);
    }

    #[test]
    fn non_monotone_time_is_rejected() {
        let mut s = ControlState::default();
        s.on_button(ButtonEvent::press(50)).unwrap();
        assert!(s.on_button(ButtonEvent::release(40)).is_err());
        assert!(s.button_down());
    }

    #[test]
    fn grasp_defines_feedback() {
        let mut s = ControlState::default();
        for e in [
            ButtonEvent::press(0),
            ButtonEvent::release(100),
            ButtonEvent::press(300),
            ButtonEvent::release(400),
        ] {
            s.on_button(e).unwrap();
        }
        assert_eq!(s.feedback_index, Some(1));
        s.on_button(ButtonEvent::press(1000)).unwrap();
        s.on_button(ButtonEvent::release(4000)).unwrap();
        assert_eq!(s.mode(), Mode::Movement);
        assert_eq!(s.feedback_index, None);
        assert!(s.is_well_formed());
    }
}
