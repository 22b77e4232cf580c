use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gesture::ForceLevel;

pub const FORCE_BINS: u8 = 6;
pub const SLIP_CUE: u8 = 7;
pub const OVER_FORCE_CUE: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeedbackParams {
    /// Top of the force scale quantized into the six bins.
    pub f_max_n: f64,
    /// Grip force commanded for L1 (strong), L2 and L3 (light).
    pub level_forces_n: [f64; 3],
}

impl Default for FeedbackParams {
    fn default() -> Self {
        FeedbackParams {
            f_max_n: 12.0,
            level_forces_n: [8.0, 6.0, 4.0],
        }
    }
}

impl FeedbackParams {
    pub fn level_force_n(&self, level: ForceLevel) -> f64 {
        self.level_forces_n[level.number() as usize - 1]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_max_n > 0.0 && self.f_max_n.is_finite()) {
            return Err(Error::Config(format!("f_max {} must be positive", self.f_max_n)));
        }
        if self.level_forces_n.iter().any(|f| !(*f > 0.0 && *f <= self.f_max_n)) {
            return Err(Error::Config("grip level forces must lie in (0, f_max]".into()));
        }
        Ok(())
    }
}

/// `ceil(force / (f_max / 6))` clamped to `1..=6`. Bin edges belong to the lower bin.
pub fn force_bin(force_n: f64, f_max_n: f64) -> u8 {
    let width = f_max_n / FORCE_BINS as f64;
    let b = (force_n / width).ceil();
    b.clamp(1.0, FORCE_BINS as f64) as u8
}

/// Vibration cue for a measured grip force. Over-force (flagged or above
/// `f_max`) wins over slip, which wins over the force bins.
pub fn force_to_feedback(force_n: f64, slip: bool, over_force: bool, f_max_n: f64) -> Result<u8> {
    if !(f_max_n > 0.0) || !f_max_n.is_finite() {
        return Err(Error::RejectedInput(format!("f_max {f_max_n} must be positive")));
    }
    if force_n.is_nan() || force_n < 0.0 {
        return Err(Error::RejectedInput(format!("grip force {force_n} must be non-negative")));
    }
    if over_force || force_n > f_max_n {
        return Ok(OVER_FORCE_CUE);
    }
    if slip {
        return Ok(SLIP_CUE);
    }
    Ok(force_bin(force_n, f_max_n))
}

/// Suggested change in force bins: +1 on slip, -1 when the grip exceeds the
/// requirement by more than one bin, 0 otherwise.
pub fn grip_adjust(current_force_n: f64, required_force_n: f64, slip: bool, f_max_n: f64) -> i8 {
    if slip {
        return 1;
    }
    let excess = force_bin(current_force_n, f_max_n) as i16 - force_bin(required_force_n, f_max_n) as i16;
    if excess > 1 {
        -1
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(force_to_feedback(0.0, false, false, 12.0).unwrap(), 1);
        assert_eq!(force_to_feedback(5.0, false, false, 12.0).unwrap(), 3);
        assert_eq!(force_to_feedback(4.0, false, false, 12.0).unwrap(), 2);
        assert_eq!(force_to_feedback(12.0, false, false, 12.0).unwrap(), 6);
        assert_eq!(force_to_feedback(7.0, true, false, 12.0).unwrap(), 7);
        assert_eq!(force_to_feedback(7.0, true, true, 12.0).unwrap(), 8);
        assert_eq!(force_to_feedback(12.5, false, false, 12.0).unwrap(), 8);
        assert!(force_to_feedback(-0.1, false, false, 12.0).is_err());
        assert!(force_to_feedback(f64::NAN, false, false, 12.0).is_err());
    }

    #[test]
    fn adjust_examples() {
        assert_eq!(grip_adjust(3.0, 8.0, true, 12.0), 1);
        assert_eq!(grip_adjust(11.5, 3.5, false, 12.0), -1);
        assert_eq!(grip_adjust(5.0, 5.5, false, 12.0), 0);
        assert_eq!(grip_adjust(7.0, 5.0, false, 12.0), 0);
    }
}
