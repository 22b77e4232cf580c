use serde::{Deserialize, Serialize};

use super::fsm::Mode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltReading {
    pub pitch_deg: f64,
    pub roll_deg: f64,
    pub t_ms: i64,
}

impl TiltReading {
    pub fn new(pitch_deg: f64, roll_deg: f64, t_ms: i64) -> Result<Self> {
        for a in [pitch_deg, roll_deg] {
            if !(-90.0..=90.0).contains(&a) {
                return Err(Error::RejectedInput(format!("tilt angle {a} outside [-90, 90] degrees")));
            }
        }
        Ok(TiltReading {
            pitch_deg,
            roll_deg,
            t_ms,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
    pub t_ms: i64,
}

impl VelocityCommand {
    pub fn zero(t_ms: i64) -> Self {
        VelocityCommand {
            t_ms,
            ..Default::default()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.vx == 0.0 && self.vy == 0.0 && self.omega == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TiltParams {
    pub dead_zone_deg: f64,
    /// Tilt beyond the dead zone that reaches full speed.
    pub span_deg: f64,
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for TiltParams {
    fn default() -> Self {
        TiltParams {
            dead_zone_deg: 5.0,
            span_deg: 30.0,
            v_max: 0.5,
            omega_max: 1.0,
        }
    }
}

impl TiltParams {
    /// Odd, saturating map from an angle to `[-1, 1]`.
    pub fn shape(&self, angle_deg: f64) -> f64 {
        let m = ((angle_deg.abs() - self.dead_zone_deg) / self.span_deg).clamp(0.0, 1.0);
        if angle_deg < 0.0 {
            -m
        } else {
            m
        }
    }

    /// Inverse of [`TiltParams::shape`] on the open interval `(-1, 1)`.
    pub fn angle_for(&self, fraction: f64) -> f64 {
        let f = fraction.clamp(-1.0, 1.0);
        if f == 0.0 {
            return 0.0;
        }
        f.signum() * (self.dead_zone_deg + f.abs() * self.span_deg)
    }
}

/// Forward pitch drives `vx`, roll drives `omega`; `vy` stays 0. Outside
/// movement mode the command is all zeros.
pub fn tilt_to_velocity(mode: Mode, t: &TiltReading, p: &TiltParams) -> VelocityCommand {
    if mode != Mode::Movement {
        return VelocityCommand::zero(t.t_ms);
    }
    VelocityCommand {
        vx: p.v_max * p.shape(t.pitch_deg),
        vy: 0.0,
        omega: p.omega_max * p.shape(t.roll_deg),
        t_ms: t.t_ms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cmd(pitch: f64, roll: f64) -> VelocityCommand {
        let t = TiltReading::new(pitch, roll, 0).unwrap();
        tilt_to_velocity(Mode::Movement, &t, &TiltParams::default())
    }

    #[test]
    fn mapping_examples() {
        assert!(cmd(0.0, 0.0).is_zero());
        assert!(cmd(4.9, -4.9).is_zero());
        assert_eq!(cmd(35.0, 0.0).vx, 0.5);
        assert_eq!(cmd(80.0, 0.0).vx, 0.5);
        assert!((cmd(20.0, 0.0).vx - 0.25).abs() < 1e-15);
        assert!((cmd(0.0, -20.0).omega + 0.5).abs() < 1e-15);
    }

    #[test]
    fn suppressed_outside_movement() {
        let t = TiltReading::new(30.0, 30.0, 5).unwrap();
        for mode in [Mode::Idle, Mode::Grasp] {
            assert!(tilt_to_velocity(mode, &t, &TiltParams::default()).is_zero());
        }
    }

    #[test]
    fn angle_for_inverts_shape() {
        let p = TiltParams::default();
        for f in [-0.9, -0.3, 0.0, 0.2, 0.75] {
            assert!((p.shape(p.angle_for(f)) - f).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(TiltReading::new(91.0, 0.0, 0).is_err());
        assert!(TiltReading::new(0.0, f64::NAN, 0).is_err());
    }
}
