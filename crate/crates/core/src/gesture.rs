use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Forearm muscles carrying an MMG sensor, in channel order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Muscle {
    /// Flexor carpi radialis
    Fcr,
    /// Flexor carpi ulnaris
    Fcu,
    /// Extensor digitorum
    Ed,
    /// Extensor carpi radialis longus
    Ecrl,
    /// Extensor carpi radialis brevis
    Ecrb,
}

impl Muscle {
    pub const ALL: [Muscle; 5] = [Muscle::Fcr, Muscle::Fcu, Muscle::Ed, Muscle::Ecrl, Muscle::Ecrb];

    pub fn channel(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Muscle::Fcr => "FCR",
            Muscle::Fcu => "FCU",
            Muscle::Ed => "ED",
            Muscle::Ecrl => "ECRL",
            Muscle::Ecrb => "ECRB",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gesture {
    Grip,
    Wrist,
}

impl Gesture {
    pub fn name(self) -> &'static str {
        match self {
            Gesture::Grip => "GRIP",
            Gesture::Wrist => "WRIST",
        }
    }
}

/// Classifier force granularity. Level 1 is the strongest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ForceLevel {
    L1Strong,
    L2Moderate,
    L3Light,
}

impl ForceLevel {
    pub const ALL: [ForceLevel; 3] = [ForceLevel::L1Strong, ForceLevel::L2Moderate, ForceLevel::L3Light];

    /// 1, 2 or 3.
    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(ForceLevel::L1Strong),
            2 => Some(ForceLevel::L2Moderate),
            3 => Some(ForceLevel::L3Light),
            _ => None,
        }
    }
}

/// One of the six gesture/force classes, e.g. `GRIP_L1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GestureClass {
    pub gesture: Gesture,
    pub level: ForceLevel,
}

impl GestureClass {
    pub const COUNT: usize = 6;

    pub const ALL: [GestureClass; 6] = [
        GestureClass::new(Gesture::Grip, ForceLevel::L1Strong),
        GestureClass::new(Gesture::Grip, ForceLevel::L2Moderate),
        GestureClass::new(Gesture::Grip, ForceLevel::L3Light),
        GestureClass::new(Gesture::Wrist, ForceLevel::L1Strong),
        GestureClass::new(Gesture::Wrist, ForceLevel::L2Moderate),
        GestureClass::new(Gesture::Wrist, ForceLevel::L3Light),
    ];

    pub const fn new(gesture: Gesture, level: ForceLevel) -> Self {
        GestureClass { gesture, level }
    }

    pub fn index(self) -> usize {
        let g = match self.gesture {
            Gesture::Grip => 0,
            Gesture::Wrist => 3,
        };
        g + self.level as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn label(self) -> String {
        self.to_string()
    }
}

impl fmt::Display for GestureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_L{}", self.gesture.name(), self.level.number())
    }
}

impl FromStr for GestureClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GestureClass::ALL
            .iter()
            .copied()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| Error::RejectedInput(format!("unknown class label {s:?}")))
    }
}

impl Serialize for GestureClass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for GestureClass {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
