use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.81;
pub const MIN_MASS_G: f64 = 50.0;
pub const MAX_MASS_G: f64 = 500.0;
pub const MIN_WIDTH_CM: f64 = 3.0;
pub const MAX_WIDTH_CM: f64 = 8.0;

/// Surface finish of a test object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Texture {
    Smooth,
    Grit1200,
    Grit120,
}

impl Texture {
    pub const ALL: [Texture; 3] = [Texture::Smooth, Texture::Grit1200, Texture::Grit120];

    /// Arithmetic mean roughness in micrometres.
    pub fn roughness_um(self) -> f64 {
        match self {
            Texture::Smooth => 5.0,
            Texture::Grit1200 => 30.0,
            Texture::Grit120 => 90.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Texture::Smooth => "smooth",
            Texture::Grit1200 => "grit1200",
            Texture::Grit120 => "grit120",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    pub mass_g: f64,
    pub width_cm: f64,
    pub roughness_um: f64,
    /// Squeeze force above which the object is damaged.
    pub fragility_n: f64,
    pub liquid: bool,
    /// Fill fraction for liquid containers.
    pub fill: f64,
}

impl ObjectSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(format!("object {}: {m}", self.name)));
        if !(MIN_MASS_G..=MAX_MASS_G).contains(&self.mass_g) {
            return bad(format!("mass {} g outside [{MIN_MASS_G}, {MAX_MASS_G}]", self.mass_g));
        }
        if !(MIN_WIDTH_CM..=MAX_WIDTH_CM).contains(&self.width_cm) {
            return bad(format!("width {} cm outside [{MIN_WIDTH_CM}, {MAX_WIDTH_CM}]", self.width_cm));
        }
        if !(0.0..=100.0).contains(&self.roughness_um) {
            return bad(format!("roughness {} um outside [0, 100]", self.roughness_um));
        }
        if !(self.fragility_n > 0.0) {
            return bad("fragility must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.fill) {
            return bad(format!("fill {} outside [0, 1]", self.fill));
        }
        Ok(())
    }

    pub fn with_texture(mut self, t: Texture) -> Self {
        self.roughness_um = t.roughness_um();
        self
    }

    pub fn required_force(&self) -> f64 {
        required_grip_force(self.mass_g, self.roughness_um)
    }
}

/// Watch, earphone case and a water cup.
pub fn default_catalog() -> Vec<ObjectSpec> {
    vec![
        ObjectSpec {
            name: "watch".into(),
            mass_g: 180.0,
            width_cm: 4.0,
            roughness_um: 5.0,
            fragility_n: 20.0,
            liquid: false,
            fill: 0.0,
        },
        ObjectSpec {
            name: "earphones".into(),
            mass_g: 60.0,
            width_cm: 5.0,
            roughness_um: 5.0,
            fragility_n: 7.0,
            liquid: false,
            fill: 0.0,
        },
        ObjectSpec {
            name: "water_cup".into(),
            mass_g: 250.0,
            width_cm: 7.0,
            roughness_um: 5.0,
            fragility_n: 10.0,
            liquid: true,
            fill: 0.6,
        },
    ]
}

const MU_TABLE: [(f64, f64); 3] = [(0.0, 0.25), (50.0, 0.55), (100.0, 0.85)];

/// Gripper pad friction coefficient as a function of roughness, clamped to the table ends.
pub fn friction_coefficient(ra_um: f64) -> f64 {
    let ra = ra_um.clamp(MU_TABLE[0].0, MU_TABLE[MU_TABLE.len() - 1].0);
    for w in MU_TABLE.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if ra <= x1 {
            return y0 + (y1 - y0) * (ra - x0) / (x1 - x0);
        }
    }
    MU_TABLE[MU_TABLE.len() - 1].1
}

/// Minimum two-pad squeeze force holding `mass_g` with a 1.5 safety factor.
pub fn required_grip_force(mass_g: f64, ra_um: f64) -> f64 {
    1.5 * (mass_g / 1000.0) * GRAVITY / (2.0 * friction_coefficient(ra_um))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReleaseStrategy {
    Gradual,
    Standard,
    Light,
}

impl ReleaseStrategy {
    pub fn duration_ms(self) -> i64 {
        match self {
            ReleaseStrategy::Gradual => 1500,
            ReleaseStrategy::Standard => 500,
            ReleaseStrategy::Light => 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReleaseOutcome {
    Placed,
    Spilled,
    Tipped,
}

/// Spill probability of a liquid container under a given release.
pub fn spill_probability(obj: &ObjectSpec, strategy: ReleaseStrategy) -> f64 {
    if !obj.liquid || strategy == ReleaseStrategy::Gradual {
        return 0.0;
    }
    if obj.fill > 0.8 {
        1.0
    } else if obj.fill >= 0.5 {
        (obj.fill - 0.5) / 0.3
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn friction_table() {
        assert_eq!(friction_coefficient(0.0), 0.25);
        assert!((friction_coefficient(50.0) - 0.55).abs() < 1e-15);
        assert!((friction_coefficient(25.0) - 0.40).abs() < 1e-15);
        assert_eq!(friction_coefficient(500.0), 0.85);
    }

    #[test]
    fn rougher_needs_less_force() {
        let f: Vec<f64> = Texture::ALL
            .iter()
            .map(|t| required_grip_force(250.0, t.roughness_um()))
            .collect();
        assert!(f[0] > f[1] && f[1] > f[2]);
    }

    #[test]
    fn catalog_is_valid() {
        for o in default_catalog() {
            o.validate().unwrap();
        }
        let mut o = default_catalog().remove(0);
        o.mass_g = 600.0;
        assert!(o.validate().is_err());
    }

    #[test]
    fn spill_rules() {
        let mut cup = default_catalog().remove(2);
        cup.fill = 0.9;
        assert_eq!(spill_probability(&cup, ReleaseStrategy::Light), 1.0);
        assert_eq!(spill_probability(&cup, ReleaseStrategy::Gradual), 0.0);
        cup.fill = 0.3;
        assert_eq!(spill_probability(&cup, ReleaseStrategy::Standard), 0.0);
    }
}
