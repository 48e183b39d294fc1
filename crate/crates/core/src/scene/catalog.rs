//! Object templates for the thirteen categories.
//!
//! Envelope-type objects are rounded and tall; suck-type objects are flat and low.
//! The two height bands do not overlap. Sizes are full lengths in meters.

use std::borrow::Cow;
use std::fmt::Write as _;

use super::{Affinity, SceneError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraspType {
    Envelope,
    Suck,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectTemplate {
    pub name: Cow<'static, str>,
    pub grasp_type: GraspType,
    pub long: (f64, f64),
    pub short: (f64, f64),
    pub height: (f64, f64),
    /// Suckable fraction of the footprint area.
    pub flat_fraction: (f64, f64),
    /// Whether the object also accepts the other primitive when dual affinity is on.
    pub dual: bool,
}

impl ObjectTemplate {
    /// Affinity for this template given the catalog's dual-affinity switch.
    pub fn affinity(&self, dual_enabled: bool) -> Affinity {
        match (self.grasp_type, dual_enabled && self.dual) {
            (_, true) => Affinity::Both,
            (GraspType::Envelope, false) => Affinity::EnvelopeOnly,
            (GraspType::Suck, false) => Affinity::SuckOnly,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub templates: Vec<ObjectTemplate>,
    pub dual_affinity: bool,
}

const fn t(
    name: &'static str,
    grasp_type: GraspType,
    long: (f64, f64),
    short: (f64, f64),
    height: (f64, f64),
    flat_fraction: (f64, f64),
    dual: bool,
) -> ObjectTemplate {
    ObjectTemplate {
        name: Cow::Borrowed(name),
        grasp_type,
        long,
        short,
        height,
        flat_fraction,
        dual,
    }
}

use GraspType::{Envelope as E, Suck as S};

/// Envelope-type flat fractions of dual objects keep their flat area above a 2 cm sucker.
const DEFAULT_TEMPLATES: [ObjectTemplate; 13] = [
    t(
        "sports_ball",
        E,
        (0.040, 0.046),
        (0.040, 0.046),
        (0.050, 0.060),
        (0.0, 0.0),
        false,
    ),
    t(
        "apple",
        E,
        (0.036, 0.044),
        (0.034, 0.042),
        (0.050, 0.060),
        (0.0, 0.0),
        false,
    ),
    t(
        "orange",
        E,
        (0.036, 0.044),
        (0.034, 0.042),
        (0.046, 0.055),
        (0.30, 0.40),
        true,
    ),
    t(
        "banana",
        E,
        (0.065, 0.078),
        (0.026, 0.032),
        (0.045, 0.052),
        (0.0, 0.0),
        false,
    ),
    t(
        "bottle",
        E,
        (0.065, 0.078),
        (0.034, 0.042),
        (0.050, 0.060),
        (0.30, 0.40),
        true,
    ),
    t(
        "toy_car",
        E,
        (0.055, 0.068),
        (0.030, 0.036),
        (0.046, 0.055),
        (0.30, 0.40),
        true,
    ),
    t(
        "teddy_bear",
        E,
        (0.050, 0.060),
        (0.038, 0.046),
        (0.060, 0.080),
        (0.0, 0.0),
        false,
    ),
    t(
        "cup",
        E,
        (0.040, 0.048),
        (0.038, 0.046),
        (0.060, 0.075),
        (0.0, 0.0),
        false,
    ),
    t(
        "mouse",
        S,
        (0.050, 0.060),
        (0.030, 0.036),
        (0.028, 0.035),
        (0.50, 0.70),
        false,
    ),
    t(
        "remote",
        S,
        (0.065, 0.080),
        (0.026, 0.032),
        (0.014, 0.020),
        (0.60, 0.85),
        false,
    ),
    t(
        "bowl",
        S,
        (0.046, 0.054),
        (0.044, 0.052),
        (0.025, 0.032),
        (0.50, 0.70),
        false,
    ),
    t(
        "cellphone",
        S,
        (0.060, 0.070),
        (0.034, 0.040),
        (0.012, 0.015),
        (0.70, 0.90),
        false,
    ),
    t(
        "clock",
        S,
        (0.044, 0.052),
        (0.042, 0.050),
        (0.020, 0.028),
        (0.60, 0.80),
        false,
    ),
];

impl Default for Catalog {
    fn default() -> Self {
        Catalog {
            templates: DEFAULT_TEMPLATES.to_vec(),
            dual_affinity: false,
        }
    }
}

impl Catalog {
    pub fn with_dual_affinity(mut self, on: bool) -> Self {
        self.dual_affinity = on;
        self
    }

    pub fn of_type(&self, g: GraspType) -> Vec<&ObjectTemplate> {
        self.templates
            .iter()
            .filter(|t| t.grasp_type == g)
            .collect()
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.of_type(GraspType::Envelope).is_empty() || self.of_type(GraspType::Suck).is_empty()
        {
            return Err(SceneError::InvalidParams(
                "catalog needs at least one template of each grasp type".into(),
            ));
        }
        for t in &self.templates {
            let ranges = [("long", t.long), ("short", t.short), ("height", t.height)];
            for (what, (lo, hi)) in ranges {
                if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                    return Err(SceneError::InvalidParams(format!(
                        "{}: bad {what} range {lo}..{hi}",
                        t.name
                    )));
                }
            }
            let (lo, hi) = t.flat_fraction;
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(SceneError::InvalidParams(format!(
                    "{}: bad flat fraction range {lo}..{hi}",
                    t.name
                )));
            }
            if t.short.1 > t.long.1 {
                return Err(SceneError::InvalidParams(format!(
                    "{}: short side exceeds long side",
                    t.name
                )));
            }
        }
        Ok(())
    }

    /// One `template` line per entry:
    /// `template <name> <envelope|suck> <long lo hi> <short lo hi> <height lo hi> <flat lo hi> <dual 0|1>`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.templates {
            let kind = match t.grasp_type {
                GraspType::Envelope => "envelope",
                GraspType::Suck => "suck",
            };
            writeln!(
                out,
                "template {} {kind} {} {} {} {} {} {} {} {} {}",
                t.name,
                t.long.0,
                t.long.1,
                t.short.0,
                t.short.1,
                t.height.0,
                t.height.1,
                t.flat_fraction.0,
                t.flat_fraction.1,
                t.dual as u8
            )
            .expect("writing to a string");
        }
        out
    }

    /// Parses [`Catalog::to_text`] output. Blank lines and `#` comments are skipped.
    pub fn from_text(text: &str, dual_affinity: bool) -> Result<Catalog, SceneError> {
        let mut templates = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                continue;
            }
            let f: Vec<&str> = l.split_whitespace().collect();
            let err = |msg: String| SceneError::Parse { line, msg };
            if f[0] != "template" || f.len() != 12 {
                return Err(err(format!(
                    "expected 'template' with 11 fields, got '{l}'"
                )));
            }
            let grasp_type = match f[2] {
                "envelope" => GraspType::Envelope,
                "suck" => GraspType::Suck,
                other => return Err(err(format!("unknown grasp type '{other}'"))),
            };
            let mut v = [0.0; 8];
            for (k, slot) in v.iter_mut().enumerate() {
                *slot = f[3 + k]
                    .parse()
                    .map_err(|_| err(format!("bad number '{}'", f[3 + k])))?;
            }
            let dual = match f[11] {
                "0" => false,
                "1" => true,
                other => return Err(err(format!("dual flag must be 0 or 1, got '{other}'"))),
            };
            templates.push(ObjectTemplate {
                name: Cow::Owned(f[1].to_string()),
                grasp_type,
                long: (v[0], v[1]),
                short: (v[2], v[3]),
                height: (v[4], v[5]),
                flat_fraction: (v[6], v[7]),
                dual,
            });
        }
        let c = Catalog {
            templates,
            dual_affinity,
        };
        c.validate()?;
        Ok(c)
    }

    /// Largest short side among envelope-type templates.
    pub fn max_envelope_short_side(&self) -> f64 {
        self.of_type(GraspType::Envelope)
            .iter()
            .map(|t| t.short.1)
            .fold(0.0, f64::max)
    }
}
