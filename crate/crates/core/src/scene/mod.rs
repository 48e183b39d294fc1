//! The 2.5-D tabletop: objects, placement, heightmaps and masks.

pub mod catalog;
mod render;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{RotatedRect, Vec2, Vec3};
pub use catalog::{Catalog, GraspType, ObjectTemplate};
pub use render::{render_depth, render_depth_noisy, render_masks, Heightmap, Mask};

/// Placement attempts allowed per object before spawning gives up.
pub const MAX_REJECTIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("workspace too crowded: object {index} not placed after {MAX_REJECTIONS} attempts")]
    Crowded { index: usize },
    #[error("unknown object id {0}")]
    UnknownId(usize),
    #[error("invalid scene parameter: {0}")]
    InvalidParams(String),
    #[error("scene text line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid object: {0}")]
    InvalidObject(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Affinity {
    EnvelopeOnly,
    SuckOnly,
    Both,
}

impl Affinity {
    pub fn can_envelope(self) -> bool {
        matches!(self, Affinity::EnvelopeOnly | Affinity::Both)
    }

    pub fn can_suck(self) -> bool {
        matches!(self, Affinity::SuckOnly | Affinity::Both)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Affinity::EnvelopeOnly => "envelope_only",
            Affinity::SuckOnly => "suck_only",
            Affinity::Both => "both",
        }
    }
}

impl fmt::Display for Affinity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Affinity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "envelope_only" => Ok(Affinity::EnvelopeOnly),
            "suck_only" => Ok(Affinity::SuckOnly),
            "both" => Ok(Affinity::Both),
            other => Err(format!("unknown affinity '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneObject {
    pub id: usize,
    pub footprint: RotatedRect,
    /// Height of the object's top above the table (m).
    pub height: f64,
    pub affinity: Affinity,
    /// Suckable flat area on the top face (m^2).
    pub top_flat_area: f64,
}

impl SceneObject {
    pub fn center(&self) -> Vec2 {
        self.footprint.center
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub workspace_side: f64,
    pub objects: Vec<SceneObject>,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClutterMode {
    /// No footprint overlap.
    Light,
    /// Overlap allowed up to `max_overlap` of the smaller footprint; the upper object is raised.
    Heavy,
    /// Footprints at least `isolation_gap` apart.
    Isolated,
}

impl ClutterMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ClutterMode::Light => "light",
            ClutterMode::Heavy => "heavy",
            ClutterMode::Isolated => "isolated",
        }
    }
}

impl FromStr for ClutterMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "light" => Ok(ClutterMode::Light),
            "heavy" => Ok(ClutterMode::Heavy),
            "isolated" => Ok(ClutterMode::Isolated),
            other => Err(format!("unknown clutter mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneParams {
    pub workspace_side: f64,
    pub clutter: ClutterMode,
    pub max_overlap: f64,
    pub isolation_gap: f64,
    pub max_objects: usize,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            workspace_side: 0.25,
            clutter: ClutterMode::Light,
            max_overlap: 0.5,
            isolation_gap: 0.02,
            max_objects: 10,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.workspace_side > 0.0 && self.workspace_side.is_finite()) {
            return Err(SceneError::InvalidParams(format!(
                "workspace_side must be positive, got {}",
                self.workspace_side
            )));
        }
        if !(0.0..=1.0).contains(&self.max_overlap) {
            return Err(SceneError::InvalidParams(format!(
                "max_overlap must lie in [0, 1], got {}",
                self.max_overlap
            )));
        }
        if !(self.isolation_gap >= 0.0) {
            return Err(SceneError::InvalidParams(format!(
                "isolation_gap must be >= 0, got {}",
                self.isolation_gap
            )));
        }
        if self.max_objects == 0 {
            return Err(SceneError::InvalidParams(
                "max_objects must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Rounds to 9 significant decimal digits so that the text format round-trips exactly.
pub fn quantize(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.8e}").parse().expect("formatted float parses")
}

/// Number of envelope-type objects for a mixture fraction.
pub fn envelope_count(pe: f64, n: usize) -> usize {
    ((pe * n as f64).round() as usize).min(n)
}

impl Scene {
    pub fn empty(workspace_side: f64, rng_seed: u64) -> Scene {
        Scene {
            workspace_side,
            objects: Vec::new(),
            rng_seed,
        }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn ids(&self) -> Vec<usize> {
        self.objects.iter().map(|o| o.id).collect()
    }

    pub fn index_of(&self, id: usize) -> Result<usize, SceneError> {
        self.objects
            .iter()
            .position(|o| o.id == id)
            .ok_or(SceneError::UnknownId(id))
    }

    pub fn get(&self, id: usize) -> Result<&SceneObject, SceneError> {
        self.index_of(id).map(|i| &self.objects[i])
    }

    pub fn remove(&mut self, id: usize) -> Result<SceneObject, SceneError> {
        let i = self.index_of(id)?;
        Ok(self.objects.remove(i))
    }

    /// Copy of the scene without object `id`.
    pub fn without(&self, id: usize) -> Result<Scene, SceneError> {
        let mut s = self.clone();
        s.remove(id)?;
        Ok(s)
    }

    /// Checks that `obj` lies inside the workspace with valid height and flat area.
    pub fn check_object(&self, obj: &SceneObject) -> Result<(), SceneError> {
        let side = self.workspace_side;
        if obj
            .footprint
            .corners()
            .iter()
            .any(|c| c.x < 0.0 || c.y < 0.0 || c.x > side || c.y > side)
        {
            return Err(SceneError::InvalidObject(format!(
                "object {} leaves the workspace",
                obj.id
            )));
        }
        if !(obj.height > 0.0 && obj.height.is_finite()) {
            return Err(SceneError::InvalidObject(format!(
                "object {} has height {}",
                obj.id, obj.height
            )));
        }
        if !(obj.top_flat_area >= 0.0 && obj.top_flat_area <= obj.footprint.area() * (1.0 + 1e-9)) {
            return Err(SceneError::InvalidObject(format!(
                "object {} flat area {} exceeds footprint area {}",
                obj.id,
                obj.top_flat_area,
                obj.footprint.area()
            )));
        }
        Ok(())
    }

    pub fn push(&mut self, obj: SceneObject) -> Result<(), SceneError> {
        self.check_object(&obj)?;
        if self.index_of(obj.id).is_ok() {
            return Err(SceneError::InvalidObject(format!(
                "duplicate id {}",
                obj.id
            )));
        }
        self.objects.push(obj);
        Ok(())
    }

    /// Writes the line-oriented text form.
    pub fn to_text(&self) -> String {
        let q = quantize;
        let mut out = format!("workspace {} {}\n", q(self.workspace_side), self.rng_seed);
        for o in &self.objects {
            let f = &o.footprint;
            out.push_str(&format!(
                "obj {} {} {} {} {} {} {} {} {}\n",
                o.id,
                q(f.center.x),
                q(f.center.y),
                q(f.half_long),
                q(f.half_short),
                q(f.axis_angle),
                q(o.height),
                o.affinity,
                q(o.top_flat_area)
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Scene, SceneError> {
        let mut scene: Option<Scene> = None;
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let err = |msg: String| SceneError::Parse { line, msg };
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let tok: Vec<&str> = trimmed.split_whitespace().collect();
            let num = |i: usize| -> Result<f64, SceneError> {
                tok[i]
                    .parse::<f64>()
                    .map_err(|e| err(format!("field {} '{}': {e}", i, tok[i])))
            };
            match tok[0] {
                "workspace" => {
                    if scene.is_some() {
                        return Err(err("duplicate workspace header".into()));
                    }
                    if tok.len() != 3 {
                        return Err(err(format!(
                            "expected 'workspace <side> <seed>', got {} fields",
                            tok.len()
                        )));
                    }
                    let side = num(1)?;
                    let seed = tok[2]
                        .parse::<u64>()
                        .map_err(|e| err(format!("seed: {e}")))?;
                    if !(side > 0.0) {
                        return Err(err(format!("workspace side must be positive, got {side}")));
                    }
                    scene = Some(Scene::empty(side, seed));
                }
                "obj" => {
                    let s = scene
                        .as_mut()
                        .ok_or_else(|| err("object before workspace header".into()))?;
                    if tok.len() != 10 {
                        return Err(err(format!(
                            "expected 10 fields for obj, got {}",
                            tok.len()
                        )));
                    }
                    let id = tok[1]
                        .parse::<usize>()
                        .map_err(|e| err(format!("id: {e}")))?;
                    let (cx, cy, hl, hs, ang, h) =
                        (num(2)?, num(3)?, num(4)?, num(5)?, num(6)?, num(7)?);
                    let affinity = tok[8].parse::<Affinity>().map_err(err)?;
                    let flat = num(9)?;
                    let footprint = RotatedRect::new(Vec2::new(cx, cy), hl, hs, ang)
                        .map_err(|e| err(e.to_string()))?;
                    if footprint.half_long != hl || footprint.axis_angle != ang {
                        return Err(err(
                            "footprint must be given as long side first with angle in [0, 180)"
                                .into(),
                        ));
                    }
                    let obj = SceneObject {
                        id,
                        footprint,
                        height: h,
                        affinity,
                        top_flat_area: flat,
                    };
                    s.push(obj).map_err(|e| err(e.to_string()))?;
                }
                other => return Err(err(format!("unknown record '{other}'"))),
            }
        }
        scene.ok_or(SceneError::Parse {
            line: 0,
            msg: "missing workspace header".into(),
        })
    }
}

/// Per-object planner inputs: bounding box, center lifted to the object's top, height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectDescriptor {
    pub bbox: RotatedRect,
    pub center: Vec3,
    pub height: f64,
}

pub fn object_descriptor(scene: &Scene, id: usize) -> Result<ObjectDescriptor, SceneError> {
    let o = scene.get(id)?;
    let c = o.footprint.center;
    Ok(ObjectDescriptor {
        bbox: o.footprint,
        center: Vec3::new(c.x, c.y, o.height),
        height: o.height,
    })
}

fn uniform(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.1 > range.0 {
        rng.random_range(range.0..range.1)
    } else {
        range.0
    }
}

/// Draws a scene with `round(pe * n)` envelope-type objects and the rest suck-type.
pub fn spawn_scene(
    pe: f64,
    n_objects: usize,
    catalog: &Catalog,
    params: &SceneParams,
    seed: u64,
) -> Result<Scene, SceneError> {
    params.validate()?;
    if n_objects == 0 || n_objects > params.max_objects {
        return Err(SceneError::InvalidParams(format!(
            "object count {n_objects} outside [1, {}]",
            params.max_objects
        )));
    }
    if !(0.0..=1.0).contains(&pe) {
        return Err(SceneError::InvalidParams(format!(
            "pe must lie in [0, 1], got {pe}"
        )));
    }
    let env = catalog.of_type(GraspType::Envelope);
    let suck = catalog.of_type(GraspType::Suck);
    let n_env = envelope_count(pe, n_objects);
    if (n_env > 0 && env.is_empty()) || (n_env < n_objects && suck.is_empty()) {
        return Err(SceneError::InvalidParams(
            "catalog lacks templates of a requested grasp type".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks: Vec<&ObjectTemplate> = (0..n_objects)
        .map(|i| {
            let pool = if i < n_env { &env } else { &suck };
            pool[rng.random_range(0..pool.len())]
        })
        .collect();
    picks.shuffle(&mut rng);
    struct Draw<'a> {
        id: usize,
        tpl: &'a ObjectTemplate,
        half_a: f64,
        half_b: f64,
        own_height: f64,
        flat_fraction: f64,
    }
    let mut draws: Vec<Draw> = picks
        .into_iter()
        .enumerate()
        .map(|(id, tpl)| Draw {
            id,
            tpl,
            half_a: quantize(0.5 * uniform(&mut rng, tpl.long)),
            half_b: quantize(0.5 * uniform(&mut rng, tpl.short)),
            own_height: uniform(&mut rng, tpl.height),
            flat_fraction: uniform(&mut rng, tpl.flat_fraction),
        })
        .collect();
    // Largest footprints go down first; packing is far more reliable that way.
    draws.sort_by(|a, b| {
        (b.half_a * b.half_b)
            .total_cmp(&(a.half_a * a.half_b))
            .then(a.id.cmp(&b.id))
    });

    let side = quantize(params.workspace_side);
    let mut scene = Scene::empty(side, seed);
    for d in draws {
        let Draw {
            id: index,
            tpl,
            half_a,
            half_b,
            own_height,
            flat_fraction,
        } = d;
        let mut placed = false;
        for _ in 0..MAX_REJECTIONS {
            let angle = quantize(rng.random_range(0.0..180.0));
            let (sin, cos) = angle.to_radians().sin_cos();
            let ex = half_a * cos.abs() + half_b * sin.abs();
            let ey = half_a * sin.abs() + half_b * cos.abs();
            let mut coord = |e: f64| {
                if side - e > e {
                    quantize(rng.random_range(e..side - e))
                } else {
                    quantize(0.5 * side)
                }
            };
            let (cx, cy) = (coord(ex), coord(ey));
            let Ok(footprint) = RotatedRect::new(Vec2::new(cx, cy), half_a, half_b, angle) else {
                continue;
            };
            let footprint = RotatedRect {
                half_long: quantize(footprint.half_long),
                half_short: quantize(footprint.half_short),
                axis_angle: quantize(footprint.axis_angle),
                ..footprint
            };
            if footprint.axis_angle >= 180.0 {
                continue;
            }
            let Some(base) = admissible(&scene, &footprint, params) else {
                continue;
            };
            let obj = SceneObject {
                id: index,
                footprint,
                height: quantize(base + own_height),
                affinity: tpl.affinity(catalog.dual_affinity),
                top_flat_area: quantize(flat_fraction * footprint.area()).min(footprint.area()),
            };
            if scene.check_object(&obj).is_err() {
                continue;
            }
            scene.objects.push(obj);
            placed = true;
            break;
        }
        if !placed {
            return Err(SceneError::Crowded { index });
        }
    }
    scene.objects.sort_by_key(|o| o.id);
    Ok(scene)
}

/// Base height for a candidate footprint, or `None` if the clutter rule rejects it.
fn admissible(scene: &Scene, fp: &RotatedRect, params: &SceneParams) -> Option<f64> {
    match params.clutter {
        ClutterMode::Light => scene
            .objects
            .iter()
            .all(|o| !o.footprint.intersects(fp))
            .then_some(0.0),
        ClutterMode::Isolated => scene
            .objects
            .iter()
            .all(|o| o.footprint.separation(fp) >= params.isolation_gap)
            .then_some(0.0),
        ClutterMode::Heavy => {
            let mut base: f64 = 0.0;
            for o in &scene.objects {
                let overlap = o.footprint.overlap_area(fp);
                if overlap <= 0.0 {
                    continue;
                }
                let smaller = o.footprint.area().min(fp.area());
                if overlap > params.max_overlap * smaller {
                    return None;
                }
                base = base.max(o.height);
            }
            Some(base)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixture_counts() {
        let cat = Catalog::default();
        let p = SceneParams::default();
        for (pe, n, expect) in [(1.0, 5, 5), (0.3, 10, 3), (0.0, 4, 0), (0.5, 10, 5)] {
            let s = spawn_scene(pe, n, &cat, &p, 11).unwrap();
            let env = s.objects.iter().filter(|o| o.height > 0.04).count();
            assert_eq!(env, expect, "pe={pe} n={n}");
        }
    }

    #[test]
    fn spawn_is_deterministic() {
        let cat = Catalog::default();
        let p = SceneParams::default();
        assert_eq!(
            spawn_scene(0.5, 10, &cat, &p, 7).unwrap(),
            spawn_scene(0.5, 10, &cat, &p, 7).unwrap()
        );
        assert_ne!(
            spawn_scene(0.5, 10, &cat, &p, 7).unwrap(),
            spawn_scene(0.5, 10, &cat, &p, 8).unwrap()
        );
    }

    #[test]
    fn text_round_trip_is_exact() {
        let cat = Catalog::default();
        for clutter in [ClutterMode::Light, ClutterMode::Heavy] {
            let p = SceneParams {
                clutter,
                ..SceneParams::default()
            };
            let s = spawn_scene(0.4, 10, &cat, &p, 3).unwrap();
            let back = Scene::from_text(&s.to_text()).unwrap();
            assert_eq!(s, back);
            assert_eq!(s.to_text(), back.to_text());
        }
    }

    #[test]
    fn parse_errors_name_the_line() {
        let e = Scene::from_text("workspace 0.25 1\nobj 0 0.1 0.1 0.02 0.01 10 0.05 wobbly 0\n")
            .unwrap_err();
        assert!(matches!(e, SceneError::Parse { line: 2, .. }));
        assert!(Scene::from_text("obj 0 0.1 0.1 0.02 0.01 10 0.05 both 0\n").is_err());
    }

    #[test]
    fn light_scenes_have_no_overlap() {
        let cat = Catalog::default();
        let s = spawn_scene(0.5, 10, &cat, &SceneParams::default(), 21).unwrap();
        for (i, a) in s.objects.iter().enumerate() {
            for b in &s.objects[i + 1..] {
                assert!(!a.footprint.intersects(&b.footprint));
            }
        }
    }

    #[test]
    fn crowded_workspace_errors() {
        let cat = Catalog::default();
        let p = SceneParams {
            workspace_side: 0.1,
            isolation_gap: 0.05,
            clutter: ClutterMode::Isolated,
            ..SceneParams::default()
        };
        assert!(matches!(
            spawn_scene(0.5, 10, &cat, &p, 1),
            Err(SceneError::Crowded { .. })
        ));
    }

    #[test]
    fn descriptor_lifts_center() {
        let mut s = Scene::empty(0.25, 0);
        let fp = RotatedRect::new(Vec2::new(0.1, 0.1), 0.02, 0.01, 0.0).unwrap();
        s.push(SceneObject {
            id: 4,
            footprint: fp,
            height: 0.05,
            affinity: Affinity::Both,
            top_flat_area: 0.0,
        })
        .unwrap();
        let d = object_descriptor(&s, 4).unwrap();
        assert_eq!(d.center, Vec3::new(0.1, 0.1, 0.05));
        assert!(matches!(
            object_descriptor(&s, 5),
            Err(SceneError::UnknownId(5))
        ));
    }
}
