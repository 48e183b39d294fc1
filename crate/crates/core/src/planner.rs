//! Grasp geometry for the three primitives: enveloping orientation and opening,
//! the obstacle field and sucking-orientation search, and gripper poses.

use thiserror::Error;

use crate::geometry::{
    largest_sector_of_box, rot_x, rot_y, rot_z, wrap_deg_360, Pose, Rotation3, Sector, Vec3,
};
use crate::gripper::{
    fingertip_height, solve_bend_for_opening, sucker_normal_angle, sucker_position, FingerState,
    GripperError, GripperParams,
};
use crate::scene::{object_descriptor, Scene, SceneError};

/// Minimum planar center distance used in the obstacle factor (m).
pub const MIN_OBSTACLE_DISTANCE: f64 = 1e-3;
/// Lower bound on the enveloping approach offset (m).
pub const MIN_APPROACH_OFFSET: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("object {id} exceeds gripper opening: short side {short:.4} m > d_max {d_max:.4} m")]
    TooWide { id: usize, short: f64, d_max: f64 },
    #[error("unsuckable target {id}: flat area {area:.3e} m^2 below sucker area {needed:.3e} m^2")]
    Unsuckable { id: usize, area: f64, needed: f64 },
    #[error("envelope and suck targets must differ, both are {0}")]
    SameTarget(usize),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Gripper(#[from] GripperError),
}

/// Switches for the ablation baselines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerOptions {
    /// Align the envelope with the bounding box and search the sucking orientation.
    pub orientation_optimization: bool,
    /// Pre-shape the fingers to the object's short side instead of the full opening.
    pub preenveloping: bool,
    /// Minimum angular extent of a sucking zone (deg).
    pub xi_deg: f64,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        PlannerOptions {
            orientation_optimization: true,
            preenveloping: true,
            xi_deg: 45.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopePlan {
    pub target_id: usize,
    pub alpha_e: f64,
    pub gamma_e: f64,
    pub opening_d: f64,
    pub finger: FingerState,
    pub q_e: Vec3,
    pub pose: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuckPlan {
    pub target_id: usize,
    pub alpha_s: f64,
    pub gamma_s: f64,
    pub sucker_index: u8,
    pub theta_s: f64,
    pub q_s: Vec3,
    pub pose: Pose,
    /// Combined obstacle factor of the full field in the chosen direction.
    pub clearance: f64,
}

/// Wrist yaw for an enveloping orientation `alpha_e` in [0, 180).
pub fn gamma_e(alpha_e: f64) -> f64 {
    if alpha_e <= 90.0 {
        alpha_e - 45.0
    } else {
        alpha_e - 135.0
    }
}

/// Sucker index (1..=4) and wrist yaw for a sucking orientation in [0, 360).
pub fn sucker_branch(alpha_s: f64) -> (u8, f64) {
    if alpha_s <= 45.0 {
        (1, alpha_s)
    } else if alpha_s <= 135.0 {
        (2, alpha_s - 90.0)
    } else if alpha_s <= 225.0 {
        (3, alpha_s - 180.0)
    } else if alpha_s <= 315.0 {
        (4, alpha_s - 270.0)
    } else {
        (1, alpha_s - 360.0)
    }
}

/// Sucking orientation from the start and end of the best zone.
pub fn alpha_from_zone(start: f64, end: f64) -> f64 {
    let p = 0.5 * (start + end);
    if start <= end {
        p
    } else if p >= 180.0 {
        p - 180.0
    } else {
        p + 180.0
    }
}

/// Baseline orientation that turns the gripper upside down over the table.
pub fn base_rotation() -> Rotation3 {
    rot_x(180.0)
}

pub fn envelope_rotation(gamma_e: f64) -> Rotation3 {
    base_rotation() * rot_z(gamma_e)
}

pub fn suck_rotation(alpha_s: f64, gamma_s: f64, theta_s: f64) -> Rotation3 {
    let tilt = if alpha_s > 45.0 && alpha_s <= 135.0 {
        rot_x(-theta_s)
    } else if alpha_s > 135.0 && alpha_s <= 225.0 {
        rot_y(theta_s)
    } else if alpha_s > 225.0 && alpha_s <= 315.0 {
        rot_x(theta_s)
    } else {
        rot_y(-theta_s)
    };
    base_rotation() * rot_z(gamma_s) * tilt
}

/// Active sucker position in frame G.
pub fn sucker_target_in_gripper(alpha_s: f64, d_s: f64, z: f64) -> Vec3 {
    if alpha_s > 45.0 && alpha_s <= 135.0 {
        Vec3::new(0.0, -d_s, z)
    } else if alpha_s > 135.0 && alpha_s <= 225.0 {
        Vec3::new(-d_s, 0.0, z)
    } else if alpha_s > 225.0 && alpha_s <= 315.0 {
        Vec3::new(0.0, d_s, z)
    } else {
        Vec3::new(d_s, 0.0, z)
    }
}

pub fn plan_envelope(
    scene: &Scene,
    target_id: usize,
    gripper: &GripperParams,
    opts: &PlannerOptions,
) -> Result<EnvelopePlan, PlanError> {
    let desc = object_descriptor(scene, target_id)?;
    let short = desc.bbox.short_side();
    if short > gripper.d_max {
        return Err(PlanError::TooWide {
            id: target_id,
            short,
            d_max: gripper.d_max,
        });
    }
    let alpha_e = if opts.orientation_optimization {
        desc.bbox.axis_angle
    } else {
        0.0
    };
    let g = gamma_e(alpha_e);
    let opening_d = if opts.preenveloping {
        short
    } else {
        gripper.d_max
    };
    let finger = solve_bend_for_opening(gripper, opening_d)?;
    let h_f = fingertip_height(gripper, &finger);
    let q_e = desc.center;
    let delta = MIN_APPROACH_OFFSET.max(q_e.z);
    let q_eg = Vec3::new(0.0, 0.0, gripper.h_p + h_f - delta);
    let rotation = envelope_rotation(g);
    let pose = Pose::new(q_e - rotation.apply(&q_eg), rotation);
    Ok(EnvelopePlan {
        target_id,
        alpha_e,
        gamma_e: g,
        opening_d,
        finger,
        q_e,
        pose,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleFactor {
    pub id: usize,
    pub f: f64,
    pub sector: Sector,
}

impl ObstacleFactor {
    /// Angle-dependent factor of this neighbor.
    pub fn at(&self, deg: f64) -> f64 {
        if self.sector.contains(deg) {
            self.f
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleField {
    pub target_id: usize,
    pub factors: Vec<ObstacleFactor>,
    /// Combined factor at integer degrees 0..360.
    pub samples: Vec<f64>,
}

/// Penalty a neighbor of height `h_oi` at planar distance `d_oi` imposes on a target of height `h_o0`.
pub fn obstacle_factor(h_oi: f64, h_o0: f64, d_oi: f64) -> f64 {
    if h_oi > h_o0 {
        (-(h_oi - h_o0) / d_oi).exp()
    } else {
        1.0
    }
}

fn combine(factors: &[ObstacleFactor], values: &[f64]) -> Vec<f64> {
    (0..360)
        .map(|deg| {
            let t = deg as f64;
            factors.iter().zip(values).fold(
                1.0,
                |acc, (fac, &f)| if fac.sector.contains(t) { acc * f } else { acc },
            )
        })
        .collect()
}

impl ObstacleField {
    /// Builds a field directly from factors; `samples` is recomputed.
    pub fn from_factors(target_id: usize, factors: Vec<ObstacleFactor>) -> ObstacleField {
        let values: Vec<f64> = factors.iter().map(|f| f.f).collect();
        let samples = combine(&factors, &values);
        ObstacleField {
            target_id,
            factors,
            samples,
        }
    }

    /// Combined factor at the nearest integer degree.
    pub fn value_at(&self, deg: f64) -> f64 {
        let k = wrap_deg_360(deg.round()) as usize % 360;
        self.samples[k]
    }
}

pub fn obstacle_field(scene: &Scene, target_id: usize) -> Result<ObstacleField, PlanError> {
    let target = scene.get(target_id)?;
    let c0 = target.center();
    let factors = scene
        .objects
        .iter()
        .filter(|o| o.id != target_id)
        .map(|o| {
            let d = (o.center() - c0).norm().max(MIN_OBSTACLE_DISTANCE);
            let f = obstacle_factor(o.height, target.height, d);
            // A box that swallows the target center blocks every direction.
            let sector = largest_sector_of_box(&c0, &o.footprint).unwrap_or(Sector::Full);
            ObstacleFactor {
                id: o.id,
                f,
                sector,
            }
        })
        .collect();
    Ok(ObstacleField::from_factors(target_id, factors))
}

/// Outcome of the sucking-orientation search.
#[derive(Debug, Clone, PartialEq)]
pub struct SuckZone {
    pub alpha_s: f64,
    /// Inclusive integer-degree bounds; `start > end` wraps through 0.
    /// `None` when every direction is equally good.
    pub bounds: Option<(usize, usize)>,
    /// Combined factor of the zone in the (possibly relaxed) field.
    pub value: f64,
    /// Neighbors whose factor was reset to 1 before a zone qualified.
    pub relaxed: Vec<usize>,
}

/// Runs of constant value as inclusive `(start, end, value)`, in ascending order.
fn runs(samples: &[f64]) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    let mut s = 0;
    for t in 1..=samples.len() {
        if t == samples.len() || samples[t] != samples[s] {
            out.push((s, t - 1, samples[s]));
            s = t;
        }
    }
    out
}

/// Picks the sucking direction: the zone of maximal combined factor among those
/// spanning at least `xi_deg`. Equal zones resolve to the last in scan order, with
/// the zone wrapping through 0 deg considered last. When no zone qualifies the
/// mildest remaining neighbor is ignored and the search repeats.
pub fn select_sucking_zone(field: &ObstacleField, xi_deg: f64) -> SuckZone {
    let mut values: Vec<f64> = field.factors.iter().map(|f| f.f).collect();
    let mut relaxed = Vec::new();
    loop {
        if values.iter().all(|&f| f >= 1.0) {
            return SuckZone {
                alpha_s: 0.0,
                bounds: None,
                value: 1.0,
                relaxed,
            };
        }
        let fo = combine(&field.factors, &values);
        let rs = runs(&fo);
        if rs.len() == 1 {
            return SuckZone {
                alpha_s: 0.0,
                bounds: None,
                value: fo[0],
                relaxed,
            };
        }
        let merge = fo[0] == fo[359];
        let (first, last) = (rs[0], rs[rs.len() - 1]);
        let mut zones: Vec<(usize, usize, f64)> = Vec::new();
        let interior = if merge { &rs[1..rs.len() - 1] } else { &rs[..] };
        zones.extend_from_slice(interior);
        if merge {
            zones.push((last.0, first.1, first.2));
        }
        let mut best: Option<(usize, usize, f64)> = None;
        for &(s, e, v) in &zones {
            let extent = if s <= e {
                (e - s) as f64
            } else {
                (360 + e - s) as f64
            };
            if extent >= xi_deg && best.is_none_or(|b| v >= b.2) {
                best = Some((s, e, v));
            }
        }
        if let Some((s, e, v)) = best {
            let alpha_s = wrap_deg_360(alpha_from_zone(s as f64, e as f64));
            return SuckZone {
                alpha_s,
                bounds: Some((s, e)),
                value: v,
                relaxed,
            };
        }
        // Ignore the largest factor still below one; ties go to the lowest index.
        let mut pick: Option<usize> = None;
        for (i, &f) in values.iter().enumerate() {
            if f < 1.0 && pick.is_none_or(|p| f > values[p]) {
                pick = Some(i);
            }
        }
        let i = pick.expect("some factor is below one");
        values[i] = 1.0;
        relaxed.push(field.factors[i].id);
    }
}

pub fn select_sucking_orientation(field: &ObstacleField, xi_deg: f64) -> f64 {
    select_sucking_zone(field, xi_deg).alpha_s
}

pub fn plan_suck(
    scene: &Scene,
    target_id: usize,
    gripper: &GripperParams,
    opts: &PlannerOptions,
) -> Result<SuckPlan, PlanError> {
    let target = scene.get(target_id)?;
    let needed = gripper.sucker_area();
    if target.top_flat_area < needed {
        return Err(PlanError::Unsuckable {
            id: target_id,
            area: target.top_flat_area,
            needed,
        });
    }
    let field = obstacle_field(scene, target_id)?;
    let alpha_s = if opts.orientation_optimization {
        select_sucking_orientation(&field, opts.xi_deg)
    } else {
        0.0
    };
    let (sucker_index, gamma_s) = sucker_branch(alpha_s);
    let finger = gripper.suck_state();
    let theta_s = sucker_normal_angle(gripper, &finger);
    let (h_s, d_s) = sucker_position(gripper, &finger, theta_s);
    let rotation = suck_rotation(alpha_s, gamma_s, theta_s);
    let q_sg = sucker_target_in_gripper(alpha_s, d_s, gripper.h_p + h_s);
    let desc = object_descriptor(scene, target_id)?;
    let q_s = desc.center;
    let pose = Pose::new(q_s - rotation.apply(&q_sg), rotation);
    Ok(SuckPlan {
        target_id,
        alpha_s,
        gamma_s,
        sucker_index,
        theta_s,
        q_s,
        pose,
        clearance: field.value_at(alpha_s),
    })
}

/// Envelope on the full scene, then suck on the scene without the held object.
pub fn plan_envelope_then_suck(
    scene: &Scene,
    envelope_id: usize,
    suck_id: usize,
    gripper: &GripperParams,
    opts: &PlannerOptions,
) -> Result<(EnvelopePlan, SuckPlan), PlanError> {
    if envelope_id == suck_id {
        return Err(PlanError::SameTarget(envelope_id));
    }
    scene.get(suck_id)?;
    let env = plan_envelope(scene, envelope_id, gripper, opts)?;
    let rest = scene.without(envelope_id)?;
    let suck = plan_suck(&rest, suck_id, gripper, opts)?;
    Ok((env, suck))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{RotatedRect, Vec2};
    use crate::scene::{Affinity, SceneObject};

    fn obj(
        id: usize,
        x: f64,
        y: f64,
        hl: f64,
        hs: f64,
        ang: f64,
        h: f64,
        flat: f64,
    ) -> SceneObject {
        SceneObject {
            id,
            footprint: RotatedRect::new(Vec2::new(x, y), hl, hs, ang).unwrap(),
            height: h,
            affinity: Affinity::Both,
            top_flat_area: flat,
        }
    }

    #[test]
    fn gamma_e_branches() {
        assert_eq!(gamma_e(90.0), 45.0);
        assert_eq!(gamma_e(135.0), 0.0);
        assert_eq!(gamma_e(30.0), -15.0);
        assert_eq!(gamma_e(0.0), -45.0);
    }

    #[test]
    fn sucker_branches() {
        assert_eq!(sucker_branch(0.0), (1, 0.0));
        assert_eq!(sucker_branch(100.0), (2, 10.0));
        assert_eq!(sucker_branch(350.0), (1, -10.0));
        assert_eq!(sucker_branch(225.0), (3, 45.0));
        assert_eq!(sucker_branch(226.0), (4, -44.0));
    }

    #[test]
    fn zone_midpoints() {
        assert_eq!(alpha_from_zone(30.0, 90.0), 60.0);
        assert_eq!(alpha_from_zone(300.0, 60.0), 0.0);
        assert_eq!(alpha_from_zone(200.0, 100.0), 330.0);
        assert_eq!(alpha_from_zone(300.0, 20.0), 340.0);
    }

    #[test]
    fn obstacle_factor_values() {
        assert_eq!(obstacle_factor(0.05, 0.05, 0.1), 1.0);
        assert!((obstacle_factor(0.15, 0.05, 0.1) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(obstacle_factor(0.01, 0.05, 0.1), 1.0);
    }

    #[test]
    fn flat_neighbourhood_sucks_at_zero() {
        let mut s = Scene::empty(0.25, 0);
        s.push(obj(0, 0.1, 0.1, 0.03, 0.02, 0.0, 0.05, 0.001))
            .unwrap();
        s.push(obj(1, 0.2, 0.1, 0.02, 0.02, 0.0, 0.03, 0.001))
            .unwrap();
        let field = obstacle_field(&s, 0).unwrap();
        assert!(field.samples.iter().all(|v| *v == 1.0));
        let z = select_sucking_zone(&field, 45.0);
        assert_eq!(z.alpha_s, 0.0);
        assert!(z.bounds.is_none());
    }

    #[test]
    fn tall_neighbour_east_pushes_suck_west() {
        let mut s = Scene::empty(0.25, 0);
        s.push(obj(0, 0.1, 0.1, 0.03, 0.02, 0.0, 0.02, 0.001))
            .unwrap();
        s.push(obj(1, 0.18, 0.1, 0.02, 0.02, 0.0, 0.07, 0.0))
            .unwrap();
        let plan = plan_suck(&s, 0, &GripperParams::default(), &PlannerOptions::default()).unwrap();
        assert!((plan.alpha_s - 180.0).abs() <= 1.0, "{}", plan.alpha_s);
        assert_eq!(plan.sucker_index, 3);
        assert_eq!(plan.clearance, 1.0);
        assert!(plan.pose.rotation.is_valid(1e-9));
    }

    #[test]
    fn envelope_pose_maps_target_frame_point() {
        let mut s = Scene::empty(0.25, 0);
        s.push(obj(0, 0.1, 0.1, 0.03, 0.02, 30.0, 0.06, 0.0))
            .unwrap();
        let g = GripperParams::default();
        let p = plan_envelope(&s, 0, &g, &PlannerOptions::default()).unwrap();
        assert!((p.alpha_e - 30.0).abs() < 1e-9);
        assert!((p.gamma_e + 15.0).abs() < 1e-9);
        assert!((p.opening_d - 0.04).abs() < 1e-12);
        let h_f = fingertip_height(&g, &p.finger);
        let q_eg = Vec3::new(0.0, 0.0, g.h_p + h_f - 0.06);
        assert!((p.pose.transform_point(&q_eg) - p.q_e).norm() < 1e-12);
    }

    #[test]
    fn envelope_rejects_wide_objects_and_suck_rejects_round_ones() {
        let mut s = Scene::empty(0.25, 0);
        s.push(obj(0, 0.1, 0.1, 0.05, 0.045, 0.0, 0.06, 0.0))
            .unwrap();
        let g = GripperParams::default();
        let o = PlannerOptions::default();
        assert!(matches!(
            plan_envelope(&s, 0, &g, &o),
            Err(PlanError::TooWide { .. })
        ));
        assert!(matches!(
            plan_suck(&s, 0, &g, &o),
            Err(PlanError::Unsuckable { .. })
        ));
        assert!(matches!(
            plan_envelope(&s, 9, &g, &o),
            Err(PlanError::Scene(SceneError::UnknownId(9)))
        ));
    }

    #[test]
    fn ablation_fixes_orientation_and_opening() {
        let mut s = Scene::empty(0.25, 0);
        s.push(obj(0, 0.1, 0.1, 0.03, 0.02, 30.0, 0.06, 0.001))
            .unwrap();
        let g = GripperParams::default();
        let o = PlannerOptions {
            orientation_optimization: false,
            preenveloping: false,
            ..PlannerOptions::default()
        };
        let p = plan_envelope(&s, 0, &g, &o).unwrap();
        assert_eq!((p.alpha_e, p.opening_d), (0.0, g.d_max));
        assert_eq!(plan_suck(&s, 0, &g, &o).unwrap().alpha_s, 0.0);
    }

    #[test]
    fn fallback_relaxes_mildest_neighbour() {
        // Two neighbours whose sectors leave no 45 deg zone at the best value.
        let f = vec![
            ObstacleFactor {
                id: 7,
                f: 0.5,
                sector: Sector::arc(0.0, 170.0),
            },
            ObstacleFactor {
                id: 8,
                f: 0.9,
                sector: Sector::arc(180.0, 350.0),
            },
        ];
        let field = ObstacleField::from_factors(0, f);
        let z = select_sucking_zone(&field, 45.0);
        // Gaps are 9 deg wide, so the 0.9 region wins without relaxing.
        assert_eq!(z.relaxed, Vec::<usize>::new());
        assert_eq!(z.value, 0.9);
        let tight = select_sucking_zone(&field, 200.0);
        assert_eq!(tight.relaxed, vec![8, 7]);
        assert_eq!(tight.alpha_s, 0.0);
    }
}
