mod common;

use graspsim::geometry::{RotatedRect, Sector, Vec2, Vec3};
use graspsim::gripper::GripperParams;
use graspsim::planner::{
    gamma_e, obstacle_field, plan_envelope, plan_suck, select_sucking_zone, sucker_branch,
    sucker_target_in_gripper, ObstacleFactor, ObstacleField, PlannerOptions,
};
use graspsim::scene::{Affinity, Scene, SceneObject};
use proptest::prelude::*;

fn factor() -> impl Strategy<Value = ObstacleFactor> {
    (0.0..360.0f64, 5.0..200.0f64, 0.05..1.0f64, 0..20u8).prop_map(|(start, width, f, full)| {
        ObstacleFactor {
            id: 0,
            f,
            sector: if full == 0 {
                Sector::Full
            } else {
                Sector::arc(start, start + width)
            },
        }
    })
}

fn field() -> impl Strategy<Value = ObstacleField> {
    prop::collection::vec(factor(), 1..7).prop_map(|mut fs| {
        for (i, f) in fs.iter_mut().enumerate() {
            f.id = i + 1;
        }
        ObstacleField::from_factors(0, fs)
    })
}

fn scene_objects() -> impl Strategy<Value = Vec<(f64, f64, f64, f64, f64, f64)>> {
    prop::collection::vec(
        (
            0.045..0.455f64,
            0.045..0.455f64,
            0.005..0.03f64,
            0.005..0.03f64,
            0.0..180.0f64,
            0.01..0.1f64,
        ),
        1..8,
    )
}

fn build(objs: &[(f64, f64, f64, f64, f64, f64)]) -> Scene {
    let mut s = Scene::empty(0.5, 0);
    for (id, &(x, y, a, b, ang, h)) in objs.iter().enumerate() {
        let footprint = RotatedRect::new(Vec2::new(x, y), a, b, ang).unwrap();
        s.push(SceneObject {
            id,
            footprint,
            height: h,
            affinity: Affinity::Both,
            top_flat_area: footprint.area(),
        })
        .unwrap();
    }
    s
}

#[test]
fn gamma_e_branch_table() {
    for k in 0..180 {
        let a = k as f64;
        let g = gamma_e(a);
        let expect = if k <= 90 { a - 45.0 } else { a - 135.0 };
        assert_eq!(g, expect);
        assert!((-45.0..=45.0).contains(&g));
        assert!(g < 45.0 || k == 90, "alpha {a}");
        // Fingers are four-fold symmetric: the yawed hand is aligned with the axis.
        assert_eq!((a - 45.0 - g).rem_euclid(90.0), 0.0);
    }
}

#[test]
fn sucker_branch_table() {
    for k in 0..360 {
        let a = k as f64;
        let (idx, g) = sucker_branch(a);
        let expect_idx = match k {
            0..=45 => 1,
            46..=135 => 2,
            136..=225 => 3,
            226..=315 => 4,
            _ => 1,
        };
        assert_eq!(idx, expect_idx, "alpha {a}");
        assert!(g > -45.0 && g <= 45.0, "alpha {a} gamma {g}");
        assert_eq!((a - g).rem_euclid(360.0), 90.0 * (idx as f64 - 1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn chosen_zone_is_optimal(f in field(), xi in prop::sample::select(vec![15.0, 30.0, 45.0, 60.0, 90.0])) {
        let arcs = common::arcs_of(&f);
        prop_assert_eq!(&f.samples, &common::brute_field(&arcs));
        let zone = select_sucking_zone(&f, xi);
        match common::brute_best(&arcs, xi) {
            None => {
                prop_assert!(zone.bounds.is_none());
                prop_assert_eq!(zone.alpha_s, 0.0);
            }
            Some((best, zones)) => {
                prop_assert_eq!(zone.value, best);
                let (s, e) = zone.bounds.expect("a zone was chosen");
                let chosen = zones.iter().copied().find(|z| z.0 == s && z.1 == e);
                prop_assert!(chosen.is_some(), "bounds {:?} not a maximal run of {:?}", (s, e), zones);
                let z = chosen.unwrap();
                prop_assert!(common::zone_extent(z) >= xi);
                prop_assert_eq!(z.2, best);
                prop_assert!(common::zone_contains(z, zone.alpha_s), "alpha {} outside {:?}", zone.alpha_s, z);
            }
        }
    }

    #[test]
    fn combined_field_is_below_each_factor(f in field()) {
        for k in 0..360 {
            let t = k as f64;
            let min = f.factors.iter().map(|x| x.at(t)).fold(1.0, f64::min);
            prop_assert!(f.samples[k] <= min + 1e-15);
        }
    }

    #[test]
    fn scene_fields_are_bounded(objs in scene_objects()) {
        let s = build(&objs);
        let f = obstacle_field(&s, 0).unwrap();
        prop_assert!(f.samples.iter().all(|v| *v > 0.0 && *v <= 1.0));
        prop_assert_eq!(f.factors.len(), s.len() - 1);
    }

    #[test]
    fn poses_map_gripper_targets_to_world_targets(objs in scene_objects()) {
        let s = build(&objs);
        let g = GripperParams::default();
        let o = PlannerOptions::default();
        for obj in &s.objects {
            if let Ok(p) = plan_envelope(&s, obj.id, &g, &o) {
                prop_assert!(p.pose.rotation.is_valid(1e-9));
                prop_assert!((-45.0..=45.0).contains(&p.gamma_e));
                prop_assert!(p.opening_d <= g.d_max);
                let h_f = graspsim::gripper::fingertip_height(&g, &p.finger);
                let q_eg = Vec3::new(0.0, 0.0, g.h_p + h_f - p.q_e.z.max(0.05));
                prop_assert!((p.pose.transform_point(&q_eg) - p.q_e).norm() <= 1e-9);
            }
            let Ok(p) = plan_suck(&s, obj.id, &g, &o) else {
                prop_assert!(obj.top_flat_area < g.sucker_area());
                continue;
            };
            prop_assert!(p.pose.rotation.is_valid(1e-9));
            prop_assert!(p.gamma_s > -45.0 && p.gamma_s <= 45.0);
            let (h_s, d_s) = graspsim::gripper::sucker_position(&g, &g.suck_state(), p.theta_s);
            let q_sg = sucker_target_in_gripper(p.alpha_s, d_s, g.h_p + h_s);
            prop_assert!((p.pose.transform_point(&q_sg) - p.q_s).norm() <= 1e-9);
        }
    }
}
