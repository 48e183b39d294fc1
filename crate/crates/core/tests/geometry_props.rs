use graspsim::geometry::{
    bearing_deg, largest_sector_of_box, min_area_rect, rot_x, rot_y, rot_z, wrap_deg_180,
    RotatedRect, Rotation3, Vec2, Vec3,
};
use proptest::prelude::*;

fn compose(a: &Rotation3, b: &Rotation3) -> Rotation3 {
    Rotation3::from_matrix(a.matrix() * b.matrix()).unwrap()
}

fn rotation() -> impl Strategy<Value = Rotation3> {
    (-180.0..180.0f64, -180.0..180.0f64, -180.0..180.0f64)
        .prop_map(|(a, b, c)| compose(&compose(&rot_z(a), &rot_y(b)), &rot_x(c)))
}

fn angle_gap_mod_180(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

proptest! {
    #[test]
    fn rotations_preserve_norm(r in rotation(), v in prop::array::uniform3(-10.0..10.0f64)) {
        let v = Vec3::new(v[0], v[1], v[2]);
        prop_assert!((r.apply(&v).norm() - v.norm()).abs() <= 1e-9 * (1.0 + v.norm()));
        prop_assert!(r.is_valid(1e-9));
    }

    #[test]
    fn composition_is_associative(a in rotation(), b in rotation(), c in rotation(), v in prop::array::uniform3(-1.0..1.0f64)) {
        let v = Vec3::new(v[0], v[1], v[2]);
        let left = compose(&compose(&a, &b), &c).apply(&v);
        let right = compose(&a, &compose(&b, &c)).apply(&v);
        prop_assert!((left - right).norm() <= 1e-9);
        prop_assert!((left - a.apply(&b.apply(&c.apply(&v)))).norm() <= 1e-9);
    }

    #[test]
    fn min_rect_ignores_point_order(
        pts in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 4..40),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let pts: Vec<Vec2> = pts.into_iter().map(|(x, y)| Vec2::new(x, y)).collect();
        let Ok(a) = min_area_rect(&pts) else { return Ok(()); };
        let mut shuffled = pts.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let b = min_area_rect(&shuffled).unwrap();
        prop_assert!((a.area() - b.area()).abs() <= 1e-12);
        prop_assert!((a.center - b.center).norm() <= 1e-9);
        prop_assert!((a.half_long - b.half_long).abs() <= 1e-9);
    }

    #[test]
    fn min_rect_follows_rigid_motion(
        hl in 0.02..0.2f64,
        hs in 0.005..0.1f64,
        ang in 0.0..180.0f64,
        rot in -180.0..180.0f64,
        shift in prop::array::uniform2(-1.0..1.0f64),
    ) {
        prop_assume!(hl > 1.3 * hs);
        let r = RotatedRect::new(Vec2::new(0.1, -0.2), hl, hs, ang).unwrap();
        let mut pts: Vec<Vec2> = r.corners().to_vec();
        pts.push(r.center);
        let before = min_area_rect(&pts).unwrap();
        let (s, c) = rot.to_radians().sin_cos();
        let moved: Vec<Vec2> = pts
            .iter()
            .map(|p| Vec2::new(c * p.x - s * p.y + shift[0], s * p.x + c * p.y + shift[1]))
            .collect();
        let after = min_area_rect(&moved).unwrap();
        prop_assert!(angle_gap_mod_180(after.axis_angle, wrap_deg_180(before.axis_angle + rot)) <= 1e-6);
        let cb = before.center;
        let expect = Vec2::new(c * cb.x - s * cb.y + shift[0], s * cb.x + c * cb.y + shift[1]);
        prop_assert!((after.center - expect).norm() <= 1e-9);
        prop_assert!((after.area() - before.area()).abs() <= 1e-9);
    }

    #[test]
    fn largest_sector_contains_center_ray(
        tx in -1.0..1.0f64,
        ty in -1.0..1.0f64,
        cx in -1.0..1.0f64,
        cy in -1.0..1.0f64,
        hl in 0.01..0.3f64,
        hs in 0.01..0.3f64,
        ang in 0.0..180.0f64,
    ) {
        let target = Vec2::new(tx, ty);
        let bbox = RotatedRect::new(Vec2::new(cx, cy), hl, hs, ang).unwrap();
        prop_assume!(!bbox.contains(&target) && bbox.distance_to_point(&target) > 1e-6);
        let sector = largest_sector_of_box(&target, &bbox).unwrap();
        prop_assert!(sector.contains(bearing_deg(&target, &bbox.center)), "{sector:?}");
        for c in bbox.corners() {
            prop_assert!(sector.contains(bearing_deg(&target, &c)));
        }
    }
}
