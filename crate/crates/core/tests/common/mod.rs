//! Independent re-implementations used to check the library.
#![allow(dead_code)]

use graspsim::gripper::GripperParams;
use graspsim::planner::ObstacleField;

/// Fingertip and sucker offsets straight from the tendon displacement, without
/// going through `FingerState`. Returns `(h_f, d_f, h_s, d_s)`.
pub fn kinematics_from_tendon(
    p: &GripperParams,
    d_t: f64,
    theta_s_deg: f64,
) -> (f64, f64, f64, f64) {
    let th_f = d_t / p.h;
    let r = p.l_f / th_f;
    let th_t = p.theta_t * std::f64::consts::PI / 180.0;
    let th_s = theta_s_deg * std::f64::consts::PI / 180.0;
    let h_f = r * (th_t.sin() + (th_f - th_t).sin());
    let d_f = p.l_p - r * (th_t.cos() - (th_f - th_t).cos());
    let h_s = h_f - p.l_s1 * th_s.sin() + p.l_s2 * th_s.cos();
    let d_s = d_f + p.l_s1 * th_s.cos() + p.l_s2 * th_s.sin();
    (h_f, d_f, h_s, d_s)
}

/// Opening distance for a tendon displacement via the closed form in `d_t`.
pub fn opening_from_tendon(p: &GripperParams, d_t: f64) -> f64 {
    let th_t = p.theta_t.to_radians();
    std::f64::consts::SQRT_2 * (p.l_p - p.l_f * p.h / d_t * (th_t.cos() - (d_t / p.h - th_t).cos()))
}

/// Inclusive `(start, end, value)` run of integer degrees.
pub type Zone = (usize, usize, f64);

/// Closed arc membership on integer degrees.
fn arc_contains(start: f64, end: f64, t: f64) -> bool {
    if start <= end {
        t >= start && t <= end
    } else {
        t >= start || t <= end
    }
}

/// Combined factor at integer degrees, from raw `(start, end, f)` arcs.
/// `None` arcs cover every direction.
pub fn brute_field(arcs: &[(Option<(f64, f64)>, f64)]) -> Vec<f64> {
    (0..360)
        .map(|k| {
            let t = k as f64;
            arcs.iter()
                .filter(|(a, _)| a.is_none_or(|(s, e)| arc_contains(s, e, t)))
                .map(|(_, f)| *f)
                .product()
        })
        .collect()
}

/// Maximal circular runs of equal value as `(start, end, value)`, inclusive.
/// Extent convention: `end - start` degrees (mod 360).
pub fn brute_zones(samples: &[f64]) -> Vec<(usize, usize, f64)> {
    let n = samples.len();
    if samples.iter().all(|v| *v == samples[0]) {
        return vec![(0, n - 1, samples[0])];
    }
    // Rotate so that index `k0` starts a run.
    let k0 = (0..n)
        .find(|&k| samples[k] != samples[(k + n - 1) % n])
        .unwrap();
    let mut zones = Vec::new();
    let mut s = k0;
    for step in 1..=n {
        let k = (k0 + step) % n;
        if step == n || samples[k] != samples[s] {
            zones.push((s, (k + n - 1) % n, samples[s]));
            s = k;
        }
    }
    zones
}

pub fn zone_extent(z: (usize, usize, f64)) -> f64 {
    ((z.1 + 360 - z.0) % 360) as f64
}

pub fn zone_contains(z: (usize, usize, f64), deg: f64) -> bool {
    arc_contains(z.0 as f64, z.1 as f64, deg.rem_euclid(360.0))
}

/// Best qualifying value after relaxing the mildest neighbours, plus the relaxed field.
/// Returns `None` when all directions are equal after relaxation.
pub fn brute_best(
    arcs: &[(Option<(f64, f64)>, f64)],
    xi: f64,
) -> Option<(f64, Vec<Zone>)> {
    let mut arcs = arcs.to_vec();
    loop {
        let samples = brute_field(&arcs);
        let zones = brute_zones(&samples);
        if zones.len() == 1 {
            return None;
        }
        let best = zones
            .iter()
            .filter(|z| zone_extent(**z) >= xi)
            .map(|z| z.2)
            .fold(None, |acc: Option<f64>, v| {
                Some(acc.map_or(v, |a| a.max(v)))
            });
        if let Some(b) = best {
            return Some((b, zones));
        }
        let i =
            (0..arcs.len())
                .filter(|&i| arcs[i].1 < 1.0)
                .fold(None, |acc: Option<usize>, i| match acc {
                    Some(j) if arcs[j].1 >= arcs[i].1 => Some(j),
                    _ => Some(i),
                })?;
        arcs[i].1 = 1.0;
    }
}

/// Raw arcs of a library field.
pub fn arcs_of(field: &ObstacleField) -> Vec<(Option<(f64, f64)>, f64)> {
    use graspsim::geometry::Sector;
    field
        .factors
        .iter()
        .map(|f| match f.sector {
            Sector::Full => (None, f.f),
            Sector::Empty => (Some((0.0, -1.0)), 1.0),
            Sector::Arc { start, end } => (Some((start, end)), f.f),
        })
        .collect()
}

/// Theoretical efficiency in percent as printed in the reference table.
pub const THEORY_TABLE_PERCENT: [f64; 11] = [
    100.0, 111.1, 125.0, 142.9, 166.7, 200.0, 166.7, 142.9, 125.0, 111.1, 100.0,
];
