//! Constant-curvature model of the four-finger gripper.
//!
//! Each finger is a circular arc of length `l_f` that leaves the palm tilted
//! outward by `theta_t` and curls inward as the tendon is pulled.

use thiserror::Error;

use crate::geometry::Vec3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GripperError {
    #[error("invalid gripper parameter: {0}")]
    InvalidParams(String),
    #[error("target opening {target:.6} m outside feasible range [{min:.6}, {max:.6}] m")]
    NoRoot { target: f64, min: f64, max: f64 },
    #[error("invalid finger state: {0}")]
    InvalidState(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GripperParams {
    /// Torsion-spring radius from the palm axis (m).
    pub l_p: f64,
    /// Spring offset along the palm axis (m).
    pub h_p: f64,
    /// Finger tilt from vertical (deg).
    pub theta_t: f64,
    /// Finger length (m).
    pub l_f: f64,
    /// Tendon offset from the finger back (m).
    pub h: f64,
    pub l_s1: f64,
    pub l_s2: f64,
    /// Largest commanded opening distance (m).
    pub d_max: f64,
    pub sucker_diameter: f64,
    /// Finger bend used while sucking (deg); sets the sucker normal angle.
    pub suck_bend_deg: f64,
}

impl Default for GripperParams {
    fn default() -> Self {
        GripperParams {
            l_p: 0.05,
            h_p: 0.02,
            theta_t: 15.0,
            l_f: 0.11,
            h: 0.008,
            l_s1: 0.015,
            l_s2: 0.01,
            d_max: 0.07,
            sucker_diameter: 0.02,
            suck_bend_deg: 60.0,
        }
    }
}

impl GripperParams {
    pub fn validate(&self) -> Result<(), GripperError> {
        let lengths = [
            ("l_p", self.l_p),
            ("h_p", self.h_p),
            ("l_f", self.l_f),
            ("h", self.h),
            ("l_s1", self.l_s1),
            ("l_s2", self.l_s2),
            ("d_max", self.d_max),
            ("sucker_diameter", self.sucker_diameter),
        ];
        for (name, v) in lengths {
            if !(v.is_finite() && v > 0.0) {
                return Err(GripperError::InvalidParams(format!(
                    "{name} must be a positive length, got {v}"
                )));
            }
        }
        if !(self.theta_t > 0.0 && self.theta_t < 90.0) {
            return Err(GripperError::InvalidParams(format!(
                "theta_t must lie in (0, 90) deg, got {}",
                self.theta_t
            )));
        }
        if self.d_max > std::f64::consts::SQRT_2 * self.l_p {
            return Err(GripperError::InvalidParams(format!(
                "d_max {} exceeds sqrt(2)*l_p = {:.6}",
                self.d_max,
                std::f64::consts::SQRT_2 * self.l_p
            )));
        }
        if !(self.suck_bend_deg > 0.0 && self.suck_bend_deg <= 180.0) {
            return Err(GripperError::InvalidParams(format!(
                "suck_bend_deg must lie in (0, 180], got {}",
                self.suck_bend_deg
            )));
        }
        Ok(())
    }

    pub fn sucker_area(&self) -> f64 {
        let r = 0.5 * self.sucker_diameter;
        std::f64::consts::PI * r * r
    }

    /// Finger state held while sucking.
    pub fn suck_state(&self) -> FingerState {
        FingerState::from_bend(self, self.suck_bend_deg)
    }
}

/// Bend configuration of one finger. `r` is infinite for a straight finger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerState {
    pub theta_f: f64,
    pub r: f64,
    pub d_t: f64,
}

impl FingerState {
    /// State with bend angle `theta_f` (deg); radius and tendon displacement follow.
    pub fn from_bend(params: &GripperParams, theta_f: f64) -> FingerState {
        let th = theta_f.to_radians();
        let r = if theta_f == 0.0 {
            f64::INFINITY
        } else {
            params.l_f / th
        };
        FingerState {
            theta_f,
            r,
            d_t: params.h * th,
        }
    }

    /// State produced by tendon displacement `d_t` (m).
    pub fn from_tendon(params: &GripperParams, d_t: f64) -> FingerState {
        FingerState::from_bend(params, (d_t / params.h).to_degrees())
    }

    pub fn is_straight(&self) -> bool {
        self.theta_f == 0.0
    }
}

/// Vertical distance from the torsion spring to the fingertip.
pub fn fingertip_height(params: &GripperParams, state: &FingerState) -> f64 {
    let tt = params.theta_t.to_radians();
    if state.is_straight() {
        return params.l_f * tt.cos();
    }
    let tf = state.theta_f.to_radians();
    state.r * (tt.sin() + (tf - tt).sin())
}

/// Radial distance from the palm axis to the fingertip.
pub fn fingertip_radius(params: &GripperParams, state: &FingerState) -> f64 {
    let tt = params.theta_t.to_radians();
    if state.is_straight() {
        return params.l_p + params.l_f * tt.sin();
    }
    let tf = state.theta_f.to_radians();
    params.l_p - state.r * (tt.cos() - (tf - tt).cos())
}

/// Sucker normal angle from vertical (deg) for a given bend.
pub fn sucker_normal_angle(params: &GripperParams, state: &FingerState) -> f64 {
    state.theta_f - params.theta_t
}

/// `(h_s, d_s)`: vertical and radial offset of the sucker from the torsion spring.
pub fn sucker_position(params: &GripperParams, state: &FingerState, theta_s: f64) -> (f64, f64) {
    let h_f = fingertip_height(params, state);
    let d_f = fingertip_radius(params, state);
    let (s, c) = theta_s.to_radians().sin_cos();
    let h_s = h_f - params.l_s1 * s + params.l_s2 * c;
    let d_s = d_f + params.l_s1 * c + params.l_s2 * s;
    (h_s, d_s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TipCoords {
    /// Rows S1..S4 in frame G.
    pub suckers: [Vec3; 4],
    /// Rows F1..F4 in frame G.
    pub fingertips: [Vec3; 4],
}

fn four_fold(radius: f64, z: f64) -> [Vec3; 4] {
    [
        Vec3::new(radius, 0.0, z),
        Vec3::new(0.0, -radius, z),
        Vec3::new(-radius, 0.0, z),
        Vec3::new(0.0, radius, z),
    ]
}

pub fn all_tip_and_sucker_coords(
    params: &GripperParams,
    state: &FingerState,
    theta_s: f64,
) -> TipCoords {
    let h_f = fingertip_height(params, state);
    let d_f = fingertip_radius(params, state);
    let (h_s, d_s) = sucker_position(params, state, theta_s);
    TipCoords {
        suckers: four_fold(d_s, params.h_p + h_s),
        fingertips: four_fold(d_f, params.h_p + h_f),
    }
}

pub fn opening_distance(params: &GripperParams, state: &FingerState) -> f64 {
    std::f64::consts::SQRT_2 * fingertip_radius(params, state)
}

/// Bend curvature `1/r`, linear in tendon displacement.
pub fn curvature(params: &GripperParams, state: &FingerState) -> f64 {
    state.d_t / (params.h * params.l_f)
}

/// Bend that yields opening distance `d_target`, tolerance 1e-6 m.
///
/// Scans the bend angle over (0, 180] deg at 1 deg steps, takes the first
/// bracket, then bisects.
pub fn solve_bend_for_opening(
    params: &GripperParams,
    d_target: f64,
) -> Result<FingerState, GripperError> {
    params.validate()?;
    let g = |deg: f64| opening_distance(params, &FingerState::from_bend(params, deg)) - d_target;
    let grid: Vec<f64> = (0..=180).map(|k| g(k as f64)).collect();
    let lo_val = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_val = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let infeasible = || GripperError::NoRoot {
        target: d_target,
        min: d_target + lo_val,
        max: d_target + hi_val,
    };
    if !(d_target > 0.0 && d_target <= params.d_max) {
        return Err(infeasible());
    }
    let bracket = (1..=180).find_map(|k| {
        if grid[k] == 0.0 {
            Some((k as f64, k as f64))
        } else if grid[k - 1].signum() != grid[k].signum() {
            Some(((k - 1) as f64, k as f64))
        } else {
            None
        }
    });
    let (mut a, mut b) = bracket.ok_or_else(infeasible)?;
    let ga = g(a);
    for _ in 0..200 {
        if b - a <= 0.0 {
            break;
        }
        let m = 0.5 * (a + b);
        let gm = g(m);
        if gm.abs() <= 1e-9 || b - a < 1e-12 {
            a = m;
            b = m;
            break;
        }
        if gm.signum() == ga.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    let state = FingerState::from_bend(params, 0.5 * (a + b));
    if (opening_distance(params, &state) - d_target).abs() > 1e-6 {
        return Err(infeasible());
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_bend_returns_spring_radius() {
        let p = GripperParams::default();
        let s = FingerState::from_bend(&p, 2.0 * p.theta_t);
        let tt = p.theta_t.to_radians();
        assert!((fingertip_height(&p, &s) - 2.0 * s.r * tt.sin()).abs() < 1e-12);
        assert!((fingertip_radius(&p, &s) - p.l_p).abs() < 1e-12);
    }

    #[test]
    fn bend_equal_to_tilt() {
        let p = GripperParams::default();
        let s = FingerState::from_bend(&p, p.theta_t);
        let tt = p.theta_t.to_radians();
        assert!((fingertip_height(&p, &s) - s.r * tt.sin()).abs() < 1e-12);
        assert!((fingertip_radius(&p, &s) - (p.l_p - s.r * (tt.cos() - 1.0))).abs() < 1e-12);
    }

    #[test]
    fn straight_limit_is_continuous() {
        let p = GripperParams::default();
        let s0 = FingerState::from_bend(&p, 0.0);
        let s1 = FingerState::from_bend(&p, 1e-6);
        assert!((fingertip_height(&p, &s0) - fingertip_height(&p, &s1)).abs() < 1e-8);
        assert!((fingertip_radius(&p, &s0) - fingertip_radius(&p, &s1)).abs() < 1e-8);
    }

    #[test]
    fn sucker_offsets() {
        let mut p = GripperParams::default();
        let s = FingerState::from_bend(&p, 40.0);
        let (h_s, d_s) = sucker_position(&p, &s, 0.0);
        assert!((h_s - fingertip_height(&p, &s) - p.l_s2).abs() < 1e-12);
        assert!((d_s - fingertip_radius(&p, &s) - p.l_s1).abs() < 1e-12);
        p.l_s1 = 0.0;
        p.l_s2 = 0.0;
        let (h_s, d_s) = sucker_position(&p, &s, 25.0);
        assert_eq!(
            (h_s, d_s),
            (fingertip_height(&p, &s), fingertip_radius(&p, &s))
        );
    }

    #[test]
    fn solver_hits_symmetric_root() {
        let p = GripperParams {
            d_max: std::f64::consts::SQRT_2 * 0.05,
            ..GripperParams::default()
        };
        let s = solve_bend_for_opening(&p, std::f64::consts::SQRT_2 * p.l_p).unwrap();
        assert!((s.theta_f - 2.0 * p.theta_t).abs() < 1e-6);
    }

    #[test]
    fn solver_rejects_out_of_range() {
        let p = GripperParams::default();
        assert!(matches!(
            solve_bend_for_opening(&p, 0.0),
            Err(GripperError::NoRoot { .. })
        ));
        assert!(matches!(
            solve_bend_for_opening(&p, p.d_max * 1.5),
            Err(GripperError::NoRoot { .. })
        ));
    }

    #[test]
    fn default_params_are_valid() {
        GripperParams::default().validate().unwrap();
        let bad = GripperParams {
            d_max: 0.12,
            ..GripperParams::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn curvature_matches_inverse_radius() {
        let p = GripperParams::default();
        let s = FingerState::from_bend(&p, 70.0);
        assert!((curvature(&p, &s) - 1.0 / s.r).abs() < 1e-9);
        assert_eq!(curvature(&p, &FingerState::from_tendon(&p, 0.0)), 0.0);
    }
}
