//! Episodes, the geometric grasp-outcome model and rewards.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{unit, Vec2};
use crate::gripper::GripperParams;
use crate::planner::{
    obstacle_field, plan_envelope, plan_suck, EnvelopePlan, PlanError, PlannerOptions, SuckPlan,
};
use crate::scene::{
    object_descriptor, render_depth, render_masks, spawn_scene, Catalog, Heightmap, Mask,
    ObjectDescriptor, Scene, SceneError, SceneParams,
};

pub const REWARD_FULL_ES: f64 = 2.5;
pub const REWARD_SINGLE: f64 = 1.0;
pub const REWARD_SEMI_ES: f64 = 0.5;
pub const REWARD_FAIL: f64 = 0.0;
/// Every reward the environment can emit.
pub const REWARD_SET: [f64; 4] = [REWARD_FULL_ES, REWARD_SINGLE, REWARD_SEMI_ES, REWARD_FAIL];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("episode is terminal")]
    Terminal,
    #[error("object {0} is not on the table")]
    UnknownTarget(usize),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("invalid environment parameter: {0}")]
    InvalidParams(String),
    #[error("reward configuration violates {0}")]
    RewardSanity(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionKind {
    Enveloping,
    Sucking,
    EnvelopingThenSucking,
}

impl ActionKind {
    pub const ALL: [ActionKind; 3] = [
        ActionKind::Enveloping,
        ActionKind::Sucking,
        ActionKind::EnvelopingThenSucking,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Enveloping => "enveloping",
            ActionKind::Sucking => "sucking",
            ActionKind::EnvelopingThenSucking => "enveloping_then_sucking",
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ActionKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown action kind '{s}'"))
    }
}

/// What the agent asks for. For enveloping_then_sucking `primary` is enveloped
/// and `secondary` sucked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActionRequest {
    pub kind: ActionKind,
    pub primary: usize,
    pub secondary: Option<usize>,
}

impl ActionRequest {
    pub fn envelope(id: usize) -> Self {
        ActionRequest {
            kind: ActionKind::Enveloping,
            primary: id,
            secondary: None,
        }
    }

    pub fn suck(id: usize) -> Self {
        ActionRequest {
            kind: ActionKind::Sucking,
            primary: id,
            secondary: None,
        }
    }

    pub fn envelope_then_suck(envelope_id: usize, suck_id: usize) -> Self {
        ActionRequest {
            kind: ActionKind::EnvelopingThenSucking,
            primary: envelope_id,
            secondary: Some(suck_id),
        }
    }

    pub fn targets(&self) -> Vec<usize> {
        std::iter::once(self.primary)
            .chain(self.secondary)
            .collect()
    }
}

/// A request with its resolved plans. A plan error means the primitive fails.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspAction {
    pub request: ActionRequest,
    pub envelope: Option<Result<EnvelopePlan, PlanError>>,
    pub suck: Option<Result<SuckPlan, PlanError>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub envelope_success: Option<bool>,
    pub suck_success: Option<bool>,
    pub reward: f64,
}

impl Outcome {
    pub fn objects_picked(&self) -> usize {
        self.envelope_success.unwrap_or(false) as usize
            + self.suck_success.unwrap_or(false) as usize
    }

    /// At least one object left the table.
    pub fn any_success(&self) -> bool {
        self.objects_picked() > 0
    }

    pub fn full_success(&self) -> bool {
        self.envelope_success.unwrap_or(true) && self.suck_success.unwrap_or(true)
    }
}

pub fn reward_of(
    kind: ActionKind,
    envelope_success: Option<bool>,
    suck_success: Option<bool>,
) -> f64 {
    match kind {
        ActionKind::Enveloping => {
            if envelope_success == Some(true) {
                REWARD_SINGLE
            } else {
                REWARD_FAIL
            }
        }
        ActionKind::Sucking => {
            if suck_success == Some(true) {
                REWARD_SINGLE
            } else {
                REWARD_FAIL
            }
        }
        ActionKind::EnvelopingThenSucking => {
            match (envelope_success == Some(true)) as u8 + (suck_success == Some(true)) as u8 {
                2 => REWARD_FULL_ES,
                1 => REWARD_SEMI_ES,
                _ => REWARD_FAIL,
            }
        }
    }
}

/// Reward ordering the learning signal depends on.
pub fn check_reward_sanity(gamma: f64) -> Result<(), EnvError> {
    if !(REWARD_FULL_ES > 2.0 * REWARD_SINGLE) {
        return Err(EnvError::RewardSanity(
            "full ES reward > sum of two single rewards".into(),
        ));
    }
    if !(REWARD_FULL_ES > REWARD_SINGLE + gamma * REWARD_SINGLE) {
        return Err(EnvError::RewardSanity(format!(
            "full ES reward > 1 + {gamma} * 1"
        )));
    }
    if !(REWARD_SEMI_ES < REWARD_SINGLE) {
        return Err(EnvError::RewardSanity(
            "semi ES reward < single reward".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvParams {
    /// Probability that a geometrically sound primitive still fails.
    pub p_fail: f64,
    /// Minimum combined obstacle factor in the sucking direction.
    pub clearance: f64,
    /// Episode length limit as a multiple of the initial object count.
    pub max_steps_factor: usize,
    /// Radius of the fingertip collision disk (m).
    pub finger_radius: f64,
    /// Slack on the enveloping width test (m).
    pub width_tolerance: f64,
}

impl Default for EnvParams {
    fn default() -> Self {
        EnvParams {
            p_fail: 0.08,
            clearance: 0.4,
            max_steps_factor: 3,
            finger_radius: 0.002,
            width_tolerance: 1e-4,
        }
    }
}

impl EnvParams {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !(0.0..=1.0).contains(&self.p_fail) {
            return Err(EnvError::InvalidParams(format!(
                "p_fail must lie in [0, 1], got {}",
                self.p_fail
            )));
        }
        if !(0.0..=1.0).contains(&self.clearance) {
            return Err(EnvError::InvalidParams(format!(
                "clearance must lie in [0, 1], got {}",
                self.clearance
            )));
        }
        if self.max_steps_factor == 0 {
            return Err(EnvError::InvalidParams(
                "max_steps_factor must be at least 1".into(),
            ));
        }
        if !(self.finger_radius >= 0.0 && self.width_tolerance >= 0.0) {
            return Err(EnvError::InvalidParams(
                "finger_radius and width_tolerance must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Fingertip contact points of an envelope plan in the workspace plane.
pub fn fingertip_points(plan: &EnvelopePlan) -> [Vec2; 4] {
    let c = Vec2::new(plan.q_e.x, plan.q_e.y);
    let r = plan.opening_d / std::f64::consts::SQRT_2;
    [0, 1, 2, 3].map(|k| c + unit(plan.alpha_e + 45.0 + 90.0 * k as f64) * r)
}

/// Geometric part of the enveloping outcome.
pub fn envelope_feasible(scene: &Scene, plan: &EnvelopePlan, params: &EnvParams) -> bool {
    let Ok(target) = scene.get(plan.target_id) else {
        return false;
    };
    if !target.affinity.can_envelope() {
        return false;
    }
    if target.footprint.width_across(plan.alpha_e) > plan.opening_d + params.width_tolerance {
        return false;
    }
    let tips = fingertip_points(plan);
    scene
        .objects
        .iter()
        .filter(|o| o.id != plan.target_id)
        .all(|o| {
            tips.iter()
                .all(|p| o.footprint.distance_to_point(p) > params.finger_radius)
        })
}

/// Geometric part of the sucking outcome. `check_blocking` adds the rule that a
/// neighbor right behind the suck point along the approach blocks the sucker.
pub fn suck_feasible(
    scene: &Scene,
    plan: &SuckPlan,
    gripper: &GripperParams,
    params: &EnvParams,
    check_blocking: bool,
) -> bool {
    let Ok(target) = scene.get(plan.target_id) else {
        return false;
    };
    if !target.affinity.can_suck() || target.top_flat_area < gripper.sucker_area() {
        return false;
    }
    let Ok(field) = obstacle_field(scene, plan.target_id) else {
        return false;
    };
    if field.value_at(plan.alpha_s) < params.clearance {
        return false;
    }
    if check_blocking {
        let u = unit(plan.alpha_s);
        let c = target.center();
        let b = target.footprint.boundary_distance(plan.alpha_s);
        let a = c + u * b;
        let z = c + u * (b + gripper.sucker_diameter);
        if scene
            .objects
            .iter()
            .any(|o| o.id != plan.target_id && o.footprint.intersects_segment(&a, &z))
        {
            return false;
        }
    }
    true
}

/// Scene observation handed to policies.
#[derive(Debug, Clone, PartialEq)]
pub struct StateView {
    pub heightmap: Heightmap,
    pub masks: Vec<Mask>,
    pub descriptors: Vec<(usize, ObjectDescriptor)>,
}

pub fn observe(scene: &Scene, resolution: usize) -> StateView {
    let descriptors = scene
        .objects
        .iter()
        .map(|o| (o.id, object_descriptor(scene, o.id).expect("id from scene")))
        .collect();
    StateView {
        heightmap: render_depth(scene, resolution),
        masks: render_masks(scene, resolution),
        descriptors,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub action: GraspAction,
    pub outcome: Outcome,
    pub removed: Vec<usize>,
    /// No objects remain.
    pub terminal: bool,
    /// The step limit was reached with objects left.
    pub truncated: bool,
}

/// One rollout on a scene. Objects never move except when picked.
#[derive(Debug, Clone)]
pub struct Episode {
    pub scene: Scene,
    pub step_count: usize,
    pub max_steps: usize,
    pub params: EnvParams,
    pub gripper: GripperParams,
    pub planner: PlannerOptions,
    rng: ChaCha8Rng,
}

impl Episode {
    pub fn new(
        scene: Scene,
        params: EnvParams,
        gripper: GripperParams,
        planner: PlannerOptions,
        seed: u64,
    ) -> Self {
        let max_steps = params.max_steps_factor * scene.len().max(1);
        Episode {
            scene,
            step_count: 0,
            max_steps,
            params,
            gripper,
            planner,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.scene.is_empty() || self.step_count >= self.max_steps
    }

    pub fn plan(&self, req: &ActionRequest) -> Result<GraspAction, EnvError> {
        for id in req.targets() {
            self.scene
                .get(id)
                .map_err(|_| EnvError::UnknownTarget(id))?;
        }
        let g = &self.gripper;
        let o = &self.planner;
        Ok(match req.kind {
            ActionKind::Enveloping => {
                if req.secondary.is_some() {
                    return Err(EnvError::InvalidAction(
                        "enveloping takes one target".into(),
                    ));
                }
                GraspAction {
                    request: *req,
                    envelope: Some(plan_envelope(&self.scene, req.primary, g, o)),
                    suck: None,
                }
            }
            ActionKind::Sucking => {
                if req.secondary.is_some() {
                    return Err(EnvError::InvalidAction("sucking takes one target".into()));
                }
                GraspAction {
                    request: *req,
                    envelope: None,
                    suck: Some(plan_suck(&self.scene, req.primary, g, o)),
                }
            }
            ActionKind::EnvelopingThenSucking => {
                let Some(s) = req.secondary else {
                    return Err(EnvError::InvalidAction(
                        "enveloping_then_sucking needs two targets".into(),
                    ));
                };
                if s == req.primary {
                    return Err(EnvError::InvalidAction(format!(
                        "targets must differ, both are {s}"
                    )));
                }
                let rest = self.scene.without(req.primary)?;
                GraspAction {
                    request: *req,
                    envelope: Some(plan_envelope(&self.scene, req.primary, g, o)),
                    suck: Some(plan_suck(&rest, s, g, o)),
                }
            }
        })
    }

    /// Decides the outcome of `action` against the current scene without changing it.
    pub fn attempt_outcome(&mut self, action: &GraspAction) -> Outcome {
        let noisy = |ok: bool, rng: &mut ChaCha8Rng| {
            let flip = rng.random::<f64>() < self.params.p_fail;
            ok && !flip
        };
        let env_ok = action.envelope.as_ref().map(|p| {
            let geo = p
                .as_ref()
                .is_ok_and(|p| envelope_feasible(&self.scene, p, &self.params));
            noisy(geo, &mut self.rng)
        });
        let suck_ok = action.suck.as_ref().map(|p| {
            let es = action.request.kind == ActionKind::EnvelopingThenSucking;
            let geo = match p {
                Ok(plan) => {
                    let held = if es && env_ok == Some(true) {
                        self.scene.without(action.request.primary).ok()
                    } else {
                        None
                    };
                    let scene = held.as_ref().unwrap_or(&self.scene);
                    suck_feasible(scene, plan, &self.gripper, &self.params, es)
                }
                Err(_) => false,
            };
            noisy(geo, &mut self.rng)
        });
        Outcome {
            envelope_success: env_ok,
            suck_success: suck_ok,
            reward: reward_of(action.request.kind, env_ok, suck_ok),
        }
    }

    pub fn step(&mut self, req: &ActionRequest) -> Result<StepResult, EnvError> {
        if self.is_terminal() {
            return Err(EnvError::Terminal);
        }
        let action = self.plan(req)?;
        let outcome = self.attempt_outcome(&action);
        let mut removed = Vec::new();
        if outcome.envelope_success == Some(true) {
            removed.push(req.primary);
        }
        if outcome.suck_success == Some(true) {
            removed.push(req.secondary.unwrap_or(req.primary));
        }
        for id in &removed {
            self.scene.remove(*id)?;
        }
        self.step_count += 1;
        let terminal = self.scene.is_empty();
        let truncated = !terminal && self.step_count >= self.max_steps;
        Ok(StepResult {
            action,
            outcome,
            removed,
            terminal,
            truncated,
        })
    }
}

/// Everything needed to create episodes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnvSetup {
    pub gripper: GripperParams,
    pub scene: SceneParams,
    pub catalog: Catalog,
    pub env: EnvParams,
}

impl EnvSetup {
    /// Fresh episode on a spawned scene. Scene and outcome noise use separate streams of `seed`.
    pub fn episode(
        &self,
        pe: f64,
        n: usize,
        planner: PlannerOptions,
        seed: u64,
    ) -> Result<Episode, EnvError> {
        self.env.validate()?;
        let scene = spawn_with_retry(pe, n, &self.catalog, &self.scene, derive_seed(seed, 1))?;
        Ok(Episode::new(
            scene,
            self.env,
            self.gripper,
            planner,
            derive_seed(seed, 2),
        ))
    }
}

/// Spawns a scene, retrying with derived seeds when placement fails.
pub fn spawn_with_retry(
    pe: f64,
    n: usize,
    catalog: &Catalog,
    params: &SceneParams,
    seed: u64,
) -> Result<Scene, SceneError> {
    let mut last = None;
    for attempt in 0..32u64 {
        let s = if attempt == 0 {
            seed
        } else {
            derive_seed(seed, attempt)
        };
        match spawn_scene(pe, n, catalog, params, s) {
            Ok(scene) => return Ok(scene),
            Err(e @ SceneError::Crowded { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Mixes a stream index into a seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One row of the per-step CSV log.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub episode: usize,
    pub step: usize,
    pub result: StepResult,
}

fn opt_f(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn opt_b(v: Option<bool>) -> String {
    v.map(|b| (b as u8).to_string()).unwrap_or_default()
}

impl StepRecord {
    pub const HEADER: &'static str =
        "episode,step,kind,targets,alpha_e,gamma_e,d,alpha_s,gamma_s,sucker_index,envelope_success,suck_success,reward";

    pub fn to_csv(&self) -> String {
        let a = &self.result.action;
        let env = a.envelope.as_ref().and_then(|p| p.as_ref().ok());
        let suck = a.suck.as_ref().and_then(|p| p.as_ref().ok());
        let targets: Vec<String> = a.request.targets().iter().map(|t| t.to_string()).collect();
        let o = &self.result.outcome;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.episode,
            self.step,
            a.request.kind,
            targets.join(";"),
            opt_f(env.map(|p| p.alpha_e)),
            opt_f(env.map(|p| p.gamma_e)),
            opt_f(env.map(|p| p.opening_d)),
            opt_f(suck.map(|p| p.alpha_s)),
            opt_f(suck.map(|p| p.gamma_s)),
            suck.map(|p| p.sucker_index.to_string()).unwrap_or_default(),
            opt_b(o.envelope_success),
            opt_b(o.suck_success),
            o.reward
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RotatedRect;
    use crate::scene::{Affinity, SceneObject};

    fn obj(
        id: usize,
        x: f64,
        y: f64,
        hl: f64,
        hs: f64,
        ang: f64,
        h: f64,
        aff: Affinity,
    ) -> SceneObject {
        SceneObject {
            id,
            footprint: RotatedRect::new(Vec2::new(x, y), hl, hs, ang).unwrap(),
            height: h,
            affinity: aff,
            top_flat_area: 4.0 * hl * hs * 0.6,
        }
    }

    fn episode(scene: Scene, p_fail: f64) -> Episode {
        let params = EnvParams {
            p_fail,
            ..EnvParams::default()
        };
        Episode::new(
            scene,
            params,
            GripperParams::default(),
            PlannerOptions::default(),
            5,
        )
    }

    #[test]
    fn reward_table() {
        use ActionKind::*;
        assert_eq!(
            reward_of(EnvelopingThenSucking, Some(true), Some(true)),
            2.5
        );
        assert_eq!(
            reward_of(EnvelopingThenSucking, Some(true), Some(false)),
            0.5
        );
        assert_eq!(
            reward_of(EnvelopingThenSucking, Some(false), Some(true)),
            0.5
        );
        assert_eq!(
            reward_of(EnvelopingThenSucking, Some(false), Some(false)),
            0.0
        );
        assert_eq!(reward_of(Sucking, None, Some(false)), 0.0);
        assert_eq!(reward_of(Enveloping, Some(true), None), 1.0);
        check_reward_sanity(0.5).unwrap();
    }

    #[test]
    fn isolated_envelope_succeeds_and_terminates() {
        let mut s = Scene::empty(0.25, 0);
        s.push(obj(
            0,
            0.12,
            0.12,
            0.03,
            0.02,
            20.0,
            0.06,
            Affinity::EnvelopeOnly,
        ))
        .unwrap();
        let mut ep = episode(s, 0.0);
        let r = ep.step(&ActionRequest::envelope(0)).unwrap();
        assert_eq!(r.outcome.envelope_success, Some(true));
        assert_eq!(r.outcome.reward, 1.0);
        assert!(r.terminal && ep.is_terminal());
        assert!(matches!(
            ep.step(&ActionRequest::envelope(0)),
            Err(EnvError::Terminal)
        ));
    }

    #[test]
    fn suck_on_envelope_only_object_fails() {
        let mut s = Scene::empty(0.25, 0);
        s.push(obj(
            0,
            0.12,
            0.12,
            0.03,
            0.02,
            20.0,
            0.06,
            Affinity::EnvelopeOnly,
        ))
        .unwrap();
        let mut ep = episode(s, 0.0);
        let r = ep.step(&ActionRequest::suck(0)).unwrap();
        assert_eq!(r.outcome.suck_success, Some(false));
        assert!(r.removed.is_empty());
    }

    #[test]
    fn semi_successful_es_removes_one_object() {
        let mut s = Scene::empty(0.25, 0);
        s.push(obj(
            0,
            0.06,
            0.06,
            0.02,
            0.02,
            0.0,
            0.06,
            Affinity::EnvelopeOnly,
        ))
        .unwrap();
        s.push(obj(
            1,
            0.18,
            0.18,
            0.03,
            0.02,
            0.0,
            0.06,
            Affinity::EnvelopeOnly,
        ))
        .unwrap();
        let mut ep = episode(s, 0.0);
        let r = ep.step(&ActionRequest::envelope_then_suck(0, 1)).unwrap();
        assert_eq!(
            (r.outcome.envelope_success, r.outcome.suck_success),
            (Some(true), Some(false))
        );
        assert_eq!(r.outcome.reward, 0.5);
        assert_eq!(r.removed, vec![0]);
        assert_eq!(ep.scene.ids(), vec![1]);
    }

    #[test]
    fn surrounded_suck_fails_on_clearance() {
        let mut s = Scene::empty(0.25, 0);
        s.push(obj(
            0,
            0.125,
            0.125,
            0.012,
            0.012,
            0.0,
            0.012,
            Affinity::SuckOnly,
        ))
        .unwrap();
        let walls = [
            (0.160, 0.125, 90.0),
            (0.090, 0.125, 90.0),
            (0.125, 0.160, 0.0),
            (0.125, 0.090, 0.0),
        ];
        for (i, (x, y, a)) in walls.iter().enumerate() {
            s.push(obj(
                i + 1,
                *x,
                *y,
                0.05,
                0.005,
                *a,
                0.08,
                Affinity::EnvelopeOnly,
            ))
            .unwrap();
        }
        let field = obstacle_field(&s, 0).unwrap();
        let best = field.samples.iter().copied().fold(0.0, f64::max);
        assert!(best < 0.5, "max combined factor {best}");
        let mut ep = episode(s, 0.0);
        ep.params.clearance = 0.5;
        let r = ep.step(&ActionRequest::suck(0)).unwrap();
        assert_eq!(r.outcome.suck_success, Some(false));
    }

    #[test]
    fn unknown_and_malformed_actions_error() {
        let mut s = Scene::empty(0.25, 0);
        s.push(obj(0, 0.12, 0.12, 0.03, 0.02, 20.0, 0.06, Affinity::Both))
            .unwrap();
        let mut ep = episode(s, 0.0);
        assert!(matches!(
            ep.step(&ActionRequest::suck(4)),
            Err(EnvError::UnknownTarget(4))
        ));
        assert!(matches!(
            ep.step(&ActionRequest::envelope_then_suck(0, 0)),
            Err(EnvError::InvalidAction(_))
        ));
        assert_eq!(ep.step_count, 0);
    }

    #[test]
    fn fingertips_hit_close_neighbour() {
        let mut s = Scene::empty(0.25, 0);
        s.push(obj(
            0,
            0.1,
            0.1,
            0.03,
            0.02,
            0.0,
            0.06,
            Affinity::EnvelopeOnly,
        ))
        .unwrap();
        s.push(obj(
            1,
            0.1,
            0.126,
            0.03,
            0.005,
            0.0,
            0.02,
            Affinity::SuckOnly,
        ))
        .unwrap();
        let mut ep = episode(s, 0.0);
        let r = ep.step(&ActionRequest::envelope(0)).unwrap();
        assert_eq!(r.outcome.envelope_success, Some(false));
    }

    #[test]
    fn log_row_has_all_columns() {
        let mut s = Scene::empty(0.25, 0);
        s.push(obj(
            0,
            0.12,
            0.12,
            0.03,
            0.02,
            20.0,
            0.06,
            Affinity::EnvelopeOnly,
        ))
        .unwrap();
        let mut ep = episode(s, 0.0);
        let r = ep.step(&ActionRequest::envelope(0)).unwrap();
        let row = StepRecord {
            episode: 0,
            step: 0,
            result: r,
        }
        .to_csv();
        assert_eq!(
            row.split(',').count(),
            StepRecord::HEADER.split(',').count()
        );
        assert!(row.starts_with("0,0,enveloping,0,20.000000,-25.000000,0.040000,"));
    }
}
