use graspsim::env::{
    check_reward_sanity, spawn_with_retry, ActionRequest, EnvParams, EnvSetup, Episode, REWARD_SET,
};
use graspsim::gripper::GripperParams;
use graspsim::planner::PlannerOptions;
use graspsim::scene::{Catalog, ClutterMode, Scene, SceneParams};
use proptest::prelude::*;

/// Turns raw numbers into a legal request on the current scene.
fn request(scene: &Scene, kind: u8, a: usize, b: usize) -> ActionRequest {
    let ids = scene.ids();
    let p = ids[a % ids.len()];
    match kind % 3 {
        0 => ActionRequest::envelope(p),
        1 => ActionRequest::suck(p),
        _ if ids.len() > 1 => {
            let mut s = ids[b % ids.len()];
            if s == p {
                s = ids[(b + 1) % ids.len()];
            }
            ActionRequest::envelope_then_suck(p, s)
        }
        _ => ActionRequest::suck(p),
    }
}

fn isolated(seed: u64, pe: f64, n: usize) -> Scene {
    let params = SceneParams {
        workspace_side: 0.5,
        clutter: ClutterMode::Isolated,
        ..SceneParams::default()
    };
    spawn_with_retry(pe, n, &Catalog::default(), &params, seed).unwrap()
}

fn actions() -> impl Strategy<Value = Vec<(u8, usize, usize)>> {
    prop::collection::vec((any::<u8>(), any::<usize>(), any::<usize>()), 1..40)
}

#[test]
fn default_rewards_are_sane() {
    check_reward_sanity(0.5).unwrap();
    check_reward_sanity(0.0).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rewards_stay_in_the_reward_set(seed in any::<u64>(), k in 0..=10usize, acts in actions()) {
        let setup = EnvSetup::default();
        let mut ep = setup.episode(k as f64 / 10.0, 10, PlannerOptions::default(), seed).unwrap();
        for (kind, a, b) in acts {
            if ep.is_terminal() {
                break;
            }
            let before = ep.scene.len();
            let req = request(&ep.scene, kind, a, b);
            let r = ep.step(&req).unwrap();
            prop_assert!(REWARD_SET.contains(&r.outcome.reward), "reward {}", r.outcome.reward);
            prop_assert_eq!(ep.scene.len() + r.outcome.objects_picked(), before);
            prop_assert_eq!(r.removed.len(), r.outcome.objects_picked());
            for id in &r.removed {
                prop_assert!(ep.scene.get(*id).is_err());
            }
        }
    }

    #[test]
    fn identical_seeds_and_actions_give_identical_outcomes(seed in any::<u64>(), acts in actions()) {
        let setup = EnvSetup::default();
        let mut a = setup.episode(0.5, 10, PlannerOptions::default(), seed).unwrap();
        let mut b = setup.episode(0.5, 10, PlannerOptions::default(), seed).unwrap();
        prop_assert_eq!(&a.scene, &b.scene);
        for (kind, x, y) in acts {
            if a.is_terminal() {
                break;
            }
            let req = request(&a.scene, kind, x, y);
            prop_assert_eq!(a.step(&req).unwrap(), b.step(&req).unwrap());
        }
        prop_assert_eq!(&a.scene, &b.scene);
    }

    #[test]
    fn isolated_compatible_primitives_always_succeed(seed in any::<u64>(), k in 0..=10usize) {
        let scene = isolated(seed, k as f64 / 10.0, 10);
        let params = EnvParams { p_fail: 0.0, ..EnvParams::default() };
        let run = |req: ActionRequest| {
            let mut ep = Episode::new(scene.clone(), params, GripperParams::default(), PlannerOptions::default(), seed);
            ep.step(&req).unwrap().outcome
        };
        for o in &scene.objects {
            if o.affinity.can_envelope() {
                prop_assert_eq!(run(ActionRequest::envelope(o.id)).envelope_success, Some(true), "envelope {}", o.id);
            }
            if o.affinity.can_suck() {
                prop_assert_eq!(run(ActionRequest::suck(o.id)).suck_success, Some(true), "suck {}", o.id);
            }
        }
        for e in scene.objects.iter().filter(|o| o.affinity.can_envelope()) {
            for s in scene.objects.iter().filter(|o| o.affinity.can_suck() && o.id != e.id) {
                let out = run(ActionRequest::envelope_then_suck(e.id, s.id));
                prop_assert!(out.full_success(), "es {} {}: {:?}", e.id, s.id, out);
                prop_assert_eq!(out.reward, 2.5);
            }
        }
    }
}
