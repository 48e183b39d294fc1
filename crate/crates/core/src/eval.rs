//! Metrics, efficiency theory, the oracle policy and Pe sweeps.

use rayon::prelude::*;
use thiserror::Error;

use crate::env::{
    derive_seed, ActionKind, ActionRequest, EnvError, EnvSetup, Episode, Outcome, StepRecord,
    StepResult,
};
use crate::learner::{Agent, LearnError};
use crate::planner::PlannerOptions;
use crate::scene::{Affinity, Scene};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no actions were executed")]
    NoActions,
    #[error("scene has {0} objects, the exhaustive oracle supports at most {max}", max = ORACLE_MAX_OBJECTS)]
    TooManyObjects(usize),
    #[error("invalid sweep parameter: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

/// Action and outcome counts of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    pub env_succ: usize,
    pub env_fail: usize,
    pub suck_succ: usize,
    pub suck_fail: usize,
    pub es_full: usize,
    pub es_semi: usize,
    pub es_fail: usize,
    pub objects_picked: usize,
    pub actions_executed: usize,
}

impl RunStats {
    pub fn record(&mut self, kind: ActionKind, outcome: &Outcome) {
        let picked = outcome.objects_picked();
        match kind {
            ActionKind::Enveloping if picked == 1 => self.env_succ += 1,
            ActionKind::Enveloping => self.env_fail += 1,
            ActionKind::Sucking if picked == 1 => self.suck_succ += 1,
            ActionKind::Sucking => self.suck_fail += 1,
            ActionKind::EnvelopingThenSucking => match picked {
                2 => self.es_full += 1,
                1 => self.es_semi += 1,
                _ => self.es_fail += 1,
            },
        }
        self.objects_picked += picked;
        self.actions_executed += 1;
    }

    pub fn merge(&mut self, o: &RunStats) {
        self.env_succ += o.env_succ;
        self.env_fail += o.env_fail;
        self.suck_succ += o.suck_succ;
        self.suck_fail += o.suck_fail;
        self.es_full += o.es_full;
        self.es_semi += o.es_semi;
        self.es_fail += o.es_fail;
        self.objects_picked += o.objects_picked;
        self.actions_executed += o.actions_executed;
    }

    pub fn es_actions(&self) -> usize {
        self.es_full + self.es_semi + self.es_fail
    }

    /// The bookkeeping identities between the counters hold.
    pub fn is_consistent(&self) -> bool {
        self.objects_picked == self.env_succ + self.suck_succ + 2 * self.es_full + self.es_semi
            && self.actions_executed
                == self.env_succ
                    + self.env_fail
                    + self.suck_succ
                    + self.suck_fail
                    + self.es_actions()
    }

    /// Successful actions over executed actions; a semi-successful ES counts as a success.
    pub fn success_rate(&self) -> Result<f64, EvalError> {
        self.ratio(self.env_succ + self.suck_succ + self.es_full + self.es_semi)
    }

    /// Success rate counting only fully successful ES actions.
    pub fn success_rate_full_only(&self) -> Result<f64, EvalError> {
        self.ratio(self.env_succ + self.suck_succ + self.es_full)
    }

    /// Objects picked over executed actions.
    pub fn grasping_efficiency(&self) -> Result<f64, EvalError> {
        self.ratio(self.objects_picked)
    }

    fn ratio(&self, num: usize) -> Result<f64, EvalError> {
        if self.actions_executed == 0 {
            return Err(EvalError::NoActions);
        }
        Ok(num as f64 / self.actions_executed as f64)
    }
}

/// Best achievable efficiency when a fraction `pe` of objects needs enveloping.
pub fn theoretical_efficiency(pe: f64) -> f64 {
    if pe < 0.5 {
        1.0 / (1.0 - pe)
    } else {
        1.0 / pe
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectations {
    /// Mean efficiency over a uniform `pe`.
    pub eta: f64,
    /// Expected share of enveloping, sucking and two-object actions.
    pub e: f64,
    pub s: f64,
    pub es: f64,
}

pub fn theoretical_expectations() -> Expectations {
    Expectations {
        eta: 2.0 * std::f64::consts::LN_2,
        e: 0.25,
        s: 0.25,
        es: 0.5,
    }
}

/// The eleven-point grid 0.0, 0.1, ..., 1.0.
pub fn pe_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

/// Something that picks actions in an episode and may learn from the results.
pub trait Policy {
    fn planner_options(&self, xi_deg: f64) -> PlannerOptions;
    fn choose(&mut self, episode: &Episode) -> ActionRequest;
    fn observe(&mut self, episode: &Episode, result: &StepResult) -> Result<(), EvalError>;
}

impl Policy for Agent {
    fn planner_options(&self, xi_deg: f64) -> PlannerOptions {
        self.kind.planner_options(xi_deg)
    }

    fn choose(&mut self, episode: &Episode) -> ActionRequest {
        Agent::choose(self, &episode.scene)
    }

    fn observe(&mut self, episode: &Episode, result: &StepResult) -> Result<(), EvalError> {
        self.feedback(&episode.scene, result)?;
        Ok(())
    }
}

/// Non-learning policy that knows every object's affinity. It pairs an
/// envelope-only object with a suck-only object while both exist, then grasps
/// the rest one by one.
#[derive(Debug, Clone, Copy, Default)]
pub struct OraclePolicy;

pub fn oracle_action(scene: &Scene) -> ActionRequest {
    let only = |a: Affinity| scene.objects.iter().find(|o| o.affinity == a).map(|o| o.id);
    let any = |f: fn(Affinity) -> bool, skip: Option<usize>| {
        scene
            .objects
            .iter()
            .find(|o| f(o.affinity) && Some(o.id) != skip)
            .map(|o| o.id)
    };
    let e = only(Affinity::EnvelopeOnly).or_else(|| any(Affinity::can_envelope, None));
    let s = only(Affinity::SuckOnly).or_else(|| any(Affinity::can_suck, e));
    match (e, s) {
        (Some(e), Some(s)) if e != s => ActionRequest::envelope_then_suck(e, s),
        (Some(e), _) => ActionRequest::envelope(e),
        (None, Some(s)) => ActionRequest::suck(s),
        (None, None) => ActionRequest::suck(scene.objects[0].id),
    }
}

impl Policy for OraclePolicy {
    fn planner_options(&self, xi_deg: f64) -> PlannerOptions {
        PlannerOptions {
            xi_deg,
            ..PlannerOptions::default()
        }
    }

    fn choose(&mut self, episode: &Episode) -> ActionRequest {
        oracle_action(&episode.scene)
    }

    fn observe(&mut self, _: &Episode, _: &StepResult) -> Result<(), EvalError> {
        Ok(())
    }
}

pub const ORACLE_MAX_OBJECTS: usize = 12;

/// Fewest actions that clear `scene` when every compatible primitive succeeds,
/// by exhaustive search over subsets.
pub fn optimal_action_count_oracle(scene: &Scene) -> Result<usize, EvalError> {
    let n = scene.len();
    if n > ORACLE_MAX_OBJECTS {
        return Err(EvalError::TooManyObjects(n));
    }
    let env: Vec<bool> = scene
        .objects
        .iter()
        .map(|o| o.affinity.can_envelope())
        .collect();
    let suck: Vec<bool> = scene
        .objects
        .iter()
        .map(|o| o.affinity.can_suck())
        .collect();
    let full = (1usize << n) - 1;
    let mut best = vec![usize::MAX; 1 << n];
    best[0] = 0;
    for mask in 1..=full {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut b = best[rest].saturating_add(1);
        for j in 0..n {
            if rest & (1 << j) != 0 && ((env[i] && suck[j]) || (env[j] && suck[i])) {
                b = b.min(best[rest & !(1 << j)].saturating_add(1));
            }
        }
        best[mask] = b;
    }
    Ok(best[full])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepParams {
    pub pe_values: Vec<f64>,
    pub actions_per_group: usize,
    pub repetitions: usize,
    pub objects_per_scene: usize,
    pub xi_deg: f64,
    pub seed: u64,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            pe_values: pe_grid(),
            actions_per_group: 200,
            repetitions: 3,
            objects_per_scene: 10,
            xi_deg: 45.0,
            seed: 0,
        }
    }
}

impl SweepParams {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.pe_values.is_empty() || self.pe_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(EvalError::InvalidParams(format!(
                "pe values must be a non-empty list in [0, 1]: {:?}",
                self.pe_values
            )));
        }
        if self.actions_per_group == 0 || self.repetitions == 0 || self.objects_per_scene == 0 {
            return Err(EvalError::InvalidParams(
                "actions, repetitions and objects per scene must be positive".into(),
            ));
        }
        if !(self.xi_deg > 0.0 && self.xi_deg <= 360.0) {
            return Err(EvalError::InvalidParams(format!(
                "xi must lie in (0, 360] degrees, got {}",
                self.xi_deg
            )));
        }
        Ok(())
    }

    /// Seed of one group. Groups with the same repetition share scenes across policies.
    pub fn group_seed(&self, pe_index: usize, rep: usize) -> u64 {
        derive_seed(derive_seed(self.seed, 100 + pe_index as u64), rep as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupResult {
    pub pe: f64,
    pub rep: usize,
    pub stats: RunStats,
    pub steps: Vec<StepRecord>,
}

/// Runs `actions` actions at one `pe`, spawning a new scene whenever one ends.
pub fn run_group<P: Policy>(
    policy: &mut P,
    setup: &EnvSetup,
    pe: f64,
    objects: usize,
    actions: usize,
    xi_deg: f64,
    seed: u64,
) -> Result<(RunStats, Vec<StepRecord>), EvalError> {
    let planner = policy.planner_options(xi_deg);
    let mut stats = RunStats::default();
    let mut steps = Vec::with_capacity(actions);
    let mut episode_index = 0;
    let mut episode = setup.episode(pe, objects, planner, derive_seed(seed, 0))?;
    while stats.actions_executed < actions {
        if episode.is_terminal() {
            episode_index += 1;
            episode = setup.episode(
                pe,
                objects,
                planner,
                derive_seed(seed, episode_index as u64),
            )?;
        }
        let req = policy.choose(&episode);
        let result = episode.step(&req)?;
        policy.observe(&episode, &result)?;
        stats.record(req.kind, &result.outcome);
        steps.push(StepRecord {
            episode: episode_index,
            step: episode.step_count - 1,
            result,
        });
    }
    Ok((stats, steps))
}

/// Runs every (pe, repetition) group in parallel. Each group starts from a
/// fresh copy of `policy`; results come back in grid order.
pub fn run_sweep<P: Policy + Clone + Send + Sync>(
    policy: &P,
    setup: &EnvSetup,
    params: &SweepParams,
) -> Result<SweepResult, EvalError> {
    params.validate()?;
    let jobs: Vec<(usize, usize)> = (0..params.pe_values.len())
        .flat_map(|i| (0..params.repetitions).map(move |r| (i, r)))
        .collect();
    let groups = jobs
        .par_iter()
        .map(|&(i, rep)| {
            let mut p = policy.clone();
            let pe = params.pe_values[i];
            let (stats, steps) = run_group(
                &mut p,
                setup,
                pe,
                params.objects_per_scene,
                params.actions_per_group,
                params.xi_deg,
                params.group_seed(i, rep),
            )?;
            Ok(GroupResult {
                pe,
                rep,
                stats,
                steps,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(SweepResult { groups })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> MeanStd {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        MeanStd {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub pe: f64,
    pub zeta: MeanStd,
    pub eta: MeanStd,
    pub total: RunStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub groups: Vec<GroupResult>,
}

impl SweepResult {
    /// Per-pe aggregates in the order the points first appear.
    pub fn points(&self) -> Result<Vec<SweepPoint>, EvalError> {
        let mut pes: Vec<f64> = Vec::new();
        for g in &self.groups {
            if !pes.contains(&g.pe) {
                pes.push(g.pe);
            }
        }
        pes.iter()
            .map(|&pe| {
                let gs: Vec<&GroupResult> = self.groups.iter().filter(|g| g.pe == pe).collect();
                let zeta = gs
                    .iter()
                    .map(|g| g.stats.success_rate())
                    .collect::<Result<Vec<_>, _>>()?;
                let eta = gs
                    .iter()
                    .map(|g| g.stats.grasping_efficiency())
                    .collect::<Result<Vec<_>, _>>()?;
                let mut total = RunStats::default();
                for g in &gs {
                    total.merge(&g.stats);
                }
                Ok(SweepPoint {
                    pe,
                    zeta: MeanStd::of(&zeta),
                    eta: MeanStd::of(&eta),
                    total,
                })
            })
            .collect()
    }

    pub const CSV_HEADER: &'static str =
        "pe,rep,zeta,eta,n_env_s,n_env_f,n_suck_s,n_suck_f,n_es_full,n_es_semi,n_es_fail,zeta_full_only";

    pub fn to_csv(&self) -> Result<String, EvalError> {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for g in &self.groups {
            let s = &g.stats;
            out.push_str(&format!(
                "{:.2},{},{:.6},{:.6},{},{},{},{},{},{},{},{:.6}\n",
                g.pe,
                g.rep,
                s.success_rate()?,
                s.grasping_efficiency()?,
                s.env_succ,
                s.env_fail,
                s.suck_succ,
                s.suck_fail,
                s.es_full,
                s.es_semi,
                s.es_fail,
                s.success_rate_full_only()?
            ));
        }
        Ok(out)
    }

    pub fn steps_csv(&self) -> String {
        let mut out = format!("pe,rep,{}\n", StepRecord::HEADER);
        for g in &self.groups {
            for r in &g.steps {
                out.push_str(&format!("{:.2},{},{}\n", g.pe, g.rep, r.to_csv()));
            }
        }
        out
    }
}

/// `theory.csv` contents over a grid of pe values.
pub fn theory_csv(pe_values: &[f64]) -> String {
    let mut out = String::from("pe,eta_theory\n");
    for pe in pe_values {
        out.push_str(&format!("{pe:.2},{:.6}\n", theoretical_efficiency(*pe)));
    }
    let e = theoretical_expectations();
    out.push_str(&format!(
        "# E_eta={:.9},E_e={},E_s={},E_es={}\n",
        e.eta, e.e, e.s, e.es
    ));
    out
}
