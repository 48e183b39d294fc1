//! Experiment configuration in a line-oriented `key = value` format with
//! `[section]` headers. Missing keys keep their defaults; unknown keys are errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::env::{check_reward_sanity, EnvParams, EnvSetup};
use crate::eval::SweepParams;
use crate::gripper::GripperParams;
use crate::learner::{FeatureParams, LearnerParams, PolicyKind};
use crate::scene::{Catalog, ClutterMode, SceneParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {msg}")]
    Io { path: PathBuf, msg: String },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key '{key}' in section [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: invalid value for {section}.{key}: {msg}")]
    Value {
        line: usize,
        section: String,
        key: String,
        msg: String,
    },
    #[error("configuration violates an invariant: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub gripper: GripperParams,
    pub scene: SceneParams,
    pub dual_affinity: bool,
    /// Optional catalog file replacing the built-in templates.
    pub catalog_path: Option<PathBuf>,
    pub env: EnvParams,
    pub features: FeatureParams,
    pub learner: LearnerParams,
    pub sweep: SweepParams,
    pub policy: PolicyKind,
    /// Root of the output tree.
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            gripper: GripperParams::default(),
            scene: SceneParams::default(),
            dual_affinity: false,
            catalog_path: None,
            env: EnvParams::default(),
            features: FeatureParams::default(),
            learner: LearnerParams::default(),
            sweep: SweepParams::default(),
            policy: PolicyKind::EsesDrl,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("'{v}': {e}"))
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got '{v}'")),
    }
}

fn parse_list<T: FromStr>(v: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| parse(x.trim())).collect()
}

fn list<T: ToString>(xs: &[T]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl ExperimentConfig {
    /// Sets one key. The error is a message without location.
    pub fn set(&mut self, section: &str, key: &str, v: &str) -> Result<(), Option<String>> {
        let g = &mut self.gripper;
        let s = &mut self.scene;
        let e = &mut self.env;
        let f = &mut self.features;
        let l = &mut self.learner;
        let w = &mut self.sweep;
        let r: Result<(), String> = match (section, key) {
            ("gripper", "l_p") => parse(v).map(|x| g.l_p = x),
            ("gripper", "h_p") => parse(v).map(|x| g.h_p = x),
            ("gripper", "theta_t") => parse(v).map(|x| g.theta_t = x),
            ("gripper", "l_f") => parse(v).map(|x| g.l_f = x),
            ("gripper", "h") => parse(v).map(|x| g.h = x),
            ("gripper", "l_s1") => parse(v).map(|x| g.l_s1 = x),
            ("gripper", "l_s2") => parse(v).map(|x| g.l_s2 = x),
            ("gripper", "d_max") => parse(v).map(|x| g.d_max = x),
            ("gripper", "sucker_diameter") => parse(v).map(|x| g.sucker_diameter = x),
            ("gripper", "suck_bend_deg") => parse(v).map(|x| g.suck_bend_deg = x),
            ("scene", "workspace_side") => parse(v).map(|x| s.workspace_side = x),
            ("scene", "clutter") => parse::<ClutterMode>(v).map(|x| s.clutter = x),
            ("scene", "max_overlap") => parse(v).map(|x| s.max_overlap = x),
            ("scene", "isolation_gap") => parse(v).map(|x| s.isolation_gap = x),
            ("scene", "max_objects") => parse(v).map(|x| s.max_objects = x),
            ("scene", "dual_affinity") => parse_bool(v).map(|x| self.dual_affinity = x),
            ("scene", "catalog") => {
                self.catalog_path = if v.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(v))
                };
                Ok(())
            }
            ("env", "p_fail") => parse(v).map(|x| e.p_fail = x),
            ("env", "clearance") => parse(v).map(|x| e.clearance = x),
            ("env", "max_steps_factor") => parse(v).map(|x| e.max_steps_factor = x),
            ("env", "finger_radius") => parse(v).map(|x| e.finger_radius = x),
            ("env", "width_tolerance") => parse(v).map(|x| e.width_tolerance = x),
            ("planner", "xi_deg") => parse(v).map(|x| w.xi_deg = x),
            ("features", "resolution") => parse(v).map(|x| f.resolution = x),
            ("features", "crop_side") => parse(v).map(|x| f.crop_side = x),
            ("features", "align_crops") => parse_bool(v).map(|x| f.align_crops = x),
            ("features", "height_scale") => parse(v).map(|x| f.height_scale = x),
            ("learner", "train_steps") => parse(v).map(|x| l.train_steps = x),
            ("learner", "eps_start") => parse(v).map(|x| l.eps_start = x),
            ("learner", "eps_end") => parse(v).map(|x| l.eps_end = x),
            ("learner", "gamma") => parse(v).map(|x| l.gamma = x),
            ("learner", "lr") => parse(v).map(|x| l.lr = x),
            ("learner", "sync_period") => parse(v).map(|x| l.sync_period = x),
            ("learner", "replay") => parse_bool(v).map(|x| l.replay = x),
            ("learner", "replay_capacity") => parse(v).map(|x| l.replay_capacity = x),
            ("learner", "batch_size") => parse(v).map(|x| l.batch_size = x),
            ("learner", "hidden") => parse_list(v).map(|x| l.hidden = x),
            ("learner", "train_per_type_min") => parse(v).map(|x| l.train_per_type_min = x),
            ("learner", "train_per_type_max") => parse(v).map(|x| l.train_per_type_max = x),
            ("learner", "divergence_limit") => parse(v).map(|x| l.divergence_limit = x),
            ("learner", "continual") => parse_bool(v).map(|x| l.continual = x),
            ("sweep", "pe") => parse_list(v).map(|x| w.pe_values = x),
            ("sweep", "actions_per_group") => parse(v).map(|x| w.actions_per_group = x),
            ("sweep", "repetitions") => parse(v).map(|x| w.repetitions = x),
            ("sweep", "objects_per_scene") => parse(v).map(|x| w.objects_per_scene = x),
            ("sweep", "seed") => parse(v).map(|x| w.seed = x),
            ("run", "policy") => parse::<PolicyKind>(v).map(|x| self.policy = x),
            ("run", "out") => {
                self.out_dir = PathBuf::from(v);
                Ok(())
            }
            _ => return Err(None),
        };
        r.map_err(Some)
    }

    /// Canonical text form; `from_text(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let g = &self.gripper;
        let s = &self.scene;
        let e = &self.env;
        let f = &self.features;
        let l = &self.learner;
        let w = &self.sweep;
        let catalog = self
            .catalog_path
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_default();
        let sections: Vec<(&str, Vec<(&str, String)>)> = vec![
            (
                "run",
                vec![
                    ("policy", self.policy.as_str().to_string()),
                    ("out", self.out_dir.display().to_string()),
                ],
            ),
            (
                "gripper",
                vec![
                    ("l_p", g.l_p.to_string()),
                    ("h_p", g.h_p.to_string()),
                    ("theta_t", g.theta_t.to_string()),
                    ("l_f", g.l_f.to_string()),
                    ("h", g.h.to_string()),
                    ("l_s1", g.l_s1.to_string()),
                    ("l_s2", g.l_s2.to_string()),
                    ("d_max", g.d_max.to_string()),
                    ("sucker_diameter", g.sucker_diameter.to_string()),
                    ("suck_bend_deg", g.suck_bend_deg.to_string()),
                ],
            ),
            (
                "scene",
                vec![
                    ("workspace_side", s.workspace_side.to_string()),
                    ("clutter", s.clutter.as_str().to_string()),
                    ("max_overlap", s.max_overlap.to_string()),
                    ("isolation_gap", s.isolation_gap.to_string()),
                    ("max_objects", s.max_objects.to_string()),
                    ("dual_affinity", self.dual_affinity.to_string()),
                    ("catalog", catalog),
                ],
            ),
            (
                "env",
                vec![
                    ("p_fail", e.p_fail.to_string()),
                    ("clearance", e.clearance.to_string()),
                    ("max_steps_factor", e.max_steps_factor.to_string()),
                    ("finger_radius", e.finger_radius.to_string()),
                    ("width_tolerance", e.width_tolerance.to_string()),
                ],
            ),
            ("planner", vec![("xi_deg", w.xi_deg.to_string())]),
            (
                "features",
                vec![
                    ("resolution", f.resolution.to_string()),
                    ("crop_side", f.crop_side.to_string()),
                    ("align_crops", f.align_crops.to_string()),
                    ("height_scale", f.height_scale.to_string()),
                ],
            ),
            (
                "learner",
                vec![
                    ("train_steps", l.train_steps.to_string()),
                    ("eps_start", l.eps_start.to_string()),
                    ("eps_end", l.eps_end.to_string()),
                    ("gamma", l.gamma.to_string()),
                    ("lr", l.lr.to_string()),
                    ("sync_period", l.sync_period.to_string()),
                    ("replay", l.replay.to_string()),
                    ("replay_capacity", l.replay_capacity.to_string()),
                    ("batch_size", l.batch_size.to_string()),
                    ("hidden", list(&l.hidden)),
                    ("train_per_type_min", l.train_per_type_min.to_string()),
                    ("train_per_type_max", l.train_per_type_max.to_string()),
                    ("divergence_limit", l.divergence_limit.to_string()),
                    ("continual", l.continual.to_string()),
                ],
            ),
            (
                "sweep",
                vec![
                    ("pe", list(&w.pe_values)),
                    ("actions_per_group", w.actions_per_group.to_string()),
                    ("repetitions", w.repetitions.to_string()),
                    ("objects_per_scene", w.objects_per_scene.to_string()),
                    ("seed", w.seed.to_string()),
                ],
            ),
        ];
        let mut out = String::new();
        for (i, (name, kv)) in sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            writeln!(out, "[{name}]").unwrap();
            for (k, v) in kv {
                writeln!(out, "{k} = {v}").unwrap();
            }
        }
        out
    }

    /// Parses and validates. Blank lines and lines starting with `#` or `;` are ignored.
    pub fn from_text(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') || l.starts_with(';') {
                continue;
            }
            if let Some(rest) = l.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line,
                    msg: format!("unterminated section header '{l}'"),
                })?;
                section = Some(name.trim().to_string());
                continue;
            }
            let (k, v) = l.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                msg: format!("expected 'key = value', got '{l}'"),
            })?;
            let sec = section.clone().ok_or_else(|| ConfigError::Syntax {
                line,
                msg: "key outside of any [section]".into(),
            })?;
            let (k, v) = (k.trim(), v.trim());
            cfg.set(&sec, k, v).map_err(|e| match e {
                None => ConfigError::UnknownKey {
                    line,
                    section: sec.clone(),
                    key: k.to_string(),
                },
                Some(msg) => ConfigError::Value {
                    line,
                    section: sec.clone(),
                    key: k.to_string(),
                    msg,
                },
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        std::fs::write(path, self.to_text()).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.gripper.validate().map_err(|e| inv(&e))?;
        self.scene.validate().map_err(|e| inv(&e))?;
        self.env.validate().map_err(|e| inv(&e))?;
        self.learner.validate().map_err(|e| inv(&e))?;
        self.sweep.validate().map_err(|e| inv(&e))?;
        check_reward_sanity(self.learner.gamma).map_err(|e| inv(&e))?;
        let f = &self.features;
        if f.resolution < 16 || !(f.crop_side > 0.0) || !(f.height_scale > 0.0) {
            return Err(ConfigError::Invalid(
                "features need resolution >= 16 and positive crop_side and height_scale".into(),
            ));
        }
        if self.sweep.objects_per_scene > self.scene.max_objects {
            return Err(ConfigError::Invalid(format!(
                "objects_per_scene {} exceeds max_objects {}",
                self.sweep.objects_per_scene, self.scene.max_objects
            )));
        }
        if self.learner.train_per_type_max * 2 > self.scene.max_objects {
            return Err(ConfigError::Invalid(format!(
                "training scenes may hold {} objects, above max_objects {}",
                self.learner.train_per_type_max * 2,
                self.scene.max_objects
            )));
        }
        Ok(())
    }

    /// Catalog from `catalog_path` or the built-in one. Relative paths resolve against `base`.
    pub fn catalog(&self, base: Option<&Path>) -> Result<Catalog, ConfigError> {
        match &self.catalog_path {
            None => Ok(Catalog::default().with_dual_affinity(self.dual_affinity)),
            Some(p) => {
                let path = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.clone(),
                };
                let text = std::fs::read_to_string(&path).map_err(|e| ConfigError::Io {
                    path: path.clone(),
                    msg: e.to_string(),
                })?;
                Catalog::from_text(&text, self.dual_affinity)
                    .map_err(|e| ConfigError::Invalid(format!("catalog {}: {e}", path.display())))
            }
        }
    }

    pub fn env_setup(&self, base: Option<&Path>) -> Result<EnvSetup, ConfigError> {
        Ok(EnvSetup {
            gripper: self.gripper,
            scene: self.scene,
            catalog: self.catalog(base)?,
            env: self.env,
        })
    }
}
