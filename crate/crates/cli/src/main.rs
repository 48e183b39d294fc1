use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use graspsim::config::ExperimentConfig;
use graspsim::env::{check_reward_sanity, derive_seed, EnvSetup};
use graspsim::eval::{run_sweep, theoretical_efficiency, theory_csv};
use graspsim::geometry::Pose;
use graspsim::learner::{huber, huber_grad_q, train, Agent, Mlp, PolicyKind, TrainRecord};
use graspsim::planner::{plan_envelope, plan_suck, PlanError, PlannerOptions};
use graspsim::scene::{render_depth, Scene};

#[derive(Parser, Debug)]
#[command(
    name = "graspsim",
    version,
    about = "Enveloping and sucking grasp experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a policy and write its checkpoint and training log.
    Train(Common),
    /// Evaluate a policy over the pe grid. Trains first unless a checkpoint is given.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Checkpoint written by `train`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Plan every permitted primitive for each object of a scene file.
    Plan {
        #[command(flatten)]
        common: Common,
        /// Scene in the `workspace`/`obj` text format.
        scene: PathBuf,
    },
    /// Write the theoretical efficiency table.
    Theory(Common),
    /// Run quick invariant checks and report one line per check.
    Selftest(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output root; results go to `<out>/<command>/<name>/`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run name. Defaults to the policy and seed.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    policy: Option<PolicyKind>,
    /// Comma-separated pe values.
    #[arg(long, value_delimiter = ',')]
    pe: Option<Vec<f64>>,
    /// Repetitions per pe value.
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long = "p-fail")]
    p_fail: Option<f64>,
    #[arg(long)]
    resolution: Option<usize>,
}

struct Run {
    cfg: ExperimentConfig,
    setup: EnvSetup,
    dir: PathBuf,
}

impl Common {
    fn resolve(&self) -> Result<(ExperimentConfig, Option<PathBuf>)> {
        let (mut cfg, base) = match &self.config {
            Some(p) => (
                ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
                p.parent().map(Path::to_path_buf),
            ),
            None => (ExperimentConfig::default(), None),
        };
        if let Some(v) = &self.out {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = self.seed {
            cfg.sweep.seed = v;
        }
        if let Some(v) = self.policy {
            cfg.policy = v;
        }
        if let Some(v) = &self.pe {
            cfg.sweep.pe_values = v.clone();
        }
        if let Some(v) = self.episodes {
            cfg.sweep.repetitions = v;
        }
        if let Some(v) = self.p_fail {
            cfg.env.p_fail = v;
        }
        if let Some(v) = self.resolution {
            cfg.features.resolution = v;
        }
        cfg.validate()
            .context("invalid configuration after applying flags")?;
        Ok((cfg, base))
    }

    fn prepare(&self, command: &str) -> Result<Run> {
        let (cfg, base) = self.resolve()?;
        let setup = cfg.env_setup(base.as_deref())?;
        let name = self
            .name
            .clone()
            .unwrap_or_else(|| format!("{}-seed{}", cfg.policy, cfg.sweep.seed));
        let dir = cfg.out_dir.join(command).join(name);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        cfg.save(&dir.join("config.ini"))?;
        if let Some(p) = &cfg.catalog_path {
            fs::write(dir.join("catalog.txt"), setup.catalog.to_text())
                .with_context(|| format!("copying catalog {}", p.display()))?;
        }
        Ok(Run { cfg, setup, dir })
    }
}

fn write(dir: &Path, file: &str, contents: &str) -> Result<()> {
    let p = dir.join(file);
    fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))
}

/// Trains, then writes the log and checkpoint. Returns the checkpoint path.
fn train_agent(run: &Run) -> Result<PathBuf> {
    let c = &run.cfg;
    let report = train(
        c.policy,
        &run.setup,
        &c.learner,
        &c.features,
        c.sweep.xi_deg,
        c.sweep.seed,
    )?;
    let mut log = format!("{}\n", TrainRecord::HEADER);
    for r in &report.log {
        log.push_str(&r.to_csv());
        log.push('\n');
    }
    write(&run.dir, "train_log.csv", &log)?;
    let path = run.dir.join("checkpoint.bin");
    let mut w = BufWriter::new(
        fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    );
    report.agent.save(&mut w)?;
    w.flush()?;
    eprintln!(
        "trained {} for {} steps over {} episodes",
        c.policy,
        report.log.len(),
        report.episodes
    );
    Ok(path)
}

fn cmd_train(common: &Common) -> Result<()> {
    let run = common.prepare("train")?;
    train_agent(&run)?;
    println!("{}", run.dir.display());
    Ok(())
}

fn cmd_sweep(common: &Common, checkpoint: Option<&Path>) -> Result<()> {
    let run = common.prepare("sweep")?;
    let c = &run.cfg;
    // Evaluation always starts from a checkpoint so trained and reloaded runs agree.
    let path = match checkpoint {
        Some(p) => p.to_path_buf(),
        None => train_agent(&run)?,
    };
    let f = fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let mut agent = Agent::load(
        &mut std::io::BufReader::new(f),
        c.learner.clone(),
        c.features,
        c.sweep.seed,
    )?;
    agent.evaluation_mode();
    if agent.kind != c.policy && common.policy.is_some() {
        bail!(
            "checkpoint holds policy {} but --policy {} was given",
            agent.kind,
            c.policy
        );
    }
    let result = run_sweep(&agent, &run.setup, &c.sweep)?;
    write(&run.dir, "sweep.csv", &result.to_csv()?)?;
    write(&run.dir, "steps.csv", &result.steps_csv())?;
    println!("{}", run.dir.display());
    Ok(())
}

const PLAN_HEADER: &str =
    "object,primitive,alpha,gamma,opening_d,sucker_index,theta_s,clearance,x,y,z,error";

fn pose_fields(p: &Pose) -> String {
    format!(
        "{:.6},{:.6},{:.6}",
        p.position.x, p.position.y, p.position.z
    )
}

fn plan_error(id: usize, primitive: &str, e: &PlanError) -> String {
    format!(
        "{id},{primitive},,,,,,,,,,{}",
        e.to_string().replace(',', ";")
    )
}

fn plan_rows(scene: &Scene, run: &Run) -> String {
    let opts = PlannerOptions {
        xi_deg: run.cfg.sweep.xi_deg,
        ..PlannerOptions::default()
    };
    let g = &run.setup.gripper;
    let mut out = format!("{PLAN_HEADER}\n");
    for o in &scene.objects {
        if o.affinity.can_envelope() {
            out.push_str(&match plan_envelope(scene, o.id, g, &opts) {
                Ok(p) => format!(
                    "{},enveloping,{:.6},{:.6},{:.6},,,,{},",
                    o.id,
                    p.alpha_e,
                    p.gamma_e,
                    p.opening_d,
                    pose_fields(&p.pose)
                ),
                Err(e) => plan_error(o.id, "enveloping", &e),
            });
            out.push('\n');
        }
        if o.affinity.can_suck() {
            out.push_str(&match plan_suck(scene, o.id, g, &opts) {
                Ok(p) => format!(
                    "{},sucking,{:.6},{:.6},,{},{:.6},{:.6},{},",
                    o.id,
                    p.alpha_s,
                    p.gamma_s,
                    p.sucker_index,
                    p.theta_s,
                    p.clearance,
                    pose_fields(&p.pose)
                ),
                Err(e) => plan_error(o.id, "sucking", &e),
            });
            out.push('\n');
        }
    }
    out
}

fn cmd_plan(common: &Common, scene_path: &Path) -> Result<()> {
    let text = fs::read_to_string(scene_path)
        .with_context(|| format!("reading {}", scene_path.display()))?;
    let scene =
        Scene::from_text(&text).with_context(|| format!("parsing {}", scene_path.display()))?;
    let mut common = common.clone();
    if common.name.is_none() {
        common.name = scene_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned());
    }
    let run = common.prepare("plan")?;
    write(&run.dir, "scene.txt", &scene.to_text())?;
    write(&run.dir, "plan.csv", &plan_rows(&scene, &run))?;
    println!("{}", run.dir.display());
    Ok(())
}

fn cmd_theory(common: &Common) -> Result<()> {
    let run = common.prepare("theory")?;
    write(
        &run.dir,
        "theory.csv",
        &theory_csv(&run.cfg.sweep.pe_values),
    )?;
    println!("{}", run.dir.display());
    Ok(())
}

fn gradient_check(seed: u64) -> Result<f64> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let net = Mlp::new(&[6, 5, 4, 1], &mut rng)?;
    let x: Vec<f64> = (0..6)
        .map(|i| ((i * 7 + 3) % 11) as f64 / 11.0 - 0.3)
        .collect();
    let y = 0.4;
    let q = net.forward(&x);
    let mut grad = vec![0.0; net.params.len()];
    net.backward(&net.trace(&x), huber_grad_q(y, q), &mut grad);
    let loss = |p: &[f64]| {
        huber(
            (Mlp::from_params(net.sizes(), p.to_vec())
                .unwrap()
                .forward(&x)
                - y)
                .abs(),
        )
    };
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for k in 0..net.params.len() {
        let mut p = net.params.clone();
        p[k] += h;
        let up = loss(&p);
        p[k] -= 2.0 * h;
        let down = loss(&p);
        let num = (up - down) / (2.0 * h);
        worst = worst.max((num - grad[k]).abs() / num.abs().max(grad[k].abs()).max(1e-3));
    }
    Ok(worst)
}

fn cmd_selftest(common: &Common) -> Result<()> {
    let run = common.prepare("selftest")?;
    let c = &run.cfg;
    let mut rows: Vec<(&str, bool, String)> = Vec::new();

    let round = ExperimentConfig::from_text(&c.to_text())
        .map(|r| r == *c)
        .unwrap_or(false);
    rows.push(("config_round_trip", round, String::new()));

    let eta = theoretical_efficiency(0.5);
    rows.push((
        "theory_peak",
        (eta - 2.0).abs() < 1e-12,
        format!("{eta:.6}"),
    ));

    let sane = check_reward_sanity(c.learner.gamma);
    rows.push((
        "reward_sanity",
        sane.is_ok(),
        format!("gamma {}", c.learner.gamma),
    ));

    let worst = gradient_check(c.sweep.seed)?;
    rows.push(("gradient_check", worst < 1e-4, format!("{worst:.3e}")));

    let seed = derive_seed(c.sweep.seed, 7);
    let n = c.sweep.objects_per_scene;
    let ep = run.setup.episode(0.5, n, PlannerOptions::default(), seed)?;
    let scene = &ep.scene;
    let parsed = Scene::from_text(&scene.to_text())?;
    rows.push((
        "scene_round_trip",
        parsed.to_text() == scene.to_text(),
        format!("{} objects", scene.len()),
    ));

    let hm = render_depth(scene, c.features.resolution);
    let top = scene.objects.iter().map(|o| o.height).fold(0.0, f64::max);
    let hm_top = hm.cells.iter().copied().fold(0.0, f64::max);
    rows.push((
        "render_max_height",
        hm_top <= top + 1e-12,
        format!("{hm_top:.4} <= {top:.4}"),
    ));

    let mut widths_ok = true;
    for o in &scene.objects {
        if let Ok(p) = plan_envelope(scene, o.id, &run.setup.gripper, &PlannerOptions::default()) {
            widths_ok &= p.opening_d <= run.setup.gripper.d_max + 1e-12;
        }
    }
    rows.push(("opening_within_limit", widths_ok, String::new()));

    let mut csv = String::from("check,result,detail\n");
    let mut failed = 0;
    for (name, ok, detail) in &rows {
        let verdict = if *ok { "PASS" } else { "FAIL" };
        println!("{verdict} {name} {detail}");
        csv.push_str(&format!("{name},{verdict},{detail}\n"));
        failed += usize::from(!ok);
    }
    write(&run.dir, "selftest.csv", &csv)?;
    if failed > 0 {
        bail!("{failed} self-test check(s) failed");
    }
    Ok(())
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("GRASPSIM_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("GRASPSIM_THREADS='{v}' is not a count"))?;
        if n == 0 {
            bail!("GRASPSIM_THREADS must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = init_threads().and_then(|_| match &cli.command {
        Command::Train(c) => cmd_train(c),
        Command::Sweep { common, checkpoint } => cmd_sweep(common, checkpoint.as_deref()),
        Command::Plan { common, scene } => cmd_plan(common, scene),
        Command::Theory(c) => cmd_theory(c),
        Command::Selftest(c) => cmd_selftest(c),
    });
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
