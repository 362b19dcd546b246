//! `polyrl`: pretrain, fine-tune, evaluate and inspect set-objective RL agents
//! on the desk-scale rooms and triangle environments.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use polychromic::env::{
    format_graph_configs, format_rooms_configs, generate_rooms_demos, generate_triangle_data, parse_graph_configs,
    parse_rooms_configs, random_graph, two_room_suite, Environment, RoomsConfig, RoomsEnv, TriangleConfig, TriangleEnv,
};
use polychromic::eval::{
    build_perturbation_suite, creativity_metrics, emit_metrics, evaluate_suite, perturbation_eval,
    read_metrics_records, MetricsRecord,
};
use polychromic::policy::{
    critic_from_bytes, load_policy, policy_from_bytes, pretrain_bc, save_policy, BcConfig, CriticModel,
    OptimizerKind, Parameterization,
};
use polychromic::theory::run_all;
use polychromic::train::{read_metrics, resume, train_run, TrainConfig, Trainer};
use polychromic::{Critic, Policy};

#[derive(Parser, Debug)]
#[command(name = "polyrl", version, about = "Set-objective policy fine-tuning on desk-scale tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Behavior-clone a policy from planner demonstrations or graph samples.
    Pretrain(PretrainArgs),
    /// Fine-tune a pretrained policy with PPO, Poly-PPO or REINFORCE.
    Finetune(FinetuneArgs),
    /// Success, pass@k and (for graphs) creativity metrics of a checkpoint.
    Eval(EvalArgs),
    /// Numerical checks of the set-RL identities and propositions.
    Theory(TheoryArgs),
    /// Flatten training and evaluation logs into a plot-ready CSV.
    Plotdata(PlotArgs),
    /// Print parameterization and parameter counts of a checkpoint.
    Describe { checkpoint: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EnvKind {
    Rooms,
    Triangle,
}

#[derive(Args, Debug)]
struct SuiteArgs {
    #[arg(long, value_enum, default_value = "rooms")]
    env: EnvKind,
    /// Configuration file (rooms layouts or graphs).
    #[arg(long)]
    suite: PathBuf,
}

#[derive(Args, Debug)]
struct PretrainArgs {
    #[command(flatten)]
    suite: SuiteArgs,
    /// Generate this many seeded configurations and write them to `--suite` first.
    #[arg(long)]
    generate: Option<usize>,
    #[arg(long, default_value_t = 0)]
    suite_seed: u64,
    #[arg(long, default_value_t = 100)]
    horizon: usize,
    #[arg(long, default_value_t = 30)]
    nodes: usize,
    #[arg(long, default_value_t = 0.2)]
    density: f64,
    /// Demonstrations per configuration (rooms) or samples per graph (triangle).
    #[arg(long, default_value_t = 20)]
    demos: usize,
    /// Probability that a demonstrated rooms label is replaced by a uniform action.
    #[arg(long, default_value_t = 0.25)]
    noise: f64,
    #[arg(long, value_enum, default_value = "tabular")]
    param: ParamKind,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value_t = 100_000)]
    capacity: usize,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    #[arg(long, default_value_t = 0.0)]
    entropy_coef: f64,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, value_enum, default_value = "adam")]
    optimizer: OptKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ParamKind {
    Tabular,
    Mlp,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OptKind {
    Sgd,
    Adam,
}

/// One optional flag per training hyperparameter; values are parsed as TOML
/// scalars and merged over the config file.
macro_rules! train_overrides {
    ($($field:ident),* $(,)?) => {
        #[derive(Args, Debug, Default)]
        struct TrainOverrides {
            $(
                #[arg(long, value_parser = toml_scalar, help_heading = "Hyperparameter overrides")]
                $field: Option<toml::Value>,
            )*
        }

        impl TrainOverrides {
            fn apply(&self, cfg: TrainConfig) -> Result<TrainConfig> {
                let mut table = toml::Table::try_from(&cfg)?;
                $(
                    if let Some(v) = &self.$field {
                        table.insert(stringify!($field).to_string(), v.clone());
                    }
                )*
                Ok(TrainConfig::from_toml(&toml::to_string(&table)?)?)
            }
        }
    };
}

train_overrides!(
    method,
    iterations,
    seed,
    ppo_epochs,
    minibatch,
    gamma,
    gae_lambda,
    clip_eps,
    actor_lr,
    critic_lr,
    value_coef,
    kl_coef,
    max_grad_norm,
    temperature,
    vines,
    set_size,
    num_sets,
    rollout_states,
    window,
    budget,
    ucb_lambda,
    ucb_reset,
    optimizer,
    rollout_criterion,
    set_objective,
    diversity,
    distinct_sets,
    checkpoint_every,
);

fn toml_scalar(s: &str) -> std::result::Result<toml::Value, String> {
    if let Ok(i) = s.parse::<i64>() {
        return Ok(toml::Value::Integer(i));
    }
    if let Ok(f) = s.parse::<f64>() {
        return Ok(toml::Value::Float(f));
    }
    if let Ok(b) = s.parse::<bool>() {
        return Ok(toml::Value::Boolean(b));
    }
    Ok(toml::Value::String(s.to_string()))
}

#[derive(Args, Debug)]
struct FinetuneArgs {
    #[command(flatten)]
    suite: SuiteArgs,
    /// Pretrained policy checkpoint.
    #[arg(long)]
    policy: PathBuf,
    /// TOML config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory (metrics, checkpoints, config).
    #[arg(long)]
    out: PathBuf,
    /// Continue from the last checkpoint in `--out`.
    #[arg(long)]
    resume: bool,
    #[command(flatten)]
    overrides: TrainOverrides,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    suite: SuiteArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Rollouts (attempts) per configuration.
    #[arg(long, default_value_t = 64)]
    rollouts: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32")]
    k: Vec<usize>,
    /// Set size used for the reported set diversity.
    #[arg(long, default_value_t = 4)]
    set_size: usize,
    /// Metrics JSONL (appended); the curve CSV goes next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value = "eval")]
    label: String,
    /// Also measure pass@1 from perturbed starts (rooms only).
    #[arg(long)]
    perturb: bool,
    #[arg(long, default_value_t = 2.0)]
    perturb_temperature: f64,
    #[arg(long, default_value_t = 100)]
    perturb_rollouts: usize,
    #[arg(long, default_value_t = 10)]
    per_room: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct TheoryArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit JSON instead of text.
    #[arg(long)]
    json: bool,
    /// Exit with status 1 if any check fails.
    #[arg(long)]
    strict: bool,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Training metrics files (`metrics.jsonl` of a run).
    #[arg(long = "train")]
    train: Vec<PathBuf>,
    /// Evaluation metrics files written by `eval`.
    #[arg(long = "eval")]
    eval: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

enum Suite {
    Rooms(Vec<RoomsConfig>),
    Triangle(Vec<TriangleConfig>),
}

impl Suite {
    fn load(args: &SuiteArgs) -> Result<Self> {
        let text = fs::read_to_string(&args.suite).with_context(|| format!("reading {}", args.suite.display()))?;
        Ok(match args.env {
            EnvKind::Rooms => Suite::Rooms(parse_rooms_configs(&text)?),
            EnvKind::Triangle => Suite::Triangle(parse_graph_configs(&text)?),
        })
    }

    fn write(&self, path: &Path) -> Result<()> {
        let text = match self {
            Suite::Rooms(c) => format_rooms_configs(c),
            Suite::Triangle(g) => format_graph_configs(g),
        };
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

fn rooms_envs(c: &[RoomsConfig]) -> Vec<RoomsEnv> {
    c.iter().map(|c| RoomsEnv::new(c.clone(), 0)).collect()
}

fn triangle_envs(g: &[TriangleConfig]) -> Vec<TriangleEnv> {
    g.iter().map(|g| TriangleEnv::new(g.clone())).collect()
}

fn pretrain(a: PretrainArgs) -> Result<()> {
    let mut suite = match a.generate {
        Some(count) => {
            let s = match a.suite.env {
                EnvKind::Rooms => Suite::Rooms(two_room_suite(count, a.suite_seed, a.horizon)?),
                EnvKind::Triangle => Suite::Triangle(
                    (0..count).map(|i| random_graph(i, a.nodes, a.density, a.suite_seed)).collect::<Result<_, _>>()?,
                ),
            };
            s.write(&a.suite.suite)?;
            s
        }
        None => Suite::load(&a.suite)?,
    };
    let param = match a.param {
        ParamKind::Tabular => Parameterization::Tabular { capacity: a.capacity },
        ParamKind::Mlp => Parameterization::Mlp { hidden: a.hidden },
    };
    let (data, spec, actions) = match &mut suite {
        Suite::Rooms(c) => {
            let env = RoomsEnv::new(c[0].clone(), 0);
            (generate_rooms_demos(c, a.demos, a.noise, a.seed)?, env.obs_spec(), env.num_actions())
        }
        Suite::Triangle(g) => {
            let data = generate_triangle_data(g, a.demos, a.seed)?;
            // Persist which triangles the policy saw so creativity can exclude them.
            data.mark_seen(g);
            let envs = triangle_envs(g);
            (data, envs[0].obs_spec(), envs.iter().map(|e| e.num_actions()).max().unwrap_or(0))
        }
    };
    if matches!(suite, Suite::Triangle(_)) {
        suite.write(&a.suite.suite)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut policy = Policy::new(param, &spec, actions, &mut rng);
    let cfg = BcConfig {
        epochs: a.epochs,
        lr: a.lr,
        entropy_coef: a.entropy_coef,
        batch_size: a.batch_size,
        optimizer: match a.optimizer {
            OptKind::Sgd => OptimizerKind::Sgd,
            OptKind::Adam => OptimizerKind::Adam,
        },
        seed: a.seed,
        ..BcConfig::default()
    };
    let report = pretrain_bc(&mut policy, &data, &cfg)?;
    save_policy(&policy, &a.out)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    info!("{} demos, policy written to {}", data.len(), a.out.display());
    Ok(())
}

fn finetune(a: FinetuneArgs) -> Result<()> {
    let base = match &a.config {
        Some(p) => TrainConfig::from_toml(&fs::read_to_string(p)?)?,
        None => TrainConfig::default(),
    };
    let cfg = a.overrides.apply(base)?;
    let policy: Policy = load_policy(&a.policy)?;
    match Suite::load(&a.suite)? {
        Suite::Rooms(c) => run_finetune(cfg, rooms_envs(&c), policy, &a.out, a.resume),
        Suite::Triangle(g) => run_finetune(cfg, triangle_envs(&g), policy, &a.out, a.resume),
    }
}

fn run_finetune<E: Environment>(cfg: TrainConfig, envs: Vec<E>, policy: Policy, dir: &Path, cont: bool) -> Result<()> {
    let mut trainer: Trainer<f64, E> = if cont {
        resume(cfg, envs, dir)?
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let critic = Critic::new(policy.parameterization(), &envs[0].obs_spec(), &mut rng);
        Trainer::new(cfg, envs, policy, critic)?
    };
    train_run(&mut trainer, dir, |r| {
        info!(
            "iter {:>4} {} return {:.4} success {:.3} kl {:.2e} entropy {:.3}",
            r.iteration, r.method, r.mean_return, r.success_rate, r.kl, r.entropy
        )
    })?;
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    if a.k.iter().any(|&k| k == 0 || k > a.rollouts) {
        bail!("every k must lie in 1..={}", a.rollouts);
    }
    let policy: Policy = load_policy(&a.checkpoint)?;
    let mut rec = MetricsRecord::new(a.label.clone());
    match Suite::load(&a.suite)? {
        Suite::Rooms(c) => {
            let envs = rooms_envs(&c);
            rec.eval = Some(evaluate_suite(&policy, &envs, a.rollouts, &a.k, a.set_size, a.seed)?);
            if a.perturb {
                let ps = build_perturbation_suite(
                    &policy,
                    &envs,
                    a.perturb_temperature,
                    a.perturb_rollouts,
                    a.per_room,
                    a.seed,
                )?;
                rec.perturbation = Some(perturbation_eval(&policy, &envs, &ps, a.seed)?);
            }
        }
        Suite::Triangle(g) => {
            if a.perturb {
                bail!("perturbed starts are defined for rooms only");
            }
            let envs = triangle_envs(&g);
            rec.eval = Some(evaluate_suite(&policy, &envs, a.rollouts, &a.k, a.set_size, a.seed)?);
            rec.creativity = Some(creativity_metrics(&policy, &envs, a.rollouts, &a.k, a.seed)?);
        }
    }
    let csv = a.csv.clone().unwrap_or_else(|| a.out.with_extension("csv"));
    emit_metrics(&rec, &a.out, &csv)?;
    println!("{}", serde_json::to_string_pretty(&rec)?);
    Ok(())
}

fn theory(a: &TheoryArgs) -> Result<bool> {
    let reports = run_all(a.seed)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&reports)?);
    } else {
        for r in &reports {
            print!("{}", r.render());
        }
    }
    Ok(reports.iter().all(|r| r.pass))
}

fn plotdata(a: PlotArgs) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::from("source,metric,x,value\n");
    for path in &a.train {
        let src = path.display();
        for r in read_metrics(path)? {
            let mut rows = vec![
                ("mean_return", r.mean_return),
                ("success_rate", r.success_rate),
                ("policy_loss", r.policy_loss),
                ("value_loss", r.value_loss),
                ("kl", r.kl),
                ("entropy", r.entropy),
            ];
            if let Some(d) = r.set_diversity {
                rows.push(("set_diversity", d));
            }
            for (m, v) in rows {
                writeln!(out, "{src},{m},{},{v}", r.iteration)?;
            }
        }
    }
    for path in &a.eval {
        for rec in read_metrics_records(path)? {
            for (m, k, v) in rec.curve_rows() {
                writeln!(out, "{},{m},{k},{v}", rec.label)?;
            }
            if let Some(p) = rec.perturbation {
                writeln!(out, "{},perturbation_pass_at_1,1,{p}", rec.label)?;
            }
        }
    }
    fs::write(&a.out, out)?;
    Ok(())
}

fn describe(path: &Path) -> Result<()> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(p) = policy_from_bytes::<f64>(&bytes) {
        print_model("policy", p.parameterization(), p.param_count(), Some(p.num_actions()));
    } else {
        let c: CriticModel<f64> = critic_from_bytes(&bytes)?;
        print_model("critic", c.body().parameterization(), c.param_count(), None);
    }
    Ok(())
}

fn print_model(role: &str, param: Parameterization, count: usize, actions: Option<usize>) {
    println!("role: {role}");
    match param {
        Parameterization::Tabular { capacity } => println!("parameterization: tabular (capacity {capacity} rows)"),
        Parameterization::Mlp { hidden } => println!("parameterization: mlp (hidden {hidden})"),
    }
    if let Some(a) = actions {
        println!("actions: {a}");
    }
    println!("parameters: {count}");
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Pretrain(a) => pretrain(a),
        Command::Finetune(a) => finetune(a),
        Command::Eval(a) => eval(a),
        Command::Theory(a) => {
            if !theory(&a)? && a.strict {
                std::process::exit(1);
            }
            Ok(())
        }
        Command::Plotdata(a) => plotdata(a),
        Command::Describe { checkpoint } => describe(&checkpoint),
    }
}
