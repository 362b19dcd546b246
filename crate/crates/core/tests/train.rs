use polychromic::env::{parse_rooms_configs, two_room_config, Environment, RoomsEnv};
use polychromic::policy::{CriticModel, Parameterization, PolicyModel};
use polychromic::train::{read_metrics, resume, train_run, Method, TrainConfig, Trainer, METRICS_FILE};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn suite(k: usize, horizon: usize) -> Vec<RoomsEnv> {
    (0..k).map(|i| RoomsEnv::new(two_room_config(i, horizon).unwrap(), 0)).collect()
}

fn models(env: &RoomsEnv) -> (PolicyModel<f64>, CriticModel<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let p = Parameterization::Tabular { capacity: 20_000 };
    (PolicyModel::new(p, &env.obs_spec(), env.num_actions(), &mut rng), CriticModel::new(p, &env.obs_spec(), &mut rng))
}

fn trainer(cfg: TrainConfig, envs: Vec<RoomsEnv>) -> Trainer<f64, RoomsEnv> {
    let (p, c) = models(&envs[0]);
    Trainer::new(cfg, envs, p, c).unwrap()
}

#[test]
fn default_budget_collects_136_trajectories() {
    let cfg = TrainConfig { iterations: 3, ..Default::default() };
    let mut t = trainer(cfg, suite(4, 40));
    for _ in 0..3 {
        let r = t.step().unwrap();
        assert_eq!(r.trajectories, 136);
        assert!(r.trajectories <= r.budget);
        assert!(r.first_ratio_deviation < 1e-12);
    }
}

#[test]
fn same_seed_same_reports() {
    let cfg = TrainConfig { iterations: 3, actor_lr: 0.5, critic_lr: 0.5, ucb_lambda: 0.1, ..Default::default() };
    let run = || {
        let mut t = trainer(cfg.clone(), suite(3, 30));
        (0..3).map(|_| serde_json::to_string(&t.step().unwrap()).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn resume_reproduces_the_remaining_run() {
    let cfg = TrainConfig { iterations: 4, checkpoint_every: 2, actor_lr: 0.5, critic_lr: 0.5, ..Default::default() };
    let full = tempfile::tempdir().unwrap();
    let mut t = trainer(cfg.clone(), suite(3, 30));
    train_run(&mut t, full.path(), |_| {}).unwrap();

    let part = tempfile::tempdir().unwrap();
    let mut t = trainer(TrainConfig { iterations: 2, ..cfg.clone() }, suite(3, 30));
    train_run(&mut t, part.path(), |_| {}).unwrap();
    let mut t = resume::<f64, _>(cfg, suite(3, 30), part.path()).unwrap();
    assert_eq!(t.iteration, 2);
    train_run(&mut t, part.path(), |_| {}).unwrap();

    let a = std::fs::read(full.path().join(METRICS_FILE)).unwrap();
    let b = std::fs::read(part.path().join(METRICS_FILE)).unwrap();
    assert_eq!(a, b);
    assert_eq!(read_metrics(&part.path().join(METRICS_FILE)).unwrap().len(), 4);
}

const TRIVIAL: &str = "\
name: trivial
horizon: 8
mission: goto red ball
start: 1 1 random
object: ball red 3 1
layout:
#####
#...#
#####
end
";

#[test]
fn trivial_task_is_learned() {
    let env = RoomsEnv::new(parse_rooms_configs(TRIVIAL).unwrap().remove(0), 0);
    for method in [Method::PolyPpo, Method::Ppo, Method::Reinforce] {
        let cfg = TrainConfig {
            method,
            iterations: 50,
            actor_lr: if method == Method::Reinforce { 4.0 } else { 1.0 },
            critic_lr: 0.5,
            max_grad_norm: 5.0,
            ..Default::default()
        };
        let mut t = trainer(cfg, vec![env.clone()]);
        let mut last = 0.0;
        for _ in 0..50 {
            last = t.step().unwrap().success_rate;
        }
        assert_eq!(last, 1.0, "{method:?}");
    }
}
