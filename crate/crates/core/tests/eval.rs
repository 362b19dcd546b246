use polychromic::env::{two_room_config, Environment, RoomsEnv};
use polychromic::eval::{
    build_perturbation_suite, emit_metrics, evaluate_suite, perturbation_eval, read_metrics_records, MetricsRecord,
    CSV_HEADER,
};
use polychromic::policy::{Parameterization, PolicyModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn suite(k: usize) -> Vec<RoomsEnv> {
    (0..k).map(|i| RoomsEnv::new(two_room_config(i, 60).unwrap(), 0)).collect()
}

fn policy(env: &RoomsEnv) -> PolicyModel<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    PolicyModel::new(Parameterization::Tabular { capacity: 4096 }, &env.obs_spec(), env.num_actions(), &mut rng)
}

#[test]
fn perturbed_starts_are_solvable_and_in_visited_rooms() {
    let envs = suite(2);
    let pi = policy(&envs[0]);
    let ps = build_perturbation_suite(&pi, &envs, 2.0, 20, 3, 7).unwrap();
    assert!(!ps.is_empty());
    for pc in &ps.configs {
        assert!(!pc.rooms.is_empty());
        assert!(pc.starts.len() <= 3 * pc.rooms.len());
        for st in &pc.starts {
            let mut e = envs[pc.config].clone();
            e.restore(st).unwrap();
            let room = envs[pc.config].config().room_of(e.agent().0).unwrap();
            assert!(pc.rooms.contains(&room));
            assert!(e.plan().is_some_and(|p| !p.is_empty()));
        }
    }
    let a = perturbation_eval(&pi, &envs, &ps, 1).unwrap();
    let b = perturbation_eval(&pi, &envs, &ps, 1).unwrap();
    assert_eq!(a, b);
    assert!((0.0..=1.0).contains(&a));
    // Same seed, same suite.
    assert_eq!(ps, build_perturbation_suite(&pi, &envs, 2.0, 20, 3, 7).unwrap());
}

#[test]
fn metrics_round_trip() {
    let envs = suite(2);
    let pi = policy(&envs[0]);
    let report = evaluate_suite(&pi, &envs, 8, &[1, 2, 4, 8], 4, 3).unwrap();
    assert_eq!(report.pass_at_k.len(), 4);
    let dir = tempfile::tempdir().unwrap();
    let (j, c) = (dir.path().join("m.jsonl"), dir.path().join("m.csv"));
    let mut rec = MetricsRecord::new("base");
    rec.eval = Some(report);
    rec.perturbation = Some(0.25);
    emit_metrics(&rec, &j, &c).unwrap();
    emit_metrics(&rec, &j, &c).unwrap();
    assert_eq!(read_metrics_records(&j).unwrap(), vec![rec.clone(), rec]);
    let csv = std::fs::read_to_string(&c).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 1 + 2 * 4);
    assert!(lines[1].starts_with("1,base,pass_at_k,1,"));
}
