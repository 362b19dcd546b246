//! Evaluation: success and pass@k over a configuration suite, triangle
//! creativity metrics, perturbed-start generalization, and metrics files.

mod creativity;
mod emit;
mod passk;
mod perturb;
mod suite;

pub use creativity::{
    creativity_from_outputs, creativity_metrics, emitted_triangle, score_attempts, CreativityReport, GraphCreativity,
    DIFF_RESAMPLES,
};
pub use emit::{emit_metrics, read_metrics_records, MetricsRecord, CSV_HEADER};
pub use passk::{distinct_at_k, pass_at_k};
pub use perturb::{build_perturbation_suite, perturb_config, perturbation_eval, PerturbationSuite, PerturbedConfig};
pub use suite::{evaluate_suite, evaluation_rollouts, summarize, ConfigEval, EvalReport, EVAL_SCHEMA};
