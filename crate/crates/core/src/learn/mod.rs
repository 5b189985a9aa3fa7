//! Online structure and parameter learning.

mod config;
mod dekf;
mod gmm;
mod trainer;

pub use config::TrainConfig;
pub use dekf::{dekf_update, kalman_step, DekfOutcome, KalmanStep};
pub use gmm::{
    qmf_to_gaussian, rule_significance, rule_width, should_grow, GMMState, GaussianApprox, GaussianComponent,
    RuleSummary, SignificanceResult,
};
pub use trainer::{
    candidate_widths, inflate_covariances, init_rule, jump_positions, reduce_to_type1, select_winning_rule,
    train_online, OnlineTrainer, TrainingLog, TrainingLogEntry, MIN_RULE_WIDTH,
};
