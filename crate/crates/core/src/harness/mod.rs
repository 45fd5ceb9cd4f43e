//! Agents, baseline search, opponent scheduling, cross-play and benchmarks.

mod agent;
mod bench;
mod crossplay;
mod episode;
mod pool;
mod search;

use thiserror::Error;

use crate::env::ClientError;

pub use agent::{mix, AgentHandle, AgentKind, Policy};
pub use bench::{bench_csv, bench_plot, benchmark, BenchConfig, BenchRow, Transport};
pub use crossplay::{antisymmetry_report, crossplay_evaluate, AntisymmetryReport, CrossPlayMatrix};
pub use episode::{local_env, run_episode, EpisodeResult};
pub use pool::{
    draw_opponent, select_opponent, simulate_schedule, Category, OpponentPoolConfig, RoleSchedule,
    ScheduleStats, Selection,
};
pub use search::{search_agent_train, task_turns, CurvePoint, SearchConfig, SearchResult};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("budget too small: {0}")]
    Budget(String),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
