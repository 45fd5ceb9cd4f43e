use std::sync::Arc;

use crate::env::{Client, ClientError, Env, TaskConfig};
use crate::proto::{SessionConfig, WireWinner};

use super::agent::Policy;

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    /// Summed reward per agent.
    pub returns: Vec<f64>,
    pub winner: WireWinner,
    pub frames: u64,
    pub turns: usize,
    pub injuries: [f64; 2],
}

impl EpisodeResult {
    /// Player 1 score: win 1, draw 0.5, loss 0.
    pub fn score_p1(&self) -> f64 {
        match self.winner {
            WireWinner::Player1 => 1.0,
            WireWinner::Player2 => 0.0,
            _ => 0.5,
        }
    }
}

/// In-process environment for `task`.
pub fn local_env(task: TaskConfig) -> Env {
    Env::new(Client::local(Arc::new(SessionConfig::default())), task)
}

/// Play one episode with one policy per agent of the task.
pub fn run_episode(
    env: &mut Env,
    policies: &mut [&mut dyn Policy],
    seed: u64,
) -> Result<EpisodeResult, ClientError> {
    assert_eq!(policies.len(), env.task().agents(), "one policy per agent");
    for p in policies.iter_mut() {
        p.reset(seed);
    }
    let mut obs = env.reset(seed)?;
    let mut returns = vec![0.0; policies.len()];
    let mut turn = 0;
    loop {
        let actions: Vec<_> = policies
            .iter_mut()
            .zip(&obs)
            .map(|(p, o)| p.act(o, turn))
            .collect();
        let step = env.step(&actions)?;
        turn += 1;
        for (r, x) in returns.iter_mut().zip(&step.rewards) {
            *r += x;
        }
        if step.terminal {
            return Ok(EpisodeResult {
                returns,
                winner: step.info.state.winner,
                frames: step.info.frames_played,
                turns: turn,
                injuries: step.info.injuries,
            });
        }
        obs = step.observations;
    }
}
