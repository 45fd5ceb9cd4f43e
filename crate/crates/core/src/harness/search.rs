//! Cross-entropy search over open-loop action sequences.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::agent::{mix, AgentHandle};
use super::episode::{local_env, run_episode};
use super::HarnessError;
use crate::env::TaskConfig;
use crate::sim::{Action, GripMode, JointMode, ACTION_LEN, JOINT_COUNT};

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub population: usize,
    pub elite: usize,
    /// Weight kept from the previous distribution at each refit; the elite
    /// frequencies get the rest.
    pub smoothing: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            population: 32,
            elite: 8,
            smoothing: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub iteration: usize,
    pub episodes: usize,
    pub mean_return: f64,
    pub elite_mean: f64,
    /// Best single-episode return of any sample.
    pub best_return: f64,
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    /// Most likely action of every entry under the final distribution.
    pub agent: AgentHandle,
    /// Best single-episode return of any sample.
    pub best_return: f64,
    pub episodes_used: usize,
    pub curve: Vec<CurvePoint>,
}

impl SearchResult {
    /// Training curve as a versioned tab-separated table.
    pub fn curve_table(&self) -> String {
        let mut out = String::from(
            "# dojo train-curve v1\niteration\tepisodes\tmean_return\telite_mean\tbest_return\n",
        );
        for c in &self.curve {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.6}\t{:.6}\t{:.6}",
                c.iteration, c.episodes, c.mean_return, c.elite_mean, c.best_return
            );
        }
        out
    }
}

/// Number of turns until the task's match ends.
pub fn task_turns(task: &TaskConfig) -> usize {
    let s = &task.settings;
    let mut frames = 0u64;
    let mut turns = 0;
    while frames < s.matchframes {
        frames += u64::from(s.turnframes(turns));
        turns += 1;
    }
    turns
}

/// Categorical distribution per turn and action entry.
struct Distribution {
    /// `[turn][entry][category]`; grips use the first two categories.
    p: Vec<[[f64; 4]; ACTION_LEN]>,
}

fn categories(entry: usize) -> usize {
    if entry < JOINT_COUNT {
        4
    } else {
        2
    }
}

impl Distribution {
    fn uniform(turns: usize) -> Distribution {
        let mut row = [[0.0; 4]; ACTION_LEN];
        for (e, r) in row.iter_mut().enumerate() {
            let k = categories(e);
            r[..k].fill(1.0 / k as f64);
        }
        Distribution {
            p: vec![row; turns],
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<[u8; ACTION_LEN]> {
        self.p
            .iter()
            .map(|row| {
                std::array::from_fn(|e| {
                    let u: f64 = rng.random();
                    let k = categories(e);
                    let mut acc = 0.0;
                    for (c, &p) in row[e][..k].iter().enumerate() {
                        acc += p;
                        if u < acc {
                            return c as u8;
                        }
                    }
                    (k - 1) as u8
                })
            })
            .collect()
    }

    fn mode(&self) -> Vec<[u8; ACTION_LEN]> {
        self.p
            .iter()
            .map(|row| {
                std::array::from_fn(|e| {
                    let probs = &row[e][..categories(e)];
                    // first maximum wins ties
                    let mut best = 0;
                    for (c, &p) in probs.iter().enumerate() {
                        if p > probs[best] {
                            best = c;
                        }
                    }
                    best as u8
                })
            })
            .collect()
    }

    fn refit(&mut self, elite: &[&Vec<[u8; ACTION_LEN]>], keep: f64) {
        let w = 1.0 / elite.len() as f64;
        for (t, row) in self.p.iter_mut().enumerate() {
            for (e, probs) in row.iter_mut().enumerate() {
                let mut freq = [0.0; 4];
                for s in elite {
                    freq[usize::from(s[t][e])] += w;
                }
                for (p, f) in probs[..categories(e)].iter_mut().zip(freq) {
                    *p = keep * *p + (1.0 - keep) * f;
                }
            }
        }
    }
}

fn to_actions(sample: &[[u8; ACTION_LEN]]) -> Vec<Action> {
    sample
        .iter()
        .map(|row| {
            let mut a = Action::hold();
            for (e, &c) in row.iter().enumerate() {
                if e < JOINT_COUNT {
                    a.joints[e] = JointMode::ALL[usize::from(c)];
                } else {
                    a.grips[e - JOINT_COUNT] = if c == 0 {
                        GripMode::Grip
                    } else {
                        GripMode::Release
                    };
                }
            }
            a
        })
        .collect()
}

/// Train an open-loop agent on a single-agent task within `budget` episodes.
///
/// Every iteration samples a population, plays each member on the same
/// episode seed, keeps the elite by return and refits the per-entry
/// category probabilities. The agent plays the most likely category of
/// every entry under the final distribution.
pub fn search_agent_train(
    task: &TaskConfig,
    config: &SearchConfig,
    budget: usize,
    seed: u64,
) -> Result<SearchResult, HarnessError> {
    if task.agents() != 1 {
        return Err(HarnessError::Config(
            "search needs a single-agent task".into(),
        ));
    }
    if config.elite == 0 || config.elite > config.population {
        return Err(HarnessError::Config(format!(
            "elite {} must be in 1..={}",
            config.elite, config.population
        )));
    }
    if !(0.0..1.0).contains(&config.smoothing) {
        return Err(HarnessError::Config(format!(
            "smoothing {} must be in [0, 1)",
            config.smoothing
        )));
    }
    if budget < config.population {
        return Err(HarnessError::Budget(format!(
            "budget {budget} is smaller than one population of {}",
            config.population
        )));
    }
    let turns = task_turns(task);
    let mut dist = Distribution::uniform(turns);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::NEG_INFINITY;
    let mut curve = Vec::new();
    let mut used = 0;
    let mut iteration = 0;
    while used + config.population <= budget {
        let samples: Vec<_> = (0..config.population)
            .map(|_| dist.sample(&mut rng))
            .collect();
        let episode_seed = mix(seed, iteration as u64);
        let returns = samples
            .par_iter()
            .map(|s| {
                let agent = AgentHandle::open_loop("candidate", to_actions(s));
                let mut policy = agent.policy();
                let mut env = local_env(task.clone());
                run_episode(&mut env, &mut [policy.as_mut()], episode_seed).map(|r| r.returns[0])
            })
            .collect::<Result<Vec<f64>, _>>()?;
        used += config.population;

        let mut order: Vec<usize> = (0..samples.len()).collect();
        // stable: ties keep sample order
        order.sort_by(|&a, &b| returns[b].total_cmp(&returns[a]));
        let elite: Vec<_> = order[..config.elite].iter().map(|&i| &samples[i]).collect();
        best = best.max(returns[order[0]]);
        dist.refit(&elite, config.smoothing);

        let mean = returns.iter().sum::<f64>() / returns.len() as f64;
        let elite_mean = order[..config.elite]
            .iter()
            .map(|&i| returns[i])
            .sum::<f64>()
            / config.elite as f64;
        log::debug!("iteration {iteration}: mean {mean:.4} elite {elite_mean:.4}");
        curve.push(CurvePoint {
            iteration,
            episodes: used,
            mean_return: mean,
            elite_mean,
            best_return: best,
        });
        iteration += 1;
    }
    let mut agent = AgentHandle::open_loop(format!("ce-{seed}"), to_actions(&dist.mode()));
    agent.revision = iteration as u32;
    Ok(SearchResult {
        agent,
        best_return: best,
        episodes_used: used,
        curve,
    })
}
