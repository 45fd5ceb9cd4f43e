//! Every-agent-against-every-agent evaluation.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::agent::{mix, AgentHandle};
use super::episode::{local_env, run_episode};
use super::HarnessError;
use crate::env::TaskConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct CrossPlayMatrix {
    pub agents: Vec<String>,
    pub episodes_per_cell: usize,
    /// Mean score of agent `i` as player 1 against agent `j` as player 2.
    pub entries: Vec<Vec<f64>>,
    /// Mean score of the player 2 agent in the same games.
    pub p2_entries: Vec<Vec<f64>>,
}

/// Play `episodes` seeded games for every ordered pair, diagonal included.
///
/// Episode `e` of every cell uses the same episode seed, so cell `(i, j)`
/// and cell `(j, i)` see identical match settings.
pub fn crossplay_evaluate(
    pool: &[AgentHandle],
    episodes: usize,
    task: &TaskConfig,
    seed: u64,
) -> Result<CrossPlayMatrix, HarnessError> {
    if pool.is_empty() || episodes == 0 {
        return Err(HarnessError::Config(
            "crossplay needs agents and at least one episode".into(),
        ));
    }
    let mut task = task.clone();
    task.opponent = None;
    let n = pool.len();
    let jobs: Vec<(usize, usize, usize)> = (0..n)
        .flat_map(|i| (0..n).flat_map(move |j| (0..episodes).map(move |e| (i, j, e))))
        .collect();
    let scores = jobs
        .par_iter()
        .map(|&(i, j, e)| {
            let mut env = local_env(task.clone());
            let mut p1 = pool[i].policy();
            let mut p2 = pool[j].policy();
            let r = run_episode(
                &mut env,
                &mut [p1.as_mut(), p2.as_mut()],
                mix(seed, e as u64),
            )?;
            let s = r.score_p1();
            Ok((s, 1.0 - s))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let mut entries = vec![vec![0.0; n]; n];
    let mut p2_entries = vec![vec![0.0; n]; n];
    for (&(i, j, _), (s1, s2)) in jobs.iter().zip(scores) {
        entries[i][j] += s1 / episodes as f64;
        p2_entries[i][j] += s2 / episodes as f64;
    }
    Ok(CrossPlayMatrix {
        agents: pool.iter().map(|a| a.id.clone()).collect(),
        episodes_per_cell: episodes,
        entries,
        p2_entries,
    })
}

impl CrossPlayMatrix {
    /// Versioned tab-separated table, rows player 1, columns player 2.
    pub fn table(&self) -> String {
        let mut out = format!(
            "# dojo crossplay v1 episodes_per_cell={}\np1\\p2",
            self.episodes_per_cell
        );
        for a in &self.agents {
            let _ = write!(out, "\t{a}");
        }
        out.push('\n');
        for (a, row) in self.agents.iter().zip(&self.entries) {
            out.push_str(a);
            for v in row {
                let _ = write!(out, "\t{v:.4}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AntisymmetryReport {
    /// `|e[i][j] + e[j][i] - 1|`; zero on the diagonal.
    pub deviation: Vec<Vec<f64>>,
    pub mean_deviation: f64,
    pub max_deviation: f64,
    /// Off-diagonal pairs `(i, j, d)` with `i < j`, worst first.
    pub worst: Vec<(usize, usize, f64)>,
    /// `|e[i][i] - 0.5|` per agent.
    pub self_bias: Vec<f64>,
}

pub fn antisymmetry_report(m: &CrossPlayMatrix) -> AntisymmetryReport {
    let e = &m.entries;
    let n = e.len();
    let mut deviation = vec![vec![0.0; n]; n];
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                deviation[i][j] = (e[i][j] + e[j][i] - 1.0).abs();
                if i < j {
                    pairs.push((i, j, deviation[i][j]));
                }
            }
        }
    }
    let mean_deviation = if pairs.is_empty() {
        0.0
    } else {
        pairs.iter().map(|p| p.2).sum::<f64>() / pairs.len() as f64
    };
    let max_deviation = pairs.iter().map(|p| p.2).fold(0.0, f64::max);
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2));
    pairs.truncate(5);
    AntisymmetryReport {
        deviation,
        mean_deviation,
        max_deviation,
        worst: pairs,
        self_bias: (0..n).map(|i| (e[i][i] - 0.5).abs()).collect(),
    }
}

impl AntisymmetryReport {
    pub fn render(&self, agents: &[String]) -> String {
        let mut out = String::from("# dojo antisymmetry v1\n");
        let _ = writeln!(out, "mean_deviation\t{:.6}", self.mean_deviation);
        let _ = writeln!(out, "max_deviation\t{:.6}", self.max_deviation);
        for &(i, j, d) in &self.worst {
            let _ = writeln!(out, "pair\t{}\t{}\t{d:.6}", agents[i], agents[j]);
        }
        for (a, b) in agents.iter().zip(&self.self_bias) {
            let _ = writeln!(out, "self_bias\t{a}\t{b:.6}");
        }
        out
    }
}
