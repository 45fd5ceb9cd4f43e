//! Agents: named, seeded policies.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::Observation;
use crate::sim::Action;

/// Per-episode policy instance.
pub trait Policy: Send {
    /// Called before the first turn of every episode.
    fn reset(&mut self, episode_seed: u64);
    fn act(&mut self, obs: &Observation, turn: usize) -> Action;
}

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b
        .wrapping_add(0x9e37_79b9_7f4a_7c15)
        .wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, PartialEq)]
pub enum AgentKind {
    /// Independent uniform draw of all 22 entries every turn.
    Random { seed: u64 },
    /// The same action every turn.
    Constant(Action),
    /// A fixed action per turn; the last one repeats.
    OpenLoop(Arc<Vec<Action>>),
}

#[derive(Clone, PartialEq)]
pub struct AgentHandle {
    pub id: String,
    pub revision: u32,
    pub kind: AgentKind,
}

impl fmt::Debug for AgentHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AgentHandle({}@{})", self.id, self.revision)
    }
}

impl AgentHandle {
    pub fn random(seed: u64) -> AgentHandle {
        AgentHandle {
            id: format!("random-{seed}"),
            revision: 0,
            kind: AgentKind::Random { seed },
        }
    }

    pub fn hold() -> AgentHandle {
        AgentHandle {
            id: "hold".into(),
            revision: 0,
            kind: AgentKind::Constant(Action::hold()),
        }
    }

    pub fn open_loop(id: impl Into<String>, actions: Vec<Action>) -> AgentHandle {
        assert!(
            !actions.is_empty(),
            "open-loop agent needs at least one action"
        );
        AgentHandle {
            id: id.into(),
            revision: 0,
            kind: AgentKind::OpenLoop(Arc::new(actions)),
        }
    }

    /// Same observations and episode seeds always give the same actions.
    /// Random agents also repeat, but vary between episode seeds.
    pub fn deterministic(&self) -> bool {
        !matches!(self.kind, AgentKind::Random { .. })
    }

    pub fn policy(&self) -> Box<dyn Policy> {
        match &self.kind {
            AgentKind::Random { seed } => Box::new(RandomPolicy {
                seed: *seed,
                rng: ChaCha8Rng::seed_from_u64(*seed),
            }),
            AgentKind::Constant(a) => Box::new(OpenLoopPolicy(Arc::new(vec![*a]))),
            AgentKind::OpenLoop(actions) => Box::new(OpenLoopPolicy(Arc::clone(actions))),
        }
    }
}

struct RandomPolicy {
    seed: u64,
    rng: ChaCha8Rng,
}

impl Policy for RandomPolicy {
    fn reset(&mut self, episode_seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(mix(self.seed, episode_seed));
    }

    fn act(&mut self, _obs: &Observation, _turn: usize) -> Action {
        Action::random(&mut self.rng)
    }
}

struct OpenLoopPolicy(Arc<Vec<Action>>);

impl Policy for OpenLoopPolicy {
    fn reset(&mut self, _episode_seed: u64) {}

    fn act(&mut self, _obs: &Observation, turn: usize) -> Action {
        self.0[turn.min(self.0.len() - 1)]
    }
}

const AGENT_MAGIC: &str = "# dojo agent v1";

impl AgentHandle {
    /// Text form of an open-loop or constant agent: a header line, then the
    /// 22 wire integers of one turn per line.
    pub fn to_text(&self) -> Option<String> {
        let actions: Vec<Action> = match &self.kind {
            AgentKind::Random { .. } => return None,
            AgentKind::Constant(a) => vec![*a],
            AgentKind::OpenLoop(v) => v.as_ref().clone(),
        };
        let mut out = format!("{AGENT_MAGIC} id={} revision={}\n", self.id, self.revision);
        for a in actions {
            let line: Vec<String> = a.to_wire().iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        Some(out)
    }

    pub fn from_text(text: &str) -> Result<AgentHandle, String> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        let rest = header
            .strip_prefix(AGENT_MAGIC)
            .ok_or_else(|| format!("not an agent file (header `{header}`)"))?;
        let mut id = "agent".to_string();
        let mut revision = 0;
        for kv in rest.split_whitespace() {
            match kv.split_once('=') {
                Some(("id", v)) => id = v.to_string(),
                Some(("revision", v)) => {
                    revision = v.parse().map_err(|_| format!("bad revision `{v}`"))?
                }
                _ => return Err(format!("bad header field `{kv}`")),
            }
        }
        let mut actions = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let values = line
                .split_whitespace()
                .map(|t| t.parse::<i64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| format!("line {}: {e}", n + 2))?;
            actions.push(Action::from_wire(&values).map_err(|e| format!("line {}: {e}", n + 2))?);
        }
        if actions.is_empty() {
            return Err("agent file has no actions".into());
        }
        let mut agent = AgentHandle::open_loop(id, actions);
        agent.revision = revision;
        Ok(agent)
    }

    /// `random:SEED`, `hold`, or the path of an agent file.
    pub fn from_spec(spec: &str) -> Result<AgentHandle, String> {
        if spec == "hold" {
            return Ok(AgentHandle::hold());
        }
        if let Some(seed) = spec.strip_prefix("random:") {
            let seed = seed.parse().map_err(|_| format!("bad seed in `{spec}`"))?;
            return Ok(AgentHandle::random(seed));
        }
        let text = std::fs::read_to_string(spec).map_err(|e| format!("cannot read {spec}: {e}"))?;
        AgentHandle::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{GripMode, JointMode};

    #[test]
    fn text_round_trip() {
        let a = AgentHandle::open_loop(
            "x",
            vec![
                Action::hold(),
                Action::uniform(JointMode::ContractLower, GripMode::Grip),
            ],
        );
        let back = AgentHandle::from_text(&a.to_text().unwrap()).unwrap();
        assert_eq!(back, a);
        assert!(AgentHandle::random(1).to_text().is_none());
        assert!(AgentHandle::from_text("junk").is_err());
        assert!(AgentHandle::from_text("# dojo agent v1 id=a\n1 2 3\n").is_err());
        assert_eq!(
            AgentHandle::from_spec("random:5").unwrap(),
            AgentHandle::random(5)
        );
    }
}
