//! Self-play opponent scheduling.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::agent::AgentHandle;
use super::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Category {
    Random,
    Past,
    /// The learning agent itself.
    Current,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Random, Category::Past, Category::Current];

    pub fn name(self) -> &'static str {
        match self {
            Category::Random => "random",
            Category::Past => "past",
            Category::Current => "current",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RoleSchedule {
    /// The learner is always player 1.
    Fixed,
    /// The learner switches sides every game.
    Alternating,
}

#[derive(Clone, Debug)]
pub struct OpponentPoolConfig {
    pub p_random: f64,
    pub p_past: f64,
    pub p_self: f64,
    /// Chance per game that the opponent is drawn again.
    pub swap_probability: f64,
    pub past_pool: Vec<AgentHandle>,
    pub roles: RoleSchedule,
}

impl Default for OpponentPoolConfig {
    fn default() -> Self {
        OpponentPoolConfig {
            p_random: 0.2,
            p_past: 0.2,
            p_self: 0.6,
            swap_probability: 0.01,
            past_pool: Vec::new(),
            roles: RoleSchedule::Alternating,
        }
    }
}

impl OpponentPoolConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let ps = [
            self.p_random,
            self.p_past,
            self.p_self,
            self.swap_probability,
        ];
        if ps.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(HarnessError::Config(
                "probabilities must be in [0, 1]".into(),
            ));
        }
        let sum = self.p_random + self.p_past + self.p_self;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(HarnessError::Config(format!(
                "category probabilities sum to {sum}, not 1"
            )));
        }
        Ok(())
    }

    /// Category weights after moving the past mass onto the others when
    /// no past agent exists.
    pub fn effective_weights(&self) -> [f64; 3] {
        if self.past_pool.is_empty() {
            let rest = self.p_random + self.p_self;
            [self.p_random / rest, 0.0, self.p_self / rest]
        } else {
            [self.p_random, self.p_past, self.p_self]
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Selection {
    pub category: Category,
    /// Index into the past pool for [`Category::Past`], 0 otherwise.
    pub index: usize,
}

/// Draw a category by weight, then a uniform member of it.
pub fn draw_opponent(cfg: &OpponentPoolConfig, rng: &mut impl Rng) -> Selection {
    let w = cfg.effective_weights();
    let u: f64 = rng.random();
    let category = if u < w[0] {
        Category::Random
    } else if u < w[0] + w[1] {
        Category::Past
    } else {
        Category::Current
    };
    let index = match category {
        Category::Past => rng.random_range(0..cfg.past_pool.len()),
        _ => 0,
    };
    Selection { category, index }
}

/// Keep `previous` unless the per-game swap fires; draw fresh otherwise.
/// The second value tells whether a fresh draw happened.
pub fn select_opponent(
    cfg: &OpponentPoolConfig,
    rng: &mut impl Rng,
    previous: Option<Selection>,
) -> (Selection, bool) {
    match previous {
        Some(prev) if !rng.random_bool(cfg.swap_probability) => (prev, false),
        _ => (draw_opponent(cfg, rng), true),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleStats {
    pub fresh_draws: usize,
    /// Fresh draws per category, in [`Category::ALL`] order.
    pub category_counts: [usize; 3],
    pub games: usize,
    /// Games after the first where the opponent was drawn again.
    pub swaps: usize,
    /// Games where the drawn opponent differed from the previous one.
    pub changes: usize,
    /// Games the learner played as player 1.
    pub learner_p1: usize,
}

impl ScheduleStats {
    pub fn category_frequencies(&self) -> [f64; 3] {
        self.category_counts
            .map(|c| c as f64 / self.fresh_draws.max(1) as f64)
    }

    pub fn swap_rate(&self) -> f64 {
        self.swaps as f64 / (self.games.max(2) - 1) as f64
    }

    pub fn table(&self) -> String {
        let mut out = String::from("# dojo selfplay-schedule v1\nmetric\tvalue\n");
        let f = self.category_frequencies();
        for (c, v) in Category::ALL.iter().zip(f) {
            let _ = writeln!(out, "freq_{}\t{v:.6}", c.name());
        }
        let _ = writeln!(out, "fresh_draws\t{}", self.fresh_draws);
        let _ = writeln!(out, "games\t{}", self.games);
        let _ = writeln!(out, "swap_rate\t{:.6}", self.swap_rate());
        let _ = writeln!(
            out,
            "change_rate\t{:.6}",
            self.changes as f64 / (self.games.max(2) - 1) as f64
        );
        let _ = writeln!(
            out,
            "learner_p1_share\t{:.6}",
            self.learner_p1 as f64 / self.games.max(1) as f64
        );
        out
    }
}

/// Simulate `draws` independent fresh selections and a `games`-long
/// schedule with per-game swapping.
pub fn simulate_schedule(
    cfg: &OpponentPoolConfig,
    draws: usize,
    games: usize,
    seed: u64,
) -> Result<ScheduleStats, HarnessError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut category_counts = [0usize; 3];
    for _ in 0..draws {
        let s = draw_opponent(cfg, &mut rng);
        category_counts[s.category as usize] += 1;
    }
    let mut previous = None;
    let (mut swaps, mut changes, mut learner_p1) = (0, 0, 0);
    for game in 0..games {
        let (sel, fresh) = select_opponent(cfg, &mut rng, previous);
        if game > 0 {
            swaps += usize::from(fresh);
            changes += usize::from(Some(sel) != previous);
        }
        previous = Some(sel);
        learner_p1 += usize::from(cfg.roles == RoleSchedule::Fixed || game % 2 == 0);
    }
    Ok(ScheduleStats {
        fresh_draws: draws,
        category_counts,
        games,
        swaps,
        changes,
        learner_p1,
    })
}
