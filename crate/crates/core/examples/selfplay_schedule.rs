//! Opponent selection statistics of the self-play pool.

use dojo::harness::{select_opponent, simulate_schedule, AgentHandle, OpponentPoolConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let cfg = OpponentPoolConfig {
        past_pool: (0..3).map(AgentHandle::random).collect(),
        ..OpponentPoolConfig::default()
    };
    let stats = simulate_schedule(&cfg, 100_000, 100_000, 1).unwrap();
    print!("{}", stats.table());

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut prev = None;
    for game in 0..5 {
        let (sel, fresh) = select_opponent(&cfg, &mut rng, prev);
        println!(
            "game {game}: {:?} #{} fresh={fresh}",
            sel.category, sel.index
        );
        prev = Some(sel);
    }
}
