//! Cross-play matrix and antisymmetry report for a small pool.

use dojo::env::TaskConfig;
use dojo::harness::{antisymmetry_report, crossplay_evaluate, AgentHandle};
use dojo::sim::{Action, GripMode, JointMode};

fn main() {
    let pool = vec![
        AgentHandle::random(1),
        AgentHandle::random(2),
        AgentHandle::open_loop(
            "lunge",
            vec![Action::uniform(JointMode::ExtendRaise, GripMode::Grip)],
        ),
        AgentHandle::hold(),
    ];
    let m = crossplay_evaluate(&pool, 2, &TaskConfig::aikido_dojo(), 0).unwrap();
    print!("{}", m.table());
    print!("{}", antisymmetry_report(&m).render(&m.agents));
}
