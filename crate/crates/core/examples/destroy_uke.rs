//! One episode of the single-agent task with a random policy, in process.

use dojo::env::TaskConfig;
use dojo::harness::{local_env, AgentHandle};

fn main() {
    let mut env = local_env(TaskConfig::destroy_uke());
    let mut policy = AgentHandle::random(7).policy();
    policy.reset(1);

    let mut obs = env.reset(1).unwrap();
    println!("observation length: {}", obs[0].len());
    let (mut ret, mut turn) = (0.0, 0);
    loop {
        let action = policy.act(&obs[0], turn);
        let step = env.step(&[action]).unwrap();
        ret += step.rewards[0];
        turn += 1;
        obs = step.observations;
        if step.terminal {
            println!(
                "turns {turn}, frames {}, return {ret:.3}, injuries {:?}",
                step.info.frames_played, step.info.injuries
            );
            break;
        }
    }
    env.close().unwrap();
}
