//! Start a control server on an ephemeral port and drive a match over TCP.

use std::time::Duration;

use dojo::env::{Client, Env, TaskConfig};
use dojo::proto::{serve, ServerConfig};
use dojo::sim::{Action, GripMode, JointMode};

fn main() {
    let server = serve(ServerConfig {
        addr: "127.0.0.1:0".parse().unwrap(),
        replay_dir: None,
    })
    .unwrap();
    println!("server on {}", server.local_addr());

    let client = Client::connect(server.local_addr(), Duration::from_secs(5)).unwrap();
    let mut env = Env::new(client, TaskConfig::aikido_dojo());
    env.reset(3).unwrap();
    let push = Action::uniform(JointMode::ExtendRaise, GripMode::Release);
    loop {
        let step = env.step(&[push, Action::hold()]).unwrap();
        if step.terminal {
            println!(
                "winner {:?} after {} frames, rewards {:?}",
                step.info.state.winner, step.info.frames_played, step.rewards
            );
            break;
        }
    }
    env.close().unwrap();
    server.shutdown();
}
