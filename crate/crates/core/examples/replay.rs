//! Record a match, save it, load it back and re-simulate it.

use dojo::rules::{MatchSettings, MatchState, Replay};
use dojo::sim::{Action, GripMode, JointMode};

fn main() {
    let mut m = MatchState::recorded(MatchSettings {
        matchframes: 300,
        engagement_distance: 120.0,
        ..Default::default()
    })
    .unwrap();
    let kick = Action::uniform(JointMode::ContractLower, GripMode::Grip);
    while !m.terminal {
        m.submit_actions(&kick, &Action::hold()).unwrap();
    }

    let mut bytes = Vec::new();
    m.replay().save(&mut bytes).unwrap();
    println!("replay: {} frames, {} bytes", m.replay().len(), bytes.len());

    let loaded = Replay::load(bytes.as_slice()).unwrap();
    loaded
        .verify()
        .expect("re-simulation matches the recording");
    let last = loaded.playback().last().unwrap();
    println!(
        "frame {}: injuries {:.1} / {:.1}, outcome {:?}",
        last.frame,
        last.players[0].injury,
        last.players[1].injury,
        loaded.outcome.map(|o| o.winner)
    );
}
