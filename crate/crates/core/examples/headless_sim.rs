//! Step the raw physics with a scripted punch and print the injury totals.

use dojo::sim::{make_world, skeleton, step_frame, Action, JointMode, WorldSettings};

fn main() {
    let mut world = make_world(
        &WorldSettings {
            engagement_distance: 100.0,
            ..Default::default()
        },
        0,
    )
    .expect("default settings are valid");

    let mut punch = Action::hold();
    punch.joints[skeleton::joint_id("lumbar").unwrap()] = JointMode::ExtendRaise;
    punch.joints[skeleton::joint_id("r_shoulder").unwrap()] = JointMode::ExtendRaise;
    world.set_joint_modes(0, &punch).unwrap();

    let mut contacts = 0;
    for _ in 0..300 {
        contacts += step_frame(&mut world).player_contacts().count();
    }
    println!("frames: {}", world.frame_index);
    println!("player contacts: {contacts}");
    for (k, p) in world.players.iter().enumerate() {
        println!(
            "player {}: injury {:.1}, groin height {:.1}",
            k + 1,
            p.injury,
            p.groin().position.z
        );
    }
}
