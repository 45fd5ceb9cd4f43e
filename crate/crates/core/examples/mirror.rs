//! Run a match and its left/right mirror side by side and report the
//! largest relative deviation.

use dojo::sim::{make_world, mirror_world, step_frame, Action, WorldSettings};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut world = make_world(
        &WorldSettings {
            engagement_distance: 90.0,
            ..Default::default()
        },
        5,
    )
    .unwrap();
    let mut mirror = mirror_world(&world);
    let mut worst = 0.0f64;
    for frame in 0..500 {
        if frame % 10 == 0 {
            for k in 0..2 {
                let a = Action::random(&mut rng);
                world.set_joint_modes(k, &a).unwrap();
                mirror.set_joint_modes(1 - k, &a.mirrored()).unwrap();
            }
        }
        step_frame(&mut world);
        step_frame(&mut mirror);
        worst = worst.max(mirror_world(&world).max_relative_deviation(&mirror));
    }
    println!("max relative deviation over 500 frames: {worst:.3e}");
}
