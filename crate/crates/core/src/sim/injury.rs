use super::skeleton::{self, PART_COUNT};
use super::step::{ContactEvent, ContactKind, Struck};

/// Global factor applied to every injury contribution.
pub const INJURY_SCALE: f64 = 1.0;

const MULTIPLIERS: [f64; PART_COUNT] = {
    let mut m = [1.0; PART_COUNT];
    m[skeleton::HEAD] = 2.5;
    m[skeleton::BREAST] = 1.5;
    m[skeleton::CHEST] = 1.5;
    m[skeleton::STOMACH] = 1.5;
    m[skeleton::GROIN] = 1.5;
    // hands, butts, feet
    m[11] = 0.5;
    m[12] = 0.5;
    m[13] = 0.5;
    m[14] = 0.5;
    m[19] = 0.5;
    m[20] = 0.5;
    m
};

/// Damage multiplier for a part id.
pub fn injury_multiplier(part: usize) -> f64 {
    MULTIPLIERS[part]
}

/// Injury received by each player from one frame of contacts.
///
/// Only player-player contacts count. The struck side receives
/// `multiplier(part) * impulse * INJURY_SCALE`; when both sides are struck
/// each one receives its own share.
pub fn compute_injury(contacts: &[ContactEvent]) -> [f64; 2] {
    let mut deltas = [0.0, 0.0];
    for c in contacts {
        if c.kind != ContactKind::PlayerPlayer {
            continue;
        }
        let (Some(player_b), Some(part_b)) = (c.player_b, c.part_b) else {
            continue;
        };
        let impulse = c.impulse_magnitude.max(0.0);
        if matches!(c.struck, Struck::A | Struck::Both) {
            deltas[c.player_a] += injury_multiplier(c.part_a) * impulse * INJURY_SCALE;
        }
        if matches!(c.struck, Struck::B | Struck::Both) {
            deltas[player_b] += injury_multiplier(part_b) * impulse * INJURY_SCALE;
        }
    }
    deltas
}
