//! Deterministic fixed-timestep ragdoll physics for two characters.
//!
//! Each character is 21 spheres linked by 20 hinge joints. A frame applies
//! gravity and joint actuation, detects contacts, resolves joints and
//! contacts with a fixed-iteration impulse solver and integrates with
//! semi-implicit Euler. Injury, dismemberment and grips are evaluated at the
//! end of the frame.

mod injury;
pub mod skeleton;
mod solver;
mod step;
mod world;

use thiserror::Error;

pub use injury::{compute_injury, injury_multiplier, INJURY_SCALE};
pub use skeleton::{
    body_layout, default_character, default_character_text, BodyLayout, CharacterDef, JointDef,
    PartDef, JOINT_COUNT, JOINT_NAMES, PART_COUNT, PART_NAMES,
};
pub use step::{step_frame, step_part_free, ContactEvent, ContactKind, FrameEvents, Struck};
pub use world::{
    make_world, make_world_with, mirror_world, BodyPart, CharacterState, GripAttachment, Joint,
    WorldSettings, WorldState, DEFAULT_GRAVITY, DT,
};

/// Number of entries in an [`Action`]: 20 joints followed by right and left grip.
pub const ACTION_LEN: usize = JOINT_COUNT + 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid setting `{field}`: {reason}")]
    InvalidSetting { field: &'static str, reason: String },
    #[error("action must have {ACTION_LEN} entries, got {0}")]
    ActionLength(usize),
    #[error("action entry {index} has out-of-range value {value}")]
    ActionRange { index: usize, value: i64 },
    #[error("player index {0} out of range")]
    PlayerIndex(usize),
    #[error("character definition line {line}: {message}")]
    CharacterParse { line: usize, message: String },
    #[error("simulation fault: {0}")]
    Fault(String),
}

/// Actuation mode of one joint for the coming turn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum JointMode {
    Hold = 1,
    Relax = 2,
    ExtendRaise = 3,
    ContractLower = 4,
}

impl JointMode {
    pub const ALL: [JointMode; 4] = [
        JointMode::Hold,
        JointMode::Relax,
        JointMode::ExtendRaise,
        JointMode::ContractLower,
    ];

    pub fn from_wire(v: i64) -> Option<JointMode> {
        match v {
            1 => Some(JointMode::Hold),
            2 => Some(JointMode::Relax),
            3 => Some(JointMode::ExtendRaise),
            4 => Some(JointMode::ContractLower),
            _ => None,
        }
    }

    pub fn wire(self) -> u8 {
        self as u8
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum GripMode {
    Grip = 1,
    Release = 2,
}

impl GripMode {
    pub fn from_wire(v: i64) -> Option<GripMode> {
        match v {
            1 => Some(GripMode::Grip),
            2 => Some(GripMode::Release),
            _ => None,
        }
    }

    pub fn wire(self) -> u8 {
        self as u8
    }
}

/// One player's choices for a turn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Action {
    pub joints: [JointMode; JOINT_COUNT],
    /// Right grip, left grip.
    pub grips: [GripMode; 2],
}

impl Default for Action {
    fn default() -> Self {
        Action::uniform(JointMode::Hold, GripMode::Release)
    }
}

impl Action {
    pub fn uniform(mode: JointMode, grip: GripMode) -> Action {
        Action {
            joints: [mode; JOINT_COUNT],
            grips: [grip; 2],
        }
    }

    /// Every joint held, both hands released.
    pub fn hold() -> Action {
        Action::default()
    }

    /// Independent uniform draw for every entry.
    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R) -> Action {
        let mut action = Action::default();
        for m in &mut action.joints {
            *m = JointMode::ALL[rng.random_range(0..4)];
        }
        for g in &mut action.grips {
            *g = if rng.random_bool(0.5) {
                GripMode::Grip
            } else {
                GripMode::Release
            };
        }
        action
    }

    /// Build from the 22 wire integers.
    pub fn from_wire(values: &[i64]) -> Result<Action, SimError> {
        if values.len() != ACTION_LEN {
            return Err(SimError::ActionLength(values.len()));
        }
        let mut action = Action::default();
        for (i, &v) in values.iter().enumerate() {
            if i < JOINT_COUNT {
                action.joints[i] =
                    JointMode::from_wire(v).ok_or(SimError::ActionRange { index: i, value: v })?;
            } else {
                action.grips[i - JOINT_COUNT] =
                    GripMode::from_wire(v).ok_or(SimError::ActionRange { index: i, value: v })?;
            }
        }
        Ok(action)
    }

    pub fn to_wire(&self) -> [u8; ACTION_LEN] {
        let mut out = [0u8; ACTION_LEN];
        for (o, m) in out.iter_mut().zip(self.joints.iter()) {
            *o = m.wire();
        }
        out[JOINT_COUNT] = self.grips[0].wire();
        out[JOINT_COUNT + 1] = self.grips[1].wire();
        out
    }

    /// The same action with left and right swapped, as seen by the mirror
    /// image of the character.
    pub fn mirrored(&self) -> Action {
        let mut out = *self;
        for j in 0..JOINT_COUNT {
            out.joints[j] = self.joints[skeleton::mirror_joint(j)];
        }
        out.grips = [self.grips[1], self.grips[0]];
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_wire_roundtrip_and_range() {
        let mut wire = [1i64; ACTION_LEN];
        wire[3] = 4;
        wire[21] = 2;
        let a = Action::from_wire(&wire).unwrap();
        assert_eq!(a.to_wire().map(i64::from), wire);
        wire[7] = 5;
        assert_eq!(
            Action::from_wire(&wire),
            Err(SimError::ActionRange { index: 7, value: 5 })
        );
        wire[7] = 1;
        wire[20] = 3;
        assert_eq!(
            Action::from_wire(&wire),
            Err(SimError::ActionRange {
                index: 20,
                value: 3
            })
        );
        assert_eq!(
            Action::from_wire(&wire[..21]),
            Err(SimError::ActionLength(21))
        );
    }

    #[test]
    fn mirrored_action_is_involution() {
        let mut a = Action::hold();
        a.joints[skeleton::joint_id("r_knee").unwrap()] = JointMode::ExtendRaise;
        a.grips[0] = GripMode::Grip;
        let m = a.mirrored();
        assert_eq!(
            m.joints[skeleton::joint_id("l_knee").unwrap()],
            JointMode::ExtendRaise
        );
        assert_eq!(m.grips, [GripMode::Release, GripMode::Grip]);
        assert_eq!(m.mirrored(), a);
    }
}
