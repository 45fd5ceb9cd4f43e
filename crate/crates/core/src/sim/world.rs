use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::math::{Mat3, Vec3};

use super::skeleton::{
    self, mirror_joint, mirror_part, CharacterDef, JointDef, GROIN, HANDS, JOINT_COUNT, PART_COUNT,
};
use super::{Action, GripMode, JointMode, SimError};

/// Fixed simulation timestep in seconds.
pub const DT: f64 = 1.0 / 60.0;

pub const DEFAULT_GRAVITY: Vec3 = Vec3::new(0.0, 0.0, -30.0);

/// Physical settings needed to build a world.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldSettings {
    pub engagement_distance: f64,
    pub gravity: Vec3,
    pub dismemberment_enabled: bool,
}

impl Default for WorldSettings {
    fn default() -> Self {
        WorldSettings {
            engagement_distance: 100.0,
            gravity: DEFAULT_GRAVITY,
            dismemberment_enabled: true,
        }
    }
}

impl WorldSettings {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.engagement_distance > 0.0) || !self.engagement_distance.is_finite() {
            return Err(SimError::InvalidSetting {
                field: "engagement_distance",
                reason: format!(
                    "must be positive and finite, got {}",
                    self.engagement_distance
                ),
            });
        }
        if !self.gravity.is_finite() {
            return Err(SimError::InvalidSetting {
                field: "gravity",
                reason: "components must be finite".into(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BodyPart {
    pub id: usize,
    pub name: &'static str,
    pub position: Vec3,
    pub velocity: Vec3,
    /// Local-to-world rotation.
    pub orientation: Mat3,
    pub angular_velocity: Vec3,
    pub radius: f64,
    pub mass: f64,
    /// False once the part is cut off from the groin by a severed joint.
    pub attached: bool,
}

impl BodyPart {
    pub fn inv_mass(&self) -> f64 {
        1.0 / self.mass
    }

    /// Inverse of the (isotropic) solid-sphere moment of inertia.
    pub fn inv_inertia(&self) -> f64 {
        1.0 / (0.4 * self.mass * self.radius * self.radius)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Joint {
    pub id: usize,
    pub name: &'static str,
    pub parent_part: usize,
    pub child_part: usize,
    /// Hinge axis in the parent frame.
    pub axis: Vec3,
    pub angle: f64,
    pub mode: JointMode,
    pub torque_magnitude: f64,
    pub angle_limits: (f64, f64),
    pub intact: bool,
    /// Angle the joint is locked to while in `Hold`.
    pub hold_target: f64,
}

/// A hand attached to an opponent part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GripAttachment {
    pub hand: usize,
    pub target: usize,
    /// Attachment point in the hand frame.
    pub hand_anchor: Vec3,
    /// Attachment point in the target part frame.
    pub target_anchor: Vec3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CharacterState {
    pub parts: Vec<BodyPart>,
    pub joints: Vec<Joint>,
    /// Right hand, left hand.
    pub grips: [GripMode; 2],
    pub grip_attachments: Vec<GripAttachment>,
    pub injury: f64,
}

impl CharacterState {
    pub fn groin(&self) -> &BodyPart {
        &self.parts[GROIN]
    }

    /// Recompute `attached` flags from joint integrity (reachability from the groin).
    pub(crate) fn refresh_attachment(&mut self) {
        let mut attached = [false; PART_COUNT];
        attached[GROIN] = true;
        // joints are listed root-outwards only loosely, so iterate to a fixpoint
        loop {
            let mut changed = false;
            for j in &self.joints {
                if j.intact && attached[j.parent_part] && !attached[j.child_part] {
                    attached[j.child_part] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for (p, a) in self.parts.iter_mut().zip(attached) {
            p.attached = a;
        }
    }

    fn mirrored(&self) -> CharacterState {
        let parts = (0..PART_COUNT)
            .map(|i| {
                let src = &self.parts[mirror_part(i)];
                BodyPart {
                    id: i,
                    name: skeleton::PART_NAMES[i],
                    position: src.position.reflect_x(),
                    velocity: src.velocity.reflect_x(),
                    orientation: src.orientation.mirror_orientation(),
                    angular_velocity: src.angular_velocity.reflect_x_axial(),
                    radius: src.radius,
                    mass: src.mass,
                    attached: src.attached,
                }
            })
            .collect();
        let joints = (0..JOINT_COUNT)
            .map(|j| {
                let src = &self.joints[mirror_joint(j)];
                Joint {
                    id: j,
                    name: skeleton::JOINT_NAMES[j],
                    parent_part: mirror_part(src.parent_part),
                    child_part: mirror_part(src.child_part),
                    axis: src.axis.reflect_y_axial(),
                    angle: src.angle,
                    mode: src.mode,
                    torque_magnitude: src.torque_magnitude,
                    angle_limits: src.angle_limits,
                    intact: src.intact,
                    hold_target: src.hold_target,
                }
            })
            .collect();
        let mut out = CharacterState {
            parts,
            joints,
            grips: [self.grips[1], self.grips[0]],
            grip_attachments: self
                .grip_attachments
                .iter()
                .map(|g| GripAttachment {
                    hand: mirror_part(g.hand),
                    target: mirror_part(g.target),
                    hand_anchor: g.hand_anchor.reflect_y(),
                    target_anchor: g.target_anchor.reflect_y(),
                })
                .collect::<Vec<_>>(),
            injury: self.injury,
        };
        out.grip_attachments.sort_by_key(|g| g.hand);
        out
    }
}

/// Append a float with negative zero folded into positive zero.
fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&(v + 0.0).to_le_bytes());
}

/// Joint impulses of the previous frame, used to warm-start the solver.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct JointImpulse {
    pub drive: f64,
    pub limit: f64,
}

/// Ground contact impulses of the previous frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct GroundImpulse {
    pub normal: f64,
    pub tangent: Vec3,
    pub roll: Vec3,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct ImpulseCache {
    pub joints: [[JointImpulse; JOINT_COUNT]; 2],
    pub ground: [[GroundImpulse; PART_COUNT]; 2],
}

impl ImpulseCache {
    fn mirrored(&self) -> ImpulseCache {
        let mut out = ImpulseCache::default();
        for player in 0..2 {
            let src = 1 - player;
            for j in 0..JOINT_COUNT {
                let s = self.joints[src][mirror_joint(j)];
                out.joints[player][j] = JointImpulse {
                    drive: s.drive,
                    limit: s.limit,
                };
            }
            for p in 0..PART_COUNT {
                let s = self.ground[src][mirror_part(p)];
                out.ground[player][p] = GroundImpulse {
                    normal: s.normal,
                    tangent: s.tangent.reflect_x(),
                    roll: s.roll.reflect_x_axial(),
                };
            }
        }
        out
    }

    fn write_bytes(&self, out: &mut Vec<u8>) {
        for player in 0..2 {
            for j in &self.joints[player] {
                for c in [j.drive, j.limit] {
                    put_f64(out, c);
                }
            }
            for g in &self.ground[player] {
                for c in [g.normal]
                    .into_iter()
                    .chain(g.tangent.to_array())
                    .chain(g.roll.to_array())
                {
                    put_f64(out, c);
                }
            }
        }
    }
}

/// Full physical state of both characters at one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub players: [CharacterState; 2],
    pub frame_index: u64,
    pub gravity: Vec3,
    pub dt: f64,
    pub ground_height: f64,
    pub dismemberment_enabled: bool,
    /// Deterministic generator owned by the world (used by built-in policies).
    pub rng: ChaCha8Rng,
    /// Set when a non-finite value was produced; the world no longer steps.
    pub fault: Option<String>,
    pub(crate) character: Arc<CharacterDef>,
    pub(crate) impulses: ImpulseCache,
}

/// Angle of a hinge measured from the relative orientation of its parts.
pub(crate) fn measure_angle(def: &JointDef, parent: &Mat3, child: &Mat3) -> f64 {
    // reference direction of the child expressed in the parent frame
    let r = parent.tmul_vec(child.mul_vec(def.reference));
    r.dot(def.binormal).atan2(r.dot(def.reference))
}

/// Build the rest-pose world with the default character.
pub fn make_world(settings: &WorldSettings, seed: u64) -> Result<WorldState, SimError> {
    make_world_with(settings, seed, skeleton::default_character())
}

/// Build the rest-pose world for a given character definition.
///
/// Player 1 stands at x = -d/2 facing +x, player 2 is its exact mirror
/// image at x = +d/2, so the arena center is the origin.
pub fn make_world_with(
    settings: &WorldSettings,
    seed: u64,
    character: Arc<CharacterDef>,
) -> Result<WorldState, SimError> {
    settings.validate()?;
    let half = settings.engagement_distance / 2.0;
    let groin_x = character.parts[GROIN].center.x;
    let parts = character
        .parts
        .iter()
        .enumerate()
        .map(|(i, def)| BodyPart {
            id: i,
            name: skeleton::PART_NAMES[i],
            position: Vec3::new(def.center.x - groin_x - half, def.center.y, def.center.z),
            velocity: Vec3::ZERO,
            orientation: Mat3::IDENTITY,
            angular_velocity: Vec3::ZERO,
            radius: def.radius,
            mass: def.mass,
            attached: true,
        })
        .collect();
    let joints = character
        .joints
        .iter()
        .enumerate()
        .map(|(j, def)| Joint {
            id: j,
            name: skeleton::JOINT_NAMES[j],
            parent_part: def.parent,
            child_part: def.child,
            axis: def.axis,
            angle: 0.0,
            mode: JointMode::Hold,
            torque_magnitude: def.torque,
            angle_limits: def.limits,
            intact: true,
            hold_target: 0.0,
        })
        .collect();
    let first = CharacterState {
        parts,
        joints,
        grips: [GripMode::Release; 2],
        grip_attachments: Vec::new(),
        injury: 0.0,
    };
    let second = first.mirrored();
    Ok(WorldState {
        players: [first, second],
        frame_index: 0,
        gravity: settings.gravity,
        dt: DT,
        ground_height: 0.0,
        dismemberment_enabled: settings.dismemberment_enabled,
        rng: ChaCha8Rng::seed_from_u64(seed),
        fault: None,
        character,
        impulses: ImpulseCache::default(),
    })
}

/// Reflect the world across the plane x = 0 (the midpoint of the initial
/// groin positions), swapping players and left/right body sides.
pub fn mirror_world(world: &WorldState) -> WorldState {
    let mut out = world.clone();
    out.players = [world.players[1].mirrored(), world.players[0].mirrored()];
    out.gravity = world.gravity.reflect_x();
    out.impulses = world.impulses.mirrored();
    out
}

impl WorldState {
    pub fn character(&self) -> &CharacterDef {
        &self.character
    }

    /// Set the modes for one player's joints and grips. No physics is stepped.
    pub fn set_joint_modes(&mut self, player: usize, action: &Action) -> Result<(), SimError> {
        if player > 1 {
            return Err(SimError::PlayerIndex(player));
        }
        let ch = &mut self.players[player];
        for (joint, &mode) in ch.joints.iter_mut().zip(action.joints.iter()) {
            if !joint.intact {
                continue;
            }
            if mode == JointMode::Hold && joint.mode != JointMode::Hold {
                joint.hold_target = joint
                    .angle
                    .clamp(joint.angle_limits.0, joint.angle_limits.1);
            }
            joint.mode = mode;
        }
        ch.grips = action.grips;
        for (slot, hand) in HANDS.iter().enumerate() {
            if action.grips[slot] == GripMode::Release {
                ch.grip_attachments.retain(|g| g.hand != *hand);
            }
        }
        Ok(())
    }

    /// Validate raw wire values and set modes; the world is unchanged on error.
    pub fn set_joint_modes_raw(&mut self, player: usize, values: &[i64]) -> Result<(), SimError> {
        let action = Action::from_wire(values)?;
        self.set_joint_modes(player, &action)
    }

    /// Kinetic plus gravitational potential energy of one player.
    pub fn mechanical_energy(&self, player: usize) -> f64 {
        self.players[player]
            .parts
            .iter()
            .map(|p| {
                let inertia = 0.4 * p.mass * p.radius * p.radius;
                0.5 * p.mass * p.velocity.norm_sq() + 0.5 * inertia * p.angular_velocity.norm_sq()
                    - p.mass * self.gravity.dot(p.position)
            })
            .sum()
    }

    /// Recompute every joint angle from the current orientations.
    pub(crate) fn refresh_angles(&mut self) {
        let character = Arc::clone(&self.character);
        for ch in &mut self.players {
            for (joint, def) in ch.joints.iter_mut().zip(character.joints.iter()) {
                joint.angle = measure_angle(
                    def,
                    &ch.parts[def.parent].orientation,
                    &ch.parts[def.child].orientation,
                );
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.players.iter().all(|ch| {
            ch.injury.is_finite()
                && ch.parts.iter().all(|p| {
                    p.position.is_finite()
                        && p.velocity.is_finite()
                        && p.angular_velocity.is_finite()
                        && p.orientation.is_finite()
                })
        })
    }

    /// Canonical little-endian serialization of the dynamic state, used for
    /// bitwise trace comparisons.
    pub fn state_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 * PART_COUNT * 19 * 8 + 1024);
        out.extend_from_slice(&self.frame_index.to_le_bytes());
        for ch in &self.players {
            for p in &ch.parts {
                for v in [p.position, p.velocity, p.angular_velocity] {
                    for c in v.to_array() {
                        put_f64(&mut out, c);
                    }
                }
                for c in p.orientation.to_row_major() {
                    put_f64(&mut out, c);
                }
                out.push(p.attached as u8);
            }
            for j in &ch.joints {
                put_f64(&mut out, j.angle);
                put_f64(&mut out, j.hold_target);
                out.push(j.mode.wire());
                out.push(j.intact as u8);
            }
            out.push(ch.grips[0].wire());
            out.push(ch.grips[1].wire());
            out.extend_from_slice(&(ch.grip_attachments.len() as u32).to_le_bytes());
            for g in &ch.grip_attachments {
                out.push(g.hand as u8);
                out.push(g.target as u8);
                for c in g
                    .hand_anchor
                    .to_array()
                    .into_iter()
                    .chain(g.target_anchor.to_array())
                {
                    put_f64(&mut out, c);
                }
            }
            put_f64(&mut out, ch.injury);
        }
        self.impulses.write_bytes(&mut out);
        out.push(self.fault.is_some() as u8);
        out
    }

    /// Largest coordinate-wise difference between two worlds, scaled by the
    /// magnitude of each quantity class (positions, velocities, ...).
    pub fn max_relative_deviation(&self, other: &WorldState) -> f64 {
        fn scale_of(vals: &[f64]) -> f64 {
            vals.iter().fold(1.0f64, |m, v| m.max(v.abs()))
        }
        let mut groups: [Vec<(f64, f64)>; 4] = Default::default();
        for (a, b) in self.players.iter().zip(other.players.iter()) {
            for (pa, pb) in a.parts.iter().zip(b.parts.iter()) {
                for k in 0..3 {
                    groups[0].push((pa.position[k], pb.position[k]));
                    groups[1].push((pa.velocity[k], pb.velocity[k]));
                    groups[2].push((pa.angular_velocity[k], pb.angular_velocity[k]));
                }
                for (x, y) in pa
                    .orientation
                    .to_row_major()
                    .into_iter()
                    .zip(pb.orientation.to_row_major())
                {
                    groups[3].push((x, y));
                }
            }
        }
        groups
            .iter()
            .map(|g| {
                let scale = scale_of(&g.iter().map(|(a, _)| *a).collect::<Vec<_>>());
                g.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
            })
            .fold(0.0, f64::max)
    }
}
