//! One simulation frame.
//!
//! Pipeline: gravity updates velocities; contacts are detected at the
//! current positions (with a small speculative margin); the velocity pass
//! resolves joints, limits, torque-capped joint motors, contacts and grips;
//! a pseudo-velocity pass removes positional drift; positions and
//! orientations are integrated with the corrected velocities. Injury,
//! dismemberment and grips are evaluated last.

use std::sync::Arc;

use crate::math::{Mat3, Vec3};

use super::injury::compute_injury;
use super::skeleton::{self, joint_class, part_class, CharacterDef, HANDS, PART_COUNT};
use super::solver::{
    point_mass_matrix, AxisDrive, BodyMass, BodyVel, ContactRow, GripRow, JointRow, Problem,
};
use super::world::{
    BodyPart, CharacterState, GripAttachment, GroundImpulse, JointImpulse, WorldState,
};
use super::{GripMode, JointMode};

/// Gap below which separated spheres already get a (speculative) contact row.
const CONTACT_MARGIN: f64 = 2.0;
const GROUND_FRICTION: f64 = 1.0;
const PLAYER_FRICTION: f64 = 0.5;
/// Lever arm of ground rolling resistance (feet rest on a flat sole).
const FOOT_ROLL_ARM: f64 = 12.0;
const ROLL_ARM: f64 = 1.0;
const LIMIT_MARGIN: f64 = 1.0;
/// Joint speed (rad/s) that Extend and Contract drive towards.
const MOTOR_SPEED: f64 = 8.0;

const KEY_CONTACT: u16 = 0;
const KEY_OWN_GRIP: u16 = 32;
const KEY_OTHER_GRIP: u16 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContactKind {
    PlayerPlayer,
    PlayerGround,
}

/// Which side of a player-player contact took the hit.
///
/// The side approaching faster along the contact normal is the striker;
/// equal approach speeds count as a hit on both.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Struck {
    A,
    B,
    Both,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContactEvent {
    pub kind: ContactKind,
    pub player_a: usize,
    pub part_a: usize,
    pub player_b: Option<usize>,
    pub part_b: Option<usize>,
    pub impulse_magnitude: f64,
    pub point: Vec3,
    pub struck: Struck,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameEvents {
    pub contacts: Vec<ContactEvent>,
    pub injury_deltas: [f64; 2],
    /// (player, joint id) pairs severed this frame.
    pub dismemberments: Vec<(usize, usize)>,
    /// (player, part id) pairs resting on the ground this frame.
    pub ground_touches: Vec<(usize, usize)>,
}

impl FrameEvents {
    pub fn player_contacts(&self) -> impl Iterator<Item = &ContactEvent> {
        self.contacts
            .iter()
            .filter(|c| c.kind == ContactKind::PlayerPlayer)
    }
}

/// Semi-implicit Euler step of one unconstrained part.
pub fn step_part_free(part: &mut BodyPart, gravity: Vec3, dt: f64) {
    part.velocity = part.velocity + gravity * dt;
    integrate(part, part.velocity, part.angular_velocity, dt);
}

fn integrate(part: &mut BodyPart, v: Vec3, w: Vec3, dt: f64) {
    part.position = part.position + v * dt;
    let speed = w.norm();
    if speed > 0.0 {
        let rot = Mat3::from_axis_angle(w / speed, speed * dt);
        part.orientation = (rot * part.orientation).orthonormalized();
    }
}

/// Advance the world by one frame.
///
/// A world whose state became non-finite is restored to the last good
/// frame, flagged with a fault and never stepped again.
pub fn step_frame(world: &mut WorldState) -> FrameEvents {
    if world.fault.is_some() {
        return FrameEvents::default();
    }
    let snapshot = world.clone();
    let events = advance(world);
    if !world.is_finite() {
        let frame = snapshot.frame_index;
        *world = snapshot;
        world.fault = Some(format!(
            "non-finite state produced while stepping frame {frame}"
        ));
        log::error!("simulation fault at frame {frame}");
        return FrameEvents::default();
    }
    events
}

fn body(player: usize, part: usize) -> usize {
    player * PART_COUNT + part
}

fn masses(world: &WorldState) -> Vec<BodyMass> {
    world
        .players
        .iter()
        .flat_map(|ch| ch.parts.iter())
        .map(|p| BodyMass {
            inv_m: p.inv_mass(),
            inv_i: p.inv_inertia(),
        })
        .collect()
}

fn joint_rows(world: &WorldState, masses: &[BodyMass], player: usize) -> Vec<Option<JointRow>> {
    let ch = &world.players[player];
    ch.joints
        .iter()
        .zip(world.character.joints.iter())
        .map(|(joint, def)| {
            if !joint.intact {
                return None;
            }
            let parent = &ch.parts[def.parent];
            let child = &ch.parts[def.child];
            let (mp, mc) = (
                masses[body(player, def.parent)],
                masses[body(player, def.child)],
            );
            let r_parent = parent.orientation * def.parent_anchor;
            let r_child = child.orientation * def.child_anchor;
            let axis = parent.orientation * def.axis;
            let child_axis = child.orientation * def.axis;
            let ortho = [
                parent.orientation * def.reference,
                parent.orientation * def.binormal,
            ];
            let e = axis.cross(child_axis);
            let angular_inv = mp.inv_i + mc.inv_i;
            let dt = world.dt;
            let drive = match joint.mode {
                JointMode::Hold => {
                    let k = def.hold_stiffness;
                    let c = def.hold_damping;
                    let gamma = 1.0 / (dt * (c + dt * k));
                    let bias = (joint.angle - joint.hold_target) * k / (c + dt * k);
                    AxisDrive::Hold {
                        gamma,
                        bias,
                        soft_mass: 1.0 / (angular_inv + gamma),
                        max: joint.torque_magnitude * dt,
                    }
                }
                JointMode::Relax => AxisDrive::Motor {
                    speed: 0.0,
                    max: def.relax_friction * dt,
                },
                JointMode::ExtendRaise => AxisDrive::Motor {
                    speed: MOTOR_SPEED,
                    max: joint.torque_magnitude * dt,
                },
                JointMode::ContractLower => AxisDrive::Motor {
                    speed: -MOTOR_SPEED,
                    max: joint.torque_magnitude * dt,
                },
            };
            let warm = world.impulses.joints[player][joint.id];
            let mut row = JointRow {
                key: u16::from(joint_class(joint.id)),
                parent: def.parent,
                child: def.child,
                r_parent,
                r_child,
                point_inv: point_mass_matrix(&mp, r_parent, &mc, r_child)
                    .inverse()
                    .unwrap_or(Mat3::ZERO),
                point_error: (child.position + r_child) - (parent.position + r_parent),
                axis,
                ortho,
                ortho_error: [e.dot(ortho[0]), e.dot(ortho[1])],
                angular_mass: 1.0 / angular_inv,
                angle: joint.angle,
                limits: joint.angle_limits,
                limit_margin: LIMIT_MARGIN.min(0.5 * (joint.angle_limits.1 - joint.angle_limits.0)),
                drive,
                point_acc: Vec3::ZERO,
                ortho_acc: [0.0, 0.0],
                drive_acc: warm.drive,
                limit_acc: warm.limit,
                pseudo_limit_acc: 0.0,
            };
            row.clamp_warm();
            Some(row)
        })
        .collect()
}

fn ground_rows(world: &WorldState, masses: &[BodyMass]) -> Vec<ContactRow> {
    let mut rows = Vec::new();
    for (player, ch) in world.players.iter().enumerate() {
        for p in &ch.parts {
            let depth = world.ground_height + p.radius - p.position.z;
            if depth <= -CONTACT_MARGIN {
                continue;
            }
            let b = body(player, p.id);
            let m = masses[b];
            let roll_arm = if matches!(p.id, skeleton::R_FOOT | skeleton::L_FOOT) {
                FOOT_ROLL_ARM
            } else {
                ROLL_ARM
            };
            let warm = world.impulses.ground[player][p.id];
            let mut row = ContactRow {
                a: None,
                b,
                key_a: 0,
                key_b: 0,
                normal: Vec3::Z,
                ra: Vec3::ZERO,
                rb: Vec3::new(0.0, 0.0, -p.radius),
                depth,
                normal_mass: 1.0 / m.inv_m,
                tangent_mass: 1.0 / (m.inv_m + m.inv_i * p.radius * p.radius),
                friction: GROUND_FRICTION,
                roll_arm,
                scale: 1.0,
                normal_acc: warm.normal,
                tangent_acc: warm.tangent,
                roll_acc: warm.roll,
                pseudo_acc: 0.0,
                pseudo_tangent: Vec3::ZERO,
                pseudo_roll: Vec3::ZERO,
            };
            row.clamp_warm();
            rows.push(row);
        }
    }
    rows
}

fn player_contact_rows(world: &WorldState, masses: &[BodyMass]) -> Vec<ContactRow> {
    let [p0, p1] = &world.players;
    let mut rows = Vec::new();
    for a in &p0.parts {
        for b in &p1.parts {
            let delta = b.position - a.position;
            let reach = a.radius + b.radius + CONTACT_MARGIN;
            let dist_sq = delta.norm_sq();
            if dist_sq >= reach * reach {
                continue;
            }
            let dist = dist_sq.sqrt();
            let normal = if dist > 0.0 { delta / dist } else { Vec3::Z };
            let depth = a.radius + b.radius - dist;
            let ra = normal * (a.radius - 0.5 * depth);
            let rb = -(normal * (b.radius - 0.5 * depth));
            let (ba, bb) = (body(0, a.id), body(1, b.id));
            let (ma, mb) = (masses[ba], masses[bb]);
            rows.push(ContactRow {
                a: Some(ba),
                b: bb,
                key_a: KEY_CONTACT + u16::from(part_class(b.id)),
                key_b: KEY_CONTACT + u16::from(part_class(a.id)),
                normal,
                ra,
                rb,
                depth,
                normal_mass: 1.0 / (ma.inv_m + mb.inv_m),
                tangent_mass: 1.0
                    / ((ma.inv_m + ma.inv_i * ra.norm_sq()) + (mb.inv_m + mb.inv_i * rb.norm_sq())),
                friction: PLAYER_FRICTION,
                roll_arm: 0.0,
                scale: 1.0,
                normal_acc: 0.0,
                tangent_acc: Vec3::ZERO,
                roll_acc: Vec3::ZERO,
                pseudo_acc: 0.0,
                pseudo_tangent: Vec3::ZERO,
                pseudo_roll: Vec3::ZERO,
            });
        }
    }
    rows
}

fn grip_rows(world: &WorldState, masses: &[BodyMass]) -> Vec<GripRow> {
    let mut rows = Vec::new();
    for (player, ch) in world.players.iter().enumerate() {
        let other = &world.players[1 - player];
        for g in &ch.grip_attachments {
            let hand = &ch.parts[g.hand];
            let target = &other.parts[g.target];
            let ra = hand.orientation * g.hand_anchor;
            let rb = target.orientation * g.target_anchor;
            let (a, b) = (body(player, g.hand), body(1 - player, g.target));
            rows.push(GripRow {
                a,
                b,
                key_a: KEY_OWN_GRIP + u16::from(part_class(g.target)),
                key_b: KEY_OTHER_GRIP + u16::from(part_class(g.hand)),
                ra,
                rb,
                inv_mass: point_mass_matrix(&masses[a], ra, &masses[b], rb)
                    .inverse()
                    .unwrap_or(Mat3::ZERO),
                error: (target.position + rb) - (hand.position + ra),
                scale: 1.0,
            });
        }
    }
    rows
}

fn advance(world: &mut WorldState) -> FrameEvents {
    let dt = world.dt;
    let masses = masses(world);
    let mut vel: Vec<BodyVel> = world
        .players
        .iter()
        .flat_map(|ch| ch.parts.iter())
        .map(|p| BodyVel {
            v: p.velocity + world.gravity * dt,
            w: p.angular_velocity,
        })
        .collect();
    let pre = vel.clone();

    let mut problem = Problem {
        joints: [joint_rows(world, &masses, 0), joint_rows(world, &masses, 1)],
        ground: ground_rows(world, &masses),
        contacts: player_contact_rows(world, &masses),
        grips: grip_rows(world, &masses),
        masses,
    };
    // Jacobi relaxation for bodies shared by several player-player rows
    let mut count = vec![0u32; vel.len()];
    for c in &problem.contacts {
        count[c.a.expect("player contact")] += 1;
        count[c.b] += 1;
    }
    for g in &problem.grips {
        count[g.a] += 1;
        count[g.b] += 1;
    }
    for c in &mut problem.contacts {
        c.scale = 1.0 / f64::from(count[c.a.expect("player contact")].max(count[c.b]));
    }
    for g in &mut problem.grips {
        g.scale = 1.0 / f64::from(count[g.a].max(count[g.b]));
    }

    problem.solve_velocities(&mut vel, dt);
    store_impulses(world, &problem);
    let mut pseudo = vec![BodyVel::default(); vel.len()];
    problem.solve_positions(&mut pseudo, dt);

    for (player, ch) in world.players.iter_mut().enumerate() {
        for p in &mut ch.parts {
            let b = body(player, p.id);
            p.velocity = vel[b].v;
            p.angular_velocity = vel[b].w;
            integrate(p, vel[b].v + pseudo[b].v, vel[b].w + pseudo[b].w, dt);
        }
    }

    let mut events = FrameEvents::default();
    for row in &problem.ground {
        if row.normal_acc > 0.0 || row.depth >= 0.0 {
            let (player, part) = (row.b / PART_COUNT, row.b % PART_COUNT);
            events.ground_touches.push((player, part));
            events.contacts.push(ContactEvent {
                kind: ContactKind::PlayerGround,
                player_a: player,
                part_a: part,
                player_b: None,
                part_b: None,
                impulse_magnitude: row.normal_acc,
                point: Vec3::new(
                    world.players[player].parts[part].position.x,
                    world.players[player].parts[part].position.y,
                    world.ground_height,
                ),
                struck: Struck::A,
            });
        }
    }
    for row in &problem.contacts {
        if !(row.normal_acc > 0.0 || row.depth > 0.0) {
            continue;
        }
        let a = row.a.expect("player contact");
        let approach_a = pre[a].v.dot(row.normal);
        let approach_b = -pre[row.b].v.dot(row.normal);
        let struck = if approach_a > approach_b {
            Struck::B
        } else if approach_b > approach_a {
            Struck::A
        } else {
            Struck::Both
        };
        let pa = &world.players[0].parts[a % PART_COUNT];
        events.contacts.push(ContactEvent {
            kind: ContactKind::PlayerPlayer,
            player_a: 0,
            part_a: a % PART_COUNT,
            player_b: Some(1),
            part_b: Some(row.b % PART_COUNT),
            impulse_magnitude: row.normal_acc,
            point: pa.position + row.ra,
            struck,
        });
    }

    events.injury_deltas = compute_injury(&events.contacts);
    for (ch, d) in world.players.iter_mut().zip(events.injury_deltas) {
        ch.injury += d;
    }

    if world.dismemberment_enabled {
        events.dismemberments = dismember(world, &events.contacts);
    }
    update_grips(world, &events);
    for ch in &mut world.players {
        ch.refresh_attachment();
    }
    world.refresh_angles();
    world.frame_index += 1;
    events
}

fn store_impulses(world: &mut WorldState, problem: &Problem) {
    let cache = &mut world.impulses;
    for player in 0..2 {
        for (j, row) in problem.joints[player].iter().enumerate() {
            cache.joints[player][j] = match row {
                Some(r) => JointImpulse {
                    drive: r.drive_acc,
                    limit: r.limit_acc,
                },
                None => JointImpulse::default(),
            };
        }
        cache.ground[player] = Default::default();
    }
    for row in &problem.ground {
        cache.ground[row.b / PART_COUNT][row.b % PART_COUNT] = GroundImpulse {
            normal: row.normal_acc,
            tangent: row.tangent_acc,
            roll: row.roll_acc,
        };
    }
}

/// Sever every intact joint adjacent to a part whose largest contact
/// impulse this frame exceeds the joint's threshold.
fn dismember(world: &mut WorldState, contacts: &[ContactEvent]) -> Vec<(usize, usize)> {
    let mut peak = [[0.0f64; PART_COUNT]; 2];
    for c in contacts {
        if c.kind != ContactKind::PlayerPlayer {
            continue;
        }
        let m = &mut peak[c.player_a][c.part_a];
        *m = m.max(c.impulse_magnitude);
        if let (Some(pb), Some(partb)) = (c.player_b, c.part_b) {
            let m = &mut peak[pb][partb];
            *m = m.max(c.impulse_magnitude);
        }
    }
    let character: Arc<CharacterDef> = Arc::clone(&world.character);
    let mut severed = Vec::new();
    for (player, ch) in world.players.iter_mut().enumerate() {
        for (joint, def) in ch.joints.iter_mut().zip(character.joints.iter()) {
            if !joint.intact {
                continue;
            }
            let hit = peak[player][def.parent].max(peak[player][def.child]);
            if hit > def.dismember_threshold {
                joint.intact = false;
                severed.push((player, joint.id));
            }
        }
    }
    for &(player, joint) in &severed {
        // a hand loses its hold when its wrist breaks
        let child = character.joints[joint].child;
        if HANDS.contains(&child) {
            world.players[player]
                .grip_attachments
                .retain(|g| g.hand != child);
        }
    }
    severed
}

/// Attach gripping hands to the opponent part they touch hardest.
fn update_grips(world: &mut WorldState, events: &FrameEvents) {
    for player in 0..2 {
        for (slot, &hand) in HANDS.iter().enumerate() {
            let ch: &CharacterState = &world.players[player];
            if ch.grips[slot] != GripMode::Grip
                || ch.grip_attachments.iter().any(|g| g.hand == hand)
            {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for c in events.player_contacts() {
                let target = if c.player_a == player && c.part_a == hand {
                    c.part_b
                } else if c.player_b == Some(player) && c.part_b == Some(hand) {
                    Some(c.part_a)
                } else {
                    None
                };
                let Some(target) = target else { continue };
                let better = match best {
                    None => true,
                    Some((t, imp)) => {
                        c.impulse_magnitude > imp
                            || (c.impulse_magnitude == imp
                                && (part_class(target), target) < (part_class(t), t))
                    }
                };
                if better {
                    best = Some((target, c.impulse_magnitude));
                }
            }
            let Some((target, _)) = best else { continue };
            let h = &world.players[player].parts[hand];
            let t = &world.players[1 - player].parts[target];
            let delta = t.position - h.position;
            let dist = delta.norm();
            let normal = if dist > 0.0 { delta / dist } else { Vec3::Z };
            let depth = h.radius + t.radius - dist;
            let point = h.position + normal * (h.radius - 0.5 * depth);
            let attachment = GripAttachment {
                hand,
                target,
                hand_anchor: h.orientation.tmul_vec(point - h.position),
                target_anchor: t.orientation.tmul_vec(point - t.position),
            };
            world.players[player].grip_attachments.push(attachment);
        }
        world.players[player]
            .grip_attachments
            .sort_by_key(|g| g.hand);
    }
}
