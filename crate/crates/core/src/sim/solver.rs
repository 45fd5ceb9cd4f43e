//! Fixed-iteration impulse solver.
//!
//! Constraints are processed in batches. Inside a batch every constraint
//! reads the velocities from the start of the batch and writes its change
//! into a per-body accumulator; the accumulated changes are summed in a
//! canonical order keyed by symmetry class, pairing left/right counterparts
//! with a single commutative addition. Because of that the result does not
//! depend on the order in which constraints of a batch are visited, and a
//! mirrored world evolves as the exact mirror image of the original.
//!
//! Per iteration the order is: joint batches A, B, C, ground contacts,
//! player-player contacts and grips. Velocity errors are removed first; then
//! a separate pseudo-velocity pass removes position drift without feeding
//! energy back into the real velocities.

use crate::math::{Mat3, Vec3};

use super::skeleton::PART_COUNT;

pub(crate) const ITERATIONS: usize = 16;
/// Fraction of a position error removed per frame by the projection pass.
const CORRECTION_RATE: f64 = 0.5;
/// Penetration tolerated before the projection pass acts.
const CONTACT_SLOP: f64 = 0.25;
/// Joint drift below this distance is left alone.
const JOINT_SLOP: f64 = 1e-7;
const ANGLE_SLOP: f64 = 1e-9;

/// Joint ids per batch; within a batch no body is touched by more than a
/// left/right pair of constraints.
pub(crate) const JOINT_BATCHES: [&[usize]; 3] = [
    &[0, 2, 6, 7, 10, 11, 14, 15, 18, 19],
    &[1, 3, 8, 9, 16, 17],
    &[4, 5, 12, 13],
];

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct BodyVel {
    pub v: Vec3,
    pub w: Vec3,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct BodyMass {
    pub inv_m: f64,
    pub inv_i: f64,
}

/// Change of one body's velocity contributed by one constraint.
#[derive(Clone, Copy, Debug)]
struct Contribution {
    key: u16,
    dv: Vec3,
    dw: Vec3,
}

/// Per-body change accumulator with a canonical summation order.
#[derive(Default)]
pub(crate) struct Accumulator {
    slots: Vec<Vec<Contribution>>,
}

impl Accumulator {
    pub fn new(bodies: usize) -> Self {
        Accumulator {
            slots: (0..bodies).map(|_| Vec::new()).collect(),
        }
    }

    pub fn push(&mut self, body: usize, key: u16, dv: Vec3, dw: Vec3) {
        self.slots[body].push(Contribution { key, dv, dw });
    }

    /// Add the accumulated changes to `vel` and clear the accumulator.
    ///
    /// At most two contributions may share a key; they are added to each
    /// other first (a commutative operation), then groups are folded in
    /// ascending key order.
    pub fn apply(&mut self, vel: &mut [BodyVel]) {
        for (body, slot) in self.slots.iter_mut().enumerate() {
            if slot.is_empty() {
                continue;
            }
            slot.sort_by_key(|c| c.key);
            let mut total: Option<(Vec3, Vec3)> = None;
            let mut i = 0;
            while i < slot.len() {
                let (dv, dw) = if i + 1 < slot.len() && slot[i + 1].key == slot[i].key {
                    debug_assert!(i + 2 >= slot.len() || slot[i + 2].key != slot[i].key);
                    let g = (slot[i].dv + slot[i + 1].dv, slot[i].dw + slot[i + 1].dw);
                    i += 2;
                    g
                } else {
                    let g = (slot[i].dv, slot[i].dw);
                    i += 1;
                    g
                };
                total = Some(match total {
                    None => (dv, dw),
                    Some((tv, tw)) => (tv + dv, tw + dw),
                });
            }
            if let Some((dv, dw)) = total {
                vel[body].v += dv;
                vel[body].w += dw;
            }
            slot.clear();
        }
    }
}

/// Effective-mass matrix of a point-to-point constraint between two spheres.
pub(crate) fn point_mass_matrix(a: &BodyMass, ra: Vec3, b: &BodyMass, rb: Vec3) -> Mat3 {
    let diag = a.inv_m + b.inv_m + a.inv_i * ra.norm_sq() + b.inv_i * rb.norm_sq();
    let mut k = Mat3::ZERO;
    for i in 0..3 {
        for j in 0..3 {
            let d = if i == j { diag } else { 0.0 };
            k.m[i][j] = d - a.inv_i * ra[i] * ra[j] - b.inv_i * rb[i] * rb[j];
        }
    }
    k
}

/// Velocities of the two bodies a constraint acts on, local to one solve.
#[derive(Clone, Copy)]
struct Pair {
    a: BodyVel,
    b: BodyVel,
}

impl Pair {
    fn apply_linear(&mut self, ma: &BodyMass, ra: Vec3, mb: &BodyMass, rb: Vec3, p: Vec3) {
        // impulse +p on b, -p on a
        self.a.v -= p * ma.inv_m;
        self.a.w -= ra.cross(p) * ma.inv_i;
        self.b.v += p * mb.inv_m;
        self.b.w += rb.cross(p) * mb.inv_i;
    }

    fn apply_angular(&mut self, ma: &BodyMass, mb: &BodyMass, axis: Vec3, lambda: f64) {
        self.a.w -= axis * (lambda * ma.inv_i);
        self.b.w += axis * (lambda * mb.inv_i);
    }

    fn rel_point_velocity(&self, ra: Vec3, rb: Vec3) -> Vec3 {
        (self.b.v + self.b.w.cross(rb)) - (self.a.v + self.a.w.cross(ra))
    }

    fn rel_angular(&self, axis: Vec3) -> f64 {
        (self.b.w - self.a.w).dot(axis)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum AxisDrive {
    /// Implicit spring-damper towards the locked angle, impulse bounded by `max`.
    Hold {
        gamma: f64,
        bias: f64,
        soft_mass: f64,
        max: f64,
    },
    /// Drive the relative angular speed towards `speed` with impulse bounded
    /// by `max`; `speed = 0` is plain joint friction.
    Motor { speed: f64, max: f64 },
}

#[derive(Clone, Debug)]
pub(crate) struct JointRow {
    pub key: u16,
    pub parent: usize,
    pub child: usize,
    pub r_parent: Vec3,
    pub r_child: Vec3,
    pub point_inv: Mat3,
    pub point_error: Vec3,
    pub axis: Vec3,
    pub ortho: [Vec3; 2],
    pub ortho_error: [f64; 2],
    pub angular_mass: f64,
    pub angle: f64,
    pub limits: (f64, f64),
    pub limit_margin: f64,
    pub drive: AxisDrive,
    pub point_acc: Vec3,
    pub ortho_acc: [f64; 2],
    pub drive_acc: f64,
    pub limit_acc: f64,
    pub pseudo_limit_acc: f64,
}

impl JointRow {
    fn solve_velocity(&mut self, pair: &mut Pair, ma: &BodyMass, mb: &BodyMass, dt: f64) {
        let cdot = pair.rel_angular(self.axis);
        let (lambda, max) = match self.drive {
            AxisDrive::Hold {
                gamma,
                bias,
                soft_mass,
                max,
            } => (-soft_mass * (cdot + bias + gamma * self.drive_acc), max),
            AxisDrive::Motor { speed, max } => (-(cdot - speed) * self.angular_mass, max),
        };
        let new_acc = (self.drive_acc + lambda).clamp(-max, max);
        let applied = new_acc - self.drive_acc;
        self.drive_acc = new_acc;
        pair.apply_angular(ma, mb, self.axis, applied);

        // limits, speculative: allow closing the remaining gap within one frame
        let (lo, hi) = self.limits;
        if self.angle > hi - self.limit_margin {
            let allowed = ((hi - self.angle) / dt).max(0.0);
            let cdot = pair.rel_angular(self.axis);
            let lambda = -(cdot - allowed) * self.angular_mass;
            let new_acc = (self.limit_acc + lambda).min(0.0);
            let applied = new_acc - self.limit_acc;
            self.limit_acc = new_acc;
            pair.apply_angular(ma, mb, self.axis, applied);
        } else if self.angle < lo + self.limit_margin {
            let allowed = ((lo - self.angle) / dt).min(0.0);
            let cdot = pair.rel_angular(self.axis);
            let lambda = -(cdot - allowed) * self.angular_mass;
            let new_acc = (self.limit_acc + lambda).max(0.0);
            let applied = new_acc - self.limit_acc;
            self.limit_acc = new_acc;
            pair.apply_angular(ma, mb, self.axis, applied);
        }
        for k in 0..2 {
            let cdot = pair.rel_angular(self.ortho[k]);
            let lambda = -cdot * self.angular_mass;
            self.ortho_acc[k] += lambda;
            pair.apply_angular(ma, mb, self.ortho[k], lambda);
        }
        let cdot = pair.rel_point_velocity(self.r_parent, self.r_child);
        let p = -(self.point_inv * cdot);
        self.point_acc += p;
        pair.apply_linear(ma, self.r_parent, mb, self.r_child, p);
    }

    /// Clamp impulses carried over from the previous frame to the bounds of
    /// this frame's rows.
    pub fn clamp_warm(&mut self) {
        let (lo, hi) = self.limits;
        self.limit_acc = if self.angle > hi - self.limit_margin {
            self.limit_acc.min(0.0)
        } else if self.angle < lo + self.limit_margin {
            self.limit_acc.max(0.0)
        } else {
            0.0
        };
        self.drive_acc = match self.drive {
            AxisDrive::Hold { max, .. } | AxisDrive::Motor { max, .. } => {
                self.drive_acc.clamp(-max, max)
            }
        };
    }

    /// Angular impulse on the child (the parent receives the opposite).
    fn angular_impulse(&self) -> Vec3 {
        self.axis * (self.drive_acc + self.limit_acc)
            + self.ortho[0] * self.ortho_acc[0]
            + self.ortho[1] * self.ortho_acc[1]
    }

    fn solve_position(&mut self, pair: &mut Pair, ma: &BodyMass, mb: &BodyMass, dt: f64) {
        let (lo, hi) = self.limits;
        if self.angle > hi + ANGLE_SLOP {
            let cdot = pair.rel_angular(self.axis);
            let lambda = -(cdot + CORRECTION_RATE * (self.angle - hi) / dt) * self.angular_mass;
            let new_acc = (self.pseudo_limit_acc + lambda).min(0.0);
            let applied = new_acc - self.pseudo_limit_acc;
            self.pseudo_limit_acc = new_acc;
            pair.apply_angular(ma, mb, self.axis, applied);
        } else if self.angle < lo - ANGLE_SLOP {
            let cdot = pair.rel_angular(self.axis);
            let lambda = -(cdot + CORRECTION_RATE * (self.angle - lo) / dt) * self.angular_mass;
            let new_acc = (self.pseudo_limit_acc + lambda).max(0.0);
            let applied = new_acc - self.pseudo_limit_acc;
            self.pseudo_limit_acc = new_acc;
            pair.apply_angular(ma, mb, self.axis, applied);
        }
        for k in 0..2 {
            let err = self.ortho_error[k];
            let target = if err.abs() > ANGLE_SLOP {
                CORRECTION_RATE * err / dt
            } else {
                0.0
            };
            let cdot = pair.rel_angular(self.ortho[k]);
            pair.apply_angular(ma, mb, self.ortho[k], -(cdot + target) * self.angular_mass);
        }
        let err = if self.point_error.norm_sq() > JOINT_SLOP * JOINT_SLOP {
            self.point_error * (CORRECTION_RATE / dt)
        } else {
            Vec3::ZERO
        };
        let cdot = pair.rel_point_velocity(self.r_parent, self.r_child);
        let p = -(self.point_inv * (cdot + err));
        pair.apply_linear(ma, self.r_parent, mb, self.r_child, p);
    }
}

/// Contact between a sphere and the ground (`a` = None) or two spheres.
#[derive(Clone, Debug)]
pub(crate) struct ContactRow {
    pub a: Option<usize>,
    pub b: usize,
    /// Key under which the change to `a` is accumulated.
    pub key_a: u16,
    /// Key under which the change to `b` is accumulated.
    pub key_b: u16,
    /// Normal pointing from `a` to `b`.
    pub normal: Vec3,
    pub ra: Vec3,
    pub rb: Vec3,
    pub depth: f64,
    pub normal_mass: f64,
    pub tangent_mass: f64,
    pub friction: f64,
    /// Lever arm of rolling resistance on `b` (0 disables it).
    pub roll_arm: f64,
    pub scale: f64,
    pub normal_acc: f64,
    pub tangent_acc: Vec3,
    pub roll_acc: Vec3,
    pub pseudo_acc: f64,
    pub pseudo_tangent: Vec3,
    pub pseudo_roll: Vec3,
}

const GROUND: BodyMass = BodyMass {
    inv_m: 0.0,
    inv_i: 0.0,
};

fn clamp_norm(v: Vec3, limit: f64) -> Vec3 {
    let mag = v.norm();
    if mag > limit {
        if mag > 0.0 {
            v * (limit / mag)
        } else {
            Vec3::ZERO
        }
    } else {
        v
    }
}

impl ContactRow {
    /// Coulomb friction and rolling resistance bounded by `normal`.
    fn solve_friction(
        &self,
        pair: &mut Pair,
        ma: &BodyMass,
        mb: &BodyMass,
        normal: f64,
        tangent: &mut Vec3,
        roll: &mut Vec3,
    ) {
        let n = self.normal;
        let rel = pair.rel_point_velocity(self.ra, self.rb);
        let vt = rel - n * rel.dot(n);
        let new_t = clamp_norm(
            *tangent + vt * (-self.tangent_mass * self.scale),
            self.friction * normal,
        );
        let applied_t = new_t - *tangent;
        *tangent = new_t;
        pair.apply_linear(ma, self.ra, mb, self.rb, applied_t);

        if self.roll_arm > 0.0 && self.a.is_none() {
            let w = pair.b.w;
            let wh = w - n * w.dot(n);
            let new_r = clamp_norm(
                *roll + wh * (-self.scale / mb.inv_i),
                self.friction * self.roll_arm * normal,
            );
            let applied_r = new_r - *roll;
            *roll = new_r;
            pair.b.w += applied_r * mb.inv_i;
        }
    }

    fn solve_velocity(&mut self, pair: &mut Pair, ma: &BodyMass, mb: &BodyMass, dt: f64) {
        let n = self.normal;
        let gap = (-self.depth).max(0.0);
        let vn = pair.rel_point_velocity(self.ra, self.rb).dot(n);
        let lambda = -(vn + gap / dt) * self.normal_mass * self.scale;
        let new_acc = (self.normal_acc + lambda).max(0.0);
        let applied = new_acc - self.normal_acc;
        self.normal_acc = new_acc;
        pair.apply_linear(ma, self.ra, mb, self.rb, n * applied);

        let (mut t, mut r) = (self.tangent_acc, self.roll_acc);
        self.solve_friction(pair, ma, mb, self.normal_acc, &mut t, &mut r);
        self.tangent_acc = t;
        self.roll_acc = r;
    }

    /// Clamp impulses carried over from the previous frame.
    pub fn clamp_warm(&mut self) {
        self.normal_acc = self.normal_acc.max(0.0);
        self.tangent_acc = clamp_norm(self.tangent_acc, self.friction * self.normal_acc);
        self.roll_acc = clamp_norm(
            self.roll_acc,
            self.friction * self.roll_arm * self.normal_acc,
        );
    }

    fn solve_position(&mut self, pair: &mut Pair, ma: &BodyMass, mb: &BodyMass, dt: f64) {
        let n = self.normal;
        let target = if self.depth > CONTACT_SLOP {
            CORRECTION_RATE * (self.depth - CONTACT_SLOP) / dt
        } else {
            0.0
        };
        let vn = pair.rel_point_velocity(self.ra, self.rb).dot(n);
        let lambda = (target - vn) * self.normal_mass * self.scale;
        let new_acc = (self.pseudo_acc + lambda).max(0.0);
        let applied = new_acc - self.pseudo_acc;
        self.pseudo_acc = new_acc;
        pair.apply_linear(ma, self.ra, mb, self.rb, n * applied);

        // corrections must not slide or roll a supported part either
        let (mut t, mut r) = (self.pseudo_tangent, self.pseudo_roll);
        self.solve_friction(
            pair,
            ma,
            mb,
            self.normal_acc + self.pseudo_acc,
            &mut t,
            &mut r,
        );
        self.pseudo_tangent = t;
        self.pseudo_roll = r;
    }
}

/// Hand-to-opponent point attachment.
#[derive(Clone, Debug)]
pub(crate) struct GripRow {
    pub a: usize,
    pub b: usize,
    pub key_a: u16,
    pub key_b: u16,
    pub ra: Vec3,
    pub rb: Vec3,
    pub inv_mass: Mat3,
    pub error: Vec3,
    pub scale: f64,
}

impl GripRow {
    fn solve(&self, pair: &mut Pair, ma: &BodyMass, mb: &BodyMass, bias: Vec3) {
        let cdot = pair.rel_point_velocity(self.ra, self.rb);
        let p = -(self.inv_mass * (cdot + bias)) * self.scale;
        pair.apply_linear(ma, self.ra, mb, self.rb, p);
    }
}

/// All constraints of one frame, bodies indexed `player * 21 + part`.
pub(crate) struct Problem {
    pub masses: Vec<BodyMass>,
    /// Joint rows per player, indexed by joint id (None when severed).
    pub joints: [Vec<Option<JointRow>>; 2],
    pub ground: Vec<ContactRow>,
    pub contacts: Vec<ContactRow>,
    pub grips: Vec<GripRow>,
}

#[derive(Clone, Copy, PartialEq)]
enum Pass {
    Velocity,
    Position,
}

impl Problem {
    fn mass(&self, body: Option<usize>) -> BodyMass {
        body.map(|b| self.masses[b]).unwrap_or(GROUND)
    }

    fn run(&mut self, vel: &mut [BodyVel], pass: Pass, dt: f64) {
        let mut acc = Accumulator::new(vel.len());
        for _ in 0..ITERATIONS {
            for batch in JOINT_BATCHES {
                for player in 0..2 {
                    let base = player * PART_COUNT;
                    for &j in batch {
                        let Some(row) = self.joints[player][j].as_mut() else {
                            continue;
                        };
                        let (pa, pb) = (base + row.parent, base + row.child);
                        let (ma, mb) = (self.masses[pa], self.masses[pb]);
                        let mut pair = Pair {
                            a: vel[pa],
                            b: vel[pb],
                        };
                        match pass {
                            Pass::Velocity => row.solve_velocity(&mut pair, &ma, &mb, dt),
                            Pass::Position => row.solve_position(&mut pair, &ma, &mb, dt),
                        }
                        acc.push(pa, row.key, pair.a.v - vel[pa].v, pair.a.w - vel[pa].w);
                        acc.push(pb, row.key, pair.b.v - vel[pb].v, pair.b.w - vel[pb].w);
                    }
                }
                acc.apply(vel);
            }

            // ground contacts touch one body each
            for row in &mut self.ground {
                let mb = self.masses[row.b];
                let mut pair = Pair {
                    a: BodyVel::default(),
                    b: vel[row.b],
                };
                match pass {
                    Pass::Velocity => row.solve_velocity(&mut pair, &GROUND, &mb, dt),
                    Pass::Position => row.solve_position(&mut pair, &GROUND, &mb, dt),
                }
                vel[row.b] = pair.b;
            }

            if self.contacts.is_empty() && self.grips.is_empty() {
                continue;
            }
            for i in 0..self.contacts.len() {
                let (a, b) = (
                    self.contacts[i].a.expect("player contact"),
                    self.contacts[i].b,
                );
                let (ma, mb) = (self.mass(Some(a)), self.mass(Some(b)));
                let mut pair = Pair {
                    a: vel[a],
                    b: vel[b],
                };
                let row = &mut self.contacts[i];
                match pass {
                    Pass::Velocity => row.solve_velocity(&mut pair, &ma, &mb, dt),
                    Pass::Position => row.solve_position(&mut pair, &ma, &mb, dt),
                }
                acc.push(a, row.key_a, pair.a.v - vel[a].v, pair.a.w - vel[a].w);
                acc.push(b, row.key_b, pair.b.v - vel[b].v, pair.b.w - vel[b].w);
            }
            for row in &self.grips {
                let (ma, mb) = (self.masses[row.a], self.masses[row.b]);
                let mut pair = Pair {
                    a: vel[row.a],
                    b: vel[row.b],
                };
                let bias = match pass {
                    Pass::Velocity => Vec3::ZERO,
                    Pass::Position => row.error * (CORRECTION_RATE / dt),
                };
                row.solve(&mut pair, &ma, &mb, bias);
                acc.push(
                    row.a,
                    row.key_a,
                    pair.a.v - vel[row.a].v,
                    pair.a.w - vel[row.a].w,
                );
                acc.push(
                    row.b,
                    row.key_b,
                    pair.b.v - vel[row.b].v,
                    pair.b.w - vel[row.b].w,
                );
            }
            acc.apply(vel);
        }
    }

    /// Apply the impulses the joint and ground rows start with.
    pub fn warm_start(&self, vel: &mut [BodyVel]) {
        const GROUND_KEY: u16 = 1000;
        let mut acc = Accumulator::new(vel.len());
        for player in 0..2 {
            let base = player * PART_COUNT;
            for row in self.joints[player].iter().flatten() {
                let (pa, pb) = (base + row.parent, base + row.child);
                let (ma, mb) = (self.masses[pa], self.masses[pb]);
                let p = row.point_acc;
                let l = row.angular_impulse();
                acc.push(
                    pa,
                    row.key,
                    -(p * ma.inv_m),
                    -((row.r_parent.cross(p) + l) * ma.inv_i),
                );
                acc.push(
                    pb,
                    row.key,
                    p * mb.inv_m,
                    (row.r_child.cross(p) + l) * mb.inv_i,
                );
            }
        }
        for row in &self.ground {
            let m = self.masses[row.b];
            let p = row.normal * row.normal_acc + row.tangent_acc;
            acc.push(
                row.b,
                GROUND_KEY,
                p * m.inv_m,
                (row.rb.cross(p) + row.roll_acc) * m.inv_i,
            );
        }
        acc.apply(vel);
    }

    pub fn solve_velocities(&mut self, vel: &mut [BodyVel], dt: f64) {
        self.warm_start(vel);
        self.run(vel, Pass::Velocity, dt);
    }

    pub fn solve_positions(&mut self, pseudo: &mut [BodyVel], dt: f64) {
        self.run(pseudo, Pass::Position, dt);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulator_pairs_are_order_independent() {
        let a = Vec3::new(0.1, 0.7, 1e-17);
        let b = Vec3::new(0.2, -0.3, 3.0);
        let c = Vec3::new(1e16, 1.0, -2.5);
        let mut v1 = vec![BodyVel::default()];
        let mut v2 = vec![BodyVel::default()];
        let mut acc = Accumulator::new(1);
        acc.push(0, 3, a, Vec3::ZERO);
        acc.push(0, 1, c, Vec3::ZERO);
        acc.push(0, 3, b, Vec3::ZERO);
        acc.apply(&mut v1);
        acc.push(0, 3, b, Vec3::ZERO);
        acc.push(0, 3, a, Vec3::ZERO);
        acc.push(0, 1, c, Vec3::ZERO);
        acc.apply(&mut v2);
        assert_eq!(v1[0].v, v2[0].v);
    }

    #[test]
    fn point_mass_matrix_is_symmetric_positive() {
        let m = BodyMass {
            inv_m: 0.5,
            inv_i: 0.01,
        };
        let k = point_mass_matrix(&m, Vec3::new(1.0, 2.0, 3.0), &m, Vec3::new(-2.0, 0.5, 1.0));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(k.m[i][j], k.m[j][i]);
            }
            assert!(k.m[i][i] > 0.0);
        }
        assert!(k.determinant() > 0.0);
    }
}
