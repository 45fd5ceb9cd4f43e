//! Canonical skeleton and the plain-text character definition format.

use std::sync::{Arc, OnceLock};

use crate::math::Vec3;

use super::SimError;

pub const PART_COUNT: usize = 21;
pub const JOINT_COUNT: usize = 20;

/// Part names in id order.
pub const PART_NAMES: [&str; PART_COUNT] = [
    "head", "breast", "chest", "stomach", "groin", "r_pec", "l_pec", "r_bicep", "l_bicep",
    "r_tricep", "l_tricep", "r_hand", "l_hand", "r_butt", "l_butt", "r_thigh", "l_thigh", "r_leg",
    "l_leg", "r_foot", "l_foot",
];

/// Joint names in id order. Ids are also the action entry indices.
pub const JOINT_NAMES: [&str; JOINT_COUNT] = [
    "neck",
    "chest",
    "lumbar",
    "abs",
    "r_pec",
    "l_pec",
    "r_shoulder",
    "l_shoulder",
    "r_elbow",
    "l_elbow",
    "r_wrist",
    "l_wrist",
    "r_glute",
    "l_glute",
    "r_hip",
    "l_hip",
    "r_knee",
    "l_knee",
    "r_ankle",
    "l_ankle",
];

pub const HEAD: usize = 0;
pub const BREAST: usize = 1;
pub const CHEST: usize = 2;
pub const STOMACH: usize = 3;
pub const GROIN: usize = 4;
pub const R_HAND: usize = 11;
pub const L_HAND: usize = 12;
pub const R_FOOT: usize = 19;
pub const L_FOOT: usize = 20;

/// Hand part ids, indexed like the grip slots (right, left).
pub const HANDS: [usize; 2] = [R_HAND, L_HAND];

const CENTER_PARTS: usize = 5;
const CENTER_JOINTS: usize = 4;

pub fn part_id(name: &str) -> Option<usize> {
    PART_NAMES.iter().position(|n| *n == name)
}

pub fn joint_id(name: &str) -> Option<usize> {
    JOINT_NAMES.iter().position(|n| *n == name)
}

/// Left/right counterpart of a part (center parts map to themselves).
pub fn mirror_part(id: usize) -> usize {
    if id < CENTER_PARTS {
        id
    } else {
        CENTER_PARTS + ((id - CENTER_PARTS) ^ 1)
    }
}

/// Left/right counterpart of a joint (center joints map to themselves).
pub fn mirror_joint(id: usize) -> usize {
    if id < CENTER_JOINTS {
        id
    } else {
        // r at even offset, l at odd offset from the first paired joint
        CENTER_JOINTS + ((id - CENTER_JOINTS) ^ 1)
    }
}

/// Symmetry class of a part: left and right counterparts share a class.
pub fn part_class(id: usize) -> u8 {
    if id < CENTER_PARTS {
        id as u8
    } else {
        (CENTER_PARTS + (id - CENTER_PARTS) / 2) as u8
    }
}

/// Symmetry class of a joint: left and right counterparts share a class.
pub fn joint_class(id: usize) -> u8 {
    if id < CENTER_JOINTS {
        id as u8
    } else {
        (CENTER_JOINTS + (id - CENTER_JOINTS) / 2) as u8
    }
}

pub fn is_hand_or_foot(part: usize) -> bool {
    matches!(part, R_HAND | L_HAND | R_FOOT | L_FOOT)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartDef {
    pub name: String,
    pub radius: f64,
    pub mass: f64,
    /// Rest-pose center in the player-1 body frame.
    pub center: Vec3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointDef {
    pub name: String,
    pub parent: usize,
    pub child: usize,
    pub pivot: Vec3,
    /// Hinge axis, unit length, in the parent frame.
    pub axis: Vec3,
    pub limits: (f64, f64),
    pub torque: f64,
    pub hold_stiffness: f64,
    pub hold_damping: f64,
    pub relax_friction: f64,
    pub dismember_threshold: f64,
    /// Pivot relative to the parent center, parent frame.
    pub parent_anchor: Vec3,
    /// Pivot relative to the child center, child frame.
    pub child_anchor: Vec3,
    /// Unit reference direction orthogonal to `axis` used to measure the angle.
    pub reference: Vec3,
    /// `axis × reference`.
    pub binormal: Vec3,
}

/// A full character description: 21 parts and 20 joints in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct CharacterDef {
    pub parts: Vec<PartDef>,
    pub joints: Vec<JointDef>,
}

/// Descriptor pair returned by [`body_layout`].
#[derive(Clone, Debug, PartialEq)]
pub struct BodyLayout {
    pub parts: Vec<PartDef>,
    pub joints: Vec<JointDef>,
}

const DEFAULT_CHARACTER_TEXT: &str = include_str!("../../assets/default.character");

/// Text of the shipped default character definition.
pub fn default_character_text() -> &'static str {
    DEFAULT_CHARACTER_TEXT
}

/// The shipped default character, parsed once.
pub fn default_character() -> Arc<CharacterDef> {
    static DEFAULT: OnceLock<Arc<CharacterDef>> = OnceLock::new();
    DEFAULT
        .get_or_init(|| {
            Arc::new(
                CharacterDef::parse(DEFAULT_CHARACTER_TEXT)
                    .expect("shipped character definition is valid"),
            )
        })
        .clone()
}

/// Canonical skeleton: part and joint descriptors of the default character.
pub fn body_layout() -> BodyLayout {
    let def = default_character();
    BodyLayout {
        parts: def.parts.clone(),
        joints: def.joints.clone(),
    }
}

fn parse_vec3(s: &str) -> Option<Vec3> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .ok()?;
    (v.len() == 3).then(|| Vec3::new(v[0], v[1], v[2]))
}

fn parse_pair(s: &str) -> Option<(f64, f64)> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .ok()?;
    (v.len() == 2).then(|| (v[0], v[1]))
}

struct Fields<'a> {
    line: usize,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Fields<'a> {
    fn get(&self, key: &str) -> Result<&'a str, SimError> {
        self.pairs
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| SimError::CharacterParse {
                line: self.line,
                message: format!("missing field `{key}`"),
            })
    }

    fn num(&self, key: &str) -> Result<f64, SimError> {
        let raw = self.get(key)?;
        raw.parse::<f64>().map_err(|_| self.bad(key, raw))
    }

    fn vec3(&self, key: &str) -> Result<Vec3, SimError> {
        let raw = self.get(key)?;
        parse_vec3(raw).ok_or_else(|| self.bad(key, raw))
    }

    fn pair(&self, key: &str) -> Result<(f64, f64), SimError> {
        let raw = self.get(key)?;
        parse_pair(raw).ok_or_else(|| self.bad(key, raw))
    }

    fn part(&self, key: &str) -> Result<usize, SimError> {
        let raw = self.get(key)?;
        part_id(raw).ok_or_else(|| SimError::CharacterParse {
            line: self.line,
            message: format!("unknown part `{raw}` in `{key}`"),
        })
    }

    fn bad(&self, key: &str, raw: &str) -> SimError {
        SimError::CharacterParse {
            line: self.line,
            message: format!("invalid value `{raw}` for `{key}`"),
        }
    }
}

impl CharacterDef {
    /// Parse the key/value character format. Parts and joints must appear
    /// in canonical id order.
    pub fn parse(text: &str) -> Result<CharacterDef, SimError> {
        let mut parts = Vec::new();
        let mut raw_joints = Vec::new();
        let mut version_seen = false;
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let kind = tokens.next().unwrap_or("");
            let err = |message: String| SimError::CharacterParse {
                line: line_no,
                message,
            };
            match kind {
                "version" => {
                    let v = tokens.next().unwrap_or("");
                    if v != "1" {
                        return Err(err(format!("unsupported character format version `{v}`")));
                    }
                    version_seen = true;
                }
                "part" | "joint" => {
                    let name = tokens.next().ok_or_else(|| err("missing name".into()))?;
                    let mut pairs = Vec::new();
                    for tok in tokens {
                        let (k, v) = tok
                            .split_once('=')
                            .ok_or_else(|| err(format!("expected key=value, got `{tok}`")))?;
                        pairs.push((k, v));
                    }
                    let fields = Fields {
                        line: line_no,
                        pairs,
                    };
                    if kind == "part" {
                        let expected = PART_NAMES.get(parts.len()).copied();
                        if expected != Some(name) {
                            return Err(err(format!(
                                "part `{name}` out of canonical order (expected {expected:?})"
                            )));
                        }
                        let radius = fields.num("radius")?;
                        let mass = fields.num("mass")?;
                        if !(radius > 0.0) || !(mass > 0.0) {
                            return Err(err(format!(
                                "part `{name}` needs positive radius and mass"
                            )));
                        }
                        parts.push(PartDef {
                            name: name.to_string(),
                            radius,
                            mass,
                            center: fields.vec3("center")?,
                        });
                    } else {
                        let expected = JOINT_NAMES.get(raw_joints.len()).copied();
                        if expected != Some(name) {
                            return Err(err(format!(
                                "joint `{name}` out of canonical order (expected {expected:?})"
                            )));
                        }
                        let parent = fields.part("parent")?;
                        let child = fields.part("child")?;
                        if parent == child {
                            return Err(err(format!("joint `{name}` connects a part to itself")));
                        }
                        let axis = fields.vec3("axis")?;
                        if (axis.norm() - 1.0).abs() > 1e-9 {
                            return Err(err(format!("joint `{name}` axis must be unit length")));
                        }
                        let limits = fields.pair("limits")?;
                        if limits.0 > limits.1 || limits.0 > 0.0 || limits.1 < 0.0 {
                            return Err(err(format!(
                                "joint `{name}` limits must satisfy lo <= 0 <= hi"
                            )));
                        }
                        raw_joints.push((
                            line_no,
                            name.to_string(),
                            parent,
                            child,
                            fields.vec3("pivot")?,
                            axis,
                            limits,
                            [
                                fields.num("torque")?,
                                fields.num("hold_k")?,
                                fields.num("hold_c")?,
                                fields.num("relax_friction")?,
                                fields.num("dismember")?,
                            ],
                        ));
                    }
                }
                other => return Err(err(format!("unknown record `{other}`"))),
            }
        }
        if !version_seen {
            return Err(SimError::CharacterParse {
                line: 0,
                message: "missing `version` record".into(),
            });
        }
        if parts.len() != PART_COUNT || raw_joints.len() != JOINT_COUNT {
            return Err(SimError::CharacterParse {
                line: 0,
                message: format!(
                    "expected {PART_COUNT} parts and {JOINT_COUNT} joints, got {} and {}",
                    parts.len(),
                    raw_joints.len()
                ),
            });
        }
        let mut joints = Vec::with_capacity(JOINT_COUNT);
        for (line, name, parent, child, pivot, axis, limits, nums) in raw_joints {
            let parent_anchor = pivot - parts[parent].center;
            let child_anchor = pivot - parts[child].center;
            // bone direction from the pivot to the child, projected off the axis
            let bone = parts[child].center - pivot;
            let reference = (bone - axis * bone.dot(axis)).normalized();
            if reference == Vec3::ZERO {
                return Err(SimError::CharacterParse {
                    line,
                    message: format!("joint `{name}` child lies on the hinge axis"),
                });
            }
            joints.push(JointDef {
                name,
                parent,
                child,
                pivot,
                axis,
                limits,
                torque: nums[0],
                hold_stiffness: nums[1],
                hold_damping: nums[2],
                relax_friction: nums[3],
                dismember_threshold: nums[4],
                parent_anchor,
                child_anchor,
                reference,
                binormal: axis.cross(reference),
            });
        }
        Ok(CharacterDef { parts, joints })
    }

    /// True when every left entry is the exact reflection of its right
    /// counterpart and center entries are reflection-invariant.
    pub fn is_mirror_symmetric(&self) -> bool {
        let parts_ok = (0..PART_COUNT).all(|i| {
            let a = &self.parts[i];
            let b = &self.parts[mirror_part(i)];
            a.radius == b.radius && a.mass == b.mass && a.center == b.center.reflect_y()
        });
        let joints_ok = (0..JOINT_COUNT).all(|j| {
            let a = &self.joints[j];
            let b = &self.joints[mirror_joint(j)];
            a.parent == mirror_part(b.parent)
                && a.child == mirror_part(b.child)
                && a.pivot == b.pivot.reflect_y()
                && a.axis == b.axis.reflect_y_axial()
                && a.limits == b.limits
                && a.torque == b.torque
                && a.hold_stiffness == b.hold_stiffness
                && a.hold_damping == b.hold_damping
                && a.relax_friction == b.relax_friction
                && a.dismember_threshold == b.dismember_threshold
        });
        parts_ok && joints_ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_counts() {
        let layout = body_layout();
        assert_eq!(layout.parts.len(), 21);
        assert_eq!(layout.joints.len(), 20);
        assert_eq!(layout.joints.len() + 2, 22);
    }

    #[test]
    fn elbow_connects_bicep_to_tricep() {
        let layout = body_layout();
        let elbow = &layout.joints[joint_id("r_elbow").unwrap()];
        assert_eq!(PART_NAMES[elbow.parent], "r_bicep");
        assert_eq!(PART_NAMES[elbow.child], "r_tricep");
    }

    #[test]
    fn layout_is_stable() {
        assert_eq!(body_layout(), body_layout());
    }

    #[test]
    fn default_is_mirror_symmetric() {
        assert!(default_character().is_mirror_symmetric());
    }

    #[test]
    fn skeleton_is_a_tree_rooted_at_groin() {
        let def = default_character();
        let mut parent_of = [None; PART_COUNT];
        for j in &def.joints {
            assert!(
                parent_of[j.child].is_none(),
                "part {} has two parents",
                j.child
            );
            parent_of[j.child] = Some(j.parent);
        }
        for p in 0..PART_COUNT {
            let mut cur = p;
            let mut steps = 0;
            while let Some(up) = parent_of[cur] {
                cur = up;
                steps += 1;
                assert!(steps <= PART_COUNT);
            }
            assert_eq!(cur, GROIN);
        }
    }

    #[test]
    fn mirror_maps() {
        assert_eq!(mirror_part(HEAD), HEAD);
        assert_eq!(mirror_part(R_HAND), L_HAND);
        assert_eq!(mirror_part(L_FOOT), R_FOOT);
        assert_eq!(
            mirror_joint(joint_id("r_knee").unwrap()),
            joint_id("l_knee").unwrap()
        );
        assert_eq!(
            mirror_joint(joint_id("abs").unwrap()),
            joint_id("abs").unwrap()
        );
        for p in 0..PART_COUNT {
            assert_eq!(mirror_part(mirror_part(p)), p);
            assert_eq!(part_class(p), part_class(mirror_part(p)));
            if p >= 5 {
                assert_eq!(PART_NAMES[p][2..], PART_NAMES[mirror_part(p)][2..]);
            }
        }
        for j in 0..JOINT_COUNT {
            assert_eq!(joint_class(j), joint_class(mirror_joint(j)));
        }
    }

    #[test]
    fn parse_errors_name_the_line() {
        let text =
            default_character_text().replace("part chest    radius=28", "part chest    radius=-1");
        match CharacterDef::parse(&text) {
            Err(SimError::CharacterParse { line, .. }) => assert!(line > 0),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(CharacterDef::parse("").is_err());
    }

    #[test]
    fn character_is_roughly_400_tall() {
        let def = default_character();
        let top = def
            .parts
            .iter()
            .map(|p| p.center.z + p.radius)
            .fold(f64::MIN, f64::max);
        assert!((380.0..=440.0).contains(&top), "height {top}");
    }
}
