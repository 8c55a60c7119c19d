//! Joint angles, segment poses, angular derivatives, and quasi-static
//! inverse-dynamics joint torques.
//!
//! The skeleton is reduced to 15 actuated degrees of freedom spanning the
//! muscle groups of interest: per side shoulder flexion/abduction, elbow
//! flexion, hip flexion/abduction, knee flexion, ankle flexion, plus trunk
//! flexion. All angles are radians, zero at the anatomical neutral standing
//! pose. Conventions (documented in `docs/dof.md`):
//!
//! * World frame: y up, right-handed; the subject faces +z and their left
//!   points along +x in neutral.
//! * Flexion DOFs are positive when the distal segment moves forward (+z);
//!   abduction is positive away from the midline; ankle flexion is positive
//!   in dorsiflexion; trunk flexion is positive leaning forward.
//! * Shoulder and hip direction is parameterized as flexion = atan2 of the
//!   sagittal projection (full range) and abduction = elevation out of the
//!   sagittal plane (range [-pi/2, pi/2]). At exactly 90 degrees abduction
//!   the flexion coordinate is geometrically indeterminate and reads as 0.
//!
//! Angle extraction is pose-relative (built on a pelvis frame derived from
//! the hip line and the world vertical), so results are invariant under
//! global translation and rotation about the vertical axis.

use serde::Deserialize;
use thiserror::Error;

use crate::skeleton_io::{BodyScale, SessionStream, SkeletonFrame, JOINT_COUNT};

/// Gravitational acceleration, m/s^2.
pub const GRAVITY: f64 = 9.80665;

/// Actuated degrees of freedom, in declaration order (stable codes 0-14).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum DofId {
    ShoulderFlexionL = 0,
    ShoulderAbductionL,
    ElbowFlexionL,
    HipFlexionL,
    HipAbductionL,
    KneeFlexionL,
    AnkleFlexionL,
    ShoulderFlexionR,
    ShoulderAbductionR,
    ElbowFlexionR,
    HipFlexionR,
    HipAbductionR,
    KneeFlexionR,
    AnkleFlexionR,
    TrunkFlexion,
}

pub const DOF_COUNT: usize = 15;

impl DofId {
    pub const ALL: [DofId; DOF_COUNT] = [
        DofId::ShoulderFlexionL,
        DofId::ShoulderAbductionL,
        DofId::ElbowFlexionL,
        DofId::HipFlexionL,
        DofId::HipAbductionL,
        DofId::KneeFlexionL,
        DofId::AnkleFlexionL,
        DofId::ShoulderFlexionR,
        DofId::ShoulderAbductionR,
        DofId::ElbowFlexionR,
        DofId::HipFlexionR,
        DofId::HipAbductionR,
        DofId::KneeFlexionR,
        DofId::AnkleFlexionR,
        DofId::TrunkFlexion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DofId::ShoulderFlexionL => "shoulder_flexion_l",
            DofId::ShoulderAbductionL => "shoulder_abduction_l",
            DofId::ElbowFlexionL => "elbow_flexion_l",
            DofId::HipFlexionL => "hip_flexion_l",
            DofId::HipAbductionL => "hip_abduction_l",
            DofId::KneeFlexionL => "knee_flexion_l",
            DofId::AnkleFlexionL => "ankle_flexion_l",
            DofId::ShoulderFlexionR => "shoulder_flexion_r",
            DofId::ShoulderAbductionR => "shoulder_abduction_r",
            DofId::ElbowFlexionR => "elbow_flexion_r",
            DofId::HipFlexionR => "hip_flexion_r",
            DofId::HipAbductionR => "hip_abduction_r",
            DofId::KneeFlexionR => "knee_flexion_r",
            DofId::AnkleFlexionR => "ankle_flexion_r",
            DofId::TrunkFlexion => "trunk_flexion",
        }
    }

    /// Valid range in radians (inclusive), used by the synthetic generator
    /// and forward kinematics.
    pub fn range(self) -> (f64, f64) {
        use std::f64::consts::FRAC_PI_2;
        match self {
            DofId::ShoulderFlexionL | DofId::ShoulderFlexionR => (-1.2, 3.1),
            DofId::ShoulderAbductionL | DofId::ShoulderAbductionR => (-0.5, FRAC_PI_2),
            DofId::ElbowFlexionL | DofId::ElbowFlexionR => (-0.35, 2.8),
            DofId::HipFlexionL | DofId::HipFlexionR => (-0.9, 2.3),
            DofId::HipAbductionL | DofId::HipAbductionR => (-0.5, FRAC_PI_2),
            DofId::KneeFlexionL | DofId::KneeFlexionR => (-0.35, 2.8),
            DofId::AnkleFlexionL | DofId::AnkleFlexionR => (-0.9, 0.9),
            DofId::TrunkFlexion => (-0.8, 1.5),
        }
    }
}

/// Per-frame joint angles with angular velocities and accelerations.
#[derive(Debug, Clone, PartialEq)]
pub struct JointAngleFrame {
    pub t_ms: u64,
    pub angles: [f64; DOF_COUNT],
    pub velocities: [f64; DOF_COUNT],
    pub accelerations: [f64; DOF_COUNT],
}

impl JointAngleFrame {
    pub fn from_angles(t_ms: u64, angles: [f64; DOF_COUNT]) -> Self {
        JointAngleFrame {
            t_ms,
            angles,
            velocities: [0.0; DOF_COUNT],
            accelerations: [0.0; DOF_COUNT],
        }
    }
}

/// Net joint torques aligned with [`DofId`] order, N·m.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTorqueFrame {
    pub t_ms: u64,
    pub torques: [f64; DOF_COUNT],
}

/// Body segments carrying mass and muscle attachments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum SegmentId {
    Pelvis = 0,
    Trunk,
    UpperArmL,
    UpperArmR,
    ForearmL,
    ForearmR,
    ThighL,
    ThighR,
    ShankL,
    ShankR,
    FootL,
    FootR,
}

pub const SEGMENT_COUNT: usize = 12;

impl SegmentId {
    pub const ALL: [SegmentId; SEGMENT_COUNT] = [
        SegmentId::Pelvis,
        SegmentId::Trunk,
        SegmentId::UpperArmL,
        SegmentId::UpperArmR,
        SegmentId::ForearmL,
        SegmentId::ForearmR,
        SegmentId::ThighL,
        SegmentId::ThighR,
        SegmentId::ShankL,
        SegmentId::ShankR,
        SegmentId::FootL,
        SegmentId::FootR,
    ];
}

/// Anthropometric fractions for one segment kind.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct SegmentParams {
    /// Fraction of total body mass (per side where applicable).
    pub mass_frac: f64,
    /// Center of mass position as a fraction of segment length from the
    /// proximal joint.
    pub com_frac: f64,
    /// Radius of gyration as a fraction of segment length (kept for schema
    /// completeness; the quasi-static torque model uses the point-mass
    /// approximation).
    pub gyration_frac: f64,
}

/// Anthropometric table: trunk, upper arm, forearm, thigh, shank, foot.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentModel {
    pub trunk: SegmentParams,
    pub upper_arm: SegmentParams,
    pub forearm: SegmentParams,
    pub thigh: SegmentParams,
    pub shank: SegmentParams,
    pub foot: SegmentParams,
}

impl Default for SegmentModel {
    fn default() -> Self {
        SegmentModel {
            trunk: SegmentParams { mass_frac: 0.497, com_frac: 0.50, gyration_frac: 0.50 },
            upper_arm: SegmentParams { mass_frac: 0.028, com_frac: 0.436, gyration_frac: 0.322 },
            forearm: SegmentParams { mass_frac: 0.022, com_frac: 0.430, gyration_frac: 0.303 },
            thigh: SegmentParams { mass_frac: 0.100, com_frac: 0.433, gyration_frac: 0.323 },
            shank: SegmentParams { mass_frac: 0.0465, com_frac: 0.433, gyration_frac: 0.302 },
            foot: SegmentParams { mass_frac: 0.0145, com_frac: 0.50, gyration_frac: 0.475 },
        }
    }
}

impl SegmentModel {
    /// Loads the table from its JSON form:
    /// `{ "trunk": {"mass_frac": .., "com_frac": .., "gyration_frac": ..}, .. }`.
    pub fn from_json(text: &str) -> Result<SegmentModel, KinematicsError> {
        #[derive(Deserialize)]
        struct Raw {
            trunk: SegmentParams,
            upper_arm: SegmentParams,
            forearm: SegmentParams,
            thigh: SegmentParams,
            shank: SegmentParams,
            foot: SegmentParams,
        }
        let raw: Raw = serde_json::from_str(text)
            .map_err(|e| KinematicsError::BadSegmentModel(e.to_string()))?;
        let m = SegmentModel {
            trunk: raw.trunk,
            upper_arm: raw.upper_arm,
            forearm: raw.forearm,
            thigh: raw.thigh,
            shank: raw.shank,
            foot: raw.foot,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        let total = self.trunk.mass_frac
            + 2.0 * (self.upper_arm.mass_frac
                + self.forearm.mass_frac
                + self.thigh.mass_frac
                + self.shank.mass_frac
                + self.foot.mass_frac);
        if total > 1.0 + 1e-9 {
            return Err(KinematicsError::BadSegmentModel(format!(
                "mass fractions sum to {total:.4} > 1"
            )));
        }
        for (name, p) in [
            ("trunk", &self.trunk),
            ("upper_arm", &self.upper_arm),
            ("forearm", &self.forearm),
            ("thigh", &self.thigh),
            ("shank", &self.shank),
            ("foot", &self.foot),
        ] {
            for (field, v) in [
                ("mass_frac", p.mass_frac),
                ("com_frac", p.com_frac),
                ("gyration_frac", p.gyration_frac),
            ] {
                if !(v > 0.0 && v < 1.0) {
                    return Err(KinematicsError::BadSegmentModel(format!(
                        "{name}.{field} = {v} outside (0,1)"
                    )));
                }
            }
        }
        Ok(())
    }

    fn params(&self, seg: SegmentId) -> Option<&SegmentParams> {
        match seg {
            SegmentId::Pelvis => None, // pelvis mass is carried by the trunk
            SegmentId::Trunk => Some(&self.trunk),
            SegmentId::UpperArmL | SegmentId::UpperArmR => Some(&self.upper_arm),
            SegmentId::ForearmL | SegmentId::ForearmR => Some(&self.forearm),
            SegmentId::ThighL | SegmentId::ThighR => Some(&self.thigh),
            SegmentId::ShankL | SegmentId::ShankR => Some(&self.shank),
            SegmentId::FootL | SegmentId::FootR => Some(&self.foot),
        }
    }
}

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("degenerate pose: {0}")]
    DegeneratePose(&'static str),
    #[error("too few frames for differentiation: need at least 3, got {0}")]
    TooFewFrames(usize),
    #[error("invalid segment model: {0}")]
    BadSegmentModel(String),
}

// ---------------------------------------------------------------------------
// Small fixed-size linear algebra

pub(crate) type Vec3 = [f64; 3];
pub(crate) type Mat3 = [[f64; 3]; 3]; // row-major

pub(crate) fn vsub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn vadd(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn vscale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn normalize(a: Vec3) -> Option<Vec3> {
    let n = norm(a);
    if n < 1e-9 {
        None
    } else {
        Some(vscale(a, 1.0 / n))
    }
}

pub(crate) fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub(crate) fn mat_vec(a: &Mat3, v: Vec3) -> Vec3 {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

pub(crate) const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub(crate) fn rot_x(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

pub(crate) fn rot_z(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

// ---------------------------------------------------------------------------
// Reference skeleton and forward pose construction

/// Bone lengths of the reference (generic) skeleton, indexed like
/// [`crate::skeleton_io::BONES`].
const REFERENCE_BONES: [f64; 20] = [
    0.18, // pelvis -> spine_navel
    0.18, // spine_navel -> spine_chest
    0.25, // spine_chest -> neck
    0.14, // neck -> head
    0.08, // spine_chest -> clavicle_l
    0.12, // clavicle_l -> shoulder_l
    0.30, // shoulder_l -> elbow_l
    0.26, // elbow_l -> wrist_l
    0.10, // pelvis -> hip_l
    0.44, // hip_l -> knee_l
    0.43, // knee_l -> ankle_l
    0.20, // ankle_l -> foot_l
    0.08, 0.12, 0.30, 0.26, 0.10, 0.44, 0.43, 0.20, // right side mirrors
];

/// The generic reference skeleton scale used by the bundled musculoskeletal
/// model. Subject streams are matched against it via a stature ratio.
pub fn reference_scale() -> BodyScale {
    BodyScale {
        bone_lengths: REFERENCE_BONES,
        stature: crate::skeleton_io::stature_from_bones(&REFERENCE_BONES),
    }
}

/// Full body pose: joint positions and per-segment frames (origin at the
/// proximal joint, rotation mapping segment-local to world coordinates).
/// Segment frames are world-aligned at the neutral pose.
#[derive(Debug, Clone)]
pub struct BodyPose {
    pub joints: [Vec3; JOINT_COUNT],
    pub seg_origin: [Vec3; SEGMENT_COUNT],
    pub seg_rot: [Mat3; SEGMENT_COUNT],
    /// Axial length of each segment (0 for the pelvis).
    pub seg_len: [f64; SEGMENT_COUNT],
}

impl BodyPose {
    /// Transforms a segment-local point to world coordinates.
    pub fn to_world(&self, seg: SegmentId, local: Vec3) -> Vec3 {
        vadd(
            self.seg_origin[seg as usize],
            mat_vec(&self.seg_rot[seg as usize], local),
        )
    }

    /// Center of mass of a segment given its COM fraction along the axis.
    pub fn segment_com(&self, seg: SegmentId, com_frac: f64) -> Vec3 {
        let axis: Vec3 = match seg {
            SegmentId::Trunk => [0.0, 1.0, 0.0],
            SegmentId::FootL | SegmentId::FootR => [0.0, 0.0, 1.0],
            _ => [0.0, -1.0, 0.0],
        };
        let local = vscale(axis, com_frac * self.seg_len[seg as usize]);
        self.to_world(seg, local)
    }
}

struct SideBones {
    clavicle: f64,
    clav_to_shoulder: f64,
    upper_arm: f64,
    forearm: f64,
    hip_offset: f64,
    thigh: f64,
    shank: f64,
    foot: f64,
}

fn side_bones(scale: &BodyScale, right: bool) -> SideBones {
    let o = if right { 12 } else { 4 };
    SideBones {
        clavicle: scale.bone_lengths[o],
        clav_to_shoulder: scale.bone_lengths[o + 1],
        upper_arm: scale.bone_lengths[o + 2],
        forearm: scale.bone_lengths[o + 3],
        hip_offset: scale.bone_lengths[o + 4],
        thigh: scale.bone_lengths[o + 5],
        shank: scale.bone_lengths[o + 6],
        foot: scale.bone_lengths[o + 7],
    }
}

/// Builds joint positions and segment frames from DOF angles and bone
/// lengths, pelvis at the origin.
pub fn build_pose(angles: &[f64; DOF_COUNT], scale: &BodyScale) -> BodyPose {
    use crate::skeleton_io::JointId as J;

    let b = &scale.bone_lengths;
    let trunk_len = b[0] + b[1] + b[2];
    let theta_t = angles[DofId::TrunkFlexion as usize];
    let r_trunk = rot_x(theta_t);

    let mut joints = [[0.0; 3]; JOINT_COUNT];
    let mut seg_origin = [[0.0; 3]; SEGMENT_COUNT];
    let mut seg_rot = [IDENTITY; SEGMENT_COUNT];
    let mut seg_len = [0.0; SEGMENT_COUNT];

    let pelvis: Vec3 = [0.0, 0.0, 0.0];
    joints[J::Pelvis as usize] = pelvis;
    joints[J::SpineNavel as usize] = vadd(pelvis, mat_vec(&r_trunk, [0.0, b[0], 0.0]));
    let chest = vadd(pelvis, mat_vec(&r_trunk, [0.0, b[0] + b[1], 0.0]));
    joints[J::SpineChest as usize] = chest;
    joints[J::Neck as usize] = vadd(pelvis, mat_vec(&r_trunk, [0.0, trunk_len, 0.0]));
    joints[J::Head as usize] = vadd(pelvis, mat_vec(&r_trunk, [0.0, trunk_len + b[3], 0.0]));

    seg_origin[SegmentId::Pelvis as usize] = pelvis;
    seg_rot[SegmentId::Pelvis as usize] = IDENTITY;
    seg_origin[SegmentId::Trunk as usize] = pelvis;
    seg_rot[SegmentId::Trunk as usize] = r_trunk;
    seg_len[SegmentId::Trunk as usize] = trunk_len;

    for (right, sign) in [(false, 1.0f64), (true, -1.0f64)] {
        let sb = side_bones(scale, right);
        let (clav, shoulder_j, elbow_j, wrist_j, hip_j, knee_j, ankle_j, foot_j) = if right {
            (J::ClavicleR, J::ShoulderR, J::ElbowR, J::WristR, J::HipR, J::KneeR, J::AnkleR, J::FootR)
        } else {
            (J::ClavicleL, J::ShoulderL, J::ElbowL, J::WristL, J::HipL, J::KneeL, J::AnkleL, J::FootL)
        };
        let (ua_seg, fa_seg, th_seg, sh_seg, ft_seg) = if right {
            (SegmentId::UpperArmR, SegmentId::ForearmR, SegmentId::ThighR, SegmentId::ShankR, SegmentId::FootR)
        } else {
            (SegmentId::UpperArmL, SegmentId::ForearmL, SegmentId::ThighL, SegmentId::ShankL, SegmentId::FootL)
        };
        let base = if right { 7usize } else { 0usize };
        let sh_flex = angles[base];
        let sh_abd = angles[base + 1];
        let elbow = angles[base + 2];
        let hip_flex = angles[base + 3];
        let hip_abd = angles[base + 4];
        let knee = angles[base + 5];
        let ankle = angles[base + 6];

        // Shoulder girdle rides on the trunk.
        let clav_pos = vadd(chest, mat_vec(&r_trunk, [sign * sb.clavicle, 0.0, 0.0]));
        let shoulder = vadd(
            chest,
            mat_vec(&r_trunk, [sign * (sb.clavicle + sb.clav_to_shoulder), 0.0, 0.0]),
        );
        joints[clav as usize] = clav_pos;
        joints[shoulder_j as usize] = shoulder;

        // Arm: abduction about the forward axis, then flexion about the
        // lateral axis; neutral hangs along -y.
        let r_arm_local = mat_mul(&rot_x(-sh_flex), &rot_z(sign * sh_abd));
        let r_arm = mat_mul(&r_trunk, &r_arm_local);
        let elbow_pos = vadd(shoulder, mat_vec(&r_arm, [0.0, -sb.upper_arm, 0.0]));
        joints[elbow_j as usize] = elbow_pos;
        let r_fore = mat_mul(&r_arm, &rot_x(-elbow));
        joints[wrist_j as usize] = vadd(elbow_pos, mat_vec(&r_fore, [0.0, -sb.forearm, 0.0]));

        seg_origin[ua_seg as usize] = shoulder;
        seg_rot[ua_seg as usize] = r_arm;
        seg_len[ua_seg as usize] = sb.upper_arm;
        seg_origin[fa_seg as usize] = elbow_pos;
        seg_rot[fa_seg as usize] = r_fore;
        seg_len[fa_seg as usize] = sb.forearm;

        // Leg: hips hang from the pelvis (root orientation), knee bends
        // backward, ankle dorsiflexion lifts the foot toward the shin.
        let hip = vadd(pelvis, [sign * sb.hip_offset, 0.0, 0.0]);
        joints[hip_j as usize] = hip;
        let r_thigh = mat_mul(&rot_x(-hip_flex), &rot_z(sign * hip_abd));
        let knee_pos = vadd(hip, mat_vec(&r_thigh, [0.0, -sb.thigh, 0.0]));
        joints[knee_j as usize] = knee_pos;
        let r_shank = mat_mul(&r_thigh, &rot_x(knee));
        let ankle_pos = vadd(knee_pos, mat_vec(&r_shank, [0.0, -sb.shank, 0.0]));
        joints[ankle_j as usize] = ankle_pos;
        let r_foot = mat_mul(&r_shank, &rot_x(-ankle));
        joints[foot_j as usize] = vadd(ankle_pos, mat_vec(&r_foot, [0.0, 0.0, sb.foot]));

        seg_origin[th_seg as usize] = hip;
        seg_rot[th_seg as usize] = r_thigh;
        seg_len[th_seg as usize] = sb.thigh;
        seg_origin[sh_seg as usize] = knee_pos;
        seg_rot[sh_seg as usize] = r_shank;
        seg_len[sh_seg as usize] = sb.shank;
        seg_origin[ft_seg as usize] = ankle_pos;
        seg_rot[ft_seg as usize] = r_foot;
        seg_len[ft_seg as usize] = sb.foot;
    }

    BodyPose {
        joints,
        seg_origin,
        seg_rot,
        seg_len,
    }
}

// ---------------------------------------------------------------------------
// Angle extraction

/// Computes the 15 DOF angles from a tracked frame (angles only; velocities
/// and accelerations are filled by [`differentiate`]).
pub fn compute_joint_angles(
    frame: &SkeletonFrame,
    _scale: &BodyScale,
) -> Result<JointAngleFrame, KinematicsError> {
    use crate::skeleton_io::JointId as J;

    let p = |j: J| frame.position(j);

    // Pelvis frame: lateral axis from the hip line projected to horizontal,
    // up from the world vertical, forward completing the right-handed basis.
    let hip_line = vsub(p(J::HipL), p(J::HipR));
    let up: Vec3 = [0.0, 1.0, 0.0];
    let lat_raw = vsub(hip_line, vscale(up, dot(hip_line, up)));
    let lat = normalize(lat_raw).ok_or(KinematicsError::DegeneratePose("hip line vertical or zero"))?;
    let fwd = cross(lat, up);
    let to_pelvis = |v: Vec3| -> Vec3 { [dot(v, lat), dot(v, up), dot(v, fwd)] };

    let mut angles = [0.0; DOF_COUNT];

    // Trunk flexion from the pelvis->navel direction in the sagittal plane.
    let trunk_vec = to_pelvis(vsub(p(J::SpineNavel), p(J::Pelvis)));
    if norm(trunk_vec) < 1e-6 {
        return Err(KinematicsError::DegeneratePose("pelvis and spine coincide"));
    }
    let theta_t = trunk_vec[2].atan2(trunk_vec[1]);
    angles[DofId::TrunkFlexion as usize] = theta_t;
    let trunk_inv = rot_x(-theta_t);

    for (right, sign) in [(false, 1.0f64), (true, -1.0f64)] {
        let (shoulder_j, elbow_j, wrist_j, hip_j, knee_j, ankle_j, foot_j) = if right {
            (J::ShoulderR, J::ElbowR, J::WristR, J::HipR, J::KneeR, J::AnkleR, J::FootR)
        } else {
            (J::ShoulderL, J::ElbowL, J::WristL, J::HipL, J::KneeL, J::AnkleL, J::FootL)
        };
        let base = if right { 7usize } else { 0usize };

        // Shoulder: arm direction in the trunk frame.
        let arm_vec = vsub(p(elbow_j), p(shoulder_j));
        let arm = normalize(to_pelvis(arm_vec))
            .ok_or(KinematicsError::DegeneratePose("shoulder and elbow coincide"))?;
        let d = mat_vec(&trunk_inv, arm);
        let planar = (d[1] * d[1] + d[2] * d[2]).sqrt();
        let sh_flex = if planar < 1e-6 { 0.0 } else { d[2].atan2(-d[1]) };
        let sh_abd = (sign * d[0]).clamp(-1.0, 1.0).asin();
        angles[base] = sh_flex;
        angles[base + 1] = sh_abd;

        // Elbow: interior angle, sign from the bend-plane normal against the
        // arm frame's lateral axis.
        let to_shoulder = normalize(vsub(p(shoulder_j), p(elbow_j)))
            .ok_or(KinematicsError::DegeneratePose("shoulder and elbow coincide"))?;
        let to_wrist = normalize(vsub(p(wrist_j), p(elbow_j)))
            .ok_or(KinematicsError::DegeneratePose("elbow and wrist coincide"))?;
        let raw = std::f64::consts::PI - angle_between(to_shoulder, to_wrist);
        let r_arm_local = mat_mul(&rot_x(-sh_flex), &rot_z(sign * sh_abd));
        let r_arm = mat_mul(&rot_x(theta_t), &r_arm_local);
        // Pelvis-frame lateral axis of the arm segment.
        let arm_x = mat_vec(&r_arm, [1.0, 0.0, 0.0]);
        let bend = cross(to_shoulder, to_wrist);
        let bend_pelvis = to_pelvis(bend);
        let sign_e = if dot(bend_pelvis, arm_x) < 0.0 { -1.0 } else { 1.0 };
        angles[base + 2] = sign_e * raw;

        // Hip: thigh direction in the pelvis frame.
        let thigh_vec = vsub(p(knee_j), p(hip_j));
        let t = normalize(to_pelvis(thigh_vec))
            .ok_or(KinematicsError::DegeneratePose("hip and knee coincide"))?;
        let planar = (t[1] * t[1] + t[2] * t[2]).sqrt();
        let hip_flex = if planar < 1e-6 { 0.0 } else { t[2].atan2(-t[1]) };
        let hip_abd = (sign * t[0]).clamp(-1.0, 1.0).asin();
        angles[base + 3] = hip_flex;
        angles[base + 4] = hip_abd;

        // Knee: interior angle, backward bend positive.
        let to_hip = normalize(vsub(p(hip_j), p(knee_j)))
            .ok_or(KinematicsError::DegeneratePose("hip and knee coincide"))?;
        let to_ankle = normalize(vsub(p(ankle_j), p(knee_j)))
            .ok_or(KinematicsError::DegeneratePose("knee and ankle coincide"))?;
        let raw = std::f64::consts::PI - angle_between(to_hip, to_ankle);
        let r_thigh = mat_mul(&rot_x(-hip_flex), &rot_z(sign * hip_abd));
        let thigh_x = mat_vec(&r_thigh, [1.0, 0.0, 0.0]);
        let bend = to_pelvis(cross(to_hip, to_ankle));
        let sign_k = if dot(bend, thigh_x) > 0.0 { -1.0 } else { 1.0 };
        angles[base + 5] = sign_k * raw;

        // Ankle: dorsiflexion positive, read from the shank/foot angle.
        let to_knee = normalize(vsub(p(knee_j), p(ankle_j)))
            .ok_or(KinematicsError::DegeneratePose("knee and ankle coincide"))?;
        let to_foot = normalize(vsub(p(foot_j), p(ankle_j)))
            .ok_or(KinematicsError::DegeneratePose("ankle and foot coincide"))?;
        angles[base + 6] = std::f64::consts::FRAC_PI_2 - angle_between(to_knee, to_foot);
    }

    Ok(JointAngleFrame::from_angles(frame.t_ms, angles))
}

fn angle_between(a: Vec3, b: Vec3) -> f64 {
    dot(a, b).clamp(-1.0, 1.0).acos()
}

// ---------------------------------------------------------------------------
// Differentiation

/// Fills angular velocities and accelerations on a uniformly sampled angle
/// stream: central differences in the interior, one-sided at the ends.
pub fn differentiate(frames: &mut [JointAngleFrame], rate_hz: f64) -> Result<(), KinematicsError> {
    let n = frames.len();
    if n < 3 {
        return Err(KinematicsError::TooFewFrames(n));
    }
    let dt = 1.0 / rate_hz;
    let diff = |get: &dyn Fn(usize, usize) -> f64, i: usize, d: usize| -> f64 {
        if i == 0 {
            (get(1, d) - get(0, d)) / dt
        } else if i == n - 1 {
            (get(n - 1, d) - get(n - 2, d)) / dt
        } else {
            (get(i + 1, d) - get(i - 1, d)) / (2.0 * dt)
        }
    };
    let angles: Vec<[f64; DOF_COUNT]> = frames.iter().map(|f| f.angles).collect();
    let get_angle = |i: usize, d: usize| angles[i][d];
    for i in 0..n {
        for d in 0..DOF_COUNT {
            frames[i].velocities[d] = diff(&get_angle, i, d);
        }
    }
    let vels: Vec<[f64; DOF_COUNT]> = frames.iter().map(|f| f.velocities).collect();
    let get_vel = |i: usize, d: usize| vels[i][d];
    for i in 0..n {
        for d in 0..DOF_COUNT {
            frames[i].accelerations[d] = diff(&get_vel, i, d);
        }
    }
    Ok(())
}

/// Convenience: angles plus derivatives for a whole stream.
pub fn angles_for_stream(
    stream: &SessionStream,
    scale: &BodyScale,
) -> Result<Vec<JointAngleFrame>, KinematicsError> {
    let mut frames = stream
        .frames
        .iter()
        .map(|f| compute_joint_angles(f, scale))
        .collect::<Result<Vec<_>, _>>()?;
    differentiate(&mut frames, stream.rate_hz)?;
    Ok(frames)
}

// ---------------------------------------------------------------------------
// Quasi-static inverse dynamics

/// Distal segments and pivot joint per DOF.
fn dof_chain(dof: DofId) -> (crate::skeleton_io::JointId, &'static [SegmentId]) {
    use crate::skeleton_io::JointId as J;
    use SegmentId::*;
    match dof {
        DofId::ShoulderFlexionL | DofId::ShoulderAbductionL => (J::ShoulderL, &[UpperArmL, ForearmL]),
        DofId::ElbowFlexionL => (J::ElbowL, &[ForearmL]),
        DofId::HipFlexionL | DofId::HipAbductionL => (J::HipL, &[ThighL, ShankL, FootL]),
        DofId::KneeFlexionL => (J::KneeL, &[ShankL, FootL]),
        DofId::AnkleFlexionL => (J::AnkleL, &[FootL]),
        DofId::ShoulderFlexionR | DofId::ShoulderAbductionR => (J::ShoulderR, &[UpperArmR, ForearmR]),
        DofId::ElbowFlexionR => (J::ElbowR, &[ForearmR]),
        DofId::HipFlexionR | DofId::HipAbductionR => (J::HipR, &[ThighR, ShankR, FootR]),
        DofId::KneeFlexionR => (J::KneeR, &[ShankR, FootR]),
        DofId::AnkleFlexionR => (J::AnkleR, &[FootR]),
        DofId::TrunkFlexion => (
            J::Pelvis,
            &[Trunk, UpperArmL, ForearmL, UpperArmR, ForearmR],
        ),
    }
}

const FD_STEP: f64 = 1e-5;

/// Quasi-static joint torques: the torque the musculature must produce to
/// hold the pose against gravity, plus a single-DOF inertial term.
///
/// The gravitational part is the derivative of the potential energy of all
/// segments distal to the DOF with respect to that angle (evaluated by
/// central finite differences on the pose); the inertial part treats each
/// distal segment as a point mass at its center of mass. Holding a raised
/// limb therefore yields a sustained nonzero torque, and torques scale
/// linearly with body mass.
pub fn inverse_dynamics(
    frame: &JointAngleFrame,
    mass_kg: f64,
    scale: &BodyScale,
    seg: &SegmentModel,
) -> JointTorqueFrame {
    let base_pose = build_pose(&frame.angles, scale);
    let mut torques = [0.0; DOF_COUNT];
    for dof in DofId::ALL {
        let (joint, distal) = dof_chain(dof);
        // Gravitational generalized force via dV/dq on the distal chain.
        let mut plus = frame.angles;
        plus[dof as usize] += FD_STEP;
        let mut minus = frame.angles;
        minus[dof as usize] -= FD_STEP;
        let pose_p = build_pose(&plus, scale);
        let pose_m = build_pose(&minus, scale);
        let mut dv = 0.0;
        let mut inertia = 0.0;
        let pivot = base_pose.joints[joint as usize];
        for &s in distal {
            let Some(params) = seg.params(s) else { continue };
            let m = mass_kg * params.mass_frac;
            let com_p = pose_p.segment_com(s, params.com_frac);
            let com_m = pose_m.segment_com(s, params.com_frac);
            dv += m * GRAVITY * (com_p[1] - com_m[1]) / (2.0 * FD_STEP);
            let com = base_pose.segment_com(s, params.com_frac);
            let r = vsub(com, pivot);
            inertia += m * dot(r, r);
        }
        torques[dof as usize] = dv + inertia * frame.accelerations[dof as usize];
    }
    JointTorqueFrame {
        t_ms: frame.t_ms,
        torques,
    }
}
