//! Musculoskeletal model schema and the Hill-type constitutive relations.
//!
//! Muscles are straight polylines between attachment points expressed in
//! segment-local coordinates of the reference skeleton. The contractile
//! element follows the classic hyperbolic force-velocity relation
//! `(F + a)(v + b) = (F_max + a) b` for shortening; lengthening is clamped at
//! `F_max` and the tendon is rigid. Maximum isometric force is proportional
//! to the physiological cross-sectional area. The active force-length factor
//! is a Gaussian bell of width 0.45 around the optimal length; the passive
//! element engages exponentially beyond it.
//!
//! The bundled default model carries 24 muscle lines: two sides times eight
//! groups (deltoideus, pectoralis major, triceps, biceps/brachialis,
//! latissimus, gluteus maximus, ischiocrurales, quadriceps), with one or two
//! lines per group. The file schema (see `docs/model-schema.md`) accepts
//! arbitrarily many muscles.

use serde::Deserialize;
use thiserror::Error;

use crate::kinematics::{
    build_pose, reference_scale, BodyPose, DofId, SegmentId, Vec3, DOF_COUNT,
};
use crate::skeleton_io::BodyScale;

/// Body side of a muscle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];
}

/// The eight visualized muscle groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MuscleGroup {
    Deltoideus = 0,
    PectoralisMajor,
    TricepsBrachii,
    BicepsBrachiiBrachialis,
    LatissimusDorsi,
    GluteusMaximus,
    Ischiocrurales,
    QuadricepsFemoris,
}

pub const GROUP_COUNT: usize = 8;

impl MuscleGroup {
    pub const ALL: [MuscleGroup; GROUP_COUNT] = [
        MuscleGroup::Deltoideus,
        MuscleGroup::PectoralisMajor,
        MuscleGroup::TricepsBrachii,
        MuscleGroup::BicepsBrachiiBrachialis,
        MuscleGroup::LatissimusDorsi,
        MuscleGroup::GluteusMaximus,
        MuscleGroup::Ischiocrurales,
        MuscleGroup::QuadricepsFemoris,
    ];

    /// Upper-limb groups (the humeral prime movers, latissimus and
    /// pectoralis included); the rest belong to the lower limbs.
    pub fn is_upper_limb(self) -> bool {
        matches!(
            self,
            MuscleGroup::Deltoideus
                | MuscleGroup::PectoralisMajor
                | MuscleGroup::TricepsBrachii
                | MuscleGroup::BicepsBrachiiBrachialis
                | MuscleGroup::LatissimusDorsi
        )
    }

    fn from_slug(s: &str) -> Option<MuscleGroup> {
        Some(match s {
            "deltoideus" => MuscleGroup::Deltoideus,
            "pectoralis_major" => MuscleGroup::PectoralisMajor,
            "triceps_brachii" => MuscleGroup::TricepsBrachii,
            "biceps_brachii_brachialis" => MuscleGroup::BicepsBrachiiBrachialis,
            "latissimus_dorsi" => MuscleGroup::LatissimusDorsi,
            "gluteus_maximus" => MuscleGroup::GluteusMaximus,
            "ischiocrurales" => MuscleGroup::Ischiocrurales,
            "quadriceps_femoris" => MuscleGroup::QuadricepsFemoris,
        _ => return None,
        })
    }
}

/// Segment kind without a side; resolved against the muscle's side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Pelvis,
    Trunk,
    UpperArm,
    Forearm,
    Thigh,
    Shank,
    Foot,
}

impl SegmentKind {
    pub fn sided(self, side: Side) -> SegmentId {
        let right = side == Side::Right;
        match self {
            SegmentKind::Pelvis => SegmentId::Pelvis,
            SegmentKind::Trunk => SegmentId::Trunk,
            SegmentKind::UpperArm => {
                if right { SegmentId::UpperArmR } else { SegmentId::UpperArmL }
            }
            SegmentKind::Forearm => {
                if right { SegmentId::ForearmR } else { SegmentId::ForearmL }
            }
            SegmentKind::Thigh => {
                if right { SegmentId::ThighR } else { SegmentId::ThighL }
            }
            SegmentKind::Shank => {
                if right { SegmentId::ShankR } else { SegmentId::ShankL }
            }
            SegmentKind::Foot => {
                if right { SegmentId::FootR } else { SegmentId::FootL }
            }
        }
    }

    fn from_slug(s: &str) -> Option<SegmentKind> {
        Some(match s {
            "pelvis" => SegmentKind::Pelvis,
            "trunk" => SegmentKind::Trunk,
            "upper_arm" => SegmentKind::UpperArm,
            "forearm" => SegmentKind::Forearm,
            "thigh" => SegmentKind::Thigh,
            "shank" => SegmentKind::Shank,
            "foot" => SegmentKind::Foot,
            _ => return None,
        })
    }
}

/// Side-relative DOF name resolution ("shoulder_flexion" + side -> DofId).
fn dof_from_relative(name: &str, side: Side) -> Option<DofId> {
    let right = side == Side::Right;
    Some(match name {
        "shoulder_flexion" => {
            if right { DofId::ShoulderFlexionR } else { DofId::ShoulderFlexionL }
        }
        "shoulder_abduction" => {
            if right { DofId::ShoulderAbductionR } else { DofId::ShoulderAbductionL }
        }
        "elbow_flexion" => {
            if right { DofId::ElbowFlexionR } else { DofId::ElbowFlexionL }
        }
        "hip_flexion" => {
            if right { DofId::HipFlexionR } else { DofId::HipFlexionL }
        }
        "hip_abduction" => {
            if right { DofId::HipAbductionR } else { DofId::HipAbductionL }
        }
        "knee_flexion" => {
            if right { DofId::KneeFlexionR } else { DofId::KneeFlexionL }
        }
        "ankle_flexion" => {
            if right { DofId::AnkleFlexionR } else { DofId::AnkleFlexionL }
        }
        "trunk_flexion" => DofId::TrunkFlexion,
        _ => return None,
    })
}

/// Hill constants of one muscle, fully resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct HillParameters {
    /// Maximum isometric tension, N.
    pub f_max: f64,
    /// Maximum shortening velocity, m/s.
    pub v_max: f64,
    /// Hill constant `a`, N.
    pub a: f64,
    /// Hill constant `b`, m/s.
    pub b: f64,
    /// Optimal fiber length, m.
    pub l0: f64,
}

impl HillParameters {
    /// Checks positivity and the `a * v_max = b * f_max` consistency that
    /// pins the force-velocity zero crossing exactly at `v_max`.
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [
            ("f_max", self.f_max),
            ("v_max", self.v_max),
            ("a", self.a),
            ("b", self.b),
            ("l0", self.l0),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ModelError::Schema(format!("hill parameter {name} = {v} must be > 0")));
            }
        }
        let lhs = self.a * self.v_max;
        let rhs = self.b * self.f_max;
        if (lhs - rhs).abs() > 1e-6 * lhs.abs().max(rhs.abs()) {
            return Err(ModelError::Schema(format!(
                "hill constants inconsistent: a*v_max = {lhs}, b*f_max = {rhs}"
            )));
        }
        Ok(())
    }
}

/// One straight-line attachment point.
#[derive(Debug, Clone, PartialEq)]
pub struct Attachment {
    pub segment: SegmentKind,
    /// Point in segment-local coordinates of the reference skeleton, meters.
    pub point: Vec3,
}

/// One muscle line.
#[derive(Debug, Clone, PartialEq)]
pub struct MuscleDefinition {
    pub name: String,
    pub group: MuscleGroup,
    pub side: Side,
    pub attachments: Vec<Attachment>,
    pub spanned_dofs: Vec<DofId>,
    pub hill: HillParameters,
    pub pcsa_cm2: Option<f64>,
}

/// The full model: muscle lines plus shared constants.
#[derive(Debug, Clone, PartialEq)]
pub struct MusculoskeletalModel {
    pub muscles: Vec<MuscleDefinition>,
    /// Specific tension, N/cm^2, used to derive `f_max` from PCSA.
    pub specific_tension: f64,
    pub version: String,
    /// Stature of the reference skeleton the attachment coordinates assume.
    pub reference_stature: f64,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model schema error: {0}")]
    Schema(String),
    #[error("no muscle covers group {group} on side {side:?}")]
    UncoveredGroup { group: &'static str, side: Side },
    #[error("duplicate muscle name {0}")]
    DuplicateMuscle(String),
    #[error("muscle {muscle} does not span dof {dof}")]
    DofNotSpanned { muscle: String, dof: &'static str },
}

// ---------------------------------------------------------------------------
// Hill relations

/// Contractile-element force capacity at optimal length for contraction
/// velocity `v` (m/s, positive shortening), in newtons.
///
/// Shortening follows `(F + a)(v + b) = (F_max + a) b`; the force reaches
/// zero exactly at `v_max` thanks to the `a*v_max = b*f_max` invariant.
/// Lengthening (`v < 0`) is clamped at `f_max`.
pub fn force_velocity(v: f64, p: &HillParameters) -> f64 {
    if v < 0.0 {
        p.f_max
    } else if v == 0.0 {
        p.f_max
    } else if v >= p.v_max {
        0.0
    } else {
        (p.f_max + p.a) * p.b / (v + p.b) - p.a
    }
}

/// Active force-length factor (dimensionless, peak 1 at optimal length) and
/// passive parallel-elastic force (N) at normalized length `lnorm = l / l0`.
pub fn force_length(lnorm: f64, p: &HillParameters) -> (f64, f64) {
    let z = (lnorm - 1.0) / 0.45;
    let f_l = (-z * z).exp();
    let f_pe = if lnorm <= 1.0 {
        0.0
    } else {
        p.f_max * 0.05 * ((5.0 * (lnorm - 1.0)).exp() - 1.0)
    };
    (f_l, f_pe)
}

// ---------------------------------------------------------------------------
// Geometry

/// Path length of a muscle in a given pose: the sum of Euclidean distances
/// between consecutive attachment points transformed to world coordinates.
pub fn muscle_length(m: &MuscleDefinition, pose: &BodyPose) -> f64 {
    let mut total = 0.0;
    let mut prev: Option<Vec3> = None;
    for att in &m.attachments {
        let world = pose.to_world(att.segment.sided(m.side), att.point);
        if let Some(p) = prev {
            let d = [world[0] - p[0], world[1] - p[1], world[2] - p[2]];
            total += (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        }
        prev = Some(world);
    }
    total
}

/// Finite-difference step for tendon-excursion moment arms, radians.
pub const MOMENT_ARM_STEP: f64 = 1e-5;

/// Tendon-excursion moment arm `r = -dl/dtheta` for one DOF, by central
/// finite difference on the pose. Positive means muscle tension produces
/// positive torque on that DOF.
pub fn moment_arm(
    m: &MuscleDefinition,
    angles: &[f64; DOF_COUNT],
    scale: &BodyScale,
    dof: DofId,
) -> Result<f64, ModelError> {
    if !m.spanned_dofs.contains(&dof) {
        return Err(ModelError::DofNotSpanned {
            muscle: m.name.clone(),
            dof: dof.name(),
        });
    }
    let mut plus = *angles;
    plus[dof as usize] += MOMENT_ARM_STEP;
    let mut minus = *angles;
    minus[dof as usize] -= MOMENT_ARM_STEP;
    let l_plus = muscle_length(m, &build_pose(&plus, scale));
    let l_minus = muscle_length(m, &build_pose(&minus, scale));
    Ok(-(l_plus - l_minus) / (2.0 * MOMENT_ARM_STEP))
}

// ---------------------------------------------------------------------------
// Per-frame muscle state

/// Kinematic state of one muscle at one frame.
#[derive(Debug, Clone)]
pub struct MuscleState {
    /// Path length, m.
    pub length: f64,
    /// Normalized length `l / l0`.
    pub lnorm: f64,
    /// Contraction velocity, m/s, positive when shortening.
    pub velocity: f64,
    /// Moment arms per DOF (zero for unspanned DOFs), m.
    pub moment_arms: [f64; DOF_COUNT],
}

/// States of all muscles at one frame, aligned with the model's muscle list.
#[derive(Debug, Clone)]
pub struct MuscleStateFrame {
    pub t_ms: u64,
    pub states: Vec<MuscleState>,
}

impl MusculoskeletalModel {
    /// Indices of muscles spanning each DOF.
    pub fn muscles_per_dof(&self) -> [Vec<usize>; DOF_COUNT] {
        let mut per: [Vec<usize>; DOF_COUNT] = Default::default();
        for (i, m) in self.muscles.iter().enumerate() {
            for &d in &m.spanned_dofs {
                per[d as usize].push(i);
            }
        }
        per
    }

    /// Computes lengths, normalized lengths, shortening velocities and
    /// moment arms for every muscle at one angle frame.
    ///
    /// Moment arms come from central differences of the pose per spanned
    /// DOF; the shortening velocity is the chain rule over joint velocities,
    /// `v = sum_j r_j * omega_j`.
    pub fn state_frame(
        &self,
        frame: &crate::kinematics::JointAngleFrame,
        scale: &BodyScale,
    ) -> MuscleStateFrame {
        let base = build_pose(&frame.angles, scale);
        let mut states: Vec<MuscleState> = self
            .muscles
            .iter()
            .map(|m| {
                let length = muscle_length(m, &base);
                MuscleState {
                    length,
                    lnorm: length / m.hill.l0,
                    velocity: 0.0,
                    moment_arms: [0.0; DOF_COUNT],
                }
            })
            .collect();

        let per_dof = self.muscles_per_dof();
        for dof in DofId::ALL {
            let idxs = &per_dof[dof as usize];
            if idxs.is_empty() {
                continue;
            }
            let mut plus = frame.angles;
            plus[dof as usize] += MOMENT_ARM_STEP;
            let mut minus = frame.angles;
            minus[dof as usize] -= MOMENT_ARM_STEP;
            let pose_p = build_pose(&plus, scale);
            let pose_m = build_pose(&minus, scale);
            for &i in idxs {
                let m = &self.muscles[i];
                let r = -(muscle_length(m, &pose_p) - muscle_length(m, &pose_m))
                    / (2.0 * MOMENT_ARM_STEP);
                states[i].moment_arms[dof as usize] = r;
            }
        }
        for s in &mut states {
            let mut v = 0.0;
            for d in 0..DOF_COUNT {
                v += s.moment_arms[d] * frame.velocities[d];
            }
            s.velocity = v;
        }
        MuscleStateFrame {
            t_ms: frame.t_ms,
            states,
        }
    }

    /// Returns a copy with attachment coordinates, optimal lengths and
    /// velocity scales multiplied by `subject_stature / reference_stature`.
    /// Forces are left unchanged.
    pub fn scaled_to(&self, subject: &BodyScale) -> MusculoskeletalModel {
        let factor = subject.stature / self.reference_stature;
        let mut out = self.clone();
        for m in &mut out.muscles {
            for att in &mut m.attachments {
                att.point = [att.point[0] * factor, att.point[1] * factor, att.point[2] * factor];
            }
            m.hill.l0 *= factor;
            m.hill.v_max *= factor;
            m.hill.b = 0.25 * m.hill.v_max;
            m.hill.a = 0.25 * m.hill.f_max;
            // Keep a*v_max = b*f_max exact under scaling.
            m.hill.b = m.hill.a * m.hill.v_max / m.hill.f_max;
        }
        out.reference_stature = subject.stature;
        out
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let mut seen = std::collections::HashSet::new();
        for m in &self.muscles {
            if !seen.insert(m.name.clone()) {
                return Err(ModelError::DuplicateMuscle(m.name.clone()));
            }
            if m.attachments.len() < 2 {
                return Err(ModelError::Schema(format!(
                    "muscle {} needs at least 2 attachments",
                    m.name
                )));
            }
            if m.spanned_dofs.is_empty() {
                return Err(ModelError::Schema(format!(
                    "muscle {} spans no DOFs",
                    m.name
                )));
            }
            m.hill.validate()?;
        }
        for group in MuscleGroup::ALL {
            for side in Side::BOTH {
                if !self.muscles.iter().any(|m| m.group == group && m.side == side) {
                    return Err(ModelError::UncoveredGroup {
                        group: crate::export::group_slug(group),
                        side,
                    });
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// JSON schema and loading

#[derive(Deserialize)]
struct RawModel {
    #[serde(default = "default_version")]
    version: String,
    #[serde(default = "default_specific_tension")]
    specific_tension_n_per_cm2: f64,
    muscles: Vec<RawMuscle>,
}

fn default_version() -> String {
    "muscle-model/1".to_string()
}

fn default_specific_tension() -> f64 {
    30.0
}

#[derive(Deserialize)]
struct RawMuscle {
    name: String,
    group: String,
    side: String,
    attachments: Vec<RawAttachment>,
    spanned_dofs: Vec<String>,
    #[serde(default)]
    pcsa_cm2: Option<f64>,
    /// Optimal length as a multiple of the reference neutral path length;
    /// ignored when `hill.l0_m` is given.
    #[serde(default)]
    l0_slack_factor: Option<f64>,
    #[serde(default)]
    hill: RawHill,
}

#[derive(Deserialize)]
struct RawAttachment {
    segment: String,
    point: [f64; 3],
}

#[derive(Deserialize, Default)]
struct RawHill {
    #[serde(default)]
    f_max_n: Option<f64>,
    #[serde(default)]
    v_max_m_per_s: Option<f64>,
    #[serde(default)]
    a_n: Option<f64>,
    #[serde(default)]
    b_m_per_s: Option<f64>,
    #[serde(default)]
    l0_m: Option<f64>,
}

/// Loads and validates a model from its JSON text.
///
/// `f_max` is derived from PCSA when given. Missing Hill constants take the
/// classic defaults `a = 0.25 f_max`, `b = 0.25 v_max`, `v_max = 10 l0 / s`,
/// with `l0` defaulting to the muscle's path length in the reference neutral
/// pose times `l0_slack_factor`. Inconsistent `a`/`b` pairs are repaired by
/// rescaling `b` (with a warning).
pub fn load_model(text: &str) -> Result<MusculoskeletalModel, ModelError> {
    let raw: RawModel = serde_json::from_str(text).map_err(|e| ModelError::Schema(e.to_string()))?;
    if !(raw.specific_tension_n_per_cm2 > 0.0) {
        return Err(ModelError::Schema("specific_tension must be > 0".into()));
    }
    let reference = reference_scale();
    let neutral = build_pose(&[0.0; DOF_COUNT], &reference);
    let mut muscles = Vec::with_capacity(raw.muscles.len());
    for rm in raw.muscles {
        let side = match rm.side.as_str() {
            "left" | "L" | "l" => Side::Left,
            "right" | "R" | "r" => Side::Right,
            other => return Err(ModelError::Schema(format!("unknown side {other:?}"))),
        };
        let group = MuscleGroup::from_slug(&rm.group)
            .ok_or_else(|| ModelError::Schema(format!("unknown group {:?}", rm.group)))?;
        let attachments = rm
            .attachments
            .iter()
            .map(|a| {
                SegmentKind::from_slug(&a.segment)
                    .map(|segment| Attachment { segment, point: a.point })
                    .ok_or_else(|| ModelError::Schema(format!("unknown segment {:?}", a.segment)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let spanned_dofs = rm
            .spanned_dofs
            .iter()
            .map(|d| {
                dof_from_relative(d, side)
                    .ok_or_else(|| ModelError::Schema(format!("unknown dof {d:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;

        let f_max = match (rm.pcsa_cm2, rm.hill.f_max_n) {
            (Some(pcsa), _) => pcsa * raw.specific_tension_n_per_cm2,
            (None, Some(f)) => f,
            (None, None) => {
                return Err(ModelError::Schema(format!(
                    "muscle {} needs pcsa_cm2 or hill.f_max_n",
                    rm.name
                )))
            }
        };
        let mut probe = MuscleDefinition {
            name: rm.name.clone(),
            group,
            side,
            attachments,
            spanned_dofs,
            hill: HillParameters { f_max: 1.0, v_max: 1.0, a: 0.25, b: 0.25, l0: 1.0 },
            pcsa_cm2: rm.pcsa_cm2,
        };
        let l0 = match rm.hill.l0_m {
            Some(l0) => l0,
            None => {
                let neutral_len = muscle_length(&probe, &neutral);
                if !(neutral_len > 0.0) {
                    return Err(ModelError::Schema(format!(
                        "muscle {} has zero neutral path length",
                        rm.name
                    )));
                }
                neutral_len * rm.l0_slack_factor.unwrap_or(1.0)
            }
        };
        let v_max = rm.hill.v_max_m_per_s.unwrap_or(10.0 * l0);
        let a = rm.hill.a_n.unwrap_or(0.25 * f_max);
        let mut b = rm.hill.b_m_per_s.unwrap_or(a * v_max / f_max);
        let lhs = a * v_max;
        let rhs = b * f_max;
        if (lhs - rhs).abs() > 1e-6 * lhs.abs().max(rhs.abs()) {
            log::warn!(
                "muscle {}: rescaling b from {b} to {} to restore a*v_max = b*f_max",
                rm.name,
                a * v_max / f_max
            );
            b = a * v_max / f_max;
        }
        probe.hill = HillParameters { f_max, v_max, a, b, l0 };
        muscles.push(probe);
    }
    let model = MusculoskeletalModel {
        muscles,
        specific_tension: raw.specific_tension_n_per_cm2,
        version: raw.version,
        reference_stature: reference.stature,
    };
    model.validate()?;
    Ok(model)
}

// ---------------------------------------------------------------------------
// Bundled default model

struct Line {
    name: &'static str,
    group: MuscleGroup,
    attachments: &'static [(SegmentKind, Vec3)],
    dofs: &'static [&'static str],
    pcsa_cm2: f64,
    slack: f64,
}

/// Left-side muscle lines of the bundled model; the right side mirrors the
/// x coordinate. Coordinates are segment-local meters on the reference
/// skeleton (left = +x, up = +y, forward = +z; limb frames originate at the
/// proximal joint).
const DEFAULT_LINES: [Line; 12] = [
    Line {
        name: "deltoideus_anterior",
        group: MuscleGroup::Deltoideus,
        attachments: &[
            (SegmentKind::Trunk, [0.18, 0.38, 0.04]),
            (SegmentKind::UpperArm, [0.0, -0.13, 0.025]),
        ],
        dofs: &["shoulder_flexion"],
        pcsa_cm2: 14.0,
        slack: 1.0,
    },
    Line {
        name: "deltoideus_medial",
        group: MuscleGroup::Deltoideus,
        attachments: &[
            (SegmentKind::Trunk, [0.21, 0.41, 0.0]),
            (SegmentKind::UpperArm, [0.01, -0.13, 0.0]),
        ],
        dofs: &["shoulder_abduction"],
        pcsa_cm2: 16.0,
        slack: 1.0,
    },
    Line {
        name: "pectoralis_major",
        group: MuscleGroup::PectoralisMajor,
        attachments: &[
            (SegmentKind::Trunk, [0.04, 0.30, 0.06]),
            (SegmentKind::UpperArm, [-0.01, -0.06, 0.02]),
        ],
        dofs: &["shoulder_flexion", "shoulder_abduction"],
        pcsa_cm2: 25.0,
        slack: 1.0,
    },
    Line {
        name: "latissimus_dorsi",
        group: MuscleGroup::LatissimusDorsi,
        attachments: &[
            (SegmentKind::Trunk, [0.03, 0.12, -0.07]),
            (SegmentKind::UpperArm, [-0.005, -0.07, -0.015]),
        ],
        dofs: &["shoulder_flexion", "shoulder_abduction"],
        pcsa_cm2: 20.0,
        slack: 1.25,
    },
    Line {
        name: "biceps_brachii",
        group: MuscleGroup::BicepsBrachiiBrachialis,
        attachments: &[
            (SegmentKind::Trunk, [0.17, 0.37, 0.05]),
            (SegmentKind::Forearm, [0.0, -0.045, 0.025]),
        ],
        dofs: &["shoulder_flexion", "elbow_flexion"],
        pcsa_cm2: 10.0,
        slack: 1.0,
    },
    Line {
        name: "brachialis",
        group: MuscleGroup::BicepsBrachiiBrachialis,
        attachments: &[
            (SegmentKind::UpperArm, [0.0, -0.19, 0.02]),
            (SegmentKind::Forearm, [0.0, -0.04, 0.022]),
        ],
        dofs: &["elbow_flexion"],
        pcsa_cm2: 10.0,
        slack: 1.0,
    },
    Line {
        name: "triceps_brachii",
        group: MuscleGroup::TricepsBrachii,
        attachments: &[
            (SegmentKind::Trunk, [0.185, 0.345, -0.035]),
            (SegmentKind::Forearm, [0.0, 0.02, -0.035]),
        ],
        dofs: &["shoulder_flexion", "elbow_flexion"],
        pcsa_cm2: 18.0,
        slack: 1.3,
    },
    Line {
        name: "gluteus_maximus",
        group: MuscleGroup::GluteusMaximus,
        attachments: &[
            (SegmentKind::Pelvis, [0.05, 0.06, -0.10]),
            (SegmentKind::Thigh, [0.0, -0.18, -0.035]),
        ],
        dofs: &["hip_flexion"],
        pcsa_cm2: 45.0,
        slack: 1.2,
    },
    Line {
        name: "ischiocrurales_long",
        group: MuscleGroup::Ischiocrurales,
        attachments: &[
            (SegmentKind::Pelvis, [0.07, -0.04, -0.06]),
            (SegmentKind::Shank, [0.0, -0.05, -0.03]),
        ],
        dofs: &["hip_flexion", "knee_flexion"],
        pcsa_cm2: 35.0,
        slack: 1.1,
    },
    Line {
        name: "ischiocrurales_short",
        group: MuscleGroup::Ischiocrurales,
        attachments: &[
            (SegmentKind::Thigh, [0.0, -0.28, -0.035]),
            (SegmentKind::Shank, [0.0, -0.045, -0.028]),
        ],
        dofs: &["knee_flexion"],
        pcsa_cm2: 25.0,
        slack: 1.05,
    },
    Line {
        name: "rectus_femoris",
        group: MuscleGroup::QuadricepsFemoris,
        attachments: &[
            (SegmentKind::Pelvis, [0.09, 0.01, 0.06]),
            (SegmentKind::Shank, [0.0, -0.055, 0.04]),
        ],
        dofs: &["hip_flexion", "knee_flexion"],
        pcsa_cm2: 40.0,
        slack: 1.0,
    },
    Line {
        name: "vastus",
        group: MuscleGroup::QuadricepsFemoris,
        attachments: &[
            (SegmentKind::Thigh, [0.0, -0.20, 0.035]),
            (SegmentKind::Shank, [0.0, -0.05, 0.04]),
        ],
        dofs: &["knee_flexion"],
        pcsa_cm2: 45.0,
        slack: 1.1,
    },
];

/// Builds the bundled 24-muscle default model (12 lines per side).
pub fn default_model() -> MusculoskeletalModel {
    let specific_tension = default_specific_tension();
    let reference = reference_scale();
    let neutral = build_pose(&[0.0; DOF_COUNT], &reference);
    let mut muscles = Vec::with_capacity(24);
    for side in Side::BOTH {
        let (suffix, mirror) = match side {
            Side::Left => ("_l", 1.0),
            Side::Right => ("_r", -1.0),
        };
        for line in &DEFAULT_LINES {
            let attachments: Vec<Attachment> = line
                .attachments
                .iter()
                .map(|&(segment, p)| Attachment {
                    segment,
                    point: [p[0] * mirror, p[1], p[2]],
                })
                .collect();
            let spanned_dofs: Vec<DofId> = line
                .dofs
                .iter()
                .map(|d| dof_from_relative(d, side).expect("known dof name"))
                .collect();
            let f_max = line.pcsa_cm2 * specific_tension;
            let mut m = MuscleDefinition {
                name: format!("{}{}", line.name, suffix),
                group: line.group,
                side,
                attachments,
                spanned_dofs,
                hill: HillParameters { f_max, v_max: 1.0, a: 1.0, b: 1.0, l0: 1.0 },
                pcsa_cm2: Some(line.pcsa_cm2),
            };
            let l0 = muscle_length(&m, &neutral) * line.slack;
            let v_max = 10.0 * l0;
            let a = 0.25 * f_max;
            let b = a * v_max / f_max;
            m.hill = HillParameters { f_max, v_max, a, b, l0 };
            muscles.push(m);
        }
    }
    let model = MusculoskeletalModel {
        muscles,
        specific_tension,
        version: default_version(),
        reference_stature: reference.stature,
    };
    model.validate().expect("bundled model passes its own invariants");
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::JointAngleFrame;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn bundled_model_loads_and_validates() {
        let m = default_model();
        assert_eq!(m.muscles.len(), 24);
        m.validate().unwrap();
        // Every muscle optimal length is its (slack-scaled) neutral length.
        for mu in &m.muscles {
            assert!(mu.hill.l0 > 0.05 && mu.hill.l0 < 0.7, "{} l0 {}", mu.name, mu.hill.l0);
            mu.hill.validate().unwrap();
        }
    }

    #[test]
    fn missing_group_is_uncovered() {
        let mut m = default_model();
        m.muscles.retain(|mu| !(mu.group == MuscleGroup::GluteusMaximus && mu.side == Side::Left));
        match m.validate() {
            Err(ModelError::UncoveredGroup { group, side }) => {
                assert_eq!(group, "gluteus_maximus");
                assert_eq!(side, Side::Left);
            }
            other => panic!("expected UncoveredGroup, got {other:?}"),
        }
    }

    #[test]
    fn pcsa_drives_f_max() {
        let json = r#"{
          "muscles": [{
            "name": "toy", "group": "deltoideus", "side": "left",
            "attachments": [
              {"segment": "trunk", "point": [0.18, 0.38, 0.04]},
              {"segment": "upper_arm", "point": [0.0, -0.13, 0.02]}
            ],
            "spanned_dofs": ["shoulder_flexion"],
            "pcsa_cm2": 20.0
          }]
        }"#;
        // A single-muscle file fails group coverage but f_max resolution
        // happens first; check through the error-free path with a full model
        // by probing the parse internals via a relaxed check.
        let err = load_model(json).unwrap_err();
        assert!(matches!(err, ModelError::UncoveredGroup { .. }));
        // Through the bundled model instead: pcsa 14 * 30 = 420.
        let m = default_model();
        let ad = m.muscles.iter().find(|mu| mu.name == "deltoideus_anterior_l").unwrap();
        assert_eq!(ad.hill.f_max, 14.0 * 30.0);
        assert_eq!(20.0 * 30.0, 600.0);
    }

    #[test]
    fn duplicate_muscle_is_rejected() {
        let mut m = default_model();
        let dup = m.muscles[0].clone();
        m.muscles.push(dup);
        assert!(matches!(m.validate(), Err(ModelError::DuplicateMuscle(_))));
    }

    fn two_point_toy(points: [(SegmentKind, Vec3); 2]) -> MuscleDefinition {
        MuscleDefinition {
            name: "toy".into(),
            group: MuscleGroup::Deltoideus,
            side: Side::Left,
            attachments: points
                .iter()
                .map(|&(segment, point)| Attachment { segment, point })
                .collect(),
            spanned_dofs: vec![DofId::ElbowFlexionL],
            hill: HillParameters { f_max: 100.0, v_max: 1.0, a: 25.0, b: 0.25, l0: 0.3 },
            pcsa_cm2: None,
        }
    }

    #[test]
    fn muscle_length_simple_distances() {
        let scale = reference_scale();
        let pose = build_pose(&[0.0; DOF_COUNT], &scale);
        let m = two_point_toy([
            (SegmentKind::Trunk, [0.0, 0.0, 0.0]),
            (SegmentKind::Trunk, [0.0, 0.3, 0.0]),
        ]);
        assert!((muscle_length(&m, &pose) - 0.3).abs() < 1e-12);

        let mut m3 = m.clone();
        m3.attachments = vec![
            Attachment { segment: SegmentKind::Trunk, point: [0.0, 0.0, 0.0] },
            Attachment { segment: SegmentKind::Trunk, point: [0.0, 0.2, 0.0] },
            Attachment { segment: SegmentKind::Trunk, point: [0.0, 0.5, 0.0] },
        ];
        assert!((muscle_length(&m3, &pose) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn elbow_flexor_shortens_with_flexion() {
        let m = default_model();
        let scale = reference_scale();
        let brach = m.muscles.iter().find(|mu| mu.name == "brachialis_l").unwrap();
        let straight = build_pose(&[0.0; DOF_COUNT], &scale);
        let mut angles = [0.0; DOF_COUNT];
        angles[DofId::ElbowFlexionL as usize] = FRAC_PI_2;
        let bent = build_pose(&angles, &scale);
        assert!(
            muscle_length(brach, &bent) < muscle_length(brach, &straight),
            "elbow flexor must shorten from 0 to 90 degrees"
        );
    }

    #[test]
    fn pin_joint_moment_arm_matches_law_of_cosines() {
        // Both attachments on the limb axis around the elbow hinge: the
        // length follows the law of cosines and the moment arm is the
        // perpendicular distance p*q*sin(theta)/l.
        let scale = reference_scale();
        let l_ua = scale.bone_lengths[6];
        let p = 0.12; // distance above the elbow on the upper arm
        let q = 0.10; // distance below the elbow on the forearm
        let m = two_point_toy([
            (SegmentKind::UpperArm, [0.0, -(l_ua - p), 0.0]),
            (SegmentKind::Forearm, [0.0, -q, 0.0]),
        ]);
        let mut max_err: f64 = 0.0;
        for i in 0..50 {
            let theta = 0.05 + 2.55 * (i as f64) / 49.0;
            let mut angles = [0.0; DOF_COUNT];
            angles[DofId::ElbowFlexionL as usize] = theta;
            let r = moment_arm(&m, &angles, &scale, DofId::ElbowFlexionL).unwrap();
            let l = (p * p + q * q + 2.0 * p * q * theta.cos()).sqrt();
            let want = p * q * theta.sin() / l;
            max_err = max_err.max((r - want).abs());
        }
        assert!(max_err <= 1e-4, "max abs error {max_err}");
    }

    #[test]
    fn unspanned_geometry_gives_zero_arm() {
        // Declared as spanning the elbow but attached entirely to the trunk:
        // the path cannot depend on the elbow angle.
        let m = two_point_toy([
            (SegmentKind::Trunk, [0.05, 0.1, 0.0]),
            (SegmentKind::Trunk, [0.05, 0.4, 0.02]),
        ]);
        let scale = reference_scale();
        let r = moment_arm(&m, &[0.3; DOF_COUNT], &scale, DofId::ElbowFlexionL).unwrap();
        assert!(r.abs() < 1e-9);
    }

    #[test]
    fn dof_not_spanned_is_an_error() {
        let m = two_point_toy([
            (SegmentKind::UpperArm, [0.0, -0.2, 0.0]),
            (SegmentKind::Forearm, [0.0, -0.1, 0.0]),
        ]);
        let scale = reference_scale();
        assert!(matches!(
            moment_arm(&m, &[0.0; DOF_COUNT], &scale, DofId::KneeFlexionL),
            Err(ModelError::DofNotSpanned { .. })
        ));
    }

    #[test]
    fn moment_arm_sign_flips_under_mirroring() {
        // Mirror the attachment across the bend plane: the arm negates.
        let scale = reference_scale();
        let mk = |z: f64| {
            two_point_toy([
                (SegmentKind::UpperArm, [0.0, -0.2, z]),
                (SegmentKind::Forearm, [0.0, -0.1, z]),
            ])
        };
        let mut angles = [0.0; DOF_COUNT];
        angles[DofId::ElbowFlexionL as usize] = 0.8;
        let r_front = moment_arm(&mk(0.03), &angles, &scale, DofId::ElbowFlexionL).unwrap();
        let r_back = moment_arm(&mk(-0.03), &angles, &scale, DofId::ElbowFlexionL).unwrap();
        assert!(r_front > 0.0);
        assert!((r_front + r_back).abs() < 1e-6, "{r_front} vs {r_back}");
    }

    #[test]
    fn force_velocity_examples() {
        let p = HillParameters { f_max: 800.0, v_max: 4.0, a: 200.0, b: 1.0, l0: 0.4 };
        p.validate().unwrap();
        assert_eq!(force_velocity(0.0, &p), 800.0);
        assert!((force_velocity(4.0, &p)).abs() <= 1e-9 * p.f_max);
        // a = 0.25 f_max, b = 0.25 v_max, v = 0.25 v_max -> F = 0.375 f_max.
        let f = force_velocity(1.0, &p);
        assert!((f - 0.375 * p.f_max).abs() < 1e-9);
        // Lengthening clamps at f_max.
        assert_eq!(force_velocity(-0.5, &p), p.f_max);
        // Beyond v_max the force is zero.
        assert_eq!(force_velocity(5.0, &p), 0.0);
    }

    #[test]
    fn force_velocity_monotone_and_zero_at_vmax() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let f_max = rng.gen_range(50.0..3000.0);
            let v_max = rng.gen_range(0.5..8.0);
            let ratio = rng.gen_range(0.1..0.6);
            let a = ratio * f_max;
            let b = a * v_max / f_max;
            let p = HillParameters { f_max, v_max, a, b, l0: 0.3 };
            p.validate().unwrap();
            assert_eq!(force_velocity(0.0, &p), f_max);
            assert!(force_velocity(v_max, &p).abs() <= 1e-9 * f_max);
            let mut prev = f64::INFINITY;
            for k in 0..=100 {
                let v = v_max * k as f64 / 100.0;
                let f = force_velocity(v, &p);
                assert!(f <= prev + 1e-12 * f_max);
                prev = f;
            }
        }
    }

    #[test]
    fn force_length_examples() {
        let p = HillParameters { f_max: 1000.0, v_max: 3.0, a: 250.0, b: 0.75, l0: 0.3 };
        let (fl, fpe) = force_length(1.0, &p);
        assert_eq!(fl, 1.0);
        assert_eq!(fpe, 0.0);
        let (fl, _) = force_length(0.55, &p);
        assert!((fl - (-1.0f64).exp()).abs() < 1e-12);
        let (_, fpe) = force_length(1.2, &p);
        let want = 1000.0 * 0.05 * (1.0f64.exp() - 1.0);
        assert!((fpe - want).abs() < 1e-9);
        assert!((fpe - 0.0859 * 1000.0).abs() < 0.05 * 1000.0 * 0.01);
    }

    #[test]
    fn force_length_shape() {
        let p = HillParameters { f_max: 500.0, v_max: 3.0, a: 125.0, b: 0.75, l0: 0.3 };
        // Peak at 1, symmetric about it.
        for d in [0.1, 0.2, 0.35] {
            let (lo, _) = force_length(1.0 - d, &p);
            let (hi, _) = force_length(1.0 + d, &p);
            assert!((lo - hi).abs() < 1e-12);
            assert!(lo < 1.0);
        }
        // Passive: zero at or below optimum, increasing and convex above.
        assert_eq!(force_length(0.9, &p).1, 0.0);
        let f1 = force_length(1.1, &p).1;
        let f2 = force_length(1.2, &p).1;
        let f3 = force_length(1.3, &p).1;
        assert!(f1 > 0.0 && f2 > f1 && f3 > f2);
        assert!(f3 - f2 > f2 - f1, "convexity");
    }

    #[test]
    fn muscle_length_invariant_under_rigid_transform() {
        let model = default_model();
        let scale = reference_scale();
        let mut angles = [0.0; DOF_COUNT];
        angles[DofId::ShoulderFlexionL as usize] = 0.9;
        angles[DofId::KneeFlexionR as usize] = 1.2;
        let pose = build_pose(&angles, &scale);
        let mut moved = pose.clone();
        // Rotate about y and translate every segment frame.
        let yaw = {
            let (s, c) = (0.7f64).sin_cos();
            [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
        };
        let shift = [1.0, 2.0, -0.5];
        for i in 0..crate::kinematics::SEGMENT_COUNT {
            moved.seg_origin[i] = crate::kinematics::vadd(
                crate::kinematics::mat_vec(&yaw, moved.seg_origin[i]),
                shift,
            );
            moved.seg_rot[i] = crate::kinematics::mat_mul(&yaw, &moved.seg_rot[i]);
        }
        for m in &model.muscles {
            let a = muscle_length(m, &pose);
            let b = muscle_length(m, &moved);
            assert!((a - b).abs() < 1e-12, "{}", m.name);
        }
    }

    /// Intended moment-arm signs of the bundled model at a mid-range pose.
    #[test]
    fn default_model_moment_arm_signs() {
        let model = default_model();
        let scale = reference_scale();
        let mut angles = [0.0; DOF_COUNT];
        // Mid-range pose keeps every arm away from degenerate zeros.
        for d in [
            DofId::ShoulderFlexionL,
            DofId::ShoulderFlexionR,
        ] {
            angles[d as usize] = 0.5;
        }
        for d in [DofId::ShoulderAbductionL, DofId::ShoulderAbductionR] {
            angles[d as usize] = 0.4;
        }
        for d in [DofId::ElbowFlexionL, DofId::ElbowFlexionR] {
            angles[d as usize] = 0.8;
        }
        for d in [DofId::HipFlexionL, DofId::HipFlexionR] {
            angles[d as usize] = 0.6;
        }
        for d in [DofId::KneeFlexionL, DofId::KneeFlexionR] {
            angles[d as usize] = 0.9;
        }
        let expect: &[(&str, &str, f64)] = &[
            ("deltoideus_anterior", "shoulder_flexion", 1.0),
            ("deltoideus_medial", "shoulder_abduction", 1.0),
            ("pectoralis_major", "shoulder_flexion", 1.0),
            ("pectoralis_major", "shoulder_abduction", -1.0),
            ("latissimus_dorsi", "shoulder_flexion", -1.0),
            ("latissimus_dorsi", "shoulder_abduction", -1.0),
            ("biceps_brachii", "shoulder_flexion", 1.0),
            ("biceps_brachii", "elbow_flexion", 1.0),
            ("brachialis", "elbow_flexion", 1.0),
            ("triceps_brachii", "shoulder_flexion", -1.0),
            ("triceps_brachii", "elbow_flexion", -1.0),
            ("gluteus_maximus", "hip_flexion", -1.0),
            ("ischiocrurales_long", "hip_flexion", -1.0),
            ("ischiocrurales_long", "knee_flexion", 1.0),
            ("ischiocrurales_short", "knee_flexion", 1.0),
            ("rectus_femoris", "hip_flexion", 1.0),
            ("rectus_femoris", "knee_flexion", -1.0),
            ("vastus", "knee_flexion", -1.0),
        ];
        for side in Side::BOTH {
            let suffix = if side == Side::Left { "_l" } else { "_r" };
            for &(base, dof_name, sign) in expect {
                let name = format!("{base}{suffix}");
                let m = model.muscles.iter().find(|mu| mu.name == name).unwrap();
                let dof = dof_from_relative(dof_name, side).unwrap();
                let r = moment_arm(m, &angles, &scale, dof).unwrap();
                assert!(
                    r * sign > 0.004,
                    "{name} about {dof_name}: expected sign {sign}, got r = {r}"
                );
            }
        }
    }

    #[test]
    fn scaled_model_keeps_neutral_normalized_length() {
        let model = default_model();
        let subject = reference_scale().scaled(1.1);
        let scaled = model.scaled_to(&subject);
        let pose = build_pose(&[0.0; DOF_COUNT], &subject);
        for m in &scaled.muscles {
            let slack = model
                .muscles
                .iter()
                .find(|mu| mu.name == m.name)
                .map(|mu| {
                    let neutral = build_pose(&[0.0; DOF_COUNT], &reference_scale());
                    mu.hill.l0 / muscle_length(mu, &neutral)
                })
                .unwrap();
            let lnorm = muscle_length(m, &pose) / m.hill.l0;
            assert!(
                (lnorm - 1.0 / slack).abs() < 1e-9,
                "{}: lnorm {lnorm}, slack {slack}",
                m.name
            );
            m.hill.validate().unwrap();
        }
    }
}
