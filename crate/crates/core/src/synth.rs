//! Deterministic synthetic skeleton sessions for the five validation
//! exercises, generated as parametric joint-angle trajectories run through
//! forward kinematics.
//!
//! Trajectories are idealized sinusoids, not motion-capture replays: the
//! validation needs controlled symmetry (squats), controlled asymmetry
//! (lunges, right leg forward unless mirrored) and controlled arm
//! involvement, not realism. Optional Gaussian noise is applied in angle
//! space, modeling execution variability rather than sensor noise; the same
//! seed always yields the bit-identical stream.

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::kinematics::{build_pose, reference_scale, DofId, DOF_COUNT};
use crate::skeleton_io::{BodyScale, SessionStream, SkeletonFrame, JointId, JOINT_COUNT};

/// The five validation exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExerciseKind {
    ArmCircles,
    Lunges,
    ShoulderSqueeze,
    SquatsArms,
    SquatsNoArms,
}

impl ExerciseKind {
    pub const ALL: [ExerciseKind; 5] = [
        ExerciseKind::ArmCircles,
        ExerciseKind::Lunges,
        ExerciseKind::ShoulderSqueeze,
        ExerciseKind::SquatsArms,
        ExerciseKind::SquatsNoArms,
    ];

    pub fn kebab_name(self) -> &'static str {
        match self {
            ExerciseKind::ArmCircles => "arm-circles",
            ExerciseKind::Lunges => "lunges",
            ExerciseKind::ShoulderSqueeze => "shoulder-squeeze",
            ExerciseKind::SquatsArms => "squats-arms",
            ExerciseKind::SquatsNoArms => "squats-no-arms",
        }
    }

    pub fn from_kebab(name: &str) -> Option<ExerciseKind> {
        ExerciseKind::ALL.iter().copied().find(|k| k.kebab_name() == name)
    }
}

/// Subject geometry for generation.
#[derive(Debug, Clone, PartialEq)]
pub enum SubjectScale {
    /// Uniform stature multiplier on the reference skeleton.
    Multiplier(f64),
    /// Explicit bone lengths.
    Bones(BodyScale),
}

impl SubjectScale {
    pub fn resolve(&self) -> BodyScale {
        match self {
            SubjectScale::Multiplier(f) => reference_scale().scaled(*f),
            SubjectScale::Bones(b) => b.clone(),
        }
    }
}

/// Generation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionParams {
    /// Repetitions per stream.
    pub reps: u32,
    /// Repetition frequency, Hz.
    pub cadence_hz: f64,
    /// Per-frame Gaussian joint-angle noise, degrees (sigma).
    pub noise_deg: f64,
    pub seed: u64,
    pub subject: SubjectScale,
    /// Swap the left/right trajectory blocks (lunge laterality).
    pub mirror: bool,
}

impl Default for MotionParams {
    fn default() -> Self {
        MotionParams {
            reps: 5,
            cadence_hz: 0.5,
            noise_deg: 0.0,
            seed: 0,
            subject: SubjectScale::Multiplier(1.0),
            mirror: false,
        }
    }
}

/// Generated streams are sampled at 60 Hz.
pub const GENERATION_RATE_HZ: f64 = 60.0;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("angle {angle} rad for {dof} outside its range [{lo}, {hi}]")]
    AngleOutOfRange {
        dof: &'static str,
        angle: f64,
        lo: f64,
        hi: f64,
    },
}

/// Places the 21 canonical joints from the pelvis outward for one angle
/// vector; the all-zero vector yields the neutral standing pose.
pub fn forward_kinematics(
    angles: &[f64; DOF_COUNT],
    scale: &BodyScale,
) -> Result<SkeletonFrame, SynthError> {
    for dof in DofId::ALL {
        let a = angles[dof as usize];
        let (lo, hi) = dof.range();
        if !(lo - 1e-9..=hi + 1e-9).contains(&a) {
            return Err(SynthError::AngleOutOfRange {
                dof: dof.name(),
                angle: a,
                lo,
                hi,
            });
        }
    }
    let pose = build_pose(angles, scale);
    Ok(SkeletonFrame {
        t_ms: 0,
        positions: pose.joints,
        confidence: [1.0; JOINT_COUNT],
    })
}

fn deg(d: f64) -> f64 {
    d.to_radians()
}

/// DOF trajectory of one exercise at rep phase `u` in [0,1) and absolute
/// time `t` seconds. Angles in radians, left side first.
fn trajectory(kind: ExerciseKind, u: f64, t: f64, cadence_hz: f64) -> [f64; DOF_COUNT] {
    use std::f64::consts::PI;
    let mut a = [0.0; DOF_COUNT];
    let half = (PI * u).sin();
    match kind {
        ExerciseKind::SquatsNoArms | ExerciseKind::SquatsArms => {
            for base in [0usize, 7usize] {
                a[base + 3] = deg(80.0) * half; // hip flexion
                a[base + 5] = deg(90.0) * half; // knee flexion
                a[base + 6] = deg(25.0) * half; // ankle dorsiflexion
            }
            if kind == ExerciseKind::SquatsArms {
                a[DofId::ShoulderFlexionL as usize] = deg(90.0);
                a[DofId::ShoulderFlexionR as usize] = deg(90.0);
            }
        }
        ExerciseKind::Lunges => {
            // Right leg forward: knee and hip work through the rep; the rear
            // leg holds hip extension.
            a[DofId::KneeFlexionR as usize] = deg(20.0) + deg(70.0) * half;
            a[DofId::HipFlexionR as usize] = deg(10.0) + deg(50.0) * half;
            a[DofId::HipFlexionL as usize] = deg(-20.0);
        }
        ExerciseKind::ArmCircles => {
            let wobble = deg(15.0) * (2.0 * PI * 4.0 * cadence_hz * t).sin();
            for base in [0usize, 7usize] {
                a[base] = wobble; // shoulder flexion oscillation
                a[base + 1] = deg(90.0); // shoulder abduction hold
            }
        }
        ExerciseKind::ShoulderSqueeze => {
            for base in [0usize, 7usize] {
                a[base] = deg(170.0); // arms overhead
                a[base + 2] = deg(90.0) * half; // elbow pull-down
            }
        }
    }
    a
}

fn mirror_angles(a: &[f64; DOF_COUNT]) -> [f64; DOF_COUNT] {
    let mut out = *a;
    for d in 0..7 {
        out.swap(d, d + 7);
    }
    out
}

/// Generates a 60 Hz session stream of `reps` trajectory cycles.
pub fn generate(kind: ExerciseKind, params: &MotionParams) -> SessionStream {
    let scale = params.subject.resolve();
    let rate = GENERATION_RATE_HZ;
    let frames_per_rep = (rate / params.cadence_hz).round().max(1.0) as usize;
    let total = frames_per_rep * params.reps.max(1) as usize;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(params.seed);
    let sigma = deg(params.noise_deg);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut frames = Vec::with_capacity(total);
    for i in 0..total {
        let u = (i % frames_per_rep) as f64 / frames_per_rep as f64;
        let t = i as f64 / rate;
        let mut angles = trajectory(kind, u, t, params.cadence_hz);
        if params.mirror {
            angles = mirror_angles(&angles);
        }
        if sigma > 0.0 {
            for d in DofId::ALL {
                let (lo, hi) = d.range();
                let noisy = angles[d as usize] + sigma * normal.sample(&mut rng);
                angles[d as usize] = noisy.clamp(lo, hi);
            }
        }
        let pose = build_pose(&angles, &scale);
        let mut positions = pose.joints;
        // Ground the pose: rest the lowest ankle/foot joint on y = 0.
        let floor = [JointId::AnkleL, JointId::AnkleR, JointId::FootL, JointId::FootR]
            .iter()
            .map(|&j| positions[j as usize][1])
            .fold(f64::INFINITY, f64::min);
        for p in &mut positions {
            p[1] -= floor;
        }
        frames.push(SkeletonFrame {
            t_ms: (i as f64 * 1000.0 / rate).round() as u64,
            positions,
            confidence: [1.0; JOINT_COUNT],
        });
    }
    SessionStream {
        frames,
        rate_hz: rate,
        uniform: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::compute_joint_angles;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn neutral_forward_kinematics_round_trips_to_zero() {
        let scale = reference_scale();
        let frame = forward_kinematics(&[0.0; DOF_COUNT], &scale).unwrap();
        let angles = compute_joint_angles(&frame, &scale).unwrap();
        assert!(angles.angles.iter().all(|a| a.abs() < 1e-9));
    }

    #[test]
    fn elbow_flexion_displaces_wrist_perpendicular() {
        let scale = reference_scale();
        let mut angles = [0.0; DOF_COUNT];
        angles[DofId::ElbowFlexionL as usize] = FRAC_PI_2;
        let frame = forward_kinematics(&angles, &scale).unwrap();
        let shoulder = frame.position(JointId::ShoulderL);
        let elbow = frame.position(JointId::ElbowL);
        let wrist = frame.position(JointId::WristL);
        let ua = [elbow[0] - shoulder[0], elbow[1] - shoulder[1], elbow[2] - shoulder[2]];
        let fa = [wrist[0] - elbow[0], wrist[1] - elbow[1], wrist[2] - elbow[2]];
        let dot = ua[0] * fa[0] + ua[1] * fa[1] + ua[2] * fa[2];
        assert!(dot.abs() < 1e-12);
        let fa_len = (fa[0] * fa[0] + fa[1] * fa[1] + fa[2] * fa[2]).sqrt();
        assert!((fa_len - scale.bone_lengths[7]).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_angle_is_rejected() {
        let scale = reference_scale();
        let mut angles = [0.0; DOF_COUNT];
        angles[DofId::KneeFlexionL as usize] = 3.0;
        assert!(matches!(
            forward_kinematics(&angles, &scale),
            Err(SynthError::AngleOutOfRange { .. })
        ));
    }

    #[test]
    fn squats_have_expected_length_and_knee_peaks() {
        let s = generate(ExerciseKind::SquatsNoArms, &MotionParams::default());
        assert_eq!(s.len(), 600);
        assert!(s.uniform);
        let scale = reference_scale();
        let angles: Vec<f64> = s
            .frames
            .iter()
            .map(|f| compute_joint_angles(f, &scale).unwrap().angles[DofId::KneeFlexionL as usize])
            .collect();
        // Five peaks, one per rep, each pi/2 within 1e-6.
        let mut peaks = 0;
        for i in 1..angles.len() - 1 {
            if angles[i] > angles[i - 1] && angles[i] >= angles[i + 1] && angles[i] > 1.0 {
                peaks += 1;
                assert!((angles[i] - FRAC_PI_2).abs() < 1e-6, "peak {i}: {}", angles[i]);
            }
        }
        assert_eq!(peaks, 5);
    }

    #[test]
    fn same_seed_is_bit_identical_distinct_seeds_differ() {
        let params = MotionParams {
            noise_deg: 1.0,
            seed: 7,
            ..Default::default()
        };
        let a = generate(ExerciseKind::Lunges, &params);
        let b = generate(ExerciseKind::Lunges, &params);
        assert_eq!(a, b);
        let c = generate(
            ExerciseKind::Lunges,
            &MotionParams { seed: 8, ..params },
        );
        assert_ne!(a, c);
    }

    #[test]
    fn squats_arms_differ_from_no_arms_only_in_shoulders() {
        let p = MotionParams::default();
        let with = generate(ExerciseKind::SquatsArms, &p);
        let without = generate(ExerciseKind::SquatsNoArms, &p);
        let scale = reference_scale();
        for (fa, fb) in with.frames.iter().zip(without.frames.iter()) {
            let aa = compute_joint_angles(fa, &scale).unwrap().angles;
            let ab = compute_joint_angles(fb, &scale).unwrap().angles;
            for d in DofId::ALL {
                let (x, y) = (aa[d as usize], ab[d as usize]);
                match d {
                    DofId::ShoulderFlexionL | DofId::ShoulderFlexionR => {
                        assert!((x - FRAC_PI_2).abs() < 1e-9 && y.abs() < 1e-9)
                    }
                    _ => assert!((x - y).abs() < 1e-9, "{:?}", d),
                }
            }
        }
    }

    #[test]
    fn zero_noise_squats_are_left_right_symmetric() {
        let s = generate(ExerciseKind::SquatsNoArms, &MotionParams::default());
        let scale = reference_scale();
        for f in &s.frames {
            let a = compute_joint_angles(f, &scale).unwrap().angles;
            for d in 0..7 {
                assert!((a[d] - a[d + 7]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn lunges_are_asymmetric_and_mirror_swaps_sides() {
        let s = generate(ExerciseKind::Lunges, &MotionParams::default());
        let scale = reference_scale();
        let mid = &s.frames[60];
        let a = compute_joint_angles(mid, &scale).unwrap().angles;
        assert!(a[DofId::KneeFlexionR as usize] > 1.0);
        assert!(a[DofId::KneeFlexionL as usize].abs() < 1e-6);
        assert!(a[DofId::HipFlexionL as usize] < -0.3);

        let m = generate(
            ExerciseKind::Lunges,
            &MotionParams { mirror: true, ..Default::default() },
        );
        let am = compute_joint_angles(&m.frames[60], &scale).unwrap().angles;
        assert!((am[DofId::KneeFlexionL as usize] - a[DofId::KneeFlexionR as usize]).abs() < 1e-9);
        assert!((am[DofId::HipFlexionR as usize] - a[DofId::HipFlexionL as usize]).abs() < 1e-9);
    }

    #[test]
    fn generated_frames_pass_stream_invariants_and_round_trip() {
        let params = MotionParams {
            noise_deg: 1.0,
            seed: 3,
            reps: 2,
            ..Default::default()
        };
        for kind in ExerciseKind::ALL {
            let s = generate(kind, &params);
            // Strictly increasing integer timestamps.
            for w in s.frames.windows(2) {
                assert!(w[1].t_ms > w[0].t_ms);
            }
            // Every frame is on the ground and finite.
            for f in &s.frames {
                assert!(f.positions.iter().flatten().all(|c| c.is_finite()));
                let min_y = f.positions.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
                assert!(min_y > -1e-9);
            }
        }
    }

    #[test]
    fn subject_multiplier_scales_the_skeleton() {
        let p = MotionParams {
            subject: SubjectScale::Multiplier(1.1),
            reps: 1,
            ..Default::default()
        };
        let s = generate(ExerciseKind::SquatsNoArms, &p);
        let est = crate::skeleton_io::estimate_body_scale(&s).unwrap();
        let want = reference_scale().scaled(1.1);
        for (a, b) in est.bone_lengths.iter().zip(want.bone_lengths.iter()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn exercise_names_round_trip() {
        for k in ExerciseKind::ALL {
            assert_eq!(ExerciseKind::from_kebab(k.kebab_name()), Some(k));
        }
        assert_eq!(ExerciseKind::from_kebab("situps"), None);
    }
}
