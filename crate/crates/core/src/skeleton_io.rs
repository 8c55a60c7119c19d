//! Skeleton motion stream ingestion, resampling, smoothing, and body-scale
//! estimation.
//!
//! Streams are line-delimited JSON (one frame per line) on a canonical
//! 21-joint skeleton in a right-handed, y-up world frame with positions in
//! meters. The subject's left points along +x and forward along +z in the
//! neutral pose. Timestamps are integer milliseconds; resampled streams
//! additionally carry an exact uniform time basis (`t0 + i / rate_hz`) so
//! that downstream differentiation is not quantized by the millisecond grid.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Deserialize;
use thiserror::Error;

use crate::export::fmt_sig9;

/// Canonical skeleton joints, in declaration order (stable codes 0-20).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum JointId {
    Pelvis = 0,
    SpineNavel,
    SpineChest,
    Neck,
    Head,
    ClavicleL,
    ShoulderL,
    ElbowL,
    WristL,
    HipL,
    KneeL,
    AnkleL,
    FootL,
    ClavicleR,
    ShoulderR,
    ElbowR,
    WristR,
    HipR,
    KneeR,
    AnkleR,
    FootR,
}

/// Number of canonical joints.
pub const JOINT_COUNT: usize = 21;

impl JointId {
    /// All joints in code order.
    pub const ALL: [JointId; JOINT_COUNT] = [
        JointId::Pelvis,
        JointId::SpineNavel,
        JointId::SpineChest,
        JointId::Neck,
        JointId::Head,
        JointId::ClavicleL,
        JointId::ShoulderL,
        JointId::ElbowL,
        JointId::WristL,
        JointId::HipL,
        JointId::KneeL,
        JointId::AnkleL,
        JointId::FootL,
        JointId::ClavicleR,
        JointId::ShoulderR,
        JointId::ElbowR,
        JointId::WristR,
        JointId::HipR,
        JointId::KneeR,
        JointId::AnkleR,
        JointId::FootR,
    ];

    /// Canonical name used in canonical-jsonl records.
    pub fn name(self) -> &'static str {
        match self {
            JointId::Pelvis => "PELVIS",
            JointId::SpineNavel => "SPINE_NAVEL",
            JointId::SpineChest => "SPINE_CHEST",
            JointId::Neck => "NECK",
            JointId::Head => "HEAD",
            JointId::ClavicleL => "CLAVICLE_L",
            JointId::ShoulderL => "SHOULDER_L",
            JointId::ElbowL => "ELBOW_L",
            JointId::WristL => "WRIST_L",
            JointId::HipL => "HIP_L",
            JointId::KneeL => "KNEE_L",
            JointId::AnkleL => "ANKLE_L",
            JointId::FootL => "FOOT_L",
            JointId::ClavicleR => "CLAVICLE_R",
            JointId::ShoulderR => "SHOULDER_R",
            JointId::ElbowR => "ELBOW_R",
            JointId::WristR => "WRIST_R",
            JointId::HipR => "HIP_R",
            JointId::KneeR => "KNEE_R",
            JointId::AnkleR => "ANKLE_R",
            JointId::FootR => "FOOT_R",
        }
    }

    fn from_canonical_name(name: &str) -> Option<JointId> {
        JointId::ALL.iter().copied().find(|j| j.name() == name)
    }

    /// Maps an Azure-style 32-joint name onto the canonical set. Hand, face
    /// and ear joints have no canonical counterpart and return `None`.
    fn from_kinect32_name(name: &str) -> Option<JointId> {
        Some(match name {
            "PELVIS" => JointId::Pelvis,
            "SPINE_NAVEL" => JointId::SpineNavel,
            "SPINE_CHEST" => JointId::SpineChest,
            "NECK" => JointId::Neck,
            "HEAD" => JointId::Head,
            "CLAVICLE_LEFT" => JointId::ClavicleL,
            "SHOULDER_LEFT" => JointId::ShoulderL,
            "ELBOW_LEFT" => JointId::ElbowL,
            "WRIST_LEFT" => JointId::WristL,
            "HIP_LEFT" => JointId::HipL,
            "KNEE_LEFT" => JointId::KneeL,
            "ANKLE_LEFT" => JointId::AnkleL,
            "FOOT_LEFT" => JointId::FootL,
            "CLAVICLE_RIGHT" => JointId::ClavicleR,
            "SHOULDER_RIGHT" => JointId::ShoulderR,
            "ELBOW_RIGHT" => JointId::ElbowR,
            "WRIST_RIGHT" => JointId::WristR,
            "HIP_RIGHT" => JointId::HipR,
            "KNEE_RIGHT" => JointId::KneeR,
            "ANKLE_RIGHT" => JointId::AnkleR,
            "FOOT_RIGHT" => JointId::FootR,
            _ => return None,
        })
    }
}

/// Parent->child bone pairs of the canonical skeleton (20 bones).
pub const BONES: [(JointId, JointId); 20] = [
    (JointId::Pelvis, JointId::SpineNavel),
    (JointId::SpineNavel, JointId::SpineChest),
    (JointId::SpineChest, JointId::Neck),
    (JointId::Neck, JointId::Head),
    (JointId::SpineChest, JointId::ClavicleL),
    (JointId::ClavicleL, JointId::ShoulderL),
    (JointId::ShoulderL, JointId::ElbowL),
    (JointId::ElbowL, JointId::WristL),
    (JointId::Pelvis, JointId::HipL),
    (JointId::HipL, JointId::KneeL),
    (JointId::KneeL, JointId::AnkleL),
    (JointId::AnkleL, JointId::FootL),
    (JointId::SpineChest, JointId::ClavicleR),
    (JointId::ClavicleR, JointId::ShoulderR),
    (JointId::ShoulderR, JointId::ElbowR),
    (JointId::ElbowR, JointId::WristR),
    (JointId::Pelvis, JointId::HipR),
    (JointId::HipR, JointId::KneeR),
    (JointId::KneeR, JointId::AnkleR),
    (JointId::AnkleR, JointId::FootR),
];

/// One tracked frame: timestamp, 21 joint positions, per-joint confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonFrame {
    /// Timestamp in integer milliseconds.
    pub t_ms: u64,
    /// World positions in meters, indexed by `JointId` code.
    pub positions: [[f64; 3]; JOINT_COUNT],
    /// Tracking confidence in [0,1]; defaults to 1.0 when absent.
    pub confidence: [f64; JOINT_COUNT],
}

impl SkeletonFrame {
    pub fn position(&self, j: JointId) -> [f64; 3] {
        self.positions[j as usize]
    }
}

/// Stream format accepted by [`parse_session`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamFormat {
    /// Canonical 21-joint records.
    CanonicalJsonl,
    /// Azure-style 32-joint records; extra joints are dropped by name.
    Kinect32Jsonl,
}

/// A sequence of skeleton frames plus its (nominal or exact) sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionStream {
    pub frames: Vec<SkeletonFrame>,
    /// Sampling rate in Hz. Nominal for raw parsed streams; exact for
    /// resampled or generated streams (`uniform` set).
    pub rate_hz: f64,
    /// True when the stream lies on an exact uniform grid `t0 + i/rate_hz`.
    /// Stored `t_ms` values are then the rounded representation of that grid.
    pub uniform: bool,
}

impl SessionStream {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Duration between the first and last frame, in seconds.
    pub fn duration_s(&self) -> f64 {
        match (self.frames.first(), self.frames.last()) {
            (Some(a), Some(b)) => {
                if self.uniform {
                    (self.frames.len() as f64 - 1.0) / self.rate_hz
                } else {
                    (b.t_ms - a.t_ms) as f64 / 1000.0
                }
            }
            _ => 0.0,
        }
    }

    /// Exact time of frame `i` in seconds.
    pub fn time_s(&self, i: usize) -> f64 {
        if self.uniform {
            self.frames[0].t_ms as f64 / 1000.0 + i as f64 / self.rate_hz
        } else {
            self.frames[i].t_ms as f64 / 1000.0
        }
    }

    /// Frame spacing in seconds; meaningful for uniform streams.
    pub fn dt_s(&self) -> f64 {
        1.0 / self.rate_hz
    }
}

/// Per-bone lengths and a stature estimate for one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyScale {
    /// Lengths in meters, indexed like [`BONES`].
    pub bone_lengths: [f64; 20],
    /// Spine chain plus mean leg chain, in meters. A chain metric, not a
    /// full standing height.
    pub stature: f64,
}

impl BodyScale {
    pub fn bone_length(&self, parent: JointId, child: JointId) -> Option<f64> {
        BONES
            .iter()
            .position(|&(p, c)| p == parent && c == child)
            .map(|i| self.bone_lengths[i])
    }

    /// Uniformly scaled copy (all bone lengths and the stature multiplied).
    pub fn scaled(&self, factor: f64) -> BodyScale {
        let mut bone_lengths = self.bone_lengths;
        for l in &mut bone_lengths {
            *l *= factor;
        }
        BodyScale {
            bone_lengths,
            stature: self.stature * factor,
        }
    }
}

#[derive(Debug, Error)]
pub enum SkeletonIoError {
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("non-monotonic timestamp at line {line}")]
    NonMonotonicTimestamp { line: usize },
    #[error("missing joint {name} at line {line}")]
    MissingJoint { name: String, line: usize },
    #[error("too few frames: need at least {needed}, got {got}")]
    TooFewFrames { needed: usize, got: usize },
    #[error("smoothing window {window} larger than frame count {frames}")]
    WindowTooLarge { window: usize, frames: usize },
    #[error("smoothing window must be an odd positive integer, got {0}")]
    WindowNotOdd(usize),
    #[error("sampling rate must be positive, got {0}")]
    BadRate(f64),
}

#[derive(Deserialize)]
struct RawRecord {
    t_ms: u64,
    joints: BTreeMap<String, [f64; 3]>,
    #[serde(default)]
    conf: Option<BTreeMap<String, f64>>,
}

/// Detects the stream format from joint names on the first non-empty line.
pub fn sniff_format(input: &str) -> StreamFormat {
    for line in input.lines() {
        if line.trim().is_empty() {
            continue;
        }
        if line.contains("\"SHOULDER_LEFT\"") || line.contains("\"HAND_LEFT\"") {
            return StreamFormat::Kinect32Jsonl;
        }
        break;
    }
    StreamFormat::CanonicalJsonl
}

/// Parses a line-delimited session stream.
///
/// Unknown record fields and (for kinect32) unmapped joints are ignored;
/// confidence defaults to 1.0. Timestamps must be strictly increasing.
pub fn parse_session(input: &str, format: StreamFormat) -> Result<SessionStream, SkeletonIoError> {
    let mut frames = Vec::new();
    let mut last_t: Option<u64> = None;
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(line).map_err(|e| SkeletonIoError::MalformedRecord {
                line: line_no,
                reason: e.to_string(),
            })?;
        if let Some(prev) = last_t {
            if raw.t_ms <= prev {
                return Err(SkeletonIoError::NonMonotonicTimestamp { line: line_no });
            }
        }
        last_t = Some(raw.t_ms);

        let mut positions = [[f64::NAN; 3]; JOINT_COUNT];
        let mut confidence = [1.0; JOINT_COUNT];
        let mut seen = [false; JOINT_COUNT];
        for (name, pos) in &raw.joints {
            let joint = match format {
                StreamFormat::CanonicalJsonl => JointId::from_canonical_name(name),
                StreamFormat::Kinect32Jsonl => JointId::from_kinect32_name(name),
            };
            let Some(joint) = joint else { continue };
            if !pos.iter().all(|c| c.is_finite()) {
                return Err(SkeletonIoError::MalformedRecord {
                    line: line_no,
                    reason: format!("non-finite position for {name}"),
                });
            }
            positions[joint as usize] = *pos;
            seen[joint as usize] = true;
            if let Some(conf) = &raw.conf {
                if let Some(&c) = conf.get(name) {
                    confidence[joint as usize] = c.clamp(0.0, 1.0);
                }
            }
        }
        for j in JointId::ALL {
            if !seen[j as usize] {
                return Err(SkeletonIoError::MissingJoint {
                    name: j.name().to_string(),
                    line: line_no,
                });
            }
        }
        frames.push(SkeletonFrame {
            t_ms: raw.t_ms,
            positions,
            confidence,
        });
    }
    let rate_hz = nominal_rate(&frames);
    Ok(SessionStream {
        frames,
        rate_hz,
        uniform: false,
    })
}

fn nominal_rate(frames: &[SkeletonFrame]) -> f64 {
    if frames.len() < 2 {
        return 0.0;
    }
    let mut gaps: Vec<u64> = frames.windows(2).map(|w| w[1].t_ms - w[0].t_ms).collect();
    gaps.sort_unstable();
    let median = gaps[gaps.len() / 2] as f64;
    if median > 0.0 {
        1000.0 / median
    } else {
        0.0
    }
}

/// Serializes a stream as canonical-jsonl. Floats are written with 9
/// significant digits; `parse` then `serialize` is the identity on streams
/// already in that representation.
pub fn serialize_session(s: &SessionStream) -> String {
    let mut out = String::new();
    for f in &s.frames {
        let _ = write!(out, "{{\"t_ms\": {}, \"joints\": {{", f.t_ms);
        for (i, j) in JointId::ALL.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let p = f.positions[*j as usize];
            let _ = write!(
                out,
                "\"{}\": [{}, {}, {}]",
                j.name(),
                fmt_sig9(p[0]),
                fmt_sig9(p[1]),
                fmt_sig9(p[2])
            );
        }
        out.push_str("}");
        if f.confidence.iter().any(|&c| c != 1.0) {
            out.push_str(", \"conf\": {");
            for (i, j) in JointId::ALL.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "\"{}\": {}", j.name(), fmt_sig9(f.confidence[*j as usize]));
            }
            out.push_str("}");
        }
        out.push_str("}\n");
    }
    out
}

/// Resamples onto a uniform grid spanning `[t_first, t_last]` at `rate_hz`.
///
/// Positions are linearly interpolated per component; confidence takes the
/// minimum of the two bracketing frames. Endpoint positions are preserved
/// exactly. The output carries the exact grid basis (`uniform = true`).
pub fn resample(s: &SessionStream, rate_hz: f64) -> Result<SessionStream, SkeletonIoError> {
    if !(rate_hz > 0.0) || !rate_hz.is_finite() {
        return Err(SkeletonIoError::BadRate(rate_hz));
    }
    if s.frames.len() < 2 {
        return Err(SkeletonIoError::TooFewFrames {
            needed: 2,
            got: s.frames.len(),
        });
    }
    // Input frame times in seconds (exact grid when the input is uniform).
    let in_times: Vec<f64> = (0..s.frames.len()).map(|i| s.time_s(i)).collect();
    let t0 = in_times[0];
    let t_last = *in_times.last().unwrap();
    let span = t_last - t0;
    let n = (span * rate_hz + 1e-9).floor() as usize + 1;
    let dt = 1.0 / rate_hz;

    let mut frames = Vec::with_capacity(n);
    let mut cursor = 0usize;
    for i in 0..n {
        let t = t0 + i as f64 * dt;
        // Advance to the segment containing t.
        while cursor + 2 < in_times.len() && in_times[cursor + 1] <= t {
            cursor += 1;
        }
        let (a, b) = (&s.frames[cursor], &s.frames[cursor + 1]);
        let (ta, tb) = (in_times[cursor], in_times[cursor + 1]);
        let frame = if t <= ta {
            SkeletonFrame {
                t_ms: round_ms(t),
                ..a.clone()
            }
        } else if t >= tb {
            SkeletonFrame {
                t_ms: round_ms(t),
                ..b.clone()
            }
        } else {
            let u = (t - ta) / (tb - ta);
            let mut positions = [[0.0; 3]; JOINT_COUNT];
            let mut confidence = [1.0; JOINT_COUNT];
            for j in 0..JOINT_COUNT {
                for c in 0..3 {
                    positions[j][c] = a.positions[j][c] + u * (b.positions[j][c] - a.positions[j][c]);
                }
                confidence[j] = a.confidence[j].min(b.confidence[j]);
            }
            SkeletonFrame {
                t_ms: round_ms(t),
                positions,
                confidence,
            }
        };
        frames.push(frame);
    }
    // The millisecond rounding can collide at very high rates; nudge to keep
    // timestamps strictly increasing (the exact grid stays authoritative).
    for i in 1..frames.len() {
        if frames[i].t_ms <= frames[i - 1].t_ms {
            frames[i].t_ms = frames[i - 1].t_ms + 1;
        }
    }
    Ok(SessionStream {
        frames,
        rate_hz,
        uniform: true,
    })
}

fn round_ms(t_s: f64) -> u64 {
    (t_s * 1000.0).round().max(0.0) as u64
}

/// Centered moving average per position component with an odd window.
/// Edges use shrunken symmetric windows; timestamps are unchanged.
pub fn smooth(s: &SessionStream, window_frames: usize) -> Result<SessionStream, SkeletonIoError> {
    if window_frames == 0 || window_frames % 2 == 0 {
        return Err(SkeletonIoError::WindowNotOdd(window_frames));
    }
    if window_frames > s.frames.len() {
        return Err(SkeletonIoError::WindowTooLarge {
            window: window_frames,
            frames: s.frames.len(),
        });
    }
    let half = window_frames / 2;
    let n = s.frames.len();
    let mut out = s.clone();
    for i in 0..n {
        let r = half.min(i).min(n - 1 - i);
        let count = (2 * r + 1) as f64;
        for j in 0..JOINT_COUNT {
            for c in 0..3 {
                let sum: f64 = (i - r..=i + r).map(|k| s.frames[k].positions[j][c]).sum();
                out.frames[i].positions[j][c] = sum / count;
            }
        }
    }
    Ok(out)
}

/// Estimates per-bone lengths as the median joint-pair distance over frames,
/// plus the stature chain (spine chain + mean leg chain).
///
/// Requires at least 30 frames so a handful of tracking glitches cannot move
/// the median. Homologous left/right bones differing by more than 25% log a
/// warning but do not fail.
pub fn estimate_body_scale(s: &SessionStream) -> Result<BodyScale, SkeletonIoError> {
    if s.frames.len() < 30 {
        return Err(SkeletonIoError::TooFewFrames {
            needed: 30,
            got: s.frames.len(),
        });
    }
    let mut bone_lengths = [0.0; 20];
    let mut dists = Vec::with_capacity(s.frames.len());
    for (i, &(p, c)) in BONES.iter().enumerate() {
        dists.clear();
        for f in &s.frames {
            let a = f.position(p);
            let b = f.position(c);
            let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
            dists.push(d);
        }
        bone_lengths[i] = median(&mut dists);
    }
    // Homologous pairs: left block indices 4..12, right block 12..20.
    for k in 0..8 {
        let l = bone_lengths[4 + k];
        let r = bone_lengths[12 + k];
        let m = 0.5 * (l + r);
        if m > 0.0 && (l - r).abs() / m > 0.25 {
            log::warn!(
                "left/right bone length mismatch: {:?} {l:.3} m vs {:?} {r:.3} m",
                BONES[4 + k],
                BONES[12 + k]
            );
        }
    }
    Ok(BodyScale {
        bone_lengths,
        stature: stature_from_bones(&bone_lengths),
    })
}

pub(crate) fn stature_from_bones(bone_lengths: &[f64; 20]) -> f64 {
    // Spine chain pelvis->head.
    let spine: f64 = bone_lengths[0] + bone_lengths[1] + bone_lengths[2] + bone_lengths[3];
    // Leg chain hip->knee->ankle, averaged over sides.
    let leg_l = bone_lengths[9] + bone_lengths[10];
    let leg_r = bone_lengths[17] + bone_lengths[18];
    spine + 0.5 * (leg_l + leg_r)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
