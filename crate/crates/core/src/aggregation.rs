//! Grouping of muscle work into the visualized muscle groups, limbs and
//! session totals, plus the windowed display series and color mapping.
//!
//! Per-frame work increments roll up by plain summation (no interpolation):
//! muscle -> (group, side) -> limb -> overall, always in the same fixed
//! order so the decomposition is exact. The display series is the median of
//! the trailing one second of per-frame group increments, normalized by the
//! running session maximum and mapped onto a turquoise-green-red gradient.

use crate::muscle_model::{MuscleGroup, MusculoskeletalModel, Side, GROUP_COUNT};
use crate::solver::WorkIncrementFrame;

/// A `(group, side)` cell; 16 exist in total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupKey {
    pub group: MuscleGroup,
    pub side: Side,
}

/// All 16 group-side cells in canonical order (group-major, left first).
pub const GROUP_KEYS: [GroupKey; 16] = {
    let mut keys = [GroupKey { group: MuscleGroup::Deltoideus, side: Side::Left }; 16];
    let groups = MuscleGroup::ALL;
    let mut g = 0;
    while g < GROUP_COUNT {
        keys[g * 2] = GroupKey { group: groups[g], side: Side::Left };
        keys[g * 2 + 1] = GroupKey { group: groups[g], side: Side::Right };
        g += 1;
    }
    keys
};

/// Index of a `(group, side)` cell in the canonical order.
pub fn group_index(group: MuscleGroup, side: Side) -> usize {
    group as usize * 2 + if side == Side::Right { 1 } else { 0 }
}

/// Work increments summed per (group, side), N·s.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupWorkFrame {
    pub t_ms: u64,
    pub values: [f64; 16],
}

/// Work increments per limb plus the overall combined value, N·s.
#[derive(Debug, Clone, PartialEq)]
pub struct LimbWorkFrame {
    pub t_ms: u64,
    pub left_upper: f64,
    pub right_upper: f64,
    pub left_lower: f64,
    pub right_lower: f64,
    pub overall: f64,
}

/// One group's display entry: trailing-window median, normalized value and
/// gradient color.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplayFrame {
    pub t_ms: u64,
    pub window_median: [f64; 16],
    pub normalized: [f64; 16],
    pub rgb: [[u8; 3]; 16],
}

/// What feeds the display median.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MedianInput {
    /// Median over the trailing per-frame work increments (default).
    Increments,
    /// Median over the trailing cumulative totals. Kept selectable for
    /// comparison; monotone by construction.
    CumulativeTotals,
}

/// Denominator for normalized display values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// Running maximum of any group's window median over the session so far.
    RunningMax,
    /// Fixed full-scale value.
    FixedScale(f64),
}

/// Display pipeline settings.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplayConfig {
    pub window_frames: usize,
    pub median_input: MedianInput,
    pub normalization: Normalization,
    /// Gradient anchors at normalized 0.0, 0.5 and 1.0.
    pub anchors: [[u8; 3]; 3],
}

impl Default for DisplayConfig {
    fn default() -> Self {
        DisplayConfig {
            window_frames: 60,
            median_input: MedianInput::Increments,
            normalization: Normalization::RunningMax,
            anchors: DEFAULT_ANCHORS,
        }
    }
}

/// Turquoise over green to red.
pub const DEFAULT_ANCHORS: [[u8; 3]; 3] = [[64, 224, 208], [0, 128, 0], [255, 0, 0]];

/// Sums one frame of muscle work increments into the 16 group cells.
pub fn group_frame(w: &WorkIncrementFrame, model: &MusculoskeletalModel) -> GroupWorkFrame {
    let mut values = [0.0; 16];
    for (muscle, inc) in model.muscles.iter().zip(w.increments.iter()) {
        values[group_index(muscle.group, muscle.side)] += inc;
    }
    GroupWorkFrame { t_ms: w.t_ms, values }
}

/// Rolls group values up into the four limbs; the overall value is the sum
/// of the four limbs in fixed order.
pub fn limb_frame(g: &GroupWorkFrame) -> LimbWorkFrame {
    let mut left_upper = 0.0;
    let mut right_upper = 0.0;
    let mut left_lower = 0.0;
    let mut right_lower = 0.0;
    for (i, key) in GROUP_KEYS.iter().enumerate() {
        let v = g.values[i];
        match (key.group.is_upper_limb(), key.side) {
            (true, Side::Left) => left_upper += v,
            (true, Side::Right) => right_upper += v,
            (false, Side::Left) => left_lower += v,
            (false, Side::Right) => right_lower += v,
        }
    }
    let overall = left_upper + right_upper + left_lower + right_lower;
    LimbWorkFrame {
        t_ms: g.t_ms,
        left_upper,
        right_upper,
        left_lower,
        right_lower,
        overall,
    }
}

/// Maps a normalized value through the piecewise-linear gradient with the
/// default anchors. Inputs are clamped to [0,1]; components round half-up.
pub fn color_map(normalized: f64) -> [u8; 3] {
    color_map_anchors(normalized, &DEFAULT_ANCHORS)
}

/// [`color_map`] with configurable anchors.
pub fn color_map_with(normalized: f64, cfg: &DisplayConfig) -> [u8; 3] {
    color_map_anchors(normalized, &cfg.anchors)
}

fn color_map_anchors(normalized: f64, anchors: &[[u8; 3]; 3]) -> [u8; 3] {
    let x = normalized.clamp(0.0, 1.0);
    let (lo, hi, t) = if x <= 0.5 {
        (anchors[0], anchors[1], x / 0.5)
    } else {
        (anchors[1], anchors[2], (x - 0.5) / 0.5)
    };
    let mut rgb = [0u8; 3];
    for c in 0..3 {
        let v = lo[c] as f64 + t * (hi[c] as f64 - lo[c] as f64);
        rgb[c] = v.round().clamp(0.0, 255.0) as u8;
    }
    rgb
}

/// Streaming display state: per-group trailing window plus the running
/// session maximum. Single writer per session.
#[derive(Debug, Clone)]
pub struct DisplayState {
    cfg: DisplayConfig,
    history: Vec<Vec<f64>>,
    cumulative: [f64; 16],
    running_max: f64,
    scratch: Vec<f64>,
}

impl DisplayState {
    pub fn new(cfg: DisplayConfig) -> Self {
        DisplayState {
            history: vec![Vec::new(); 16],
            cumulative: [0.0; 16],
            running_max: 0.0,
            scratch: Vec::with_capacity(cfg.window_frames),
            cfg,
        }
    }

    /// Feeds one group frame and returns the display values for it.
    pub fn push(&mut self, g: &GroupWorkFrame) -> DisplayFrame {
        let window = self.cfg.window_frames.max(1);
        let mut window_median = [0.0; 16];
        for i in 0..16 {
            self.cumulative[i] += g.values[i];
            let sample = match self.cfg.median_input {
                MedianInput::Increments => g.values[i],
                MedianInput::CumulativeTotals => self.cumulative[i],
            };
            let hist = &mut self.history[i];
            hist.push(sample);
            if hist.len() > window {
                hist.remove(0);
            }
            self.scratch.clear();
            self.scratch.extend_from_slice(hist);
            window_median[i] = median_in_place(&mut self.scratch);
        }
        let frame_max = window_median.iter().cloned().fold(0.0f64, f64::max);
        self.running_max = self.running_max.max(frame_max);
        let denom = match self.cfg.normalization {
            Normalization::RunningMax => self.running_max,
            Normalization::FixedScale(s) => s,
        };
        let mut normalized = [0.0; 16];
        let mut rgb = [[0u8; 3]; 16];
        for i in 0..16 {
            normalized[i] = if denom > 0.0 {
                (window_median[i] / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            rgb[i] = color_map_anchors(normalized[i], &self.cfg.anchors);
        }
        DisplayFrame {
            t_ms: g.t_ms,
            window_median,
            normalized,
            rgb,
        }
    }
}

/// Median by partial selection; even counts average the two middle values.
fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    let mid = n / 2;
    let (_, upper_mid, _) =
        values.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).expect("finite work values"));
    let upper = *upper_mid;
    if n % 2 == 1 {
        upper
    } else {
        let lower = values[..mid]
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Runs the display pipeline over a whole group stream.
pub fn window_display(groups: &[GroupWorkFrame], cfg: &DisplayConfig) -> Vec<DisplayFrame> {
    let mut state = DisplayState::new(cfg.clone());
    groups.iter().map(|g| state.push(g)).collect()
}

/// Accumulated work per muscle, group, limb, and overall for one session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSummary {
    pub duration_s: f64,
    pub frame_count: usize,
    pub infeasible_frames: usize,
    /// Muscle name and accumulated work, in model order.
    pub muscles: Vec<(String, f64)>,
    pub groups: [f64; 16],
    pub limbs: LimbTotals,
    pub overall: f64,
    /// Highest window median seen per group.
    pub peak_window: [f64; 16],
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LimbTotals {
    pub left_upper: f64,
    pub right_upper: f64,
    pub left_lower: f64,
    pub right_lower: f64,
}

/// Accumulates streams level by level so each total is the plain sum of its
/// own per-frame values.
pub fn accumulate_session(
    model: &MusculoskeletalModel,
    work: &[WorkIncrementFrame],
    groups: &[GroupWorkFrame],
    limbs: &[LimbWorkFrame],
    display: &[DisplayFrame],
    duration_s: f64,
    infeasible_frames: usize,
) -> SessionSummary {
    let mut muscle_totals = vec![0.0; model.muscles.len()];
    for frame in work {
        for (t, inc) in muscle_totals.iter_mut().zip(frame.increments.iter()) {
            *t += inc;
        }
    }
    let mut group_totals = [0.0; 16];
    for g in groups {
        for i in 0..16 {
            group_totals[i] += g.values[i];
        }
    }
    let mut limb_totals = LimbTotals::default();
    let mut overall = 0.0;
    for l in limbs {
        limb_totals.left_upper += l.left_upper;
        limb_totals.right_upper += l.right_upper;
        limb_totals.left_lower += l.left_lower;
        limb_totals.right_lower += l.right_lower;
        overall += l.overall;
    }
    let mut peak_window = [0.0f64; 16];
    for d in display {
        for i in 0..16 {
            peak_window[i] = peak_window[i].max(d.window_median[i]);
        }
    }
    SessionSummary {
        duration_s,
        frame_count: work.len(),
        infeasible_frames,
        muscles: model
            .muscles
            .iter()
            .map(|m| m.name.clone())
            .zip(muscle_totals)
            .collect(),
        groups: group_totals,
        limbs: limb_totals,
        overall,
        peak_window,
    }
}
