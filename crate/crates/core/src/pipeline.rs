//! Whole-session analysis: skeleton stream in, muscle-work summary and
//! display series out.
//!
//! Stage order: resample -> smooth -> body-scale estimate -> joint angles ->
//! derivatives -> per-frame muscle states + quasi-static torques -> static
//! optimization -> work increments -> group/limb aggregation -> windowed
//! display -> session summary. The per-frame stages are independent and run
//! over the rayon pool when the `parallel` feature is on; the `_seq`
//! variants always run single-threaded and produce bit-identical results.

use thiserror::Error;

use crate::aggregation::{
    accumulate_session, group_frame, limb_frame, DisplayConfig, DisplayFrame, DisplayState,
    GroupWorkFrame, LimbWorkFrame, SessionSummary,
};
use crate::kinematics::{
    compute_joint_angles, differentiate, inverse_dynamics, JointAngleFrame, KinematicsError,
    SegmentModel,
};
use crate::muscle_model::{ModelError, MusculoskeletalModel};
use crate::parallel::{ordered_map, ordered_map_seq, ordered_try_map, ordered_try_map_seq};
use crate::skeleton_io::{estimate_body_scale, resample, smooth, BodyScale, SessionStream, SkeletonIoError};
use crate::solver::{distribute_torques, frame_work, SolverError, WorkIncrementFrame};

/// Default subject mass when the profile does not provide one, kg.
pub const DEFAULT_MASS_KG: f64 = 70.0;

/// Knobs for a session analysis run.
#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    /// Resampling rate, Hz.
    pub rate_hz: f64,
    /// Moving-average window, frames (odd).
    pub smooth_window: usize,
    /// Display (window median / normalization / gradient) settings.
    pub display: DisplayConfig,
    /// Subject mass; `None` falls back to 70 kg with a warning.
    pub subject_mass_kg: Option<f64>,
    pub segment_model: SegmentModel,
    /// Collect per-frame activation/force rows for the debug CSV.
    pub collect_debug: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            rate_hz: 60.0,
            smooth_window: 5,
            display: DisplayConfig::default(),
            subject_mass_kg: None,
            segment_model: SegmentModel::default(),
            collect_debug: false,
        }
    }
}

/// One debug row of the flag-gated solver dump.
#[derive(Debug, Clone)]
pub struct DebugRow {
    pub t_ms: u64,
    pub muscle: String,
    pub activation: f64,
    pub force_n: f64,
    pub residual_norm: f64,
}

/// Everything a session analysis produces.
#[derive(Debug, Clone)]
pub struct SessionAnalysis {
    pub summary: SessionSummary,
    pub t_ms: Vec<u64>,
    pub groups: Vec<GroupWorkFrame>,
    pub limbs: Vec<LimbWorkFrame>,
    pub display: Vec<DisplayFrame>,
    pub body_scale: BodyScale,
    pub debug: Vec<DebugRow>,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] SkeletonIoError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

struct FrameOutput {
    work: WorkIncrementFrame,
    infeasible: bool,
    debug: Vec<DebugRow>,
}

fn solve_frame(
    angle_frame: &JointAngleFrame,
    model: &MusculoskeletalModel,
    scale: &BodyScale,
    seg: &SegmentModel,
    mass_kg: f64,
    dt_s: f64,
    collect_debug: bool,
) -> Result<FrameOutput, PipelineError> {
    let states = model.state_frame(angle_frame, scale);
    let torques = inverse_dynamics(angle_frame, mass_kg, scale, seg);
    let (activations, forces) = distribute_torques(&torques, &states, model)?;
    let work = frame_work(&forces, dt_s);
    let debug = if collect_debug {
        let residual_norm = forces
            .residuals
            .iter()
            .map(|r| r * r)
            .sum::<f64>()
            .sqrt();
        model
            .muscles
            .iter()
            .enumerate()
            .map(|(i, m)| DebugRow {
                t_ms: angle_frame.t_ms,
                muscle: m.name.clone(),
                activation: activations.activations[i],
                force_n: forces.forces[i],
                residual_norm,
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(FrameOutput {
        work,
        infeasible: forces.infeasible,
        debug,
    })
}

fn analyze_inner(
    stream: &SessionStream,
    model: &MusculoskeletalModel,
    opts: &AnalysisOptions,
    sequential: bool,
) -> Result<SessionAnalysis, PipelineError> {
    let resampled = resample(stream, opts.rate_hz)?;
    let smoothed = if opts.smooth_window > 1 && opts.smooth_window <= resampled.len() {
        smooth(&resampled, opts.smooth_window)?
    } else {
        resampled
    };
    let body_scale = estimate_body_scale(&smoothed)?;
    let scaled_model = model.scaled_to(&body_scale);
    let mass_kg = opts.subject_mass_kg.unwrap_or_else(|| {
        log::warn!("subject mass not provided; assuming {DEFAULT_MASS_KG} kg");
        DEFAULT_MASS_KG
    });

    let mut angle_frames = if sequential {
        ordered_try_map_seq(&smoothed.frames, |f| compute_joint_angles(f, &body_scale))?
    } else {
        ordered_try_map(&smoothed.frames, |f| compute_joint_angles(f, &body_scale))?
    };
    differentiate(&mut angle_frames, smoothed.rate_hz)?;

    let dt_s = smoothed.dt_s();
    let seg = &opts.segment_model;
    let solve = |f: &JointAngleFrame| {
        solve_frame(f, &scaled_model, &body_scale, seg, mass_kg, dt_s, opts.collect_debug)
    };
    let outputs = if sequential {
        ordered_try_map_seq(&angle_frames, solve)?
    } else {
        ordered_try_map(&angle_frames, solve)?
    };

    let infeasible_frames = outputs.iter().filter(|o| o.infeasible).count();
    let work_frames: Vec<WorkIncrementFrame> = outputs.iter().map(|o| o.work.clone()).collect();
    let groups: Vec<GroupWorkFrame> = if sequential {
        ordered_map_seq(&work_frames, |w| group_frame(w, &scaled_model))
    } else {
        ordered_map(&work_frames, |w| group_frame(w, &scaled_model))
    };
    let limbs: Vec<LimbWorkFrame> = groups.iter().map(limb_frame).collect();
    let mut display_state = DisplayState::new(opts.display.clone());
    let display: Vec<DisplayFrame> = groups.iter().map(|g| display_state.push(g)).collect();

    let summary = accumulate_session(
        &scaled_model,
        &work_frames,
        &groups,
        &limbs,
        &display,
        smoothed.duration_s(),
        infeasible_frames,
    );
    let debug = outputs.into_iter().flat_map(|o| o.debug).collect();
    Ok(SessionAnalysis {
        summary,
        t_ms: work_frames.iter().map(|w| w.t_ms).collect(),
        groups,
        limbs,
        display,
        body_scale,
        debug,
    })
}

/// Analyzes a session using the rayon pool when the `parallel` feature is
/// enabled.
pub fn analyze_stream(
    stream: &SessionStream,
    model: &MusculoskeletalModel,
    opts: &AnalysisOptions,
) -> Result<SessionAnalysis, PipelineError> {
    analyze_inner(stream, model, opts, false)
}

/// Single-threaded analysis; bit-identical to [`analyze_stream`].
pub fn analyze_stream_seq(
    stream: &SessionStream,
    model: &MusculoskeletalModel,
    opts: &AnalysisOptions,
) -> Result<SessionAnalysis, PipelineError> {
    analyze_inner(stream, model, opts, true)
}
