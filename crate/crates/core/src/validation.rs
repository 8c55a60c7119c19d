//! Technical-validation protocol on synthetic cohorts: run the full pipeline
//! over subjects x exercises x measurements, then evaluate repeated-measures
//! ANOVA, Holm-adjusted pairwise t-tests, and the named effect assertions
//! (arm involvement, lunge asymmetry, squat symmetry).

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use serde::Deserialize;
use thiserror::Error;

use crate::aggregation::{group_index, GROUP_KEYS};
use crate::export::fmt_sig9;
use crate::muscle_model::{MuscleGroup, MusculoskeletalModel, Side};
use crate::parallel::{ordered_try_map, ordered_try_map_seq};
use crate::pipeline::{analyze_stream_seq, AnalysisOptions, PipelineError};
use crate::stats::{f_survival, t_two_sided};
use crate::synth::{generate, ExerciseKind, MotionParams, SubjectScale};

/// Protocol shape: subjects x exercises x measurements, each measurement one
/// generated stream of `reps_per_measurement` repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub n_subjects: usize,
    pub exercises: Vec<ExerciseKind>,
    pub n_measurements: usize,
    pub reps_per_measurement: u32,
    pub noise_deg: f64,
    pub seed: u64,
    /// Subject stature multipliers are drawn uniformly from this range.
    pub stature_range: (f64, f64),
    /// Subject masses (kg) are drawn uniformly from this range.
    pub mass_range: (f64, f64),
    pub cadence_hz: f64,
    pub thresholds: EffectThresholds,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            n_subjects: 10,
            exercises: ExerciseKind::ALL.to_vec(),
            n_measurements: 5,
            reps_per_measurement: 5,
            noise_deg: 0.0,
            seed: 0,
            stature_range: (0.9, 1.1),
            mass_range: (55.0, 95.0),
            cadence_hz: 0.5,
            thresholds: EffectThresholds::default(),
        }
    }
}

/// Pass/fail thresholds of the effect assertions.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct EffectThresholds {
    /// Pectoralis+triceps work in squats-with-arms must be at least this
    /// multiple of squats-without-arms.
    pub arm_ratio_min: f64,
    /// Mean per-subject |l-r| quadriceps relative difference in lunges.
    pub lunge_quad_reldiff_min: f64,
    /// Same for squats at zero noise...
    pub squat_quad_reldiff_max_zero: f64,
    /// ...and with noise.
    pub squat_quad_reldiff_max_noisy: f64,
}

impl Default for EffectThresholds {
    fn default() -> Self {
        EffectThresholds {
            arm_ratio_min: 3.0,
            lunge_quad_reldiff_min: 0.3,
            squat_quad_reldiff_max_zero: 0.05,
            squat_quad_reldiff_max_noisy: 0.15,
        }
    }
}

impl ProtocolConfig {
    /// Parses the JSON form; absent fields keep their defaults.
    pub fn from_json(text: &str) -> Result<ProtocolConfig, ValidationError> {
        #[derive(Deserialize)]
        struct Raw {
            n_subjects: Option<usize>,
            exercises: Option<Vec<String>>,
            n_measurements: Option<usize>,
            reps_per_measurement: Option<u32>,
            noise_deg: Option<f64>,
            seed: Option<u64>,
            stature_range: Option<(f64, f64)>,
            mass_range: Option<(f64, f64)>,
            cadence_hz: Option<f64>,
            thresholds: Option<EffectThresholds>,
        }
        let raw: Raw =
            serde_json::from_str(text).map_err(|e| ValidationError::BadConfig(e.to_string()))?;
        let mut cfg = ProtocolConfig::default();
        if let Some(n) = raw.n_subjects {
            cfg.n_subjects = n;
        }
        if let Some(ex) = raw.exercises {
            cfg.exercises = ex
                .iter()
                .map(|name| {
                    ExerciseKind::from_kebab(name)
                        .ok_or_else(|| ValidationError::BadConfig(format!("unknown exercise {name:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
        }
        if let Some(n) = raw.n_measurements {
            cfg.n_measurements = n;
        }
        if let Some(r) = raw.reps_per_measurement {
            cfg.reps_per_measurement = r;
        }
        if let Some(n) = raw.noise_deg {
            cfg.noise_deg = n;
        }
        if let Some(s) = raw.seed {
            cfg.seed = s;
        }
        if let Some(r) = raw.stature_range {
            cfg.stature_range = r;
        }
        if let Some(r) = raw.mass_range {
            cfg.mass_range = r;
        }
        if let Some(c) = raw.cadence_hz {
            cfg.cadence_hz = c;
        }
        if let Some(t) = raw.thresholds {
            cfg.thresholds = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.n_subjects < 1
            || self.exercises.is_empty()
            || self.n_measurements < 1
            || self.reps_per_measurement < 1
        {
            return Err(ValidationError::BadConfig("all protocol counts must be >= 1".into()));
        }
        if self.noise_deg < 0.0 {
            return Err(ValidationError::BadConfig("noise_deg must be >= 0".into()));
        }
        Ok(())
    }
}

/// One (subject, exercise, measurement) cell: accumulated work per group.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub subject: usize,
    pub exercise: ExerciseKind,
    pub measurement: usize,
    pub groups: [f64; 16],
}

/// RM-ANOVA outcome for one group.
#[derive(Debug, Clone, PartialEq)]
pub struct AnovaResult {
    pub group: String,
    pub f: f64,
    pub df: (usize, usize),
    pub p: f64,
    pub partial_eta_sq: f64,
    /// `s`/`m`/`l` at 0.01/0.06/0.14; `None` below small.
    pub magnitude: Option<&'static str>,
    /// Set when the error variance vanished and F degenerated.
    pub zero_error_variance: bool,
}

/// One Holm-adjusted pairwise comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseResult {
    pub pair: (ExerciseKind, ExerciseKind),
    pub t: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
}

/// Outcome of one named effect assertion.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectAssertion {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

/// The effect-check report; assertions whose exercises are missing from the
/// results are reported as errors without blocking the others.
#[derive(Debug)]
pub struct EffectReport {
    pub assertions: Vec<Result<EffectAssertion, ValidationError>>,
}

impl EffectReport {
    pub fn all_passed(&self) -> bool {
        self.assertions
            .iter()
            .all(|a| matches!(a, Ok(e) if e.passed))
    }
}

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("invalid protocol config: {0}")]
    BadConfig(String),
    #[error("unbalanced design: {0}")]
    UnbalancedDesign(String),
    #[error("exercise {0:?} missing from results")]
    MissingExercise(ExerciseKind),
    #[error("trial subject={subject} exercise={exercise:?} measurement={measurement}: {source}")]
    Trial {
        subject: usize,
        exercise: ExerciseKind,
        measurement: usize,
        source: PipelineError,
    },
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Deterministic per-trial seed derived from the protocol seed and the trial
/// coordinates.
fn trial_seed(seed: u64, subject: usize, exercise: usize, measurement: usize) -> u64 {
    let mut z = splitmix64(seed ^ 0xA076_1D64_78BD_642F);
    for part in [subject as u64, exercise as u64, measurement as u64] {
        z = splitmix64(z ^ splitmix64(part.wrapping_add(1)));
    }
    z
}

struct Subject {
    stature: f64,
    mass_kg: f64,
}

fn draw_subjects(cfg: &ProtocolConfig) -> Vec<Subject> {
    (0..cfg.n_subjects)
        .map(|s| {
            let mut rng =
                rand_chacha::ChaCha8Rng::seed_from_u64(trial_seed(cfg.seed, s, usize::MAX, 0));
            let stature = rng.gen_range(cfg.stature_range.0..=cfg.stature_range.1);
            let mass_kg = rng.gen_range(cfg.mass_range.0..=cfg.mass_range.1);
            Subject { stature, mass_kg }
        })
        .collect()
}

/// Runs the full protocol. Trials are independent and fan out over the rayon
/// pool; results are merged in (subject, exercise, measurement) order, so
/// the output is deterministic for a fixed config and model.
pub fn run_protocol(
    cfg: &ProtocolConfig,
    model: &MusculoskeletalModel,
) -> Result<Vec<TrialResult>, ValidationError> {
    run_protocol_inner(cfg, model, false)
}

/// Single-threaded protocol run; bit-identical to [`run_protocol`].
pub fn run_protocol_seq(
    cfg: &ProtocolConfig,
    model: &MusculoskeletalModel,
) -> Result<Vec<TrialResult>, ValidationError> {
    run_protocol_inner(cfg, model, true)
}

fn run_protocol_inner(
    cfg: &ProtocolConfig,
    model: &MusculoskeletalModel,
    sequential: bool,
) -> Result<Vec<TrialResult>, ValidationError> {
    cfg.validate()?;
    let subjects = draw_subjects(cfg);
    let mut coords = Vec::with_capacity(cfg.n_subjects * cfg.exercises.len() * cfg.n_measurements);
    for s in 0..cfg.n_subjects {
        for (e_idx, &exercise) in cfg.exercises.iter().enumerate() {
            for m in 0..cfg.n_measurements {
                coords.push((s, e_idx, exercise, m));
            }
        }
    }
    let run_one = |&(s, e_idx, exercise, m): &(usize, usize, ExerciseKind, usize)| {
        let subject = &subjects[s];
        let params = MotionParams {
            reps: cfg.reps_per_measurement,
            cadence_hz: cfg.cadence_hz,
            noise_deg: cfg.noise_deg,
            seed: trial_seed(cfg.seed, s, e_idx, m),
            subject: SubjectScale::Multiplier(subject.stature),
            mirror: false,
        };
        let stream = generate(exercise, &params);
        let opts = AnalysisOptions {
            subject_mass_kg: Some(subject.mass_kg),
            ..Default::default()
        };
        // Frames inside a trial run sequentially; parallelism fans out over
        // trials instead.
        let analysis = analyze_stream_seq(&stream, model, &opts).map_err(|source| {
            ValidationError::Trial {
                subject: s,
                exercise,
                measurement: m,
                source,
            }
        })?;
        Ok(TrialResult {
            subject: s,
            exercise,
            measurement: m,
            groups: analysis.summary.groups,
        })
    };
    if sequential {
        ordered_try_map_seq(&coords, run_one)
    } else {
        ordered_try_map(&coords, run_one)
    }
}

/// Per-(subject, exercise) cell means over measurements, in the exercise
/// order given. Errors when the design is unbalanced.
fn cell_means(
    results: &[TrialResult],
    exercises: &[ExerciseKind],
    group: usize,
) -> Result<Vec<Vec<f64>>, ValidationError> {
    let mut subjects: Vec<usize> = results.iter().map(|r| r.subject).collect();
    subjects.sort_unstable();
    subjects.dedup();
    let mut cells = vec![vec![(0.0, 0usize); exercises.len()]; subjects.len()];
    for r in results {
        let Some(e_idx) = exercises.iter().position(|&e| e == r.exercise) else {
            continue;
        };
        let s_idx = subjects.binary_search(&r.subject).expect("subject present");
        let cell = &mut cells[s_idx][e_idx];
        cell.0 += r.groups[group];
        cell.1 += 1;
    }
    let expected = cells[0][0].1;
    if expected == 0 {
        return Err(ValidationError::UnbalancedDesign("empty first cell".into()));
    }
    let mut means = vec![vec![0.0; exercises.len()]; subjects.len()];
    for (s, row) in cells.iter().enumerate() {
        for (e, &(sum, count)) in row.iter().enumerate() {
            if count != expected {
                return Err(ValidationError::UnbalancedDesign(format!(
                    "subject {s} exercise {:?} has {count} measurements, expected {expected}",
                    exercises[e]
                )));
            }
            means[s][e] = sum / count as f64;
        }
    }
    Ok(means)
}

fn exercises_in(results: &[TrialResult]) -> Vec<ExerciseKind> {
    let mut out = Vec::new();
    for r in results {
        if !out.contains(&r.exercise) {
            out.push(r.exercise);
        }
    }
    out
}

/// One-way repeated-measures ANOVA over the exercise factor for one group
/// cell (subject effect removed). `group` indexes [`GROUP_KEYS`].
pub fn rm_anova(results: &[TrialResult], group: usize) -> Result<AnovaResult, ValidationError> {
    let exercises = exercises_in(results);
    if exercises.len() < 2 {
        return Err(ValidationError::BadConfig("need at least two exercises".into()));
    }
    let cells = cell_means(results, &exercises, group)?;
    let n = cells.len();
    let k = exercises.len();
    if n < 2 {
        return Err(ValidationError::BadConfig("need at least two subjects".into()));
    }
    let grand: f64 = cells.iter().flatten().sum::<f64>() / (n * k) as f64;
    let col_means: Vec<f64> = (0..k)
        .map(|e| cells.iter().map(|row| row[e]).sum::<f64>() / n as f64)
        .collect();
    let row_means: Vec<f64> = cells.iter().map(|row| row.iter().sum::<f64>() / k as f64).collect();
    let ss_factor: f64 = n as f64 * col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_subject: f64 = k as f64 * row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_total: f64 = cells
        .iter()
        .flatten()
        .map(|y| (y - grand).powi(2))
        .sum::<f64>();
    let ss_error = (ss_total - ss_factor - ss_subject).max(0.0);
    let df1 = k - 1;
    let df2 = (k - 1) * (n - 1);
    let scale = ss_total.max(1e-300);
    let (f, p, zero_error_variance) = if ss_error <= 1e-12 * scale {
        if ss_factor <= 1e-12 * scale {
            (0.0, 1.0, false)
        } else {
            (f64::INFINITY, 0.0, true)
        }
    } else {
        let f = (ss_factor / df1 as f64) / (ss_error / df2 as f64);
        (f, f_survival(f, df1 as f64, df2 as f64), false)
    };
    let partial_eta_sq = if ss_factor + ss_error > 0.0 {
        ss_factor / (ss_factor + ss_error)
    } else {
        0.0
    };
    let magnitude = if partial_eta_sq >= 0.14 {
        Some("l")
    } else if partial_eta_sq >= 0.06 {
        Some("m")
    } else if partial_eta_sq >= 0.01 {
        Some("s")
    } else {
        None
    };
    Ok(AnovaResult {
        group: GROUP_KEYS[group].label(),
        f,
        df: (df1, df2),
        p,
        partial_eta_sq,
        magnitude,
        zero_error_variance,
    })
}

/// Paired t-tests on subject means for every exercise pair, Holm
/// step-down adjusted.
pub fn pairwise_tests(
    results: &[TrialResult],
    group: usize,
) -> Result<Vec<PairwiseResult>, ValidationError> {
    let exercises = exercises_in(results);
    let cells = cell_means(results, &exercises, group)?;
    let n = cells.len();
    if n < 2 {
        return Err(ValidationError::BadConfig("need at least two subjects".into()));
    }
    let mut tests = Vec::new();
    for i in 0..exercises.len() {
        for j in i + 1..exercises.len() {
            let diffs: Vec<f64> = cells.iter().map(|row| row[i] - row[j]).collect();
            let mean = diffs.iter().sum::<f64>() / n as f64;
            let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let (t, p_raw) = if var <= 0.0 {
                if mean.abs() <= 0.0 {
                    (0.0, 1.0)
                } else {
                    (f64::INFINITY, 0.0)
                }
            } else {
                let t = mean / (var / n as f64).sqrt();
                (t, t_two_sided(t, (n - 1) as f64))
            };
            tests.push(PairwiseResult {
                pair: (exercises[i], exercises[j]),
                t,
                p_raw,
                p_adjusted: p_raw,
            });
        }
    }
    holm_adjust(&mut tests);
    Ok(tests)
}

/// Holm step-down: the smallest raw p is multiplied by m, the next by m-1,
/// and so on, with a running maximum and a cap at 1.
fn holm_adjust(tests: &mut [PairwiseResult]) {
    let m = tests.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| tests[a].p_raw.partial_cmp(&tests[b].p_raw).unwrap());
    let mut running = 0.0f64;
    for (rank, &idx) in order.iter().enumerate() {
        let adj = (tests[idx].p_raw * (m - rank) as f64).min(1.0);
        running = running.max(adj);
        tests[idx].p_adjusted = running;
    }
}

fn quad_reldiff_per_subject(
    results: &[TrialResult],
    exercise: ExerciseKind,
) -> Result<Vec<f64>, ValidationError> {
    if !results.iter().any(|r| r.exercise == exercise) {
        return Err(ValidationError::MissingExercise(exercise));
    }
    let l = group_index(MuscleGroup::QuadricepsFemoris, Side::Left);
    let r = group_index(MuscleGroup::QuadricepsFemoris, Side::Right);
    let mut subjects: Vec<usize> = results
        .iter()
        .filter(|t| t.exercise == exercise)
        .map(|t| t.subject)
        .collect();
    subjects.sort_unstable();
    subjects.dedup();
    Ok(subjects
        .iter()
        .map(|&s| {
            let trials: Vec<&TrialResult> = results
                .iter()
                .filter(|t| t.exercise == exercise && t.subject == s)
                .collect();
            let lv: f64 = trials.iter().map(|t| t.groups[l]).sum::<f64>() / trials.len() as f64;
            let rv: f64 = trials.iter().map(|t| t.groups[r]).sum::<f64>() / trials.len() as f64;
            let mean = 0.5 * (lv + rv);
            if mean > 0.0 {
                (lv - rv).abs() / mean
            } else {
                0.0
            }
        })
        .collect())
}

fn mean_group_pair(
    results: &[TrialResult],
    exercise: ExerciseKind,
    groups: &[usize],
) -> Result<f64, ValidationError> {
    let trials: Vec<&TrialResult> = results.iter().filter(|t| t.exercise == exercise).collect();
    if trials.is_empty() {
        return Err(ValidationError::MissingExercise(exercise));
    }
    Ok(trials
        .iter()
        .map(|t| groups.iter().map(|&g| t.groups[g]).sum::<f64>())
        .sum::<f64>()
        / trials.len() as f64)
}

/// Evaluates the three named effect assertions. Assertions whose exercises
/// are missing are reported as errors; the others are still computed.
pub fn effect_checks(
    results: &[TrialResult],
    thresholds: &EffectThresholds,
    noise_deg: f64,
) -> EffectReport {
    let pec_tric: Vec<usize> = [
        (MuscleGroup::PectoralisMajor, Side::Left),
        (MuscleGroup::PectoralisMajor, Side::Right),
        (MuscleGroup::TricepsBrachii, Side::Left),
        (MuscleGroup::TricepsBrachii, Side::Right),
    ]
    .iter()
    .map(|&(g, s)| group_index(g, s))
    .collect();

    let arm = (|| -> Result<EffectAssertion, ValidationError> {
        let with = mean_group_pair(results, ExerciseKind::SquatsArms, &pec_tric)?;
        let without = mean_group_pair(results, ExerciseKind::SquatsNoArms, &pec_tric)?;
        let passed = with > 0.0 && with >= thresholds.arm_ratio_min * without;
        let value = if without > 0.0 { with / without } else { f64::INFINITY };
        Ok(EffectAssertion {
            name: "arm_involvement",
            passed,
            value,
            threshold: thresholds.arm_ratio_min,
            detail: format!(
                "pectoralis+triceps work {with:.3} N·s with arms vs {without:.3} N·s without"
            ),
        })
    })();

    let lunge = (|| -> Result<EffectAssertion, ValidationError> {
        let per_subject = quad_reldiff_per_subject(results, ExerciseKind::Lunges)?;
        let value = per_subject.iter().sum::<f64>() / per_subject.len() as f64;
        Ok(EffectAssertion {
            name: "lunge_asymmetry",
            passed: value >= thresholds.lunge_quad_reldiff_min,
            value,
            threshold: thresholds.lunge_quad_reldiff_min,
            detail: format!("mean per-subject |l-r| quadriceps relative difference {value:.3}"),
        })
    })();

    let squat = (|| -> Result<EffectAssertion, ValidationError> {
        let per_subject = quad_reldiff_per_subject(results, ExerciseKind::SquatsNoArms)?;
        let value = per_subject.iter().sum::<f64>() / per_subject.len() as f64;
        let threshold = if noise_deg == 0.0 {
            thresholds.squat_quad_reldiff_max_zero
        } else {
            thresholds.squat_quad_reldiff_max_noisy
        };
        Ok(EffectAssertion {
            name: "squat_symmetry",
            passed: value <= threshold,
            value,
            threshold,
            detail: format!("mean per-subject |l-r| quadriceps relative difference {value:.3}"),
        })
    })();

    EffectReport {
        assertions: vec![arm, lunge, squat],
    }
}

// ---------------------------------------------------------------------------
// Exports

/// Trials CSV: subject, exercise, measurement, 16 group columns.
pub fn trials_csv(results: &[TrialResult]) -> String {
    let mut out = String::from("subject,exercise,measurement");
    for key in GROUP_KEYS {
        let _ = write!(out, ",{}", key.label());
    }
    out.push('\n');
    for r in results {
        let _ = write!(out, "{},{},{}", r.subject, r.exercise.kebab_name(), r.measurement);
        for g in r.groups {
            let _ = write!(out, ",{}", fmt_sig9(g));
        }
        out.push('\n');
    }
    out
}

/// Stats JSON: RM-ANOVA plus pairwise tests for every group cell.
pub fn stats_json(results: &[TrialResult]) -> Result<String, ValidationError> {
    let mut out = String::from("{\n");
    for (g, key) in GROUP_KEYS.iter().enumerate() {
        let anova = rm_anova(results, g)?;
        let pairwise = pairwise_tests(results, g)?;
        let _ = writeln!(out, "  \"{}\": {{", key.label());
        let f_text = if anova.f.is_finite() {
            fmt_sig9(anova.f)
        } else {
            "\"inf\"".to_string()
        };
        let _ = writeln!(out, "    \"f\": {f_text},");
        let _ = writeln!(out, "    \"df\": [{}, {}],", anova.df.0, anova.df.1);
        let _ = writeln!(out, "    \"p\": {},", fmt_sig9(anova.p));
        let _ = writeln!(out, "    \"partial_eta_sq\": {},", fmt_sig9(anova.partial_eta_sq));
        let _ = writeln!(
            out,
            "    \"magnitude\": {},",
            anova.magnitude.map_or("null".to_string(), |m| format!("\"{m}\""))
        );
        let _ = writeln!(out, "    \"zero_error_variance\": {},", anova.zero_error_variance);
        out.push_str("    \"pairwise\": [\n");
        for (i, p) in pairwise.iter().enumerate() {
            let t_text = if p.t.is_finite() {
                fmt_sig9(p.t)
            } else {
                format!("\"{}inf\"", if p.t < 0.0 { "-" } else { "" })
            };
            let comma = if i + 1 < pairwise.len() { "," } else { "" };
            let _ = writeln!(
                out,
                "      {{\"a\": \"{}\", \"b\": \"{}\", \"t\": {t_text}, \"p_raw\": {}, \"p_adjusted\": {}}}{comma}",
                p.pair.0.kebab_name(),
                p.pair.1.kebab_name(),
                fmt_sig9(p.p_raw),
                fmt_sig9(p.p_adjusted)
            );
        }
        out.push_str("    ]\n");
        let comma = if g + 1 < GROUP_KEYS.len() { "," } else { "" };
        let _ = writeln!(out, "  }}{comma}");
    }
    out.push_str("}\n");
    Ok(out)
}

/// Boxplot CSV matching the exercise-by-group layout: min, quartiles, max of
/// the per-trial accumulated work.
pub fn boxplot_csv(results: &[TrialResult]) -> String {
    let mut out = String::from("exercise,group,min,q1,median,q3,max\n");
    let exercises = exercises_in(results);
    for &exercise in &exercises {
        for (g, key) in GROUP_KEYS.iter().enumerate() {
            let mut values: Vec<f64> = results
                .iter()
                .filter(|r| r.exercise == exercise)
                .map(|r| r.groups[g])
                .collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if values.is_empty() {
                continue;
            }
            let q = |p: f64| -> f64 {
                let pos = p * (values.len() - 1) as f64;
                let lo = pos.floor() as usize;
                let hi = pos.ceil() as usize;
                let frac = pos - lo as f64;
                values[lo] + frac * (values[hi] - values[lo])
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                exercise.kebab_name(),
                key.label(),
                fmt_sig9(values[0]),
                fmt_sig9(q(0.25)),
                fmt_sig9(q(0.5)),
                fmt_sig9(q(0.75)),
                fmt_sig9(values[values.len() - 1])
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::muscle_model::default_model;

    fn tiny_cfg() -> ProtocolConfig {
        ProtocolConfig {
            n_subjects: 2,
            n_measurements: 2,
            reps_per_measurement: 1,
            exercises: vec![ExerciseKind::SquatsArms, ExerciseKind::SquatsNoArms, ExerciseKind::Lunges],
            seed: 9,
            ..Default::default()
        }
    }

    #[test]
    fn protocol_row_count_and_determinism() {
        let model = default_model();
        let cfg = tiny_cfg();
        let a = run_protocol(&cfg, &model).unwrap();
        assert_eq!(a.len(), 2 * 3 * 2);
        let b = run_protocol(&cfg, &model).unwrap();
        assert_eq!(a, b);
        // Sequential runner matches bitwise.
        let c = run_protocol_seq(&cfg, &model).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn single_cell_protocol() {
        let model = default_model();
        let cfg = ProtocolConfig {
            n_subjects: 1,
            n_measurements: 1,
            reps_per_measurement: 1,
            exercises: vec![ExerciseKind::SquatsNoArms],
            ..Default::default()
        };
        let rows = run_protocol(&cfg, &model).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].subject, 0);
        assert_eq!(rows[0].measurement, 0);
    }

    fn synthetic_results(cells: &[&[f64]]) -> Vec<TrialResult> {
        // cells[s][e]; exercise order fixed.
        let exercises = [
            ExerciseKind::ArmCircles,
            ExerciseKind::Lunges,
            ExerciseKind::ShoulderSqueeze,
            ExerciseKind::SquatsArms,
            ExerciseKind::SquatsNoArms,
        ];
        let mut out = Vec::new();
        for (s, row) in cells.iter().enumerate() {
            for (e, &v) in row.iter().enumerate() {
                let mut groups = [0.0; 16];
                groups[0] = v;
                out.push(TrialResult {
                    subject: s,
                    exercise: exercises[e],
                    measurement: 0,
                    groups,
                });
            }
        }
        out
    }

    #[test]
    fn anova_zero_variance_dataset() {
        let results = synthetic_results(&[&[2.0, 2.0, 2.0], &[2.0, 2.0, 2.0], &[2.0, 2.0, 2.0]]);
        let r = rm_anova(&results, 0).unwrap();
        assert_eq!(r.f, 0.0);
        assert_eq!(r.p, 1.0);
        assert!(!r.zero_error_variance);
    }

    #[test]
    fn anova_textbook_additive_dataset() {
        // Rows are subjects (1,2,3), (2,3,4), (3,4,5): SS_factor = 6 and the
        // error variance vanishes, so F degenerates with the flag set.
        let results = synthetic_results(&[&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0], &[3.0, 4.0, 5.0]]);
        let r = rm_anova(&results, 0).unwrap();
        assert!(r.f.is_infinite());
        assert_eq!(r.p, 0.0);
        assert!(r.zero_error_variance);
        assert_eq!(r.df, (2, 4));
        assert_eq!(r.partial_eta_sq, 1.0);
        assert_eq!(r.magnitude, Some("l"));
    }

    #[test]
    fn anova_f_invariances() {
        let base = [
            [1.0, 2.5, 2.0],
            [2.0, 3.1, 2.2],
            [1.5, 2.9, 2.7],
            [1.2, 2.2, 1.9],
        ];
        let rows: Vec<&[f64]> = base.iter().map(|r| r.as_slice()).collect();
        let r0 = rm_anova(&synthetic_results(&rows), 0).unwrap();
        // Adding a per-subject constant leaves F unchanged.
        let shifted: Vec<Vec<f64>> = base
            .iter()
            .enumerate()
            .map(|(s, row)| row.iter().map(|v| v + 10.0 * s as f64).collect())
            .collect();
        let rows2: Vec<&[f64]> = shifted.iter().map(|r| r.as_slice()).collect();
        let r1 = rm_anova(&synthetic_results(&rows2), 0).unwrap();
        assert!((r0.f - r1.f).abs() < 1e-9 * r0.f);
        // Positive rescaling leaves F unchanged.
        let scaled: Vec<Vec<f64>> = base.iter().map(|row| row.iter().map(|v| 3.7 * v).collect()).collect();
        let rows3: Vec<&[f64]> = scaled.iter().map(|r| r.as_slice()).collect();
        let r2 = rm_anova(&synthetic_results(&rows3), 0).unwrap();
        assert!((r0.f - r2.f).abs() < 1e-9 * r0.f);
    }

    #[test]
    fn unbalanced_design_is_rejected() {
        let mut results =
            synthetic_results(&[&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0], &[3.0, 4.0, 5.0]]);
        results.pop();
        assert!(matches!(
            rm_anova(&results, 0),
            Err(ValidationError::UnbalancedDesign(_))
        ));
    }

    #[test]
    fn pairwise_identical_columns_give_p_one() {
        let results = synthetic_results(&[&[2.0, 2.0], &[3.0, 3.0], &[1.0, 1.0]]);
        let tests = pairwise_tests(&results, 0).unwrap();
        assert_eq!(tests.len(), 1);
        assert_eq!(tests[0].t, 0.0);
        assert_eq!(tests[0].p_adjusted, 1.0);
    }

    #[test]
    fn pairwise_separated_columns_are_significant() {
        let results = synthetic_results(&[
            &[1.0, 101.0],
            &[1.1, 101.2],
            &[0.9, 100.8],
            &[1.05, 101.1],
            &[0.95, 100.9],
        ]);
        let tests = pairwise_tests(&results, 0).unwrap();
        assert!(tests[0].p_adjusted < 0.001, "p = {}", tests[0].p_adjusted);
    }

    #[test]
    fn holm_adjustment_hand_example() {
        let mk = |p: f64| PairwiseResult {
            pair: (ExerciseKind::Lunges, ExerciseKind::SquatsArms),
            t: 1.0,
            p_raw: p,
            p_adjusted: p,
        };
        let mut tests = vec![mk(0.04), mk(0.01), mk(0.02)];
        holm_adjust(&mut tests);
        let adjusted: Vec<f64> = tests.iter().map(|t| t.p_adjusted).collect();
        assert!((adjusted[1] - 0.03).abs() < 1e-12);
        assert!((adjusted[2] - 0.04).abs() < 1e-12);
        assert!((adjusted[0] - 0.04).abs() < 1e-12);
        // Adjusted p never below raw p.
        for t in &tests {
            assert!(t.p_adjusted >= t.p_raw);
        }
    }

    #[test]
    fn effect_checks_on_tiny_cohort() {
        let model = default_model();
        let cfg = tiny_cfg();
        let results = run_protocol(&cfg, &model).unwrap();
        let report = effect_checks(&results, &cfg.thresholds, cfg.noise_deg);
        for a in &report.assertions {
            let a = a.as_ref().expect("exercises present");
            assert!(a.passed, "{}: value {} vs threshold {}", a.name, a.value, a.threshold);
        }
        assert!(report.all_passed());
    }

    #[test]
    fn effect_checks_mirrored_lunges_still_pass() {
        let model = default_model();
        let cfg = ProtocolConfig {
            n_subjects: 2,
            n_measurements: 1,
            reps_per_measurement: 1,
            exercises: vec![ExerciseKind::Lunges],
            seed: 4,
            ..Default::default()
        };
        let mut results = run_protocol(&cfg, &model).unwrap();
        // Mirror half the cohort by swapping the group sides; the
        // per-subject absolute difference is mirror-invariant.
        for r in results.iter_mut().filter(|r| r.subject == 1) {
            for g in 0..8 {
                r.groups.swap(2 * g, 2 * g + 1);
            }
        }
        let report = effect_checks(&results, &EffectThresholds::default(), 0.0);
        let lunge = report.assertions[1].as_ref().unwrap();
        assert!(lunge.passed, "{}", lunge.detail);
    }

    #[test]
    fn effect_checks_report_missing_exercise_independently() {
        let model = default_model();
        let cfg = ProtocolConfig {
            n_subjects: 1,
            n_measurements: 1,
            reps_per_measurement: 1,
            exercises: vec![ExerciseKind::Lunges, ExerciseKind::SquatsNoArms],
            ..Default::default()
        };
        let results = run_protocol(&cfg, &model).unwrap();
        let report = effect_checks(&results, &EffectThresholds::default(), 0.0);
        // Arm assertion cannot run (no squats-arms) ...
        assert!(matches!(
            report.assertions[0],
            Err(ValidationError::MissingExercise(ExerciseKind::SquatsArms))
        ));
        // ... but the lunge and squat assertions still computed.
        assert!(report.assertions[1].is_ok());
        assert!(report.assertions[2].is_ok());
    }

    #[test]
    fn csv_and_json_exports_are_stable() {
        let model = default_model();
        let cfg = tiny_cfg();
        let results = run_protocol(&cfg, &model).unwrap();
        let csv1 = trials_csv(&results);
        let csv2 = trials_csv(&results);
        assert_eq!(csv1, csv2);
        assert_eq!(csv1.lines().count(), 1 + results.len());
        let stats = stats_json(&results).unwrap();
        serde_json::from_str::<serde_json::Value>(&stats).expect("valid JSON");
        let boxes = boxplot_csv(&results);
        assert_eq!(boxes.lines().count(), 1 + 3 * 16);
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = ProtocolConfig::from_json(
            r#"{"n_subjects": 3, "exercises": ["lunges", "squats-arms"], "noise_deg": 1.0, "seed": 11}"#,
        )
        .unwrap();
        assert_eq!(cfg.n_subjects, 3);
        assert_eq!(cfg.exercises, vec![ExerciseKind::Lunges, ExerciseKind::SquatsArms]);
        assert_eq!(cfg.noise_deg, 1.0);
        assert_eq!(cfg.n_measurements, 5);
        assert!(ProtocolConfig::from_json(r#"{"exercises": ["situps"]}"#).is_err());
        assert!(ProtocolConfig::from_json(r#"{"n_subjects": 0}"#).is_err());
    }
}
