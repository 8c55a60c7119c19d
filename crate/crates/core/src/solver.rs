//! Static optimization: distribute joint torques to muscle forces under Hill
//! bounds, and accumulate per-frame muscle work increments.
//!
//! Per frame we solve
//!
//! ```text
//!   minimize    sum_m a_m^2
//!   subject to  sum_m r_mj (F_PE,m + a_m c_m) = tau_j   for each active DOF j
//!               0 <= a_m <= 1
//! ```
//!
//! where `c_m = f_max * f_L(lnorm) * f_V(v) >= 0` is the activation-to-force
//! gain. Passive torque is subtracted from the demand first. The equality is
//! enforced through a quadratic penalty of weight 1e6, minimized by a
//! projected Newton active-set iteration; any solve meeting the residual
//! tolerance `max(1e-6, 1e-4 * |tau|)` per DOF is acceptable. DOFs with no
//! crossing muscle are skipped and reported. When the demand exceeds muscle
//! capacity the penalized solution saturates and the frame is flagged
//! infeasible instead of producing negative forces; muscle forces are never
//! negative.

use thiserror::Error;

use crate::kinematics::{JointTorqueFrame, DofId, DOF_COUNT};
use crate::muscle_model::{force_length, force_velocity, MuscleStateFrame, MusculoskeletalModel};

/// Quadratic penalty weight on the torque equality.
pub const PENALTY_WEIGHT: f64 = 1e6;

/// Hard cap on solver iterations before reporting divergence.
pub const ITERATION_CAP: usize = 10_000;

/// Per-muscle activations in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct ActivationFrame {
    pub t_ms: u64,
    pub activations: Vec<f64>,
    /// Names of muscles at the upper activation bound.
    pub saturated: Vec<String>,
}

/// Per-muscle forces and solve diagnostics.
#[derive(Debug, Clone)]
pub struct MuscleForceFrame {
    pub t_ms: u64,
    /// Total muscle tensions (passive + active), N; never negative.
    pub forces: Vec<f64>,
    /// Achieved-minus-demanded torque per DOF, N·m (zero for skipped DOFs).
    pub residuals: [f64; DOF_COUNT],
    /// DOFs with no crossing muscle, skipped by the solve.
    pub skipped_dofs: Vec<DofId>,
    pub iterations: usize,
    /// Set when the demand exceeded capacity and the equality could only be
    /// met in the penalized least-squares sense.
    pub infeasible: bool,
}

/// Per-muscle work increments, N·s (force-time integral).
#[derive(Debug, Clone)]
pub struct WorkIncrementFrame {
    pub t_ms: u64,
    pub increments: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("solver diverged: {iterations} iterations without convergence")]
    Diverged { iterations: usize },
    #[error("state frame has {states} muscles but model has {muscles}")]
    ModelMismatch { states: usize, muscles: usize },
}

/// Residual tolerance for one DOF given its demand.
pub fn residual_tolerance(tau: f64) -> f64 {
    (1e-4 * tau.abs()).max(1e-6)
}

/// Distributes one frame of joint torques across the model's muscles.
pub fn distribute_torques(
    torques: &JointTorqueFrame,
    states: &MuscleStateFrame,
    model: &MusculoskeletalModel,
) -> Result<(ActivationFrame, MuscleForceFrame), SolverError> {
    let n = model.muscles.len();
    if states.states.len() != n {
        return Err(SolverError::ModelMismatch {
            states: states.states.len(),
            muscles: n,
        });
    }

    // Per-muscle gain and passive force at this frame's state.
    let mut gain = vec![0.0; n];
    let mut passive = vec![0.0; n];
    for (i, m) in model.muscles.iter().enumerate() {
        let s = &states.states[i];
        let (f_l, f_pe) = force_length(s.lnorm, &m.hill);
        let f_v = force_velocity(s.velocity, &m.hill);
        gain[i] = f_l * f_v; // = f_max * f_L * (F_V / f_max)
        passive[i] = f_pe;
    }

    // Active DOFs: at least one crossing muscle with a usable moment arm.
    let mut active: Vec<usize> = Vec::new();
    let mut skipped: Vec<DofId> = Vec::new();
    for dof in DofId::ALL {
        let crossed = (0..n).any(|i| states.states[i].moment_arms[dof as usize] != 0.0);
        if crossed {
            active.push(dof as usize);
        } else {
            skipped.push(dof);
        }
    }

    // Demand with passive torque removed: tau_j - sum_m r_mj * F_PE,m.
    let k = active.len();
    let mut demand = vec![0.0; k];
    for (row, &j) in active.iter().enumerate() {
        let mut passive_torque = 0.0;
        for i in 0..n {
            passive_torque += states.states[i].moment_arms[j] * passive[i];
        }
        demand[row] = torques.torques[j] - passive_torque;
    }
    // Coefficients b[row][i] = r_ij * c_i.
    let mut coeff = vec![vec![0.0; n]; k];
    for (row, &j) in active.iter().enumerate() {
        for i in 0..n {
            coeff[row][i] = states.states[i].moment_arms[j] * gain[i];
        }
    }

    let (a, iterations) = solve_box_penalized(&coeff, &demand, n)?;

    let mut forces = vec![0.0; n];
    for i in 0..n {
        forces[i] = passive[i] + a[i] * gain[i];
        debug_assert!(forces[i] >= 0.0);
    }
    let mut residuals = [0.0; DOF_COUNT];
    let mut infeasible = false;
    for (row, &j) in active.iter().enumerate() {
        let mut achieved = 0.0;
        for i in 0..n {
            achieved += coeff[row][i] * a[i];
        }
        let r = achieved - demand[row];
        residuals[j] = r;
        if r.abs() > residual_tolerance(torques.torques[j]) {
            infeasible = true;
        }
    }

    let saturated = (0..n)
        .filter(|&i| a[i] >= 1.0 - 1e-12)
        .map(|i| model.muscles[i].name.clone())
        .collect();
    Ok((
        ActivationFrame {
            t_ms: torques.t_ms,
            activations: a,
            saturated,
        },
        MuscleForceFrame {
            t_ms: torques.t_ms,
            forces,
            residuals,
            skipped_dofs: skipped,
            iterations,
            infeasible,
        },
    ))
}

/// Minimizes `sum a^2 + w * |B a - d|^2` over the unit box by projected
/// Newton on the active set. Deterministic: fixed sweep order, no pivoting.
fn solve_box_penalized(
    coeff: &[Vec<f64>],
    demand: &[f64],
    n: usize,
) -> Result<(Vec<f64>, usize), SolverError> {
    let k = coeff.len();
    let w = PENALTY_WEIGHT;
    // Hessian H = 2I + 2w B^T B and linear term g0 = -2w B^T d.
    let mut hess = vec![vec![0.0; n]; n];
    for i in 0..n {
        hess[i][i] = 2.0;
    }
    for row in 0..k {
        for i in 0..n {
            let bi = coeff[row][i];
            if bi == 0.0 {
                continue;
            }
            for j in 0..n {
                hess[i][j] += 2.0 * w * bi * coeff[row][j];
            }
        }
    }
    let mut lin = vec![0.0; n];
    for row in 0..k {
        for i in 0..n {
            lin[i] -= 2.0 * w * coeff[row][i] * demand[row];
        }
    }

    let grad_scale: f64 = {
        let demand_norm: f64 = demand.iter().map(|d| d * d).sum::<f64>().sqrt();
        (2.0 * w * demand_norm).max(1.0)
    };
    let objective = |a: &[f64]| -> f64 {
        let mut obj: f64 = a.iter().map(|x| x * x).sum();
        for row in 0..k {
            let mut r = -demand[row];
            for i in 0..n {
                r += coeff[row][i] * a[i];
            }
            obj += w * r * r;
        }
        obj
    };

    let mut a = vec![0.0; n];
    let mut iterations = 0usize;
    loop {
        iterations += 1;
        if iterations > ITERATION_CAP {
            return Err(SolverError::Diverged {
                iterations: ITERATION_CAP,
            });
        }
        // Gradient of the penalized objective.
        let mut grad = lin.clone();
        for i in 0..n {
            for j in 0..n {
                grad[i] += hess[i][j] * a[j];
            }
        }
        // grad = H a + lin equals the true gradient because H already
        // includes the 2I term and lin the -2w B^T d term.
        let mut free: Vec<usize> = Vec::with_capacity(n);
        let mut stationary = true;
        for i in 0..n {
            let at_lo = a[i] <= 0.0 && grad[i] > 0.0;
            let at_hi = a[i] >= 1.0 && grad[i] < 0.0;
            if !(at_lo || at_hi) {
                free.push(i);
                if grad[i].abs() > 1e-10 * grad_scale {
                    stationary = false;
                }
            }
        }
        if stationary {
            break;
        }
        // Newton step on the free set.
        let f = free.len();
        let mut sub = vec![vec![0.0; f]; f];
        let mut rhs = vec![0.0; f];
        for (ri, &i) in free.iter().enumerate() {
            rhs[ri] = -grad[i];
            for (ci, &j) in free.iter().enumerate() {
                sub[ri][ci] = hess[i][j];
            }
        }
        let step = cholesky_solve(&mut sub, &mut rhs);
        // Backtracking projected line search; the Newton direction of a
        // convex quadratic always admits a decreasing step.
        let obj0 = objective(&a);
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let mut trial = a.clone();
            for (ri, &i) in free.iter().enumerate() {
                trial[i] = (trial[i] + t * step[ri]).clamp(0.0, 1.0);
            }
            if objective(&trial) < obj0 - 1e-18 * obj0.abs().max(1.0) {
                a = trial;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break; // numerically stationary
        }
    }
    Ok((a, iterations))
}

/// Solves the SPD system in place via Cholesky; returns the solution.
fn cholesky_solve(mat: &mut [Vec<f64>], rhs: &mut [f64]) -> Vec<f64> {
    let n = rhs.len();
    // Decompose: mat = L L^T (lower triangle in place).
    for i in 0..n {
        for j in 0..=i {
            let mut sum = mat[i][j];
            for k in 0..j {
                sum -= mat[i][k] * mat[j][k];
            }
            if i == j {
                mat[i][j] = sum.max(1e-30).sqrt();
            } else {
                mat[i][j] = sum / mat[j][j];
            }
        }
    }
    // Forward substitution L y = rhs.
    for i in 0..n {
        let mut sum = rhs[i];
        for k in 0..i {
            sum -= mat[i][k] * rhs[k];
        }
        rhs[i] = sum / mat[i][i];
    }
    // Back substitution L^T x = y.
    for i in (0..n).rev() {
        let mut sum = rhs[i];
        for k in i + 1..n {
            sum -= mat[k][i] * rhs[k];
        }
        rhs[i] = sum / mat[i][i];
    }
    rhs.to_vec()
}

/// Converts one force frame into work increments `w_m = F_m * dt`.
/// Isometric holds accrue work; increments are never negative.
pub fn frame_work(forces: &MuscleForceFrame, dt_s: f64) -> WorkIncrementFrame {
    debug_assert!(dt_s > 0.0);
    WorkIncrementFrame {
        t_ms: forces.t_ms,
        increments: forces.forces.iter().map(|f| f * dt_s).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::JointAngleFrame;
    use crate::muscle_model::{HillParameters, MuscleState};

    /// Builds a synthetic state frame + model with given moment arm rows and
    /// activation gains (f_L = f_V factors folded into c via v=0, lnorm=1).
    fn toy_problem(arms: &[Vec<(DofId, f64)>], f_max: &[f64]) -> (MusculoskeletalModel, MuscleStateFrame) {
        use crate::muscle_model::{Attachment, MuscleDefinition, MuscleGroup, SegmentKind, Side};
        let mut model = crate::muscle_model::default_model();
        model.muscles.clear();
        for (i, (spans, fm)) in arms.iter().zip(f_max.iter()).enumerate() {
            model.muscles.push(MuscleDefinition {
                name: format!("toy{i}"),
                group: MuscleGroup::Deltoideus,
                side: Side::Left,
                attachments: vec![
                    Attachment { segment: SegmentKind::Trunk, point: [0.0, 0.0, 0.0] },
                    Attachment { segment: SegmentKind::Trunk, point: [0.0, 0.3, 0.0] },
                ],
                spanned_dofs: spans.iter().map(|&(d, _)| d).collect(),
                hill: HillParameters {
                    f_max: *fm,
                    v_max: 3.0,
                    a: 0.25 * fm,
                    b: 0.75,
                    l0: 0.3,
                },
                pcsa_cm2: None,
            });
        }
        let states = MuscleStateFrame {
            t_ms: 0,
            states: arms
                .iter()
                .map(|spans| {
                    let mut moment_arms = [0.0; DOF_COUNT];
                    for &(d, r) in spans {
                        moment_arms[d as usize] = r;
                    }
                    MuscleState {
                        length: 0.3,
                        lnorm: 1.0,
                        velocity: 0.0,
                        moment_arms,
                    }
                })
                .collect(),
        };
        (model, states)
    }

    fn torque(dof: DofId, value: f64) -> JointTorqueFrame {
        let mut torques = [0.0; DOF_COUNT];
        torques[dof as usize] = value;
        JointTorqueFrame { t_ms: 0, torques }
    }

    #[test]
    fn single_muscle_single_dof_algebra() {
        // a = tau / (r * c) = 15 / (0.05 * 600) = 0.5.
        let (model, states) = toy_problem(
            &[vec![(DofId::ElbowFlexionL, 0.05)]],
            &[600.0],
        );
        let (act, forces) =
            distribute_torques(&torque(DofId::ElbowFlexionL, 15.0), &states, &model).unwrap();
        assert!((act.activations[0] - 0.5).abs() < 1e-6);
        assert!(!forces.infeasible);
        assert!(forces.residuals[DofId::ElbowFlexionL as usize].abs() <= residual_tolerance(15.0));
        assert!((forces.forces[0] - 300.0).abs() < 1e-3);
    }

    #[test]
    fn identical_muscles_share_equally() {
        let (model, states) = toy_problem(
            &[
                vec![(DofId::ElbowFlexionL, 0.04)],
                vec![(DofId::ElbowFlexionL, 0.04)],
            ],
            &[500.0, 500.0],
        );
        let (act, _) =
            distribute_torques(&torque(DofId::ElbowFlexionL, 10.0), &states, &model).unwrap();
        assert!((act.activations[0] - act.activations[1]).abs() < 1e-9);
        let expected = 10.0 / (2.0 * 0.04 * 500.0);
        assert!((act.activations[0] - expected).abs() < 1e-6);
    }

    #[test]
    fn passive_torque_is_subtracted_from_demand() {
        let (model, mut states) = toy_problem(
            &[vec![(DofId::ElbowFlexionL, 0.05)]],
            &[600.0],
        );
        states.states[0].lnorm = 1.2; // stretched: F_PE > 0
        let (f_l, f_pe) = force_length(1.2, &model.muscles[0].hill);
        let (act, forces) =
            distribute_torques(&torque(DofId::ElbowFlexionL, 15.0), &states, &model).unwrap();
        let expected_a = (15.0 - 0.05 * f_pe) / (0.05 * 600.0 * f_l);
        assert!((act.activations[0] - expected_a).abs() < 1e-6);
        assert!(!forces.infeasible);
    }

    #[test]
    fn zero_demand_keeps_all_muscles_silent() {
        let (model, states) = toy_problem(
            &[
                vec![(DofId::ElbowFlexionL, 0.05)],
                vec![(DofId::ElbowFlexionL, -0.03)],
            ],
            &[600.0, 400.0],
        );
        let (act, forces) =
            distribute_torques(&torque(DofId::ElbowFlexionL, 0.0), &states, &model).unwrap();
        assert_eq!(act.activations, vec![0.0, 0.0]);
        assert_eq!(forces.forces, vec![0.0, 0.0]);
        assert!(!forces.infeasible);
    }

    #[test]
    fn infeasible_demand_saturates_and_flags() {
        let (model, states) = toy_problem(
            &[vec![(DofId::ElbowFlexionL, 0.05)]],
            &[600.0],
        );
        // Capacity is 0.05 * 600 = 30 N·m; ask for 60.
        let (act, forces) =
            distribute_torques(&torque(DofId::ElbowFlexionL, 60.0), &states, &model).unwrap();
        assert!(forces.infeasible);
        assert!(act.activations[0] >= 1.0 - 1e-9);
        assert_eq!(act.saturated, vec!["toy0".to_string()]);
        assert!(forces.forces[0] <= 600.0 + 1e-9);
    }

    #[test]
    fn skipped_dofs_are_reported_not_errored() {
        let (model, states) = toy_problem(
            &[vec![(DofId::ElbowFlexionL, 0.05)]],
            &[600.0],
        );
        let mut torques = [0.0; DOF_COUNT];
        torques[DofId::ElbowFlexionL as usize] = 6.0;
        torques[DofId::TrunkFlexion as usize] = 50.0; // nobody crosses it
        let (_, forces) = distribute_torques(
            &JointTorqueFrame { t_ms: 0, torques },
            &states,
            &model,
        )
        .unwrap();
        assert!(forces.skipped_dofs.contains(&DofId::TrunkFlexion));
        assert!(!forces.infeasible);
        assert_eq!(forces.residuals[DofId::TrunkFlexion as usize], 0.0);
    }

    #[test]
    fn determinism_bitwise() {
        let (model, states) = toy_problem(
            &[
                vec![(DofId::ElbowFlexionL, 0.05), (DofId::ShoulderFlexionL, 0.02)],
                vec![(DofId::ElbowFlexionL, -0.03), (DofId::ShoulderFlexionL, 0.04)],
                vec![(DofId::ShoulderFlexionL, 0.03)],
            ],
            &[600.0, 400.0, 500.0],
        );
        let mut torques = [0.0; DOF_COUNT];
        torques[DofId::ElbowFlexionL as usize] = 4.0;
        torques[DofId::ShoulderFlexionL as usize] = 7.0;
        let tf = JointTorqueFrame { t_ms: 0, torques };
        let (a1, f1) = distribute_torques(&tf, &states, &model).unwrap();
        let (a2, f2) = distribute_torques(&tf, &states, &model).unwrap();
        assert_eq!(a1.activations, a2.activations);
        assert_eq!(f1.forces, f2.forces);
        assert_eq!(f1.iterations, f2.iterations);
    }

    #[test]
    fn activation_scales_linearly_with_feasible_demand() {
        let (model, states) = toy_problem(
            &[vec![(DofId::ElbowFlexionL, 0.05)]],
            &[600.0],
        );
        let (a_full, _) =
            distribute_torques(&torque(DofId::ElbowFlexionL, 20.0), &states, &model).unwrap();
        for s in [0.25, 0.5, 0.75] {
            let (a_part, _) =
                distribute_torques(&torque(DofId::ElbowFlexionL, 20.0 * s), &states, &model)
                    .unwrap();
            assert!(
                (a_part.activations[0] - s * a_full.activations[0]).abs() < 1e-6,
                "scale {s}"
            );
        }
    }

    #[test]
    fn frame_work_examples() {
        let forces = MuscleForceFrame {
            t_ms: 0,
            forces: vec![100.0, 0.0],
            residuals: [0.0; DOF_COUNT],
            skipped_dofs: vec![],
            iterations: 1,
            infeasible: false,
        };
        let w = frame_work(&forces, 1.0 / 60.0);
        assert!((w.increments[0] - 100.0 / 60.0).abs() < 1e-12);
        assert_eq!(w.increments[1], 0.0);
    }

    #[test]
    fn static_hold_integrates_to_force_times_time() {
        let forces = MuscleForceFrame {
            t_ms: 0,
            forces: vec![42.0],
            residuals: [0.0; DOF_COUNT],
            skipped_dofs: vec![],
            iterations: 1,
            infeasible: false,
        };
        let dt = 1.0 / 60.0;
        let total: f64 = (0..60).map(|_| frame_work(&forces, dt).increments[0]).sum();
        assert!((total - 42.0).abs() < 1e-9);
    }

    // ------------------------------------------------------------------
    // Brute-force grid oracle

    /// Minimizes sum a^2 over the 0.001-step activation grid subject to the
    /// torque equations holding within a grid-induced band. Independent of
    /// the projected-Newton path; used to cross-check optimality.
    pub(crate) fn grid_oracle(coeff: &[Vec<f64>], demand: &[f64]) -> Option<Vec<f64>> {
        let n = coeff[0].len();
        let k = coeff.len();
        let step = 0.001;
        // Band per DOF: the worst-case torque shift from rounding every
        // activation half a step.
        let band: Vec<f64> = (0..k)
            .map(|row| {
                let slack: f64 = coeff[row].iter().map(|c| c.abs()).sum::<f64>() * (step / 2.0);
                slack.max(1e-9)
            })
            .collect();
        let feasible = |a: &[f64]| -> bool {
            for row in 0..k {
                let mut r = -demand[row];
                for i in 0..n {
                    r += coeff[row][i] * a[i];
                }
                if r.abs() > band[row] {
                    return false;
                }
            }
            true
        };
        let steps = 1001usize;
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut consider = |a: &[f64]| {
            if feasible(a) {
                let obj: f64 = a.iter().map(|x| x * x).sum();
                if best.as_ref().map_or(true, |(b, _)| obj < *b) {
                    best = Some((obj, a.to_vec()));
                }
            }
        };
        match n {
            1 => {
                for i in 0..steps {
                    consider(&[i as f64 * step]);
                }
            }
            2 => {
                for i in 0..steps {
                    for j in 0..steps {
                        consider(&[i as f64 * step, j as f64 * step]);
                    }
                }
            }
            3 => {
                // Scan the first two coordinates; for the third intersect the
                // per-DOF feasibility intervals and scan only grid points
                // inside. Equivalent to the full 1001^3 enumeration.
                for i in 0..steps {
                    for j in 0..steps {
                        let (a0, a1) = (i as f64 * step, j as f64 * step);
                        let mut lo = 0.0f64;
                        let mut hi = 1.0f64;
                        let mut empty = false;
                        for row in 0..k {
                            let base = coeff[row][0] * a0 + coeff[row][1] * a1 - demand[row];
                            let c2 = coeff[row][2];
                            if c2.abs() < 1e-15 {
                                if base.abs() > band[row] {
                                    empty = true;
                                    break;
                                }
                                continue;
                            }
                            let mut l = (-band[row] - base) / c2;
                            let mut h = (band[row] - base) / c2;
                            if l > h {
                                std::mem::swap(&mut l, &mut h);
                            }
                            lo = lo.max(l);
                            hi = hi.min(h);
                            if lo > hi {
                                empty = true;
                                break;
                            }
                        }
                        if empty {
                            continue;
                        }
                        let first = (lo / step).ceil().max(0.0) as usize;
                        let last = ((hi / step).floor().min(1000.0)).max(0.0) as usize;
                        for t in first..=last.min(1000) {
                            consider(&[a0, a1, t as f64 * step]);
                        }
                    }
                }
            }
            _ => unimplemented!("oracle supports up to 3 muscles"),
        }
        best.map(|(_, a)| a)
    }

    /// Random feasible problems: the solver must match the grid oracle to
    /// 0.01 per activation.
    #[test]
    fn matches_grid_oracle_on_toy_problems() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let mut checked = 0;
        while checked < 6 {
            let n = rng.gen_range(2..=3usize);
            let k = rng.gen_range(1..=2usize).min(n - 1).max(1);
            let dofs = [DofId::ElbowFlexionL, DofId::ShoulderFlexionL];
            let mut arms: Vec<Vec<(DofId, f64)>> = Vec::new();
            for _ in 0..n {
                let mut spans = Vec::new();
                for &d in dofs.iter().take(k) {
                    let r = rng.gen_range(0.02..0.08) * if rng.gen_bool(0.3) { -1.0 } else { 1.0 };
                    spans.push((d, r));
                }
                arms.push(spans);
            }
            let f_max: Vec<f64> = (0..n).map(|_| rng.gen_range(300.0..900.0)).collect();
            let (model, states) = toy_problem(&arms, &f_max);
            // Demand from a random interior activation vector.
            let a_true: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..0.7)).collect();
            let mut torques = [0.0; DOF_COUNT];
            let mut coeff = vec![vec![0.0; n]; k];
            for (row, &d) in dofs.iter().take(k).enumerate() {
                for i in 0..n {
                    coeff[row][i] = states.states[i].moment_arms[d as usize] * f_max[i];
                    torques[d as usize] += coeff[row][i] * a_true[i];
                }
            }
            let demand: Vec<f64> = dofs.iter().take(k).map(|&d| torques[d as usize]).collect();
            let Some(oracle) = grid_oracle(&coeff, &demand) else {
                continue;
            };
            let (act, forces) = distribute_torques(
                &JointTorqueFrame { t_ms: 0, torques },
                &states,
                &model,
            )
            .unwrap();
            assert!(!forces.infeasible);
            for i in 0..n {
                assert!(
                    (act.activations[i] - oracle[i]).abs() <= 0.01,
                    "muscle {i}: solver {} vs oracle {}",
                    act.activations[i],
                    oracle[i]
                );
            }
            checked += 1;
        }
    }

    /// KKT sanity: perturbing any unsaturated activation downward and
    /// re-projecting breaks the torque equality.
    #[test]
    fn kkt_downward_perturbation_violates_equality() {
        let (model, states) = toy_problem(
            &[
                vec![(DofId::ElbowFlexionL, 0.05)],
                vec![(DofId::ElbowFlexionL, 0.03)],
            ],
            &[600.0, 500.0],
        );
        let tau = 12.0;
        let (act, _) =
            distribute_torques(&torque(DofId::ElbowFlexionL, tau), &states, &model).unwrap();
        let coeff = [0.05 * 600.0, 0.03 * 500.0];
        for i in 0..2 {
            if act.activations[i] >= 1.0 - 1e-9 || act.activations[i] <= 1e-9 {
                continue;
            }
            let mut perturbed = act.activations.clone();
            perturbed[i] = (perturbed[i] - 0.05).max(0.0);
            let achieved: f64 = perturbed.iter().zip(coeff.iter()).map(|(a, c)| a * c).sum();
            assert!(
                (achieved - tau).abs() > residual_tolerance(tau),
                "lowering a[{i}] should violate the equality"
            );
        }
    }
}
