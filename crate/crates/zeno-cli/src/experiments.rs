//! Experiment runners. Each produces a [`Table`]; trajectory fan-out uses
//! the ambient rayon pool but aggregates in index order, so the emitted
//! bytes are independent of the thread count.

use rayon::prelude::*;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::CliError;
use crate::output::{Cell, Table};
use zeno::{
    build_h_cond, cook_population, eig_with_reciprocal, ideal_period_stats, integrate_master,
    itano_bloch_population, period_statistics_with_margin, sample_ideal_path, simulate_schedule,
    CVector, DensityMatrix, Epsilons, Level, PeriodKind, PeriodMode, PulseSchedule,
    TrajectorySeed, DEFAULT_DEGENERACY_GAP,
};

/// Pulse counts of the survival-probability table.
pub const ITANO_PULSE_COUNTS: [usize; 7] = [1, 2, 4, 8, 16, 32, 64];

/// Stream-index offset separating ideal-path draws from jump-trajectory
/// draws under one master seed.
const IDEAL_STREAM_BASE: u64 = 1 << 32;

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    match cfg.experiment {
        Experiment::ItanoTable => run_itano(cfg),
        Experiment::SingleAtomPeriods => run_periods(cfg),
        Experiment::TrajectoryPaths => run_paths(cfg),
        Experiment::EigenCheck => run_eigen(cfg),
        Experiment::BlochCheck => run_bloch(cfg),
    }
}

/// Mean level-2 population over `count` trajectories started in |1⟩, with
/// the sample-proportion standard error √(m(1−m)/N).
fn mc_population2(
    cfg: &ExperimentConfig,
    schedule: &PulseSchedule,
    stream_base: u64,
    count: usize,
) -> Result<(f64, f64), CliError> {
    let psi0 = CVector::basis(3, 0);
    let values: Vec<zeno::Result<f64>> = (0..count)
        .into_par_iter()
        .map(|k| {
            let seed = TrajectorySeed::new(cfg.master_seed, stream_base + k as u64);
            simulate_schedule(&psi0, &cfg.params, schedule, seed)
                .map(|t| t.final_state[1].norm_sqr())
        })
        .collect();
    let values: Vec<f64> = values.into_iter().collect::<zeno::Result<_>>()?;
    let mean = values.iter().sum::<f64>() / count as f64;
    let se = (mean * (1.0 - mean) / count as f64).max(0.0).sqrt();
    Ok((mean, se))
}

/// Survival-probability table: for n ∈ {1, 2, 4, 8, 16, 32, 64} pulses
/// tiling one π-pulse time, the projection-postulate prediction with the
/// full interval, the same with the pulse time subtracted, the trajectory
/// Monte Carlo estimate, and the master-equation value.
///
/// The π-pulse time comes from the schedule (`t_pi`, or n·(τ_p + Δt) for
/// free-form schedules); the tiling itself is rebuilt per row, so the
/// configured `n_pulses` does not enter.
fn run_itano(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let t_pi = cfg
        .schedule
        .pi_pulse_total
        .unwrap_or_else(|| cfg.schedule.n_pulses as f64 * cfg.schedule.cycle());
    let tau_p = cfg.schedule.tau_p;
    let omega2 = cfg.params.omega2;
    let mut table = Table::new(
        cfg.content_hash(),
        vec!["n", "proj_dt", "proj_dt_minus_taup", "quantum_jump_mc", "mc_stderr", "bloch"],
    );
    for (row, &n) in ITANO_PULSE_COUNTS.iter().enumerate() {
        let dt_full = t_pi / n as f64;
        let dt_gap = dt_full - tau_p;
        if !(dt_gap > 0.0) {
            return Err(CliError::validation_msg(format!(
                "pulse time τ_p = {tau_p} leaves no gap at n = {n} (T_π = {t_pi})"
            )));
        }
        let proj_full = cook_population(n as u32, dt_full, omega2);
        let proj_gap = cook_population(n as u32, dt_gap, omega2);
        let schedule = PulseSchedule::itano(n, t_pi, tau_p).map_err(CliError::validation)?;
        let stream_base = (row * cfg.trajectories) as u64;
        let (mc, se) = mc_population2(cfg, &schedule, stream_base, cfg.trajectories)?;
        let bloch = itano_bloch_population(n, &cfg.params, t_pi, tau_p, cfg.step)?;
        table.push_row(vec![
            Cell::Int(n as i64),
            Cell::Prob(proj_full),
            Cell::Prob(proj_gap),
            Cell::Prob(mc),
            Cell::Prob(se),
            Cell::Prob(bloch),
        ]);
    }
    Ok(table)
}

fn kind_name(kind: PeriodKind) -> &'static str {
    match kind {
        PeriodKind::Light => "light",
        PeriodKind::Dark => "dark",
    }
}

/// Light/dark period census: every interior period of every trajectory,
/// followed by two summary rows comparing the Monte Carlo means against the
/// per-cycle switching model, its vanishing-gap limit, and the ideal
/// projection picture evaluated at the gap length.
fn run_periods(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let schedule = &cfg.schedule;
    let psi0 = CVector::basis(3, 0);
    let trajectories: Vec<zeno::Result<Vec<(usize, zeno::PeriodRecord)>>> = (0..cfg.trajectories)
        .into_par_iter()
        .map(|k| {
            let seed = TrajectorySeed::new(cfg.master_seed, k as u64);
            simulate_schedule(&psi0, &cfg.params, schedule, seed).map(|t| {
                zeno::extract_periods(&t, schedule).into_iter().map(|p| (k, p)).collect()
            })
        })
        .collect();
    let mut periods: Vec<(usize, zeno::PeriodRecord)> = Vec::new();
    for traj in trajectories {
        periods.extend(traj?);
    }

    let analytic = period_statistics_with_margin(
        &cfg.params,
        schedule.dt,
        schedule.tau_p,
        PeriodMode::Analytic,
        cfg.margin,
    )?;
    let limit = period_statistics_with_margin(
        &cfg.params,
        schedule.dt,
        schedule.tau_p,
        PeriodMode::ShelvingLimit,
        cfg.margin,
    )?;
    let ideal = ideal_period_stats(schedule.dt, cfg.params.omega2)?;

    let mut table = Table::new(
        cfg.content_hash(),
        vec![
            "row_type",
            "trajectory",
            "kind",
            "pulse_count",
            "duration",
            "count",
            "mc_mean",
            "mc_se",
            "analytic_mean",
            "limit_mean",
            "ideal_mean",
            "ideal_std",
        ],
    );
    for (traj, record) in &periods {
        table.push_row(vec![
            Cell::text("period"),
            Cell::Int(*traj as i64),
            Cell::text(kind_name(record.kind)),
            Cell::Int(record.pulse_count as i64),
            Cell::Time(record.duration),
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
        ]);
    }
    for kind in [PeriodKind::Light, PeriodKind::Dark] {
        let durations: Vec<f64> =
            periods.iter().filter(|(_, r)| r.kind == kind).map(|(_, r)| r.duration).collect();
        let count = durations.len();
        let (mean_cell, se_cell) = if count == 0 {
            (Cell::Empty, Cell::Empty)
        } else {
            let mean = durations.iter().sum::<f64>() / count as f64;
            let se = if count >= 2 {
                let var = durations.iter().map(|d| (d - mean).powi(2)).sum::<f64>()
                    / (count - 1) as f64;
                Cell::Time((var / count as f64).sqrt())
            } else {
                Cell::Empty
            };
            (Cell::Time(mean), se)
        };
        let (analytic_mean, limit_mean) = match kind {
            PeriodKind::Light => (analytic.0, limit.0),
            PeriodKind::Dark => (analytic.1, limit.1),
        };
        table.push_row(vec![
            Cell::text("summary"),
            Cell::Empty,
            Cell::text(kind_name(kind)),
            Cell::Empty,
            Cell::Empty,
            Cell::Int(count as i64),
            mean_cell,
            se_cell,
            Cell::Time(analytic_mean),
            Cell::Time(limit_mean),
            Cell::Time(ideal.0),
            Cell::Time(ideal.1),
        ]);
    }
    Ok(table)
}

/// Step-series output: per trajectory, the per-pulse fluorescence telegraph
/// (`series = fluorescence`, value 1 when the pulse produced at least one
/// photon) and an ideal-measurement population path (`series = ideal`) over
/// the same number of projections spaced by the gap length.
fn run_paths(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let schedule = &cfg.schedule;
    let psi0 = CVector::basis(3, 0);
    let jump_rows: Vec<zeno::Result<Vec<(usize, f64, bool)>>> = (0..cfg.trajectories)
        .into_par_iter()
        .map(|k| {
            let seed = TrajectorySeed::new(cfg.master_seed, k as u64);
            simulate_schedule(&psi0, &cfg.params, schedule, seed).map(|t| {
                t.pulse_flags
                    .iter()
                    .enumerate()
                    .map(|(j, &flag)| (j, schedule.pulse_window(j).1, flag))
                    .collect()
            })
        })
        .collect();

    let mut table = Table::new(
        cfg.content_hash(),
        vec!["series", "trajectory", "index", "time", "value"],
    );
    for (k, rows) in jump_rows.into_iter().enumerate() {
        for (j, time, flag) in rows? {
            table.push_row(vec![
                Cell::text("fluorescence"),
                Cell::Int(k as i64),
                Cell::Int(j as i64),
                Cell::Time(time),
                Cell::Int(flag as i64),
            ]);
        }
    }
    for k in 0..cfg.trajectories {
        let mut rng = TrajectorySeed::new(cfg.master_seed, IDEAL_STREAM_BASE + k as u64).rng();
        let path = sample_ideal_path(
            Level::One,
            schedule.n_pulses as u32,
            schedule.dt,
            cfg.params.omega2,
            &mut rng,
        );
        for (i, &(t, p2)) in path.population_trace.iter().enumerate() {
            table.push_row(vec![
                Cell::text("ideal"),
                Cell::Int(k as i64),
                Cell::Int(i as i64),
                Cell::Time(t),
                Cell::Prob(p2),
            ]);
        }
    }
    Ok(table)
}

/// Phase-invariant distance between two unit-normalized complex directions.
fn direction_distance(a: &CVector, b: &CVector) -> zeno::Result<f64> {
    let overlap = a.normalized()?.dot(&b.normalized()?).norm();
    Ok((2.0f64 - 2.0 * overlap).max(0.0).sqrt())
}

/// Eigenstructure comparison of the no-emission generator with both drives
/// on: the three numeric eigenvalues sorted by decay rate, and the
/// first-order slow-mode predictions next to their numeric counterparts.
fn run_eigen(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let eps = Epsilons::for_params(&cfg.params).map_err(CliError::validation)?;
    let h = build_h_cond(&cfg.params, true, true);
    let eig = eig_with_reciprocal(&h, DEFAULT_DEGENERACY_GAP)?;
    let mut order: Vec<usize> = (0..3).collect();
    // Amplitude decay rate of mode z is −Im z; the slow mode comes first.
    order.sort_by(|&a, &b| {
        let rate = |i: usize| -eig.eigenvalues[i].im;
        rate(a).partial_cmp(&rate(b)).expect("finite eigenvalues")
    });
    let (lambda2_pert, v2_pert, w2_pert) = zeno::perturbative_eigensystem(&cfg.params)?;
    let slow = order[0];
    let num_rate = -eig.eigenvalues[slow].im;
    let abs_err = (lambda2_pert.re - num_rate).abs();

    let mut table = Table::new(cfg.content_hash(), vec!["name", "value"]);
    let mut push = |name: &'static str, value: f64| {
        table.push_row(vec![Cell::text(name), Cell::Sci(value)]);
    };
    push("eps_a", eps.eps_a);
    push("eps_r", eps.eps_r);
    push("eps_p", eps.eps_p);
    push("eps_max", eps.eps_max);
    for (slot, &idx) in order.iter().enumerate() {
        let z = eig.eigenvalues[idx];
        match slot {
            0 => {
                push("lambda_slow_re", z.re);
                push("lambda_slow_im", z.im);
            }
            1 => {
                push("lambda_fast1_re", z.re);
                push("lambda_fast1_im", z.im);
            }
            _ => {
                push("lambda_fast2_re", z.re);
                push("lambda_fast2_im", z.im);
            }
        }
    }
    push("lambda2_pert_rate", lambda2_pert.re);
    push("lambda2_num_rate", num_rate);
    push("lambda2_abs_err", abs_err);
    push("lambda2_rel_err", if num_rate != 0.0 { abs_err / num_rate } else { f64::NAN });
    push("v2_distance", direction_distance(&v2_pert, &eig.right_vectors[slow])?);
    push("w2_distance", direction_distance(&w2_pert, &eig.reciprocal_vectors[slow])?);
    table.push_row(vec![Cell::text("degenerate"), Cell::Int(eig.is_degenerate as i64)]);
    Ok(table)
}

/// Integrator diagnostics on the configured schedule: final populations and
/// worst trace drift at the configured step and two halvings, from which a
/// fourth-order convergence ratio can be read off.
fn run_bloch(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let rho0 = DensityMatrix::from_pure(&CVector::basis(3, 0))?;
    let mut table = Table::new(
        cfg.content_hash(),
        vec!["step", "rho11", "rho22", "rho33", "max_trace_dev"],
    );
    for divisor in [1.0, 2.0, 4.0] {
        let step = cfg.step / divisor;
        let sol = integrate_master(&rho0, &cfg.params, &cfg.schedule, step)?;
        table.push_row(vec![
            Cell::Sci(step),
            Cell::Sci(sol.final_rho.level_population(0)),
            Cell::Sci(sol.final_rho.level_population(1)),
            Cell::Sci(sol.final_rho.level_population(2)),
            Cell::Sci(sol.max_trace_deviation),
        ]);
    }
    Ok(table)
}
