//! Built-in verification suite: eight numbered checks covering the survival
//! table, the unraveling/master-equation agreement, first-order error
//! scaling, period statistics, the shelving limit, integrator hygiene, and
//! output determinism. Each check prints one pass/fail line; the same
//! functions back both `zeno selftest` and the acceptance test target.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use zeno::{
    build_h_cond, cook_population, eig_with_reciprocal, ideal_period_stats, integrate_master,
    itano_bloch_population, no_photon_probability, period_statistics_with_margin,
    perturbative_eigensystem, post_pulse_states, sample_ideal_path, simulate_schedule,
    AtomParams, CMatrix, CVector, ChaCha8Rng, DensityMatrix, Level, P0Mode, PeriodKind,
    PeriodMode, PulseSchedule, TrajectorySeed, C64, DEFAULT_DEGENERACY_GAP,
};

pub const CRITERIA_COUNT: u8 = 8;

/// Result of one numbered check.
#[derive(Clone, Debug)]
pub struct CriterionOutcome {
    pub number: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {} {} — {}: {}",
            self.number,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.detail
        )
    }
}

/// Runs check `number` (1-based). `exe` is the path of the command-line
/// binary, needed only by the determinism check, which re-invokes it.
pub fn run_criterion(number: u8, exe: Option<&Path>) -> CriterionOutcome {
    let (title, result) = match number {
        1 => ("survival table, full interval", criterion_1()),
        2 => ("survival table, pulse-corrected interval", criterion_2()),
        3 => ("trajectory ensemble vs. master equation", criterion_3()),
        4 => ("first-order error scaling", criterion_4()),
        5 => ("light/dark period statistics", criterion_5()),
        6 => ("vanishing-gap period limits", criterion_6()),
        7 => ("integrator and eigensolver hygiene", criterion_7()),
        8 => ("byte-identical output across thread counts", criterion_8(exe)),
        other => panic!("criterion number must be 1..=8, got {other}"),
    };
    CriterionOutcome { number, title, passed: result.0, detail: result.1 }
}

pub fn run_all(exe: Option<&Path>) -> Vec<CriterionOutcome> {
    (1..=CRITERIA_COUNT).map(|k| run_criterion(k, exe)).collect()
}

// ---------------------------------------------------------------------------
// shared helpers

/// Accumulates sub-checks into a single pass/fail verdict with a compact
/// report. Failures always surface in the detail string.
struct Acc {
    ok: bool,
    notes: Vec<String>,
}

impl Acc {
    fn new() -> Self {
        Acc { ok: true, notes: Vec::new() }
    }

    fn check(&mut self, ok: bool, note: String) {
        if !ok {
            self.ok = false;
            self.notes.push(format!("FAIL[{note}]"));
        }
    }

    fn note(&mut self, note: String) {
        self.notes.push(note);
    }

    fn finish(self) -> (bool, String) {
        (self.ok, self.notes.join("; "))
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample standard deviation together with its own standard error,
/// propagated from the fourth central moment.
fn std_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let std = var.sqrt();
    let se = ((m4 - var * var).max(0.0) / n).sqrt() / (2.0 * std);
    (std, se)
}

/// Least-squares slope of y against x.
fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

fn normalize_trace(m: &CMatrix) -> CMatrix {
    m.scale(C64::new(1.0 / m.trace().re, 0.0))
}

/// Level-2 population after `n` projective measurements, by direct
/// iteration of the two-outcome measurement chain — an oracle independent
/// of the closed form it validates.
fn chain_population(n: u32, dt: f64, omega2: f64) -> f64 {
    let flip = (omega2 * dt / 2.0).sin().powi(2);
    let (mut p1, mut p2) = (1.0, 0.0);
    for _ in 0..n {
        let moved = p1 * flip - p2 * flip;
        p1 -= moved;
        p2 += moved;
    }
    p2
}

/// Mean level-2 population over seeded trajectories started in |1⟩, with
/// the sample-proportion standard error.
fn mc_population2(
    params: &AtomParams,
    schedule: &PulseSchedule,
    master_seed: u64,
    stream_base: u64,
    count: usize,
) -> zeno::Result<(f64, f64)> {
    let psi0 = CVector::basis(3, 0);
    let values: Vec<zeno::Result<f64>> = (0..count)
        .into_par_iter()
        .map(|k| {
            let seed = TrajectorySeed::new(master_seed, stream_base + k as u64);
            simulate_schedule(&psi0, params, schedule, seed)
                .map(|t| t.final_state[1].norm_sqr())
        })
        .collect();
    let values: Vec<f64> = values.into_iter().collect::<zeno::Result<_>>()?;
    let mean = values.iter().sum::<f64>() / count as f64;
    let se = (mean * (1.0 - mean) / count as f64).max(0.0).sqrt();
    Ok((mean, se))
}

// ---------------------------------------------------------------------------
// 1. survival table, full interval

const TABLE_COL1: [(u32, f64); 6] = [
    (1, 1.00000),
    (2, 0.50000),
    (4, 0.37500),
    (8, 0.23460),
    (16, 0.13343),
    (32, 0.07156),
];
/// Tabulated n = 64 first-column entry; see the annotation emitted below.
const TABLE_COL1_N64: f64 = 0.00371;

fn criterion_1() -> (bool, String) {
    let mut acc = Acc::new();
    let omega2 = std::f64::consts::PI / 256.0;
    let mut worst = 0.0f64;
    for &(n, expected) in &TABLE_COL1 {
        let dt = 256.0 / n as f64;
        let got = cook_population(n, dt, omega2);
        let oracle = chain_population(n, dt, omega2);
        acc.check(
            (got - oracle).abs() <= 1e-12,
            format!("closed form vs. measurement chain at n = {n}: |Δ| = {:.1e}", (got - oracle).abs()),
        );
        worst = worst.max((got - expected).abs());
        acc.check(
            (got - expected).abs() <= 5e-6,
            format!("n = {n}: got {got:.5}, expected {expected:.5}"),
        );
    }
    let n64 = cook_population(64, 4.0, omega2);
    let n64_oracle = chain_population(64, 4.0, omega2);
    acc.check(
        (n64 - n64_oracle).abs() <= 1e-12,
        format!("n = 64 closed form vs. chain: |Δ| = {:.1e}", (n64 - n64_oracle).abs()),
    );
    acc.check(
        (n64 - 0.03712).abs() <= 5e-6,
        format!("n = 64 formula value {n64:.5} differs from 0.03712"),
    );
    acc.note(format!("n ≤ 32 max |Δ| = {worst:.2e}"));
    acc.note(format!(
        "n = 64: emitting the formula value {n64:.5}; the tabulated entry {TABLE_COL1_N64:.5} \
         disagrees and its digits are a transposition of {n64:.5}, so it is treated as a misprint"
    ));
    acc.finish()
}

// ---------------------------------------------------------------------------
// 2. survival table, pulse-corrected interval

const TABLE_COL2: [(u32, f64); 7] = [
    (1, 0.99978),
    (2, 0.49957),
    (4, 0.35985),
    (8, 0.20857),
    (16, 0.10029),
    (32, 0.03642),
    (64, 0.00613),
];

fn criterion_2() -> (bool, String) {
    let mut acc = Acc::new();
    let omega2 = std::f64::consts::PI / 256.0;
    let tau_p = 2.4;
    let mut worst = 0.0f64;
    for &(n, expected) in &TABLE_COL2 {
        let dt = 256.0 / n as f64 - tau_p;
        let got = cook_population(n, dt, omega2);
        worst = worst.max((got - expected).abs());
        acc.check(
            (got - expected).abs() <= 5e-6,
            format!("n = {n}: got {got:.5}, expected {expected:.5}"),
        );
    }
    // Recover the pulse fraction from the n = 1 entry alone:
    // ½(1 − cos(Ω₂(T_π − τ_p))) = v  ⇒  τ_p = T_π − acos(1 − 2v)/Ω₂,
    // the exact least-squares solution for a single data point.
    let v = TABLE_COL2[0].1;
    let fitted_tau = 256.0 - (1.0 - 2.0 * v).acos() / omega2;
    let fitted_fraction = fitted_tau / 256.0;
    let stated_fraction = tau_p / 256.0;
    let rel = (fitted_fraction / stated_fraction - 1.0).abs();
    acc.check(
        rel <= 0.01,
        format!("fitted pulse fraction {fitted_fraction:.6} vs {stated_fraction:.6}"),
    );
    acc.note(format!(
        "max |Δ| = {worst:.2e}; pulse fraction fitted from the n = 1 entry: {fitted_fraction:.6} \
         vs 2.4/256 = {stated_fraction:.6} ({:+.2}%)",
        100.0 * (fitted_fraction / stated_fraction - 1.0)
    ));
    acc.finish()
}

// ---------------------------------------------------------------------------
// 3. trajectory ensemble vs. master equation

/// Independently computed master-equation populations for the preset below
/// (fixed-step RK4 at step 4e-4), frozen before the trajectory comparison
/// was first run.
const BLOCH_ANCHORS: [(usize, f64); 4] = [
    (1, 0.40899180),
    (2, 0.47516133),
    (4, 0.07912826),
    (8, 0.48821376),
];
const C3_TRAJECTORIES: usize = 100_000;

fn criterion_3() -> (bool, String) {
    let mut acc = Acc::new();
    let params = match AtomParams::new(1.0, 50.0, 20.0) {
        Ok(p) => p,
        Err(e) => return (false, format!("FAIL[params: {e}]")),
    };
    let (t_pi, tau_p) = (32.0, 2.0);
    let step = zeno::default_step(&params);
    let mut worst_gap = 0.0f64;
    for (row, &(n, anchor)) in BLOCH_ANCHORS.iter().enumerate() {
        let bloch = match itano_bloch_population(n, &params, t_pi, tau_p, step) {
            Ok(v) => v,
            Err(e) => {
                acc.check(false, format!("master equation at n = {n}: {e}"));
                continue;
            }
        };
        acc.check(
            (bloch - anchor).abs() <= 1e-4,
            format!("integrator at n = {n}: {bloch:.8} vs frozen {anchor:.8}"),
        );
        let schedule = match PulseSchedule::itano(n, t_pi, tau_p) {
            Ok(s) => s,
            Err(e) => {
                acc.check(false, format!("schedule at n = {n}: {e}"));
                continue;
            }
        };
        let stream_base = (row * C3_TRAJECTORIES) as u64;
        let (mc, se) =
            match mc_population2(&params, &schedule, 0xC3A0, stream_base, C3_TRAJECTORIES) {
                Ok(v) => v,
                Err(e) => {
                    acc.check(false, format!("trajectories at n = {n}: {e}"));
                    continue;
                }
            };
        let gap = (mc - bloch).abs();
        let bound = (3.0 * se).max(1e-3);
        worst_gap = worst_gap.max(gap);
        acc.check(
            gap <= bound,
            format!("n = {n}: |MC − master| = {gap:.2e} > max(3σ, 1e-3) = {bound:.2e}"),
        );
    }
    acc.note(format!(
        "{C3_TRAJECTORIES} trajectories per point, n ∈ {{1, 2, 4, 8}}, worst gap {worst_gap:.2e} \
         (bound max(3σ, 1e-3))"
    ));
    acc.finish()
}

// ---------------------------------------------------------------------------
// 4. first-order error scaling

fn criterion_4() -> (bool, String) {
    let mut acc = Acc::new();
    let eps_values = [0.002, 0.01, 0.05];
    let tau_p = 4.0;
    let psi0 = CVector::basis(3, 1);
    let mut lambda_errs = Vec::new();
    let mut state_errs = Vec::new();
    let mut silent_errs = Vec::new();
    let mut p0_errs = Vec::new();
    for &eps in &eps_values {
        // Ω₂/A₃ is the largest of the three small ratios at Ω₃ = 50, A₃ = 20,
        // so ε_max sweeps via Ω₂ = A₃·ε.
        let params = match AtomParams::new(20.0 * eps, 50.0, 20.0) {
            Ok(p) => p,
            Err(e) => return (false, format!("FAIL[params: {e}]")),
        };
        let h = build_h_cond(&params, true, true);
        let eig = match eig_with_reciprocal(&h, DEFAULT_DEGENERACY_GAP) {
            Ok(e) => e,
            Err(e) => return (false, format!("FAIL[eigensolver: {e}]")),
        };
        let slow = (0..3)
            .min_by(|&a, &b| {
                let rate = |i: usize| -eig.eigenvalues[i].im;
                rate(a).partial_cmp(&rate(b)).unwrap()
            })
            .unwrap();
        let num_rate = -eig.eigenvalues[slow].im;
        let (lambda_pert, _, _) = match perturbative_eigensystem(&params) {
            Ok(v) => v,
            Err(e) => return (false, format!("FAIL[slow mode: {e}]")),
        };
        // The slow rate itself is O(ε²), so the absolute gap would scale as
        // ε⁴; the relative error is the quantity with the advertised slope.
        lambda_errs.push((lambda_pert.re - num_rate).abs() / num_rate);

        let states = match post_pulse_states(&params, tau_p) {
            Ok(s) => s,
            Err(e) => return (false, format!("FAIL[correction states: {e}]")),
        };
        // Reference for the projected silent state: propagate ψ₀ exactly
        // through the pulse, project onto the 1–2 subspace, renormalize.
        let proj_exact = match silent_projected_exact(&params, &psi0, tau_p) {
            Ok(m) => m,
            Err(e) => return (false, format!("FAIL[exact silent state: {e}]")),
        };
        state_errs.push(states.no_emission_projected.sub(&proj_exact).frobenius_norm());
        // The 3×3 counterpart is held to the error bound only.
        let rho_silent_num =
            normalize_trace(&eig.right_vectors[slow].outer(&eig.right_vectors[slow]));
        silent_errs.push(states.no_emission_pulse_end.sub(&rho_silent_num).frobenius_norm());

        let exact = no_photon_probability(&psi0, &params, true, true, tau_p, P0Mode::Exact);
        let pert = no_photon_probability(&psi0, &params, true, true, tau_p, P0Mode::Perturbative);
        match (exact, pert) {
            (Ok(e), Ok(p)) => p0_errs.push((e - p).abs()),
            (e, p) => return (false, format!("FAIL[silence probability: {e:?} / {p:?}]")),
        }
    }
    let log_eps: Vec<f64> = eps_values.iter().map(|e| e.ln()).collect();
    for (name, errs) in [
        ("slow rate", &lambda_errs),
        ("projected silent state", &state_errs),
        ("silence prob", &p0_errs),
    ] {
        let slope = fit_slope(&log_eps, &errs.iter().map(|e| e.ln()).collect::<Vec<_>>());
        acc.check(
            (slope - 2.0).abs() <= 0.3,
            format!("{name} log-log slope {slope:.3} outside 2 ± 0.3"),
        );
        for (err, eps) in errs.iter().zip(&eps_values) {
            acc.check(
                *err <= 10.0 * eps * eps,
                format!("{name} error {err:.2e} exceeds 10·ε² = {:.2e} at ε = {eps}", 10.0 * eps * eps),
            );
        }
        acc.note(format!("{name}: slope {slope:.3}, errors ≤ 10·ε²"));
    }
    for (err, eps) in silent_errs.iter().zip(&eps_values) {
        acc.check(
            *err <= 10.0 * eps * eps,
            format!("end-of-pulse silent state error {err:.2e} exceeds 10·ε² at ε = {eps}"),
        );
    }
    acc.note(format!(
        "end-of-pulse silent state within bound at all ε (worst {:.1e})",
        silent_errs.iter().cloned().fold(0.0, f64::max)
    ));
    acc.finish()
}

/// Exact projected silent state: the atom that survives the pulse without
/// emitting ends in U(τ_p)ψ₀ normalized; after the third level empties the
/// observable state is its 1–2 block, renormalized.
fn silent_projected_exact(
    params: &AtomParams,
    psi0: &CVector,
    tau_p: f64,
) -> zeno::Result<CMatrix> {
    let u = zeno::cond_propagator(params, true, true, tau_p)?;
    let psi = u.mul_vec(psi0).normalized()?;
    let v = CVector::new2(psi[0], psi[1]).normalized()?;
    Ok(v.outer(&v))
}

// ---------------------------------------------------------------------------
// 5. light/dark period statistics

fn criterion_5() -> (bool, String) {
    let mut acc = Acc::new();
    let params = match AtomParams::new(0.4, 50.0, 20.0) {
        Ok(p) => p,
        Err(e) => return (false, format!("FAIL[params: {e}]")),
    };
    let (tau_p, dt) = (2.0, 1.25);
    let schedule = match PulseSchedule::new(tau_p, dt, 170_000, dt, true) {
        Ok(s) => s,
        Err(e) => return (false, format!("FAIL[schedule: {e}]")),
    };
    let psi0 = CVector::basis(3, 0);
    let trajectory =
        match simulate_schedule(&psi0, &params, &schedule, TrajectorySeed::new(0xC5, 0)) {
            Ok(t) => t,
            Err(e) => return (false, format!("FAIL[trajectory: {e}]")),
        };
    let periods = zeno::extract_periods(&trajectory, &schedule);
    acc.check(periods.len() >= 10_000, format!("only {} interior periods", periods.len()));
    let analytic =
        match period_statistics_with_margin(&params, dt, tau_p, PeriodMode::Analytic, 10.0) {
            Ok(v) => v,
            Err(e) => return (false, format!("FAIL[analytic means: {e}]")),
        };
    let mut mc_means = [0.0f64; 2];
    for (idx, kind) in [PeriodKind::Light, PeriodKind::Dark].into_iter().enumerate() {
        let durations: Vec<f64> =
            periods.iter().filter(|r| r.kind == kind).map(|r| r.duration).collect();
        let (mean, se) = mean_and_se(&durations);
        mc_means[idx] = mean;
        let expected = if kind == PeriodKind::Light { analytic.0 } else { analytic.1 };
        acc.check(
            (mean - expected).abs() <= 3.0 * se,
            format!(
                "{} periods: mean {mean:.2} vs analytic {expected:.2} (3σ = {:.2})",
                if kind == PeriodKind::Light { "light" } else { "dark" },
                3.0 * se
            ),
        );
        acc.note(format!(
            "{}: {} periods, mean {mean:.2} vs {expected:.2} ± {:.2}",
            if kind == PeriodKind::Light { "light" } else { "dark" },
            durations.len(),
            se
        ));
    }

    // Ideal-measurement sampler against the geometric-run closed forms.
    let (ideal_mean, ideal_std) = match ideal_period_stats(dt, params.omega2) {
        Ok(v) => v,
        Err(e) => return (false, format!("FAIL[ideal closed form: {e}]")),
    };
    let mut rng = TrajectorySeed::new(0xC5, 1).rng();
    let path = sample_ideal_path(Level::One, 1_000_000, dt, params.omega2, &mut rng);
    let mut runs: Vec<f64> = Vec::new();
    let mut current = 1usize;
    for pair in path.outcomes.windows(2) {
        if pair[1] == pair[0] {
            current += 1;
        } else {
            runs.push(current as f64 * dt);
            current = 1;
        }
    }
    // The first run is kept (the path starts on a fresh projection); the
    // trailing run is censored by the end of the path and dropped.
    let (run_mean, run_mean_se) = mean_and_se(&runs);
    let (run_std, run_std_se) = std_and_se(&runs);
    acc.check(
        (run_mean - ideal_mean).abs() <= 3.0 * run_mean_se,
        format!("ideal sampler mean {run_mean:.3} vs {ideal_mean:.3} (3σ = {:.3})", 3.0 * run_mean_se),
    );
    acc.check(
        (run_std - ideal_std).abs() <= 3.0 * run_std_se,
        format!("ideal sampler std {run_std:.3} vs {ideal_std:.3} (3σ = {:.3})", 3.0 * run_std_se),
    );
    acc.note(format!(
        "ideal sampler: {} runs, mean {run_mean:.3} vs {ideal_mean:.3}, std {run_std:.3} vs {ideal_std:.3}",
        runs.len()
    ));

    // Asymmetry: exiting a dark run is more likely than exiting a light one,
    // so dark periods are shorter, both analytically and in the sample.
    let pq = zeno::transition_probs_pq(&params, dt, tau_p);
    match pq {
        Ok((p, q)) => {
            acc.check(
                (1.0 - q) > p,
                format!("switching asymmetry: 1 − q = {:.4} not above p = {p:.4}", 1.0 - q),
            );
            acc.note(format!("asymmetry: p = {p:.4}, 1 − q = {:.4}", 1.0 - q));
        }
        Err(e) => acc.check(false, format!("switching probabilities: {e}")),
    }
    acc.check(
        mc_means[1] < mc_means[0],
        format!("sampled dark mean {:.2} not below light mean {:.2}", mc_means[1], mc_means[0]),
    );
    acc.finish()
}

// ---------------------------------------------------------------------------
// 6. vanishing-gap period limits

fn criterion_6() -> (bool, String) {
    let mut acc = Acc::new();
    let params = AtomParams::reference();
    let tau_p = 2.0;
    let (limit_light, limit_dark) =
        match period_statistics_with_margin(&params, 0.1, tau_p, PeriodMode::ShelvingLimit, 0.0) {
            Ok(v) => v,
            Err(e) => return (false, format!("FAIL[limits: {e}]")),
        };
    acc.check(
        (limit_light - 1687.5).abs() <= 1e-9 && (limit_dark - 125.0).abs() <= 1e-9,
        format!("limit values {limit_light} / {limit_dark} differ from 1687.5 / 125"),
    );
    // The limits describe continuous drives, so the sweep crosses below the
    // pulsed-regime gap gates on purpose; gates are disabled via margin 0.
    let sweep = [2.0, 1.0, 0.5, 0.25, 0.125, 0.0625, 0.04];
    let mut prev: Option<(f64, f64)> = None;
    let mut last = (f64::NAN, f64::NAN);
    for &dt in &sweep {
        let (light, dark) =
            match period_statistics_with_margin(&params, dt, tau_p, PeriodMode::Analytic, 0.0) {
                Ok(v) => v,
                Err(e) => return (false, format!("FAIL[analytic at Δt = {dt}: {e}]")),
            };
        let dist = ((light - limit_light).abs(), (dark - limit_dark).abs());
        if let Some(prev) = prev {
            acc.check(
                dist.0 < prev.0 && dist.1 < prev.1,
                format!("distance to the limit grew at Δt = {dt}"),
            );
        }
        prev = Some(dist);
        last = (light, dark);
    }
    let rel_light = (last.0 / limit_light - 1.0) * 100.0;
    let rel_dark = (last.1 / limit_dark - 1.0) * 100.0;
    acc.check(
        rel_light.abs() <= 20.0 && rel_dark.abs() <= 20.0,
        format!("smallest-gap means {:.1} / {:.1} not within 20% of the limits", last.0, last.1),
    );
    acc.note(format!(
        "Δt sweep 2 → 0.04: light {:.1} → {limit_light} ({rel_light:+.1}%), dark {:.1} → \
         {limit_dark} ({rel_dark:+.1}%), monotone",
        last.0, last.1
    ));
    acc.finish()
}

// ---------------------------------------------------------------------------
// 7. integrator and eigensolver hygiene

fn criterion_7() -> (bool, String) {
    let mut acc = Acc::new();
    // (a) trace conservation across the longest tiled schedule.
    let itano_params = match AtomParams::new(std::f64::consts::PI / 256.0, 50.0, 20.0) {
        Ok(p) => p,
        Err(e) => return (false, format!("FAIL[params: {e}]")),
    };
    let schedule = match PulseSchedule::itano(64, 256.0, 2.4) {
        Ok(s) => s,
        Err(e) => return (false, format!("FAIL[schedule: {e}]")),
    };
    let rho0 = match DensityMatrix::from_pure(&CVector::basis(3, 0)) {
        Ok(r) => r,
        Err(e) => return (false, format!("FAIL[state: {e}]")),
    };
    match integrate_master(&rho0, &itano_params, &schedule, zeno::default_step(&itano_params)) {
        Ok(sol) => {
            acc.check(
                sol.max_trace_deviation <= 1e-10,
                format!("trace drift {:.2e} over the 64-pulse schedule", sol.max_trace_deviation),
            );
            acc.note(format!("trace drift {:.2e} over 64 pulses", sol.max_trace_deviation));
        }
        Err(e) => acc.check(false, format!("integration: {e}")),
    }

    // (b) step-halving convergence ratio of the fourth-order integrator.
    let params = AtomParams::reference();
    let short = match PulseSchedule::itano(4, 32.0, 2.0) {
        Ok(s) => s,
        Err(e) => return (false, format!("FAIL[schedule: {e}]")),
    };
    let pop_at = |step: f64| -> zeno::Result<f64> {
        Ok(integrate_master(&rho0, &params, &short, step)?.final_rho.level_population(1))
    };
    match (pop_at(2e-3), pop_at(1e-3), pop_at(5e-4)) {
        (Ok(a), Ok(b), Ok(c)) => {
            let ratio = (a - b) / (b - c);
            acc.check(
                (12.0..=20.0).contains(&ratio),
                format!("step-halving ratio {ratio:.2} outside 16 ± 4"),
            );
            acc.note(format!("step-halving ratio {ratio:.2}"));
        }
        other => acc.check(false, format!("integration: {other:?}")),
    }

    // (c) eigendecomposition round-trip on random matrices.
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
    let mut worst = 0.0f64;
    let mut produced = 0usize;
    let mut attempts = 0usize;
    while produced < 1000 && attempts < 2000 {
        attempts += 1;
        let dim = if attempts % 3 == 0 { 2 } else { 3 };
        let mut m = CMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] =
                    C64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0);
            }
        }
        if attempts % 5 == 0 {
            m = m.add(&m.adjoint()).scale(C64::new(0.5, 0.0));
        }
        match eig_with_reciprocal(&m, DEFAULT_DEGENERACY_GAP) {
            Ok(eig) if eig.is_degenerate => continue,
            Ok(eig) => {
                worst = worst.max(eig.reconstruct().sub(&m).max_abs_entry());
                produced += 1;
            }
            Err(_) => continue,
        }
    }
    acc.check(produced == 1000, format!("only {produced} matrices decomposed"));
    acc.check(worst <= 1e-9, format!("worst reconstruction error {worst:.2e}"));
    acc.note(format!("{produced} random matrices, worst reconstruction {worst:.2e}"));
    acc.finish()
}

// ---------------------------------------------------------------------------
// 8. byte-identical output across thread counts

fn criterion_8(exe: Option<&Path>) -> (bool, String) {
    let Some(exe) = exe else {
        return (false, "FAIL[no executable path available for re-invocation]".into());
    };
    let dir = std::env::temp_dir().join(format!("zeno-selftest-{}", std::process::id()));
    if let Err(e) = std::fs::create_dir_all(&dir) {
        return (false, format!("FAIL[temp dir: {e}]"));
    }
    let result = determinism_round_trip(exe, &dir);
    let _ = std::fs::remove_dir_all(&dir);
    match result {
        Ok(bytes) => (true, format!("two survival-table runs, --threads 1 vs 4: identical {bytes} bytes")),
        Err(msg) => (false, format!("FAIL[{msg}]")),
    }
}

fn determinism_round_trip(exe: &Path, dir: &Path) -> Result<usize, String> {
    let config_path = dir.join("determinism.cfg");
    std::fs::write(&config_path, "[run]\ntrajectories = 200\nstep = 0.002\n")
        .map_err(|e| format!("config write: {e}"))?;
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.join(format!("table-threads-{threads}.csv"));
        let run = std::process::Command::new(exe)
            .arg("itano")
            .arg("--config")
            .arg(&config_path)
            .arg("--seed")
            .arg("4242")
            .arg("--threads")
            .arg(threads)
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(|e| format!("spawn: {e}"))?;
        if !run.status.success() {
            let stderr = String::from_utf8_lossy(&run.stderr);
            return Err(format!(
                "run with --threads {threads} exited with {}: {}",
                run.status,
                stderr.trim()
            ));
        }
        outputs.push(std::fs::read(&out).map_err(|e| format!("read output: {e}"))?);
    }
    if outputs[0] != outputs[1] {
        return Err("outputs differ between thread counts".into());
    }
    Ok(outputs[0].len())
}
