//! Ideal-measurement (projection postulate) analytics.
//!
//! This layer treats each measurement of the 1–2 population as instantaneous
//! and perfect: between measurements the two-level state evolves freely under
//! the weak drive, and each measurement projects it onto |1⟩ or |2⟩. All
//! closed forms follow from the free propagator: the per-step flip
//! probability is sin²(Ω₂Δt/2), so measurement outcomes form a two-state
//! Markov chain and run lengths are geometric. These formulas are the
//! baseline the pulsed-measurement engines are compared against.

use rand::Rng;

use crate::error::{Error, Result};

/// Measured level of the weak transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    One,
    Two,
}

impl Level {
    pub fn flipped(self) -> Self {
        match self {
            Level::One => Level::Two,
            Level::Two => Level::One,
        }
    }

    /// Population of level 2 for an atom projected onto this level.
    pub fn population2(self) -> f64 {
        match self {
            Level::One => 0.0,
            Level::Two => 1.0,
        }
    }
}

/// Number of population samples recorded per measurement interval in
/// [`sample_ideal_path`].
pub const TRACE_SAMPLES_PER_INTERVAL: usize = 16;

/// A sampled stochastic record of repeated ideal measurements.
#[derive(Clone, Debug)]
pub struct IdealPath {
    /// Outcome of the k-th measurement, performed at time (k+1)·dt.
    pub outcomes: Vec<Level>,
    pub dt: f64,
    /// (t, P₂(t)) samples of the piecewise-deterministic population between
    /// projections; each interval restarts from the last projected level.
    pub population_trace: Vec<(f64, f64)>,
}

/// Probability that `n` consecutive measurements spaced `dt` apart all
/// return the initial level: cos^{2n}(Ω₂·dt/2). Symmetric in the starting
/// level, which is accepted for interface clarity.
pub fn ideal_survival(_start: Level, n: u32, dt: f64, omega2: f64) -> f64 {
    debug_assert!(dt >= 0.0);
    (omega2 * dt / 2.0).cos().powi(2 * n as i32)
}

/// Probability that a single measurement after free evolution of length `dt`
/// finds the other level: sin²(Ω₂·dt/2). Symmetric for 1→2 and 2→1.
pub fn flip_probability(dt: f64, omega2: f64) -> f64 {
    debug_assert!(dt >= 0.0);
    (omega2 * dt / 2.0).sin().powi(2)
}

/// Population of level 2 after `n` ideal measurements spaced `dt` apart,
/// starting from |1⟩: the closed form ½(1 − cosⁿ(Ω₂·dt)) of the two-state
/// measurement cascade. The caller chooses `dt` as T_π/n for idealized
/// instantaneous measurements, or T_π/n − τ_p to account for the time the
/// measurement pulse itself consumes.
pub fn cook_population(n: u32, dt: f64, omega2: f64) -> f64 {
    debug_assert!(dt >= 0.0);
    0.5 * (1.0 - (omega2 * dt).cos().powi(n as i32))
}

/// Mean and standard deviation of light/dark period lengths under ideal
/// measurements: run lengths are geometric with parameter sin²(Ω₂dt/2), so
/// mean = dt/sin²(Ω₂dt/2) and std = dt·|cos(Ω₂dt/2)|/sin²(Ω₂dt/2) (the
/// cosine enters through √(1−p), so its magnitude applies on the whole
/// domain 0 < Ω₂dt < 2π). Identical for light and dark periods.
pub fn ideal_period_stats(dt: f64, omega2: f64) -> Result<(f64, f64)> {
    debug_assert!(omega2 * dt > 0.0 && omega2 * dt < 2.0 * std::f64::consts::PI);
    let half = omega2 * dt / 2.0;
    let p = half.sin().powi(2);
    if p <= f64::MIN_POSITIVE {
        return Err(Error::DivergentPeriod(format!(
            "flip probability vanishes at omega2·dt = {}",
            omega2 * dt
        )));
    }
    Ok((dt / p, dt * half.cos().abs() / p))
}

/// Stochastic path of `n` repeated ideal measurements: each step flips the
/// recorded level with probability [`flip_probability`]. One uniform draw is
/// consumed per step, so the path is a pure function of the RNG stream.
pub fn sample_ideal_path(
    start: Level,
    n: u32,
    dt: f64,
    omega2: f64,
    rng: &mut impl Rng,
) -> IdealPath {
    let p_flip = flip_probability(dt, omega2);
    let mut outcomes = Vec::with_capacity(n as usize);
    let mut trace = Vec::with_capacity(n as usize * TRACE_SAMPLES_PER_INTERVAL + 1);
    let mut level = start;
    trace.push((0.0, level.population2()));
    for k in 0..n {
        let t0 = k as f64 * dt;
        for j in 1..=TRACE_SAMPLES_PER_INTERVAL {
            let tau = dt * j as f64 / TRACE_SAMPLES_PER_INTERVAL as f64;
            let half = omega2 * tau / 2.0;
            let p2 = match level {
                Level::One => half.sin().powi(2),
                Level::Two => half.cos().powi(2),
            };
            trace.push((t0 + tau, p2));
        }
        if rng.random::<f64>() < p_flip {
            level = level.flipped();
        }
        outcomes.push(level);
    }
    IdealPath { outcomes, dt, population_trace: trace }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn survival_without_measurements_is_one() {
        assert_eq!(ideal_survival(Level::One, 0, 0.7, 1.3), 1.0);
    }

    #[test]
    fn survival_vanishes_at_pi_rotation() {
        assert!(ideal_survival(Level::One, 1, PI, 1.0).abs() < 1e-30);
    }

    #[test]
    fn survival_matches_stepwise_product() {
        // Independent oracle: per-step survival multiplied out explicitly.
        let omega2 = 1.0;
        let dt = PI / 16.0;
        let mut product = 1.0;
        for _ in 0..16 {
            product *= 1.0 - flip_probability(dt, omega2);
        }
        assert!((ideal_survival(Level::One, 16, dt, omega2) - product).abs() < 1e-14);
    }

    #[test]
    fn flip_probability_examples() {
        assert_eq!(flip_probability(0.0, 1.0), 0.0);
        assert!((flip_probability(PI, 1.0) - 1.0).abs() < 1e-14);
        let dt = 1e-3;
        let ratio = flip_probability(dt, 1.0) / (dt / 2.0).powi(2);
        assert!((ratio - 1.0).abs() < 1e-4);
    }

    #[test]
    fn short_time_quadratic_coefficient_is_drive_variance() {
        // 1 − survival ≈ (ΔH)²·dt² with (ΔH)² = (Ω₂/2)² for the resonant
        // two-level drive from a basis state.
        let omega2 = 1.0;
        let dt = 1e-3;
        let coeff = (1.0 - ideal_survival(Level::One, 1, dt, omega2)) / (dt * dt);
        let variance = (omega2 / 2.0) * (omega2 / 2.0);
        assert!((coeff - variance).abs() / variance < 1e-3);
    }

    #[test]
    fn zeno_freezing_under_interval_halving() {
        let omega2 = 1.0;
        let total = PI;
        let mut last = 0.0;
        for k in 0..12u32 {
            let n = 1u32 << k;
            let s = ideal_survival(Level::One, n, total / n as f64, omega2);
            assert!(s > last, "survival must increase as intervals shrink");
            last = s;
        }
        assert!(last > 0.99);
    }

    #[test]
    fn cook_population_reference_values() {
        let t_pi = PI;
        assert!((cook_population(1, t_pi, 1.0) - 1.0).abs() < 1e-12);
        assert!((cook_population(4, t_pi / 4.0, 1.0) - 0.375).abs() < 1e-12);
    }

    #[test]
    fn cook_population_matches_markov_chain() {
        // Brute-force two-state chain: after each interval, flip each basis
        // component with probability sin²(Ω₂dt/2).
        let omega2 = 1.0;
        for n in 1..=64u32 {
            let dt = PI / n as f64;
            let pf = flip_probability(dt, omega2);
            let (mut p1, mut p2) = (1.0f64, 0.0f64);
            for _ in 0..n {
                let moved = p1 * pf;
                let back = p2 * pf;
                p1 = p1 - moved + back;
                p2 = p2 - back + moved;
            }
            assert!(
                (cook_population(n, dt, omega2) - p2).abs() < 1e-12,
                "mismatch at n = {n}"
            );
        }
    }

    #[test]
    fn period_stats_at_certain_flip() {
        let (mean, std) = ideal_period_stats(PI, 1.0).unwrap();
        assert!((mean - PI).abs() < 1e-12);
        assert!(std.abs() < 1e-6);
    }

    #[test]
    fn period_stats_at_half_pi_rotation() {
        let dt = PI / 2.0;
        let (mean, std) = ideal_period_stats(dt, 1.0).unwrap();
        assert!((mean - 2.0 * dt).abs() < 1e-12);
        assert!((std - std::f64::consts::SQRT_2 * dt).abs() < 1e-5 * dt);
    }

    #[test]
    fn period_mean_matches_direct_summation() {
        // T̄ = Σ n·dt·[P(t_{n−1}) − P(t_n)] summed explicitly.
        let omega2 = 1.0;
        let dt = 0.9;
        let (mean, _) = ideal_period_stats(dt, omega2).unwrap();
        let mut sum = 0.0;
        let mut n = 1u32;
        loop {
            let term = n as f64
                * dt
                * (ideal_survival(Level::One, n - 1, dt, omega2)
                    - ideal_survival(Level::One, n, dt, omega2));
            sum += term;
            if ideal_survival(Level::One, n, dt, omega2) < 1e-18 || n > 100_000 {
                break;
            }
            n += 1;
        }
        assert!((sum - mean).abs() <= 1e-10 * mean);
    }

    #[test]
    fn geometric_period_sampler_oracle() {
        // 10⁶ geometric periods sampled directly from the flip law; the
        // closed-form mean and std must sit inside 3σ confidence bands built
        // from sample moments.
        let omega2 = 1.0;
        let dt = 0.8;
        let p = flip_probability(dt, omega2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000usize;
        let mut sum = 0.0f64;
        let mut sum2 = 0.0f64;
        let mut sum4 = 0.0f64;
        for _ in 0..n {
            let mut steps = 1u64;
            while rng.random::<f64>() >= p {
                steps += 1;
            }
            let len = steps as f64 * dt;
            sum += len;
            sum2 += len * len;
            sum4 += len * len * len * len;
        }
        let mean_hat = sum / n as f64;
        let var_hat = sum2 / n as f64 - mean_hat * mean_hat;
        let (mean, std) = ideal_period_stats(dt, omega2).unwrap();
        let se_mean = var_hat.sqrt() / (n as f64).sqrt();
        assert!((mean_hat - mean).abs() <= 3.0 * se_mean);
        // SE of the sample variance from the sample fourth moment.
        let m4 = sum4 / n as f64;
        let se_var = ((m4 - var_hat * var_hat).max(0.0) / n as f64).sqrt();
        assert!((var_hat - std * std).abs() <= 3.0 * se_var);
    }

    #[test]
    fn constant_path_without_drive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let path = sample_ideal_path(Level::Two, 50, 1.0, 0.0, &mut rng);
        assert!(path.outcomes.iter().all(|&l| l == Level::Two));
        assert!(path.population_trace.iter().all(|&(_, p2)| (p2 - 1.0).abs() < 1e-12));
    }

    #[test]
    fn alternating_path_at_pi_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let path = sample_ideal_path(Level::One, 20, PI, 1.0, &mut rng);
        for (k, &l) in path.outcomes.iter().enumerate() {
            let expect = if k % 2 == 0 { Level::Two } else { Level::One };
            assert_eq!(l, expect, "step {k}");
        }
    }

    #[test]
    fn empirical_flip_frequency_matches_binomial() {
        let omega2 = 1.0;
        let dt = 0.6;
        let p = flip_probability(dt, omega2);
        let n = 100_000u32;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let path = sample_ideal_path(Level::One, n, dt, omega2, &mut rng);
        let mut flips = 0usize;
        let mut prev = Level::One;
        for &l in &path.outcomes {
            if l != prev {
                flips += 1;
            }
            prev = l;
        }
        let freq = flips as f64 / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((freq - p).abs() <= 3.0 * sigma, "freq {freq} vs p {p}");
    }

    #[test]
    fn path_sampler_is_deterministic_in_seed() {
        let a = sample_ideal_path(Level::One, 500, 0.7, 1.1, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_ideal_path(Level::One, 500, 0.7, 1.1, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a.outcomes, b.outcomes);
    }

    #[test]
    fn trace_follows_restarted_rotation_between_outcomes() {
        let omega2 = 1.3;
        let dt = 0.9;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let path = sample_ideal_path(Level::One, 8, dt, omega2, &mut rng);
        // Interval k starts from the level projected at measurement k−1.
        for k in 1..8usize {
            let level = path.outcomes[k - 1];
            for j in 1..=TRACE_SAMPLES_PER_INTERVAL {
                let idx = 1 + k * TRACE_SAMPLES_PER_INTERVAL + (j - 1);
                let (t, p2) = path.population_trace[idx];
                let tau = t - k as f64 * dt;
                let half = omega2 * tau / 2.0;
                let expect = match level {
                    Level::One => half.sin().powi(2),
                    Level::Two => half.cos().powi(2),
                };
                assert!((p2 - expect).abs() < 1e-12);
            }
        }
    }
}
