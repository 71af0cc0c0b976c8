//! Quantum-jump (Monte-Carlo wave function) engine.
//!
//! Between photon emissions the state evolves under the non-Hermitian
//! conditional Hamiltonian; the squared norm of the evolved state is the
//! no-photon probability, and a jump resets the atom to |1⟩. The module also
//! carries the first-order analytic layer built on the same Hamiltonian: the
//! slow eigenpair of the driven-damped system, the post-pulse density
//! matrices conditioned on emission vs. no emission, and the per-cycle
//! transition probabilities that govern light/dark period statistics.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    eig_with_reciprocal, mat_exp, C64, CMatrix, CVector, EigSystem, DEFAULT_DEGENERACY_GAP,
};
use crate::model::{build_h_cond, AtomParams, Epsilons, PulseSchedule, DEFAULT_MARGIN};

/// Relative bisection tolerance for jump times, as a fraction of the horizon.
const BISECTION_REL_TOL: f64 = 1e-10;
/// Perturbative evaluators refuse to run when the largest expansion
/// parameter reaches this value.
const EPS_MAX_LIMIT: f64 = 0.2;
/// Safety factor deciding when an initial state is too close to the slow
/// eigenvector for the emission-conditioned formulas to apply.
const EXCEPTIONAL_MARGIN: f64 = 5.0;
/// Acceptable deviation of ‖ψ‖² from 1 for state arguments.
const NORM_TOL: f64 = 1e-6;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn ensure_normalized(psi: &CVector) -> Result<()> {
    let n2 = psi.norm_sq();
    if !(n2 - 1.0).abs().is_finite() || (n2 - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidParams(format!(
            "state must be normalized, got ‖ψ‖² = {n2}"
        )));
    }
    Ok(())
}

/// Seed of a single stochastic trajectory: one master seed shared by a whole
/// experiment plus the trajectory's index. Each index selects an independent
/// stream of the same keyed cipher, so trajectories can be generated in any
/// order (or in parallel) and still see identical randomness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrajectorySeed {
    pub master: u64,
    pub index: u64,
}

impl TrajectorySeed {
    pub fn new(master: u64, index: u64) -> Self {
        Self { master, index }
    }

    /// RNG for this trajectory, independent of all other indices.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.index);
        rng
    }
}

/// Record of one simulated trajectory over a pulse schedule.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Emission times, strictly increasing, in drive-rate units.
    pub photon_times: Vec<f64>,
    /// For each pulse cycle, whether at least one photon was attributed to it.
    pub pulse_flags: Vec<bool>,
    /// Conditional state at the end of the schedule (normalized).
    pub final_state: CVector,
    pub seed: TrajectorySeed,
}

/// Classification of a run of consecutive pulse cycles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PeriodKind {
    /// Cycles whose pulses produced fluorescence.
    Light,
    /// Cycles whose pulses stayed silent.
    Dark,
}

/// One light or dark period extracted from a trajectory.
#[derive(Clone, Copy, Debug)]
pub struct PeriodRecord {
    pub kind: PeriodKind,
    /// Number of consecutive pulse cycles in the run.
    pub pulse_count: usize,
    /// Run length in time units: pulse_count · (τ_p + Δt).
    pub duration: f64,
}

/// Evaluation mode for [`no_photon_probability`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum P0Mode {
    /// Full conditional evolution (valid for any parameters).
    Exact,
    /// First-order closed form in the small ratios; requires both drives on
    /// and the pulse-duration gate to pass.
    Perturbative,
}

/// Evaluation mode for [`period_statistics`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PeriodMode {
    /// Per-cycle transition probabilities at the given Δt and τ_p.
    Analytic,
    /// Δt → 0 limiting values (electron-shelving limit); independent of the
    /// supplied Δt and τ_p.
    ShelvingLimit,
}

/// Cached propagation data for one drive configuration. Non-degenerate
/// spectra use the spectral form (cheap per evaluation); degenerate ones fall
/// back to the matrix exponential.
struct DriveCache {
    h: CMatrix,
    eig: Option<EigSystem>,
}

impl DriveCache {
    fn new(p: &AtomParams, strong_on: bool, weak_on: bool) -> Result<Self> {
        let h = build_h_cond(p, strong_on, weak_on);
        let eig = eig_with_reciprocal(&h, DEFAULT_DEGENERACY_GAP)?;
        let eig = if eig.is_degenerate { None } else { Some(eig) };
        Ok(Self { h, eig })
    }

    fn evolve(&self, psi: &CVector, t: f64) -> Result<CVector> {
        match &self.eig {
            Some(e) => Ok(e.evolve(psi, t)),
            None => Ok(mat_exp(&self.h, t)?.mul_vec(psi)),
        }
    }
}

/// Propagator of the conditional (norm-decaying) evolution for the given
/// drive configuration: ψ(t) = U ψ(0) with ‖ψ(t)‖² the no-photon probability.
pub fn cond_propagator(p: &AtomParams, strong_on: bool, weak_on: bool, t: f64) -> Result<CMatrix> {
    debug_assert!(t >= 0.0);
    let h = build_h_cond(p, strong_on, weak_on);
    let eig = eig_with_reciprocal(&h, DEFAULT_DEGENERACY_GAP)?;
    if eig.is_degenerate {
        mat_exp(&h, t)
    } else {
        Ok(eig.propagator(t))
    }
}

/// Probability that an atom starting in `psi` emits no photon during a drive
/// window of length `tau`.
pub fn no_photon_probability(
    psi: &CVector,
    p: &AtomParams,
    strong_on: bool,
    weak_on: bool,
    tau: f64,
    mode: P0Mode,
) -> Result<f64> {
    ensure_normalized(psi)?;
    debug_assert!(tau >= 0.0);
    match mode {
        P0Mode::Exact => {
            let cache = DriveCache::new(p, strong_on, weak_on)?;
            Ok(cache.evolve(psi, tau)?.norm_sq())
        }
        P0Mode::Perturbative => {
            if !(strong_on && weak_on) {
                return Err(Error::InvalidParams(
                    "perturbative no-photon probability requires both drives on".into(),
                ));
            }
            let eps = Epsilons::for_params(p)?;
            perturbative_gate_check(p, &eps, &[pulse_gate_failure(p, tau)])?;
            let a1 = psi[0];
            let a2 = psi[1];
            let a3 = psi[2];
            Ok((1.0 - eps.eps_p * p.omega2 * tau) * a2.norm_sqr()
                + 2.0 * eps.eps_p * (a1 * a2.conj()).im
                - 2.0 * eps.eps_r * (a2 * a3.conj()).re)
        }
    }
}

fn pulse_gate_failure(p: &AtomParams, tau_p: f64) -> Option<String> {
    let gate = crate::model::pulse_duration_gate(p, tau_p, DEFAULT_MARGIN);
    (!gate.passes).then(|| format!("pulse_duration {} < {}", gate.value, gate.threshold))
}

fn perturbative_gate_check(
    _p: &AtomParams,
    eps: &Epsilons,
    extra_failures: &[Option<String>],
) -> Result<()> {
    let mut failures: Vec<String> = extra_failures.iter().flatten().cloned().collect();
    if eps.eps_max >= EPS_MAX_LIMIT {
        failures.push(format!("eps_max {} >= {EPS_MAX_LIMIT}", eps.eps_max));
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Error::RegimeViolation(failures.join("; ")))
    }
}

/// First-order slow eigenpair of the conditional Hamiltonian with both
/// drives on. Returns `(lambda2, v2, w2)` where:
///
/// - `lambda2` is the amplitude decay rate of the slow mode, (Ω₂/2)·ε_p, so
///   the matching eigenvalue of the conditional Hamiltonian is −i·lambda2;
/// - `v2` is the right eigenvector (−iε_p, 1, −ε_R), unnormalized;
/// - `w2` is its reciprocal partner (+iε_p, 1, −ε_R); the reciprocal row
///   vector is w2†, and w2†·v2 = 1 + O(ε²).
pub fn perturbative_eigensystem(p: &AtomParams) -> Result<(C64, CVector, CVector)> {
    let eps = Epsilons::for_params(p)?;
    perturbative_gate_check(p, &eps, &[])?;
    let lambda2 = c(p.omega2 / 2.0 * eps.eps_p, 0.0);
    let v2 = CVector::new3(c(0.0, -eps.eps_p), c(1.0, 0.0), c(-eps.eps_r, 0.0));
    let w2 = CVector::new3(c(0.0, eps.eps_p), c(1.0, 0.0), c(-eps.eps_r, 0.0));
    Ok((lambda2, v2, w2))
}

/// Outcome of waiting for the next photon during a drive window.
#[derive(Clone, Debug)]
pub enum JumpOutcome {
    /// A photon was emitted `time` after the window opened; the atom is
    /// projected to `post_state` (the ground state of the strong transition).
    Emitted { time: f64, post_state: CVector },
    /// No photon before the horizon; `state` is the renormalized conditional
    /// state at the horizon.
    NoEmission { state: CVector },
}

/// Inverts the no-photon survival law P₀(t) = r for one uniform draw
/// r ∈ (0, 1): if P₀(horizon) > r the window stays silent, otherwise the
/// emission time solves P₀(t) = r by bisection (P₀ is non-increasing) to a
/// tolerance of 1e-10 × horizon.
pub fn sample_jump_time(
    psi: &CVector,
    p: &AtomParams,
    strong_on: bool,
    weak_on: bool,
    horizon: f64,
    r: f64,
) -> Result<JumpOutcome> {
    ensure_normalized(psi)?;
    let cache = DriveCache::new(p, strong_on, weak_on)?;
    sample_jump_time_cached(&cache, psi, horizon, r)
}

fn sample_jump_time_cached(
    cache: &DriveCache,
    psi: &CVector,
    horizon: f64,
    r: f64,
) -> Result<JumpOutcome> {
    debug_assert!(r > 0.0 && r < 1.0, "uniform draw must lie strictly inside (0, 1)");
    debug_assert!(horizon >= 0.0);
    // Survival at t as a function of a single scalar, reusing the spectral
    // coefficients of ψ when available.
    enum Survival<'a> {
        Spectral { eig: &'a EigSystem, coeffs: [C64; 3] },
        Exponential { h: &'a CMatrix, psi: CVector },
    }
    impl Survival<'_> {
        fn state(&self, t: f64) -> Result<CVector> {
            match self {
                Survival::Spectral { eig, coeffs } => Ok(eig.evolve_from_coefficients(coeffs, t)),
                Survival::Exponential { h, psi } => Ok(mat_exp(h, t)?.mul_vec(psi)),
            }
        }
        fn p0(&self, t: f64) -> Result<f64> {
            Ok(self.state(t)?.norm_sq())
        }
    }
    let survival = match &cache.eig {
        Some(eig) => Survival::Spectral { eig, coeffs: eig.spectral_coefficients(psi) },
        None => Survival::Exponential { h: &cache.h, psi: *psi },
    };
    if survival.p0(horizon)? > r {
        return Ok(JumpOutcome::NoEmission { state: survival.state(horizon)?.normalized()? });
    }
    let tol = BISECTION_REL_TOL * horizon;
    let (mut lo, mut hi) = (0.0f64, horizon);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if survival.p0(mid)? > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let time = 0.5 * (lo + hi);
    Ok(JumpOutcome::Emitted { time, post_state: CVector::basis(3, 0) })
}

/// Simulates one trajectory over a full pulse schedule. Photons reset the
/// state to |1⟩; drive windows follow the schedule's segments; every photon
/// is attributed to the pulse cycle its segment belongs to. Exactly one
/// uniform draw is consumed per silent window and one per emission, so the
/// record is a pure function of (seed, schedule, parameters).
pub fn simulate_schedule(
    psi0: &CVector,
    p: &AtomParams,
    s: &PulseSchedule,
    seed: TrajectorySeed,
) -> Result<Trajectory> {
    s.validate()?;
    ensure_normalized(psi0)?;
    let mut rng = seed.rng();
    // At most four drive configurations exist; cache lazily by flag pair.
    let mut caches: [Option<DriveCache>; 4] = [None, None, None, None];
    let mut photon_times = Vec::new();
    let mut pulse_flags = vec![false; s.n_pulses];
    let mut psi = *psi0;
    let mut t_base = 0.0f64;
    for seg in s.segments() {
        let slot = (seg.strong_on as usize) * 2 + seg.weak_on as usize;
        if caches[slot].is_none() {
            caches[slot] = Some(DriveCache::new(p, seg.strong_on, seg.weak_on)?);
        }
        let cache = caches[slot].as_ref().expect("cache just inserted");
        let mut elapsed = 0.0f64;
        loop {
            let remaining = seg.duration - elapsed;
            if remaining <= 0.0 {
                break;
            }
            let r = draw_open_unit(&mut rng);
            match sample_jump_time_cached(cache, &psi, remaining, r)? {
                JumpOutcome::NoEmission { state } => {
                    psi = state;
                    break;
                }
                JumpOutcome::Emitted { time, post_state } => {
                    elapsed += time;
                    photon_times.push(t_base + elapsed);
                    if let Some(k) = seg.attribution {
                        pulse_flags[k] = true;
                    }
                    psi = post_state;
                }
            }
        }
        t_base += seg.duration;
    }
    Ok(Trajectory { photon_times, pulse_flags, final_state: psi, seed })
}

/// Uniform draw on the open interval (0, 1): rejects exact zeros from the
/// half-open generator so survival inversion never sees a boundary value.
fn draw_open_unit(rng: &mut impl rand::Rng) -> f64 {
    loop {
        let x: f64 = rng.random();
        if x > 0.0 {
            return x;
        }
    }
}

/// First-order post-pulse density matrices, conditioned on whether the pulse
/// produced fluorescence. `*_pulse_end` are the 3×3 states at the instant the
/// pulse ends; `*_projected` are the 2×2 states in the 1–2 subspace after the
/// fast transient has died out and the third level has emptied.
#[derive(Clone, Debug)]
pub struct CorrectionStates {
    /// Atom that stayed silent, projected to the 1–2 subspace (≈ |2⟩⟨2|).
    pub no_emission_projected: CMatrix,
    /// Atom that fluoresced, projected to the 1–2 subspace (≈ |1⟩⟨1|).
    pub emission_projected: CMatrix,
    /// Atom that stayed silent, at the end of the pulse (3×3).
    pub no_emission_pulse_end: CMatrix,
    /// Atom that fluoresced, at the end of the pulse (3×3).
    pub emission_pulse_end: CMatrix,
    /// Expansion parameters the matrices were built with.
    pub epsilons: Epsilons,
}

impl CorrectionStates {
    /// The emission-conditioned forms assume the initial state is not itself
    /// within O(ε) of the slow eigenvector; states with 1 − |⟨2|ψ⟩|² of that
    /// order are exceptional and the closed forms do not apply to them.
    pub fn exceptional_for(&self, psi: &CVector) -> bool {
        let a2 = psi[1].norm_sqr();
        1.0 - a2 <= EXCEPTIONAL_MARGIN * self.epsilons.eps_max
    }
}

/// Builds the first-order post-pulse states for a pulse of length `tau_p`.
/// All four matrices are the closed forms truncated at first order in the
/// small ratios, symmetrized and trace-normalized; because the ε² terms are
/// dropped, the no-emission forms may have negative eigenvalues of that
/// order — they approximate density matrices rather than being ones exactly.
pub fn post_pulse_states(p: &AtomParams, tau_p: f64) -> Result<CorrectionStates> {
    let eps = Epsilons::for_params(p)?;
    perturbative_gate_check(p, &eps, &[pulse_gate_failure(p, tau_p)])?;
    let (ep, er, ea) = (eps.eps_p, eps.eps_r, eps.eps_a);
    let (a3sq, o3sq) = (p.a3 * p.a3, p.omega3 * p.omega3);
    let drive_weight = ep * p.omega2 * tau_p;

    let no_emission_pulse_end = normalize_trace(&hermitize(&CMatrix::from_rows3([
        [c(0.0, 0.0), c(0.0, -ep), c(0.0, 0.0)],
        [c(0.0, ep), c(1.0, 0.0), c(-er, 0.0)],
        [c(0.0, 0.0), c(-er, 0.0), c(0.0, 0.0)],
    ])));
    let no_emission_projected = normalize_trace(&hermitize(&CMatrix::from_rows2([
        [c(0.0, 0.0), c(0.0, -ep)],
        [c(0.0, ep), c(1.0, 0.0)],
    ])));

    let dp = a3sq + 2.0 * o3sq + drive_weight * a3sq;
    let emission_pulse_end = hermitize(&CMatrix::from_rows3([
        [c(a3sq + o3sq, 0.0), c(0.0, ep * a3sq), c(0.0, p.a3 * p.omega3)],
        [c(0.0, -ep * a3sq), c(drive_weight * a3sq, 0.0), c(er * (a3sq + o3sq), 0.0)],
        [c(0.0, -p.a3 * p.omega3), c(er * (a3sq + o3sq), 0.0), c(o3sq, 0.0)],
    ]))
    .scale(c(1.0 / dp, 0.0));
    let off_12 = c(0.0, ep * a3sq - 0.5 * ea * o3sq);
    let emission_projected = hermitize(&CMatrix::from_rows2([
        [c(a3sq + 2.0 * o3sq, 0.0), off_12],
        [-off_12, c(drive_weight * a3sq, 0.0)],
    ]))
    .scale(c(1.0 / dp, 0.0));

    Ok(CorrectionStates {
        no_emission_projected,
        emission_projected,
        no_emission_pulse_end,
        emission_pulse_end,
        epsilons: eps,
    })
}

fn hermitize(m: &CMatrix) -> CMatrix {
    m.add(&m.adjoint()).scale(c(0.5, 0.0))
}

fn normalize_trace(m: &CMatrix) -> CMatrix {
    let tr = m.trace();
    m.scale(c(1.0 / tr.re, 0.0))
}

/// Per-cycle transition probabilities of the pulsed two-state record:
/// `p` = probability a fluorescing cycle is followed by a silent one (the
/// ideal flip probability sin²(Ω₂Δt/2) plus first-order corrections),
/// `q` = probability a silent cycle is followed by another silent one (the
/// ideal survival cos²(Ω₂Δt/2) plus corrections). Light runs therefore end
/// with per-cycle probability `p` and dark runs with `1 − q`.
/// First order in the small ratios; gates use the default margin.
pub fn transition_probs_pq(p: &AtomParams, dt: f64, tau_p: f64) -> Result<(f64, f64)> {
    transition_probs_pq_with_margin(p, dt, tau_p, DEFAULT_MARGIN)
}

/// Same as [`transition_probs_pq`] with an explicit regime margin
/// (0 disables the gates).
pub fn transition_probs_pq_with_margin(
    p: &AtomParams,
    dt: f64,
    tau_p: f64,
    margin: f64,
) -> Result<(f64, f64)> {
    if !(margin >= 0.0) {
        return Err(Error::InvalidParams(format!("margin must be ≥ 0, got {margin}")));
    }
    let eps = Epsilons::for_params(p)?;
    let mut extra = vec![if tau_p > 0.0 {
        let gate = crate::model::pulse_duration_gate(p, tau_p, margin);
        (!gate.passes).then(|| format!("pulse_duration {} < {}", gate.value, gate.threshold))
    } else {
        Some(format!("pulse length must be positive, got {tau_p}"))
    }];
    let gap_duration = dt * p.a3;
    if gap_duration < margin {
        extra.push(Some(format!("gap_duration {gap_duration} < {margin}")));
    }
    let rotation = (p.omega2 * dt).powi(2);
    if rotation < margin * eps.eps_max {
        extra.push(Some(format!("gap_rotation {rotation} < {}", margin * eps.eps_max)));
    }
    perturbative_gate_check(p, &eps, &extra)?;

    let theta = p.omega2 * dt;
    let (s, cth) = theta.sin_cos();
    let half = theta / 2.0;
    let d = p.a3 * p.a3 + 2.0 * p.omega3 * p.omega3;
    let (a3sq, o3sq) = (p.a3 * p.a3, p.omega3 * p.omega3);
    let w = 0.5 * p.omega2 * tau_p;
    let p_val = half.sin().powi(2)
        + eps.eps_p * (2.0 * s * (a3sq + o3sq) / d + w * cth * (3.0 * a3sq + 2.0 * o3sq) / d - w)
        - 0.5 * eps.eps_a * s * o3sq / d;
    let q_val = half.cos().powi(2) - eps.eps_p * (2.0 * s + w * (1.0 + cth));
    Ok((p_val, q_val))
}

/// Mean light and dark period lengths, `(mean_light, mean_dark)`.
///
/// `Analytic` divides the cycle length τ_p + Δt by the per-cycle switching
/// probabilities; `ShelvingLimit` returns the Δt → 0 limits
/// Ω₃²(A₃² + 2Ω₃²)/(Ω₂²A₃³) and Ω₃²/(Ω₂²A₃), which the analytic means
/// approach as the gap shrinks.
pub fn period_statistics(
    p: &AtomParams,
    dt: f64,
    tau_p: f64,
    mode: PeriodMode,
) -> Result<(f64, f64)> {
    period_statistics_with_margin(p, dt, tau_p, mode, DEFAULT_MARGIN)
}

/// Same as [`period_statistics`] with an explicit regime margin for the
/// analytic mode (0 disables the gates).
pub fn period_statistics_with_margin(
    p: &AtomParams,
    dt: f64,
    tau_p: f64,
    mode: PeriodMode,
    margin: f64,
) -> Result<(f64, f64)> {
    match mode {
        PeriodMode::Analytic => {
            let (p_val, q_val) = transition_probs_pq_with_margin(p, dt, tau_p, margin)?;
            let cycle = tau_p + dt;
            let dark_exit = 1.0 - q_val;
            if !(p_val > 0.0) || !(dark_exit > 0.0) {
                return Err(Error::DivergentPeriod(format!(
                    "switching probabilities must be positive, got p = {p_val}, 1 − q = {dark_exit}"
                )));
            }
            Ok((cycle / p_val, cycle / dark_exit))
        }
        PeriodMode::ShelvingLimit => {
            let _ = Epsilons::for_params(p)?;
            if !(p.omega2 > 0.0) {
                return Err(Error::InvalidParams(
                    "shelving-limit periods require a positive weak drive".into(),
                ));
            }
            let o3sq = p.omega3 * p.omega3;
            let w2sq = p.omega2 * p.omega2;
            let mean_light = o3sq * (p.a3 * p.a3 + 2.0 * o3sq) / (w2sq * p.a3.powi(3));
            let mean_dark = o3sq / (w2sq * p.a3);
            Ok((mean_light, mean_dark))
        }
    }
}

/// Splits a trajectory's per-pulse fluorescence record into interior light
/// and dark periods. The first and last runs touch the observation window's
/// edges, so their lengths are censored and they are excluded.
pub fn extract_periods(t: &Trajectory, s: &PulseSchedule) -> Vec<PeriodRecord> {
    let cycle = s.cycle();
    let mut runs: Vec<(bool, usize)> = Vec::new();
    for &flag in &t.pulse_flags {
        match runs.last_mut() {
            Some((f, n)) if *f == flag => *n += 1,
            _ => runs.push((flag, 1)),
        }
    }
    if runs.len() < 3 {
        return Vec::new();
    }
    runs[1..runs.len() - 1]
        .iter()
        .map(|&(flag, n)| PeriodRecord {
            kind: if flag { PeriodKind::Light } else { PeriodKind::Dark },
            pulse_count: n,
            duration: n as f64 * cycle,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn reference() -> AtomParams {
        AtomParams::reference()
    }

    fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
        a.sub(b).max_abs_entry()
    }

    #[test]
    fn propagator_at_zero_is_identity() {
        let u = cond_propagator(&reference(), true, true, 0.0).unwrap();
        assert!(max_abs_diff(&u, &CMatrix::identity(3)) < 1e-12);
    }

    #[test]
    fn propagator_matches_matrix_exponential() {
        let p = reference();
        for &t in &[0.05, 0.3, 1.0, 2.0] {
            let u = cond_propagator(&p, true, true, t).unwrap();
            let h = build_h_cond(&p, true, true);
            let m = mat_exp(&h, t).unwrap();
            assert!(max_abs_diff(&u, &m) < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn second_level_is_dark_without_weak_drive() {
        let psi = CVector::basis(3, 1);
        for &tau in &[0.1, 1.0, 10.0] {
            let p0 =
                no_photon_probability(&psi, &reference(), true, false, tau, P0Mode::Exact).unwrap();
            assert!((p0 - 1.0).abs() < 1e-12, "tau = {tau}");
        }
    }

    #[test]
    fn ground_state_fluoresces_under_strong_pulse() {
        let psi = CVector::basis(3, 0);
        let p0 = no_photon_probability(&psi, &reference(), true, false, 2.0, P0Mode::Exact).unwrap();
        assert!(p0 < 1e-3, "got {p0}");
    }

    #[test]
    fn perturbative_p0_tracks_exact_value() {
        let p = reference();
        let eps = Epsilons::for_params(&p).unwrap();
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        let psi = CVector::new3(c(inv, 0.0), c(inv, 0.0), c(0.0, 0.0));
        for &tau in &[2.0, 4.0] {
            let exact =
                no_photon_probability(&psi, &p, true, true, tau, P0Mode::Exact).unwrap();
            let pert =
                no_photon_probability(&psi, &p, true, true, tau, P0Mode::Perturbative).unwrap();
            assert!(
                (exact - pert).abs() <= 10.0 * eps.eps_max * eps.eps_max,
                "tau = {tau}: exact {exact} pert {pert}"
            );
        }
    }

    #[test]
    fn perturbative_p0_requires_both_drives() {
        let psi = CVector::basis(3, 1);
        let err = no_photon_probability(&psi, &reference(), true, false, 2.0, P0Mode::Perturbative)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidParams(_)));
    }

    #[test]
    fn perturbative_p0_rejects_short_pulses() {
        let psi = CVector::basis(3, 1);
        let err = no_photon_probability(&psi, &reference(), true, true, 0.01, P0Mode::Perturbative)
            .unwrap_err();
        assert!(matches!(err, Error::RegimeViolation(_)));
    }

    #[test]
    fn slow_eigenvalue_reference_value() {
        let (lambda2, _, _) = perturbative_eigensystem(&reference()).unwrap();
        assert!((lambda2.re - 0.004).abs() < 1e-15);
        assert_eq!(lambda2.im, 0.0);
    }

    #[test]
    fn slow_eigenpair_matches_numerical_spectrum() {
        let p = reference();
        let eps = Epsilons::for_params(&p).unwrap();
        let (lambda2, v2, w2) = perturbative_eigensystem(&p).unwrap();
        let h = build_h_cond(&p, true, true);
        let eig = eig_with_reciprocal(&h, DEFAULT_DEGENERACY_GAP).unwrap();
        // The slow mode is the eigenvalue of smallest magnitude; its decay
        // rate is −Im λ.
        let (k, lam) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        let rate = -lam.im;
        let tol = 10.0 * eps.eps_max * eps.eps_max;
        assert!((lambda2.re - rate).abs() / rate < tol);
        assert!(lam.re.abs() < 1e-12);
        // Compare unit-normalized eigenvectors (both phase conventions put
        // the dominant second component real positive).
        let vn = v2.normalized().unwrap();
        let wn = w2.normalized().unwrap();
        assert!(vn.distance(&eig.right_vectors[k].normalized().unwrap()) < tol);
        let w_num = eig.reciprocal_vectors[k];
        // Reciprocal vectors carry a biorthogonal normalization; undo it.
        assert!(wn.distance(&w_num.normalized().unwrap()) < tol);
    }

    #[test]
    fn perturbative_eigensystem_rejects_strong_weak_drive() {
        let p = AtomParams::new(10.0, 50.0, 20.0).unwrap();
        assert!(matches!(
            perturbative_eigensystem(&p).unwrap_err(),
            Error::RegimeViolation(_)
        ));
    }

    #[test]
    fn jump_times_reproduce_pure_decay() {
        // From the bare excited state with all drives off, P₀(t) = e^{−A₃t},
        // so the sampled time must equal −ln(r)/A₃.
        let p = reference();
        let psi = CVector::basis(3, 2);
        for &r in &[0.9, 0.5, 0.3, 0.05] {
            match sample_jump_time(&psi, &p, false, false, 1.0, r).unwrap() {
                JumpOutcome::Emitted { time, post_state } => {
                    let expect = -r.ln() / p.a3;
                    assert!((time - expect).abs() < 1e-8, "r = {r}");
                    assert!(post_state.distance(&CVector::basis(3, 0)) < 1e-12);
                }
                JumpOutcome::NoEmission { .. } => panic!("decay must occur for r = {r}"),
            }
        }
    }

    #[test]
    fn silent_window_returns_renormalized_state() {
        let p = reference();
        let psi = CVector::basis(3, 2);
        // e^{−20·0.01} ≈ 0.82 > 0.5: silent window.
        match sample_jump_time(&psi, &p, false, false, 0.01, 0.5).unwrap() {
            JumpOutcome::NoEmission { state } => {
                assert!((state.norm_sq() - 1.0).abs() < 1e-12);
                assert!(state.distance(&psi) < 1e-12);
            }
            JumpOutcome::Emitted { .. } => panic!("window should stay silent"),
        }
    }

    #[test]
    fn dark_state_never_jumps() {
        let p = reference();
        let psi = CVector::basis(3, 1);
        match sample_jump_time(&psi, &p, true, false, 50.0, 1.0 - 1e-12).unwrap() {
            JumpOutcome::NoEmission { state } => {
                assert!(state.distance(&psi) < 1e-9);
            }
            JumpOutcome::Emitted { .. } => panic!("decoupled state must stay silent"),
        }
    }

    #[test]
    fn schedule_simulation_is_deterministic() {
        let p = reference();
        let s = PulseSchedule::new(2.0, 13.6, 3, 1.0, false).unwrap();
        let psi0 = CVector::basis(3, 0);
        let a = simulate_schedule(&psi0, &p, &s, TrajectorySeed::new(7, 3)).unwrap();
        let b = simulate_schedule(&psi0, &p, &s, TrajectorySeed::new(7, 3)).unwrap();
        assert_eq!(a.photon_times, b.photon_times);
        assert_eq!(a.pulse_flags, b.pulse_flags);
        let c = simulate_schedule(&psi0, &p, &s, TrajectorySeed::new(7, 4)).unwrap();
        assert_ne!(a.photon_times, c.photon_times);
    }

    #[test]
    fn photon_record_is_ordered_and_in_range() {
        let p = reference();
        let s = PulseSchedule::new(2.0, 6.0, 5, 2.0, false).unwrap();
        let psi0 = CVector::basis(3, 0);
        let t = simulate_schedule(&psi0, &p, &s, TrajectorySeed::new(11, 0)).unwrap();
        assert_eq!(t.pulse_flags.len(), 5);
        let total = s.total_duration();
        for w in t.photon_times.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert!(t.photon_times.iter().all(|&tt| tt > 0.0 && tt <= total));
        assert!((t.final_state.norm_sq() - 1.0).abs() < 1e-9);
        assert!(!t.photon_times.is_empty(), "strong pulses from |1⟩ must fluoresce");
    }

    #[test]
    fn decoupled_state_produces_silent_trajectory() {
        // With the weak drive off everywhere, |2⟩ never couples to the pulse.
        let p = AtomParams::new(0.0, 50.0, 20.0).unwrap();
        let s = PulseSchedule::new(2.0, 6.0, 4, 2.0, false).unwrap();
        let psi0 = CVector::basis(3, 1);
        let t = simulate_schedule(&psi0, &p, &s, TrajectorySeed::new(1, 1)).unwrap();
        assert!(t.photon_times.is_empty());
        assert!(t.pulse_flags.iter().all(|&f| !f));
        assert!(t.final_state.distance(&psi0) < 1e-9);
    }

    #[test]
    fn no_emission_states_match_slow_eigenvector() {
        let states = post_pulse_states(&reference(), 2.0).unwrap();
        let eps = states.epsilons;
        let m = &states.no_emission_pulse_end;
        assert!((m.trace().re - 1.0).abs() < 1e-12);
        assert!(m.hermiticity_defect() < 1e-12);
        assert!((m[(1, 1)].re - 1.0).abs() < 3.0 * eps.eps_max * eps.eps_max);
        assert!((m[(0, 1)] - c(0.0, -eps.eps_p)).norm() < 3.0 * eps.eps_max * eps.eps_max);
        assert!((m[(1, 2)] - c(-eps.eps_r, 0.0)).norm() < 3.0 * eps.eps_max * eps.eps_max);
        let mp = &states.no_emission_projected;
        assert_eq!(mp.dim(), 2);
        assert!((mp.trace().re - 1.0).abs() < 1e-12);
        assert!((mp[(1, 1)].re - 1.0).abs() < 2.0 * eps.eps_p * eps.eps_p);
    }

    #[test]
    fn emission_states_relax_toward_ground() {
        let states = post_pulse_states(&reference(), 2.0).unwrap();
        let eps = states.epsilons;
        for m in [&states.emission_pulse_end] {
            assert!((m.trace().re - 1.0).abs() < 1e-12);
            assert!(m.hermiticity_defect() < 1e-12);
        }
        let mp = &states.emission_projected;
        assert!((mp.trace().re - 1.0).abs() < 1e-12);
        // Dominated by the ground state up to O(ε).
        assert!(mp[(0, 0)].re > 1.0 - 10.0 * eps.eps_max);
        assert!(mp[(1, 1)].re < 10.0 * eps.eps_max);
        // The emission-conditioned forms are physical as written; the
        // no-emission truncations drop ε² terms and may dip negative by
        // exactly that order, no more.
        for m in [&states.emission_projected, &states.emission_pulse_end] {
            assert!(min_hermitian_eigenvalue(m) > -1e-9);
        }
        let order2 = eps.eps_p * eps.eps_p + eps.eps_r * eps.eps_r;
        for m in [&states.no_emission_projected, &states.no_emission_pulse_end] {
            assert!(min_hermitian_eigenvalue(m) > -3.0 * order2);
        }
    }

    fn min_hermitian_eigenvalue(m: &CMatrix) -> f64 {
        let eig = eig_with_reciprocal(m, DEFAULT_DEGENERACY_GAP);
        match eig {
            Ok(e) => e.eigenvalues[..m.dim()]
                .iter()
                .map(|l| l.re)
                .fold(f64::INFINITY, f64::min),
            // Degenerate Hermitian spectra only occur here for states that
            // are numerically rank-one projectors; their smallest eigenvalue
            // is then 0 within tolerance.
            Err(_) => 0.0,
        }
    }

    #[test]
    fn exceptional_flag_fires_near_slow_eigenvector() {
        let states = post_pulse_states(&reference(), 2.0).unwrap();
        assert!(states.exceptional_for(&CVector::basis(3, 1)));
        assert!(!states.exceptional_for(&CVector::basis(3, 0)));
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        let balanced = CVector::new3(c(inv, 0.0), c(inv, 0.0), c(0.0, 0.0));
        assert!(!states.exceptional_for(&balanced));
    }

    #[test]
    fn transition_probs_reduce_to_ideal_when_ratios_vanish() {
        // Shrink all ε by driving Ω₂ down while keeping Ω₂·dt fixed.
        let p = AtomParams::new(1e-8, 50.0, 20.0).unwrap();
        let dt = 1.0 / 1e-8;
        let (p_val, q_val) = transition_probs_pq_with_margin(&p, dt, 2.0, 0.0).unwrap();
        assert!((p_val - (0.5f64).sin().powi(2)).abs() < 1e-7);
        assert!((q_val - (0.5f64).cos().powi(2)).abs() < 1e-7);
    }

    #[test]
    fn transition_probs_enforce_gap_gates() {
        let p = reference();
        // dt·A₃ = 0.2 ≪ 10: gap too short for the default margin.
        let err = transition_probs_pq(&p, 0.01, 2.0).unwrap_err();
        match err {
            Error::RegimeViolation(msg) => assert!(msg.contains("gap")),
            other => panic!("expected regime violation, got {other:?}"),
        }
    }

    #[test]
    fn cycle_asymmetry_has_closed_form() {
        // Independent regrouping of the first-order terms: the imbalance
        // (1 − q) − p must equal
        //   ε_p·[2s·k₃ + ½Ω₂τ_p(2 − 2c·A₃²/D)] + ½ε_A·s·k₃,  k₃ = Ω₃²/D,
        // which is manifestly positive for s ≥ 0, making dark periods
        // shorter than light ones.
        for &(w2, w3, a3) in &[(1.0, 50.0, 20.0), (0.4, 50.0, 20.0), (0.2, 30.0, 10.0)] {
            let p = AtomParams::new(w2, w3, a3).unwrap();
            let eps = Epsilons::for_params(&p).unwrap();
            for &dt in &[0.5, 1.25, 2.0] {
                for &tau_p in &[1.0, 2.0, 4.0] {
                    let (p_val, q_val) =
                        transition_probs_pq_with_margin(&p, dt, tau_p, 0.0).unwrap();
                    let theta = p.omega2 * dt;
                    let (s, cth) = theta.sin_cos();
                    let d = a3 * a3 + 2.0 * w3 * w3;
                    let k3 = w3 * w3 / d;
                    let expect = eps.eps_p
                        * (2.0 * s * k3 + 0.5 * w2 * tau_p * (2.0 - 2.0 * cth * a3 * a3 / d))
                        + 0.5 * eps.eps_a * s * k3;
                    let got = (1.0 - q_val) - p_val;
                    assert!(
                        (got - expect).abs() < 1e-14,
                        "w2={w2} dt={dt} tau_p={tau_p}: {got} vs {expect}"
                    );
                    if s >= 0.0 {
                        assert!(got > 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn period_means_follow_from_transition_probs() {
        let p = AtomParams::new(0.4, 50.0, 20.0).unwrap();
        let (dt, tau_p) = (1.25, 2.0);
        let (p_val, q_val) = transition_probs_pq(&p, dt, tau_p).unwrap();
        let (light, dark) = period_statistics(&p, dt, tau_p, PeriodMode::Analytic).unwrap();
        assert!((light - (tau_p + dt) / p_val).abs() < 1e-12);
        assert!((dark - (tau_p + dt) / (1.0 - q_val)).abs() < 1e-12);
        assert!(dark < light);
    }

    #[test]
    fn shelving_limit_reference_values() {
        let (light, dark) =
            period_statistics(&reference(), 1.0, 1.0, PeriodMode::ShelvingLimit).unwrap();
        assert!((light - 1687.5).abs() < 1e-9);
        assert!((dark - 125.0).abs() < 1e-9);
    }

    #[test]
    fn analytic_periods_approach_shelving_limit() {
        let p = reference();
        let tau_p = 2.0;
        let (limit_light, limit_dark) =
            period_statistics(&p, 1.0, tau_p, PeriodMode::ShelvingLimit).unwrap();
        let mut last = f64::INFINITY;
        for &dt in &[2.0, 1.0, 0.5, 0.25] {
            let (light, dark) =
                period_statistics_with_margin(&p, dt, tau_p, PeriodMode::Analytic, 0.0).unwrap();
            let dist = ((light - limit_light) / limit_light).abs()
                + ((dark - limit_dark) / limit_dark).abs();
            assert!(dist < last, "dt = {dt}: distance must shrink");
            last = dist;
        }
    }

    #[test]
    fn diverging_periods_are_reported() {
        // Near a full 2π rotation per gap with a very short pulse, the
        // first-order q exceeds 1 and the dark-period mean loses meaning.
        let p = AtomParams::new(1.0, 50.0, 20.0).unwrap();
        let dt = 2.0 * std::f64::consts::PI - 0.032;
        let err =
            period_statistics_with_margin(&p, dt, 0.01, PeriodMode::Analytic, 0.0).unwrap_err();
        assert!(matches!(err, Error::DivergentPeriod(_)));
    }

    #[test]
    fn interior_periods_are_extracted() {
        let p = reference();
        let s = PulseSchedule::new(2.0, 6.0, 6, 2.0, false).unwrap();
        let t = Trajectory {
            photon_times: Vec::new(),
            pulse_flags: vec![true, true, false, false, false, true],
            final_state: CVector::basis(3, 0),
            seed: TrajectorySeed::new(0, 0),
        };
        let _ = p;
        let periods = extract_periods(&t, &s);
        assert_eq!(periods.len(), 1);
        assert_eq!(periods[0].kind, PeriodKind::Dark);
        assert_eq!(periods[0].pulse_count, 3);
        assert!((periods[0].duration - 3.0 * s.cycle()).abs() < 1e-12);
    }

    #[test]
    fn truncated_records_yield_no_periods() {
        let s = PulseSchedule::new(2.0, 6.0, 4, 2.0, false).unwrap();
        for flags in [vec![true, true, true, true], vec![true, true, false, false]] {
            let t = Trajectory {
                photon_times: Vec::new(),
                pulse_flags: flags,
                final_state: CVector::basis(3, 0),
                seed: TrajectorySeed::new(0, 0),
            };
            assert!(extract_periods(&t, &s).is_empty());
        }
    }

    #[test]
    fn trajectory_seeds_are_order_independent() {
        let s3 = TrajectorySeed::new(42, 3).rng().random::<u64>();
        let mut rng = TrajectorySeed::new(42, 7).rng();
        let _ = rng.random::<u64>();
        let s3_again = TrajectorySeed::new(42, 3).rng().random::<u64>();
        assert_eq!(s3, s3_again);
    }
}
