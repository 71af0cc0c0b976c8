//! Physical parameterization of the driven V-system atom.
//!
//! The atom has a ground state |1⟩, a metastable level |2⟩ driven by a weak
//! field with Rabi frequency Ω₂, and a fast-decaying level |3⟩ driven by a
//! strong pulsed field with Rabi frequency Ω₃ and Einstein coefficient A₃.
//! Everything is resonant and ħ = 1, so all parameters are angular
//! frequencies (or rates) in reciprocal user time units.
//!
//! The module builds the three generators the simulation layers share —
//! the non-Hermitian conditional Hamiltonian for no-photon evolution, the
//! free two-level propagator for ideal-measurement analytics, and the
//! Lindblad generator for the master-equation integrator — plus the small
//! parameters ε and the schedule gates that decide whether a strong pulse
//! may be treated as a projective measurement.


use crate::error::{Error, Result};
use crate::linalg::{C64, CMatrix};

/// Factor quantifying "much greater than" in the regime gates. Ratios of at
/// least 10 reproduce the intended operating regime; callers may relax or
/// tighten it, and a margin of 0 disables a gate.
pub const DEFAULT_MARGIN: f64 = 10.0;

/// Drive amplitudes and decay rate of the V system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtomParams {
    /// Weak 1–2 drive Rabi frequency Ω₂ (rad / time unit).
    pub omega2: f64,
    /// Strong 1–3 pulse Rabi frequency Ω₃ (rad / time unit).
    pub omega3: f64,
    /// Einstein coefficient A₃ of level 3 (1 / time unit).
    pub a3: f64,
}

impl AtomParams {
    /// Validated constructor: all rates finite and non-negative. Zero values
    /// are allowed so that single-drive and no-decay configurations can be
    /// expressed; operations that need a strictly positive Ω₃ or A₃ (the ε
    /// parameters, perturbative formulas) check for themselves.
    pub fn new(omega2: f64, omega3: f64, a3: f64) -> Result<Self> {
        for (name, v) in [("omega2", omega2), ("omega3", omega3), ("a3", a3)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(Self { omega2, omega3, a3 })
    }

    /// The reference working point used throughout the test suite:
    /// Ω₂ = 1, Ω₃ = 50, A₃ = 20 (ε_A, ε_R, ε_p) = (0.05, 0.02, 0.008).
    pub fn reference() -> Self {
        Self { omega2: 1.0, omega3: 50.0, a3: 20.0 }
    }

    pub fn max_rate(&self) -> f64 {
        self.omega2.max(self.omega3).max(self.a3)
    }
}

/// The three small parameters that control how closely a strong laser pulse
/// approximates an ideal projective measurement of the 1–2 populations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Epsilons {
    /// Ω₂/A₃ — weak drive vs. decay rate.
    pub eps_a: f64,
    /// Ω₂/Ω₃ — weak drive vs. strong drive.
    pub eps_r: f64,
    /// Ω₂A₃/Ω₃² — weak drive vs. effective projection rate of the pulse.
    pub eps_p: f64,
    /// max(ε_A, ε_R, ε_p).
    pub eps_max: f64,
}

impl Epsilons {
    /// Requires strictly positive Ω₃ and A₃ (otherwise the ratios are
    /// undefined).
    pub fn for_params(p: &AtomParams) -> Result<Self> {
        if p.omega3 <= 0.0 || p.a3 <= 0.0 {
            return Err(Error::InvalidParams(
                "epsilon parameters need omega3 > 0 and a3 > 0".into(),
            ));
        }
        let eps_a = p.omega2 / p.a3;
        let eps_r = p.omega2 / p.omega3;
        let eps_p = p.omega2 * p.a3 / (p.omega3 * p.omega3);
        Ok(Self { eps_a, eps_r, eps_p, eps_max: eps_a.max(eps_r).max(eps_p) })
    }
}

/// One gate of the operating-regime check: `passes ⇔ value ≥ threshold`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateCheck {
    pub value: f64,
    pub threshold: f64,
    pub passes: bool,
}

impl GateCheck {
    fn new(value: f64, threshold: f64) -> Self {
        Self { value, threshold, passes: value >= threshold }
    }
}

/// Outcome of the four schedule gates, each a "≫" condition quantified by
/// `margin`. Producing the report never fails; operations that *rely* on a
/// gate convert the relevant failures into [`Error::RegimeViolation`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegimeReport {
    pub margin: f64,
    /// τ_p·min(A₃, Ω₃²/A₃) ≥ margin: the pulse lasts long enough to act as a
    /// population measurement (both the decay time 1/A₃ and the effective
    /// pumping time A₃/Ω₃² must fit many times into τ_p).
    pub pulse_duration: GateCheck,
    /// τ_tr·A₃ ≥ margin: the declared transient wait lets residual |3⟩
    /// population decay after a pulse.
    pub transient_duration: GateCheck,
    /// Δt·A₃ ≥ margin: the free gap is long enough for the same decay, so
    /// the next pulse starts from a clean 1–2 state.
    pub gap_duration: GateCheck,
    /// (Ω₂Δt)² ≥ margin·ε_max: the weak drive rotates the 1–2 state enough
    /// between pulses that the first-order transition formulas dominate the
    /// neglected ε² terms.
    pub gap_rotation: GateCheck,
}

impl RegimeReport {
    pub fn all_pass(&self) -> bool {
        self.pulse_duration.passes
            && self.transient_duration.passes
            && self.gap_duration.passes
            && self.gap_rotation.passes
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, gate) in [
            ("pulse_duration", self.pulse_duration),
            ("transient_duration", self.transient_duration),
            ("gap_duration", self.gap_duration),
            ("gap_rotation", self.gap_rotation),
        ] {
            if !gate.passes {
                out.push(format!("{name} ({:.3e} < {:.3e})", gate.value, gate.threshold));
            }
        }
        out
    }
}

pub(crate) fn pulse_duration_gate(p: &AtomParams, tau_p: f64, margin: f64) -> GateCheck {
    let rate = if p.a3 > 0.0 { p.a3.min(p.omega3 * p.omega3 / p.a3) } else { 0.0 };
    GateCheck::new(tau_p * rate, margin)
}

/// Where the strong pulse sits inside each repetition interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PulseAlignment {
    /// Free gap first, pulse flush with the interval end (the convention of
    /// the pulsed π-pulse experiment, where the k-th pulse ends at kT_π/n).
    IntervalEnd,
    /// Pulse first, free gap after.
    IntervalStart,
}

/// Piecewise-constant drive schedule: `n_pulses` repetitions of a strong
/// pulse of length `tau_p` and a weak-drive-only gap of length `dt`.
///
/// `tau_tr` is the transient allowance after a pulse during which residual
/// |3⟩ population decays; it is regime bookkeeping (see [`RegimeReport`])
/// plus, for end-aligned schedules, a trailing observation window after the
/// final pulse so that its delayed fluorescence is still attributed to it.
/// Within the schedule body, all photons between one pulse's start and the
/// next pulse's start count toward the earlier pulse's fluorescence flag.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseSchedule {
    pub tau_p: f64,
    pub dt: f64,
    pub n_pulses: usize,
    pub tau_tr: f64,
    /// Weak drive kept on while the strong pulse is on?
    pub weak_on_during_pulse: bool,
    pub alignment: PulseAlignment,
    /// Total π-pulse time T_π when the schedule tiles one; fixes
    /// `n_pulses·(dt + tau_p) = T_π`.
    pub pi_pulse_total: Option<f64>,
}

impl PulseSchedule {
    /// General constructor with end-aligned pulses.
    pub fn new(
        tau_p: f64,
        dt: f64,
        n_pulses: usize,
        tau_tr: f64,
        weak_on_during_pulse: bool,
    ) -> Result<Self> {
        let s = Self {
            tau_p,
            dt,
            n_pulses,
            tau_tr,
            weak_on_during_pulse,
            alignment: PulseAlignment::IntervalEnd,
            pi_pulse_total: None,
        };
        s.validate()?;
        Ok(s)
    }

    /// Schedule for n measurement pulses tiling one π pulse of total length
    /// `t_pi`: each interval T_π/n is a free gap followed by a pulse flush
    /// with the interval end, the weak drive stays on throughout, and there
    /// is no trailing transient.
    pub fn itano(n_pulses: usize, t_pi: f64, tau_p: f64) -> Result<Self> {
        if !(t_pi > 0.0) || !t_pi.is_finite() {
            return Err(Error::InvalidParams(format!("t_pi must be positive, got {t_pi}")));
        }
        if n_pulses == 0 {
            return Err(Error::InvalidParams("n_pulses must be at least 1".into()));
        }
        let dt = t_pi / n_pulses as f64 - tau_p;
        if dt <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "pulses do not fit: n_pulses·tau_p = {} must stay below t_pi = {}",
                n_pulses as f64 * tau_p,
                t_pi
            )));
        }
        let s = Self {
            tau_p,
            dt,
            n_pulses,
            tau_tr: 0.0,
            weak_on_during_pulse: true,
            alignment: PulseAlignment::IntervalEnd,
            pi_pulse_total: Some(t_pi),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tau_p", self.tau_p), ("dt", self.dt), ("tau_tr", self.tau_tr)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if self.n_pulses == 0 {
            return Err(Error::InvalidParams("n_pulses must be at least 1".into()));
        }
        if let Some(t_pi) = self.pi_pulse_total {
            let tiled = self.n_pulses as f64 * (self.dt + self.tau_p);
            if (tiled - t_pi).abs() > 1e-12 * t_pi.abs().max(1.0) {
                return Err(Error::InvalidParams(format!(
                    "schedule does not tile the pi pulse: n·(dt+tau_p) = {tiled} vs t_pi = {t_pi}"
                )));
            }
        }
        Ok(())
    }

    /// Pulse repetition period τ_p + Δt.
    pub fn cycle(&self) -> f64 {
        self.tau_p + self.dt
    }

    /// Strong-drive window `[start, end)` of pulse `k`.
    pub fn pulse_window(&self, k: usize) -> (f64, f64) {
        assert!(k < self.n_pulses);
        let c = self.cycle();
        let start = match self.alignment {
            PulseAlignment::IntervalEnd => k as f64 * c + self.dt,
            PulseAlignment::IntervalStart => k as f64 * c,
        };
        (start, start + self.tau_p)
    }

    /// Total simulated time, including the trailing transient window of an
    /// end-aligned schedule.
    pub fn total_duration(&self) -> f64 {
        let body = self.n_pulses as f64 * self.cycle();
        match self.alignment {
            PulseAlignment::IntervalEnd => body + self.tau_tr,
            PulseAlignment::IntervalStart => body,
        }
    }

    /// The schedule unrolled into contiguous constant-drive segments.
    /// Zero-length segments are dropped. `attribution` is the pulse index
    /// that owns photons emitted during the segment (the most recent pulse).
    pub fn segments(&self) -> Vec<DriveSegment> {
        let mut out = Vec::with_capacity(2 * self.n_pulses + 1);
        let mut push = |duration: f64, strong_on: bool, weak_on: bool, attribution: Option<usize>| {
            if duration > 0.0 {
                out.push(DriveSegment { duration, strong_on, weak_on, attribution });
            }
        };
        for k in 0..self.n_pulses {
            match self.alignment {
                PulseAlignment::IntervalEnd => {
                    push(self.dt, false, true, k.checked_sub(1));
                    push(self.tau_p, true, self.weak_on_during_pulse, Some(k));
                }
                PulseAlignment::IntervalStart => {
                    push(self.tau_p, true, self.weak_on_during_pulse, Some(k));
                    push(self.dt, false, true, Some(k));
                }
            }
        }
        if self.alignment == PulseAlignment::IntervalEnd {
            push(self.tau_tr, false, true, Some(self.n_pulses - 1));
        }
        out
    }
}

/// One constant-drive stretch of a schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriveSegment {
    pub duration: f64,
    pub strong_on: bool,
    pub weak_on: bool,
    /// Index of the pulse whose fluorescence flag owns this segment's
    /// photons; `None` before the first pulse.
    pub attribution: Option<usize>,
}

/// Conditional (no-photon) Hamiltonian, ħ = 1:
/// `½[Ω₂(|1⟩⟨2|+|2⟩⟨1|) + Ω₃(|1⟩⟨3|+|3⟩⟨1|) − iA₃|3⟩⟨3|]`
/// with each drive term included only when the corresponding flag is set.
/// The decay term is always present. Both drives are taken real and
/// positive; on resonance a relative drive phase would only redefine the
/// basis phases.
pub fn build_h_cond(p: &AtomParams, strong_on: bool, weak_on: bool) -> CMatrix {
    let mut h = CMatrix::zeros(3);
    if weak_on {
        let half = C64::new(p.omega2 / 2.0, 0.0);
        h[(0, 1)] = half;
        h[(1, 0)] = half;
    }
    if strong_on {
        let half = C64::new(p.omega3 / 2.0, 0.0);
        h[(0, 2)] = half;
        h[(2, 0)] = half;
    }
    h[(2, 2)] = C64::new(0.0, -p.a3 / 2.0);
    h
}

/// Free weak-drive propagator
/// `U(t) = cos(Ω₂t/2)·1 − i·sin(Ω₂t/2)(|1⟩⟨2|+|2⟩⟨1|)`,
/// embedded as the identity on |3⟩.
pub fn free_propagator(p: &AtomParams, t: f64) -> CMatrix {
    debug_assert!(t >= 0.0);
    let half = p.omega2 * t / 2.0;
    let c = C64::new(half.cos(), 0.0);
    let s = C64::new(0.0, -half.sin());
    let mut u = CMatrix::zeros(3);
    u[(0, 0)] = c;
    u[(1, 1)] = c;
    u[(0, 1)] = s;
    u[(1, 0)] = s;
    u[(2, 2)] = C64::new(1.0, 0.0);
    u
}

/// Master-equation generator
/// `ρ̇ = −i(H_cond ρ − ρ H_cond†) + A₃⟨3|ρ|3⟩·|1⟩⟨1|`,
/// i.e. Hamiltonian flow plus decay of |3⟩ feeding the ground state — the
/// unique Lindblad form whose jump operator resets the atom to |1⟩, which is
/// the same reset the quantum-jump engine applies on each emission.
#[derive(Clone, Debug)]
pub struct LindbladGenerator {
    /// `−i·H_cond`, precomputed.
    drift: CMatrix,
    /// `(−i·H_cond)†`, precomputed.
    drift_adj: CMatrix,
    a3: f64,
    h_cond: CMatrix,
}

impl LindbladGenerator {
    pub fn h_cond(&self) -> &CMatrix {
        &self.h_cond
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = self.drift.mul(rho).add(&rho.mul(&self.drift_adj));
        out[(0, 0)] += C64::new(self.a3, 0.0) * rho[(2, 2)];
        out
    }
}

pub fn lindblad_generator(p: &AtomParams, strong_on: bool, weak_on: bool) -> LindbladGenerator {
    let h_cond = build_h_cond(p, strong_on, weak_on);
    let drift = h_cond.scale(C64::new(0.0, -1.0));
    LindbladGenerator { drift, drift_adj: drift.adjoint(), a3: p.a3, h_cond }
}

/// ε parameters plus the schedule regime report at the default margin.
pub fn compute_epsilons(p: &AtomParams, s: &PulseSchedule) -> Result<(Epsilons, RegimeReport)> {
    compute_epsilons_with_margin(p, s, DEFAULT_MARGIN)
}

/// Same with an explicit margin (0 disables the gates).
pub fn compute_epsilons_with_margin(
    p: &AtomParams,
    s: &PulseSchedule,
    margin: f64,
) -> Result<(Epsilons, RegimeReport)> {
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(Error::InvalidParams(format!("margin must be non-negative, got {margin}")));
    }
    s.validate()?;
    let eps = Epsilons::for_params(p)?;
    let report = RegimeReport {
        margin,
        pulse_duration: pulse_duration_gate(p, s.tau_p, margin),
        transient_duration: GateCheck::new(s.tau_tr * p.a3, margin),
        gap_duration: GateCheck::new(s.dt * p.a3, margin),
        gap_rotation: GateCheck::new((p.omega2 * s.dt).powi(2), margin * eps.eps_max),
    };
    Ok((eps, report))
}
