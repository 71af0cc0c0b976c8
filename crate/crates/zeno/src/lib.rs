//! Three-level quantum dynamics toolkit for pulsed fluorescence-readout
//! experiments.
//!
//! The crate models an atom with a weak driven transition (1 ↔ 2) probed by
//! a strong, rapidly decaying transition (1 ↔ 3), and provides three layers
//! of predictions that cross-validate each other:
//!
//! - [`ideal`] — projection-postulate analytics: instantaneous perfect
//!   measurements, two-state Markov statistics, measurement-slowed
//!   (frozen) evolution.
//! - [`jump`] — stochastic wave-function trajectories driven by the
//!   conditional Hamiltonian, plus the first-order closed forms for the
//!   slow eigenmode, post-pulse states, and light/dark period lengths.
//! - [`bloch`] — the ensemble-averaged master equation, integrated with a
//!   fixed-step fourth-order rule over the same drive schedules.
//!
//! [`linalg`] carries the small dense complex linear algebra (spectral
//! decompositions with reciprocal eigenvectors, matrix exponentials) and
//! [`model`] the shared physical setup: parameters, expansion ratios,
//! regime gates, drive schedules, and the conditional and Lindblad
//! generators. All stochastic sampling is deterministic given a
//! [`jump::TrajectorySeed`], independent of evaluation order.

pub mod bloch;
pub mod error;
pub mod ideal;
pub mod jump;
pub mod linalg;
pub mod model;

pub use bloch::{
    default_step, integrate_master, itano_bloch_population, DensityMatrix, MasterSolution,
};
pub use error::{Error, Result};
pub use ideal::{
    cook_population, flip_probability, ideal_period_stats, ideal_survival, sample_ideal_path,
    IdealPath, Level,
};
pub use jump::{
    cond_propagator, extract_periods, no_photon_probability, period_statistics,
    period_statistics_with_margin, perturbative_eigensystem, post_pulse_states, sample_jump_time,
    simulate_schedule, transition_probs_pq, transition_probs_pq_with_margin, ChaCha8Rng,
    CorrectionStates, JumpOutcome, P0Mode, PeriodKind, PeriodMode, PeriodRecord, Trajectory,
    TrajectorySeed,
};
pub use linalg::{eig_with_reciprocal, mat_exp, C64, CMatrix, CVector, EigSystem, DEFAULT_DEGENERACY_GAP};
pub use model::{
    build_h_cond, compute_epsilons, compute_epsilons_with_margin, free_propagator,
    lindblad_generator, AtomParams, DriveSegment, Epsilons, GateCheck, LindbladGenerator,
    PulseAlignment, PulseSchedule, RegimeReport, DEFAULT_MARGIN,
};
