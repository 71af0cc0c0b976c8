//! Density-matrix (optical Bloch) integrator.
//!
//! Evolves the full three-level density matrix under the master equation
//! whose drift is the conditional Hamiltonian and whose single collapse
//! channel feeds the decayed |3⟩ population back into |1⟩. This is the
//! ensemble-averaged counterpart of the quantum-jump engine: averaging many
//! trajectories must reproduce these populations, which gives the
//! cross-validation layer used throughout the test suite.

use crate::error::{Error, Result};
use crate::linalg::{eig_with_reciprocal, C64, CMatrix, CVector, DEFAULT_DEGENERACY_GAP};
use crate::model::{lindblad_generator, AtomParams, LindbladGenerator, PulseSchedule};

/// Largest stable integrator step, as a fraction of the fastest rate.
const MAX_STEP_FRACTION: f64 = 0.1;
/// Default integrator step, as a fraction of the fastest rate.
const DEFAULT_STEP_FRACTION: f64 = 0.02;
/// Positivity floor checked at segment boundaries during integration.
const POSITIVITY_FLOOR: f64 = -1e-6;
/// Validation tolerances of the density-matrix type itself.
const HERMITICITY_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const EIGENVALUE_FLOOR: f64 = -1e-8;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A validated density matrix: Hermitian to 1e-10, unit trace to 1e-10, and
/// no eigenvalue below −1e-8.
#[derive(Clone, Copy, Debug)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::InvalidParams("density matrix must be finite".into()));
        }
        let herm = m.hermiticity_defect();
        if herm > HERMITICITY_TOL {
            return Err(Error::InvalidParams(format!(
                "density matrix must be Hermitian, defect {herm}"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidParams(format!("density matrix must have unit trace, got {tr}")));
        }
        let min = min_hermitian_eigenvalue(&m)?;
        if min < EIGENVALUE_FLOOR {
            return Err(Error::InvalidParams(format!(
                "density matrix must be positive semidefinite, min eigenvalue {min}"
            )));
        }
        Ok(Self(m))
    }

    /// Projector onto a pure state (normalized internally).
    pub fn from_pure(psi: &CVector) -> Result<Self> {
        let n2 = psi.norm_sq();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::InvalidParams(format!(
                "pure state must have positive norm, got ‖ψ‖² = {n2}"
            )));
        }
        Self::new(psi.outer(psi).scale(c(1.0 / n2, 0.0)))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    /// Population of level `k` (0-based).
    pub fn level_population(&self, k: usize) -> f64 {
        self.0[(k, k)].re
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        min_hermitian_eigenvalue(&self.0)
    }
}

/// Smallest eigenvalue of (the Hermitian part of) `m`.
fn min_hermitian_eigenvalue(m: &CMatrix) -> Result<f64> {
    let sym = m.add(&m.adjoint()).scale(c(0.5, 0.0));
    let eig = eig_with_reciprocal(&sym, DEFAULT_DEGENERACY_GAP)?;
    Ok(eig.eigenvalues[..m.dim()].iter().map(|l| l.re).fold(f64::INFINITY, f64::min))
}

/// Result of a master-equation integration over a schedule.
#[derive(Clone, Debug)]
pub struct MasterSolution {
    pub final_rho: DensityMatrix,
    /// (time, Re tr ρ) at the start of the run and after every drive segment.
    pub trace_samples: Vec<(f64, f64)>,
    /// Largest |tr ρ − 1| seen at any integrator step.
    pub max_trace_deviation: f64,
}

/// Default fixed step for the given parameters: 0.02 divided by the fastest
/// rate in the problem.
pub fn default_step(p: &AtomParams) -> f64 {
    let rate = p.max_rate();
    if rate > 0.0 {
        DEFAULT_STEP_FRACTION / rate
    } else {
        DEFAULT_STEP_FRACTION
    }
}

/// Integrates the master equation over the schedule with a fixed-step RK4
/// rule. Each drive segment is partitioned exactly (n = ⌈len/step⌉ steps of
/// length len/n), so segment boundaries are hit without remainder. The trace
/// is monitored at every step and positivity at every segment boundary.
pub fn integrate_master(
    rho0: &DensityMatrix,
    p: &AtomParams,
    s: &PulseSchedule,
    step: f64,
) -> Result<MasterSolution> {
    s.validate()?;
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParams(format!("step must be positive, got {step}")));
    }
    let rate = p.max_rate();
    if rate > 0.0 {
        let max = MAX_STEP_FRACTION / rate;
        if step > max {
            return Err(Error::StepTooLarge { step, max });
        }
    }
    let mut generators: [Option<LindbladGenerator>; 4] = [None, None, None, None];
    let mut rho = *rho0.matrix();
    let mut t = 0.0f64;
    let mut trace_samples = vec![(0.0, rho.trace().re)];
    let mut max_trace_deviation = (rho.trace().re - 1.0).abs();
    for seg in s.segments() {
        let slot = (seg.strong_on as usize) * 2 + seg.weak_on as usize;
        if generators[slot].is_none() {
            generators[slot] = Some(lindblad_generator(p, seg.strong_on, seg.weak_on));
        }
        let gen = generators[slot].as_ref().expect("generator just inserted");
        let n = (seg.duration / step).ceil().max(1.0) as u64;
        let h = seg.duration / n as f64;
        for _ in 0..n {
            rho = rk4_step(gen, &rho, h);
            let dev = (rho.trace().re - 1.0).abs();
            if dev > max_trace_deviation {
                max_trace_deviation = dev;
            }
        }
        t += seg.duration;
        trace_samples.push((t, rho.trace().re));
        let min = min_hermitian_eigenvalue(&rho)?;
        if min < POSITIVITY_FLOOR {
            return Err(Error::PositivityLoss { min_eig: min });
        }
    }
    Ok(MasterSolution {
        final_rho: DensityMatrix::new(rho)?,
        trace_samples,
        max_trace_deviation,
    })
}

fn rk4_step(gen: &LindbladGenerator, rho: &CMatrix, h: f64) -> CMatrix {
    let half = c(h / 2.0, 0.0);
    let k1 = gen.apply(rho);
    let k2 = gen.apply(&rho.add(&k1.scale(half)));
    let k3 = gen.apply(&rho.add(&k2.scale(half)));
    let k4 = gen.apply(&rho.add(&k3.scale(c(h, 0.0))));
    let two = c(2.0, 0.0);
    let sum = k1.add(&k2.scale(two)).add(&k3.scale(two)).add(&k4);
    rho.add(&sum.scale(c(h / 6.0, 0.0)))
}

/// Final population of level 2 for an atom starting in |1⟩ and driven by a
/// π pulse of total length `t_pi` interrupted by `n_pulses` probe pulses of
/// length `tau_p` (the ensemble-averaged pulsed-measurement experiment).
pub fn itano_bloch_population(
    n_pulses: usize,
    p: &AtomParams,
    t_pi: f64,
    tau_p: f64,
    step: f64,
) -> Result<f64> {
    let s = PulseSchedule::itano(n_pulses, t_pi, tau_p)?;
    let rho0 = DensityMatrix::from_pure(&CVector::basis(3, 0))?;
    let sol = integrate_master(&rho0, p, &s, step)?;
    Ok(sol.final_rho.level_population(1))
}
