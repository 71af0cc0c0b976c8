//! Dense complex linear algebra for dimensions 2 and 3.
//!
//! This is all the machinery the rest of the crate needs: small fixed-size
//! complex vectors/matrices, a non-Hermitian eigendecomposition with
//! reciprocal (left) eigenvectors for the spectral propagator
//! `U(t) = Σ_i e^{-iλ_i t} |λ_i⟩⟨λ^i|`, and a scaling-and-squaring matrix
//! exponential as the fallback for (near-)degenerate spectra. A general
//! eigensolver dependency would be overkill at dimension 3: the
//! characteristic polynomial is a cubic we can solve in closed form and
//! polish with Newton steps.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Maximum (and storage) dimension. Logical dimension may be 2 or 3.
pub const MAX_DIM: usize = 3;

/// Default relative spectral-gap threshold below which an eigensystem is
/// flagged degenerate and spectral propagation is abandoned in favour of
/// [`mat_exp`].
pub const DEFAULT_DEGENERACY_GAP: f64 = 1e-8;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Complex amplitude vector of logical dimension 2 or 3.
///
/// Stored in a fixed 3-slot array; unused trailing slots are zero, so most
/// arithmetic can ignore `dim` safely.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CVector {
    entries: [C64; MAX_DIM],
    dim: usize,
}

impl CVector {
    pub fn zero(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3, "vector dimension must be 2 or 3");
        Self { entries: [ZERO; MAX_DIM], dim }
    }

    pub fn new2(a: C64, b: C64) -> Self {
        Self { entries: [a, b, ZERO], dim: 2 }
    }

    pub fn new3(a: C64, b: C64, c: C64) -> Self {
        Self { entries: [a, b, c], dim: 3 }
    }

    /// `i`-th standard basis vector of the given dimension.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Self::zero(dim);
        assert!(i < dim, "basis index out of range");
        v.entries[i] = ONE;
        v
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Unit vector along `self`; errors on zero or non-finite input.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::NumericOverflow("vector normalization"));
        }
        Ok(self.scale(C64::new(1.0 / n, 0.0)))
    }

    /// Inner product `⟨self|other⟩` (conjugates `self`).
    pub fn dot(&self, other: &Self) -> C64 {
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = *self;
        for e in &mut out.entries {
            *e *= c;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = *self;
        for (e, o) in out.entries.iter_mut().zip(other.entries.iter()) {
            *e += o;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = *self;
        for (e, o) in out.entries.iter_mut().zip(other.entries.iter()) {
            *e -= o;
        }
        out
    }

    /// Outer product `|self⟩⟨other|`.
    pub fn outer(&self, other: &Self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim.max(other.dim));
        for i in 0..MAX_DIM {
            for j in 0..MAX_DIM {
                m.entries[i][j] = self.entries[i] * other.entries[j].conj();
            }
        }
        m
    }

    /// Euclidean distance `‖self − other‖`.
    pub fn distance(&self, other: &Self) -> f64 {
        self.sub(other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl std::ops::Index<usize> for CVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.entries[i]
    }
}

impl std::ops::IndexMut<usize> for CVector {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.entries[i]
    }
}

/// Row-major complex matrix of logical dimension 2 or 3.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CMatrix {
    entries: [[C64; MAX_DIM]; MAX_DIM],
    dim: usize,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3, "matrix dimension must be 2 or 3");
        Self { entries: [[ZERO; MAX_DIM]; MAX_DIM], dim }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i][i] = ONE;
        }
        m
    }

    pub fn from_rows2(rows: [[C64; 2]; 2]) -> Self {
        let mut m = Self::zeros(2);
        for i in 0..2 {
            for j in 0..2 {
                m.entries[i][j] = rows[i][j];
            }
        }
        m
    }

    pub fn from_rows3(rows: [[C64; 3]; 3]) -> Self {
        Self { entries: rows, dim: 3 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> CVector {
        CVector { entries: self.entries[i], dim: self.dim }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.dim.max(other.dim));
        for i in 0..MAX_DIM {
            for j in 0..MAX_DIM {
                let mut s = ZERO;
                for k in 0..MAX_DIM {
                    s += self.entries[i][k] * other.entries[k][j];
                }
                out.entries[i][j] = s;
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &CVector) -> CVector {
        let mut out = CVector::zero(self.dim.max(v.dim));
        for i in 0..MAX_DIM {
            let mut s = ZERO;
            for k in 0..MAX_DIM {
                s += self.entries[i][k] * v.entries[k];
            }
            out.entries[i] = s;
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..MAX_DIM {
            for j in 0..MAX_DIM {
                out.entries[i][j] = self.entries[j][i].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..MAX_DIM).map(|i| self.entries[i][i]).sum()
    }

    pub fn det(&self) -> C64 {
        let e = &self.entries;
        if self.dim == 2 {
            return e[0][0] * e[1][1] - e[0][1] * e[1][0];
        }
        e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1])
            - e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0])
            + e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0])
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = *self;
        out.dim = self.dim.max(other.dim);
        for i in 0..MAX_DIM {
            for j in 0..MAX_DIM {
                out.entries[i][j] += other.entries[i][j];
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = *self;
        out.dim = self.dim.max(other.dim);
        for i in 0..MAX_DIM {
            for j in 0..MAX_DIM {
                out.entries[i][j] -= other.entries[i][j];
            }
        }
        out
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = *self;
        for row in &mut out.entries {
            for e in row {
                *e *= c;
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|r| r.iter())
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|r| r.iter())
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise deviation from Hermiticity, `max |m_ij − m̄_ji|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..MAX_DIM {
            for j in 0..MAX_DIM {
                worst = worst.max((self.entries[i][j] - self.entries[j][i].conj()).norm());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.entries
            .iter()
            .flat_map(|r| r.iter())
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.entries[i][j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.entries[i][j]
    }
}

/// Eigendecomposition of a (generally non-normal) matrix, with the
/// biorthogonal dual basis needed to expand `U(t) = Σ e^{-iλ_i t}|λ_i⟩⟨λ^i|`.
///
/// `reciprocal_vectors[i]` stores the *ket* `|λ^i⟩` whose adjoint is the
/// reciprocal bra: `⟨λ^i|λ_j⟩ = reciprocal_vectors[i].dot(&right_vectors[j])
/// = δ_ij` whenever `is_degenerate` is false. When the spectrum is flagged
/// degenerate the vector fields are best-effort only and callers must fall
/// back to [`mat_exp`].
#[derive(Clone, Debug)]
pub struct EigSystem {
    pub eigenvalues: [C64; MAX_DIM],
    pub right_vectors: [CVector; MAX_DIM],
    pub reciprocal_vectors: [CVector; MAX_DIM],
    pub is_degenerate: bool,
    dim: usize,
}

impl EigSystem {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Expansion coefficients `c_i = ⟨λ^i|ψ⟩` of a state in the eigenbasis.
    pub fn spectral_coefficients(&self, psi: &CVector) -> [C64; MAX_DIM] {
        let mut c = [ZERO; MAX_DIM];
        for i in 0..self.dim {
            c[i] = self.reciprocal_vectors[i].dot(psi);
        }
        c
    }

    /// `Σ_i c_i e^{-iλ_i t} |λ_i⟩` — the hot path of waiting-time bisection,
    /// where the coefficients of a segment's entry state are computed once.
    pub fn evolve_from_coefficients(&self, coeffs: &[C64; MAX_DIM], t: f64) -> CVector {
        let mut out = CVector::zero(self.dim);
        for i in 0..self.dim {
            let phase = (self.eigenvalues[i] * C64::new(0.0, -t)).exp();
            out = out.add(&self.right_vectors[i].scale(coeffs[i] * phase));
        }
        out
    }

    /// `e^{-iMt} ψ` through the spectral form.
    pub fn evolve(&self, psi: &CVector, t: f64) -> CVector {
        self.evolve_from_coefficients(&self.spectral_coefficients(psi), t)
    }

    /// Full propagator `Σ_i e^{-iλ_i t} |λ_i⟩⟨λ^i|`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim);
        for i in 0..self.dim {
            let phase = (self.eigenvalues[i] * C64::new(0.0, -t)).exp();
            out = out.add(&self.right_vectors[i].outer(&self.reciprocal_vectors[i]).scale(phase));
        }
        out
    }

    /// `Σ_i λ_i |λ_i⟩⟨λ^i|` — should reproduce the decomposed matrix.
    pub fn reconstruct(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim);
        for i in 0..self.dim {
            out = out
                .add(&self.right_vectors[i].outer(&self.reciprocal_vectors[i]).scale(self.eigenvalues[i]));
        }
        out
    }
}

/// Eigendecomposition with reciprocal vectors.
///
/// Eigenvalues are sorted by descending imaginary part (least-damped mode
/// first under the `e^{-iλt}` convention), ties broken by descending real
/// part. `degeneracy_gap` is relative to the Frobenius norm of `m`; any
/// eigenvalue pair closer than `degeneracy_gap·max(‖m‖_F, ε)` sets
/// `is_degenerate`.
pub fn eig_with_reciprocal(m: &CMatrix, degeneracy_gap: f64) -> Result<EigSystem> {
    let dim = m.dim;
    let scale = m.frobenius_norm();
    if !scale.is_finite() {
        return Err(Error::NumericOverflow("eigendecomposition input"));
    }

    let mut eigenvalues = [ZERO; MAX_DIM];
    let vals = if dim == 2 {
        let (a, b) = quadratic_roots(m);
        vec![a, b]
    } else {
        cubic_eigenvalues(m, scale)?.to_vec()
    };
    let mut sorted = vals;
    sorted.sort_by(|a, b| {
        b.im
            .partial_cmp(&a.im)
            .unwrap()
            .then(b.re.partial_cmp(&a.re).unwrap())
    });
    for (slot, v) in eigenvalues.iter_mut().zip(sorted.iter()) {
        *slot = *v;
    }

    let gap_threshold = degeneracy_gap * scale.max(f64::MIN_POSITIVE);
    let mut is_degenerate = false;
    for i in 0..dim {
        for j in (i + 1)..dim {
            if (eigenvalues[i] - eigenvalues[j]).norm() <= gap_threshold {
                is_degenerate = true;
            }
        }
    }

    // Eigenvectors (best effort when degenerate). Right vectors from M,
    // left vectors as right vectors of M† at the conjugate eigenvalue.
    let adj = m.adjoint();
    let mut right_vectors = [CVector::zero(dim); MAX_DIM];
    let mut reciprocal_vectors = [CVector::zero(dim); MAX_DIM];
    for i in 0..dim {
        let v = eigenvector_for(m, eigenvalues[i], scale, i);
        let w = eigenvector_for(&adj, eigenvalues[i].conj(), scale, i);
        let d = w.dot(&v);
        if d.norm() <= 1e-12 {
            // Biorthogonal normalization impossible: defective or numerically
            // inseparable pair. Flag and keep unnormalized duals.
            is_degenerate = true;
            right_vectors[i] = v;
            reciprocal_vectors[i] = w;
        } else {
            right_vectors[i] = v;
            reciprocal_vectors[i] = w.scale(ONE / d.conj());
        }
    }

    Ok(EigSystem { eigenvalues, right_vectors, reciprocal_vectors, is_degenerate, dim })
}

/// `exp(-i·m·t)` by scaling-and-squaring with a Taylor kernel.
///
/// This is the propagator convention used throughout the crate (pass `H/ħ`
/// with `ħ = 1`); it agrees with the spectral form whenever the spectrum is
/// non-degenerate, and is the required fallback when it is not.
pub fn mat_exp(m: &CMatrix, t: f64) -> Result<CMatrix> {
    debug_assert!(t >= 0.0, "propagation time must be non-negative");
    let a = m.scale(C64::new(0.0, -t));
    let norm = a.frobenius_norm();
    if !norm.is_finite() {
        return Err(Error::NumericOverflow("matrix exponential input"));
    }
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let b = a.scale(C64::new(0.5f64.powi(squarings as i32), 0.0));

    let mut result = CMatrix::identity(m.dim);
    let mut term = CMatrix::identity(m.dim);
    for k in 1..=30u32 {
        term = term.mul(&b).scale(C64::new(1.0 / k as f64, 0.0));
        result = result.add(&term);
        if term.max_abs_entry() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.mul(&result);
    }
    if !result.is_finite() {
        return Err(Error::NumericOverflow("matrix exponential"));
    }
    Ok(result)
}

/// Roots of the characteristic polynomial of a 2×2 matrix, solved stably
/// (large root by the sign-matched quadratic formula, small root by Vieta).
fn quadratic_roots(m: &CMatrix) -> (C64, C64) {
    let tr = m.trace();
    let det = m.det();
    let mut s = (tr * tr - det.scale(4.0)).sqrt();
    if (tr.conj() * s).re < 0.0 {
        s = -s;
    }
    let big = (tr + s) * C64::new(0.5, 0.0);
    let small = if big.norm() > 0.0 { det / big } else { (tr - s) * C64::new(0.5, 0.0) };
    (big, small)
}

/// Eigenvalues of a 3×3 matrix: Cardano on the characteristic cubic with a
/// cancellation-avoiding branch choice, then Newton polishing on the monic
/// cubic. Errors with `NonConvergence` if a polished root still has a
/// residual far above rounding level.
fn cubic_eigenvalues(m: &CMatrix, scale: f64) -> Result<[C64; 3]> {
    // λ³ + aλ² + bλ + c
    let tr = m.trace();
    let tr2 = m.mul(m).trace();
    let a = -tr;
    let b = (tr * tr - tr2) * C64::new(0.5, 0.0);
    let c = -m.det();

    // Depressed cubic x³ + px + q with λ = x − a/3.
    let third = C64::new(1.0 / 3.0, 0.0);
    let shift = a * third;
    let p = b - a * a * third;
    let q = a * (a * a * C64::new(2.0 / 27.0, 0.0) - b * third) + c;

    let disc = (q * q * C64::new(0.25, 0.0) + p * p * p * C64::new(1.0 / 27.0, 0.0)).sqrt();
    let half_q = q * C64::new(-0.5, 0.0);
    // Pick the branch that avoids cancellation in u³ = −q/2 ± disc.
    let u3 = if (half_q + disc).norm() >= (half_q - disc).norm() {
        half_q + disc
    } else {
        half_q - disc
    };

    let roots: [C64; 3] = if u3.norm() == 0.0 && p.norm() == 0.0 {
        // Triple root of the depressed cubic.
        [-shift, -shift, -shift]
    } else {
        let u = u3.powf(1.0 / 3.0);
        let v = if u.norm() > 0.0 { -p * third / u } else { ZERO };
        let omega = C64::new(-0.5, 0.75f64.sqrt());
        let mut out = [ZERO; 3];
        let mut uw = u;
        let mut vw = v;
        for slot in &mut out {
            *slot = uw + vw - shift;
            uw *= omega;
            vw *= omega.conj();
        }
        out
    };

    // Newton polish each root on the monic cubic.
    let f = |x: C64| ((x + a) * x + b) * x + c;
    let df = |x: C64| (x * C64::new(3.0, 0.0) + a * C64::new(2.0, 0.0)) * x + b;
    let mut polished = [ZERO; 3];
    let cubic_scale = scale.max(1.0).powi(3);
    for (slot, &start) in polished.iter_mut().zip(roots.iter()) {
        let mut best = start;
        let mut best_res = f(start).norm();
        let mut x = start;
        for _ in 0..40 {
            let d = df(x);
            if d.norm() == 0.0 {
                break;
            }
            let step = f(x) / d;
            x -= step;
            let res = f(x).norm();
            if res < best_res {
                best_res = res;
                best = x;
            }
            if step.norm() <= 1e-16 * (1.0 + x.norm()) {
                break;
            }
        }
        if !(best_res <= 1e-8 * cubic_scale) {
            return Err(Error::NonConvergence { iterations: 40, residual: best_res });
        }
        *slot = best;
    }
    Ok(polished)
}

/// Unit right eigenvector of `m` for eigenvalue `lambda`: a null-space
/// candidate from row cross products, refined by clamped-pivot inverse
/// iteration, with the largest-magnitude component rotated to the positive
/// real axis for deterministic output.
fn eigenvector_for(m: &CMatrix, lambda: C64, scale: f64, fallback_index: usize) -> CVector {
    let dim = m.dim;
    let mut b = *m;
    for i in 0..dim {
        b[(i, i)] -= lambda;
    }

    let mut v = if dim == 2 {
        let r0 = (b[(0, 0)], b[(0, 1)]);
        let r1 = (b[(1, 0)], b[(1, 1)]);
        let n0 = r0.0.norm_sqr() + r0.1.norm_sqr();
        let n1 = r1.0.norm_sqr() + r1.1.norm_sqr();
        let r = if n0 >= n1 { r0 } else { r1 };
        if n0.max(n1) <= (1e-14 * scale).powi(2) {
            CVector::basis(2, fallback_index.min(1))
        } else {
            CVector::new2(r.1, -r.0)
        }
    } else {
        // Any nonzero cross product of two rows of B is orthogonal (without
        // conjugation) to both, i.e. a right null vector of B.
        let rows = [b.row(0), b.row(1), b.row(2)];
        let mut best = CVector::zero(3);
        let mut best_norm = 0.0;
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            let c = cross_no_conj(&rows[i], &rows[j]);
            let n = c.norm();
            if n > best_norm {
                best_norm = n;
                best = c;
            }
        }
        if best_norm <= 1e-14 * scale * scale {
            CVector::basis(3, fallback_index)
        } else {
            best
        }
    };

    if let Ok(unit) = v.normalized() {
        v = unit;
    }
    // Inverse iteration sharpens the candidate; with a clamped LU solve this
    // is safe even when B is numerically singular (which it should be).
    for _ in 0..2 {
        if let Some(y) = solve_clamped(&b, &v, scale) {
            if let Ok(unit) = y.normalized() {
                v = unit;
                continue;
            }
        }
        break;
    }

    // Deterministic phase: largest component real and positive.
    let mut imax = 0;
    for i in 1..dim {
        if v[i].norm() > v[imax].norm() {
            imax = i;
        }
    }
    if v[imax].norm() > 0.0 {
        v = v.scale(v[imax].conj() / C64::new(v[imax].norm(), 0.0));
    }
    v
}

/// Cross product without conjugation: orthogonal to both inputs under the
/// bilinear (not sesquilinear) pairing, which is what a null vector of a row
/// system needs.
fn cross_no_conj(a: &CVector, b: &CVector) -> CVector {
    CVector::new3(
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )
}

/// LU solve with partial pivoting; zero-ish pivots are clamped instead of
/// failing so the solve can be used as an inverse-iteration step on a
/// singular system. Returns `None` for non-finite results.
fn solve_clamped(m: &CMatrix, rhs: &CVector, scale: f64) -> Option<CVector> {
    let dim = m.dim;
    let clamp = 1e-14 * scale.max(1.0);
    let mut a = *m;
    let mut x = *rhs;

    for col in 0..dim {
        let mut piv = col;
        for r in (col + 1)..dim {
            if a[(r, col)].norm() > a[(piv, col)].norm() {
                piv = r;
            }
        }
        if piv != col {
            for j in 0..dim {
                let tmp = a[(col, j)];
                a[(col, j)] = a[(piv, j)];
                a[(piv, j)] = tmp;
            }
            let tmp = x[col];
            x[col] = x[piv];
            x[piv] = tmp;
        }
        let mut pivot = a[(col, col)];
        if pivot.norm() < clamp {
            pivot = if pivot.norm() == 0.0 {
                C64::new(clamp, 0.0)
            } else {
                pivot * C64::new(clamp / pivot.norm(), 0.0)
            };
            a[(col, col)] = pivot;
        }
        for r in (col + 1)..dim {
            let factor = a[(r, col)] / pivot;
            a[(r, col)] = ZERO;
            for j in (col + 1)..dim {
                let sub = factor * a[(col, j)];
                a[(r, j)] -= sub;
            }
            let sub = factor * x[col];
            x[r] -= sub;
        }
    }
    for col in (0..dim).rev() {
        let mut s = x[col];
        for j in (col + 1)..dim {
            s -= a[(col, j)] * x[j];
        }
        x[col] = s / a[(col, col)];
    }
    x.is_finite().then_some(x)
}
