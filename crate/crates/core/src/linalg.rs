//! Dense density matrices, POVMs and low-rank PSD factors.
//!
//! Information quantities are in nats. Fidelity is the root fidelity
//! `F(ρ,σ) = Tr|√ρ√σ|`, so orthogonal states have `F = 0` and equal
//! states have `F = 1`.
//!
//! [`PsdFactor`] stores a positive operator as `A·A†` with `A` of shape
//! `dim × rank`. Tensor products, mixtures, fidelities and entropies can
//! then be computed from small Gram matrices instead of full `dim × dim`
//! eigen-decompositions, which is what makes channel synthesis feasible.

use faer::{c64, Side};
use nalgebra as na;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = na::DMatrix<Complex64>;
pub type CVector = na::DVector<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Relative eigenvalue cut-off below which spectral weight is treated as zero.
pub(crate) const SPECTRAL_CUT: f64 = 1e-13;

/// Tolerances for validating and comparing numerical objects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericTolerances {
    /// Maximum entry of `|ρ - ρ†|`.
    pub herm: f64,
    /// Most negative eigenvalue accepted as PSD.
    pub psd: f64,
    /// Allowed deviation of a trace from its target.
    pub trace: f64,
    /// Tolerance for identities checked downstream.
    pub eq: f64,
}

impl Default for NumericTolerances {
    fn default() -> Self {
        Self {
            herm: 1e-9,
            psd: 1e-9,
            trace: 1e-9,
            eq: 1e-7,
        }
    }
}

/// A validated density operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, positivity and unit trace, then symmetrizes.
    pub fn new(m: CMatrix, tol: &NumericTolerances) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::validation(format!(
                "density matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::validation("density matrix has non-finite entries"));
        }
        let herm_err = (&m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_err > tol.herm {
            return Err(Error::validation(format!(
                "matrix is not Hermitian (deviation {herm_err:.3e})"
            )));
        }
        let h = hermitian_part(&m);
        let tr = h.trace().re;
        if (tr - 1.0).abs() > tol.trace {
            return Err(Error::validation(format!("trace is {tr:.12}, expected 1")));
        }
        let min = h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -tol.psd {
            return Err(Error::validation(format!(
                "matrix is not positive semidefinite (eigenvalue {min:.3e})"
            )));
        }
        Ok(Self { m: h })
    }

    /// Wraps a matrix known to be a density operator.
    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self { m }
    }

    /// `|ψ⟩⟨ψ|` for a unit vector.
    pub fn pure(v: &CVector, tol: &NumericTolerances) -> Result<Self> {
        let n = v.norm();
        if (n * n - 1.0).abs() > tol.trace {
            return Err(Error::validation(format!("state vector has squared norm {}", n * n)));
        }
        Ok(Self { m: v * v.adjoint() })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            m: CMatrix::identity(dim, dim).scale(1.0 / dim as f64),
        }
    }

    /// Diagonal state with the given probabilities.
    pub fn diagonal(p: &[f64], tol: &NumericTolerances) -> Result<Self> {
        let d = na::DVector::from_iterator(p.len(), p.iter().map(|&x| Complex64::new(x, 0.0)));
        Self::new(CMatrix::from_diagonal(&d), tol)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn kron(&self, other: &DensityMatrix) -> DensityMatrix {
        Self {
            m: self.m.kronecker(&other.m),
        }
    }

    /// Convex combination; weights must be non-negative and sum to one.
    pub fn mix(parts: &[(f64, &DensityMatrix)]) -> Result<DensityMatrix> {
        let d = parts.first().ok_or_else(|| Error::structural("empty mixture"))?.1.dim();
        let mut m = CMatrix::zeros(d, d);
        let mut total = 0.0;
        for (w, r) in parts {
            if r.dim() != d || *w < 0.0 {
                return Err(Error::structural("mixture of incompatible states"));
            }
            m += r.m.scale(*w);
            total += w;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!("mixture weights sum to {total}")));
        }
        Ok(Self { m })
    }

    /// Eigenvalues (ascending is not guaranteed) and eigenvectors.
    pub fn eigen(&self) -> (Vec<f64>, CMatrix) {
        let (vals, vecs) = hermitian_eigen(&self.m);
        (vals.iter().cloned().collect(), vecs)
    }

    pub fn is_diagonal(&self) -> bool {
        is_diagonal(&self.m)
    }
}

/// A positive operator-valued measure.
#[derive(Debug, Clone)]
pub struct Povm {
    pub effects: Vec<CMatrix>,
}

impl Povm {
    /// Checks that every effect is PSD and that the effects sum to the identity.
    pub fn validate(&self, tol: &NumericTolerances) -> Result<()> {
        let d = self
            .effects
            .first()
            .ok_or_else(|| Error::validation("POVM has no effects"))?
            .nrows();
        let mut sum = CMatrix::zeros(d, d);
        for (i, e) in self.effects.iter().enumerate() {
            if e.nrows() != d || e.ncols() != d {
                return Err(Error::validation("POVM effects have mismatched shapes"));
            }
            let min = hermitian_part(e).symmetric_eigenvalues().min();
            if min < -tol.psd {
                return Err(Error::validation(format!("effect {i} has eigenvalue {min:.3e}")));
            }
            sum += e;
        }
        let dev = (sum - CMatrix::identity(d, d)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if dev > tol.eq {
            return Err(Error::validation(format!("effects sum to identity only within {dev:.3e}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    /// Outcome probabilities `Tr(E_i ρ)`.
    pub fn probabilities(&self, rho: &DensityMatrix) -> Vec<f64> {
        self.effects.iter().map(|e| (e * rho.matrix()).trace().re).collect()
    }
}

/// `(M + M†)/2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub(crate) fn is_diagonal(m: &CMatrix) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == ZERO))
}

/// Eigen-decomposition of the Hermitian part of `m`.
///
/// nalgebra's complex solver occasionally returns a unitary basis that does
/// not diagonalize the input when the spectrum has near-degenerate clusters.
/// Its result is accepted only if `V Λ V†` reproduces the input; otherwise a
/// cyclic Jacobi sweep is used.
pub fn hermitian_eigen(m: &CMatrix) -> (na::DVector<f64>, CMatrix) {
    let h = hermitian_part(m);
    let (vals, vecs) = if h.nrows() >= LARGE {
        faer_eigen(&h)
    } else {
        let e = na::SymmetricEigen::new(h.clone());
        (e.eigenvalues, e.eigenvectors)
    };
    let scale = h.norm().max(f64::MIN_POSITIVE);
    if reconstruction_error(&h, &vals, &vecs) <= EIGEN_RESIDUAL * scale {
        return (vals, vecs);
    }
    jacobi_eigen(h)
}

/// Size from which dense kernels go through faer instead of nalgebra.
const LARGE: usize = 24;

fn to_faer(m: &CMatrix) -> faer::Mat<c64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
        let z = m[(i, j)];
        c64::new(z.re, z.im)
    })
}

fn from_faer(m: faer::MatRef<'_, c64>) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        let z = m[(i, j)];
        Complex64::new(z.re, z.im)
    })
}

fn faer_eigen(h: &CMatrix) -> (na::DVector<f64>, CMatrix) {
    match to_faer(h).self_adjoint_eigen(Side::Lower) {
        Ok(e) => {
            let s = e.S().column_vector();
            (na::DVector::from_fn(h.nrows(), |i, _| s[i].re), from_faer(e.U()))
        }
        Err(_) => jacobi_eigen(h.clone()),
    }
}

/// Eigenvalues of the Hermitian part of `m`.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = hermitian_part(m);
    if h.nrows() >= LARGE {
        if let Ok(v) = to_faer(&h).self_adjoint_eigenvalues(Side::Lower) {
            return v;
        }
        return hermitian_eigen(&h).0.iter().cloned().collect();
    }
    h.symmetric_eigenvalues().iter().cloned().collect()
}

/// `A A†` when `outer`, else `A† A`.
fn gram(a: &CMatrix, outer: bool) -> CMatrix {
    if a.nrows().max(a.ncols()) < LARGE {
        return if outer { a * a.adjoint() } else { a.adjoint() * a };
    }
    let f = to_faer(a);
    let g = if outer { &f * f.adjoint() } else { f.adjoint() * &f };
    from_faer(g.as_ref())
}

/// Relative reconstruction residual tolerated from the fast eigen solver.
const EIGEN_RESIDUAL: f64 = 1e-10;

fn reconstruction_error(h: &CMatrix, vals: &na::DVector<f64>, vecs: &CMatrix) -> f64 {
    let mut r = vecs.clone();
    for (j, &l) in vals.iter().enumerate() {
        r.column_mut(j).scale_mut(l);
    }
    (r * vecs.adjoint() - h).norm()
}

/// Cyclic Jacobi diagonalization of a Hermitian matrix.
fn jacobi_eigen(mut h: CMatrix) -> (na::DVector<f64>, CMatrix) {
    let n = h.nrows();
    let mut v = CMatrix::identity(n, n);
    let total = h.norm();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| h[(i, j)].norm_sqr()).sum();
        if off.sqrt() <= f64::EPSILON * 1e-2 * total {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = h[(p, q)];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                // Phase so the (p, q) entry becomes real, then a real rotation.
                let phase = apq / r;
                let zeta = (h[(q, q)].re - h[(p, p)].re) / (2.0 * r);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let gpp = Complex64::new(c, 0.0);
                let gpq = Complex64::new(s, 0.0);
                let gqp = -phase.conj() * s;
                let gqq = phase.conj() * c;
                for k in 0..n {
                    let (hp, hq) = (h[(k, p)], h[(k, q)]);
                    h[(k, p)] = hp * gpp + hq * gqp;
                    h[(k, q)] = hp * gpq + hq * gqq;
                    let (vp, vq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = vp * gpp + vq * gqp;
                    v[(k, q)] = vp * gpq + vq * gqq;
                }
                for k in 0..n {
                    let (hp, hq) = (h[(p, k)], h[(q, k)]);
                    h[(p, k)] = gpp.conj() * hp + gqp.conj() * hq;
                    h[(q, k)] = gpq.conj() * hp + gqq.conj() * hq;
                }
                h[(p, q)] = ZERO;
                h[(q, p)] = ZERO;
            }
        }
    }
    (na::DVector::from_fn(n, |i, _| h[(i, i)].re), v)
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let d = na::DVector::from_iterator(vals.len(), vals.iter().map(|&x| Complex64::new(f(x), 0.0)));
    &vecs * CMatrix::from_diagonal(&d) * vecs.adjoint()
}

/// Principal square root of a PSD matrix (negative eigenvalues clipped).
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    hermitian_function(m, |x| x.max(0.0).sqrt())
}

/// Trace norm `Tr|M|` via singular values.
pub fn trace_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows().min(m.ncols()) >= LARGE {
        if let Ok(s) = to_faer(m).singular_values() {
            return s.iter().sum();
        }
    }
    m.singular_values().sum()
}

/// Root fidelity `Tr √(√ρ σ √ρ)` by the textbook formula.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho, sigma)?;
    Ok(psd_fidelity(rho.matrix(), sigma.matrix()))
}

/// Fidelity of two (not necessarily normalized) PSD matrices.
pub fn psd_fidelity(a: &CMatrix, b: &CMatrix) -> f64 {
    let s = psd_sqrt(a);
    let inner = hermitian_part(&(&s * b * &s));
    inner.symmetric_eigenvalues().iter().map(|&x| x.max(0.0).sqrt()).sum()
}

/// `½‖ρ - σ‖₁`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho, sigma)?;
    let diff = hermitian_part(&(rho.matrix() - sigma.matrix()));
    Ok(0.5 * diff.symmetric_eigenvalues().iter().map(|x| x.abs()).sum::<f64>())
}

/// Von Neumann entropy in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    rho.matrix()
        .symmetric_eigenvalues()
        .iter()
        .map(|&x| eta(x))
        .sum()
}

/// Fidelity angle `arccos F(ρ,σ)`.
pub fn angle(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    Ok(fidelity(rho, sigma)?.clamp(0.0, 1.0).acos())
}

/// `-x ln x`, with non-positive arguments mapped to zero.
#[inline]
pub fn eta(x: f64) -> f64 {
    if x > 0.0 {
        -x * x.ln()
    } else {
        0.0
    }
}

fn same_dim(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::structural(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Square-root measurement for an ensemble `{p_i, ρ_i}`.
///
/// Effects are `S^{-1/2} p_i ρ_i S^{-1/2}` on the support of
/// `S = Σ p_i ρ_i`; the complement of the support is shared equally so
/// the effects sum to the identity.
pub fn pretty_good_measurement(states: &[DensityMatrix], priors: &[f64]) -> Result<Povm> {
    if states.is_empty() || states.len() != priors.len() {
        return Err(Error::structural("PGM needs one prior per state"));
    }
    let d = states[0].dim();
    let mut s = CMatrix::zeros(d, d);
    for (r, &p) in states.iter().zip(priors) {
        if r.dim() != d {
            return Err(Error::structural("PGM states have different dimensions"));
        }
        s += r.matrix().scale(p);
    }
    let (vals, vecs) = hermitian_eigen(&s);
    let max = vals.iter().cloned().fold(0.0, f64::max);
    let cut = max * SPECTRAL_CUT.sqrt();
    let inv_sqrt = na::DVector::from_iterator(
        d,
        vals.iter().map(|&x| Complex64::new(if x > cut { 1.0 / x.sqrt() } else { 0.0 }, 0.0)),
    );
    let off = na::DVector::from_iterator(
        d,
        vals.iter().map(|&x| if x > cut { ZERO } else { ONE }),
    );
    let s_inv = &vecs * CMatrix::from_diagonal(&inv_sqrt) * vecs.adjoint();
    let complement = &vecs * CMatrix::from_diagonal(&off) * vecs.adjoint();
    let m = states.len() as f64;
    let effects = states
        .iter()
        .zip(priors)
        .map(|(r, &p)| hermitian_part(&(&s_inv * r.matrix().scale(p) * &s_inv)) + complement.scale(1.0 / m))
        .collect();
    Ok(Povm { effects })
}

/// Applies a sequence of measurements, keeping the given outcomes.
///
/// Returns the probability of the outcome string and the normalized
/// post-measurement state `√E ρ √E / Tr(E ρ)` after the last step.
pub fn sequential_measure(
    rho: &DensityMatrix,
    povms: &[Povm],
    outcomes: &[usize],
) -> Result<(f64, DensityMatrix)> {
    if povms.len() != outcomes.len() {
        return Err(Error::structural("one outcome per POVM is required"));
    }
    let mut sigma = rho.matrix().clone();
    let mut prob = 1.0;
    for (povm, &o) in povms.iter().zip(outcomes) {
        let e = povm
            .effects
            .get(o)
            .ok_or_else(|| Error::structural(format!("outcome {o} out of range")))?;
        let r = psd_sqrt(e);
        let next = &r * &sigma * &r;
        let p = next.trace().re;
        if p <= 1e-300 {
            return Ok((0.0, DensityMatrix::from_matrix_unchecked(next)));
        }
        prob *= p;
        sigma = hermitian_part(&next.unscale(p));
    }
    Ok((prob, DensityMatrix::from_matrix_unchecked(sigma)))
}

/// Both sides of `Tr√(A+B) ≤ Tr√A + Tr√B` for PSD `A`, `B`.
pub fn trace_sqrt_subadditivity(a: &CMatrix, b: &CMatrix) -> (f64, f64) {
    let tr_sqrt = |m: &CMatrix| -> f64 {
        hermitian_part(m)
            .symmetric_eigenvalues()
            .iter()
            .map(|&x| x.max(0.0).sqrt())
            .sum()
    };
    (tr_sqrt(&(a + b)), tr_sqrt(a) + tr_sqrt(b))
}

/// Haar-like random unit vector.
pub fn random_pure_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CVector {
    let v = CVector::from_fn(dim, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let n = v.norm();
    v.unscale(n)
}

/// Random density matrix `G G† / Tr` with `G` Gaussian of shape `dim × rank`.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let g = CMatrix::from_fn(dim, rank.max(1), |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let m = &g * g.adjoint();
    let t = m.trace().re;
    DensityMatrix::from_matrix_unchecked(hermitian_part(&m.unscale(t)))
}

/// Positive operator stored as `A·A†`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdFactor {
    a: CMatrix,
}

impl PsdFactor {
    pub fn from_factor(a: CMatrix) -> Self {
        Self { a }
    }

    /// The zero operator on a space of dimension `dim`.
    pub fn zero(dim: usize) -> Self {
        Self {
            a: CMatrix::zeros(dim, 0),
        }
    }

    pub fn pure(v: &CVector) -> Self {
        Self {
            a: CMatrix::from_column_slice(v.len(), 1, v.as_slice()),
        }
    }

    /// Factor of a PSD matrix. Diagonal input yields basis-vector columns.
    pub fn from_psd(m: &CMatrix) -> Self {
        let d = m.nrows();
        if is_diagonal(m) {
            let cols: Vec<usize> = (0..d).filter(|&i| m[(i, i)].re > 0.0).collect();
            let mut a = CMatrix::zeros(d, cols.len());
            for (j, &i) in cols.iter().enumerate() {
                a[(i, j)] = Complex64::new(m[(i, i)].re.sqrt(), 0.0);
            }
            return Self { a };
        }
        let (vals, vecs) = hermitian_eigen(m);
        let max = vals.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..d).filter(|&i| vals[i] > max * SPECTRAL_CUT).collect();
        let mut a = CMatrix::zeros(d, keep.len());
        for (j, &i) in keep.iter().enumerate() {
            a.set_column(j, &vecs.column(i).scale(vals[i].sqrt()));
        }
        Self { a }
    }

    pub fn from_density(rho: &DensityMatrix) -> Self {
        Self::from_psd(rho.matrix())
    }

    pub fn factor(&self) -> &CMatrix {
        &self.a
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    pub fn trace(&self) -> f64 {
        self.a.norm_squared()
    }

    pub fn to_dense(&self) -> CMatrix {
        &self.a * self.a.adjoint()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            a: self.a.scale(s.sqrt()),
        }
    }

    pub fn kron(&self, other: &PsdFactor) -> Self {
        Self {
            a: self.a.kronecker(&other.a),
        }
    }

    /// `Σ w_i ρ_i` by column concatenation, compressed when rank exceeds dim.
    pub fn weighted_sum(parts: &[(f64, &PsdFactor)], dim: usize) -> Self {
        let mut out = Self::stacked(parts, dim);
        out.compress();
        out
    }

    /// Same operator as [`PsdFactor::weighted_sum`] without compressing the
    /// factor. Cheaper when only the spectrum is needed.
    pub fn stacked(parts: &[(f64, &PsdFactor)], dim: usize) -> Self {
        let cols: usize = parts.iter().filter(|(w, _)| *w > 0.0).map(|(_, f)| f.rank()).sum();
        let mut a = CMatrix::zeros(dim, cols);
        let mut c = 0;
        for (w, f) in parts {
            if *w > 0.0 {
                let r = f.rank();
                a.columns_mut(c, r).copy_from(&f.a.scale(w.sqrt()));
                c += r;
            }
        }
        Self { a }
    }

    /// Reduces the column count to at most the dimension when it exceeds it.
    ///
    /// The new factor is `V √Λ` from the eigen-decomposition of `A A†`, with
    /// eigenvalues below the spectral cut dropped. [`hermitian_eigen`] checks
    /// the reconstruction residual, so `B B†` matches `A A†` to that tolerance.
    pub fn compress(&mut self) {
        if self.rank() <= self.dim() {
            return;
        }
        if self.is_classical() {
            let d = self.diagonal();
            *self = Self::from_psd(&CMatrix::from_diagonal(&CVector::from_iterator(
                d.len(),
                d.into_iter().map(|x| Complex64::new(x, 0.0)),
            )));
            return;
        }
        let (vals, vecs) = hermitian_eigen(&gram(&self.a, true));
        let max = vals.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..vals.len()).filter(|&j| vals[j] > max * SPECTRAL_CUT).collect();
        let mut a = CMatrix::zeros(self.dim(), keep.len());
        for (j, &k) in keep.iter().enumerate() {
            a.set_column(j, &vecs.column(k).scale(vals[k].sqrt()));
        }
        self.a = a;
    }

    /// Eigenvalues of the operator (nonzero part, via the smaller Gram matrix).
    pub fn spectrum(&self) -> Vec<f64> {
        if self.rank() == 0 {
            return Vec::new();
        }
        let g = gram(&self.a, self.rank() > self.dim());
        if g.nrows() == 1 {
            return vec![g[(0, 0)].re];
        }
        hermitian_eigenvalues(&g)
    }

    /// `-Tr T ln T` of the (unnormalized) operator.
    pub fn eta_entropy(&self) -> f64 {
        self.spectrum().into_iter().map(eta).sum()
    }

    /// `Tr|√A √B|`, the fidelity of unnormalized operators.
    pub fn fidelity(&self, other: &PsdFactor) -> f64 {
        if self.rank() == 0 || other.rank() == 0 {
            return 0.0;
        }
        let m = self.a.adjoint() * &other.a;
        if m.nrows() == 1 && m.ncols() == 1 {
            return m[(0, 0)].norm();
        }
        trace_norm(&m)
    }

    /// Whether every column has at most one nonzero entry, so the operator is diagonal.
    pub fn is_classical(&self) -> bool {
        self.a
            .column_iter()
            .all(|c| c.iter().filter(|z| **z != ZERO).count() <= 1)
    }

    /// Diagonal of the operator.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.a.row(i).iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }
}
