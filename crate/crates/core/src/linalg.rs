//! Exact small-dimension complex linear algebra and the physical-state data
//! model everything else builds on.
//!
//! Dimensions are fixed at 2 (single photon) and 4 (photon pair) throughout.
//! The eigensolver is a cyclic Jacobi iteration, chosen for determinism over
//! speed at this matrix size.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

pub type C64 = Complex<f64>;

/// Hermiticity, trace and positivity checks on density matrices.
pub const TOL_PHYSICAL: f64 = 1e-10;
/// Reconstruction residuals (decompositions, factorizations).
pub const TOL_RECON: f64 = 1e-9;
/// Optimization cross-checks between closed forms and oracles.
pub const TOL_OPT: f64 = 1e-7;

/// Jacobi sweep convergence threshold on the off-diagonal norm.
const JACOBI_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 100;

pub const ZERO: C64 = Complex::new(0.0, 0.0);
pub const ONE: C64 = Complex::new(1.0, 0.0);
pub const I_UNIT: C64 = Complex::new(0.0, 1.0);

/// Dense row-major complex matrix.
///
/// Only 2x2, 4x4 and the occasional internal embedding sizes occur; the
/// struct stays shape-checked rather than type-parametric.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, ONE);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = CMat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// 2x2 matrix from row-major entries.
    pub fn mat2(e: [[C64; 2]; 2]) -> Self {
        CMat::from_fn(2, 2, |i, j| e[i][j])
    }

    /// 4x4 matrix from row-major entries.
    pub fn mat4(e: [[C64; 4]; 4]) -> Self {
        CMat::from_fn(4, 4, |i, j| e[i][j])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn all_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(
            self.cols, other.rows,
            "dimension mismatch in matrix product"
        );
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, s: C64) -> CMat {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= s;
        }
        out
    }

    pub fn scale_re(&self, s: f64) -> CMat {
        self.scale(Complex::new(s, 0.0))
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn conj(&self) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| self.get(i, j).conj())
    }

    pub fn trace(&self) -> C64 {
        assert_eq!(self.rows, self.cols);
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise modulus of self - other.
    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Kronecker product self (x) other.
    pub fn kron(&self, other: &CMat) -> CMat {
        let mut out = CMat::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out.set(i * other.rows + k, j * other.cols + l, a * other.get(k, l));
                    }
                }
            }
        }
        out
    }

    /// Max entrywise deviation from Hermitian symmetry.
    pub fn hermiticity_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Max entrywise deviation from symmetry (no conjugation).
    pub fn symmetry_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).norm());
            }
        }
        worst
    }

    /// Apply to a 4-component state vector.
    pub fn apply4(&self, v: &[C64; 4]) -> [C64; 4] {
        assert_eq!((self.rows, self.cols), (4, 4));
        let mut out = [ZERO; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i] += self.get(i, j) * v[j];
            }
        }
        out
    }
}

pub fn inner4(a: &[C64; 4], b: &[C64; 4]) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm4(a: &[C64; 4]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// |a><b| as a 4x4 matrix.
pub fn outer4(a: &[C64; 4], b: &[C64; 4]) -> CMat {
    CMat::from_fn(4, 4, |i, j| a[i] * b[j].conj())
}

// ---------------------------------------------------------------------------
// Eigendecomposition (cyclic Jacobi with complex rotations)
// ---------------------------------------------------------------------------

/// Eigensystem of a Hermitian matrix: values descending, vectors as columns.
#[derive(Debug, Clone)]
pub struct EigH {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl EigH {
    /// Column `k` as a vector.
    pub fn vector(&self, k: usize) -> Vec<C64> {
        (0..self.vectors.rows())
            .map(|i| self.vectors.get(i, k))
            .collect()
    }
}

fn offdiag_norm(m: &CMat) -> f64 {
    let n = m.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m.get(i, j).norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi on a Hermitian matrix of any (small) size. Used at 4x4 for
/// density matrices and internally at larger sizes for factorizations.
pub(crate) fn jacobi_hermitian(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.rows();
    let mut a = m.clone();
    let mut v = CMat::identity(n);
    let scale = a.frob_norm().max(1.0);
    let tol = JACOBI_TOL * scale;

    for _ in 0..JACOBI_MAX_SWEEPS {
        if offdiag_norm(&a) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let beta = a.get(p, q);
                let b = beta.norm();
                if b <= f64::MIN_POSITIVE {
                    continue;
                }
                let phase = beta / b;
                let alpha = a.get(p, p).re;
                let gamma = a.get(q, q).re;
                let theta = 0.5 * (2.0 * b).atan2(alpha - gamma);
                let (s, c) = theta.sin_cos();
                let sp = phase * s;

                // A <- J^dag A J with J[p][p]=c, J[p][q]=-s*phase,
                // J[q][p]=s*conj(phase), J[q][q]=c.
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, akp * c + akq * sp.conj());
                    a.set(k, q, akq * c - akp * sp);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, apk * c + aqk * sp);
                    a.set(q, k, aqk * c - apk * sp.conj());
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, vkp * c + vkq * sp.conj());
                    v.set(k, q, vkq * c - vkp * sp);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let values: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap());

    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        // Fix the phase so the first significant component is real positive.
        let mut col: Vec<C64> = (0..n).map(|i| v.get(i, src)).collect();
        if let Some(lead) = col.iter().find(|z| z.norm() > 1e-8) {
            let ph = lead / lead.norm();
            for z in col.iter_mut() {
                *z /= ph;
            }
        }
        for i in 0..n {
            vectors.set(i, dst, col[i]);
        }
    }
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    (sorted, vectors)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
///
/// Ties are broken by the deterministic Jacobi output order; eigenvector
/// phases are fixed so the first significant component is real positive.
pub fn eig_hermitian(m: &CMat) -> Result<EigH> {
    if !m.all_finite() {
        return Err(Error::NonFiniteEntry);
    }
    let dev = m.hermiticity_violation();
    if dev > TOL_PHYSICAL {
        return Err(Error::NotHermitian(dev));
    }
    // Work on the Hermitian average so roundoff in the input cannot leak
    // imaginary parts into the eigenvalues.
    let sym = m.add(&m.dagger()).scale_re(0.5);
    let (values, vectors) = jacobi_hermitian(&sym);
    Ok(EigH { values, vectors })
}

/// Eigenvalues at the numerical noise floor of a PSD spectrum must not reach
/// a square root: sqrt(1e-16) = 1e-8 would dominate every tolerance here.
fn psd_cutoff(values: &[f64]) -> f64 {
    1e-13 * values.first().copied().unwrap_or(0.0).max(0.0)
}

/// Principal square root of a Hermitian PSD matrix (eigenvalues at the noise
/// floor are clamped to zero).
pub fn matrix_sqrt_psd(m: &CMat) -> Result<CMat> {
    let eig = eig_hermitian(m)?;
    let n = m.rows();
    let cutoff = psd_cutoff(&eig.values);
    let mut out = CMat::zeros(n, n);
    for k in 0..n {
        if eig.values[k] <= cutoff {
            continue;
        }
        let lam = eig.values[k].sqrt();
        let col = eig.vector(k);
        for i in 0..n {
            for j in 0..n {
                let v = out.get(i, j) + col[i] * col[j].conj() * lam;
                out.set(i, j, v);
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Physical-state data model
// ---------------------------------------------------------------------------

/// Normalized two-photon polarization state, amplitudes ordered HH, HV, VH, VV.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: [C64; 4],
}

impl PureState {
    pub fn new(amps: [C64; 4]) -> Result<Self> {
        let norm = norm4(&amps);
        if !norm.is_finite() {
            return Err(Error::NonFiniteEntry);
        }
        let dev = (norm - 1.0).abs();
        if dev > TOL_PHYSICAL {
            return Err(Error::NotNormalized(dev));
        }
        Ok(PureState { amps })
    }

    pub fn from_unnormalized(amps: [C64; 4]) -> Result<Self> {
        let norm = norm4(&amps);
        if !norm.is_finite() || norm < 1e-300 {
            return Err(Error::NotNormalized(1.0));
        }
        let mut a = amps;
        for z in a.iter_mut() {
            *z /= norm;
        }
        Ok(PureState { amps: a })
    }

    /// cos(theta)|HH> + sin(theta)|VV>.
    pub fn schmidt(theta: f64) -> Self {
        let mut amps = [ZERO; 4];
        amps[0] = Complex::new(theta.cos(), 0.0);
        amps[3] = Complex::new(theta.sin(), 0.0);
        PureState { amps }
    }

    pub fn basis(index: usize) -> Self {
        let mut amps = [ZERO; 4];
        amps[index] = ONE;
        PureState { amps }
    }

    pub fn amps(&self) -> &[C64; 4] {
        &self.amps
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        inner4(&self.amps, &other.amps)
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix {
            mat: outer4(&self.amps, &self.amps),
        }
    }

    /// Product state a (x) b from single-photon amplitudes.
    pub fn product(a: [C64; 2], b: [C64; 2]) -> Result<Self> {
        PureState::new([a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]])
    }
}

/// 4x4 Hermitian, positive semidefinite, unit-trace operator on the
/// two-photon polarization space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMat,
}

/// Violation magnitudes reported by [`is_physical`].
#[derive(Debug, Clone, Serialize)]
pub struct PhysicalityReport {
    pub hermiticity_violation: f64,
    pub trace_violation: f64,
    pub min_eigenvalue: f64,
    pub ok: bool,
}

/// Check Hermiticity, unit trace and positivity of a 4x4 matrix within `tol`.
///
/// Total function: never fails, reports each violation magnitude.
pub fn is_physical(m: &CMat, tol: f64) -> PhysicalityReport {
    let hermiticity_violation = m.hermiticity_violation();
    let trace_violation = (m.trace().re - 1.0).abs().max(m.trace().im.abs());
    // Eigenvalues of the Hermitian part; for grossly non-Hermitian input the
    // report is still meaningful because the violation is flagged separately.
    let sym = m.add(&m.dagger()).scale_re(0.5);
    let (values, _) = jacobi_hermitian(&sym);
    let min_eigenvalue = values.last().copied().unwrap_or(0.0);
    let ok = m.all_finite()
        && hermiticity_violation <= tol
        && trace_violation <= tol
        && min_eigenvalue >= -tol;
    PhysicalityReport {
        hermiticity_violation,
        trace_violation,
        min_eigenvalue,
        ok,
    }
}

impl DensityMatrix {
    pub fn new(mat: CMat) -> Result<Self> {
        assert_eq!((mat.rows(), mat.cols()), (4, 4), "density matrices are 4x4");
        if !mat.all_finite() {
            return Err(Error::NonFiniteEntry);
        }
        let report = is_physical(&mat, TOL_PHYSICAL);
        if report.hermiticity_violation > TOL_PHYSICAL {
            return Err(Error::NotHermitian(report.hermiticity_violation));
        }
        if report.trace_violation > TOL_PHYSICAL {
            return Err(Error::NotUnitTrace(report.trace_violation));
        }
        if report.min_eigenvalue < -TOL_PHYSICAL {
            return Err(Error::NotPositive(report.min_eigenvalue));
        }
        Ok(DensityMatrix { mat })
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix {
            mat: CMat::identity(4).scale_re(0.25),
        }
    }

    /// p |Phi+><Phi+| + (1-p) I/4.
    pub fn werner(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange {
                name: "p",
                value: p,
                expected: "[0, 1]",
            });
        }
        let bell = PureState::schmidt(std::f64::consts::FRAC_PI_4).density();
        let mat = bell
            .mat
            .scale_re(p)
            .add(&CMat::identity(4).scale_re((1.0 - p) * 0.25));
        DensityMatrix::new(mat)
    }

    pub fn mixture(branches: &[(f64, PureState)]) -> Result<Self> {
        let mut mat = CMat::zeros(4, 4);
        for (w, psi) in branches {
            mat = mat.add(&outer4(psi.amps(), psi.amps()).scale_re(*w));
        }
        DensityMatrix::new(mat)
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.mat.get(i, j)
    }

    /// Tr rho^2.
    pub fn purity(&self) -> f64 {
        self.mat.mul(&self.mat).trace().re
    }

    pub fn eigensystem(&self) -> EigH {
        eig_hermitian(&self.mat).expect("density matrices are Hermitian by construction")
    }
}

/// 2x2 unitary acting on one photon's polarization.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalUnitary {
    mat: CMat,
}

impl LocalUnitary {
    pub fn new(mat: CMat) -> Result<Self> {
        assert_eq!((mat.rows(), mat.cols()), (2, 2), "local unitaries are 2x2");
        if !mat.all_finite() {
            return Err(Error::NonFiniteEntry);
        }
        let dev = mat.dagger().mul(&mat).max_abs_diff(&CMat::identity(2));
        if dev > TOL_PHYSICAL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(LocalUnitary { mat })
    }

    pub fn identity() -> Self {
        LocalUnitary {
            mat: CMat::identity(2),
        }
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    /// self (x) other on the photon pair.
    pub fn kron(&self, other: &LocalUnitary) -> CMat {
        self.mat.kron(&other.mat)
    }
}

/// Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2, clamped to [0, 1].
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let sa = matrix_sqrt_psd(a.mat()).expect("density matrices are PSD by construction");
    let inner = sa.mul(b.mat()).mul(&sa);
    // Numerically Hermitian PSD; symmetrize before the eigensolve.
    let sym = inner.add(&inner.dagger()).scale_re(0.5);
    let (values, _) = jacobi_hermitian(&sym);
    let cutoff = psd_cutoff(&values);
    let root_sum: f64 = values
        .iter()
        .filter(|&&l| l > cutoff)
        .map(|l| l.sqrt())
        .sum();
    (root_sum * root_sum).clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// Seeded random generation (test corpus)
// ---------------------------------------------------------------------------

fn standard_normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller on open-interval uniforms.
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn random_c64(rng: &mut impl Rng) -> C64 {
    Complex::new(standard_normal(rng), standard_normal(rng))
}

/// Random density matrix of exactly the requested rank, deterministic per seed.
pub fn random_density(rank: usize, seed: u64) -> Result<DensityMatrix> {
    if !(1..=4).contains(&rank) {
        return Err(Error::InvalidRank(rank));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // rho = G G^dag / tr for a Gaussian 4 x rank factor; the rank is exact
    // with probability one and checked against the 1e-12 cutoff below.
    loop {
        let g = CMat::from_fn(4, rank, |_, _| random_c64(&mut rng));
        let gg = g.mul(&g.dagger());
        let tr = gg.trace().re;
        if tr < 1e-12 {
            continue;
        }
        let rho = gg.scale_re(1.0 / tr);
        let (values, _) = jacobi_hermitian(&rho);
        let observed = values.iter().filter(|&&l| l > 1e-12).count();
        if observed == rank {
            return DensityMatrix::new(rho);
        }
    }
}

/// Random Hermitian 4x4 with entries of order one, deterministic per seed.
pub fn random_hermitian(seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = CMat::from_fn(4, 4, |_, _| random_c64(&mut rng));
    g.add(&g.dagger()).scale_re(0.5)
}

/// Random 2x2 unitary (Haar-like via Gram-Schmidt), deterministic per seed.
pub fn random_local_unitary(seed: u64) -> LocalUnitary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let a = [random_c64(&mut rng), random_c64(&mut rng)];
        let b = [random_c64(&mut rng), random_c64(&mut rng)];
        let na = (a[0].norm_sqr() + a[1].norm_sqr()).sqrt();
        if na < 1e-6 {
            continue;
        }
        let u0 = [a[0] / na, a[1] / na];
        let proj = u0[0].conj() * b[0] + u0[1].conj() * b[1];
        let c = [b[0] - proj * u0[0], b[1] - proj * u0[1]];
        let nc = (c[0].norm_sqr() + c[1].norm_sqr()).sqrt();
        if nc < 1e-6 {
            continue;
        }
        let u1 = [c[0] / nc, c[1] / nc];
        let mat = CMat::mat2([[u0[0], u1[0]], [u0[1], u1[1]]]);
        return LocalUnitary::new(mat).expect("Gram-Schmidt output is unitary");
    }
}

/// Random normalized two-photon pure state, deterministic per seed.
pub fn random_pure(seed: u64) -> PureState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let amps = [
            random_c64(&mut rng),
            random_c64(&mut rng),
            random_c64(&mut rng),
            random_c64(&mut rng),
        ];
        if let Ok(psi) = PureState::from_unnormalized(amps) {
            return psi;
        }
    }
}

// ---------------------------------------------------------------------------
// JSON forms
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ReIm2d {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ReIm1d {
    re: Vec<f64>,
    im: Vec<f64>,
}

pub(crate) fn cmat_to_reim(m: &CMat) -> serde_json::Value {
    let re: Vec<Vec<f64>> = (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m.get(i, j).re).collect())
        .collect();
    let im: Vec<Vec<f64>> = (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m.get(i, j).im).collect())
        .collect();
    serde_json::json!({ "re": re, "im": im })
}

fn reim_to_cmat(raw: ReIm2d, n: usize) -> std::result::Result<CMat, String> {
    if raw.re.len() != n || raw.im.len() != n {
        return Err(format!("expected {n} rows in re and im"));
    }
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        if raw.re[i].len() != n || raw.im[i].len() != n {
            return Err(format!("expected {n} columns in row {i}"));
        }
        for j in 0..n {
            m.set(i, j, Complex::new(raw.re[i][j], raw.im[i][j]));
        }
    }
    Ok(m)
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        cmat_to_reim(&self.mat).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = ReIm2d::deserialize(deserializer)?;
        let mat = reim_to_cmat(raw, 4).map_err(D::Error::custom)?;
        DensityMatrix::new(mat).map_err(|e| D::Error::custom(e.to_string()))
    }
}

impl Serialize for PureState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let form = ReIm1d {
            re: self.amps.iter().map(|z| z.re).collect(),
            im: self.amps.iter().map(|z| z.im).collect(),
        };
        form.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PureState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = ReIm1d::deserialize(deserializer)?;
        if raw.re.len() != 4 || raw.im.len() != 4 {
            return Err(D::Error::custom("expected 4 amplitudes"));
        }
        let mut amps = [ZERO; 4];
        for i in 0..4 {
            amps[i] = Complex::new(raw.re[i], raw.im[i]);
        }
        PureState::new(amps).map_err(|e| D::Error::custom(e.to_string()))
    }
}

impl Serialize for LocalUnitary {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        cmat_to_reim(&self.mat).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LocalUnitary {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = ReIm2d::deserialize(deserializer)?;
        let mat = reim_to_cmat(raw, 2).map_err(D::Error::custom)?;
        LocalUnitary::new(mat).map_err(|e| D::Error::custom(e.to_string()))
    }
}
