//! Concurrence, entanglement of formation, and the equal-entanglement
//! decomposition of a two-qubit mixed state.
//!
//! The decomposition splits rho into at most four pure branches that all
//! carry the same concurrence as rho itself, so each branch reduces to the
//! same Schmidt angle under local unitaries. Construction: subnormalized
//! eigenvectors, the symmetric spin-flip overlap matrix, its Takagi
//! factorization, and a pairwise-rotation loop that equalizes every branch's
//! preconcurrence-to-norm ratio.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::linalg::{
    eig_hermitian, inner4, jacobi_hermitian, matrix_sqrt_psd, outer4, CMat, DensityMatrix,
    PureState, C64, ONE, ZERO,
};
use crate::{Error, Result};

/// Eigenvalues of rho below this are treated as absent when counting rank.
const RANK_CUTOFF: f64 = 1e-12;
/// Ratio convergence target of the equalization loop.
const EQUALIZE_TOL: f64 = 1e-10;
const EQUALIZE_MAX_ITERS: usize = 500;

/// sigma_y (x) sigma_y in the HH, HV, VH, VV basis; real and symmetric.
fn spin_flip_operator() -> CMat {
    let mut s = CMat::zeros(4, 4);
    s.set(0, 3, -ONE);
    s.set(1, 2, ONE);
    s.set(2, 1, ONE);
    s.set(3, 0, -ONE);
    s
}

/// Spin-flipped vector: (sigma_y (x) sigma_y) conj(v).
fn tilde_vec(v: &[C64; 4]) -> [C64; 4] {
    [-v[3].conj(), v[2].conj(), v[1].conj(), -v[0].conj()]
}

/// The symmetric spin-flip form <x|tilde(y)>; anti-bilinear in both slots.
fn tilde_form(x: &[C64; 4], y: &[C64; 4]) -> C64 {
    inner4(x, &tilde_vec(y))
}

/// Spin-flipped density matrix (sigma_y (x) sigma_y) conj(rho) (sigma_y (x) sigma_y).
pub fn spin_flip(rho: &DensityMatrix) -> DensityMatrix {
    let s = spin_flip_operator();
    let flipped = s.mul(&rho.mat().conj()).mul(&s);
    DensityMatrix::new(flipped).expect("spin flip preserves physicality")
}

/// Concurrence of a pure state: |<psi|tilde(psi)>|.
pub fn concurrence_pure(psi: &PureState) -> f64 {
    tilde_form(psi.amps(), psi.amps()).norm()
}

/// Concurrence max(0, l1 - l2 - l3 - l4) from the descending square roots of
/// the eigenvalues of rho * spin_flip(rho).
///
/// The product is not Hermitian, but its spectrum equals that of the
/// Hermitian sqrt(rho) * spin_flip(rho) * sqrt(rho), which is what gets
/// diagonalized here.
pub fn concurrence(rho: &DensityMatrix) -> f64 {
    let sqrt_rho = matrix_sqrt_psd(rho.mat()).expect("density matrices are PSD");
    let flipped = spin_flip(rho);
    let inner = sqrt_rho.mul(flipped.mat()).mul(&sqrt_rho);
    let sym = inner.add(&inner.dagger()).scale_re(0.5);
    let (values, _) = jacobi_hermitian(&sym);
    // Keep noise-floor eigenvalues away from the square root; sqrt(1e-17)
    // would contaminate the lambda differences at the 1e-9 level.
    let cutoff = 1e-13 * values[0].max(0.0);
    let lambdas: Vec<f64> = values
        .iter()
        .map(|&l| if l > cutoff { l.sqrt() } else { 0.0 })
        .collect();
    (lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0)
}

/// Binary entropy of (1 + sqrt(1 - c^2))/2, the entanglement of formation of
/// any two-qubit state with concurrence c.
pub fn eof_from_concurrence(c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::OutOfRange {
            name: "concurrence",
            value: c,
            expected: "[0, 1]",
        });
    }
    let x = 0.5 * (1.0 + (1.0 - c * c).max(0.0).sqrt());
    Ok(binary_entropy(x))
}

fn binary_entropy(x: f64) -> f64 {
    let mut h = 0.0;
    for p in [x, 1.0 - x] {
        if p > 0.0 {
            h -= p * p.log2();
        }
    }
    h
}

// ---------------------------------------------------------------------------
// Takagi factorization
// ---------------------------------------------------------------------------

/// Takagi factorization of a complex symmetric matrix: a unitary `u` with
/// u tau u^T = diag(lambda), lambda real non-negative descending.
///
/// Implemented through the real symmetric doubling [[P, Q], [Q, -P]] of
/// tau = P + iQ, whose +sigma eigenvectors give the Takagi vectors directly;
/// the kernel needs a complex Gram-Schmidt pass because its real dimension
/// is twice the complex one.
pub fn takagi(tau: &CMat) -> Result<(CMat, Vec<f64>)> {
    let n = tau.rows();
    assert_eq!(n, tau.cols(), "takagi expects a square matrix");
    if !tau.all_finite() {
        return Err(Error::NonFiniteEntry);
    }
    let dev = tau.symmetry_violation();
    if dev > 1e-10 {
        return Err(Error::NotSymmetric(dev));
    }

    let mut doubled = CMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let p = Complex::new(tau.get(i, j).re, 0.0);
            let q = Complex::new(tau.get(i, j).im, 0.0);
            doubled.set(i, j, p);
            doubled.set(i, j + n, q);
            doubled.set(i + n, j, q);
            doubled.set(i + n, j + n, -p);
        }
    }
    let (evals, evecs) = jacobi_hermitian(&doubled);

    let scale = evals.first().map(|v| v.abs()).unwrap_or(0.0).max(1.0);
    let zero_tol = 1e-10 * scale;

    // Real eigenvector (u, v) of the doubling maps to the complex vector
    // u + iv with tau conj(x) = sigma x.
    let to_complex = |col: usize| -> Vec<C64> {
        (0..n)
            .map(|i| Complex::new(evecs.get(i, col).re, evecs.get(i + n, col).re))
            .collect()
    };

    let mut vectors: Vec<(f64, Vec<C64>)> = Vec::with_capacity(n);
    for k in 0..2 * n {
        if evals[k] > zero_tol {
            vectors.push((evals[k], to_complex(k)));
        }
    }
    if vectors.len() > n {
        // Cannot happen for a genuinely symmetric input; guard anyway.
        vectors.truncate(n);
    }

    // Fill the remaining slots from the kernel block, keeping only vectors
    // that open a new complex direction.
    let mut kernel: Vec<Vec<C64>> = Vec::new();
    for k in 0..2 * n {
        if kernel.len() + vectors.len() >= n {
            break;
        }
        if evals[k].abs() > zero_tol {
            continue;
        }
        let mut cand = to_complex(k);
        for (_, prev) in vectors.iter() {
            project_out(&mut cand, prev);
        }
        for prev in kernel.iter() {
            project_out(&mut cand, prev);
        }
        let norm = vec_norm(&cand);
        if norm > 1e-6 {
            for z in cand.iter_mut() {
                *z /= norm;
            }
            kernel.push(cand);
        }
    }
    for v in kernel {
        vectors.push((0.0, v));
    }
    assert_eq!(vectors.len(), n, "takagi basis extraction incomplete");

    // Deterministic sign: leading significant component with phase in
    // (-pi/2, pi/2]; only a global sign is free for each vector.
    for (_, v) in vectors.iter_mut() {
        if let Some(lead) = v.iter().find(|z| z.norm() > 1e-8) {
            let flip = lead.re < -1e-14 || (lead.re.abs() <= 1e-14 && lead.im < 0.0);
            if flip {
                for z in v.iter_mut() {
                    *z = -*z;
                }
            }
        }
    }

    let lambdas: Vec<f64> = vectors.iter().map(|(s, _)| s.max(0.0)).collect();
    let u = CMat::from_fn(n, n, |i, j| vectors[i].1[j].conj());
    Ok((u, lambdas))
}

fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn project_out(v: &mut [C64], onto: &[C64]) {
    let overlap: C64 = onto.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
    let denom: f64 = onto.iter().map(|z| z.norm_sqr()).sum();
    if denom > 0.0 {
        let coeff = overlap / denom;
        for (z, o) in v.iter_mut().zip(onto.iter()) {
            *z -= coeff * o;
        }
    }
}

// ---------------------------------------------------------------------------
// Equal-entanglement decomposition
// ---------------------------------------------------------------------------

/// One pure branch of a decomposition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub p: f64,
    pub state: PureState,
}

/// Mixture of 1..4 pure states, all with the concurrence of the source state,
/// weights sorted descending.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Decomposition {
    pub branches: Vec<Branch>,
}

impl Decomposition {
    /// Sum of p |psi><psi| over the branches.
    pub fn reconstruct(&self) -> CMat {
        let mut m = CMat::zeros(4, 4);
        for b in &self.branches {
            m = m.add(&outer4(b.state.amps(), b.state.amps()).scale_re(b.p));
        }
        m
    }

    pub fn weights(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.p).collect()
    }
}

/// Decompose rho into pure branches of equal concurrence.
///
/// Entangled and pure inputs produce exactly rank(rho) branches. Separable
/// inputs of rank 3 are the one exception: they come out as four branches,
/// because a three-branch zero-concurrence decomposition does not exist for
/// generic rank-3 states (the Hadamard recombination needs an even size).
pub fn wootters_decompose(rho: &DensityMatrix) -> Result<Decomposition> {
    let eig = eig_hermitian(rho.mat())?;
    let rank = eig
        .values
        .iter()
        .filter(|&&l| l > RANK_CUTOFF)
        .count()
        .max(1);

    // Subnormalized eigenvectors |v_i> = sqrt(l_i) |e_i>.
    let mut subs: Vec<[C64; 4]> = Vec::with_capacity(rank);
    for k in 0..rank {
        let col = eig.vector(k);
        let w = eig.values[k].max(0.0).sqrt();
        subs.push([col[0] * w, col[1] * w, col[2] * w, col[3] * w]);
    }

    if rank == 1 {
        let state = PureState::from_unnormalized(subs[0])?;
        return Ok(Decomposition {
            branches: vec![Branch {
                p: 1.0,
                state: fix_branch_phase(state),
            }],
        });
    }

    // Symmetric overlap matrix tau_ij = <v_i|tilde(v_j)> and its Takagi
    // factorization; the recombined vectors |x_i> = sum_j conj(u_ij) |v_j>
    // diagonalize the spin-flip form.
    let tau = CMat::from_fn(rank, rank, |i, j| tilde_form(&subs[i], &subs[j]));
    let (u, _lambdas) = takagi(&tau)?;

    let mut branches: Vec<[C64; 4]> = Vec::with_capacity(rank);
    for i in 0..rank {
        let mut x = [ZERO; 4];
        for j in 0..rank {
            let coeff = u.get(i, j).conj();
            for a in 0..4 {
                x[a] += coeff * subs[j][a];
            }
        }
        branches.push(x);
    }

    // Phase rotation turning the diagonal spin-flip values into
    // (l1, -l2, -l3, -l4): multiply every branch after the first by i.
    for x in branches.iter_mut().skip(1) {
        for a in x.iter_mut() {
            *a *= Complex::new(0.0, 1.0);
        }
    }

    // The equalization target must be the branch set's own preconcurrence
    // sum (which the rotations conserve exactly), not a separately computed
    // concurrence; any offset between the two would block convergence.
    let target: f64 = branches.iter().map(|x| tilde_form(x, x).re).sum();
    if target > RANK_CUTOFF {
        equalize_positive(&mut branches, target)?;
    } else {
        equalize_zero(&mut branches)?;
    }

    let mut out: Vec<Branch> = branches
        .iter()
        .map(|x| {
            let p = x.iter().map(|z| z.norm_sqr()).sum::<f64>();
            let state = PureState::from_unnormalized(*x)?;
            Ok(Branch {
                p,
                state: fix_branch_phase(state),
            })
        })
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| b.p.partial_cmp(&a.p).unwrap());
    Ok(Decomposition { branches: out })
}

/// Leading significant amplitude made real positive.
fn fix_branch_phase(state: PureState) -> PureState {
    let amps = state.amps();
    if let Some(lead) = amps.iter().find(|z| z.norm() > 1e-8) {
        let phase = lead / lead.norm();
        let rotated = [
            amps[0] / phase,
            amps[1] / phase,
            amps[2] / phase,
            amps[3] / phase,
        ];
        PureState::new(rotated).expect("phase rotation preserves the norm")
    } else {
        state
    }
}

/// Real pairwise rotations driving every branch's preconcurrence-to-norm
/// ratio to the shared concurrence. The deviations d_k = T_kk - C N_kk sum
/// to zero, so rotating the extreme pair zeroes one branch per step.
fn equalize_positive(branches: &mut [[C64; 4]], c: f64) -> Result<()> {
    for iter in 0..EQUALIZE_MAX_ITERS {
        let n = branches.len();
        let mut worst = 0.0f64;
        let mut hi = 0;
        let mut lo = 0;
        let mut d = vec![0.0f64; n];
        for (k, z) in branches.iter().enumerate() {
            let t = tilde_form(z, z);
            let norm_sq: f64 = z.iter().map(|a| a.norm_sqr()).sum();
            // After the initial phasing the diagonal values stay real.
            d[k] = t.re - c * norm_sq;
            let ratio_dev = (t.re / norm_sq - c).abs();
            worst = worst.max(ratio_dev);
            if d[k] > d[hi] {
                hi = k;
            }
            if d[k] < d[lo] {
                lo = k;
            }
        }
        if worst <= EQUALIZE_TOL {
            return Ok(());
        }
        if hi == lo || d[hi] <= 0.0 || d[lo] >= 0.0 {
            return Err(Error::EqualizationDiverged {
                iterations: iter,
                residual: worst,
            });
        }

        // Zero branch `hi` by a real rotation in the (hi, lo) plane:
        // d_hi(phi) = cos^2 d_hi + 2 sin cos g + sin^2 d_lo with
        // g = T_hl - C Re(N_hl); pick the positive root of the tangent
        // quadratic so phi lies in (0, pi/2).
        let t_hl = tilde_form(&branches[hi], &branches[lo]).re;
        let n_hl: C64 = inner4(&branches[hi], &branches[lo]);
        let g = t_hl - c * n_hl.re;
        let disc = (g * g - d[hi] * d[lo]).sqrt();
        let t1 = (-g + disc) / d[lo];
        let t2 = (-g - disc) / d[lo];
        let t = if t1 > 0.0 { t1 } else { t2 };
        let cos_phi = 1.0 / (1.0 + t * t).sqrt();
        let sin_phi = t * cos_phi;

        for a in 0..4 {
            let zh = branches[hi][a];
            let zl = branches[lo][a];
            branches[hi][a] = zh * cos_phi + zl * sin_phi;
            branches[lo][a] = zl * cos_phi - zh * sin_phi;
        }
    }
    Err(Error::EqualizationDiverged {
        iterations: EQUALIZE_MAX_ITERS,
        residual: f64::NAN,
    })
}

/// Zero-concurrence case: drive every branch's spin-flip value to zero.
///
/// Pairwise rotations cannot do this (a 2x2 congruence can only subtract
/// spin-flip moduli), so the branches are recombined globally: per-branch
/// phases close the preconcurrence polygon (possible exactly when the
/// largest modulus is at most the sum of the rest, the concurrence-zero
/// condition), then a Hadamard matrix with constant squared entries turns
/// the closed polygon into an all-zero diagonal. No 3x3 Hadamard exists,
/// so a rank-3 input is padded with an empty slot and comes out as four
/// branches.
fn equalize_zero(branches: &mut Vec<[C64; 4]>) -> Result<()> {
    let values: Vec<C64> = branches.iter().map(|z| tilde_form(z, z)).collect();
    let scale: f64 = values.iter().map(|v| v.norm()).sum::<f64>().max(1e-30);

    // Sort indices by modulus descending for the polygon construction.
    let mut order: Vec<usize> = (0..branches.len()).collect();
    order.sort_by(|&i, &j| values[j].norm().partial_cmp(&values[i].norm()).unwrap());
    let lengths: Vec<f64> = order.iter().map(|&k| values[k].norm()).collect();

    let excess = lengths[0] - lengths[1..].iter().sum::<f64>();
    if excess > EQUALIZE_TOL * scale {
        return Err(Error::EqualizationDiverged {
            iterations: 0,
            residual: excess,
        });
    }

    let targets = closure_phases(&lengths);
    for (rank_pos, &k) in order.iter().enumerate() {
        if lengths[rank_pos] <= 1e-30 {
            continue;
        }
        // tilde_form(e^{ig} z, e^{ig} z) = e^{-2ig} tilde_form(z, z); rotate
        // each branch so its value sits at the assigned polygon angle.
        let gamma = 0.5 * (values[k].arg() - targets[rank_pos]);
        let phase = Complex::from_polar(1.0, gamma);
        for a in branches[k].iter_mut() {
            *a *= phase;
        }
    }

    if branches.len() == 3 {
        branches.push([ZERO; 4]);
    }
    let n = branches.len();
    let recombined: Vec<[C64; 4]> = match n {
        1 => branches.clone(),
        2 => {
            let h = 1.0 / 2.0f64.sqrt();
            vec![
                mix2(&branches[0], &branches[1], h, h),
                mix2(&branches[0], &branches[1], h, -h),
            ]
        }
        4 => {
            let signs: [[f64; 4]; 4] = [
                [1.0, 1.0, 1.0, 1.0],
                [1.0, 1.0, -1.0, -1.0],
                [1.0, -1.0, 1.0, -1.0],
                [1.0, -1.0, -1.0, 1.0],
            ];
            signs
                .iter()
                .map(|row| {
                    let mut out = [ZERO; 4];
                    for (j, z) in branches.iter().enumerate() {
                        for a in 0..4 {
                            out[a] += z[a] * 0.5 * row[j];
                        }
                    }
                    out
                })
                .collect()
        }
        _ => unreachable!("branch counts are 1, 2 or 4 here"),
    };
    *branches = recombined;

    let residual = branches
        .iter()
        .map(|z| tilde_form(z, z).norm())
        .fold(0.0, f64::max);
    if residual > EQUALIZE_TOL * scale.max(1.0) {
        return Err(Error::EqualizationDiverged {
            iterations: 1,
            residual,
        });
    }
    Ok(())
}

fn mix2(a: &[C64; 4], b: &[C64; 4], ca: f64, cb: f64) -> [C64; 4] {
    let mut out = [ZERO; 4];
    for i in 0..4 {
        out[i] = a[i] * ca + b[i] * cb;
    }
    out
}

/// Angles placing segments of the given descending lengths tip-to-tail into a
/// closed polygon. Requires lengths[0] <= sum of the rest.
fn closure_phases(lengths: &[f64]) -> Vec<f64> {
    use std::f64::consts::PI;
    let tiny = 1e-300;
    match lengths.len() {
        1 => vec![0.0],
        2 => vec![0.0, PI],
        3 => {
            let (a, b, c) = (lengths[0], lengths[1], lengths[2]);
            if a < tiny {
                return vec![0.0, 0.0, 0.0];
            }
            let chi = (((c * c - a * a - b * b) / (2.0 * a * b)).clamp(-1.0, 1.0)).acos();
            let p2 = Complex::new(a, 0.0) + Complex::from_polar(b, chi);
            let nu3 = if p2.norm() < tiny { 0.0 } else { (-p2).arg() };
            vec![0.0, chi, nu3]
        }
        4 => {
            let (a, b, c, d) = (lengths[0], lengths[1], lengths[2], lengths[3]);
            if a < tiny {
                return vec![0.0; 4];
            }
            // Merge the two shortest sides into one of length e, close the
            // triangle (a, b, e), then split e back into c and d.
            let e = (a - b).abs().clamp(c - d, c + d);
            let chi = (((e * e - a * a - b * b) / (2.0 * a * b)).clamp(-1.0, 1.0)).acos();
            let p2 = Complex::new(a, 0.0) + Complex::from_polar(b, chi);
            let nu_e = if p2.norm() < tiny { 0.0 } else { (-p2).arg() };
            if e < 1e-14 * a || c < tiny {
                // Degenerate merge: c and d cancel on their own.
                return vec![0.0, chi, nu_e, nu_e + PI];
            }
            let xi = (((e * e + c * c - d * d) / (2.0 * e * c)).clamp(-1.0, 1.0)).acos();
            let mu_c = nu_e + xi;
            let rest = Complex::from_polar(e, nu_e) - Complex::from_polar(c, mu_c);
            let mu_d = if rest.norm() < tiny { 0.0 } else { rest.arg() };
            vec![0.0, chi, mu_c, mu_d]
        }
        _ => unreachable!("at most four branches"),
    }
}
