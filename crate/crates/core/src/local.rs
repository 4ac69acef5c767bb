//! Local structure of decomposition branches: Schmidt angle and local
//! unitaries, waveplate sequences realizing them, and the diagonal
//! distillation filters that trade one Schmidt angle for another.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::linalg::{CMat, LocalUnitary, PureState, C64, ONE, ZERO};
use crate::{Error, Result};

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

/// Canonical form of a two-photon pure state:
/// psi = e^{i phase} (u (x) v) (cos theta |HH> + sin theta |VV>).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchmidtForm {
    pub theta: f64,
    pub u: LocalUnitary,
    pub v: LocalUnitary,
    pub phase: f64,
}

impl SchmidtForm {
    /// Rebuild the state this form describes.
    pub fn reconstruct(&self) -> PureState {
        let base = PureState::schmidt(self.theta);
        let joint = self.u.kron(&self.v);
        let mut amps = joint.apply4(base.amps());
        let phase = Complex::from_polar(1.0, self.phase);
        for a in amps.iter_mut() {
            *a *= phase;
        }
        PureState::new(amps).expect("unitaries preserve the norm")
    }
}

/// Extract the Schmidt angle and local unitaries of a normalized state.
///
/// The 2x2 amplitude matrix M (psi = sum M_jk |j>|k>) is factored through
/// the closed-form eigendecomposition of M^dag M. The left factors are
/// rebuilt as u_i = M v_i / |M v_i|, which keeps the reconstruction exact
/// for every singular-value gap, including the degenerate theta = pi/4 case.
pub fn schmidt_extract(psi: &PureState) -> SchmidtForm {
    let a = psi.amps();
    let m = CMat::mat2([[a[0], a[1]], [a[2], a[3]]]);
    let b = m.dagger().mul(&m);

    let b00 = b.get(0, 0).re;
    let b11 = b.get(1, 1).re;
    let b01 = b.get(0, 1);
    // Cancellation-free gap: tr^2 - 4 det = (b00 - b11)^2 + 4 |b01|^2.
    let gap = ((b00 - b11) * (b00 - b11) + 4.0 * b01.norm_sqr()).sqrt();

    // Eigenvector of b for the larger eigenvalue, from whichever residual
    // row has the larger pivot; any orthonormal pair works when b is a
    // multiple of the identity.
    let ca = [b01, Complex::new(0.5 * (b11 - b00 + gap), 0.0)];
    let cb = [Complex::new(0.5 * (b00 - b11 + gap), 0.0), b01.conj()];
    let na = (ca[0].norm_sqr() + ca[1].norm_sqr()).sqrt();
    let nb = (cb[0].norm_sqr() + cb[1].norm_sqr()).sqrt();
    let v1 = if na.max(nb) < 1e-12 {
        [ONE, ZERO]
    } else if na >= nb {
        [ca[0] / na, ca[1] / na]
    } else {
        [cb[0] / nb, cb[1] / nb]
    };
    let v2 = [-v1[1].conj(), v1[0].conj()];

    let mv1 = apply2(&m, &v1);
    let mv2 = apply2(&m, &v2);
    let mut s1 = norm2(&mv1);
    let mut s2 = norm2(&mv2);
    let (v1, v2, mv1, mv2) = if s2 > s1 {
        std::mem::swap(&mut s1, &mut s2);
        (v2, v1, mv2, mv1)
    } else {
        (v1, v2, mv1, mv2)
    };

    let u1 = [mv1[0] / s1, mv1[1] / s1];
    let u2 = if s2 > 1e-12 {
        [mv2[0] / s2, mv2[1] / s2]
    } else {
        [-u1[1].conj(), u1[0].conj()]
    };

    let theta = s2.atan2(s1).min(FRAC_PI_4);

    let mut u_mat = CMat::mat2([[u1[0], u2[0]], [u1[1], u2[1]]]);
    let mut v_mat = CMat::mat2([[v1[0].conj(), v2[0].conj()], [v1[1].conj(), v2[1].conj()]]);
    canonicalize_su(&mut u_mat);
    canonicalize_su(&mut v_mat);

    let u = LocalUnitary::new(u_mat).expect("columns are orthonormal");
    let v = LocalUnitary::new(v_mat).expect("columns are orthonormal");

    let built = {
        let base = PureState::schmidt(theta);
        u.kron(&v).apply4(base.amps())
    };
    let overlap = crate::linalg::inner4(&built, a);
    let phase = overlap.arg().rem_euclid(2.0 * PI);

    SchmidtForm { theta, u, v, phase }
}

fn apply2(m: &CMat, v: &[C64; 2]) -> [C64; 2] {
    [
        m.get(0, 0) * v[0] + m.get(0, 1) * v[1],
        m.get(1, 0) * v[0] + m.get(1, 1) * v[1],
    ]
}

fn norm2(v: &[C64; 2]) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
}

/// Push the determinant phase out and pin the leading entry's phase to
/// (-pi/2, pi/2], so outputs are unique.
fn canonicalize_su(m: &mut CMat) {
    let det = m.get(0, 0) * m.get(1, 1) - m.get(0, 1) * m.get(1, 0);
    let root = Complex::from_polar(1.0, det.arg() / 2.0);
    let mut out = m.scale(ONE / root);
    let reference = if out.get(0, 0).norm() > 1e-8 {
        out.get(0, 0)
    } else {
        out.get(0, 1)
    };
    let ang = reference.arg();
    if !(-FRAC_PI_2 < ang && ang <= FRAC_PI_2 + 1e-15) {
        out = out.scale(-ONE);
    }
    *m = out;
}

// ---------------------------------------------------------------------------
// Waveplates
// ---------------------------------------------------------------------------

fn rotation(theta: f64) -> CMat {
    let (s, c) = theta.sin_cos();
    CMat::mat2([
        [Complex::new(c, 0.0), Complex::new(-s, 0.0)],
        [Complex::new(s, 0.0), Complex::new(c, 0.0)],
    ])
}

/// Jones matrix of a quarter-wave plate with fast axis at `theta` from
/// horizontal (eigenphases e^{-i pi/4}, e^{+i pi/4}).
pub fn jones_qwp(theta: f64) -> CMat {
    let d = CMat::mat2([
        [Complex::from_polar(1.0, -FRAC_PI_4), ZERO],
        [ZERO, Complex::from_polar(1.0, FRAC_PI_4)],
    ]);
    rotation(theta).mul(&d).mul(&rotation(-theta))
}

/// Jones matrix of a half-wave plate with fast axis at `theta` from
/// horizontal (eigenphases -i, +i).
pub fn jones_hwp(theta: f64) -> CMat {
    let d = CMat::mat2([
        [Complex::new(0.0, -1.0), ZERO],
        [ZERO, Complex::new(0.0, 1.0)],
    ]);
    rotation(theta).mul(&d).mul(&rotation(-theta))
}

/// Fast-axis orientations of a {QWP, HWP, QWP} sequence, applied first to
/// last, realizing a target polarization rotation up to global phase.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WaveplateTriple {
    pub qwp1: f64,
    pub hwp: f64,
    pub qwp2: f64,
}

impl WaveplateTriple {
    /// Jones product qwp2 * hwp * qwp1.
    pub fn matrix(&self) -> CMat {
        jones_qwp(self.qwp2)
            .mul(&jones_hwp(self.hwp))
            .mul(&jones_qwp(self.qwp1))
    }

    /// Frobenius distance to the target, minimized over global phase.
    pub fn residual_against(&self, target: &CMat) -> f64 {
        let j = self.matrix();
        let tr = target.dagger().mul(&j).trace();
        if tr.norm() < 1e-300 {
            return j.sub(target).frob_norm();
        }
        let phase = tr / tr.norm();
        j.sub(&target.scale(phase)).frob_norm()
    }
}

/// Solve the {QWP, HWP, QWP} fast-axis angles realizing a local unitary.
///
/// In quaternion form a QWP at angle q is a quarter turn about the
/// equatorial axis at longitude 2q and an HWP a half turn; composing the
/// three and matching components of the target quaternion gives closed-form
/// angle sums and differences. Diagonal-in-circular-basis targets leave a
/// one-parameter gauge, fixed by qwp1 = 0.
pub fn waveplate_decompose(target: &LocalUnitary) -> WaveplateTriple {
    let m = target.mat();
    let det = m.get(0, 0) * m.get(1, 1) - m.get(0, 1) * m.get(1, 0);
    let root = Complex::from_polar(1.0, det.arg() / 2.0);
    let su = m.scale(ONE / root);

    // su = w I - i (x sx + y sy + z sz)
    let w = 0.5 * (su.get(0, 0).re + su.get(1, 1).re);
    let x = -0.5 * (su.get(0, 1).im + su.get(1, 0).im);
    let y = 0.5 * (su.get(1, 0).re - su.get(0, 1).re);
    let z = 0.5 * (su.get(1, 1).im - su.get(0, 0).im);

    let cos_u = (w * w + y * y).sqrt();
    let sin_u = (x * x + z * z).sqrt();
    let u = sin_u.atan2(cos_u);
    let v = if cos_u > 1e-12 { y.atan2(-w) } else { 0.0 };
    let phi_h = if sin_u > 1e-12 {
        u + (-z).atan2(x)
    } else {
        // Rotation about the circular axis: fix qwp1 = 0.
        u - v
    };

    WaveplateTriple {
        qwp1: normalize_angle(0.5 * (phi_h - u + v)),
        hwp: normalize_angle(0.5 * phi_h),
        qwp2: normalize_angle(0.5 * (phi_h - u - v)),
    }
}

/// Waveplate orientations are pi-periodic; store them in [0, pi).
fn normalize_angle(a: f64) -> f64 {
    let mut out = a.rem_euclid(PI);
    if out >= PI {
        out -= PI;
    }
    out
}

// ---------------------------------------------------------------------------
// Distillation filters
// ---------------------------------------------------------------------------

/// Which way the filter moves the Schmidt angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterDirection {
    /// |Phi(beta)> -> |Phi(alpha)> with success sin^2(beta)/sin^2(alpha).
    Raise,
    /// |Phi(alpha)> -> |Phi(beta)> with success cos^2(alpha)/cos^2(beta).
    Lower,
}

/// Diagonal amplitude attenuations (f_h, f_v) applied to one photon,
/// normalized so the stronger arm passes unattenuated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterSpec {
    pub f_h: f64,
    pub f_v: f64,
    pub success_prob: f64,
}

impl FilterSpec {
    pub fn identity() -> Self {
        FilterSpec {
            f_h: 1.0,
            f_v: 1.0,
            success_prob: 1.0,
        }
    }

    /// Apply to photon A: returns the unnormalized output amplitudes and the
    /// survival probability for this input.
    pub fn apply_photon_a(&self, psi: &PureState) -> ([C64; 4], f64) {
        let a = psi.amps();
        let out = [
            a[0] * self.f_h,
            a[1] * self.f_h,
            a[2] * self.f_v,
            a[3] * self.f_v,
        ];
        let survival: f64 = out.iter().map(|z| z.norm_sqr()).sum();
        (out, survival)
    }
}

/// Design the maximal-probability filter transforming one Schmidt state into
/// another on photon A. Requires 0 <= beta <= alpha <= pi/4.
pub fn design_filter(alpha: f64, beta: f64, direction: FilterDirection) -> Result<FilterSpec> {
    if !(0.0..=FRAC_PI_4 + 1e-12).contains(&alpha) || beta < -1e-15 || beta > alpha + 1e-12 {
        return Err(Error::AngleOrder { alpha, beta });
    }
    if (alpha - beta).abs() < 1e-15 {
        return Ok(FilterSpec::identity());
    }
    match direction {
        FilterDirection::Raise => {
            if beta.sin().abs() < 1e-15 {
                return Err(Error::InfeasibleRaise);
            }
            let ratio = beta.tan() / alpha.tan();
            Ok(FilterSpec {
                f_h: ratio,
                f_v: 1.0,
                success_prob: (beta.sin() / alpha.sin()).powi(2),
            })
        }
        FilterDirection::Lower => {
            let ratio = beta.tan() / alpha.tan();
            Ok(FilterSpec {
                f_h: 1.0,
                f_v: ratio,
                success_prob: (alpha.cos() / beta.cos()).powi(2),
            })
        }
    }
}
