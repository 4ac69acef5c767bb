//! Simulated polarization-correlation measurements and density-matrix
//! reconstruction.
//!
//! Nine settings pair the three mutually unbiased polarization bases on each
//! photon; each setting is a complete four-outcome measurement, so
//! multinomial simulation and frequency normalization are exact.
//! Reconstruction is linear inversion over correlation expectations followed
//! by eigenvalue clipping back onto the physical set.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{eig_hermitian, outer4, CMat, DensityMatrix, C64, ONE, ZERO};
use crate::{Error, Result};

/// Single-photon measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    /// Horizontal / vertical.
    HV,
    /// Diagonal / antidiagonal.
    DA,
    /// Right / left circular.
    RL,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::HV, Basis::DA, Basis::RL];

    /// The (+1, -1) eigenstates of this basis.
    pub fn outcome_states(self) -> [[C64; 2]; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = Complex::new(s, 0.0);
        match self {
            Basis::HV => [[ONE, ZERO], [ZERO, ONE]],
            Basis::DA => [[h, h], [h, -h]],
            Basis::RL => [[h, Complex::new(0.0, s)], [h, Complex::new(0.0, -s)]],
        }
    }

    fn pauli(self) -> CMat {
        match self {
            Basis::HV => CMat::mat2([[ONE, ZERO], [ZERO, -ONE]]),
            Basis::DA => CMat::mat2([[ZERO, ONE], [ONE, ZERO]]),
            Basis::RL => CMat::mat2([
                [ZERO, Complex::new(0.0, -1.0)],
                [Complex::new(0.0, 1.0), ZERO],
            ]),
        }
    }
}

/// One of the nine two-photon settings with its four outcome projectors,
/// ordered (+,+), (+,-), (-,+), (-,-).
#[derive(Debug, Clone)]
pub struct MeasurementSetting {
    pub id: usize,
    pub basis_a: Basis,
    pub basis_b: Basis,
    pub projectors: [CMat; 4],
}

/// All nine settings in a fixed order: setting 3i + j pairs basis i on
/// photon A with basis j on photon B.
pub fn standard_settings() -> Vec<MeasurementSetting> {
    let mut settings = Vec::with_capacity(9);
    for (i, &basis_a) in Basis::ALL.iter().enumerate() {
        for (j, &basis_b) in Basis::ALL.iter().enumerate() {
            let states_a = basis_a.outcome_states();
            let states_b = basis_b.outcome_states();
            let mut projectors = Vec::with_capacity(4);
            for sa in &states_a {
                for sb in &states_b {
                    let joint = [sa[0] * sb[0], sa[0] * sb[1], sa[1] * sb[0], sa[1] * sb[1]];
                    projectors.push(outer4(&joint, &joint));
                }
            }
            settings.push(MeasurementSetting {
                id: 3 * i + j,
                basis_a,
                basis_b,
                projectors: projectors.try_into().expect("four outcomes"),
            });
        }
    }
    settings
}

/// Counts observed at one setting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting: usize,
    pub counts: [u64; 4],
    pub total: u64,
    pub seed: u64,
    /// Exact outcome probabilities; set when the record was produced
    /// analytically rather than by sampling (total = 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freqs: Option<[f64; 4]>,
}

/// Exact outcome probabilities Tr(rho P) for every setting.
pub fn exact_frequencies(rho: &DensityMatrix) -> Vec<[f64; 4]> {
    standard_settings()
        .iter()
        .map(|s| {
            let mut probs = [0.0; 4];
            for (k, p) in s.projectors.iter().enumerate() {
                probs[k] = p.mul(rho.mat()).trace().re.max(0.0);
            }
            probs
        })
        .collect()
}

/// Analytic records carrying exact frequencies instead of sampled counts.
pub fn exact_records(rho: &DensityMatrix) -> Vec<CountRecord> {
    exact_frequencies(rho)
        .into_iter()
        .enumerate()
        .map(|(id, probs)| CountRecord {
            setting: id,
            counts: [0; 4],
            total: 0,
            seed: 0,
            freqs: Some(probs),
        })
        .collect()
}

/// Multinomial counts per setting, deterministic per seed. Each setting
/// draws from its own stream so settings are independent and the whole
/// record set is reproducible.
pub fn simulate_counts(rho: &DensityMatrix, shots: u64, seed: u64) -> Result<Vec<CountRecord>> {
    if shots == 0 {
        return Err(Error::OutOfRange {
            name: "shots",
            value: 0.0,
            expected: ">= 1",
        });
    }
    let freqs = exact_frequencies(rho);
    let mut records = Vec::with_capacity(9);
    for (id, probs) in freqs.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id as u64 + 1);
        let total_prob: f64 = probs.iter().sum();
        let mut counts = [0u64; 4];
        for _ in 0..shots {
            let mut x: f64 = rng.random::<f64>() * total_prob;
            let mut outcome = 3;
            for (k, p) in probs.iter().enumerate() {
                if x < *p {
                    outcome = k;
                    break;
                }
                x -= p;
            }
            counts[outcome] += 1;
        }
        records.push(CountRecord {
            setting: id,
            counts,
            total: shots,
            seed,
            freqs: None,
        });
    }
    Ok(records)
}

/// Reconstruct the density matrix from a complete record set.
///
/// Linear inversion over the 16 correlation expectations, with single-photon
/// marginals averaged over the three partner settings, then projection onto
/// the physical set by clipping negative eigenvalues and renormalizing.
pub fn reconstruct(records: &[CountRecord]) -> Result<DensityMatrix> {
    let mut freqs: [Option<[f64; 4]>; 9] = [None; 9];
    for r in records {
        if r.setting >= 9 {
            continue;
        }
        if let Some(f) = r.freqs {
            freqs[r.setting] = Some(f);
        } else {
            if r.total == 0 {
                return Err(Error::EmptyRecords);
            }
            let counted: u64 = r.counts.iter().sum();
            if counted != r.total {
                return Err(Error::BadWeights((counted as f64 - r.total as f64).abs()));
            }
            let mut f = [0.0; 4];
            for k in 0..4 {
                f[k] = r.counts[k] as f64 / r.total as f64;
            }
            freqs[r.setting] = Some(f);
        }
    }
    let freqs: Vec<[f64; 4]> = freqs
        .iter()
        .enumerate()
        .map(|(id, f)| f.ok_or(Error::IncompleteRecords(id)))
        .collect::<Result<_>>()?;
    reconstruct_from_frequencies(&freqs)
}

/// Linear inversion from per-setting outcome frequencies.
pub fn reconstruct_from_frequencies(freqs: &[[f64; 4]]) -> Result<DensityMatrix> {
    if freqs.len() != 9 {
        return Err(Error::IncompleteRecords(freqs.len()));
    }
    // Outcome signs in the fixed ordering (+,+), (+,-), (-,+), (-,-).
    const SIGN_A: [f64; 4] = [1.0, 1.0, -1.0, -1.0];
    const SIGN_B: [f64; 4] = [1.0, -1.0, 1.0, -1.0];

    let setting = |i: usize, j: usize| &freqs[3 * i + j];
    let mut corr = [[0.0f64; 3]; 3];
    let mut marg_a = [0.0f64; 3];
    let mut marg_b = [0.0f64; 3];
    for i in 0..3 {
        for j in 0..3 {
            let f = setting(i, j);
            let norm: f64 = f.iter().sum();
            if norm <= 0.0 {
                return Err(Error::EmptyRecords);
            }
            for k in 0..4 {
                let p = f[k] / norm;
                corr[i][j] += SIGN_A[k] * SIGN_B[k] * p;
                marg_a[i] += SIGN_A[k] * p / 3.0;
                marg_b[j] += SIGN_B[k] * p / 3.0;
            }
        }
    }

    let id2 = CMat::identity(2);
    let mut mat = CMat::identity(4).scale_re(0.25);
    for (i, &basis) in Basis::ALL.iter().enumerate() {
        let pa = basis.pauli();
        mat = mat.add(&pa.kron(&id2).scale_re(0.25 * marg_a[i]));
        mat = mat.add(&id2.kron(&pa).scale_re(0.25 * marg_b[i]));
    }
    for (i, &ba) in Basis::ALL.iter().enumerate() {
        for (j, &bb) in Basis::ALL.iter().enumerate() {
            mat = mat.add(&ba.pauli().kron(&bb.pauli()).scale_re(0.25 * corr[i][j]));
        }
    }

    // Clip onto the physical set.
    let eig = eig_hermitian(&mat.add(&mat.dagger()).scale_re(0.5))?;
    let clipped: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return Err(Error::EmptyRecords);
    }
    let mut out = CMat::zeros(4, 4);
    for k in 0..4 {
        if clipped[k] == 0.0 {
            continue;
        }
        let col = eig.vector(k);
        let col4 = [col[0], col[1], col[2], col[3]];
        out = out.add(&outer4(&col4, &col4).scale_re(clipped[k] / total));
    }
    DensityMatrix::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{fidelity, is_physical, random_density, PureState};
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn settings_have_complete_projectors() {
        let settings = standard_settings();
        assert_eq!(settings.len(), 9);
        for s in &settings {
            let mut sum = CMat::zeros(4, 4);
            for p in &s.projectors {
                // Idempotent rank-1 projectors.
                assert!(p.mul(p).max_abs_diff(p) < 1e-12);
                sum = sum.add(p);
            }
            assert!(sum.max_abs_diff(&CMat::identity(4)) < 1e-12);
        }
    }

    #[test]
    fn hv_setting_projects_onto_basis_states() {
        let settings = standard_settings();
        let p_hh = &settings[0].projectors[0];
        let hh = PureState::basis(0);
        assert!(p_hh.max_abs_diff(&outer4(hh.amps(), hh.amps())) < 1e-14);
    }

    #[test]
    fn projectors_span_the_operator_space() {
        // Gram matrix of the 36 vectorized projectors has rank 16.
        let settings = standard_settings();
        let mut vectors: Vec<Vec<C64>> = Vec::new();
        for s in &settings {
            for p in &s.projectors {
                let mut v = Vec::with_capacity(16);
                for i in 0..4 {
                    for j in 0..4 {
                        v.push(p.get(i, j));
                    }
                }
                vectors.push(v);
            }
        }
        let mut gram = CMat::zeros(16, 16);
        for a in 0..16 {
            for b in 0..16 {
                let mut sum = ZERO;
                for v in &vectors {
                    sum += v[a].conj() * v[b];
                }
                gram.set(a, b, sum);
            }
        }
        let (values, _) = {
            let sym = gram.add(&gram.dagger()).scale_re(0.5);
            crate::linalg::eig_hermitian(&sym)
                .map(|e| (e.values, e.vectors))
                .unwrap()
        };
        let rank = values.iter().filter(|&&l| l > 1e-9).count();
        assert_eq!(rank, 16);
    }

    #[test]
    fn pure_state_counts_concentrate() {
        let rho = PureState::basis(0).density(); // |HH>
        let records = simulate_counts(&rho, 1000, 7).unwrap();
        // Setting 0 is (H/V, H/V): everything lands on outcome (+,+).
        assert_eq!(records[0].counts, [1000, 0, 0, 0]);
    }

    #[test]
    fn bell_state_diagonal_basis_correlations() {
        let rho = PureState::schmidt(FRAC_PI_4).density();
        let freqs = exact_frequencies(&rho);
        // Setting 4 is (D/A, D/A): perfectly correlated outcomes.
        let f = freqs[4];
        assert!((f[0] - 0.5).abs() < 1e-12);
        assert!((f[3] - 0.5).abs() < 1e-12);
        assert!(f[1].abs() < 1e-12 && f[2].abs() < 1e-12);
    }

    #[test]
    fn maximally_mixed_counts_are_uniform() {
        let rho = DensityMatrix::maximally_mixed();
        let shots = 100_000u64;
        let records = simulate_counts(&rho, shots, 3).unwrap();
        // 5 sigma binomial bound around shots/4.
        let sigma = (shots as f64 * 0.25 * 0.75).sqrt();
        for r in &records {
            for &c in &r.counts {
                assert!(
                    (c as f64 - shots as f64 / 4.0).abs() < 5.0 * sigma,
                    "count {c} too far from uniform"
                );
            }
        }
    }

    #[test]
    fn counts_are_deterministic_per_seed() {
        let rho = DensityMatrix::werner(0.5).unwrap();
        let a = simulate_counts(&rho, 5000, 11).unwrap();
        let b = simulate_counts(&rho, 5000, 11).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.counts, y.counts);
        }
        let c = simulate_counts(&rho, 5000, 12).unwrap();
        assert!(a.iter().zip(c.iter()).any(|(x, y)| x.counts != y.counts));
    }

    #[test]
    fn exact_reconstruction_of_maximally_mixed() {
        let rho = DensityMatrix::maximally_mixed();
        let back = reconstruct(&exact_records(&rho)).unwrap();
        assert!(back.mat().max_abs_diff(rho.mat()) < 1e-12);
    }

    #[test]
    fn exact_reconstruction_round_trips_random_states() {
        for seed in 0..100u64 {
            let rho = random_density(1 + (seed % 4) as usize, seed).unwrap();
            let back = reconstruct(&exact_records(&rho)).unwrap();
            let residual = back.mat().sub(rho.mat()).frob_norm();
            assert!(residual <= 1e-9, "seed {seed}: residual {residual:.3e}");
        }
    }

    #[test]
    fn sampled_reconstruction_converges() {
        let rho = DensityMatrix::werner(0.8).unwrap();
        let records = simulate_counts(&rho, 1_000_000, 5).unwrap();
        let back = reconstruct(&records).unwrap();
        assert!(fidelity(&back, &rho) >= 0.99);
    }

    #[test]
    fn noisy_reconstruction_is_physical() {
        for seed in 0..20u64 {
            let rho = random_density(4, seed).unwrap();
            let records = simulate_counts(&rho, 200, seed).unwrap();
            let back = reconstruct(&records).unwrap();
            assert!(is_physical(back.mat(), 1e-9).ok, "seed {seed}");
        }
    }

    #[test]
    fn more_shots_improve_median_fidelity() {
        let rho = DensityMatrix::werner(0.8).unwrap();
        let median = |shots: u64| {
            let mut fids: Vec<f64> = (0..20u64)
                .map(|seed| {
                    let records = simulate_counts(&rho, shots, seed).unwrap();
                    fidelity(&reconstruct(&records).unwrap(), &rho)
                })
                .collect();
            fids.sort_by(|a, b| a.partial_cmp(b).unwrap());
            0.5 * (fids[9] + fids[10])
        };
        let low = median(1000);
        let high = median(1_000_000);
        assert!(
            high > low,
            "median fidelity did not improve: {low} vs {high}"
        );
        assert!(high >= 0.99);
    }

    #[test]
    fn reconstruct_rejects_incomplete_records() {
        let rho = DensityMatrix::maximally_mixed();
        let mut records = exact_records(&rho);
        records.remove(4);
        assert!(matches!(
            reconstruct(&records),
            Err(Error::IncompleteRecords(_))
        ));
    }

    #[test]
    fn count_record_json_round_trip() {
        let rho = DensityMatrix::werner(0.3).unwrap();
        let records = simulate_counts(&rho, 100, 9).unwrap();
        let line = serde_json::to_string(&records[2]).unwrap();
        assert!(!line.contains("freqs"));
        let back: CountRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back.counts, records[2].counts);
        assert_eq!(back.setting, 2);
    }
}
