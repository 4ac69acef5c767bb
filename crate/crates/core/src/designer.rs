//! Turn a target mixed state into a concrete optimal circuit: the general
//! four-path scheme with closed-form beam-splitter settings (three cases by
//! the number of nonzero weights) and the two-component scheme with
//! distillation filters, each cross-checked against a brute-force grid
//! oracle.

use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitSpec, SprPair};
use crate::entanglement::{wootters_decompose, Decomposition};
use crate::linalg::DensityMatrix;
use crate::local::{design_filter, schmidt_extract, FilterDirection, SchmidtForm};
use crate::{Error, Result};

/// Weights below this count as absent when dispatching cases.
const WEIGHT_CUTOFF: f64 = 1e-12;

/// Diagonal coincidence probabilities of the four-path layout:
/// p11 = e1 e2 e3 e5, p22 = e1 e2 (1-e3)(1-e5),
/// p33 = (1-e1)(1-e2) e4 e6, p44 = (1-e1)(1-e2)(1-e4)(1-e6).
pub fn path_probabilities(etas: &[f64; 6]) -> Result<[f64; 4]> {
    for (k, eta) in etas.iter().enumerate() {
        if !(0.0..=1.0).contains(eta) || !eta.is_finite() {
            return Err(Error::OutOfRange {
                name: ["eta1", "eta2", "eta3", "eta4", "eta5", "eta6"][k],
                value: *eta,
                expected: "[0, 1]",
            });
        }
    }
    let [e1, e2, e3, e4, e5, e6] = *etas;
    Ok([
        e1 * e2 * e3 * e5,
        e1 * e2 * (1.0 - e3) * (1.0 - e5),
        (1.0 - e1) * (1.0 - e2) * e4 * e6,
        (1.0 - e1) * (1.0 - e2) * (1.0 - e4) * (1.0 - e6),
    ])
}

/// Which closed-form optimum applies, by the number of nonzero weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseId {
    /// At least three nonzero weights.
    One,
    /// Exactly two nonzero weights.
    Two,
    /// A single nonzero weight: everything down path 1.
    Three,
}

impl CaseId {
    pub fn as_u8(self) -> u8 {
        match self {
            CaseId::One => 1,
            CaseId::Two => 2,
            CaseId::Three => 3,
        }
    }
}

impl Serialize for CaseId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for CaseId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match u8::deserialize(d)? {
            1 => Ok(CaseId::One),
            2 => Ok(CaseId::Two),
            3 => Ok(CaseId::Three),
            other => Err(serde::de::Error::custom(format!("invalid case id {other}"))),
        }
    }
}

/// Closed-form transmissions maximizing F for sorted weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneralOptimum {
    pub etas: [f64; 6],
    pub f_optimal: f64,
    pub case_id: CaseId,
}

fn validate_weights(weights: &[f64; 4]) -> Result<()> {
    for w in weights.windows(2) {
        if w[1] > w[0] + 1e-12 {
            return Err(Error::UnsortedWeights);
        }
    }
    if weights.iter().any(|&w| w < -1e-12) {
        return Err(Error::BadWeights(1.0));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::BadWeights((sum - 1.0).abs()));
    }
    if weights[0] <= WEIGHT_CUTOFF {
        return Err(Error::ZeroLeadingWeight);
    }
    Ok(())
}

/// Optimal transmissions for a descending weight vector summing to one.
pub fn optimal_general(weights: &[f64; 4]) -> Result<GeneralOptimum> {
    validate_weights(weights)?;
    let a2 = weights[1] / weights[0];
    let a3 = weights[2] / weights[0];
    let a4 = weights[3] / weights[0];

    if a2 <= WEIGHT_CUTOFF {
        return Ok(GeneralOptimum {
            etas: [1.0; 6],
            f_optimal: 1.0,
            case_id: CaseId::Three,
        });
    }
    if a3 <= WEIGHT_CUTOFF {
        let e35 = 1.0 / (1.0 + a2.sqrt());
        return Ok(GeneralOptimum {
            etas: [1.0, 1.0, e35, 1.0, e35, 1.0],
            f_optimal: (1.0 + a2) / (1.0 + a2.sqrt()).powi(2),
            case_id: CaseId::Two,
        });
    }
    let s = 1.0 + a2.sqrt() + a3.sqrt() + a4.sqrt();
    let e12 = (1.0 + a2.sqrt()) / s;
    let e35 = 1.0 / (1.0 + a2.sqrt());
    let e46 = if a4 <= WEIGHT_CUTOFF {
        1.0
    } else {
        a3.sqrt() / (a3.sqrt() + a4.sqrt())
    };
    Ok(GeneralOptimum {
        etas: [e12, e12, e35, e46, e35, e46],
        f_optimal: (1.0 + a2 + a3 + a4) / (s * s),
        case_id: CaseId::One,
    })
}

/// Brute-force maximum of F over the constrained grid.
///
/// The weight constraints leave two free transmissions (the path-1 and
/// path-3 splitters); the others follow exactly: the partner splitter from
/// each pair ratio, and the group splitter from the cross ratio together
/// with the boundary argument that eta1 = eta2 maximizes both group masses
/// at fixed ratio.
pub fn brute_force_optimal(weights: &[f64; 4], resolution: f64) -> Result<f64> {
    validate_weights(weights)?;
    if !(resolution > 0.0 && resolution <= 0.1) {
        return Err(Error::OutOfRange {
            name: "resolution",
            value: resolution,
            expected: "(0, 0.1]",
        });
    }
    let nonzero = weights.iter().filter(|&&w| w > WEIGHT_CUTOFF).count();
    let steps = (1.0 / resolution).round() as usize;
    let grid = |k: usize| k as f64 * resolution;

    match nonzero {
        1 => Ok(1.0),
        2 => {
            // Paths 1 and 2 only: F = e3 e5 (1 + r1) on the constraint curve.
            let r1 = weights[1] / weights[0];
            let mut best = 0.0f64;
            for k in 1..=steps {
                let e3 = grid(k).min(1.0);
                let e5 = partner_eta(e3, r1);
                best = best.max(e3 * e5 * (1.0 + r1));
            }
            Ok(best)
        }
        3 => {
            let r1 = weights[1] / weights[0];
            let ratio31 = weights[2] / weights[0];
            let mut best = 0.0f64;
            for k in 1..=steps {
                let e3 = grid(k).min(1.0);
                let e5 = partner_eta(e3, r1);
                let a = e3 * e5;
                if a < 1e-300 {
                    continue;
                }
                // x a / y = w1 / w3 with x = eta1^2, y = (1 - eta1)^2.
                let rho = 1.0 / (ratio31 * a);
                let e1 = rho.sqrt() / (1.0 + rho.sqrt());
                let x = e1 * e1;
                let y = (1.0 - e1) * (1.0 - e1);
                best = best.max(x * a * (1.0 + r1) + y);
            }
            Ok(best)
        }
        4 => {
            let r1 = weights[1] / weights[0];
            let r2 = weights[3] / weights[2];
            let ratio13 = weights[0] / weights[2];
            let mut best = 0.0f64;
            let mut pair35 = Vec::with_capacity(steps);
            for k in 1..=steps {
                let e3 = grid(k).min(1.0);
                pair35.push(e3 * partner_eta(e3, r1));
            }
            for k in 1..=steps {
                let e4 = grid(k).min(1.0);
                let b = e4 * partner_eta(e4, r2);
                if b < 1e-300 {
                    continue;
                }
                let scale_b = b * (1.0 + r2);
                for &a in &pair35 {
                    if a < 1e-300 {
                        continue;
                    }
                    let rho = ratio13 * b / a;
                    let sq = rho.sqrt();
                    let e1 = sq / (1.0 + sq);
                    let x = e1 * e1;
                    let y = (1.0 - e1) * (1.0 - e1);
                    let f = x * a * (1.0 + r1) + y * scale_b;
                    if f > best {
                        best = f;
                    }
                }
            }
            Ok(best)
        }
        _ => Err(Error::InfeasibleWeights(resolution)),
    }
}

/// Second splitter of a pair from the first and the weight ratio:
/// (1 - e)(1 - partner) = r * e * partner.
fn partner_eta(eta: f64, ratio: f64) -> f64 {
    let denom = 1.0 - eta * (1.0 - ratio);
    if denom < 1e-300 {
        1.0
    } else {
        ((1.0 - eta) / denom).clamp(0.0, 1.0)
    }
}

// ---------------------------------------------------------------------------
// General design pipeline
// ---------------------------------------------------------------------------

/// Full design for an arbitrary target: decomposition, shared Schmidt angle,
/// transmissions, predicted success probability, and the circuit realizing
/// it.
#[derive(Debug, Clone, Serialize)]
pub struct GeneralDesign {
    pub decomposition: Decomposition,
    pub theta0: f64,
    pub etas: [f64; 6],
    pub f_optimal: f64,
    pub case_id: CaseId,
    pub schmidt_forms: Vec<SchmidtForm>,
    pub circuit: CircuitSpec,
}

/// Design the four-path circuit preparing `rho` with maximal success
/// probability.
pub fn design_general(rho: &DensityMatrix) -> Result<GeneralDesign> {
    design_from_decomposition(wootters_decompose(rho)?)
}

/// Design from an explicit equal-angle decomposition.
///
/// Exists so alternative decompositions can be tried against the default
/// one; the branches must share a Schmidt angle (within 1e-7) or no single
/// source state can feed every path.
pub fn design_from_decomposition(mut decomposition: Decomposition) -> Result<GeneralDesign> {
    if decomposition.branches.is_empty() || decomposition.branches.len() > 4 {
        return Err(Error::InvalidRank(decomposition.branches.len()));
    }
    decomposition
        .branches
        .sort_by(|a, b| b.p.partial_cmp(&a.p).unwrap());
    let forms: Vec<SchmidtForm> = decomposition
        .branches
        .iter()
        .map(|b| schmidt_extract(&b.state))
        .collect();

    let theta0 = forms[0].theta;
    let spread = forms
        .iter()
        .map(|f| (f.theta - theta0).abs())
        .fold(0.0, f64::max);
    if spread > 1e-7 {
        return Err(Error::ThetaMismatch(spread));
    }

    let mut weights = [0.0; 4];
    for (k, b) in decomposition.branches.iter().enumerate() {
        weights[k] = b.p;
    }
    // Guard against rounding pushing the sum off one.
    let sum: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= sum;
    }

    let optimum = optimal_general(&weights)?;
    let mut circuit = CircuitSpec::trivial(theta0);
    circuit.etas = optimum.etas;
    for (k, form) in forms.iter().enumerate() {
        circuit.sprs.insert(
            k + 1,
            SprPair {
                u: form.u.clone(),
                v: form.v.clone(),
            },
        );
    }
    Ok(GeneralDesign {
        decomposition,
        theta0,
        etas: optimum.etas,
        f_optimal: optimum.f_optimal,
        case_id: optimum.case_id,
        schmidt_forms: forms,
        circuit,
    })
}

// ---------------------------------------------------------------------------
// Two-component scheme
// ---------------------------------------------------------------------------

/// Which pure component the source produces directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    /// Source emits |Phi(alpha)>; the second path lowers it to beta.
    PhiAlpha,
    /// Source emits |Phi(beta)>; the first path raises it to alpha.
    PhiBeta,
}

/// Optimal transmissions and success probability of the two-component
/// scheme at component ratio A = (1-p)/p.
///
/// Success is k1 (1+A) / (1 + sqrt(A k1))^2 from |Phi(beta)> and
/// k2 (1+A) / (sqrt(k2) + sqrt(A))^2 from |Phi(alpha)>, with
/// eta1 = eta2 = eta12 meeting the mixture-ratio constraint exactly.
pub fn optimal_two(k1: f64, k2: f64, a: f64, initial: Initial) -> Result<(f64, f64)> {
    for (name, k) in [("k1", k1), ("k2", k2)] {
        if !(k > 0.0 && k <= 1.0) {
            return Err(Error::OutOfRange {
                name,
                value: k,
                expected: "(0, 1]",
            });
        }
    }
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::OutOfRange {
            name: "A",
            value: a,
            expected: "[0, inf)",
        });
    }
    Ok(match initial {
        Initial::PhiBeta => {
            let eta = 1.0 / (1.0 + (a * k1).sqrt());
            (eta, k1 * (1.0 + a) / (1.0 + (a * k1).sqrt()).powi(2))
        }
        Initial::PhiAlpha => {
            let eta = k2.sqrt() / (k2.sqrt() + a.sqrt());
            (eta, k2 * (1.0 + a) / (k2.sqrt() + a.sqrt()).powi(2))
        }
    })
}

/// Un-optimized success probability of the P branch at a given eta1, with
/// eta2 eliminated through the mixture-ratio constraint
/// (1-e1)(1-e2) = A k1 e1 e2.
pub fn success_p_at(eta1: f64, k1: f64, a: f64) -> f64 {
    let denom = (1.0 - eta1) + a * k1 * eta1;
    let eta2 = if denom < 1e-300 {
        1.0
    } else {
        (1.0 - eta1) / denom
    };
    k1 * eta1 * eta2 + (1.0 - eta1) * (1.0 - eta2)
}

/// Un-optimized success probability of the P' branch at a given eta1, with
/// eta2 from k2 (1-e1)(1-e2) = A e1 e2.
pub fn success_pprime_at(eta1: f64, k2: f64, a: f64) -> f64 {
    let denom = k2 * (1.0 - eta1) + a * eta1;
    let eta2 = if denom < 1e-300 {
        1.0
    } else {
        k2 * (1.0 - eta1) / denom
    };
    eta1 * eta2 + k2 * (1.0 - eta1) * (1.0 - eta2)
}

/// Pick the initial state maximizing success at target weight p.
///
/// Returns the choice and the threshold
/// k1 (1-sqrt(k2))^2 / (k1 (1-sqrt(k2))^2 + k2 (1-sqrt(k1))^2);
/// |Phi(beta)> wins at or below it. A vanishing k1 (beta = 0 with
/// alpha > 0) makes raising impossible, forcing |Phi(alpha)>.
pub fn choose_initial(k1: f64, k2: f64, p: f64) -> Result<(Initial, f64)> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            name: "p",
            value: p,
            expected: "[0, 1]",
        });
    }
    for (name, k) in [("k1", k1), ("k2", k2)] {
        if !(0.0..=1.0).contains(&k) {
            return Err(Error::OutOfRange {
                name,
                value: k,
                expected: "[0, 1]",
            });
        }
    }
    if k1 < 1e-15 {
        return Ok((Initial::PhiAlpha, 0.0));
    }
    let num = k1 * (1.0 - k2.sqrt()).powi(2);
    let den = num + k2 * (1.0 - k1.sqrt()).powi(2);
    // k1 = k2 = 1 degenerates to 0/0; both routes coincide there.
    let threshold = if den < 1e-300 { 0.5 } else { num / den };
    let initial = if p <= threshold {
        Initial::PhiBeta
    } else {
        Initial::PhiAlpha
    };
    Ok((initial, threshold))
}

/// Success-probability branch selector for fixed points and sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SuccessBranch {
    P,
    PPrime,
}

/// The transmission at which the branch's success probability no longer
/// depends on the component ratio: (1/(1+k1), k1/(1+k1)) for P and
/// (k2/(1+k2), k2/(1+k2)) for P'.
pub fn fixed_point(k: f64, which: SuccessBranch) -> (f64, f64) {
    match which {
        SuccessBranch::P => (1.0 / (1.0 + k), k / (1.0 + k)),
        SuccessBranch::PPrime => (k / (1.0 + k), k / (1.0 + k)),
    }
}

/// Full two-component design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoStateDesign {
    pub alpha: f64,
    pub beta: f64,
    pub p_target: f64,
    pub k1: f64,
    pub k2: f64,
    pub chosen_initial: Initial,
    pub threshold: f64,
    pub eta12: f64,
    pub success: f64,
}

/// Design the two-component circuit for the canonical mixture
/// p |Phi(alpha)><Phi(alpha)| + (1-p) |Phi(beta)><Phi(beta)|.
///
/// Pure targets (p = 0 or 1) skip the filter entirely. The returned circuit
/// uses paths 1 and 2: the source component on path 1, the filtered one on
/// path 2 when starting from |Phi(alpha)>, or the raised component on
/// path 1 when starting from |Phi(beta)>.
pub fn design_two(alpha: f64, beta: f64, p: f64) -> Result<(TwoStateDesign, CircuitSpec)> {
    if !(0.0..=std::f64::consts::FRAC_PI_4 + 1e-12).contains(&alpha)
        || beta < -1e-15
        || beta > alpha + 1e-12
    {
        return Err(Error::AngleOrder { alpha, beta });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            name: "p",
            value: p,
            expected: "[0, 1]",
        });
    }
    let same_angle = (alpha - beta).abs() < 1e-15;
    let k1 = if same_angle {
        1.0
    } else if beta.sin().abs() < 1e-15 {
        0.0
    } else {
        (beta.sin() / alpha.sin()).powi(2)
    };
    let k2 = if same_angle {
        1.0
    } else {
        (alpha.cos() / beta.cos()).powi(2)
    };

    // Pure targets need no second path and no filter.
    if p >= 1.0 - 1e-12 {
        let design = TwoStateDesign {
            alpha,
            beta,
            p_target: p,
            k1,
            k2,
            chosen_initial: Initial::PhiAlpha,
            threshold: 1.0,
            eta12: 1.0,
            success: 1.0,
        };
        return Ok((design, CircuitSpec::trivial(alpha)));
    }
    if p <= 1e-12 {
        let design = TwoStateDesign {
            alpha,
            beta,
            p_target: p,
            k1,
            k2,
            chosen_initial: Initial::PhiBeta,
            threshold: 0.0,
            eta12: 1.0,
            success: 1.0,
        };
        return Ok((design, CircuitSpec::trivial(beta)));
    }

    let a = (1.0 - p) / p;
    let (chosen_initial, threshold) = choose_initial(k1, k2, p)?;
    let (eta12, success) = optimal_two(k1.max(1e-300), k2, a, chosen_initial)?;

    let mut circuit = match chosen_initial {
        Initial::PhiBeta => {
            let mut c = CircuitSpec::trivial(beta);
            c.filters
                .insert(1, design_filter(alpha, beta, FilterDirection::Raise)?);
            c
        }
        Initial::PhiAlpha => {
            let mut c = CircuitSpec::trivial(alpha);
            if !same_angle {
                c.filters
                    .insert(2, design_filter(alpha, beta, FilterDirection::Lower)?);
            }
            c
        }
    };
    circuit.etas = [1.0, 1.0, eta12, 1.0, eta12, 1.0];

    let design = TwoStateDesign {
        alpha,
        beta,
        p_target: p,
        k1,
        k2,
        chosen_initial,
        threshold,
        eta12,
        success,
    };
    Ok((design, circuit))
}

/// Two-component design for a rank-restricted density matrix: the
/// eigenbranches provide the two pure components, with their local
/// unitaries attached to the circuit paths.
pub fn design_two_from_rho(rho: &DensityMatrix) -> Result<(TwoStateDesign, CircuitSpec)> {
    let eig = rho.eigensystem();
    let rank = eig.values.iter().filter(|&&l| l > WEIGHT_CUTOFF).count();
    if rank > 2 {
        return Err(Error::InvalidRank(rank));
    }
    let branch = |k: usize| {
        let col = eig.vector(k);
        crate::linalg::PureState::new([col[0], col[1], col[2], col[3]])
    };
    let psi0 = branch(0)?;
    let form0 = schmidt_extract(&psi0);
    let (p, form_psi, form_phi) = if rank == 1 {
        (1.0, form0.clone(), form0)
    } else {
        let psi1 = branch(1)?;
        let form1 = schmidt_extract(&psi1);
        if form0.theta >= form1.theta {
            (eig.values[0], form0, form1)
        } else {
            (eig.values[1], form1, form0)
        }
    };
    let (design, mut circuit) = design_two(form_psi.theta, form_phi.theta, p.clamp(0.0, 1.0))?;
    // Path 1 always carries the alpha component psi and path 2 the beta
    // component phi, except that a pure phi target collapses onto path 1.
    if design.p_target <= 1e-12 {
        circuit.sprs.insert(
            1,
            SprPair {
                u: form_phi.u.clone(),
                v: form_phi.v.clone(),
            },
        );
    } else {
        circuit.sprs.insert(
            1,
            SprPair {
                u: form_psi.u.clone(),
                v: form_psi.v.clone(),
            },
        );
        circuit.sprs.insert(
            2,
            SprPair {
                u: form_phi.u.clone(),
                v: form_phi.v.clone(),
            },
        );
    }
    Ok((design, circuit))
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Sweep axis for figure-reproduction data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Un-optimized success vs the first transmission, one curve pair per A.
    Eta1,
    /// Optimal success vs the component ratio A.
    RatioA,
    /// Optimal success vs beta at fixed alpha, one curve pair per A.
    Beta,
}

/// Parameters shared by the sweep kinds; unused fields are ignored per axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepParams {
    pub k1: f64,
    pub k2: f64,
    pub alpha: f64,
    pub a_values: Vec<f64>,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            k1: 0.8,
            k2: 0.7,
            alpha: 0.7,
            a_values: vec![1e4, 1.0, 1e-4],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Curve {
    pub label: String,
    pub values: Vec<f64>,
}

/// Axis values plus one or more success-probability curves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: String,
    pub values: Vec<f64>,
    pub curves: Vec<Curve>,
    pub metadata: Vec<(String, String)>,
}

pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1).max(1) as f64)
        .collect()
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (llo + (lhi - llo) * k as f64 / (n - 1).max(1) as f64).exp())
        .collect()
}

/// Evaluate the requested sweep on an ascending grid.
pub fn sweep(axis: SweepAxis, params: &SweepParams, grid: &[f64]) -> Result<SweepTable> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut metadata = vec![];
    let mut curves = Vec::new();
    let axis_name;
    match axis {
        SweepAxis::Eta1 => {
            axis_name = "eta1";
            metadata.push(("k1".to_string(), params.k1.to_string()));
            metadata.push(("k2".to_string(), params.k2.to_string()));
            for &a in &params.a_values {
                curves.push(Curve {
                    label: format!("P(A={a:e})"),
                    values: grid
                        .iter()
                        .map(|&e| success_p_at(e, params.k1, a))
                        .collect(),
                });
                curves.push(Curve {
                    label: format!("Pprime(A={a:e})"),
                    values: grid
                        .iter()
                        .map(|&e| success_pprime_at(e, params.k2, a))
                        .collect(),
                });
            }
        }
        SweepAxis::RatioA => {
            axis_name = "A";
            metadata.push(("k1".to_string(), params.k1.to_string()));
            metadata.push(("k2".to_string(), params.k2.to_string()));
            let mut p_curve = Vec::with_capacity(grid.len());
            let mut pp_curve = Vec::with_capacity(grid.len());
            for &a in grid {
                p_curve.push(optimal_two(params.k1, params.k2, a, Initial::PhiBeta)?.1);
                pp_curve.push(optimal_two(params.k1, params.k2, a, Initial::PhiAlpha)?.1);
            }
            curves.push(Curve {
                label: "P".to_string(),
                values: p_curve,
            });
            curves.push(Curve {
                label: "Pprime".to_string(),
                values: pp_curve,
            });
        }
        SweepAxis::Beta => {
            axis_name = "beta";
            metadata.push(("alpha".to_string(), params.alpha.to_string()));
            for &a in &params.a_values {
                let mut p_curve = Vec::with_capacity(grid.len());
                let mut pp_curve = Vec::with_capacity(grid.len());
                for &beta in grid {
                    if beta > params.alpha + 1e-12 {
                        return Err(Error::AngleOrder {
                            alpha: params.alpha,
                            beta,
                        });
                    }
                    let k1 = (beta.sin() / params.alpha.sin()).powi(2);
                    let k2 = (params.alpha.cos() / beta.cos()).powi(2);
                    // k1 = 0 at beta = 0 means the raise route never succeeds.
                    p_curve.push(if k1 > 0.0 {
                        optimal_two(k1, k2, a, Initial::PhiBeta)?.1
                    } else {
                        0.0
                    });
                    pp_curve.push(optimal_two(k1.max(1e-300), k2, a, Initial::PhiAlpha)?.1);
                }
                curves.push(Curve {
                    label: format!("P(A={a:e})"),
                    values: p_curve,
                });
                curves.push(Curve {
                    label: format!("Pprime(A={a:e})"),
                    values: pp_curve,
                });
            }
        }
    }
    Ok(SweepTable {
        axis: axis_name.to_string(),
        values: grid.to_vec(),
        curves,
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{evolve, postselect_coincidence};
    use crate::linalg::{fidelity, random_density, DensityMatrix, PureState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_4;

    fn random_weights(rng: &mut ChaCha8Rng, nonzero: usize) -> [f64; 4] {
        let mut w = [0.0; 4];
        loop {
            let mut sum = 0.0;
            for slot in w.iter_mut().take(nonzero) {
                *slot = rng.random::<f64>().max(1e-6);
                sum += *slot;
            }
            for slot in w.iter_mut().take(nonzero) {
                *slot /= sum;
            }
            w.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if nonzero == 1 || w[nonzero - 1] > 1e-4 {
                return w;
            }
        }
    }

    #[test]
    fn path_probabilities_examples() {
        assert_eq!(path_probabilities(&[1.0; 6]).unwrap(), [1.0, 0.0, 0.0, 0.0]);
        let uniform = path_probabilities(&[0.5; 6]).unwrap();
        for p in uniform {
            assert!((p - 1.0 / 16.0).abs() < 1e-15);
        }
        let partial = path_probabilities(&[1.0, 1.0, 0.5, 1.0, 0.5, 1.0]).unwrap();
        assert!((partial[0] - 0.25).abs() < 1e-15);
        assert!((partial[1] - 0.25).abs() < 1e-15);
        assert_eq!(partial[2], 0.0);
        assert_eq!(partial[3], 0.0);
    }

    #[test]
    fn optimal_case_three_is_trivial() {
        let opt = optimal_general(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(opt.case_id, CaseId::Three);
        assert_eq!(opt.etas, [1.0; 6]);
        assert_eq!(opt.f_optimal, 1.0);
    }

    #[test]
    fn optimal_case_two_balanced() {
        let opt = optimal_general(&[0.5, 0.5, 0.0, 0.0]).unwrap();
        assert_eq!(opt.case_id, CaseId::Two);
        assert!((opt.f_optimal - 0.5).abs() < 1e-12);
        assert!((opt.etas[2] - 0.5).abs() < 1e-12);
        assert!((opt.etas[4] - 0.5).abs() < 1e-12);
        assert_eq!(opt.etas[0], 1.0);
    }

    #[test]
    fn optimal_case_one_uniform() {
        let opt = optimal_general(&[0.25; 4]).unwrap();
        assert_eq!(opt.case_id, CaseId::One);
        assert!((opt.f_optimal - 0.25).abs() < 1e-12);
        for eta in opt.etas {
            assert!((eta - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn optimal_rejects_unsorted_weights() {
        assert!(matches!(
            optimal_general(&[0.2, 0.5, 0.2, 0.1]),
            Err(Error::UnsortedWeights)
        ));
    }

    #[test]
    fn normalized_path_probabilities_reproduce_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..200 {
            let nonzero = 1 + trial % 4;
            let w = random_weights(&mut rng, nonzero);
            let opt = optimal_general(&w).unwrap();
            let p = path_probabilities(&opt.etas).unwrap();
            let total: f64 = p.iter().sum();
            assert!((total - opt.f_optimal).abs() < 1e-12, "trial {trial}");
            for k in 0..4 {
                assert!(
                    (p[k] / total - w[k]).abs() < 1e-9,
                    "trial {trial} path {k}: {} vs {}",
                    p[k] / total,
                    w[k]
                );
            }
        }
    }

    #[test]
    fn closed_form_matches_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..40 {
            let nonzero = 1 + trial % 4;
            let w = random_weights(&mut rng, nonzero);
            let opt = optimal_general(&w).unwrap();
            let oracle = brute_force_optimal(&w, 1e-3).unwrap();
            assert!(
                (opt.f_optimal - oracle).abs() <= 1e-2,
                "trial {trial}: closed {} vs oracle {}",
                opt.f_optimal,
                oracle
            );
            // The oracle never beats the closed form beyond grid error.
            assert!(oracle <= opt.f_optimal + 1e-9, "trial {trial}");
        }
    }

    #[test]
    fn design_bell_state_is_trivial() {
        let rho = PureState::schmidt(FRAC_PI_4).density();
        let design = design_general(&rho).unwrap();
        assert_eq!(design.case_id, CaseId::Three);
        assert!((design.f_optimal - 1.0).abs() < 1e-12);
        let (out, f) = postselect_coincidence(&evolve(&design.circuit).unwrap()).unwrap();
        assert!((f - 1.0).abs() < 1e-9);
        assert!(fidelity(&out, &rho) > 1.0 - 1e-9);
    }

    #[test]
    fn design_werner_closes_end_to_end() {
        let rho = DensityMatrix::werner(0.8).unwrap();
        let design = design_general(&rho).unwrap();
        let (out, f) = postselect_coincidence(&evolve(&design.circuit).unwrap()).unwrap();
        assert!(
            fidelity(&out, &rho) >= 1.0 - 1e-9,
            "fidelity {}",
            fidelity(&out, &rho)
        );
        assert!((f - design.f_optimal).abs() <= 1e-9);
    }

    #[test]
    fn design_rank_two_mixture_uses_case_two() {
        // Mixture of two Bell states.
        let phi_plus = PureState::schmidt(FRAC_PI_4);
        let phi_minus = PureState::new([
            num_complex::Complex::new(FRAC_PI_4.cos(), 0.0),
            crate::linalg::ZERO,
            crate::linalg::ZERO,
            num_complex::Complex::new(-FRAC_PI_4.sin(), 0.0),
        ])
        .unwrap();
        let rho = DensityMatrix::mixture(&[(0.7, phi_plus), (0.3, phi_minus)]).unwrap();
        let design = design_general(&rho).unwrap();
        assert_eq!(design.case_id, CaseId::Two);
        let (out, f) = postselect_coincidence(&evolve(&design.circuit).unwrap()).unwrap();
        assert!(fidelity(&out, &rho) >= 1.0 - 1e-9);
        assert!((f - design.f_optimal).abs() <= 1e-9);
        let mut weights = [0.0; 4];
        for (k, b) in design.decomposition.branches.iter().enumerate() {
            weights[k] = b.p;
        }
        let oracle = brute_force_optimal(&weights, 1e-3).unwrap();
        assert!((design.f_optimal - oracle).abs() <= 1e-2);
    }

    #[test]
    fn external_decomposition_feeds_the_designer() {
        // The eigenbranches of a Bell-diagonal rank-2 state form a valid
        // equal-angle decomposition on their own; the designer should accept
        // it and realize the corresponding (non-optimal-decomposition)
        // mixture exactly.
        let phi_plus = PureState::schmidt(FRAC_PI_4);
        let phi_minus = PureState::new([
            num_complex::Complex::new(FRAC_PI_4.cos(), 0.0),
            crate::linalg::ZERO,
            crate::linalg::ZERO,
            num_complex::Complex::new(-FRAC_PI_4.sin(), 0.0),
        ])
        .unwrap();
        let rho =
            DensityMatrix::mixture(&[(0.7, phi_plus.clone()), (0.3, phi_minus.clone())]).unwrap();
        let external = crate::entanglement::Decomposition {
            branches: vec![
                crate::entanglement::Branch {
                    p: 0.3,
                    state: phi_minus,
                },
                crate::entanglement::Branch {
                    p: 0.7,
                    state: phi_plus,
                },
            ],
        };
        let design = super::design_from_decomposition(external).unwrap();
        // Branches get sorted, so the heavier component leads.
        assert!((design.decomposition.branches[0].p - 0.7).abs() < 1e-12);
        let (out, f) = postselect_coincidence(&evolve(&design.circuit).unwrap()).unwrap();
        assert!(fidelity(&out, &rho) >= 1.0 - 1e-9);
        assert!((f - design.f_optimal).abs() <= 1e-9);
        // Both components are maximally entangled, so this decomposition has
        // a different optimum than the equal-concurrence one.
        let wootters = design_general(&rho).unwrap();
        assert!(design.f_optimal > wootters.f_optimal);
    }

    #[test]
    fn design_separable_target_uses_product_source() {
        // Mixture of two product states: zero concurrence, so the source
        // angle is zero and every path carries a product state.
        let a = PureState::basis(0);
        let b = PureState::basis(3);
        let rho = DensityMatrix::mixture(&[(0.6, a), (0.4, b)]).unwrap();
        let design = design_general(&rho).unwrap();
        assert!(design.theta0.abs() < 1e-9);
        let (out, f) = postselect_coincidence(&evolve(&design.circuit).unwrap()).unwrap();
        assert!(fidelity(&out, &rho) >= 1.0 - 1e-9);
        assert!((f - design.f_optimal).abs() <= 1e-9);
    }

    #[test]
    fn design_rank_three_separable_target_closes() {
        // Rank-3 separable states decompose into four branches; the design
        // must still close end to end through four paths.
        let mut rho = None;
        for seed in 0..200u64 {
            let cand = random_density(3, seed).unwrap();
            if crate::entanglement::concurrence(&cand) < 1e-12 {
                rho = Some(cand);
                break;
            }
        }
        let Some(rho) = rho else {
            // Random rank-3 states are rarely separable; mix one by hand.
            let m = DensityMatrix::mixture(&[
                (0.5, PureState::basis(0)),
                (0.3, PureState::basis(1)),
                (0.2, PureState::basis(3)),
            ])
            .unwrap();
            let design = design_general(&m).unwrap();
            let (out, f) = postselect_coincidence(&evolve(&design.circuit).unwrap()).unwrap();
            assert!(fidelity(&out, &m) >= 1.0 - 1e-9);
            assert!((f - design.f_optimal).abs() <= 1e-9);
            return;
        };
        let design = design_general(&rho).unwrap();
        let (out, f) = postselect_coincidence(&evolve(&design.circuit).unwrap()).unwrap();
        assert!(fidelity(&out, &rho) >= 1.0 - 1e-9);
        assert!((f - design.f_optimal).abs() <= 1e-9);
    }

    #[test]
    fn design_random_targets_close_end_to_end() {
        for seed in 0..25u64 {
            let rank = 1 + (seed % 4) as usize;
            let rho = random_density(rank, seed).unwrap();
            let design = design_general(&rho).unwrap();
            let (out, f) = postselect_coincidence(&evolve(&design.circuit).unwrap()).unwrap();
            let fid = fidelity(&out, &rho);
            assert!(fid >= 1.0 - 1e-9, "seed {seed}: fidelity {fid}");
            assert!(
                (f - design.f_optimal).abs() <= 1e-9,
                "seed {seed}: F {f} vs predicted {}",
                design.f_optimal
            );
        }
    }

    #[test]
    fn optimal_two_limits() {
        let (eta, p) = optimal_two(0.8, 0.7, 0.0, Initial::PhiBeta).unwrap();
        assert_eq!(eta, 1.0);
        assert!((p - 0.8).abs() < 1e-15);
        let (eta, pp) = optimal_two(0.8, 0.7, 0.0, Initial::PhiAlpha).unwrap();
        assert_eq!(eta, 1.0);
        assert!((pp - 1.0).abs() < 1e-15);
        let (_, p_inf) = optimal_two(0.8, 0.7, 1e8, Initial::PhiBeta).unwrap();
        assert!((p_inf - 1.0).abs() < 1e-3);
        let (_, pp_inf) = optimal_two(0.8, 0.7, 1e8, Initial::PhiAlpha).unwrap();
        assert!((pp_inf - 0.7).abs() < 1e-3);
    }

    #[test]
    fn optimal_two_frozen_example() {
        // k1 = 0.8, A = 1: P = 1.6 / (1 + sqrt(0.8))^2.
        let (eta, p) = optimal_two(0.8, 0.7, 1.0, Initial::PhiBeta).unwrap();
        let expected = 1.6 / (1.0 + 0.8f64.sqrt()).powi(2);
        assert!((p - expected).abs() < 1e-15);
        assert!((p - 0.4458).abs() < 1e-4);
        assert!((eta - 1.0 / (1.0 + 0.8f64.sqrt())).abs() < 1e-15);
        // Constraint closure: (1-e)^2 = A k1 e^2.
        assert!(((1.0 - eta).powi(2) - 0.8 * eta * eta).abs() < 1e-12);
    }

    #[test]
    fn optimal_two_beats_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let k1 = 0.05 + 0.95 * rng.random::<f64>();
            let k2 = 0.05 + 0.95 * rng.random::<f64>();
            let a = 10f64.powf(4.0 * (rng.random::<f64>() - 0.5));
            let (_, p_opt) = optimal_two(k1, k2, a, Initial::PhiBeta).unwrap();
            let (_, pp_opt) = optimal_two(k1, k2, a, Initial::PhiAlpha).unwrap();
            let mut p_grid = 0.0f64;
            let mut pp_grid = 0.0f64;
            for k in 1..10_000 {
                let eta = k as f64 / 10_000.0;
                p_grid = p_grid.max(success_p_at(eta, k1, a));
                pp_grid = pp_grid.max(success_pprime_at(eta, k2, a));
            }
            assert!(
                p_opt >= p_grid - 1e-6,
                "trial {trial}: P {p_opt} < {p_grid}"
            );
            assert!(p_opt <= p_grid + 1e-4, "trial {trial}");
            assert!(pp_opt >= pp_grid - 1e-6, "trial {trial}");
            assert!(pp_opt <= pp_grid + 1e-4, "trial {trial}");
        }
    }

    #[test]
    fn choose_initial_symmetric_threshold() {
        let (_, threshold) = choose_initial(0.6, 0.6, 0.3).unwrap();
        assert!((threshold - 0.5).abs() < 1e-12);
        let (_, threshold) = choose_initial(1.0, 1.0, 0.3).unwrap();
        assert!((threshold - 0.5).abs() < 1e-12);
    }

    #[test]
    fn choose_initial_examples() {
        let (initial, _) = choose_initial(0.8, 0.7, 0.9).unwrap();
        assert_eq!(initial, Initial::PhiAlpha);
        let (initial, threshold) = choose_initial(0.8, 0.7, 0.0).unwrap();
        assert!(threshold > 0.0);
        assert_eq!(initial, Initial::PhiBeta);
        let (initial, _) = choose_initial(0.0, 0.5, 0.0).unwrap();
        assert_eq!(initial, Initial::PhiAlpha);
    }

    #[test]
    fn choose_initial_agrees_with_direct_comparison() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..100 {
            let k1 = 0.05 + 0.95 * rng.random::<f64>();
            let k2 = 0.05 + 0.95 * rng.random::<f64>();
            let p = rng.random::<f64>().clamp(1e-6, 1.0 - 1e-6);
            let a = (1.0 - p) / p;
            let (initial, _) = choose_initial(k1, k2, p).unwrap();
            let (_, big_p) = optimal_two(k1, k2, a, Initial::PhiBeta).unwrap();
            let (_, big_pp) = optimal_two(k1, k2, a, Initial::PhiAlpha).unwrap();
            let direct = if big_p >= big_pp {
                Initial::PhiBeta
            } else {
                Initial::PhiAlpha
            };
            // Ties at the threshold are a measure-zero non-issue for random p.
            assert_eq!(initial, direct, "trial {trial}: P {big_p} vs P' {big_pp}");
        }
    }

    #[test]
    fn fixed_points_match_quoted_values() {
        assert_eq!(fixed_point(1.0, SuccessBranch::P), (0.5, 0.5));
        let (eta, value) = fixed_point(0.8, SuccessBranch::P);
        assert!((eta - 1.0 / 1.8).abs() < 1e-15);
        assert!((value - 0.8 / 1.8).abs() < 1e-15);
        let (eta, value) = fixed_point(0.7, SuccessBranch::PPrime);
        assert!((eta - 0.7 / 1.7).abs() < 1e-15);
        assert!((value - 0.7 / 1.7).abs() < 1e-15);
    }

    #[test]
    fn fixed_points_are_ratio_independent() {
        for &a in &[1e-4, 1e-2, 1.0, 1e2, 1e4] {
            let (eta, value) = fixed_point(0.8, SuccessBranch::P);
            assert!((success_p_at(eta, 0.8, a) - value).abs() < 1e-12, "A = {a}");
            let (eta, value) = fixed_point(0.7, SuccessBranch::PPrime);
            assert!(
                (success_pprime_at(eta, 0.7, a) - value).abs() < 1e-12,
                "A = {a}"
            );
        }
    }

    #[test]
    fn sweep_ratio_axis_has_interior_minima() {
        let params = SweepParams::default();
        let grid = log_grid(1e-4, 1e4, 500);
        let table = sweep(SweepAxis::RatioA, &params, &grid).unwrap();
        let p = &table.curves[0].values;
        let pp = &table.curves[1].values;
        let argmin = |v: &[f64]| {
            v.iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
        };
        let p_min_at = grid[argmin(p)];
        let pp_min_at = grid[argmin(pp)];
        // Minima at A = k1 and A = 1/k2 within one log-grid step.
        let step = (grid[1] / grid[0]).ln();
        assert!(
            (p_min_at.ln() - 0.8f64.ln()).abs() <= step * 1.01,
            "P min at {p_min_at}"
        );
        assert!(
            (pp_min_at.ln() - (1.0 / 0.7f64).ln()).abs() <= step * 1.01,
            "P' min at {pp_min_at}"
        );
    }

    #[test]
    fn sweep_beta_axis_ordering() {
        let mut params = SweepParams::default();
        params.alpha = 0.7;
        params.a_values = vec![1e-3];
        let grid = linear_grid(0.0, 0.7, 300);
        let table = sweep(SweepAxis::Beta, &params, &grid).unwrap();
        let p = &table.curves[0].values;
        let pp = &table.curves[1].values;
        // Small A: P stays below P' for every beta.
        for k in 0..grid.len() {
            assert!(p[k] <= pp[k] + 1e-12, "beta {}", grid[k]);
        }

        params.a_values = vec![1e3];
        let table = sweep(SweepAxis::Beta, &params, &grid).unwrap();
        let p = &table.curves[0].values;
        let pp = &table.curves[1].values;
        // Large A: the curves cross somewhere inside.
        let crossings = (1..grid.len())
            .filter(|&k| (p[k] - pp[k]).signum() != (p[k - 1] - pp[k - 1]).signum())
            .count();
        assert!(crossings >= 1);
    }

    #[test]
    fn sweep_eta_axis_peaks_at_closed_form_eta() {
        let params = SweepParams {
            a_values: vec![1.0],
            ..Default::default()
        };
        let grid = linear_grid(0.0, 1.0, 2001);
        let table = sweep(SweepAxis::Eta1, &params, &grid).unwrap();
        let p = &table.curves[0].values;
        let argmax = p
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let (eta_opt, p_opt) = optimal_two(0.8, 0.7, 1.0, Initial::PhiBeta).unwrap();
        assert!((grid[argmax] - eta_opt).abs() < 1e-3);
        assert!((p[argmax] - p_opt).abs() < 1e-6);
    }

    #[test]
    fn design_two_pure_targets() {
        let (design, circuit) = design_two(0.6, 0.3, 1.0).unwrap();
        assert_eq!(design.success, 1.0);
        let (out, f) = postselect_coincidence(&evolve(&circuit).unwrap()).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
        assert!(fidelity(&out, &PureState::schmidt(0.6).density()) > 1.0 - 1e-10);

        let (design, circuit) = design_two(0.6, 0.3, 0.0).unwrap();
        assert_eq!(design.success, 1.0);
        let (out, _) = postselect_coincidence(&evolve(&circuit).unwrap()).unwrap();
        assert!(fidelity(&out, &PureState::schmidt(0.3).density()) > 1.0 - 1e-10);
    }

    #[test]
    fn design_two_simulates_to_target() {
        for &(alpha, beta, p) in &[
            (0.7, 0.3, 0.4),
            (0.7, 0.3, 0.9),
            (FRAC_PI_4, 0.1, 0.55),
            (0.5, 0.5, 0.25),
        ] {
            let (design, circuit) = design_two(alpha, beta, p).unwrap();
            let (out, f) = postselect_coincidence(&evolve(&circuit).unwrap()).unwrap();
            let target = DensityMatrix::mixture(&[
                (p, PureState::schmidt(alpha)),
                (1.0 - p, PureState::schmidt(beta)),
            ])
            .unwrap();
            let fid = fidelity(&out, &target);
            assert!(fid >= 1.0 - 1e-9, "({alpha},{beta},{p}): fidelity {fid}");
            assert!(
                (f - design.success).abs() <= 1e-9,
                "({alpha},{beta},{p}): F {f} vs predicted {}",
                design.success
            );
        }
    }

    #[test]
    fn design_two_from_rank_two_rho() {
        let target = DensityMatrix::mixture(&[
            (0.65, PureState::schmidt(0.6)),
            (0.35, PureState::schmidt(0.2)),
        ])
        .unwrap();
        let (design, circuit) = design_two_from_rho(&target).unwrap();
        let (out, f) = postselect_coincidence(&evolve(&circuit).unwrap()).unwrap();
        let fid = fidelity(&out, &target);
        assert!(fid >= 1.0 - 1e-9, "fidelity {fid}");
        assert!((f - design.success).abs() <= 1e-9);
    }

    #[test]
    fn design_two_from_rho_rejects_high_rank() {
        let rho = random_density(3, 5).unwrap();
        assert!(matches!(
            design_two_from_rho(&rho),
            Err(Error::InvalidRank(3))
        ));
    }
}
