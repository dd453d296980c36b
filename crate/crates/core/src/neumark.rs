// Copyright 2026 The acausal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Circuit synthesis for an arbitrary process matrix.
//!
//! For `X = α Wᵀ` with `α ≤ 1/λ_max(W)` and `X♯ = 𝟙 − X`, the qubit-ancilla
//! unitary
//!
//! ```text
//! V = √X ⊗ |0⟩⟨0| − √X♯ ⊗ |0⟩⟨1| + √X♯ ⊗ |1⟩⟨0| + √X ⊗ |1⟩⟨1|
//! ```
//!
//! acts on `[A2, B2, E1, E2, R]`. Alice and Bob act on halves of the maximally
//! entangled pairs `A1 E1` and `B1 E2`, the register `R` starts in `|0⟩`, and
//! the outcome `R = 0` occurs with probability `α / d_{A1B1}` independently of
//! the instruments. Conditioned on it the parties see exactly `W`.

use serde::{Deserialize, Serialize};

use crate::choi::Instrument;
use crate::circuit::{brute_force_joint, Circuit, JointTable, ParallelCircuit};
use crate::comb::phi_plus;
use crate::error::{Error, Result};
use crate::process::ProcessMatrix;
use crate::tensor::{herm_eig_matrix, labels, LabeledOperator, Matrix, Subsystem, C64};

/// Smallest `λ_max` accepted by [`synthesize`].
pub const DEGENERATE_TOL: f64 = 1e-12;
/// Smallest failure probability for which a complement exists.
pub const COMPLEMENT_TOL: f64 = 1e-12;

/// Name of the measured ancilla.
pub const ANCILLA: &str = "R";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    /// `φ⁺_{A1E1}/d_{A1} ⊗ φ⁺_{B1E2}/d_{B1} ⊗ |0⟩⟨0|_R`.
    pub initial_state: LabeledOperator,
    /// Unitary on `[A2, B2, E1, E2, R]`.
    #[serde(rename = "V")]
    pub v: LabeledOperator,
    /// Always `"R"`; the success projector is `|0⟩⟨0|` on it.
    pub projector_label: String,
    pub p_succ: f64,
    pub lambda_max: f64,
    pub alpha: f64,
}

impl SynthesisResult {
    /// `|0⟩⟨0|_R`.
    pub fn projector(&self) -> LabeledOperator {
        ancilla_projector(0)
    }

    /// The circuit as a parallel circuit with environment `[E1, E2, R]` and
    /// outcomes `R = 0` (success) and `R = 1`.
    pub fn to_parallel_circuit(&self) -> Result<ParallelCircuit> {
        let env = LabeledOperator::identity(vec![
            Subsystem::new("E1", self.initial_state.dim_of("E1")?),
            Subsystem::new("E2", self.initial_state.dim_of("E2")?),
        ])?;
        let projectors = vec![env.tensor(&ancilla_projector(0))?, env.tensor(&ancilla_projector(1))?];
        ParallelCircuit::new(self.initial_state.clone(), self.v.clone(), projectors)
    }
}

fn ancilla_projector(k: usize) -> LabeledOperator {
    let mut m = Matrix::zeros(2, 2);
    m[(k, k)] = C64::new(1.0, 0.0);
    LabeledOperator::new(labels(&[(ANCILLA, 2)]), m).expect("2x2 on a qubit")
}

/// `1/(d_{A1B1} λ_max(W))`.
pub fn success_probability(w: &ProcessMatrix) -> f64 {
    1.0 / (w.d_a1b1() as f64 * w.lambda_max())
}

/// Synthesis with the optimal `α = 1/λ_max`.
pub fn synthesize(w: &ProcessMatrix) -> Result<SynthesisResult> {
    let lambda_max = w.lambda_max();
    if lambda_max < DEGENERATE_TOL {
        return Err(Error::DegenerateProcess(lambda_max));
    }
    build(w, 1.0 / lambda_max, lambda_max)
}

/// Synthesis with a caller-chosen `0 < α ≤ 1/λ_max`.
pub fn synthesize_with_alpha(w: &ProcessMatrix, alpha: f64) -> Result<SynthesisResult> {
    let lambda_max = w.lambda_max();
    if lambda_max < DEGENERATE_TOL {
        return Err(Error::DegenerateProcess(lambda_max));
    }
    if !(alpha > 0.0 && alpha * lambda_max <= 1.0 + 1e-12) {
        return Err(Error::BadParameter(format!("α must lie in (0, 1/λ_max] = (0, {:.6}], got {alpha}", 1.0 / lambda_max)));
    }
    build(w, alpha, lambda_max)
}

/// `X = α Wᵀ` with `A1 → E1`, `B1 → E2`, on `[B2, E2, A2, E1]`.
fn target_x(w: &ProcessMatrix, alpha: f64) -> Result<LabeledOperator> {
    Ok(w.op().transpose().relabel_many(&[("A1", "E1"), ("B1", "E2")])?.scale(alpha))
}

fn build(w: &ProcessMatrix, alpha: f64, lambda_max: f64) -> Result<SynthesisResult> {
    let x = target_x(w, alpha)?;
    let eig = herm_eig_matrix(x.matrix());
    // shared eigenbasis; eigenvalues within rounding of 0 or 1 are snapped so
    // that exact projectors keep exact square roots
    let floor = 64.0 * f64::EPSILON * eig.max().abs().max(1.0);
    let snap = |l: f64| {
        if l <= floor {
            0.0
        } else if l >= 1.0 - floor {
            1.0
        } else {
            l
        }
    };
    let sqrt_x = eig.map(|l| snap(l).sqrt());
    let sqrt_xs = eig.map(|l| (1.0 - snap(l)).sqrt());
    let e = |r: usize, c: usize| {
        let mut m = Matrix::zeros(2, 2);
        m[(r, c)] = C64::new(1.0, 0.0);
        m
    };
    let v = sqrt_x.kronecker(&e(0, 0)) - sqrt_xs.kronecker(&e(0, 1)) + sqrt_xs.kronecker(&e(1, 0)) + sqrt_x.kronecker(&e(1, 1));
    let mut v_labels = x.labels().to_vec();
    v_labels.push(Subsystem::new(ANCILLA, 2));
    let v = LabeledOperator::new(v_labels, v)?.permute(&["A2", "B2", "E1", "E2", ANCILLA])?;

    let (da1, db1) = (w.op().dim_of("A1")?, w.op().dim_of("B1")?);
    let initial_state = phi_plus("A1", "E1", da1)?
        .scale(1.0 / da1 as f64)
        .tensor(&phi_plus("B1", "E2", db1)?.scale(1.0 / db1 as f64))?
        .tensor(&ancilla_projector(0))?
        .permute(&["A1", "B1", "E1", "E2", ANCILLA])?;
    Ok(SynthesisResult {
        initial_state,
        v,
        projector_label: ANCILLA.into(),
        p_succ: alpha / (da1 * db1) as f64,
        lambda_max,
        alpha,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DilationReport {
    /// `‖VV† − 𝟙‖_max`.
    pub unitarity: f64,
    /// `‖⟨0|V|0⟩_R − √(α Wᵀ)‖_max` with the square root taken independently.
    pub block: f64,
    /// `‖(⟨0|V|0⟩_R)² − α Wᵀ‖_max`.
    pub block_square: f64,
    /// `λ_min(𝟙 − α Wᵀ)`.
    pub complement_min_eigenvalue: f64,
}

impl DilationReport {
    pub fn ok(&self, tol: f64) -> bool {
        self.unitarity < tol && self.block < tol && self.block_square < tol && self.complement_min_eigenvalue > -tol
    }
}

/// Residuals of the dilation conditions of `res` against `w`.
pub fn verify_dilation(res: &SynthesisResult, w: &ProcessMatrix) -> Result<DilationReport> {
    let x = target_x(w, res.alpha)?;
    let order: Vec<&str> = x.names();
    let mut full = order.clone();
    full.push(ANCILLA);
    let v = res.v.permute(&full)?;
    let d = x.dim();
    // ⟨0|V|0⟩ on the last (ancilla) factor
    let block = Matrix::from_fn(d, d, |r, c| v.matrix()[(2 * r, 2 * c)]);
    let block = LabeledOperator::new(x.labels().to_vec(), block)?;
    let id = LabeledOperator::identity(x.labels().to_vec())?;
    Ok(DilationReport {
        unitarity: res.v.unitarity_residual(),
        block: block.max_abs_diff(&x.psd_sqrt()?)?,
        block_square: block.mul(&block)?.max_abs_diff(&x)?,
        complement_min_eigenvalue: id.sub(&x)?.min_eigenvalue()?,
    })
}

/// Joint distribution `p(i, j, μ)` of the synthesized circuit, `μ = 0` being success.
pub fn simulate_synthesized(res: &SynthesisResult, inst_a: &Instrument, inst_b: &Instrument) -> Result<JointTable> {
    brute_force_joint(&Circuit::Parallel(res.to_parallel_circuit()?), inst_a, inst_b)
}

/// `W♯ = (𝟙/d_{A1B1} − p W)/(1 − p)`, the process seen on the failure branch.
pub fn complementary_process(res: &SynthesisResult, w: &ProcessMatrix) -> Result<ProcessMatrix> {
    let q = 1.0 - res.p_succ;
    if q < COMPLEMENT_TOL {
        return Err(Error::NoComplement);
    }
    let id = LabeledOperator::identity(w.op().labels().to_vec())?.scale(1.0 / w.d_a1b1() as f64);
    ProcessMatrix::new(id.sub(&w.op().scale(res.p_succ))?.scale(1.0 / q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choi::random_instrument_on;
    use crate::circuit::{average_process, conditioned, parallel_conditioned_choi};
    use crate::process::{
        from_comb, is_causally_separable, maximally_mixed_process, noisy_ocb, ocb_process, probability, random_valid_process,
        SeparabilityOptions, SeparabilityStatus, WireDims,
    };
    use crate::tensor::{op1, pauli_x, pauli_z};

    #[test]
    fn ocb_synthesis() {
        let w = ocb_process();
        let r = synthesize(&w).unwrap();
        assert!((r.alpha - 2.0).abs() < 1e-12);
        assert!((r.p_succ - 0.5).abs() < 1e-12);
        assert!((success_probability(&w) - 0.5).abs() < 1e-12);
        let rep = verify_dilation(&r, &w).unwrap();
        assert!(rep.ok(1e-10), "{rep:?}");
        // X = 2Wᵀ is a projector, so √X = X
        let x = target_x(&w, 2.0).unwrap();
        assert!(x.mul(&x).unwrap().max_abs_diff(&x).unwrap() < 1e-12);
        assert!(x.psd_sqrt().unwrap().max_abs_diff(&x).unwrap() < 1e-10);
    }

    #[test]
    fn ocb_square_root_carries_the_a2_term() {
        // √X = ½[𝟙 + (σz^{B1} σz^{A2} + σz^{B2} σx^{B1} σz^{A1})/√2] before relabeling;
        // σx is real symmetric so the transpose leaves every term unchanged.
        let w = ocb_process();
        let x = target_x(&w, 2.0).unwrap().relabel_many(&[("E1", "A1"), ("E2", "B1")]).unwrap();
        let want = w.op().scale(2.0);
        assert!(x.psd_sqrt().unwrap().max_abs_diff(&want.permute(&x.names()).unwrap()).unwrap() < 1e-10);
        let wrong = op1("B2", Matrix::identity(2, 2))
            .tensor(&op1("B1", pauli_z()))
            .unwrap()
            .tensor(&op1("A2", Matrix::identity(2, 2)))
            .unwrap()
            .tensor(&op1("A1", pauli_z()))
            .unwrap();
        let _ = pauli_x();
        let coeff = x.psd_sqrt().unwrap().trace_product(&wrong.permute(&x.names()).unwrap()).unwrap().re;
        assert!(coeff.abs() < 1e-10);
    }

    #[test]
    fn maximally_mixed_is_deterministic() {
        let w = maximally_mixed_process(WireDims::qubits()).unwrap();
        let r = synthesize(&w).unwrap();
        assert!((r.lambda_max - 0.25).abs() < 1e-12);
        assert!((r.p_succ - 1.0).abs() < 1e-12);
        assert!(matches!(complementary_process(&r, &w), Err(Error::NoComplement)));
    }

    #[test]
    fn noisy_success_probability() {
        for g in [0.0, 0.2, std::f64::consts::SQRT_2 - 1.0, 1.0, 3.0] {
            let p = success_probability(&noisy_ocb(g).unwrap());
            assert!((p - (1.0 + g) / (2.0 + g)).abs() < 1e-12, "γ = {g}");
        }
        let p = success_probability(&noisy_ocb(std::f64::consts::SQRT_2 - 1.0).unwrap());
        assert!((p - 0.58579).abs() < 1e-5);
    }

    #[test]
    fn random_unitarity_and_round_trip() {
        let dims = [WireDims::qubits(), WireDims { a1: 2, a2: 3, b1: 3, b2: 2 }];
        for seed in 0..50 {
            let w = random_valid_process(dims[seed as usize % 2], 0.9, seed).unwrap();
            let r = synthesize(&w).unwrap();
            let rep = verify_dilation(&r, &w).unwrap();
            assert!(rep.ok(1e-9), "seed {seed}: {rep:?}");
            let c = r.to_parallel_circuit().unwrap();
            let res = conditioned(&Circuit::Parallel(c.clone()), 0).unwrap();
            assert!(res.w_mu.max_abs_diff(w.op()).unwrap() < 1e-9);
            assert!((res.p_mu - r.p_succ).abs() < 1e-10);
            if seed % 2 == 0 {
                // the threaded comb is large for the mixed dimensions
                let threaded = from_comb(&parallel_conditioned_choi(&c, 0).unwrap()).unwrap().scale(1.0 / r.p_succ);
                assert!(threaded.max_abs_diff(w.op()).unwrap() < 1e-9);
            }
        }
    }

    #[test]
    fn simulation_reproduces_probabilities() {
        let w = ocb_process();
        let r = synthesize(&w).unwrap();
        for seed in 0..20 {
            let ia = random_instrument_on("A2", "A1", 2, 2, 2, seed).unwrap();
            let ib = random_instrument_on("B2", "B1", 2, 2, 3, seed + 1000).unwrap();
            let t = simulate_synthesized(&r, &ia, &ib).unwrap();
            assert!((t.total() - 1.0).abs() < 1e-10);
            assert!((t.marginal(0) - 0.5).abs() < 1e-10);
            for (i, ma) in ia.outcomes().iter().enumerate() {
                for (j, mb) in ib.outcomes().iter().enumerate() {
                    let p = probability(w.op(), ma, mb).unwrap();
                    assert!((t.get(i, j, 0) / t.marginal(0) - p).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn ocb_complement() {
        let w = ocb_process();
        let r = synthesize(&w).unwrap();
        let ws = complementary_process(&r, &w).unwrap();
        let id = LabeledOperator::identity(w.op().labels().to_vec()).unwrap();
        let want = id.scale(0.5).sub(w.op()).unwrap();
        assert!(ws.op().max_abs_diff(&want).unwrap() < 1e-12);
        let c = Circuit::Parallel(r.to_parallel_circuit().unwrap());
        let branch = conditioned(&c, 1).unwrap();
        assert!(branch.w_mu.max_abs_diff(ws.op()).unwrap() < 1e-9);
        let avg = w.op().scale(0.5).add(&ws.op().scale(0.5)).unwrap();
        assert!(avg.max_abs_diff(&id.scale(0.25)).unwrap() < 1e-12);
        assert!(average_process(&c).unwrap().max_abs_diff(&id.scale(0.25)).unwrap() < 1e-9);
        let v = is_causally_separable(ws.op(), SeparabilityOptions::default()).unwrap();
        assert_eq!(v.status, SeparabilityStatus::NonSeparable);
    }

    #[test]
    fn corrupted_sign_is_flagged() {
        // for a projector X the flipped block is still unitary, so use a mixed target
        let w = noisy_ocb(0.5).unwrap();
        let mut r = synthesize(&w).unwrap();
        let x = target_x(&w, r.alpha).unwrap();
        let mut full = x.names();
        full.push(ANCILLA);
        let mut v = r.v.permute(&full).unwrap().into_matrix();
        let d = x.dim();
        for a in 0..d {
            for b in 0..d {
                v[(2 * a + 1, 2 * b)] = -v[(2 * a + 1, 2 * b)];
            }
        }
        let names: Vec<String> = full.iter().map(|s| s.to_string()).collect();
        let labels: Vec<Subsystem> = names.iter().map(|n| Subsystem::new(n.as_str(), r.v.dim_of(n).unwrap())).collect();
        r.v = LabeledOperator::new(labels, v).unwrap();
        assert!(verify_dilation(&r, &w).unwrap().unitarity > 0.1);
    }

    #[test]
    fn alpha_option_and_errors() {
        let w = ocb_process();
        let r = synthesize_with_alpha(&w, 1.0).unwrap();
        assert!((r.p_succ - 0.25).abs() < 1e-12);
        assert!(verify_dilation(&r, &w).unwrap().ok(1e-10));
        let res = conditioned(&Circuit::Parallel(r.to_parallel_circuit().unwrap()), 0).unwrap();
        assert!(res.w_mu.max_abs_diff(w.op()).unwrap() < 1e-9);
        assert!(matches!(synthesize_with_alpha(&w, 2.5), Err(Error::BadParameter(_))));
        let text = crate::json::to_string(&r).unwrap();
        assert!(text.contains("\"projector_label\": \"R\""));
        let back: SynthesisResult = crate::json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }
}
