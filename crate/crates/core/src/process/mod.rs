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

//! Process matrices on `[B2, B1, A2, A1]`.
//!
//! A process matrix pairs with Alice's and Bob's Choi operators as
//! `ℙ = tr{W (M_Aᵀ ⊗ M_Bᵀ)}`. Validity is expressed through the generalized
//! Pauli expansion: the identity coefficient is `1/d_{A1B1}` and a term may
//! act nontrivially on `A2` only together with `B1` and without `B2` (and
//! symmetrically for `B2`).

mod separability;

pub use separability::{is_causally_separable, SeparabilityOptions, SeparabilityStatus, SeparabilityVerdict};

use serde::{Deserialize, Serialize};

use crate::choi::ChoiOperator;
use crate::comb::WIRE_LABELS;
use crate::error::{Error, Result};
use crate::random;
use crate::tensor::{op1, pauli_coefficients_unchecked, pauli_x, pauli_z, LabeledOperator, Matrix, PauliExpansion, Subsystem};

/// Tolerance used when a process matrix is accepted as valid.
pub const VALID_TOL: f64 = 1e-9;

const B2: u8 = 0b1000;
const B1: u8 = 0b0100;
const A2: u8 = 0b0010;
const A1: u8 = 0b0001;

/// Bit mask of the wires on which a Pauli term acts nontrivially, for an
/// index in `[B2, B1, A2, A1]` order.
pub fn support(index: &[usize]) -> u8 {
    let mut m = 0;
    for (k, &i) in index.iter().enumerate() {
        if i != 0 {
            m |= 1 << (3 - k);
        }
    }
    m
}

/// Terms allowed in any process matrix.
pub fn is_allowed(support: u8) -> bool {
    let a2_ok = support & A2 == 0 || (support & B1 != 0 && support & B2 == 0);
    let b2_ok = support & B2 == 0 || (support & A1 != 0 && support & A2 == 0);
    a2_ok && b2_ok
}

/// Terms allowed when Alice acts first: `B2` trivial, `A2` only with `B1`.
pub fn in_alice_first_span(support: u8) -> bool {
    support & B2 == 0 && is_allowed(support)
}

/// Terms allowed when Bob acts first.
pub fn in_bob_first_span(support: u8) -> bool {
    support & A2 == 0 && is_allowed(support)
}

/// Human-readable name of a term class, e.g. `A2A1` or `B2B1A2`.
pub fn class_name(support: u8) -> String {
    let mut s = String::new();
    for (bit, name) in [(B2, "B2"), (B1, "B1"), (A2, "A2"), (A1, "A1")] {
        if support & bit != 0 {
            s.push_str(name);
        }
    }
    if s.is_empty() {
        s.push('1');
    }
    s
}

fn check_wires(op: &LabeledOperator) -> Result<LabeledOperator> {
    if op.labels().len() != 4 || WIRE_LABELS.iter().any(|n| !op.has_label(n)) {
        return Err(Error::BadDimension(format!("process matrix needs wires {WIRE_LABELS:?}, got {:?}", op.names())));
    }
    op.permute(&WIRE_LABELS)
}

/// A validated process matrix in canonical wire order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LabeledOperator", into = "LabeledOperator")]
pub struct ProcessMatrix {
    op: LabeledOperator,
}

impl TryFrom<LabeledOperator> for ProcessMatrix {
    type Error = Error;

    fn try_from(op: LabeledOperator) -> Result<Self> {
        ProcessMatrix::new(op)
    }
}

impl From<ProcessMatrix> for LabeledOperator {
    fn from(w: ProcessMatrix) -> Self {
        w.op
    }
}

impl ProcessMatrix {
    /// Accept `op` if [`is_valid`] passes at [`VALID_TOL`].
    pub fn new(op: LabeledOperator) -> Result<Self> {
        let op = check_wires(&op).map_err(|e| Error::InvalidProcessMatrix(e.to_string()))?;
        let rep = is_valid(&op, VALID_TOL)?;
        if !rep.ok {
            return Err(Error::InvalidProcessMatrix(rep.summary()));
        }
        Ok(ProcessMatrix { op })
    }

    pub fn op(&self) -> &LabeledOperator {
        &self.op
    }

    pub fn d_a1b1(&self) -> usize {
        self.op.dim_of_all(&["A1", "B1"]).expect("wires present")
    }

    pub fn d_a2b2(&self) -> usize {
        self.op.dim_of_all(&["A2", "B2"]).expect("wires present")
    }

    pub fn lambda_max(&self) -> f64 {
        self.op.herm_eig().expect("hermitian").max()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub ok: bool,
    pub hermitian_residual: f64,
    /// `max(0, −λ_min)`.
    pub psd_residual: f64,
    pub min_eigenvalue: f64,
    /// Largest magnitude among coefficients of forbidden terms.
    pub forbidden_term_norm: f64,
    /// `|w_0 − 1/d_{A1B1}|` for the identity coefficient `w_0`.
    pub normalization_residual: f64,
    /// Forbidden term classes carrying a coefficient above the tolerance.
    pub forbidden_classes: Vec<String>,
}

impl ValidityReport {
    pub fn summary(&self) -> String {
        let mut parts = Vec::new();
        if self.hermitian_residual > 1e-10 {
            parts.push(format!("hermitian residual {:.3e}", self.hermitian_residual));
        }
        if self.psd_residual > 0.0 {
            parts.push(format!("min eigenvalue {:.3e}", self.min_eigenvalue));
        }
        if !self.forbidden_classes.is_empty() {
            parts.push(format!("forbidden terms {}", self.forbidden_classes.join(",")));
        }
        if self.normalization_residual > 0.0 {
            parts.push(format!("normalization residual {:.3e}", self.normalization_residual));
        }
        parts.join("; ")
    }
}

/// Check that an operator on the four wires is a valid process matrix.
pub fn is_valid(op: &LabeledOperator, tol: f64) -> Result<ValidityReport> {
    let op = check_wires(op)?;
    let hermitian_residual = op.hermitian_residual();
    let herm = op.add(&op.adjoint())?.scale(0.5);
    let min_eigenvalue = herm.herm_eig()?.min();
    let psd_residual = (-min_eigenvalue).max(0.0);
    let w = pauli_coefficients_unchecked(&herm);
    let mut forbidden_term_norm: f64 = 0.0;
    let mut classes = std::collections::BTreeMap::<u8, f64>::new();
    for (idx, c) in w.iter() {
        let s = support(&idx);
        if !is_allowed(s) {
            forbidden_term_norm = forbidden_term_norm.max(c.abs());
            let e = classes.entry(s).or_insert(0.0);
            *e = e.max(c.abs());
        }
    }
    let d_a1b1 = op.dim_of_all(&["A1", "B1"])? as f64;
    let normalization_residual = (w.coeffs[0] - 1.0 / d_a1b1).abs();
    let forbidden_classes: Vec<String> = classes.into_iter().filter(|(_, v)| *v > tol).map(|(s, _)| class_name(s)).collect();
    let ok = hermitian_residual <= tol && psd_residual <= tol && forbidden_term_norm <= tol && normalization_residual <= tol;
    Ok(ValidityReport {
        ok,
        hermitian_residual,
        psd_residual,
        min_eigenvalue,
        forbidden_term_norm,
        normalization_residual,
        forbidden_classes,
    })
}

/// Keep only the coefficients whose class passes `keep`.
pub(crate) fn filter_terms(w: &PauliExpansion, keep: impl Fn(u8) -> bool) -> PauliExpansion {
    let mut out = w.clone();
    for (f, c) in out.coeffs.iter_mut().enumerate() {
        if !keep(support(&w.multi_index(f))) {
            *c = 0.0;
        }
    }
    out
}

/// Orthogonal projection onto the span of allowed terms, in canonical wire order.
pub fn project_valid(op: &LabeledOperator) -> Result<LabeledOperator> {
    let op = check_wires(op)?;
    let w = crate::tensor::pauli_coefficients(&op)?;
    filter_terms(&w, is_allowed).to_operator()
}

/// `ℙ = tr{W (M_Aᵀ ⊗ M_Bᵀ)}`; the maps are bound to `[A2, A1]` and `[B2, B1]` by position.
pub fn probability(w: &LabeledOperator, m_a: &ChoiOperator, m_b: &ChoiOperator) -> Result<f64> {
    let a = m_a.relabel("A2", "A1")?;
    let b = m_b.relabel("B2", "B1")?;
    let x = a.op().tensor(b.op())?.transpose();
    for l in x.labels() {
        if w.dim_of(&l.name)? != l.dim {
            return Err(Error::BadDimension(format!("wire `{}` has dimension {}", l.name, l.dim)));
        }
    }
    Ok(w.trace_product(&x.extend_to(w.labels())?)?.re)
}

fn qubit_wires() -> Vec<Subsystem> {
    WIRE_LABELS.iter().map(|n| Subsystem::new(*n, 2)).collect()
}

/// `¼[𝟙 + (σ_z^{B1} σ_z^{A2} + σ_z^{B2} σ_x^{B1} σ_z^{A1})/√2]`.
pub fn ocb_process() -> ProcessMatrix {
    let id = |n: &str| op1(n, Matrix::identity(2, 2));
    let t1 = id("B2")
        .tensor(&op1("B1", pauli_z()))
        .and_then(|t| t.tensor(&op1("A2", pauli_z())))
        .and_then(|t| t.tensor(&id("A1")))
        .expect("distinct labels");
    let t2 = op1("B2", pauli_z())
        .tensor(&op1("B1", pauli_x()))
        .and_then(|t| t.tensor(&id("A2")))
        .and_then(|t| t.tensor(&op1("A1", pauli_z())))
        .expect("distinct labels");
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let op = LabeledOperator::identity(qubit_wires()).and_then(|i| i.add(&t1.add(&t2)?.scale(s))).expect("aligned").scale(0.25);
    ProcessMatrix { op }
}

/// `W' = γ𝟙/(4(1+γ)) + W_OCB/(1+γ)`.
pub fn noisy_ocb(gamma: f64) -> Result<ProcessMatrix> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::BadParameter(format!("noise weight must be finite and >= 0, got {gamma}")));
    }
    let id = LabeledOperator::identity(qubit_wires())?.scale(gamma / (4.0 * (1.0 + gamma)));
    let op = id.add(&ocb_process().op.scale(1.0 / (1.0 + gamma)))?;
    Ok(ProcessMatrix { op })
}

/// `λ_max(W')` for the noisy family, `(γ/4 + 1/2)/(1+γ)`.
pub fn noisy_ocb_lambda_max(gamma: f64) -> f64 {
    (gamma / 4.0 + 0.5) / (1.0 + gamma)
}

/// `𝟙_{S2} ⊗ 𝟙_{S1}/d_{A1B1}` on the given wire dimensions.
pub fn maximally_mixed_process(dims: WireDims) -> Result<ProcessMatrix> {
    let op = LabeledOperator::identity(dims.labels())?.scale(1.0 / (dims.a1 * dims.b1) as f64);
    Ok(ProcessMatrix { op })
}

/// `tr_f` of a comb or conditioned comb, in canonical wire order. No validity check.
pub fn from_comb(op: &LabeledOperator) -> Result<LabeledOperator> {
    op.partial_trace(&["f"])?.permute(&WIRE_LABELS)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireDims {
    pub a1: usize,
    pub a2: usize,
    pub b1: usize,
    pub b2: usize,
}

impl WireDims {
    pub fn qubits() -> Self {
        WireDims { a1: 2, a2: 2, b1: 2, b2: 2 }
    }

    pub fn labels(&self) -> Vec<Subsystem> {
        vec![
            Subsystem::new("B2", self.b2),
            Subsystem::new("B1", self.b1),
            Subsystem::new("A2", self.a2),
            Subsystem::new("A1", self.a1),
        ]
    }

    pub fn of(op: &LabeledOperator) -> Result<Self> {
        Ok(WireDims { a1: op.dim_of("A1")?, a2: op.dim_of("A2")?, b1: op.dim_of("B1")?, b2: op.dim_of("B2")? })
    }
}

/// Seeded valid process matrix `𝟙/d_{A1B1} + ε H` with `H` a random traceless
/// Hermitian operator in the allowed-term span and `ε` chosen as `strength`
/// times the largest value keeping the result PSD. `strength` lies in `[0, 1]`.
pub fn random_valid_process(dims: WireDims, strength: f64, seed: u64) -> Result<ProcessMatrix> {
    if !(0.0..=1.0).contains(&strength) {
        return Err(Error::BadParameter(format!("strength must lie in [0, 1], got {strength}")));
    }
    let labels = dims.labels();
    let d: usize = labels.iter().map(|l| l.dim).product();
    let h = LabeledOperator::new(labels.clone(), random::random_hermitian(d, &mut random::rng(seed)))?;
    let w = crate::tensor::pauli_coefficients(&h)?;
    let mut w = filter_terms(&w, is_allowed);
    w.coeffs[0] = 0.0;
    let h = w.to_operator()?;
    let base = 1.0 / (dims.a1 * dims.b1) as f64;
    let lmin = h.herm_eig()?.min();
    let eps = if lmin < 0.0 { strength * base / -lmin } else { 0.0 };
    let op = LabeledOperator::identity(labels)?.scale(base).add(&h.scale(eps))?;
    ProcessMatrix::new(op)
}

/// Mirror a process matrix: Alice's wires become Bob's and vice versa.
pub fn swap_parties(op: &LabeledOperator) -> Result<LabeledOperator> {
    op.relabel_many(&[("A1", "B1"), ("A2", "B2"), ("B1", "A1"), ("B2", "A2")])?.permute(&WIRE_LABELS)
}

/// `𝟙_{S2} ⊗ ρ_{A1} ⊗ ρ_{B1}` for qubit states, as used for non-signalling fixtures.
pub fn product_process(rho_a1: &Matrix, rho_b1: &Matrix, d_a2: usize, d_b2: usize) -> Result<ProcessMatrix> {
    let op = LabeledOperator::identity(vec![Subsystem::new("B2", d_b2)])?
        .tensor(&op1("B1", rho_b1.clone()))?
        .tensor(&LabeledOperator::identity(vec![Subsystem::new("A2", d_a2)])?)?
        .tensor(&op1("A1", rho_a1.clone()))?;
    ProcessMatrix::new(op)
}
