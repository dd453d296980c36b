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

//! Causally ordered circuits conditioned on a projective measurement of the environment.
//!
//! A parallel circuit prepares `ρ` on `[A1, B1, E...]`, lets Alice and Bob act
//! on `A1` and `B1`, applies `V` on `[A2, B2, E...]` and measures the
//! environment with projectors `Π^(μ)`. A serial circuit prepares `ρ` on
//! `[A1, E...]`, applies `U` on `[A2, E...]` (system output `B1`), then `V` on
//! `[B2, E...]`, then measures.

pub mod gen;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::choi::{random_instrument_on, to_kraus, Instrument};
use crate::comb::{apply_unitary_on, check_state, check_unitary, env_labels, phi_plus, COMB_LABELS, WIRE_LABELS};
use crate::error::{Error, Result};
use crate::process::{is_valid, probability, ValidityReport};
use crate::tensor::{LabeledOperator, Matrix};

/// Probability below which an outcome is treated as impossible.
pub const NULL_OUTCOME_TOL: f64 = 1e-12;
/// Tolerance for projector orthogonality and completeness.
pub const PROJECTOR_TOL: f64 = 1e-10;

fn check_projectors(projectors: &[LabeledOperator], env: &[&str]) -> Result<()> {
    if projectors.is_empty() {
        return Err(Error::BadCircuit("at least one projector is required".into()));
    }
    let first = &projectors[0];
    if first.names() != env {
        return Err(Error::BadCircuit(format!("projectors act on {:?}, environment is {:?}", first.names(), env)));
    }
    let mut sum = first.scale(0.0);
    for (m, p) in projectors.iter().enumerate() {
        let p = first.aligned(p)?;
        sum = sum.add(&p)?;
        for (n, q) in projectors.iter().enumerate() {
            let pq = p.mul(q)?;
            let want = if m == n { p.clone() } else { p.scale(0.0) };
            let r = pq.max_abs_diff(&want)?;
            if r > PROJECTOR_TOL {
                return Err(Error::BadCircuit(format!("projectors {m} and {n} violate Π_m Π_n = δ_mn Π_m by {r:.3e}")));
            }
        }
    }
    let id = LabeledOperator::identity(first.labels().to_vec())?;
    let r = sum.max_abs_diff(&id)?;
    if r > PROJECTOR_TOL {
        return Err(Error::BadCircuit(format!("projectors do not sum to the identity (residual {r:.3e})")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParallelCircuit {
    rho: LabeledOperator,
    v: LabeledOperator,
    projectors: Vec<LabeledOperator>,
}

impl ParallelCircuit {
    /// `rho` on `[A1, B1, E...]`, `v` on `[A2, B2, E...]` with the same
    /// environment labels, `projectors` on `[E...]`.
    pub fn new(rho: LabeledOperator, v: LabeledOperator, projectors: Vec<LabeledOperator>) -> Result<Self> {
        check_state(&rho)?;
        check_unitary(&v)?;
        let rho = rho.bring_to_front(&["A1", "B1"])?;
        let v = v.bring_to_front(&["A2", "B2"])?;
        let env: Vec<&str> = rho.names().into_iter().skip(2).collect();
        let v_env: Vec<&str> = v.names().into_iter().skip(2).collect();
        let mut a = env.clone();
        let mut b = v_env.clone();
        a.sort();
        b.sort();
        if a != b {
            return Err(Error::BadCircuit(format!("V environment {v_env:?} differs from state environment {env:?}")));
        }
        let mut order: Vec<&str> = vec!["A2", "B2"];
        order.extend(&env);
        let v = v.permute(&order)?;
        for l in v.labels().iter().skip(2) {
            if rho.dim_of(&l.name)? != l.dim {
                return Err(Error::BadDimension(format!("environment wire `{}` differs between ρ and V", l.name)));
            }
        }
        let projectors = projectors.into_iter().map(|p| p.permute(&env)).collect::<Result<Vec<_>>>()?;
        check_projectors(&projectors, &env)?;
        Ok(ParallelCircuit { rho, v, projectors })
    }

    pub fn rho(&self) -> &LabeledOperator {
        &self.rho
    }

    pub fn v(&self) -> &LabeledOperator {
        &self.v
    }

    pub fn projectors(&self) -> &[LabeledOperator] {
        &self.projectors
    }

    pub fn env(&self) -> Vec<&str> {
        self.rho.names().into_iter().skip(2).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SerialCircuit {
    rho: LabeledOperator,
    u: LabeledOperator,
    v: LabeledOperator,
    projectors: Vec<LabeledOperator>,
}

impl SerialCircuit {
    /// `rho` on `[A1, E...]`, `u` on `[A2, E...]`, `v` on `[B2, E...]`, projectors on `[E...]`.
    pub fn new(rho: LabeledOperator, u: LabeledOperator, v: LabeledOperator, projectors: Vec<LabeledOperator>) -> Result<Self> {
        check_state(&rho)?;
        check_unitary(&u)?;
        check_unitary(&v)?;
        let rho = rho.bring_to_front(&["A1"])?;
        let env: Vec<&str> = env_labels(&rho, "A1")?;
        let mut u_order = vec!["A2"];
        u_order.extend(&env);
        let mut v_order = vec!["B2"];
        v_order.extend(&env);
        let u = u.permute(&u_order).map_err(|_| Error::BadCircuit(format!("U must act on {u_order:?}")))?;
        let v = v.permute(&v_order).map_err(|_| Error::BadCircuit(format!("V must act on {v_order:?}")))?;
        for l in u.labels().iter().skip(1).chain(v.labels().iter().skip(1)) {
            if rho.dim_of(&l.name)? != l.dim {
                return Err(Error::BadDimension(format!("environment wire `{}` differs between ρ and the unitaries", l.name)));
            }
        }
        let projectors = projectors.into_iter().map(|p| p.permute(&env)).collect::<Result<Vec<_>>>()?;
        check_projectors(&projectors, &env)?;
        Ok(SerialCircuit { rho, u, v, projectors })
    }

    pub fn rho(&self) -> &LabeledOperator {
        &self.rho
    }

    pub fn u(&self) -> &LabeledOperator {
        &self.u
    }

    pub fn v(&self) -> &LabeledOperator {
        &self.v
    }

    pub fn projectors(&self) -> &[LabeledOperator] {
        &self.projectors
    }

    pub fn env(&self) -> Vec<&str> {
        self.rho.names().into_iter().skip(1).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Circuit {
    Parallel(ParallelCircuit),
    Serial(SerialCircuit),
}

impl Circuit {
    pub fn projectors(&self) -> &[LabeledOperator] {
        match self {
            Circuit::Parallel(c) => c.projectors(),
            Circuit::Serial(c) => c.projectors(),
        }
    }

    pub fn n_outcomes(&self) -> usize {
        self.projectors().len()
    }

    /// `(d_A1, d_A2, d_B1, d_B2)`.
    pub fn wire_dims(&self) -> (usize, usize, usize, usize) {
        match self {
            Circuit::Parallel(c) => (
                c.rho.dim_of("A1").expect("wire"),
                c.v.dim_of("A2").expect("wire"),
                c.rho.dim_of("B1").expect("wire"),
                c.v.dim_of("B2").expect("wire"),
            ),
            Circuit::Serial(c) => {
                (c.rho.dim_of("A1").expect("wire"), c.u.labels()[0].dim, c.u.labels()[0].dim, c.v.labels()[0].dim)
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Circuit::Parallel(_) => "parallel",
            Circuit::Serial(_) => "serial",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CircuitJson {
    kind: String,
    rho: LabeledOperator,
    #[serde(rename = "U", skip_serializing_if = "Option::is_none", default)]
    u: Option<LabeledOperator>,
    #[serde(rename = "V")]
    v: LabeledOperator,
    projectors: Vec<LabeledOperator>,
}

impl Serialize for Circuit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let j = match self {
            Circuit::Parallel(c) => CircuitJson {
                kind: "parallel".into(),
                rho: c.rho.clone(),
                u: None,
                v: c.v.clone(),
                projectors: c.projectors.clone(),
            },
            Circuit::Serial(c) => CircuitJson {
                kind: "serial".into(),
                rho: c.rho.clone(),
                u: Some(c.u.clone()),
                v: c.v.clone(),
                projectors: c.projectors.clone(),
            },
        };
        j.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Circuit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = CircuitJson::deserialize(d)?;
        let c = match (j.kind.as_str(), j.u) {
            ("parallel", None) => ParallelCircuit::new(j.rho, j.v, j.projectors).map(Circuit::Parallel),
            ("serial", Some(u)) => SerialCircuit::new(j.rho, u, j.v, j.projectors).map(Circuit::Serial),
            ("parallel", Some(_)) => Err(Error::BadCircuit("parallel circuits take no `U`".into())),
            ("serial", None) => Err(Error::BadCircuit("serial circuits need `U`".into())),
            (k, _) => Err(Error::BadCircuit(format!("unknown circuit kind `{k}`"))),
        };
        c.map_err(D::Error::custom)
    }
}

/// The branch `μ` of a conditioned circuit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionedResult {
    pub mu: usize,
    /// Normalized `W^μ` on `[B2, B1, A2, A1]`.
    pub w_mu: LabeledOperator,
    /// Unnormalized `W̃^μ = p(μ) W^μ`.
    pub w_tilde: LabeledOperator,
    pub p_mu: f64,
    pub valid: bool,
    pub validity: ValidityReport,
    /// Largest forbidden-term coefficient of `W^μ`; zero exactly when `p(μ)`
    /// does not depend on the instruments.
    pub instrument_dependence: f64,
}

fn projector(c: &Circuit, mu: usize) -> Result<&LabeledOperator> {
    c.projectors()
        .get(mu)
        .ok_or_else(|| Error::BadParameter(format!("outcome {mu} out of range (circuit has {})", c.n_outcomes())))
}

/// `W̃^μ` for a parallel circuit from
/// `(W̃^μ)ᵀ = tr_E[(𝟙_{S1} ⊗ V†(𝟙_{S2} ⊗ Π^μ)V)(𝟙_{S2} ⊗ ρ^{T_{S1}})]`.
pub fn parallel_unnormalized(c: &ParallelCircuit, mu: usize) -> Result<LabeledOperator> {
    let pi = c.projectors.get(mu).ok_or_else(|| Error::BadParameter(format!("outcome {mu} out of range")))?;
    let env = c.env();
    let s2 = LabeledOperator::identity(c.v.labels()[..2].to_vec())?;
    let lifted = s2.tensor(pi)?; // [A2, B2, E...]
    let gamma = LabeledOperator::new(c.v.labels().to_vec(), c.v.matrix().adjoint() * lifted.matrix() * c.v.matrix())?;
    let rho_pt = c.rho.partial_transpose(&["A1", "B1"])?;
    let mut full = vec!["A2", "B2", "A1", "B1"];
    full.extend(&env);
    let full_labels: Vec<_> = full
        .iter()
        .map(|n| gamma.labels().iter().chain(rho_pt.labels()).find(|l| l.name == *n).expect("label present").clone())
        .collect();
    let g = gamma.extend_to(&full_labels)?;
    let r = rho_pt.extend_to(&full_labels)?;
    let prod = LabeledOperator::new(full_labels, g.matrix() * r.matrix())?;
    prod.partial_trace(&env)?.transpose().permute(&WIRE_LABELS)
}

/// Conditioned comb `Υ̃^(μ)` on `[f, B2, B1, A2, A1]` of a serial circuit and `p(μ) = tr Υ̃ / d_{A2B2}`.
pub fn serial_conditioned_choi(c: &SerialCircuit, mu: usize) -> Result<(LabeledOperator, f64)> {
    let y = serial_unnormalized_comb(c, mu)?;
    let d = (c.u.labels()[0].dim * c.v.labels()[0].dim) as f64;
    let p = y.trace().re / d;
    if p < NULL_OUTCOME_TOL {
        return Err(Error::NullOutcome { outcome: mu, probability: p });
    }
    Ok((y, p))
}

fn serial_unnormalized_comb(c: &SerialCircuit, mu: usize) -> Result<LabeledOperator> {
    let pi = c.projectors.get(mu).ok_or_else(|| Error::BadParameter(format!("outcome {mu} out of range")))?;
    let state = c.rho.tensor(&phi_plus("a2", "A2", c.u.labels()[0].dim)?)?.tensor(&phi_plus("b2", "B2", c.v.labels()[0].dim)?)?;
    let state = apply_unitary_on(&state, &c.u, "a2")?.relabel("a2", "B1")?;
    let state = apply_unitary_on(&state, &c.v, "b2")?.relabel("b2", "f")?;
    state.contract(pi)?.permute(&COMB_LABELS)
}

/// Conditioned comb of a parallel circuit, built by threading maximally
/// entangled halves through `V` (the final outputs `A2`, `B2` of `V` become `f`).
pub fn parallel_conditioned_choi(c: &ParallelCircuit, mu: usize) -> Result<LabeledOperator> {
    let pi = c.projectors.get(mu).ok_or_else(|| Error::BadParameter(format!("outcome {mu} out of range")))?;
    let (da2, db2) = (c.v.labels()[0].dim, c.v.labels()[1].dim);
    let state = c.rho.tensor(&phi_plus("a2", "A2", da2)?)?.tensor(&phi_plus("b2", "B2", db2)?)?;
    let mut targets = vec!["a2", "b2"];
    let env = c.env();
    targets.extend(&env);
    let state = state.conjugate(c.v.matrix(), &targets)?;
    let state = state.contract(pi)?;
    state.merge(&["a2", "b2"], "f")?.permute(&COMB_LABELS)
}

/// Unnormalized branch `W̃^μ` for either circuit kind.
pub fn unnormalized(c: &Circuit, mu: usize) -> Result<LabeledOperator> {
    projector(c, mu)?;
    match c {
        Circuit::Parallel(p) => parallel_unnormalized(p, mu),
        Circuit::Serial(s) => serial_unnormalized_comb(s, mu)?.partial_trace(&["f"]),
    }
}

fn finish(mu: usize, w_tilde: LabeledOperator) -> Result<ConditionedResult> {
    let d_a2b2 = w_tilde.dim_of_all(&["A2", "B2"])? as f64;
    let p_mu = w_tilde.trace().re / d_a2b2;
    if p_mu < NULL_OUTCOME_TOL {
        return Err(Error::NullOutcome { outcome: mu, probability: p_mu });
    }
    let w_mu = w_tilde.scale(1.0 / p_mu);
    let validity = is_valid(&w_mu, 1e-8)?;
    Ok(ConditionedResult {
        mu,
        valid: validity.ok,
        instrument_dependence: validity.forbidden_term_norm,
        validity,
        w_mu,
        w_tilde,
        p_mu,
    })
}

/// Branch `μ` of a parallel circuit: `W^μ = W̃^μ / p(μ)` with `p(μ) = tr W̃^μ / d_{A2B2}`.
pub fn parallel_process_matrix(c: &ParallelCircuit, mu: usize) -> Result<ConditionedResult> {
    finish(mu, parallel_unnormalized(c, mu)?)
}

/// Branch `μ` of either circuit kind.
pub fn conditioned(c: &Circuit, mu: usize) -> Result<ConditionedResult> {
    finish(mu, unnormalized(c, mu)?)
}

/// `Σ_μ p(μ) W^μ`, summed from the unnormalized branches.
pub fn average_process(c: &Circuit) -> Result<LabeledOperator> {
    let mut acc = unnormalized(c, 0)?;
    for mu in 1..c.n_outcomes() {
        acc = acc.add(&unnormalized(c, mu)?)?;
    }
    Ok(acc)
}

/// Joint distribution `p(i, j, μ)` stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JointTable {
    pub n_a: usize,
    pub n_b: usize,
    pub n_mu: usize,
    pub probs: Vec<f64>,
}

impl JointTable {
    pub fn get(&self, i: usize, j: usize, mu: usize) -> f64 {
        self.probs[(i * self.n_b + j) * self.n_mu + mu]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `p(μ) = Σ_ij p(i, j, μ)`.
    pub fn marginal(&self, mu: usize) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n_a {
            for j in 0..self.n_b {
                s += self.get(i, j, mu);
            }
        }
        s
    }
}

fn check_instrument(inst: &Instrument, d_in: usize, d_out: usize, who: &str) -> Result<()> {
    if inst.in_dim() != d_in || inst.out_dim() != d_out {
        return Err(Error::BadDimension(format!(
            "{who}'s instrument maps {} → {}, circuit needs {d_in} → {d_out}",
            inst.in_dim(),
            inst.out_dim()
        )));
    }
    Ok(())
}

/// `p(i, j, μ)` by propagating the density matrix through the circuit with
/// the instruments' Kraus operators.
pub fn brute_force_joint(c: &Circuit, inst_a: &Instrument, inst_b: &Instrument) -> Result<JointTable> {
    let (a1, a2, b1, b2) = c.wire_dims();
    check_instrument(inst_a, a1, a2, "Alice")?;
    check_instrument(inst_b, b1, b2, "Bob")?;
    let ka: Vec<Vec<Matrix>> = inst_a.outcomes().iter().map(|o| to_kraus(o).map(|k| k.kraus)).collect::<Result<_>>()?;
    let kb: Vec<Vec<Matrix>> = inst_b.outcomes().iter().map(|o| to_kraus(o).map(|k| k.kraus)).collect::<Result<_>>()?;
    let n_mu = c.n_outcomes();
    let mut probs = Vec::with_capacity(ka.len() * kb.len() * n_mu);
    for fa in &ka {
        for fb in &kb {
            let out = match c {
                Circuit::Parallel(p) => {
                    let s = p.rho.apply_kraus(fa, "A1", "A2")?.apply_kraus(fb, "B1", "B2")?;
                    s.conjugate(p.v.matrix(), &p.v.names())?
                }
                Circuit::Serial(sc) => {
                    let s = sc.rho.apply_kraus(fa, "A1", "A2")?;
                    let s = s.conjugate(sc.u.matrix(), &sc.u.names())?.relabel("A2", "B1")?;
                    let s = s.apply_kraus(fb, "B1", "B2")?;
                    s.conjugate(sc.v.matrix(), &sc.v.names())?
                }
            };
            for pi in c.projectors() {
                let p = out.contract(pi)?.trace().re;
                probs.push(p);
            }
        }
    }
    Ok(JointTable { n_a: ka.len(), n_b: kb.len(), n_mu, probs })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProperReport {
    pub mu: usize,
    pub proper: bool,
    /// Largest deviation of the sampled `p(μ)` from their mean.
    pub max_dev: f64,
    pub samples: Vec<f64>,
    /// Largest forbidden-term coefficient of `W̃^μ / p(μ)`; the exact test.
    pub structural_residual: f64,
    /// Validity of the reconstructed `W^μ` at tolerance `1e-8`.
    pub valid: bool,
}

/// Sample `p(μ | J_A, J_B)` over seeded random instrument pairs; the branch
/// is proper when the samples agree within `tol`. Pair `k` uses seeds
/// `seed + 2k` (Alice) and `seed + 2k + 1` (Bob).
pub fn is_proper(c: &Circuit, mu: usize, n_samples: usize, seed: u64, tol: f64) -> Result<ProperReport> {
    if n_samples < 2 {
        return Err(Error::BadParameter("is_proper needs at least two samples".into()));
    }
    let w_tilde = unnormalized(c, mu)?;
    let (a1, a2, b1, b2) = c.wire_dims();
    let samples: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let sa = seed.wrapping_add(2 * k as u64);
            let ia = random_instrument_on("A2", "A1", a1, a2, 1, sa)?;
            let ib = random_instrument_on("B2", "B1", b1, b2, 1, sa.wrapping_add(1))?;
            probability(&w_tilde, &ia.outcomes()[0], &ib.outcomes()[0])
        })
        .collect::<Result<_>>()?;
    let mean = samples.iter().sum::<f64>() / n_samples as f64;
    let max_dev = samples.iter().map(|p| (p - mean).abs()).fold(0.0, f64::max);
    let d_a2b2 = (a2 * b2) as f64;
    let p = w_tilde.trace().re / d_a2b2;
    let (structural_residual, valid) = if p < NULL_OUTCOME_TOL {
        (0.0, false)
    } else {
        let rep = is_valid(&w_tilde.scale(1.0 / p), 1e-8)?;
        (rep.forbidden_term_norm, rep.ok)
    };
    Ok(ProperReport { mu, proper: max_dev < tol, max_dev, samples, structural_residual, valid })
}

/// Identity matrix helper for building circuits.
pub(crate) fn eye(d: usize) -> Matrix {
    Matrix::identity(d, d)
}

#[cfg(test)]
mod tests {
    use super::gen::*;
    use super::*;
    use crate::choi::random_instrument_on;
    use crate::tensor::{labels, op1, C64};

    fn ket0_proj(d: usize) -> Matrix {
        let mut m = Matrix::zeros(d, d);
        m[(0, 0)] = C64::new(1.0, 0.0);
        m
    }

    fn instruments(seed: u64, c: &Circuit) -> (Instrument, Instrument) {
        let (a1, a2, b1, b2) = c.wire_dims();
        (
            random_instrument_on("A2", "A1", a1, a2, 2, seed).unwrap(),
            random_instrument_on("B2", "B1", b1, b2, 2, seed + 7).unwrap(),
        )
    }

    #[test]
    fn closed_form_matches_threaded_choi() {
        for seed in 0..10 {
            let c = random_parallel(&ParallelSpec::generic(2, 2), seed).unwrap();
            for mu in 0..2 {
                let a = parallel_unnormalized(&c, mu).unwrap();
                let b = parallel_conditioned_choi(&c, mu).unwrap().partial_trace(&["f"]).unwrap();
                assert!(a.max_abs_diff(&b).unwrap() < 1e-12, "seed {seed}");
            }
        }
    }

    #[test]
    fn parallel_matches_brute_force() {
        for seed in 0..50 {
            let c = Circuit::Parallel(random_parallel(&ParallelSpec::generic(2, 2), seed).unwrap());
            let (ia, ib) = instruments(100 + seed, &c);
            let t = brute_force_joint(&c, &ia, &ib).unwrap();
            assert!((t.total() - 1.0).abs() < 1e-10);
            assert!(t.probs.iter().all(|&p| p > -1e-12));
            for mu in 0..c.n_outcomes() {
                let w = unnormalized(&c, mu).unwrap();
                for (i, ma) in ia.outcomes().iter().enumerate() {
                    for (j, mb) in ib.outcomes().iter().enumerate() {
                        let p = probability(&w, ma, mb).unwrap();
                        assert!((p - t.get(i, j, mu)).abs() < 1e-9, "seed {seed}");
                    }
                }
            }
        }
    }

    #[test]
    fn serial_matches_brute_force() {
        for seed in 0..50 {
            let c = Circuit::Serial(random_serial(&SerialSpec::generic(2, 2), seed).unwrap());
            let (ia, ib) = instruments(300 + seed, &c);
            let t = brute_force_joint(&c, &ia, &ib).unwrap();
            assert!((t.total() - 1.0).abs() < 1e-10);
            for mu in 0..c.n_outcomes() {
                let w = unnormalized(&c, mu).unwrap();
                for (i, ma) in ia.outcomes().iter().enumerate() {
                    for (j, mb) in ib.outcomes().iter().enumerate() {
                        assert!((probability(&w, ma, mb).unwrap() - t.get(i, j, mu)).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn deterministic_serial_is_a_comb() {
        let mut spec = SerialSpec::generic(2, 1);
        spec.n_outcomes = 1;
        let c = random_serial(&spec, 3).unwrap();
        let (y, p) = serial_conditioned_choi(&c, 0).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        let comb = crate::comb::CombChoi::new(y, crate::comb::Order::AliceFirst).unwrap();
        assert!(crate::comb::check_causal_order(&comb, crate::comb::Order::AliceFirst, 1e-10).ok);
    }

    #[test]
    fn average_is_causally_ordered() {
        for seed in 0..20 {
            let c = random_parallel(&ParallelSpec::generic(4, 3), seed).unwrap();
            let avg = average_process(&Circuit::Parallel(c.clone())).unwrap();
            let rho_s1 = c.rho().reduce_to(&["B1", "A1"]).unwrap();
            let want = LabeledOperator::identity(labels(&[("B2", 2), ("A2", 2)])).unwrap().tensor(&rho_s1).unwrap();
            assert!(avg.max_abs_diff(&want).unwrap() < 1e-9);
        }
    }

    #[test]
    fn product_state_gives_product_form() {
        let mut spec = ParallelSpec::generic(2, 2);
        spec.state = StatePattern::ProductS1E;
        let c = random_parallel(&spec, 4).unwrap();
        let w = unnormalized(&Circuit::Parallel(c.clone()), 0).unwrap();
        // W̃ = Θ_{S2} ⊗ ρ_{S1} with ρ_{S1} the system marginal
        let rho_s1 = c.rho().reduce_to(&["B1", "A1"]).unwrap();
        let theta = w.reduce_to(&["B2", "A2"]).unwrap();
        let want = theta.tensor(&rho_s1).unwrap();
        assert!(w.max_abs_diff(&want).unwrap() < 1e-12);
    }

    #[test]
    fn serial_reduces_to_parallel() {
        // A serial circuit whose U swaps Alice's output into a fresh register
        // and delivers a stored B1 system: equivalent to a parallel circuit.
        for seed in 0..5 {
            let (sc, pc) = serial_parallel_pair(seed).unwrap();
            for mu in 0..pc.projectors().len() {
                let a = unnormalized(&Circuit::Serial(sc.clone()), mu).unwrap();
                let b = unnormalized(&Circuit::Parallel(pc.clone()), mu).unwrap();
                assert!(a.max_abs_diff(&b).unwrap() < 1e-10, "seed {seed}");
            }
        }
    }

    #[test]
    fn improper_branch_detected() {
        let mut spec = ParallelSpec::generic(2, 2);
        spec.projectors = ProjectorPattern::RandomRankOne;
        let c = Circuit::Parallel(random_parallel(&spec, 5).unwrap());
        let r = is_proper(&c, 0, 20, 1, 1e-8).unwrap();
        assert!(!r.proper && r.max_dev > 1e-4 && !r.valid, "{r:?}");
    }

    #[test]
    fn deterministic_branch_is_proper() {
        let mut spec = ParallelSpec::generic(2, 2);
        spec.projectors = ProjectorPattern::Trivial;
        let c = Circuit::Parallel(random_parallel(&spec, 6).unwrap());
        let r = is_proper(&c, 0, 20, 1, 1e-8).unwrap();
        assert!(r.proper && r.valid);
        assert!((conditioned(&c, 0).unwrap().p_mu - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projector_checks() {
        let rho = op1("A1", eye(2) * C64::new(0.5, 0.0))
            .tensor(&op1("B1", eye(2) * C64::new(0.5, 0.0)))
            .unwrap()
            .tensor(&op1("E", ket0_proj(2)))
            .unwrap();
        let v = LabeledOperator::identity(labels(&[("A2", 2), ("B2", 2), ("E", 2)])).unwrap();
        let half = op1("E", eye(2) * C64::new(0.5, 0.0));
        assert!(matches!(ParallelCircuit::new(rho.clone(), v.clone(), vec![half.clone(), half]), Err(Error::BadCircuit(_))));
        let c = ParallelCircuit::new(rho, v, vec![op1("E", ket0_proj(2)), op1("E", eye(2) - ket0_proj(2))]).unwrap();
        let c = Circuit::Parallel(c);
        assert!(matches!(conditioned(&c, 1), Err(Error::NullOutcome { outcome: 1, .. })));
        let text = crate::json::to_string(&c).unwrap();
        let back: Circuit = crate::json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn random_instrument_dims_checked() {
        let c = Circuit::Parallel(random_parallel(&ParallelSpec::generic(2, 2), 1).unwrap());
        let ia = random_instrument_on("A2", "A1", 3, 2, 2, 1).unwrap();
        let ib = random_instrument_on("B2", "B1", 2, 2, 2, 1).unwrap();
        assert!(matches!(brute_force_joint(&c, &ia, &ib), Err(Error::BadDimension(_))));
    }
}
