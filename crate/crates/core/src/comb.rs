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

//! Two-slot quantum combs.
//!
//! A comb `Υ` lives on `[f, B2, B1, A2, A1]`. Alice's slot maps `A1` to `A2`
//! and Bob's slot maps `B1` to `B2`; `f` is the final output wire. The comb acts on slot operations as
//! `ρ' = tr_{S2S1}[(𝟙_f ⊗ M_Aᵀ ⊗ M_Bᵀ) Υ]`.

use serde::{Deserialize, Serialize};

use crate::choi::{is_cptp, ChoiOperator, CHOI_TOL};
use crate::error::{Error, Result};
use crate::random;
use crate::tensor::{complete_unitary, LabeledOperator, Matrix, Subsystem, C64, ZERO};

pub const COMB_LABELS: [&str; 5] = ["f", "B2", "B1", "A2", "A1"];
pub const WIRE_LABELS: [&str; 4] = ["B2", "B1", "A2", "A1"];

/// Declared order of the two slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    #[serde(rename = "AB")]
    AliceFirst,
    #[serde(rename = "BA")]
    BobFirst,
}

impl Order {
    /// `(first party's [out, in], second party's [out, in])`.
    fn wires(self) -> ((&'static str, &'static str), (&'static str, &'static str)) {
        match self {
            Order::AliceFirst => (("A2", "A1"), ("B2", "B1")),
            Order::BobFirst => (("B2", "B1"), ("A2", "A1")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CombChoi {
    op: LabeledOperator,
    order: Order,
}

impl CombChoi {
    /// Wrap an operator, reordering it to `[f, B2, B1, A2, A1]`.
    pub fn new(op: LabeledOperator, order: Order) -> Result<Self> {
        let op = op.permute(&COMB_LABELS)?;
        Ok(CombChoi { op, order })
    }

    pub fn op(&self) -> &LabeledOperator {
        &self.op
    }

    pub fn order(&self) -> Order {
        self.order
    }

    /// `tr_f Υ` on `[B2, B1, A2, A1]`.
    pub fn wires(&self) -> LabeledOperator {
        self.op.partial_trace(&["f"]).expect("f present")
    }
}

#[derive(Serialize, Deserialize)]
struct CombJson {
    labels: Vec<Subsystem>,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
    order: Order,
}

impl Serialize for CombChoi {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let j = crate::json::OperatorJson::from(self.op.clone());
        CombJson { labels: j.labels, re: j.re, im: j.im, order: self.order }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CombChoi {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = CombJson::deserialize(d)?;
        let op = LabeledOperator::try_from(crate::json::OperatorJson { labels: j.labels, re: j.re, im: j.im })
            .map_err(D::Error::custom)?;
        CombChoi::new(op, j.order).map_err(D::Error::custom)
    }
}

/// Unnormalized `Σ_nm |nn⟩⟨mm|` on `[a, b]`.
pub fn phi_plus(a: &str, b: &str, d: usize) -> Result<LabeledOperator> {
    Ok(ChoiOperator::identity(a, b, d)?.op().clone())
}

pub(crate) fn check_unitary(u: &LabeledOperator) -> Result<()> {
    let r = u.unitarity_residual();
    if r > 1e-9 {
        return Err(Error::NotUnitary(r));
    }
    Ok(())
}

pub(crate) fn check_state(rho: &LabeledOperator) -> Result<()> {
    let tr = rho.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > 1e-9 {
        return Err(Error::BadParameter(format!("state has trace {:.6}", tr.re)));
    }
    let min = rho.min_eigenvalue()?;
    if min < -1e-9 {
        return Err(Error::NotPsd(min));
    }
    Ok(())
}

/// Apply the unitary `u` (labels `[wire, env...]`) with its first label bound
/// to `wire` and the remaining labels matched by name.
pub(crate) fn apply_unitary_on(state: &LabeledOperator, u: &LabeledOperator, wire: &str) -> Result<LabeledOperator> {
    let mut targets: Vec<&str> = vec![wire];
    targets.extend(u.names().into_iter().skip(1));
    for (t, l) in targets.iter().zip(u.labels()) {
        if state.dim_of(t)? != l.dim {
            return Err(Error::BadDimension(format!("unitary wire `{}` does not match `{t}`", l.name)));
        }
    }
    state.conjugate(u.matrix(), &targets)
}

/// Choi operator of the comb realised by `ρ_{A1 E}`, then `U` on `[A2, E]`
/// whose system output is `B1`, then `V` on `[B2, E]` whose system output is `f`.
///
/// The environment is every label of `rho` other than `A1`; `U` and `V` must
/// list the same environment labels after their system wire.
pub fn comb_from_circuit(rho: &LabeledOperator, u: &LabeledOperator, v: &LabeledOperator) -> Result<CombChoi> {
    check_unitary(u)?;
    check_unitary(v)?;
    let env = env_labels(rho, "A1")?;
    for (name, w) in [("U", u), ("V", v)] {
        let rest: Vec<&str> = w.names().into_iter().skip(1).collect();
        if rest != env {
            return Err(Error::BadCircuit(format!("{name} environment {rest:?} differs from state environment {env:?}")));
        }
    }
    let da2 = u.labels()[0].dim;
    let db2 = v.labels()[0].dim;
    let state = rho.tensor(&phi_plus("a2", "A2", da2)?)?.tensor(&phi_plus("b2", "B2", db2)?)?;
    let state = apply_unitary_on(&state, u, "a2")?.relabel("a2", "B1")?;
    let state = apply_unitary_on(&state, v, "b2")?.relabel("b2", "f")?;
    let op = state.partial_trace(&env)?;
    CombChoi::new(op, Order::AliceFirst)
}

pub(crate) fn env_labels<'a>(rho: &'a LabeledOperator, system: &str) -> Result<Vec<&'a str>> {
    rho.position(system)?;
    Ok(rho.names().into_iter().filter(|n| *n != system).collect())
}

fn slot_choi(m: &ChoiOperator, out: &str, inp: &str, comb: &LabeledOperator) -> Result<LabeledOperator> {
    let c = m.relabel(out, inp)?;
    for l in c.op().labels() {
        if comb.dim_of(&l.name)? != l.dim {
            return Err(Error::BadDimension(format!("slot wire `{}` has the wrong dimension", l.name)));
        }
    }
    Ok(c.op().transpose())
}

/// `ρ' = tr_{S2S1}[(𝟙_f ⊗ M_Aᵀ ⊗ M_Bᵀ) Υ]`; the maps are bound to the slots by position.
pub fn apply_comb(comb: &CombChoi, m_a: &ChoiOperator, m_b: &ChoiOperator) -> Result<LabeledOperator> {
    let ta = slot_choi(m_a, "A2", "A1", &comb.op)?;
    let tb = slot_choi(m_b, "B2", "B1", &comb.op)?;
    comb.op.contract(&ta.tensor(&tb)?)
}

/// `p = tr[(M_Aᵀ ⊗ M_Bᵀ) tr_f Υ]`.
pub fn outcome_probability(comb: &CombChoi, m_a: &ChoiOperator, m_b: &ChoiOperator) -> Result<f64> {
    let w = comb.wires();
    let ta = slot_choi(m_a, "A2", "A1", &w)?;
    let tb = slot_choi(m_b, "B2", "B1", &w)?;
    Ok(w.contract(&ta.tensor(&tb)?)?.trace().re)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CausalOrderReport {
    pub ok: bool,
    /// `‖tr_f Υ − 𝟙_{X2} ⊗ tr_{f X2} Υ / d_{X2}‖_max` for the second party `X`.
    pub final_residual: f64,
    /// The same test one level down, for the first party's output.
    pub first_residual: f64,
    /// `|tr ρ − 1|` for the initial state.
    pub trace_residual: f64,
    pub min_eigenvalue: f64,
}

/// Trace conditions of a comb ordered as `order`.
pub fn check_causal_order(comb: &CombChoi, order: Order, tol: f64) -> CausalOrderReport {
    let ((o1, i1), (o2, _)) = order.wires();
    let y = &comb.op;
    let tf = y.partial_trace(&["f"]).expect("f present");
    let final_residual = tf.identity_residual(&[o2]).expect("label present");
    let d2 = y.dim_of(o2).expect("label present") as f64;
    let y1 = tf.partial_trace(&[o2]).expect("label present").scale(1.0 / d2);
    let second_in = if o2 == "B2" { "B1" } else { "A1" };
    let y1r = y1.partial_trace(&[second_in]).expect("label present");
    let first_residual = y1r.identity_residual(&[o1]).expect("label present");
    let d1 = y.dim_of(o1).expect("label present") as f64;
    let rho = y1r.partial_trace(&[o1]).expect("label present").scale(1.0 / d1);
    debug_assert_eq!(rho.names(), vec![i1]);
    let trace_residual = (rho.trace() - C64::new(1.0, 0.0)).norm();
    let min_eigenvalue = crate::tensor::herm_eig_matrix(y.matrix()).min();
    let ok = final_residual < tol
        && first_residual < tol
        && trace_residual < tol
        && min_eigenvalue > -tol
        && y.hermitian_residual() < tol.max(1e-10);
    CausalOrderReport { ok, final_residual, first_residual, trace_residual, min_eigenvalue }
}

/// Choi operator of a map given by Kraus operators between composite wires:
/// `K` maps `in_labels` to `out_labels` and the result is ordered `out ++ in`.
pub fn multi_choi(kraus: &[Matrix], out_labels: Vec<Subsystem>, in_labels: Vec<Subsystem>) -> Result<LabeledOperator> {
    let dout: usize = out_labels.iter().map(|l| l.dim).product();
    let din: usize = in_labels.iter().map(|l| l.dim).product();
    let d = dout * din;
    let mut acc = Matrix::zeros(d, d);
    for k in kraus {
        if k.nrows() != dout || k.ncols() != din {
            return Err(Error::BadKraus(format!("Kraus operator is {}x{}, expected {dout}x{din}", k.nrows(), k.ncols())));
        }
        let v = Matrix::from_fn(d, 1, |r, _| k[(r / din, r % din)]);
        acc += &v * v.adjoint();
    }
    let mut labels = out_labels;
    labels.extend(in_labels);
    LabeledOperator::new(labels, acc)
}

/// Choi operator of a pair of operations sharing a memory, on `[B2, B1, A2, A1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelatedOp {
    op: LabeledOperator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CorrelatedDims {
    pub a1: usize,
    pub a2: usize,
    pub b1: usize,
    pub b2: usize,
    pub memory: usize,
}

impl CorrelatedDims {
    pub fn qubits(memory: usize) -> Self {
        CorrelatedDims { a1: 2, a2: 2, b1: 2, b2: 2, memory }
    }
}

impl CorrelatedOp {
    pub fn op(&self) -> &LabeledOperator {
        &self.op
    }

    /// `(‖tr_{B2} M − 𝟙_{B1} ⊗ M^{A2A1}‖, ‖tr_{A2} M^{A2A1} − 𝟙_{A1}‖, min eigenvalue)`
    /// with `M^{A2A1} = tr_{B2B1} M / d_{B1}`.
    pub fn residuals(&self) -> (f64, f64, f64) {
        let t = self.op.partial_trace(&["B2"]).expect("label present");
        let r1 = t.identity_residual(&["B1"]).expect("label present");
        let db1 = self.op.dim_of("B1").expect("label present") as f64;
        let ma = t.partial_trace(&["B1"]).expect("label present").scale(1.0 / db1);
        let ta = ma.partial_trace(&["A2"]).expect("label present");
        let id = LabeledOperator::identity(ta.labels().to_vec()).expect("valid labels");
        let r2 = ta.max_abs_diff(&id).expect("aligned");
        let min = crate::tensor::herm_eig_matrix(self.op.matrix()).min();
        (r1, r2, min)
    }
}

/// Seeded operations correlated through a memory: Alice's channel
/// `A1 → A2 ⊗ M` followed by Bob's channel `B1 ⊗ M → B2`, each a Haar
/// isometry with its junk output discarded.
pub fn random_correlated_op(dims: CorrelatedDims, seed: u64) -> Result<CorrelatedOp> {
    let CorrelatedDims { a1, a2, b1, b2, memory } = dims;
    if [a1, a2, b1, b2, memory].contains(&0) {
        return Err(Error::BadDimension("correlated operation dimensions must be positive".into()));
    }
    let mut rng = random::rng(seed);
    // Alice: isometry A1 → (A2 ⊗ M) ⊗ junk_a, junk_a of dimension a1.
    let va = random::haar_isometry(a2 * memory * a1, a1, &mut rng);
    // Bob: isometry (M ⊗ B1) → B2 ⊗ junk_b, junk_b of dimension memory·b1.
    let vb = random::haar_isometry(b2 * memory * b1, memory * b1, &mut rng);
    let ka: Vec<Matrix> = (0..a1).map(|j| Matrix::from_fn(a2 * memory, a1, |r, c| va[(r * a1 + j, c)])).collect();
    let kb: Vec<Matrix> =
        (0..memory * b1).map(|j| Matrix::from_fn(b2, memory * b1, |r, c| vb[(r * memory * b1 + j, c)])).collect();
    // Composite Kraus: (𝟙_{A2} ⊗ L)(K ⊗ 𝟙_{B1}) : A1 ⊗ B1 → A2 ⊗ B2.
    let id_b1 = Matrix::identity(b1, b1);
    let id_a2 = Matrix::identity(a2, a2);
    let mut kraus = Vec::with_capacity(ka.len() * kb.len());
    for k in &ka {
        let first = k.kronecker(&id_b1);
        for l in &kb {
            kraus.push(id_a2.kronecker(l) * &first);
        }
    }
    let op = multi_choi(
        &kraus,
        vec![Subsystem::new("A2", a2), Subsystem::new("B2", b2)],
        vec![Subsystem::new("A1", a1), Subsystem::new("B1", b1)],
    )?
    .permute(&WIRE_LABELS)?;
    Ok(CorrelatedOp { op })
}

/// Memoryless comb `Υ = ξ ⊗ Λ ⊗ ρ`: Alice's output reaches Bob through the
/// channel `Λ: A2 → B1` and Bob's output leaves through `ξ: B2 → f`.
pub fn markovian_comb(lambda: &ChoiOperator, xi: &ChoiOperator, rho: &LabeledOperator) -> Result<CombChoi> {
    if !is_cptp(lambda, CHOI_TOL) || !is_cptp(xi, CHOI_TOL) {
        return Err(Error::NotCptp);
    }
    if rho.labels().len() != 1 {
        return Err(Error::BadDimension("initial state must be a single wire".into()));
    }
    check_state(rho)?;
    let l = lambda.relabel("B1", "A2")?;
    let x = xi.relabel("f", "B2")?;
    let r = rho.with_labels(vec![Subsystem::new("A1", rho.dim())])?;
    let op = x.op().tensor(l.op())?.tensor(&r)?;
    CombChoi::new(op, Order::AliceFirst)
}

/// Unitary on `[sys, env]` with `env` of dimension `kraus.len()` such that
/// `U(|ψ⟩ ⊗ |0⟩) = Σ_k K_k|ψ⟩ ⊗ |k⟩`. Requires square Kraus operators.
pub fn stinespring_unitary(kraus: &[Matrix]) -> Result<Matrix> {
    let d = kraus.first().map(|k| k.nrows()).ok_or_else(|| Error::BadKraus("empty Kraus family".into()))?;
    let n = kraus.len();
    if kraus.iter().any(|k| k.nrows() != d || k.ncols() != d) {
        return Err(Error::BadKraus("dilation needs square Kraus operators".into()));
    }
    let mut partial = Matrix::from_element(d * n, d * n, ZERO);
    let mut fixed = Vec::with_capacity(d);
    for j in 0..d {
        for (k, kk) in kraus.iter().enumerate() {
            for i in 0..d {
                partial[(i * n + k, j * n)] = kk[(i, j)];
            }
        }
        fixed.push(j * n);
    }
    complete_unitary(&partial, &fixed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choi::{choi_from_kraus, random_instrument_kraus, random_instrument_on, to_kraus, KrausMap};
    use crate::tensor::{labels, op1};

    fn qubit_state(name: &str, seed: u64) -> LabeledOperator {
        op1(name, random::random_density(2, 2, &mut random::rng(seed)))
    }

    fn random_circuit(seed: u64, de: usize) -> (LabeledOperator, LabeledOperator, LabeledOperator) {
        let mut r = random::rng(seed);
        let rho = LabeledOperator::new(labels(&[("A1", 2), ("E", de)]), random::random_density(2 * de, 2 * de, &mut r)).unwrap();
        let u = LabeledOperator::new(labels(&[("A2", 2), ("E", de)]), random::haar_unitary(2 * de, &mut r)).unwrap();
        let v = LabeledOperator::new(labels(&[("B2", 2), ("E", de)]), random::haar_unitary(2 * de, &mut r)).unwrap();
        (rho, u, v)
    }

    /// Direct density-matrix propagation through the circuit with Kraus maps in the slots.
    fn simulate_direct(rho: &LabeledOperator, u: &LabeledOperator, v: &LabeledOperator, ka: &[Matrix], kb: &[Matrix]) -> Matrix {
        let s = rho.apply_kraus(ka, "A1", "A2").unwrap();
        let s = s.conjugate(u.matrix(), &u.names()).unwrap().relabel("A2", "B1").unwrap();
        let s = s.apply_kraus(kb, "B1", "B2").unwrap();
        let s = s.conjugate(v.matrix(), &v.names()).unwrap();
        let env: Vec<&str> = s.names().into_iter().filter(|n| *n != "B2").collect();
        s.partial_trace(&env).unwrap().into_matrix()
    }

    #[test]
    fn identity_process_returns_initial_state() {
        // E starts in |0⟩; U swaps A2 into E and V swaps B2 with E... simplest: trivial environment.
        let rho = qubit_state("A1", 1);
        let id = LabeledOperator::identity(labels(&[("A2", 2)])).unwrap();
        let idv = LabeledOperator::identity(labels(&[("B2", 2)])).unwrap();
        let comb = comb_from_circuit(&rho, &id, &idv).unwrap();
        let ma = ChoiOperator::identity("A2", "A1", 2).unwrap();
        let mb = ChoiOperator::identity("B2", "B1", 2).unwrap();
        let out = apply_comb(&comb, &ma, &mb).unwrap();
        assert!((out.matrix() - rho.matrix()).iter().all(|z| z.norm() < 1e-12));
        assert!((out.trace().re - 1.0).abs() < 1e-12);
        assert!((outcome_probability(&comb, &ma, &mb).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trivial_environment_matches_markovian() {
        let mut r = random::rng(2);
        let u = random::haar_unitary(2, &mut r);
        let v = random::haar_unitary(2, &mut r);
        let rho = qubit_state("A1", 3);
        let comb = comb_from_circuit(&rho, &op1("A2", u.clone()), &op1("B2", v.clone())).unwrap();
        let m =
            markovian_comb(&ChoiOperator::unitary("B1", "A2", &u).unwrap(), &ChoiOperator::unitary("f", "B2", &v).unwrap(), &rho)
                .unwrap();
        assert!(comb.op().max_abs_diff(m.op()).unwrap() < 1e-12);
    }

    #[test]
    fn random_circuits_satisfy_trace_conditions() {
        for seed in 0..20 {
            let (rho, u, v) = random_circuit(seed, 4);
            let comb = comb_from_circuit(&rho, &u, &v).unwrap();
            let rep = check_causal_order(&comb, Order::AliceFirst, 1e-10);
            assert!(rep.ok, "seed {seed}: {rep:?}");
        }
    }

    #[test]
    fn signalling_circuit_fails_reverse_order() {
        // U passes Alice's output straight to Bob's input; V swaps Bob's output into the environment.
        let swap = Matrix::from_fn(4, 4, |r, c| if c == (r % 2) * 2 + r / 2 { C64::new(1.0, 0.0) } else { ZERO });
        let rho = qubit_state("A1", 4).tensor(&op1("E", Matrix::identity(2, 2) * C64::new(0.5, 0.0))).unwrap();
        let u = LabeledOperator::new(labels(&[("A2", 2), ("E", 2)]), Matrix::identity(4, 4)).unwrap();
        let v = LabeledOperator::new(labels(&[("B2", 2), ("E", 2)]), swap).unwrap();
        let comb = comb_from_circuit(&rho, &u, &v).unwrap();
        assert!(check_causal_order(&comb, Order::AliceFirst, 1e-10).ok);
        assert!(!check_causal_order(&comb, Order::BobFirst, 1e-6).ok);
    }

    #[test]
    fn non_signalling_comb_passes_both_orders() {
        let op = qubit_state("f", 5)
            .tensor(&LabeledOperator::identity(labels(&[("B2", 2)])).unwrap())
            .unwrap()
            .tensor(&qubit_state("B1", 6))
            .unwrap()
            .tensor(&LabeledOperator::identity(labels(&[("A2", 2)])).unwrap())
            .unwrap()
            .tensor(&qubit_state("A1", 7))
            .unwrap();
        let comb = CombChoi::new(op, Order::AliceFirst).unwrap();
        assert!(check_causal_order(&comb, Order::AliceFirst, 1e-10).ok);
        assert!(check_causal_order(&comb, Order::BobFirst, 1e-10).ok);
    }

    #[test]
    fn apply_comb_matches_direct_simulation() {
        for seed in 0..100u64 {
            let (rho, u, v) = random_circuit(seed, 2);
            let comb = comb_from_circuit(&rho, &u, &v).unwrap();
            let fa = random_instrument_kraus(2, 2, 2, 500 + seed).unwrap();
            let fb = random_instrument_kraus(2, 2, 2, 900 + seed).unwrap();
            let (i, j) = ((seed % 2) as usize, ((seed / 2) % 2) as usize);
            let ma = choi_from_kraus(&KrausMap::new(Subsystem::new("A1", 2), Subsystem::new("A2", 2), fa[i].clone()).unwrap())
                .unwrap();
            let mb = choi_from_kraus(&KrausMap::new(Subsystem::new("B1", 2), Subsystem::new("B2", 2), fb[j].clone()).unwrap())
                .unwrap();
            let out = apply_comb(&comb, &ma, &mb).unwrap();
            let want = simulate_direct(&rho, &u, &v, &fa[i], &fb[j]);
            assert!((out.matrix() - want).iter().all(|z| z.norm() < 1e-10), "seed {seed}");
            let p = outcome_probability(&comb, &ma, &mb).unwrap();
            assert!((p - out.trace().re).abs() < 1e-12);
        }
    }

    #[test]
    fn instrument_probabilities_sum_to_one() {
        let (rho, u, v) = random_circuit(7, 2);
        let comb = comb_from_circuit(&rho, &u, &v).unwrap();
        let ia = random_instrument_on("A2", "A1", 2, 2, 2, 1).unwrap();
        let ib = random_instrument_on("B2", "B1", 2, 2, 2, 2).unwrap();
        let mut total = 0.0;
        for ma in ia.outcomes() {
            for mb in ib.outcomes() {
                let p = outcome_probability(&comb, ma, mb).unwrap();
                assert!(p > -1e-10 && p < 1.0 + 1e-10);
                total += p;
            }
        }
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn apply_comb_is_linear() {
        let (rho, u, v) = random_circuit(8, 2);
        let comb = comb_from_circuit(&rho, &u, &v).unwrap();
        let ia = random_instrument_on("A2", "A1", 2, 2, 2, 3).unwrap();
        let ib = random_instrument_on("B2", "B1", 2, 2, 1, 4).unwrap();
        let (m, m2, n) = (&ia.outcomes()[0], &ia.outcomes()[1], &ib.outcomes()[0]);
        let (a, b) = (0.3, -1.7);
        let mix = m.scale(a).add(&m2.scale(b)).unwrap();
        let lhs = apply_comb(&comb, &mix, n).unwrap();
        let rhs = apply_comb(&comb, m, n).unwrap().scale(a).add(&apply_comb(&comb, m2, n).unwrap().scale(b)).unwrap();
        assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-11);
    }

    #[test]
    fn correlated_ops_satisfy_constraints() {
        let a = random_correlated_op(CorrelatedDims::qubits(3), 5).unwrap();
        assert_eq!(a, random_correlated_op(CorrelatedDims::qubits(3), 5).unwrap());
        for seed in 0..100 {
            let m = random_correlated_op(CorrelatedDims::qubits(1 + (seed % 3) as usize), seed).unwrap();
            let (r1, r2, min) = m.residuals();
            assert!(r1 < 1e-10 && r2 < 1e-10 && min > -1e-10, "seed {seed}");
            let (rho, u, v) = random_circuit(1000 + seed, 2);
            let comb = comb_from_circuit(&rho, &u, &v).unwrap();
            let t = comb.wires().trace_product(&m.op().transpose()).unwrap();
            assert!((t.re - 1.0).abs() < 1e-9 && t.im.abs() < 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn trivial_memory_gives_product_of_channels() {
        let m = random_correlated_op(CorrelatedDims::qubits(1), 9).unwrap();
        let a = m.op().reduce_to(&["A2", "A1"]).unwrap().scale(0.5);
        let b = m.op().reduce_to(&["B2", "B1"]).unwrap().scale(0.5);
        let prod = b.tensor(&a).unwrap();
        assert!(m.op().max_abs_diff(&prod).unwrap() < 1e-12);
    }

    #[test]
    fn markovian_matches_stinespring_dilation() {
        let ka = random_instrument_kraus(2, 2, 1, 11).unwrap().remove(0);
        let kb = random_instrument_kraus(2, 2, 1, 12).unwrap().remove(0);
        let lambda =
            choi_from_kraus(&KrausMap::new(Subsystem::new("A2", 2), Subsystem::new("B1", 2), ka.clone()).unwrap()).unwrap();
        let xi = choi_from_kraus(&KrausMap::new(Subsystem::new("B2", 2), Subsystem::new("f", 2), kb.clone()).unwrap()).unwrap();
        let rho = qubit_state("A1", 13);
        let m = markovian_comb(&lambda, &xi, &rho).unwrap();

        let (na, nb) = (ka.len(), kb.len());
        let ua = stinespring_unitary(&ka).unwrap();
        let ub = stinespring_unitary(&kb).unwrap();
        let zero = |n: usize| {
            let mut z = Matrix::zeros(n, n);
            z[(0, 0)] = C64::new(1.0, 0.0);
            z
        };
        let rho_se = rho.tensor(&op1("E1", zero(na))).unwrap().tensor(&op1("E2", zero(nb))).unwrap();
        let u = LabeledOperator::new(labels(&[("A2", 2), ("E1", na)]), ua)
            .unwrap()
            .tensor(&LabeledOperator::identity(labels(&[("E2", nb)])).unwrap())
            .unwrap();
        let v = LabeledOperator::new(labels(&[("B2", 2), ("E2", nb)]), ub)
            .unwrap()
            .tensor(&LabeledOperator::identity(labels(&[("E1", na)])).unwrap())
            .unwrap()
            .permute(&["B2", "E1", "E2"])
            .unwrap();
        let comb = comb_from_circuit(&rho_se, &u, &v).unwrap();
        assert!(comb.op().max_abs_diff(m.op()).unwrap() < 1e-9);

        let not_cptp = ChoiOperator::from_operator(lambda.op().scale(0.5)).unwrap();
        assert_eq!(markovian_comb(&not_cptp, &xi, &rho), Err(Error::NotCptp));
        let _ = to_kraus(&lambda).unwrap();
    }

    #[test]
    fn identity_channels_give_phi_pair_chain() {
        let rho = qubit_state("A1", 14);
        let m =
            markovian_comb(&ChoiOperator::identity("B1", "A2", 2).unwrap(), &ChoiOperator::identity("f", "B2", 2).unwrap(), &rho)
                .unwrap();
        let want = phi_plus("f", "B2", 2).unwrap().tensor(&phi_plus("B1", "A2", 2).unwrap()).unwrap().tensor(&rho).unwrap();
        assert!(m.op().max_abs_diff(&want).unwrap() < 1e-15);
    }

    #[test]
    fn non_unitary_rejected() {
        let rho = qubit_state("A1", 1);
        let bad = op1("A2", Matrix::identity(2, 2) * C64::new(2.0, 0.0));
        let id = op1("B2", Matrix::identity(2, 2));
        assert!(matches!(comb_from_circuit(&rho, &bad, &id), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn comb_json_roundtrip() {
        let (rho, u, v) = random_circuit(3, 2);
        let comb = comb_from_circuit(&rho, &u, &v).unwrap();
        let text = crate::json::to_string(&comb).unwrap();
        assert!(text.contains("\"order\": \"AB\""));
        let back: CombChoi = crate::json::from_str(&text).unwrap();
        assert_eq!(back, comb);
    }
}
