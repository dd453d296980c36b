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

//! Quantum operations in Choi form.
//!
//! Choi operators are built on the unnormalized maximally entangled state
//! `Σ_nm |nn⟩⟨mm|` and stored with labels `[out, in]`, so the identity
//! channel has trace `d_in` and a channel satisfies `tr_out M = 𝟙_in`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::random;
use crate::tensor::{herm_eig_matrix, LabeledOperator, Matrix, Subsystem, C64, ZERO};

/// Default tolerance for Choi-level checks.
pub const CHOI_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct KrausMap {
    pub in_label: Subsystem,
    pub out_label: Subsystem,
    pub kraus: Vec<Matrix>,
}

impl KrausMap {
    pub fn new(in_label: Subsystem, out_label: Subsystem, kraus: Vec<Matrix>) -> Result<Self> {
        let m = KrausMap { in_label, out_label, kraus };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        let (din, dout) = (self.in_label.dim, self.out_label.dim);
        if self.kraus.is_empty() {
            return Err(Error::BadKraus("empty Kraus family".into()));
        }
        if let Some(k) = self.kraus.iter().find(|k| k.nrows() != dout || k.ncols() != din) {
            return Err(Error::BadKraus(format!("Kraus operator is {}x{}, expected {dout}x{din}", k.nrows(), k.ncols())));
        }
        let mut s = Matrix::zeros(din, din);
        for k in &self.kraus {
            s += k.adjoint() * k;
        }
        let top = herm_eig_matrix(&s).max();
        if top > 1.0 + CHOI_TOL {
            return Err(Error::BadKraus(format!("Σ K†K has eigenvalue {top:.6} > 1")));
        }
        Ok(())
    }

    /// `Σ_k K ρ K†` on a single-label `rho`.
    pub fn apply(&self, rho: &LabeledOperator) -> Result<LabeledOperator> {
        rho.apply_kraus(&self.kraus, &self.in_label.name, &self.out_label.name)
    }
}

/// A CP map in Choi form, labels `[out, in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiOperator {
    op: LabeledOperator,
}

impl ChoiOperator {
    /// Wrap a positive operator with `tr_out M ≤ 𝟙_in`.
    pub fn new(op: LabeledOperator) -> Result<Self> {
        let c = Self::from_operator(op)?;
        let eig = c.op.herm_eig()?;
        if eig.min() < -CHOI_TOL {
            return Err(Error::NotPsd(eig.min()));
        }
        let top = c.op.partial_trace(&[c.out_name()])?.herm_eig()?.max();
        if top > 1.0 + CHOI_TOL {
            return Err(Error::BadKraus(format!("tr_out M has eigenvalue {top:.6} > 1")));
        }
        Ok(c)
    }

    /// Wrap an operator checking only that it has exactly two subsystems.
    /// Used for linear combinations of Choi operators.
    pub fn from_operator(op: LabeledOperator) -> Result<Self> {
        if op.labels().len() != 2 {
            return Err(Error::BadDimension(format!("Choi operator needs labels [out, in], got {:?}", op.names())));
        }
        Ok(ChoiOperator { op })
    }

    pub fn op(&self) -> &LabeledOperator {
        &self.op
    }

    pub fn out_label(&self) -> &Subsystem {
        &self.op.labels()[0]
    }

    pub fn in_label(&self) -> &Subsystem {
        &self.op.labels()[1]
    }

    pub fn out_name(&self) -> &str {
        &self.out_label().name
    }

    pub fn in_name(&self) -> &str {
        &self.in_label().name
    }

    /// Same map on renamed wires.
    pub fn relabel(&self, out_name: &str, in_name: &str) -> Result<Self> {
        let labels = vec![Subsystem::new(out_name, self.out_label().dim), Subsystem::new(in_name, self.in_label().dim)];
        Ok(ChoiOperator { op: self.op.with_labels(labels)? })
    }

    pub fn scale(&self, s: f64) -> Self {
        ChoiOperator { op: self.op.scale(s) }
    }

    pub fn add(&self, other: &ChoiOperator) -> Result<Self> {
        Ok(ChoiOperator { op: self.op.add(&other.op)? })
    }

    /// Identity channel from `in_name` to `out_name`.
    pub fn identity(out_name: &str, in_name: &str, d: usize) -> Result<Self> {
        let mut vec = vec![ZERO; d * d];
        for n in 0..d {
            vec[n * d + n] = C64::new(1.0, 0.0);
        }
        let op = LabeledOperator::projector(vec![Subsystem::new(out_name, d), Subsystem::new(in_name, d)], &vec)?;
        Ok(ChoiOperator { op })
    }

    /// Choi operator of `ρ ↦ U ρ U†`.
    pub fn unitary(out_name: &str, in_name: &str, u: &Matrix) -> Result<Self> {
        let k = KrausMap::new(Subsystem::new(in_name, u.ncols()), Subsystem::new(out_name, u.nrows()), vec![u.clone()])?;
        choi_from_kraus(&k)
    }
}

/// `M = Σ_k (K ⊗ 𝟙)(Σ_nm |nn⟩⟨mm|)(K ⊗ 𝟙)†` on `[out, in]`.
pub fn choi_from_kraus(m: &KrausMap) -> Result<ChoiOperator> {
    m.validate()?;
    if m.in_label.name == m.out_label.name {
        return Err(Error::LabelCollision(m.in_label.name.clone()));
    }
    let (din, dout) = (m.in_label.dim, m.out_label.dim);
    let d = din * dout;
    let mut acc = Matrix::zeros(d, d);
    for k in &m.kraus {
        let v = Matrix::from_fn(d, 1, |r, _| k[(r / din, r % din)]);
        acc += &v * v.adjoint();
    }
    let op = LabeledOperator::new(vec![m.out_label.clone(), m.in_label.clone()], acc)?;
    Ok(ChoiOperator { op })
}

/// Kraus operators `K_k[x2, x1] = √λ_k v_k[x2·d1 + x1]` from the spectral decomposition.
pub fn to_kraus(m: &ChoiOperator) -> Result<KrausMap> {
    let eig = m.op.herm_eig()?;
    if eig.min() < -CHOI_TOL {
        return Err(Error::NotPsd(eig.min()));
    }
    let (din, dout) = (m.in_label().dim, m.out_label().dim);
    let mut kraus = Vec::new();
    for (k, &l) in eig.values.iter().enumerate() {
        if l <= 1e-12 {
            continue;
        }
        let s = l.sqrt();
        kraus.push(Matrix::from_fn(dout, din, |x2, x1| eig.vectors[(x2 * din + x1, k)] * s));
    }
    if kraus.is_empty() {
        kraus.push(Matrix::zeros(dout, din));
    }
    KrausMap::new(m.in_label().clone(), m.out_label().clone(), kraus)
}

/// `ℳ(ρ) = tr_in[(𝟙_out ⊗ ρᵀ) M]`.
///
/// `rho` must carry the map's input label; any further subsystems of `rho`
/// are left untouched and the input wire is replaced by the output wire at
/// the front of the label list.
pub fn apply_choi(m: &ChoiOperator, rho: &LabeledOperator) -> Result<LabeledOperator> {
    let in_name = m.in_name();
    let din = m.in_label().dim;
    let dout = m.out_label().dim;
    match rho.labels().iter().find(|l| l.name == in_name) {
        Some(l) if l.dim == din => {}
        Some(l) => return Err(Error::BadDimension(format!("map input `{in_name}` has dimension {din}, state has {}", l.dim))),
        None => return Err(Error::BadDimension(format!("state has no subsystem `{in_name}`"))),
    }
    if m.out_name() != in_name && rho.has_label(m.out_name()) {
        return Err(Error::LabelCollision(m.out_name().to_string()));
    }
    let p = rho.bring_to_front(&[in_name])?;
    let rest = p.dim() / din;
    let mm = m.op.matrix();
    let pm = p.matrix();
    let mut out = Matrix::zeros(dout * rest, dout * rest);
    for x2 in 0..dout {
        for y2 in 0..dout {
            for z1 in 0..din {
                for x1 in 0..din {
                    let c = mm[(x2 * din + z1, y2 * din + x1)];
                    if c == ZERO {
                        continue;
                    }
                    for r in 0..rest {
                        for s in 0..rest {
                            out[(x2 * rest + r, y2 * rest + s)] += c * pm[(z1 * rest + r, x1 * rest + s)];
                        }
                    }
                }
            }
        }
    }
    let mut labels = p.labels().to_vec();
    labels[0] = m.out_label().clone();
    LabeledOperator::new(labels, out)
}

/// PSD within `tol` and `‖tr_out M − 𝟙_in‖_max < tol`.
pub fn is_cptp(m: &ChoiOperator, tol: f64) -> bool {
    if m.op.hermitian_residual() > tol.max(crate::tensor::HERMITIAN_TOL) {
        return false;
    }
    let min = herm_eig_matrix(m.op.matrix()).min();
    if min < -tol {
        return false;
    }
    match m.op.partial_trace(&[m.out_name()]) {
        Ok(t) => {
            let id = LabeledOperator::identity(t.labels().to_vec()).expect("valid labels");
            t.max_abs_diff(&id).map(|r| r < tol).unwrap_or(false)
        }
        Err(_) => false,
    }
}

/// Outcome-indexed family of CP maps summing to a channel.
#[derive(Clone, Debug, PartialEq)]
pub struct Instrument {
    outcomes: Vec<ChoiOperator>,
}

impl Instrument {
    pub fn new(outcomes: Vec<ChoiOperator>) -> Result<Self> {
        let first = outcomes.first().ok_or_else(|| Error::BadKraus("instrument has no outcomes".into()))?;
        let mut sum = first.op.clone();
        for o in &outcomes[1..] {
            if o.out_label() != first.out_label() || o.in_label() != first.in_label() {
                return Err(Error::BadDimension("instrument outcomes act on different wires".into()));
            }
            sum = sum.add(&o.op)?;
        }
        for o in &outcomes {
            let min = o.op.min_eigenvalue()?;
            if min < -CHOI_TOL {
                return Err(Error::NotPsd(min));
            }
        }
        if !is_cptp(&ChoiOperator::from_operator(sum)?, CHOI_TOL) {
            return Err(Error::NotCptp);
        }
        Ok(Instrument { outcomes })
    }

    pub fn outcomes(&self) -> &[ChoiOperator] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn in_dim(&self) -> usize {
        self.outcomes[0].in_label().dim
    }

    pub fn out_dim(&self) -> usize {
        self.outcomes[0].out_label().dim
    }

    /// Sum over outcomes: the underlying channel.
    pub fn channel(&self) -> ChoiOperator {
        let mut sum = self.outcomes[0].clone();
        for o in &self.outcomes[1..] {
            sum = sum.add(o).expect("outcomes share wires");
        }
        sum
    }

    pub fn relabel(&self, out_name: &str, in_name: &str) -> Result<Self> {
        let outcomes = self.outcomes.iter().map(|o| o.relabel(out_name, in_name)).collect::<Result<Vec<_>>>()?;
        Ok(Instrument { outcomes })
    }
}

#[derive(Serialize, Deserialize)]
struct InstrumentJson {
    outcomes: Vec<LabeledOperator>,
    in_dim: usize,
    out_dim: usize,
}

impl Serialize for Instrument {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        InstrumentJson {
            outcomes: self.outcomes.iter().map(|o| o.op.clone()).collect(),
            in_dim: self.in_dim(),
            out_dim: self.out_dim(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Instrument {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = InstrumentJson::deserialize(d)?;
        let outcomes = j.outcomes.into_iter().map(ChoiOperator::new).collect::<Result<Vec<_>>>().map_err(D::Error::custom)?;
        let inst = Instrument::new(outcomes).map_err(D::Error::custom)?;
        if inst.in_dim() != j.in_dim || inst.out_dim() != j.out_dim {
            return Err(D::Error::custom("in_dim/out_dim disagree with the outcome operators"));
        }
        Ok(inst)
    }
}

/// Kraus families of a seeded random instrument.
///
/// A Haar unitary on `d_in · n · d_out` dimensions is restricted to its first
/// `d_in` columns, giving an isometry into `out ⊗ outcome ⊗ junk` with a junk
/// space of dimension `d_in`; outcome `i` collects the `d_in` Kraus blocks
/// `K_{i,k}` of that isometry.
pub fn random_instrument_kraus(d_in: usize, d_out: usize, n_outcomes: usize, seed: u64) -> Result<Vec<Vec<Matrix>>> {
    if d_in == 0 || d_out == 0 || n_outcomes == 0 {
        return Err(Error::BadDimension(format!(
            "random instrument needs positive dimensions, got d_in={d_in}, d_out={d_out}, n={n_outcomes}"
        )));
    }
    let n = d_out * n_outcomes * d_in;
    let v = random::haar_isometry(n, d_in, &mut random::rng(seed));
    Ok((0..n_outcomes)
        .map(|i| (0..d_in).map(|k| Matrix::from_fn(d_out, d_in, |o, c| v[((o * n_outcomes + i) * d_in + k, c)])).collect())
        .collect())
}

/// Seeded random instrument with wires named `out_name`/`in_name`.
pub fn random_instrument_on(
    out_name: &str,
    in_name: &str,
    d_in: usize,
    d_out: usize,
    n_outcomes: usize,
    seed: u64,
) -> Result<Instrument> {
    let families = random_instrument_kraus(d_in, d_out, n_outcomes, seed)?;
    let outcomes = families
        .into_iter()
        .map(|kraus| {
            choi_from_kraus(&KrausMap {
                in_label: Subsystem::new(in_name, d_in),
                out_label: Subsystem::new(out_name, d_out),
                kraus,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Instrument { outcomes })
}

/// Seeded random instrument on the generic wires `[out, in]`.
pub fn random_instrument(d_in: usize, d_out: usize, n_outcomes: usize, seed: u64) -> Result<Instrument> {
    random_instrument_on("out", "in", d_in, d_out, n_outcomes, seed)
}

/// Measure in an orthonormal basis and prepare `preps[m]` on outcome `m`.
/// Outcome `m` has Choi operator `ρ_m ⊗ (|m⟩⟨m|)ᵀ`.
pub fn measure_prepare_instrument(
    out_name: &str,
    in_name: &str,
    basis: &[Vec<C64>],
    preps: &[LabeledOperator],
) -> Result<Instrument> {
    let d = basis.first().map(|b| b.len()).unwrap_or(0);
    if basis.is_empty() || basis.iter().any(|b| b.len() != d) {
        return Err(Error::BadBasis(f64::INFINITY));
    }
    if preps.len() != basis.len() {
        return Err(Error::BadDimension(format!("{} preparations for {} basis vectors", preps.len(), basis.len())));
    }
    let mut gram_err: f64 = 0.0;
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            let ip: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            gram_err = gram_err.max((ip - C64::new(want, 0.0)).norm());
        }
    }
    if basis.len() != d {
        gram_err = gram_err.max(1.0);
    }
    if gram_err > CHOI_TOL {
        return Err(Error::BadBasis(gram_err));
    }
    let mut outcomes = Vec::with_capacity(basis.len());
    for (ket, prep) in basis.iter().zip(preps) {
        if prep.labels().len() != 1 {
            return Err(Error::BadDimension("preparations must be single-wire states".into()));
        }
        let tr = prep.trace();
        let min = prep.min_eigenvalue()?;
        if (tr - C64::new(1.0, 0.0)).norm() > CHOI_TOL || min < -CHOI_TOL {
            return Err(Error::NotPsd(min));
        }
        let proj = LabeledOperator::projector(vec![Subsystem::new(in_name, d)], ket)?.transpose();
        let out = prep.with_labels(vec![Subsystem::new(out_name, prep.dim())])?;
        outcomes.push(ChoiOperator::from_operator(out.tensor(&proj)?)?);
    }
    Instrument::new(outcomes)
}

/// The computational basis of dimension `d` as kets.
pub fn computational_basis(d: usize) -> Vec<Vec<C64>> {
    (0..d).map(|i| (0..d).map(|j| if i == j { C64::new(1.0, 0.0) } else { ZERO }).collect()).collect()
}
