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

//! Seeded random circuit families.

use rand::Rng;

use crate::error::{Error, Result};
use crate::random::{haar_unitary, random_density, random_ket, rng};
use crate::tensor::{labels, LabeledOperator, Matrix, Subsystem, C64};

use super::{eye, ParallelCircuit, SerialCircuit};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StatePattern {
    /// Full-rank random state on systems and environment.
    Generic,
    /// `ρ_{S1} ⊗ ρ_E`.
    ProductS1E,
    /// `ρ_{A1} ⊗ ρ_{B1 E}`.
    ProductA1,
    /// `ρ_{B1} ⊗ ρ_{A1 E}`.
    ProductB1,
    /// A random convex mixture of the three product patterns.
    Mixture,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnitaryPattern {
    Generic,
    /// `V_{S2} ⊗ V_E`.
    ProductS2E,
    /// `V_{A2} ⊗ V_{B2 E}`.
    ProductA2,
    /// `V_{B2} ⊗ V_{A2 E}`.
    ProductB2,
    /// `Σ_k U_k ⊗ |e_k⟩⟨e_k|` for a random environment basis `{e_k}`, which
    /// also fixes the measurement: `Π^(μ)` groups basis vectors round-robin.
    Controlled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectorPattern {
    /// A random basis split round-robin into `n_outcomes` groups.
    Random,
    /// A random rank-one projector and its complement.
    RandomRankOne,
    /// The single projector `𝟙`.
    Trivial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParallelSpec {
    /// Qubit system wires; `d_env` is the dimension of the single environment wire `E`.
    pub d_env: usize,
    pub n_outcomes: usize,
    pub state: StatePattern,
    pub unitary: UnitaryPattern,
    pub projectors: ProjectorPattern,
}

impl ParallelSpec {
    pub fn generic(d_env: usize, n_outcomes: usize) -> Self {
        ParallelSpec {
            d_env,
            n_outcomes,
            state: StatePattern::Generic,
            unitary: UnitaryPattern::Generic,
            projectors: ProjectorPattern::Random,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SerialPattern {
    Generic,
    /// An extra register `R` that no gate touches and that alone is measured.
    DecoupledRegister,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SerialSpec {
    pub d_env: usize,
    /// Only [`StatePattern::Generic`] and [`StatePattern::ProductS1E`] (read as `ρ_{A1} ⊗ η_E`) apply.
    pub state: StatePattern,
    pub n_outcomes: usize,
    pub pattern: SerialPattern,
    pub projectors: ProjectorPattern,
}

impl SerialSpec {
    pub fn generic(d_env: usize, n_outcomes: usize) -> Self {
        SerialSpec {
            d_env,
            state: StatePattern::Generic,
            n_outcomes,
            pattern: SerialPattern::Generic,
            projectors: ProjectorPattern::Random,
        }
    }
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Projector family on a single wire.
pub fn random_projectors<R: Rng>(
    name: &str,
    d: usize,
    n: usize,
    pattern: ProjectorPattern,
    r: &mut R,
) -> Result<Vec<LabeledOperator>> {
    let wire = vec![Subsystem::new(name, d)];
    match pattern {
        ProjectorPattern::Trivial => Ok(vec![LabeledOperator::identity(wire)?]),
        ProjectorPattern::RandomRankOne => {
            let p = LabeledOperator::projector(wire.clone(), &random_ket(d, r))?;
            let q = LabeledOperator::identity(wire)?.sub(&p)?;
            Ok(vec![p, q])
        }
        ProjectorPattern::Random => basis_projectors(name, &haar_unitary(d, r), n),
    }
}

/// Columns of `basis` grouped round-robin into `n` projectors.
fn basis_projectors(name: &str, basis: &Matrix, n: usize) -> Result<Vec<LabeledOperator>> {
    let d = basis.nrows();
    if n == 0 || n > d {
        return Err(Error::BadParameter(format!("{n} outcomes need 1 ≤ n ≤ {d}")));
    }
    let wire = vec![Subsystem::new(name, d)];
    (0..n)
        .map(|g| {
            let mut m = Matrix::zeros(d, d);
            for k in (g..d).step_by(n) {
                let col = basis.column(k);
                m += col * col.adjoint();
            }
            LabeledOperator::new(wire.clone(), m)
        })
        .collect()
}

fn density(spec: &[(&str, usize)], r: &mut impl Rng) -> Result<LabeledOperator> {
    let l = labels(spec);
    let d = l.iter().map(|s| s.dim).product();
    LabeledOperator::new(l, random_density(d, d, r))
}

fn unitary(spec: &[(&str, usize)], r: &mut impl Rng) -> Result<LabeledOperator> {
    let l = labels(spec);
    let d = l.iter().map(|s| s.dim).product();
    LabeledOperator::new(l, haar_unitary(d, r))
}

fn parallel_state(pattern: StatePattern, de: usize, r: &mut impl Rng) -> Result<LabeledOperator> {
    let order = ["A1", "B1", "E"];
    match pattern {
        StatePattern::Generic => density(&[("A1", 2), ("B1", 2), ("E", de)], r),
        StatePattern::ProductS1E => density(&[("A1", 2), ("B1", 2)], r)?.tensor(&density(&[("E", de)], r)?),
        StatePattern::ProductA1 => density(&[("A1", 2)], r)?.tensor(&density(&[("B1", 2), ("E", de)], r)?),
        StatePattern::ProductB1 => density(&[("B1", 2)], r)?.tensor(&density(&[("A1", 2), ("E", de)], r)?)?.permute(&order),
        StatePattern::Mixture => {
            let w: Vec<f64> = (0..3).map(|_| r.random::<f64>() + 0.05).collect();
            let total: f64 = w.iter().sum();
            let mut acc = parallel_state(StatePattern::ProductS1E, de, r)?.scale(w[0] / total);
            acc = acc.add(&parallel_state(StatePattern::ProductA1, de, r)?.scale(w[1] / total))?;
            acc.add(&parallel_state(StatePattern::ProductB1, de, r)?.scale(w[2] / total))
        }
    }
}

pub fn random_parallel(spec: &ParallelSpec, seed: u64) -> Result<ParallelCircuit> {
    let mut r = rng(seed);
    let de = spec.d_env;
    let rho = parallel_state(spec.state, de, &mut r)?;
    let order = ["A2", "B2", "E"];
    let (v, basis) = match spec.unitary {
        UnitaryPattern::Generic => (unitary(&[("A2", 2), ("B2", 2), ("E", de)], &mut r)?, None),
        UnitaryPattern::ProductS2E => (unitary(&[("A2", 2), ("B2", 2)], &mut r)?.tensor(&unitary(&[("E", de)], &mut r)?)?, None),
        UnitaryPattern::ProductA2 => (unitary(&[("A2", 2)], &mut r)?.tensor(&unitary(&[("B2", 2), ("E", de)], &mut r)?)?, None),
        UnitaryPattern::ProductB2 => {
            (unitary(&[("B2", 2)], &mut r)?.tensor(&unitary(&[("A2", 2), ("E", de)], &mut r)?)?.permute(&order)?, None)
        }
        UnitaryPattern::Controlled => {
            let basis = haar_unitary(de, &mut r);
            let mut v = Matrix::zeros(4 * de, 4 * de);
            for k in 0..de {
                let col = basis.column(k);
                v += haar_unitary(4, &mut r).kronecker(&(col * col.adjoint()));
            }
            (LabeledOperator::new(labels(&[("A2", 2), ("B2", 2), ("E", de)]), v)?, Some(basis))
        }
    };
    let projectors = match basis {
        Some(b) => basis_projectors("E", &b, spec.n_outcomes)?,
        None => random_projectors("E", de, spec.n_outcomes, spec.projectors, &mut r)?,
    };
    ParallelCircuit::new(rho, v, projectors)
}

pub fn random_serial(spec: &SerialSpec, seed: u64) -> Result<SerialCircuit> {
    let mut r = rng(seed);
    let de = spec.d_env;
    let mut rho = match spec.state {
        StatePattern::Generic => density(&[("A1", 2), ("E", de)], &mut r)?,
        StatePattern::ProductS1E => density(&[("A1", 2)], &mut r)?.tensor(&density(&[("E", de)], &mut r)?)?,
        other => return Err(Error::BadParameter(format!("state pattern {other:?} needs a parallel circuit"))),
    };
    let mut u = LabeledOperator::new(labels(&[("A2", 2), ("E", de)]), haar_unitary(2 * de, &mut r))?;
    let mut v = LabeledOperator::new(labels(&[("B2", 2), ("E", de)]), haar_unitary(2 * de, &mut r))?;
    let projectors = match spec.pattern {
        SerialPattern::Generic => random_projectors("E", de, spec.n_outcomes, spec.projectors, &mut r)?,
        SerialPattern::DecoupledRegister => {
            let dr = spec.n_outcomes.max(2);
            let reg = labels(&[("R", dr)]);
            rho = rho.tensor(&LabeledOperator::new(reg.clone(), random_density(dr, dr, &mut r))?)?;
            u = u.tensor(&LabeledOperator::identity(reg.clone())?)?;
            v = v.tensor(&LabeledOperator::identity(reg.clone())?)?;
            let id_e = LabeledOperator::identity(labels(&[("E", de)]))?;
            random_projectors("R", dr, spec.n_outcomes, spec.projectors, &mut r)?
                .into_iter()
                .map(|p| id_e.tensor(&p))
                .collect::<Result<_>>()?
        }
    };
    SerialCircuit::new(rho, u, v, projectors)
}

/// A serial circuit that stores Bob's input in a memory wire `M`, parks
/// Alice's output in a register `R` and replays a random parallel circuit on
/// `[R, B2, E]`; returned together with that parallel circuit.
pub fn serial_parallel_pair(seed: u64) -> Result<(SerialCircuit, ParallelCircuit)> {
    let pc = random_parallel(&ParallelSpec::generic(2, 2), seed)?;
    let ket0 = {
        let mut m = Matrix::zeros(2, 2);
        m[(0, 0)] = c(1.0);
        m
    };
    let rho = pc
        .rho()
        .relabel("B1", "M")?
        .tensor(&LabeledOperator::new(labels(&[("R", 2)]), ket0)?)?
        .permute(&["A1", "M", "R", "E"])?;
    // |a, m, r⟩ ↦ |m, r, a⟩ on [A2, M, R], identity on E
    let mut cyc = Matrix::zeros(8, 8);
    for a in 0..2 {
        for m in 0..2 {
            for rr in 0..2 {
                cyc[((m * 2 + rr) * 2 + a, (a * 2 + m) * 2 + rr)] = c(1.0);
            }
        }
    }
    let u = LabeledOperator::new(labels(&[("A2", 2), ("M", 2), ("R", 2), ("E", 2)]), cyc.kronecker(&eye(2)))?;
    let v =
        pc.v().relabel("A2", "R")?.tensor(&LabeledOperator::identity(labels(&[("M", 2)]))?)?.permute(&["B2", "M", "R", "E"])?;
    let id_mr = LabeledOperator::identity(labels(&[("M", 2), ("R", 2)]))?;
    let projectors = pc.projectors().iter().map(|p| id_mr.tensor(p)).collect::<Result<Vec<_>>>()?;
    Ok((SerialCircuit::new(rho, u, v, projectors)?, pc))
}

/// A memoryless serial circuit: `U` and `V` dilate random mixed-unitary
/// channels `Σ_k p_k U_k · U_k†` into separate fresh registers `E1`, `E2`
/// (dimension `n_kraus`), and both registers are measured in the
/// computational basis, outcome `μ = a·n_kraus + b`.
pub fn markovian_serial(n_kraus: usize, seed: u64) -> Result<SerialCircuit> {
    if n_kraus == 0 {
        return Err(Error::BadParameter("need at least one Kraus operator".into()));
    }
    let mut r = rng(seed);
    let mixed_unitary = |r: &mut rand_chacha::ChaCha8Rng| -> Result<Matrix> {
        let w: Vec<f64> = (0..n_kraus).map(|_| r.random::<f64>() + 0.05).collect();
        let total: f64 = w.iter().sum();
        let kraus: Vec<Matrix> = w.iter().map(|p| haar_unitary(2, r) * c((p / total).sqrt())).collect();
        crate::comb::stinespring_unitary(&kraus)
    };
    let n = n_kraus;
    let su = mixed_unitary(&mut r)?;
    let sv = mixed_unitary(&mut r)?;
    let rho = density(&[("A1", 2)], &mut r)?
        .tensor(&LabeledOperator::projector(labels(&[("E1", n)]), &unit(n, 0))?)?
        .tensor(&LabeledOperator::projector(labels(&[("E2", n)]), &unit(n, 0))?)?;
    let u =
        LabeledOperator::new(labels(&[("A2", 2), ("E1", n)]), su)?.tensor(&LabeledOperator::identity(labels(&[("E2", n)]))?)?;
    let v = LabeledOperator::new(labels(&[("B2", 2), ("E2", n)]), sv)?
        .tensor(&LabeledOperator::identity(labels(&[("E1", n)]))?)?
        .permute(&["B2", "E1", "E2"])?;
    let mut projectors = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let p = LabeledOperator::projector(labels(&[("E1", n)]), &unit(n, a))?
                .tensor(&LabeledOperator::projector(labels(&[("E2", n)]), &unit(n, b))?)?;
            projectors.push(p);
        }
    }
    SerialCircuit::new(rho, u, v, projectors)
}

fn unit(d: usize, k: usize) -> Vec<C64> {
    let mut v = vec![c(0.0); d];
    v[k] = c(1.0);
    v
}
