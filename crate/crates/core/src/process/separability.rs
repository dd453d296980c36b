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

//! Causal separability by Dykstra alternating projections.
//!
//! We look for `W = W1 + W2` with `W1 ⪰ 0` in the Alice-first term span and
//! `W2 ⪰ 0` in the Bob-first term span. The two convex sets are the product
//! of PSD cones and the affine set of decompositions; the latter is a
//! coefficient-wise projection in the Pauli basis. When the iteration stalls
//! an exact dual certificate is assembled from the PSD normal vectors.

use serde::{Deserialize, Serialize};

use super::{in_alice_first_span, in_bob_first_span, is_valid, project_valid, support, VALID_TOL};
use crate::error::{Error, Result};
use crate::tensor::{herm_eig_matrix, pauli_coefficients_unchecked, LabeledOperator, PauliExpansion};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparabilityStatus {
    Separable,
    NonSeparable,
    Undecided,
}

impl SeparabilityStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SeparabilityStatus::Separable => "separable",
            SeparabilityStatus::NonSeparable => "non_separable",
            SeparabilityStatus::Undecided => "undecided",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeparabilityOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Iterations between witness attempts.
    pub witness_every: usize,
}

impl Default for SeparabilityOptions {
    fn default() -> Self {
        SeparabilityOptions { tol: 1e-7, max_iter: 20_000, witness_every: 500 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityVerdict {
    pub status: SeparabilityStatus,
    /// Weight `tr W1 / tr W` of the Alice-first component.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q: Option<f64>,
    /// `max(‖W1 + W2 − W‖_max, ‖Wi − P_i Wi‖_max)` for the last PSD iterate.
    pub residual: f64,
    /// `[W1, W2]` (Alice first, Bob first), present when separable.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub components: Option<[LabeledOperator; 2]>,
    /// Normalized value `tr(S W) / (tr S / d_{A1B1})` of the certificate `S`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<LabeledOperator>,
    pub iterations: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Common,
    AliceOnly,
    BobOnly,
    Neither,
}

struct Problem {
    w: PauliExpansion,
    w_op: LabeledOperator,
    kinds: Vec<Kind>,
    d_a1b1: f64,
}

impl Problem {
    fn new(w_op: LabeledOperator) -> Self {
        let w = pauli_coefficients_unchecked(&w_op);
        let kinds = (0..w.coeffs.len())
            .map(|f| {
                let s = support(&w.multi_index(f));
                match (in_alice_first_span(s), in_bob_first_span(s)) {
                    (true, true) => Kind::Common,
                    (true, false) => Kind::AliceOnly,
                    (false, true) => Kind::BobOnly,
                    (false, false) => Kind::Neither,
                }
            })
            .collect();
        let d_a1b1 = w_op.dim_of_all(&["A1", "B1"]).expect("wires present") as f64;
        Problem { w, w_op, kinds, d_a1b1 }
    }

    fn coeffs(&self, op: &LabeledOperator) -> PauliExpansion {
        pauli_coefficients_unchecked(op)
    }

    fn rebuild(&self, c: &PauliExpansion) -> LabeledOperator {
        c.to_operator().expect("valid labels")
    }

    /// Nearest point of `{(y1, y2): y1 ∈ L1, y2 ∈ L2, y1 + y2 = W}`.
    fn project_affine(&self, x1: &PauliExpansion, x2: &PauliExpansion) -> (PauliExpansion, PauliExpansion) {
        let mut y1 = x1.clone();
        let mut y2 = x2.clone();
        for (f, kind) in self.kinds.iter().enumerate() {
            let w = self.w.coeffs[f];
            match kind {
                Kind::Common => {
                    let shift = (w - x1.coeffs[f] - x2.coeffs[f]) / 2.0;
                    y1.coeffs[f] = x1.coeffs[f] + shift;
                    y2.coeffs[f] = x2.coeffs[f] + shift;
                }
                Kind::AliceOnly => {
                    y1.coeffs[f] = w;
                    y2.coeffs[f] = 0.0;
                }
                Kind::BobOnly => {
                    y1.coeffs[f] = 0.0;
                    y2.coeffs[f] = w;
                }
                Kind::Neither => {
                    y1.coeffs[f] = 0.0;
                    y2.coeffs[f] = 0.0;
                }
            }
        }
        (y1, y2)
    }

    fn project_span(&self, c: &PauliExpansion, side: usize) -> PauliExpansion {
        let mut out = c.clone();
        for (f, kind) in self.kinds.iter().enumerate() {
            let keep = matches!((kind, side), (Kind::Common, _) | (Kind::AliceOnly, 0) | (Kind::BobOnly, 1));
            if !keep {
                out.coeffs[f] = 0.0;
            }
        }
        out
    }

    fn residual(&self, y: &[LabeledOperator; 2]) -> f64 {
        let sum = y[0].add(&y[1]).expect("aligned");
        let mut r = sum.max_abs_diff(&self.w_op).expect("aligned");
        for (side, yi) in y.iter().enumerate() {
            let proj = self.rebuild(&self.project_span(&self.coeffs(yi), side));
            r = r.max(yi.max_abs_diff(&proj).expect("aligned"));
        }
        r
    }

    /// Certificate built from the PSD normals at the affine iterate `x`.
    /// Returns `(normalized value, S)`.
    fn witness(&self, x: &[LabeledOperator; 2]) -> (f64, LabeledOperator) {
        let normals: Vec<LabeledOperator> = x
            .iter()
            .map(|xi| {
                let e = herm_eig_matrix(xi.matrix());
                LabeledOperator::new(xi.labels().to_vec(), e.map(|v| (-v).max(0.0))).expect("valid labels")
            })
            .collect();
        let n: Vec<PauliExpansion> = normals.iter().map(|m| self.coeffs(m)).collect();
        let mut s = n[0].clone();
        for (f, kind) in self.kinds.iter().enumerate() {
            s.coeffs[f] = match kind {
                Kind::Common => 0.5 * (n[0].coeffs[f] + n[1].coeffs[f]),
                Kind::AliceOnly => n[0].coeffs[f],
                Kind::BobOnly => n[1].coeffs[f],
                Kind::Neither => 0.0,
            };
        }
        let mut shift: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for side in 0..2 {
            let mut corr = self.project_span(&s, side);
            let pn = self.project_span(&n[side], side);
            for (c, p) in corr.coeffs.iter_mut().zip(&pn.coeffs) {
                *c -= p;
            }
            let p = normals[side].add(&self.rebuild(&corr)).expect("aligned");
            let e = herm_eig_matrix(p.matrix());
            shift = shift.max(-e.min());
            scale = scale.max(e.max().abs()).max(e.min().abs());
        }
        let c = shift.max(0.0) + 1e-12 * scale.max(1e-300);
        s.coeffs[0] += c;
        let s_op = self.rebuild(&s);
        let value = s_op.trace_product(&self.w_op).expect("aligned").re;
        let norm = s_op.trace().re / self.d_a1b1;
        (value / norm, s_op)
    }
}

fn psd_projection(m: &LabeledOperator) -> LabeledOperator {
    let e = herm_eig_matrix(m.matrix());
    LabeledOperator::new(m.labels().to_vec(), e.map(|v| v.max(0.0))).expect("valid labels")
}

fn is_psd(m: &LabeledOperator, tol: f64) -> bool {
    herm_eig_matrix(m.matrix()).min() >= -tol
}

fn separable(w: &LabeledOperator, comps: [LabeledOperator; 2], residual: f64, iterations: usize) -> SeparabilityVerdict {
    let q = comps[0].trace().re / w.trace().re;
    SeparabilityVerdict {
        status: SeparabilityStatus::Separable,
        q: Some(q),
        residual,
        components: Some(comps),
        witness_value: None,
        witness: None,
        iterations,
    }
}

/// Decide whether `W` is a convex mixture of an Alice-first and a Bob-first process.
pub fn is_causally_separable(w: &LabeledOperator, opts: SeparabilityOptions) -> Result<SeparabilityVerdict> {
    let rep = is_valid(w, VALID_TOL)?;
    if !rep.ok {
        return Err(Error::InvalidProcessMatrix(rep.summary()));
    }
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::BadParameter(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let w_op = project_valid(w)?;
    let pb = Problem::new(w_op.clone());
    let zero = w_op.scale(0.0);

    // Ordered inputs need no iteration.
    for side in 0..2 {
        let proj = pb.rebuild(&pb.project_span(&pb.w, side));
        if proj.max_abs_diff(&w_op)? < opts.tol * 1e-3 && is_psd(&w_op, opts.tol * 1e-3) {
            let comps = if side == 0 { [w_op.clone(), zero.clone()] } else { [zero.clone(), w_op.clone()] };
            let r = pb.residual(&comps);
            return Ok(separable(&w_op, comps, r, 0));
        }
    }

    let half = pb.coeffs(&w_op.scale(0.5));
    let (c1, c2) = pb.project_affine(&half, &half);
    let mut x = [pb.rebuild(&c1), pb.rebuild(&c2)];
    let mut p = [zero.clone(), zero.clone()];
    let mut residual = f64::INFINITY;
    let mut best_witness: Option<(f64, LabeledOperator)> = None;
    let every = opts.witness_every.max(1);

    for it in 1..=opts.max_iter {
        let z = [x[0].add(&p[0])?, x[1].add(&p[1])?];
        let y = [psd_projection(&z[0]), psd_projection(&z[1])];
        p = [z[0].sub(&y[0])?, z[1].sub(&y[1])?];
        let (a, b) = pb.project_affine(&pb.coeffs(&y[0]), &pb.coeffs(&y[1]));
        x = [pb.rebuild(&a), pb.rebuild(&b)];
        residual = pb.residual(&y);
        if residual < opts.tol {
            return Ok(separable(&w_op, y, residual, it));
        }
        if it % every == 0 && residual > 10.0 * opts.tol {
            let (value, s) = pb.witness(&x);
            if value < -10.0 * opts.tol {
                return Ok(SeparabilityVerdict {
                    status: SeparabilityStatus::NonSeparable,
                    q: None,
                    residual,
                    components: None,
                    witness_value: Some(value),
                    witness: Some(s),
                    iterations: it,
                });
            }
            if best_witness.as_ref().is_none_or(|(v, _)| value < *v) {
                best_witness = Some((value, s));
            }
        }
    }
    Ok(SeparabilityVerdict {
        status: SeparabilityStatus::Undecided,
        q: None,
        residual,
        components: None,
        witness_value: best_witness.as_ref().map(|(v, _)| *v),
        witness: None,
        iterations: opts.max_iter,
    })
}
