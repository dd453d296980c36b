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

//! Entanglement and nonlocality diagnostics for conditioned circuits.
//!
//! A causally non-separable branch needs an initial state entangled across
//! every system/environment cut and unitaries that are not product across the
//! system/environment cuts. The checks here are one-sided certificates: a
//! negative partial transpose proves entanglement, operator Schmidt rank one
//! proves a product unitary.

use serde::Serialize;

use crate::circuit::{is_proper, unnormalized, Circuit};
use crate::error::{Error, Result};
use crate::process::{
    in_alice_first_span, is_causally_separable, project_valid, support, SeparabilityOptions, SeparabilityStatus,
};
use crate::tensor::{pauli_coefficients_unchecked, LabeledOperator, Matrix};

/// `ppt` holds when the smallest partial-transpose eigenvalue is at least `−PPT_TOL`.
pub const PPT_TOL: f64 = 1e-9;
/// Relative cutoff on singular values for the operator Schmidt rank.
pub const SCHMIDT_TOL: f64 = 1e-10;
/// Tolerance of the identity-factor forms.
pub const FORM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    /// NPT across the cut.
    Entangled,
    /// PPT on a 2×2 or 2×3 cut.
    Separable,
    /// A state or unitary that factorizes exactly across the cut.
    Product,
    /// A unitary with operator Schmidt rank above one.
    Nonlocal,
    Inconclusive,
}

impl Certificate {
    /// Separable or product: the cut carries no quantum correlation.
    pub fn is_uncorrelated(self) -> bool {
        matches!(self, Certificate::Separable | Certificate::Product)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BipartitionReport {
    /// The operator's name in a report, e.g. `"rho"`, `"U"`, `"V"`.
    pub operator: String,
    pub cut: (Vec<String>, Vec<String>),
    /// Only set for states.
    pub ppt: Option<bool>,
    pub min_pt_eigenvalue: Option<f64>,
    pub schmidt_rank: usize,
    pub certified: Certificate,
}

fn split_cut<'a>(op: &'a LabeledOperator, side: &[&str]) -> Result<(Vec<&'a str>, Vec<&'a str>)> {
    let names = op.names();
    for s in side {
        if !names.contains(s) {
            return Err(Error::BadCut(format!("`{s}` is not a subsystem of {names:?}")));
        }
    }
    let left: Vec<&str> = names.iter().copied().filter(|n| side.contains(n)).collect();
    let right: Vec<&str> = names.iter().copied().filter(|n| !side.contains(n)).collect();
    if left.is_empty() || right.is_empty() || left.len() != side.len() {
        return Err(Error::BadCut(format!("{side:?} does not split {names:?} into two nonempty parts")));
    }
    Ok((left, right))
}

fn owned(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Singular values of the realigned operator across `side : rest`, descending.
pub fn operator_schmidt_values(op: &LabeledOperator, side: &[&str]) -> Result<Vec<f64>> {
    let (left, right) = split_cut(op, side)?;
    let mut order = left.clone();
    order.extend(&right);
    let p = op.permute(&order)?;
    let dl = op.dim_of_all(&left)?;
    let dr = op.dim_of_all(&right)?;
    let m = p.matrix();
    // R[(i, i'), (j, j')] = M[(i j), (i' j')]
    let r = Matrix::from_fn(dl * dl, dr * dr, |a, b| {
        let (i, i2) = (a / dl, a % dl);
        let (j, j2) = (b / dr, b % dr);
        m[(i * dr + j, i2 * dr + j2)]
    });
    let mut s: Vec<f64> = r.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Number of singular values above `tol · σ_max` of the operator realigned across `side : rest`.
pub fn operator_schmidt_rank(op: &LabeledOperator, side: &[&str], tol: f64) -> Result<usize> {
    let s = operator_schmidt_values(op, side)?;
    let max = s.first().copied().unwrap_or(0.0);
    Ok(s.iter().filter(|&&x| x > tol * max).count().max(1))
}

/// PPT test of a state across `side : rest`.
pub fn ppt_check(state: &LabeledOperator, side: &[&str]) -> Result<BipartitionReport> {
    let (left, right) = split_cut(state, side)?;
    let min = state.partial_transpose(&left)?.min_eigenvalue()?;
    let ppt = min >= -PPT_TOL;
    let rank = operator_schmidt_rank(state, &left, SCHMIDT_TOL)?;
    let small = {
        let (a, b) = (state.dim_of_all(&left)?, state.dim_of_all(&right)?);
        a * b <= 6
    };
    let certified = if !ppt {
        Certificate::Entangled
    } else if small {
        Certificate::Separable
    } else if rank == 1 {
        Certificate::Product
    } else {
        Certificate::Inconclusive
    };
    Ok(BipartitionReport {
        operator: "rho".into(),
        cut: (owned(&left), owned(&right)),
        ppt: Some(ppt),
        min_pt_eigenvalue: Some(min),
        schmidt_rank: rank,
        certified,
    })
}

/// Product test of a unitary across `side : rest`.
pub fn unitary_cut(name: &str, u: &LabeledOperator, side: &[&str]) -> Result<BipartitionReport> {
    let (left, right) = split_cut(u, side)?;
    let rank = operator_schmidt_rank(u, &left, SCHMIDT_TOL)?;
    Ok(BipartitionReport {
        operator: name.into(),
        cut: (owned(&left), owned(&right)),
        ppt: None,
        min_pt_eigenvalue: None,
        schmidt_rank: rank,
        certified: if rank == 1 { Certificate::Product } else { Certificate::Nonlocal },
    })
}

/// Names accepted by [`structural_form_check`].
pub const FORMS: [&str; 6] = ["identity_s2", "identity_a2", "identity_b2", "product_s2_s1", "product_a1", "product_b1"];

/// Whether `w` has the named form:
///
/// * `identity_s2`, `identity_a2`, `identity_b2`: `𝟙` on that factor tensored with the rest;
/// * `product_s2_s1`: `Θ_{S2} ⊗ ρ_{S1}`;
/// * `product_a1`, `product_b1`: `ω ⊗ ρ_{A1}` or `ω ⊗ ρ_{B1}`.
pub fn structural_form_check(w: &LabeledOperator, form: &str) -> Result<bool> {
    let scale = w.max_abs().max(f64::MIN_POSITIVE);
    let rank1 = |side: &[&str]| -> Result<bool> {
        let s = operator_schmidt_values(w, side)?;
        Ok(s.len() < 2 || s[1] <= 1e-9 * s[0].max(scale))
    };
    match form {
        "identity_s2" => Ok(w.identity_residual(&["A2", "B2"])? < FORM_TOL * scale.max(1.0)),
        "identity_a2" => Ok(w.identity_residual(&["A2"])? < FORM_TOL * scale.max(1.0)),
        "identity_b2" => Ok(w.identity_residual(&["B2"])? < FORM_TOL * scale.max(1.0)),
        "product_s2_s1" => rank1(&["B2", "A2"]),
        "product_a1" => rank1(&["A1"]),
        "product_b1" => rank1(&["B1"]),
        other => Err(Error::BadForm(other.to_string())),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResourceOptions {
    pub n_samples: usize,
    pub seed: u64,
    /// Properness tolerance on the sampled `p(μ)`.
    pub tol: f64,
    pub separability: SeparabilityOptions,
}

impl Default for ResourceOptions {
    fn default() -> Self {
        ResourceOptions { n_samples: 100, seed: 0, tol: 1e-8, separability: SeparabilityOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchReport {
    pub mu: usize,
    pub p_mu: f64,
    pub proper: bool,
    /// `separable`, `non_separable`, `undecided`, `improper` or `null`.
    pub verdict: String,
    /// Every Pauli term of `W^μ` lies in the Alice-first span.
    pub alice_first: bool,
    /// Forms from [`FORMS`] that `W^μ` has.
    pub forms: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResourceReport {
    pub kind: String,
    pub seed: u64,
    pub state_cuts: Vec<BipartitionReport>,
    pub unitary_cuts: Vec<BipartitionReport>,
    pub branches: Vec<BranchReport>,
    /// Some cut certifies the absence of a resource that non-separable branches need.
    pub resource_missing: bool,
    /// `resource_missing` implies no proper branch is `non_separable`.
    pub certificates_consistent: bool,
}

/// Branch verdicts joined with state and unitary cut certificates.
pub fn resource_report(c: &Circuit, opts: &ResourceOptions) -> Result<ResourceReport> {
    let (state_cuts, unitary_cuts) = match c {
        Circuit::Parallel(p) => {
            let env = p.env();
            let rho = p.rho();
            let state = vec![ppt_check(rho, &["A1"])?, ppt_check(rho, &["B1"])?, ppt_check(rho, &env)?];
            let v = p.v();
            let unit = vec![unitary_cut("V", v, &["A2"])?, unitary_cut("V", v, &["B2"])?, unitary_cut("V", v, &["A2", "B2"])?];
            (state, unit)
        }
        Circuit::Serial(s) => {
            let state = vec![ppt_check(s.rho(), &["A1"])?];
            let unit = vec![unitary_cut("U", s.u(), &["A2"])?, unitary_cut("V", s.v(), &["B2"])?];
            (state, unit)
        }
    };
    let resource_missing = state_cuts.iter().chain(&unitary_cuts).any(|r| r.certified.is_uncorrelated());

    let mut branches = Vec::with_capacity(c.n_outcomes());
    for mu in 0..c.n_outcomes() {
        branches.push(branch_report(c, mu, opts)?);
    }
    let certificates_consistent = !resource_missing || branches.iter().all(|b| b.verdict != "non_separable");
    Ok(ResourceReport {
        kind: c.kind().into(),
        seed: opts.seed,
        state_cuts,
        unitary_cuts,
        branches,
        resource_missing,
        certificates_consistent,
    })
}

/// Verdict and structural forms of branch `μ`.
pub fn branch_report(c: &Circuit, mu: usize, opts: &ResourceOptions) -> Result<BranchReport> {
    let w_tilde = unnormalized(c, mu)?;
    let d_a2b2 = w_tilde.dim_of_all(&["A2", "B2"])? as f64;
    let p_mu = w_tilde.trace().re / d_a2b2;
    if p_mu < crate::circuit::NULL_OUTCOME_TOL {
        return Ok(BranchReport { mu, p_mu, proper: false, verdict: "null".into(), alice_first: false, forms: vec![] });
    }
    let w = w_tilde.scale(1.0 / p_mu);
    let forms = FORMS.iter().filter(|f| structural_form_check(&w, f).unwrap_or(false)).map(|f| f.to_string()).collect();
    let proper = is_proper(c, mu, opts.n_samples, opts.seed, opts.tol)?.proper;
    if !proper {
        return Ok(BranchReport { mu, p_mu, proper, verdict: "improper".into(), alice_first: false, forms });
    }
    // drop the rounding-level forbidden terms left by the reconstruction
    let w = project_valid(&w)?;
    let coeffs = pauli_coefficients_unchecked(&w);
    let cutoff = 1e-9 * coeffs.coeffs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let alice_first = coeffs.iter().all(|(idx, x)| x.abs() <= cutoff || in_alice_first_span(support(&idx)));
    let verdict = match is_causally_separable(&w, opts.separability) {
        Ok(v) => v.status.as_str().to_string(),
        Err(Error::InvalidProcessMatrix(_)) => "improper".into(),
        Err(e) => return Err(e),
    };
    debug_assert!(verdict != SeparabilityStatus::NonSeparable.as_str() || !alice_first);
    Ok(BranchReport { mu, p_mu, proper, verdict, alice_first, forms })
}
