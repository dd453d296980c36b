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

//! Dense operators over ordered lists of named subsystems.
//!
//! Every operator in the crate (states, Choi operators, unitaries, process
//! matrices) is a [`LabeledOperator`]. The index convention is fixed: for
//! labels `[a, b]` the composite row index is `i_a * d_b + i_b`, i.e. the
//! first label is the most significant digit. Kronecker products therefore
//! concatenate label lists and reordering subsystems is an explicit
//! [`LabeledOperator::permute`].

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Matrix = DMatrix<C64>;

/// Hermiticity tolerance used by spectral routines.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues above `-PSD_CLAMP_TOL` are clamped to zero by [`LabeledOperator::psd_sqrt`].
pub const PSD_CLAMP_TOL: f64 = 1e-10;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// A named tensor factor.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Subsystem {
    pub name: String,
    pub dim: usize,
}

impl Subsystem {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        Subsystem { name: name.into(), dim }
    }
}

/// Shorthand for building label lists in code and tests.
pub fn labels(spec: &[(&str, usize)]) -> Vec<Subsystem> {
    spec.iter().map(|&(n, d)| Subsystem::new(n, d)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "crate::json::OperatorJson", try_from = "crate::json::OperatorJson")]
pub struct LabeledOperator {
    labels: Vec<Subsystem>,
    matrix: Matrix,
}

/// Spectral decomposition of a Hermitian operator, eigenvalues descending.
#[derive(Clone, Debug)]
pub struct HermEig {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: Matrix,
}

impl HermEig {
    /// Rebuild `Σ f(λ_k) v_k v_k†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (k, &v) in self.values.iter().enumerate() {
            let s = C64::new(f(v), 0.0);
            for r in 0..n {
                scaled[(r, k)] *= s;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

fn check_labels(labels: &[Subsystem]) -> Result<usize> {
    let mut total = 1usize;
    for (k, l) in labels.iter().enumerate() {
        if l.dim == 0 {
            return Err(Error::BadDimension(format!("subsystem `{}` has dimension 0", l.name)));
        }
        if labels[..k].iter().any(|o| o.name == l.name) {
            return Err(Error::LabelCollision(l.name.clone()));
        }
        total *= l.dim;
    }
    Ok(total)
}

/// Row-major strides: the first label varies slowest.
fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

fn digits(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
}

impl LabeledOperator {
    pub fn new(labels: Vec<Subsystem>, matrix: Matrix) -> Result<Self> {
        let total = check_labels(&labels)?;
        if matrix.nrows() != total || matrix.ncols() != total {
            return Err(Error::BadDimension(format!(
                "matrix is {}x{} but labels span dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                total
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::BadParameter("matrix has non-finite entries".into()));
        }
        Ok(LabeledOperator { labels, matrix })
    }

    pub fn identity(labels: Vec<Subsystem>) -> Result<Self> {
        let d = check_labels(&labels)?;
        Ok(LabeledOperator { labels, matrix: Matrix::identity(d, d) })
    }

    pub fn zeros(labels: Vec<Subsystem>) -> Result<Self> {
        let d = check_labels(&labels)?;
        Ok(LabeledOperator { labels, matrix: Matrix::zeros(d, d) })
    }

    /// Single-subsystem operator from a real row-major table.
    pub fn from_real(name: &str, rows: &[&[f64]]) -> Result<Self> {
        let d = rows.len();
        let m = Matrix::from_fn(d, d, |i, j| C64::new(rows[i][j], 0.0));
        Self::new(vec![Subsystem::new(name, d)], m)
    }

    /// `|ψ⟩⟨ψ|` for a ket over `labels`.
    pub fn projector(labels: Vec<Subsystem>, ket: &[C64]) -> Result<Self> {
        let d = check_labels(&labels)?;
        if ket.len() != d {
            return Err(Error::BadDimension(format!("ket of length {} for dimension {d}", ket.len())));
        }
        let m = Matrix::from_fn(d, d, |i, j| ket[i] * ket[j].conj());
        Self::new(labels, m)
    }

    pub fn labels(&self) -> &[Subsystem] {
        &self.labels
    }

    pub fn names(&self) -> Vec<&str> {
        self.labels.iter().map(|l| l.name.as_str()).collect()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.dim).collect()
    }

    pub fn has_label(&self, name: &str) -> bool {
        self.labels.iter().any(|l| l.name == name)
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.labels.iter().position(|l| l.name == name).ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    pub fn dim_of(&self, name: &str) -> Result<usize> {
        Ok(self.labels[self.position(name)?].dim)
    }

    /// Product of the dimensions of the named subsystems.
    pub fn dim_of_all(&self, names: &[&str]) -> Result<usize> {
        names.iter().try_fold(1, |acc, n| Ok(acc * self.dim_of(n)?))
    }

    /// Same matrix, new labels (dimensions must agree position by position).
    pub fn with_labels(&self, labels: Vec<Subsystem>) -> Result<Self> {
        if labels.iter().map(|l| l.dim).collect::<Vec<_>>() != self.dims() {
            return Err(Error::BadDimension("relabeling must preserve subsystem dimensions".into()));
        }
        Self::new(labels, self.matrix.clone())
    }

    pub fn relabel(&self, from: &str, to: &str) -> Result<Self> {
        let pos = self.position(from)?;
        let mut labels = self.labels.clone();
        labels[pos].name = to.to_string();
        Self::new(labels, self.matrix.clone())
    }

    /// Apply several renames at once; renames are simultaneous so swaps work.
    pub fn relabel_many(&self, pairs: &[(&str, &str)]) -> Result<Self> {
        let mut labels = self.labels.clone();
        for &(from, to) in pairs {
            let pos = self.position(from)?;
            labels[pos].name = to.to_string();
        }
        Self::new(labels, self.matrix.clone())
    }

    /// Kronecker product; labels concatenate.
    pub fn tensor(&self, other: &LabeledOperator) -> Result<Self> {
        if let Some(l) = other.labels.iter().find(|l| self.has_label(&l.name)) {
            return Err(Error::LabelCollision(l.name.clone()));
        }
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        Ok(LabeledOperator { labels, matrix: self.matrix.kronecker(&other.matrix) })
    }

    /// Reorder subsystems. Entries are moved, never recomputed.
    pub fn permute(&self, order: &[&str]) -> Result<Self> {
        let bad = || Error::BadPermutation(order.iter().map(|s| s.to_string()).collect());
        if order.len() != self.labels.len() {
            return Err(bad());
        }
        let mut perm = Vec::with_capacity(order.len());
        for (k, name) in order.iter().enumerate() {
            if order[..k].contains(name) {
                return Err(bad());
            }
            perm.push(self.labels.iter().position(|l| l.name == *name).ok_or_else(bad)?);
        }
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }
        let old_dims = self.dims();
        let new_labels: Vec<Subsystem> = perm.iter().map(|&p| self.labels[p].clone()).collect();
        let new_dims: Vec<usize> = new_labels.iter().map(|l| l.dim).collect();
        let new_strides = strides(&new_dims);
        let d = self.dim();
        let mut dig = vec![0; old_dims.len()];
        let map: Vec<usize> = (0..d)
            .map(|i| {
                digits(i, &old_dims, &mut dig);
                perm.iter().enumerate().map(|(k, &p)| dig[p] * new_strides[k]).sum()
            })
            .collect();
        let mut out = Matrix::zeros(d, d);
        for j in 0..d {
            for i in 0..d {
                out[(map[i], map[j])] = self.matrix[(i, j)];
            }
        }
        Ok(LabeledOperator { labels: new_labels, matrix: out })
    }

    /// Permute so that `front` come first (in the given order), the rest keep their order.
    pub fn bring_to_front(&self, front: &[&str]) -> Result<Self> {
        for n in front {
            self.position(n)?;
        }
        let mut order: Vec<&str> = front.to_vec();
        order.extend(self.labels.iter().map(|l| l.name.as_str()).filter(|n| !front.contains(n)));
        self.permute(&order)
    }

    /// Trace out the named subsystems; remaining labels keep their order.
    pub fn partial_trace(&self, over: &[&str]) -> Result<Self> {
        for n in over {
            self.position(n)?;
        }
        let keep: Vec<&str> = self.labels.iter().map(|l| l.name.as_str()).filter(|n| !over.contains(n)).collect();
        let mut order = keep.clone();
        order.extend(self.labels.iter().map(|l| l.name.as_str()).filter(|n| over.contains(n)));
        let p = self.permute(&order)?;
        let dt: usize = self.dim_of_all(over)?;
        let dk = self.dim() / dt;
        let mut out = Matrix::zeros(dk, dk);
        for c in 0..dk {
            for r in 0..dk {
                let mut s = ZERO;
                for t in 0..dt {
                    s += p.matrix[(r * dt + t, c * dt + t)];
                }
                out[(r, c)] = s;
            }
        }
        Ok(LabeledOperator { labels: p.labels[..keep.len()].to_vec(), matrix: out })
    }

    /// Trace out everything except the named subsystems, returned in the given order.
    pub fn reduce_to(&self, keep: &[&str]) -> Result<Self> {
        for n in keep {
            self.position(n)?;
        }
        let over: Vec<&str> = self.names().into_iter().filter(|n| !keep.contains(n)).collect();
        self.partial_trace(&over)?.permute(keep)
    }

    /// Transpose on the listed subsystems only.
    pub fn partial_transpose(&self, over: &[&str]) -> Result<Self> {
        let flags: Vec<bool> = {
            for n in over {
                self.position(n)?;
            }
            self.labels.iter().map(|l| over.contains(&l.name.as_str())).collect()
        };
        let dims = self.dims();
        let st = strides(&dims);
        let d = self.dim();
        let mut out = Matrix::zeros(d, d);
        let mut ri = vec![0; dims.len()];
        let mut ci = vec![0; dims.len()];
        for j in 0..d {
            digits(j, &dims, &mut ci);
            for i in 0..d {
                digits(i, &dims, &mut ri);
                let (mut ni, mut nj) = (0, 0);
                for k in 0..dims.len() {
                    let (a, b) = if flags[k] { (ci[k], ri[k]) } else { (ri[k], ci[k]) };
                    ni += a * st[k];
                    nj += b * st[k];
                }
                out[(ni, nj)] = self.matrix[(i, j)];
            }
        }
        Ok(LabeledOperator { labels: self.labels.clone(), matrix: out })
    }

    pub fn transpose(&self) -> Self {
        LabeledOperator { labels: self.labels.clone(), matrix: self.matrix.transpose() }
    }

    pub fn adjoint(&self) -> Self {
        LabeledOperator { labels: self.labels.clone(), matrix: self.matrix.adjoint() }
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn scale(&self, s: f64) -> Self {
        self.scale_c(C64::new(s, 0.0))
    }

    pub fn scale_c(&self, s: C64) -> Self {
        LabeledOperator { labels: self.labels.clone(), matrix: &self.matrix * s }
    }

    /// `other` reordered to this operator's label order; label sets must coincide.
    pub fn aligned(&self, other: &LabeledOperator) -> Result<Self> {
        if other.labels.len() != self.labels.len() {
            return Err(Error::BadDimension(format!("label sets differ: {:?} vs {:?}", self.names(), other.names())));
        }
        let p = other.permute(&self.names())?;
        if p.dims() != self.dims() {
            return Err(Error::BadDimension("subsystem dimensions differ".into()));
        }
        Ok(p)
    }

    pub fn add(&self, other: &LabeledOperator) -> Result<Self> {
        let o = self.aligned(other)?;
        Ok(LabeledOperator { labels: self.labels.clone(), matrix: &self.matrix + &o.matrix })
    }

    pub fn sub(&self, other: &LabeledOperator) -> Result<Self> {
        let o = self.aligned(other)?;
        Ok(LabeledOperator { labels: self.labels.clone(), matrix: &self.matrix - &o.matrix })
    }

    /// Matrix product over an identical label set (other is aligned first).
    pub fn mul(&self, other: &LabeledOperator) -> Result<Self> {
        let o = self.aligned(other)?;
        Ok(LabeledOperator { labels: self.labels.clone(), matrix: &self.matrix * &o.matrix })
    }

    /// `tr(self · other)` after alignment.
    pub fn trace_product(&self, other: &LabeledOperator) -> Result<C64> {
        let o = self.aligned(other)?;
        let d = self.dim();
        let mut s = ZERO;
        for i in 0..d {
            for j in 0..d {
                s += self.matrix[(i, j)] * o.matrix[(j, i)];
            }
        }
        Ok(s)
    }

    /// `self ⊗ 𝟙` on whatever of `full` is missing, permuted to the order of `full`.
    pub fn extend_to(&self, full: &[Subsystem]) -> Result<Self> {
        for l in &self.labels {
            match full.iter().find(|f| f.name == l.name) {
                Some(f) if f.dim == l.dim => {}
                Some(_) => return Err(Error::BadDimension(format!("dimension of `{}` differs", l.name))),
                None => return Err(Error::UnknownLabel(l.name.clone())),
            }
        }
        let missing: Vec<Subsystem> = full.iter().filter(|f| !self.has_label(&f.name)).cloned().collect();
        let ext = if missing.is_empty() { self.clone() } else { self.tensor(&LabeledOperator::identity(missing)?)? };
        let order: Vec<&str> = full.iter().map(|l| l.name.as_str()).collect();
        ext.permute(&order)
    }

    /// `(op ⊗ 𝟙) · self` where `op` acts on `targets` (in `op`'s own label order
    /// mapped positionally onto `targets`). `op` may be rectangular only through
    /// [`LabeledOperator::apply_kraus`]; here it is square.
    pub fn left_apply(&self, op: &Matrix, targets: &[&str]) -> Result<Self> {
        let p = self.bring_to_front(targets)?;
        let dt = self.dim_of_all(targets)?;
        if op.nrows() != dt || op.ncols() != dt {
            return Err(Error::BadDimension(format!("operator is {}x{} but targets span {dt}", op.nrows(), op.ncols())));
        }
        let out = left_apply_block(op, &p.matrix, dt);
        Ok(LabeledOperator { labels: p.labels, matrix: out })
    }

    /// `(op ⊗ 𝟙) self (op ⊗ 𝟙)†` for square `op` acting on `targets`.
    pub fn conjugate(&self, op: &Matrix, targets: &[&str]) -> Result<Self> {
        // A X A† = A (A X†)†
        let left = self.left_apply(op, targets)?;
        Ok(left.adjoint().left_apply(op, targets)?.adjoint())
    }

    /// `tr_S[(𝟙 ⊗ x) self]` where `S` are the labels of `x`.
    pub fn contract(&self, x: &LabeledOperator) -> Result<Self> {
        for l in x.labels() {
            if self.dim_of(&l.name)? != l.dim {
                return Err(Error::BadDimension(format!("dimension of `{}` differs", l.name)));
            }
        }
        let xs: Vec<&str> = x.names();
        let mut order: Vec<&str> = self.names().into_iter().filter(|n| !xs.contains(n)).collect();
        let kept = order.len();
        order.extend_from_slice(&xs);
        let p = self.permute(&order)?;
        let ds = x.dim();
        let dr = self.dim() / ds;
        let (y, xm) = (p.matrix(), x.matrix());
        let mut out = Matrix::zeros(dr, dr);
        for s in 0..ds {
            for s2 in 0..ds {
                let c = xm[(s, s2)];
                if c == ZERO {
                    continue;
                }
                for r in 0..dr {
                    for r2 in 0..dr {
                        out[(r, r2)] += c * y[(r * ds + s2, r2 * ds + s)];
                    }
                }
            }
        }
        Ok(LabeledOperator { labels: p.labels[..kept].to_vec(), matrix: out })
    }

    /// `‖self − 𝟙_S ⊗ tr_S(self)/d_S‖_max`: how far the operator is from
    /// acting trivially on the subsystems `S`.
    pub fn identity_residual(&self, names: &[&str]) -> Result<f64> {
        let d = self.dim_of_all(names)?;
        let reduced = self.partial_trace(names)?.scale(1.0 / d as f64);
        let ids: Vec<Subsystem> = names.iter().map(|n| Subsystem::new(*n, self.dim_of(n).expect("checked"))).collect();
        let rebuilt = LabeledOperator::identity(ids)?.tensor(&reduced)?;
        self.max_abs_diff(&rebuilt)
    }

    /// Apply a (possibly dimension-changing) Kraus family on `target`, renaming
    /// the subsystem to `out_name` with dimension `kraus[k].nrows()`.
    pub fn apply_kraus(&self, kraus: &[Matrix], target: &str, out_name: &str) -> Result<Self> {
        let p = self.bring_to_front(&[target])?;
        let din = p.labels[0].dim;
        let dout = kraus.first().map(|k| k.nrows()).unwrap_or(din);
        if kraus.iter().any(|k| k.ncols() != din || k.nrows() != dout) {
            return Err(Error::BadKraus("Kraus shapes do not match target".into()));
        }
        let rest = p.dim() / din;
        let mut out = Matrix::zeros(dout * rest, dout * rest);
        for k in kraus {
            let big = k.kronecker(&Matrix::identity(rest, rest));
            out += &big * &p.matrix * big.adjoint();
        }
        let mut labels = p.labels.clone();
        labels[0] = Subsystem::new(out_name, dout);
        LabeledOperator::new(labels, out)
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |self - other|` after alignment.
    pub fn max_abs_diff(&self, other: &LabeledOperator) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }

    pub fn hermitian_residual(&self) -> f64 {
        let d = self.dim();
        let mut r: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                r = r.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        r
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_residual() <= tol
    }

    /// `‖U U† − 𝟙‖_max`.
    pub fn unitarity_residual(&self) -> f64 {
        let d = self.dim();
        let prod = &self.matrix * self.matrix.adjoint();
        (prod - Matrix::identity(d, d)).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Eigen-decomposition of the Hermitian part; rejects inputs with `‖op − op†‖_max > 1e-10`.
    pub fn herm_eig(&self) -> Result<HermEig> {
        let r = self.hermitian_residual();
        if r > HERMITIAN_TOL {
            return Err(Error::NotHermitian(r));
        }
        Ok(herm_eig_matrix(&self.matrix))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.herm_eig()?.min())
    }

    pub fn psd_sqrt(&self) -> Result<Self> {
        let eig = self.herm_eig()?;
        if eig.min() < -PSD_CLAMP_TOL {
            return Err(Error::NotPsd(eig.min()));
        }
        // Eigenvalues at rounding level are zero; their square roots would not be.
        let floor = 64.0 * f64::EPSILON * eig.max().abs().max(eig.min().abs());
        Ok(LabeledOperator { labels: self.labels.clone(), matrix: eig.map(|v| if v <= floor { 0.0 } else { v.sqrt() }) })
    }

    /// Merge adjacent-after-permutation subsystems into one label.
    pub fn merge(&self, names: &[&str], new_name: &str) -> Result<Self> {
        let first = names.first().ok_or_else(|| Error::UnknownLabel(String::new()))?;
        let pos = self.position(first)?;
        let mut order: Vec<&str> = Vec::new();
        for (k, l) in self.labels.iter().enumerate() {
            if k == pos {
                order.extend_from_slice(names);
            } else if !names.contains(&l.name.as_str()) {
                order.push(&l.name);
            }
        }
        let p = self.permute(&order)?;
        let d = self.dim_of_all(names)?;
        let mut labels = Vec::new();
        for l in &p.labels {
            if l.name == *first {
                labels.push(Subsystem::new(new_name, d));
            } else if !names.contains(&l.name.as_str()) {
                labels.push(l.clone());
            }
        }
        LabeledOperator::new(labels, p.matrix)
    }
}

/// `(op ⊗ 𝟙_rest) · m` without forming the Kronecker product.
///
/// In column-major storage each column of `m` is a `rest × dt` block `B`, and
/// the matching output column is `B opᵀ`.
fn left_apply_block(op: &Matrix, m: &Matrix, dt: usize) -> Matrix {
    let d = m.nrows();
    let rest = d / dt;
    let opt = op.transpose();
    let src = m.as_slice();
    let mut out = Matrix::zeros(d, d);
    let dst = out.as_mut_slice();
    for c in 0..d {
        let b = nalgebra::DMatrixView::<C64>::from_slice(&src[c * d..(c + 1) * d], rest, dt);
        let mut o = nalgebra::DMatrixViewMut::<C64>::from_slice(&mut dst[c * d..(c + 1) * d], rest, dt);
        o.gemm(ONE, &b, &opt, ZERO);
    }
    out
}

/// Spectral decomposition of the Hermitian part of `m`, eigenvalues descending.
pub fn herm_eig_matrix(m: &Matrix) -> HermEig {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let n = order.len();
    let vectors = Matrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    HermEig { values: order.iter().map(|&k| eig.eigenvalues[k]).collect(), vectors }
}

/// Extend the orthonormal columns of `partial` listed in `fixed` to a unitary
/// by Gram–Schmidt over the standard basis.
pub fn complete_unitary(partial: &Matrix, fixed: &[usize]) -> Result<Matrix> {
    let n = partial.nrows();
    let mut out = Matrix::zeros(n, n);
    let mut basis: Vec<nalgebra::DVector<C64>> = Vec::with_capacity(n);
    for &c in fixed {
        let v = partial.column(c).into_owned();
        for b in &basis {
            if b.dotc(&v).norm() > 1e-9 {
                return Err(Error::NotUnitary(b.dotc(&v).norm()));
            }
        }
        if (v.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::NotUnitary((v.norm() - 1.0).abs()));
        }
        out.set_column(c, &v);
        basis.push(v);
    }
    let mut free = (0..n).filter(|c| !fixed.contains(c));
    for e in 0..n {
        if basis.len() == n {
            break;
        }
        let mut v = nalgebra::DVector::<C64>::zeros(n);
        v[e] = ONE;
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            v /= C64::new(norm, 0.0);
            let c = free.next().expect("free column available");
            out.set_column(c, &v);
            basis.push(v);
        }
    }
    Ok(out)
}

pub fn pauli_x() -> Matrix {
    Matrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> Matrix {
    let i = C64::new(0.0, 1.0);
    Matrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO])
}

pub fn pauli_z() -> Matrix {
    Matrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// Single-label operator from a matrix.
pub fn op1(name: &str, m: Matrix) -> LabeledOperator {
    let d = m.nrows();
    LabeledOperator::new(vec![Subsystem::new(name, d)], m).expect("square finite matrix")
}

/// Generalized Pauli basis: Hermitian, `σ_0 = 𝟙`, traceless otherwise, `tr(σ_a σ_b) = d δ_ab`.
#[derive(Clone, Debug)]
pub struct PauliBasis {
    pub dim: usize,
    pub elements: Vec<Matrix>,
}

/// Generalized Gell-Mann matrices rescaled to `tr(σ_a σ_b) = d δ_ab`. For `d = 2`
/// this is exactly `{𝟙, σ_x, σ_y, σ_z}`.
pub fn pauli_basis(d: usize) -> Result<PauliBasis> {
    if d < 2 {
        return Err(Error::BadDimension(format!("Pauli basis needs d >= 2, got {d}")));
    }
    let scale = (d as f64 / 2.0).sqrt();
    let mut elements = vec![Matrix::identity(d, d)];
    for j in 0..d {
        for k in (j + 1)..d {
            let mut sym = Matrix::zeros(d, d);
            sym[(j, k)] = C64::new(scale, 0.0);
            sym[(k, j)] = C64::new(scale, 0.0);
            let mut anti = Matrix::zeros(d, d);
            anti[(j, k)] = C64::new(0.0, -scale);
            anti[(k, j)] = C64::new(0.0, scale);
            elements.push(sym);
            elements.push(anti);
        }
    }
    for l in 1..d {
        let norm = (2.0 / (l * (l + 1)) as f64).sqrt() * scale;
        let mut diag = Matrix::zeros(d, d);
        for j in 0..l {
            diag[(j, j)] = C64::new(norm, 0.0);
        }
        diag[(l, l)] = C64::new(-(l as f64) * norm, 0.0);
        elements.push(diag);
    }
    Ok(PauliBasis { dim: d, elements })
}

/// Real coefficients `w` of `op = Σ w_{a_1..a_n} σ_{a_1} ⊗ … ⊗ σ_{a_n}`.
///
/// Stored row-major over the multi-index with radix `d_k²` per subsystem.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliExpansion {
    pub labels: Vec<Subsystem>,
    pub coeffs: Vec<f64>,
}

impl PauliExpansion {
    pub fn radices(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.dim * l.dim).collect()
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        let r = self.radices();
        index.iter().zip(&r).fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.coeffs[self.flat_index(index)]
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let r = self.radices();
        let mut out = vec![0; r.len()];
        digits(flat, &r, &mut out);
        out
    }

    /// Iterate `(multi-index, coefficient)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.coeffs.iter().enumerate().map(|(f, &w)| (self.multi_index(f), w))
    }

    /// Rebuild the operator from the coefficients.
    pub fn to_operator(&self) -> Result<LabeledOperator> {
        let dims: Vec<usize> = self.labels.iter().map(|l| l.dim).collect();
        let mut data: Vec<C64> = self.coeffs.iter().map(|&w| C64::new(w, 0.0)).collect();
        for (axis, &d) in dims.iter().enumerate() {
            let basis = pauli_basis_or_trivial(d);
            // M[(r,c), a] = σ_a[r, c]
            let map = Matrix::from_fn(d * d, d * d, |rc, a| basis[a][(rc / d, rc % d)]);
            data = apply_along_axis(&data, &squares(&dims), axis, &map);
        }
        let total: usize = dims.iter().product();
        let mut m = Matrix::zeros(total, total);
        fill_from_slots(&mut m, &data, &dims);
        LabeledOperator::new(self.labels.clone(), m)
    }
}

fn squares(dims: &[usize]) -> Vec<usize> {
    dims.iter().map(|d| d * d).collect()
}

fn pauli_basis_or_trivial(d: usize) -> Vec<Matrix> {
    if d == 1 {
        vec![Matrix::identity(1, 1)]
    } else {
        pauli_basis(d).expect("d >= 2").elements
    }
}

/// Contract `map` (rows: new slot index, cols: old slot index) into `axis`.
fn apply_along_axis(data: &[C64], radices: &[usize], axis: usize, map: &Matrix) -> Vec<C64> {
    let n = radices[axis];
    let outer: usize = radices[..axis].iter().product();
    let inner: usize = radices[axis + 1..].iter().product();
    let mut out = vec![ZERO; data.len()];
    for o in 0..outer {
        for i in 0..inner {
            for a in 0..n {
                let mut s = ZERO;
                for b in 0..n {
                    let m = map[(a, b)];
                    if m != ZERO {
                        s += m * data[(o * n + b) * inner + i];
                    }
                }
                out[(o * n + a) * inner + i] = s;
            }
        }
    }
    out
}

/// Move between the matrix layout and the per-subsystem slot layout where slot
/// `k` holds `r_k * d_k + c_k`.
fn fill_from_slots(m: &mut Matrix, data: &[C64], dims: &[usize]) {
    let total: usize = dims.iter().product();
    let sq = squares(dims);
    let mut rd = vec![0; dims.len()];
    let mut cd = vec![0; dims.len()];
    for c in 0..total {
        digits(c, dims, &mut cd);
        for r in 0..total {
            digits(r, dims, &mut rd);
            let mut idx = 0;
            for k in 0..dims.len() {
                idx = idx * sq[k] + rd[k] * dims[k] + cd[k];
            }
            m[(r, c)] = data[idx];
        }
    }
}

fn to_slots(m: &Matrix, dims: &[usize]) -> Vec<C64> {
    let total: usize = dims.iter().product();
    let sq = squares(dims);
    let mut data = vec![ZERO; total * total];
    let mut rd = vec![0; dims.len()];
    let mut cd = vec![0; dims.len()];
    for c in 0..total {
        digits(c, dims, &mut cd);
        for r in 0..total {
            digits(r, dims, &mut rd);
            let mut idx = 0;
            for k in 0..dims.len() {
                idx = idx * sq[k] + rd[k] * dims[k] + cd[k];
            }
            data[idx] = m[(r, c)];
        }
    }
    data
}

/// `w_a = tr(op · σ_{a_1} ⊗ … ⊗ σ_{a_n}) / D`.
pub fn pauli_coefficients(op: &LabeledOperator) -> Result<PauliExpansion> {
    let r = op.hermitian_residual();
    if r > HERMITIAN_TOL {
        return Err(Error::NotHermitian(r));
    }
    Ok(pauli_coefficients_unchecked(op))
}

pub(crate) fn pauli_coefficients_unchecked(op: &LabeledOperator) -> PauliExpansion {
    let dims = op.dims();
    let mut data = to_slots(op.matrix(), &dims);
    for (axis, &d) in dims.iter().enumerate() {
        let basis = pauli_basis_or_trivial(d);
        // L[a, (r,c)] = σ_a[c, r] / d
        let inv = 1.0 / d as f64;
        let map = Matrix::from_fn(d * d, d * d, |a, rc| basis[a][(rc % d, rc / d)] * inv);
        data = apply_along_axis(&data, &squares(&dims), axis, &map);
    }
    PauliExpansion { labels: op.labels().to_vec(), coeffs: data.iter().map(|z| z.re).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_op(lbls: Vec<Subsystem>, seed: u64) -> LabeledOperator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d: usize = lbls.iter().map(|l| l.dim).product();
        let m = Matrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        LabeledOperator::new(lbls, m).unwrap()
    }

    fn random_herm(lbls: Vec<Subsystem>, seed: u64) -> LabeledOperator {
        let a = random_op(lbls, seed);
        a.add(&a.adjoint()).unwrap().scale(0.5)
    }

    #[test]
    fn tensor_identity_and_collision() {
        let a = LabeledOperator::identity(labels(&[("A1", 2)])).unwrap();
        let b = LabeledOperator::identity(labels(&[("B1", 2)])).unwrap();
        let ab = a.tensor(&b).unwrap();
        assert_eq!(ab.names(), vec!["A1", "B1"]);
        assert_eq!(ab.matrix(), &Matrix::identity(4, 4));
        assert_eq!(a.tensor(&a), Err(Error::LabelCollision("A1".into())));
    }

    #[test]
    fn tensor_zz_is_diag() {
        let zz = op1("B1", pauli_z()).tensor(&op1("A2", pauli_z())).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| zz.matrix()[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn tensor_index_formula() {
        let a = random_op(labels(&[("a", 2)]), 1);
        let b = random_op(labels(&[("b", 3)]), 2);
        let ab = a.tensor(&b).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..3 {
                    for l in 0..3 {
                        assert_eq!(ab.matrix()[(3 * i + k, 3 * j + l)], a.matrix()[(i, j)] * b.matrix()[(k, l)]);
                    }
                }
            }
        }
    }

    #[test]
    fn permute_cases() {
        let x = random_op(labels(&[("A", 2), ("B", 3), ("C", 2)]), 3);
        assert_eq!(x.permute(&["A", "B", "C"]).unwrap(), x);
        let zx = op1("A", pauli_z()).tensor(&op1("B", pauli_x())).unwrap();
        let xz = op1("B", pauli_x()).tensor(&op1("A", pauli_z())).unwrap();
        assert_eq!(zx.permute(&["B", "A"]).unwrap(), xz);
        let p = x.permute(&["C", "A", "B"]).unwrap();
        let back = p.permute(&["A", "B", "C"]).unwrap();
        assert_eq!(back.max_abs_diff(&x).unwrap(), 0.0);
        assert_eq!(back.matrix(), x.matrix());
        assert!(matches!(x.permute(&["A", "A", "C"]), Err(Error::BadPermutation(_))));
        assert!(matches!(x.permute(&["A", "B"]), Err(Error::BadPermutation(_))));
    }

    #[test]
    fn partial_trace_cases() {
        let id = LabeledOperator::identity(labels(&[("A", 2), ("B", 2)])).unwrap();
        let r = id.partial_trace(&["B"]).unwrap();
        assert_eq!(r.matrix(), &(Matrix::identity(2, 2) * C64::new(2.0, 0.0)));
        assert!(matches!(id.partial_trace(&["Q"]), Err(Error::UnknownLabel(_))));

        // brute-force double index sum
        let x = random_op(labels(&[("A", 2), ("B", 2), ("C", 2)]), 4);
        let r = x.partial_trace(&["B"]).unwrap();
        for a in 0..2 {
            for c in 0..2 {
                for a2 in 0..2 {
                    for c2 in 0..2 {
                        let mut s = ZERO;
                        for b in 0..2 {
                            s += x.matrix()[(a * 4 + b * 2 + c, a2 * 4 + b * 2 + c2)];
                        }
                        assert!((r.matrix()[(a * 2 + c, a2 * 2 + c2)] - s).norm() < 1e-14);
                    }
                }
            }
        }
        assert!((r.trace() - x.trace()).norm() < 1e-12);
    }

    #[test]
    fn partial_transpose_cases() {
        let x = random_op(labels(&[("A", 2), ("B", 3)]), 5);
        assert_eq!(x.partial_transpose(&["A", "B"]).unwrap().matrix(), &x.matrix().transpose());
        let yy = op1("A", pauli_y()).tensor(&op1("B", pauli_y())).unwrap();
        let expect = op1("A", -pauli_y()).tensor(&op1("B", pauli_y())).unwrap();
        assert_eq!(yy.partial_transpose(&["A"]).unwrap(), expect);
        let twice = x.partial_transpose(&["A"]).unwrap().partial_transpose(&["A"]).unwrap();
        assert_eq!(twice, x);
    }

    #[test]
    fn herm_eig_cases() {
        let id = LabeledOperator::identity(labels(&[("A", 4)])).unwrap();
        let e = id.herm_eig().unwrap();
        assert!(e.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let h = random_herm(labels(&[("A", 2), ("B", 4)]), 6);
        let e = h.herm_eig().unwrap();
        let sum: f64 = e.values.iter().sum();
        assert!((sum - h.trace().re).abs() < 1e-12);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let rec = e.map(|v| v);
        let err = (rec - h.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-10);
        let nh = random_op(labels(&[("A", 3)]), 7);
        assert!(matches!(nh.herm_eig(), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn psd_sqrt_cases() {
        let d = LabeledOperator::from_real("A", &[&[4.0, 0.0], &[0.0, 9.0]]).unwrap();
        let s = d.psd_sqrt().unwrap();
        let expect = LabeledOperator::from_real("A", &[&[2.0, 0.0], &[0.0, 3.0]]).unwrap();
        assert!(s.max_abs_diff(&expect).unwrap() < 1e-12);
        let id = LabeledOperator::identity(labels(&[("A", 3)])).unwrap();
        assert!(id.psd_sqrt().unwrap().max_abs_diff(&id).unwrap() < 1e-12);
        let neg = LabeledOperator::from_real("A", &[&[-1.0, 0.0], &[0.0, 1.0]]).unwrap();
        assert!(matches!(neg.psd_sqrt(), Err(Error::NotPsd(_))));
    }

    #[test]
    fn pauli_basis_properties() {
        let b2 = pauli_basis(2).unwrap();
        assert_eq!(b2.elements[1], pauli_x());
        assert_eq!(b2.elements[2], pauli_y());
        assert_eq!(b2.elements[3], pauli_z());
        for d in 2..=4 {
            let b = pauli_basis(d).unwrap();
            assert_eq!(b.elements.len(), d * d);
            assert_eq!(b.elements[0], Matrix::identity(d, d));
            for (a, sa) in b.elements.iter().enumerate() {
                assert!((sa - sa.adjoint()).iter().all(|z| z.norm() < 1e-15));
                for (c, sc) in b.elements.iter().enumerate() {
                    let g = (sa * sc).trace();
                    let want = if a == c { d as f64 } else { 0.0 };
                    assert!((g - C64::new(want, 0.0)).norm() < 1e-14, "d={d} a={a} c={c}");
                }
            }
        }
        assert!(matches!(pauli_basis(1), Err(Error::BadDimension(_))));
    }

    #[test]
    fn pauli_roundtrip_mixed_dims() {
        let h = random_herm(labels(&[("A", 2), ("B", 3), ("C", 2)]), 8);
        let w = pauli_coefficients(&h).unwrap();
        let back = w.to_operator().unwrap();
        assert!(back.max_abs_diff(&h).unwrap() < 1e-12);
        let quarter = LabeledOperator::identity(labels(&[("B2", 2), ("B1", 2), ("A2", 2), ("A1", 2)])).unwrap().scale(0.25);
        let w = pauli_coefficients(&quarter).unwrap();
        for (idx, c) in w.iter() {
            let want = if idx.iter().all(|&i| i == 0) { 0.25 } else { 0.0 };
            assert!((c - want).abs() < 1e-15);
        }
    }

    #[test]
    fn conjugate_matches_kron() {
        let x = random_op(labels(&[("A", 2), ("B", 3)]), 9);
        let u = random_op(labels(&[("B", 3)]), 10);
        let got = x.conjugate(u.matrix(), &["B"]).unwrap().permute(&["A", "B"]).unwrap();
        let big = Matrix::identity(2, 2).kronecker(u.matrix());
        let want = &big * x.matrix() * big.adjoint();
        assert!((got.matrix() - want).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn contract_matches_definition() {
        let y = random_op(labels(&[("A", 2), ("B", 3), ("C", 2)]), 12);
        let x = random_op(labels(&[("C", 2), ("A", 2)]), 13);
        let got = y.contract(&x).unwrap();
        let ext = x.extend_to(y.labels()).unwrap();
        let want = ext.mul(&y).unwrap().partial_trace(&["A", "C"]).unwrap();
        assert!(got.max_abs_diff(&want).unwrap() < 1e-12);
    }

    #[test]
    fn identity_residual_detects_structure() {
        let rho = random_herm(labels(&[("B", 3)]), 14);
        let x = LabeledOperator::identity(labels(&[("A", 2)])).unwrap().tensor(&rho).unwrap();
        assert!(x.identity_residual(&["A"]).unwrap() < 1e-14);
        assert!(x.identity_residual(&["B"]).unwrap() > 1e-3);
    }

    #[test]
    fn completion_is_unitary() {
        let mut p = Matrix::zeros(4, 4);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        p[(0, 1)] = C64::new(s, 0.0);
        p[(3, 1)] = C64::new(0.0, s);
        let u = complete_unitary(&p, &[1]).unwrap();
        let err = (&u * u.adjoint() - Matrix::identity(4, 4)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
        assert_eq!(u.column(1), p.column(1));
    }

    #[test]
    fn merge_combines_dims() {
        let x = random_op(labels(&[("A", 2), ("B", 3), ("C", 2)]), 11);
        let m = x.merge(&["C", "A"], "CA").unwrap();
        assert_eq!(m.names(), vec!["B", "CA"]);
        assert_eq!(m.dims(), vec![3, 4]);
        assert_eq!(m.matrix(), x.permute(&["B", "C", "A"]).unwrap().matrix());
    }
}
