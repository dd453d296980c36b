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

//! Seeded random matrix ensembles.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rand::SeedableRng;

use crate::tensor::{Matrix, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    })
}

/// Haar-distributed unitary from the QR decomposition of a complex Ginibre
/// matrix, with the phases of `diag(R)` absorbed into `Q`.
pub fn haar_unitary<R: Rng>(n: usize, rng: &mut R) -> Matrix {
    let g = gaussian_matrix(n, n, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..n {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, k)] *= phase;
        }
    }
    q
}

/// First `cols` columns of a Haar unitary: a Haar isometry `C^cols → C^rows`.
pub fn haar_isometry<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    haar_unitary(rows, rng).columns(0, cols).into_owned()
}

/// Random mixed state `G G† / tr(G G†)` with Ginibre `G` of rank `rank`.
pub fn random_density<R: Rng>(d: usize, rank: usize, rng: &mut R) -> Matrix {
    let g = gaussian_matrix(d, rank.max(1), rng);
    let m = &g * g.adjoint();
    let t = m.trace();
    m / t
}

/// Random pure state as a ket.
pub fn random_ket<R: Rng>(d: usize, rng: &mut R) -> Vec<C64> {
    let g = gaussian_matrix(d, 1, rng);
    let n = g.norm();
    g.iter().map(|z| z / n).collect()
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian<R: Rng>(d: usize, rng: &mut R) -> Matrix {
    let g = gaussian_matrix(d, d, rng);
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}
