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

use thiserror::Error;

/// Errors raised by the operator algebra and everything built on top of it.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("subsystem label `{0}` appears more than once")]
    LabelCollision(String),
    #[error("`{0:?}` is not a permutation of the operator's labels")]
    BadPermutation(Vec<String>),
    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),
    #[error("operator is not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),
    #[error("operator is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("dimension mismatch: {0}")]
    BadDimension(String),
    #[error("invalid Kraus operators: {0}")]
    BadKraus(String),
    #[error("measurement basis is not orthonormal (residual {0:.3e})")]
    BadBasis(f64),
    #[error("operator is not unitary (residual {0:.3e})")]
    NotUnitary(f64),
    #[error("map is not completely positive and trace preserving")]
    NotCptp,
    #[error("invalid process matrix: {0}")]
    InvalidProcessMatrix(String),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("largest eigenvalue {0:.3e} is too small to synthesize a circuit")]
    DegenerateProcess(f64),
    #[error("success probability is one; no complementary branch exists")]
    NoComplement,
    #[error("outcome {outcome} has probability {probability:.3e}")]
    NullOutcome { outcome: usize, probability: f64 },
    #[error("invalid bipartition: {0}")]
    BadCut(String),
    #[error("unknown structural form `{0}`")]
    BadForm(String),
    #[error("invalid circuit: {0}")]
    BadCircuit(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
