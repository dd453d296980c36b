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

//! Process matrices with indefinite causal order and the causally ordered
//! circuits with post-selection that simulate them.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`]: labeled multipartite operators and generalized Pauli bases.
//! * [`choi`]: quantum operations in Choi form.
//! * [`comb`]: two-slot quantum combs (process tensors).
//! * [`process`]: process matrices with validity and separability checks.
//! * [`neumark`]: circuit synthesis for an arbitrary process matrix.
//! * [`circuit`]: parallel and serial circuits conditioned on an environment outcome.
//! * [`resources`]: entanglement and nonlocality diagnostics of such circuits.
//! * [`cli`]: the `acausal` command-line front end.
//!
//! Operators use a fixed index convention: for labels `[a, b]` the row index
//! is `i_a * d_b + i_b`. Choi operators are unnormalized and ordered
//! `[output, input]`; process matrices are ordered `[B2, B1, A2, A1]`.

pub mod choi;
pub mod circuit;
pub mod cli;
pub mod comb;
pub mod error;
pub mod json;
pub mod neumark;
pub mod process;
pub mod random;
pub mod resources;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{LabeledOperator, Subsystem};
