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

//! JSON wire formats shared by the library and its front ends.
//!
//! An operator is `{"labels": [{"name", "dim"}...], "re": [[..]], "im": [[..]]}`
//! with row-major nested arrays.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{LabeledOperator, Matrix, Subsystem, C64};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorJson {
    pub labels: Vec<Subsystem>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<LabeledOperator> for OperatorJson {
    fn from(op: LabeledOperator) -> Self {
        let m = op.matrix();
        let d = m.nrows();
        let re = (0..d).map(|i| (0..d).map(|j| m[(i, j)].re).collect()).collect();
        let im = (0..d).map(|i| (0..d).map(|j| m[(i, j)].im).collect()).collect();
        OperatorJson { labels: op.labels().to_vec(), re, im }
    }
}

impl TryFrom<OperatorJson> for LabeledOperator {
    type Error = Error;

    fn try_from(j: OperatorJson) -> Result<Self> {
        let d = j.re.len();
        if j.im.len() != d || j.re.iter().chain(j.im.iter()).any(|row| row.len() != d) {
            return Err(Error::BadDimension("`re` and `im` must be square arrays of equal size".into()));
        }
        let m = Matrix::from_fn(d, d, |r, c| C64::new(j.re[r][c], j.im[r][c]));
        LabeledOperator::new(j.labels, m)
    }
}

pub fn to_string<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

pub fn from_str<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

pub fn read_file<T: for<'de> Deserialize<'de>>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    from_str(&text)
}

pub fn write_file<T: Serialize>(path: &std::path::Path, value: &T) -> Result<()> {
    std::fs::write(path, to_string(value)?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
