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

//! Command-line front end.
//!
//! Exit codes: `0` success or affirmative verdict, `1` negative verdict,
//! `2` input error, `3` undecided.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::choi::random_instrument_on;
use crate::circuit::gen::{markovian_serial, random_parallel, ParallelSpec, StatePattern, UnitaryPattern};
use crate::circuit::{brute_force_joint, conditioned, is_proper, Circuit};
use crate::error::{Error, Result};
use crate::neumark::{synthesize, synthesize_with_alpha, SynthesisResult};
use crate::process::{
    is_causally_separable, is_valid, maximally_mixed_process, noisy_ocb, ocb_process, SeparabilityOptions, SeparabilityStatus,
    WireDims, VALID_TOL,
};
use crate::resources::{branch_report, resource_report, ResourceOptions};
use crate::tensor::LabeledOperator;

/// Environment variable overriding the separability iteration cap.
pub const MAX_ITER_ENV: &str = "ACAUSAL_MAX_ITER";

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_UNDECIDED: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "acausal", version, about = "Process matrices with indefinite causal order and the circuits that simulate them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the process-matrix conditions; exit 0 iff valid.
    Validate {
        path: PathBuf,
        #[arg(long, default_value_t = VALID_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide causal separability; exit 0 separable, 1 non-separable, 3 undecided.
    Separability {
        path: PathBuf,
        #[arg(long, default_value_t = SeparabilityOptions::default().tol)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize the conditioned circuit realizing a process matrix.
    Synthesize {
        path: PathBuf,
        /// Where to write the synthesis result.
        #[arg(long)]
        out: PathBuf,
        /// Use `α` instead of the optimal `1/λ_max`.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Simulate a circuit (or synthesis result) with seeded random instruments.
    Simulate {
        path: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Number of random instrument pairs used for the properness check.
        #[arg(long, default_value_t = 100)]
        instruments: usize,
        /// Outcomes per instrument in the emitted joint table.
        #[arg(long, default_value_t = 2)]
        instrument_outcomes: usize,
        #[arg(long, default_value_t = 0)]
        outcome: usize,
        /// Properness tolerance on the sampled outcome probabilities.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the white-noise weight of the OCB process.
    SweepNoise {
        #[arg(long)]
        gamma_from: f64,
        #[arg(long)]
        gamma_to: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Entanglement and nonlocality report of a circuit with per-branch verdicts.
    Resources {
        path: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write fixture files.
    Demo {
        #[command(subcommand)]
        which: Demo,
    },
}

#[derive(Subcommand, Debug)]
enum Demo {
    /// The OCB process with its synthesized circuit, plus comparison fixtures.
    Ocb {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Run the CLI on `args` (including the program name), writing reports to
/// `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // help and version go to stdout with success
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_INPUT;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::NullOutcome { .. } => EXIT_NEGATIVE,
                _ => EXIT_INPUT,
            }
        }
    }
}

fn emit<T: Serialize>(value: &T, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => crate::json::write_file(p, value),
        None => writeln!(out, "{}", crate::json::to_string(value)?).map_err(|e| Error::Io(e.to_string())),
    }
}

fn positive(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Error::BadParameter(format!("{name} must be positive, got {x}")))
    }
}

fn separability_options(tol: f64) -> Result<SeparabilityOptions> {
    let mut opts = SeparabilityOptions { tol: positive("--tol", tol)?, ..SeparabilityOptions::default() };
    if let Ok(v) = std::env::var(MAX_ITER_ENV) {
        opts.max_iter =
            v.parse().map_err(|_| Error::BadParameter(format!("{MAX_ITER_ENV} must be a nonnegative integer, got `{v}`")))?;
    }
    Ok(opts)
}

/// A circuit file, or a synthesis result converted to its parallel circuit.
fn read_circuit(path: &Path) -> Result<Circuit> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = crate::json::from_str(&text)?;
    if value.get("kind").is_some() {
        Ok(serde_json::from_value(value)?)
    } else if value.get("projector_label").is_some() {
        let s: SynthesisResult = serde_json::from_value(value)?;
        Ok(Circuit::Parallel(s.to_parallel_circuit()?))
    } else {
        Err(Error::Parse(format!("{}: neither a circuit nor a synthesis result", path.display())))
    }
}

fn status_code(s: SeparabilityStatus) -> i32 {
    match s {
        SeparabilityStatus::Separable => EXIT_OK,
        SeparabilityStatus::NonSeparable => EXIT_NEGATIVE,
        SeparabilityStatus::Undecided => EXIT_UNDECIDED,
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Validate { path, tol, out: dest } => {
            let op: LabeledOperator = crate::json::read_file(&path)?;
            let rep = is_valid(&op, positive("--tol", tol)?)?;
            emit(&rep, dest.as_deref(), out)?;
            Ok(if rep.ok { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Command::Separability { path, tol, out: dest } => {
            let op: LabeledOperator = crate::json::read_file(&path)?;
            let v = is_causally_separable(&op, separability_options(tol)?)?;
            emit(&v, dest.as_deref(), out)?;
            Ok(status_code(v.status))
        }
        Command::Synthesize { path, out: dest, alpha } => {
            let w = crate::json::read_file(&path)?;
            let res = match alpha {
                Some(a) => synthesize_with_alpha(&w, a)?,
                None => synthesize(&w)?,
            };
            crate::json::write_file(&dest, &res)?;
            let summary = json!({
                "p_succ": res.p_succ,
                "lambda_max": res.lambda_max,
                "alpha": res.alpha,
                "out": dest.display().to_string(),
            });
            emit(&summary, None, out)?;
            Ok(EXIT_OK)
        }
        Command::Simulate { path, seed, instruments, instrument_outcomes, outcome, tol, out: dest } => {
            simulate(&path, seed, instruments, instrument_outcomes, outcome, positive("--tol", tol)?, dest.as_deref(), out)
        }
        Command::SweepNoise { gamma_from, gamma_to, steps, format, out: dest } => {
            sweep_noise(gamma_from, gamma_to, steps, format, dest.as_deref(), out)
        }
        Command::Resources { path, seed, samples, tol, out: dest } => {
            let c = read_circuit(&path)?;
            let opts = ResourceOptions {
                n_samples: samples,
                seed,
                tol: positive("--tol", tol)?,
                separability: separability_options(SeparabilityOptions::default().tol)?,
            };
            let rep = resource_report(&c, &opts)?;
            emit(&rep, dest.as_deref(), out)?;
            Ok(EXIT_OK)
        }
        Command::Demo { which: Demo::Ocb { seed, out: dir } } => demo_ocb(seed, &dir, out),
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    path: &Path,
    seed: u64,
    n_pairs: usize,
    n_outcomes: usize,
    mu: usize,
    tol: f64,
    dest: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32> {
    let c = read_circuit(path)?;
    if mu >= c.n_outcomes() {
        return Err(Error::BadParameter(format!("outcome {mu} out of range (circuit has {})", c.n_outcomes())));
    }
    if n_outcomes == 0 {
        return Err(Error::BadParameter("--instrument-outcomes must be at least 1".into()));
    }
    let res = conditioned(&c, mu)?;
    let (a1, a2, b1, b2) = c.wire_dims();
    let ia = random_instrument_on("A2", "A1", a1, a2, n_outcomes, seed)?;
    let ib = random_instrument_on("B2", "B1", b1, b2, n_outcomes, seed.wrapping_add(1))?;
    let table = brute_force_joint(&c, &ia, &ib)?;
    let proper = is_proper(&c, mu, n_pairs.max(2), seed, tol)?;
    let branch = branch_report(
        &c,
        mu,
        &ResourceOptions {
            n_samples: n_pairs.max(2),
            seed,
            tol,
            separability: separability_options(SeparabilityOptions::default().tol)?,
        },
    )?;
    let rows: Vec<Vec<f64>> = (0..table.n_a)
        .flat_map(|i| (0..table.n_b).map(move |j| (i, j)))
        .map(|(i, j)| (0..table.n_mu).map(|m| table.get(i, j, m)).collect())
        .collect();
    let report = json!({
        "seed": seed,
        "outcome": mu,
        "p_mu": res.p_mu,
        "joint": {
            "instrument_seeds": [seed, seed.wrapping_add(1)],
            "n_a": table.n_a,
            "n_b": table.n_b,
            "rows": rows,
        },
        "proper": proper.proper,
        "max_dev": proper.max_dev,
        "samples": proper.samples,
        "instrument_dependence": res.instrument_dependence,
        "valid": res.valid,
        "verdict": branch.verdict,
        "alice_first": branch.alice_first,
        "w_mu": res.w_mu,
    });
    emit(&report, dest, out)?;
    Ok(if proper.proper { EXIT_OK } else { EXIT_NEGATIVE })
}

fn sweep_noise(from: f64, to: f64, steps: usize, format: Format, dest: Option<&Path>, out: &mut dyn Write) -> Result<i32> {
    if !(from.is_finite() && to.is_finite() && 0.0 <= from && from < to) || steps < 2 {
        return Err(Error::BadParameter(format!(
            "need 0 <= gamma-from < gamma-to and steps >= 2, got [{from}, {to}] with {steps} steps"
        )));
    }
    let opts = separability_options(SeparabilityOptions::default().tol)?;
    let rows: Vec<(f64, f64, f64, SeparabilityStatus)> = (0..steps)
        .into_par_iter()
        .map(|k| {
            let g = if k + 1 == steps { to } else { from + (to - from) * k as f64 / (steps - 1) as f64 };
            let w = noisy_ocb(g)?;
            let l = w.lambda_max();
            let p = crate::neumark::success_probability(&w);
            let v = is_causally_separable(w.op(), opts)?;
            Ok((g, l, p, v.status))
        })
        .collect::<Result<_>>()?;
    match format {
        Format::Csv => {
            let mut text = String::from("gamma,lambda_max,p_succ,status\n");
            for (g, l, p, s) in &rows {
                text.push_str(&format!("{g:.16e},{l:.16e},{p:.16e},{}\n", s.as_str()));
            }
            match dest {
                Some(path) => std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?,
                None => write!(out, "{text}").map_err(|e| Error::Io(e.to_string()))?,
            }
        }
        Format::Json => {
            let v: Vec<_> =
                rows.iter().map(|(g, l, p, s)| json!({"gamma": g, "lambda_max": l, "p_succ": p, "status": s.as_str()})).collect();
            emit(&v, dest, out)?;
        }
    }
    Ok(EXIT_OK)
}

fn demo_ocb(seed: u64, dir: &Path, out: &mut dyn Write) -> Result<i32> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    let mut put = |name: &str, value: &dyn erased::Json| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, value.to_json()?).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
        written.push(p.display().to_string());
        Ok(())
    };
    let w = ocb_process();
    let syn = synthesize(&w)?;
    put("ocb.json", &w)?;
    put("ocb_synthesis.json", &syn)?;
    put("ocb_circuit.json", &Circuit::Parallel(syn.to_parallel_circuit()?))?;
    put("identity_over_4.json", &maximally_mixed_process(WireDims::qubits())?)?;
    put("noisy_gamma_10.json", &noisy_ocb(10.0)?)?;
    put("noisy_gamma_0.2.json", &noisy_ocb(0.2)?)?;
    put("random_psd.json", &random_psd(seed)?)?;
    // the controlled unitary keeps every branch proper
    let mut spec = ParallelSpec::generic(2, 2);
    spec.state = StatePattern::ProductS1E;
    spec.unitary = UnitaryPattern::Controlled;
    put("product_state_circuit.json", &Circuit::Parallel(random_parallel(&spec, seed)?))?;
    let mut spec = ParallelSpec::generic(2, 2);
    spec.unitary = UnitaryPattern::ProductS2E;
    put("product_unitary_circuit.json", &Circuit::Parallel(random_parallel(&spec, seed)?))?;
    put("markovian_circuit.json", &Circuit::Serial(markovian_serial(2, seed)?))?;
    emit(&json!({ "seed": seed, "written": written }), None, out)?;
    Ok(EXIT_OK)
}

/// A random positive operator with the right trace that violates the process conditions.
fn random_psd(seed: u64) -> Result<LabeledOperator> {
    let labels = WireDims::qubits().labels();
    let m = crate::random::random_density(16, 16, &mut crate::random::rng(seed)) * crate::tensor::C64::new(4.0, 0.0);
    LabeledOperator::new(labels, m)
}

mod erased {
    use serde::Serialize;

    /// Object-safe serialization for heterogeneous fixture lists.
    pub trait Json {
        fn to_json(&self) -> crate::Result<String>;
    }

    impl<T: Serialize> Json for T {
        fn to_json(&self) -> crate::Result<String> {
            crate::json::to_string(self)
        }
    }
}
