//! Run configuration: a JSON document with command-line overrides.
//!
//! Precedence, lowest to highest: built-in defaults for the case, the JSON
//! file given by `--config`, then individual flags.

use std::path::{Path, PathBuf};

use hypofem::cases::CaseDefinition;
use hypofem::forms::ProblemData;
use hypofem::linalg::{PreconditionerKind, SolverKind, SolverOptions};
use hypofem::{KRule, Method, RunSettings};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Largest level run by default for p ≥ 3 under k = h².
pub const GUARDED_LEVEL: usize = 2048;

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub kind: Option<String>,
    pub tol: Option<f64>,
    pub restart: Option<usize>,
    pub max_iter: Option<usize>,
    pub preconditioner: Option<String>,
}

/// Partially specified configuration as read from JSON or flags.
#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PartialConfig {
    pub case: Option<String>,
    pub method: Option<String>,
    pub p: Option<usize>,
    pub q: Option<usize>,
    /// Mesh levels as element counts 2n².
    pub levels: Option<Vec<usize>>,
    pub k_rule: Option<String>,
    pub t_f: Option<f64>,
    pub solver: SolverConfig,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    /// Poincaré constant for the decay envelope; estimated when absent.
    pub c_pf: Option<f64>,
    /// Keep levels above the runtime guard for p ≥ 3 with k = h².
    pub allow_finest: Option<bool>,
}

impl PartialConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `other` replace ours.
    pub fn overlay(mut self, other: PartialConfig) -> Self {
        macro_rules! take {
            ($($f:ident).+) => {
                if other.$($f).+.is_some() {
                    self.$($f).+ = other.$($f).+;
                }
            };
        }
        take!(case);
        take!(method);
        take!(p);
        take!(q);
        take!(levels);
        take!(k_rule);
        take!(t_f);
        take!(solver.kind);
        take!(solver.tol);
        take!(solver.restart);
        take!(solver.max_iter);
        take!(solver.preconditioner);
        take!(out);
        take!(seed);
        take!(threads);
        take!(c_pf);
        take!(allow_finest);
        self
    }
}

/// Fully resolved configuration; its JSON form is hashed into output names.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub case: String,
    pub method: String,
    pub p: usize,
    pub q: usize,
    pub levels: Vec<usize>,
    pub k_rule: String,
    pub t_f: f64,
    pub solver: ResolvedSolver,
    #[serde(skip)]
    pub out: PathBuf,
    pub seed: u64,
    #[serde(skip)]
    pub threads: Option<usize>,
    pub c_pf: Option<f64>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ResolvedSolver {
    pub kind: String,
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
    pub preconditioner: String,
}

fn default_levels(case: &str, command: &str) -> Vec<usize> {
    match (command, case) {
        ("convergence", "stationary") => vec![32, 128, 512, 2048, 8192],
        ("convergence", _) => vec![32, 128, 512, 2048],
        ("decay", _) => vec![128],
        _ => vec![32],
    }
}

fn default_k_rule(case: &str) -> KRule {
    match case {
        "stationary" => KRule::Single,
        "instationary" => KRule::HSquared,
        _ => KRule::H,
    }
}

fn parse_solver_kind(s: &str) -> Result<SolverKind, CliError> {
    match s {
        "gmres" => Ok(SolverKind::Gmres),
        "dense-lu" | "lu" => Ok(SolverKind::DenseLu),
        _ => Err(CliError::Config(format!("unknown solver `{s}` (expected gmres or dense-lu)"))),
    }
}

fn parse_preconditioner(s: &str) -> Result<PreconditionerKind, CliError> {
    match s {
        "none" => Ok(PreconditionerKind::None),
        "jacobi" => Ok(PreconditionerKind::Jacobi),
        "ilu0" => Ok(PreconditionerKind::Ilu0),
        _ => Err(CliError::Config(format!("unknown preconditioner `{s}` (expected none, jacobi or ilu0)"))),
    }
}

impl RunConfig {
    pub fn resolve(command: &str, partial: PartialConfig) -> Result<Self, CliError> {
        let case_name = partial.case.unwrap_or_else(|| match command {
            "decay" => "decay".into(),
            _ => "stationary".into(),
        });
        let case = CaseDefinition::by_name(&case_name).map_err(|e| CliError::Config(e.to_string()))?;
        let method: Method = partial.method.as_deref().unwrap_or("hypo").parse().map_err(config)?;
        let p = partial.p.unwrap_or(1);
        let q = partial.q.unwrap_or(0);
        if !(1..=4).contains(&p) {
            return Err(CliError::Config(format!("p = {p} is outside 1..=4")));
        }
        if q > 4 {
            return Err(CliError::Config(format!("q = {q} is outside 0..=4")));
        }
        let k_rule = match partial.k_rule.as_deref() {
            Some(s) => s.parse::<KRule>().map_err(config)?,
            None => default_k_rule(&case_name),
        };
        let mut levels = partial.levels.unwrap_or_else(|| default_levels(&case_name, command));
        if levels.is_empty() {
            return Err(CliError::Config("no mesh levels given".into()));
        }
        for &e in &levels {
            hypofem::experiments::mesh_with_elements(e).map_err(config)?;
        }
        if p >= 3 && k_rule == KRule::HSquared && !partial.allow_finest.unwrap_or(false) {
            let before = levels.len();
            levels.retain(|&e| e <= GUARDED_LEVEL);
            if levels.len() < before {
                log::warn!("levels above {GUARDED_LEVEL} elements dropped for p = {p} with k = h2 (set allow_finest)");
            }
            if levels.is_empty() {
                return Err(CliError::Config("every level exceeds the runtime guard".into()));
            }
        }
        let t_f = partial.t_f.unwrap_or(case.t_f());
        if !(t_f > 0.0 && t_f.is_finite()) {
            return Err(CliError::Config(format!("t_f = {t_f} must be positive")));
        }
        match command {
            "convergence" if !case.has_exact() => {
                return Err(CliError::Config(format!("case `{case_name}` has no exact solution to converge to")));
            }
            "decay" if !case.source_is_zero() => {
                return Err(CliError::Config(format!("decay runs need a case with f = 0, not `{case_name}`")));
            }
            "solve" | "params-dump" if levels.len() != 1 => {
                return Err(CliError::Config(format!("{command} takes exactly one level, got {}", levels.len())));
            }
            _ => {}
        }
        if case_name == "instationary" && t_f >= 2.0 {
            return Err(CliError::Config("the instationary case is only defined for t < 2".into()));
        }
        let defaults = SolverOptions::default();
        let s = &partial.solver;
        let solver = ResolvedSolver {
            kind: s.kind.clone().unwrap_or_else(|| "gmres".into()),
            tol: s.tol.unwrap_or(defaults.tol),
            restart: s.restart.unwrap_or(defaults.restart),
            max_iter: s.max_iter.unwrap_or(defaults.max_iter),
            preconditioner: s.preconditioner.clone().unwrap_or_else(|| "ilu0".into()),
        };
        parse_solver_kind(&solver.kind)?;
        parse_preconditioner(&solver.preconditioner)?;
        if !(solver.tol > 0.0) || solver.restart == 0 || solver.max_iter == 0 {
            return Err(CliError::Config("solver tol, restart and max_iter must be positive".into()));
        }
        if partial.threads == Some(0) {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        Ok(Self {
            command: command.into(),
            case: case_name,
            method: method.to_string(),
            p,
            q,
            levels,
            k_rule: k_rule.to_string(),
            t_f,
            solver,
            out: partial.out.unwrap_or_else(|| PathBuf::from("out")),
            seed: partial.seed.unwrap_or(0),
            threads: partial.threads,
            c_pf: partial.c_pf,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// First 12 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_vec(self).expect("config serialises"));
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    /// Common file stem, e.g. `convergence_stationary_hypo_p2q0_1a2b3c4d5e6f`.
    pub fn stem(&self) -> String {
        format!("{}_{}_{}_p{}q{}_{}", self.command, self.case, self.method, self.p, self.q, self.hash())
    }

    pub fn settings(&self) -> Result<RunSettings, CliError> {
        let case = CaseDefinition::by_name(&self.case).map_err(config)?;
        let mut s = RunSettings::new(
            case,
            self.method.parse().map_err(config)?,
            self.p,
            self.q,
            self.k_rule.parse().map_err(config)?,
        );
        s.t_f = Some(self.t_f);
        s.solver = SolverOptions {
            tol: self.solver.tol,
            restart: self.solver.restart,
            max_iter: self.solver.max_iter,
            preconditioner: parse_preconditioner(&self.solver.preconditioner)?,
            kind: parse_solver_kind(&self.solver.kind)?,
            ..SolverOptions::default()
        };
        Ok(s)
    }
}

fn config(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}
