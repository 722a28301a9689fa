//! Solver front end: options, result type and backend dispatch.

use crate::error::Result;
use crate::linalg::DensityMatrix;

use super::dense;
use super::problem::SdpProblem;
use super::structured;

/// Outcome classification of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Certified gap within the requested tolerance.
    Optimal,
    /// Certified bound available but the gap exceeds the tolerance.
    NearOptimal,
    /// The constraints admit no state.
    Infeasible,
    /// No usable bound could be produced.
    NumericalFailure,
}

impl SolveStatus {
    /// Lower-case tag for reports.
    pub fn tag(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::NearOptimal => "near_optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::NumericalFailure => "numerical_failure",
        }
    }

    /// A lower bound usable for key rates is available.
    pub fn has_bound(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::NearOptimal)
    }
}

/// Which algorithm solves the program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Barrier method over `σ` alone with the auxiliary blocks eliminated in
    /// closed form, certified by an explicit dual point. Default.
    Structured,
    /// Generic primal-dual interior point on the canonical conic form.
    /// Cubic in the total variable count; intended for small instances.
    Dense,
}

impl Backend {
    /// Lower-case tag.
    pub fn tag(self) -> &'static str {
        match self {
            Backend::Structured => "structured",
            Backend::Dense => "dense",
        }
    }

    /// Parses a tag.
    pub fn from_tag(s: &str) -> Option<Backend> {
        match s.trim().to_ascii_lowercase().as_str() {
            "structured" => Some(Backend::Structured),
            "dense" => Some(Backend::Dense),
            _ => None,
        }
    }
}

/// Solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Algorithm.
    pub backend: Backend,
    /// Relative duality-gap tolerance for [`SolveStatus::Optimal`].
    pub gap_tolerance: f64,
    /// Gap below which a bound is still reported as near optimal.
    pub near_optimal_gap: f64,
    /// Iteration cap (Newton steps or interior-point iterations).
    pub max_iterations: usize,
    /// Print progress to stderr.
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            backend: Backend::Structured,
            gap_tolerance: 1e-7,
            near_optimal_gap: 1e-3,
            max_iterations: 600,
            verbose: false,
        }
    }
}

/// Result of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    /// Lower bound on `S(A|E)` in bits.
    pub bound: f64,
    /// Primal objective at the final iterate.
    pub objective: f64,
    /// `objective - bound`.
    pub duality_gap: f64,
    /// Outcome classification.
    pub status: SolveStatus,
    /// Final primal state, when one is available.
    pub sigma_star: Option<DensityMatrix>,
    /// Iterations performed.
    pub iterations: usize,
    /// Backend used.
    pub backend: Backend,
}

impl SdpSolution {
    pub(crate) fn classify(gap: f64, bound: f64, opts: &SolverOptions) -> SolveStatus {
        if !bound.is_finite() || !gap.is_finite() {
            SolveStatus::NumericalFailure
        } else if gap <= opts.gap_tolerance * bound.abs().max(1.0) {
            SolveStatus::Optimal
        } else if gap <= opts.near_optimal_gap * bound.abs().max(1.0) {
            SolveStatus::NearOptimal
        } else {
            SolveStatus::NumericalFailure
        }
    }
}

/// Solves the entropy program with the selected backend.
pub fn solve_entropy_bound(problem: &SdpProblem, options: &SolverOptions) -> Result<SdpSolution> {
    match options.backend {
        Backend::Structured => structured::solve(problem, options),
        Backend::Dense => dense::solve(problem, options),
    }
}
