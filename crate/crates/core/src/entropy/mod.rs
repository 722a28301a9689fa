//! Lower bounds on the conditional entropy `S(A|E)` of Alice's time-bin key
//! given a quantum adversary, from a Gauss-Radau expansion of the
//! logarithm turned into a semidefinite program.

mod dense;
mod field;
pub mod oracle;
pub mod problem;
pub mod quadrature;
pub mod solve;
mod structured;

pub use dense::DENSE_MAX_VARS;
pub use oracle::{direct_entropy_oracle, pinched_entropy_gap};
pub use problem::{assemble_sdp, key_pinching_projectors, CanonicalSdp, SdpProblem, CONSTRAINT_TOL};
pub use quadrature::{gauss_radau, Quadrature};
pub use solve::{solve_entropy_bound, Backend, SdpSolution, SolveStatus, SolverOptions};
