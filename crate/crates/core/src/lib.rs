//! Dense convex QP solver based on shifted NCP residuals with proximal
//! primal-dual regularization.
//!
//! Solves `min ½xᵀQx + cᵀx  s.t.  Ax = b, Gx ≤ h` with a damped Newton
//! method on a smoothed, regularized KKT system. Degenerate problems (LICQ
//! failure, redundant rows, non-unique solutions) are handled without special
//! casing. Also provides implicit differentiation of the solution map and a
//! brute-force active-set oracle for testing.
//!
//! ```
//! use shiftqp::{solve, Mat, QpModel, SolverParams, Status};
//!
//! // min ½‖x‖² + x₁ + x₂  s.t.  x₁ ≥ 0
//! let model: QpModel<f64> = QpModel::without_equalities(
//!     Mat::identity(2),
//!     vec![1.0, 1.0],
//!     Mat::from_row_slice(1, 2, &[-1.0, 0.0]),
//!     vec![0.0],
//! )
//! .unwrap();
//! let report = solve(&model, &SolverParams::default(), None);
//! assert_eq!(report.status, Status::Solved);
//! assert!((report.solution.x[1] + 1.0).abs() < 1e-6);
//! ```

pub mod diff;
pub mod kkt;
pub mod linalg;
pub mod model;
pub mod ncp;
pub mod oracle;
pub mod scalar;
pub mod solver;

pub use diff::{finite_diff_check, hypergradient, solve_adjoint, AdjointSeed, FdReport, LossSpec, QpGradients};
pub use kkt::{Direction, KktMode, KktWorkspace};
pub use linalg::Mat;
pub use model::{ModelError, PerturbSpec, QpModel};
pub use ncp::NcpKind;
pub use oracle::{enumerate_solve, OracleError, OracleResult, OracleSolution};
pub use scalar::Real;
pub use solver::{
    solve, Estimates, Iterate, PenaltyState, SolveReport, SolverParams, Status, TraceRow, Verbosity,
};

pub type QpModel64 = QpModel<f64>;
pub type QpModel32 = QpModel<f32>;
pub type SolverParams64 = SolverParams<f64>;
pub type SolverParams32 = SolverParams<f32>;
pub type Iterate64 = Iterate<f64>;
pub type SolveReport64 = SolveReport<f64>;
pub type SolveReport32 = SolveReport<f32>;
pub type Mat64 = Mat<f64>;
