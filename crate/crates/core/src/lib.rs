//! Analysis and balanced model reduction of retarded time-delay systems
//!
//! ```text
//! x'(t) = sum_i A_i x(t - hA_i) + sum_i B_i u(t - hB_i)
//! y(t)  = sum_i C_i x(t - hC_i) + sum_i D_i u(t - hD_i)
//! ```
//!
//! Gramians and the H2 norm are computed by adaptive Gauss–Kronrod
//! quadrature of their frequency-domain integrals, one resolvent
//! factorization per frequency (dense, or sparse on request). Balanced
//! realizations use the square-root method on those gramians.
//!
//! ```
//! use rtds::{benchmarks::hot_shower, h2_norm, QuadOptions};
//!
//! let (sys, exact) = hot_shower(1.0, 1.0, 1.0, 0.5).unwrap();
//! let h2 = h2_norm(&sys, &QuadOptions::default()).unwrap();
//! assert!((h2 - exact).abs() < 1e-6 * exact);
//! ```
//!
//! With the default `parallel` feature, frequency sweeps, quadrature rounds
//! and per-input step simulations run on the rayon pool. Without it the same
//! code runs sequentially and gives identical results.

pub mod analysis;
mod asymptotic;
pub mod balancing;
pub mod benchmarks;
pub mod error;
pub mod freqresp;
pub mod linalg;
pub mod options;
pub mod par;
pub mod quadrature;
pub mod random;
pub mod simulation;
pub mod system;

pub use analysis::{gramians, h2_norm, h2_norm_report, GramianKind, GramianPair, H2Report, QuadDiagnostics};
pub use balancing::{
    balanced_realization, balanced_truncation, balancing_info, BalancingInfo, RankPolicy, Reduction,
};
pub use error::{Error, ErrorKind, Result};
pub use freqresp::{freq_grid, log_grid, transfer, FreqResponse};
pub use options::{FreqInterval, QuadOptions};
pub use random::random_rtds;
pub use simulation::{step_response, step_response_with, step_responses, StepOptions, TimeResponse};
pub use system::{load_rtds, save_rtds, DelayedMatrixSum, Rtds};
