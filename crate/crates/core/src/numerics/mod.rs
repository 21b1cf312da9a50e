//! Numerical kernels shared by the analytic and simulation paths.

pub mod hyp2f1;
pub mod jet;
pub mod quadrature;

pub use hyp2f1::{hyp2f1, hyp2f1_minus_one};
pub use jet::{finite_difference, kth_derivative, Jet, MAX_ORDER};
pub use quadrature::{integrate, integrate_with, Estimate, Integrable, QuadOptions};
