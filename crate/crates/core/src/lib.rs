//! Non-isothermal Bingham flow on a cross-grid P1–Q0 mesh.
//!
//! The flow is discretized with P1 velocities, piecewise-constant pressures
//! per quad and a piecewise-constant tensor multiplier per triangle. The yield
//! law is regularized à la Huber and solved with a semismooth Newton method
//! inside a semi-implicit BDF2 time loop coupled to a P1 energy equation.

pub mod assembly;
pub mod cli;
pub mod huber;
pub mod linalg;
pub mod mesh;
pub mod ssn;
pub mod postprocess;
pub mod stepper;
