//! Numerical building blocks shared by the verification modules.

pub mod fit;
pub mod linalg;
pub mod quad;
pub mod sampling;
pub mod special;
