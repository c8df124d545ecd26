//! Explicit pathological solutions `u(x) = x₁ v(|x|)` of `-div(A ∇u) = 0` with
//! continuous, uniformly elliptic `A`, together with the numerical checks that
//! confirm their properties: the divergence identity, ellipticity, the weak
//! formulation near the singularity, integrability and oscillation of `∇u`,
//! the asymptotic kernel, and non-uniqueness for the Dirichlet problem.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod asymptotics;
pub mod coefficients;
pub mod error;
pub mod families;
pub mod identity;
pub mod math;
pub mod nonuniqueness;
pub mod norms;
pub mod weak_form;

pub use error::{Error, Result};
pub use families::{FamilyKind, FamilyParams, Profile, R0Choice, RadialProfile};
