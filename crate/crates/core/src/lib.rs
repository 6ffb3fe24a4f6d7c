//! Mixed-variable, hierarchical, constrained Bayesian optimization.
//!
//! The crate covers the full loop for expensive black-box problems whose
//! design space mixes continuous, integer and categorical variables under
//! activation and value rules: space definition and canonicalization
//! ([`design_space`]), Gaussian-process surrogates with an evaluability
//! classifier for hidden constraints ([`surrogate`]), constrained infill
//! criteria and their mixed-variable inner solver ([`acquisition`]), the
//! optimization driver ([`bo`]), an evolutionary baseline ([`evo`]) and an
//! analytic turbofan sizing benchmark ([`turbofan`]).
//!
//! Everything here is `no_std` + `alloc`; wall-clock measurement is
//! injected through [`bo::Clock`] so the crate never touches an OS timer.

#![cfg_attr(not(test), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod acquisition;
pub mod bo;
pub mod design_space;
pub mod evo;
pub mod lhs;
pub mod linalg;
pub mod rng;
pub mod search;
pub mod stats;
pub mod surrogate;
pub mod turbofan;
mod variation;
