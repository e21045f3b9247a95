//! Equivariant holonomy, Chern–Simons actions and integrated Cheeger–Chern–Simons
//! equivariant differential characters for trivial U(1) and SU(2) bundles over tori.
//!
//! Orientation table: tori carry dx∧dy(∧dz); mapping tori M×S¹ carry the reverse of
//! dx∧dy∧dt; trace forms use literal `Tr`, so the positive form on anti-Hermitian
//! matrices is `-Tr`.

#![allow(clippy::needless_range_loop)]

pub mod abelian_oracle;
pub mod cli;
pub mod cschar;
pub mod equivariant;
pub mod fields;
pub mod fixtures;
pub mod gauge;
pub mod lie;
pub mod quad;

use std::sync::atomic::{AtomicBool, Ordering};

static PARALLEL: AtomicBool = AtomicBool::new(true);

/// Toggle data-parallel evaluation at run time. Without the `parallel` feature
/// evaluation is always sequential.
pub fn set_parallel(on: bool) {
    PARALLEL.store(on, Ordering::Relaxed);
}

pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && PARALLEL.load(Ordering::Relaxed)
}
