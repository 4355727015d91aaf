//! Doctest bridge for the mdbook guide: every code block in `book/src/*.md`
//! compiles and runs under `cargo test --doc`, so the guide cannot drift
//! from the crate.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/points-and-sets.md")]
pub mod points_and_sets {}

#[doc = include_str!("../../../book/src/monomial-basis.md")]
pub mod monomial_basis {}

#[doc = include_str!("../../../book/src/measures-and-moments.md")]
pub mod measures_and_moments {}

#[doc = include_str!("../../../book/src/moment-matrix.md")]
pub mod moment_matrix {}

#[doc = include_str!("../../../book/src/kernel-and-christoffel.md")]
pub mod kernel_and_christoffel {}

#[doc = include_str!("../../../book/src/growth-and-sweeps.md")]
pub mod growth_and_sweeps {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
