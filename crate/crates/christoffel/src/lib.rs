//! Christoffel-Darboux kernels and Christoffel functions on separable
//! Hilbert spaces, at finite truncation orders.
//!
//! Points of the space are truncated coefficient vectors; polynomials are
//! spanned by monomials indexed by sparse multi-indices, graded by an
//! *algebraic* degree `d` (total degree) and a *harmonic* degree `n` (the
//! largest active coordinate). Fitting a probability measure produces the
//! moment matrix of that monomial basis, whose spectral inverse defines the
//! Christoffel-Darboux kernel `K(x, y)`, the diagonal polynomial
//! `p(x) = K(x, x)`, and the Christoffel function `C(z) = 1/K(z, z)`;
//! `p` grows exponentially away from the support, which is what makes it an
//! outlier score for functional data given by basis coefficients.
//!
//! The `book/` directory of the repository walks through the concepts; its
//! code snippets compile against this crate as doctests.

pub mod asymptotics;
#[cfg(doctest)]
pub mod book;
pub mod cdkernel;
pub mod hilbert;
pub mod measures;
pub mod moments;
pub mod multiindex;
pub mod verify;

/// Formats a float at 17 significant digits, enough for exact round trips.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
