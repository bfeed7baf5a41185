//! Locally conformal multisymplectic field theory at desk scale.
//!
//! The crate builds the Hamiltonian side of first-order field theory on
//! coordinate charts of the multimomentum bundle and its quotient, twists it
//! by a closed Lee form, and verifies the resulting dynamics three ways:
//!
//! - symbolically, through an exact exterior-calculus layer ([`forms`]) over a
//!   small computer-algebra kernel ([`symexpr`]),
//! - numerically, by integrating the Hamilton-De Donder-Weyl equations for
//!   mechanics and for fields on a periodic Cauchy grid ([`dynamics`]),
//! - variationally, through the conformal Hamilton-Jacobi conditions ([`hj`])
//!   and their integrated counterparts on the space of Cauchy data ([`cauchy`]).
//!
//! [`bundle`] holds the geometric constructors (canonical forms, Hamiltonian
//! sections, Ehresmann connections); [`multisym`] keeps an independently coded
//! untwisted path used as the θ → 0 oracle; [`cli`] runs config-driven
//! scenarios and writes CSV reports.

pub mod bundle;
pub mod cauchy;
pub mod cli;
pub mod dynamics;
pub mod forms;
pub mod hj;
pub mod multisym;
pub mod symexpr;
pub mod util;

pub use symexpr::{Expr, Point};
