//! Workbench for generalized Buchstab iteration rules.
//!
//! * [`exactcomb`]: exact binomial-basis coefficients of the rules.
//! * [`admissible`]: the admissible parameter domain and sign certificates.
//! * [`bounds`]: grid tables for the sieve functions `F` and `f`.
//! * [`quadrature`]: classical and generalized integral operators.
//! * [`driver`]: fixed-point iteration, parameter search, sifting limits.
//! * [`simulate`]: exact counting checks of every rule on explicit sets.
//! * [`cli`]: the `sievekit` command line.

pub mod admissible;
pub mod bounds;
pub mod cli;
pub mod driver;
pub mod exactcomb;
pub mod quadrature;
pub mod simulate;
