//! User-private information retrieval (UPIR) over finite incidence
//! geometries.
//!
//! The crate builds projective planes and the classical generalised
//! quadrangles W(3,q) and Q(4,q), wraps them as UPIR systems, simulates the
//! plaintext relay protocol and its encrypted variant against
//! honest-but-curious coalitions, and computes the resulting pseudonymity
//! partitions both analytically and from simulated observations.

pub mod adversary;
pub mod algebra;
pub mod geometry;
pub mod harness;
pub mod upir;
