//! Numerical laboratory for binomial coefficients along paths in the Pascal
//! graph: residues mod primes, the gaskets they trace, and the fractional
//! parts `{d_n(x) θ}` for specially built `θ`.

pub mod diophantine;
pub mod gasket;
pub mod pascal_path;
pub mod residue_engine;
pub mod rng;
pub mod row_sampler;
pub mod stats;
pub mod theta_lab;
