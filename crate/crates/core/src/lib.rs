//! Branch-and-cut for mixed-integer bilevel linear optimization driven by an
//! improving-direction oracle.
//!
//! The same oracle answers two questions at a candidate point: whether the
//! follower could improve (a certificate of bilevel infeasibility for points
//! satisfying integrality) and, if so, which direction to use for building an
//! intersection cut. Exact enumeration oracles, the k-opt relaxation
//! hierarchy and a benchmark/profile harness round out the crate.

pub mod bench;
pub mod bnc;
pub mod bruteforce;
pub mod cuts;
pub mod exec;
pub mod instance;
pub mod kopt;
pub mod lattice;
pub mod milp;
pub mod oracle;
pub mod simplex;
pub mod suite;
pub mod verify;
