//! Projective geometry toolkit for properly convex real projective structures.

pub mod convex;
pub mod coxeter;
pub mod dedup;
pub mod devmap;
pub mod hilbert;
pub mod invariants;
pub mod kv;
mod lp;
pub mod projective;
pub mod suspension;
