//! Relativistic diffusions on Robertson–Walker spacetimes.

pub mod cli;
pub mod expansion;
pub mod harness;
pub mod kv;
pub mod quadrature;
pub mod rng;
pub mod spatial;
pub mod temporal;
