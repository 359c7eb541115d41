//! Test support for the prodgraph workspace: hand-built fixtures,
//! independent brute-force oracles, and seeded corpus generators.
//!
//! The oracles deliberately share no code with the library: they work on
//! hash sets built straight from event lists, so an agreement between
//! the two paths checks the algorithms rather than a common helper.

pub mod fixtures;
pub mod generators;
pub mod oracles;
