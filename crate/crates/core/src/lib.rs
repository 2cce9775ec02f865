//! Prefix Consensus: the protocol family, its leaderless Strong and
//! multi-slot extensions, derived primitives, and a deterministic Byzantine
//! network simulator that exercises them.

pub mod checks;
pub mod compact;
pub mod crypto;
pub mod derived;
pub mod inspect;
pub mod msc;
pub mod nodes;
pub mod pc;
pub mod prefix;
pub mod runner;
pub mod scenario;
pub mod sim;
pub mod spc;
pub mod suites;
pub mod sweep;
pub mod wire;
