//! Acceptance checks for the workspace: reference oracles, the seeded
//! synthetic benchmark and one function per criterion. The `acceptance` test
//! target runs them all and prints a PASS or FAIL line for each.

pub mod bench;
pub mod criteria;
pub mod oracle;
