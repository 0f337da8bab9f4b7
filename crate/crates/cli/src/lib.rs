//! Library side of the harness: the acceptance suite and the report-emitting
//! command implementations, shared by the binary and the integration tests.

pub mod accept;
pub mod commands;
