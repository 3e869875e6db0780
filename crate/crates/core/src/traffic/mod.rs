//! Packet sources: CSV trace files and seeded synthetic traffic.

mod generator;
mod trace;

pub use generator::{generate, AttackKind, AttackModel, Categorical, LegitModel, Pin};
pub use trace::{read_trace, write_trace, TraceReader, TraceWriter, TRACE_HEADER};
