//! Arithmetic over GF(p^m) and Reed–Solomon codes on top of it.

mod field;
mod rs;

pub use field::{prime_power, Field, FieldDescriptor, FieldError, MAX_TABLE_ORDER};
pub use rs::{Poly, RsCode, RsError, RsOutcome};
