//! Minimal reverse-mode automatic differentiation over dense arrays.

mod array;
mod tape;

pub use array::Array;
pub use tape::{Gradients, Tape, Var};

#[cfg(test)]
pub(crate) use tape::log_sum_exp;
