//! Dense tensors and a reverse-mode tape.

mod tape;
mod tensor;

pub use tape::{ColumnMap, Gradients, Tape, Var};
pub(crate) use tape::for_each_column;
pub use tensor::Tensor;
