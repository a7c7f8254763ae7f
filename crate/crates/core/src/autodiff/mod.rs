//! Dense `f64` tensors, a recording graph with reverse-mode differentiation,
//! the ADAM optimizer, finite-difference gradient checks and the parameter
//! checkpoint format.

mod adam;
mod gradcheck;
mod graph;
mod params;
mod primitive;
mod suite;
mod tensor;

pub use adam::{adam_step, AdamState, DEFAULT_LR};
pub use gradcheck::{
    check_gradients, check_gradients_report, relative_error, GradCheckReport, DEFAULT_EPS,
    DEFAULT_TOLERANCE,
};
pub use graph::{Graph, NodeId};
pub use params::{Binder, Param, ParamStore, CHECKPOINT_MAGIC};
pub use primitive::{Attrs, Mode, Primitive, BN_EPS, BN_MOMENTUM, PRIMITIVE_NAMES};
pub use suite::{check_all_primitives, check_primitive, PrimitiveCheck};
pub use tensor::Tensor;


