//! Type space, kernels, threshold measures and grid functions.

mod function;
mod grid;
pub(crate) mod kernel;
mod measure;
mod step;

pub use function::GridFunction;
pub use grid::TypeGrid;
pub use kernel::KernelModel;
pub use measure::{ThresholdMeasure, DEFAULT_MAX_THRESHOLD};
pub use step::{make_step_kernels, BlockPartition, StepKernel, StepSide};
