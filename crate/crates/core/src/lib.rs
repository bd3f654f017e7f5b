//! Linear recurrences `x_i = a_i x_{i-1} + u_i` through their transfer operator:
//! flat parallel scans, the two-level block decomposition, sliding-window
//! truncations with the Block Two-Pass solver, emulated low-precision
//! arithmetic, and a small gated sequence-mixing layer built on top.

pub mod error;
pub mod flat_scan;
pub mod hierarchical;
pub mod matrix;
pub mod numerics;
pub mod phalanx;
pub mod pipeline;
pub mod recurrence;
pub mod window;

pub use error::{Result, SwrError};
pub use flat_scan::{brent_kung_solve, kogge_stone_factors, kogge_stone_solve, ScanStats};
pub use hierarchical::{
    assemble_decomposition, block_factors_backward, build_block_factors, hierarchical_solve, BlockFactors,
    BlockPartition, CarrierSystem, GlobalStrategy, MaterializeStrategy,
};
pub use matrix::DenseMatrix;
pub use numerics::{quantize, Arith, PrecisionFormat, SeededRng, TolerancePolicy};
pub use phalanx::{featurize, init_params, layer_forward, LayerConfig, LayerParams};
pub use pipeline::{pipeline_b2p, pipeline_trace, PipelinePlan, PipelineTrace};
pub use recurrence::{
    apply_transfer, materialize_transfer_naive, sequential_solve, CoefficientSequence, InputSequence, StateSequence,
    TransferOperator,
};
pub use window::{
    horizon_pointwise, horizon_tail, horizon_underflow, jagged_window_solve, truncation_error_report,
    uniform_window_solve, WindowSpec,
};
