//! Truncated path signatures and signature kernels for cadlag paths.
//!
//! Spike trains are counting paths with jumps. To compare them with inner
//! products of iterated integrals, each jump is traversed linearly over
//! fictitious time (Marcus interpolation), a time coordinate carrying the
//! original clock is appended, and the truncated signature of the resulting
//! piecewise-linear path is assembled from segment tensor exponentials via
//! Chen's identity. Kernels are graded inner products of these signatures,
//! optionally after a norm-bounding tensor normalization, and batches are
//! compared with an unbiased MMD estimator.

pub mod error;
pub mod grad;
pub mod io;
pub mod kernel;
pub mod mmd;
pub mod path;
pub mod tensor;

pub use error::{Error, Result};
pub use grad::{spike_signature_gradients, SpikeGradient};
pub use kernel::{
    gram_matrix, signature_features, signature_kernel, sym_min_eigenvalue, KernelConfig,
    Normalization,
};
pub use mmd::{mmd_from_features, mmd_unbiased, permutation_test, PermutationReport};
pub use path::{marcus_interpolate, spikes_to_path, time_augment, CadlagPath, PiecewiseLinear};
pub use tensor::{robust_normalize, truncated_signature, TruncatedSignature};
