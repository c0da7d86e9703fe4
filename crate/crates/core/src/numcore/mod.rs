//! Deterministic dense-network numerics in `f64`.

mod checkpoint;
mod gradcheck;
mod layer;
mod loss;
mod matrix;
mod normalize;

use rand::SeedableRng;

pub use checkpoint::{Checkpoint, FORMAT_VERSION, MAGIC};
pub use gradcheck::{
    compare_gradients, grad_check, numeric_gradients, relative_error, Differentiable,
    GradCheckReport, StackProblem, FD_STEP, REL_ERROR_FLOOR,
};
pub use layer::{dense_forward, dropout, relu, BatchActivations, DenseGrads, DenseLayer, Layer, LayerDesc, Stack};
pub use loss::{softmax, softmax_cross_entropy};
pub use matrix::Matrix;
pub use normalize::{l2_normalize, l2_normalize_rows, Standardizer, NORM_EPS};

/// The generator behind every random draw in the crate.
pub type SeededRng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn seeded_stream(seed: u64, stream: u64) -> SeededRng {
    let mut rng = SeededRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
