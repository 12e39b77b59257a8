//! Minimal differentiable tensor kernel: 2D convolution, fully-connected
//! layers, ReLU, MSE, reverse-mode gradients over a recorded operation
//! graph, and SGD/Adam updates.
//!
//! All arithmetic is 64-bit. Batch gradient accumulation is defined to run
//! in sample-index order so training is bit-reproducible.

mod checkpoint;
mod graph;
mod layers;
mod optim;
mod tensor;

pub use checkpoint::{
    read_checkpoint, read_checkpoint_file, write_checkpoint, write_checkpoint_file,
    CheckpointContents, FORMAT_TAG, FORMAT_VERSION,
};
pub use graph::{Graph, NodeId, Workspace};
pub use layers::{conv2d_forward, dense_forward, mse, relu, ConvLayer, DenseLayer};
pub use optim::{adam_step, sgd_step, AdamState};
pub use tensor::Tensor;
