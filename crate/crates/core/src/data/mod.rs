//! Datasets, loaders, checkpoints and metrics sinks.

mod checkpoint;
mod corpus;
mod dataset;
mod digits;
mod gaussian;
mod idx;
mod metrics;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use corpus::{load_char_corpus, CharCorpus};
pub use dataset::{Batch, Dataset, Samples, Split};
pub use digits::{gen_digit_images, shift_images, ImageShift};
pub use gaussian::{gen_gaussian_task, GaussianTask};
pub use idx::{
    load_idx_pair, load_mnist, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels, write_idx_pair,
    IdxImages,
};
pub use metrics::{format_float, parse_float, read_csv, run_file_name, Field, MetricsSink};
