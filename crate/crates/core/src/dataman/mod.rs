//! Embedding datasets: the on-disk directory format, train/test split
//! builders, and stratified k-fold partitioning.

mod manifest;
mod split;

pub use manifest::{
    load_manifest, save_manifest, DatasetManifest, EmbeddingRecord, Examples, Source,
    ACOUSTIC_FILE, MANIFEST_FILE, TEXT_FILE,
};
pub use split::{
    build_split, stratified_kfold, FoldAssignment, SplitAssignment, SplitScheme,
    DATASET_B_TEST_FRACTION,
};
