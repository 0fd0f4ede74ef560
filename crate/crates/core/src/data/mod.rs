//! Vocabularies, feature files, normalization and toy corpora.

mod corpus;
mod melbin;
mod metrics;
mod norm;
mod toy;

pub use corpus::{
    load_corpus, read_gold, read_manifest, write_gold, write_manifest, ManifestEntry, Rejected, Utterance, Vocabulary,
};
pub use melbin::{decode_melbin, encode_melbin, load_melbin, save_melbin, MELBIN_MAGIC, MELBIN_VERSION};
pub use metrics::{alignment_accuracy, AlignmentScore};
pub use norm::NormStats;
pub use toy::{generate_toy_corpus, gold_means, ToySpec};
