//! Caption text processing: cleaning, vocabulary, id encoding, pretrained
//! word vectors.

mod embeddings;
mod porter;
mod preprocess;
mod vocab;

pub use embeddings::{load_embeddings, EmbeddingTable, LookupOutcome, OovPolicy};
pub use porter::stem;
pub use preprocess::{preprocess_text, PreprocConfig};
pub use vocab::{build_vocab, encode_and_pad, Vocabulary, OOV_ID, PAD_ID};
