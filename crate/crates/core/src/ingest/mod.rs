//! KDD'99 ingestion: parsing, exact-duplicate removal, categorical coding,
//! and the known/unknown label space.

mod codebook;
mod labels;
mod record;
pub mod schema;

pub use codebook::{CategoricalCodebook, Codebooks};
pub use labels::{LabelSpace, Metatype, Taxonomy, Truth};
pub use record::{
    deduplicate, for_each_record, parse_kdd_line, read_records, CanonicalLine, ConnectionRecord,
    Deduplicator, FeatureValue, Labeled,
};
pub use schema::{NUM_FEATURES, CATEGORICAL_POSITIONS};
