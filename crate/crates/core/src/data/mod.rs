//! Loading, encoding, splitting and resampling tabular data.

pub mod encoder;
pub mod presets;
pub mod smote;
pub mod split;
pub mod table;

pub use encoder::{
    encode, fit_encoder, normalize_records, ColumnEncoder, EncodedMatrix, EncoderState, Provenance,
};
pub use presets::KnownDataset;
pub use smote::{smote, ResampleConfig, SmoteOutput};
pub use split::{stratified_split, SplitPlan};
pub use table::{
    load_table, read_table, ColumnKind, ColumnSpec, FeatureSchema, LoadOptions, NumericKind,
    RawColumn, RawTable,
};
