//! Dataset schemas, CSV ingestion, min-max/one-hot preprocessing, and the
//! stratified splitting used by the label-efficiency experiments.

pub mod csv;
pub mod encoded;
pub mod preprocess;
pub mod schema;
pub mod split;

pub use self::csv::{load_csv, read_csv, RawRecord, RawValue};
pub use encoded::{DatasetMeta, EncodedDataset};
pub use preprocess::{fit_preprocessor, EncodedSample, FittedFeature, PreprocessorState, TransformStats};
pub use schema::{DatasetSchema, FeatureDescriptor, FeatureKind, MISSING_TOKEN};
pub use split::{filter_classes, holdout_split, stratified_split, stratified_subsample, SplitRole, SplitSpec, Task};
