pub mod bioe;
pub mod dataset;
pub mod eval;
pub mod format;
pub mod labeler;
pub mod ingest;
pub mod markup;
pub mod recommend;
pub mod service;
pub mod stats;
pub mod synthetic;

pub use format::{classify_marker, FormatType, UnknownMarker};
