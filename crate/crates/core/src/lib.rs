//! Core library for turning thyroid operation narratives into structured
//! 22-field operation records.

pub mod bio;
pub mod corpus;
pub mod error;
pub mod evaluator;
pub mod gold;
pub mod pack;
pub mod record;
pub mod render;
pub mod span;
pub mod structurer;
pub mod tagger;
pub mod tags;
pub mod transcript;

pub use bio::{decode_spans, encode_labels, repair_labels, tokenize, Label, LabelSequence};
pub use error::{CoreError, Result, SchemaIssue};
pub use evaluator::{emit_report, evaluate, EvalReport, MatchMode, Prediction, ReportFormat, TagMetrics};
pub use gold::GoldDocument;
pub use pack::LanguagePack;
pub use record::{validate_record, Field, FieldValue, Note, OperationRecord, Violation};
pub use render::{build_scene, render_svg, AnatomyScene, Region, RegionStatus};
pub use span::{EntitySpan, StandoffSpan};
pub use structurer::{MappingTable, StructureOutcome, Structurer};
pub use tagger::RuleTagger;
pub use tags::{Tag, TagSet};
pub use transcript::{LanguageMode, Transcript, TranscriptId};
