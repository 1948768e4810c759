//! Anonymization engine for published tabular microdata.
//!
//! The pipeline removes explicit identifiers, coarsens quasi-identifiers
//! through domain generalization hierarchies, suppresses cells or records,
//! and verifies k-anonymity and l-diversity before a table is released.

pub mod anonymizer;
pub mod csvio;
pub mod error;
pub mod hierarchy;
pub mod metrics;
pub mod model;
pub mod policy;

pub use anonymizer::{
    check_privacy, enforce_from, enforce_k_anonymity, replay_report, run_pipeline, run_pipeline_detailed,
    suppress_cells, suppress_records, AnonymizationReport, CheckReport, LDiversityOutcome, LevelVector,
    SuppressionBudget, SuppressionDirective,
};
pub use csvio::{read_table_csv, write_table_csv, CsvOptions};
pub use error::{Error, PipelineStep, Result};
pub use hierarchy::{
    generalize_column, generalize_value, load_hierarchy, validate_hierarchy, GeneralizationHierarchy,
    Hierarchies, HierarchySpec,
};
pub use metrics::{
    attribute_frequency_violations, compute_utility, k_anonymity_level, l_diversity_level, partition_by_qid,
    CheckMode, EquivalenceClass, PrivacyParams, UtilityReport,
};
pub use model::{
    build_dataset, classify_attributes, deidentify, project, AttributeCategory, Cell, ClassifiedSchema,
    Dataset, RetainList,
};
pub use policy::{parse_policy_file, PolicyFile};
