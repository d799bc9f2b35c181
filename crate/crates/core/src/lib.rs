//! Test suite adequacy analysis in a 2D instance space.
//!
//! A suite's test cases are described by features and labelled by outcome
//! (failing tests are *effective*). The crate standardizes and selects the
//! features that separate outcomes, fits a linear 2D projection in which
//! features and outcome trend linearly, and measures the suite there: the
//! area its tests span, the area of the failing region, and the share of
//! the feasible space it covers. Diversity scores, a budgeted active-learning
//! oracle and the equal opportunity difference round out the toolkit.

pub mod corpus;
pub mod diversity;
pub mod fixtures;
pub mod geometry;
pub mod linalg;
pub mod oracle;
pub mod pipeline;
pub mod projection;
pub mod report;
pub mod selection;

pub use corpus::{FeatureMatrix, OutcomeLabel, SuiteFormat, TestCase, TestSuite};
pub use diversity::{DiversityScore, KernelKind, KernelMatrix, LogDet};
pub use geometry::{InstanceSpace, Point, Polygon};
pub use oracle::{ActiveLearningConfig, AnnotationSet, LogisticModel, OracleSession, QueryStrategy};
pub use pipeline::{analyze, AnalysisConfig, InstanceSpaceModel, PipelineError};
pub use projection::Projection;
pub use report::TisaReport;
