//! Reading networks and covariates, writing embeddings and reports.

pub mod covariates;
pub mod edgelist;
pub mod output;

pub use covariates::{load_column, load_covariates, Bindings, CovariateTable};
pub use edgelist::{load_edgelist, EdgeListOptions, Symmetrize};
pub use output::{emit_report, write_atomic, write_singular_values, Format, PositionTable, Report, SensitivityReport};
