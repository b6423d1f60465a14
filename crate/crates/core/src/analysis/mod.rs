//! Bug-based campaign metrics over replay outcomes.

pub mod consistency;
pub mod dedup;
pub mod intersections;
pub mod report;
pub mod summary;
pub mod survival;
pub mod validate;

pub use consistency::consistency;
pub use dedup::{dedup_compare, DedupRow, Heuristic};
pub use intersections::{intersections, IntersectionGroup};
pub use report::{analyze, write_report, CampaignReport, SCHEMA};
pub use summary::{summarize_trial, TrialSummary};
pub use survival::{format_hhmm, format_median, kaplan_meier, SurvivalCurve};
pub use validate::{validate_ravens, ValidationReport};
