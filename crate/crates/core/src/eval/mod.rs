//! Baseline runs for head-to-head comparison and tabulation of human
//! annotations.

pub mod annotations;
pub mod baselines;
pub mod tabulate;

pub use annotations::{parse_annotations, read_annotations, AnnotationRecord, Method, Metric, Mode, Outcome};
pub use baselines::{run_baseline, BaselineKind, BaselineNode};
pub use tabulate::{sums_to_hundred, tabulate_scale, tabulate_win_tie_loss, Percent, Report, ScaleSummary, WinTieLoss};
