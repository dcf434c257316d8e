use thiserror::Error;

use crate::model::TemplateId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors from the layout, placement, routing and coverage code paths.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no placed elements")]
    EmptyLayout,
    #[error("degenerate bounding box {width}x{height}")]
    DegenerateBox { width: i64, height: i64 },
    #[error("pin of {owner} falls off the grid at ({x}, {y})")]
    PinOffGrid { owner: String, x: i64, y: i64 },
    #[error("{0} is not placed")]
    Unplaced(String),
    #[error("unknown template id {0}")]
    UnknownTemplate(TemplateId),
    #[error("invalid template {id}: {reason}")]
    InvalidTemplate { id: TemplateId, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no initial layout: every row-column candidate is infeasible or violates the aspect limit")]
    NoInitialLayout,
    #[error("floorplan failure: no placement attempt could be routed")]
    FloorplanFailure,
    #[error("coverage stuck with {pending} scenarios pending")]
    CoverageStuck { pending: usize },
}
