//! Grid-aligned chip-site floorplanning.
//!
//! Sites built from a small library of templates are packed onto a track
//! grid ([`placement`]), daisy-chained to a global controller with A*
//! ([`routing`]), and scored with the utilization metrics in [`model`].
//! [`drc`] builds one layout that exhibits every abutment scenario a
//! template library can produce, and [`interconnect`] models the
//! single-master open-chain network that fits in the leftover tracks.

pub mod config;
pub mod drc;
pub mod error;
pub mod floorplan;
pub mod geom;
pub mod interconnect;
pub mod model;
pub mod placement;
pub mod routing;
pub mod svg;

pub use error::{Error, Result};
pub use geom::{overlaps, Cell, Rect, Side};
pub use model::{
    compute_bounding_box, compute_metrics, BlockId, ControllerSpec, GridConfig, Layout, Metrics, PlacedBlock,
    PortSpec, RoutePath, SiteInstance, Template, TemplateLibrary,
};
