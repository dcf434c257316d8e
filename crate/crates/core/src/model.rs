//! Templates, placed layouts and the utilization metrics computed from them.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{cells_bbox, Cell, Rect, Side};

pub type TemplateId = u32;
pub type SiteId = u32;

/// The single port segment on one side of a footprint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortSpec {
    pub side: Side,
    /// Tracks from the side origin (left end for north/south, bottom end for east/west).
    pub offset: i64,
    pub length: i64,
}

impl PortSpec {
    pub const fn new(side: Side, offset: i64, length: i64) -> Self {
        PortSpec { side, offset, length }
    }

    /// A port of `length` tracks centered on `side` of a `width x height` footprint.
    pub fn centered(side: Side, width: i64, height: i64, length: i64) -> Self {
        let side_len = if side.is_horizontal_edge() { width } else { height };
        let length = length.min(side_len).max(1);
        PortSpec::new(side, (side_len - length) / 2, length)
    }

    pub fn validate(&self, width: i64, height: i64) -> std::result::Result<(), String> {
        let side_len = if self.side.is_horizontal_edge() { width } else { height };
        if self.length < 1 {
            return Err(format!("port length {} must be at least 1", self.length));
        }
        if self.offset < 0 {
            return Err(format!("port offset {} is negative", self.offset));
        }
        if self.offset + self.length > side_len {
            return Err(format!(
                "port offset {} + length {} exceeds {} side of {} tracks",
                self.offset, self.length, self.side, side_len
            ));
        }
        Ok(())
    }

    /// Index along the side of the cell at the port midpoint (floor for even lengths).
    pub fn midpoint(&self) -> i64 {
        self.offset + self.length / 2
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    pub id: TemplateId,
    pub width: i64,
    pub height: i64,
    pub port: PortSpec,
}

impl Template {
    pub fn new(id: TemplateId, width: i64, height: i64, port: PortSpec) -> Result<Self> {
        let t = Template { id, width, height, port };
        t.validate()?;
        Ok(t)
    }

    /// Template with a two-track port centered on its north side.
    pub fn with_north_port(id: TemplateId, width: i64, height: i64) -> Result<Self> {
        Template::new(id, width, height, PortSpec::centered(Side::North, width, height, 2))
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 1 || self.height < 1 {
            return Err(Error::InvalidTemplate {
                id: self.id,
                reason: format!("dimensions {}x{} must be positive", self.width, self.height),
            });
        }
        self.port
            .validate(self.width, self.height)
            .map_err(|reason| Error::InvalidTemplate { id: self.id, reason })
    }

    pub fn area(&self) -> i64 {
        self.width * self.height
    }
}

/// An ordered set of templates with unique ids.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemplateLibrary {
    templates: Vec<Template>,
}

impl TemplateLibrary {
    pub fn new(templates: Vec<Template>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for t in &templates {
            t.validate()?;
            if !seen.insert(t.id) {
                return Err(Error::InvalidTemplate { id: t.id, reason: "duplicate id".into() });
            }
        }
        Ok(TemplateLibrary { templates })
    }

    /// The five production footprints (92x92, 185x185, 185x138, 462x462,
    /// 1574x1037 tracks), each with a centered two-track north port.
    pub fn reference() -> Self {
        let dims = [(92, 92), (185, 185), (185, 138), (462, 462), (1574, 1037)];
        let templates = dims
            .iter()
            .enumerate()
            .map(|(i, &(w, h))| Template::with_north_port(i as TemplateId, w, h).expect("valid reference template"))
            .collect();
        TemplateLibrary { templates }
    }

    pub fn get(&self, id: TemplateId) -> Result<&Template> {
        self.templates.iter().find(|t| t.id == id).ok_or(Error::UnknownTemplate(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Template> {
        self.templates.iter()
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn mean_area(&self) -> f64 {
        if self.templates.is_empty() {
            return 0.0;
        }
        self.templates.iter().map(|t| t.area() as f64).sum::<f64>() / self.templates.len() as f64
    }

    /// The first `n` templates, in library order.
    pub fn prefix(&self, n: usize) -> TemplateLibrary {
        TemplateLibrary { templates: self.templates.iter().take(n).cloned().collect() }
    }
}

/// One chip site. Its id doubles as its interconnect address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteInstance {
    pub id: SiteId,
    pub template_id: TemplateId,
    pub position: Option<Cell>,
}

impl SiteInstance {
    pub fn new(id: SiteId, template_id: TemplateId) -> Self {
        SiteInstance { id, template_id, position: None }
    }
}

/// Footprint and port of the global controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    pub width: i64,
    pub height: i64,
    pub port: PortSpec,
}

impl Default for ControllerSpec {
    fn default() -> Self {
        ControllerSpec { width: 92, height: 92, port: PortSpec::new(Side::North, 45, 2) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Normalized track width; always 1.
    pub track_width: f64,
    /// Empty tracks kept between routed paths.
    pub spacing: i64,
    pub margin_x: i64,
    pub margin_y: i64,
    pub max_aspect: f64,
    pub outer_bound: Option<(i64, i64)>,
    pub controller: ControllerSpec,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            track_width: 1.0,
            spacing: 1,
            margin_x: 0,
            margin_y: 0,
            max_aspect: DEFAULT_MAX_ASPECT,
            outer_bound: None,
            controller: ControllerSpec::default(),
        }
    }
}

/// Default limit on bounding-box aspect ratio.
pub const DEFAULT_MAX_ASPECT: f64 = 2.0;

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.track_width != 1.0 {
            return bad(format!("track_width is normalized to 1, got {}", self.track_width));
        }
        if self.spacing < 0 || self.margin_x < 0 || self.margin_y < 0 {
            return bad("spacing and margins must be non-negative".into());
        }
        if !(self.max_aspect >= 1.0) {
            return bad(format!("max_aspect must be >= 1, got {}", self.max_aspect));
        }
        if let Some((w, h)) = self.outer_bound {
            if w < 1 || h < 1 {
                return bad(format!("outer_bound {w}x{h} must be positive"));
            }
        }
        let c = &self.controller;
        if c.width < 1 || c.height < 1 {
            return bad("controller dimensions must be positive".into());
        }
        c.port.validate(c.width, c.height).map_err(|r| Error::InvalidParameter(format!("controller port: {r}")))
    }

    /// Tracks kept free in front of a port: a lane in, `spacing`, and a lane out.
    pub fn port_clearance(&self) -> i64 {
        2 * self.spacing + 1
    }

    /// Extra clearance (left, right, bottom, top) a block keeps around its body.
    pub fn clearance(&self, port: &PortSpec) -> (i64, i64, i64, i64) {
        let s = self.port_clearance();
        let side = |want: Side| if port.side == want { s } else { 0 };
        (
            self.margin_x + side(Side::West),
            self.margin_x + side(Side::East),
            self.margin_y + side(Side::South),
            self.margin_y + side(Side::North),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockId {
    Controller,
    Site(SiteId),
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockId::Controller => f.write_str("controller"),
            BlockId::Site(id) => write!(f, "site {id}"),
        }
    }
}

/// A site or the controller at a fixed grid position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacedBlock {
    pub id: BlockId,
    pub template_id: Option<TemplateId>,
    pub rect: Rect,
    pub port: PortSpec,
}

impl PlacedBlock {
    pub fn site(site: SiteId, template: &Template, origin: Cell) -> Self {
        PlacedBlock {
            id: BlockId::Site(site),
            template_id: Some(template.id),
            rect: Rect::new(origin.x, origin.y, template.width, template.height),
            port: template.port,
        }
    }

    pub fn controller(spec: &ControllerSpec, origin: Cell) -> Self {
        PlacedBlock {
            id: BlockId::Controller,
            template_id: None,
            rect: Rect::new(origin.x, origin.y, spec.width, spec.height),
            port: spec.port,
        }
    }

    /// Cell just outside the port midpoint. Errors if that cell has a
    /// negative coordinate (off the grid).
    pub fn pin_cell(&self) -> Result<Cell> {
        let r = &self.rect;
        let m = self.port.midpoint();
        let cell = match self.port.side {
            Side::North => Cell::new(r.x + m, r.y1()),
            Side::South => Cell::new(r.x + m, r.y - 1),
            Side::East => Cell::new(r.x1(), r.y + m),
            Side::West => Cell::new(r.x - 1, r.y + m),
        };
        if cell.x < 0 || cell.y < 0 {
            return Err(Error::PinOffGrid { owner: self.id.to_string(), x: cell.x, y: cell.y });
        }
        Ok(cell)
    }

    /// Body plus margins and port-side clearance.
    pub fn envelope(&self, grid: &GridConfig) -> Rect {
        let (l, r, b, t) = grid.clearance(&self.port);
        self.rect.expand(l, r, b, t)
    }

    pub fn translate(&self, dx: i64, dy: i64) -> PlacedBlock {
        PlacedBlock { rect: self.rect.translate(dx, dy), ..*self }
    }
}

/// One end of a routed path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pin {
    pub cell: Cell,
    pub owner: Option<BlockId>,
}

/// A one-track-wide path of 4-connected cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutePath {
    pub cells: Vec<Cell>,
    pub endpoints: (Pin, Pin),
}

impl RoutePath {
    /// Number of moves (cells minus one).
    pub fn steps(&self) -> usize {
        self.cells.len().saturating_sub(1)
    }

    pub fn is_connected(&self) -> bool {
        self.cells.windows(2).all(|w| w[0].manhattan(w[1]) == 1)
    }

    pub fn translate(&self, dx: i64, dy: i64) -> RoutePath {
        let shift = |p: Pin| Pin { cell: p.cell.translate(dx, dy), ..p };
        RoutePath {
            cells: self.cells.iter().map(|c| c.translate(dx, dy)).collect(),
            endpoints: (shift(self.endpoints.0), shift(self.endpoints.1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub sites: Vec<PlacedBlock>,
    pub controller: Option<PlacedBlock>,
    pub routes: Vec<RoutePath>,
    pub grid: GridConfig,
}

impl Layout {
    pub fn new(grid: GridConfig) -> Self {
        Layout { sites: Vec::new(), controller: None, routes: Vec::new(), grid }
    }

    /// Controller first, then sites in stored order.
    pub fn blocks(&self) -> impl Iterator<Item = &PlacedBlock> {
        self.controller.iter().chain(self.sites.iter())
    }

    pub fn block(&self, id: BlockId) -> Option<&PlacedBlock> {
        self.blocks().find(|b| b.id == id)
    }

    /// Area of every placed block, the controller included.
    pub fn chip_site_area(&self) -> i64 {
        self.blocks().map(|b| b.rect.area()).sum()
    }

    /// Distinct cells used by routes. Shared junction pins count once.
    pub fn route_cells(&self) -> BTreeSet<Cell> {
        self.routes.iter().flat_map(|r| r.cells.iter().copied()).collect()
    }

    pub fn translate(&self, dx: i64, dy: i64) -> Layout {
        Layout {
            sites: self.sites.iter().map(|s| s.translate(dx, dy)).collect(),
            controller: self.controller.map(|c| c.translate(dx, dy)),
            routes: self.routes.iter().map(|r| r.translate(dx, dy)).collect(),
            grid: self.grid.clone(),
        }
    }

    /// Shift so the bounding box lower-left sits at the origin.
    pub fn normalized(&self) -> Result<Layout> {
        let bb = compute_bounding_box(self)?;
        Ok(self.translate(-bb.x, -bb.y))
    }

    /// Bounding box of block envelopes and route cells, the area the
    /// placement cost works on.
    pub fn expanded_bbox(&self) -> Result<Rect> {
        let mut bb = Rect::new(0, 0, 0, 0);
        for b in self.blocks() {
            bb = bb.union(&b.envelope(&self.grid));
        }
        if let Some(r) = cells_bbox(self.routes.iter().flat_map(|r| r.cells.iter())) {
            bb = bb.union(&r);
        }
        if bb.is_empty() {
            return Err(Error::EmptyLayout);
        }
        Ok(bb)
    }
}

/// Smallest rectangle enclosing every placed site, the controller and all route cells.
pub fn compute_bounding_box(layout: &Layout) -> Result<Rect> {
    let mut bb = Rect::new(0, 0, 0, 0);
    for b in layout.blocks() {
        bb = bb.union(&b.rect);
    }
    if let Some(r) = cells_bbox(layout.routes.iter().flat_map(|r| r.cells.iter())) {
        bb = bb.union(&r);
    }
    if bb.is_empty() {
        return Err(Error::EmptyLayout);
    }
    Ok(bb)
}

/// Round to two decimals, half away from zero.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Utilization metrics in squared track units; percentages rounded to two decimals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub solver_time_s: f64,
    pub chip_site_area: f64,
    pub track_area: f64,
    pub bbox_area: f64,
    pub chip_plus_track_area: f64,
    pub util_pct: f64,
    pub track_pct: f64,
}

impl Metrics {
    pub fn from_areas(chip_site_area: f64, track_area: f64, bbox_area: f64, solver_time_s: f64) -> Result<Self> {
        if !(bbox_area > 0.0) {
            return Err(Error::DegenerateBox { width: 0, height: 0 });
        }
        let chip_plus_track_area = chip_site_area + track_area;
        Ok(Metrics {
            solver_time_s,
            chip_site_area,
            track_area,
            bbox_area,
            chip_plus_track_area,
            util_pct: round2(100.0 * chip_plus_track_area / bbox_area),
            track_pct: round2(100.0 * track_area / bbox_area),
        })
    }
}

pub fn compute_metrics(layout: &Layout, solver_time_s: f64) -> Result<Metrics> {
    let bb = compute_bounding_box(layout)?;
    if bb.area() == 0 {
        return Err(Error::DegenerateBox { width: bb.w, height: bb.h });
    }
    Metrics::from_areas(
        layout.chip_site_area() as f64,
        layout.route_cells().len() as f64,
        bb.area() as f64,
        solver_time_s,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn site(id: SiteId, x: i64, y: i64, w: i64, h: i64, side: Side) -> PlacedBlock {
        let t = Template::new(0, w, h, PortSpec::new(side, 4, 2)).unwrap();
        PlacedBlock::site(id, &t, Cell::new(x, y))
    }

    fn layout_of(sites: Vec<PlacedBlock>) -> Layout {
        Layout { sites, ..Layout::new(GridConfig::default()) }
    }

    #[test]
    fn bbox_single_site() {
        let l = layout_of(vec![site(0, 0, 0, 92, 92, Side::North)]);
        assert_eq!(compute_bounding_box(&l).unwrap(), Rect::new(0, 0, 92, 92));
    }

    #[test]
    fn bbox_two_sites() {
        let l = layout_of(vec![site(0, 0, 0, 10, 10, Side::North), site(1, 20, 0, 10, 10, Side::North)]);
        let bb = compute_bounding_box(&l).unwrap();
        assert_eq!(bb, Rect::new(0, 0, 30, 10));
        assert_eq!(bb.area(), 300);
    }

    #[test]
    fn bbox_empty_layout_errors() {
        assert_eq!(compute_bounding_box(&layout_of(vec![])), Err(Error::EmptyLayout));
    }

    #[test]
    fn bbox_includes_routes() {
        let mut l = layout_of(vec![site(0, 0, 0, 10, 10, Side::North)]);
        let cells = vec![Cell::new(5, 10), Cell::new(5, 11), Cell::new(5, 12)];
        let pin = |c| Pin { cell: c, owner: None };
        l.routes.push(RoutePath { endpoints: (pin(cells[0]), pin(cells[2])), cells });
        assert_eq!(compute_bounding_box(&l).unwrap(), Rect::new(0, 0, 10, 13));
    }

    #[test]
    fn p1_reference_metrics() {
        let m = Metrics::from_areas(50784.0, 470.0, 51985.0, 75.41).unwrap();
        assert_eq!(m.chip_plus_track_area, 51254.0);
        assert_eq!(m.util_pct, 98.59);
        assert_eq!(m.track_pct, 0.90);
    }

    #[test]
    fn p22_reference_metrics() {
        let m = Metrics::from_areas(932147.0, 21198.0, 1175134.0, 0.0).unwrap();
        assert_eq!(m.util_pct, 81.13);
        assert_eq!(m.track_pct, 1.80);
    }

    #[test]
    fn full_utilization() {
        let m = Metrics::from_areas(100.0, 0.0, 100.0, 0.0).unwrap();
        assert_eq!((m.util_pct, m.track_pct), (100.0, 0.0));
    }

    #[test]
    fn zero_bbox_is_an_error() {
        assert!(Metrics::from_areas(1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn pin_north_midpoint() {
        let s = site(0, 0, 0, 10, 10, Side::North);
        assert_eq!(s.pin_cell().unwrap(), Cell::new(5, 10));
    }

    #[test]
    fn pin_south_off_grid() {
        let s = site(0, 0, 0, 10, 10, Side::South);
        assert!(matches!(s.pin_cell(), Err(Error::PinOffGrid { y: -1, .. })));
    }

    #[test]
    fn pin_east_and_west() {
        assert_eq!(site(0, 3, 2, 10, 10, Side::East).pin_cell().unwrap(), Cell::new(13, 7));
        assert_eq!(site(0, 3, 2, 10, 10, Side::West).pin_cell().unwrap(), Cell::new(2, 7));
    }

    #[test]
    fn pin_is_translation_equivariant() {
        for side in Side::ALL {
            let a = site(0, 20, 20, 10, 10, side);
            let b = a.translate(7, -3);
            let (pa, pb) = (a.pin_cell().unwrap(), b.pin_cell().unwrap());
            assert_eq!(pb, pa.translate(7, -3));
        }
    }

    #[test]
    fn odd_length_port_midpoint() {
        let t = Template::new(0, 10, 10, PortSpec::new(Side::North, 4, 3)).unwrap();
        assert_eq!(PlacedBlock::site(0, &t, Cell::new(0, 0)).pin_cell().unwrap(), Cell::new(5, 10));
    }

    #[test]
    fn port_must_fit_its_side() {
        assert!(Template::new(0, 10, 10, PortSpec::new(Side::North, 9, 2)).is_err());
        assert!(Template::new(0, 10, 10, PortSpec::new(Side::North, 0, 0)).is_err());
        assert!(Template::new(0, 0, 10, PortSpec::new(Side::North, 0, 1)).is_err());
    }

    #[test]
    fn reference_library_dimensions() {
        let lib = TemplateLibrary::reference();
        let dims: Vec<_> = lib.iter().map(|t| (t.width, t.height)).collect();
        assert_eq!(dims, vec![(92, 92), (185, 185), (185, 138), (462, 462), (1574, 1037)]);
    }

    #[test]
    fn envelope_adds_port_clearance() {
        let grid = GridConfig { spacing: 2, margin_x: 1, ..GridConfig::default() };
        let s = site(0, 10, 10, 10, 10, Side::North);
        assert_eq!(s.envelope(&grid), Rect::new(9, 10, 12, 15));
    }
}
