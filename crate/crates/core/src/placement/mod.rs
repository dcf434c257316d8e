//! Skyline packing refined by simulated annealing over the placement order.
//!
//! Every block reserves an envelope: its body plus the configured margins
//! plus a port lane on its port side (a lane in, `spacing` tracks, a lane
//! out), so a route can always reach the pin and leave again. Envelopes are packed onto a skyline of fixed strip width; the
//! annealer only reorders blocks and re-packs, it never moves them directly.

mod skyline;

pub use skyline::{Segment, Skyline};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Cell, Rect};
use crate::model::{
    BlockId, ControllerSpec, GridConfig, Layout, PlacedBlock, PortSpec, SiteInstance, TemplateId,
    TemplateLibrary,
};

/// A block waiting to be placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackItem {
    pub id: BlockId,
    pub template_id: Option<TemplateId>,
    pub width: i64,
    pub height: i64,
    pub port: PortSpec,
}

impl PackItem {
    pub fn site(site: &SiteInstance, library: &TemplateLibrary) -> Result<Self> {
        let t = library.get(site.template_id)?;
        Ok(PackItem {
            id: BlockId::Site(site.id),
            template_id: Some(t.id),
            width: t.width,
            height: t.height,
            port: t.port,
        })
    }

    pub fn controller(spec: &ControllerSpec) -> Self {
        PackItem { id: BlockId::Controller, template_id: None, width: spec.width, height: spec.height, port: spec.port }
    }

    pub fn area(&self) -> i64 {
        self.width * self.height
    }

    pub fn envelope_size(&self, grid: &GridConfig) -> (i64, i64) {
        let (l, r, b, t) = grid.clearance(&self.port);
        (self.width + l + r, self.height + b + t)
    }

    fn placed_at(&self, origin: Cell) -> PlacedBlock {
        PlacedBlock {
            id: self.id,
            template_id: self.template_id,
            rect: Rect::new(origin.x, origin.y, self.width, self.height),
            port: self.port,
        }
    }
}

/// Pack items for every site plus the controller (appended last).
pub fn pack_items(sites: &[SiteInstance], library: &TemplateLibrary, grid: &GridConfig) -> Result<Vec<PackItem>> {
    let mut items = sites.iter().map(|s| PackItem::site(s, library)).collect::<Result<Vec<_>>>()?;
    items.push(PackItem::controller(&grid.controller));
    Ok(items)
}

/// Sort by descending area; ties keep the controller last and sites by id.
pub fn sort_largest_first(items: &mut [PackItem]) {
    let is_ctrl = |i: &PackItem| i.id == BlockId::Controller;
    items.sort_by(|a, b| {
        b.area()
            .cmp(&a.area())
            .then_with(|| is_ctrl(a).cmp(&is_ctrl(b)))
            .then(a.id.cmp(&b.id))
    });
}

/// Skyline packer that also exposes its profile between placements.
#[derive(Debug, Clone)]
pub struct SkylinePacker<'g> {
    grid: &'g GridConfig,
    skyline: Skyline,
    layout: Layout,
}

impl<'g> SkylinePacker<'g> {
    pub fn new(grid: &'g GridConfig, strip_width: i64) -> Self {
        SkylinePacker { grid, skyline: Skyline::new(strip_width), layout: Layout::new(grid.clone()) }
    }

    pub fn skyline(&self) -> &Skyline {
        &self.skyline
    }

    /// Place one item at its lowest feasible position; `None` if it does not fit.
    pub fn place(&mut self, item: &PackItem) -> Option<PlacedBlock> {
        let (ew, eh) = item.envelope_size(self.grid);
        let limit = self.grid.outer_bound.map(|(_, h)| h);
        let (x, y) = self.skyline.find_position(ew, eh, limit)?;
        self.skyline.raise(x, ew, y + eh);
        let (l, _, b, _) = self.grid.clearance(&item.port);
        let block = item.placed_at(Cell::new(x + l, y + b));
        match block.id {
            BlockId::Controller => self.layout.controller = Some(block),
            BlockId::Site(_) => self.layout.sites.push(block),
        }
        Some(block)
    }

    pub fn into_layout(self) -> Layout {
        self.layout
    }
}

/// Place `order` sequentially on a strip of `strip_width` tracks.
/// Returns `None` if any block has no feasible position.
pub fn place_with_skyline(order: &[PackItem], grid: &GridConfig, strip_width: i64) -> Option<Layout> {
    if strip_width <= 0 {
        return None;
    }
    let mut packer = SkylinePacker::new(grid, strip_width);
    for item in order {
        packer.place(item)?;
    }
    Some(packer.into_layout())
}

/// Whether every pin can be reached from outside the layout without crossing
/// a block body. Packing can close a port strip off on all four sides; such
/// a layout can never be routed.
///
/// Flood fill over the grid compressed at block edges, so the cost depends
/// on the block count only.
pub fn ports_open(layout: &Layout) -> bool {
    let mut pins = Vec::new();
    for b in layout.blocks() {
        match b.pin_cell() {
            Ok(c) => pins.push(c),
            Err(_) => return false,
        }
    }
    let rects: Vec<Rect> = layout.blocks().map(|b| b.rect).collect();
    let Some(bb) = rects.iter().copied().reduce(|a, b| a.union(&b)) else { return true };
    let outer = bb.grow(1);
    let mut xs: Vec<i64> = rects.iter().flat_map(|r| [r.x, r.x1()]).chain([outer.x, outer.x1()]).collect();
    let mut ys: Vec<i64> = rects.iter().flat_map(|r| [r.y, r.y1()]).chain([outer.y, outer.y1()]).collect();
    for v in [&mut xs, &mut ys] {
        v.sort_unstable();
        v.dedup();
    }
    let (nx, ny) = (xs.len() - 1, ys.len() - 1);
    let blocked: Vec<bool> = (0..nx * ny)
        .map(|k| {
            let probe = Cell::new(xs[k % nx], ys[k / nx]);
            rects.iter().any(|r| r.contains(probe))
        })
        .collect();
    let mut seen = vec![false; nx * ny];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(k) = stack.pop() {
        let (i, j) = (k % nx, k / nx);
        let mut push = |i: usize, j: usize| {
            let n = j * nx + i;
            if !seen[n] && !blocked[n] {
                seen[n] = true;
                stack.push(n);
            }
        };
        if i > 0 {
            push(i - 1, j);
        }
        if i + 1 < nx {
            push(i + 1, j);
        }
        if j > 0 {
            push(i, j - 1);
        }
        if j + 1 < ny {
            push(i, j + 1);
        }
    }
    let slot = |v: &[i64], x: i64| v.partition_point(|&e| e <= x).checked_sub(1);
    pins.iter().all(|p| match (slot(&xs, p.x), slot(&ys, p.y)) {
        (Some(i), Some(j)) if i < nx && j < ny => seen[j * nx + i],
        _ => false,
    })
}

/// A packed layout together with the order and strip width that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub layout: Layout,
    pub order: Vec<PackItem>,
    pub strip_width: i64,
}

/// Strip widths for the row-column configurations tried by [`skyline_candidates`].
///
/// For `k` columns: `k` times the mean site envelope width, and the summed
/// envelope widths of the first `k` sites in order; each with and without
/// room for the controller beside the row.
pub fn candidate_widths(order: &[PackItem], grid: &GridConfig) -> Vec<i64> {
    let site_w: Vec<i64> = order
        .iter()
        .filter(|i| matches!(i.id, BlockId::Site(_)))
        .map(|i| i.envelope_size(grid).0)
        .collect();
    let all_w: Vec<i64> = order.iter().map(|i| i.envelope_size(grid).0).collect();
    let widths_for_pitch = if site_w.is_empty() { &all_w } else { &site_w };
    let max_w = all_w.iter().copied().max().unwrap_or(1);
    let ctrl_w = order
        .iter()
        .find(|i| i.id == BlockId::Controller)
        .map(|i| i.envelope_size(grid).0)
        .unwrap_or(0);
    let pitch = widths_for_pitch.iter().sum::<i64>() as f64 / widths_for_pitch.len().max(1) as f64;

    let mut out = Vec::new();
    let mut prefix = 0;
    for k in 1..=widths_for_pitch.len() {
        prefix += widths_for_pitch[k - 1];
        let avg = (k as f64 * pitch).ceil() as i64;
        for base in [avg, prefix] {
            out.push(base);
            if ctrl_w > 0 {
                out.push(base + ctrl_w);
            }
        }
    }
    for w in out.iter_mut() {
        *w = (*w).max(max_w);
    }
    if let Some((bound_w, _)) = grid.outer_bound {
        out.retain(|&w| w <= bound_w);
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Initial layout: pack `order` at every candidate width, drop layouts whose
/// aspect ratio exceeds `grid.max_aspect`, keep the smallest area.
pub fn skyline_candidates(order: &[PackItem], grid: &GridConfig) -> Result<Placement> {
    if order.is_empty() {
        return Err(Error::InvalidParameter("nothing to place".into()));
    }
    let mut best: Option<(i64, f64, Placement)> = None;
    for width in candidate_widths(order, grid) {
        let Some(layout) = place_with_skyline(order, grid, width).filter(ports_open) else { continue };
        let bb = layout.expanded_bbox()?;
        let aspect = bb.aspect();
        if aspect > grid.max_aspect {
            continue;
        }
        let better = match &best {
            None => true,
            Some((a, r, _)) => (bb.area(), aspect) < (*a, *r),
        };
        if better {
            best = Some((bb.area(), aspect, Placement { layout, order: order.to_vec(), strip_width: width }));
        }
    }
    best.map(|(_, _, p)| p).ok_or(Error::NoInitialLayout)
}

/// Weights of the placement cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub density_weight: f64,
    pub aspect_weight: f64,
    pub max_aspect: f64,
}

impl CostParams {
    /// `w_d = 0.1 * mean block area`, `w_ar = mean block area`, `R_max` from the grid.
    pub fn defaults_for(items: &[PackItem], grid: &GridConfig) -> Self {
        let sites: Vec<_> = items.iter().filter(|i| matches!(i.id, BlockId::Site(_))).collect();
        let mean = if sites.is_empty() {
            0.0
        } else {
            sites.iter().map(|i| i.area() as f64).sum::<f64>() / sites.len() as f64
        };
        CostParams { density_weight: 0.1 * mean, aspect_weight: mean, max_aspect: grid.max_aspect }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.density_weight >= 0.0) || !(self.aspect_weight >= 0.0) || !(self.max_aspect >= 1.0) {
            return Err(Error::InvalidParameter(format!("cost parameters out of range: {self:?}")));
        }
        Ok(())
    }
}

/// `A + w_d (1 - rho) + w_ar max(0, max(Bw,Bh)/min(Bw,Bh) - R_max)` over the
/// expanded bounding box, with `rho` the summed block area over `A`.
pub fn compute_cost(layout: &Layout, p: &CostParams) -> Result<f64> {
    let bb = layout.expanded_bbox()?;
    if bb.w <= 0 || bb.h <= 0 {
        return Err(Error::DegenerateBox { width: bb.w, height: bb.h });
    }
    let area = bb.area() as f64;
    let block_area: i64 = layout.blocks().map(|b| b.rect.area()).sum();
    let density = block_area as f64 / area;
    let (bw, bh) = (bb.w as f64, bb.h as f64);
    let aspect_excess = (bw.max(bh) / bw.min(bh) - p.max_aspect).max(0.0);
    Ok(area + p.density_weight * (1.0 - density) + p.aspect_weight * aspect_excess)
}

/// Copy of `order` with two distinct positions swapped uniformly at random.
/// With `keep_first`, position 0 never moves. Too-short inputs come back unchanged.
pub fn perturb<T: Clone, R: Rng + ?Sized>(order: &[T], keep_first: bool, rng: &mut R) -> Vec<T> {
    let mut out = order.to_vec();
    let lo = usize::from(keep_first);
    let n = out.len();
    if n < lo + 2 {
        return out;
    }
    let i = rng.gen_range(lo..n);
    let mut j = rng.gen_range(lo..n - 1);
    if j >= i {
        j += 1;
    }
    out.swap(i, j);
    out
}

/// Metropolis acceptance: always for `delta < 0`, else with probability `exp(-delta / temp)`.
pub fn accept<R: Rng + ?Sized>(delta: f64, temp: f64, rng: &mut R) -> bool {
    delta < 0.0 || rng.gen::<f64>() < (-delta / temp).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealParams {
    pub iterations: usize,
    /// `None` means 10% of the initial layout cost.
    pub initial_temp: Option<f64>,
    pub cooling: f64,
    pub seed: u64,
    /// Pin the first block of the order (the largest, after sorting).
    pub keep_largest_first: bool,
}

impl Default for AnnealParams {
    fn default() -> Self {
        AnnealParams { iterations: 2000, initial_temp: None, cooling: 0.95, seed: 0, keep_largest_first: true }
    }
}

impl AnnealParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::InvalidParameter(format!("cooling {} must lie in (0, 1)", self.cooling)));
        }
        if let Some(t) = self.initial_temp {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter(format!("initial temperature {t} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AnnealResult {
    pub initial: Placement,
    pub initial_cost: f64,
    pub best: Placement,
    pub best_cost: f64,
    /// Best cost after each iteration, infeasible ones included.
    pub best_trace: Vec<f64>,
    pub evaluated: usize,
    pub accepted: usize,
}

/// Simulated annealing over the placement order.
pub fn anneal(order: &[PackItem], grid: &GridConfig, ap: &AnnealParams, cp: &CostParams) -> Result<AnnealResult> {
    ap.validate()?;
    cp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(ap.seed);
    let initial = skyline_candidates(order, grid)?;
    let initial_cost = compute_cost(&initial.layout, cp)?;
    let width = initial.strip_width;

    let mut order = initial.order.clone();
    let mut cost = initial_cost;
    let mut best = initial.clone();
    let mut best_cost = initial_cost;
    let mut temp = ap.initial_temp.unwrap_or(0.1 * initial_cost);
    let mut best_trace = Vec::with_capacity(ap.iterations);
    let (mut evaluated, mut accepted) = (0, 0);

    for _ in 0..ap.iterations {
        let next = perturb(&order, ap.keep_largest_first, &mut rng);
        let Some(candidate) = place_with_skyline(&next, grid, width).filter(ports_open) else {
            best_trace.push(best_cost);
            continue;
        };
        evaluated += 1;
        let candidate_cost = compute_cost(&candidate, cp)?;
        if accept(candidate_cost - cost, temp, &mut rng) {
            accepted += 1;
            order = next;
            cost = candidate_cost;
            if cost < best_cost {
                best_cost = cost;
                best = Placement { layout: candidate, order: order.clone(), strip_width: width };
            }
        }
        temp *= ap.cooling;
        best_trace.push(best_cost);
    }

    Ok(AnnealResult { initial, initial_cost, best, best_cost, best_trace, evaluated, accepted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Side;
    use crate::model::{Pin, RoutePath, Template};

    fn flat_grid() -> GridConfig {
        GridConfig { spacing: 0, ..GridConfig::default() }
    }

    /// Envelope is `size x size` under `flat_grid`: one track of port lane on top.
    fn square(id: u32, size: i64) -> PackItem {
        PackItem {
            id: BlockId::Site(id),
            template_id: Some(0),
            width: size,
            height: size - 1,
            port: PortSpec::new(Side::North, 0, 1),
        }
    }

    #[test]
    fn single_block_at_origin() {
        let grid = flat_grid();
        let mut packer = SkylinePacker::new(&grid, 10);
        let b = packer.place(&square(0, 10)).unwrap();
        assert_eq!(b.rect, Rect::new(0, 0, 10, 9));
        assert_eq!(packer.skyline().segments(), &[Segment { x0: 0, x1: 10, height: 10 }]);
    }

    #[test]
    fn two_blocks_fill_a_row() {
        let grid = flat_grid();
        let l = place_with_skyline(&[square(0, 10), square(1, 10)], &grid, 20).unwrap();
        assert_eq!(l.sites[1].rect.lower_left(), Cell::new(10, 0));
        let mut packer = SkylinePacker::new(&grid, 20);
        packer.place(&square(0, 10));
        packer.place(&square(1, 10));
        assert_eq!(packer.skyline().segments(), &[Segment { x0: 0, x1: 20, height: 10 }]);
    }

    #[test]
    fn port_clearance_is_reserved() {
        let grid = GridConfig { spacing: 2, ..GridConfig::default() };
        let l = place_with_skyline(&[square(0, 10), square(1, 10)], &grid, 10).unwrap();
        // lane in, two spacing tracks, lane out
        assert_eq!(l.sites[1].rect.lower_left(), Cell::new(0, 14));
    }

    #[test]
    fn infeasible_when_wider_than_strip() {
        assert!(place_with_skyline(&[square(0, 11)], &flat_grid(), 10).is_none());
    }

    #[test]
    fn four_squares_pick_two_by_two() {
        let grid = GridConfig { max_aspect: 1.5, ..flat_grid() };
        let order: Vec<_> = (0..4).map(|i| square(i, 10)).collect();
        let p = skyline_candidates(&order, &grid).unwrap();
        assert_eq!(p.layout.expanded_bbox().unwrap(), Rect::new(0, 0, 20, 20));
    }

    #[test]
    fn nine_squares_pick_three_by_three() {
        let grid = GridConfig { max_aspect: 2.0, ..flat_grid() };
        let order: Vec<_> = (0..9).map(|i| square(i, 10)).collect();
        let p = skyline_candidates(&order, &grid).unwrap();
        assert_eq!(p.layout.expanded_bbox().unwrap(), Rect::new(0, 0, 30, 30));
    }

    #[test]
    fn single_item_candidate() {
        let p = skyline_candidates(&[square(0, 10)], &flat_grid()).unwrap();
        assert_eq!(p.layout.sites[0].rect, Rect::new(0, 0, 10, 9));
    }

    #[test]
    fn all_candidates_violating_aspect_is_an_error() {
        let grid = GridConfig { max_aspect: 1.5, ..flat_grid() };
        let tall = PackItem { height: 30, ..square(0, 10) };
        assert_eq!(skyline_candidates(&[tall], &grid).unwrap_err(), Error::NoInitialLayout);
    }

    fn layout_with(blocks: &[(i64, i64, i64, i64)], grid: GridConfig) -> Layout {
        let mut l = Layout::new(grid);
        for (i, &(x, y, w, h)) in blocks.iter().enumerate() {
            let t = Template::new(0, w, h, PortSpec::new(Side::East, 0, 1)).unwrap();
            l.sites.push(PlacedBlock::site(i as u32, &t, Cell::new(x, y)));
        }
        l
    }

    #[test]
    fn capped_port_is_closed() {
        let t = Template::new(0, 10, 10, PortSpec::new(Side::North, 4, 2)).unwrap();
        let mut l = Layout::new(flat_grid());
        l.sites.push(PlacedBlock::site(0, &t, Cell::new(5, 0)));
        assert!(ports_open(&l));
        // walls left and right of the lane, a lid on top
        l.sites.push(PlacedBlock::site(1, &t, Cell::new(15, 0)));
        let wall = Template::new(2, 1, 13, PortSpec::new(Side::West, 0, 1)).unwrap();
        l.sites.push(PlacedBlock::site(2, &wall, Cell::new(4, 0)));
        let east_wall = Template::new(4, 1, 13, PortSpec::new(Side::East, 0, 1)).unwrap();
        l.sites.push(PlacedBlock::site(4, &east_wall, Cell::new(25, 0)));
        assert!(ports_open(&l));
        let lid = Template::new(3, 20, 2, PortSpec::new(Side::North, 0, 1)).unwrap();
        l.sites.push(PlacedBlock::site(3, &lid, Cell::new(5, 11)));
        assert!(!ports_open(&l));
    }

    #[test]
    fn cost_of_exactly_filled_box() {
        // 9x10 body plus its one-track east lane.
        let l = layout_with(&[(0, 0, 9, 10)], flat_grid());
        let p = CostParams { density_weight: 50.0, aspect_weight: 100.0, max_aspect: 1.0 };
        assert_eq!(compute_cost(&l, &p).unwrap(), 105.0);
    }

    #[test]
    fn cost_with_density_and_aspect_penalties() {
        // A route cell out at x = 19 widens the expanded box to 20x10.
        let mut l = layout_with(&[(0, 0, 10, 10)], flat_grid());
        let c = Cell::new(19, 0);
        let pin = Pin { cell: c, owner: None };
        l.routes.push(RoutePath { cells: vec![c], endpoints: (pin, pin) });
        let p = CostParams { density_weight: 50.0, aspect_weight: 100.0, max_aspect: 1.5 };
        assert_eq!(l.expanded_bbox().unwrap(), Rect::new(0, 0, 20, 10));
        assert_eq!(compute_cost(&l, &p).unwrap(), 275.0);
    }

    #[test]
    fn cost_scales_quadratically_in_area_only() {
        let p = CostParams { density_weight: 7.0, aspect_weight: 3.0, max_aspect: 1.2 };
        // spacing 0 and 1 give port lanes of 1 and 3 tracks, so k = 3 scales them too.
        let base = layout_with(&[(0, 0, 4, 3), (4, 0, 2, 5)], flat_grid());
        let k = 3;
        let scaled =
            layout_with(&[(0, 0, 4 * k, 3 * k), (4 * k, 0, 2 * k, 5 * k)], GridConfig { spacing: 1, ..flat_grid() });
        let a = base.expanded_bbox().unwrap().area() as f64;
        let penalty = compute_cost(&base, &p).unwrap() - a;
        let scaled_penalty = compute_cost(&scaled, &p).unwrap() - a * (k * k) as f64;
        assert!((penalty - scaled_penalty).abs() < 1e-9);
    }

    #[test]
    fn perturb_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(perturb(&['a'], false, &mut rng), vec!['a']);
        assert_eq!(perturb(&['a', 'b'], false, &mut rng), vec!['b', 'a']);
        assert_eq!(perturb(&['a', 'b'], true, &mut rng), vec!['a', 'b']);
        for _ in 0..100 {
            let p = perturb(&[1, 2, 3, 4], true, &mut rng);
            assert_eq!(p[0], 1);
        }
    }

    #[test]
    fn zero_iterations_returns_initial() {
        let grid = GridConfig::default();
        let order: Vec<_> = (0..5).map(|i| square(i, 10)).collect();
        let ap = AnnealParams { iterations: 0, ..AnnealParams::default() };
        let cp = CostParams::defaults_for(&order, &grid);
        let r = anneal(&order, &grid, &ap, &cp).unwrap();
        assert_eq!(r.best, r.initial);
        assert_eq!(r.best, skyline_candidates(&order, &grid).unwrap());
    }

    #[test]
    fn anneal_is_deterministic_per_seed() {
        let grid = GridConfig::default();
        let order: Vec<_> = (0..8).map(|i| PackItem { height: 5 + i as i64, ..square(i, 6 + (i as i64 % 3)) }).collect();
        let ap = AnnealParams { iterations: 300, seed: 42, ..AnnealParams::default() };
        let cp = CostParams::defaults_for(&order, &grid);
        let a = anneal(&order, &grid, &ap, &cp).unwrap();
        let b = anneal(&order, &grid, &ap, &cp).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.best_trace, b.best_trace);
        assert!(a.best_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn accept_always_takes_improvements() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..1000).all(|_| accept(-1.0, 1e-12, &mut rng)));
        assert!((0..1000).all(|_| !accept(1.0, 1e-9, &mut rng)));
    }
}
