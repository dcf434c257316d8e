use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{contact, Component, Participant, Scenario, ScenarioKind};
use crate::error::{Error, Result};
use crate::geom::{Cell, Rect, Side};
use crate::model::{TemplateId, TemplateLibrary};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverParams {
    /// Probability of taking a random useful candidate instead of the best one.
    pub epsilon: f64,
    /// Penalty per unit of relative bounding-box growth.
    pub density_weight: f64,
    /// Penalty per scenario occurrence that was already covered.
    pub redundancy_weight: f64,
    pub max_candidates: usize,
    pub seed: u64,
}

impl Default for CoverParams {
    fn default() -> Self {
        CoverParams { epsilon: 0.05, density_weight: 1.0, redundancy_weight: 0.25, max_candidates: 64, seed: 0 }
    }
}

impl CoverParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidParameter(format!("epsilon {} must lie in [0, 1]", self.epsilon)));
        }
        if !(self.density_weight >= 0.0) || !(self.redundancy_weight >= 0.0) {
            return Err(Error::InvalidParameter("cover weights must be non-negative".into()));
        }
        if self.max_candidates == 0 {
            return Err(Error::InvalidParameter("max_candidates must be positive".into()));
        }
        Ok(())
    }
}

/// A layout meant for one-pass rule checking, with the scenario occurrences
/// the builder counted while placing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverLayout {
    pub components: Vec<Component>,
    /// Not written to JSON; rescan with `verify_coverage` after loading.
    #[serde(skip)]
    pub covered: BTreeMap<Scenario, usize>,
}

impl CoverLayout {
    pub fn bbox(&self) -> Option<Rect> {
        self.components.iter().map(|c| c.rect).reduce(|a, b| a.union(&b))
    }

    pub fn area(&self) -> i64 {
        self.bbox().map_or(0, |b| b.area())
    }
}

const BUCKET: i64 = 8;
/// Recently placed components whose neighbourhood is tried for fresh gadgets.
const RECENT: usize = 6;

/// Corner roles around a one-cell void.
const SW: usize = 0;
const SE: usize = 1;
const NW: usize = 2;
const NE: usize = 3;

/// `(void cell, role)` for each corner of a template rectangle.
fn corner_slots(r: &Rect) -> [(Cell, usize); 4] {
    [
        (Cell::new(r.x1(), r.y1()), SW),
        (Cell::new(r.x - 1, r.y1()), SE),
        (Cell::new(r.x1(), r.y - 1), NW),
        (Cell::new(r.x - 1, r.y - 1), NE),
    ]
}

/// Template placements of the four roles around void `v`.
fn around_void(v: Cell, dims: [(i64, i64); 4]) -> [Rect; 4] {
    let [(w0, h0), (w1, h1), (w2, h2), (w3, h3)] = dims;
    [
        Rect::new(v.x - w0, v.y - h0, w0, h0),
        Rect::new(v.x + 1, v.y - h1, w1, h1),
        Rect::new(v.x - w2, v.y + 1, w2, h2),
        Rect::new(v.x + 1, v.y + 1, w3, h3),
    ]
}

fn void_of(r: &Rect, role: usize) -> Cell {
    corner_slots(r).into_iter().find(|&(_, k)| k == role).expect("four roles").0
}

struct Eval {
    occurrences: Vec<Scenario>,
    bbox: Rect,
}

struct Builder {
    dims: BTreeMap<TemplateId, (i64, i64)>,
    comps: Vec<Component>,
    by_part: BTreeMap<Participant, Vec<usize>>,
    buckets: HashMap<(i64, i64), Vec<usize>>,
    corners: HashMap<(Cell, usize), usize>,
    voids: HashSet<Cell>,
    covered: BTreeMap<Scenario, usize>,
    bbox: Option<Rect>,
}

impl Builder {
    fn new(library: &TemplateLibrary) -> Self {
        Builder {
            dims: library.iter().map(|t| (t.id, (t.width, t.height))).collect(),
            comps: Vec::new(),
            by_part: BTreeMap::new(),
            buckets: HashMap::new(),
            corners: HashMap::new(),
            voids: HashSet::new(),
            covered: BTreeMap::new(),
            bbox: None,
        }
    }

    fn bucket_range(r: &Rect) -> impl Iterator<Item = (i64, i64)> {
        let (bx0, bx1) = (r.x.div_euclid(BUCKET), (r.x1() - 1).div_euclid(BUCKET));
        let (by0, by1) = (r.y.div_euclid(BUCKET), (r.y1() - 1).div_euclid(BUCKET));
        (by0..=by1).flat_map(move |by| (bx0..=bx1).map(move |bx| (bx, by)))
    }

    /// Existing components whose rectangles meet `r` (touching included).
    fn near(&self, r: &Rect) -> Vec<usize> {
        let mut out: Vec<usize> = Self::bucket_range(&r.grow(1))
            .filter_map(|k| self.buckets.get(&k))
            .flatten()
            .copied()
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn occupied(&self, c: Cell) -> bool {
        self.near(&Rect::unit(c)).iter().any(|&i| self.comps[i].rect.contains(c))
    }

    fn evaluate(&self, new: &[Component]) -> Option<Eval> {
        for (i, n) in new.iter().enumerate() {
            if new[..i].iter().any(|m| crate::geom::overlaps(&m.rect, &n.rect)) {
                return None;
            }
            if self.near(&n.rect).iter().any(|&j| crate::geom::overlaps(&self.comps[j].rect, &n.rect)) {
                return None;
            }
            if n.rect.cells().any(|c| self.voids.contains(&c)) {
                return None;
            }
        }
        let mut occurrences = Vec::new();
        for (i, n) in new.iter().enumerate() {
            for j in self.near(&n.rect) {
                occurrences.extend(contact(n, &self.comps[j]));
            }
            for m in &new[i + 1..] {
                occurrences.extend(contact(n, m));
            }
        }
        let new_corner = |v: Cell, role: usize| {
            new.iter().find_map(|n| match n.part {
                Participant::Template(id) if corner_slots(&n.rect).contains(&(v, role)) => Some(id),
                _ => None,
            })
        };
        let mut seen = BTreeSet::new();
        for n in new.iter().filter(|n| matches!(n.part, Participant::Template(_))) {
            for (v, _) in corner_slots(&n.rect) {
                if !seen.insert(v) || self.occupied(v) || new.iter().any(|m| m.rect.contains(v)) {
                    continue;
                }
                let ids: Option<Vec<TemplateId>> = (0..4)
                    .map(|role| {
                        new_corner(v, role).or_else(|| {
                            self.corners.get(&(v, role)).and_then(|&k| match self.comps[k].part {
                                Participant::Template(id) => Some(id),
                                Participant::Track => None,
                            })
                        })
                    })
                    .collect();
                if let Some(ids) = ids {
                    occurrences.push(Scenario::four_corner([ids[0], ids[1], ids[2], ids[3]]));
                }
            }
        }
        let mut bbox = self.bbox;
        for n in new {
            bbox = Some(bbox.map_or(n.rect, |b| b.union(&n.rect)));
        }
        Some(Eval { occurrences, bbox: bbox? })
    }

    fn commit(&mut self, new: Vec<Component>, eval: Eval) {
        for s in eval.occurrences {
            *self.covered.entry(s).or_insert(0) += 1;
        }
        let start = self.comps.len();
        for n in new {
            let i = self.comps.len();
            for k in Self::bucket_range(&n.rect) {
                self.buckets.entry(k).or_default().push(i);
            }
            if matches!(n.part, Participant::Template(_)) {
                for slot in corner_slots(&n.rect) {
                    self.corners.insert(slot, i);
                }
            }
            self.by_part.entry(n.part).or_default().push(i);
            self.comps.push(n);
        }
        self.bbox = Some(eval.bbox);
        self.record_voids(start);
    }

    /// Remember the voids that templates from index `start` on completed,
    /// so nothing is ever placed over them.
    fn record_voids(&mut self, start: usize) {
        let mut fresh = Vec::new();
        for n in &self.comps[start..] {
            if !matches!(n.part, Participant::Template(_)) {
                continue;
            }
            for (v, _) in corner_slots(&n.rect) {
                if (0..4).all(|role| self.corners.contains_key(&(v, role))) && !self.occupied(v) {
                    fresh.push(v);
                }
            }
        }
        self.voids.extend(fresh);
    }

    /// Lower-left corners to try for a new gadget: just past the bounding
    /// box along its shorter side, and one track past the most recently
    /// placed components, which often lands inside the box.
    fn fresh_origins(&self) -> Vec<Cell> {
        let Some(b) = self.bbox else { return vec![Cell::new(0, 0)] };
        let edge = if b.w <= b.h { Cell::new(b.x1() + 1, b.y) } else { Cell::new(b.x, b.y1() + 1) };
        let mut out = Vec::new();
        for c in self.comps.iter().rev().take(RECENT) {
            out.push(Cell::new(c.rect.x1() + 1, c.rect.y));
            out.push(Cell::new(c.rect.x, c.rect.y1() + 1));
        }
        out.push(edge);
        out
    }

    fn fresh(&self, gadget: Vec<Component>) -> Vec<Vec<Component>> {
        let bb = gadget.iter().map(|c| c.rect).reduce(|a, b| a.union(&b)).expect("non-empty gadget");
        self.fresh_origins()
            .into_iter()
            .map(|o| {
                gadget
                    .iter()
                    .map(|c| Component { rect: c.rect.translate(o.x - bb.x, o.y - bb.y), ..*c })
                    .collect()
            })
            .collect()
    }

    fn existing(&self, part: Participant) -> impl Iterator<Item = &Component> {
        self.by_part.get(&part).into_iter().flat_map(|v| v.iter().rev().map(|&i| &self.comps[i]))
    }

    /// Rect of size `w x h` abutting side `side` of `e`, aligned to either end.
    fn beside(e: &Rect, side: Side, w: i64, h: i64) -> [Rect; 2] {
        match side {
            Side::East => [Rect::new(e.x1(), e.y, w, h), Rect::new(e.x1(), e.y1() - h, w, h)],
            Side::West => [Rect::new(e.x - w, e.y, w, h), Rect::new(e.x - w, e.y1() - h, w, h)],
            Side::North => [Rect::new(e.x, e.y1(), w, h), Rect::new(e.x1() - w, e.y1(), w, h)],
            Side::South => [Rect::new(e.x, e.y - h, w, h), Rect::new(e.x1() - w, e.y - h, w, h)],
        }
    }

    fn at_corner(e: &Rect, corner: Side, w: i64, h: i64) -> Rect {
        match corner {
            Side::North => Rect::new(e.x1(), e.y1(), w, h),
            Side::East => Rect::new(e.x1(), e.y - h, w, h),
            Side::South => Rect::new(e.x - w, e.y - h, w, h),
            Side::West => Rect::new(e.x - w, e.y1(), w, h),
        }
    }

    /// Candidate placements that would show `s`: next to existing components
    /// first, then in fresh space.
    fn candidates(&self, s: &Scenario, per_scenario: usize) -> Vec<Vec<Component>> {
        use Participant::{Template as T, Track};
        let mut near = Vec::new();
        let ids: Vec<TemplateId> = s.templates().collect();
        let tmpl = |id: TemplateId, r: Rect| Component { part: T(id), rect: r };
        let track = |r: Rect| Component { part: Track, rect: r };
        let fresh_gadget: Vec<Component>;
        match s.kind {
            ScenarioKind::PairAbut | ScenarioKind::CornerAbut => {
                let (a, b, o) = (ids[0], ids[1], s.orientation);
                let (da, db) = (self.dims[&a], self.dims[&b]);
                let place = |e: &Rect, side: Side, (w, h): (i64, i64)| -> Vec<Rect> {
                    if s.kind == ScenarioKind::PairAbut {
                        Self::beside(e, side, w, h).to_vec()
                    } else {
                        vec![Self::at_corner(e, side, w, h)]
                    }
                };
                for e in self.existing(T(a)) {
                    near.extend(place(&e.rect, o, db).into_iter().map(|r| vec![tmpl(b, r)]));
                }
                for e in self.existing(T(b)) {
                    near.extend(place(&e.rect, o.opposite(), da).into_iter().map(|r| vec![tmpl(a, r)]));
                }
                let ra = Rect::new(0, 0, da.0, da.1);
                fresh_gadget = vec![tmpl(a, ra), tmpl(b, place(&ra, o, db)[0])];
            }
            ScenarioKind::FourCorner => {
                let dims = |ids: &[TemplateId]| [0, 1, 2, 3].map(|k| self.dims[&ids[k]]);
                for e in ids.iter().collect::<BTreeSet<_>>().into_iter().flat_map(|&id| self.existing(T(id))) {
                    let Participant::Template(eid) = e.part else { continue };
                    for role in [SW, SE, NW, NE] {
                        let mut rest = ids.clone();
                        rest.remove(rest.iter().position(|&x| x == eid).expect("member"));
                        rest.insert(role, eid);
                        let rects = around_void(void_of(&e.rect, role), dims(&rest));
                        let group: Vec<Component> =
                            (0..4).filter(|&k| k != role).map(|k| tmpl(rest[k], rects[k])).collect();
                        near.push(group);
                    }
                }
                let rects = around_void(Cell::new(0, 0), dims(&ids));
                fresh_gadget = (0..4).map(|k| tmpl(ids[k], rects[k])).collect();
            }
            ScenarioKind::TrackTemplateAbut => {
                let (t, side) = (ids[0], s.orientation);
                let strip = |e: &Rect| match side {
                    Side::East => Rect::new(e.x1(), e.y, 1, e.h),
                    Side::West => Rect::new(e.x - 1, e.y, 1, e.h),
                    Side::North => Rect::new(e.x, e.y1(), e.w, 1),
                    Side::South => Rect::new(e.x, e.y - 1, e.w, 1),
                };
                for e in self.existing(T(t)) {
                    near.push(vec![track(strip(&e.rect))]);
                }
                let (w, h) = self.dims[&t];
                let r = Rect::new(0, 0, w, h);
                fresh_gadget = vec![tmpl(t, r), track(strip(&r))];
            }
            ScenarioKind::TrackTrackAbut => {
                let stacked = s.orientation == Side::North;
                for e in self.existing(Track) {
                    let r = e.rect;
                    if stacked && r.h == 1 {
                        near.push(vec![track(Rect::new(r.x, r.y1(), r.w, 1))]);
                        near.push(vec![track(Rect::new(r.x, r.y - 1, r.w, 1))]);
                    } else if !stacked && r.w == 1 {
                        near.push(vec![track(Rect::new(r.x1(), r.y, 1, r.h))]);
                        near.push(vec![track(Rect::new(r.x - 1, r.y, 1, r.h))]);
                    }
                }
                fresh_gadget = if stacked {
                    vec![track(Rect::new(0, 0, 3, 1)), track(Rect::new(0, 1, 3, 1))]
                } else {
                    vec![track(Rect::new(0, 0, 1, 3)), track(Rect::new(1, 0, 1, 3))]
                };
            }
        }
        let half = per_scenario.div_ceil(2);
        let mut out: Vec<Vec<Component>> =
            near.into_iter().filter(|g| self.evaluate(g).is_some()).take(half).collect();
        let room = per_scenario - out.len();
        let mut fresh: Vec<Vec<Component>> =
            self.fresh(fresh_gadget).into_iter().filter(|g| self.evaluate(g).is_some()).collect();
        // keep the bounding-box edge, which is always feasible, as the last resort
        let edge = fresh.pop();
        fresh.truncate(room.saturating_sub(1));
        out.extend(fresh.into_iter().chain(edge));
        out
    }
}

/// Build a layout showing every scenario in `scenarios` at least once.
///
/// Each step scores candidate placements by newly covered scenarios, minus
/// `density_weight` times the relative bounding-box growth, minus
/// `redundancy_weight` per occurrence of an already covered scenario.
pub fn greedy_cover(
    scenarios: &BTreeSet<Scenario>,
    library: &TemplateLibrary,
    params: &CoverParams,
) -> Result<CoverLayout> {
    params.validate()?;
    for s in scenarios {
        if let Some(id) = s.templates().find(|id| library.get(*id).is_err()) {
            return Err(Error::UnknownTemplate(id));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut b = Builder::new(library);
    let per_scenario = (params.max_candidates / 8).max(1);
    loop {
        let pending: Vec<&Scenario> = scenarios.iter().filter(|s| !b.covered.contains_key(*s)).collect();
        if pending.is_empty() {
            break;
        }
        let mut scored: Vec<(f64, Vec<Component>, Eval)> = Vec::new();
        let mut tried = 0;
        for s in &pending {
            if tried >= params.max_candidates {
                break;
            }
            for cand in b.candidates(s, per_scenario) {
                if tried >= params.max_candidates {
                    break;
                }
                tried += 1;
                let Some(eval) = b.evaluate(&cand) else { continue };
                let distinct: BTreeSet<&Scenario> = eval.occurrences.iter().collect();
                let newly = distinct.iter().filter(|x| scenarios.contains(x) && !b.covered.contains_key(*x)).count();
                if newly == 0 {
                    continue;
                }
                let redundant = eval.occurrences.len() - newly;
                let growth = b.bbox.map_or(0.0, |old| (eval.bbox.area() - old.area()) as f64 / old.area() as f64);
                let score =
                    newly as f64 - params.density_weight * growth - params.redundancy_weight * redundant as f64;
                scored.push((score, cand, eval));
            }
        }
        if scored.is_empty() {
            return Err(Error::CoverageStuck { pending: pending.len() });
        }
        let pick = if params.epsilon > 0.0 && rng.gen::<f64>() < params.epsilon {
            rng.gen_range(0..scored.len())
        } else {
            let mut best = 0;
            for (i, s) in scored.iter().enumerate() {
                if s.0 > scored[best].0 {
                    best = i;
                }
            }
            best
        };
        let (_, cand, eval) = scored.swap_remove(pick);
        b.commit(cand, eval);
    }
    Ok(CoverLayout { components: b.comps, covered: b.covered })
}
