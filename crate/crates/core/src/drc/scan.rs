use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use serde::Serialize;

use super::{Component, CoverLayout, Participant, Scenario};
use crate::geom::Side;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    /// Occurrences of every scenario found in the layout, wanted or not.
    pub occurrences: BTreeMap<Scenario, usize>,
    pub missing: Vec<Scenario>,
    /// Found scenarios outside the wanted set.
    pub extra: Vec<Scenario>,
    /// Cells claimed by more than one component.
    pub overlaps: usize,
    pub coverage_pct: f64,
    /// Mean occurrences over the wanted scenarios; `None` for an empty set.
    pub avg_occurrence: Option<f64>,
}

/// Rasterize `layout` and scan it for contacts cell by cell, without using
/// the builder's bookkeeping.
pub fn verify_coverage(layout: &CoverLayout, scenarios: &BTreeSet<Scenario>) -> CoverageReport {
    let occurrences = match layout.bbox() {
        Some(_) => Raster::new(&layout.components).scan(),
        None => (BTreeMap::new(), 0),
    };
    let (occurrences, overlaps) = occurrences;
    let missing: Vec<Scenario> = scenarios.iter().filter(|s| !occurrences.contains_key(*s)).cloned().collect();
    let extra: Vec<Scenario> = occurrences.keys().filter(|s| !scenarios.contains(*s)).cloned().collect();
    let n = scenarios.len();
    let coverage_pct = if n == 0 { 100.0 } else { 100.0 * (n - missing.len()) as f64 / n as f64 };
    let total: usize = scenarios.iter().map(|s| occurrences.get(s).copied().unwrap_or(0)).sum();
    let avg_occurrence = (n > 0).then(|| total as f64 / n as f64);
    CoverageReport { occurrences, missing, extra, overlaps, coverage_pct, avg_occurrence }
}

struct Raster<'a> {
    comps: &'a [Component],
    x0: i64,
    y0: i64,
    w: i64,
    h: i64,
    label: Vec<Option<usize>>,
    overlaps: usize,
}

impl<'a> Raster<'a> {
    fn new(comps: &'a [Component]) -> Self {
        let bb = comps.iter().map(|c| c.rect).reduce(|a, b| a.union(&b)).expect("non-empty").grow(1);
        let mut r = Raster {
            comps,
            x0: bb.x,
            y0: bb.y,
            w: bb.w,
            h: bb.h,
            label: vec![None; bb.area() as usize],
            overlaps: 0,
        };
        for (i, c) in comps.iter().enumerate() {
            for cell in c.rect.cells() {
                let k = r.index(cell.x, cell.y).expect("inside grown box");
                if r.label[k].is_some() {
                    r.overlaps += 1;
                }
                r.label[k] = Some(i);
            }
        }
        r
    }

    fn index(&self, x: i64, y: i64) -> Option<usize> {
        let (dx, dy) = (x - self.x0, y - self.y0);
        (dx >= 0 && dy >= 0 && dx < self.w && dy < self.h).then(|| (dy * self.w + dx) as usize)
    }

    fn at(&self, x: i64, y: i64) -> Option<usize> {
        self.index(x, y).and_then(|k| self.label[k])
    }

    fn template(&self, i: usize) -> Option<u32> {
        match self.comps[i].part {
            Participant::Template(id) => Some(id),
            Participant::Track => None,
        }
    }

    /// Whether cell `(x, y)` is the corner cell of its component on the
    /// given diagonal, e.g. `(1, 1)` for the upper-right corner.
    fn is_corner(&self, x: i64, y: i64, dx: i64, dy: i64) -> bool {
        let Some(i) = self.at(x, y) else { return false };
        self.at(x + dx, y) != Some(i) && self.at(x, y + dy) != Some(i)
    }

    fn scan(&self) -> (BTreeMap<Scenario, usize>, usize) {
        // Edge contacts, one per component pair, stored as (lower index, upper index, side of lower).
        let mut edges: BTreeMap<(usize, usize), Side> = BTreeMap::new();
        let mut add_edge = |a: usize, b: usize, side: Side| {
            if a < b {
                edges.insert((a, b), side);
            } else {
                edges.insert((b, a), side.opposite());
            }
        };
        for y in self.y0..self.y0 + self.h {
            for x in self.x0..self.x0 + self.w {
                let Some(a) = self.at(x, y) else { continue };
                if let Some(b) = self.at(x + 1, y).filter(|&b| b != a) {
                    add_edge(a, b, Side::East);
                }
                if let Some(b) = self.at(x, y + 1).filter(|&b| b != a) {
                    add_edge(a, b, Side::North);
                }
            }
        }
        let mut found: Vec<Scenario> = Vec::new();
        for (&(a, b), &side) in &edges {
            let s = match (self.template(a), self.template(b)) {
                (Some(x), Some(y)) => Scenario::pair(x, y, side),
                (Some(x), None) => Scenario::track_template(x, side),
                (None, Some(y)) => Scenario::track_template(y, side.opposite()),
                (None, None) => Scenario::track_track(side),
            };
            found.push(s);
        }
        // Corner-only contacts between templates, and one-cell voids framed by four template corners.
        let mut corners: BTreeSet<(usize, usize, Side)> = BTreeSet::new();
        for y in self.y0..self.y0 + self.h - 1 {
            for x in self.x0..self.x0 + self.w - 1 {
                let (sw, se, nw, ne) = (self.at(x, y), self.at(x + 1, y), self.at(x, y + 1), self.at(x + 1, y + 1));
                if let (Some(a), Some(b)) = (sw, ne) {
                    if a != b && self.is_corner(x, y, 1, 1) && self.is_corner(x + 1, y + 1, -1, -1) {
                        corners.insert((a, b, Side::North));
                    }
                }
                if let (Some(a), Some(b)) = (nw, se) {
                    if a != b && self.is_corner(x, y + 1, 1, -1) && self.is_corner(x + 1, y, -1, 1) {
                        corners.insert((a, b, Side::East));
                    }
                }
            }
        }
        for (a, b, dir) in corners {
            if edges.contains_key(&(a.min(b), a.max(b))) {
                continue;
            }
            if let (Some(x), Some(y)) = (self.template(a), self.template(b)) {
                found.push(Scenario::corner(x, y, dir));
            }
        }
        for y in self.y0 + 1..self.y0 + self.h - 1 {
            for x in self.x0 + 1..self.x0 + self.w - 1 {
                if self.at(x, y).is_some() {
                    continue;
                }
                let quad = [(-1, -1, 1, 1), (1, -1, -1, 1), (-1, 1, 1, -1), (1, 1, -1, -1)];
                let ids: Option<Vec<u32>> = quad
                    .iter()
                    .map(|&(ox, oy, dx, dy)| {
                        let (cx, cy) = (x + ox, y + oy);
                        self.at(cx, cy)
                            .filter(|_| self.is_corner(cx, cy, dx, dy))
                            .and_then(|i| self.template(i))
                    })
                    .collect();
                if let Some(ids) = ids {
                    found.push(Scenario::four_corner([ids[0], ids[1], ids[2], ids[3]]));
                }
            }
        }
        let mut occ = BTreeMap::new();
        for s in found {
            *occ.entry(s).or_insert(0) += 1;
        }
        (occ, self.overlaps)
    }
}

/// One row per wanted scenario: `scenario,kind,occurrences`.
pub fn write_coverage_csv<W: Write>(
    mut w: W,
    report: &CoverageReport,
    scenarios: &BTreeSet<Scenario>,
) -> io::Result<()> {
    writeln!(w, "scenario,kind,occurrences")?;
    for s in scenarios {
        let n = report.occurrences.get(s).copied().unwrap_or(0);
        writeln!(w, "{},{},{}", s, s.kind.as_str(), n)?;
    }
    Ok(())
}
