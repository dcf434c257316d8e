//! Design-rule scenario coverage.
//!
//! With only a few templates on a common grid, the set of abutment
//! configurations that can ever occur is finite. [`enumerate_scenarios`]
//! lists them, [`greedy_cover`] builds one layout that shows each at least
//! once, and [`verify_coverage`] rescans a layout independently.

mod cover;
mod scan;

pub use cover::{greedy_cover, CoverLayout, CoverParams};
pub use scan::{verify_coverage, write_coverage_csv, CoverageReport};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geom::{Rect, Side};
use crate::model::{PortSpec, Template, TemplateId, TemplateLibrary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    PairAbut,
    CornerAbut,
    FourCorner,
    TrackTemplateAbut,
    TrackTrackAbut,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::PairAbut => "pair_abut",
            ScenarioKind::CornerAbut => "corner_abut",
            ScenarioKind::FourCorner => "four_corner",
            ScenarioKind::TrackTemplateAbut => "track_template_abut",
            ScenarioKind::TrackTrackAbut => "track_track_abut",
        }
    }
}

/// A layout component: a template instance or a one-track-wide channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Participant {
    Template(TemplateId),
    Track,
}

impl fmt::Display for Participant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Participant::Template(id) => write!(f, "T{id}"),
            Participant::Track => f.write_str("track"),
        }
    }
}

/// One abutment configuration, always stored in canonical form.
///
/// `orientation` is the side of the first participant that faces the
/// second. For corner contacts it names a diagonal: north is the first
/// participant's north-east corner, and east, south and west turn that by
/// 90 degrees clockwise each (south-east, south-west, north-west).
/// Four-corner scenarios always carry `North`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub participants: Vec<Participant>,
    pub orientation: Side,
}

impl Scenario {
    /// Template `b` abuts side `side` of template `a`.
    pub fn pair(a: TemplateId, b: TemplateId, side: Side) -> Self {
        use Participant::Template as T;
        let x = (vec![T(a), T(b)], side);
        let y = (vec![T(b), T(a)], side.opposite());
        let (participants, orientation) = x.min(y);
        Scenario { kind: ScenarioKind::PairAbut, participants, orientation }
    }

    /// Template `b` touches template `a` only at the corner named by `corner`.
    pub fn corner(a: TemplateId, b: TemplateId, corner: Side) -> Self {
        use Participant::Template as T;
        let x = (vec![T(a), T(b)], corner);
        let y = (vec![T(b), T(a)], corner.opposite());
        let (participants, orientation) = x.min(y);
        Scenario { kind: ScenarioKind::CornerAbut, participants, orientation }
    }

    pub fn four_corner(mut ids: [TemplateId; 4]) -> Self {
        ids.sort_unstable();
        Scenario {
            kind: ScenarioKind::FourCorner,
            participants: ids.iter().map(|&i| Participant::Template(i)).collect(),
            orientation: Side::North,
        }
    }

    /// A track runs along side `side` of template `t`.
    pub fn track_template(t: TemplateId, side: Side) -> Self {
        Scenario {
            kind: ScenarioKind::TrackTemplateAbut,
            participants: vec![Participant::Template(t), Participant::Track],
            orientation: side,
        }
    }

    /// Two tracks side by side; `North` means stacked, `East` means next to each other.
    pub fn track_track(side: Side) -> Self {
        Scenario {
            kind: ScenarioKind::TrackTrackAbut,
            participants: vec![Participant::Track, Participant::Track],
            orientation: side.min(side.opposite()),
        }
    }

    pub fn templates(&self) -> impl Iterator<Item = TemplateId> + '_ {
        self.participants.iter().filter_map(|p| match p {
            Participant::Template(id) => Some(*id),
            Participant::Track => None,
        })
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.participants.iter().map(|p| p.to_string()).collect();
        write!(f, "{}:{}:{}", self.kind.as_str(), parts.join("-"), self.orientation)
    }
}

/// Every scenario a library can produce: template pairs edge to edge and
/// corner to corner, four templates around a one-cell void, a track along
/// each template side, and two tracks side by side, in all four orientations.
pub fn enumerate_scenarios(library: &TemplateLibrary) -> BTreeSet<Scenario> {
    let ids: Vec<TemplateId> = library.iter().map(|t| t.id).collect();
    let mut out = BTreeSet::new();
    for side in Side::ALL {
        out.insert(Scenario::track_track(side));
        for &a in &ids {
            out.insert(Scenario::track_template(a, side));
            for &b in &ids {
                out.insert(Scenario::pair(a, b, side));
                out.insert(Scenario::corner(a, b, side));
            }
        }
    }
    for &a in &ids {
        for &b in &ids {
            for &c in &ids {
                for &d in &ids {
                    out.insert(Scenario::four_corner([a, b, c, d]));
                }
            }
        }
    }
    out
}

/// `n` small templates with distinct footprints, for coverage layouts.
pub fn small_library(n: usize) -> TemplateLibrary {
    let templates = (0..n)
        .map(|k| {
            let (w, h) = (3 + (k % 3) as i64 + (k / 9) as i64, 3 + ((k / 3) % 3) as i64);
            Template::new(k as TemplateId, w, h, PortSpec::centered(Side::North, w, h, 1)).expect("valid template")
        })
        .collect();
    TemplateLibrary::new(templates).expect("distinct ids")
}

/// A placed component of a coverage layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub part: Participant,
    pub rect: Rect,
}

/// Scenario shown by two touching components, if any. Corner-only contacts
/// count between templates only.
pub fn contact(p: &Component, q: &Component) -> Option<Scenario> {
    use Participant::{Template as T, Track};
    let (a, b) = (&p.rect, &q.rect);
    let overlap = |lo0: i64, hi0: i64, lo1: i64, hi1: i64| hi0.min(hi1) - lo0.max(lo1) > 0;
    let side = if a.x1() == b.x && overlap(a.y, a.y1(), b.y, b.y1()) {
        Some(Side::East)
    } else if b.x1() == a.x && overlap(a.y, a.y1(), b.y, b.y1()) {
        Some(Side::West)
    } else if a.y1() == b.y && overlap(a.x, a.x1(), b.x, b.x1()) {
        Some(Side::North)
    } else if b.y1() == a.y && overlap(a.x, a.x1(), b.x, b.x1()) {
        Some(Side::South)
    } else {
        None
    };
    if let Some(s) = side {
        return Some(match (p.part, q.part) {
            (T(x), T(y)) => Scenario::pair(x, y, s),
            (T(x), Track) => Scenario::track_template(x, s),
            (Track, T(y)) => Scenario::track_template(y, s.opposite()),
            (Track, Track) => Scenario::track_track(s),
        });
    }
    let corner = if a.x1() == b.x && a.y1() == b.y {
        Side::North
    } else if a.x1() == b.x && b.y1() == a.y {
        Side::East
    } else if b.x1() == a.x && b.y1() == a.y {
        Side::South
    } else if b.x1() == a.x && a.y1() == b.y {
        Side::West
    } else {
        return None;
    };
    match (p.part, q.part) {
        (T(x), T(y)) => Some(Scenario::corner(x, y, corner)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_form(n: usize) -> usize {
        let four = (n + 3) * (n + 2) * (n + 1) * n / 24;
        2 * n * n + 2 * n * n + four + 4 * n + 2
    }

    #[test]
    fn counts_match_closed_form() {
        for n in 0..=8 {
            assert_eq!(enumerate_scenarios(&small_library(n)).len(), closed_form(n), "n = {n}");
        }
        assert_eq!(enumerate_scenarios(&small_library(1)).len(), 11);
        assert_eq!(enumerate_scenarios(&small_library(8)).len(), 620);
    }

    #[test]
    fn empty_library_has_only_track_pairs() {
        let s = enumerate_scenarios(&TemplateLibrary::default());
        assert!(s.iter().all(|x| x.kind == ScenarioKind::TrackTrackAbut));
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn swapped_views_collapse() {
        assert_eq!(Scenario::pair(3, 1, Side::East), Scenario::pair(1, 3, Side::West));
        assert_eq!(Scenario::pair(2, 2, Side::South), Scenario::pair(2, 2, Side::North));
        assert_eq!(Scenario::corner(4, 0, Side::North), Scenario::corner(0, 4, Side::South));
        assert_eq!(Scenario::four_corner([3, 0, 2, 0]), Scenario::four_corner([0, 0, 2, 3]));
        assert_eq!(Scenario::track_track(Side::West), Scenario::track_track(Side::East));
    }

    #[test]
    fn contact_kinds() {
        let t = |id, x, y, w, h| Component { part: Participant::Template(id), rect: Rect::new(x, y, w, h) };
        let track = |x, y, w, h| Component { part: Participant::Track, rect: Rect::new(x, y, w, h) };
        assert_eq!(contact(&t(0, 0, 0, 3, 3), &t(1, 3, 1, 3, 3)), Some(Scenario::pair(0, 1, Side::East)));
        assert_eq!(contact(&t(0, 0, 0, 3, 3), &t(1, 3, 3, 3, 3)), Some(Scenario::corner(0, 1, Side::North)));
        assert_eq!(contact(&t(0, 0, 0, 3, 3), &t(1, 4, 0, 3, 3)), None);
        assert_eq!(contact(&track(0, 3, 3, 1), &t(2, 0, 0, 3, 3)), Some(Scenario::track_template(2, Side::North)));
        assert_eq!(contact(&track(0, 0, 1, 4), &track(1, 2, 1, 4)), Some(Scenario::track_track(Side::East)));
        // track corners do not count
        assert_eq!(contact(&track(0, 0, 1, 1), &t(0, 1, 1, 3, 3)), None);
    }

    #[test]
    fn shuffled_library_gives_same_set() {
        let lib = small_library(5);
        let mut ts: Vec<Template> = lib.iter().cloned().collect();
        ts.reverse();
        let shuffled = TemplateLibrary::new(ts).unwrap();
        assert_eq!(enumerate_scenarios(&lib), enumerate_scenarios(&shuffled));
    }
}
