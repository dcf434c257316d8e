//! Integer track-grid primitives.

use serde::{Deserialize, Serialize};
use std::fmt;

/// One grid cell, addressed by its lower-left corner in track units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i64,
    pub y: i64,
}

impl Cell {
    pub const fn new(x: i64, y: i64) -> Self {
        Cell { x, y }
    }

    pub fn manhattan(self, other: Cell) -> i64 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    pub fn chebyshev(self, other: Cell) -> i64 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    /// East, north, west, south, in that order.
    pub fn neighbors4(self) -> [Cell; 4] {
        [
            Cell::new(self.x + 1, self.y),
            Cell::new(self.x, self.y + 1),
            Cell::new(self.x - 1, self.y),
            Cell::new(self.x, self.y - 1),
        ]
    }

    pub fn translate(self, dx: i64, dy: i64) -> Cell {
        Cell::new(self.x + dx, self.y + dy)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Axis-aligned rectangle `[x, x + w) x [y, y + h)` in track units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl Rect {
    pub const fn new(x: i64, y: i64, w: i64, h: i64) -> Self {
        Rect { x, y, w, h }
    }

    pub fn unit(cell: Cell) -> Self {
        Rect::new(cell.x, cell.y, 1, 1)
    }

    pub fn x1(&self) -> i64 {
        self.x + self.w
    }

    pub fn y1(&self) -> i64 {
        self.y + self.h
    }

    pub fn area(&self) -> i64 {
        self.w.max(0) * self.h.max(0)
    }

    pub fn is_empty(&self) -> bool {
        self.w <= 0 || self.h <= 0
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x >= self.x && c.x < self.x1() && c.y >= self.y && c.y < self.y1()
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x >= self.x && other.y >= self.y && other.x1() <= self.x1() && other.y1() <= self.y1()
    }

    /// Smallest rectangle enclosing both; an empty operand is ignored.
    pub fn union(&self, other: &Rect) -> Rect {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        let x0 = self.x.min(other.x);
        let y0 = self.y.min(other.y);
        let x1 = self.x1().max(other.x1());
        let y1 = self.y1().max(other.y1());
        Rect::new(x0, y0, x1 - x0, y1 - y0)
    }

    pub fn expand(&self, left: i64, right: i64, bottom: i64, top: i64) -> Rect {
        Rect::new(
            self.x - left,
            self.y - bottom,
            self.w + left + right,
            self.h + bottom + top,
        )
    }

    pub fn grow(&self, by: i64) -> Rect {
        self.expand(by, by, by, by)
    }

    pub fn translate(&self, dx: i64, dy: i64) -> Rect {
        Rect::new(self.x + dx, self.y + dy, self.w, self.h)
    }

    /// Long side over short side; infinite for degenerate rectangles.
    pub fn aspect(&self) -> f64 {
        let lo = self.w.min(self.h);
        let hi = self.w.max(self.h);
        if lo <= 0 {
            f64::INFINITY
        } else {
            hi as f64 / lo as f64
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let (x0, x1) = (self.x, self.x1());
        (self.y..self.y1()).flat_map(move |y| (x0..x1).map(move |x| Cell::new(x, y)))
    }

    pub fn lower_left(&self) -> Cell {
        Cell::new(self.x, self.y)
    }
}

/// True iff the interiors intersect. Shared edges (abutment) do not count.
pub fn overlaps(a: &Rect, b: &Rect) -> bool {
    if a.is_empty() || b.is_empty() {
        return false;
    }
    a.x < b.x1() && b.x < a.x1() && a.y < b.y1() && b.y < a.y1()
}

/// Bounding rectangle of a set of cells, or `None` if there are none.
pub fn cells_bbox<'a>(cells: impl IntoIterator<Item = &'a Cell>) -> Option<Rect> {
    let mut it = cells.into_iter();
    let first = it.next()?;
    let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
    for c in it {
        x0 = x0.min(c.x);
        y0 = y0.min(c.y);
        x1 = x1.max(c.x);
        y1 = y1.max(c.y);
    }
    Some(Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
}

/// Side of a rectangle. For north/south ports offsets run along x; for
/// east/west they run along y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    North,
    South,
    East,
    West,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::North, Side::East, Side::South, Side::West];

    pub fn opposite(self) -> Side {
        match self {
            Side::North => Side::South,
            Side::South => Side::North,
            Side::East => Side::West,
            Side::West => Side::East,
        }
    }

    pub fn is_horizontal_edge(self) -> bool {
        matches!(self, Side::North | Side::South)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::North => "north",
            Side::South => "south",
            Side::East => "east",
            Side::West => "west",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
