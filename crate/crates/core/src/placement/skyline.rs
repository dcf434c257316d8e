use serde::{Deserialize, Serialize};

/// One horizontal run `[x0, x1)` of the skyline at `height`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub x0: i64,
    pub x1: i64,
    pub height: i64,
}

/// Upper envelope of everything placed in a strip of fixed width.
///
/// Segments partition `[0, width)` without gaps, and neighbours always have
/// different heights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skyline {
    width: i64,
    segments: Vec<Segment>,
}

impl Skyline {
    pub fn new(width: i64) -> Self {
        assert!(width > 0, "skyline width must be positive");
        Skyline { width, segments: vec![Segment { x0: 0, x1: width, height: 0 }] }
    }

    pub fn width(&self) -> i64 {
        self.width
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn height_at(&self, x: i64) -> i64 {
        self.segments.iter().find(|s| s.x0 <= x && x < s.x1).map_or(0, |s| s.height)
    }

    pub fn max_height(&self) -> i64 {
        self.segments.iter().map(|s| s.height).max().unwrap_or(0)
    }

    /// Highest skyline point over `[x, x + w)`.
    fn resting_height(&self, x: i64, w: i64) -> i64 {
        self.segments
            .iter()
            .filter(|s| s.x1 > x && s.x0 < x + w)
            .map(|s| s.height)
            .max()
            .unwrap_or(0)
    }

    /// Lowest position for a `w x h` box: minimal y, then minimal x.
    /// Candidate x positions are segment starts and right-aligned segment ends.
    /// `height_limit` bounds the top edge when present.
    pub fn find_position(&self, w: i64, h: i64, height_limit: Option<i64>) -> Option<(i64, i64)> {
        if w > self.width || w <= 0 || h <= 0 {
            return None;
        }
        let mut best: Option<(i64, i64)> = None;
        let mut consider = |x: i64| {
            if x < 0 || x + w > self.width {
                return;
            }
            let y = self.resting_height(x, w);
            if height_limit.is_some_and(|lim| y + h > lim) {
                return;
            }
            if best.map_or(true, |(bx, by)| (y, x) < (by, bx)) {
                best = Some((x, y));
            }
        };
        for s in &self.segments {
            consider(s.x0);
            consider(s.x1 - w);
        }
        best
    }

    /// Raise `[x, x + w)` to `top`.
    pub fn raise(&mut self, x: i64, w: i64, top: i64) {
        let x1 = x + w;
        let mut next = Vec::with_capacity(self.segments.len() + 2);
        for s in &self.segments {
            if s.x1 <= x || s.x0 >= x1 {
                next.push(*s);
                continue;
            }
            if s.x0 < x {
                next.push(Segment { x0: s.x0, x1: x, height: s.height });
            }
            if s.x1 > x1 {
                next.push(Segment { x0: x1, x1: s.x1, height: s.height });
            }
        }
        next.push(Segment { x0: x, x1, height: top });
        next.sort_by_key(|s| s.x0);
        self.segments = canonicalize(next);
    }
}

fn canonicalize(segments: Vec<Segment>) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::with_capacity(segments.len());
    for s in segments {
        match out.last_mut() {
            Some(last) if last.height == s.height && last.x1 == s.x0 => last.x1 = s.x1,
            _ => out.push(s),
        }
    }
    out
}
