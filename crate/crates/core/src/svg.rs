//! SVG drawings of layouts and coverage layouts.
//!
//! Grid y grows upward, SVG y downward, so rows are flipped. Sites are
//! shaded by the order in which the route visits them (darker is later),
//! the controller is red, routes are polylines one track wide, the bounding
//! box is a yellow dashed outline and each block's port is a red dot.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::drc::{CoverLayout, Participant};
use crate::geom::{Rect, Side};
use crate::model::{compute_bounding_box, BlockId, Layout, PlacedBlock};

#[derive(Debug, Clone, PartialEq)]
pub struct SvgOptions {
    /// Pixels per track.
    pub scale: f64,
    /// Empty tracks drawn around the bounding box.
    pub padding: i64,
    pub title: Option<String>,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions { scale: 2.0, padding: 4, title: None }
    }
}

struct Canvas {
    out: String,
    frame: Rect,
    s: f64,
}

impl Canvas {
    fn open(frame: Rect, opts: &SvgOptions) -> Self {
        let s = opts.scale;
        let (w, h) = (frame.w as f64 * s, frame.h as f64 * s);
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
        );
        if let Some(t) = &opts.title {
            let t = t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
            let _ = writeln!(out, "<title>{t}</title>");
        }
        let _ = writeln!(out, "<rect class=\"background\" x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
        Canvas { out, frame, s }
    }

    fn x(&self, gx: f64) -> f64 {
        (gx - self.frame.x as f64) * self.s
    }

    fn y(&self, gy: f64) -> f64 {
        (self.frame.y1() as f64 - gy) * self.s
    }

    fn rect(&mut self, class: &str, r: &Rect, style: &str) {
        let (x, y) = (self.x(r.x as f64), self.y(r.y1() as f64));
        let (w, h) = (r.w as f64 * self.s, r.h as f64 * self.s);
        let _ = writeln!(self.out, "<rect class=\"{class}\" x=\"{x}\" y=\"{y}\" width=\"{w}\" height=\"{h}\" {style}/>");
    }

    fn close(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

/// Route order of each site: the index of the first path that ends at it.
fn visit_order(layout: &Layout) -> BTreeMap<BlockId, usize> {
    let mut order = BTreeMap::new();
    for (k, r) in layout.routes.iter().enumerate() {
        for pin in [r.endpoints.0, r.endpoints.1] {
            if let Some(id @ BlockId::Site(_)) = pin.owner {
                order.entry(id).or_insert(k);
            }
        }
    }
    order
}

/// Port midpoint on the block edge, in grid coordinates.
fn port_point(b: &PlacedBlock) -> (f64, f64) {
    let r = &b.rect;
    let along = b.port.offset as f64 + b.port.length as f64 / 2.0;
    match b.port.side {
        Side::North => (r.x as f64 + along, r.y1() as f64),
        Side::South => (r.x as f64 + along, r.y as f64),
        Side::East => (r.x1() as f64, r.y as f64 + along),
        Side::West => (r.x as f64, r.y as f64 + along),
    }
}

pub fn render_svg(layout: &Layout, opts: &SvgOptions) -> String {
    let Ok(bb) = compute_bounding_box(layout) else {
        return Canvas::open(Rect::new(0, 0, 0, 0), opts).close();
    };
    let mut c = Canvas::open(bb.grow(opts.padding), opts);
    let order = visit_order(layout);
    let visits = layout.routes.len().max(1) as f64;
    for b in &layout.sites {
        let fill = match order.get(&b.id) {
            // lightness falls from 85% for the first site to 35% for the last
            Some(&k) => format!("hsl(210,45%,{:.1}%)", 85.0 - 50.0 * k as f64 / visits),
            None => "hsl(0,0%,80%)".to_string(),
        };
        c.rect("site", &b.rect, &format!("fill=\"{fill}\" stroke=\"black\" stroke-width=\"0.5\""));
    }
    if let Some(ctrl) = &layout.controller {
        c.rect("controller", &ctrl.rect, "fill=\"#d62728\" stroke=\"black\" stroke-width=\"0.5\"");
    }
    for r in &layout.routes {
        let mut pts: Vec<(i64, i64)> = Vec::new();
        for cell in &r.cells {
            let p = (cell.x, cell.y);
            // drop the middle point of straight runs
            if pts.len() >= 2 {
                let (a, b) = (pts[pts.len() - 2], pts[pts.len() - 1]);
                if (a.0 == b.0 && b.0 == p.0) || (a.1 == b.1 && b.1 == p.1) {
                    pts.pop();
                }
            }
            pts.push(p);
        }
        let coords: Vec<String> =
            pts.iter().map(|&(x, y)| format!("{},{}", c.x(x as f64 + 0.5), c.y(y as f64 + 0.5))).collect();
        let _ = writeln!(
            c.out,
            "<polyline class=\"route\" points=\"{}\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"{}\" stroke-linejoin=\"round\"/>",
            coords.join(" "),
            c.s
        );
    }
    let dash = 4.0 * c.s;
    c.rect("bbox", &bb, &format!("fill=\"none\" stroke=\"#e6c200\" stroke-width=\"{}\" stroke-dasharray=\"{dash},{dash}\"", c.s));
    let radius = (1.5 * c.s).max(2.0);
    for b in layout.blocks() {
        let (px, py) = port_point(b);
        let _ = writeln!(c.out, "<circle class=\"port\" cx=\"{}\" cy=\"{}\" r=\"{radius}\" fill=\"red\"/>", c.x(px), c.y(py));
    }
    c.close()
}

/// Templates colored by id, tracks gray, and the bounding box dashed.
pub fn render_cover_svg(layout: &CoverLayout, opts: &SvgOptions) -> String {
    let Some(bb) = layout.bbox() else {
        return Canvas::open(Rect::new(0, 0, 0, 0), opts).close();
    };
    let mut c = Canvas::open(bb.grow(opts.padding), opts);
    for comp in &layout.components {
        match comp.part {
            Participant::Template(id) => {
                let hue = (id as u64 * 137) % 360;
                c.rect("template", &comp.rect, &format!("fill=\"hsl({hue},55%,65%)\" stroke=\"black\" stroke-width=\"0.25\""));
            }
            Participant::Track => c.rect("track", &comp.rect, "fill=\"#7f7f7f\""),
        }
    }
    let dash = 4.0 * c.s;
    c.rect("bbox", &bb, &format!("fill=\"none\" stroke=\"#e6c200\" stroke-width=\"{}\" stroke-dasharray=\"{dash},{dash}\"", c.s));
    c.close()
}
