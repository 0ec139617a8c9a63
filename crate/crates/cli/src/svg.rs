//! Static trajectory plot: walls, anchors, the true path and one polyline
//! per estimator.

use std::fmt::Write as _;

use nloskit::{Anchor, Point2d, Wall};

const WIDTH: f64 = 800.0;
const MARGIN_M: f64 = 1.0;
const LEGEND_PX: f64 = 24.0;

pub struct PlotData<'a> {
    pub title: &'a str,
    pub anchors: &'a [Anchor<f64>],
    pub walls: &'a [Wall<f64>],
    pub truth: Option<Vec<Point2d>>,
    pub paths: Vec<(&'a str, Vec<Point2d>)>,
}

fn color(i: usize) -> &'static str {
    ["#d62728", "#ff7f0e", "#1f77b4", "#2ca02c", "#9467bd"][i % 5]
}

struct Frame {
    min_x: f64,
    max_y: f64,
    scale: f64,
}

impl Frame {
    fn px(&self, p: Point2d) -> (f64, f64) {
        ((p.x - self.min_x) * self.scale, (self.max_y - p.y) * self.scale + LEGEND_PX)
    }
}

fn points_attr(frame: &Frame, pts: &[Point2d]) -> String {
    let mut s = String::with_capacity(pts.len() * 16);
    for (i, p) in pts.iter().filter(|p| p.is_finite()).enumerate() {
        let (x, y) = frame.px(*p);
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{x:.2},{y:.2}");
    }
    s
}

pub fn render(data: &PlotData) -> String {
    let mut all: Vec<Point2d> = data.anchors.iter().map(|a| a.position).collect();
    for w in data.walls {
        all.extend(w.corners());
    }
    all.extend(data.truth.iter().flatten().copied());
    // Estimated paths can diverge; keep them out of the extent so the scene stays readable.
    let finite = all.iter().filter(|p| p.is_finite());
    let (mut min_x, mut max_x, mut min_y, mut max_y) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in finite {
        min_x = min_x.min(p.x);
        max_x = max_x.max(p.x);
        min_y = min_y.min(p.y);
        max_y = max_y.max(p.y);
    }
    if min_x > max_x {
        (min_x, max_x, min_y, max_y) = (0.0, 1.0, 0.0, 1.0);
    }
    min_x -= MARGIN_M;
    max_x += MARGIN_M;
    min_y -= MARGIN_M;
    max_y += MARGIN_M;
    let scale = WIDTH / (max_x - min_x);
    let height = (max_y - min_y) * scale + LEGEND_PX;
    let frame = Frame { min_x, max_y, scale };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<clipPath id="scene"><rect x="0" y="{LEGEND_PX}" width="{WIDTH:.0}" height="{:.0}"/></clipPath>"#, height - LEGEND_PX);
    let _ = writeln!(s, r#"<text x="6" y="16" font-family="sans-serif" font-size="13">{}</text>"#, escape(data.title));

    for w in data.walls {
        let _ = writeln!(s, r##"<polygon points="{}" fill="#999999" stroke="#555555"/>"##, points_attr(&frame, &w.corners()));
    }
    if let Some(truth) = &data.truth {
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="black" stroke-width="2.5" stroke-dasharray="6 4"/>"#,
            points_attr(&frame, truth)
        );
    }
    for (i, (_, path)) in data.paths.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.2" clip-path="url(#scene)"/>"#,
            points_attr(&frame, path),
            color(i)
        );
    }
    for a in data.anchors {
        let (x, y) = frame.px(a.position);
        let _ = writeln!(s, r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="black"/>"#, x - 5.0, y - 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{}</text>"#,
            x + 8.0,
            y - 8.0,
            escape(&a.id)
        );
    }

    let mut lx = WIDTH - 10.0;
    let mut legend: Vec<(&str, &str)> = data.paths.iter().enumerate().map(|(i, (n, _))| (*n, color(i))).collect();
    if data.truth.is_some() {
        legend.insert(0, ("truth", "black"));
    }
    for (name, col) in legend.iter().rev() {
        lx -= 10.0 + 8.0 * name.len() as f64 + 22.0;
        let _ = writeln!(s, r#"<line x1="{lx:.1}" y1="12" x2="{:.1}" y2="12" stroke="{col}" stroke-width="2"/>"#, lx + 18.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="16" font-family="sans-serif" font-size="12">{}</text>"#, lx + 22.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_all_layers() {
        let anchors = vec![Anchor { id: "A<1>".into(), position: Point2d::new(0.0, 0.0) }];
        let walls = vec![Wall::new(Point2d::new(5.0, 5.0), 3.0, 0.5, 0.0, 6.0).unwrap()];
        let svg = render(&PlotData {
            title: "t",
            anchors: &anchors,
            walls: &walls,
            truth: Some(vec![Point2d::new(0.0, 3.0), Point2d::new(10.0, 3.0)]),
            paths: vec![("LS", vec![Point2d::new(0.0, 3.1), Point2d::new(f64::NAN, 0.0)])],
        });
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polygon").count(), 1);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("A&lt;1&gt;"));
        assert!(!svg.contains("NaN"));
    }
}
