use std::fmt::Write;

/// Minimal SVG 1.1 writer. Coordinates are printed with two decimals so the
/// output is byte-stable across platforms.
pub(crate) struct Svg {
    body: String,
    width: f64,
    height: f64,
}

pub(crate) fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        Svg {
            body: String::new(),
            width,
            height,
        }
    }

    pub fn raw(&mut self, s: &str) {
        self.body.push_str(s);
        self.body.push('\n');
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#
        );
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="1"/>"#
        );
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="{fill}" fill-opacity="0.6"/>"#
        );
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="1.5"/>"#,
            points(pts)
        );
    }

    pub fn polygon(&mut self, pts: &[(f64, f64)], fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<polygon points="{}" fill="{fill}" fill-opacity="0.2" stroke="none"/>"#,
            points(pts)
        );
    }

    pub fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{}</text>"#,
            escape(s)
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n<rect x=\"0\" y=\"0\" width=\"{w:.0}\" height=\"{h:.0}\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

fn points(pts: &[(f64, f64)]) -> String {
    pts.iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Plot area with linear axes mapping data ranges onto pixel ranges.
pub(crate) struct Frame {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

impl Frame {
    pub fn x(&self, v: f64) -> f64 {
        let (lo, hi) = self.x_range;
        let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
        self.left + t * self.width
    }

    pub fn y(&self, v: f64) -> f64 {
        let (lo, hi) = self.y_range;
        let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
        self.top + (1.0 - t) * self.height
    }

    /// Axes, five ticks per axis, and labels.
    pub fn draw_axes(&self, svg: &mut Svg, x_label: &str, y_label: &str) {
        let bottom = self.top + self.height;
        let right = self.left + self.width;
        svg.line(self.left, bottom, right, bottom, "black");
        svg.line(self.left, self.top, self.left, bottom, "black");
        for k in 0..=4 {
            let t = k as f64 / 4.0;
            let xv = self.x_range.0 + t * (self.x_range.1 - self.x_range.0);
            let yv = self.y_range.0 + t * (self.y_range.1 - self.y_range.0);
            let px = self.x(xv);
            let py = self.y(yv);
            svg.line(px, bottom, px, bottom + 4.0, "black");
            svg.text(px, bottom + 16.0, "middle", &tick(xv));
            svg.line(self.left - 4.0, py, self.left, py, "black");
            svg.text(self.left - 6.0, py + 4.0, "end", &tick(yv));
        }
        svg.text(self.left + self.width / 2.0, bottom + 32.0, "middle", x_label);
        svg.text(self.left, self.top - 8.0, "start", y_label);
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Fixed palette, indexed by series position.
pub(crate) const PALETTE: [&str; 8] = [
    "#4d4d4d", "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
];

/// Bucket colors: easy, medium, hard, impossible.
pub(crate) const BUCKET_COLORS: [&str; 4] = ["#2ca02c", "#bcbd22", "#ff7f0e", "#d62728"];

/// Red (0) to blue (1).
pub(crate) fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (215.0 * (1.0 - t) + 31.0 * t).round() as u8;
    let g = (48.0 * (1.0 - t) + 119.0 * t).round() as u8;
    let b = (39.0 * (1.0 - t) + 180.0 * t).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}
