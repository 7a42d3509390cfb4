//! Minimal static SVG line charts.

use std::fmt::Write;

pub struct Series {
    pub name: String,
    pub color: &'static str,
    /// `(x, y)` centre line.
    pub points: Vec<(f64, f64)>,
    /// Optional `(x, lo, hi)` shaded band.
    pub band: Vec<(f64, f64, f64)>,
}

pub struct Reference {
    pub name: String,
    pub color: &'static str,
    pub y: f64,
}

pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub references: Vec<Reference>,
    /// Fixed y range; derived from the data when absent.
    pub y_range: Option<(f64, f64)>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn extent(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.filter(|v| v.is_finite()).fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

impl Chart {
    pub fn render(&self) -> String {
        let xs = extent(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0))).unwrap_or((0.0, 1.0));
        let (mut y0, mut y1) = self.y_range.unwrap_or_else(|| {
            extent(
                self.series
                    .iter()
                    .flat_map(|s| s.points.iter().map(|p| p.1).chain(s.band.iter().flat_map(|b| [b.1, b.2])))
                    .chain(self.references.iter().map(|r| r.y)),
            )
            .unwrap_or((0.0, 1.0))
        });
        if y1 - y0 < 1e-9 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let (x0, x1) = if xs.1 - xs.0 < 1e-9 { (xs.0, xs.0 + 1.0) } else { xs };
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (1.0 - (y.clamp(y0, y1) - y0) / (y1 - y0)) * ph;

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(out, r#"<text x="{}" y="22" font-size="15" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, escape(&self.title));
        let _ = writeln!(
            out,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for i in 0..=4 {
            let fx = i as f64 / 4.0;
            let x = x0 + fx * (x1 - x0);
            let y = y0 + fx * (y1 - y0);
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                sx(x),
                TOP + ph + 16.0,
                tick(x, x1 - x0)
            );
            let _ = writeln!(
                out,
                r##"<line x1="{LEFT}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="#ddd"/>"##,
                LEFT + pw,
                sy(y),
                sy(y)
            );
            let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, LEFT - 6.0, sy(y) + 4.0, tick(y, y1 - y0));
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        let mut legend_y = TOP + 10.0;
        let mut legend = |out: &mut String, name: &str, color: &str, dashed: bool| {
            let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let lx = LEFT + pw + 12.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx}" x2="{}" y1="{legend_y}" y2="{legend_y}" stroke="{color}" stroke-width="2"{dash}/>"#,
                lx + 24.0
            );
            let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 30.0, legend_y + 4.0, escape(name));
            legend_y += 18.0;
        };

        for s in &self.series {
            if !s.band.is_empty() {
                let upper: Vec<String> = s.band.iter().map(|b| format!("{:.1},{:.1}", sx(b.0), sy(b.2))).collect();
                let lower: Vec<String> = s.band.iter().rev().map(|b| format!("{:.1},{:.1}", sx(b.0), sy(b.1))).collect();
                let _ = writeln!(
                    out,
                    r#"<polygon points="{} {}" fill="{}" fill-opacity="0.15" stroke="none"/>"#,
                    upper.join(" "),
                    lower.join(" "),
                    s.color
                );
            }
            let pts: Vec<String> = s.points.iter().map(|p| format!("{:.1},{:.1}", sx(p.0), sy(p.1))).collect();
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                pts.join(" "),
                s.color
            );
            legend(&mut out, &s.name, s.color, false);
        }
        for r in &self.references {
            let _ = writeln!(
                out,
                r#"<line x1="{LEFT}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="{}" stroke-width="1.5" stroke-dasharray="6 4"/>"#,
                LEFT + pw,
                sy(r.y),
                sy(r.y),
                r.color
            );
            legend(&mut out, &r.name, r.color, true);
        }
        out.push_str("</svg>\n");
        out
    }
}

fn tick(v: f64, span: f64) -> String {
    if span >= 20.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_series_and_references() {
        let chart = Chart {
            title: "t <1>".into(),
            x_label: "episode".into(),
            y_label: "value".into(),
            series: vec![Series {
                name: "q".into(),
                color: "blue",
                points: vec![(0.0, 1.0), (1.0, 2.0)],
                band: vec![(0.0, 0.5, 1.5), (1.0, 1.5, 2.5)],
            }],
            references: vec![Reference {
                name: "optimum".into(),
                color: "green",
                y: 1.5,
            }],
            y_range: None,
        };
        let svg = chart.render();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("polyline") && svg.contains("polygon") && svg.contains("t &lt;1&gt;"));
    }
}
