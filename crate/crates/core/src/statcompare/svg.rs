//! Standalone SVG rendering of a critical-difference diagram: a rank axis
//! with the CD bar above it, one elbow label per pipeline (better half on
//! the left) and thick bars joining non-significant groups.

use std::fmt::Write as _;

use super::CdDiagram;

const WIDTH: f64 = 900.0;
const MARGIN: f64 = 200.0;
const AXIS_Y: f64 = 90.0;
const ROW: f64 = 18.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render_cd_svg(d: &CdDiagram) -> String {
    let span = (d.axis_max - d.axis_min).max(1.0);
    let x = |rank: f64| MARGIN + (rank - d.axis_min) / span * (WIDTH - 2.0 * MARGIN);
    let m = d.ticks.len();
    let left = m.div_ceil(2);
    let group_rows = d.groups.len() as f64;
    let label_top = AXIS_Y + 30.0 + group_rows * 8.0;
    let height = label_top + (left.max(m - left) as f64 + 1.0) * ROW + 20.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height:.0}" viewBox="0 0 {WIDTH} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

    // CD bar
    let (c0, c1) = (x(d.axis_min), x(d.axis_min + d.cd));
    let _ = writeln!(s, r#"<line x1="{c0:.2}" y1="30" x2="{c1:.2}" y2="30" stroke="black" stroke-width="2"/>"#);
    for cx in [c0, c1] {
        let _ = writeln!(s, r#"<line x1="{cx:.2}" y1="25" x2="{cx:.2}" y2="35" stroke="black"/>"#);
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="20" text-anchor="middle">CD = {:.3} ({}, alpha = {})</text>"#,
        (c0 + c1) / 2.0,
        d.cd,
        d.formula.name(),
        d.alpha
    );

    // axis with integer ticks
    let _ = writeln!(
        s,
        r#"<line x1="{:.2}" y1="{AXIS_Y}" x2="{:.2}" y2="{AXIS_Y}" stroke="black"/>"#,
        x(d.axis_min),
        x(d.axis_max)
    );
    let mut r = d.axis_min.ceil();
    while r <= d.axis_max {
        let tx = x(r);
        let _ = writeln!(s, r#"<line x1="{tx:.2}" y1="{}" x2="{tx:.2}" y2="{AXIS_Y}" stroke="black"/>"#, AXIS_Y - 6.0);
        let _ = writeln!(s, r#"<text x="{tx:.2}" y="{}" text-anchor="middle">{r}</text>"#, AXIS_Y - 10.0);
        r += 1.0;
    }

    // group bars
    for (g, [a, b]) in d.groups.iter().enumerate() {
        let y = AXIS_Y + 12.0 + g as f64 * 8.0;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black" stroke-width="4"/>"#,
            x(d.ticks[*a].rank) - 3.0,
            x(d.ticks[*b].rank) + 3.0
        );
    }

    // pipeline labels
    for (i, t) in d.ticks.iter().enumerate() {
        let tx = x(t.rank);
        let (row, on_left) = if i < left { (i, true) } else { (m - 1 - i, false) };
        let y = label_top + row as f64 * ROW;
        let end = if on_left { MARGIN - 10.0 } else { WIDTH - MARGIN + 10.0 };
        let _ = writeln!(
            s,
            r#"<polyline points="{tx:.2},{AXIS_Y} {tx:.2},{y:.2} {end:.2},{y:.2}" fill="none" stroke="black"/>"#
        );
        let (anchor, lx) = if on_left { ("end", end - 4.0) } else { ("start", end + 4.0) };
        let _ = writeln!(
            s,
            r#"<text x="{lx:.2}" y="{:.2}" text-anchor="{anchor}">{} ({:.2})</text>"#,
            y + 4.0,
            escape(&t.label),
            t.rank
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::super::{CdFormula, CdTick};
    use super::*;

    #[test]
    fn renders_every_label_and_group() {
        let d = CdDiagram {
            axis_min: 1.0,
            axis_max: 4.0,
            ticks: ["A<1>", "B", "C", "D"]
                .iter()
                .zip([1.2, 1.9, 3.1, 3.8])
                .map(|(l, r)| CdTick {
                    label: l.to_string(),
                    rank: r,
                })
                .collect(),
            cd: 1.0,
            formula: CdFormula::Demsar,
            alpha: 0.05,
            groups: vec![[0, 1], [2, 3]],
        };
        let svg = render_cd_svg(&d);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("A&lt;1&gt; (1.20)"));
        assert!(svg.contains("CD = 1.000 (demsar"));
        assert_eq!(svg.matches("stroke-width=\"4\"").count(), 2);
        assert_eq!(svg.matches("<polyline").count(), 4);
    }
}
