//! SVG line charts of a score tensor: one panel per metric, one line per classifier.

use std::fmt::Write;

use driftlab::datamodel::ScoreTensor;

const WIDTH: f64 = 760.0;
const PANEL_HEIGHT: f64 = 240.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 32.0;
const BOTTOM: f64 = 40.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Roughly `target` round tick positions in `[1, max]`.
fn ticks(max: usize, target: usize) -> Vec<usize> {
    if max <= 1 {
        return vec![1];
    }
    let raw = max as f64 / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let step = (step as usize).max(1);
    let mut out: Vec<usize> = (0..=max).step_by(step).filter(|&t| t >= 1).collect();
    if out.first() != Some(&1) {
        out.insert(0, 1);
    }
    out
}

/// x axis is the stream chunk index; step `s` of the tensor is chunk `s + 1`.
pub fn render(tensor: &ScoreTensor) -> String {
    let (n_c, n_s, n_m) = tensor.shape();
    let height = PANEL_HEIGHT * n_m.max(1) as f64;
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = PANEL_HEIGHT - TOP - BOTTOM;
    let last_chunk = n_s.max(1);
    let x = |chunk: usize| LEFT + plot_w * (chunk as f64 - 1.0) / ((last_chunk as f64 - 1.0).max(1.0));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for m in 0..n_m {
        let top = m as f64 * PANEL_HEIGHT + TOP;
        let y = |v: f64| top + plot_h * (1.0 - v.clamp(0.0, 1.0));
        let _ = writeln!(svg, r#"<g class="panel" id="panel-{m}">"#);
        let _ = writeln!(
            svg,
            r#"<text x="{LEFT}" y="{:.1}" font-size="13" font-weight="bold">{}</text>"#,
            top - 10.0,
            escape(&tensor.metric_names()[m])
        );
        for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let yy = y(t);
            let _ = writeln!(
                svg,
                r##"<line x1="{LEFT}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="#e0e0e0"/><text x="{:.1}" y="{:.1}" text-anchor="end">{t:.2}</text>"##,
                LEFT + plot_w,
                LEFT - 6.0,
                yy + 4.0
            );
        }
        for t in ticks(last_chunk, 8) {
            let xx = x(t);
            let _ = writeln!(
                svg,
                r#"<line x1="{xx:.1}" y1="{:.1}" x2="{xx:.1}" y2="{:.1}" stroke="black"/><text x="{xx:.1}" y="{:.1}" text-anchor="middle">{t}</text>"#,
                top + plot_h,
                top + plot_h + 4.0,
                top + plot_h + 16.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<rect x="{LEFT}" y="{top:.1}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">chunk</text>"#,
            LEFT + plot_w / 2.0,
            top + plot_h + 32.0
        );
        for c in 0..n_c {
            let color = COLORS[c % COLORS.len()];
            let points: Vec<String> =
                tensor.series(c, m).iter().enumerate().map(|(s, v)| format!("{:.2},{:.2}", x(s + 1), y(*v))).collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                points.join(" ")
            );
            let ly = top + 12.0 + 16.0 * c as f64;
            let lx = LEFT + plot_w + 14.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                lx + 18.0,
                lx + 24.0,
                ly + 4.0,
                escape(&tensor.classifier_names()[c])
            );
        }
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_panel_per_metric_one_line_per_classifier() {
        let mut t = ScoreTensor::zeros(vec!["a".into(), "b<c".into()], 99, vec!["accuracy".into(), "precision".into()]);
        t.set(1, 3, 1, 0.7);
        let svg = render(&t);
        assert_eq!(svg.matches("class=\"panel\"").count(), 2);
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.contains("b&lt;c"));
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn tick_positions() {
        assert_eq!(ticks(99, 8), vec![1, 20, 40, 60, 80]);
        assert_eq!(ticks(99, 10), vec![1, 10, 20, 30, 40, 50, 60, 70, 80, 90]);
        assert_eq!(ticks(1, 8), vec![1]);
        assert_eq!(ticks(5, 8), vec![1, 2, 3, 4, 5]);
    }
}
