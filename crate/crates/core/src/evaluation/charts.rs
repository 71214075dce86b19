//! Plain SVG bar and scatter charts with fixed number formatting, so the
//! same data always renders to the same bytes.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 48.0;
const BOTTOM: f64 = 72.0;
const PALETTE: [&str; 6] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#b07aa1",
];

pub struct BarGroup {
    pub label: String,
    /// `(series name, value)`; series are colored by position.
    pub bars: Vec<(String, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    );
}

fn y_axis(out: &mut String, label: &str, lo: f64, hi: f64) {
    let plot_h = HEIGHT - TOP - BOTTOM;
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let y = TOP + plot_h * (1.0 - i as f64 / 4.0);
        let _ = writeln!(
            out,
            "<line x1=\"{LEFT:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{v:.1}</text>",
            WIDTH - RIGHT,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        "<text transform=\"translate(16 {:.1}) rotate(-90)\" text-anchor=\"middle\">{}</text>",
        TOP + plot_h / 2.0,
        escape(label)
    );
}

/// Grouped vertical bars on a `[0, y_max]` axis; values are clamped to it.
pub fn bar_chart_svg(title: &str, y_label: &str, groups: &[BarGroup], y_max: f64) -> String {
    let mut out = String::new();
    header(&mut out, title);
    y_axis(&mut out, y_label, 0.0, y_max);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let group_w = plot_w / groups.len().max(1) as f64;
    let mut series: Vec<&str> = Vec::new();
    for (g, group) in groups.iter().enumerate() {
        let n = group.bars.len().max(1) as f64;
        let bar_w = group_w * 0.8 / n;
        let x0 = LEFT + g as f64 * group_w + group_w * 0.1;
        for (b, (name, value)) in group.bars.iter().enumerate() {
            let pos = match series.iter().position(|s| s == name) {
                Some(p) => p,
                None => {
                    series.push(name);
                    series.len() - 1
                }
            };
            let h = plot_h * (value.clamp(0.0, y_max) / y_max);
            let x = x0 + b as f64 * bar_w;
            let _ = writeln!(
                out,
                "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{h:.1}\" fill=\"{}\"/>\n<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"10\">{value:.1}</text>",
                TOP + plot_h - h,
                bar_w * 0.92,
                PALETTE[pos % PALETTE.len()],
                x + bar_w * 0.46,
                TOP + plot_h - h - 3.0
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            LEFT + (g as f64 + 0.5) * group_w,
            HEIGHT - BOTTOM + 18.0,
            escape(&group.label)
        );
    }
    for (i, name) in series.iter().enumerate() {
        let x = LEFT + i as f64 * 100.0;
        let y = HEIGHT - 24.0;
        let _ = writeln!(
            out,
            "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n<text x=\"{:.1}\" y=\"{y:.1}\">{}</text>",
            y - 10.0,
            PALETTE[i % PALETTE.len()],
            x + 16.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Labeled points; both axes span the data range with a small margin.
pub fn scatter_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    points: &[(String, f64, f64)],
) -> String {
    let span = |vals: Vec<f64>| {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            return (0.0, 1.0);
        }
        let pad = ((hi - lo) * 0.1).max(1e-3);
        (lo - pad, hi + pad)
    };
    let (x_lo, x_hi) = span(points.iter().map(|p| p.1).collect());
    let (y_lo, y_hi) = span(points.iter().map(|p| p.2).collect());
    let mut out = String::new();
    header(&mut out, title);
    y_axis(&mut out, y_label, y_lo, y_hi);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    for i in 0..=4 {
        let v = x_lo + (x_hi - x_lo) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{v:.3}</text>",
            LEFT + plot_w * i as f64 / 4.0,
            HEIGHT - BOTTOM + 18.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        LEFT + plot_w / 2.0,
        HEIGHT - 24.0,
        escape(x_label)
    );
    for (label, x, y) in points {
        let px = LEFT + plot_w * (x - x_lo) / (x_hi - x_lo);
        let py = TOP + plot_h * (1.0 - (y - y_lo) / (y_hi - y_lo));
        let _ = writeln!(
            out,
            "<circle cx=\"{px:.1}\" cy=\"{py:.1}\" r=\"5\" fill=\"{}\"/>\n<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\">{}</text>",
            PALETTE[0],
            px + 7.0,
            py - 7.0,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}
