//! Plain SVG renderings of the audit outputs. Coordinates are written with
//! two decimals so files diff cleanly between runs.

use std::fmt::Write;

use crate::analysis::{RankBand, RankShift, SobolEstimate};

const FONT: &str = "font-family=\"sans-serif\"";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn open(width: f64, height: f64, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"20\" {FONT} font-size=\"14\" text-anchor=\"middle\">{}</text>",
        width / 2.0,
        escape(title)
    );
    s
}

/// Diverging blue–white–red colour for a correlation in [-1, 1].
fn diverging(rho: f64) -> String {
    let r = rho.clamp(-1.0, 1.0);
    let (red, green, blue) = if r >= 0.0 {
        (255.0, 255.0 * (1.0 - r), 255.0 * (1.0 - r))
    } else {
        (255.0 * (1.0 + r), 255.0 * (1.0 + r), 255.0)
    };
    format!("rgb({:.0},{:.0},{:.0})", red, green, blue)
}

/// Correlation matrix heatmap with row and column labels.
pub fn heatmap(title: &str, names: &[String], matrix: &[Vec<f64>]) -> String {
    let n = names.len();
    let cell = if n > 30 { 10.0 } else { 24.0 };
    let margin = 110.0;
    let size = margin + cell * n as f64 + 20.0;
    let mut s = open(size, size + 20.0, title);
    let label_size = (cell * 0.8).min(10.0);
    for (i, name) in names.iter().enumerate() {
        let y = margin + cell * (i as f64 + 0.5);
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{y:.2}\" {FONT} font-size=\"{label_size:.1}\" text-anchor=\"end\" dominant-baseline=\"middle\">{}</text>",
            margin - 4.0,
            escape(name)
        );
        let x = margin + cell * (i as f64 + 0.5);
        let _ = writeln!(
            s,
            "<text x=\"{x:.2}\" y=\"{:.2}\" {FONT} font-size=\"{label_size:.1}\" transform=\"rotate(-60 {x:.2} {:.2})\">{}</text>",
            margin - 4.0,
            margin - 4.0,
            escape(name)
        );
    }
    for (i, row) in matrix.iter().enumerate() {
        for (j, &rho) in row.iter().enumerate() {
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{cell:.2}\" height=\"{cell:.2}\" fill=\"{}\"><title>{} / {}: {:.3}</title></rect>",
                margin + cell * j as f64,
                margin + cell * i as f64,
                diverging(rho),
                escape(&names[i]),
                escape(&names[j]),
                rho
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Rank bands ordered by reference rank: a bar from p5 to p95, a dot at the
/// median and a cross at the reference rank.
pub fn rank_bands(title: &str, bands: &[RankBand]) -> String {
    let mut order: Vec<&RankBand> = bands.iter().collect();
    order.sort_by_key(|b| b.reference);
    let n = order.len().max(1) as f64;
    let (left, top, plot_w, plot_h) = (50.0, 40.0, 4.0 * n + 20.0, 400.0);
    let mut s = open(left + plot_w + 20.0, top + plot_h + 40.0, title);
    let y = |rank: f64| top + plot_h * (rank - 1.0) / (n - 1.0).max(1.0);
    let _ = writeln!(
        s,
        "<line x1=\"{left:.2}\" y1=\"{top:.2}\" x2=\"{left:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
        top + plot_h
    );
    let _ = writeln!(
        s,
        "<text x=\"15\" y=\"{:.2}\" {FONT} font-size=\"11\" transform=\"rotate(-90 15 {:.2})\" text-anchor=\"middle\">rank</text>",
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );
    for (k, b) in order.iter().enumerate() {
        let x = left + 10.0 + 4.0 * k as f64;
        let _ = writeln!(
            s,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"steelblue\" stroke-width=\"2\"><title>{}</title></line>",
            y(b.p5),
            y(b.p95),
            escape(&b.unit)
        );
        let _ = writeln!(
            s,
            "<circle cx=\"{x:.2}\" cy=\"{:.2}\" r=\"1.5\" fill=\"black\"/>",
            y(b.median)
        );
        let ry = y(b.reference as f64);
        let _ = writeln!(
            s,
            "<path d=\"M{:.2} {:.2} L{:.2} {:.2} M{:.2} {:.2} L{:.2} {:.2}\" stroke=\"firebrick\" stroke-width=\"0.8\"/>",
            x - 1.5,
            ry - 1.5,
            x + 1.5,
            ry + 1.5,
            x - 1.5,
            ry + 1.5,
            x + 1.5,
            ry - 1.5
        );
    }
    s.push_str("</svg>\n");
    s
}

fn bars(title: &str, labels: &[String], series: &[(&str, &str, Vec<f64>)], max: f64) -> String {
    let groups = labels.len().max(1) as f64;
    let per = series.len().max(1) as f64;
    let (left, top, plot_h) = (60.0, 40.0, 300.0);
    let group_w = 14.0 * per + 12.0;
    let plot_w = group_w * groups;
    let mut s = open(left + plot_w + 140.0, top + plot_h + 120.0, title);
    let _ = writeln!(
        s,
        "<line x1=\"{left:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
        top + plot_h,
        left + plot_w,
        top + plot_h
    );
    let max = if max > 0.0 { max } else { 1.0 };
    for tick in 0..=4 {
        let v = max * tick as f64 / 4.0;
        let y = top + plot_h * (1.0 - v / max);
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{y:.2}\" {FONT} font-size=\"10\" text-anchor=\"end\" dominant-baseline=\"middle\">{v:.2}</text>",
            left - 4.0
        );
    }
    for (g, label) in labels.iter().enumerate() {
        let gx = left + group_w * g as f64 + 6.0;
        for (k, (_, colour, values)) in series.iter().enumerate() {
            let v = values[g].max(0.0);
            let h = plot_h * v / max;
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"12\" height=\"{h:.2}\" fill=\"{colour}\"><title>{}: {v:.4}</title></rect>",
                gx + 14.0 * k as f64,
                top + plot_h - h,
                escape(label)
            );
        }
        let lx = gx + 7.0 * per;
        let ly = top + plot_h + 12.0;
        let _ = writeln!(
            s,
            "<text x=\"{lx:.2}\" y=\"{ly:.2}\" {FONT} font-size=\"10\" transform=\"rotate(45 {lx:.2} {ly:.2})\">{}</text>",
            escape(label)
        );
    }
    for (k, (name, colour, _)) in series.iter().enumerate() {
        let y = top + 16.0 * k as f64;
        let x = left + plot_w + 20.0;
        let _ = writeln!(
            s,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"10\" height=\"10\" fill=\"{colour}\"/>"
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" {FONT} font-size=\"11\">{}</text>",
            x + 14.0,
            y + 9.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// First-order and total indices per factor. Undefined indices draw as 0.
pub fn sobol_bars(title: &str, estimates: &[SobolEstimate]) -> String {
    let labels: Vec<String> = estimates.iter().map(|e| e.factor.clone()).collect();
    let first: Vec<f64> = estimates.iter().map(|e| e.s_first.unwrap_or(0.0)).collect();
    let total: Vec<f64> = estimates.iter().map(|e| e.s_total.unwrap_or(0.0)).collect();
    let max = first.iter().chain(&total).copied().fold(0.0, f64::max).max(1e-9);
    bars(
        title,
        &labels,
        &[("first order", "steelblue", first), ("total", "darkorange", total)],
        max,
    )
}

/// Mean absolute rank shift per removed node, in the order given.
pub fn rank_shift_bars(title: &str, shifts: &[RankShift]) -> String {
    let labels: Vec<String> = shifts.iter().map(|r| r.removed.clone()).collect();
    let values: Vec<f64> = shifts.iter().map(|r| r.mean_abs_shift).collect();
    let max = values.iter().copied().fold(0.0, f64::max);
    bars(title, &labels, &[("mean |rank shift|", "seagreen", values)], max)
}
