//! HTML heatmaps of word relevance and SVG plots of experiment output.
//! All renderers are pure string builders; equal input gives equal bytes.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::error::{Error, Result};
use crate::experiments::DeletionCurve;

const PALETTE: [&str; 10] =
    ["#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub tokens: Vec<String>,
    pub relevances: Vec<f64>,
    pub target_class: String,
    pub method: String,
    pub title: String,
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Background color for relevance `r` under max-abs normalization `scale`:
/// white to red for positive, white to blue for negative.
pub fn relevance_color(r: f64, scale: f64) -> (u8, u8, u8) {
    if scale == 0.0 || r == 0.0 || !r.is_finite() {
        return (255, 255, 255);
    }
    let intensity = (r.abs() / scale).min(1.0);
    let fade = (255.0 * (1.0 - intensity)).round() as u8;
    if r > 0.0 {
        (255, fade, fade)
    } else {
        (fade, fade, 255)
    }
}

pub fn render_heatmap(heatmap: &Heatmap) -> Result<String> {
    if heatmap.tokens.len() != heatmap.relevances.len() {
        return Err(Error::LengthMismatch { tokens: heatmap.tokens.len(), relevances: heatmap.relevances.len() });
    }
    let scale = heatmap.relevances.iter().filter(|r| r.is_finite()).fold(0.0f64, |m, r| m.max(r.abs()));
    let mut html = String::new();
    let _ = write!(
        html,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n</head>\n\
         <body style=\"font-family:Georgia,serif;max-width:48em;margin:2em auto;line-height:1.9\">\n\
         <p class=\"legend\" style=\"font-family:sans-serif;font-size:90%\">{} relevance for target class <b>{}</b> \
         (red: positive, blue: negative)</p>\n<p class=\"text\">\n",
        escape(&heatmap.title),
        escape(&heatmap.method),
        escape(&heatmap.target_class),
    );
    for (token, &r) in heatmap.tokens.iter().zip(&heatmap.relevances) {
        let (red, green, blue) = relevance_color(r, scale);
        let _ = writeln!(
            html,
            "<span style=\"background-color:rgb({red},{green},{blue});padding:0 2px\">{}</span>",
            escape(token)
        );
    }
    html.push_str("</p>\n</body>\n</html>\n");
    Ok(html)
}

fn svg_header(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        out,
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
         width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>"
    );
}

/// Accuracy versus number of deleted words, one polyline per curve.
pub fn render_curves(curves: &[DeletionCurve], title: &str) -> Result<String> {
    let first = curves.first().ok_or(Error::EmptyInput)?;
    let horizon = first.horizon();
    if let Some(c) = curves.iter().find(|c| c.horizon() != horizon) {
        return Err(Error::DimMismatch { expected: horizon + 1, found: c.accuracies.len() });
    }
    let (width, height) = (640.0, 420.0);
    let (left, right, top, bottom) = (60.0, 170.0, 40.0, 50.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;
    let x_of = |k: usize| left + if horizon == 0 { 0.0 } else { plot_w * k as f64 / horizon as f64 };
    let y_of = |acc: f64| top + plot_h * (1.0 - acc.clamp(0.0, 1.0));

    let mut svg = String::new();
    svg_header(&mut svg, width, height);
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        left + plot_w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        "<g stroke=\"black\" fill=\"none\"><line x1=\"{left:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\"/><line x1=\"{left:.2}\" y1=\"{top:.2}\" x2=\"{left:.2}\" y2=\"{:.2}\"/></g>",
        top + plot_h,
        left + plot_w,
        top + plot_h,
        top + plot_h
    );
    for tick in 0..=5 {
        let acc = tick as f64 / 5.0;
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{acc:.1}</text>",
            left - 6.0,
            y_of(acc) + 4.0
        );
    }
    let step = (horizon / 5).max(1);
    for k in (0..=horizon).step_by(step) {
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{k}</text>",
            x_of(k),
            top + plot_h + 16.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">number of deleted words</text>",
        left + plot_w / 2.0,
        height - 10.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"14\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.2})\">accuracy</text>",
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );

    for (i, curve) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> =
            curve.accuracies.iter().enumerate().map(|(k, &acc)| format!("{:.2},{:.2}", x_of(k), y_of(acc))).collect();
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
            points.join(" ")
        );
        let ly = top + 10.0 + 20.0 * i as f64;
        let lx = left + plot_w + 15.0;
        let _ = writeln!(
            svg,
            "<g class=\"legend\"><line x1=\"{lx:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/><text x=\"{:.2}\" y=\"{:.2}\">{}</text></g>",
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&curve.label())
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// One 2-D projection, e.g. one document-vector scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPanel {
    pub title: String,
    pub points: Vec<[f64; 2]>,
    pub groups: Vec<String>,
}

/// Data window shared by every panel: a square around all points so that
/// both axes and all panels use the same scale.
fn shared_window(panels: &[ScatterPanel]) -> ([f64; 2], f64) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in panels.iter().flat_map(|p| &p.points) {
        for axis in 0..2 {
            lo[axis] = lo[axis].min(p[axis]);
            hi[axis] = hi[axis].max(p[axis]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let span = if span > 0.0 { span * 1.1 } else { 1.0 };
    ([(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0], span)
}

pub fn render_scatter(panels: &[ScatterPanel]) -> Result<String> {
    if panels.iter().all(|p| p.points.is_empty()) {
        return Err(Error::EmptyInput);
    }
    if let Some(p) = panels.iter().find(|p| p.points.len() != p.groups.len()) {
        return Err(Error::LengthMismatch { tokens: p.points.len(), relevances: p.groups.len() });
    }
    let colors: BTreeMap<&str, &str> = {
        let mut names: Vec<&str> = panels.iter().flat_map(|p| p.groups.iter().map(String::as_str)).collect();
        names.sort_unstable();
        names.dedup();
        names.into_iter().enumerate().map(|(i, g)| (g, PALETTE[i % PALETTE.len()])).collect()
    };
    let (center, span) = shared_window(panels);
    let (x_min, x_max) = (center[0] - span / 2.0, center[0] + span / 2.0);
    let (y_min, y_max) = (center[1] - span / 2.0, center[1] + span / 2.0);

    let size = 260.0;
    let gap = 30.0;
    let legend_h = 20.0 * colors.len() as f64 + 20.0;
    let width = gap + panels.len() as f64 * (size + gap);
    let height = 40.0 + size + 20.0 + legend_h;
    let mut svg = String::new();
    svg_header(&mut svg, width, height);

    for (i, panel) in panels.iter().enumerate() {
        let ox = gap + i as f64 * (size + gap);
        let oy = 40.0;
        let _ = writeln!(
            svg,
            "<g class=\"panel\" data-x-range=\"{x_min:.6} {x_max:.6}\" data-y-range=\"{y_min:.6} {y_max:.6}\">\n\
             <text x=\"{:.2}\" y=\"28\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n\
             <rect x=\"{ox:.2}\" y=\"{oy:.2}\" width=\"{size:.2}\" height=\"{size:.2}\" fill=\"none\" stroke=\"black\"/>",
            ox + size / 2.0,
            escape(&panel.title)
        );
        for (p, group) in panel.points.iter().zip(&panel.groups) {
            let cx = ox + size * (p[0] - x_min) / span;
            let cy = oy + size * (1.0 - (p[1] - y_min) / span);
            let _ = writeln!(
                svg,
                "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"2.5\" fill=\"{}\" fill-opacity=\"0.7\"/>",
                colors[group.as_str()]
            );
        }
        svg.push_str("</g>\n");
    }
    for (i, (group, color)) in colors.iter().enumerate() {
        let ly = 40.0 + size + 30.0 + 20.0 * i as f64;
        let _ = writeln!(
            svg,
            "<g class=\"legend\"><circle cx=\"{:.2}\" cy=\"{ly:.2}\" r=\"5\" fill=\"{color}\"/><text x=\"{:.2}\" y=\"{:.2}\">{}</text></g>",
            gap + 5.0,
            gap + 16.0,
            ly + 4.0,
            escape(group)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
