//! Static SVG renderings of the explanation tables.
//!
//! Every number that ends up in a document goes through a fixed-precision
//! formatter, so the same input always yields the same bytes.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use clusterlens_core::explain::{
    AttentionFeatureRecord, CorrelationProfile, FeatureAttentionHeatmap, IndividualSummary,
};

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("nothing to plot: {0}")]
    EmptyArtifact(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    CorrBars,
    Heatmap,
    Scatter,
    Summary,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::CorrBars => "corr_bars",
            PlotKind::Heatmap => "heatmap",
            PlotKind::Scatter => "scatter",
            PlotKind::Summary => "summary",
        }
    }
}

/// An explanation output paired with the labels needed to draw it.
#[derive(Debug, Clone, Copy)]
pub enum Artifact<'a> {
    CorrBars {
        profile: &'a CorrelationProfile,
        feature_names: &'a [String],
    },
    Heatmap {
        heatmap: &'a FeatureAttentionHeatmap,
        feature_names: &'a [String],
    },
    Scatter {
        records: &'a [AttentionFeatureRecord],
        feature_name: &'a str,
    },
    Summary {
        summary: &'a IndividualSummary,
        feature_names: &'a [String],
        /// Highlighted time-points per feature.
        top_n: usize,
    },
}

impl Artifact<'_> {
    pub fn kind(&self) -> PlotKind {
        match self {
            Artifact::CorrBars { .. } => PlotKind::CorrBars,
            Artifact::Heatmap { .. } => PlotKind::Heatmap,
            Artifact::Scatter { .. } => PlotKind::Scatter,
            Artifact::Summary { .. } => PlotKind::Summary,
        }
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

const FONT: &str = "font-family=\"sans-serif\" font-size=\"11\"";

pub fn render_svg(artifact: &Artifact) -> Result<String, RenderError> {
    match *artifact {
        Artifact::CorrBars {
            profile,
            feature_names,
        } => corr_bars(profile, feature_names),
        Artifact::Heatmap {
            heatmap,
            feature_names,
        } => heatmap_svg(heatmap, feature_names),
        Artifact::Scatter {
            records,
            feature_name,
        } => scatter(records, feature_name),
        Artifact::Summary {
            summary,
            feature_names,
            top_n,
        } => summary_svg(summary, feature_names, top_n),
    }
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
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

fn f(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

struct Doc {
    body: String,
}

impl Doc {
    fn new(width: f64, height: f64, title: &str) -> Self {
        let mut body = String::new();
        body.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        let _ = writeln!(
            body,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" {FONT}>",
            w = f(width),
            h = f(height)
        );
        let _ = writeln!(body, "<title>{}</title>", escape(title));
        let _ = writeln!(
            body,
            "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>",
            f(width),
            f(height)
        );
        Doc { body }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, class: &str) {
        let _ = writeln!(
            self.body,
            "<line class=\"{class}\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\" stroke-width=\"1\"/>",
            f(x1),
            f(y1),
            f(x2),
            f(y2)
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, extra: &str, s: &str) {
        let _ = writeln!(
            self.body,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"{anchor}\"{extra}>{}</text>",
            f(x),
            f(y),
            escape(s)
        );
    }

    fn raw(&mut self, s: String) {
        self.body.push_str(&s);
        self.body.push('\n');
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn corr_bars(p: &CorrelationProfile, names: &[String]) -> Result<String, RenderError> {
    if p.r.is_empty() {
        return Err(RenderError::EmptyArtifact("correlation profile has no features"));
    }
    let (left, top, bar_w, plot_h) = (60.0, 40.0, 28.0, 240.0);
    let width = left + bar_w * p.r.len() as f64 + 30.0;
    let height = top + plot_h + 110.0;
    let mut doc = Doc::new(
        width,
        height,
        &format!("Attention-feature correlation, cluster {} (model {})", p.cluster, p.model),
    );
    doc.text(width / 2.0, 20.0, "middle", "", &format!("Cluster {}: mean correlation with attention", p.cluster));
    let zero_y = top + plot_h / 2.0;
    let y_of = |r: f64| zero_y - r.clamp(-1.0, 1.0) * plot_h / 2.0;
    doc.line(left, top, left, top + plot_h, "axis");
    doc.line(left, zero_y, width - 30.0, zero_y, "axis");
    for tick in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let y = y_of(tick);
        doc.line(left - 4.0, y, left, y, "tick");
        doc.text(left - 7.0, y + 4.0, "end", "", &format!("{tick:.1}"));
    }
    for (i, &r) in p.r.iter().enumerate() {
        let x = left + bar_w * i as f64 + 4.0;
        let (y, h) = if r >= 0.0 { (y_of(r), zero_y - y_of(r)) } else { (zero_y, y_of(r) - zero_y) };
        let fill = if r >= 0.0 { PALETTE[0] } else { PALETTE[1] };
        doc.raw(format!(
            "<rect class=\"bar\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\"/>",
            f(x),
            f(y),
            f(bar_w - 8.0),
            f(h)
        ));
        let cx = x + (bar_w - 8.0) / 2.0;
        let ly = top + plot_h + 12.0;
        doc.text(
            cx,
            ly,
            "end",
            &format!(" transform=\"rotate(-60 {} {})\"", f(cx), f(ly)),
            names.get(i).map(String::as_str).unwrap_or("?"),
        );
    }
    Ok(doc.finish())
}

fn cell_color(t: f64) -> String {
    // white to dark blue
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(255.0, 8.0), lerp(255.0, 48.0), lerp(255.0, 107.0))
}

fn heatmap_svg(h: &FeatureAttentionHeatmap, names: &[String]) -> Result<String, RenderError> {
    let v = h.matrix.rows();
    if v == 0 || h.matrix.cols() == 0 {
        return Err(RenderError::EmptyArtifact("heatmap has no cells"));
    }
    let (left, top, cell) = (110.0, 50.0, 40.0);
    let width = left + cell * h.matrix.cols() as f64 + 20.0;
    let height = top + cell * v as f64 + 110.0;
    let mut doc = Doc::new(
        width,
        height,
        &format!("Feature attention, cluster {} (model {})", h.cluster, h.model),
    );
    doc.text(width / 2.0, 20.0, "middle", "", &format!("Cluster {}: feature-to-feature attention", h.cluster));
    let vals = h.matrix.as_slice();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    for i in 0..v {
        for j in 0..h.matrix.cols() {
            let x = left + cell * j as f64;
            let y = top + cell * i as f64;
            let val = h.matrix[(i, j)];
            let t = (val - lo) / span;
            doc.raw(format!(
                "<rect class=\"cell\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"white\"/>",
                f(x),
                f(y),
                f(cell),
                f(cell),
                cell_color(t)
            ));
            let ink = if t > 0.55 { "white" } else { "black" };
            doc.text(
                x + cell / 2.0,
                y + cell / 2.0 + 4.0,
                "middle",
                &format!(" font-size=\"9\" fill=\"{ink}\""),
                &format!("{val:.2}"),
            );
        }
    }
    for (i, name) in names.iter().enumerate().take(v) {
        let y = top + cell * i as f64 + cell / 2.0 + 4.0;
        doc.text(left - 6.0, y, "end", " class=\"ylabel\"", name);
    }
    for (j, name) in names.iter().enumerate().take(h.matrix.cols()) {
        let x = left + cell * j as f64 + cell / 2.0;
        let y = top + cell * v as f64 + 12.0;
        doc.text(
            x,
            y,
            "end",
            &format!(" class=\"xlabel\" transform=\"rotate(-60 {} {})\"", f(x), f(y)),
            name,
        );
    }
    Ok(doc.finish())
}

fn nice_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in values.filter(|x| x.is_finite()) {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn scatter(records: &[AttentionFeatureRecord], feature: &str) -> Result<String, RenderError> {
    if records.is_empty() {
        return Err(RenderError::EmptyArtifact("scatter has no records"));
    }
    let (left, top, pw, ph) = (70.0, 40.0, 380.0, 300.0);
    let width = left + pw + 130.0;
    let height = top + ph + 60.0;
    let mut doc = Doc::new(width, height, &format!("Attention focus against mean {feature}"));
    doc.text(left + pw / 2.0, 20.0, "middle", "", &format!("Attention focus vs mean {feature}"));
    let (x0, x1) = nice_range(records.iter().map(|r| r.mean_feature));
    let (y0, y1) = nice_range(records.iter().map(|r| r.attention_focus));
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;
    doc.line(left, top + ph, left + pw, top + ph, "axis");
    doc.line(left, top, left, top + ph, "axis");
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        doc.line(sx(xv), top + ph, sx(xv), top + ph + 4.0, "tick");
        doc.text(sx(xv), top + ph + 16.0, "middle", "", &f(xv));
        doc.line(left - 4.0, sy(yv), left, sy(yv), "tick");
        doc.text(left - 7.0, sy(yv) + 4.0, "end", "", &f(yv));
    }
    doc.text(left + pw / 2.0, height - 12.0, "middle", "", &format!("mean {feature}"));
    doc.text(
        16.0,
        top + ph / 2.0,
        "middle",
        &format!(" transform=\"rotate(-90 16 {})\"", f(top + ph / 2.0)),
        "attention focus",
    );
    for r in records {
        let color = PALETTE[r.true_cluster % PALETTE.len()];
        // hollow markers for the model's negative class
        let fill = if r.class == 1 { color } else { "none" };
        doc.raw(format!(
            "<circle class=\"point\" cx=\"{}\" cy=\"{}\" r=\"3.5\" fill=\"{fill}\" stroke=\"{color}\"/>",
            f(sx(r.mean_feature)),
            f(sy(r.attention_focus))
        ));
    }
    let clusters: BTreeSet<usize> = records.iter().map(|r| r.true_cluster).collect();
    for (row, c) in clusters.iter().enumerate() {
        let y = top + 10.0 + 18.0 * row as f64;
        doc.raw(format!(
            "<g class=\"legend-entry\"><circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{}\"/></g>",
            f(left + pw + 20.0),
            f(y),
            PALETTE[c % PALETTE.len()]
        ));
        doc.text(left + pw + 30.0, y + 4.0, "start", "", &format!("cluster {c}"));
    }
    Ok(doc.finish())
}

fn summary_svg(s: &IndividualSummary, names: &[String], top_n: usize) -> Result<String, RenderError> {
    if s.features.is_empty() || s.features.iter().all(Vec::is_empty) {
        return Err(RenderError::EmptyArtifact("summary has no time-points"));
    }
    let (left, top, pw, row_h) = (110.0, 50.0, 520.0, 34.0);
    let v = s.features.len();
    let width = left + pw + 20.0;
    let height = top + row_h * (v as f64 + 1.0) + 40.0;
    let mut doc = Doc::new(width, height, &format!("Attention summary for {}", s.id));
    doc.text(
        width / 2.0,
        20.0,
        "middle",
        "",
        &format!("{} (cluster {}, model {})", s.id, s.cluster, s.model),
    );
    let t_min = s.features[0].iter().map(|e| e.time_index).min().unwrap_or(0) as f64;
    let t_max = s.features[0].iter().map(|e| e.time_index).max().unwrap_or(0) as f64;
    let sx = |t: usize| left + if t_max > t_min { (t as f64 - t_min) / (t_max - t_min) * pw } else { pw / 2.0 };

    // attention profile on top
    let mut by_time = s.features[0].clone();
    by_time.sort_by_key(|e| e.time_index);
    let w_max = by_time.iter().map(|e| e.weight).fold(0.0, f64::max).max(1e-12);
    let points: Vec<String> = by_time
        .iter()
        .map(|e| format!("{},{}", f(sx(e.time_index)), f(top + row_h - 4.0 - e.weight / w_max * (row_h - 8.0))))
        .collect();
    doc.raw(format!(
        "<polyline class=\"attention\" points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1\"/>",
        points.join(" "),
        PALETTE[1]
    ));
    doc.text(left - 6.0, top + row_h / 2.0 + 4.0, "end", "", "attention");

    for (fi, entries) in s.features.iter().enumerate() {
        let y0 = top + row_h * (fi as f64 + 1.0);
        let name = names.get(fi).map(String::as_str).unwrap_or("?");
        doc.text(left - 6.0, y0 + row_h / 2.0 + 4.0, "end", "", name);
        doc.line(left, y0 + row_h, left + pw, y0 + row_h, "baseline");
        let mut series = entries.clone();
        series.sort_by_key(|e| e.time_index);
        let (lo, hi) = nice_range(series.iter().map(|e| e.value));
        let sy = |x: f64| y0 + row_h - 3.0 - (x - lo) / (hi - lo) * (row_h - 6.0);
        let pts: Vec<String> = series
            .iter()
            .map(|e| format!("{},{}", f(sx(e.time_index)), f(sy(e.value))))
            .collect();
        doc.raw(format!(
            "<polyline class=\"series\" points=\"{}\" fill=\"none\" stroke=\"#555555\" stroke-width=\"1\"/>",
            pts.join(" ")
        ));
        for e in entries.iter().take(top_n) {
            doc.raw(format!(
                "<circle class=\"highlight\" cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\" fill-opacity=\"0.7\"/>",
                f(sx(e.time_index)),
                f(sy(e.value)),
                f(2.0 + 4.0 * e.weight / w_max),
                PALETTE[1]
            ));
        }
    }
    doc.text(left + pw / 2.0, height - 12.0, "middle", "", "time index");
    Ok(doc.finish())
}
