//! Minimal horizontal bar charts.

use std::fmt::Write as _;

use crate::metrics::fmt1;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub(crate) fn bar_chart(title: &str, bars: &[(String, f64)]) -> String {
    const ROW: f64 = 22.0;
    const LABEL_W: f64 = 190.0;
    const PLOT_W: f64 = 360.0;
    let height = 40.0 + ROW * bars.len() as f64 + 10.0;
    let width = LABEL_W + PLOT_W + 60.0;
    let max = bars.iter().map(|b| b.1).fold(0.0f64, f64::max).max(1e-9);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<text x="10" y="20" font-size="14">{}</text>"#, escape(title));
    for (i, (label, v)) in bars.iter().enumerate() {
        let y = 32.0 + ROW * i as f64;
        let w = (v.max(0.0) / max * PLOT_W).round();
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, LABEL_W - 6.0, y + 14.0, escape(label));
        let _ = writeln!(s, r##"<rect x="{LABEL_W}" y="{y}" width="{w}" height="{}" fill="#4a78b0"/>"##, ROW - 6.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, LABEL_W + w + 4.0, y + 14.0, fmt1(*v));
    }
    s.push_str("</svg>\n");
    s
}
