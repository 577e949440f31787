//! Minimal static SVG plots: line charts and a deviation heatmap. Output
//! depends only on the data, so identical inputs give identical files.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 50.0;

/// A named polyline.
pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: Vec<[f64; 2]>,
}

fn bounds<'a>(points: impl Iterator<Item = &'a [f64; 2]>) -> Option<([f64; 2], [f64; 2])> {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points.filter(|p| p[0].is_finite() && p[1].is_finite()) {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    if !lo[0].is_finite() {
        return None;
    }
    for k in 0..2 {
        if hi[k] - lo[k] < 1e-9 {
            lo[k] -= 0.5;
            hi[k] += 0.5;
        }
    }
    Some((lo, hi))
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line chart of `series` with axis labels.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let Some((lo, hi)) = bounds(series.iter().flat_map(|s| s.points.iter())) else {
        out.push_str("</svg>\n");
        return out;
    };
    let sx = |x: f64| MARGIN + (x - lo[0]) / (hi[0] - lo[0]) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - lo[1]) / (hi[1] - lo[1]) * (HEIGHT - 2.0 * MARGIN);
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    for (v, anchor, x, y) in [
        (lo[0], "start", MARGIN, HEIGHT - MARGIN + 15.0),
        (hi[0], "end", WIDTH - MARGIN, HEIGHT - MARGIN + 15.0),
        (lo[1], "end", MARGIN - 4.0, HEIGHT - MARGIN),
        (hi[1], "end", MARGIN - 4.0, MARGIN + 8.0),
    ] {
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}">{v:.3}</text>"#
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    for (k, s) in series.iter().enumerate() {
        let mut path = String::new();
        for p in s.points.iter().filter(|p| p[0].is_finite() && p[1].is_finite()) {
            let _ = write!(path, "{:.1},{:.1} ", sx(p[0]), sy(p[1]));
        }
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.2" points="{}"/>"#,
            s.color,
            path.trim_end()
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" fill="{}">{}</text>"#,
            WIDTH - MARGIN - 120.0,
            MARGIN + 14.0 * (k as f64 + 1.0),
            s.color,
            escape(s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Diverging colour for `v` clipped to ±`limit`: blue below, red above.
fn diverging(v: f64, limit: f64) -> String {
    let t = (v / limit).clamp(-1.0, 1.0);
    let fade = |t: f64| (255.0 * (1.0 - t.abs())).round() as u8;
    if t >= 0.0 {
        format!("rgb(255,{0},{0})", fade(t))
    } else {
        format!("rgb({0},{0},255)", fade(t))
    }
}

/// One heatmap row per labelled profile; cells bin x into `bins` columns
/// over the common range, coloured by mean deviation clipped to ±`limit`.
pub fn heatmap(title: &str, rows: &[(String, Vec<[f64; 2]>)], bins: usize, limit: f64) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let Some((lo, hi)) = bounds(rows.iter().flat_map(|(_, r)| r.iter())) else {
        out.push_str("</svg>\n");
        return out;
    };
    let left = 170.0;
    let top = 35.0;
    let cell_w = (WIDTH - left - 10.0) / bins as f64;
    let cell_h = ((HEIGHT - top - 30.0) / rows.len().max(1) as f64).min(24.0);
    for (r, (label, profile)) in rows.iter().enumerate() {
        let y = top + r as f64 * cell_h;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 4.0,
            y + cell_h * 0.7,
            escape(label)
        );
        let mut sum = vec![0.0; bins];
        let mut count = vec![0usize; bins];
        for p in profile {
            let b = (((p[0] - lo[0]) / (hi[0] - lo[0])) * bins as f64).floor() as usize;
            let b = b.min(bins - 1);
            sum[b] += p[1];
            count[b] += 1;
        }
        for b in 0..bins {
            if count[b] == 0 {
                continue;
            }
            let _ = writeln!(
                out,
                r#"<rect x="{:.1}" y="{y:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
                left + b as f64 * cell_w,
                cell_w + 0.2,
                cell_h - 1.0,
                diverging(sum[b] / count[b] as f64, limit)
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{left:.1}" y="{:.1}">x {:.2} m</text><text x="{:.1}" y="{:.1}" text-anchor="end">x {:.2} m</text>"#,
        HEIGHT - 10.0,
        lo[0],
        WIDTH - 10.0,
        HEIGHT - 10.0,
        hi[0]
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">deviation, blue -{limit} m to red +{limit} m</text>"#,
        (left + WIDTH) / 2.0,
        HEIGHT - 10.0
    );
    out.push_str("</svg>\n");
    out
}
