//! Minimal line plots with error bars.

use std::fmt::Write;

pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Half-height of the error bar at each point.
    pub err: Vec<f64>,
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 150.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;

    let xmax = series
        .iter()
        .flat_map(|s| s.x.iter().copied())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE)
        * 1.05;
    let ymax = series
        .iter()
        .flat_map(|s| s.y.iter().zip(&s.err).map(|(y, e)| y + e))
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE)
        * 1.1;
    let px = |x: f64| left + pw * x / xmax;
    let py = |y: f64| top + ph * (1.0 - y / ymax);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{title}</text>"#,
        left + pw / 2.0
    );
    let _ = writeln!(
        s,
        r#"<path d="M{l},{t} V{b} H{r}" fill="none" stroke="black"/>"#,
        l = left,
        t = top,
        b = top + ph,
        r = left + pw
    );
    for i in 0..=4 {
        let fx = xmax * i as f64 / 4.0;
        let fy = ymax * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{:.3}</text>"#,
            fmt(px(fx)),
            fmt(top + ph + 18.0),
            fx
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#,
            fmt(left - 6.0),
            fmt(py(fy) + 4.0),
            fy
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        fmt(left + pw / 2.0),
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{y_label}</text>"#,
        fmt(top + ph / 2.0),
        fmt(top + ph / 2.0)
    );

    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser
            .x
            .iter()
            .zip(&ser.y)
            .map(|(&x, &y)| format!("{},{}", fmt(px(x)), fmt(py(y))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        for ((&x, &y), &e) in ser.x.iter().zip(&ser.y).zip(&ser.err) {
            let (cx, lo, hi) = (px(x), py((y - e).max(0.0)), py(y + e));
            let _ = writeln!(
                s,
                r#"<path d="M{a},{lo} V{hi} M{b},{lo} H{c} M{b},{hi} H{c}" stroke="{color}"/>"#,
                a = fmt(cx),
                b = fmt(cx - 4.0),
                c = fmt(cx + 4.0),
                lo = fmt(lo),
                hi = fmt(hi)
            );
            let _ = writeln!(
                s,
                r#"<circle cx="{}" cy="{}" r="3" fill="{color}"/>"#,
                fmt(cx),
                fmt(py(y))
            );
        }
        let ly = top + 10.0 + 20.0 * i as f64;
        let lx = left + pw + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            fmt(lx),
            fmt(lx + 20.0),
            fmt(lx + 26.0),
            ly + 4.0,
            ser.label
        );
    }
    s.push_str("</svg>\n");
    s
}
