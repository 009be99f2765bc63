//! Plot-ready outputs: whitespace-separated `.dat` tables and standalone SVG
//! line charts. Both are byte-deterministic for identical input.

use std::fmt::Write as _;

/// One metric as a function of chunk size, one series per algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub title: String,
    pub y_label: String,
    pub xs: Vec<usize>,
    /// `(name, values)`; each `values` has one entry per x, `None` when missing.
    pub series: Vec<(String, Vec<Option<f64>>)>,
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_finite() => format!("{v}"),
        _ => "NA".to_string(),
    }
}

/// `# chunk_size <series...>` header, then one row per x.
pub fn dat_text(table: &SeriesTable) -> String {
    let mut out = String::from("# chunk_size");
    for (name, _) in &table.series {
        out.push(' ');
        out.push_str(name);
    }
    out.push('\n');
    for (row, x) in table.xs.iter().enumerate() {
        out.push_str(&x.to_string());
        for (_, values) in &table.series {
            out.push(' ');
            out.push_str(&cell(values.get(row).copied().flatten()));
        }
        out.push('\n');
    }
    out
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 140.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn y_range(table: &SeriesTable) -> (f64, f64) {
    let values = table
        .series
        .iter()
        .flat_map(|(_, v)| v.iter().flatten().copied())
        .filter(|v| v.is_finite());
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let lo = lo.min(0.0);
    if hi <= lo {
        (lo, lo + 1.0)
    } else {
        (lo, hi + 0.05 * (hi - lo))
    }
}

/// A line chart with one polyline per series. Missing values break the line.
pub fn svg_text(table: &SeriesTable) -> String {
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let (y_lo, y_hi) = y_range(table);
    let x_lo = table.xs.iter().copied().min().unwrap_or(0) as f64;
    let x_hi = table.xs.iter().copied().max().unwrap_or(1) as f64;
    let px = |x: f64| {
        if x_hi > x_lo {
            LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w
        } else {
            LEFT + plot_w / 2.0
        }
    };
    let py = |y: f64| TOP + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(&table.title)
    );
    // axes
    let _ = writeln!(
        s,
        r#"<path d="M{LEFT:.1},{TOP:.1} V{:.1} H{:.1}" stroke="black" fill="none"/>"#,
        TOP + plot_h,
        LEFT + plot_w
    );
    for tick in 0..=4 {
        let y = y_lo + (y_hi - y_lo) * tick as f64 / 4.0;
        let _ = writeln!(
            s,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            LEFT,
            py(y),
            LEFT + plot_w,
            py(y),
            LEFT - 6.0,
            py(y) + 4.0,
            format_tick(y)
        );
    }
    for x in &table.xs {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x}</text>"#,
            px(*x as f64),
            TOP + plot_h + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">chunk size</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(&table.y_label)
    );

    for (n, (name, values)) in table.series.iter().enumerate() {
        let color = COLORS[n % COLORS.len()];
        let mut segment: Vec<(f64, f64)> = Vec::new();
        let mut segments = Vec::new();
        for (x, v) in table.xs.iter().zip(values) {
            match v {
                Some(v) if v.is_finite() => segment.push((px(*x as f64), py(*v))),
                _ => segments.push(std::mem::take(&mut segment)),
            }
        }
        segments.push(segment);
        for seg in segments.iter().filter(|seg| !seg.is_empty()) {
            let points: Vec<String> = seg.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                points.join(" ")
            );
            for (x, y) in seg {
                let _ = writeln!(s, r#"<circle cx="{x:.1}" cy="{y:.1}" r="3" fill="{color}"/>"#);
            }
        }
        let ly = TOP + 16.0 + 20.0 * n as f64;
        let lx = LEFT + plot_w + 16.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn format_tick(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 0.01 && v.abs() < 1e5) {
        format!("{v:.2}")
    } else {
        format!("{v:.2e}")
    }
}
