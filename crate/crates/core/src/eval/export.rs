use std::fmt::Write;

use super::EmbedRow;

/// `x,y,class,split` rows.
pub fn embedding_csv(rows: &[EmbedRow]) -> String {
    let mut s = String::from("x,y,class,split\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.x, r.y, r.class, r.split);
    }
    s
}

/// Matrix with a header row of column labels and a leading label column.
pub fn labelled_matrix_csv<T: std::fmt::Display>(corner: &str, rows: &[String], columns: &[String], values: &[Vec<T>]) -> String {
    let mut s = format!("{corner},{}\n", columns.join(","));
    for (label, row) in rows.iter().zip(values) {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{label},{}", cells.join(","));
    }
    s
}

const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#393b79", "#ad494a",
];

/// Scatter plot with one circle per point, coloured by class, and a legend.
/// Unseen points are drawn with a black outline.
pub fn embedding_svg(rows: &[EmbedRow], title: &str) -> String {
    let (w, h, pad, legend_w) = (640.0, 640.0, 30.0, 120.0);
    let mut classes: Vec<&str> = Vec::new();
    for r in rows {
        if !classes.contains(&r.class.as_str()) {
            classes.push(&r.class);
        }
    }
    let fold = |f: fn(f64, f64) -> f64, init: f64, pick: fn(&EmbedRow) -> f64| rows.iter().map(pick).fold(init, f);
    let (x0, x1) = (fold(f64::min, f64::INFINITY, |r| r.x), fold(f64::max, f64::NEG_INFINITY, |r| r.x));
    let (y0, y1) = (fold(f64::min, f64::INFINITY, |r| r.y), fold(f64::max, f64::NEG_INFINITY, |r| r.y));
    let sx = |x: f64| pad + (x - x0) / (x1 - x0).max(1e-12) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0).max(1e-12) * (h - 2.0 * pad);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{h}" font-family="sans-serif" font-size="12">"#,
        w + legend_w
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{pad}" y="18">{title}</text>"#);
    for r in rows {
        let c = classes.iter().position(|&k| k == r.class).unwrap();
        let stroke = if r.split == crate::datagen::Split::Unseen { r#" stroke="black""# } else { "" };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}" fill-opacity="0.8"{stroke}/>"#,
            sx(r.x),
            sy(r.y),
            PALETTE[c % PALETTE.len()]
        );
    }
    for (i, class) in classes.iter().enumerate() {
        let y = pad + 18.0 * i as f64;
        let _ = writeln!(s, r#"<circle cx="{}" cy="{y}" r="5" fill="{}"/>"#, w + 10.0, PALETTE[i % PALETTE.len()]);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{class}</text>"#, w + 20.0, y + 4.0);
    }
    s.push_str("</svg>\n");
    s
}
