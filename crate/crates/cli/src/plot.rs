//! Minimal SVG line plots with a log-scaled y axis.

use std::fmt::Write;

use besov_core::analysis::StudyReport;
use besov_core::smoothness::ScaleProfile;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
}

/// Draws `series` with linear x and `log2` y; nonpositive values are dropped.
fn render(title: &str, x_label: &str, series: &[Series]) -> String {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|p| p.1 > 0.0 && p.1.is_finite())
        .map(|(x, y)| (x, y.log2()))
        .collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle">{title}</text>"#,
        W / 2.0
    );
    if pts.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let span = |v: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 1.0, hi + 1.0)
        }
    };
    let (x0, x1) = span(&mut pts.iter().map(|p| p.0));
    let (y0, y1) = span(&mut pts.iter().map(|p| p.1));
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        W / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        out,
        r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">log2 value</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (x, anchor, v) in [(x0, "start", y0), (x0, "end", y1)] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.1}" text-anchor="{anchor}">{v:.2}</text>"#,
            sx(x) - 5.0,
            sy(v)
        );
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{}">{x0}</text>"#, sx(x0), H - MARGIN + 15.0);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{}" text-anchor="end">{x1}</text>"#,
        sx(x1),
        H - MARGIN + 15.0
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.1 > 0.0 && p.1.is_finite())
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y.log2())))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - MARGIN + 5.0,
            MARGIN + 15.0 * (i as f64 + 1.0),
            s.name
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Every numeric table column against the row index.
pub fn study_plot(report: &StudyReport) -> String {
    let t = &report.table;
    let xs: Vec<f64> = (0..t.rows.len()).map(|i| i as f64).collect();
    let series = t.columns[1..]
        .iter()
        .map(|c| Series {
            name: c.clone(),
            points: xs.iter().copied().zip(t.column(c).unwrap_or_default()).collect(),
        })
        .collect::<Vec<_>>();
    render(&report.study, "study point", &series)
}

/// `L_k^q` against `k` for each profile.
pub fn profile_plot(profiles: &[(String, ScaleProfile)]) -> String {
    let series: Vec<Series> = profiles
        .iter()
        .map(|(id, p)| Series {
            name: id.clone(),
            points: (p.k_min..=p.k_max)
                .map(|k| (k as f64, p.layer(k).powf(p.params.q)))
                .collect(),
        })
        .collect();
    render("scale profiles", "k", &series)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_is_well_formed_and_skips_nonpositive() {
        let s = render(
            "t",
            "x",
            &[Series {
                name: "a".into(),
                points: vec![(0.0, 1.0), (1.0, 0.0), (2.0, 4.0)],
            }],
        );
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        let poly = s.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(poly.matches(',').count(), 2);
    }

    #[test]
    fn empty_plot_is_still_valid() {
        let s = render("t", "x", &[]);
        assert!(s.ends_with("</svg>\n"));
    }
}
