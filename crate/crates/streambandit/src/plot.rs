//! Minimal standalone SVG renderer for log-log regret curves.
//!
//! Charts are assembled as plain strings — no plotting dependency. The
//! output is a self-contained SVG document with decade grid lines, one
//! polyline per series, point markers, and a legend.

use crate::{Error, Result};
use std::fmt::Write as _;

/// One labeled curve of (horizon, regret) pairs. Points with a
/// nonpositive or non-finite coordinate are skipped (they have no place
/// on a log-log chart).
#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 44.0;
const MARGIN_B: f64 = 52.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Escape text for SVG content and attribute positions.
fn esc(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

struct Axis {
    lo: f64,
    hi: f64,
    span_px: f64,
    origin_px: f64,
    flip: bool,
}

impl Axis {
    fn map(&self, log_value: f64) -> f64 {
        let frac = (log_value - self.lo) / (self.hi - self.lo);
        let frac = if self.flip { 1.0 - frac } else { frac };
        self.origin_px + frac * self.span_px
    }

    /// Decade tick positions inside the range; the bare endpoints when no
    /// integer decade falls inside.
    fn ticks(&self) -> Vec<f64> {
        let first = self.lo.ceil() as i64;
        let last = self.hi.floor() as i64;
        if first <= last {
            (first..=last).map(|k| k as f64).collect()
        } else {
            vec![self.lo, self.hi]
        }
    }
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi - lo < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn tick_label(log_value: f64) -> String {
    if (log_value - log_value.round()).abs() < 1e-9 {
        format!("1e{}", log_value.round() as i64)
    } else {
        format!("{:.3}", 10f64.powf(log_value))
    }
}

/// Render a log-log line chart of the given series. `title` heads the
/// chart; `desc` (typically the resolved experiment config) is embedded
/// verbatim in the document's `<desc>` element so the artifact records
/// what produced it. Errors if no series has a plottable point.
pub fn render_loglog_svg(title: &str, desc: &str, series: &[PlotSeries]) -> Result<String> {
    let cleaned: Vec<(&str, Vec<(f64, f64)>)> = series
        .iter()
        .map(|s| {
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .filter(|&&(x, y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
                .map(|&(x, y)| (x.log10(), y.log10()))
                .collect();
            (s.label.as_str(), pts)
        })
        .filter(|(_, pts)| !pts.is_empty())
        .collect();
    if cleaned.is_empty() {
        return Err(Error::Usage(
            "nothing to plot: every point has a nonpositive coordinate".into(),
        ));
    }

    let (xlo, xhi) = padded_range(cleaned.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)));
    let (ylo, yhi) = padded_range(cleaned.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)));
    let x_axis = Axis {
        lo: xlo,
        hi: xhi,
        span_px: WIDTH - MARGIN_L - MARGIN_R,
        origin_px: MARGIN_L,
        flip: false,
    };
    let y_axis = Axis {
        lo: ylo,
        hi: yhi,
        span_px: HEIGHT - MARGIN_T - MARGIN_B,
        origin_px: MARGIN_T,
        flip: true,
    };
    let plot_right = WIDTH - MARGIN_R;
    let plot_bottom = HEIGHT - MARGIN_B;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">"
    );
    let _ = writeln!(svg, "  <desc>{}</desc>", esc(desc));
    let _ = writeln!(svg, "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "  <text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        MARGIN_L + (plot_right - MARGIN_L) / 2.0,
        esc(title)
    );

    for t in x_axis.ticks() {
        let x = x_axis.map(t);
        let _ = writeln!(
            svg,
            "  <line x1=\"{x:.1}\" y1=\"{MARGIN_T}\" x2=\"{x:.1}\" y2=\"{plot_bottom}\" \
             stroke=\"#dddddd\"/>"
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            plot_bottom + 18.0,
            tick_label(t)
        );
    }
    for t in y_axis.ticks() {
        let y = y_axis.map(t);
        let _ = writeln!(
            svg,
            "  <line x1=\"{MARGIN_L}\" y1=\"{y:.1}\" x2=\"{plot_right}\" y2=\"{y:.1}\" \
             stroke=\"#dddddd\"/>"
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            MARGIN_L - 8.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        svg,
        "  <rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{:.1}\" height=\"{:.1}\" \
         fill=\"none\" stroke=\"#333333\"/>",
        plot_right - MARGIN_L,
        plot_bottom - MARGIN_T
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">T</text>",
        MARGIN_L + (plot_right - MARGIN_L) / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        "  <text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {:.1})\">pseudo-regret</text>",
        MARGIN_T + (plot_bottom - MARGIN_T) / 2.0,
        MARGIN_T + (plot_bottom - MARGIN_T) / 2.0
    );

    for (si, (label, pts)) in cleaned.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        if pts.len() > 1 {
            let coords: Vec<String> = pts
                .iter()
                .map(|&(x, y)| format!("{:.1},{:.1}", x_axis.map(x), y_axis.map(y)))
                .collect();
            let _ = writeln!(
                svg,
                "  <polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                coords.join(" ")
            );
        }
        for &(x, y) in pts {
            let _ = writeln!(
                svg,
                "  <circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>",
                x_axis.map(x),
                y_axis.map(y)
            );
        }
        let ly = MARGIN_T + 14.0 + 18.0 * si as f64;
        let _ = writeln!(
            svg,
            "  <line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>",
            plot_right + 12.0,
            plot_right + 32.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            plot_right + 38.0,
            ly + 4.0,
            esc(label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_a_standalone_document_with_one_curve_per_series() {
        let series = vec![
            PlotSeries {
                label: "P=1".into(),
                points: vec![(1e4, 100.0), (1e5, 500.0), (1e6, 2300.0)],
            },
            PlotSeries {
                label: "P=2".into(),
                points: vec![(1e4, 80.0), (1e5, 300.0), (1e6, 1100.0)],
            },
        ];
        let svg = render_loglog_svg("scaling", "{\"seed\":7}", &series).unwrap();
        assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(">P=1</text>"));
        assert!(svg.contains(">P=2</text>"));
        assert!(svg.contains("<desc>{&quot;seed&quot;:7}</desc>"));
        assert!(svg.contains(">1e5<"), "decade ticks labeled: {svg}");
    }

    #[test]
    fn nonpositive_points_are_skipped_not_plotted() {
        let series = vec![PlotSeries {
            label: "mixed".into(),
            points: vec![(1e3, 0.0), (1e4, 50.0), (1e5, -2.0), (1e6, 90.0)],
        }];
        let svg = render_loglog_svg("t", "", &series).unwrap();
        assert_eq!(svg.matches("<circle").count(), 2);
    }

    #[test]
    fn an_unplottable_chart_is_an_error() {
        let series = vec![PlotSeries { label: "flat".into(), points: vec![(1e3, 0.0)] }];
        assert!(render_loglog_svg("t", "", &series).is_err());
        assert!(render_loglog_svg("t", "", &[]).is_err());
    }

    #[test]
    fn single_point_series_render_as_a_marker() {
        let series =
            vec![PlotSeries { label: "one".into(), points: vec![(1e4, 25.0)] }];
        let svg = render_loglog_svg("t", "", &series).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 0);
        assert_eq!(svg.matches("<circle").count(), 1);
    }

    #[test]
    fn labels_and_desc_are_escaped() {
        let series = vec![PlotSeries {
            label: "a<b & c".into(),
            points: vec![(10.0, 1.0), (100.0, 2.0)],
        }];
        let svg = render_loglog_svg("x & y", "<cfg>", &series).unwrap();
        assert!(svg.contains("a&lt;b &amp; c"));
        assert!(svg.contains("x &amp; y"));
        assert!(svg.contains("<desc>&lt;cfg&gt;</desc>"));
    }
}
