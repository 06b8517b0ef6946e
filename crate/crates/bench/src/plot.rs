//! Self-contained SVG line plots: reference curves over shaded
//! prediction bands, fixed light styling, no external dependencies.

use std::fmt::Write;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

/// One line on the plot.
pub struct Series {
    pub label: String,
    pub color: &'static str,
    pub dashed: bool,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// One shaded band on the plot.
pub struct Band {
    pub label: String,
    pub color: &'static str,
    pub x: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Tick positions with a step of the form 10^p * {1, 2, 5} covering the
/// range with roughly `target` intervals.
fn nice_ticks(min: f64, max: f64, target: usize) -> (Vec<f64>, f64) {
    let span = (max - min).max(f64::MIN_POSITIVE);
    let raw_step = span / target.max(1) as f64;
    let power = raw_step.log10().floor();
    let base = 10.0_f64.powf(power);
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * base)
        .min_by(|a, b| {
            let da = (span / a - target as f64).abs();
            let db = (span / b - target as f64).abs();
            da.partial_cmp(&db).expect("finite tick spacing")
        })
        .expect("non-empty candidates");
    let first = (min / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut t = first;
    while t <= max + step * 1e-9 {
        // Snap values like 0.30000000000000004 back to the grid.
        let snapped = (t / step).round() * step;
        ticks.push(if snapped.abs() < step * 1e-9 {
            0.0
        } else {
            snapped
        });
        t += step;
    }
    (ticks, step)
}

fn format_tick(value: f64, step: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    if step.abs() < 1e-4 || value.abs() >= 1e5 {
        return format!("{value:.1e}");
    }
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    format!("{value:.decimals$}")
}

struct Range {
    min: f64,
    max: f64,
}

impl Range {
    fn new() -> Self {
        Range {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn include(&mut self, v: f64) {
        if v.is_finite() {
            self.min = self.min.min(v);
            self.max = self.max.max(v);
        }
    }

    /// Padded plotting range; degenerate input becomes a unit interval.
    fn padded(&self) -> (f64, f64) {
        if self.min > self.max {
            return (0.0, 1.0);
        }
        let span = self.max - self.min;
        if span == 0.0 {
            return (self.min - 1.0, self.max + 1.0);
        }
        (self.min - 0.05 * span, self.max + 0.05 * span)
    }
}

/// Renders curves and bands to a standalone SVG document.
pub fn line_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    bands: &[Band],
    series: &[Series],
) -> String {
    let mut xr = Range::new();
    let mut yr = Range::new();
    for b in bands {
        for &v in &b.x {
            xr.include(v);
        }
        for &v in b.lower.iter().chain(b.upper.iter()) {
            yr.include(v);
        }
    }
    for s in series {
        for &v in &s.x {
            xr.include(v);
        }
        for &v in &s.y {
            yr.include(v);
        }
    }
    let (x0, x1) = xr.padded();
    let (y0, y1) = yr.padded();
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| MARGIN_TOP + (y1 - y) / (y1 - y0) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"Helvetica, Arial, sans-serif\">"
    );
    let _ = writeln!(
        svg,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\" \
         font-weight=\"600\" fill=\"#1f2430\">{}</text>",
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    );

    let (y_ticks, y_step) = nice_ticks(y0, y1, 6);
    for &t in &y_ticks {
        let y = sy(t);
        let _ = writeln!(
            svg,
            "<line x1=\"{MARGIN_LEFT}\" y1=\"{y:.2}\" x2=\"{:.1}\" y2=\"{y:.2}\" \
             stroke=\"#e4e7ec\" stroke-width=\"1\"/>",
            MARGIN_LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"12\" \
             fill=\"#424856\">{}</text>",
            MARGIN_LEFT - 8.0,
            y + 4.0,
            format_tick(t, y_step)
        );
    }
    let (x_ticks, x_step) = nice_ticks(x0, x1, 8);
    for &t in &x_ticks {
        let x = sx(t);
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{:.1}\" x2=\"{x:.2}\" y2=\"{:.1}\" \
             stroke=\"#424856\" stroke-width=\"1\"/>",
            MARGIN_TOP + plot_h,
            MARGIN_TOP + plot_h + 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{x:.2}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\" \
             fill=\"#424856\">{}</text>",
            MARGIN_TOP + plot_h + 20.0,
            format_tick(t, x_step)
        );
    }

    for b in bands {
        let mut points = String::new();
        for (i, &x) in b.x.iter().enumerate() {
            if x.is_finite() && b.upper[i].is_finite() {
                let _ = write!(points, "{:.2},{:.2} ", sx(x), sy(b.upper[i]));
            }
        }
        for (i, &x) in b.x.iter().enumerate().rev() {
            if x.is_finite() && b.lower[i].is_finite() {
                let _ = write!(points, "{:.2},{:.2} ", sx(x), sy(b.lower[i]));
            }
        }
        let _ = writeln!(
            svg,
            "<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.25\" stroke=\"none\"/>",
            points.trim_end(),
            b.color
        );
    }

    for s in series {
        let mut points = String::new();
        for (i, &x) in s.x.iter().enumerate() {
            if x.is_finite() && s.y[i].is_finite() {
                let _ = write!(points, "{:.2},{:.2} ", sx(x), sy(s.y[i]));
            }
        }
        let dash = if s.dashed {
            " stroke-dasharray=\"6 4\""
        } else {
            ""
        };
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\"{}/>",
            points.trim_end(),
            s.color,
            dash
        );
    }

    // Axis frame on top of the data.
    let _ = writeln!(
        svg,
        "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w:.1}\" \
         height=\"{plot_h:.1}\" fill=\"none\" stroke=\"#424856\" stroke-width=\"1\"/>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"13\" \
         fill=\"#1f2430\">{}</text>",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        "<text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"13\" \
         fill=\"#1f2430\" transform=\"rotate(-90 18 {:.1})\">{}</text>",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(y_label)
    );

    // Legend, top right inside the frame.
    let entries = bands.len() + series.len();
    if entries > 0 {
        let legend_w = 190.0;
        let legend_h = 10.0 + 18.0 * entries as f64;
        let lx = MARGIN_LEFT + plot_w - legend_w - 10.0;
        let ly = MARGIN_TOP + 10.0;
        let _ = writeln!(
            svg,
            "<rect x=\"{lx:.1}\" y=\"{ly:.1}\" width=\"{legend_w}\" height=\"{legend_h:.1}\" \
             fill=\"#ffffff\" fill-opacity=\"0.85\" stroke=\"#c6cbd4\" stroke-width=\"1\"/>"
        );
        let mut row = 0.0;
        for b in bands {
            let y = ly + 14.0 + 18.0 * row;
            let _ = writeln!(
                svg,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"18\" height=\"10\" fill=\"{}\" \
                 fill-opacity=\"0.35\"/>",
                lx + 8.0,
                y - 8.0,
                b.color
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{y:.1}\" font-size=\"12\" fill=\"#1f2430\">{}</text>",
                lx + 32.0,
                escape(&b.label)
            );
            row += 1.0;
        }
        for s in series {
            let y = ly + 14.0 + 18.0 * row;
            let dash = if s.dashed {
                " stroke-dasharray=\"6 4\""
            } else {
                ""
            };
            let _ = writeln!(
                svg,
                "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"{}\" \
                 stroke-width=\"1.6\"{}/>",
                lx + 8.0,
                y - 4.0,
                lx + 26.0,
                y - 4.0,
                s.color,
                dash
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{y:.1}\" font-size=\"12\" fill=\"#1f2430\">{}</text>",
                lx + 32.0,
                escape(&s.label)
            );
            row += 1.0;
        }
    }

    svg.push_str("</svg>\n");
    svg
}
