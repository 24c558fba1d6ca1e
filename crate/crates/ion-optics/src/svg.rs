//! Self-contained SVG plot output (no plotting dependency downstream).
//!
//! Each plot embeds its data as an XML comment so the file alone carries the
//! numbers. Rendering is deterministic for identical inputs.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 90.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if a >= 1e4 || a < 1e-3 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Map t in [0,1] to a blue->green->yellow ramp.
fn colormap(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let stops = [
        (68, 1, 84),
        (59, 82, 139),
        (33, 145, 140),
        (94, 201, 98),
        (253, 231, 37),
    ];
    let x = t * (stops.len() - 1) as f64;
    let i = (x.floor() as usize).min(stops.len() - 2);
    let f = x - i as f64;
    let lerp = |a: i32, b: i32| (a as f64 + f * (b - a) as f64).round() as i32;
    format!(
        "rgb({},{},{})",
        lerp(stops[i].0, stops[i + 1].0),
        lerp(stops[i].1, stops[i + 1].1),
        lerp(stops[i].2, stops[i + 1].2)
    )
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        xml_escape(title)
    );
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_B - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - MARGIN_T - MARGIN_B)
    }

    fn draw(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let (px0, px1) = (MARGIN_L, WIDTH - MARGIN_R);
        let (py0, py1) = (HEIGHT - MARGIN_B, MARGIN_T);
        let _ = write!(
            out,
            "<rect x=\"{px0}\" y=\"{py1}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
            px1 - px0,
            py0 - py1
        );
        for k in 0..=4 {
            let fx = self.x0 + (self.x1 - self.x0) * k as f64 / 4.0;
            let fy = self.y0 + (self.y1 - self.y0) * k as f64 / 4.0;
            let _ = write!(
                out,
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
                self.px(fx),
                HEIGHT - MARGIN_B + 16.0,
                fmt_tick(fx)
            );
            let _ = write!(
                out,
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
                MARGIN_L - 6.0,
                self.py(fy) + 4.0,
                fmt_tick(fy)
            );
        }
        let _ = write!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
            (px0 + px1) / 2.0,
            HEIGHT - 12.0,
            xml_escape(xlabel)
        );
        let _ = write!(
            out,
            "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
            (py0 + py1) / 2.0,
            (py0 + py1) / 2.0,
            xml_escape(ylabel)
        );
    }
}

fn finite_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn pad(range: (f64, f64)) -> (f64, f64) {
    let w = range.1 - range.0;
    (range.0 - 0.05 * w, range.1 + 0.05 * w)
}

/// Heatmap over a regular (xs, ys) grid; `values[iy][ix]`, `None` cells are
/// hatched grey.
pub fn heatmap(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    xs: &[f64],
    ys: &[f64],
    values: &[Vec<Option<f64>>],
    data_comment: &str,
) -> String {
    let mut out = header(title);
    let _ = write!(out, "<!-- data:\n{}\n-->\n", xml_escape(data_comment));
    let (v0, v1) = finite_range(values.iter().flatten().filter_map(|v| *v));
    let dx = if xs.len() > 1 { xs[1] - xs[0] } else { 1.0 };
    let dy = if ys.len() > 1 { ys[1] - ys[0] } else { 1.0 };
    let ax = Axes {
        x0: xs[0] - 0.5 * dx,
        x1: xs[xs.len() - 1] + 0.5 * dx,
        y0: ys[0] - 0.5 * dy,
        y1: ys[ys.len() - 1] + 0.5 * dy,
    };
    for (iy, row) in values.iter().enumerate() {
        for (ix, v) in row.iter().enumerate() {
            let x = ax.px(xs[ix] - 0.5 * dx);
            let y = ax.py(ys[iy] + 0.5 * dy);
            let w = ax.px(xs[ix] + 0.5 * dx) - x;
            let h = ax.py(ys[iy] - 0.5 * dy) - y;
            let fill = match v {
                Some(v) => colormap((v - v0) / (v1 - v0).max(1e-300)),
                None => "rgb(220,220,220)".into(),
            };
            let _ = write!(
                out,
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"{fill}\"/>\n"
            );
        }
    }
    ax.draw(&mut out, xlabel, ylabel);
    // colorbar
    for k in 0..32 {
        let t = k as f64 / 31.0;
        let y = HEIGHT - MARGIN_B - t * (HEIGHT - MARGIN_T - MARGIN_B);
        let _ = write!(
            out,
            "<rect x=\"{}\" y=\"{:.2}\" width=\"16\" height=\"{:.2}\" fill=\"{}\"/>\n",
            WIDTH - MARGIN_R + 24.0,
            y - (HEIGHT - MARGIN_T - MARGIN_B) / 31.0,
            (HEIGHT - MARGIN_T - MARGIN_B) / 31.0 + 0.5,
            colormap(t)
        );
    }
    let _ = write!(
        out,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{}</text>\n\
         <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{}</text>\n",
        WIDTH - MARGIN_R + 44.0,
        HEIGHT - MARGIN_B + 4.0,
        fmt_tick(v0),
        WIDTH - MARGIN_R + 44.0,
        MARGIN_T + 4.0,
        fmt_tick(v1)
    );
    out.push_str("</svg>\n");
    out
}

/// Line chart with one or more named series.
pub fn line_chart(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[(&str, &[(f64, f64)])],
    data_comment: &str,
) -> String {
    let mut out = header(title);
    let _ = write!(out, "<!-- data:\n{}\n-->\n", xml_escape(data_comment));
    let xr = pad(finite_range(
        series.iter().flat_map(|(_, pts)| pts.iter().map(|p| p.0)),
    ));
    let yr = pad(finite_range(
        series.iter().flat_map(|(_, pts)| pts.iter().map(|p| p.1)),
    ));
    let ax = Axes {
        x0: xr.0,
        x1: xr.1,
        y0: yr.0,
        y1: yr.1,
    };
    let palette = ["#2166ac", "#b2182b", "#1b7837", "#e08214"];
    for (si, (name, pts)) in series.iter().enumerate() {
        let color = palette[si % palette.len()];
        let mut path = String::new();
        for (i, (x, y)) in pts.iter().enumerate() {
            if !y.is_finite() {
                continue;
            }
            let _ = write!(
                path,
                "{}{:.2},{:.2} ",
                if i == 0 || path.is_empty() { "M" } else { "L" },
                ax.px(*x),
                ax.py(*y)
            );
        }
        let _ = write!(
            out,
            "<path d=\"{path}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"/>\n"
        );
        let _ = write!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            WIDTH - MARGIN_R - 110.0,
            MARGIN_T + 16.0 + 16.0 * si as f64,
            xml_escape(name)
        );
    }
    ax.draw(&mut out, xlabel, ylabel);
    out.push_str("</svg>\n");
    out
}

/// Scatter plot of labeled point sets.
pub fn scatter(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[(&str, &[(f64, f64)])],
    data_comment: &str,
) -> String {
    let mut out = header(title);
    let _ = write!(out, "<!-- data:\n{}\n-->\n", xml_escape(data_comment));
    let xr = pad(finite_range(
        series.iter().flat_map(|(_, pts)| pts.iter().map(|p| p.0)),
    ));
    let yr = pad(finite_range(
        series.iter().flat_map(|(_, pts)| pts.iter().map(|p| p.1)),
    ));
    let ax = Axes {
        x0: xr.0,
        x1: xr.1,
        y0: yr.0,
        y1: yr.1,
    };
    let palette = ["#2166ac", "#b2182b", "#1b7837", "#e08214"];
    for (si, (name, pts)) in series.iter().enumerate() {
        let color = palette[si % palette.len()];
        for (x, y) in pts.iter() {
            let _ = write!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.4\" fill=\"{color}\"/>\n",
                ax.px(*x),
                ax.py(*y)
            );
        }
        let _ = write!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            WIDTH - MARGIN_R - 110.0,
            MARGIN_T + 16.0 + 16.0 * si as f64,
            xml_escape(name)
        );
    }
    ax.draw(&mut out, xlabel, ylabel);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outputs_are_valid_ish_svg_and_deterministic() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [0.0, 1.0];
        let vals = vec![
            vec![Some(1.0), Some(2.0), None],
            vec![Some(3.0), Some(4.0), Some(5.0)],
        ];
        let a = heatmap("t", "x", "y", &xs, &ys, &vals, "x,y,v");
        let b = heatmap("t", "x", "y", &xs, &ys, &vals, "x,y,v");
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.ends_with("</svg>\n"));
        assert!(a.contains("<!-- data:"));

        let pts = [(0.0, 1.0), (1.0, 4.0), (2.0, 2.0)];
        let c = line_chart("curve", "x", "y", &[("m", &pts)], "x,y");
        assert!(c.contains("<path"));
        let d = scatter("pts", "x", "y", &[("hits", &pts)], "x,y");
        assert!(d.contains("<circle"));
    }
}
