//! Static figure output: isoluminance certainty-map renderings and
//! prediction-vs-DMOS scatterplots (PNG, with SVG duplicates for plots).
//!
//! The certainty rendering encodes only two things: hue carries the relation
//! of `M(p)` to the threshold (red below, cyan at, purple above) and
//! saturation carries the local gradient-energy weight. Lightness is held
//! constant so no hue class looks brighter than another.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::edge::CertaintyMap;
use crate::error::{Error, Result};
use crate::image_io::ScalarField;
use crate::scalar::Scalar;

/// Colors and thresholds of the isoluminance rendering.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsoluminancePalette {
    /// Certainty threshold separating hot from cold.
    pub threshold: f64,
    /// Half-width of the cyan band around the threshold.
    pub tol: f64,
    /// Hue in degrees for `M < threshold - tol`.
    pub hue_below: f64,
    /// Hue for `|M - threshold| <= tol`.
    pub hue_at: f64,
    /// Hue for `M > threshold + tol`.
    pub hue_above: f64,
    /// Constant HSL lightness shared by every class.
    pub lightness: f64,
}

impl IsoluminancePalette {
    /// Standard palette: red below, cyan at, purple above the threshold.
    pub fn standard(threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) || threshold == 0.0 {
            return Err(Error::Domain(format!(
                "palette threshold must lie in (0, 1], got {threshold}"
            )));
        }
        Ok(Self {
            threshold,
            tol: 0.02,
            hue_below: 0.0,
            hue_at: 180.0,
            hue_above: 280.0,
            lightness: 0.5,
        })
    }

    fn classify(&self, m: f64) -> f64 {
        if (m - self.threshold).abs() <= self.tol {
            self.hue_at
        } else if m < self.threshold {
            self.hue_below
        } else {
            self.hue_above
        }
    }
}

/// Hue class of a rendered pixel, recovered from its color.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HueClass {
    Below,
    At,
    Above,
    Neutral,
}

/// Map an RGB pixel back to its palette class; used by the classification
/// tests and exposed for diagnostics.
pub fn classify_pixel(palette: &IsoluminancePalette, pixel: Rgb<u8>) -> HueClass {
    let [r, g, b] = pixel.0;
    let (max, min) = (r.max(g).max(b), r.min(g).min(b));
    if max == min {
        return HueClass::Neutral;
    }
    let (rf, gf, bf) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
    let maxf = rf.max(gf).max(bf);
    let minf = rf.min(gf).min(bf);
    let delta = maxf - minf;
    let hue = if maxf == rf {
        60.0 * (((gf - bf) / delta) % 6.0)
    } else if maxf == gf {
        60.0 * ((bf - rf) / delta + 2.0)
    } else {
        60.0 * ((rf - gf) / delta + 4.0)
    };
    let hue = if hue < 0.0 { hue + 360.0 } else { hue };
    let dist = |anchor: f64| {
        let d = (hue - anchor).abs();
        d.min(360.0 - d)
    };
    let below = dist(palette.hue_below);
    let at = dist(palette.hue_at);
    let above = dist(palette.hue_above);
    if below <= at && below <= above {
        HueClass::Below
    } else if at <= above {
        HueClass::At
    } else {
        HueClass::Above
    }
}

fn hsl_to_rgb(h_deg: f64, s: f64, l: f64) -> Rgb<u8> {
    let h = h_deg.rem_euclid(360.0);
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let x = c * (1.0 - ((h / 60.0).rem_euclid(2.0) - 1.0).abs());
    let (r1, g1, b1) = match (h / 60.0) as usize {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    let to_u8 = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    Rgb([to_u8(r1), to_u8(g1), to_u8(b1)])
}

const COLORBAR_WIDTH: u32 = 14;
const COLORBAR_GAP: u32 = 3;
/// The colorbar spans certainty values `[0, COLORBAR_MAX]`.
pub const COLORBAR_MAX: f64 = 1.2;

/// Render a certainty map with per-pixel weight-scaled saturation and a
/// colorbar strip on the left. The colorbar carries two optional markers:
/// a purple dotted line at the canonical threshold and a dark dotted line at
/// `dmos_marker` (a certainty value derived from a DMOS score by the caller).
pub fn render_certainty<T: Scalar>(
    cmap: &CertaintyMap<T>,
    palette: &IsoluminancePalette,
    weight: &ScalarField<T>,
    dmos_marker: Option<f64>,
) -> Result<RgbImage> {
    let (w, h) = (cmap.width(), cmap.height());
    if weight.width() != w || weight.height() != h {
        return Err(Error::Dimension(format!(
            "weight field {}x{} does not match certainty map {w}x{h}",
            weight.width(),
            weight.height()
        )));
    }
    let max_weight = weight
        .samples()
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v.to_f64().unwrap_or(0.0)));

    let full_w = COLORBAR_WIDTH + COLORBAR_GAP + w as u32;
    let mut out = RgbImage::new(full_w, h as u32);

    // Colorbar: high certainty on top, full saturation.
    let bar_value = |y: u32| COLORBAR_MAX * (1.0 - y as f64 / (h as f64 - 1.0));
    for y in 0..h as u32 {
        let hue = palette.classify(bar_value(y));
        let color = hsl_to_rgb(hue, 1.0, palette.lightness);
        for x in 0..COLORBAR_WIDTH {
            out.put_pixel(x, y, color);
        }
    }
    let mark = |out: &mut RgbImage, m: f64, color: Rgb<u8>| {
        if !(0.0..=COLORBAR_MAX).contains(&m) || h < 2 {
            return;
        }
        let y = ((1.0 - m / COLORBAR_MAX) * (h as f64 - 1.0)).round() as u32;
        for x in 0..COLORBAR_WIDTH {
            if x % 3 != 2 {
                out.put_pixel(x, y.min(h as u32 - 1), color);
            }
        }
    };
    // Threshold marker in dark purple; it anchors the cyan band.
    mark(&mut out, palette.threshold, hsl_to_rgb(palette.hue_above, 1.0, 0.25));
    if let Some(m) = dmos_marker {
        mark(&mut out, m, Rgb([20, 20, 20]));
    }
    for y in 0..h as u32 {
        for x in 0..COLORBAR_GAP {
            out.put_pixel(COLORBAR_WIDTH + x, y, Rgb([255, 255, 255]));
        }
    }

    // Map body.
    let x0 = COLORBAR_WIDTH + COLORBAR_GAP;
    for y in 0..h {
        for x in 0..w {
            let idx = y * w + x;
            let color = if !cmap.is_valid(idx) {
                // Neutral gray at the shared lightness.
                hsl_to_rgb(0.0, 0.0, palette.lightness)
            } else {
                let m = cmap.values().samples()[idx].to_f64().unwrap_or(0.0);
                let wgt = if max_weight > 0.0 {
                    (weight.samples()[idx].to_f64().unwrap_or(0.0) / max_weight).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                hsl_to_rgb(palette.classify(m), wgt, palette.lightness)
            };
            out.put_pixel(x0 + x as u32, y as u32, color);
        }
    }
    Ok(out)
}

/// Write an image as PNG.
pub fn write_png(image: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    image
        .save_with_format(path.as_ref(), image::ImageFormat::Png)
        .map_err(|e| Error::Decode { path: path.as_ref().to_path_buf(), message: e.to_string() })
}

// ---------------------------------------------------------------------------
// scatterplots
// ---------------------------------------------------------------------------

const PLOT_W: u32 = 640;
const PLOT_H: u32 = 480;
const MARGIN_LEFT: u32 = 64;
const MARGIN_RIGHT: u32 = 160;
const MARGIN_TOP: u32 = 24;
const MARGIN_BOTTOM: u32 = 48;

fn group_color(index: usize) -> Rgb<u8> {
    // Golden-angle hue walk keeps neighboring groups distinguishable.
    let hue = (index as f64 * 137.508).rem_euclid(360.0);
    hsl_to_rgb(hue, 0.85, 0.42)
}

struct Axes {
    lo: f64,
    hi: f64,
}

impl Axes {
    fn from_data(values: &[f64]) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pad = ((hi - lo).abs() * 0.05).max(1.0);
        Self { lo: lo - pad, hi: hi + pad }
    }

    fn to_px(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }

    fn x(&self, v: f64) -> i64 {
        (MARGIN_LEFT as f64
            + self.to_px(v) * (PLOT_W - MARGIN_LEFT - MARGIN_RIGHT) as f64)
            .round() as i64
    }

    fn y(&self, v: f64) -> i64 {
        (PLOT_H as f64
            - MARGIN_BOTTOM as f64
            - self.to_px(v) * (PLOT_H - MARGIN_TOP - MARGIN_BOTTOM) as f64)
            .round() as i64
    }
}

fn put(img: &mut RgbImage, x: i64, y: i64, color: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, color);
    }
}

fn draw_line(img: &mut RgbImage, mut x0: i64, mut y0: i64, x1: i64, y1: i64, color: Rgb<u8>) {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        put(img, x0, y0, color);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

fn draw_disc(img: &mut RgbImage, cx: i64, cy: i64, r: i64, color: Rgb<u8>) {
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                put(img, cx + dx, cy + dy, color);
            }
        }
    }
}

/// Scatter of predictions against subjective scores with an identity line
/// and per-group colors. Writes a PNG and an SVG twin.
pub fn render_scatter(
    pred: &[f64],
    dmos: &[f64],
    labels: &[String],
    png_path: impl AsRef<Path>,
    svg_path: impl AsRef<Path>,
) -> Result<()> {
    if pred.len() != dmos.len() || pred.len() != labels.len() || pred.is_empty() {
        return Err(Error::Dimension(format!(
            "scatter needs equal nonzero lengths, got {}, {}, {}",
            pred.len(),
            dmos.len(),
            labels.len()
        )));
    }
    let mut all: Vec<f64> = pred.to_vec();
    all.extend_from_slice(dmos);
    let axes = Axes::from_data(&all);

    let mut groups: Vec<String> = Vec::new();
    for label in labels {
        if !groups.contains(label) {
            groups.push(label.clone());
        }
    }

    let image = draw_scatter_png(pred, dmos, labels, &groups, &axes);
    write_png(&image, png_path)?;
    let svg = scatter_svg(pred, dmos, labels, &groups, &axes);
    std::fs::write(svg_path.as_ref(), svg)?;
    Ok(())
}

fn draw_scatter_png(
    pred: &[f64],
    dmos: &[f64],
    labels: &[String],
    groups: &[String],
    axes: &Axes,
) -> RgbImage {
    let mut img = RgbImage::from_pixel(PLOT_W, PLOT_H, Rgb([255, 255, 255]));
    let frame = Rgb([40, 40, 40]);
    let x_left = MARGIN_LEFT as i64;
    let x_right = (PLOT_W - MARGIN_RIGHT) as i64;
    let y_top = MARGIN_TOP as i64;
    let y_bottom = (PLOT_H - MARGIN_BOTTOM) as i64;

    draw_line(&mut img, x_left, y_bottom, x_right, y_bottom, frame);
    draw_line(&mut img, x_left, y_top, x_left, y_bottom, frame);

    // Ticks and numeric labels on both axes.
    for k in 0..=4 {
        let v = axes.lo + (axes.hi - axes.lo) * k as f64 / 4.0;
        let tx = axes.x(v);
        draw_line(&mut img, tx, y_bottom, tx, y_bottom + 4, frame);
        draw_text(&mut img, tx - 10, y_bottom + 8, &format!("{v:.0}"), frame);
        let ty = axes.y(v);
        draw_line(&mut img, x_left - 4, ty, x_left, ty, frame);
        draw_text(&mut img, x_left - 34, ty - 3, &format!("{v:.0}"), frame);
    }

    // Identity line.
    draw_line(
        &mut img,
        axes.x(axes.lo),
        axes.y(axes.lo),
        axes.x(axes.hi),
        axes.y(axes.hi),
        Rgb([150, 150, 150]),
    );

    for ((&p, &d), label) in pred.iter().zip(dmos).zip(labels) {
        let gi = groups.iter().position(|g| g == label).unwrap();
        draw_disc(&mut img, axes.x(p), axes.y(d), 3, group_color(gi));
    }

    // Axis labels.
    draw_text(&mut img, (x_left + x_right) / 2 - 28, y_bottom + 24, "predicted", frame);
    draw_text_vertical(&mut img, 8, (y_top + y_bottom) / 2 - 16, "DMOS", frame);

    // Legend.
    let lx = (PLOT_W - MARGIN_RIGHT) as i64 + 16;
    for (gi, group) in groups.iter().enumerate() {
        let ly = y_top + 10 + 16 * gi as i64;
        draw_disc(&mut img, lx, ly, 4, group_color(gi));
        draw_text(&mut img, lx + 10, ly - 3, group, frame);
    }
    img
}

fn scatter_svg(
    pred: &[f64],
    dmos: &[f64],
    labels: &[String],
    groups: &[String],
    axes: &Axes,
) -> String {
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" viewBox=\"0 0 {PLOT_W} {PLOT_H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    let x_left = MARGIN_LEFT;
    let x_right = PLOT_W - MARGIN_RIGHT;
    let y_top = MARGIN_TOP;
    let y_bottom = PLOT_H - MARGIN_BOTTOM;
    svg.push_str(&format!(
        "<line x1=\"{x_left}\" y1=\"{y_bottom}\" x2=\"{x_right}\" y2=\"{y_bottom}\" stroke=\"black\"/>\n"
    ));
    svg.push_str(&format!(
        "<line x1=\"{x_left}\" y1=\"{y_top}\" x2=\"{x_left}\" y2=\"{y_bottom}\" stroke=\"black\"/>\n"
    ));
    for k in 0..=4 {
        let v = axes.lo + (axes.hi - axes.lo) * k as f64 / 4.0;
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\">{v:.0}</text>\n",
            axes.x(v) - 8,
            y_bottom + 16
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\">{v:.0}</text>\n",
            x_left as i64 - 34,
            axes.y(v) + 4
        ));
    }
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n",
        axes.x(axes.lo),
        axes.y(axes.lo),
        axes.x(axes.hi),
        axes.y(axes.hi)
    ));
    for ((&p, &d), label) in pred.iter().zip(dmos).zip(labels) {
        let gi = groups.iter().position(|g| g == label).unwrap();
        let Rgb([r, g, b]) = group_color(gi);
        svg.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"3.5\" fill=\"rgb({r},{g},{b})\"/>\n",
            axes.x(p),
            axes.y(d)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\">predicted</text>\n",
        (x_left + x_right) / 2 - 28,
        PLOT_H - 12
    ));
    svg.push_str(&format!(
        "<text x=\"14\" y=\"{}\" font-size=\"13\" transform=\"rotate(-90 14 {})\">DMOS</text>\n",
        (y_top + y_bottom) / 2,
        (y_top + y_bottom) / 2
    ));
    for (gi, group) in groups.iter().enumerate() {
        let Rgb([r, g, b]) = group_color(gi);
        let ly = y_top + 12 + 16 * gi as u32;
        svg.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{ly}\" r=\"4\" fill=\"rgb({r},{g},{b})\"/>\n",
            x_right + 16
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" class=\"legend\">{}</text>\n",
            x_right + 26,
            ly + 4,
            xml_escape(group)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

// ---------------------------------------------------------------------------
// tiny 5x7 bitmap font (subset sufficient for axis labels and digits)
// ---------------------------------------------------------------------------

fn glyph(c: char) -> [u8; 7] {
    match c {
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C],
        '-' => [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00],
        ' ' => [0x00; 7],
        'D' => [0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'a' => [0x00, 0x00, 0x0E, 0x01, 0x0F, 0x11, 0x0F],
        'b' => [0x10, 0x10, 0x1E, 0x11, 0x11, 0x11, 0x1E],
        'c' => [0x00, 0x00, 0x0E, 0x10, 0x10, 0x11, 0x0E],
        'd' => [0x01, 0x01, 0x0F, 0x11, 0x11, 0x11, 0x0F],
        'e' => [0x00, 0x00, 0x0E, 0x11, 0x1F, 0x10, 0x0E],
        'g' => [0x00, 0x00, 0x0F, 0x11, 0x0F, 0x01, 0x0E],
        'h' => [0x10, 0x10, 0x1E, 0x11, 0x11, 0x11, 0x11],
        'i' => [0x04, 0x00, 0x0C, 0x04, 0x04, 0x04, 0x0E],
        'l' => [0x0C, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'm' => [0x00, 0x00, 0x1A, 0x15, 0x15, 0x15, 0x15],
        'n' => [0x00, 0x00, 0x1E, 0x11, 0x11, 0x11, 0x11],
        'o' => [0x00, 0x00, 0x0E, 0x11, 0x11, 0x11, 0x0E],
        'p' => [0x00, 0x00, 0x1E, 0x11, 0x1E, 0x10, 0x10],
        'r' => [0x00, 0x00, 0x16, 0x19, 0x10, 0x10, 0x10],
        's' => [0x00, 0x00, 0x0F, 0x10, 0x0E, 0x01, 0x1E],
        't' => [0x08, 0x08, 0x1E, 0x08, 0x08, 0x09, 0x06],
        'u' => [0x00, 0x00, 0x11, 0x11, 0x11, 0x13, 0x0D],
        'v' => [0x00, 0x00, 0x11, 0x11, 0x11, 0x0A, 0x04],
        'x' => [0x00, 0x00, 0x11, 0x0A, 0x04, 0x0A, 0x11],
        'y' => [0x00, 0x00, 0x11, 0x11, 0x0F, 0x01, 0x0E],
        // Unknown characters render as a hollow box.
        _ => [0x1F, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1F],
    }
}

fn draw_text(img: &mut RgbImage, x: i64, y: i64, text: &str, color: Rgb<u8>) {
    let mut cx = x;
    for c in text.chars() {
        let rows = glyph(c);
        for (ry, row) in rows.iter().enumerate() {
            for bit in 0..5 {
                if row & (0x10 >> bit) != 0 {
                    put(img, cx + bit as i64, y + ry as i64, color);
                }
            }
        }
        cx += 6;
    }
}

fn draw_text_vertical(img: &mut RgbImage, x: i64, y: i64, text: &str, color: Rgb<u8>) {
    let mut cy = y;
    for c in text.chars() {
        let rows = glyph(c);
        for (ry, row) in rows.iter().enumerate() {
            for bit in 0..5 {
                if row & (0x10 >> bit) != 0 {
                    put(img, x + bit as i64, cy + ry as i64, color);
                }
            }
        }
        cy += 8;
    }
}
