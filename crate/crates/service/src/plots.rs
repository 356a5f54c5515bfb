//! Minimal PNG line charts: axes, light grid, phase dividers and one
//! coloured polyline per series. There is no text; colours follow
//! [`PALETTE`] in series order and the legend lives in report.json.

use image::{Rgb, RgbImage};
use std::path::Path;

pub const PALETTE: [[u8; 3]; 6] =
    [[31, 119, 180], [255, 127, 14], [44, 160, 44], [214, 39, 40], [148, 103, 189], [140, 86, 75]];

const MARGIN: u32 = 30;

pub struct Series<'a> {
    pub values: &'a [Option<f64>],
    /// Dashed lines are drawn for baselines.
    pub dashed: bool,
    pub color: [u8; 3],
}

pub struct Chart<'a> {
    pub width: u32,
    pub height: u32,
    pub series: Vec<Series<'a>>,
    /// Sample indices where a new phase starts.
    pub dividers: Vec<usize>,
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, Rgb(c));
    }
}

/// Bresenham; `skip` leaves gaps every 6 pixels when set.
fn line(img: &mut RgbImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64), c: [u8; 3], skip: bool) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    let mut n = 0u32;
    loop {
        if !skip || (n / 6) % 2 == 0 {
            put(img, x, y, c);
            put(img, x, y + 1, c);
        }
        n += 1;
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

impl Chart<'_> {
    pub fn render(&self) -> RgbImage {
        let (w, h) = (self.width.max(2 * MARGIN + 10), self.height.max(2 * MARGIN + 10));
        let mut img = RgbImage::from_pixel(w, h, Rgb([255, 255, 255]));
        let (left, right, top, bottom) = (MARGIN as i64, (w - MARGIN / 2) as i64, (MARGIN / 2) as i64, (h - MARGIN) as i64);
        let n = self.series.iter().map(|s| s.values.len()).max().unwrap_or(0);
        let finite = self.series.iter().flat_map(|s| s.values.iter().flatten().copied()).filter(|v| v.is_finite());
        let ymax = finite.fold(0.0f64, f64::max).max(1e-9) * 1.05;
        for k in 1..5 {
            let y = bottom - (bottom - top) * k / 5;
            line(&mut img, (left, y), (right, y), [230, 230, 230], false);
        }
        let x_of = |i: usize| left + ((right - left) as f64 * i as f64 / (n.max(2) - 1) as f64).round() as i64;
        let y_of = |v: f64| bottom - ((bottom - top) as f64 * (v / ymax)).round() as i64;
        for &d in &self.dividers {
            line(&mut img, (x_of(d), top), (x_of(d), bottom), [180, 180, 180], true);
        }
        line(&mut img, (left, bottom), (right, bottom), [0, 0, 0], false);
        line(&mut img, (left, top), (left, bottom), [0, 0, 0], false);
        for s in &self.series {
            let mut prev: Option<(i64, i64)> = None;
            for (i, v) in s.values.iter().enumerate() {
                match v.filter(|v| v.is_finite()) {
                    Some(v) => {
                        let p = (x_of(i), y_of(v));
                        if let Some(q) = prev {
                            line(&mut img, q, p, s.color, s.dashed);
                        }
                        prev = Some(p);
                    }
                    None => prev = None,
                }
            }
        }
        img
    }

    pub fn save(&self, path: &Path) -> Result<(), image::ImageError> {
        self.render().save(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_series_in_colour() {
        let a = [Some(1.0), Some(2.0), None, Some(3.0)];
        let chart = Chart {
            width: 200,
            height: 100,
            series: vec![Series { values: &a, dashed: false, color: PALETTE[0] }],
            dividers: vec![2],
        };
        let img = chart.render();
        assert_eq!((img.width(), img.height()), (200, 100));
        assert!(img.pixels().any(|p| p.0 == PALETTE[0]));
    }

    #[test]
    fn empty_chart_renders() {
        let chart = Chart { width: 10, height: 10, series: vec![], dividers: vec![] };
        let img = chart.render();
        assert!(img.width() >= 70);
    }
}
