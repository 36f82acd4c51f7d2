//! Minimal static renderer: path overlays with obstacles, cubby walls and
//! the target, written as a PNG per run.

use std::path::Path;

use anyhow::Result;
use image::{Rgb, RgbImage};

const PALETTE: [[u8; 3]; 8] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [127, 127, 127],
];

pub struct SceneSketch {
    pub circles: Vec<([f64; 2], f64)>,
    pub segments: Vec<([f64; 2], [f64; 2])>,
    pub target: Option<[f64; 2]>,
    /// Paths grouped by variant index (used for coloring).
    pub paths: Vec<(usize, Vec<[f64; 2]>)>,
}

struct Frame {
    min: [f64; 2],
    scale: f64,
    height: u32,
}

impl Frame {
    fn to_px(&self, p: [f64; 2]) -> (f64, f64) {
        (
            (p[0] - self.min[0]) * self.scale,
            self.height as f64 - (p[1] - self.min[1]) * self.scale,
        )
    }
}

pub fn render_scene(sketch: &SceneSketch, path: &Path) -> Result<()> {
    fn grow(lo: &mut [f64; 2], hi: &mut [f64; 2], p: [f64; 2]) {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for (c, r) in &sketch.circles {
        grow(&mut lo, &mut hi, [c[0] - r, c[1] - r]);
        grow(&mut lo, &mut hi, [c[0] + r, c[1] + r]);
    }
    for (a, b) in &sketch.segments {
        grow(&mut lo, &mut hi, *a);
        grow(&mut lo, &mut hi, *b);
    }
    if let Some(t) = sketch.target {
        grow(&mut lo, &mut hi, t);
    }
    for (_, p) in &sketch.paths {
        if let Some(q) = p.first() {
            grow(&mut lo, &mut hi, *q);
        }
    }
    // frame on the static scene and starts; wild excursions draw clipped
    let diag = ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt();
    let center = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    for (_, p) in &sketch.paths {
        for q in p {
            let offset = ((q[0] - center[0]).powi(2) + (q[1] - center[1]).powi(2)).sqrt();
            if offset <= diag.max(1.0) {
                grow(&mut lo, &mut hi, *q);
            }
        }
    }
    if !lo[0].is_finite() {
        lo = [-1.0, -1.0];
        hi = [1.0, 1.0];
    }
    let margin = 0.08 * ((hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-6));
    lo = [lo[0] - margin, lo[1] - margin];
    hi = [hi[0] + margin, hi[1] + margin];

    let width: u32 = 900;
    let scale = width as f64 / (hi[0] - lo[0]);
    let height = ((hi[1] - lo[1]) * scale).ceil().max(16.0) as u32;
    let frame = Frame {
        min: lo,
        scale,
        height,
    };
    let mut img = RgbImage::from_pixel(width, height, Rgb([255, 255, 255]));

    for (center, radius) in &sketch.circles {
        let steps = 720;
        let mut prev = frame.to_px([center[0] + radius, center[1]]);
        for i in 1..=steps {
            let angle = i as f64 / steps as f64 * std::f64::consts::TAU;
            let next = frame.to_px([
                center[0] + radius * angle.cos(),
                center[1] + radius * angle.sin(),
            ]);
            draw_line(&mut img, prev, next, Rgb([60, 60, 60]));
            prev = next;
        }
    }
    for (a, b) in &sketch.segments {
        draw_line(&mut img, frame.to_px(*a), frame.to_px(*b), Rgb([60, 60, 60]));
    }
    for (variant, points) in &sketch.paths {
        let color = Rgb(PALETTE[variant % PALETTE.len()]);
        for pair in points.windows(2) {
            draw_line(&mut img, frame.to_px(pair[0]), frame.to_px(pair[1]), color);
        }
        if let Some(first) = points.first() {
            draw_dot(&mut img, frame.to_px(*first), 3, color);
        }
    }
    if let Some(target) = sketch.target {
        let (cx, cy) = frame.to_px(target);
        draw_line(&mut img, (cx - 6.0, cy), (cx + 6.0, cy), Rgb([0, 140, 0]));
        draw_line(&mut img, (cx, cy - 6.0), (cx, cy + 6.0), Rgb([0, 140, 0]));
    }

    img.save(path)?;
    Ok(())
}

fn put(img: &mut RgbImage, x: f64, y: f64, color: Rgb<u8>) {
    if x >= 0.0 && y >= 0.0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, color);
    }
}

fn draw_line(img: &mut RgbImage, from: (f64, f64), to: (f64, f64), color: Rgb<u8>) {
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    let steps = dx.abs().max(dy.abs()).ceil().max(1.0) * 2.0;
    for i in 0..=steps as usize {
        let t = i as f64 / steps;
        put(img, from.0 + dx * t, from.1 + dy * t, color);
    }
}

fn draw_dot(img: &mut RgbImage, center: (f64, f64), radius: i32, color: Rgb<u8>) {
    for dx in -radius..=radius {
        for dy in -radius..=radius {
            if dx * dx + dy * dy <= radius * radius {
                put(img, center.0 + dx as f64, center.1 + dy as f64, color);
            }
        }
    }
}
