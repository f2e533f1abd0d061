//! Small raster renderers for simulator items.

use std::path::Path;

use image::{Rgb, RgbImage};

use super::QaError;
use crate::geometry::{ColorGrid, VoxelShape};

pub const BACKGROUND: Rgb<u8> = Rgb([255, 255, 255]);

const PALETTE: [[u8; 3]; 10] = [
    [255, 255, 255],
    [220, 50, 47],
    [38, 139, 210],
    [133, 153, 0],
    [181, 137, 0],
    [108, 113, 196],
    [42, 161, 152],
    [211, 54, 130],
    [203, 75, 22],
    [88, 110, 117],
];

/// Palette color; index 0 is the empty/background cell.
pub fn color(index: u8) -> Rgb<u8> {
    Rgb(PALETTE[index as usize % PALETTE.len()])
}

fn shade(c: Rgb<u8>, f: f64) -> Rgb<u8> {
    Rgb(c.0.map(|v| (v as f64 * f).round().clamp(0.0, 255.0) as u8))
}

pub fn render_grid(grid: &ColorGrid, cell: u32) -> RgbImage {
    let (w, h) = (grid.width as u32 * cell, grid.height as u32 * cell);
    let mut img = RgbImage::from_pixel(w + 1, h + 1, Rgb([40, 40, 40]));
    for r in 0..grid.height {
        for c in 0..grid.width {
            let col = color(grid.get(r, c));
            for y in 1..cell {
                for x in 1..cell {
                    img.put_pixel(c as u32 * cell + x, r as u32 * cell + y, col);
                }
            }
        }
    }
    img
}

fn fill_convex(img: &mut RgbImage, pts: &[[f64; 2]], col: Rgb<u8>) {
    let (w, h) = img.dimensions();
    let minx = pts.iter().map(|p| p[0]).fold(f64::MAX, f64::min).floor().max(0.0) as u32;
    let maxx = pts.iter().map(|p| p[0]).fold(f64::MIN, f64::max).ceil().min(w as f64 - 1.0) as u32;
    let miny = pts.iter().map(|p| p[1]).fold(f64::MAX, f64::min).floor().max(0.0) as u32;
    let maxy = pts.iter().map(|p| p[1]).fold(f64::MIN, f64::max).ceil().min(h as f64 - 1.0) as u32;
    for y in miny..=maxy {
        for x in minx..=maxx {
            let p = [x as f64 + 0.5, y as f64 + 0.5];
            let mut sign = 0.0;
            let inside = (0..pts.len()).all(|i| {
                let a = pts[i];
                let b = pts[(i + 1) % pts.len()];
                let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
                if cross.abs() < 1e-12 {
                    return true;
                }
                if sign == 0.0 {
                    sign = cross.signum();
                }
                cross.signum() == sign
            });
            if inside {
                img.put_pixel(x, y, col);
            }
        }
    }
}

/// Oblique view of a voxel shape showing the top, front (-y) and right (+x)
/// faces, with z up.
pub fn render_voxels(shape: &VoxelShape, unit: f64) -> RgbImage {
    let size = (unit * 9.0) as u32;
    let mut img = RgbImage::from_pixel(size, size, BACKGROUND);
    let origin = [unit * 3.0, unit * 6.5];
    let proj = |x: f64, y: f64, z: f64| [origin[0] + unit * (x + 0.5 * y), origin[1] - unit * (z + 0.5 * y)];
    let min = [0, 1, 2].map(|i| shape.voxels.iter().map(|v| v.pos()[i]).min().unwrap_or(0));
    let mut order: Vec<_> = shape.voxels.iter().collect();
    order.sort_by(|a, b| {
        let key = |v: &&crate::geometry::Voxel| 0.5 * v.x as f64 - v.y as f64 + 0.5 * v.z as f64;
        key(a).total_cmp(&key(b)).then(a.cmp(b))
    });
    for v in order {
        let (x, y, z) = ((v.x - min[0]) as f64, (v.y - min[1]) as f64, (v.z - min[2]) as f64);
        let base = color(v.color.max(1));
        let front = [proj(x, y, z), proj(x + 1.0, y, z), proj(x + 1.0, y, z + 1.0), proj(x, y, z + 1.0)];
        let right = [proj(x + 1.0, y, z), proj(x + 1.0, y + 1.0, z), proj(x + 1.0, y + 1.0, z + 1.0), proj(x + 1.0, y, z + 1.0)];
        let top = [proj(x, y, z + 1.0), proj(x + 1.0, y, z + 1.0), proj(x + 1.0, y + 1.0, z + 1.0), proj(x, y + 1.0, z + 1.0)];
        fill_convex(&mut img, &front, base);
        fill_convex(&mut img, &right, shade(base, 0.7));
        fill_convex(&mut img, &top, shade(base, 1.2));
    }
    img
}

const GLYPHS: [(char, [u8; 5]); 37] = [
    ('A', [0b010, 0b101, 0b111, 0b101, 0b101]),
    ('B', [0b110, 0b101, 0b110, 0b101, 0b110]),
    ('C', [0b011, 0b100, 0b100, 0b100, 0b011]),
    ('D', [0b110, 0b101, 0b101, 0b101, 0b110]),
    ('E', [0b111, 0b100, 0b110, 0b100, 0b111]),
    ('F', [0b111, 0b100, 0b110, 0b100, 0b100]),
    ('G', [0b011, 0b100, 0b101, 0b101, 0b011]),
    ('H', [0b101, 0b101, 0b111, 0b101, 0b101]),
    ('I', [0b111, 0b010, 0b010, 0b010, 0b111]),
    ('J', [0b001, 0b001, 0b001, 0b101, 0b010]),
    ('K', [0b101, 0b101, 0b110, 0b101, 0b101]),
    ('L', [0b100, 0b100, 0b100, 0b100, 0b111]),
    ('M', [0b101, 0b111, 0b111, 0b101, 0b101]),
    ('N', [0b110, 0b101, 0b101, 0b101, 0b101]),
    ('O', [0b010, 0b101, 0b101, 0b101, 0b010]),
    ('P', [0b110, 0b101, 0b110, 0b100, 0b100]),
    ('Q', [0b010, 0b101, 0b101, 0b110, 0b011]),
    ('R', [0b110, 0b101, 0b110, 0b101, 0b101]),
    ('S', [0b011, 0b100, 0b010, 0b001, 0b110]),
    ('T', [0b111, 0b010, 0b010, 0b010, 0b010]),
    ('U', [0b101, 0b101, 0b101, 0b101, 0b111]),
    ('V', [0b101, 0b101, 0b101, 0b101, 0b010]),
    ('W', [0b101, 0b101, 0b111, 0b111, 0b101]),
    ('X', [0b101, 0b101, 0b010, 0b101, 0b101]),
    ('Y', [0b101, 0b101, 0b010, 0b010, 0b010]),
    ('Z', [0b111, 0b001, 0b010, 0b100, 0b111]),
    ('0', [0b111, 0b101, 0b101, 0b101, 0b111]),
    ('1', [0b010, 0b110, 0b010, 0b010, 0b111]),
    ('2', [0b110, 0b001, 0b010, 0b100, 0b111]),
    ('3', [0b110, 0b001, 0b010, 0b001, 0b110]),
    ('4', [0b101, 0b101, 0b111, 0b001, 0b001]),
    ('5', [0b111, 0b100, 0b110, 0b001, 0b110]),
    ('6', [0b011, 0b100, 0b111, 0b101, 0b111]),
    ('7', [0b111, 0b001, 0b010, 0b010, 0b010]),
    ('8', [0b111, 0b101, 0b111, 0b101, 0b111]),
    ('9', [0b111, 0b101, 0b111, 0b001, 0b110]),
    ('-', [0b000, 0b000, 0b111, 0b000, 0b000]),
];

/// Draws uppercase text with a 3x5 pixel font at the given scale.
pub fn draw_text(img: &mut RgbImage, text: &str, x: i64, y: i64, scale: u32, col: Rgb<u8>) {
    let (w, h) = img.dimensions();
    let mut cx = x;
    for ch in text.to_uppercase().chars() {
        if let Some((_, rows)) = GLYPHS.iter().find(|(c, _)| *c == ch) {
            for (r, bits) in rows.iter().enumerate() {
                for c in 0..3 {
                    if bits & (0b100 >> c) == 0 {
                        continue;
                    }
                    for dy in 0..scale {
                        for dx in 0..scale {
                            let px = cx + (c * scale + dx) as i64;
                            let py = y + (r as u32 * scale + dy) as i64;
                            if px >= 0 && py >= 0 && (px as u32) < w && (py as u32) < h {
                                img.put_pixel(px as u32, py as u32, col);
                            }
                        }
                    }
                }
            }
        }
        cx += 4 * scale as i64;
    }
}

/// Labeled points on a map; `extent` is the coordinate range shown on each
/// axis, with +y drawn upward.
pub fn render_map(points: &[(String, [f64; 2])], extent: f64, size: u32) -> RgbImage {
    let mut img = RgbImage::from_pixel(size, size, BACKGROUND);
    let margin = 24.0;
    let scale = (size as f64 - 2.0 * margin) / extent;
    for i in 0..=10 {
        let t = (margin + i as f64 * (size as f64 - 2.0 * margin) / 10.0) as u32;
        for k in margin as u32..(size - margin as u32) {
            img.put_pixel(t, k, Rgb([230, 230, 230]));
            img.put_pixel(k, t, Rgb([230, 230, 230]));
        }
    }
    draw_text(&mut img, "N", size as i64 / 2 - 3, 4, 3, Rgb([0, 0, 0]));
    for (i, (name, p)) in points.iter().enumerate() {
        let px = margin + p[0] * scale;
        let py = size as f64 - margin - p[1] * scale;
        let col = color(1 + (i % 9) as u8);
        for dy in -4i64..=4 {
            for dx in -4i64..=4 {
                if dx * dx + dy * dy <= 16 {
                    let (x, y) = (px as i64 + dx, py as i64 + dy);
                    if x >= 0 && y >= 0 && (x as u32) < size && (y as u32) < size {
                        img.put_pixel(x as u32, y as u32, col);
                    }
                }
            }
        }
        draw_text(&mut img, name, px as i64 + 6, py as i64 - 12, 2, Rgb([0, 0, 0]));
    }
    img
}

pub fn save_png(img: &RgbImage, path: &Path) -> Result<(), QaError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| QaError::Io { path: dir.display().to_string(), message: e.to_string() })?;
    }
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| QaError::Io { path: path.display().to_string(), message: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Voxel;

    #[test]
    fn grid_pixels_follow_cells() {
        let g = ColorGrid::new(2, 2, vec![1, 2, 3, 4]).unwrap();
        let img = render_grid(&g, 10);
        assert_eq!(img.get_pixel(5, 5), &color(1));
        assert_eq!(img.get_pixel(15, 15), &color(4));
    }

    #[test]
    fn voxels_and_map_draw_something() {
        let shape = VoxelShape::new(vec![Voxel { x: 0, y: 0, z: 0, color: 2 }]).unwrap();
        let img = render_voxels(&shape, 16.0);
        assert!(img.pixels().any(|p| *p == color(2)));
        let map = render_map(&[("BANK".into(), [5.0, 5.0])], 10.0, 128);
        assert!(map.pixels().any(|p| *p == Rgb([0, 0, 0])));
    }
}
