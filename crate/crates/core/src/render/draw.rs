//! Rasterization primitives: filled disks and 1-pixel lines.

use crate::model::Point;

/// Pixels whose centre lies within `radius` of `center` (pixel coordinates),
/// clipped to a `width × height` image, in row-major order.
pub fn disk_pixels(center: Point, radius: f64, width: usize, height: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if radius.is_nan() || radius < 0.0 || width == 0 || height == 0 {
        return out;
    }
    let clip = |lo: f64, n: usize| lo.max(0.0).min(n as f64) as usize;
    let x0 = clip((center.x - radius - 0.5).floor(), width);
    let x1 = clip((center.x + radius + 0.5).ceil(), width);
    let y0 = clip((center.y - radius - 0.5).floor(), height);
    let y1 = clip((center.y + radius + 0.5).ceil(), height);
    let r2 = radius * radius;
    for y in y0..y1 {
        let dy = y as f64 + 0.5 - center.y;
        for x in x0..x1 {
            let dx = x as f64 + 0.5 - center.x;
            if dx * dx + dy * dy <= r2 {
                out.push((x, y));
            }
        }
    }
    out
}

/// Pixel containing `p`, clamped into the image.
pub fn containing_pixel(p: Point, width: usize, height: usize) -> (usize, usize) {
    let clamp = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n.saturating_sub(1));
    (clamp(p.x, width), clamp(p.y, height))
}

/// Integer Bresenham line from `a` to `b`, both endpoints included.
pub fn line_pixels(a: (usize, usize), b: (usize, usize)) -> Vec<(usize, usize)> {
    let (mut x, mut y) = (a.0 as i64, a.1 as i64);
    let (x1, y1) = (b.0 as i64, b.1 as i64);
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy + 1) as usize);
    loop {
        out.push((x as usize, y as usize));
        if x == x1 && y == y1 {
            return out;
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
