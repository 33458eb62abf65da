//! Polygon and box rasterization onto the pixel grid.
//!
//! A pixel (row r, col c) is foreground iff its center (c + 0.5, r + 0.5)
//! lies inside the shape under the even-odd rule. Multi-polygon inputs
//! rasterize to the union. Everything is clipped to the grid.

use super::{rle_encode, BBox, BitMask, RleMask};
use crate::error::{Error, Result};

/// Rasterize a list of polygons, each a flat [x1,y1,x2,y2,...] vertex list.
pub fn polygons_to_rle(polygons: &[Vec<f64>], height: u32, width: u32) -> Result<RleMask> {
    for (i, poly) in polygons.iter().enumerate() {
        if poly.len() < 6 {
            return Err(Error::Format(format!(
                "polygon {i} has {} coordinates, need at least 6",
                poly.len()
            )));
        }
        if poly.len() % 2 != 0 {
            return Err(Error::Format(format!(
                "polygon {i} has an odd number of coordinates ({})",
                poly.len()
            )));
        }
        if let Some(bad) = poly.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!(
                "polygon {i} has a non-finite coordinate at index {bad}"
            )));
        }
    }
    let mut mask = BitMask::new(height, width);
    for poly in polygons {
        fill_even_odd(&mut mask, poly);
    }
    Ok(rle_encode(&mask))
}

/// Rasterize a box by treating its corners as a polygon, so boxes and
/// polygons share one set of boundary conventions.
pub fn bbox_to_rle(bbox: &BBox, height: u32, width: u32) -> Result<RleMask> {
    let poly = vec![
        bbox.x,
        bbox.y,
        bbox.x + bbox.w,
        bbox.y,
        bbox.x + bbox.w,
        bbox.y + bbox.h,
        bbox.x,
        bbox.y + bbox.h,
    ];
    polygons_to_rle(&[poly], height, width)
}

/// Set every pixel whose center falls inside `poly` (even-odd rule).
///
/// Per scanline y = r + 0.5 the crossings with the polygon edges are
/// collected using the half-open rule (horizontal edges never cross); a
/// center at x = c + 0.5 is inside iff an odd number of crossings lie at
/// or left of it, which matches a +x ray test counting strictly-greater
/// crossings.
fn fill_even_odd(mask: &mut BitMask, poly: &[f64]) {
    let n = poly.len() / 2;
    let h = mask.height();
    let w = mask.width();
    let mut crossings: Vec<f64> = Vec::with_capacity(n);
    for r in 0..h {
        let y = r as f64 + 0.5;
        crossings.clear();
        for i in 0..n {
            let (x1, y1) = (poly[2 * i], poly[2 * i + 1]);
            let j = (i + 1) % n;
            let (x2, y2) = (poly[2 * j], poly[2 * j + 1]);
            if (y1 <= y && y < y2) || (y2 <= y && y < y1) {
                crossings.push(x1 + (y - y1) * (x2 - x1) / (y2 - y1));
            }
        }
        if crossings.is_empty() {
            continue;
        }
        crossings.sort_by(|a, b| a.partial_cmp(b).expect("finite crossings"));
        let mut inside = false;
        let mut k = 0usize;
        for c in 0..w {
            let x = c as f64 + 0.5;
            while k < crossings.len() && crossings[k] <= x {
                inside = !inside;
                k += 1;
            }
            if inside {
                mask.set(r, c, true);
            }
        }
    }
}
