//! Synthetic corner image: a polygon whose vertices lie in distinct blocks,
//! used to check that sparsification keeps exactly the corner blocks.

use crate::eed::{inpaint, EedParams, SolverConfig};
use crate::error::Result;
use crate::image::{psnr, BlockGrid, BlockMask, PixelPlane, YCbCrImage, BLOCK};
use crate::maskopt::{sparsify, GroupProblem, SparsifyConfig};

pub const CORNER_WIDTH: usize = 128;
pub const CORNER_HEIGHT: usize = 128;
pub const CORNER_BACKGROUND: f64 = 40.0;
pub const CORNER_FOREGROUND: f64 = 210.0;

/// Diffusion parameters of the demo. A small contrast parameter keeps the
/// long edges between corners sharp.
pub const CORNER_PARAMS: EedParams = EedParams {
    sigma: 0.8,
    lambda: 0.01,
};

/// Sparsification fractions of the demo. The default candidate fraction
/// removes too few blocks per round near the target for the ranking to
/// separate corners from edge blocks.
pub const CORNER_SPARSIFY: SparsifyConfig = SparsifyConfig {
    c_ps: 0.5,
    r_ps: 0.1,
    target_density: 1.0,
    seed: 0,
};

/// Vertices of a T-shaped polygon in block coordinates; each sits at its
/// block centre, so the axis-aligned edges fall on pixel boundaries.
pub const CORNER_VERTICES: [(usize, usize); 8] = [(3, 3), (12, 3), (12, 7), (9, 7), (9, 12), (6, 12), (6, 7), (3, 7)];

const SUPERSAMPLE: usize = 8;

fn vertex_px(v: (usize, usize)) -> (f64, f64) {
    ((v.0 * BLOCK) as f64 + 4.0, (v.1 * BLOCK) as f64 + 4.0)
}

fn inside(px: f64, py: f64) -> bool {
    let mut hit = false;
    let n = CORNER_VERTICES.len();
    for i in 0..n {
        let (x0, y0) = vertex_px(CORNER_VERTICES[i]);
        let (x1, y1) = vertex_px(CORNER_VERTICES[(i + 1) % n]);
        if (y0 > py) != (y1 > py) && px < x0 + (py - y0) * (x1 - x0) / (y1 - y0) {
            hit = !hit;
        }
    }
    hit
}

/// Supersampled rendering of the polygon; pixel (x, y) covers
/// [x, x+1) x [y, y+1).
pub fn corner_image() -> PixelPlane {
    let s = SUPERSAMPLE as f64;
    PixelPlane::from_fn(CORNER_WIDTH, CORNER_HEIGHT, |x, y| {
        let mut count = 0;
        for j in 0..SUPERSAMPLE {
            for i in 0..SUPERSAMPLE {
                if inside(x as f64 + (i as f64 + 0.5) / s, y as f64 + (j as f64 + 0.5) / s) {
                    count += 1;
                }
            }
        }
        let cover = count as f64 / (SUPERSAMPLE * SUPERSAMPLE) as f64;
        (CORNER_BACKGROUND + cover * (CORNER_FOREGROUND - CORNER_BACKGROUND)).round()
    })
}

/// Indices of the blocks holding a polygon vertex, ascending.
pub fn corner_blocks() -> Vec<usize> {
    let grid = BlockGrid::new(CORNER_WIDTH, CORNER_HEIGHT);
    let mut v: Vec<usize> = CORNER_VERTICES.iter().map(|&(bx, by)| by * grid.nx() + bx).collect();
    v.sort_unstable();
    v
}

#[derive(Debug, Clone)]
pub struct CornerDemo {
    pub original: PixelPlane,
    pub mask: BlockMask,
    pub kept: Vec<usize>,
    /// Whether each kept block holds a corner.
    pub is_corner: Vec<bool>,
    pub reconstruction: PixelPlane,
    pub psnr: f64,
}

impl CornerDemo {
    pub fn corner_hits(&self) -> usize {
        self.is_corner.iter().filter(|&&c| c).count()
    }

    /// Original with dropped blocks blanked to white.
    pub fn mask_panel(&self) -> PixelPlane {
        let known = self.mask.pixel_mask();
        PixelPlane::from_fn(CORNER_WIDTH, CORNER_HEIGHT, |x, y| {
            if known[y * CORNER_WIDTH + x] {
                self.original.get(x, y)
            } else {
                255.0
            }
        })
    }
}

/// Sparsifies the corner image down to 8 blocks and reconstructs it.
pub fn corner_demo(seed: u64, sparsify_cfg: &SparsifyConfig) -> Result<CornerDemo> {
    let original = corner_image();
    let grid = BlockGrid::for_plane(&original);
    let gray = |v: f64| PixelPlane::filled(CORNER_WIDTH, CORNER_HEIGHT, v);
    let img = YCbCrImage::new(original.clone(), gray(128.0), gray(128.0))?;
    let problem = GroupProblem::luma(&img, &img, CORNER_PARAMS, SolverConfig::relaxed());
    let cfg = SparsifyConfig {
        target_density: CORNER_VERTICES.len() as f64 / grid.len() as f64,
        seed,
        ..*sparsify_cfg
    };
    let mask = sparsify(&problem, &cfg)?;
    let corners = corner_blocks();
    let kept = mask.kept_indices();
    let is_corner = kept.iter().map(|i| corners.contains(i)).collect();
    let out = inpaint(&original, &mask.pixel_mask(), CORNER_PARAMS, &SolverConfig::default())?;
    let psnr = psnr(&[&original], &[&out.plane])?.db();
    Ok(CornerDemo {
        original,
        mask,
        kept,
        is_corner,
        reconstruction: out.plane,
        psnr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corners_in_distinct_blocks() {
        let c = corner_blocks();
        assert_eq!(c.len(), 8);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn image_has_two_levels_around_each_vertex() {
        let img = corner_image();
        let vals = img.data();
        assert!(vals.iter().any(|&v| v == CORNER_BACKGROUND));
        assert!(vals.iter().any(|&v| v == CORNER_FOREGROUND));
        assert!(vals.iter().all(|&v| (CORNER_BACKGROUND..=CORNER_FOREGROUND).contains(&v)));
        // every vertex pixel straddles the boundary region
        for &(bx, by) in &CORNER_VERTICES {
            let (x, y) = (bx * BLOCK + 4, by * BLOCK + 4);
            let around: Vec<f64> = (y - 2..=y + 2).flat_map(|yy| (x - 2..=x + 2).map(move |xx| (xx, yy))).map(|(xx, yy)| img.get(xx, yy)).collect();
            assert!(around.iter().any(|&v| v > 150.0) && around.iter().any(|&v| v < 100.0));
        }
    }
}
