use super::plane::PixelPlane;
use crate::error::{Error, Result};

pub const BLOCK: usize = 8;

/// Partition of a `width`x`height` image into 8x8 blocks. Boundary blocks
/// may be partial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockGrid {
    width: usize,
    height: usize,
    nx: usize,
    ny: usize,
}

/// Pixel rectangle covered by one block (unpadded).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockRect {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

impl BlockGrid {
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "empty grid");
        Self {
            width,
            height,
            nx: width.div_ceil(BLOCK),
            ny: height.div_ceil(BLOCK),
        }
    }

    pub fn for_plane(plane: &PixelPlane) -> Self {
        Self::new(plane.width(), plane.height())
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Total number of blocks.
    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rect(&self, index: usize) -> BlockRect {
        let bx = index % self.nx;
        let by = index / self.nx;
        let x0 = bx * BLOCK;
        let y0 = by * BLOCK;
        BlockRect {
            x0,
            y0,
            w: BLOCK.min(self.width - x0),
            h: BLOCK.min(self.height - y0),
        }
    }

    #[inline]
    pub fn block_of(&self, x: usize, y: usize) -> usize {
        (y / BLOCK) * self.nx + x / BLOCK
    }

    fn check(&self, index: usize) -> Result<()> {
        if index >= self.len() {
            return Err(Error::OutOfRange {
                index,
                limit: self.len(),
            });
        }
        Ok(())
    }

    fn check_plane(&self, plane: &PixelPlane) -> Result<()> {
        if plane.width() != self.width || plane.height() != self.height {
            return Err(Error::DimensionMismatch(format!(
                "plane {}x{} vs grid {}x{}",
                plane.width(),
                plane.height(),
                self.width,
                self.height
            )));
        }
        Ok(())
    }
}

/// Reads block `index` as a full 8x8 tile, padding partial boundary blocks
/// by edge replication.
pub fn block_extract(plane: &PixelPlane, grid: &BlockGrid, index: usize) -> Result<[f64; 64]> {
    grid.check(index)?;
    grid.check_plane(plane)?;
    let r = grid.rect(index);
    let mut tile = [0.0; 64];
    for ty in 0..BLOCK {
        let y = r.y0 + ty.min(r.h - 1);
        for tx in 0..BLOCK {
            let x = r.x0 + tx.min(r.w - 1);
            tile[ty * BLOCK + tx] = plane.get(x, y);
        }
    }
    Ok(tile)
}

/// Writes the unpadded part of `tile` back to block `index`.
pub fn block_place(
    plane: &mut PixelPlane,
    grid: &BlockGrid,
    index: usize,
    tile: &[f64; 64],
) -> Result<()> {
    grid.check(index)?;
    grid.check_plane(plane)?;
    let r = grid.rect(index);
    for ty in 0..r.h {
        for tx in 0..r.w {
            plane.set(r.x0 + tx, r.y0 + ty, tile[ty * BLOCK + tx]);
        }
    }
    Ok(())
}

/// Which 8x8 blocks are stored ("kept") rather than inpainted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockMask {
    grid: BlockGrid,
    kept: Vec<bool>,
}

impl BlockMask {
    pub fn full(grid: BlockGrid) -> Self {
        Self {
            grid,
            kept: vec![true; grid.len()],
        }
    }

    pub fn empty(grid: BlockGrid) -> Self {
        Self {
            grid,
            kept: vec![false; grid.len()],
        }
    }

    pub fn from_bits(grid: BlockGrid, kept: Vec<bool>) -> Result<Self> {
        if kept.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} mask bits for {} blocks",
                kept.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, kept })
    }

    #[inline]
    pub fn grid(&self) -> &BlockGrid {
        &self.grid
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.kept
    }

    #[inline]
    pub fn is_kept(&self, index: usize) -> bool {
        self.kept[index]
    }

    #[inline]
    pub fn set(&mut self, index: usize, kept: bool) {
        self.kept[index] = kept;
    }

    pub fn kept_count(&self) -> usize {
        self.kept.iter().filter(|&&k| k).count()
    }

    pub fn density(&self) -> f64 {
        self.kept_count() as f64 / self.kept.len() as f64
    }

    /// Kept block indices in ascending row-major order.
    pub fn kept_indices(&self) -> Vec<usize> {
        (0..self.kept.len()).filter(|&i| self.kept[i]).collect()
    }

    pub fn dropped_indices(&self) -> Vec<usize> {
        (0..self.kept.len()).filter(|&i| !self.kept[i]).collect()
    }

    /// Pixel-level known-data mask: true exactly on pixels of kept blocks.
    pub fn pixel_mask(&self) -> Vec<bool> {
        let (w, h) = (self.grid.width(), self.grid.height());
        let mut out = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                out[y * w + x] = self.kept[self.grid.block_of(x, y)];
            }
        }
        out
    }
}
