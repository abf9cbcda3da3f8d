use crate::error::{Error, Result};
use crate::image::{block_extract, block_place, BlockGrid, BlockMask, PixelPlane, BLOCK};

/// Value of unused cells in a packed image.
pub const PACK_FILL: f64 = 128.0;

/// Block columns and rows of the packed layout for `n` blocks.
pub fn packed_layout(n: usize) -> (usize, usize) {
    let mut cols = (n as f64).sqrt() as usize;
    while cols * cols < n {
        cols += 1;
    }
    while cols > 0 && (cols - 1) * (cols - 1) >= n {
        cols -= 1;
    }
    (cols, n.div_ceil(cols))
}

/// Copies the kept blocks of `plane` (ascending block index) into a compact
/// grid of `ceil(sqrt(n))` columns.
pub fn pack_blocks(plane: &PixelPlane, mask: &BlockMask) -> Result<PixelPlane> {
    let kept = mask.kept_indices();
    if kept.is_empty() {
        return Err(Error::InvalidInput("cannot pack an empty mask".into()));
    }
    let (cols, rows) = packed_layout(kept.len());
    let mut out = PixelPlane::filled(cols * BLOCK, rows * BLOCK, PACK_FILL);
    let pgrid = BlockGrid::new(cols * BLOCK, rows * BLOCK);
    for (slot, &index) in kept.iter().enumerate() {
        let tile = block_extract(plane, mask.grid(), index)?;
        block_place(&mut out, &pgrid, slot, &tile)?;
    }
    Ok(out)
}

/// Writes the blocks of a packed image back to the kept positions of `mask`
/// in `target`.
pub fn unpack_blocks(packed: &PixelPlane, mask: &BlockMask, target: &mut PixelPlane) -> Result<()> {
    let kept = mask.kept_indices();
    let (cols, rows) = packed_layout(kept.len().max(1));
    if packed.width() != cols * BLOCK || packed.height() != rows * BLOCK {
        return Err(Error::DimensionMismatch(format!(
            "packed image is {}x{}, layout for {} blocks needs {}x{}",
            packed.width(),
            packed.height(),
            kept.len(),
            cols * BLOCK,
            rows * BLOCK
        )));
    }
    let pgrid = BlockGrid::for_plane(packed);
    for (slot, &index) in kept.iter().enumerate() {
        let tile = block_extract(packed, &pgrid, slot)?;
        block_place(target, mask.grid(), index, &tile)?;
    }
    Ok(())
}
