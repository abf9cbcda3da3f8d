use crate::codec::{reconstruct_chroma, reconstruct_luma};
use crate::eed::{EedParams, SolverConfig};
use crate::error::{Error, Result};
use crate::image::{plane_mse, BlockGrid, BlockMask, PixelPlane, YCbCrImage};

/// Channels that share one block mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelGroup {
    Luma,
    Chroma,
}

impl ChannelGroup {
    pub fn name(self) -> &'static str {
        match self {
            ChannelGroup::Luma => "luma",
            ChannelGroup::Chroma => "chroma",
        }
    }
}

fn group_planes(img: &YCbCrImage, group: ChannelGroup) -> Vec<&PixelPlane> {
    match group {
        ChannelGroup::Luma => vec![&img.y],
        ChannelGroup::Chroma => vec![&img.cb, &img.cr],
    }
}

/// Mean squared error over the real pixels of one block, averaged over the
/// planes given.
pub(crate) fn block_error_planes(recon: &[&PixelPlane], orig: &[&PixelPlane], grid: &BlockGrid, index: usize) -> f64 {
    let r = grid.rect(index);
    let mut total = 0.0;
    for (a, b) in recon.iter().zip(orig) {
        let mut sse = 0.0;
        for y in r.y0..r.y0 + r.h {
            for x in r.x0..r.x0 + r.w {
                let d = a.get(x, y) - b.get(x, y);
                sse += d * d;
            }
        }
        total += sse / (r.w * r.h) as f64;
    }
    total / recon.len() as f64
}

/// Local error of block `index`: Y for luma, the mean of the Cb and Cr
/// errors for chroma. `orig` is the uncompressed image.
pub fn block_local_error(
    recon: &YCbCrImage,
    orig: &YCbCrImage,
    grid: &BlockGrid,
    index: usize,
    group: ChannelGroup,
) -> Result<f64> {
    if recon.width() != orig.width() || recon.height() != orig.height() {
        return Err(Error::DimensionMismatch("reconstruction and original differ in size".into()));
    }
    if grid.width() != orig.width() || grid.height() != orig.height() {
        return Err(Error::DimensionMismatch("grid does not match the image".into()));
    }
    if index >= grid.len() {
        return Err(Error::OutOfRange {
            index,
            limit: grid.len(),
        });
    }
    Ok(block_error_planes(&group_planes(recon, group), &group_planes(orig, group), grid, index))
}

/// Whole-image error of a channel group.
pub fn group_mse(recon: &YCbCrImage, orig: &YCbCrImage, group: ChannelGroup) -> f64 {
    let r = group_planes(recon, group);
    let o = group_planes(orig, group);
    r.iter().zip(&o).map(|(a, b)| plane_mse(a, b)).sum::<f64>() / r.len() as f64
}

/// One channel group to be reconstructed from kept blocks.
///
/// `init` holds the values kept blocks take (the baseline JPEG decode) and
/// `orig` the reference for errors. Chroma is inpainted with the tensor of
/// `guide`, a luma plane.
#[derive(Debug, Clone, Copy)]
pub struct GroupProblem<'a> {
    pub init: &'a YCbCrImage,
    pub orig: &'a YCbCrImage,
    pub group: ChannelGroup,
    pub params: EedParams,
    pub guide: Option<&'a PixelPlane>,
    pub solver: SolverConfig,
}

/// Reconstructed planes of a group (one for luma, Cb and Cr for chroma).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupRecon {
    pub planes: Vec<PixelPlane>,
    pub converged: bool,
}

impl<'a> GroupProblem<'a> {
    pub fn luma(init: &'a YCbCrImage, orig: &'a YCbCrImage, params: EedParams, solver: SolverConfig) -> Self {
        Self {
            init,
            orig,
            group: ChannelGroup::Luma,
            params,
            guide: None,
            solver,
        }
    }

    pub fn chroma(
        init: &'a YCbCrImage,
        orig: &'a YCbCrImage,
        guide: &'a PixelPlane,
        params: EedParams,
        solver: SolverConfig,
    ) -> Self {
        Self {
            init,
            orig,
            group: ChannelGroup::Chroma,
            params,
            guide: Some(guide),
            solver,
        }
    }

    pub fn grid(&self) -> BlockGrid {
        BlockGrid::new(self.orig.width(), self.orig.height())
    }

    pub fn with_params(&self, params: EedParams) -> Self {
        Self { params, ..*self }
    }

    /// Inpaints the group for `mask`, starting from `warm` if given.
    pub fn solve(&self, mask: &BlockMask, warm: Option<&GroupRecon>) -> Result<GroupRecon> {
        match self.group {
            ChannelGroup::Luma => {
                let (y, ok) = reconstruct_luma(
                    &self.init.y,
                    mask,
                    self.params,
                    &self.solver,
                    warm.map(|w| &w.planes[0]),
                )?;
                Ok(GroupRecon {
                    planes: vec![y],
                    converged: ok,
                })
            }
            ChannelGroup::Chroma => {
                let guide = self
                    .guide
                    .ok_or_else(|| Error::InvalidInput("chroma problem without luma guide".into()))?;
                let (cb, cr, ok) = reconstruct_chroma(
                    &self.init.cb,
                    &self.init.cr,
                    mask,
                    guide,
                    self.params,
                    &self.solver,
                    warm.map(|w| (&w.planes[0], &w.planes[1])),
                )?;
                Ok(GroupRecon {
                    planes: vec![cb, cr],
                    converged: ok,
                })
            }
        }
    }

    fn orig_planes(&self) -> Vec<&PixelPlane> {
        group_planes(self.orig, self.group)
    }

    pub fn mse(&self, recon: &GroupRecon) -> f64 {
        let o = self.orig_planes();
        recon.planes.iter().zip(&o).map(|(a, b)| plane_mse(a, b)).sum::<f64>() / o.len() as f64
    }

    pub fn block_errors(&self, recon: &GroupRecon, indices: &[usize]) -> Vec<f64> {
        let grid = self.grid();
        let r: Vec<&PixelPlane> = recon.planes.iter().collect();
        let o = self.orig_planes();
        indices.iter().map(|&i| block_error_planes(&r, &o, &grid, i)).collect()
    }
}

/// Indices ordered by descending error, ties by ascending index.
pub(crate) fn rank_by_error(indices: &[usize], errors: &[f64]) -> Vec<usize> {
    let mut order: Vec<(usize, f64)> = indices.iter().copied().zip(errors.iter().copied()).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    order.into_iter().map(|(i, _)| i).collect()
}
