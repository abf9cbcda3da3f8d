use super::stencil::Stencil;
use super::tensor::{diffusion_tensor, EedParams, TensorField};
use crate::error::{Error, Result};
use crate::image::PixelPlane;
use rayon::prelude::*;

/// Entries per partial sum. Fixed so that reductions do not depend on the
/// thread count.
const CHUNK: usize = 4096;

/// Below this largest entry-wise tensor change the tensor is frozen.
const TENSOR_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Stop when the residual norm falls below this fraction of the residual
    /// of the push-pull start (see [`fill_unknown`]), so that warm starts
    /// are judged by the same yardstick as cold ones.
    pub residual_tol: f64,
    /// Tensor rebuilds before the tensor is frozen.
    pub max_outer: usize,
    /// Cap on conjugate gradient iterations over the whole solve.
    pub max_inner: usize,
    /// Conjugate gradient iterations between tensor rebuilds.
    pub tensor_refresh: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            residual_tol: 1e-6,
            max_outer: 20,
            max_inner: 10_000,
            tensor_refresh: 50,
        }
    }
}

impl SolverConfig {
    /// Looser tolerance used while searching masks and parameters.
    pub fn relaxed() -> Self {
        Self {
            residual_tol: 1e-4,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) || self.tensor_refresh == 0 {
            return Err(Error::InvalidInput(format!("invalid solver config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InpaintOutcome {
    pub plane: PixelPlane,
    pub converged: bool,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Final residual norm relative to the push-pull start.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

struct System<'a> {
    known: &'a [bool],
    stencil: Stencil,
    inv_diag: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> System<'a> {
    fn new(known: &'a [bool], tensor: &TensorField) -> Self {
        let stencil = Stencil::new(tensor);
        let inv_diag = stencil
            .diagonal()
            .into_iter()
            .map(|d| if d > 1e-12 { 1.0 / d } else { 1.0 })
            .collect();
        Self {
            known,
            scratch: vec![0.0; known.len()],
            stencil,
            inv_diag,
        }
    }

    /// `r = (L u)` on unknown pixels, zero elsewhere.
    fn residual(&mut self, u: &[f64], r: &mut [f64]) {
        self.stencil.apply(u, &mut self.scratch);
        let known = self.known;
        r.par_iter_mut()
            .zip(self.scratch.par_iter())
            .zip(known.par_iter())
            .for_each(|((r, &s), &k)| *r = if k { 0.0 } else { s });
    }

    /// Preconditioned CG on the unknowns, restarted from the current iterate.
    /// Returns the iterations spent and the final residual norm.
    fn cg(&mut self, u: &mut [f64], limit: usize, target: f64) -> (usize, f64) {
        let n = u.len();
        let mut r = vec![0.0; n];
        self.residual(u, &mut r);
        let mut rr = dot(&r, &r);
        if rr.sqrt() <= target || limit == 0 {
            return (0, rr.sqrt());
        }
        let mut z: Vec<f64> = r.iter().zip(&self.inv_diag).map(|(a, b)| a * b).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut q = vec![0.0; n];
        let mut its = 0;
        while its < limit {
            // q = A p = -(L p) on unknowns; p vanishes on known pixels
            self.residual(&p, &mut q);
            q.par_iter_mut().for_each(|v| *v = -*v);
            let pq = dot(&p, &q);
            if !(pq > 0.0) {
                break;
            }
            let alpha = rz / pq;
            its += 1;
            u.par_iter_mut().zip(p.par_iter()).for_each(|(x, &d)| *x += alpha * d);
            r.par_iter_mut().zip(q.par_iter()).for_each(|(x, &d)| *x -= alpha * d);
            rr = dot(&r, &r);
            if rr.sqrt() <= target {
                break;
            }
            z.par_iter_mut()
                .zip(r.par_iter())
                .zip(self.inv_diag.par_iter())
                .for_each(|((z, &r), &d)| *z = r * d);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p.par_iter_mut().zip(z.par_iter()).for_each(|(p, &z)| *p = z + beta * *p);
        }
        (its, rr.sqrt())
    }
}

fn check_inputs(init: &PixelPlane, known: &[bool]) -> Result<()> {
    if known.len() != init.len() {
        return Err(Error::DimensionMismatch(format!(
            "mask has {} entries for {} pixels",
            known.len(),
            init.len()
        )));
    }
    if !known.iter().any(|&k| k) {
        return Err(Error::InvalidInput("mask contains no known pixel".into()));
    }
    Ok(())
}

fn solve(
    init: &PixelPlane,
    known: &[bool],
    tensor: TensorField,
    params: Option<EedParams>,
    cfg: &SolverConfig,
) -> Result<InpaintOutcome> {
    cfg.validate()?;
    check_inputs(init, known)?;
    let (w, h) = (init.width(), init.height());
    let mut u = init.data().to_vec();
    let mut tensor = tensor;
    let mut sys = System::new(known, &tensor);

    let mut r = vec![0.0; u.len()];
    sys.residual(fill_unknown(init, known)?.data(), &mut r);
    let r0 = dot(&r, &r).sqrt();
    sys.residual(&u, &mut r);
    let start = dot(&r, &r).sqrt();
    let unknown = known.iter().filter(|&&k| !k).count();
    let target = (cfg.residual_tol * r0).max(1e-10 * (unknown as f64).sqrt());

    let mut outer = 0;
    let mut inner = 0;
    let mut frozen = params.is_none();
    let mut rnorm = start;
    let mut converged = start <= target;
    while !converged {
        let budget = cfg.max_inner - inner;
        let limit = if frozen { budget } else { cfg.tensor_refresh.min(budget) };
        let (its, norm) = sys.cg(&mut u, limit, target);
        inner += its;
        rnorm = norm;
        if frozen || inner >= cfg.max_inner {
            converged = rnorm <= target;
            break;
        }
        if its < limit && rnorm > target {
            // breakdown without progress; freeze and let the next pass decide
            frozen = true;
        }
        if let Some(params) = params {
            let plane = PixelPlane::new(w, h, u.clone())?;
            let fresh = diffusion_tensor(&plane, params)?;
            let change = fresh.max_change(&tensor);
            tensor = fresh;
            sys = System::new(known, &tensor);
            outer += 1;
            sys.residual(&u, &mut r);
            rnorm = dot(&r, &r).sqrt();
            if rnorm <= target {
                converged = true;
                break;
            }
            if outer >= cfg.max_outer || change < TENSOR_TOL {
                frozen = true;
            }
        }
    }
    if !converged {
        log::warn!(
            "diffusion solve stopped after {inner} iterations at relative residual {:.3e}",
            rnorm / r0
        );
    }
    Ok(InpaintOutcome {
        plane: PixelPlane::new(w, h, u)?,
        converged,
        outer_iterations: outer,
        inner_iterations: inner,
        relative_residual: if r0 > 0.0 { rnorm / r0 } else { 0.0 },
    })
}

/// EED inpainting: solves `div(D(u) grad u) = 0` on pixels where `known` is
/// false, with the known pixels fixed. `init` supplies the known values and
/// the starting guess for the unknown ones. The tensor is lagged: it is
/// rebuilt from the current iterate every `tensor_refresh` iterations.
pub fn inpaint(
    init: &PixelPlane,
    known: &[bool],
    params: EedParams,
    cfg: &SolverConfig,
) -> Result<InpaintOutcome> {
    check_inputs(init, known)?;
    let tensor = diffusion_tensor(init, params)?;
    solve(init, known, tensor, Some(params), cfg)
}

/// Linear anisotropic inpainting with a fixed tensor field, e.g. one
/// computed from a different channel.
pub fn inpaint_guided(
    init: &PixelPlane,
    known: &[bool],
    tensor: &TensorField,
    cfg: &SolverConfig,
) -> Result<InpaintOutcome> {
    if tensor.width() != init.width() || tensor.height() != init.height() {
        return Err(Error::DimensionMismatch(format!(
            "tensor {}x{} vs plane {}x{}",
            tensor.width(),
            tensor.height(),
            init.width(),
            init.height()
        )));
    }
    solve(init, known, tensor.clone(), None, cfg)
}

/// Fills unknown pixels from a pyramid of weighted averages of the known
/// ones (push-pull). Known pixels keep their values. Used as a cheap
/// starting guess for the diffusion solve.
pub fn fill_unknown(plane: &PixelPlane, known: &[bool]) -> Result<PixelPlane> {
    check_inputs(plane, known)?;
    let wts: Vec<f64> = known.iter().map(|&k| if k { 1.0 } else { 0.0 }).collect();
    let vals: Vec<f64> = plane.data().iter().zip(&wts).map(|(v, w)| v * w).collect();
    let filled = push_pull(&vals, &wts, plane.width(), plane.height());
    let out = plane
        .data()
        .iter()
        .zip(known)
        .zip(filled)
        .map(|((&v, &k), f)| if k { v } else { f })
        .collect();
    PixelPlane::new(plane.width(), plane.height(), out)
}

/// `sums` holds weight-multiplied values. Returns normalised values where
/// the weight is positive and coarse-level values elsewhere.
fn push_pull(sums: &[f64], wts: &[f64], w: usize, h: usize) -> Vec<f64> {
    let norm = |s: f64, wt: f64| if wt > 0.0 { s / wt } else { 0.0 };
    if wts.iter().all(|&x| x > 0.0) || (w == 1 && h == 1) {
        return sums.iter().zip(wts).map(|(&s, &wt)| norm(s, wt)).collect();
    }
    let (cw, ch) = (w.div_ceil(2), h.div_ceil(2));
    let mut cs = vec![0.0; cw * ch];
    let mut cwt = vec![0.0; cw * ch];
    for y in 0..h {
        for x in 0..w {
            let c = (y / 2) * cw + x / 2;
            cs[c] += sums[y * w + x];
            cwt[c] += wts[y * w + x];
        }
    }
    let coarse = push_pull(&cs, &cwt, cw, ch);
    (0..w * h)
        .map(|p| {
            let (x, y) = (p % w, p / w);
            if wts[p] > 0.0 {
                sums[p] / wts[p]
            } else {
                coarse[(y / 2) * cw + x / 2]
            }
        })
        .collect()
}
