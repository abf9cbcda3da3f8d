use super::smooth::gaussian_smooth;
use crate::error::{Error, Result};
use crate::image::PixelPlane;
use rayon::prelude::*;

/// Below this gradient magnitude the tensor is the identity.
pub const GRAD_EPS: f64 = 1e-10;

/// Presmoothing scale and contrast parameter of EED.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EedParams {
    pub sigma: f64,
    pub lambda: f64,
}

impl EedParams {
    /// Parameters used for mask construction before any search.
    pub const STANDARD: EedParams = EedParams {
        sigma: 0.8,
        lambda: 1.0,
    };

    pub fn new(sigma: f64, lambda: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0 && lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidInput(format!(
                "EED parameters must be positive and finite (sigma {sigma}, lambda {lambda})"
            )));
        }
        Ok(Self { sigma, lambda })
    }
}

/// Charbonnier diffusivity `(1 + s2 / lambda^2)^(-1/2)`.
#[inline]
pub fn charbonnier(s2: f64, lambda: f64) -> f64 {
    1.0 / (1.0 + s2 / (lambda * lambda)).sqrt()
}

/// Per-pixel symmetric tensors `[[a, b], [b, c]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    width: usize,
    height: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl TensorField {
    pub fn identity(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            a: vec![1.0; n],
            b: vec![0.0; n],
            c: vec![1.0; n],
        }
    }

    /// The same tensor at every pixel.
    pub fn constant(width: usize, height: usize, a: f64, b: f64, c: f64) -> Result<Self> {
        let t = Self {
            width,
            height,
            a: vec![a; width * height],
            b: vec![b; width * height],
            c: vec![c; width * height],
        };
        if !t.is_spd() {
            return Err(Error::InvalidInput("tensor is not positive definite".into()));
        }
        Ok(t)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_spd(&self) -> bool {
        (0..self.a.len()).all(|i| {
            let (a, b, c) = (self.a[i], self.b[i], self.c[i]);
            a > 0.0 && c > 0.0 && a * c - b * b > 0.0
        })
    }

    /// Largest absolute entry-wise difference to `other`.
    pub fn max_change(&self, other: &TensorField) -> f64 {
        let d = |x: &[f64], y: &[f64]| {
            x.iter()
                .zip(y)
                .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
        };
        d(&self.a, &other.a).max(d(&self.b, &other.b)).max(d(&self.c, &other.c))
    }
}

/// EED tensor of an already smoothed plane.
pub fn tensor_from_smoothed(smoothed: &PixelPlane, lambda: f64) -> TensorField {
    let (w, h) = (smoothed.width(), smoothed.height());
    let u = smoothed.data();
    let n = w * h;
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    a.par_chunks_mut(w)
        .zip(b.par_chunks_mut(w))
        .zip(c.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, ((ra, rb), rc))| {
            let up = y.saturating_sub(1);
            let down = (y + 1).min(h - 1);
            for x in 0..w {
                let left = x.saturating_sub(1);
                let right = (x + 1).min(w - 1);
                // central differences; reflecting boundary makes the ghost equal the edge pixel
                let gx = (u[y * w + right] - u[y * w + left]) / 2.0;
                let gy = (u[down * w + x] - u[up * w + x]) / 2.0;
                let s2 = gx * gx + gy * gy;
                let norm = s2.sqrt();
                if norm < GRAD_EPS {
                    ra[x] = 1.0;
                    rb[x] = 0.0;
                    rc[x] = 1.0;
                    continue;
                }
                let (vx, vy) = (gx / norm, gy / norm);
                let l1 = charbonnier(s2, lambda);
                // l1 v1 v1^T + 1 v2 v2^T with v2 = (-vy, vx)
                ra[x] = l1 * vx * vx + vy * vy;
                rb[x] = (l1 - 1.0) * vx * vy;
                rc[x] = l1 * vy * vy + vx * vx;
            }
        });
    TensorField {
        width: w,
        height: h,
        a,
        b,
        c,
    }
}

/// Builds the EED diffusion tensor of `plane` for the given parameters.
pub fn diffusion_tensor(plane: &PixelPlane, params: EedParams) -> Result<TensorField> {
    let smoothed = gaussian_smooth(plane, params.sigma)?;
    Ok(tensor_from_smoothed(&smoothed, params.lambda))
}
