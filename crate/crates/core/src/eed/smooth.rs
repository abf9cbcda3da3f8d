use crate::error::{Error, Result};
use crate::image::PixelPlane;
use rayon::prelude::*;

/// Half-sample symmetric reflection of `i` into `0..n`.
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

fn kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    let mut k: Vec<f64> = (0..=radius)
        .map(|i| libm::exp(-((i * i) as f64) / (2.0 * sigma * sigma)))
        .collect();
    let total = k[0] + 2.0 * k[1..].iter().sum::<f64>();
    for v in &mut k {
        *v /= total;
    }
    k
}

/// Separable Gaussian convolution with a sampled kernel truncated at
/// `ceil(3 sigma)` and renormalised, using reflecting boundaries.
pub fn gaussian_smooth(plane: &PixelPlane, sigma: f64) -> Result<PixelPlane> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidInput(format!(
            "gaussian sigma must be finite and non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(plane.clone());
    }
    let k = kernel(sigma);
    let r = k.len() as isize - 1;
    let (w, h) = (plane.width(), plane.height());
    let src = plane.data();

    let mut tmp = vec![0.0; w * h];
    tmp.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let line = &src[y * w..(y + 1) * w];
        for (x, out) in row.iter_mut().enumerate() {
            let mut acc = k[0] * line[x];
            for d in 1..=r {
                let kd = k[d as usize];
                acc += kd * (line[reflect(x as isize - d, w)] + line[reflect(x as isize + d, w)]);
            }
            *out = acc;
        }
    });

    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = k[0] * tmp[y * w + x];
            for d in 1..=r {
                let kd = k[d as usize];
                acc += kd
                    * (tmp[reflect(y as isize - d, h) * w + x] + tmp[reflect(y as isize + d, h) * w + x]);
            }
            *o = acc;
        }
    });
    PixelPlane::new(w, h, out)
}
