use super::problem::{GroupProblem, GroupRecon};
use crate::bitstream::quantize_params;
use crate::eed::EedParams;
use crate::error::{Error, Result};
use crate::image::BlockMask;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section result: bracket midpoint and every evaluated point.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldenSearch {
    pub argmin: f64,
    pub trace: Vec<(f64, f64)>,
}

impl GoldenSearch {
    /// Smallest evaluated value and its abscissa.
    pub fn best(&self) -> (f64, f64) {
        self.trace
            .iter()
            .copied()
            .fold((f64::NAN, f64::INFINITY), |acc, p| if p.1 < acc.1 { p } else { acc })
    }
}

/// Golden-section minimisation of `f` on `[lo, hi]` using exactly `evals`
/// evaluations.
pub fn golden_section(
    mut f: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    evals: usize,
) -> Result<GoldenSearch> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidInput(format!("invalid bracket [{lo}, {hi}]")));
    }
    if evals < 4 {
        return Err(Error::InvalidInput(format!("golden section needs at least 4 evaluations, got {evals}")));
    }
    let mut trace = Vec::with_capacity(evals);
    let mut eval = |x: f64, trace: &mut Vec<(f64, f64)>| -> Result<f64> {
        let v = f(x)?;
        trace.push((x, v));
        Ok(v)
    };
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c, &mut trace)?;
    let mut fd = eval(d, &mut trace)?;
    for _ in 2..evals {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c, &mut trace)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d, &mut trace)?;
        }
    }
    // shrink once more with the values at hand
    if fc <= fd {
        b = d;
    } else {
        a = c;
    }
    Ok(GoldenSearch {
        argmin: 0.5 * (a + b),
        trace,
    })
}

pub const SIGMA_RANGE: (f64, f64) = (0.4, 4.0);
pub const LAMBDA_RANGE: (f64, f64) = (0.1, 10.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamSearchConfig {
    pub sigma_evals: usize,
    pub lambda_evals: usize,
}

impl Default for ParamSearchConfig {
    fn default() -> Self {
        Self {
            sigma_evals: 5,
            lambda_evals: 5,
        }
    }
}

impl ParamSearchConfig {
    pub fn budget(&self) -> usize {
        self.sigma_evals * self.lambda_evals
    }
}

#[derive(Debug, Clone)]
pub struct ParamSearch {
    pub params: EedParams,
    pub mse: f64,
    pub standard_mse: f64,
    /// Every evaluated (quantised) parameter pair with its error.
    pub trace: Vec<(EedParams, f64)>,
    pub recon: GroupRecon,
}

impl ParamSearch {
    /// Relative error reduction over the standard parameters.
    pub fn improvement(&self) -> f64 {
        if self.standard_mse > 0.0 {
            1.0 - self.mse / self.standard_mse
        } else {
            0.0
        }
    }
}

/// Nested golden-section search over sigma (outer) and lambda (inner) for a
/// fixed mask. Lambda is searched on a log scale since the range spans two
/// decades. Falls back to the standard parameters unless a searched pair
/// does strictly better.
pub fn optimize_group_params(
    problem: &GroupProblem,
    mask: &BlockMask,
    cfg: &ParamSearchConfig,
) -> Result<ParamSearch> {
    let standard = quantize_params(EedParams::STANDARD)?;
    let base = problem.with_params(standard).solve(mask, None)?;
    let standard_mse = problem.with_params(standard).mse(&base);
    if mask.kept_count() == mask.grid().len() {
        return Ok(ParamSearch {
            params: standard,
            mse: standard_mse,
            standard_mse,
            trace: Vec::new(),
            recon: base,
        });
    }
    let mut trace: Vec<(EedParams, f64, GroupRecon)> = Vec::with_capacity(cfg.budget());
    let mut objective = |sigma: f64, lambda: f64| -> Result<f64> {
        let p = quantize_params(EedParams::new(sigma, lambda)?)?;
        let rec = problem.with_params(p).solve(mask, None)?;
        let v = problem.mse(&rec);
        trace.push((p, v, rec));
        Ok(v)
    };
    golden_section(
        |sigma| {
            let inner = golden_section(
                |t| objective(sigma, t.exp()),
                LAMBDA_RANGE.0.ln(),
                LAMBDA_RANGE.1.ln(),
                cfg.lambda_evals,
            )?;
            Ok(inner.best().1)
        },
        SIGMA_RANGE.0,
        SIGMA_RANGE.1,
        cfg.sigma_evals,
    )?;

    let best = trace
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i);
    let summary: Vec<(EedParams, f64)> = trace.iter().map(|t| (t.0, t.1)).collect();
    match best {
        Some(i) if trace[i].1 < standard_mse => {
            let (params, mse, recon) = trace.swap_remove(i);
            Ok(ParamSearch {
                params,
                mse,
                standard_mse,
                trace: summary,
                recon,
            })
        }
        _ => Ok(ParamSearch {
            params: standard,
            mse: standard_mse,
            standard_mse,
            trace: summary,
            recon: base,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parabola() {
        let g = golden_section(|x| Ok((x - 2.0) * (x - 2.0)), 0.0, 5.0, 20).unwrap();
        assert!((g.argmin - 2.0).abs() < 1e-3, "{}", g.argmin);
        assert_eq!(g.trace.len(), 20);
    }

    #[test]
    fn abs_pi() {
        let g = golden_section(|x| Ok((x - std::f64::consts::PI).abs()), 0.0, 4.0, 25).unwrap();
        assert!((g.argmin - std::f64::consts::PI).abs() < 1e-3);
    }

    #[test]
    fn constant_is_deterministic() {
        let a = golden_section(|_| Ok(1.0), -1.0, 3.0, 10).unwrap();
        let b = golden_section(|_| Ok(1.0), -1.0, 3.0, 10).unwrap();
        assert_eq!(a, b);
        assert!((-1.0..=3.0).contains(&a.argmin));
    }

    #[test]
    fn bracket_bound() {
        // unimodal with the minimum near the edge
        for evals in 4..15 {
            let g = golden_section(|x| Ok((x - 0.3).powi(2)), 0.0, 10.0, evals).unwrap();
            assert!((g.argmin - 0.3).abs() <= 10.0 * INV_PHI.powi(evals as i32 - 2));
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(golden_section(|x| Ok(x), 1.0, 1.0, 10).is_err());
        assert!(golden_section(|x| Ok(x), 0.0, 1.0, 3).is_err());
    }
}
