//! Orthonormal 8x8 DCT-II (the scaling used by JPEG) and its inverse.

use std::sync::OnceLock;

/// `basis()[u][x] = s(u) cos((2x + 1) u pi / 16)` with `s(0) = 1/sqrt(8)`
/// and `s(u) = 1/2` otherwise.
fn basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0.0; 8]; 8];
        for (u, row) in m.iter_mut().enumerate() {
            let s = if u == 0 { libm::sqrt(0.125) } else { 0.5 };
            for (x, v) in row.iter_mut().enumerate() {
                *v = s * libm::cos((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI / 16.0);
            }
        }
        m
    })
}

/// Forward transform of a row-major tile. The caller level-shifts first.
pub fn fdct8x8(tile: &[f64; 64]) -> [f64; 64] {
    let c = basis();
    let mut tmp = [0.0; 64];
    // rows
    for y in 0..8 {
        for u in 0..8 {
            let mut acc = 0.0;
            for x in 0..8 {
                acc += c[u][x] * tile[y * 8 + x];
            }
            tmp[y * 8 + u] = acc;
        }
    }
    let mut out = [0.0; 64];
    // columns
    for u in 0..8 {
        for v in 0..8 {
            let mut acc = 0.0;
            for y in 0..8 {
                acc += c[v][y] * tmp[y * 8 + u];
            }
            out[v * 8 + u] = acc;
        }
    }
    out
}

/// Inverse transform; coefficient `(u, v)` lives at `v * 8 + u`.
pub fn idct8x8(coef: &[f64; 64]) -> [f64; 64] {
    let c = basis();
    let mut tmp = [0.0; 64];
    for v in 0..8 {
        for x in 0..8 {
            let mut acc = 0.0;
            for u in 0..8 {
                acc += c[u][x] * coef[v * 8 + u];
            }
            tmp[v * 8 + x] = acc;
        }
    }
    let mut out = [0.0; 64];
    for x in 0..8 {
        for y in 0..8 {
            let mut acc = 0.0;
            for v in 0..8 {
                acc += c[v][y] * tmp[v * 8 + x];
            }
            out[y * 8 + x] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct O(64^2) evaluation of the 2-D DCT-II sum.
    fn oracle_dct(tile: &[f64; 64]) -> [f64; 64] {
        let pi = std::f64::consts::PI;
        let s = |k: usize| if k == 0 { (1.0f64 / 8.0).sqrt() } else { 0.5 };
        let mut out = [0.0; 64];
        for v in 0..8 {
            for u in 0..8 {
                let mut acc = 0.0;
                for y in 0..8 {
                    for x in 0..8 {
                        acc += tile[y * 8 + x]
                            * ((2 * x + 1) as f64 * u as f64 * pi / 16.0).cos()
                            * ((2 * y + 1) as f64 * v as f64 * pi / 16.0).cos();
                    }
                }
                out[v * 8 + u] = s(u) * s(v) * acc;
            }
        }
        out
    }

    #[test]
    fn constant_mid_gray_is_zero() {
        let t = [128.0 - 128.0; 64];
        assert!(fdct8x8(&t).iter().all(|&c| c.abs() < 1e-12));
    }

    #[test]
    fn single_basis_function() {
        // u = 0, v = 1 basis scaled by 10
        let pi = std::f64::consts::PI;
        let mut t = [0.0; 64];
        for y in 0..8 {
            for x in 0..8 {
                t[y * 8 + x] = 10.0 * (1.0f64 / 8.0).sqrt() * 0.5 * ((2 * y + 1) as f64 * pi / 16.0).cos();
            }
        }
        let c = fdct8x8(&t);
        for (i, &v) in c.iter().enumerate() {
            if i == 8 {
                assert!((v - 10.0).abs() < 1e-9);
            } else {
                assert!(v.abs() < 1e-9, "coef {i} = {v}");
            }
        }
    }

    proptest! {
        #[test]
        fn matches_oracle_and_roundtrips(vals in proptest::collection::vec(-128.0f64..128.0, 64)) {
            let mut t = [0.0; 64];
            t.copy_from_slice(&vals);
            let c = fdct8x8(&t);
            let o = oracle_dct(&t);
            for i in 0..64 {
                prop_assert!((c[i] - o[i]).abs() < 1e-9);
            }
            let back = idct8x8(&c);
            for i in 0..64 {
                prop_assert!((back[i] - t[i]).abs() <= 1e-9);
            }
        }
    }
}
