use super::tensor::TensorField;
use rayon::prelude::*;

/// Symmetric 3x3 discretisation of `div(D grad u)` with reflecting
/// boundaries.
///
/// Each 2x2 pixel cell carries the tensor averaged to its centre and
/// contributes the quadratic form
/// `(a-|b|)/2 (h0^2+h1^2) + (c-|b|)/2 (v0^2+v1^2) + |b| d^2`
/// where `h`, `v` are the horizontal and vertical differences in the cell
/// and `d` is the diagonal difference whose direction matches `sign(b)`.
/// The form equals `grad u . D grad u` on linear data. `|b|` is limited to
/// `min(a, c)` per cell, which keeps every neighbour weight non-negative
/// (discrete max-min principle) and the operator symmetric negative
/// semidefinite. Reflecting boundaries add half of each mirrored ghost
/// cell; the mirror flips the sign of `b`, so a ghost cell only couples the
/// two border pixels along the border.
///
/// Weights are stored once per undirected pixel pair, indexed by the pair's
/// first pixel: east `(x,y)-(x+1,y)`, south `(x,y)-(x,y+1)`, south-east
/// `(x,y)-(x+1,y+1)` and south-west `(x,y)-(x-1,y+1)`.
#[derive(Debug, Clone)]
pub struct Stencil {
    width: usize,
    height: usize,
    east: Vec<f64>,
    south: Vec<f64>,
    south_east: Vec<f64>,
    south_west: Vec<f64>,
}

impl Stencil {
    pub fn new(t: &TensorField) -> Self {
        let (w, h) = (t.width(), t.height());
        let n = w * h;
        let mut east = vec![0.0; n];
        let mut south = vec![0.0; n];
        let mut south_east = vec![0.0; n];
        let mut south_west = vec![0.0; n];

        if h == 1 {
            for x in 0..w.saturating_sub(1) {
                east[x] = (t.a[x] + t.a[x + 1]) / 2.0;
            }
        } else if w == 1 {
            for y in 0..h - 1 {
                south[y] = (t.c[y] + t.c[y + 1]) / 2.0;
            }
        } else {
            for y in 0..h - 1 {
                for x in 0..w - 1 {
                    let p00 = y * w + x;
                    let p10 = p00 + 1;
                    let p01 = p00 + w;
                    let p11 = p01 + 1;
                    let avg = |v: &[f64]| (v[p00] + v[p10] + v[p01] + v[p11]) / 4.0;
                    let (a, c) = (avg(&t.a), avg(&t.c));
                    let b = avg(&t.b).clamp(-a.min(c), a.min(c));
                    let kh = (a - b.abs()) / 2.0;
                    let kv = (c - b.abs()) / 2.0;
                    east[p00] += kh;
                    east[p01] += kh;
                    south[p00] += kv;
                    south[p10] += kv;
                    if b >= 0.0 {
                        south_east[p00] += b;
                    } else {
                        south_west[p10] -= b;
                    }
                }
            }
            for y in [0, h - 1] {
                for x in 0..w - 1 {
                    let p = y * w + x;
                    east[p] += (t.a[p] + t.a[p + 1]) / 4.0;
                }
            }
            for x in [0, w - 1] {
                for y in 0..h - 1 {
                    let p = y * w + x;
                    south[p] += (t.c[p] + t.c[p + w]) / 4.0;
                }
            }
        }
        Self {
            width: w,
            height: h,
            east,
            south,
            south_east,
            south_west,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// The eight neighbour weights of pixel `(x, y)` in the order
    /// W, E, N, S, NW, NE, SW, SE (zero where the neighbour is outside).
    pub fn weights(&self, x: usize, y: usize) -> [f64; 8] {
        let w = self.width;
        let p = y * w + x;
        let (left, right, up, down) = (x > 0, x + 1 < w, y > 0, y + 1 < self.height);
        let pick = |cond: bool, f: &dyn Fn() -> f64| if cond { f() } else { 0.0 };
        [
            pick(left, &|| self.east[p - 1]),
            pick(right, &|| self.east[p]),
            pick(up, &|| self.south[p - w]),
            pick(down, &|| self.south[p]),
            pick(left && up, &|| self.south_east[p - w - 1]),
            pick(right && up, &|| self.south_west[p - w + 1]),
            pick(left && down, &|| self.south_west[p]),
            pick(right && down, &|| self.south_east[p]),
        ]
    }

    /// Sum of neighbour weights per pixel (the diagonal of `-L`).
    pub fn diagonal(&self) -> Vec<f64> {
        let (w, h) = (self.width, self.height);
        (0..w * h)
            .into_par_iter()
            .map(|p| self.weights(p % w, p / w).iter().sum())
            .collect()
    }

    /// `out = L u`.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let (w, h) = (self.width, self.height);
        out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
            if y == 0 || y + 1 == h || w < 3 {
                for (x, o) in row.iter_mut().enumerate() {
                    *o = self.apply_at(u, x, y);
                }
                return;
            }
            row[0] = self.apply_at(u, 0, y);
            row[w - 1] = self.apply_at(u, w - 1, y);
            let p0 = y * w;
            let (e, s, se, sw) = (&self.east, &self.south, &self.south_east, &self.south_west);
            for x in 1..w - 1 {
                let p = p0 + x;
                let c = u[p];
                row[x] = e[p - 1] * (u[p - 1] - c)
                    + e[p] * (u[p + 1] - c)
                    + s[p - w] * (u[p - w] - c)
                    + s[p] * (u[p + w] - c)
                    + se[p - w - 1] * (u[p - w - 1] - c)
                    + se[p] * (u[p + w + 1] - c)
                    + sw[p - w + 1] * (u[p - w + 1] - c)
                    + sw[p] * (u[p + w - 1] - c);
            }
        });
    }

    fn apply_at(&self, u: &[f64], x: usize, y: usize) -> f64 {
        let w = self.width;
        let p = y * w + x;
        let c = u[p];
        let wt = self.weights(x, y);
        let nb = |dx: isize, dy: isize| {
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            if nx < 0 || ny < 0 || nx >= w as isize || ny >= self.height as isize {
                c
            } else {
                u[ny as usize * w + nx as usize]
            }
        };
        let n = [nb(-1, 0), nb(1, 0), nb(0, -1), nb(0, 1), nb(-1, -1), nb(1, -1), nb(-1, 1), nb(1, 1)];
        wt.iter().zip(n).map(|(k, v)| k * (v - c)).sum()
    }

    /// Whether every off-diagonal weight is non-negative, which gives a
    /// discrete max-min principle.
    pub fn is_nonnegative(&self) -> bool {
        [&self.east, &self.south, &self.south_east, &self.south_west]
            .iter()
            .all(|v| v.iter().all(|&x| x >= 0.0))
    }
}
