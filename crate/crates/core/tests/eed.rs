use beed_core::eed::{
    diffusion_tensor, fill_unknown, inpaint, inpaint_guided, EedParams, SolverConfig, Stencil,
    TensorField,
};
use beed_core::image::PixelPlane;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn textured(w: usize, h: usize, seed: u64) -> PixelPlane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase: f64 = rng.random_range(0.0..6.0);
    PixelPlane::from_fn(w, h, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        let edge = if 2 * x + y > w + h / 2 { 60.0 } else { -60.0 };
        128.0 + edge + 30.0 * (fx * 0.7 + phase).sin() * (fy * 0.4).cos()
    })
}

fn random_mask(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut m: Vec<bool> = (0..n).map(|_| rng.random_bool(p)).collect();
    m[rng.random_range(0..n)] = true;
    m
}

/// Energy of the cell discretisation written out directly.
fn cell_energy(t: &TensorField, u: &[f64]) -> f64 {
    let (w, h) = (t.width(), t.height());
    let mut e = 0.0;
    for y in 0..h - 1 {
        for x in 0..w - 1 {
            let idx = [y * w + x, y * w + x + 1, (y + 1) * w + x, (y + 1) * w + x + 1];
            let a = idx.iter().map(|&i| t.a[i]).sum::<f64>() / 4.0;
            let c = idx.iter().map(|&i| t.c[i]).sum::<f64>() / 4.0;
            let b = idx.iter().map(|&i| t.b[i]).sum::<f64>() / 4.0;
            let b = if b.abs() > a.min(c) { a.min(c).copysign(b) } else { b };
            let [u00, u10, u01, u11] = idx.map(|i| u[i]);
            let hsq = (u10 - u00).powi(2) + (u11 - u01).powi(2);
            let vsq = (u01 - u00).powi(2) + (u11 - u10).powi(2);
            let d = if b >= 0.0 { u11 - u00 } else { u10 - u01 };
            e += (a - b.abs()) / 2.0 * hsq + (c - b.abs()) / 2.0 * vsq + b.abs() * d * d;
        }
    }
    // half of the mirrored cells outside the border
    for y in [0, h - 1] {
        for x in 0..w - 1 {
            let (p, q) = (y * w + x, y * w + x + 1);
            e += (t.a[p] + t.a[q]) / 4.0 * (u[q] - u[p]).powi(2);
        }
    }
    for x in [0, w - 1] {
        for y in 0..h - 1 {
            let (p, q) = (y * w + x, (y + 1) * w + x);
            e += (t.c[p] + t.c[q]) / 4.0 * (u[q] - u[p]).powi(2);
        }
    }
    e
}

/// Matrix of the quadratic form `cell_energy` by polarisation.
fn energy_matrix(t: &TensorField) -> DMatrix<f64> {
    let n = t.width() * t.height();
    let unit = |i: usize| {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    };
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut v = unit(i);
            v[j] += 1.0;
            let q = if i == j {
                cell_energy(t, &unit(i))
            } else {
                (cell_energy(t, &v) - cell_energy(t, &unit(i)) - cell_energy(t, &unit(j))) / 2.0
            };
            m[(i, j)] = q;
        }
    }
    m
}

#[test]
fn operator_matches_energy_and_is_semidefinite() {
    let (w, h) = (7, 6);
    let plane = textured(w, h, 3);
    for (s, l) in [(0.5, 0.1), (0.8, 1.0), (2.0, 5.0)] {
        let t = diffusion_tensor(&plane, EedParams::new(s, l).unwrap()).unwrap();
        let st = Stencil::new(&t);
        let m = energy_matrix(&t);
        let n = w * h;
        let mut out = vec![0.0; n];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            st.apply(&e, &mut out);
            for i in 0..n {
                // L = -(Hessian of the energy) / 2
                assert!((out[i] + m[(i, j)]).abs() < 1e-12, "entry {i},{j}");
            }
        }
        let eig = m.symmetric_eigenvalues();
        assert!(eig.iter().all(|&v| v > -1e-12), "min eigenvalue {}", eig.min());
    }
}

#[test]
fn guided_solve_matches_dense_solve() {
    let (w, h) = (8, 7);
    let n = w * h;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let plane = textured(w, h, 5);
    let t = diffusion_tensor(&plane, EedParams::new(1.0, 0.5).unwrap()).unwrap();
    let known = random_mask(n, 0.3, &mut rng);
    let init = PixelPlane::from_fn(w, h, |x, y| {
        if known[y * w + x] { plane.get(x, y) } else { 0.0 }
    });

    let exact = dense_inpaint(&t, &init, &known);
    let cfg = SolverConfig {
        residual_tol: 1e-13,
        ..SolverConfig::default()
    };
    let out = inpaint_guided(&init, &known, &t, &cfg).unwrap();
    assert!(out.converged);
    for (a, b) in out.plane.data().iter().zip(&exact) {
        assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
    }
}

/// Dense solve of `-L u = 0` on unknowns with the matrix of `cell_energy`.
fn dense_inpaint(t: &TensorField, init: &PixelPlane, known: &[bool]) -> Vec<f64> {
    let n = known.len();
    let m = energy_matrix(t);
    let unk: Vec<usize> = (0..n).filter(|&i| !known[i]).collect();
    let kn: Vec<usize> = (0..n).filter(|&i| known[i]).collect();
    let a = DMatrix::from_fn(unk.len(), unk.len(), |i, j| m[(unk[i], unk[j])]);
    let rhs = DVector::from_fn(unk.len(), |i, _| {
        -kn.iter().map(|&k| m[(unk[i], k)] * init.data()[k]).sum::<f64>()
    });
    let x = a.lu().solve(&rhs).unwrap();
    let mut out = init.data().to_vec();
    for (i, &p) in unk.iter().enumerate() {
        out[p] = x[i];
    }
    out
}

fn corners_16() -> (PixelPlane, Vec<bool>) {
    let (w, h) = (16, 16);
    let mut known = vec![false; w * h];
    for p in [0, w - 1, w * (h - 1), w * h - 1] {
        known[p] = true;
    }
    let init = PixelPlane::from_fn(w, h, |x, _| if x == 0 { 0.0 } else if x == w - 1 { 255.0 } else { 128.0 });
    (init, known)
}

#[test]
fn four_corners_match_dense_solve() {
    let (init, known) = corners_16();
    // a large presmoothing scale leaves a near-constant tensor field
    let params = EedParams::new(8.0, 10.0).unwrap();
    let out = inpaint(&init, &known, params, &SolverConfig::default()).unwrap();
    let t = diffusion_tensor(&out.plane, params).unwrap();
    let exact = dense_inpaint(&t, &init, &known);
    for (a, b) in out.plane.data().iter().zip(&exact) {
        assert!((a - b).abs() <= 0.5, "{a} vs {b}");
    }
}

#[test]
fn identity_guide_is_harmonic() {
    let (init, known) = corners_16();
    let w = 16;
    // five-point Laplacian with mirrored boundaries, assembled directly
    let n = w * w;
    let unk: Vec<usize> = (0..n).filter(|&i| !known[i]).collect();
    let pos: Vec<Option<usize>> = (0..n).map(|p| unk.iter().position(|&u| u == p)).collect();
    let mut a = DMatrix::<f64>::zeros(unk.len(), unk.len());
    let mut rhs = DVector::<f64>::zeros(unk.len());
    for (i, &p) in unk.iter().enumerate() {
        let (x, y) = ((p % w) as isize, (p / w) as isize);
        for (dx, dy) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w as isize || ny >= w as isize {
                continue;
            }
            let q = ny as usize * w + nx as usize;
            a[(i, i)] += 1.0;
            match pos[q] {
                Some(j) => a[(i, j)] -= 1.0,
                None => rhs[i] += init.data()[q],
            }
        }
    }
    let x = a.lu().solve(&rhs).unwrap();
    let cfg = SolverConfig { residual_tol: 1e-12, ..SolverConfig::default() };
    let out = inpaint_guided(&init, &known, &TensorField::identity(w, w), &cfg).unwrap();
    for (i, &p) in unk.iter().enumerate() {
        assert!((out.plane.data()[p] - x[i]).abs() < 1e-6);
    }
}

#[test]
fn anisotropic_constant_guide_matches_dense_solve() {
    let (w, h) = (12, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let known = random_mask(w * h, 0.15, &mut rng);
    let truth = textured(w, h, 21);
    let init = PixelPlane::from_fn(w, h, |x, y| if known[y * w + x] { truth.get(x, y) } else { 0.0 });
    let t = TensorField::constant(w, h, 0.1, 0.0, 1.0).unwrap();
    let out = inpaint_guided(&init, &known, &t, &SolverConfig::default()).unwrap();
    let exact = dense_inpaint(&t, &init, &known);
    for (a, b) in out.plane.data().iter().zip(&exact) {
        assert!((a - b).abs() <= 0.5);
    }
}

#[test]
fn stencil_weights_nonnegative_for_eed_tensors() {
    let plane = textured(30, 20, 6);
    for (s, l) in [(0.4, 0.1), (0.8, 1.0), (4.0, 10.0)] {
        let t = diffusion_tensor(&plane, EedParams::new(s, l).unwrap()).unwrap();
        assert!(Stencil::new(&t).is_nonnegative());
    }
}

#[test]
fn constant_data_is_reproduced() {
    let (w, h) = (40, 30);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let known = random_mask(w * h, 0.05, &mut rng);
    let init = PixelPlane::from_fn(w, h, |x, y| if known[y * w + x] { 77.0 } else { (x * y) as f64 });
    let cfg = SolverConfig {
        residual_tol: 1e-12,
        ..SolverConfig::default()
    };
    let out = inpaint(&init, &known, EedParams::STANDARD, &cfg).unwrap();
    assert!(out.plane.data().iter().all(|&v| (v - 77.0).abs() <= 1e-6));
}

#[test]
fn all_known_returns_input() {
    let p = textured(9, 9, 2);
    let out = inpaint(&p, &vec![true; 81], EedParams::STANDARD, &SolverConfig::default()).unwrap();
    assert!(out.converged);
    assert_eq!(out.plane, p);
    assert_eq!(out.inner_iterations, 0);
}

#[test]
fn empty_mask_and_bad_shapes_rejected() {
    let p = textured(5, 5, 2);
    assert!(inpaint(&p, &vec![false; 25], EedParams::STANDARD, &SolverConfig::default()).is_err());
    assert!(inpaint(&p, &vec![true; 24], EedParams::STANDARD, &SolverConfig::default()).is_err());
    let t = TensorField::identity(4, 5);
    assert!(inpaint_guided(&p, &vec![true; 25], &t, &SolverConfig::default()).is_err());
}

#[test]
fn iteration_cap_clears_convergence_flag() {
    let (w, h) = (64, 64);
    let mut known = vec![false; w * h];
    known[0] = true;
    known[w * h - 1] = true;
    let init = PixelPlane::from_fn(w, h, |x, y| if x + y == 0 { 0.0 } else if x + y == w + h - 2 { 255.0 } else { 128.0 });
    let cfg = SolverConfig {
        max_inner: 5,
        ..SolverConfig::default()
    };
    let out = inpaint(&init, &known, EedParams::STANDARD, &cfg).unwrap();
    assert!(!out.converged);
    assert!(out.inner_iterations <= 5);
}

#[test]
fn reconstructs_a_smooth_edge() {
    let (w, h) = (48, 48);
    let truth = PixelPlane::from_fn(w, h, |x, y| if 3 * x + 2 * y < 110 { 40.0 } else { 200.0 });
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let known = random_mask(w * h, 0.1, &mut rng);
    let init = fill_unknown(&truth, &known).unwrap();
    let out = inpaint(&init, &known, EedParams::new(1.0, 1.0).unwrap(), &SolverConfig::default()).unwrap();
    assert!(out.converged);
    let mse: f64 = truth
        .data()
        .iter()
        .zip(out.plane.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / (w * h) as f64;
    let baseline: f64 = truth
        .data()
        .iter()
        .zip(init.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / (w * h) as f64;
    assert!(mse < baseline, "eed {mse} vs push-pull {baseline}");
}

#[test]
fn thread_count_does_not_change_result() {
    let (w, h) = (50, 37);
    let plane = textured(w, h, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let known = random_mask(w * h, 0.08, &mut rng);
    let init = fill_unknown(&plane, &known).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| inpaint(&init, &known, EedParams::STANDARD, &SolverConfig::default()).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn push_pull_keeps_known_and_stays_in_range() {
    let p = textured(23, 17, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let known = random_mask(23 * 17, 0.02, &mut rng);
    let f = fill_unknown(&p, &known).unwrap();
    let (lo, hi) = known.iter().zip(p.data()).filter(|(k, _)| **k).fold(
        (f64::MAX, f64::MIN),
        |(lo, hi), (_, &v)| (lo.min(v), hi.max(v)),
    );
    for (i, &v) in f.data().iter().enumerate() {
        if known[i] {
            assert_eq!(v, p.data()[i]);
        }
        assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn max_min_principle(seed in any::<u64>(), w in 6usize..24, h in 6usize..24, density in 0.03f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let plane = textured(w, h, seed);
        let known = random_mask(w * h, density, &mut rng);
        let init = fill_unknown(&plane, &known).unwrap();
        let out = inpaint(&init, &known, EedParams::STANDARD, &SolverConfig::default()).unwrap();
        let (lo, hi) = known.iter().zip(plane.data()).filter(|(k, _)| **k).fold(
            (f64::MAX, f64::MIN),
            |(lo, hi), (_, &v)| (lo.min(v), hi.max(v)),
        );
        for (i, &v) in out.plane.data().iter().enumerate() {
            if known[i] {
                prop_assert_eq!(v, plane.data()[i]);
            }
            prop_assert!(v >= lo - 1e-6 && v <= hi + 1e-6, "{} outside [{}, {}]", v, lo, hi);
        }
    }
}
