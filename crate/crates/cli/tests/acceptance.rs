//! Acceptance criteria. Prints one PASS/FAIL line per criterion. Only the
//! criteria that hold by construction (optimizer safety, solver and codec
//! properties, determinism) fail the test; the others report measurements.
//!
//! Kodak images are read from `BEED_KODAK_DIR` (kodim15.ppm, kodim20.ppm,
//! kodim23.ppm) when set; otherwise the stand-in photographs under
//! tests/fixtures are used where the criterion allows crops.

use beed_core::bitstream::{
    arith_decode, arith_encode, pack_blocks, read_container, unpack_blocks, write_container, Container,
};
use beed_core::codec::{jpeg_for_ratio, uncompressed_bytes};
use beed_core::eed::{charbonnier, diffusion_tensor, fill_unknown, inpaint, inpaint_guided, EedParams, SolverConfig, Stencil};
use beed_core::image::pnm::{read_pnm, write_ppm};
use beed_core::image::{psnr, BlockGrid, BlockMask, PixelPlane, RgbImage};
use beed_core::jpeg::{decode_baseline, decode_to_rgb, encode_gray, encode_rgb, fdct8x8, idct8x8, Sampling, TableClass};
use beed_core::maskopt::{optimize_prepared, prepare, Encoded, OptimizeConfig, RatioTarget};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

struct Verdict {
    id: &'static str,
    pass: bool,
    /// Holds by construction; a failure is a bug.
    hard: bool,
    detail: String,
}

impl Verdict {
    fn line(&self) -> String {
        format!("criterion {:<3} {}  {}", self.id, if self.pass { "PASS" } else { "FAIL" }, self.detail)
    }
}

/// Writes past the test harness's output capture, so the lines show up in
/// passing runs too.
fn report(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stderr().lock(), "{line}");
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn kodak(n: u32) -> Option<RgbImage> {
    let dir = std::env::var_os("BEED_KODAK_DIR")?;
    let img = read_pnm(Path::new(&dir).join(format!("kodim{n:02}.ppm"))).ok()?;
    Some(img.into_rgb())
}

fn beed() -> Command {
    Command::new(env!("CARGO_BIN_EXE_beed"))
}

// ---------------------------------------------------------------- 1

fn corner_selection() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let out = beed().args(["corner-demo", "--out-dir"]).arg(dir.path()).output().unwrap();
    let elapsed = start.elapsed();
    let text = String::from_utf8_lossy(&out.stdout);
    let field = |key: &str| {
        text.lines()
            .find_map(|l| l.strip_prefix(key))
            .map(|s| s.trim().to_string())
            .unwrap_or_default()
    };
    let hits = field("corner blocks kept:");
    let db: f64 = field("psnr:").trim_end_matches(" dB").parse().unwrap_or(f64::NAN);
    let panels = ["corner_original.pgm", "corner_mask.pgm", "corner_reconstruction.pgm"]
        .iter()
        .all(|f| dir.path().join(f).exists());
    let pass = out.status.success() && hits == "8/8" && db >= 35.0 && elapsed <= Duration::from_secs(60) && panels;
    Verdict {
        id: "1",
        pass,
        hard: false,
        detail: format!("corner blocks {hits}, {db:.2} dB (need 8/8, >= 35 dB), {:.1} s", elapsed.as_secs_f64()),
    }
}

// ---------------------------------------------------------------- 2, 4

const RATIOS: [f64; 3] = [60.0, 90.0, 110.0];

struct Point {
    ratio: f64,
    beed: Result<Encoded, beed_core::Error>,
    jpeg: Option<f64>,
    seconds: f64,
}

fn comparison_images() -> (Vec<(String, RgbImage)>, &'static str) {
    let crop = |img: RgbImage| {
        let (w, h) = (384, 256);
        let (x0, y0) = ((img.width() - w) / 2, (img.height() - h) / 2);
        img.crop(x0, y0, w, h).unwrap()
    };
    let kodak: Vec<_> = [15, 20, 23].iter().filter_map(|&n| kodak(n).map(|i| (format!("kodim{n}"), crop(i)))).collect();
    if kodak.len() == 3 {
        return (kodak, "Kodak 256x384 crops");
    }
    let stand_ins = ["astronaut", "coffee", "chelsea"]
        .iter()
        .map(|n| (n.to_string(), read_pnm(fixtures().join(format!("{n}.ppm"))).unwrap().into_rgb()))
        .collect();
    (stand_ins, "stand-in 256x384 photographs")
}

fn run_points(img: &RgbImage) -> Vec<Point> {
    let cfg = OptimizeConfig::default();
    let start = Instant::now();
    let prep = prepare(img, RATIOS[RATIOS.len() - 1], &cfg).unwrap();
    // path preparation is shared, so its cost is spread over the points
    let shared = start.elapsed().as_secs_f64() / RATIOS.len() as f64;
    let pixels = uncompressed_bytes(img.width(), img.height()) as f64;
    RATIOS
        .iter()
        .map(|&ratio| {
            let t = Instant::now();
            let beed = optimize_prepared(&prep, &RatioTarget::new(ratio).unwrap(), &cfg);
            let seconds = shared + t.elapsed().as_secs_f64();
            let jpeg = jpeg_for_ratio(img, ratio).ok().map(|(_, bytes)| {
                assert!(pixels / bytes.len() as f64 >= ratio);
                let out = decode_to_rgb(&bytes).unwrap();
                psnr(&out.planes(), &img.planes()).unwrap().db()
            });
            Point { ratio, beed, jpeg, seconds }
        })
        .collect()
}

fn jpeg_dominance(runs: &[(String, Vec<Point>)], source: &str) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, points) in runs {
        for p in points {
            let part = match (&p.beed, p.jpeg) {
                (Err(e), _) => {
                    pass = false;
                    format!("{name}@{}: B-EED failed ({e})", p.ratio)
                }
                (Ok(enc), jpeg) => {
                    let b = enc.report.final_psnr;
                    let ok_ratio = enc.report.achieved_ratio >= p.ratio;
                    let margin_needed = if p.ratio >= 110.0 { 1.0 } else { 0.0 };
                    // JPEG that cannot reach the ratio at quality 1 is dominated
                    let ok = ok_ratio && jpeg.is_none_or(|j| b - j >= margin_needed) && p.seconds <= 1800.0;
                    pass &= ok;
                    match jpeg {
                        Some(j) => format!("{name}@{}: {b:.2} vs {j:.2} dB ({:+.2}, {:.0} s)", p.ratio, b - j, p.seconds),
                        None => format!("{name}@{}: {b:.2} dB vs JPEG unattainable ({:.0} s)", p.ratio, p.seconds),
                    }
                }
            };
            parts.push(part);
        }
    }
    Verdict {
        id: "2",
        pass,
        hard: false,
        detail: format!("{source}; {}", parts.join("; ")),
    }
}

fn optimizer_safety(runs: &[(String, Vec<Point>)], source: &str) -> Vec<Verdict> {
    let mut safe = true;
    let mut improved_images = 0;
    let mut parts = Vec::new();
    for (name, points) in runs {
        let mut improved = false;
        for p in points {
            let Ok(enc) = &p.beed else { continue };
            let r = &enc.report;
            let monotone = |t: &[f64]| t.windows(2).all(|w| w[1] < w[0]);
            safe &= r.param_improvement.0 >= 0.0 && r.param_improvement.1 >= 0.0;
            safe &= r.nlbe_improvement.0 >= 0.0 && r.nlbe_improvement.1 >= 0.0;
            safe &= monotone(&r.nlbe_trace_luma) && monotone(&r.nlbe_trace_chroma);
            if p.ratio >= 90.0 && (r.nlbe_improvement.0 > 0.0 || r.nlbe_improvement.1 > 0.0) {
                improved = true;
            }
            parts.push(format!(
                "{name}@{}: params {:.2}%/{:.2}%, exchange {:.2}%/{:.2}%",
                p.ratio,
                100.0 * r.param_improvement.0,
                100.0 * r.param_improvement.1,
                100.0 * r.nlbe_improvement.0,
                100.0 * r.nlbe_improvement.1
            ));
        }
        improved_images += improved as usize;
    }
    vec![
        Verdict {
            id: "4a",
            pass: safe,
            hard: true,
            detail: format!("searches never increase MSE; {}", parts.join("; ")),
        },
        Verdict {
            id: "4b",
            pass: improved_images >= 2,
            hard: false,
            detail: format!("block exchange improved {improved_images}/3 images at ratio >= 90 ({source})"),
        },
    ]
}

// ---------------------------------------------------------------- 3

fn kodak_vicinity() -> Verdict {
    let targets = [(23, 111.0, 31.4), (15, 70.0, 30.9), (20, 94.0, 30.0)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, ratio, reference) in targets {
        let Some(img) = kodak(n) else {
            pass = false;
            parts.push(format!("kodim{n} not available (set BEED_KODAK_DIR)"));
            continue;
        };
        let cfg = OptimizeConfig::default();
        let got = prepare(&img, ratio, &cfg)
            .and_then(|p| optimize_prepared(&p, &RatioTarget::new(ratio).unwrap(), &cfg));
        match got {
            Ok(enc) => {
                let db = enc.report.final_psnr;
                pass &= (db - reference).abs() <= 1.5;
                parts.push(format!("kodim{n}@{ratio}: {db:.2} dB (reference {reference})"));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("kodim{n}@{ratio}: {e}"));
            }
        }
    }
    Verdict {
        id: "3",
        pass,
        hard: false,
        detail: parts.join("; "),
    }
}

// ---------------------------------------------------------------- 5

fn textured(w: usize, h: usize, rng: &mut ChaCha8Rng) -> PixelPlane {
    let (p, q): (f64, f64) = (rng.random_range(0.0..6.0), rng.random_range(0.2..0.9));
    let noise: Vec<f64> = (0..w * h).map(|_| rng.random_range(-5.0..5.0)).collect();
    PixelPlane::from_fn(w, h, |x, y| {
        let edge = if 3 * x + 2 * y > w + h { 50.0 } else { -50.0 };
        128.0 + edge + 30.0 * (x as f64 * q + p).sin() * (y as f64 * 0.3).cos() + noise[y * w + x]
    })
}

fn random_known(n: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let p = rng.random_range(0.03..0.5);
    let mut m: Vec<bool> = (0..n).map(|_| rng.random_bool(p)).collect();
    m[rng.random_range(0..n)] = true;
    m
}

fn solver_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = SolverConfig::default();
    let mut failures = Vec::new();

    let mut exact = true;
    let mut maxmin = true;
    for _ in 0..100 {
        let (w, h) = (rng.random_range(6..24), rng.random_range(6..24));
        let plane = textured(w, h, &mut rng);
        let known = random_known(w * h, &mut rng);
        let init = fill_unknown(&plane, &known).unwrap();
        let out = inpaint(&init, &known, EedParams::STANDARD, &cfg).unwrap().plane;
        let kv = || plane.data().iter().zip(&known).filter(|(_, k)| **k).map(|(v, _)| *v);
        let (lo, hi) = (kv().fold(f64::MAX, f64::min), kv().fold(f64::MIN, f64::max));
        for (i, &v) in out.data().iter().enumerate() {
            exact &= !known[i] || v.to_bits() == plane.data()[i].to_bits();
            maxmin &= v >= lo - 1e-6 && v <= hi + 1e-6;
        }
    }
    if !exact {
        failures.push("known pixels changed".to_string());
    }
    if !maxmin {
        failures.push("max-min violated".to_string());
    }

    let mut const_err: f64 = 0.0;
    for _ in 0..20 {
        let (w, h) = (rng.random_range(4..40), rng.random_range(4..40));
        let c = rng.random_range(0.0..255.0);
        let known = random_known(w * h, &mut rng);
        let init = fill_unknown(&PixelPlane::filled(w, h, c), &known).unwrap();
        let out = inpaint(&init, &known, EedParams::new(1.5, 0.3).unwrap(), &cfg).unwrap();
        const_err = out.plane.data().iter().fold(const_err, |m, v| m.max((v - c).abs()));
    }
    if const_err > 1e-6 {
        failures.push(format!("constant data error {const_err:e}"));
    }

    let mut dense_rel: f64 = 0.0;
    for _ in 0..10 {
        let (w, h) = (rng.random_range(4..=24), rng.random_range(4..=24));
        let n = w * h;
        let plane = textured(w, h, &mut rng);
        let known = random_known(n, &mut rng);
        let tensor = diffusion_tensor(&plane, EedParams::STANDARD).unwrap();
        let init = fill_unknown(&plane, &known).unwrap();
        let got = inpaint_guided(&init, &known, &tensor, &cfg).unwrap().plane;
        // operator columns, then a direct solve on the unknowns
        let st = Stencil::new(&tensor);
        let mut l = DMatrix::zeros(n, n);
        let (mut e, mut col) = (vec![0.0; n], vec![0.0; n]);
        for j in 0..n {
            e[j] = 1.0;
            st.apply(&e, &mut col);
            e[j] = 0.0;
            for i in 0..n {
                l[(i, j)] = col[i];
            }
        }
        let unk: Vec<usize> = (0..n).filter(|&i| !known[i]).collect();
        let kn: Vec<usize> = (0..n).filter(|&i| known[i]).collect();
        let a = DMatrix::from_fn(unk.len(), unk.len(), |i, j| l[(unk[i], unk[j])]);
        let b = DVector::from_fn(unk.len(), |i, _| -kn.iter().map(|&k| l[(unk[i], k)] * plane.data()[k]).sum::<f64>());
        let x = a.lu().solve(&b).unwrap();
        let num: f64 = unk.iter().enumerate().map(|(i, &p)| (got.data()[p] - x[i]).powi(2)).sum::<f64>().sqrt();
        dense_rel = dense_rel.max(num / x.norm());
    }
    if dense_rel > 1e-4 {
        failures.push(format!("dense oracle relative error {dense_rel:e}"));
    }

    let lambda: f64 = 0.7;
    let l2 = lambda * lambda;
    let g_err = [
        (charbonnier(0.0, lambda) - 1.0).abs(),
        (charbonnier(l2, lambda) - 2f64.powf(-0.5)).abs(),
        (charbonnier(3.0 * l2, lambda) - 0.5).abs(),
    ];
    if g_err.iter().any(|&e| e > 1e-12) {
        failures.push(format!("Charbonnier values {g_err:?}"));
    }

    Verdict {
        id: "5",
        pass: failures.is_empty(),
        hard: true,
        detail: if failures.is_empty() {
            format!("exact known pixels, max-min on 100 masks, constant error {const_err:.1e}, dense oracle {dense_rel:.1e}")
        } else {
            failures.join("; ")
        },
    }
}

// ---------------------------------------------------------------- 6

fn random_container(rng: &mut ChaCha8Rng) -> Container {
    let (w, h) = (rng.random_range(1..200), rng.random_range(1..200));
    let grid = BlockGrid::new(w, h);
    let mask = |rng: &mut ChaCha8Rng, p: f64| {
        let mut bits: Vec<bool> = (0..grid.len()).map(|_| rng.random_bool(p)).collect();
        bits[rng.random_range(0..grid.len())] = true;
        BlockMask::from_bits(grid, bits).unwrap()
    };
    let luma_mask = mask(rng, 0.3);
    let chroma_mask = mask(rng, 0.1);
    let params = |rng: &mut ChaCha8Rng| {
        EedParams::new(rng.random_range(1..2048) as f64 / 256.0, rng.random_range(1..4096) as f64 / 256.0).unwrap()
    };
    let bytes = |rng: &mut ChaCha8Rng| (0..rng.random_range(0..300)).map(|_| rng.random()).collect::<Vec<u8>>();
    Container {
        width: w,
        height: h,
        luma_params: params(rng),
        chroma_params: params(rng),
        luma_mask,
        chroma_mask,
        payload_y: bytes(rng),
        payload_cb: bytes(rng),
        payload_cr: bytes(rng),
    }
}

fn dct_oracle(tile: &[f64; 64]) -> [f64; 64] {
    let c = |k: usize| if k == 0 { (0.125f64).sqrt() } else { 0.5 };
    let m = DMatrix::from_fn(8, 8, |k, n| c(k) * ((2 * n + 1) as f64 * k as f64 * std::f64::consts::PI / 16.0).cos());
    let x = DMatrix::from_row_slice(8, 8, tile);
    let y = &m * x * m.transpose();
    let mut out = [0.0; 64];
    for (i, v) in out.iter_mut().enumerate() {
        *v = y[(i / 8, i % 8)];
    }
    out
}

fn codec_losslessness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = Vec::new();

    let arith_ok = (0..10_000).all(|_| {
        let n = rng.random_range(1..=10_000);
        let p: f64 = rng.random();
        let bits: Vec<bool> = (0..n).map(|_| rng.random_bool(p)).collect();
        arith_decode(&arith_encode(&bits), n).as_ref() == Ok(&bits)
    });
    if !arith_ok {
        failures.push("arithmetic coder roundtrip".to_string());
    }

    let container_ok = (0..1000).all(|_| {
        let c = random_container(&mut rng);
        read_container(&write_container(&c).unwrap()).as_ref() == Ok(&c)
    });
    if !container_ok {
        failures.push("container roundtrip".to_string());
    }

    let pack_ok = (0..1000).all(|_| {
        let (w, h) = (rng.random_range(1..100), rng.random_range(1..100));
        let grid = BlockGrid::new(w, h);
        let plane = PixelPlane::from_fn(w, h, |_, _| rng.random_range(0..256) as f64);
        let mut bits: Vec<bool> = (0..grid.len()).map(|_| rng.random_bool(0.4)).collect();
        bits[0] = true;
        let mask = BlockMask::from_bits(grid, bits).unwrap();
        let mut back = PixelPlane::filled(w, h, -1.0);
        unpack_blocks(&pack_blocks(&plane, &mask).unwrap(), &mask, &mut back).unwrap();
        (0..h).all(|y| (0..w).all(|x| !mask.is_kept(grid.block_of(x, y)) || back.get(x, y) == plane.get(x, y)))
    });
    if !pack_ok {
        failures.push("pack/unpack identity".to_string());
    }

    let mut dct_err: f64 = 0.0;
    for _ in 0..1000 {
        let tile: [f64; 64] = std::array::from_fn(|_| rng.random_range(-128.0..128.0));
        let coef = fdct8x8(&tile);
        let oracle = dct_oracle(&tile);
        let back = idct8x8(&coef);
        for i in 0..64 {
            dct_err = dct_err.max((coef[i] - oracle[i]).abs()).max((back[i] - tile[i]).abs());
        }
    }
    if dct_err > 1e-9 {
        failures.push(format!("DCT error {dct_err:e}"));
    }

    let mut seeds = Vec::new();
    for (i, q) in [5u8, 30, 75, 95].into_iter().enumerate() {
        let rgb = {
            let mut r = ChaCha8Rng::seed_from_u64(i as u64);
            let (w, h) = (17 + 8 * i, 13 + 5 * i);
            let mut ch = || textured(w, h, &mut r);
            RgbImage::new(ch(), ch(), ch()).unwrap().quantized()
        };
        seeds.push(encode_rgb(&rgb, q, Sampling::S420).unwrap());
        seeds.push(encode_rgb(&rgb, q, Sampling::S444).unwrap());
        seeds.push(encode_gray(&rgb.planes()[0].clone(), q, TableClass::Luma).unwrap());
    }
    let mut panics = 0;
    let mut rejected = 0;
    let hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    for k in 0..10_000 {
        let mut data = seeds[k % seeds.len()].clone();
        match rng.random_range(0..4) {
            0 => {
                for _ in 0..rng.random_range(1..8) {
                    let i = rng.random_range(0..data.len());
                    data[i] = rng.random();
                }
            }
            1 => {
                let i = rng.random_range(0..data.len());
                data[i] ^= 1 << rng.random_range(0..8);
            }
            2 => data.truncate(rng.random_range(0..data.len())),
            _ => {
                let i = rng.random_range(0..data.len());
                let j = rng.random_range(i..data.len().min(i + 64) + 1);
                data.drain(i..j.min(data.len()));
            }
        }
        match catch_unwind(AssertUnwindSafe(|| (decode_baseline(&data).is_err(), read_container(&data).is_err()))) {
            Ok((bad, _)) => rejected += bad as usize,
            Err(_) => panics += 1,
        }
    }
    std::panic::set_hook(hook);
    if panics > 0 {
        failures.push(format!("{panics} decoder panics under fuzzing"));
    }

    Verdict {
        id: "6",
        pass: failures.is_empty(),
        hard: true,
        detail: if failures.is_empty() {
            format!("10^4 coder strings, 1000 containers, 1000 packs, DCT {dct_err:.1e}, 10^4 fuzzed streams ({rejected} rejected, 0 panics)")
        } else {
            failures.join("; ")
        },
    }
}

// ---------------------------------------------------------------- 7

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let src = read_pnm(fixtures().join("chelsea.ppm")).unwrap().into_rgb();
    let input = dir.path().join("in.ppm");
    write_ppm(&input, &src.crop(128, 64, 128, 96).unwrap()).unwrap();
    let encode = |name: &str| {
        let out = dir.path().join(name);
        let st = beed()
            .arg("encode")
            .arg(&input)
            .args(["--ratio", "20", "--seed", "7", "--qualities", "20,50", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
        std::fs::read(out).unwrap()
    };
    let (a, b) = (encode("a.beed"), encode("b.beed"));
    // reference produced once and committed, so other machines compare too
    let golden = std::fs::read(fixtures().join("determinism_golden.beed")).unwrap_or_default();
    Verdict {
        id: "7",
        pass: a == b && a == golden,
        hard: true,
        detail: format!(
            "repeat encode identical: {}, matches committed container: {} ({} bytes)",
            a == b,
            a == golden,
            a.len()
        ),
    }
}

#[test]
fn acceptance() {
    let mut verdicts = vec![solver_correctness(), codec_losslessness(), determinism(), corner_selection()];
    for v in &verdicts {
        report(&v.line());
    }
    let (images, source) = comparison_images();
    let runs: Vec<(String, Vec<Point>)> = images.iter().map(|(n, img)| (n.clone(), run_points(img))).collect();
    let mut rest = vec![jpeg_dominance(&runs, source)];
    rest.extend(optimizer_safety(&runs, source));
    rest.push(kodak_vicinity());
    for v in &rest {
        report(&v.line());
    }
    verdicts.extend(rest);
    verdicts.sort_by_key(|v| v.id);

    report("\nacceptance summary");
    for v in &verdicts {
        report(&v.line());
    }
    let broken: Vec<_> = verdicts.iter().filter(|v| v.hard && !v.pass).map(|v| v.id).collect();
    assert!(broken.is_empty(), "criteria that hold by construction failed: {broken:?}");
}
