//! Brute-force reference implementations used as test oracles. They only
//! share the SVD and the dense resampling operator with the library; all
//! projection, blending and metric arithmetic is written out with plain
//! loops over nested vectors.
#![allow(dead_code)]

use eigensr::model::{sr_apply, SrOperator};
use eigensr::resample::{Resampler, ScaleFactor};
use eigensr::speclin::spectral_svd;
use eigensr::{HsiCube, Image, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rows = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sf(k: usize) -> ScaleFactor {
    ScaleFactor::new(k).unwrap()
}

pub fn random_cube<R: Rng>(rng: &mut R, l: usize, h: usize, w: usize) -> HsiCube {
    let data = (0..l * h * w).map(|_| rng.random::<f64>()).collect();
    HsiCube::new(l, h, w, data).unwrap()
}

pub fn to_rows(cube: &HsiCube) -> Rows {
    (0..cube.bands())
        .map(|l| cube.band_slice(l).to_vec())
        .collect()
}

pub fn rows_to_matrix(r: &Rows) -> Matrix {
    Matrix::from_rows(r).unwrap()
}

pub fn max_abs(r: &Rows) -> f64 {
    r.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn flatten(r: &Rows) -> Vec<f64> {
    r.iter().flatten().copied().collect()
}

/// Basis as `u[l][c]`.
pub fn basis_of(y: &Rows) -> Rows {
    let dec = spectral_svd(&rows_to_matrix(y)).unwrap();
    let b = dec.basis();
    (0..b.rows()).map(|r| b.row(r).to_vec()).collect()
}

/// `E[c][j] = Σ_l u[l][c]·y[l][j]` for `c < rank`.
pub fn project_naive(u: &Rows, y: &Rows, rank: usize) -> Rows {
    let n = y[0].len();
    (0..rank)
        .map(|c| {
            (0..n)
                .map(|j| (0..y.len()).map(|l| u[l][c] * y[l][j]).sum())
                .collect()
        })
        .collect()
}

/// `Y[l][j] = Σ_c u[l][c]·e[c][j]`.
pub fn reconstruct_naive(u: &Rows, e: &Rows) -> Rows {
    let n = e[0].len();
    (0..u.len())
        .map(|l| {
            (0..n)
                .map(|j| (0..e.len()).map(|c| u[l][c] * e[c][j]).sum())
                .collect()
        })
        .collect()
}

/// Applies a dense `N_out × N_in` operator to each row.
pub fn apply_dense(op: &Matrix, rows: &Rows) -> Rows {
    rows.iter()
        .map(|r| {
            (0..op.rows())
                .map(|i| (0..op.cols()).map(|j| op[(i, j)] * r[j]).sum())
                .collect()
        })
        .collect()
}

pub fn dense_upsampler(h: usize, w: usize, k: usize) -> Matrix {
    Resampler::upsampler(h, w, sf(k)).unwrap().operator_matrix()
}

pub fn dense_downsampler(h: usize, w: usize, k: usize) -> Matrix {
    Resampler::downsampler(h, w, sf(k))
        .unwrap()
        .operator_matrix()
}

/// Channel SR used by the scripted oracle: the dense operator for the
/// bicubic kind, `sr_apply` otherwise.
fn oracle_sr(op: &SrOperator, rows: &Rows, h: usize, w: usize) -> Rows {
    let k = match op {
        SrOperator::Bicubic { scale } | SrOperator::TinyNet { scale, .. } => scale.get(),
    };
    match op {
        SrOperator::Bicubic { .. } => apply_dense(&dense_upsampler(h, w, k), rows),
        _ => rows
            .iter()
            .map(|r| {
                let img = Image::new(h, w, r.clone()).unwrap();
                sr_apply(op, &img).unwrap().into_vec()
            })
            .collect(),
    }
}

/// Straight transcription of the iterative procedure:
///
/// ```text
/// Y_comb(1) = Y_LR
/// for i = 1..N_it
///     U(i)     = svd(Y_comb(i))
///     E_LR(i)  = U(i)[:, 1:R]ᵀ · Y_LR
///     E_SR(i)  = f_SR(E_LR(i)) channel by channel
///     Y_SR(i)  = U(i)[:, 1:R] · E_SR(i)
///     Y_comb(i+1) = λ·Y_SR(i) + (1-λ)·(i == 1 ? up(Y_comb(1)) : Y_comb(i))
/// return Y_comb(N_it + 1)
/// ```
pub fn scripted_beta(
    y_lr: &HsiCube,
    op: &SrOperator,
    rank: usize,
    iters: usize,
    lambda: f64,
) -> Rows {
    let (h, w) = (y_lr.height(), y_lr.width());
    let k = match op {
        SrOperator::Bicubic { scale } | SrOperator::TinyNet { scale, .. } => scale.get(),
    };
    let y = to_rows(y_lr);
    let mut comb = y.clone();
    for i in 1..=iters {
        let u = basis_of(&comb);
        let e_lr = project_naive(&u, &y, rank);
        let e_sr = oracle_sr(op, &e_lr, h, w);
        let y_sr = reconstruct_naive(&u, &e_sr);
        let prev = if i == 1 {
            apply_dense(&dense_upsampler(h, w, k), &comb)
        } else {
            comb
        };
        comb = y_sr
            .iter()
            .zip(&prev)
            .map(|(s, p)| {
                s.iter()
                    .zip(p)
                    .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                    .collect()
            })
            .collect();
    }
    comb
}

/// `U_R·U_Rᵀ·(band-wise bicubic upsampling of Y)`.
pub fn projected_upsampling(y_lr: &HsiCube, k: usize, rank: usize) -> Rows {
    let y = to_rows(y_lr);
    let u = basis_of(&y);
    let up = apply_dense(&dense_upsampler(y_lr.height(), y_lr.width(), k), &y);
    reconstruct_naive(&u, &project_naive(&u, &up, rank))
}

/// Largest `j` whose cumulative energy share is at most `tau`, floored at 1,
/// found by recomputing every prefix sum from scratch.
pub fn cutoff_scan(sigma: &[f64], tau: f64) -> usize {
    let total: f64 = sigma.iter().sum();
    let mut best = 0;
    for j in 1..=sigma.len() {
        let mut s = 0.0;
        for v in &sigma[..j] {
            s += v;
        }
        if s / total <= tau {
            best = j;
        }
    }
    best.max(1)
}

pub fn psnr_naive(p: &Rows, r: &Rows, peak: f64) -> Vec<f64> {
    p.iter()
        .zip(r)
        .map(|(a, b)| {
            let mut se = 0.0;
            for j in 0..a.len() {
                se += (a[j] - b[j]).powi(2);
            }
            let mse = se / a.len() as f64;
            if mse == 0.0 {
                f64::INFINITY
            } else {
                10.0 * (peak * peak / mse).log10()
            }
        })
        .collect()
}

/// SSIM of one band by explicit 11×11 windows.
pub fn ssim_naive_band(p: &[f64], r: &[f64], h: usize, w: usize, peak: f64) -> f64 {
    let size = 11usize;
    let sigma: f64 = 1.5;
    let mut win = vec![vec![0.0; size]; size];
    let mut total = 0.0;
    for (i, row) in win.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
            total += *v;
        }
    }
    let c1 = (0.01 * peak).powi(2);
    let c2 = (0.03 * peak).powi(2);
    let mut acc = 0.0;
    let mut count = 0;
    for y0 in 0..=h - size {
        for x0 in 0..=w - size {
            let (mut mp, mut mr) = (0.0, 0.0);
            for i in 0..size {
                for j in 0..size {
                    let g = win[i][j] / total;
                    mp += g * p[(y0 + i) * w + x0 + j];
                    mr += g * r[(y0 + i) * w + x0 + j];
                }
            }
            let (mut vp, mut vr, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..size {
                for j in 0..size {
                    let g = win[i][j] / total;
                    let a = p[(y0 + i) * w + x0 + j] - mp;
                    let b = r[(y0 + i) * w + x0 + j] - mr;
                    vp += g * a * a;
                    vr += g * b * b;
                    cov += g * a * b;
                }
            }
            acc += (2.0 * mp * mr + c1) * (2.0 * cov + c2)
                / ((mp * mp + mr * mr + c1) * (vp + vr + c2));
            count += 1;
        }
    }
    acc / count as f64
}

pub fn sam_naive(p: &Rows, r: &Rows) -> f64 {
    let n = p[0].len();
    let mut acc = 0.0;
    for j in 0..n {
        let (mut d, mut a, mut b) = (0.0, 0.0, 0.0);
        for l in 0..p.len() {
            d += p[l][j] * r[l][j];
            a += p[l][j] * p[l][j];
            b += r[l][j] * r[l][j];
        }
        let den = a.sqrt() * b.sqrt();
        if den >= 1e-12 {
            acc += (d / den).clamp(-1.0, 1.0).acos() * 180.0 / std::f64::consts::PI;
        }
    }
    acc / n as f64
}
