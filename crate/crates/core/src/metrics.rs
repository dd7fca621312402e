//! Reference-based quality metrics: per-band PSNR and SSIM, per-pixel SAM.

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::cube::HsiCube;
use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
/// Pixels whose spectral norm product falls below this contribute 0° to SAM.
pub const SAM_NORM_FLOOR: f64 = 1e-12;

fn check_pair(pred: &HsiCube, reference: &HsiCube) -> Result<()> {
    if pred.shape() != reference.shape() {
        return Err(Error::DimensionMismatch(format!(
            "prediction {:?} vs reference {:?}",
            pred.shape(),
            reference.shape()
        )));
    }
    if pred.pixels() == 0 {
        return Err(Error::Empty("metric on empty cube"));
    }
    Ok(())
}

fn check_peak(peak: f64) -> Result<()> {
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "peak must be positive, got {peak}"
        )));
    }
    Ok(())
}

/// Per-band PSNR plus the mean over bands with finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct PsnrResult {
    /// `f64::INFINITY` marks a band with zero error.
    pub per_band: Vec<f64>,
    /// Mean over finite bands; infinite when every band is exact.
    pub mean: f64,
    /// Number of infinite bands left out of `mean`.
    pub excluded: usize,
}

pub fn psnr(pred: &HsiCube, reference: &HsiCube, peak: f64) -> Result<PsnrResult> {
    check_pair(pred, reference)?;
    check_peak(peak)?;
    let n = pred.pixels() as f64;
    let per_band: Vec<f64> = (0..pred.bands())
        .map(|l| {
            let se: f64 = pred
                .band_slice(l)
                .iter()
                .zip(reference.band_slice(l))
                .map(|(p, r)| (p - r) * (p - r))
                .sum();
            let mse = se / n;
            if mse == 0.0 {
                f64::INFINITY
            } else {
                10.0 * (peak * peak / mse).log10()
            }
        })
        .collect();
    let finite: Vec<f64> = per_band.iter().copied().filter(|v| v.is_finite()).collect();
    let mean = if finite.is_empty() {
        f64::INFINITY
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    Ok(PsnrResult {
        excluded: per_band.len() - finite.len(),
        per_band,
        mean,
    })
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - c;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Valid-region separable filtering of an `h × w` image.
fn filter_valid(src: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut tmp = vec![0.0; h * ow];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = taps.iter().zip(&row[x..x + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for (i, t) in taps.iter().enumerate() {
            let trow = &tmp[(y + i) * ow..(y + i + 1) * ow];
            for (o, v) in out[y * ow..(y + 1) * ow].iter_mut().zip(trow) {
                *o += t * v;
            }
        }
    }
    out
}

fn ssim_band(p: &[f64], r: &[f64], h: usize, w: usize, peak: f64, taps: &[f64]) -> f64 {
    let c1 = (0.01 * peak).powi(2);
    let c2 = (0.03 * peak).powi(2);
    let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>();
    let mu_p = filter_valid(p, h, w, taps);
    let mu_r = filter_valid(r, h, w, taps);
    let e_pp = filter_valid(&prod(p, p), h, w, taps);
    let e_rr = filter_valid(&prod(r, r), h, w, taps);
    let e_pr = filter_valid(&prod(p, r), h, w, taps);
    let mut total = 0.0;
    for i in 0..mu_p.len() {
        let (mp, mr) = (mu_p[i], mu_r[i]);
        let vp = e_pp[i] - mp * mp;
        let vr = e_rr[i] - mr * mr;
        let cov = e_pr[i] - mp * mr;
        total +=
            ((2.0 * mp * mr + c1) * (2.0 * cov + c2)) / ((mp * mp + mr * mr + c1) * (vp + vr + c2));
    }
    total / mu_p.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsimResult {
    pub per_band: Vec<f64>,
    pub mean: f64,
}

/// Single-scale SSIM with an 11×11 Gaussian window (σ = 1.5), averaged over
/// the valid region of each band.
pub fn ssim(pred: &HsiCube, reference: &HsiCube, peak: f64) -> Result<SsimResult> {
    check_pair(pred, reference)?;
    check_peak(peak)?;
    let (_, h, w) = pred.shape();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "SSIM needs bands of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    // Identical bands are exactly 1, so skip the arithmetic for them.
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let per_band: Vec<f64> = (0..pred.bands())
        .into_par_iter()
        .map(|l| {
            let (p, r) = (pred.band_slice(l), reference.band_slice(l));
            if p == r {
                1.0
            } else {
                ssim_band(p, r, h, w, peak, &taps)
            }
        })
        .collect();
    let mean = per_band.iter().sum::<f64>() / per_band.len() as f64;
    Ok(SsimResult { per_band, mean })
}

/// Mean spectral angle in degrees.
pub fn sam(pred: &HsiCube, reference: &HsiCube) -> Result<f64> {
    check_pair(pred, reference)?;
    let l = pred.bands();
    if l < 2 {
        return Err(Error::InvalidArgument(
            "SAM needs at least two bands".into(),
        ));
    }
    let n = pred.pixels();
    let (pd, rd) = (pred.data(), reference.data());
    let mut total = 0.0;
    for j in 0..n {
        let (mut pr, mut pp, mut rr) = (0.0, 0.0, 0.0);
        for b in 0..l {
            let (p, r) = (pd[b * n + j], rd[b * n + j]);
            pr += p * r;
            pp += p * p;
            rr += r * r;
        }
        let norm = (pp * rr).sqrt();
        if norm < SAM_NORM_FLOOR {
            continue;
        }
        total += (pr / norm).clamp(-1.0, 1.0).acos().to_degrees();
    }
    Ok(total / n as f64)
}

/// Serializes infinities as the string `"+inf"`.
fn ser_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() && *v > 0.0 {
        s.serialize_str("+inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn ser_db_vec<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    struct Db(f64);
    impl Serialize for Db {
        fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
            ser_db(&self.0, s)
        }
    }
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        seq.serialize_element(&Db(*x))?;
    }
    seq.end()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    #[serde(serialize_with = "ser_db")]
    pub psnr: f64,
    /// Bands with zero error, left out of the PSNR mean.
    pub psnr_infinite_bands: usize,
    /// `None` when the bands are smaller than the SSIM window.
    pub ssim: Option<f64>,
    pub sam: f64,
    #[serde(serialize_with = "ser_db_vec")]
    pub psnr_per_band: Vec<f64>,
    pub ssim_per_band: Option<Vec<f64>>,
    pub peak: f64,
}

/// All three metrics. `peak` defaults to the reference maximum.
pub fn evaluate(pred: &HsiCube, reference: &HsiCube, peak: Option<f64>) -> Result<MetricReport> {
    check_pair(pred, reference)?;
    let peak = match peak {
        Some(p) => p,
        None => {
            let m = reference.max_value();
            if m > 0.0 {
                m
            } else {
                return Err(Error::Degenerate(
                    "reference maximum is not positive; pass an explicit peak".into(),
                ));
            }
        }
    };
    let p = psnr(pred, reference, peak)?;
    let (_, h, w) = pred.shape();
    let s = if h >= SSIM_WINDOW && w >= SSIM_WINDOW {
        Some(ssim(pred, reference, peak)?)
    } else {
        None
    };
    let sam = if pred.bands() >= 2 {
        sam(pred, reference)?
    } else {
        0.0
    };
    Ok(MetricReport {
        psnr: p.mean,
        psnr_infinite_bands: p.excluded,
        ssim: s.as_ref().map(|s| s.mean),
        sam,
        psnr_per_band: p.per_band,
        ssim_per_band: s.map(|s| s.per_band),
        peak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::random_cube;

    #[test]
    fn psnr_hand_values() {
        let a = HsiCube::new(2, 3, 3, vec![0.0; 18]).unwrap();
        let b = HsiCube::new(2, 3, 3, vec![0.1; 18]).unwrap();
        let r = psnr(&a, &b, 1.0).unwrap();
        assert!(r.per_band.iter().all(|v| (v - 20.0).abs() < 1e-12));
        let same = psnr(&a, &a, 1.0).unwrap();
        assert!(same.per_band.iter().all(|v| *v == f64::INFINITY));
        assert_eq!(same.excluded, 2);
        assert!(psnr(&a, &b, 0.0).is_err());
    }

    #[test]
    fn taps_are_normalized_and_symmetric() {
        let t = gaussian_taps(11, 1.5);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(t[0], t[10]);
        assert!(t[5] > t[4]);
    }

    #[test]
    fn ssim_needs_window() {
        let a = random_cube(2, 8, 8, 0).unwrap();
        assert!(ssim(&a, &a, 1.0).is_err());
        let b = random_cube(2, 12, 12, 0).unwrap();
        assert_eq!(ssim(&b, &b, 1.0).unwrap().per_band, vec![1.0, 1.0]);
    }

    #[test]
    fn sam_orthogonal_and_scaled() {
        let p = HsiCube::new(2, 2, 2, vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let r = HsiCube::new(2, 2, 2, vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!((sam(&p, &r).unwrap() - 90.0).abs() < 1e-12);
        let c = random_cube(3, 4, 4, 1).unwrap();
        let twice = HsiCube::new(3, 4, 4, c.data().iter().map(|v| 2.0 * v).collect()).unwrap();
        assert!(sam(&twice, &c).unwrap() < 1e-6);
        assert_eq!(sam(&c, &c).unwrap(), 0.0);
    }

    #[test]
    fn report_json_uses_inf_sentinel() {
        let c = random_cube(3, 12, 12, 2).unwrap();
        let rep = evaluate(&c, &c, None).unwrap();
        let json = serde_json::to_value(&rep).unwrap();
        assert_eq!(json["psnr"], "+inf");
        assert_eq!(json["ssim"], 1.0);
        assert_eq!(json["sam"], 0.0);
        assert_eq!(json["psnr_per_band"][0], "+inf");
    }
}
