//! Least-squares helpers for the angle tables.

use nalgebra::{Matrix4, Vector4};

use super::GammaCurve;
use crate::{Error, Result};

/// Ordinary least squares for `y = a + b x`. Returns `(a, b)`; with a
/// single distinct `x` the slope is zero.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 1e-300 {
        return (my, 0.0);
    }
    let b = sxy / sxx;
    (my - b * mx, b)
}

const C3_MIN: f64 = 0.05;
const C3_MAX: f64 = 6.0;
const C4_MIN: f64 = -0.99;
const C4_MAX: f64 = 50.0;

fn rss(c: &[f64; 4], ds: &[f64], ys: &[f64]) -> f64 {
    let curve = GammaCurve { c: *c };
    ds.iter().zip(ys).map(|(&d, &y)| (curve.eval(d) - y).powi(2)).sum()
}

/// Best `(c1, c2)` for fixed `(c3, c4)`, and its residual sum of squares.
fn linear_part(c3: f64, c4: f64, ds: &[f64], ys: &[f64]) -> ([f64; 4], f64) {
    let xs: Vec<f64> = ds.iter().map(|d| 1.0 / (d.powf(c3) + c4)).collect();
    let (a, b) = linear_fit(&xs, ys);
    let c = [a, b, c3, c4];
    (c, rss(&c, ds, ys))
}

/// Fits `y = c1 + c2 / (d^c3 + c4)` with `c3 > 0` and `c4 > -1`, so the
/// denominator stays positive for `d >= 1` and the curve is monotone there.
///
/// A grid over `(c3, c4)` with the linear coefficients solved exactly
/// gives the start for a bounded Levenberg-Marquardt refinement. Returns
/// the curve and the root-mean-square residual.
pub fn fit_gamma_curve(ds: &[f64], ys: &[f64]) -> Result<(GammaCurve, f64)> {
    if ds.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: ds.len(),
            got: ys.len(),
        });
    }
    if ds.iter().chain(ys).any(|v| !v.is_finite()) || ds.iter().any(|&d| d < 1.0) {
        return Err(Error::param("fit data must be finite with degrees >= 1"));
    }
    let mut distinct: Vec<f64> = ds.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if distinct.len() < 4 {
        return Err(Error::param("need at least four distinct degrees to fit"));
    }

    let mut best = ([0.0; 4], f64::INFINITY);
    for i in 0..48 {
        let c3 = C3_MIN * (C3_MAX / C3_MIN).powf(i as f64 / 47.0);
        for k in 0..40 {
            // Dense near -1, sparse for large offsets.
            let c4 = C4_MIN + (C4_MAX - C4_MIN) * (k as f64 / 39.0).powi(3);
            let cand = linear_part(c3, c4, ds, ys);
            if cand.1 < best.1 {
                best = cand;
            }
        }
    }
    let (c, r) = levenberg_marquardt(best.0, ds, ys);
    let rms = (r / ds.len() as f64).sqrt();
    Ok((GammaCurve { c }, rms))
}

fn project(c: &mut [f64; 4]) {
    c[2] = c[2].clamp(C3_MIN, C3_MAX);
    c[3] = c[3].clamp(C4_MIN, C4_MAX);
}

fn levenberg_marquardt(mut c: [f64; 4], ds: &[f64], ys: &[f64]) -> ([f64; 4], f64) {
    let mut f = rss(&c, ds, ys);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for (&d, &y) in ds.iter().zip(ys) {
            let dc3 = d.powf(c[2]);
            let den = dc3 + c[3];
            let r = c[0] + c[1] / den - y;
            let jac = Vector4::new(1.0, 1.0 / den, -c[1] * dc3 * d.ln() / (den * den), -c[1] / (den * den));
            jtj += jac * jac.transpose();
            jtr += jac * r;
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj;
            for i in 0..4 {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut next = [c[0] + step[0], c[1] + step[1], c[2] + step[2], c[3] + step[3]];
            project(&mut next);
            let fn_ = rss(&next, ds, ys);
            if fn_.is_finite() && fn_ < f {
                let gain = f - fn_;
                c = next;
                f = fn_;
                lambda = (lambda * 0.3).max(1e-15);
                improved = gain > 1e-30 + 1e-15 * f;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (c, f)
}
