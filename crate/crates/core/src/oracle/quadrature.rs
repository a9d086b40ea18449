// SPDX-License-Identifier: MIT OR Apache-2.0

//! Direct numerical evaluation of the single-segment evidence integral over
//! the segment location (μ or β) and variance, without any conjugate
//! algebra. The variance is integrated as `σ² = e^t` over the real line.

use std::collections::BinaryHeap;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{Hyperparams, Variant};

pub const MAX_QUADRATURE_WINDOW: usize = 50;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

// Gauss–Kronrod 7/15 abscissae and weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Value, error estimate and `∫|f|` on one interval.
fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fv = [0.0; 15];
    fv[7] = f(center);
    for j in 0..7 {
        let dx = half * XGK[j];
        fv[j] = f(center - dx);
        fv[14 - j] = f(center + dx);
    }
    let mut kronrod = fv[7] * WGK[7];
    let mut gauss = fv[7] * WG[3];
    let mut abs = fv[7].abs() * WGK[7];
    for j in 0..7 {
        let pair = fv[j] + fv[14 - j];
        kronrod += WGK[j] * pair;
        abs += WGK[j] * (fv[j].abs() + fv[14 - j].abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fv[7] - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs());
    }
    let (result, asc, abs) = (kronrod * half, asc * half.abs(), abs * half.abs());
    // QUADPACK qk15 error scaling
    let mut err = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    if abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * abs);
    }
    (result, err, abs)
}

struct Interval {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    const MAX_INTERVALS: usize = 4000;
    let (value, error, abs) = kronrod(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Interval {
        a,
        b,
        value,
        error,
        abs,
    });
    let (mut total, mut total_err, mut total_abs) = (value, error, abs);
    // the second bound stops once every interval sits at its roundoff floor
    while total_err > rel_tol * total.abs()
        && total_err > 100.0 * f64::EPSILON * total_abs
        && total_err > 1e-300
    {
        if !total.is_finite() {
            return Err(Error::OracleNumerics(format!(
                "integrand is not finite on [{a}, {b}]"
            )));
        }
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::OracleNumerics(format!(
                "no convergence after {MAX_INTERVALS} subintervals (estimate {total}, error {total_err})"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (lv, le, la) = kronrod(&mut f, worst.a, mid);
        let (rv, re, ra) = kronrod(&mut f, mid, worst.b);
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        total_abs += la + ra - worst.abs;
        heap.push(Interval {
            a: worst.a,
            b: mid,
            value: lv,
            error: le,
            abs: la,
        });
        heap.push(Interval {
            a: mid,
            b: worst.b,
            value: rv,
            error: re,
            abs: ra,
        });
    }
    // re-add to shed accumulated cancellation in the running sums
    Ok(heap.iter().map(|i| i.value).sum())
}

/// `∫_ℝ g(x) dx` through `x = center + scale · s/(1-s²)`, `s ∈ (-1, 1)`.
pub fn integrate_real_line<F: FnMut(f64) -> f64>(
    mut g: F,
    center: f64,
    scale: f64,
    rel_tol: f64,
) -> Result<f64> {
    integrate(
        |s| {
            let d = 1.0 - s * s;
            if d <= 0.0 {
                return 0.0;
            }
            let u = s / d;
            let jac = (1.0 + s * s) / (d * d);
            let v = g(center + scale * u) * scale * jac;
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        -1.0,
        1.0,
        rel_tol,
    )
}

/// Mode of a unimodal `f`, by bracketing from `start` then golden section.
fn find_mode<F: FnMut(f64) -> f64>(f: &mut F, start: f64, step: f64) -> Result<f64> {
    const GOLD: f64 = 1.618_033_988_749_895;
    let mut a = start;
    let mut fa = f(a);
    let mut b = start + step;
    let mut fb = f(b);
    if fb < fa {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = b + GOLD * (b - a);
    let mut fc = f(c);
    let mut guard = 0;
    while fc > fb {
        a = b;
        b = c;
        fb = fc;
        c = b + GOLD * (b - a);
        fc = f(c);
        guard += 1;
        if guard > 200 || !c.is_finite() {
            return Err(Error::OracleNumerics(
                "could not bracket the integrand's mode".into(),
            ));
        }
    }
    let (mut lo, mut hi) = if a < c { (a, c) } else { (c, a) };
    let inv = 1.0 / GOLD;
    let mut x1 = hi - inv * (hi - lo);
    let mut x2 = lo + inv * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if (hi - lo).abs() <= 1e-10 * step.abs() || (hi - lo).abs() <= 4.0 * f64::EPSILON * x1.abs()
        {
            break;
        }
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv * (hi - lo);
            f2 = f(x2);
        }
    }
    Ok(if f1 > f2 { x1 } else { x2 })
}

/// Below this log value an integrand is far beneath anything `exp` can
/// resolve next to the bulk, while its own float noise is large enough to
/// defeat the quadrature, so the Laplace value is used instead.
const NEGLIGIBLE_LOG: f64 = -1e6;

/// `log ∫ exp(log_f(x)) dx` for a unimodal `log_f`, centred on its mode and
/// scaled by its curvature there.
fn log_integrate<F: FnMut(f64) -> f64>(
    mut log_f: F,
    guess: f64,
    guess_scale: f64,
    rel_tol: f64,
) -> Result<f64> {
    let mode = find_mode(&mut log_f, guess, guess_scale)?;
    let peak = log_f(mode);
    if !peak.is_finite() {
        return Err(Error::OracleNumerics(format!(
            "log integrand not finite at mode ({peak})"
        )));
    }
    let h = 1e-3 * guess_scale;
    let curvature = (log_f(mode + h) - 2.0 * peak + log_f(mode - h)) / (h * h);
    let width = if curvature < 0.0 && curvature.is_finite() {
        (-1.0 / curvature).sqrt()
    } else {
        guess_scale
    };
    if peak < NEGLIGIBLE_LOG {
        return Ok(peak + (width * (2.0 * std::f64::consts::PI).sqrt()).ln());
    }
    let mass = integrate_real_line(|x| (log_f(x) - peak).exp(), mode, width, rel_tol)?;
    if mass.is_nan() || mass <= 0.0 {
        return Err(Error::OracleNumerics("integral vanished".into()));
    }
    Ok(peak + mass.ln())
}

fn log_inv_chi_sq_density(sigma_sq: f64, nu0: f64, sigma0_sq: f64) -> f64 {
    let half = 0.5 * nu0;
    half * half.ln() - ln_gamma(half) + half * sigma0_sq.ln()
        - (half + 1.0) * sigma_sq.ln()
        - nu0 * sigma0_sq / (2.0 * sigma_sq)
}

/// Sum of squared one-step residuals of a zero-mean AR(1) window, each
/// run of observed values starting as pure noise.
fn ar1_residual_ss(window: &[Option<f64>], beta: f64) -> f64 {
    let mut ss = 0.0;
    let mut prev: Option<f64> = None;
    for &v in window {
        if let Some(y) = v {
            let e = match prev {
                Some(x) => y - beta * x,
                None => y,
            };
            ss += e * e;
        }
        prev = v;
    }
    ss
}

/// Log evidence of one raw window by 2-D quadrature of the joint density of
/// data, location parameter and variance.
pub fn quadrature_evidence(
    theta: &Hyperparams,
    window: &[Option<f64>],
    variant: Variant,
) -> Result<f64> {
    if window.len() > MAX_QUADRATURE_WINDOW {
        return Err(Error::Domain(format!(
            "quadrature window limited to {MAX_QUADRATURE_WINDOW} positions; got {}",
            window.len()
        )));
    }
    let observed: Vec<f64> = window.iter().flatten().copied().collect();
    if observed.is_empty() {
        return Ok(0.0);
    }
    let m = observed.len() as f64;
    let data_mean = observed.iter().sum::<f64>() / m;
    let data_var = observed
        .iter()
        .map(|y| (y - data_mean).powi(2))
        .sum::<f64>()
        / m;

    let (k0, nu0, s0) = (theta.k0, theta.nu0, theta.sigma0_sq);
    let loc0 = theta.mu0;

    let residual_ss = |loc: f64| -> f64 {
        match variant {
            Variant::IidNormal => observed.iter().map(|y| (y - loc).powi(2)).sum(),
            Variant::Ar1 => ar1_residual_ss(window, loc),
        }
    };

    let inner = |t: f64| -> Result<f64> {
        // beyond e^±600 the prior and likelihood factors leave nothing that
        // survives next to the bulk, and the location integral overflows
        if t.abs() > 600.0 {
            return Ok(f64::NEG_INFINITY);
        }
        let var = t.exp();
        if !var.is_normal() {
            return Ok(f64::NEG_INFINITY);
        }
        let joint = |loc: f64| -> f64 {
            let loglik = -0.5 * m * (LN_2PI + t) - residual_ss(loc) / (2.0 * var);
            let log_loc_prior =
                -0.5 * (LN_2PI + t - k0.ln()) - k0 * (loc - loc0).powi(2) / (2.0 * var);
            loglik + log_loc_prior
        };
        let guess = match variant {
            Variant::IidNormal => data_mean,
            Variant::Ar1 => loc0,
        };
        log_integrate(joint, guess, (var / (m + k0)).sqrt(), 1e-10).map(|v| {
            let total = v + log_inv_chi_sq_density(var, nu0, s0) + t;
            if total.is_nan() {
                f64::NEG_INFINITY
            } else {
                total
            }
        })
    };

    let mut failure = None;
    let outer = |t: f64| -> f64 {
        match inner(t) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NEG_INFINITY
            }
        }
    };
    let guess = (0.5 * (data_var + s0)).max(1e-12).ln();
    let result = log_integrate(outer, guess, 1.0, 1e-9);
    if let Some(e) = failure {
        return Err(e);
    }
    result
}
