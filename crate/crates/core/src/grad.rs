//! Energy-preserving bank loss and analytic parameter gradients.
//!
//! Every gradient here has a finite-difference counterpart in
//! [`finite_difference_oracle`], which is the reference the analytic code is
//! checked against.
//!
//! Derivatives of the envelope `E = sinc(u)^m`, `u = f_b t / m`:
//!
//! ```text
//! dE/dm   = E * Log(sinc u) - E * (sinc'(u) / sinc(u)) * u
//! dE/df_b = E * (sinc'(u) / sinc(u)) * t / m
//! ```
//!
//! At `m = 0` the envelope is the constant 1 and both derivatives are taken
//! as 0; the one-sided derivative in `m` does not exist there.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bank::{
    carrier, complex_pow, sinc, sinc_arg, sinc_deriv, tap_time, CarrierSign, FbspParams, KernelBank,
};
use crate::error::{Error, Result};

/// Distance, in units of the sinc argument, inside which a sinc zero makes
/// the gradient undefined at fractional order.
pub const SINGULARITY_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGradient {
    pub d_m: f64,
    pub d_fb: f64,
    pub d_fc: Vec<f64>,
}

impl ParamGradient {
    pub fn zeros(num_filters: usize) -> Self {
        Self {
            d_m: 0.0,
            d_fb: 0.0,
            d_fc: vec![0.0; num_filters],
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.d_m *= s;
        self.d_fb *= s;
        self.d_fc.iter_mut().for_each(|g| *g *= s);
    }

    pub fn add_scaled(&mut self, other: &ParamGradient, s: f64) {
        self.d_m += s * other.d_m;
        self.d_fb += s * other.d_fb;
        for (a, b) in self.d_fc.iter_mut().zip(&other.d_fc) {
            *a += s * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_m.is_finite() && self.d_fb.is_finite() && self.d_fc.iter().all(|g| g.is_finite())
    }
}

/// Envelope value and its derivatives at one tap.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EnvelopeTap {
    pub value: Complex64,
    pub d_m: Complex64,
    pub d_fb: Complex64,
}

fn is_fractional(m: f64) -> bool {
    m.fract() != 0.0
}

/// Reject parameters whose envelope hits a sinc zero at fractional order.
pub fn check_singularity(params: &FbspParams, n_taps: usize) -> Result<()> {
    if params.m == 0.0 || !is_fractional(params.m) {
        return Ok(());
    }
    for n in 0..n_taps {
        let u = sinc_arg(params.m, params.f_b, tap_time(n, n_taps));
        let j = u.round();
        if j != 0.0 && (u - j).abs() < SINGULARITY_RADIUS {
            return Err(Error::Singularity(format!(
                "tap {n}: sinc argument {u} lies within {SINGULARITY_RADIUS} of the zero at {j} \
                 (m = {}, f_b = {}); the gradient is unbounded there",
                params.m, params.f_b
            )));
        }
    }
    Ok(())
}

/// Smallest distance from any tap's sinc argument to a nonzero integer;
/// infinite when the order is zero or whole, where the envelope is smooth.
pub fn zero_clearance(params: &FbspParams, n_taps: usize) -> f64 {
    if params.m == 0.0 || !is_fractional(params.m) {
        return f64::INFINITY;
    }
    (0..n_taps)
        .map(|n| sinc_arg(params.m, params.f_b, tap_time(n, n_taps)))
        .filter(|u| u.round() != 0.0)
        .map(|u| (u - u.round()).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Draws closer than this to a sinc zero are skipped by the random suites:
/// a finite-difference stencil that straddles the zero sees the kink of the
/// fractional power, not the derivative.
pub const FD_CLEARANCE: f64 = 1e-4;

pub(crate) fn envelope_tap(m: f64, f_b: f64, t: f64) -> EnvelopeTap {
    let zero = Complex64::new(0.0, 0.0);
    if m == 0.0 {
        return EnvelopeTap {
            value: Complex64::new(1.0, 0.0),
            d_m: zero,
            d_fb: zero,
        };
    }
    let u = sinc_arg(m, f_b, t);
    let s = sinc(u);
    let sd = sinc_deriv(u);
    let value = complex_pow(s, m);
    // E * sinc'/sinc and E * Log(sinc), with their limits at an exact zero
    let (e_ratio, e_log) = if s != 0.0 {
        let log = Complex64::new(
            s.abs().ln(),
            if s < 0.0 { std::f64::consts::PI } else { 0.0 },
        );
        (value * (sd / s), value * log)
    } else if m == 1.0 {
        (Complex64::new(sd, 0.0), zero)
    } else {
        (zero, zero)
    };
    EnvelopeTap {
        value,
        d_m: e_log - e_ratio * u,
        d_fb: e_ratio * t,
    }
}

/// `(1/F) sum_k (||K_k||^2 - 1)^2`.
pub fn fbsp_loss(bank: &KernelBank) -> f64 {
    let norms = bank.row_norms_sq();
    norms.iter().map(|r| (r - 1.0).powi(2)).sum::<f64>() / norms.len() as f64
}

/// Analytic gradient of [`fbsp_loss`] of the fbsp bank built from `params`.
///
/// Row norms do not depend on the carrier, so the centre-frequency
/// components are exactly zero.
pub fn loss_gradient(params: &FbspParams, n_taps: usize) -> Result<ParamGradient> {
    params.validate()?;
    check_singularity(params, n_taps)?;
    let a2 = 1.0 / n_taps as f64;
    let (mut sum_e2, mut sum_dm, mut sum_dfb) = (0.0, 0.0, 0.0);
    for n in 0..n_taps {
        let tap = envelope_tap(params.m, params.f_b, tap_time(n, n_taps));
        sum_e2 += tap.value.norm_sqr();
        sum_dm += 2.0 * (tap.value.conj() * tap.d_m).re;
        sum_dfb += 2.0 * (tap.value.conj() * tap.d_fb).re;
    }
    // all rows share the same norm
    let r = a2 * params.f_b * sum_e2;
    let dr_dm = a2 * params.f_b * sum_dm;
    let dr_dfb = a2 * sum_e2 + a2 * params.f_b * sum_dfb;
    let outer = 2.0 * (r - 1.0);
    Ok(ParamGradient {
        d_m: outer * dr_dm,
        d_fb: outer * dr_dfb,
        d_fc: vec![0.0; params.num_filters()],
    })
}

/// Pull a cotangent on the kernel back to the parameters:
/// `Re sum_{k,n} C[k][n] * dK[k][n]/dtheta` for each parameter.
pub fn kernel_jacobian_vector(
    params: &FbspParams,
    n_taps: usize,
    cotangent: &Array2<Complex64>,
) -> Result<ParamGradient> {
    params.validate()?;
    if cotangent.dim() != (params.num_filters(), n_taps) {
        return Err(Error::Shape(format!(
            "cotangent is {:?}, expected ({}, {n_taps})",
            cotangent.dim(),
            params.num_filters()
        )));
    }
    check_singularity(params, n_taps)?;
    let scale = 1.0 / (n_taps as f64).sqrt();
    let amp = scale * params.f_b.sqrt();
    let d_amp = scale * 0.5 / params.f_b.sqrt();
    let taps: Vec<EnvelopeTap> = (0..n_taps)
        .map(|n| envelope_tap(params.m, params.f_b, tap_time(n, n_taps)))
        .collect();
    let two_pi = 2.0 * std::f64::consts::PI;

    let mut grad = ParamGradient::zeros(params.num_filters());
    for (k, crow) in cotangent.rows().into_iter().enumerate() {
        let f_c = params.f_c[k];
        let (mut gm, mut gfb, mut gfc) = (0.0, 0.0, 0.0);
        for (n, (c, tap)) in crow.iter().zip(&taps).enumerate() {
            let car = carrier(f_c, n, CarrierSign::Positive);
            let cc = c * car;
            gm += (cc * tap.d_m).re * amp;
            gfb += (cc * (tap.value * d_amp + tap.d_fb * amp)).re;
            // dK/df_c = K * 2i pi n
            let k_val = tap.value * amp;
            gfc += (cc * k_val * Complex64::new(0.0, two_pi * n as f64)).re;
        }
        grad.d_m += gm;
        grad.d_fb += gfb;
        grad.d_fc[k] = gfc;
    }
    Ok(grad)
}

/// Per-parameter finite-difference steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSteps {
    pub m: f64,
    pub f_b: f64,
    pub f_c: f64,
}

impl FdSteps {
    pub fn uniform(step: f64) -> Self {
        Self {
            m: step,
            f_b: step,
            f_c: step,
        }
    }

    /// Shrink the order and bandwidth steps to the envelope's own scale.
    /// The sinc argument reaches `u_max = f_b / (2 m)` at the frame edge,
    /// so the envelope varies over `m / u_max` in `m` and `f_b / u_max` in
    /// `f_b`.
    pub fn adapted(params: &FbspParams, step: f64) -> Self {
        if params.m == 0.0 {
            return Self::uniform(step);
        }
        let u_max = params.f_b / (2.0 * params.m);
        let floor = 1e-6;
        Self {
            m: step * (params.m / u_max).clamp(floor, 1.0),
            f_b: step * (params.f_b / u_max).clamp(floor, 1.0),
            f_c: step,
        }
    }
}

/// Fourth-order central finite differences of `f` in every parameter.
///
/// Near the edge of the valid domain (`m < 0`, `f_b <= 0`, `f_c` outside
/// `[0, 0.5]`) the stencil falls back to second-order central differences,
/// then to a fourth-order one-sided stencil from inside the domain.
pub fn finite_difference_oracle<F>(f: F, params: &FbspParams, step: f64) -> ParamGradient
where
    F: Fn(&FbspParams) -> f64,
{
    finite_difference_oracle_with(f, params, FdSteps::uniform(step))
}

pub fn finite_difference_oracle_with<F>(f: F, params: &FbspParams, steps: FdSteps) -> ParamGradient
where
    F: Fn(&FbspParams) -> f64,
{
    assert!(
        steps.m > 0.0 && steps.f_b > 0.0 && steps.f_c > 0.0,
        "finite-difference steps must be positive"
    );
    let diff =
        |h: f64, lo_bound: f64, hi_bound: f64, x: f64, set: &dyn Fn(&mut FbspParams, f64)| {
            let eval = |v: f64| {
                let mut p = params.clone();
                set(&mut p, v);
                f(&p)
            };
            let one_sided = |dir: f64| {
                let e0 = eval(x);
                let e = |i: f64| eval(x + dir * i * h) - e0;
                dir * (48.0 * e(1.0) - 36.0 * e(2.0) + 16.0 * e(3.0) - 3.0 * e(4.0)) / (12.0 * h)
            };
            if x - 2.0 * h >= lo_bound && x + 2.0 * h <= hi_bound {
                (8.0 * (eval(x + h) - eval(x - h)) - (eval(x + 2.0 * h) - eval(x - 2.0 * h)))
                    / (12.0 * h)
            } else if x - h >= lo_bound && x + h <= hi_bound {
                (eval(x + h) - eval(x - h)) / (2.0 * h)
            } else if x - h < lo_bound {
                one_sided(1.0)
            } else {
                one_sided(-1.0)
            }
        };
    let d_m = diff(steps.m, 0.0, f64::INFINITY, params.m, &|p, v| p.m = v);
    let d_fb = diff(
        steps.f_b,
        f64::MIN_POSITIVE,
        f64::INFINITY,
        params.f_b,
        &|p, v| p.f_b = v,
    );
    let d_fc = (0..params.num_filters())
        .map(|k| diff(steps.f_c, 0.0, 0.5, params.f_c[k], &|p, v| p.f_c[k] = v))
        .collect();
    ParamGradient { d_m, d_fb, d_fc }
}

/// One row of a gradient-check report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckEntry {
    pub param: String,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
    pub status: CheckStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
}

/// Tolerances for comparing analytic and numeric derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rel: 1e-5,
            abs: 1e-8,
        }
    }
}

pub fn compare(
    param: impl Into<String>,
    analytic: f64,
    numeric: f64,
    tol: Tolerance,
) -> GradCheckEntry {
    let diff = (analytic - numeric).abs();
    let denom = analytic.abs().max(numeric.abs());
    let rel_error = if denom == 0.0 { 0.0 } else { diff / denom };
    let ok = diff < tol.abs || rel_error < tol.rel;
    GradCheckEntry {
        param: param.into(),
        analytic,
        numeric,
        rel_error,
        status: if ok {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
    }
}

/// Forward step and agreement bound for the order derivative at `m = 0`,
/// where only a one-sided difference from above exists.
pub const ZERO_ORDER_STEP: f64 = 1e-8;
pub const ZERO_ORDER_TOL: f64 = 1e-4;

/// Compare [`loss_gradient`] with finite differences at `params`.
///
/// Centre-frequency entries also fail when the analytic value is nonzero,
/// since the loss cannot depend on them.
pub fn check_loss_gradient(
    params: &FbspParams,
    n_taps: usize,
    step: f64,
    tol: Tolerance,
) -> Result<Vec<GradCheckEntry>> {
    let analytic = loss_gradient(params, n_taps)?;
    let loss = |p: &FbspParams| loss_at(p, n_taps);
    let numeric = finite_difference_oracle_with(loss, params, FdSteps::adapted(params, step));
    let m_entry = if params.m == 0.0 {
        let mut up = params.clone();
        up.m = ZERO_ORDER_STEP;
        let fwd = (loss(&up) - loss(params)) / ZERO_ORDER_STEP;
        compare(
            "m",
            analytic.d_m,
            fwd,
            Tolerance {
                rel: tol.rel,
                abs: ZERO_ORDER_TOL,
            },
        )
    } else {
        compare("m", analytic.d_m, numeric.d_m, tol)
    };
    let mut out = vec![m_entry, compare("f_b", analytic.d_fb, numeric.d_fb, tol)];
    for (k, (a, n)) in analytic.d_fc.iter().zip(&numeric.d_fc).enumerate() {
        let mut e = compare(format!("f_c[{k}]"), *a, *n, tol);
        if *a != 0.0 {
            e.status = CheckStatus::Fail;
        }
        out.push(e);
    }
    Ok(out)
}

/// Seeded random draws with `m` in [0, 4], `f_b` in [0.25, 4] and a random
/// on-grid subset of centre frequencies. Each draw checks the loss gradient
/// and the kernel pull-back against a random cotangent. Draws inside a
/// singularity exclusion zone, or within [`FD_CLEARANCE`] of a sinc zero,
/// are redrawn.
pub fn random_draw_suite(
    seed: u64,
    draws: usize,
    n_taps: usize,
    step: f64,
    tol: Tolerance,
) -> Result<Vec<GradCheckEntry>> {
    use rand::Rng;
    let grid = crate::bank::dft_grid(n_taps);
    let mut r = crate::rng::rng(seed);
    let mut out = Vec::new();
    let mut accepted = 0;
    while accepted < draws {
        let m = r.random_range(0.0..4.0);
        let f_b = r.random_range(0.25..4.0);
        let mut f_c: Vec<f64> = grid
            .iter()
            .copied()
            .filter(|_| r.random_bool(0.5))
            .collect();
        if f_c.len() < 2 {
            f_c = grid[1..3].to_vec();
        }
        let params = FbspParams::new(m, f_b, f_c)?;
        if check_singularity(&params, n_taps).is_err()
            || zero_clearance(&params, n_taps) < FD_CLEARANCE
        {
            continue;
        }
        accepted += 1;
        for mut e in check_loss_gradient(&params, n_taps, step, tol)? {
            e.param = format!("draw{accepted}.loss.{}", e.param);
            out.push(e);
        }
        let cot = Array2::from_shape_fn((params.num_filters(), n_taps), |_| {
            Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
        });
        let g = kernel_jacobian_vector(&params, n_taps, &cot)?;
        let paired = |q: &FbspParams| -> f64 {
            crate::bank::fbsp_kernel(q, n_taps)
                .map(|b| {
                    b.weights()
                        .iter()
                        .zip(cot.iter())
                        .map(|(k, c)| (c * k).re)
                        .sum()
                })
                .unwrap_or(f64::NAN)
        };
        let fd = finite_difference_oracle_with(paired, &params, FdSteps::adapted(&params, step));
        out.push(compare(format!("draw{accepted}.jvp.m"), g.d_m, fd.d_m, tol));
        out.push(compare(
            format!("draw{accepted}.jvp.f_b"),
            g.d_fb,
            fd.d_fb,
            tol,
        ));
        for (k, (a, n)) in g.d_fc.iter().zip(&fd.d_fc).enumerate() {
            out.push(compare(format!("draw{accepted}.jvp.f_c[{k}]"), *a, *n, tol));
        }
    }
    Ok(out)
}

/// Loss of the bank built from `params`; NaN when the parameters are invalid.
pub fn loss_at(params: &FbspParams, n_taps: usize) -> f64 {
    match crate::bank::fbsp_kernel(params, n_taps) {
        Ok(bank) => fbsp_loss(&bank),
        Err(_) => f64::NAN,
    }
}
