//! Bessel `J1` and the derived kernels `G(v) = J1(v)/v` and `G'(v)/v`.
//!
//! Two regimes: the defining power series for small arguments and a
//! Hankel-type asymptotic expansion for large ones. `G` is an entire
//! function of `v^2`, so near zero both `G` and `G'(v)/v` are evaluated
//! as power series in `w = v^2` and the removable singularity never
//! appears.

/// Where the returned value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Series,
    Asymptotic,
}

/// A Bessel evaluation together with a truncation-error estimate.
#[derive(Debug, Clone, Copy)]
pub struct BesselEval {
    pub value: f64,
    pub regime: Regime,
    pub est_error: f64,
}

/// Series/asymptotic crossover for `j1` (and the internal `j0`).
const J_SWITCH: f64 = 12.0;
/// Crossover below which the `w = v^2` series forms are used.
const W_SWITCH: f64 = 0.5;

/// J1 by its power series: sum of (-1)^k / (k! (k+1)!) (v/2)^{2k+1}.
pub(crate) fn j1_series(v: f64) -> BesselEval {
    let half = v / 2.0;
    let w = half * half;
    let mut term = half; // k = 0
    let mut sum = term;
    let mut est = 0.0f64;
    for k in 1..200 {
        term *= -w / (k as f64 * (k as f64 + 1.0));
        sum += term;
        est = term.abs();
        if est <= 1e-16 * sum.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    BesselEval {
        value: sum,
        regime: Regime::Series,
        est_error: est,
    }
}

fn j0_series(v: f64) -> BesselEval {
    let w = v * v / 4.0;
    let mut term = 1.0;
    let mut sum = term;
    let mut est = 0.0f64;
    for k in 1..200 {
        term *= -w / ((k * k) as f64);
        sum += term;
        est = term.abs();
        if est <= 1e-16 * sum.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    BesselEval {
        value: sum,
        regime: Regime::Series,
        est_error: est,
    }
}

/// Hankel asymptotic expansion for J_nu, nu = 0 or 1, truncated at the
/// minimal term (with at least 5 terms kept in each of P and Q).
fn j_asymptotic(mu: f64, chi_shift: f64, v: f64) -> BesselEval {
    let x = v.abs();
    // c_k = prod_{j<=k} (mu - (2j-1)^2) / (k! (8x)^k)
    let mut c = [0.0f64; 24];
    c[0] = 1.0;
    for k in 1..24 {
        let odd = (2 * k - 1) as f64;
        c[k] = c[k - 1] * (mu - odd * odd) / (k as f64 * 8.0 * x);
    }
    // P = sum (-1)^m c_{2m}, Q = sum (-1)^m c_{2m+1}; stop each at its
    // minimal term.
    let mut p = 0.0;
    let mut q = 0.0;
    let mut last_p = f64::INFINITY;
    let mut last_q = f64::INFINITY;
    let mut est = 0.0f64;
    let mut sign = 1.0;
    for m in 0..12 {
        let tp = sign * c[2 * m];
        let tq = sign * c[2 * m + 1];
        if m >= 5 && tp.abs() > last_p {
            est = est.max(tp.abs());
        } else {
            p += tp;
            last_p = tp.abs();
        }
        if m >= 5 && tq.abs() > last_q {
            est = est.max(tq.abs());
        } else {
            q += tq;
            last_q = tq.abs();
        }
        sign = -sign;
    }
    est = est.max(last_p.min(last_q));
    let chi = x - chi_shift;
    let amp = (2.0 / (std::f64::consts::PI * x)).sqrt();
    BesselEval {
        value: amp * (p * chi.cos() - q * chi.sin()),
        regime: Regime::Asymptotic,
        est_error: amp * est,
    }
}

pub(crate) fn j1_asymptotic(v: f64) -> BesselEval {
    let e = j_asymptotic(4.0, 3.0 * std::f64::consts::FRAC_PI_4, v);
    BesselEval {
        value: e.value * v.signum(),
        ..e
    }
}

fn j0_asymptotic(v: f64) -> BesselEval {
    j_asymptotic(0.0, std::f64::consts::FRAC_PI_4, v)
}

/// Max relative disagreement between the power series and the Hankel
/// asymptotic for J1 over `[lo, hi]` (the regime overlap band), sampled at
/// `n + 1` points.
pub fn j1_overlap_max_rel_error(lo: f64, hi: f64, n: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..=n {
        let v = lo + (hi - lo) * i as f64 / n as f64;
        let a = j1_series(v).value;
        let b = j1_asymptotic(v).value;
        // relative to the envelope scale, not the (possibly zero) value
        let scale = (2.0 / (std::f64::consts::PI * v)).sqrt();
        worst = worst.max((a - b).abs() / scale);
    }
    worst
}

/// Bessel function of the first kind, order one. Odd in `v`.
pub fn j1(v: f64) -> BesselEval {
    if v.abs() <= J_SWITCH {
        j1_series(v)
    } else {
        j1_asymptotic(v)
    }
}

/// Order zero, internal (used by `gprime_over_v` and the recurrence test).
pub(crate) fn j0(v: f64) -> BesselEval {
    if v.abs() <= J_SWITCH {
        j0_series(v)
    } else {
        j0_asymptotic(v)
    }
}

/// Order two via the recurrence J2 = (2/v) J1 - J0; test support only.
#[cfg(test)]
pub(crate) fn j2(v: f64) -> f64 {
    (2.0 / v) * j1(v).value - j0(v).value
}

// Coefficients of G as a series in w = v^2:
//   G(v) = sum_k (-1)^k w^k / (k! (k+1)! 2^{2k+1})
fn g_w_coeff(k: usize) -> f64 {
    let mut c = 0.5;
    for j in 1..=k {
        c *= -1.0 / (j as f64 * (j as f64 + 1.0) * 4.0);
    }
    c
}

/// `G(v) = J1(v)/v`, entire in `v^2`, with `G(0) = 1/2`. Even in `v`.
pub fn g(v: f64) -> f64 {
    let v = v.abs();
    if v < W_SWITCH {
        let w = v * v;
        let mut term = 0.5;
        let mut sum = term;
        for k in 1..40 {
            term *= -w / (k as f64 * (k as f64 + 1.0) * 4.0);
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        j1(v).value / v
    }
}

/// `G'(v)/v`, uniformly bounded on the real line, value `-1/8` at zero.
///
/// Near zero this is `2 dG/dw` evaluated as a `w`-series; away from zero
/// it is the closed form `J0(v)/v^2 - 2 J1(v)/v^3`.
pub fn gprime_over_v(v: f64) -> f64 {
    let v = v.abs();
    if v < W_SWITCH {
        let w = v * v;
        // 2 * sum_{k>=1} k c_k w^{k-1}
        let mut sum = 0.0;
        let mut wpow = 1.0;
        for k in 1..40 {
            let t = 2.0 * k as f64 * g_w_coeff(k) * wpow;
            sum += t;
            wpow *= w;
            if t.abs() <= 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        sum
    } else {
        let v2 = v * v;
        (j0(v).value - 2.0 * g(v)) / v2
    }
}
