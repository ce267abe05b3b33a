//! The two-geodesic phase: the hyperbolic distance between points of the
//! axis geodesic and a circle geodesic, restricted to unit parameter
//! windows, together with its closed-form mixed derivative, the geometry
//! of that derivative's zero set, the region decomposition used by the
//! oscillatory estimates, and grid audits of the derivative bounds.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::halfspace::{acosh1p, CircleGeodesic, Tube};

/// Parameters of a geodesic pair: the canonical axis plus a circle
/// geodesic `(a, r, beta)`, and the unit window `I` for the circle's
/// arclength parameter. The derived quantities `d1 <= d2` satisfy
/// `d1^2 + d2^2 = 2(a^2 + r^2)` and `d1 d2 >= |a^2 - r^2|`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PhaseParams {
    pub a: f64,
    pub r: f64,
    pub beta: f64,
    pub d1: f64,
    pub d2: f64,
    pub s_interval: (f64, f64),
}

/// `cos(beta)` with the rounding residue at a right angle snapped to zero,
/// so the exactly-degenerate geometry (`B = 0`) is reproduced at beta = pi/2.
fn snapped_cos(beta: f64) -> f64 {
    let c = beta.cos();
    if c.abs() < 1e-15 {
        0.0
    } else {
        c
    }
}

impl PhaseParams {
    /// `s_offset` places the unit interval `I = [s_offset, s_offset + 1]`.
    pub fn new(a: f64, r: f64, beta: f64, s_offset: f64) -> Result<Self> {
        // borrow the circle geodesic's canonical-form validation
        let _ = CircleGeodesic::new(a, r, beta)?;
        if !s_offset.is_finite() {
            return Err(Error::Domain(format!("s_offset must be finite, got {s_offset}")));
        }
        let c = snapped_cos(beta);
        let d1 = (a * a + r * r - 2.0 * a * r * c).max(0.0).sqrt();
        let d2 = (a * a + r * r + 2.0 * a * r * c).sqrt();
        Ok(Self {
            a,
            r,
            beta,
            d1,
            d2,
            s_interval: (s_offset, s_offset + 1.0),
        })
    }

    pub fn circle(&self) -> CircleGeodesic {
        CircleGeodesic::new(self.a, self.r, self.beta).expect("validated at construction")
    }

    pub(crate) fn cos_beta(&self) -> f64 {
        snapped_cos(self.beta)
    }

    fn a_of(&self, t: f64, s: f64) -> f64 {
        let e2t = (2.0 * t).exp();
        let e2s = (2.0 * s).exp();
        e2s * e2t + e2t + self.d1 * self.d1 * e2s + self.d2 * self.d2
    }
}

/// Distance between `gamma1(t)` and `gamma2(s)`:
/// `arccosh(A / (4 r e^{s+t}))` with
/// `A = e^{2s+2t} + e^{2t} + d1^2 e^{2s} + d2^2`.
pub fn phi(t: f64, s: f64, p: &PhaseParams) -> f64 {
    let denom = 4.0 * p.r * (s + t).exp();
    acosh1p((p.a_of(t, s) - denom) / denom)
}

/// The bracket numerator of the mixed derivative:
/// `(a cos b - r)(e^{2s+2t} + d2^2) + (a cos b + r)(e^{2t} + d1^2 e^{2s})`.
pub(crate) fn bracket(t: f64, s: f64, p: &PhaseParams) -> f64 {
    let e2t = (2.0 * t).exp();
    let e2s = (2.0 * s).exp();
    let ac = p.a * p.cos_beta();
    (ac - p.r) * (e2s * e2t + p.d2 * p.d2) + (ac + p.r) * (e2t + p.d1 * p.d1 * e2s)
}

/// Closed form of the mixed derivative `d^2 phi / dt ds`.
pub fn phi_st(t: f64, s: f64, p: &PhaseParams) -> Result<f64> {
    let e2t = (2.0 * t).exp();
    let e2s = (2.0 * s).exp();
    let a = p.a_of(t, s);
    let e = a * a - 16.0 * p.r * p.r * e2s * e2t;
    if e <= 1e-14 * a * a {
        return Err(Error::Domain(format!(
            "coincident-point degeneracy at (t, s) = ({t}, {s}): A^2 - 16 r^2 e^{{2s+2t}} vanishes"
        )));
    }
    Ok(16.0 * p.r * e2s * e2t * bracket(t, s, p) / e.powf(1.5))
}

/// Mixed finite-difference value and a step-size warning flag.
#[derive(Debug, Clone, Copy)]
pub struct NumericDeriv {
    pub value: f64,
    pub step_warning: bool,
}

fn mixed_d4(f: &impl Fn(f64, f64) -> f64, t: f64, s: f64, h: f64) -> f64 {
    const OFF: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];
    const W: [f64; 4] = [1.0, -8.0, 8.0, -1.0];
    let mut acc = 0.0;
    for (oi, wi) in OFF.iter().zip(W) {
        for (oj, wj) in OFF.iter().zip(W) {
            acc += wi * wj * f(t + oi * h, s + oj * h);
        }
    }
    acc / (144.0 * h * h)
}

/// Fourth-order mixed central difference of `phi` with one Richardson level.
pub fn phi_st_numeric(t: f64, s: f64, p: &PhaseParams, h: f64) -> Result<NumericDeriv> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("step must be positive, got {h}")));
    }
    let scale = t.abs().max(s.abs()).max(1.0);
    let step_warning = h < 1e3 * f64::EPSILON * scale;
    let f = |tt: f64, ss: f64| phi(tt, ss, p);
    let coarse = mixed_d4(&f, t, s, h);
    let fine = mixed_d4(&f, t, s, h / 2.0);
    Ok(NumericDeriv {
        value: (16.0 * fine - coarse) / 15.0,
        step_warning,
    })
}

/// Default differentiation step for the mixed derivative.
///
/// With the 4th-order stencil plus one Richardson level the truncation
/// error is O(h^6); 5e-3 keeps it below 1e-9 while staying far above the
/// double-precision roundoff floor (which dominates below h ~ 1e-3).
pub fn default_fd_step(t: f64) -> f64 {
    (5e-3f64).max(t.abs() * 5e-3)
}

/// Geometry of the zero set `Z` of the mixed derivative:
/// the curve `(e^{2t} - X0)(e^{2s} - Y0) = B`, its vertices, and its four
/// asymptotes. `Z` is empty exactly when `r <= a cos beta`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ZeroSetGeometry {
    pub empty: bool,
    pub x0: f64,
    pub y0: f64,
    pub b: f64,
    pub t_plus: f64,
    pub t_minus: f64,
    pub s_plus: f64,
    pub s_minus: f64,
    /// positions of the asymptotes l1..l4: t = l1, t = l2, s = l3, s = l4
    pub asymptotes: [f64; 4],
}

pub fn zero_geometry(p: &PhaseParams) -> ZeroSetGeometry {
    let ac = p.a * p.cos_beta();
    if p.r <= ac {
        return ZeroSetGeometry {
            empty: true,
            x0: f64::NAN,
            y0: f64::NAN,
            b: f64::NAN,
            t_plus: f64::NAN,
            t_minus: f64::NAN,
            s_plus: f64::NAN,
            s_minus: f64::NAN,
            asymptotes: [f64::NAN; 4],
        };
    }
    let y0 = (p.r + ac) / (p.r - ac);
    let x0 = p.d1 * p.d1 * y0;
    let sb = p.beta.sin();
    let b = 4.0 * p.a.powi(3) * p.r * p.cos_beta() * sb * sb / ((p.r - ac) * (p.r - ac));
    let t_plus = 0.5 * (x0 + (b * x0 / y0).sqrt()).ln();
    let t_minus = 0.5 * (x0 - (b * x0 / y0).sqrt()).ln();
    let s_plus = 0.5 * (y0 + (b * y0 / x0).sqrt()).ln();
    let s_minus = 0.5 * (y0 - (b * y0 / x0).sqrt()).ln();
    ZeroSetGeometry {
        empty: false,
        x0,
        y0,
        b,
        t_plus,
        t_minus,
        s_plus,
        s_minus,
        asymptotes: [
            0.5 * x0.ln(),
            0.5 * (x0 - b / y0).ln(),
            0.5 * y0.ln(),
            0.5 * (y0 - b / x0).ln(),
        ],
    }
}

/// The two branches of `Z` solved for one variable:
/// `e^{2 t_c(s)} = X0 + B/(e^{2s} - Y0)` and its mirror.
#[derive(Debug, Clone, Copy)]
pub struct CriticalCurves {
    zg: ZeroSetGeometry,
}

pub fn critical_curves(p: &PhaseParams) -> Result<CriticalCurves> {
    let zg = zero_geometry(p);
    if zg.empty {
        return Err(Error::Domain("zero set is empty (r <= a cos beta)".into()));
    }
    Ok(CriticalCurves { zg })
}

impl CriticalCurves {
    /// Build directly from a (non-empty) zero-set geometry.
    pub fn from_geometry(zg: ZeroSetGeometry) -> Self {
        Self { zg }
    }

    pub fn geometry(&self) -> &ZeroSetGeometry {
        &self.zg
    }

    pub fn t_c(&self, s: f64) -> Result<f64> {
        let zg = &self.zg;
        if s >= zg.s_minus && s <= zg.s_plus {
            return Err(Error::Domain(format!(
                "s = {s} lies in the excluded vertex band [{}, {}]",
                zg.s_minus, zg.s_plus
            )));
        }
        Ok(0.5 * (zg.x0 + zg.b / ((2.0 * s).exp() - zg.y0)).ln())
    }

    pub fn s_c(&self, t: f64) -> Result<f64> {
        let zg = &self.zg;
        if t >= zg.t_minus && t <= zg.t_plus {
            return Err(Error::Domain(format!(
                "t = {t} lies in the excluded vertex band [{}, {}]",
                zg.t_minus, zg.t_plus
            )));
        }
        Ok(0.5 * (zg.y0 + zg.b / ((2.0 * t).exp() - zg.x0)).ln())
    }
}

/// Distance from `(t, s)` to the zero set `Z` (infinite when `Z` is empty).
///
/// First-order estimate `|F|/|grad F|` on `F = (e^{2t}-X0)(e^{2s}-Y0) - B`,
/// refined by five Gauss-Newton projection steps when the estimate is
/// within twice the scale of interest.
pub fn zero_set_distance(t: f64, s: f64, zg: &ZeroSetGeometry, eps: f64) -> f64 {
    if zg.empty {
        return f64::INFINITY;
    }
    if zg.b == 0.0 {
        // degenerate cross {t = t0} u {s = s0}
        return (t - zg.t_plus).abs().min((s - zg.s_plus).abs());
    }
    let f_val = |tt: f64, ss: f64| ((2.0 * tt).exp() - zg.x0) * ((2.0 * ss).exp() - zg.y0) - zg.b;
    let grad = |tt: f64, ss: f64| {
        (
            2.0 * (2.0 * tt).exp() * ((2.0 * ss).exp() - zg.y0),
            2.0 * (2.0 * ss).exp() * ((2.0 * tt).exp() - zg.x0),
        )
    };
    let (gx, gy) = grad(t, s);
    let gn = (gx * gx + gy * gy).sqrt();
    if gn == 0.0 {
        // the saddle center: fall back to vertex distances
        let dv = |vt: f64, vs: f64| ((t - vt).powi(2) + (s - vs).powi(2)).sqrt();
        return dv(zg.t_plus, zg.s_plus).min(dv(zg.t_minus, zg.s_minus));
    }
    let est = f_val(t, s).abs() / gn;
    if est > 2.0 * eps {
        return est;
    }
    let (mut ct, mut cs) = (t, s);
    for _ in 0..5 {
        let fv = f_val(ct, cs);
        let (gx, gy) = grad(ct, cs);
        let g2 = gx * gx + gy * gy;
        if g2 == 0.0 {
            break;
        }
        ct -= fv * gx / g2;
        cs -= fv * gy / g2;
    }
    ((t - ct).powi(2) + (s - cs).powi(2)).sqrt()
}

/// The four parts of the domain decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegionLabel {
    NonStationary,
    LeftFold,
    RightFold,
    YoungPart,
}

impl RegionLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionLabel::NonStationary => "non_stationary",
            RegionLabel::LeftFold => "left_fold",
            RegionLabel::RightFold => "right_fold",
            RegionLabel::YoungPart => "young",
        }
    }
}

pub fn classify_region_with(t: f64, s: f64, zg: &ZeroSetGeometry, eps: f64) -> RegionLabel {
    if zero_set_distance(t, s, zg, eps) > eps {
        return RegionLabel::NonStationary;
    }
    if s > zg.s_plus + eps || s < zg.s_minus - eps {
        RegionLabel::LeftFold
    } else if t > zg.t_plus + eps || t < zg.t_minus - eps {
        RegionLabel::RightFold
    } else {
        RegionLabel::YoungPart
    }
}

pub fn classify_region(t: f64, s: f64, p: &PhaseParams, eps: f64) -> Result<RegionLabel> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps must lie in (0, 1), got {eps}")));
    }
    Ok(classify_region_with(t, s, &zero_geometry(p), eps))
}

/// Range of the phase on the window plus the four admissibility bounds
/// implied by `2 <= phi <= T`.
#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub phi_min: f64,
    pub phi_max: f64,
    pub t_cap: f64,
    /// e^s window, a/r bound, d1 bound, r lower bound
    pub bounds_ok: [bool; 4],
    pub admissible: bool,
    pub violations: Vec<String>,
}

fn refine_extremum(
    f: &impl Fn(f64, f64) -> f64,
    mut best: (f64, f64, f64),
    rect: ((f64, f64), (f64, f64)),
    sign: f64,
    mut cell: (f64, f64),
) -> f64 {
    // successive 5x5 local grids shrinking around the current extremum
    for _ in 0..12 {
        for i in -2..=2 {
            for j in -2..=2 {
                let t = (best.0 + i as f64 * cell.0 / 2.0).clamp(rect.0 .0, rect.0 .1);
                let s = (best.1 + j as f64 * cell.1 / 2.0).clamp(rect.1 .0, rect.1 .1);
                let v = f(t, s);
                if sign * v < sign * best.2 {
                    best = (t, s, v);
                }
            }
        }
        cell = (cell.0 / 2.0, cell.1 / 2.0);
    }
    best.2
}

pub fn admissibility(p: &PhaseParams, t_cap: f64) -> AdmissibilityReport {
    let (s_lo, s_hi) = p.s_interval;
    let n = 256usize;
    let f = |t: f64, s: f64| phi(t, s, p);
    let mut min = (0.0, s_lo, f64::INFINITY);
    let mut max = (0.0, s_lo, f64::NEG_INFINITY);
    for i in 0..=n {
        let t = i as f64 / n as f64;
        for j in 0..=n {
            let s = s_lo + (s_hi - s_lo) * j as f64 / n as f64;
            let v = f(t, s);
            if v < min.2 {
                min = (t, s, v);
            }
            if v > max.2 {
                max = (t, s, v);
            }
        }
    }
    let rect = ((0.0, 1.0), (s_lo, s_hi));
    let cell = (1.0 / n as f64, (s_hi - s_lo) / n as f64);
    let phi_min = refine_extremum(&f, min, rect, 1.0, cell);
    let phi_max = refine_extremum(&f, max, rect, -1.0, cell);

    let ch = t_cap.cosh();
    let e = std::f64::consts::E;
    let bounds_ok = [
        s_lo.exp() >= p.r / (4.0 * ch) && s_hi.exp() <= 4.0 * p.r * ch,
        p.a / p.r <= 2.0 * e * ch,
        p.d1 <= 2.0 * e * ch,
        p.r >= 1.0 / (2.0 * ch),
    ];
    let mut violations = Vec::new();
    if phi_min < 2.0 {
        violations.push(format!("phi_min = {phi_min:.6} < 2"));
    }
    if phi_max > t_cap {
        violations.push(format!("phi_max = {phi_max:.6} > T = {t_cap}"));
    }
    let names = [
        "e^s window r/(4 cosh T) <= e^s <= 4 r cosh T",
        "a/r <= 2e cosh T",
        "d1 <= 2e cosh T",
        "r >= 1/(2 cosh T)",
    ];
    for (ok, name) in bounds_ok.iter().zip(names) {
        if !ok {
            violations.push((*name).into());
        }
    }
    AdmissibilityReport {
        phi_min,
        phi_max,
        t_cap,
        bounds_ok,
        admissible: violations.is_empty(),
        violations,
    }
}

fn check_preconditions(p: &PhaseParams, t_cap: f64, tube_r: f64) -> Result<AdmissibilityReport> {
    let report = admissibility(p, t_cap);
    if !report.admissible {
        return Err(Error::Precondition(format!(
            "inadmissible parameters: {}",
            report.violations.join("; ")
        )));
    }
    // geometric stand-in for the tube-avoidance hypothesis: the circle's
    // tube window in e^{2s} must not cover [r^2/(16 cosh^2 T), 16 r^2 cosh^2 T]
    let tube = Tube::new(tube_r)?;
    if let Some((lo, hi)) = tube.interval(&p.circle()) {
        let ch = t_cap.cosh();
        let w_lo = p.r * p.r / (16.0 * ch * ch);
        let w_hi = 16.0 * p.r * p.r * ch * ch;
        if lo <= w_lo && hi >= w_hi {
            return Err(Error::Precondition(
                "circle geodesic stays inside the tube across the reachable parameter window".into(),
            ));
        }
    }
    Ok(report)
}

/// Grid minima of the mixed derivative (and its fold ratios) per region,
/// with implied constants relative to `eps^2 e^{-C T}` / `eps e^{-C T}`.
#[derive(Debug, Clone, Serialize)]
pub struct ClearanceAudit {
    pub eps: f64,
    pub t_cap: f64,
    pub grid_n: usize,
    pub min_nonstationary: f64,
    pub min_left_fold: Option<f64>,
    pub min_right_fold: Option<f64>,
    pub c_nonstationary: f64,
    pub c_left_fold: Option<f64>,
    pub c_right_fold: Option<f64>,
    pub counts: [usize; 4],
}

pub fn clearance_audit(
    p: &PhaseParams,
    t_cap: f64,
    eps: f64,
    tube_r: f64,
    grid_n: usize,
) -> Result<ClearanceAudit> {
    check_preconditions(p, t_cap, tube_r)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps must lie in (0, 1), got {eps}")));
    }
    let zg = zero_geometry(p);
    let curves = if zg.empty { None } else { Some(CriticalCurves { zg }) };
    let (s_lo, s_hi) = p.s_interval;
    let mut min_ns = f64::INFINITY;
    let mut min_left = f64::INFINITY;
    let mut min_right = f64::INFINITY;
    let mut counts = [0usize; 4];
    for i in 0..=grid_n {
        let t = i as f64 / grid_n as f64;
        for j in 0..=grid_n {
            let s = s_lo + (s_hi - s_lo) * j as f64 / grid_n as f64;
            let d = phi_st(t, s, p)?;
            let label = classify_region_with(t, s, &zg, eps);
            match label {
                RegionLabel::NonStationary => {
                    counts[0] += 1;
                    min_ns = min_ns.min(d.abs());
                }
                RegionLabel::LeftFold => {
                    counts[1] += 1;
                    let tc = curves.as_ref().expect("fold label implies nonempty Z").t_c(s)?;
                    min_left = min_left.min(fold_ratio(d, t, tc, |x| phi_st(x, s, p)));
                }
                RegionLabel::RightFold => {
                    counts[2] += 1;
                    let sc = curves.as_ref().expect("fold label implies nonempty Z").s_c(t)?;
                    min_right = min_right.min(fold_ratio(d, s, sc, |x| phi_st(t, x, p)));
                }
                RegionLabel::YoungPart => counts[3] += 1,
            }
        }
    }
    let c_of = |m: f64, pow: f64| -((m / eps.powf(pow)).ln()) / t_cap;
    Ok(ClearanceAudit {
        eps,
        t_cap,
        grid_n,
        min_nonstationary: min_ns,
        min_left_fold: (counts[1] > 0).then_some(min_left),
        min_right_fold: (counts[2] > 0).then_some(min_right),
        c_nonstationary: c_of(min_ns, 2.0),
        c_left_fold: (counts[1] > 0).then(|| c_of(min_left, 1.0)),
        c_right_fold: (counts[2] > 0).then(|| c_of(min_right, 1.0)),
        counts,
    })
}

/// |phi_st| / |x - x_c| with a slope fallback on the curve itself.
fn fold_ratio(d: f64, x: f64, xc: f64, f: impl Fn(f64) -> Result<f64>) -> f64 {
    let dx = x - xc;
    if dx.abs() > 1e-9 {
        (d / dx).abs()
    } else {
        let h = 1e-5;
        match (f(xc + h), f(xc - h)) {
            (Ok(fp), Ok(fm)) => ((fp - fm) / (2.0 * h)).abs(),
            _ => f64::INFINITY,
        }
    }
}

/// Sup norms of the mixed partials `D^(i,j) phi`, `i, j >= 1`, with the
/// implied exponential-growth constants. Pure derivatives are skipped.
#[derive(Debug, Clone, Serialize)]
pub struct DerivativeEntry {
    pub order_t: usize,
    pub order_s: usize,
    pub sup: f64,
    pub c_alpha: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeAudit {
    pub t_cap: f64,
    pub grid_n: usize,
    pub entries: Vec<DerivativeEntry>,
}

fn nested_d(f: &impl Fn(f64, f64) -> f64, t: f64, s: f64, i: usize, j: usize, h: f64) -> f64 {
    const OFF: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];
    const W: [f64; 4] = [1.0, -8.0, 8.0, -1.0];
    if i > 0 {
        let mut acc = 0.0;
        for (o, w) in OFF.iter().zip(W) {
            acc += w * nested_d(f, t + o * h, s, i - 1, j, h);
        }
        acc / (12.0 * h)
    } else if j > 0 {
        let mut acc = 0.0;
        for (o, w) in OFF.iter().zip(W) {
            acc += w * nested_d(f, t, s + o * h, i, j - 1, h);
        }
        acc / (12.0 * h)
    } else {
        f(t, s)
    }
}

pub fn derivative_audit(
    p: &PhaseParams,
    t_cap: f64,
    max_order: usize,
    grid_n: usize,
    tube_r: f64,
) -> Result<DerivativeAudit> {
    check_preconditions(p, t_cap, tube_r)?;
    if max_order > 4 {
        return Err(Error::Domain(format!("max_order must be <= 4, got {max_order}")));
    }
    let (s_lo, s_hi) = p.s_interval;
    let f = |t: f64, s: f64| phi(t, s, p);
    let mut entries = Vec::new();
    for i in 1..max_order {
        for j in 1..max_order {
            if i + j > max_order {
                continue;
            }
            let mut sup = 0.0f64;
            for gi in 0..=grid_n {
                let t = gi as f64 / grid_n as f64;
                for gj in 0..=grid_n {
                    let s = s_lo + (s_hi - s_lo) * gj as f64 / grid_n as f64;
                    let v = if (i, j) == (1, 1) {
                        phi_st_numeric(t, s, p, default_fd_step(t))?.value
                    } else {
                        // step balancing truncation vs roundoff at order i+j
                        let h = 1e-16f64.powf(1.0 / (i + j + 4) as f64);
                        nested_d(&f, t, s, i, j, h)
                    };
                    sup = sup.max(v.abs());
                }
            }
            entries.push(DerivativeEntry {
                order_t: i,
                order_s: j,
                sup,
                c_alpha: sup.ln() / t_cap,
            });
        }
    }
    Ok(DerivativeAudit {
        t_cap,
        grid_n,
        entries,
    })
}

/// Roots of the restriction of the bracket numerator to `s - t = delta`:
/// `e^{2 tau_pm} = (X0 + Y0 e^{-2 delta} +- sqrt((X0 - Y0 e^{-2 delta})^2 + 4 B e^{-2 delta})) / 2`.
pub fn diagonal_roots(zg: &ZeroSetGeometry, delta: f64) -> (f64, f64) {
    let q = (-2.0 * delta).exp();
    let disc = ((zg.x0 - zg.y0 * q).powi(2) + 4.0 * zg.b * q).sqrt();
    (
        0.5 * (0.5 * (zg.x0 + zg.y0 * q - disc)).ln(),
        0.5 * (0.5 * (zg.x0 + zg.y0 * q + disc)).ln(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::halfspace::{distance3, gamma1, gamma2};

    const PI_2: f64 = std::f64::consts::FRAC_PI_2;
    const PI_3: f64 = std::f64::consts::FRAC_PI_3;

    fn splitmix(state: &mut u64) -> f64 {
        *state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64
    }

    #[test]
    fn derived_quantities_identities() {
        let mut st = 7u64;
        for _ in 0..1000 {
            let a = splitmix(&mut st) * 4.0;
            let r = 0.05 + splitmix(&mut st) * 4.0;
            let beta = 0.05 + splitmix(&mut st) * (PI_2 - 0.05);
            let p = PhaseParams::new(a, r, beta, 0.0).unwrap();
            assert!(p.d1 <= p.d2 + 1e-15);
            let lhs = p.d1 * p.d1 + p.d2 * p.d2;
            let rhs = 2.0 * (a * a + r * r);
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
            assert!(p.d1 * p.d2 >= (a * a - r * r).abs() - 1e-10 * rhs.max(1.0));
        }
    }

    #[test]
    fn phi_axis_case() {
        // r = e^2: gamma2(0) = (0, 0, e^2), distance to (0,0,1) is 2
        let p = PhaseParams::new(0.0, (2.0f64).exp(), PI_2, 0.0).unwrap();
        assert!((phi(0.0, 0.0, &p) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn phi_matches_distance_composition() {
        let mut st = 11u64;
        let mut worst = 0.0f64;
        for _ in 0..10_000 {
            let a = splitmix(&mut st) * 3.0;
            let r = 0.1 + splitmix(&mut st) * 3.0;
            let beta = 0.1 + splitmix(&mut st) * (PI_2 - 0.1);
            let t = splitmix(&mut st) * 2.0 - 0.5;
            let s = splitmix(&mut st) * 2.0 - 0.5;
            let p = PhaseParams::new(a, r, beta, 0.0).unwrap();
            let g = p.circle();
            let direct = distance3(gamma1(t), gamma2(s, &g));
            let v = phi(t, s, &p);
            worst = worst.max((v - direct).abs());
        }
        assert!(worst < 1e-10, "worst deviation {worst:.3e}");
    }

    #[test]
    fn phi_cosh_identity() {
        let p = PhaseParams::new(1.3, 0.7, 1.1, 0.0).unwrap();
        for &(t, s) in &[(0.2f64, 0.8f64), (0.9, 0.1), (0.5, 0.5)] {
            let lhs = (s + t).exp() * phi(t, s, &p).cosh();
            let rhs = p.a_of(t, s) / (4.0 * p.r);
            assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        }
    }

    #[test]
    fn phi_st_vanishes_on_right_angle_lines() {
        let (a, r) = (1.55, 0.38);
        let p = PhaseParams::new(a, r, PI_2, -0.5).unwrap();
        let t0 = 0.5 * (a * a + r * r).ln();
        for k in 0..20 {
            let x = -0.4 + 0.04 * k as f64;
            let scale = phi_st(t0 + 0.3, x, &p).unwrap().abs().max(1e-3);
            assert!(phi_st(t0, x, &p).unwrap().abs() <= 1e-9 * scale);
            assert!(phi_st(x + 0.5, 0.0, &p).unwrap().abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn phi_st_matches_finite_differences() {
        let mut st = 23u64;
        let mut checked = 0;
        while checked < 2000 {
            let a = splitmix(&mut st) * 3.0;
            let r = 0.2 + splitmix(&mut st) * 2.0;
            let beta = 0.2 + splitmix(&mut st) * (PI_2 - 0.2);
            let t = splitmix(&mut st);
            let s = splitmix(&mut st);
            let p = PhaseParams::new(a, r, beta, 0.0).unwrap();
            if phi(t, s, &p) < 1.0 {
                continue;
            }
            let zg = zero_geometry(&p);
            if zero_set_distance(t, s, &zg, 0.01) < 0.01 {
                continue;
            }
            let exact = phi_st(t, s, &p).unwrap();
            let numeric = phi_st_numeric(t, s, &p, default_fd_step(t)).unwrap().value;
            assert!(
                ((exact - numeric) / exact).abs() < 1e-7,
                "a={a} r={r} beta={beta} t={t} s={s}: {exact} vs {numeric}"
            );
            checked += 1;
        }
    }

    #[test]
    fn fd_order_of_accuracy() {
        let p = PhaseParams::new(1.55, 0.38, PI_2, -0.5).unwrap();
        let (t, s) = (0.83, 0.31);
        let exact = phi_st(t, s, &p).unwrap();
        let err = |h: f64| (mixed_d4(&|tt, ss| phi(tt, ss, &p), t, s, h) - exact).abs();
        let ratio = err(2e-2) / err(1e-2);
        assert!(ratio > 10.0 && ratio < 24.0, "ratio {ratio}");
    }

    #[test]
    fn zero_geometry_identities() {
        let mut st = 31u64;
        let mut seen = 0;
        while seen < 10_000 {
            let a = splitmix(&mut st) * 3.0;
            let r = 0.05 + splitmix(&mut st) * 3.0;
            let beta = 0.05 + splitmix(&mut st) * (PI_2 - 0.05);
            let p = PhaseParams::new(a, r, beta, 0.0).unwrap();
            let zg = zero_geometry(&p);
            if zg.empty {
                assert!(r <= a * beta.cos());
                continue;
            }
            let resid = zg.x0 * zg.y0 - zg.b - p.d2 * p.d2;
            assert!(resid.abs() <= 1e-12 * (zg.x0 * zg.y0).max(1.0));
            if zg.b > 0.0 {
                let v1 = zg.t_plus - zg.s_plus;
                let v2 = zg.t_minus - zg.s_minus;
                let ld1 = p.d1.ln();
                // the minus-branch logs cancel when sqrt(B/(X0 Y0)) -> 1
                let g = (zg.b / (zg.x0 * zg.y0)).sqrt();
                let tol = 1e-12 * (1.0 + 1.0 / (1.0 - g)) * ld1.abs().max(1.0);
                assert!((v1 - v2).abs() <= tol, "{} vs {} (g = {g})", v1, v2);
                assert!((v1 - ld1).abs() <= 1e-12 * ld1.abs().max(1.0));
            }
            seen += 1;
        }
    }

    #[test]
    fn zero_geometry_right_angle_degeneration() {
        let p = PhaseParams::new(1.2, 0.9, PI_2, 0.0).unwrap();
        let zg = zero_geometry(&p);
        assert!(!zg.empty);
        assert_eq!(zg.b, 0.0);
        assert!((zg.y0 - 1.0).abs() < 1e-15);
        assert!(((2.0 * zg.t_plus).exp() - (1.2f64 * 1.2 + 0.81)).abs() < 1e-12);
        assert!(zg.s_plus.abs() < 1e-15);
    }

    #[test]
    fn critical_curves_residuals() {
        let p = PhaseParams::new(1.0, 0.9, PI_3, 0.0).unwrap();
        let curves = critical_curves(&p).unwrap();
        let zg = *curves.geometry();
        for k in 1..=1000 {
            let s = zg.s_plus + 0.002 * k as f64;
            let tc = curves.t_c(s).unwrap();
            let v = phi_st(tc, s, &p).unwrap();
            let scale = phi_st(tc + 0.1, s, &p).unwrap().abs();
            assert!(v.abs() <= 1e-9 * scale.max(1e-12), "s={s}");
            // membership identity at the returned point
            let memb = ((2.0 * tc).exp() - zg.x0) * ((2.0 * s).exp() - zg.y0) - zg.b;
            assert!(memb.abs() <= 1e-10 * zg.b.max(1.0));
        }
        for k in 1..=1000 {
            let t = zg.t_minus - 0.002 * k as f64;
            let sc = curves.s_c(t).unwrap();
            let v = phi_st(t, sc, &p).unwrap();
            let scale = phi_st(t, sc + 0.1, &p).unwrap().abs();
            assert!(v.abs() <= 1e-9 * scale.max(1e-12), "t={t}");
        }
        assert!(curves.t_c(0.5 * (zg.s_plus + zg.s_minus)).is_err());
    }

    #[test]
    fn critical_curve_constant_cases() {
        // beta = pi/2: t_c is constant t0
        let p = PhaseParams::new(1.2, 0.9, PI_2, 0.0).unwrap();
        let curves = critical_curves(&p).unwrap();
        let t0 = 0.5 * (1.2f64 * 1.2 + 0.81).ln();
        for &s in &[0.5, 1.0, -2.0] {
            assert!((curves.t_c(s).unwrap() - t0).abs() < 1e-14);
        }
        // B = 0 generally: s_c is constant ln(sqrt(Y0))
        let zg = zero_geometry(&p);
        for &t in &[t0 + 0.5, t0 - 0.7] {
            assert!((curves.s_c(t).unwrap() - 0.5 * zg.y0.ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn classify_region_cases() {
        // empty zero set: everything non-stationary
        let p_empty = PhaseParams::new(2.0, 0.5, PI_3, 0.0).unwrap();
        assert!(zero_geometry(&p_empty).empty);
        for &(t, s) in &[(0.0, 0.0), (0.5, 0.9), (1.0, 0.2)] {
            assert_eq!(
                classify_region(t, s, &p_empty, 0.05).unwrap(),
                RegionLabel::NonStationary
            );
        }
        // on the curve with s beyond the vertex: left fold
        let p = PhaseParams::new(1.0, 0.9, PI_3, 0.0).unwrap();
        let curves = critical_curves(&p).unwrap();
        let zg = *curves.geometry();
        let s = zg.s_plus + 0.2;
        let tc = curves.t_c(s).unwrap();
        assert_eq!(classify_region(tc, s, &p, 0.05).unwrap(), RegionLabel::LeftFold);
        let t = zg.t_plus + 0.2;
        let sc = curves.s_c(t).unwrap();
        assert_eq!(classify_region(t, sc, &p, 0.05).unwrap(), RegionLabel::RightFold);
        // right-angle vertex: Young part
        let pv = PhaseParams::new(1.55, 0.38, PI_2, -0.5).unwrap();
        let zgv = zero_geometry(&pv);
        assert_eq!(
            classify_region_with(zgv.t_plus, zgv.s_plus, &zgv, 0.05),
            RegionLabel::YoungPart
        );
    }

    #[test]
    fn sign_change_across_zero_set() {
        let p = PhaseParams::new(1.0, 0.9, PI_3, 0.0).unwrap();
        let curves = critical_curves(&p).unwrap();
        let zg = *curves.geometry();
        for k in 1..=20 {
            let s = zg.s_plus + 0.1 * k as f64;
            let tc = curves.t_c(s).unwrap();
            let below = phi_st(tc - 0.05, s, &p).unwrap();
            let above = phi_st(tc + 0.05, s, &p).unwrap();
            assert!(below * above < 0.0, "no sign change at s={s}");
        }
    }

    #[test]
    fn restriction_trick_factorization() {
        let mut st = 41u64;
        let mut seen = 0;
        while seen < 500 {
            let a = splitmix(&mut st) * 2.0;
            let r = 0.1 + splitmix(&mut st) * 2.0;
            let beta = 0.1 + splitmix(&mut st) * (PI_2 - 0.1);
            let p = PhaseParams::new(a, r, beta, 0.0).unwrap();
            let zg = zero_geometry(&p);
            if zg.empty {
                continue;
            }
            let delta = splitmix(&mut st) * 2.0 - 1.0;
            let t = splitmix(&mut st) * 2.0 - 0.5;
            let (tau_m, tau_p) = diagonal_roots(&zg, delta);
            let e2t = (2.0 * t).exp();
            let lhs = bracket(t, t + delta, &p);
            let rhs = (a * beta.cos() - r)
                * (e2t - (2.0 * tau_m).exp())
                * (e2t - (2.0 * tau_p).exp())
                * (2.0 * delta).exp();
            assert!(
                (lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1e-300),
                "a={a} r={r} beta={beta} delta={delta} t={t}: {lhs} vs {rhs}"
            );
            seen += 1;
        }
    }

    #[test]
    fn eps0_threshold_equivalence() {
        let p = PhaseParams::new(1.0, 0.9, PI_3, 0.0).unwrap();
        let zg = zero_geometry(&p);
        let eps = 0.05;
        let eps0 = 0.5 * (1.0 + (zg.b / (zg.x0 * zg.y0)).sqrt()).ln() + eps;
        for k in -40..=40 {
            let s = zg.s_plus + k as f64 * 0.01;
            if (s - (zg.s_plus + eps)).abs() < 1e-9 {
                continue; // exact threshold is rounding-sensitive
            }
            let lhs = s > zg.s_plus + eps;
            let rhs = (2.0 * s).exp() > zg.y0 * (2.0 * eps0).exp();
            assert_eq!(lhs, rhs, "s = {s}");
        }
    }

    #[test]
    fn admissibility_pinned_scenario() {
        let p = PhaseParams::new(1.55, 0.38, PI_2, -0.5).unwrap();
        let rep = admissibility(&p, 8.0);
        assert!(rep.admissible, "violations: {:?}", rep.violations);
        assert!(rep.phi_min >= 2.0 && rep.phi_max <= 8.0);
        // grid minimum vs refined minimum
        let coarse = {
            let mut m = f64::INFINITY;
            for i in 0..=64 {
                for j in 0..=64 {
                    let t = i as f64 / 64.0;
                    let s = -0.5 + j as f64 / 64.0;
                    m = m.min(phi(t, s, &p));
                }
            }
            m
        };
        assert!((coarse - rep.phi_min).abs() < 1e-3);
        assert!(rep.phi_min <= coarse + 1e-12);
    }

    #[test]
    fn admissibility_flags_out_of_range() {
        let p = PhaseParams::new(1.0, 0.9, PI_3, 0.0).unwrap();
        let rep = admissibility(&p, 8.0);
        assert!(!rep.admissible);
        assert!(rep.violations.iter().any(|v| v.contains("phi_min")));
    }

    #[test]
    fn clearance_audit_no_zero_set() {
        let p = PhaseParams::new(1.55, 0.3, PI_3, 0.0).unwrap();
        assert!(zero_geometry(&p).empty);
        let audit = clearance_audit(&p, 8.0, 0.05, 1.0, 64).unwrap();
        assert!(audit.min_nonstationary > 0.0);
        assert!(audit.min_left_fold.is_none());
        assert!(audit.min_right_fold.is_none());
        assert_eq!(audit.counts[1] + audit.counts[2] + audit.counts[3], 0);
    }

    #[test]
    fn clearance_audit_precondition_error() {
        let p = PhaseParams::new(1.0, 0.9, PI_3, 0.0).unwrap();
        let err = clearance_audit(&p, 8.0, 0.05, 1.0, 32).unwrap_err();
        assert!(err.to_string().contains("phi_min"));
    }

    #[test]
    fn derivative_audit_mixed_only() {
        let p = PhaseParams::new(1.55, 0.38, PI_2, -0.5).unwrap();
        let audit = derivative_audit(&p, 8.0, 4, 24, 1.0).unwrap();
        // pure derivatives skipped: every entry has both orders >= 1
        assert!(audit.entries.iter().all(|e| e.order_t >= 1 && e.order_s >= 1));
        assert_eq!(audit.entries.len(), 6); // (1,1),(1,2),(2,1),(1,3),(2,2),(3,1)
        assert!(audit.entries.iter().all(|e| e.c_alpha.is_finite()));
    }
}
