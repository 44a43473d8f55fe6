//! Squared Bessel processes with exact transitions, Brownian local-time
//! profiles via the Ray-Knight theorems, and the local-time functionals
//! built on them. Also the Jacobi diffusion and its scale function.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{finite, positive};
use crate::quad::adaptive_simpson;
use crate::{Error, Result};

/// Largest Poisson mean the rejection sampler accepts.
const POISSON_MAX: f64 = 1.0e15;

/// One exact transition of BESQ(`delta`) over time `dt` from `value`.
///
/// The law is a Poisson(`value / (2 dt)`) mixture of
/// Gamma(`delta/2 + N`, scale `2 dt`); for `delta = 0` the `N = 0` atom is
/// the absorbed state 0.
pub fn besq_step<R: Rng + ?Sized>(delta: f64, value: f64, dt: f64, rng: &mut R) -> Result<f64> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::param("delta", format!("must be finite and >= 0, got {delta}")));
    }
    if !(value >= 0.0 && value.is_finite()) {
        return Err(Error::param("value", format!("must be finite and >= 0, got {value}")));
    }
    positive("dt", dt)?;
    Ok(besq_transition(delta, value, dt, rng))
}

#[inline]
pub(crate) fn besq_transition<R: Rng + ?Sized>(delta: f64, value: f64, dt: f64, rng: &mut R) -> f64 {
    let mean = value / (2.0 * dt);
    let n = if mean <= 0.0 {
        0.0
    } else if mean < POISSON_MAX {
        Poisson::new(mean).expect("valid Poisson mean").sample(rng)
    } else {
        let z: f64 = rng.sample(StandardNormal);
        (mean + mean.sqrt() * z).round().max(0.0)
    };
    let shape = 0.5 * delta + n;
    if shape <= 0.0 {
        return 0.0;
    }
    Gamma::new(shape, 2.0 * dt).expect("valid Gamma parameters").sample(rng)
}

/// A BESQ path observed at increasing times.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BesqPath {
    pub dimension: f64,
    pub start: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// First grid time at which the path sits at 0, for `dimension < 2`.
    pub absorbed_at: Option<f64>,
}

/// Samples BESQ(`delta`) from `start` at the times in `grid` (`grid[0]` is
/// the start time).
pub fn besq_path<R: Rng + ?Sized>(delta: f64, start: f64, grid: &[f64], rng: &mut R) -> Result<BesqPath> {
    if grid.is_empty() {
        return Err(Error::param("grid", "must be non-empty"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("grid", "must be strictly increasing"));
    }
    besq_step(delta, start, 1.0, rng).map(|_| ())?;
    let mut values = Vec::with_capacity(grid.len());
    values.push(start);
    let mut absorbed_at = (start == 0.0 && delta < 2.0).then_some(grid[0]);
    let mut z = start;
    for w in grid.windows(2) {
        z = if z == 0.0 && delta == 0.0 {
            0.0
        } else {
            besq_transition(delta, z, w[1] - w[0], rng)
        };
        if z == 0.0 && absorbed_at.is_none() && delta < 2.0 {
            absorbed_at = Some(w[1]);
        }
        values.push(z);
    }
    Ok(BesqPath {
        dimension: delta,
        start,
        grid: grid.to_vec(),
        values,
        absorbed_at,
    })
}

/// Spatial mesh for local-time profiles: geometric near 0, uniform in the
/// bulk, and growing proportionally far out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bulk: f64,
    /// Relative cell size near 0 (0.05 gives a ratio of 1.05 between cells).
    pub refine: Option<f64>,
    pub min_cell: f64,
    /// Relative cell size far from 0.
    pub growth: f64,
    /// Points that must be grid nodes.
    pub breakpoints: Vec<f64>,
}

impl GridSpec {
    pub fn uniform(step: f64) -> Self {
        GridSpec {
            bulk: step,
            refine: None,
            min_cell: step,
            growth: 0.0,
            breakpoints: Vec::new(),
        }
    }

    /// Mesh for a profile started at `level`: geometric cells from
    /// `1e-8 level` with ratio 1.05, bulk `step`, far-field growth 1%.
    pub fn refined(step: f64, level: f64) -> Self {
        GridSpec {
            bulk: step,
            refine: Some(0.05),
            min_cell: (1e-8 * level).min(step),
            growth: 0.01,
            breakpoints: Vec::new(),
        }
    }

    pub fn with_breakpoint(mut self, x: f64) -> Self {
        self.breakpoints.push(x);
        self.breakpoints.sort_by(f64::total_cmp);
        self
    }

    fn validate(&self) -> Result<()> {
        positive("bulk", self.bulk)?;
        positive("min_cell", self.min_cell)?;
        finite("growth", self.growth)?;
        if let Some(q) = self.refine {
            positive("refine", q)?;
        }
        Ok(())
    }

    /// Node following `x >= 0`.
    pub fn next(&self, x: f64) -> f64 {
        let mut cell = self.bulk;
        if let Some(q) = self.refine {
            cell = cell.min(q * x);
        }
        cell = cell.max(self.growth * x).max(self.min_cell);
        let mut nx = x + cell;
        for &b in &self.breakpoints {
            if b > x && b < nx {
                nx = b;
                break;
            }
        }
        nx
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileKind {
    /// Local times at the first hitting time of `level`.
    Rn1,
    /// Local times at the inverse local time at 0 of `level`.
    Rn2,
}

/// Brownian local times sampled on an increasing spatial grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalTimeProfile {
    pub kind: ProfileKind,
    pub level: f64,
    pub grid: Vec<f64>,
    pub ell: Vec<f64>,
    /// Coordinate at which the BESQ(0) leg reached 0.
    pub absorbed_at: Option<f64>,
    pub truncated: bool,
}

impl LocalTimeProfile {
    /// Largest local time on the grid.
    pub fn sup(&self) -> f64 {
        self.ell.iter().copied().fold(0.0, f64::max)
    }
}

/// Walks BESQ(0) from `start` along `spec` until absorption or `max_extent`.
fn besq0_leg<R: Rng + ?Sized>(start: f64, spec: &GridSpec, max_extent: f64, rng: &mut R) -> (Vec<f64>, Vec<f64>, bool) {
    let mut xs = vec![0.0];
    let mut ls = vec![start];
    let mut x = 0.0;
    let mut z = start;
    while z > 0.0 {
        if x >= max_extent {
            return (xs, ls, false);
        }
        let nx = spec.next(x);
        z = besq_transition(0.0, z, nx - x, rng);
        x = nx;
        xs.push(x);
        ls.push(z);
    }
    (xs, ls, true)
}

/// Local-time profile `x -> L(tau(a), x)`, `x >= 0`, of a Brownian motion
/// at the inverse local time at 0 of level `a` (a BESQ(0) from `a`).
pub fn rn2_profile<R: Rng + ?Sized>(a: f64, space_step: f64, rng: &mut R) -> Result<LocalTimeProfile> {
    rn2_profile_on(a, &GridSpec::refined(space_step, a), rng)
}

pub fn rn2_profile_on<R: Rng + ?Sized>(a: f64, spec: &GridSpec, rng: &mut R) -> Result<LocalTimeProfile> {
    positive("a", a)?;
    spec.validate()?;
    let (grid, ell, _) = besq0_leg(a, spec, f64::INFINITY, rng);
    let absorbed_at = grid.last().copied();
    Ok(LocalTimeProfile {
        kind: ProfileKind::Rn2,
        level: a,
        grid,
        ell,
        absorbed_at,
        truncated: false,
    })
}

/// Local-time profile of a Brownian motion from 0 at its first hitting
/// time of `r`, on original coordinates `[r - extent, r]`: BESQ(2) from 0
/// going down from `r` to 0, then BESQ(0) below 0 until absorption or
/// `left_extent`.
pub fn rn1_profile<R: Rng + ?Sized>(
    r: f64,
    left_extent: f64,
    space_step: f64,
    rng: &mut R,
) -> Result<LocalTimeProfile> {
    positive("r", r)?;
    positive("left_extent", left_extent)?;
    positive("space_step", space_step)?;
    let n_up = (r / space_step).ceil().max(1.0) as usize;
    let mut ys = Vec::with_capacity(n_up + 1);
    let mut ls = Vec::with_capacity(n_up + 1);
    ys.push(0.0);
    ls.push(0.0);
    let mut z = 0.0;
    for k in 1..=n_up {
        let y = if k == n_up { r } else { k as f64 * space_step };
        z = besq_transition(2.0, z, y - ys[k - 1], rng);
        ys.push(y);
        ls.push(z);
    }
    let limit = r + left_extent;
    let mut absorbed = z == 0.0;
    let mut k = 1usize;
    while !absorbed {
        let y = (r + k as f64 * space_step).min(limit);
        let prev = *ys.last().unwrap();
        if y <= prev {
            break;
        }
        z = besq_transition(0.0, z, y - prev, rng);
        ys.push(y);
        ls.push(z);
        absorbed = z == 0.0;
        k += 1;
    }
    let absorbed_at = absorbed.then(|| r - ys[ys.len() - 1]);
    let grid: Vec<f64> = ys.iter().rev().map(|y| r - y).collect();
    ls.reverse();
    Ok(LocalTimeProfile {
        kind: ProfileKind::Rn1,
        level: r,
        grid,
        ell: ls,
        absorbed_at,
        truncated: !absorbed,
    })
}

/// Supremum of a Brownian motion before its inverse local time at 0 of
/// level `v`: `v / (2E)` with `E` standard exponential.
pub fn sup_at_inverse_local_time<R: Rng + ?Sized>(v: f64, rng: &mut R) -> Result<f64> {
    positive("v", v)?;
    let e: f64 = Exp1.sample(rng);
    Ok(v / (2.0 * e))
}

/// `P(sup before tau(v) < y) = exp(-v / (2y))`.
pub fn sup_cdf(v: f64, y: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else {
        (-v / (2.0 * y)).exp()
    }
}

/// Suprema before `tau(v_lo)` and `tau(v_hi)` on one Brownian path,
/// `v_lo <= v_hi`: the excursions in `(v_lo, v_hi]` are independent of
/// those before.
pub fn coupled_sups<R: Rng + ?Sized>(v_lo: f64, v_hi: f64, rng: &mut R) -> Result<(f64, f64)> {
    positive("v_lo", v_lo)?;
    if !(v_hi >= v_lo) {
        return Err(Error::param("v_hi", format!("must be >= v_lo, got {v_hi}")));
    }
    let lo = sup_at_inverse_local_time(v_lo, rng)?;
    if v_hi == v_lo {
        return Ok((lo, lo));
    }
    let extra = sup_at_inverse_local_time(v_hi - v_lo, rng)?;
    Ok((lo, lo.max(extra)))
}

/// `int_0^inf x^p l(x) dx` with `l` piecewise linear on `grid`, `p > -1`.
fn weighted_integral(grid: &[f64], ell: &[f64], p: f64) -> f64 {
    const G: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)
    let mut sum = 0.0;
    for (xs, ls) in grid.windows(2).zip(ell.windows(2)) {
        let (a, b, la, lb) = (xs[0], xs[1], ls[0], ls[1]);
        if a == 0.0 {
            let bp = b.powf(p + 1.0);
            sum += la * bp / (p + 1.0) + (lb - la) * bp / (p + 2.0);
        } else if p == 0.0 {
            sum += 0.5 * (b - a) * (la + lb);
        } else {
            let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
            for s in [-G, G] {
                let x = m + s * h;
                let l = la + (lb - la) * (x - a) / (b - a);
                sum += h * x.powf(p) * l;
            }
        }
    }
    sum
}

/// `int (l(x) - c) / x dx` over each cell of `[a, b]` with `l` linear;
/// `c` is `level` on cells inside `[0, 1]` and 0 beyond.
fn cauchy_integral(grid: &[f64], ell: &[f64], level: f64) -> f64 {
    let mut sum = 0.0;
    for (xs, ls) in grid.windows(2).zip(ell.windows(2)) {
        let (a, b, la, lb) = (xs[0], xs[1], ls[0], ls[1]);
        let c = if b <= 1.0 { level } else { 0.0 };
        let m = (lb - la) / (b - a);
        if a == 0.0 {
            // l(0) = level, so the integrand is the constant slope
            debug_assert_eq!(la, c);
            sum += m * b;
        } else {
            sum += (la - c - m * a) * ((b - a) / a).ln_1p() + m * (b - a);
        }
    }
    sum
}

/// Draw of `int_0^inf x^{1/k - 2} L(tau(lambda), x) dx` with
/// `lambda = 4 (1 + k)`, `0 < k < 1`.
pub fn k_beta_sample<R: Rng + ?Sized>(kappa: f64, space_step: f64, rng: &mut R) -> Result<f64> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::param("kappa", format!("must lie in (0, 1), got {kappa}")));
    }
    let lambda = 4.0 * (1.0 + kappa);
    let prof = rn2_profile(lambda, space_step, rng)?;
    Ok(k_beta_of(&prof, kappa))
}

fn k_beta_of(prof: &LocalTimeProfile, kappa: f64) -> f64 {
    weighted_integral(&prof.grid, &prof.ell, 1.0 / kappa - 2.0)
}

/// Draw of `int_0^1 (L(tau(8), x) - 8) / x dx + int_1^inf L(tau(8), x) / x dx`.
pub fn c_beta_sample<R: Rng + ?Sized>(space_step: f64, rng: &mut R) -> Result<f64> {
    let spec = GridSpec::refined(space_step, 8.0).with_breakpoint(1.0);
    let prof = rn2_profile_on(8.0, &spec, rng)?;
    Ok(c_beta_of(&prof))
}

fn c_beta_of(prof: &LocalTimeProfile) -> f64 {
    cauchy_integral(&prof.grid, &prof.ell, prof.level)
}

/// Scale function of the Jacobi diffusion with dimensions `(2, 2 + 2k)`,
/// `S(y) = int_{alpha}^y dx / (x (1 - x)^{1 + k})` with
/// `alpha = 1 / (4 + 2k)`.
///
/// The integrand splits into `1/x`, `(1-x)^{-k}`, `(1-x)^{-1-k}` and the
/// bounded remainder `((1-x)^{1-k} - 1) / x`; the last one is tabulated.
#[derive(Clone, Debug)]
pub struct JacobiScale {
    kappa: f64,
    alpha: f64,
    table: Vec<f64>,
    offset: f64,
}

const JACOBI_TABLE: usize = 2048;

impl JacobiScale {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(Error::param("kappa", format!("must lie in (0, 1], got {kappa}")));
        }
        let alpha = 1.0 / (4.0 + 2.0 * kappa);
        let mut table = vec![0.0; JACOBI_TABLE + 1];
        if kappa < 1.0 {
            let g = |x: f64| remainder_integrand(kappa, x);
            let h = 1.0 / JACOBI_TABLE as f64;
            for i in 0..JACOBI_TABLE {
                let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
                table[i + 1] = table[i] + adaptive_simpson(&g, a, b, 1e-15);
            }
        }
        let mut s = JacobiScale {
            kappa,
            alpha,
            table,
            offset: 0.0,
        };
        let (ya, ua) = (alpha, 1.0 - alpha);
        s.offset = s.raw(ya.ln(), ya, ua);
        Ok(s)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn remainder(&self, y: f64) -> f64 {
        if self.kappa == 1.0 {
            return 0.0;
        }
        let h = 1.0 / JACOBI_TABLE as f64;
        let pos = (y / h).clamp(0.0, JACOBI_TABLE as f64);
        let i = (pos.floor() as usize).min(JACOBI_TABLE - 1);
        let t = pos - i as f64;
        let (x0, x1) = (i as f64 * h, (i + 1) as f64 * h);
        let (p0, p1) = (self.table[i], self.table[i + 1]);
        let (m0, m1) = (
            remainder_integrand(self.kappa, x0) * h,
            remainder_integrand(self.kappa, x1) * h,
        );
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * m1
    }

    /// Antiderivative without the `alpha` offset, from `ln y`, `y` and `u = 1 - y`.
    fn raw(&self, ln_y: f64, y: f64, u: f64) -> f64 {
        let k = self.kappa;
        let p = if k == 1.0 {
            -u.ln()
        } else {
            -((1.0 - k) * u.ln()).exp_m1() / (1.0 - k)
        };
        let q = u.powf(-k) / k;
        ln_y + p + q + self.remainder(y)
    }

    /// `S(y)` for `0 < y < 1`.
    pub fn scale(&self, y: f64) -> Result<f64> {
        if !(y > 0.0 && y < 1.0) {
            return Err(Error::param("y", format!("must lie in (0, 1), got {y}")));
        }
        Ok(self.raw(y.ln(), y, 1.0 - y) - self.offset)
    }

    /// `S` as a function of the logit `v = ln(y / (1 - y))`.
    pub fn scale_logit(&self, v: f64) -> f64 {
        let (ln_y, y, u) = logistic_parts(v);
        self.raw(ln_y, y, u) - self.offset
    }

    /// Logit of `S^{-1}(s)`; `dS/dv = (1 - y)^{-k}` and `S` is convex in `v`,
    /// so Newton converges from any start.
    pub fn inverse_logit(&self, s: f64) -> Result<f64> {
        finite("s", s)?;
        let k = self.kappa;
        let mut v = if s > 1.0 {
            (k * s).ln() / k
        } else {
            s + (self.alpha / (1.0 - self.alpha)).ln()
        };
        for _ in 0..200 {
            let (_, _, u) = logistic_parts(v);
            let step = (self.scale_logit(v) - s) * u.powf(k);
            v -= step;
            if step.abs() <= 1e-14 * (1.0 + v.abs()) {
                return Ok(v);
            }
        }
        Err(Error::NonConvergence("Jacobi scale inverse"))
    }

    /// `S^{-1}(s)` in `(0, 1)`.
    pub fn inverse(&self, s: f64) -> Result<f64> {
        let v = self.inverse_logit(s)?;
        Ok(logistic_parts(v).1)
    }
}

fn remainder_integrand(kappa: f64, x: f64) -> f64 {
    if x < 1e-8 {
        // ((1-x)^{1-k} - 1) / x -> -(1 - k)
        return -(1.0 - kappa) * (1.0 + 0.5 * kappa * x);
    }
    ((1.0 - kappa) * (-x).ln_1p()).exp_m1() / x
}

/// `(ln y, y, 1 - y)` for `y = 1 / (1 + e^{-v})`, all without cancellation.
#[inline]
fn logistic_parts(v: f64) -> (f64, f64, f64) {
    if v >= 0.0 {
        let e = (-v).exp();
        (-e.ln_1p(), 1.0 / (1.0 + e), e / (1.0 + e))
    } else {
        let e = v.exp();
        (v - e.ln_1p(), e / (1.0 + e), 1.0 / (1.0 + e))
    }
}

pub fn jacobi_scale(kappa: f64, y: f64) -> Result<f64> {
    JacobiScale::new(kappa)?.scale(y)
}

pub fn jacobi_scale_inverse(kappa: f64, s: f64) -> Result<f64> {
    JacobiScale::new(kappa)?.inverse(s)
}

/// Local times at `tau(lambda)` on both sides of 0: independent BESQ(0)
/// legs from `lambda`. `left` is indexed by `-x`.
#[derive(Clone, Debug)]
pub struct TwoSidedProfile {
    pub right: LocalTimeProfile,
    pub left: LocalTimeProfile,
}

pub fn two_sided_profile<R: Rng + ?Sized>(level: f64, spec: &GridSpec, rng: &mut R) -> Result<TwoSidedProfile> {
    Ok(TwoSidedProfile {
        right: rn2_profile_on(level, spec, rng)?,
        left: rn2_profile_on(level, spec, rng)?,
    })
}

/// One draw of `J_beta(k, t)` together with the functional it approximates
/// on the same profile (`K_beta` for `k < 1`, `C_beta` for `k = 1`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JBetaSample {
    pub j: f64,
    pub k: Option<f64>,
    pub c: Option<f64>,
}

/// `J_beta(k, t) = int_0^1 y (1-y)^{k-2} L(tau(lambda), S(y)/t) dy`,
/// evaluated as `t int y^2 (1-y)^{2k-1} L(tau(lambda), x) dx` with
/// `y = S^{-1}(t x)`.
pub fn j_beta_sample<R: Rng + ?Sized>(kappa: f64, t: f64, space_step: f64, rng: &mut R) -> Result<JBetaSample> {
    let scale = JacobiScale::new(kappa)?;
    j_beta_sample_with(&scale, t, space_step, rng)
}

pub fn j_beta_sample_with<R: Rng + ?Sized>(
    scale: &JacobiScale,
    t: f64,
    space_step: f64,
    rng: &mut R,
) -> Result<JBetaSample> {
    positive("t", t)?;
    let kappa = scale.kappa();
    let lambda = 4.0 * (1.0 + kappa);
    let mut spec = GridSpec::refined(space_step, lambda);
    if kappa == 1.0 {
        spec = spec.with_breakpoint(1.0);
    }
    let prof = two_sided_profile(lambda, &spec, rng)?;
    let weight = |x: f64| -> Result<f64> {
        let v = scale.inverse_logit(t * x)?;
        let (ln_y, _, u) = logistic_parts(v);
        Ok(t * (2.0 * ln_y + (2.0 * kappa - 1.0) * u.ln()).exp())
    };
    let mut j = 0.0;
    for (leg, sign) in [(&prof.right, 1.0), (&prof.left, -1.0)] {
        let mut prev: Option<(f64, f64)> = None;
        for (&x, &l) in leg.grid.iter().zip(&leg.ell) {
            let f = if l > 0.0 { weight(sign * x)? * l } else { 0.0 };
            if let Some((px, pf)) = prev {
                j += 0.5 * (x - px) * (f + pf);
            }
            prev = Some((x, f));
        }
    }
    let (k, c) = if kappa < 1.0 {
        (Some(k_beta_of(&prof.right, kappa)), None)
    } else {
        (None, Some(c_beta_of(&prof.right)))
    };
    Ok(JBetaSample { j, k, c })
}

/// State of a Jacobi diffusion
/// `dY = 2 sqrt(Y (1 - Y)) dB + (d1 - (d1 + d2) Y) dt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobiState {
    pub d1: f64,
    pub d2: f64,
    pub y: f64,
    pub time: f64,
}

impl JacobiState {
    pub fn new(d1: f64, d2: f64, y: f64) -> Result<Self> {
        positive("d1", d1)?;
        positive("d2", d2)?;
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::param("y", format!("must lie in [0, 1], got {y}")));
        }
        Ok(JacobiState { d1, d2, y, time: 0.0 })
    }

    pub fn drift(&self, y: f64) -> f64 {
        self.d1 - (self.d1 + self.d2) * y
    }
}

/// One Euler-Maruyama step, clamped to `[0, 1]`.
pub fn jacobi_step<R: Rng + ?Sized>(state: JacobiState, dt: f64, rng: &mut R) -> JacobiState {
    let y = state.y;
    let z: f64 = rng.sample(StandardNormal);
    let ny = y + state.drift(y) * dt + 2.0 * (y * (1.0 - y)).max(0.0).sqrt() * dt.sqrt() * z;
    JacobiState {
        y: ny.clamp(0.0, 1.0),
        time: state.time + dt,
        ..state
    }
}

/// `(1 / ln t) int_0^t ds / R^2(s)` for a BESQ(`d`) path `R^2` whose start is
/// the time-1 value of a BESQ(`d - 2`) from 0, i.e. `Gamma((d-2)/2, 2)`.
///
/// The path is sampled exactly on a grid that is uniform on `[0, 1e-3]` and
/// log-spaced with ratio 1.01 beyond; the integral is the trapezoid rule.
pub fn time_avg_inverse_square<R: Rng + ?Sized>(d: f64, t: f64, rng: &mut R) -> Result<f64> {
    if !(d > 4.0 && d.is_finite()) {
        return Err(Error::param("d", format!("must be > 4, got {d}")));
    }
    if !(t > 1.0 && t.is_finite()) {
        return Err(Error::param("t", format!("must be > 1, got {t}")));
    }
    let z0 = Gamma::new(0.5 * (d - 2.0), 2.0).expect("valid Gamma").sample(rng);
    let s_min = 1e-3_f64.min(t);
    let n_lin = 10;
    let mut s = 0.0;
    let mut z = z0;
    let mut sum = 0.0;
    let mut f_prev = 1.0 / z;
    let mut k = 0usize;
    while s < t {
        let ns = if k < n_lin {
            s_min * (k + 1) as f64 / n_lin as f64
        } else {
            (s * 1.01).min(t)
        };
        z = besq_transition(d, z, ns - s, rng);
        let f = 1.0 / z;
        sum += 0.5 * (ns - s) * (f + f_prev);
        f_prev = f;
        s = ns;
        k += 1;
    }
    Ok(sum / t.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn besq_zero_is_absorbing() {
        let mut rng = Stream::new(1).rng();
        for &dt in &[1e-6, 1.0, 1e6] {
            assert_eq!(besq_step(0.0, 0.0, dt, &mut rng).unwrap(), 0.0);
        }
        assert!(besq_step(-1.0, 1.0, 1.0, &mut rng).is_err());
        assert!(besq_step(1.0, -1.0, 1.0, &mut rng).is_err());
        assert!(besq_step(1.0, 1.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn besq_path_absorption_is_sticky() {
        let mut rng = Stream::new(2).rng();
        let grid: Vec<f64> = (0..200).map(|i| i as f64 * 0.1).collect();
        for _ in 0..50 {
            let p = besq_path(0.0, 1.0, &grid, &mut rng).unwrap();
            assert_eq!(p.values[0], 1.0);
            if let Some(t) = p.absorbed_at {
                let i = p.grid.iter().position(|&g| g == t).unwrap();
                assert!(p.values[i..].iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn grid_spec_hits_breakpoints() {
        let spec = GridSpec::refined(0.01, 8.0).with_breakpoint(1.0);
        let mut x = 0.0;
        let mut seen = false;
        while x < 3.0 {
            let nx = spec.next(x);
            assert!(nx > x);
            seen |= nx == 1.0;
            x = nx;
        }
        assert!(seen);
        assert_eq!(spec.next(0.0), 8e-8);
    }

    #[test]
    fn rn2_profile_starts_at_level_and_is_absorbed() {
        let mut rng = Stream::new(3).rng();
        for _ in 0..200 {
            let p = rn2_profile(6.0, 0.01, &mut rng).unwrap();
            assert_eq!(p.ell[0], 6.0);
            assert_eq!(*p.ell.last().unwrap(), 0.0);
            assert!(p.ell[..p.ell.len() - 1].iter().all(|&l| l > 0.0));
            assert_eq!(p.absorbed_at, p.grid.last().copied());
        }
    }

    #[test]
    fn rn1_profile_shape() {
        let mut rng = Stream::new(4).rng();
        let mut truncated = 0;
        for _ in 0..100 {
            let p = rn1_profile(3.0, 150.0, 0.05, &mut rng).unwrap();
            assert_eq!(*p.grid.last().unwrap(), 3.0);
            assert_eq!(*p.ell.last().unwrap(), 0.0);
            assert!(p.ell.iter().all(|&l| l >= 0.0));
            assert!(p.grid.windows(2).all(|w| w[1] > w[0]));
            if p.truncated {
                truncated += 1;
                assert!(p.ell[0] > 0.0 && p.absorbed_at.is_none());
            } else {
                assert_eq!(p.ell[0], 0.0);
            }
        }
        // P(truncation) is about 1 - E exp(-Gamma(1, 6) / 300), roughly 2%
        assert!(truncated < 10);
        let p = rn1_profile(1.0, 1e-3, 0.01, &mut rng).unwrap();
        assert!(p.truncated || p.absorbed_at.is_some());
    }

    #[test]
    fn sup_cdf_value() {
        assert!((sup_cdf(2.0, 1.0) - (-1f64).exp()).abs() < 1e-15);
        let mut rng = Stream::new(5).rng();
        for _ in 0..1000 {
            let (a, b) = coupled_sups(1.0, 3.0, &mut rng).unwrap();
            assert!(b >= a && a > 0.0);
        }
    }

    #[test]
    fn weighted_integral_exact_for_linear_profiles() {
        let grid = [0.0, 0.5, 1.0];
        let ell = [2.0, 1.0, 0.0];
        // int_0^1 x^{-1/2} (2 - 2x) dx = 4 - 4/3
        let v = weighted_integral(&grid, &ell, -0.5);
        assert!((v - (4.0 - 4.0 / 3.0)).abs() < 2e-3, "{v}");
        assert!((weighted_integral(&grid, &ell, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cauchy_integral_exact_cells() {
        // l = 8 on [0, 2]: first integral 0, second ln 2 * 8
        let grid = [0.0, 0.5, 1.0, 2.0];
        let ell = [8.0, 8.0, 8.0, 8.0];
        assert!((cauchy_integral(&grid, &ell, 8.0) - 8.0 * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn jacobi_scale_basics() {
        for &k in &[0.3, 0.5, 1.0] {
            let s = JacobiScale::new(k).unwrap();
            assert!(s.scale(s.alpha()).unwrap().abs() < 1e-12);
            let y = 1.0 - 1e-6;
            let v = k * s.scale(y).unwrap() * (1.0 - y).powf(k);
            assert!((v - 1.0).abs() < 0.01, "k={k}: {v}");
            let mut prev = f64::NEG_INFINITY;
            for i in 1..1000 {
                let cur = s.scale(i as f64 / 1000.0).unwrap();
                assert!(cur > prev);
                prev = cur;
            }
        }
        assert!(jacobi_scale(0.5, 0.0).is_err());
        assert!(jacobi_scale(0.5, 1.0).is_err());
    }

    #[test]
    fn jacobi_scale_matches_quadrature() {
        for &k in &[0.3, 0.5, 0.8] {
            let s = JacobiScale::new(k).unwrap();
            let f = |x: f64| 1.0 / (x * (1.0 - x).powf(1.0 + k));
            for &y in &[0.05, 0.2, 0.5, 0.9] {
                let (a, b, sign) = if y > s.alpha() {
                    (s.alpha(), y, 1.0)
                } else {
                    (y, s.alpha(), -1.0)
                };
                let want = sign * adaptive_simpson(&f, a, b, 1e-12);
                assert!((s.scale(y).unwrap() - want).abs() < 1e-9, "k={k} y={y}");
            }
        }
    }

    #[test]
    fn jacobi_scale_round_trip() {
        for &k in &[0.2, 0.5, 1.0] {
            let s = JacobiScale::new(k).unwrap();
            let (lo, hi) = (s.scale(1e-3).unwrap(), s.scale(0.999).unwrap());
            for i in 0..100 {
                let target = lo + (hi - lo) * i as f64 / 99.0;
                let back = s.scale(s.inverse(target).unwrap()).unwrap();
                assert!((back - target).abs() <= 1e-9 * target.abs().max(1.0), "k={k}");
            }
        }
    }

    #[test]
    fn jacobi_drift_vanishes_at_equilibrium() {
        let st = JacobiState::new(2.0, 4.0, 0.0).unwrap();
        assert_eq!(st.drift(2.0 / 6.0), 0.0);
        let mut rng = Stream::new(6).rng();
        let mut s = st;
        for _ in 0..10_000 {
            s = jacobi_step(s, 1e-4, &mut rng);
            assert!((0.0..=1.0).contains(&s.y));
        }
    }

    #[test]
    fn theta_average_is_positive() {
        let mut rng = Stream::new(7).rng();
        assert!(time_avg_inverse_square(6.0, 1e3, &mut rng).unwrap() > 0.0);
        assert!(time_avg_inverse_square(4.0, 1e3, &mut rng).is_err());
    }

    #[test]
    fn j_beta_nonnegative() {
        let mut rng = Stream::new(8).rng();
        for &k in &[0.5, 1.0] {
            for _ in 0..5 {
                let s = j_beta_sample(k, 100.0, 0.01, &mut rng).unwrap();
                assert!(s.j >= 0.0);
            }
        }
    }
}
