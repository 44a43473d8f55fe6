//! The diffusion in a drifted Brownian potential, built as
//! `X = A^{-1}(B(T^{-1}))` from a driving Brownian motion `B`.
//!
//! Two backends:
//! - the path backend steps `X` directly, cell by cell, in the local chart
//!   where `A` is linear (there `X` is a unit-speed Brownian motion);
//! - the Ray-Knight backend samples the local-time field of `B` at
//!   `sigma_B(A(u))` exactly along the environment grid and integrates it
//!   into the hitting time, its negative/positive parts and the maximal
//!   local time of `X`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bessel::{besq_transition, coupled_sups, rn2_profile_on, GridSpec, LocalTimeProfile};
use crate::env::{build_potential, default_left_extent, scale_table, Noise, ScaleTable};
use crate::error::positive;
use crate::rng::{tag, Stream};
use crate::stable::{t_pm, ConstantsBundle, Side};
use crate::{Error, Result};

/// How to build the environment of one replica.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub kappa: f64,
    pub step: f64,
    /// Extent of the grid below 0; defaults to [`default_left_extent`].
    pub left_extent: Option<f64>,
    pub noise: Noise,
}

impl EnvSpec {
    pub fn new(kappa: f64, step: f64) -> Result<Self> {
        positive("kappa", kappa)?;
        positive("step", step)?;
        Ok(EnvSpec {
            kappa,
            step,
            left_extent: None,
            noise: Noise::Brownian,
        })
    }

    pub fn left(&self) -> f64 {
        self.left_extent.unwrap_or_else(|| default_left_extent(self.kappa))
    }

    /// Environment on `[-left, x_max]`; `A_inf` is not needed by the caller.
    pub fn table_to(&self, x_max: f64, stream: &Stream) -> Result<ScaleTable> {
        let grid = build_potential(
            self.kappa,
            self.step,
            -self.left(),
            x_max,
            &stream.split(tag::ENV),
            self.noise,
        )?;
        scale_table(grid, f64::MAX)
    }

    /// Environment long enough that `F(r)` is resolved with the neglected
    /// tail below `1e-8 exp(-kappa r / 2)`.
    pub fn table_for_f(&self, r: f64, stream: &Stream) -> Result<ScaleTable> {
        positive("r", r)?;
        let k = self.kappa;
        let tol = (-k * r / 2.0 + 1e-8f64.ln()).exp();
        if tol == 0.0 {
            return Err(Error::NonFinite("exp(-kappa r / 2) underflows"));
        }
        let mut margin = (2.0 / k) * (25.0 + 2.0 * r.sqrt());
        for _ in 0..8 {
            let grid = build_potential(
                k,
                self.step,
                -self.left(),
                r + margin,
                &stream.split(tag::ENV),
                self.noise,
            )?;
            match scale_table(grid, tol) {
                Ok(t) => {
                    t.solve_f(r)?;
                    return Ok(t);
                }
                Err(Error::TailTooLarge { .. }) => margin *= 2.0,
                Err(e) => return Err(e),
            }
        }
        Err(Error::NonConvergence("environment extent for F(r)"))
    }
}

/// One joint draw of the hitting-time functionals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittingFunctionalSample {
    pub r: f64,
    /// `F(r)`, when the hitting level was `F(r)` rather than `r`.
    pub f_of_r: Option<f64>,
    /// The level whose hitting time was sampled.
    pub target: f64,
    pub h_total: f64,
    pub h_minus: f64,
    pub h_plus: f64,
    pub l_star: f64,
    pub l_neg: f64,
    pub truncated: bool,
}

/// Result of one walk of a local-time field down the environment grid.
struct Walk {
    h_plus: f64,
    h_minus: f64,
    truncated: bool,
}

/// Samples the local-time increments of `B` between its hitting times of
/// `A(switch)` and `A(top)` (`switch <= top`): BESQ(2) from 0 going down
/// from `top` to `switch`, then BESQ(0) until absorption or the left end.
///
/// `on_node(j, l)` sees the value at each grid node reached. Each cell of
/// `x`-length `dx` and `A`-length `da` contributes `dx^2 / da` times the
/// mean of its end values to the hitting time, which is the occupation time
/// of `X` in the cell when `A` is linear there.
fn walk_down<R: Rng + ?Sized, F: FnMut(usize, f64)>(
    table: &ScaleTable,
    top: f64,
    switch: f64,
    rng: &mut R,
    mut on_node: F,
) -> Result<Walk> {
    let grid = table.grid();
    let cells = table.cells();
    let h = grid.step();
    let origin = grid.origin();
    let (mut cell, mut theta) = grid.locate(top)?;
    let (s_cell, s_theta) = grid.locate(switch)?;
    let mut ell = 0.0;
    let mut walk = Walk {
        h_plus: 0.0,
        h_minus: 0.0,
        truncated: false,
    };
    loop {
        let to_switch = cell == s_cell && s_theta < theta && s_theta > 0.0;
        let next_theta = if to_switch { s_theta } else { 0.0 };
        let above = cell > s_cell || (cell == s_cell && next_theta >= s_theta);
        let frac = theta - next_theta;
        if frac > 0.0 {
            let next = if ell == 0.0 && !above {
                0.0
            } else {
                besq_transition(if above { 2.0 } else { 0.0 }, ell, frac * cells[cell], rng)
            };
            let dh = frac * h * h / cells[cell] * 0.5 * (ell + next);
            if cell >= origin {
                walk.h_plus += dh;
            } else {
                walk.h_minus += dh;
            }
            ell = next;
        }
        theta = next_theta;
        if theta == 0.0 {
            on_node(cell, ell);
        }
        if ell == 0.0 && !above {
            return Ok(walk);
        }
        if theta == 0.0 {
            if cell == 0 {
                walk.truncated = ell > 0.0;
                return Ok(walk);
            }
            cell -= 1;
            theta = 1.0;
        }
    }
}

/// Local time at the bottom of a cell with potential minimum `w_min`: the
/// profile in the `A` scale barely moves across a valley bottom, so the
/// mean of the end values is used there.
fn cell_peak(w_min: f64, l_a: f64, l_b: f64) -> f64 {
    let l = 0.5 * (l_a + l_b);
    if l > 0.0 {
        (-w_min).exp() * l
    } else {
        0.0
    }
}

/// Exact draw of `(H, H_-, H_+, L*, L^neg)` at the hitting time of `r`
/// (or of `F(r)` when `use_f`) in the environment of `table`.
pub fn hitting_sample_rk<R: Rng + ?Sized>(
    table: &ScaleTable,
    r: f64,
    use_f: bool,
    rng: &mut R,
) -> Result<HittingFunctionalSample> {
    positive("r", r)?;
    if !(table.kappa() > 0.0) {
        return Err(Error::param("kappa", "the diffusion needs kappa > 0"));
    }
    let f_of_r = if use_f { Some(table.solve_f(r)?) } else { None };
    let target = f_of_r.unwrap_or(r);
    if !(target > 0.0) {
        return Err(Error::param(
            "target",
            format!("hitting level must be > 0, got {target}"),
        ));
    }
    let grid = table.grid();
    let w = grid.values();
    let w_min = grid.cell_minima();
    let origin = grid.origin();
    let (mut l_star, mut l_neg) = (0.0f64, 0.0f64);
    let mut prev: Option<(usize, f64)> = None;
    let walk = walk_down(table, target, 0.0, rng, |j, l| {
        let mut lx = if l > 0.0 { (-w[j]).exp() * l } else { 0.0 };
        if let Some((pj, pl)) = prev {
            if pj == j + 1 {
                lx = lx.max(cell_peak(w_min[j], l, pl));
            }
        }
        prev = Some((j, l));
        l_star = l_star.max(lx);
        if j < origin {
            l_neg = l_neg.max(lx);
        }
    })?;
    Ok(HittingFunctionalSample {
        r,
        f_of_r,
        target,
        h_total: walk.h_minus + walk.h_plus,
        h_minus: walk.h_minus,
        h_plus: walk.h_plus,
        l_star,
        l_neg,
        truncated: walk.truncated,
    })
}

/// A path of `X` on a fixed time horizon.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathSample {
    /// Recorded times, starting at 0 and ending at `horizon`.
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub bin_edges: Vec<f64>,
    /// Occupation time of each bin divided by its width.
    pub lt_bins: Vec<f64>,
    pub horizon: f64,
}

impl PathSample {
    /// `sum lt * width`, which equals `horizon` up to rounding.
    pub fn occupation_total(&self) -> f64 {
        self.bin_edges
            .windows(2)
            .zip(&self.lt_bins)
            .map(|(e, l)| (e[1] - e[0]) * l)
            .sum()
    }

    pub fn max_local_time(&self) -> f64 {
        self.lt_bins.iter().copied().fold(0.0, f64::max)
    }
}

/// Position of `X` in the local chart: cell index and `A`-offset from the
/// cell's left node.
struct Chart<'a> {
    table: &'a ScaleTable,
    cell: usize,
    da: f64,
}

impl<'a> Chart<'a> {
    fn at(table: &'a ScaleTable, x: f64) -> Result<Self> {
        let (cell, theta) = table.grid().locate(x)?;
        Ok(Chart {
            table,
            cell,
            da: theta * table.cells()[cell],
        })
    }

    fn x(&self) -> f64 {
        let g = self.table.grid();
        g.x(self.cell) + (self.da / self.table.cells()[self.cell]).clamp(0.0, 1.0) * g.step()
    }

    /// Advances by `dt` of local time; returns the elapsed time of `X`.
    #[inline]
    fn step<R: Rng + ?Sized>(&mut self, sqrt_dt: f64, dt: f64, rng: &mut R) -> Result<f64> {
        let cells = self.table.cells();
        let h = self.table.grid().step();
        let start = self.cell;
        let z: f64 = rng.sample(StandardNormal);
        self.da += cells[start] / h * sqrt_dt * z;
        while self.da > cells[self.cell] {
            self.da -= cells[self.cell];
            self.cell += 1;
            if self.cell >= cells.len() {
                return Err(self.exit_error());
            }
        }
        while self.da < 0.0 {
            if self.cell == 0 {
                return Err(self.exit_error());
            }
            self.cell -= 1;
            self.da += cells[self.cell];
        }
        if self.cell == start {
            Ok(dt)
        } else {
            let lc = self.table.ln_cell();
            Ok(0.5 * dt * (1.0 + (2.0 * (lc[start] - lc[self.cell])).exp()))
        }
    }

    fn exit_error(&self) -> Error {
        let g = self.table.grid();
        Error::OutOfRange {
            what: "path position",
            value: if self.da < 0.0 { g.x_min() } else { g.x_max() },
            lo: g.x_min(),
            hi: g.x_max(),
        }
    }
}

const MAX_RECORDED: usize = 10_000;

/// Simulates `X` on `[0, horizon]` with local step `dt`, recording
/// occupation in bins of width `bin_width`.
pub fn simulate_path<R: Rng + ?Sized>(
    table: &ScaleTable,
    horizon: f64,
    dt: f64,
    bin_width: f64,
    rng: &mut R,
) -> Result<PathSample> {
    positive("horizon", horizon)?;
    positive("dt", dt)?;
    positive("bin_width", bin_width)?;
    if !(table.kappa() > 0.0) {
        return Err(Error::param("kappa", "the diffusion needs kappa > 0"));
    }
    let g = table.grid();
    let (x_min, x_max) = (g.x_min(), g.x_max());
    let n_bins = ((x_max - x_min) / bin_width).ceil().max(1.0) as usize;
    let bin_edges: Vec<f64> = (0..=n_bins).map(|k| x_min + k as f64 * bin_width).collect();
    let mut occupation = vec![0.0; n_bins];
    let stride = ((horizon / dt) as usize / MAX_RECORDED).max(1);
    let mut chart = Chart::at(table, 0.0)?;
    let sqrt_dt = dt.sqrt();
    let mut t = 0.0;
    let mut x = 0.0;
    let mut times = vec![0.0];
    let mut positions = vec![0.0];
    let mut k = 0usize;
    while t < horizon {
        let b = (((x - x_min) / bin_width) as usize).min(n_bins - 1);
        let elapsed = chart.step(sqrt_dt, dt, rng)?;
        let used = elapsed.min(horizon - t);
        occupation[b] += used;
        t += used;
        x = chart.x();
        k += 1;
        if k.is_multiple_of(stride) || t >= horizon {
            times.push(t);
            positions.push(x);
        }
    }
    let lt_bins = occupation.iter().map(|o| o / bin_width).collect();
    Ok(PathSample {
        times,
        positions,
        bin_edges,
        lt_bins,
        horizon,
    })
}

/// First time the path from 0 reaches `level`, or `+inf` if that takes
/// longer than `max_time`.
pub fn path_hitting_time<R: Rng + ?Sized>(
    table: &ScaleTable,
    level: f64,
    dt: f64,
    max_time: f64,
    rng: &mut R,
) -> Result<f64> {
    positive("level", level)?;
    positive("dt", dt)?;
    let mut chart = Chart::at(table, 0.0)?;
    let sqrt_dt = dt.sqrt();
    let mut t = 0.0;
    let top = table.grid().x_max();
    while t <= max_time {
        match chart.step(sqrt_dt, dt, rng) {
            Ok(elapsed) => t += elapsed,
            // a step that overshoots the right end of the grid crosses `level` too
            Err(Error::OutOfRange { value, .. }) if value >= top => return Ok(t + dt),
            Err(e) => return Err(e),
        }
        if chart.x() >= level {
            return Ok(t);
        }
    }
    Ok(f64::INFINITY)
}

/// Whether the path started at `start` leaves `(lo, hi)` through `hi`.
pub fn path_exit<R: Rng + ?Sized>(
    table: &ScaleTable,
    lo: f64,
    start: f64,
    hi: f64,
    dt: f64,
    rng: &mut R,
) -> Result<bool> {
    if !(lo < start && start < hi) {
        return Err(Error::param("lo<start<hi", format!("got {lo}, {start}, {hi}")));
    }
    positive("dt", dt)?;
    let mut chart = Chart::at(table, start)?;
    let sqrt_dt = dt.sqrt();
    loop {
        chart.step(sqrt_dt, dt, rng)?;
        let x = chart.x();
        if x >= hi {
            return Ok(true);
        }
        if x <= lo {
            return Ok(false);
        }
    }
}

/// `L*/H^{1/k}` for `k > 1`, `L* ln(H) / H` for `k = 1`, at the hitting
/// time of `F(r)`.
pub fn maxlocal_law_sample<R: Rng + ?Sized>(table: &ScaleTable, r: f64, rng: &mut R) -> Result<f64> {
    let k = table.kappa();
    if !(k >= 1.0) {
        return Err(Error::param("kappa", format!("must be >= 1, got {k}")));
    }
    let s = hitting_sample_rk(table, r, true, rng)?;
    Ok(normalize_max_local(k, s.l_star, s.h_total))
}

pub fn normalize_max_local(kappa: f64, l_star: f64, h: f64) -> f64 {
    if kappa == 1.0 {
        l_star * h.ln() / h
    } else {
        l_star / h.powf(1.0 / kappa)
    }
}

/// CDF of the limit of [`maxlocal_law_sample`]: `c E^{-1/k}` with
/// `c = 4 (k^2 (k-1) / 8)^{1/k}` for `k > 1`, and `1/(2E)` for `k = 1`.
pub fn maxlocal_limit_cdf(kappa: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if kappa == 1.0 {
        (-0.5 / x).exp()
    } else {
        let c = 4.0 * (kappa * kappa * (kappa - 1.0) / 8.0).powf(1.0 / kappa);
        (-(c / x).powf(kappa)).exp()
    }
}

/// Median of the limit law of [`maxlocal_law_sample`].
pub fn maxlocal_limit_median(kappa: f64) -> f64 {
    let l2 = std::f64::consts::LN_2;
    if kappa == 1.0 {
        0.5 / l2
    } else {
        4.0 * (kappa * kappa * (kappa - 1.0) / 8.0).powf(1.0 / kappa) / l2.powf(1.0 / kappa)
    }
}

/// `L-bar_-(r)`, `L-bar_+(r)` and `L*` at the hitting time of `F(r)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LBracket {
    pub l_minus_bar: f64,
    pub l_plus_bar: f64,
    pub l_star: f64,
}

/// `L-bar_+-(r) = 4 (k sup_{u <= tau(lambda t_+-(r))} beta(u))^{1/k}` with
/// both suprema taken on one Brownian path, next to an independent draw of
/// `L*` at the hitting time of `F(r)`.
pub fn l_pm_bracket<R: Rng + ?Sized>(
    table: &ScaleTable,
    r: f64,
    bundle: &ConstantsBundle,
    rng: &mut R,
) -> Result<LBracket> {
    let (t_lo, t_hi) = (t_pm(bundle, r, Side::Minus)?, t_pm(bundle, r, Side::Plus)?);
    let k = bundle.kappa;
    let (m_lo, m_hi) = coupled_sups(bundle.lambda * t_lo, bundle.lambda * t_hi, rng)?;
    let s = hitting_sample_rk(table, r, true, rng)?;
    Ok(LBracket {
        l_minus_bar: 4.0 * (k * m_lo).powf(1.0 / k),
        l_plus_bar: 4.0 * (k * m_hi).powf(1.0 / k),
        l_star: s.l_star,
    })
}

/// `P(L-bar_+-(r) < (y r)^{1/k}) = exp(-k^2 4^k psi_+-(r) / (2y))`.
pub fn l_bar_cdf(bundle: &ConstantsBundle, r: f64, side: Side, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let k = bundle.kappa;
    (-k * k * 4f64.powf(k) * bundle.psi_pm(r, side) / (2.0 * y)).exp()
}

/// `I-bar_-(r)`, `I-bar_+(r)` and an independent `H(F(r))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IBracket {
    pub i_minus_bar: f64,
    pub i_plus_bar: f64,
    pub h_total: f64,
}

/// Bracketing variables for `H(F(r))`, `0 < k <= 1`.
///
/// With `l_t` the local-time profile at `tau(lambda t)`:
/// `I-bar = 4 k^{1/k-2} [int x^{1/k-2} l_t(x) dx +- c6 t]` for `k < 1`, and
/// `I-bar = 4 [int_0^1 (l_t(x) - 8t)/x dx + int_1^inf l_t(x)/x dx]` for
/// `k = 1` (the rescaled `t (C + 8 ln t)`). The profile at `t_+` is the one
/// at `t_-` plus an independent BESQ(0) profile from `lambda (t_+ - t_-)`.
pub fn i_pm_bracket<R: Rng + ?Sized>(
    table: &ScaleTable,
    r: f64,
    bundle: &ConstantsBundle,
    space_step: f64,
    c6: f64,
    rng: &mut R,
) -> Result<IBracket> {
    let k = bundle.kappa;
    if !(k > 0.0 && k <= 1.0) {
        return Err(Error::param("kappa", format!("must lie in (0, 1], got {k}")));
    }
    let (t_lo, t_hi) = (t_pm(bundle, r, Side::Minus)?, t_pm(bundle, r, Side::Plus)?);
    let lam = bundle.lambda;
    let spec = GridSpec::refined(space_step, lam * t_lo).with_breakpoint(1.0);
    let lo = rn2_profile_on(lam * t_lo, &spec, rng)?;
    let inc = rn2_profile_on(lam * (t_hi - t_lo), &spec, rng)?;
    let hi = add_profiles(&lo, &inc);
    let (i_lo, i_hi) = if k < 1.0 {
        let p = 1.0 / k - 2.0;
        let pre = 4.0 * k.powf(p);
        (
            pre * (power_moment(&lo, p) - c6 * t_lo),
            pre * (power_moment(&hi, p) + c6 * t_hi),
        )
    } else {
        (4.0 * log_moment(&lo, 8.0 * t_lo), 4.0 * log_moment(&hi, 8.0 * t_hi))
    };
    let s = hitting_sample_rk(table, r, true, rng)?;
    Ok(IBracket {
        i_minus_bar: i_lo,
        i_plus_bar: i_hi,
        h_total: s.h_total,
    })
}

/// Pointwise sum of two profiles sharing one grid prefix.
fn add_profiles(a: &LocalTimeProfile, b: &LocalTimeProfile) -> LocalTimeProfile {
    let (long, short) = if a.grid.len() >= b.grid.len() { (a, b) } else { (b, a) };
    let mut ell = long.ell.clone();
    for (e, s) in ell.iter_mut().zip(&short.ell) {
        *e += s;
    }
    LocalTimeProfile {
        level: a.level + b.level,
        ell,
        ..long.clone()
    }
}

fn power_moment(p: &LocalTimeProfile, power: f64) -> f64 {
    let mut sum = 0.0;
    for (xs, ls) in p.grid.windows(2).zip(p.ell.windows(2)) {
        let (a, b) = (xs[0], xs[1]);
        if a == 0.0 {
            let bp = b.powf(power + 1.0);
            sum += ls[0] * bp / (power + 1.0) + (ls[1] - ls[0]) * bp / (power + 2.0);
        } else {
            let m = 0.5 * (a + b);
            sum += (b - a) * m.powf(power) * 0.5 * (ls[0] + ls[1]);
        }
    }
    sum
}

fn log_moment(p: &LocalTimeProfile, level: f64) -> f64 {
    let mut sum = 0.0;
    for (xs, ls) in p.grid.windows(2).zip(p.ell.windows(2)) {
        let (a, b, la, lb) = (xs[0], xs[1], ls[0], ls[1]);
        let c = if b <= 1.0 { level } else { 0.0 };
        let m = (lb - la) / (b - a);
        if a == 0.0 {
            sum += m * b;
        } else {
            sum += (la - c - m * a) * ((b - a) / a).ln_1p() + m * (b - a);
        }
    }
    sum
}

/// One level of a [`lil_track`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LilRecord {
    pub r: f64,
    pub h: f64,
    pub l_star: f64,
    /// `H / (r ln r)`
    pub h_over_r_log_r: f64,
    /// `H / r^{1/k}`
    pub h_over_r_pow: f64,
    /// `L* / (r / ln ln r)^{1/k}`
    pub l_star_norm: f64,
}

/// Hitting times and maximal local times of the levels in `r_schedule`
/// along one trajectory: the local-time field at the hitting time of
/// `r_k` is the field at `r_{k-1}` plus an independent Ray-Knight increment.
pub fn lil_track<R: Rng + ?Sized>(table: &ScaleTable, r_schedule: &[f64], rng: &mut R) -> Result<Vec<LilRecord>> {
    let k = table.kappa();
    if !(k > 0.0) {
        return Err(Error::param("kappa", "the diffusion needs kappa > 0"));
    }
    if r_schedule.windows(2).any(|w| !(w[1] > w[0])) || r_schedule.first().is_some_and(|&r| !(r > 0.0)) {
        return Err(Error::param("r_schedule", "must be positive and strictly increasing"));
    }
    let grid = table.grid();
    let w = grid.values();
    let w_min = grid.cell_minima();
    let mut field = vec![0.0; grid.len()];
    let mut h = 0.0;
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(r_schedule.len());
    for &r in r_schedule {
        let walk = walk_down(table, r, prev, rng, |j, l| field[j] += l)?;
        if walk.truncated {
            return Err(Error::Truncated { extent: -grid.x_min() });
        }
        h += walk.h_plus + walk.h_minus;
        prev = r;
        let node_max = field
            .iter()
            .zip(w)
            .filter(|(l, _)| **l > 0.0)
            .map(|(l, wj)| (-wj).exp() * l)
            .fold(0.0, f64::max);
        let l_star = field
            .windows(2)
            .zip(w_min)
            .map(|(l, &m)| cell_peak(m, l[0], l[1]))
            .fold(node_max, f64::max);
        let lnlnr = r.ln().ln();
        out.push(LilRecord {
            r,
            h,
            l_star,
            h_over_r_log_r: h / (r * r.ln()),
            h_over_r_pow: h / r.powf(1.0 / k),
            l_star_norm: if lnlnr > 0.0 {
                l_star / (r / lnlnr).powf(1.0 / k)
            } else {
                f64::NAN
            },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::build_potential;

    fn drift_table(kappa: f64, lo: f64, hi: f64, h: f64) -> ScaleTable {
        let g = build_potential(kappa, h, lo, hi, &Stream::new(0), Noise::DriftOnly).unwrap();
        scale_table(g, f64::MAX).unwrap()
    }

    #[test]
    fn hitting_parts_add_up() {
        let spec = EnvSpec::new(2.0, 0.01).unwrap();
        for i in 0..20 {
            let s = Stream::new(9).split(i);
            let t = spec.table_to(10.0, &s).unwrap();
            let x = hitting_sample_rk(&t, 10.0, false, &mut s.split(tag::PROFILE).rng()).unwrap();
            assert_eq!(x.h_total, x.h_minus + x.h_plus);
            assert!(x.h_plus > 0.0 && x.l_star > 0.0 && x.l_star >= x.l_neg);
            assert!(!x.truncated);
        }
    }

    #[test]
    fn flat_drift_mean_hitting_time() {
        // drift-only W = -kx/2 gives dX = dB + (k/4) dt, E H(r) = 4r/k
        let t = drift_table(2.0, -60.0, 12.0, 0.01);
        let mut rng = Stream::new(1).rng();
        let n = 4000;
        let mean = (0..n)
            .map(|_| hitting_sample_rk(&t, 10.0, false, &mut rng).unwrap().h_total)
            .sum::<f64>()
            / n as f64;
        // Var H = 4 * 2 r / (k/2)^3 ... sd of H about 6.3 at r = 10
        assert!((mean - 20.0).abs() < 0.5, "{mean}");
    }

    #[test]
    fn path_occupation_identity() {
        let spec = EnvSpec::new(1.0, 0.01).unwrap();
        let t = spec.table_to(50.0, &Stream::new(2)).unwrap();
        let p = simulate_path(&t, 20.0, 1e-3, 0.05, &mut Stream::new(3).rng()).unwrap();
        assert!((p.occupation_total() - 20.0).abs() <= 1e-3 * 20.0);
        assert_eq!(p.positions[0], 0.0);
        assert_eq!(*p.times.last().unwrap(), 20.0);
    }

    #[test]
    fn path_drift_only_mean_hitting_time() {
        let t = drift_table(2.0, -60.0, 12.0, 0.01);
        let mut rng = Stream::new(4).rng();
        let n = 1000;
        let mean = (0..n)
            .map(|_| path_hitting_time(&t, 5.0, 1e-3, 1e6, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 10.0).abs() < 0.6, "{mean}");
    }

    #[test]
    fn limit_medians() {
        assert!((maxlocal_limit_median(2.0) - 2.0 * 2f64.sqrt() / std::f64::consts::LN_2.sqrt()).abs() < 1e-12);
        assert!((maxlocal_limit_cdf(2.0, maxlocal_limit_median(2.0)) - 0.5).abs() < 1e-12);
        assert!((1.0 - maxlocal_limit_cdf(1.0, 1.0) - 0.393_469_340_287_366_6).abs() < 1e-12);
    }

    #[test]
    fn lil_track_is_monotone() {
        let spec = EnvSpec::new(1.0, 0.01).unwrap();
        let s = Stream::new(5);
        let t = spec.table_to(200.0, &s).unwrap();
        let rs: Vec<f64> = (0..8).map(|i| 5.0 * 1.5f64.powi(i)).collect();
        let track = lil_track(&t, &rs, &mut s.split(tag::PROFILE).rng()).unwrap();
        assert!(track.windows(2).all(|w| w[1].h >= w[0].h && w[1].l_star >= w[0].l_star));
        assert!(track.iter().all(|r| r.h > 0.0 && r.l_star > 0.0));
    }
}
