//! The random environment: a two-sided Brownian motion with drift `-kappa/2`
//! sampled on a uniform grid, its scale function `A(x) = int_0^x e^{W}` and
//! derived quantities.
//!
//! Far to the right `A(x)` is within rounding of its limit, so the table also
//! stores `ln D(x)` with `D(x) = A_inf - A(x)`, accumulated from the right end
//! in log space. Everything that needs `A_inf - A(x)` (the level `F(r)`,
//! differences of `A` between two positive points) goes through `D`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{finite, positive};
use crate::quad::log_add_exp;
use crate::rng::{tag, Stream};
use crate::{Error, Result};

/// Whether the potential carries Brownian noise or only its linear drift.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Noise {
    /// `W(x) = -kappa x / 2` exactly.
    DriftOnly,
    Brownian,
}

impl Noise {
    pub fn scale(self) -> f64 {
        match self {
            Noise::DriftOnly => 0.0,
            Noise::Brownian => 1.0,
        }
    }

    pub fn from_scale(s: f64) -> Result<Self> {
        if s == 0.0 {
            Ok(Noise::DriftOnly)
        } else if s == 1.0 {
            Ok(Noise::Brownian)
        } else {
            Err(Error::param("noise_scale", format!("must be 0 or 1, got {s}")))
        }
    }
}

/// `W_kappa` at the nodes `x_k = (k - origin) * step`.
#[derive(Clone, Debug)]
pub struct PotentialGrid {
    kappa: f64,
    step: f64,
    origin: usize,
    values: Vec<f64>,
    noise: Noise,
    sup_right: f64,
    cell_min: Vec<f64>,
}

impl PotentialGrid {
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn noise(&self) -> Noise {
        self.noise
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the node at `x = 0`.
    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.origin as f64) * self.step
    }

    pub fn x_min(&self) -> f64 {
        self.x(0)
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.values.len() - 1)
    }

    /// Supremum of `W_kappa` over `[0, x_max]`, including the maxima of the
    /// Brownian bridges between nodes.
    pub fn sup_right(&self) -> f64 {
        self.sup_right
    }

    /// Minimum of `W_kappa` over each cell `[x_j, x_{j+1}]`, drawn from the
    /// exact bridge law given the end values (independently of the bridge
    /// maxima behind [`sup_right`](Self::sup_right)).
    pub fn cell_minima(&self) -> &[f64] {
        &self.cell_min
    }

    /// Cell index `i` and fraction `theta` with `x = x_i + theta * step`.
    pub fn locate(&self, x: f64) -> Result<(usize, f64)> {
        let (lo, hi) = (self.x_min(), self.x_max());
        if !(x >= lo && x <= hi) {
            return Err(Error::OutOfRange {
                what: "x",
                value: x,
                lo,
                hi,
            });
        }
        let pos = x / self.step + self.origin as f64;
        let last_cell = self.values.len().saturating_sub(2);
        let i = (pos.floor().max(0.0) as usize).min(last_cell);
        Ok((i, (pos - i as f64).clamp(0.0, 1.0)))
    }

    /// Linear interpolation of the potential.
    pub fn value_at(&self, x: f64) -> Result<f64> {
        let (i, t) = self.locate(x)?;
        if self.values.len() == 1 {
            return Ok(self.values[0]);
        }
        Ok(self.values[i] + t * (self.values[i + 1] - self.values[i]))
    }
}

/// Samples `W_kappa` on `[x_min, x_max]` (rounded outward to whole steps).
///
/// The right and left halves come from independent sub-streams of `stream`.
pub fn build_potential(
    kappa: f64,
    step: f64,
    x_min: f64,
    x_max: f64,
    stream: &Stream,
    noise: Noise,
) -> Result<PotentialGrid> {
    finite("kappa", kappa)?;
    positive("step", step)?;
    finite("x_min", x_min)?;
    finite("x_max", x_max)?;
    if kappa < 0.0 {
        return Err(Error::param("kappa", format!("must be >= 0, got {kappa}")));
    }
    if x_min > 0.0 {
        return Err(Error::param("x_min", format!("must be <= 0, got {x_min}")));
    }
    if x_max < 0.0 {
        return Err(Error::param("x_max", format!("must be >= 0, got {x_max}")));
    }
    let n_left = (-x_min / step - 1e-9).ceil().max(0.0) as usize;
    let n_right = (x_max / step - 1e-9).ceil().max(0.0) as usize;
    let n = n_left + n_right + 1;
    let origin = n_left;
    let mut values = vec![0.0; n];
    let mut sup_right = 0.0;

    match noise {
        Noise::DriftOnly => {
            for (k, v) in values.iter_mut().enumerate() {
                let x = (k as f64 - origin as f64) * step;
                *v = -kappa * x / 2.0;
            }
        }
        Noise::Brownian => {
            let sd = step.sqrt();
            let drift = -kappa * step / 2.0;
            let mut right = stream.split(tag::ENV_RIGHT).rng();
            let mut bridge = stream.split(tag::ENV_SUP).rng();
            for k in origin + 1..n {
                let z: f64 = right.sample(StandardNormal);
                let (a, b) = (values[k - 1], values[k - 1] + drift + sd * z);
                values[k] = b;
                // exact maximum of the Brownian bridge from a to b over one step
                let u: f64 = 1.0 - bridge.random::<f64>();
                let m = 0.5 * (a + b + ((b - a) * (b - a) - 2.0 * step * u.ln()).sqrt());
                if m > sup_right {
                    sup_right = m;
                }
            }
            let mut left = stream.split(tag::ENV_LEFT).rng();
            for k in (0..origin).rev() {
                let z: f64 = left.sample(StandardNormal);
                values[k] = values[k + 1] - drift + sd * z;
            }
        }
    }
    let cell_min = match noise {
        Noise::DriftOnly => values.windows(2).map(|v| v[0].min(v[1])).collect(),
        Noise::Brownian => {
            let mut bridge = stream.split(tag::ENV_MIN).rng();
            values
                .windows(2)
                .map(|v| {
                    let u: f64 = 1.0 - bridge.random::<f64>();
                    let (a, b) = (v[0], v[1]);
                    0.5 * (a + b - ((b - a) * (b - a) - 2.0 * step * u.ln()).sqrt())
                })
                .collect()
        }
    };

    Ok(PotentialGrid {
        kappa,
        step,
        origin,
        values,
        noise,
        sup_right,
        cell_min,
    })
}

/// Tabulated scale function of one environment.
#[derive(Clone, Debug)]
pub struct ScaleTable {
    grid: PotentialGrid,
    a_values: Vec<f64>,
    ln_cell: Vec<f64>,
    cell: Vec<f64>,
    ln_tail: Vec<f64>,
    a_inf: f64,
    tail_bound: f64,
}

/// Trapezoid quadrature of `e^{W}` on the grid plus a drift-only tail
/// estimate `e^{W(x_max)} * 2 / kappa` beyond `x_max`.
///
/// For `kappa = 0` the table is still built (scale ratios remain
/// meaningful) but `a_inf` and the tail bound are infinite.
pub fn scale_table(grid: PotentialGrid, tail_tolerance: f64) -> Result<ScaleTable> {
    positive("tail_tolerance", tail_tolerance)?;
    let n = grid.len();
    if n < 2 {
        return Err(Error::param("grid", "needs at least two nodes"));
    }
    let h = grid.step;
    let w = &grid.values;
    if w.iter().any(|v| v.abs() > 700.0) {
        return Err(Error::NonFinite("scale table (|W| > 700 overflows e^W)"));
    }
    let ln_half_h = (0.5 * h).ln();
    let ln_cell: Vec<f64> = w.windows(2).map(|p| ln_half_h + log_add_exp(p[0], p[1])).collect();

    let cell: Vec<f64> = ln_cell.iter().map(|l| l.exp()).collect();
    let mut a_values = vec![0.0; n];
    for i in grid.origin..n - 1 {
        a_values[i + 1] = a_values[i] + cell[i];
    }
    for i in (0..grid.origin).rev() {
        a_values[i] = a_values[i + 1] - cell[i];
    }

    let (a_inf, tail_bound, ln_tail) = if grid.kappa > 0.0 {
        let ln_bound = w[n - 1] + (2.0 / grid.kappa).ln();
        let tail_bound = ln_bound.exp();
        if tail_bound > tail_tolerance {
            return Err(Error::TailTooLarge {
                bound: tail_bound,
                tolerance: tail_tolerance,
            });
        }
        let mut ln_tail = vec![0.0; n];
        ln_tail[n - 1] = ln_bound;
        for i in (0..n - 1).rev() {
            ln_tail[i] = log_add_exp(ln_tail[i + 1], ln_cell[i]);
        }
        (a_values[n - 1] + tail_bound, tail_bound, ln_tail)
    } else {
        (f64::INFINITY, f64::INFINITY, vec![f64::INFINITY; n])
    };

    Ok(ScaleTable {
        grid,
        a_values,
        ln_cell,
        cell,
        ln_tail,
        a_inf,
        tail_bound,
    })
}

impl ScaleTable {
    pub fn grid(&self) -> &PotentialGrid {
        &self.grid
    }

    pub fn kappa(&self) -> f64 {
        self.grid.kappa
    }

    /// `A` at the grid nodes.
    pub fn a_values(&self) -> &[f64] {
        &self.a_values
    }

    /// `ln int_{x_i}^{x_{i+1}} e^{W}` for each cell.
    pub fn ln_cell(&self) -> &[f64] {
        &self.ln_cell
    }

    /// `int_{x_i}^{x_{i+1}} e^{W}` for each cell.
    pub fn cells(&self) -> &[f64] {
        &self.cell
    }

    /// `ln (A_inf - A(x_i))` at the nodes.
    pub fn ln_tail(&self) -> &[f64] {
        &self.ln_tail
    }

    pub fn a_inf(&self) -> f64 {
        self.a_inf
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// Piecewise-linear interpolant of `A`.
    pub fn a_at(&self, x: f64) -> Result<f64> {
        let (i, t) = self.grid.locate(x)?;
        Ok(self.a_values[i] + t * self.cell[i])
    }

    /// `ln (A_inf - A(x))` on the same interpolant.
    pub fn ln_tail_at(&self, x: f64) -> Result<f64> {
        let (i, t) = self.grid.locate(x)?;
        if t >= 1.0 {
            return Ok(self.ln_tail[i + 1]);
        }
        Ok(log_add_exp(self.ln_tail[i + 1], (1.0 - t).ln() + self.ln_cell[i]))
    }

    /// Inverse of the interpolant of `A`.
    pub fn a_inverse(&self, a: f64) -> Result<f64> {
        let av = &self.a_values;
        let (lo, hi) = (av[0], av[av.len() - 1]);
        if !(a >= lo && a <= hi) {
            return Err(Error::OutOfRange {
                what: "A",
                value: a,
                lo,
                hi,
            });
        }
        let j = av.partition_point(|&v| v <= a).clamp(1, av.len() - 1);
        let i = j - 1;
        let t = ((a - av[i]) / self.cell[i]).clamp(0.0, 1.0);
        Ok(self.grid.x(i) + t * self.grid.step)
    }

    /// `A(y) - A(x)`, computed through `D` when both points are positive.
    pub fn a_diff(&self, x: f64, y: f64) -> Result<f64> {
        if x >= 0.0 && y >= 0.0 && self.grid.kappa > 0.0 {
            let (lx, ly) = (self.ln_tail_at(x)?, self.ln_tail_at(y)?);
            Ok(lx.exp() * -(ly - lx).exp_m1())
        } else {
            Ok(self.a_at(y)? - self.a_at(x)?)
        }
    }

    /// Level `F(r)` solving `A_inf - A(F(r)) = exp(-kappa r / 2)`.
    pub fn solve_f(&self, r: f64) -> Result<f64> {
        positive("r", r)?;
        if self.grid.kappa <= 0.0 {
            return Err(Error::param("kappa", "F(r) needs kappa > 0"));
        }
        let ln_delta = -self.grid.kappa * r / 2.0;
        let lt = &self.ln_tail;
        let n = lt.len();
        if !(ln_delta <= lt[0] && ln_delta >= lt[n - 1]) {
            return Err(Error::OutOfRange {
                what: "ln delta(r)",
                value: ln_delta,
                lo: lt[n - 1],
                hi: lt[0],
            });
        }
        // ln_tail is strictly decreasing: bisect for the cell, then solve the
        // linear interpolant exactly
        let j = lt.partition_point(|&v| v > ln_delta).clamp(1, n - 1);
        let i = j - 1;
        let theta = ((lt[i] - self.ln_cell[i]).exp() * -(ln_delta - lt[i]).exp_m1()).clamp(0.0, 1.0);
        Ok(self.grid.x(i) + theta * self.grid.step)
    }

    /// Quenched probability of reaching `z` before `x` from `y`.
    pub fn exit_probability(&self, x: f64, y: f64, z: f64) -> Result<f64> {
        if !(x < y && y < z) {
            return Err(Error::param("x<y<z", format!("got x={x}, y={y}, z={z}")));
        }
        let num = self.a_diff(x, y)?;
        let den = self.a_diff(x, z)?;
        Ok((num / den).clamp(0.0, 1.0))
    }
}

pub fn solve_f(table: &ScaleTable, r: f64) -> Result<f64> {
    table.solve_f(r)
}

pub fn exit_probability(table: &ScaleTable, x: f64, y: f64, z: f64) -> Result<f64> {
    table.exit_probability(x, y, z)
}

/// Left extent that keeps a Ray-Knight profile from reaching the left end
/// of the grid except with negligible probability: solves
/// `kappa L / 2 - 5 sqrt(L) = 30`.
pub fn default_left_extent(kappa: f64) -> f64 {
    let k = kappa.max(1e-3);
    let s = (5.0 + (25.0 + 60.0 * k).sqrt()) / k;
    s * s
}
