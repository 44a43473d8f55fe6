//! The small-deviation constant `c1(k)`:
//! `inf { (1/2) int_0^1 |phi'|^2 : phi(0) = 0, int_0^1 (1-v)^{1/k-2} |phi|^2 >= 1 }`.
//!
//! Cost and constraint are sums over coordinates of the same scalar
//! functionals, so the infimum is the scalar one: half the smallest
//! eigenvalue of `-phi'' = mu w phi`, `phi(0) = 0`, `phi'(1) = 0`.

use serde::{Deserialize, Serialize};

use crate::quad::adaptive_simpson;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct C1Problem {
    pub kappa: f64,
    /// Number of cells of the coarse mesh; the fine mesh has twice as many.
    pub mesh: usize,
    /// Dimension of `phi`.
    pub coords: usize,
}

impl C1Problem {
    pub fn new(kappa: f64, mesh: usize) -> Result<Self> {
        let p = C1Problem { kappa, mesh, coords: 1 };
        p.validate()?;
        Ok(p)
    }

    pub fn with_coords(mut self, coords: usize) -> Self {
        self.coords = coords;
        self
    }

    fn validate(&self) -> Result<()> {
        check_kappa(self.kappa)?;
        if self.mesh < 16 {
            return Err(Error::param("mesh", format!("must be >= 16, got {}", self.mesh)));
        }
        if self.coords == 0 {
            return Err(Error::param("coords", "must be >= 1"));
        }
        Ok(())
    }

    /// Exponent of the weight `(1 - v)^p`.
    pub fn power(&self) -> f64 {
        1.0 / self.kappa - 2.0
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa < 1.0 {
        Ok(())
    } else {
        Err(Error::param(
            "kappa",
            format!("weight integrable only for 0 < kappa < 1, got {kappa}"),
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C1Solution {
    /// Richardson extrapolation of the two mesh values.
    pub value: f64,
    pub coarse: f64,
    pub fine: f64,
    /// Ground state on the fine mesh (first coordinate), nodes `1..=n`.
    pub ground_state: Vec<f64>,
    pub single_signed: bool,
}

/// Half the smallest eigenvalue on meshes `mesh` and `2 mesh`, extrapolated
/// assuming second-order convergence.
pub fn c1_eigen(problem: &C1Problem) -> Result<C1Solution> {
    problem.validate()?;
    let (coarse, _) = half_eigen(problem, problem.mesh)?;
    let (fine, state) = half_eigen(problem, 2 * problem.mesh)?;
    let first: Vec<f64> = state.iter().step_by(problem.coords).copied().collect();
    let single_signed = first.iter().all(|&x| x > 0.0) || first.iter().all(|&x| x < 0.0);
    Ok(C1Solution {
        value: (4.0 * fine - coarse) / 3.0,
        coarse,
        fine,
        ground_state: first,
        single_signed,
    })
}

/// Lumped mass: `int w * hat_i` over each node's support, in closed form.
fn lumped_mass(p: f64, n: usize) -> Vec<f64> {
    let h = 1.0 / n as f64;
    let mut m = vec![0.0; n + 1];
    for i in 0..n {
        // cell [v_i, v_{i+1}] is s = 1 - v in [s_b, s_a]
        let s_a = 1.0 - i as f64 * h;
        let s_b = 1.0 - (i + 1) as f64 * h;
        let i0 = (s_a.powf(p + 1.0) - s_b.powf(p + 1.0)) / (p + 1.0);
        let i1 = (s_a.powf(p + 2.0) - s_b.powf(p + 2.0)) / (p + 2.0);
        let right = ((s_a * i0 - i1) / h).max(0.0);
        m[i + 1] += right;
        m[i] += i0 - right;
    }
    m
}

/// Solves `K x = b` for the stiffness matrix of `-phi''` with `phi(0) = 0`
/// and a free right end (unknowns at nodes `1..=n`).
fn stiffness_solve(n: usize, h: f64, b: &[f64], out: &mut [f64], scratch: &mut [f64]) {
    // diagonal 2/h (last 1/h), off-diagonal -1/h; Thomas algorithm
    let off = -1.0 / h;
    let mut diag = 2.0 / h;
    scratch[0] = off / diag;
    out[0] = b[0] / diag;
    for i in 1..n {
        let d = if i == n - 1 { 1.0 / h } else { 2.0 / h };
        diag = d - off * scratch[i - 1];
        scratch[i] = off / diag;
        out[i] = (b[i] - off * out[i - 1]) / diag;
    }
    for i in (0..n - 1).rev() {
        out[i] -= scratch[i] * out[i + 1];
    }
}

fn stiffness_form(x: &[f64], h: f64) -> f64 {
    let mut prev = 0.0;
    let mut sum = 0.0;
    for &v in x {
        sum += (v - prev) * (v - prev);
        prev = v;
    }
    sum / h
}

/// Inverse iteration on `K phi = mu M phi`; returns `mu / 2` and the
/// interleaved ground state.
fn half_eigen(problem: &C1Problem, n: usize) -> Result<(f64, Vec<f64>)> {
    let d = problem.coords;
    let h = 1.0 / n as f64;
    let mass = lumped_mass(problem.power(), n);
    let mass = &mass[1..];
    // distinct positive start shapes per coordinate
    let mut x: Vec<f64> = (0..n * d)
        .map(|k| {
            let (i, c) = (k / d, k % d);
            let v = (i + 1) as f64 * h;
            v.powf(1.0 + 0.5 * c as f64) * (1.0 + c as f64)
        })
        .collect();
    let mut rhs = vec![0.0; n];
    let mut sol = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut mu_prev = f64::INFINITY;
    for _ in 0..10_000 {
        let mut ka = 0.0;
        let mut ma = 0.0;
        for c in 0..d {
            for i in 0..n {
                rhs[i] = mass[i] * x[i * d + c];
            }
            stiffness_solve(n, h, &rhs, &mut sol, &mut scratch);
            for i in 0..n {
                x[i * d + c] = sol[i];
            }
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
        for c in 0..d {
            let col: Vec<f64> = (0..n).map(|i| x[i * d + c]).collect();
            ka += stiffness_form(&col, h);
            ma += col.iter().zip(mass).map(|(v, m)| m * v * v).sum::<f64>();
        }
        let mu = ka / ma;
        if !mu.is_finite() {
            return Err(Error::NonFinite("c1 eigen-iteration"));
        }
        if (mu - mu_prev).abs() <= 1e-12 * mu {
            return Ok((0.5 * mu, x));
        }
        mu_prev = mu;
    }
    Err(Error::NonConvergence("c1 eigen-iteration"))
}

/// `B(a, b) = int_0^1 v^{a-1} (1-v)^{b-1} dv` for `a >= 1`, `b > 0`.
///
/// Substituting `1 - v = t^{1/b}` removes the endpoint singularity:
/// `B = (1/b) int_0^1 (1 - t^{1/b})^{a-1} dt`.
pub fn beta_integral(a: f64, b: f64) -> Result<f64> {
    if !(a >= 1.0 && b > 0.0) {
        return Err(Error::param("a, b", format!("need a >= 1, b > 0, got {a}, {b}")));
    }
    let f = |t: f64| (1.0 - t.powf(1.0 / b)).max(0.0).powf(a - 1.0);
    Ok(adaptive_simpson(&f, 0.0, 1.0, 1e-13) / b)
}

/// `(1 / (2 B(2, 1/k - 1)), (1/2) / B(3, 1/k - 1))`: the Cauchy-Schwarz
/// lower bound and the value of the trial function `phi(v) = v`.
pub fn c1_bounds(kappa: f64) -> Result<(f64, f64)> {
    check_kappa(kappa)?;
    let b = 1.0 / kappa - 1.0;
    Ok((0.5 / beta_integral(2.0, b)?, 0.5 / beta_integral(3.0, b)?))
}
