//! Finite-difference reference solver for the viscous Burgers equation, the
//! stationary-kink exact solution, and PINN-versus-reference error metrics.
//!
//! Discretization on nodes `x_j = -5 + j Δx`:
//!
//! - convection in conservative form with κ = 1/3 upwind-biased
//!   reconstruction and a local Lax-Friedrichs (Rusanov) interface flux,
//! - second-order central diffusion,
//! - SSP-RK3 time stepping,
//! - boundary nodes frozen at their initial values (zero for the ensembles).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{solution_values, IcFunction, IcValue, InitialCondition, ModelParams};
use crate::sampling::{X_MAX, X_MIN};

/// Largest accepted `Δt (2ν/Δx² + max|u|/Δx)`.
pub const STABILITY_LIMIT: f64 = 1.0;
/// Fraction of the limit used by [`FdGrid::stable`].
pub const SAFETY: f64 = 0.4;

const KAPPA: f64 = 1.0 / 3.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdGrid {
    pub n_x: usize,
    pub dt: f64,
    pub t_final: f64,
    pub nu: f64,
    /// Snapshots are taken at `k * t_final / n_snapshots`, `k = 0..=n_snapshots`.
    pub n_snapshots: usize,
}

impl FdGrid {
    /// Checks the diffusive part of the stability bound; the convective part
    /// depends on the initial condition and is checked by [`solve_fd`].
    pub fn new(n_x: usize, dt: f64, t_final: f64, nu: f64, n_snapshots: usize) -> Result<Self> {
        if n_x < 3 {
            return Err(Error::config("n_x", format!("need at least 3 nodes, got {n_x}")));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::config("nu", format!("must be > 0, got {nu}")));
        }
        if !(t_final >= 0.0 && t_final.is_finite()) {
            return Err(Error::config("t_final", format!("must be >= 0, got {t_final}")));
        }
        if n_snapshots == 0 {
            return Err(Error::config("n_snapshots", "must be at least 1"));
        }
        let grid = Self {
            n_x,
            dt,
            t_final,
            nu,
            n_snapshots,
        };
        if dt.is_nan() || dt <= 0.0 || grid.stability_number(0.0) > STABILITY_LIMIT {
            return Err(Error::Unstable(format!(
                "dt = {dt:e} exceeds the diffusion bound {:e} for nu = {nu}, dx = {:e}",
                STABILITY_LIMIT * grid.dx() * grid.dx() / (2.0 * nu),
                grid.dx()
            )));
        }
        Ok(grid)
    }

    /// Grid with `Δt` at [`SAFETY`] times the combined convection/diffusion bound.
    pub fn stable(n_x: usize, t_final: f64, nu: f64, u_max: f64, n_snapshots: usize) -> Result<Self> {
        let dx = (X_MAX - X_MIN) / (n_x.max(2) - 1) as f64;
        let rate = 2.0 * nu / (dx * dx) + u_max.abs() / dx;
        Self::new(n_x, SAFETY * STABILITY_LIMIT / rate, t_final, nu, n_snapshots)
    }

    pub fn dx(&self) -> f64 {
        (X_MAX - X_MIN) / (self.n_x - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n_x)
            .map(|j| if j == self.n_x - 1 { X_MAX } else { X_MIN + j as f64 * dx })
            .collect()
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        (0..=self.n_snapshots)
            .map(|k| self.t_final * k as f64 / self.n_snapshots as f64)
            .collect()
    }

    fn stability_number(&self, u_max: f64) -> f64 {
        let dx = self.dx();
        self.dt * (2.0 * self.nu / (dx * dx) + u_max / dx)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSnapshot {
    pub t: f64,
    pub values: Vec<f64>,
}

/// Burgers flux `u²/2`.
#[inline]
fn flux(u: f64) -> f64 {
    0.5 * u * u
}

/// Semi-discrete right-hand side; boundary entries are left at zero.
fn rhs(u: &[f64], nu: f64, dx: f64, out: &mut [f64], fluxes: &mut [f64]) {
    let n = u.len();
    let at = |j: isize| -> f64 {
        // Linear extrapolation for the one ghost node on each side.
        if j < 0 {
            2.0 * u[0] - u[1]
        } else if j as usize >= n {
            2.0 * u[n - 1] - u[n - 2]
        } else {
            u[j as usize]
        }
    };
    for (j, f) in fluxes.iter_mut().enumerate() {
        let j = j as isize;
        let (um, u0, u1, u2) = (at(j - 1), at(j), at(j + 1), at(j + 2));
        let ul = u0 + 0.25 * ((1.0 - KAPPA) * (u0 - um) + (1.0 + KAPPA) * (u1 - u0));
        let ur = u1 - 0.25 * ((1.0 - KAPPA) * (u2 - u1) + (1.0 + KAPPA) * (u1 - u0));
        let alpha = ul.abs().max(ur.abs());
        *f = 0.5 * (flux(ul) + flux(ur)) - 0.5 * alpha * (ur - ul);
    }
    let inv_dx = 1.0 / dx;
    let diff = nu / (dx * dx);
    out[0] = 0.0;
    out[n - 1] = 0.0;
    for j in 1..n - 1 {
        out[j] = -(fluxes[j] - fluxes[j - 1]) * inv_dx + diff * (u[j + 1] - 2.0 * u[j] + u[j - 1]);
    }
}

/// Integrates from `t = 0` to `grid.t_final`, returning the snapshots.
pub fn solve_fd<I: InitialCondition + ?Sized>(ic: &I, grid: &FdGrid) -> Result<Vec<FieldSnapshot>> {
    let xs = grid.nodes();
    let mut u: Vec<f64> = xs.iter().map(|&x| ic.value(x)).collect();
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("ic", "initial condition is not finite on the grid"));
    }
    let u_max = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let number = grid.stability_number(u_max);
    if number > STABILITY_LIMIT {
        return Err(Error::Unstable(format!(
            "dt = {:e} gives stability number {number:.3} > {STABILITY_LIMIT} for max|u0| = {u_max:.3}",
            grid.dt
        )));
    }

    let n = u.len();
    let dx = grid.dx();
    let mut k = vec![0.0; n];
    let mut fluxes = vec![0.0; n - 1];
    let mut u1 = vec![0.0; n];
    let mut u2 = vec![0.0; n];
    let times = grid.snapshot_times();
    let mut out = Vec::with_capacity(times.len());
    out.push(FieldSnapshot {
        t: 0.0,
        values: u.clone(),
    });
    for w in times.windows(2) {
        let span = w[1] - w[0];
        let steps = (span / grid.dt).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for _ in 0..steps {
            rhs(&u, grid.nu, dx, &mut k, &mut fluxes);
            for j in 0..n {
                u1[j] = u[j] + h * k[j];
            }
            rhs(&u1, grid.nu, dx, &mut k, &mut fluxes);
            for j in 0..n {
                u2[j] = 0.75 * u[j] + 0.25 * (u1[j] + h * k[j]);
            }
            rhs(&u2, grid.nu, dx, &mut k, &mut fluxes);
            for j in 0..n {
                u[j] = (u[j] + 2.0 * (u2[j] + h * k[j])) / 3.0;
            }
        }
        if let Some(j) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::Unstable(format!("non-finite value at node {j} before t = {}", w[1])));
        }
        out.push(FieldSnapshot {
            t: w[1],
            values: u.clone(),
        });
    }
    Ok(out)
}

/// `u = -2ν tanh(x)` and its first two spatial derivatives.
pub fn exact_kink(x: f64, nu: f64) -> IcValue {
    let th = x.tanh();
    let sech2 = 1.0 - th * th;
    IcValue {
        v: -2.0 * nu * th,
        dv: -2.0 * nu * sech2,
        d2v: 4.0 * nu * sech2 * th,
    }
}

/// Stationary viscous shock of the Burgers equation. As an initial condition
/// its exact evolution is itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationaryKink {
    pub nu: f64,
}

impl InitialCondition for StationaryKink {
    fn eval(&self, x: f64) -> IcValue {
        exact_kink(x, self.nu)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub rel_l2: f64,
    pub rel_linf: f64,
}

/// Relative L2 and L∞ errors of `field` against `reference` over all
/// snapshots and nodes.
///
/// Reference snapshots are interpolated linearly in time to each field
/// snapshot; field snapshots outside the reference time span are skipped.
/// When the reference is identically zero the absolute errors are returned.
pub fn compare(field: &[FieldSnapshot], reference: &[FieldSnapshot]) -> Result<ErrorMetrics> {
    let (mut err2, mut ref2, mut err_max, mut ref_max) = (0.0, 0.0, 0.0f64, 0.0f64);
    let mut used = 0;
    const TIME_TOL: f64 = 1e-12;
    for snap in field {
        let Some(hi) = reference.iter().position(|r| r.t >= snap.t - TIME_TOL) else {
            continue;
        };
        let interp: Vec<f64> = if (reference[hi].t - snap.t).abs() <= TIME_TOL {
            reference[hi].values.clone()
        } else if hi == 0 {
            continue;
        } else {
            let (a, b) = (&reference[hi - 1], &reference[hi]);
            let s = (snap.t - a.t) / (b.t - a.t);
            a.values.iter().zip(&b.values).map(|(x, y)| x + s * (y - x)).collect()
        };
        if interp.len() != snap.values.len() {
            return Err(Error::SizeMismatch(format!(
                "field has {} nodes at t = {}, reference {}",
                snap.values.len(),
                snap.t,
                interp.len()
            )));
        }
        for (u, r) in snap.values.iter().zip(&interp) {
            let e = u - r;
            err2 += e * e;
            ref2 += r * r;
            err_max = err_max.max(e.abs());
            ref_max = ref_max.max(r.abs());
        }
        used += 1;
    }
    if used == 0 {
        return Err(Error::EmptyOverlap(format!(
            "{} field snapshots, {} reference snapshots",
            field.len(),
            reference.len()
        )));
    }
    let rel_l2 = if ref2 > 0.0 { (err2 / ref2).sqrt() } else { err2.sqrt() };
    let rel_linf = if ref_max > 0.0 { err_max / ref_max } else { err_max };
    Ok(ErrorMetrics { rel_l2, rel_linf })
}

/// Grid settings for comparing a trained model with the reference solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSpec {
    pub n_x: usize,
    pub n_snapshots: usize,
    pub t_final: f64,
    pub nus: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub ic: usize,
    pub nu: f64,
    pub rel_l2: f64,
    pub rel_linf: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub entries: Vec<EvalEntry>,
    pub median_rel_l2: f64,
    pub median_rel_linf: f64,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Largest |u0| over 2001 equally spaced nodes of the domain.
pub fn profile_max<I: InitialCondition + ?Sized>(ic: &I) -> f64 {
    (0..=2000)
        .map(|i| ic.value(X_MIN + (X_MAX - X_MIN) * i as f64 / 2000.0).abs())
        .fold(0.0, f64::max)
}

/// Reference solution for one IC and viscosity on the grid of `spec`.
pub fn reference_solution<I: InitialCondition + ?Sized>(ic: &I, nu: f64, spec: &EvalSpec) -> Result<Vec<FieldSnapshot>> {
    let grid = FdGrid::stable(spec.n_x, spec.t_final, nu, profile_max(ic), spec.n_snapshots)?;
    solve_fd(ic, &grid)
}

/// Model field for head `head` at the snapshot times and nodes of `spec`.
pub fn model_field(params: &ModelParams, ic: &IcFunction, head: usize, nu: f64, spec: &EvalSpec) -> Result<Vec<FieldSnapshot>> {
    let grid = FdGrid {
        n_x: spec.n_x,
        dt: 1.0,
        t_final: spec.t_final,
        nu,
        n_snapshots: spec.n_snapshots,
    };
    let xs = grid.nodes();
    grid.snapshot_times()
        .into_iter()
        .map(|t| {
            let points: Vec<[f64; 3]> = xs.iter().map(|&x| [x, t, nu]).collect();
            Ok(FieldSnapshot {
                t,
                values: solution_values(params, ic, head, &points)?,
            })
        })
        .collect()
}

/// Per-(IC, ν) errors of the model against the reference solver, plus medians.
pub fn evaluate(params: &ModelParams, ics: &[IcFunction], spec: &EvalSpec) -> Result<EvalReport> {
    if ics.len() != params.n_heads() {
        return Err(Error::SizeMismatch(format!(
            "{} initial conditions for {} heads",
            ics.len(),
            params.n_heads()
        )));
    }
    if spec.nus.is_empty() {
        return Err(Error::config("nus", "no viscosities to evaluate"));
    }
    let mut entries = Vec::new();
    for (i, ic) in ics.iter().enumerate() {
        for &nu in &spec.nus {
            let reference = reference_solution(ic, nu, spec)?;
            let field = model_field(params, ic, i, nu, spec)?;
            let m = compare(&field, &reference)?;
            entries.push(EvalEntry {
                ic: i,
                nu,
                rel_l2: m.rel_l2,
                rel_linf: m.rel_linf,
            });
        }
    }
    let l2: Vec<f64> = entries.iter().map(|e| e.rel_l2).collect();
    let linf: Vec<f64> = entries.iter().map(|e| e.rel_linf).collect();
    Ok(EvalReport {
        median_rel_l2: median(&l2),
        median_rel_linf: median(&linf),
        entries,
    })
}
