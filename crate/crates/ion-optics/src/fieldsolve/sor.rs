//! Red-black successive over-relaxation for the discrete Laplace equation.
//!
//! Free nodes relax toward the mean of their six neighbours; fixed nodes
//! (electrodes, enclosure ground, refined-region interface) keep their
//! Dirichlet values. The update order is red-black, so a node only ever
//! reads neighbours of the other color and sweeps parallelize without
//! changing the result.
//!
//! For grids with odd transverse node counts the two colors are stored as
//! packed contiguous arrays (flat-index parity equals geometric parity when
//! `nx` and `ny` are odd), which makes neighbour access six strided streams.
//! Other grids fall back to an unpacked sequential sweep.

use crate::error::{Error, Result};
use crate::exec::ExecMode;
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Convergence record of one grid solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub sweeps: usize,
    /// Max |mean(neighbours) - value| over free nodes at termination.
    pub final_residual: f64,
    /// Residual threshold the solve ran to.
    pub residual_target: f64,
    /// Estimated solution-error bound implied by the residual target.
    pub error_target: f64,
    pub omega: f64,
}

/// Options for [`solve_laplace`] and the basis solver built on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Solution-error target relative to a unit boundary voltage. The
    /// residual threshold is this times the smallest eigenvalue of the
    /// mean-of-neighbours Laplacian (box estimate), so the remaining
    /// iteration error is bounded by the tolerance even in the smoothest
    /// mode.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Residual check cadence in sweeps.
    pub check_every: usize,
    /// Over-relaxation factor; `None` picks the standard optimal estimate
    /// for the grid dimensions.
    pub omega: Option<f64>,
    /// Warm-start large grids from a solve at twice the spacing.
    pub cascadic: bool,
    pub mode: ExecMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-6,
            max_sweeps: 100_000,
            check_every: 25,
            omega: None,
            cascadic: true,
            mode: ExecMode::Auto,
        }
    }
}

impl SolverOptions {
    pub fn with_tolerance(tolerance: f64) -> Self {
        SolverOptions {
            tolerance,
            ..Default::default()
        }
    }
}

/// Smallest eigenvalue of `I - M` (M = neighbour averaging) for a fully
/// Dirichlet box of the given node counts. Interior electrodes only shrink
/// the domain, so this is a conservative lower bound.
pub fn lambda_min_estimate(nx: usize, ny: usize, nz: usize) -> f64 {
    let c = |n: usize| (std::f64::consts::PI / (n.max(3) - 1) as f64).cos();
    1.0 - (c(nx) + c(ny) + c(nz)) / 3.0
}

/// Standard optimal omega estimate for red-black SOR on the given grid.
pub fn omega_estimate(nx: usize, ny: usize, nz: usize) -> f64 {
    let c = |n: usize| (std::f64::consts::PI / (n.max(3) - 1) as f64).cos();
    let rho = (c(nx) + c(ny) + c(nz)) / 3.0;
    let om = 2.0 / (1.0 + (1.0 - rho * rho).sqrt());
    om.clamp(1.0, 1.995)
}

/// Solve the Laplace equation on a flat grid.
///
/// `fixed[i]` marks Dirichlet nodes, `values[i]` holds their boundary
/// values on entry (and an optional initial guess on free nodes). Returns
/// the solved values and convergence stats.
pub fn solve_laplace(
    nx: usize,
    ny: usize,
    nz: usize,
    fixed: &[u8],
    values: &mut [f64],
    opts: &SolverOptions,
) -> Result<SolveStats> {
    let n = nx * ny * nz;
    assert_eq!(fixed.len(), n);
    assert_eq!(values.len(), n);
    let lambda = lambda_min_estimate(nx, ny, nz);
    let residual_target = opts.tolerance * lambda;
    let omega_final = opts.omega.unwrap_or_else(|| omega_estimate(nx, ny, nz));

    if nx < 3 || ny < 3 || nz < 3 {
        return Ok(SolveStats {
            sweeps: 0,
            final_residual: 0.0,
            residual_target,
            error_target: opts.tolerance,
            omega: omega_final,
        });
    }

    let packed = nx % 2 == 1 && ny % 2 == 1;
    let mut history = Vec::new();
    let mut sweeps = 0usize;
    let mut residual = f64::INFINITY;

    if packed {
        let mut p = Packed::new(nx, ny, nz, fixed, values);
        // Chebyshev-style omega ramp for a stable start.
        let rho = {
            let c = |n: usize| (std::f64::consts::PI / (n - 1) as f64).cos();
            (c(nx) + c(ny) + c(nz)) / 3.0
        };
        let mut omega = 1.0f64;
        while sweeps < opts.max_sweeps {
            let batch = opts.check_every.min(opts.max_sweeps - sweeps);
            for _ in 0..batch {
                p.sweep(omega, opts.mode);
                omega = if opts.omega.is_some() {
                    omega_final
                } else {
                    (1.0 / (1.0 - 0.25 * rho * rho * omega)).min(omega_final)
                };
            }
            sweeps += batch;
            residual = p.residual(opts.mode);
            history.push(residual);
            if residual <= residual_target {
                break;
            }
        }
        p.unpack(values);
    } else {
        while sweeps < opts.max_sweeps {
            let batch = opts.check_every.min(opts.max_sweeps - sweeps);
            for _ in 0..batch {
                unpacked_sweep(nx, ny, nz, fixed, values, omega_final);
            }
            sweeps += batch;
            residual = unpacked_residual(nx, ny, nz, fixed, values);
            history.push(residual);
            if residual <= residual_target {
                break;
            }
        }
    }

    if residual > residual_target {
        return Err(Error::SolverDiverged {
            residual,
            target: residual_target,
            sweeps,
            history,
        });
    }
    Ok(SolveStats {
        sweeps,
        final_residual: residual,
        residual_target,
        error_target: opts.tolerance,
        omega: omega_final,
    })
}

const CHUNK: usize = 1 << 15;

/// Color-packed storage: red holds nodes with even flat index, black odd.
/// Valid when nx and ny are odd (flat parity == (ix+iy+iz) parity).
struct Packed {
    nx: usize,
    nxny: usize,
    red: Vec<f64>,
    black: Vec<f64>,
    red_free: Vec<u8>,
    black_free: Vec<u8>,
}

impl Packed {
    fn new(nx: usize, ny: usize, nz: usize, fixed: &[u8], values: &[f64]) -> Self {
        let n = nx * ny * nz;
        let nr = n.div_ceil(2);
        let nb = n / 2;
        let mut red = vec![0.0; nr];
        let mut black = vec![0.0; nb];
        let mut red_free = vec![0u8; nr];
        let mut black_free = vec![0u8; nb];
        for f in 0..n {
            let free = (fixed[f] == 0) as u8;
            if f % 2 == 0 {
                red[f / 2] = values[f];
                red_free[f / 2] = free;
            } else {
                black[f / 2] = values[f];
                black_free[f / 2] = free;
            }
        }
        Packed {
            nx,
            nxny: nx * ny,
            red,
            black,
            red_free,
            black_free,
        }
    }

    fn unpack(&self, values: &mut [f64]) {
        for (j, v) in self.red.iter().enumerate() {
            values[2 * j] = *v;
        }
        for (j, v) in self.black.iter().enumerate() {
            values[2 * j + 1] = *v;
        }
    }

    /// Packed neighbour offsets (sub_x, add_x, sub_y, add_y, sub_z, add_z)
    /// for the given color. Red cell j is flat 2j; black cell j is 2j+1.
    fn offsets(&self, red: bool) -> [usize; 6] {
        let (nx, nxny) = (self.nx, self.nxny);
        if red {
            [1, 0, (nx + 1) / 2, (nx - 1) / 2, (nxny + 1) / 2, (nxny - 1) / 2]
        } else {
            [0, 1, (nx - 1) / 2, (nx + 1) / 2, (nxny - 1) / 2, (nxny + 1) / 2]
        }
    }

    fn sweep(&mut self, omega: f64, mode: ExecMode) {
        let offs = self.offsets(true);
        sweep_color(&mut self.red, &self.red_free, &self.black, offs, omega, mode);
        let offs = self.offsets(false);
        sweep_color(&mut self.black, &self.black_free, &self.red, offs, omega, mode);
    }

    fn residual(&self, mode: ExecMode) -> f64 {
        let r = residual_color(&self.red, &self.red_free, &self.black, self.offsets(true), mode);
        let b = residual_color(
            &self.black,
            &self.black_free,
            &self.red,
            self.offsets(false),
            mode,
        );
        r.max(b)
    }
}

#[inline(always)]
fn relax_span(
    vals: &mut [f64],
    free: &[u8],
    other: &[f64],
    start: usize,
    offs: [usize; 6],
    omega: f64,
) {
    let [sx, ax, sy, ay, sz, az] = offs;
    for (k, v) in vals.iter_mut().enumerate() {
        if free[k] == 0 {
            continue;
        }
        let j = start + k;
        let s = other[j - sx]
            + other[j + ax]
            + other[j - sy]
            + other[j + ay]
            + other[j - sz]
            + other[j + az];
        *v += omega * (s * (1.0 / 6.0) - *v);
    }
}

fn sweep_color(
    vals: &mut [f64],
    free: &[u8],
    other: &[f64],
    offs: [usize; 6],
    omega: f64,
    mode: ExecMode,
) {
    let run_par = matches!(mode, ExecMode::Auto) && cfg!(feature = "parallel");
    if run_par {
        #[cfg(feature = "parallel")]
        {
            vals.par_chunks_mut(CHUNK)
                .zip(free.par_chunks(CHUNK))
                .enumerate()
                .for_each(|(ci, (vc, fc))| relax_span(vc, fc, other, ci * CHUNK, offs, omega));
            return;
        }
    }
    for (ci, (vc, fc)) in vals.chunks_mut(CHUNK).zip(free.chunks(CHUNK)).enumerate() {
        relax_span(vc, fc, other, ci * CHUNK, offs, omega);
    }
}

#[inline(always)]
fn residual_span(
    vals: &[f64],
    free: &[u8],
    other: &[f64],
    start: usize,
    offs: [usize; 6],
) -> f64 {
    let [sx, ax, sy, ay, sz, az] = offs;
    let mut worst = 0.0f64;
    for (k, v) in vals.iter().enumerate() {
        if free[k] == 0 {
            continue;
        }
        let j = start + k;
        let s = other[j - sx]
            + other[j + ax]
            + other[j - sy]
            + other[j + ay]
            + other[j - sz]
            + other[j + az];
        worst = worst.max((s * (1.0 / 6.0) - v).abs());
    }
    worst
}

fn residual_color(
    vals: &[f64],
    free: &[u8],
    other: &[f64],
    offs: [usize; 6],
    mode: ExecMode,
) -> f64 {
    let run_par = matches!(mode, ExecMode::Auto) && cfg!(feature = "parallel");
    if run_par {
        #[cfg(feature = "parallel")]
        {
            return vals
                .par_chunks(CHUNK)
                .zip(free.par_chunks(CHUNK))
                .enumerate()
                .map(|(ci, (vc, fc))| residual_span(vc, fc, other, ci * CHUNK, offs))
                .reduce(|| 0.0, f64::max);
        }
    }
    vals.chunks(CHUNK)
        .zip(free.chunks(CHUNK))
        .enumerate()
        .map(|(ci, (vc, fc))| residual_span(vc, fc, other, ci * CHUNK, offs))
        .fold(0.0, f64::max)
}

fn unpacked_sweep(nx: usize, ny: usize, nz: usize, fixed: &[u8], values: &mut [f64], omega: f64) {
    let nxny = nx * ny;
    for color in 0..2usize {
        for iz in 1..nz - 1 {
            for iy in 1..ny - 1 {
                let row = nx * (iy + ny * iz);
                for ix in 1..nx - 1 {
                    if (ix + iy + iz) % 2 != color {
                        continue;
                    }
                    let f = row + ix;
                    if fixed[f] != 0 {
                        continue;
                    }
                    let s = values[f - 1]
                        + values[f + 1]
                        + values[f - nx]
                        + values[f + nx]
                        + values[f - nxny]
                        + values[f + nxny];
                    values[f] += omega * (s * (1.0 / 6.0) - values[f]);
                }
            }
        }
    }
}

fn unpacked_residual(nx: usize, ny: usize, nz: usize, fixed: &[u8], values: &[f64]) -> f64 {
    let nxny = nx * ny;
    let mut worst = 0.0f64;
    for iz in 1..nz - 1 {
        for iy in 1..ny - 1 {
            let row = nx * (iy + ny * iz);
            for ix in 1..nx - 1 {
                let f = row + ix;
                if fixed[f] != 0 {
                    continue;
                }
                let s = values[f - 1]
                    + values[f + 1]
                    + values[f - nx]
                    + values[f + nx]
                    + values[f - nxny]
                    + values[f + nxny];
                worst = worst.max((s * (1.0 / 6.0) - values[f]).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1D-like problem embedded in 3D: fixed plates at the z faces, lateral
    /// faces mirroring the interior is not possible here, so compare the
    /// packed and unpacked kernels against each other instead.
    fn toy_problem(nx: usize, ny: usize, nz: usize) -> (Vec<u8>, Vec<f64>) {
        let n = nx * ny * nz;
        let mut fixed = vec![0u8; n];
        let mut values = vec![0.0f64; n];
        for iz in 0..nz {
            for iy in 0..ny {
                for ix in 0..nx {
                    let f = ix + nx * (iy + ny * iz);
                    let boundary = ix == 0
                        || iy == 0
                        || iz == 0
                        || ix == nx - 1
                        || iy == ny - 1
                        || iz == nz - 1;
                    if boundary {
                        fixed[f] = 1;
                        values[f] = iz as f64 / (nz - 1) as f64;
                    }
                }
            }
        }
        (fixed, values)
    }

    #[test]
    fn packed_and_unpacked_agree() {
        let (nx, ny, nz) = (11, 11, 9);
        let (fixed, base) = toy_problem(nx, ny, nz);
        let opts = SolverOptions {
            tolerance: 1e-9,
            cascadic: false,
            ..Default::default()
        };

        let mut a = base.clone();
        solve_laplace(nx, ny, nz, &fixed, &mut a, &opts).unwrap();

        // force the unpacked path by lying about packing via even nx grid:
        // instead solve the same problem sequentially with the generic kernel
        let mut b = base.clone();
        for _ in 0..4000 {
            unpacked_sweep(nx, ny, nz, &fixed, &mut b, 1.8);
        }
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn solution_error_bound_holds_for_linear_profile() {
        // With boundary values linear in z on every face, the exact discrete
        // solution is that same linear profile.
        let (nx, ny, nz) = (13, 13, 17);
        let (fixed, mut values) = toy_problem(nx, ny, nz);
        let opts = SolverOptions {
            tolerance: 1e-8,
            cascadic: false,
            ..Default::default()
        };
        let stats = solve_laplace(nx, ny, nz, &fixed, &mut values, &opts).unwrap();
        assert!(stats.final_residual <= stats.residual_target);
        for iz in 0..nz {
            let expect = iz as f64 / (nz - 1) as f64;
            for iy in 1..ny - 1 {
                for ix in 1..nx - 1 {
                    let got = values[ix + nx * (iy + ny * iz)];
                    assert!(
                        (got - expect).abs() < 1e-7,
                        "node ({ix},{iy},{iz}): {got} vs {expect}"
                    );
                }
            }
        }
    }

    #[test]
    fn non_convergence_reports_history() {
        let (nx, ny, nz) = (21, 21, 21);
        let (fixed, mut values) = toy_problem(nx, ny, nz);
        let opts = SolverOptions {
            tolerance: 1e-12,
            max_sweeps: 3,
            check_every: 1,
            cascadic: false,
            ..Default::default()
        };
        match solve_laplace(nx, ny, nz, &fixed, &mut values, &opts) {
            Err(Error::SolverDiverged { history, .. }) => assert_eq!(history.len(), 3),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn sequential_and_parallel_modes_match_exactly() {
        let (nx, ny, nz) = (15, 15, 15);
        let (fixed, base) = toy_problem(nx, ny, nz);
        let solve = |mode| {
            let mut v = base.clone();
            let opts = SolverOptions {
                tolerance: 1e-7,
                cascadic: false,
                mode,
                ..Default::default()
            };
            solve_laplace(nx, ny, nz, &fixed, &mut v, &opts).unwrap();
            v
        };
        let a = solve(ExecMode::Auto);
        let b = solve(ExecMode::Sequential);
        assert_eq!(a, b);
    }
}
