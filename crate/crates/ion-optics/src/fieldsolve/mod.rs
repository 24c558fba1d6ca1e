//! Finite-difference Laplace solver and field evaluation.
//!
//! [`BasisSet::solve`] produces one unit-voltage potential grid per
//! electrode (1 V on that electrode, 0 V on everything else including the
//! grounded enclosure). Any voltage assignment is then a weighted sum of
//! basis grids; [`BasisSet::combine`] materializes the sum for fast
//! sampling along trajectories.
//!
//! Two-region scheme: the coarse grid covers the whole domain; the refined
//! grid near the chip re-solves with Dirichlet values interpolated from the
//! converged coarse solution on its open faces. Field evaluation picks the
//! refined grid whenever the sampling stencil fits inside it.
//!
//! Segmented electrode groups are solved once per group where the geometry
//! permits: the remaining three segment potentials are exact 90-degree grid
//! rotations of the first.

mod grid;
pub mod io;
mod sor;

pub use grid::{FieldSample, ScalarGrid};
pub use sor::{lambda_min_estimate, omega_estimate, SolveStats, SolverOptions};

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::geometry::{
    build_domain, CellClass, DetectorRegion, ElectrodeTable, GeometrySpec, LabeledGrid,
    VoxelDomain, LABEL_ELECTRODE_BASE, LABEL_FREE, LABEL_GROUND, LABEL_INTERFACE,
};

/// Anything the tracer can fly a particle through.
pub trait FieldEnvironment: Sync {
    /// Potential and field at `p` and time `t`. Points outside the solved
    /// region are clamped; use [`FieldEnvironment::classify`] for validity.
    fn sample(&self, p: [f64; 3], t: f64) -> FieldSample;
    /// Occupancy at `p`.
    fn classify(&self, p: [f64; 3]) -> CellClass;
    /// Grid spacing in effect at `p` (sets hit-bisection resolution).
    fn local_spacing(&self, p: [f64; 3]) -> f64;
    /// Detector plane, if this environment has one.
    fn detector_plane_z(&self) -> Option<f64>;
    /// Classify a detector-plane crossing.
    fn classify_impact(&self, _x: f64, _y: f64) -> DetectorRegion {
        DetectorRegion::Outside
    }
    /// Whether fields change over time (disables energy bookkeeping).
    fn is_time_dependent(&self) -> bool {
        false
    }
}

/// Basis potentials of one electrode.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisPotentials {
    pub coarse: Vec<f64>,
    pub refined: Option<Vec<f64>>,
}

/// Convergence record for one electrode's basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodeSolveStats {
    pub coarse: SolveStats,
    pub refined: Option<SolveStats>,
    /// Set when this basis is a 90-degree rotation of another electrode's.
    pub derived_from: Option<usize>,
}

impl ElectrodeSolveStats {
    pub fn worst_residual(&self) -> f64 {
        self.refined
            .as_ref()
            .map(|r| r.final_residual)
            .unwrap_or(0.0)
            .max(self.coarse.final_residual)
    }

    pub fn total_sweeps(&self) -> usize {
        self.coarse.sweeps + self.refined.as_ref().map(|r| r.sweeps).unwrap_or(0)
    }
}

/// One unit-voltage potential grid per electrode.
#[derive(Debug, Clone)]
pub struct BasisSet {
    pub domain: VoxelDomain,
    pub per_electrode: Vec<BasisPotentials>,
    pub stats: Vec<ElectrodeSolveStats>,
    pub options: SolverOptions,
}

/// Directly solved potential for one full voltage assignment.
#[derive(Debug, Clone)]
pub struct SolvedPotential {
    pub coarse: Vec<f64>,
    pub refined: Option<Vec<f64>>,
    pub stats: Vec<SolveStats>,
}

fn fixed_flags(grid: &LabeledGrid) -> Vec<u8> {
    grid.labels
        .iter()
        .map(|&l| (l != LABEL_FREE) as u8)
        .collect()
}

/// Fill the value array for a solve: Dirichlet values on fixed nodes,
/// initial guess on free nodes.
fn init_values(
    grid: &LabeledGrid,
    bc: &[f64],
    interface_src: Option<&ScalarGrid>,
    init_src: Option<&ScalarGrid>,
    mode: ExecMode,
) -> Vec<f64> {
    let (nx, ny) = (grid.nx, grid.ny);
    let plane = nx * ny;
    let h = grid.spacing;
    let origin = grid.origin;
    let labels = &grid.labels;
    let mut values = vec![0.0f64; grid.len()];
    exec::for_chunks_mut(mode, &mut values, plane, |start, chunk| {
        let iz = start / plane;
        let z = origin[2] + h * iz as f64;
        for (k, v) in chunk.iter_mut().enumerate() {
            let iy = k / nx;
            let ix = k % nx;
            let label = labels[start + k];
            let pos = [origin[0] + h * ix as f64, origin[1] + h * iy as f64, z];
            *v = match label {
                LABEL_FREE => init_src.map(|g| g.value(pos)).unwrap_or(0.0),
                LABEL_GROUND => 0.0,
                LABEL_INTERFACE => interface_src
                    .expect("interface nodes need a coarse source")
                    .value(pos),
                l => bc[(l - LABEL_ELECTRODE_BASE) as usize],
            };
        }
    });
    values
}

fn solve_one(
    grid: &LabeledGrid,
    bc: &[f64],
    interface_src: Option<&ScalarGrid>,
    init_src: Option<&ScalarGrid>,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveStats)> {
    let fixed = fixed_flags(grid);
    let mut values = init_values(grid, bc, interface_src, init_src, opts.mode);
    let stats = sor::solve_laplace(grid.nx, grid.ny, grid.nz, &fixed, &mut values, opts)?;
    Ok((values, stats))
}

/// Threshold above which a coarse solve warm-starts from half resolution.
const CASCADE_NODES: usize = 400_000;

fn half_resolution_spec(spec: &GeometrySpec) -> GeometrySpec {
    let mut s = spec.clone();
    s.coarse_spacing *= 2.0;
    s.refined = None;
    s
}

fn solve_coarse_cascaded(
    domain: &VoxelDomain,
    bc: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveStats)> {
    let init = if opts.cascadic && domain.coarse.len() > CASCADE_NODES {
        build_domain(&half_resolution_spec(&domain.spec))
            .ok()
            .and_then(|half| {
                solve_coarse_cascaded(&half, bc, opts)
                    .ok()
                    .map(|(v, _)| ScalarGrid::from_labeled(&half.coarse, v))
            })
    } else {
        None
    };
    solve_one(&domain.coarse, bc, None, init.as_ref(), opts)
}

/// Solve the potential for one full voltage assignment (`bc[e]` volts on
/// electrode `e`, enclosure grounded). Used directly for superposition
/// checks; production field evaluation goes through [`BasisSet`].
pub fn solve_assignment(
    domain: &VoxelDomain,
    bc: &[f64],
    opts: &SolverOptions,
) -> Result<SolvedPotential> {
    if bc.len() != domain.electrodes.len() {
        return Err(Error::VoltageCount {
            got: bc.len(),
            expected: domain.electrodes.len(),
        });
    }
    let (coarse, cstats) = solve_coarse_cascaded(domain, bc, opts)?;
    let mut stats = vec![cstats];
    let refined = match &domain.refined {
        None => None,
        Some(rgrid) => {
            let csrc = ScalarGrid::from_labeled(&domain.coarse, coarse.clone());
            let (rv, rstats) = solve_one(rgrid, bc, Some(&csrc), Some(&csrc), opts)?;
            stats.push(rstats);
            Some(rv)
        }
    };
    Ok(SolvedPotential {
        coarse,
        refined,
        stats,
    })
}

/// Label permutation under a +90 degree rotation: segment k of each group
/// maps to segment k+1 (cyclic), everything else to itself.
fn rotation_label_map(table: &ElectrodeTable) -> Vec<u8> {
    let n = table.len();
    let mut map: Vec<u8> = (0..LABEL_ELECTRODE_BASE as usize + n)
        .map(|l| l as u8)
        .collect();
    for (e, info) in table.entries.iter().enumerate() {
        if let Some(seg) = info.segment {
            let next = seg % 4 + 1;
            if let Some(e2) = table
                .entries
                .iter()
                .position(|o| o.group == info.group && o.segment == Some(next))
            {
                map[LABEL_ELECTRODE_BASE as usize + e] = LABEL_ELECTRODE_BASE + e2 as u8;
            }
        }
    }
    map
}

/// Does rotating the label grid by +90 degrees reproduce it under the
/// segment permutation? If so, segment basis solves can be reused.
fn grid_is_quarter_symmetric(grid: &LabeledGrid, label_map: &[u8]) -> bool {
    if grid.nx != grid.ny {
        return false;
    }
    let n = grid.nx;
    for iz in 0..grid.nz {
        for iy in 0..n {
            for ix in 0..n {
                let here = grid.labels[grid.idx(ix, iy, iz)];
                // +90 degrees: (x, y) -> (-y, x) => index (n-1-iy, ix)
                let rot = grid.labels[grid.idx(n - 1 - iy, ix, iz)];
                if rot != label_map[here as usize] {
                    return false;
                }
            }
        }
    }
    true
}

/// dst(ix, iy, iz) = src(iy, n-1-ix, iz): the solution of the +90-degree
/// rotated boundary problem.
fn rotate_quarter(src: &[f64], nx: usize, ny: usize, nz: usize) -> Vec<f64> {
    assert_eq!(nx, ny);
    let mut dst = vec![0.0f64; src.len()];
    let plane = nx * ny;
    for iz in 0..nz {
        let base = iz * plane;
        for iy in 0..ny {
            for ix in 0..nx {
                dst[base + ix + nx * iy] = src[base + iy + nx *(nx - 1 - ix)];
            }
        }
    }
    dst
}

impl BasisSet {
    /// Solve the per-electrode unit-voltage basis.
    pub fn solve(domain: VoxelDomain, opts: &SolverOptions) -> Result<BasisSet> {
        let n = domain.electrodes.len();
        let label_map = rotation_label_map(&domain.electrodes);
        let symmetric = grid_is_quarter_symmetric(&domain.coarse, &label_map)
            && domain
                .refined
                .as_ref()
                .map(|g| grid_is_quarter_symmetric(g, &label_map))
                .unwrap_or(true);

        let mut per_electrode: Vec<Option<BasisPotentials>> = vec![None; n];
        let mut stats: Vec<Option<ElectrodeSolveStats>> = vec![None; n];

        for e in 0..n {
            let info = &domain.electrodes.entries[e];
            let derivable = symmetric && matches!(info.segment, Some(s) if s > 1);
            if derivable {
                continue;
            }
            let mut bc = vec![0.0; n];
            bc[e] = 1.0;
            let solved = solve_assignment(&domain, &bc, opts)?;
            stats[e] = Some(ElectrodeSolveStats {
                coarse: solved.stats[0].clone(),
                refined: solved.stats.get(1).cloned(),
                derived_from: None,
            });
            per_electrode[e] = Some(BasisPotentials {
                coarse: solved.coarse,
                refined: solved.refined,
            });
        }

        if symmetric {
            let g = &domain.coarse;
            let rg = domain.refined.as_ref();
            for e in 0..n {
                if per_electrode[e].is_some() {
                    continue;
                }
                let info = &domain.electrodes.entries[e];
                let seg = info.segment.expect("only segments are derivable");
                let first = domain
                    .electrodes
                    .entries
                    .iter()
                    .position(|o| o.group == info.group && o.segment == Some(1))
                    .expect("segment 1 exists");
                let src = per_electrode[first]
                    .as_ref()
                    .expect("segment 1 solved first");
                let turns = (seg - 1) as usize;
                let mut coarse = src.coarse.clone();
                for _ in 0..turns {
                    coarse = rotate_quarter(&coarse, g.nx, g.ny, g.nz);
                }
                let refined = src.refined.as_ref().map(|data| {
                    let rg = rg.expect("refined grid present");
                    let mut v = data.clone();
                    for _ in 0..turns {
                        v = rotate_quarter(&v, rg.nx, rg.ny, rg.nz);
                    }
                    v
                });
                let mut st = stats[first].clone().expect("stats of segment 1");
                st.derived_from = Some(first);
                stats[e] = Some(st);
                per_electrode[e] = Some(BasisPotentials { coarse, refined });
            }
        }

        Ok(BasisSet {
            domain,
            per_electrode: per_electrode.into_iter().map(Option::unwrap).collect(),
            stats: stats.into_iter().map(Option::unwrap).collect(),
            options: opts.clone(),
        })
    }

    pub fn electrode_count(&self) -> usize {
        self.per_electrode.len()
    }

    /// Superpose the basis into a combined field for one voltage assignment.
    pub fn combine(&self, voltages: &[f64]) -> Result<CombinedField<'_>> {
        if voltages.len() != self.electrode_count() {
            return Err(Error::VoltageCount {
                got: voltages.len(),
                expected: self.electrode_count(),
            });
        }
        let active: Vec<(usize, f64)> = voltages
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, v)| *v != 0.0)
            .collect();
        let mode = self.options.mode;
        let combine_region = |srcs: &[(&[f64], f64)], len: usize| -> Vec<f64> {
            let mut out = vec![0.0f64; len];
            exec::for_chunks_mut(mode, &mut out, 1 << 15, |start, chunk| {
                for (src, v) in srcs {
                    let src = &src[start..start + chunk.len()];
                    for (o, s) in chunk.iter_mut().zip(src) {
                        *o += v * s;
                    }
                }
            });
            out
        };
        let coarse_srcs: Vec<(&[f64], f64)> = active
            .iter()
            .map(|&(e, v)| (self.per_electrode[e].coarse.as_slice(), v))
            .collect();
        let coarse_data = combine_region(&coarse_srcs, self.domain.coarse.len());
        let coarse = ScalarGrid::from_labeled(&self.domain.coarse, coarse_data);
        let refined = match self.domain.refined.as_ref() {
            None => None,
            Some(rg) => {
                let refined_srcs: Vec<(&[f64], f64)> = active
                    .iter()
                    .map(|&(e, v)| {
                        (
                            self.per_electrode[e]
                                .refined
                                .as_ref()
                                .expect("refined basis present")
                                .as_slice(),
                            v,
                        )
                    })
                    .collect();
                Some(ScalarGrid::from_labeled(
                    rg,
                    combine_region(&refined_srcs, rg.len()),
                ))
            }
        };
        Ok(CombinedField {
            domain: &self.domain,
            coarse,
            refined,
        })
    }

    /// Combined field from per-group voltages.
    pub fn combine_groups(&self, groups: &[(&str, &[f64])]) -> Result<CombinedField<'_>> {
        let v = self.domain.voltages_from_groups(groups)?;
        self.combine(&v)
    }

    /// Potential and field of an assignment at a point in free space.
    ///
    /// Unlike sampling through a [`CombinedField`], this rejects points
    /// outside the domain or inside an electrode. Intended for probing, not
    /// for per-step tracing.
    pub fn field_at(&self, voltages: &[f64], p: [f64; 3]) -> Result<FieldSample> {
        if voltages.len() != self.electrode_count() {
            return Err(Error::VoltageCount {
                got: voltages.len(),
                expected: self.electrode_count(),
            });
        }
        match self.domain.classify(p) {
            CellClass::Outside => return Err(Error::OutsideDomain(p)),
            CellClass::Electrode(e) => {
                return Err(Error::InsideElectrode {
                    point: p,
                    electrode: self.domain.electrodes.entries[e].name.clone(),
                })
            }
            CellClass::Ground => return Err(Error::OutsideDomain(p)),
            CellClass::Free => {}
        }
        // Sample each basis at the point and weight; avoids materializing a
        // combined grid for one-off probes.
        let mut out = FieldSample {
            potential: 0.0,
            e: [0.0; 3],
        };
        for (e, &v) in voltages.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let s = self.sample_basis(e, p);
            out.potential += v * s.potential;
            for k in 0..3 {
                out.e[k] += v * s.e[k];
            }
        }
        Ok(out)
    }

    /// Sample one electrode's unit basis at a point (clamped).
    pub fn sample_basis(&self, e: usize, p: [f64; 3]) -> FieldSample {
        let bp = &self.per_electrode[e];
        if let (Some(rg), Some(data)) = (self.domain.refined.as_ref(), bp.refined.as_ref()) {
            let margin = rg.spacing * 1.001;
            if rg.contains_with_margin(p, margin) {
                let g = ScalarGridRef {
                    nx: rg.nx,
                    ny: rg.ny,
                    nz: rg.nz,
                    spacing: rg.spacing,
                    origin: rg.origin,
                    data,
                };
                return g.sample(p);
            }
        }
        let cg = &self.domain.coarse;
        let g = ScalarGridRef {
            nx: cg.nx,
            ny: cg.ny,
            nz: cg.nz,
            spacing: cg.spacing,
            origin: cg.origin,
            data: &bp.coarse,
        };
        g.sample(p)
    }
}

/// Borrowed view with the same sampling math as [`ScalarGrid`].
struct ScalarGridRef<'a> {
    nx: usize,
    ny: usize,
    nz: usize,
    spacing: f64,
    origin: [f64; 3],
    data: &'a [f64],
}

impl ScalarGridRef<'_> {
    fn value(&self, p: [f64; 3]) -> f64 {
        let n = [self.nx, self.ny, self.nz];
        let mut i0 = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for k in 0..3 {
            let f = ((p[k] - self.origin[k]) / self.spacing).clamp(0.0, (n[k] - 1) as f64);
            let base = (f.floor() as usize).min(n[k] - 2);
            i0[k] = base;
            frac[k] = f - base as f64;
        }
        let (tx, ty, tz) = (frac[0], frac[1], frac[2]);
        let i = i0[0] + self.nx * (i0[1] + self.ny * i0[2]);
        let (sx, sy, sz) = (1, self.nx, self.nx * self.ny);
        let d = self.data;
        let c00 = d[i] + tx * (d[i + sx] - d[i]);
        let c10 = d[i + sy] + tx * (d[i + sx + sy] - d[i + sy]);
        let c01 = d[i + sz] + tx * (d[i + sx + sz] - d[i + sz]);
        let c11 = d[i + sy + sz] + tx * (d[i + sx + sy + sz] - d[i + sy + sz]);
        let c0 = c00 + ty * (c10 - c00);
        let c1 = c01 + ty * (c11 - c01);
        c0 + tz * (c1 - c0)
    }

    fn sample(&self, p: [f64; 3]) -> FieldSample {
        let h = self.spacing;
        let potential = self.value(p);
        let n = [self.nx, self.ny, self.nz];
        let mut e = [0.0f64; 3];
        for k in 0..3 {
            let at = |off: f64| {
                let mut q = p;
                q[k] += off;
                self.value(q)
            };
            let hi = self.origin[k] + self.spacing * (n[k] - 1) as f64;
            let room_lo = p[k] - self.origin[k];
            let room_hi = hi - p[k];
            let room = room_lo.min(room_hi);
            e[k] = if room >= 2.0 * h {
                -(8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h)
            } else if room >= h {
                -(at(h) - at(-h)) / (2.0 * h)
            } else if room_hi >= h {
                -(at(h) - potential) / h
            } else if room_lo >= h {
                -(potential - at(-h)) / h
            } else {
                0.0
            };
        }
        FieldSample { potential, e }
    }
}

/// Superposed potential grids for one static voltage assignment.
pub struct CombinedField<'a> {
    pub domain: &'a VoxelDomain,
    pub coarse: ScalarGrid,
    pub refined: Option<ScalarGrid>,
}

impl CombinedField<'_> {
    fn pick(&self, p: [f64; 3]) -> &ScalarGrid {
        if let Some(r) = &self.refined {
            if r.contains_with_margin(p, r.spacing * 1.001) {
                return r;
            }
        }
        &self.coarse
    }
}

impl FieldEnvironment for CombinedField<'_> {
    fn sample(&self, p: [f64; 3], _t: f64) -> FieldSample {
        self.pick(p).sample(p)
    }

    fn classify(&self, p: [f64; 3]) -> CellClass {
        self.domain.classify(p)
    }

    fn local_spacing(&self, p: [f64; 3]) -> f64 {
        self.domain.local_spacing(p)
    }

    fn detector_plane_z(&self) -> Option<f64> {
        Some(self.domain.detector_plane_z)
    }

    fn classify_impact(&self, x: f64, y: f64) -> DetectorRegion {
        self.domain.classify_impact(x, y)
    }
}

/// Analytic uniform-field environment for tests and benchmarks. The
/// potential is `-E . p`, consistent with the field.
#[derive(Debug, Clone)]
pub struct UniformField {
    pub e: [f64; 3],
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub detector_z: Option<f64>,
}

impl UniformField {
    pub fn new(e: [f64; 3], half_extent: f64) -> Self {
        UniformField {
            e,
            min: [-half_extent; 3],
            max: [half_extent; 3],
            detector_z: None,
        }
    }
}

impl FieldEnvironment for UniformField {
    fn sample(&self, p: [f64; 3], _t: f64) -> FieldSample {
        FieldSample {
            potential: -(self.e[0] * p[0] + self.e[1] * p[1] + self.e[2] * p[2]),
            e: self.e,
        }
    }

    fn classify(&self, p: [f64; 3]) -> CellClass {
        let inside = (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k]);
        if inside {
            CellClass::Free
        } else {
            CellClass::Outside
        }
    }

    fn local_spacing(&self, _p: [f64; 3]) -> f64 {
        (self.max[0] - self.min[0]) / 256.0
    }

    fn detector_plane_z(&self) -> Option<f64> {
        self.detector_z
    }
}
