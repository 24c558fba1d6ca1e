//! Charged-particle trajectory integration.
//!
//! Equation of motion: `m dv/dt = q (E(x, t) + v x B)` with `E` sampled from
//! a [`FieldEnvironment`] and `B` a uniform external field. Electric-only
//! motion uses adaptive Dormand-Prince 5(4); with a magnetic field the
//! integrator switches to Boris steps capped at 1/`steps_per_cyclotron` of
//! the cyclotron period.
//!
//! A step terminates the trace when it crosses the detector plane (impact
//! classified into CEM / gap / outside), enters an electrode or the
//! grounded enclosure (localized by bisection to a tenth of the local
//! voxel), leaves the domain, or exceeds the time budget.

mod integrate;
mod sample;

pub use integrate::{ErrorTolerances, State};
pub use sample::{sample_initial, EnergyConvention, InitialConditions};

use crate::constants::{ELECTRON_MASS, ELEMENTARY_CHARGE, RB87_ION_MASS};
use crate::error::{Error, Result};
use crate::exec;
use crate::fieldsolve::{BasisSet, FieldEnvironment, FieldSample};
use crate::geometry::{CellClass, DetectorRegion};
use integrate::{boris_step, dopri5_step, rk4_step, Deriv};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Particle species: mass [kg] and charge [C].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Species {
    pub mass: f64,
    pub charge: f64,
}

impl Species {
    pub fn rb87_ion() -> Self {
        Species {
            mass: RB87_ION_MASS,
            charge: ELEMENTARY_CHARGE,
        }
    }

    pub fn electron() -> Self {
        Species {
            mass: ELECTRON_MASS,
            charge: -ELEMENTARY_CHARGE,
        }
    }
}

/// Position/velocity pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub pos: [f64; 3],
    pub vel: [f64; 3],
}

impl ParticleState {
    pub fn at_rest(pos: [f64; 3]) -> Self {
        ParticleState {
            pos,
            vel: [0.0; 3],
        }
    }

    pub fn kinetic_energy(&self, species: Species) -> f64 {
        0.5 * species.mass
            * (self.vel[0] * self.vel[0] + self.vel[1] * self.vel[1] + self.vel[2] * self.vel[2])
    }
}

/// Per-electrode exponential voltage ramp:
/// `U(t) = U_target + (U_0 - U_target) exp(-t / tau)`; `tau = None` holds
/// `U_0` forever.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub u0: f64,
    pub u_target: f64,
    pub tau: Option<f64>,
}

impl ScheduleEntry {
    pub fn hold(u: f64) -> Self {
        ScheduleEntry {
            u0: u,
            u_target: u,
            tau: None,
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        match self.tau {
            None => self.u0,
            Some(tau) => self.u_target + (self.u0 - self.u_target) * (-t / tau).exp(),
        }
    }
}

/// Voltage schedule for all electrodes of a domain (indexed like the
/// electrode table).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VoltageSchedule {
    pub entries: Vec<ScheduleEntry>,
}

impl VoltageSchedule {
    pub fn static_assignment(volts: &[f64]) -> Self {
        VoltageSchedule {
            entries: volts.iter().map(|&u| ScheduleEntry::hold(u)).collect(),
        }
    }

    pub fn is_static(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.tau.is_none() || e.u0 == e.u_target)
    }

    /// Smallest finite ramp constant, if any.
    pub fn min_tau(&self) -> Option<f64> {
        self.entries
            .iter()
            .filter_map(|e| e.tau)
            .fold(None, |acc, t| Some(acc.map_or(t, |a: f64| a.min(t))))
    }

    pub fn voltages_at(&self, t: f64) -> Vec<f64> {
        self.entries.iter().map(|e| e.at(t)).collect()
    }
}

/// Time-dependent field: basis superposition re-weighted at every sample
/// with the schedule voltages (no re-solve; fields are quasi-static).
pub struct ScheduledField<'a> {
    pub basis: &'a BasisSet,
    pub schedule: &'a VoltageSchedule,
}

impl<'a> ScheduledField<'a> {
    pub fn new(basis: &'a BasisSet, schedule: &'a VoltageSchedule) -> Result<Self> {
        if schedule.entries.len() != basis.electrode_count() {
            return Err(Error::VoltageCount {
                got: schedule.entries.len(),
                expected: basis.electrode_count(),
            });
        }
        Ok(ScheduledField { basis, schedule })
    }
}

impl FieldEnvironment for ScheduledField<'_> {
    fn sample(&self, p: [f64; 3], t: f64) -> FieldSample {
        let mut out = FieldSample {
            potential: 0.0,
            e: [0.0; 3],
        };
        for (e, entry) in self.schedule.entries.iter().enumerate() {
            let u = entry.at(t);
            if u == 0.0 {
                continue;
            }
            let s = self.basis.sample_basis(e, p);
            out.potential += u * s.potential;
            for k in 0..3 {
                out.e[k] += u * s.e[k];
            }
        }
        out
    }

    fn classify(&self, p: [f64; 3]) -> CellClass {
        self.basis.domain.classify(p)
    }

    fn local_spacing(&self, p: [f64; 3]) -> f64 {
        self.basis.domain.local_spacing(p)
    }

    fn detector_plane_z(&self) -> Option<f64> {
        Some(self.basis.domain.detector_plane_z)
    }

    fn classify_impact(&self, x: f64, y: f64) -> DetectorRegion {
        self.basis.domain.classify_impact(x, y)
    }

    fn is_time_dependent(&self) -> bool {
        !self.schedule.is_static()
    }
}

/// Why a trace ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    /// Crossed the detector plane.
    Detector { region: DetectorRegion },
    /// Hit electrode (table index).
    Electrode { electrode: usize },
    /// Hit the grounded enclosure.
    Enclosure,
    /// Crossed the early-stop plane (`TraceOptions::stop_plane_z`).
    ReachedPlane,
    /// Left the gridded domain.
    Escaped,
    /// Exceeded `t_max` or the step budget.
    Timeout,
}

impl Termination {
    pub fn is_detector(&self) -> bool {
        matches!(self, Termination::Detector { .. })
    }
}

/// State at a plane crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Impact {
    pub t: f64,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub region: DetectorRegion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub pos: [f64; 3],
    pub vel: [f64; 3],
}

/// Start/end energy ledger for static fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBookkeeping {
    pub start_potential: f64,
    pub end_potential: f64,
    pub start_kinetic: f64,
    pub end_kinetic: f64,
}

impl EnergyBookkeeping {
    /// |q dPhi - dKE| relative to the energy scale of the trajectory.
    pub fn relative_drift(&self, charge: f64) -> f64 {
        let work = charge * (self.start_potential - self.end_potential);
        let dke = self.end_kinetic - self.start_kinetic;
        let scale = work.abs().max(self.end_kinetic).max(1e-30);
        (work - dke).abs() / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordMode {
    /// Keep only the first and last states.
    Endpoints,
    /// Keep every k-th accepted step.
    Stride(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    /// Wall-clock limit of the simulated flight [s].
    pub t_max: f64,
    pub rel_tol: f64,
    pub abs_tol_pos: f64,
    pub abs_tol_vel: f64,
    /// Cap on spatial advance per step [m]; keeps steps from jumping over
    /// thin electrodes.
    pub max_step_length: f64,
    pub initial_step: f64,
    /// Below this step size the integrator gives up (singular geometry).
    pub min_step: f64,
    /// Early-stop plane (e.g. the deflector entrance for extraction scans).
    pub stop_plane_z: Option<f64>,
    pub record: RecordMode,
    /// Boris step cap: cyclotron period / this.
    pub steps_per_cyclotron: usize,
    pub max_steps: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            t_max: 50e-6,
            rel_tol: 1e-8,
            abs_tol_pos: 1e-10,
            abs_tol_vel: 1e-2,
            max_step_length: 0.4e-3,
            initial_step: 1e-10,
            min_step: 1e-16,
            stop_plane_z: None,
            record: RecordMode::Endpoints,
            steps_per_cyclotron: 50,
            max_steps: 20_000_000,
        }
    }
}

/// Integrated path and its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub termination: Termination,
    /// Set for detector and early-stop plane crossings.
    pub impact: Option<Impact>,
    pub flight_time: f64,
    pub steps: usize,
    pub energy: Option<EnergyBookkeeping>,
}

impl Trajectory {
    pub fn end(&self) -> &TrajectorySample {
        self.samples.last().expect("at least the start is recorded")
    }
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Trace a particle until termination.
pub fn trace<F: FieldEnvironment>(
    species: Species,
    start: ParticleState,
    env: &F,
    b_field: [f64; 3],
    opts: &TraceOptions,
) -> Result<Trajectory> {
    match env.classify(start.pos) {
        CellClass::Free => {}
        CellClass::Outside => return Err(Error::Trace(format!("start {:?} outside domain", start.pos))),
        _ => return Err(Error::Trace(format!("start {:?} inside an electrode", start.pos))),
    }
    if let (Some(zd), true) = (env.detector_plane_z(), true) {
        if start.pos[2] <= zd {
            return Err(Error::Trace("start below the detector plane".into()));
        }
    }

    let q_over_m = species.charge / species.mass;
    let deriv = |t: f64, y: &State| -> Deriv {
        let s = env.sample(y.pos, t);
        let v = y.vel;
        Deriv {
            dpos: v,
            dvel: [
                q_over_m * (s.e[0] + v[1] * b_field[2] - v[2] * b_field[1]),
                q_over_m * (s.e[1] + v[2] * b_field[0] - v[0] * b_field[2]),
                q_over_m * (s.e[2] + v[0] * b_field[1] - v[1] * b_field[0]),
            ],
        }
    };
    let tol = ErrorTolerances {
        rel: opts.rel_tol,
        abs_pos: opts.abs_tol_pos,
        abs_vel: opts.abs_tol_vel,
    };
    let b_mag = norm(b_field);
    let use_boris = b_mag > 0.0;
    let cyclotron_cap = if use_boris {
        2.0 * std::f64::consts::PI * species.mass
            / (species.charge.abs() * b_mag)
            / opts.steps_per_cyclotron as f64
    } else {
        f64::INFINITY
    };
    let schedule_cap = if env.is_time_dependent() {
        // resolve the exponential ramps
        opts.t_max / 1e4
    } else {
        f64::INFINITY
    };

    let static_energy = !env.is_time_dependent();
    let start_sample = env.sample(start.pos, 0.0);
    let mut energy = static_energy.then(|| EnergyBookkeeping {
        start_potential: start_sample.potential,
        end_potential: start_sample.potential,
        start_kinetic: start.kinetic_energy(species),
        end_kinetic: start.kinetic_energy(species),
    });

    let mut samples = Vec::new();
    let mut y = State {
        pos: start.pos,
        vel: start.vel,
    };
    let mut t = 0.0f64;
    samples.push(TrajectorySample {
        t,
        pos: y.pos,
        vel: y.vel,
    });
    let mut h = opts.initial_step;
    let mut steps = 0usize;

    // spatial step cap from current speed and acceleration
    let spatial_cap = |t: f64, y: &State| -> f64 {
        let a = norm(deriv(t, y).dvel);
        let v = norm(y.vel);
        let dx = opts.max_step_length;
        dx / (v + (a * dx).sqrt() + 1e-12)
    };

    let finish = |samples: &mut Vec<TrajectorySample>,
                  y: &State,
                  t: f64,
                  steps: usize,
                  termination: Termination,
                  impact: Option<Impact>,
                  energy: &mut Option<EnergyBookkeeping>|
     -> Trajectory {
        if let Some(book) = energy.as_mut() {
            book.end_potential = env.sample(y.pos, t).potential;
            book.end_kinetic = ParticleState { pos: y.pos, vel: y.vel }.kinetic_energy(species);
        }
        let last = samples.last().copied();
        if last.map(|s| s.t < t).unwrap_or(true) {
            samples.push(TrajectorySample {
                t,
                pos: y.pos,
                vel: y.vel,
            });
        }
        Trajectory {
            samples: std::mem::take(samples),
            termination,
            impact,
            flight_time: t,
            steps,
            energy: *energy,
        }
    };

    loop {
        if t >= opts.t_max || steps >= opts.max_steps {
            return Ok(finish(
                &mut samples,
                &y,
                t,
                steps,
                Termination::Timeout,
                None,
                &mut energy,
            ));
        }
        let cap = spatial_cap(t, &y)
            .min(cyclotron_cap)
            .min(schedule_cap)
            .min(opts.t_max - t)
            .max(opts.min_step);

        let (y_new, h_used) = if use_boris {
            let dt = cap;
            let s = env.sample(y.pos, t);
            let mut pos = y.pos;
            let mut vel = y.vel;
            boris_step(&mut pos, &mut vel, q_over_m, s.e, b_field, dt);
            (State { pos, vel }, dt)
        } else {
            // adaptive embedded step
            h = h.min(cap);
            let mut attempt = 0;
            loop {
                let r = dopri5_step(&deriv, t, &y, h, &tol);
                let err = r.error_norm.max(1e-12);
                if r.error_norm <= 1.0 {
                    let h_used = h;
                    h = (h * (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)).min(cap.max(opts.min_step));
                    break (r.y, h_used);
                }
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                if h < opts.min_step {
                    return Err(Error::Trace(format!(
                        "step underflow at t={t:.3e} s near {:?}",
                        y.pos
                    )));
                }
                attempt += 1;
                if attempt > 200 {
                    return Err(Error::Trace("step control failed to settle".into()));
                }
            }
        };
        let t_new = t + h_used;
        steps += 1;

        // Plane crossings, earliest (highest z) first.
        let mut crossings: Vec<(f64, bool)> = Vec::new(); // (z_plane, is_detector)
        if let Some(zp) = opts.stop_plane_z {
            if y.pos[2] > zp && y_new.pos[2] <= zp {
                crossings.push((zp, false));
            }
        }
        if let Some(zd) = env.detector_plane_z() {
            if y.pos[2] > zd && y_new.pos[2] <= zd {
                crossings.push((zd, true));
            }
        }
        crossings.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        if let Some(&(zp, is_detector)) = crossings.first() {
            let hit = locate_plane_crossing(&deriv, t, &y, h_used, &y_new, zp);
            let region = if is_detector {
                env.classify_impact(hit.1.pos[0], hit.1.pos[1])
            } else {
                DetectorRegion::Outside
            };
            let impact = Impact {
                t: hit.0,
                position: hit.1.pos,
                velocity: hit.1.vel,
                region,
            };
            let termination = if is_detector {
                Termination::Detector { region }
            } else {
                Termination::ReachedPlane
            };
            return Ok(finish(
                &mut samples,
                &hit.1,
                hit.0,
                steps,
                termination,
                Some(impact),
                &mut energy,
            ));
        }

        // Electrode / enclosure / domain-exit detection at the step end.
        match env.classify(y_new.pos) {
            CellClass::Free => {}
            blocked => {
                let tol_len = env.local_spacing(y.pos) * 0.1;
                let (t_hit, y_hit, cause) =
                    locate_boundary(&deriv, env, t, &y, h_used, tol_len, blocked);
                let termination = match cause {
                    CellClass::Electrode(e) => Termination::Electrode { electrode: e },
                    CellClass::Ground => Termination::Enclosure,
                    _ => Termination::Escaped,
                };
                return Ok(finish(
                    &mut samples,
                    &y_hit,
                    t_hit,
                    steps,
                    termination,
                    None,
                    &mut energy,
                ));
            }
        }

        y = y_new;
        t = t_new;
        if let RecordMode::Stride(k) = opts.record {
            if steps % k.max(1) == 0 {
                samples.push(TrajectorySample {
                    t,
                    pos: y.pos,
                    vel: y.vel,
                });
            }
        }
    }
}

/// Refine the time at which z crosses `z_plane` within one accepted step.
/// Starts from the linear-in-time estimate and polishes with RK4 substeps
/// and secant iterations on z(t).
fn locate_plane_crossing<D>(
    deriv: &D,
    t0: f64,
    y0: &State,
    h: f64,
    y1: &State,
    z_plane: f64,
) -> (f64, State)
where
    D: Fn(f64, &State) -> Deriv,
{
    let (z0, z1) = (y0.pos[2], y1.pos[2]);
    let mut s = if (z1 - z0).abs() > 0.0 {
        h * (z0 - z_plane) / (z0 - z1)
    } else {
        0.5 * h
    };
    let mut y_cross = *y1;
    for _ in 0..3 {
        s = s.clamp(0.0, h);
        y_cross = rk4_step(deriv, t0, y0, s);
        let vz = y_cross.vel[2];
        if vz.abs() < 1e-30 {
            break;
        }
        let dz = y_cross.pos[2] - z_plane;
        if dz.abs() < 1e-13 {
            break;
        }
        s -= dz / vz;
    }
    (t0 + s.clamp(0.0, h), y_cross)
}

/// Bisect the step interval to locate the first blocked point along the
/// path, to within `tol_len` of travel.
fn locate_boundary<D, F>(
    deriv: &D,
    env: &F,
    t0: f64,
    y0: &State,
    h: f64,
    tol_len: f64,
    end_class: CellClass,
) -> (f64, State, CellClass)
where
    D: Fn(f64, &State) -> Deriv,
    F: FieldEnvironment,
{
    let mut lo = 0.0f64; // known free
    let mut hi = h; // known blocked
    let mut y_lo = *y0;
    let mut cause = end_class;
    for _ in 0..60 {
        let speed = norm(y_lo.vel).max(1e-12);
        if (hi - lo) * speed < tol_len {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let y_mid = rk4_step(deriv, t0, y0, mid);
        match env.classify(y_mid.pos) {
            CellClass::Free => {
                lo = mid;
                y_lo = y_mid;
            }
            c => {
                hi = mid;
                cause = c;
            }
        }
    }
    (t0 + lo, y_lo, cause)
}

/// Trace a batch of particles; results are index-aligned with `starts` and
/// independent of parallel execution.
pub fn batch_trace<F: FieldEnvironment>(
    species: Species,
    starts: &[ParticleState],
    env: &F,
    b_field: [f64; 3],
    opts: &TraceOptions,
) -> Result<Vec<Trajectory>> {
    let results = exec::map_indexed(starts.len(), |i| {
        trace(species, starts[i], env, b_field, opts)
    });
    results.into_iter().collect()
}

/// Sequential twin of [`batch_trace`] for benchmarks.
pub fn batch_trace_seq<F: FieldEnvironment>(
    species: Species,
    starts: &[ParticleState],
    env: &F,
    b_field: [f64; 3],
    opts: &TraceOptions,
) -> Result<Vec<Trajectory>> {
    starts
        .iter()
        .map(|s| trace(species, *s, env, b_field, opts))
        .collect()
}

/// Write a trajectory as CSV with columns
/// `t_s,x_m,y_m,z_m,vx_m_per_s,vy_m_per_s,vz_m_per_s,potential_v`.
pub fn write_trajectory_csv<W: Write, F: FieldEnvironment>(
    w: &mut W,
    traj: &Trajectory,
    env: &F,
) -> Result<()> {
    writeln!(w, "t_s,x_m,y_m,z_m,vx_m_per_s,vy_m_per_s,vz_m_per_s,potential_v")?;
    for s in &traj.samples {
        let phi = env.sample(s.pos, s.t).potential;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            s.t, s.pos[0], s.pos[1], s.pos[2], s.vel[0], s.vel[1], s.vel[2], phi
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldsolve::UniformField;

    #[test]
    fn uniform_field_flight_time_matches_closed_form() {
        // Ion from rest, uniform downward force; detector a distance d below.
        let species = Species::rb87_ion();
        let e_mag = 1e4; // V/m
        let d = 10e-3;
        let mut env = UniformField::new([0.0, 0.0, -e_mag], 50e-3);
        env.detector_z = Some(-d);
        let traj = trace(
            species,
            ParticleState::at_rest([0.0; 3]),
            &env,
            [0.0; 3],
            &TraceOptions::default(),
        )
        .unwrap();
        assert!(traj.termination.is_detector());
        let expect = (2.0 * d * species.mass / (species.charge * e_mag)).sqrt();
        let got = traj.impact.unwrap().t;
        assert!(
            ((got - expect) / expect).abs() < 1e-4,
            "flight time {got:.6e} vs {expect:.6e}"
        );
        // energy bookkeeping is exact for the analytic field
        assert!(traj.energy.unwrap().relative_drift(species.charge) < 1e-6);
    }

    #[test]
    fn cyclotron_orbit_radius_and_period() {
        let species = Species::rb87_ion();
        let b = 0.3; // tesla
        let v = 5e4;
        let period = 2.0 * std::f64::consts::PI * species.mass / (species.charge * b);
        let radius = species.mass * v / (species.charge * b);
        let env = UniformField::new([0.0; 3], 10.0);
        let opts = TraceOptions {
            t_max: 3.0 * period,
            record: RecordMode::Stride(1),
            max_step_length: 1.0, // spatial cap irrelevant here
            ..Default::default()
        };
        let traj = trace(
            species,
            ParticleState {
                pos: [0.0; 3],
                vel: [v, 0.0, 0.0],
            },
            &env,
            [0.0, 0.0, b],
            &opts,
        )
        .unwrap();
        assert_eq!(traj.termination, Termination::Timeout);
        // the first period's vertices form a regular polygon whose mean is
        // the exact orbit center
        let n = 50;
        assert!(traj.samples.len() > 3 * n);
        let mut center = [0.0f64; 2];
        for s in &traj.samples[1..=n] {
            center[0] += s.pos[0] / n as f64;
            center[1] += s.pos[1] / n as f64;
        }
        for s in &traj.samples {
            let r = ((s.pos[0] - center[0]).powi(2) + (s.pos[1] - center[1]).powi(2)).sqrt();
            assert!(
                ((r - radius) / radius).abs() < 1e-3,
                "radius {r:.6e} vs {radius:.6e}"
            );
        }
        // after three full periods the particle has returned to the start:
        // a period error delta would miss by ~ 3 v delta
        let back = &traj.samples[3 * n];
        assert!(((back.t - 3.0 * period) / period).abs() < 1e-12);
        let miss = norm([back.pos[0], back.pos[1], back.pos[2]]);
        assert!(miss / radius < 1e-3, "orbit fails to close: {miss:.3e}");
        assert!((norm(back.vel) - v).abs() / v < 1e-12);
    }

    #[test]
    fn start_inside_electrode_is_an_error() {
        let env = UniformField::new([0.0, 0.0, -1.0], 1e-3);
        let r = trace(
            Species::rb87_ion(),
            ParticleState::at_rest([0.0, 0.0, 5e-3]), // outside the box
            &env,
            [0.0; 3],
            &TraceOptions::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn batch_results_are_order_stable() {
        let species = Species::rb87_ion();
        let mut env = UniformField::new([0.0, 0.0, -1e4], 50e-3);
        env.detector_z = Some(-10e-3);
        let starts: Vec<ParticleState> = (0..16)
            .map(|i| ParticleState::at_rest([i as f64 * 1e-4, 0.0, 0.0]))
            .collect();
        let a = batch_trace(species, &starts, &env, [0.0; 3], &TraceOptions::default()).unwrap();
        let b =
            batch_trace_seq(species, &starts, &env, [0.0; 3], &TraceOptions::default()).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.impact.unwrap().position, y.impact.unwrap().position);
            assert_eq!(x.flight_time, y.flight_time);
        }
    }

    #[test]
    fn stop_plane_terminates_early() {
        let species = Species::rb87_ion();
        let mut env = UniformField::new([0.0, 0.0, -1e4], 50e-3);
        env.detector_z = Some(-40e-3);
        let opts = TraceOptions {
            stop_plane_z: Some(-5e-3),
            ..Default::default()
        };
        let traj = trace(
            species,
            ParticleState::at_rest([0.0; 3]),
            &env,
            [0.0; 3],
            &opts,
        )
        .unwrap();
        assert_eq!(traj.termination, Termination::ReachedPlane);
        let z = traj.impact.unwrap().position[2];
        assert!((z + 5e-3).abs() < 1e-9);
    }

    #[test]
    fn schedule_entry_ramps_exponentially() {
        let e = ScheduleEntry {
            u0: 50.0,
            u_target: -50.0,
            tau: Some(0.7e-6),
        };
        assert_eq!(e.at(0.0), 50.0);
        let one_tau = e.at(0.7e-6);
        let expect = -50.0 + 100.0 * (-1.0f64).exp();
        assert!((one_tau - expect).abs() < 1e-9);
        assert!((e.at(1e-3) + 50.0).abs() < 1e-9);
        // monotone toward the target
        let mut prev = e.at(0.0);
        for k in 1..100 {
            let now = e.at(k as f64 * 1e-7);
            assert!(now <= prev);
            prev = now;
        }
    }
}
