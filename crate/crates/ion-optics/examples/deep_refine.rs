use ion_optics::fieldsolve::{BasisSet, SolverOptions};
use ion_optics::geometry::{build_domain, GeometrySpec, RefinedRegion};
use ion_optics::tracer::{trace, ParticleState, Species, TraceOptions, Termination};
use std::time::Instant;

fn main() {
    let a: Vec<String> = std::env::args().collect();
    let zmin_mm: f64 = a.get(1).map(|s| s.parse().unwrap()).unwrap_or(8.0);
    let mut spec = GeometrySpec::paper_default();
    spec.refined = Some(RefinedRegion {
        z_min: -zmin_mm * 1e-3,
        z_max: 0.0,
        spacing: 0.05e-3,
        half_width: 4e-3,
    });
    let domain = build_domain(&spec).unwrap();
    let t0 = Instant::now();
    let basis = BasisSet::solve(domain, &SolverOptions::default()).unwrap();
    let solve_t = t0.elapsed();
    let species = Species::rb87_ion();
    let uxy = 0.23 * -50.0;
    let m_and_reach = |seg: [f64; 4]| -> (f64, f64) {
        let volts = basis.domain.voltages_from_groups(&[
            ("extractor", &seg[..]),
            ("cone", &[-1000.0]),
            ("drift_tube", &[-2000.0]),
            ("cem_plate", &[-2300.0]),
        ]).unwrap();
        let field = basis.combine(&volts).unwrap();
        let fly = |x0: f64, stop: Option<f64>| {
            let opts = TraceOptions { stop_plane_z: stop, ..Default::default() };
            trace(species, ParticleState::at_rest([x0, 0.0, -1e-4]), &field, [0.0; 3], &opts).unwrap()
        };
        let c = fly(0.0, None).impact.map(|i| i.position[0]).unwrap_or(f64::NAN);
        let p = fly(1e-4, None).impact.map(|i| i.position[0]).unwrap_or(f64::NAN);
        let detected = |x0: f64| matches!(fly(x0, Some(-12.5e-3)).termination, Termination::ReachedPlane);
        let (mut lo, mut hi) = (0.0f64, 3.0e-3);
        if detected(hi) { lo = hi } else {
            for _ in 0..13 { let mid = 0.5*(lo+hi); if detected(mid) { lo = mid } else { hi = mid } }
        }
        ((p - c) / 1e-4, lo)
    };
    let (m, w0) = m_and_reach([-50.0; 4]);
    let (_, swept) = m_and_reach([-50.0 - uxy, -50.0, -50.0 + uxy, -50.0]);
    println!(
        "refined to -{zmin_mm} mm (solve {:.0?}): M {:+.2}, w0 {:.2} mm, swept {:.2} mm, ratio {:.2}",
        solve_t, m, 2.0 * w0 * 1e3, 2.0 * swept * 1e3, swept / w0
    );
}
