use ion_optics::fieldsolve::{BasisSet, SolverOptions};
use ion_optics::geometry::{build_domain, ElectrodeShape, GeometrySpec};
use ion_optics::tracer::{trace, ParticleState, Species, TraceOptions, Termination};

fn main() {
    let a: Vec<String> = std::env::args().collect();
    let (entrance, exit, length): (f64, f64, f64) =
        (a[1].parse().unwrap(), a[2].parse().unwrap(), a[3].parse().unwrap());
    let mut spec = GeometrySpec::paper_default();
    for def in &mut spec.electrodes {
        if def.id == "cone" {
            def.shape = ElectrodeShape::Cone {
                entrance_radius: entrance * 1e-3,
                exit_radius: exit * 1e-3,
                length: length * 1e-3,
                outer_radius: 12e-3,
            };
        }
    }
    let domain = build_domain(&spec).unwrap();
    let basis = BasisSet::solve(domain, &SolverOptions::default()).unwrap();
    let species = Species::rb87_ion();
    let volts = basis.domain.voltages_from_groups(&[
        ("extractor", &[-50.0]),
        ("cone", &[-1000.0]),
        ("drift_tube", &[-2000.0]),
        ("cem_plate", &[-2300.0]),
    ]).unwrap();
    let field = basis.combine(&volts).unwrap();
    let fly = |x0: f64, stop: Option<f64>| {
        let opts = TraceOptions { stop_plane_z: stop, ..Default::default() };
        trace(species, ParticleState::at_rest([x0, 0.0, -1e-4]), &field, [0.0; 3], &opts).unwrap()
    };
    let c = fly(0.0, None);
    let p = fly(1e-4, None);
    let m = (p.impact.unwrap().position[0] - c.impact.unwrap().position[0]) / 1e-4;
    let detected = |x0: f64| matches!(fly(x0, Some(-12.5e-3)).termination, Termination::ReachedPlane);
    let (mut lo, mut hi) = (0.0f64, 2.4e-3);
    if detected(hi) { lo = hi } else {
        for _ in 0..12 { let mid = 0.5*(lo+hi); if detected(mid) { lo = mid } else { hi = mid } }
    }
    println!(
        "entr {:4.2} exit {:4.2} len {:4.2} -> M {:+6.2}, t {:.3} us, w0 {:.2} mm",
        entrance, exit, length, m, c.flight_time * 1e6, 2.0 * lo * 1e3
    );
}
