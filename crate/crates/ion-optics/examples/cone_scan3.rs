use ion_optics::fieldsolve::{BasisSet, SolverOptions};
use ion_optics::geometry::{build_domain, ElectrodeShape, GeometrySpec};
use ion_optics::tracer::{trace, ParticleState, Species, TraceOptions, Termination};

fn main() {
    let a: Vec<String> = std::env::args().collect();
    let (entrance, exit, length, ext_top): (f64, f64, f64, f64) = (
        a[1].parse().unwrap(),
        a[2].parse().unwrap(),
        a[3].parse().unwrap(),
        a.get(4).map(|s| s.parse().unwrap()).unwrap_or(4.5),
    );
    let mut spec = GeometrySpec::paper_default();
    for def in &mut spec.electrodes {
        if def.id == "cone" {
            def.shape = ElectrodeShape::Cone {
                entrance_radius: entrance * 1e-3,
                exit_radius: exit * 1e-3,
                length: length * 1e-3,
                outer_radius: 12e-3,
            };
            def.z_top = -(ext_top + 2.0) * 1e-3;
        }
        if def.id == "extractor" {
            def.z_top = -ext_top * 1e-3;
        }
    }
    let domain = build_domain(&spec).unwrap();
    let basis = BasisSet::solve(domain, &SolverOptions::default()).unwrap();
    let volts = basis.domain.voltages_from_groups(&[
        ("extractor", &[-50.0]),
        ("cone", &[-1000.0]),
        ("drift_tube", &[-2000.0]),
        ("cem_plate", &[-2300.0]),
    ]).unwrap();
    let field = basis.combine(&volts).unwrap();
    let species = Species::rb87_ion();
    let fly = |x0: f64, stop: Option<f64>| -> (Termination, f64, f64) {
        let opts = TraceOptions { stop_plane_z: stop, ..Default::default() };
        let t = trace(species, ParticleState::at_rest([x0, 0.0, -1e-4]), &field, [0.0; 3], &opts).unwrap();
        (t.termination, t.impact.map(|i| i.position[0]).unwrap_or(f64::NAN), t.flight_time)
    };
    let (_, xc, tc) = fly(0.0, None);
    let (_, xp, _) = fly(1e-4, None);
    let m = (xp - xc) / 1e-4;
    // extraction half width along +x: bisect detectability (reaches -12.5 mm)
    let detected = |x0: f64| -> bool {
        matches!(fly(x0, Some(-12.5e-3)).0, Termination::ReachedPlane)
    };
    let (mut lo, mut hi) = (0.0f64, 2.4e-3);
    if detected(hi) { lo = hi; } else {
        for _ in 0..12 {
            let mid = 0.5 * (lo + hi);
            if detected(mid) { lo = mid } else { hi = mid }
        }
    }
    println!(
        "entr {:4.2} exit {:5.2} len {:4.2} ext@{:.1} -> M {:+6.2}, t {:.3} us, w0 {:.2} mm",
        entrance, exit, length, ext_top, m, tc * 1e6, 2.0 * lo * 1e3
    );
}
