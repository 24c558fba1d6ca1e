use ion_optics::fieldsolve::{BasisSet, SolverOptions};
use ion_optics::geometry::{build_domain, ElectrodeShape, GeometrySpec};
use ion_optics::tracer::{trace, ParticleState, Species, TraceOptions, Termination};

fn main() {
    let a: Vec<String> = std::env::args().collect();
    let (entrance, exit): (f64, f64) = (a[1].parse().unwrap(), a[2].parse().unwrap());
    let mut spec = GeometrySpec::paper_default();
    for def in &mut spec.electrodes {
        if def.id == "cone" {
            def.shape = ElectrodeShape::Cone {
                entrance_radius: entrance * 1e-3,
                exit_radius: exit * 1e-3,
                length: 5e-3,
                outer_radius: 12e-3,
            };
        }
    }
    let domain = build_domain(&spec).unwrap();
    let basis = BasisSet::solve(domain, &SolverOptions::default()).unwrap();
    let species = Species::rb87_ion();
    let reach = |ux: f64| -> f64 {
        let volts = basis.domain.voltages_from_groups(&[
            ("extractor", &[-50.0 + ux, -50.0, -50.0 - ux, -50.0][..]),
            ("cone", &[-1000.0]),
            ("drift_tube", &[-2000.0]),
            ("cem_plate", &[-2300.0]),
        ]).unwrap();
        let field = basis.combine(&volts).unwrap();
        let detected = |x0: f64| {
            let opts = TraceOptions { stop_plane_z: Some(-12.5e-3), ..Default::default() };
            matches!(
                trace(species, ParticleState::at_rest([x0, 0.0, -1e-4]), &field, [0.0; 3], &opts)
                    .map(|t| t.termination),
                Ok(Termination::ReachedPlane)
            )
        };
        let (mut lo, mut hi) = (0.0f64, 3.5e-3);
        if detected(hi) { lo = hi } else {
            for _ in 0..13 { let mid = 0.5*(lo+hi); if detected(mid) { lo = mid } else { hi = mid } }
        }
        lo * 1e3
    };
    let w0 = reach(0.0);
    let plus = reach(11.5);
    let minus = reach(-11.5);
    println!(
        "entr {entrance} exit {exit}: reach0 {w0:.3} mm, U_X=+11.5 -> {plus:.3} (ratio {:.2}), U_X=-11.5 -> {minus:.3} (ratio {:.2})",
        plus / w0,
        minus / w0
    );
}
