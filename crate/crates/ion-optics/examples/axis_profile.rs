use ion_optics::fieldsolve::{BasisSet, FieldEnvironment, SolverOptions};
use ion_optics::geometry::{build_domain, ElectrodeShape, GeometrySpec};
use ion_optics::tracer::{trace, ParticleState, RecordMode, Species, TraceOptions};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let entrance: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(2.5) * 1e-3;
    let exit: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(10.0) * 1e-3;
    let length: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(5.0) * 1e-3;
    let mut spec = GeometrySpec::paper_default();
    for def in &mut spec.electrodes {
        if def.id == "cone" {
            def.shape = ElectrodeShape::Cone {
                entrance_radius: entrance,
                exit_radius: exit,
                length,
                outer_radius: 12e-3,
            };
        }
    }
    let domain = build_domain(&spec).unwrap();
    let basis = BasisSet::solve(domain, &SolverOptions::default()).unwrap();
    let volts = basis
        .domain
        .voltages_from_groups(&[
            ("extractor", &[-50.0]),
            ("cone", &[-1000.0]),
            ("drift_tube", &[-2000.0]),
            ("cem_plate", &[-2300.0]),
        ])
        .unwrap();
    let field = basis.combine(&volts).unwrap();
    println!("z_mm,phi_V");
    let mut z = 0.0f64;
    while z > -20e-3 {
        let s = field.sample([0.0, 0.0, z], 0.0);
        println!("{:.2},{:.2}", z * 1e3, s.potential);
        z -= 0.25e-3;
    }
    // trace an off-axis ray and find the crossover (x sign change)
    let opts = TraceOptions {
        record: RecordMode::Stride(1),
        ..Default::default()
    };
    let t = trace(
        Species::rb87_ion(),
        ParticleState::at_rest([1e-4, 0.0, -1e-4]),
        &field,
        [0.0; 3],
        &opts,
    )
    .unwrap();
    let mut prev = t.samples[0];
    for s in &t.samples {
        if prev.pos[0] > 0.0 && s.pos[0] <= 0.0 {
            println!("# crossover at z = {:.2} mm", s.pos[2] * 1e3);
        }
        prev = *s;
    }
    if let Some(im) = t.impact {
        println!("# impact x = {:.4} mm -> M = {:.2}", im.position[0] * 1e3, im.position[0] / 1e-4);
    }
}
