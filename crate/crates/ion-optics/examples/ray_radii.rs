use ion_optics::fieldsolve::{BasisSet, SolverOptions};
use ion_optics::geometry::{build_domain, GeometrySpec};
use ion_optics::tracer::{trace, ParticleState, RecordMode, Species, TraceOptions, Termination};

fn main() {
    let spec = GeometrySpec::paper_default(); // wide cone default 2.5 -> 10
    let domain = build_domain(&spec).unwrap();
    let basis = BasisSet::solve(domain, &SolverOptions::default()).unwrap();
    let species = Species::rb87_ion();
    let uxy = 0.23 * -50.0;
    let configs: [(&str, [f64; 4]); 2] = [
        ("zero ", [-50.0; 4]),
        ("swept", [-50.0 - uxy, -50.0, -50.0 + uxy, -50.0]),
    ];
    for (name, seg) in configs {
        let volts = basis.domain.voltages_from_groups(&[
            ("extractor", &seg[..]),
            ("cone", &[-1000.0]),
            ("drift_tube", &[-2000.0]),
            ("cem_plate", &[-2300.0]),
        ]).unwrap();
        let field = basis.combine(&volts).unwrap();
        for x0 in [0.8e-3, 1.0e-3, 1.2e-3, 1.39e-3, 1.5e-3, 1.62e-3] {
            let opts = TraceOptions {
                stop_plane_z: Some(-12.5e-3),
                record: RecordMode::Stride(1),
                ..Default::default()
            };
            let t = trace(species, ParticleState::at_rest([x0, 0.0, -1e-4]), &field, [0.0; 3], &opts).unwrap();
            // radius at z = -5.5 (extractor exit), -6.5 (cone entrance), -8.0
            let r_at = |zq: f64| -> f64 {
                let mut best = f64::NAN;
                for s in &t.samples {
                    if s.pos[2] <= zq {
                        best = s.pos[0].hypot(s.pos[1]);
                        break;
                    }
                }
                best
            };
            let outcome = match t.termination {
                Termination::ReachedPlane => "pass",
                _ => "lost",
            };
            println!(
                "{name} x0 {:.2} mm: r(-5.5) {:.3} r(-6.5) {:.3} r(-8) {:.3} mm -> {outcome} ({:?})",
                x0 * 1e3,
                r_at(-5.5e-3) * 1e3,
                r_at(-6.5e-3) * 1e3,
                r_at(-8e-3) * 1e3,
                t.termination
            );
        }
    }
}
