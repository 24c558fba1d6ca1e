use ion_optics::fieldsolve::{BasisSet, FieldEnvironment, SolverOptions};
use ion_optics::geometry::{build_domain, GeometrySpec};
use ion_optics::tracer::{batch_trace, ParticleState, Species, TraceOptions};
use std::time::Instant;

fn main() {
    let spec = GeometrySpec::paper_default();
    let domain = build_domain(&spec).unwrap();
    let t0 = Instant::now();
    let basis = BasisSet::solve(domain, &SolverOptions::default()).unwrap();
    println!("solve: {:.1?}", t0.elapsed());

    let volts = basis
        .domain
        .voltages_from_groups(&[
            ("chip", &[0.0]),
            ("extractor", &[-50.0]),
            ("cone", &[-1000.0]),
            ("drift_tube", &[-2000.0]),
            ("cem_plate", &[-2300.0]),
        ])
        .unwrap();

    // stray-field coefficients at the atom position
    let probe = [0.0, 0.0, -1e-4];
    let mono = basis
        .field_at(&basis.domain.voltages_from_groups(&[("extractor", &[1.0])]).unwrap(), probe)
        .unwrap();
    println!(
        "monopole field at atom: Ez = {:.4} V/cm per V (expect ~2.2), Exy = {:.3e} V/m",
        mono.e[2].abs() / 100.0,
        mono.e[0].hypot(mono.e[1])
    );
    let dip = basis
        .field_at(
            &basis
                .domain
                .voltages_from_groups(&[("extractor", &[0.5, 0.0, -0.5, 0.0])])
                .unwrap(),
            probe,
        )
        .unwrap();
    println!(
        "dipole field per volt difference: Exy = {:.4} mV/cm (expect ~26.5), dir=({:.3},{:.3})",
        dip.e[0].hypot(dip.e[1]) * 1000.0 / 100.0,
        dip.e[0],
        dip.e[1]
    );

    // flight time + magnification from a 3x3 lattice
    let field = basis.combine(&volts).unwrap();
    let t1 = Instant::now();
    let pitch = 1e-4;
    let mut starts = Vec::new();
    for iy in -1..=1 {
        for ix in -1..=1 {
            starts.push(ParticleState::at_rest([
                ix as f64 * pitch,
                iy as f64 * pitch,
                -1e-4,
            ]));
        }
    }
    let trajs = batch_trace(
        Species::rb87_ion(),
        &starts,
        &field,
        [0.0; 3],
        &TraceOptions::default(),
    )
    .unwrap();
    println!("9 traces: {:.1?}", t1.elapsed());
    for (i, t) in trajs.iter().enumerate() {
        let im = t.impact;
        println!(
            "  start ({:+.1e},{:+.1e}): {:?} t={:.3e} s impact=({:+.4e},{:+.4e}) drift={:.2e}",
            starts[i].pos[0],
            starts[i].pos[1],
            t.termination,
            t.flight_time,
            im.map(|p| p.position[0]).unwrap_or(f64::NAN),
            im.map(|p| p.position[1]).unwrap_or(f64::NAN),
            t.energy.map(|e| e.relative_drift(1.602e-19)).unwrap_or(f64::NAN),
        );
    }
    // crude magnification from the +x neighbour
    if let (Some(c), Some(px)) = (trajs[4].impact, trajs[5].impact) {
        let m = (px.position[0] - c.position[0]) / pitch;
        println!("M_x (center->+x) = {:.2} (expect ~12.25 +-25%)", m);
    }
    let s = field.sample([0.0, 0.0, -40e-3], 0.0);
    println!("potential on axis mid-tube: {:.1} V (expect near -2000)", s.potential);
}
