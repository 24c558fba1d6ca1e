use ion_optics::fieldsolve::{BasisSet, SolverOptions};
use ion_optics::geometry::{build_domain, GeometrySpec};
use std::time::Instant;

fn main() {
    let spec = GeometrySpec::paper_default();
    let t0 = Instant::now();
    let domain = build_domain(&spec).unwrap();
    println!(
        "rasterized in {:.2?}: coarse {}x{}x{} = {} nodes, refined {:?}",
        t0.elapsed(),
        domain.coarse.nx,
        domain.coarse.ny,
        domain.coarse.nz,
        domain.coarse.len(),
        domain.refined.as_ref().map(|g| (g.nx, g.ny, g.nz, g.len()))
    );
    let t1 = Instant::now();
    let basis = BasisSet::solve(domain, &SolverOptions::default()).unwrap();
    println!("basis solved in {:.2?}", t1.elapsed());
    for (e, st) in basis.stats.iter().enumerate() {
        println!(
            "  {:>14}: sweeps {:>6}, residual {:.3e} (target {:.3e}), omega {:.4}, derived {:?}",
            basis.domain.electrodes.entries[e].name,
            st.total_sweeps(),
            st.worst_residual(),
            st.coarse.residual_target,
            st.coarse.omega,
            st.derived_from
        );
    }
}
