use std::time::Instant;
fn main() {
    let name = std::env::args().nth(1).unwrap_or("desk.json".into());
    let sc = mesdopt_core::scenario::load_scenario(format!("scenarios/{name}")).unwrap();
    let pre = mesdopt_core::scheduler::Precomputed::build(&sc).unwrap();
    let assembled = mesdopt_core::scheduler::assemble(
        &sc, &pre.bundle, &pre.paths, &pre.tm, &mesdopt_core::scheduler::AssembleMode::Case1).unwrap();
    println!("model: {} vars ({} bin), {} rows",
        assembled.model.n_vars(), assembled.model.n_binaries(), assembled.model.n_rows());
    let t0 = Instant::now();
    match mesdopt_core::milp::solve_lp(&assembled.model) {
        Ok(out) => println!("root LP: {:?} obj {:.6} iters {} in {:.2}s",
            out.status, out.objective, out.iterations, t0.elapsed().as_secs_f64()),
        Err(e) => println!("root LP error after {:.2}s: {e}", t0.elapsed().as_secs_f64()),
    }
}
