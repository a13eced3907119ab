use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
fn main() {
    let sc = mesdopt_core::scenario::load_scenario("scenarios/desk.json").unwrap();
    let pre = mesdopt_core::scheduler::Precomputed::build(&sc).unwrap();
    let assembled = mesdopt_core::scheduler::assemble(
        &sc, &pre.bundle, &pre.paths, &pre.tm, &mesdopt_core::scheduler::AssembleMode::Case1).unwrap();
    let model = &assembled.model;
    let binaries: Vec<usize> = (0..model.n_vars()).filter(|&v| model.vars[v].binary).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..3 {
        let mut node = model.clone();
        let nfix = rng.random_range(1..30);
        for _ in 0..nfix {
            let v = binaries[rng.random_range(0..binaries.len())];
            node.fix_var(v, rng.random_range(0..2) as f64);
        }
        if case != 2 { continue; }
        println!("running failing case 2");
        match mesdopt_core::milp::solve_lp(&node) {
            Ok(out) => println!("-> {:?} obj {:.6}", out.status, out.objective),
            Err(e) => println!("-> ERROR {e}"),
        }
    }
}
