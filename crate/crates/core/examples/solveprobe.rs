use std::time::Instant;
fn main() {
    let name = std::env::args().nth(1).unwrap_or("desk.json".into());
    let case = std::env::args().nth(2).unwrap_or("1".into());
    let sc = mesdopt_core::scenario::load_scenario(format!("scenarios/{name}")).unwrap();
    let t0 = Instant::now();
    let pre = mesdopt_core::scheduler::Precomputed::build(&sc).unwrap();
    println!("precompute: {:.2}s, gamma_max {}", t0.elapsed().as_secs_f64(), pre.paths.gamma_max());
    let t0 = Instant::now();
    let res = match case.as_str() {
        "1" => mesdopt_core::scheduler::solve_case1(&sc, &pre).unwrap(),
        "2" => mesdopt_core::scheduler::solve_case2_stationary(&sc, &pre).unwrap(),
        _ => mesdopt_core::scheduler::solve_case3_pev(&sc, &pre, None).unwrap(),
    };
    println!(
        "case {case}: {:.2}s  vars {} rows {} bins {}  status {:?} obj {:.4} J {:.4} nodes {} iters {} gap {:.2e}",
        t0.elapsed().as_secs_f64(),
        res.assembled.model.n_vars(), res.assembled.model.n_rows(), res.assembled.model.n_binaries(),
        res.solution.status, res.solution.objective, res.schedule.j_total,
        res.solution.nodes, res.solution.simplex_iterations, res.solution.gap
    );
    for (s, ms) in res.schedule.per_mesd.iter().enumerate() {
        let moves: Vec<String> = ms.departures.iter().map(|d| format!("k{}:{}->{}", d.k, d.from, d.to)).collect();
        println!("  mesd{s}: moves [{}]", moves.join(", "));
    }
}
