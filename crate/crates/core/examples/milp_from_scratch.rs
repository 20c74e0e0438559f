//! The MILP layer on its own: a tiny facility-location model.

use feederopt::milp::{solve_milp, MathProgram, Sense};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Two sites with fixed opening costs serve a demand of 7.
    let mut p = MathProgram::new("sites");
    let open = [p.add_binary("open_a"), p.add_binary("open_b")];
    let flow = [p.add_var("flow_a", 0.0, 5.0), p.add_var("flow_b", 0.0, 5.0)];
    for (k, (fixed, unit)) in [(10.0, 1.0), (4.0, 2.5)].into_iter().enumerate() {
        p.set_objective(open[k], fixed);
        p.set_objective(flow[k], unit);
        p.add_constraint(format!("cap_{k}"), [(flow[k], 1.0), (open[k], -5.0)], Sense::Le, 0.0);
    }
    p.add_constraint("demand", [(flow[0], 1.0), (flow[1], 1.0)], Sense::Ge, 7.0);

    let r = solve_milp(&p)?;
    println!("status {}, objective {:.3}, {} nodes", r.status, r.objective, r.nodes);
    for v in open.iter().chain(&flow) {
        println!("  {} = {:.3}", p.var(*v).name, r.value(*v));
    }
    Ok(())
}
