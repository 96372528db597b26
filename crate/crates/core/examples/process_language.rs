//! Parse a small program, check it, and list the one-step distribution.

use evometric::dataspace::{DataSpace, DataState, VarSpec};
use evometric::process::{parse_program, print_program, pstep, validate, Process};

fn main() -> evometric::Result<()> {
    let program = parse_program(
        "Walk := 0.5: (x + 1 -> x).Walk + 0.5: (x - 1 -> x).Walk;
         Count := (n + 1 -> n).Count;
         Sys := Walk | Count;",
    )?;
    print!("{}", print_program(&program.defs, None));

    let space = DataSpace::new(vec![VarSpec::continuous("x", -50.0, 50.0), VarSpec::continuous("n", 0.0, 1e6)])?;
    let sys = Process::call("Sys");
    let report = validate(&sys, &program.defs, &space);
    println!("valid: {}", report.is_valid());

    let d = DataState::new(space, vec![0.0, 0.0])?;
    let dist = pstep(&sys, &d, &program.defs)?;
    for b in dist.branches() {
        let next = b.effect.apply(&d)?;
        println!("p = {:.2}: x = {}, n = {}, then {}", b.prob, next.get("x")?, next.get("n")?, b.next);
    }
    println!("total mass {}", dist.total_mass());
    Ok(())
}
