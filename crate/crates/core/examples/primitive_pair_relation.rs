//! Polynomial relation between f(z) = (z + 1/z)/3 and K(z, b)/f'(z) on A(3).

use kernelsmith::algebra::{discover_pair_relation, ArMap};
use kernelsmith::potential::Potential;
use kernelsmith::{Complex64, DomainSpec};

fn main() -> kernelsmith::Result<()> {
    let domain = DomainSpec::ar(3.0, 256).build()?;
    let potential = Potential::new(&domain)?;
    let (m, samples) = discover_pair_relation(&potential, &ArMap { r: 3.0 }, Complex64::new(0.1, 0.75), 400, 8)?;
    let rel = &m.relation;
    println!("b = {:.4}", samples.b);
    println!("bidegree (du, dv) = ({}, {})", rel.du, rel.dv);
    println!("validation residual {:.2e}, gap to dv - 1: {:.2e}", rel.validation_residual, m.gap);
    print!("{}", m.table_csv().lines().take(12).collect::<Vec<_>>().join("\n"));
    println!("\n...");
    Ok(())
}
