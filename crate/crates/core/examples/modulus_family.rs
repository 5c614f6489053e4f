//! Conformal modulus of A(r) as r grows.

use kernelsmith::potential::Potential;
use kernelsmith::DomainSpec;

fn main() -> kernelsmith::Result<()> {
    println!("r,modulus");
    for k in 0..10 {
        let r = 2.1 + 0.2 * k as f64;
        let domain = DomainSpec::ar(r, 256).build()?;
        println!("{r:.1},{:.12}", Potential::new(&domain)?.modulus()?);
    }
    Ok(())
}
