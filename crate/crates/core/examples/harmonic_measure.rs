//! Harmonic measure of the inner circle of an annulus from the double layer
//! Dirichlet solver, against log|z| / log ρ, and the conformal modulus.

use kernelsmith::potential::Potential;
use kernelsmith::{Complex64, DomainSpec};

fn main() -> kernelsmith::Result<()> {
    let rho: f64 = 0.5;
    let domain = DomainSpec::annulus(rho, 256).build()?;
    let potential = Potential::new(&domain)?;
    let inner = domain.inner_indices()[0];
    let omega = potential.harmonic_measure(inner)?;
    let mut worst: f64 = 0.0;
    for k in 0..24 {
        let z = Complex64::from_polar(0.62 + 0.25 * (k % 4) as f64 / 3.0, 0.7 * k as f64);
        let exact = z.norm().ln() / rho.ln();
        worst = worst.max((omega.value(z)?.re - exact).abs());
    }
    println!("max |omega - log|z|/log rho| = {worst:.2e}");
    let m = potential.modulus()?;
    println!("modulus {m:.15} vs log(1/rho) {:.15}", (1.0 / rho).ln());
    Ok(())
}
