//! Bergman kernel, Λ kernel and Green's function of A(3) from the Dirichlet
//! solver, with their symmetries.

use kernelsmith::potential::Potential;
use kernelsmith::{Complex64, DomainSpec};

fn main() -> kernelsmith::Result<()> {
    let domain = DomainSpec::ar(3.0, 256).build()?;
    let potential = Potential::new(&domain)?;
    let z = Complex64::new(1.2, 0.4);
    let w = Complex64::new(-0.5, 0.9);
    let k = potential.bergman(z, w)?;
    println!("K(z, w)     = {k:.12}");
    println!("conj K(w,z) = {:.12}", potential.bergman(w, z)?.conj());
    let l = potential.lambda(z, w)?;
    println!("Λ(z, w)     = {l:.12}");
    println!("Λ(w, z)     = {:.12}", potential.lambda(w, z)?);
    let g = potential.green(z, w)?;
    println!("G(z, w) = {g:.12}, G(w, z) = {:.12}", potential.green(w, z)?);
    // z -> 1/z maps A(r) onto itself; K picks up φ'(z) conj φ'(w).
    let (zi, wi) = (1.0 / z, 1.0 / w);
    let moved = potential.bergman(zi, wi)? * (-1.0 / (z * z)) * (-1.0 / (w * w)).conj();
    println!("K(1/z, 1/w)·φ'(z)·conj φ'(w) - K(z, w) = {:.1e}", (moved - k).norm());
    Ok(())
}
