//! Transformation laws of K, Λ, S, L and G under the self-maps 1/z and -z of
//! A(3), and the invariant I under 1/z.

use kernelsmith::algebra::{invariant_i, ArMap};
use kernelsmith::identities::{biholo_transport_check, Workbench};
use kernelsmith::{Complex64, DomainSpec};

fn main() -> kernelsmith::Result<()> {
    let domain = DomainSpec::ar(3.0, 256).build()?;
    let bench = Workbench::new(&domain)?;
    let inversion = biholo_transport_check(&bench, &bench, |z| 1.0 / z, |z| -1.0 / (z * z), "inversion", 1e-8)?;
    let rotation = biholo_transport_check(&bench, &bench, |z| -z, |_| Complex64::new(-1.0, 0.0), "rotation", 1e-8)?;
    for rec in inversion.iter().chain(&rotation) {
        println!("{:<32} {:.2e} {}", rec.id, rec.residual, if rec.pass { "ok" } else { "FAIL" });
    }
    let f = ArMap { r: 3.0 };
    let (z, w) = (Complex64::new(1.3, 0.5), Complex64::new(-0.4, 1.1));
    let i0 = invariant_i(&bench.potential, &f, z, w)?;
    let i1 = invariant_i(&bench.potential, &f, 1.0 / z, 1.0 / w)?;
    println!("I(z, w) = {i0:.12}\nI(1/z, 1/w) = {i1:.12}");
    Ok(())
}
