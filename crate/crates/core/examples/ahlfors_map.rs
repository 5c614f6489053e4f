//! Ahlfors map of a three-connected circle domain: base point, zeros,
//! critical points and boundary behaviour.

use kernelsmith::identities::Workbench;
use kernelsmith::suites::base_point;
use kernelsmith::DomainSpec;

fn main() -> kernelsmith::Result<()> {
    let domain = DomainSpec::three_connected(256).build()?;
    let bench = Workbench::new(&domain)?;
    let a = base_point(&bench)?;
    let sol = bench.szego.solve(a)?;
    let f = sol.ahlfors()?;
    println!("base point a = {a:.6}");
    println!("f_a'(a) = {:.12}, 2 pi S(a, a) = {:.12}", f.derivative_at_a(), 2.0 * std::f64::consts::PI * sol.s(a)?.re);
    println!("| |f_a| - 1 | on the boundary (extension): {:.2e}", f.extension_modulus_error()?);
    println!("winding of f_a per curve: {:?}", f.windings()?.iter().map(|w| w.round()).collect::<Vec<_>>());
    for z in f.zeros()?.zeros {
        println!("zero      {z:.8}");
    }
    for z in f.critical_points()?.zeros {
        println!("critical  {z:.8}");
    }
    Ok(())
}
