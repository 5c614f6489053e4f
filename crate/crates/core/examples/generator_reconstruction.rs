//! Rebuilds the Bergman kernel of a three-connected domain from the finite
//! generator set and compares with the direct Dirichlet solve.

use kernelsmith::identities::{build_generator_set, fit_expansions, reconstruct_bergman, Workbench};
use kernelsmith::probes::probe_pairs;
use kernelsmith::suites::base_point;
use kernelsmith::DomainSpec;

fn main() -> kernelsmith::Result<()> {
    let domain = DomainSpec::three_connected(256).build()?;
    let bench = Workbench::new(&domain)?;
    let a = base_point(&bench)?;
    let gs = build_generator_set(&bench, a)?;
    let n = domain.connectivity();
    println!("generator set has {} points (bound n^2 - 2n + 2 = {})", gs.points.len(), n * n - 2 * n + 2);
    for p in &gs.points {
        println!("  {p:.8}");
    }
    let exp = fit_expansions(&bench, &gs)?;
    let rec = reconstruct_bergman(&gs, &exp)?;
    let (mut err, mut scale): (f64, f64) = (0.0, 0.0);
    for (z, w) in probe_pairs(&domain, 50, 0.1, 0.1, 5) {
        let (Ok(rebuilt), Ok(direct)) = (rec.eval(z, w), bench.potential.bergman(z, w)) else { continue };
        err = err.max((rebuilt - direct).norm());
        scale = scale.max(direct.norm());
    }
    println!("max |K_rebuilt - K| / max |K| = {:.2e}", err / scale);
    Ok(())
}
