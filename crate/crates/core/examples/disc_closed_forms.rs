//! Szegő, Garabedian, Bergman kernels and the Ahlfors map of the unit disc
//! against their closed forms.

use std::f64::consts::PI;

use kernelsmith::identities::Workbench;
use kernelsmith::probes::probe_pairs;
use kernelsmith::{Complex64, DomainSpec};

fn main() -> kernelsmith::Result<()> {
    let domain = DomainSpec::unit_disc(256).build()?;
    let bench = Workbench::new(&domain)?;
    let mut worst = [0.0f64; 4];
    for (z, w) in probe_pairs(&domain, 40, 0.1, 0.05, 3) {
        let sol = bench.szego.solve(w)?;
        let ahlfors = sol.ahlfors()?;
        let d = 1.0 - z * w.conj();
        let pairs = [
            (sol.s(z)?, 1.0 / (2.0 * PI * d)),
            (sol.l(z)?, 1.0 / (2.0 * PI * (z - w))),
            (bench.potential.bergman(z, w)?, 1.0 / (PI * d * d)),
            (ahlfors.eval(z)?, (z - w) / d),
        ];
        for (k, (num, exact)) in pairs.iter().enumerate() {
            worst[k] = worst[k].max((num - exact).norm() / exact.norm().max(1e-300));
        }
    }
    for (name, e) in ["S", "L", "K", "f_w"].iter().zip(worst) {
        println!("{name:>3}: max relative error {e:.2e}");
    }
    let a = Complex64::new(0.3, 0.2);
    let f = bench.szego.solve(a)?.ahlfors()?;
    println!("f_a'(a) = {:.12} (exact {:.12})", f.derivative_at_a(), 1.0 / (1.0 - a.norm_sqr()));
    Ok(())
}
