//! Szegő kernel of the annulus 0.5 < |z| < 1: boundary identity residual,
//! the zero of S(·, a), and agreement with the Laurent series.

use std::f64::consts::PI;

use kernelsmith::identities::Workbench;
use kernelsmith::{Complex64, DomainSpec};

/// `S(z, w) = (1/2π) Σ_k (z conj w)^k / (1 + ρ^(2k+1))` over all integers k.
fn series(rho: f64, z: Complex64, w: Complex64) -> Complex64 {
    let t = z * w.conj();
    (-200..=200).map(|k: i32| t.powi(k) / (1.0 + rho.powi(2 * k + 1))).sum::<Complex64>() / (2.0 * PI)
}

fn main() -> kernelsmith::Result<()> {
    let rho = 0.5;
    let domain = DomainSpec::annulus(rho, 256).build()?;
    let bench = Workbench::new(&domain)?;
    let a = Complex64::new(0.0, 0.75);
    let sol = bench.szego.solve(a)?;
    println!("boundary identity residual: {:.2e}", sol.identity_residual()?);
    let zeros = sol.zeros()?;
    println!("zeros of S(., a): {:?} (count {:.6})", zeros.zeros, zeros.count);
    for z in [Complex64::new(0.7, 0.1), Complex64::new(-0.6, -0.5), Complex64::new(0.1, -0.8)] {
        let s = sol.s(z)?;
        let exact = series(rho, z, a);
        println!("S({z:.2}, a) = {s:.10}  series error {:.1e}", (s - exact).norm());
    }
    Ok(())
}
