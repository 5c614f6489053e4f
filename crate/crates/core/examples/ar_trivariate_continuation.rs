//! The algebraic relation P(K(z, w), f(z), conj f(w)) = 0 on A(3), root
//! tracking of K(·, w) inside the domain and across its boundary, and a
//! monodromy loop around a branch point.

use kernelsmith::algebra::{
    ar_kernel_relation, continue_kernel, discriminant_scan, line_path, loop_path, sample_triple, ArMap, ProperMap,
};
use kernelsmith::potential::Potential;
use kernelsmith::{Complex64, DomainSpec};

fn main() -> kernelsmith::Result<()> {
    let r = 3.0;
    let domain = DomainSpec::ar(r, 256).build()?;
    let potential = Potential::new(&domain)?;
    let f = ArMap { r };
    let samples = sample_triple(&potential, &f, 1500, 60)?;
    let rel = ar_kernel_relation(&samples, r, 2, 8)?;
    let p = &rel.kernel;
    println!("invariant relation degrees ({}, {}, {})", rel.invariant.dk, rel.invariant.dp, rel.invariant.dq);
    println!("kernel relation degrees ({}, {}, {}), validation {:.2e}", p.dk, p.dp, p.dq, p.validation_residual);

    let w = Complex64::new(0.9, 0.3);
    let inside = line_path(Complex64::new(-1.2, 1.4), Complex64::new(1.6, 0.6), 40);
    let trace = continue_kernel(p, &f, w, &inside, potential.bergman(inside[0], w)?)?;
    let worst = trace
        .points
        .iter()
        .zip(&trace.values)
        .map(|(z, v)| (v - potential.bergman(*z, w).unwrap()).norm())
        .fold(0.0, f64::max);
    println!("inside: max |tracked - K| = {worst:.2e} over {} steps", trace.steps);

    let across = line_path(Complex64::new(1.6, 0.6), Complex64::new(2.8, 0.0), 40);
    let trace = continue_kernel(p, &f, w, &across, potential.bergman(across[0], w)?)?;
    println!("outside at z = 2.8: continued value {:.6}", trace.values.last().unwrap());
    println!("  {} branches:", trace.endpoint_roots.len());
    for root in &trace.endpoint_roots {
        println!("    {root:.6}");
    }

    // Candidate branch points: small root gaps outside the closure of A(3),
    // refined on two finer local grids.
    let y = f.value(w)?.conj();
    let scan = discriminant_scan(p, &f, w, Complex64::new(-5.0, -5.0), Complex64::new(5.0, 5.0), 101)?;
    let candidates: Vec<Complex64> =
        scan.iter().filter(|(z, _)| f.value(*z).map_or(false, |v| v.norm() > 1.05)).map(|(z, _)| *z).take(6).collect();
    let mut visited: Vec<Complex64> = Vec::new();
    for z0 in candidates {
        let mut center = z0;
        for half in [0.1, 0.005] {
            let d = Complex64::new(half, half);
            center = discriminant_scan(p, &f, w, center - d, center + d, 41)?[0].0;
        }
        if visited.iter().any(|v| (v - center).norm() < 0.05) {
            continue;
        }
        visited.push(center);
        let path = loop_path(center, 0.02, 0.0, 400);
        let roots = p.k_roots(f.value(path[0])?, y);
        let mut moved = 0;
        for seed in &roots {
            if let Ok(t) = continue_kernel(p, &f, w, &path, *seed) {
                if (t.values.last().unwrap() - seed).norm() > 1e-6 * p.k_scale {
                    moved += 1;
                }
            }
        }
        println!("loop of radius 0.02 around {center:.4}: {moved} of {} branches permuted", roots.len());
        if moved > 0 {
            break;
        }
    }
    Ok(())
}
