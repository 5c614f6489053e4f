//! Deterministic interior probe placement (Halton sequences).

use num_complex::Complex64;

use crate::geometry::Domain;

/// Default clearance of probes from the boundary.
pub const PROBE_CLEARANCE: f64 = 0.05;

/// Radical inverse of `index` in `base`.
pub fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// `count` interior points at distance at least `clearance` (and the guard)
/// from the boundary. `stream` selects disjoint Halton streams so that
/// independent probe sets do not coincide.
pub fn interior_probes(domain: &Domain, count: usize, clearance: f64, stream: u64) -> Vec<Complex64> {
    let [x0, y0, x1, y1] = domain.outer().bounding_box();
    let mut out = Vec::with_capacity(count);
    let mut i = 1 + 7919 * stream;
    let limit = i + 200_000;
    while out.len() < count && i < limit {
        let p = Complex64::new(x0 + (x1 - x0) * halton(i, 2), y0 + (y1 - y0) * halton(i, 3));
        i += 1;
        if domain.is_admissible(p, clearance) {
            out.push(p);
        }
    }
    out
}

/// Probes that also keep `separation` away from each point of `avoid`.
pub fn interior_probes_avoiding(
    domain: &Domain,
    count: usize,
    clearance: f64,
    avoid: &[Complex64],
    separation: f64,
    stream: u64,
) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(count);
    let mut batch = count.max(8);
    while out.len() < count && batch < 1 << 16 {
        out = interior_probes(domain, batch, clearance, stream)
            .into_iter()
            .filter(|p| avoid.iter().all(|a| (p - a).norm() >= separation))
            .take(count)
            .collect();
        batch *= 2;
    }
    out
}

/// Pairs `(z, w)` of interior probes with `|z - w| >= separation`.
pub fn probe_pairs(
    domain: &Domain,
    count: usize,
    clearance: f64,
    separation: f64,
    stream: u64,
) -> Vec<(Complex64, Complex64)> {
    let zs = interior_probes(domain, 2 * count + 16, clearance, stream);
    let ws = interior_probes(domain, 2 * count + 16, clearance, stream + 1);
    let mut out = Vec::with_capacity(count);
    for (k, z) in zs.iter().enumerate() {
        if out.len() == count {
            break;
        }
        // Rotate the partner list so pairs are not aligned stream-wise.
        if let Some(w) = (0..ws.len())
            .map(|j| ws[(k * 7 + j) % ws.len()])
            .find(|w| (z - w).norm() >= separation)
        {
            out.push((*z, w));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;

    #[test]
    fn halton_values() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(2, 2), 0.25);
        assert!((halton(1, 3) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn probes_are_interior_and_deterministic() {
        let d = DomainSpec::annulus(0.5, 128).build().unwrap();
        let a = interior_probes(&d, 50, 0.05, 0);
        let b = interior_probes(&d, 50, 0.05, 0);
        assert_eq!(a.len(), 50);
        assert_eq!(a, b);
        for p in &a {
            assert!(p.norm() > 0.55 - 1e-12 && p.norm() < 0.95 + 1e-12);
        }
        let c = interior_probes(&d, 50, 0.05, 1);
        assert_ne!(a, c);
    }

    #[test]
    fn pairs_are_separated() {
        let d = DomainSpec::unit_disc(128).build().unwrap();
        for (z, w) in probe_pairs(&d, 40, 0.05, 0.1, 3) {
            assert!((z - w).norm() >= 0.1);
        }
    }
}
