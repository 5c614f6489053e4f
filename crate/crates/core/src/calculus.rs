//! Boundary fields and the periodic-trapezoid calculus on them.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::geometry::{Domain, GridId};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Complex samples aligned with a domain's concatenated boundary grid.
#[derive(Debug, Clone)]
pub struct BoundaryField {
    values: Vec<Complex64>,
    grid: GridId,
}

impl BoundaryField {
    /// Field from a function of `(curve index, node index, z, z')`.
    pub fn from_nodes(
        domain: &Domain,
        f: impl Fn(usize, usize, Complex64, Complex64) -> Complex64,
    ) -> Self {
        Self {
            values: domain.nodes().map(|(ci, k, z, d)| f(ci, k, z, d)).collect(),
            grid: domain.id(),
        }
    }

    /// Boundary trace of a function of `z`.
    pub fn from_fn(domain: &Domain, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self::from_nodes(domain, |_, _, z, _| f(z))
    }

    pub fn from_values(domain: &Domain, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != domain.total_samples() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { values, grid: domain.id() })
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn grid(&self) -> GridId {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self { values: self.values.iter().map(|&v| f(v)).collect(), grid: self.grid }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
            grid: self.grid,
        })
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: Complex64, other: &Self, beta: Complex64) -> Result<Self> {
        self.zip_with(other, |a, b| alpha * a + beta * b)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn min_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn check(&self, domain: &Domain) -> Result<()> {
        if self.grid != domain.id() || self.values.len() != domain.total_samples() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Spectral derivative `d/dt` of equispaced samples of a 1-periodic function
/// on `[0, 1)`. The Nyquist mode is dropped.
pub fn spectral_dt(values: &[Complex64]) -> Vec<Complex64> {
    let m = values.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf = values.to_vec();
    planner.plan_fft_forward(m).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let freq = if k < m / 2 {
            k as f64
        } else if k == m / 2 && m % 2 == 0 {
            0.0
        } else {
            k as f64 - m as f64
        };
        *c *= Complex64::new(0.0, 2.0 * PI * freq / m as f64);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    buf
}

/// Trapezoid value of `∫ f ds` over the whole boundary.
pub fn integrate_ds(domain: &Domain, field: &BoundaryField) -> Result<Complex64> {
    field.check(domain)?;
    Ok(domain
        .ds_weights()
        .iter()
        .zip(field.values())
        .map(|(w, v)| v * w)
        .sum())
}

/// Trapezoid value of `∮ f dz` over the whole positively oriented boundary.
pub fn integrate_dz(domain: &Domain, field: &BoundaryField) -> Result<Complex64> {
    field.check(domain)?;
    Ok(domain
        .dz_weights()
        .iter()
        .zip(field.values())
        .map(|(w, v)| v * w)
        .sum())
}

/// `∮ f dz` over one curve only.
pub fn integrate_dz_curve(domain: &Domain, field: &BoundaryField, curve: usize) -> Result<Complex64> {
    field.check(domain)?;
    let c = domain.curve(curve)?;
    let off = domain.offsets()[curve];
    let m = c.len() as f64;
    Ok(c.deriv()
        .iter()
        .zip(&field.values()[off..off + c.len()])
        .map(|(d, v)| v * d / m)
        .sum())
}

/// Boundary trace of `h'(z)` from the trace of a function `h` holomorphic near
/// the boundary: spectral `d/dt` divided by `z'(t)`.
pub fn boundary_derivative(domain: &Domain, field: &BoundaryField) -> Result<BoundaryField> {
    field.check(domain)?;
    let mut out = Vec::with_capacity(field.len());
    for (ci, c) in domain.curves().iter().enumerate() {
        let off = domain.offsets()[ci];
        let dt = spectral_dt(&field.values()[off..off + c.len()]);
        out.extend(dt.iter().zip(c.deriv()).map(|(v, d)| v / d));
    }
    BoundaryField::from_values(domain, out)
}

/// Per-curve spectral `d/dt` of a field (no division by `z'`).
pub fn boundary_dt(domain: &Domain, field: &BoundaryField) -> Result<BoundaryField> {
    field.check(domain)?;
    let mut out = Vec::with_capacity(field.len());
    for (ci, c) in domain.curves().iter().enumerate() {
        let off = domain.offsets()[ci];
        out.extend(spectral_dt(&field.values()[off..off + c.len()]));
    }
    BoundaryField::from_values(domain, out)
}

/// Cauchy integral `(1/2πi)∮ f(ζ)/(ζ - z) dζ` without any guard checks.
pub fn cauchy_unchecked(domain: &Domain, field: &BoundaryField, z: Complex64) -> Complex64 {
    let mut acc = ZERO;
    let mut i = 0;
    for c in domain.curves() {
        let m = c.len() as f64;
        for (zeta, d) in c.samples().iter().zip(c.deriv()) {
            acc += field.values[i] * d / (m * (zeta - z));
            i += 1;
        }
    }
    acc / Complex64::new(0.0, 2.0 * PI)
}

/// Interior value of the holomorphic function whose boundary trace is
/// `field`. The point must clear the guard distance.
pub fn cauchy_interior(domain: &Domain, field: &BoundaryField, z: Complex64) -> Result<Complex64> {
    field.check(domain)?;
    domain.check_interior(z)?;
    Ok(cauchy_unchecked(domain, field, z))
}

/// Boundary values, approached from inside, of the Cauchy integral of
/// `field`. For the trace of a function holomorphic in the domain this
/// reproduces the field; the deviation measures how far a trace is from being
/// holomorphically extendable.
pub fn cauchy_boundary_limit(domain: &Domain, field: &BoundaryField) -> Result<BoundaryField> {
    let dt = boundary_dt(domain, field)?;
    let pts = domain.points();
    let dz = domain.dz_weights();
    let g = field.values();
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    let inv_m: Vec<f64> = domain
        .curves()
        .iter()
        .flat_map(|c| std::iter::repeat(1.0 / c.len() as f64).take(c.len()))
        .collect();
    let mut out = Vec::with_capacity(g.len());
    for i in 0..g.len() {
        let mut acc = dt.values()[i] * inv_m[i];
        for j in 0..g.len() {
            if j != i {
                acc += (g[j] - g[i]) * dz[j] / (pts[j] - pts[i]);
            }
        }
        out.push(g[i] + acc / two_pi_i);
    }
    BoundaryField::from_values(domain, out)
}

/// Zeros reported by [`find_zeros`].
#[derive(Debug, Clone)]
pub struct ZeroSet {
    pub zeros: Vec<Complex64>,
    /// Argument-principle count before rounding.
    pub count: f64,
    /// Set when two zeros are closer than `1e-4`.
    pub clustered: bool,
}

/// Zeros of a holomorphic `g` inside the domain from its boundary traces.
///
/// Newton sums `s_p = (1/2πi)∮ z^p g'/g dz` give the power sums of the zeros;
/// Newton's identities turn them into a monic polynomial whose roots are then
/// polished by Newton's method on Cauchy-evaluated `g` and `g'`.
pub fn find_zeros(
    domain: &Domain,
    g: &BoundaryField,
    g_deriv: &BoundaryField,
    expected_count: usize,
) -> Result<ZeroSet> {
    g.check(domain)?;
    g_deriv.check(domain)?;
    let gmax = g.max_abs();
    if g.min_abs() <= 1e-10 * gmax.max(1e-300) {
        return Err(Error::Invalid("g vanishes on the boundary".into()));
    }
    let ratio: Vec<Complex64> = g_deriv.values.iter().zip(&g.values).map(|(d, v)| d / v).collect();
    let dz = domain.dz_weights();
    let pts = domain.points();
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    let power_sum = |p: i32| -> Complex64 {
        pts.iter()
            .zip(&dz)
            .zip(&ratio)
            .map(|((z, w), r)| z.powi(p) * r * w)
            .sum::<Complex64>()
            / two_pi_i
    };
    let s0 = power_sum(0);
    let count = s0.re;
    if (count - expected_count as f64).abs() > 1e-6 || s0.im.abs() > 1e-6 {
        return Err(Error::CountMismatch { expected: expected_count, counted: count });
    }
    let k = expected_count;
    if k == 0 {
        return Ok(ZeroSet { zeros: vec![], count, clustered: false });
    }
    let sums: Vec<Complex64> = (1..=k as i32).map(power_sum).collect();
    // Elementary symmetric polynomials from power sums.
    let mut e = vec![Complex64::new(1.0, 0.0)];
    for j in 1..=k {
        let mut acc = ZERO;
        for i in 1..=j {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * e[j - i] * sums[i - 1];
        }
        e.push(acc / j as f64);
    }
    // Monic polynomial in ascending order: prod (z - z_i).
    let mut coeffs = vec![ZERO; k + 1];
    for (j, ej) in e.iter().enumerate() {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        coeffs[k - j] = sign * ej;
    }
    let mut zeros = poly_roots(&coeffs);
    for z in zeros.iter_mut() {
        for _ in 0..30 {
            let gv = cauchy_unchecked(domain, g, *z);
            let dv = cauchy_unchecked(domain, g_deriv, *z);
            if dv.norm() == 0.0 {
                break;
            }
            let step = gv / dv;
            *z -= step;
            if step.norm() <= 1e-15 * (1.0 + z.norm()) {
                break;
            }
        }
        let resid = cauchy_unchecked(domain, g, *z).norm();
        if resid > 1e-9 * gmax {
            return Err(Error::Resolution(format!(
                "zero polish stalled at {z}: |g| = {resid:.2e}"
            )));
        }
    }
    zeros.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
    let clustered = min_pairwise_distance(&zeros) < 1e-4;
    Ok(ZeroSet { zeros, count, clustered })
}

pub(crate) fn min_pairwise_distance(pts: &[Complex64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            best = best.min((pts[i] - pts[j]).norm());
        }
    }
    best
}

/// Horner evaluation of `p` and `p'` (ascending coefficients).
pub fn poly_eval(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = ZERO;
    let mut dp = ZERO;
    for c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All roots of a polynomial given in ascending coefficient order, by the
/// Aberth–Ehrlich iteration. Leading zero coefficients are dropped.
pub fn poly_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut deg = coeffs.len().saturating_sub(1);
    while deg > 0 && coeffs[deg].norm() <= 1e-14 * scale {
        deg -= 1;
    }
    if deg == 0 {
        return vec![];
    }
    let p = &coeffs[..=deg];
    let lead = p[deg];
    // Cauchy bound for the initial circle.
    let bound = 1.0 + p[..deg].iter().map(|c| (c / lead).norm()).fold(0.0, f64::max);
    let radius = bound.min(
        p[..deg]
            .iter()
            .enumerate()
            .map(|(i, c)| (c / lead).norm().powf(1.0 / (deg - i) as f64))
            .fold(0.0, f64::max)
            .max(1e-3),
    );
    let mut roots: Vec<Complex64> = (0..deg)
        .map(|j| Complex64::from_polar(radius, 2.0 * PI * j as f64 / deg as f64 + 0.4))
        .collect();
    for _ in 0..500 {
        let mut max_step: f64 = 0.0;
        for i in 0..deg {
            let (v, dv) = poly_eval(p, roots[i]);
            if v.norm() == 0.0 {
                continue;
            }
            let ratio = v / dv;
            let repulsion: Complex64 = (0..deg)
                .filter(|&j| j != i)
                .map(|j| 1.0 / (roots[i] - roots[j]))
                .sum();
            let step = ratio / (1.0 - ratio * repulsion);
            roots[i] -= step;
            max_step = max_step.max(step.norm() / (1.0 + roots[i].norm()));
        }
        if max_step < 1e-16 {
            break;
        }
    }
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let (v, dv) = poly_eval(p, *r);
            if dv.norm() == 0.0 {
                break;
            }
            let cand = *r - v / dv;
            if poly_eval(p, cand).0.norm() < v.norm() {
                *r = cand;
            } else {
                break;
            }
        }
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn contour_integrals() {
        let disc = DomainSpec::unit_disc(64).build().unwrap();
        let inv = BoundaryField::from_fn(&disc, |z| 1.0 / z);
        assert!((integrate_dz(&disc, &inv).unwrap() - c(0.0, 2.0 * PI)).norm() < 1e-14);
        let id = BoundaryField::from_fn(&disc, |z| z);
        assert!(integrate_dz(&disc, &id).unwrap().norm() < 1e-14);
        let one = BoundaryField::from_fn(&disc, |_| c(1.0, 0.0));
        assert!((integrate_ds(&disc, &one).unwrap() - c(2.0 * PI, 0.0)).norm() < 1e-13);

        let ann = DomainSpec::annulus(0.5, 64).build().unwrap();
        let hole_pole = BoundaryField::from_fn(&ann, |z| 1.0 / (z - c(0.1, 0.1)));
        assert!(integrate_dz(&ann, &hole_pole).unwrap().norm() < 1e-13);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let a = DomainSpec::unit_disc(64).build().unwrap();
        let b = DomainSpec::unit_disc(64).build().unwrap();
        let f = BoundaryField::from_fn(&a, |z| z);
        assert!(matches!(integrate_dz(&b, &f), Err(Error::GridMismatch)));
        let g = BoundaryField::from_fn(&b, |z| z);
        assert!(f.zip_with(&g, |x, y| x + y).is_err());
    }

    #[test]
    fn derivative_of_traces() {
        let disc = DomainSpec::unit_disc(64).build().unwrap();
        let sq = BoundaryField::from_fn(&disc, |z| z * z);
        let d = boundary_derivative(&disc, &sq).unwrap();
        for (v, z) in d.values().iter().zip(disc.points()) {
            assert!((v - 2.0 * z).norm() < 1e-12);
        }
        let inv = BoundaryField::from_fn(&disc, |z| 1.0 / z);
        let d = boundary_derivative(&disc, &inv).unwrap();
        for (v, z) in d.values().iter().zip(disc.points()) {
            assert!((v + 1.0 / (z * z)).norm() < 1e-12);
        }
    }

    #[test]
    fn derivative_self_convergence() {
        // Pole at distance 0.25 from the unit circle: geometric convergence.
        let f = |z: Complex64| 1.0 / (z - c(1.25, 0.0));
        let df = |z: Complex64| -1.0 / ((z - c(1.25, 0.0)) * (z - c(1.25, 0.0)));
        let err = |m: usize| {
            let d = DomainSpec::unit_disc(m).build().unwrap();
            let tr = boundary_derivative(&d, &BoundaryField::from_fn(&d, f)).unwrap();
            tr.values()
                .iter()
                .zip(d.points())
                .map(|(v, z)| (v - df(z)).norm())
                .fold(0.0, f64::max)
        };
        let (e128, e256) = (err(128), err(256));
        assert!(e128 / e256 >= 1e3, "{e128:e} {e256:e}");
    }

    #[test]
    fn cauchy_reproduces_holomorphic_functions() {
        let disc = DomainSpec::unit_disc(256).build().unwrap();
        let sq = BoundaryField::from_fn(&disc, |z| z * z);
        let z = c(0.3, 0.1);
        assert!((cauchy_interior(&disc, &sq, z).unwrap() - z * z).norm() < 1e-12);

        let ann = DomainSpec::annulus(0.5, 256).build().unwrap();
        let inv = BoundaryField::from_fn(&ann, |z| 1.0 / z);
        assert!((cauchy_interior(&ann, &inv, c(0.7, 0.0)).unwrap() - 1.0 / 0.7).norm() < 1e-10);

        let conj = BoundaryField::from_fn(&ann, |z| z.conj());
        let v = cauchy_interior(&ann, &conj, c(0.7, 0.0)).unwrap();
        assert!((v - 0.7).norm() > 1e-2);
    }

    #[test]
    fn boundary_limit_detects_holomorphy() {
        let ann = DomainSpec::annulus(0.5, 128).build().unwrap();
        let f = BoundaryField::from_fn(&ann, |z| 1.0 / z + z * z);
        let lim = cauchy_boundary_limit(&ann, &f).unwrap();
        let err = lim.zip_with(&f, |a, b| a - b).unwrap().max_abs();
        assert!(err < 1e-12, "{err:e}");
        let g = BoundaryField::from_fn(&ann, |z| z.conj());
        let lim = cauchy_boundary_limit(&ann, &g).unwrap();
        assert!(lim.zip_with(&g, |a, b| a - b).unwrap().max_abs() > 0.1);
    }

    #[test]
    fn cauchy_guard() {
        let disc = DomainSpec::unit_disc(256).build().unwrap();
        let f = BoundaryField::from_fn(&disc, |z| z);
        assert!(matches!(cauchy_interior(&disc, &f, c(0.95, 0.0)), Err(Error::Guard(_))));
        assert!(matches!(cauchy_interior(&disc, &f, c(1.5, 0.0)), Err(Error::Guard(_))));
    }

    #[test]
    fn zeros_of_polynomials() {
        let disc = DomainSpec::unit_disc(128).build().unwrap();
        let g = BoundaryField::from_fn(&disc, |z| z * z - 0.25);
        let dg = BoundaryField::from_fn(&disc, |z| 2.0 * z);
        let zs = find_zeros(&disc, &g, &dg, 2).unwrap();
        assert!((zs.zeros[0] + 0.5).norm() < 1e-12);
        assert!((zs.zeros[1] - 0.5).norm() < 1e-12);
        assert!(!zs.clustered);

        let one = BoundaryField::from_fn(&disc, |_| c(1.0, 0.0));
        let zero = BoundaryField::from_fn(&disc, |_| c(0.0, 0.0));
        assert!(find_zeros(&disc, &one, &zero, 0).unwrap().zeros.is_empty());
        assert!(matches!(find_zeros(&disc, &g, &dg, 1), Err(Error::CountMismatch { .. })));
    }

    #[test]
    fn aberth_roots() {
        // (z-1)(z+2)(z-i)
        let roots = [c(1.0, 0.0), c(-2.0, 0.0), c(0.0, 1.0)];
        let mut coeffs = vec![c(1.0, 0.0)];
        for r in roots {
            let mut next = vec![c(0.0, 0.0); coeffs.len() + 1];
            for (i, a) in coeffs.iter().enumerate() {
                next[i + 1] += a;
                next[i] -= a * r;
            }
            coeffs = next;
        }
        let found = poly_roots(&coeffs);
        for r in roots {
            assert!(found.iter().any(|f| (f - r).norm() < 1e-12));
        }
    }
}
