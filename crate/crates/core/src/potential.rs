//! Harmonic measures, Green's function and the Bergman family from a double
//! layer Dirichlet solver. Nothing here touches the Szegő machinery, so the
//! identities checked elsewhere compare independent computations.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Dyn, LU};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::calculus::{boundary_derivative, cauchy_boundary_limit, integrate_dz_curve, BoundaryField};
use crate::error::{Error, Result};
use crate::geometry::Domain;

/// Minimum `|z - w|` for kernels singular on the diagonal.
pub const DIAGONAL_GUARD: f64 = 1e-3;
/// Highest supported `w`-derivative order for `K_m` and `Λ_m`.
pub const MAX_ORDER: usize = 2;

/// Factored Nyström system for the interior Dirichlet problem:
/// a double layer plus one logarithmic source per hole, with zero-mean
/// density side conditions on each hole.
pub struct DirichletSolver<'d> {
    domain: &'d Domain,
    lu: LU<f64, Dyn, Dyn>,
    centers: Vec<Complex64>,
    holes: Vec<usize>,
}

impl<'d> DirichletSolver<'d> {
    pub fn new(domain: &'d Domain) -> Result<Self> {
        let n = domain.total_samples();
        let holes = domain.inner_indices();
        let centers: Vec<Complex64> = holes.iter().map(|&h| domain.curves()[h].centroid()).collect();
        let size = n + holes.len();
        let pts = domain.points();
        let mut a = DMatrix::<f64>::zeros(size, size);
        let mut col = 0;
        for c in domain.curves() {
            let m = c.len() as f64;
            for k in 0..c.len() {
                let (zj, dj) = (c.samples()[k], c.deriv()[k]);
                for (i, zi) in pts.iter().enumerate() {
                    a[(i, col)] = if i == col {
                        0.5 + (c.deriv2()[k] / (2.0 * dj)).im / (2.0 * PI * m)
                    } else {
                        (dj / (zj - zi)).im / (2.0 * PI * m)
                    };
                }
                col += 1;
            }
        }
        for (h, center) in centers.iter().enumerate() {
            for (i, zi) in pts.iter().enumerate() {
                a[(i, n + h)] = (zi - center).norm().ln();
            }
            let ci = holes[h];
            let c = &domain.curves()[ci];
            let off = domain.offsets()[ci];
            for k in 0..c.len() {
                a[(n + h, off + k)] = c.deriv()[k].norm() / c.len() as f64;
            }
        }
        let lu = a.lu();
        let diag = lu.u().diagonal();
        let (lo, hi) = diag
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d.abs()), hi.max(d.abs())));
        if !(lo > 1e-13 * hi) {
            return Err(Error::Resolution(format!("Dirichlet system pivot ratio {:.2e}", lo / hi)));
        }
        Ok(Self { domain, lu, centers, holes })
    }

    pub fn domain(&self) -> &'d Domain {
        self.domain
    }

    /// Harmonic extension of (possibly complex) boundary data; real and
    /// imaginary parts are solved independently.
    pub fn solve(&self, data: &BoundaryField) -> Result<HarmonicEvaluator<'d>> {
        if data.grid() != self.domain.id() {
            return Err(Error::GridMismatch);
        }
        let n = self.domain.total_samples();
        let size = n + self.holes.len();
        let mut rhs = DMatrix::<f64>::zeros(size, 2);
        for (i, v) in data.values().iter().enumerate() {
            rhs[(i, 0)] = v.re;
            rhs[(i, 1)] = v.im;
        }
        let x = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::Resolution("Dirichlet solve failed".into()))?;
        let density = (0..n).map(|i| Complex64::new(x[(i, 0)], x[(i, 1)])).collect();
        let logs = (0..self.holes.len())
            .map(|h| Complex64::new(x[(n + h, 0)], x[(n + h, 1)]))
            .collect();
        Ok(HarmonicEvaluator {
            domain: self.domain,
            density,
            logs,
            centers: self.centers.clone(),
        })
    }
}

/// `u(z) = D[μ](z) + Σ A_k ln|z - c_k|`, with analytic `∂u/∂z`.
#[derive(Clone)]
pub struct HarmonicEvaluator<'d> {
    domain: &'d Domain,
    density: Vec<Complex64>,
    logs: Vec<Complex64>,
    centers: Vec<Complex64>,
}

impl<'d> HarmonicEvaluator<'d> {
    pub fn density(&self) -> &[Complex64] {
        &self.density
    }

    /// Coefficients of the logarithmic sources, one per hole.
    pub fn log_coefficients(&self) -> &[Complex64] {
        &self.logs
    }

    pub fn log_centers(&self) -> &[Complex64] {
        &self.centers
    }

    pub fn value_unchecked(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut i = 0;
        for c in self.domain.curves() {
            let w = 1.0 / (2.0 * PI * c.len() as f64);
            for (zeta, d) in c.samples().iter().zip(c.deriv()) {
                acc += self.density[i] * ((d / (zeta - z)).im * w);
                i += 1;
            }
        }
        for (a, c) in self.logs.iter().zip(&self.centers) {
            acc += a * (z - c).norm().ln();
        }
        acc
    }

    pub fn value(&self, z: Complex64) -> Result<Complex64> {
        self.domain.check_interior(z)?;
        Ok(self.value_unchecked(z))
    }

    /// `∂u/∂z`, differentiating the representation term by term.
    pub fn dz_unchecked(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut i = 0;
        for c in self.domain.curves() {
            let m = c.len() as f64;
            for (zeta, d) in c.samples().iter().zip(c.deriv()) {
                let r = zeta - z;
                acc += self.density[i] * d / (r * r * m);
                i += 1;
            }
        }
        acc /= Complex64::new(0.0, 4.0 * PI);
        for (a, c) in self.logs.iter().zip(&self.centers) {
            acc += a / (2.0 * (z - c));
        }
        acc
    }

    pub fn dz(&self, z: Complex64) -> Result<Complex64> {
        self.domain.check_interior(z)?;
        Ok(self.dz_unchecked(z))
    }

    /// Boundary trace (from inside) of `∂u/∂z`.
    pub fn dz_boundary(&self) -> Result<BoundaryField> {
        let mu = BoundaryField::from_values(self.domain, self.density.clone())?;
        let cauchy = cauchy_boundary_limit(self.domain, &mu)?;
        let deriv = boundary_derivative(self.domain, &cauchy)?;
        let pts = self.domain.points();
        BoundaryField::from_values(
            self.domain,
            deriv
                .values()
                .iter()
                .zip(&pts)
                .map(|(d, z)| {
                    let logs: Complex64 =
                        self.logs.iter().zip(&self.centers).map(|(a, c)| a / (2.0 * (z - c))).sum();
                    d * 0.5 + logs
                })
                .collect(),
        )
    }

    /// Maximum deviation from `data(curve, ζ)` at the parameter midpoints
    /// between grid nodes, using the Nyström interpolant of the density.
    pub fn boundary_residual(&self, data: impl Fn(usize, Complex64) -> Complex64) -> f64 {
        let mids: Vec<Vec<Complex64>> =
            self.domain.curves().iter().map(|c| midpoint_values(c.samples())).collect();
        let mut worst: f64 = 0.0;
        for (ci, zs) in mids.iter().enumerate() {
            let off = self.domain.offsets()[ci];
            let len = self.domain.curves()[ci].len();
            let mu_mid = midpoint_values(&self.density[off..off + len]);
            for (k, zeta) in zs.iter().enumerate() {
                let mut acc = mu_mid[k] * 0.5;
                let mut i = 0;
                for c in self.domain.curves() {
                    let w = 1.0 / (2.0 * PI * c.len() as f64);
                    for (s, d) in c.samples().iter().zip(c.deriv()) {
                        acc += self.density[i] * ((d / (s - zeta)).im * w);
                        i += 1;
                    }
                }
                for (a, c) in self.logs.iter().zip(&self.centers) {
                    acc += a * (zeta - c).norm().ln();
                }
                worst = worst.max((acc - data(ci, *zeta)).norm());
            }
        }
        worst
    }
}

/// Trigonometric interpolant of equispaced periodic samples evaluated half a
/// step past each node.
fn midpoint_values(values: &[Complex64]) -> Vec<Complex64> {
    let m = values.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf = values.to_vec();
    planner.plan_fft_forward(m).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let freq = if k < m / 2 {
            k as f64
        } else if k == m / 2 && m % 2 == 0 {
            *c = Complex64::new(0.0, 0.0);
            continue;
        } else {
            k as f64 - m as f64
        };
        *c *= Complex64::from_polar(1.0 / m as f64, PI * freq / m as f64);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    buf
}

/// Which kernel a [`KernelColumn`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    /// `K_m(·, w) = ∂^m/∂w̄^m K(·, w)`.
    Bergman(usize),
    /// `Λ_m(·, w) = ∂^m/∂w^m Λ(·, w)`.
    Lambda(usize),
    /// `G(·, w)`.
    Green,
}

/// One kernel as a function of its first variable, second variable fixed.
#[derive(Clone)]
pub struct KernelColumn<'d> {
    kind: ColumnKind,
    w: Complex64,
    ext: HarmonicEvaluator<'d>,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

impl<'d> KernelColumn<'d> {
    pub fn kind(&self) -> ColumnKind {
        self.kind
    }

    pub fn w(&self) -> Complex64 {
        self.w
    }

    pub fn eval_unchecked(&self, z: Complex64) -> Complex64 {
        match self.kind {
            ColumnKind::Bergman(_) => -2.0 / PI * self.ext.dz_unchecked(z),
            ColumnKind::Lambda(m) => {
                factorial(m + 1) / (PI * (z - self.w).powi(m as i32 + 2))
                    - 2.0 / PI * self.ext.dz_unchecked(z)
            }
            ColumnKind::Green => -(z - self.w).norm().ln() + self.ext.value_unchecked(z),
        }
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        self.ext.domain.check_interior(z)?;
        if !matches!(self.kind, ColumnKind::Bergman(_)) && (z - self.w).norm() < DIAGONAL_GUARD {
            return Err(Error::Guard(format!(
                "diagonal guard: |z - w| = {:.2e} < {DIAGONAL_GUARD:e}",
                (z - self.w).norm()
            )));
        }
        Ok(self.eval_unchecked(z))
    }

    /// Boundary trace from inside (Bergman and Λ kinds) or the boundary
    /// values (Green, which vanish up to discretization error).
    pub fn boundary(&self) -> Result<BoundaryField> {
        let domain = self.ext.domain;
        match self.kind {
            ColumnKind::Green => Ok(BoundaryField::from_fn(domain, |z| {
                -(z - self.w).norm().ln() + self.ext.value_unchecked(z)
            })
            .map(|v| Complex64::new(v.re, 0.0))),
            _ => {
                let d = self.ext.dz_boundary()?;
                let pts = domain.points();
                let singular = |z: Complex64| match self.kind {
                    ColumnKind::Lambda(m) => factorial(m + 1) / (PI * (z - self.w).powi(m as i32 + 2)),
                    _ => Complex64::new(0.0, 0.0),
                };
                BoundaryField::from_values(
                    domain,
                    d.values().iter().zip(&pts).map(|(v, z)| singular(*z) - 2.0 / PI * v).collect(),
                )
            }
        }
    }
}

/// Dirichlet-based oracles for one domain.
pub struct Potential<'d> {
    solver: DirichletSolver<'d>,
    measures: Vec<HarmonicEvaluator<'d>>,
}

impl<'d> Potential<'d> {
    pub fn new(domain: &'d Domain) -> Result<Self> {
        let solver = DirichletSolver::new(domain)?;
        let measures = domain
            .inner_indices()
            .into_iter()
            .map(|h| {
                let data = BoundaryField::from_nodes(domain, |ci, _, _, _| {
                    Complex64::new(if ci == h { 1.0 } else { 0.0 }, 0.0)
                });
                solver.solve(&data)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { solver, measures })
    }

    pub fn domain(&self) -> &'d Domain {
        self.solver.domain
    }

    pub fn solver(&self) -> &DirichletSolver<'d> {
        &self.solver
    }

    pub fn dirichlet(&self, data: &BoundaryField) -> Result<HarmonicEvaluator<'d>> {
        self.solver.solve(data)
    }

    /// Harmonic measure `ω_j` of the `j`-th hole, `1 <= j <= n - 1`.
    pub fn harmonic_measure(&self, j: usize) -> Result<&HarmonicEvaluator<'d>> {
        if j == 0 || j > self.measures.len() {
            return Err(Error::Index { index: j, context: "harmonic measure (holes are 1..n-1)" });
        }
        Ok(&self.measures[j - 1])
    }

    /// `F_j'(z) = 2 ∂ω_j/∂z`.
    pub fn f_prime(&self, j: usize, z: Complex64) -> Result<Complex64> {
        Ok(2.0 * self.harmonic_measure(j)?.dz(z)?)
    }

    pub fn f_prime_boundary(&self, j: usize) -> Result<BoundaryField> {
        Ok(self.harmonic_measure(j)?.dz_boundary()?.map(|v| 2.0 * v))
    }

    fn check_w(&self, w: Complex64) -> Result<()> {
        self.domain().check_interior(w)
    }

    pub fn green_column(&self, w: Complex64) -> Result<KernelColumn<'d>> {
        self.check_w(w)?;
        let data = BoundaryField::from_fn(self.domain(), |z| Complex64::new((z - w).norm().ln(), 0.0));
        Ok(KernelColumn { kind: ColumnKind::Green, w, ext: self.solver.solve(&data)? })
    }

    /// Green's function, positive inside and zero on the boundary.
    pub fn green(&self, z: Complex64, w: Complex64) -> Result<f64> {
        Ok(self.green_column(w)?.eval(z)?.re)
    }

    pub fn bergman_column(&self, m: usize, w: Complex64) -> Result<KernelColumn<'d>> {
        if m > MAX_ORDER {
            return Err(Error::Invalid(format!("derivative order {m} > {MAX_ORDER} is unsupported")));
        }
        self.check_w(w)?;
        let c = -0.5 * factorial(m);
        let data = BoundaryField::from_fn(self.domain(), |z| c / (z - w).conj().powi(m as i32 + 1));
        Ok(KernelColumn { kind: ColumnKind::Bergman(m), w, ext: self.solver.solve(&data)? })
    }

    pub fn bergman(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        self.bergman_column(0, w)?.eval(z)
    }

    pub fn lambda_column(&self, m: usize, w: Complex64) -> Result<KernelColumn<'d>> {
        if m > MAX_ORDER {
            return Err(Error::Invalid(format!("derivative order {m} > {MAX_ORDER} is unsupported")));
        }
        self.check_w(w)?;
        let c = -0.5 * factorial(m);
        let data = BoundaryField::from_fn(self.domain(), |z| c / (z - w).powi(m as i32 + 1));
        Ok(KernelColumn { kind: ColumnKind::Lambda(m), w, ext: self.solver.solve(&data)? })
    }

    pub fn lambda(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        self.lambda_column(0, w)?.eval(z)
    }

    /// Modulus of a doubly connected domain, normalized so that the annulus
    /// `ρ < |z| < 1` has modulus `ln(1/ρ)`: `2π / |∮_outer F_1' dz|`.
    pub fn modulus(&self) -> Result<f64> {
        let domain = self.domain();
        if domain.connectivity() != 2 {
            return Err(Error::Invalid(format!(
                "modulus needs a doubly connected domain, got n = {}",
                domain.connectivity()
            )));
        }
        let trace = self.f_prime_boundary(1)?;
        let period = integrate_dz_curve(domain, &trace, domain.outer_index())?;
        Ok(2.0 * PI / period.norm())
    }
}

/// `∂f/∂z̄` by central differences on a cross stencil of spacing `h`,
/// Richardson-extrapolated with `h/2`.
pub fn dbar_residual(f: impl Fn(Complex64) -> Complex64, z: Complex64, h: f64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    let stencil = |h: f64| {
        let dx = (f(z + h) - f(z - h)) / (2.0 * h);
        let dy = (f(z + i * h) - f(z - i * h)) / (2.0 * h);
        0.5 * (dx + i * dy)
    };
    (4.0 * stencil(h / 2.0) - stencil(h)) / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;
    use crate::probes::interior_probes;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Bergman kernel of `ρ < |z| < 1` from the orthonormalized monomials.
    fn annulus_bergman(rho: f64, z: Complex64, w: Complex64) -> Complex64 {
        let q = z * w.conj();
        let mut acc = 1.0 / (2.0 * PI * (1.0 / rho).ln() * q);
        for k in -200i32..=200 {
            if k == -1 {
                continue;
            }
            acc += (k + 1) as f64 * q.powi(k) / (PI * (1.0 - rho.powi(2 * k + 2)));
        }
        acc
    }

    #[test]
    fn dirichlet_basics() {
        let disc = DomainSpec::unit_disc(256).build().unwrap();
        let pot = Potential::new(&disc).unwrap();
        let u = pot.dirichlet(&BoundaryField::from_fn(&disc, |z| c(z.re, 0.0))).unwrap();
        let z = c(0.3, -0.4);
        assert!((u.value(z).unwrap() - z.re).norm() < 1e-9);
        assert!(u.boundary_residual(|_, z| c(z.re, 0.0)) < 1e-9);

        let ann = DomainSpec::annulus(0.5, 256).build().unwrap();
        let pot = Potential::new(&ann).unwrap();
        let w1 = pot.harmonic_measure(1).unwrap();
        let p = Complex64::from_polar(0.5f64.sqrt(), 1.0);
        assert!((w1.value(p).unwrap().re - 0.5).abs() < 1e-9);
        assert!(w1.boundary_residual(|ci, _| c(if ci == 1 { 1.0 } else { 0.0 }, 0.0)) < 1e-7);
        let fp = pot.f_prime(1, c(0.7, 0.0)).unwrap();
        assert!((fp - 1.0 / (0.7 * 0.5f64.ln())).norm() < 1e-9);
        assert!((pot.modulus().unwrap() - 2f64.ln()).abs() < 1e-9);

        let three = DomainSpec::three_connected(256).build().unwrap();
        let pot = Potential::new(&three).unwrap();
        let one = pot.dirichlet(&BoundaryField::from_fn(&three, |_| c(1.0, 0.0))).unwrap();
        for p in interior_probes(&three, 20, 0.05, 0) {
            assert!((one.value(p).unwrap() - 1.0).norm() < 1e-9);
            let s = pot.harmonic_measure(1).unwrap().value(p).unwrap().re
                + pot.harmonic_measure(2).unwrap().value(p).unwrap().re;
            assert!(s <= 1.0 + 1e-12 && s >= 0.0);
        }
        assert!(Potential::new(&disc).unwrap().harmonic_measure(1).is_err());
    }

    #[test]
    fn disc_kernels() {
        let disc = DomainSpec::unit_disc(256).build().unwrap();
        let pot = Potential::new(&disc).unwrap();
        assert!((pot.bergman(c(0.0, 0.0), c(0.0, 0.0)).unwrap() - 1.0 / PI).norm() < 1e-12);
        let (z, w) = (c(0.3, 0.2), c(-0.1, 0.4));
        let k = 1.0 / (PI * (1.0 - z * w.conj()).powi(2));
        assert!((pot.bergman(z, w).unwrap() - k).norm() / k.norm() < 1e-10);
        let k1 = pot.bergman_column(1, c(0.0, 0.0)).unwrap().eval(z).unwrap();
        assert!((k1 - 2.0 * z / PI).norm() < 1e-10);
        let l = pot.lambda(c(0.5, 0.0), c(0.0, 0.0)).unwrap();
        assert!((l - 4.0 / PI).norm() < 1e-10);
        assert!((pot.green(c(0.5, 0.0), c(0.0, 0.0)).unwrap() - 2f64.ln()).abs() < 1e-10);
        assert!(pot.lambda(z, z).is_err());
    }

    #[test]
    fn annulus_bergman_against_series() {
        let ann = DomainSpec::annulus(0.5, 256).build().unwrap();
        let pot = Potential::new(&ann).unwrap();
        for (z, w) in [(c(0.7, 0.0), c(0.7, 0.0)), (c(0.1, 0.65), c(-0.6, -0.3))] {
            let k = pot.bergman(z, w).unwrap();
            let exact = annulus_bergman(0.5, z, w);
            assert!((k - exact).norm() / exact.norm() < 1e-6, "{k} {exact}");
        }
    }

    #[test]
    fn symmetries_and_boundary_values() {
        let d = DomainSpec::three_connected(256).build().unwrap();
        let pot = Potential::new(&d).unwrap();
        let (z, w) = (c(0.1, 0.6), c(-0.3, -0.5));
        let kzw = pot.bergman(z, w).unwrap();
        let kwz = pot.bergman(w, z).unwrap();
        assert!((kzw - kwz.conj()).norm() / kzw.norm() < 1e-6);
        let lzw = pot.lambda(z, w).unwrap();
        let lwz = pot.lambda(w, z).unwrap();
        assert!((lzw - lwz).norm() / lzw.norm() < 1e-6);
        assert!((pot.green(z, w).unwrap() - pot.green(w, z).unwrap()).abs() < 1e-7);
        let g = pot.green_column(w).unwrap();
        assert!(g.boundary().unwrap().max_abs() < 1e-7);
        // Double pole coefficient of Λ: circle mean of (z - w)² Λ(z, w).
        let col = pot.lambda_column(0, w).unwrap();
        let mean: Complex64 = (0..32)
            .map(|k| {
                let zz = w + Complex64::from_polar(1e-2, 2.0 * PI * k as f64 / 32.0);
                col.eval(zz).unwrap() * (zz - w) * (zz - w)
            })
            .sum::<Complex64>()
            / 32.0;
        assert!((mean - 1.0 / PI).norm() < 1e-5);
    }

    #[test]
    fn holomorphy_of_f_prime() {
        let d = DomainSpec::three_connected(256).build().unwrap();
        let pot = Potential::new(&d).unwrap();
        let om = pot.harmonic_measure(2).unwrap();
        for p in interior_probes(&d, 10, 0.1, 2) {
            let r = dbar_residual(|z| 2.0 * om.dz_unchecked(z), p, 1e-3);
            assert!(r.norm() < 1e-8, "{r}");
        }
    }
}
