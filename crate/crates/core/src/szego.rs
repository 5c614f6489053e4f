//! Szegő and Garabedian kernels via the Kerzman–Stein integral equation, and
//! the Ahlfors maps built from them.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use num_complex::Complex64;

use crate::calculus::{
    boundary_derivative, cauchy_boundary_limit, cauchy_interior, cauchy_unchecked,
    find_zeros, integrate_dz_curve, min_pairwise_distance, BoundaryField, ZeroSet,
};
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::probes::interior_probes;

/// Minimum pairwise separation of zeros accepted as "distinct".
pub const ZERO_SEPARATION: f64 = 1e-2;
/// Minimum `|S'(zero)|` relative to `max |S|` accepted as "simple".
pub const ZERO_SIMPLICITY: f64 = 1e-6;
/// Minimum `|z - a|` for evaluating `L(z, a)`.
pub const POLE_GUARD: f64 = 1e-6;

fn i_unit() -> Complex64 {
    Complex64::new(0.0, 1.0)
}

/// Kerzman–Stein kernel `A(z, w) = conj(H(w, z)) - H(z, w)` between two
/// distinct boundary points with unit tangents `tz`, `tw`, where
/// `H(z, w) = T(w)/(2πi (w - z))` is the Cauchy kernel with respect to arc
/// length.
pub fn kerzman_stein_kernel(z: Complex64, tz: Complex64, w: Complex64, tw: Complex64) -> Complex64 {
    -(tw / (w - z) + tz.conj() / (z - w).conj()) / Complex64::new(0.0, 2.0 * PI)
}

/// Full Kerzman–Stein kernel matrix on the grid. The diagonal limit of the
/// kernel is zero for any smooth curve.
pub fn kerzman_stein_matrix(domain: &Domain) -> DMatrix<Complex64> {
    let pts = domain.points();
    let tan = domain.tangents();
    let n = pts.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(0.0, 0.0)
        } else {
            kerzman_stein_kernel(pts[i], tan[i], pts[j], tan[j])
        }
    })
}

/// Factored collocation system `(I + A W) u = c_a` for one domain; solves
/// for any number of base points.
pub struct SzegoSolver<'d> {
    domain: &'d Domain,
    lu: LU<Complex64, Dyn, Dyn>,
    tangents: Vec<Complex64>,
}

impl<'d> SzegoSolver<'d> {
    pub fn new(domain: &'d Domain) -> Result<Self> {
        let ds = domain.ds_weights();
        let mut m = kerzman_stein_matrix(domain);
        for j in 0..m.ncols() {
            m.column_mut(j).scale_mut(ds[j]);
        }
        for i in 0..m.nrows() {
            m[(i, i)] += Complex64::new(1.0, 0.0);
        }
        let lu = m.lu();
        let diag = lu.u().diagonal();
        let (lo, hi) = diag
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d.norm()), hi.max(d.norm())));
        if !(lo > 1e-13 * hi) {
            return Err(Error::Resolution(format!(
                "Kerzman-Stein system pivot ratio {:.2e}",
                lo / hi
            )));
        }
        Ok(Self { domain, lu, tangents: domain.tangents() })
    }

    pub fn domain(&self) -> &'d Domain {
        self.domain
    }

    /// Boundary values of `S(·, a)` and `L(·, a)`.
    pub fn solve(&self, a: Complex64) -> Result<SzegoSolution<'d>> {
        self.domain.check_interior(a)?;
        let pts = self.domain.points();
        let two_pi_i = Complex64::new(0.0, 2.0 * PI);
        let rhs = DVector::from_iterator(
            pts.len(),
            pts.iter().zip(&self.tangents).map(|(z, t)| (t / (z - a) / two_pi_i).conj()),
        );
        let u = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::Resolution("Kerzman-Stein solve failed".into()))?;
        let s = BoundaryField::from_values(self.domain, u.iter().copied().collect())?;
        let l = BoundaryField::from_values(
            self.domain,
            u.iter()
                .zip(&self.tangents)
                .map(|(s, t)| i_unit() * s.conj() * t.conj())
                .collect(),
        )?;
        SzegoSolution::new(self.domain, a, s, l)
    }

    /// `S(z, w)` for a single interior pair.
    pub fn szego(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        self.solve(w)?.s(z)
    }
}

/// Convenience wrapper: factor and solve for one base point.
pub fn szego_solve(domain: &Domain, a: Complex64) -> Result<SzegoSolution<'_>> {
    SzegoSolver::new(domain)?.solve(a)
}

/// Boundary traces of `S(·, a)` and `L(·, a)` with interior evaluators.
#[derive(Clone)]
pub struct SzegoSolution<'d> {
    domain: &'d Domain,
    a: Complex64,
    s: BoundaryField,
    l: BoundaryField,
    l_regular: BoundaryField,
    s_prime: BoundaryField,
}

impl<'d> SzegoSolution<'d> {
    fn new(domain: &'d Domain, a: Complex64, s: BoundaryField, l: BoundaryField) -> Result<Self> {
        let l_regular = BoundaryField::from_values(
            domain,
            l.values()
                .iter()
                .zip(domain.points())
                .map(|(v, z)| v - 1.0 / (2.0 * PI * (z - a)))
                .collect(),
        )?;
        let s_prime = boundary_derivative(domain, &s)?;
        Ok(Self { domain, a, s, l, l_regular, s_prime })
    }

    pub fn domain(&self) -> &'d Domain {
        self.domain
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }

    pub fn s_boundary(&self) -> &BoundaryField {
        &self.s
    }

    pub fn l_boundary(&self) -> &BoundaryField {
        &self.l
    }

    pub fn s_prime_boundary(&self) -> &BoundaryField {
        &self.s_prime
    }

    /// `S(z, a)` at an interior point.
    pub fn s(&self, z: Complex64) -> Result<Complex64> {
        cauchy_interior(self.domain, &self.s, z)
    }

    /// `∂S(z, a)/∂z` at an interior point.
    pub fn s_prime(&self, z: Complex64) -> Result<Complex64> {
        cauchy_interior(self.domain, &self.s_prime, z)
    }

    /// `L(z, a)` at an interior point other than `a`.
    pub fn l(&self, z: Complex64) -> Result<Complex64> {
        if (z - self.a).norm() < POLE_GUARD {
            return Err(Error::Guard(format!("L(z, a) evaluated within {POLE_GUARD:e} of its pole")));
        }
        Ok(cauchy_interior(self.domain, &self.l_regular, z)? + 1.0 / (2.0 * PI * (z - self.a)))
    }

    /// Regular part `L(z, a) - 1/(2π(z - a))`, finite at `z = a`.
    pub fn l_regular(&self, z: Complex64) -> Result<Complex64> {
        cauchy_interior(self.domain, &self.l_regular, z)
    }

    /// Relative residual of `(1/i) L(z,a) T(z) = conj S(z,a)` on the boundary,
    /// with both traces first replaced by the boundary values of their
    /// holomorphic extensions.
    pub fn identity_residual(&self) -> Result<f64> {
        let s_ext = cauchy_boundary_limit(self.domain, &self.s)?;
        let l_ext = cauchy_boundary_limit(self.domain, &self.l_regular)?;
        let pts = self.domain.points();
        let tan = self.domain.tangents();
        let mut worst: f64 = 0.0;
        for i in 0..pts.len() {
            let l = l_ext.values()[i] + 1.0 / (2.0 * PI * (pts[i] - self.a));
            let r = l * tan[i] / i_unit() - s_ext.values()[i].conj();
            worst = worst.max(r.norm());
        }
        Ok(worst / self.s.max_abs())
    }

    /// The `n - 1` zeros of `S(·, a)`.
    pub fn zeros(&self) -> Result<ZeroSet> {
        let n = self.domain.connectivity();
        let mut zs = find_zeros(self.domain, &self.s, &self.s_prime, n - 1)?;
        let scale = self.s.max_abs();
        for z in &zs.zeros {
            if cauchy_unchecked(self.domain, &self.s_prime, *z).norm() < ZERO_SIMPLICITY * scale {
                zs.clustered = true;
            }
        }
        Ok(zs)
    }

    pub fn ahlfors(&self) -> Result<AhlforsMap<'d>> {
        AhlforsMap::new(self)
    }
}

/// The Ahlfors map `f_a = S(·, a)/L(·, a)`.
#[derive(Clone)]
pub struct AhlforsMap<'d> {
    domain: &'d Domain,
    a: Complex64,
    f: BoundaryField,
    df: BoundaryField,
    d2f: BoundaryField,
    derivative_at_a: f64,
    /// `S(·, a)` and its first two derivatives.
    s: [BoundaryField; 3],
    /// Regular part of `L(·, a)` and its first two derivatives.
    l_regular: [BoundaryField; 3],
}

impl<'d> AhlforsMap<'d> {
    pub fn new(sol: &SzegoSolution<'d>) -> Result<Self> {
        let domain = sol.domain;
        let f = sol.s.zip_with(&sol.l, |s, l| s / l)?;
        let df = boundary_derivative(domain, &f)?;
        let d2f = boundary_derivative(domain, &df)?;
        let d = cauchy_interior(domain, &df, sol.a)?;
        if d.re <= 0.0 {
            return Err(Error::Degenerate(format!("f_a'(a) = {d} is not positive")));
        }
        let s2 = boundary_derivative(domain, &sol.s_prime)?;
        let l1 = boundary_derivative(domain, &sol.l_regular)?;
        let l2 = boundary_derivative(domain, &l1)?;
        Ok(Self {
            domain,
            a: sol.a,
            f,
            df,
            d2f,
            derivative_at_a: d.re,
            s: [sol.s.clone(), sol.s_prime.clone(), s2],
            l_regular: [sol.l_regular.clone(), l1, l2],
        })
    }

    /// Numerator `N = 2π(z - a)S` and denominator `D = 1 + 2π(z - a)L_reg`
    /// of `f = N/D` with their first `order` derivatives. The trace of `f`
    /// itself is poorly resolved when a zero of `f` lies close to the
    /// boundary, while `S` and `L` stay smooth.
    fn quotient_parts(&self, z: Complex64, order: usize) -> Result<([Complex64; 3], [Complex64; 3])> {
        let h = z - self.a;
        let mut s = [Complex64::new(0.0, 0.0); 3];
        let mut l = s;
        for k in 0..=order {
            s[k] = cauchy_interior(self.domain, &self.s[k], z)?;
            l[k] = cauchy_interior(self.domain, &self.l_regular[k], z)?;
        }
        let tau = 2.0 * PI;
        let n = [tau * h * s[0], tau * (s[0] + h * s[1]), tau * (2.0 * s[1] + h * s[2])];
        let d = [1.0 + tau * h * l[0], tau * (l[0] + h * l[1]), tau * (2.0 * l[1] + h * l[2])];
        Ok((n, d))
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }

    pub fn boundary(&self) -> &BoundaryField {
        &self.f
    }

    pub fn derivative_boundary(&self) -> &BoundaryField {
        &self.df
    }

    /// `f_a'(a)`, positive by normalization.
    pub fn derivative_at_a(&self) -> f64 {
        self.derivative_at_a
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let (n, d) = self.quotient_parts(z, 0)?;
        Ok(n[0] / d[0])
    }

    pub fn deriv(&self, z: Complex64) -> Result<Complex64> {
        let (n, d) = self.quotient_parts(z, 1)?;
        Ok((n[1] * d[0] - n[0] * d[1]) / (d[0] * d[0]))
    }

    pub fn second_deriv(&self, z: Complex64) -> Result<Complex64> {
        let (n, d) = self.quotient_parts(z, 2)?;
        let f = n[0] / d[0];
        let df = (n[1] - f * d[1]) / d[0];
        Ok((n[2] - 2.0 * df * d[1] - f * d[2]) / d[0])
    }

    /// `max | |f_a| - 1 |` over the boundary grid.
    pub fn boundary_modulus_error(&self) -> f64 {
        self.f.values().iter().map(|v| (v.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `max | |f_a| - 1 |` for the boundary values of the holomorphic
    /// extension of the trace; unlike [`Self::boundary_modulus_error`] this
    /// does not hold by construction.
    pub fn extension_modulus_error(&self) -> Result<f64> {
        let ext = cauchy_boundary_limit(self.domain, &self.f)?;
        Ok(ext.values().iter().map(|v| (v.norm() - 1.0).abs()).fold(0.0, f64::max))
    }

    /// Winding number of `f_a` along each boundary curve.
    pub fn windings(&self) -> Result<Vec<f64>> {
        let ratio = self.df.zip_with(&self.f, |d, f| d / f)?;
        (0..self.domain.connectivity())
            .map(|c| Ok((integrate_dz_curve(self.domain, &ratio, c)? / Complex64::new(0.0, 2.0 * PI)).re))
            .collect()
    }

    /// All `n` zeros of `f_a` (the base point included).
    pub fn zeros(&self) -> Result<ZeroSet> {
        find_zeros(self.domain, &self.f, &self.df, self.domain.connectivity())
    }

    /// The `2n - 2` critical points of `f_a` in the domain.
    pub fn critical_points(&self) -> Result<ZeroSet> {
        let n = self.domain.connectivity();
        find_zeros(self.domain, &self.df, &self.d2f, 2 * n - 2)
    }

    pub fn domain(&self) -> &'d Domain {
        self.domain
    }
}

/// One step of the base-point walk.
#[derive(Debug, Clone)]
pub struct BaseCandidate {
    pub a: Complex64,
    pub accepted: bool,
    pub note: String,
}

/// Accepted base point with its zeros and the walk log.
#[derive(Debug, Clone)]
pub struct BaseSelection {
    pub a: Complex64,
    pub zeros: Vec<Complex64>,
    pub log: Vec<BaseCandidate>,
}

/// Deterministic default starting point: the deepest of a batch of probes.
pub fn default_start(domain: &Domain) -> Result<Complex64> {
    interior_probes(domain, 64, 0.0, 0)
        .into_iter()
        .map(|p| (domain.boundary_distance(p).0, p))
        .fold(None, |best: Option<(f64, Complex64)>, cur| match best {
            Some(b) if b.0 >= cur.0 => Some(b),
            _ => Some(cur),
        })
        .map(|(_, p)| p)
        .ok_or_else(|| Error::Degenerate("no interior probe found".into()))
}

/// Checks the zero-structure criteria at one candidate base point.
fn candidate_zeros(solver: &SzegoSolver<'_>, a: Complex64) -> std::result::Result<Vec<Complex64>, String> {
    let domain = solver.domain();
    let sol = solver.solve(a).map_err(|e| e.to_string())?;
    let zs = sol.zeros().map_err(|e| e.to_string())?;
    check_zero_set(domain, a, &zs)?;
    for &ak in &zs.zeros {
        let sk = solver.solve(ak).map_err(|e| format!("zero {ak}: {e}"))?;
        let zk = sk.zeros().map_err(|e| format!("zero {ak}: {e}"))?;
        check_zero_set(domain, ak, &zk).map_err(|e| format!("zeros of S(·,{ak}): {e}"))?;
    }
    Ok(zs.zeros)
}

fn check_zero_set(domain: &Domain, a: Complex64, zs: &ZeroSet) -> std::result::Result<(), String> {
    if zs.clustered {
        return Err("zeros are clustered or not simple".into());
    }
    let mut all = zs.zeros.clone();
    all.push(a);
    if min_pairwise_distance(&all) < ZERO_SEPARATION {
        return Err(format!("zeros closer than {ZERO_SEPARATION}"));
    }
    for z in &zs.zeros {
        if !domain.is_admissible(*z, 0.0) {
            return Err(format!("zero {z} is inside the guard band"));
        }
    }
    Ok(())
}

/// Walks from `start` along `direction` geometrically toward the boundary
/// until the zeros of `S(·, a)` and of each `S(·, a_k)` are simple, mutually
/// separated and clear of the guard band.
pub fn select_base_point(
    solver: &SzegoSolver<'_>,
    start: Option<Complex64>,
    direction: Complex64,
) -> Result<BaseSelection> {
    let domain = solver.domain();
    let p0 = match start {
        Some(p) => p,
        None => default_start(domain)?,
    };
    domain.check_interior(p0)?;
    let dir = direction / direction.norm();
    // Last admissible parameter along the ray.
    let (_, spacing) = domain.boundary_distance(p0);
    let step = spacing.max(1e-4);
    let mut t_exit = 0.0;
    while domain.is_admissible(p0 + dir * (t_exit + step), 0.0) {
        t_exit += step;
    }
    let mut log = Vec::new();
    for k in 0..40 {
        let t = t_exit * (1.0 - 0.6f64.powi(k));
        let a = p0 + dir * t;
        match candidate_zeros(solver, a) {
            Ok(zeros) => {
                log.push(BaseCandidate { a, accepted: true, note: "accepted".into() });
                return Ok(BaseSelection { a, zeros, log });
            }
            Err(note) => log.push(BaseCandidate { a, accepted: false, note }),
        }
        if t_exit - t < 1e-9 {
            break;
        }
    }
    Err(Error::Guard(format!(
        "no admissible base point before the guard band after {} candidates (raise M)",
        log.len()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Szegő kernel of the annulus `rho < |z| < 1` by orthonormalizing the
    /// monomials `z^k` in the boundary inner product.
    fn annulus_szego(rho: f64, z: Complex64, w: Complex64) -> Complex64 {
        let mut acc = c(0.0, 0.0);
        for k in -200i32..=200 {
            let norm2 = 2.0 * PI * (1.0 + rho.powi(2 * k + 1));
            acc += (z * w.conj()).powi(k) / norm2;
        }
        acc
    }

    #[test]
    fn kernel_vanishes_on_circles() {
        let d = DomainSpec::unit_disc(128).build().unwrap();
        let m = kerzman_stein_matrix(&d);
        assert!(m.iter().map(|v| v.norm()).fold(0.0, f64::max) < 1e-12);
        let off = crate::geometry::make_circle_domain(&[c(0.3, -0.2)], &[0.7], 64).unwrap();
        let m = kerzman_stein_matrix(&off);
        assert!(m.iter().map(|v| v.norm()).fold(0.0, f64::max) < 1e-12);
    }

    #[test]
    fn diagonal_limit_is_zero() {
        // Approach a node of an ellipse along the curve from both sides.
        let d = crate::geometry::Domain::new(vec![crate::geometry::ParamCurve::from_fn(
            64,
            |t| c(2.0 * (2.0 * PI * t).cos(), (2.0 * PI * t).sin()),
            |t| c(-4.0 * PI * (2.0 * PI * t).sin(), 2.0 * PI * (2.0 * PI * t).cos()),
        )
        .unwrap()])
        .unwrap();
        let _ = d;
        let z = |t: f64| c(2.0 * (2.0 * PI * t).cos(), (2.0 * PI * t).sin());
        let tan = |t: f64| {
            let v = c(-2.0 * (2.0 * PI * t).sin(), (2.0 * PI * t).cos());
            v / v.norm()
        };
        let t0 = 0.13;
        let k = |h: f64| kerzman_stein_kernel(z(t0), tan(t0), z(t0 + h), tan(t0 + h));
        for h in [1e-3, -1e-3] {
            let rich = 2.0 * k(h / 2.0) - k(h);
            assert!(rich.norm() < 1e-6, "{rich}");
        }
    }

    #[test]
    fn disc_closed_forms() {
        let d = DomainSpec::unit_disc(256).build().unwrap();
        let solver = SzegoSolver::new(&d).unwrap();
        let a = c(0.4, 0.0);
        let sol = solver.solve(a).unwrap();
        for (s, z) in sol.s_boundary().values().iter().zip(d.points()) {
            let exact = 1.0 / (2.0 * PI * (1.0 - z * a.conj()));
            assert!((s - exact).norm() / exact.norm() < 1e-9);
        }
        let z = c(0.1, 0.3);
        let exact_l = 1.0 / (2.0 * PI * (z - a)) * (1.0 - a.norm_sqr()) / (1.0 - a.conj() * z);
        let _ = exact_l;
        let s0 = solver.solve(c(0.0, 0.0)).unwrap();
        assert!((s0.s(z).unwrap() - 1.0 / (2.0 * PI)).norm() < 1e-11);
        assert!((s0.l(c(0.5, 0.0)).unwrap() - 1.0 / PI).norm() < 1e-11);
        let f = sol.ahlfors().unwrap();
        let mobius = (z - a) / (1.0 - a.conj() * z);
        assert!((f.eval(z).unwrap() - mobius).norm() < 1e-9);
        assert!(sol.zeros().unwrap().zeros.is_empty());
        assert!(sol.identity_residual().unwrap() < 1e-10);
    }

    #[test]
    fn annulus_against_series() {
        let rho = 0.5;
        let d = DomainSpec::annulus(rho, 256).build().unwrap();
        let solver = SzegoSolver::new(&d).unwrap();
        let a = c(0.7, 0.0);
        let sol = solver.solve(a).unwrap();
        for (s, z) in sol.s_boundary().values().iter().zip(d.points()) {
            let exact = annulus_szego(rho, z, a);
            assert!((s - exact).norm() / exact.norm() < 1e-7);
        }
        let zs = sol.zeros().unwrap();
        assert_eq!(zs.zeros.len(), 1);
        let z0 = zs.zeros[0];
        assert!(z0.re < 0.0 && z0.im.abs() < 1e-10);
        assert!(annulus_szego(rho, z0, a).norm() < 1e-9);

        let f = sol.ahlfors().unwrap();
        assert!(f.boundary_modulus_error() < 1e-7);
        let w = f.windings().unwrap();
        assert!((w[0] - 1.0).abs() < 1e-8 && (w[1] - 1.0).abs() < 1e-8);
        let s_aa = sol.s(a).unwrap().re;
        assert!((f.derivative_at_a() - 2.0 * PI * s_aa).abs() / f.derivative_at_a() < 1e-7);
        assert!(f.eval(a).unwrap().norm() < 1e-8);
    }

    #[test]
    fn symmetries() {
        let d = DomainSpec::three_connected(256).build().unwrap();
        let solver = SzegoSolver::new(&d).unwrap();
        let (z, w) = (c(0.1, 0.6), c(-0.2, -0.55));
        let sz = solver.solve(z).unwrap();
        let sw = solver.solve(w).unwrap();
        let a = sw.s(z).unwrap();
        let b = sz.s(w).unwrap().conj();
        assert!((a - b).norm() / a.norm() < 1e-6);
        let a = sw.l(z).unwrap();
        let b = -sz.l(w).unwrap();
        assert!((a - b).norm() / a.norm() < 1e-6);
    }

    #[test]
    fn residue_of_l() {
        let d = DomainSpec::annulus(0.5, 256).build().unwrap();
        let sol = szego_solve(&d, c(0.7, 0.1)).unwrap();
        // Mean of 2π (z - a) L(z, a) over a small circle is 2π times the residue.
        let k = 64;
        let mean: Complex64 = (0..k)
            .map(|j| {
                let z = sol.a() + Complex64::from_polar(1e-2, 2.0 * PI * j as f64 / k as f64);
                2.0 * PI * (z - sol.a()) * sol.l(z).unwrap()
            })
            .sum::<Complex64>()
            / k as f64;
        assert!((mean - 1.0).norm() < 1e-6, "{mean}");
    }

    #[test]
    fn base_point_walk() {
        let d = DomainSpec::three_connected(256).build().unwrap();
        let solver = SzegoSolver::new(&d).unwrap();
        let sel = select_base_point(&solver, Some(c(0.0, 0.0)), c(0.3, 1.0)).unwrap();
        assert_eq!(sel.zeros.len(), 2);
        assert!((sel.zeros[0] - sel.zeros[1]).norm() >= ZERO_SEPARATION);
        assert!(sel.log.last().unwrap().accepted);
    }
}
