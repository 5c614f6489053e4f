//! Finitely connected planar domains bounded by sampled analytic curves.
//!
//! Every curve is stored as `M` equispaced samples `z(t_k)`, `t_k = k/M`, of a
//! 1-periodic analytic parameterization together with `z'(t_k)` (supplied by
//! the factory) and `z''(t_k)` (obtained spectrally). Domains are normalized
//! so that the region lies to the left of every curve: the outer curve runs
//! counterclockwise and the holes clockwise.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::spectral_dt;
use crate::error::{Error, Result};

/// Default number of samples per boundary curve.
pub const DEFAULT_M: usize = 256;

/// Interior evaluations must stay this many local grid spacings away from the
/// boundary.
pub const GUARD_SPACINGS: f64 = 5.0;

/// Points closer than this to a boundary sample cannot be classified.
pub const INDETERMINATE_DISTANCE: f64 = 1e-9;

const MIN_CURVE_GAP: f64 = 1e-6;
const MIN_SPEED: f64 = 1e-12;
const SPECTRAL_CONSISTENCY_TOL: f64 = 1e-8;

static NEXT_GRID_ID: AtomicU64 = AtomicU64::new(1);

/// One closed analytic boundary curve sampled at equispaced parameters.
#[derive(Debug, Clone)]
pub struct ParamCurve {
    samples: Vec<Complex64>,
    deriv: Vec<Complex64>,
    deriv2: Vec<Complex64>,
}

impl ParamCurve {
    /// Builds a curve from samples and analytic derivatives with respect to
    /// `t` on `[0, 1)`.
    pub fn new(samples: Vec<Complex64>, deriv: Vec<Complex64>) -> Result<Self> {
        let m = samples.len();
        if m < 32 || !m.is_power_of_two() {
            return Err(Error::Geometry(format!(
                "sample count must be a power of two >= 32, got {m}"
            )));
        }
        if deriv.len() != m {
            return Err(Error::Geometry("derivative length differs from sample count".into()));
        }
        let deriv2 = spectral_dt(&deriv);
        Ok(Self { samples, deriv, deriv2 })
    }

    /// Samples `z(t)` and `z'(t)` at `t_k = k/M`.
    pub fn from_fn(
        m: usize,
        z: impl Fn(f64) -> Complex64,
        dz: impl Fn(f64) -> Complex64,
    ) -> Result<Self> {
        let ts = (0..m).map(|k| k as f64 / m as f64);
        let samples = ts.clone().map(&z).collect();
        let deriv = ts.map(&dz).collect();
        Self::new(samples, deriv)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn deriv(&self) -> &[Complex64] {
        &self.deriv
    }

    pub fn deriv2(&self) -> &[Complex64] {
        &self.deriv2
    }

    /// Same point set traversed in the opposite direction (`t -> -t`).
    pub fn reversed(&self) -> Self {
        let m = self.len();
        let idx = |k: usize| (m - k) % m;
        Self {
            samples: (0..m).map(|k| self.samples[idx(k)]).collect(),
            deriv: (0..m).map(|k| -self.deriv[idx(k)]).collect(),
            deriv2: (0..m).map(|k| self.deriv2[idx(k)]).collect(),
        }
    }

    /// Image of the curve under a holomorphic map with derivative `dmap`.
    pub fn mapped(
        &self,
        map: impl Fn(Complex64) -> Complex64,
        dmap: impl Fn(Complex64) -> Complex64,
    ) -> Result<Self> {
        let samples = self.samples.iter().map(|&z| map(z)).collect();
        let deriv = self
            .samples
            .iter()
            .zip(&self.deriv)
            .map(|(&z, &d)| dmap(z) * d)
            .collect();
        Self::new(samples, deriv)
    }

    /// Signed enclosed area; positive for counterclockwise curves.
    pub fn signed_area(&self) -> f64 {
        let m = self.len() as f64;
        self.samples
            .iter()
            .zip(&self.deriv)
            .map(|(z, d)| (z.conj() * d).im)
            .sum::<f64>()
            / (2.0 * m)
    }

    /// Winding number of the sample polygon about `p`.
    pub fn winding_about(&self, p: Complex64) -> f64 {
        let m = self.len();
        let mut total = 0.0;
        for k in 0..m {
            let a = self.samples[k] - p;
            let b = self.samples[(k + 1) % m] - p;
            total += (b / a).arg();
        }
        total / (2.0 * PI)
    }

    /// Max deviation between the spectral derivative of the samples and the
    /// supplied derivative.
    pub fn spectral_consistency(&self) -> f64 {
        spectral_dt(&self.samples)
            .iter()
            .zip(&self.deriv)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn min_speed(&self) -> f64 {
        self.deriv.iter().map(|d| d.norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn max_speed(&self) -> f64 {
        self.deriv.iter().map(|d| d.norm()).fold(0.0, f64::max)
    }

    /// Arithmetic mean of the samples; the center for circles.
    pub fn centroid(&self) -> Complex64 {
        self.samples.iter().sum::<Complex64>() / self.len() as f64
    }

    /// `(min re, min im, max re, max im)` of the samples.
    pub fn bounding_box(&self) -> [f64; 4] {
        let mut bb = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for z in &self.samples {
            bb[0] = bb[0].min(z.re);
            bb[1] = bb[1].min(z.im);
            bb[2] = bb[2].max(z.re);
            bb[3] = bb[3].max(z.im);
        }
        bb
    }
}

/// Identity of a boundary grid. Fields built on one grid cannot be combined
/// with fields from another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridId(u64);

/// An `n`-connected domain with standard boundary orientation.
#[derive(Debug, Clone)]
pub struct Domain {
    id: GridId,
    curves: Vec<ParamCurve>,
    outer_index: usize,
    offsets: Vec<usize>,
}

impl Domain {
    /// Validates the curves, identifies the outer one and normalizes the
    /// orientation so the domain lies to the left of each curve.
    pub fn new(curves: Vec<ParamCurve>) -> Result<Self> {
        let n = curves.len();
        if n == 0 {
            return Err(Error::Geometry("a domain needs at least one curve".into()));
        }
        for (i, c) in curves.iter().enumerate() {
            if c.min_speed() <= MIN_SPEED {
                return Err(Error::Geometry(format!("curve {i} has a stationary point")));
            }
            let tol = SPECTRAL_CONSISTENCY_TOL * c.max_speed().max(1.0);
            let err = c.spectral_consistency();
            if err > tol {
                return Err(Error::Geometry(format!(
                    "curve {i} is under-resolved: spectral derivative error {err:.2e} (raise M)"
                )));
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let gap = min_pair_distance(&curves[i], &curves[j]);
                if gap <= MIN_CURVE_GAP {
                    return Err(Error::Geometry(format!("curves {i} and {j} intersect or touch")));
                }
            }
        }

        let outer_index = if n == 1 {
            0
        } else {
            let encloses_all = |i: usize| {
                (0..n)
                    .filter(|&j| j != i)
                    .all(|j| (curves[i].winding_about(curves[j].samples[0]).abs() - 1.0).abs() < 0.5)
            };
            let candidates: Vec<usize> = (0..n).filter(|&i| encloses_all(i)).collect();
            match candidates.as_slice() {
                [i] => *i,
                _ => {
                    return Err(Error::Geometry(
                        "no curve encloses all the others (hole outside the outer curve?)".into(),
                    ))
                }
            }
        };

        for i in 0..n {
            for j in 0..n {
                if i == j || i == outer_index || j == outer_index {
                    continue;
                }
                if curves[i].winding_about(curves[j].samples[0]).abs() > 0.5 {
                    return Err(Error::Geometry(format!("hole {j} lies inside hole {i}")));
                }
            }
        }

        let curves: Vec<ParamCurve> = curves
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                let ccw = c.signed_area() > 0.0;
                if (i == outer_index) != ccw {
                    c.reversed()
                } else {
                    c
                }
            })
            .collect();

        let mut offsets = Vec::with_capacity(n + 1);
        let mut acc = 0;
        for c in &curves {
            offsets.push(acc);
            acc += c.len();
        }
        offsets.push(acc);

        Ok(Self {
            id: GridId(NEXT_GRID_ID.fetch_add(1, Ordering::Relaxed)),
            curves,
            outer_index,
            offsets,
        })
    }

    pub fn id(&self) -> GridId {
        self.id
    }

    /// Connectivity `n`.
    pub fn connectivity(&self) -> usize {
        self.curves.len()
    }

    pub fn curves(&self) -> &[ParamCurve] {
        &self.curves
    }

    pub fn curve(&self, index: usize) -> Result<&ParamCurve> {
        self.curves.get(index).ok_or(Error::Index { index, context: "curve index" })
    }

    pub fn outer_index(&self) -> usize {
        self.outer_index
    }

    pub fn outer(&self) -> &ParamCurve {
        &self.curves[self.outer_index]
    }

    /// Indices of the holes in storage order. The `j`-th hole (1-based) in
    /// harmonic-measure numbering is `inner_indices()[j - 1]`.
    pub fn inner_indices(&self) -> Vec<usize> {
        (0..self.connectivity()).filter(|&i| i != self.outer_index).collect()
    }

    /// Total number of boundary samples over all curves.
    pub fn total_samples(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Start offset of each curve in the concatenated grid (plus the total).
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Iterator over `(curve index, node index, z, z')` for the whole grid.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize, Complex64, Complex64)> + '_ {
        self.curves.iter().enumerate().flat_map(|(ci, c)| {
            c.samples
                .iter()
                .zip(&c.deriv)
                .enumerate()
                .map(move |(k, (&z, &d))| (ci, k, z, d))
        })
    }

    /// Concatenated boundary points.
    pub fn points(&self) -> Vec<Complex64> {
        self.curves.iter().flat_map(|c| c.samples.iter().copied()).collect()
    }

    /// Quadrature weights for `dz`: `z'(t_k)/M`.
    pub fn dz_weights(&self) -> Vec<Complex64> {
        self.curves
            .iter()
            .flat_map(|c| {
                let m = c.len() as f64;
                c.deriv.iter().map(move |d| d / m)
            })
            .collect()
    }

    /// Quadrature weights for arc length: `|z'(t_k)|/M`.
    pub fn ds_weights(&self) -> Vec<f64> {
        self.curves
            .iter()
            .flat_map(|c| {
                let m = c.len() as f64;
                c.deriv.iter().map(move |d| d.norm() / m)
            })
            .collect()
    }

    /// Unit tangents `T = z'/|z'|` over the whole grid.
    pub fn tangents(&self) -> Vec<Complex64> {
        self.curves
            .iter()
            .flat_map(|c| c.deriv.iter().map(|d| d / d.norm()))
            .collect()
    }

    /// Distance to the nearest boundary sample and the local grid spacing
    /// `|z'|/M` there.
    pub fn boundary_distance(&self, p: Complex64) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        for c in &self.curves {
            let m = c.len() as f64;
            for (z, d) in c.samples.iter().zip(&c.deriv) {
                let dist = (z - p).norm();
                if dist < best.0 {
                    best = (dist, d.norm() / m);
                }
            }
        }
        best
    }

    /// Minimum distance from the boundary required for interior evaluation at
    /// `p`.
    pub fn guard_distance(&self, p: Complex64) -> f64 {
        GUARD_SPACINGS * self.boundary_distance(p).1
    }

    /// Winding number of the whole boundary about `p`.
    pub fn total_winding(&self, p: Complex64) -> f64 {
        self.curves.iter().map(|c| c.winding_about(p)).sum()
    }

    /// Winding-number membership test.
    pub fn contains(&self, p: Complex64) -> Result<bool> {
        let (dist, _) = self.boundary_distance(p);
        if dist < INDETERMINATE_DISTANCE {
            return Err(Error::Indeterminate { point: p, distance: dist });
        }
        Ok(self.total_winding(p).round() as i64 == 1)
    }

    /// Fails unless `p` is interior and at least the guard distance from the
    /// boundary.
    pub fn check_interior(&self, p: Complex64) -> Result<()> {
        if !self.contains(p)? {
            return Err(Error::Guard(format!("point {p} lies outside the domain")));
        }
        let (dist, spacing) = self.boundary_distance(p);
        if dist < GUARD_SPACINGS * spacing {
            return Err(Error::Guard(format!(
                "point {p} is {dist:.3e} from the boundary, guard is {:.3e} (raise M)",
                GUARD_SPACINGS * spacing
            )));
        }
        Ok(())
    }

    /// True when `p` is interior and clears both the guard and `min_dist`.
    pub fn is_admissible(&self, p: Complex64, min_dist: f64) -> bool {
        let (dist, spacing) = self.boundary_distance(p);
        dist >= min_dist.max(GUARD_SPACINGS * spacing)
            && dist >= INDETERMINATE_DISTANCE
            && self.total_winding(p).round() as i64 == 1
    }

    /// Image of the domain under a holomorphic map that is one-to-one on a
    /// neighbourhood of the closure.
    pub fn mapped(
        &self,
        map: impl Fn(Complex64) -> Complex64 + Copy,
        dmap: impl Fn(Complex64) -> Complex64 + Copy,
    ) -> Result<Self> {
        let curves = self
            .curves
            .iter()
            .map(|c| c.mapped(map, dmap))
            .collect::<Result<Vec<_>>>()?;
        Self::new(curves)
    }

    /// Minimum distance between samples of distinct curves.
    pub fn min_curve_gap(&self) -> f64 {
        let n = self.connectivity();
        let mut gap = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                gap = gap.min(min_pair_distance(&self.curves[i], &self.curves[j]));
            }
        }
        gap
    }
}

fn min_pair_distance(a: &ParamCurve, b: &ParamCurve) -> f64 {
    let mut best = f64::INFINITY;
    for z in &a.samples {
        for w in &b.samples {
            best = best.min((z - w).norm());
        }
    }
    best
}

fn circle(center: Complex64, radius: f64, m: usize, ccw: bool) -> Result<ParamCurve> {
    let s = if ccw { 1.0 } else { -1.0 };
    ParamCurve::from_fn(
        m,
        |t| center + radius * Complex64::from_polar(1.0, s * 2.0 * PI * t),
        |t| Complex64::new(0.0, s * 2.0 * PI) * radius * Complex64::from_polar(1.0, s * 2.0 * PI * t),
    )
}

/// Circle domain: the first disc is the outer boundary, the rest are holes.
pub fn make_circle_domain(centers: &[Complex64], radii: &[f64], m: usize) -> Result<Domain> {
    if centers.is_empty() || centers.len() != radii.len() {
        return Err(Error::Geometry("centers and radii must be non-empty and of equal length".into()));
    }
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
        return Err(Error::Geometry(format!("radius {r} is not positive")));
    }
    let (c0, r0) = (centers[0], radii[0]);
    for i in 1..centers.len() {
        if (centers[i] - c0).norm() + radii[i] >= r0 {
            return Err(Error::Geometry(format!("hole {i} is not inside the outer circle")));
        }
        for j in i + 1..centers.len() {
            if (centers[i] - centers[j]).norm() <= radii[i] + radii[j] {
                return Err(Error::Geometry(format!("holes {i} and {j} overlap")));
            }
        }
    }
    let curves = centers
        .iter()
        .zip(radii)
        .enumerate()
        .map(|(i, (&c, &r))| circle(c, r, m, i == 0))
        .collect::<Result<Vec<_>>>()?;
    Domain::new(curves)
}

/// Outer boundary radius of `A(r)` in direction `phi`, with `dR/dphi`.
///
/// On `|z + 1/z| = r` with `z = R e^{i phi}` one has
/// `R^2 + R^{-2} = r^2 - 2 cos 2phi`; the larger root is the outer curve.
fn ar_polar_radius(r: f64, phi: Complex64) -> (Complex64, Complex64) {
    let c = r * r - 2.0 * (2.0 * phi).cos();
    let dc = 4.0 * (2.0 * phi).sin();
    let s = (c * c - 4.0).sqrt();
    let x = (c + s) / 2.0;
    let big_r = x.sqrt();
    (big_r, dc * big_r / (2.0 * s))
}

/// The two-connected domain `A(r) = {z : |z + 1/z| < r}`, `r > 2`.
///
/// The outer curve is parameterized by polar angle, which keeps the
/// parameterization analytic in a wide strip even near the pinch at `r -> 2`.
/// The inner curve is its image under `z -> 1/z` and therefore runs clockwise.
pub fn make_ar_domain(r: f64, m: usize) -> Result<Domain> {
    if !(r > 2.0) || !r.is_finite() {
        return Err(Error::Geometry(format!(
            "pinched or disconnected boundary: r must exceed 2 (got {r})"
        )));
    }
    let outer = move |t: f64| {
        let phi = Complex64::new(2.0 * PI * t, 0.0);
        let (rad, _) = ar_polar_radius(r, phi);
        rad * Complex64::from_polar(1.0, phi.re)
    };
    let douter = move |t: f64| {
        let phi = Complex64::new(2.0 * PI * t, 0.0);
        let (rad, drad) = ar_polar_radius(r, phi);
        2.0 * PI * (drad + Complex64::i() * rad) * Complex64::from_polar(1.0, phi.re)
    };
    let outer_curve = ParamCurve::from_fn(m, outer, douter)?;
    let inner_curve = ParamCurve::from_fn(m, move |t| 1.0 / outer(t), move |t| {
        let z = outer(t);
        -douter(t) / (z * z)
    })?;
    Domain::new(vec![outer_curve, inner_curve])
}

fn default_m() -> usize {
    DEFAULT_M
}

/// JSON description of a test domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DomainSpec {
    Circles {
        centers: Vec<[f64; 2]>,
        radii: Vec<f64>,
        #[serde(rename = "M", default = "default_m")]
        m: usize,
    },
    Ar {
        r: f64,
        #[serde(rename = "M", default = "default_m")]
        m: usize,
    },
}

impl DomainSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<Domain> {
        match self {
            DomainSpec::Circles { centers, radii, m } => {
                let cs: Vec<Complex64> = centers.iter().map(|c| Complex64::new(c[0], c[1])).collect();
                make_circle_domain(&cs, radii, *m)
            }
            DomainSpec::Ar { r, m } => make_ar_domain(*r, *m),
        }
    }

    /// Copy with a different sample count per curve.
    pub fn with_m(&self, new_m: usize) -> Self {
        let mut s = self.clone();
        match &mut s {
            DomainSpec::Circles { m, .. } | DomainSpec::Ar { m, .. } => *m = new_m,
        }
        s
    }

    pub fn samples_per_curve(&self) -> usize {
        match self {
            DomainSpec::Circles { m, .. } | DomainSpec::Ar { m, .. } => *m,
        }
    }

    pub fn unit_disc(m: usize) -> Self {
        DomainSpec::Circles { centers: vec![[0.0, 0.0]], radii: vec![1.0], m }
    }

    pub fn annulus(rho: f64, m: usize) -> Self {
        DomainSpec::Circles { centers: vec![[0.0, 0.0], [0.0, 0.0]], radii: vec![1.0, rho], m }
    }

    /// The symmetric three-connected circle domain used throughout the tests.
    pub fn three_connected(m: usize) -> Self {
        DomainSpec::Circles {
            centers: vec![[0.0, 0.0], [-0.5, 0.0], [0.5, 0.0]],
            radii: vec![1.0, 0.2, 0.2],
            m,
        }
    }

    pub fn ar(r: f64, m: usize) -> Self {
        DomainSpec::Ar { r, m }
    }
}

/// Unit tangent `T(z) = z'(t)/|z'(t)|` along one curve, as a field over the
/// whole grid that is zero off that curve.
pub fn unit_tangent(domain: &Domain, curve_index: usize) -> Result<crate::calculus::BoundaryField> {
    domain.curve(curve_index)?;
    Ok(crate::calculus::BoundaryField::from_nodes(domain, |ci, _, _, d| {
        if ci == curve_index {
            d / d.norm()
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn circle_factories() {
        let disc = make_circle_domain(&[c(0.0, 0.0)], &[1.0], 64).unwrap();
        assert_eq!(disc.connectivity(), 1);
        let ann = make_circle_domain(&[c(0.0, 0.0), c(0.0, 0.0)], &[1.0, 0.5], 64).unwrap();
        assert_eq!(ann.connectivity(), 2);
        assert_eq!(ann.outer_index(), 0);
        assert!(ann.outer().signed_area() > 0.0);
        assert!(ann.curves()[1].signed_area() < 0.0);
        let three = DomainSpec::three_connected(64).build().unwrap();
        assert_eq!(three.connectivity(), 3);
    }

    #[test]
    fn circle_factory_errors() {
        let overlap = make_circle_domain(&[c(0.0, 0.0), c(-0.1, 0.0), c(0.1, 0.0)], &[1.0, 0.2, 0.2], 64);
        assert!(matches!(overlap, Err(Error::Geometry(_))));
        let outside = make_circle_domain(&[c(0.0, 0.0), c(0.9, 0.0)], &[1.0, 0.2], 64);
        assert!(matches!(outside, Err(Error::Geometry(_))));
        assert!(make_circle_domain(&[c(0.0, 0.0)], &[1.0], 48).is_err());
    }

    #[test]
    fn orientation_is_normalized() {
        // Hand the constructor a clockwise outer circle and ccw hole.
        let outer = circle(c(0.0, 0.0), 1.0, 64, false).unwrap();
        let inner = circle(c(0.0, 0.0), 0.5, 64, true).unwrap();
        let d = Domain::new(vec![inner, outer]).unwrap();
        assert_eq!(d.outer_index(), 1);
        assert!(d.outer().signed_area() > 0.0);
        assert!(d.curves()[0].signed_area() < 0.0);
        assert_eq!(d.total_winding(c(0.75, 0.0)).round(), 1.0);
    }

    #[test]
    fn ar_domain() {
        let d = make_ar_domain(3.0, 256).unwrap();
        assert!(d.contains(c(1.0, 0.0)).unwrap());
        let z0 = d.outer().samples()[0];
        assert!((z0 - c((3.0 + 5f64.sqrt()) / 2.0, 0.0)).norm() < 1e-13);
        for z in d.points() {
            assert!(((z + 1.0 / z).norm() - 3.0).abs() < 1e-10);
        }
        let pinched = make_ar_domain(2.1, 256).unwrap();
        assert!(pinched.min_curve_gap() > 0.0);
        assert!(matches!(make_ar_domain(2.0, 256), Err(Error::Geometry(_))));
    }

    #[test]
    fn tangent_on_circles() {
        let ann = make_circle_domain(&[c(0.0, 0.0), c(0.0, 0.0)], &[1.0, 0.5], 64).unwrap();
        let t_outer = unit_tangent(&ann, 0).unwrap();
        let t_inner = unit_tangent(&ann, 1).unwrap();
        for (ci, k, z, _) in ann.nodes() {
            let i = ann.offsets()[ci] + k;
            if ci == 0 {
                assert!((t_outer.values()[i] - Complex64::i() * z).norm() < 1e-14);
            } else {
                assert!((t_inner.values()[i] + Complex64::i() * z / 0.5).norm() < 1e-14);
                assert!((t_inner.values()[i].norm() - 1.0).abs() < 1e-14);
            }
        }
        assert!(unit_tangent(&ann, 2).is_err());
    }

    #[test]
    fn membership() {
        let ann = DomainSpec::annulus(0.5, 256).build().unwrap();
        assert!(ann.contains(c(0.7, 0.0)).unwrap());
        assert!(!ann.contains(c(0.3, 0.0)).unwrap());
        assert!(!ann.contains(c(2.0, 0.0)).unwrap());
        assert!(matches!(ann.contains(c(1.0, 0.0)), Err(Error::Indeterminate { .. })));
    }

    #[test]
    fn refinement_is_consistent() {
        for spec in [DomainSpec::ar(3.0, 128), DomainSpec::three_connected(128)] {
            let coarse = spec.build().unwrap();
            let fine = spec.with_m(256).build().unwrap();
            for (a, b) in coarse.curves().iter().zip(fine.curves()) {
                for k in 0..a.len() {
                    assert!((a.samples()[k] - b.samples()[2 * k]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn json_spec() {
        let s = DomainSpec::from_json(r#"{"type":"ar","r":3.0,"M":256}"#).unwrap();
        assert_eq!(s, DomainSpec::ar(3.0, 256));
        let s = DomainSpec::from_json(r#"{"type":"circles","centers":[[0,0],[0,0]],"radii":[1,0.5]}"#).unwrap();
        assert_eq!(s.samples_per_curve(), DEFAULT_M);
        assert!(DomainSpec::from_json(r#"{"type":"ar","r":1.9}"#).unwrap().build().is_err());
    }
}
