//! Polynomial relations satisfied by kernel functions: primitive pairs
//! `P(f, K(·, b)/f') = 0`, the three-variable relation
//! `P(K(z, w), f(z), conj f(w)) = 0` on `A(r)`, the invariant
//! `K/(f'(z) conj f'(w))`, and continuation of `K` along paths.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{min_pairwise_distance, poly_roots};
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::potential::Potential;
use crate::probes::{interior_probes, interior_probes_avoiding, PROBE_CLEARANCE};
use crate::szego::AhlforsMap;

/// Validation residual below which a relation is accepted.
pub const RELATION_TOLERANCE: f64 = 1e-6;
/// Required ratio between the residuals at `dv - 1` and at `dv`.
pub const RELATION_GAP: f64 = 1e3;
/// An accepted relation must lie within this factor of the smallest
/// residual in its scan table (the numerical noise floor).
pub const NOISE_MARGIN: f64 = 1e3;
/// Default bound on each degree in relation scans.
pub const DEFAULT_MAX_DEGREE: usize = 8;
/// Minimum distance of sample points from critical points of `f` and from `b`.
pub const CRITICAL_SEPARATION: f64 = 0.05;
/// Guard on `|f'|` for the invariant `I`.
pub const DERIVATIVE_GUARD: f64 = 1e-3;

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// A proper holomorphic map onto the unit disc, with its zeros and critical
/// points.
pub trait ProperMap: Sync {
    fn value(&self, z: Complex64) -> Result<Complex64>;
    fn derivative(&self, z: Complex64) -> Result<Complex64>;
    fn zeros(&self) -> Result<Vec<Complex64>>;
    fn critical_points(&self) -> Result<Vec<Complex64>>;
}

impl ProperMap for AhlforsMap<'_> {
    fn value(&self, z: Complex64) -> Result<Complex64> {
        self.eval(z)
    }

    fn derivative(&self, z: Complex64) -> Result<Complex64> {
        self.deriv(z)
    }

    fn zeros(&self) -> Result<Vec<Complex64>> {
        Ok(AhlforsMap::zeros(self)?.zeros)
    }

    fn critical_points(&self) -> Result<Vec<Complex64>> {
        Ok(AhlforsMap::critical_points(self)?.zeros)
    }
}

/// `f(z) = (z + 1/z)/r`, the two-to-one map of `A(r)` onto the disc. It is
/// defined on the whole punctured plane, which continuation relies on.
#[derive(Debug, Clone, Copy)]
pub struct ArMap {
    pub r: f64,
}

impl ProperMap for ArMap {
    fn value(&self, z: Complex64) -> Result<Complex64> {
        Ok((z + 1.0 / z) / self.r)
    }

    fn derivative(&self, z: Complex64) -> Result<Complex64> {
        Ok((1.0 - 1.0 / (z * z)) / self.r)
    }

    fn zeros(&self) -> Result<Vec<Complex64>> {
        Ok(vec![Complex64::new(0.0, -1.0), Complex64::new(0.0, 1.0)])
    }

    fn critical_points(&self) -> Result<Vec<Complex64>> {
        Ok(vec![Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0)])
    }
}

/// Samples `u = f(z)`, `v = K(z, b)/f'(z)` at interior points.
#[derive(Debug, Clone)]
pub struct SamplePair {
    pub points: Vec<Complex64>,
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
    pub b: Complex64,
}

/// Samples `(K(z_i, w_i), f(z_i), conj f(w_i))`.
#[derive(Debug, Clone)]
pub struct SampleTriple {
    pub z: Vec<Complex64>,
    pub w: Vec<Complex64>,
    pub k: Vec<Complex64>,
    pub fz: Vec<Complex64>,
    pub fw_conj: Vec<Complex64>,
}

/// `count` samples of the pair `(f, K(·, b)/f')`.
pub fn sample_pair(
    potential: &Potential<'_>,
    f: &dyn ProperMap,
    b: Complex64,
    count: usize,
    stream: u64,
) -> Result<SamplePair> {
    let domain = potential.domain();
    domain.check_interior(b)?;
    let crit = f.critical_points()?;
    if crit.iter().any(|c| (c - b).norm() < 1e-2) || f.derivative(b)?.norm() < DERIVATIVE_GUARD {
        return Err(Error::Guard(format!("b = {b} is a critical point of f")));
    }
    let mut avoid = crit;
    avoid.push(b);
    let points = interior_probes_avoiding(domain, count, PROBE_CLEARANCE, &avoid, CRITICAL_SEPARATION, stream);
    if points.len() < count {
        return Err(Error::Degenerate(format!("only {} of {count} admissible sample points", points.len())));
    }
    let col = potential.bergman_column(0, b)?;
    let vals = points
        .par_iter()
        .map(|z| Ok((f.value(*z)?, col.eval(*z)? / f.derivative(*z)?)))
        .collect::<Result<Vec<_>>>()?;
    let (u, v): (Vec<_>, Vec<_>) = vals.into_iter().unzip();
    if u.iter().chain(&v).any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(Error::Resolution("non-finite sample value".into()));
    }
    Ok(SamplePair { points, u, v, b })
}

/// `count` samples of `(K(z, w), f(z), conj f(w))` at independent pairs,
/// both points kept away from the critical points of `f`.
pub fn sample_triple(potential: &Potential<'_>, f: &dyn ProperMap, count: usize, stream: u64) -> Result<SampleTriple> {
    let domain = potential.domain();
    let crit = f.critical_points()?;
    let zs = interior_probes_avoiding(domain, count, PROBE_CLEARANCE, &crit, CRITICAL_SEPARATION, stream);
    let ws = interior_probes_avoiding(domain, count, PROBE_CLEARANCE, &crit, CRITICAL_SEPARATION, stream + 1);
    if zs.len() < count || ws.len() < count {
        return Err(Error::Degenerate("too few admissible sample points".into()));
    }
    let k = zs
        .par_iter()
        .zip(&ws)
        .map(|(z, w)| potential.bergman(*z, *w))
        .collect::<Result<Vec<_>>>()?;
    let fz = zs.iter().map(|z| f.value(*z)).collect::<Result<Vec<_>>>()?;
    let fw_conj = ws.iter().map(|w| f.value(*w).map(|v| v.conj())).collect::<Result<Vec<_>>>()?;
    Ok(SampleTriple { z: zs, w: ws, k, fz, fw_conj })
}

fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Median modulus; keeps high powers of the scaled values of order one where
/// most samples lie.
fn median_abs(v: &[Complex64]) -> f64 {
    let mut m: Vec<f64> = v.iter().map(|z| z.norm()).collect();
    m.sort_by(f64::total_cmp);
    let mid = m[m.len() / 2];
    if mid > 0.0 {
        mid
    } else {
        1.0
    }
}

fn powers(x: Complex64, d: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(d + 1);
    let mut acc = Complex64::new(1.0, 0.0);
    for _ in 0..=d {
        out.push(acc);
        acc *= x;
    }
    out
}

fn power_norm(x: Complex64, d: usize) -> f64 {
    let r = x.norm_sqr();
    (0..=d).map(|k| r.powi(k as i32)).sum::<f64>().sqrt()
}

struct NullFit {
    coeffs: Vec<Complex64>,
    fit_residual: f64,
    validation_residual: f64,
}

/// Unit null vector of the weighted design matrix built from the first
/// `split` rows, validated on the rest.
fn null_fit(rows: &[Vec<Complex64>], weights: &[f64], split: usize) -> Result<NullFit> {
    let cols = rows[0].len();
    if split < cols {
        return Err(Error::Invalid(format!("{split} fit rows for {cols} unknowns")));
    }
    let a = DMatrix::from_fn(split, cols, |i, j| rows[i][j] / weights[i]);
    let svd = a.svd(false, true);
    let v_t = svd.v_t.as_ref().ok_or_else(|| Error::Resolution("SVD failed".into()))?;
    let (imin, smin) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, s)| if *s < best.1 { (i, *s) } else { best });
    let coeffs: Vec<Complex64> = v_t.row(imin).iter().map(|c| c.conj()).collect();
    let validation_residual = rows[split..]
        .iter()
        .zip(&weights[split..])
        .map(|(r, w)| r.iter().zip(&coeffs).map(|(a, c)| a * c).sum::<Complex64>().norm() / w)
        .fold(0.0, f64::max);
    Ok(NullFit { coeffs, fit_residual: smin / (split as f64).sqrt(), validation_residual })
}

/// `P(u, v) = Σ c_pq (u/u_scale)^p (v/v_scale)^q` with `Σ |c_pq|² = 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolynomialRelation {
    pub du: usize,
    pub dv: usize,
    /// `coeffs[p][q]`.
    pub coeffs: Vec<Vec<Complex64>>,
    pub u_scale: f64,
    pub v_scale: f64,
    pub fit_residual: f64,
    pub validation_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl PolynomialRelation {
    pub fn eval(&self, u: Complex64, v: Complex64) -> Complex64 {
        let pu = powers(u / self.u_scale, self.du);
        let pv = powers(v / self.v_scale, self.dv);
        let mut acc = czero();
        for p in 0..=self.du {
            for q in 0..=self.dv {
                acc += self.coeffs[p][q] * pu[p] * pv[q];
            }
        }
        acc
    }

    /// Largest coefficient of `v^dv`.
    pub fn leading_v_norm(&self) -> f64 {
        self.coeffs.iter().map(|row| row[self.dv].norm()).fold(0.0, f64::max)
    }

    /// Coefficient grid as rows `re, im` for CSV output.
    pub fn frobenius_norm(&self) -> f64 {
        self.coeffs.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

fn pair_scales(s: &SamplePair) -> (f64, f64) {
    let su = max_abs(&s.u);
    let sv = max_abs(&s.v);
    (if su > 0.0 { su } else { 1.0 }, if sv > 0.0 { sv } else { 1.0 })
}

fn fit_pair_weighted(
    s: &SamplePair,
    du: usize,
    dv: usize,
    weight_degrees: (usize, usize),
) -> Result<PolynomialRelation> {
    let n = s.u.len();
    if n < 3 * (du + 1) * (dv + 1) {
        return Err(Error::Invalid(format!("{n} samples are too few for bidegree ({du}, {dv})")));
    }
    let (su, sv) = pair_scales(s);
    let split = n * 7 / 10;
    let mut rows = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (u, v) in s.u.iter().zip(&s.v) {
        let (u, v) = (u / su, v / sv);
        let pu = powers(u, du);
        let pv = powers(v, dv);
        rows.push((0..(du + 1) * (dv + 1)).map(|i| pu[i / (dv + 1)] * pv[i % (dv + 1)]).collect::<Vec<_>>());
        weights.push(power_norm(u, weight_degrees.0) * power_norm(v, weight_degrees.1));
    }
    let fit = null_fit(&rows, &weights, split)?;
    let coeffs = (0..=du).map(|p| fit.coeffs[p * (dv + 1)..(p + 1) * (dv + 1)].to_vec()).collect();
    Ok(PolynomialRelation {
        du,
        dv,
        coeffs,
        u_scale: su,
        v_scale: sv,
        fit_residual: fit.fit_residual,
        validation_residual: fit.validation_residual,
        note: None,
    })
}

/// Null-vector fit of a relation of bidegree `(du, dv)`; falls back to a
/// lower `dv` when the leading `v` column vanishes.
pub fn fit_relation(samples: &SamplePair, du: usize, dv: usize) -> Result<PolynomialRelation> {
    let rel = fit_pair_weighted(samples, du, dv, (du, dv))?;
    if dv > 0 && rel.leading_v_norm() <= 1e-10 && rel.validation_residual <= RELATION_TOLERANCE {
        let mut lower = fit_relation(samples, du, dv - 1)?;
        lower.note = Some(format!("leading v coefficients vanish at ({du}, {dv}); lower bidegree returned"));
        return Ok(lower);
    }
    Ok(rel)
}

/// One row of the bidegree scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanEntry {
    pub du: usize,
    pub dv: usize,
    pub fit_residual: f64,
    pub validation_residual: f64,
}

/// Minimal relation with its scan table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimalRelation {
    pub relation: PolynomialRelation,
    pub table: Vec<ScanEntry>,
    /// Best validation residual at `dv - 1` over that at the minimal bidegree.
    pub gap: f64,
}

impl MinimalRelation {
    pub fn table_csv(&self) -> String {
        let mut out = String::from("du,dv,fit_residual,validation_residual\n");
        for e in &self.table {
            out.push_str(&format!("{},{},{:.6e},{:.6e}\n", e.du, e.dv, e.fit_residual, e.validation_residual));
        }
        out
    }
}

/// Validation and fit residuals for every bidegree up to `max_degree`
/// (entries needing more samples than available are omitted). All fits
/// share the row weights of the largest model so that residuals are nested.
pub fn scan_relations(samples: &SamplePair, max_degree: usize) -> Result<Vec<ScanEntry>> {
    let mut grid = Vec::new();
    for dv in 0..=max_degree {
        for du in 0..=max_degree {
            if samples.u.len() >= 3 * (du + 1) * (dv + 1) {
                grid.push((du, dv));
            }
        }
    }
    grid.par_iter()
        .map(|&(du, dv)| {
            let rel = fit_pair_weighted(samples, du, dv, (max_degree, max_degree))?;
            Ok(ScanEntry { du, dv, fit_residual: rel.fit_residual, validation_residual: rel.validation_residual })
        })
        .collect()
}

fn entry(table: &[ScanEntry], du: usize, dv: usize) -> Option<&ScanEntry> {
    table.iter().find(|e| e.du == du && e.dv == dv)
}

/// Smallest `dv`, then `du`, whose validation residual is at most
/// [`RELATION_TOLERANCE`] and within [`NOISE_MARGIN`] of the table's floor.
/// Polynomial approximations of the holomorphic relations that always exist
/// on the sample region converge geometrically, so the absolute tolerance
/// alone accepts them. The reported gap compares `(du, dv - 1)` with `(du, dv)`.
pub fn minimal_relation(samples: &SamplePair, max_degree: usize) -> Result<MinimalRelation> {
    let table = scan_relations(samples, max_degree)?;
    let floor = table.iter().map(|e| e.validation_residual).fold(f64::INFINITY, f64::min);
    let threshold = RELATION_TOLERANCE.min(NOISE_MARGIN * floor);
    for dv in 0..=max_degree {
        for du in 0..=max_degree {
            let Some(e) = entry(&table, du, dv) else { continue };
            if e.validation_residual <= threshold {
                let gap = if dv == 0 {
                    f64::INFINITY
                } else {
                    entry(&table, du, dv - 1).map_or(f64::INFINITY, |p| p.validation_residual) / e.validation_residual
                };
                let mut relation = fit_relation(samples, du, dv)?;
                if gap < RELATION_GAP {
                    relation.note = Some(format!("residual gap {gap:.2e} below {RELATION_GAP:e}"));
                }
                return Ok(MinimalRelation { relation, table, gap });
            }
        }
    }
    Err(Error::NoRelation(format!(
        "no relation with validation residual <= {RELATION_TOLERANCE:e} up to degree {max_degree}"
    )))
}

/// Whether the values `K(a_i, b)/f'(a_i)` at the zeros of `f` are pairwise
/// separated.
pub fn separation_test(potential: &Potential<'_>, f: &dyn ProperMap, b: Complex64) -> Result<bool> {
    let zeros = f.zeros()?;
    if zeros.len() < 2 {
        return Ok(true);
    }
    let col = potential.bergman_column(0, b)?;
    let vals = zeros.iter().map(|a| Ok(col.eval(*a)? / f.derivative(*a)?)).collect::<Result<Vec<_>>>()?;
    Ok(min_pairwise_distance(&vals) >= 1e-6 * max_abs(&vals))
}

/// Tries `b0` and then up to five deterministic pseudo-random interior
/// points until the separation test passes, and scans for the minimal
/// relation of `(f, K(·, b)/f')`.
pub fn discover_pair_relation(
    potential: &Potential<'_>,
    f: &dyn ProperMap,
    b0: Complex64,
    count: usize,
    max_degree: usize,
) -> Result<(MinimalRelation, SamplePair)> {
    let domain = potential.domain();
    let mut candidates = vec![b0];
    candidates.extend(interior_probes(domain, 5, PROBE_CLEARANCE.max(0.1), 50));
    for b in candidates {
        if f.derivative(b)?.norm() < DERIVATIVE_GUARD || !separation_test(potential, f, b)? {
            continue;
        }
        let s = sample_pair(potential, f, b, count, 40)?;
        return Ok((minimal_relation(&s, max_degree)?, s));
    }
    Err(Error::Degenerate("no base point b passed the separation test".into()))
}

/// `P(K, x, y) = Σ c_kpq (K/k_scale)^k x^p y^q`, unit norm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrivariateRelation {
    pub dk: usize,
    pub dp: usize,
    pub dq: usize,
    /// `coeffs[k][p][q]`.
    pub coeffs: Vec<Vec<Vec<Complex64>>>,
    pub k_scale: f64,
    pub fit_residual: f64,
    pub validation_residual: f64,
}

impl TrivariateRelation {
    fn index(&self, k: usize, p: usize, q: usize) -> usize {
        (k * (self.dp + 1) + p) * (self.dq + 1) + q
    }

    /// Coefficients of the polynomial in `K` at fixed `x = f(z)`,
    /// `y = conj f(w)`, in ascending powers of `K/k_scale`.
    pub fn k_polynomial(&self, x: Complex64, y: Complex64) -> Vec<Complex64> {
        let px = powers(x, self.dp);
        let py = powers(y, self.dq);
        (0..=self.dk)
            .map(|k| {
                let mut acc = czero();
                for p in 0..=self.dp {
                    for q in 0..=self.dq {
                        acc += self.coeffs[k][p][q] * px[p] * py[q];
                    }
                }
                acc
            })
            .collect()
    }

    pub fn eval(&self, k: Complex64, x: Complex64, y: Complex64) -> Complex64 {
        let pk = powers(k / self.k_scale, self.dk);
        self.k_polynomial(x, y).iter().zip(&pk).map(|(c, p)| c * p).sum()
    }

    /// `|P|` relative to the sum of the moduli of its terms.
    pub fn residual(&self, k: Complex64, x: Complex64, y: Complex64) -> f64 {
        let (pk, px, py) = (powers(k / self.k_scale, self.dk), powers(x, self.dp), powers(y, self.dq));
        let mut sum = czero();
        let mut scale = 0.0;
        for (a, ka) in pk.iter().enumerate() {
            for (p, xp) in px.iter().enumerate() {
                for (q, yq) in py.iter().enumerate() {
                    let t = self.coeffs[a][p][q] * ka * xp * yq;
                    sum += t;
                    scale += t.norm();
                }
            }
        }
        if scale > 0.0 {
            sum.norm() / scale
        } else {
            0.0
        }
    }

    /// Roots in `K` at fixed `x`, `y`.
    pub fn k_roots(&self, x: Complex64, y: Complex64) -> Vec<Complex64> {
        let mut c = self.k_polynomial(x, y);
        let big = c.iter().map(|v| v.norm()).fold(0.0, f64::max);
        while c.len() > 1 && c.last().map_or(false, |v| v.norm() <= 1e-14 * big) {
            c.pop();
        }
        poly_roots(&c).into_iter().map(|r| r * self.k_scale).collect()
    }

    fn flat_index_count(&self) -> usize {
        self.index(self.dk, self.dp, self.dq) + 1
    }
}

/// Null-vector fit of a three-variable relation of degrees `(dk, dp, dq)`
/// in `(K, f(z), conj f(w))`.
pub fn fit_three_var_relation(samples: &SampleTriple, dk: usize, dp: usize, dq: usize) -> Result<TrivariateRelation> {
    let n = samples.k.len();
    let cols = (dk + 1) * (dp + 1) * (dq + 1);
    if n < 3 * cols {
        return Err(Error::Invalid(format!("{n} samples are too few for degrees ({dk}, {dp}, {dq})")));
    }
    let ks = median_abs(&samples.k);
    let mut rows = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let k = samples.k[i] / ks;
        let (x, y) = (samples.fz[i], samples.fw_conj[i]);
        let (pk, px, py) = (powers(k, dk), powers(x, dp), powers(y, dq));
        let mut row = Vec::with_capacity(cols);
        for a in 0..=dk {
            for p in 0..=dp {
                for q in 0..=dq {
                    row.push(pk[a] * px[p] * py[q]);
                }
            }
        }
        rows.push(row);
        weights.push(power_norm(k, dk) * power_norm(x, dp) * power_norm(y, dq));
    }
    let fit = null_fit(&rows, &weights, n * 7 / 10)?;
    let coeffs = (0..=dk)
        .map(|a| {
            (0..=dp)
                .map(|p| (0..=dq).map(|q| fit.coeffs[(a * (dp + 1) + p) * (dq + 1) + q]).collect())
                .collect()
        })
        .collect();
    let rel = TrivariateRelation {
        dk,
        dp,
        dq,
        coeffs,
        k_scale: ks,
        fit_residual: fit.fit_residual,
        validation_residual: fit.validation_residual,
    };
    debug_assert_eq!(rel.flat_index_count(), cols);
    Ok(rel)
}

/// Smallest `dk`, then smallest symmetric `dp = dq`, whose validation
/// residual is at most [`RELATION_TOLERANCE`].
pub fn minimal_three_var_relation(
    samples: &SampleTriple,
    max_k: usize,
    max_degree: usize,
) -> Result<TrivariateRelation> {
    for dk in 1..=max_k {
        for d in 0..=max_degree {
            if samples.k.len() < 3 * (dk + 1) * (d + 1) * (d + 1) {
                break;
            }
            let rel = fit_three_var_relation(samples, dk, d, d)?;
            if rel.validation_residual <= RELATION_TOLERANCE {
                return Ok(rel);
            }
        }
    }
    Err(Error::NoRelation(format!(
        "no three-variable relation up to K-degree {max_k} and degree {max_degree}"
    )))
}

/// Relative remainder below which a content factor is divided out.
const CONTENT_TOLERANCE: f64 = 1e-9;

/// Dense polynomial in `(K, x, y)`, indexed `[k][p][q]`.
#[derive(Debug, Clone)]
struct Poly3 {
    dims: [usize; 3],
    c: Vec<Complex64>,
}

impl Poly3 {
    fn zero(dims: [usize; 3]) -> Self {
        Self { dims, c: vec![czero(); dims[0] * dims[1] * dims[2]] }
    }

    fn at(&self, k: usize, p: usize, q: usize) -> Complex64 {
        if k < self.dims[0] && p < self.dims[1] && q < self.dims[2] {
            self.c[(k * self.dims[1] + p) * self.dims[2] + q]
        } else {
            czero()
        }
    }

    fn add_at(&mut self, k: usize, p: usize, q: usize, v: Complex64) {
        let i = (k * self.dims[1] + p) * self.dims[2] + q;
        self.c[i] += v;
    }

    fn add(&self, other: &Self) -> Self {
        let dims = [0, 1, 2].map(|i| self.dims[i].max(other.dims[i]));
        let mut out = Self::zero(dims);
        for k in 0..dims[0] {
            for p in 0..dims[1] {
                for q in 0..dims[2] {
                    out.add_at(k, p, q, self.at(k, p, q) + other.at(k, p, q));
                }
            }
        }
        out
    }

    fn mul(&self, other: &Self) -> Self {
        let dims = [0, 1, 2].map(|i| self.dims[i] + other.dims[i] - 1);
        let mut out = Self::zero(dims);
        for (i, a) in self.c.iter().enumerate() {
            if *a == czero() {
                continue;
            }
            let (k1, p1, q1) = (i / (self.dims[1] * self.dims[2]), (i / self.dims[2]) % self.dims[1], i % self.dims[2]);
            for (j, b) in other.c.iter().enumerate() {
                if *b == czero() {
                    continue;
                }
                let (k2, p2, q2) =
                    (j / (other.dims[1] * other.dims[2]), (j / other.dims[2]) % other.dims[1], j % other.dims[2]);
                out.add_at(k1 + k2, p1 + p2, q1 + q2, a * b);
            }
        }
        out
    }

    fn scale(&self, s: Complex64) -> Self {
        Self { dims: self.dims, c: self.c.iter().map(|v| v * s).collect() }
    }

    fn norm(&self) -> f64 {
        self.c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Quotient by `v² − c` in the variable `axis` (1 or 2), if the
    /// remainder vanishes to `tol` relative to the norm.
    fn divide_quadratic(&self, axis: usize, c: f64, tol: f64) -> Option<Self> {
        let n = self.dims[axis];
        if n < 3 {
            return None;
        }
        let mut dims = self.dims;
        dims[axis] = n - 2;
        let mut out = Self::zero(dims);
        let mut remainder = 0.0;
        let idx = |i: usize, j: usize, v: usize| if axis == 1 { (i, v, j) } else { (i, j, v) };
        let other = if axis == 1 { self.dims[2] } else { self.dims[1] };
        for i in 0..self.dims[0] {
            for j in 0..other {
                let mut a: Vec<Complex64> = (0..n)
                    .map(|v| {
                        let (k, p, q) = idx(i, j, v);
                        self.at(k, p, q)
                    })
                    .collect();
                for v in (2..n).rev() {
                    let b = a[v];
                    let (k, p, q) = idx(i, j, v - 2);
                    out.add_at(k, p, q, b);
                    a[v - 2] += b * c;
                    a[v] = czero();
                }
                remainder += a[0].norm_sqr() + a[1].norm_sqr();
            }
        }
        (remainder.sqrt() <= tol * self.norm()).then_some(out)
    }
}

/// Pair `a + b s` with `s² = σ s − σ/r`, where `σ` is a polynomial in `x`
/// (`axis` 1) or `y` (`axis` 2).
struct QuadraticExt {
    sigma: Poly3,
    r: f64,
}

impl QuadraticExt {
    fn new(r: f64, axis: usize) -> Self {
        let mut dims = [1, 1, 1];
        dims[axis] = 3;
        let mut sigma = Poly3::zero(dims);
        sigma.c[0] = Complex64::new(4.0 / r, 0.0);
        sigma.c[2] = Complex64::new(-r, 0.0);
        Self { sigma, r }
    }

    fn mul(&self, a: &(Poly3, Poly3), b: &(Poly3, Poly3)) -> (Poly3, Poly3) {
        let bd = a.1.mul(&b.1);
        let lo = a.0.mul(&b.0).add(&bd.mul(&self.sigma).scale(Complex64::new(-1.0 / self.r, 0.0)));
        let hi = a.0.mul(&b.1).add(&a.1.mul(&b.0)).add(&bd.mul(&self.sigma));
        (lo, hi)
    }

    /// `s^j` as `(α_j, β_j)`.
    fn power(&self, j: usize) -> (Poly3, Poly3) {
        let one = Poly3 { dims: [1, 1, 1], c: vec![Complex64::new(1.0, 0.0)] };
        let mut acc = (one.clone(), Poly3::zero([1, 1, 1]));
        let s = (Poly3::zero([1, 1, 1]), one);
        for _ in 0..j {
            acc = self.mul(&acc, &s);
        }
        acc
    }

    /// `(a + b s1)(a + b s2) = a² + σ a b + (σ/r) b²`.
    fn norm(&self, a: &Poly3, b: &Poly3) -> Poly3 {
        let bb = b.mul(b);
        a.mul(a)
            .add(&self.sigma.mul(&a.mul(b)))
            .add(&self.sigma.mul(&bb).scale(Complex64::new(1.0 / self.r, 0.0)))
    }
}

/// Relation for `K` on `A(r)` together with the fitted relation for the
/// invariant `I = K/(f'(z) conj f'(w))` it was eliminated from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArKernelRelation {
    pub r: f64,
    pub invariant: TrivariateRelation,
    pub kernel: TrivariateRelation,
    /// Scan of the invariant's relation over `(dk, d, d)`.
    pub table: Vec<TrivariateScanEntry>,
}

/// One fitted degree triple of a three-variable scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrivariateScanEntry {
    pub dk: usize,
    pub dp: usize,
    pub dq: usize,
    pub fit_residual: f64,
    pub validation_residual: f64,
}

impl ArKernelRelation {
    pub fn table_csv(&self) -> String {
        let mut out = String::from("dk,dp,dq,fit_residual,validation_residual\n");
        for e in &self.table {
            out.push_str(&format!(
                "{},{},{},{:.6e},{:.6e}\n",
                e.dk, e.dp, e.dq, e.fit_residual, e.validation_residual
            ));
        }
        out
    }
}

/// Samples with `K` replaced by `I = K/(f'(z) conj f'(w))`.
pub fn invariant_samples(samples: &SampleTriple, f: &dyn ProperMap) -> Result<SampleTriple> {
    let mut out = samples.clone();
    for i in 0..out.k.len() {
        let (dz, dw) = (f.derivative(out.z[i])?, f.derivative(out.w[i])?);
        if dz.norm() < DERIVATIVE_GUARD || dw.norm() < DERIVATIVE_GUARD {
            return Err(Error::Guard(format!("f' is below {DERIVATIVE_GUARD:e} at a sample")));
        }
        out.k[i] /= dz * dw.conj();
    }
    Ok(out)
}

/// Eliminates `f'` from a relation `Q(I, f(z), conj f(w)) = 0` on `A(r)`,
/// where `f'(z)` is a root of `s² − σ(f) s + σ(f)/r` with
/// `σ(x) = (4 − r²x²)/r`. The norm over both conjugates of `f'(z)` and of
/// `conj f'(w)` is a polynomial in `(K, f(z), conj f(w))` of `K`-degree
/// `4 dk`.
pub fn eliminate_derivatives(invariant: &TrivariateRelation, r: f64, k_scale: f64) -> TrivariateRelation {
    let m = invariant.dk;
    let (ex, ey) = (QuadraticExt::new(r, 1), QuadraticExt::new(r, 2));
    // Q = Σ_a p_a (k_scale K̃ / (i_scale s t))^a (s t)^m, a polynomial in K̃, x, y, s, t.
    let mut q00 = Poly3::zero([m + 1, 1, 1]);
    let mut q10 = q00.clone();
    let mut q01 = q00.clone();
    let mut q11 = q00.clone();
    let ratio = k_scale / invariant.k_scale;
    for a in 0..=m {
        let mut pa = Poly3::zero([a + 1, invariant.dp + 1, invariant.dq + 1]);
        for p in 0..=invariant.dp {
            for q in 0..=invariant.dq {
                pa.add_at(a, p, q, invariant.coeffs[a][p][q] * ratio.powi(a as i32));
            }
        }
        let (sx, sy) = (ex.power(m - a), ey.power(m - a));
        q00 = q00.add(&pa.mul(&sx.0).mul(&sy.0));
        q10 = q10.add(&pa.mul(&sx.1).mul(&sy.0));
        q01 = q01.add(&pa.mul(&sx.0).mul(&sy.1));
        q11 = q11.add(&pa.mul(&sx.1).mul(&sy.1));
    }
    // Q = C + D t with C = q00 + q10 s, D = q01 + q11 s; norm over t, then over s.
    let c = (q00, q10);
    let d = (q01, q11);
    let cc = ex.mul(&c, &c);
    let cd = ex.mul(&c, &d);
    let dd = ex.mul(&d, &d);
    let sy = &ey.sigma;
    let inv_r = Complex64::new(1.0 / r, 0.0);
    let nt0 = cc.0.add(&sy.mul(&cd.0)).add(&sy.mul(&dd.0).scale(inv_r));
    let nt1 = cc.1.add(&sy.mul(&cd.1)).add(&sy.mul(&dd.1).scale(inv_r));
    let mut full = ex.norm(&nt0, &nt1);
    // The norm carries powers of σ(x) and σ(y) as content; strip them.
    let c = 4.0 / (r * r);
    for axis in [1, 2] {
        while let Some(q) = full.divide_quadratic(axis, c, CONTENT_TOLERANCE) {
            full = q;
        }
    }

    let norm = full.c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    // Drop degrees whose coefficients vanish to rounding.
    let mut top = [0usize; 3];
    for k in 0..full.dims[0] {
        for p in 0..full.dims[1] {
            for q in 0..full.dims[2] {
                if full.at(k, p, q).norm() > 1e-15 * norm {
                    top = [top[0].max(k), top[1].max(p), top[2].max(q)];
                }
            }
        }
    }
    let [nk, np, nq] = top.map(|t| t + 1);
    let coeffs = (0..nk)
        .map(|k| (0..np).map(|p| (0..nq).map(|q| full.at(k, p, q) / norm).collect()).collect())
        .collect();
    TrivariateRelation {
        dk: nk - 1,
        dp: np - 1,
        dq: nq - 1,
        coeffs,
        k_scale,
        fit_residual: f64::NAN,
        validation_residual: f64::NAN,
    }
}

/// Relation `P(K, f(z), conj f(w)) = 0` on `A(r)`. The invariant's relation
/// is searched for `K`-degree up to `max_k` and symmetric degree up to
/// `max_degree`, accepted like [`minimal_relation`], then `f'` is
/// eliminated. Residuals of the result are measured on the same 70/30 split.
pub fn ar_kernel_relation(samples: &SampleTriple, r: f64, max_k: usize, max_degree: usize) -> Result<ArKernelRelation> {
    let map = ArMap { r };
    let inv = invariant_samples(samples, &map)?;
    let mut table = Vec::new();
    for dk in 1..=max_k {
        for d in 0..=max_degree {
            if inv.k.len() >= 3 * (dk + 1) * (d + 1) * (d + 1) {
                table.push(fit_three_var_relation(&inv, dk, d, d)?);
            }
        }
    }
    let floor = table.iter().map(|t| t.validation_residual).fold(f64::INFINITY, f64::min);
    let threshold = RELATION_TOLERANCE.min(NOISE_MARGIN * floor);
    let scan = table
        .iter()
        .map(|t| TrivariateScanEntry {
            dk: t.dk,
            dp: t.dp,
            dq: t.dq,
            fit_residual: t.fit_residual,
            validation_residual: t.validation_residual,
        })
        .collect();
    let invariant = table
        .into_iter()
        .find(|t| t.validation_residual <= threshold)
        .ok_or_else(|| Error::NoRelation(format!("no relation for I up to degree ({max_k}, {max_degree})")))?;
    let mut kernel = eliminate_derivatives(&invariant, r, median_abs(&samples.k));
    let n = samples.k.len();
    let split = n * 7 / 10;
    let res: Vec<f64> = (0..n).map(|i| kernel.residual(samples.k[i], samples.fz[i], samples.fw_conj[i])).collect();
    kernel.fit_residual = (res[..split].iter().map(|v| v * v).sum::<f64>() / split as f64).sqrt();
    kernel.validation_residual = res[split..].iter().copied().fold(0.0, f64::max);
    Ok(ArKernelRelation { r, invariant, kernel, table: scan })
}

/// Copy of the samples with the `K` values permuted.
pub fn shuffled_control(samples: &SampleTriple, seed: u64) -> SampleTriple {
    let mut out = samples.clone();
    out.k.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    out
}

/// Residual of the relation under `(z, w) ↦ (w, z)`, `K ↦ conj K`: the
/// point `(conj K, conj y, conj x)` must also satisfy it.
pub fn hermitian_residual(rel: &TrivariateRelation, samples: &SampleTriple) -> f64 {
    (0..samples.k.len())
        .map(|i| rel.residual(samples.k[i].conj(), samples.fw_conj[i].conj(), samples.fz[i].conj()))
        .fold(0.0, f64::max)
}

/// `I(z, w) = K(z, w)/(f'(z) conj f'(w))`.
pub fn invariant_i(potential: &Potential<'_>, f: &dyn ProperMap, z: Complex64, w: Complex64) -> Result<Complex64> {
    let (dz, dw) = (f.derivative(z)?, f.derivative(w)?);
    if dz.norm() < DERIVATIVE_GUARD || dw.norm() < DERIVATIVE_GUARD {
        return Err(Error::Guard(format!("f' is below {DERIVATIVE_GUARD:e} at {z} or {w}")));
    }
    Ok(potential.bergman(z, w)? / (dz * dw.conj()))
}

/// Values of `K(·, w)` continued along a path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuationTrace {
    pub w: Complex64,
    pub points: Vec<Complex64>,
    pub values: Vec<Complex64>,
    /// All roots of the relation in `K` at the endpoint.
    pub endpoint_roots: Vec<Complex64>,
    /// Number of accepted sub-steps.
    pub steps: usize,
}

impl ContinuationTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re_z,im_z,re_k,im_k\n");
        for (z, v) in self.points.iter().zip(&self.values) {
            out.push_str(&format!("{:.12e},{:.12e},{:.12e},{:.12e}\n", z.re, z.im, v.re, v.im));
        }
        out
    }
}

fn nearest_root(roots: &[Complex64], target: Complex64) -> Option<(Complex64, f64, f64)> {
    let mut d: Vec<(f64, Complex64)> = roots.iter().map(|r| ((r - target).norm(), *r)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0));
    let first = d.first()?;
    Some((first.1, first.0, d.get(1).map_or(f64::INFINITY, |s| s.0)))
}

/// Tracks the root of `P(·, f(z), conj f(w))` continuously along `path`
/// from `seed` at `path[0]`, halving steps whenever the nearest root is not
/// clearly closer than the others.
pub fn continue_kernel(
    rel: &TrivariateRelation,
    f: &dyn ProperMap,
    w: Complex64,
    path: &[Complex64],
    seed: Complex64,
) -> Result<ContinuationTrace> {
    if path.is_empty() {
        return Err(Error::Invalid("empty continuation path".into()));
    }
    let y = f.value(w)?.conj();
    let collision = 1e-8 * rel.k_scale;
    let roots_at = |z: Complex64| -> Result<Vec<Complex64>> {
        let roots = rel.k_roots(f.value(z)?, y);
        if roots.len() > 1 && min_pairwise_distance(&roots) < collision {
            return Err(Error::Degenerate(format!("branch point: roots of the relation collide near z = {z}")));
        }
        Ok(roots)
    };
    let roots0 = roots_at(path[0])?;
    let (mut current, _, _) =
        nearest_root(&roots0, seed).ok_or_else(|| Error::Degenerate("relation has no roots in K".into()))?;
    let mut values = vec![current];
    let mut steps = 0;
    for pair in path.windows(2) {
        let (mut z0, z1) = (pair[0], pair[1]);
        let mut h = 1.0;
        while (z1 - z0).norm() > 0.0 {
            let zt = if h >= 1.0 { z1 } else { z0 + (z1 - z0) * h };
            let roots = roots_at(zt)?;
            let (r, d1, d2) = nearest_root(&roots, current).ok_or_else(|| Error::Degenerate("no roots".into()))?;
            if d1 <= 0.25 * d2 {
                current = r;
                z0 = zt;
                steps += 1;
                h = (h * 2.0).min(1.0);
                if zt == z1 {
                    break;
                }
            } else {
                h *= 0.5;
                if h < 1e-9 {
                    return Err(Error::Degenerate(format!("continuation stalled near z = {zt}")));
                }
            }
        }
        values.push(current);
    }
    let end = *path.last().expect("non-empty path");
    Ok(ContinuationTrace { w, points: path.to_vec(), values, endpoint_roots: roots_at(end)?, steps })
}

/// Smallest root gap of the relation on a rectangular grid, as
/// `(z, gap/k_scale)` sorted ascending; small gaps locate branch points.
pub fn discriminant_scan(
    rel: &TrivariateRelation,
    f: &dyn ProperMap,
    w: Complex64,
    corner0: Complex64,
    corner1: Complex64,
    resolution: usize,
) -> Result<Vec<(Complex64, f64)>> {
    let y = f.value(w)?.conj();
    let mut out = Vec::new();
    for i in 0..resolution {
        for j in 0..resolution {
            let t = Complex64::new(i as f64 / (resolution - 1) as f64, j as f64 / (resolution - 1) as f64);
            let z = Complex64::new(
                corner0.re + (corner1.re - corner0.re) * t.re,
                corner0.im + (corner1.im - corner0.im) * t.im,
            );
            if z.norm() < 1e-6 {
                continue;
            }
            let roots = rel.k_roots(f.value(z)?, y);
            if roots.len() > 1 {
                out.push((z, min_pairwise_distance(&roots) / rel.k_scale));
            }
        }
    }
    out.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(out)
}

/// Circle of `count + 1` points around `center` (closed: first = last).
pub fn loop_path(center: Complex64, radius: f64, start_angle: f64, count: usize) -> Vec<Complex64> {
    (0..=count)
        .map(|k| center + Complex64::from_polar(radius, start_angle + 2.0 * PI * k as f64 / count as f64))
        .collect()
}

/// Straight path of `count + 1` points.
pub fn line_path(z0: Complex64, z1: Complex64, count: usize) -> Vec<Complex64> {
    (0..=count).map(|k| z0 + (z1 - z0) * (k as f64 / count as f64)).collect()
}

/// A deterministic pseudo-random point of the domain, used when a base
/// point must be redrawn.
pub fn random_interior_point(domain: &Domain, seed: u64) -> Option<Complex64> {
    let [x0, y0, x1, y1] = domain.outer().bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..10_000).map(|_| Complex64::new(rng.gen_range(x0..x1), rng.gen_range(y0..y1))).find(|p| domain.is_admissible(*p, 0.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn synthetic(n: usize, f: impl Fn(Complex64) -> Complex64) -> SamplePair {
        let points: Vec<Complex64> =
            (0..n).map(|i| c(crate::probes::halton(i as u64 + 1, 2) - 0.5, crate::probes::halton(i as u64 + 1, 3) - 0.5)).collect();
        SamplePair { u: points.clone(), v: points.iter().map(|z| f(*z)).collect(), points, b: czero() }
    }

    #[test]
    fn synthetic_square() {
        let s = synthetic(200, |u| u * u);
        let m = minimal_relation(&s, 4).unwrap();
        assert_eq!((m.relation.du, m.relation.dv), (2, 1));
        assert!(m.relation.validation_residual < 1e-13);
        assert!((m.relation.frobenius_norm() - 1.0).abs() < 1e-12);
        for (u, v) in s.u.iter().zip(&s.v) {
            assert!(m.relation.eval(*u, *v).norm() < 1e-12);
        }
    }

    #[test]
    fn scale_invariance_and_nesting() {
        let s = synthetic(300, |u| (u * u + 0.3).sqrt() + u);
        let mut t = s.clone();
        for v in &mut t.v {
            *v *= 37.0;
        }
        for (du, dv) in [(1, 1), (2, 2), (3, 2)] {
            let a = fit_pair_weighted(&s, du, dv, (4, 4)).unwrap();
            let b = fit_pair_weighted(&t, du, dv, (4, 4)).unwrap();
            assert!((a.validation_residual - b.validation_residual).abs() < 1e-10);
        }
        for dv in 0..=3 {
            for du in 0..3 {
                let lo = fit_pair_weighted(&s, du, dv, (4, 4)).unwrap();
                let hi = fit_pair_weighted(&s, du + 1, dv, (4, 4)).unwrap();
                assert!(hi.fit_residual <= lo.fit_residual + 1e-12);
            }
        }
    }

    #[test]
    fn disc_constant_relation() {
        let d = DomainSpec::unit_disc(128).build().unwrap();
        let pot = Potential::new(&d).unwrap();
        struct Identity;
        impl ProperMap for Identity {
            fn value(&self, z: Complex64) -> Result<Complex64> {
                Ok(z)
            }
            fn derivative(&self, _: Complex64) -> Result<Complex64> {
                Ok(c(1.0, 0.0))
            }
            fn zeros(&self) -> Result<Vec<Complex64>> {
                Ok(vec![czero()])
            }
            fn critical_points(&self) -> Result<Vec<Complex64>> {
                Ok(vec![])
            }
        }
        let s = sample_pair(&pot, &Identity, czero(), 60, 3).unwrap();
        for v in &s.v {
            assert!((v - 1.0 / PI).norm() < 1e-10);
        }
        let m = minimal_relation(&s, 3).unwrap();
        assert_eq!((m.relation.du, m.relation.dv), (0, 1));
        assert!(separation_test(&pot, &Identity, c(0.2, 0.1)).unwrap());
    }

    #[test]
    fn critical_b_is_rejected() {
        let d = DomainSpec::ar(3.0, 128).build().unwrap();
        let pot = Potential::new(&d).unwrap();
        assert!(matches!(sample_pair(&pot, &ArMap { r: 3.0 }, c(1.0, 0.0), 50, 1), Err(Error::Guard(_))));
    }

    #[test]
    fn inversion_is_rational_symmetry_of_ar() {
        let d = DomainSpec::ar(3.0, 128).build().unwrap();
        let f = ArMap { r: 3.0 };
        for z in interior_probes(&d, 30, 0.05, 2) {
            assert!(d.contains(1.0 / z).unwrap());
            assert!((f.value(1.0 / z).unwrap() - f.value(z).unwrap()).norm() < 1e-14);
        }
    }

    #[test]
    fn elimination_annihilates_kernel_values() {
        // I = x + 2y, so K = f'(z) conj f'(w) (f(z) + 2 conj f(w)).
        let mut coeffs = vec![vec![vec![czero(); 2]; 2]; 2];
        coeffs[0][1][0] = c(-1.0, 0.0);
        coeffs[0][0][1] = c(-2.0, 0.0);
        coeffs[1][0][0] = c(1.0, 0.0);
        let inv = TrivariateRelation {
            dk: 1,
            dp: 1,
            dq: 1,
            coeffs,
            k_scale: 1.0,
            fit_residual: 0.0,
            validation_residual: 0.0,
        };
        let f = ArMap { r: 3.0 };
        let rel = eliminate_derivatives(&inv, 3.0, 0.5);
        assert_eq!(rel.dk, 4);
        for i in 0..20 {
            let z = c(0.3 + 0.1 * i as f64, 1.2 - 0.05 * i as f64);
            let w = c(-0.7 + 0.08 * i as f64, 0.9);
            let (x, y) = (f.value(z).unwrap(), f.value(w).unwrap().conj());
            let k = f.derivative(z).unwrap() * f.derivative(w).unwrap().conj() * (x + 2.0 * y);
            assert!(rel.residual(k, x, y) < 1e-13);
            assert!(rel.residual(k * 1.1, x, y) > 1e-6);
        }
    }

    #[test]
    fn quadratic_division_is_exact() {
        // (x² − 0.25)(1 + K x y) divided by x² − 0.25.
        let mut p = Poly3::zero([2, 4, 2]);
        p.add_at(0, 2, 0, c(1.0, 0.0));
        p.add_at(0, 0, 0, c(-0.25, 0.0));
        p.add_at(1, 3, 1, c(1.0, 0.0));
        p.add_at(1, 1, 1, c(-0.25, 0.0));
        let q = p.divide_quadratic(1, 0.25, 1e-12).unwrap();
        assert_eq!(q.dims, [2, 2, 2]);
        assert_eq!(q.at(0, 0, 0), c(1.0, 0.0));
        assert_eq!(q.at(1, 1, 1), c(1.0, 0.0));
        assert!(q.divide_quadratic(1, 0.25, 1e-12).is_none());
    }
}
