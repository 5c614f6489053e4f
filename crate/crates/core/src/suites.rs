//! Verification suites: groups of checks assembled into a [`RunReport`].

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{invariant_i, ArMap};
use crate::error::{Error, Result};
use crate::geometry::{Domain, DomainSpec};
use crate::identities::{
    biholo_transport_check, build_generator_set, check_boundary_identities, expansion_consistency_check,
    fit_expansions, generator_structure_check, generator_szego_check, green_factorization_check,
    proper_map_expansion, reconstruct_bergman, reconstruction_check, GeneratorSet, Workbench,
};
use crate::probes::{interior_probes, probe_pairs, PROBE_CLEARANCE};
use crate::report::{CheckRecord, RunReport};
use crate::szego::{kerzman_stein_matrix, select_base_point};

/// Residual bound for the Szegő identity and the Ahlfors structure checks.
pub const SZEGO_TOLERANCE: f64 = 1e-7;
/// Relative error bound for the disc closed forms.
pub const CLOSED_FORM_TOLERANCE: f64 = 1e-8;
/// Bound on the Kerzman–Stein kernel on a circle.
pub const KERZMAN_STEIN_TOLERANCE: f64 = 1e-12;
/// Bound for transformation laws under explicit self-maps.
pub const TRANSPORT_TOLERANCE: f64 = 1e-8;
/// Direction of the base-point walk.
pub const BASE_DIRECTION: Complex64 = Complex64::new(0.3, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    Szego,
    Bergman,
    Reconstruct,
    Biholo,
}

impl Suite {
    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn record_or_fail(id: &str, grid: &str, r: Result<CheckRecord>) -> CheckRecord {
    r.unwrap_or_else(|e| CheckRecord::failed(id, grid, &e))
}

/// The unit disc spec, recognized for the closed-form checks.
pub fn is_unit_disc(spec: &DomainSpec) -> bool {
    matches!(spec, DomainSpec::Circles { centers, radii, .. }
        if centers.len() == 1 && centers[0] == [0.0, 0.0] && radii[0] == 1.0)
}

/// Base point used by every suite.
pub fn base_point(bench: &Workbench<'_>) -> Result<Complex64> {
    Ok(select_base_point(&bench.szego, None, BASE_DIRECTION)?.a)
}

/// Szegő identity, Ahlfors structure and, on the unit disc, the closed forms.
pub fn szego_suite(spec: &DomainSpec, bench: &Workbench<'_>, a: Complex64) -> Vec<CheckRecord> {
    let grid = bench.grid_label();
    let n = bench.domain.connectivity();
    let mut out = Vec::new();
    let sol = match bench.szego.solve(a) {
        Ok(s) => s,
        Err(e) => return vec![CheckRecord::failed("szego_solve", &grid, &e)],
    };
    out.push(record_or_fail(
        "szego_identity",
        &grid,
        sol.identity_residual().map(|r| CheckRecord::at_most("szego_identity", &grid, r, SZEGO_TOLERANCE)),
    ));
    out.push(record_or_fail(
        "szego_zero_count",
        &grid,
        sol.zeros().map(|z| {
            CheckRecord::holds("szego_zero_count", &grid, z.zeros.len() + 1 == n && !z.clustered)
                .with_note(format!("{} zeros", z.zeros.len()))
        }),
    ));
    match sol.ahlfors() {
        Ok(f) => {
            out.push(record_or_fail(
                "ahlfors_boundary_modulus",
                &grid,
                f.extension_modulus_error()
                    .map(|r| CheckRecord::at_most("ahlfors_boundary_modulus", &grid, r, SZEGO_TOLERANCE)),
            ));
            out.push(record_or_fail(
                "ahlfors_derivative_at_a",
                &grid,
                sol.s(a).map(|s| {
                    let expected = 2.0 * PI * s.re;
                    let r = (f.derivative_at_a() - expected).abs() / expected;
                    CheckRecord::at_most("ahlfors_derivative_at_a", &grid, r, SZEGO_TOLERANCE)
                }),
            ));
            out.push(record_or_fail(
                "ahlfors_zero_count",
                &grid,
                f.zeros().map(|z| {
                    CheckRecord::holds("ahlfors_zero_count", &grid, z.zeros.len() == n && !z.clustered)
                        .with_note(format!("{} zeros", z.zeros.len()))
                }),
            ));
        }
        Err(e) => out.push(CheckRecord::failed("ahlfors_map", &grid, &e)),
    }
    if is_unit_disc(spec) {
        out.extend(disc_checks(bench, a));
    }
    out
}

/// Closed forms on the unit disc and the vanishing Kerzman–Stein kernel.
fn disc_checks(bench: &Workbench<'_>, a: Complex64) -> Vec<CheckRecord> {
    let grid = bench.grid_label();
    let d = bench.domain;
    let ks = kerzman_stein_matrix(d).iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut out = vec![CheckRecord::at_most("disc_kerzman_stein", &grid, ks, KERZMAN_STEIN_TOLERANCE)];
    let pairs = probe_pairs(d, 40, PROBE_CLEARANCE, 0.05, 18);
    let one = c(1.0, 0.0);
    let forms: [(&str, fn(Complex64, Complex64) -> Complex64); 3] = [
        ("disc_szego", |z, w| one_over(2.0 * PI * (c(1.0, 0.0) - z * w.conj()))),
        ("disc_garabedian", |z, w| one_over(2.0 * PI * (z - w))),
        ("disc_bergman", |z, w| one_over(PI * (c(1.0, 0.0) - z * w.conj()).powi(2))),
    ];
    for (id, exact) in forms {
        let res = (|| -> Result<f64> {
            let mut worst: f64 = 0.0;
            for (z, w) in &pairs {
                let got = match id {
                    "disc_szego" => bench.szego.szego(*z, *w)?,
                    "disc_garabedian" => bench.szego.solve(*w)?.l(*z)?,
                    _ => bench.potential.bergman(*z, *w)?,
                };
                let e = exact(*z, *w);
                worst = worst.max((got - e).norm() / e.norm());
            }
            Ok(worst)
        })();
        out.push(record_or_fail(id, &grid, res.map(|r| CheckRecord::at_most(id, &grid, r, CLOSED_FORM_TOLERANCE))));
    }
    let res = (|| -> Result<f64> {
        let f = bench.szego.solve(a)?.ahlfors()?;
        let mut worst: f64 = 0.0;
        for (z, _) in &pairs {
            let e = (z - a) / (one - a.conj() * z);
            worst = worst.max((f.eval(*z)? - e).norm());
        }
        Ok(worst)
    })();
    out.push(record_or_fail(
        "disc_ahlfors",
        &grid,
        res.map(|r| CheckRecord::at_most("disc_ahlfors", &grid, r, CLOSED_FORM_TOLERANCE)),
    ));
    out
}

fn one_over(z: Complex64) -> Complex64 {
    1.0 / z
}

/// Expansion fits, boundary identities, proper-map expansions and the Green
/// factorization for the generator set at `a`.
pub fn bergman_suite(bench: &Workbench<'_>, gs: &GeneratorSet<'_>) -> Vec<CheckRecord> {
    let grid = bench.grid_label();
    let mut out = Vec::new();
    match fit_expansions(bench, gs) {
        Ok(exp) => {
            out.extend(exp.records(&grid));
            out.extend(expansion_consistency_check(bench, gs, &exp, 20));
        }
        Err(e) => out.push(CheckRecord::failed("bergman_expansion_fit", &grid, &e)),
    }
    let ws = interior_probes(bench.domain, 2, 0.1, 17);
    out.extend(check_boundary_identities(bench, gs, &ws));
    out.extend(proper_map_expansion(bench, gs));
    out.push(green_factorization_check(bench, gs));
    out
}

/// Generator-set structure, Szegő kernel from generators, and the Bergman
/// kernel rebuilt from the generator set against the direct oracle.
pub fn reconstruct_suite(bench: &Workbench<'_>, gs: &GeneratorSet<'_>) -> Vec<CheckRecord> {
    let grid = bench.grid_label();
    let mut out = generator_structure_check(gs, &grid);
    out.extend(generator_szego_check(bench, gs));
    let res = (|| -> Result<Vec<CheckRecord>> {
        let exp = fit_expansions(bench, gs)?;
        let rec = reconstruct_bergman(gs, &exp)?;
        Ok(reconstruction_check(bench, &rec)?.records(&grid))
    })();
    match res {
        Ok(r) => out.extend(r),
        Err(e) => out.push(CheckRecord::failed("reconstruction", &grid, &e)),
    }
    out
}

/// Explicit biholomorphic self-maps of a test domain, as `(label, Φ, Φ')`.
type SelfMap = (&'static str, Box<dyn Fn(Complex64) -> Complex64>, Box<dyn Fn(Complex64) -> Complex64>);

fn self_maps(spec: &DomainSpec) -> Vec<SelfMap> {
    let mut maps: Vec<SelfMap> = Vec::new();
    match spec {
        DomainSpec::Ar { .. } => {
            maps.push(("inversion", Box::new(|z| 1.0 / z), Box::new(|z| -1.0 / (z * z))));
            maps.push(("rotation", Box::new(|z| -z), Box::new(|_| c(-1.0, 0.0))));
        }
        DomainSpec::Circles { centers, radii, .. } => {
            if is_unit_disc(spec) {
                let p = c(0.3, 0.2);
                let s = 1.0 - p.norm_sqr();
                maps.push((
                    "mobius",
                    Box::new(move |z| (z - p) / (1.0 - p.conj() * z)),
                    Box::new(move |z| s / (1.0 - p.conj() * z).powi(2)),
                ));
                return maps;
            }
            if centers.len() == 2 && centers.iter().all(|c| *c == [0.0, 0.0]) {
                let rr = radii[0] * radii[1];
                maps.push(("inversion", Box::new(move |z| rr / z), Box::new(move |z| -rr / (z * z))));
            }
            let symmetric = centers.iter().zip(radii).all(|(ci, ri)| {
                centers.iter().zip(radii).any(|(cj, rj)| cj[0] == -ci[0] && cj[1] == -ci[1] && rj == ri)
            });
            if symmetric {
                maps.push(("rotation", Box::new(|z| -z), Box::new(|_| c(-1.0, 0.0))));
            }
        }
    }
    maps
}

/// Transformation laws under the explicit self-maps of the domain and, on
/// `A(r)`, invariance of `I` under `1/z` and the rational symmetry `f(1/z) = f(z)`.
pub fn biholo_suite(spec: &DomainSpec, bench: &Workbench<'_>) -> Vec<CheckRecord> {
    let grid = bench.grid_label();
    let mut out = Vec::new();
    for (label, phi, dphi) in self_maps(spec) {
        match biholo_transport_check(bench, bench, &phi, &dphi, label, TRANSPORT_TOLERANCE) {
            Ok(r) => out.extend(r),
            Err(e) => out.push(CheckRecord::failed(format!("transport_{label}"), &grid, &e)),
        }
    }
    if let DomainSpec::Ar { r, .. } = spec {
        out.push(ar_invariant_check(bench, *r));
        out.push(ar_rational_symmetry(bench.domain, *r, &grid));
    }
    out
}

/// `max |I(z,w) − I(1/z,1/w)| / max |I|` over interior pairs of `A(r)`.
fn ar_invariant_check(bench: &Workbench<'_>, r: f64) -> CheckRecord {
    let grid = bench.grid_label();
    let f = ArMap { r };
    let d = bench.domain;
    let ok = |p: Complex64| d.is_admissible(1.0 / p, PROBE_CLEARANCE) && (p * p - 1.0).norm() > 0.1;
    let pairs: Vec<_> =
        probe_pairs(d, 200, PROBE_CLEARANCE, 0.05, 31).into_iter().filter(|(z, w)| ok(*z) && ok(*w)).take(40).collect();
    let res = (|| -> Result<f64> {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (z, w) in &pairs {
            let a = invariant_i(&bench.potential, &f, *z, *w)?;
            let b = invariant_i(&bench.potential, &f, 1.0 / z, 1.0 / w)?;
            worst = worst.max((a - b).norm());
            scale = scale.max(a.norm());
        }
        Ok(worst / scale)
    })();
    record_or_fail(
        "ar_invariant_inversion",
        &grid,
        res.map(|v| CheckRecord::at_most("ar_invariant_inversion", &grid, v, TRANSPORT_TOLERANCE)),
    )
}

/// `1/z` maps probes of `A(r)` into `A(r)` and preserves `f` exactly.
fn ar_rational_symmetry(d: &Domain, r: f64, grid: &str) -> CheckRecord {
    let f = ArMap { r };
    let mut worst: f64 = 0.0;
    let mut inside = true;
    for z in interior_probes(d, 100, PROBE_CLEARANCE, 32) {
        inside &= d.contains(1.0 / z).unwrap_or(false);
        let (a, b) = (crate::algebra::ProperMap::value(&f, z), crate::algebra::ProperMap::value(&f, 1.0 / z));
        if let (Ok(a), Ok(b)) = (a, b) {
            worst = worst.max((a - b).norm());
        }
    }
    let mut rec = CheckRecord::at_most("ar_inversion_rational", grid, worst, 1e-14);
    if !inside {
        rec.pass = false;
        rec.note = Some("1/z left the domain".into());
    }
    rec
}

/// Builds the domain and runs the selected suites. Errors building the
/// domain are returned; failures inside a suite become failed records.
pub fn run_suite(spec: &DomainSpec, suite: Suite) -> Result<RunReport> {
    let domain = spec.build()?;
    let bench = Workbench::new(&domain)?;
    let grid = bench.grid_label();
    let mut report = RunReport::new(spec);
    let needs_base = suite != Suite::Biholo;
    let a = if needs_base {
        match base_point(&bench) {
            Ok(a) => Some(a),
            Err(e) => {
                report.push(CheckRecord::failed("base_point", &grid, &e))?;
                None
            }
        }
    } else {
        None
    };
    if let Some(a) = a {
        if suite.includes(Suite::Szego) {
            report.extend(szego_suite(spec, &bench, a))?;
        }
        if suite.includes(Suite::Bergman) || suite.includes(Suite::Reconstruct) {
            match build_generator_set(&bench, a) {
                Ok(gs) => {
                    if suite.includes(Suite::Bergman) {
                        report.extend(bergman_suite(&bench, &gs))?;
                    }
                    if suite.includes(Suite::Reconstruct) {
                        report.extend(reconstruct_suite(&bench, &gs))?;
                    }
                }
                Err(e) => report.push(CheckRecord::failed("generator_set", &grid, &e))?,
            }
        }
    }
    if suite.includes(Suite::Biholo) {
        report.extend(biholo_suite(spec, &bench))?;
    }
    Ok(report)
}

/// Parses `"x"`, `"x+yi"`, `"x-yi"`, `"yi"` or `"x y"` forms of a complex number.
pub fn parse_complex(text: &str) -> Result<Complex64> {
    let t: String = text.trim().chars().filter(|c| !c.is_whitespace() || *c == ' ').collect();
    let bad = || Error::Invalid(format!("cannot parse complex number {text:?}"));
    if let Some((re, im)) = t.split_once(' ') {
        return Ok(c(re.trim().parse().map_err(|_| bad())?, im.trim().parse().map_err(|_| bad())?));
    }
    if let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) {
        // Split at the last sign that is not an exponent sign or the leading sign.
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
        let (re, im) = match split {
            Some(k) => (&body[..k], &body[k..]),
            None => ("0", body),
        };
        let im = match im {
            "" | "+" => "1",
            "-" => "-1",
            s => s,
        };
        return Ok(c(re.parse().map_err(|_| bad())?, im.trim_start_matches('+').parse().map_err(|_| bad())?));
    }
    Ok(c(t.parse().map_err(|_| bad())?, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_parsing() {
        assert_eq!(parse_complex("0.5").unwrap(), c(0.5, 0.0));
        assert_eq!(parse_complex("0.5+0.25i").unwrap(), c(0.5, 0.25));
        assert_eq!(parse_complex("-1e-3-2i").unwrap(), c(-1e-3, -2.0));
        assert_eq!(parse_complex("-i").unwrap(), c(0.0, -1.0));
        assert_eq!(parse_complex("2.5e+1i").unwrap(), c(0.0, 25.0));
        assert_eq!(parse_complex("0.1 0.2").unwrap(), c(0.1, 0.2));
        assert!(parse_complex("abc").is_err());
    }

    #[test]
    fn disc_suite_passes() {
        let spec = DomainSpec::unit_disc(128);
        let report = run_suite(&spec, Suite::All).unwrap();
        for r in &report.checks {
            assert!(r.pass, "{r:?}");
        }
        assert!(report.checks.len() >= 15);
    }
}
