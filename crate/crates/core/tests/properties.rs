use std::f64::consts::PI;
use std::sync::OnceLock;

use kernelsmith::identities::Workbench;
use kernelsmith::suites::parse_complex;
use kernelsmith::{Complex64, Domain, DomainSpec};
use proptest::prelude::*;

fn disc() -> &'static Workbench<'static> {
    static DOMAIN: OnceLock<Domain> = OnceLock::new();
    static BENCH: OnceLock<Workbench<'static>> = OnceLock::new();
    BENCH.get_or_init(|| Workbench::new(DOMAIN.get_or_init(|| DomainSpec::unit_disc(256).build().unwrap())).unwrap())
}

fn annulus() -> &'static Workbench<'static> {
    static DOMAIN: OnceLock<Domain> = OnceLock::new();
    static BENCH: OnceLock<Workbench<'static>> = OnceLock::new();
    BENCH.get_or_init(|| Workbench::new(DOMAIN.get_or_init(|| DomainSpec::annulus(0.5, 256).build().unwrap())).unwrap())
}

fn polar(r: f64, t: f64) -> Complex64 {
    Complex64::from_polar(r, t)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn disc_szego_closed_form(r1 in 0.0..0.85f64, t1 in 0.0..2.0 * PI, r2 in 0.0..0.85f64, t2 in 0.0..2.0 * PI) {
        let (z, w) = (polar(r1, t1), polar(r2, t2));
        let s = disc().szego.szego(z, w).unwrap();
        let exact = 1.0 / (2.0 * PI * (1.0 - z * w.conj()));
        prop_assert!((s - exact).norm() <= 1e-8 * exact.norm());
    }

    #[test]
    fn annulus_kernels_are_hermitian(r1 in 0.65..0.85f64, t1 in 0.0..2.0 * PI, r2 in 0.65..0.85f64, t2 in 0.0..2.0 * PI) {
        let (z, w) = (polar(r1, t1), polar(r2, t2));
        let b = annulus();
        let k = b.potential.bergman(z, w).unwrap();
        let k_swap = b.potential.bergman(w, z).unwrap();
        prop_assert!((k - k_swap.conj()).norm() <= 1e-9 * k.norm().max(1.0));
        let s = b.szego.szego(z, w).unwrap();
        let s_swap = b.szego.szego(w, z).unwrap();
        prop_assert!((s - s_swap.conj()).norm() <= 1e-9 * s.norm().max(1.0));
    }

    #[test]
    fn annulus_green_is_symmetric_and_positive(r1 in 0.65..0.85f64, t1 in 0.0..2.0 * PI, r2 in 0.65..0.85f64, t2 in 0.0..2.0 * PI) {
        let (z, w) = (polar(r1, t1), polar(r2, t2));
        prop_assume!((z - w).norm() > 0.05);
        let b = annulus();
        let g = b.potential.green(z, w).unwrap();
        let g_swap = b.potential.green(w, z).unwrap();
        prop_assert!(g > 0.0);
        prop_assert!((g - g_swap).abs() <= 1e-9 * g.abs().max(1.0));
    }

    #[test]
    fn ahlfors_maps_into_the_disc(r in 0.65..0.85f64, t in 0.0..2.0 * PI) {
        let b = annulus();
        let f = b.szego.solve(Complex64::new(0.0, 0.75)).unwrap().ahlfors().unwrap();
        prop_assert!(f.eval(polar(r, t)).unwrap().norm() < 1.0);
    }

    #[test]
    fn complex_text_round_trip(re in -1e3..1e3f64, im in -1e3..1e3f64) {
        let text = format!("{re:e}{:+e}i", im);
        let z = parse_complex(&text).unwrap();
        prop_assert_eq!(z, Complex64::new(re, im));
    }
}
