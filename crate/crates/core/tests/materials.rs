mod common;

use common::{nk, oracle_mix};
use num_complex::Complex64;
use phxmem_core::materials::{absorption_db_per_um, CrystallizationFraction, MaterialDb, Phase};
use proptest::prelude::*;

const PCMS: [&str; 3] = ["GST", "GSST", "Sb2Se3"];

#[test]
fn half_crystallized_matches_oracle() {
    let db = MaterialDb::builtin();
    for name in PCMS {
        let m = db.get(name).unwrap();
        let a = m.lookup_nk(Phase::Amorphous, 1550.0).unwrap();
        let c = m.lookup_nk(Phase::Crystalline, 1550.0).unwrap();
        let got = m
            .effective_index(CrystallizationFraction::new(0.5).unwrap(), 1550.0)
            .unwrap();
        let (re, im) = oracle_mix(nk(a), nk(c), 0.5);
        let want = Complex64::new(re, im);
        assert!((got - want).norm() <= 1e-12 * want.norm(), "{name}: {got} vs {want}");
    }
}

#[test]
#[allow(clippy::excessive_precision)]
fn half_crystallized_matches_high_precision_values() {
    // 40-digit root of the mixing equation for the shipped 1550 nm samples.
    let frozen = [
        ("GST", 4.7392875495431883176, -0.23791742246996120446),
        ("GSST", 3.9775835849181467407, -0.091176662833854749729),
        ("Sb2Se3", 3.6183105363947029879, 0.0),
    ];
    let db = MaterialDb::builtin();
    for (name, re, im) in frozen {
        let got = db
            .get(name)
            .unwrap()
            .effective_index(CrystallizationFraction::new(0.5).unwrap(), 1550.0)
            .unwrap();
        let want = Complex64::new(re, im);
        assert!((got - want).norm() <= 1e-12 * want.norm(), "{name}: {got} vs {want}");
    }
}

#[test]
fn endpoints_are_exact() {
    let db = MaterialDb::builtin();
    for name in PCMS {
        let m = db.get(name).unwrap();
        for wl in [1500.0, 1537.3, 1550.0, 1600.0] {
            let a = m.lookup_nk(Phase::Amorphous, wl).unwrap();
            let c = m.lookup_nk(Phase::Crystalline, wl).unwrap();
            assert_eq!(m.effective_index(CrystallizationFraction::AMORPHOUS, wl).unwrap(), a);
            assert_eq!(m.effective_index(CrystallizationFraction::CRYSTALLINE, wl).unwrap(), c);
        }
    }
}

#[test]
fn absorption_hand_value() {
    // 40π·0.01 / (1.55·ln 10) = 1.2566370614 / 3.5690068941 = 0.3520971236
    let v = absorption_db_per_um(0.01, 1550.0).unwrap();
    assert!((v - 0.352_097_123_6).abs() < 1e-9, "{v}");
    assert_eq!(absorption_db_per_um(0.0, 1550.0).unwrap(), 0.0);
    assert!(absorption_db_per_um(-1e-3, 1550.0).is_err());
}

#[test]
fn gst_has_the_largest_index_contrast() {
    let db = MaterialDb::builtin();
    let contrast = |name: &str| {
        let m = db.get(name).unwrap();
        m.lookup_nk(Phase::Crystalline, 1550.0).unwrap().re - m.lookup_nk(Phase::Amorphous, 1550.0).unwrap().re
    };
    assert!(contrast("GST") > contrast("GSST"));
    assert!(contrast("GST") > contrast("Sb2Se3"));
}

#[test]
fn wavelength_outside_table_names_the_span() {
    let db = MaterialDb::builtin();
    let err = db.get("GST").unwrap().lookup_nk(Phase::Amorphous, 1200.0).unwrap_err();
    let text = err.to_string();
    assert!(text.contains("GST") && text.contains("1200"), "{text}");
}

proptest! {
    #[test]
    fn mixing_is_continuous(p in 0.0f64..0.999_999, wl in 1500.0f64..1600.0, which in 0usize..3) {
        let db = MaterialDb::builtin();
        let m = db.get(PCMS[which]).unwrap();
        let a = m.effective_index(CrystallizationFraction::new(p).unwrap(), wl).unwrap();
        let b = m.effective_index(CrystallizationFraction::new(p + 1e-6).unwrap(), wl).unwrap();
        prop_assert!((a.re - b.re).abs() <= 1e-4);
        prop_assert!((a.im - b.im).abs() <= 1e-4);
    }

    #[test]
    fn mixing_never_produces_gain(p in 0.0f64..=1.0, wl in 1500.0f64..1600.0, which in 0usize..3) {
        let db = MaterialDb::builtin();
        let m = db.get(PCMS[which]).unwrap();
        let n = m.effective_index(CrystallizationFraction::new(p).unwrap(), wl).unwrap();
        prop_assert!(-n.im >= -1e-12);
    }

    #[test]
    fn absorption_is_linear(kappa in 0.0f64..5.0, wl in 400.0f64..3000.0) {
        let one = absorption_db_per_um(kappa, wl).unwrap();
        let two = absorption_db_per_um(2.0 * kappa, wl).unwrap();
        prop_assert!((two - 2.0 * one).abs() <= 1e-12 * two.max(1.0));
    }
}
