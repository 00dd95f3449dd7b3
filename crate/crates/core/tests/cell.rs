use std::sync::OnceLock;

use phxmem_core::cell::{bit_capacity, level_count, CellDesign, CellModel, FRACTION_TOLERANCE};
use phxmem_core::materials::{CrystallizationFraction, MaterialDb};
use phxmem_core::modesolver::CrossSection;
use phxmem_core::Error;
use proptest::prelude::*;

fn db() -> &'static MaterialDb {
    static DB: OnceLock<MaterialDb> = OnceLock::new();
    DB.get_or_init(MaterialDb::builtin)
}

fn gst() -> &'static CellModel<'static> {
    static M: OnceLock<CellModel<'static>> = OnceLock::new();
    M.get_or_init(|| CellModel::new(db(), CellDesign::new("GST", CrossSection::new(470.0, 20.0))).unwrap())
}

fn gsst() -> &'static CellModel<'static> {
    static M: OnceLock<CellModel<'static>> = OnceLock::new();
    M.get_or_init(|| CellModel::new(db(), CellDesign::new("GSST", CrossSection::new(470.0, 40.0))).unwrap())
}

fn frac(p: f64) -> CrystallizationFraction {
    CrystallizationFraction::new(p).unwrap()
}

#[test]
fn capacity_examples() {
    assert_eq!((level_count(0.96, 0.015), bit_capacity(0.96, 0.015)), (64, 6));
    assert_eq!(bit_capacity(0.0, 0.3), 0);
    assert_eq!((level_count(0.30, 0.015), bit_capacity(0.30, 0.015)), (20, 4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn capacity_is_monotone(dt in 0.0f64..=1.0, bump in 0.0f64..0.5, margin in 0.001f64..0.5, widen in 1.0f64..3.0) {
        prop_assert!(bit_capacity((dt + bump).min(1.0), margin) >= bit_capacity(dt, margin));
        prop_assert!(bit_capacity(dt, margin * widen) <= bit_capacity(dt, margin));
    }
}

#[test]
fn energy_is_conserved_along_the_curve() {
    for model in [gst(), gsst()] {
        for (p, s) in model.transmission_curve(101).unwrap() {
            assert!((s.t + s.r + s.a - 1.0).abs() <= 1e-9, "p = {p}: {s:?}");
            for v in [s.t, s.r, s.a] {
                assert!((0.0..=1.0).contains(&v), "p = {p}: {s:?}");
            }
        }
    }
}

#[test]
fn transmission_never_rises_with_crystallization() {
    for model in [gst(), gsst()] {
        let curve = model.transmission_curve(101).unwrap();
        for w in curve.windows(2) {
            assert!(w[1].1.t <= w[0].1.t + 1e-12, "{} -> {}", w[0].0, w[1].0);
        }
    }
}

#[test]
fn interpolated_curve_tracks_direct_solves() {
    let model = gst();
    for p in [0.23, 0.61] {
        let direct = model.transmission(frac(p)).unwrap();
        let fast = model.transmission_fast(frac(p)).unwrap();
        assert!((direct.t - fast.t).abs() < 1e-4, "p = {p}: {} vs {}", direct.t, fast.t);
    }
}

#[test]
fn reference_gst_cell_contrast() {
    let c = gst().contrast().unwrap();
    assert!(c.delta_t >= 0.7 && c.delta_p >= 0.7, "{c:?}");
    assert!((c.delta_t - c.delta_p).abs() <= 0.15, "{c:?}");
    assert!(!c.flagged());
}

#[test]
fn gsst_contrast_is_close_to_gst() {
    let a = gst().contrast().unwrap().delta_t;
    let b = gsst().contrast().unwrap().delta_t;
    assert!((b - a).abs() <= 0.2 * a, "GST {a}, GSST {b}");
}

#[test]
fn level_fractions_match_grid_scan() {
    let model = gst();
    let bits = model.bit_capacity().unwrap();
    let margin = model.design().margin;
    let t0 = model.transmission_fast(CrystallizationFraction::AMORPHOUS).unwrap().t;
    const N: usize = 10_000;
    let drops: Vec<f64> = (0..=N)
        .map(|i| t0 - model.transmission_fast(frac(i as f64 / N as f64)).unwrap().t)
        .collect();
    let table = model.level_table(bits).unwrap();
    assert_eq!(table[0].1.value(), 0.0);
    let mut prev = 0.0;
    for (level, p) in table {
        let target = level as f64 * margin;
        let oracle = drops.iter().position(|d| *d >= target).unwrap() as f64 / N as f64;
        let p = p.value();
        assert!(
            (p - oracle).abs() <= FRACTION_TOLERANCE + 1.0 / N as f64,
            "level {level}: {p} vs scan {oracle}"
        );
        assert!(p >= prev);
        prev = p;
        // The threshold is met at p and missed one tolerance below it.
        let at = t0 - model.transmission_fast(frac(p)).unwrap().t;
        assert!(at >= target - 1e-12);
        if level > 0 {
            let below = t0
                - model
                    .transmission_fast(frac((p - FRACTION_TOLERANCE).max(0.0)))
                    .unwrap()
                    .t;
            assert!(below < target);
        }
    }
}

#[test]
fn two_bit_top_level_needs_about_a_fifth() {
    let p = gst().required_fraction(3, 2).unwrap().value();
    assert!((p - 0.2).abs() <= 0.1, "{p}");
}

#[test]
fn too_many_bits_is_a_capacity_error() {
    let bits = gst().bit_capacity().unwrap();
    let err = gst().required_fraction(1, bits + 1).unwrap_err();
    assert!(matches!(err, Error::Capacity(_)), "{err}");
    assert!(gst().required_fraction(4, 2).is_err());
}

#[test]
fn bare_waveguide_has_no_contrast() {
    let model = CellModel::new(db(), CellDesign::new("GST", CrossSection::new(470.0, 0.0))).unwrap();
    let c = model.contrast().unwrap();
    assert!((c.t_amorphous - 1.0).abs() <= 1e-9);
    assert!(c.delta_t.abs() <= 1e-12 && c.delta_p.abs() <= 1e-12);
}

#[test]
fn lossless_pcm_contrast_comes_from_reflection_only() {
    let model = CellModel::new(db(), CellDesign::new("Sb2Se3", CrossSection::new(470.0, 20.0))).unwrap();
    let c = model.contrast().unwrap();
    assert!(c.delta_p.abs() <= 0.01, "{c:?}");
    assert!(c.delta_t > 0.0, "{c:?}");
    assert!(c.a_amorphous.abs() < 1e-9 && c.a_crystalline.abs() < 1e-9);
}

#[test]
fn upstream_errors_carry_cell_context() {
    let mut design = CellDesign::new("GST", CrossSection::new(470.0, 20.0));
    design.cross_section.window_width_um = 1.5;
    let err = match CellModel::new(db(), design) {
        Ok(m) => m.contrast().unwrap_err(),
        Err(e) => e,
    };
    assert!(err.is_config());
    assert!(err.to_string().contains("GST"), "{err}");
}
