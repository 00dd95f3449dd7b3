//! Text, CSV and SVG renderings of model results.

use std::fmt::Write;

use phxmem_core::array::ArrayRow;
use phxmem_core::cell::{CellDesign, ContrastResult, Transmission};
use phxmem_core::dse::{DesignPoint, SelectionRule};
use phxmem_core::materials::{CrystallizationFraction, MaterialRecord};
use phxmem_core::thermal::{HeaterPulse, LatencyPoint, ThermalResult, ThermalStack};
use phxmem_core::Result;

use crate::svg::{heatmap, line_charts, Heatmap, LineChart, Series};

pub fn cell_report(
    design: &CellDesign,
    c: &ContrastResult,
    capacity: u32,
    bits: u32,
    levels: &[(u64, CrystallizationFraction)],
) -> String {
    let xs = &design.cross_section;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "cell {}: width {} nm, thickness {} nm, length {} um, {} nm",
        design.material, xs.wg_width_nm, xs.pcm_thickness_nm, design.length_um, design.wavelength_nm
    );
    let _ = writeln!(
        out,
        "insertion loss   {:.4} dB/um (amorphous)",
        c.insertion_loss_db_per_um
    );
    let _ = writeln!(out, "delta_T          {:.4}", c.delta_t);
    let _ = writeln!(out, "delta_P          {:.4}", c.delta_p);
    let _ = writeln!(out, "state            T        R        A");
    let _ = writeln!(
        out,
        "  amorphous      {:.4}   {:.4}   {:.4}",
        c.t_amorphous, c.r_amorphous, c.a_amorphous
    );
    let _ = writeln!(
        out,
        "  crystalline    {:.4}   {:.4}   {:.4}",
        c.t_crystalline, c.r_crystalline, c.a_crystalline
    );
    let _ = writeln!(out, "bit capacity     {capacity} (margin {})", design.margin);
    if c.flagged() {
        let _ = writeln!(out, "note: contrast is carried by facet reflection, not absorption");
    }
    if !levels.is_empty() {
        let _ = writeln!(out, "levels for {bits} bit(s):");
        let _ = writeln!(out, "  level  bits{}  p", " ".repeat(bits.saturating_sub(4) as usize));
        for (level, p) in levels {
            let _ = writeln!(
                out,
                "  {level:>5}  {level:0width$b}  {:.4}",
                p.value(),
                width = bits.max(4) as usize
            );
        }
    }
    out
}

pub fn transmission_curve_csv(curve: &[(f64, Transmission)]) -> String {
    let mut out = String::from("p,T,R,A\n");
    for (p, t) in curve {
        let _ = writeln!(out, "{p:.4},{:.8},{:.8},{:.8}", t.t, t.r, t.a);
    }
    out
}

pub fn thermal_report(stack: &ThermalStack, pulse: &HeaterPulse, r: &ThermalResult, pcm: &MaterialRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} stack, {} nm film on {} nm waveguide; pulse {} mW x {} us = {:.3} nJ",
        stack.pcm_material,
        stack.cross_section.pcm_thickness_nm,
        stack.cross_section.wg_width_nm,
        pulse.power_mw,
        pulse.duration_us,
        pulse.energy_nj()
    );
    let pcm_max = r.pcm_peak_k.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pcm_min = r.pcm_peak_k.iter().cloned().fold(f64::INFINITY, f64::min);
    let _ = writeln!(out, "PCM peak         {pcm_min:.1} .. {pcm_max:.1} K");
    let _ = writeln!(
        out,
        "heater peak      {:.1} K (limit {} K)",
        r.heater_peak_k, stack.heater.melt_limit_k
    );
    if let (Some(tg), Some(tl)) = (pcm.t_g_k, pcm.t_l_k) {
        let _ = writeln!(out, "above T_g {tg:>5} K {:.4}", r.fraction_above_tg);
        let _ = writeln!(out, "above T_l {tl:>5} K {:.4}", r.fraction_above_tl);
    }
    let _ = writeln!(out, "heater safe      {}", if r.heater_safe { "yes" } else { "NO" });
    out
}

pub const LATENCY_CSV_HEADER: &str = "power_mW,duration_us,energy_nJ,fraction,note";

pub fn latency_csv(curve: &[LatencyPoint]) -> String {
    let mut out = format!("{LATENCY_CSV_HEADER}\n");
    for p in curve {
        match &p.set {
            Some(s) => {
                let _ = writeln!(
                    out,
                    "{},{},{:.4},{:.4},",
                    p.power_mw, s.duration_us, s.energy_nj, s.fraction
                );
            }
            None => {
                let note = p.note.as_deref().unwrap_or("").replace(',', ";");
                let _ = writeln!(out, "{},,,,{note}", p.power_mw);
            }
        }
    }
    out
}

pub fn array_svg(rows: &[ArrayRow]) -> String {
    let cells = |r: &ArrayRow| r.m as f64 * r.n as f64;
    line_charts(&[
        LineChart {
            title: "Laser power budget".into(),
            x_label: "cells (M x N)".into(),
            y_label: "P_lsr (dBm)".into(),
            series: vec![Series {
                label: "P_lsr".into(),
                points: rows.iter().map(|r| (cells(r), r.p_lsr_dbm)).collect(),
            }],
        },
        LineChart {
            title: "Maximum write energy".into(),
            x_label: "cells (M x N)".into(),
            y_label: "total set energy (uJ)".into(),
            series: vec![Series {
                label: "energy".into(),
                points: rows.iter().map(|r| (cells(r), r.total_set_energy_uj)).collect(),
            }],
        },
    ])
}

/// Loss and ΔT maps over thickness × width, one pair per material, at the
/// shortest length.
pub fn sweep_heatmaps(points: &[DesignPoint]) -> Vec<(String, String)> {
    let mut materials: Vec<&str> = points.iter().map(|p| p.key.material.as_str()).collect();
    materials.dedup();
    let mut out = Vec::new();
    for material in materials {
        let mine: Vec<&DesignPoint> = points.iter().filter(|p| p.key.material == material).collect();
        let length = mine.iter().map(|p| p.key.length_um).fold(f64::INFINITY, f64::min);
        let mine: Vec<&DesignPoint> = mine.into_iter().filter(|p| p.key.length_um == length).collect();
        let mut xs: Vec<f64> = mine.iter().map(|p| p.key.width_nm).collect();
        let mut ys: Vec<f64> = mine.iter().map(|p| p.key.thickness_nm).collect();
        for v in [&mut xs, &mut ys] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        let grid = |f: &dyn Fn(&DesignPoint) -> Option<f64>| -> Vec<Option<f64>> {
            ys.iter()
                .flat_map(|y| {
                    xs.iter().map(|x| {
                        mine.iter()
                            .find(|p| p.key.thickness_nm == *y && p.key.width_nm == *x)
                            .and_then(|p| f(p))
                    })
                })
                .collect()
        };
        for (file, title, unit, values) in [
            (
                "loss",
                "amorphous insertion loss",
                "loss (dB/um)",
                grid(&|p| p.metrics.map(|m| m.insertion_loss_db_per_um)),
            ),
            (
                "delta_t",
                "transmission contrast",
                "delta_T",
                grid(&|p| p.metrics.map(|m| m.delta_t)),
            ),
        ] {
            out.push((
                format!("{file}_{material}.svg"),
                heatmap(&Heatmap {
                    title: format!("{material} {title}"),
                    x_label: "waveguide width (nm)".into(),
                    y_label: "PCM thickness (nm)".into(),
                    colorbar_label: unit.into(),
                    xs: xs.clone(),
                    ys: ys.clone(),
                    values,
                }),
            ));
        }
    }
    out
}

pub fn selection_text(rule: SelectionRule, selected: &Result<DesignPoint>) -> String {
    let mut out = format!("rule: {rule}\n");
    match selected {
        Ok(p) => {
            let k = &p.key;
            let _ = writeln!(out, "material: {}", k.material);
            let _ = writeln!(out, "thickness_nm: {}", k.thickness_nm);
            let _ = writeln!(out, "width_nm: {}", k.width_nm);
            let _ = writeln!(out, "length_um: {}", k.length_um);
            if let Some(m) = &p.metrics {
                let _ = writeln!(out, "insertion_loss_db_per_um: {}", m.insertion_loss_db_per_um);
                let _ = writeln!(out, "delta_t: {}", m.delta_t);
                let _ = writeln!(out, "delta_p: {}", m.delta_p);
                let _ = writeln!(out, "bits: {}", m.bits);
                if let Some(e) = m.max_set_energy_nj {
                    let _ = writeln!(out, "max_set_energy_nj: {e}");
                }
                let _ = writeln!(out, "footprint_um2: {}", m.footprint_um2);
            }
        }
        Err(e) => {
            let _ = writeln!(out, "no selection: {e}");
        }
    }
    out
}
