//! Subcommand implementations behind the `phxmem` binary.
//!
//! Each command returns the text it would print; files are written as a side
//! effect. Exit codes: 0 success, 1 I/O failure, 2 configuration error,
//! 3 model or solver error.

pub mod config;
pub mod report;
pub mod svg;

use std::fmt::Write;
use std::path::{Path, PathBuf};

use phxmem_core::array::{array_csv, laser_power_dbm, size_sweep, wavelength_plan};
use phxmem_core::cell::CellModel;
use phxmem_core::dse::{pareto_front, run_sweep, select_design, RunDir, SelectionRule, SweepOptions};
use phxmem_core::materials::{CrystallizationFraction, MaterialDb, Phase};
use phxmem_core::modesolver::{build_index_map, insertion_loss_db_per_um, solve_fundamental_mode};
use phxmem_core::thermal::{simulate_pulse, trace_csv, HeaterPulse, ThermalModel};
use phxmem_core::{Error, Result};

use config::{RunConfig, MATERIALS_ENV};

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 1,
        e if e.is_config() => 2,
        Error::Context { source, .. } => exit_code(source),
        _ => 3,
    }
}

/// Loaded material database plus the text it came from.
pub struct Materials {
    pub db: MaterialDb,
    pub source: String,
    pub origin: String,
}

/// Flag, then config, then `PHXMEM_MATERIALS`, then the built-in table.
pub fn load_materials(flag: Option<&Path>, config: &RunConfig) -> Result<Materials> {
    let env = std::env::var_os(MATERIALS_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from);
    let path = flag.map(Path::to_path_buf).or_else(|| config.materials.clone()).or(env);
    match path {
        Some(path) => {
            let source = std::fs::read_to_string(&path)
                .map_err(|e| Error::config("materials", format!("cannot read `{}`: {e}", path.display())))?;
            Ok(Materials {
                db: MaterialDb::from_json(&source)?,
                source,
                origin: path.display().to_string(),
            })
        }
        None => Ok(Materials {
            db: MaterialDb::builtin(),
            source: phxmem_core::materials::BUILTIN_MATERIALS_JSON.to_string(),
            origin: "built-in".into(),
        }),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

/// `a`, `c`, or `p=<fraction>`.
pub fn parse_phase(text: &str) -> Result<CrystallizationFraction> {
    match text.trim() {
        "a" | "amorphous" => Ok(CrystallizationFraction::AMORPHOUS),
        "c" | "crystalline" => Ok(CrystallizationFraction::CRYSTALLINE),
        other => {
            let value = other
                .strip_prefix("p=")
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::config("phase", format!("expected a, c or p=<fraction>, got `{other}`")))?;
            CrystallizationFraction::new(value).map_err(|e| Error::config("phase", e.to_string()))
        }
    }
}

/// `N=M` pairs separated by commas, e.g. `5=5,10=10`.
pub fn parse_sizes(text: &str) -> Result<Vec<(u32, u32)>> {
    let sizes = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (n, m) = item
                .split_once('=')
                .ok_or_else(|| Error::config("size", format!("expected N=M, got `{item}`")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::config("size", format!("`{s}` is not a positive integer")))
            };
            Ok((parse(m)?, parse(n)?))
        })
        .collect::<Result<Vec<_>>>()?;
    if sizes.is_empty() {
        return Err(Error::config("size", "no array sizes given"));
    }
    Ok(sizes)
}

pub fn cmd_materials(mats: &Materials, name: Option<&str>, wavelength_nm: f64) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# materials: {} (version {})",
        mats.origin,
        mats.db.version().unwrap_or("unversioned")
    );
    let records: Vec<_> = match name {
        Some(n) => vec![mats.db.get(n)?],
        None => mats.db.records().iter().collect(),
    };
    let _ = writeln!(out, "name,phase,wavelength_nm,n,kappa,loss_db_per_um,T_g_K,T_l_K");
    for r in records {
        let phases: &[Phase] = if r.is_pcm() {
            &[Phase::Amorphous, Phase::Crystalline]
        } else {
            &[Phase::Amorphous]
        };
        for &phase in phases {
            let nk = r.lookup_nk(phase, wavelength_nm)?;
            let kappa = -nk.im;
            let label = if r.is_pcm() { phase.to_string() } else { "static".into() };
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6},{},{}",
                r.name,
                label,
                wavelength_nm,
                nk.re,
                kappa,
                phxmem_core::materials::absorption_db_per_um(kappa.max(0.0), wavelength_nm)?,
                r.t_g_k.map(|t| t.to_string()).unwrap_or_default(),
                r.t_l_k.map(|t| t.to_string()).unwrap_or_default(),
            );
        }
    }
    Ok(out)
}

pub fn cmd_mode(
    mats: &Materials,
    config: &RunConfig,
    material: &str,
    phase: CrystallizationFraction,
    wavelength_nm: f64,
    dump_field: Option<&Path>,
) -> Result<String> {
    let map = build_index_map(&mats.db, &config.geometry, material, wavelength_nm, phase)?;
    let mode = solve_fundamental_mode(&map, wavelength_nm)?;
    let loss = insertion_loss_db_per_um(&mode, wavelength_nm)?;
    if let Some(path) = dump_field {
        write_file(path, &mode.field_csv())?;
    }
    let mut out = String::new();
    let g = &config.geometry;
    let _ = writeln!(
        out,
        "material {material}, p = {}, width {} nm, thickness {} nm, wavelength {wavelength_nm} nm",
        phase.value(),
        g.wg_width_nm,
        g.pcm_thickness_nm
    );
    let _ = writeln!(out, "polarization   {}", mode.polarization);
    let _ = writeln!(out, "n_eff          {:.6} - {:.6e}i", mode.n_eff.re, -mode.n_eff.im);
    let _ = writeln!(out, "loss           {loss:.6} dB/um");
    let _ = writeln!(
        out,
        "grid           {} x {} at {} nm",
        mode.grid.nx, mode.grid.ny, mode.grid.pitch_nm
    );
    let _ = writeln!(out, "residual       {:.2e} ({} solves)", mode.residual, mode.solves);
    Ok(out)
}

pub fn cmd_cell(mats: &Materials, config: &RunConfig, bits: Option<u32>, csv: Option<&Path>) -> Result<String> {
    let model = CellModel::new(&mats.db, config.cell_design())?;
    let contrast = model.contrast()?;
    let capacity = model.bit_capacity()?;
    let bits = bits.unwrap_or(capacity);
    let levels = if bits == 0 {
        Vec::new()
    } else {
        model.level_table(bits)?
    };
    if let Some(path) = csv {
        write_file(path, &report::transmission_curve_csv(&model.transmission_curve(101)?))?;
    }
    Ok(report::cell_report(model.design(), &contrast, capacity, bits, &levels))
}

#[derive(Debug, Clone, Default)]
pub struct ThermalArgs {
    pub power_mw: f64,
    pub duration_us: f64,
    pub trace: Option<PathBuf>,
    /// Emit the power-latency CSV for this target fraction.
    pub set_curve: bool,
    pub target_p: f64,
    pub powers_mw: Vec<f64>,
    pub set_curve_out: Option<PathBuf>,
}

pub fn cmd_thermal(mats: &Materials, config: &RunConfig, args: &ThermalArgs) -> Result<String> {
    let stack = config.thermal_stack();
    let pulse = HeaterPulse::new(args.power_mw, args.duration_us)?;
    let t_end = (3.0 * args.duration_us).max(args.duration_us + 2.0);
    let result = simulate_pulse(&mats.db, &stack, &pulse, stack.dt_ns, t_end)?;
    if let Some(path) = &args.trace {
        write_file(path, &trace_csv(&result.trace))?;
    }
    let pcm = mats.db.get(&stack.pcm_material)?;
    let mut out = report::thermal_report(&stack, &pulse, &result, pcm);
    if args.set_curve {
        let model = ThermalModel::new(&mats.db, &stack)?;
        let curve = model.power_latency_curve(args.target_p, &args.powers_mw)?;
        let csv = report::latency_csv(&curve);
        match &args.set_curve_out {
            Some(path) => {
                write_file(path, &csv)?;
                let _ = writeln!(out, "power-latency curve written to {}", path.display());
            }
            None => {
                out.push('\n');
                out.push_str(&csv);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct ArrayArgs {
    pub sizes: Option<Vec<(u32, u32)>>,
    pub per_cell_energy_nj: f64,
    /// Take cell loss and bits from the configured cell.
    pub from_cell: bool,
    pub plot: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

pub fn cmd_array(mats: &Materials, config: &RunConfig, args: &ArrayArgs) -> Result<String> {
    let mut spec = config.array.clone();
    if args.from_cell {
        spec = spec.with_cell(&mats.db, &config.cell_design())?;
    }
    let sizes = args.sizes.clone().unwrap_or_else(|| vec![(spec.m, spec.n)]);
    let rows = size_sweep(&spec, &sizes, args.per_cell_energy_nj)?;
    if rows.is_empty() {
        return Err(Error::config("size", "no array sizes given"));
    }
    let csv = array_csv(&rows);
    if let Some(path) = &args.plot {
        write_file(path, &report::array_svg(&rows))?;
    }
    let mut out = String::new();
    match &args.csv {
        Some(path) => write_file(path, &csv)?,
        None => out.push_str(&csv),
    }
    let last = spec
        .clone()
        .with_size(sizes[sizes.len() - 1].0, sizes[sizes.len() - 1].1);
    let budget = laser_power_dbm(&last)?;
    let plan = wavelength_plan(&last, last.center_wavelength_nm)?;
    let _ = writeln!(out, "# {} x {} budget: {:.3} dBm", last.n, last.m, budget.p_lsr_dbm);
    for (term, db) in &budget.breakdown {
        let _ = writeln!(out, "#   {term}: {db:.3} dB");
    }
    let _ = writeln!(
        out,
        "#   FSR {:.3} nm, {} channels span {:.3} nm ({})",
        plan.fsr_nm,
        last.m,
        last.m as f64 * last.channel_spacing_pm * 1e-3,
        if plan.feasible { "fits" } else { "exceeds FSR" }
    );
    if !budget.feasible {
        let _ = writeln!(
            out,
            "# warning: laser power exceeds the {} dBm ceiling",
            last.laser_ceiling_dbm
        );
    }
    for w in &budget.warnings {
        let _ = writeln!(out, "# warning: {w}");
    }
    Ok(out)
}

pub fn cmd_sweep(
    mats: &Materials,
    config: &RunConfig,
    out_dir: &Path,
    workers: Option<usize>,
    rule: SelectionRule,
    svg: bool,
) -> Result<String> {
    let opts = SweepOptions {
        workers: workers.unwrap_or(config.workers),
        run_dir: Some(out_dir.to_path_buf()),
        materials_fingerprint: mats.source.clone(),
    };
    let points = run_sweep(&mats.db, &config.sweep, &opts)?;
    let front = pareto_front(&points, &config.sweep.objectives)?;
    write_file(&out_dir.join("pareto.csv"), &phxmem_core::dse::points_csv(&front))?;
    if svg {
        for (name, text) in report::sweep_heatmaps(&points) {
            write_file(&out_dir.join(name), &text)?;
        }
    }
    let selected = select_design(&points, rule);
    let text = report::selection_text(rule, &selected);
    write_file(&out_dir.join("selected.txt"), &text)?;
    let failed = points.iter().filter(|p| !p.is_ok()).count();
    let hash = RunDir::open(out_dir, &config.sweep, &mats.source)?.hash().to_string();
    let mut out = format!(
        "{} points ({failed} failed), {} on the Pareto front\ninputs {hash}\nwritten to {}\n",
        points.len(),
        front.len(),
        out_dir.display()
    );
    out.push_str(&text);
    selected?;
    Ok(out)
}
