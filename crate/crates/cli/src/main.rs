use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use phxmem_cli::config::{self, RunConfig};
use phxmem_cli::{
    cmd_array, cmd_cell, cmd_materials, cmd_mode, cmd_sweep, cmd_thermal, exit_code, load_materials, parse_phase,
    parse_sizes, ArrayArgs, ThermalArgs,
};
use phxmem_core::dse::SelectionRule;
use phxmem_core::Result;

/// Design-space tools for phase-change photonic memory cells and arrays.
///
/// Every FILE argument is a TOML run configuration; each subcommand reads
/// the sections it needs and defaults the rest. Exit codes: 0 success,
/// 1 I/O failure, 2 configuration error, 3 model or solver error.
#[derive(Parser)]
#[command(name = "phxmem", version)]
struct Cli {
    /// Material database (JSON). Falls back to the config file, then to
    /// PHXMEM_MATERIALS, then to the built-in table.
    #[arg(long, global = true, value_name = "PATH")]
    materials: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List optical constants and transition temperatures.
    Materials {
        /// Show one material only.
        #[arg(long)]
        name: Option<String>,
        #[arg(long, default_value_t = 1550.0, value_name = "NM")]
        wl: f64,
    },
    /// Solve the fundamental TE-like mode of a cell cross-section.
    Mode {
        /// Config file supplying [geometry].
        #[arg(long, value_name = "FILE")]
        geom: Option<PathBuf>,
        /// PCM on top of the waveguide [default: cell.material].
        #[arg(long)]
        material: Option<String>,
        /// a, c, or p=<fraction>.
        #[arg(long, default_value = "a")]
        phase: String,
        #[arg(long, default_value_t = 1550.0, value_name = "NM")]
        wl: f64,
        /// Write |Ex| on the grid as CSV (x_nm,y_nm,abs_ex).
        #[arg(long, value_name = "PATH")]
        dump_field: Option<PathBuf>,
    },
    /// Insertion loss, contrast, bit capacity and per-level fractions.
    Cell {
        /// Config file supplying [geometry] and [cell].
        #[arg(long, value_name = "FILE")]
        design: Option<PathBuf>,
        /// Level table for this many bits [default: capacity].
        #[arg(long)]
        bits: Option<u32>,
        /// Write the T/R/A vs p curve as CSV.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Simulate a heater pulse on the cell cross-section.
    Thermal {
        /// Config file supplying [geometry], [cell].material and [stack].
        #[arg(long, value_name = "FILE")]
        stack: Option<PathBuf>,
        #[arg(long, value_name = "MW")]
        power: f64,
        #[arg(long, value_name = "US")]
        duration: f64,
        /// Write PCM temperature quantiles over time as CSV.
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        /// Append the power-latency CSV for --target over --powers.
        #[arg(long)]
        set_curve: bool,
        /// Crystalline fraction the set curve aims for.
        #[arg(long, default_value_t = 1.0)]
        target: f64,
        /// Ascending powers for the set curve, mW.
        #[arg(long, value_delimiter = ',', default_values_t = [4.0, 5.0, 6.0, 8.0, 10.0, 12.0])]
        powers: Vec<f64>,
        /// Write the set curve to a file instead of stdout.
        #[arg(long, value_name = "PATH")]
        set_curve_out: Option<PathBuf>,
    },
    /// Laser budget, write energy and wavelength plan of an N x M array.
    Array {
        /// Config file supplying [array] (and [geometry]/[cell] with --from-cell).
        #[arg(long, value_name = "FILE")]
        spec: Option<PathBuf>,
        /// Sizes as N=M pairs, e.g. 5=5,10=10,20=20.
        #[arg(long)]
        size: Option<String>,
        /// Per-cell top-level set energy, nJ.
        #[arg(long, default_value_t = 0.0, value_name = "NJ")]
        per_cell_energy: f64,
        /// Take amorphous cell loss and bits per cell from the cell model.
        #[arg(long)]
        from_cell: bool,
        /// Render P_lsr and total energy against array size.
        #[arg(long, value_name = "PATH.svg")]
        plot: Option<PathBuf>,
        /// Write the CSV to a file instead of stdout.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Sweep cell designs, extract the Pareto front and pick a design.
    Sweep {
        /// Config file supplying [sweep].
        #[arg(long, value_name = "FILE")]
        spec: Option<PathBuf>,
        /// Run directory; completed points are reused when inputs match.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Worker threads [default: config workers, 0 = one per core].
        #[arg(long)]
        workers: Option<usize>,
        /// max_joint_contrast or min_loss_at_bits(n).
        #[arg(long, default_value = "max_joint_contrast")]
        rule: String,
        /// Skip the loss and contrast heatmaps.
        #[arg(long)]
        no_svg: bool,
    },
    /// Print the effective configuration.
    Config {
        #[arg(value_name = "FILE")]
        file: Option<PathBuf>,
        /// Annotate values that reproduce the reference device.
        #[arg(long)]
        explain: bool,
    },
}

fn run(cli: Cli) -> Result<String> {
    let flag = cli.materials.as_deref();
    match cli.command {
        Command::Materials { name, wl } => {
            let mats = load_materials(flag, &RunConfig::default())?;
            cmd_materials(&mats, name.as_deref(), wl)
        }
        Command::Mode {
            geom,
            material,
            phase,
            wl,
            dump_field,
        } => {
            let config = config::load_or_default(geom.as_deref())?;
            let mats = load_materials(flag, &config)?;
            let material = material.unwrap_or_else(|| config.cell.material.clone());
            cmd_mode(
                &mats,
                &config,
                &material,
                parse_phase(&phase)?,
                wl,
                dump_field.as_deref(),
            )
        }
        Command::Cell { design, bits, csv } => {
            let config = config::load_or_default(design.as_deref())?;
            let mats = load_materials(flag, &config)?;
            cmd_cell(&mats, &config, bits, csv.as_deref())
        }
        Command::Thermal {
            stack,
            power,
            duration,
            trace,
            set_curve,
            target,
            powers,
            set_curve_out,
        } => {
            let config = config::load_or_default(stack.as_deref())?;
            let mats = load_materials(flag, &config)?;
            let args = ThermalArgs {
                power_mw: power,
                duration_us: duration,
                trace,
                set_curve,
                target_p: target,
                powers_mw: powers,
                set_curve_out,
            };
            cmd_thermal(&mats, &config, &args)
        }
        Command::Array {
            spec,
            size,
            per_cell_energy,
            from_cell,
            plot,
            csv,
        } => {
            let config = config::load_or_default(spec.as_deref())?;
            let mats = load_materials(flag, &config)?;
            let args = ArrayArgs {
                sizes: size.as_deref().map(parse_sizes).transpose()?,
                per_cell_energy_nj: per_cell_energy,
                from_cell,
                plot,
                csv,
            };
            cmd_array(&mats, &config, &args)
        }
        Command::Sweep {
            spec,
            out,
            workers,
            rule,
            no_svg,
        } => {
            let config = config::load_or_default(spec.as_deref())?;
            let mats = load_materials(flag, &config)?;
            let rule: SelectionRule = rule.parse()?;
            let out = out.unwrap_or_else(|| config.output_dir.clone());
            cmd_sweep(&mats, &config, &out, workers, rule, !no_svg)
        }
        Command::Config { file, explain } => {
            let config = config::load_or_default(file.as_deref())?;
            Ok(if explain {
                config::explain(&config)
            } else {
                config.to_toml()
            })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
