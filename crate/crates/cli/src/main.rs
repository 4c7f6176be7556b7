//! `fogran`: NDT bounds, sweeps, schedule export, bit-exact simulation and
//! gap scans for cache-aided Fog-RANs.
//!
//! Exit codes: 0 ok, 1 I/O failure, 2 invalid configuration or arguments,
//! 3 decode failure, 4 gap above 12.

mod values;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fogran::bounds::{fmt_float, ndt_upper_breakdown, BoundsReport, CSV_HEADER};
use fogran::dof::{register_provider, ActiveDof, DofProvider, TableDof};
use fogran::model::{DemandVector, NetworkConfig};
use fogran::oracle::{empirical_ndt, execute_schedule, verify_decodability, DecodeReport};
use fogran::placement::{sample_placement, CompactPlacement, PlacementRealization};
use fogran::scheduler::{build_schedule, DeliverySchedule, FronthaulMode};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use values::{as_counts, ValueList};

#[derive(Parser)]
#[command(name = "fogran", version, about = "NDT calculus for cache-aided Fog-RANs with decentralized caching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Upper bound, lower bound and gap for one configuration.
    Bounds {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Bounds along one parameter, one CSV row per value.
    Sweep {
        #[command(flatten)]
        net: NetArgs,
        /// Parameter to vary.
        #[arg(long)]
        axis: Axis,
        /// `1,2,5`, `geom:START:STOP:COUNT` or `lin:START:STOP:COUNT`.
        #[arg(long)]
        values: ValueList,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Sample a placement, build the schedule and run it bit for bit.
    Simulate {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        run: RunArgs,
        /// File size in bits.
        #[arg(long, default_value_t = 100_000)]
        file_bits: usize,
        /// Placement seed; file contents derive from it too.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replay a placement in compact JSON form instead of sampling one.
        #[arg(long, value_name = "PATH")]
        placement: Option<PathBuf>,
        /// Also write the placement used, in compact JSON form.
        #[arg(long, value_name = "PATH")]
        placement_out: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// The delivery schedule as JSON, or a per-group summary as CSV.
    ScheduleExport {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Worst upper/lower ratio over a grid, one row per (n_t, n_r).
    GapScan {
        #[arg(long, default_value = "2,3,4,5,6")]
        nt_values: ValueList,
        #[arg(long, default_value = "2,3,4,5,6")]
        nr_values: ValueList,
        #[arg(long, default_value = "0.1,0.3,0.5,0.7,0.9")]
        mut_values: ValueList,
        #[arg(long, default_value = "0.1,0.3,0.5,0.7,0.9")]
        mur_values: ValueList,
        #[arg(long, default_value = "0.1,1,10")]
        r_values: ValueList,
        /// DoF table JSON; defaults to the built-in provider.
        #[arg(long, value_name = "PATH")]
        dof_table: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args)]
struct NetArgs {
    /// JSON network configuration; flags override its fields.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Number of ENs.
    #[arg(long)]
    nt: Option<usize>,
    /// Number of UEs.
    #[arg(long)]
    nr: Option<usize>,
    /// Library size; defaults to the number of UEs.
    #[arg(long)]
    nfiles: Option<usize>,
    /// Normalized EN cache size.
    #[arg(long = "mut")]
    mu_t: Option<f64>,
    /// Normalized UE cache size.
    #[arg(long = "mur")]
    mu_r: Option<f64>,
    /// Fronthaul power scaling.
    #[arg(long)]
    r: Option<f64>,
    /// DoF table JSON; defaults to the built-in provider.
    #[arg(long, value_name = "PATH")]
    dof_table: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Requested file per UE, 1-based, e.g. `1,2,2`; defaults to all distinct.
    #[arg(long)]
    demand: Option<String>,
}

#[derive(Args)]
struct OutArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write to a file instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
enum Axis {
    #[value(name = "r")]
    #[serde(rename = "r")]
    R,
    #[value(name = "mu_t")]
    #[serde(rename = "mu_t")]
    MuT,
    #[value(name = "mu_r")]
    #[serde(rename = "mu_r")]
    MuR,
}

enum Failure {
    Io(String),
    Config(String),
    Decode(String),
    Gap(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Decode(_) => 3,
            Failure::Gap(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Io(m) | Failure::Config(m) | Failure::Decode(m) | Failure::Gap(m) => m,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

/// Every field optional, so a file may hold a partial configuration.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    num_ens: Option<usize>,
    num_ues: Option<usize>,
    num_files: Option<usize>,
    mu_t: Option<f64>,
    mu_r: Option<f64>,
    fronthaul_r: Option<f64>,
}

impl NetArgs {
    fn network(&self) -> Result<NetworkConfig, Failure> {
        self.network_sweeping(None)
    }

    /// As [`network`](Self::network), but a swept parameter need not be
    /// given: its first value stands in for a missing flag.
    fn network_sweeping(&self, swept: Option<(Axis, f64)>) -> Result<NetworkConfig, Failure> {
        let stand_in = |axis: Axis| swept.and_then(|(a, v)| (a == axis).then_some(v));
        let file = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
                serde_json::from_str::<ConfigFile>(&text)
                    .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
            }
            None => ConfigFile::default(),
        };
        let num_ues = need(self.nr.or(file.num_ues), "--nr")?;
        let cfg = NetworkConfig {
            num_ens: need(self.nt.or(file.num_ens), "--nt")?,
            num_ues,
            num_files: self.nfiles.or(file.num_files).unwrap_or(num_ues),
            mu_t: need(self.mu_t.or(file.mu_t).or(stand_in(Axis::MuT)), "--mut")?,
            mu_r: need(self.mu_r.or(file.mu_r).or(stand_in(Axis::MuR)), "--mur")?,
            fronthaul_r: need(self.r.or(file.fronthaul_r).or(stand_in(Axis::R)), "--r")?,
        };
        cfg.validate().map_err(config_err)?;
        Ok(cfg)
    }
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::Config(format!("missing {flag} (or set it in --config)")))
}

fn load_dof(table: Option<&Path>, grid: &[NetworkConfig]) -> Result<ActiveDof, Failure> {
    match table {
        None => Ok(ActiveDof::default_provider()),
        Some(path) => {
            let table = TableDof::load(path).map_err(config_err)?;
            register_provider(table, grid).map_err(config_err)
        }
    }
}

fn parse_demand(spec: Option<&str>, cfg: &NetworkConfig) -> Result<DemandVector, Failure> {
    let demand = match spec {
        None => DemandVector::distinct(cfg.num_ues),
        Some(s) => DemandVector(
            s.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<usize>()
                        .map_err(|e| Failure::Config(format!("bad demand entry {v:?}: {e}")))
                })
                .collect::<Result<_, _>>()?,
        ),
    };
    demand.validate(cfg).map_err(config_err)?;
    Ok(demand)
}

fn write_to(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for row in rows {
        s.push_str(&row);
        s.push('\n');
    }
    s
}

fn cmd_bounds(net: &NetArgs, out: &OutArgs) -> Result<(), Failure> {
    let cfg = net.network()?;
    let dof = load_dof(net.dof_table.as_deref(), &[cfg])?;
    let report = BoundsReport::compute(&cfg, &dof);
    let text = match out.format {
        Format::Json => json(&report),
        Format::Csv => csv(CSV_HEADER, [report.csv_row()]),
    };
    write_to(out.out.as_deref(), &text)
}

#[derive(Serialize)]
struct SweepPoint {
    axis: Axis,
    value: f64,
    report: BoundsReport,
}

fn cmd_sweep(net: &NetArgs, axis: Axis, values: &ValueList, out: &OutArgs) -> Result<(), Failure> {
    let base = net.network_sweeping(Some((axis, values.0[0])))?;
    let grid: Vec<NetworkConfig> = values
        .0
        .iter()
        .map(|&v| {
            let cfg = match axis {
                Axis::R => base.with_r(v),
                Axis::MuT => base.with_mu(v, base.mu_r),
                Axis::MuR => base.with_mu(base.mu_t, v),
            };
            cfg.validate().map(|_| cfg).map_err(config_err)
        })
        .collect::<Result<_, _>>()?;
    let dof = load_dof(net.dof_table.as_deref(), &grid)?;
    let points: Vec<SweepPoint> = grid
        .par_iter()
        .zip(&values.0)
        .map(|(cfg, &value)| SweepPoint { axis, value, report: BoundsReport::compute(cfg, &dof) })
        .collect();
    let text = match out.format {
        Format::Json => json(&points),
        Format::Csv => csv(
            &format!("value,{CSV_HEADER}"),
            points.iter().map(|p| format!("{},{}", p.value, p.report.csv_row())),
        ),
    };
    write_to(out.out.as_deref(), &text)
}

#[derive(Serialize)]
struct Ndt {
    tau_f: f64,
    tau_a: f64,
    tau: f64,
}

#[derive(Serialize)]
struct Simulation<'a> {
    config: NetworkConfig,
    demand: &'a DemandVector,
    dof_provider: &'a str,
    analytic: Ndt,
    empirical: Ndt,
    relative_error: f64,
    report: &'a DecodeReport,
}

const SIMULATE_CSV_HEADER: &str = "seed,file_size_bits,success,fronthaul_bits,access_bits,padding_bits,tau_f,tau_a,tau,empirical_tau_f,empirical_tau_a,empirical_tau,relative_error";

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    net: &NetArgs,
    run: &RunArgs,
    file_bits: usize,
    seed: u64,
    placement: Option<&Path>,
    placement_out: Option<&Path>,
    out: &OutArgs,
) -> Result<(), Failure> {
    let cfg = net.network()?;
    let demand = parse_demand(run.demand.as_deref(), &cfg)?;
    let dof = load_dof(net.dof_table.as_deref(), &[cfg])?;
    let p = match placement {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            let compact: CompactPlacement = serde_json::from_str(&text)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            let p = PlacementRealization::from_compact(&compact).map_err(config_err)?;
            if (p.num_ens(), p.num_ues(), p.num_files()) != (cfg.num_ens, cfg.num_ues, cfg.num_files) {
                return Err(Failure::Config(format!(
                    "placement {} is for {} ENs, {} UEs and {} files",
                    path.display(),
                    p.num_ens(),
                    p.num_ues(),
                    p.num_files()
                )));
            }
            p
        }
        None => sample_placement(&cfg, file_bits, seed).map_err(config_err)?,
    };
    if let Some(path) = placement_out {
        write_to(Some(path), &json(&p.to_compact()))?;
    }
    let schedule = build_schedule(&cfg, &demand, &dof).map_err(config_err)?;
    let report = execute_schedule(&p, &demand, &schedule).map_err(config_err)?;
    let analytic = &schedule.breakdown;
    let (tau_f, tau_a, tau) = empirical_ndt(&report, &cfg, &dof);
    let relative_error = if analytic.total > 0.0 {
        (tau - analytic.total).abs() / analytic.total
    } else {
        (tau - analytic.total).abs()
    };
    eprintln!(
        "tau_f {} (analytic {}, delta {:+e}); tau_a {} (analytic {}, delta {:+e}); tau {} (analytic {}, relative error {:.3e})",
        tau_f,
        analytic.total_f,
        tau_f - analytic.total_f,
        tau_a,
        analytic.total_a,
        tau_a - analytic.total_a,
        tau,
        analytic.total,
        relative_error
    );

    let text = match out.format {
        Format::Json => json(&Simulation {
            config: cfg,
            demand: &demand,
            dof_provider: dof.name(),
            analytic: Ndt { tau_f: analytic.total_f, tau_a: analytic.total_a, tau: analytic.total },
            empirical: Ndt { tau_f, tau_a, tau },
            relative_error,
            report: &report,
        }),
        Format::Csv => csv(
            SIMULATE_CSV_HEADER,
            [format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                report.seed,
                report.file_size_bits,
                report.all_succeeded(),
                report.fronthaul_bits,
                report.access_bits_by_coop.values().sum::<u64>(),
                report.padding_overhead_bits,
                analytic.total_f,
                analytic.total_a,
                analytic.total,
                tau_f,
                tau_a,
                tau,
                relative_error
            )],
        ),
    };
    write_to(out.out.as_deref(), &text)?;
    match verify_decodability(&report) {
        Ok(()) => Ok(()),
        Err(failures) => {
            let lines: Vec<String> = failures
                .iter()
                .map(|f| format!("  {:?} {:?}: {} ({})", f.node, f.group, f.message, f.missing))
                .collect();
            Err(Failure::Decode(format!("{} decode failures:\n{}", failures.len(), lines.join("\n"))))
        }
    }
}

const SCHEDULE_CSV_HEADER: &str = "m,n,chosen_i,coop_level,mode,access_dof,subfile_fraction,messages,sub_messages_per_message,fronthaul_transmissions,fronthaul_load,tau_f,tau_a";

fn schedule_rows(s: &DeliverySchedule) -> impl Iterator<Item = String> + '_ {
    s.groups.iter().map(|g| {
        let mode = match g.fronthaul.mode {
            FronthaulMode::NaiveMulticast => "naive_multicast",
            FronthaulMode::CodedMulticast => "coded_multicast",
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            g.group.m,
            g.group.n,
            g.chosen_i,
            g.coop_level,
            mode,
            g.access_dof,
            g.subfile_fraction,
            g.messages.len(),
            g.sub_messages_per_message,
            g.fronthaul.transmissions.len(),
            g.fronthaul.normalized_load,
            g.tau_f,
            g.tau_a
        )
    })
}

fn cmd_schedule_export(net: &NetArgs, run: &RunArgs, out: &OutArgs) -> Result<(), Failure> {
    let cfg = net.network()?;
    let demand = parse_demand(run.demand.as_deref(), &cfg)?;
    let dof = load_dof(net.dof_table.as_deref(), &[cfg])?;
    let schedule = build_schedule(&cfg, &demand, &dof).map_err(config_err)?;
    debug_assert_eq!(schedule.breakdown, ndt_upper_breakdown(&cfg, &dof));
    let text = match out.format {
        Format::Json => json(&schedule),
        Format::Csv => csv(SCHEDULE_CSV_HEADER, schedule_rows(&schedule)),
    };
    write_to(out.out.as_deref(), &text)
}

const GAP_SCAN_CSV_HEADER: &str = "n_t,n_r,points,degenerate,max_gap,argmax_mu_t,argmax_mu_r,argmax_r";

/// Worst gap over one `(n_t, n_r)` slice; degenerate points are counted
/// separately and never enter the maximum.
#[derive(Serialize)]
struct GapRow {
    n_t: usize,
    n_r: usize,
    points: usize,
    degenerate: usize,
    max_gap: Option<f64>,
    argmax_mu_t: Option<f64>,
    argmax_mu_r: Option<f64>,
    argmax_r: Option<f64>,
}

impl GapRow {
    fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.n_t,
            self.n_r,
            self.points,
            self.degenerate,
            opt(self.max_gap),
            opt(self.argmax_mu_t),
            opt(self.argmax_mu_r),
            opt(self.argmax_r)
        )
    }
}

const GAP_LIMIT: f64 = 12.0;

#[allow(clippy::too_many_arguments)]
fn cmd_gap_scan(
    nt: &ValueList,
    nr: &ValueList,
    mu_t: &ValueList,
    mu_r: &ValueList,
    r: &ValueList,
    dof_table: Option<&Path>,
    out: &OutArgs,
) -> Result<(), Failure> {
    let nts = as_counts(nt, "--nt-values").map_err(Failure::Config)?;
    let nrs = as_counts(nr, "--nr-values").map_err(Failure::Config)?;
    let mut slices = Vec::new();
    for &n_t in &nts {
        for &n_r in &nrs {
            let mut cfgs = Vec::new();
            for &mt in &mu_t.0 {
                for &mr in &mu_r.0 {
                    for &rv in &r.0 {
                        let cfg = NetworkConfig::new(n_t, n_r, mt, mr, rv);
                        cfg.validate().map_err(config_err)?;
                        cfgs.push(cfg);
                    }
                }
            }
            slices.push((n_t, n_r, cfgs));
        }
    }
    let all: Vec<NetworkConfig> = slices.iter().flat_map(|s| s.2.iter().copied()).collect();
    let dof = load_dof(dof_table, &all)?;

    let rows: Vec<GapRow> = slices
        .par_iter()
        .map(|(n_t, n_r, cfgs)| {
            let mut row = GapRow {
                n_t: *n_t,
                n_r: *n_r,
                points: 0,
                degenerate: 0,
                max_gap: None,
                argmax_mu_t: None,
                argmax_mu_r: None,
                argmax_r: None,
            };
            for cfg in cfgs {
                let rep = BoundsReport::compute(cfg, &dof);
                if rep.is_degenerate() {
                    row.degenerate += 1;
                    continue;
                }
                row.points += 1;
                if row.max_gap.is_none_or(|g| rep.gap > g) {
                    row.max_gap = Some(rep.gap);
                    row.argmax_mu_t = Some(cfg.mu_t);
                    row.argmax_mu_r = Some(cfg.mu_r);
                    row.argmax_r = Some(cfg.fronthaul_r);
                }
            }
            row
        })
        .collect();

    let text = match out.format {
        Format::Json => json(&rows),
        Format::Csv => csv(GAP_SCAN_CSV_HEADER, rows.iter().map(GapRow::csv_row)),
    };
    write_to(out.out.as_deref(), &text)?;

    let points: usize = rows.iter().map(|r| r.points).sum();
    let degenerate: usize = rows.iter().map(|r| r.degenerate).sum();
    let worst = rows
        .iter()
        .filter(|r| r.max_gap.is_some())
        .max_by(|a, b| a.max_gap.unwrap().total_cmp(&b.max_gap.unwrap()));
    match worst {
        Some(w) => eprintln!(
            "max gap {} at n_t={} n_r={} mu_t={} mu_r={} r={} over {points} points; {degenerate} degenerate points skipped",
            fmt_float(w.max_gap.unwrap()),
            w.n_t,
            w.n_r,
            w.argmax_mu_t.unwrap(),
            w.argmax_mu_r.unwrap(),
            w.argmax_r.unwrap()
        ),
        None => eprintln!("no non-degenerate points; {degenerate} degenerate points skipped"),
    }
    let violations = rows.iter().filter(|r| r.max_gap.is_some_and(|g| g > GAP_LIMIT)).count();
    if violations > 0 {
        return Err(Failure::Gap(format!("gap exceeds {GAP_LIMIT} in {violations} (n_t, n_r) slices")));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Bounds { net, out } => cmd_bounds(net, out),
        Command::Sweep { net, axis, values, out } => cmd_sweep(net, *axis, values, out),
        Command::Simulate { net, run, file_bits, seed, placement, placement_out, out } => cmd_simulate(
            net,
            run,
            *file_bits,
            *seed,
            placement.as_deref(),
            placement_out.as_deref(),
            out,
        ),
        Command::ScheduleExport { net, run, out } => cmd_schedule_export(net, run, out),
        Command::GapScan { nt_values, nr_values, mut_values, mur_values, r_values, dof_table, out } => {
            cmd_gap_scan(
                nt_values,
                nr_values,
                mut_values,
                mur_values,
                r_values,
                dof_table.as_deref(),
                out,
            )
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
