use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sitepack::config::{load_config, RunConfig};
use sitepack::drc::{enumerate_scenarios, greedy_cover, small_library, verify_coverage, write_coverage_csv, CoverLayout, CoverParams};
use sitepack::floorplan::{floorplan, run_benchmark, write_metrics_csv, BenchmarkRow, BenchmarkSummary};
use sitepack::interconnect::{parse_ops, run_ops, Network, ReadOutcome};
use sitepack::placement::{pack_items, CostParams};
use sitepack::routing::route_all;
use sitepack::svg::{render_cover_svg, render_svg, SvgOptions};
use sitepack::{compute_metrics, Layout};

#[derive(Parser)]
#[command(name = "sitepack", version, about = "Chip-site floorplanning, routing, rule coverage and interconnect simulation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Floorplan one instance: layout.json, layout.svg and metrics.csv.
    Pack {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Instance id from the config; the first one by default.
        #[arg(long)]
        instance: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write wall-clock solver time into metrics.csv.
        #[arg(long)]
        timing: bool,
        #[arg(long, default_value_t = 2.0)]
        scale: f64,
    },
    /// Route a placed layout from JSON; existing routes are discarded.
    Route {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long, default_value_t = 3)]
        attempts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        scale: f64,
    },
    /// Build and verify a layout showing every abutment scenario.
    DrcCover {
        /// Use the small built-in library with this many templates.
        #[arg(long, default_value_t = 4)]
        templates: usize,
        /// Use the template library of a run config instead.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        scale: f64,
    },
    /// Run an interconnect operations script: trace.csv and reads.csv.
    Simulate {
        #[arg(long)]
        script: PathBuf,
        #[arg(long, default_value_t = 8)]
        sites: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Floorplan every instance of a config into one metrics table.
    Bench {
        #[arg(long)]
        instances: PathBuf,
        /// CSV path; `metrics.csv` in the output directory by default.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        timing: bool,
    },
    /// Draw a layout or coverage layout JSON file as SVG.
    Render {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        scale: f64,
    },
}

enum Fail {
    Config(String),
    Solver(String),
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Self {
        Fail::Solver(format!("i/o: {e}"))
    }
}

fn write(path: &Path, data: &[u8]) -> Result<(), Fail> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, data).map_err(|e| Fail::Solver(format!("cannot write {}: {e}", path.display())))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn config(path: Option<&Path>) -> Result<RunConfig, Fail> {
    match path {
        Some(p) => load_config(p).map_err(|e| Fail::Config(e.to_string())),
        None => Ok(RunConfig::default()),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Fail> {
    let text = fs::read_to_string(path).map_err(|e| Fail::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Fail::Config(format!("{}: {e}", path.display())))
}

fn svg_opts(scale: f64) -> Result<SvgOptions, Fail> {
    if !(scale > 0.0) {
        return Err(Fail::Config(format!("scale {scale} must be positive")));
    }
    Ok(SvgOptions { scale, ..SvgOptions::default() })
}

fn metrics_csv(rows: &[BenchmarkRow], timing: bool) -> Vec<u8> {
    let mut buf = Vec::new();
    write_metrics_csv(&mut buf, rows, timing).expect("write to memory");
    buf
}

fn run(cmd: Cmd) -> Result<(), Fail> {
    match cmd {
        Cmd::Pack { config: path, instance, seed, out, timing, scale } => {
            let cfg = config(path.as_deref())?;
            let opts = svg_opts(scale)?;
            let inst = match &instance {
                Some(id) => cfg.instances.iter().find(|i| &i.id == id).ok_or_else(|| Fail::Config(format!("no instance {id:?}")))?,
                None => &cfg.instances[0],
            };
            let seed = seed.unwrap_or(inst.seed);
            let bench = cfg.benchmark_instances().into_iter().find(|b| b.id == inst.id).expect("same ids");
            let grid = cfg.grid_config();
            let sites = bench.sites();
            let items = pack_items(&sites, &bench.library, &grid).map_err(|e| Fail::Config(e.to_string()))?;
            let cp = CostParams::defaults_for(&items, &grid);
            let r = floorplan(&sites, &bench.library, &grid, &cfg.floorplan_budget(), &cfg.anneal_params(seed), &cp)
                .map_err(|e| Fail::Solver(e.to_string()))?;
            let dir = out.unwrap_or_else(|| cfg.effective_output_dir());
            let row = BenchmarkRow { id: inst.id.clone(), sites: inst.sites, diversity: inst.diversity, outcome: Ok(r.metrics) };
            write(&dir.join("metrics.csv"), &metrics_csv(&[row], timing))?;
            write(&dir.join("layout.json"), serde_json::to_string_pretty(&r.layout).expect("json").as_bytes())?;
            write(&dir.join("layout.svg"), render_svg(&r.layout, &opts).as_bytes())?;
            println!("{}: util {:.2}% track {:.2}% bbox {}", inst.id, r.metrics.util_pct, r.metrics.track_pct, r.metrics.bbox_area);
        }
        Cmd::Route { layout, attempts, seed, out, scale } => {
            let opts = svg_opts(scale)?;
            let mut l: Layout = read_json(&layout)?;
            l.grid.validate().map_err(|e| Fail::Config(e.to_string()))?;
            l.routes.clear();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = route_all(&l, attempts.max(1), &mut rng).ok_or_else(|| Fail::Solver("no pin order routes".into()))?;
            l.routes = r.paths;
            let l = l.normalized().map_err(|e| Fail::Solver(e.to_string()))?;
            let m = compute_metrics(&l, 0.0).map_err(|e| Fail::Solver(e.to_string()))?;
            let row = BenchmarkRow { id: "route".into(), sites: l.sites.len(), diversity: 0, outcome: Ok(m) };
            write(&out.join("metrics.csv"), &metrics_csv(&[row], false))?;
            write(&out.join("routed.json"), serde_json::to_string_pretty(&l).expect("json").as_bytes())?;
            write(&out.join("routed.svg"), render_svg(&l, &opts).as_bytes())?;
            println!("routed with {:?} on attempt {}: track {}", r.strategy, r.attempt, m.track_area);
        }
        Cmd::DrcCover { templates, config: path, seed, epsilon, out, scale } => {
            let opts = svg_opts(scale)?;
            let library = match path {
                Some(p) => config(Some(&p))?.library(),
                None => small_library(templates),
            };
            let mut params = CoverParams { seed, ..CoverParams::default() };
            if let Some(e) = epsilon {
                params.epsilon = e;
            }
            params.validate().map_err(|e| Fail::Config(e.to_string()))?;
            let scenarios = enumerate_scenarios(&library);
            let layout = greedy_cover(&scenarios, &library, &params).map_err(|e| Fail::Solver(e.to_string()))?;
            let report = verify_coverage(&layout, &scenarios);
            let mut csv = Vec::new();
            write_coverage_csv(&mut csv, &report, &scenarios)?;
            write(&out.join("coverage.csv"), &csv)?;
            write(&out.join("cover.json"), serde_json::to_string_pretty(&layout).expect("json").as_bytes())?;
            write(&out.join("cover.svg"), render_cover_svg(&layout, &opts).as_bytes())?;
            println!(
                "{} scenarios, coverage {:.1}%, mean occurrence {:.2}, area {}",
                scenarios.len(),
                report.coverage_pct,
                report.avg_occurrence.unwrap_or(0.0),
                layout.area()
            );
            if !report.missing.is_empty() || report.overlaps > 0 {
                return Err(Fail::Solver(format!("{} scenarios missing, {} overlapping cells", report.missing.len(), report.overlaps)));
            }
        }
        Cmd::Simulate { script, sites, out } => {
            let text = fs::read_to_string(&script).map_err(|e| Fail::Config(format!("cannot read {}: {e}", script.display())))?;
            let ops = parse_ops(&text).map_err(|e| Fail::Config(e.to_string()))?;
            let mut net = Network::new(sites).map_err(|e| Fail::Config(e.to_string()))?.with_trace();
            let outcome = run_ops(&mut net, &ops).map_err(|e| Fail::Solver(e.to_string()))?;
            let mut trace = Vec::new();
            net.write_trace(&mut trace)?;
            write(&out.join("trace.csv"), &trace)?;
            let mut reads = String::from("seq,site,bank,word,issued,result\n");
            for r in &outcome.reads {
                let res = match r.outcome {
                    ReadOutcome::Data(d) => format!("{d:#x}"),
                    ReadOutcome::Timeout => "timeout".into(),
                };
                let bank = if r.bank == sitepack::interconnect::Bank::User { "user" } else { "periph" };
                reads += &format!("{},{},{},{:#x},{},{}\n", r.seq, r.site, bank, r.word, r.issued, res);
            }
            write(&out.join("reads.csv"), reads.as_bytes())?;
            for (i, why) in &outcome.rejected {
                eprintln!("op {}: rejected: {why}", i + 1);
            }
            let s = net.stats();
            println!("{} cycles, {} requests, {} responses, {} dropped, {} timeouts", outcome.cycles, s.injected, s.delivered, s.dropped, s.timeouts);
        }
        Cmd::Bench { instances, out, timing } => {
            let cfg = config(Some(&instances))?;
            let (rows, summary) = run_benchmark(&cfg.benchmark_instances(), &cfg.grid_config(), &cfg.floorplan_budget(), &cfg.anneal_params(0));
            let path = out.unwrap_or_else(|| cfg.effective_output_dir().join("metrics.csv"));
            write(&path, &metrics_csv(&rows, timing))?;
            print_summary(&rows, &summary);
            if rows.iter().all(|r| r.outcome.is_err()) {
                return Err(Fail::Solver("no instance could be floorplanned".into()));
            }
        }
        Cmd::Render { layout, out, scale } => {
            let opts = svg_opts(scale)?;
            let text = fs::read_to_string(&layout).map_err(|e| Fail::Config(format!("cannot read {}: {e}", layout.display())))?;
            let svg = if let Ok(l) = serde_json::from_str::<Layout>(&text) {
                render_svg(&l, &opts)
            } else {
                let c: CoverLayout = serde_json::from_str(&text).map_err(|e| Fail::Config(format!("{}: {e}", layout.display())))?;
                render_cover_svg(&c, &opts)
            };
            write(&out, svg.as_bytes())?;
        }
    }
    Ok(())
}

fn print_summary(rows: &[BenchmarkRow], s: &BenchmarkSummary) {
    for r in rows {
        match &r.outcome {
            Ok(m) => println!("{:>6} util {:6.2}% track {:5.2}%", r.id, m.util_pct, m.track_pct),
            Err(e) => println!("{:>6} failed: {e}", r.id),
        }
    }
    let f = |x: Option<f64>| x.map_or("NA".to_string(), |v| format!("{v:.2}"));
    println!("util {} +- {}, track {} +- {}", f(s.util_mean), f(s.util_std), f(s.track_mean), f(s.track_std));
}

fn main() -> ExitCode {
    match run(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Solver(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Fail::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
