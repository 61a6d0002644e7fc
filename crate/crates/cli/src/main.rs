//! `heiswiener` command line.
//!
//! Subcommands: `kernel` (heat-kernel tables as CSV), `sample` (path dumps
//! plus moment summaries), `cylinder` (Wiener measure of a cylinder set),
//! `fk` (Feynman-Kac estimates), `validate` (the bundled validation
//! suites). Every output embeds the effective configuration and the crate
//! version. Exit codes: 0 success, 2 configuration error, 3 numerical
//! failure, 4 validation failure.

mod config;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use config::Config;
use heiswiener::fk::{self, InitialData, Potential, TabulatedPotential};
use heiswiener::group::GroupPoint;
use heiswiener::kernel::{self, KernelConfig};
use heiswiener::measure::{self, BoxRegion, CylinderQuadOptions, CylinderSet, Interval};
use heiswiener::sampler::{self, PathGrid, RngStreamSpec};
use heiswiener::validate::{self, Scale};
use std::io::Write;
use std::path::{Path, PathBuf};

const EXIT_CONFIG: i32 = 2;
const EXIT_NUMERICAL: i32 = 3;
const EXIT_VALIDATION: i32 = 4;

#[derive(Parser)]
#[command(name = "heiswiener", version, about = "Heisenberg-group Brownian motion toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate the heat kernel on a (t, |z|, u) product grid; emits CSV.
    Kernel(KernelArgs),
    /// Simulate paths; emits a CSV dump and a moments summary record.
    Sample(SampleArgs),
    /// Wiener measure of a cylinder set from a description file.
    Cylinder(CylinderArgs),
    /// Feynman-Kac estimate from a run configuration file.
    Fk(FkArgs),
    /// Run the validation suites.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct KernelArgs {
    /// Dimension parameter of H^n.
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Times (comma separated).
    #[arg(long, value_delimiter = ',', required = true)]
    t: Vec<f64>,
    /// Horizontal norms |z| (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "0")]
    z: Vec<f64>,
    /// Vertical coordinates u (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "0")]
    u: Vec<f64>,
    /// Truncation of the lambda-integral.
    #[arg(long)]
    lambda_cutoff: Option<f64>,
    /// Base quadrature node count.
    #[arg(long)]
    nodes: Option<usize>,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Time horizon.
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
    /// Stored grid intervals.
    #[arg(long, default_value_t = 16)]
    intervals: usize,
    /// Substeps per grid interval.
    #[arg(long, default_value_t = 16)]
    substeps: usize,
    /// Number of paths to dump.
    #[arg(long, default_value_t = 4)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// First stream id (path k uses stream_base + k).
    #[arg(long, default_value_t = 0)]
    stream_base: u64,
    /// Path CSV output (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Moments JSONL output (stderr when absent).
    #[arg(long)]
    moments_out: Option<PathBuf>,
}

#[derive(Args)]
struct CylinderArgs {
    /// Cylinder description file (key = value schema; see README).
    #[arg(long)]
    config: PathBuf,
    /// Monte Carlo paths (0 = quadrature only).
    #[arg(long)]
    mc_paths: Option<usize>,
    /// Substeps per interval for the Monte Carlo route.
    #[arg(long)]
    substeps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file for the JSON lines (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FkArgs {
    /// Run configuration file (key = value schema; see README).
    #[arg(long)]
    config: PathBuf,
    /// Overrides of the file values.
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    n_paths: Option<usize>,
    #[arg(long)]
    substeps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// JSONL output (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional CSV dump of the density grid.
    #[arg(long)]
    density_out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// all | kernel | sampler | measure | fk | determinism
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = validate::DEFAULT_SEED)]
    seed: u64,
    /// Reduced path counts for a quick structural pass.
    #[arg(long)]
    smoke: bool,
    /// Report body output (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-criterion runtimes as JSONL (omitted when absent).
    #[arg(long)]
    timings_out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {:#}", e.source);
            e.exit_code
        }
    };
    std::process::exit(code);
}

struct AppError {
    exit_code: i32,
    source: anyhow::Error,
}

fn config_err(e: anyhow::Error) -> AppError {
    AppError {
        exit_code: EXIT_CONFIG,
        source: e,
    }
}

fn numerical_err(e: heiswiener::Error) -> AppError {
    let exit_code = match e {
        heiswiener::Error::QuadratureNonConvergent { .. }
        | heiswiener::Error::BoundFitFailed { .. } => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    };
    AppError {
        exit_code,
        source: anyhow::Error::new(e),
    }
}

fn run(cli: Cli) -> Result<i32, AppError> {
    match cli.cmd {
        Cmd::Kernel(a) => cmd_kernel(a),
        Cmd::Sample(a) => cmd_sample(a),
        Cmd::Cylinder(a) => cmd_cylinder(a),
        Cmd::Fk(a) => cmd_fk(a),
        Cmd::Validate(a) => cmd_validate(a),
    }
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), AppError> {
    match path {
        Some(p) => std::fs::write(p, text)
            .with_context(|| format!("writing {}", p.display()))
            .map_err(config_err),
        None => {
            print!("{text}");
            std::io::stdout().flush().ok();
            Ok(())
        }
    }
}

fn provenance_comment(config: &serde_json::Value) -> String {
    format!(
        "# config = {config}\n# version = {}\n",
        env!("CARGO_PKG_VERSION")
    )
}

fn cmd_kernel(a: KernelArgs) -> Result<i32, AppError> {
    let mut cfg = KernelConfig::new(a.n);
    if let Some(l) = a.lambda_cutoff {
        cfg.lambda_cutoff = l;
    }
    if let Some(nodes) = a.nodes {
        cfg.node_count = nodes;
    }
    let config = serde_json::json!({
        "subcommand": "kernel",
        "n": a.n,
        "t": a.t,
        "z": a.z,
        "u": a.u,
        "lambda_cutoff": cfg.lambda_cutoff,
        "node_count": cfg.node_count,
        "rel_tol": cfg.rel_tol,
    });
    let mut out = provenance_comment(&config);
    out.push_str("t,|z|,u,p_t,est_tail_error\n");
    for &t in &a.t {
        for &z in &a.z {
            if z < 0.0 {
                return Err(config_err(anyhow!("|z| values must be nonnegative")));
            }
            for &u in &a.u {
                let (p, est) =
                    kernel::kernel_eval_radial(&cfg, t, z * z, u).map_err(numerical_err)?;
                out.push_str(&format!("{t},{z},{u},{p:.17e},{est:.3e}\n"));
            }
        }
    }
    write_text(a.out.as_deref(), &out)?;
    Ok(0)
}

fn cmd_sample(a: SampleArgs) -> Result<i32, AppError> {
    let grid =
        PathGrid::uniform(a.t_end, a.intervals, a.substeps).map_err(numerical_err)?;
    let config = serde_json::json!({
        "subcommand": "sample",
        "n": a.n,
        "t_end": a.t_end,
        "intervals": a.intervals,
        "substeps": a.substeps,
        "paths": a.paths,
        "seed": a.seed,
        "stream_base": a.stream_base,
    });
    let mut csv = provenance_comment(&config);
    csv.push_str("path_id,time");
    for i in 1..=a.n {
        csv.push_str(&format!(",x_{i},y_{i}"));
    }
    csv.push_str(",u\n");

    let mut z_sq = heiswiener::stats::Moments::default();
    let mut u_m = heiswiener::stats::Moments::default();
    let mut u_sq = heiswiener::stats::Moments::default();
    for k in 0..a.paths {
        let spec = RngStreamSpec::new(a.seed, a.stream_base + k as u64);
        let path = sampler::sample_path(a.n, &grid, spec).map_err(numerical_err)?;
        for (t, p) in path.grid.times().iter().zip(&path.points) {
            csv.push_str(&format!("{k},{t}"));
            for c in p.z() {
                csv.push_str(&format!(",{c:.17e}"));
            }
            csv.push_str(&format!(",{:.17e}\n", p.u()));
        }
        let end = path.endpoint();
        z_sq.push(end.z_norm_sq());
        u_m.push(end.u());
        u_sq.push(end.u() * end.u());
    }
    write_text(a.out.as_deref(), &csv)?;

    let var_u = u_sq.mean() - u_m.mean() * u_m.mean();
    let moments = serde_json::json!({
        "kind": "moments",
        "t_end": a.t_end,
        "n_paths": a.paths,
        "e_z_sq": z_sq.mean(),
        "stderr_z_sq": z_sq.stderr(),
        "var_u": var_u,
        "stderr_var_u": u_sq.stderr(),
        "config": config,
        "version": env!("CARGO_PKG_VERSION"),
    });
    match a.moments_out.as_deref() {
        Some(p) => write_text(Some(p), &format!("{moments}\n"))?,
        None => eprintln!("{moments}"),
    }
    Ok(0)
}

fn parse_cylinder(cfg: &Config) -> anyhow::Result<CylinderSet> {
    let n = cfg.usize("n")?;
    let times = cfg.f64_list("times")?;
    let mut boxes = Vec::new();
    for j in 0..times.len() {
        let ivs = cfg.intervals(&format!("box.{j}"))?;
        if ivs.len() != 2 * n + 1 {
            anyhow::bail!("box.{j}: expected {} intervals, got {}", 2 * n + 1, ivs.len());
        }
        let coords = ivs
            .into_iter()
            .map(|(lo, hi)| {
                if lo.is_infinite() && hi.is_infinite() {
                    Ok(Interval::full())
                } else {
                    Interval::new(lo, hi).map_err(anyhow::Error::new)
                }
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        boxes.push(BoxRegion::new(coords));
    }
    CylinderSet::new(n, times, boxes).map_err(anyhow::Error::new)
}

fn cmd_cylinder(a: CylinderArgs) -> Result<i32, AppError> {
    let cfg_file = Config::load(&a.config).map_err(config_err)?;
    let set = parse_cylinder(&cfg_file).map_err(config_err)?;
    let mc_paths = a
        .mc_paths
        .map(Ok)
        .unwrap_or_else(|| cfg_file.usize_or("mc_paths", 0))
        .map_err(config_err)?;
    let substeps = a
        .substeps
        .map(Ok)
        .unwrap_or_else(|| cfg_file.usize_or("substeps", 256))
        .map_err(config_err)?;
    let seed = a
        .seed
        .map(Ok)
        .unwrap_or_else(|| cfg_file.u64_or("seed", 0))
        .map_err(config_err)?;
    let config = cfg_file.to_json();
    let version = env!("CARGO_PKG_VERSION");

    let quadrature_eligible = set.n() == 1 && set.times().len() <= 3;
    if !quadrature_eligible && mc_paths == 0 {
        return Err(config_err(anyhow!(
            "cylinder not quadrature-eligible (n = 1, at most 3 times) and mc_paths = 0"
        )));
    }
    let mut out = String::new();
    if quadrature_eligible {
        let kcfg = KernelConfig::new(1);
        let cache = measure::KernelTableCache::new(&kcfg);
        let qd = measure::cylinder_measure_quadrature(
            &kcfg,
            &set,
            &cache,
            &CylinderQuadOptions::default(),
        )
        .map_err(numerical_err)?;
        out.push_str(
            &serde_json::json!({
                "kind": "quadrature",
                "value": qd.value,
                "est_error": qd.est_error,
                "config": config,
                "version": version,
            })
            .to_string(),
        );
        out.push('\n');
    }
    if mc_paths > 0 {
        let mc = measure::cylinder_measure_mc(
            &set,
            mc_paths,
            substeps,
            RngStreamSpec::new(seed, 0),
        )
        .map_err(numerical_err)?;
        out.push_str(
            &serde_json::json!({
                "kind": "mc",
                "value": mc.value,
                "stderr": mc.stderr,
                "n_paths": mc.n_paths,
                "seed": mc.seed,
                "config": config,
                "version": version,
            })
            .to_string(),
        );
        out.push('\n');
    }
    write_text(a.out.as_deref(), &out)?;
    Ok(0)
}

fn parse_point(cfg: &Config, key: &str, n: usize, default_zero: bool) -> anyhow::Result<GroupPoint> {
    match cfg.raw(key) {
        None if default_zero => Ok(GroupPoint::identity(n)),
        None => anyhow::bail!("missing key `{key}`"),
        Some(_) => {
            let coords = cfg.f64_list(key)?;
            if coords.len() != 2 * n + 1 {
                anyhow::bail!("`{key}`: expected {} coordinates, got {}", 2 * n + 1, coords.len());
            }
            let (z, u) = coords.split_at(2 * n);
            GroupPoint::new(z.to_vec(), u[0]).map_err(anyhow::Error::new)
        }
    }
}

fn parse_initial_data(cfg: &Config, n: usize) -> anyhow::Result<InitialData> {
    match cfg.str_or("f.kind", "constant") {
        "constant" => Ok(InitialData::Constant(cfg.f64_or("f.value", 1.0)?)),
        "gaussian" => {
            let center = parse_point(cfg, "f.center", n, true)?;
            InitialData::gaussian_bump(
                center,
                cfg.f64_or("f.width", 1.0)?,
                cfg.f64_or("f.amplitude", 1.0)?,
            )
            .map_err(anyhow::Error::new)
        }
        "indicator" => {
            let ivs = cfg.intervals("f.box")?;
            if ivs.len() != 2 * n + 1 {
                anyhow::bail!("f.box: expected {} intervals", 2 * n + 1);
            }
            let coords = ivs
                .into_iter()
                .map(|(lo, hi)| Interval::new(lo, hi).map_err(anyhow::Error::new))
                .collect::<anyhow::Result<Vec<_>>>()?;
            Ok(InitialData::IndicatorBox(BoxRegion::new(coords)))
        }
        other => anyhow::bail!("unknown f.kind `{other}` (constant | gaussian | indicator)"),
    }
}

fn parse_potential(cfg: &Config) -> anyhow::Result<Potential> {
    match cfg.str_or("v.kind", "constant") {
        "constant" => Ok(Potential::Constant(cfg.f64_or("v.value", 0.0)?)),
        "quadratic" => Potential::quadratic_radial(cfg.f64_or("v.alpha", 0.0)?, cfg.f64_or("v.beta", 0.0)?)
            .map_err(anyhow::Error::new),
        "table" => {
            let path = cfg.require("v.file")?;
            let table_cfg = Config::load(Path::new(path))?;
            let axis = |name: &str| -> anyhow::Result<(f64, f64, usize)> {
                let vals = table_cfg.f64_list(name)?;
                if vals.len() != 3 {
                    anyhow::bail!("axis `{name}`: expected `origin step count`");
                }
                Ok((vals[0], vals[1], vals[2] as usize))
            };
            let (x0, dx, nx) = axis("x")?;
            let (y0, dy, ny) = axis("y")?;
            let (u0, du, nu) = axis("u")?;
            let values = table_cfg.f64_list("values")?;
            TabulatedPotential::new([x0, y0, u0], [dx, dy, du], [nx, ny, nu], values)
                .map(Potential::Tabulated)
                .map_err(anyhow::Error::new)
        }
        other => anyhow::bail!("unknown v.kind `{other}` (constant | quadratic | table)"),
    }
}

fn cmd_fk(a: FkArgs) -> Result<i32, AppError> {
    let mut cfg_file = Config::load(&a.config).map_err(config_err)?;
    if let Some(t) = a.t {
        cfg_file.set("t", t.to_string());
    }
    if let Some(v) = a.n_paths {
        cfg_file.set("n_paths", v.to_string());
    }
    if let Some(v) = a.substeps {
        cfg_file.set("substeps", v.to_string());
    }
    if let Some(v) = a.seed {
        cfg_file.set("seed", v.to_string());
    }

    let n = cfg_file.usize_or("n", 1).map_err(config_err)?;
    let t = cfg_file.f64("t").map_err(config_err)?;
    let base = parse_point(&cfg_file, "base", n, true).map_err(config_err)?;
    let f = parse_initial_data(&cfg_file, n).map_err(config_err)?;
    let v = parse_potential(&cfg_file).map_err(config_err)?;
    let n_paths = cfg_file.usize_or("n_paths", 100_000).map_err(config_err)?;
    let substeps = cfg_file.usize_or("substeps", 500).map_err(config_err)?;
    let seed = cfg_file.u64_or("seed", 0).map_err(config_err)?;
    let stream_base = cfg_file.u64_or("stream_base", 0).map_err(config_err)?;
    let rng = RngStreamSpec::new(seed, stream_base);
    let config = cfg_file.to_json();
    let version = env!("CARGO_PKG_VERSION");

    let est = fk::fk_solve(t, &base, &f, &v, n_paths, substeps, rng).map_err(numerical_err)?;
    let mut out = serde_json::json!({
        "kind": "fk",
        "value": est.value,
        "stderr": est.stderr,
        "n_paths": est.n_paths,
        "seed": est.seed,
        "config": config,
        "version": version,
    })
    .to_string();
    out.push('\n');

    if let Some(raw_targets) = cfg_file.raw("density.targets") {
        let half_width = cfg_file.f64_or("density.half_width", 0.4).map_err(config_err)?;
        let targets = raw_targets
            .split(';')
            .map(|tok| {
                let coords: Vec<f64> = tok
                    .split_whitespace()
                    .map(|s| s.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| anyhow!("density.targets: {e}"))?;
                if coords.len() != 2 * n + 1 {
                    return Err(anyhow!("density target needs {} coordinates", 2 * n + 1));
                }
                let (z, u) = coords.split_at(2 * n);
                GroupPoint::new(z.to_vec(), u[0]).map_err(anyhow::Error::new)
            })
            .collect::<anyhow::Result<Vec<_>>>()
            .map_err(config_err)?;
        let ens = fk::fk_ensemble(n, t, &v, &base, n_paths, substeps, rng.offset(n_paths as u64))
            .map_err(numerical_err)?;
        let dens = fk::fk_kernel_density(&ens, &targets, half_width).map_err(numerical_err)?;
        out.push_str(
            &serde_json::json!({
                "kind": "density",
                "values": dens.values,
                "stderrs": dens.stderrs,
                "empty_bins": dens.empty_bins,
                "half_width": dens.half_width,
                "n_paths": dens.n_paths,
                "mean_weight": dens.mean_weight,
                "config": config,
                "version": version,
            })
            .to_string(),
        );
        out.push('\n');
        if let Some(density_path) = a.density_out.as_deref() {
            let mut csv = provenance_comment(&config);
            csv.push_str("x,y,u,density,stderr\n");
            for (k, target) in dens.targets.iter().enumerate() {
                csv.push_str(&format!(
                    "{},{},{},{:.17e},{:.3e}\n",
                    target.z()[0],
                    target.z()[1],
                    target.u(),
                    dens.values[k],
                    dens.stderrs[k]
                ));
            }
            write_text(Some(density_path), &csv)?;
        }
    }
    write_text(a.out.as_deref(), &out)?;
    Ok(0)
}

fn cmd_validate(a: ValidateArgs) -> Result<i32, AppError> {
    let ids = validate::suite_ids(&a.suite)
        .ok_or_else(|| config_err(anyhow!("unknown suite `{}`", a.suite)))?;
    let scale = if a.smoke { Scale::Smoke } else { Scale::Full };
    eprintln!(
        "running suite `{}` ({} criteria) at {} scale, seed {}",
        a.suite,
        ids.len(),
        if a.smoke { "smoke" } else { "full" },
        a.seed
    );
    let timed = validate::run_criteria(ids, a.seed, scale).map_err(numerical_err)?;
    let results: Vec<_> = timed.iter().map(|t| t.result.clone()).collect();
    for t in &timed {
        eprintln!(
            "  {} {:<40} {} [{:.1}s]",
            t.result.id,
            t.result.name,
            if t.result.pass { "pass" } else { "FAIL" },
            t.runtime_s
        );
    }
    let body = validate::report_lines(&results);
    write_text(a.out.as_deref(), &body)?;
    if let Some(tp) = a.timings_out.as_deref() {
        let mut lines = String::new();
        for t in &timed {
            lines.push_str(
                &serde_json::json!({"id": t.result.id, "runtime_s": t.runtime_s}).to_string(),
            );
            lines.push('\n');
        }
        write_text(Some(tp), &lines)?;
    }
    if results.iter().all(|r| r.pass) {
        Ok(0)
    } else {
        Ok(EXIT_VALIDATION)
    }
}
