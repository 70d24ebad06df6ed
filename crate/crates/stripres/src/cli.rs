//! Command-line front end: argument parsing, config-file merging,
//! orchestration of the solver pipeline and deterministic output.

use std::collections::HashMap;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::asymptotics::predict;
use crate::bound::{solve_states, WindowGeometry};
use crate::error::SolverError;
use crate::fdoracle::{fd_eigenvalues_richardson, FdGrid};
use crate::junction::{identity_report, IdentityReport};
use crate::report::{csv_f64, Csv, Json};
use crate::resonance::{find_resonance, BarrierGeometry};

const DEFAULT_RADII: [f64; 4] = [0.05, 0.1, 0.2, 0.3];

#[derive(Parser)]
#[command(
    name = "stripres",
    version,
    about = "Bound states and tunneling resonances of a Dirichlet strip with Neumann boundary windows"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bound states of the window-coupled strip
    Eigen(EigenArgs),
    /// Junction response constants and identity checks at one energy
    Junction(JunctionArgs),
    /// Flux and corner identity verification across all bound states
    Verify(VerifyArgs),
    /// Locate one complex resonance of the finite-barrier strip
    Resonance(ResonanceArgs),
    /// Barrier-length sweep with displacement-ratio columns
    Sweep(SweepArgs),
    /// Finite-difference cross-check of the spectrum
    Oracle(OracleArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Window half-width (the opening has length 2a)
    #[arg(long)]
    a: Option<f64>,
    /// Modes kept per family per slab
    #[arg(long)]
    nmodes: Option<usize>,
    /// Root-refinement tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Output format: json or csv
    #[arg(long)]
    format: Option<String>,
    /// Output path (stdout when absent)
    #[arg(long)]
    out: Option<String>,
    /// Config file with `key = value` lines, merged under the flags
    #[arg(long)]
    config: Option<String>,
    /// Worker threads for sweeps
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Clone)]
struct EigenArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Clone)]
struct JunctionArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Spectral value; defaults to the j-th bound state of the window `a`
    #[arg(long)]
    lambda0: Option<f64>,
    /// Bound-state index used when `lambda0` is absent
    #[arg(long)]
    j: Option<usize>,
}

#[derive(Args, Clone)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Tolerance on the flux-balance identity
    #[arg(long)]
    tol_flux: Option<f64>,
    /// Common tolerance on the corner identities
    #[arg(long)]
    tol_corner: Option<f64>,
    /// Per-identity overrides
    #[arg(long)]
    tol_corner_transmission: Option<f64>,
    #[arg(long)]
    tol_corner_im_reflection: Option<f64>,
    #[arg(long)]
    tol_corner_re_reflection: Option<f64>,
    #[arg(long)]
    tol_corner_energy: Option<f64>,
}

#[derive(Args, Clone)]
struct ResonanceArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Right barrier end coordinate
    #[arg(long)]
    lplus: Option<f64>,
    /// Left barrier end coordinate
    #[arg(long)]
    lminus: Option<f64>,
    /// Bound-state index seeding the search
    #[arg(long)]
    j: Option<usize>,
}

#[derive(Args, Clone)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    j: Option<usize>,
    #[arg(long = "l-from")]
    l_from: Option<f64>,
    #[arg(long = "l-to")]
    l_to: Option<f64>,
    #[arg(long = "l-step")]
    l_step: Option<f64>,
}

#[derive(Args, Clone)]
struct OracleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Requested mesh size
    #[arg(long)]
    h: Option<f64>,
    /// Truncation half-length of the finite-difference domain
    #[arg(long = "L")]
    grid_l: Option<f64>,
    /// Maximum number of eigenvalues compared
    #[arg(long)]
    count: Option<usize>,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn failure_of(e: SolverError) -> Failure {
    let code = match &e {
        SolverError::NoEigenvalue(_) | SolverError::GridTooCoarse(_) => 2,
        SolverError::NoConvergence(_) => 4,
        SolverError::MultipleRoots(_) => 5,
        _ => 1,
    };
    Failure::new(code, e.to_string())
}

/// Rendered output plus the process exit code (nonzero only for the
/// verify command's tolerance gate).
type CmdResult = Result<(String, i32), Failure>;

fn load_config(path: &Option<String>) -> Result<HashMap<String, String>, Failure> {
    let mut map = HashMap::new();
    if let Some(p) = path {
        let text = std::fs::read_to_string(p)
            .map_err(|e| Failure::new(1, format!("cannot read config {p}: {e}")))?;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Failure::new(1, format!("config line without '=': {line}")));
            };
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    Ok(map)
}

fn merge<T: std::str::FromStr>(
    slot: &mut Option<T>,
    map: &HashMap<String, String>,
    key: &str,
) -> Result<(), Failure> {
    if slot.is_none() {
        if let Some(raw) = map.get(key) {
            let v = raw
                .parse::<T>()
                .map_err(|_| Failure::new(1, format!("config key {key}: cannot parse {raw:?}")))?;
            *slot = Some(v);
        }
    }
    Ok(())
}

fn merge_common(c: &mut CommonArgs, map: &HashMap<String, String>) -> Result<(), Failure> {
    merge(&mut c.a, map, "a")?;
    merge(&mut c.nmodes, map, "nmodes")?;
    merge(&mut c.tol, map, "tol")?;
    merge(&mut c.format, map, "format")?;
    merge(&mut c.out, map, "out")?;
    merge(&mut c.jobs, map, "jobs")?;
    Ok(())
}

fn require_a(c: &CommonArgs) -> Result<f64, Failure> {
    let a = c
        .a
        .ok_or_else(|| Failure::new(1, "missing required parameter --a (window half-width, a > 0)"))?;
    if !(a > 0.0) || !a.is_finite() {
        return Err(Failure::new(
            1,
            format!("parameter --a {a} violates the precondition a > 0"),
        ));
    }
    Ok(a)
}

#[derive(PartialEq, Clone, Copy)]
enum Format {
    Json,
    Csv,
}

fn parse_format(c: &CommonArgs, default: Format) -> Result<Format, Failure> {
    match c.format.as_deref() {
        None => Ok(default),
        Some("json") => Ok(Format::Json),
        Some("csv") => Ok(Format::Csv),
        Some(other) => Err(Failure::new(
            1,
            format!("parameter --format {other} must be json or csv"),
        )),
    }
}

fn emit(out: &Option<String>, text: String) -> Result<String, Failure> {
    if let Some(path) = out {
        std::fs::write(path, &text)
            .map_err(|e| Failure::new(1, format!("cannot write {path}: {e}")))?;
        Ok(String::new())
    } else {
        Ok(text)
    }
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    match jobs {
        None => Ok(f()),
        Some(k) => {
            if k == 0 {
                return Err(Failure::new(1, "parameter --jobs must be at least 1"));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Failure::new(1, format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn cmd_eigen(mut args: EigenArgs) -> CmdResult {
    let map = load_config(&args.common.config)?;
    merge_common(&mut args.common, &map)?;
    let a = require_a(&args.common)?;
    let n = args.common.nmodes.unwrap_or(40);
    let tol = args.common.tol.unwrap_or(1e-10);
    let format = parse_format(&args.common, Format::Json)?;

    let geom = WindowGeometry::new(a).map_err(failure_of)?;
    let states = solve_states(geom, n, tol).map_err(failure_of)?;

    let text = match format {
        Format::Json => {
            let arr: Vec<Json> = states
                .iter()
                .map(|s| {
                    Json::obj(vec![
                        ("j", Json::Int(s.j as i64)),
                        ("lambda", Json::Num(s.lambda)),
                        ("parity", Json::Str(s.parity.to_string())),
                        ("psi", Json::Num(s.psi_decay)),
                        ("N", Json::Int(s.truncation as i64)),
                        ("tol", Json::Num(tol)),
                    ])
                })
                .collect();
            Json::Arr(arr).render()
        }
        Format::Csv => {
            let mut csv = Csv::new(&["j", "lambda", "parity", "psi", "N", "tol"]);
            for s in &states {
                csv.row(&[
                    s.j.to_string(),
                    csv_f64(s.lambda),
                    s.parity.to_string(),
                    csv_f64(s.psi_decay),
                    s.truncation.to_string(),
                    csv_f64(tol),
                ]);
            }
            csv.finish()
        }
    };
    Ok((emit(&args.common.out, text)?, 0))
}

fn identity_json(rep: &IdentityReport) -> Json {
    Json::obj(vec![
        ("lambda0", Json::Num(rep.lambda0)),
        ("k_minus", Json::complex(rep.k_minus)),
        ("k_plus", Json::complex(rep.k_plus)),
        ("beta", Json::complex(rep.beta)),
        (
            "identity_errors",
            Json::obj(vec![
                ("flux_balance", Json::Num(rep.flux_balance)),
                ("corner_transmission", Json::Num(rep.corner_transmission)),
                ("corner_im_reflection", Json::Num(rep.corner_im_reflection)),
                ("corner_re_reflection", Json::Num(rep.corner_re_reflection)),
                ("corner_energy_balance", Json::Num(rep.corner_energy_balance)),
            ]),
        ),
        ("im_kminus_positive", Json::Bool(rep.im_kminus_positive)),
        ("re_kminus_nonneg", Json::Bool(rep.re_kminus_nonneg)),
    ])
}

fn cmd_junction(mut args: JunctionArgs) -> CmdResult {
    let map = load_config(&args.common.config)?;
    merge_common(&mut args.common, &map)?;
    merge(&mut args.lambda0, &map, "lambda0")?;
    merge(&mut args.j, &map, "j")?;
    let n = args.common.nmodes.unwrap_or(64);
    let lambda0 = match args.lambda0 {
        Some(l) => l,
        None => {
            let a = require_a(&args.common)?;
            let j = args.j.unwrap_or(1);
            let geom = WindowGeometry::new(a).map_err(failure_of)?;
            let states = solve_states(geom, n.min(48).max(16), 1e-10).map_err(failure_of)?;
            states
                .get(j - 1)
                .ok_or_else(|| Failure::new(1, format!("no bound state with index {j}")))?
                .lambda
        }
    };
    let rep = identity_report(lambda0, n, &DEFAULT_RADII).map_err(failure_of)?;
    Ok((emit(&args.common.out, identity_json(&rep).render())?, 0))
}

fn cmd_verify(mut args: VerifyArgs) -> CmdResult {
    let map = load_config(&args.common.config)?;
    merge_common(&mut args.common, &map)?;
    merge(&mut args.tol_flux, &map, "tol-flux")?;
    merge(&mut args.tol_corner, &map, "tol-corner")?;
    merge(&mut args.tol_corner_transmission, &map, "tol-corner-transmission")?;
    merge(&mut args.tol_corner_im_reflection, &map, "tol-corner-im-reflection")?;
    merge(&mut args.tol_corner_re_reflection, &map, "tol-corner-re-reflection")?;
    merge(&mut args.tol_corner_energy, &map, "tol-corner-energy")?;

    let a = require_a(&args.common)?;
    let n = args.common.nmodes.unwrap_or(64);
    let tol = args.common.tol.unwrap_or(1e-10);
    let tol_flux = args.tol_flux.unwrap_or(1e-6);
    let corner = args.tol_corner.unwrap_or(0.05);
    let t_tr = args.tol_corner_transmission.unwrap_or(corner);
    let t_im = args.tol_corner_im_reflection.unwrap_or(corner);
    let t_re = args.tol_corner_re_reflection.unwrap_or(corner);
    let t_en = args.tol_corner_energy.unwrap_or(corner);

    let geom = WindowGeometry::new(a).map_err(failure_of)?;
    let states = solve_states(geom, n.min(48).max(16), tol).map_err(failure_of)?;
    let mut all_pass = true;
    let mut items = Vec::new();
    for s in &states {
        let rep = identity_report(s.lambda, n, &DEFAULT_RADII).map_err(failure_of)?;
        let pass = rep.flux_balance <= tol_flux
            && rep.corner_transmission <= t_tr
            && rep.corner_im_reflection <= t_im
            && rep.corner_re_reflection <= t_re
            && rep.corner_energy_balance <= t_en
            && rep.im_kminus_positive;
        all_pass &= pass;
        let mut fields = vec![("j".to_string(), Json::Int(s.j as i64))];
        if let Json::Obj(inner) = identity_json(&rep) {
            fields.extend(inner);
        }
        fields.push(("pass".to_string(), Json::Bool(pass)));
        items.push(Json::Obj(fields));
    }
    let doc = Json::obj(vec![
        ("a", Json::Num(a)),
        ("nmodes", Json::Int(n as i64)),
        ("states", Json::Arr(items)),
        ("pass", Json::Bool(all_pass)),
    ]);
    let rendered = emit(&args.common.out, doc.render())?;
    Ok((rendered, if all_pass { 0 } else { 3 }))
}

struct ResonancePipeline {
    lambda_raw: f64,
    psi_raw: f64,
    k_minus: Option<C64>,
    lambda_best: f64,
}

fn resonance_inputs(a: f64, j: usize, n: usize, tol: f64) -> Result<ResonancePipeline, Failure> {
    let geom = WindowGeometry::new(a).map_err(failure_of)?;
    let states = solve_states(geom, n, tol.min(1e-9)).map_err(failure_of)?;
    let st = states
        .get(j - 1)
        .ok_or_else(|| Failure::new(1, format!("no bound state with index {j}")))?;
    let k_minus = crate::junction::solve_junction(st.lambda_raw, n.max(16))
        .ok()
        .map(|jn| jn.k_minus);
    Ok(ResonancePipeline {
        lambda_raw: st.lambda_raw,
        psi_raw: st.psi_raw,
        k_minus,
        lambda_best: st.lambda,
    })
}

fn seed_for(p: &ResonancePipeline, l_plus: f64, l_minus: f64) -> C64 {
    match p.k_minus {
        Some(km) => predict(p.lambda_raw, p.psi_raw, km, l_plus, l_minus).lambda_hat,
        None => C64::new(p.lambda_best, -1e-6),
    }
}

fn cmd_resonance(mut args: ResonanceArgs) -> CmdResult {
    let map = load_config(&args.common.config)?;
    merge_common(&mut args.common, &map)?;
    merge(&mut args.lplus, &map, "lplus")?;
    merge(&mut args.lminus, &map, "lminus")?;
    merge(&mut args.j, &map, "j")?;
    let a = require_a(&args.common)?;
    let lp = args
        .lplus
        .ok_or_else(|| Failure::new(1, "missing required parameter --lplus (> a)"))?;
    let lm = args
        .lminus
        .ok_or_else(|| Failure::new(1, "missing required parameter --lminus (> a)"))?;
    let j = args.j.unwrap_or(1);
    let n = args.common.nmodes.unwrap_or(32);
    let tol = args.common.tol.unwrap_or(1e-12);
    let geom = BarrierGeometry::new(a, lp, lm).map_err(failure_of)?;

    let pipe = resonance_inputs(a, j, n, tol)?;
    let seed = seed_for(&pipe, lp, lm);
    let res = find_resonance(&geom, seed, n, tol).map_err(failure_of)?;
    let doc = Json::obj(vec![
        ("j", Json::Int(j as i64)),
        ("re_lambda", Json::Num(res.lambda.re)),
        ("im_lambda", Json::Num(res.lambda.im)),
        ("residual", Json::Num(res.residual)),
        ("c_plus", Json::complex(res.c_plus)),
        ("c_minus", Json::complex(res.c_minus)),
        ("seed", Json::complex(seed)),
        ("iterations", Json::Int(res.iterations as i64)),
        ("N", Json::Int(n as i64)),
    ]);
    Ok((emit(&args.common.out, doc.render())?, 0))
}

fn cmd_sweep(mut args: SweepArgs) -> CmdResult {
    let map = load_config(&args.common.config)?;
    merge_common(&mut args.common, &map)?;
    merge(&mut args.j, &map, "j")?;
    merge(&mut args.l_from, &map, "l-from")?;
    merge(&mut args.l_to, &map, "l-to")?;
    merge(&mut args.l_step, &map, "l-step")?;
    let a = require_a(&args.common)?;
    let j = args.j.unwrap_or(1);
    let n = args.common.nmodes.unwrap_or(32);
    let tol = args.common.tol.unwrap_or(1e-12);
    let from = args
        .l_from
        .ok_or_else(|| Failure::new(1, "missing required parameter --l-from"))?;
    let to = args
        .l_to
        .ok_or_else(|| Failure::new(1, "missing required parameter --l-to"))?;
    let step = args
        .l_step
        .ok_or_else(|| Failure::new(1, "missing required parameter --l-step"))?;
    if !(step > 0.0 && to >= from && from > a) {
        return Err(Failure::new(
            1,
            "sweep grid requires a < l-from <= l-to and l-step > 0",
        ));
    }
    let format = parse_format(&args.common, Format::Csv)?;

    let mut grid = Vec::new();
    let mut l = from;
    while l <= to + 1e-9 {
        grid.push(l);
        l += step;
    }

    let pipe = resonance_inputs(a, j, n, tol)?;
    let kappa = (1.0 - pipe.lambda_raw).sqrt();
    let rows: Vec<Result<_, Failure>> = with_pool(args.common.jobs, || {
        grid.par_iter()
            .map(|&l| {
                let geom = BarrierGeometry::new(a, l, l).map_err(failure_of)?;
                let seed = seed_for(&pipe, l, l);
                let res = find_resonance(&geom, seed, n, tol).map_err(failure_of)?;
                let leading = match pipe.k_minus {
                    Some(km) => predict(pipe.lambda_raw, pipe.psi_raw, km, l, l).leading,
                    None => C64::new(f64::NAN, f64::NAN),
                };
                let ratio = (res.lambda - C64::new(pipe.lambda_raw, 0.0)) / leading;
                let remainder =
                    2.0 * l * l * (-3.0 * kappa * l).exp();
                Ok((l, res, ratio, remainder))
            })
            .collect()
    })?;

    let mut table = Vec::new();
    for r in rows {
        table.push(r?);
    }
    let text = match format {
        Format::Csv => {
            let mut csv = Csv::new(&[
                "l",
                "re_lambda",
                "im_lambda",
                "re_ratio",
                "im_ratio",
                "ratio_dev",
                "dist_to_bound",
                "remainder_scale",
                "residual",
                "iterations",
            ]);
            for (l, res, ratio, remainder) in &table {
                csv.row(&[
                    csv_f64(*l),
                    csv_f64(res.lambda.re),
                    csv_f64(res.lambda.im),
                    csv_f64(ratio.re),
                    csv_f64(ratio.im),
                    csv_f64((ratio - C64::new(1.0, 0.0)).norm()),
                    csv_f64((res.lambda - C64::new(pipe.lambda_raw, 0.0)).norm()),
                    csv_f64(*remainder),
                    csv_f64(res.residual),
                    res.iterations.to_string(),
                ]);
            }
            csv.finish()
        }
        Format::Json => {
            let arr: Vec<Json> = table
                .iter()
                .map(|(l, res, ratio, remainder)| {
                    Json::obj(vec![
                        ("l", Json::Num(*l)),
                        ("re_lambda", Json::Num(res.lambda.re)),
                        ("im_lambda", Json::Num(res.lambda.im)),
                        ("ratio", Json::complex(*ratio)),
                        (
                            "ratio_dev",
                            Json::Num((ratio - C64::new(1.0, 0.0)).norm()),
                        ),
                        ("remainder_scale", Json::Num(*remainder)),
                        ("residual", Json::Num(res.residual)),
                        ("iterations", Json::Int(res.iterations as i64)),
                    ])
                })
                .collect();
            Json::Arr(arr).render()
        }
    };
    Ok((emit(&args.common.out, text)?, 0))
}

fn cmd_oracle(mut args: OracleArgs) -> CmdResult {
    let map = load_config(&args.common.config)?;
    merge_common(&mut args.common, &map)?;
    merge(&mut args.h, &map, "h")?;
    merge(&mut args.grid_l, &map, "L")?;
    merge(&mut args.count, &map, "count")?;
    let a = require_a(&args.common)?;
    let h = args.h.unwrap_or(0.01);
    let l = args.grid_l.unwrap_or(a + 11.0);
    let count = args.count.unwrap_or(8);
    let n = args.common.nmodes.unwrap_or(40);
    let tol = args.common.tol.unwrap_or(1e-10);
    let format = parse_format(&args.common, Format::Json)?;

    let grid = FdGrid::new(h, l).map_err(failure_of)?;
    let fd = fd_eigenvalues_richardson(a, grid, count).map_err(failure_of)?;
    let geom = WindowGeometry::new(a).map_err(failure_of)?;
    let mm: Vec<f64> = crate::bound::find_eigenvalues(geom, n, tol)
        .map_err(failure_of)?
        .iter()
        .map(|e| e.lambda)
        .take(count)
        .collect();

    let rows: Vec<(usize, Option<f64>, Option<f64>)> = (0..mm.len().max(fd.len()))
        .map(|i| (i + 1, mm.get(i).copied(), fd.get(i).copied()))
        .collect();
    let text = match format {
        Format::Json => {
            let arr: Vec<Json> = rows
                .iter()
                .map(|(j, m, f)| {
                    Json::obj(vec![
                        ("j", Json::Int(*j as i64)),
                        ("lambda_mm", m.map(Json::Num).unwrap_or(Json::Str("".into()))),
                        ("lambda_fd", f.map(Json::Num).unwrap_or(Json::Str("".into()))),
                        (
                            "diff",
                            match (m, f) {
                                (Some(m), Some(f)) => Json::Num(m - f),
                                _ => Json::Str("".into()),
                            },
                        ),
                    ])
                })
                .collect();
            Json::obj(vec![
                ("count_mm", Json::Int(mm.len() as i64)),
                ("count_fd", Json::Int(fd.len() as i64)),
                ("rows", Json::Arr(arr)),
            ])
            .render()
        }
        Format::Csv => {
            let mut csv = Csv::new(&["j", "lambda_mm", "lambda_fd", "diff"]);
            for (j, m, f) in &rows {
                csv.row(&[
                    j.to_string(),
                    m.map(csv_f64).unwrap_or_default(),
                    f.map(csv_f64).unwrap_or_default(),
                    match (m, f) {
                        (Some(m), Some(f)) => csv_f64(m - f),
                        _ => String::new(),
                    },
                ]);
            }
            csv.finish()
        }
    };
    Ok((emit(&args.common.out, text)?, 0))
}

/// Parse arguments, run the selected command and return the process exit
/// code. Solver panics are caught so that every failure maps to one of the
/// documented exit codes.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let outcome = std::panic::catch_unwind(|| match cli.command {
        Command::Eigen(a) => cmd_eigen(a),
        Command::Junction(a) => cmd_junction(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Resonance(a) => cmd_resonance(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Oracle(a) => cmd_oracle(a),
    });
    match outcome {
        Ok(Ok((text, code))) => {
            print!("{text}");
            if code != 0 {
                eprintln!("error: identity errors exceed the configured tolerances");
            }
            code
        }
        Ok(Err(f)) => {
            eprintln!("error: {}", f.message);
            f.code
        }
        Err(_) => {
            eprintln!("error: internal solver panic");
            1
        }
    }
}
