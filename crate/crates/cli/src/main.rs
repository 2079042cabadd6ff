//! `sealc`: command-line front end for the sealing calculus toolkit.

mod bundled;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde_json::{json, Value as Json};
use thiserror::Error;

use sealc_core::harness::{
    check_adequacy, check_constancy, check_tini, load_corpus, run_suite, CorpusEntry, GenConfig,
    HarnessError, SuiteReport, Verdict, BANNER, DEFAULT_SEED,
};
use sealc_core::lattice::{Lattice, Level, Open};
use sealc_core::presheaf::{
    closed_modality, enumerate_nat_trans, fracture_check, is_sealed, is_transparent, open_modality,
    validate_presheaf, Limits, Presheaf, RawPresheaf,
};
use sealc_core::semantics::{
    eval_operational, eval_stage_with, fuel_from_i64, support, Outcome, Run, StageOptions,
};
use sealc_core::syntax::{parse_term, parse_type, print_type, read_program, Tm};
use sealc_core::typecheck::{check_closed, infer_closed, TypeError};

const SEED_VAR: &str = "SEALC_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "sealc",
    version,
    about = "Sealing calculus toolkit: lattices, presheaf modalities, typechecker, staged interpreter"
)]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Args)]
struct Opts {
    /// Emit machine-readable JSON on stdout
    #[arg(long, global = true)]
    json: bool,
    /// Treat warnings as errors
    #[arg(long, global = true)]
    strict: bool,
    /// Observer level (eval stage, ni level, psh policy ↓LEVEL)
    #[arg(long, global = true, value_name = "LEVEL")]
    level: Option<String>,
    /// Fix unrollings allowed per evaluation
    #[arg(
        long,
        global = true,
        default_value_t = 10_000,
        allow_negative_numbers = true
    )]
    fuel: i64,
    /// Print evaluation steps
    #[arg(long, global = true)]
    trace: bool,
    /// Lattice file; overrides program headers (default: bundled four-level chain)
    #[arg(long, global = true, value_name = "FILE")]
    lattice: Option<PathBuf>,
    /// Largest brute-force search space for enumerations
    #[arg(long, global = true, default_value_t = 1 << 24, value_name = "N")]
    limit: u64,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Validate and enumerate a lattice file
    #[command(subcommand)]
    Lattice(LatticeCmd),
    /// Presheaf modalities over a lattice
    #[command(subcommand)]
    Psh(PshCmd),
    /// Typecheck a program
    Check {
        file: PathBuf,
        /// Check against this type instead of inferring
        #[arg(long = "type", value_name = "TYPE")]
        ty: Option<String>,
    },
    /// Evaluate a program at one stage
    Eval {
        file: PathBuf,
        /// Run the level-blind operational machine instead
        #[arg(long)]
        operational: bool,
    },
    /// Stages at which a program converges
    Support { file: PathBuf },
    /// Noninterference and constancy checks on generated programs
    Ni(HarnessArgs),
    /// Staged interpreter against the operational machine
    Adequacy {
        #[command(flatten)]
        harness: HarnessArgs,
        /// Directory of .dcc programs (default: bundled corpus)
        #[arg(long, value_name = "DIR")]
        corpus: Option<PathBuf>,
    },
    /// Every property check
    Fuzz {
        #[command(flatten)]
        harness: HarnessArgs,
        #[arg(long, value_name = "DIR")]
        corpus: Option<PathBuf>,
    },
    /// Walk through the termination-leak example on the bundled chain
    Demo,
}

#[derive(Debug, Subcommand)]
enum LatticeCmd {
    Check { file: PathBuf },
    Filters { file: PathBuf },
    Opens { file: PathBuf },
}

#[derive(Debug, Subcommand)]
enum PshCmd {
    /// Carriers of A, ○A, •A and ○•A
    Modality {
        file: PathBuf,
        /// Generators of the policy U (default ↓LEVEL)
        #[arg(long, value_delimiter = ',', value_name = "LEVELS")]
        open: Option<Vec<String>>,
    },
    /// Check that A is the pullback of ○A → •○A ← •A
    Fracture {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', value_name = "LEVELS")]
        open: Option<Vec<String>>,
    },
    /// Count natural transformations A → B
    Homcount { src: PathBuf, dst: PathBuf },
}

#[derive(Debug, Args)]
struct HarnessArgs {
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Term size budget
    #[arg(long, default_value_t = 40)]
    size: usize,
    /// Overrides SEALC_SEED
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(String),
}

type Result<T, E = CliError> = std::result::Result<T, E>;

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::InvalidConfig(_) => usage(e),
            HarnessError::Io { .. } => usage(e),
            other => failed(other),
        }
    }
}

/// What a subcommand produced: text for people, JSON for tools, and whether
/// the thing checked held.
struct Report {
    ok: bool,
    text: String,
    json: Json,
}

impl Report {
    fn new(ok: bool, text: String, json: Json) -> Report {
        Report { ok, text, json }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(report) => {
            let text = if cli.opts.json {
                serde_json::to_string_pretty(&report.json).expect("reports serialize") + "\n"
            } else {
                report.text
            };
            // a closed pipe (`sealc ... | head`) is not an error worth reporting
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            ExitCode::from(if report.ok { 0 } else { 1 })
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n");
            eprintln!("{}", Cli::command().render_help());
            ExitCode::from(2)
        }
        Err(CliError::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<Report> {
    let opts = &cli.opts;
    match &cli.cmd {
        Cmd::Lattice(op) => lattice_cmd(opts, op),
        Cmd::Psh(op) => psh_cmd(opts, op),
        Cmd::Check { file, ty } => check_cmd(opts, file, ty.as_deref()),
        Cmd::Eval { file, operational } => eval_cmd(opts, file, *operational),
        Cmd::Support { file } => support_cmd(opts, file),
        Cmd::Ni(h) => ni_cmd(opts, h),
        Cmd::Adequacy { harness, corpus } => adequacy_cmd(opts, harness, corpus.as_deref()),
        Cmd::Fuzz { harness, corpus } => fuzz_cmd(opts, harness, corpus.as_deref()),
        Cmd::Demo => demo_cmd(opts),
    }
}

// Inputs

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn load_lattice(path: &Path) -> Result<Arc<Lattice>> {
    let text = read(path)?;
    Lattice::from_toml(&text)
        .map(Arc::new)
        .map_err(|e| failed(format!("{}: {e}", path.display())))
}

/// `--lattice`, else the bundled chain.
fn default_lattice(opts: &Opts) -> Result<Arc<Lattice>> {
    match &opts.lattice {
        Some(p) => load_lattice(p),
        None => Ok(bundled::chain4()),
    }
}

fn fuel(opts: &Opts) -> Result<u64> {
    fuel_from_i64(opts.fuel).map_err(usage)
}

fn level(lat: &Lattice, name: &str) -> Result<Level> {
    lat.level(name).map_err(usage)
}

fn seed(h: &HarnessArgs) -> Result<u64> {
    if let Some(s) = h.seed {
        return Ok(s);
    }
    match std::env::var(SEED_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| usage(format!("{SEED_VAR} must be an unsigned integer, got `{v}`"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

struct Program {
    lattice: Arc<Lattice>,
    term: Tm,
}

/// Reads a `.dcc` file. The lattice comes from `--lattice`, then the file's
/// header (relative to the file), then the bundled chain.
fn load_program(opts: &Opts, path: &Path) -> Result<Program> {
    let text = read(path)?;
    let src = read_program(&text);
    let lattice = match (&opts.lattice, &src.lattice_path) {
        (Some(p), _) => load_lattice(p)?,
        (None, Some(h)) => {
            let resolved = path.parent().unwrap_or(Path::new(".")).join(h);
            load_lattice(&resolved)?
        }
        (None, None) => bundled::chain4(),
    };
    let term =
        parse_term(&src.body, &lattice).map_err(|e| failed(format!("{}: {e}", path.display())))?;
    Ok(Program { lattice, term })
}

/// Typechecks by inference, failing with the diagnostic.
fn typecheck(opts: &Opts, p: &Program) -> Result<()> {
    infer_closed(&p.lattice, &p.term, opts.strict)
        .map(|_| ())
        .map_err(|e| failed(format!("ill-typed: {e}")))
}

fn limits(opts: &Opts) -> Limits {
    Limits {
        max_candidates: opts.limit as u128,
        ..Limits::default()
    }
}

// lattice

fn lattice_cmd(opts: &Opts, op: &LatticeCmd) -> Result<Report> {
    let (file, what) = match op {
        LatticeCmd::Check { file } => (file, "check"),
        LatticeCmd::Filters { file } => (file, "filters"),
        LatticeCmd::Opens { file } => (file, "opens"),
    };
    let text = read(file)?;
    let lat = match Lattice::from_toml(&text) {
        Ok(lat) => lat,
        Err(e) => {
            let msg = format!("{}: {e}", file.display());
            return Ok(Report::new(
                false,
                format!("invalid lattice: {msg}\n"),
                json!({ "ok": false, "error": msg }),
            ));
        }
    };
    let names = lat.names().to_vec();
    match what {
        "check" => {
            let covers = covers(&lat);
            let mut out = format!(
                "lattice ok: {} elements, top {}\n",
                lat.len(),
                lat.name(lat.top())
            );
            for (a, b) in &covers {
                out.push_str(&format!("  {a} ⊏ {b}\n"));
            }
            Ok(Report::new(
                true,
                out,
                json!({ "ok": true, "elements": names, "top": lat.name(lat.top()), "covers": covers }),
            ))
        }
        "filters" => {
            let found = lat.enumerate_filters(opts.limit).map_err(usage)?;
            let sets: Vec<Vec<&str>> = found
                .iter()
                .map(|f| f.members().map(|l| lat.name(l)).collect())
                .collect();
            let mut out = format!("{} filters\n", found.len());
            for f in &found {
                out.push_str(&format!("  {}\n", lat.show_filter(*f)));
            }
            Ok(Report::new(
                true,
                out,
                json!({ "count": found.len(), "filters": sets }),
            ))
        }
        _ => {
            let found = lat.enumerate_opens(opts.limit).map_err(usage)?;
            let sets: Vec<Vec<&str>> = found
                .iter()
                .map(|u| u.members().map(|l| lat.name(l)).collect())
                .collect();
            let mut out = format!("{} opens\n", found.len());
            for u in &found {
                out.push_str(&format!("  {}\n", lat.show_open(*u)));
            }
            Ok(Report::new(
                true,
                out,
                json!({ "count": found.len(), "opens": sets }),
            ))
        }
    }
}

fn covers(lat: &Lattice) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for a in lat.levels() {
        for b in lat.levels() {
            let strictly = |x: Level, y: Level| x != y && lat.leq(x, y);
            if strictly(a, b) && !lat.levels().any(|m| strictly(a, m) && strictly(m, b)) {
                out.push((lat.name(a).to_string(), lat.name(b).to_string()));
            }
        }
    }
    out
}

// psh

fn load_presheaf(lat: &Arc<Lattice>, path: &Path) -> Result<Presheaf> {
    let text = read(path)?;
    RawPresheaf::from_toml(&text)
        .and_then(|raw| validate_presheaf(lat.clone(), &raw))
        .map_err(|e| failed(format!("{}: {e}", path.display())))
}

fn policy(opts: &Opts, lat: &Lattice, open: &Option<Vec<String>>) -> Result<Open> {
    match (open, &opts.level) {
        (Some(gens), _) => lat.lower_closure_of_names(gens).map_err(usage),
        (None, Some(l)) => Ok(lat.principal_policy(level(lat, l)?)),
        (None, None) => Err(usage("give the policy with --open LEVELS or --level LEVEL")),
    }
}

fn psh_cmd(opts: &Opts, op: &PshCmd) -> Result<Report> {
    let lat = default_lattice(opts)?;
    let lim = limits(opts);
    match op {
        PshCmd::Modality { file, open } => {
            let a = load_presheaf(&lat, file)?;
            let u = policy(opts, &lat, open)?;
            let o = open_modality(u, &a, &lim).map_err(failed)?.presheaf;
            let c = closed_modality(u, &a).presheaf;
            let oc = open_modality(u, &c, &lim).map_err(failed)?.presheaf;
            let transparent = is_transparent(u, &a, &lim).map_err(failed)?;
            let sealed = is_sealed(u, &a);
            let mut out = format!("U = {}\n", lat.show_open(u));
            for (label, p) in [("A", &a), ("○A", &o), ("•A", &c), ("○•A", &oc)] {
                out.push_str(&format!("{label}\n{}\n", p.render_rows()));
            }
            out.push_str(&format!("transparent {transparent}\nsealed {sealed}\n"));
            Ok(Report::new(
                true,
                out,
                json!({
                    "open": members(&lat, u),
                    "levels": lat.names(),
                    "presheaf": a.sizes(),
                    "open_modality": o.sizes(),
                    "closed_modality": c.sizes(),
                    "open_of_closed": oc.sizes(),
                    "transparent": transparent,
                    "sealed": sealed,
                }),
            ))
        }
        PshCmd::Fracture { file, open } => {
            let a = load_presheaf(&lat, file)?;
            let u = policy(opts, &lat, open)?;
            let holds = fracture_check(u, &a, &lim).map_err(failed)?;
            let word = if holds { "holds" } else { "FAILS" };
            Ok(Report::new(
                holds,
                format!("fracture at U = {}: {word}\n", lat.show_open(u)),
                json!({ "open": members(&lat, u), "holds": holds }),
            ))
        }
        PshCmd::Homcount { src, dst } => {
            let a = load_presheaf(&lat, src)?;
            let b = load_presheaf(&lat, dst)?;
            let count = enumerate_nat_trans(&a, &b, &lim).map_err(failed)?.len();
            Ok(Report::new(
                true,
                format!("{count} natural transformations\n"),
                json!({ "count": count }),
            ))
        }
    }
}

fn members(lat: &Lattice, u: Open) -> Vec<String> {
    u.members().map(|l| lat.name(l).to_string()).collect()
}

// check

fn check_cmd(opts: &Opts, file: &Path, ty: Option<&str>) -> Result<Report> {
    let p = match load_program(opts, file) {
        Ok(p) => p,
        Err(CliError::Failed(msg)) => {
            let diag = json!({ "severity": "error", "kind": "ParseError", "message": msg });
            return Ok(Report::new(
                false,
                format!("error: {msg}\n"),
                json!({ "ok": false, "diagnostics": [diag] }),
            ));
        }
        Err(e) => return Err(e),
    };
    let lat = &p.lattice;
    let result = match ty {
        Some(t) => {
            let expected = parse_type(t, lat).map_err(usage)?;
            check_closed(lat, &p.term, &expected, opts.strict).map(|w| (expected, w))
        }
        None => infer_closed(lat, &p.term, opts.strict),
    };
    Ok(match result {
        Ok((ty, warnings)) => {
            let shown = print_type(&ty, lat);
            let mut out = format!("ok: {shown}\n");
            for w in &warnings {
                out.push_str(&format!("warning: {w}\n"));
            }
            let diags: Vec<Json> = warnings.iter().map(|w| diagnostic("warning", w)).collect();
            Report::new(
                true,
                out,
                json!({ "ok": true, "type": shown, "diagnostics": diags }),
            )
        }
        Err(e) => Report::new(
            false,
            format!("error: {e}\n"),
            json!({ "ok": false, "diagnostics": [diagnostic("error", &e)] }),
        ),
    })
}

fn diagnostic(severity: &str, e: &TypeError) -> Json {
    let mut v = serde_json::to_value(e).expect("type errors serialize");
    if let Json::Object(m) = &mut v {
        m.insert("severity".into(), json!(severity));
        m.insert("message".into(), json!(e.to_string()));
    }
    v
}

// eval and support

fn outcome_json(lat: &Lattice, stage: &str, run: &Run) -> Json {
    let (outcome, value) = match &run.outcome {
        Outcome::Converged(v) => ("converged", json!(v.display(lat).to_string())),
        Outcome::OutOfFuel => ("out_of_fuel", Json::Null),
    };
    json!({ "stage": stage, "outcome": outcome, "value": value, "fuel_used": run.fuel_used })
}

fn outcome_word(o: &Outcome) -> &'static str {
    match o {
        Outcome::Converged(_) => "converged",
        Outcome::OutOfFuel => "out of fuel",
    }
}

fn eval_cmd(opts: &Opts, file: &Path, operational: bool) -> Result<Report> {
    let p = load_program(opts, file)?;
    typecheck(opts, &p)?;
    let lat = &p.lattice;
    let fuel = fuel(opts)?;
    let (stage, run) = if operational {
        let run = eval_operational(lat, &p.term, fuel).map_err(failed)?;
        ("operational".to_string(), run)
    } else {
        let k = match &opts.level {
            Some(name) => level(lat, name)?,
            None => lat.top(),
        };
        let run = eval_stage_with(
            lat,
            &p.term,
            k,
            StageOptions {
                fuel,
                trace: opts.trace,
            },
        )
        .map_err(failed)?;
        (lat.name(k).to_string(), run)
    };
    let mut js = outcome_json(lat, &stage, &run);
    let value = js["value"].as_str().unwrap_or("-").to_string();
    let mut out = format!(
        "stage      {stage}\noutcome    {}\nvalue      {value}\nfuel_used  {}\n",
        outcome_word(&run.outcome),
        run.fuel_used
    );
    if opts.trace {
        js["trace"] = json!(run.trace);
        out.push_str("trace\n");
        for line in &run.trace {
            out.push_str(&format!("  {line}\n"));
        }
    }
    Ok(Report::new(true, out, js))
}

fn support_rows(lat: &Lattice, t: &Tm, fuel: u64) -> Result<(Open, Vec<Json>)> {
    let s = support(lat, t, fuel).map_err(failed)?;
    let rows = s
        .stages
        .iter()
        .zip(&s.outcomes)
        .map(|(r, o)| {
            let value = o.converged().map(|v| v.display(lat).to_string());
            json!({ "stage": r.stage, "converged": r.converged, "value": value, "fuel_used": r.fuel_used })
        })
        .collect();
    Ok((s.open, rows))
}

fn support_cmd(opts: &Opts, file: &Path) -> Result<Report> {
    let p = load_program(opts, file)?;
    typecheck(opts, &p)?;
    let lat = &p.lattice;
    let (open, rows) = support_rows(lat, &p.term, fuel(opts)?)?;
    let full = open == lat.full_open();
    let mut out = format!(
        "{:<8} {:<12} {:<24} fuel_used\n",
        "stage", "outcome", "value"
    );
    for r in &rows {
        out.push_str(&format!(
            "{:<8} {:<12} {:<24} {}\n",
            r["stage"].as_str().unwrap_or(""),
            if r["converged"] == json!(true) {
                "converged"
            } else {
                "out of fuel"
            },
            r["value"].as_str().unwrap_or("-"),
            r["fuel_used"],
        ));
    }
    out.push_str(&format!(
        "support {}{}\n",
        lat.show_open(open),
        if full { " (full)" } else { "" }
    ));
    Ok(Report::new(
        true,
        out,
        json!({ "support": members(lat, open), "full": full, "stages": rows }),
    ))
}

// harness

fn gen_config(opts: &Opts, h: &HarnessArgs) -> Result<GenConfig> {
    let mut cfg = GenConfig::new(default_lattice(opts)?);
    cfg.seed = seed(h)?;
    cfg.trials = h.trials;
    cfg.size = h.size;
    cfg.fuel = fuel(opts)?;
    if let Some(name) = &opts.level {
        cfg.levels = vec![level(&cfg.lattice, name)?];
    }
    cfg.validate()?;
    Ok(cfg)
}

fn suite(cfg: &GenConfig, verdicts: Vec<Verdict>) -> SuiteReport {
    SuiteReport {
        banner: BANNER.to_string(),
        seed: cfg.seed,
        lattice: cfg.lattice.names().join(","),
        passed: verdicts.iter().all(|v| v.passed),
        verdicts,
    }
}

fn suite_report(r: SuiteReport) -> Report {
    let json = serde_json::to_value(&r).expect("reports serialize");
    Report::new(r.passed, r.render(), json)
}

fn ni_cmd(opts: &Opts, h: &HarnessArgs) -> Result<Report> {
    let cfg = gen_config(opts, h)?;
    let mut verdicts = Vec::new();
    for &l in &cfg.levels {
        verdicts.push(check_tini(&cfg, l)?);
        verdicts.push(check_constancy(&cfg, l)?);
    }
    Ok(suite_report(suite(&cfg, verdicts)))
}

fn corpus(opts: &Opts, dir: Option<&Path>, cfg: &GenConfig) -> Result<Vec<CorpusEntry>> {
    match dir {
        Some(d) => Ok(load_corpus(d, &cfg.lattice)?),
        None if opts.lattice.is_some() => Ok(Vec::new()),
        None => Ok(bundled::corpus()),
    }
}

fn adequacy_cmd(opts: &Opts, h: &HarnessArgs, dir: Option<&Path>) -> Result<Report> {
    let cfg = gen_config(opts, h)?;
    let programs = corpus(opts, dir, &cfg)?;
    let v = check_adequacy(&cfg, &programs)?;
    Ok(suite_report(suite(&cfg, vec![v])))
}

fn fuzz_cmd(opts: &Opts, h: &HarnessArgs, dir: Option<&Path>) -> Result<Report> {
    let cfg = gen_config(opts, h)?;
    let programs = corpus(opts, dir, &cfg)?;
    Ok(suite_report(run_suite(&cfg, &programs)?))
}

// demo

fn demo_cmd(opts: &Opts) -> Result<Report> {
    let lat = bundled::chain4();
    let fuel = fuel(opts)?;
    let parse = |src: &str| parse_term(&read_program(src).body, &lat).map_err(failed);
    let parse_ty = |s: &str| parse_type(s, &lat).map_err(failed);

    let f_ok = check_closed(
        &lat,
        &*parse(bundled::INTRO_F)?,
        &parse_ty("(U (fn (seal M bool) (F (seal H bool))))")?,
        true,
    )
    .is_ok();
    let mirror = check_closed(
        &lat,
        &*parse(bundled::INTRO_F_MIRROR)?,
        &parse_ty("(U (fn (seal H bool) (F (seal M bool))))")?,
        true,
    );
    let mirror_rejected = matches!(mirror, Err(TypeError::NotSealed { .. }));
    let c_ok = check_closed(
        &lat,
        &*parse(bundled::C)?,
        &parse_ty("(U (fn (seal M bool) (F unit)))")?,
        true,
    )
    .is_ok();

    let cx = parse(bundled::CX)?;
    let cy = parse(bundled::CY)?;
    let (sx, rows_x) = support_rows(&lat, &cx, fuel)?;
    let (sy, rows_y) = support_rows(&lat, &cy, fuel)?;
    let op_y = eval_operational(&lat, &cy, fuel).map_err(failed)?;

    let cell = |r: &Json| {
        if r["converged"] == json!(true) {
            format!("converged {}", r["value"].as_str().unwrap_or(""))
        } else {
            "out of fuel".to_string()
        }
    };
    let mut out = String::new();
    out.push_str("c  = λu. tdcl M (unseal M u (b) (seal M (if b (ret ()) loop)))\n");
    out.push_str("x  = seal M tt     y = seal M ff\n\n");
    out.push_str(&format!("{:<6} {:<16} {:<16}\n", "stage", "c x", "c y"));
    for (rx, ry) in rows_x.iter().zip(&rows_y) {
        out.push_str(&format!(
            "{:<6} {:<16} {:<16}\n",
            rx["stage"].as_str().unwrap_or(""),
            cell(rx),
            cell(ry)
        ));
    }
    let full = |u: Open| if u == lat.full_open() { " (full)" } else { "" };
    out.push_str(&format!(
        "\nsupport(c x) = {}{}\n",
        lat.show_open(sx),
        full(sx)
    ));
    out.push_str(&format!(
        "support(c y) = {}{}\n",
        lat.show_open(sy),
        full(sy)
    ));
    out.push_str(&format!(
        "operational c y: {}\n",
        op_y.outcome.describe(&lat)
    ));
    out.push_str(&format!(
        "typechecker: intro f accepted={f_ok}, mirror rejected={mirror_rejected}, c accepted={c_ok}\n"
    ));

    let expected_y = lat.lower_closure_of_names(&["L", "M"]).map_err(failed)?;
    let ok = sx == lat.full_open() && sy == expected_y && f_ok && mirror_rejected && c_ok;
    Ok(Report::new(
        ok,
        out,
        json!({
            "lattice": lat.names(),
            "fuel": fuel,
            "cx": { "support": members(&lat, sx), "stages": rows_x },
            "cy": { "support": members(&lat, sy), "stages": rows_y },
            "operational_cy": outcome_json(&lat, "operational", &op_y),
            "typechecker": { "intro_f": f_ok, "mirror_rejected": mirror_rejected, "c": c_ok },
            "ok": ok,
        }),
    ))
}
