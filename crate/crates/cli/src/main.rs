//! `pcsim`: runs scenario files, complexity sweeps and property suites, and
//! decodes wire messages.
//!
//! Exit codes: 0 on success, 1 on I/O errors, 2 on usage, schema or decode
//! errors (with the offending field path), 3 on an invariant violation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use prefix_consensus::inspect::{decode_message, hex_dump};
use prefix_consensus::pc::Codec;
use prefix_consensus::runner::Outcome;
use prefix_consensus::scenario::{self, Protocol, Scenario, SchemaError};
use prefix_consensus::suites::{run_suite, Exec, Suite, SuiteConfig};
use prefix_consensus::sweep::sweep;

/// Environment variable naming the default artifact directory.
const OUT_ENV: &str = "PCSIM_OUT_DIR";

#[derive(Parser)]
#[command(name = "pcsim", version, about = "Prefix Consensus simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write its artifacts.
    Run(RunArgs),
    /// Run a template scenario for several party counts and fit growth exponents.
    Sweep(SweepArgs),
    /// Run a named property suite over generated scenarios.
    Check(CheckArgs),
    /// Decode a hex-encoded wire message.
    Decode(DecodeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CodecArg {
    Plain,
    Compact,
}

impl From<CodecArg> for Codec {
    fn from(c: CodecArg) -> Codec {
        match c {
            CodecArg::Plain => Codec::Plain,
            CodecArg::Compact => Codec::Compact,
        }
    }
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Artifact directory; falls back to `output.dir`, then $PCSIM_OUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the scenario codec.
    #[arg(long, value_enum)]
    codec: Option<CodecArg>,
    /// Record the full transcript.
    #[arg(long)]
    transcript: bool,
    /// Include hex wire bytes in transcript records (implies --transcript).
    #[arg(long)]
    wire: bool,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

#[derive(clap::Args)]
struct SweepArgs {
    /// Template scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Party counts to run.
    #[arg(long, value_delimiter = ',', default_value = "4,7,10")]
    n: Vec<usize>,
    /// Set the input capacity L to n for every run.
    #[arg(long)]
    l_equals_n: bool,
    /// Overrides the template codec.
    #[arg(long, value_enum)]
    codec: Option<CodecArg>,
    /// Overrides the template seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for `sweep.json`; falls back to $PCSIM_OUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

#[derive(clap::Args)]
struct CheckArgs {
    /// Suite name.
    #[arg(value_parser = parse_suite)]
    suite: Suite,
    /// Party counts, cycled over runs.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Fault bound (default: the largest each protocol tolerates).
    #[arg(long)]
    f: Option<usize>,
    /// Restrict to these protocols.
    #[arg(long, value_delimiter = ',', value_parser = parse_protocol)]
    protocol: Vec<Protocol>,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Slots per multi-slot run.
    #[arg(long)]
    slots: Option<u64>,
    /// Run on one thread.
    #[arg(long)]
    sequential: bool,
    /// Directory for `check.json` and a failing reproducer; falls back to
    /// $PCSIM_OUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

#[derive(clap::Args)]
struct DecodeArgs {
    /// Hex bytes (whitespace ignored).
    #[arg(required_unless_present = "file", conflicts_with = "file")]
    hex: Option<String>,
    /// File holding hex bytes.
    #[arg(long)]
    file: Option<PathBuf>,
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    Suite::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
        format!("unknown suite `{s}` (expected one of {})", names.join(", "))
    })
}

fn parse_protocol(s: &str) -> Result<Protocol, String> {
    Protocol::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| format!("unknown protocol `{s}`"))
}

/// Command failures mapped to exit codes.
enum Failure {
    Io(anyhow::Error),
    Schema(String),
    Invariant(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<SchemaError> for Failure {
    fn from(e: SchemaError) -> Self {
        Failure::Schema(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::Check(a) => cmd_check(a),
        Cmd::Decode(a) => cmd_decode(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Schema(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(3)
        }
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(scenario::parse(&text)?)
}

/// Flag, then scenario setting, then the environment.
fn out_dir(flag: Option<PathBuf>, file: Option<&str>) -> Option<PathBuf> {
    flag.or_else(|| file.map(PathBuf::from)).or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
}

fn write_json(dir: &Path, name: &str, value: &impl serde::Serialize) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let text = serde_json::to_string_pretty(value)?;
    let path = dir.join(name);
    std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let mut sc = load(&a.scenario)?;
    if let Some(s) = a.seed {
        sc.seed = s;
    }
    if let Some(c) = a.codec {
        sc.codec = c.into();
    }
    sc.output.transcript |= a.transcript || a.wire;
    sc.output.wire |= a.wire;
    let dir = out_dir(a.out, sc.output.dir.as_deref());
    let mut o = Outcome::of(sc.clone())?;
    if !o.violations.is_empty() && dir.is_some() && o.sim.transcript.is_none() {
        // Runs are deterministic, so a rerun records the failing transcript.
        sc.output.transcript = true;
        o = Outcome::of(sc.clone())?;
    }
    if let Some(d) = &dir {
        o.write_artifacts(d).with_context(|| format!("writing artifacts to {}", d.display()))?;
    }
    if let Some(v) = o.violations.first() {
        let party = v.party.map(|p| format!(" at party {p}")).unwrap_or_default();
        let pointer = match &dir {
            Some(d) => format!("transcript: {}", d.join("transcript.jsonl").display()),
            None => format!(
                "reproduce: pcsim run --scenario {} --seed {} --transcript --out <dir>",
                a.scenario.display(),
                sc.seed
            ),
        };
        return Err(Failure::Invariant(format!(
            "invariant violated: {}{party}: {}\n{} violation(s) in total\n{pointer}",
            v.property,
            v.detail,
            o.violations.len()
        )));
    }
    if !a.quiet {
        let m = o.metrics();
        println!("scenario  {}", if m.name.is_empty() { a.scenario.display().to_string() } else { m.name.clone() });
        println!("protocol  {} n={} f={} L={} codec={} seed={}", m.protocol, m.n, m.f, m.l, m.codec, m.seed);
        println!("network   {} messages, {} bytes, end time {}", m.messages, m.bytes, m.end_time);
        for (kind, span) in m.latency.iter().filter(|(k, _)| !k.starts_with("slot ")) {
            println!("latency   {kind}: first {} last {}", span.first, span.last);
        }
        if m.max_view > 0 {
            println!("views     max {}", m.max_view);
        }
        if !m.slots.is_empty() {
            println!("slots     {} audited, censored {:?}", m.slots.len(), m.censored_slots);
        }
        println!("hash      {}", m.transcript_hash);
        println!("checks    pass");
        if let Some(d) = &dir {
            println!("artifacts {}", d.display());
        }
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Failure> {
    let mut sc = load(&a.scenario)?;
    if let Some(c) = a.codec {
        sc.codec = c.into();
    }
    if let Some(s) = a.seed {
        sc.seed = s;
    }
    let r = sweep(&sc, &a.n, a.l_equals_n)?;
    if let Some(d) = out_dir(a.out, None) {
        write_json(&d, "sweep.json", &r)?;
    }
    if !a.quiet {
        println!("{:>4} {:>3} {:>4} {:>10} {:>12} {:>6}", "n", "f", "L", "messages", "bytes", "end");
        for row in &r.rows {
            println!(
                "{:>4} {:>3} {:>4} {:>10} {:>12} {:>6}",
                row.n, row.f, row.l, row.messages, row.bytes, row.end_time
            );
        }
        for (what, fit) in [("messages", r.message_exponent), ("bytes", r.byte_exponent)] {
            match fit {
                Some(f) => println!("exponent  {what}: {:.3} (r2 {:.4})", f.exponent, f.r2),
                None => println!("exponent  {what}: n/a"),
            }
        }
    }
    if let Some(row) = r.rows.iter().find(|row| row.violations > 0) {
        return Err(Failure::Invariant(format!(
            "invariant violated in the n={} run ({} violation(s)); reproduce with pcsim run",
            row.n, row.violations
        )));
    }
    Ok(())
}

fn cmd_check(a: CheckArgs) -> Result<(), Failure> {
    let mut cfg = SuiteConfig::new(a.suite, a.runs);
    if !a.n.is_empty() {
        cfg.ns = a.n;
    }
    cfg.f = a.f;
    if !a.protocol.is_empty() {
        cfg.protocols = Some(a.protocol);
    }
    cfg.seed = a.seed;
    if let Some(s) = a.slots {
        cfg.slots = s;
    }
    let exec = if a.sequential { Exec::Sequential } else { Exec::Parallel };
    let r = run_suite(&cfg, exec);
    let dir = out_dir(a.out, None);
    if let Some(d) = &dir {
        write_json(d, "check.json", &r)?;
    }
    if !a.quiet {
        println!("suite     {} ({} runs, {} fuzzed pre-GST)", r.suite.name(), r.runs, r.fuzzed);
        for (prop, count) in &r.properties {
            let verdict = if *count == 0 { "PASS".to_string() } else { format!("FAIL ({count})") };
            println!("{prop:<32} {verdict}");
        }
        if a.suite == Suite::Censorship {
            println!("max censored slots: {}", r.max_censored);
        }
    }
    if let Some(f) = &r.first_failure {
        let v = &f.violation;
        let mut msg = format!("invariant violated: {} (seed {}): {}", v.property, f.seed, v.detail);
        match &dir {
            Some(d) => {
                let path = d.join("failure.toml");
                std::fs::write(&path, &f.scenario).with_context(|| format!("writing {}", path.display()))?;
                msg.push_str(&format!("\nreproduce: pcsim run --scenario {}", path.display()));
            }
            None => msg.push_str(&format!("\nreproducer scenario:\n{}", f.scenario)),
        }
        return Err(Failure::Invariant(msg));
    }
    Ok(())
}

fn cmd_decode(a: DecodeArgs) -> Result<(), Failure> {
    let text = match (&a.hex, &a.file) {
        (_, Some(p)) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        (Some(h), None) => h.clone(),
        (None, None) => unreachable!("clap requires one source"),
    };
    let clean: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bytes = hex::decode(&clean).map_err(|e| Failure::Schema(format!("invalid hex: {e}")))?;
    let msg = decode_message(&bytes).map_err(|e| Failure::Schema(e.to_string()))?;
    println!("family {} ({} bytes)", msg.family(), bytes.len());
    print!("{}", hex_dump(&bytes));
    println!("{msg:#?}");
    Ok(())
}
