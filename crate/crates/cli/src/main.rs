use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use chaoslab::manifest::{self, RunManifest};
use chaoslab::{execute, parse_and_validate, report, Outputs, EXIT_STRICT, EXIT_VALIDATION};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chaoslab", version, about = "Mean-field particle experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a spec and write its artifacts and manifest.
    Run {
        #[arg(long)]
        spec: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Exit with status 4 when a hard check fails.
        #[arg(long)]
        strict: bool,
        /// Output directory (overrides the spec).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed (overrides the spec).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a spec without running it.
    Validate {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Render JSON reports as tables.
    Report {
        /// Directory whose JSON reports to render.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Individual report files.
        files: Vec<PathBuf>,
    },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn read_spec(path: &PathBuf) -> Result<String, ExitCode> {
    fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        code(EXIT_VALIDATION)
    })
}

fn print_diagnostics(d: &chaoslab::Diagnostics) {
    for e in &d.errors {
        eprintln!("error: {e}");
    }
    for w in &d.warnings {
        eprintln!("warning: {w}");
    }
}

fn run(spec_path: PathBuf, threads: Option<usize>, strict: bool, out: Option<PathBuf>, seed: Option<u64>) -> ExitCode {
    let text = match read_spec(&spec_path) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let (spec, diag) = parse_and_validate(&text);
    print_diagnostics(&diag);
    let Some(mut spec) = spec.filter(|_| diag.is_ok()) else {
        return code(EXIT_VALIDATION);
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(k) = threads {
        if k == 0 {
            eprintln!("error: --threads must be positive");
            return code(EXIT_VALIDATION);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: thread pool: {e}");
            return code(1);
        }
    }
    let dir = out.or(spec.output.clone().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    let mut outputs = match Outputs::create(&dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: cannot create {}: {e}", dir.display());
            return code(1);
        }
    };
    let start = Instant::now();
    let result = execute(&spec, &mut outputs);
    let elapsed = start.elapsed().as_secs_f64();
    let (exit, error, strict_failures) = match &result {
        Ok(o) => {
            for line in &o.summary {
                println!("{line}");
            }
            for f in &o.strict_failures {
                eprintln!("check failed: {f}");
            }
            let c = if strict && !o.strict_failures.is_empty() { EXIT_STRICT } else { 0 };
            (c, None, o.strict_failures.clone())
        }
        Err(e) => {
            eprintln!("error: {e}");
            (e.exit_code(), Some(e.to_string()), vec![])
        }
    };
    let files = match manifest::entries(&outputs.dir, &outputs.files) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: checksums: {e}");
            return code(1);
        }
    };
    let m = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        spec_sha256: manifest::sha256_hex(text.as_bytes()),
        seed: spec.seed,
        wall_clock_seconds: elapsed,
        exit_code: exit,
        warnings: diag.warnings.clone(),
        error,
        strict_failures,
        files,
    };
    if let Err(e) = manifest::write(&outputs.dir, &m) {
        eprintln!("error: manifest: {e}");
        return code(1);
    }
    println!("wrote {} files to {}", outputs.files.len() + 1, outputs.dir.display());
    code(exit)
}

fn validate(spec_path: PathBuf) -> ExitCode {
    let text = match read_spec(&spec_path) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let (_, d) = parse_and_validate(&text);
    print_diagnostics(&d);
    if d.is_ok() {
        if d.warnings.is_empty() {
            println!("ok");
        }
        code(0)
    } else {
        code(EXIT_VALIDATION)
    }
}

fn report_cmd(out: Option<PathBuf>, mut files: Vec<PathBuf>) -> ExitCode {
    if let Some(dir) = out {
        match fs::read_dir(&dir) {
            Ok(rd) => {
                let mut found: Vec<PathBuf> = rd
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| {
                        p.extension().is_some_and(|x| x == "json")
                            && p.file_name().is_some_and(|n| n != manifest::MANIFEST && n != "spec.json")
                    })
                    .collect();
                found.sort();
                files.extend(found);
            }
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", dir.display());
                return code(1);
            }
        }
    }
    if files.is_empty() {
        eprintln!("error: nothing to report");
        return code(EXIT_VALIDATION);
    }
    for f in files {
        let parsed = fs::read_to_string(&f)
            .map_err(|e| e.to_string())
            .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).map_err(|e| e.to_string()));
        match parsed {
            Ok(v) => {
                println!("== {}", f.display());
                print!("{}", report::render(&v));
            }
            Err(e) => {
                eprintln!("error: {}: {e}", f.display());
                return code(1);
            }
        }
    }
    code(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { spec, threads, strict, out, seed } => run(spec, threads, strict, out, seed),
        Command::Validate { spec } => validate(spec),
        Command::Report { out, files } => report_cmd(out, files),
    }
}
