use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use galefan::analysis::{analyze, parse_matrix_file, render_section_svg, AnalysisReport, AnalyzeOptions, MatrixKind, Outcome};
use galefan::quotient::PinnedTransforms;
use galefan::secfan::EnumerationLimits;

#[derive(Parser)]
#[command(name = "galefan", version, about = "Gale duality and secondary fans of Q-factorial complete toric varieties")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline on a fan or weight matrix file.
    Analyze {
        file: PathBuf,
        /// Matrix kind; overrides a `# kind=` header.
        #[arg(long, value_parser = ["fan", "weight"])]
        kind: Option<String>,
        /// Write the JSON report here.
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
        /// Write the r = 3 section of the secondary fan here.
        #[arg(long, value_name = "PATH")]
        svg: Option<PathBuf>,
        /// Enumerate every simplicial complete fan on the columns of V.
        #[arg(long)]
        enumerate_complete: bool,
        /// Cap on candidate maximal cones for the enumeration.
        #[arg(long, value_name = "N")]
        max_candidates: Option<usize>,
        /// JSON file with pinned transforms (U_V, U, mu, nu, W, U_G) for the torsion trace.
        #[arg(long, value_name = "PATH")]
        pin_transforms: Option<PathBuf>,
        /// Record per-stage timings in the report (makes it non-reproducible).
        #[arg(long)]
        timings: bool,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn summary(rep: &AnalysisReport) -> String {
    let mut s = String::new();
    let f = &rep.flags;
    let _ = writeln!(s, "n = {}, r = {}, F: {}, CF: {}, reduced: {}", f.n, f.r, f.fan.is_f, f.fan.is_cf, f.fan.is_reduced);
    let _ = writeln!(s, "Q = {}", rep.gale_dual.q);
    let _ = writeln!(s, "chambers in Mov: {} (outside: {})", rep.mov.chambers_in_mov, rep.mov.chambers_outside_mov);
    for c in &rep.chambers {
        let pcs: Vec<String> = c
            .primitive_collections
            .iter()
            .map(|p| {
                let idx: Vec<String> = p.p.iter().map(|i| (i + 1).to_string()).collect();
                format!("{{{}}}{}", idx.join(","), if p.is_nef { "*" } else { "" })
            })
            .collect();
        let _ = writeln!(
            s,
            "  {}: {:?}, {} cones, delta {}, Q-Fano {}, collections {}",
            c.label,
            c.border.kind,
            c.fan.maximal_cones.len(),
            c.singularity.delta,
            c.q_fano,
            pcs.join(" ")
        );
    }
    if let Some(cf) = &rep.complete_fans {
        let _ = writeln!(s, "complete fans: {} ({} projective)", cf.total, cf.projective);
    }
    for d in &rep.decompositions.per_chamber {
        if let Outcome::Ok(t) = &d.tower {
            let ws: Vec<String> =
                t.iter().map(|b| format!("W={:?}", b.weights.iter().map(|x| x.to_string()).collect::<Vec<_>>())).collect();
            let _ = writeln!(s, "  {} tower: {}", d.label, ws.join(" / "));
        }
    }
    let e = &rep.decompositions.wptb_equivalence;
    match &e.reason {
        None => {
            let _ = writeln!(s, "flip-equivalent to a toric cover of a WPTB via {}", e.maxbord_chambers.join(", "));
        }
        Some(r) => {
            let _ = writeln!(s, "not flip-equivalent to a toric cover of a WPTB: {r}");
        }
    }
    if let Some(q) = &rep.quotient {
        let t: Vec<String> = q.torsion_factors.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "torsion factors: ({}), Gamma = {}", t.join(", "), q.gamma);
    }
    s
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Analyze { file, kind, json, svg, enumerate_complete, max_candidates, pin_transforms, timings } =
        cli.command;
    let parsed = match parse_matrix_file(&file) {
        Ok(p) => p,
        Err(e) => return fail(2, format!("parse: {e}")),
    };
    let kind = match kind.map(|k| k.parse::<MatrixKind>()).transpose() {
        Ok(k) => k,
        Err(e) => return fail(2, e),
    };
    let pins = match pin_transforms {
        None => None,
        Some(p) => match std::fs::read_to_string(&p).map_err(|e| e.to_string()).and_then(|t| {
            PinnedTransforms::from_json(&t).map_err(|e| e.to_string())
        }) {
            Ok(x) => Some(x),
            Err(e) => return fail(2, format!("pinned transforms {}: {e}", p.display())),
        },
    };
    let mut limits = EnumerationLimits::default();
    if let Some(n) = max_candidates {
        limits.max_candidates = n;
    }
    let opts = AnalyzeOptions { kind, enumerate_complete, limits, pins, record_timings: timings };
    let report = match analyze(&parsed, &opts) {
        Ok(r) => r,
        Err(e) => return fail(e.exit_code() as u8, e),
    };
    if let Some(path) = json {
        if let Err(e) = std::fs::write(&path, report.to_json() + "\n") {
            return fail(1, format!("{}: {e}", path.display()));
        }
    }
    if let Some(path) = svg {
        match render_section_svg(&report) {
            Ok(text) => {
                if let Err(e) = std::fs::write(&path, text) {
                    return fail(1, format!("{}: {e}", path.display()));
                }
            }
            Err(e) => return fail(2, format!("svg: {e}")),
        }
    }
    print!("{}", summary(&report));
    ExitCode::SUCCESS
}
