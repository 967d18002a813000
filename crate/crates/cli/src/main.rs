use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use trapforge::algebra::field::parse_rational;
use trapforge::algebra::linalg::IntMatrix;
use trapforge::algebra::poly::Poly;
use trapforge::algebra::scalar::Scalar;
use trapforge::beta::BetaSystem;
use trapforge::escape::{escape_rate_exact, escape_rate_monte_carlo, toral_escape_monte_carlo, EscapeRateEstimate, TorusBox};
use trapforge::hole::HoleSet;
use trapforge::measure::{AnyMeasure, MarkovMeasure};
use trapforge::subshift::{SubshiftDoc, SubshiftSpec};
use trapforge::survivor::{survivor_automaton, verify_trap, TrapStatus};
use trapforge::toral::{PisotToralSystem, PropertySOptions};
use trapforge::trap::{construct_large_hole, synthesize_trap, LagRule, LargeHoleOptions, TrapOptions};
use trapforge::word::Word;
use trapforge::{Error, Result};

#[derive(Parser)]
#[command(name = "trapforge", version, about = "Small traps, large holes and escape rates for subshifts and Pisot toral automorphisms")]
struct Cli {
    /// Artifact format for --out.
    #[arg(long, value_enum, global = true, default_value = "json")]
    format: Format,
    /// Write the artifact here; the summary line always goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Exact,
    MonteCarlo,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral radius and topological entropy of a subshift.
    ShiftEntropy {
        #[command(flatten)]
        shift: ShiftArg,
    },
    /// Words of length N in the language.
    ShiftLanguage {
        #[command(flatten)]
        shift: ShiftArg,
        #[arg(long)]
        n: usize,
    },
    /// Synthesize and verify a complete trap of measure below ε.
    TrapSynth {
        #[command(flatten)]
        shift: ShiftArg,
        #[command(flatten)]
        measure: MeasureArg,
        #[command(flatten)]
        trap: TrapArgs,
    },
    /// Decide whether a hole meets every orbit.
    TrapVerify {
        #[command(flatten)]
        shift: ShiftArg,
        /// Hole JSON (inline or path); a trap certificate is accepted too.
        #[arg(long)]
        hole: String,
    },
    /// Entropy of the survivor set of a hole.
    SurvivorEntropy {
        #[command(flatten)]
        shift: ShiftArg,
        #[arg(long)]
        hole: String,
    },
    /// Hole of measure above 1-ε whose survivor set contains an inner subshift or β-shift.
    #[command(group(ArgGroup::new("host").required(true).args(["shift", "matrix"])))]
    #[command(group(ArgGroup::new("inner_src").required(true).args(["inner", "inner_poly"])))]
    LargeHole {
        /// Host subshift (JSON, inline or path).
        #[arg(long)]
        shift: Option<String>,
        /// Host toral automorphism; the hole lives on its β-shift.
        #[arg(long, value_parser = parse_matrix, allow_hyphen_values = true)]
        matrix: Option<Matrix>,
        /// Inner subshift (JSON, inline or path).
        #[arg(long, requires = "shift")]
        inner: Option<String>,
        /// Minimal polynomial of the inner β, highest degree first.
        #[arg(long, value_parser = parse_poly, requires = "matrix", allow_hyphen_values = true)]
        inner_poly: Option<Coeffs>,
        #[command(flatten)]
        measure: MeasureArg,
        #[arg(long)]
        eps: String,
        /// Fixed word length n.
        #[arg(long)]
        word_length: Option<usize>,
        /// Depth of the finite containment check.
        #[arg(long, default_value_t = 20)]
        depth: usize,
        #[arg(long)]
        even_shift: bool,
    },
    /// Parry expansion d′ of 1 and the sequence d.
    BetaParry {
        /// Minimal polynomial, highest degree first: 1,-1,-1 is x²-x-1.
        #[arg(long, value_parser = parse_poly, allow_hyphen_values = true)]
        poly: Coeffs,
    },
    /// Graph presentation of the β-shift, loadable with --shift.
    BetaShift {
        #[arg(long, value_parser = parse_poly, allow_hyphen_values = true)]
        poly: Coeffs,
    },
    /// Classify an integer matrix and compute its homoclinic point.
    ToralBuild {
        #[command(flatten)]
        matrix: MatrixArg,
    },
    /// Project a β-admissible digit word to the torus.
    ToralProject {
        #[command(flatten)]
        matrix: MatrixArg,
        #[arg(long)]
        word: Word,
        /// Index of the first digit.
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        first: i64,
        /// Also check φ∘σ = T∘φ on the word over this many digits.
        #[arg(long)]
        residual: Option<usize>,
        /// Connect [word] to [chain-to] by a chain of touching cylinder images.
        #[arg(long)]
        chain_to: Option<Word>,
    },
    /// Survival masses m(E_n) and the escape rate of a hole.
    #[command(group(ArgGroup::new("system").required(true).args(["shift", "matrix"])))]
    #[command(group(ArgGroup::new("target").required(true).args(["hole", "boxes"])))]
    ToralEscape {
        #[arg(long)]
        shift: Option<String>,
        #[arg(long, value_parser = parse_matrix, allow_hyphen_values = true)]
        matrix: Option<Matrix>,
        /// Symbolic hole (on the β-shift when --matrix is given).
        #[arg(long)]
        hole: Option<String>,
        /// Union of boxes [{"lo":[..],"hi":[..]}] in the torus; uses Haar Monte Carlo.
        #[arg(long, requires = "matrix")]
        boxes: Option<String>,
        #[command(flatten)]
        measure: MeasureArg,
        #[arg(long, value_enum, default_value = "exact")]
        method: Method,
        #[arg(long, default_value_t = 40)]
        n_max: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Small connected hole meeting all but countably many orbits of the toral automorphism.
    PropertyS {
        #[command(flatten)]
        matrix: MatrixArg,
        #[command(flatten)]
        trap: TrapArgs,
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
        /// Free digits sampled on each side of a hole cylinder.
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long, default_value_t = 4096)]
        max_points: usize,
    },
}

#[derive(Args)]
struct ShiftArg {
    /// Subshift JSON, inline or a path.
    #[arg(long)]
    shift: String,
}

#[derive(Args)]
struct MatrixArg {
    /// Rows separated by ';' (1,1;1,0), a JSON array, or a toral-build artifact.
    #[arg(long, value_parser = parse_matrix, allow_hyphen_values = true)]
    matrix: Matrix,
}

#[derive(Args)]
struct MeasureArg {
    /// `parry`, or a measure JSON (inline or path).
    #[arg(long, default_value = "parry")]
    measure: String,
    /// Run in floating point even when exact arithmetic is available.
    #[arg(long)]
    float: bool,
}

#[derive(Args)]
struct TrapArgs {
    /// Target measure, e.g. 0.5 or 1/4.
    #[arg(long)]
    eps: String,
    #[arg(long, default_value = "1/2")]
    c: String,
    #[arg(long, value_enum, default_value = "aggregate")]
    lag_rule: LagArg,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    verify_each_step: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum LagArg {
    Aggregate,
    PerPair,
}

/// Integer coefficients, highest degree first.
#[derive(Clone)]
struct Coeffs(Vec<i64>);

#[derive(Clone)]
struct Matrix(IntMatrix);

fn parse_poly(s: &str) -> std::result::Result<Coeffs, String> {
    let c: Vec<i64> = s
        .split(',')
        .map(|t| t.trim().parse::<i64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    if c.len() < 2 || c[0] == 0 {
        return Err("need at least two coefficients with a nonzero leading one".into());
    }
    Ok(Coeffs(c))
}

fn parse_matrix(s: &str) -> std::result::Result<Matrix, String> {
    let t = s.trim();
    let m: IntMatrix = if t.starts_with('[') {
        serde_json::from_str(t).map_err(|e| e.to_string())?
    } else if t.contains(',') || t.contains(';') || t.parse::<i64>().is_ok() {
        t.split(';')
            .map(|r| r.split(',').map(|x| x.trim().parse::<i64>().map_err(|e| format!("{x:?}: {e}"))).collect())
            .collect::<std::result::Result<_, _>>()?
    } else {
        let text = fs::read_to_string(t).map_err(|e| format!("{t}: {e}"))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        serde_json::from_value(v.get("matrix").cloned().unwrap_or(v)).map_err(|e| e.to_string())?
    };
    if m.is_empty() || m.iter().any(|r| r.len() != m.len()) {
        return Err("matrix must be square".into());
    }
    Ok(Matrix(m))
}

fn read_source(s: &str) -> Result<String> {
    let t = s.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        return Ok(s.to_string());
    }
    fs::read_to_string(s).map_err(|e| Error::Malformed(format!("cannot read {s}: {e}")))
}

fn read_value(s: &str) -> Result<Value> {
    serde_json::from_str(&read_source(s)?).map_err(|e| Error::Malformed(e.to_string()))
}

/// Accepts a subshift document or anything carrying one under `graph` (a β-shift artifact).
fn load_shift(s: &str) -> Result<SubshiftSpec> {
    let v = read_value(s)?;
    let doc = match serde_json::from_value::<SubshiftDoc>(v.clone()) {
        Ok(doc) => doc,
        Err(e) => match v.get("min_poly").and_then(|_| v.get("graph")) {
            Some(g) => serde_json::from_value(g.clone()).map_err(|e| Error::Malformed(e.to_string()))?,
            None => return Err(Error::Malformed(e.to_string())),
        },
    };
    SubshiftSpec::from_doc(&doc)
}

/// Accepts a hole or anything carrying one under `hole` (certificates).
fn load_hole(s: &str) -> Result<HoleSet> {
    let v = read_value(s)?;
    let v = match v.get("hole") {
        Some(h) if v.get("cylinders").is_none() => h.clone(),
        _ => v,
    };
    HoleSet::from_json(&v.to_string())
}

fn load_measure(x: &SubshiftSpec, m: &MeasureArg) -> Result<AnyMeasure> {
    let mu = if m.measure == "parry" { AnyMeasure::parry(x)? } else { AnyMeasure::from_json(x, &read_source(&m.measure)?)? };
    Ok(if m.float { AnyMeasure::Float(mu.to_f64()) } else { mu })
}

fn scalar<S: Scalar>(s: &str) -> Result<S> {
    Ok(S::from_rational(&parse_rational(s)?))
}

fn trap_options<S: Scalar>(a: &TrapArgs) -> Result<TrapOptions<S>> {
    Ok(TrapOptions {
        c: scalar(&a.c)?,
        lag_rule: match a.lag_rule {
            LagArg::Aggregate => LagRule::Aggregate,
            LagArg::PerPair => LagRule::PerPair,
        },
        verify_each_step: a.verify_each_step,
        max_iterations: a.max_iterations,
    })
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn csv_rows<I, R>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Malformed(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Malformed(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

/// Summary line plus the artifact in the requested format (when one exists).
struct Outcome {
    summary: String,
    json: Value,
    csv: Option<String>,
}

impl Outcome {
    fn new(summary: String, json: Value) -> Self {
        Outcome { summary, json, csv: None }
    }

    fn with_csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }
}

fn trap_synth<S: Scalar>(mu: &MarkovMeasure<S>, a: &TrapArgs) -> Result<Outcome> {
    let cert = synthesize_trap(mu, &scalar(&a.eps)?, &trap_options(a)?)?;
    let summary = format!("trap μ={:.6} verified={}", cert.measure.to_f64(), cert.verification.is_trap());
    Ok(Outcome::new(summary, cert.to_json()).with_csv(cert.trace_csv()))
}

fn large_hole<S: Scalar>(mu: &MarkovMeasure<S>, y: &SubshiftSpec, eps: &str, opts: &LargeHoleOptions) -> Result<Outcome> {
    let cert = construct_large_hole(mu, y, &scalar(eps)?, opts)?;
    let summary = format!(
        "large hole μ={:.6} n={} K={} contained={}",
        cert.measure.to_f64(),
        cert.word_length,
        cert.lag,
        cert.contained
    );
    Ok(Outcome::new(summary, cert.to_json()))
}

fn toral_large_hole<S: Scalar>(
    sys: &PisotToralSystem,
    mu: &MarkovMeasure<S>,
    inner: &BetaSystem,
    eps: &str,
    opts: &LargeHoleOptions,
) -> Result<Outcome> {
    let h = sys.large_toral_hole(mu, inner, &scalar(eps)?, opts)?;
    let c = &h.certificate;
    let summary = format!(
        "large toral hole {} μ={:.6} n={} K={} even={}",
        h.classification,
        c.measure.to_f64(),
        c.word_length,
        c.lag,
        h.even_shift
    );
    Ok(Outcome::new(summary, h.to_json()))
}

fn property_s<S: Scalar>(sys: &PisotToralSystem, mu: &MarkovMeasure<S>, a: &TrapArgs, o: &PropertySOptions) -> Result<Outcome> {
    let p = sys.property_s(mu, &scalar(&a.eps)?, &trap_options(a)?, o)?;
    let mu_f = p.trap.as_ref().map_or(1.0, |t| t.measure.to_f64());
    let summary = format!(
        "property S {} μ={:.6} verified={} points={} tunnel={}",
        p.classification,
        mu_f,
        p.trap_verified,
        p.cloud.points.len(),
        p.tunnel.is_some()
    );
    let mut csv = p.cloud.to_csv();
    if let Some(m) = &p.mirrored {
        csv.extend(m.to_csv().lines().skip(1).flat_map(|l| [l, "\n"]));
    }
    Ok(Outcome::new(summary, p.to_json()).with_csv(csv))
}

fn escape_exact(mu: &AnyMeasure, hole: &HoleSet, n_max: usize) -> Result<EscapeRateEstimate> {
    match mu {
        AnyMeasure::Exact(m) => escape_rate_exact(m, hole, n_max),
        AnyMeasure::Float(m) => escape_rate_exact(m, hole, n_max),
    }
}

fn escape_summary(e: &EscapeRateEstimate) -> String {
    let last = e.masses.last().copied().unwrap_or(1.0);
    if e.is_infinite() {
        format!("escape rate inf (m(E_{}) = 0)", e.zero_from.unwrap_or(e.n_max))
    } else {
        format!("escape rate {:.9} δ={:.9} m(E_{})={:.6e}", e.rate, e.delta, e.n_max, last)
    }
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::ShiftEntropy { shift } => {
            let x = load_shift(&shift.shift)?;
            let (rho, h) = (x.spectral_radius(), x.entropy());
            let json = json!({
                "alphabet_size": x.alphabet_size(),
                "vertices": x.graph().num_vertices(),
                "edges": x.graph().num_edges(),
                "irreducible": x.is_irreducible(),
                "spectral_radius": rho,
                "entropy": h,
            });
            Ok(Outcome::new(format!("h = {h:.12} (λ = {rho:.12})"), json))
        }
        Command::ShiftLanguage { shift, n } => {
            let x = load_shift(&shift.shift)?;
            let lang = x.language(*n);
            let csv = csv_rows(&["word"], lang.words.iter().map(|w| [w.to_string()]))?;
            let json = serde_json::to_value(&lang).expect("serializable");
            Ok(Outcome::new(format!("|L_{n}| = {}", lang.words.len()), json).with_csv(csv))
        }
        Command::TrapSynth { shift, measure, trap } => {
            let x = load_shift(&shift.shift)?;
            match load_measure(&x, measure)? {
                AnyMeasure::Exact(m) => trap_synth(&m, trap),
                AnyMeasure::Float(m) => trap_synth(&m, trap),
            }
        }
        Command::TrapVerify { shift, hole } => {
            let x = load_shift(&shift.shift)?;
            let h = load_hole(hole)?;
            h.validate(&x)?;
            let v = verify_trap(&x, &h)?;
            let summary = match (v.status, &v.witness) {
                (TrapStatus::CompleteTrap, _) => "CompleteTrap".to_string(),
                (TrapStatus::NotTrap, Some(w)) => format!("NotTrap witness=({w})*"),
                (TrapStatus::NotTrap, None) => "NotTrap".to_string(),
            };
            Ok(Outcome::new(summary, serde_json::to_value(&v).expect("serializable")))
        }
        Command::SurvivorEntropy { shift, hole } => {
            let x = load_shift(&shift.shift)?;
            let h = load_hole(hole)?;
            h.validate(&x)?;
            let a = survivor_automaton(&x, &h);
            let e = a.entropy();
            let json = json!({
                "survivor_entropy": e,
                "host_entropy": x.entropy(),
                "empty": a.is_empty(),
                "window": a.window(),
                "automaton_vertices": a.graph().num_vertices(),
                "automaton_edges": a.graph().num_edges(),
                "shortest_cycle": a.shortest_cycle(),
            });
            Ok(Outcome::new(format!("h(J) = {e:.12}"), json))
        }
        Command::LargeHole { shift, matrix, inner, inner_poly, measure, eps, word_length, depth, even_shift } => {
            let opts = LargeHoleOptions { even_shift: *even_shift, word_length: *word_length, depth: *depth, ..Default::default() };
            match (shift, matrix, inner, inner_poly) {
                (Some(s), None, Some(i), None) => {
                    let x = load_shift(s)?;
                    let y = load_shift(i)?;
                    match load_measure(&x, measure)? {
                        AnyMeasure::Exact(m) => large_hole(&m, &y, eps, &opts),
                        AnyMeasure::Float(m) => large_hole(&m, &y, eps, &opts),
                    }
                }
                (None, Some(mat), None, Some(p)) => {
                    let sys = PisotToralSystem::new(mat.0.clone())?;
                    let inner = BetaSystem::new(&Poly::from_i64_desc(&p.0))?;
                    match load_measure(sys.beta().shift(), measure)? {
                        AnyMeasure::Exact(m) => toral_large_hole(&sys, &m, &inner, eps, &opts),
                        AnyMeasure::Float(m) => toral_large_hole(&sys, &m, &inner, eps, &opts),
                    }
                }
                _ => Err(Error::InvalidParameter("use --shift with --inner, or --matrix with --inner-poly".into())),
            }
        }
        Command::BetaParry { poly } => {
            let b = BetaSystem::from_coeffs_desc(&poly.0)?;
            let json = serde_json::to_value(b.to_doc()).expect("serializable");
            Ok(Outcome::new(b.summary(), json))
        }
        Command::BetaShift { poly } => {
            let b = BetaSystem::from_coeffs_desc(&poly.0)?;
            let x = b.shift();
            let summary = format!(
                "X_β: {} states, h = {:.12}, log β = {:.12}, ℓ = {}",
                x.graph().num_vertices(),
                x.entropy(),
                b.beta_f64().ln(),
                b.ell()
            );
            Ok(Outcome::new(summary, serde_json::to_value(x.to_doc()).expect("serializable")))
        }
        Command::ToralBuild { matrix } => {
            let sys = PisotToralSystem::new(matrix.matrix.0.clone())?;
            let summary = format!(
                "{} β = {:.12} t = [{}]",
                sys.classification(),
                sys.beta().beta_f64(),
                sys.homoclinic().iter().map(|x| format!("{x:.12}")).collect::<Vec<_>>().join(", ")
            );
            Ok(Outcome::new(summary, serde_json::to_value(sys.to_doc()).expect("serializable")))
        }
        Command::ToralProject { matrix, word, first, residual, chain_to } => {
            let sys = PisotToralSystem::new(matrix.matrix.0.clone())?;
            if !sys.beta().is_admissible(&word.0) {
                return Err(Error::InadmissibleWord(word.to_string()));
            }
            let p = sys.phi_project(&word.0, *first);
            let mut json = json!({ "word": word, "first": first, "coords": p.coords, "tail": p.tail });
            let mut summary = format!(
                "φ_t = [{}] ± {:.3e}",
                p.coords.iter().map(|x| format!("{x:.12}")).collect::<Vec<_>>().join(", "),
                p.tail
            );
            if let Some(n) = residual {
                let r = sys.semiconjugacy_residual(&word.0, *first, *n)?;
                summary.push_str(&format!(" residual={:.3e} holds={}", r.distance, r.holds()));
                json["residual"] = serde_json::to_value(r).expect("serializable");
            }
            if let Some(b) = chain_to {
                let c = sys.chain_connect(word, b)?;
                summary.push_str(&format!(" chain={} certified={}", c.cylinders.len(), c.certified()));
                json["chain"] = serde_json::to_value(&c).expect("serializable");
            }
            let row: Vec<String> = p.coords.iter().chain([&p.tail]).map(|x| format!("{x:.17e}")).collect();
            let header: Vec<String> = (0..p.coords.len()).map(|i| format!("x{i}")).chain(["tail".into()]).collect();
            let csv = csv_rows(&header.iter().map(String::as_str).collect::<Vec<_>>(), [row])?;
            Ok(Outcome::new(summary, json).with_csv(csv))
        }
        Command::ToralEscape { shift, matrix, hole, boxes, measure, method, n_max, trials, seed } => {
            let e = if let Some(b) = boxes {
                let sys = PisotToralSystem::new(matrix.clone().expect("required by clap").0)?;
                let boxes: Vec<TorusBox> = serde_json::from_value(read_value(b)?).map_err(|e| Error::Malformed(e.to_string()))?;
                toral_escape_monte_carlo(&sys, &boxes, *n_max, *trials, *seed)?
            } else {
                let x = match (shift, matrix) {
                    (Some(s), _) => load_shift(s)?,
                    (None, Some(m)) => PisotToralSystem::new(m.0.clone())?.beta().shift().clone(),
                    (None, None) => unreachable!("required by clap"),
                };
                let h = load_hole(hole.as_deref().expect("required by clap"))?;
                h.validate(&x)?;
                let mu = load_measure(&x, measure)?;
                match method {
                    Method::Exact => escape_exact(&mu, &h, *n_max)?,
                    Method::MonteCarlo => escape_rate_monte_carlo(&mu.to_f64(), &h, *n_max, *trials, *seed)?,
                }
            };
            let json = serde_json::to_value(&e).expect("serializable");
            Ok(Outcome::new(escape_summary(&e), json).with_csv(e.to_csv()))
        }
        Command::PropertyS { matrix, trap, delta, depth, max_points } => {
            let sys = PisotToralSystem::new(matrix.matrix.0.clone())?;
            let o = PropertySOptions { delta: *delta, sample_depth: *depth, max_points: *max_points };
            match AnyMeasure::parry(sys.beta().shift())? {
                AnyMeasure::Exact(m) => property_s(&sys, &m, trap, &o),
                AnyMeasure::Float(m) => property_s(&sys, &m, trap, &o),
            }
        }
    }
}

fn write_artifact(path: &Path, text: &str) -> std::result::Result<(), String> {
    fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn init_threads() {
    if let Some(n) = std::env::var("TRAPFORGE_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn fail(code: &str, message: &str) -> ExitCode {
    eprintln!("{}", json!({ "error": code, "message": message }));
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    let outcome = match run(&cli) {
        Ok(o) => o,
        Err(e) => return fail(e.code(), &e.to_string()),
    };
    if let Some(path) = &cli.out {
        let text = match cli.format {
            Format::Json => pretty(&outcome.json),
            Format::Csv => match &outcome.csv {
                Some(c) => c.clone(),
                None => return fail("InvalidParameter", "this command has no CSV artifact"),
            },
        };
        if let Err(m) = write_artifact(path, &text) {
            return fail("Io", &m);
        }
    }
    println!("{}", outcome.summary);
    ExitCode::SUCCESS
}
