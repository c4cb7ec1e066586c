use std::fmt::Write as _;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use meanly::cesaro::{cesaro_trace_with_budget, Backend, Schedule, DEFAULT_LOOP_BUDGET};
use meanly::chaostats::{classify_pair, distributional_profile, log_grid, orbit_norms, ClassifyParams};
use meanly::detect::{acb_probe, basis_candidates, block_top_candidates, construct_irregular_vector, verify_certificate};
use meanly::gallery::{gallery_defaults, gallery_list, gallery_run, ExperimentConfig};
use meanly::literal::{parse_operator, parse_schedule, parse_semigroup, parse_step, parse_vector};
use meanly::semigroup::{acb_integral_check, cesaro_integral, sandwich_check, semigroup_norm_tol};
use meanly::shiftops::{ShiftOperator, SparseVec};
use meanly::{BigIndex, Error};

#[derive(Parser)]
#[command(name = "meanly", version, about = "Cesàro means, chaos probes and semigroup checks for weighted shifts")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Out {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Loop,
    Segment,
    Auto,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Loop => Backend::Loop,
            BackendArg::Segment => Backend::Segment,
            BackendArg::Auto => Backend::Auto,
        }
    }
}

#[derive(Args)]
struct OpArgs {
    /// harmonic | block | identity | const:c | explicit:w,… | forward:<op> |
    /// tbilcami:k=K[,flat] | tbilcami-back:k=K | profile:<file.json> | <op>+I
    #[arg(long)]
    operator: String,
    /// Exponent of the sequence space.
    #[arg(long, default_value_t = 1.0)]
    p: f64,
}

impl OpArgs {
    fn build(&self) -> Result<ShiftOperator, Error> {
        let load = |path: &str| std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{path}: {e}")));
        parse_operator(&self.operator, self.p, &load)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Orbit norms |T^j x| for j = 1..horizon.
    Orbit {
        #[command(flatten)]
        op: OpArgs,
        /// e:i | sum:i=v,… | blockspecial:n | <part>|<part>
        #[arg(long)]
        vector: String,
        #[arg(long)]
        horizon: u64,
        #[arg(long, value_enum, default_value = "csv")]
        out: Out,
    },
    /// Cesàro means A_N(x) along a schedule.
    Cesaro {
        #[command(flatten)]
        op: OpArgs,
        #[arg(long)]
        vector: String,
        /// geom:a..b[:f] | list:n,… | dips:k,… | hills:k,…
        #[arg(long)]
        schedule: String,
        #[arg(long, value_enum, default_value = "auto")]
        backend: BackendArg,
        #[arg(long, default_value_t = DEFAULT_LOOP_BUDGET)]
        budget: u64,
        #[arg(long, value_enum, default_value = "csv")]
        out: Out,
    },
    /// Counting densities of {j : |T^j (x - y)| < delta}.
    Density {
        #[command(flatten)]
        op: OpArgs,
        #[arg(long)]
        vector: String,
        #[arg(long, default_value = "0")]
        other: String,
        #[arg(long)]
        horizon: u64,
        /// Start of the window for lower/upper estimates (default horizon/10).
        #[arg(long)]
        tail: Option<u64>,
        /// Comma separated thresholds; CSV output uses the first one.
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        deltas: Vec<f64>,
        #[arg(long, value_enum, default_value = "csv")]
        out: Out,
    },
    /// Finite-horizon verdicts for the pair (x, y).
    Classify {
        #[command(flatten)]
        op: OpArgs,
        #[arg(long)]
        vector: String,
        #[arg(long, default_value = "0")]
        other: String,
        #[arg(long)]
        horizon: String,
        #[arg(long)]
        schedule: Option<String>,
        #[arg(long)]
        tail: Option<String>,
        #[arg(long, value_delimiter = ',')]
        deltas: Option<Vec<f64>>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, value_enum, default_value = "auto")]
        backend: BackendArg,
    },
    /// Largest A_N(x)/|x| over given or sampled vectors.
    AcbProbe {
        #[command(flatten)]
        op: OpArgs,
        /// Repeatable.
        #[arg(long)]
        vector: Vec<String>,
        /// Number of random sparse samples in addition to --vector.
        #[arg(long, default_value_t = 0)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest index used by random samples.
        #[arg(long, default_value_t = 1000)]
        max_index: i64,
        #[arg(long)]
        schedule: String,
        #[arg(long, default_value_t = 1.0)]
        c0: f64,
    },
    /// Staged construction of an irregular vector; prints the certificate.
    ConstructIrregular {
        #[command(flatten)]
        op: OpArgs,
        /// Defaults to the operator norm bound.
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, default_value_t = 2)]
        stages: u64,
        #[arg(long, default_value_t = 1_000_000)]
        budget: u64,
        #[arg(long, value_enum, default_value = "basis")]
        candidates: CandidateSet,
        #[arg(long, default_value_t = 100_000)]
        max_candidates: u64,
        #[arg(long, default_value_t = 1_000_000)]
        n_cap: u64,
    },
    /// Norms and Cesàro integrals of translation semigroups on step functions.
    Semigroup {
        /// translation:<weight> | mult:gamma=g | l1 | mixing:eps=e
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        /// step:[label=]value@[a,b];…
        #[arg(long, default_value = "step:1@[1,2]")]
        f: String,
        #[arg(long, value_enum, default_value = "cesaro")]
        mode: SemigroupMode,
        /// Times for `norm`, horizons b for the other modes.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        at: Vec<f64>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Step s for `sandwich`.
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        /// ε for `acb` (the family is rebuilt with γ = (1-ε)/p).
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
    },
    /// Named reproductions.
    Gallery {
        #[command(subcommand)]
        cmd: GalleryCmd,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CandidateSet {
    Basis,
    BlockTop,
}

#[derive(Clone, Copy, ValueEnum)]
enum SemigroupMode {
    Norm,
    Cesaro,
    Acb,
    Sandwich,
}

#[derive(Subcommand)]
enum GalleryCmd {
    /// Entry names with their default parameters.
    List,
    /// Runs an entry; exits 1 if a check fails.
    Run {
        name: String,
        /// JSON config file ({"entry": …, "params": {…}}); its params are applied first.
        #[arg(long)]
        config: Option<String>,
        /// key=<json value>, repeatable.
        #[arg(long = "set")]
        set: Vec<String>,
        /// Add per-check runtimes (reports are no longer byte-reproducible).
        #[arg(long)]
        timings: bool,
    },
}

enum Outcome {
    Ok,
    ChecksFailed,
}

fn fail(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn big(s: &str) -> Result<BigIndex, Error> {
    s.parse().map_err(|_| fail(format!("not an integer: {s}")))
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn random_vector(rng: &mut ChaCha8Rng, max_index: i64) -> SparseVec {
    let n = rng.gen_range(1..=4);
    let pairs: Vec<(i64, f64)> =
        (0..n).map(|_| (rng.gen_range(1..=max_index), rng.gen_range(-1.0..1.0))).collect();
    let v = SparseVec::from_pairs(&pairs);
    if v.is_zero() {
        SparseVec::basis(1)
    } else {
        v
    }
}

fn run(cmd: Cmd) -> Result<Outcome, Error> {
    match cmd {
        Cmd::Orbit { op, vector, horizon, out } => {
            let t = op.build()?;
            let x = parse_vector(&vector)?;
            let mut walk = t.orbit_walk(&x)?;
            let mut rows = Vec::new();
            for j in 1..=horizon {
                rows.push((j, walk.next_norm()?));
            }
            match out {
                Out::Csv => {
                    let mut s = String::from("j,norm,log10_norm\n");
                    for (j, v) in rows {
                        writeln!(s, "{j},{:e},{}", v.to_f64(), v.log10()).unwrap();
                    }
                    print!("{s}");
                }
                Out::Json => print_json(&rows.iter().map(|(j, v)| json!({"j": j, "norm": v.to_f64()})).collect::<Vec<_>>()),
            }
        }
        Cmd::Cesaro { op, vector, schedule, backend, budget, out } => {
            let t = op.build()?;
            let x = parse_vector(&vector)?;
            let sch = parse_schedule(&schedule, &t)?;
            let series = t.orbit_norm_series(&x, sch.last())?;
            let tr = cesaro_trace_with_budget(&series, &sch, backend.into(), budget)?;
            match out {
                Out::Csv => print!("{}", tr.to_csv()),
                Out::Json => print_json(&tr),
            }
        }
        Cmd::Density { op, vector, other, horizon, tail, deltas, out } => {
            let t = op.build()?;
            let d = parse_vector(&vector)?.sub(&parse_vector(&other)?);
            let tail = tail.unwrap_or((horizon / 10).max(1));
            match out {
                Out::Csv => {
                    let delta = deltas[0];
                    let norms = orbit_norms(&t, &d, horizon)?;
                    let sch = Schedule::geometric(&BigIndex::one(), &BigIndex::from(horizon), 2.0)?;
                    let mut s = String::from("n,count,ratio\n");
                    let mut count = 0u64;
                    let mut next = sch.points.iter().map(|p| p.to_u64().unwrap()).peekable();
                    for n in 1..=horizon {
                        // dead orbits stay at zero
                        if norms.get(n as usize - 1).map_or(true, |&v| v < delta) {
                            count += 1;
                        }
                        if next.peek() == Some(&n) {
                            next.next();
                            writeln!(s, "{n},{count},{}", count as f64 / n as f64).unwrap();
                        }
                    }
                    print!("{s}");
                }
                Out::Json => print_json(&distributional_profile(
                    &t,
                    &d,
                    &SparseVec::zero(),
                    &deltas,
                    &BigIndex::from(horizon),
                    &BigIndex::from(tail),
                )?),
            }
        }
        Cmd::Classify { op, vector, other, horizon, schedule, tail, deltas, eta, lambda, c, backend } => {
            let t = op.build()?;
            let (x, y) = (parse_vector(&vector)?, parse_vector(&other)?);
            let mut params = ClassifyParams::defaults(big(&horizon)?)?;
            if let Some(s) = schedule {
                params.schedule = parse_schedule(&s, &t)?;
            }
            if let Some(s) = tail {
                params.tail_start = big(&s)?;
            }
            params.delta_grid = deltas.unwrap_or_else(|| log_grid(1e-6, 1e2, 1));
            params.eta = eta.unwrap_or(params.eta);
            params.lambda = lambda.unwrap_or(params.lambda);
            params.c = c.unwrap_or(params.c);
            params.backend = backend.into();
            println!("{}", classify_pair(&t, &x, &y, &params)?.to_json());
        }
        Cmd::AcbProbe { op, vector, samples, seed, max_index, schedule, c0 } => {
            let t = op.build()?;
            let mut xs: Vec<SparseVec> = vector.iter().map(|v| parse_vector(v)).collect::<Result<_, _>>()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            if max_index < 1 {
                return Err(fail("--max-index must be at least 1"));
            }
            xs.extend((0..samples).map(|_| random_vector(&mut rng, max_index)));
            if xs.is_empty() {
                return Err(fail("give --vector or --samples"));
            }
            let sch = parse_schedule(&schedule, &t)?;
            print_json(&acb_probe(&t, &xs, &sch, c0)?);
        }
        Cmd::ConstructIrregular { op, c, stages, budget, candidates, max_candidates, n_cap } => {
            let t = op.build()?;
            let cands: &dyn Fn(u64) -> Option<SparseVec> = match candidates {
                CandidateSet::Basis => &basis_candidates,
                CandidateSet::BlockTop => &block_top_candidates,
            };
            let cert = construct_irregular_vector(&t, c, stages, cands, max_candidates, n_cap, budget)?;
            let rep = verify_certificate(&t, &cert)?;
            let ok = !cert.stages.is_empty() && rep.all_passed();
            print_json(&json!({"certificate": cert, "verification": rep}));
            return Ok(if ok { Outcome::Ok } else { Outcome::ChecksFailed });
        }
        Cmd::Semigroup { family, p, f, mode, at, tol, s, eps } => {
            let f = parse_step(&f)?;
            match mode {
                SemigroupMode::Norm => {
                    let fam = parse_semigroup(&family, p)?;
                    let rows: Vec<Value> = at
                        .iter()
                        .map(|&t| Ok(json!({"t": t, "norm": semigroup_norm_tol(&fam, &f, t, tol)?})))
                        .collect::<Result<_, Error>>()?;
                    print_json(&rows);
                }
                SemigroupMode::Cesaro => {
                    let fam = parse_semigroup(&family, p)?;
                    let rows: Vec<Value> = at
                        .iter()
                        .map(|&b| {
                            let r = cesaro_integral(&fam, &f, b, tol)?;
                            Ok(json!({"b": b, "mean": r.value, "error": r.error}))
                        })
                        .collect::<Result<_, Error>>()?;
                    print_json(&rows);
                }
                SemigroupMode::Acb => {
                    let rep = acb_integral_check(eps, p, &f, &at, tol)?;
                    print_json(&rep);
                    return Ok(if rep.all_passed() { Outcome::Ok } else { Outcome::ChecksFailed });
                }
                SemigroupMode::Sandwich => {
                    let fam = parse_semigroup(&family, p)?;
                    let rep = sandwich_check(&fam, &f, s, &at, tol)?;
                    print_json(&rep);
                    return Ok(if rep.all_passed() { Outcome::Ok } else { Outcome::ChecksFailed });
                }
            }
        }
        Cmd::Gallery { cmd: GalleryCmd::List } => {
            for name in gallery_list() {
                let d = gallery_defaults(name)?;
                println!("{name} {}", serde_json::to_string(&d).expect("serializable"));
            }
        }
        Cmd::Gallery { cmd: GalleryCmd::Run { name, config, set, timings } } => {
            let mut cfg = ExperimentConfig::new(&name);
            if let Some(path) = config {
                let text = std::fs::read_to_string(&path).map_err(|e| fail(format!("{path}: {e}")))?;
                let file = ExperimentConfig::from_json(&text)?;
                if file.entry != name {
                    return Err(fail(format!("config is for {:?}, not {name:?}", file.entry)));
                }
                cfg.params = file.params;
            }
            for kv in set {
                let (k, v) = kv.split_once('=').ok_or_else(|| fail(format!("expected key=value, got {kv:?}")))?;
                let v: Value = serde_json::from_str(v).map_err(|e| fail(format!("{k}: {e}")))?;
                cfg.params.insert(k.to_string(), v);
            }
            let rep = gallery_run(&cfg, timings)?;
            println!("{}", rep.to_json());
            for c in rep.failures() {
                eprintln!("FAILED: {} / {} ({} {} {})", c.anchor, c.entry.label, c.entry.lhs, c.entry.relation, c.entry.rhs);
            }
            return Ok(if rep.all_passed { Outcome::Ok } else { Outcome::ChecksFailed });
        }
    }
    Ok(Outcome::Ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("meanly: {e}");
            ExitCode::from(match e {
                Error::Capability(_) => 3,
                Error::Parse(_) | Error::Domain(_) => 2,
                Error::Budget(_) | Error::Quadrature { .. } => 1,
            })
        }
    }
}
