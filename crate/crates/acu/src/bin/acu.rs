//! Command-line surface for the `acu` library: every pipeline as a
//! reproducible, scriptable subcommand with JSON (or CSV, for census
//! tables) output. All logic lives in the library; this binary parses
//! arguments, dispatches, and prints.

use std::io::Read;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use acu::census::{brute_force_census, n_general, CensusOptions};
use acu::cmatrix::random_unitary;
use acu::error::Error;
use acu::gamma::{
    component_for_poly, count_components_rank1, describe_moduli, enumerate_polys, f_decompose,
    omega_analysis, omega_fiber, omega_matrix, CentralExtension, EigenData, Rank1Form,
};
use acu::rat1::Rat1;
use acu::skew::{
    congruence_normal_form, integer_skew_normal_form, row_space_order, sigma, standard_block,
    SkewQZ, SkewZ, DEFAULT_CAP,
};
use acu::tuples::{
    build_zd, char_poly_check, conjugate, default_max_den, extract_canonical_basis, rebuild,
    rho_classify, verify_relations, ACTuple, DEFAULT_TOL,
};

#[derive(Parser)]
#[command(
    name = "acu",
    about = "Components of almost-commuting unitary tuples and Hom(G, U(m))",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count components of the almost-commuting tuple space: N(n, m).
    Census {
        n: usize,
        m: u64,
        /// Also run the brute-force enumeration and compare.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u64,
        /// Worker threads for the enumeration.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output format: json or csv.
        #[arg(long, default_value = "json")]
        format: String,
    },
    /// Congruence normal form of a skew matrix (over Q/Z or Z).
    NormalForm {
        /// Ring of entries: "qz" or "z".
        #[arg(long, default_value = "qz")]
        ring: String,
        /// Path to the matrix JSON ("-" for stdin).
        file: String,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u64,
    },
    /// Build the model D-commuting tuple for given block data.
    BuildTuple(BuildArgs),
    /// Verify a tuple against commutation data; exits 1 on failure.
    VerifyTuple {
        /// Path to the tuple JSON ("-" for stdin).
        file: String,
        #[command(flatten)]
        block: BlockArgs,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Classify a tuple: measure its commutator phase matrix.
    Classify {
        file: String,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Denominator cap for angle snapping (default m * 720).
        #[arg(long)]
        max_den: Option<u64>,
    },
    /// Recover the spectral data of a D-commuting tuple.
    Extract {
        file: String,
        #[command(flatten)]
        block: BlockArgs,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        max_den: Option<u64>,
        /// Also rebuild from the data and cross-check the characteristic
        /// polynomials; exits 1 when the check fails.
        #[arg(long)]
        check: bool,
    },
    /// Component theory of Hom(G, U(m)) for central extensions.
    Gamma(GammaArgs),
}

#[derive(Args)]
struct BlockArgs {
    /// Block values d_1,...,d_t as comma-separated rationals, e.g.
    /// "1/2,1/3"; empty string for the zero matrix.
    #[arg(long, default_value = "")]
    block: String,
    /// Ambient tuple length n.
    #[arg(long)]
    n: usize,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    block: BlockArgs,
    /// Multiplicity l (matrix dimension is l * prod of orders).
    #[arg(long, default_value_t = 1)]
    l: usize,
    /// Alpha angles: l rows separated by ';', each n-t comma-separated
    /// rationals. Defaults to zeros.
    #[arg(long)]
    alphas: Option<String>,
    /// Beta angles: l rows of t rationals. Defaults to zeros.
    #[arg(long)]
    betas: Option<String>,
    /// Draw all angles at random (denominators up to 12) from this seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Conjugate the result by a seeded random unitary.
    #[arg(long)]
    conjugate_seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Args)]
struct GammaArgs {
    /// Rank-one form "t,c_1,...,c_t", e.g. "1,1" for the Heisenberg
    /// group.
    #[arg(long)]
    rank1: Option<String>,
    /// Ambient rank n for --rank1 (default 2t).
    #[arg(long)]
    ambient: Option<usize>,
    /// Path to a central-extension JSON ("-" for stdin).
    #[arg(long)]
    ext: Option<String>,
    /// Degree m (needed by --count, --enumerate, --moduli).
    m: Option<u64>,
    /// Print the number of components of Hom(G, U(m)) (default mode).
    #[arg(long)]
    count: bool,
    /// List the admissible characteristic polynomials.
    #[arg(long)]
    enumerate: bool,
    /// List per-polynomial block data and moduli descriptors.
    #[arg(long)]
    moduli: bool,
    /// Analyze the coefficient matrix: B, C, P, rank, nullity.
    #[arg(long)]
    omega: bool,
    /// Eigenvalue data "a/k,...:dim;..." for membership, decomposition
    /// and rank-r component counts.
    #[arg(long)]
    eigendata: Option<String>,
}

#[derive(Serialize)]
struct CommandResult<T: Serialize> {
    command: String,
    inputs: serde_json::Value,
    output: T,
    timing_ms: u128,
}

fn emit<T: Serialize>(command: &str, inputs: serde_json::Value, output: T, started: Instant) {
    let result = CommandResult {
        command: command.to_string(),
        inputs,
        output,
        timing_ms: started.elapsed().as_millis(),
    };
    println!("{}", serde_json::to_string_pretty(&result).expect("serializable output"));
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::CapExceeded { .. } => 3,
        Error::CommutatorNotScalar { .. } | Error::NotUnitary { .. } | Error::SnapFailed { .. } => {
            1
        }
        _ => 2,
    }
}

fn read_input(path: &str) -> Result<String, Error> {
    if path == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| Error::InvalidInput(format!("stdin: {e}")))?;
        Ok(buf)
    } else {
        std::fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{path}: {e}")))
    }
}

fn parse_rat(s: &str) -> Result<Rat1, Error> {
    let s = s.trim();
    let (a, b) = match s.split_once('/') {
        Some((a, b)) => (a, b),
        None => (s, "1"),
    };
    let num: i64 =
        a.trim().parse().map_err(|_| Error::InvalidInput(format!("bad rational '{s}'")))?;
    let den: i64 =
        b.trim().parse().map_err(|_| Error::InvalidInput(format!("bad rational '{s}'")))?;
    Rat1::new(num, den)
}

fn parse_rat_list(s: &str) -> Result<Vec<Rat1>, Error> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(parse_rat).collect()
}

fn parse_rows(s: &str, rows: usize, cols: usize, what: &str) -> Result<Vec<Vec<Rat1>>, Error> {
    let parsed: Result<Vec<Vec<Rat1>>, Error> = s.split(';').map(parse_rat_list).collect();
    let parsed = parsed?;
    if parsed.len() != rows || parsed.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidInput(format!(
            "{what} must be {rows} row(s) of {cols} value(s)"
        )));
    }
    Ok(parsed)
}

fn random_angles(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<Rat1>> {
    use rand::Rng;
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    let den = rng.random_range(1..=12i64);
                    Rat1::of(rng.random_range(0..den), den)
                })
                .collect()
        })
        .collect()
}

fn run() -> Result<Option<u8>, Error> {
    let cli = Cli::parse();
    let started = Instant::now();
    match cli.command {
        Command::Census { n, m, oracle, cap, jobs, format } => {
            if n < 2 || m < 1 {
                return Err(Error::InvalidInput("census needs n >= 2 and m >= 1".into()));
            }
            let formula = n_general(n, m)?;
            let inputs = json!({"n": n, "m": m, "oracle": oracle, "cap": cap, "jobs": jobs});
            if oracle {
                let report = brute_force_census(n, m, &CensusOptions { cap, jobs })?;
                let matches = report.total == formula;
                if format == "csv" {
                    println!("n,m,formula,oracle,match");
                    println!("{n},{m},{formula},{},{}", report.total, matches);
                    println!();
                    println!("orders,count");
                    for (orders, count) in &report.by_class {
                        let key: Vec<String> = orders.iter().map(u64::to_string).collect();
                        println!("{},{count}", key.join("x"));
                    }
                } else {
                    emit(
                        "census",
                        inputs,
                        json!({
                            "formula": formula.to_string(),
                            "report": report,
                            "match": matches,
                        }),
                        started,
                    );
                }
                return Ok(if matches { None } else { Some(1) });
            }
            if format == "csv" {
                println!("n,m,total");
                println!("{n},{m},{formula}");
            } else {
                emit("census", inputs, json!({"total": formula.to_string()}), started);
            }
            Ok(None)
        }
        Command::NormalForm { ring, file, cap } => {
            let text = read_input(&file)?;
            match ring.as_str() {
                "qz" => {
                    let d: SkewQZ = serde_json::from_str(&text)
                        .map_err(|e| Error::InvalidInput(format!("matrix JSON: {e}")))?;
                    let nf = congruence_normal_form(&d);
                    let s = sigma(&d, cap)?;
                    debug_assert_eq!(s, nf.sigma());
                    emit(
                        "normal-form",
                        json!({"ring": "qz", "file": file}),
                        json!({
                            "t": nf.t,
                            "ds": nf.ds,
                            "orders": nf.orders(),
                            "transform": nf.transform,
                            "sigma": s.to_string(),
                            "row_space_order": row_space_order(&d, cap)?.to_string(),
                        }),
                        started,
                    );
                }
                "z" => {
                    let w: SkewZ = serde_json::from_str(&text)
                        .map_err(|e| Error::InvalidInput(format!("matrix JSON: {e}")))?;
                    let nf = integer_skew_normal_form(&w);
                    emit(
                        "normal-form",
                        json!({"ring": "z", "file": file}),
                        json!({"t": nf.t, "cs": nf.cs, "transform": nf.transform}),
                        started,
                    );
                }
                other => {
                    return Err(Error::InvalidInput(format!("unknown ring '{other}'")));
                }
            }
            Ok(None)
        }
        Command::BuildTuple(args) => {
            let ds = parse_rat_list(&args.block.block)?;
            let n = args.block.n;
            let t = ds.len();
            let l = args.l;
            if 2 * t > n {
                return Err(Error::InvalidBlock(format!("2t = {} exceeds n = {n}", 2 * t)));
            }
            let (alphas, betas) = if let Some(seed) = args.seed {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (random_angles(&mut rng, l, n - t), random_angles(&mut rng, l, t))
            } else {
                let alphas = match &args.alphas {
                    Some(s) => parse_rows(s, l, n - t, "--alphas")?,
                    None => vec![vec![Rat1::ZERO; n - t]; l],
                };
                let betas = match &args.betas {
                    Some(s) => parse_rows(s, l, t, "--betas")?,
                    None => vec![vec![Rat1::ZERO; t]; l],
                };
                (alphas, betas)
            };
            let mut tuple = build_zd(&ds, n, l, &alphas, &betas)?;
            if let Some(seed) = args.conjugate_seed {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let u = random_unitary(tuple.m, &mut rng);
                tuple = conjugate(&tuple, &u, args.tol)?;
            }
            let d = standard_block(&ds, n)?;
            let report = verify_relations(&tuple, &d, args.tol.max(1e-8));
            emit(
                "build-tuple",
                json!({
                    "block": args.block.block, "n": n, "l": l,
                    "seed": args.seed, "conjugate_seed": args.conjugate_seed,
                }),
                json!({"tuple": tuple, "verification": report}),
                started,
            );
            Ok(None)
        }
        Command::VerifyTuple { file, block, tol } => {
            let tuple: ACTuple = serde_json::from_str(&read_input(&file)?)
                .map_err(|e| Error::InvalidInput(format!("tuple JSON: {e}")))?;
            let ds = parse_rat_list(&block.block)?;
            let d = standard_block(&ds, block.n)?;
            let report = verify_relations(&tuple, &d, tol);
            let pass = report.pass;
            emit(
                "verify-tuple",
                json!({"file": file, "block": block.block, "n": block.n, "tol": tol}),
                report,
                started,
            );
            Ok(if pass { None } else { Some(1) })
        }
        Command::Classify { file, tol, max_den } => {
            let tuple: ACTuple = serde_json::from_str(&read_input(&file)?)
                .map_err(|e| Error::InvalidInput(format!("tuple JSON: {e}")))?;
            let cap = max_den.unwrap_or_else(|| default_max_den(tuple.m));
            let d = rho_classify(&tuple, tol, cap)?;
            emit("classify", json!({"file": file, "tol": tol, "max_den": cap}), d, started);
            Ok(None)
        }
        Command::Extract { file, block, tol, max_den, check } => {
            let tuple: ACTuple = serde_json::from_str(&read_input(&file)?)
                .map_err(|e| Error::InvalidInput(format!("tuple JSON: {e}")))?;
            let ds = parse_rat_list(&block.block)?;
            let d = standard_block(&ds, block.n)?;
            let cap = max_den.unwrap_or_else(|| default_max_den(tuple.m));
            let sd = extract_canonical_basis(&tuple, &d, tol, cap)?;
            let mut failed = false;
            let check_result = if check {
                let rebuilt = rebuild(&sd, block.n)?;
                let original = char_poly_check(&tuple, &sd, tol)?;
                let round = char_poly_check(&rebuilt, &sd, tol)?;
                failed = !(original.pass && round.pass);
                Some(json!({"original": original, "rebuilt": round}))
            } else {
                None
            };
            emit(
                "extract",
                json!({"file": file, "block": block.block, "n": block.n, "tol": tol}),
                json!({"spectral_data": sd, "char_poly": check_result}),
                started,
            );
            Ok(if failed { Some(1) } else { None })
        }
        Command::Gamma(args) => run_gamma(args, started),
    }
}

fn run_gamma(args: GammaArgs, started: Instant) -> Result<Option<u8>, Error> {
    // resolve the group: a rank-1 form, or a general extension
    let (form, ext): (Option<Rank1Form>, CentralExtension) = match (&args.rank1, &args.ext) {
        (Some(spec), None) => {
            let parts: Vec<u64> = spec
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse()
                        .map_err(|_| Error::InvalidInput(format!("bad --rank1 '{spec}'")))
                })
                .collect::<Result<_, _>>()?;
            let (&t, cs) = parts
                .split_first()
                .ok_or_else(|| Error::InvalidInput("--rank1 needs t,c_1,...".into()))?;
            if cs.len() != t as usize {
                return Err(Error::InvalidInput(format!(
                    "--rank1 '{spec}': expected {t} coefficients after t"
                )));
            }
            let n = args.ambient.unwrap_or(2 * t as usize);
            let form = Rank1Form::new(n, cs.to_vec())?;
            let ext = form.to_extension();
            (Some(form), ext)
        }
        (None, Some(path)) => {
            let ext: CentralExtension = serde_json::from_str(&read_input(path)?)
                .map_err(|e| Error::InvalidInput(format!("extension JSON: {e}")))?;
            (None, ext)
        }
        _ => {
            return Err(Error::InvalidInput("gamma needs exactly one of --rank1 or --ext".into()))
        }
    };
    let inputs = json!({
        "rank1": args.rank1, "ambient": args.ambient, "ext": args.ext, "m": args.m,
    });

    if args.omega {
        let omega = omega_matrix(&ext);
        let analysis = omega_analysis(&omega)?;
        emit("gamma --omega", inputs, json!({"omega": omega, "analysis": analysis}), started);
        return Ok(None);
    }
    if let Some(data) = &args.eigendata {
        let eigendata: EigenData = data
            .split(';')
            .map(|blockspec| {
                let (lams, dim) = blockspec.split_once(':').ok_or_else(|| {
                    Error::InvalidInput("eigendata blocks look like a/k,...:dim".into())
                })?;
                let dim: u64 = dim.trim().parse().map_err(|_| {
                    Error::InvalidInput(format!("bad dimension in '{blockspec}'"))
                })?;
                Ok((parse_rat_list(lams)?, dim))
            })
            .collect::<Result<_, Error>>()?;
        let decomp = f_decompose(&ext, &eigendata)?;
        let omega = omega_matrix(&ext);
        let fibers: Vec<_> = decomp
            .terms
            .iter()
            .map(|term| omega_fiber(&omega, &term.d))
            .collect::<Result<_, _>>()?;
        let counted = acu::gamma::count_components_rank_r(&ext, &decomp)?;
        emit(
            "gamma --eigendata",
            inputs,
            json!({"decomposition": decomp, "fibers": fibers, "components": counted}),
            started,
        );
        return Ok(None);
    }

    let form = form.ok_or_else(|| {
        Error::InvalidInput("--count/--enumerate/--moduli need a --rank1 form".into())
    })?;
    let m = args.m.ok_or_else(|| Error::InvalidInput("this gamma mode needs the degree m".into()))?;
    if args.enumerate {
        let polys = enumerate_polys(&form, m)?;
        let rendered: Vec<_> =
            polys.iter().map(|p| json!({"poly": p, "display": p.display()})).collect();
        emit(
            "gamma --enumerate",
            inputs,
            json!({"count": rendered.len(), "polynomials": rendered}),
            started,
        );
    } else if args.moduli {
        let polys = enumerate_polys(&form, m)?;
        let rendered: Vec<_> = polys
            .iter()
            .map(|p| {
                let blocks = component_for_poly(&form, p)?;
                let moduli = describe_moduli(&form, p)?;
                Ok(json!({"poly": p.display(), "blocks": blocks, "moduli": moduli}))
            })
            .collect::<Result<_, Error>>()?;
        emit("gamma --moduli", inputs, json!({"components": rendered}), started);
    } else {
        // --count is the default mode
        let count = count_components_rank1(&form, m)?;
        emit("gamma --count", inputs, json!({"count": count.to_string()}), started);
    }
    Ok(None)
}

fn main() -> ExitCode {
    match run() {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(code)) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
