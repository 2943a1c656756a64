//! Command-line driver around the sampling library: generate network
//! matrices, draw samples, evaluate permanents, export exact outcome
//! tables, verify sample files, and time the kernels.
//!
//! Every command resolves its full configuration — including a seed
//! drawn from OS entropy when none is given — and echoes it to stderr
//! as one JSON line, so any output can be reproduced from the log of
//! the run that made it. Exit codes: 0 success (or verification pass),
//! 1 verification fail, 2 input error, 3 guard refusal.

use std::fs::File;
use std::hint::black_box;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::Serialize;

use bosonic::distribution::{OutcomeTable, DEFAULT_ENUMERATION_CAP};
use bosonic::io::{
    load_matrix, load_sample_outcomes, load_table_csv, write_matrix, write_report,
    write_samples_csv, write_samples_jsonl, write_table_csv, MatrixMeta,
};
use bosonic::linalg::{haar_isometry, haar_unitary, input_matrix, IndexList};
use bosonic::permanent::{minors_last_row, permanent_glynn, permanent_naive};
use bosonic::sampler::{
    sample_a, sample_b, sample_b_batch_parallel, sample_b_batch_seeded, sample_b_with_alpha,
    sample_collision_free, stream_rng, BruteForceSampler, ColumnPermutation, SampleRecord,
    StreamSeed, DEFAULT_MAX_TRIES,
};
use bosonic::verify::{
    chisq_exact, chisq_two_sample, collision_audit, Histogram, Verdict, DEFAULT_MIN_EXPECTED,
    DEFAULT_SIGNIFICANCE,
};
use bosonic::{ComplexMatrix, Error};

#[derive(Parser)]
#[command(
    name = "bosonic",
    version,
    about = "Exact boson sampling: generate photonic networks, draw samples, verify distributions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a Haar-random interferometer and write its input matrix.
    GenUnitary(GenUnitaryArgs),
    /// Draw samples from a network matrix file.
    Sample(SampleArgs),
    /// Evaluate the permanent (or all last-row minors) of a matrix file.
    Permanent(PermanentArgs),
    /// Export the exact outcome table of a network matrix as CSV.
    Table(TableArgs),
    /// Test a sample file against an exact table, another sample file,
    /// or the collision bound.
    Verify(VerifyArgs),
    /// Measure sampler and kernel wall times over a range of photon
    /// counts.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenUnitaryArgs {
    /// Output modes (the unitary is m x m).
    #[arg(long)]
    m: usize,
    /// Photons: keep the first n columns. Defaults to m.
    #[arg(long)]
    n: Option<usize>,
    /// Master seed; drawn from OS entropy when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Destination file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    /// Network matrix file (JSON).
    #[arg(long, short)]
    input: PathBuf,
    /// Number of samples to draw.
    #[arg(long, short, default_value_t = 1)]
    count: u64,
    /// Sampling route.
    #[arg(long, short, value_enum, default_value_t = Algorithm::B)]
    algorithm: Algorithm,
    /// Master seed; sample i is drawn from generator stream (seed, i).
    #[arg(long)]
    seed: Option<u64>,
    /// Destination file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Output format: JSON Lines (full records) or CSV (outcomes and
    /// probabilities only).
    #[arg(long, short, value_enum, default_value_t = SampleFormat::Json)]
    format: SampleFormat,
    /// Reuse one fixed column permutation instead of redrawing per
    /// sample (algorithm b only). Sound for a single sample from a
    /// Haar-random network; reuse across samples biases the output for
    /// any fixed network.
    #[arg(long, value_enum)]
    fixed_alpha: Option<FixedAlpha>,
    /// Largest outcome space the brute-force route may enumerate.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: u64,
    /// Rejection budget per accepted sample (collision-free route).
    #[arg(long, default_value_t = DEFAULT_MAX_TRIES)]
    max_tries: u64,
    /// Worker threads for batched drawing (algorithm b only).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    /// Enumerate the exact table, then draw from it.
    Brute,
    /// Chain sampler with exhaustive per-stage sums.
    A,
    /// Column-permuted chain sampler.
    B,
    /// Algorithm b with rejection of outcomes that reuse a mode.
    CollisionFree,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SampleFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FixedAlpha {
    Identity,
}

#[derive(Args)]
struct PermanentArgs {
    /// Matrix file (JSON); must be square.
    #[arg(long, short)]
    input: PathBuf,
    /// Kernel to run.
    #[arg(long, value_enum, default_value_t = PermanentMode::Glynn)]
    mode: PermanentMode,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PermanentMode {
    /// Gray-coded sign sweep.
    Glynn,
    /// All-permutations reference evaluator (small matrices only).
    Naive,
    /// Permanents of all last-row-deleted minors in one sweep.
    Minors,
}

#[derive(Args)]
struct TableArgs {
    /// Network matrix file (JSON).
    #[arg(long, short)]
    input: PathBuf,
    /// Largest outcome space to enumerate.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: u64,
    /// Destination file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Sample file (JSON Lines or CSV).
    #[arg(long)]
    samples: PathBuf,
    /// Second sample file (two-sample test only).
    #[arg(long)]
    samples2: Option<PathBuf>,
    /// Network matrix file; builds the exact table for chisq or
    /// supplies the bound for collision.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Exact outcome table CSV (alternative to --input for chisq).
    #[arg(long)]
    exact: Option<PathBuf>,
    /// Which test to run.
    #[arg(long, value_enum, default_value_t = TestKind::Chisq)]
    test: TestKind,
    /// Pool cells until each expects at least this many counts.
    #[arg(long, default_value_t = DEFAULT_MIN_EXPECTED)]
    min_expected: f64,
    /// Fail the verdict below this p-value.
    #[arg(long, default_value_t = DEFAULT_SIGNIFICANCE)]
    significance: f64,
    /// Largest outcome space to enumerate when building the exact table.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TestKind {
    /// Goodness of fit against the exact distribution.
    Chisq,
    /// Are two sample files drawn from one distribution?
    TwoSample,
    /// Duplicate rate against the analytic collision bound.
    Collision,
}

#[derive(Args)]
struct BenchArgs {
    /// Smallest photon count.
    #[arg(long, default_value_t = 16)]
    n_min: usize,
    /// Largest photon count; modes scale as m = 2n^2.
    #[arg(long, default_value_t = 22)]
    n_max: usize,
    /// Timed repetitions per point (median reported).
    #[arg(long, default_value_t = 11)]
    reps: usize,
    /// Master seed; drawn from OS entropy when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Destination CSV; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Resolved per-command configuration, echoed to stderr as one JSON
/// line before any work happens.
#[derive(Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Resolved {
    GenUnitary {
        m: usize,
        n: usize,
        seed: u64,
        output: Option<String>,
    },
    Sample {
        input: String,
        count: u64,
        algorithm: &'static str,
        seed: u64,
        format: &'static str,
        fixed_alpha: Option<&'static str>,
        cap: u64,
        max_tries: u64,
        jobs: Option<usize>,
        output: Option<String>,
    },
    Permanent {
        input: String,
        mode: &'static str,
    },
    Table {
        input: String,
        cap: u64,
        output: Option<String>,
    },
    Verify {
        test: &'static str,
        samples: String,
        samples2: Option<String>,
        input: Option<String>,
        exact: Option<String>,
        min_expected: f64,
        significance: f64,
        cap: u64,
    },
    Bench {
        n_min: usize,
        n_max: usize,
        reps: usize,
        seed: u64,
        output: Option<String>,
    },
}

fn echo_config(config: &Resolved) {
    eprintln!(
        "{}",
        serde_json::to_string(config).expect("configuration serializes")
    );
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| rand::rng().random())
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn display_opt(path: Option<&PathBuf>) -> Option<String> {
    path.map(|p| display(p))
}

fn output_writer(path: Option<&PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Refused(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(command: Command) -> bosonic::Result<ExitCode> {
    match command {
        Command::GenUnitary(args) => cmd_gen_unitary(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Permanent(args) => cmd_permanent(args),
        Command::Table(args) => cmd_table(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn cmd_gen_unitary(args: GenUnitaryArgs) -> bosonic::Result<ExitCode> {
    let n = args.n.unwrap_or(args.m);
    let seed = resolve_seed(args.seed);
    echo_config(&Resolved::GenUnitary {
        m: args.m,
        n,
        seed,
        output: display_opt(args.output.as_ref()),
    });
    let unitary = haar_unitary(args.m, seed)?;
    let a = input_matrix(&unitary, n)?;
    let meta = MatrixMeta {
        seed: Some(seed),
        orthonormality_deviation: Some(a.orthonormality_deviation()),
        generator: Some("ginibre-qr".to_string()),
    };
    write_matrix(output_writer(args.output.as_ref())?, &a, Some(meta))?;
    Ok(ExitCode::SUCCESS)
}

fn algorithm_name(algorithm: Algorithm) -> &'static str {
    match algorithm {
        Algorithm::Brute => "brute",
        Algorithm::A => "a",
        Algorithm::B => "b",
        Algorithm::CollisionFree => "collision-free",
    }
}

fn cmd_sample(args: SampleArgs) -> bosonic::Result<ExitCode> {
    let seed = resolve_seed(args.seed);
    echo_config(&Resolved::Sample {
        input: display(&args.input),
        count: args.count,
        algorithm: algorithm_name(args.algorithm),
        seed,
        format: match args.format {
            SampleFormat::Json => "json",
            SampleFormat::Csv => "csv",
        },
        fixed_alpha: args.fixed_alpha.map(|_| "identity"),
        cap: args.cap,
        max_tries: args.max_tries,
        jobs: args.jobs,
        output: display_opt(args.output.as_ref()),
    });

    if args.fixed_alpha.is_some() && args.algorithm != Algorithm::B {
        return Err(Error::invalid(
            "--fixed-alpha applies to algorithm b only",
        ));
    }
    if let Some(jobs) = args.jobs {
        if args.algorithm == Algorithm::B {
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global()
                .map_err(|e| Error::invalid(format!("cannot size the worker pool: {e}")))?;
        } else {
            eprintln!("note: --jobs affects algorithm b only; sampling sequentially");
        }
    }

    let (a, _) = load_matrix(&args.input)?;
    let records = draw_samples(&a, &args, seed)?;

    if records.is_empty() {
        if let Some(path) = &args.output {
            File::create(path)?;
        }
        return Ok(ExitCode::SUCCESS);
    }
    let writer = output_writer(args.output.as_ref())?;
    match args.format {
        SampleFormat::Json => write_samples_jsonl(writer, &records)?,
        SampleFormat::Csv => write_samples_csv(writer, &records)?,
    }
    Ok(ExitCode::SUCCESS)
}

/// Draws `count` records, one generator stream per sample index, so a
/// run is reproducible from `(matrix, algorithm, seed)` alone and any
/// single record can be replayed from its own stream coordinates.
fn draw_samples(
    a: &ComplexMatrix,
    args: &SampleArgs,
    seed: u64,
) -> bosonic::Result<Vec<SampleRecord>> {
    let stamp = |i: u64, mut record: SampleRecord| {
        record.seed = Some(StreamSeed {
            master: seed,
            stream: i,
        });
        record
    };
    match args.algorithm {
        Algorithm::Brute => {
            let sampler = BruteForceSampler::new(a, args.cap)?;
            Ok((0..args.count)
                .map(|i| stamp(i, sampler.sample(&mut stream_rng(seed, i))))
                .collect())
        }
        Algorithm::A => (0..args.count)
            .map(|i| Ok(stamp(i, sample_a(a, &mut stream_rng(seed, i))?)))
            .collect(),
        Algorithm::B => {
            if args.fixed_alpha.is_some() {
                eprintln!(
                    "warning: --fixed-alpha reuses one column permutation across samples; \
                     the output is only a faithful draw for a single sample from a \
                     Haar-random network"
                );
                let alpha = ColumnPermutation::identity(a.cols());
                (0..args.count)
                    .map(|i| {
                        Ok(stamp(i, sample_b_with_alpha(a, &mut stream_rng(seed, i), &alpha)?))
                    })
                    .collect()
            } else if args.jobs.is_some() {
                sample_b_batch_parallel(a, args.count, seed)
            } else {
                sample_b_batch_seeded(a, args.count, seed)
            }
        }
        Algorithm::CollisionFree => (0..args.count)
            .map(|i| {
                Ok(stamp(
                    i,
                    sample_collision_free(a, &mut stream_rng(seed, i), args.max_tries)?,
                ))
            })
            .collect(),
    }
}

#[derive(Serialize)]
struct PermanentOutput {
    mode: &'static str,
    dimension: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    values: Option<Vec<[f64; 2]>>,
}

fn cmd_permanent(args: PermanentArgs) -> bosonic::Result<ExitCode> {
    let mode = match args.mode {
        PermanentMode::Glynn => "glynn",
        PermanentMode::Naive => "naive",
        PermanentMode::Minors => "minors",
    };
    echo_config(&Resolved::Permanent {
        input: display(&args.input),
        mode,
    });
    let (b, _) = load_matrix(&args.input)?;
    let output = match args.mode {
        PermanentMode::Glynn | PermanentMode::Naive => {
            let value = match args.mode {
                PermanentMode::Glynn => permanent_glynn(&b)?,
                _ => permanent_naive(&b)?,
            };
            PermanentOutput {
                mode,
                dimension: b.rows(),
                value: Some([value.re, value.im]),
                values: None,
            }
        }
        PermanentMode::Minors => {
            let minors = minors_last_row(&b)?;
            PermanentOutput {
                mode,
                dimension: b.rows(),
                value: None,
                values: Some(minors.as_slice().iter().map(|v| [v.re, v.im]).collect()),
            }
        }
    };
    println!("{}", serde_json::to_string(&output)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_table(args: TableArgs) -> bosonic::Result<ExitCode> {
    echo_config(&Resolved::Table {
        input: display(&args.input),
        cap: args.cap,
        output: display_opt(args.output.as_ref()),
    });
    let (a, _) = load_matrix(&args.input)?;
    let table = OutcomeTable::build(&a, args.cap)?;
    write_table_csv(output_writer(args.output.as_ref())?, &table)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> bosonic::Result<ExitCode> {
    let test = match args.test {
        TestKind::Chisq => "chisq",
        TestKind::TwoSample => "two-sample",
        TestKind::Collision => "collision",
    };
    echo_config(&Resolved::Verify {
        test,
        samples: display(&args.samples),
        samples2: display_opt(args.samples2.as_ref()),
        input: display_opt(args.input.as_ref()),
        exact: display_opt(args.exact.as_ref()),
        min_expected: args.min_expected,
        significance: args.significance,
        cap: args.cap,
    });
    let outcomes = load_sample_outcomes(&args.samples)?;
    match args.test {
        TestKind::Chisq => {
            let hist = Histogram::from_outcomes(outcomes);
            let exact = match (&args.exact, &args.input) {
                (Some(table_path), _) => load_table_csv(table_path)?,
                (None, Some(matrix_path)) => {
                    let (a, _) = load_matrix(matrix_path)?;
                    OutcomeTable::build(&a, args.cap)?
                }
                (None, None) => {
                    return Err(Error::invalid(
                        "the chisq test needs --exact (table CSV) or --input (matrix)",
                    ))
                }
            };
            let report = chisq_exact(&exact, &hist, args.min_expected, args.significance)?;
            write_report(io::stdout().lock(), &report)?;
            Ok(verdict_code(report.verdict))
        }
        TestKind::TwoSample => {
            let second = args.samples2.as_ref().ok_or_else(|| {
                Error::invalid("the two-sample test needs --samples2")
            })?;
            let hist1 = Histogram::from_outcomes(outcomes);
            let hist2 = Histogram::from_outcomes(load_sample_outcomes(second)?);
            let report = chisq_two_sample(&hist1, &hist2, args.min_expected, args.significance)?;
            write_report(io::stdout().lock(), &report)?;
            Ok(verdict_code(report.verdict))
        }
        TestKind::Collision => {
            let matrix_path = args.input.as_ref().ok_or_else(|| {
                Error::invalid("the collision test needs --input (matrix)")
            })?;
            let (a, _) = load_matrix(matrix_path)?;
            let report = collision_audit(&outcomes, &a)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.violation {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
    }
}

fn verdict_code(verdict: Verdict) -> ExitCode {
    match verdict {
        Verdict::Pass => ExitCode::SUCCESS,
        Verdict::Fail => ExitCode::from(1),
    }
}

/// Median wall time of `reps` calls, in seconds, after one warmup call.
fn median_seconds(reps: usize, mut f: impl FnMut()) -> f64 {
    f();
    let mut times: Vec<f64> = (0..reps)
        .map(|_| {
            let start = Instant::now();
            f();
            start.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times[times.len() / 2]
}

fn cmd_bench(args: BenchArgs) -> bosonic::Result<ExitCode> {
    let seed = resolve_seed(args.seed);
    echo_config(&Resolved::Bench {
        n_min: args.n_min,
        n_max: args.n_max,
        reps: args.reps,
        seed,
        output: display_opt(args.output.as_ref()),
    });
    if args.n_min < 2 || args.n_min > args.n_max {
        return Err(Error::invalid(format!(
            "need 2 <= n-min <= n-max, got {} and {}",
            args.n_min, args.n_max
        )));
    }
    if args.reps == 0 {
        return Err(Error::invalid("need at least one repetition"));
    }

    let mut writer = csv::Writer::from_writer(output_writer(args.output.as_ref())?);
    writer.write_record([
        "n",
        "m",
        "reps",
        "sample_b_seconds",
        "permanent_seconds",
        "minors_seconds",
        "sample_over_permanent",
        "minors_over_permanent",
    ])?;
    for n in args.n_min..=args.n_max {
        let m = 2 * n * n;
        let a = haar_isometry(m, n, seed.wrapping_add(n as u64))?;
        let mut rng = stream_rng(seed, n as u64);
        sample_b(&a, &mut rng)?;
        let sample_s = median_seconds(args.reps, || {
            black_box(sample_b(&a, &mut rng).expect("validated above"));
        });

        let block = a.submatrix(&IndexList::prefix(n), &IndexList::prefix(n))?;
        permanent_glynn(&block)?;
        let permanent_s = median_seconds(args.reps, || {
            black_box(permanent_glynn(&block).expect("validated above"));
        });
        minors_last_row(&block)?;
        let minors_s = median_seconds(args.reps, || {
            black_box(minors_last_row(&block).expect("validated above"));
        });

        writer.write_record([
            n.to_string(),
            m.to_string(),
            args.reps.to_string(),
            sample_s.to_string(),
            permanent_s.to_string(),
            minors_s.to_string(),
            (sample_s / permanent_s).to_string(),
            (minors_s / permanent_s).to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(ExitCode::SUCCESS)
}
