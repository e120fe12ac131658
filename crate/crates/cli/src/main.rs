use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gridmetric::corpus::{equal_center_pairs, random_pairs, synth_class, SynthClass};
use gridmetric::equivalence::{run_suite, to_json, write_csv, CheckConfig, LabeledPair};
use gridmetric::imageio::{load_measure, write_pgm};
use gridmetric::protocol::{bench_row, evaluate, pairwise_matrix, EvalConfig, Metric, Timing};
use gridmetric::wasserstein::DEFAULT_GUARD;
use gridmetric::{Error, GridMeasure};

/// Fourier-based and Wasserstein distances between grayscale images.
#[derive(Debug, Parser)]
#[command(name = "gridmetric", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Distance between two images.
    Compute {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        metric: MetricArgs,
    },
    /// Distances for every unordered pair of images in a directory, or of a
    /// synthetic corpus (within each class) when no directory is given.
    Matrix {
        dir: Option<PathBuf>,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// CSV destination (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the metric equivalence bounds on a seeded random corpus.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_values_t = [8usize, 16])]
        sizes: Vec<usize>,
        /// Random pairs per size (one entry per size, the last one repeats).
        #[arg(long, value_delimiter = ',', default_values_t = [200usize, 100])]
        pairs: Vec<usize>,
        /// Equal-center pairs per size.
        #[arg(long, default_value_t = 100)]
        equal_center: usize,
        /// Check the second-order lower bound with the translated variant
        /// on pairs whose centers differ.
        #[arg(long)]
        translated_f22: bool,
        #[arg(long, default_value_t = DEFAULT_GUARD)]
        guard: usize,
        /// CSV destination (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the reports as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write one CSV line per skipped check (pair, check, reason).
        #[arg(long)]
        skips: Option<PathBuf>,
    },
    /// Runtime table: mean and standard deviation of seconds per pair.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [32usize, 64, 128, 256, 512])]
        sizes: Vec<usize>,
        /// Pairs per class and size.
        #[arg(long, default_value_t = 2)]
        pairs: usize,
        /// Largest size for which transport distances are attempted.
        #[arg(long, default_value_t = 128)]
        max_transport_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',')]
        classes: Vec<String>,
        #[arg(long, default_value_t = 2)]
        oversample: usize,
        #[arg(long, default_value_t = DEFAULT_GUARD)]
        guard: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a seeded synthetic corpus of binary PGM images.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricName {
    W1,
    W2,
    F,
    Dsup,
    D2t,
    F22t,
    Tv,
}

#[derive(Debug, Args)]
struct MetricArgs {
    #[arg(long, value_enum, default_value = "w1")]
    metric: MetricName,
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 2)]
    oversample: usize,
    /// Largest dense transport problem (sources x targets) to attempt.
    #[arg(long, default_value_t = DEFAULT_GUARD)]
    guard: usize,
}

impl MetricArgs {
    fn metric(&self) -> Metric {
        match self.metric {
            MetricName::W1 => Metric::W1,
            MetricName::W2 => Metric::W2,
            MetricName::F => Metric::Pfm {
                s: self.s,
                p: self.p,
                alpha: self.alpha,
            },
            MetricName::Dsup => Metric::Dsup { s: self.s },
            MetricName::D2t => Metric::D2t,
            MetricName::F22t => Metric::F22t,
            MetricName::Tv => Metric::Tv,
        }
    }

    fn config(&self) -> EvalConfig {
        EvalConfig {
            oversample: self.oversample,
            guard: self.guard,
        }
    }
}

#[derive(Debug, Args)]
struct CorpusArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [32usize])]
    sizes: Vec<usize>,
    /// Class names (gaussian-blobs, uniform-shapes, salt-noise); default all.
    #[arg(long, value_delimiter = ',')]
    classes: Vec<String>,
    /// Images per class and size.
    #[arg(long, default_value_t = 10)]
    count: usize,
}

/// A failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, message) = if e.is_precondition() {
            (3, format!("precondition violated: {e}"))
        } else {
            (2, e.to_string())
        };
        Failure { code, message }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::input(e.to_string())
    }
}

fn parse_classes(names: &[String]) -> Result<Vec<SynthClass>, Failure> {
    if names.is_empty() {
        return Ok(SynthClass::ALL.to_vec());
    }
    names
        .iter()
        .map(|n| SynthClass::parse(n).ok_or_else(|| Failure::input(format!("unknown class '{n}'"))))
        .collect()
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn compute(a: &Path, b: &Path, args: &MetricArgs) -> Result<u8, Failure> {
    let mu = load_measure(a)?;
    let nu = load_measure(b)?;
    let metric = args.metric();
    let start = Instant::now();
    let value = evaluate(metric, &mu, &nu, &args.config())?;
    let secs = start.elapsed().as_secs_f64();
    println!("metric,N,value,seconds");
    println!("{metric},{},{value},{secs}", mu.n());
    Ok(0)
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|x| x.to_str())
                .is_some_and(|x| matches!(x.to_ascii_lowercase().as_str(), "pgm" | "png"))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn matrix(
    dir: &Option<PathBuf>,
    args: &MetricArgs,
    corpus: &CorpusArgs,
    out: &Option<PathBuf>,
) -> Result<u8, Failure> {
    // groups of images; pairs are formed within each group
    let groups: Vec<Vec<(String, GridMeasure)>> = match dir {
        Some(dir) => {
            let mut group = Vec::new();
            for path in image_files(dir)? {
                let name = path.file_name().unwrap().to_string_lossy().into_owned();
                let mu = load_measure(&path)
                    .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
                group.push((name, mu));
            }
            vec![group]
        }
        None => {
            let mut groups = Vec::new();
            for class in parse_classes(&corpus.classes)? {
                for &n in &corpus.sizes {
                    let imgs = synth_class(corpus.seed, class, n, corpus.count);
                    let mut group = Vec::new();
                    for img in imgs {
                        group.push((img.name(), img.measure()?));
                    }
                    groups.push(group);
                }
            }
            groups
        }
    };
    if groups.iter().all(|g| g.len() < 2) {
        return Err(Failure::input("need at least two images"));
    }

    let mut w = csv_writer(open_out(out)?);
    w.write_record(["image_a", "image_b", "metric", "N", "value", "seconds"])
        .map_err(csv_err)?;
    let mut code = 0;
    for group in &groups {
        let run = pairwise_matrix(group, args.metric(), &args.config());
        if args.metric().uses_spectra() {
            eprintln!("spectrum warmup: {} s", run.warmup_seconds);
        }
        for r in &run.rows {
            w.write_record([
                r.image_a.clone(),
                r.image_b.clone(),
                r.metric.clone(),
                r.n.to_string(),
                r.value.to_string(),
                r.seconds.to_string(),
            ])
            .map_err(csv_err)?;
        }
        for (a, b, e) in &run.errors {
            let f = Failure::from(e.clone());
            eprintln!("{a} vs {b}: {}", f.message);
            code = code.max(f.code);
        }
    }
    w.flush()?;
    Ok(code)
}

fn csv_writer(out: Box<dyn Write>) -> csv::Writer<Box<dyn Write>> {
    csv::Writer::from_writer(out)
}

fn csv_err(e: csv::Error) -> Failure {
    Failure::input(e.to_string())
}

#[allow(clippy::too_many_arguments)]
fn verify(
    seed: u64,
    sizes: &[usize],
    pairs: &[usize],
    equal_center: usize,
    translated_f22: bool,
    guard: usize,
    out: &Option<PathBuf>,
    json: &Option<PathBuf>,
    skips: &Option<PathBuf>,
) -> Result<u8, Failure> {
    let mut corpus: Vec<LabeledPair> = Vec::new();
    for (i, &n) in sizes.iter().enumerate() {
        let count = pairs.get(i).or(pairs.last()).copied().unwrap_or(0);
        corpus.extend(random_pairs(seed, 2, n, count, &format!("rand{n}_")));
        corpus.extend(equal_center_pairs(
            seed,
            n,
            equal_center,
            &format!("eqc{n}_"),
        ));
    }
    if corpus.is_empty() {
        return Err(Failure::input("no pairs"));
    }
    let cfg = CheckConfig {
        guard,
        translated_f22,
        ..CheckConfig::default()
    };
    let res = run_suite(&corpus, &cfg);
    write_csv(open_out(out)?, &res.reports)?;
    if let Some(path) = json {
        fs::write(path, to_json(&res.reports)?)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    }
    if let Some(path) = skips {
        let mut w = csv_writer(open_out(&Some(path.clone()))?);
        w.write_record(["pair_id", "check", "reason"])
            .map_err(csv_err)?;
        for s in &res.skipped {
            w.write_record([&s.pair_id, &s.check, &s.reason])
                .map_err(csv_err)?;
        }
        w.flush()?;
    }
    let mut by_check: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &res.skipped {
        *by_check.entry(s.check.as_str()).or_default() += 1;
    }
    for (check, count) in by_check {
        eprintln!("skipped {check}: {count} pairs");
    }
    let failed = res.failures().count();
    let unconverged = res.reports.iter().filter(|r| !r.converged).count();
    eprintln!(
        "{} pairs, {} checks, {} failed, {} unconverged, {} skipped",
        corpus.len(),
        res.reports.len(),
        failed,
        unconverged,
        res.skipped.len()
    );
    Ok(if res.all_converged_pass() { 0 } else { 1 })
}

fn timing_cells(t: &Option<Timing>) -> [String; 2] {
    match t {
        Some(t) => [t.mean.to_string(), t.std.to_string()],
        None => [String::new(), String::new()],
    }
}

#[allow(clippy::too_many_arguments)]
fn bench(
    sizes: &[usize],
    pairs: usize,
    max_transport_size: usize,
    seed: u64,
    classes: &[String],
    oversample: usize,
    guard: usize,
    out: &Option<PathBuf>,
) -> Result<u8, Failure> {
    let classes = parse_classes(classes)?;
    if pairs == 0 {
        return Err(Failure::input("no pairs"));
    }
    let cfg = EvalConfig { oversample, guard };
    let mut w = csv_writer(open_out(out)?);
    w.write_record([
        "N", "w1_mean", "w1_std", "w2_mean", "w2_std", "f12_mean", "f12_std", "f22_mean", "f22_std",
    ])
    .map_err(csv_err)?;
    for &n in sizes {
        let mut set = Vec::new();
        for &class in &classes {
            let imgs = synth_class(seed, class, n, 2 * pairs);
            for pair in imgs.chunks_exact(2) {
                set.push((pair[0].measure()?, pair[1].measure()?));
            }
        }
        let row = bench_row(&set, &cfg, n <= max_transport_size);
        let mut rec = vec![n.to_string()];
        for t in [&row.w1, &row.w2, &row.f12, &row.f22] {
            rec.extend(timing_cells(t));
        }
        w.write_record(&rec).map_err(csv_err)?;
        w.flush()?;
    }
    Ok(0)
}

fn synth(out: &Path, corpus: &CorpusArgs) -> Result<u8, Failure> {
    fs::create_dir_all(out).map_err(|e| Failure::input(format!("{}: {e}", out.display())))?;
    let mut written = 0;
    for class in parse_classes(&corpus.classes)? {
        for &n in &corpus.sizes {
            for img in synth_class(corpus.seed, class, n, corpus.count) {
                let path = out.join(format!("{}.pgm", img.name()));
                write_pgm(&path, n, n, &img.pixels)?;
                written += 1;
            }
        }
    }
    eprintln!("wrote {written} images to {}", out.display());
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::input(e.to_string()))?;
    }
    match &cli.command {
        Command::Compute { a, b, metric } => compute(a, b, metric),
        Command::Matrix {
            dir,
            metric,
            corpus,
            out,
        } => matrix(dir, metric, corpus, out),
        Command::Verify {
            seed,
            sizes,
            pairs,
            equal_center,
            translated_f22,
            guard,
            out,
            json,
            skips,
        } => verify(
            *seed,
            sizes,
            pairs,
            *equal_center,
            *translated_f22,
            *guard,
            out,
            json,
            skips,
        ),
        Command::Bench {
            sizes,
            pairs,
            max_transport_size,
            seed,
            classes,
            oversample,
            guard,
            out,
        } => bench(
            sizes,
            *pairs,
            *max_transport_size,
            *seed,
            classes,
            *oversample,
            *guard,
            out,
        ),
        Command::Synth { out, corpus } => synth(out, corpus),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
