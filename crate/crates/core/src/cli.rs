//! The `tdec` command line: decompose, bounds, synth and verify.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::algebra::{Point, Polynomial, Scalar, Shape};
use crate::decompose::{decompose, rank_bounds, verify, DecomposeOptions, Decomposition};
use crate::io::{DecompositionFile, Field, FileError, Meta, TensorFile};
use crate::moment::enumerate_monomials;
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_FOUND: i32 = 2;
pub const EXIT_ABOVE_THRESHOLD: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tdec", version, about = "Rank-1 decompositions of partially symmetric tensors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decompose a tensor into a minimal sum of rank-1 terms.
    Decompose(DecomposeArgs),
    /// Print lower, upper, expected and Kruskal rank bounds.
    Bounds(BoundsArgs),
    /// Generate a random tensor of given rank together with its terms.
    Synth(SynthArgs),
    /// Residual of a decomposition against a tensor.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub max_rank: Option<usize>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_rank: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_resid: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Compress to the detected multilinear rank before decomposing.
    #[arg(long)]
    pub reduce: bool,
    /// Number field of the written terms (defaults to the input's).
    #[arg(long, value_enum)]
    pub field: Option<Field>,
    /// Print every term and record the elapsed time in the output.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_rank: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Affine dimensions n_i, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    /// Degrees δ_i, comma separated (default all 1).
    #[arg(long, value_delimiter = ',')]
    pub degrees: Vec<u32>,
    #[arg(long)]
    pub rank: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Gaussian noise level relative to the RMS coefficient.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, value_enum, default_value_t = Field::Real)]
    pub field: Field,
    /// Tensor file; the terms go to `<stem>.truth.json` unless `--truth`.
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub decomposition: PathBuf,
    /// Largest residual accepted.
    #[arg(long, default_value_t = 1e-6)]
    pub tol_resid: f64,
}

pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Decompose(a) => cmd_decompose(&a),
        Command::Bounds(a) => cmd_bounds(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Verify(a) => cmd_verify(&a),
    }
}

fn fail(e: impl std::fmt::Display) -> i32 {
    eprintln!("error: {e}");
    EXIT_ERROR
}

fn write(path: &Path, text: &str) -> Result<(), FileError> {
    std::fs::write(path, text).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn cmd_decompose(a: &DecomposeArgs) -> i32 {
    let file = match TensorFile::read(&a.input) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    let t = file.to_polynomial();
    let opts = DecomposeOptions {
        max_rank: a.max_rank,
        tol_rank: a.tol_rank,
        tol_resid: a.tol_resid,
        seed: a.seed,
        reduce: a.reduce,
        ..DecomposeOptions::default()
    };
    let start = Instant::now();
    let d = match decompose(&t, &opts) {
        Ok(d) => d,
        Err(Error::NotFound {
            max_rank,
            best_residual,
            diagnostics,
        }) => {
            println!("no decomposition found up to rank {max_rank}");
            eprintln!("best residual {best_residual:e}; {diagnostics}");
            return EXIT_NOT_FOUND;
        }
        Err(e) => return fail(e),
    };
    let elapsed = start.elapsed();
    let bounds = rank_bounds(&t, a.tol_rank).ok();
    let meta = Meta {
        seed: Some(a.seed),
        tol_rank: Some(a.tol_rank),
        tol_resid: Some(a.tol_resid),
        bounds,
        reduced_dims: d.reduced_dims.clone(),
        elapsed_ms: a.verbose.then_some(elapsed.as_millis() as u64),
        ..Meta::default()
    };
    let out = DecompositionFile::from_decomposition(&d, a.field.unwrap_or(file.field), meta);
    println!("rank {}, residual {:.3e}", d.rank(), d.residual);
    if let Some(dims) = &d.reduced_dims {
        println!("compressed to dims {dims:?} before decomposing");
    }
    if d.coordinate_change.is_some() {
        println!("decomposed after a random change of coordinates");
    }
    if a.verbose {
        for (w, p) in &d.terms {
            println!("  {}", format_term(*w, p));
        }
        println!("elapsed {} ms", elapsed.as_millis());
    }
    if let Some(path) = &a.output {
        if let Err(e) = write(path, &out.to_json()) {
            return fail(e);
        }
    }
    EXIT_OK
}

fn format_term(w: Scalar, p: &Point) -> String {
    let num = |z: Scalar| {
        if z.im == 0.0 {
            format!("{}", z.re)
        } else {
            format!("({}{:+}i)", z.re, z.im)
        }
    };
    let groups: Vec<String> = p
        .coords
        .iter()
        .map(|g| g.iter().map(|&z| num(z)).collect::<Vec<_>>().join(", "))
        .collect();
    format!("{} * [{}]", num(w), groups.join(" | "))
}

pub fn cmd_bounds(a: &BoundsArgs) -> i32 {
    let file = match TensorFile::read(&a.input) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    match rank_bounds(&file.to_polynomial(), a.tol_rank) {
        Ok(b) => {
            println!("lower {}", b.lower);
            println!("upper {}", b.upper);
            println!("expected {}", b.expected);
            match b.kruskal {
                Some(k) => println!("kruskal {k}"),
                None => println!("kruskal n/a"),
            }
            EXIT_OK
        }
        Err(e) => fail(e),
    }
}

/// Random terms with coordinates in `[-1, 1]` (or the unit square for
/// complex) and weights of modulus in `[0.5, 2]` with random sign.
pub fn synth_terms(shape: &Shape, rank: usize, field: Field, rng: &mut ChaCha8Rng) -> Vec<(Scalar, Point)> {
    let draw = |rng: &mut ChaCha8Rng| match field {
        Field::Real => Scalar::new(rng.random_range(-1.0..1.0), 0.0),
        Field::Complex => Scalar::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
    };
    (0..rank)
        .map(|_| {
            let coords = shape
                .dims()
                .iter()
                .map(|&n| (0..n).map(|_| draw(rng)).collect())
                .collect();
            let modulus: f64 = rng.random_range(0.5..2.0);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (
                Scalar::new(sign * modulus, 0.0),
                Point::new(shape, coords).expect("coordinates match shape"),
            )
        })
        .collect()
}

pub fn cmd_synth(a: &SynthArgs) -> i32 {
    let degrees = if a.degrees.is_empty() {
        vec![1; a.dims.len()]
    } else {
        a.degrees.clone()
    };
    let shape = match Shape::new(a.dims.clone(), degrees) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    if a.rank == 0 {
        return fail("rank must be at least 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let terms = synth_terms(&shape, a.rank, a.field, &mut rng);
    let d = Decomposition::new(shape.clone(), terms);
    let mut t = match d.to_polynomial() {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    if a.noise > 0.0 {
        t = add_noise(&t, a.noise, &mut rng);
    }
    let mut truth = d.clone();
    truth.residual = verify(&t, &d).unwrap_or(f64::NAN);
    let meta = Meta {
        seed: Some(a.seed),
        noise: (a.noise > 0.0).then_some(a.noise),
        ..Meta::default()
    };
    let truth_file = DecompositionFile::from_decomposition(&truth, a.field, meta);
    let truth_path = a.truth.clone().unwrap_or_else(|| {
        let stem = a.output.file_stem().map_or_else(|| "tensor".into(), |s| s.to_string_lossy().into_owned());
        a.output.with_file_name(format!("{stem}.truth.json"))
    });
    for (path, text) in [
        (&a.output, TensorFile::from_polynomial(&t, a.field).to_json()),
        (&truth_path, truth_file.to_json()),
    ] {
        if let Err(e) = write(path, &text) {
            return fail(e);
        }
    }
    println!(
        "wrote rank-{} tensor to {} and its terms to {}",
        a.rank,
        a.output.display(),
        truth_path.display()
    );
    EXIT_OK
}

/// Adds `N(0, (level · rms)²)` to every coefficient of `R_δ`.
pub fn add_noise(t: &Polynomial, level: f64, rng: &mut ChaCha8Rng) -> Polynomial {
    let shape = t.shape();
    let monos = enumerate_monomials(shape, shape.degrees());
    let rms = t.norm() / (monos.len() as f64).sqrt();
    let normal = Normal::new(0.0, level * rms).expect("finite noise level");
    let mut out = t.clone();
    for m in monos {
        out.add_term(m, Scalar::new(normal.sample(rng), 0.0));
    }
    out
}

pub fn cmd_verify(a: &VerifyArgs) -> i32 {
    let tensor = match TensorFile::read(&a.input) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    let dec = match DecompositionFile::read(&a.decomposition) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    let shape = tensor.shape();
    let terms = match dec.to_terms(&shape) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    let residual = match verify(&tensor.to_polynomial(), &Decomposition::new(shape, terms)) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    println!("residual {residual:e}");
    if residual <= a.tol_resid {
        EXIT_OK
    } else {
        EXIT_ABOVE_THRESHOLD
    }
}
