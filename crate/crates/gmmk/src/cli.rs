use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{CommandFactory, Parser, Subcommand};
use gmmk_core::featurize::FeatureConfig;
use gmmk_core::gcws::HashConfig;
use gmmk_core::kernels::KernelSpec;
use gmmk_core::learn::{evaluate, train_linear, Dataset, TrainConfig};
use gmmk_core::vectorspace::transform;
use gmmk_core::SparseVector;

use crate::io::{self, LabelDictionary, ReadOptions, SignatureFile};
use crate::par;
use crate::sweep::{self, SweepGrid, SweepKernel, SweepOptions};

/// Environment variable naming the directory where sweeps cache kernel
/// matrices.
pub const CACHE_ENV: &str = "GMMK_CACHE_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "gmmk",
    version,
    about = "Min-max kernels, GCWS hashing and linear SVMs"
)]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Dictionary file mapping string labels to integers; created if absent.
    #[arg(long, global = true, value_name = "PATH")]
    label_dict: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the positive/negative split of every row.
    Transform {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export a kernel matrix in LIBSVM precomputed format.
    Gram {
        #[arg(long)]
        kernel: String,
        #[arg(long)]
        gamma1: Option<f64>,
        #[arg(long)]
        gamma2: Option<f64>,
        #[arg(long = "in")]
        input: PathBuf,
        /// Compute rows of `--in` against these training rows instead of
        /// the square matrix.
        #[arg(long)]
        against: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hash every row with GCWS.
    Hash {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        seed: u64,
        /// Original feature dimension; train and test must agree.
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Expand signatures into b-bit one-hot LIBSVM features.
    Featurize {
        #[arg(long)]
        b: u32,
        /// Signature file.
        #[arg(long = "in")]
        input: PathBuf,
        /// LIBSVM file whose labels belong to the signature rows.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a linear SVM.
    Train {
        #[arg(long = "C")]
        c: f64,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dim: Option<usize>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Predict with a trained model and report accuracy.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        /// One predicted label per line.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a (gamma, C) grid; resumes from an existing results file.
    Sweep {
        /// linear, rbf, gmm, egmm, pgmm, epgmm or hash-pgmm.
        #[arg(long)]
        kernel: String,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Comma-separated values or a preset (rbf58, pgmm24).
        #[arg(long, default_value = "1")]
        gammas: String,
        /// Outer exponents for epgmm.
        #[arg(long, default_value = "1")]
        gammas2: String,
        #[arg(long = "Cs", value_delimiter = ',', required = true)]
        cs: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Hashes per vector (hash-pgmm).
        #[arg(long, default_value_t = 1024)]
        k: usize,
        /// Bits kept per hash (hash-pgmm).
        #[arg(long, default_value_t = 8)]
        b: u32,
        /// Hash seed (hash-pgmm).
        #[arg(long = "hash-seed", default_value_t = 1)]
        hash_seed: u64,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Debug, Clone, Copy, clap::Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, default_value_t = 0.01)]
    tol: f64,
    /// Seed of the coordinate permutation.
    #[arg(long = "train-seed", default_value_t = 0)]
    train_seed: u64,
    #[arg(long)]
    no_bias: bool,
}

impl SolverArgs {
    fn config(&self, c: f64) -> TrainConfig {
        TrainConfig {
            c,
            max_iters: self.max_iters,
            tol: self.tol,
            seed: self.train_seed,
            bias: !self.no_bias,
        }
    }

    fn echo(&self, line: &mut String) {
        let _ = write!(
            line,
            " --max-iters {} --tol {} --train-seed {}",
            self.max_iters, self.tol, self.train_seed
        );
        if self.no_bias {
            line.push_str(" --no-bias");
        }
    }
}

fn path(p: &Path) -> String {
    let s = p.display().to_string();
    if s.contains(char::is_whitespace) {
        format!("'{s}'")
    } else {
        s
    }
}

/// The full command line, defaults included, that reproduces this run.
fn effective_config(cli: &Cli, threads: usize) -> String {
    let mut s = format!("gmmk --threads {threads}");
    if let Some(d) = &cli.label_dict {
        let _ = write!(s, " --label-dict {}", path(d));
    }
    let opt = |name: &str, v: Option<f64>| v.map(|v| format!(" --{name} {v}")).unwrap_or_default();
    let _ = match &cli.command {
        Command::Transform { input, out } => {
            write!(s, " transform --in {} --out {}", path(input), path(out))
        }
        Command::Gram {
            kernel,
            gamma1,
            gamma2,
            input,
            against,
            out,
        } => write!(
            s,
            " gram --kernel {kernel}{}{} --in {}{} --out {}",
            opt("gamma1", *gamma1),
            opt("gamma2", *gamma2),
            path(input),
            against
                .as_deref()
                .map(|a| format!(" --against {}", path(a)))
                .unwrap_or_default(),
            path(out)
        ),
        Command::Hash {
            gamma,
            k,
            seed,
            dim,
            input,
            out,
        } => write!(
            s,
            " hash --gamma {gamma} --k {k} --seed {seed}{} --in {} --out {}",
            dim.map(|d| format!(" --dim {d}")).unwrap_or_default(),
            path(input),
            path(out)
        ),
        Command::Featurize {
            b,
            input,
            labels,
            out,
        } => write!(
            s,
            " featurize --b {b} --in {} --labels {} --out {}",
            path(input),
            path(labels),
            path(out)
        ),
        Command::Train {
            c,
            input,
            model,
            dim,
            solver,
        } => {
            let _ = write!(
                s,
                " train --C {c} --in {} --model {}{}",
                path(input),
                path(model),
                dim.map(|d| format!(" --dim {d}")).unwrap_or_default()
            );
            solver.echo(&mut s);
            Ok(())
        }
        Command::Predict { model, input, out } => write!(
            s,
            " predict --model {} --in {} --out {}",
            path(model),
            path(input),
            path(out)
        ),
        Command::Sweep {
            kernel,
            train,
            test,
            gammas,
            gammas2,
            cs,
            out,
            k,
            b,
            hash_seed,
            solver,
        } => {
            let cs: Vec<String> = cs.iter().map(f64::to_string).collect();
            let _ = write!(
                s,
                " sweep --kernel {kernel} --train {} --test {} --gammas {gammas} --gammas2 {gammas2} --Cs {} --out {} --k {k} --b {b} --hash-seed {hash_seed}",
                path(train),
                path(test),
                cs.join(","),
                path(out)
            );
            solver.echo(&mut s);
            Ok(())
        }
    };
    s
}

/// Parses `0.5,1,2` or a preset name.
fn parse_gammas(text: &str) -> Result<Vec<f64>> {
    if let Some(p) = sweep::preset(text) {
        return Ok(p);
    }
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("bad gamma {t:?}"))
        })
        .collect()
}

fn parse_sweep_kernel(name: &str, k: usize, b: u32, seed: u64) -> Result<SweepKernel> {
    Ok(match name {
        "linear" => SweepKernel::Linear,
        "rbf" => SweepKernel::Rbf,
        "gmm" => SweepKernel::Gmm,
        "egmm" => SweepKernel::Egmm,
        "pgmm" => SweepKernel::Pgmm,
        "epgmm" => SweepKernel::Epgmm,
        "hash-pgmm" => SweepKernel::HashedPgmm { k, b, seed },
        other => bail!("unknown kernel {other:?}"),
    })
}

struct Labels {
    dict: Option<(PathBuf, LabelDictionary)>,
}

impl Labels {
    fn open(path: Option<&Path>) -> Result<Self> {
        let dict = match path {
            Some(p) if p.exists() => Some((p.to_path_buf(), LabelDictionary::load(p)?)),
            Some(p) => Some((p.to_path_buf(), LabelDictionary::default())),
            None => None,
        };
        Ok(Labels { dict })
    }

    fn read(&mut self, file: &Path, dim: Option<usize>) -> Result<Dataset> {
        let dictionary = self.dict.as_mut().map(|(_, d)| d);
        io::read_libsvm_with(file, ReadOptions { dim, dictionary })
            .with_context(|| format!("reading {}", file.display()))
    }

    fn save(&self) -> Result<()> {
        if let Some((p, d)) = &self.dict {
            d.save(p)?;
        }
        Ok(())
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let mut labels = Labels::open(cli.label_dict.as_deref())?;
    match &cli.command {
        Command::Transform { input, out } => {
            let data = labels.read(input, None)?;
            let rows = data
                .rows()
                .iter()
                .map(|r| {
                    let t = transform(r);
                    SparseVector::new(t.dim(), t.iter())
                })
                .collect::<gmmk_core::Result<Vec<_>>>()?;
            let split = Dataset::new(rows, data.labels().to_vec(), 2 * data.dim())?;
            io::write_libsvm(out, &split)?;
        }
        Command::Gram {
            kernel,
            gamma1,
            gamma2,
            input,
            against,
            out,
        } => {
            let spec = KernelSpec::from_parts(kernel, *gamma1, *gamma2)?;
            let data = labels.read(input, None)?;
            match against {
                None => {
                    let ids = (0..data.len()).map(|i| i.to_string()).collect();
                    let gram = par::gram(data.rows(), ids, spec)?;
                    io::write_precomputed(out, &gram, data.labels())?;
                }
                Some(train) => {
                    let train = labels.read(train, None)?;
                    let dim = train.dim().max(data.dim());
                    let (train, data) = (train.with_dim(dim)?, data.with_dim(dim)?);
                    let rows = par::cross_gram(data.rows(), train.rows(), spec)?;
                    io::write_atomically(out, |w| {
                        io::write_precomputed_rows(w, data.labels(), &rows)
                    })?;
                }
            }
        }
        Command::Hash {
            gamma,
            k,
            seed,
            dim,
            input,
            out,
        } => {
            let data = labels.read(input, *dim)?;
            let config = HashConfig::new(*gamma, *k, *seed, 2 * data.dim())?;
            let signatures = par::signatures(data.rows(), &config)?;
            let row_ids = (0..data.len()).map(|i| i.to_string()).collect();
            io::write_signatures(
                out,
                &SignatureFile {
                    config,
                    row_ids,
                    signatures,
                },
            )?;
        }
        Command::Featurize {
            b,
            input,
            labels: label_file,
            out,
        } => {
            let sigs = io::read_signatures(input)
                .with_context(|| format!("reading {}", input.display()))?;
            let data = labels.read(label_file, None)?;
            ensure!(
                data.len() == sigs.signatures.len(),
                "{} has {} rows but {} has {} signatures",
                label_file.display(),
                data.len(),
                input.display(),
                sigs.signatures.len()
            );
            let fc = FeatureConfig::new(*b, sigs.config.k)?;
            let feats = par::features(&sigs.signatures, &fc)?;
            let features = Dataset::from_features(&feats, data.labels().to_vec())?;
            io::write_libsvm(out, &features)?;
        }
        Command::Train {
            c,
            input,
            model,
            dim,
            solver,
        } => {
            let data = labels.read(input, *dim)?;
            let m = train_linear(&data, &solver.config(*c))?;
            io::write_model(model, &m)?;
            println!("training accuracy {:.2}", 100.0 * evaluate(&m, &data)?);
        }
        Command::Predict { model, input, out } => {
            let m =
                io::read_model(model).with_context(|| format!("reading {}", model.display()))?;
            let data = labels.read(input, Some(m.dim()))?;
            let predictions = data
                .rows()
                .iter()
                .map(|r| m.predict(r))
                .collect::<gmmk_core::Result<Vec<_>>>()?;
            io::write_atomically(out, |w| {
                for p in &predictions {
                    writeln!(w, "{p}")?;
                }
                Ok(())
            })?;
            println!("accuracy {:.2}", 100.0 * evaluate(&m, &data)?);
        }
        Command::Sweep {
            kernel,
            train,
            test,
            gammas,
            gammas2,
            cs,
            out,
            k,
            b,
            hash_seed,
            solver,
        } => {
            let kernel = parse_sweep_kernel(kernel, *k, *b, *hash_seed)?;
            let grid = SweepGrid {
                gammas: parse_gammas(gammas)?,
                gammas2: parse_gammas(gammas2)?,
                cs: cs.clone(),
            };
            let (train, test) = (labels.read(train, None)?, labels.read(test, None)?);
            let opts = SweepOptions {
                train: solver.config(1.0),
                cache_dir: std::env::var_os(CACHE_ENV).map(PathBuf::from),
            };
            let report = sweep::run_sweep(kernel, &grid, &train, &test, &opts, out)?;
            println!("kernel,C,best_accuracy,gamma1,gamma2");
            for p in sweep::best_over_gamma(&report.cells) {
                let g = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
                println!(
                    "{},{},{:.2},{},{}",
                    p.kernel,
                    p.c,
                    100.0 * p.accuracy,
                    g(p.gamma1),
                    g(p.gamma2)
                );
            }
            if report.reused > 0 {
                log::info!("{} cells reused from {}", report.reused, out.display());
            }
            if !report.failures.is_empty() {
                for (key, e) in &report.failures {
                    eprintln!(
                        "failed cell {} gamma1={:?} gamma2={:?} C={}: {e}",
                        key.kernel, key.gamma1, key.gamma2, key.c
                    );
                }
                bail!("{} of the grid's cells failed", report.failures.len());
            }
        }
    }
    labels.save()
}

/// Parses `args` (program name first), runs the command, and maps the
/// outcome to an exit code: 0 on success, 1 on a failed run, 2 on bad usage.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let pool = match par::pool(cli.threads) {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    eprintln!("{}", effective_config(&cli, pool.current_num_threads()));
    match pool.install(|| execute(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            eprintln!("{}", Cli::command().render_usage());
            let _ = std::io::stderr().flush();
            ExitCode::from(1)
        }
    }
}
