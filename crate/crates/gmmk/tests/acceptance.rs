//! Acceptance suite. Runs every criterion, prints one line per criterion and
//! exits nonzero if any of them fails.
//!
//! Criterion 7 needs external data and a stock LIBSVM build. It runs when
//! `GMMK_CAR_DIR` holds `car.train` and `car.test` in LIBSVM format and
//! `GMMK_LIBSVM_DIR` holds the `svm-train` and `svm-predict` binaries;
//! otherwise it prints SKIP.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use gmmk::io;
use gmmk::par;
use gmmk::sweep::{self, run_sweep, SweepGrid, SweepKernel, SweepOptions};
use gmmk_core::featurize::{encode, FeatureConfig};
use gmmk_core::gcws::{
    bits_for, collision_count, estimate_collision, hash_one, signature, CollisionMode, HashConfig,
};
use gmmk_core::kernels::{egmm, epgmm, gmm, pgmm, KernelSpec};
use gmmk_core::learn::{Dataset, TrainConfig};
use gmmk_core::rng::CounterRng;
use gmmk_core::vectorspace::{transform, TransformedVector};
use gmmk_core::SparseVector;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Outcome::{Fail, Pass, Skip};

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// Signed sparse vector: each coordinate nonzero with probability `density`,
/// magnitudes log-uniform over two decades.
fn signed(rng: &mut CounterRng, d: usize, density: f64) -> SparseVector {
    loop {
        let dense: Vec<f64> = (0..d)
            .map(|_| {
                if rng.next_f64() < density {
                    let m = 10f64.powf(2.0 * rng.next_f64() - 1.0);
                    if rng.below(2) == 0 {
                        m
                    } else {
                        -m
                    }
                } else {
                    0.0
                }
            })
            .collect();
        let v = SparseVector::from_dense(&dense).unwrap();
        if !v.is_zero() {
            return v;
        }
    }
}

/// A partner for `a`: each coordinate is kept with jitter or redrawn, so
/// pairs cover the whole similarity range rather than clustering near zero.
fn partner(rng: &mut CounterRng, a: &SparseVector, density: f64) -> SparseVector {
    let keep = rng.next_f64();
    let fresh = signed(rng, a.dim(), density).to_dense();
    let dense: Vec<f64> = a
        .to_dense()
        .iter()
        .zip(&fresh)
        .map(|(&x, &y)| {
            if x != 0.0 && rng.next_f64() < keep {
                x * (0.5 + rng.next_f64())
            } else {
                y
            }
        })
        .collect();
    let v = SparseVector::from_dense(&dense).unwrap();
    if v.is_zero() {
        a.clone()
    } else {
        v
    }
}

/// Brute-force `sum(min^g) / sum(max^g)` over the dense split vectors.
fn dense_pgmm(a: &SparseVector, b: &SparseVector, gamma: f64) -> f64 {
    let split = |u: &SparseVector| -> Vec<f64> {
        u.to_dense()
            .iter()
            .flat_map(|&x| [x.max(0.0), (-x).max(0.0)])
            .collect()
    };
    let (x, y) = (split(a), split(b));
    let (mut num, mut den) = (0.0, 0.0);
    for (p, q) in x.iter().zip(&y) {
        num += p.min(*q).powf(gamma);
        den += p.max(*q).powf(gamma);
    }
    num / den
}

fn collision_fidelity() -> Outcome {
    let (d, k, pairs) = (100, 10_000, 50);
    let mut rng = CounterRng::new(1, 0);
    let mut details = Vec::new();
    let mut ok = true;
    for gamma in [0.25, 1.0, 5.0] {
        let mut within = 0;
        for t in 0..pairs {
            let a = signed(&mut rng, d, 0.2);
            let b = if t % 2 == 0 {
                partner(&mut rng, &a, 0.2)
            } else {
                signed(&mut rng, d, 0.2)
            };
            let (sa, sb) = (transform(&a), transform(&b));
            let p = pgmm(&sa, &sb, gamma).unwrap();
            if !rel_close(p, dense_pgmm(&a, &b, gamma), 1e-10) {
                return Fail(format!(
                    "kernel disagrees with brute force at gamma {gamma}, pair {t}"
                ));
            }
            let cfg = HashConfig::new(gamma, k, 1000 + t as u64, 2 * d).unwrap();
            let est = estimate_collision(
                &signature(&sa, &cfg).unwrap(),
                &signature(&sb, &cfg).unwrap(),
                CollisionMode::Full,
            )
            .unwrap();
            let se = (p * (1.0 - p) / k as f64).sqrt();
            if (est - p).abs() <= 4.0 * se {
                within += 1;
            }
        }
        ok &= within >= 48;
        details.push(format!("gamma {gamma}: {within}/{pairs}"));
    }
    verdict(ok, format!("{} within 4 SE (need 48)", details.join(", ")))
}

fn power_reduction() -> Outcome {
    let mut rng = CounterRng::new(2, 0);
    for trial in 0..100u64 {
        let v = transform(&signed(&mut rng, 40, 0.4));
        let gamma = 0.05 + 9.95 * rng.next_f64();
        let j = rng.below(256) as usize;
        let cfg = HashConfig::new(gamma, 256, 500 + trial, v.dim()).unwrap();
        let direct = hash_one(&v, &cfg, j).unwrap();
        let powered = hash_one(
            &v.powered(gamma).unwrap(),
            &HashConfig { gamma: 1.0, ..cfg },
            j,
        )
        .unwrap();
        if direct != powered {
            return Fail(format!(
                "trial {trial}: {direct:?} vs {powered:?} at gamma {gamma}"
            ));
        }
    }
    Pass("100/100 triples identical".into())
}

fn degeneracy_chain() -> Outcome {
    let mut rng = CounterRng::new(3, 0);
    let mut worst = 0f64;
    for t in 0..1000 {
        let a = transform(&signed(&mut rng, 30, 0.4));
        let b = transform(&partner(&mut rng, &a.restore(), 0.4));
        let gamma = 0.05 + 4.95 * rng.next_f64();
        let g = gmm(&a, &b).unwrap();
        if pgmm(&a, &b, 1.0).unwrap().to_bits() != g.to_bits() {
            return Fail(format!("pair {t}: pgmm(1) != gmm"));
        }
        if epgmm(&a, &b, 1.0, gamma).unwrap().to_bits() != egmm(&a, &b, gamma).unwrap().to_bits() {
            return Fail(format!("pair {t}: epgmm(1, g) != egmm(g)"));
        }
        let p = pgmm(&a, &b, gamma).unwrap();
        let q = gmm(&a.powered(gamma).unwrap(), &b.powered(gamma).unwrap()).unwrap();
        let err = if p == q {
            0.0
        } else {
            (p - q).abs() / p.abs().max(q.abs())
        };
        worst = worst.max(err);
        if err > 1e-10 {
            return Fail(format!("pair {t}: pgmm {p} vs gmm of powers {q}"));
        }
    }
    Pass(format!(
        "1000 pairs exact; power identity worst rel err {worst:.1e}"
    ))
}

fn scale_invariance() -> Outcome {
    let mut rng = CounterRng::new(4, 0);
    let mut worst = 0f64;
    for t in 0..1000 {
        let a = transform(&signed(&mut rng, 30, 0.4));
        let b = transform(&partner(&mut rng, &a.restore(), 0.4));
        let gamma = 0.05 + 4.95 * rng.next_f64();
        let (g, p) = (gmm(&a, &b).unwrap(), pgmm(&a, &b, gamma).unwrap());
        for c in [1e-3, 1.0, 1e3] {
            let (sa, sb): (TransformedVector, TransformedVector) =
                (a.scaled(c).unwrap(), b.scaled(c).unwrap());
            for (x, y) in [
                (gmm(&sa, &sb).unwrap(), g),
                (pgmm(&sa, &sb, gamma).unwrap(), p),
            ] {
                let err = if x == y {
                    0.0
                } else {
                    (x - y).abs() / x.abs().max(y.abs())
                };
                worst = worst.max(err);
                if err > 1e-12 {
                    return Fail(format!("pair {t}, c={c}: {x} vs {y}"));
                }
            }
        }
    }
    Pass(format!("1000 pairs x 3 scales; worst rel err {worst:.1e}"))
}

fn encoding_contract() -> Outcome {
    let mut rng = CounterRng::new(5, 0);
    let d = 60;
    let full = bits_for(2 * d);
    let mut checked = 0;
    for seed in 0..100u64 {
        let a = transform(&signed(&mut rng, d, 0.3));
        let b = transform(&partner(&mut rng, &a.restore(), 0.3));
        let k = 1 + rng.below(300) as usize;
        let cfg = HashConfig::new(0.1 + 3.0 * rng.next_f64(), k, seed, 2 * d).unwrap();
        let (sa, sb) = (signature(&a, &cfg).unwrap(), signature(&b, &cfg).unwrap());
        for bits in 1..=full + 3 {
            let fc = FeatureConfig::new(bits, k).unwrap();
            let (fa, fb) = (encode(&sa, &fc).unwrap(), encode(&sb, &fc).unwrap());
            for f in [&fa, &fb] {
                let blocks: Vec<usize> = f.ones().iter().map(|&pos| pos >> bits).collect();
                if f.ones().len() != k || blocks != (0..k).collect::<Vec<_>>() {
                    return Fail(format!("seed {seed}, b={bits}: not one 1 per block"));
                }
            }
            if bits >= full {
                let normalized = fa.dot(&fb).unwrap() as f64 / k as f64;
                let index_only = estimate_collision(&sa, &sb, CollisionMode::IndexOnly).unwrap();
                if normalized != index_only {
                    return Fail(format!(
                        "seed {seed}, b={bits}: {normalized} vs {index_only}"
                    ));
                }
                let full_count = collision_count(&sa, &sb, CollisionMode::Full).unwrap();
                if fa.dot(&fb).unwrap() < full_count {
                    return Fail(format!(
                        "seed {seed}: fewer index matches than full matches"
                    ));
                }
            }
            checked += 1;
        }
    }
    Pass(format!(
        "{checked} encodings; exact index-only equality for b >= {full}"
    ))
}

fn write_libsvm(path: &Path, data: &Dataset) {
    io::write_libsvm(path, data).unwrap();
}

fn gmmk(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_gmmk"))
        .args(args)
        .output()
        .unwrap();
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

/// A sweep CSV without the timing column.
fn without_seconds(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string() + "\n")
        .collect()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = CounterRng::new(6, 0);
    let (train, test) = radial_dataset(&mut rng, 150, 150, 12);
    let (tr, te) = (
        dir.path().join("train.libsvm"),
        dir.path().join("test.libsvm"),
    );
    write_libsvm(&tr, &train);
    write_libsvm(&te, &test);
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let (tr, te) = (tr.to_str().unwrap(), te.to_str().unwrap());
    let mut outputs: Vec<(String, Vec<u8>, String, String)> = Vec::new();
    for (run, threads) in [(0, "1"), (1, "4"), (2, "1"), (3, "4")] {
        let sig = p(&format!("sig{run}"));
        let (hashed, exact) = (
            p(&format!("hashed{run}.csv")),
            p(&format!("exact{run}.csv")),
        );
        let steps = [
            vec![
                "--threads",
                threads,
                "hash",
                "--gamma",
                "0.5",
                "--k",
                "512",
                "--seed",
                "77",
                "--in",
                tr,
                "--out",
                &sig,
            ],
            vec![
                "--threads",
                threads,
                "sweep",
                "--kernel",
                "hash-pgmm",
                "--k",
                "128",
                "--b",
                "6",
                "--hash-seed",
                "9",
                "--gammas",
                "0.25,1",
                "--Cs",
                "0.1,1",
                "--train",
                tr,
                "--test",
                te,
                "--out",
                &hashed,
            ],
            vec![
                "--threads",
                threads,
                "sweep",
                "--kernel",
                "epgmm",
                "--gammas",
                "0.5,2",
                "--gammas2",
                "1,3",
                "--Cs",
                "1",
                "--train",
                tr,
                "--test",
                te,
                "--out",
                &exact,
            ],
        ];
        for step in &steps {
            if let Err(e) = gmmk(step) {
                return Fail(e);
            }
        }
        outputs.push((
            threads.to_string(),
            std::fs::read(&sig).unwrap(),
            without_seconds(Path::new(&hashed)),
            without_seconds(Path::new(&exact)),
        ));
    }
    let first = &outputs[0];
    for o in &outputs[1..] {
        if o.1 != first.1 {
            return Fail(format!("signature file differs with --threads {}", o.0));
        }
        if o.2 != first.2 || o.3 != first.3 {
            return Fail(format!("sweep cells differ with --threads {}", o.0));
        }
    }
    Pass(format!(
        "4 runs (threads 1,4,1,4): signatures and {} sweep cells byte-identical",
        first.2.lines().count() + first.3.lines().count() - 2
    ))
}

fn libsvm_accuracy(
    bin: &Path,
    train: &Path,
    test: &Path,
    c: f64,
    work: &Path,
) -> Result<f64, String> {
    let model = work.join("model");
    let pred = work.join("pred");
    let run = |exe: &str, args: Vec<&std::ffi::OsStr>| -> Result<String, String> {
        let out = Command::new(bin.join(exe))
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(String::from_utf8_lossy(&out.stderr).into_owned());
        }
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    };
    let c = c.to_string();
    run(
        "svm-train",
        vec![
            "-q".as_ref(),
            "-t".as_ref(),
            "4".as_ref(),
            "-c".as_ref(),
            c.as_ref(),
            train.as_os_str(),
            model.as_os_str(),
        ],
    )?;
    let text = run(
        "svm-predict",
        vec![test.as_os_str(), model.as_os_str(), pred.as_os_str()],
    )?;
    // "Accuracy = 98.9583% (855/864) (classification)"
    text.split("Accuracy = ")
        .nth(1)
        .and_then(|t| t.split('%').next())
        .and_then(|t| t.trim().parse().ok())
        .ok_or_else(|| format!("unexpected svm-predict output: {text}"))
}

fn car_reproduction() -> Outcome {
    let (Some(data), Some(bin)) = (
        std::env::var_os("GMMK_CAR_DIR"),
        std::env::var_os("GMMK_LIBSVM_DIR"),
    ) else {
        return Skip("set GMMK_CAR_DIR and GMMK_LIBSVM_DIR to run".into());
    };
    let (data, bin) = (PathBuf::from(data), PathBuf::from(bin));
    let train = io::read_libsvm(&data.join("car.train")).unwrap();
    let test = io::read_libsvm(&data.join("car.test")).unwrap();
    let dim = train.dim().max(test.dim());
    let (train, test) = (train.with_dim(dim).unwrap(), test.with_dim(dim).unwrap());
    let work = tempfile::tempdir().unwrap();
    let cs = [0.01, 0.1, 1.0, 10.0, 100.0, 1000.0];
    let best_for = |spec: KernelSpec| -> Result<f64, String> {
        let ids = (0..train.len()).map(|i| i.to_string()).collect();
        let gram = par::gram(train.rows(), ids, spec).map_err(|e| e.to_string())?;
        let cross = par::cross_gram(test.rows(), train.rows(), spec).map_err(|e| e.to_string())?;
        let (tr, te) = (work.path().join("k.train"), work.path().join("k.test"));
        io::write_precomputed(&tr, &gram, train.labels()).map_err(|e| e.to_string())?;
        io::write_atomically(&te, |w| {
            io::write_precomputed_rows(w, test.labels(), &cross)
        })
        .map_err(|e| e.to_string())?;
        let mut best = 0f64;
        for c in cs {
            best = best.max(libsvm_accuracy(&bin, &tr, &te, c, work.path())?);
        }
        Ok(best)
    };
    let gmm_best = match best_for(KernelSpec::Gmm) {
        Ok(a) => a,
        Err(e) => return Fail(e),
    };
    let mut pgmm_best = 0f64;
    for gamma in sweep::pgmm24() {
        match best_for(KernelSpec::Pgmm { gamma }) {
            Ok(a) => pgmm_best = pgmm_best.max(a),
            Err(e) => return Fail(e),
        }
    }
    verdict(
        (gmm_best - 98.96).abs() <= 0.6 && pgmm_best >= 99.0,
        format!("GMM best {gmm_best:.2}% (target 98.96 +- 0.6), pGMM best {pgmm_best:.2}% (need >= 99.0)"),
    )
}

/// Two classes split by min-max similarity to a fixed signed centre:
/// class 1 iff gmm(x, centre) exceeds the median over a pilot sample.
fn radial_dataset(
    rng: &mut CounterRng,
    n_train: usize,
    n_test: usize,
    d: usize,
) -> (Dataset, Dataset) {
    let centre = transform(&signed(rng, d, 0.6));
    let draw = |rng: &mut CounterRng| signed(rng, d, 0.6);
    let mut pilot: Vec<f64> = (0..2000)
        .map(|_| gmm(&transform(&draw(rng)), &centre).unwrap())
        .collect();
    pilot.sort_by(f64::total_cmp);
    let threshold = pilot[pilot.len() / 2];
    let mut make = |n: usize| {
        let rows: Vec<SparseVector> = (0..n).map(|_| draw(rng)).collect();
        let labels = rows
            .iter()
            .map(|r| i64::from(gmm(&transform(r), &centre).unwrap() > threshold))
            .collect();
        Dataset::new(rows, labels, d).unwrap()
    };
    (make(n_train), make(n_test))
}

fn best_accuracy(
    kernel: SweepKernel,
    gammas: &[f64],
    train: &Dataset,
    test: &Dataset,
) -> Result<(f64, Option<f64>), String> {
    let dir = tempfile::tempdir().unwrap();
    let grid = SweepGrid {
        gammas: gammas.to_vec(),
        gammas2: vec![1.0],
        cs: vec![0.01, 0.1, 1.0, 10.0],
    };
    // a 200-epoch cap bounds the runtime of nonseparable cells
    let train_cfg = TrainConfig {
        max_iters: 200,
        ..TrainConfig::default()
    };
    let opts = SweepOptions {
        train: train_cfg,
        cache_dir: None,
    };
    let report = run_sweep(kernel, &grid, train, test, &opts, &dir.path().join("r.csv"))
        .map_err(|e| e.to_string())?;
    if let Some((key, e)) = report.failures.first() {
        return Err(format!("{key:?}: {e}"));
    }
    let best = report
        .cells
        .iter()
        .max_by(|a, b| a.accuracy.total_cmp(&b.accuracy))
        .ok_or("empty sweep")?;
    Ok((100.0 * best.accuracy, best.key.gamma1))
}

/// Accuracies (percent) from the pre-build brute-force run of this exact
/// configuration; the pipeline is deterministic so reruns must reproduce them.
const PINNED_LINEAR: f64 = 76.40;
const PINNED_HASHED: f64 = 92.80;

fn hashing_beats_linear() -> Outcome {
    let mut rng = CounterRng::new(8, 0);
    let (train, test) = radial_dataset(&mut rng, 2000, 2000, 20);
    let linear = match best_accuracy(SweepKernel::Linear, &[], &train, &test) {
        Ok((a, _)) => a,
        Err(e) => return Fail(e),
    };
    let hashed_kernel = SweepKernel::HashedPgmm {
        k: 1024,
        b: 8,
        seed: 1,
    };
    let (hashed, gamma) = match best_accuracy(hashed_kernel, &[0.25, 1.0, 5.0], &train, &test) {
        Ok(r) => r,
        Err(e) => return Fail(e),
    };
    let pinned = |p: f64, v: f64| (p - v).abs() < 0.005;
    let reproduced = pinned(PINNED_LINEAR, linear) && pinned(PINNED_HASHED, hashed);
    verdict(
        hashed - linear >= 5.0 && reproduced,
        format!(
            "linear {linear:.2}%, hashed pGMM {hashed:.2}% at gamma {}, gap {:.2} (need >= 5){}",
            gamma.unwrap_or(f64::NAN),
            hashed - linear,
            if reproduced {
                ""
            } else {
                "; differs from pinned values"
            }
        ),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "collision-probability fidelity", collision_fidelity),
        (2, "power-reduction identity", power_reduction),
        (3, "degeneracy chain", degeneracy_chain),
        (4, "scale invariance", scale_invariance),
        (5, "encoding contract", encoding_contract),
        (6, "determinism across reruns and threads", determinism),
        (7, "Car dataset reproduction", car_reproduction),
        (8, "hashing beats linear", hashing_beats_linear),
    ];
    let mut failures = 0;
    for (n, name, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failures += 1;
                ("FAIL", d)
            }
            Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] {n}. {name}: {detail} ({secs:.1}s)");
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
