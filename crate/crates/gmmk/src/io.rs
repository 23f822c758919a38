//! On-disk formats.
//!
//! * LIBSVM sparse: `label idx:val ...`, indices 1-based on disk and 0-based
//!   in memory. Values are written with Rust's shortest round-trip formatting.
//! * LIBSVM precomputed kernel: `label 0:<serial> 1:K(i,1) ... n:K(i,n)`,
//!   serial 1-based, values with 17 significant digits (`%.17g`).
//! * Signatures: a `# gcws ...` header with the hash configuration, then one
//!   row per vector, `row_id k b_available istar:tstar ...` (istar 0-based).
//! * Linear models: a small text format written by [`write_model`].

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use gmmk_core::gcws::{HashConfig, HashSample, HashSignature};
use gmmk_core::kernels::GramMatrix;
use gmmk_core::learn::{Dataset, LinearModel};
use gmmk_core::SparseVector;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Stream(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        source: gmmk_core::Error,
    },
    #[error(transparent)]
    Core(#[from] gmmk_core::Error),
}

type Result<T, E = FormatError> = std::result::Result<T, E>;

fn parse_err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse {
        line,
        message: message.into(),
    }
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| FormatError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Writes through a sibling temporary file and renames on success, so a
/// failed run never leaves a partial artifact at `path`.
pub fn write_atomically<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let io_err = |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    let file = File::create(&tmp).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    let result = body(&mut w).and_then(|_| w.flush().map_err(FormatError::from));
    drop(w);
    match result {
        Ok(()) => std::fs::rename(&tmp, path).map_err(io_err),
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}

/// C's `%.17g`: 17 significant digits, trailing zeros removed.
pub fn fmt_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..17).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mantissa), sign, exp.abs())
    } else {
        trim(&format!("{:.*}", (16 - exp) as usize, x))
    }
}

/// Maps non-numeric class names to integers, persisted as `name<TAB>id`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelDictionary {
    ids: BTreeMap<String, i64>,
}

impl LabelDictionary {
    pub fn load(path: &Path) -> Result<Self> {
        let mut ids = BTreeMap::new();
        for (n, line) in open(path)?.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (name, id) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(n + 1, "expected name<TAB>id"))?;
            let id = id.trim().parse().map_err(|_| parse_err(n + 1, "bad id"))?;
            ids.insert(name.to_string(), id);
        }
        Ok(LabelDictionary { ids })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomically(path, |w| {
            for (name, id) in &self.ids {
                writeln!(w, "{name}\t{id}")?;
            }
            Ok(())
        })
    }

    /// Id of `name`, assigning the next free one if unseen.
    pub fn id(&mut self, name: &str) -> i64 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let next = self.ids.values().max().map_or(0, |m| m + 1);
        self.ids.insert(name.to_string(), next);
        next
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

fn parse_label(token: &str, line: usize, dict: Option<&mut LabelDictionary>) -> Result<i64> {
    let token = token.strip_prefix('+').unwrap_or(token);
    if let Ok(v) = token.parse::<i64>() {
        return Ok(v);
    }
    if let Ok(v) = token.parse::<f64>() {
        if v.fract() == 0.0 && v.abs() < 9.0e15 {
            return Ok(v as i64);
        }
    }
    match dict {
        Some(d) => Ok(d.id(token)),
        None => Err(parse_err(
            line,
            format!("label {token:?} is not an integer"),
        )),
    }
}

/// One parsed LIBSVM line with 0-based indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LibsvmRecord {
    pub label: i64,
    pub pairs: Vec<(usize, f64)>,
}

/// Parses one non-empty line. Explicit zero values are dropped.
pub fn parse_libsvm_line(
    text: &str,
    line: usize,
    dict: Option<&mut LabelDictionary>,
) -> Result<LibsvmRecord> {
    let mut tokens = text.split_whitespace();
    let label = parse_label(
        tokens
            .next()
            .ok_or_else(|| parse_err(line, "missing label"))?,
        line,
        dict,
    )?;
    let mut pairs = Vec::new();
    let mut last = 0usize;
    for token in tokens {
        let (idx, val) = token
            .split_once(':')
            .ok_or_else(|| parse_err(line, format!("bad pair {token:?}")))?;
        let idx: usize = idx
            .parse()
            .map_err(|_| parse_err(line, format!("bad index {idx:?}")))?;
        if idx == 0 {
            return Err(parse_err(line, "indices are 1-based"));
        }
        if idx <= last {
            return Err(parse_err(line, format!("index {idx} not increasing")));
        }
        last = idx;
        let val: f64 = val
            .parse()
            .map_err(|_| parse_err(line, format!("bad value {val:?}")))?;
        if !val.is_finite() {
            return Err(parse_err(line, format!("non-finite value at index {idx}")));
        }
        if val != 0.0 {
            pairs.push((idx - 1, val));
        }
    }
    Ok(LibsvmRecord { label, pairs })
}

/// Options for reading LIBSVM data.
#[derive(Debug, Default)]
pub struct ReadOptions<'a> {
    /// Force this dimension instead of the largest index seen.
    pub dim: Option<usize>,
    pub dictionary: Option<&'a mut LabelDictionary>,
}

pub fn read_libsvm_from<R: BufRead>(reader: R, mut opts: ReadOptions<'_>) -> Result<Dataset> {
    let mut records = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            log::warn!("line {}: empty line skipped", n + 1);
            continue;
        }
        records.push((
            n + 1,
            parse_libsvm_line(&line, n + 1, opts.dictionary.as_deref_mut())?,
        ));
    }
    let seen = records
        .iter()
        .filter_map(|(_, r)| r.pairs.last().map(|p| p.0 + 1))
        .max()
        .unwrap_or(1);
    let dim = match opts.dim {
        Some(d) if d < seen => {
            return Err(parse_err(
                0,
                format!("index {seen} exceeds requested dimension {d}"),
            ))
        }
        Some(d) => d,
        None => seen,
    };
    let mut rows = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for (line, r) in records {
        rows.push(
            SparseVector::new(dim, r.pairs)
                .map_err(|source| FormatError::Invalid { line, source })?,
        );
        labels.push(r.label);
    }
    Ok(Dataset::new(rows, labels, dim)?)
}

pub fn read_libsvm(path: &Path) -> Result<Dataset> {
    read_libsvm_from(open(path)?, ReadOptions::default())
}

pub fn read_libsvm_with(path: &Path, opts: ReadOptions<'_>) -> Result<Dataset> {
    read_libsvm_from(open(path)?, opts)
}

pub fn write_libsvm_row<W: Write>(w: &mut W, label: i64, row: &SparseVector) -> io::Result<()> {
    write!(w, "{label}")?;
    for (i, x) in row.iter() {
        write!(w, " {}:{}", i + 1, x)?;
    }
    writeln!(w)
}

pub fn write_libsvm_to<W: Write>(w: &mut W, data: &Dataset) -> io::Result<()> {
    for (row, &label) in data.rows().iter().zip(data.labels()) {
        write_libsvm_row(w, label, row)?;
    }
    Ok(())
}

pub fn write_libsvm(path: &Path, data: &Dataset) -> Result<()> {
    write_atomically(path, |w| Ok(write_libsvm_to(w, data)?))
}

/// Precomputed-kernel rows: `label 0:<serial> 1:v ... n:v`.
pub fn write_precomputed_rows<W: Write>(
    w: &mut W,
    labels: &[i64],
    rows: &[Vec<f64>],
) -> Result<()> {
    if labels.len() != rows.len() {
        return Err(gmmk_core::Error::LengthMismatch {
            rows: rows.len(),
            labels: labels.len(),
        }
        .into());
    }
    for (i, (label, row)) in labels.iter().zip(rows).enumerate() {
        write!(w, "{label} 0:{}", i + 1)?;
        for (j, v) in row.iter().enumerate() {
            write!(w, " {}:{}", j + 1, fmt_g17(*v))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_precomputed_to<W: Write>(w: &mut W, gram: &GramMatrix, labels: &[i64]) -> Result<()> {
    let rows: Vec<Vec<f64>> = gram.rows().map(<[f64]>::to_vec).collect();
    write_precomputed_rows(w, labels, &rows)
}

pub fn write_precomputed(path: &Path, gram: &GramMatrix, labels: &[i64]) -> Result<()> {
    write_atomically(path, |w| write_precomputed_to(w, gram, labels))
}

/// Parses a precomputed-kernel file into labels and dense kernel rows.
pub fn read_precomputed_from<R: BufRead>(reader: R) -> Result<(Vec<i64>, Vec<Vec<f64>>)> {
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label = parse_label(tokens.next().unwrap_or_default(), lineno, None)?;
        let serial = tokens
            .next()
            .and_then(|t| t.strip_prefix("0:"))
            .ok_or_else(|| parse_err(lineno, "missing 0:<serial>"))?;
        if serial.parse::<usize>().ok() != Some(labels.len() + 1) {
            return Err(parse_err(
                lineno,
                format!("serial {serial} out of sequence"),
            ));
        }
        let mut row = Vec::new();
        for token in tokens {
            let (idx, val) = token
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, "bad pair"))?;
            if idx.parse::<usize>().ok() != Some(row.len() + 1) {
                return Err(parse_err(
                    lineno,
                    format!("kernel index {idx} out of sequence"),
                ));
            }
            row.push(
                val.parse()
                    .map_err(|_| parse_err(lineno, format!("bad value {val:?}")))?,
            );
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(lineno, "rows have different lengths"));
            }
        }
        labels.push(label);
        rows.push(row);
    }
    Ok((labels, rows))
}

pub fn read_precomputed(path: &Path) -> Result<(Vec<i64>, Vec<Vec<f64>>)> {
    read_precomputed_from(open(path)?)
}

/// Signatures of a dataset plus the configuration that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureFile {
    pub config: HashConfig,
    pub row_ids: Vec<String>,
    pub signatures: Vec<HashSignature>,
}

pub fn write_signatures_to<W: Write>(w: &mut W, file: &SignatureFile) -> Result<()> {
    let c = &file.config;
    writeln!(
        w,
        "# gcws gamma={} k={} seed={} dim={} digest={:016x}",
        c.gamma,
        c.k,
        c.seed,
        c.dim,
        c.digest()
    )?;
    let bits = c.bits_available();
    for (id, sig) in file.row_ids.iter().zip(&file.signatures) {
        write!(w, "{id} {} {bits}", sig.k())?;
        for s in sig.samples() {
            write!(w, " {}:{}", s.istar, s.tstar)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_signatures(path: &Path, file: &SignatureFile) -> Result<()> {
    write_atomically(path, |w| write_signatures_to(w, file))
}

fn parse_header(line: &str) -> Result<HashConfig> {
    let body = line
        .strip_prefix("# gcws")
        .ok_or_else(|| parse_err(1, "missing '# gcws' header"))?;
    let mut fields = BTreeMap::new();
    for kv in body.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| parse_err(1, format!("bad field {kv:?}")))?;
        fields.insert(k, v);
    }
    let get = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| parse_err(1, format!("missing {k}")))
    };
    let num = |k: &str| -> Result<u64> {
        get(k)?
            .parse()
            .map_err(|_| parse_err(1, format!("bad {k}")))
    };
    let gamma: f64 = get("gamma")?
        .parse()
        .map_err(|_| parse_err(1, "bad gamma"))?;
    let config = HashConfig::new(
        gamma,
        num("k")? as usize,
        num("seed")?,
        num("dim")? as usize,
    )
    .map_err(|source| FormatError::Invalid { line: 1, source })?;
    let digest = u64::from_str_radix(get("digest")?, 16).map_err(|_| parse_err(1, "bad digest"))?;
    if digest != config.digest() {
        return Err(parse_err(1, "digest does not match the header parameters"));
    }
    Ok(config)
}

pub fn read_signatures_from<R: BufRead>(reader: R) -> Result<SignatureFile> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty signature file"))??;
    let config = parse_header(&header)?;
    let digest = config.digest();
    let mut row_ids = Vec::new();
    let mut signatures = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        let lineno = n + 2;
        if line.trim().is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let id = tokens.next().unwrap_or_default().to_string();
        let k: usize = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(lineno, "bad k"))?;
        if k != config.k {
            return Err(parse_err(
                lineno,
                format!("row has k={k}, header k={}", config.k),
            ));
        }
        let _bits: u32 = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(lineno, "bad b_available"))?;
        let samples = tokens
            .map(|t| {
                let (i, t) = t.split_once(':')?;
                Some(HashSample {
                    istar: i.parse().ok()?,
                    tstar: t.parse().ok()?,
                })
            })
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| parse_err(lineno, "bad istar:tstar pair"))?;
        if samples.len() != k {
            return Err(parse_err(
                lineno,
                format!("expected {k} samples, found {}", samples.len()),
            ));
        }
        if let Some(bad) = samples.iter().find(|s| s.istar >= config.dim) {
            return Err(parse_err(
                lineno,
                format!("istar {} out of range", bad.istar),
            ));
        }
        row_ids.push(id);
        signatures.push(HashSignature::from_parts(digest, samples));
    }
    Ok(SignatureFile {
        config,
        row_ids,
        signatures,
    })
}

pub fn read_signatures(path: &Path) -> Result<SignatureFile> {
    read_signatures_from(open(path)?)
}

const MODEL_MAGIC: &str = "gmmk-linear-model v1";

/// Stores nonzero weights sparsely: `w <class> <bias_weight> idx:val ...`.
pub fn write_model_to<W: Write>(w: &mut W, model: &LinearModel) -> Result<()> {
    writeln!(w, "{MODEL_MAGIC}")?;
    let classes: Vec<String> = model.classes().iter().map(i64::to_string).collect();
    writeln!(w, "classes {}", classes.join(" "))?;
    writeln!(w, "dim {}", model.dim())?;
    writeln!(w, "bias {}", u8::from(model.bias()))?;
    for (class, weights) in model.classes().iter().zip(model.weights()) {
        write!(w, "w {class} {}", weights[model.dim()])?;
        for (j, v) in weights[..model.dim()].iter().enumerate() {
            if *v != 0.0 {
                write!(w, " {}:{}", j + 1, v)?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_model(path: &Path, model: &LinearModel) -> Result<()> {
    write_atomically(path, |w| write_model_to(w, model))
}

pub fn read_model_from<R: BufRead>(reader: R) -> Result<LinearModel> {
    let lines: Vec<String> = reader.lines().collect::<io::Result<_>>()?;
    if lines.first().map(String::as_str) != Some(MODEL_MAGIC) {
        return Err(parse_err(1, "not a gmmk linear model"));
    }
    let field = |n: usize, key: &str| -> Result<&str> {
        lines
            .get(n)
            .and_then(|l| l.strip_prefix(key))
            .map(str::trim)
            .ok_or_else(|| parse_err(n + 1, format!("expected {key}")))
    };
    let classes = field(1, "classes ")?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(2, "bad class")))
        .collect::<Result<Vec<i64>>>()?;
    let dim: usize = field(2, "dim ")?
        .parse()
        .map_err(|_| parse_err(3, "bad dim"))?;
    let bias = field(3, "bias ")? == "1";
    let mut weights = Vec::new();
    for (n, line) in lines.iter().enumerate().skip(4) {
        if line.trim().is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some("w") {
            return Err(parse_err(n + 1, "expected weight line"));
        }
        let _class = tokens.next();
        let b: f64 = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(n + 1, "bad bias weight"))?;
        let mut w = vec![0.0; dim + 1];
        w[dim] = b;
        for token in tokens {
            let (idx, val) = token
                .split_once(':')
                .and_then(|(i, v)| Some((i.parse::<usize>().ok()?, v.parse::<f64>().ok()?)))
                .ok_or_else(|| parse_err(n + 1, format!("bad weight {token:?}")))?;
            if idx == 0 || idx > dim {
                return Err(parse_err(n + 1, format!("weight index {idx} out of range")));
            }
            w[idx - 1] = val;
        }
        weights.push(w);
    }
    Ok(LinearModel::from_parts(classes, dim, bias, weights)?)
}

pub fn read_model(path: &Path) -> Result<LinearModel> {
    read_model_from(open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_formatting() {
        assert_eq!(fmt_g17(1.0), "1");
        assert_eq!(fmt_g17(0.0), "0");
        assert_eq!(fmt_g17(1.0 / 6.0), "0.16666666666666666");
        assert_eq!(fmt_g17(0.1), "0.10000000000000001");
        assert_eq!(fmt_g17(-2.5), "-2.5");
        assert_eq!(fmt_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(fmt_g17(123456.0), "123456");
        assert_eq!(fmt_g17(1e17), "1e+17");
        assert_eq!(fmt_g17(0.0001), "0.0001");
        for x in [
            1.0 / 3.0,
            std::f64::consts::PI,
            1e-300,
            7.0e22,
            0.999_999_999_999_999_9,
        ] {
            assert_eq!(fmt_g17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn parses_documented_line() {
        let r = parse_libsvm_line("1 1:0.5 3:-2", 1, None).unwrap();
        assert_eq!(
            r,
            LibsvmRecord {
                label: 1,
                pairs: vec![(0, 0.5), (2, -2.0)]
            }
        );
        let r = parse_libsvm_line("+1 2:0 4:1e3", 1, None).unwrap();
        assert_eq!(
            r,
            LibsvmRecord {
                label: 1,
                pairs: vec![(3, 1000.0)]
            }
        );
        assert_eq!(parse_libsvm_line("-1.0", 1, None).unwrap().label, -1);
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let text = "1 1:1\n2 3:1 2:1\n";
        match read_libsvm_from(text.as_bytes(), ReadOptions::default()) {
            Err(FormatError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        for bad in [
            "1 0:1",
            "1 2:x",
            "1 a:1",
            "1 2",
            "cat 1:1",
            "1 1:nan",
            "1 2:1 2:3",
        ] {
            assert!(parse_libsvm_line(bad, 7, None).is_err(), "{bad}");
        }
    }

    #[test]
    fn skips_empty_lines() {
        let data =
            read_libsvm_from("1 1:1\n\n   \n2 2:3\n".as_bytes(), ReadOptions::default()).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data.dim(), 2);
        assert_eq!(data.labels(), &[1, 2]);
    }

    #[test]
    fn forced_dimension() {
        let data = read_libsvm_from(
            "1 1:1\n".as_bytes(),
            ReadOptions {
                dim: Some(10),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(data.dim(), 10);
        assert!(read_libsvm_from(
            "1 5:1\n".as_bytes(),
            ReadOptions {
                dim: Some(3),
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn string_labels_through_dictionary() {
        let mut dict = LabelDictionary::default();
        let data = read_libsvm_from(
            "cat 1:1\ndog 2:1\ncat 1:2\n".as_bytes(),
            ReadOptions {
                dim: None,
                dictionary: Some(&mut dict),
            },
        )
        .unwrap();
        assert_eq!(data.labels(), &[0, 1, 0]);
        assert_eq!(dict.len(), 2);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.tsv");
        dict.save(&p).unwrap();
        assert_eq!(LabelDictionary::load(&p).unwrap(), dict);
    }

    #[test]
    fn precomputed_layout() {
        let gram = gmmk_core::gram(
            &[SparseVector::from_dense(&[1.0, -1.0]).unwrap()],
            vec!["0".into()],
            gmmk_core::KernelSpec::Gmm,
        )
        .unwrap();
        let mut out = Vec::new();
        write_precomputed_to(&mut out, &gram, &[3]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "3 0:1 1:1\n");

        let text = "1 0:1 1:1 2:0.5\n2 0:2 1:0.5 2:1\n";
        let (labels, rows) = read_precomputed_from(text.as_bytes()).unwrap();
        assert_eq!(labels, vec![1, 2]);
        assert_eq!(rows, vec![vec![1.0, 0.5], vec![0.5, 1.0]]);
        assert!(read_precomputed_from("1 0:2 1:1\n".as_bytes()).is_err());
        assert!(read_precomputed_from("1 0:1 2:1\n".as_bytes()).is_err());
    }

    #[test]
    fn signature_header_is_checked() {
        let cfg = HashConfig::new(0.5, 2, 9, 6).unwrap();
        let file = SignatureFile {
            config: cfg,
            row_ids: vec!["0".into()],
            signatures: vec![HashSignature::from_parts(
                cfg.digest(),
                vec![
                    HashSample {
                        istar: 4,
                        tstar: -3,
                    },
                    HashSample {
                        istar: 0,
                        tstar: 12,
                    },
                ],
            )],
        };
        let mut out = Vec::new();
        write_signatures_to(&mut out, &file).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.ends_with("\n0 2 3 4:-3 0:12\n"), "{text}");
        assert_eq!(read_signatures_from(text.as_bytes()).unwrap(), file);

        let tampered = text.replace("seed=9", "seed=8");
        assert!(read_signatures_from(tampered.as_bytes()).is_err());
        let short = text.replace(" 0:12", "");
        assert!(read_signatures_from(short.as_bytes()).is_err());
    }

    #[test]
    fn atomic_write_leaves_nothing_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        let r = write_atomically(&p, |w| {
            writeln!(w, "half")?;
            Err(parse_err(1, "boom"))
        });
        assert!(r.is_err());
        assert!(!p.exists());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
