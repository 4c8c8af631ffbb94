//! Run configuration, chain cache files and report emission for the `cartan-fock` binary.
//!
//! Every command returns a [`Report`]: named artifacts plus a summary and an exit status.
//! Nothing here consults a clock or an RNG, so identical configurations give identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::asympt::{
    commutator_decay, conjecture_scan, decay_fit, f_estimate_scan, guard_top, rank_check_from, rate_fit,
    star_commute_defect, AsymptError, Column, ConvergenceTable, FEstimate, RateFit, StarCommuteRow,
};
use crate::gtcg::{cg_closed_form, cg_grid, cg_numeric_with, shifted_partition, CgError, CgRow};
use crate::numerics::{DenseMatrix, ToleranceProfile};
use crate::qcore::{weyl_dim, QParam, Weight};
use crate::qda::{b_chain, b_closed_form, chain_intertwiner, cuntz_pimsner_residual, q_arveson_residuals};
use crate::repn::{check_module, QModule};
use crate::sps::{build_chain, CartanChain, ChainError, GeneralWeightBuilder};

pub const CACHE_ENV: &str = "CARTAN_FOCK_CACHE_DIR";
pub const CSV_SCHEMA: &str = "cartan-fock/1";
const CACHE_MAGIC: &str = "CARTAN-FOCK-CHAIN";
const CACHE_SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn cfg_err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Ok = 0,
    Violation = 1,
    Ambiguous = 2,
    Config = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    /// The more severe of two outcomes; configuration errors dominate.
    pub fn worst(self, other: ExitStatus) -> ExitStatus {
        let rank = |s: ExitStatus| match s {
            ExitStatus::Ok => 0,
            ExitStatus::Violation => 1,
            ExitStatus::Ambiguous => 2,
            ExitStatus::Config => 3,
        };
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Scan,
    Cg,
    Qda,
    Star,
    Cache,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Scan => "scan",
            Command::Cg => "cg",
            Command::Qda => "qda",
            Command::Star => "star",
            Command::Cache => "cache",
        }
    }
}

/// Validated parameters for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub q: Vec<f64>,
    pub lambda: Vec<i64>,
    pub max_level: usize,
    pub tol: ToleranceProfile,
    /// Largest partition entry on the `cg` grid.
    pub max_entry: i64,
    /// Single partition for `cg`; the whole grid when absent.
    pub mu: Option<Vec<i64>>,
    pub outdir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 2,
            q: vec![1.5],
            lambda: vec![1],
            max_level: 12,
            tol: ToleranceProfile::default(),
            max_entry: 6,
            mu: None,
            outdir: None,
            cache_dir: None,
            format: Format::Csv,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "N",
    "q",
    "lambda",
    "max_level",
    "nullspace_rel_tol",
    "gap_ratio_min",
    "identity_tol",
    "max_entry",
    "mu",
    "out",
    "cache_dir",
    "format",
];

/// `key = value` lines; `#` starts a comment. Later duplicates win.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return cfg_err(format!("line {}: expected key=value, got {raw:?}", no + 1));
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>, CliError> {
    v.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| CliError::Config(format!("{key}: cannot parse {s:?}"))))
        .collect()
}

fn scalar<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim().parse::<T>().map_err(|_| CliError::Config(format!("{key}: cannot parse {v:?}")))
}

impl RunConfig {
    /// Defaults, then `pairs` in order, then validation.
    pub fn from_pairs<I, K, V>(pairs: I) -> Result<Self, CliError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut c = RunConfig::default();
        let mut lambda_set = false;
        for (k, v) in pairs {
            let (k, v) = (k.as_ref().trim(), v.as_ref());
            match k {
                "N" => c.n = scalar(k, v)?,
                "q" => c.q = list(k, v)?,
                "lambda" => {
                    c.lambda = list(k, v)?;
                    lambda_set = true;
                }
                "max_level" => c.max_level = scalar(k, v)?,
                "nullspace_rel_tol" => c.tol.nullspace_rel_tol = scalar(k, v)?,
                "gap_ratio_min" => c.tol.gap_ratio_min = scalar(k, v)?,
                "identity_tol" => c.tol.identity_tol = scalar(k, v)?,
                "max_entry" => c.max_entry = scalar(k, v)?,
                "mu" => c.mu = Some(list(k, v)?),
                "out" => c.outdir = Some(PathBuf::from(v.trim())),
                "cache_dir" => c.cache_dir = Some(PathBuf::from(v.trim())),
                "format" => {
                    c.format = match v.trim() {
                        "csv" => Format::Csv,
                        "json" => Format::Json,
                        other => return cfg_err(format!("format: expected csv or json, got {other:?}")),
                    }
                }
                other => return cfg_err(format!("unknown key {other:?}")),
            }
        }
        if !lambda_set && c.lambda.len() + 1 != c.n {
            c.lambda = Weight::fundamental(c.n.saturating_sub(1).max(1), 0).coords().to_vec();
        }
        c.validate()?;
        Ok(c)
    }

    /// Config file (optional), then the cache env var, then flag overrides.
    pub fn load(path: Option<&Path>, env_cache: Option<String>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut pairs = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                parse_config_text(&text)?
            }
            None => Vec::new(),
        };
        if let Some(dir) = env_cache.filter(|d| !d.is_empty()) {
            pairs.push(("cache_dir".into(), dir));
        }
        pairs.extend(overrides.iter().cloned());
        RunConfig::from_pairs(pairs)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(2..=6).contains(&self.n) {
            return cfg_err(format!("N = {} outside 2..=6", self.n));
        }
        if self.q.is_empty() {
            return cfg_err("q: empty list");
        }
        for &q in &self.q {
            QParam::new(q).map_err(|e| CliError::Config(format!("q: {e}")))?;
        }
        if self.lambda.len() != self.n - 1 {
            return cfg_err(format!("lambda has {} coordinates, N = {} needs {}", self.lambda.len(), self.n, self.n - 1));
        }
        let w = Weight::new(self.lambda.clone());
        if !w.is_dominant() || w.is_zero() {
            return cfg_err(format!("lambda {w} must be dominant and nonzero"));
        }
        if self.max_level < 3 {
            return cfg_err(format!("max_level = {} is below 3", self.max_level));
        }
        self.tol.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.max_entry < 0 {
            return cfg_err("max_entry must be nonnegative");
        }
        if let Some(mu) = &self.mu {
            let ok = mu.len() == self.n
                && mu.windows(2).all(|p| p[0] >= p[1])
                && mu.last() == Some(&0)
                && mu.iter().any(|&x| x > 0);
            if !ok {
                return cfg_err(format!("mu {mu:?} is not a nonzero partition of length N with last entry 0"));
            }
        }
        Ok(())
    }

    pub fn lambda_weight(&self) -> Weight {
        Weight::new(self.lambda.clone())
    }

    fn metadata(&self, q: Option<f64>) -> Vec<(String, String)> {
        let mut m = vec![
            ("schema".to_string(), CSV_SCHEMA.to_string()),
            ("N".to_string(), self.n.to_string()),
            ("lambda".to_string(), join(&self.lambda, ",")),
            ("max_level".to_string(), self.max_level.to_string()),
            ("nullspace_rel_tol".to_string(), fmt_f(self.tol.nullspace_rel_tol)),
            ("gap_ratio_min".to_string(), fmt_f(self.tol.gap_ratio_min)),
            ("identity_tol".to_string(), fmt_f(self.tol.identity_tol)),
        ];
        if let Some(q) = q {
            m.insert(2, ("q".to_string(), fmt_f(q)));
        }
        m
    }
}

pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn join<T: ToString>(xs: &[T], sep: &str) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

fn q_tag(q: f64) -> String {
    format!("{:016x}", q.to_bits())
}

/// Output of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub status: ExitStatus,
    /// `(file name, contents)` in emission order.
    pub artifacts: Vec<(String, String)>,
    pub summary: Vec<String>,
}

impl Report {
    fn new() -> Self {
        Report { status: ExitStatus::Ok, artifacts: Vec::new(), summary: Vec::new() }
    }

    fn flag(&mut self, s: ExitStatus, line: String) {
        self.status = self.status.worst(s);
        self.summary.push(line);
    }

    /// Writes artifacts into `outdir` (atomically) or concatenates them to `sink`.
    pub fn emit(&self, outdir: Option<&Path>, sink: &mut dyn Write) -> io::Result<()> {
        for (name, body) in &self.artifacts {
            match outdir {
                Some(dir) => {
                    fs::create_dir_all(dir)?;
                    atomic_write(&dir.join(name), body.as_bytes())?;
                }
                None => {
                    writeln!(sink, "# file={name}")?;
                    sink.write_all(body.as_bytes())?;
                }
            }
        }
        Ok(())
    }
}

/// CSV body: `#key=value` metadata lines, header, rows.
pub fn csv_document(meta: &[(String, String)], header: &str, rows: &[String]) -> String {
    let mut s = String::new();
    for (k, v) in meta {
        let _ = writeln!(s, "# {k}={v}");
    }
    let _ = writeln!(s, "{header}");
    for r in rows {
        let _ = writeln!(s, "{r}");
    }
    s
}

fn json_document<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn classify_chain(e: &ChainError) -> ExitStatus {
    if e.is_ambiguous_rank() {
        ExitStatus::Ambiguous
    } else {
        ExitStatus::Violation
    }
}

fn classify_asympt(e: &AsymptError) -> ExitStatus {
    if e.is_ambiguous_rank() {
        ExitStatus::Ambiguous
    } else {
        ExitStatus::Violation
    }
}

fn classify_cg(e: &CgError) -> ExitStatus {
    match e {
        CgError::Chain(c) => classify_chain(c),
        _ => ExitStatus::Violation,
    }
}

/// Builds the chain, or loads it from the cache directory when one is configured.
pub fn obtain_chain(cfg: &RunConfig, q: QParam) -> Result<CartanChain, CliError> {
    let lambda = cfg.lambda_weight();
    let build = || build_chain(&lambda, q, cfg.max_level, &cfg.tol).map_err(|e| CliError::Cache(e.to_string()));
    let Some(dir) = &cfg.cache_dir else {
        return build();
    };
    let path = dir.join(cache_file_name(&lambda, q, cfg.max_level));
    if path.exists() {
        return load_chain(&path, cfg.tol.identity_tol);
    }
    let chain = build()?;
    fs::create_dir_all(dir)?;
    store_chain(&chain, &path)?;
    Ok(chain)
}

fn chain_for(cfg: &RunConfig, q: f64, report: &mut Report) -> Option<CartanChain> {
    let qp = QParam::new(q).expect("validated");
    let lambda = cfg.lambda_weight();
    let built = match &cfg.cache_dir {
        Some(_) => obtain_chain(cfg, qp).map_err(|e| (ExitStatus::Violation, e.to_string())),
        None => build_chain(&lambda, qp, cfg.max_level, &cfg.tol).map_err(|e| (classify_chain(&e), e.to_string())),
    };
    match built {
        Ok(c) => Some(c),
        Err((s, msg)) => {
            report.flag(s, format!("q={}: chain construction failed: {msg}", fmt_f(q)));
            None
        }
    }
}

fn fit_window(table: &ConvergenceTable) -> Option<(usize, usize)> {
    let last = table.rows.last()?.n;
    let lo = if last >= 8 { 4 } else { 1 };
    (last + 1 >= lo + 4).then_some((lo, last))
}

#[derive(Serialize)]
struct ScanJson<'a> {
    schema: &'static str,
    evidence: &'static str,
    table: &'a ConvergenceTable,
    fits: BTreeMap<&'static str, RateFit>,
    f_estimates: &'a [FEstimate],
}

pub fn cmd_scan(cfg: &RunConfig) -> Report {
    let mut report = Report::new();
    let lambda = cfg.lambda_weight();
    let dim_lambda = weyl_dim(&lambda).unwrap_or(0);
    for &q in &cfg.q {
        let Some(chain) = chain_for(cfg, q, &mut report) else { continue };
        let table = match conjecture_scan(&chain) {
            Ok(t) => t,
            Err(e) => {
                report.flag(classify_asympt(&e), format!("q={}: scan failed: {e}", fmt_f(q)));
                continue;
            }
        };
        for v in table.violations(rank_check_from(&chain), dim_lambda) {
            report.flag(ExitStatus::Violation, format!("q={}: {v}", fmt_f(q)));
        }
        let fest = match f_estimate_scan(&chain, &table, false) {
            Ok(f) => f,
            Err(e) => {
                report.flag(classify_asympt(&e), format!("q={}: f-estimate failed: {e}", fmt_f(q)));
                Vec::new()
            }
        };
        for f in fest.iter().filter(|f| !f.holds) {
            report.flag(ExitStatus::Violation, format!("q={}: f-estimate fails at n={}: {:e} > {:e}", fmt_f(q), f.n, f.lhs, f.rhs));
        }
        let mut fits = BTreeMap::new();
        if let Some(w) = fit_window(&table) {
            for (name, col) in [("a", Column::A), ("b", Column::B), ("c", Column::C)] {
                if let Ok(fit) = rate_fit(&table.column(col), w) {
                    fits.insert(name, fit);
                }
            }
        }
        let stem = format!("scan_N{}_l{}_q{}", cfg.n, join(&cfg.lambda, "-"), q_tag(q));
        match cfg.format {
            Format::Csv => {
                let mut meta = cfg.metadata(Some(q));
                meta.push(("evidence".into(), "numerical only; not a proof".into()));
                for (name, f) in &fits {
                    meta.push((
                        format!("fit_{name}"),
                        format!(
                            "t_hat={} c_hat={} window={}..{} geometric={}",
                            fmt_f(f.t_hat),
                            fmt_f(f.c_hat),
                            f.window.0,
                            f.window.1,
                            f.geometric
                        ),
                    ));
                }
                let rows: Vec<String> = table
                    .rows
                    .iter()
                    .map(|r| format!("{},{},{},{},{},{}", r.n, fmt_f(r.a), fmt_f(r.b), fmt_f(r.c), fmt_f(r.a_l), fmt_f(r.b_l)))
                    .collect();
                report.artifacts.push((format!("{stem}.csv"), csv_document(&meta, "n,a,b,c,a_l,b_l", &rows)));
                let frows: Vec<String> =
                    fest.iter().map(|f| format!("{},{},{},{}", f.n, fmt_f(f.lhs), fmt_f(f.rhs), f.holds)).collect();
                report.artifacts.push((format!("{stem}_fest.csv"), csv_document(&meta, "n,lhs,rhs,holds", &frows)));
            }
            Format::Json => {
                let doc = ScanJson {
                    schema: CSV_SCHEMA,
                    evidence: "numerical only; not a proof",
                    table: &table,
                    fits,
                    f_estimates: &fest,
                };
                report.artifacts.push((format!("{stem}.json"), json_document(&doc)));
            }
        }
        report.summary.push(format!("q={}: {} rows, f-estimate levels {}", fmt_f(q), table.rows.len(), fest.len()));
    }
    report
}

pub fn cmd_cg(cfg: &RunConfig) -> Report {
    let mut report = Report::new();
    let mut all: Vec<CgRow> = Vec::new();
    for &q in &cfg.q {
        let qp = QParam::new(q).expect("validated");
        let rows = match &cfg.mu {
            None => cg_grid(cfg.n, cfg.max_entry, qp, &cfg.tol),
            Some(mu) => single_cg(cfg, mu, qp),
        };
        match rows {
            Ok(r) => all.extend(r),
            Err(e) => report.flag(classify_cg(&e), format!("q={}: {e}", fmt_f(q))),
        }
    }
    let worst = all.iter().map(|r| r.delta).fold(0.0f64, f64::max);
    if worst > 1e-7 {
        report.flag(ExitStatus::Violation, format!("max |delta| = {worst:e} exceeds 1e-7"));
    }
    report.summary.push(format!("cg rows={} max|delta|={worst:e}", all.len()));
    let stem = format!("cg_N{}", cfg.n);
    match cfg.format {
        Format::Csv => {
            let rows: Vec<String> = all
                .iter()
                .map(|r| format!("{},{},{},{},{},{}", fmt_f(r.q), join(&r.mu, " "), r.i, fmt_f(r.closed), fmt_f(r.numeric), fmt_f(r.delta)))
                .collect();
            let mut meta = cfg.metadata(None);
            meta.push(("q".into(), join(&cfg.q.iter().map(|&q| fmt_f(q)).collect::<Vec<_>>(), ",")));
            report.artifacts.push((format!("{stem}.csv"), csv_document(&meta, "q,mu,i,closed,numeric,delta", &rows)));
        }
        Format::Json => report.artifacts.push((format!("{stem}.json"), json_document(&all))),
    }
    report
}

fn single_cg(cfg: &RunConfig, mu: &[i64], q: QParam) -> Result<Vec<CgRow>, CgError> {
    let mut b = GeneralWeightBuilder::new(cfg.n, q, cfg.tol);
    let mut rows = Vec::new();
    for i0 in (0..cfg.n).filter(|&i0| shifted_partition(mu, i0).is_some()) {
        let closed = cg_closed_form(i0, mu, q)?;
        let numeric = cg_numeric_with(&mut b, i0, mu)?;
        rows.push(CgRow { n: cfg.n, q: q.value(), mu: mu.to_vec(), i: i0 + 1, closed, numeric, delta: (closed - numeric).abs() });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QdaRow {
    pub n: usize,
    pub arveson_off_diagonal: f64,
    pub arveson_diagonal: f64,
    pub cuntz_pimsner: f64,
    pub b_chain: Option<f64>,
    pub b_closed: f64,
    pub intertwiner_unitarity: Option<f64>,
    pub intertwiner_intertwining: Option<f64>,
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

pub fn cmd_qda(cfg: &RunConfig) -> Report {
    let mut report = Report::new();
    let omega1 = cfg.lambda_weight() == Weight::fundamental(cfg.n - 1, 0);
    for &q in &cfg.q {
        let qp = QParam::new(q).expect("validated");
        let chain = if omega1 { chain_for(cfg, q, &mut report) } else { None };
        let mut rows = Vec::new();
        for n in 1..=cfg.max_level {
            let ar = q_arveson_residuals(cfg.n, n, qp);
            let cp = cuntz_pimsner_residual(cfg.n, n, qp, qp.is_classical());
            let (mut bc, mut unit, mut inter) = (None, None, None);
            if let Some(ch) = &chain {
                if n <= guard_top(ch) {
                    bc = Some(b_chain(ch, n));
                }
                match chain_intertwiner(ch, n) {
                    Ok(ci) => {
                        unit = Some(ci.unitarity_residual);
                        inter = Some(ci.intertwining_residual);
                    }
                    Err(e) => report.flag(classify_chain(&e), format!("q={}: intertwiner n={n}: {e}", fmt_f(q))),
                }
            }
            rows.push(QdaRow {
                n,
                arveson_off_diagonal: ar.off_diagonal,
                arveson_diagonal: ar.diagonal,
                cuntz_pimsner: cp.worst(),
                b_chain: bc,
                b_closed: b_closed_form(n, qp),
                intertwiner_unitarity: unit,
                intertwiner_intertwining: inter,
            });
        }
        for r in &rows {
            if r.arveson_off_diagonal.max(r.arveson_diagonal) > 1e-9 {
                report.flag(ExitStatus::Violation, format!("q={}: relation residual at n={} above 1e-9", fmt_f(q), r.n));
            }
            if r.intertwiner_unitarity.into_iter().chain(r.intertwiner_intertwining).any(|x| x > 1e-8) {
                report.flag(ExitStatus::Violation, format!("q={}: chain intertwiner residual at n={} above 1e-8", fmt_f(q), r.n));
            }
            if let Some(b) = r.b_chain {
                if (b - r.b_closed).abs() > 1e-8 {
                    report.flag(ExitStatus::Violation, format!("q={}: b({}) = {b:e} vs closed form {:e}", fmt_f(q), r.n, r.b_closed));
                }
            }
        }
        let stem = format!("qda_N{}_q{}", cfg.n, q_tag(q));
        match cfg.format {
            Format::Csv => {
                let body: Vec<String> = rows
                    .iter()
                    .map(|r| {
                        format!(
                            "{},{},{},{},{},{},{},{}",
                            r.n,
                            fmt_f(r.arveson_off_diagonal),
                            fmt_f(r.arveson_diagonal),
                            fmt_f(r.cuntz_pimsner),
                            opt(r.b_chain),
                            fmt_f(r.b_closed),
                            opt(r.intertwiner_unitarity),
                            opt(r.intertwiner_intertwining)
                        )
                    })
                    .collect();
                report.artifacts.push((
                    format!("{stem}.csv"),
                    csv_document(
                        &cfg.metadata(Some(q)),
                        "n,arveson_off_diagonal,arveson_diagonal,cuntz_pimsner,b_chain,b_closed,intertwiner_unitarity,intertwiner_intertwining",
                        &body,
                    ),
                ));
            }
            Format::Json => report.artifacts.push((format!("{stem}.json"), json_document(&rows))),
        }
        report.summary.push(format!("q={}: {} levels", fmt_f(q), rows.len()));
    }
    report
}

#[derive(Serialize)]
struct StarJson<'a> {
    schema: &'static str,
    rows: &'a [StarCommuteRow],
    commutator: &'a [(usize, f64)],
    fit_defect_h: Option<RateFit>,
    fit_commutator: Option<RateFit>,
}

pub fn cmd_star(cfg: &RunConfig) -> Report {
    let mut report = Report::new();
    for &q in &cfg.q {
        let Some(chain) = chain_for(cfg, q, &mut report) else { continue };
        let table = match conjecture_scan(&chain) {
            Ok(t) => t,
            Err(e) => {
                report.flag(classify_asympt(&e), format!("q={}: scan failed: {e}", fmt_f(q)));
                continue;
            }
        };
        let rows = match star_commute_defect(&chain, &table) {
            Ok(r) => r,
            Err(e) => {
                report.flag(classify_asympt(&e), format!("q={}: star-commute failed: {e}", fmt_f(q)));
                continue;
            }
        };
        for r in &rows {
            if r.defect_h > r.defect_h_matricized + 1e-12 || r.defect_l > r.defect_l_matricized + 1e-12 {
                report.flag(ExitStatus::Violation, format!("q={}: n={} defect exceeds its matricized norm", fmt_f(q), r.n));
            }
        }
        let comm = commutator_decay(&chain);
        let fit_h = decay_fit(&rows.iter().map(|r| (r.n, r.defect_h)).collect::<Vec<_>>(), 1e-13).ok().flatten();
        let fit_c = decay_fit(&comm, 1e-13).ok().flatten();
        let stem = format!("star_N{}_l{}_q{}", cfg.n, join(&cfg.lambda, "-"), q_tag(q));
        match cfg.format {
            Format::Csv => {
                let mut meta = cfg.metadata(Some(q));
                for (name, f) in [("fit_defect_h", fit_h), ("fit_commutator", fit_c)] {
                    if let Some(f) = f {
                        meta.push((name.into(), format!("t_hat={} window={}..{}", fmt_f(f.t_hat), f.window.0, f.window.1)));
                    }
                }
                let body: Vec<String> = rows
                    .iter()
                    .map(|r| {
                        let c = comm.iter().find(|(n, _)| *n == r.n).map(|p| p.1);
                        format!(
                            "{},{},{},{},{},{},{},{}",
                            r.n,
                            fmt_f(r.defect_h),
                            fmt_f(r.defect_h_matricized),
                            fmt_f(r.bound_combo_h),
                            fmt_f(r.defect_l),
                            fmt_f(r.defect_l_matricized),
                            fmt_f(r.bound_combo_l),
                            opt(c)
                        )
                    })
                    .collect();
                report.artifacts.push((
                    format!("{stem}.csv"),
                    csv_document(
                        &meta,
                        "n,defect_h,defect_h_matricized,bound_combo_h,defect_l,defect_l_matricized,bound_combo_l,commutator",
                        &body,
                    ),
                ));
            }
            Format::Json => {
                let doc = StarJson { schema: CSV_SCHEMA, rows: &rows, commutator: &comm, fit_defect_h: fit_h, fit_commutator: fit_c };
                report.artifacts.push((format!("{stem}.json"), json_document(&doc)));
            }
        }
        report.summary.push(format!("q={}: {} star rows", fmt_f(q), rows.len()));
    }
    report
}

/// Builds, stores, reloads and verifies one chain per `q`.
pub fn cmd_cache(cfg: &RunConfig) -> Report {
    let mut report = Report::new();
    let dir = cfg.cache_dir.clone().unwrap_or_else(|| PathBuf::from("cache"));
    let lambda = cfg.lambda_weight();
    let mut lines = Vec::new();
    for &q in &cfg.q {
        let qp = QParam::new(q).expect("validated");
        let chain = match build_chain(&lambda, qp, cfg.max_level, &cfg.tol) {
            Ok(c) => c,
            Err(e) => {
                report.flag(classify_chain(&e), format!("q={}: chain construction failed: {e}", fmt_f(q)));
                continue;
            }
        };
        let path = dir.join(cache_file_name(&lambda, qp, cfg.max_level));
        let res = fs::create_dir_all(&dir)
            .map_err(CliError::from)
            .and_then(|_| store_chain(&chain, &path))
            .and_then(|_| load_chain(&path, cfg.tol.identity_tol));
        match res {
            Ok(loaded) => {
                let exact = chains_bit_equal(&chain, &loaded);
                if !exact {
                    report.flag(ExitStatus::Violation, format!("q={}: reloaded chain differs", fmt_f(q)));
                }
                let header = read_header(&path).map(|h| h.checksums).unwrap_or_default();
                for (k, sum) in header.iter().enumerate() {
                    lines.push(format!("{},{},{},{}", fmt_f(q), k, chain.dim(k), sum));
                }
                report.summary.push(format!("q={}: stored {} (bit-exact {exact})", fmt_f(q), path.display()));
            }
            Err(e) => report.flag(ExitStatus::Violation, format!("q={}: {e}", fmt_f(q))),
        }
    }
    report.artifacts.push((
        format!("cache_N{}_l{}.csv", cfg.n, join(&cfg.lambda, "-")),
        csv_document(&cfg.metadata(None), "q,level,dim,sha256", &lines),
    ));
    report
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Report {
    match cmd {
        Command::Scan => cmd_scan(cfg),
        Command::Cg => cmd_cg(cfg),
        Command::Qda => cmd_qda(cfg),
        Command::Star => cmd_star(cfg),
        Command::Cache => cmd_cache(cfg),
    }
}

// ---- chain cache ----

pub fn cache_file_name(lambda: &Weight, q: QParam, max_level: usize) -> String {
    format!("chain_N{}_l{}_q{}_M{max_level}.cfc", lambda.n(), join(lambda.coords(), "-"), q_tag(q.value()))
}

fn put_matrix(buf: &mut Vec<u8>, m: &DenseMatrix) {
    buf.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for x in m.as_slice() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

/// Level `k`: weights (dim × rank), `E_i`, `F_i`, then `w_{k−1}` and `w′_{k−1}` for `k ≥ 1`.
fn level_payload(chain: &CartanChain, k: usize) -> Vec<u8> {
    let v = chain.level(k);
    let r = v.rank();
    let mut buf = Vec::new();
    let wts = DenseMatrix::from_fn(v.dim(), r, |a, i| v.weight(a).coord(i) as f64);
    put_matrix(&mut buf, &wts);
    for i in 0..r {
        put_matrix(&mut buf, v.e(i));
    }
    for i in 0..r {
        put_matrix(&mut buf, v.f(i));
    }
    if k >= 1 {
        put_matrix(&mut buf, chain.left(k - 1));
        put_matrix(&mut buf, chain.right(k - 1));
    }
    buf
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Write to a sibling temp file, fsync, rename over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(parent) = path.parent() {
        if let Ok(d) = File::open(parent) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}

pub fn encode_chain(chain: &CartanChain) -> Vec<u8> {
    let levels: Vec<Vec<u8>> = (0..=chain.max_level()).map(|k| level_payload(chain, k)).collect();
    let tol = chain.tol();
    let mut head = String::new();
    let _ = writeln!(head, "{CACHE_MAGIC}");
    let _ = writeln!(head, "schema={CACHE_SCHEMA}");
    let _ = writeln!(head, "N={}", chain.lambda().n());
    let _ = writeln!(head, "q={}", fmt_f(chain.q().value()));
    let _ = writeln!(head, "lambda={}", join(chain.lambda().coords(), ","));
    let _ = writeln!(
        head,
        "tol={},{},{}",
        fmt_f(tol.nullspace_rel_tol),
        fmt_f(tol.gap_ratio_min),
        fmt_f(tol.identity_tol)
    );
    let _ = writeln!(head, "levels={}", chain.max_level() + 1);
    let dims: Vec<usize> = (0..=chain.max_level()).map(|k| chain.dim(k)).collect();
    let _ = writeln!(head, "dims={}", join(&dims, ","));
    for (k, l) in levels.iter().enumerate() {
        let _ = writeln!(head, "sha256.{k}={}", hex(&Sha256::digest(l)));
    }
    let _ = writeln!(head, "end");
    let mut out = head.into_bytes();
    for l in &levels {
        out.extend_from_slice(&(l.len() as u64).to_le_bytes());
        out.extend_from_slice(l);
    }
    out
}

pub fn store_chain(chain: &CartanChain, path: &Path) -> Result<(), CliError> {
    atomic_write(path, &encode_chain(chain))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheHeader {
    pub n: usize,
    pub q: f64,
    pub lambda: Vec<i64>,
    pub tol: ToleranceProfile,
    pub dims: Vec<usize>,
    pub checksums: Vec<String>,
}

fn cache_err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Cache(msg.into()))
}

fn parse_header(bytes: &[u8]) -> Result<(CacheHeader, usize), CliError> {
    let mut fields: BTreeMap<String, String> = BTreeMap::new();
    let mut pos = 0;
    let mut first = true;
    loop {
        let Some(nl) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return cache_err("truncated header");
        };
        let line = std::str::from_utf8(&bytes[pos..pos + nl]).map_err(|_| CliError::Cache("header is not UTF-8".into()))?;
        pos += nl + 1;
        if first {
            if line != CACHE_MAGIC {
                return cache_err("bad magic");
            }
            first = false;
            continue;
        }
        if line == "end" {
            break;
        }
        let Some((k, v)) = line.split_once('=') else {
            return cache_err(format!("bad header line {line:?}"));
        };
        fields.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| fields.get(k).cloned().ok_or_else(|| CliError::Cache(format!("missing header field {k}")));
    let num = |k: &str, v: &str| -> Result<f64, CliError> {
        v.parse::<f64>().map_err(|_| CliError::Cache(format!("{k}: bad number {v:?}")))
    };
    if get("schema")? != CACHE_SCHEMA.to_string() {
        return cache_err("unsupported schema");
    }
    let n: usize = get("N")?.parse().map_err(|_| CliError::Cache("bad N".into()))?;
    let q = num("q", &get("q")?)?;
    let lambda: Vec<i64> = list("lambda", &get("lambda")?).map_err(|e| CliError::Cache(e.to_string()))?;
    let tv: Vec<f64> = get("tol")?.split(',').map(|s| num("tol", s)).collect::<Result<_, _>>()?;
    if tv.len() != 3 {
        return cache_err("tol needs three entries");
    }
    let levels: usize = get("levels")?.parse().map_err(|_| CliError::Cache("bad levels".into()))?;
    let dims: Vec<usize> = list("dims", &get("dims")?).map_err(|e| CliError::Cache(e.to_string()))?;
    if dims.len() != levels || levels < 2 {
        return cache_err("dims do not match level count");
    }
    let checksums = (0..levels).map(|k| get(&format!("sha256.{k}"))).collect::<Result<Vec<_>, _>>()?;
    let tol = ToleranceProfile { nullspace_rel_tol: tv[0], gap_ratio_min: tv[1], identity_tol: tv[2] };
    Ok((CacheHeader { n, q, lambda, tol, dims, checksums }, pos))
}

pub fn read_header(path: &Path) -> Result<CacheHeader, CliError> {
    Ok(parse_header(&fs::read(path)?)?.0)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        if self.pos + n > self.bytes.len() {
            return cache_err("truncated payload");
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64, CliError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn matrix(&mut self, shape: (usize, usize)) -> Result<DenseMatrix, CliError> {
        let (r, c) = (self.u64()? as usize, self.u64()? as usize);
        if (r, c) != shape {
            return cache_err(format!("matrix is {r}x{c}, expected {}x{}", shape.0, shape.1));
        }
        let raw = self.take(r * c * 8)?;
        let data: Vec<f64> = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
        Ok(DenseMatrix::from_vec(r, c, data))
    }
}

/// Parse and checksum-verify without replaying any algebra.
pub fn decode_chain(bytes: &[u8]) -> Result<CartanChain, CliError> {
    let (h, start) = parse_header(bytes)?;
    let q = QParam::new(h.q).map_err(|e| CliError::Cache(e.to_string()))?;
    let lambda = Weight::new(h.lambda.clone());
    if lambda.n() != h.n || h.n < 2 {
        return cache_err("lambda does not match N");
    }
    let r = h.n - 1;
    let d = h.dims[1];
    let mut cur = Cursor { bytes, pos: start };
    let (mut levels, mut left, mut right) = (Vec::new(), Vec::new(), Vec::new());
    for (k, &dim) in h.dims.iter().enumerate() {
        let len = cur.u64()? as usize;
        let block = cur.take(len)?;
        if hex(&Sha256::digest(block)) != h.checksums[k] {
            return cache_err(format!("checksum mismatch at level {k}"));
        }
        let mut lc = Cursor { bytes: block, pos: 0 };
        let wts = lc.matrix((dim, r))?;
        let weights = (0..dim).map(|a| Weight::new((0..r).map(|i| wts[(a, i)] as i64).collect())).collect();
        let e = (0..r).map(|_| lc.matrix((dim, dim))).collect::<Result<Vec<_>, _>>()?;
        let f = (0..r).map(|_| lc.matrix((dim, dim))).collect::<Result<Vec<_>, _>>()?;
        if k >= 1 {
            left.push(lc.matrix((d * h.dims[k - 1], dim))?);
            right.push(lc.matrix((h.dims[k - 1] * d, dim))?);
        }
        if lc.pos != block.len() {
            return cache_err(format!("trailing bytes in level {k}"));
        }
        levels.push(QModule::new(h.n, q, weights, e, f).map_err(|e| CliError::Cache(e.to_string()))?);
    }
    if cur.pos != bytes.len() {
        return cache_err("trailing bytes after payload");
    }
    Ok(CartanChain::from_parts(lambda, q, h.tol, levels, left, right))
}

/// Load, then replay the module checks on every level and coassociativity on small triples.
pub fn load_chain(path: &Path, tol: f64) -> Result<CartanChain, CliError> {
    let chain = decode_chain(&fs::read(path)?)?;
    for k in 0..=chain.max_level() {
        let rep = check_module(chain.level(k), tol);
        if !rep.passed {
            return cache_err(format!("level {k} fails module checks (worst residual {:e})", rep.worst()));
        }
    }
    for (a, b, c) in [(1, 1, 1), (1, 2, 1), (2, 1, 1)] {
        if a + b + c > chain.max_level() {
            continue;
        }
        let res = chain.coassociativity_residual(a, b, c).map_err(|e| CliError::Cache(e.to_string()))?;
        if res > 1e-8 {
            return cache_err(format!("coassociativity residual {res:e} at ({a},{b},{c})"));
        }
    }
    Ok(chain)
}

fn bits_eq(a: &DenseMatrix, b: &DenseMatrix) -> bool {
    a.shape() == b.shape() && a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Every stored matrix, weight and parameter agrees bit for bit.
pub fn chains_bit_equal(a: &CartanChain, b: &CartanChain) -> bool {
    if a.max_level() != b.max_level()
        || a.lambda() != b.lambda()
        || a.q().value().to_bits() != b.q().value().to_bits()
        || a.tol() != b.tol()
    {
        return false;
    }
    (0..=a.max_level()).all(|k| {
        let (x, y) = (a.level(k), b.level(k));
        x.weights() == y.weights()
            && (0..x.rank()).all(|i| bits_eq(x.e(i), y.e(i)) && bits_eq(x.f(i), y.f(i)))
            && (k == 0 || (bits_eq(a.left(k - 1), b.left(k - 1)) && bits_eq(a.right(k - 1), b.right(k - 1))))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let pairs = parse_config_text("# grid\nN = 3\nq = 1, 1.5\nlambda=1,1\nmax_level=5 # short\n").unwrap();
        let c = RunConfig::from_pairs(pairs).unwrap();
        assert_eq!((c.n, c.q.clone(), c.lambda.clone(), c.max_level), (3, vec![1.0, 1.5], vec![1, 1], 5));
        assert!(matches!(RunConfig::from_pairs([("colour", "red")]), Err(CliError::Config(_))));
        assert!(RunConfig::from_pairs([("q", "-1")]).is_err());
        assert!(RunConfig::from_pairs([("N", "3"), ("lambda", "1")]).is_err());
        assert!(RunConfig::from_pairs([("mu", "1,2,0")]).is_err());
        assert!(RunConfig::from_pairs([("format", "xml")]).is_err());
        assert!(parse_config_text("N 3").is_err());
        // N alone picks ω₁ for that rank
        assert_eq!(RunConfig::from_pairs([("N", "4")]).unwrap().lambda, vec![1, 0, 0]);
    }

    #[test]
    fn q_decimal_round_trip() {
        for q in [1.0, 1.5, 1.2, 0.7, std::f64::consts::PI, 1.0 + f64::EPSILON] {
            assert_eq!(fmt_f(q).parse::<f64>().unwrap().to_bits(), q.to_bits());
        }
    }

    #[test]
    fn cache_round_trip_and_corruption() {
        let tol = ToleranceProfile::default();
        let chain = build_chain(&Weight::new(vec![1, 1]), QParam::new(1.5).unwrap(), 3, &tol).unwrap();
        let bytes = encode_chain(&chain);
        let back = decode_chain(&bytes).unwrap();
        assert!(chains_bit_equal(&chain, &back));
        assert_eq!(encode_chain(&back), bytes);
        let mut bad = bytes.clone();
        let last = bad.len() - 3;
        bad[last] ^= 1;
        assert!(matches!(decode_chain(&bad), Err(CliError::Cache(m)) if m.contains("checksum")));
        assert!(decode_chain(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn exit_precedence() {
        assert_eq!(ExitStatus::Ok.worst(ExitStatus::Violation), ExitStatus::Violation);
        assert_eq!(ExitStatus::Ambiguous.worst(ExitStatus::Violation), ExitStatus::Ambiguous);
        assert_eq!(ExitStatus::Config.code(), 3);
    }

    #[test]
    fn scan_csv_shape() {
        let c = RunConfig::from_pairs([("q", "1.5"), ("max_level", "8")]).unwrap();
        let r = cmd_scan(&c);
        assert_eq!(r.status, ExitStatus::Ok, "{:?}", r.summary);
        let body = &r.artifacts[0].1;
        let header = body.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(header, "n,a,b,c,a_l,b_l");
        assert_eq!(body.lines().filter(|l| !l.starts_with('#')).count(), 1 + 6);
        assert_eq!(cmd_scan(&c), r);
    }
}
