//! Command-line front end.
//!
//! Subcommands `closure`, `verify`, `equilibrium` and `moments`. A config file
//! of `key = value` lines may supply any flag; explicit flags win.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::closure::{
    closure_rows, derive_all_from_e, recursive_n1, verify_compatibility, ClosureRow, ClosureSpec,
    ClosureTensorSet,
};
use crate::equilibrium::{
    equilibrium_multipliers, gibbs_residual, project_equilibrium, state_potential, Statistics,
    ThermoState,
};
use crate::error::{Error, Result};
use crate::f_family::{basis_mu_contraction, FFamilyElement};
use crate::moments::{equilibrium_moments_with_traces, symmetry_residual, MultiplierState};
use crate::oracle::{self, OracleConfig, RawTensor};
use crate::scalar::{rat, Rational};
use crate::scalar_expr::{ScalarExpr, Symbol};
use crate::tensor_dense::{DenseSymTensor, FourVector};

#[derive(Parser, Debug)]
#[command(name = "etclosure", version, about = "Closure tables and checks for moment systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Emit the closure coefficient table.
    Closure(Flags),
    /// Run verification suites.
    Verify(Flags),
    /// Equilibrium state functions.
    Equilibrium(Flags),
    /// Equilibrium moments and near-equilibrium residuals.
    Moments(Flags),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StatsArg {
    Mb,
    Fd,
    Be,
}

impl From<StatsArg> for Statistics {
    fn from(s: StatsArg) -> Self {
        match s {
            StatsArg::Mb => Statistics::Mb,
            StatsArg::Fd => Statistics::Fd,
            StatsArg::Be => Statistics::Be,
        }
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct Flags {
    #[arg(long = "M")]
    pub m_rank: Option<u32>,
    #[arg(long = "N")]
    pub n_rank: Option<u32>,
    #[arg(long)]
    pub hmax: Option<u32>,
    #[arg(long)]
    pub kmax: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Contravariant components of μ; override --gamma.
    #[arg(long, allow_negative_numbers = true)]
    pub mu0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu3: Option<f64>,
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long, value_enum)]
    pub stats: Option<StatsArg>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub suite: Option<String>,
    #[arg(long)]
    pub mutate: Option<usize>,
    /// Amplitude of seeded random multiplier deviations (`moments`).
    #[arg(long)]
    pub dev: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Fully resolved settings of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub m_rank: u32,
    pub n_rank: u32,
    pub h_max: u32,
    pub k_max: u32,
    pub lambda: f64,
    pub mu: [f64; 4],
    pub mass: f64,
    pub stats: Statistics,
    pub tol: f64,
    pub seed: u64,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub suite: String,
    pub mutate: usize,
    pub dev: f64,
}

fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("config line {}: expected key = value", i + 1)))?;
        out.insert(k.trim().trim_start_matches("--").to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn pick<T: std::str::FromStr>(flag: Option<T>, file: &BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match file.get(key) {
        Some(s) => s
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("config value for {key}: {s:?}"))),
        None => Ok(default),
    }
}

fn pick_opt<T: std::str::FromStr>(flag: Option<T>, file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    if flag.is_some() {
        return Ok(flag);
    }
    file.get(key)
        .map(|s| {
            s.parse()
                .map_err(|_| Error::InvalidArgument(format!("config value for {key}: {s:?}")))
        })
        .transpose()
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> Result<Self> {
        let file = match &flags.config {
            Some(p) => parse_config_file(p)?,
            None => BTreeMap::new(),
        };
        let m_rank = pick(flags.m_rank, &file, "M", 2)?;
        let n_rank = pick(flags.n_rank, &file, "N", 1)?;
        crate::closure::check_parity(m_rank, n_rank)?;
        let gamma = pick(flags.gamma, &file, "gamma", 1.0)?;
        let comps = [
            pick_opt(flags.mu0, &file, "mu0")?,
            pick_opt(flags.mu1, &file, "mu1")?,
            pick_opt(flags.mu2, &file, "mu2")?,
            pick_opt(flags.mu3, &file, "mu3")?,
        ];
        let mu = if comps.iter().any(Option::is_some) {
            comps.map(|c| c.unwrap_or(0.0))
        } else {
            [gamma, 0.0, 0.0, 0.0]
        };
        let stats = match flags.stats {
            Some(s) => s.into(),
            None => pick(None, &file, "stats", Statistics::Mb)?,
        };
        let format = match flags.format {
            Some(f) => f,
            None => match file.get("format").map(String::as_str) {
                None | Some("json") => Format::Json,
                Some("csv") => Format::Csv,
                Some(other) => return Err(Error::InvalidArgument(format!("unknown format {other:?}"))),
            },
        };
        Ok(RunConfig {
            m_rank,
            n_rank,
            h_max: pick(flags.hmax, &file, "hmax", 2)?,
            k_max: pick(flags.kmax, &file, "kmax", 1)?,
            lambda: pick(flags.lambda, &file, "lambda", 1.0)?,
            mu,
            mass: pick(flags.m, &file, "m", 1.0)?,
            stats,
            tol: pick(flags.tol, &file, "tol", 1e-8)?,
            seed: pick(flags.seed, &file, "seed", 1)?,
            format,
            out: pick_opt(flags.out.clone(), &file, "out")?,
            suite: pick(flags.suite.clone(), &file, "suite", "all".to_string())?,
            mutate: pick(flags.mutate, &file, "mutate", 0)?,
            dev: pick(flags.dev, &file, "dev", 0.0)?,
        })
    }

    pub fn spec(&self) -> Result<ClosureSpec> {
        ClosureSpec::new(self.m_rank, self.n_rank, self.h_max, self.k_max)
    }

    pub fn state(&self) -> Result<ThermoState<f64>> {
        ThermoState::new(self.lambda, FourVector::upper(self.mu), self.mass, self.stats)
    }
}

/// Result of one subcommand: exit code and the text to emit.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub output: String,
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run_from<I, S>(args: I) -> Outcome
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            return Outcome {
                code,
                output: e.to_string(),
            };
        }
    };
    run(&cli.command)
}

pub fn run(cmd: &Command) -> Outcome {
    let (flags, f): (&Flags, fn(&RunConfig) -> Result<(i32, String)>) = match cmd {
        Command::Closure(x) => (x, cmd_closure),
        Command::Verify(x) => (x, cmd_verify),
        Command::Equilibrium(x) => (x, cmd_equilibrium),
        Command::Moments(x) => (x, cmd_moments),
    };
    let result = RunConfig::resolve(flags).and_then(|cfg| {
        let (code, text) = f(&cfg)?;
        if let Some(path) = &cfg.out {
            write_atomic(path, &text)?;
        }
        Ok((code, text))
    });
    match result {
        Ok((code, output)) => Outcome { code, output },
        Err(e) => Outcome {
            code: e.exit_code(),
            output: format!("error: {e}"),
        },
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let io = |e: std::io::Error| Error::InvalidArgument(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(text.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Honors `ETCLOSURE_THREADS` for the global pool. Safe to call more than once.
pub fn init_threads() {
    if let Some(n) = std::env::var("ETCLOSURE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Flat CSV projection of a [`ClosureRow`].
#[derive(Serialize, Deserialize)]
struct CsvRow {
    h: u32,
    k: u32,
    s: u32,
    q: Option<u32>,
    coeff: String,
    gamma_pow: i64,
    msq_pow: i64,
    sym_q: Option<u32>,
    sym_h: Option<u32>,
}

pub fn rows_to_csv(rows: &[ClosureRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(CsvRow {
            h: r.h,
            k: r.k,
            s: r.s,
            q: r.q,
            coeff: r.coeff.clone(),
            gamma_pow: r.gamma_pow,
            msq_pow: r.msq_pow,
            sym_q: r.sym.map(|x| x[0]),
            sym_h: r.sym.map(|x| x[1]),
        })
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn rows_from_csv(text: &str) -> Result<Vec<ClosureRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize::<CsvRow>()
        .map(|r| {
            let r = r.map_err(|e| Error::InvalidArgument(e.to_string()))?;
            Ok(ClosureRow {
                h: r.h,
                k: r.k,
                s: r.s,
                q: r.q,
                coeff: r.coeff,
                gamma_pow: r.gamma_pow,
                msq_pow: r.msq_pow,
                sym: r.sym_q.zip(r.sym_h).map(|(q, h)| [q, h]),
            })
        })
        .collect()
}

pub fn rows_from_json(text: &str) -> Result<Vec<ClosureRow>> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    serde_json::from_value(v["rows"].clone()).map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn cmd_closure(cfg: &RunConfig) -> Result<(i32, String)> {
    let spec = cfg.spec()?;
    let mut set = ClosureTensorSet::build(&spec)?;
    if cfg.mutate > 0 {
        set.mutate(cfg.mutate);
    }
    let rows = closure_rows(&set);
    let text = match cfg.format {
        Format::Csv => rows_to_csv(&rows)?,
        Format::Json => pretty(&json!({
            "M": spec.m,
            "N": spec.n,
            "hmax": spec.h_max,
            "kmax": spec.k_max,
            "rows": rows,
        })),
    };
    Ok((0, text))
}

fn json_only(cfg: &RunConfig) -> Result<()> {
    if cfg.format == Format::Csv {
        return Err(Error::InvalidArgument("csv output is only available for closure".into()));
    }
    Ok(())
}

fn cmd_equilibrium(cfg: &RunConfig) -> Result<(i32, String)> {
    json_only(cfg)?;
    let state = cfg.state()?;
    let gamma = state.gamma()?;
    let eq = crate::equilibrium::equilibrium_hprime(&state)?;
    let rep = gibbs_residual(|l, g| state_potential(&state, l, g), state.lambda, gamma)?;
    let f = eq.functions;
    let v = json!({
        "lambda": state.lambda,
        "gamma": gamma,
        "m": state.mass,
        "n": f.n,
        "p": f.p,
        "e": f.e,
        "s": f.s,
        "T": f.t,
        "gibbs_residual": rep.lambda_direction.max(rep.gamma_direction),
        "integrability_residual": rep.integrability,
    });
    Ok((0, pretty(&v)))
}

/// Seeded deviation tensors of the given amplitude.
pub fn random_deviation(rank: usize, amplitude: f64, rng: &mut impl Rng) -> DenseSymTensor<f64> {
    DenseSymTensor::from_fn(rank, |_| amplitude * rng.gen_range(-1.0..1.0))
}

fn cmd_moments(cfg: &RunConfig) -> Result<(i32, String)> {
    json_only(cfg)?;
    let spec = cfg.spec()?;
    let state = cfg.state()?;
    let mut set = ClosureTensorSet::build(&spec)?;
    if cfg.mutate > 0 {
        set.mutate(cfg.mutate);
    }
    let mut rng = OracleConfig { seed: cfg.seed, ..Default::default() }.rng();
    let lam = random_deviation(spec.m as usize, cfg.dev, &mut rng);
    let mu = random_deviation(spec.n as usize, cfg.dev, &mut rng);
    let ms = MultiplierState::new(state.clone(), &lam, &mu, set)?;
    let delta = crate::moments::delta_hprime(&ms)?;
    let orders = crate::moments::delta_hprime_orders(&ms)?;
    let sym = symmetry_residual(&ms, 1e-5)?;
    let (moments, traces) = equilibrium_moments_with_traces(&state, &spec)?;
    let v = json!({
        "M": spec.m,
        "N": spec.n,
        "truncation": [moments.truncation.0, moments.truncation.1],
        "A": moments.a.to_json(),
        "B": moments.b.to_json(),
        "hprime": moments.hprime,
        "delta_hprime": delta,
        "residuals": {
            "symmetry": sym,
            "traces": traces,
            "orders": orders.iter().map(|((h, k), v)| json!({"h": h, "k": k, "value": v})).collect::<Vec<_>>(),
        },
    });
    Ok((0, pretty(&v)))
}

/// One verification case.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Case {
    pub suite: &'static str,
    pub name: String,
    pub residual: f64,
    pub exact: bool,
    pub pass: bool,
}

impl Case {
    fn exact(suite: &'static str, name: String, ok: bool) -> Self {
        Case {
            suite,
            name,
            residual: if ok { 0.0 } else { 1.0 },
            exact: true,
            pass: ok,
        }
    }

    fn numeric(suite: &'static str, name: String, residual: f64, tol: f64) -> Self {
        Case {
            suite,
            name,
            residual,
            exact: false,
            pass: residual.is_finite() && residual <= tol,
        }
    }

    fn failed(suite: &'static str, name: String, e: &Error) -> Self {
        Case {
            suite,
            name: format!("{name}: {e}"),
            residual: f64::INFINITY,
            exact: false,
            pass: false,
        }
    }
}

fn capture(suite: &'static str, name: String, f: impl FnOnce() -> Result<Case>) -> Case {
    f().unwrap_or_else(|e| Case::failed(suite, name, &e))
}

pub const SUITES: [&str; 5] = ["closure", "roundtrip", "oracle", "equilibrium", "moments"];

/// Exact closure checks: characteristic condition, cross-route, compatibility.
pub fn suite_closure(set: &ClosureTensorSet) -> Vec<Case> {
    let spec = set.spec;
    let mut cases: Vec<Case> = set
        .iter()
        .map(|(&(h, k), c)| {
            Case::exact(
                "closure",
                format!("characteristic C[{h},{k}]"),
                c.check_characteristic().holds,
            )
        })
        .collect();
    let reference: Result<BTreeMap<(u32, u32), FFamilyElement>> = if spec.n == 1 {
        recursive_n1(spec.m, spec.h_max).map(|v| v.into_iter().enumerate().map(|(h, c)| ((h as u32, 0), c)).collect())
    } else {
        derive_all_from_e(&spec)
    };
    match reference {
        Ok(reference) => {
            for (&(h, k), c) in set.iter() {
                let ok = reference.get(&(h, k)) == Some(c);
                cases.push(Case::exact("closure", format!("cross-route C[{h},{k}]"), ok));
            }
        }
        Err(e) => cases.push(Case::failed("closure", "cross-route".into(), &e)),
    }
    for (h, k) in spec.orders() {
        cases.push(capture("closure", format!("compatibility ({h},{k})"), || {
            let rep = verify_compatibility(set, h, k)?;
            Ok(Case::exact("closure", format!("compatibility ({h},{k})"), rep.holds()))
        }));
    }
    cases
}

/// Random admissible element of rank `n` whose leading monomials avoid the
/// excluded range of an `r`-fold lift.
pub fn random_admissible(n: usize, r: usize, rng: &mut impl Rng) -> FFamilyElement {
    let m = n as i64;
    let (lo, hi) = (m - m / 2 - 1, m - m / 2 + r as i64 - 2);
    let mut leading = ScalarExpr::zero();
    for _ in 0..rng.gen_range(1..=3) {
        let p = loop {
            let p = rng.gen_range(0..8i64);
            if r == 0 || p < lo || p > hi {
                break p;
            }
        };
        let coeff = oracle::random_rational(rng, 4, 5);
        let sym = Symbol::new(rng.gen_range(0..3), rng.gen_range(0..3));
        leading += &ScalarExpr::monomial(coeff, -2 * (3 + p), rng.gen_range(0..3), Some(sym));
    }
    FFamilyElement::from_leading(n, leading)
}

/// Exact round trips: equilibrium projection and trace∘lift.
pub fn suite_roundtrip(cfg: &RunConfig, cases_per: usize) -> Vec<Case> {
    let mut rng = OracleConfig { seed: cfg.seed, ..Default::default() }.rng();
    let mut cases = Vec::new();
    let mu = oracle::random_timelike_rational(&mut rng);
    let lambda = oracle::random_rational(&mut rng, 3, 7);
    let mass = Rational::new(3.into(), 2.into());
    for m in [0u32, 2, 4, 6] {
        for n in [1u32, 3, 5] {
            cases.push(capture("roundtrip", format!("multipliers M={m} N={n}"), || {
                let (l, u) = equilibrium_multipliers(&lambda, &mu, m as usize, n as usize, &mass)?;
                let (l2, u2) = project_equilibrium(&l, &u, &mass)?;
                Ok(Case::exact(
                    "roundtrip",
                    format!("multipliers M={m} N={n}"),
                    l2 == lambda && u2 == mu,
                ))
            }));
        }
    }
    for i in 0..cases_per {
        let n = rng.gen_range(0..=4usize);
        let r = rng.gen_range(1..=2usize);
        let f = random_admissible(n, r, &mut rng);
        let free: Vec<ScalarExpr> = (0..r)
            .map(|_| ScalarExpr::monomial(oracle::random_rational(&mut rng, 3, 4), 0, 1, Some(Symbol::new(5, 0))))
            .collect();
        let name = format!("lift {i}: rank {n}, r = {r}");
        cases.push(capture("roundtrip", name.clone(), || {
            let up = f.lift(r, &free)?;
            Ok(Case::exact("roundtrip", name.clone(), up.trace_n(r)? == f))
        }));
    }
    cases
}

/// Coefficient-space operations against brute-force components, exact.
pub fn suite_oracle(cfg: &RunConfig, max_rank: usize, samples: usize) -> Vec<Case> {
    let ocfg = OracleConfig {
        seed: cfg.seed,
        max_rank: max_rank.max(6),
        ..Default::default()
    };
    let mut rng = ocfg.rng();
    let mut cases = Vec::new();
    for i in 0..samples {
        let rank = i % (max_rank.min(5) + 1);
        let raw = oracle::random_raw_rational(rank, &mut rng);
        cases.push(capture("oracle", format!("symmetrize #{i} rank {rank}"), || {
            let fast = DenseSymTensor::symmetrize(rank, &raw.data)?;
            let slow = oracle::brute_symmetrize(&raw, &ocfg)?;
            Ok(Case::exact("oracle", format!("symmetrize #{i} rank {rank}"), fast == slow))
        }));
    }
    let mu = oracle::random_timelike_rational(&mut rng);
    let up = mu.up();
    let gamma = mu.gamma().expect("rational gamma by construction");
    let empty = crate::scalar_expr::FunctionRegistry::<Rational>::new(0);
    for n in 0..=max_rank {
        for s in 0..=n / 2 {
            let name = format!("basis Y^{n}_{s}");
            cases.push(capture("oracle", name.clone(), || {
                let fast = DenseSymTensor::gmu_basis(n, s, &up)?;
                let slow = oracle::brute_realize_basis(n, s, &up, &ocfg)?;
                let mut ok = slow.equals(&fast);
                if n >= 2 {
                    ok &= oracle::brute_trace(&slow, &ocfg)?.equals(&fast.trace_pair()?);
                }
                if n >= 1 {
                    ok &= oracle::brute_mu_contract(&slow, &mu.down(), &ocfg)?.equals(&fast.contract_mu(&mu)?);
                }
                Ok(Case::exact("oracle", name.clone(), ok))
            }));
        }
    }
    // trace, μ-derivative and realization of family elements
    for n in 0..max_rank {
        let f = random_admissible(n, 0, &mut rng);
        let reg = crate::scalar_expr::FunctionRegistry::<Rational>::polynomial_family(3, 4);
        let lam = oracle::random_rational(&mut rng, 2, 3);
        let mass = rat(2);
        let name = format!("family ops rank {n}");
        cases.push(capture("oracle", name.clone(), || {
            let fast = f.realize(&lam, &mu, &mass, &reg)?;
            let slow = oracle::brute_realize(&f, &lam, &mu, &mass, &reg, &ocfg)?;
            let mut ok = slow.equals(&fast);
            if n >= 2 {
                let t = f.trace()?.realize(&lam, &mu, &mass, &reg)?;
                ok &= oracle::brute_trace(&slow, &ocfg)?.equals(&t);
            }
            if n < max_rank {
                // ∂/∂μ_β of Σ φ_s(γ) Y_s(μ): exact product rule on components
                let d = f.mu_derivative()?.realize(&lam, &mu, &mass, &reg)?;
                let brute = oracle::brute_mu_derivative(&f, &lam, &mu, &mass, &reg, &ocfg)?;
                ok &= brute.equals(&d);
            }
            Ok(Case::exact("oracle", name.clone(), ok))
        }));
    }
    for n in (2..=max_rank).step_by(2) {
        for r in 0..=n {
            let name = format!("contraction table n={n} r={r}");
            cases.push(capture("oracle", name.clone(), || {
                let table = basis_mu_contraction(n, r)?;
                let mut lhs = oracle::brute_realize_basis(n, n / 2, &up, &ocfg)?;
                for _ in 0..r {
                    lhs = oracle::brute_mu_contract(&lhs, &mu.down(), &ocfg)?;
                }
                let mut rhs = RawTensor::<Rational>::zeros(n - r);
                for (s, phi) in table.phi().iter().enumerate() {
                    let c = oracle::eval_expr(phi, &rat(0), &gamma, &rat(1), &empty)?;
                    let b = oracle::brute_realize_basis(n - r, s, &up, &ocfg)?;
                    for (a, v) in rhs.data.iter_mut().zip(b.data) {
                        *a += &c * v;
                    }
                }
                Ok(Case::exact("oracle", name.clone(), lhs == rhs))
            }));
        }
        let name = format!("single contraction identity n={n}");
        cases.push(capture("oracle", name.clone(), || {
            let (a, b, c) = oracle::single_contraction_identity(n, &mu, &ocfg)?;
            Ok(Case::exact("oracle", name.clone(), a == b && b == c))
        }));
    }
    cases
}

/// Bessel oracle, Gibbs relation and integrability on the standard grid.
pub fn suite_equilibrium(cfg: &RunConfig) -> Vec<Case> {
    let consts = crate::equilibrium::Constants::default();
    [0.1, 1.0, 10.0]
        .par_iter()
        .flat_map(|&z| {
            let mut cases = Vec::new();
            let state = ThermoState::new(cfg.lambda, FourVector::upper([z, 0.0, 0.0, 0.0]), 1.0, Statistics::Mb);
            let name = format!("bessel z={z}");
            cases.push(capture("equilibrium", name.clone(), || {
                let st = state.clone()?;
                let h = state_potential(&st, st.lambda, z)?.h;
                let b = oracle::bessel_h(st.lambda, z, 1.0, &consts)?;
                Ok(Case::numeric("equilibrium", name.clone(), ((h - b) / b).abs(), cfg.tol))
            }));
            let name = format!("gibbs z={z}");
            cases.push(capture("equilibrium", name.clone(), || {
                let st = state.clone()?;
                let rep = gibbs_residual(|l, g| state_potential(&st, l, g), st.lambda, z)?;
                Ok(Case::numeric("equilibrium", name.clone(), rep.max(), cfg.tol))
            }));
            cases
        })
        .collect()
}

/// Symmetry of the truncated series and kinetic trace chain.
pub fn suite_moments(cfg: &RunConfig, set: &ClosureTensorSet) -> Vec<Case> {
    let mut rng = OracleConfig { seed: cfg.seed, ..Default::default() }.rng();
    let spec = set.spec;
    let mut cases = Vec::new();
    let name = "symmetry".to_string();
    let mu = oracle::random_timelike_f64(&mut rng);
    let lam = random_deviation(spec.m as usize, 2e-6, &mut rng);
    let mud = random_deviation(spec.n as usize, 2e-6, &mut rng);
    cases.push(capture("moments", name.clone(), || {
        let st = ThermoState::new(rng.gen_range(-0.5..0.5), mu.clone(), 1.0, Statistics::Mb)?;
        let ms = MultiplierState::new(st, &lam, &mud, set.clone())?;
        Ok(Case::numeric("moments", name.clone(), symmetry_residual(&ms, 1e-5)?.max(), 1e-6))
    }));
    let name = "trace chain".to_string();
    cases.push(capture("moments", name.clone(), || {
        let st = cfg.state()?;
        let (_, rep) = equilibrium_moments_with_traces(&st, &spec)?;
        Ok(Case::numeric("moments", name.clone(), rep.max, cfg.tol))
    }));
    cases
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: String,
    pub cases: usize,
    pub failures: Vec<Case>,
    /// Largest residual among exact checks (zero when all hold).
    pub max_residual: f64,
    pub max_numeric_residual: f64,
    pub seed: u64,
    pub mutated: Option<(u32, u32)>,
}

pub fn verify(cfg: &RunConfig) -> Result<VerifyReport> {
    let wanted: Vec<&str> = if cfg.suite == "all" {
        SUITES.to_vec()
    } else {
        let s = cfg.suite.as_str();
        if !SUITES.contains(&s) {
            return Err(Error::InvalidArgument(format!(
                "unknown suite {s:?}; expected one of all, {}",
                SUITES.join(", ")
            )));
        }
        vec![s]
    };
    let spec = cfg.spec()?;
    let mut set = ClosureTensorSet::build(&spec)?;
    let mutated = if cfg.mutate > 0 { set.mutate(cfg.mutate) } else { None };
    let mut cases = Vec::new();
    for s in wanted {
        cases.extend(match s {
            "closure" => suite_closure(&set),
            "roundtrip" => suite_roundtrip(cfg, 10),
            "oracle" => suite_oracle(cfg, 4, 12),
            "equilibrium" => suite_equilibrium(cfg),
            _ => suite_moments(cfg, &set),
        });
    }
    let max_of = |exact: bool| {
        cases
            .iter()
            .filter(|c| c.exact == exact)
            .map(|c| c.residual)
            .fold(0.0, f64::max)
    };
    Ok(VerifyReport {
        suite: cfg.suite.clone(),
        cases: cases.len(),
        max_residual: max_of(true),
        max_numeric_residual: max_of(false),
        failures: cases.into_iter().filter(|c| !c.pass).collect(),
        seed: cfg.seed,
        mutated,
    })
}

fn cmd_verify(cfg: &RunConfig) -> Result<(i32, String)> {
    json_only(cfg)?;
    let rep = verify(cfg)?;
    let code = if rep.failures.is_empty() { 0 } else { 1 };
    Ok((code, pretty(&serde_json::to_value(&rep).expect("serializable"))))
}
