//! `momfix` command-line front end.

// `!(x > a)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use clap::{Parser, Subcommand, ValueEnum};
use momfix::analytic::{f_spectral, FEvaluator};
use momfix::divisibility::{
    calibrated_tol, in_image_of_t, infdiv_check, log_convexity_check, noise_floor,
};
use momfix::seqcore::{
    asymptotic_report, fixed_point_moments, g_iterate, lambda_sequence, MomentSequence,
};
use momfix::spectrum::{
    density, ledger_by_bisection, ledger_by_iteration, ledger_by_limit, ledger_merged,
    SpectrumLedger, DEFAULT_P_MAX, DEFAULT_STEPS, DENSITY_WARN, MERGE_SPLIT,
};
use momfix::transform::{iterate_spectral, iterate_t, moments_with_tail, StepOptions};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use std::io::Write;
use std::path::PathBuf;

const EXIT_OK: i32 = 0;
const EXIT_FAIL: i32 = 1;
const EXIT_USAGE: i32 = 2;
const EXIT_CAP: i32 = 3;

/// Points closer than this to a pole are written as NaN.
const PLOT_POLE_GAP: f64 = 1e-6;
const PLOT_MAX_POINTS: usize = 1_000_000;

#[derive(Parser, Debug)]
#[command(
    name = "momfix",
    version,
    about = "Fixed point of the moment transformation T(a)_n = 1/(a_0+...+a_n)"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Table of n, m_n, λ_n, m_n·sqrt(2n), λ_n² - 2n
    Moments {
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// refuse prefixes longer than this
        #[arg(long, default_value_t = 10_000_000)]
        cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Zero/residue ledger as JSON
    Spectrum {
        #[arg(long = "p-max", default_value_t = DEFAULT_P_MAX)]
        p_max: usize,
        #[arg(long, value_enum, default_value_t = Method::Merged)]
        method: Method,
        /// orbit length for the limit formulas
        #[arg(long = "N", default_value_t = 1_000_000)]
        big_n: usize,
        #[arg(long, default_value_t = DEFAULT_STEPS)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Density D(t) and D(t)·sqrt(2π(1-t)) on a grid
    Density {
        /// ledger file; computed with the merged method when absent
        #[arg(long)]
        ledger: Option<PathBuf>,
        #[arg(long = "p-max", default_value_t = DEFAULT_P_MAX)]
        p_max: usize,
        #[arg(long, default_value_t = DEFAULT_STEPS)]
        steps: usize,
        /// explicit grid, comma separated
        #[arg(long, value_delimiter = ',')]
        t: Vec<f64>,
        #[arg(long = "t-from", default_value_t = 1e-6)]
        t_from: f64,
        #[arg(long = "t-to", default_value_t = 0.999)]
        t_to: f64,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trajectory of T from a start sequence
    Iterate {
        /// delta0, ones, or a path to a JSON list (a_0 = 1)
        #[arg(long, default_value = "delta0")]
        start: String,
        #[arg(long, default_value_t = 6)]
        steps: usize,
        /// also iterate the spectral measures with this truncation
        #[arg(long = "p-max")]
        p_max: Option<usize>,
        /// number of moments per step
        #[arg(long, default_value_t = 21)]
        len: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// f on a grid, with pole and zero annotations
    PlotF {
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// ledger for x < -1; computed when absent
        #[arg(long)]
        ledger: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Method {
    Bisect,
    Limit,
    Iterate,
    Merged,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Suite {
    Asymptotics,
    Functional,
    Spectrum,
    Divisibility,
    All,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Cap(String),
    Fail(String),
}

impl From<momfix::Error> for CliError {
    fn from(e: momfix::Error) -> Self {
        use momfix::Error as E;
        match e {
            E::PrecisionCap { .. }
            | E::CapExceeded { .. }
            | E::PrecisionLoss { .. }
            | E::CountMismatch { .. } => CliError::Cap(e.to_string()),
            E::Domain(_) => CliError::Usage(e.to_string()),
            _ => CliError::Fail(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Fail(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// 17 significant digits, positional where that stays readable.
fn fmt17(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0.0000000000000000".into();
    }
    let e = v.abs().log10().floor() as i32;
    if (-5..15).contains(&e) {
        format!("{:.*}", (16 - e) as usize, v)
    } else {
        format!("{v:.16e}")
    }
}

fn emit(out: &mut dyn Write, path: &Option<PathBuf>, body: &str) -> CliResult<()> {
    match path {
        Some(p) => {
            std::fs::write(p, body)?;
            writeln!(out, "wrote {}", p.display())?;
        }
        None => out.write_all(body.as_bytes())?,
    }
    Ok(())
}

fn set_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("MOMFIX_THREADS") else {
        return Ok(());
    };
    let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!("MOMFIX_THREADS = {v:?} is not a positive integer"))
    })?;
    #[cfg(feature = "parallel")]
    {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if code == EXIT_OK {
                let _ = write!(out, "{e}");
            } else {
                let _ = write!(err, "{e}");
            }
            return code;
        }
    };
    let res = set_threads().and_then(|_| dispatch(cli.cmd, out));
    match res {
        Ok(code) => code,
        Err(e) => {
            let (code, msg) = match e {
                CliError::Usage(m) => (EXIT_USAGE, m),
                CliError::Cap(m) => (EXIT_CAP, m),
                CliError::Fail(m) => (EXIT_FAIL, m),
            };
            let _ = writeln!(err, "momfix: {msg}");
            code
        }
    }
}

fn dispatch(cmd: Cmd, out: &mut dyn Write) -> CliResult<i32> {
    match cmd {
        Cmd::Moments {
            n,
            format,
            cap,
            out: path,
        } => cmd_moments(n, format, cap, &path, out),
        Cmd::Spectrum {
            p_max,
            method,
            big_n,
            steps,
            out: path,
        } => cmd_spectrum(p_max, method, big_n, steps, &path, out),
        Cmd::Density {
            ledger,
            p_max,
            steps,
            t,
            t_from,
            t_to,
            points,
            out: path,
        } => {
            let grid = if t.is_empty() {
                linear_grid(t_from, t_to, points)?
            } else {
                t
            };
            let ledger = load_or_merged(&ledger, p_max, steps)?;
            cmd_density(&ledger, &grid, &path, out)
        }
        Cmd::Iterate {
            start,
            steps,
            p_max,
            len,
            format,
            out: path,
        } => cmd_iterate(&start, steps, p_max, len, format, &path, out),
        Cmd::PlotF {
            from,
            to,
            step,
            ledger,
            out: path,
        } => cmd_plot_f(from, to, step, &ledger, &path, out),
        Cmd::Verify { suite } => cmd_verify(suite, out),
    }
}

fn linear_grid(a: f64, b: f64, n: usize) -> CliResult<Vec<f64>> {
    if n < 2 || !(a < b) {
        return Err(CliError::Usage(format!(
            "bad grid: {n} points on [{a}, {b}]"
        )));
    }
    Ok((0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect())
}

fn load_or_merged(path: &Option<PathBuf>, p_max: usize, steps: usize) -> CliResult<SpectrumLedger> {
    match path {
        Some(p) => {
            SpectrumLedger::load(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
        }
        None => Ok(ledger_merged(p_max, steps)?),
    }
}

#[derive(Serialize)]
struct MomentRow {
    n: usize,
    m: f64,
    lambda: f64,
    m_scaled: Option<f64>,
    lambda_sq_minus_2n: Option<f64>,
}

fn cmd_moments(
    n: usize,
    format: Format,
    cap: usize,
    path: &Option<PathBuf>,
    out: &mut dyn Write,
) -> CliResult<i32> {
    if n > cap {
        return Err(CliError::Cap(format!("n = {n} exceeds the cap {cap}")));
    }
    let m = fixed_point_moments(n);
    let lam = lambda_sequence(n);
    let rows = m
        .values()
        .iter()
        .zip(&lam)
        .enumerate()
        .map(|(i, (&mi, &li))| {
            let two_n = 2.0 * i as f64;
            MomentRow {
                n: i,
                m: mi,
                lambda: li,
                m_scaled: (i > 0).then(|| mi * two_n.sqrt()),
                lambda_sq_minus_2n: (i > 0).then(|| li * li - two_n),
            }
        });
    let body = match format {
        Format::Json => {
            let v: Vec<MomentRow> = rows.collect();
            serde_json::to_string_pretty(&v).map_err(|e| CliError::Fail(e.to_string()))? + "\n"
        }
        Format::Csv => {
            let mut s = String::from("n,m,lambda,m_sqrt_2n,lambda_sq_minus_2n\n");
            let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), fmt17);
            for r in rows {
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.n,
                    fmt17(r.m),
                    fmt17(r.lambda),
                    opt(r.m_scaled),
                    opt(r.lambda_sq_minus_2n)
                ));
            }
            s
        }
    };
    emit(out, path, &body)?;
    Ok(EXIT_OK)
}

fn cmd_spectrum(
    p_max: usize,
    method: Method,
    big_n: usize,
    steps: usize,
    path: &Option<PathBuf>,
    out: &mut dyn Write,
) -> CliResult<i32> {
    if p_max == 0 {
        return Err(CliError::Usage("--p-max must be at least 1".into()));
    }
    let ledger = match method {
        Method::Bisect => ledger_by_bisection(p_max)?,
        Method::Limit => ledger_by_limit(p_max, big_n)?,
        Method::Iterate => ledger_by_iteration(p_max, steps)?,
        Method::Merged => ledger_merged(p_max, steps)?,
    };
    let json = ledger.to_json()? + "\n";
    emit(out, path, &json)?;
    Ok(EXIT_OK)
}

fn cmd_density(
    ledger: &SpectrumLedger,
    grid: &[f64],
    path: &Option<PathBuf>,
    out: &mut dyn Write,
) -> CliResult<i32> {
    let mut s = String::from("t,D,D_sqrt_2pi_1mt\n");
    let mut first_warn = None;
    let mut worst = 0.0f64;
    let mut rows = String::new();
    for &t in grid {
        let d = density(ledger, t)?;
        if d.warning {
            first_warn.get_or_insert(t);
            worst = worst.max(d.tail_est);
        }
        let ratio = d.d * (2.0 * std::f64::consts::PI * (1.0 - t)).sqrt();
        rows.push_str(&format!("{},{},{}\n", fmt17(t), fmt17(d.d), fmt17(ratio)));
    }
    if let Some(t) = first_warn {
        s.push_str(&format!(
            "# warning: tail estimate above {DENSITY_WARN:e} from t = {} (max {worst:e})\n",
            fmt17(t)
        ));
    }
    s.push_str(&rows);
    emit(out, path, &s)?;
    Ok(EXIT_OK)
}

fn start_sequence(start: &str, len: usize) -> CliResult<MomentSequence> {
    if len == 0 {
        return Err(CliError::Usage("--len must be positive".into()));
    }
    let v = match start {
        "delta0" => {
            let mut v = vec![0.0; len];
            v[0] = 1.0;
            v
        }
        "ones" => vec![1.0; len],
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("{path}: {e}")))?;
            let v: Vec<f64> =
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{path}: {e}")))?;
            if v.len() < len {
                return Err(CliError::Usage(format!(
                    "{path} has {} terms, need {len}",
                    v.len()
                )));
            }
            v[..len].to_vec()
        }
    };
    MomentSequence::new(v).map_err(|e| CliError::Usage(e.to_string()))
}

#[derive(Serialize)]
struct StepReport {
    step: usize,
    distance: f64,
    /// None for the first two steps
    sandwich: Option<bool>,
    moments: Vec<f64>,
    spectral: Option<Vec<f64>>,
}

/// Every component of `cur` lies between the two previous iterates.
fn sandwiched(cur: &[f64], a: &[f64], b: &[f64]) -> bool {
    cur.iter()
        .zip(a.iter().zip(b))
        .all(|(&c, (&x, &y))| c >= x.min(y) && c <= x.max(y))
}

fn cmd_iterate(
    start: &str,
    steps: usize,
    p_max: Option<usize>,
    len: usize,
    format: Format,
    path: &Option<PathBuf>,
    out: &mut dyn Write,
) -> CliResult<i32> {
    let a = start_sequence(start, len)?;
    let tr = iterate_t(&a, steps)?;
    // spectral iterates start at μ₂ = uniform, reached at step 2 from δ₀ and step 1 from ones
    let offset = match start {
        "delta0" => Some(2usize),
        "ones" => Some(1),
        _ => None,
    };
    let spectral = match (p_max, offset) {
        (Some(p), Some(off)) if steps >= off => Some((
            iterate_spectral(steps - off, p, &StepOptions::default())?,
            off,
        )),
        _ => None,
    };
    let mut seqs = vec![a.values().to_vec()];
    seqs.extend(tr.iterates.iter().map(|s| s.values().to_vec()));
    let reports: Vec<StepReport> = (1..=steps)
        .map(|n| StepReport {
            step: n,
            distance: tr.distance_to_fixed[n - 1],
            sandwich: (n >= 2)
                .then(|| sandwiched(&seqs[n][1..], &seqs[n - 1][1..], &seqs[n - 2][1..])),
            moments: seqs[n].clone(),
            spectral: spectral.as_ref().and_then(|(ms, off)| {
                n.checked_sub(*off)
                    .map(|j| (0..len).map(|k| moments_with_tail(&ms[j], k)).collect())
            }),
        })
        .collect();
    let body = match format {
        Format::Json => {
            serde_json::to_string_pretty(&reports).map_err(|e| CliError::Fail(e.to_string()))?
                + "\n"
        }
        Format::Csv => {
            let mut s = String::from("step,k,moment,spectral\n");
            for r in &reports {
                let flag = match r.sandwich {
                    Some(true) => "pass",
                    Some(false) => "fail",
                    None => "n/a",
                };
                s.push_str(&format!(
                    "# step {}: distance {}, sandwich {flag}\n",
                    r.step,
                    fmt17(r.distance)
                ));
                for (k, v) in r.moments.iter().enumerate() {
                    let sp = r
                        .spectral
                        .as_ref()
                        .map_or_else(|| "-".to_string(), |v| fmt17(v[k]));
                    s.push_str(&format!("{},{k},{},{sp}\n", r.step, fmt17(*v)));
                }
            }
            s
        }
    };
    emit(out, path, &body)?;
    Ok(EXIT_OK)
}

/// Poles and zeros of f in (-depth-1, 0] from a ledger.
fn poles_and_zeros(ledger: &SpectrumLedger, depth: usize) -> (Vec<f64>, Vec<f64>) {
    let mut poles = Vec::new();
    let mut zeros = vec![0.0];
    for p in 1..=depth {
        poles.push(-(p as f64));
        for q in 1..p {
            poles.extend(ledger.shell(q).iter().map(|e| e.xi - (p - q) as f64));
        }
        zeros.extend(ledger.shell(p).iter().map(|e| e.xi));
    }
    poles.sort_by(f64::total_cmp);
    zeros.sort_by(f64::total_cmp);
    (poles, zeros)
}

fn cmd_plot_f(
    from: f64,
    to: f64,
    step: f64,
    ledger_path: &Option<PathBuf>,
    path: &Option<PathBuf>,
    out: &mut dyn Write,
) -> CliResult<i32> {
    if !(from < to) || !(step > 0.0) || !from.is_finite() || !to.is_finite() {
        return Err(CliError::Usage(format!(
            "bad range [{from}, {to}] step {step}"
        )));
    }
    let n = ((to - from) / step * (1.0 + 1e-12)).floor() as usize + 1;
    if n > PLOT_MAX_POINTS {
        return Err(CliError::Usage(format!(
            "{n} points exceed {PLOT_MAX_POINTS}"
        )));
    }
    let depth = if from <= -1.0 {
        (-from).ceil() as usize
    } else {
        0
    };
    let ledger = match (depth, ledger_path) {
        (0, None) => None,
        (_, Some(p)) => Some(load_or_merged(&Some(p.clone()), 0, 0)?),
        (d, None) if d <= MERGE_SPLIT => Some(ledger_by_bisection(d)?),
        (d, None) if d <= DEFAULT_P_MAX => Some(ledger_merged(d, DEFAULT_STEPS)?),
        (d, None) => {
            return Err(CliError::Cap(format!(
                "range reaches shell {d}, beyond {DEFAULT_P_MAX}"
            )))
        }
    };
    if let Some(l) = &ledger {
        if l.p_max < depth {
            return Err(CliError::Cap(format!(
                "ledger has {} shells, range needs {depth}",
                l.p_max
            )));
        }
    }
    let (poles, zeros) = match &ledger {
        Some(l) => poles_and_zeros(l, depth),
        None => (Vec::new(), vec![0.0]),
    };
    let ev = FEvaluator::default();
    let mut s = String::from("x,f,abs_err_est\n");
    let mut notes: Vec<(f64, &str)> = poles
        .iter()
        .map(|&x| (x, "pole"))
        .chain(zeros.iter().map(|&x| (x, "zero")))
        .filter(|(x, _)| *x >= from && *x <= to)
        .collect();
    notes.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (x, kind) in notes {
        s.push_str(&format!("# {kind},{}\n", fmt17(x)));
    }
    for i in 0..n {
        let x = from + i as f64 * step;
        let near = poles.iter().any(|p| (x - p).abs() < PLOT_POLE_GAP);
        let (v, e) = if near {
            (f64::NAN, f64::NAN)
        } else if x > -1.0 {
            let r = ev.f_real(x)?;
            (r.value, r.abs_err_est)
        } else {
            let l = ledger.as_ref().expect("ledger present below -1");
            let r = f_spectral(Complex64::new(x, 0.0), l)?;
            (r.value.re, r.abs_err_est)
        };
        s.push_str(&format!("{},{},{}\n", fmt17(x), fmt17(v), fmt17(e)));
    }
    emit(out, path, &s)?;
    Ok(EXIT_OK)
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

fn suite_asymptotics() -> CliResult<Vec<Check>> {
    let mut v = Vec::new();
    let m = fixed_point_moments(100_000);
    let m1 = (5f64.sqrt() - 1.0) / 2.0;
    v.push(check(
        "m_1 closed form",
        (m.values()[1] - m1).abs() < 1e-12,
        format!("{:e}", m.values()[1] - m1),
    ));
    let mut sum = 0.0;
    let mut worst = 0.0f64;
    for &x in m.values() {
        sum += x;
        worst = worst.max((sum * x - 1.0).abs());
    }
    v.push(check(
        "partial sums m_n Σm_k = 1, n ≤ 1e5",
        worst < 1e-12,
        format!("max {worst:e}"),
    ));
    let r = asymptotic_report(1_000_000)?;
    v.push(check(
        "m_n sqrt(2n) at n = 1e6",
        (r.m_scaled - 1.0).abs() < 0.01,
        format!("{}", r.m_scaled),
    ));
    let lam = lambda_sequence(1_000_001);
    let inc = lam[1_000_001].powi(2) - lam[1_000_000].powi(2);
    v.push(check(
        "λ² increments → 2",
        (inc - 2.0).abs() < 1e-3,
        format!("{inc}"),
    ));
    let d = |n: usize| lam[n] * lam[n] - 2.0 * n as f64;
    let slope = (d(1_000_000) - d(10_000)) / (1e6f64.ln() - 1e4f64.ln());
    v.push(check(
        "(λ_n² - 2n) grows like -ln(n)/2",
        (slope + 0.5).abs() < 0.01,
        format!("slope {slope}, raw ratio at 1e6 {}", r.log_ratio),
    ));
    let worst = (0..=100)
        .map(|n| (g_iterate(n).tan() - m.values()[n]).abs())
        .fold(0.0, f64::max);
    v.push(check(
        "tan G^n(π/4) = m_n",
        worst < 1e-10,
        format!("max {worst:e}"),
    ));
    Ok(v)
}

fn suite_functional() -> CliResult<Vec<Check>> {
    let ev = FEvaluator::default();
    let mut rng = rand::rngs::StdRng::seed_from_u64(2024);
    let (mut r7, mut r8) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let x: f64 = rng.random_range(0.0..100.0);
        let f0 = ev.f_real(x)?.value;
        let f1 = ev.f_real(x + 1.0)?.value;
        r8 = r8.max((f0 - (f1 - 1.0 / f1)).abs());
        r7 = r7.max((f1 * ev.big_f_real(x)?.value - 1.0).abs());
    }
    let mut v = vec![
        check("f(z+1)F(z) = 1", r7 < 1e-8, format!("max residual {r7:e}")),
        check(
            "f(z) = f(z+1) - 1/f(z+1)",
            r8 < 1e-8,
            format!("max residual {r8:e}"),
        ),
    ];
    let one = ev.f_real(1.0)?;
    v.push(check(
        "f(1) = 1",
        (one.value - 1.0).abs() <= one.abs_err_est.max(1e-15),
        format!("{}", one.value),
    ));
    let grid: Vec<(f64, f64)> = (0..=209)
        .map(|i| {
            let x = -0.9 + 0.1 * i as f64;
            ev.big_f_real(x).map(|r| (x, r.value))
        })
        .collect::<momfix::Result<_>>()?;
    v.push(check(
        "F log-convex on (-0.9, 20)",
        log_convexity_check(&grid, 1e-9)?,
        String::new(),
    ));
    Ok(v)
}

fn agreement(a: &SpectrumLedger, b: &SpectrumLedger, p_upto: usize) -> (bool, f64, f64) {
    let mut ratio = (a.rho0 - b.rho0).abs() / (a.rho0_err + b.rho0_err);
    let mut max_err = a.rho0_err + b.rho0_err;
    for p in 1..=p_upto {
        for (x, y) in a.shell(p).iter().zip(b.shell(p)) {
            let tol = x.err + y.err;
            max_err = max_err.max(tol);
            ratio = ratio
                .max((x.xi - y.xi).abs() / tol)
                .max((x.rho - y.rho).abs() / tol);
        }
    }
    (ratio <= 1.0 && max_err <= 5e-3, ratio, max_err)
}

fn suite_spectrum() -> CliResult<Vec<Check>> {
    let bi = ledger_by_bisection(4)?;
    let li = ledger_by_limit(4, 1_000_000)?;
    let it = ledger_by_iteration(8, 12)?;
    let mut v = Vec::new();
    let mut all = true;
    let mut detail = Vec::new();
    for (name, a, b) in [
        ("bisect/limit", &bi, &li),
        ("bisect/iterate", &bi, &it),
        ("limit/iterate", &li, &it),
    ] {
        let (ok, ratio, err) = agreement(a, b, 4);
        all &= ok;
        detail.push(format!("{name} {ratio:.3} (max err {err:.1e})"));
    }
    v.push(check(
        "three-way ledger agreement, p ≤ 4",
        all,
        detail.join("; "),
    ));
    let counts = [&bi, &li, &it]
        .iter()
        .all(|l| (1..=l.p_max).all(|p| l.shell(p).len() == 1 << (p - 1)));
    v.push(check(
        "2^(p-1) zeros per shell",
        counts,
        format!("iteration up to p = {}", it.p_max),
    ));
    let pos = [&bi, &li, &it]
        .iter()
        .all(|l| l.rho0 > 0.0 && l.entries().all(|e| e.rho > 0.0));
    v.push(check("all residues positive", pos, String::new()));
    let d: Vec<f64> = (1..=1000)
        .map(|i| density(&it, i as f64 / 1001.0).map(|p| p.d))
        .collect::<momfix::Result<_>>()?;
    let inc = d.windows(2).all(|w| w[1] > w[0]);
    let cvx = d.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] > 0.0);
    v.push(check(
        "density increasing and convex",
        inc && cvx,
        String::new(),
    ));
    Ok(v)
}

fn suite_divisibility() -> CliResult<Vec<Check>> {
    let mut v = Vec::new();
    for alpha in [0.5, 1.0, 2.0, 3.0] {
        let r = infdiv_check(alpha, 60, 15)?;
        v.push(check(
            "(m_n^α) completely monotone to order 15",
            r.pass,
            format!("α = {alpha}: {}", r.summary()),
        ));
    }
    let b = MomentSequence::new((0..30).map(|n| 1.0 / ((n + 1) as f64).powi(2)).collect())?;
    let r = in_image_of_t(&b, 5, 1e-9)?;
    v.push(check(
        "1/(n+1)² is not in the image of T",
        !r.pass,
        r.summary(),
    ));
    let m = fixed_point_moments(60);
    let r = in_image_of_t(&m, 15, calibrated_tol(61, 15))?;
    v.push(check("m is in the image of T", r.pass, r.summary()));
    let floor = noise_floor(fixed_point_moments(79).values(), 20);
    v.push(check(
        "difference-triangle noise floor < 1e-8",
        floor < 1e-8,
        format!("{floor:e}"),
    ));
    Ok(v)
}

fn cmd_verify(suite: Suite, out: &mut dyn Write) -> CliResult<i32> {
    let suites: Vec<(&str, fn() -> CliResult<Vec<Check>>)> = vec![
        ("asymptotics", suite_asymptotics),
        ("functional", suite_functional),
        ("spectrum", suite_spectrum),
        ("divisibility", suite_divisibility),
    ];
    let mut failed = 0;
    for (name, f) in suites {
        let wanted = matches!(
            (suite, name),
            (Suite::All, _)
                | (Suite::Asymptotics, "asymptotics")
                | (Suite::Functional, "functional")
                | (Suite::Spectrum, "spectrum")
                | (Suite::Divisibility, "divisibility")
        );
        if !wanted {
            continue;
        }
        for c in f()? {
            if !c.pass {
                failed += 1;
            }
            let tag = if c.pass { "PASS" } else { "FAIL" };
            if c.detail.is_empty() {
                writeln!(out, "{tag} [{name}] {}", c.name)?;
            } else {
                writeln!(out, "{tag} [{name}] {}: {}", c.name, c.detail)?;
            }
        }
    }
    writeln!(out, "{failed} failed")?;
    Ok(if failed == 0 { EXIT_OK } else { EXIT_FAIL })
}

fn main() {
    let code = run(
        std::env::args_os(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    std::process::exit(code);
}
