//! Command-line front end: run configuration, structured reports, and
//! critical-value cache management.
//!
//! Exit codes: 0 on success, 2 on validation errors (bad flags, malformed
//! input files, infeasible configurations), 1 on computation errors.

use clap::{Args, Parser, Subcommand, ValueEnum};
use pilate_core::compliers::{
    classify_all, exclusion_test, ComplierStatus, NonComplierSubset, Transform, WindowSide,
    WindowSpec,
};
use pilate_core::cv::{CvMeta, CvTable, DEFAULT_BOUNDARY_GRID};
use pilate_core::data::{load_csv, CsvSchema, Dataset, Partition};
use pilate_core::error::Error;
use pilate_core::estimate::{beta_on_subsample, shat_fgls, shat_ols, EstimateConfig};
use pilate_core::fstar::{fstar_decision, fstar_search, SearchConfig};
use pilate_core::heterosked::{iv_reformulation, rigobon_estimand, EventStudyFrame};
use pilate_core::linalg::HacConfig;
use pilate_core::montecarlo::{bias_mse_beta, size_power_f, size_power_robust, DgpSpec};
use pilate_core::robust::{robust_test, RobustConfig, RobustMode};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "pilate", version, about = "Dynamic treatment-effect identification toolkit")]
struct Cli {
    /// worker threads (0 = all cores); results do not depend on this
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[arg(long, global = true, value_enum, default_value_t = ReportFormat::Text)]
    report: ReportFormat,

    /// critical-value cache path (also via PILATE_CV_CACHE)
    #[arg(long, global = true)]
    cv_cache: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// input CSV with a header row
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "y")]
    outcome: String,
    #[arg(long, default_value = "d")]
    endogenous: String,
    /// comma separated exogenous column names
    #[arg(long, value_delimiter = ',')]
    exogenous: Vec<String>,
    /// comma separated instrument column names
    #[arg(long, value_delimiter = ',', default_value = "z")]
    instruments: Vec<String>,
    /// 0/1 policy indicator column
    #[arg(long)]
    policy: Option<String>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset, Error> {
        let schema = CsvSchema {
            outcome: self.outcome.clone(),
            endogenous: self.endogenous.clone(),
            exogenous: self.exogenous.clone(),
            instruments: self.instruments.clone(),
            policy: self.policy.clone(),
        };
        load_csv(&self.data, &schema)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Identification-failure test: supremum of the subsample first-stage F
    Fstar {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.6)]
        pi_l: f64,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long, default_value_t = 5)]
        m_plus: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// force exhaustive enumeration (errors when the class is too large)
        #[arg(long)]
        exact_only: bool,
        /// simulate missing critical values instead of failing on a cache miss
        #[arg(long)]
        simulate_cv: bool,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Simulate null critical values and print or cache the table
    Cv {
        #[arg(long, default_value_t = 1)]
        q: usize,
        #[arg(long, default_value_t = 0.6)]
        pi_l: f64,
        #[arg(long, default_value_t = 5)]
        m_plus: usize,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        /// path grid of the simulated increment paths
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// partition-boundary grid
        #[arg(long, default_value_t = DEFAULT_BOUNDARY_GRID)]
        boundary_grid: usize,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// significance levels
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.10, 0.05, 0.01])]
        levels: Vec<f64>,
        /// write/update the cache file with the simulated cells
        #[arg(long)]
        cache: bool,
    },
    /// Estimate the most strongly-identified subsample and beta on it
    Estimate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.8)]
        pi0: f64,
        #[arg(long, default_value_t = 2)]
        m0: usize,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = Method::Ols)]
        method: Method,
    },
    /// Identification-robust AR/LM/CLR tests of beta = beta0
    Robust {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.0)]
        beta0: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = Mode::Estimated)]
        mode: Mode,
        /// known subsample as 1-based half-open segments, e.g. "1:51,131:201"
        #[arg(long)]
        subsample: Option<String>,
        #[arg(long, default_value_t = 0.6)]
        pi_l: f64,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long, default_value_t = 5)]
        m_plus: usize,
    },
    /// Classify compliers date by date from rolling windows
    Compliers {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 101)]
        n0: usize,
        #[arg(long, default_value_t = 15)]
        n1: usize,
        #[arg(long, value_enum, default_value_t = Sided::Two)]
        sided: Sided,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = TransformArg::Square)]
        transform: TransformArg,
        /// account for policy-window sampling noise as well
        #[arg(long)]
        welch: bool,
        /// write the per-date CSV here (stdout summary either way)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exclusion-restriction test on non-complier outcomes
    Exclusion {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = SubsetArg::All)]
        subset: SubsetArg,
        #[arg(long, default_value_t = 101)]
        n0: usize,
        #[arg(long, default_value_t = 15)]
        n1: usize,
        #[arg(long, value_enum, default_value_t = Sided::Two)]
        sided: Sided,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = TransformArg::Square)]
        transform: TransformArg,
        /// compare outcome levels or the demeaned product series
        #[arg(long, value_enum, default_value_t = OutcomeArg::Product)]
        outcome_series: OutcomeArg,
        #[arg(long, default_value_t = 5)]
        min_per_side: usize,
    },
    /// Covariance-difference (heteroskedasticity-based) estimand
    Rigobon {
        #[command(flatten)]
        data: DataArgs,
        /// "full" or 1-based half-open segments, e.g. "1:51,131:201"
        #[arg(long, default_value = "full")]
        subsample: String,
    },
    /// Simulation suites reproducing the size/power/bias tables
    Mc {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = 5000)]
        reps: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        t_len: usize,
        #[arg(long, default_value_t = 0.6)]
        pi0: f64,
        #[arg(long, default_value_t = 0.25)]
        rho: f64,
        /// first-stage strength d (theta = d / sqrt(T)) for the alternative
        #[arg(long, default_value_t = 16.0)]
        d: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Ols,
    Fgls,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Full,
    Known,
    Estimated,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Sided {
    One,
    Two,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TransformArg {
    Level,
    Square,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SubsetArg {
    All,
    AboveMean,
    BelowMean,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutcomeArg {
    Level,
    Product,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    FstarSize,
    BetaMse,
    RobustSize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: thread pool: {}", e);
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            match e {
                Error::Ingestion(_) | Error::Config(_) | Error::Infeasible(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn cache_path(cli: &Cli) -> Option<PathBuf> {
    cli.cv_cache.clone().or_else(|| std::env::var_os("PILATE_CV_CACHE").map(PathBuf::from))
}

fn parse_segments(text: &str, t_len: usize) -> Result<Partition, Error> {
    let mut segs = Vec::new();
    for part in text.split(',') {
        let (a, b) = part
            .split_once(':')
            .ok_or_else(|| Error::config(format!("segment '{}' is not start:end", part)))?;
        let a: usize = a.trim().parse().map_err(|_| Error::config("bad segment start"))?;
        let b: usize = b.trim().parse().map_err(|_| Error::config("bad segment end"))?;
        segs.push((a, b));
    }
    Partition::new(segs, t_len)
}

fn emit(cli: &Cli, text: String, payload: serde_json::Value) {
    match cli.report {
        ReportFormat::Text => println!("{}", text),
        ReportFormat::Json => {
            let mut obj = payload;
            obj["schema_version"] = json!(SCHEMA_VERSION);
            println!("{}", serde_json::to_string_pretty(&obj).expect("serializable report"));
        }
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Fstar { data, pi_l, eps, m_plus, alpha, exact_only, simulate_cv, seed } => {
            let ds = data.load()?;
            let cfg = SearchConfig {
                pi_l: *pi_l,
                eps: *eps,
                m_plus: *m_plus,
                enumeration_cap: if *exact_only {
                    u128::MAX
                } else {
                    SearchConfig::default().enumeration_cap
                },
                seed: *seed,
                ..Default::default()
            };
            if *exact_only {
                let count = pilate_core::data::count_partitions(ds.t_len(), *eps, *pi_l, *m_plus)?;
                if count > 5_000_000 {
                    return Err(Error::config(format!(
                        "exact enumeration of {} partitions is not practical",
                        count
                    )));
                }
            }
            let result = fstar_search(&ds, &cfg)?;
            let q = ds.q();
            let path = cache_path(cli);
            let mut table = match &path {
                Some(p) if p.exists() => CvTable::load(p)?,
                _ => CvTable::new(CvMeta {
                    path_grid: 1000,
                    boundary_grid: DEFAULT_BOUNDARY_GRID,
                    reps: 10_000,
                    seed: *seed,
                }),
            };
            if table.lookup(q, *pi_l, *m_plus, *eps, *alpha).is_none() {
                if !*simulate_cv {
                    return Err(Error::config(
                        "critical value not in the cache; pass --simulate-cv or run `pilate cv`"
                            .to_string(),
                    ));
                }
                table.simulate_cell(q, *pi_l, *m_plus, *eps, &[*alpha])?;
                if let Some(p) = &path {
                    table.save(p)?;
                }
            }
            let report = fstar_decision(&result, q, *pi_l, *m_plus, *eps, *alpha, &table)?;
            let segments: Vec<(usize, usize)> = result.argmax_partition.segments().to_vec();
            let text = format!(
                "F* = {:.4}  cv({}) = {:.4}  -> {}\nargmax subsample: {} (pi = {:.3})",
                report.statistic,
                alpha,
                report.critical_value,
                if report.reject { "reject identification failure" } else { "fail to reject" },
                result.argmax_partition,
                result.argmax_partition.pi()
            );
            emit(
                cli,
                text,
                json!({
                    "command": "fstar",
                    "value": report.statistic,
                    "critical_value": report.critical_value,
                    "alpha": alpha,
                    "reject": report.reject,
                    "segments": segments,
                    "covered_fraction": result.argmax_partition.pi(),
                }),
            );
            Ok(())
        }
        Command::Cv { q, pi_l, m_plus, eps, n, boundary_grid, reps, seed, levels, cache } => {
            let mut table = {
                let path = cache_path(cli);
                match &path {
                    Some(p) if p.exists() && *cache => CvTable::load(p)?,
                    _ => CvTable::new(CvMeta {
                        path_grid: *n,
                        boundary_grid: *boundary_grid,
                        reps: *reps,
                        seed: *seed,
                    }),
                }
            };
            table.meta =
                CvMeta { path_grid: *n, boundary_grid: *boundary_grid, reps: *reps, seed: *seed };
            table.simulate_cell(*q, *pi_l, *m_plus, *eps, levels)?;
            if *cache {
                if let Some(p) = cache_path(cli) {
                    table.save(&p)?;
                } else {
                    return Err(Error::config(
                        "--cache requires --cv-cache or PILATE_CV_CACHE".to_string(),
                    ));
                }
            }
            let rows: Vec<serde_json::Value> = levels
                .iter()
                .map(|a| {
                    json!({
                        "q": q, "pi_l": pi_l, "m_plus": m_plus, "eps": eps, "alpha": a,
                        "cv": table.lookup(*q, *pi_l, *m_plus, *eps, *a),
                    })
                })
                .collect();
            emit(cli, table.render_text(), json!({ "command": "cv", "entries": rows }));
            Ok(())
        }
        Command::Estimate { data, pi0, m0, eps, method } => {
            let ds = data.load()?;
            let cfg = EstimateConfig { pi0: *pi0, m0: *m0, eps: *eps, ..Default::default() };
            let res = match method {
                Method::Ols => shat_ols(&ds, &cfg)?,
                Method::Fgls => shat_fgls(&ds, &cfg, None)?,
            };
            let (beta, se) = beta_on_subsample(&ds, &res.partition, &HacConfig::default())?;
            let text = format!(
                "subsample: {}\nbeta = {:.6} (se {:.6})\ncriterion = {:.6}{}",
                res.partition,
                beta,
                se,
                res.criterion_value,
                if res.warnings.is_empty() {
                    String::new()
                } else {
                    format!("\nwarnings: {}", res.warnings.join("; "))
                }
            );
            emit(
                cli,
                text,
                json!({
                    "command": "estimate",
                    "method": match method { Method::Ols => "ols", Method::Fgls => "fgls" },
                    "segments": res.partition.segments(),
                    "beta": beta,
                    "se": se,
                    "criterion": res.criterion_value,
                    "warnings": res.warnings,
                }),
            );
            Ok(())
        }
        Command::Robust { data, beta0, alpha, mode, subsample, pi_l, eps, m_plus } => {
            let ds = data.load()?;
            let mut rcfg = RobustConfig { alpha: *alpha, ..Default::default() };
            rcfg.search.pi_l = *pi_l;
            rcfg.search.eps = *eps;
            rcfg.search.m_plus = *m_plus;
            let mode = match mode {
                Mode::Full => RobustMode::Full,
                Mode::Estimated => RobustMode::Estimated,
                Mode::Known => {
                    let text = subsample.as_ref().ok_or_else(|| {
                        Error::config("--mode known requires --subsample".to_string())
                    })?;
                    RobustMode::Known(parse_segments(text, ds.t_len())?)
                }
            };
            let rep = robust_test(&ds, *beta0, mode, &rcfg)?;
            let text = format!(
                "H0: beta = {}\nAR = {:.4} ({})\nLM = {} ({})\nCLR = {:.4} vs kappa = {:.4} ({})\nsubsample: {} (pi = {:.3})",
                beta0,
                rep.ar,
                if rep.ar_reject { "reject" } else { "keep" },
                rep.lm.map(|v| format!("{:.4}", v)).unwrap_or_else(|| "undefined".into()),
                rep.lm_reject.map(|r| if r { "reject" } else { "keep" }).unwrap_or("n/a"),
                rep.lr,
                rep.kappa_alpha,
                if rep.clr_reject { "reject" } else { "keep" },
                rep.partition,
                rep.partition.pi()
            );
            emit(
                cli,
                text,
                json!({
                    "command": "robust",
                    "beta0": beta0,
                    "alpha": alpha,
                    "ar": rep.ar,
                    "lm": rep.lm,
                    "lr": rep.lr,
                    "kappa_alpha": rep.kappa_alpha,
                    "ar_reject": rep.ar_reject,
                    "lm_reject": rep.lm_reject,
                    "clr_reject": rep.clr_reject,
                    "segments": rep.partition.segments(),
                    "diagnostics": rep.diagnostics,
                }),
            );
            Ok(())
        }
        Command::Compliers { data, n0, n1, sided, alpha, transform, welch, out } => {
            let ds = data.load()?;
            let spec = WindowSpec {
                n0: *n0,
                n1: *n1,
                sided: match sided {
                    Sided::One => WindowSide::OneSidedLeft,
                    Sided::Two => WindowSide::TwoSided,
                },
                welch: *welch,
            };
            let tf = match transform {
                TransformArg::Level => Transform::Level,
                TransformArg::Square => Transform::Square,
            };
            let report = classify_all(&ds, &spec, tf, *alpha)?;
            if let Some(path) = out {
                std::fs::write(path, report.render_csv())?;
            }
            let n_c = report.dates.iter().filter(|d| d.status == ComplierStatus::Complier).count();
            let n_nc = report.non_compliers().len();
            let n_und = report.dates.len() - n_c - n_nc;
            let text = format!(
                "dates: {} (compliers {}, non-compliers {}, undetermined {})\ncomplier share among determined: {:.4}",
                report.dates.len(),
                n_c,
                n_nc,
                n_und,
                report.complier_share()
            );
            emit(
                cli,
                text,
                json!({
                    "command": "compliers",
                    "alpha": alpha,
                    "n_complier": n_c,
                    "n_non_complier": n_nc,
                    "n_undetermined": n_und,
                    "complier_share": report.complier_share(),
                }),
            );
            Ok(())
        }
        Command::Exclusion {
            data,
            subset,
            n0,
            n1,
            sided,
            alpha,
            transform,
            outcome_series,
            min_per_side,
        } => {
            let ds = data.load()?;
            let spec = WindowSpec {
                n0: *n0,
                n1: *n1,
                sided: match sided {
                    Sided::One => WindowSide::OneSidedLeft,
                    Sided::Two => WindowSide::TwoSided,
                },
                welch: false,
            };
            let tf = match transform {
                TransformArg::Level => Transform::Level,
                TransformArg::Square => Transform::Square,
            };
            let report = classify_all(&ds, &spec, tf, *alpha)?;
            let outcomes: Vec<f64> = match outcome_series {
                OutcomeArg::Level => ds.y.to_vec(),
                OutcomeArg::Product => {
                    let frame = EventStudyFrame::from_dataset(&ds)?;
                    frame.y_star.to_vec()
                }
            };
            let sub = match subset {
                SubsetArg::All => NonComplierSubset::All,
                SubsetArg::AboveMean => NonComplierSubset::AboveMean,
                SubsetArg::BelowMean => NonComplierSubset::BelowMean,
            };
            let t = exclusion_test(&ds, &report, &outcomes, sub, *alpha, *min_per_side)?;
            let text = format!(
                "t_exclusion = {:.4} vs |z|({}) = {:.4} -> {}",
                t.statistic,
                alpha,
                t.critical_value,
                if t.reject { "reject the exclusion restriction" } else { "fail to reject" }
            );
            emit(
                cli,
                text,
                json!({
                    "command": "exclusion",
                    "statistic": t.statistic,
                    "critical_value": t.critical_value,
                    "alpha": alpha,
                    "reject": t.reject,
                    "diagnostics": t.diagnostics,
                }),
            );
            Ok(())
        }
        Command::Rigobon { data, subsample } => {
            let ds = data.load()?;
            let frame = EventStudyFrame::from_dataset(&ds)?;
            let part =
                if subsample == "full" { None } else { Some(parse_segments(subsample, ds.t_len())?) };
            let (beta, diag) = rigobon_estimand(&frame, part.as_ref())?;
            let iv = iv_reformulation(&frame, part.as_ref(), &HacConfig::default())?;
            let text = format!(
                "covariance-difference beta = {:.6}\n  denominator = {:.6} (var_P {:.6}, var_C {:.6})\nIV reformulation beta = {:.6} (se {:.6})",
                beta, diag.denominator, diag.var_policy, diag.var_control, iv.beta, iv.se
            );
            emit(
                cli,
                text,
                json!({
                    "command": "rigobon",
                    "beta": beta,
                    "diagnostics": diag,
                    "iv_beta": iv.beta,
                    "iv_se": iv.se,
                }),
            );
            Ok(())
        }
        Command::Mc { suite, reps, seed, t_len, pi0, rho, d, out } => {
            let report = match suite {
                Suite::FstarSize => {
                    let mut spec = DgpSpec::linear_three_regime(*t_len, *pi0, *seed);
                    spec.rho = *rho;
                    spec.rho_e = *rho;
                    spec.rho_u = *rho;
                    let mut alt = spec.with_outer_strength(*d);
                    alt.theta2 = -0.5;
                    let search = SearchConfig::default();
                    let mut table = CvTable::new(CvMeta {
                        path_grid: 1000,
                        boundary_grid: DEFAULT_BOUNDARY_GRID,
                        reps: 10_000,
                        seed: *seed,
                    });
                    table.simulate_cell(1, 1.0, 1, search.eps, &[0.05])?;
                    table.simulate_cell(1, search.pi_l, search.m_plus, search.eps, &[0.05])?;
                    let cv_full = table.lookup(1, 1.0, 1, search.eps, 0.05).unwrap();
                    let cv_star =
                        table.lookup(1, search.pi_l, search.m_plus, search.eps, 0.05).unwrap();
                    size_power_f(
                        &spec,
                        &[(format!("d={} theta2=-0.5", d), alt)],
                        *reps,
                        &search,
                        cv_full,
                        cv_star,
                        0.05,
                    )?
                }
                Suite::BetaMse => {
                    let mut spec =
                        DgpSpec::linear_three_regime(*t_len, *pi0, *seed).with_outer_strength(*d);
                    spec.rho = *rho;
                    spec.x_random = true;
                    let est = EstimateConfig { pi0: *pi0, m0: 2, ..Default::default() };
                    bias_mse_beta(&spec, *reps, &est)?
                }
                Suite::RobustSize => {
                    let mut spec =
                        DgpSpec::linear_three_regime(*t_len, *pi0, *seed).with_outer_strength(*d);
                    spec.rho = *rho;
                    spec.beta = 0.0;
                    spec.gamma1 = 0.0;
                    spec.gamma2 = 0.0;
                    size_power_robust(&spec, 0.0, *reps, &RobustConfig::default())?
                }
            };
            let payload = serde_json::to_value(&report)
                .map_err(|e| Error::config(format!("serialize report: {}", e)))?;
            let mut obj = payload;
            obj["schema_version"] = json!(SCHEMA_VERSION);
            let json_text = serde_json::to_string_pretty(&obj).expect("serializable report");
            if let Some(path) = out {
                std::fs::write(path, &json_text)?;
            }
            match cli.report {
                ReportFormat::Text => println!("{}", report.render_text()),
                ReportFormat::Json => println!("{}", json_text),
            }
            Ok(())
        }
    }
}
