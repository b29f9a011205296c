//! Front end for the `besov-lab` binary: resolves a run configuration,
//! dispatches to the core studies and writes report files.

mod plot;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use besov_core::analysis::{
    bump_norms, run_validation, study_pp, study_qgp, study_qlp, NRule, PpConfig, QgpConfig, QlpConfig, StudyReport,
    ValidationConfig,
};
use besov_core::grid::DEFAULT_GUARD;
use besov_core::smoothness::{Params, ScaleProfile, DEFAULT_K_MIN};
use clap::{Parser, ValueEnum};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] besov_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// All norms of the reference bump
    BumpNorms,
    /// Lorentz-to-seminorm ratio growth for q < p
    StudyQlp,
    /// Multi-block scaling for 1 < p < q
    StudyQgp,
    /// Embedding chain for p = q > 1
    StudyPp,
    /// Oracle sweep over the fast paths
    Validate,
}

impl Command {
    /// The command-line spelling.
    pub fn name(self) -> &'static str {
        match self {
            Command::BumpNorms => "bump-norms",
            Command::StudyQlp => "study-qlp",
            Command::StudyQgp => "study-qgp",
            Command::StudyPp => "study-pp",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "besov-lab", about = "Zero-smoothness Besov and Lorentz norm experiments")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Outer scales N (comma separated)
    #[arg(long = "N", value_delimiter = ',')]
    pub big_n: Option<Vec<u32>>,
    /// Block counts T (comma separated)
    #[arg(long = "T", value_delimiter = ',')]
    pub big_t: Option<Vec<u32>>,
    /// Inner scale rule `factor,offset` for n = factor N + offset
    #[arg(long, value_delimiter = ',')]
    pub n_rule: Option<Vec<u32>>,
    #[arg(long)]
    pub m: Option<i32>,
    #[arg(long)]
    pub guard: Option<i32>,
    #[arg(long, allow_hyphen_values = true)]
    pub kmin: Option<i32>,
    #[arg(long, allow_hyphen_values = true)]
    pub kmax: Option<i32>,
    #[arg(long)]
    pub delta_scale: Option<u32>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write SVG plots
    #[arg(long)]
    pub plots: bool,
}

/// Fully resolved run configuration, embedded in every report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub p: f64,
    pub q: f64,
    pub d: usize,
    pub n_list: Vec<u32>,
    pub t_list: Vec<u32>,
    pub n_rule: NRule,
    pub delta_scale: u32,
    pub m: Option<i32>,
    pub guard: i32,
    pub k_min: Option<i32>,
    pub k_max: Option<i32>,
    #[serde(skip)]
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub plots: bool,
}

impl RunConfig {
    /// Per-command defaults for everything not given.
    pub fn defaults(command: Command) -> Self {
        let (p, q) = match command {
            Command::StudyQlp => (3.0, 1.5),
            Command::StudyQgp => (1.5, 3.0),
            _ => (2.0, 2.0),
        };
        let n_list = match command {
            Command::StudyQlp => vec![4, 6, 8, 10],
            Command::StudyPp => (2..=6).collect(),
            _ => Vec::new(),
        };
        let t_list = if command == Command::StudyQgp {
            vec![1, 2, 3, 4]
        } else {
            Vec::new()
        };
        Self {
            command,
            p,
            q,
            d: 1,
            n_list,
            t_list,
            n_rule: NRule::default(),
            delta_scale: 3,
            m: None,
            guard: DEFAULT_GUARD,
            k_min: None,
            k_max: None,
            out: PathBuf::from("out"),
            seed: None,
            plots: false,
        }
    }

    fn params(&self) -> Result<Params, CliError> {
        Ok(Params::new(self.p, self.q, self.d)?)
    }

    fn require_seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Usage(format!("{} is randomized and needs --seed", self.command.name())))
    }

    /// Parameter-domain check for the chosen command.
    pub fn check(&self) -> Result<(), CliError> {
        let (p, q) = (self.p, self.q);
        let ok = match self.command {
            Command::StudyQlp => q < p,
            Command::StudyQgp => 1.0 < p && p < q,
            Command::StudyPp => p == q && p > 1.0,
            Command::BumpNorms | Command::Validate => true,
        };
        if !ok {
            return Err(CliError::Usage(format!(
                "{} does not accept p={p} q={q} (needs {})",
                self.command.name(),
                match self.command {
                    Command::StudyQlp => "q < p",
                    Command::StudyQgp => "1 < p < q",
                    _ => "p = q > 1",
                }
            )));
        }
        self.params()?;
        Ok(())
    }

    fn reject(&self, flag: &str, given: bool) -> Result<(), CliError> {
        if given {
            Err(CliError::Usage(format!(
                "--{flag} is not used by {}",
                self.command.name()
            )))
        } else {
            Ok(())
        }
    }
}

impl TryFrom<Cli> for RunConfig {
    type Error = CliError;

    fn try_from(cli: Cli) -> Result<Self, CliError> {
        let mut cfg = RunConfig::defaults(cli.command);
        cfg.p = cli.p.unwrap_or(cfg.p);
        cfg.q = cli.q.unwrap_or(cfg.q);
        cfg.d = cli.d.unwrap_or(cfg.d);
        if let Some(n) = cli.big_n {
            cfg.n_list = n;
        }
        if let Some(t) = cli.big_t {
            cfg.t_list = t;
        }
        if let Some(r) = cli.n_rule {
            if r.len() != 2 {
                return Err(CliError::Usage("--n-rule takes `factor,offset`".into()));
            }
            cfg.n_rule = NRule {
                factor: r[0],
                offset: r[1],
            };
        }
        cfg.m = cli.m;
        cfg.guard = cli.guard.unwrap_or(cfg.guard);
        cfg.k_min = cli.kmin;
        cfg.k_max = cli.kmax;
        cfg.delta_scale = cli.delta_scale.unwrap_or(cfg.delta_scale);
        cfg.out = cli.out;
        cfg.seed = cli.seed;
        cfg.plots = cli.plots;
        cfg.check()?;
        Ok(cfg)
    }
}

/// Result of a completed run.
#[derive(Debug)]
pub struct Outcome {
    pub passed: bool,
    pub failed: Vec<String>,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    run: &'a RunConfig,
    report: &'a T,
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        let stale = dir.join("error.json");
        if stale.exists() {
            fs::remove_file(stale)?;
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn json<T: Serialize>(&mut self, run: &RunConfig, report: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(&Envelope { run, report })?;
        text.push('\n');
        fs::write(self.path("report.json"), text)?;
        Ok(())
    }

    fn text(&mut self, name: &str, body: String) -> Result<(), CliError> {
        fs::write(self.path(name), body)?;
        Ok(())
    }

    fn profile(&mut self, id: &str, prof: &ScaleProfile) -> Result<(), CliError> {
        let f = BufWriter::new(File::create(self.path(&format!("profile_{id}.csv")))?);
        prof.write_csv(f)?;
        Ok(())
    }
}

fn write_study(cfg: &RunConfig, report: &StudyReport, w: &mut Writer) -> Result<(), CliError> {
    w.json(cfg, report)?;
    report
        .table
        .write_csv(BufWriter::new(File::create(w.path("study.csv"))?))?;
    if !report.slopes.is_empty() {
        report.write_slopes_csv(BufWriter::new(File::create(w.path("slopes.csv"))?))?;
    }
    for (id, prof) in &report.profiles {
        w.profile(id, prof)?;
    }
    if cfg.plots {
        w.text("study.svg", plot::study_plot(report))?;
        w.text("profiles.svg", plot::profile_plot(&report.profiles))?;
    }
    Ok(())
}

fn failed_verdicts(report: &StudyReport) -> Vec<String> {
    report
        .verdicts
        .iter()
        .filter(|v| !v.passed)
        .map(|v| v.name.clone())
        .collect()
}

/// Executes one command and writes its artifacts under `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.check()?;
    let mut w = Writer::new(&cfg.out)?;
    let params = cfg.params()?;
    let failed = match cfg.command {
        Command::BumpNorms => {
            cfg.reject("kmax", cfg.k_max.is_some())?;
            cfg.reject("kmin", cfg.k_min.is_some())?;
            let m = cfg.m.unwrap_or(6 + cfg.guard);
            let b = bump_norms(&params, m - cfg.guard, cfg.guard)?;
            w.json(cfg, &b)?;
            if let Some(prof) = &b.profile {
                w.profile("bump", prof)?;
                if cfg.plots {
                    w.text("profiles.svg", plot::profile_plot(&[("bump".into(), prof.clone())]))?;
                }
            }
            Vec::new()
        }
        Command::StudyQlp => {
            let mut qc = QlpConfig::new(params, cfg.n_list.clone());
            qc.n_rule = cfg.n_rule;
            qc.guard = cfg.guard;
            qc.m = cfg.m;
            qc.k_min = cfg.k_min.unwrap_or(DEFAULT_K_MIN);
            qc.k_max = cfg.k_max;
            let r = study_qlp(&qc)?;
            write_study(cfg, &r, &mut w)?;
            failed_verdicts(&r)
        }
        Command::StudyQgp => {
            cfg.reject("m", cfg.m.is_some())?;
            cfg.reject("kmax", cfg.k_max.is_some())?;
            let mut qc = QgpConfig::new(params, cfg.t_list.clone(), cfg.delta_scale);
            qc.guard = cfg.guard;
            qc.k_min = cfg.k_min;
            let r = study_qgp(&qc)?;
            write_study(cfg, &r, &mut w)?;
            failed_verdicts(&r)
        }
        Command::StudyPp => {
            cfg.reject("kmax", cfg.k_max.is_some())?;
            let mut pc = PpConfig::new(params, cfg.require_seed()?);
            pc.n_list = cfg.n_list.clone();
            pc.n_rule = cfg.n_rule;
            pc.guard = cfg.guard;
            pc.k_min = cfg.k_min.unwrap_or(DEFAULT_K_MIN);
            if let Some(m) = cfg.m {
                pc.random_m = m;
            }
            let r = study_pp(&pc)?;
            write_study(cfg, &r, &mut w)?;
            failed_verdicts(&r)
        }
        Command::Validate => {
            let r = run_validation(&ValidationConfig::new(cfg.require_seed()?))?;
            w.json(cfg, &r)?;
            r.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect()
        }
    };
    Ok(Outcome {
        passed: failed.is_empty(),
        failed,
        files: w.files,
    })
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    command: Command,
    kind: &'a str,
    message: String,
    failed: &'a [String],
}

fn error_kind(e: &CliError) -> &'static str {
    match e {
        CliError::Usage(_) | CliError::Core(besov_core::Error::InvalidParameters(_)) => "invalid-config",
        CliError::Core(besov_core::Error::BudgetExceeded { .. }) => "budget-exceeded",
        CliError::Core(besov_core::Error::TailTooLarge { .. }) => "tail-too-large",
        CliError::Io(_) | CliError::Json(_) => "io",
        CliError::Core(_) => "computation",
    }
}

/// Runs `cfg`, writing `error.json` next to the reports on failure. Returns
/// the process exit code: 0 when every verdict passes, 1 on a failed
/// verdict, 2 on an error.
pub fn run_and_record(cfg: &RunConfig) -> i32 {
    let (code, record) = match run(cfg) {
        Ok(o) if o.passed => return 0,
        Ok(o) => (
            1,
            serde_json::to_string_pretty(&ErrorRecord {
                command: cfg.command,
                kind: "verdict-failed",
                message: format!("{} verdict(s) failed", o.failed.len()),
                failed: &o.failed,
            }),
        ),
        Err(e) => (
            2,
            serde_json::to_string_pretty(&ErrorRecord {
                command: cfg.command,
                kind: error_kind(&e),
                message: e.to_string(),
                failed: &[],
            }),
        ),
    };
    let record = record.unwrap_or_else(|e| format!("{{\"kind\":\"error\",\"message\":\"{e}\"}}"));
    eprintln!("{record}");
    if fs::create_dir_all(&cfg.out).is_ok() {
        // best effort; the record is already on stderr
        let _ = fs::write(cfg.out.join("error.json"), record + "\n");
    }
    code
}
