use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exemplar::ExemplarScenario;
use crate::gola::GolaConfig;
use crate::vi::ViConfig;

use super::args::{Cli, Command, GolaArgs, TargetArgs};

/// Seed used when neither the file nor the flags give one.
pub const DEFAULT_SEED: u64 = 0;
/// Output directory used when nothing else names one.
pub const DEFAULT_OUT_DIR: &str = "gola-out";
/// Environment variable overriding the configured output directory.
pub const OUT_DIR_ENV: &str = "GOLA_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Fit,
    Refine,
    Eval,
    Robustness,
    Sensitivity,
    Exemplar,
    Generate,
}

impl CommandKind {
    fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_owned()))
            .map_err(|_| Error::Config(format!("unknown command `{s}`")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    /// Built-in target name.
    pub name: Option<String>,
    /// Mixture JSON used as the target.
    pub mixture: Option<PathBuf>,
    pub dim: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub init: Option<PathBuf>,
    pub cold_start: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub p: Option<PathBuf>,
    pub q: Option<PathBuf>,
    pub n: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { p: None, q: None, n: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessConfig {
    pub table: String,
    pub cases: usize,
    pub max_dim: Option<i64>,
    pub jsd_samples: usize,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self { table: "table1".into(), cases: 100, max_dim: None, jsd_samples: 4000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivityConfig {
    pub table: String,
    pub n: usize,
    pub replicates: usize,
    pub level: f64,
    pub max_dim: Option<i64>,
    pub jsd_samples: usize,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self { table: "table1".into(), n: 64, replicates: 200, level: 0.95, max_dim: None, jsd_samples: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PushforwardConfig {
    pub samples: usize,
    /// Time points on `[0, horizon]`.
    pub n_times: usize,
    /// Nodes per axis of the reference grid posterior.
    pub grid_nodes: usize,
    pub jsd_samples: usize,
}

impl Default for PushforwardConfig {
    fn default() -> Self {
        Self { samples: 2000, n_times: 121, grid_nodes: 512, jsd_samples: 4000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    /// Draw the factors from this table when any factor is missing.
    pub table: Option<String>,
    pub d: Option<usize>,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    pub omega: Option<f64>,
    pub c: Option<f64>,
    pub lambda: Option<f64>,
}

/// Contents of a TOML run file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub reference: Option<PathBuf>,
    pub target: TargetConfig,
    pub gola: GolaConfig,
    pub vi: ViConfig,
    pub refine: RefineConfig,
    pub eval: EvalConfig,
    pub robustness: RobustnessConfig,
    pub sensitivity: SensitivityConfig,
    pub exemplar: ExemplarScenario,
    pub pushforward: PushforwardConfig,
    pub generate: GenerateConfig,
}

/// Fully resolved run description; echoed into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub reference: Option<PathBuf>,
    pub target: TargetConfig,
    pub gola: GolaConfig,
    /// Whether `gola.gradient_tol` was set explicitly; scenario defaults
    /// apply otherwise.
    #[serde(skip)]
    pub gradient_tol_explicit: bool,
    pub vi: ViConfig,
    pub refine: RefineConfig,
    pub eval: EvalConfig,
    pub robustness: RobustnessConfig,
    pub sensitivity: SensitivityConfig,
    pub exemplar: ExemplarScenario,
    pub pushforward: PushforwardConfig,
    pub generate: GenerateConfig,
}

/// Parse TOML text, turning unknown-key errors into messages that suggest
/// the closest valid key.
pub fn parse_file_config(text: &str) -> Result<FileConfig> {
    toml::from_str(text).map_err(|e| Error::Config(with_suggestion(&e.to_string())))
}

fn with_suggestion(msg: &str) -> String {
    let Some(start) = msg.find("unknown field `") else {
        return msg.to_owned();
    };
    let rest = &msg[start + "unknown field `".len()..];
    let Some(end) = rest.find('`') else {
        return msg.to_owned();
    };
    let key = &rest[..end];
    let expected: Vec<&str> = rest[end + 1..]
        .split('`')
        .skip(1)
        .step_by(2)
        .collect();
    let best = expected
        .iter()
        .map(|cand| (strsim::damerau_levenshtein(key, cand), *cand))
        .filter(|(dist, cand)| *dist <= 2.max(cand.len() / 3))
        .min();
    match best {
        Some((_, cand)) => format!("{}\nunknown key `{key}`; did you mean `{cand}`?", msg.trim_end()),
        None => msg.to_owned(),
    }
}

/// Raw view of the file used to tell which keys were actually written.
struct Raw(Option<toml::Table>);

impl Raw {
    fn has(&self, path: &str) -> bool {
        let Some(t) = &self.0 else { return false };
        let mut parts = path.split('.');
        let first = parts.next().unwrap_or_default();
        let mut cur = t.get(first);
        for p in parts {
            cur = cur.and_then(|v| v.get(p));
        }
        cur.is_some()
    }
}

struct Merge<'a> {
    raw: &'a Raw,
}

impl Merge<'_> {
    fn set<T: PartialEq + std::fmt::Debug>(&self, slot: &mut T, flag: Option<T>, key: &str) {
        if let Some(v) = flag {
            if self.raw.has(key) && *slot != v {
                log::info!("flag overrides config key `{key}`: {slot:?} -> {v:?}");
            }
            *slot = v;
        }
    }

    fn set_opt<T: PartialEq + std::fmt::Debug>(&self, slot: &mut Option<T>, flag: Option<T>, key: &str) {
        if let Some(v) = flag {
            if self.raw.has(key) && slot.as_ref() != Some(&v) {
                log::info!("flag overrides config key `{key}`: {slot:?} -> {v:?}");
            }
            *slot = Some(v);
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Combine the optional run file with command-line flags. Flags win.
pub fn parse_config(cli: &Cli) -> Result<RunConfig> {
    let (file, raw) = match &cli.config {
        Some(path) => {
            let text = read_text(path)?;
            let file = parse_file_config(&text)
                .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.to_string().trim_start_matches("config error: "))))?;
            let raw = toml::from_str::<toml::Table>(&text).ok();
            (file, Raw(raw))
        }
        None => (FileConfig::default(), Raw(None)),
    };
    resolve(file, &raw, cli)
}

fn resolve(file: FileConfig, raw: &Raw, cli: &Cli) -> Result<RunConfig> {
    let m = Merge { raw };
    let FileConfig {
        command,
        seed,
        out,
        mut workers,
        mut reference,
        mut target,
        mut gola,
        mut vi,
        mut refine,
        mut eval,
        mut robustness,
        mut sensitivity,
        mut exemplar,
        mut pushforward,
        mut generate,
    } = file;

    let mut seed = seed.unwrap_or(DEFAULT_SEED);
    m.set(&mut seed, cli.seed, "seed");
    m.set_opt(&mut workers, cli.workers, "workers");
    m.set_opt(&mut reference, cli.reference.clone(), "reference");
    // clap folds the environment variable into `cli.out`.
    let out = cli.out.clone().or(out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    gola.master_seed = if raw.has("gola.master_seed") { gola.master_seed } else { seed };
    if !raw.has("vi.seed") {
        vi.seed = crate::rng::mix_seed(seed, 0x5649);
    }
    let mut gradient_tol_explicit = raw.has("gola.gradient_tol");

    let file_command = command.as_deref().map(CommandKind::parse).transpose()?;
    let command = match &cli.command {
        None => file_command.ok_or_else(|| Error::Config("no command given on the command line or in the config file".into()))?,
        Some(c) => {
            let kind = merge_command(c, &m, &mut target, &mut gola, &mut gradient_tol_explicit, &mut vi, &mut refine, &mut eval, &mut robustness, &mut sensitivity, &mut exemplar, &mut pushforward, &mut generate);
            if let Some(fc) = file_command {
                if fc != kind {
                    log::info!("command line subcommand {kind:?} overrides config command {fc:?}");
                }
            }
            kind
        }
    };

    let cfg = RunConfig {
        command,
        seed,
        out,
        workers,
        reference,
        target,
        gola,
        gradient_tol_explicit,
        vi,
        refine,
        eval,
        robustness,
        sensitivity,
        exemplar,
        pushforward,
        generate,
    };
    cfg.validate()?;
    Ok(cfg)
}

#[allow(clippy::too_many_arguments)]
fn merge_command(
    c: &Command,
    m: &Merge<'_>,
    target: &mut TargetConfig,
    gola: &mut GolaConfig,
    gradient_tol_explicit: &mut bool,
    vi: &mut ViConfig,
    refine: &mut RefineConfig,
    eval: &mut EvalConfig,
    robustness: &mut RobustnessConfig,
    sensitivity: &mut SensitivityConfig,
    exemplar: &mut ExemplarScenario,
    pushforward: &mut PushforwardConfig,
    generate: &mut GenerateConfig,
) -> CommandKind {
    let merge_target = |t: &TargetArgs, target: &mut TargetConfig| {
        if t.target.is_some() && target.mixture.is_some() {
            log::info!("flag --target replaces config key `target.mixture`");
            target.mixture = None;
        }
        if t.mixture.is_some() && target.name.is_some() {
            log::info!("flag --mixture replaces config key `target.name`");
            target.name = None;
        }
        m.set_opt(&mut target.name, t.target.clone(), "target.name");
        m.set_opt(&mut target.mixture, t.mixture.clone(), "target.mixture");
        m.set_opt(&mut target.dim, t.dim, "target.dim");
        m.set(&mut target.seed, t.target_seed, "target.seed");
    };
    let merge_gola = |g: &GolaArgs, gola: &mut GolaConfig, explicit: &mut bool| {
        m.set_opt(&mut gola.n_starts, g.n_starts, "gola.n_starts");
        m.set(&mut gola.dedup_threshold, g.dedup_threshold, "gola.dedup_threshold");
        m.set_opt(&mut gola.n_weight_samples, g.weight_samples, "gola.n_weight_samples");
        m.set(&mut gola.gradient_tol, g.gradient_tol, "gola.gradient_tol");
        *explicit |= g.gradient_tol.is_some();
    };
    match c {
        Command::Fit { target: t, gola: g } => {
            merge_target(t, target);
            merge_gola(g, gola, gradient_tol_explicit);
            CommandKind::Fit
        }
        Command::Refine { target: t, gola: g, init, cold_start, epochs, step_size, mc_samples } => {
            merge_target(t, target);
            merge_gola(g, gola, gradient_tol_explicit);
            if init.is_some() && refine.cold_start.is_some() {
                log::info!("flag --init replaces config key `refine.cold_start`");
                refine.cold_start = None;
            }
            if cold_start.is_some() && refine.init.is_some() {
                log::info!("flag --cold-start replaces config key `refine.init`");
                refine.init = None;
            }
            m.set_opt(&mut refine.init, init.clone(), "refine.init");
            m.set_opt(&mut refine.cold_start, *cold_start, "refine.cold_start");
            m.set(&mut vi.max_epochs, *epochs, "vi.max_epochs");
            m.set(&mut vi.step_size, *step_size, "vi.step_size");
            m.set(&mut vi.n_mc_samples, *mc_samples, "vi.n_mc_samples");
            CommandKind::Refine
        }
        Command::Eval { p, q, n } => {
            m.set_opt(&mut eval.p, Some(p.clone()), "eval.p");
            m.set_opt(&mut eval.q, Some(q.clone()), "eval.q");
            m.set(&mut eval.n, *n, "eval.n");
            CommandKind::Eval
        }
        Command::Robustness { table, cases, max_dim, jsd_samples } => {
            m.set(&mut robustness.table, table.clone(), "robustness.table");
            m.set(&mut robustness.cases, *cases, "robustness.cases");
            m.set_opt(&mut robustness.max_dim, *max_dim, "robustness.max_dim");
            m.set(&mut robustness.jsd_samples, *jsd_samples, "robustness.jsd_samples");
            CommandKind::Robustness
        }
        Command::Sensitivity { table, n, replicates, jsd_samples } => {
            m.set(&mut sensitivity.table, table.clone(), "sensitivity.table");
            m.set(&mut sensitivity.n, *n, "sensitivity.n");
            m.set(&mut sensitivity.replicates, *replicates, "sensitivity.replicates");
            m.set(&mut sensitivity.jsd_samples, *jsd_samples, "sensitivity.jsd_samples");
            CommandKind::Sensitivity
        }
        Command::Exemplar { sigma, n_obs, data_seed, pushforward_samples } => {
            m.set(&mut exemplar.sigma, *sigma, "exemplar.sigma");
            m.set(&mut exemplar.n_obs, *n_obs, "exemplar.n_obs");
            m.set(&mut exemplar.data_seed, *data_seed, "exemplar.data_seed");
            m.set(&mut pushforward.samples, *pushforward_samples, "pushforward.samples");
            CommandKind::Exemplar
        }
        Command::Generate { table, d, m: mm, omega, c, lambda } => {
            m.set_opt(&mut generate.table, table.clone(), "generate.table");
            m.set_opt(&mut generate.d, *d, "generate.d");
            m.set_opt(&mut generate.m, *mm, "generate.M");
            m.set_opt(&mut generate.omega, *omega, "generate.omega");
            m.set_opt(&mut generate.c, *c, "generate.c");
            m.set_opt(&mut generate.lambda, *lambda, "generate.lambda");
            CommandKind::Generate
        }
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} `{}` does not exist", path.display())))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if let Some(r) = &self.reference {
            if r.as_os_str() != "target" {
                require_file(r, "reference mixture")?;
            }
        }
        self.gola.validate().map_err(cfg_err)?;
        match self.command {
            CommandKind::Fit | CommandKind::Refine => {
                match (&self.target.name, &self.target.mixture) {
                    (Some(_), Some(_)) => return Err(Error::Config("give either target.name or target.mixture, not both".into())),
                    (None, None) => return Err(Error::Config("no target: set target.name or target.mixture".into())),
                    (Some(name), None) => {
                        if !super::targets::BUILTINS.contains(&name.as_str()) {
                            return Err(Error::Config(format!(
                                "unknown built-in target `{name}`; expected one of {}",
                                super::targets::BUILTINS.join(", ")
                            )));
                        }
                    }
                    (None, Some(p)) => require_file(p, "target mixture")?,
                }
                if self.command == CommandKind::Refine {
                    self.vi.validate().map_err(cfg_err)?;
                    if self.refine.init.is_some() && self.refine.cold_start.is_some() {
                        return Err(Error::Config("give either refine.init or refine.cold_start, not both".into()));
                    }
                    if let Some(p) = &self.refine.init {
                        require_file(p, "initial mixture")?;
                    }
                    if self.refine.cold_start == Some(0) {
                        return Err(Error::Config("refine.cold_start must be at least 1".into()));
                    }
                }
            }
            CommandKind::Eval => {
                for (p, what) in [(&self.eval.p, "eval.p"), (&self.eval.q, "eval.q")] {
                    match p {
                        Some(p) => require_file(p, what)?,
                        None => return Err(Error::Config(format!("missing {what}"))),
                    }
                }
                if self.eval.n == 0 {
                    return Err(Error::Config("eval.n must be positive".into()));
                }
            }
            CommandKind::Robustness => {
                crate::sensibench::FactorSpec::by_name(&self.robustness.table).map_err(cfg_err)?;
                if self.robustness.cases == 0 || self.robustness.jsd_samples == 0 {
                    return Err(Error::Config("robustness.cases and robustness.jsd_samples must be positive".into()));
                }
            }
            CommandKind::Sensitivity => {
                crate::sensibench::FactorSpec::by_name(&self.sensitivity.table).map_err(cfg_err)?;
                let s = &self.sensitivity;
                if s.n == 0 || s.jsd_samples == 0 {
                    return Err(Error::Config("sensitivity.n and sensitivity.jsd_samples must be positive".into()));
                }
                if s.replicates < 100 {
                    return Err(Error::Config("sensitivity.replicates must be at least 100".into()));
                }
                if !(s.level > 0.0 && s.level < 1.0) {
                    return Err(Error::Config("sensitivity.level must lie in (0, 1)".into()));
                }
            }
            CommandKind::Exemplar => {
                self.exemplar.frame().map_err(cfg_err)?;
                self.exemplar.search_box().map_err(cfg_err)?;
                if !(self.exemplar.sigma > 0.0) || self.exemplar.n_obs == 0 {
                    return Err(Error::Config("exemplar.sigma and exemplar.n_obs must be positive".into()));
                }
                let p = &self.pushforward;
                if p.samples < 100 || p.n_times < 2 || p.grid_nodes < 3 || p.jsd_samples == 0 {
                    return Err(Error::Config(
                        "pushforward needs samples >= 100, n_times >= 2, grid_nodes >= 3, jsd_samples > 0".into(),
                    ));
                }
            }
            CommandKind::Generate => {
                if let Some(t) = &self.generate.table {
                    crate::sensibench::FactorSpec::by_name(t).map_err(cfg_err)?;
                }
            }
        }
        Ok(())
    }
}
