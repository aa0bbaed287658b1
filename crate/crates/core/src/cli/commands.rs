use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::density::{MixtureModel, SampleableDensity};
use crate::error::{Error, Result};
use crate::exemplar::{grid_mode_census, pushforward};
use crate::gola::{run_gola, GolaConfig};
use crate::metrics::{jsd_normalized, GridDensity2d};
use crate::rng::{mix_seed, seeded};
use crate::sensibench::{
    bootstrap_ci, generate_test_gmm, robustness_study, score_case, sobol_design, FactorDist, FactorSpec, GmmFactors,
};
use crate::vi::{random_cold_start, refine};

use super::config::{CommandKind, RunConfig};
use super::targets::{read_mixture, resolve_target};

/// Files written by a run, relative to the output directory.
pub struct Artifacts {
    dir: PathBuf,
    pub written: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self { dir: dir.to_owned(), written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.written.push(name.to_owned());
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, &s)
    }
}

/// Run the configured pipeline; returns the value printed to stdout, if any.
pub fn execute(cfg: &RunConfig, art: &mut Artifacts) -> Result<Option<String>> {
    match cfg.command {
        CommandKind::Fit => fit(cfg, art).map(|_| None),
        CommandKind::Refine => refine_cmd(cfg, art).map(|_| None),
        CommandKind::Eval => eval(cfg, art).map(Some),
        CommandKind::Robustness => robustness(cfg, art).map(|_| None),
        CommandKind::Sensitivity => sensitivity(cfg, art).map(|_| None),
        CommandKind::Exemplar => exemplar(cfg, art).map(|_| None),
        CommandKind::Generate => generate(cfg, art).map(|_| None),
    }
}

fn reference_density(
    cfg: &RunConfig,
    own: Option<&std::sync::Arc<dyn SampleableDensity>>,
) -> Result<Option<std::sync::Arc<dyn SampleableDensity>>> {
    match &cfg.reference {
        None => Ok(None),
        Some(p) if p.as_os_str() == "target" => own
            .cloned()
            .map(Some)
            .ok_or_else(|| Error::Config("this target has no normalized form to use as reference".into())),
        Some(p) => Ok(Some(std::sync::Arc::new(read_mixture(p)?))),
    }
}

fn write_mixture(art: &mut Artifacts, name: &str, m: &MixtureModel) -> Result<()> {
    art.write(name, &format!("{}\n", m.to_json()))
}

fn fit(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let t = resolve_target(&cfg.target, &cfg.exemplar)?;
    let report = run_gola(&t.target, &gola_config(cfg))?;
    log::info!(
        "fit: {} components, log evidence {:.6}",
        report.mixture.n_components(),
        report.log_evidence
    );
    write_mixture(art, "mixture.json", &report.mixture)?;
    art.write("report.json", &format!("{}\n", report.to_json()))
}

fn gola_config(cfg: &RunConfig) -> GolaConfig {
    let is_exemplar = cfg.command == CommandKind::Exemplar || cfg.target.name.as_deref() == Some("exemplar");
    if is_exemplar && !cfg.gradient_tol_explicit {
        GolaConfig { gradient_tol: cfg.exemplar.gola_config().gradient_tol, ..cfg.gola.clone() }
    } else {
        cfg.gola.clone()
    }
}

fn refine_cmd(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let t = resolve_target(&cfg.target, &cfg.exemplar)?;
    let reference = reference_density(cfg, t.normalized.as_ref())?;
    let init = if let Some(p) = &cfg.refine.init {
        read_mixture(p)?
    } else if let Some(k) = cfg.refine.cold_start {
        random_cold_start(t.target.dim(), k, t.target.search_box(), mix_seed(cfg.seed, 0x434f_4c44))?
    } else {
        let report = run_gola(&t.target, &gola_config(cfg))?;
        art.write("report.json", &format!("{}\n", report.to_json()))?;
        report.mixture
    };
    write_mixture(art, "init_mixture.json", &init)?;
    let (mixture, trace) = refine(&init, &t.target, &cfg.vi, reference.as_deref())?;
    for r in &trace.records {
        log::info!("epoch {} neg_elbo {:.6} jsd {:?}", r.epoch, r.neg_elbo, r.jsd);
    }
    write_mixture(art, "mixture.json", &mixture)?;
    art.write("trace.csv", &trace.to_csv())?;
    art.write_json(
        "refine.json",
        &json!({
            "diverged": trace.diverged,
            "best_epoch": trace.best_epoch,
            "support_violations": trace.support_violations,
            "epochs": trace.records.len().saturating_sub(1),
        }),
    )
}

fn eval(cfg: &RunConfig, art: &mut Artifacts) -> Result<String> {
    let (Some(p), Some(q)) = (&cfg.eval.p, &cfg.eval.q) else {
        return Err(Error::Config("eval needs two mixture files".into()));
    };
    let (p, q) = (read_mixture(p)?, read_mixture(q)?);
    crate::error::check_dim(p.dim(), q.dim())?;
    let est = jsd_normalized(&p, &q, cfg.eval.n, cfg.seed)?;
    let out = json!({ "jsd": est.value, "std_error": est.std_error, "n": cfg.eval.n });
    art.write_json("eval.json", &out)?;
    Ok(serde_json::to_string(&out)?)
}

fn factor_spec(table: &str, max_dim: Option<i64>) -> Result<FactorSpec> {
    let spec = FactorSpec::by_name(table)?;
    match max_dim {
        None => Ok(spec),
        Some(cap) => {
            let d = spec.factors.iter().find(|f| f.name == "d").map(|f| f.dist);
            match d {
                Some(FactorDist::Discrete { lo, hi }) => {
                    if cap < lo {
                        return Err(Error::Config(format!("max_dim {cap} is below the smallest dimension {lo}")));
                    }
                    spec.with_factor("d", FactorDist::Discrete { lo, hi: hi.min(cap) })
                }
                _ => Ok(spec),
            }
        }
    }
}

fn robustness(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let r = &cfg.robustness;
    let spec = factor_spec(&r.table, r.max_dim)?;
    let study = robustness_study(&spec, r.cases, &cfg.gola, r.jsd_samples, cfg.seed)?;
    log::info!("robustness: {:.3} of cases within threshold, mean Y {:.4}", study.fraction_within, study.mean_y);
    art.write("robustness.csv", &study.to_csv())?;
    art.write_json(
        "robustness.json",
        &json!({
            "table": r.table,
            "cases": study.cases.len(),
            "threshold": study.threshold,
            "fraction_within": study.fraction_within,
            "mean_y": study.mean_y,
        }),
    )
}

fn point_seed(seed: u64, x: &[f64]) -> u64 {
    x.iter().fold(seed, |s, v| mix_seed(s, v.to_bits()))
}

fn sensitivity(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let s = &cfg.sensitivity;
    let spec = factor_spec(&s.table, s.max_dim)?;
    spec.validate_gmm()?;
    let gola = cfg.gola.clone();
    let model = |x: &[f64]| -> std::result::Result<f64, String> {
        let f = GmmFactors::from_slice(x).map_err(|e| e.to_string())?;
        Ok(score_case(&f, &gola, s.jsd_samples, point_seed(cfg.seed, x)).y)
    };
    let design = sobol_design(&spec, s.n, cfg.seed, model)?;
    let result = bootstrap_ci(&design, s.replicates, s.level, mix_seed(cfg.seed, 0x424f_4f54))?;
    art.write("sensitivity.csv", &result.to_csv())?;
    art.write_json("sensitivity.json", &result)
}

fn exemplar(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let sc = &cfg.exemplar;
    let pf = &cfg.pushforward;
    let obs = sc.observations()?;
    art.write("observations.csv", &obs.to_csv())?;
    art.write("observations.json", &format!("{}\n", obs.sidecar_json()))?;
    let target = sc.target()?;

    let report = run_gola(&target, &gola_config(cfg))?;
    write_mixture(art, "mixture.json", &report.mixture)?;
    art.write("report.json", &format!("{}\n", report.to_json()))?;

    let census = grid_mode_census(&target, 64)?;
    let grid = GridDensity2d::from_target(&target, pf.grid_nodes)?;
    let jsd = jsd_normalized(&grid, &report.mixture, pf.jsd_samples, mix_seed(cfg.seed, 0x4a53))?;
    log::info!(
        "exemplar: {} grid maxima, {} components, JSD vs grid {:.4}",
        census.len(),
        report.mixture.n_components(),
        jsd.value
    );
    art.write_json(
        "grid_comparison.json",
        &json!({
            "census_nodes": 64,
            "census_maxima": census.iter().map(|(c1, c2, l)| json!({"c1": c1, "c2": c2, "log_phi": l})).collect::<Vec<_>>(),
            "grid_nodes": pf.grid_nodes,
            "grid_log_evidence": grid.log_normalizer(),
            "gola_log_evidence": report.log_evidence,
            "n_components": report.mixture.n_components(),
            "jsd": jsd.value,
            "jsd_std_error": jsd.std_error,
        }),
    )?;

    let frame = sc.frame()?;
    let times: Vec<f64> = (0..pf.n_times).map(|i| sc.horizon * i as f64 / (pf.n_times - 1) as f64).collect();
    let pf_seed = mix_seed(cfg.seed, 0x5055_5348);
    let fitted = pushforward(&report.mixture, &frame, sc.u0, &times, pf.samples, pf_seed)?;
    let truth = pushforward(&grid, &frame, sc.u0, &times, pf.samples, pf_seed)?;
    for (name, s) in [("fit", &fitted), ("grid", &truth)] {
        if s.high_rejection {
            log::warn!("pushforward from {name} rejected {} draws", s.rejections);
        }
    }
    art.write("pushforward.csv", &fitted.to_csv())?;
    art.write("pushforward_grid.csv", &truth.to_csv())
}

fn generate(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let g = &cfg.generate;
    let given = [
        g.d.map(|v| v as f64),
        g.m.map(|v| v as f64),
        g.omega,
        g.c,
        g.lambda,
    ];
    let factors = if given.iter().all(Option::is_some) {
        given.iter().map(|v| v.unwrap_or_default()).collect::<Vec<_>>()
    } else {
        let table = g.table.as_deref().ok_or_else(|| {
            Error::Config("generate needs all of d, M, omega, c, lambda, or a table to sample the missing ones from".into())
        })?;
        let drawn = FactorSpec::by_name(table)?.sample(&mut seeded(cfg.seed, 0x4745_4e));
        given.iter().zip(drawn).map(|(v, d)| v.unwrap_or(d)).collect()
    };
    let f = GmmFactors::from_slice(&factors)?;
    let m = generate_test_gmm(&f, cfg.seed)?;
    write_mixture(art, "mixture.json", &m)?;
    art.write_json("factors.json", &f)
}
