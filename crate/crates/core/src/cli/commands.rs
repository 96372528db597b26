//! Execution of resolved experiment configs and their output files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{json, Value};

use super::config::{canonical_json_pretty, ExperimentConfig};
use crate::engine::{estimate, simulate};
use crate::environment::Seed;
use crate::error::{Error, Result};
use crate::metric::{distance, DistanceSpec, SeedPair};
use crate::models::Model;
use crate::robustness::{estimate_robustness, RobustnessSpec, SamplerRef, UniformResample};
use crate::stats::{error_analysis, ReferenceMeans};

/// Where outputs go: a directory, or stdout for the main table only.
struct Sink<'a> {
    dir: Option<&'a Path>,
}

impl Sink<'_> {
    fn path(&self, name: &str) -> Option<PathBuf> {
        self.dir.map(|d| d.join(name))
    }

    fn write(&self, name: &str, main: bool, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
        match self.path(name) {
            Some(path) => {
                let io = |source| Error::Io {
                    path: path.clone(),
                    source,
                };
                let file = File::create(&path).map_err(io)?;
                let mut w = BufWriter::new(file);
                f(&mut w).and_then(|_| w.flush()).map_err(io)?;
                log::info!("wrote {}", path.display());
                Ok(())
            }
            None if main => {
                let stdout = std::io::stdout();
                let mut w = stdout.lock();
                match f(&mut w).and_then(|_| w.flush()) {
                    // a closed pipe (`| head`) is not a failure of the run
                    Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                    r => r.map_err(|source| Error::Io {
                        path: PathBuf::from("<stdout>"),
                        source,
                    }),
                }
            }
            None => Ok(()),
        }
    }

    fn json(&self, name: &str, value: &Value) -> Result<()> {
        let text = canonical_json_pretty(value);
        self.write(name, false, |w| w.write_all(text.as_bytes()))
    }
}

fn header(cfg: &ExperimentConfig) -> Vec<String> {
    vec![
        format!("evometric {} {}", env!("CARGO_PKG_VERSION"), cfg.command),
        format!("config: {}", cfg.canonical()),
        format!("seed: {}", cfg.seed),
    ]
}

fn with_config(mut doc: Value, cfg: &ExperimentConfig) -> Value {
    if let Value::Object(m) = &mut doc {
        m.insert("config".into(), serde_json::to_value(cfg).expect("configs serialize"));
    }
    doc
}

/// Runs a resolved config, writing into `out` (a directory, created if needed).
pub fn execute(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<()> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    let sink = Sink { dir: out };
    let model = cfg.system.build(cfg.model_id()?)?;
    let head = header(cfg);
    let seed = Seed(cfg.seed);
    match cfg.command.as_str() {
        "simulate" => {
            log::info!("simulating {} steps", cfg.steps);
            let t = simulate(model.configuration(), cfg.steps, &mut seed.stream(0))?;
            sink.write("trajectory.csv", true, |mut w| t.write_csv(&mut w, &head))
        }
        "estimate" => {
            log::info!("estimating {} runs x {} steps", cfg.samples, cfg.steps);
            let seq = estimate(model.configuration(), cfg.steps, cfg.samples, seed)?;
            if seq.clamp_events() > 0 {
                log::info!("{} domain clamps during the runs", seq.clamp_events());
            }
            sink.write("summary.csv", true, |mut w| seq.write_summary_csv(&mut w, &head))?;
            if cfg.emit_samples {
                sink.write("samples.csv", false, |mut w| seq.write_samples_csv(&mut w, &head))?;
            }
            Ok(())
        }
        "distance" => run_distance(cfg, &model, &sink, &head),
        "robustness" | "adaptability" | "reliability" => run_perturbation(cfg, &model, &sink, &head),
        "stats" => {
            let st = cfg
                .stats
                .as_ref()
                .ok_or_else(|| Error::config("stats", "missing stats section"))?;
            let vars: Vec<&str> = st.vars.iter().map(String::as_str).collect();
            log::info!("reference baseline: {} runs", st.reference_samples);
            let reference_seq = estimate(model.configuration(), cfg.steps, st.reference_samples, Seed(st.reference_seed))?;
            let provenance = format!("baseline N={} seed={}", st.reference_samples, st.reference_seed);
            let reference = ReferenceMeans::from_sequence(&reference_seq, &vars, provenance)?;
            drop(reference_seq);
            log::info!("sample: {} runs", cfg.samples);
            let seq = estimate(model.configuration(), cfg.steps, cfg.samples, seed)?;
            let report = error_analysis(&seq, &vars, &reference)?;
            for v in &vars {
                if let Some(f) = report.fraction_within(v, 1.96) {
                    eprintln!("{v}: |z| <= 1.96 at {:.1}% of steps", 100.0 * f);
                }
            }
            sink.write("errors.csv", true, |mut w| report.write_csv(&mut w, &head))
        }
        "manifest" => {
            let doc = model.manifest()?;
            let text = canonical_json_pretty(&doc);
            sink.write("manifest.json", true, |w| w.write_all(text.as_bytes()))
        }
        other => Err(Error::config("command", format!("unknown command `{other}`"))),
    }
}

fn run_distance(cfg: &ExperimentConfig, model: &Model, sink: &Sink<'_>, head: &[String]) -> Result<()> {
    let rhs_cfg = cfg.rhs.as_ref().ok_or_else(|| Error::config("rhs", "missing right-hand system"))?;
    let rhs = rhs_cfg.build(model.id())?;
    let penalty = model.penalty(cfg.penalty.as_deref().unwrap_or(model.default_penalty()))?;
    let seeds = match cfg.rhs_seed {
        Some(s2) => SeedPair {
            lhs: Seed(cfg.seed),
            rhs: Seed(s2),
        },
        None => SeedPair::derived(Seed(cfg.seed)),
    };
    let spec = DistanceSpec::new(penalty, cfg.times()?, cfg.samples, cfg.scale.unwrap_or(1), seeds)
        .with_discount(cfg.discount.unwrap_or_default());
    log::info!("distance: {} vs {} runs", spec.runs, spec.runs * spec.scale);
    let forward = distance(model.configuration(), rhs.configuration(), &spec)?;
    eprintln!("m(lhs, rhs) = {} (argmax tau = {})", forward.value, forward.argmax);
    sink.write("distance.csv", true, |mut w| forward.write_csv(&mut w, head))?;
    sink.json("distance.json", &with_config(forward.to_json(), cfg))?;
    if cfg.both_directions {
        let backward = distance(rhs.configuration(), model.configuration(), &spec)?;
        eprintln!("m(rhs, lhs) = {} (argmax tau = {})", backward.value, backward.argmax);
        sink.write("distance_reverse.csv", false, |mut w| backward.write_csv(&mut w, head))?;
        sink.json("distance_reverse.json", &with_config(backward.to_json(), cfg))?;
    }
    Ok(())
}

fn run_perturbation(cfg: &ExperimentConfig, model: &Model, sink: &Sink<'_>, head: &[String]) -> Result<()> {
    let p = cfg
        .perturbation
        .as_ref()
        .ok_or_else(|| Error::config("perturbation", "missing perturbation section"))?;
    let penalty_name = cfg.penalty.as_deref().unwrap_or(model.default_penalty());
    let penalty = model.penalty(penalty_name)?;
    let times = cfg.times()?;
    let runs = cfg.samples;
    let scale = cfg.scale.unwrap_or(1);
    let seed = Seed(cfg.seed);
    let spec = match cfg.command.as_str() {
        "robustness" => {
            let target = model.penalty(p.target_penalty.as_deref().unwrap_or(penalty_name))?;
            let interval = p.interval.unwrap_or((0, 0));
            RobustnessSpec::robustness(penalty, target, interval, p.eta1, p.variations, times, runs, scale, seed)
        }
        "adaptability" => RobustnessSpec::adaptability(penalty, p.eta1, p.variations, times, runs, scale, seed),
        _ => RobustnessSpec::reliability(penalty, p.eta1, p.variations, times, runs, scale, seed),
    }
    .with_budget(p.budget)
    .with_discount(cfg.discount.unwrap_or_default());
    let ranges = p.perturb.iter().map(|r| (r.var.clone(), r.lo, r.hi)).collect();
    let mut sampler = UniformResample::on_ranges(ranges)?;
    if p.integer {
        sampler = sampler.integers()?;
    }
    let sampler: SamplerRef = Arc::new(sampler);
    log::info!("{}: collecting {} variations", cfg.command, p.variations);
    let report = estimate_robustness(&spec, model.configuration(), sampler.as_ref())?;
    eprintln!(
        "accepted {} of {} candidates; xi({}) = {}",
        report.accepted,
        report.attempts,
        report.times[0],
        report.xi_min()
    );
    let mut verdicts = Vec::new();
    for q in &p.queries {
        let v = report.verdict(q.tau_tilde, q.eta2)?;
        eprintln!("{}", v.label);
        verdicts.push(v);
    }
    sink.write("xi.csv", true, |mut w| report.write_csv(&mut w, head))?;
    let mut doc = with_config(report.to_json(), cfg);
    doc["verdicts"] = json!(verdicts);
    sink.json("report.json", &doc)
}
