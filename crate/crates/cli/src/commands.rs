//! The six subcommands.
//!
//! Relative paths inside a config (datasets, checkpoints, reports) are resolved
//! against the output directory, so a pipeline of commands sharing one config
//! and one `--out` finds its own artifacts.

use std::ops::Range;
use std::path::{Path, PathBuf};

use failaware_core::episode::{EpisodeTrace, Policy};
use failaware_core::eval::{compute_metrics, evaluate};
use failaware_core::numkit::Rng;
use failaware_core::policies::{FailureAwarePolicy, FaArchitecture, LprePolicy, PolicyWeights, RandomPolicy, SortingPolicy};
use failaware_core::tasks::{AssessConfig, GroundTruth, TaskConfig, TaskInstance};
use failaware_core::training::{bc_accuracy, bc_dataset, dqn_train, train_bc, DqnReport};
use serde_json::json;

use crate::checkpoint::Checkpoint;
use crate::config::{FaSection, PolicyKind, RunConfig, SweepAxis};
use crate::dataset::Dataset;
use crate::error::{CliError, CliResult};
use crate::io::{write_file, write_json};
use crate::plot::{svg, Metric};
use crate::report::{config_hash, csv_bytes, read_csv, write_csv, json_report, CsvRow};

const INIT_STREAM: u64 = 0x696e_6974;
const HEAD_STREAM: u64 = 0x6865_6164;
const DQN_STREAM: u64 = 0x6471_6e00;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    GenData,
    TrainBc,
    TrainFa,
    Eval,
    Sweep,
    Plot,
}

#[derive(Debug, Clone)]
pub struct Options {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: usize,
}

/// Loads the configuration, applies command-line overrides and runs `cmd`.
pub fn run(cmd: Command, opts: &Options) -> CliResult<()> {
    let mut cfg = RunConfig::load(&opts.config)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &opts.out {
        cfg.out = Some(out.clone());
    }
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("runs"));
    let ctx = Context {
        cfg,
        out,
        threads: opts.threads.max(1),
    };
    match cmd {
        Command::GenData => ctx.gen_data(),
        Command::TrainBc => ctx.train_bc(),
        Command::TrainFa => ctx.train_fa(),
        Command::Eval => ctx.eval(),
        Command::Sweep => ctx.sweep(),
        Command::Plot => ctx.plot(),
    }
}

struct Context {
    cfg: RunConfig,
    out: PathBuf,
    threads: usize,
}

/// A base policy trained by behavior cloning.
pub struct TrainedBase {
    pub weights: PolicyWeights,
    pub losses: Vec<f64>,
    pub accuracy: f64,
}

/// Trains π₀ on `instances` with the config's architecture and BC settings.
pub fn train_base(cfg: &RunConfig, task: &TaskConfig, assess: &AssessConfig, instances: &[TaskInstance]) -> CliResult<TrainedBase> {
    let data = bc_dataset(task, assess, instances)?;
    let mut weights = PolicyWeights::base(cfg.policy.architecture(task), &mut Rng::derive(cfg.seed, &[INIT_STREAM]))?;
    let losses = train_bc(&mut weights, &data, &cfg.bc.config(cfg.seed))?;
    let accuracy = bc_accuracy(&weights, &data)?;
    Ok(TrainedBase {
        weights,
        losses,
        accuracy,
    })
}

/// Attaches `arch` to a copy of `base` and trains it with DQN.
pub fn train_head(
    cfg: &RunConfig,
    section: &FaSection,
    task: &TaskConfig,
    assess: &AssessConfig,
    base: &PolicyWeights,
) -> CliResult<(PolicyWeights, DqnReport)> {
    let mut weights = base.clone();
    weights.attach_fa(section.architecture, &mut Rng::derive(cfg.seed, &[HEAD_STREAM]))?;
    let train = section.train_config(task, &cfg.episode, cfg.seed);
    let report = dqn_train(
        &mut weights,
        task,
        &GroundTruth(*assess),
        &train,
        &mut Rng::derive(cfg.seed, &[DQN_STREAM]),
    )?;
    Ok((weights, report))
}

/// Runs `range` split into `threads` contiguous chunks and concatenates the traces.
pub fn evaluate_parallel(
    policy: &dyn Policy,
    cfg: &RunConfig,
    task: &TaskConfig,
    assess: &AssessConfig,
    seed: u64,
    episodes: usize,
    threads: usize,
) -> CliResult<Vec<EpisodeTrace>> {
    let threads = threads.clamp(1, episodes.max(1));
    if threads == 1 {
        return Ok(evaluate(policy, task, assess, &cfg.episode, seed, 0..episodes)?);
    }
    let chunk = episodes.div_ceil(threads);
    let ranges: Vec<Range<usize>> = (0..threads)
        .map(|t| (t * chunk).min(episodes)..((t + 1) * chunk).min(episodes))
        .collect();
    let parts = std::thread::scope(|s| {
        let handles: Vec<_> = ranges
            .into_iter()
            .map(|r| s.spawn(move || evaluate(policy, task, assess, &cfg.episode, seed, r)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("evaluation worker panicked"))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(parts.into_iter().flatten().collect())
}

fn default_label(kind: PolicyKind, weights: Option<&PolicyWeights>) -> String {
    match kind {
        PolicyKind::Re => "RE".into(),
        PolicyKind::Lpre => "LPRE".into(),
        PolicyKind::Sp => "SP".into(),
        PolicyKind::Fa => weights.map_or("FA", |w| w.label()).into(),
    }
}

fn loss_field(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl Context {
    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out.join(p)
        }
    }

    fn echo(&self) -> serde_json::Value {
        self.cfg.echo()
    }

    fn training_instances(&self, task: &TaskConfig) -> CliResult<Vec<TaskInstance>> {
        match &self.cfg.bc.dataset {
            Some(p) => {
                let ds = Dataset::load(&self.path(p))?;
                if ds.header.observation_len != task.observation_len() || ds.header.action_count != task.action_count() {
                    return Err(CliError::Dependency(format!(
                        "dataset {} does not match the task shape",
                        p.display()
                    )));
                }
                Ok(ds.instances)
            }
            None => Ok(Dataset::generate(task, &self.cfg.assess, self.cfg.seed, self.cfg.bc.instances())?.instances),
        }
    }

    fn gen_data(&self) -> CliResult<()> {
        let data = self
            .cfg
            .data
            .as_ref()
            .ok_or_else(|| CliError::Config("gen-data needs a [data] section with `count`".into()))?;
        let ds = Dataset::generate(&self.cfg.task, &self.cfg.assess, self.cfg.seed, data.count)?;
        let path = self.path(Path::new(&data.file));
        ds.save(&path)?;
        write_json(
            &self.out.join("gen-data.json"),
            &json!({ "config": self.echo(), "dataset": data.file, "count": data.count }),
        )?;
        eprintln!("wrote {} records to {}", data.count, path.display());
        Ok(())
    }

    fn train_bc(&self) -> CliResult<()> {
        let instances = self.training_instances(&self.cfg.task)?;
        let base = train_base(&self.cfg, &self.cfg.task, &self.cfg.assess, &instances)?;
        let ckpt = Checkpoint::new(base.weights, self.cfg.task.clone(), self.echo());
        ckpt.save(&self.out.join("bc.ckpt"))?;
        let mut log = String::from("epoch,loss\n");
        for (i, l) in base.losses.iter().enumerate() {
            log.push_str(&format!("{},{l}\n", i + 1));
        }
        write_file(&self.out.join("bc_log.csv"), log.as_bytes())?;
        write_json(
            &self.out.join("bc.json"),
            &json!({
                "config": self.echo(),
                "samples": instances.len(),
                "final_loss": base.losses.last(),
                "accuracy": base.accuracy,
            }),
        )?;
        eprintln!("behavior cloning accuracy {:.4}", base.accuracy);
        Ok(())
    }

    fn train_fa(&self) -> CliResult<()> {
        let section = self
            .cfg
            .fa
            .as_ref()
            .ok_or_else(|| CliError::Config("train-fa needs an [fa] section".into()))?;
        let src = self.path(section.checkpoint.as_deref().unwrap_or(Path::new("bc.ckpt")));
        let ckpt = Checkpoint::load(&src)?;
        ckpt.check_compatible(&self.cfg.task)?;
        if ckpt.weights.fa.is_some() {
            return Err(CliError::Dependency(format!(
                "{} already carries a failure-aware head",
                src.display()
            )));
        }
        let (weights, report) = train_head(&self.cfg, section, &self.cfg.task, &self.cfg.assess, &ckpt.weights)?;
        let label = weights.label();
        Checkpoint::new(weights, self.cfg.task.clone(), self.echo()).save(&self.out.join("fa.ckpt"))?;
        let mut log = String::from("episode,epsilon,mean_reward,loss\n");
        for r in &report.log {
            log.push_str(&format!("{},{},{},{}\n", r.episode, r.epsilon, r.mean_reward, loss_field(r.loss)));
        }
        write_file(&self.out.join("fa_log.csv"), log.as_bytes())?;
        write_json(
            &self.out.join("fa.json"),
            &json!({
                "config": self.echo(),
                "policy": label,
                "gradient_steps": report.gradient_steps,
                "transitions": report.transitions,
                "distinct_rewards": report.distinct_rewards,
            }),
        )?;
        eprintln!("trained {label} for {} gradient steps", report.gradient_steps);
        Ok(())
    }

    fn eval(&self) -> CliResult<()> {
        let section = self
            .cfg
            .eval
            .as_ref()
            .ok_or_else(|| CliError::Config("eval needs an [eval] section".into()))?;
        if section.policies.is_empty() {
            return Err(CliError::Config("eval.policies is empty".into()));
        }
        let task = &self.cfg.task;
        let n = task.action_count();
        let mut inline_base: Option<PolicyWeights> = None;
        let mut loaded: Vec<(String, PolicyKind, Option<PolicyWeights>)> = Vec::new();
        for spec in &section.policies {
            let weights = match (spec.kind, &spec.checkpoint) {
                (PolicyKind::Re, _) => None,
                (kind, Some(p)) => {
                    let ckpt = Checkpoint::load(&self.path(p))?;
                    ckpt.check_compatible(task)?;
                    if kind == PolicyKind::Fa && ckpt.weights.fa.is_none() {
                        return Err(CliError::Dependency(format!("{} has no failure-aware head", p.display())));
                    }
                    Some(ckpt.weights)
                }
                (PolicyKind::Fa, None) => {
                    let p = self.path(Path::new("fa.ckpt"));
                    let ckpt = Checkpoint::load(&p)?;
                    ckpt.check_compatible(task)?;
                    Some(ckpt.weights)
                }
                (_, None) => {
                    if inline_base.is_none() {
                        let instances = self.training_instances(task)?;
                        inline_base = Some(train_base(&self.cfg, task, &self.cfg.assess, &instances)?.weights);
                    }
                    inline_base.clone()
                }
            };
            let label = spec.label.clone().unwrap_or_else(|| default_label(spec.kind, weights.as_ref()));
            loaded.push((label, spec.kind, weights));
        }
        let hash = config_hash(&self.echo());
        let mut rows = Vec::new();
        for seed in self.cfg.eval_seeds(&section.seeds) {
            for (label, kind, weights) in &loaded {
                let m = self.run_policy(*kind, weights.as_ref(), n, task, &self.cfg.assess, seed, section.episodes)?;
                rows.push(CsvRow::new(label, task.kind().as_str(), &hash, seed, &m));
            }
        }
        write_csv(&self.out.join("eval.csv"), &rows)?;
        write_json(&self.out.join("eval.json"), &json_report(&self.echo(), &rows, json!({})))?;
        eprintln!("wrote {} rows to {}", rows.len(), self.out.join("eval.csv").display());
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn run_policy(
        &self,
        kind: PolicyKind,
        weights: Option<&PolicyWeights>,
        n: usize,
        task: &TaskConfig,
        assess: &AssessConfig,
        seed: u64,
        episodes: usize,
    ) -> CliResult<failaware_core::eval::MetricsReport> {
        let need = || weights.ok_or_else(|| CliError::Dependency("policy needs weights".into()));
        let traces = match kind {
            PolicyKind::Re => {
                let p = RandomPolicy { actions: Some(n) };
                evaluate_parallel(&p, &self.cfg, task, assess, seed, episodes, self.threads)?
            }
            PolicyKind::Lpre => {
                let p = LprePolicy { weights: need()? };
                evaluate_parallel(&p, &self.cfg, task, assess, seed, episodes, self.threads)?
            }
            PolicyKind::Sp => {
                let p = SortingPolicy { weights: need()? };
                evaluate_parallel(&p, &self.cfg, task, assess, seed, episodes, self.threads)?
            }
            PolicyKind::Fa => {
                let p = FailureAwarePolicy::new(need()?)?;
                evaluate_parallel(&p, &self.cfg, task, assess, seed, episodes, self.threads)?
            }
        };
        Ok(compute_metrics(&traces)?)
    }

    fn sweep(&self) -> CliResult<()> {
        let section = self
            .cfg
            .sweep
            .as_ref()
            .ok_or_else(|| CliError::Config("sweep needs a [sweep] section".into()))?;
        if section.values.is_empty() || section.policies.is_empty() {
            return Err(CliError::Config("sweep.values and sweep.policies must be non-empty".into()));
        }
        let hash = config_hash(&self.echo());
        let axis = section.axis.as_str();
        let mut rows = Vec::new();
        for &v in &section.values {
            let (task, assess) = self.sweep_point(section.axis, v)?;
            let instances = Dataset::generate(&task, &assess, self.cfg.seed, self.cfg.bc.instances())?.instances;
            let base = train_base(&self.cfg, &task, &assess, &instances)?.weights;
            let mut trained = Vec::new();
            for sp in &section.policies {
                let weights = match sp.kind {
                    PolicyKind::Re => None,
                    PolicyKind::Lpre | PolicyKind::Sp => Some(base.clone()),
                    PolicyKind::Fa => {
                        let arch: FaArchitecture = sp
                            .architecture
                            .or(self.cfg.fa.as_ref().map(|f| f.architecture))
                            .ok_or_else(|| CliError::Config("sweep policy of kind fa needs an architecture".into()))?;
                        let mut fa = self.cfg.fa.clone().unwrap_or_else(|| FaSection::new(arch));
                        fa.architecture = arch;
                        Some(train_head(&self.cfg, &fa, &task, &assess, &base)?.0)
                    }
                };
                let label = sp.label.clone().unwrap_or_else(|| default_label(sp.kind, weights.as_ref()));
                trained.push((label, sp.kind, weights));
            }
            for seed in self.cfg.eval_seeds(&section.seeds) {
                for (label, kind, weights) in &trained {
                    let m = self.run_policy(*kind, weights.as_ref(), task.action_count(), &task, &assess, seed, section.episodes)?;
                    rows.push(CsvRow::new(label, task.kind().as_str(), &hash, seed, &m).with_axis(axis, v));
                }
            }
            eprintln!("{axis} = {v}: done");
        }
        write_csv(&self.out.join("sweep.csv"), &rows)?;
        write_json(&self.out.join("sweep.json"), &json_report(&self.echo(), &rows, json!({ "axis": axis })))?;
        if section.plot {
            self.write_plots("sweep", &rows)?;
        }
        Ok(())
    }

    fn sweep_point(&self, axis: SweepAxis, v: f64) -> CliResult<(TaskConfig, AssessConfig)> {
        let mut task = self.cfg.task.clone();
        let mut assess = self.cfg.assess;
        match (axis, &mut task) {
            (SweepAxis::CorrelationLength, TaskConfig::Correlated(c)) => c.correlation_length = v,
            (SweepAxis::K, TaskConfig::Localize(_)) => {
                if v < 1.0 || v.fract() != 0.0 || (v as usize).is_multiple_of(2) {
                    return Err(CliError::Config(format!("sweep value k = {v} must be an odd positive integer")));
                }
                assess.k = v as usize;
            }
            (axis, t) => {
                return Err(CliError::Config(format!(
                    "sweep axis {} does not apply to the {} task",
                    axis.as_str(),
                    t.kind().as_str()
                )))
            }
        }
        task.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok((task, assess))
    }

    fn write_plots(&self, stem: &str, rows: &[CsvRow]) -> CliResult<()> {
        for metric in [Metric::Tsr, Metric::Tns] {
            let path = self.out.join(format!("{stem}_{}.svg", metric.name()));
            write_file(&path, svg(rows, metric).as_bytes())?;
        }
        Ok(())
    }

    fn plot(&self) -> CliResult<()> {
        let csv = self
            .cfg
            .plot
            .as_ref()
            .map(|p| p.csv.clone())
            .unwrap_or_else(|| PathBuf::from("sweep.csv"));
        let path = self.path(&csv);
        let rows = read_csv(&path)?;
        // Round-trips the parsed rows so a malformed file fails before anything is written.
        csv_bytes(&rows)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report").to_string();
        self.write_plots(&stem, &rows)
    }
}
