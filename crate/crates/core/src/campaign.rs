//! Campaign configuration, on-disk artifacts and the theory-versus-synthesis comparison.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::hwcost::{synthesize_proxy, ConstraintLimits, CostModelParams, SynthesisStrategy};
use crate::mobo::{
    self, default_objectives, run_campaign, validate_objectives, Backend, CampaignOptions, CoDesignEvaluator,
    CoDesignSpace, Metric, Objective, SamplerConfig, SamplerKind, TrialLog, TrialRecord,
};
use crate::pareto::{
    self, derived_metrics, diversity, hypervolume_curve, reference_point, spacing, Diversity, ParetoArchive,
};
use crate::pulsegen::{build_dataset, Dataset, PulseStreamConfig, DEFAULT_DECIMATION, DEFAULT_WINDOW_HALF};
use crate::qnn::TrainParams;
use crate::stats::spearman;

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "CODESIGN_OUT_DIR";

pub const TRIALS_FILE: &str = "trials.jsonl";
pub const FRONT_FILE: &str = "front.csv";
pub const CONSTRAINED_FRONT_FILE: &str = "constrained_front.csv";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const COMPARE_FILE: &str = "compare.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub stream: PulseStreamConfig,
    pub window_half: usize,
    pub decimation: usize,
    pub total_windows: usize,
    pub shuffle_seed: u64,
    /// Load this dataset file instead of generating one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        let total_windows = 5_000;
        let stream = PulseStreamConfig {
            stream_length: crate::pulsegen::required_stream_length(DEFAULT_WINDOW_HALF, total_windows),
            ..PulseStreamConfig::default()
        };
        DatasetConfig {
            shuffle_seed: stream.rng_seed,
            stream,
            window_half: DEFAULT_WINDOW_HALF,
            decimation: DEFAULT_DECIMATION,
            total_windows,
            path: None,
        }
    }
}

impl DatasetConfig {
    pub fn build(&self) -> Result<Dataset> {
        match &self.path {
            Some(p) => Dataset::read_from(p),
            None => build_dataset(&self.stream, self.window_half, self.decimation, self.total_windows, self.shuffle_seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let d = TrainParams::default();
        TrainingConfig { epochs: d.epochs, batch_size: d.batch_size, learning_rate: d.learning_rate, momentum: d.momentum }
    }
}

impl TrainingConfig {
    pub fn params(&self) -> TrainParams {
        TrainParams {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            seed: 0,
        }
    }
}

/// Constraint limits; a missing MSE bound means the dataset's mean-predictor baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitsConfig {
    pub max_area_um2: f64,
    pub max_power_density_w_per_cm2: f64,
    pub max_delay_ps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_val_mse: Option<f64>,
}

impl Default for LimitsConfig {
    fn default() -> Self {
        LimitsConfig {
            max_area_um2: ConstraintLimits::PIXEL_AREA_UM2,
            max_power_density_w_per_cm2: ConstraintLimits::PIXEL_POWER_DENSITY_W_PER_CM2,
            max_delay_ps: ConstraintLimits::PIXEL_DELAY_PS,
            max_val_mse: None,
        }
    }
}

impl LimitsConfig {
    pub fn resolve(&self, baseline_mse: f64) -> ConstraintLimits {
        ConstraintLimits {
            max_area_um2: self.max_area_um2,
            max_power_density_w_per_cm2: self.max_power_density_w_per_cm2,
            max_delay_ps: self.max_delay_ps,
            max_val_mse: self.max_val_mse.unwrap_or(baseline_mse),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignConfig {
    pub seed: u64,
    pub budget: usize,
    pub parallelism: usize,
    pub batch_size: usize,
    pub failure_budget: f64,
    pub backend: Backend,
    pub sampler: SamplerKind,
    pub objectives: Vec<Objective>,
    /// Cost-model parameter file; the built-in table when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_model: Option<PathBuf>,
    pub motpe: SamplerConfig,
    pub training: TrainingConfig,
    pub limits: LimitsConfig,
    pub space: CoDesignSpace,
    pub dataset: DatasetConfig,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        let opts = CampaignOptions::default();
        CampaignConfig {
            seed: 42,
            budget: opts.budget,
            parallelism: opts.parallelism,
            batch_size: opts.batch_size,
            failure_budget: opts.failure_budget,
            backend: Backend::ProxySynthesis,
            sampler: SamplerKind::Motpe,
            objectives: default_objectives(),
            cost_model: None,
            motpe: SamplerConfig::default(),
            training: TrainingConfig::default(),
            limits: LimitsConfig::default(),
            space: CoDesignSpace::default(),
            dataset: DatasetConfig::default(),
        }
    }
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: CampaignConfig = toml::from_str(text).map_err(|e| config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        validate_objectives(&self.objectives)?;
        self.options().validate()?;
        self.space.validate()?;
        self.training.params().validate().map_err(|e| config(e.to_string()))?;
        if self.backend == Backend::AnalyticalTheory {
            if let Some(o) = self.objectives.iter().find(|o| o.needs_hardware()) {
                return Err(config(format!("objective {o} needs the proxy_synthesis backend")));
            }
        }
        let window_len = self.dataset.window_half / self.dataset.decimation.max(1) + 1;
        if self.dataset.path.is_none() && window_len != self.space.input_width {
            return Err(config(format!(
                "dataset windows have {window_len} samples but the space expects {} inputs",
                self.space.input_width
            )));
        }
        Ok(())
    }

    pub fn options(&self) -> CampaignOptions {
        CampaignOptions {
            budget: self.budget,
            parallelism: self.parallelism,
            seed: self.seed,
            batch_size: self.batch_size,
            sampler: self.sampler,
            sampler_config: self.motpe,
            failure_budget: self.failure_budget,
        }
    }

    pub fn cost_params(&self) -> Result<CostModelParams> {
        let p = match &self.cost_model {
            Some(path) => CostModelParams::load(path)?,
            None => CostModelParams::default(),
        };
        p.validate().map_err(|e| config(e.to_string()))?;
        Ok(p)
    }
}

/// Strategy counts over the constrained front (all strategies listed, zeros included).
pub type StrategyDistribution = BTreeMap<SynthesisStrategy, usize>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub completed: usize,
    pub failed: usize,
    pub objectives: Vec<Objective>,
    pub baseline_mse: Option<f64>,
    pub limits: Option<ConstraintLimits>,
    pub reference_point: Vec<f64>,
    pub front_size: usize,
    pub front_trials: Vec<usize>,
    pub final_hypervolume: f64,
    pub final_spacing: Option<f64>,
    pub diversity: Diversity,
    pub constrained_front_size: usize,
    pub constrained_front_trials: Vec<usize>,
    pub strategy_distribution: StrategyDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub trial_index: usize,
    pub hypervolume: f64,
    pub spacing: Option<f64>,
    pub front_size: usize,
}

/// Hypervolume, spacing and front size after every trial, against one reference point.
pub fn convergence(trials: &[TrialRecord], reference: &[f64]) -> Result<Vec<ConvergenceRow>> {
    let points: Vec<Option<&[f64]>> =
        trials.iter().map(|t| t.is_completed().then_some(t.objectives.as_slice())).collect();
    let hv = hypervolume_curve(&points, reference)?;
    let mut archive = ParetoArchive::new(reference.to_vec());
    let mut rows = Vec::with_capacity(trials.len());
    for (t, h) in trials.iter().zip(hv) {
        if t.is_completed() {
            archive.insert(t.trial_index, t.objectives.clone());
        }
        let pts = archive.points();
        rows.push(ConvergenceRow {
            trial_index: t.trial_index,
            hypervolume: h,
            spacing: if pts.len() >= 2 { Some(spacing(&pts)?) } else { None },
            front_size: pts.len(),
        });
    }
    Ok(rows)
}

fn baseline_of(trials: &[TrialRecord]) -> Option<f64> {
    trials.iter().find_map(|t| t.metrics.as_ref().map(|m| m.baseline_mse))
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

fn write_front_csv(
    path: &Path,
    trials: &[TrialRecord],
    archive: &ParetoArchive,
    objectives: &[Objective],
    limits: Option<&ConstraintLimits>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<String> =
        ["trial_index", "depth", "hidden_layer_widths", "weight_bits", "io_bits", "strategy"].map(String::from).to_vec();
    header.extend(objectives.iter().map(|o| o.to_string()));
    header.extend(["eta", "f_max_hz", "area_utilization", "power_density_w_per_cm2"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;
    for idx in archive.trial_indices() {
        let t = &trials[idx];
        let m = &t.design.mlp;
        let mut row = vec![
            t.trial_index.to_string(),
            m.depth().to_string(),
            join(&m.hidden_layer_widths),
            join(&m.weight_bits),
            m.io_bits.to_string(),
            t.design.strategy.to_string(),
        ];
        row.extend(t.objectives.iter().map(|v| v.to_string()));
        let derived = limits
            .zip(t.metrics.as_ref())
            .and_then(|(l, metrics)| derived_metrics(t, metrics.baseline_mse, l).ok());
        match derived {
            Some(d) => row.extend([d.eta, d.f_max_hz, d.area_utilization, d.power_density_w_per_cm2].map(|v| v.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), 4)),
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

fn write_convergence_csv(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["trial_index", "hypervolume", "spacing", "front_size"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.trial_index.to_string(),
            r.hypervolume.to_string(),
            r.spacing.map(|s| s.to_string()).unwrap_or_default(),
            r.front_size.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the front, constrained-front, convergence and summary files for a trial log.
/// Files appear only once all of them have been produced.
pub fn write_reports(
    trials: &[TrialRecord],
    objectives: &[Objective],
    limits: &LimitsConfig,
    out_dir: &Path,
) -> Result<Summary> {
    if trials.iter().enumerate().any(|(i, t)| t.trial_index != i) {
        return Err(Error::Format("trial indices must run 0, 1, 2, ... without gaps".into()));
    }
    if let Some(t) = trials.iter().find(|t| t.is_completed() && t.objectives.len() != objectives.len()) {
        return Err(config(format!(
            "trial {} has {} objectives, configuration lists {}",
            t.trial_index,
            t.objectives.len(),
            objectives.len()
        )));
    }
    let baseline = baseline_of(trials);
    let resolved = baseline.map(|b| limits.resolve(b));
    let front = pareto::pareto_front(trials);
    let constrained = match &resolved {
        Some(l) => pareto::constrained_front(trials, l),
        None => ParetoArchive::new(front.reference_point.clone()),
    };
    let reference = front.reference_point.clone();
    let rows = convergence(trials, &reference)?;
    let mut strategy_distribution: StrategyDistribution = SynthesisStrategy::ALL.iter().map(|s| (*s, 0)).collect();
    for idx in constrained.trial_indices() {
        *strategy_distribution.entry(trials[idx].design.strategy).or_default() += 1;
    }
    let front_points = front.points();
    let completed = trials.iter().filter(|t| t.is_completed()).count();
    let summary = Summary {
        trials: trials.len(),
        completed,
        failed: trials.len() - completed,
        objectives: objectives.to_vec(),
        baseline_mse: baseline,
        limits: resolved,
        reference_point: reference.clone(),
        front_size: front.len(),
        front_trials: front.trial_indices(),
        final_hypervolume: rows.last().map_or(0.0, |r| r.hypervolume),
        final_spacing: if front_points.len() >= 2 { Some(spacing(&front_points)?) } else { None },
        diversity: diversity(&front_points),
        constrained_front_size: constrained.len(),
        constrained_front_trials: constrained.trial_indices(),
        strategy_distribution,
    };

    fs::create_dir_all(out_dir)?;
    let staged = |name: &str| out_dir.join(format!(".{name}.partial"));
    let names = [FRONT_FILE, CONSTRAINED_FRONT_FILE, CONVERGENCE_FILE, SUMMARY_FILE];
    let result = (|| -> Result<()> {
        write_front_csv(&staged(FRONT_FILE), trials, &front, objectives, resolved.as_ref())?;
        write_front_csv(&staged(CONSTRAINED_FRONT_FILE), trials, &constrained, objectives, resolved.as_ref())?;
        write_convergence_csv(&staged(CONVERGENCE_FILE), &rows)?;
        fs::write(staged(SUMMARY_FILE), serde_json::to_string_pretty(&summary)? + "\n")?;
        Ok(())
    })();
    if let Err(e) = result {
        for n in names {
            let _ = fs::remove_file(staged(n));
        }
        return Err(e);
    }
    for n in names {
        fs::rename(staged(n), out_dir.join(n))?;
    }
    Ok(summary)
}

/// In-memory result of a campaign run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trials: Vec<TrialRecord>,
    pub summary: Summary,
}

/// Generates (or loads) the dataset, then runs the campaign into `out_dir`.
pub fn run(cfg: &CampaignConfig, out_dir: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    let dataset = cfg.dataset.build()?;
    run_with_dataset(cfg, &dataset, out_dir)
}

/// Runs a campaign against an existing dataset, resuming from `out_dir/trials.jsonl` if present.
pub fn run_with_dataset(cfg: &CampaignConfig, dataset: &Dataset, out_dir: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    if dataset.window_len() != cfg.space.input_width {
        return Err(config(format!(
            "dataset windows have {} samples but the space expects {} inputs",
            dataset.window_len(),
            cfg.space.input_width
        )));
    }
    let evaluator = CoDesignEvaluator::new(dataset, cfg.training.params(), cfg.cost_params()?, cfg.backend)?;
    fs::create_dir_all(out_dir)?;
    let (mut log, prior) = TrialLog::open(&out_dir.join(TRIALS_FILE))?;
    if prior.len() > cfg.budget {
        return Err(config(format!("log already holds {} trials, more than the budget {}", prior.len(), cfg.budget)));
    }
    let trials = run_campaign(&cfg.space, &evaluator, &cfg.objectives, &cfg.options(), Some(&mut log), prior)?;
    let summary = write_reports(&trials, &cfg.objectives, &cfg.limits, out_dir)?;
    Ok(RunOutcome { trials, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub budget: usize,
    pub seed: u64,
    pub theory_log: PathBuf,
    pub synthesis_log: PathBuf,
    /// Theory run scored by its own objectives (val_mse, analytical energy).
    pub proxy_hypervolume_curve: Vec<f64>,
    pub proxy_reference_point: Vec<f64>,
    /// Theory run's designs re-scored as (val_mse, proxy power).
    pub real_hypervolume_curve: Vec<f64>,
    /// Synthesis-guided run, (val_mse, proxy power).
    pub synthesis_hypervolume_curve: Vec<f64>,
    /// Shared by the real and synthesis curves.
    pub reference_point: Vec<f64>,
    /// Spearman correlation of analytical energy and proxy power over distinct evaluated designs.
    pub spearman_rho: f64,
    pub correlated_designs: usize,
}

impl CompareReport {
    pub fn final_real_hypervolume(&self) -> f64 {
        self.real_hypervolume_curve.last().copied().unwrap_or(0.0)
    }

    pub fn final_synthesis_hypervolume(&self) -> f64 {
        self.synthesis_hypervolume_curve.last().copied().unwrap_or(0.0)
    }
}

fn power_objectives() -> Vec<Objective> {
    vec![Objective::Metric(Metric::ValMse), Objective::Metric(Metric::Power)]
}

/// Theory-guided versus synthesis-guided search with a shared dataset and seed.
pub fn compare(cfg: &CampaignConfig, out_dir: &Path) -> Result<CompareReport> {
    let dataset = cfg.dataset.build()?;
    compare_with_dataset(cfg, &dataset, out_dir)
}

pub fn compare_with_dataset(cfg: &CampaignConfig, dataset: &Dataset, out_dir: &Path) -> Result<CompareReport> {
    let theory_cfg = CampaignConfig {
        backend: Backend::AnalyticalTheory,
        objectives: vec![Objective::Metric(Metric::ValMse), Objective::Metric(Metric::AnalyticalEnergy)],
        ..cfg.clone()
    };
    let synth_cfg = CampaignConfig { backend: Backend::ProxySynthesis, objectives: power_objectives(), ..cfg.clone() };
    let theory_dir = out_dir.join("theory");
    let synth_dir = out_dir.join("synthesis");
    let theory = run_with_dataset(&theory_cfg, dataset, &theory_dir)?;
    let synth = run_with_dataset(&synth_cfg, dataset, &synth_dir)?;
    let cost = cfg.cost_params()?;

    let proxy_points: Vec<Option<&[f64]>> =
        theory.trials.iter().map(|t| t.is_completed().then_some(t.objectives.as_slice())).collect();
    let proxy_reference = reference_point(&proxy_points.iter().flatten().copied().collect::<Vec<_>>()).unwrap_or_default();
    let proxy_curve = if proxy_reference.is_empty() { vec![0.0; proxy_points.len()] } else { hypervolume_curve(&proxy_points, &proxy_reference)? };

    let rescored: Vec<Option<Vec<f64>>> = theory
        .trials
        .iter()
        .map(|t| {
            let m = t.metrics.as_ref().filter(|_| t.is_completed())?;
            Some(vec![m.val_mse, synthesize_proxy(&t.design.mlp, t.design.strategy, &cost).power_w])
        })
        .collect();
    let synth_points: Vec<Option<&[f64]>> =
        synth.trials.iter().map(|t| t.is_completed().then_some(t.objectives.as_slice())).collect();
    let union: Vec<&[f64]> = rescored.iter().flatten().map(Vec::as_slice).chain(synth_points.iter().flatten().copied()).collect();
    let reference = reference_point(&union).unwrap_or_default();
    let (real_curve, synth_curve) = if reference.is_empty() {
        (vec![0.0; rescored.len()], vec![0.0; synth_points.len()])
    } else {
        let r: Vec<Option<&[f64]>> = rescored.iter().map(|p| p.as_deref()).collect();
        (hypervolume_curve(&r, &reference)?, hypervolume_curve(&synth_points, &reference)?)
    };

    let mut seen = HashSet::new();
    let (mut energy, mut power) = (Vec::new(), Vec::new());
    for t in theory.trials.iter().chain(&synth.trials) {
        if seen.insert(t.design.clone()) {
            energy.push(crate::hwcost::analytical_energy(&t.design.mlp, &cost));
            power.push(synthesize_proxy(&t.design.mlp, t.design.strategy, &cost).power_w);
        }
    }
    let rho = spearman(&energy, &power)?;

    let report = CompareReport {
        budget: cfg.budget,
        seed: cfg.seed,
        theory_log: theory_dir.join(TRIALS_FILE),
        synthesis_log: synth_dir.join(TRIALS_FILE),
        proxy_hypervolume_curve: proxy_curve,
        proxy_reference_point: proxy_reference,
        real_hypervolume_curve: real_curve,
        synthesis_hypervolume_curve: synth_curve,
        reference_point: reference,
        spearman_rho: rho,
        correlated_designs: energy.len(),
    };
    let staged = out_dir.join(format!(".{COMPARE_FILE}.partial"));
    fs::write(&staged, serde_json::to_string_pretty(&report)? + "\n")?;
    fs::rename(&staged, out_dir.join(COMPARE_FILE))?;
    Ok(report)
}

/// Reads a trial log and rewrites its reports.
pub fn report(log: &Path, objectives: &[Objective], limits: &LimitsConfig, out_dir: &Path) -> Result<Summary> {
    let trials = mobo::read_trial_log(log)?;
    write_reports(&trials, objectives, limits, out_dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = CampaignConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(CampaignConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(CampaignConfig::from_toml("budgett = 5\n").is_err());
        assert!(CampaignConfig::from_toml("[dataset.stream]\ntau = 1e-8\n").is_err());
        assert!(CampaignConfig::from_toml("budget = 5\n").is_ok());
    }

    #[test]
    fn config_validation() {
        assert!(CampaignConfig::from_toml("budget = 0\n").is_err());
        assert!(CampaignConfig::from_toml("objectives = [\"val_mse\"]\n").is_err());
        let theory = "backend = \"analytical_theory\"\nobjectives = [\"val_mse\", \"area\"]\n";
        assert!(CampaignConfig::from_toml(theory).is_err());
        let ok = "backend = \"analytical_theory\"\nobjectives = [\"val_mse\", \"analytical_energy\"]\n";
        assert!(CampaignConfig::from_toml(ok).is_ok());
        let weighted = "objectives = [\"val_mse\", \"weighted:area=1e-4,power=1e3\"]\n";
        assert!(CampaignConfig::from_toml(weighted).is_ok());
        assert!(CampaignConfig::from_toml("[dataset]\ndecimation = 8\n").is_err());
    }

    #[test]
    fn limits_default_to_baseline() {
        let l = LimitsConfig::default().resolve(0.07);
        assert_eq!(l, ConstraintLimits::in_pixel(0.07));
        let fixed = LimitsConfig { max_val_mse: Some(0.044837), ..Default::default() };
        assert_eq!(fixed.resolve(0.07).max_val_mse, 0.044837);
    }
}
