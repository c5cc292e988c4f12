//! Config-driven Monte-Carlo experiments: sweeps over `N`, SNR, `K` or the
//! separation of a source pair, with analytic overlays and CSV/JSON output.
//!
//! Trial `t` of sweep point `p` draws from `trial_rng(seed, p, t)` and the
//! aggregation walks trials in index order after the parallel map, so the
//! output never depends on the worker count.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{asymptotic_error_covariance, resolution_lower_bound, AsymptoticErrorModel, ErrorForm};
use crate::bounds::{crb_infinite, crb_onebit_pessimistic, identifiability_test, IdentifiabilityVerdict};
use crate::error::{DoaError, Result};
use crate::estimators::{estimate_doas_with, Estimator, MusicOptions};
use crate::geometry::{build_geometry, parse_geometry_spec, selection_matrices, ArrayGeometry, SelectionSet};
use crate::moments::{SigmaMode, SigmaSource};
use crate::signal::{simulate_snapshots, trial_rng, SourceScene};

/// Key offset separating plug-in `Σ` resampling streams from snapshot streams.
const SIGMA_STREAM_KEY: u64 = 0x9e37_79b9_7f4a_7c15;

/// A point is unreliable when more than this fraction of trials failed.
pub const UNRELIABLE_FRACTION: f64 = 0.1;

/// CSV column order; fixed regardless of which overlays were requested.
pub const CSV_COLUMNS: [&str; 13] = [
    "sweep_name",
    "sweep_value",
    "estimator",
    "source",
    "rmse_deg",
    "bias_deg",
    "trials_ok",
    "trials_flagged",
    "crb_w_deg",
    "crb_i_deg",
    "mse_thm6_deg",
    "resolution_freq",
    "resolution_bound",
];

/// Estimator label used for rows that carry only bound overlays.
pub const BOUND_ROW_LABEL: &str = "crb";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeometrySpec {
    /// Preset name (`nested`, `coprime`, `mra`, `ula`) or `"0,1,4"`.
    Named(String),
    Sensors(Vec<i64>),
}

impl GeometrySpec {
    pub fn sensors(&self) -> Result<Vec<i64>> {
        match self {
            GeometrySpec::Named(s) => parse_geometry_spec(s),
            GeometrySpec::Sensors(v) => Ok(v.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SnrSpec {
    Common(f64),
    PerSource(Vec<f64>),
}

/// How the `K` DoAs of a sweep point are laid out, in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Placement {
    /// `K` angles equally spaced over `[lo_deg, hi_deg]`; a single source sits at `lo_deg`.
    Equispaced { lo_deg: f64, hi_deg: f64 },
    Explicit { degrees: Vec<f64> },
    /// Two sources at `center_deg ∓ Δ/2`; `Δ` is the sweep value or `separation_deg`.
    Pair {
        center_deg: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        separation_deg: Option<f64>,
    },
}

impl Default for Placement {
    fn default() -> Self {
        Placement::Equispaced { lo_deg: -60.0, hi_deg: 60.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    N,
    SnrDb,
    K,
    DeltaThetaDeg,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::N => "n",
            SweepVariable::SnrDb => "snr_db",
            SweepVariable::K => "k",
            SweepVariable::DeltaThetaDeg => "delta_theta_deg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overlay {
    CrbW,
    CrbI,
    Thm6Mse,
    ResolutionBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = DoaError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(DoaError::Config(format!("unknown output format '{s}' (expected csv or json)"))),
        }
    }
}

/// One experiment: a scene family, a sweep and what to measure at each point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub geometry: GeometrySpec,
    /// Number of sources; taken from the sweep when sweeping `k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default)]
    pub placement: Placement,
    /// Per-source SNR in dB; taken from the sweep when sweeping `snr_db`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<SnrSpec>,
    /// Linear per-source power multipliers applied to the swept SNR.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_scale: Option<Vec<f64>>,
    /// Snapshot count; taken from the sweep when sweeping `n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
    #[serde(default)]
    pub overlays: Vec<Overlay>,
    #[serde(default = "default_grid")]
    pub music_grid_deg: f64,
    #[serde(default = "default_form")]
    pub error_form: ErrorForm,
    #[serde(default)]
    pub sigma: SigmaSource,
    pub sweep: Sweep,
}

fn default_trials() -> usize {
    500
}

fn default_estimators() -> Vec<Estimator> {
    Estimator::ALL.to_vec()
}

fn default_grid() -> f64 {
    MusicOptions::default().grid_step_deg
}

fn default_form() -> ErrorForm {
    ErrorForm::Theorem
}

/// Scene of one sweep point, angles in radians ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSpec {
    pub thetas: Vec<f64>,
    pub snr_db: Vec<f64>,
    pub n: usize,
}

fn config_err(msg: impl Into<String>) -> DoaError {
    DoaError::Config(msg.into())
}

fn as_count(x: f64, what: &str) -> Result<usize> {
    if x >= 1.0 && x.fract() == 0.0 && x <= u32::MAX as f64 {
        Ok(x as usize)
    } else {
        Err(config_err(format!("{what} sweep value {x} is not a positive integer")))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| DoaError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    fn sweeps(&self, var: SweepVariable) -> bool {
        self.sweep.variable == var
    }

    pub fn validate(&self) -> Result<()> {
        let vals = &self.sweep.values;
        if vals.is_empty() {
            return Err(config_err("sweep grid is empty"));
        }
        if vals.iter().any(|x| !x.is_finite()) || vals.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config_err("sweep grid must be finite and strictly ascending"));
        }
        if self.trials == 0 {
            return Err(config_err("trials must be at least 1"));
        }
        build_geometry(&self.geometry.sensors()?)?;
        let mut seen = Vec::new();
        for e in &self.estimators {
            if seen.contains(e) {
                return Err(config_err(format!("estimator {} listed twice", e.name())));
            }
            seen.push(*e);
        }
        if !(self.music_grid_deg > 0.0 && self.music_grid_deg <= 1.0) {
            return Err(config_err(format!("music_grid_deg {} must lie in (0, 1]", self.music_grid_deg)));
        }
        if self.sigma.mode == SigmaMode::MonteCarlo && self.sigma.mc_trials < 10_000 {
            return Err(config_err("Monte-Carlo sigma needs at least 1e4 resamples"));
        }
        let need = |present: bool, what: &str| {
            if present {
                Ok(())
            } else {
                Err(config_err(format!("`{what}` is required unless it is the sweep variable")))
            }
        };
        match self.sweep.variable {
            SweepVariable::N => vals.iter().try_for_each(|&x| as_count(x, "n").map(|_| ()))?,
            SweepVariable::K => {
                vals.iter().try_for_each(|&x| as_count(x, "k").map(|_| ()))?;
                if !matches!(self.placement, Placement::Equispaced { .. }) {
                    return Err(config_err("a k sweep needs equispaced placement"));
                }
                if matches!(self.snr_db, Some(SnrSpec::PerSource(_))) {
                    return Err(config_err("a k sweep needs a common SNR"));
                }
            }
            SweepVariable::DeltaThetaDeg => {
                if !matches!(self.placement, Placement::Pair { .. }) {
                    return Err(config_err("a delta_theta_deg sweep needs pair placement"));
                }
                if vals[0] <= 0.0 {
                    return Err(config_err("separations must be positive"));
                }
            }
            SweepVariable::SnrDb => {}
        }
        if let Some(scale) = &self.snr_scale {
            if !self.sweeps(SweepVariable::SnrDb) {
                return Err(config_err("snr_scale only applies to an snr_db sweep"));
            }
            if scale.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(config_err("snr_scale entries must be positive"));
            }
        }
        if !self.sweeps(SweepVariable::N) {
            need(self.n.is_some_and(|n| n >= 1), "n")?;
        }
        if !self.sweeps(SweepVariable::SnrDb) {
            need(self.snr_db.is_some(), "snr_db")?;
        }
        if !self.sweeps(SweepVariable::K) {
            match &self.placement {
                Placement::Explicit { degrees } => {
                    if let Some(k) = self.k.filter(|&k| k != degrees.len()) {
                        return Err(config_err(format!("k = {k} but {} explicit angles", degrees.len())));
                    }
                }
                Placement::Pair { separation_deg, .. } => {
                    if self.k.is_some_and(|k| k != 2) {
                        return Err(config_err("pair placement needs k = 2"));
                    }
                    if !self.sweeps(SweepVariable::DeltaThetaDeg) && separation_deg.is_none() {
                        return Err(config_err("pair placement needs separation_deg outside a delta_theta_deg sweep"));
                    }
                }
                Placement::Equispaced { .. } => need(self.k.is_some_and(|k| k >= 1), "k")?,
            }
        }
        if self.overlays.contains(&Overlay::ResolutionBound) && self.sources_at(vals[0])? != 2 {
            return Err(config_err("the resolution_bound overlay needs exactly two sources"));
        }
        // Resolve every point once so that bad angles surface as config errors.
        vals.iter().try_for_each(|&v| self.point(v).map(|_| ()))
    }

    fn sources_at(&self, value: f64) -> Result<usize> {
        Ok(match (&self.placement, self.sweep.variable) {
            (_, SweepVariable::K) => as_count(value, "k")?,
            (Placement::Explicit { degrees }, _) => degrees.len(),
            (Placement::Pair { .. }, _) => 2,
            (Placement::Equispaced { .. }, _) => self.k.unwrap_or(0),
        })
    }

    /// Scene parameters at one sweep value.
    pub fn point(&self, value: f64) -> Result<PointSpec> {
        let k = self.sources_at(value)?;
        let mut deg = match &self.placement {
            Placement::Equispaced { lo_deg, hi_deg } => {
                if k == 1 {
                    vec![*lo_deg]
                } else {
                    (0..k).map(|i| lo_deg + (hi_deg - lo_deg) * i as f64 / (k - 1) as f64).collect()
                }
            }
            Placement::Explicit { degrees } => degrees.clone(),
            Placement::Pair { center_deg, separation_deg } => {
                let sep = if self.sweeps(SweepVariable::DeltaThetaDeg) {
                    value
                } else {
                    separation_deg.unwrap_or(0.0)
                };
                vec![center_deg - sep / 2.0, center_deg + sep / 2.0]
            }
        };
        deg.sort_by(f64::total_cmp);
        if deg.windows(2).any(|w| w[0] == w[1]) {
            return Err(config_err(format!("placement yields repeated angles {deg:?}")));
        }
        if let Some(t) = deg.iter().find(|t| !(t.abs() < 90.0)) {
            return Err(config_err(format!("angle {t} deg outside (-90, 90)")));
        }
        let snr_db = match (self.sweep.variable, &self.snr_db) {
            (SweepVariable::SnrDb, _) => match &self.snr_scale {
                None => vec![value; k],
                Some(scale) if scale.len() == k => scale.iter().map(|c| value + 10.0 * c.log10()).collect(),
                Some(scale) => return Err(config_err(format!("{} snr_scale entries for {k} sources", scale.len()))),
            },
            (_, Some(SnrSpec::Common(s))) => vec![*s; k],
            (_, Some(SnrSpec::PerSource(v))) if v.len() == k => v.clone(),
            (_, Some(SnrSpec::PerSource(v))) => {
                return Err(config_err(format!("{} SNR values for {k} sources", v.len())))
            }
            (_, None) => return Err(config_err("missing snr_db")),
        };
        let n = match self.sweep.variable {
            SweepVariable::N => as_count(value, "n")?,
            _ => self.n.unwrap_or(0),
        };
        Ok(PointSpec { thetas: deg.iter().map(|d| d.to_radians()).collect(), snr_db, n })
    }
}

/// Aggregated statistics for one `(estimator, source)` at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub estimator: String,
    /// 1-based rank of the source in ascending angle order.
    pub source: usize,
    #[serde(default, with = "opt_f64")]
    pub rmse_deg: Option<f64>,
    #[serde(default, with = "opt_f64")]
    pub bias_deg: Option<f64>,
    pub trials_ok: usize,
    pub trials_flagged: usize,
    /// Trials where MUSIC found fewer than `K` peaks; included in `trials_ok`.
    pub trials_fallback: usize,
    #[serde(default, with = "opt_f64")]
    pub crb_w_deg: Option<f64>,
    #[serde(default, with = "opt_f64")]
    pub crb_i_deg: Option<f64>,
    #[serde(default, with = "opt_f64")]
    pub mse_thm6_deg: Option<f64>,
    #[serde(default, with = "opt_f64")]
    pub resolution_freq: Option<f64>,
    #[serde(default, with = "opt_f64")]
    pub resolution_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub sweep_value: f64,
    pub n: usize,
    pub thetas_deg: Vec<f64>,
    pub snr_db: Vec<f64>,
    pub unreliable: bool,
    pub wall_clock_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identifiability: Option<IdentifiabilityVerdict>,
    pub rows: Vec<ResultRow>,
}

/// Output of a sweep, with the fully resolved config echoed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub config: ExperimentConfig,
    pub points: Vec<PointSummary>,
}

impl MonteCarloSummary {
    pub fn unreliable(&self) -> bool {
        self.points.iter().any(|p| p.unreliable)
    }

    pub fn row(&self, sweep_value: f64, estimator: &str, source: usize) -> Option<&ResultRow> {
        self.points
            .iter()
            .find(|p| p.sweep_value == sweep_value)?
            .rows
            .iter()
            .find(|r| r.estimator == estimator && r.source == source)
    }
}

/// Result of one estimator on one trial: per-source errors in degrees.
#[derive(Debug, Clone, PartialEq)]
pub enum TrialOutcome {
    Failed,
    Estimated { errors_deg: Vec<f64>, fallback: bool },
}

/// Per-source and pair statistics over a trial list, in trial order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialStats {
    pub rmse_deg: Vec<Option<f64>>,
    pub bias_deg: Vec<Option<f64>>,
    pub ok: usize,
    pub flagged: usize,
    pub fallback: usize,
    /// Fraction of all trials whose largest error is below half the separation.
    pub resolution_freq: Option<f64>,
}

/// Folds trial outcomes; failed trials count as unresolved.
pub fn aggregate(outcomes: &[TrialOutcome], k: usize, separation_deg: Option<f64>) -> TrialStats {
    let mut sq = vec![0.0; k];
    let mut sum = vec![0.0; k];
    let (mut ok, mut fallback, mut resolved) = (0usize, 0usize, 0usize);
    for o in outcomes {
        if let TrialOutcome::Estimated { errors_deg, fallback: fb } = o {
            ok += 1;
            fallback += *fb as usize;
            for (i, e) in errors_deg.iter().enumerate() {
                sq[i] += e * e;
                sum[i] += e;
            }
            if let Some(sep) = separation_deg {
                if errors_deg.iter().all(|e| e.abs() < sep / 2.0) {
                    resolved += 1;
                }
            }
        }
    }
    let per = |acc: &[f64], f: fn(f64) -> f64| -> Vec<Option<f64>> {
        acc.iter().map(|&a| (ok > 0).then(|| f(a / ok as f64))).collect()
    };
    TrialStats {
        rmse_deg: per(&sq, f64::sqrt),
        bias_deg: per(&sum, |x| x),
        ok,
        flagged: outcomes.len() - ok,
        fallback,
        resolution_freq: separation_deg.map(|_| resolved as f64 / outcomes.len().max(1) as f64),
    }
}

struct PointContext<'a> {
    cfg: &'a ExperimentConfig,
    geom: &'a ArrayGeometry,
    sel: &'a SelectionSet,
    scene: SourceScene,
    n: usize,
    index: usize,
    sigma: SigmaSource,
    opts: MusicOptions,
}

fn run_trial(ctx: &PointContext, trial: usize) -> Vec<TrialOutcome> {
    let n_est = ctx.cfg.estimators.len();
    let mut rng = trial_rng(ctx.cfg.seed, ctx.index, trial);
    let y = match simulate_snapshots(&ctx.scene, ctx.geom, ctx.n, &mut rng) {
        Ok(y) => y,
        Err(e) => {
            log::debug!("point {} trial {trial}: simulation failed: {e}", ctx.index);
            return vec![TrialOutcome::Failed; n_est];
        }
    };
    let k = ctx.scene.k();
    ctx.cfg
        .estimators
        .iter()
        .map(|&est| {
            match estimate_doas_with(est, &y, k, ctx.sel, &ctx.opts, &ctx.sigma, (ctx.index, trial)) {
                Ok(res) => TrialOutcome::Estimated {
                    errors_deg: res
                        .thetas
                        .iter()
                        .zip(&ctx.scene.thetas)
                        .map(|(a, b)| (a - b).to_degrees())
                        .collect(),
                    fallback: res.flagged,
                },
                Err(e) => {
                    log::debug!("point {} trial {trial}: {} failed: {e}", ctx.index, est.name());
                    TrialOutcome::Failed
                }
            }
        })
        .collect()
}

/// Analytic values attached to the rows of one point.
#[derive(Debug, Default)]
struct Overlays {
    crb_w: Option<Vec<f64>>,
    crb_i: Option<Vec<f64>>,
    thm6: Vec<(Estimator, Vec<f64>)>,
    resolution: Vec<(Estimator, f64)>,
}

impl Overlays {
    fn thm6_of(&self, est: Estimator, source: usize) -> Option<f64> {
        self.thm6.iter().find(|(e, _)| *e == est).map(|(_, v)| v[source])
    }

    fn bound_of(&self, est: Estimator) -> Option<f64> {
        self.resolution.iter().find(|(e, _)| *e == est).map(|(_, b)| *b)
    }
}

fn compute_overlays(
    cfg: &ExperimentConfig,
    geom: &ArrayGeometry,
    sel: &SelectionSet,
    scene: &SourceScene,
    n: usize,
    analytic: &[Estimator],
) -> Result<Overlays> {
    let mut out = Overlays::default();
    let wants = |o: Overlay| cfg.overlays.contains(&o);
    if wants(Overlay::CrbW) {
        out.crb_w = Some(crb_onebit_pessimistic(scene, geom, sel, n)?.std_deg());
    }
    if wants(Overlay::CrbI) {
        out.crb_i = Some(crb_infinite(scene, geom, sel, n)?.std_deg());
    }
    if !(wants(Overlay::Thm6Mse) || wants(Overlay::ResolutionBound)) {
        return Ok(out);
    }
    let src = SigmaSource { seed: cfg.seed ^ SIGMA_STREAM_KEY, ..cfg.sigma };
    for &est in analytic.iter().filter(|e| **e != Estimator::Icab) {
        let model: AsymptoticErrorModel =
            match asymptotic_error_covariance(scene, geom, sel, n, est, cfg.error_form, &src) {
                Ok(m) => m,
                // Beyond the identifiable range the theory has nothing to say.
                Err(DoaError::Identifiability { .. }) => continue,
                Err(e) => return Err(e),
            };
        if wants(Overlay::Thm6Mse) {
            out.thm6.push((est, model.rmse_deg()));
        }
        if wants(Overlay::ResolutionBound) && scene.k() == 2 {
            let dtheta = scene.thetas[1] - scene.thetas[0];
            out.resolution.push((est, resolution_lower_bound(&model, 0, 1, dtheta)?.lower_bound));
        }
    }
    Ok(out)
}

fn build_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| config_err(format!("cannot start worker pool: {e}")))
}

fn prepare(cfg: &ExperimentConfig) -> Result<(ArrayGeometry, SelectionSet)> {
    cfg.validate()?;
    let geom = build_geometry(&cfg.geometry.sensors()?)?;
    let sel = selection_matrices(&geom);
    Ok((geom, sel))
}

fn point_scene(spec: &PointSpec) -> Result<SourceScene> {
    SourceScene::from_snr_db(spec.thetas.clone(), &spec.snr_db).map_err(|e| config_err(e.to_string()))
}

fn separation_deg(cfg: &ExperimentConfig, scene: &SourceScene) -> Option<f64> {
    (cfg.sweep.variable == SweepVariable::DeltaThetaDeg && scene.k() == 2)
        .then(|| (scene.thetas[1] - scene.thetas[0]).to_degrees())
}

/// Runs every sweep point: `trials` simulate → quantise → estimate pipelines per
/// estimator, ascending-rank pairing with the truth, then the requested overlays.
///
/// `workers = None` uses all cores; the result is identical for any value.
pub fn run_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<MonteCarloSummary> {
    let (geom, sel) = prepare(cfg)?;
    let pool = build_pool(workers)?;
    let sigma = SigmaSource { seed: cfg.seed ^ SIGMA_STREAM_KEY, ..cfg.sigma };
    let opts = MusicOptions { grid_step_deg: cfg.music_grid_deg };
    let mut points = Vec::with_capacity(cfg.sweep.values.len());
    for (index, &value) in cfg.sweep.values.iter().enumerate() {
        let started = Instant::now();
        let spec = cfg.point(value)?;
        let scene = point_scene(&spec)?;
        let k = scene.k();
        let ctx = PointContext { cfg, geom: &geom, sel: &sel, scene, n: spec.n, index, sigma, opts };
        let trials: Vec<Vec<TrialOutcome>> = if cfg.estimators.is_empty() {
            Vec::new()
        } else {
            pool.install(|| (0..cfg.trials).into_par_iter().map(|t| run_trial(&ctx, t)).collect())
        };
        let overlays = compute_overlays(cfg, &geom, &sel, &ctx.scene, spec.n, &cfg.estimators)?;
        let sep = separation_deg(cfg, &ctx.scene);
        let mut rows = Vec::new();
        let mut unreliable = false;
        for (ei, &est) in cfg.estimators.iter().enumerate() {
            let outcomes: Vec<TrialOutcome> = trials.iter().map(|t| t[ei].clone()).collect();
            let stats = aggregate(&outcomes, k, sep);
            if stats.flagged as f64 > UNRELIABLE_FRACTION * cfg.trials as f64 {
                unreliable = true;
            }
            for s in 0..k {
                rows.push(ResultRow {
                    estimator: est.name().to_string(),
                    source: s + 1,
                    rmse_deg: stats.rmse_deg[s],
                    bias_deg: stats.bias_deg[s],
                    trials_ok: stats.ok,
                    trials_flagged: stats.flagged,
                    trials_fallback: stats.fallback,
                    crb_w_deg: overlays.crb_w.as_ref().map(|v| v[s]),
                    crb_i_deg: overlays.crb_i.as_ref().map(|v| v[s]),
                    mse_thm6_deg: overlays.thm6_of(est, s),
                    resolution_freq: stats.resolution_freq,
                    resolution_bound: overlays.bound_of(est),
                });
            }
        }
        let wall_clock_s = started.elapsed().as_secs_f64();
        log::info!(
            "{} {} = {value}: {} trials in {wall_clock_s:.2} s{}",
            cfg.name,
            cfg.sweep.variable.name(),
            cfg.trials,
            if unreliable { " (unreliable)" } else { "" }
        );
        points.push(PointSummary {
            sweep_value: value,
            n: spec.n,
            thetas_deg: ctx.scene.thetas.iter().map(|t| t.to_degrees()).collect(),
            snr_db: spec.snr_db,
            unreliable,
            wall_clock_s,
            identifiability: None,
            rows,
        });
    }
    Ok(MonteCarloSummary { config: cfg.clone(), points })
}

/// [`run_experiment`] for a two-source separation sweep; rows carry the
/// empirical resolution frequency and, if requested, its analytic lower bound.
pub fn resolution_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<MonteCarloSummary> {
    if cfg.sweep.variable != SweepVariable::DeltaThetaDeg || !matches!(cfg.placement, Placement::Pair { .. }) {
        return Err(config_err("a resolution study needs pair placement and a delta_theta_deg sweep"));
    }
    run_experiment(cfg, workers)
}

/// Analytic curves only, no simulation. Each point gets `crb` rows with the
/// requested bounds (and the identifiability verdict) plus one row group per
/// EOCAB/OCAB estimator for the asymptotic MSE and resolution-bound overlays.
pub fn analytic_sweep(cfg: &ExperimentConfig) -> Result<MonteCarloSummary> {
    let (geom, sel) = prepare(cfg)?;
    let wants = |o: Overlay| cfg.overlays.contains(&o);
    let mut points = Vec::with_capacity(cfg.sweep.values.len());
    for &value in &cfg.sweep.values {
        let started = Instant::now();
        let spec = cfg.point(value)?;
        let scene = point_scene(&spec)?;
        let k = scene.k();
        let ov = compute_overlays(cfg, &geom, &sel, &scene, spec.n, &cfg.estimators)?;
        let blank = |estimator: &str, s: usize| ResultRow {
            estimator: estimator.to_string(),
            source: s + 1,
            rmse_deg: None,
            bias_deg: None,
            trials_ok: 0,
            trials_flagged: 0,
            trials_fallback: 0,
            crb_w_deg: None,
            crb_i_deg: None,
            mse_thm6_deg: None,
            resolution_freq: None,
            resolution_bound: None,
        };
        let mut rows = Vec::new();
        if wants(Overlay::CrbW) || wants(Overlay::CrbI) {
            for s in 0..k {
                rows.push(ResultRow {
                    crb_w_deg: ov.crb_w.as_ref().map(|v| v[s]),
                    crb_i_deg: ov.crb_i.as_ref().map(|v| v[s]),
                    ..blank(BOUND_ROW_LABEL, s)
                });
            }
        }
        for &est in &cfg.estimators {
            if ov.thm6.iter().all(|(e, _)| *e != est) && ov.bound_of(est).is_none() {
                continue;
            }
            for s in 0..k {
                rows.push(ResultRow {
                    mse_thm6_deg: ov.thm6_of(est, s),
                    resolution_bound: ov.bound_of(est),
                    ..blank(est.name(), s)
                });
            }
        }
        points.push(PointSummary {
            sweep_value: value,
            n: spec.n,
            thetas_deg: scene.thetas.iter().map(|t| t.to_degrees()).collect(),
            snr_db: spec.snr_db,
            unreliable: false,
            wall_clock_s: started.elapsed().as_secs_f64(),
            identifiability: Some(identifiability_test(&scene, &geom)?),
            rows,
        });
    }
    Ok(MonteCarloSummary { config: cfg.clone(), points })
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// CSV text: header, then one row per `(sweep value, estimator, source)`.
pub fn to_csv_string(summary: &MonteCarloSummary) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    let name = summary.config.sweep.variable.name();
    for p in &summary.points {
        for r in &p.rows {
            let _ = writeln!(
                out,
                "{name},{},{},{},{},{},{},{},{},{},{},{},{}",
                p.sweep_value,
                r.estimator,
                r.source,
                cell(r.rmse_deg),
                cell(r.bias_deg),
                r.trials_ok,
                r.trials_flagged,
                cell(r.crb_w_deg),
                cell(r.crb_i_deg),
                cell(r.mse_thm6_deg),
                cell(r.resolution_freq),
                cell(r.resolution_bound),
            );
        }
    }
    out
}

pub fn to_json_string(summary: &MonteCarloSummary) -> Result<String> {
    serde_json::to_string_pretty(summary).map_err(|e| config_err(e.to_string()))
}

pub fn from_json_str(text: &str) -> Result<MonteCarloSummary> {
    serde_json::from_str(text).map_err(|e| config_err(format!("malformed summary: {e}")))
}

/// Writes the summary to `path` in the requested format.
pub fn emit_results(summary: &MonteCarloSummary, format: OutputFormat, path: &Path) -> Result<()> {
    let text = match format {
        OutputFormat::Csv => to_csv_string(summary),
        OutputFormat::Json => to_json_string(summary)?,
    };
    std::fs::write(path, text).map_err(|source| DoaError::Io { path: path.display().to_string(), source })
}

/// `Option<f64>` that survives JSON with non-finite values (stored as strings).
mod opt_f64 {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match v {
            None => s.serialize_none(),
            Some(x) if x.is_finite() => s.serialize_some(x),
            Some(x) => s.serialize_some(&x.to_string()),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Num(x)) => Ok(Some(x)),
            Some(Repr::Text(t)) => t.parse().map(Some).map_err(D::Error::custom),
        }
    }
}
