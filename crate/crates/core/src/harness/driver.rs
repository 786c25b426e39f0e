//! Monte Carlo experiment driver. Trials are independent (per-trial seeds
//! derived from the master seed and trial id alone) and run in parallel;
//! within a trial the round loop is strictly sequential.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounds::{best_conversion_rank, norm_conversion, residual_mass};
use crate::designs::MeasurementDesign;
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Mode, StateInit};
use crate::linalg::{norms, random_pure, DensityMatrix};
use crate::process_tomo::{diamond_bound, run_process_tomography, Channel, ChannelSource};
use crate::projection::{project_to_choi, project_to_states};
use crate::sources::{derive_seed, AdaptiveSource};
use crate::state_tomo::run_state_tomography;

/// Stream id for the experimenter's measurement randomness.
const MEASUREMENT_STREAM: u64 = 0;
/// Salt for deriving the seed handed to the source (disjoint from the
/// measurement stream; the source never sees current-round randomness).
const SOURCE_SEED_SALT: u64 = 1;

/// Per-trial result. `wall_ms` is diagnostic only and deliberately excluded
/// from all exports, which must be byte-stable for a fixed seed.
#[derive(Clone, Debug)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub rounds: u64,
    /// `|L̂_N − ρ̄_N|` spectral.
    pub spectral_error: f64,
    /// `|ρ̂_PLS − ρ̄_N|` trace.
    pub trace_error: f64,
    pub rank: usize,
    /// `4r·spectral_error + 2·min(Σ_r)`: the norm-conversion bound at the
    /// realized spectral error; the trace error may never exceed it.
    pub lemma_bound: f64,
    pub sigma_r_traj: f64,
    pub sigma_r_pls: f64,
    /// Rank minimizing the norm-conversion bound at the realized spectral
    /// error, and the minimized bound (post-hoc view of the free rank).
    pub best_rank: usize,
    pub best_lemma_bound: f64,
    /// What the coverage metric is compared against: `ε + 2·min(Σ_r)` in
    /// state mode, `ε` (against the diamond bound) in process mode.
    pub threshold: f64,
    pub exceeded: bool,
    pub proj_iterations: usize,
    pub proj_min_eig: f64,
    pub proj_marginal_dev: f64,
    pub proj_distance: f64,
    /// `d²·|ρ̂_PLS − ρ̄_N|` spectral; process mode only.
    pub diamond: Option<f64>,
    pub wall_ms: f64,
}

/// Aggregate over all trials, plus the full config echo for provenance.
#[derive(Clone, Debug)]
pub struct ExperimentSummary {
    pub mode: Mode,
    pub design_label: String,
    pub source_name: String,
    pub trials: usize,
    pub rounds: u64,
    pub master_seed: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub rank: usize,
    pub failure_fraction: f64,
    /// `δ + 3·sqrt(δ(1−δ)/T)`: binomial slack on the failure fraction.
    pub failure_limit: f64,
    pub pass: bool,
    pub spectral_q05: f64,
    pub spectral_q50: f64,
    pub spectral_q95: f64,
    pub trace_q05: f64,
    pub trace_q50: f64,
    pub trace_q95: f64,
    pub config_echo: Vec<String>,
}

fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

impl ExperimentSummary {
    /// Stable `key = value` lines (the machine-readable summary format).
    pub fn to_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("mode = {}", self.mode.as_str()),
            format!("design = {}", self.design_label),
            format!("source = {}", self.source_name),
            format!("trials = {}", self.trials),
            format!("rounds = {}", self.rounds),
            format!("master_seed = {}", self.master_seed),
            format!("epsilon = {}", fmt(self.epsilon)),
            format!("delta = {}", fmt(self.delta)),
            format!("rank = {}", self.rank),
            format!("failure_fraction = {}", fmt(self.failure_fraction)),
            format!("failure_limit = {}", fmt(self.failure_limit)),
            format!("pass = {}", self.pass),
            format!("spectral_error_q05 = {}", fmt(self.spectral_q05)),
            format!("spectral_error_q50 = {}", fmt(self.spectral_q50)),
            format!("spectral_error_q95 = {}", fmt(self.spectral_q95)),
            format!("trace_error_q05 = {}", fmt(self.trace_q05)),
            format!("trace_error_q50 = {}", fmt(self.trace_q50)),
            format!("trace_error_q95 = {}", fmt(self.trace_q95)),
        ];
        lines.extend(self.config_echo.iter().cloned());
        lines
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = q * (sorted.len() - 1) as f64;
    let lo = idx.floor() as usize;
    let hi = idx.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = idx - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

fn initial_state(cfg: &ExperimentConfig, source_seed: u64) -> Result<DensityMatrix> {
    let dim = cfg.dim();
    Ok(match cfg.source.state {
        StateInit::Uniform => DensityMatrix::uniform_superposition(dim),
        StateInit::Basis(k) => DensityMatrix::basis_state(dim, k)?,
        StateInit::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(source_seed, 0));
            random_pure(&mut rng, dim)
        }
    })
}

fn build_state_source(
    cfg: &ExperimentConfig,
    design: &MeasurementDesign,
    source_seed: u64,
) -> Result<AdaptiveSource> {
    let dim = cfg.dim();
    let s = &cfg.source;
    Ok(match s.strategy.as_str() {
        "iid" => AdaptiveSource::iid(initial_state(cfg, source_seed)?),
        "drift" => AdaptiveSource::drift(dim, s.omega),
        "random-walk" => {
            AdaptiveSource::random_walk(initial_state(cfg, source_seed)?, s.step, source_seed)
        }
        "feedback" => {
            AdaptiveSource::feedback(initial_state(cfg, source_seed)?, s.window, design.clone())
        }
        "adversarial" => {
            let mut menu: Vec<DensityMatrix> = (0..dim)
                .map(|k| DensityMatrix::basis_state(dim, k))
                .collect::<Result<_>>()?;
            menu.push(DensityMatrix::uniform_superposition(dim));
            AdaptiveSource::adversarial(menu, design.clone())
        }
        other => {
            return Err(Error::Config {
                field: "source.strategy".into(),
                message: format!("unknown state strategy '{other}'"),
            })
        }
    })
}

fn build_channel_source(cfg: &ExperimentConfig) -> Result<ChannelSource> {
    let dim = cfg.dim();
    let s = &cfg.source;
    Ok(match s.strategy.as_str() {
        "iid" => ChannelSource::Iid { channel: Channel::depolarizing(dim, s.p)? },
        "drift-depolarizing" => {
            ChannelSource::DriftDepolarizing { dim, p_start: s.p, rate: s.rate }
        }
        "drift-unitary" => ChannelSource::DriftUnitary { dim, omega: s.omega },
        "feedback" => {
            ChannelSource::FeedbackChannel { dim, base_p: s.p, gain: s.gain, window: s.window }
        }
        other => {
            return Err(Error::Config {
                field: "source.strategy".into(),
                message: format!("unknown process strategy '{other}'"),
            })
        }
    })
}

/// Runs one trial. The trial seed is `derive_seed(master, trial)`; the
/// measurement stream and the source seed are derived from it, so records
/// do not depend on scheduling order.
pub fn run_single_trial(
    cfg: &ExperimentConfig,
    design: &MeasurementDesign,
    rounds: u64,
    trial: usize,
) -> Result<TrialRecord> {
    let start = std::time::Instant::now();
    let trial_seed = derive_seed(cfg.seed, trial as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    rng.set_stream(MEASUREMENT_STREAM);
    let source_seed = derive_seed(trial_seed, SOURCE_SEED_SALT);

    let eps = cfg.rounds.epsilon;
    let r = cfg.rounds.rank;

    let record = match cfg.mode {
        Mode::Process => {
            let mut source = build_channel_source(cfg)?;
            let run = run_process_tomography(&mut source, design, design, rounds, &mut rng)?;
            let d = cfg.dim();
            let average = run.choi_average.average();

            let mut linear_diff = run.linear.matrix.clone();
            linear_diff.add_scaled(-1.0, average.matrix());
            let spectral_error = norms(&linear_diff).spectral;

            let report =
                project_to_choi(&run.linear.matrix, d, cfg.choi_tol, cfg.choi_max_iter)?;
            let pls = DensityMatrix::new_unchecked(report.matrix.clone());

            let mut diff = report.matrix.clone();
            diff.add_scaled(-1.0, average.matrix());
            let diff_norms = norms(&diff);
            let trace_error = diff_norms.trace;
            let diamond = diamond_bound(&diff, d);

            let sigma_r_traj = residual_mass(&average, r);
            let sigma_r_pls = residual_mass(&pls, r);
            let lemma_bound = norm_conversion(spectral_error, r, &average, &pls);
            let (best_rank, best_lemma_bound) =
                best_conversion_rank(spectral_error, &average, &pls);

            TrialRecord {
                trial,
                seed: trial_seed,
                rounds,
                spectral_error,
                trace_error,
                rank: r,
                lemma_bound,
                sigma_r_traj,
                sigma_r_pls,
                best_rank,
                best_lemma_bound,
                threshold: eps,
                exceeded: diamond > eps,
                proj_iterations: report.iterations,
                proj_min_eig: report.min_eigenvalue,
                proj_marginal_dev: report.marginal_deviation,
                proj_distance: report.distance_moved,
                diamond: Some(diamond),
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            }
        }
        _ => {
            let mut source = build_state_source(cfg, design, source_seed)?;
            let run = run_state_tomography(&mut source, design, rounds, &mut rng)?;
            let average = run.average.average();

            let mut linear_diff = run.linear.matrix.clone();
            linear_diff.add_scaled(-1.0, average.matrix());
            let spectral_error = norms(&linear_diff).spectral;

            let report = project_to_states(&run.linear.matrix);
            let pls = DensityMatrix::new_unchecked(report.matrix.clone());

            let mut diff = report.matrix.clone();
            diff.add_scaled(-1.0, average.matrix());
            let trace_error = norms(&diff).trace;

            let sigma_r_traj = residual_mass(&average, r);
            let sigma_r_pls = residual_mass(&pls, r);
            let lemma_bound = norm_conversion(spectral_error, r, &average, &pls);
            let (best_rank, best_lemma_bound) =
                best_conversion_rank(spectral_error, &average, &pls);
            let threshold = eps + 2.0 * sigma_r_traj.min(sigma_r_pls);

            TrialRecord {
                trial,
                seed: trial_seed,
                rounds,
                spectral_error,
                trace_error,
                rank: r,
                lemma_bound,
                sigma_r_traj,
                sigma_r_pls,
                best_rank,
                best_lemma_bound,
                threshold,
                exceeded: trace_error > threshold,
                proj_iterations: report.iterations,
                proj_min_eig: report.min_eigenvalue,
                proj_marginal_dev: report.marginal_deviation,
                proj_distance: report.distance_moved,
                diamond: None,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            }
        }
    };
    Ok(record)
}

/// Runs `cfg.trials` independent trials (in parallel) and aggregates the
/// coverage statistics. For a fixed config and master seed the records are
/// identical across runs and across worker counts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(ExperimentSummary, Vec<TrialRecord>)> {
    cfg.validate()?;
    let design = cfg.build_design()?;
    let rounds = cfg.resolve_rounds()?;

    let records: Vec<TrialRecord> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| run_single_trial(cfg, &design, rounds, trial))
        .collect::<Result<Vec<_>>>()?;

    let failures = records.iter().filter(|r| r.exceeded).count();
    let failure_fraction = failures as f64 / records.len() as f64;
    let delta = cfg.rounds.delta;
    let failure_limit = delta + 3.0 * (delta * (1.0 - delta) / cfg.trials as f64).sqrt();

    let mut spectral: Vec<f64> = records.iter().map(|r| r.spectral_error).collect();
    let mut trace: Vec<f64> = records.iter().map(|r| r.trace_error).collect();
    spectral.sort_by(|a, b| a.partial_cmp(b).unwrap());
    trace.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let summary = ExperimentSummary {
        mode: cfg.mode,
        design_label: design.label().to_string(),
        source_name: cfg.source.strategy.clone(),
        trials: cfg.trials,
        rounds,
        master_seed: cfg.seed,
        epsilon: cfg.rounds.epsilon,
        delta,
        rank: cfg.rounds.rank,
        failure_fraction,
        failure_limit,
        pass: failure_fraction <= failure_limit,
        spectral_q05: quantile(&spectral, 0.05),
        spectral_q50: quantile(&spectral, 0.50),
        spectral_q95: quantile(&spectral, 0.95),
        trace_q05: quantile(&trace, 0.05),
        trace_q50: quantile(&trace, 0.50),
        trace_q95: quantile(&trace, 0.95),
        config_echo: cfg.echo_lines(),
    };
    Ok((summary, records))
}

fn rerun_history(
    cfg: &ExperimentConfig,
    design: &MeasurementDesign,
    rounds: u64,
    trial: usize,
) -> Result<crate::sources::History> {
    let trial_seed = derive_seed(cfg.seed, trial as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    rng.set_stream(MEASUREMENT_STREAM);
    let source_seed = derive_seed(trial_seed, SOURCE_SEED_SALT);
    match cfg.mode {
        Mode::Process => {
            let mut source = build_channel_source(cfg)?;
            Ok(run_process_tomography(&mut source, design, design, rounds, &mut rng)?.history)
        }
        _ => {
            let mut source = build_state_source(cfg, design, source_seed)?;
            Ok(run_state_tomography(&mut source, design, rounds, &mut rng)?.history)
        }
    }
}

/// Streams the per-round outcome rows `(trial, t, z, y)` of every trial to
/// `outcomes.csv` in `dir`. Trials are re-run deterministically from their
/// seeds, so the rows match the experiment that produced the records.
pub fn export_outcomes_csv(
    cfg: &ExperimentConfig,
    dir: &std::path::Path,
) -> Result<std::path::PathBuf> {
    use std::io::Write;
    cfg.validate()?;
    let design = cfg.build_design()?;
    let rounds = cfg.resolve_rounds()?;
    std::fs::create_dir_all(dir)?;
    let path = dir.join("outcomes.csv");
    let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(file, "trial,t,z,y")?;
    for trial in 0..cfg.trials {
        let history = rerun_history(cfg, &design, rounds, trial)?;
        for rec in history.records() {
            let z = rec.input_index.as_ref().map(|o| o.to_string()).unwrap_or_default();
            writeln!(file, "{},{},{},{}", trial, rec.round, z, rec.outcome)?;
        }
    }
    file.flush()?;
    Ok(path)
}

/// One sweep point: round count and the median spectral error of the linear
/// estimator across trials.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub rounds: u64,
    pub median_spectral: f64,
}

#[derive(Clone, Debug)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Log-log slope of median spectral error versus round count.
    pub slope: f64,
}

/// Median spectral error of `L̂_N − ρ̄_N` for each round count in
/// `n_list`, with a least-squares log-log slope.
pub fn scaling_sweep(cfg: &ExperimentConfig, n_list: &[u64]) -> Result<SweepTable> {
    cfg.validate()?;
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config {
            field: "sweep.n_list".into(),
            message: "expected a strictly ascending, nonempty list".into(),
        });
    }
    let design = cfg.build_design()?;
    let trials = cfg.sweep_trials.max(1);

    let jobs: Vec<(usize, u64, usize)> = n_list
        .iter()
        .enumerate()
        .flat_map(|(pi, &n)| (0..trials).map(move |t| (pi, n, t)))
        .collect();

    let errors: Vec<(usize, f64)> = jobs
        .into_par_iter()
        .map(|(pi, n, t)| -> Result<(usize, f64)> {
            // per-point seed tree keeps records independent of list layout
            let mut point_cfg = cfg.clone();
            point_cfg.seed = derive_seed(cfg.seed, pi as u64);
            let record = run_single_trial(&point_cfg, &design, n, t)?;
            Ok((pi, record.spectral_error))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(n_list.len());
    for (pi, &n) in n_list.iter().enumerate() {
        let mut errs: Vec<f64> =
            errors.iter().filter(|(p, _)| *p == pi).map(|(_, e)| *e).collect();
        errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = if errs.len() % 2 == 1 {
            errs[errs.len() / 2]
        } else {
            0.5 * (errs[errs.len() / 2 - 1] + errs[errs.len() / 2])
        };
        rows.push(SweepRow { rounds: n, median_spectral: median });
    }

    // least-squares slope in log-log coordinates
    let xs: Vec<f64> = rows.iter().map(|r| (r.rounds as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.median_spectral.ln()).collect();
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let var: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    let slope = cov / var;

    Ok(SweepTable { rows, slope })
}
