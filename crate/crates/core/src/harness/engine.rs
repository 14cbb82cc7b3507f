use std::sync::Arc;

use rayon::prelude::*;

use super::spec::{ExperimentKind, ExperimentSpec, SweepVariable};
use crate::channel::{apply_channel, nearest_bin, synthesize_channel, ChannelMatrix, RxFrame};
use crate::detect::associate;
use crate::metrics::{achievable_rate, mutual_information, pd_stderr, range_profile_linear};
use crate::ofdm::{build_tx_frame, Constellation, Modulation, Payload, PilotPattern, TxFrame};
use crate::receiver::{Estimator, Receiver, ReceiverConfig, Scheme, Stage1};
use crate::scenario::{derive_paths, noise_variance, PathSet, ScenarioConfig, ScenarioFile};
use crate::seed::{self, Stream};
use crate::{Error, RealGrid, Result};

/// One scheme/estimator combination that gets its own Pd curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Series {
    pub scheme: Scheme,
    /// `None` for the pilot-only benchmark.
    pub estimator: Option<Estimator>,
}

impl Series {
    pub fn estimator_name(&self) -> &'static str {
        self.estimator.map_or("none", Estimator::name)
    }
}

pub(crate) fn series_of(spec: &ExperimentSpec) -> Vec<Series> {
    let mut out = Vec::new();
    for &scheme in &spec.schemes {
        match scheme {
            Scheme::PilotOnly => out.push(Series { scheme, estimator: None }),
            Scheme::Genie => out.push(Series {
                scheme,
                estimator: Some(Estimator::Lmmse),
            }),
            Scheme::DataAided => out.extend(spec.estimators.iter().map(|&e| Series {
                scheme,
                estimator: Some(e),
            })),
        }
    }
    out.dedup();
    out
}

/// Everything that is fixed within one sweep point.
pub(crate) struct Point {
    pub value: f64,
    pub scenario: ScenarioConfig,
    pub channel: ChannelMatrix,
    pub sigma2: f64,
    pub rho: f64,
    pub pilots: Arc<PilotPattern>,
    /// Fixed frames per modulation, absent when data are redrawn.
    pub frames: Vec<Option<TxFrame>>,
    pub los_bin: usize,
}

pub(crate) fn scenario_at(spec: &ExperimentSpec, value: f64) -> Result<(ScenarioConfig, f64)> {
    let mut file: ScenarioFile = spec.scenario.clone();
    let mut rho = spec.pilot_percent;
    match spec.sweep.variable {
        SweepVariable::RcsDbsm => {
            let t = spec.swept_target();
            file.targets
                .get_mut(t - 1)
                .ok_or_else(|| Error::Sweep(format!("swept target {t} does not exist")))?
                .rcs_dbsm = value;
        }
        SweepVariable::TxPowerDbm => file.tx_power_dbm = value,
        SweepVariable::PilotPercent => rho = value,
        SweepVariable::None => {}
    }
    Ok((file.into_config()?, rho))
}

pub(crate) fn frame_for(spec: &ExperimentSpec, pilots: &Arc<PilotPattern>, modulation: Modulation, trial: Option<u64>) -> Result<TxFrame> {
    let data_seed = match trial {
        Some(t) => seed::derive(spec.data_seed(), Stream::DataBits, t),
        None => spec.data_seed(),
    };
    build_tx_frame(
        pilots.clone(),
        Arc::new(Constellation::new(modulation)),
        Payload::Seed(data_seed),
    )
}

pub(crate) fn build_point(spec: &ExperimentSpec, value: f64) -> Result<Point> {
    let (scenario, rho) = scenario_at(spec, value)?;
    let paths = derive_paths(&scenario)?;
    let wf = &scenario.waveform;
    let channel = synthesize_channel(&paths, wf);
    let sigma2 = noise_variance(wf);
    let pilots = Arc::new(PilotPattern::generate(wf.subcarriers, wf.symbols, rho, spec.pilot_seed())?);
    let frames = spec
        .modulations
        .iter()
        .map(|&m| {
            if spec.redraw_data {
                Ok(None)
            } else {
                frame_for(spec, &pilots, m, None).map(Some)
            }
        })
        .collect::<Result<_>>()?;
    let los = paths.los().expect("line of sight always present");
    let los_bin = nearest_bin(los.delay_s, los.doppler_hz, wf).0;
    Ok(Point {
        value,
        scenario,
        channel,
        sigma2,
        rho,
        pilots,
        frames,
        los_bin,
    })
}

pub(crate) fn receiver_config(spec: &ExperimentSpec, series: Series, paths: &PathSet, sigma2: f64) -> ReceiverConfig {
    let mut cfg = ReceiverConfig::new(
        series.scheme,
        series.estimator.unwrap_or(Estimator::Lmmse),
        1.0 / sigma2,
        paths.total_power() / sigma2,
    );
    cfg.max_iterations = spec.receiver.max_iterations;
    cfg.feedback = spec.receiver.feedback;
    cfg.gain_fit = spec.receiver.gain_fit;
    cfg.snr_source = spec.receiver.snr_source;
    cfg.cfar = spec.cfar;
    cfg
}

/// Hits of one series in one trial: the final decision and one per
/// iteration slot.
#[derive(Debug, Clone, Default)]
pub(crate) struct SeriesOutcome {
    pub final_hit: bool,
    pub iteration_hits: Vec<bool>,
    pub profile: Option<Vec<f64>>,
}

pub(crate) struct TrialContext<'a> {
    pub spec: &'a ExperimentSpec,
    pub series: &'a [Series],
    pub receiver: &'a Receiver,
}

pub(crate) fn noise_seed(spec: &ExperimentSpec, trial: u64) -> u64 {
    seed::derive(spec.master_seed, Stream::Noise, trial)
}

pub(crate) struct TrialRun {
    pub rx: RxFrame,
    pub tx: TxFrame,
    pub stage1: Option<Stage1>,
    pub outputs: Vec<Option<crate::receiver::PipelineOutput>>,
}

/// Simulates one noise realization and runs every series on it.
pub(crate) fn run_trial_full(ctx: &TrialContext<'_>, point: &Point, modulation_index: usize, trial: u64) -> Result<TrialRun> {
    let spec = ctx.spec;
    let tx = match &point.frames[modulation_index] {
        Some(f) => f.clone(),
        None => frame_for(spec, &point.pilots, spec.modulations[modulation_index], Some(trial))?,
    };
    let rx = apply_channel(&tx, &point.channel, point.sigma2, noise_seed(spec, trial))?;
    let needs_stage1 = ctx.series.iter().any(|s| s.scheme != Scheme::Genie);
    let stage1 = if needs_stage1 && !tx.pilots.is_empty() {
        let cfg = receiver_config(spec, ctx.series[0], &point.channel.paths, point.sigma2);
        Some(ctx.receiver.stage1(&rx, &tx, &cfg)?)
    } else {
        None
    };
    let mut outputs = Vec::with_capacity(ctx.series.len());
    for &s in ctx.series {
        if s.scheme != Scheme::Genie && stage1.is_none() {
            // No pilots: pilot-based sensing has no input and detects nothing.
            outputs.push(None);
            continue;
        }
        let cfg = receiver_config(spec, s, &point.channel.paths, point.sigma2);
        outputs.push(Some(ctx.receiver.run(&rx, &tx, &cfg, stage1.as_ref())?));
    }
    Ok(TrialRun { rx, tx, stage1, outputs })
}

pub(crate) fn run_trial(ctx: &TrialContext<'_>, point: &Point, modulation_index: usize, trial: u64) -> Result<Vec<SeriesOutcome>> {
    let spec = ctx.spec;
    let run = run_trial_full(ctx, point, modulation_index, trial)?;
    let wf = &point.scenario.waveform;
    let truth = &point.channel.paths;
    let scored = spec.scored_target;
    let want_profile = spec.kind == ExperimentKind::RangeProfile;
    let (n, m) = wf.grid_shape();
    Ok(run
        .outputs
        .iter()
        .map(|out| match out {
            None => SeriesOutcome {
                final_hit: false,
                iteration_hits: vec![false; spec.receiver.max_iterations],
                profile: want_profile.then(|| range_profile_linear(&RealGrid::zeros(n, m))),
            },
            Some(out) => {
                let hit = |d| associate(d, truth, wf, spec.gate)[scored];
                let final_hit = hit(&out.detections);
                let iteration_hits = (0..spec.receiver.max_iterations)
                    .map(|i| out.per_iteration.get(i).map_or(final_hit, hit))
                    .collect();
                SeriesOutcome {
                    final_hit,
                    iteration_hits,
                    profile: want_profile.then(|| range_profile_linear(&out.image)),
                }
            }
        })
        .collect())
}

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ResultRow {
    pub sweep_var: f64,
    pub scheme: Scheme,
    pub estimator: &'static str,
    pub pd: f64,
    pub pd_stderr: f64,
    pub mi: f64,
    pub rate: f64,
    pub modulation: Modulation,
    pub iteration: usize,
}

/// Trial-averaged, peak-normalized range profile of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSeries {
    pub sweep_var: f64,
    pub scheme: Scheme,
    pub estimator: &'static str,
    pub modulation: Modulation,
    pub los_bin: usize,
    /// Mean of the per-trial normalized linear profiles.
    pub linear: Vec<f64>,
    pub bin_m: f64,
}

pub(crate) struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub profiles: Vec<ProfileSeries>,
}

fn iteration_label(series: Series, spec: &ExperimentSpec) -> usize {
    match series.scheme {
        Scheme::PilotOnly => 0,
        Scheme::Genie => 1,
        Scheme::DataAided => spec.receiver.max_iterations,
    }
}

pub(crate) fn run_sweep(spec: &ExperimentSpec) -> Result<SweepOutput> {
    let values = spec.points();
    let points = values.iter().map(|&v| build_point(spec, v)).collect::<Result<Vec<_>>>()?;
    let series = series_of(spec);
    let (n, m) = points[0].scenario.waveform.grid_shape();
    let receiver = Receiver::new(n, m);
    let ctx = TrialContext {
        spec,
        series: &series,
        receiver: &receiver,
    };
    let n_mod = spec.modulations.len();
    let trials = spec.n_trials;
    let total = points.len() * n_mod * trials;

    let outcomes: Vec<Vec<SeriesOutcome>> = (0..total)
        .into_par_iter()
        .map(|task| {
            let trial = task % trials;
            let mi = (task / trials) % n_mod;
            let p = task / (trials * n_mod);
            run_trial(&ctx, &points[p], mi, trial as u64)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut profiles = Vec::new();
    for (p, point) in points.iter().enumerate() {
        if point.rho == 0.0 && series.iter().any(|s| s.scheme != Scheme::Genie) {
            log::warn!("no pilots at sweep value {}: pilot-based sensing reports no detections", point.value);
        }
        for (mi, &modulation) in spec.modulations.iter().enumerate() {
            let constellation = Constellation::new(modulation);
            let mi_seed = seed::derive(spec.master_seed, Stream::MutualInformation, (p * n_mod + mi) as u64);
            let info = mutual_information(&constellation, &point.channel.h, point.sigma2, spec.mi_samples, mi_seed)?;
            let rate = achievable_rate(info, point.rho)?;
            let block = &outcomes[(p * n_mod + mi) * trials..(p * n_mod + mi + 1) * trials];
            for (si, &s) in series.iter().enumerate() {
                let pd_of = |f: &dyn Fn(&SeriesOutcome) -> bool| {
                    let hits = block.iter().filter(|o| f(&o[si])).count();
                    hits as f64 / trials as f64
                };
                let row = |pd: f64, iteration: usize| ResultRow {
                    sweep_var: point.value,
                    scheme: s.scheme,
                    estimator: s.estimator_name(),
                    pd,
                    pd_stderr: pd_stderr(pd, trials),
                    mi: rate.mi_per_symbol,
                    rate: rate.rate,
                    modulation,
                    iteration,
                };
                if spec.kind == ExperimentKind::IterationStudy && s.scheme == Scheme::DataAided {
                    for it in 0..spec.receiver.max_iterations.saturating_sub(1) {
                        rows.push(row(pd_of(&|o| o.iteration_hits[it]), it + 1));
                    }
                }
                rows.push(row(pd_of(&|o| o.final_hit), iteration_label(s, spec)));
                if spec.kind == ExperimentKind::RangeProfile {
                    let mut mean = vec![0.0; n];
                    for o in block {
                        for (acc, v) in mean.iter_mut().zip(o[si].profile.as_ref().expect("profiles requested")) {
                            *acc += v;
                        }
                    }
                    mean.iter_mut().for_each(|v| *v /= trials as f64);
                    profiles.push(ProfileSeries {
                        sweep_var: point.value,
                        scheme: s.scheme,
                        estimator: s.estimator_name(),
                        modulation,
                        los_bin: point.los_bin,
                        linear: mean,
                        bin_m: crate::scenario::SPEED_OF_LIGHT * point.scenario.waveform.delay_resolution(),
                    });
                }
            }
        }
    }
    Ok(SweepOutput { rows, profiles })
}
