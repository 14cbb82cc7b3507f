//! Experiment orchestration: JSON specs in, CSV results and a run manifest out.
//!
//! Every `(sweep point, modulation, trial)` task is independent and seeded
//! from the master seed, so results are identical for any thread count.
//! Noise realizations depend only on the trial index and are shared by all
//! schemes and sweep points.

mod engine;
pub mod oracle;
mod spec;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

pub use engine::{ProfileSeries, ResultRow, Series};
pub use spec::{ExperimentKind, ExperimentSpec, ReceiverOptions, Sweep, SweepVariable};

use crate::channel::dump_grid;
use crate::metrics::PROFILE_FLOOR_DB;
use crate::receiver::Scheme;
use crate::{ComplexGrid, Complex64, Error, Result};

pub const RESULTS_HEADER: &str = "sweep_var,scheme,estimator,pd,pd_stderr,mi,rate,modulation,iteration";
pub const PROFILE_HEADER: &str = "sweep_var,scheme,estimator,modulation,delay_bin,differential_range_m,value_db";

/// Formats a float with 9 significant digits, `%g` style.
pub fn fmt_float(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim(&format!("{v:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

/// Command-line overrides applied on top of a spec.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl RunOptions {
    pub fn apply(&self, spec: &ExperimentSpec) -> Result<ExperimentSpec> {
        let mut spec = spec.clone();
        if let Some(t) = self.trials {
            spec.n_trials = t;
        }
        if let Some(s) = self.seed {
            spec.master_seed = s;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub git_describe: String,
    pub spec: ExperimentSpec,
    pub sweep_variable: String,
    pub seeds: Seeds,
    pub threads: usize,
    pub wall_time_s: f64,
    pub started_unix_s: u64,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Seeds {
    pub master: u64,
    pub pilot: u64,
    pub data: u64,
    pub redraw_data: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub rows: Vec<ResultRow>,
    pub profiles: Vec<ProfileSeries>,
    pub threads: usize,
    pub wall_time_s: f64,
    pub started_unix_s: u64,
}

impl ExperimentResult {
    /// Rows of one series, in sweep order.
    pub fn series_rows(&self, scheme: Scheme, estimator: &str) -> Vec<&ResultRow> {
        self.rows
            .iter()
            .filter(|r| r.scheme == scheme && r.estimator == estimator)
            .collect()
    }

    pub fn write_results_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{RESULTS_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                fmt_float(r.sweep_var),
                r.scheme,
                r.estimator,
                fmt_float(r.pd),
                fmt_float(r.pd_stderr),
                fmt_float(r.mi),
                fmt_float(r.rate),
                r.modulation,
                r.iteration
            )?;
        }
        Ok(())
    }

    pub fn write_profile_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{PROFILE_HEADER}")?;
        for p in &self.profiles {
            for (bin, &v) in p.linear.iter().enumerate() {
                let db = if v > 0.0 { (10.0 * v.log10()).max(PROFILE_FLOOR_DB) } else { PROFILE_FLOOR_DB };
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    fmt_float(p.sweep_var),
                    p.scheme,
                    p.estimator,
                    p.modulation,
                    bin,
                    fmt_float((bin as f64 - p.los_bin as f64) * p.bin_m),
                    fmt_float(db)
                )?;
            }
        }
        Ok(())
    }

    pub fn manifest(&self, outputs: Vec<String>) -> Manifest {
        Manifest {
            tool: "isacsim",
            version: env!("CARGO_PKG_VERSION"),
            git_describe: git_describe(),
            sweep_variable: self.spec.sweep.variable.to_string(),
            seeds: Seeds {
                master: self.spec.master_seed,
                pilot: self.spec.pilot_seed(),
                data: self.spec.data_seed(),
                redraw_data: self.spec.redraw_data,
            },
            spec: self.spec.clone(),
            threads: self.threads,
            wall_time_s: self.wall_time_s,
            started_unix_s: self.started_unix_s,
            outputs,
        }
    }
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<(T, usize)> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::config(format!("cannot build thread pool: {e}")))?;
            Ok((pool.install(f), n.max(1)))
        }
        None => Ok((f(), rayon::current_num_threads())),
    }
}

/// Runs the Monte Carlo experiment in memory.
pub fn run_experiment(spec: &ExperimentSpec, opts: &RunOptions) -> Result<ExperimentResult> {
    let spec = opts.apply(spec)?;
    let started_unix_s = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let (out, threads) = with_pool(opts.threads, || engine::run_sweep(&spec))?;
    let out = out?;
    Ok(ExperimentResult {
        spec,
        rows: out.rows,
        profiles: out.profiles,
        threads,
        wall_time_s: clock.elapsed().as_secs_f64(),
        started_unix_s,
    })
}

/// Runs the experiment and writes `results.csv`, `manifest.json` and, by
/// kind, `profile.csv` or a `dump/` directory into `out`.
pub fn run_to_dir(spec: &ExperimentSpec, opts: &RunOptions, out: &Path) -> Result<ExperimentResult> {
    let result = run_experiment(spec, opts)?;
    fs::create_dir_all(out)?;
    let mut outputs = vec!["results.csv".to_string()];
    let mut w = BufWriter::new(File::create(out.join("results.csv"))?);
    result.write_results_csv(&mut w)?;
    w.flush()?;
    if !result.profiles.is_empty() {
        let mut w = BufWriter::new(File::create(out.join("profile.csv"))?);
        result.write_profile_csv(&mut w)?;
        w.flush()?;
        outputs.push("profile.csv".into());
    }
    if result.spec.dump {
        let dir = out.join("dump");
        write_dump(&result.spec, &dir)?;
        outputs.push("dump/".into());
    }
    outputs.push("manifest.json".into());
    let file = File::create(out.join("manifest.json"))?;
    serde_json::to_writer_pretty(file, &result.manifest(outputs))?;
    Ok(result)
}

fn real_to_complex(g: &crate::RealGrid) -> ComplexGrid {
    g.map(|v| Complex64::new(v, 0.0))
}

/// Re-simulates trial 0 of every sweep point and modulation and writes its
/// grids, images, pilot list and peak lists.
fn write_dump(spec: &ExperimentSpec, dir: &Path) -> Result<()> {
    let series = engine::series_of(spec);
    for (p, &value) in spec.points().iter().enumerate() {
        let point = engine::build_point(spec, value)?;
        let wf = &point.scenario.waveform;
        let (n, m) = wf.grid_shape();
        let receiver = crate::receiver::Receiver::new(n, m);
        let ctx = engine::TrialContext {
            spec,
            series: &series,
            receiver: &receiver,
        };
        let los_delay = point.channel.paths.los().map_or(0.0, |l| l.delay_s);
        for (mi, modulation) in spec.modulations.iter().enumerate() {
            let sub: PathBuf = dir.join(format!("point{p}_{modulation}"));
            fs::create_dir_all(&sub)?;
            let run = engine::run_trial_full(&ctx, &point, mi, 0)?;
            dump_grid(&sub, "x", &run.tx.x)?;
            dump_grid(&sub, "h", &point.channel.h)?;
            dump_grid(&sub, "y", &run.rx.y)?;
            run.tx.pilots.write_csv(BufWriter::new(File::create(sub.join("pilots.csv"))?))?;
            if let Some(s1) = &run.stage1 {
                dump_grid(&sub, "stage1_h_hat", &s1.estimate.h_hat)?;
                dump_grid(&sub, "stage1_image", &real_to_complex(&s1.image))?;
                dump_grid(&sub, "stage1_reconstruction", &s1.reconstruction)?;
                s1.detections
                    .write_csv(BufWriter::new(File::create(sub.join("peaks_stage1.csv"))?), wf, los_delay)?;
            }
            for (s, out) in series.iter().zip(&run.outputs) {
                let Some(out) = out else { continue };
                let tag = format!("{}_{}", s.scheme, s.estimator_name());
                dump_grid(&sub, &format!("{tag}_h_hat"), &out.h_hat_final.h_hat)?;
                dump_grid(&sub, &format!("{tag}_image"), &real_to_complex(&out.image))?;
                out.detections
                    .write_csv(BufWriter::new(File::create(sub.join(format!("peaks_{tag}.csv")))?), wf, los_delay)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format() {
        assert_eq!(fmt_float(0.0), "0");
        assert_eq!(fmt_float(0.5), "0.5");
        assert_eq!(fmt_float(1.9), "1.9");
        assert_eq!(fmt_float(-6.0), "-6");
        assert_eq!(fmt_float(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_float(123456789.0), "123456789");
        assert_eq!(fmt_float(1234567890.0), "1.23456789e+09");
        assert_eq!(fmt_float(1.206e-12), "1.206e-12");
        assert_eq!(fmt_float(0.0001), "0.0001");
        assert_eq!(fmt_float(0.00001), "1e-05");
        assert_eq!(fmt_float(f64::NAN), "nan");
        assert_eq!(fmt_float(9.9999999999), "10");
    }
}
