use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{builtin_scenario, load_session, run_session, scenario_session, CliError, Input, Mode, RunConfig, RunResult};
use crate::metrics::{self, FootstepEval, MetricSummary};
use crate::trace_io::ReplaySession;

/// How replications are combined into a value's aggregate row.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "kebab-case")]
pub enum Averaging {
    /// Summarize all footsteps of all replications together.
    #[default]
    Pooled,
    /// Average each metric over replications.
    PerRun,
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    /// A [`FilterConfig`](crate::filter::FilterConfig) field name.
    pub parameter: String,
    pub values: Vec<f64>,
    pub replications: usize,
    pub averaging: Averaging,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// `None` marks the aggregate row.
    pub replication: Option<usize>,
    pub seed: Option<u64>,
    pub fixes_used: usize,
    pub metrics: MetricSummary,
}

/// Runs every (value, replication) pair; replication `k` uses seed
/// `base.seed + k`. Rows come back grouped by value, replications first,
/// then the aggregate.
pub fn sweep(spec: &SweepSpec, base: &RunConfig) -> Result<Vec<SweepRow>, CliError> {
    if spec.values.is_empty() {
        return Err(CliError::Sweep("no values given".into()));
    }
    if spec.replications == 0 {
        return Err(CliError::Sweep("replications must be at least 1".into()));
    }
    let configs = spec
        .values
        .iter()
        .map(|&v| {
            let mut c = base.filter.clone();
            c.set_param(&spec.parameter, v)?;
            Ok(c)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let seeds: Vec<u64> = (0..spec.replications as u64).map(|k| base.seed.wrapping_add(k)).collect();

    let sessions: Vec<ReplaySession> = match &base.input {
        Input::Scenario(name) => {
            let scenario = builtin_scenario(name)?;
            seeds
                .par_iter()
                .map(|&s| scenario_session(&scenario, s))
                .collect::<Result<_, _>>()?
        }
        Input::Trace { trace, map } => vec![load_session(trace, map)?],
    };
    let session_for = |k: usize| &sessions[k.min(sessions.len() - 1)];

    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|i| (0..seeds.len()).map(move |k| (i, k)))
        .collect();
    let results: Vec<RunResult> = jobs
        .par_iter()
        .map(|&(i, k)| run_session(session_for(k), base.mode, &configs[i], seeds[k]))
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::with_capacity(configs.len() * (seeds.len() + 1));
    for (i, runs) in results.chunks(seeds.len()).enumerate() {
        let value = spec.values[i];
        for (k, r) in runs.iter().enumerate() {
            rows.push(SweepRow {
                value,
                replication: Some(k),
                seed: Some(seeds[k]),
                fixes_used: r.summary.fixes_used,
                metrics: r.summary.metrics.clone(),
            });
        }
        rows.push(SweepRow {
            value,
            replication: None,
            seed: None,
            fixes_used: runs.iter().map(|r| r.summary.fixes_used).sum(),
            metrics: aggregate(runs, spec.averaging)?,
        });
    }
    Ok(rows)
}

fn aggregate(runs: &[RunResult], averaging: Averaging) -> Result<MetricSummary, CliError> {
    match averaging {
        Averaging::Pooled => {
            let all: Vec<FootstepEval> = runs.iter().flat_map(|r| r.evals.iter().cloned()).collect();
            Ok(metrics::summarize(&all)?)
        }
        Averaging::PerRun => {
            let n = runs.len() as f64;
            let mean = |f: fn(&MetricSummary) -> f64| runs.iter().map(|r| f(&r.summary.metrics)).sum::<f64>() / n;
            Ok(MetricSummary {
                footsteps: runs.iter().map(|r| r.summary.metrics.footsteps).sum(),
                correct_sidewalk_proportion: mean(|m| m.correct_sidewalk_proportion),
                euclidean_mean: mean(|m| m.euclidean_mean),
                euclidean_median: mean(|m| m.euclidean_median),
                euclidean_p90: mean(|m| m.euclidean_p90),
                along_median: mean(|m| m.along_median),
                along_p90: mean(|m| m.along_p90),
                across_median: mean(|m| m.across_median),
                across_p90: mean(|m| m.across_p90),
                cdf: Vec::new(),
            })
        }
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    parameter: &'a str,
    value: f64,
    mode: &'a str,
    replication: String,
    seed: Option<u64>,
    fixes_used: usize,
    footsteps: usize,
    correct_sidewalk_proportion: f64,
    euclidean_mean: f64,
    euclidean_median: f64,
    euclidean_p90: f64,
    along_median: f64,
    along_p90: f64,
    across_median: f64,
    across_p90: f64,
}

pub fn write_sweep_csv(rows: &[SweepRow], parameter: &str, mode: Mode, out: impl Write) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        let m = &r.metrics;
        w.serialize(CsvRow {
            parameter,
            value: r.value,
            mode: mode.as_str(),
            replication: r.replication.map_or("aggregate".to_string(), |k| k.to_string()),
            seed: r.seed,
            fixes_used: r.fixes_used,
            footsteps: m.footsteps,
            correct_sidewalk_proportion: m.correct_sidewalk_proportion,
            euclidean_mean: m.euclidean_mean,
            euclidean_median: m.euclidean_median,
            euclidean_p90: m.euclidean_p90,
            along_median: m.along_median,
            along_p90: m.along_p90,
            across_median: m.across_median,
            across_p90: m.across_p90,
        })
        .map_err(crate::metrics::MetricsError::from)?;
    }
    w.flush().map_err(crate::metrics::MetricsError::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::FilterConfig;

    fn base(mode: Mode) -> RunConfig {
        RunConfig {
            mode,
            filter: FilterConfig {
                n_particles: 40,
                ..FilterConfig::default()
            },
            input: Input::Scenario("l_corner".into()),
            output_dir: None,
            seed: 10,
        }
    }

    fn spec(values: Vec<f64>, replications: usize) -> SweepSpec {
        SweepSpec {
            parameter: "jaywalk_weight".into(),
            values,
            replications,
            averaging: Averaging::Pooled,
        }
    }

    #[test]
    fn row_shape() {
        let rows = sweep(&spec(vec![0.0, 0.4, 1.0], 2), &base(Mode::RoninPf)).unwrap();
        assert_eq!(rows.len(), 9);
        assert_eq!(rows.iter().filter(|r| r.replication.is_none()).count(), 3);
        let rows = sweep(&spec(vec![0.4], 5), &base(Mode::RoninPf)).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[3].seed, Some(13));
    }

    #[test]
    fn gnss_only_rows_do_not_depend_on_the_swept_value() {
        let rows = sweep(&spec(vec![0.0, 0.4, 1.0], 2), &base(Mode::GnssOnly)).unwrap();
        let aggregates: Vec<&SweepRow> = rows.iter().filter(|r| r.replication.is_none()).collect();
        for a in &aggregates[1..] {
            assert_eq!(a.metrics, aggregates[0].metrics);
        }
    }

    #[test]
    fn per_run_mean_and_errors() {
        let mut s = spec(vec![0.4], 3);
        s.averaging = Averaging::PerRun;
        let rows = sweep(&s, &base(Mode::GnssOnly)).unwrap();
        let mean = rows[..3].iter().map(|r| r.metrics.euclidean_median).sum::<f64>() / 3.0;
        assert!((rows[3].metrics.euclidean_median - mean).abs() < 1e-12);

        s.parameter = "warp_factor".into();
        assert!(matches!(
            sweep(&s, &base(Mode::RoninPf)),
            Err(CliError::Filter(crate::filter::FilterError::UnknownParameter(_)))
        ));
        assert!(matches!(sweep(&spec(vec![], 1), &base(Mode::RoninPf)), Err(CliError::Sweep(_))));
    }
}
