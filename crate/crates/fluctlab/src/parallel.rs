//! Parallel replicate execution on rayon. Tasks are pure functions of the
//! replicate index; results are collected into an index-ordered vector and
//! failures are reported deterministically (lowest index wins), so the
//! parallel degree never changes any output bit.

use rayon::prelude::*;

use fluctlab_core::runner::{reduce_mean_stderr, ReplicateFailure, ReplicateRunner};

pub struct RayonRunner;

impl ReplicateRunner for RayonRunner {
    fn run(
        &self,
        count: u32,
        task: &(dyn Fn(u32) -> Result<Vec<f64>, String> + Sync),
    ) -> Result<Vec<Vec<f64>>, ReplicateFailure> {
        let results: Vec<Result<Vec<f64>, String>> =
            (0..count).into_par_iter().map(task).collect();
        let mut out = Vec::with_capacity(count as usize);
        for (replicate, result) in results.into_iter().enumerate() {
            match result {
                Ok(stats) => out.push(stats),
                Err(detail) => {
                    return Err(ReplicateFailure {
                        replicate: replicate as u32,
                        detail,
                    })
                }
            }
        }
        Ok(out)
    }
}

/// Reduced replicate statistics with optional quartiles.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ReplicateSummary {
    pub mean: f64,
    pub stderr: f64,
    pub quantiles: Option<[f64; 3]>,
}

/// Run scalar replicates in parallel and reduce in replicate order:
/// mean, standard error, and (optionally) the 25/50/75% quantiles.
pub fn run_replicates(
    count: u32,
    quantiles: bool,
    task: &(dyn Fn(u32) -> Result<f64, String> + Sync),
) -> Result<ReplicateSummary, ReplicateFailure> {
    let stats = RayonRunner.run(count, &|rep| task(rep).map(|v| vec![v]))?;
    let samples: Vec<f64> = stats.into_iter().map(|row| row[0]).collect();
    let reduced = reduce_mean_stderr(&samples);
    let quantiles = if quantiles && !samples.is_empty() {
        let mut sorted = samples;
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
        Some([
            quantile(&sorted, 0.25),
            quantile(&sorted, 0.5),
            quantile(&sorted, 0.75),
        ])
    } else {
        None
    };
    Ok(ReplicateSummary {
        mean: reduced.mean,
        stderr: reduced.stderr,
        quantiles,
    })
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Build a rayon pool with the requested width (0 = library default) and run
/// a closure inside it.
pub fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_matches_serial_bitwise() {
        use fluctlab_core::model::StreamKey;
        use fluctlab_core::runner::SerialRunner;
        let task = |rep: u32| -> Result<Vec<f64>, String> {
            let key = StreamKey::new(9, 1, rep);
            Ok(vec![key.standard_normal(0, 0), key.standard_normal(1, 3)])
        };
        let serial = SerialRunner.run(64, &task).unwrap();
        for threads in [1usize, 4, 8] {
            let parallel = with_pool(threads, || RayonRunner.run(64, &task).unwrap());
            assert_eq!(serial, parallel, "threads = {threads}");
        }
    }

    #[test]
    fn failure_is_deterministic_under_parallelism() {
        let task = |rep: u32| -> Result<Vec<f64>, String> {
            if rep % 2 == 1 {
                Err(format!("odd {rep}"))
            } else {
                Ok(vec![rep as f64])
            }
        };
        for threads in [1usize, 8] {
            let err = with_pool(threads, || RayonRunner.run(32, &task).unwrap_err());
            assert_eq!(err.replicate, 1);
        }
    }

    #[test]
    fn summary_quantiles() {
        let summary = run_replicates(101, true, &|rep| Ok(rep as f64)).unwrap();
        assert_eq!(summary.mean, 50.0);
        let q = summary.quantiles.unwrap();
        assert_eq!(q[1], 50.0);
        assert!(q[0] < q[1] && q[1] < q[2]);
        let constant = run_replicates(8, false, &|_| Ok(2.0)).unwrap();
        assert_eq!(constant.stderr, 0.0);
        assert!(constant.quantiles.is_none());
    }
}
