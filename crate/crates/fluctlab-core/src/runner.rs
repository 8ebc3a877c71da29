//! Replicate fan-out. The core only defines the contract: replicates are
//! pure functions of their index, results are collected in index order, so
//! any execution schedule produces identical bits. A serial runner lives
//! here; the host crate supplies the parallel one.

use alloc::string::String;
use alloc::vec::Vec;

use crate::math;

/// A failed replicate with its index and a rendered diagnostic.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("replicate {replicate} failed: {detail}")]
pub struct ReplicateFailure {
    pub replicate: u32,
    pub detail: String,
}

/// Executes `count` replicate tasks and returns their statistic vectors in
/// replicate order. Implementations may run tasks in any order or in
/// parallel; the returned vector must be indexed by replicate id and the
/// reported failure must be the lowest-index one.
pub trait ReplicateRunner: Sync {
    fn run(
        &self,
        count: u32,
        task: &(dyn Fn(u32) -> Result<Vec<f64>, String> + Sync),
    ) -> Result<Vec<Vec<f64>>, ReplicateFailure>;
}

/// Runs replicates one after another on the calling thread.
pub struct SerialRunner;

impl ReplicateRunner for SerialRunner {
    fn run(
        &self,
        count: u32,
        task: &(dyn Fn(u32) -> Result<Vec<f64>, String> + Sync),
    ) -> Result<Vec<Vec<f64>>, ReplicateFailure> {
        let mut out = Vec::with_capacity(count as usize);
        for replicate in 0..count {
            match task(replicate) {
                Ok(stats) => out.push(stats),
                Err(detail) => return Err(ReplicateFailure { replicate, detail }),
            }
        }
        Ok(out)
    }
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Reduced {
    pub mean: f64,
    pub stderr: f64,
}

/// Two-pass reduction in sample order; a single sample reports stderr 0.
pub fn reduce_mean_stderr(samples: &[f64]) -> Reduced {
    let n = samples.len();
    if n == 0 {
        return Reduced {
            mean: f64::NAN,
            stderr: f64::NAN,
        };
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Reduced { mean, stderr: 0.0 };
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    Reduced {
        mean,
        stderr: math::sqrt(var / n as f64),
    }
}

/// Column `col` of a replicate-major statistics matrix.
pub fn column(stats: &[Vec<f64>], col: usize) -> Vec<f64> {
    stats.iter().map(|row| row[col]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    #[test]
    fn constant_closure_has_zero_stderr() {
        let runner = SerialRunner;
        let stats = runner.run(16, &|_| Ok(vec![3.25])).unwrap();
        let red = reduce_mean_stderr(&column(&stats, 0));
        assert_eq!(red.mean, 3.25);
        assert_eq!(red.stderr, 0.0);
    }

    #[test]
    fn failure_reports_lowest_index() {
        let runner = SerialRunner;
        let err = runner
            .run(8, &|r| {
                if r >= 3 {
                    Err(format!("boom at {r}"))
                } else {
                    Ok(vec![0.0])
                }
            })
            .unwrap_err();
        assert_eq!(err.replicate, 3);
    }

    #[test]
    fn stderr_shrinks_like_inverse_sqrt_n() {
        // Doubling replicates should roughly halve stderr^2.
        let noise = |r: u32| {
            let mut x = (r as u64).wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
            x ^= x >> 33;
            x = x.wrapping_mul(0xFF51AFD7ED558CCD);
            x ^= x >> 33;
            (x >> 11) as f64 / (1u64 << 53) as f64
        };
        let a: Vec<f64> = (0..256).map(noise).collect();
        let b: Vec<f64> = (0..512).map(noise).collect();
        let ra = reduce_mean_stderr(&a);
        let rb = reduce_mean_stderr(&b);
        let ratio = (rb.stderr * rb.stderr) / (ra.stderr * ra.stderr);
        assert!((ratio - 0.5).abs() < 0.12, "ratio {ratio}");
    }
}
