//! Dense versus sliding-window timing and equivalence.

use std::fmt;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;
use crate::sliding::SlidingWindowOracle;
use crate::tensor::Tensor;

/// Largest tolerated per-element softmax deviation between the two paths.
pub const EQUIVALENCE_TOLERANCE: f32 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub mean_ms: f64,
    pub std_ms: f64,
}

impl Timing {
    fn from_samples(ms: &[f64]) -> Self {
        let n = ms.len() as f64;
        let mean = ms.iter().sum::<f64>() / n;
        let var = ms.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Timing {
            mean_ms: mean,
            std_ms: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub net: String,
    pub input: [usize; 3],
    pub windows: usize,
    pub fcn: Timing,
    pub sliding: Timing,
    pub speedup: f64,
    pub max_dev: f32,
    /// `(class, row, col)` of the largest deviation.
    pub max_dev_at: (usize, usize, usize),
    pub passed: bool,
}

impl BenchReport {
    pub const CSV_HEADER: &'static str = "net,input,fcn_ms,sliding_ms,speedup,max_dev";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{}x{}x{},{:.3},{:.3},{:.3},{:e}",
            self.net,
            self.input[0],
            self.input[1],
            self.input[2],
            self.fcn.mean_ms,
            self.sliding.mean_ms,
            self.speedup,
            self.max_dev
        )
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [c, h, w] = self.input;
        writeln!(f, "net       {}", self.net)?;
        writeln!(f, "input     {c}x{h}x{w} ({} windows)", self.windows)?;
        writeln!(f, "dense     {:.3} ms (sd {:.3})", self.fcn.mean_ms, self.fcn.std_ms)?;
        writeln!(
            f,
            "sliding   {:.3} ms (sd {:.3})",
            self.sliding.mean_ms, self.sliding.std_ms
        )?;
        writeln!(f, "speedup   {:.2}x", self.speedup)?;
        write!(
            f,
            "max dev   {:e} at {:?} ({})",
            self.max_dev,
            self.max_dev_at,
            if self.passed { "equivalent" } else { "NOT EQUIVALENT" }
        )
    }
}

fn time_ms(mut f: impl FnMut() -> Result<Tensor<f32>>) -> Result<f64> {
    let start = Instant::now();
    let out = f()?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    std::hint::black_box(out);
    Ok(ms)
}

/// Time `runs` dense and sliding passes (after `warmup` discarded passes of
/// each) on one random input and compare their outputs. Single-threaded.
pub fn bench<R: Rng + ?Sized>(
    net: &Network<f32>,
    input_shape: [usize; 3],
    runs: usize,
    warmup: usize,
    rng: &mut R,
) -> Result<BenchReport> {
    bench_threaded(net, input_shape, runs, warmup, 1, rng)
}

/// [`bench`] with the sliding-window path spread over `threads` threads.
/// The dense path always runs on the calling thread.
pub fn bench_threaded<R: Rng + ?Sized>(
    net: &Network<f32>,
    input_shape: [usize; 3],
    runs: usize,
    warmup: usize,
    threads: usize,
    rng: &mut R,
) -> Result<BenchReport> {
    if runs < 3 {
        return Err(Error::Config(format!("need at least 3 timed runs, got {runs}")));
    }
    let input = Tensor::uniform(input_shape.to_vec(), 0.0, 1.0, rng);
    let oracle = SlidingWindowOracle::new(net);
    let end = net.spec().layers.len();
    let windows = oracle.windows(input_shape)?.len();

    let dense = net.forward(&input)?;
    let slide = oracle.predict_threaded(&input, end, threads)?;
    let (gh, gw) = (dense.shape()[1], dense.shape()[2]);
    let (mut max_dev, mut at) = (0f32, 0usize);
    for (i, (a, b)) in dense.data().iter().zip(slide.data()).enumerate() {
        let d = (a - b).abs();
        if d > max_dev || d.is_nan() {
            max_dev = d;
            at = i;
        }
    }

    for _ in 0..warmup {
        time_ms(|| net.forward(&input))?;
        time_ms(|| oracle.predict_threaded(&input, end, threads))?;
    }
    let mut fcn_ms = Vec::with_capacity(runs);
    let mut sliding_ms = Vec::with_capacity(runs);
    for _ in 0..runs {
        fcn_ms.push(time_ms(|| net.forward(&input))?);
        sliding_ms.push(time_ms(|| oracle.predict_threaded(&input, end, threads))?);
    }
    let fcn = Timing::from_samples(&fcn_ms);
    let sliding = Timing::from_samples(&sliding_ms);
    Ok(BenchReport {
        net: net.spec().name.clone(),
        input: input_shape,
        windows,
        fcn,
        sliding,
        speedup: sliding.mean_ms / fcn.mean_ms,
        max_dev,
        max_dev_at: (at / (gh * gw), (at / gw) % gh, at % gw),
        passed: max_dev <= EQUIVALENCE_TOLERANCE,
    })
}
