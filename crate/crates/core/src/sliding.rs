//! Sliding-window reference evaluation.
//!
//! Every output location of a fully-convolutional network depends on a
//! bounded input region. The oracle crops that region independently for each
//! location, pads it where it meets the true input border, and runs the
//! network with valid (unpadded) operations on the crop alone. Nothing is
//! shared between windows except the weights, which are borrowed from the
//! dense network so both paths are weight-identical by construction.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::layer::{LayerKind, PoolSpec};
use crate::network::Network;
use crate::ops::{self, ConvGeometry};
use crate::tensor::{Scalar, Tensor};

/// Input region read by one output location (clipped to the input).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub output: (usize, usize),
    pub rows: (usize, usize),
    pub cols: (usize, usize),
}

/// Per-layer padding needed by one window along one axis, plus the input crop.
#[derive(Debug, Clone)]
struct AxisPlan {
    crop: (usize, usize),
    pads: Vec<(usize, usize)>,
}

pub struct SlidingWindowOracle<'a, T: Scalar = f32> {
    net: &'a Network<T>,
}

impl<'a, T: Scalar> SlidingWindowOracle<'a, T> {
    pub fn new(net: &'a Network<T>) -> Self {
        SlidingWindowOracle { net }
    }

    pub fn network(&self) -> &'a Network<T> {
        self.net
    }

    /// One window per output location of the full network.
    pub fn windows(&self, input_shape: [usize; 3]) -> Result<Vec<Window>> {
        let end = self.net.spec().layers.len();
        let shapes = self.net.spec().propagate(input_shape)?;
        let [_, gh, gw] = shapes[end];
        let mut out = Vec::with_capacity(gh * gw);
        for oy in 0..gh {
            let rows = self.plan_axis(&shapes, 0, oy, end);
            for ox in 0..gw {
                let cols = self.plan_axis(&shapes, 1, ox, end);
                out.push(Window {
                    output: (oy, ox),
                    rows: rows.crop,
                    cols: cols.crop,
                });
            }
        }
        Ok(out)
    }

    /// Softmax grid computed window by window; same shape as
    /// [`Network::forward`].
    pub fn predict(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.predict_until(input, self.net.spec().layers.len())
    }

    /// Output of layers `0..end`, assembled from independent windows.
    pub fn predict_until(&self, input: &Tensor<T>, end: usize) -> Result<Tensor<T>> {
        self.predict_threaded(input, end, 1)
    }

    /// [`predict_until`](Self::predict_until) with the output rows split
    /// across `threads` worker threads.
    pub fn predict_threaded(&self, input: &Tensor<T>, end: usize, threads: usize) -> Result<Tensor<T>> {
        let (c, h, w) = input.dims3()?;
        let end = end.min(self.net.spec().layers.len());
        let shapes = self.net.spec().propagate([c, h, w])?;
        let [oc, gh, gw] = shapes[end];
        let row_plans: Vec<AxisPlan> = (0..gh).map(|o| self.plan_axis(&shapes, 0, o, end)).collect();
        let col_plans: Vec<AxisPlan> = (0..gw).map(|o| self.plan_axis(&shapes, 1, o, end)).collect();
        let run_rows = |rows: std::ops::Range<usize>| -> Result<Vec<Vec<T>>> {
            let mut out = Vec::with_capacity(rows.len() * gw);
            for oy in rows {
                for cols in &col_plans {
                    let v = self.run_window(input, &row_plans[oy], cols, end)?;
                    let (vc, vh, vw) = v.dims3()?;
                    if (vc, vh, vw) != (oc, 1, 1) {
                        return Err(Error::shape(
                            "sliding window",
                            format!("window produced {vc}x{vh}x{vw}, expected {oc}x1x1"),
                        ));
                    }
                    out.push(v.into_data());
                }
            }
            Ok(out)
        };
        let threads = threads.clamp(1, gh.max(1));
        let vectors = if threads == 1 {
            run_rows(0..gh)?
        } else {
            let per = gh.div_ceil(threads);
            std::thread::scope(|scope| {
                let handles: Vec<_> = (0..gh)
                    .step_by(per)
                    .map(|start| {
                        let run_rows = &run_rows;
                        scope.spawn(move || run_rows(start..(start + per).min(gh)))
                    })
                    .collect();
                let mut all = Vec::with_capacity(gh * gw);
                for handle in handles {
                    all.extend(handle.join().expect("sliding worker panicked")?);
                }
                Ok::<_, Error>(all)
            })?
        };
        let plane = gh * gw;
        let mut out = vec![T::zero(); oc * plane];
        for (loc, v) in vectors.into_iter().enumerate() {
            for (ch, val) in v.into_iter().enumerate() {
                out[ch * plane + loc] = val;
            }
        }
        Tensor::new([oc, gh, gw], out)
    }

    /// Walk backwards from output location `o` to find, per layer, the input
    /// range it reads and how far that range sticks out past the real data.
    fn plan_axis(&self, shapes: &[[usize; 3]], axis: usize, o: usize, end: usize) -> AxisPlan {
        let layers = &self.net.spec().layers;
        let mut lo = o as isize;
        let mut hi = o as isize;
        let mut pads = vec![(0, 0); end];
        for i in (0..end).rev() {
            let Some((k, s, p)) = layers[i].kind.window(axis) else {
                continue;
            };
            let n = shapes[i][axis + 1] as isize;
            let lo_in = lo * s as isize - p as isize;
            let hi_in = hi * s as isize - p as isize + k as isize - 1;
            let a = lo_in.max(0);
            let b = hi_in.min(n - 1);
            pads[i] = ((a - lo_in) as usize, (hi_in - b) as usize);
            lo = a;
            hi = b;
        }
        AxisPlan {
            crop: (lo as usize, hi as usize),
            pads,
        }
    }

    fn run_window(&self, input: &Tensor<T>, rows: &AxisPlan, cols: &AxisPlan, end: usize) -> Result<Tensor<T>> {
        let mut x = input.crop(
            rows.crop.0,
            cols.crop.0,
            rows.crop.1 - rows.crop.0 + 1,
            cols.crop.1 - cols.crop.0 + 1,
        )?;
        for (i, layer) in self.net.spec().layers[..end].iter().enumerate() {
            let pads = (rows.pads[i].0, rows.pads[i].1, cols.pads[i].0, cols.pads[i].1);
            x = match &layer.kind {
                LayerKind::Conv(c) => {
                    let p = self.net.params()[i].as_ref().expect("conv params");
                    let geo = ConvGeometry::new(c.stride, (0, 0)).with_groups(c.groups);
                    let y = ops::conv_forward(&x.pad(pads, T::zero())?, &p.weights, &p.bias, geo)?;
                    if c.relu {
                        ops::relu(&y)
                    } else {
                        y
                    }
                }
                LayerKind::MaxPool(p) => {
                    let valid = PoolSpec::new(p.kernel, p.stride);
                    ops::maxpool_forward(&x.pad(pads, T::neg_infinity())?, &valid)?.0
                }
                LayerKind::AvgPool(p) => {
                    let valid = PoolSpec::new(p.kernel, p.stride);
                    ops::avgpool_forward(&x.pad(pads, T::zero())?, &valid)?
                }
                LayerKind::Lrn(p) => ops::lrn_forward(&x, p)?.0,
                LayerKind::Relu => ops::relu(&x),
                LayerKind::Dropout { .. } => x,
                LayerKind::Softmax => ops::softmax(&x)?,
            };
        }
        Ok(x)
    }

    /// Human-readable description: one line per layer (as evaluated on each
    /// crop) and the window count for `input_shape`.
    pub fn describe(&self, input_shape: [usize; 3]) -> Result<String> {
        let windows = self.windows(input_shape)?;
        let mut s = String::new();
        let first = windows[0];
        let _ = writeln!(
            s,
            "sliding-window evaluation of {}: {} windows, first crop rows {}..={} cols {}..={}",
            self.net.spec().name,
            windows.len(),
            first.rows.0,
            first.rows.1,
            first.cols.0,
            first.cols.1
        );
        for layer in &self.net.spec().layers {
            let note = match &layer.kind {
                LayerKind::Conv(c) if c.kernel == (1, 1) => "fully-connected over the window",
                LayerKind::Conv(_) | LayerKind::MaxPool(_) | LayerKind::AvgPool(_) => {
                    "valid, border padding applied per crop"
                }
                _ => "unchanged",
            };
            let _ = writeln!(s, "  {:<8} {:<10} {}", layer.name, layer.kind.tag(), note);
        }
        Ok(s)
    }
}
