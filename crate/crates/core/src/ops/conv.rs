//! Grouped 2-D cross-correlation via im2col + GEMM.

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::layer::conv_extent;
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    pub groups: usize,
}

impl ConvGeometry {
    pub fn new(stride: (usize, usize), padding: (usize, usize)) -> Self {
        ConvGeometry {
            stride,
            padding,
            groups: 1,
        }
    }

    pub fn with_groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        self
    }
}

struct Dims {
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
}

impl Dims {
    fn check<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, geo: ConvGeometry) -> Result<Dims> {
        let (cin, h, w) = input.dims3()?;
        let [cout, cin_g, kh, kw] = *weights.shape() else {
            return Err(Error::shape(
                "conv",
                format!("weights must be [C_out, C_in, kh, kw], got {:?}", weights.shape()),
            ));
        };
        let groups = geo.groups.max(1);
        if cin_g * groups != cin || cout % groups != 0 {
            return Err(Error::shape(
                "conv",
                format!(
                    "input has {cin} channels but weights expect {} ({} per group x {groups} groups, {cout} outputs)",
                    cin_g * groups,
                    cin_g
                ),
            ));
        }
        let (oh, ow) = match (
            conv_extent(h, kh, geo.stride.0, geo.padding.0),
            conv_extent(w, kw, geo.stride.1, geo.padding.1),
        ) {
            (Some(oh), Some(ow)) => (oh, ow),
            _ => {
                return Err(Error::shape(
                    "conv",
                    format!(
                        "padded input {}x{} smaller than kernel {kh}x{kw}",
                        h + 2 * geo.padding.0,
                        w + 2 * geo.padding.1
                    ),
                ))
            }
        };
        Ok(Dims {
            cin,
            h,
            w,
            cout,
            kh,
            kw,
            oh,
            ow,
        })
    }

    fn is_pointwise(&self, geo: ConvGeometry) -> bool {
        self.kh == 1 && self.kw == 1 && geo.stride == (1, 1) && geo.padding == (0, 0)
    }
}

/// Unfold the input into `[C_in * kh * kw, oh * ow]` patch columns.
fn im2col<'a, T: Scalar>(input: &'a Tensor<T>, d: &Dims, geo: ConvGeometry) -> Cow<'a, [T]> {
    if d.is_pointwise(geo) {
        return Cow::Borrowed(input.data());
    }
    let (sh, sw) = geo.stride;
    let (ph, pw) = geo.padding;
    let positions = d.oh * d.ow;
    let src = input.data();
    let mut cols = vec![T::zero(); d.cin * d.kh * d.kw * positions];
    let mut row = 0;
    for c in 0..d.cin {
        let plane = &src[c * d.h * d.w..(c + 1) * d.h * d.w];
        for ky in 0..d.kh {
            for kx in 0..d.kw {
                let dst = &mut cols[row * positions..(row + 1) * positions];
                for oy in 0..d.oh {
                    let iy = (oy * sh + ky) as isize - ph as isize;
                    if iy < 0 || iy >= d.h as isize {
                        continue;
                    }
                    let src_row = &plane[iy as usize * d.w..(iy as usize + 1) * d.w];
                    let out_row = &mut dst[oy * d.ow..(oy + 1) * d.ow];
                    for (ox, slot) in out_row.iter_mut().enumerate() {
                        let ix = (ox * sw + kx) as isize - pw as isize;
                        if ix >= 0 && ix < d.w as isize {
                            *slot = src_row[ix as usize];
                        }
                    }
                }
                row += 1;
            }
        }
    }
    Cow::Owned(cols)
}

/// Fold patch-column gradients back onto the input grid (adjoint of im2col).
fn col2im<T: Scalar>(cols: &[T], d: &Dims, geo: ConvGeometry) -> Vec<T> {
    let (sh, sw) = geo.stride;
    let (ph, pw) = geo.padding;
    let positions = d.oh * d.ow;
    let mut out = vec![T::zero(); d.cin * d.h * d.w];
    let mut row = 0;
    for c in 0..d.cin {
        let plane = &mut out[c * d.h * d.w..(c + 1) * d.h * d.w];
        for ky in 0..d.kh {
            for kx in 0..d.kw {
                let src = &cols[row * positions..(row + 1) * positions];
                for oy in 0..d.oh {
                    let iy = (oy * sh + ky) as isize - ph as isize;
                    if iy < 0 || iy >= d.h as isize {
                        continue;
                    }
                    let dst_row = &mut plane[iy as usize * d.w..(iy as usize + 1) * d.w];
                    for ox in 0..d.ow {
                        let ix = (ox * sw + kx) as isize - pw as isize;
                        if ix >= 0 && ix < d.w as isize {
                            dst_row[ix as usize] += src[oy * d.ow + ox];
                        }
                    }
                }
                row += 1;
            }
        }
    }
    out
}

/// Cross-correlate `input: [C_in, H, W]` with `weights: [C_out, C_in / groups, kh, kw]`
/// and add `bias: [C_out]`.
pub fn conv_forward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    geo: ConvGeometry,
) -> Result<Tensor<T>> {
    let d = Dims::check(input, weights, geo)?;
    if bias.len() != d.cout {
        return Err(Error::shape(
            "conv",
            format!("bias has {} entries for {} outputs", bias.len(), d.cout),
        ));
    }
    let groups = geo.groups.max(1);
    let cols = im2col(input, &d, geo);
    let positions = d.oh * d.ow;
    let k_g = d.cin / groups * d.kh * d.kw;
    let cout_g = d.cout / groups;

    let mut out = vec![T::zero(); d.cout * positions];
    for (co, chunk) in out.chunks_mut(positions).enumerate() {
        chunk.fill(bias.data()[co]);
    }
    for g in 0..groups {
        T::gemm(
            cout_g,
            k_g,
            positions,
            T::one(),
            &weights.data()[g * cout_g * k_g..(g + 1) * cout_g * k_g],
            (k_g as isize, 1),
            &cols[g * k_g * positions..(g + 1) * k_g * positions],
            (positions as isize, 1),
            T::one(),
            &mut out[g * cout_g * positions..(g + 1) * cout_g * positions],
            (positions as isize, 1),
        );
    }
    Tensor::new([d.cout, d.oh, d.ow], out)
}

pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Gradients of [`conv_forward`] with respect to input, weights and bias.
pub fn conv_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    grad_out: &Tensor<T>,
    geo: ConvGeometry,
) -> Result<ConvGrads<T>> {
    let d = Dims::check(input, weights, geo)?;
    if grad_out.shape() != [d.cout, d.oh, d.ow] {
        return Err(Error::shape(
            "conv backward",
            format!(
                "upstream gradient {:?} vs output {:?}",
                grad_out.shape(),
                [d.cout, d.oh, d.ow]
            ),
        ));
    }
    let groups = geo.groups.max(1);
    let cols = im2col(input, &d, geo);
    let positions = d.oh * d.ow;
    let k_g = d.cin / groups * d.kh * d.kw;
    let cout_g = d.cout / groups;
    let g_out = grad_out.data();

    let grad_bias: Vec<T> = g_out.chunks(positions).map(|c| c.iter().copied().sum()).collect();

    let mut grad_w = vec![T::zero(); weights.len()];
    let mut grad_cols = vec![T::zero(); d.cin * d.kh * d.kw * positions];
    for g in 0..groups {
        let g_out_g = &g_out[g * cout_g * positions..(g + 1) * cout_g * positions];
        let cols_g = &cols[g * k_g * positions..(g + 1) * k_g * positions];
        // dW_g = dY_g * cols_g^T
        T::gemm(
            cout_g,
            positions,
            k_g,
            T::one(),
            g_out_g,
            (positions as isize, 1),
            cols_g,
            (1, positions as isize),
            T::zero(),
            &mut grad_w[g * cout_g * k_g..(g + 1) * cout_g * k_g],
            (k_g as isize, 1),
        );
        // dcols_g = W_g^T * dY_g
        T::gemm(
            k_g,
            cout_g,
            positions,
            T::one(),
            &weights.data()[g * cout_g * k_g..(g + 1) * cout_g * k_g],
            (1, k_g as isize),
            g_out_g,
            (positions as isize, 1),
            T::zero(),
            &mut grad_cols[g * k_g * positions..(g + 1) * k_g * positions],
            (positions as isize, 1),
        );
    }
    let grad_input = if d.is_pointwise(geo) {
        grad_cols
    } else {
        col2im(&grad_cols, &d, geo)
    };
    Ok(ConvGrads {
        input: Tensor::new([d.cin, d.h, d.w], grad_input)?,
        weights: Tensor::new(weights.shape().to_vec(), grad_w)?,
        bias: Tensor::new([d.cout], grad_bias)?,
    })
}
