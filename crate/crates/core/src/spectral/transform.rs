use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C;
use rustfft::{Fft, FftPlanner};

use super::GridKind;

const LANE_BATCH: usize = 64;

struct AxisPlan {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `e^{-iξ_k x_0} Δx / √(2π)`, applied after the forward FFT.
    fwd_phase: Vec<C>,
    /// `e^{+iξ_k x_0} Δk / √(2π)`, applied before the inverse FFT.
    inv_phase: Vec<C>,
}

pub(crate) struct RadialPlan {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `w_m (i/2) e^{-iπm/2n}` for `m = 1..=n`.
    fwd_twiddle: Vec<C>,
    /// `e^{iπj/2n}` for `j = 0..2n`.
    inv_twiddle: Vec<C>,
    /// Orthonormal DST-II weights `w_m`.
    weights: Vec<f64>,
}

pub(crate) struct Plans {
    axes: Vec<AxisPlan>,
    radial: Option<RadialPlan>,
}

impl Plans {
    pub(crate) fn new(kind: GridKind, dims: &[usize], extents: &[f64], shifts: &[f64]) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        if kind == GridKind::Radial {
            return Self { axes: Vec::new(), radial: Some(RadialPlan::new(dims[0], &mut planner)) };
        }
        let axes = dims
            .iter()
            .zip(extents)
            .zip(shifts)
            .map(|((&n, &a), &shift)| {
                let dx = 2.0 * a / n as f64;
                let dk = 2.0 * PI / (n as f64 * dx);
                let x0 = shift * dx - a;
                let norm_x = dx / (2.0 * PI).sqrt();
                let norm_k = dk / (2.0 * PI).sqrt();
                let xi = |k: usize| {
                    let s = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
                    s * dk
                };
                AxisPlan {
                    fwd: planner.plan_fft_forward(n),
                    inv: planner.plan_fft_inverse(n),
                    fwd_phase: (0..n).map(|k| C::from_polar(norm_x, -xi(k) * x0)).collect(),
                    inv_phase: (0..n).map(|k| C::from_polar(norm_k, xi(k) * x0)).collect(),
                }
            })
            .collect();
        Self { axes, radial: None }
    }

    pub(crate) fn forward(&self, dims: &[usize], data: &mut [C]) {
        if let Some(r) = &self.radial {
            r.forward(data);
            return;
        }
        for (axis, plan) in self.axes.iter().enumerate() {
            process_axis(data, dims, axis, &plan.fwd, None, Some(&plan.fwd_phase));
        }
    }

    pub(crate) fn inverse(&self, dims: &[usize], data: &mut [C]) {
        if let Some(r) = &self.radial {
            r.inverse(data);
            return;
        }
        for (axis, plan) in self.axes.iter().enumerate() {
            process_axis(data, dims, axis, &plan.inv, Some(&plan.inv_phase), None);
        }
    }
}

fn process_axis(
    data: &mut [C],
    dims: &[usize],
    axis: usize,
    fft: &Arc<dyn Fft<f64>>,
    pre: Option<&[C]>,
    post: Option<&[C]>,
) {
    let n = dims[axis];
    let stride: usize = dims[axis + 1..].iter().product();
    let block = n * stride;
    let mut scratch = vec![C::default(); fft.get_inplace_scratch_len()];
    let scale = |lanes: &mut [C], table: Option<&[C]>| {
        if let Some(t) = table {
            for lane in lanes.chunks_exact_mut(n) {
                for (v, s) in lane.iter_mut().zip(t) {
                    *v *= s;
                }
            }
        }
    };
    if stride == 1 {
        scale(data, pre);
        fft.process_with_scratch(data, &mut scratch);
        scale(data, post);
        return;
    }
    let batch = LANE_BATCH.min(stride);
    let mut buf = vec![C::default(); batch * n];
    for chunk in data.chunks_exact_mut(block) {
        let mut l0 = 0;
        while l0 < stride {
            let lanes = batch.min(stride - l0);
            let buf = &mut buf[..lanes * n];
            for k in 0..n {
                let row = &chunk[k * stride + l0..k * stride + l0 + lanes];
                for (l, v) in row.iter().enumerate() {
                    buf[l * n + k] = *v;
                }
            }
            scale(buf, pre);
            fft.process_with_scratch(buf, &mut scratch);
            scale(buf, post);
            for k in 0..n {
                let row = &mut chunk[k * stride + l0..k * stride + l0 + lanes];
                for (l, v) in row.iter_mut().enumerate() {
                    *v = buf[l * n + k];
                }
            }
            l0 += lanes;
        }
    }
}

impl RadialPlan {
    fn new(n: usize, planner: &mut FftPlanner<f64>) -> Self {
        let nf = n as f64;
        let weights: Vec<f64> = (1..=n)
            .map(|m| if m == n { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() })
            .collect();
        let fwd_twiddle = (1..=n)
            .map(|m| C::new(0.0, 0.5) * C::from_polar(weights[m - 1], -PI * m as f64 / (2.0 * nf)))
            .collect();
        let inv_twiddle = (0..2 * n).map(|j| C::from_polar(1.0, PI * j as f64 / (2.0 * nf))).collect();
        Self {
            n,
            fwd: planner.plan_fft_forward(2 * n),
            inv: planner.plan_fft_inverse(2 * n),
            fwd_twiddle,
            inv_twiddle,
            weights,
        }
    }

    pub(crate) fn forward(&self, x: &mut [C]) {
        let n = self.n;
        let mut buf = vec![C::default(); 2 * n];
        for k in 0..n {
            buf[k] = x[k];
            buf[2 * n - 1 - k] = -x[k];
        }
        self.fwd.process(&mut buf);
        for m in 1..=n {
            x[m - 1] = self.fwd_twiddle[m - 1] * buf[m];
        }
    }

    pub(crate) fn inverse(&self, c: &mut [C]) {
        let n = self.n;
        let mut buf = vec![C::default(); 2 * n];
        for m in 1..n {
            let d = c[m - 1] * self.weights[m - 1];
            buf[m] = d * self.inv_twiddle[m];
            buf[2 * n - m] = d * self.inv_twiddle[2 * n - m];
        }
        buf[n] = c[n - 1] * (2.0 * self.weights[n - 1]) * self.inv_twiddle[n];
        self.inv.process(&mut buf);
        let inv_2i = C::new(0.0, -0.5);
        for k in 0..n {
            c[k] = buf[k] * inv_2i;
        }
    }
}

/// Orthonormal DST-II: `S_m = w_m Σ_k x_k sin(πm(2k+1)/2n)`, `m = 1..=n`,
/// returned at index `m - 1`.
pub fn dst2_orthonormal(x: &[C]) -> Vec<C> {
    let mut planner = FftPlanner::new();
    let plan = RadialPlan::new(x.len(), &mut planner);
    let mut out = x.to_vec();
    plan.forward(&mut out);
    out
}

/// Inverse of [`dst2_orthonormal`] (orthonormal DST-III).
pub fn dst3_orthonormal(c: &[C]) -> Vec<C> {
    let mut planner = FftPlanner::new();
    let plan = RadialPlan::new(c.len(), &mut planner);
    let mut out = c.to_vec();
    plan.inverse(&mut out);
    out
}
