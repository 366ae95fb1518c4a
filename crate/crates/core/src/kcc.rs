//! Kernel cross-correlator.
//!
//! A ridge regressor is trained over every circular shift of a 2-D sample
//! `x`. Because the kernel matrix over shifted copies is circulant, training
//! reduces to an element-wise division in the frequency domain and the
//! response of a query `z` to every shift comes out of one inverse transform.
//!
//! Shifts are reported as `(du, dv)` in (column, row) pixels with the
//! meaning `z ≈ shift(x, du, dv)`, i.e. `z(u, v) = x(u - du, v - dv)`.

use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::grid::Grid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Gaussian,
    /// Plain inner product; kept as a reference for the linear correlator.
    Linear,
}

/// Desired response over shifts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetShape {
    /// Gaussian bump with peak 1 at zero shift.
    Gaussian { std_px: f64 },
    /// 1 at zero shift, 0 elsewhere.
    OneHot,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KccParams {
    /// Ridge regularizer.
    pub lambda: f64,
    /// Gaussian kernel bandwidth on per-pixel intensity differences.
    pub sigma: f64,
    pub target: TargetShape,
    /// Half-width of the window around the peak excluded from sidelobe statistics.
    pub psr_exclusion_radius: usize,
    pub kernel: KernelKind,
}

impl Default for KccParams {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            sigma: 0.2,
            target: TargetShape::Gaussian { std_px: 1.0 },
            psr_exclusion_radius: 5,
            kernel: KernelKind::Gaussian,
        }
    }
}

impl KccParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("kcc.lambda", format!("must be >= 0, got {}", self.lambda)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config("kcc.sigma", format!("must be > 0, got {}", self.sigma)));
        }
        if let TargetShape::Gaussian { std_px } = self.target {
            if !(std_px > 0.0) {
                return Err(Error::config("kcc.target.std_px", "must be > 0"));
            }
        }
        Ok(())
    }
}

/// Target response over shifts, indexed like the response map (zero shift at
/// the origin, negative shifts wrapped to the far end).
pub fn target_response(width: usize, height: usize, shape: &TargetShape) -> Grid<f64> {
    match *shape {
        TargetShape::OneHot => Grid::from_fn(width, height, |u, v| if u == 0 && v == 0 { 1.0 } else { 0.0 }),
        TargetShape::Gaussian { std_px } => {
            let denom = 2.0 * std_px * std_px;
            Grid::from_fn(width, height, |u, v| {
                let du = wrap_signed(u, width) as f64;
                let dv = wrap_signed(v, height) as f64;
                (-(du * du + dv * dv) / denom).exp()
            })
        }
    }
}

/// Maps an index in `[0, n)` to the signed shift in `(-n/2, n/2]`.
#[inline]
pub fn wrap_signed(index: usize, n: usize) -> i64 {
    if index <= n / 2 {
        index as i64
    } else {
        index as i64 - n as i64
    }
}

/// Trained correlator. Immutable; share freely between threads.
#[derive(Clone, Debug)]
pub struct KccModel {
    width: usize,
    height: usize,
    x_spectrum: Vec<Complex<f64>>,
    alpha_spectrum: Vec<Complex<f64>>,
    x_norm_sq: f64,
    params: KccParams,
    fft: Fft2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationResult {
    /// `(du, dv)` such that the query is the training sample shifted by it.
    pub peak_shift: (i64, i64),
    pub peak_value: f64,
    pub psr: f64,
    pub response: Grid<f64>,
    /// Largest imaginary magnitude left by the inverse transform, relative to
    /// the peak magnitude.
    pub imaginary_leak: f64,
}

fn check_finite(x: &Grid<f64>, what: &str) -> Result<()> {
    if x.as_slice().iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Data(format!("{what} contains non-finite values")))
    }
}

impl KccModel {
    pub fn train(x: &Grid<f64>, params: &KccParams) -> Result<Self> {
        params.validate()?;
        check_finite(x, "training sample")?;
        let (w, h) = (x.width(), x.height());
        if w == 0 || h == 0 {
            return Err(Error::Data("empty training sample".into()));
        }
        let fft = Fft2::new(w, h);
        let x_spectrum = fft.forward_real(x.as_slice());
        let x_norm_sq: f64 = x.as_slice().iter().map(|v| v * v).sum();

        let mut kxx = kernel_correlation(&fft, &x_spectrum, &x_spectrum, x_norm_sq, x_norm_sq, params);
        fft.forward(&mut kxx);

        let y = target_response(w, h, &params.target);
        let y_spectrum = fft.forward_real(y.as_slice());
        let alpha_spectrum = y_spectrum
            .iter()
            .zip(&kxx)
            .map(|(yf, kf)| yf / (kf + params.lambda))
            .collect();

        Ok(Self {
            width: w,
            height: h,
            x_spectrum,
            alpha_spectrum,
            x_norm_sq,
            params: *params,
            fft,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn params(&self) -> &KccParams {
        &self.params
    }

    pub fn x_spectrum(&self) -> &[Complex<f64>] {
        &self.x_spectrum
    }

    pub fn alpha_spectrum(&self) -> &[Complex<f64>] {
        &self.alpha_spectrum
    }

    pub fn x_norm_sq(&self) -> f64 {
        self.x_norm_sq
    }

    /// Dual coefficients `α` in the shift domain.
    pub fn alpha(&self) -> Grid<f64> {
        let mut a = self.alpha_spectrum.clone();
        self.fft.inverse(&mut a);
        Grid::from_vec(self.width, self.height, a.iter().map(|c| c.re).collect())
    }

    /// Response of `z` to every circular shift.
    pub fn response(&self, z: &Grid<f64>) -> Result<(Grid<f64>, f64)> {
        if z.width() != self.width || z.height() != self.height {
            return Err(Error::config(
                "kcc",
                format!(
                    "query is {}x{} but the model was trained on {}x{}",
                    z.width(),
                    z.height(),
                    self.width,
                    self.height
                ),
            ));
        }
        check_finite(z, "query sample")?;
        let z_spectrum = self.fft.forward_real(z.as_slice());
        let z_norm_sq: f64 = z.as_slice().iter().map(|v| v * v).sum();
        let mut kzx = kernel_correlation(
            &self.fft,
            &z_spectrum,
            &self.x_spectrum,
            z_norm_sq,
            self.x_norm_sq,
            &self.params,
        );
        self.fft.forward(&mut kzx);
        for (k, a) in kzx.iter_mut().zip(&self.alpha_spectrum) {
            *k *= a.conj();
        }
        self.fft.inverse(&mut kzx);
        let peak = kzx.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
        let imag = kzx.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        let leak = if peak > 0.0 { imag / peak } else { imag };
        Ok((
            Grid::from_vec(self.width, self.height, kzx.iter().map(|c| c.re).collect()),
            leak,
        ))
    }

    pub fn detect(&self, z: &Grid<f64>) -> Result<CorrelationResult> {
        let (response, imaginary_leak) = self.response(z)?;
        let (peak_index, peak_value) = argmax(response.as_slice());
        let (pu, pv) = (peak_index % self.width, peak_index / self.width);
        let psr = psr(&response, (pu, pv), self.params.psr_exclusion_radius);
        Ok(CorrelationResult {
            peak_shift: (wrap_signed(pu, self.width), wrap_signed(pv, self.height)),
            peak_value,
            psr,
            response,
            imaginary_leak,
        })
    }
}

/// Kernel values `k(z, shift(x, d))` for every shift `d`, as a complex buffer
/// ready for the forward transform.
fn kernel_correlation(
    fft: &Fft2,
    z_spectrum: &[Complex<f64>],
    x_spectrum: &[Complex<f64>],
    z_norm_sq: f64,
    x_norm_sq: f64,
    params: &KccParams,
) -> Vec<Complex<f64>> {
    let mut corr: Vec<Complex<f64>> = z_spectrum
        .iter()
        .zip(x_spectrum)
        .map(|(z, x)| z * x.conj())
        .collect();
    fft.inverse(&mut corr);
    let n = corr.len() as f64;
    match params.kernel {
        KernelKind::Linear => {
            for c in corr.iter_mut() {
                *c = Complex::new(c.re / n, 0.0);
            }
        }
        KernelKind::Gaussian => {
            let scale = 1.0 / (params.sigma * params.sigma * n);
            for c in corr.iter_mut() {
                let dist = (z_norm_sq + x_norm_sq - 2.0 * c.re).max(0.0);
                *c = Complex::new((-dist * scale).exp(), 0.0);
            }
        }
    }
    corr
}

/// First maximum in row-major order.
fn argmax(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
}

/// Peak-to-sidelobe ratio `(peak - mean_s) / std_s`, with sidelobe statistics
/// taken outside the `(2r+1)^2` window centred (circularly) on the peak.
/// Returns `+inf` when the sidelobe is flat.
pub fn psr(response: &Grid<f64>, peak: (usize, usize), exclusion_radius: usize) -> f64 {
    let (w, h) = (response.width(), response.height());
    let r = exclusion_radius as i64;
    let excluded = |u: usize, v: usize| {
        let du = wrap_signed((u + w - peak.0) % w, w).abs();
        let dv = wrap_signed((v + h - peak.1) % h, h).abs();
        du <= r && dv <= r
    };
    let mut count = 0usize;
    let mut sum = 0.0;
    for v in 0..h {
        for u in 0..w {
            if !excluded(u, v) {
                sum += *response.get(u, v);
                count += 1;
            }
        }
    }
    let peak_value = *response.get(peak.0, peak.1);
    if count == 0 {
        return f64::INFINITY;
    }
    let mean = sum / count as f64;
    let mut var = 0.0;
    for v in 0..h {
        for u in 0..w {
            if !excluded(u, v) {
                let d = *response.get(u, v) - mean;
                var += d * d;
            }
        }
    }
    let std = (var / count as f64).sqrt();
    if std <= f64::EPSILON * peak_value.abs().max(mean.abs()).max(f64::MIN_POSITIVE) {
        return f64::INFINITY;
    }
    (peak_value - mean) / std
}
