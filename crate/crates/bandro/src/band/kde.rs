//! Kernel-density-estimation confidence band for multivariate densities.
//!
//! The band is the KDE shifted up and down by a half-width `delta`, truncated
//! to a compact box: `l = max(0, p_h - delta)`, `u = p_h + delta`. The
//! half-width comes either from the finite-sample uniform error bound (kernel
//! moment constants `C1`, `C2`) or from holdout validation.

use statrs::function::gamma::gamma;

use crate::band::DensityBand;
use crate::error::{Error, Result};
use crate::sample::SampleSet;
use crate::scalar::Real;
use crate::SupportBox;

/// Radial kernels `K(xi) = kappa(||xi||_2)`, normalized so the kernel
/// integrates to one in the ambient dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    /// Uniform bump on the unit ball.
    Boxcar,
    Gaussian,
    Epanechnikov,
}

/// Volume of the unit ball in `R^m`.
pub fn unit_ball_volume(m: usize) -> f64 {
    std::f64::consts::PI.powf(m as f64 / 2.0) / gamma(m as f64 / 2.0 + 1.0)
}

impl Kernel {
    pub fn parse(name: &str) -> Result<Kernel> {
        match name {
            "boxcar" => Ok(Kernel::Boxcar),
            "gaussian" => Ok(Kernel::Gaussian),
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            other => Err(Error::invalid(format!("unknown kernel '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Boxcar => "boxcar",
            Kernel::Gaussian => "gaussian",
            Kernel::Epanechnikov => "epanechnikov",
        }
    }

    /// Radial profile `kappa(t)` in dimension `m`, nonincreasing with
    /// `int_{R^m} kappa(||xi||) dxi = 1`.
    pub fn profile<T: Real>(&self, t: T, m: usize) -> T {
        debug_assert!(t >= T::zero());
        match self {
            Kernel::Boxcar => {
                if t <= T::one() {
                    T::c(1.0 / unit_ball_volume(m))
                } else {
                    T::zero()
                }
            }
            Kernel::Gaussian => {
                let norm = T::c((2.0 * std::f64::consts::PI).powf(-(m as f64) / 2.0));
                norm * (-t * t / T::c(2.0)).exp()
            }
            Kernel::Epanechnikov => {
                if t <= T::one() {
                    let norm = T::c((m as f64 + 2.0) / (2.0 * unit_ball_volume(m)));
                    norm * (T::one() - t * t)
                } else {
                    T::zero()
                }
            }
        }
    }

    /// `kappa(0)` in dimension `m`.
    pub fn at_zero(&self, m: usize) -> f64 {
        self.profile(0.0f64, m)
    }

    /// Radius beyond which the profile vanishes, if compactly supported.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            Kernel::Boxcar | Kernel::Epanechnikov => Some(1.0),
            Kernel::Gaussian => None,
        }
    }

    /// Kernel moment `int_0^inf kappa(t) t^s dt`. Analytic for the boxcar,
    /// adaptive quadrature otherwise; the Gaussian tail is cut where it is
    /// far below the quadrature tolerance.
    pub fn moment(&self, m: usize, s: f64) -> f64 {
        match self {
            Kernel::Boxcar => 1.0 / (unit_ball_volume(m) * (s + 1.0)),
            Kernel::Epanechnikov => {
                adaptive_simpson(|t| self.profile(t, m) * t.powf(s), 0.0, 1.0, 1e-10)
            }
            Kernel::Gaussian => {
                // kappa(t) <= exp(-t) for t >= 2, so [0, 42] overshoots the
                // mass beyond any 1e-10 tolerance.
                adaptive_simpson(|t| self.profile(t, m) * t.powf(s), 0.0, 42.0, 1e-10)
            }
        }
    }
}

fn adaptive_simpson(f: impl Fn(f64) -> f64 + Copy, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    fn recurse(
        f: impl Fn(f64) -> f64 + Copy,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let mid = 0.5 * (a + b);
        let left = simpson(f, a, mid);
        let right = simpson(f, mid, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, mid, left, tol / 2.0, depth - 1)
                + recurse(f, mid, b, right, tol / 2.0, depth - 1)
        }
    }
    recurse(f, a, b, simpson(f, a, b), tol, 40)
}

/// Kernel density estimate at `xi`: the average of `h^-m K((xi - x_i)/h)`
/// over the sample.
pub fn kde_eval(data: &SampleSet, kernel: Kernel, h: f64, xi: &[f64]) -> f64 {
    debug_assert!(h > 0.0, "bandwidth must be positive");
    let m = data.dim();
    debug_assert_eq!(xi.len(), m);
    let hm = h.powi(m as i32);
    let support = kernel.support_radius();
    let mut acc = 0.0;
    for p in data.points() {
        let dist2: f64 = p.iter().zip(xi).map(|(a, b)| (a - b) * (a - b)).sum();
        let t = dist2.sqrt() / h;
        if let Some(r) = support {
            if t > r {
                continue;
            }
        }
        acc += kernel.profile(t, m);
    }
    acc / (data.len() as f64 * hm)
}

/// Band half-width from the finite-sample uniform error bound:
/// `delta = C1 h^rho + C2 sqrt(log(N/alpha) / (N h^m))` with
/// `C1 = V_m C int kappa(t) t^(m+rho) dt` and
/// `C2 = 8 m sqrt(V_m U) (int kappa(t) t^(m/2) dt + 1) + 64 m^2 kappa(0)`.
///
/// Requires the bandwidth condition `h > (log(N/alpha)/N)^(1/m)`.
#[allow(clippy::too_many_arguments)]
pub fn delta_theoretical(
    holder_c: f64,
    rho: f64,
    cap: f64,
    kernel: Kernel,
    m: usize,
    n: usize,
    alpha: f64,
    h: f64,
) -> Result<f64> {
    if !(0.0 < rho && rho <= 1.0) {
        return Err(Error::invalid(format!("rho must lie in (0, 1], got {rho}")));
    }
    if holder_c <= 0.0 || cap <= 0.0 {
        return Err(Error::invalid("Holder constant and cap must be positive"));
    }
    if !(0.0..1.0).contains(&alpha) || alpha <= 0.0 {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let log_term = ((n as f64) / alpha).ln();
    let h_min = (log_term / n as f64).powf(1.0 / m as f64);
    if h <= h_min {
        return Err(Error::invalid(format!(
            "bandwidth {h} must exceed (log(N/alpha)/N)^(1/m) = {h_min:.6}"
        )));
    }
    let vm = unit_ball_volume(m);
    let mf = m as f64;
    let c1 = vm * holder_c * kernel.moment(m, mf + rho);
    let c2 = 8.0 * mf * (vm * cap).sqrt() * (kernel.moment(m, mf / 2.0) + 1.0)
        + 64.0 * mf * mf * kernel.at_zero(m);
    Ok(c1 * h.powf(rho) + c2 * (log_term / (n as f64 * h.powi(m as i32))).sqrt())
}

/// How the band half-width is chosen.
#[derive(Clone, Copy, Debug)]
pub enum DeltaSpec {
    /// Validated or user-supplied half-width.
    Explicit(f64),
    /// Half-width from the uniform error bound.
    Theoretical { holder_c: f64, rho: f64, cap: f64, alpha: f64 },
}

/// Precomputed state of a KDE band.
#[derive(Debug)]
pub struct KdeBandState {
    data: SampleSet,
    kernel: Kernel,
    h: f64,
    delta: f64,
    support: SupportBox,
}

impl KdeBandState {
    pub fn support(&self) -> &SupportBox {
        &self.support
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Hard bound on `u`: the largest possible KDE value plus the half-width.
    pub fn cap(&self) -> f64 {
        self.kernel.at_zero(self.data.dim()) / self.h.powi(self.data.dim() as i32) + self.delta
    }

    pub fn eval(&self, xi: &[f64]) -> (f64, f64) {
        let p = kde_eval(&self.data, self.kernel, self.h, xi);
        ((p - self.delta).max(0.0), p + self.delta)
    }
}

/// Build a KDE band. `support` defaults to the data bounding box inflated by
/// `3h` per side, which keeps the whole kernel mass of compact kernels inside.
pub fn build_kde_band(
    data: &SampleSet,
    kernel: Kernel,
    h: f64,
    delta: DeltaSpec,
    support: Option<SupportBox>,
) -> Result<DensityBand> {
    if h <= 0.0 {
        return Err(Error::Band(format!("bandwidth must be positive, got {h}")));
    }
    let support = match support {
        Some(b) => {
            if data.points().iter().any(|p| !b.contains(p)) {
                return Err(Error::Band("data point outside the declared support box".into()));
            }
            if b.dim() != data.dim() {
                return Err(Error::Band("support box dimension mismatch".into()));
            }
            b
        }
        None => data.bounding_box()?.inflate(3.0 * h),
    };
    let delta = match delta {
        DeltaSpec::Explicit(d) => {
            if d < 0.0 {
                return Err(Error::Band(format!("delta must be nonnegative, got {d}")));
            }
            d
        }
        DeltaSpec::Theoretical { holder_c, rho, cap, alpha } => {
            delta_theoretical(holder_c, rho, cap, kernel, data.dim(), data.len(), alpha, h)?
        }
    };
    Ok(DensityBand::kde(KdeBandState { data: data.clone(), kernel, h, delta, support }))
}
