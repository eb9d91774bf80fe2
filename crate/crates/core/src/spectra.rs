//! Excitation spectra: dispersion oracles for the homogeneous lattice and
//! numeric frequency extraction from evolved fluctuation fields.
//!
//! Two squared-frequency forms ride along for comparison and are tagged
//! [`Interpretation::AngularFrequencySquared`]; they are reported as given and
//! never square-rooted, because on the lattice they do not agree with the
//! Bogoliubov frequency outside the long-wavelength limit.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::{Boundary, ComplexField, LatticeGrid};
use crate::scalar::{C, Real};

/// How a dispersion column is to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpretation {
    AngularFrequency,
    /// A squared frequency; comparing it against a measured `omega` requires
    /// squaring the measurement, not rooting this value.
    AngularFrequencySquared,
}

/// One wavevector's worth of measured and predicted dispersion data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionPoint<T: Real> {
    /// Integer mode numbers per axis (`k_l = 2 pi m_l / (L_l a)`).
    pub modes: [i64; 3],
    pub k: [T; 3],
    pub omega_measured: T,
    pub omega_oracle: T,
    /// Site-basis squared-frequency form, [`Interpretation::AngularFrequencySquared`].
    pub v_lattice: T,
    /// Long-wavelength squared-frequency form, same interpretation.
    pub v_bogoliubov: T,
}

impl<T: Real> DispersionPoint<T> {
    pub const fn omega_interpretation() -> Interpretation {
        Interpretation::AngularFrequency
    }

    pub const fn v_interpretation() -> Interpretation {
        Interpretation::AngularFrequencySquared
    }
}

fn half_angle_sin2<T: Real>(k: T, a: T) -> T {
    let two = T::one() + T::one();
    let s = (k * a / two).sin();
    s * s
}

/// Single-particle lattice band `eps_k = sum_l 4 J sin^2(k_l a / 2)`.
pub fn lattice_band<T: Real>(k: &[T], a: T, j: T) -> T {
    let four = T::of(4.0);
    k.iter().fold(T::zero(), |acc, &kl| acc + four * j * half_angle_sin2(kl, a))
}

/// Bogoliubov frequency on the lattice, `omega = sqrt(eps_k (eps_k + 2 U n))`.
///
/// This is the oracle the measured frequencies are held against.
pub fn bdg_oracle<T: Real>(k: &[T], a: T, j: T, u: T, n0: T) -> T {
    let eps = lattice_band(k, a, j);
    let two = T::one() + T::one();
    (eps * (eps + two * u * n0)).sqrt()
}

/// Same frequency through the 2x2 eigenproblem of the linearized mode pair
/// `(u_k, v_k)`: the matrix `[[eps + U n, U n], [-U n, -(eps + U n)]]` is
/// traceless, so its eigenvalues come out of the quadratic formula as
/// `+-sqrt(-det)`. Kept as an independent arithmetic route to [`bdg_oracle`].
pub fn bdg_oracle_matrix<T: Real>(k: &[T], a: T, j: T, u: T, n0: T) -> T {
    let eps = lattice_band(k, a, j);
    let un = u * n0;
    let m = [[eps + un, un], [-un, -(eps + un)]];
    let trace = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let two = T::one() + T::one();
    let four = two * two;
    // lambda = (tr +- sqrt(tr^2 - 4 det)) / 2
    (trace + (trace * trace - four * det).sqrt()) / two
}

/// Site-basis squared-frequency form
/// `V(k) = sum_l [4 n U J sin^2(k_l a/2) + 4 J^2 sin^4(k_l a/2)]`.
///
/// Reported as a squared frequency and never rooted; it undercounts the
/// quartic band term relative to [`bdg_oracle`] away from small `k`.
pub fn lattice_dispersion<T: Real>(k: &[T], a: T, j: T, u: T, n0: T) -> T {
    let four = T::of(4.0);
    k.iter().fold(T::zero(), |acc, &kl| {
        let s2 = half_angle_sin2(kl, a);
        acc + four * n0 * u * j * s2 + four * j * j * s2 * s2
    })
}

/// Long-wavelength limit `V_B(k) = sum_l (n U J a^2 + J^2 a^4 k_l^2 / 4) k_l^2`,
/// also a squared frequency.
pub fn bogoliubov_limit<T: Real>(k: &[T], a: T, j: T, u: T, n0: T) -> T {
    let a2 = a * a;
    let four = T::of(4.0);
    k.iter().fold(T::zero(), |acc, &kl| {
        let k2 = kl * kl;
        acc + (n0 * u * j * a2 + j * j * a2 * a2 * k2 / four) * k2
    })
}

/// In-place forward/inverse FFT along every grid axis. The inverse carries the
/// `1/N` normalization so a forward/inverse pair is the identity.
pub struct AxisFft<T: Real + rustfft::FftNum> {
    grid: LatticeGrid<T>,
    forward: Vec<Arc<dyn rustfft::Fft<T>>>,
    inverse: Vec<Arc<dyn rustfft::Fft<T>>>,
    line: Vec<C<T>>,
}

impl<T: Real + rustfft::FftNum> AxisFft<T> {
    pub fn new(grid: LatticeGrid<T>) -> Self {
        let mut planner = rustfft::FftPlanner::new();
        let mut forward = Vec::new();
        let mut inverse = Vec::new();
        let mut max_ext = 0;
        for axis in 0..grid.dims() {
            let ext = grid.extent(axis);
            forward.push(planner.plan_fft_forward(ext));
            inverse.push(planner.plan_fft_inverse(ext));
            max_ext = max_ext.max(ext);
        }
        let line = vec![C::new(T::zero(), T::zero()); max_ext];
        Self { grid, forward, inverse, line }
    }

    pub fn grid(&self) -> &LatticeGrid<T> {
        &self.grid
    }

    fn apply(&mut self, buf: &mut [C<T>], inv: bool) {
        assert_eq!(buf.len(), self.grid.site_count(), "buffer does not match grid");
        for axis in 0..self.grid.dims() {
            let ext = self.grid.extent(axis);
            let stride = self.grid.strides()[axis];
            let plan = if inv { &self.inverse[axis] } else { &self.forward[axis] };
            let scale = if inv { T::of(ext as f64).recip() } else { T::one() };
            for site in 0..buf.len() {
                if self.grid.coords(site)[axis] != 0 {
                    continue;
                }
                for i in 0..ext {
                    self.line[i] = buf[site + i * stride];
                }
                plan.process(&mut self.line[..ext]);
                for i in 0..ext {
                    buf[site + i * stride] = self.line[i].scale(scale);
                }
            }
        }
    }

    pub fn forward(&mut self, buf: &mut [C<T>]) {
        self.apply(buf, false);
    }

    pub fn inverse(&mut self, buf: &mut [C<T>]) {
        self.apply(buf, true);
    }
}

/// Dominant angular frequency of a uniformly sampled complex signal.
///
/// Hann-windowed FFT, peak picked over both frequency signs, refined by
/// quadratic interpolation of the log power at the peak. Fails with
/// [`Error::Extraction`] when no peak stands at least 10x above the median
/// floor. A constant signal resolves cleanly to zero.
pub fn dominant_frequency<T: Real + rustfft::FftNum>(samples: &[C<T>], dt: T) -> Result<T> {
    let n = samples.len();
    if n < 8 {
        return Err(Error::Extraction {
            context: format!("need at least 8 samples, got {n}"),
        });
    }
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::config("sample interval must be positive"));
    }
    let half = T::of(0.5);
    let tau_over_n = T::of(std::f64::consts::TAU / n as f64);
    let mut buf: Vec<C<T>> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let w = half - half * (tau_over_n * T::of(i as f64)).cos();
            s.scale(w)
        })
        .collect();
    rustfft::FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let power: Vec<T> = buf.iter().map(|v| v.norm_sqr()).collect();
    let (peak, &peak_p) = power
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite power"))
        .expect("non-empty spectrum");
    if !(peak_p > T::zero()) {
        return Err(Error::Extraction {
            context: "spectrum is identically zero".into(),
        });
    }
    let mut sorted = power.clone();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite power"));
    let floor = sorted[n / 2];
    if floor > T::zero() && peak_p / floor < T::of(10.0) {
        return Err(Error::Extraction {
            context: format!(
                "peak-to-floor ratio {} is below 10; no dominant line",
                (peak_p / floor)
            ),
        });
    }

    let lm = power[(peak + n - 1) % n];
    let rp = power[(peak + 1) % n];
    let delta = if lm > T::zero() && rp > T::zero() {
        let (la, lb, lc) = (lm.ln(), peak_p.ln(), rp.ln());
        let denom = la - (lb + lb) + lc;
        if denom.abs() < T::of(1e-30) {
            T::zero()
        } else {
            (half * (la - lc) / denom).max(-half).min(half)
        }
    } else {
        T::zero()
    };

    let mut bin = T::of(peak as f64) + delta;
    let n_t = T::of(n as f64);
    if bin > n_t / (T::one() + T::one()) {
        bin -= n_t;
    }
    Ok((T::of(std::f64::consts::TAU) * bin / (n_t * dt)).abs())
}

/// Accumulates per-mode projections of the fluctuation field over a run, then
/// turns them into [`DispersionPoint`]s.
pub struct DispersionRun<T: Real> {
    grid: LatticeGrid<T>,
    dt_sample: T,
    modes: Vec<[i64; 3]>,
    /// Per mode: `conj(e^{i k . x}) / N` per site, so `record` is a plain dot.
    projectors: Vec<Vec<C<T>>>,
    samples: Vec<Vec<C<T>>>,
}

impl<T: Real> DispersionRun<T> {
    pub fn new(grid: LatticeGrid<T>, modes: &[[i64; 3]], dt_sample: T) -> Result<Self> {
        if grid.boundary() != Boundary::Periodic {
            return Err(Error::Unsupported {
                context: "mode projection needs a periodic grid".into(),
            });
        }
        if !(dt_sample > T::zero()) || !dt_sample.is_finite() {
            return Err(Error::config("sample interval must be positive"));
        }
        for m in modes {
            for axis in grid.dims()..3 {
                if m[axis] != 0 {
                    return Err(Error::config(format!(
                        "mode {m:?} excites axis {axis} beyond the grid dimension"
                    )));
                }
            }
        }
        let inv_n = T::of(grid.site_count() as f64).recip();
        let projectors = modes
            .iter()
            .map(|&m| {
                let pw = ComplexField::plane_wave(grid.clone(), m, C::new(T::one(), T::zero()));
                pw.values().iter().map(|v| v.conj().scale(inv_n)).collect()
            })
            .collect();
        Ok(Self {
            grid,
            dt_sample,
            modes: modes.to_vec(),
            projectors,
            samples: vec![Vec::new(); modes.len()],
        })
    }

    /// Project one snapshot onto every requested mode.
    pub fn record(&mut self, fluct: &ComplexField<T>) -> Result<()> {
        if fluct.grid() != &self.grid {
            return Err(Error::grid("snapshot grid differs from the projection grid"));
        }
        let vals = fluct.values();
        for (proj, series) in self.projectors.iter().zip(self.samples.iter_mut()) {
            let s = proj
                .iter()
                .zip(vals)
                .fold(C::new(T::zero(), T::zero()), |acc, (p, v)| acc + p * v);
            series.push(s);
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    /// Angular wavevector for a mode triple on this grid.
    pub fn wavevector(&self, modes: [i64; 3]) -> [T; 3] {
        let tau = T::of(std::f64::consts::TAU);
        let mut k = [T::zero(); 3];
        for axis in 0..self.grid.dims() {
            let ext = T::of(self.grid.extent(axis) as f64);
            k[axis] = tau * T::of(modes[axis] as f64) / (ext * self.grid.spacing());
        }
        k
    }

    /// Extract every mode's dominant frequency and attach the oracle columns.
    /// `j` must be the (constant) tunneling rate the run used and `n0` the
    /// homogeneous background density.
    pub fn finish(&self, j: T, u: T, n0: T) -> Result<Vec<DispersionPoint<T>>>
    where
        T: rustfft::FftNum,
    {
        let a = self.grid.spacing();
        let d = self.grid.dims();
        self.modes
            .iter()
            .zip(&self.samples)
            .map(|(&m, series)| {
                let k = self.wavevector(m);
                let omega_measured = if m == [0, 0, 0] {
                    // zero mode: the projection is constant by construction
                    dominant_frequency(series, self.dt_sample).unwrap_or(T::zero())
                } else {
                    dominant_frequency(series, self.dt_sample).map_err(|e| match e {
                        Error::Extraction { context } => Error::Extraction {
                            context: format!("mode {m:?}: {context}"),
                        },
                        other => other,
                    })?
                };
                Ok(DispersionPoint {
                    modes: m,
                    k,
                    omega_measured,
                    omega_oracle: bdg_oracle(&k[..d], a, j, u, n0),
                    v_lattice: lattice_dispersion(&k[..d], a, j, u, n0),
                    v_bogoliubov: bogoliubov_limit(&k[..d], a, j, u, n0),
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    const J: f64 = 1.0;
    const U: f64 = 0.1;
    const N0: f64 = 100.0;

    #[test]
    fn band_edge_values_by_hand() {
        let k = [std::f64::consts::PI];
        // eps(pi) = 4J, omega = sqrt(4 (4 + 20)) = sqrt(96)
        assert_relative_eq!(lattice_band(&k, 1.0, J), 4.0, max_relative = 1e-14);
        assert_relative_eq!(
            bdg_oracle(&k, 1.0, J, U, N0),
            9.797958971132712,
            max_relative = 1e-14
        );
        // 4 n U J + 4 J^2 = 44
        assert_relative_eq!(lattice_dispersion(&k, 1.0, J, U, N0), 44.0, max_relative = 1e-14);
    }

    #[test]
    fn long_wavelength_form_by_hand() {
        // (n U J + J^2 k^2 / 4) k^2 at k = 0.1 -> 0.100025
        assert_relative_eq!(
            bogoliubov_limit(&[0.1], 1.0, J, U, N0),
            0.100025,
            max_relative = 1e-14
        );
    }

    #[test]
    fn matrix_route_agrees_with_the_closed_form() {
        for i in 0..50 {
            let k = [0.3 + i as f64 * 0.06, 0.3 * (i as f64 * 0.11).sin()];
            let closed = bdg_oracle(&k, 0.7, 1.3, 0.2, 42.0);
            let matrix = bdg_oracle_matrix(&k, 0.7, 1.3, 0.2, 42.0);
            assert_relative_eq!(closed, matrix, max_relative = 1e-12);
        }
        // at eps_k << U n the matrix route cancels (eps+Un)^2 - (Un)^2 and
        // keeps only ~1e-8 relative; the closed form stays exact
        let small = [1e-3];
        assert_relative_eq!(
            bdg_oracle(&small, 0.7, 1.3, 0.2, 42.0),
            bdg_oracle_matrix(&small, 0.7, 1.3, 0.2, 42.0),
            max_relative = 1e-6
        );
    }

    #[test]
    fn small_k_is_sonic_with_speed_a_sqrt_2jnu() {
        let c = (2.0 * J * N0 * U).sqrt();
        let k = 0.01;
        assert_relative_eq!(bdg_oracle(&[k], 1.0, J, U, N0), c * k, max_relative = 1e-4);
    }

    #[test]
    fn squared_forms_agree_with_each_other_only_at_small_k() {
        let small = [0.05];
        let rel = (lattice_dispersion(&small, 1.0, J, U, N0)
            - bogoliubov_limit(&small, 1.0, J, U, N0))
        .abs()
            / bogoliubov_limit(&small, 1.0, J, U, N0);
        assert!(rel < 1e-3, "small-k mismatch {rel}");
        let edge = [std::f64::consts::PI];
        let rel = (lattice_dispersion(&edge, 1.0, J, U, N0) - bogoliubov_limit(&edge, 1.0, J, U, N0))
            .abs()
            / lattice_dispersion(&edge, 1.0, J, U, N0);
        assert!(rel > 0.5, "band-edge forms should disagree, rel = {rel}");
    }

    #[test]
    fn axis_fft_roundtrip_is_the_identity() {
        let grid = LatticeGrid::new(2, &[8, 4], 1.0, Boundary::Periodic).unwrap();
        let field: Vec<C<f64>> = (0..grid.site_count())
            .map(|s| C::new((s as f64 * 0.37).sin(), (s as f64 * 0.13).cos()))
            .collect();
        let mut buf = field.clone();
        let mut fft = AxisFft::new(grid);
        fft.forward(&mut buf);
        fft.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&field) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn axis_fft_sends_a_plane_wave_to_a_single_bin() {
        let grid = LatticeGrid::new(1, &[16], 1.0, Boundary::Periodic).unwrap();
        let pw = ComplexField::plane_wave(grid.clone(), [3, 0, 0], C::new(1.0, 0.0));
        let mut buf = pw.values().to_vec();
        let mut fft = AxisFft::new(grid);
        fft.forward(&mut buf);
        for (i, v) in buf.iter().enumerate() {
            if i == 3 {
                assert_relative_eq!(v.re, 16.0, max_relative = 1e-12);
                assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-10);
            } else {
                assert_abs_diff_eq!(v.norm(), 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn off_bin_tone_is_recovered_to_a_fraction_of_a_bin() {
        let n = 4096;
        let dt = 0.02;
        let omega = 3.37; // deliberately between bins
        let samples: Vec<C<f64>> = (0..n)
            .map(|i| C::from_polar(1.0, -omega * i as f64 * dt))
            .collect();
        let got = dominant_frequency(&samples, dt).unwrap();
        let bin = std::f64::consts::TAU / (n as f64 * dt);
        assert!((got - omega).abs() < 0.05 * bin, "got {got}, want {omega}");
    }

    #[test]
    fn two_sided_tone_reports_the_magnitude() {
        let n = 2048;
        let dt = 0.05;
        let omega = 1.91;
        let samples: Vec<C<f64>> = (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                C::from_polar(1.0, -omega * t) + C::from_polar(0.4, omega * t)
            })
            .collect();
        let got = dominant_frequency(&samples, dt).unwrap();
        assert_relative_eq!(got, omega, max_relative = 1e-3);
    }

    #[test]
    fn constant_signal_resolves_to_zero_frequency() {
        let samples = vec![C::new(0.7, -0.2); 512];
        assert_abs_diff_eq!(dominant_frequency(&samples, 0.1).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn silence_is_an_extraction_error() {
        let samples = vec![C::new(0.0, 0.0); 512];
        assert!(matches!(
            dominant_frequency(&samples, 0.1),
            Err(Error::Extraction { .. })
        ));
    }

    #[test]
    fn too_few_samples_is_an_extraction_error() {
        let samples = vec![C::new(1.0, 0.0); 4];
        assert!(matches!(
            dominant_frequency(&samples, 0.1),
            Err(Error::Extraction { .. })
        ));
    }

    #[test]
    fn projection_run_recovers_a_seeded_tone() {
        let grid = LatticeGrid::new(1, &[32], 1.0, Boundary::Periodic).unwrap();
        let mut run = DispersionRun::new(grid.clone(), &[[2, 0, 0]], 0.05).unwrap();
        let omega = 2.4;
        for i in 0..1024 {
            let t = i as f64 * 0.05;
            let amp = C::from_polar(1e-4, -omega * t);
            let snap = ComplexField::plane_wave(grid.clone(), [2, 0, 0], amp);
            run.record(&snap).unwrap();
        }
        let pts = run.finish(J, U, N0).unwrap();
        assert_eq!(pts.len(), 1);
        assert_relative_eq!(pts[0].omega_measured, omega, max_relative = 1e-3);
        let k = std::f64::consts::TAU * 2.0 / 32.0;
        assert_relative_eq!(pts[0].k[0], k, max_relative = 1e-14);
        assert_relative_eq!(pts[0].omega_oracle, bdg_oracle(&[k], 1.0, J, U, N0), max_relative = 1e-14);
    }

    #[test]
    fn modes_off_the_grid_dimension_are_rejected() {
        let grid = LatticeGrid::new(1, &[32], 1.0, Boundary::Periodic).unwrap();
        assert!(DispersionRun::new(grid, &[[1, 1, 0]], 0.05).is_err());
    }
}
