//! Effective acoustic geometry: metric assembly, the line element, the wave
//! operator residual, and horizon detection.
//!
//! Long-wavelength phase fluctuations on a slowly varying background
//! propagate like a massless scalar in a curved spacetime whose metric is
//! built from the local density, velocity, and excitation speed. This module
//! assembles that metric per site (for flowing, homogeneous, expanding,
//! perturbed, and wave backgrounds), evaluates interval elements, measures
//! how well an evolved fluctuation satisfies the covariant wave equation, and
//! locates acoustic horizons where the flow crosses the local excitation
//! speed.
//!
//! All metrics here are conformally scaled with `Omega = sqrt(2 n J a^2 / U)`
//! and use signature `(-, +, ..., +)` in the subsonic region.

use crate::dynamics::{BhParams, TunnelingSchedule};
use crate::error::{Error, Result};
use crate::hydro::HydroState;
use crate::lattice::{LatticeGrid, RealField, VectorField, divergence, gradient};
use crate::scalar::Real;

/// `|det g|` below this is treated as degenerate and masked, not an error.
pub const DEGENERACY_FLOOR: f64 = 1e-12;

/// Which construction produced a metric; carried through to output files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    /// Flowing superfluid with velocity cross terms.
    Superfluid,
    /// Resting homogeneous background, diagonal.
    Homogeneous,
    /// Same diagonal form tagged as the strong-coupling density-wave regime.
    Mott,
    /// Expanding background with `exp(H t)` on the spatial block.
    Flrw,
    /// First-order perturbation `h`, or a background-plus-`h` sum.
    MinkowskiPlusH,
    /// One-dimensional wave background with an oscillating spatial entry.
    GravitationalWave,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Superfluid => "superfluid",
            MetricKind::Homogeneous => "homogeneous",
            MetricKind::Mott => "mott",
            MetricKind::Flrw => "flrw",
            MetricKind::MinkowskiPlusH => "minkowski_plus_h",
            MetricKind::GravitationalWave => "gravitational_wave",
        }
    }
}

/// Work array type for per-site matrices; only the leading
/// `dims_spacetime x dims_spacetime` block is meaningful.
pub type SiteMatrix<T> = [[T; 4]; 4];

/// A symmetric spacetime metric sampled at every lattice site.
///
/// Entries are stored row-major per site, `dims_spacetime = D + 1` rows and
/// columns with index 0 the time direction. `conformal` keeps the per-site
/// overall scale: `Omega_j` for the full metrics, the per-site strain scale
/// for a bare perturbation.
#[derive(Debug, Clone)]
pub struct MetricField<T: Real> {
    grid: LatticeGrid<T>,
    dims_spacetime: usize,
    kind: MetricKind,
    conformal: Vec<T>,
    g: Vec<T>,
}

impl<T: Real> MetricField<T> {
    /// Build from raw per-site data. `g` holds `site_count * (D+1)^2` entries
    /// row-major per site and must be symmetric and finite.
    pub fn new(
        grid: LatticeGrid<T>,
        kind: MetricKind,
        conformal: Vec<T>,
        g: Vec<T>,
    ) -> Result<Self> {
        let d1 = grid.dims() + 1;
        if conformal.len() != grid.site_count() || g.len() != grid.site_count() * d1 * d1 {
            return Err(Error::grid("metric data length does not match the grid"));
        }
        let field = Self { grid, dims_spacetime: d1, kind, conformal, g };
        for site in 0..field.grid.site_count() {
            for mu in 0..d1 {
                for nu in 0..d1 {
                    let e = field.entry(site, mu, nu);
                    if !e.is_finite() {
                        return Err(Error::NonFinite { what: "metric entry", site });
                    }
                    if nu > mu && e != field.entry(site, nu, mu) {
                        return Err(Error::grid("metric entries are not symmetric"));
                    }
                }
            }
        }
        Ok(field)
    }

    fn zeroed(grid: LatticeGrid<T>, kind: MetricKind) -> Self {
        let d1 = grid.dims() + 1;
        let sites = grid.site_count();
        Self {
            grid,
            dims_spacetime: d1,
            kind,
            conformal: vec![T::zero(); sites],
            g: vec![T::zero(); sites * d1 * d1],
        }
    }

    pub fn grid(&self) -> &LatticeGrid<T> {
        &self.grid
    }

    pub fn dims_spacetime(&self) -> usize {
        self.dims_spacetime
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn conformal(&self, site: usize) -> T {
        self.conformal[site]
    }

    pub fn entry(&self, site: usize, mu: usize, nu: usize) -> T {
        let d1 = self.dims_spacetime;
        self.g[site * d1 * d1 + mu * d1 + nu]
    }

    fn set(&mut self, site: usize, mu: usize, nu: usize, value: T) {
        let d1 = self.dims_spacetime;
        self.g[site * d1 * d1 + mu * d1 + nu] = value;
    }

    /// The site's matrix in a fixed-size work array (rows past
    /// `dims_spacetime` are zero).
    pub fn site_matrix(&self, site: usize) -> SiteMatrix<T> {
        let mut m = [[T::zero(); 4]; 4];
        for mu in 0..self.dims_spacetime {
            for nu in 0..self.dims_spacetime {
                m[mu][nu] = self.entry(site, mu, nu);
            }
        }
        m
    }

    /// Determinant of the site's `(D+1) x (D+1)` block.
    pub fn det_site(&self, site: usize) -> T {
        det_small(&self.site_matrix(site), self.dims_spacetime)
    }

    /// Inverse of the site's block; degenerate sites are an error here
    /// (callers that tolerate horizons mask on `det` first).
    pub fn inverse_site(&self, site: usize) -> Result<SiteMatrix<T>> {
        invert_small(&self.site_matrix(site), self.dims_spacetime).ok_or(Error::Degenerate {
            site,
            det: self.det_site(site).as_f64(),
        })
    }

    /// Entrywise sum, used to assemble background-plus-perturbation metrics.
    /// The conformal column is inherited from `self` (the background).
    pub fn sum_with(&self, other: &MetricField<T>, kind: MetricKind) -> Result<MetricField<T>> {
        if self.grid != other.grid {
            return Err(Error::grid("metric sum over different grids"));
        }
        let mut out = self.clone();
        out.kind = kind;
        for (x, y) in out.g.iter_mut().zip(other.g.iter()) {
            *x += *y;
        }
        Ok(out)
    }
}

/// Determinant of the leading `n x n` block by elimination with partial
/// pivoting; exact enough for the 2x2..4x4 blocks used here.
fn det_small<T: Real>(m: &SiteMatrix<T>, n: usize) -> T {
    let mut a = *m;
    let mut det = T::one();
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col] == T::zero() {
            return T::zero();
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                let sub = factor * a[col][k];
                a[row][k] -= sub;
            }
        }
    }
    det
}

/// Gauss-Jordan inverse of the leading `n x n` block; `None` when a pivot
/// degenerates.
fn invert_small<T: Real>(m: &SiteMatrix<T>, n: usize) -> Option<SiteMatrix<T>> {
    let mut a = *m;
    let mut inv = [[T::zero(); 4]; 4];
    for (i, row) in inv.iter_mut().enumerate().take(n) {
        row[i] = T::one();
    }
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < T::of(f64::MIN_POSITIVE) {
            return None;
        }
        a.swap(pivot, col);
        inv.swap(pivot, col);
        let scale = a[col][col].recip();
        for k in 0..n {
            a[col][k] *= scale;
            inv[col][k] *= scale;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row][col];
            for k in 0..n {
                let (sa, si) = (factor * a[col][k], factor * inv[col][k]);
                a[row][k] -= sa;
                inv[row][k] -= si;
            }
        }
    }
    Some(inv)
}

fn conformal_factor<T: Real>(n: T, p: &BhParams<T>) -> T {
    let two = T::one() + T::one();
    (two * n * p.j0 * p.a * p.a / p.u).sqrt()
}

/// Metric of a flowing superfluid:
/// `g = Omega [[-(c^2 - v.v), -v^T], [-v, I]]` per site.
pub fn superfluid_metric<T: Real>(h: &HydroState<T>, p: &BhParams<T>) -> Result<MetricField<T>> {
    p.check_spacing(h.grid())?;
    let grid = h.grid().clone();
    let d = grid.dims();
    let mut m = MetricField::zeroed(grid.clone(), MetricKind::Superfluid);
    for site in 0..grid.site_count() {
        let omega = conformal_factor(h.n.values()[site], p);
        m.conformal[site] = omega;
        let c = h.c.values()[site];
        let mut v_sq = T::zero();
        for axis in 0..d {
            let v = h.v.comp(site, axis);
            v_sq += v * v;
            m.set(site, 0, axis + 1, -omega * v);
            m.set(site, axis + 1, 0, -omega * v);
            m.set(site, axis + 1, axis + 1, omega);
        }
        m.set(site, 0, 0, -omega * (c * c - v_sq));
    }
    Ok(m)
}

/// Diagonal metric of a resting background, `g = Omega diag(-c^2, I)`.
/// `kind` tags it [`MetricKind::Homogeneous`] or [`MetricKind::Mott`]
/// depending on the regime the caller is describing.
pub fn homogeneous_metric<T: Real>(
    n: &RealField<T>,
    p: &BhParams<T>,
    kind: MetricKind,
) -> Result<MetricField<T>> {
    if !matches!(kind, MetricKind::Homogeneous | MetricKind::Mott) {
        return Err(Error::config(
            "homogeneous construction only produces the homogeneous or mott kinds",
        ));
    }
    p.check_spacing(n.grid())?;
    let two = T::one() + T::one();
    let grid = n.grid().clone();
    let d = grid.dims();
    let mut m = MetricField::zeroed(grid.clone(), kind);
    for site in 0..grid.site_count() {
        let nj = n.values()[site];
        let omega = conformal_factor(nj, p);
        m.conformal[site] = omega;
        // same arithmetic as the stored excitation speed, so the resting
        // flowing metric and this one agree bitwise
        let c = p.a * (two * p.j0 * nj * p.u).sqrt();
        m.set(site, 0, 0, -omega * (c * c));
        for axis in 0..d {
            m.set(site, axis + 1, axis + 1, omega);
        }
    }
    Ok(m)
}

/// Expanding-background metric: the superfluid form with the spatial block
/// scaled by `exp(H t)`. `Omega` and `c` are evaluated with the reference
/// rate `J0`; the expansion lives entirely in the explicit scale factor, so
/// the parameters must carry the matching exponential schedule.
pub fn flrw_metric<T: Real>(
    h: &HydroState<T>,
    p: &BhParams<T>,
    t: T,
    hubble: T,
) -> Result<MetricField<T>> {
    match p.schedule {
        TunnelingSchedule::Exponential { rate }
            if (rate - hubble).abs() <= T::of(1e-12) * hubble.abs().max(T::one()) => {}
        _ => {
            return Err(Error::ScheduleMismatch {
                context: "expanding metric requires the exponential tunneling schedule \
                          with rate equal to the expansion rate"
                    .into(),
            });
        }
    }
    let mut m = superfluid_metric(h, p)?;
    m.kind = MetricKind::Flrw;
    let scale = (hubble * t).exp();
    let d = m.grid.dims();
    for site in 0..m.grid.site_count() {
        for axis in 0..d {
            let scaled = m.entry(site, axis + 1, axis + 1) * scale;
            m.set(site, axis + 1, axis + 1, scaled);
        }
    }
    Ok(m)
}

/// First-order metric perturbation of a density profile about `n_ref`:
/// `h = sqrt(J a^2/(2 n_ref U)) (n_j - n_ref) diag(-3 c_ref^2, I)`.
///
/// This is exactly the first derivative of the resting metric in `n`, so
/// `eta + h` matches [`homogeneous_metric`] of the perturbed density to
/// second order in the amplitude. The conformal column stores the per-site
/// strain scale (the factor multiplying the diagonal pattern).
pub fn perturbation_metric<T: Real>(
    n: &RealField<T>,
    p: &BhParams<T>,
    n_ref: T,
) -> Result<MetricField<T>> {
    if !(n_ref > T::zero()) {
        return Err(Error::config("reference density must be positive"));
    }
    p.check_spacing(n.grid())?;
    let two = T::one() + T::one();
    let three = T::of(3.0);
    let pref = (p.j0 * p.a * p.a / (two * n_ref * p.u)).sqrt();
    let c_ref_sq = two * p.j0 * n_ref * p.u * p.a * p.a;
    let grid = n.grid().clone();
    let d = grid.dims();
    let mut m = MetricField::zeroed(grid.clone(), MetricKind::MinkowskiPlusH);
    for site in 0..grid.site_count() {
        let eps = n.values()[site] - n_ref;
        let scale = pref * eps;
        m.conformal[site] = scale;
        m.set(site, 0, 0, -scale * three * c_ref_sq);
        for axis in 0..d {
            m.set(site, axis + 1, axis + 1, scale);
        }
    }
    Ok(m)
}

/// The flat reference metric the perturbation is measured against:
/// the resting metric at the constant reference density.
pub fn minkowski_metric<T: Real>(
    grid: &LatticeGrid<T>,
    p: &BhParams<T>,
    n_ref: T,
) -> Result<MetricField<T>> {
    if !(n_ref > T::zero()) {
        return Err(Error::config("reference density must be positive"));
    }
    let n = RealField::constant(grid.clone(), n_ref);
    let mut m = homogeneous_metric(&n, p, MetricKind::Homogeneous)?;
    m.kind = MetricKind::MinkowskiPlusH;
    Ok(m)
}

/// Soft guard for the perturbative split: first order is trustworthy only
/// while `|n - n_ref| / n_ref` stays small.
pub fn linearization_warning<T: Real>(n: &RealField<T>, n_ref: T) -> Option<String> {
    let worst = n
        .values()
        .iter()
        .map(|&x| (x - n_ref).abs() / n_ref)
        .fold(T::zero(), T::max);
    (worst >= T::of(0.1)).then(|| {
        format!(
            "density deviates from the reference by {worst} relative; \
             the first-order metric split assumes < 0.1"
        )
    })
}

/// One-dimensional wave background `g = Omega diag(-c^2, 1 + eps sin(nu t))`
/// at uniform density `n0`. Requires a 1D grid and the matching sinusoidal
/// tunneling schedule, since the oscillating spatial entry is the imprint of
/// the modulated rate.
pub fn gw_metric<T: Real>(
    grid: &LatticeGrid<T>,
    p: &BhParams<T>,
    t: T,
    eps_plus: T,
    nu_plus: T,
    n0: T,
) -> Result<MetricField<T>> {
    if grid.dims() != 1 {
        return Err(Error::Unsupported {
            context: "the wave background is one-dimensional".into(),
        });
    }
    if !(n0 > T::zero()) {
        return Err(Error::config("density must be positive"));
    }
    p.check_spacing(grid)?;
    let close = |x: T, y: T| (x - y).abs() <= T::of(1e-12) * y.abs().max(T::one());
    match p.schedule {
        TunnelingSchedule::Sinusoidal { amplitude, frequency }
            if close(amplitude, eps_plus) && close(frequency, nu_plus) => {}
        _ => {
            return Err(Error::ScheduleMismatch {
                context: "wave metric requires the sinusoidal tunneling schedule with \
                          matching amplitude and frequency"
                    .into(),
            });
        }
    }
    let two = T::one() + T::one();
    let omega = conformal_factor(n0, p);
    let c = p.a * (two * p.j0 * n0 * p.u).sqrt();
    let c_sq = c * c;
    let strain = T::one() + eps_plus * (nu_plus * t).sin();
    let mut m = MetricField::zeroed(grid.clone(), MetricKind::GravitationalWave);
    for site in 0..grid.site_count() {
        m.conformal[site] = omega;
        m.set(site, 0, 0, -omega * c_sq);
        m.set(site, 1, 1, omega * strain);
    }
    Ok(m)
}

/// Interval `ds^2 = g_{mu nu} dx^mu dx^nu` at one site, with `dx^0 = dt` and
/// `dx` the spatial displacement.
pub fn line_element<T: Real>(m: &MetricField<T>, site: usize, dt: T, dx: &[T]) -> Result<T> {
    if dx.len() != m.grid().dims() {
        return Err(Error::grid("displacement length does not match the grid dimension"));
    }
    if site >= m.grid().site_count() {
        return Err(Error::grid("site index out of range"));
    }
    let d1 = m.dims_spacetime();
    let mut x = [T::zero(); 4];
    x[0] = dt;
    x[1..=dx.len()].copy_from_slice(dx);
    let mut total = T::zero();
    for mu in 0..d1 {
        for nu in 0..d1 {
            total += m.entry(site, mu, nu) * x[mu] * x[nu];
        }
    }
    Ok(total)
}

/// Residual of the covariant wave equation together with the sites excluded
/// for metric degeneracy.
#[derive(Debug, Clone)]
pub struct KgResidual<T: Real> {
    /// `box(dphi)` per site; zero at masked sites.
    pub residual: RealField<T>,
    /// Sites where `|det g| <` [`DEGENERACY_FLOOR`] at any time level.
    pub masked: Vec<usize>,
}

/// Densitized inverse-metric weights `w^{mu nu} = sqrt(-det g) g^{mu nu}`
/// per site for one time level, plus the mask.
struct KgWeights<T: Real> {
    w00: Vec<T>,
    w0s: Vec<T>,
    wss: Vec<T>,
    sqrt_neg_det: Vec<T>,
    masked: Vec<bool>,
}

fn kg_weights<T: Real>(m: &MetricField<T>) -> Result<KgWeights<T>> {
    let grid = m.grid();
    let d = grid.dims();
    let sites = grid.site_count();
    let mut w = KgWeights {
        w00: vec![T::zero(); sites],
        w0s: vec![T::zero(); sites * d],
        wss: vec![T::zero(); sites * d * d],
        sqrt_neg_det: vec![T::zero(); sites],
        masked: vec![false; sites],
    };
    let floor = T::of(DEGENERACY_FLOOR);
    for site in 0..sites {
        let det = m.det_site(site);
        if det.abs() < floor {
            w.masked[site] = true;
            continue;
        }
        if det > T::zero() {
            return Err(Error::config(
                "wave operator needs a Lorentzian metric (negative determinant)",
            ));
        }
        let root = (-det).sqrt();
        w.sqrt_neg_det[site] = root;
        let inv = m.inverse_site(site)?;
        w.w00[site] = root * inv[0][0];
        for l in 0..d {
            w.w0s[site * d + l] = root * inv[0][l + 1];
            for k in 0..d {
                w.wss[(site * d + l) * d + k] = root * inv[l + 1][k + 1];
            }
        }
    }
    Ok(w)
}

/// Apply the covariant wave operator
/// `box(phi) = (1/sqrt(-g)) d_mu (sqrt(-g) g^{mu nu} d_nu phi)`
/// to three stored time levels of a fluctuation, with the metric sampled at
/// each level (pass the same metric three times when it is static).
///
/// Discretization: the pure time term uses half-step averages of the
/// densitized weight (compact), the mixed and spatial terms use centered
/// first differences composed with site-sampled weights. Sites where any
/// level's metric degenerates are masked to zero rather than failing, so the
/// operator stays usable across horizons.
pub fn kg_residual<T: Real>(
    dphi: [&RealField<T>; 3],
    metrics: [&MetricField<T>; 3],
    dt: T,
) -> Result<KgResidual<T>> {
    let grid = dphi[1].grid().clone();
    for lvl in dphi {
        if lvl.grid() != &grid {
            return Err(Error::grid("fluctuation levels on different grids"));
        }
    }
    for m in metrics {
        if m.grid() != &grid {
            return Err(Error::grid("metric levels on different grids"));
        }
    }
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::config("time step must be positive"));
    }

    let d = grid.dims();
    let two = T::one() + T::one();
    let w_prev = kg_weights(metrics[0])?;
    let w_mid = kg_weights(metrics[1])?;
    let w_next = kg_weights(metrics[2])?;

    let grad_prev = gradient(dphi[0])?;
    let grad_mid = gradient(dphi[1])?;
    let grad_next = gradient(dphi[2])?;

    // spatial flux at the mid level: F_l = w^{l0} dphi/dt + w^{lm} d_m phi
    let mut flux = VectorField::zeros(grid.clone());
    for site in 0..grid.site_count() {
        let dphi_dt = (dphi[2].values()[site] - dphi[0].values()[site]) / (two * dt);
        for l in 0..d {
            let mut f = w_mid.w0s[site * d + l] * dphi_dt;
            for k in 0..d {
                f += w_mid.wss[(site * d + l) * d + k] * grad_mid.comp(site, k);
            }
            *flux.comp_mut(site, l) = f;
        }
    }
    let div_flux = divergence(&flux)?;

    let mut masked = Vec::new();
    let mut out = RealField::zeros(grid.clone());
    for site in 0..grid.site_count() {
        if w_prev.masked[site] || w_mid.masked[site] || w_next.masked[site] {
            masked.push(site);
            continue;
        }
        let (phi0, phi1, phi2) = (
            dphi[0].values()[site],
            dphi[1].values()[site],
            dphi[2].values()[site],
        );
        // d_t(w^{00} d_t phi): compact with half-step coefficient averages
        let a_plus = (w_next.w00[site] + w_mid.w00[site]) / two;
        let a_minus = (w_mid.w00[site] + w_prev.w00[site]) / two;
        let time_term = (a_plus * (phi2 - phi1) - a_minus * (phi1 - phi0)) / (dt * dt);
        // d_t(w^{0l} d_l phi): centered over the outer levels
        let mut cross = T::zero();
        for l in 0..d {
            cross += (w_next.w0s[site * d + l] * grad_next.comp(site, l)
                - w_prev.w0s[site * d + l] * grad_prev.comp(site, l))
                / (two * dt);
        }
        out.values_mut()[site] =
            (time_term + cross + div_flux.values()[site]) / w_mid.sqrt_neg_det[site];
    }
    Ok(KgResidual { residual: out, masked })
}

/// One detected horizon crossing: the bond between `site` and its plus
/// neighbor along `axis` where `c^2 - |v|^2` changes sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HorizonPair {
    pub site: usize,
    pub neighbor: usize,
    pub axis: usize,
}

/// Horizon diagnostics over a background state.
#[derive(Debug, Clone)]
pub struct HorizonReport<T: Real> {
    /// `|v|/c` per site.
    pub mach: RealField<T>,
    /// `U/J - 2 |dphi|^2 / n` per site, with `dphi` the per-step phase
    /// increment `a grad(phi)` read back from the velocity. Shares its sign
    /// with `acoustic` site by site, which is how the two horizon criteria
    /// stay exactly equivalent.
    pub condition: RealField<T>,
    /// `c^2 - |v|^2` per site.
    pub acoustic: RealField<T>,
    /// Adjacent site pairs bracketing a sign change of `acoustic`, in
    /// ascending site then axis order.
    pub pairs: Vec<HorizonPair>,
}

/// Scan a background for acoustic horizons.
///
/// `c^2 - |v|^2 = 2 J^2 a^2 n (U/J - 2 |dphi|^2 / n)` holds identically with
/// `dphi = a grad(phi) = v/(2Ja)`, so the Mach-1 criterion and the coupling
/// criterion flag the same pairs by construction; both fields are reported.
pub fn horizon_scan<T: Real>(h: &HydroState<T>, p: &BhParams<T>) -> Result<HorizonReport<T>> {
    p.check_spacing(h.grid())?;
    let grid = h.grid().clone();
    let d = grid.dims();
    let two = T::one() + T::one();
    let two_ja = two * p.j0 * p.a;

    let mach = RealField::from_fn(grid.clone(), |s| h.v.magnitude(s) / h.c.values()[s]);
    let condition = RealField::from_fn(grid.clone(), |s| {
        let mut steps_sq = T::zero();
        for axis in 0..d {
            let step = h.v.comp(s, axis) / two_ja;
            steps_sq += step * step;
        }
        p.u / p.j0 - two * steps_sq / h.n.values()[s]
    });
    let acoustic = RealField::from_fn(grid.clone(), |s| {
        let c = h.c.values()[s];
        let v = h.v.magnitude(s);
        c * c - v * v
    });

    let mut pairs = Vec::new();
    let q = acoustic.values();
    grid.for_each_neighborhood(|site, nb| {
        for axis in 0..d {
            let pi = nb.plus[axis];
            // Skip bonds touching a clamped wall along this axis: the
            // centered velocity there falls back to a one-sided half
            // gradient, which fabricates a sign change at the edge of a
            // through-flowing profile.
            if pi == site || nb.minus[axis] == site {
                continue;
            }
            if grid.boundary() == crate::lattice::Boundary::FixedValue
                && grid.coords(pi)[axis] + 1 == grid.extent(axis)
            {
                continue;
            }
            if q[site] * q[pi] < T::zero() {
                pairs.push(HorizonPair { site, neighbor: pi, axis });
            }
        }
    });
    Ok(HorizonReport { mach, condition, acoustic, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::BhParams;
    use crate::hydro::{HydroState, to_density_phase};
    use crate::lattice::{Boundary, ComplexField};
    use crate::scalar::C;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn params() -> BhParams<f64> {
        BhParams::constant(1.0, 0.1, 0.0, 1.0).unwrap()
    }

    fn grid(dims: usize, ext: usize) -> LatticeGrid<f64> {
        LatticeGrid::new(dims, &[ext, ext, ext][..dims], 1.0, Boundary::Periodic).unwrap()
    }

    fn resting_state(dims: usize, ext: usize, n: f64) -> HydroState<f64> {
        let g = grid(dims, ext);
        let amp = n.sqrt();
        to_density_phase(&ComplexField::constant(g, C::new(amp, 0.0)), &params()).unwrap()
    }

    /// Eigenvalues of the leading n x n symmetric block by Jacobi rotations.
    fn sym_eigenvalues(m: &SiteMatrix<f64>, n: usize) -> Vec<f64> {
        let mut a = *m;
        for _ in 0..200 {
            let mut off = 0.0;
            let (mut p, mut q) = (0, 1);
            for i in 0..n {
                for j in i + 1..n {
                    if a[i][j].abs() > off {
                        off = a[i][j].abs();
                        (p, q) = (i, j);
                    }
                }
            }
            if off < 1e-14 {
                break;
            }
            let theta = 0.5 * (2.0 * a[p][q]).atan2(a[q][q] - a[p][p]);
            let (s, c) = theta.sin_cos();
            for k in 0..n {
                let (akp, akq) = (a[k][p], a[k][q]);
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..n {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
        }
        (0..n).map(|i| a[i][i]).collect()
    }

    #[test]
    fn resting_metric_matches_the_frozen_numbers() {
        let h = resting_state(3, 4, 100.0);
        let p = params();
        let m = superfluid_metric(&h, &p).unwrap();
        let omega = 2000.0_f64.sqrt();
        for site in 0..m.grid().site_count() {
            assert_relative_eq!(m.conformal(site), omega, max_relative = 1e-14);
            assert_relative_eq!(m.entry(site, 0, 0), -omega * 20.0, max_relative = 1e-13);
            for l in 1..4 {
                assert_relative_eq!(m.entry(site, l, l), omega, max_relative = 1e-14);
                assert_abs_diff_eq!(m.entry(site, 0, l), 0.0, epsilon = 1e-15);
            }
            assert_relative_eq!(m.det_site(site), -8e7, max_relative = 1e-12);
        }

        // at rest the flowing and homogeneous constructions coincide
        let hom = homogeneous_metric(&h.n, &p, MetricKind::Homogeneous).unwrap();
        for site in 0..m.grid().site_count() {
            for mu in 0..4 {
                for nu in 0..4 {
                    assert_eq!(m.entry(site, mu, nu), hom.entry(site, mu, nu));
                }
            }
        }
        assert!(homogeneous_metric(&h.n, &p, MetricKind::Flrw).is_err());
    }

    #[test]
    fn determinant_is_independent_of_the_velocity() {
        let p = params();
        for dims in 1..=3usize {
            let g = grid(dims, 6);
            let mut rng = ChaCha8Rng::seed_from_u64(dims as u64);
            let b = ComplexField::from_fn(g.clone(), |s| {
                let coords = g.coords(s);
                let mut phase = 0.0;
                for (axis, &c) in coords.iter().enumerate().take(dims) {
                    phase += 0.2 * ((c as f64) * 0.9 + axis as f64).sin();
                }
                C::from_polar((80.0 + 40.0 * rng.gen::<f64>()).sqrt(), phase)
            });
            let h = to_density_phase(&b, &p).unwrap();
            let m = superfluid_metric(&h, &p).unwrap();
            for site in 0..g.site_count() {
                let omega = m.conformal(site);
                let c = h.c.values()[site];
                let expect = -omega.powi(dims as i32 + 1) * c * c;
                assert_relative_eq!(m.det_site(site), expect, max_relative = 1e-12);
                assert!(h.v.magnitude(site) > 0.0);
            }
        }
    }

    #[test]
    fn inverse_reconstructs_identity_and_signature_is_lorentzian() {
        let p = params();
        let g = grid(2, 6);
        let b = ComplexField::from_fn(g.clone(), |s| {
            let c = g.coords(s);
            C::from_polar(
                (100.0 + 5.0 * (c[0] as f64 * 0.7).cos()).sqrt(),
                0.1 * (c[1] as f64 * 0.5).sin(),
            )
        });
        let h = to_density_phase(&b, &p).unwrap();
        let m = superfluid_metric(&h, &p).unwrap();
        for site in 0..g.site_count() {
            let inv = m.inverse_site(site).unwrap();
            let mat = m.site_matrix(site);
            for i in 0..3 {
                for j in 0..3 {
                    let mut prod = 0.0;
                    for k in 0..3 {
                        prod += mat[i][k] * inv[k][j];
                    }
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(prod, expect, epsilon = 1e-10);
                }
            }
            let eigs = sym_eigenvalues(&mat, 3);
            let negatives = eigs.iter().filter(|&&x| x < 0.0).count();
            assert_eq!(negatives, 1, "signature at site {site}: {eigs:?}");
        }
    }

    #[test]
    fn time_entry_vanishes_where_the_flow_reaches_the_excitation_speed() {
        // uniform phase steps of sqrt(5) put every site exactly at Mach 1
        let p = params();
        let g = grid(1, 16);
        let step = 5.0_f64.sqrt();
        let phi = RealField::from_fn(g.clone(), |s| step * s as f64);
        let n = RealField::constant(g.clone(), 100.0);
        let h = HydroState::from_density_phase(n, phi, &p).unwrap();
        let m = superfluid_metric(&h, &p).unwrap();
        // interior sites see the uniform step on both sides (the seam sites
        // see the principal-value wrap, which equals sqrt(5) - 2 pi)
        for site in 1..8 {
            let omega_c2 = m.conformal(site) * h.c.values()[site].powi(2);
            assert!(m.entry(site, 0, 0).abs() < 1e-12 * omega_c2);
            assert_relative_eq!(h.v.comp(site, 0), h.c.values()[site], max_relative = 1e-14);
        }
    }

    #[test]
    fn expanding_metric_scales_the_spatial_block() {
        let hubble = 0.01;
        let p = BhParams::new(
            1.0,
            0.1,
            0.0,
            1.0,
            TunnelingSchedule::Exponential { rate: hubble },
        )
        .unwrap();
        let g = grid(3, 4);
        let b = ComplexField::constant(g, C::new(10.0, 0.0));
        let h = to_density_phase(&b, &p).unwrap();

        let at0 = flrw_metric(&h, &p, 0.0, hubble).unwrap();
        let sup = superfluid_metric(&h, &p).unwrap();
        for site in 0..h.grid().site_count() {
            for mu in 0..4 {
                for nu in 0..4 {
                    assert_eq!(at0.entry(site, mu, nu), sup.entry(site, mu, nu));
                }
            }
        }

        // H t = ln 2 doubles every spatial entry
        let t = 2.0_f64.ln() / hubble;
        let later = flrw_metric(&h, &p, t, hubble).unwrap();
        for site in 0..h.grid().site_count() {
            assert_eq!(later.entry(site, 0, 0), at0.entry(site, 0, 0));
            for l in 1..4 {
                assert_relative_eq!(
                    later.entry(site, l, l),
                    2.0 * at0.entry(site, l, l),
                    max_relative = 1e-12
                );
            }
        }

        let constant = params();
        assert!(matches!(
            flrw_metric(&h, &constant, 0.0, hubble),
            Err(Error::ScheduleMismatch { .. })
        ));
    }

    #[test]
    fn perturbation_matches_the_frozen_entry_and_improves_quadratically() {
        let p = params();
        let g = grid(3, 8);
        let n_ref = 100.0;

        // frozen number: a unit density excess gives h_00 = -sqrt(1/20)*3*20
        let unit = RealField::constant(g.clone(), n_ref + 1.0);
        let h_unit = perturbation_metric(&unit, &p, n_ref).unwrap();
        assert_relative_eq!(h_unit.entry(0, 0, 0), -13.416407864998739, max_relative = 1e-12);

        let bump = |amp: f64| {
            RealField::from_fn(g.clone(), |s| {
                let c = g.coords(s);
                let r2 = (0..3)
                    .map(|ax| {
                        let d = c[ax] as f64 - 3.5;
                        d * d
                    })
                    .sum::<f64>();
                n_ref + amp * (-r2 / 6.0).exp()
            })
        };

        let eta = minkowski_metric(&g, &p, n_ref).unwrap();
        let deviation = |amp: f64| -> f64 {
            let n = bump(amp);
            assert!(linearization_warning(&n, n_ref).is_none());
            let full = homogeneous_metric(&n, &p, MetricKind::Homogeneous).unwrap();
            let approx_g = eta
                .sum_with(&perturbation_metric(&n, &p, n_ref).unwrap(), MetricKind::MinkowskiPlusH)
                .unwrap();
            let mut worst = 0.0f64;
            for site in 0..g.site_count() {
                for mu in 0..4 {
                    worst = worst
                        .max((full.entry(site, mu, mu) - approx_g.entry(site, mu, mu)).abs());
                }
            }
            worst
        };

        let coarse = deviation(4.0);
        let fine = deviation(2.0);
        let rate = coarse / fine;
        assert!((3.5..4.5).contains(&rate), "halving the amplitude gave rate {rate}");

        assert!(linearization_warning(&bump(15.0), n_ref).is_some());
    }

    #[test]
    fn wave_background_oscillates_with_zero_mean_strain() {
        let eps = 0.01;
        let nu = 0.5;
        let p = BhParams::new(
            1.0,
            0.1,
            0.0,
            1.0,
            TunnelingSchedule::Sinusoidal { amplitude: eps, frequency: nu },
        )
        .unwrap();
        let g = grid(1, 8);

        // quarter period: spatial entry is Omega * 1.01
        let t_quarter = std::f64::consts::FRAC_PI_2 / nu;
        let m = gw_metric(&g, &p, t_quarter, eps, nu, 100.0).unwrap();
        let omega = 2000.0_f64.sqrt();
        assert_relative_eq!(m.entry(0, 1, 1), omega * 1.01, max_relative = 1e-12);
        assert_relative_eq!(m.entry(0, 0, 0), -omega * 20.0, max_relative = 1e-13);

        // strain averages to zero over one full period (midpoint rule)
        let period = std::f64::consts::TAU / nu;
        let samples = 64;
        let mean: f64 = (0..samples)
            .map(|i| {
                let t = (i as f64 + 0.5) / samples as f64 * period;
                let m = gw_metric(&g, &p, t, eps, nu, 100.0).unwrap();
                m.entry(0, 1, 1) / omega - 1.0
            })
            .sum::<f64>()
            / samples as f64;
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-15);

        let g2 = grid(2, 8);
        assert!(matches!(
            gw_metric(&g2, &p, 0.0, eps, nu, 100.0),
            Err(Error::Unsupported { .. })
        ));
        assert!(matches!(
            gw_metric(&g, &params(), 0.0, eps, nu, 100.0),
            Err(Error::ScheduleMismatch { .. })
        ));
    }

    #[test]
    fn line_element_reproduces_the_textbook_intervals() {
        // n = 128, U = 1/16 make c = 4 and Omega = 64 exactly, so the null
        // interval cancels to zero in floating point as well
        let p = BhParams::constant(1.0, 0.0625, 0.0, 1.0).unwrap();
        let g = grid(1, 8);
        let n = RealField::constant(g.clone(), 128.0);
        let h = HydroState::from_density_phase(n, RealField::zeros(g), &p).unwrap();
        let m = superfluid_metric(&h, &p).unwrap();

        // purely spatial unit step: ds^2 = Omega
        assert_eq!(line_element(&m, 3, 0.0, &[1.0]).unwrap(), 64.0);
        // null ray dx = c dt
        let dt = 0.25;
        assert_eq!(line_element(&m, 3, dt, &[4.0 * dt]).unwrap(), 0.0);
        // comoving observer: ds^2 = -Omega c^2 dt^2
        assert_relative_eq!(
            line_element(&m, 3, dt, &[0.0]).unwrap(),
            -64.0 * 16.0 * dt * dt,
            max_relative = 1e-15
        );
        assert!(line_element(&m, 3, 0.0, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn wave_operator_annihilates_the_discrete_plane_wave_to_second_order() {
        let p = params();
        let residual_norm = |ext: usize, a: f64| -> f64 {
            // J ~ 1/a^2 keeps both c = a sqrt(2JnU) and Omega = a sqrt(2nJ/U)
            // fixed, so the resolutions share one continuum problem
            let p = BhParams::constant(p.j0 / (a * a), p.u, p.mu, a).unwrap();
            let g = LatticeGrid::new(1, &[ext], a, Boundary::Periodic).unwrap();
            let n = RealField::constant(g.clone(), 100.0);
            let h =
                HydroState::from_density_phase(n.clone(), RealField::zeros(g.clone()), &p).unwrap();
            let m = superfluid_metric(&h, &p).unwrap();
            let c = h.c.values()[0];
            // fixed physical wavevector across resolutions
            let k = std::f64::consts::TAU * 4.0 / (ext as f64 * a);
            let omega = c * (2.0 / a) * (k * a / 2.0).sin();
            let dt = 0.02 * a;
            let level = |t: f64| {
                RealField::from_fn(g.clone(), |s| {
                    1e-4 * (k * (s as f64) * a - omega * t).cos()
                })
            };
            let (lm, l0, lp) = (level(-dt), level(0.0), level(dt));
            let r = kg_residual([&lm, &l0, &lp], [&m, &m, &m], dt).unwrap();
            assert!(r.masked.is_empty());
            r.residual.norm_max()
        };

        let coarse = residual_norm(64, 1.0);
        let fine = residual_norm(128, 0.5);
        let rate = coarse / fine;
        assert!((3.4..4.6).contains(&rate), "joint refinement rate {rate}");
    }

    #[test]
    fn degenerate_sites_are_masked_not_fatal() {
        let g = grid(1, 8);
        let p = params();
        let n = RealField::constant(g.clone(), 100.0);
        let m = homogeneous_metric(&n, &p, MetricKind::Homogeneous).unwrap();

        // zero out one site by scaling its block to degeneracy
        let mut conformal = Vec::new();
        let mut data = Vec::new();
        for site in 0..8 {
            conformal.push(m.conformal(site));
            for mu in 0..2 {
                for nu in 0..2 {
                    let scale = if site == 5 { 0.0 } else { 1.0 };
                    data.push(m.entry(site, mu, nu) * scale);
                }
            }
        }
        let broken = MetricField::new(g.clone(), MetricKind::Homogeneous, conformal, data).unwrap();

        let phi = RealField::from_fn(g, |s| 1e-3 * (0.7 * s as f64).cos());
        let r = kg_residual([&phi, &phi, &phi], [&broken, &broken, &broken], 0.01).unwrap();
        assert_eq!(r.masked, vec![5]);
        assert_eq!(r.residual.values()[5], 0.0);
        assert!(r.residual.values()[0].abs() > 0.0);
    }

    #[test]
    fn horizon_scan_flags_the_single_crossing_by_both_criteria() {
        // smooth ramp from 0.5 c to 1.25 c on a clamped line
        let p = params();
        let ext = 64;
        let g = LatticeGrid::new(1, &[ext], 1.0, Boundary::FixedValue).unwrap();
        let n0 = 100.0;
        let c = (2.0 * p.j0 * n0 * p.u).sqrt();
        let step_of = |x: f64| -> f64 {
            let mach = 0.5 + 0.75 / (1.0 + (-(x - 32.0) / 4.0).exp());
            mach * c / (2.0 * p.j0)
        };
        // phase = cumulative sum of per-bond steps
        let mut phi_vals = vec![0.0f64; ext];
        for s in 1..ext {
            phi_vals[s] = phi_vals[s - 1] + step_of(s as f64 - 0.5);
        }
        let phi = RealField::new(g.clone(), phi_vals).unwrap();
        let n = RealField::constant(g.clone(), n0);
        let h = HydroState::from_density_phase(n, phi, &p).unwrap();

        let report = horizon_scan(&h, &p).unwrap();
        assert_eq!(report.pairs.len(), 1, "pairs: {:?}", report.pairs);
        let pair = report.pairs[0];
        assert!(report.mach.values()[pair.site] < 1.0);
        assert!(report.mach.values()[pair.neighbor] > 1.0);

        // the coupling criterion changes sign across exactly the same pair
        // (interior bonds only, matching the scanner's wall exclusion)
        let cond = report.condition.values();
        let flips: Vec<usize> =
            (1..ext - 2).filter(|&s| cond[s] * cond[s + 1] < 0.0).collect();
        assert_eq!(flips, vec![pair.site]);

        // sign agreement site by site is exact
        for s in 0..ext {
            assert_eq!(
                report.acoustic.values()[s] > 0.0,
                cond[s] > 0.0,
                "criteria disagree at site {s}"
            );
        }
    }
}
