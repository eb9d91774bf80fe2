//! Cubic lattice, scalar/complex/vector fields, and central-difference stencils.
//!
//! Conventions used everywhere downstream:
//! * flat row-major storage, axis 0 fastest; site positions are `index * spacing`;
//! * first derivatives are centered over `2a`, the second derivative is the
//!   three-point stencil over `a^2`;
//! * composing `divergence(gradient(f))` therefore does NOT reproduce
//!   `laplacian(f)`: on a plane wave the former gives `-sin^2(ka)/a^2`, the
//!   latter `-4 sin^2(ka/2)/a^2`. Call sites pick the operator deliberately;
//! * `FixedValue` boundaries replicate the edge value into the ghost cell, so
//!   constant fields are stationary and boundary fluxes vanish.

use crate::error::{Error, Result};
use crate::scalar::{C, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    /// Ghost cells replicate the boundary site's value.
    FixedValue,
}

/// Cubic lattice in 1 to 3 dimensions with uniform spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeGrid<T: Real> {
    dims: usize,
    extents: [usize; 3],
    spacing: T,
    boundary: Boundary,
}

/// Flat indices of the +/- neighbour along each axis, boundary rule applied.
#[derive(Debug, Clone, Copy)]
pub struct Neighborhood {
    pub plus: [usize; 3],
    pub minus: [usize; 3],
}

impl<T: Real> LatticeGrid<T> {
    /// `extents[..dims]` are the per-axis site counts; every axis needs at
    /// least 3 sites so the centered stencils are defined.
    pub fn new(dims: usize, extents: &[usize], spacing: T, boundary: Boundary) -> Result<Self> {
        if dims == 0 || dims > 3 {
            return Err(Error::BadGrid { context: format!("dims = {dims}, expected 1..=3") });
        }
        if extents.len() != dims {
            return Err(Error::BadGrid {
                context: format!("{} extents given for {} dims", extents.len(), dims),
            });
        }
        if let Some(&bad) = extents.iter().find(|&&e| e < 3) {
            return Err(Error::BadGrid { context: format!("extent {bad} < 3") });
        }
        if !(spacing > T::zero()) || !spacing.is_finite() {
            return Err(Error::BadGrid { context: format!("spacing = {spacing}") });
        }
        let mut ext = [1usize; 3];
        ext[..dims].copy_from_slice(extents);
        Ok(Self { dims, extents: ext, spacing, boundary })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn extent(&self, axis: usize) -> usize {
        self.extents[axis]
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn site_count(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn strides(&self) -> [usize; 3] {
        [1, self.extents[0], self.extents[0] * self.extents[1]]
    }

    pub fn coords(&self, site: usize) -> [usize; 3] {
        let [_, sy, sz] = self.strides();
        [site % sy, (site / sy) % self.extents[1], site / sz]
    }

    pub fn site(&self, coords: [usize; 3]) -> usize {
        let [_, sy, sz] = self.strides();
        coords[0] + coords[1] * sy + coords[2] * sz
    }

    /// Physical coordinate of a site along one axis.
    pub fn position(&self, site: usize, axis: usize) -> T {
        T::of(self.coords(site)[axis] as f64) * self.spacing
    }

    /// Visit every site together with its stencil neighbourhood, in flat order.
    pub fn for_each_neighborhood(&self, mut f: impl FnMut(usize, &Neighborhood)) {
        let [ex, ey, ez] = self.extents;
        let [sx, sy, sz] = self.strides();
        let periodic = self.boundary == Boundary::Periodic;
        let mut site = 0usize;
        for z in 0..ez {
            for y in 0..ey {
                for x in 0..ex {
                    let mut nb = Neighborhood { plus: [site; 3], minus: [site; 3] };
                    nb.plus[0] = edge_plus(site, x, ex, sx, periodic);
                    nb.minus[0] = edge_minus(site, x, ex, sx, periodic);
                    if self.dims > 1 {
                        nb.plus[1] = edge_plus(site, y, ey, sy, periodic);
                        nb.minus[1] = edge_minus(site, y, ey, sy, periodic);
                    }
                    if self.dims > 2 {
                        nb.plus[2] = edge_plus(site, z, ez, sz, periodic);
                        nb.minus[2] = edge_minus(site, z, ez, sz, periodic);
                    }
                    f(site, &nb);
                    site += 1;
                }
            }
        }
    }
}

#[inline]
fn edge_plus(site: usize, c: usize, extent: usize, stride: usize, periodic: bool) -> usize {
    if c + 1 < extent {
        site + stride
    } else if periodic {
        site - (extent - 1) * stride
    } else {
        site
    }
}

#[inline]
fn edge_minus(site: usize, c: usize, extent: usize, stride: usize, periodic: bool) -> usize {
    if c > 0 {
        site - stride
    } else if periodic {
        site + (extent - 1) * stride
    } else {
        site
    }
}

macro_rules! same_grid {
    ($a:expr, $b:expr, $what:expr) => {
        if $a.grid != $b.grid {
            return Err(Error::grid(concat!("operands of ", $what, " live on different grids")));
        }
    };
}

/// Real scalar field over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField<T: Real> {
    grid: LatticeGrid<T>,
    values: Vec<T>,
}

/// Complex scalar field over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField<T: Real> {
    grid: LatticeGrid<T>,
    values: Vec<C<T>>,
}

/// Real vector field; `dims` components per site, stored site-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField<T: Real> {
    grid: LatticeGrid<T>,
    values: Vec<T>,
}

/// Complex vector field (e.g. the gradient of a complex field).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVectorField<T: Real> {
    grid: LatticeGrid<T>,
    values: Vec<C<T>>,
}

impl<T: Real> RealField<T> {
    pub fn new(grid: LatticeGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.site_count() {
            return Err(Error::grid(format!(
                "{} values for {} sites",
                values.len(),
                grid.site_count()
            )));
        }
        let field = Self { grid, values };
        field.ensure_finite("real field")?;
        Ok(field)
    }

    pub fn constant(grid: LatticeGrid<T>, value: T) -> Self {
        let n = grid.site_count();
        Self { grid, values: vec![value; n] }
    }

    pub fn zeros(grid: LatticeGrid<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn from_fn(grid: LatticeGrid<T>, mut f: impl FnMut(usize) -> T) -> Self {
        let values = (0..grid.site_count()).map(|s| f(s)).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &LatticeGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn ensure_finite(&self, what: &'static str) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(site) => Err(Error::NonFinite { what, site }),
            None => Ok(()),
        }
    }

    /// Deterministic (fixed-order) sum of all values.
    pub fn sum(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc + v)
    }

    pub fn norm_l2(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
    }

    pub fn norm_max(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }
}

impl<T: Real> ComplexField<T> {
    pub fn new(grid: LatticeGrid<T>, values: Vec<C<T>>) -> Result<Self> {
        if values.len() != grid.site_count() {
            return Err(Error::grid(format!(
                "{} values for {} sites",
                values.len(),
                grid.site_count()
            )));
        }
        let field = Self { grid, values };
        field.ensure_finite("complex field")?;
        Ok(field)
    }

    pub fn constant(grid: LatticeGrid<T>, value: C<T>) -> Self {
        let n = grid.site_count();
        Self { grid, values: vec![value; n] }
    }

    pub fn from_fn(grid: LatticeGrid<T>, mut f: impl FnMut(usize) -> C<T>) -> Self {
        let values = (0..grid.site_count()).map(|s| f(s)).collect();
        Self { grid, values }
    }

    /// Plane wave `amplitude * exp(i k.x)` with `k_l = 2 pi m_l / (L_l a)`.
    ///
    /// Integer mode numbers keep `k` commensurate with the grid; the phase is
    /// reduced per axis before evaluation so long lattices lose no accuracy.
    pub fn plane_wave(grid: LatticeGrid<T>, modes: [i64; 3], amplitude: C<T>) -> Self {
        let two_pi = std::f64::consts::TAU;
        Self::from_fn(grid.clone(), |site| {
            let coords = grid.coords(site);
            let mut frac = 0.0f64;
            for axis in 0..grid.dims() {
                let ext = grid.extent(axis) as i64;
                let term = (modes[axis] * coords[axis] as i64).rem_euclid(ext);
                frac += term as f64 / ext as f64;
            }
            let phase = T::of(two_pi * frac.fract());
            amplitude * C::new(phase.cos(), phase.sin())
        })
    }

    pub fn grid(&self) -> &LatticeGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[C<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C<T>] {
        &mut self.values
    }

    pub fn ensure_finite(&self, what: &'static str) -> Result<()> {
        match self.values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            Some(site) => Err(Error::NonFinite { what, site }),
            None => Ok(()),
        }
    }

    /// Deterministic sum of `|b_j|^2`.
    pub fn norm_sqr_sum(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, v| acc + v.norm_sqr())
    }

    pub fn norm_max(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, v| acc.max(v.norm()))
    }
}

impl<T: Real> VectorField<T> {
    pub fn zeros(grid: LatticeGrid<T>) -> Self {
        let n = grid.site_count() * grid.dims();
        Self { grid, values: vec![T::zero(); n] }
    }

    pub fn grid(&self) -> &LatticeGrid<T> {
        &self.grid
    }

    pub fn comp(&self, site: usize, axis: usize) -> T {
        self.values[site * self.grid.dims() + axis]
    }

    pub fn comp_mut(&mut self, site: usize, axis: usize) -> &mut T {
        let d = self.grid.dims();
        &mut self.values[site * d + axis]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Euclidean norm of the vector at one site.
    pub fn magnitude(&self, site: usize) -> T {
        let d = self.grid.dims();
        let mut s = T::zero();
        for axis in 0..d {
            let v = self.values[site * d + axis];
            s += v * v;
        }
        s.sqrt()
    }

    pub fn norm_max(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }
}

impl<T: Real> ComplexVectorField<T> {
    pub fn zeros(grid: LatticeGrid<T>) -> Self {
        let n = grid.site_count() * grid.dims();
        Self { grid, values: vec![C::new(T::zero(), T::zero()); n] }
    }

    pub fn grid(&self) -> &LatticeGrid<T> {
        &self.grid
    }

    pub fn comp(&self, site: usize, axis: usize) -> C<T> {
        self.values[site * self.grid.dims() + axis]
    }

    pub fn comp_mut(&mut self, site: usize, axis: usize) -> &mut C<T> {
        let d = self.grid.dims();
        &mut self.values[site * d + axis]
    }
}

/// Centered first difference of a real field: `(f_{+} - f_{-}) / 2a` per axis.
pub fn gradient<T: Real>(f: &RealField<T>) -> Result<VectorField<T>> {
    f.ensure_finite("gradient input")?;
    let grid = f.grid.clone();
    let inv2a = (T::one() + T::one()).recip() / grid.spacing();
    let mut out = VectorField::zeros(grid.clone());
    let d = grid.dims();
    grid.for_each_neighborhood(|site, nb| {
        for axis in 0..d {
            out.values[site * d + axis] =
                (f.values[nb.plus[axis]] - f.values[nb.minus[axis]]) * inv2a;
        }
    });
    Ok(out)
}

/// Centered first difference of a complex field.
pub fn gradient_complex<T: Real>(f: &ComplexField<T>) -> Result<ComplexVectorField<T>> {
    f.ensure_finite("gradient input")?;
    let grid = f.grid.clone();
    let inv2a = (T::one() + T::one()).recip() / grid.spacing();
    let mut out = ComplexVectorField::zeros(grid.clone());
    let d = grid.dims();
    grid.for_each_neighborhood(|site, nb| {
        for axis in 0..d {
            out.values[site * d + axis] =
                (f.values[nb.plus[axis]] - f.values[nb.minus[axis]]).scale(inv2a);
        }
    });
    Ok(out)
}

/// Three-point second difference summed over axes: `(f_{+} + f_{-} - 2 f) / a^2`.
pub fn laplacian<T: Real>(f: &RealField<T>) -> Result<RealField<T>> {
    f.ensure_finite("laplacian input")?;
    let grid = f.grid.clone();
    let inv_a2 = (grid.spacing() * grid.spacing()).recip();
    let two = T::one() + T::one();
    let mut out = RealField::constant(grid.clone(), T::zero());
    let d = grid.dims();
    grid.for_each_neighborhood(|site, nb| {
        let mut acc = T::zero();
        for axis in 0..d {
            acc += f.values[nb.plus[axis]] + f.values[nb.minus[axis]] - two * f.values[site];
        }
        out.values[site] = acc * inv_a2;
    });
    Ok(out)
}

pub fn laplacian_complex<T: Real>(f: &ComplexField<T>) -> Result<ComplexField<T>> {
    f.ensure_finite("laplacian input")?;
    let grid = f.grid.clone();
    let inv_a2 = (grid.spacing() * grid.spacing()).recip();
    let two = T::one() + T::one();
    let zero = C::new(T::zero(), T::zero());
    let mut out = ComplexField::constant(grid.clone(), zero);
    let d = grid.dims();
    grid.for_each_neighborhood(|site, nb| {
        let mut acc = zero;
        for axis in 0..d {
            acc += f.values[nb.plus[axis]] + f.values[nb.minus[axis]] - f.values[site].scale(two);
        }
        out.values[site] = acc.scale(inv_a2);
    });
    Ok(out)
}

/// Centered divergence of a vector field: sum over axes of `(v_{+} - v_{-}) / 2a`.
pub fn divergence<T: Real>(v: &VectorField<T>) -> Result<RealField<T>> {
    if let Some(site) = v.values.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { what: "divergence input", site: site / v.grid.dims() });
    }
    let grid = v.grid.clone();
    let inv2a = (T::one() + T::one()).recip() / grid.spacing();
    let mut out = RealField::constant(grid.clone(), T::zero());
    let d = grid.dims();
    grid.for_each_neighborhood(|site, nb| {
        let mut acc = T::zero();
        for axis in 0..d {
            acc += v.values[nb.plus[axis] * d + axis] - v.values[nb.minus[axis] * d + axis];
        }
        out.values[site] = acc * inv2a;
    });
    Ok(out)
}

/// Conservative variable-coefficient operator `div(coeff * grad f)` built from
/// bond fluxes with arithmetically averaged coefficients.
///
/// For constant `coeff` this reduces exactly to `coeff * laplacian(f)`, which
/// is what ties the density-phase fluctuation equations to the complex-field
/// linearization on homogeneous backgrounds. It is self-adjoint and its sum
/// telescopes to zero on periodic grids.
pub fn div_coeff_grad<T: Real>(coeff: &RealField<T>, f: &RealField<T>) -> Result<RealField<T>> {
    same_grid!(coeff, f, "div_coeff_grad");
    coeff.ensure_finite("div_coeff_grad coefficient")?;
    f.ensure_finite("div_coeff_grad input")?;
    let grid = f.grid.clone();
    let half = (T::one() + T::one()).recip();
    let inv_a2 = (grid.spacing() * grid.spacing()).recip();
    let mut out = RealField::constant(grid.clone(), T::zero());
    let d = grid.dims();
    grid.for_each_neighborhood(|site, nb| {
        let mut acc = T::zero();
        for axis in 0..d {
            let (p, m) = (nb.plus[axis], nb.minus[axis]);
            let flux_p = (coeff.values[site] + coeff.values[p]) * half
                * (f.values[p] - f.values[site]);
            let flux_m = (coeff.values[m] + coeff.values[site]) * half
                * (f.values[site] - f.values[m]);
            acc += flux_p - flux_m;
        }
        out.values[site] = acc * inv_a2;
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ring(n: usize) -> LatticeGrid<f64> {
        LatticeGrid::new(1, &[n], 1.0, Boundary::Periodic).unwrap()
    }

    fn chain(n: usize) -> LatticeGrid<f64> {
        LatticeGrid::new(1, &[n], 1.0, Boundary::FixedValue).unwrap()
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(LatticeGrid::new(0, &[], 1.0, Boundary::Periodic).is_err());
        assert!(LatticeGrid::new(4, &[4, 4, 4, 4], 1.0, Boundary::Periodic).is_err());
        assert!(LatticeGrid::new(1, &[2], 1.0, Boundary::Periodic).is_err());
        assert!(LatticeGrid::new(2, &[4], 1.0, Boundary::Periodic).is_err());
        assert!(LatticeGrid::new(1, &[4], 0.0, Boundary::Periodic).is_err());
        assert!(LatticeGrid::new(1, &[4], -1.0, Boundary::Periodic).is_err());
    }

    #[test]
    fn fields_reject_wrong_length_and_nan() {
        let g = ring(8);
        assert!(RealField::new(g.clone(), vec![0.0; 7]).is_err());
        let mut vals = vec![0.0; 8];
        vals[5] = f64::NAN;
        match RealField::new(g, vals) {
            Err(Error::NonFinite { site, .. }) => assert_eq!(site, 5),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        for boundary in [Boundary::Periodic, Boundary::FixedValue] {
            let g = LatticeGrid::new(2, &[8, 5], 0.5, boundary).unwrap();
            let f = RealField::constant(g, 3.25);
            let grad = gradient(&f).unwrap();
            assert_eq!(grad.values().iter().copied().fold(0.0f64, f64::max), 0.0);
            assert_eq!(grad.values().iter().copied().fold(0.0f64, f64::min), 0.0);
        }
    }

    #[test]
    fn gradient_of_sampled_sine_matches_shifted_difference() {
        // Oracle: evaluate (f(x+a) - f(x-a)) / 2a directly from the closed form.
        let n = 64;
        let g = ring(n);
        let k = 2.0 * std::f64::consts::PI * 3.0 / n as f64;
        let f = RealField::from_fn(g.clone(), |s| (k * s as f64).sin());
        let grad = gradient(&f).unwrap();
        for site in 0..n {
            let x = site as f64;
            let oracle = ((k * (x + 1.0)).sin() - (k * (x - 1.0)).sin()) / 2.0;
            assert_abs_diff_eq!(grad.comp(site, 0), oracle, epsilon = 1e-14);
            // closed form of the same thing
            assert_abs_diff_eq!(grad.comp(site, 0), (k * x).cos() * k.sin(), epsilon = 1e-13);
        }
    }

    #[test]
    fn gradient_of_linear_ramp_is_exact_in_the_interior() {
        let g = chain(9);
        let f = RealField::from_fn(g, |s| s as f64);
        let grad = gradient(&f).unwrap();
        for site in 1..8 {
            assert_eq!(grad.comp(site, 0), 1.0);
        }
        // replicated ghosts halve the one-sided slope at the edges
        assert_eq!(grad.comp(0, 0), 0.5);
        assert_eq!(grad.comp(8, 0), 0.5);
    }

    #[test]
    fn laplacian_of_constant_vanishes_both_boundaries() {
        for boundary in [Boundary::Periodic, Boundary::FixedValue] {
            let g = LatticeGrid::new(3, &[4, 4, 4], 1.0, boundary).unwrap();
            let f = RealField::constant(g, -7.5);
            let lap = laplacian(&f).unwrap();
            assert!(lap.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn laplacian_eigenvalue_on_plane_wave_quarter_band() {
        // k a = pi/2 on L = 8: eigenvalue -4 sin^2(pi/4) = -2.
        let g = ring(8);
        let f = ComplexField::plane_wave(g, [2, 0, 0], C::new(1.0, 0.0));
        let lap = laplacian_complex(&f).unwrap();
        for site in 0..8 {
            let expect = f.values()[site] * -2.0;
            assert_relative_eq!(lap.values()[site].re, expect.re, max_relative = 1e-13);
            assert_relative_eq!(lap.values()[site].im, expect.im, max_relative = 1e-13);
        }
    }

    #[test]
    fn laplacian_eigenvalue_all_commensurate_modes() {
        let n = 64;
        let g = ring(n);
        for m in 0..n as i64 {
            let f = ComplexField::plane_wave(g.clone(), [m, 0, 0], C::new(1.0, 0.0));
            let lap = laplacian_complex(&f).unwrap();
            let ka_half = std::f64::consts::PI * m as f64 / n as f64;
            let eig = -4.0 * ka_half.sin().powi(2);
            for site in 0..n {
                let expect = f.values()[site] * eig;
                let err = (lap.values()[site] - expect).norm();
                let scale = eig.abs().max(1.0);
                assert!(err <= 1e-12 * scale, "mode {m} site {site}: err {err:e}");
            }
        }
    }

    #[test]
    fn laplacian_of_single_spike() {
        let g = chain(7);
        let f = RealField::from_fn(g, |s| if s == 3 { 1.0 } else { 0.0 });
        let lap = laplacian(&f).unwrap();
        let expect = [0.0, 0.0, 1.0, -2.0, 1.0, 0.0, 0.0];
        assert_eq!(lap.values(), &expect);
    }

    #[test]
    fn divergence_of_uniform_flow_vanishes() {
        let g = LatticeGrid::new(2, &[6, 6], 1.0, Boundary::Periodic).unwrap();
        let mut v = VectorField::zeros(g.clone());
        for site in 0..g.site_count() {
            *v.comp_mut(site, 0) = 2.0;
            *v.comp_mut(site, 1) = -1.0;
        }
        let div = divergence(&v).unwrap();
        assert!(div.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn divergence_of_linear_flow_is_one_in_the_interior() {
        let g = chain(9);
        let mut v = VectorField::zeros(g.clone());
        for site in 0..9 {
            *v.comp_mut(site, 0) = site as f64;
        }
        let div = divergence(&v).unwrap();
        for site in 1..8 {
            assert_eq!(div.values()[site], 1.0);
        }
    }

    #[test]
    fn composed_first_differences_are_not_the_laplacian() {
        // div(grad f) on sin(kx) has eigenvalue -sin^2(ka)/a^2, the wide stencil.
        let n = 32;
        let g = ring(n);
        let k = 2.0 * std::f64::consts::PI * 6.0 / n as f64;
        let f = RealField::from_fn(g.clone(), |s| (k * s as f64).sin());
        let composed = divergence(&gradient(&f).unwrap()).unwrap();
        let lap = laplacian(&f).unwrap();
        let wide = -k.sin().powi(2);
        let three_point = -4.0 * (k / 2.0).sin().powi(2);
        for site in 0..n {
            assert_abs_diff_eq!(composed.values()[site], wide * f.values()[site], epsilon = 1e-13);
            assert_abs_diff_eq!(lap.values()[site], three_point * f.values()[site], epsilon = 1e-13);
        }
        assert!((wide - three_point).abs() > 0.05);
    }

    #[test]
    fn periodic_laplacian_sums_to_zero() {
        let g = LatticeGrid::new(2, &[12, 9], 0.7, Boundary::Periodic).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = RealField::from_fn(g.clone(), |_| rng.gen_range(-1.0..1.0));
        let lap = laplacian(&f).unwrap();
        let total: f64 = lap.sum();
        assert!(total.abs() <= 1e-12 * g.site_count() as f64);
    }

    #[test]
    fn stencils_are_linear_and_translation_equivariant() {
        let n = 24;
        let g = ring(n);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = RealField::from_fn(g.clone(), |_| rng.gen_range(-1.0..1.0));
        let h = RealField::from_fn(g.clone(), |_| rng.gen_range(-1.0..1.0));
        let (alpha, beta) = (1.7, -0.3);
        let combo = RealField::from_fn(g.clone(), |s| alpha * f.values()[s] + beta * h.values()[s]);

        let lap_combo = laplacian(&combo).unwrap();
        let lap_f = laplacian(&f).unwrap();
        let lap_h = laplacian(&h).unwrap();
        for s in 0..n {
            assert_relative_eq!(
                lap_combo.values()[s],
                alpha * lap_f.values()[s] + beta * lap_h.values()[s],
                max_relative = 1e-13,
                epsilon = 1e-13
            );
        }

        // shifting the input shifts the output, exactly
        let shifted = RealField::from_fn(g.clone(), |s| f.values()[(s + 1) % n]);
        let lap_shifted = laplacian(&shifted).unwrap();
        for s in 0..n {
            assert_eq!(lap_shifted.values()[s], lap_f.values()[(s + 1) % n]);
        }
    }

    #[test]
    fn conservative_variable_coefficient_operator() {
        let n = 48;
        let g = ring(n);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = RealField::from_fn(g.clone(), |_| rng.gen_range(-1.0..1.0));
        let kappa = RealField::from_fn(g.clone(), |_| rng.gen_range(0.5..2.0));

        // constant coefficient: exactly kappa * laplacian
        let const_kappa = RealField::constant(g.clone(), 1.75);
        let lhs = div_coeff_grad(&const_kappa, &f).unwrap();
        let lap = laplacian(&f).unwrap();
        for s in 0..n {
            assert_relative_eq!(lhs.values()[s], 1.75 * lap.values()[s], max_relative = 1e-13, epsilon = 1e-15);
        }

        // telescoping: total flux vanishes on a ring
        let var = div_coeff_grad(&kappa, &f).unwrap();
        assert!(var.sum().abs() <= 1e-12 * n as f64);

        // self-adjointness: <g, D f> = <D g, f>
        let g2 = RealField::from_fn(g.clone(), |_| rng.gen_range(-1.0..1.0));
        let df = div_coeff_grad(&kappa, &f).unwrap();
        let dg = div_coeff_grad(&kappa, &g2).unwrap();
        let lhs: f64 = (0..n).map(|s| g2.values()[s] * df.values()[s]).sum();
        let rhs: f64 = (0..n).map(|s| dg.values()[s] * f.values()[s]).sum();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12, epsilon = 1e-12);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let f = RealField::constant(ring(8), 1.0);
        let kappa = RealField::constant(ring(9), 1.0);
        assert!(matches!(div_coeff_grad(&kappa, &f), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn single_precision_laplacian_matches_eigenvalue() {
        let g = LatticeGrid::<f32>::new(1, &[16], 1.0f32, Boundary::Periodic).unwrap();
        let f = ComplexField::plane_wave(g, [4, 0, 0], C::new(1.0f32, 0.0));
        let lap = laplacian_complex(&f).unwrap();
        let eig = -4.0f32 * (std::f32::consts::PI * 4.0 / 16.0).sin().powi(2);
        for s in 0..16 {
            let expect = f.values()[s] * eig;
            assert!((lap.values()[s] - expect).norm() < 1e-5);
        }
    }
}
