//! Reparameterizations (diffeomorphisms) of box domains: forward/inverse
//! evaluation, absolute Jacobian determinants, composition, and the built-in
//! registry used by scenario files.

use std::sync::Arc;

use crate::error::{AuditError, Result};
use crate::scalar::{cst, Scalar};

type MapFn<F> = Arc<dyn Fn(&[F]) -> Result<Vec<F>> + Send + Sync>;
type JacFn<F> = Arc<dyn Fn(&[F]) -> F + Send + Sync>;

/// Axis-aligned box domain.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain<F: Scalar> {
    pub lo: Vec<F>,
    pub hi: Vec<F>,
}

impl<F: Scalar> BoxDomain<F> {
    pub fn new(lo: Vec<F>, hi: Vec<F>) -> Self {
        assert_eq!(lo.len(), hi.len(), "box bounds must have equal length");
        for i in 0..lo.len() {
            assert!(lo[i] < hi[i], "box must satisfy lo[i] < hi[i] on axis {i}");
        }
        BoxDomain { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> F {
        self.lo
            .iter()
            .zip(&self.hi)
            .fold(F::one(), |acc, (&l, &h)| acc * (h - l))
    }

    /// Boundaries count as inside (measure-zero convention).
    pub fn contains(&self, x: &[F]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&xi, (&l, &h))| xi >= l && xi <= h)
    }

    pub fn center(&self) -> Vec<F> {
        let half = cst::<F>(0.5);
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| (l + h) * half)
            .collect()
    }

    /// Cube centered at `c` with half-width `half` on every axis.
    pub fn cube_around(c: &[F], half: F) -> Self {
        BoxDomain::new(
            c.iter().map(|&v| v - half).collect(),
            c.iter().map(|&v| v + half).collect(),
        )
    }
}

/// A differentiable invertible coordinate transform with Jacobian access.
///
/// Immutable after construction; cheap to clone and safe to share across
/// threads.
#[derive(Clone)]
pub struct Diffeo<F: Scalar> {
    dim: usize,
    name: String,
    forward: MapFn<F>,
    inverse: MapFn<F>,
    jac_det: Option<JacFn<F>>,
    inv_jac_det: Option<JacFn<F>>,
}

impl<F: Scalar> std::fmt::Debug for Diffeo<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Diffeo")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish()
    }
}

impl<F: Scalar> Diffeo<F> {
    pub fn new(
        dim: usize,
        name: impl Into<String>,
        forward: MapFn<F>,
        inverse: MapFn<F>,
        jac_det: Option<JacFn<F>>,
        inv_jac_det: Option<JacFn<F>>,
    ) -> Self {
        Diffeo {
            dim,
            name: name.into(),
            forward,
            inverse,
            jac_det,
            inv_jac_det,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn apply(&self, x: &[F]) -> Result<Vec<F>> {
        if x.len() != self.dim {
            return Err(AuditError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        (self.forward)(x)
    }

    pub fn apply_inverse(&self, y: &[F]) -> Result<Vec<F>> {
        if y.len() != self.dim {
            return Err(AuditError::DimensionMismatch {
                expected: self.dim,
                got: y.len(),
            });
        }
        (self.inverse)(y)
    }

    /// |det J| of the forward map at `x`: analytic when available, otherwise
    /// a central finite-difference determinant.
    pub fn jac_det_abs(&self, x: &[F]) -> Result<F> {
        let v = match &self.jac_det {
            Some(j) => j(x).abs(),
            None => {
                let m = fd_jacobian(&*self.forward, x, None)?;
                det(&m).abs()
            }
        };
        if v < cst(1e-14) {
            return Err(AuditError::SingularJacobian);
        }
        Ok(v)
    }

    /// The same transform with forward and inverse roles swapped.
    pub fn inverse(&self) -> Diffeo<F> {
        Diffeo {
            dim: self.dim,
            name: format!("{}_inv", self.name),
            forward: Arc::clone(&self.inverse),
            inverse: Arc::clone(&self.forward),
            jac_det: self.inv_jac_det.clone(),
            inv_jac_det: self.jac_det.clone(),
        }
    }

    /// Composition `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Diffeo<F>) -> Result<Diffeo<F>> {
        if self.dim != other.dim {
            return Err(AuditError::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let f1 = Arc::clone(&other.forward);
        let f2 = Arc::clone(&self.forward);
        let i1 = Arc::clone(&other.inverse);
        let i2 = Arc::clone(&self.inverse);
        let forward: MapFn<F> = Arc::new(move |x: &[F]| f2(&f1(x)?));
        let inverse: MapFn<F> = Arc::new(move |y: &[F]| i1(&i2(y)?));
        // chain rule for the composed determinant when both factors are analytic
        let jac_det = match (&self.jac_det, &other.jac_det) {
            (Some(ja), Some(jb)) => {
                let fwd_b = Arc::clone(&other.forward);
                let ja = Arc::clone(ja);
                let jb = Arc::clone(jb);
                let j: JacFn<F> = Arc::new(move |x: &[F]| match fwd_b(x) {
                    Ok(mid) => ja(&mid) * jb(x),
                    Err(_) => F::nan(),
                });
                Some(j)
            }
            _ => None,
        };
        let inv_jac_det = match (&self.inv_jac_det, &other.inv_jac_det) {
            (Some(ja), Some(jb)) => {
                let inv_a = Arc::clone(&self.inverse);
                let ja = Arc::clone(ja);
                let jb = Arc::clone(jb);
                let j: JacFn<F> = Arc::new(move |y: &[F]| match inv_a(y) {
                    Ok(mid) => jb(&mid) * ja(y),
                    Err(_) => F::nan(),
                });
                Some(j)
            }
            _ => None,
        };
        Ok(Diffeo {
            dim: self.dim,
            name: format!("{}∘{}", self.name, other.name),
            forward,
            inverse,
            jac_det,
            inv_jac_det,
        })
    }
}

/// Central-difference Jacobian matrix of `map` at `x`; O(h²) accurate.
/// Default step per axis is 1e-6·(1+|x_i|).
pub fn fd_jacobian<F: Scalar>(
    map: &(dyn Fn(&[F]) -> Result<Vec<F>> + Sync),
    x: &[F],
    h: Option<&[F]>,
) -> Result<Vec<Vec<F>>> {
    let n = x.len();
    let default_h: Vec<F> = x
        .iter()
        .map(|&xi| cst::<F>(1e-6) * (F::one() + xi.abs()))
        .collect();
    let steps = h.unwrap_or(&default_h);
    let mut cols: Vec<Vec<F>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += steps[j];
        xm[j] -= steps[j];
        let fp = map(&xp)?;
        let fm = map(&xm)?;
        let two_h = steps[j] + steps[j];
        cols.push(
            fp.iter()
                .zip(&fm)
                .map(|(&a, &b)| (a - b) / two_h)
                .collect(),
        );
    }
    // transpose columns into rows: J[i][j] = ∂f_i/∂x_j
    let m = cols[0].len();
    let mut jac = vec![vec![F::zero(); n]; m];
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            jac[i][j] = v;
        }
    }
    Ok(jac)
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det<F: Scalar>(m: &[Vec<F>]) -> F {
    let n = m.len();
    let mut a: Vec<Vec<F>> = m.to_vec();
    let mut sign = F::one();
    for k in 0..n {
        let mut piv = k;
        for r in k + 1..n {
            if a[r][k].abs() > a[piv][k].abs() {
                piv = r;
            }
        }
        if a[piv][k] == F::zero() {
            return F::zero();
        }
        if piv != k {
            a.swap(piv, k);
            sign = -sign;
        }
        for r in k + 1..n {
            let factor = a[r][k] / a[k][k];
            for c in k..n {
                let v = a[k][c];
                a[r][c] -= factor * v;
            }
        }
    }
    let mut d = sign;
    for (k, row) in a.iter().enumerate() {
        d *= row[k];
    }
    d
}

fn check_dim<F: Scalar>(x: &[F], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(AuditError::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    Ok(())
}

pub fn identity<F: Scalar>(dim: usize) -> Diffeo<F> {
    let fwd: MapFn<F> = Arc::new(move |x: &[F]| {
        check_dim(x, dim)?;
        Ok(x.to_vec())
    });
    let jac: JacFn<F> = Arc::new(|_| F::one());
    Diffeo::new(
        dim,
        "identity",
        Arc::clone(&fwd),
        fwd,
        Some(Arc::clone(&jac)),
        Some(jac),
    )
}

/// Componentwise reciprocal s_i = 1/v_i. Self-inverse; |det J| = Π v_i⁻².
pub fn reciprocal<F: Scalar>(dim: usize) -> Diffeo<F> {
    let fwd: MapFn<F> = Arc::new(move |x: &[F]| {
        check_dim(x, dim)?;
        if x.iter().any(|&v| v.abs() < cst(1e-300)) {
            return Err(AuditError::Domain("reciprocal map needs nonzero components".into()));
        }
        Ok(x.iter().map(|&v| F::one() / v).collect())
    });
    let jac: JacFn<F> = Arc::new(|x: &[F]| {
        x.iter()
            .fold(F::one(), |acc, &v| acc / (v * v))
    });
    Diffeo::new(
        dim,
        "reciprocal",
        Arc::clone(&fwd),
        fwd,
        Some(Arc::clone(&jac)),
        Some(jac),
    )
}

/// y₀ = tan(x₀), other axes unchanged; x₀ must stay inside (−π/2, π/2).
pub fn tan_axis0<F: Scalar>(dim: usize) -> Diffeo<F> {
    let half_pi = F::FRAC_PI_2();
    let fwd: MapFn<F> = Arc::new(move |x: &[F]| {
        check_dim(x, dim)?;
        if x[0].abs() >= half_pi {
            return Err(AuditError::Domain("tan_axis0 needs |x₀| < π/2".into()));
        }
        let mut y = x.to_vec();
        y[0] = x[0].tan();
        Ok(y)
    });
    let inv: MapFn<F> = Arc::new(move |y: &[F]| {
        check_dim(y, dim)?;
        let mut x = y.to_vec();
        x[0] = y[0].atan();
        Ok(x)
    });
    let jac: JacFn<F> = Arc::new(|x: &[F]| {
        let c = x[0].cos();
        F::one() / (c * c)
    });
    let inv_jac: JacFn<F> = Arc::new(|y: &[F]| F::one() / (y[0] * y[0] + F::one()));
    Diffeo::new(dim, "tan_axis0", fwd, inv, Some(jac), Some(inv_jac))
}

/// y₀ = x₀², other axes unchanged; requires x₀ > 0.
pub fn square_axis0<F: Scalar>(dim: usize) -> Diffeo<F> {
    let fwd: MapFn<F> = Arc::new(move |x: &[F]| {
        check_dim(x, dim)?;
        if x[0] <= F::zero() {
            return Err(AuditError::Domain("square_axis0 needs x₀ > 0".into()));
        }
        let mut y = x.to_vec();
        y[0] = x[0] * x[0];
        Ok(y)
    });
    let inv: MapFn<F> = Arc::new(move |y: &[F]| {
        check_dim(y, dim)?;
        if y[0] <= F::zero() {
            return Err(AuditError::Domain("square_axis0 inverse needs y₀ > 0".into()));
        }
        let mut x = y.to_vec();
        x[0] = y[0].sqrt();
        Ok(x)
    });
    let two = cst::<F>(2.0);
    let half = cst::<F>(0.5);
    let jac: JacFn<F> = Arc::new(move |x: &[F]| two * x[0]);
    let inv_jac: JacFn<F> = Arc::new(move |y: &[F]| half / y[0].sqrt());
    Diffeo::new(dim, "square_axis0", fwd, inv, Some(jac), Some(inv_jac))
}

/// Componentwise cube y_i = x_i³ on positive coordinates.
pub fn cube_all<F: Scalar>(dim: usize) -> Diffeo<F> {
    let fwd: MapFn<F> = Arc::new(move |x: &[F]| {
        check_dim(x, dim)?;
        if x.iter().any(|&v| v <= F::zero()) {
            return Err(AuditError::Domain("cube_all needs positive components".into()));
        }
        Ok(x.iter().map(|&v| v * v * v).collect())
    });
    let third = F::one() / cst::<F>(3.0);
    let inv: MapFn<F> = Arc::new(move |y: &[F]| {
        check_dim(y, dim)?;
        if y.iter().any(|&v| v <= F::zero()) {
            return Err(AuditError::Domain("cube_all inverse needs positive components".into()));
        }
        Ok(y.iter().map(|&v| v.powf(third)).collect())
    });
    let three = cst::<F>(3.0);
    let jac: JacFn<F> = Arc::new(move |x: &[F]| {
        x.iter().fold(F::one(), |acc, &v| acc * three * v * v)
    });
    let inv_jac: JacFn<F> = Arc::new(move |y: &[F]| {
        let two_thirds = cst::<F>(2.0) / cst::<F>(3.0);
        y.iter()
            .fold(F::one(), |acc, &v| acc / (three * v.powf(two_thirds)))
    });
    Diffeo::new(dim, "cube_all", fwd, inv, Some(jac), Some(inv_jac))
}

/// Cartesian → spherical data coordinates:
/// r = ‖d‖, θ = arccos(d_z/r), φ = sign(d_y)·arccos(d_x/√(d_x²+d_y²)),
/// with φ = 0 at the pole (d_x²+d_y² < 1e-300, a measure-zero convention).
/// Out-of-domain points (r = 0, θ ∉ (0,π) for the inverse Jacobian) are
/// rejected rather than given a convention.
pub fn cart_to_spherical<F: Scalar>() -> Diffeo<F> {
    let fwd: MapFn<F> = Arc::new(move |d: &[F]| {
        check_dim(d, 3)?;
        let (x, y, z) = (d[0], d[1], d[2]);
        let r = (x * x + y * y + z * z).sqrt();
        if r < cst(1e-300) {
            return Err(AuditError::Domain("spherical map undefined at the origin".into()));
        }
        let theta = (z / r).min(F::one()).max(-F::one()).acos();
        let rho2 = x * x + y * y;
        let phi = if rho2 < cst(1e-300) {
            F::zero()
        } else {
            let c = (x / rho2.sqrt()).min(F::one()).max(-F::one());
            let base = c.acos();
            if y < F::zero() {
                -base
            } else {
                base
            }
        };
        Ok(vec![r, theta, phi])
    });
    let inv: MapFn<F> = Arc::new(move |s: &[F]| {
        check_dim(s, 3)?;
        let (r, theta, phi) = (s[0], s[1], s[2]);
        if r <= F::zero() {
            return Err(AuditError::Domain("spherical inverse needs r > 0".into()));
        }
        if theta < F::zero() || theta > F::PI() {
            return Err(AuditError::Domain("spherical inverse needs θ ∈ [0,π]".into()));
        }
        let st = theta.sin();
        Ok(vec![r * st * phi.cos(), r * st * phi.sin(), r * theta.cos()])
    });
    // forward |det J| = 1/(r² sin θ); inverse |det J| = r² sin θ
    let jac: JacFn<F> = Arc::new(|d: &[F]| {
        let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        let r = r2.sqrt();
        let st = (F::one() - (d[2] / r).powi(2)).max(F::zero()).sqrt();
        F::one() / (r2 * st)
    });
    let inv_jac: JacFn<F> = Arc::new(|s: &[F]| s[0] * s[0] * s[1].sin());
    Diffeo::new(3, "cart_to_spherical", fwd, inv, Some(jac), Some(inv_jac))
}

/// Hyperbolic coordinates on the positive quadrant:
/// u = ½ ln(T/ρ), v = √(Tρ); inverse T = v·eᵘ, ρ = v·e⁻ᵘ.
/// |det J| of the forward map is 1/(2v); of the inverse, 2v.
pub fn hyperbolic_trho<F: Scalar>() -> Diffeo<F> {
    let half = cst::<F>(0.5);
    let fwd: MapFn<F> = Arc::new(move |x: &[F]| {
        check_dim(x, 2)?;
        let (t, rho) = (x[0], x[1]);
        if t <= F::zero() || rho <= F::zero() {
            return Err(AuditError::Domain("hyperbolic map needs T, ρ > 0".into()));
        }
        Ok(vec![half * (t / rho).ln(), (t * rho).sqrt()])
    });
    let inv: MapFn<F> = Arc::new(move |y: &[F]| {
        check_dim(y, 2)?;
        let (u, v) = (y[0], y[1]);
        if v <= F::zero() {
            return Err(AuditError::Domain("hyperbolic inverse needs v > 0".into()));
        }
        Ok(vec![v * u.exp(), v * (-u).exp()])
    });
    let two = cst::<F>(2.0);
    let jac: JacFn<F> = Arc::new(move |x: &[F]| {
        let v = (x[0] * x[1]).sqrt();
        F::one() / (two * v)
    });
    let inv_jac: JacFn<F> = Arc::new(move |y: &[F]| two * y[1]);
    Diffeo::new(2, "hyperbolic_Trho", fwd, inv, Some(jac), Some(inv_jac))
}

/// Resolve a registry id (the names scenario files may use).
pub fn registry<F: Scalar>(name: &str, dim: usize) -> Result<Diffeo<F>> {
    match name {
        "identity" => Ok(identity(dim)),
        "reciprocal" => Ok(reciprocal(dim)),
        "tan_axis0" => Ok(tan_axis0(dim)),
        "square_axis0" => Ok(square_axis0(dim)),
        "cube_all" => Ok(cube_all(dim)),
        "cart_to_spherical" => {
            if dim != 3 {
                return Err(AuditError::DimensionMismatch { expected: 3, got: dim });
            }
            Ok(cart_to_spherical())
        }
        "hyperbolic_Trho" => {
            if dim != 2 {
                return Err(AuditError::DimensionMismatch { expected: 2, got: dim });
            }
            Ok(hyperbolic_trho())
        }
        other => Err(AuditError::Validation(format!("unknown diffeo id '{other}'"))),
    }
}

/// All registry entries at a given dimension, for sweep-style tests.
pub fn registry_names() -> &'static [&'static str] {
    &[
        "identity",
        "reciprocal",
        "tan_axis0",
        "square_axis0",
        "cube_all",
        "cart_to_spherical",
        "hyperbolic_Trho",
    ]
}
