//! Matrix kernel for U(1) and SU(2): group and algebra elements, the
//! exponential map, the adjoint action and invariant polynomials.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use thiserror::Error;

const INVARIANT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LieError {
    #[error("group mismatch: expected {expected}, found {found}")]
    GroupMismatch { expected: GroupId, found: GroupId },
    #[error("arity mismatch: polynomial of degree {degree} given {given} arguments")]
    Arity { degree: usize, given: usize },
    #[error("matrix is not an element of {0}: residual {1:.3e}")]
    NotInGroup(GroupId, f64),
    #[error("matrix is not an element of the Lie algebra of {0}: residual {1:.3e}")]
    NotInAlgebra(GroupId, f64),
    #[error("unsupported polynomial degree {0}")]
    Degree(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupId {
    U1,
    SU2,
}

impl GroupId {
    pub fn dim(self) -> usize {
        match self {
            GroupId::U1 => 1,
            GroupId::SU2 => 2,
        }
    }

    /// Normalisation constant c with p(X,Y) = -k c Tr(XY) / (4 pi^2).
    fn trace_factor(self) -> f64 {
        match self {
            GroupId::U1 => 1.0,
            GroupId::SU2 => 0.5,
        }
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupId::U1 => write!(f, "U1"),
            GroupId::SU2 => write!(f, "SU2"),
        }
    }
}

impl std::str::FromStr for GroupId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "U1" | "U(1)" => Ok(GroupId::U1),
            "SU2" | "SU(2)" => Ok(GroupId::SU2),
            other => Err(format!("unknown group `{other}`")),
        }
    }
}

/// Small complex square matrix of size 1 or 2, stored row-major.
#[derive(Clone, Copy, PartialEq)]
pub struct Mat {
    pub n: u8,
    pub e: [Complex64; 4],
}

const CZ: Complex64 = Complex64::new(0.0, 0.0);

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.n == 1 {
            write!(f, "[{}]", self.e[0])
        } else {
            write!(f, "[[{}, {}], [{}, {}]]", self.e[0], self.e[1], self.e[2], self.e[3])
        }
    }
}

impl Mat {
    #[inline]
    pub fn zero(n: usize) -> Mat {
        Mat { n: n as u8, e: [CZ; 4] }
    }

    #[inline]
    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zero(n);
        m.e[0] = Complex64::new(1.0, 0.0);
        if n == 2 {
            m.e[3] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn scalar(z: Complex64) -> Mat {
        Mat { n: 1, e: [z, CZ, CZ, CZ] }
    }

    pub fn from_rows(r: [[Complex64; 2]; 2]) -> Mat {
        Mat { n: 2, e: [r[0][0], r[0][1], r[1][0], r[1][1]] }
    }

    /// Algebra element i(a σ_x + b σ_y + c σ_z) of su(2).
    pub fn su2(a: f64, b: f64, c: f64) -> Mat {
        Mat {
            n: 2,
            e: [
                Complex64::new(0.0, c),
                Complex64::new(b, a),
                Complex64::new(-b, a),
                Complex64::new(0.0, -c),
            ],
        }
    }

    /// Coordinates (a,b,c) of an su(2) element written as i(a σ_x + b σ_y + c σ_z).
    pub fn su2_coords(&self) -> [f64; 3] {
        [self.e[1].im, self.e[1].re, self.e[0].im]
    }

    /// Algebra element i·s of u(1).
    pub fn u1(s: f64) -> Mat {
        Mat::scalar(Complex64::new(0.0, s))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n as usize
    }

    #[inline]
    pub fn trace(&self) -> Complex64 {
        if self.n == 1 {
            self.e[0]
        } else {
            self.e[0] + self.e[3]
        }
    }

    /// Re Tr(self · other) without forming the product.
    #[inline]
    pub fn re_trace_mul(&self, o: &Mat) -> f64 {
        if self.n == 1 {
            (self.e[0] * o.e[0]).re
        } else {
            (self.e[0] * o.e[0] + self.e[1] * o.e[2] + self.e[2] * o.e[1] + self.e[3] * o.e[3]).re
        }
    }

    pub fn det(&self) -> Complex64 {
        if self.n == 1 {
            self.e[0]
        } else {
            self.e[0] * self.e[3] - self.e[1] * self.e[2]
        }
    }

    pub fn adjoint_conj(&self) -> Mat {
        let mut m = *self;
        if self.n == 1 {
            m.e[0] = self.e[0].conj();
        } else {
            m.e[0] = self.e[0].conj();
            m.e[1] = self.e[2].conj();
            m.e[2] = self.e[1].conj();
            m.e[3] = self.e[3].conj();
        }
        m
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Mat {
        let mut m = *self;
        for z in m.e.iter_mut() {
            *z *= s;
        }
        m
    }

    #[inline]
    pub fn scale_c(&self, s: Complex64) -> Mat {
        let mut m = *self;
        for z in m.e.iter_mut() {
            *z *= s;
        }
        m
    }

    #[inline]
    pub fn commutator(&self, o: &Mat) -> Mat {
        if self.n == 1 {
            Mat::zero(1)
        } else {
            *self * *o - *o * *self
        }
    }

    /// Max-entry norm.
    pub fn norm_max(&self) -> f64 {
        self.e[..self.n as usize * self.n as usize]
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Inverse of a unitary matrix.
    #[inline]
    pub fn unitary_inverse(&self) -> Mat {
        self.adjoint_conj()
    }

    pub fn is_finite(&self) -> bool {
        self.e.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Add for Mat {
    type Output = Mat;
    #[inline]
    fn add(mut self, o: Mat) -> Mat {
        for i in 0..4 {
            self.e[i] += o.e[i];
        }
        self
    }
}

impl AddAssign for Mat {
    #[inline]
    fn add_assign(&mut self, o: Mat) {
        for i in 0..4 {
            self.e[i] += o.e[i];
        }
    }
}

impl Sub for Mat {
    type Output = Mat;
    #[inline]
    fn sub(mut self, o: Mat) -> Mat {
        for i in 0..4 {
            self.e[i] -= o.e[i];
        }
        self
    }
}

impl SubAssign for Mat {
    #[inline]
    fn sub_assign(&mut self, o: Mat) {
        for i in 0..4 {
            self.e[i] -= o.e[i];
        }
    }
}

impl Neg for Mat {
    type Output = Mat;
    #[inline]
    fn neg(self) -> Mat {
        self.scale(-1.0)
    }
}

impl Mul for Mat {
    type Output = Mat;
    #[inline]
    fn mul(self, o: Mat) -> Mat {
        if self.n == 1 {
            Mat::scalar(self.e[0] * o.e[0])
        } else {
            let a = &self.e;
            let b = &o.e;
            Mat {
                n: 2,
                e: [
                    a[0] * b[0] + a[1] * b[2],
                    a[0] * b[1] + a[1] * b[3],
                    a[2] * b[0] + a[3] * b[2],
                    a[2] * b[1] + a[3] * b[3],
                ],
            }
        }
    }
}

/// Validated element of the Lie algebra of U(1) or SU(2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgebraElement {
    pub group: GroupId,
    pub m: Mat,
}

impl AlgebraElement {
    pub fn new(group: GroupId, m: Mat) -> Result<Self, LieError> {
        let r = algebra_residual(group, &m);
        if r > INVARIANT_TOL || m.dim() != group.dim() {
            return Err(LieError::NotInAlgebra(group, r));
        }
        Ok(AlgebraElement { group, m })
    }

    pub fn zero(group: GroupId) -> Self {
        AlgebraElement { group, m: Mat::zero(group.dim()) }
    }
}

/// Distance of a matrix from the Lie algebra: anti-Hermitian and (for SU2) traceless.
pub fn algebra_residual(group: GroupId, m: &Mat) -> f64 {
    let ah = (*m + m.adjoint_conj()).norm_max();
    match group {
        GroupId::U1 => ah,
        GroupId::SU2 => ah.max(m.trace().norm()),
    }
}

/// Distance of a matrix from the group: unitary and (for SU2) unit determinant.
pub fn group_residual(group: GroupId, m: &Mat) -> f64 {
    let n = group.dim();
    let u = (*m * m.adjoint_conj() - Mat::identity(n)).norm_max();
    match group {
        GroupId::U1 => u,
        GroupId::SU2 => u.max((m.det() - Complex64::new(1.0, 0.0)).norm()),
    }
}

/// Validated element of U(1) or SU(2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupElement {
    pub group: GroupId,
    pub m: Mat,
}

impl GroupElement {
    pub fn new(group: GroupId, m: Mat) -> Result<Self, LieError> {
        let r = group_residual(group, &m);
        if r > INVARIANT_TOL || m.dim() != group.dim() {
            return Err(LieError::NotInGroup(group, r));
        }
        Ok(GroupElement { group, m })
    }

    pub fn identity(group: GroupId) -> Self {
        GroupElement { group, m: Mat::identity(group.dim()) }
    }

    pub fn inverse(&self) -> Self {
        GroupElement { group: self.group, m: self.m.unitary_inverse() }
    }

    pub fn compose(&self, o: &GroupElement) -> Result<Self, LieError> {
        check_group(self.group, o.group)?;
        Ok(GroupElement { group: self.group, m: self.m * o.m })
    }
}

fn check_group(expected: GroupId, found: GroupId) -> Result<(), LieError> {
    if expected != found {
        return Err(LieError::GroupMismatch { expected, found });
    }
    Ok(())
}

/// exp(tX) for X in u(1) or su(2), in closed form.
#[inline]
pub fn exp_mat(x: &Mat, t: f64) -> Mat {
    if x.n == 1 {
        Mat::scalar((x.e[0] * t).exp())
    } else {
        // X^2 = -|v|^2 I for X = i v·σ
        let v2 = -0.5 * x.re_trace_mul(x);
        let th = v2.max(0.0).sqrt() * t;
        let sinc = if th.abs() < 1e-4 {
            t * (1.0 - th * th / 6.0 + th.powi(4) / 120.0)
        } else {
            t * th.sin() / th
        };
        Mat::identity(2).scale(th.cos()) + x.scale(sinc)
    }
}

pub fn exp_map(x: &AlgebraElement, t: f64) -> GroupElement {
    GroupElement { group: x.group, m: exp_mat(&x.m, t) }
}

/// Right-trivialised differential of exp: (d exp(X)[Y]) exp(-X) = Σ ad_X^k Y / (k+1)!.
#[inline]
pub fn dexp_right(x: &Mat, y: &Mat) -> Mat {
    if x.n == 1 {
        return *y;
    }
    let v2 = -0.5 * x.re_trace_mul(x);
    // ad_X has eigenvalues 0, ±2i|v|
    let r2 = 4.0 * v2.max(0.0);
    let (a, b) = if r2 < 1e-6 {
        (0.5 - r2 / 24.0 + r2 * r2 / 720.0, 1.0 / 6.0 - r2 / 120.0 + r2 * r2 / 5040.0)
    } else {
        let r = r2.sqrt();
        ((1.0 - r.cos()) / r2, (r - r.sin()) / (r2 * r))
    };
    let c1 = x.commutator(y);
    let c2 = x.commutator(&c1);
    *y + c1.scale(a) + c2.scale(b)
}

#[inline]
pub fn ad(g: &Mat, x: &Mat) -> Mat {
    if g.n == 1 {
        *x
    } else {
        *g * *x * g.unitary_inverse()
    }
}

pub fn adjoint(g: &GroupElement, x: &AlgebraElement) -> Result<AlgebraElement, LieError> {
    check_group(g.group, x.group)?;
    Ok(AlgebraElement { group: x.group, m: ad(&g.m, &x.m) })
}

/// A Weil polynomial with its level. Only degree 2 ships; the polarised form
/// is stored as the bilinear map p(X,Y) = coef · Re Tr(XY).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicPair {
    pub degree: usize,
    pub group: GroupId,
    pub level: i64,
}

impl CharacteristicPair {
    pub fn new(group: GroupId, level: i64) -> Self {
        CharacteristicPair { degree: 2, group, level }
    }

    /// Coefficient c with p(X,Y) = c Re Tr(XY).
    #[inline]
    pub fn coef(&self) -> f64 {
        -(self.level as f64) * self.group.trace_factor() / (4.0 * PI * PI)
    }

    /// Symmetric bilinear evaluation on raw matrices.
    #[inline]
    pub fn pair(&self, x: &Mat, y: &Mat) -> f64 {
        self.coef() * 0.5 * (x.re_trace_mul(y) + y.re_trace_mul(x))
    }
}

pub fn eval_polynomial(p: &CharacteristicPair, xs: &[AlgebraElement]) -> Result<f64, LieError> {
    if p.degree != 2 {
        return Err(LieError::Degree(p.degree));
    }
    if xs.len() != p.degree {
        return Err(LieError::Arity { degree: p.degree, given: xs.len() });
    }
    for x in xs {
        check_group(p.group, x.group)?;
    }
    Ok(p.pair(&xs[0].m, &xs[1].m))
}
