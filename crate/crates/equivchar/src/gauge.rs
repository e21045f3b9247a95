//! Connections on trivial bundles, gauge maps with homotopy data, the gauge
//! action, curves of connections with twisted endpoints and equivariant families.

use crate::fields::{FormField, Grid, TrigField, MAX_DIM};
use crate::lie::{ad, dexp_right, exp_mat, group_residual, GroupId, Mat};
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

pub const ENDPOINT_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaugeError {
    #[error("group mismatch")]
    GroupMismatch,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("endpoint mismatch: residual {0:.3e}")]
    Endpoint(f64),
    #[error("gauge map has winding {0:?} and no nullhomotopy")]
    NotNullHomotopic(Vec<i64>),
    #[error("winding factors only exist for U1")]
    WindingGroup,
    #[error("curve has no pieces")]
    Empty,
    #[error("family is not invariant under its generators: residual {0:.3e}")]
    NotInvariant(f64),
}

/// Index of the pair (i,j), i<j, among sorted pairs of up to four axes.
#[inline]
pub fn pair_index(i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < MAX_DIM);
    match (i, j) {
        (0, 1) => 0,
        (0, 2) => 1,
        (0, 3) => 2,
        (1, 2) => 3,
        (1, 3) => 4,
        _ => 5,
    }
}

/// Pointwise data of a connection: components A_i and curvature F_ij.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnJet {
    pub d: usize,
    pub a: [Mat; MAX_DIM],
    pub f: [Mat; 6],
}

impl ConnJet {
    pub fn zero(n: usize, d: usize) -> ConnJet {
        ConnJet { d, a: [Mat::zero(n); MAX_DIM], f: [Mat::zero(n); 6] }
    }

    pub fn n(&self) -> usize {
        self.a[0].dim()
    }

    #[inline]
    pub fn fc(&self, i: usize, j: usize) -> Mat {
        if i < j {
            self.f[pair_index(i, j)]
        } else if i > j {
            -self.f[pair_index(j, i)]
        } else {
            Mat::zero(self.n())
        }
    }

    /// (α∧β)_ij = α_i β_j − α_j β_i for matrix-valued 1-forms.
    #[inline]
    pub fn wedge11(d: usize, x: &[Mat; MAX_DIM], y: &[Mat; MAX_DIM]) -> [Mat; 6] {
        let mut o = [Mat::zero(x[0].dim()); 6];
        for i in 0..d {
            for j in i + 1..d {
                o[pair_index(i, j)] = x[i] * y[j] - x[j] * y[i];
            }
        }
        o
    }

    /// Gauge action with g and r_i = (∂_i g) g⁻¹.
    #[inline]
    pub fn gauged(&self, g: &Mat, r: &[Mat; MAX_DIM]) -> ConnJet {
        let mut out = *self;
        for i in 0..self.d {
            out.a[i] = ad(g, &self.a[i]) - r[i];
        }
        for k in 0..6 {
            out.f[k] = ad(g, &self.f[k]);
        }
        out
    }

    /// Affine combination Σ c_k A_k with Σ c_k = 1.
    pub fn affine(terms: &[(f64, ConnJet)]) -> ConnJet {
        let d = terms[0].1.d;
        let n = terms[0].1.n();
        let mut a = [Mat::zero(n); MAX_DIM];
        for (c, j) in terms {
            for i in 0..d {
                a[i] += j.a[i].scale(*c);
            }
        }
        let aa = ConnJet::wedge11(d, &a, &a);
        let mut f = aa;
        for (c, j) in terms {
            let jj = ConnJet::wedge11(d, &j.a, &j.a);
            for k in 0..6 {
                f[k] += (j.f[k] - jj[k]).scale(*c);
            }
        }
        ConnJet { d, a, f }
    }

    pub fn max_diff(&self, o: &ConnJet) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.d {
            m = m.max((self.a[i] - o.a[i]).norm_max());
        }
        m
    }
}

/// One multiplicative factor of a gauge map.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    /// exp(scale · ξ(x)) with ξ algebra-valued.
    Exp { field: TrigField, scale: f64 },
    /// exp(2πi m·x), U1 only.
    Winding { m: [i64; MAX_DIM] },
}

/// A G-valued map on a torus given as a product of factors. Exponential factors
/// carry the nullhomotopy s ↦ Π exp((1−s)ξ_j); winding factors have none.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeMap {
    pub group: GroupId,
    pub dim: usize,
    pub factors: Vec<Factor>,
}

impl GaugeMap {
    pub fn identity(group: GroupId, dim: usize) -> GaugeMap {
        GaugeMap { group, dim, factors: Vec::new() }
    }

    pub fn exp(group: GroupId, dim: usize, xi: TrigField) -> GaugeMap {
        GaugeMap { group, dim, factors: vec![Factor::Exp { field: xi, scale: 1.0 }] }
    }

    pub fn exp_scaled(group: GroupId, dim: usize, xi: TrigField, scale: f64) -> GaugeMap {
        GaugeMap { group, dim, factors: vec![Factor::Exp { field: xi, scale }] }
    }

    pub fn winding(dim: usize, m: &[i64]) -> GaugeMap {
        let mut w = [0; MAX_DIM];
        w[..m.len()].copy_from_slice(m);
        GaugeMap { group: GroupId::U1, dim, factors: vec![Factor::Winding { m: w }] }
    }

    /// φ'·φ where self = φ' (applied after φ).
    pub fn compose(&self, phi: &GaugeMap) -> Result<GaugeMap, GaugeError> {
        if self.group != phi.group {
            return Err(GaugeError::GroupMismatch);
        }
        if self.dim != phi.dim {
            return Err(GaugeError::DimMismatch(self.dim, phi.dim));
        }
        let mut factors = self.factors.clone();
        factors.extend(phi.factors.iter().cloned());
        Ok(GaugeMap { group: self.group, dim: self.dim, factors })
    }

    pub fn inverse(&self) -> GaugeMap {
        let factors = self
            .factors
            .iter()
            .rev()
            .map(|f| match f {
                Factor::Exp { field, scale } => Factor::Exp { field: field.clone(), scale: -scale },
                Factor::Winding { m } => Factor::Winding { m: m.map(|v| -v) },
            })
            .collect();
        GaugeMap { group: self.group, dim: self.dim, factors }
    }

    /// Conjugate φ'φφ'⁻¹ with self = φ'.
    pub fn conjugate(&self, phi: &GaugeMap) -> Result<GaugeMap, GaugeError> {
        self.compose(phi)?.compose(&self.inverse())
    }

    pub fn windings(&self) -> Vec<i64> {
        let mut w = vec![0; self.dim];
        for f in &self.factors {
            if let Factor::Winding { m } = f {
                for a in 0..self.dim {
                    w[a] += m[a];
                }
            }
        }
        w
    }

    pub fn is_null_homotopic(&self) -> bool {
        self.windings().iter().all(|&w| w == 0)
    }

    pub fn validate(&self) -> Result<(), GaugeError> {
        if self.group == GroupId::SU2 && self.factors.iter().any(|f| matches!(f, Factor::Winding { .. })) {
            return Err(GaugeError::WindingGroup);
        }
        Ok(())
    }

    /// Value g and right logarithmic derivatives (∂_a g) g⁻¹ of Π_j exp(s·ξ_j), together
    /// with (∂_s g) g⁻¹. Winding factors are taken at full strength.
    #[inline]
    pub fn eval_scaled(&self, x: &[f64; MAX_DIM], s: f64) -> (Mat, [Mat; MAX_DIM], Mat) {
        let n = self.group.dim();
        let mut g = Mat::identity(n);
        let mut r = [Mat::zero(n); MAX_DIM];
        let mut rs = Mat::zero(n);
        for f in &self.factors {
            let (v, rf, rsf) = match f {
                Factor::Exp { field, scale } => {
                    let (xi, dxi) = field.eval_grad(x);
                    let c = scale * s;
                    let x0 = xi.scale(c);
                    let v = exp_mat(&x0, 1.0);
                    let mut rf = [Mat::zero(n); MAX_DIM];
                    for a in 0..MAX_DIM {
                        rf[a] = dexp_right(&x0, &dxi[a].scale(c));
                    }
                    (v, rf, xi.scale(*scale))
                }
                Factor::Winding { m } => {
                    let ph: f64 = (0..self.dim).map(|a| m[a] as f64 * x[a]).sum();
                    let v = Mat::scalar(Complex64::new(0.0, 2.0 * PI * ph).exp());
                    let mut rf = [Mat::zero(n); MAX_DIM];
                    for a in 0..self.dim {
                        rf[a] = Mat::u1(2.0 * PI * m[a] as f64);
                    }
                    (v, rf, Mat::zero(n))
                }
            };
            for a in 0..MAX_DIM {
                r[a] += ad(&g, &rf[a]);
            }
            rs += ad(&g, &rsf);
            g = g * v;
        }
        (g, r, rs)
    }

    #[inline]
    pub fn eval(&self, x: &[f64; MAX_DIM]) -> (Mat, [Mat; MAX_DIM]) {
        let (g, r, _) = self.eval_scaled(x, 1.0);
        (g, r)
    }

    /// Nullhomotopy witness g(·,s) = Π exp((1−s)ξ_j): g(·,0)=φ, g(·,1)=e.
    pub fn witness(&self, x: &[f64; MAX_DIM], s: f64) -> Result<Mat, GaugeError> {
        if !self.is_null_homotopic() {
            return Err(GaugeError::NotNullHomotopic(self.windings()));
        }
        Ok(self.eval_scaled(x, 1.0 - s).0)
    }

    /// Numerically integrated windings of a U1 map along each coordinate circle.
    pub fn numeric_windings(&self, samples: usize) -> Vec<f64> {
        (0..self.dim)
            .map(|a| {
                let mut total = 0.0;
                let mut x = [0.13, 0.29, 0.41, 0.57];
                x[a] = 0.0;
                for i in 0..samples {
                    x[a] = (i as f64 + 0.5) / samples as f64;
                    let (_, r) = self.eval(&x);
                    total += r[a].e[0].im / samples as f64;
                }
                total / (2.0 * PI)
            })
            .collect()
    }

    /// Maximal group-invariant violation over sample points.
    pub fn invariant_residual(&self, samples: &[[f64; MAX_DIM]]) -> f64 {
        samples.iter().map(|x| group_residual(self.group, &self.eval(x).0)).fold(0.0, f64::max)
    }

    pub fn restrict(&self, axis: usize, c: f64) -> GaugeMap {
        let factors = self
            .factors
            .iter()
            .map(|f| match f {
                Factor::Exp { field, scale } => Factor::Exp { field: field.restrict(axis, c), scale: *scale },
                Factor::Winding { m } => {
                    let mut o = [0; MAX_DIM];
                    let mut j = 0;
                    for (a, v) in m.iter().enumerate() {
                        if a != axis {
                            o[j] = *v;
                            j += 1;
                        }
                    }
                    Factor::Winding { m: o }
                }
            })
            .collect();
        GaugeMap { group: self.group, dim: self.dim - 1, factors }
    }
}

/// Closed-form connection expression on a trivial bundle over a d-torus (or product).
#[derive(Debug, Clone, PartialEq)]
pub enum ConnExpr {
    /// Components A_i.
    Trig(Vec<TrigField>),
    /// φ·A.
    Gauge(GaugeMap, Box<ConnExpr>),
    /// Σ c_k A_k with Σ c_k = 1.
    Affine(Vec<(f64, ConnExpr)>),
    /// A + a for a tangent 1-form a.
    Shift(Box<ConnExpr>, Vec<TrigField>),
}

impl ConnExpr {
    pub fn jet(&self, x: &[f64; MAX_DIM], d: usize, n: usize) -> ConnJet {
        match self {
            ConnExpr::Trig(comps) => {
                let mut j = ConnJet::zero(n, d);
                let mut grads = [[Mat::zero(n); MAX_DIM]; MAX_DIM];
                for i in 0..d {
                    let (v, g) = comps[i].eval_grad(x);
                    j.a[i] = v;
                    grads[i] = g;
                }
                for i in 0..d {
                    for k in i + 1..d {
                        j.f[pair_index(i, k)] = grads[k][i] - grads[i][k] + j.a[i] * j.a[k] - j.a[k] * j.a[i];
                    }
                }
                j
            }
            ConnExpr::Gauge(phi, base) => {
                let (g, r) = phi.eval(x);
                base.jet(x, d, n).gauged(&g, &r)
            }
            ConnExpr::Affine(terms) => {
                let jets: Vec<(f64, ConnJet)> = terms.iter().map(|(c, e)| (*c, e.jet(x, d, n))).collect();
                ConnJet::affine(&jets)
            }
            ConnExpr::Shift(base, comps) => {
                let b = base.jet(x, d, n);
                let mut out = b;
                let mut grads = [[Mat::zero(n); MAX_DIM]; MAX_DIM];
                let mut v = [Mat::zero(n); MAX_DIM];
                for i in 0..d {
                    let (val, g) = comps[i].eval_grad(x);
                    v[i] = val;
                    grads[i] = g;
                    out.a[i] = b.a[i] + val;
                }
                for i in 0..d {
                    for k in i + 1..d {
                        let da = grads[k][i] - grads[i][k];
                        let cross = b.a[i] * v[k] - b.a[k] * v[i] + v[i] * b.a[k] - v[k] * b.a[i];
                        let vv = v[i] * v[k] - v[k] * v[i];
                        out.f[pair_index(i, k)] = b.f[pair_index(i, k)] + da + cross + vv;
                    }
                }
                out
            }
        }
    }

    pub fn restrict(&self, axis: usize, c: f64) -> ConnExpr {
        match self {
            ConnExpr::Trig(comps) => ConnExpr::Trig(
                comps.iter().enumerate().filter(|(i, _)| *i != axis).map(|(_, f)| f.restrict(axis, c)).collect(),
            ),
            ConnExpr::Gauge(phi, b) => ConnExpr::Gauge(phi.restrict(axis, c), Box::new(b.restrict(axis, c))),
            ConnExpr::Affine(t) => ConnExpr::Affine(t.iter().map(|(w, e)| (*w, e.restrict(axis, c))).collect()),
            ConnExpr::Shift(b, comps) => ConnExpr::Shift(
                Box::new(b.restrict(axis, c)),
                comps.iter().enumerate().filter(|(i, _)| *i != axis).map(|(_, f)| f.restrict(axis, c)).collect(),
            ),
        }
    }
}

/// A connection on the trivial G-bundle over a d-dimensional base.
#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub group: GroupId,
    pub dim: usize,
    pub expr: ConnExpr,
    pub is_product: bool,
}

impl Connection {
    pub fn new(group: GroupId, dim: usize, comps: Vec<TrigField>) -> Connection {
        assert_eq!(comps.len(), dim);
        Connection { group, dim, expr: ConnExpr::Trig(comps), is_product: false }
    }

    /// The product connection A₀ = 0 of the trivialisation.
    pub fn product(group: GroupId, dim: usize) -> Connection {
        Connection {
            group,
            dim,
            expr: ConnExpr::Trig(vec![TrigField::zero(group.dim()); dim]),
            is_product: true,
        }
    }

    pub fn from_expr(group: GroupId, dim: usize, expr: ConnExpr) -> Connection {
        Connection { group, dim, expr, is_product: false }
    }

    #[inline]
    pub fn jet(&self, x: &[f64; MAX_DIM]) -> ConnJet {
        self.expr.jet(x, self.dim, self.group.dim())
    }

    pub fn shifted(&self, a: &[TrigField]) -> Connection {
        Connection::from_expr(self.group, self.dim, ConnExpr::Shift(Box::new(self.expr.clone()), a.to_vec()))
    }

    pub fn restrict(&self, axis: usize, c: f64) -> Connection {
        Connection { group: self.group, dim: self.dim - 1, expr: self.expr.restrict(axis, c), is_product: self.is_product }
    }

    /// Sampled connection 1-form.
    pub fn to_form(&self, grid: &Grid) -> FormField {
        let d = self.dim;
        FormField::from_fn(grid, 1, Some(self.group), move |x| self.jet(x).a[..d].to_vec())
    }

    /// Max pointwise difference of components over sample points.
    pub fn distance(&self, o: &Connection, samples: &[[f64; MAX_DIM]]) -> f64 {
        samples.iter().map(|x| self.jet(x).max_diff(&o.jet(x))).fold(0.0, f64::max)
    }
}

pub fn gauge_transform(phi: &GaugeMap, a: &Connection) -> Result<Connection, GaugeError> {
    if phi.group != a.group {
        return Err(GaugeError::GroupMismatch);
    }
    if phi.dim != a.dim {
        return Err(GaugeError::DimMismatch(phi.dim, a.dim));
    }
    Ok(Connection::from_expr(a.group, a.dim, ConnExpr::Gauge(phi.clone(), Box::new(a.expr.clone()))))
}

/// Curvature F = dA + A∧A sampled on a grid.
pub fn curvature(a: &Connection, grid: &Grid) -> FormField {
    let d = a.dim;
    FormField::from_fn(grid, 2, Some(a.group), move |x| {
        let j = a.jet(x);
        let mut out = Vec::new();
        for i in 0..d {
            for k in i + 1..d {
                out.push(j.f[pair_index(i, k)]);
            }
        }
        out
    })
}

/// v_A(X) for a gauge direction ξ under the trivialisation: ξ itself.
pub fn vertical_generator(_a: &Connection, xi: &TrigField) -> TrigField {
    xi.clone()
}

/// Reparametrisation of a curve piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reparam {
    /// u ↦ a + (b−a)u.
    Sub(f64, f64),
    /// u ↦ u^p.
    Power(f64),
    /// u ↦ u + c·sin(2πu)/(2π), |c| < 1.
    Wobble(f64),
}

impl Reparam {
    #[inline]
    fn apply(&self, u: f64) -> (f64, f64) {
        match *self {
            Reparam::Sub(a, b) => (a + (b - a) * u, b - a),
            Reparam::Power(p) => (u.powf(p), if u > 0.0 { p * u.powf(p - 1.0) } else if p == 1.0 { 1.0 } else { 0.0 }),
            Reparam::Wobble(c) => (u + c * (2.0 * PI * u).sin() / (2.0 * PI), 1.0 + c * (2.0 * PI * u).cos()),
        }
    }
}

/// One smooth piece of a curve in the space of connections, parametrised by [0,1].
#[derive(Debug, Clone, PartialEq)]
pub enum Piece {
    Linear { from: ConnExpr, to: ConnExpr },
    /// u ↦ exp(u·c·ξ)·A.
    Orbit { xi: TrigField, c: f64, base: ConnExpr },
    /// u ↦ φ·γ(u).
    Gauged { phi: GaugeMap, inner: Box<Piece> },
    Reversed(Box<Piece>),
    Reparam { inner: Box<Piece>, map: Reparam },
}

impl Piece {
    pub fn at(&self, u: f64) -> ConnExpr {
        match self {
            Piece::Linear { from, to } => {
                if u == 0.0 {
                    from.clone()
                } else if u == 1.0 {
                    to.clone()
                } else {
                    ConnExpr::Affine(vec![(1.0 - u, from.clone()), (u, to.clone())])
                }
            }
            Piece::Orbit { xi, c, base } => {
                if u == 0.0 {
                    base.clone()
                } else {
                    ConnExpr::Gauge(GaugeMap::exp_scaled(group_of(xi), 0, xi.clone(), u * c), Box::new(base.clone()))
                }
            }
            Piece::Gauged { phi, inner } => ConnExpr::Gauge(phi.clone(), Box::new(inner.at(u))),
            Piece::Reversed(inner) => inner.at(1.0 - u),
            Piece::Reparam { inner, map } => inner.at(map.apply(u).0),
        }
    }

    pub fn prepare(&self, x: &[f64; MAX_DIM], d: usize, n: usize) -> Prepared {
        match self {
            Piece::Linear { from, to } => Prepared::Linear { a: from.jet(x, d, n), b: to.jet(x, d, n) },
            Piece::Orbit { xi, c, base } => {
                let (v, g) = xi.eval_grad(x);
                Prepared::Orbit { base: base.jet(x, d, n), xi: v, dxi: g, c: *c }
            }
            Piece::Gauged { phi, inner } => {
                let (g, r) = phi.eval(x);
                Prepared::Gauged { g, r, inner: Box::new(inner.prepare(x, d, n)) }
            }
            Piece::Reversed(inner) => Prepared::Reversed(Box::new(inner.prepare(x, d, n))),
            Piece::Reparam { inner, map } => Prepared::Reparam { inner: Box::new(inner.prepare(x, d, n)), map: *map },
        }
    }

    fn fix_dims(&mut self, dim: usize) {
        match self {
            Piece::Gauged { phi, inner } => {
                phi.dim = dim;
                inner.fix_dims(dim);
            }
            Piece::Reversed(i) | Piece::Reparam { inner: i, .. } => i.fix_dims(dim),
            _ => {}
        }
    }
}

fn group_of(f: &TrigField) -> GroupId {
    if f.n == 1 {
        GroupId::U1
    } else {
        GroupId::SU2
    }
}

/// A curve piece with all spatial data evaluated at one base point.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Prepared {
    Linear { a: ConnJet, b: ConnJet },
    Orbit { base: ConnJet, xi: Mat, dxi: [Mat; MAX_DIM], c: f64 },
    Gauged { g: Mat, r: [Mat; MAX_DIM], inner: Box<Prepared> },
    Reversed(Box<Prepared>),
    Reparam { inner: Box<Prepared>, map: Reparam },
}

impl Prepared {
    /// Connection data at parameter u and the velocity dγ/du.
    #[inline]
    pub fn eval(&self, u: f64) -> (ConnJet, [Mat; MAX_DIM]) {
        match self {
            Prepared::Linear { a, b } => {
                let d = a.d;
                let n = a.n();
                let mut v = [Mat::zero(n); MAX_DIM];
                let mut j = *a;
                for i in 0..d {
                    v[i] = b.a[i] - a.a[i];
                    j.a[i] = a.a[i] + v[i].scale(u);
                }
                let vv = ConnJet::wedge11(d, &v, &v);
                for k in 0..6 {
                    j.f[k] = a.f[k].scale(1.0 - u) + b.f[k].scale(u) - vv[k].scale(u * (1.0 - u));
                }
                (j, v)
            }
            Prepared::Orbit { base, xi, dxi, c } => {
                let d = base.d;
                let n = base.n();
                let y = xi.scale(u * c);
                let g = exp_mat(&y, 1.0);
                let mut r = [Mat::zero(n); MAX_DIM];
                for i in 0..d {
                    r[i] = dexp_right(&y, &dxi[i].scale(u * c));
                }
                let j = base.gauged(&g, &r);
                let yc = xi.scale(*c);
                let mut v = [Mat::zero(n); MAX_DIM];
                for i in 0..d {
                    v[i] = -(dxi[i].scale(*c) + j.a[i].commutator(&yc));
                }
                (j, v)
            }
            Prepared::Gauged { g, r, inner } => {
                let (j, v) = inner.eval(u);
                let mut w = v;
                for i in 0..j.d {
                    w[i] = ad(g, &v[i]);
                }
                (j.gauged(g, r), w)
            }
            Prepared::Reversed(inner) => {
                let (j, v) = inner.eval(1.0 - u);
                (j, v.map(|m| -m))
            }
            Prepared::Reparam { inner, map } => {
                let (s, ds) = map.apply(u);
                let (j, v) = inner.eval(s);
                (j, v.map(|m| m.scale(ds)))
            }
        }
    }
}

/// A piecewise-smooth curve γ in the space of connections with γ(1) = φ·γ(0).
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyCurve {
    pub group: GroupId,
    pub dim: usize,
    pub pieces: Vec<Piece>,
    pub twist: GaugeMap,
}

/// Fixed probe points for endpoint checks.
pub fn probe_points(dim: usize) -> Vec<[f64; MAX_DIM]> {
    let mut pts = Vec::new();
    for i in 0..7 {
        for j in 0..7 {
            let mut x = [0.0; MAX_DIM];
            x[0] = (i as f64 + 0.31) / 7.0;
            if dim > 1 {
                x[1] = (j as f64 + 0.67) / 7.0;
            }
            if dim > 2 {
                x[2] = ((i * 3 + j) % 7) as f64 / 6.0;
            }
            pts.push(x);
        }
    }
    pts
}

fn expr_distance(a: &ConnExpr, b: &ConnExpr, d: usize, n: usize) -> f64 {
    probe_points(d).iter().map(|x| a.jet(x, d, n).max_diff(&b.jet(x, d, n))).fold(0.0, f64::max)
}

impl FamilyCurve {
    pub fn new(group: GroupId, dim: usize, mut pieces: Vec<Piece>, twist: GaugeMap) -> Result<FamilyCurve, GaugeError> {
        if pieces.is_empty() {
            return Err(GaugeError::Empty);
        }
        if twist.group != group {
            return Err(GaugeError::GroupMismatch);
        }
        for p in pieces.iter_mut() {
            p.fix_dims(dim);
        }
        let c = FamilyCurve { group, dim, pieces, twist };
        let r = c.endpoint_residual();
        if r > ENDPOINT_TOL {
            return Err(GaugeError::Endpoint(r));
        }
        let j = c.joint_residual();
        if j > ENDPOINT_TOL {
            return Err(GaugeError::Endpoint(j));
        }
        Ok(c)
    }

    pub fn start(&self) -> Connection {
        Connection::from_expr(self.group, self.dim, self.pieces[0].at(0.0))
    }

    pub fn end(&self) -> Connection {
        Connection::from_expr(self.group, self.dim, self.pieces.last().unwrap().at(1.0))
    }

    /// sup |γ(1) − φ·γ(0)| over probe points.
    pub fn endpoint_residual(&self) -> f64 {
        let twisted = ConnExpr::Gauge(self.twist.clone(), Box::new(self.pieces[0].at(0.0)));
        expr_distance(&self.pieces.last().unwrap().at(1.0), &twisted, self.dim, self.group.dim())
    }

    fn joint_residual(&self) -> f64 {
        self.pieces
            .windows(2)
            .map(|w| expr_distance(&w[0].at(1.0), &w[1].at(0.0), self.dim, self.group.dim()))
            .fold(0.0, f64::max)
    }

    pub fn constant(a: &Connection) -> FamilyCurve {
        FamilyCurve {
            group: a.group,
            dim: a.dim,
            pieces: vec![Piece::Linear { from: a.expr.clone(), to: a.expr.clone() }],
            twist: GaugeMap::identity(a.group, a.dim),
        }
    }

    /// Straight segment from A to B, declared twisted by φ.
    pub fn linear(a: &Connection, b: &Connection, twist: &GaugeMap) -> Result<FamilyCurve, GaugeError> {
        FamilyCurve::new(a.group, a.dim, vec![Piece::Linear { from: a.expr.clone(), to: b.expr.clone() }], twist.clone())
    }

    /// Straight segment A → φ·A.
    pub fn segment_to_image(a: &Connection, phi: &GaugeMap) -> Result<FamilyCurve, GaugeError> {
        let b = gauge_transform(phi, a)?;
        FamilyCurve::linear(a, &b, phi)
    }

    /// Piecewise-linear path through the listed connections.
    pub fn polyline(points: &[Connection], twist: &GaugeMap) -> Result<FamilyCurve, GaugeError> {
        let a = &points[0];
        let pieces = points
            .windows(2)
            .map(|w| Piece::Linear { from: w[0].expr.clone(), to: w[1].expr.clone() })
            .collect();
        FamilyCurve::new(a.group, a.dim, pieces, twist.clone())
    }

    /// The orbit u ↦ exp(u·c·ξ)·A, twisted by exp(c·ξ).
    pub fn orbit(a: &Connection, xi: &TrigField, c: f64) -> Result<FamilyCurve, GaugeError> {
        let twist = GaugeMap::exp_scaled(a.group, a.dim, xi.clone(), c);
        FamilyCurve::new(a.group, a.dim, vec![Piece::Orbit { xi: xi.clone(), c, base: a.expr.clone() }], twist)
    }

    /// Boundary of the affine square A + s·a + u·b, s,u ∈ [0,1], counter-clockwise.
    pub fn square_loop(a: &Connection, da: &[TrigField], db: &[TrigField]) -> Result<FamilyCurve, GaugeError> {
        let p1 = a.shifted(da);
        let sum: Vec<TrigField> = da.iter().zip(db).map(|(x, y)| x.clone().plus(y)).collect();
        let p2 = a.shifted(&sum);
        let p3 = a.shifted(db);
        FamilyCurve::polyline(&[a.clone(), p1, p2, p3, a.clone()], &GaugeMap::identity(a.group, a.dim))
    }

    pub fn reverse(&self) -> FamilyCurve {
        FamilyCurve {
            group: self.group,
            dim: self.dim,
            pieces: self.pieces.iter().rev().map(|p| Piece::Reversed(Box::new(p.clone()))).collect(),
            twist: self.twist.inverse(),
        }
    }

    /// φ'·γ, twisted by φ'φφ'⁻¹.
    pub fn act(&self, phi: &GaugeMap) -> Result<FamilyCurve, GaugeError> {
        let twist = phi.conjugate(&self.twist)?;
        Ok(FamilyCurve {
            group: self.group,
            dim: self.dim,
            pieces: self.pieces.iter().map(|p| Piece::Gauged { phi: phi.clone(), inner: Box::new(p.clone()) }).collect(),
            twist,
        })
    }

    pub fn reparametrized(&self, map: Reparam) -> FamilyCurve {
        FamilyCurve {
            pieces: self.pieces.iter().map(|p| Piece::Reparam { inner: Box::new(p.clone()), map }).collect(),
            ..self.clone()
        }
    }

    /// Split every piece at parameter s into two pieces.
    pub fn split(&self, s: f64) -> FamilyCurve {
        let pieces = self
            .pieces
            .iter()
            .flat_map(|p| {
                vec![
                    Piece::Reparam { inner: Box::new(p.clone()), map: Reparam::Sub(0.0, s) },
                    Piece::Reparam { inner: Box::new(p.clone()), map: Reparam::Sub(s, 1.0) },
                ]
            })
            .collect();
        FamilyCurve { pieces, ..self.clone() }
    }

    pub fn restrict(&self, axis: usize, c: f64) -> FamilyCurve {
        fn r(p: &Piece, axis: usize, c: f64) -> Piece {
            match p {
                Piece::Linear { from, to } => Piece::Linear { from: from.restrict(axis, c), to: to.restrict(axis, c) },
                Piece::Orbit { xi, c: k, base } => Piece::Orbit { xi: xi.restrict(axis, c), c: *k, base: base.restrict(axis, c) },
                Piece::Gauged { phi, inner } => Piece::Gauged { phi: phi.restrict(axis, c), inner: Box::new(r(inner, axis, c)) },
                Piece::Reversed(i) => Piece::Reversed(Box::new(r(i, axis, c))),
                Piece::Reparam { inner, map } => Piece::Reparam { inner: Box::new(r(inner, axis, c)), map: *map },
            }
        }
        FamilyCurve {
            group: self.group,
            dim: self.dim - 1,
            pieces: self.pieces.iter().map(|p| r(p, axis, c)).collect(),
            twist: self.twist.restrict(axis, c),
        }
    }
}

/// γ₁∗γ₂ with twist φ₂·φ₁.
pub fn concat(g1: &FamilyCurve, g2: &FamilyCurve) -> Result<FamilyCurve, GaugeError> {
    if g1.group != g2.group {
        return Err(GaugeError::GroupMismatch);
    }
    if g1.dim != g2.dim {
        return Err(GaugeError::DimMismatch(g1.dim, g2.dim));
    }
    let r = expr_distance(&g1.pieces.last().unwrap().at(1.0), &g2.pieces[0].at(0.0), g1.dim, g1.group.dim());
    if r > ENDPOINT_TOL {
        return Err(GaugeError::Endpoint(r));
    }
    let mut pieces = g1.pieces.clone();
    pieces.extend(g2.pieces.iter().cloned());
    Ok(FamilyCurve { group: g1.group, dim: g1.dim, pieces, twist: g2.twist.compose(&g1.twist)? })
}

/// A finite-dimensional affine family b(t) = A + Σ t_k a_k with gauge generators
/// declared to fix every member.
#[derive(Debug, Clone)]
pub struct EquivariantFamily {
    pub base: Connection,
    pub directions: Vec<Vec<TrigField>>,
    pub generators: Vec<TrigField>,
}

impl EquivariantFamily {
    pub fn new(base: Connection, directions: Vec<Vec<TrigField>>, generators: Vec<TrigField>) -> Result<Self, GaugeError> {
        let fam = EquivariantFamily { base, directions, generators };
        let r = fam.invariance_residual(&[0.0, 0.5, 1.0]);
        if r > ENDPOINT_TOL {
            return Err(GaugeError::NotInvariant(r));
        }
        Ok(fam)
    }

    pub fn member(&self, t: &[f64]) -> Connection {
        let mut shift: Vec<TrigField> = vec![TrigField::zero(self.base.group.dim()); self.base.dim];
        for (k, dir) in self.directions.iter().enumerate() {
            for i in 0..self.base.dim {
                shift[i] = shift[i].clone().plus(&dir[i].scaled(t.get(k).copied().unwrap_or(0.0)));
            }
        }
        self.base.shifted(&shift)
    }

    pub fn invariance_residual(&self, ts: &[f64]) -> f64 {
        let pts = probe_points(self.base.dim);
        let mut worst: f64 = 0.0;
        for &t in ts {
            let b = self.member(&vec![t; self.directions.len()]);
            for xi in &self.generators {
                let phi = GaugeMap::exp(self.base.group, self.base.dim, xi.clone());
                let moved = gauge_transform(&phi, &b).expect("generator group");
                worst = worst.max(moved.distance(&b, &pts));
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::exterior_derivative;
    use proptest::prelude::*;

    fn su2_conn(c: &[f64; 6]) -> Connection {
        Connection::new(
            GroupId::SU2,
            2,
            vec![
                TrigField::cos(Mat::su2(c[0], c[1], 0.3), [0.0, 1.0, 0.0, 0.0]).plus(&TrigField::constant(Mat::su2(0.2, 0.0, c[2]))),
                TrigField::sin(Mat::su2(c[3], 0.1, c[4]), [1.0, 1.0, 0.0, 0.0]).plus(&TrigField::constant(Mat::su2(c[5], -0.4, 0.0))),
            ],
        )
    }

    fn su2_gauge(c: &[f64; 3]) -> GaugeMap {
        let xi = TrigField::sin(Mat::su2(c[0], 0.5, c[1]), [1.0, 0.0, 0.0, 0.0])
            .plus(&TrigField::cos(Mat::su2(0.0, c[2], 0.7), [0.0, 1.0, 0.0, 0.0]));
        let eta = TrigField::cos(Mat::su2(0.9, c[1], -0.2), [1.0, -1.0, 0.0, 0.0]);
        GaugeMap::exp(GroupId::SU2, 2, xi).compose(&GaugeMap::exp(GroupId::SU2, 2, eta)).unwrap()
    }

    #[test]
    fn identity_gauge_is_trivial() {
        let a = su2_conn(&[0.5, -0.3, 0.8, 0.1, 0.9, -0.6]);
        let b = gauge_transform(&GaugeMap::identity(GroupId::SU2, 2), &a).unwrap();
        assert!(a.distance(&b, &probe_points(2)) < 1e-15);
    }

    #[test]
    fn u1_winding_shifts_connection() {
        let a = Connection::new(GroupId::U1, 2, vec![TrigField::sin(Mat::u1(1.3), [0.0, 1.0, 0.0, 0.0]), TrigField::zero(1)]);
        let phi = GaugeMap::winding(2, &[2, -1]);
        let b = gauge_transform(&phi, &a).unwrap();
        for x in probe_points(2) {
            let (ja, jb) = (a.jet(&x), b.jet(&x));
            assert!((jb.a[0] - (ja.a[0] - Mat::u1(4.0 * PI))).norm_max() < 1e-13);
            assert!((jb.a[1] - (ja.a[1] + Mat::u1(2.0 * PI))).norm_max() < 1e-13);
        }
        let w = phi.numeric_windings(64);
        assert!((w[0] - 2.0).abs() < 0.01 && (w[1] + 1.0).abs() < 0.01);
        assert!(!phi.is_null_homotopic());
        assert!(phi.witness(&[0.0; 4], 0.5).is_err());
    }

    #[test]
    fn pure_gauge_is_flat() {
        let phi = su2_gauge(&[0.4, -0.8, 1.1]);
        let g = Grid::torus(2, 16).unwrap();
        let b = gauge_transform(&phi, &Connection::product(GroupId::SU2, 2)).unwrap();
        assert!(curvature(&b, &g).max_abs() < 1e-10);
    }

    #[test]
    fn curvature_examples() {
        let g = Grid::torus(2, 16).unwrap();
        assert_eq!(curvature(&Connection::product(GroupId::U1, 2), &g).max_abs(), 0.0);
        let a = Connection::new(GroupId::U1, 2, vec![TrigField::sin(Mat::u1(2.0 * PI), [0.0, 1.0, 0.0, 0.0]), TrigField::zero(1)]);
        let f = curvature(&a, &g);
        for i in 0..g.len() {
            let y = g.point(i)[1];
            let want = Mat::u1(-4.0 * PI * PI * (2.0 * PI * y).cos());
            assert!((f.values[0][i] - want).norm_max() < 1e-11);
        }
        let (x, y) = (Mat::su2(1.0, 0.2, 0.0), Mat::su2(0.0, -0.5, 0.7));
        let c = Connection::new(GroupId::SU2, 2, vec![TrigField::constant(x), TrigField::constant(y)]);
        assert!((curvature(&c, &g).values[0][5] - x.commutator(&y)).norm_max() < 1e-15);
    }

    #[test]
    fn curvature_matches_spectral_exterior_derivative() {
        let a = su2_conn(&[0.5, -0.3, 0.8, 0.1, 0.9, -0.6]);
        let g = Grid::torus(2, 24).unwrap();
        let form = a.to_form(&g);
        let da = exterior_derivative(&form).unwrap();
        let f = curvature(&a, &g);
        for i in 0..g.len() {
            let j = a.jet(&g.point(i));
            let want = da.values[0][i] + j.a[0] * j.a[1] - j.a[1] * j.a[0];
            assert!((f.values[0][i] - want).norm_max() < 1e-10);
        }
    }

    #[test]
    fn vertical_generator_is_identity_under_trivialisation() {
        let a = Connection::product(GroupId::SU2, 2);
        let xi = TrigField::sin(Mat::su2(0.0, 0.0, 1.0), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(vertical_generator(&a, &xi), xi);
    }

    #[test]
    fn curve_operations_keep_endpoint_relation() {
        let a = su2_conn(&[0.5, -0.3, 0.8, 0.1, 0.9, -0.6]);
        let phi = su2_gauge(&[0.4, -0.8, 1.1]);
        let psi = su2_gauge(&[-0.2, 0.3, 0.6]);
        let g1 = FamilyCurve::segment_to_image(&a, &phi).unwrap();
        let g2 = FamilyCurve::segment_to_image(&g1.end(), &psi).unwrap();
        let g12 = concat(&g1, &g2).unwrap();
        assert!(g12.endpoint_residual() < 1e-8);
        assert!(g12.reverse().endpoint_residual() < 1e-8);
        assert!(g1.act(&psi).unwrap().endpoint_residual() < 1e-8);
        let bad = FamilyCurve::linear(&a, &a, &phi);
        assert!(matches!(bad, Err(GaugeError::Endpoint(_))));
        assert!(concat(&g1, &g1).is_err());
    }

    #[test]
    fn orbit_velocity_matches_finite_difference() {
        let a = su2_conn(&[0.5, -0.3, 0.8, 0.1, 0.9, -0.6]);
        let xi = TrigField::sin(Mat::su2(0.3, 0.5, -0.1), [1.0, 1.0, 0.0, 0.0]);
        let c = FamilyCurve::orbit(&a, &xi, 0.7).unwrap();
        let x = [0.3, 0.8, 0.0, 0.0];
        let prep = c.pieces[0].prepare(&x, 2, 2);
        let h = 1e-6;
        let (jp, _) = prep.eval(0.4 + h);
        let (jm, _) = prep.eval(0.4 - h);
        let (_, v) = prep.eval(0.4);
        for i in 0..2 {
            assert!(((jp.a[i] - jm.a[i]).scale(0.5 / h) - v[i]).norm_max() < 1e-7);
        }
        assert!(c.endpoint_residual() < 1e-10);
    }

    #[test]
    fn witness_endpoints() {
        let phi = su2_gauge(&[0.4, -0.8, 1.1]);
        for x in probe_points(2) {
            assert!((phi.witness(&x, 0.0).unwrap() - phi.eval(&x).0).norm_max() < 1e-10);
            assert!((phi.witness(&x, 1.0).unwrap() - Mat::identity(2)).norm_max() < 1e-10);
        }
        assert!(phi.invariant_residual(&probe_points(2)) < 1e-12);
    }

    #[test]
    fn right_log_derivative_matches_finite_difference() {
        let phi = su2_gauge(&[0.4, -0.8, 1.1]);
        let x = [0.21, 0.64, 0.0, 0.0];
        let (g, r) = phi.eval(&x);
        let h = 1e-6;
        for a in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += h;
            xm[a] -= h;
            let fd = (phi.eval(&xp).0 - phi.eval(&xm).0).scale(0.5 / h) * g.unitary_inverse();
            assert!((fd - r[a]).norm_max() < 1e-8);
        }
    }

    #[test]
    fn flat_u1_family_is_invariant() {
        let base = Connection::new(GroupId::U1, 2, vec![TrigField::constant(Mat::u1(0.3)), TrigField::constant(Mat::u1(-1.2))]);
        let dirs = vec![vec![TrigField::constant(Mat::u1(1.0)), TrigField::zero(1)]];
        let fam = EquivariantFamily::new(base, dirs, vec![TrigField::constant(Mat::u1(0.8))]).unwrap();
        assert!(fam.invariance_residual(&[0.0, 0.3, 2.0]) < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn action_is_a_cocycle(c in prop::array::uniform6(-1.0..1.0f64), p in prop::array::uniform3(-1.0..1.0f64), q in prop::array::uniform3(-1.0..1.0f64)) {
            let a = su2_conn(&c);
            let (phi, psi) = (su2_gauge(&p), su2_gauge(&q));
            let lhs = gauge_transform(&psi, &gauge_transform(&phi, &a).unwrap()).unwrap();
            let rhs = gauge_transform(&psi.compose(&phi).unwrap(), &a).unwrap();
            prop_assert!(lhs.distance(&rhs, &probe_points(2)) < 1e-10);
        }

        #[test]
        fn curvature_is_covariant(c in prop::array::uniform6(-1.0..1.0f64), p in prop::array::uniform3(-1.0..1.0f64)) {
            let a = su2_conn(&c);
            let phi = su2_gauge(&p);
            let b = gauge_transform(&phi, &a).unwrap();
            let g = Grid::torus(2, 64).unwrap();
            let fa = curvature(&a, &g);
            let fb = curvature(&b, &g);
            let db = exterior_derivative(&b.to_form(&g)).unwrap();
            for i in 0..g.len() {
                let x = g.point(i);
                let (gx, _) = phi.eval(&x);
                prop_assert!((fb.values[0][i] - ad(&gx, &fa.values[0][i])).norm_max() < 1e-8);
                let j = b.jet(&x);
                let direct = db.values[0][i] + j.a[0] * j.a[1] - j.a[1] * j.a[0];
                prop_assert!((direct - fb.values[0][i]).norm_max() < 1e-6);
            }
        }
    }
}
