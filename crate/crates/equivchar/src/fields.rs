//! Structured grids on tori and products with intervals, matrix-valued
//! differential forms with exterior calculus, and quadrature over them.

use crate::lie::{CharacteristicPair, GroupId, Mat};
use crate::quad::{pairwise_sum, par_map, simpson_weights};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use thiserror::Error;

pub const MAX_DIM: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("form degree {degree} has no exterior derivative on a {dim}-dimensional grid")]
    TopDegree { degree: usize, dim: usize },
    #[error("degree overflow: total degree {total} exceeds grid dimension {dim}")]
    DegreeOverflow { total: usize, dim: usize },
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("group mismatch between operands")]
    GroupMismatch,
    #[error("integration needs a real top-degree form, got degree {degree} on dimension {dim}")]
    DegreeMismatch { degree: usize, dim: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisKind {
    Periodic,
    Interval,
}

/// Point grid over a product of circles (ℝ/ℤ) and unit intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub sizes: Vec<usize>,
    pub kinds: Vec<AxisKind>,
    /// +1 for the coordinate orientation dx_1∧…∧dx_d, −1 for its reverse.
    pub orientation: i8,
}

impl Grid {
    pub fn new(sizes: Vec<usize>, kinds: Vec<AxisKind>) -> Result<Grid, FieldError> {
        if sizes.is_empty() || sizes.len() > MAX_DIM || sizes.len() != kinds.len() {
            return Err(FieldError::InvalidGrid(format!("dimension {} unsupported", sizes.len())));
        }
        if let Some(n) = sizes.iter().find(|&&n| n < 8) {
            return Err(FieldError::InvalidGrid(format!("axis size {n} below 8")));
        }
        Ok(Grid { sizes, kinds, orientation: 1 })
    }

    pub fn torus(d: usize, n: usize) -> Result<Grid, FieldError> {
        Grid::new(vec![n; d], vec![AxisKind::Periodic; d])
    }

    pub fn with_orientation(mut self, o: i8) -> Grid {
        self.orientation = if o < 0 { -1 } else { 1 };
        self
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        match self.kinds[axis] {
            AxisKind::Periodic => i as f64 / self.sizes[axis] as f64,
            AxisKind::Interval => i as f64 / (self.sizes[axis] - 1) as f64,
        }
    }

    /// Row-major point index to multi-index (last axis fastest).
    pub fn unravel(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for a in (0..self.dim()).rev() {
            out[a] = idx % self.sizes[a];
            idx /= self.sizes[a];
        }
        out
    }

    pub fn point(&self, idx: usize) -> [f64; MAX_DIM] {
        let m = self.unravel(idx);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim() {
            x[a] = self.coord(a, m[a]);
        }
        x
    }

    pub fn axis_weights(&self, axis: usize) -> Vec<f64> {
        let n = self.sizes[axis];
        match self.kinds[axis] {
            AxisKind::Periodic => vec![1.0 / n as f64; n],
            AxisKind::Interval => simpson_weights(n),
        }
    }

    /// Product quadrature weight per point, including the orientation sign.
    pub fn weights(&self) -> Vec<f64> {
        let per_axis: Vec<Vec<f64>> = (0..self.dim()).map(|a| self.axis_weights(a)).collect();
        (0..self.len())
            .map(|i| {
                let m = self.unravel(i);
                let mut w = self.orientation as f64;
                for a in 0..self.dim() {
                    w *= per_axis[a][m[a]];
                }
                w
            })
            .collect()
    }

    fn stride(&self, axis: usize) -> usize {
        self.sizes[axis + 1..].iter().product()
    }
}

/// One analytic term coef · Π x_a^{pow_a} · (cos | sin)(2π k·x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigTerm {
    pub coef: Mat,
    pub wave: [f64; MAX_DIM],
    pub pow: [u8; MAX_DIM],
    pub sine: bool,
}

/// Closed-form matrix-valued function on ℝ^d with closed-form partials.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigField {
    pub n: usize,
    pub terms: Vec<TrigTerm>,
}

impl TrigField {
    pub fn zero(n: usize) -> TrigField {
        TrigField { n, terms: Vec::new() }
    }

    pub fn constant(c: Mat) -> TrigField {
        TrigField { n: c.dim(), terms: vec![TrigTerm { coef: c, wave: [0.0; MAX_DIM], pow: [0; MAX_DIM], sine: false }] }
    }

    pub fn cos(c: Mat, wave: [f64; MAX_DIM]) -> TrigField {
        TrigField { n: c.dim(), terms: vec![TrigTerm { coef: c, wave, pow: [0; MAX_DIM], sine: false }] }
    }

    pub fn sin(c: Mat, wave: [f64; MAX_DIM]) -> TrigField {
        TrigField { n: c.dim(), terms: vec![TrigTerm { coef: c, wave, pow: [0; MAX_DIM], sine: true }] }
    }

    pub fn monomial(c: Mat, pow: [u8; MAX_DIM]) -> TrigField {
        TrigField { n: c.dim(), terms: vec![TrigTerm { coef: c, wave: [0.0; MAX_DIM], pow, sine: false }] }
    }

    pub fn plus(mut self, other: &TrigField) -> TrigField {
        self.terms.extend_from_slice(&other.terms);
        self
    }

    pub fn scaled(&self, s: f64) -> TrigField {
        TrigField {
            n: self.n,
            terms: self.terms.iter().map(|t| TrigTerm { coef: t.coef.scale(s), ..*t }).collect(),
        }
    }

    /// Apply a linear map to every coefficient.
    pub fn map_coef(&self, f: impl Fn(&Mat) -> Mat) -> TrigField {
        TrigField { n: self.n, terms: self.terms.iter().map(|t| TrigTerm { coef: f(&t.coef), ..*t }).collect() }
    }

    /// Restriction to the hyperplane x_axis = c, as a field in one fewer variable.
    pub fn restrict(&self, axis: usize, c: f64) -> TrigField {
        let terms = self
            .terms
            .iter()
            .flat_map(|t| {
                let scale = c.powi(t.pow[axis] as i32);
                let ph = 2.0 * PI * t.wave[axis] * c;
                let drop = |arr: [f64; MAX_DIM]| {
                    let mut o = [0.0; MAX_DIM];
                    let mut j = 0;
                    for (a, v) in arr.iter().enumerate() {
                        if a != axis {
                            o[j] = *v;
                            j += 1;
                        }
                    }
                    o
                };
                let mut pow = [0u8; MAX_DIM];
                let mut j = 0;
                for a in 0..MAX_DIM {
                    if a != axis {
                        pow[j] = t.pow[a];
                        j += 1;
                    }
                }
                let wave = drop(t.wave);
                // cos(u+ph) = cos u cos ph - sin u sin ph ; sin(u+ph) = sin u cos ph + cos u sin ph
                let (cc, ss) = (ph.cos(), ph.sin());
                let (a_cos, a_sin) = if t.sine { (ss, cc) } else { (cc, -ss) };
                vec![
                    TrigTerm { coef: t.coef.scale(scale * a_cos), wave, pow, sine: false },
                    TrigTerm { coef: t.coef.scale(scale * a_sin), wave, pow, sine: true },
                ]
            })
            .collect();
        TrigField { n: self.n, terms }
    }

    #[inline]
    fn parts(t: &TrigTerm, x: &[f64; MAX_DIM]) -> (f64, f64, f64) {
        let ph = 2.0 * PI * (t.wave[0] * x[0] + t.wave[1] * x[1] + t.wave[2] * x[2] + t.wave[3] * x[3]);
        let (s, c) = ph.sin_cos();
        let mut mono = 1.0;
        for a in 0..MAX_DIM {
            if t.pow[a] > 0 {
                mono *= x[a].powi(t.pow[a] as i32);
            }
        }
        if t.sine {
            (mono, s, c)
        } else {
            (mono, c, -s)
        }
    }

    pub fn eval(&self, x: &[f64; MAX_DIM]) -> Mat {
        let mut out = Mat::zero(self.n);
        for t in &self.terms {
            let (mono, v, _) = Self::parts(t, x);
            out += t.coef.scale(mono * v);
        }
        out
    }

    /// Value and all partial derivatives.
    pub fn eval_grad(&self, x: &[f64; MAX_DIM]) -> (Mat, [Mat; MAX_DIM]) {
        let mut v = Mat::zero(self.n);
        let mut g = [Mat::zero(self.n); MAX_DIM];
        for t in &self.terms {
            let (mono, val, dval) = Self::parts(t, x);
            v += t.coef.scale(mono * val);
            for a in 0..MAX_DIM {
                let mut d = 0.0;
                if t.wave[a] != 0.0 {
                    d += mono * dval * 2.0 * PI * t.wave[a];
                }
                if t.pow[a] > 0 {
                    let mut m = t.pow[a] as f64 * x[a].powi(t.pow[a] as i32 - 1);
                    for b in 0..MAX_DIM {
                        if b != a && t.pow[b] > 0 {
                            m *= x[b].powi(t.pow[b] as i32);
                        }
                    }
                    d += m * val;
                }
                if d != 0.0 {
                    g[a] += t.coef.scale(d);
                }
            }
        }
        (v, g)
    }

    /// Symbolic partial derivative along `axis`.
    pub fn partial(&self, axis: usize) -> TrigField {
        let mut terms = Vec::new();
        for t in &self.terms {
            if t.wave[axis] != 0.0 {
                let k = 2.0 * PI * t.wave[axis];
                let coef = if t.sine { t.coef.scale(k) } else { t.coef.scale(-k) };
                terms.push(TrigTerm { coef, sine: !t.sine, ..*t });
            }
            if t.pow[axis] > 0 {
                let mut pow = t.pow;
                pow[axis] -= 1;
                terms.push(TrigTerm { coef: t.coef.scale(t.pow[axis] as f64), pow, ..*t });
            }
        }
        TrigField { n: self.n, terms }
    }
}

/// Strictly increasing multi-indices of size q in d dimensions, as bit masks, sorted.
pub fn multi_indices(d: usize, q: usize) -> Vec<u8> {
    let mut v: Vec<u8> = (0u16..(1 << d)).filter(|m| m.count_ones() as usize == q).map(|m| m as u8).collect();
    v.sort_by_key(|m| mask_axes(*m));
    v
}

pub fn mask_axes(m: u8) -> Vec<usize> {
    (0..8).filter(|a| m & (1 << a) != 0).collect()
}

/// Sign of dx_I ∧ dx_J relative to dx_{I∪J}, zero when the indices overlap.
pub fn wedge_sign(i: u8, j: u8) -> i32 {
    if i & j != 0 {
        return 0;
    }
    let mut inversions = 0;
    for a in mask_axes(i) {
        inversions += mask_axes(j).iter().filter(|&&b| b < a).count();
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

/// A differential form sampled on a grid, with values in 𝔤 (group set) or in ℝ (group None,
/// stored as real 1×1 matrices).
#[derive(Debug, Clone)]
pub struct FormField {
    pub grid: Grid,
    pub degree: usize,
    pub group: Option<GroupId>,
    pub masks: Vec<u8>,
    pub values: Vec<Vec<Mat>>,
    pub analytic: Option<Vec<TrigField>>,
}

impl FormField {
    pub fn zero(grid: &Grid, degree: usize, group: Option<GroupId>) -> FormField {
        let masks = multi_indices(grid.dim(), degree);
        let n = group.map(|g| g.dim()).unwrap_or(1);
        let values = masks.iter().map(|_| vec![Mat::zero(n); grid.len()]).collect();
        FormField { grid: grid.clone(), degree, group, masks, values, analytic: None }
    }

    /// Build from closed-form components, one per sorted multi-index.
    pub fn from_analytic(grid: &Grid, degree: usize, group: Option<GroupId>, comps: Vec<TrigField>) -> FormField {
        let masks = multi_indices(grid.dim(), degree);
        assert_eq!(masks.len(), comps.len(), "component count");
        let values = comps.iter().map(|c| (0..grid.len()).map(|i| c.eval(&grid.point(i))).collect()).collect();
        FormField { grid: grid.clone(), degree, group, masks, values, analytic: Some(comps) }
    }

    /// Build from a pointwise closure returning components in multi-index order.
    pub fn from_fn(
        grid: &Grid,
        degree: usize,
        group: Option<GroupId>,
        f: impl Fn(&[f64; MAX_DIM]) -> Vec<Mat> + Sync + Send,
    ) -> FormField {
        let masks = multi_indices(grid.dim(), degree);
        let per_point: Vec<Vec<Mat>> = par_map(grid.len(), |i| f(&grid.point(i)));
        let values = (0..masks.len()).map(|c| per_point.iter().map(|v| v[c]).collect()).collect();
        FormField { grid: grid.clone(), degree, group, masks, values, analytic: None }
    }

    pub fn component(&self, mask: u8) -> Option<&Vec<Mat>> {
        self.masks.iter().position(|&m| m == mask).map(|i| &self.values[i])
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().map(|m| m.norm_max()).fold(0.0, f64::max)
    }

    pub fn sub(&self, o: &FormField) -> Result<FormField, FieldError> {
        if self.grid != o.grid || self.degree != o.degree {
            return Err(FieldError::GridMismatch);
        }
        let mut out = self.clone();
        out.analytic = None;
        for (c, v) in out.values.iter_mut().enumerate() {
            for (i, m) in v.iter_mut().enumerate() {
                *m -= o.values[c][i];
            }
        }
        Ok(out)
    }
}

fn spectral_derivative(grid: &Grid, data: &[Mat], axis: usize) -> Vec<Mat> {
    let n = grid.sizes[axis];
    let stride = grid.stride(axis);
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut out = data.to_vec();
    let entries = data.first().map(|m| m.dim() * m.dim()).unwrap_or(0);
    for start in 0..grid.len() {
        if !(start / stride).is_multiple_of(n) {
            continue;
        }
        for e in 0..entries {
            let mut buf: Vec<Complex64> = (0..n).map(|k| data[start + k * stride].e[e]).collect();
            fwd.process(&mut buf);
            for (k, z) in buf.iter_mut().enumerate() {
                let freq = if 2 * k < n {
                    k as f64
                } else if 2 * k == n {
                    0.0
                } else {
                    k as f64 - n as f64
                };
                *z *= Complex64::new(0.0, 2.0 * PI * freq / n as f64);
            }
            inv.process(&mut buf);
            for k in 0..n {
                out[start + k * stride].e[e] = buf[k];
            }
        }
    }
    out
}

fn interval_derivative(grid: &Grid, data: &[Mat], axis: usize) -> Vec<Mat> {
    let n = grid.sizes[axis];
    let stride = grid.stride(axis);
    let h = 1.0 / (n - 1) as f64;
    let mut out = data.to_vec();
    // fourth-order centred stencil; one-sided fourth-order stencils near the ends
    const ONE_SIDED: [[f64; 5]; 2] = [
        [-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25],
        [-0.25, -5.0 / 6.0, 1.5, -0.5, 1.0 / 12.0],
    ];
    for start in 0..grid.len() {
        if !(start / stride).is_multiple_of(n) {
            continue;
        }
        let at = |k: usize| data[start + k * stride];
        for k in 0..n {
            let d = if k >= 2 && k + 2 < n {
                (at(k - 2) - at(k - 1).scale(8.0) + at(k + 1).scale(8.0) - at(k + 2)).scale(1.0 / 12.0)
            } else if k < 2 {
                let c = ONE_SIDED[k];
                let base = 0;
                let mut s = Mat::zero(at(0).dim());
                for j in 0..5 {
                    s += at(base + j).scale(c[j]);
                }
                s
            } else {
                let c = ONE_SIDED[n - 1 - k];
                let mut s = Mat::zero(at(0).dim());
                for j in 0..5 {
                    s -= at(n - 1 - j).scale(c[j]);
                }
                s
            };
            out[start + k * stride] = d.scale(1.0 / h);
        }
    }
    out
}

/// Partial derivative of sampled data along an axis: spectral on periodic axes,
/// fourth-order differences on intervals.
pub fn sampled_partial(grid: &Grid, data: &[Mat], axis: usize) -> Vec<Mat> {
    match grid.kinds[axis] {
        AxisKind::Periodic => spectral_derivative(grid, data, axis),
        AxisKind::Interval => interval_derivative(grid, data, axis),
    }
}

pub fn exterior_derivative(w: &FormField) -> Result<FormField, FieldError> {
    let d = w.grid.dim();
    if w.degree >= d {
        return Err(FieldError::TopDegree { degree: w.degree, dim: d });
    }
    let out_masks = multi_indices(d, w.degree + 1);
    let n = w.group.map(|g| g.dim()).unwrap_or(1);
    if let Some(comps) = &w.analytic {
        let mut out_comps = vec![TrigField::zero(n); out_masks.len()];
        for (ci, &m) in w.masks.iter().enumerate() {
            for a in 0..d {
                let s = wedge_sign(1 << a, m);
                if s == 0 {
                    continue;
                }
                let target = out_masks.iter().position(|&o| o == m | (1 << a)).unwrap();
                let part = comps[ci].partial(a).scaled(s as f64);
                out_comps[target] = out_comps[target].clone().plus(&part);
            }
        }
        return Ok(FormField::from_analytic(&w.grid, w.degree + 1, w.group, out_comps));
    }
    let mut out = FormField::zero(&w.grid, w.degree + 1, w.group);
    for (ci, &m) in w.masks.iter().enumerate() {
        for a in 0..d {
            let s = wedge_sign(1 << a, m);
            if s == 0 {
                continue;
            }
            let target = out_masks.iter().position(|&o| o == m | (1 << a)).unwrap();
            let part = sampled_partial(&w.grid, &w.values[ci], a);
            for (o, p) in out.values[target].iter_mut().zip(part) {
                *o += p.scale(s as f64);
            }
        }
    }
    Ok(out)
}

/// Wedge of two 𝔤-valued forms with matrix multiplication of values.
pub fn wedge_mat(a: &FormField, b: &FormField) -> Result<FormField, FieldError> {
    if a.grid != b.grid {
        return Err(FieldError::GridMismatch);
    }
    let d = a.grid.dim();
    let q = a.degree + b.degree;
    if q > d {
        return Err(FieldError::DegreeOverflow { total: q, dim: d });
    }
    let mut out = FormField::zero(&a.grid, q, a.group);
    for (ia, &ma) in a.masks.iter().enumerate() {
        for (ib, &mb) in b.masks.iter().enumerate() {
            let s = wedge_sign(ma, mb);
            if s == 0 {
                continue;
            }
            let t = out.masks.iter().position(|&o| o == ma | mb).unwrap();
            for i in 0..a.grid.len() {
                let v = a.values[ia][i] * b.values[ib][i];
                out.values[t][i] += v.scale(s as f64);
            }
        }
    }
    Ok(out)
}

/// Real form p(ω₁ ∧ … ∧ ω_r), antisymmetrised over index interleavings.
pub fn p_wedge(p: &CharacteristicPair, forms: &[&FormField]) -> Result<FormField, FieldError> {
    if forms.len() != p.degree || p.degree != 2 {
        return Err(FieldError::DegreeOverflow { total: forms.len(), dim: p.degree });
    }
    let (a, b) = (forms[0], forms[1]);
    if a.grid != b.grid {
        return Err(FieldError::GridMismatch);
    }
    if a.group != Some(p.group) || b.group != Some(p.group) {
        return Err(FieldError::GroupMismatch);
    }
    let d = a.grid.dim();
    let q = a.degree + b.degree;
    if q > d {
        return Err(FieldError::DegreeOverflow { total: q, dim: d });
    }
    let mut out = FormField::zero(&a.grid, q, None);
    for (ia, &ma) in a.masks.iter().enumerate() {
        for (ib, &mb) in b.masks.iter().enumerate() {
            let s = wedge_sign(ma, mb);
            if s == 0 {
                continue;
            }
            let t = out.masks.iter().position(|&o| o == ma | mb).unwrap();
            for i in 0..a.grid.len() {
                let v = p.pair(&a.values[ia][i], &b.values[ib][i]) * s as f64;
                out.values[t][i].e[0].re += v;
            }
        }
    }
    Ok(out)
}

pub fn integrate(w: &FormField) -> Result<f64, FieldError> {
    let d = w.grid.dim();
    if w.degree != d || w.group.is_some() {
        return Err(FieldError::DegreeMismatch { degree: w.degree, dim: d });
    }
    let wts = w.grid.weights();
    let terms: Vec<f64> = w.values[0].iter().zip(&wts).map(|(v, w)| v.e[0].re * w).collect();
    Ok(pairwise_sum(&terms))
}

/// Integral of a pointwise density over the grid, parallel over the slowest axis.
pub fn integrate_density(grid: &Grid, f: impl Fn(&[f64; MAX_DIM]) -> f64 + Sync + Send) -> f64 {
    let wts = grid.weights();
    let outer = grid.sizes[0];
    let inner = grid.len() / outer;
    let slabs = par_map(outer, |s| {
        let v: Vec<f64> = (0..inner).map(|j| {
            let i = s * inner + j;
            f(&grid.point(i)) * wts[i]
        }).collect();
        pairwise_sum(&v)
    });
    pairwise_sum(&slabs)
}
