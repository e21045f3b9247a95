//! Transgression forms, the Chern–Simons action, mapping-torus connections, the
//! integrated character Ξ, the curvature ω, the moment μ and line integrals of λ.

use crate::fields::{integrate, integrate_density, p_wedge, AxisKind, FieldError, FormField, Grid, TrigField, MAX_DIM};
use crate::gauge::{pair_index, probe_points, ConnJet, Connection, FamilyCurve, GaugeError, GaugeMap, Piece, Prepared};
use crate::lie::{CharacteristicPair, Mat};
use crate::quad::{gauss_legendre, pairwise_sum, par_map};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CsError {
    #[error("field error: {0}")]
    Field(#[from] FieldError),
    #[error("gauge error: {0}")]
    Gauge(#[from] GaugeError),
    #[error("group mismatch")]
    GroupMismatch,
    #[error("expected base dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("twist mismatch: residual {0:.3e}")]
    TwistMismatch(f64),
    #[error("twist has winding {0:?}; use the abelian lattice oracle")]
    NotNullHomotopic(Vec<i64>),
    #[error("smoothing parameter {0} outside (0, 0.5)")]
    Smoothing(f64),
    #[error("unsupported polynomial degree {0}")]
    Degree(usize),
}

/// Element of ℝ/ℤ with its pre-reduction real.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleValue {
    pub raw: f64,
    pub value: f64,
    pub nearest_integer: i64,
}

impl CircleValue {
    pub fn new(raw: f64) -> CircleValue {
        let mut value = raw - raw.floor();
        if value >= 1.0 {
            value = 0.0;
        }
        CircleValue { raw, value, nearest_integer: raw.round() as i64 }
    }

    pub fn distance(&self, o: &CircleValue) -> f64 {
        circle_distance(self.raw, o.raw)
    }
}

/// min(|x−y| mod 1, 1 − |x−y| mod 1).
pub fn circle_distance(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// υ(s) = ψ((s−ε)/(1−2ε)) with ψ(x) = f(x)/(f(x)+f(1−x)), f(x) = e^{−1/x}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingProfile {
    pub eps: f64,
}

fn bump(x: f64) -> (f64, f64) {
    if x <= 0.0 {
        (0.0, 0.0)
    } else {
        let f = (-1.0 / x).exp();
        (f, f / (x * x))
    }
}

impl SmoothingProfile {
    pub fn new(eps: f64) -> Result<SmoothingProfile, CsError> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(CsError::Smoothing(eps));
        }
        Ok(SmoothingProfile { eps })
    }

    /// (υ(s), υ′(s)).
    pub fn eval(&self, s: f64) -> (f64, f64) {
        let w = 1.0 - 2.0 * self.eps;
        let x = (s - self.eps) / w;
        if x <= 0.0 {
            return (0.0, 0.0);
        }
        if x >= 1.0 {
            return (1.0, 0.0);
        }
        let (f, df) = bump(x);
        let (g, dg) = bump(1.0 - x);
        let den = f + g;
        (f / den, (df * g + f * dg) / (den * den) / w)
    }
}

impl Default for SmoothingProfile {
    fn default() -> Self {
        SmoothingProfile { eps: 0.1 }
    }
}

/// Sampling of one time slab: nodes u ∈ [0,1] with du/ds and weights in s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeRule {
    /// Periodic trapezoid in s on nt points, connection at υ(s).
    Smoothed { profile: SmoothingProfile, nt: usize },
    /// Gauss–Legendre in u directly.
    GaussLegendre(usize),
}

impl TimeRule {
    pub fn samples(&self) -> Vec<(f64, f64, f64)> {
        match *self {
            TimeRule::Smoothed { profile, nt } => (0..nt)
                .map(|j| {
                    let (u, du) = profile.eval(j as f64 / nt as f64);
                    (u, du, 1.0 / nt as f64)
                })
                .collect(),
            TimeRule::GaussLegendre(n) => {
                let (x, w) = gauss_legendre(n);
                x.into_iter().zip(w).map(|(u, w)| (u, 1.0, w)).collect()
            }
        }
    }
}

impl Default for TimeRule {
    fn default() -> Self {
        TimeRule::Smoothed { profile: SmoothingProfile::default(), nt: 64 }
    }
}

/// Resolution of a mapping-torus evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiConfig {
    pub n: usize,
    pub time: TimeRule,
}

impl Default for XiConfig {
    fn default() -> Self {
        XiConfig { n: 32, time: TimeRule::default() }
    }
}

impl XiConfig {
    pub fn with_grid(n: usize) -> XiConfig {
        XiConfig { n, ..XiConfig::default() }
    }
}

fn check_cubic(p: &CharacteristicPair) -> Result<(), CsError> {
    if p.degree != 2 {
        return Err(CsError::Degree(p.degree));
    }
    Ok(())
}

/// p(a∧G)_{ijk} = p(a_i,G_jk) − p(a_j,G_ik) + p(a_k,G_ij).
#[inline]
fn p_one_two(p: &CharacteristicPair, a: &[Mat; MAX_DIM], g: &[Mat; 6], i: usize, j: usize, k: usize) -> f64 {
    p.pair(&a[i], &g[pair_index(j, k)]) - p.pair(&a[j], &g[pair_index(i, k)]) + p.pair(&a[k], &g[pair_index(i, j)])
}

/// Chern–Simons 3-form Tp(A,0)_{ijk} = p(A∧F) − ⅓p(A∧A∧A) at a point.
#[inline]
pub fn cs_density(p: &CharacteristicPair, j: &ConnJet, i0: usize, i1: usize, i2: usize) -> f64 {
    let a = &j.a;
    let aaa = (a[i0] * a[i1].commutator(&a[i2])).trace().re;
    p_one_two(p, a, &j.f, i0, i1, i2) - p.coef() * aaa
}

/// p(F∧F)_{0123} at a point.
#[inline]
pub fn pff_density(p: &CharacteristicPair, j: &ConnJet) -> f64 {
    let f = |a, b| j.fc(a, b);
    2.0 * (p.pair(&f(0, 1), &f(2, 3)) - p.pair(&f(0, 2), &f(1, 3)) + p.pair(&f(0, 3), &f(1, 2)))
}

/// Tp(A,A′) = r∫₀¹ p(a, F_t) dt at a point, all 3-components in sorted order.
pub fn transgression_point(p: &CharacteristicPair, ja: &ConnJet, jb: &ConnJet) -> Vec<f64> {
    let d = ja.d;
    let n = ja.n();
    let mut a = [Mat::zero(n); MAX_DIM];
    for i in 0..d {
        a[i] = ja.a[i] - jb.a[i];
    }
    let aa = ConnJet::wedge11(d, &a, &a);
    let (nodes, weights) = gauss_legendre(8);
    let mut out = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            for k in j + 1..d {
                let mut s = 0.0;
                for (t, w) in nodes.iter().zip(&weights) {
                    let mut ft = [Mat::zero(n); 6];
                    for q in 0..6 {
                        ft[q] = jb.f[q].scale(1.0 - t) + ja.f[q].scale(*t) - aa[q].scale(t * (1.0 - t));
                    }
                    s += w * p_one_two(p, &a, &ft, i, j, k);
                }
                out.push(p.degree as f64 * s);
            }
        }
    }
    out
}

/// Transgression form sampled on a grid; zero form when the grid has dimension below 3.
pub fn transgression(a: &Connection, b: &Connection, p: &CharacteristicPair, grid: &Grid) -> Result<FormField, CsError> {
    check_cubic(p)?;
    if a.group != b.group || a.group != p.group {
        return Err(CsError::GroupMismatch);
    }
    if a.dim != b.dim || a.dim != grid.dim() {
        return Err(CsError::Dimension { expected: grid.dim(), got: a.dim });
    }
    if grid.dim() < 3 {
        return Ok(FormField::zero(grid, 3.min(grid.dim()), None));
    }
    Ok(FormField::from_fn(grid, 3, None, |x| {
        transgression_point(p, &a.jet(x), &b.jet(x)).into_iter().map(|v| Mat::scalar(v.into())).collect()
    }))
}

/// CS(A) = ∫_M Tp(A, A₀) reduced mod ℤ.
pub fn cs_action(a: &Connection, p: &CharacteristicPair, grid: &Grid) -> Result<CircleValue, CsError> {
    check_cubic(p)?;
    if grid.dim() != 3 || a.dim != 3 {
        return Err(CsError::Dimension { expected: 3, got: a.dim });
    }
    if a.group != p.group {
        return Err(CsError::GroupMismatch);
    }
    let raw = integrate_density(grid, |x| cs_density(p, &a.jet(x), 0, 1, 2));
    Ok(CircleValue::new(raw))
}

fn twist_residual(a: &GaugeMap, b: &GaugeMap) -> f64 {
    if a.windings() != b.windings() {
        return f64::INFINITY;
    }
    probe_points(a.dim).iter().map(|x| (a.eval(x).0 - b.eval(x).0).norm_max()).fold(0.0, f64::max)
}

/// The connection A^{γ∘υ} on M×[0,1], optionally trivialised by an appended gauge slab
/// running along the nullhomotopy of φ⁻¹ so that both end slices agree.
#[derive(Debug, Clone)]
pub struct MappingTorusConnection {
    pub curve: FamilyCurve,
    pub twist: GaugeMap,
    pub profile: SmoothingProfile,
    pub trivialized: bool,
    untwist: GaugeMap,
}

pub fn assemble_mapping_torus(
    gamma: &FamilyCurve,
    phi: &GaugeMap,
    profile: SmoothingProfile,
    trivialize: bool,
) -> Result<MappingTorusConnection, CsError> {
    let r = twist_residual(&gamma.twist, phi);
    if r > crate::gauge::ENDPOINT_TOL {
        return Err(CsError::TwistMismatch(r));
    }
    if trivialize && !phi.is_null_homotopic() {
        return Err(CsError::NotNullHomotopic(phi.windings()));
    }
    Ok(MappingTorusConnection {
        curve: gamma.clone(),
        twist: phi.clone(),
        profile,
        trivialized: trivialize,
        untwist: phi.inverse(),
    })
}

impl MappingTorusConnection {
    pub fn slabs(&self) -> usize {
        self.curve.pieces.len() + usize::from(self.trivialized)
    }

    /// Jet of the (d+1)-dimensional connection at spatial x and time t ∈ [0,1].
    pub fn jet(&self, x: &[f64; MAX_DIM], t: f64) -> ConnJet {
        let d = self.curve.dim;
        let n = self.curve.group.dim();
        let k = self.slabs();
        let pos = (t * k as f64).min(k as f64 - 1e-15);
        let slab = pos.floor() as usize;
        let (u, du) = self.profile.eval(pos - slab as f64);
        let du = du * k as f64;
        if slab < self.curve.pieces.len() {
            let prep = self.curve.pieces[slab].prepare(x, d, n);
            curve_jet(&prep, d, u, du)
        } else {
            let end = self.curve.pieces.last().unwrap().prepare(x, d, n).eval(1.0).0;
            gauge_jet(&self.untwist, &end, x, d, u, du)
        }
    }

    /// Sampled connection 1-form on the space-time grid.
    pub fn to_form(&self, grid: &Grid) -> FormField {
        let d = self.curve.dim;
        FormField::from_fn(grid, 1, Some(self.curve.group), |x| self.jet(x, x[d]).a[..d + 1].to_vec())
    }

    /// sup over probe points of |A(·,1) − A(·,0)| after trivialisation, or
    /// |A(·,1) − φ·A(·,0)| without.
    pub fn glue_residual(&self) -> f64 {
        let d = self.curve.dim;
        probe_points(d)
            .iter()
            .map(|x| {
                let j0 = self.jet(x, 0.0);
                let j1 = self.jet(x, 1.0);
                let target = if self.trivialized {
                    j0
                } else {
                    let (g, r) = self.twist.eval(x);
                    j0.gauged(&g, &r)
                };
                (0..d).map(|i| (j1.a[i] - target.a[i]).norm_max()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

#[inline]
fn curve_jet(prep: &Prepared, d: usize, u: f64, du: f64) -> ConnJet {
    let (j, v) = prep.eval(u);
    let mut out = j;
    out.d = d + 1;
    out.a[d] = Mat::zero(j.n());
    for i in 0..d {
        out.f[pair_index(i, d)] = -v[i].scale(du);
    }
    out
}

#[inline]
fn gauge_jet(untwist: &GaugeMap, end: &ConnJet, x: &[f64; MAX_DIM], d: usize, u: f64, du: f64) -> ConnJet {
    let (h, r, rs) = untwist.eval_scaled(x, u);
    let mut out = end.gauged(&h, &r);
    out.d = d + 1;
    out.a[d] = -rs.scale(du);
    for i in 0..d {
        out.f[pair_index(i, d)] = Mat::zero(end.n());
    }
    out
}

/// Separate contributions of the curve slabs and of the trivialising gauge slab.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiParts {
    pub curve: f64,
    pub gauge: f64,
}

impl XiParts {
    pub fn total(&self) -> f64 {
        self.curve + self.gauge
    }
}

/// Integral of a top-degree density over the mapping torus M_φ, oriented as −(x…,t).
fn mapping_torus_integral<D>(
    mt: &MappingTorusConnection,
    grid: &Grid,
    rule: TimeRule,
    density: D,
) -> XiParts
where
    D: Fn(&ConnJet) -> f64 + Sync + Send,
{
    let d = mt.curve.dim;
    let n = mt.curve.group.dim();
    let samples = rule.samples();
    let wts = grid.weights();
    let per_point: Vec<(f64, f64)> = par_map(grid.len(), |idx| {
        let x = grid.point(idx);
        let mut slabs = Vec::with_capacity(mt.curve.pieces.len());
        let mut last = None;
        for piece in &mt.curve.pieces {
            let prep = piece.prepare(&x, d, n);
            let terms: Vec<f64> = samples.iter().map(|&(u, du, w)| w * density(&curve_jet(&prep, d, u, du))).collect();
            slabs.push(pairwise_sum(&terms));
            last = Some(prep);
        }
        let c = pairwise_sum(&slabs);
        let g = if mt.trivialized && !mt.untwist.factors.is_empty() {
            let end = last.unwrap().eval(1.0).0;
            let terms: Vec<f64> =
                samples.iter().map(|&(u, du, w)| w * density(&gauge_jet(&mt.untwist, &end, &x, d, u, du))).collect();
            pairwise_sum(&terms)
        } else {
            0.0
        };
        (-c * wts[idx], -g * wts[idx])
    });
    let cs: Vec<f64> = per_point.iter().map(|v| v.0).collect();
    let gs: Vec<f64> = per_point.iter().map(|v| v.1).collect();
    XiParts { curve: pairwise_sum(&cs), gauge: pairwise_sum(&gs) }
}

fn base_grid(d: usize, n: usize) -> Result<Grid, CsError> {
    Ok(Grid::torus(d, n)?)
}

/// Curve and gauge contributions to Ξ(φ,γ) over M = T².
pub fn xi_parts(phi: &GaugeMap, gamma: &FamilyCurve, p: &CharacteristicPair, cfg: &XiConfig) -> Result<XiParts, CsError> {
    check_cubic(p)?;
    if gamma.group != p.group || phi.group != p.group {
        return Err(CsError::GroupMismatch);
    }
    if gamma.dim != 2 {
        return Err(CsError::Dimension { expected: 2, got: gamma.dim });
    }
    let profile = match cfg.time {
        TimeRule::Smoothed { profile, .. } => profile,
        TimeRule::GaussLegendre(_) => SmoothingProfile::default(),
    };
    let mt = assemble_mapping_torus(gamma, phi, profile, true)?;
    let grid = base_grid(2, cfg.n)?;
    Ok(mapping_torus_integral(&mt, &grid, cfg.time, |j| cs_density(p, j, 0, 1, 2)))
}

/// Ξ(φ,γ) = CS(A_φ^γ) on the trivialised mapping torus.
pub fn xi(phi: &GaugeMap, gamma: &FamilyCurve, p: &CharacteristicPair, cfg: &XiConfig) -> Result<CircleValue, CsError> {
    Ok(CircleValue::new(xi_parts(phi, gamma, p, cfg)?.total()))
}

/// ∫_{M_φ} p(F∧F) over a 3-dimensional base M = T²×[0,1], oriented as −(x,y,z,t).
pub fn mapping_torus_pff(
    phi: &GaugeMap,
    gamma: &FamilyCurve,
    p: &CharacteristicPair,
    grid: &Grid,
    rule: TimeRule,
) -> Result<f64, CsError> {
    check_cubic(p)?;
    if gamma.dim != 3 || grid.dim() != 3 {
        return Err(CsError::Dimension { expected: 3, got: gamma.dim });
    }
    let profile = match rule {
        TimeRule::Smoothed { profile, .. } => profile,
        TimeRule::GaussLegendre(_) => SmoothingProfile::default(),
    };
    let mt = assemble_mapping_torus(gamma, phi, profile, true)?;
    Ok(mapping_torus_integral(&mt, grid, rule, |j| pff_density(p, j)).total())
}

/// ω(a,b) = r(r−1)∫_M p(a∧b).
pub fn curvature_two_form(a: &Connection, da: &FormField, db: &FormField, p: &CharacteristicPair) -> Result<f64, CsError> {
    check_cubic(p)?;
    if da.group != Some(a.group) || db.group != Some(a.group) {
        return Err(CsError::GroupMismatch);
    }
    if da.grid.dim() != 2 || da.degree != 1 || db.degree != 1 {
        return Err(CsError::Dimension { expected: 2, got: da.grid.dim() });
    }
    let r = p.degree as f64;
    Ok(r * (r - 1.0) * integrate(&p_wedge(p, &[da, db])?)?)
}

/// μ(ξ) = −r∫_M p(v_A(ξ), F_A).
pub fn moment(a: &Connection, xi: &TrigField, p: &CharacteristicPair, grid: &Grid) -> Result<f64, CsError> {
    check_cubic(p)?;
    if a.group != p.group {
        return Err(CsError::GroupMismatch);
    }
    if a.dim != 2 || grid.dim() != 2 {
        return Err(CsError::Dimension { expected: 2, got: a.dim });
    }
    let r = p.degree as f64;
    Ok(-r * integrate_density(grid, |x| p.pair(&xi.eval(x), &a.jet(x).f[0])))
}

/// λ_A(a) = ∫_M p(A∧a), so that dλ = ω on the affine space of connections.
pub fn lambda_at(a: &Connection, da: &[TrigField], p: &CharacteristicPair, grid: &Grid) -> f64 {
    integrate_density(grid, |x| {
        let j = a.jet(x);
        p.pair(&j.a[0], &da[1].eval(x)) - p.pair(&j.a[1], &da[0].eval(x))
    })
}

/// ∫ λ along consecutive pieces of a curve over T², Gauss–Legendre in each piece; not reduced mod ℤ.
pub fn integrate_lambda(pieces: &[Piece], p: &CharacteristicPair, n: usize, nodes: usize) -> Result<f64, CsError> {
    check_cubic(p)?;
    let grid = base_grid(2, n)?;
    let (us, ws) = gauss_legendre(nodes);
    let g = p.group.dim();
    Ok(integrate_density(&grid, |x| {
        let per_piece: Vec<f64> = pieces
            .iter()
            .map(|piece| {
                let prep = piece.prepare(x, 2, g);
                let terms: Vec<f64> = us
                    .iter()
                    .zip(&ws)
                    .map(|(u, w)| {
                        let (j, v) = prep.eval(*u);
                        w * (p.pair(&j.a[0], &v[1]) - p.pair(&j.a[1], &v[0]))
                    })
                    .collect();
                pairwise_sum(&terms)
            })
            .collect();
        pairwise_sum(&per_piece)
    }))
}

/// ∫ β along curve pieces for β_A(a) = r∫_M p(a, F_A) on connections over T²×[0,1], the fibre integral of p(𝔽).
pub fn integrate_boundary_beta(pieces: &[Piece], p: &CharacteristicPair, grid: &Grid, nodes: usize) -> Result<f64, CsError> {
    check_cubic(p)?;
    if grid.dim() != 3 {
        return Err(CsError::Dimension { expected: 3, got: grid.dim() });
    }
    let (us, ws) = gauss_legendre(nodes);
    let g = p.group.dim();
    let r = p.degree as f64;
    Ok(integrate_density(grid, |x| {
        let per_piece: Vec<f64> = pieces
            .iter()
            .map(|piece| {
                let prep = piece.prepare(x, 3, g);
                let terms: Vec<f64> = us
                    .iter()
                    .zip(&ws)
                    .map(|(u, w)| {
                        let (j, v) = prep.eval(*u);
                        w * r * p_one_two(p, &v, &j.f, 0, 1, 2)
                    })
                    .collect();
                pairwise_sum(&terms)
            })
            .collect();
        pairwise_sum(&per_piece)
    }))
}

/// Grid on T²×[0,1] with periodic x,y and a Simpson z-axis.
pub fn slab_grid(n: usize, nz: usize) -> Result<Grid, CsError> {
    Ok(Grid::new(vec![n, n, nz], vec![AxisKind::Periodic, AxisKind::Periodic, AxisKind::Interval])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::exterior_derivative;
    use crate::gauge::{concat, gauge_transform};
    use crate::lie::GroupId;
    use std::f64::consts::PI;

    fn su2() -> CharacteristicPair {
        CharacteristicPair::new(GroupId::SU2, 1)
    }

    fn u1() -> CharacteristicPair {
        CharacteristicPair::new(GroupId::U1, 1)
    }

    fn wave(a: f64, b: f64) -> [f64; 4] {
        [a, b, 0.0, 0.0]
    }

    fn su2_a() -> Connection {
        Connection::new(
            GroupId::SU2,
            2,
            vec![
                TrigField::cos(Mat::su2(0.6, -0.2, 0.3), wave(0.0, 1.0)).plus(&TrigField::constant(Mat::su2(0.2, 0.1, -0.5))),
                TrigField::sin(Mat::su2(-0.3, 0.4, 0.2), wave(1.0, 0.0)).plus(&TrigField::constant(Mat::su2(0.0, -0.4, 0.3))),
            ],
        )
    }

    fn su2_phi() -> GaugeMap {
        GaugeMap::exp(GroupId::SU2, 2, TrigField::sin(Mat::su2(0.4, 0.3, -0.2), wave(1.0, 0.0)))
            .compose(&GaugeMap::exp(GroupId::SU2, 2, TrigField::cos(Mat::su2(-0.1, 0.5, 0.3), wave(0.0, 1.0))))
            .unwrap()
    }

    #[test]
    fn circle_value_reduction() {
        let c = CircleValue::new(-0.25);
        assert!((c.value - 0.75).abs() < 1e-15);
        assert_eq!(c.nearest_integer, 0);
        assert!((circle_distance(0.999, 0.001) - 0.002).abs() < 1e-12);
        assert_eq!(CircleValue::new(3.0).value, 0.0);
    }

    #[test]
    fn smoothing_profile_shape() {
        let s = SmoothingProfile::new(0.1).unwrap();
        assert_eq!(s.eval(0.0), (0.0, 0.0));
        assert_eq!(s.eval(0.1), (0.0, 0.0));
        assert_eq!(s.eval(0.9), (1.0, 0.0));
        assert_eq!(s.eval(1.0), (1.0, 0.0));
        assert!((s.eval(0.5).0 - 0.5).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 0..=1000 {
            let (v, dv) = s.eval(i as f64 / 1000.0);
            assert!(v >= prev && dv >= 0.0);
            prev = v;
        }
        let h = 1e-6;
        for s0 in [0.2, 0.37, 0.5, 0.81] {
            let fd = (s.eval(s0 + h).0 - s.eval(s0 - h).0) / (2.0 * h);
            assert!((fd - s.eval(s0).1).abs() < 1e-6);
        }
        let near = s.eval(0.1 + 1e-3);
        assert!(near.0 < 1e-100 && near.1 < 1e-100);
        assert!(SmoothingProfile::new(0.5).is_err());
        assert!(SmoothingProfile::new(0.0).is_err());
    }

    #[test]
    fn transgression_vanishes_on_equal_connections() {
        let a = Connection::new(GroupId::U1, 3, vec![TrigField::sin(Mat::u1(1.0), [0.0, 1.0, 1.0, 0.0]); 3]);
        let g = Grid::torus(3, 8).unwrap();
        assert_eq!(transgression(&a, &a, &u1(), &g).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn u1_transgression_closed_form() {
        let a = Connection::new(
            GroupId::U1,
            3,
            vec![
                TrigField::sin(Mat::u1(1.3), [0.0, 1.0, 0.0, 0.0]),
                TrigField::cos(Mat::u1(-0.7), [0.0, 0.0, 1.0, 0.0]),
                TrigField::sin(Mat::u1(0.4), [1.0, 0.0, 0.0, 0.0]),
            ],
        );
        let b = Connection::new(
            GroupId::U1,
            3,
            vec![TrigField::zero(1), TrigField::sin(Mat::u1(0.9), [1.0, 0.0, 1.0, 0.0]), TrigField::constant(Mat::u1(0.5))],
        );
        let g = Grid::torus(3, 8).unwrap();
        let t = transgression(&a, &b, &u1(), &g).unwrap();
        let p = u1();
        for idx in [0, 17, 200, 511] {
            let x = g.point(idx);
            let (ja, jb) = (a.jet(&x), b.jet(&x));
            let mut diff = [Mat::zero(1); 4];
            let mut fsum = [Mat::zero(1); 6];
            for i in 0..3 {
                diff[i] = ja.a[i] - jb.a[i];
            }
            for q in 0..6 {
                fsum[q] = ja.f[q] + jb.f[q];
            }
            let want = p_one_two(&p, &diff, &fsum, 0, 1, 2);
            assert!((t.values[0][idx].e[0].re - want).abs() < 1e-13);
        }
    }

    #[test]
    fn transgression_differential_is_difference_of_characteristic_forms() {
        let w = |a: f64, b: f64, c: f64, d: f64| [a, b, c, d];
        let a = Connection::new(
            GroupId::SU2,
            4,
            vec![
                TrigField::sin(Mat::su2(0.5, 0.1, 0.0), w(0.0, 1.0, 0.0, 0.0)),
                TrigField::cos(Mat::su2(0.0, -0.3, 0.4), w(0.0, 0.0, 1.0, 1.0)),
                TrigField::sin(Mat::su2(0.2, 0.2, -0.3), w(1.0, 0.0, 0.0, 0.0)),
                TrigField::constant(Mat::su2(0.1, -0.2, 0.3)),
            ],
        );
        let b = Connection::new(
            GroupId::SU2,
            4,
            vec![
                TrigField::constant(Mat::su2(0.1, 0.0, 0.3)),
                TrigField::sin(Mat::su2(0.0, 0.6, 0.0), w(1.0, 0.0, 0.0, 1.0)),
                TrigField::zero(2),
                TrigField::cos(Mat::su2(-0.2, 0.0, 0.1), w(0.0, 1.0, 0.0, 0.0)),
            ],
        );
        let g = Grid::torus(4, 12).unwrap();
        let p = su2();
        let dt = exterior_derivative(&transgression(&a, &b, &p, &g).unwrap()).unwrap();
        let fa = crate::gauge::curvature(&a, &g);
        let fb = crate::gauge::curvature(&b, &g);
        let pa = p_wedge(&p, &[&fa, &fa]).unwrap();
        let pb = p_wedge(&p, &[&fb, &fb]).unwrap();
        for i in 0..g.len() {
            let want = pa.values[0][i].e[0].re - pb.values[0][i].e[0].re;
            assert!((dt.values[0][i].e[0].re - want).abs() < 1e-8);
        }
        let g2 = Grid::torus(2, 8).unwrap();
        let lo = transgression(&su2_a(), &su2_a(), &p, &g2).unwrap();
        assert_eq!(lo.max_abs(), 0.0);
    }

    #[test]
    fn cs_of_product_connection_is_zero() {
        let g = Grid::torus(3, 8).unwrap();
        let p = su2();
        let v = cs_action(&Connection::product(GroupId::SU2, 3), &p, &g).unwrap();
        assert_eq!(v.raw, 0.0);
        assert!(cs_action(&su2_a(), &p, &Grid::torus(2, 8).unwrap()).is_err());
    }

    #[test]
    fn cs_gauge_invariance_for_null_homotopic_twist() {
        let a = Connection::new(
            GroupId::SU2,
            3,
            vec![
                TrigField::sin(Mat::su2(0.5, 0.1, 0.0), [0.0, 1.0, 0.0, 0.0]),
                TrigField::cos(Mat::su2(0.0, -0.3, 0.4), [0.0, 0.0, 1.0, 0.0]),
                TrigField::sin(Mat::su2(0.2, 0.2, -0.3), [1.0, 0.0, 0.0, 0.0]),
            ],
        );
        let phi = GaugeMap::exp(GroupId::SU2, 3, TrigField::sin(Mat::su2(0.3, -0.4, 0.2), [1.0, 1.0, 0.0, 0.0]))
            .compose(&GaugeMap::exp(GroupId::SU2, 3, TrigField::cos(Mat::su2(0.1, 0.2, 0.5), [0.0, 0.0, 1.0, 0.0])))
            .unwrap();
        let g = Grid::torus(3, 24).unwrap();
        let p = su2();
        let d = cs_action(&gauge_transform(&phi, &a).unwrap(), &p, &g).unwrap().raw - cs_action(&a, &p, &g).unwrap().raw;
        assert!((d - d.round()).abs() < 1e-6, "{d}");
    }

    #[test]
    fn xi_of_constant_curve_vanishes() {
        let c = FamilyCurve::constant(&su2_a());
        let v = xi(&GaugeMap::identity(GroupId::SU2, 2), &c, &su2(), &XiConfig::with_grid(16)).unwrap();
        assert_eq!(v.raw, 0.0);
    }

    #[test]
    fn xi_inverse_reverse_cancels() {
        let phi = su2_phi();
        let g = FamilyCurve::segment_to_image(&su2_a(), &phi).unwrap();
        let p = su2();
        let cfg = XiConfig::with_grid(24);
        let x1 = xi(&phi, &g, &p, &cfg).unwrap();
        let x2 = xi(&phi.inverse(), &g.reverse(), &p, &cfg).unwrap();
        assert!(circle_distance(x1.raw + x2.raw, 0.0) < 1e-6, "{} {}", x1.raw, x2.raw);
        assert!(x1.raw.abs() > 1e-3);
    }

    #[test]
    fn mapping_torus_glue() {
        let phi = su2_phi();
        let g = FamilyCurve::segment_to_image(&su2_a(), &phi).unwrap();
        let mt = assemble_mapping_torus(&g, &phi, SmoothingProfile::default(), true).unwrap();
        assert!(mt.glue_residual() < 1e-8);
        let raw = assemble_mapping_torus(&g, &phi, SmoothingProfile::default(), false).unwrap();
        assert!(raw.glue_residual() < 1e-8);
        let c = FamilyCurve::constant(&su2_a());
        let ct = assemble_mapping_torus(&c, &GaugeMap::identity(GroupId::SU2, 2), SmoothingProfile::default(), true).unwrap();
        for x in probe_points(2).iter().take(5) {
            let j = ct.jet(x, 0.37);
            assert_eq!(j.a[2], Mat::zero(2));
        }
        assert!(assemble_mapping_torus(&g, &GaugeMap::identity(GroupId::SU2, 2), SmoothingProfile::default(), true).is_err());
        let w = GaugeMap::winding(2, &[1, 0]);
        let a = Connection::product(GroupId::U1, 2);
        let lw = FamilyCurve::segment_to_image(&a, &w).unwrap();
        assert!(matches!(assemble_mapping_torus(&lw, &w, SmoothingProfile::default(), true), Err(CsError::NotNullHomotopic(_))));
    }

    #[test]
    fn trivialised_u1_line_glues() {
        let a = Connection::new(GroupId::U1, 2, vec![TrigField::sin(Mat::u1(1.1), wave(0.0, 1.0)), TrigField::constant(Mat::u1(0.4))]);
        let phi = GaugeMap::exp(GroupId::U1, 2, TrigField::cos(Mat::u1(0.8), wave(1.0, 1.0)));
        let g = FamilyCurve::segment_to_image(&a, &phi).unwrap();
        let mt = assemble_mapping_torus(&g, &phi, SmoothingProfile::default(), true).unwrap();
        assert!(mt.glue_residual() < 1e-8);
    }

    #[test]
    fn atiyah_bott_values() {
        let g = Grid::torus(2, 16).unwrap();
        let x = Mat::su2(0.0, 0.0, 1.0);
        let a = Connection::product(GroupId::SU2, 2);
        let da = FormField::from_analytic(&g, 1, Some(GroupId::SU2), vec![TrigField::constant(x), TrigField::zero(2)]);
        let db = FormField::from_analytic(&g, 1, Some(GroupId::SU2), vec![TrigField::zero(2), TrigField::constant(x)]);
        let w = curvature_two_form(&a, &da, &db, &su2()).unwrap();
        assert!((w - 1.0 / (2.0 * PI * PI)).abs() < 1e-12);
        assert!(curvature_two_form(&a, &da, &da, &su2()).unwrap().abs() < 1e-15);
        let b = Connection::product(GroupId::U1, 2);
        let ua = FormField::from_analytic(&g, 1, Some(GroupId::U1), vec![TrigField::constant(Mat::u1(2.0 * PI)), TrigField::zero(1)]);
        let ub = FormField::from_analytic(&g, 1, Some(GroupId::U1), vec![TrigField::zero(1), TrigField::constant(Mat::u1(2.0 * PI))]);
        assert!((curvature_two_form(&b, &ua, &ub, &u1()).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn moment_trivial_cases() {
        let g = Grid::torus(2, 16).unwrap();
        let flat = Connection::new(GroupId::SU2, 2, vec![TrigField::constant(Mat::su2(0.3, 0.0, 0.0)), TrigField::zero(2)]);
        let xi = TrigField::sin(Mat::su2(0.0, 1.0, 0.0), wave(1.0, 0.0));
        assert!(moment(&flat, &xi, &su2(), &g).unwrap().abs() < 1e-15);
        assert_eq!(moment(&su2_a(), &TrigField::zero(2), &su2(), &g).unwrap(), 0.0);
    }

    #[test]
    fn xi_minus_lambda_depends_only_on_endpoint() {
        let phi = su2_phi();
        let a = su2_a();
        let p = su2();
        let cfg = XiConfig::with_grid(16);
        let g1 = FamilyCurve::segment_to_image(&a, &phi).unwrap();
        let mid = a.shifted(&[TrigField::constant(Mat::su2(0.3, 0.0, 0.0)), TrigField::sin(Mat::su2(0.0, 0.2, 0.1), wave(1.0, 1.0))]);
        let g2 = FamilyCurve::polyline(&[a.clone(), mid, g1.end()], &phi).unwrap();
        let p1 = xi_parts(&phi, &g1, &p, &cfg).unwrap();
        let p2 = xi_parts(&phi, &g2, &p, &cfg).unwrap();
        assert!((p1.gauge - p2.gauge).abs() < 1e-12);
        let l1 = integrate_lambda(&g1.pieces, &p, 16, 16).unwrap();
        assert!((l1 - p1.curve).abs() < 1e-8, "{l1} {}", p1.curve);
    }

    #[test]
    fn lambda_is_additive_under_concatenation() {
        let a = su2_a();
        let p = su2();
        let phi = su2_phi();
        let g1 = FamilyCurve::segment_to_image(&a, &phi).unwrap();
        let g2 = FamilyCurve::orbit(&g1.end(), &TrigField::cos(Mat::su2(0.2, 0.0, 0.4), wave(1.0, 0.0)), 0.8).unwrap();
        let both = concat(&g1, &g2).unwrap();
        let s = integrate_lambda(&g1.pieces, &p, 16, 16).unwrap() + integrate_lambda(&g2.pieces, &p, 16, 16).unwrap();
        assert!((integrate_lambda(&both.pieces, &p, 16, 16).unwrap() - s).abs() < 1e-10);
        assert_eq!(integrate_lambda(&FamilyCurve::constant(&a).pieces, &p, 16, 8).unwrap(), 0.0);
    }
}
