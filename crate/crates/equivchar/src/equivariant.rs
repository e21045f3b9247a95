//! Equivariant differential characters on spaces of connections: axiom verification,
//! cocycles and holonomy, pullbacks, Lerman–Malkin cycles, projectability and triviality.

use crate::cschar::{
    circle_distance, cs_density, curvature_two_form, integrate_boundary_beta, integrate_lambda, lambda_at, moment, xi, CircleValue,
    CsError, XiConfig,
};
use crate::fields::{integrate_density, FormField, Grid, TrigField, MAX_DIM};
use crate::fixtures::XiFixture;
use crate::gauge::{
    gauge_transform, pair_index, probe_points, ConnExpr, ConnJet, Connection, FamilyCurve, GaugeError, GaugeMap, Piece, Reparam,
};
use crate::lie::{CharacteristicPair, GroupId, Mat};
use crate::quad::{gauss_legendre, pairwise_sum, par_map};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CharError {
    #[error(transparent)]
    Cs(#[from] CsError),
    #[error(transparent)]
    Gauge(#[from] GaugeError),
    #[error("1-form is not invariant: residual {0:.3e}")]
    NotInvariant(f64),
    #[error("parameter map is not equivariant: residual {0:.3e}")]
    NotEquivariant(f64),
    #[error("dλ differs from the character curvature by {0:.3e}")]
    CurvatureMismatch(f64),
    #[error("cycle does not close at joint {joint}: residual {residual:.3e}")]
    OpenCycle { joint: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Xi,
    Varsigma,
    Pullback,
    Custom,
}

/// χ ∈ Ĥ²_G on a space of connections, with its curvature and moment.
pub trait EquivariantCharacter: Sync + Send {
    fn eval(&self, phi: &GaugeMap, gamma: &FamilyCurve) -> Result<CircleValue, CharError>;
    fn curvature(&self, a: &Connection, da: &[TrigField], db: &[TrigField]) -> Result<f64, CharError>;
    fn moment(&self, a: &Connection, xi: &TrigField) -> Result<f64, CharError>;
    fn provenance(&self) -> Provenance;
}

fn form_of(grid: &Grid, group: GroupId, comps: &[TrigField]) -> FormField {
    FormField::from_fn(grid, 1, Some(group), |x| comps.iter().map(|f| f.eval(x)).collect())
}

/// Ξ from the mapping-torus Chern–Simons action.
#[derive(Debug, Clone)]
pub struct XiCharacter {
    pub p: CharacteristicPair,
    pub cfg: XiConfig,
}

impl XiCharacter {
    pub fn new(p: CharacteristicPair, cfg: XiConfig) -> XiCharacter {
        XiCharacter { p, cfg }
    }
}

impl EquivariantCharacter for XiCharacter {
    fn eval(&self, phi: &GaugeMap, gamma: &FamilyCurve) -> Result<CircleValue, CharError> {
        Ok(xi(phi, gamma, &self.p, &self.cfg)?)
    }

    fn curvature(&self, a: &Connection, da: &[TrigField], db: &[TrigField]) -> Result<f64, CharError> {
        let g = Grid::torus(a.dim, self.cfg.n).map_err(CsError::from)?;
        Ok(curvature_two_form(a, &form_of(&g, a.group, da), &form_of(&g, a.group, db), &self.p)?)
    }

    fn moment(&self, a: &Connection, xi: &TrigField) -> Result<f64, CharError> {
        let g = Grid::torus(a.dim, self.cfg.n).map_err(CsError::from)?;
        Ok(moment(a, xi, &self.p, &g)?)
    }

    fn provenance(&self) -> Provenance {
        Provenance::Xi
    }
}

/// A 1-form on the affine space of connections.
pub trait ConnectionOneForm: Sync + Send {
    /// β_A(a).
    fn at(&self, a: &Connection, da: &[TrigField]) -> f64;
    /// ∫ β along consecutive pieces, not reduced.
    fn path_integral(&self, group: GroupId, pieces: &[Piece]) -> f64;
    fn line_integral(&self, gamma: &FamilyCurve) -> f64 {
        self.path_integral(gamma.group, &gamma.pieces)
    }
    /// dβ(a,b) at A.
    fn differential(&self, a: &Connection, da: &[TrigField], db: &[TrigField]) -> f64;
}

/// The generator −(d_A ξ)_i of exp(tξ)·A at a point.
pub fn fundamental_at(j: &ConnJet, xi: &TrigField, x: &[f64; MAX_DIM]) -> [Mat; MAX_DIM] {
    let (v, g) = xi.eval_grad(x);
    let mut out = [Mat::zero(v.dim()); MAX_DIM];
    for i in 0..j.d {
        out[i] = -(g[i] + j.a[i].commutator(&v));
    }
    out
}

/// λ_A(a) = ∫_M p(A∧a), with dλ = ω.
#[derive(Debug, Clone)]
pub struct LambdaForm {
    pub p: CharacteristicPair,
    pub n: usize,
    pub nodes: usize,
}

impl LambdaForm {
    pub fn new(p: CharacteristicPair, n: usize) -> LambdaForm {
        LambdaForm { p, n, nodes: 16 }
    }
}

impl ConnectionOneForm for LambdaForm {
    fn at(&self, a: &Connection, da: &[TrigField]) -> f64 {
        lambda_at(a, da, &self.p, &Grid::torus(2, self.n).expect("grid"))
    }

    fn path_integral(&self, _group: GroupId, pieces: &[Piece]) -> f64 {
        integrate_lambda(pieces, &self.p, self.n, self.nodes).expect("λ on T² curves")
    }

    fn differential(&self, a: &Connection, da: &[TrigField], db: &[TrigField]) -> f64 {
        let g = Grid::torus(2, self.n).expect("grid");
        curvature_two_form(a, &form_of(&g, a.group, da), &form_of(&g, a.group, db), &self.p).expect("ω")
    }
}

/// Gauge-invariant β_A(a) = c∫_M p(a_x, F_A) on T².
#[derive(Debug, Clone)]
pub struct FluxForm {
    pub p: CharacteristicPair,
    pub scale: f64,
    pub n: usize,
    pub nodes: usize,
}

impl FluxForm {
    pub fn new(p: CharacteristicPair, scale: f64, n: usize) -> FluxForm {
        FluxForm { p, scale, n, nodes: 16 }
    }

    fn grid(&self) -> Grid {
        Grid::torus(2, self.n).expect("grid")
    }
}

/// (d_A a)_{xy} = ∂_x a_y − ∂_y a_x + [A_x,a_y] − [A_y,a_x].
fn covariant_d(j: &ConnJet, da: &[TrigField], x: &[f64; MAX_DIM]) -> (Mat, [Mat; 2]) {
    let (ax, gx) = da[0].eval_grad(x);
    let (ay, gy) = da[1].eval_grad(x);
    (gy[0] - gx[1] + j.a[0].commutator(&ay) - j.a[1].commutator(&ax), [ax, ay])
}

impl ConnectionOneForm for FluxForm {
    fn at(&self, a: &Connection, da: &[TrigField]) -> f64 {
        self.scale * integrate_density(&self.grid(), |x| self.p.pair(&da[0].eval(x), &a.jet(x).f[0]))
    }

    fn path_integral(&self, group: GroupId, pieces: &[Piece]) -> f64 {
        let (us, ws) = gauss_legendre(self.nodes);
        let g = group.dim();
        self.scale
            * integrate_density(&self.grid(), |x| {
                let per: Vec<f64> = pieces
                    .iter()
                    .map(|piece| {
                        let prep = piece.prepare(x, 2, g);
                        let t: Vec<f64> = us
                            .iter()
                            .zip(&ws)
                            .map(|(u, w)| {
                                let (j, v) = prep.eval(*u);
                                w * self.p.pair(&v[0], &j.f[0])
                            })
                            .collect();
                        pairwise_sum(&t)
                    })
                    .collect();
                pairwise_sum(&per)
            })
    }

    fn differential(&self, a: &Connection, da: &[TrigField], db: &[TrigField]) -> f64 {
        self.scale
            * integrate_density(&self.grid(), |x| {
                let j = a.jet(x);
                let (fa, va) = covariant_d(&j, da, x);
                let (fb, vb) = covariant_d(&j, db, x);
                self.p.pair(&vb[0], &fa) - self.p.pair(&va[0], &fb)
            })
    }
}

/// β_A(a) = r∫_M p(a∧F_A) on connections over T²×[0,1], the fibre integral of p(𝔽).
#[derive(Debug, Clone)]
pub struct BoundaryBeta {
    pub p: CharacteristicPair,
    pub grid: Grid,
    pub nodes: usize,
}

impl ConnectionOneForm for BoundaryBeta {
    fn at(&self, a: &Connection, da: &[TrigField]) -> f64 {
        let r = self.p.degree as f64;
        r * integrate_density(&self.grid, |x| {
            let j = a.jet(x);
            let mut v = [Mat::zero(j.n()); MAX_DIM];
            for i in 0..3 {
                v[i] = da[i].eval(x);
            }
            self.p.pair(&v[0], &j.f[pair_index(1, 2)]) - self.p.pair(&v[1], &j.f[pair_index(0, 2)])
                + self.p.pair(&v[2], &j.f[pair_index(0, 1)])
        })
    }

    fn path_integral(&self, _group: GroupId, pieces: &[Piece]) -> f64 {
        integrate_boundary_beta(pieces, &self.p, &self.grid, self.nodes).expect("β on slab curves")
    }

    fn differential(&self, _a: &Connection, _da: &[TrigField], _db: &[TrigField]) -> f64 {
        f64::NAN
    }
}

/// ς(β)(φ,γ) = ∫_γ β.
pub struct Varsigma<B: ConnectionOneForm> {
    pub beta: B,
}

/// Max of |∫_{φ·ζ} β − ∫_ζ β| over segments ζ from A to A + a.
pub fn invariance_residual<B: ConnectionOneForm>(beta: &B, data: &[(Connection, GaugeMap, Vec<TrigField>)]) -> f64 {
    data.iter()
        .map(|(a, phi, da)| {
            let zeta = OpenPath::segment(a, &a.shifted(da));
            (beta.path_integral(a.group, &zeta.gauged(phi).pieces) - beta.path_integral(a.group, &zeta.pieces)).abs()
        })
        .fold(0.0, f64::max)
}

/// Ad_φ of a tangent 1-form; exact for abelian groups and for constant gauge maps.
fn adjoint_shift(phi: &GaugeMap, da: &[TrigField]) -> Vec<TrigField> {
    if phi.group == GroupId::U1 {
        return da.to_vec();
    }
    let g = phi.eval(&[0.0; MAX_DIM]).0;
    da.iter().map(|f| f.map_coef(|c| crate::lie::ad(&g, c))).collect()
}

pub fn varsigma<B: ConnectionOneForm>(beta: B, data: &[(Connection, GaugeMap, Vec<TrigField>)]) -> Result<Varsigma<B>, CharError> {
    let r = invariance_residual(&beta, data);
    if r > 1e-8 {
        return Err(CharError::NotInvariant(r));
    }
    Ok(Varsigma { beta })
}

impl<B: ConnectionOneForm> EquivariantCharacter for Varsigma<B> {
    fn eval(&self, _phi: &GaugeMap, gamma: &FamilyCurve) -> Result<CircleValue, CharError> {
        Ok(CircleValue::new(self.beta.line_integral(gamma)))
    }

    fn curvature(&self, a: &Connection, da: &[TrigField], db: &[TrigField]) -> Result<f64, CharError> {
        Ok(self.beta.differential(a, da, db))
    }

    /// β_A(X_A) for the generator X_A = −d_Aξ of exp(tξ)·A, from the chord exp(−hξ)A → exp(hξ)A.
    fn moment(&self, a: &Connection, xi: &TrigField) -> Result<f64, CharError> {
        let h = 1e-4;
        let ap = gauge_transform(&GaugeMap::exp_scaled(a.group, a.dim, xi.clone(), h), a)?;
        let am = gauge_transform(&GaugeMap::exp_scaled(a.group, a.dim, xi.clone(), -h), a)?;
        Ok(self.beta.path_integral(a.group, &OpenPath::segment(&am, &ap).pieces) / (2.0 * h))
    }

    fn provenance(&self) -> Provenance {
        Provenance::Varsigma
    }
}

/// χ + c, for fault-injection tests.
pub struct Offset<'a> {
    pub inner: &'a dyn EquivariantCharacter,
    pub offset: f64,
}

impl EquivariantCharacter for Offset<'_> {
    fn eval(&self, phi: &GaugeMap, gamma: &FamilyCurve) -> Result<CircleValue, CharError> {
        Ok(CircleValue::new(self.inner.eval(phi, gamma)?.raw + self.offset))
    }
    fn curvature(&self, a: &Connection, da: &[TrigField], db: &[TrigField]) -> Result<f64, CharError> {
        self.inner.curvature(a, da, db)
    }
    fn moment(&self, a: &Connection, xi: &TrigField) -> Result<f64, CharError> {
        self.inner.moment(a, xi)
    }
    fn provenance(&self) -> Provenance {
        Provenance::Custom
    }
}

/// Restriction of connections on T²×[0,1] to the slice x₂ = c, with the induced map on gauge maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceMap {
    pub axis: usize,
    pub value: f64,
}

impl SliceMap {
    pub fn connection(&self, a: &Connection) -> Connection {
        a.restrict(self.axis, self.value)
    }
    pub fn gauge(&self, phi: &GaugeMap) -> GaugeMap {
        phi.restrict(self.axis, self.value)
    }
    pub fn curve(&self, g: &FamilyCurve) -> FamilyCurve {
        g.restrict(self.axis, self.value)
    }
    pub fn tangent(&self, da: &[TrigField]) -> Vec<TrigField> {
        da.iter().enumerate().filter(|(i, _)| *i != self.axis).map(|(_, f)| f.restrict(self.axis, self.value)).collect()
    }

    /// sup |f(φ·A) − ρ(φ)·f(A)| over probe points.
    pub fn equivariance_residual(&self, a: &Connection, phi: &GaugeMap) -> Result<f64, CharError> {
        let lhs = self.connection(&gauge_transform(phi, a)?);
        let rhs = gauge_transform(&self.gauge(phi), &self.connection(a))?;
        Ok(lhs.distance(&rhs, &probe_points(a.dim - 1)))
    }
}

/// (f,ρ)*χ, optionally a signed sum of slice pullbacks (boundary characters).
pub struct Pullback<'a> {
    pub inner: &'a dyn EquivariantCharacter,
    pub slices: Vec<(f64, SliceMap)>,
}

pub fn pullback_character<'a>(
    chi: &'a dyn EquivariantCharacter,
    slices: Vec<(f64, SliceMap)>,
    probes: &[(Connection, GaugeMap)],
) -> Result<Pullback<'a>, CharError> {
    for (_, s) in &slices {
        for (a, phi) in probes {
            let r = s.equivariance_residual(a, phi)?;
            if r > 1e-8 {
                return Err(CharError::NotEquivariant(r));
            }
        }
    }
    Ok(Pullback { inner: chi, slices })
}

impl EquivariantCharacter for Pullback<'_> {
    fn eval(&self, phi: &GaugeMap, gamma: &FamilyCurve) -> Result<CircleValue, CharError> {
        let mut raw = 0.0;
        for (sign, s) in &self.slices {
            raw += sign * self.inner.eval(&s.gauge(phi), &s.curve(gamma))?.raw;
        }
        Ok(CircleValue::new(raw))
    }

    fn curvature(&self, a: &Connection, da: &[TrigField], db: &[TrigField]) -> Result<f64, CharError> {
        let mut v = 0.0;
        for (sign, s) in &self.slices {
            v += sign * self.inner.curvature(&s.connection(a), &s.tangent(da), &s.tangent(db))?;
        }
        Ok(v)
    }

    fn moment(&self, a: &Connection, xi: &TrigField) -> Result<f64, CharError> {
        let mut v = 0.0;
        for (sign, s) in &self.slices {
            v += sign * self.inner.moment(&s.connection(a), &xi.restrict(s.axis, s.value))?;
        }
        Ok(v)
    }

    fn provenance(&self) -> Provenance {
        Provenance::Pullback
    }
}

/// Result of one axiom check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomResult {
    pub axiom: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub fixtures: usize,
    pub axioms: Vec<AxiomResult>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.axioms.iter().all(|a| a.pass)
    }

    pub fn get(&self, name: &str) -> Option<&AxiomResult> {
        self.axioms.iter().find(|a| a.axiom == name)
    }
}

/// Tolerances of the axiom battery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub axiom_i: f64,
    pub axiom_ii: f64,
    pub axiom_iii: f64,
    pub axiom_iv: f64,
    pub inverse: f64,
    pub conjugation: f64,
    pub reparam: f64,
    pub fd_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            axiom_i: 1e-6,
            axiom_ii: 1e-6,
            axiom_iii: 1e-5,
            axiom_iv: 1e-4,
            inverse: 1e-6,
            conjugation: 1e-6,
            reparam: 1e-6,
            fd_step: 1e-3,
        }
    }
}

/// ←ζ ∗ γ ∗ (φ·ζ) for ζ the segment from A = γ(0) to B = A + shift.
pub fn conjugated_by_path(gamma: &FamilyCurve, shift: &[TrigField]) -> Result<FamilyCurve, GaugeError> {
    let a = gamma.start();
    let zeta = Piece::Linear { from: a.expr.clone(), to: a.shifted(shift).expr };
    let mut pieces = vec![Piece::Reversed(Box::new(zeta.clone()))];
    pieces.extend(gamma.pieces.iter().cloned());
    pieces.push(Piece::Gauged { phi: gamma.twist.clone(), inner: Box::new(zeta) });
    FamilyCurve::new(gamma.group, gamma.dim, pieces, gamma.twist.clone())
}

/// Per-fixture residuals of every axiom.
fn fixture_residuals(chi: &dyn EquivariantCharacter, f: &XiFixture, tol: &Tolerances) -> Result<[f64; 7], CharError> {
    let e = GaugeMap::identity(f.a.group, f.a.dim);
    let g1 = FamilyCurve::segment_to_image(&f.a, &f.phi)?;
    let g2 = FamilyCurve::segment_to_image(&g1.end(), &f.psi)?;
    let x1 = chi.eval(&f.phi, &g1)?;
    let x2 = chi.eval(&f.psi, &g2)?;
    let both = crate::gauge::concat(&g1, &g2)?;
    let x12 = chi.eval(&f.psi.compose(&f.phi)?, &both)?;
    let r_i = circle_distance(x12.raw, x1.raw + x2.raw);

    let g3 = conjugated_by_path(&g1, &f.detour)?;
    let r_ii = circle_distance(chi.eval(&f.phi, &g3)?.raw, x1.raw);

    let square = FamilyCurve::square_loop(&f.a, &f.da, &f.db)?;
    let filled = chi.curvature(&f.a, &f.da, &f.db)?;
    let r_iii = circle_distance(chi.eval(&e, &square)?.raw, filled);

    let h = tol.fd_step;
    let at = |t: f64| -> Result<f64, CharError> {
        let ph = GaugeMap::exp_scaled(f.a.group, f.a.dim, f.direction.clone(), t);
        let c = FamilyCurve::segment_to_image(&f.a, &ph)?;
        Ok(chi.eval(&ph, &c)?.raw)
    };
    let fd = (at(h)? - at(-h)?) / (2.0 * h);
    let r_iv = (fd - chi.moment(&f.a, &f.direction)?).abs();

    let inv = chi.eval(&f.phi.inverse(), &g1.reverse())?;
    let r_a = circle_distance(x1.raw + inv.raw, 0.0);

    let conj = chi.eval(&f.psi.conjugate(&f.phi)?, &g1.act(&f.psi)?)?;
    let r_b = circle_distance(conj.raw, x1.raw);

    let mut r_re: f64 = 0.0;
    for c in [g1.reparametrized(Reparam::Power(2.0)), g1.split(0.37), g1.reparametrized(Reparam::Wobble(0.5))] {
        r_re = r_re.max(circle_distance(chi.eval(&f.phi, &c)?.raw, x1.raw));
    }
    Ok([r_i, r_ii, r_iii, r_iv, r_a, r_b, r_re])
}

pub const AXIOM_NAMES: [&str; 7] = ["i", "ii", "iii", "iv'", "inverse", "conjugation", "reparametrization"];

/// Run the axiom battery on χ.
pub fn verify_character(chi: &dyn EquivariantCharacter, battery: &[XiFixture], tol: &Tolerances) -> Result<VerifyReport, CharError> {
    let per: Vec<Result<[f64; 7], CharError>> = par_map(battery.len(), |k| fixture_residuals(chi, &battery[k], tol));
    let mut maxes = [0.0f64; 7];
    for r in per {
        let r = r?;
        for k in 0..7 {
            maxes[k] = maxes[k].max(r[k]);
        }
    }
    let tols = [tol.axiom_i, tol.axiom_ii, tol.axiom_iii, tol.axiom_iv, tol.inverse, tol.conjugation, tol.reparam];
    let axioms = (0..7)
        .map(|k| AxiomResult {
            axiom: AXIOM_NAMES[k].to_string(),
            max_residual: maxes[k],
            tolerance: tols[k],
            pass: maxes[k] < tols[k],
            samples: battery.len(),
        })
        .collect();
    Ok(VerifyReport { fixtures: battery.len(), axioms })
}

/// The pair (α, λ) encoding the lifted action on the trivial bundle over connections,
/// with connection Θ = ϑ − 2πiλ.
pub struct BundleCocycle<'a> {
    pub chi: &'a dyn EquivariantCharacter,
    pub lambda: &'a dyn ConnectionOneForm,
}

pub fn build_cocycle<'a>(
    chi: &'a dyn EquivariantCharacter,
    lambda: &'a dyn ConnectionOneForm,
    probes: &[(Connection, Vec<TrigField>, Vec<TrigField>)],
) -> Result<BundleCocycle<'a>, CharError> {
    for (a, da, db) in probes {
        let r = (lambda.differential(a, da, db) - chi.curvature(a, da, db)?).abs();
        if r > 1e-5 {
            return Err(CharError::CurvatureMismatch(r));
        }
    }
    Ok(BundleCocycle { chi, lambda })
}

impl BundleCocycle<'_> {
    /// α_φ(A) = ∫_γ λ − χ(φ,γ) along γ.
    pub fn alpha_along(&self, phi: &GaugeMap, gamma: &FamilyCurve) -> Result<f64, CharError> {
        Ok(self.lambda.line_integral(gamma) - self.chi.eval(phi, gamma)?.raw)
    }

    /// α_φ(A) along the straight segment A → φ·A.
    pub fn alpha(&self, phi: &GaugeMap, a: &Connection) -> Result<f64, CharError> {
        self.alpha_along(phi, &FamilyCurve::segment_to_image(a, phi)?)
    }

    /// |α_{φ′φ}(A) − α_φ(A) − α_{φ′}(φ·A)| on the circle.
    pub fn cocycle_residual(&self, phi: &GaugeMap, psi: &GaugeMap, a: &Connection) -> Result<f64, CharError> {
        let lhs = self.alpha(&psi.compose(phi)?, a)?;
        let rhs = self.alpha(phi, a)? + self.alpha(psi, &gauge_transform(phi, a)?)?;
        Ok(circle_distance(lhs, rhs))
    }

    /// α along two different curves in C^φ from A.
    pub fn path_independence_residual(&self, phi: &GaugeMap, a: &Connection, detour: &[TrigField]) -> Result<f64, CharError> {
        let g1 = FamilyCurve::segment_to_image(a, phi)?;
        let mid = a.shifted(detour);
        let g2 = FamilyCurve::polyline(&[a.clone(), mid, g1.end()], phi)?;
        Ok(circle_distance(self.alpha_along(phi, &g1)?, self.alpha_along(phi, &g2)?))
    }

    /// |d/ds α_φ(A+s·a) − (λ_{φA}(Ad_φ a) − λ_A(a))| by central differences, for abelian
    /// or constant φ.
    pub fn dalpha_residual(&self, phi: &GaugeMap, a: &Connection, da: &[TrigField], h: f64) -> Result<f64, CharError> {
        let fd = (self.alpha(phi, &a.shifted(&scale_all(da, h)))? - self.alpha(phi, &a.shifted(&scale_all(da, -h)))?) / (2.0 * h);
        let want = self.lambda.at(&gauge_transform(phi, a)?, &adjoint_shift(phi, da)) - self.lambda.at(a, da);
        Ok((fd - want).abs())
    }
}

fn scale_all(da: &[TrigField], s: f64) -> Vec<TrigField> {
    da.iter().map(|f| f.scaled(s)).collect()
}

/// hol_φ(γ) = ∫_γ λ − α_φ(γ(0)).
pub fn holonomy_from_cocycle(c: &BundleCocycle<'_>, phi: &GaugeMap, gamma: &FamilyCurve) -> Result<CircleValue, CharError> {
    let r = probe_points(gamma.dim)
        .iter()
        .map(|x| (gamma.twist.eval(x).0 - phi.eval(x).0).norm_max())
        .fold(0.0, f64::max);
    if r > crate::gauge::ENDPOINT_TOL {
        return Err(CsError::TwistMismatch(r).into());
    }
    Ok(CircleValue::new(c.lambda.line_integral(gamma) - c.alpha(phi, &gamma.start())?))
}

/// The cocycle of the trivial product construction over M×[0,1]: ∫ Tp(φ̃Ã) − Tp(Ã) with
/// Ã = zA and φ̃ = Π exp(z ξ_j), integrated with Gauss–Legendre in z.
pub fn product_cocycle(phi: &GaugeMap, a: &Connection, p: &CharacteristicPair, n: usize, nz: usize) -> Result<f64, CharError> {
    let grid = Grid::torus(2, n).map_err(CsError::from)?;
    let (zs, ws) = gauss_legendre(nz);
    Ok(integrate_density(&grid, |x| {
        let j = a.jet(x);
        let terms: Vec<f64> = zs
            .iter()
            .zip(&ws)
            .map(|(z, w)| {
                let mut e = j;
                e.d = 3;
                let aa = ConnJet::wedge11(2, &j.a, &j.a);
                for i in 0..2 {
                    e.a[i] = j.a[i].scale(*z);
                    e.f[pair_index(i, 2)] = -j.a[i];
                }
                e.a[2] = Mat::zero(j.n());
                e.f[0] = j.f[0].scale(*z) - aa[0].scale(z * (1.0 - z));
                let mut xz = *x;
                xz[2] = 0.0;
                let (g, r, rs) = phi.eval_scaled(&xz, *z);
                let mut rr = r;
                rr[2] = rs;
                let moved = e.gauged(&g, &rr);
                w * (cs_density(p, &moved, 0, 1, 2) - cs_density(p, &e, 0, 1, 2))
            })
            .collect();
        pairwise_sum(&terms)
    }))
}

/// Open path in the space of connections.
#[derive(Debug, Clone)]
pub struct OpenPath {
    pub pieces: Vec<Piece>,
}

impl OpenPath {
    pub fn segment(a: &Connection, b: &Connection) -> OpenPath {
        OpenPath { pieces: vec![Piece::Linear { from: a.expr.clone(), to: b.expr.clone() }] }
    }
    pub fn start(&self) -> ConnExpr {
        self.pieces[0].at(0.0)
    }
    pub fn end(&self) -> ConnExpr {
        self.pieces.last().unwrap().at(1.0)
    }
    pub fn reversed(&self) -> OpenPath {
        OpenPath { pieces: self.pieces.iter().rev().map(|p| Piece::Reversed(Box::new(p.clone()))).collect() }
    }
    pub fn gauged(&self, phi: &GaugeMap) -> OpenPath {
        OpenPath { pieces: self.pieces.iter().map(|p| Piece::Gauged { phi: phi.clone(), inner: Box::new(p.clone()) }).collect() }
    }
}

/// Z_{1,G}: pairs (φ_i, γ_i) with φ_i·γ_i(1) = γ_{i+1}(0) cyclically.
#[derive(Debug, Clone)]
pub struct EquivariantCycle {
    pub group: GroupId,
    pub dim: usize,
    pub items: Vec<(GaugeMap, OpenPath)>,
}

impl EquivariantCycle {
    pub fn new(group: GroupId, dim: usize, items: Vec<(GaugeMap, OpenPath)>) -> Result<Self, CharError> {
        let n = group.dim();
        for k in 0..items.len() {
            let (phi, g) = &items[k];
            let next = &items[(k + 1) % items.len()].1;
            let moved = ConnExpr::Gauge(phi.clone(), Box::new(g.end()));
            let r = probe_points(dim)
                .iter()
                .map(|x| moved.jet(x, dim, n).max_diff(&next.start().jet(x, dim, n)))
                .fold(0.0, f64::max);
            if r > crate::gauge::ENDPOINT_TOL {
                return Err(CharError::OpenCycle { joint: k, residual: r });
            }
        }
        Ok(EquivariantCycle { group, dim, items })
    }
}

/// Auxiliary curves τ_i ∈ C^{φ_i} from γ_i(1), given as an optional intermediate shift.
#[derive(Debug, Clone, Default)]
pub struct TauChoice {
    pub detours: Vec<Option<Vec<TrigField>>>,
}

/// η(z) = χ(e, γ₁∗τ₁∗…∗γ_n∗τ_n) − Σ χ(φ_i, τ_i).
pub fn lerman_malkin_eval(chi: &dyn EquivariantCharacter, z: &EquivariantCycle, taus: &TauChoice) -> Result<CircleValue, CharError> {
    let mut pieces = Vec::new();
    let mut correction = 0.0;
    for (k, (phi, g)) in z.items.iter().enumerate() {
        pieces.extend(g.pieces.iter().cloned());
        let end = Connection::from_expr(z.group, z.dim, g.end());
        let target = gauge_transform(phi, &end)?;
        let tau = match taus.detours.get(k).and_then(|d| d.as_ref()) {
            Some(shift) => FamilyCurve::polyline(&[end.clone(), end.shifted(shift), target], phi)?,
            None => FamilyCurve::linear(&end, &target, phi)?,
        };
        correction += chi.eval(phi, &tau)?.raw;
        pieces.extend(tau.pieces.iter().cloned());
    }
    let closed = FamilyCurve::new(z.group, z.dim, pieces, GaugeMap::identity(z.group, z.dim))?;
    Ok(CircleValue::new(chi.eval(&GaugeMap::identity(z.group, z.dim), &closed)?.raw - correction))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projectability {
    pub projectable: bool,
    pub residual: f64,
}

/// max |μ(ξ_j; A)| over the fixture connections; projectable when below 1e−6.
pub fn projectability_check(
    chi: &dyn EquivariantCharacter,
    generators: &[TrigField],
    fixtures: &[Connection],
) -> Result<Projectability, CharError> {
    let mut r: f64 = 0.0;
    for a in fixtures {
        for g in generators {
            r = r.max(chi.moment(a, g)?.abs());
        }
    }
    Ok(Projectability { projectable: r < 1e-6, residual: r })
}

/// max circle distance |χ(φ,γ) − ∫_γ β| over the supplied twisted curves.
pub fn triviality_residual(
    chi: &dyn EquivariantCharacter,
    beta: &dyn ConnectionOneForm,
    items: &[(GaugeMap, FamilyCurve)],
) -> Result<f64, CharError> {
    let mut r: f64 = 0.0;
    for (phi, g) in items {
        r = r.max(circle_distance(chi.eval(phi, g)?.raw, beta.line_integral(g)));
    }
    Ok(r)
}
