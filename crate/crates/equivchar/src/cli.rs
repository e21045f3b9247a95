//! Scenario configs, batch execution and machine-readable reports.
//!
//! Configs are TOML documents with the sections `[scenario]`, `[base]`, `[fixture]`,
//! `[twist]`, `[curve]`, `[tolerances]` and `[oracle]`; only `scenario.group` is required.

use crate::abelian_oracle::{self as oracle, Q};
use crate::cschar::{self, circle_distance, CircleValue, CsError, XiConfig};
use crate::equivariant::{verify_character, CharError, EquivariantCharacter, Tolerances, XiCharacter};
use crate::fields::{FieldError, Grid, TrigField};
use crate::fixtures::{self, FamilyId, XiFixture};
use crate::gauge::{gauge_transform, concat, Connection, FamilyCurve, GaugeError, GaugeMap};
use crate::lie::{CharacteristicPair, GroupId, Mat};
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;
use thiserror::Error;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error{}{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default(), field.as_ref().map(|f| format!(" in field `{f}`")).unwrap_or_default())]
    Parse { line: Option<usize>, field: Option<String>, message: String },
    #[error("input invariant violated: {0}")]
    Invariant(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } => EXIT_PARSE,
            CliError::Invariant(_) => EXIT_INVARIANT,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    fn field(field: &str, message: impl Into<String>) -> CliError {
        CliError::Parse { line: None, field: Some(field.to_string()), message: message.into() }
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        CliError::Invariant(e.to_string())
    }
}

impl From<GaugeError> for CliError {
    fn from(e: GaugeError) -> Self {
        CliError::Invariant(e.to_string())
    }
}

impl From<CsError> for CliError {
    fn from(e: CsError) -> Self {
        match e {
            CsError::Field(_) | CsError::Smoothing(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Invariant(e.to_string()),
        }
    }
}

impl From<CharError> for CliError {
    fn from(e: CharError) -> Self {
        match e {
            CharError::Cs(c) => c.into(),
            other => CliError::Invariant(other.to_string()),
        }
    }
}

impl From<oracle::OracleError> for CliError {
    fn from(e: oracle::OracleError) -> Self {
        CliError::Invariant(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operation {
    Cs,
    Xi,
    Verify,
    Curvature,
    Moment,
    Oracle,
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        f.write_str(&s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Manifold {
    T2,
    T3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    #[serde(default = "default_name")]
    pub name: String,
    pub group: GroupId,
    #[serde(default = "one")]
    pub level: i64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub operations: Vec<Operation>,
}

fn default_name() -> String {
    "scenario".into()
}
fn one() -> i64 {
    1
}
fn default_seed() -> u64 {
    7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Base {
    pub manifold: Manifold,
    pub grid: usize,
}

impl Default for Base {
    fn default() -> Self {
        Base { manifold: Manifold::T2, grid: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixtureSpec {
    /// Catalog family: F1, F2 or flat-twisted-lattice; defaults by group.
    pub family: Option<String>,
    pub count: usize,
    /// Named special fixture; `atiyah-bott` selects the flat SU2 example.
    pub special: Option<String>,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec { family: None, count: 12, special: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TwistKind {
    Fixture,
    Identity,
    Constant,
    Winding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwistSpec {
    pub kind: TwistKind,
    pub winding: [i64; 2],
    /// Rational constant c of e^{2πic}, as [num, den].
    pub constant: [i64; 2],
}

impl Default for TwistSpec {
    fn default() -> Self {
        TwistSpec { kind: TwistKind::Fixture, winding: [1, 0], constant: [0, 1] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Linear,
    Constant,
    Square,
    Concat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveSpec {
    pub kind: CurveKind,
    pub eps: f64,
    /// Steps of a concatenation program: `gauge`, `psi`, `detour`, `undo`.
    pub program: Vec<String>,
}

impl Default for CurveSpec {
    fn default() -> Self {
        CurveSpec { kind: CurveKind::Linear, eps: 0.0625, program: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TolSpec {
    pub axiom_i: f64,
    pub axiom_ii: f64,
    pub axiom_iii: f64,
    pub axiom_iv: f64,
    pub inverse: f64,
    pub conjugation: f64,
    pub reparam: f64,
    pub fd_step: f64,
    pub value: f64,
    pub resolution: f64,
    pub gauge: f64,
    pub curvature: f64,
    pub cross: f64,
}

impl Default for TolSpec {
    fn default() -> Self {
        let t = Tolerances::default();
        TolSpec {
            axiom_i: t.axiom_i,
            axiom_ii: t.axiom_ii,
            axiom_iii: t.axiom_iii,
            axiom_iv: t.axiom_iv,
            inverse: t.inverse,
            conjugation: t.conjugation,
            reparam: t.reparam,
            fd_step: t.fd_step,
            value: 1e-12,
            resolution: 1e-6,
            gauge: 1e-6,
            curvature: 1e-8,
            cross: 1e-5,
        }
    }
}

impl TolSpec {
    pub fn battery(&self) -> Tolerances {
        Tolerances {
            axiom_i: self.axiom_i,
            axiom_ii: self.axiom_ii,
            axiom_iii: self.axiom_iii,
            axiom_iv: self.axiom_iv,
            inverse: self.inverse,
            conjugation: self.conjugation,
            reparam: self.reparam,
            fd_step: self.fd_step,
        }
    }

    fn set_all(&mut self, t: f64) {
        let fd = self.fd_step;
        *self = TolSpec {
            axiom_i: t,
            axiom_ii: t,
            axiom_iii: t,
            axiom_iv: t,
            inverse: t,
            conjugation: t,
            reparam: t,
            fd_step: fd,
            value: t,
            resolution: t,
            gauge: t,
            curvature: t,
            cross: t,
        };
    }

    fn entries(&self) -> [(&'static str, f64); 13] {
        [
            ("axiom_i", self.axiom_i),
            ("axiom_ii", self.axiom_ii),
            ("axiom_iii", self.axiom_iii),
            ("axiom_iv", self.axiom_iv),
            ("inverse", self.inverse),
            ("conjugation", self.conjugation),
            ("reparam", self.reparam),
            ("fd_step", self.fd_step),
            ("value", self.value),
            ("resolution", self.resolution),
            ("gauge", self.gauge),
            ("curvature", self.curvature),
            ("cross", self.cross),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSpec {
    /// Base holonomies e^{2πi h} of the flat twisted fixture, as [[num, den], [num, den]].
    pub holonomy: [[i64; 2]; 2],
    pub steps: usize,
    pub count: usize,
    pub cross: bool,
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec { holonomy: [[1, 5], [2, 7]], steps: 4, count: 20, cross: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub scenario: Header,
    #[serde(default)]
    pub base: Base,
    #[serde(default)]
    pub fixture: FixtureSpec,
    #[serde(default)]
    pub twist: TwistSpec,
    #[serde(default)]
    pub curve: CurveSpec,
    #[serde(default)]
    pub tolerances: TolSpec,
    #[serde(default)]
    pub oracle: OracleSpec,
}

/// Command-line overrides applied after parsing.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub grid: Option<usize>,
    pub tol: Option<f64>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn field_of(message: &str) -> Option<String> {
    let start = message.find('`')?;
    let rest = &message[start + 1..];
    Some(rest[..rest.find('`')?].to_string())
}

pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    toml::from_str::<Scenario>(text).map_err(|e| {
        let message = e.message().to_string();
        CliError::Parse { line: e.span().map(|s| line_of(text, s.start)), field: field_of(&message), message }
    })
}

impl Scenario {
    pub fn apply(&mut self, o: Overrides) {
        if let Some(n) = o.grid {
            self.base.grid = n;
        }
        if let Some(t) = o.tol {
            self.tolerances.set_all(t);
        }
    }

    pub fn family(&self) -> Result<FamilyId, CliError> {
        match &self.fixture.family {
            Some(s) => s.parse().map_err(|m: String| CliError::field("fixture.family", m)),
            None => Ok(match self.scenario.group {
                GroupId::U1 => FamilyId::AbelianTrig,
                GroupId::SU2 => FamilyId::Su2Trig,
            }),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.base.grid < 16 {
            return Err(CliError::Invariant(format!("base.grid = {} is below 16", self.base.grid)));
        }
        if self.scenario.level < 1 {
            return Err(CliError::Invariant(format!("scenario.level = {} must be positive", self.scenario.level)));
        }
        for (name, t) in self.tolerances.entries() {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Invariant(format!("tolerances.{name} = {t} must be positive")));
            }
        }
        if !(self.curve.eps > 0.0 && self.curve.eps <= 1.0) {
            return Err(CliError::Invariant(format!("curve.eps = {} outside (0, 1]", self.curve.eps)));
        }
        if self.twist.constant[1] <= 0 {
            return Err(CliError::Invariant("twist.constant denominator must be positive".into()));
        }
        if self.oracle.holonomy.iter().any(|h| h[1] <= 0) || self.oracle.steps == 0 {
            return Err(CliError::Invariant("oracle.holonomy denominators and oracle.steps must be positive".into()));
        }
        let family = self.family()?;
        if family != FamilyId::FlatTwistedLattice && family.group() != self.scenario.group {
            return Err(CliError::Invariant(format!("fixture family {family} does not carry group {}", self.scenario.group)));
        }
        Ok(())
    }

    fn pair(&self) -> CharacteristicPair {
        CharacteristicPair::new(self.scenario.group, self.scenario.level)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rational {
    pub num: i64,
    pub den: i64,
}

impl TryFrom<Q> for Rational {
    type Error = CliError;
    fn try_from(q: Q) -> Result<Self, CliError> {
        let num = i64::try_from(*q.numer()).map_err(|_| CliError::Numerical("rational numerator exceeds 64 bits".into()))?;
        let den = i64::try_from(*q.denom()).map_err(|_| CliError::Numerical("rational denominator exceeds 64 bits".into()))?;
        Ok(Rational { num, den })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub samples: usize,
}

impl Check {
    fn below(name: &str, residual: f64, tolerance: f64, samples: usize) -> Check {
        Check { name: name.into(), residual, tolerance, pass: residual < tolerance, samples }
    }

    /// Exact identity: residual counts violations and must be zero.
    fn exact(name: &str, violations: usize, samples: usize) -> Check {
        Check { name: name.into(), residual: violations as f64, tolerance: 0.0, pass: violations == 0, samples }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub parameter: String,
    pub at: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpReport {
    pub operation: Operation,
    pub values: Vec<NamedValue>,
    pub checks: Vec<Check>,
    pub convergence: Vec<ConvergenceRow>,
    pub pass: bool,
}

impl OpReport {
    fn new(operation: Operation) -> OpReport {
        OpReport { operation, values: Vec::new(), checks: Vec::new(), convergence: Vec::new(), pass: true }
    }

    fn value(&mut self, name: &str, value: f64) {
        self.values.push(NamedValue { name: name.into(), value, exact: None });
    }

    fn exact(&mut self, name: &str, q: Q) -> Result<(), CliError> {
        let v = *q.numer() as f64 / *q.denom() as f64;
        self.values.push(NamedValue { name: name.into(), value: v, exact: Some(q.try_into()?) });
        Ok(())
    }

    fn row(&mut self, parameter: &str, at: f64, value: f64) {
        self.convergence.push(ConvergenceRow { parameter: parameter.into(), at, value });
    }

    fn finish(mut self) -> OpReport {
        self.pass = self.checks.iter().all(|c| c.pass);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: Scenario,
    pub conventions: Vec<String>,
    pub results: Vec<OpReport>,
    pub pass: bool,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            EXIT_PASS
        } else {
            EXIT_NUMERICAL
        }
    }
}

pub const CONVENTIONS: [&str; 6] = [
    "p(X,Y) = -k c Re Tr(XY) / (4 pi^2), c = 1 for U1 and 1/2 for SU2",
    "gauge action A -> Ad_phi A - (d phi) phi^-1",
    "mapping tori carry the orientation -(dx dy dt)",
    "omega(a,b) = 2 Int p(a wedge b)",
    "mu(xi) = -2 Int p(xi, F_A)",
    "lambda_A(a) = Int p(A wedge a), d lambda = omega",
];

/// Built-in scenario per subcommand, used when no config is given.
pub fn builtin_scenario(op: Option<Operation>) -> &'static str {
    match op {
        Some(Operation::Cs) => "[scenario]\nname = \"cs-su2-t3\"\ngroup = \"SU2\"\n\n[base]\nmanifold = \"T3\"\ngrid = 24\n",
        Some(Operation::Xi) => "[scenario]\nname = \"xi-su2\"\ngroup = \"SU2\"\n\n[curve]\nkind = \"linear\"\n",
        Some(Operation::Curvature) => {
            "[scenario]\nname = \"curvature-atiyah-bott\"\ngroup = \"SU2\"\n\n[fixture]\nspecial = \"atiyah-bott\"\n"
        }
        Some(Operation::Moment) => "[scenario]\nname = \"moment-su2\"\ngroup = \"SU2\"\n",
        Some(Operation::Oracle) => "[scenario]\nname = \"oracle-u1\"\ngroup = \"U1\"\n\n[twist]\nkind = \"winding\"\nwinding = [1, 0]\n",
        Some(Operation::Verify) | None => {
            "[scenario]\nname = \"verify-su2\"\ngroup = \"SU2\"\noperations = [\"verify\", \"curvature\", \"moment\"]\n\n[fixture]\ncount = 12\n"
        }
    }
}

struct Ctx<'a> {
    sc: &'a Scenario,
    p: CharacteristicPair,
    n: usize,
}

enum Twist {
    Smooth(GaugeMap),
    Winding([i64; 2]),
}

impl Ctx<'_> {
    fn require(&self, m: Manifold) -> Result<(), CliError> {
        if self.sc.base.manifold != m {
            return Err(CliError::Invariant(format!("operation needs base.manifold = {m:?}")));
        }
        Ok(())
    }

    fn battery(&self) -> Vec<XiFixture> {
        fixtures::xi_battery(self.sc.scenario.group, self.sc.fixture.count, self.sc.scenario.seed)
    }

    fn first(&self) -> XiFixture {
        fixtures::xi_battery(self.sc.scenario.group, 1, self.sc.scenario.seed).remove(0)
    }

    fn chi(&self, n: usize) -> XiCharacter {
        XiCharacter::new(self.p, XiConfig::with_grid(n))
    }

    fn twist(&self, fx: &XiFixture) -> Result<Twist, CliError> {
        let g = self.sc.scenario.group;
        Ok(match self.sc.twist.kind {
            TwistKind::Fixture => Twist::Smooth(fx.phi.clone()),
            TwistKind::Identity => Twist::Smooth(GaugeMap::identity(g, 2)),
            TwistKind::Constant => {
                if g != GroupId::U1 {
                    return Err(CliError::Invariant("constant twists are U1 only".into()));
                }
                let [num, den] = self.sc.twist.constant;
                let c = 2.0 * PI * num as f64 / den as f64;
                Twist::Smooth(GaugeMap::exp(g, 2, TrigField::constant(Mat::u1(c))))
            }
            TwistKind::Winding => {
                if g != GroupId::U1 {
                    return Err(CliError::Invariant("winding twists are U1 only".into()));
                }
                Twist::Winding(self.sc.twist.winding)
            }
        })
    }

    fn curve(&self, fx: &XiFixture, phi: &GaugeMap) -> Result<FamilyCurve, CliError> {
        let identity = phi.windings().iter().all(|&w| w == 0) && *phi == GaugeMap::identity(phi.group, phi.dim);
        let eps = self.sc.curve.eps;
        let scale = |f: &[TrigField]| f.iter().map(|t| t.scaled(eps)).collect::<Vec<_>>();
        match self.sc.curve.kind {
            CurveKind::Constant | CurveKind::Square if !identity => {
                Err(CliError::Invariant("constant and square curves need twist.kind = \"identity\"".into()))
            }
            CurveKind::Constant => Ok(FamilyCurve::constant(&fx.a)),
            CurveKind::Square => Ok(FamilyCurve::square_loop(&fx.a, &scale(&fx.da), &scale(&fx.db))?),
            CurveKind::Linear => Ok(FamilyCurve::segment_to_image(&fx.a, phi)?),
            CurveKind::Concat => {
                if self.sc.curve.program.is_empty() {
                    return Err(CliError::field("curve.program", "concatenation program is empty"));
                }
                let mut acc: Option<FamilyCurve> = None;
                for step in &self.sc.curve.program {
                    let here = acc.as_ref().map(|c| c.end()).unwrap_or_else(|| fx.a.clone());
                    let neg: Vec<TrigField> = fx.detour.iter().map(|t| t.scaled(-1.0)).collect();
                    let e = GaugeMap::identity(here.group, here.dim);
                    let next = match step.as_str() {
                        "gauge" => FamilyCurve::segment_to_image(&here, phi)?,
                        "psi" => FamilyCurve::segment_to_image(&here, &fx.psi)?,
                        "detour" => FamilyCurve::linear(&here, &here.shifted(&fx.detour), &e)?,
                        "undo" => FamilyCurve::linear(&here, &here.shifted(&neg), &e)?,
                        other => return Err(CliError::field("curve.program", format!("unknown step '{other}'"))),
                    };
                    acc = Some(match acc {
                        None => next,
                        Some(c) => concat(&c, &next)?,
                    });
                }
                Ok(acc.expect("nonempty program"))
            }
        }
    }
}

fn signed(v: f64) -> f64 {
    if v > 0.5 {
        v - 1.0
    } else {
        v
    }
}

/// Observed convergence order between consecutive errors at refinement ratio 2.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Slack on observed orders: finite-resolution ratios approach 2^p from below.
pub const ORDER_SLACK: f64 = 0.05;
/// Errors below this are at the quadrature floor and carry no order information.
pub const ORDER_FLOOR: f64 = 1e-9;

fn run_cs(cx: &Ctx) -> Result<OpReport, CliError> {
    cx.require(Manifold::T3)?;
    let mut r = OpReport::new(Operation::Cs);
    let g = cx.sc.scenario.group;
    let a = fixtures::t3_connection(g, cx.sc.scenario.seed);
    let cs = |n: usize, a: &Connection| -> Result<CircleValue, CliError> { Ok(cschar::cs_action(a, &cx.p, &Grid::torus(3, n)?)?) };
    let v = cs(cx.n, &a)?;
    r.value("cs", v.value);
    for n in [cx.n / 2, cx.n] {
        r.row("N", n as f64, cs(n, &a)?.value);
    }
    let phi = fixtures::t3_gauge(g, cx.sc.scenario.seed + 1, 0.4);
    let vg = cs(cx.n, &gauge_transform(&phi, &a)?)?;
    r.value("cs_gauged", vg.value);
    r.checks.push(Check::below("gauge", circle_distance(v.value, vg.value), cx.sc.tolerances.gauge, 1));
    let coarse = r.convergence[0].value;
    r.checks.push(Check::below("resolution", circle_distance(v.value, coarse), cx.sc.tolerances.resolution, 2));
    Ok(r.finish())
}

fn lattice_xi(cx: &Ctx, a: &Connection, phi: &GaugeMap, n: usize) -> Result<Q, CliError> {
    let gamma = FamilyCurve::segment_to_image(a, phi)?;
    let tw = oracle::sample_twist(phi, n, 1 << 20)?;
    let path = oracle::sample_curve(&gamma, &tw, n, n)?;
    Ok(oracle::exact_xi_u1(&tw, &path, cx.sc.scenario.level)?)
}

fn run_xi(cx: &Ctx) -> Result<OpReport, CliError> {
    cx.require(Manifold::T2)?;
    let mut r = OpReport::new(Operation::Xi);
    let fx = cx.first();
    match cx.twist(&fx)? {
        Twist::Winding(m) => {
            let phi = GaugeMap::winding(2, &m);
            for n in [cx.n / 2, cx.n] {
                let q = lattice_xi(cx, &fx.a, &phi, n)?;
                r.row("N", n as f64, *q.numer() as f64 / *q.denom() as f64);
                if n == cx.n {
                    r.exact("xi", q)?;
                }
            }
            let d = circle_distance(r.convergence[0].value, r.convergence[1].value);
            r.checks.push(Check::below("resolution", d, cx.sc.tolerances.cross, 2));
        }
        Twist::Smooth(phi) => {
            let gamma = cx.curve(&fx, &phi)?;
            let cfg = XiConfig::with_grid(cx.n);
            let parts = cschar::xi_parts(&phi, &gamma, &cx.p, &cfg)?;
            let v = CircleValue::new(parts.total());
            r.value("xi", v.value);
            r.value("curve_part", parts.curve);
            r.value("gauge_part", parts.gauge);
            for n in [cx.n / 2, cx.n] {
                r.row("N", n as f64, cschar::xi(&phi, &gamma, &cx.p, &XiConfig::with_grid(n))?.value);
            }
            if cx.sc.curve.kind == CurveKind::Constant {
                r.checks.push(Check::below("constant-curve", circle_distance(v.value, 0.0), cx.sc.tolerances.value, 1));
            } else {
                let d = circle_distance(r.convergence[0].value, v.value);
                r.checks.push(Check::below("resolution", d, cx.sc.tolerances.resolution, 2));
            }
        }
    }
    Ok(r.finish())
}

fn run_verify(cx: &Ctx) -> Result<OpReport, CliError> {
    cx.require(Manifold::T2)?;
    let mut r = OpReport::new(Operation::Verify);
    let battery = cx.battery();
    if battery.is_empty() {
        return Ok(r.finish());
    }
    let rep = verify_character(&cx.chi(cx.n), &battery, &cx.sc.tolerances.battery())?;
    r.value("fixtures", rep.fixtures as f64);
    for a in rep.axioms {
        r.checks.push(Check { name: a.axiom, residual: a.max_residual, tolerance: a.tolerance, pass: a.pass, samples: a.samples });
    }
    Ok(r.finish())
}

/// Loop values Ξ(e, □_ε)/ε² against ω for ε = 1/8, 1/16, 1/32 with the order check.
pub fn epsilon_loops(chi: &XiCharacter, a: &Connection, da: &[TrigField], db: &[TrigField]) -> Result<(f64, Vec<(f64, f64)>), CliError> {
    let omega = chi.curvature(a, da, db)?;
    let e = GaugeMap::identity(a.group, a.dim);
    let mut rows = Vec::new();
    for eps in [0.125, 0.0625, 0.03125] {
        let s = |f: &[TrigField]| f.iter().map(|t| t.scaled(eps)).collect::<Vec<_>>();
        let lp = FamilyCurve::square_loop(a, &s(da), &s(db))?;
        rows.push((eps, signed(chi.eval(&e, &lp)?.value) / (eps * eps)));
    }
    Ok((omega, rows))
}

/// Order ≥ 2 holds between consecutive ε when the observed order is within
/// [`ORDER_SLACK`] of 2 or the finer error sits below [`ORDER_FLOOR`].
pub fn order_check(errors: &[f64]) -> (f64, bool) {
    let mut worst = f64::INFINITY;
    let mut pass = true;
    for w in errors.windows(2) {
        if w[1] < ORDER_FLOOR {
            continue;
        }
        let p = observed_order(w[0], w[1]);
        worst = worst.min(p);
        pass &= p >= 2.0 - ORDER_SLACK;
    }
    (worst, pass)
}

fn run_curvature(cx: &Ctx) -> Result<OpReport, CliError> {
    cx.require(Manifold::T2)?;
    let mut r = OpReport::new(Operation::Curvature);
    let chi = cx.chi(cx.n);
    let ab = cx.sc.fixture.special.as_deref() == Some("atiyah-bott");
    let (a, da, db) = if ab {
        if cx.sc.scenario.group != GroupId::SU2 {
            return Err(CliError::Invariant("the atiyah-bott fixture is SU2".into()));
        }
        let x = Mat::su2(0.0, 0.0, 1.0);
        (
            Connection::product(GroupId::SU2, 2),
            vec![TrigField::constant(x), TrigField::zero(2)],
            vec![TrigField::zero(2), TrigField::constant(x)],
        )
    } else if let Some(other) = &cx.sc.fixture.special {
        return Err(CliError::field("fixture.special", format!("unknown special fixture '{other}'")));
    } else {
        let fx = cx.first();
        (fx.a, fx.da, fx.db)
    };
    let (omega, rows) = epsilon_loops(&chi, &a, &da, &db)?;
    r.value("omega", omega);
    if ab {
        let reference = cx.sc.scenario.level as f64 / (2.0 * PI * PI);
        r.value("reference", reference);
        r.checks.push(Check::below("atiyah-bott", (omega - reference).abs(), cx.sc.tolerances.curvature, 1));
    }
    let errors: Vec<f64> = rows.iter().map(|(_, q)| (q - omega).abs()).collect();
    for (eps, q) in &rows {
        r.row("eps", *eps, *q);
    }
    let loop_res = rows.iter().map(|(eps, q)| (q - omega).abs() * eps * eps).fold(0.0, f64::max);
    r.checks.push(Check::below("loop", loop_res, cx.sc.tolerances.axiom_iii, rows.len()));
    let (order, pass) = order_check(&errors);
    r.value("observed_order", if order.is_finite() { order } else { f64::NAN });
    r.checks.push(Check { name: "order".into(), residual: errors.iter().cloned().fold(0.0, f64::max), tolerance: ORDER_FLOOR, pass, samples: rows.len() });
    Ok(r.finish())
}

fn run_moment(cx: &Ctx) -> Result<OpReport, CliError> {
    cx.require(Manifold::T2)?;
    let mut r = OpReport::new(Operation::Moment);
    let fx = cx.first();
    let chi = cx.chi(cx.n);
    let mu = chi.moment(&fx.a, &fx.direction)?;
    let h = cx.sc.tolerances.fd_step;
    let at = |t: f64| -> Result<f64, CliError> {
        let ph = GaugeMap::exp_scaled(fx.a.group, fx.a.dim, fx.direction.clone(), t);
        let c = FamilyCurve::segment_to_image(&fx.a, &ph)?;
        Ok(chi.eval(&ph, &c)?.raw)
    };
    let fd = (at(h)? - at(-h)?) / (2.0 * h);
    r.value("mu", mu);
    r.value("finite_difference", fd);
    r.checks.push(Check::below("iv'", (fd - mu).abs(), cx.sc.tolerances.axiom_iv, 1));
    Ok(r.finish())
}

/// Amplitude scale of the cross-pipeline fixture.
pub const CROSS_SCALE: f64 = 0.5;

/// Cross-pipeline errors of the lattice oracle at N and 2N on the low-amplitude fixture.
pub fn cross_pipeline(scale: f64, level: i64, n: usize) -> Result<(f64, [f64; 2]), CliError> {
    let (a, phi) = fixtures::lattice_cross_fixture(scale);
    let p = CharacteristicPair::new(GroupId::U1, level);
    let gamma = FamilyCurve::segment_to_image(&a, &phi)?;
    let cfg = XiConfig { n: 2 * n, time: cschar::TimeRule::GaussLegendre(16) };
    let reference = cschar::xi(&phi, &gamma, &p, &cfg)?.value;
    let mut err = [0.0; 2];
    for (k, m) in [n, 2 * n].into_iter().enumerate() {
        let tw = oracle::sample_twist(&phi, m, 1 << 40)?;
        let path = oracle::sample_curve(&gamma, &tw, m, m)?;
        err[k] = circle_distance(oracle::to_circle(oracle::exact_xi_u1(&tw, &path, level)?).value, reference);
    }
    Ok((reference, err))
}

fn run_oracle(cx: &Ctx) -> Result<OpReport, CliError> {
    cx.require(Manifold::T2)?;
    if cx.sc.scenario.group != GroupId::U1 {
        return Err(CliError::Invariant("the lattice oracle is U1 only".into()));
    }
    let mut r = OpReport::new(Operation::Oracle);
    let k = cx.sc.scenario.level;
    let o = &cx.sc.oracle;
    let winding = if cx.sc.twist.kind == TwistKind::Winding { cx.sc.twist.winding } else { [1, 0] };
    let hol = [Q::new(o.holonomy[0][0] as i128, o.holonomy[0][1] as i128), Q::new(o.holonomy[1][0] as i128, o.holonomy[1][1] as i128)];
    let hden = num_integer::lcm(*hol[0].denom(), *hol[1].denom());
    let mut flat = Vec::new();
    for n in [cx.n, 2 * cx.n] {
        let den = n as i128 * o.steps as i128 * hden;
        let phi = oracle::LatticeTwist::from_parts(n, n, den, winding, Q::from_integer(0), &[]);
        let q = oracle::exact_xi_u1(&phi, &oracle::flat_twisted(n, den, winding, hol, o.steps), k)?;
        r.exact(&format!("flat_twisted_N{n}"), q)?;
        flat.push(q);
    }
    r.checks.push(Check::exact("flat-resolution", usize::from(flat[0] != flat[1]), 2));
    if o.count > 0 {
        let e = oracle::exactness_battery(o.count, cx.sc.scenario.seed, 6, k)?;
        r.checks.push(Check::exact("exact-i", e.axiom_i, e.fixtures));
        r.checks.push(Check::exact("exact-ii", e.axiom_ii, e.fixtures));
        r.checks.push(Check::exact("exact-inverse", e.inverse, e.fixtures));
    }
    if o.cross {
        let (reference, err) = cross_pipeline(CROSS_SCALE, k, cx.n)?;
        r.value("cross_reference", reference);
        r.row("N", cx.n as f64, err[0]);
        r.row("N", 2.0 * cx.n as f64, err[1]);
        r.checks.push(Check::below("cross-pipeline", err[0], cx.sc.tolerances.cross, 1));
        let (order, pass) = order_check(&err);
        r.value("cross_order", order);
        r.checks.push(Check { name: "cross-order".into(), residual: err[1], tolerance: ORDER_FLOOR, pass, samples: 2 });
    }
    Ok(r.finish())
}

pub fn run_operation(sc: &Scenario, op: Operation) -> Result<OpReport, CliError> {
    let cx = Ctx { sc, p: sc.pair(), n: sc.base.grid };
    let t = Instant::now();
    let r = match op {
        Operation::Cs => run_cs(&cx),
        Operation::Xi => run_xi(&cx),
        Operation::Verify => run_verify(&cx),
        Operation::Curvature => run_curvature(&cx),
        Operation::Moment => run_moment(&cx),
        Operation::Oracle => run_oracle(&cx),
    };
    eprintln!("{op}: {:.1} ms", t.elapsed().as_secs_f64() * 1e3);
    r
}

/// Run the listed operations, or the scenario's own list when `ops` is empty.
pub fn run_scenario(sc: &Scenario, ops: &[Operation]) -> Result<Report, CliError> {
    sc.validate()?;
    let list = if ops.is_empty() { sc.scenario.operations.clone() } else { ops.to_vec() };
    if list.is_empty() {
        return Err(CliError::field("scenario.operations", "no operations to run"));
    }
    let results = list.iter().map(|&op| run_operation(sc, op)).collect::<Result<Vec<_>, _>>()?;
    let pass = results.iter().all(|r| r.pass);
    Ok(Report { scenario: sc.clone(), conventions: CONVENTIONS.iter().map(|s| s.to_string()).collect(), results, pass })
}

/// Parse a config, apply overrides and run.
pub fn run_config(text: &str, ops: &[Operation], o: Overrides) -> Result<Report, CliError> {
    let mut sc = parse_scenario(text)?;
    sc.apply(o);
    run_scenario(&sc, ops)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// Round to 12 significant digits.
pub fn sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn round_floats(v: &mut Json) {
    match v {
        Json::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64().and_then(|x| serde_json::Number::from_f64(sig12(x))) {
                *n = x;
            }
        }
        Json::Array(a) => a.iter_mut().for_each(round_floats),
        Json::Object(o) => o.values_mut().for_each(round_floats),
        _ => {}
    }
}

pub fn emit_report(report: &Report, format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            let mut v = serde_json::to_value(report).expect("report serialises");
            round_floats(&mut v);
            let mut s = serde_json::to_string_pretty(&v).expect("json");
            s.push('\n');
            s.into_bytes()
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["operation", "check", "max_residual", "tolerance", "pass", "samples"]).expect("csv");
            for r in &report.results {
                for c in &r.checks {
                    w.write_record([
                        r.operation.to_string(),
                        c.name.clone(),
                        format!("{:e}", sig12(c.residual)),
                        format!("{:e}", sig12(c.tolerance)),
                        c.pass.to_string(),
                        c.samples.to_string(),
                    ])
                    .expect("csv");
                }
            }
            w.into_inner().expect("csv")
        }
    }
}
