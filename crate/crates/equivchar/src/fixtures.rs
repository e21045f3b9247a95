//! Built-in fixture catalog: abelian and SU2 trigonometric connections, gauge maps and
//! curve data on T², slab fixtures on T²×[0,1], generated from fixed seeds.

use crate::fields::{TrigField, MAX_DIM};
use crate::gauge::{Connection, GaugeMap};
use crate::lie::{GroupId, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyId {
    /// F1: abelian trigonometric fields.
    AbelianTrig,
    /// F2: SU2 trigonometric fields.
    Su2Trig,
    /// Flat U1 connections with winding twists, lattice sampled.
    FlatTwistedLattice,
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilyId::AbelianTrig => "F1",
            FamilyId::Su2Trig => "F2",
            FamilyId::FlatTwistedLattice => "flat-twisted-lattice",
        })
    }
}

impl FromStr for FamilyId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "F1" | "abelian-trig" => Ok(FamilyId::AbelianTrig),
            "F2" | "su2-trig" => Ok(FamilyId::Su2Trig),
            "flat-twisted-lattice" | "lattice" => Ok(FamilyId::FlatTwistedLattice),
            other => Err(format!("unknown fixture family '{other}'")),
        }
    }
}

impl FamilyId {
    pub fn group(&self) -> GroupId {
        match self {
            FamilyId::Su2Trig => GroupId::SU2,
            _ => GroupId::U1,
        }
    }
}

const WAVES: [[f64; 2]; 6] = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0], [2.0, 0.0], [0.0, 2.0]];

/// Seeded generator of random algebra-valued trigonometric fields.
pub struct FieldGen {
    rng: ChaCha8Rng,
    group: GroupId,
    dim: usize,
}

impl FieldGen {
    pub fn new(group: GroupId, dim: usize, seed: u64) -> FieldGen {
        FieldGen { rng: ChaCha8Rng::seed_from_u64(seed), group, dim }
    }

    pub fn algebra(&mut self, amp: f64) -> Mat {
        match self.group {
            GroupId::U1 => Mat::u1(self.rng.gen_range(-amp..amp)),
            GroupId::SU2 => {
                Mat::su2(self.rng.gen_range(-amp..amp), self.rng.gen_range(-amp..amp), self.rng.gen_range(-amp..amp))
            }
        }
    }

    fn wave(&mut self) -> [f64; MAX_DIM] {
        let w = WAVES[self.rng.gen_range(0..WAVES.len())];
        let mut o = [0.0; MAX_DIM];
        o[0] = w[0];
        o[1] = w[1];
        o
    }

    /// Constant plus `modes` random cos/sin modes on the first two axes; on a third axis
    /// the coefficients acquire a polynomial factor of degree ≤ 1.
    pub fn field(&mut self, amp: f64, modes: usize) -> TrigField {
        let mut f = TrigField::constant(self.algebra(amp));
        for _ in 0..modes {
            let w = self.wave();
            let c = self.algebra(amp);
            let term = if self.rng.gen_bool(0.5) { TrigField::sin(c, w) } else { TrigField::cos(c, w) };
            f = f.plus(&term);
        }
        if self.dim == 3 {
            let mut pow = [0u8; MAX_DIM];
            pow[2] = 1;
            let slope = TrigField::monomial(self.algebra(amp), pow);
            let w = self.wave();
            let mixed = TrigField::sin(self.algebra(amp), w);
            let mixed = TrigField { n: mixed.n, terms: mixed.terms.iter().map(|t| crate::fields::TrigTerm { pow, ..*t }).collect() };
            f = f.plus(&slope).plus(&mixed);
        }
        f
    }

    pub fn one_form(&mut self, amp: f64, modes: usize) -> Vec<TrigField> {
        (0..self.dim).map(|_| self.field(amp, modes)).collect()
    }

    pub fn connection(&mut self, amp: f64, modes: usize) -> Connection {
        Connection::new(self.group, self.dim, self.one_form(amp, modes))
    }

    /// Product of `factors` exponentials of random fields.
    pub fn gauge(&mut self, amp: f64, factors: usize) -> GaugeMap {
        let mut g = GaugeMap::identity(self.group, self.dim);
        for _ in 0..factors {
            let xi = self.field(amp, 2);
            g = g.compose(&GaugeMap::exp(self.group, self.dim, xi)).expect("same group");
        }
        g
    }
}

/// Data for one item of the character-axiom battery on a T² base.
#[derive(Debug, Clone)]
pub struct XiFixture {
    pub name: String,
    pub a: Connection,
    pub phi: GaugeMap,
    pub psi: GaugeMap,
    /// Tangent shift defining the auxiliary start point B = A + ζ-shift.
    pub detour: Vec<TrigField>,
    pub da: Vec<TrigField>,
    pub db: Vec<TrigField>,
    /// Algebra direction for the moment condition.
    pub direction: TrigField,
}

/// The standard battery of `count` fixtures for a group on T².
pub fn xi_battery(group: GroupId, count: usize, seed: u64) -> Vec<XiFixture> {
    (0..count)
        .map(|k| {
            let mut g = FieldGen::new(group, 2, seed.wrapping_mul(1_000_003).wrapping_add(k as u64));
            let amp = 0.25 + 0.05 * (k % 4) as f64;
            XiFixture {
                name: format!("{}-{k:02}", group),
                a: g.connection(amp, 2),
                phi: g.gauge(0.6, 1 + k % 2),
                psi: g.gauge(0.5, 1),
                detour: g.one_form(0.2, 1),
                da: g.one_form(0.3, 1),
                db: g.one_form(0.3, 1),
                direction: g.field(0.5, 2),
            }
        })
        .collect()
}

/// Slab fixture on T²×[0,1] for boundary identities.
#[derive(Debug, Clone)]
pub struct SlabFixture {
    pub a: Connection,
    pub phi: GaugeMap,
}

pub fn slab_fixture(group: GroupId, seed: u64) -> SlabFixture {
    let mut g = FieldGen::new(group, 3, seed);
    SlabFixture { a: g.connection(0.3, 1), phi: g.gauge(0.4, 1) }
}

impl FieldGen {
    /// Periodic field on T³: constant plus two modes with wave vectors in {−1,0,1}³.
    fn periodic3(&mut self, amp: f64, constant: bool) -> TrigField {
        let mut f = if constant { TrigField::constant(self.algebra(amp)) } else { TrigField::zero(self.group.dim()) };
        for _ in 0..2 {
            let mut w = [0.0; MAX_DIM];
            for a in w.iter_mut().take(3) {
                *a = self.rng.gen_range(-1..=1) as f64;
            }
            let c = self.algebra(1.25 * amp);
            f = f.plus(&if self.rng.gen_bool(0.5) { TrigField::sin(c, w) } else { TrigField::cos(c, w) });
        }
        f
    }
}

/// Periodic connection on T³ used for Chern–Simons actions.
pub fn t3_connection(group: GroupId, seed: u64) -> Connection {
    let mut g = FieldGen::new(group, 3, seed);
    let comps = (0..3).map(|_| g.periodic3(0.4, true)).collect();
    Connection::new(group, 3, comps)
}

/// SU2 connection on T³ used for the classical-formula comparison.
pub fn su2_t3_connection(seed: u64) -> Connection {
    t3_connection(GroupId::SU2, seed)
}

/// Periodic null-homotopic gauge map on T³.
pub fn t3_gauge(group: GroupId, seed: u64, amp: f64) -> GaugeMap {
    let mut g = FieldGen::new(group, 3, seed);
    let xi = g.periodic3(amp, false);
    GaugeMap::exp(group, 3, xi)
}

/// Low-amplitude U1 connection and null-homotopic twist on T² for lattice comparison;
/// the gauge function shares Fourier modes with the curvature.
pub fn lattice_cross_fixture(scale: f64) -> (Connection, GaugeMap) {
    let u = |c: f64| Mat::u1(scale * c);
    let ax = TrigField::sin(u(0.05), [0.0, 1.0, 0.0, 0.0]).plus(&TrigField::cos(u(0.04), [1.0, 1.0, 0.0, 0.0]));
    let ay = TrigField::cos(u(-0.03), [1.0, 0.0, 0.0, 0.0]).plus(&TrigField::sin(u(0.05), [1.0, -1.0, 0.0, 0.0]));
    let xi = TrigField::cos(u(0.2), [1.0, 0.0, 0.0, 0.0])
        .plus(&TrigField::sin(u(0.15), [1.0, 1.0, 0.0, 0.0]))
        .plus(&TrigField::sin(u(0.1), [0.0, 1.0, 0.0, 0.0]));
    (Connection::new(GroupId::U1, 2, vec![ax, ay]), GaugeMap::exp(GroupId::U1, 2, xi))
}

/// Flat U1 connection with constant components (holonomies e^{2πi h}).
pub fn flat_u1(h: [f64; 2]) -> Connection {
    Connection::new(
        GroupId::U1,
        2,
        vec![TrigField::constant(Mat::u1(2.0 * std::f64::consts::PI * h[0])), TrigField::constant(Mat::u1(2.0 * std::f64::consts::PI * h[1]))],
    )
}
