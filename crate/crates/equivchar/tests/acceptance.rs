use equivchar::abelian_oracle::exactness_battery;
use equivchar::cli::{self, Format, Operation, Overrides, CROSS_SCALE};
use equivchar::cschar::{circle_distance, cs_action, mapping_torus_pff, slab_grid, CircleValue, TimeRule, XiConfig};
use equivchar::equivariant::{
    build_cocycle, holonomy_from_cocycle, lerman_malkin_eval, projectability_check, pullback_character,
    triviality_residual, verify_character, BoundaryBeta, EquivariantCharacter, EquivariantCycle, LambdaForm, OpenPath, SliceMap,
    TauChoice, Tolerances, XiCharacter,
};
use equivchar::fields::{Grid, TrigField, MAX_DIM};
use equivchar::fixtures::{flat_u1, slab_fixture, su2_t3_connection, xi_battery};
use equivchar::gauge::{gauge_transform, Connection, FamilyCurve};
use equivchar::lie::{CharacteristicPair, GroupId, Mat};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;
type Criterion = (&'static str, fn() -> Outcome);

const SEED: u64 = 7;

fn su2() -> CharacteristicPair {
    CharacteristicPair::new(GroupId::SU2, 1)
}

fn within(t: Duration, limit: Duration) -> bool {
    t < limit
}

type M2 = [Complex64; 4];

fn mul(a: &M2, b: &M2) -> M2 {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

fn neg_tr(a: &M2) -> f64 {
    -(a[0] + a[3]).re
}

/// Spectral ∂/∂x_axis of a periodic n³ sample array, index (i·n + j)·n + k.
fn spectral_partial(data: &[Complex64], n: usize, axis: usize) -> Vec<Complex64> {
    let fft = FftPlanner::new().plan_fft_forward(n);
    let ifft = FftPlanner::new().plan_fft_inverse(n);
    let stride = [n * n, n, 1][axis];
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for base in 0..data.len() {
        if !(base / stride).is_multiple_of(n) {
            continue;
        }
        for (m, v) in line.iter_mut().enumerate() {
            *v = data[base + m * stride];
        }
        fft.process(&mut line);
        for (m, v) in line.iter_mut().enumerate() {
            let k = if 2 * m < n { m as f64 } else if 2 * m == n { 0.0 } else { m as f64 - n as f64 };
            *v *= Complex64::new(0.0, 2.0 * PI * k) / n as f64;
        }
        ifft.process(&mut line);
        for (m, v) in line.iter().enumerate() {
            out[base + m * stride] = *v;
        }
    }
    out
}

/// (1/8π²)∫ tr(α∧dα + ⅔α∧α∧α) with tr = −Tr, sampled on n³ points with FFT derivatives.
fn classical_cs(a: &Connection, n: usize) -> f64 {
    let len = n * n * n;
    let mut alpha = vec![[[Complex64::new(0.0, 0.0); 4]; 3]; len];
    for (idx, slot) in alpha.iter_mut().enumerate() {
        let x = [(idx / (n * n)) as f64 / n as f64, ((idx / n) % n) as f64 / n as f64, (idx % n) as f64 / n as f64, 0.0];
        let j = a.jet(&x);
        *slot = std::array::from_fn(|i| j.a[i].e);
    }
    let mut d = vec![[[[Complex64::new(0.0, 0.0); 4]; 3]; 3]; len];
    for i in 0..3 {
        for e in 0..4 {
            let comp: Vec<Complex64> = alpha.iter().map(|s| s[i][e]).collect();
            for ax in 0..3 {
                for (slot, v) in d.iter_mut().zip(spectral_partial(&comp, n, ax)) {
                    slot[ax][i][e] = v;
                }
            }
        }
    }
    let perms: [([usize; 3], f64); 6] =
        [([0, 1, 2], 1.0), ([1, 2, 0], 1.0), ([2, 0, 1], 1.0), ([0, 2, 1], -1.0), ([2, 1, 0], -1.0), ([1, 0, 2], -1.0)];
    let mut total = 0.0;
    for idx in 0..len {
        let al = &alpha[idx];
        let mut v = 0.0;
        for ([i, j, k], s) in perms {
            v += s * neg_tr(&mul(&al[i], &d[idx][j][k]));
            v += s * (2.0 / 3.0) * neg_tr(&mul(&mul(&al[i], &al[j]), &al[k]));
        }
        total += v;
    }
    total / len as f64 / (8.0 * PI * PI)
}

fn classical_formula() -> Outcome {
    let a = su2_t3_connection(SEED);
    let t = Instant::now();
    let cs = cs_action(&a, &su2(), &Grid::torus(3, 24)?)?;
    let elapsed = t.elapsed();
    let reference = CircleValue::new(classical_cs(&a, 24));
    let d = cs.distance(&reference);
    Ok((d < 1e-8 && within(elapsed, Duration::from_secs(10)), format!("|cs - classical| = {d:.3e} (tol 1e-8), cs = {:.15}, classical = {:.15}, {elapsed:.2?}", cs.raw, reference.raw)))
}

fn axiom_suite() -> Outcome {
    let t = Instant::now();
    let chi = XiCharacter::new(su2(), XiConfig::with_grid(32));
    let battery = xi_battery(GroupId::SU2, 12, SEED);
    let rep = verify_character(&chi, &battery, &Tolerances::default())?;
    let elapsed = t.elapsed();
    let worst: Vec<String> = rep.axioms.iter().map(|a| format!("{}={:.1e}/{:.0e}", a.axiom, a.max_residual, a.tolerance)).collect();
    Ok((rep.all_pass() && within(elapsed, Duration::from_secs(300)), format!("{} fixtures, {}, {elapsed:.1?}", rep.fixtures, worst.join(" "))))
}

fn curvature_and_loops() -> Outcome {
    let x = Mat::su2(0.0, 0.0, 1.0);
    let a = Connection::product(GroupId::SU2, 2);
    let da = vec![TrigField::constant(x), TrigField::zero(2)];
    let db = vec![TrigField::zero(2), TrigField::constant(x)];
    let chi = XiCharacter::new(su2(), XiConfig::with_grid(32));
    let (omega, rows) = cli::epsilon_loops(&chi, &a, &da, &db)?;
    let reference = 1.0 / (2.0 * PI * PI);
    let ab = (omega - reference).abs();
    let errors: Vec<f64> = rows.iter().map(|(_, q)| (q - omega).abs()).collect();
    let (order, order_pass) = cli::order_check(&errors);
    let errs: Vec<String> = errors.iter().map(|e| format!("{e:.1e}")).collect();
    Ok((
        ab < 1e-8 && order_pass,
        format!("|omega - 1/(2pi^2)| = {ab:.3e} (tol 1e-8), loop errors [{}], order {order:.3}", errs.join(", ")),
    ))
}

fn cocycle_round_trip() -> Outcome {
    let p = su2();
    let chi = XiCharacter::new(p, XiConfig::with_grid(32));
    let lam = LambdaForm::new(p, 32);
    let battery = xi_battery(GroupId::SU2, 12, SEED);
    let probes: Vec<_> = battery.iter().map(|f| (f.a.clone(), f.da.clone(), f.db.clone())).collect();
    let c = build_cocycle(&chi, &lam, &probes)?;
    let (mut hol, mut coc, mut path) = (0.0f64, 0.0f64, 0.0f64);
    for f in &battery {
        let g = FamilyCurve::polyline(&[f.a.clone(), f.a.shifted(&f.detour), gauge_transform(&f.phi, &f.a)?], &f.phi)?;
        hol = hol.max(holonomy_from_cocycle(&c, &f.phi, &g)?.distance(&chi.eval(&f.phi, &g)?));
        coc = coc.max(c.cocycle_residual(&f.phi, &f.psi, &f.a)?);
        path = path.max(c.path_independence_residual(&f.phi, &f.a, &f.detour)?);
    }
    Ok((
        hol < 1e-6 && coc < 1e-6 && path < 1e-6,
        format!("{} fixtures, holonomy {hol:.1e}, cocycle {coc:.1e}, path {path:.1e} (tol 1e-6)", battery.len()),
    ))
}

fn abelian_exactness() -> Outcome {
    let rep = exactness_battery(24, SEED, 6, 1)?;
    let violations = rep.axiom_i + rep.axiom_ii + rep.inverse;
    let (reference, err) = cli::cross_pipeline(CROSS_SCALE, 1, 32)?;
    let (order, order_pass) = cli::order_check(&err);
    let rel = err[0] / reference.abs().min((1.0 - reference).abs());
    Ok((
        violations == 0 && err[0] < 1e-5 && order_pass,
        format!(
            "{} fixtures, {violations} exact violations; cross N=32 err {:.3e} (tol 1e-5, rel {rel:.2e}), N=64 err {:.3e}, order {order:.3}",
            rep.fixtures, err[0], err[1]
        ),
    ))
}

fn boundary_identity() -> Outcome {
    let p = su2();
    let t = Instant::now();
    let chi = XiCharacter::new(p, XiConfig::with_grid(12));
    let grid = slab_grid(12, 12)?;
    let beta = BoundaryBeta { p, grid: grid.clone(), nodes: 8 };
    let (mut pff_res, mut items) = (0.0f64, Vec::new());
    let fixtures: Vec<_> = [3u64, 5, 11].iter().map(|s| slab_fixture(GroupId::SU2, *s)).collect();
    let probes: Vec<_> = fixtures.iter().map(|f| (f.a.clone(), f.phi.clone())).collect();
    let slices = vec![(1.0, SliceMap { axis: 2, value: 1.0 }), (-1.0, SliceMap { axis: 2, value: 0.0 })];
    let pb = pullback_character(&chi, slices, &probes)?;
    for f in &fixtures {
        let g = FamilyCurve::segment_to_image(&f.a, &f.phi)?;
        let pff = mapping_torus_pff(&f.phi, &g, &p, &grid, TimeRule::default())?;
        pff_res = pff_res.max(circle_distance(pb.eval(&f.phi, &g)?.raw, pff));
        items.push((f.phi.clone(), g));
    }
    let triv = triviality_residual(&pb, &beta, &items)?;
    let elapsed = t.elapsed();
    Ok((
        pff_res < 1e-3 && triv < 1e-3 && within(elapsed, Duration::from_secs(600)),
        format!("{} slab fixtures on 12^3x12, |pullback - Int p(F^2)| {pff_res:.2e}, triviality {triv:.2e} (tol 1e-3), {elapsed:.2?}", items.len()),
    ))
}

/// μ(ξ;A) = −2∫ p(ξ, F_xy) for U1 with p(X,Y) = −Re(XY)/(4π²), midpoint sum on n² points.
fn moment_u1(a: &[TrigField], xi: &TrigField, n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut x = [0.0; MAX_DIM];
            x[0] = i as f64 / n as f64;
            x[1] = j as f64 / n as f64;
            let f = a[1].eval_grad(&x).1[0].e[0] - a[0].eval_grad(&x).1[1].e[0];
            let p = -(xi.eval(&x).e[0] * f).re / (4.0 * PI * PI);
            s += -2.0 * p;
        }
    }
    s / (n * n) as f64
}

fn projectability() -> Outcome {
    let p = CharacteristicPair::new(GroupId::U1, 1);
    let chi = XiCharacter::new(p, XiConfig::with_grid(32));
    let flats: Vec<_> = [[0.1, 0.3], [0.5, -0.2], [0.0, 0.0], [0.25, 0.7]].iter().map(|h| flat_u1(*h)).collect();
    let gens = vec![
        TrigField::constant(Mat::u1(1.0)),
        TrigField::cos(Mat::u1(0.7), [1.0, 0.0, 0.0, 0.0]),
        TrigField::sin(Mat::u1(-0.4), [1.0, 1.0, 0.0, 0.0]),
    ];
    let flat = projectability_check(&chi, &gens, &flats)?;
    let comps = vec![TrigField::constant(Mat::u1(0.3)), TrigField::sin(Mat::u1(0.8), [1.0, 0.0, 0.0, 0.0])];
    let curved = Connection::new(GroupId::U1, 2, comps.clone());
    let xi = TrigField::cos(Mat::u1(1.5), [1.0, 0.0, 0.0, 0.0]);
    let bent = projectability_check(&chi, std::slice::from_ref(&xi), &[curved])?;
    let reference = moment_u1(&comps, &xi, 64).abs();
    let d = (bent.residual - reference).abs();
    Ok((
        flat.projectable && flat.residual < 1e-10 && !bent.projectable && d < 1e-6,
        format!("flat residual {:.1e} (tol 1e-10); curved residual {:.9} vs moment {:.9}, diff {d:.1e} (tol 1e-6)", flat.residual, bent.residual, reference),
    ))
}

fn lerman_malkin() -> Outcome {
    let p = su2();
    let chi = XiCharacter::new(p, XiConfig::with_grid(32));
    let (mut one, mut cond_a, mut tau) = (0.0f64, 0.0f64, 0.0f64);
    let battery = xi_battery(GroupId::SU2, 4, SEED);
    for f in &battery {
        let g = FamilyCurve::segment_to_image(&f.a, &f.phi)?;
        let z = EquivariantCycle::new(GroupId::SU2, 2, vec![(f.phi.inverse(), OpenPath { pieces: g.pieces.clone() })])?;
        one = one.max(lerman_malkin_eval(&chi, &z, &TauChoice::default())?.distance(&chi.eval(&f.phi, &g)?));
        let zeta = OpenPath::segment(&f.a, &f.a.shifted(&f.detour));
        let back = zeta.reversed().gauged(&f.phi);
        let z2 = EquivariantCycle::new(GroupId::SU2, 2, vec![(f.phi.clone(), zeta), (f.phi.inverse(), back)])?;
        let eta = lerman_malkin_eval(&chi, &z2, &TauChoice::default())?;
        cond_a = cond_a.max(circle_distance(eta.raw, 0.0));
        let alt = TauChoice { detours: vec![Some(f.da.clone()), Some(f.db.clone())] };
        tau = tau.max(lerman_malkin_eval(&chi, &z2, &alt)?.distance(&eta));
    }
    Ok((
        one < 1e-6 && cond_a < 1e-6 && tau < 1e-6,
        format!("{} fixtures, one-segment {one:.1e}, condition a {cond_a:.1e}, tau {tau:.1e} (tol 1e-6)", battery.len()),
    ))
}

fn suite_bytes(parallel: bool) -> Result<Vec<u8>, Box<dyn std::error::Error>> {
    equivchar::set_parallel(parallel);
    let mut out = Vec::new();
    for op in [Operation::Cs, Operation::Xi, Operation::Verify, Operation::Curvature, Operation::Moment, Operation::Oracle] {
        let rep = cli::run_config(cli::builtin_scenario(Some(op)), &[op], Overrides::default())?;
        out.extend(cli::emit_report(&rep, Format::Json));
        out.extend(cli::emit_report(&rep, Format::Csv));
    }
    let full = cli::run_config(cli::builtin_scenario(None), &[], Overrides::default())?;
    out.extend(cli::emit_report(&full, Format::Json));
    equivchar::set_parallel(true);
    Ok(out)
}

fn determinism() -> Outcome {
    let a = suite_bytes(true)?;
    let b = suite_bytes(true)?;
    let c = suite_bytes(false)?;
    Ok((a == b && a == c, format!("{} bytes; repeat identical {}, sequential identical {}", a.len(), a == b, a == c)))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("classical-formula", classical_formula),
        ("axiom-suite", axiom_suite),
        ("curvature-moment", curvature_and_loops),
        ("cocycle-round-trip", cocycle_round_trip),
        ("abelian-exactness", abelian_exactness),
        ("boundary-identity", boundary_identity),
        ("projectability", projectability),
        ("lerman-malkin", lerman_malkin),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let (pass, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!("{} {} {name}: {detail}", if pass { "PASS" } else { "FAIL" }, k + 1);
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
