//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sllg_core::collocation::{
    fit_power_law, ml_grid_sizing, Discretization, GridSequence, LevelSchedule, MlConstants,
    MlStudy, ProblemSpec, SgRow, SgStudy, ML_CSV_HEADER, SG_CSV_HEADER,
};
use sllg_core::interp1d::interpolate_1d;
use sllg_core::llg::{InitialCondition, LlgProblem, NoiseCoefficient};
use sllg_core::{
    IndexSet, MultiIndex, NodeFamily1D, ParamVector, ProfitParams, SparseGrid,
    SparseGridInterpolant,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn family(p: u32) -> NodeFamily1D {
    NodeFamily1D::new(p, 5.0).unwrap()
}

fn node_values() -> Verdict {
    let expected = [
        1.50820493, 2.57225941, 3.43039782, 0.71249928, 1.98372001, 1.09293728, 0.35175738,
    ];
    let fam = family(2);
    let mut positive = BTreeSet::new();
    for level in 1..=3 {
        for &x in fam.make_nodes(level).unwrap().all() {
            if x > 0.0 {
                positive.insert(x.to_bits());
            }
        }
    }
    let nodes: Vec<f64> = positive.into_iter().map(f64::from_bits).collect();
    let worst = expected
        .iter()
        .map(|e| {
            nodes
                .iter()
                .map(|x| (x - e).abs())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    verdict(worst <= 1e-6, format!("max deviation {worst:.2e}"))
}

fn sizing_table() -> Verdict {
    let table: [&[usize]; 6] = [
        &[1],
        &[1, 3],
        &[1, 3, 10],
        &[1, 4, 18, 82],
        &[2, 7, 27, 131, 602],
        &[2, 10, 42, 193, 887, 1500],
    ];
    let c = MlConstants {
        c_fe: 0.7510,
        c_sg: 0.1721,
        r: 0.4703,
    };
    let schedule = LevelSchedule::dyadic(5);
    let seq = GridSequence::with_points(ProfitParams::improved(2), 5000).unwrap();
    let mut ok = true;
    let mut rows = Vec::new();
    for (k, expected) in table.iter().enumerate() {
        let cap = (k == 5).then_some(1500);
        let got: Vec<usize> = ml_grid_sizing(k, &c, &schedule, &seq, cap)
            .iter()
            .map(|s| s.points)
            .collect();
        ok &= got == *expected;
        rows.push(format!("K={k} {got:?} (table {expected:?})"));
    }
    verdict(ok, rows.join("; "))
}

fn random_set(rng: &mut ChaCha8Rng, dims: usize, max_level: u32, additions: usize) -> IndexSet {
    let mut members = vec![MultiIndex::zero()];
    for _ in 0..additions {
        let base = members[rng.random_range(0..members.len())].clone();
        let cand = base.incremented(rng.random_range(0..dims));
        if cand.entries().iter().any(|&(_, l)| l > max_level) || members.contains(&cand) {
            continue;
        }
        if cand.backward_neighbors().all(|b| members.contains(&b)) {
            members.push(cand);
        }
    }
    IndexSet::from_indices(members).unwrap()
}

/// Smooth function of the first 16 coordinates; missing coordinates are zero.
fn test_function(y: &ParamVector) -> f64 {
    let at = |i: usize| y.get(i).copied().unwrap_or(0.0);
    (0..16)
        .map(|i| (0.4 * at(i) + 0.2 * i as f64).cos() / (1.0 + i as f64))
        .sum::<f64>()
        + (-0.03 * (0..16).map(|i| at(i) * at(i)).sum::<f64>()).exp()
}

/// Tensor interpolant of `u` on the given per-dimension levels, by direct
/// nested one-dimensional interpolation.
fn tensor_interp(fam: &NodeFamily1D, levels: &[(usize, u32)], z: &[f64], y: &mut Vec<f64>) -> f64 {
    match levels.split_first() {
        None => test_function(&ParamVector::new(y.clone())),
        Some((&(d, l), rest)) => {
            let nodes = fam.make_nodes(l).unwrap();
            let values: Vec<f64> = nodes
                .all()
                .iter()
                .map(|&x| {
                    y[d] = x;
                    tensor_interp(fam, rest, z, y)
                })
                .collect();
            y[d] = 0.0;
            interpolate_1d(&nodes, &values, z[d]).unwrap()
        }
    }
}

fn surplus(fam: &NodeFamily1D, nu: &MultiIndex, z: &[f64]) -> f64 {
    let e = nu.entries();
    (0u32..1 << e.len())
        .map(|mask| {
            let mut sign = 1.0;
            let mut levels = Vec::new();
            for (k, &(d, l)) in e.iter().enumerate() {
                if mask & (1 << k) != 0 {
                    sign = -sign;
                    if l > 1 {
                        levels.push((d, l - 1));
                    }
                } else {
                    levels.push((d, l));
                }
            }
            sign * tensor_interp(fam, &levels, z, &mut vec![0.0; z.len()])
        })
        .sum()
}

/// Every downward-closed set inside `{0..=max_level}^dims`.
fn all_downward_closed(dims: usize, max_level: u32) -> Vec<Vec<MultiIndex>> {
    let mut boxes: Vec<MultiIndex> = Vec::new();
    let total = (max_level as usize + 1).pow(dims as u32);
    for code in 0..total {
        let mut c = code;
        let levels: Vec<u32> = (0..dims)
            .map(|_| {
                let l = (c % (max_level as usize + 1)) as u32;
                c /= max_level as usize + 1;
                l
            })
            .collect();
        boxes.push(MultiIndex::from_dense(&levels));
    }
    boxes.sort_by_key(|nu| nu.l1());
    let mut out = Vec::new();
    fn rec(
        boxes: &[MultiIndex],
        k: usize,
        chosen: &mut Vec<MultiIndex>,
        out: &mut Vec<Vec<MultiIndex>>,
    ) {
        if k == boxes.len() {
            out.push(chosen.clone());
            return;
        }
        let nu = &boxes[k];
        if nu.is_zero() || nu.backward_neighbors().all(|b| chosen.contains(&b)) {
            chosen.push(nu.clone());
            rec(boxes, k + 1, chosen, out);
            chosen.pop();
        }
        if !nu.is_zero() {
            rec(boxes, k + 1, chosen, out);
        }
    }
    rec(&boxes, 0, &mut Vec::new(), &mut out);
    out
}

fn interpolation_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_nodes: f64 = 0.0;
    for k in 0..50 {
        let p = 2 + (k % 2) as u32;
        let set = random_set(&mut rng, 16, 3, 40);
        let fam = family(p);
        let grid = SparseGrid::new(set, fam).unwrap();
        let interp = SparseGridInterpolant::from_fn(grid.clone(), test_function);
        for (point, v) in grid.points().iter().zip(interp.samples()) {
            let y = point.to_param(&fam, grid.dims());
            worst_nodes = worst_nodes.max((interp.evaluate(&y) - v).abs());
        }
    }

    let fam = family(2);
    let sets = all_downward_closed(3, 2);
    let zs: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..3).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let boxes: Vec<MultiIndex> = IndexSet::tensor(&[2, 2, 2]).iter().cloned().collect();
    let surpluses: Vec<Vec<f64>> = zs
        .iter()
        .map(|z| boxes.iter().map(|nu| surplus(&fam, nu, z)).collect())
        .collect();
    let mut worst_brute: f64 = 0.0;
    for members in &sets {
        let grid = SparseGrid::new(IndexSet::from_indices(members.clone()).unwrap(), fam).unwrap();
        let interp = SparseGridInterpolant::from_fn(grid, test_function);
        for (z, s) in zs.iter().zip(&surpluses) {
            let direct: f64 = members
                .iter()
                .map(|nu| s[boxes.iter().position(|b| b == nu).unwrap()])
                .sum();
            worst_brute = worst_brute.max((interp.evaluate(z) - direct).abs());
        }
    }
    verdict(
        worst_nodes <= 1e-12 && worst_brute <= 1e-10,
        format!(
            "grid-point deviation {worst_nodes:.1e} over 50 sets; combination vs surplus {worst_brute:.1e} over {} sets",
            sets.len()
        ),
    )
}

fn weighted_rate() -> Verdict {
    let u = |t: f64| (-t * t / 8.0).exp();
    let n = 10_000;
    let h = 16.0 / n as f64;
    let quad: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let t = -8.0 + (i as f64 + 0.5) * h;
            (
                t,
                h * (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            )
        })
        .collect();
    let mut ok = true;
    let mut detail = Vec::new();
    for p in [2u32, 3] {
        let fam = family(p);
        let errors: Vec<(f64, f64)> = (2..=6)
            .map(|level| {
                let nodes = fam.make_nodes(level).unwrap();
                let values: Vec<f64> = nodes.all().iter().map(|&x| u(x)).collect();
                let e2: f64 = quad
                    .iter()
                    .map(|&(t, w)| w * (u(t) - interpolate_1d(&nodes, &values, t).unwrap()).powi(2))
                    .sum();
                ((1u64 << (level + 1)) as f64, e2.sqrt())
            })
            .collect();
        let order = -fit_power_law(&errors).unwrap().exponent;
        ok &= order >= p as f64 - 0.25;
        detail.push(format!("p={p} order {order:.3}"));
    }
    verdict(ok, detail.join(", "))
}

fn llg_invariants() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, steps) = (8, 64);
    let noisy = LlgProblem::new(
        n,
        steps,
        NoiseCoefficient::example(),
        InitialCondition::Constant { m: [0.0, 0.0, 1.0] },
    );
    let mut modulus: f64 = 0.0;
    let mut decay = true;
    let mut fixed: f64 = 0.0;
    for _ in 0..20 {
        let y: Vec<f64> = (0..16)
            .map(|_| rng.sample(rand_distr::StandardNormal))
            .collect();
        let path = noisy.sample_path(&y).unwrap();
        modulus = (0..=steps)
            .map(|k| path.modulus_error(k))
            .fold(modulus, f64::max);

        let c: [f64; 3] = [y[0], y[1], y[2]];
        let base = LlgProblem::new(
            n,
            steps,
            NoiseCoefficient::example(),
            InitialCondition::NoiseField,
        );
        let field: Vec<[f64; 3]> = base
            .initial()
            .iter()
            .map(|m| {
                let v = [m[0] + 0.3 * c[0], m[1] + 0.3 * c[1], m[2] + 0.3 * c[2]];
                let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                [v[0] / r, v[1] / r, v[2] / r]
            })
            .collect();
        let det = LlgProblem::new(
            n,
            steps,
            NoiseCoefficient::zero(),
            InitialCondition::Constant { m: [0.0, 0.0, 1.0] },
        )
        .with_initial_field(field);
        let path = det.sample_path(&y).unwrap();
        let energies: Vec<f64> = (0..=steps).map(|k| det.energy(path.field(k))).collect();
        decay &= energies.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));

        let norm = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        let m0 = [c[0] / norm, c[1] / norm, c[2] / norm];
        let constant = LlgProblem::new(
            n,
            steps,
            NoiseCoefficient::zero(),
            InitialCondition::Constant { m: m0 },
        );
        let path = constant.sample_path(&y).unwrap();
        for m in path.data() {
            fixed = fixed.max((0..3).map(|i| (m[i] - m0[i]).abs()).fold(0.0, f64::max));
        }
    }
    verdict(
        modulus <= 1e-12 && decay && fixed <= 1e-15,
        format!("max ||m|-1| {modulus:.1e}, energy non-increasing {decay}, constant-state drift {fixed:.1e}"),
    )
}

fn sg_study(profit: ProfitParams) -> SgStudy {
    SgStudy {
        profit,
        sigma2: 5.0,
        disc: Discretization::new(16, 64),
        max_points: 200,
        mc_samples: 128,
        mc_dims: 128,
        seed: 1,
        spec: ProblemSpec::sg_experiment(),
    }
}

fn sg_csv(rows: &[SgRow]) -> String {
    let mut s = format!("{SG_CSV_HEADER}\n");
    for r in rows {
        s.push_str(&r.csv());
        s.push('\n');
    }
    s
}

fn sg_slope(rows: &[SgRow]) -> f64 {
    fit_power_law(
        &rows
            .iter()
            .map(|r| (r.points as f64, r.error))
            .collect::<Vec<_>>(),
    )
    .unwrap()
    .exponent
}

fn ml_study() -> MlStudy {
    MlStudy {
        k_max: 3,
        profit: ProfitParams::improved(2),
        sigma2: 5.0,
        constants: Some(MlConstants::default()),
        pilot_points: 40,
        cap: None,
        reference: Discretization::new(32, 128),
        mc_samples: 32,
        mc_dims: 128,
        seed: 1,
        spec: ProblemSpec::ml_experiment(),
    }
}

fn run_cli(args: &[&str], out: &Path) -> String {
    let status = Command::new(env!("CARGO_BIN_EXE_sllg"))
        .args(args)
        .arg("--out")
        .arg(out)
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success(), "sllg {args:?} failed");
    std::fs::read_to_string(out.join(if args[0] == "conv-sg" {
        "conv_sg.csv"
    } else {
        "conv_ml.csv"
    }))
    .unwrap()
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |id: u32, name: &str, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let v = f();
        all &= v.pass;
        println!(
            "criterion {id} [{}] {name}: {} ({:.1}s)",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    };

    report(1, "node reproduction", &mut node_values);
    report(2, "multilevel sizing table", &mut sizing_table);
    report(3, "interpolation property suite", &mut interpolation_suite);
    report(4, "one-dimensional weighted rate", &mut weighted_rate);
    report(5, "LLG invariants", &mut llg_invariants);

    let mut sg_csv_first = String::new();
    report(6, "sparse-grid convergence", &mut || {
        let improved = sg_study(ProfitParams::improved(2)).run().unwrap();
        let basic = sg_study(ProfitParams::basic(2)).run().unwrap();
        let (si, sb) = (sg_slope(&improved), sg_slope(&basic));
        sg_csv_first = sg_csv(&improved);
        verdict(
            (-0.65..=-0.35).contains(&si) && sb - si >= 0.1,
            format!(
                "improved slope {si:.3}, basic slope {sb:.3}, Q up to {}",
                improved.last().unwrap().points
            ),
        )
    });

    let mut ml_csv_first = String::new();
    report(7, "single- vs multi-level", &mut || {
        let outcome = ml_study().run().unwrap();
        let (sl, ml) = (
            outcome.single_slope().unwrap(),
            outcome.multi_slope().unwrap(),
        );
        ml_csv_first = format!("{ML_CSV_HEADER}\n");
        for r in outcome.single.iter().chain(&outcome.multi) {
            ml_csv_first.push_str(&r.csv());
            ml_csv_first.push('\n');
        }
        verdict(
            sl - ml >= 0.05 && (sl + 0.2).abs() <= 0.1 && (ml + 1.0 / 3.0).abs() <= 0.1,
            format!(
                "single slope {sl:.3}, multi slope {ml:.3}, separation {:.3}",
                sl - ml
            ),
        )
    });

    report(8, "reproducibility", &mut || {
        let dir = tempfile::tempdir().unwrap();
        let sg = run_cli(
            &["conv-sg", "--seed", "1", "--budget", "200", "--mc", "128"],
            &dir.path().join("sg"),
        );
        let ml = run_cli(
            &["conv-ml", "--seed", "1", "--levels", "3", "--mc", "32"],
            &dir.path().join("ml"),
        );
        let (a, b) = (sg == sg_csv_first, ml == ml_csv_first);
        verdict(
            a && b,
            format!("sparse-grid CSV identical {a}, multilevel CSV identical {b}"),
        )
    });

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
