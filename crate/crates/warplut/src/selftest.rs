//! Embedded invariant suite behind `warplut selftest`.

use rand::Rng;
use serde::Serialize;
use warplut_core::boolean::{gate_catalog, nearest_truth_table, walsh_transform};
use warplut_core::layers::{GroupSumLayer, InitScheme, NodeKind, Shape};
use warplut_core::network::LayerSpec;
use warplut_core::relax::{gumbel_noise, node_backward, node_forward};
use warplut_core::rng::stream;
use warplut_core::{Network, NetworkSpec, RelaxMode, RelaxParams, TruthTable, WalshCoeffs};

use crate::commands::netlist_matches_model;

/// Largest accepted relative error of analytic against central-difference
/// gradients.
pub const GRAD_TOLERANCE: f64 = 1e-4;
/// Step of the central differences.
pub const FD_STEP: f64 = 1e-5;
/// Accepted deviation of the sampled Gumbel marginal from `σ(l)`.
pub const MARGINAL_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Default)]
pub struct SelftestOptions {
    /// Test hook: perturb one catalog row before checking it.
    pub corrupt_catalog: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn catalog_round_trip(opts: &SelftestOptions) -> Check {
    let mut bad = Vec::new();
    for (i, e) in gate_catalog().iter().enumerate() {
        let mut coeffs = e.coeffs();
        if opts.corrupt_catalog && i == 4 {
            coeffs.values_mut()[3] = -coeffs.values()[3];
        }
        let ok = walsh_transform(&e.table()) == coeffs && nearest_truth_table(&coeffs) == e.table();
        if !ok {
            bad.push(e.name);
        }
    }
    Check {
        name: "catalog round trip",
        passed: bad.is_empty(),
        detail: if bad.is_empty() {
            "16/16 gates".into()
        } else {
            format!("mismatch: {}", bad.join(", "))
        },
    }
}

fn table_round_trip() -> Check {
    let mut rng = stream(0x5e1f, 0);
    let mut failures = 0;
    let mut total = 0;
    for bits in 0..256 {
        let t = TruthTable::from_bits(3, bits).expect("arity 3");
        total += 1;
        failures += (nearest_truth_table(&walsh_transform(&t)) != t) as usize;
    }
    for n in 4..=6 {
        for _ in 0..200 {
            let mask = if n == 6 { u64::MAX } else { (1u64 << (1 << n)) - 1 };
            let t = TruthTable::from_bits(n, rng.random::<u64>() & mask).expect("valid arity");
            total += 1;
            failures += (nearest_truth_table(&walsh_transform(&t)) != t) as usize;
        }
    }
    Check {
        name: "transform round trip",
        passed: failures == 0,
        detail: format!("{}/{} tables", total - failures, total),
    }
}

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Worst relative error of node gradients over `cases` random cases.
pub fn gradient_max_error(cases: usize, seed: u64) -> f64 {
    let mut rng = stream(seed, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let n = rng.random_range(2..=4usize);
        let coeffs: Vec<f64> = (0..1 << n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..0.99)).collect();
        let params = RelaxParams::with_tau(rng.random_range(0.1..5.0));
        let c = WalshCoeffs::new(coeffs.clone()).expect("power of two");
        let f = |c: &[f64], x: &[f64]| {
            let w = WalshCoeffs::new(c.to_vec()).expect("power of two");
            node_forward(&w, x, RelaxMode::Deterministic, &params, &mut stream(0, 0))
                .expect("dims")
                .value
        };
        let g = node_backward(&c, &x, 1.0, RelaxMode::Deterministic, &params, None).expect("dims");
        for t in 0..coeffs.len() {
            let (mut p, mut m) = (coeffs.clone(), coeffs.clone());
            p[t] += FD_STEP;
            m[t] -= FD_STEP;
            let fd = (f(&p, &x) - f(&m, &x)) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(g.grad_coeffs[t], fd));
        }
        for j in 0..n {
            let (mut p, mut m) = (x.clone(), x.clone());
            p[j] += FD_STEP;
            m[j] -= FD_STEP;
            let fd = (f(&coeffs, &p) - f(&coeffs, &m)) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(g.grad_x[j], fd));
        }
    }
    worst
}

fn gradient_suite() -> Check {
    let worst = gradient_max_error(1000, 0x9ad);
    Check {
        name: "gradient suite",
        passed: worst < GRAD_TOLERANCE,
        detail: format!("max relative error {worst:.2e} over 1000 cases"),
    }
}

/// Largest `|P(σ(l + g) ≥ 0.5) − σ(l)|` over `l ∈ {−2, …, 2}`.
pub fn gumbel_marginal_error(samples: usize, seed: u64) -> f64 {
    let mut rng = stream(seed, 0);
    let mut worst: f64 = 0.0;
    for l in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        let hits = (0..samples).filter(|_| l + gumbel_noise(&mut rng) >= 0.0).count();
        let expected = 1.0 / (1.0 + f64::exp(-l));
        worst = worst.max((hits as f64 / samples as f64 - expected).abs());
    }
    worst
}

fn gumbel_marginals() -> Check {
    let worst = gumbel_marginal_error(100_000, 0x6b);
    Check {
        name: "gumbel marginals",
        passed: worst <= MARGINAL_TOLERANCE,
        detail: format!("max deviation {worst:.4} at 1e5 samples"),
    }
}

fn small_models() -> Vec<NetworkSpec> {
    let dense = NetworkSpec {
        input: Shape::flat(12),
        seed: 3,
        layers: vec![
            LayerSpec::dense(24, 2, NodeKind::Warp, InitScheme::random(1.0)),
            LayerSpec::dense(16, 3, NodeKind::Warp, InitScheme::random(1.0)),
            LayerSpec::dense(8, 2, NodeKind::Dlgn, InitScheme::random(1.0)),
        ],
        group_sum: GroupSumLayer::new(4, 1.0).expect("valid"),
    };
    let conv = NetworkSpec {
        input: Shape::image(2, 4, 4),
        seed: 4,
        layers: vec![
            LayerSpec::Conv {
                out_channels: 3,
                depth: 2,
                node: NodeKind::Warp,
                init: InitScheme::random(1.0),
                seed: None,
            },
            LayerSpec::Flatten,
            LayerSpec::dense(6, 2, NodeKind::Warp, InitScheme::random(1.0)),
        ],
        group_sum: GroupSumLayer::new(2, 1.0).expect("valid"),
    };
    vec![dense, conv]
}

fn netlist_equivalence() -> Check {
    let mut rng = stream(0xe9, 0);
    let mut ok = 0;
    let models = small_models();
    for spec in &models {
        let net = Network::build(spec).expect("valid spec");
        let xs: Vec<Vec<u8>> = (0..300)
            .map(|_| (0..net.input_dim()).map(|_| rng.random::<bool>() as u8).collect())
            .collect();
        let refs: Vec<&[u8]> = xs.iter().map(Vec::as_slice).collect();
        ok += netlist_matches_model(&net, &refs) as usize;
    }
    Check {
        name: "netlist equivalence",
        passed: ok == models.len(),
        detail: format!("{ok}/{} models exact on 300 inputs", models.len()),
    }
}

pub fn run_selftest(opts: &SelftestOptions) -> Vec<Check> {
    vec![
        catalog_round_trip(opts),
        table_round_trip(),
        gradient_suite(),
        gumbel_marginals(),
        netlist_equivalence(),
    ]
}

pub fn format_table(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    checks
        .iter()
        .map(|c| {
            format!(
                "{:<width$}  {}  {}\n",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.detail
            )
        })
        .collect()
}
