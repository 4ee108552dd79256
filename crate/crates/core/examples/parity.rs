//! Trains XOR-capable trees on parity and prints the final metrics per seed.
//!
//! Usage: `parity <k> <mode> <seeds> <steps> [lr] [tau_group] [sigma]`

use warplut_core::data::make_parity_dataset;
use warplut_core::layers::{GroupSumLayer, InitScheme, NodeKind, Shape, Wiring};
use warplut_core::network::LayerSpec;
use warplut_core::train::{run_training, NullSink};
use warplut_core::{Network, NetworkSpec, RelaxMode, TrainConfig};

fn tree_spec(k: usize, seed: u64, sigma: f64) -> NetworkSpec {
    // pairwise XOR levels, each duplicated so the readout gets two groups
    let mut layers = Vec::new();
    let mut width = k;
    while width > 1 {
        let pairs = width / 2;
        let odd = width % 2 == 1;
        let mut rows: Vec<Vec<u32>> = (0..pairs).map(|p| vec![2 * p as u32, 2 * p as u32 + 1]).collect();
        if odd {
            rows.push(vec![width as u32 - 1, 0]);
        }
        let n = rows.len();
        let mut all = rows.clone();
        all.extend(rows);
        layers.push(LayerSpec::Dense {
            nodes: 2 * n,
            arity: 2,
            node: NodeKind::Warp,
            wiring: Wiring::Explicit(all),
            init: InitScheme::random(sigma),
            seed: None,
        });
        width = n;
    }
    layers.push(LayerSpec::Dense {
        nodes: 2,
        arity: 2,
        node: NodeKind::Warp,
        wiring: Wiring::Explicit(vec![vec![0, 1], vec![0, 1]]),
        init: InitScheme::random(sigma),
        seed: None,
    });
    NetworkSpec {
        input: Shape::flat(k),
        seed,
        layers,
        group_sum: GroupSumLayer::new(2, 1.0).unwrap(),
    }
}

fn wide_spec(k: usize, seed: u64, sigma: f64, width: usize, depth: usize) -> NetworkSpec {
    let layers = (0..depth)
        .map(|_| LayerSpec::dense(width, 2, NodeKind::Warp, InitScheme::random(sigma)))
        .collect();
    NetworkSpec {
        input: Shape::flat(k),
        seed,
        layers,
        group_sum: GroupSumLayer::new(2, 1.0).unwrap(),
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let k: usize = args[1].parse().unwrap();
    let mode = match args[2].as_str() {
        "gumbel" => RelaxMode::GumbelSigmoid,
        "ste" => RelaxMode::StraightThrough,
        _ => RelaxMode::Deterministic,
    };
    let seeds: u64 = args[3].parse().unwrap();
    let steps: u64 = args[4].parse().unwrap();
    let lr: f64 = args.get(5).map_or(0.05, |s| s.parse().unwrap());
    let tau_g: f64 = args.get(6).map_or(1.0, |s| s.parse().unwrap());
    let sigma: f64 = args.get(7).map_or(1.0, |s| s.parse().unwrap());
    let data = make_parity_dataset(k).unwrap();
    let mut solved = 0;
    let mut gap_sum = 0.0;
    let t0 = std::time::Instant::now();
    for seed in 0..seeds {
        let spec = match std::env::var("WIDE") {
            Ok(v) => {
                let (w, d) = v.split_once('x').unwrap();
                wide_spec(k, seed, sigma, w.parse().unwrap(), d.parse().unwrap())
            }
            Err(_) => tree_spec(k, seed, sigma),
        };
        let mut net = Network::build(&spec).unwrap();
        let mut cfg = TrainConfig::new(steps, data.len());
        cfg.learning_rate = lr;
        cfg.mode = mode;
        cfg.seed = seed;
        cfg.tau_group = Some(tau_g);
        let recs = run_training(&mut net, &data, &data, &cfg, &mut NullSink).unwrap();
        let last = recs.last().unwrap();
        let first_solved = recs.iter().find(|r| r.val_acc_discrete == 1.0).map(|r| r.step);
        if last.val_acc_discrete == 1.0 && last.discretization_gap == 0.0 {
            solved += 1;
        }
        gap_sum += last.discretization_gap;
        println!(
            "seed {seed}: loss {:.4} relaxed {:.4} discrete {:.4} gap {:+.4} first_solved {:?}",
            last.train_loss, last.val_acc_relaxed, last.val_acc_discrete, last.discretization_gap, first_solved
        );
    }
    println!("solved {solved}/{seeds} mean gap {:+.4} in {:?}", gap_sum / seeds as f64, t0.elapsed());
}
