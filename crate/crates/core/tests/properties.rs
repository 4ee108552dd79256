use proptest::prelude::*;
use rand::Rng;
use warplut_core::boolean::{corner_logits, nearest_truth_table, signed_truth_vector, walsh_transform};
use warplut_core::data::{split_train_val, Dataset, EncoderSpec};
use warplut_core::layers::{GroupSumLayer, InitScheme, NodeKind, Shape};
use warplut_core::netlist::{harden, pack_examples};
use warplut_core::network::LayerSpec;
use warplut_core::relax::relaxed_logit;
use warplut_core::rng::stream;
use warplut_core::train::{evaluate, EvalMode};
use warplut_core::{Network, NetworkSpec, RelaxParams, TruthTable, WalshCoeffs};

fn table() -> impl Strategy<Value = TruthTable> {
    (1usize..=6, any::<u64>()).prop_map(|(n, bits)| {
        let size = 1u32 << n;
        let mask = if size == 64 { u64::MAX } else { (1u64 << size) - 1 };
        TruthTable::from_bits(n, bits & mask).unwrap()
    })
}

fn coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 1 << n)
}

proptest! {
    #[test]
    fn transform_then_project_is_identity(t in table()) {
        prop_assert_eq!(nearest_truth_table(&walsh_transform(&t)), t);
    }

    #[test]
    fn corner_logits_invert_the_transform(t in table()) {
        prop_assert_eq!(corner_logits(walsh_transform(&t).values()), signed_truth_vector(&t));
    }

    #[test]
    fn projection_ignores_positive_scale(c in coeffs(3), k in 0.01f64..100.0) {
        let w = WalshCoeffs::new(c).unwrap();
        prop_assert_eq!(nearest_truth_table(&w), nearest_truth_table(&w.scaled(k)));
    }

    // The relaxed logit is the multilinear extension of the corner logits.
    #[test]
    fn relaxed_logit_is_multilinear(c in coeffs(3), x in prop::collection::vec(0.0f64..1.0, 3), j in 0usize..3) {
        let w = WalshCoeffs::new(c.clone()).unwrap();
        let corners = corner_logits(&c);
        for (k, &v) in corners.iter().enumerate() {
            let xs: Vec<f64> = (0..3).map(|i| ((k >> (2 - i)) & 1) as f64).collect();
            prop_assert!((relaxed_logit(&w, &xs).unwrap() - v).abs() < 1e-12);
        }
        let (mut lo, mut hi, mut mid) = (x.clone(), x.clone(), x.clone());
        lo[j] = 0.0;
        hi[j] = 1.0;
        mid[j] = 0.5;
        let f = |v: &[f64]| relaxed_logit(&w, v).unwrap();
        prop_assert!((f(&mid) - 0.5 * (f(&lo) + f(&hi))).abs() < 1e-12);
        let expected = f(&lo) + x[j] * (f(&hi) - f(&lo));
        prop_assert!((f(&x) - expected).abs() < 1e-12);
    }

    #[test]
    fn thermometer_code_is_monotone(p in 0.0f64..1.0, q in 0.0f64..1.0, bits in 1usize..8) {
        let spec = EncoderSpec::uniform(bits);
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        for (a, b) in spec.encode_value(lo).zip(spec.encode_value(hi)) {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn split_is_a_partition(n in 2usize..200, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let inputs: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let labels: Vec<u32> = (0..n as u32).collect();
        let ds = Dataset::new(Shape::flat(1), inputs, labels, n).unwrap();
        let (a, b) = split_train_val(&ds, frac, seed).unwrap();
        prop_assert_eq!(a.len() + b.len(), n);
        let mut all: Vec<u32> = a.labels().iter().chain(b.labels()).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n as u32).collect::<Vec<_>>());
    }
}

fn random_dense(seed: u64, arity: usize) -> Network {
    Network::build(&NetworkSpec {
        input: Shape::flat(10),
        seed,
        layers: vec![
            LayerSpec::dense(20, arity, NodeKind::Warp, InitScheme::random(1.0)),
            LayerSpec::dense(12, 2, NodeKind::Dlgn, InitScheme::random(1.0)),
        ],
        group_sum: GroupSumLayer::new(3, 1.0).unwrap(),
    })
    .unwrap()
}

fn random_bits(n: usize, dim: usize, seed: u64) -> Vec<Vec<u8>> {
    let mut rng = stream(seed, 9);
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random::<bool>() as u8).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn netlist_matches_discrete_forward(seed in any::<u64>(), arity in 2usize..=4) {
        let net = random_dense(seed, arity);
        let hard = net.harden();
        let netlist = harden(&net);
        let xs = random_bits(100, 10, seed);
        let refs: Vec<&[u8]> = xs.iter().map(Vec::as_slice).collect();
        let counts = netlist.class_counts(&pack_examples::<u64>(&refs, 10), refs.len()).unwrap();
        for (x, c) in xs.iter().zip(&counts) {
            prop_assert_eq!(&net.discrete_counts(&hard, x), c);
        }
    }

    // Word width and example order do not change per-example results.
    #[test]
    fn packing_is_transparent(seed in any::<u64>(), rot in 0usize..77) {
        let netlist = harden(&random_dense(seed, 2));
        let xs = random_bits(77, 10, seed ^ 1);
        let refs: Vec<&[u8]> = xs.iter().map(Vec::as_slice).collect();
        let wide = netlist.class_counts(&pack_examples::<u128>(&refs, 10), 77).unwrap();
        let narrow = netlist.class_counts(&pack_examples::<u8>(&refs, 10), 77).unwrap();
        prop_assert_eq!(&wide, &narrow);
        let mut rotated = refs.clone();
        rotated.rotate_left(rot);
        let r = netlist.class_counts(&pack_examples::<u32>(&rotated, 10), 77).unwrap();
        for (i, c) in r.iter().enumerate() {
            prop_assert_eq!(c, &wide[(i + rot) % 77]);
        }
    }
}

#[test]
fn discrete_accuracy_ignores_group_temperature() {
    let xs = random_bits(300, 10, 4);
    let labels = (0..300).map(|i| (i % 3) as u32).collect();
    let ds = Dataset::new(Shape::flat(10), xs.concat(), labels, 3).unwrap();
    let mut net = random_dense(11, 2);
    let relax = RelaxParams::default();
    let a = evaluate(&net, &ds, EvalMode::Discrete, &relax).unwrap();
    for tau in [0.01, 3.0, 1e4] {
        net.set_group_tau(tau);
        assert_eq!(evaluate(&net, &ds, EvalMode::Discrete, &relax).unwrap(), a);
    }
}
