use kquad_core::greedy::{greedy_quadrature, GreedyVariant};
use kquad_core::kernels::{KernelChoice, KernelSpec};
use kquad_core::quadrature::{compress, mmd, worst_case_error, QuadratureRule, TargetMeasure, WeightedPoints};
use kquad_core::rng::stream;
use kquad_core::sampling::{SamplerConfig, Strategy};
use kquad_core::{Dataset, Points};
use rand::Rng;

fn cloud(seed: u64, n: usize, d: usize) -> Dataset {
    let mut rng = stream(seed);
    Dataset::new(Points::new((0..n * d).map(|_| rng.random::<f64>()).collect(), d).unwrap(), "cloud")
}

#[test]
fn every_sampler_beats_equal_weights_on_its_nodes() {
    let data = cloud(1, 300, 2);
    let kernel = KernelSpec::gaussian(0.3).unwrap();
    let target = TargetMeasure::empirical(data.points.clone()).unwrap();
    for strategy in [Strategy::UniformWithoutReplacement, Strategy::UniformWithReplacement, Strategy::Arls] {
        let c = compress(&data, &kernel, &SamplerConfig::new(strategy, 20, 5)).unwrap();
        let optimal = worst_case_error(&c.rule, &target, &kernel).unwrap();
        let flat = QuadratureRule::new(c.rule.nodes.clone(), vec![1.0 / 20.0; 20]).unwrap();
        let flat = worst_case_error(&flat, &target, &kernel).unwrap();
        assert!(optimal <= flat + 1e-12, "{strategy}: {optimal} > {flat}");
        assert_eq!(c.rule.source.as_ref().unwrap().len(), 20);
    }
}

#[test]
fn worst_case_error_is_the_mmd_to_the_data() {
    let data = cloud(2, 120, 3);
    let kernel = KernelSpec::laplacian(0.8).unwrap();
    let c = compress(&data, &kernel, &SamplerConfig::parse("arls:pilot=30", 15, 9).unwrap()).unwrap();
    let target = TargetMeasure::empirical(data.points.clone()).unwrap();
    let e = worst_case_error(&c.rule, &target, &kernel).unwrap();
    let full = WeightedPoints::new(data.points.clone(), vec![1.0 / 120.0; 120]).unwrap();
    let rule = WeightedPoints::new(c.rule.nodes.clone(), c.rule.weights.clone()).unwrap();
    assert!((e - mmd(&full, &rule, &kernel).unwrap()).abs() < 1e-9);
}

#[test]
fn errors_shrink_with_more_nodes() {
    let data = cloud(3, 400, 1);
    let kernel = KernelChoice::Sobolev { order: 2, dim: 1 }.resolve(&data.points, 100, &mut stream(0)).unwrap();
    let target = TargetMeasure::UniformUnitCube { dim: 1 };
    let mut last = f64::INFINITY;
    for m in [4, 8, 16, 32, 64] {
        let g = greedy_quadrature(&data, &kernel, m, GreedyVariant::P).unwrap();
        let rule = kquad_core::quadrature::optimal_weights(&kernel, &g.rule.nodes, &target).unwrap();
        let e = worst_case_error(&rule, &target, &kernel).unwrap();
        assert!(e < last, "m={m}: {e} >= {last}");
        last = e;
    }
}

#[test]
fn rule_csv_survives_a_file_round_trip() {
    let data = cloud(4, 50, 2);
    let kernel = KernelSpec::gaussian(0.5).unwrap();
    let c = compress(&data, &kernel, &SamplerConfig::new(Strategy::UniformWithoutReplacement, 7, 1)).unwrap();
    let mut buf = Vec::new();
    c.rule.write_csv(&mut buf).unwrap();
    let back = QuadratureRule::read_csv(std::io::Cursor::new(buf)).unwrap();
    assert_eq!(back.weights, c.rule.weights);
    assert_eq!(back.nodes.as_slice(), c.rule.nodes.as_slice());
}
