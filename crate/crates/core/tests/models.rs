use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use samlab::autodiff::Array;
use samlab::data::Batch;
use samlab::grouping::{Granularity, GroupPartition};
use samlab::model::{build_mlp, loss, loss_and_grad, per_sample_gradients, perturbed_loss, Model, RnnLmModel};
use samlab::params::ParamVector;

fn random_batch(n: usize, dim: usize, classes: usize, seed: u64) -> Batch<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Batch::Dense {
        x: Array::matrix(n, dim, (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap(),
        labels: (0..n).map(|_| rng.gen_range(0..classes)).collect(),
    }
}

fn rows(batch: &Batch<f64>, order: &[usize]) -> Batch<f64> {
    let Batch::Dense { x, labels } = batch else { unreachable!() };
    let c = x.shape()[1];
    let data = order.iter().flat_map(|&i| x.data()[i * c..(i + 1) * c].to_vec()).collect();
    Batch::Dense {
        x: Array::matrix(order.len(), c, data).unwrap(),
        labels: order.iter().map(|&i| labels[i]).collect(),
    }
}

#[test]
fn per_sample_singleton_matches_backward() {
    let (model, params) = build_mlp::<f64>(&[4, 6, 3], 1).unwrap();
    let b = random_batch(1, 4, 3, 2);
    let per = per_sample_gradients(&model, &params, &b).unwrap();
    let (_, g) = loss_and_grad(&model, &params, &b).unwrap();
    assert_eq!(per, vec![g]);
}

#[test]
fn identical_instances_identical_gradients() {
    let (model, params) = build_mlp::<f64>(&[4, 6, 3], 1).unwrap();
    let b = rows(&random_batch(1, 4, 3, 2), &[0, 0]);
    let per = per_sample_gradients(&model, &params, &b).unwrap();
    assert_eq!(per[0], per[1]);
}

#[test]
fn per_sample_mean_matches_batch_backward() {
    let (model, params) = build_mlp::<f64>(&[4, 6, 3], 3).unwrap();
    let b = random_batch(5, 4, 3, 7);
    let per = per_sample_gradients(&model, &params, &b).unwrap();
    let mean = ParamVector::mean_of(&per).unwrap();
    let (_, g) = loss_and_grad(&model, &params, &b).unwrap();
    for (x, y) in mean.as_slice().iter().zip(g.as_slice()) {
        assert!((x - y).abs() < 1e-10);
    }
    let empty = Batch::Dense { x: Array::zeros(&[0, 4]), labels: vec![] };
    assert!(per_sample_gradients(&model, &params, &empty).is_err());
}

#[test]
fn three_layer_mlp_matches_central_differences() {
    let (model, params) = build_mlp::<f64>(&[5, 7, 6, 3], 11).unwrap();
    let b = random_batch(6, 5, 3, 12);
    let (_, g) = loss_and_grad(&model, &params, &b).unwrap();
    let h = 1e-5;
    for i in 0..params.len() {
        let mut e = ParamVector::zeros(params.layout().clone());
        e.as_mut_slice()[i] = h;
        let up = perturbed_loss(&model, &params, &e, &b).unwrap().value;
        let down = perturbed_loss(&model, &params, &e.scaled(-1.0), &b).unwrap().value;
        let fd = (up - down) / (2.0 * h);
        let an = g.as_slice()[i];
        let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
        assert!(rel < 1e-5, "coordinate {i}: {fd} vs {an}");
    }
}

#[test]
fn loss_is_invariant_to_batch_order() {
    let (model, params) = build_mlp::<f64>(&[4, 8, 3], 5).unwrap();
    let b = random_batch(9, 4, 3, 4);
    let perm = [3, 1, 8, 0, 2, 7, 5, 4, 6];
    let a = loss(&model, &params, &b).unwrap().value;
    let c = loss(&model, &params, &rows(&b, &perm)).unwrap().value;
    assert!((a - c).abs() < 1e-12);
}

#[test]
fn parameter_count_identity() {
    let (mlp, _) = build_mlp::<f64>(&[784, 100, 100, 10], 0).unwrap();
    let rnn = RnnLmModel::new(30, 8, 16, false).unwrap();
    let layouts = [Model::<f64>::layout(&mlp).clone(), Model::<f64>::layout(&rnn).clone()];
    for layout in layouts {
        for g in [Granularity::Model, Granularity::Layer, Granularity::Element] {
            let part = GroupPartition::new(g, &layout);
            assert_eq!(part.sizes().iter().sum::<usize>(), layout.total());
        }
    }
}

/// Regression guard: the loss of a fixed network on a fixed batch, frozen
/// when the implementation was first validated.
#[test]
fn golden_mlp_loss() {
    let (model, params) = build_mlp::<f64>(&[6, 10, 4], 2024).unwrap();
    let b = random_batch(8, 6, 4, 2025);
    let value = loss(&model, &params, &b).unwrap().value;
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/mlp_loss.txt");
    let text = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file; current value {value:.16e}"));
    let expected: f64 = text.trim().parse().unwrap();
    assert_eq!(value, expected, "golden {expected:.16e}, got {value:.16e}");
}
