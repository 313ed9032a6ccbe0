mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenopt::gp::{largest_eigenvalue, xi_lambda_max_of_gram};
use scenopt::{Domain, Kernel, SurrogateModel};

struct Instance {
    lengthscale: f64,
    eta: f64,
    grid: Vec<Vec<f64>>,
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

fn instance(rng: &mut ChaCha8Rng) -> Instance {
    let dim = rng.gen_range(1..=2);
    let res: Vec<usize> = if dim == 1 {
        vec![rng.gen_range(2..=50)]
    } else {
        vec![rng.gen_range(2..=7), rng.gen_range(2..=7)]
    };
    let bounds = vec![(0.0, 1.0); dim];
    let grid = Domain::grid(&bounds, &res).unwrap().points().to_vec();
    let t = rng.gen_range(0..=20);
    let n_out = rng.gen_range(1..=3);
    let inputs: Vec<Vec<f64>> = (0..t).map(|_| grid[rng.gen_range(0..grid.len())].clone()).collect();
    let targets = (0..t)
        .map(|_| (0..n_out).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    Instance {
        lengthscale: rng.gen_range(0.05..0.8),
        eta: [1e-3, 1e-2, 0.1, 1.0][rng.gen_range(0..4)],
        grid,
        inputs,
        targets,
    }
}

#[test]
fn posterior_matches_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let inst = instance(&mut rng);
        let kernel = Kernel::matern32(inst.lengthscale).unwrap();
        let n_out = inst.targets.first().map_or(1, Vec::len);
        let model = if inst.inputs.is_empty() {
            SurrogateModel::new(kernel, inst.eta, n_out).unwrap()
        } else {
            SurrogateModel::from_data(kernel, inst.eta, inst.inputs.clone(), &inst.targets).unwrap()
        };
        let got = model.posterior_batch(&inst.grid).unwrap();
        let want = common::dense_posterior(&inst.inputs, &inst.targets, &inst.grid, inst.lengthscale, inst.eta);
        for (a, s) in want.std.iter().enumerate() {
            assert!((got.std[a] - s).abs() < 1e-8, "std {} vs {}", got.std[a], s);
        }
        for i in 0..want.mean.len() {
            for a in 0..inst.grid.len() {
                assert!((got.means[i][a] - want.mean[i][a]).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn incremental_updates_match_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..20 {
        let inst = instance(&mut rng);
        let kernel = Kernel::matern32(inst.lengthscale).unwrap();
        let n_out = inst.targets.first().map_or(1, Vec::len);
        let mut model = SurrogateModel::new(kernel, inst.eta, n_out).unwrap();
        for (s, (x, y)) in inst.inputs.iter().zip(&inst.targets).enumerate() {
            model = model.with_observation(x, y).unwrap();
            let got = model.posterior_batch(&inst.grid).unwrap();
            let want = common::dense_posterior(
                &inst.inputs[..=s],
                &inst.targets[..=s],
                &inst.grid,
                inst.lengthscale,
                inst.eta,
            );
            for a in 0..inst.grid.len() {
                assert!((got.std[a] - want.std[a]).abs() < 1e-8);
                assert!((got.means[0][a] - want.mean[0][a]).abs() < 1e-8);
            }
        }
    }
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let r = rng.gen_range(1..=n);
    let b = DMatrix::from_fn(n, r, |_, _| rng.gen_range(-1.0..1.0));
    &b * b.transpose()
}

#[test]
fn lambda_max_matches_eigensolver() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = rng.gen_range(1..=20);
        let k = random_psd(&mut rng, n);
        let eta = [1e-3, 1e-2, 1.0][rng.gen_range(0..3)];
        let got = xi_lambda_max_of_gram(&k, eta).unwrap();
        let want = common::dense_xi_lambda_max(&k, eta);
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
}

#[test]
fn lambda_max_grows_along_histories() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let inst = instance(&mut rng);
        let mut model = SurrogateModel::new(Kernel::matern32(inst.lengthscale).unwrap(), inst.eta, 1).unwrap();
        let mut prev = 0.0;
        for x in &inst.inputs {
            model = model.with_observation(x, &[0.0]).unwrap();
            let l = model.xi_lambda_max().unwrap();
            assert!(l >= prev - 1e-12);
            prev = l;
        }
    }
}

proptest! {
    #[test]
    fn power_iteration_agrees_with_dense(seed in 0u64..10_000, n in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = random_psd(&mut rng, n);
        let dense = nalgebra::SymmetricEigen::new(k.clone()).eigenvalues.max();
        let got = largest_eigenvalue(&k).unwrap();
        prop_assert!((got - dense).abs() <= 1e-9 * dense.max(1.0));
    }

    #[test]
    fn std_never_increases(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = instance(&mut rng);
        let mut model = SurrogateModel::new(Kernel::matern32(inst.lengthscale).unwrap(), inst.eta, 1).unwrap();
        let mut prev = model.posterior_batch(&inst.grid).unwrap().std;
        for x in &inst.inputs {
            model = model.with_observation(x, &[0.0]).unwrap();
            let next = model.posterior_batch(&inst.grid).unwrap().std;
            for (p, n) in prev.iter().zip(&next) {
                prop_assert!(*n >= 0.0 && *n <= p + 1e-10);
            }
            prev = next;
        }
    }
}
