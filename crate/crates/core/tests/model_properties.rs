use destress_core::algorithms::{global_grad_norm_sq, Problem};
use destress_core::data::{generate_synthetic, partition_uniform};
use destress_core::model::{LossModel, RegLogisticModel, Sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_sample(rng: &mut ChaCha8Rng, d: usize) -> Sample {
    let f: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
    let n = f.iter().map(|v| v * v).sum::<f64>().sqrt();
    Sample::new(f.into_iter().map(|v| v / n).collect(), f64::from(rng.random::<bool>()))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[test]
fn logistic_gradient_is_lipschitz_on_unit_features() {
    let lambda = 0.05;
    let model = RegLogisticModel::new(7, lambda).unwrap();
    let bound = 0.25 + 2.0 * lambda * 9.0 / 8.0 + 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..1000 {
        let z = unit_sample(&mut rng, 7);
        let x: Vec<f64> = (0..7).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.random_range(-1.0..1.0)).collect();
        let ratio = dist(&model.grad(&x, &z), &model.grad(&y, &z)) / dist(&x, &y);
        assert!(ratio <= bound, "{ratio} > {bound}");
    }
}

#[test]
fn regularizer_is_bounded() {
    let lambda = 0.3;
    let model = RegLogisticModel::new(4, lambda).unwrap();
    let zero = RegLogisticModel::new(4, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let z = unit_sample(&mut rng, 4);
        let scale = 10f64.powi(rng.random_range(-2..8));
        let x: Vec<f64> = (0..4).map(|_| scale * (rng.random::<f64>() - 0.5)).collect();
        let base = zero.value(&x, &z);
        let reg = model.value(&x, &z) - base;
        let slack = 1e-12 * (1.0 + base);
        assert!(reg >= -slack && reg <= lambda * 4.0 + slack, "{reg}");
        assert!(model.value(&x, &z) >= 0.0);
    }
}

#[test]
fn gradient_norm_vanishes_at_gd_minimizer() {
    let ds = generate_synthetic(300, 5, 2).unwrap();
    let part = partition_uniform(&ds, 3, 2).unwrap();
    let model = RegLogisticModel::new(5, 0.0).unwrap();
    let p = Problem::new(&model, &ds, &part);
    let step = 1.0 / model.smoothness_hint();
    let mut x = vec![0.0; 5];
    for _ in 0..20_000 {
        let g = p.global_grad(&x);
        if g.iter().map(|v| v * v).sum::<f64>() < 1e-12 {
            break;
        }
        x.iter_mut().zip(g).for_each(|(xi, gi)| *xi -= step * gi);
    }
    assert!(global_grad_norm_sq(&p, &x) <= 1e-8);

    // the reported gradient agrees with central differences of the global loss
    let h = 1e-6;
    let y: Vec<f64> = x.iter().map(|v| v + 0.7).collect();
    let g = p.global_grad(&y);
    for k in 0..5 {
        let (mut a, mut b) = (y.clone(), y.clone());
        a[k] += h;
        b[k] -= h;
        let fd = (p.global_loss(&a) - p.global_loss(&b)) / (2.0 * h);
        assert!((fd - g[k]).abs() < 1e-7);
    }
}
