use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use t2n_core::nn::{Architecture, MappingModel, ParamSet, Readout, Tensor2D, Variant};

const H: f64 = 1e-4;
const TOL: f64 = 1e-4;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn arch(variant: Variant) -> Architecture {
    Architecture {
        seq_len: 5,
        input_dim: 8,
        output_dim: 4,
        variant,
    }
}

fn variants() -> Vec<Variant> {
    let mut v = vec![
        Variant::Linear,
        Variant::Cnn {
            windows: vec![1, 2, 3, 5],
            feature_maps: 3,
        },
    ];
    for readout in [Readout::Final, Readout::Mean] {
        for mask_padding in [false, true] {
            v.push(Variant::Bilstm {
                hidden: 6,
                readout,
                mask_padding,
            });
        }
    }
    v
}

fn random_phrase(rng: &mut ChaCha8Rng, rows: usize, padded: usize) -> Tensor2D {
    Tensor2D::from_fn(rows, 8, |r, _| if r < rows - padded { rng.gen_range(-1.0..1.0) } else { 0.0 })
}

fn objective(model: &MappingModel, x: &Tensor2D, upstream: &[f64]) -> f64 {
    model.forward(x).unwrap().iter().zip(upstream).map(|(a, b)| a * b).sum()
}

/// Smallest gap between the pooled maximum and the runner-up position, and
/// the smallest |pooled pre-activation|, over every CNN feature map. Central
/// differences are only meaningful away from those kinks.
fn cnn_margin(model: &MappingModel, x: &Tensor2D) -> f64 {
    let Variant::Cnn { windows, feature_maps } = &model.architecture().variant else {
        return f64::INFINITY;
    };
    let mut margin = f64::INFINITY;
    for &s in windows {
        let w = model.params().get(&format!("conv{s}.weight")).unwrap();
        let b = model.params().get(&format!("conv{s}.bias")).unwrap();
        for f in 0..*feature_maps {
            let mut vals: Vec<f64> = (0..=x.rows() - s)
                .map(|p| {
                    let mut z = b.get(0, f);
                    for k in 0..s {
                        for d in 0..8 {
                            z += w.get(f, k * 8 + d) * x.get(p + k, d);
                        }
                    }
                    z
                })
                .collect();
            vals.sort_by(|a, b| b.total_cmp(a));
            margin = margin.min(vals[0].abs());
            if vals.len() > 1 {
                margin = margin.min(vals[0] - vals[1]);
            }
        }
    }
    margin
}

fn check_parameters(model: &MappingModel, x: &Tensor2D, upstream: &[f64]) -> Vec<String> {
    let pass = model.forward_cached(x).unwrap();
    let grads = model.gradients(&pass, upstream).unwrap();
    let mut failures = Vec::new();
    let mut probe = model.clone();
    for i in 0..model.params().len() {
        let name = model.params().name(i).to_owned();
        for j in 0..model.params().tensor(i).data().len() {
            let orig = model.params().tensor(i).data()[j];
            probe.params_mut().tensor_mut(i).data_mut()[j] = orig + H;
            let up = objective(&probe, x, upstream);
            probe.params_mut().tensor_mut(i).data_mut()[j] = orig - H;
            let down = objective(&probe, x, upstream);
            probe.params_mut().tensor_mut(i).data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * H);
            let analytic = grads.params.tensor(i).data()[j];
            if rel_err(analytic, numeric) > TOL {
                failures.push(format!("{name}[{j}]: analytic {analytic} numeric {numeric}"));
            }
        }
    }
    for j in 0..x.data().len() {
        let mut xp = x.clone();
        xp.data_mut()[j] += H;
        let mut xm = x.clone();
        xm.data_mut()[j] -= H;
        let numeric = (objective(model, &xp, upstream) - objective(model, &xm, upstream)) / (2.0 * H);
        let analytic = grads.input.data()[j];
        // a zero row that becomes non-zero changes the masked length, which is
        // not differentiable; only check rows the model actually consumed.
        let masked = matches!(model.architecture().variant, Variant::Bilstm { mask_padding: true, .. })
            && x.row(j / 8).iter().all(|&v| v == 0.0);
        if !masked && rel_err(analytic, numeric) > TOL {
            failures.push(format!("input[{j}]: analytic {analytic} numeric {numeric}"));
        }
    }
    failures
}

#[test]
fn every_gradient_matches_central_differences() {
    for variant in variants() {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let model = MappingModel::new(arch(variant.clone()), seed).unwrap();
            let padded = (seed % 3) as usize;
            let mut x = random_phrase(&mut rng, 5, padded);
            while cnn_margin(&model, &x) < 1e-3 {
                x = random_phrase(&mut rng, 5, padded);
            }
            let upstream: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let failures = check_parameters(&model, &x, &upstream);
            assert!(failures.is_empty(), "{variant:?} seed {seed}:\n{}", failures.join("\n"));
        }
    }
}

#[test]
fn zero_upstream_gives_zero_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for variant in variants() {
        let model = MappingModel::new(arch(variant), 3).unwrap();
        let x = random_phrase(&mut rng, 5, 1);
        let g = model.gradients(&model.forward_cached(&x).unwrap(), &[0.0; 4]).unwrap();
        assert!(g.params.iter().all(|(_, t)| t.data().iter().all(|&v| v == 0.0)));
        assert!(g.input.data().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn linear_gradient_is_outer_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let model = MappingModel::new(arch(Variant::Linear), 1).unwrap();
    let x = random_phrase(&mut rng, 5, 0);
    let u: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let g = model.gradients(&model.forward_cached(&x).unwrap(), &u).unwrap();
    let w = g.params.get("weight").unwrap();
    for o in 0..4 {
        for c in 0..40 {
            assert_eq!(w.get(o, c), u[o] * x.data()[c]);
        }
    }
}

#[test]
fn linear_selector_copies_first_row() {
    let a = Architecture {
        seq_len: 3,
        input_dim: 4,
        output_dim: 2,
        variant: Variant::Linear,
    };
    let mut model = MappingModel::new(a, 0).unwrap();
    let w = model.params_mut().get_mut("weight").unwrap();
    w.fill(0.0);
    w.set(0, 0, 1.0);
    w.set(1, 1, 1.0);
    let x = Tensor2D::from_fn(3, 4, |r, c| (r * 4 + c) as f64 + 0.5);
    assert_eq!(model.forward(&x).unwrap(), vec![0.5, 1.5]);
    model.params_mut().get_mut("weight").unwrap().fill(0.0);
    assert_eq!(model.forward(&x).unwrap(), vec![0.0, 0.0]);
}

#[test]
fn cnn_unit_filter_pools_column_maximum() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for j in 0..8 {
        let a = arch(Variant::Cnn {
            windows: vec![1],
            feature_maps: 1,
        });
        let mut model = MappingModel::new(a, 2).unwrap();
        let p = model.params_mut();
        p.get_mut("conv1.weight").unwrap().fill(0.0);
        p.get_mut("conv1.weight").unwrap().set(0, j, 1.0);
        p.get_mut("conv1.bias").unwrap().fill(0.0);
        p.get_mut("proj.weight").unwrap().fill(0.0);
        p.get_mut("proj.weight").unwrap().set(0, 0, 1.0);
        p.get_mut("proj.bias").unwrap().fill(0.0);
        // positive entries so the ReLU is the identity on the maximum
        let x = Tensor2D::from_fn(5, 8, |_, _| rng.gen_range(0.1..1.0));
        let want = (0..5).map(|r| x.get(r, j)).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(model.forward(&x).unwrap()[0], want);
    }
}

fn swap_directions(params: &ParamSet, hidden: usize) -> ParamSet {
    let mut out = params.clone();
    for part in ["w_ih", "w_hh", "bias"] {
        let f = params.get(&format!("fwd.{part}")).unwrap().clone();
        let b = params.get(&format!("bwd.{part}")).unwrap().clone();
        *out.get_mut(&format!("fwd.{part}")).unwrap() = b;
        *out.get_mut(&format!("bwd.{part}")).unwrap() = f;
    }
    let proj = params.get("proj.weight").unwrap();
    let swapped = Tensor2D::from_fn(proj.rows(), proj.cols(), |r, c| {
        proj.get(r, (c + hidden) % (2 * hidden))
    });
    *out.get_mut("proj.weight").unwrap() = swapped;
    out
}

#[test]
fn bilstm_is_equivariant_under_time_reversal() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for readout in [Readout::Final, Readout::Mean] {
        for seed in 0..5 {
            let a = arch(Variant::Bilstm {
                hidden: 6,
                readout,
                mask_padding: false,
            });
            let model = MappingModel::new(a.clone(), seed).unwrap();
            let mirrored = MappingModel::from_params(a, swap_directions(model.params(), 6)).unwrap();
            let x = random_phrase(&mut rng, 5, 0);
            let rev = Tensor2D::from_fn(5, 8, |r, c| x.get(4 - r, c));
            let y = model.forward(&x).unwrap();
            let y_rev = mirrored.forward(&rev).unwrap();
            for (p, q) in y.iter().zip(&y_rev) {
                assert!((p - q).abs() < 1e-12, "{y:?} vs {y_rev:?}");
            }
        }
    }
}

#[test]
fn checkpoints_round_trip_exactly() {
    for variant in variants() {
        let model = MappingModel::new(arch(variant), 77).unwrap();
        let mut buf = Vec::new();
        model.write(&mut buf).unwrap();
        let back = MappingModel::read(buf.as_slice()).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.fingerprint(), model.fingerprint());
    }
}

#[test]
fn backward_rejects_a_pass_from_another_model() {
    let a = MappingModel::new(arch(Variant::Linear), 0).unwrap();
    let b = MappingModel::new(
        arch(Variant::Cnn {
            windows: vec![1],
            feature_maps: 2,
        }),
        0,
    )
    .unwrap();
    let x = Tensor2D::zeros(5, 8);
    let pass = b.forward_cached(&x).unwrap();
    assert!(matches!(a.gradients(&pass, &[1.0; 4]), Err(t2n_core::Error::State(_))));
}
