//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured quantities. Tolerances are pinned in the assertions.

use std::collections::HashMap;
use std::time::Instant;

use quartercast_core::evaluation::{
    apply_sample_filters, macro_metrics, mann_whitney_u, mapd, match_similar_firms, mpd,
    normal_cdf, partition_evaluate, wilcoxon_signed_rank, ForecastRow, Frequency, ModelTag,
    SignConfusion, SliceKey,
};
use quartercast_core::event_study::{erc_regression, fit_market_model, SurpriseObservation};
use quartercast_core::features::{FeatureWindow, WindowMeta, ACC_DIM, MARKET_DIM, WINDOW_LEN};
use quartercast_core::forecaster::{
    train_one, ForecastNet, NetDims, StopDecision, EarlyStopper, TrainConfig,
};
use quartercast_core::linalg::Matrix;
use quartercast_core::nn::{
    two_head_mae, AdamState, BatchNormLayer, DenseLayer, Dropout, GruLayer,
};
use quartercast_core::panel::clean_panel;
use quartercast_core::rng::Rng;
use quartercast_core::synth::{generate_panel, SynthConfig};

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Independent scalar GRU reference for the oracle-equivalence criterion:
/// per-element loops, no shared code with the batched implementation.
fn scalar_gru(layer: &GruLayer, xs: &[Vec<f64>], h0: &[f64]) -> Vec<Vec<f64>> {
    let hidden = layer.hidden_dim();
    let input = layer.input_dim();
    let sigmoid = |v: f64| 1.0 / (1.0 + (-v).exp());
    let mut h = h0.to_vec();
    let mut out = Vec::new();
    for x in xs {
        let mut z = vec![0.0; hidden];
        let mut r = vec![0.0; hidden];
        for j in 0..hidden {
            let mut az = layer.b_z[j];
            let mut ar = layer.b_r[j];
            for k in 0..input {
                az += layer.w_z.at(j, k) * x[k];
                ar += layer.w_r.at(j, k) * x[k];
            }
            for k in 0..hidden {
                az += layer.u_z.at(j, k) * h[k];
                ar += layer.u_r.at(j, k) * h[k];
            }
            z[j] = sigmoid(az);
            r[j] = sigmoid(ar);
        }
        let mut h_new = vec![0.0; hidden];
        for j in 0..hidden {
            let mut ah = layer.b_h[j];
            for k in 0..input {
                ah += layer.w_h.at(j, k) * x[k];
            }
            for k in 0..hidden {
                ah += layer.u_h.at(j, k) * (r[k] * h[k]);
            }
            h_new[j] = (1.0 - z[j]) * h[j] + z[j] * ah.tanh();
        }
        h = h_new;
        out.push(h.clone());
    }
    out
}

#[test]
fn criterion_01_gradient_correctness() {
    let start = Instant::now();
    let h = 1e-5;
    let tol = 1e-4;
    let mut rng = Rng::new(1001);
    let mut checks = 0usize;
    let mut instances = 0usize;

    // Dense layers.
    for _ in 0..30 {
        instances += 1;
        let (b, i, o) = (1 + rng.below(4), 1 + rng.below(5), 1 + rng.below(5));
        let layer = DenseLayer::init(&mut rng, i, o);
        let x = Matrix::from_fn(b, i, |_, _| rng.normal());
        let g = Matrix::from_fn(b, o, |_, _| rng.normal());
        let grads = layer.backward(&x, &g);
        let loss = |l: &DenseLayer, x_: &Matrix| -> f64 {
            l.forward(x_).data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
        };
        for idx in 0..o * i {
            let mut plus = layer.clone();
            plus.weight.data_mut()[idx] += h;
            let mut minus = layer.clone();
            minus.weight.data_mut()[idx] -= h;
            let fd = (loss(&plus, &x) - loss(&minus, &x)) / (2.0 * h);
            assert!(rel_err(grads.d_weight.data()[idx], fd) < tol, "dense weight");
            checks += 1;
        }
        for idx in 0..b * i {
            let mut xp = x.clone();
            xp.data_mut()[idx] += h;
            let mut xm = x.clone();
            xm.data_mut()[idx] -= h;
            let fd = (loss(&layer, &xp) - loss(&layer, &xm)) / (2.0 * h);
            assert!(rel_err(grads.d_input.data()[idx], fd) < tol, "dense input");
            checks += 1;
        }
    }

    // GRU layers (weights, recurrences, biases, inputs).
    for _ in 0..25 {
        instances += 1;
        let (b, i, hd, t) = (1 + rng.below(3), 1 + rng.below(3), 1 + rng.below(3), 2 + rng.below(3));
        let layer = GruLayer::init(&mut rng, i, hd);
        let seq: Vec<Matrix> = (0..t).map(|_| Matrix::from_fn(b, i, |_, _| rng.normal())).collect();
        let gs: Vec<Matrix> = (0..t).map(|_| Matrix::from_fn(b, hd, |_, _| rng.normal())).collect();
        let cache = layer.forward(&seq, None);
        let grads = layer.backward(&cache, &gs);
        let loss = |l: &GruLayer, s: &[Matrix]| -> f64 {
            let c = l.forward(s, None);
            c.outputs()
                .iter()
                .zip(&gs)
                .map(|(h_, g)| h_.data().iter().zip(g.data()).map(|(a, b)| a * b).sum::<f64>())
                .sum()
        };
        let probes: Vec<(f64, Box<dyn Fn(&mut GruLayer) -> &mut f64>)> = vec![
            (grads.d_w_z.data()[0], Box::new(|l: &mut GruLayer| &mut l.w_z.data_mut()[0])),
            (grads.d_u_h.data()[0], Box::new(|l: &mut GruLayer| &mut l.u_h.data_mut()[0])),
            (grads.d_b_r[0], Box::new(|l: &mut GruLayer| &mut l.b_r[0])),
            (grads.d_w_h.data()[0], Box::new(|l: &mut GruLayer| &mut l.w_h.data_mut()[0])),
            (grads.d_u_z.data()[0], Box::new(|l: &mut GruLayer| &mut l.u_z.data_mut()[0])),
        ];
        for (analytic, access) in probes {
            let mut plus = layer.clone();
            *access(&mut plus) += h;
            let mut minus = layer.clone();
            *access(&mut minus) -= h;
            let fd = (loss(&plus, &seq) - loss(&minus, &seq)) / (2.0 * h);
            assert!(rel_err(analytic, fd) < tol, "gru param: {analytic} vs {fd}");
            checks += 1;
        }
        for idx in 0..b * i {
            let mut sp = seq.clone();
            sp[0].data_mut()[idx] += h;
            let mut sm = seq.clone();
            sm[0].data_mut()[idx] -= h;
            let fd = (loss(&layer, &sp) - loss(&layer, &sm)) / (2.0 * h);
            assert!(rel_err(grads.d_inputs[0].data()[idx], fd) < tol, "gru input");
            checks += 1;
        }
    }

    // Batch normalization in training mode (through the batch statistics).
    for _ in 0..25 {
        instances += 1;
        let (b, f) = (2 + rng.below(5), 1 + rng.below(4));
        let mut layer = BatchNormLayer::new(f);
        for gm in &mut layer.gamma {
            *gm = 0.5 + rng.next_f64();
        }
        let x = Matrix::from_fn(b, f, |_, _| rng.normal());
        let g = Matrix::from_fn(b, f, |_, _| rng.normal());
        let (_, cache) = layer.clone().forward_train(&x);
        let grads = layer.backward(&cache, &g);
        let loss = |x_: &Matrix| -> f64 {
            let (y, _) = layer.clone().forward_train(x_);
            y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
        };
        for idx in 0..b * f {
            let mut xp = x.clone();
            xp.data_mut()[idx] += h;
            let mut xm = x.clone();
            xm.data_mut()[idx] -= h;
            let fd = (loss(&xp) - loss(&xm)) / (2.0 * h);
            assert!(rel_err(grads.d_input.data()[idx], fd) < tol, "bn input");
            checks += 1;
        }
    }

    // MAE loss gradient.
    for _ in 0..20 {
        instances += 1;
        let b = 2 + rng.below(6);
        let pred = Matrix::from_fn(b, 2, |_, _| rng.normal());
        let target = Matrix::from_fn(b, 2, |_, _| rng.normal());
        let (_, grad) = two_head_mae(&pred, &target);
        for idx in 0..b * 2 {
            let mut pp = pred.clone();
            pp.data_mut()[idx] += h;
            let mut pm = pred.clone();
            pm.data_mut()[idx] -= h;
            let fd = (two_head_mae(&pp, &target).0 - two_head_mae(&pm, &target).0) / (2.0 * h);
            assert!(rel_err(grad.data()[idx], fd) < tol, "mae grad");
            checks += 1;
        }
    }

    // The full network, small dims, every third coordinate.
    let dims = NetDims {
        acc_input: 3,
        gru1_hidden: 5,
        gru2_hidden: 4,
        market: 10,
        dense1: 4,
        dense2: 3,
        outputs: 2,
    };
    for _ in 0..4 {
        instances += 1;
        let mut net = ForecastNet::with_dims(dims, &mut rng);
        let b = 3;
        let seq: Vec<Matrix> = (0..4).map(|_| Matrix::from_fn(b, 3, |_, _| rng.normal())).collect();
        let market = Matrix::from_fn(b, 10, |_, _| rng.normal());
        let target = Matrix::from_fn(b, 2, |_, _| rng.normal());
        let (out, cache) = net.forward_train(&seq, &market, Dropout::new(0.0), &mut Rng::new(0));
        let (_, grad_out) = two_head_mae(&out, &target);
        let grads = net.backward(&cache, &grad_out);
        let shapes = net.param_shapes();
        for slot in 0..shapes.len() {
            for idx in (0..shapes[slot]).step_by(3) {
                let eval = |delta: f64| {
                    let mut probe = net.clone();
                    probe.param_slices_mut()[slot][idx] += delta;
                    let (o, _) =
                        probe.forward_train(&seq, &market, Dropout::new(0.0), &mut Rng::new(0));
                    two_head_mae(&o, &target).0
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                assert!(rel_err(grads[slot][idx], fd) < tol, "net slot {slot} idx {idx}");
                checks += 1;
            }
        }
    }

    let elapsed = start.elapsed();
    assert!(instances >= 100, "only {instances} randomized instances");
    assert!(elapsed.as_secs() < 60, "gradient checks took {elapsed:?}");
    println!(
        "criterion 01 PASS — {checks} gradient coordinates across {instances} instances within rel 1e-4 in {elapsed:?}"
    );
}

#[test]
fn criterion_02_gru_oracle_equivalence() {
    let mut rng = Rng::new(1002);
    let mut max_diff = 0.0f64;
    for _ in 0..50 {
        let layer = GruLayer::init(&mut rng, 2, 2);
        let xs: Vec<Vec<f64>> = (0..3).map(|_| vec![rng.normal(), rng.normal()]).collect();
        let h0 = vec![rng.normal(), rng.normal()];
        let oracle = scalar_gru(&layer, &xs, &h0);

        let seq: Vec<Matrix> = xs.iter().map(|x| Matrix::from_rows(std::slice::from_ref(x))).collect();
        let cache = layer.forward(&seq, Some(&Matrix::from_rows(std::slice::from_ref(&h0))));
        for (t, states) in oracle.iter().enumerate() {
            for (j, &expected) in states.iter().enumerate() {
                let diff = (cache.outputs()[t].at(0, j) - expected).abs();
                max_diff = max_diff.max(diff);
                assert!(diff < 1e-12, "t={t} j={j} diff={diff:e}");
            }
        }
    }
    println!("criterion 02 PASS — batched GRU matches the scalar oracle, max |Δ| = {max_diff:.2e}");
}

#[test]
fn criterion_03_adam_unit_recurrence() {
    // Two hand-unrolled steps with constant gradient.
    let (lr, b1, b2, eps) = (0.0075, 0.9, 0.999, 1e-8);
    let g = 0.42;
    let mut state = AdamState::new(&[1], lr, b1, b2, eps);
    let mut p = vec![1.0f64];
    for _ in 0..2 {
        let mut refs: Vec<&mut [f64]> = vec![&mut p];
        state.step(&mut refs, &[vec![g]]);
    }
    let mut m = 0.0;
    let mut v = 0.0;
    let mut expected = 1.0;
    for t in 1..=2i32 {
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        expected -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
    }
    let diff = (p[0] - expected).abs();
    assert!(diff < 1e-12, "two-step unroll diff {diff:e}");

    // First-step magnitude: bias corrections cancel, so with eps = 0 the
    // update is exactly the learning rate.
    let mut state = AdamState::new(&[1], lr, b1, b2, 0.0);
    let mut p = vec![0.0f64];
    let mut refs: Vec<&mut [f64]> = vec![&mut p];
    state.step(&mut refs, &[vec![1.0]]);
    let rel = ((-p[0]) - lr).abs() / lr;
    assert!(rel < 1e-9, "first-step relative deviation {rel:e}");
    println!("criterion 03 PASS — two-step unroll diff {diff:.2e}, first-step rel dev {rel:.2e}");
}

#[test]
fn criterion_04_architecture_audit() {
    let dims = NetDims::default();
    // Closed form from the layer dimensions.
    let gru = |i: usize, h: usize| 3 * (h * i + h * h + h);
    let dense = |i: usize, o: usize| o * i + o;
    let expected = gru(6, 76) + gru(76, 38) + dense(48, 19) + 2 * 19 + dense(19, 8) + 2 * 8 + dense(8, 2);
    assert_eq!(expected, 33_197);
    assert_eq!(dims.expected_param_count(), expected);

    let mut rng = Rng::new(1004);
    let net = ForecastNet::new(&mut rng);
    assert_eq!(net.param_count(), expected);
    println!("criterion 04 PASS — parameter count {expected} matches the closed form exactly");
}

fn synthetic_windows(rng: &mut Rng, n: usize, learnable: bool) -> Vec<FeatureWindow> {
    (0..n)
        .map(|k| {
            let mut acc = vec![[0.0; ACC_DIM]; WINDOW_LEN];
            let pad = rng.below(10);
            for row in acc.iter_mut().skip(pad) {
                for v in row.iter_mut() {
                    *v = rng.normal();
                }
            }
            let mut market = [0.0; MARKET_DIM];
            for v in market.iter_mut().take(6) {
                *v = rng.normal();
            }
            let q = (k % 4) as u8 + 1;
            market[5 + q as usize] = 1.0;
            let signal = acc[WINDOW_LEN - 1][0];
            let (tq, ty) = if learnable {
                (0.8 * signal + 0.05 * rng.normal(), 0.5 * signal + 0.05 * rng.normal())
            } else {
                (rng.normal(), rng.normal())
            };
            FeatureWindow {
                acc,
                pad_len: pad,
                market,
                target_q_eps: tq,
                target_y_eps: ty,
                meta: WindowMeta {
                    firm_id: format!("w{k}").as_str().into(),
                    report_date: "2020-05-01".parse().unwrap(),
                    fiscal_year: 2020,
                    fiscal_quarter: q,
                    newest_input_date: "2020-04-01".parse().unwrap(),
                    market_end_date: "2020-04-30".parse().unwrap(),
                },
            }
        })
        .collect()
}

#[test]
fn criterion_05_early_stopping() {
    // Strictly increasing scores stop after epoch 2.
    let mut stopper = EarlyStopper::new(0.2);
    assert_eq!(stopper.observe(1.0), StopDecision::Continue);
    assert_eq!(stopper.observe(1.01), StopDecision::Stop);

    // Strictly decreasing scores never stop.
    let mut stopper = EarlyStopper::new(0.2);
    for i in 0..100 {
        assert_eq!(stopper.observe(10.0 - i as f64 * 0.05), StopDecision::Continue);
    }

    // Integration: a validation set whose targets contradict the training
    // relation makes the validation score rise monotonically while training
    // progresses; training must stop after epoch 2 and return epoch-1
    // parameters.
    let mut rng = Rng::new(1005);
    let train = synthetic_windows(&mut rng, 96, true);
    let val_consistent = synthetic_windows(&mut rng, 32, true);
    let mut val = val_consistent.clone();
    for w in &mut val {
        w.target_q_eps = -w.target_q_eps;
        w.target_y_eps = -w.target_y_eps;
    }
    let stats = quartercast_core::features::FeatureStats {
        format_version: 1,
        fitted_on: "train".into(),
        acc: vec![],
        market: vec![],
        target_q: quartercast_core::features::TargetStat { mean: 0.0, std: 1.0 },
        target_y: quartercast_core::features::TargetStat { mean: 0.0, std: 1.0 },
    };
    let explode = TrainConfig {
        learning_rate: 0.05,
        batch_size: 32,
        ensemble_size: 1,
        max_epochs: 12,
        dropout: 0.0,
        ..TrainConfig::default()
    };
    let (mut net, report) = train_one(&explode, &train, &val, &stats, 9).unwrap();
    assert!(report.stopped_early, "val scores: {:?}", report.val_scores);
    assert_eq!(report.epochs_run, 2, "val scores: {:?}", report.val_scores);
    assert_eq!(report.returned_epoch, 1);
    assert_eq!(net.param_checksum(), report.param_checksums[0], "epoch-1 parameters restored");

    // A sane learning rate on a learnable task declines to max_epochs.
    let calm = TrainConfig {
        learning_rate: 0.002,
        batch_size: 32,
        ensemble_size: 1,
        max_epochs: 6,
        dropout: 0.0,
        ..TrainConfig::default()
    };
    let (_, calm_report) = train_one(&calm, &train, &val_consistent, &stats, 9).unwrap();
    assert!(!calm_report.stopped_early, "val scores: {:?}", calm_report.val_scores);
    assert_eq!(calm_report.epochs_run, 6);
    assert_eq!(calm_report.returned_epoch, 6);
    println!(
        "criterion 05 PASS — rising scores stopped at epoch {} restoring epoch {}; falling scores ran to {}",
        report.epochs_run, report.returned_epoch, calm_report.epochs_run
    );
}

#[test]
fn criterion_06_determinism() {
    let config = SynthConfig { n_firms: 24, quarters_per_firm: 16, ..SynthConfig::default() };
    let train_config = TrainConfig {
        ensemble_size: 2,
        max_epochs: 2,
        batch_size: 64,
        seed: 31,
        ..TrainConfig::default()
    };

    let run = || {
        let panel = generate_panel(&config);
        let prepared =
            quartercast_core::pipeline::prepare_and_split(panel.quarters.clone(), (0.7, 0.1, 0.2))
                .unwrap();
        let partitions =
            quartercast_core::pipeline::build_window_partitions(&prepared, &panel.market).unwrap();
        let model = quartercast_core::pipeline::train_model(&partitions, &train_config).unwrap();
        let benchmark = quartercast_core::pipeline::fit_benchmark(&prepared).unwrap();
        let rows = quartercast_core::pipeline::build_forecast_rows(
            &prepared.records,
            &panel.market,
            &model,
            &benchmark,
            &partitions.test,
        );
        let dir = tempfile::tempdir().unwrap();
        quartercast_core::forecaster::save_bundle(&model, dir.path()).unwrap();
        let mut bundle_bytes: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().to_string(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        bundle_bytes.sort();
        let predictions = quartercast_core::evaluation::write_forecast_csv(&rows);
        (bundle_bytes, predictions)
    };

    let (bundle_a, pred_a) = run();
    let (bundle_b, pred_b) = run();
    assert_eq!(bundle_a.len(), bundle_b.len());
    for ((name_a, bytes_a), (name_b, bytes_b)) in bundle_a.iter().zip(&bundle_b) {
        assert_eq!(name_a, name_b);
        assert_eq!(bytes_a, bytes_b, "bundle file {name_a} differs between runs");
    }
    assert_eq!(pred_a, pred_b, "predictions differ between runs");
    println!(
        "criterion 06 PASS — {} bundle files and {} prediction bytes bit-identical across runs",
        bundle_a.len(),
        pred_a.len()
    );
}

#[test]
fn criterion_07_statistics_oracles() {
    // Wilcoxon exact, n = 6 all one-signed.
    let a = [2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
    let b = [1.0, 2.5, 3.1, 4.2, 5.8, 6.9];
    let w = wilcoxon_signed_rank(&a, &b).unwrap();
    assert!(w.exact);
    assert!((w.p_value - 0.03125).abs() < 1e-12, "wilcoxon p {}", w.p_value);

    // Mann-Whitney exact on disjoint supports.
    let mw = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
    assert!(mw.exact);
    assert!((mw.p_value - 0.1).abs() < 1e-12, "mw p {}", mw.p_value);

    // Normal approximations within 0.01 of exact enumeration at n = 20.
    let mut rng = Rng::new(1007);
    let mut max_gap_w = 0.0f64;
    let mut max_gap_mw = 0.0f64;
    for _ in 0..25 {
        let xs: Vec<f64> = (0..20).map(|_| rng.normal()).collect();
        let ys: Vec<f64> = (0..20).map(|_| rng.normal() + 0.35).collect();
        let exact = wilcoxon_signed_rank(&xs, &ys).unwrap();
        assert!(exact.exact);
        let n = 20.0f64;
        let mean = n * (n + 1.0) / 4.0;
        let sd = (n * (n + 1.0) * (2.0 * n + 1.0) / 24.0).sqrt();
        let z = ((exact.statistic - mean).abs() - 0.5).max(0.0) / sd;
        let p_norm = 2.0 * (1.0 - normal_cdf(z));
        max_gap_w = max_gap_w.max((p_norm - exact.p_value).abs());

        let xs10: Vec<f64> = (0..10).map(|_| rng.normal()).collect();
        let ys20: Vec<f64> = (0..20).map(|_| rng.normal() + 0.4).collect();
        let exact_mw = mann_whitney_u(&xs10, &ys20).unwrap();
        assert!(exact_mw.exact);
        let (na, nb) = (10.0f64, 20.0f64);
        let mean = na * nb / 2.0;
        let sd = (na * nb * (na + nb + 1.0) / 12.0).sqrt();
        let z = ((exact_mw.statistic - mean).abs() - 0.5).max(0.0) / sd;
        let p_norm = 2.0 * (1.0 - normal_cdf(z));
        max_gap_mw = max_gap_mw.max((p_norm - exact_mw.p_value).abs());
    }
    assert!(max_gap_w < 0.01, "wilcoxon approx gap {max_gap_w}");
    assert!(max_gap_mw < 0.01, "mann-whitney approx gap {max_gap_mw}");

    // MAPD/MPD against an O(n²) selection oracle.
    let errors: Vec<f64> = (0..501).map(|_| rng.normal() * 0.3).collect();
    let brute_median = |vals: &[f64]| -> f64 {
        // Independent route: median by counting, no sorting.
        let n = vals.len();
        let mut best_lo = f64::NEG_INFINITY;
        let mut best_hi = f64::INFINITY;
        for &candidate in vals {
            let below = vals.iter().filter(|&&v| v < candidate).count();
            let at_or_below = vals.iter().filter(|&&v| v <= candidate).count();
            if below <= (n - 1) / 2 && at_or_below > (n - 1) / 2 && candidate > best_lo {
                best_lo = candidate;
            }
            if below <= n / 2 && at_or_below > n / 2 && candidate < best_hi {
                best_hi = candidate;
            }
        }
        0.5 * (best_lo + best_hi)
    };
    let abs_errors: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    assert!((mpd(&errors).unwrap() - brute_median(&errors)).abs() < 1e-12);
    assert!((mapd(&errors).unwrap() - brute_median(&abs_errors)).abs() < 1e-12);

    println!(
        "criterion 07 PASS — exact p's 0.03125 and 0.1; approx gaps {max_gap_w:.4}/{max_gap_mw:.4}; medians match brute force"
    );
}

#[test]
fn criterion_08_sign_metrics() {
    let c = SignConfusion { counts: [[5, 1, 0], [1, 5, 1], [0, 1, 6]] };
    let r = macro_metrics(&c).unwrap();
    let expected_pr = (5.0 / 6.0 + 5.0 / 7.0 + 6.0 / 7.0) / 3.0; // 101/126
    let expected_acc = (18.0 / 20.0 + 16.0 / 20.0 + 18.0 / 20.0) / 3.0; // 13/15
    assert!((r.macro_precision - expected_pr).abs() < 1e-12);
    assert!((r.macro_recall - expected_pr).abs() < 1e-12);
    assert!((r.macro_f1 - expected_pr).abs() < 1e-12);
    assert!((r.average_accuracy - expected_acc).abs() < 1e-12);
    assert!((r.macro_precision - 101.0 / 126.0).abs() < 1e-12);
    assert!((r.average_accuracy - 13.0 / 15.0).abs() < 1e-12);
    println!(
        "criterion 08 PASS — macro P/R/F1 = 101/126 = {:.6}, average accuracy = 13/15 = {:.6}",
        r.macro_precision, r.average_accuracy
    );
}

fn erc_observations_from(panel: &quartercast_core::synth::SynthPanel) -> Vec<SurpriseObservation> {
    // Group market days and events per firm, estimate CARs, join with the
    // planted surprises.
    let mut days_by_firm: HashMap<_, Vec<_>> = HashMap::new();
    for d in &panel.market {
        days_by_firm.entry(d.firm_id.clone()).or_default().push(d.clone());
    }
    let mut events_by_firm: HashMap<_, Vec<_>> = HashMap::new();
    for e in &panel.truth.events {
        events_by_firm.entry(e.firm_id.clone()).or_default().push(e.clone());
    }
    let mut out = Vec::new();
    for (firm, events) in events_by_firm {
        let days = &days_by_firm[&firm];
        let dates: Vec<_> = events.iter().map(|e| e.report_date).collect();
        let Ok(fit) = fit_market_model(&firm, days, &dates, 1) else { continue };
        let mut car_by_date = HashMap::new();
        for ev in &fit.events {
            for d in &ev.event_dates {
                car_by_date.insert(*d, ev.car);
            }
        }
        for e in events {
            let Some(&car) = car_by_date.get(&e.report_date) else { continue };
            out.push(SurpriseObservation {
                firm_id: firm.clone(),
                event_date: e.report_date,
                surprise: e.surprise,
                ln_total_assets: e.ln_total_assets,
                tobins_q: e.tobins_q,
                fiscal_year: e.fiscal_year,
                fiscal_quarter: e.fiscal_quarter,
                car,
            });
        }
    }
    out
}

#[test]
fn criterion_09_erc_recovery() {
    let start = Instant::now();
    // Point recovery on ~10⁴ events.
    let config = SynthConfig {
        n_firms: 250,
        quarters_per_firm: 40,
        seed: 1009,
        ..SynthConfig::default()
    };
    let panel = generate_panel(&config);
    let obs = erc_observations_from(&panel);
    assert!(obs.len() >= 9_500, "only {} events", obs.len());
    let result = erc_regression(&obs, Frequency::Quarterly).unwrap();
    let erc = result.coefficient("surprise").unwrap();
    let planted = panel.truth.planted_erc;
    assert!(
        (erc.estimate - planted).abs() < 0.01,
        "recovered {} vs planted {planted}",
        erc.estimate
    );

    // Confidence-interval coverage over replicated small panels.
    let replications = 200;
    let mut covered = 0usize;
    for rep in 0..replications {
        let config = SynthConfig {
            n_firms: 40,
            quarters_per_firm: 12,
            seed: 50_000 + rep as u64,
            ..SynthConfig::default()
        };
        let panel = generate_panel(&config);
        let obs = erc_observations_from(&panel);
        let result = erc_regression(&obs, Frequency::Quarterly).unwrap();
        let erc = result.coefficient("surprise").unwrap();
        let (lo, hi) = (
            erc.estimate - 1.96 * erc.clustered_se,
            erc.estimate + 1.96 * erc.clustered_se,
        );
        if lo <= planted && planted <= hi {
            covered += 1;
        }
    }
    let rate = covered as f64 / replications as f64;
    let elapsed = start.elapsed();
    assert!(
        (0.90..=0.98).contains(&rate),
        "coverage {rate} outside [0.90, 0.98] ({covered}/{replications})"
    );
    assert!(elapsed.as_secs() < 600, "took {elapsed:?}");
    println!(
        "criterion 09 PASS — β₀ {:.4} vs planted {planted}; CI coverage {covered}/{replications} = {rate:.3}; {elapsed:?}",
        erc.estimate
    );
}

#[test]
fn criterion_10_end_to_end_directional() {
    let start = Instant::now();
    // ~20k windows: 540 firms × 40 quarters gives 540 × 37 usable targets.
    let config = SynthConfig { n_firms: 540, quarters_per_firm: 40, seed: 1010, ..SynthConfig::default() };
    let panel = generate_panel(&config);

    let prepared =
        quartercast_core::pipeline::prepare_and_split(panel.quarters.clone(), (0.7, 0.1, 0.2))
            .unwrap();
    let partitions =
        quartercast_core::pipeline::build_window_partitions(&prepared, &panel.market).unwrap();
    let total_windows =
        partitions.train.len() + partitions.validation.len() + partitions.test.len();
    assert!(total_windows >= 19_000, "only {total_windows} windows");

    let train_config = TrainConfig { ensemble_size: 5, max_epochs: 15, seed: 2, ..TrainConfig::default() };
    let model = quartercast_core::pipeline::train_model(&partitions, &train_config).unwrap();
    let benchmark = quartercast_core::pipeline::fit_benchmark(&prepared).unwrap();
    let rows = quartercast_core::pipeline::build_forecast_rows(
        &prepared.records,
        &panel.market,
        &model,
        &benchmark,
        &partitions.test,
    );

    let filtered =
        apply_sample_filters(&rows, &ModelTag::ALL, Frequency::Annual, 0.05, 5.0).unwrap();
    let overall = quartercast_core::evaluation::overall_evaluate(
        &filtered,
        &ModelTag::ALL,
        Frequency::Annual,
        ModelTag::Rnn,
    );
    let metric = |tag: &str| {
        let r = overall.iter().find(|r| r.model == tag).unwrap();
        (r.mapd_pct, r.mpd_pct)
    };
    let (rnn_mapd, _) = metric("rnn");
    let (reg_mapd, _) = metric("regression");
    let (rw_mapd, _) = metric("random_walk");
    let (_, analyst_mpd) = metric("analyst");

    // The trained ensemble beats both benchmarks on annual accuracy.
    assert!(
        rnn_mapd < reg_mapd && rnn_mapd < rw_mapd,
        "rnn {rnn_mapd:.2}% must be below regression {reg_mapd:.2}% and random walk {rw_mapd:.2}%"
    );

    // The planted analyst optimism shows up at the planted size (±2pp).
    let planted_mpd_pct = 100.0 * panel.truth.analyst_bias_mpd;
    assert!(
        (analyst_mpd - planted_mpd_pct).abs() < 2.0,
        "analyst MPD {analyst_mpd:.2}% vs planted {planted_mpd_pct:.2}%"
    );

    // Information accrues through the fiscal year: annual MAPD decreases
    // monotonically from the Q1 cell to the Q4 cell.
    let by_quarter = partition_evaluate(&filtered, &SliceKey::Quarter, &[ModelTag::Rnn], Frequency::Annual);
    let mapd_q: Vec<f64> = (1..=4)
        .map(|q| by_quarter.iter().find(|r| r.slice == format!("Q{q}")).unwrap().mapd_pct)
        .collect();
    for q in 0..3 {
        assert!(
            mapd_q[q] > mapd_q[q + 1],
            "annual MAPD must fall from Q{} ({:.2}%) to Q{} ({:.2}%): {mapd_q:?}",
            q + 1,
            mapd_q[q],
            q + 2,
            mapd_q[q + 1]
        );
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 900, "end-to-end took {elapsed:?}");
    println!(
        "criterion 10 PASS — annual MAPD rnn {rnn_mapd:.2}% < regression {reg_mapd:.2}% and random walk {rw_mapd:.2}%; analyst MPD {analyst_mpd:.2}% ≈ planted {planted_mpd_pct:.2}%; Q1→Q4 {mapd_q:?}; {elapsed:?}"
    );
}

#[test]
fn criterion_11_pipeline_invariants() {
    let config = SynthConfig { n_firms: 60, quarters_per_firm: 24, seed: 1011, ..SynthConfig::default() };
    let panel = generate_panel(&config);

    // clean_panel idempotence on a deliberately dirty panel.
    let mut dirty = panel.quarters.clone();
    let mut dup = dirty[10].clone();
    dup.report_date = dup.report_date + chrono::Days::new(3);
    dirty.push(dup);
    let mut nan_row = dirty[20].clone();
    nan_row.eps = f64::NAN;
    nan_row.fiscal_year = Some(1999);
    dirty.push(nan_row);
    let mut annual = dirty[30].clone();
    annual.annual_only = true;
    annual.fiscal_year = Some(1998);
    dirty.push(annual);
    let (once, log1) = clean_panel(dirty);
    let (twice, log2) = clean_panel(once.clone());
    assert_eq!(once, twice, "clean_panel must be idempotent");
    assert!(log1.removed_total() > 0);
    assert_eq!(log2.removed_total(), 0);
    assert_eq!(log1.removed_total() + once.len(), log1.input_count);

    // No-lookahead across every window.
    let (raw, _) = quartercast_core::features::build_raw_windows(&panel.quarters, &panel.market);
    assert!(!raw.is_empty());
    for w in &raw {
        assert!(w.meta.newest_input_date < w.meta.report_date, "accounting lookahead");
        assert!(w.meta.market_end_date < w.meta.report_date, "market lookahead");
    }

    // Forecast rows for the filter/partition/matching invariants.
    let rows: Vec<ForecastRow> = {
        let prepared =
            quartercast_core::pipeline::prepare_and_split(panel.quarters.clone(), (0.7, 0.1, 0.2))
                .unwrap();
        let mut rng = Rng::new(42);
        raw.iter()
            .map(|w| {
                let record = prepared
                    .records
                    .iter()
                    .find(|r| {
                        r.firm_id == w.meta.firm_id
                            && r.yq() == Some((w.meta.fiscal_year, w.meta.fiscal_quarter))
                    });
                let covered = rng.next_f64() < 0.7;
                ForecastRow {
                    firm_id: w.meta.firm_id.clone(),
                    report_date: Some(w.meta.report_date),
                    fiscal_year: w.meta.fiscal_year,
                    fiscal_quarter: w.meta.fiscal_quarter,
                    industry: record.map(|r| r.industry.clone()).unwrap_or_else(|| "Other".into()),
                    total_assets: record.map(|r| r.total_assets).unwrap_or(100.0),
                    stock_price: record.map(|r| r.stock_price).unwrap_or(20.0),
                    tobins_q: 1.2 + 0.4 * rng.next_f64(),
                    covered,
                    actual_q: w.target_q_eps,
                    actual_y: w.target_y_eps,
                    prev_q_eps: Some(w.target_q_eps * 0.9),
                    prev_y_eps: Some(w.target_y_eps * 0.9),
                    rnn_q: Some(w.target_q_eps * (1.0 + 0.1 * rng.normal())),
                    rnn_y: Some(w.target_y_eps * (1.0 + 0.1 * rng.normal())),
                    analyst_q: covered.then_some(w.target_q_eps * 1.1),
                    analyst_y: covered.then_some(w.target_y_eps * 1.1),
                    regression_q: Some(w.target_q_eps * 1.15),
                    regression_y: Some(w.target_y_eps * 1.15),
                    random_walk_q: Some(w.target_q_eps * 0.85),
                    random_walk_y: Some(w.target_y_eps * 0.85),
                }
            })
            .collect()
    };

    // Trim count exactness.
    let models = [ModelTag::Rnn, ModelTag::Regression, ModelTag::RandomWalk];
    let eligible = rows
        .iter()
        .filter(|r| r.stock_price >= 5.0 && r.actual_y != 0.0)
        .count();
    let kept = apply_sample_filters(&rows, &models, Frequency::Annual, 0.05, 5.0).unwrap();
    let k = (0.05 * eligible as f64).floor() as usize;
    assert_eq!(kept.len(), eligible - 2 * k, "trim removes exactly ⌊0.05n⌋ per tail");

    // Partition cells sum to the filtered total for every slice key.
    for key in [
        SliceKey::Quarter,
        SliceKey::SizeDecile,
        SliceKey::Industry,
        SliceKey::Year,
        SliceKey::Covid("2020-02-18".parse().unwrap()),
        SliceKey::Coverage,
    ] {
        let reports = partition_evaluate(&kept, &key, &[ModelTag::Rnn], Frequency::Annual);
        let total: usize = reports.iter().map(|r| r.n).sum();
        assert_eq!(total, kept.len(), "cells must partition rows for {key:?}");
    }

    // Matched-firm distance and industry gates.
    let (covered, uncovered): (Vec<ForecastRow>, Vec<ForecastRow>) =
        kept.into_iter().partition(|r| r.covered);
    let limit = 0.5;
    let report =
        match_similar_firms(&covered, &uncovered, limit, ModelTag::Rnn, Frequency::Annual).unwrap();
    for pair in &report.pairs {
        assert!(pair.distance < limit, "distance gate violated");
        assert_eq!(
            covered[pair.covered_idx].industry, uncovered[pair.uncovered_idx].industry,
            "industry gate violated"
        );
    }
    println!(
        "criterion 11 PASS — idempotent cleaning, no lookahead in {} windows, exact trim, partition sums, {} matched pairs gated",
        raw.len(),
        report.pairs.len()
    );
}
