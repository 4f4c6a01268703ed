use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use trident::ml::{
    bit_extract, bit_extract_masked, decode, drelu, encode, forward, linreg_step, logreg_step, lr_shift, msb_via_a2b,
    predict, relu, sigmoid, train, Dataset, Model, ModelShare, SharedMatrix, TrainParams,
};
use trident::net::{CostReport, Transcript};
use trident::sharing::{reconstruct, share, Masked};
use trident::{run, Config, MsbMode, Party, Ring, P0, P1, P2, P3};

const B: Ring = Ring::BOOL;
const F: u32 = 13;

fn split<T>(out: Vec<(T, Transcript)>) -> (Vec<T>, CostReport) {
    let (vals, ts): (Vec<T>, Vec<Transcript>) = out.into_iter().unzip();
    (vals, CostReport::from_transcripts(&ts))
}

fn measured<T>(p: &mut Party, f: impl FnOnce(&mut Party) -> trident::Result<T>) -> trident::Result<(T, Transcript)> {
    let before = p.transcript().clone();
    let v = f(p)?;
    Ok((v, p.transcript().since(&before)))
}

fn paper() -> Config {
    Config { msb_mode: MsbMode::PaperBitext, ..Config::default() }
}

fn enc(x: f64) -> u64 {
    encode(Ring::Z64, F, x).unwrap()
}

fn dec(v: u64) -> f64 {
    decode(Ring::Z64, F, v)
}

/// Online cost of `f` applied to `n` shared values in paper mode.
fn online_cost(n: usize, f: fn(&mut Party, Ring, &[Masked]) -> trident::Result<Vec<Masked>>) -> CostReport {
    let ring = Ring::Z64;
    let vals: Vec<u64> = (0..n as u64).map(|i| i.wrapping_mul(0x9e37_79b9_7f4a_7c15)).collect();
    let out = run(&paper(), |p| {
        let x = share(p, P1, ring, &vals, n)?;
        measured(p, |p| f(p, ring, &x))
    });
    split(out.into_values().unwrap()).1
}

#[test]
fn bit_extract_cost_in_paper_mode() {
    let n = 256u64;
    let c = online_cost(n as usize, bit_extract);
    assert_eq!(c.online.rounds, 3);
    assert_eq!(c.online.payload_bits, n * (5 * 64 + 2));
}

#[test]
fn relu_cost_in_paper_mode() {
    let n = 256u64;
    let c = online_cost(n as usize, relu);
    assert_eq!(c.online.rounds, 4);
    assert_eq!(c.online.payload_bits, n * (8 * 64 + 2));
}

#[test]
fn sigmoid_cost_in_paper_mode() {
    let n = 256u64;
    let c = online_cost(n as usize, sigmoid);
    assert_eq!(c.online.rounds, 5);
    assert_eq!(c.online.payload_bits, n * (16 * 64 + 7));
}

#[test]
fn masked_extraction_fails_on_ring_wraparound() {
    let ring = Ring::Z16;
    let v = 1u64 << 15;
    let out = run(&paper().with_ring(ring), |p| {
        let x = share(p, P2, ring, &[v], 1)?;
        let b = bit_extract_masked(p, ring, &x, Some(&[2]))?;
        reconstruct(p, B, &b)
    });
    for got in out.into_values().unwrap() {
        // msb(2) ⊕ msb(2·2^15 mod 2^16) = 0, while msb(2^15) = 1.
        assert_eq!(got, vec![0]);
        assert_eq!(ring.msb(v), 1);
    }
}

#[test]
fn fallback_msb_exhaustive_z8() {
    let ring = Ring::Z8;
    let vals: Vec<u64> = (0..256).collect();
    let out = run(&Config::default().with_ring(ring), |p| {
        let x = share(p, P3, ring, &vals, vals.len())?;
        let b = msb_via_a2b(p, ring, &x)?;
        reconstruct(p, B, &b)
    });
    for got in out.into_values().unwrap() {
        let want: Vec<u64> = vals.iter().map(|v| v >> 7).collect();
        assert_eq!(got, want);
    }
}

#[test]
fn relu_exhaustive_z8() {
    let ring = Ring::Z8;
    let vals: Vec<u64> = (0..256).collect();
    let out = run(&Config::default().with_ring(ring), |p| {
        let x = share(p, P1, ring, &vals, vals.len())?;
        let (r, d) = (relu(p, ring, &x)?, drelu(p, ring, &x)?);
        Ok((reconstruct(p, ring, &r)?, reconstruct(p, B, &d)?))
    });
    for (r, d) in out.into_values().unwrap() {
        for v in 0..256u64 {
            let signed = v as u8 as i8;
            assert_eq!(r[v as usize], signed.max(0) as u64, "v = {signed}");
            assert_eq!(d[v as usize], u64::from(signed >= 0));
        }
    }
}

#[test]
fn relu_examples() {
    let ring = Ring::Z64;
    let out = run(&Config::default(), |p| {
        let x = share(p, P1, ring, &[enc(-3.5), enc(3.5)], 2)?;
        let r = relu(p, ring, &x)?;
        reconstruct(p, ring, &r)
    });
    for got in out.into_values().unwrap() {
        assert_eq!(dec(got[0]), 0.0);
        assert_eq!(dec(got[1]), 3.5);
    }
}

fn piecewise(x: f64) -> f64 {
    (x + 0.5).clamp(0.0, 1.0)
}

#[test]
fn sigmoid_examples_and_accuracy() {
    let ring = Ring::Z64;
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let mut xs: Vec<f64> = vec![0.0, -5.0, 5.0];
    xs.extend((0..10_000).map(|_| rng.gen_range(-2.0..2.0)));
    let raw: Vec<u64> = xs.iter().map(|x| enc(*x)).collect();
    let out = run(&Config::default(), |p| {
        let x = share(p, P2, ring, &raw, raw.len())?;
        let s = sigmoid(p, ring, &x)?;
        reconstruct(p, ring, &s)
    });
    for got in out.into_values().unwrap() {
        assert_eq!(dec(got[0]), 0.5);
        assert_eq!(dec(got[1]), 0.0);
        assert_eq!(dec(got[2]), 1.0);
        for (x, g) in xs.iter().zip(&got) {
            assert!((dec(*g) - piecewise(*x)).abs() <= 2.0 / 8192.0, "x = {x}");
        }
    }
}

/// Plaintext fixed-point gradient descent with floor truncation at the same
/// points as the shared version.
fn oracle_train(x: &[Vec<i64>], y: &[i64], batch: usize, iters: usize, shift: u32, logistic: bool) -> Vec<i64> {
    let d = x[0].len();
    let n = x.len();
    let mut w = vec![0i64; d];
    for it in 0..iters {
        let idx: Vec<usize> = (0..batch).map(|k| (it * batch + k) % n).collect();
        let err: Vec<i64> = idx
            .iter()
            .map(|&i| {
                let z = x[i].iter().zip(&w).map(|(a, b)| a * b).sum::<i64>() >> F;
                let a = if logistic { (z + (1 << (F - 1))).clamp(0, 1 << F) } else { z };
                a - y[i]
            })
            .collect();
        for j in 0..d {
            let g: i64 = idx.iter().zip(&err).map(|(&i, e)| x[i][j] * e).sum();
            w[j] -= g >> (F + shift);
        }
    }
    w
}

fn linear_data(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let a: f64 = rng.gen_range(-1.0..1.0);
        let b: f64 = rng.gen_range(-1.0..1.0);
        x.extend([enc(a), enc(b)]);
        y.push(enc(0.75 * a - 0.5 * b));
    }
    Dataset { features: 2, x, y }
}

fn separable_data(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    while y.len() < n {
        let a: f64 = rng.gen_range(-1.0..1.0);
        let b: f64 = rng.gen_range(-1.0..1.0);
        if (a + b).abs() < 0.2 {
            continue;
        }
        x.extend([enc(a), enc(b)]);
        y.push(enc(if a + b > 0.0 { 1.0 } else { 0.0 }));
    }
    Dataset { features: 2, x, y }
}

fn signed_rows(data: &Dataset) -> (Vec<Vec<i64>>, Vec<i64>) {
    let x = data.x.chunks(data.features).map(|r| r.iter().map(|v| *v as i64).collect()).collect();
    (x, data.y.iter().map(|v| *v as i64).collect())
}

fn train_and_compare(data: &Dataset, params: TrainParams) -> (Vec<Vec<u64>>, f64) {
    let out = run(&Config::default(), |p| {
        let w = train(p, P1, data, &params)?;
        Ok((reconstruct(p, Ring::Z64, &w)?, w))
    });
    let vals = out.into_values().unwrap();
    let (x, y) = signed_rows(data);
    let want = oracle_train(&x, &y, params.batch, params.iterations, params.lr_shift, params.model == Model::Logistic);
    let got = &vals[0].0;
    let gap = got.iter().zip(&want).map(|(g, w)| (dec(*g) - *w as f64 / 8192.0).abs()).fold(0.0, f64::max);
    (vals.into_iter().map(|v| v.1.iter().flat_map(|s| [s.m, s.lam[0], s.lam[1], s.lam[2]]).collect()).collect(), gap)
}

#[test]
fn linreg_tracks_plaintext_oracle() {
    let data = linear_data(16, 11);
    let params = TrainParams { model: Model::Linear, iterations: 100, batch: 4, lr_shift: lr_shift(0.5, 4).unwrap() };
    let (_, gap) = train_and_compare(&data, params);
    assert!(gap < 1e-2, "gap {gap}");
}

#[test]
fn linreg_single_step_within_truncation_error() {
    let data = linear_data(4, 12);
    let params = TrainParams { model: Model::Linear, iterations: 1, batch: 4, lr_shift: 3 };
    let (_, gap) = train_and_compare(&data, params);
    assert!(gap <= 3.0 / 8192.0, "gap {gap}");
}

#[test]
fn logreg_tracks_plaintext_oracle() {
    let data = separable_data(16, 13);
    let params = TrainParams { model: Model::Logistic, iterations: 50, batch: 4, lr_shift: lr_shift(0.5, 4).unwrap() };
    let (_, gap) = train_and_compare(&data, params);
    assert!(gap < 1e-2, "gap {gap}");
}

#[test]
fn training_is_deterministic() {
    let data = linear_data(8, 14);
    let params = TrainParams { model: Model::Logistic, iterations: 5, batch: 4, lr_shift: 3 };
    let (a, _) = train_and_compare(&data, params);
    let (b, _) = train_and_compare(&data, params);
    assert_eq!(a, b);
}

#[test]
fn zero_error_leaves_weights_unchanged() {
    let ring = Ring::Z64;
    let xs = [enc(0.5), enc(-1.0), enc(0.25), enc(2.0)];
    let w = [enc(1.0), enc(0.5)];
    // Labels equal X∘w exactly, so the gradient is zero.
    let ys = [enc(0.0), enc(1.25)];
    let out = run(&Config::default(), |p| {
        let x = SharedMatrix::new(2, 2, share(p, P1, ring, &xs, 4)?)?;
        let y = share(p, P1, ring, &ys, 2)?;
        let w0 = share(p, P2, ring, &w, 2)?;
        let w1 = linreg_step(p, &x, &y, &w0, 1)?;
        reconstruct(p, ring, &w1)
    });
    for got in out.into_values().unwrap() {
        for (g, w) in got.iter().zip(&w) {
            assert!((dec(*g) - dec(*w)).abs() <= 2.0 / 8192.0);
        }
    }
}

#[test]
fn logistic_step_rounds_compose() {
    let ring = Ring::Z64;
    let xs: Vec<u64> = (0..8).map(|i| enc(i as f64 / 8.0 - 0.5)).collect();
    let cfg = paper();
    let out = run(&cfg, |p| {
        let x = SharedMatrix::new(4, 2, share(p, P1, ring, &xs, 8)?)?;
        let y = share(p, P1, ring, &xs[..4], 4)?;
        let w = share(p, P2, ring, &xs[..2], 2)?;
        measured(p, |p| logreg_step(p, &x, &y, &w, 2))
    });
    let (_, cost) = split(out.into_values().unwrap());
    assert_eq!(cost.online.rounds, 1 + 5 + 1);
}

#[test]
fn predict_reveals_only_to_output_party() {
    let ring = Ring::Z64;
    let xs: Vec<u64> = [0.5, 1.5, -2.0, 0.25].iter().map(|v| enc(*v)).collect();
    for (model, want) in [(Model::Linear, 0.0), (Model::Logistic, 0.5)] {
        let out = run(&Config::default(), |p| {
            let x = SharedMatrix::new(2, 2, share(p, P1, ring, &xs, 4)?)?;
            let w = vec![Masked::default(); 2];
            predict(p, &x, &w, model, P3)
        });
        let vals = out.into_values().unwrap();
        for (i, v) in vals.iter().enumerate() {
            match v {
                Some(y) if i == 3 => assert!(y.iter().all(|v| dec(*v) == want)),
                None if i != 3 => {}
                other => panic!("party {i} got {other:?}"),
            }
        }
    }
}

#[test]
fn forward_matches_plain_dot_products() {
    let ring = Ring::Z64;
    let xs: Vec<u64> = [0.5, 1.5, -2.0, 0.25, 3.0, -1.0].iter().map(|v| enc(*v)).collect();
    let ws: Vec<u64> = [0.75, -0.125].iter().map(|v| enc(*v)).collect();
    let out = run(&Config::default(), |p| {
        let x = SharedMatrix::new(3, 2, share(p, P1, ring, &xs, 6)?)?;
        let w = share(p, P0, ring, &ws, 2)?;
        let y = forward(p, &x, &w, Model::Linear)?;
        reconstruct(p, ring, &y)
    });
    let want = [0.5 * 0.75 - 1.5 * 0.125, -2.0 * 0.75 - 0.25 * 0.125, 3.0 * 0.75 + 0.125];
    for got in out.into_values().unwrap() {
        for (g, w) in got.iter().zip(want) {
            assert!((dec(*g) - w).abs() <= 3.0 / 8192.0);
        }
    }
}

#[test]
fn model_share_round_trip() {
    let m = ModelShare {
        ring: Ring::Z64,
        frac_bits: 13,
        weights: vec![Masked { m: 1, lam: [2, 3, 4] }, Masked { m: u64::MAX, lam: [0, 0, 7] }],
    };
    let bytes = m.to_bytes();
    assert_eq!(bytes.len(), 16 + 2 * 32);
    assert_eq!(&bytes[..4], b"TRDM");
    assert_eq!(ModelShare::from_bytes(&bytes).unwrap(), m);
    assert!(ModelShare::from_bytes(&bytes[..20]).is_err());
}

#[test]
fn dataset_parsing() {
    let csv = "x1,x2,y\n0.5,1,2\n-1,0.25,0\n";
    let d = Dataset::from_csv(csv.as_bytes(), Ring::Z64, F).unwrap();
    assert_eq!(d.features, 2);
    assert_eq!(d.rows(), 2);
    assert_eq!(d.x[0], enc(0.5));
    let err = Dataset::from_csv("1,2,3\n1,2\n".as_bytes(), Ring::Z64, F).unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
    assert!(lr_shift(0.3, 4).is_err());
    assert_eq!(lr_shift(0.25, 8).unwrap(), 5);
}
