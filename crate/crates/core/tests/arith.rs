use trident::arith::{dot_product, mult, mult_trunc};
use trident::net::{CostReport, Transcript};
use trident::ring::{decode_fixed, encode_fixed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use trident::sharing::{add, reconstruct, share, Masked};
use trident::{run, Config, Party, Ring, P1, P2};

fn split<T>(out: Vec<(T, Transcript)>) -> (Vec<T>, CostReport) {
    let (vals, ts): (Vec<T>, Vec<Transcript>) = out.into_iter().unzip();
    (vals, CostReport::from_transcripts(&ts))
}

fn measured<T>(p: &mut Party, f: impl FnOnce(&mut Party) -> trident::Result<T>) -> trident::Result<(T, Transcript)> {
    let before = p.transcript().clone();
    let v = f(p)?;
    Ok((v, p.transcript().since(&before)))
}

#[test]
fn mult_exhaustive_z8() {
    let ring = Ring::Z8;
    let xs: Vec<u64> = (0..65536u64).map(|i| i >> 8).collect();
    let ys: Vec<u64> = (0..65536u64).map(|i| i & 0xff).collect();
    let out = run(&Config::default().with_ring(ring), |p| {
        let x = share(p, P1, ring, &xs, xs.len())?;
        let y = share(p, P2, ring, &ys, ys.len())?;
        let z = mult(p, ring, &x, &y)?;
        reconstruct(p, ring, &z)
    });
    for v in out.into_values().unwrap() {
        let bad = (0..65536).filter(|&i| v[i] != (xs[i] * ys[i]) & 0xff).count();
        assert_eq!(bad, 0);
    }
}

#[test]
fn mult_costs_three_elements_per_gate() {
    let ring = Ring::Z64;
    let n = 1024;
    let vals: Vec<u64> = (0..n as u64).collect();
    let out = run(&Config::default(), |p| {
        let x = share(p, P1, ring, &vals, n)?;
        let y = share(p, P2, ring, &vals, n)?;
        measured(p, |p| mult(p, ring, &x, &y))
    });
    let (_, cost) = split(out.into_values().unwrap());
    assert_eq!(cost.online.payload_bits, 3 * 64 * n as u64);
    assert_eq!(cost.online.rounds, 1);
    assert_eq!(cost.offline.payload_bits, 3 * 64 * n as u64);
    assert_eq!(cost.offline.rounds, 1);
}

#[test]
fn dot_product_cost_is_independent_of_length() {
    let ring = Ring::Z64;
    for d in [1usize, 10, 100, 1000] {
        let a: Vec<u64> = (0..d as u64).map(|i| i + 1).collect();
        let b: Vec<u64> = (0..d as u64).map(|i| 3 * i + 2).collect();
        let out = run(&Config::default(), |p| {
            let x = share(p, P1, ring, &a, d)?;
            let y = share(p, P2, ring, &b, d)?;
            let (z, t) = measured(p, |p| dot_product(p, ring, &[x], &[y]))?;
            Ok((reconstruct(p, ring, &z)?[0], t))
        });
        let (vals, cost) = split(out.into_values().unwrap());
        let want = a.iter().zip(&b).fold(0u64, |s, (x, y)| s.wrapping_add(x.wrapping_mul(*y)));
        assert!(vals.iter().all(|v| *v == want));
        assert_eq!(cost.online.payload_bits, 3 * 64, "d = {d}");
        assert_eq!(cost.offline.payload_bits, 3 * 64, "d = {d}");
    }
}

#[test]
fn mult_trunc_is_within_one_ulp_and_costs_match() {
    let ring = Ring::Z64;
    let f = 13;
    let a: Vec<f64> = vec![1.5, -2.25, 3.0, 0.0, -0.001, 100.125, -77.5, 0.5];
    let b: Vec<f64> = vec![2.0, 4.5, -0.125, 9.0, 1000.0, -3.5, -1.25, 0.5];
    let ea: Vec<u64> = a.iter().map(|v| encode_fixed(*v, f).unwrap()).collect();
    let eb: Vec<u64> = b.iter().map(|v| encode_fixed(*v, f).unwrap()).collect();
    let n = a.len();
    let out = run(&Config::default(), |p| {
        let x = share(p, P1, ring, &ea, n)?;
        let y = share(p, P2, ring, &eb, n)?;
        let (z, t) = measured(p, |p| mult_trunc(p, ring, &x, &y, f))?;
        Ok((reconstruct(p, ring, &z)?, t))
    });
    let (vals, cost) = split(out.into_values().unwrap());
    for i in 0..n {
        let exact = (ring.to_signed(ea[i]) as i128 * ring.to_signed(eb[i]) as i128) as f64 / (1u64 << (2 * f)) as f64;
        let got = decode_fixed(vals[0][i], f);
        assert!((got - exact).abs() <= 1.0 / (1u64 << f) as f64, "{got} vs {exact}");
    }
    assert_eq!(cost.online.payload_bits, 3 * 64 * n as u64);
    assert_eq!(cost.online.rounds, 1);
    assert_eq!(cost.offline.rounds, 2);
    assert_eq!(cost.offline.payload_bits, 6 * 64 * n as u64);
}

#[test]
fn mult_trunc_of_zero_rounds_to_zero_or_one_ulp() {
    let ring = Ring::Z64;
    let out = run(&Config::default(), |p| {
        let x = share(p, P1, ring, &[0; 64], 64)?;
        let y = share(p, P2, ring, &[0; 64], 64)?;
        let z = mult_trunc(p, ring, &x, &y, 13)?;
        reconstruct(p, ring, &z)
    });
    for v in out.into_values().unwrap() {
        assert!(v.iter().all(|z| *z <= 1));
    }
}

/// One layer of a random circuit: each new wire is `a op b` over two wires
/// of the previous layer.
#[derive(Clone, Copy)]
struct Gate {
    mul: bool,
    a: usize,
    b: usize,
}

fn random_layers(seed: u64, depth: usize, width: usize) -> Vec<Vec<Gate>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..depth)
        .map(|d| {
            let prev = if d == 0 { 2 } else { width };
            (0..width).map(|_| Gate { mul: rng.gen(), a: rng.gen_range(0..prev), b: rng.gen_range(0..prev) }).collect()
        })
        .collect()
}

fn eval_plain(ring: Ring, layers: &[Vec<Gate>], x: u64, y: u64) -> Vec<u64> {
    let mut wires = vec![x, y];
    for layer in layers {
        wires = layer
            .iter()
            .map(|g| if g.mul { ring.mul(wires[g.a], wires[g.b]) } else { ring.add(wires[g.a], wires[g.b]) })
            .collect();
    }
    wires
}

#[test]
fn random_depth_five_circuit_exhaustive_z8() {
    let ring = Ring::Z8;
    let layers = random_layers(5, 5, 4);
    let xs: Vec<u64> = (0..65536u64).map(|i| i >> 8).collect();
    let ys: Vec<u64> = (0..65536u64).map(|i| i & 0xff).collect();
    let n = xs.len();
    let out = run(&Config::default().with_ring(ring), |p| {
        let mut wires: Vec<Vec<Masked>> = vec![share(p, P1, ring, &xs, n)?, share(p, P2, ring, &ys, n)?];
        for layer in &layers {
            let (muls, adds): (Vec<_>, Vec<_>) = layer.iter().enumerate().partition(|(_, g)| g.mul);
            let lhs: Vec<Masked> = muls.iter().flat_map(|(_, g)| wires[g.a].clone()).collect();
            let rhs: Vec<Masked> = muls.iter().flat_map(|(_, g)| wires[g.b].clone()).collect();
            let prods = mult(p, ring, &lhs, &rhs)?;
            let mut next = vec![Vec::new(); layer.len()];
            for (k, (i, _)) in muls.iter().enumerate() {
                next[*i] = prods[k * n..(k + 1) * n].to_vec();
            }
            for (i, g) in adds {
                next[i] = add(ring, &wires[g.a], &wires[g.b]);
            }
            wires = next;
        }
        reconstruct(p, ring, &wires.concat())
    });
    let want: Vec<Vec<u64>> = (0..n).map(|i| eval_plain(ring, &layers, xs[i], ys[i])).collect();
    assert!(layers.iter().flatten().filter(|g| g.mul).count() >= 5);
    for got in out.into_values().unwrap() {
        for (w, wire) in got.chunks(n).enumerate() {
            let bad = (0..n).filter(|&i| wire[i] != want[i][w]).count();
            assert_eq!(bad, 0, "output wire {w}");
        }
    }
}

#[test]
fn truncation_error_stays_within_one_ulp_over_many_masks() {
    let ring = Ring::Z64;
    let f = 13;
    let n = 10_000;
    let mut rng = ChaCha12Rng::seed_from_u64(77);
    // A wrap happens with probability about |a·b| / 2^64; raw products
    // under 2^23 keep it below 2^-40.
    let a: Vec<i64> = (0..n).map(|_| rng.gen_range(-(1i64 << 13)..(1i64 << 13))).collect();
    let b: Vec<i64> = (0..n).map(|_| rng.gen_range(-(1i64 << 10)..(1i64 << 10))).collect();
    let ea: Vec<u64> = a.iter().map(|v| *v as u64).collect();
    let eb: Vec<u64> = b.iter().map(|v| *v as u64).collect();
    let out = run(&Config::with_seed(b"trunc-stat"), |p| {
        let x = share(p, P1, ring, &ea, n)?;
        let y = share(p, P2, ring, &eb, n)?;
        let z = mult_trunc(p, ring, &x, &y, f)?;
        reconstruct(p, ring, &z)
    });
    let got = &out.into_values().unwrap()[0];
    let bad = (0..n)
        .filter(|&i| {
            let exact = (a[i] as i128 * b[i] as i128) as f64 / (1u64 << f) as f64;
            (ring.to_signed(got[i]) as f64 - exact).abs() > 1.0
        })
        .count();
    assert_eq!(bad, 0);
}
