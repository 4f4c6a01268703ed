use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use trident::adversary::{run_with_adversary, Outcome};
use trident::circuit::{build_rca_sub, from_bits, to_bits, GateCircuit};
use trident::garbled::{eval_garbled, evaluate, g_reconstruct, g_share, g_vshare, garble, GShare, GarbledTables, Sha256Kdf};
use trident::{run, Config, PartyId, P0, P1, P2, P3};

const BITS: [u64; 6] = [0, 1, 1, 0, 1, 0];

fn gate(op: &str) -> GateCircuit {
    format!("inputs 2 outputs 3\n3 {op} 1 2\n").parse().unwrap()
}

#[test]
fn single_gate_truth_tables() {
    let kdf = Sha256Kdf;
    let r: u128 = 0x1234_5678_9abc_def0_1357_9bdf_0246_8ace | 1;
    for (op, f) in [("AND", (|a, b| a & b) as fn(u64, u64) -> u64), ("XOR", |a, b| a ^ b)] {
        let c = gate(op);
        let k0 = [0xdead_beef_u128 << 3, 0x5555_aaaa_u128 << 7];
        let (rows, outs) = garble(&kdf, &c, r, &k0, 9, 0);
        for a in 0..2u64 {
            for b in 0..2u64 {
                let act = [k0[0] ^ if a == 1 { r } else { 0 }, k0[1] ^ if b == 1 { r } else { 0 }];
                let out = evaluate(&kdf, &c, &rows, &act, 9, 0).unwrap()[0];
                let want = outs[0] ^ if f(a, b) == 1 { r } else { 0 };
                assert_eq!(out, want, "{op}({a}, {b})");
            }
        }
    }
}

#[test]
fn garbled_sub_on_random_pairs() {
    let mut rng = ChaCha12Rng::seed_from_u64(21);
    let pairs: Vec<(u64, u64)> = (0..256).map(|_| (rng.gen_range(0..256), rng.gen_range(0..256))).collect();
    let c = build_rca_sub(8).unwrap();
    let flat: Vec<u64> = pairs
        .iter()
        .flat_map(|(x, y)| to_bits(*x, 8).into_iter().chain(to_bits(*y, 8)).map(u64::from))
        .collect();
    let out = run(&Config::default(), |p| {
        let g = g_share(p, P1, &flat, flat.len())?;
        let inputs: Vec<Vec<GShare>> = g.chunks(16).map(<[GShare]>::to_vec).collect();
        let z = eval_garbled(p, &c, &inputs)?;
        g_reconstruct(p, &z.concat())
    });
    for got in out.into_values().unwrap() {
        let words: Vec<u64> = got.chunks(8).map(|b| from_bits(&b.iter().map(|v| *v == 1).collect::<Vec<_>>())).collect();
        let want: Vec<u64> = pairs.iter().map(|(x, y)| x.wrapping_sub(*y) & 255).collect();
        assert_eq!(words, want);
    }
}

#[test]
fn g_share_from_every_owner() {
    for owner in PartyId::ALL {
        let out = run(&Config::default(), |p| {
            let g = g_share(p, owner, &BITS, BITS.len())?;
            g_reconstruct(p, &g)
        });
        for got in out.into_values().unwrap() {
            assert_eq!(got, BITS, "owner {owner}");
        }
    }
}

#[test]
fn g_vshare_for_every_pair() {
    for (i, j) in [(P1, P2), (P2, P3), (P3, P1), (P1, P0), (P0, P2), (P3, P0)] {
        let out = run(&Config::default(), |p| {
            let g = g_vshare(p, i, j, &BITS, BITS.len())?;
            g_reconstruct(p, &g)
        });
        for got in out.into_values().unwrap() {
            assert_eq!(got, BITS, "pair {i}, {j}");
        }
    }
}

#[test]
fn tampered_tables_abort() {
    for line in ["P1 gc gc.tables flip:0", "P1 gc gc.tables flip:777", "P2 gc digest#* hash"] {
        let o = run_with_adversary(&Config::default(), &line.parse().unwrap()).unwrap();
        assert_eq!(o, Outcome::AllHonestAbort, "{line}");
    }
}

#[test]
fn table_bytes_carry_the_circuit() {
    let c = build_rca_sub(4).unwrap();
    let (rows, _) = garble(&Sha256Kdf, &c, 3, &[8; 8], 1, 0);
    let t = GarbledTables { rows };
    let (c2, t2) = GarbledTables::from_bytes(&t.to_bytes(&c)).unwrap();
    assert_eq!(c2.to_string(), c.to_string());
    assert_eq!(t2, t);
    let mut bad = t.to_bytes(&c);
    bad.pop();
    assert!(GarbledTables::from_bytes(&bad).is_err());
}
