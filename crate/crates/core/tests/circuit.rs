use proptest::prelude::*;
use trident::circuit::{build_ppa_sub, build_rca_add, build_rca_sub, from_bits, to_bits, GateCircuit};
use trident::convert::{bits_of, from_bit_vec};
use trident::sharing::{reconstruct, share, Masked};
use trident::{run, Config, Ring, P1};

#[test]
fn shared_ppa_sub_exhaustive_4_bits() {
    let c = build_ppa_sub(4).unwrap();
    let pairs: Vec<(u64, u64)> = (0..16).flat_map(|x| (0..16).map(move |y| (x, y))).collect();
    let flat: Vec<u64> = pairs.iter().flat_map(|(x, y)| [bits_of(*x, 4), bits_of(*y, 4)].concat()).collect();
    let out = run(&Config::default(), |p| {
        let s = share(p, P1, Ring::BOOL, &flat, flat.len())?;
        let inputs: Vec<Vec<Masked>> = s.chunks(8).map(<[Masked]>::to_vec).collect();
        let z = c.eval_shared(p, &inputs)?;
        reconstruct(p, Ring::BOOL, &z.concat())
    });
    for got in out.into_values().unwrap() {
        let words: Vec<u64> = got.chunks(4).map(from_bit_vec).collect();
        let want: Vec<u64> = pairs.iter().map(|(x, y)| x.wrapping_sub(*y) & 15).collect();
        assert_eq!(words, want);
    }
}

#[test]
fn ppa_gate_counts() {
    for (l, log) in [(8u32, 3usize), (16, 4), (32, 5), (64, 6)] {
        let c = build_ppa_sub(l).unwrap();
        assert_eq!(c.and_count(), l as usize * log, "ℓ = {l}");
        assert_eq!(c.and_depth(), log, "ℓ = {l}");
    }
    assert!(build_ppa_sub(12).is_err());
}

#[test]
fn text_format_errors_carry_line_numbers() {
    let bad = "inputs 2 outputs 3\n# comment\n3 XOR 1 2\n4 NAND 1 2\n";
    let err = bad.parse::<GateCircuit>().unwrap_err();
    assert!(err.to_string().contains("line 4"), "{err}");
}

proptest! {
    #[test]
    fn ppa_sub_matches_wrapping_sub(x: u64, y: u64) {
        let c = build_ppa_sub(64).unwrap();
        prop_assert_eq!(c.eval_words(x, y, 64).unwrap(), x.wrapping_sub(y));
    }

    #[test]
    fn rca_circuits_match_arithmetic(x in 0u64..256, y in 0u64..256) {
        prop_assert_eq!(build_rca_add(8).unwrap().eval_words(x, y, 8).unwrap(), (x + y) & 255);
        prop_assert_eq!(build_rca_sub(8).unwrap().eval_words(x, y, 8).unwrap(), x.wrapping_sub(y) & 255);
    }

    #[test]
    fn text_round_trip_preserves_semantics(x in 0u64..256, y in 0u64..256) {
        let c = build_ppa_sub(8).unwrap();
        let back: GateCircuit = c.to_string().parse().unwrap();
        prop_assert_eq!(back.eval_words(x, y, 8).unwrap(), c.eval_words(x, y, 8).unwrap());
    }

    #[test]
    fn bit_helpers_round_trip(v: u64) {
        prop_assert_eq!(from_bits(&to_bits(v, 64)), v);
        prop_assert_eq!(from_bit_vec(&bits_of(v, 64)), v);
    }
}
