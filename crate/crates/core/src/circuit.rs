//! Gate-list boolean circuits, adder/subtractor builders, and evaluation
//! over boolean ⟦·⟧ shares.
//!
//! Wire 0 is the constant one, wires 1..=n are the inputs, and every gate
//! writes one fresh wire in order. NOT is XOR with wire 0.

use std::fmt;
use std::str::FromStr;

use crate::arith::dot_product_labeled;
use crate::ctx::Party;
use crate::error::{Error, Result};
use crate::ring::Ring;
use crate::sharing::Masked;

/// The constant-one wire.
pub const ONE: usize = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Xor,
    And,
    Not,
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Op::Xor => "XOR",
            Op::And => "AND",
            Op::Not => "NOT",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Gate {
    pub op: Op,
    pub a: usize,
    /// Second input; equals `a` for NOT.
    pub b: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GateCircuit {
    inputs: usize,
    gates: Vec<Gate>,
    outputs: Vec<usize>,
}

impl GateCircuit {
    pub fn builder(inputs: usize) -> Builder {
        Builder { c: GateCircuit { inputs, gates: Vec::new(), outputs: Vec::new() } }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub fn wires(&self) -> usize {
        1 + self.inputs + self.gates.len()
    }

    /// Wire written by gate `g`.
    pub fn gate_wire(&self, g: usize) -> usize {
        1 + self.inputs + g
    }

    pub fn and_count(&self) -> usize {
        self.gates.iter().filter(|g| g.op == Op::And).count()
    }

    /// AND-depth of every wire.
    pub fn levels(&self) -> Vec<usize> {
        let mut lv = vec![0; self.wires()];
        for (i, g) in self.gates.iter().enumerate() {
            let d = lv[g.a].max(lv[g.b]);
            lv[self.gate_wire(i)] = d + (g.op == Op::And) as usize;
        }
        lv
    }

    pub fn and_depth(&self) -> usize {
        let lv = self.levels();
        self.outputs.iter().map(|w| lv[*w]).max().unwrap_or(0)
    }

    /// Plaintext evaluation on input bits.
    pub fn eval(&self, inputs: &[bool]) -> Result<Vec<bool>> {
        if inputs.len() != self.inputs {
            return Err(Error::InvalidArgument(format!("circuit takes {} inputs, got {}", self.inputs, inputs.len())));
        }
        let mut w = Vec::with_capacity(self.wires());
        w.push(true);
        w.extend_from_slice(inputs);
        for g in &self.gates {
            let v = match g.op {
                Op::Xor => w[g.a] ^ w[g.b],
                Op::And => w[g.a] & w[g.b],
                Op::Not => !w[g.a],
            };
            w.push(v);
        }
        Ok(self.outputs.iter().map(|o| w[*o]).collect())
    }

    /// Plaintext evaluation of a two-operand word circuit on integers.
    pub fn eval_words(&self, x: u64, y: u64, bits: u32) -> Result<u64> {
        let mut inp = to_bits(x, bits);
        inp.extend(to_bits(y, bits));
        let out = self.eval(&inp)?;
        Ok(from_bits(&out))
    }

    /// Evaluates over boolean sharings. `inputs[i]` holds one instance's
    /// input wires; all instances advance together, one Π_Mult batch per
    /// AND layer.
    pub fn eval_shared(&self, p: &mut Party, inputs: &[Vec<Masked>]) -> Result<Vec<Vec<Masked>>> {
        let b = Ring::BOOL;
        let me = p.id();
        if inputs.iter().any(|i| i.len() != self.inputs) {
            return Err(Error::InvalidArgument(format!("circuit takes {} inputs", self.inputs)));
        }
        let lv = self.levels();
        let depth = lv.iter().copied().max().unwrap_or(0);
        let one = Masked::joint(b, me, 1);
        let mut w: Vec<Vec<Masked>> = inputs
            .iter()
            .map(|inp| {
                let mut v = vec![Masked::default(); self.wires()];
                v[ONE] = one;
                v[1..=self.inputs].copy_from_slice(inp);
                v
            })
            .collect();
        for level in 0..=depth {
            let ands: Vec<usize> = (0..self.gates.len())
                .filter(|g| self.gates[*g].op == Op::And && lv[self.gate_wire(*g)] == level)
                .collect();
            if !ands.is_empty() {
                let mut xs = Vec::with_capacity(ands.len() * w.len());
                let mut ys = Vec::with_capacity(xs.capacity());
                for inst in &w {
                    for g in &ands {
                        xs.push(vec![inst[self.gates[*g].a]]);
                        ys.push(vec![inst[self.gates[*g].b]]);
                    }
                }
                let z = dot_product_labeled(p, b, &xs, &ys, "and")?;
                for (k, inst) in w.iter_mut().enumerate() {
                    for (j, g) in ands.iter().enumerate() {
                        inst[self.gate_wire(*g)] = z[k * ands.len() + j];
                    }
                }
            }
            for (i, g) in self.gates.iter().enumerate() {
                let out = self.gate_wire(i);
                if g.op == Op::And || lv[out] != level {
                    continue;
                }
                for inst in w.iter_mut() {
                    inst[out] = match g.op {
                        Op::Xor => inst[g.a].add(b, inst[g.b]),
                        _ => inst[g.a].add(b, one),
                    };
                }
            }
        }
        Ok(w.into_iter().map(|inst| self.outputs.iter().map(|o| inst[*o]).collect()).collect())
    }
}

pub struct Builder {
    c: GateCircuit,
}

impl Builder {
    pub fn input(&self, i: usize) -> usize {
        assert!(i < self.c.inputs, "input {i} out of range");
        1 + i
    }

    fn push(&mut self, op: Op, a: usize, b: usize) -> usize {
        let next = self.c.wires();
        assert!(a < next && b < next, "gate reads an undefined wire");
        self.c.gates.push(Gate { op, a, b });
        next
    }

    pub fn xor(&mut self, a: usize, b: usize) -> usize {
        self.push(Op::Xor, a, b)
    }

    pub fn and(&mut self, a: usize, b: usize) -> usize {
        self.push(Op::And, a, b)
    }

    pub fn not(&mut self, a: usize) -> usize {
        self.push(Op::Not, a, a)
    }

    pub fn output(&mut self, w: usize) {
        self.c.outputs.push(w);
    }

    pub fn finish(self) -> GateCircuit {
        self.c
    }
}

fn check_width(bits: u32, pow2: bool) -> Result<()> {
    if !(1..=64).contains(&bits) || (pow2 && !bits.is_power_of_two()) {
        return Err(Error::UnsupportedWidth(bits));
    }
    Ok(())
}

/// x − y on `bits`-bit words, as x + ¬y + 1 through a Sklansky prefix
/// network. Inputs are x then y, least significant bit first.
///
/// The prefix runs over `bits` items: item 0 is the carry-in (the ONE wire)
/// and item j is bit position j − 1. Every combine node is emitted as is, so
/// the carry block's first AND reads the ONE wire.
pub fn build_ppa_sub(bits: u32) -> Result<GateCircuit> {
    check_width(bits, true)?;
    let l = bits as usize;
    let mut b = GateCircuit::builder(2 * l);
    let x: Vec<usize> = (0..l).map(|i| b.input(i)).collect();
    let ny: Vec<usize> = (0..l).map(|i| b.not(1 + l + i)).collect();
    let p: Vec<usize> = (0..l).map(|i| b.xor(x[i], ny[i])).collect();

    let mut g = vec![ONE; l];
    let mut pp = vec![ONE; l];
    for j in 1..l {
        g[j] = b.and(x[j - 1], ny[j - 1]);
        pp[j] = p[j - 1];
    }
    let mut span = 1;
    while span < l {
        for j in 0..l {
            if j & span == 0 {
                continue;
            }
            let lo = (j & !(2 * span - 1)) + span - 1;
            let t = b.and(pp[j], g[lo]);
            g[j] = b.xor(g[j], t);
            if j >= 2 * span {
                pp[j] = b.and(pp[j], pp[lo]);
            }
        }
        span *= 2;
    }
    for i in 0..l {
        let s = b.xor(p[i], g[i]);
        b.output(s);
    }
    Ok(b.finish())
}

/// x + y through a ripple-carry chain with one AND per carry.
pub fn build_rca_add(bits: u32) -> Result<GateCircuit> {
    check_width(bits, false)?;
    let l = bits as usize;
    let mut b = GateCircuit::builder(2 * l);
    let x: Vec<usize> = (0..l).map(|i| b.input(i)).collect();
    let y: Vec<usize> = (0..l).map(|i| b.input(l + i)).collect();
    ripple(&mut b, &x, &y, None);
    Ok(b.finish())
}

/// x − y as x + ¬y + 1 through a ripple-carry chain: ℓ − 1 ANDs.
pub fn build_rca_sub(bits: u32) -> Result<GateCircuit> {
    check_width(bits, false)?;
    let l = bits as usize;
    let mut b = GateCircuit::builder(2 * l);
    let x: Vec<usize> = (0..l).map(|i| b.input(i)).collect();
    let ny: Vec<usize> = (0..l).map(|i| b.not(1 + l + i)).collect();
    ripple(&mut b, &x, &ny, Some(ONE));
    Ok(b.finish())
}

/// c_{i+1} = c_i ⊕ ((a_i ⊕ c_i) ∧ (b_i ⊕ c_i)), s_i = a_i ⊕ b_i ⊕ c_i.
fn ripple(b: &mut Builder, x: &[usize], y: &[usize], carry_in: Option<usize>) {
    let l = x.len();
    let mut c = carry_in;
    for i in 0..l {
        let p = b.xor(x[i], y[i]);
        let s = match c {
            Some(c) => b.xor(p, c),
            None => p,
        };
        b.output(s);
        if i + 1 < l {
            c = Some(match c {
                Some(c) => {
                    let u = b.xor(x[i], c);
                    let v = b.xor(y[i], c);
                    let t = b.and(u, v);
                    b.xor(c, t)
                }
                None => b.and(x[i], y[i]),
            });
        }
    }
}

/// Little-endian bits of the low `bits` bits of `v`.
pub fn to_bits(v: u64, bits: u32) -> Vec<bool> {
    (0..bits).map(|i| (v >> i) & 1 == 1).collect()
}

pub fn from_bits(bits: &[bool]) -> u64 {
    bits.iter().enumerate().fold(0, |acc, (i, b)| acc | ((*b as u64) << i))
}

/// Text form: a header line "inputs N outputs w1 w2 ...", then one gate per
/// line as "id OP in1 in2" (NOT repeats its input).
impl fmt::Display for GateCircuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "inputs {} outputs", self.inputs)?;
        for o in &self.outputs {
            write!(f, " {o}")?;
        }
        writeln!(f)?;
        for (i, g) in self.gates.iter().enumerate() {
            writeln!(f, "{} {} {} {}", self.gate_wire(i), g.op, g.a, g.b)?;
        }
        Ok(())
    }
}

impl FromStr for GateCircuit {
    type Err = Error;

    fn from_str(s: &str) -> Result<GateCircuit> {
        let mut lines = s.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let bad = |line: usize, msg: &str| Error::Parse { line: line + 1, msg: msg.into() };
        let (hl, header) = lines.next().ok_or_else(|| bad(0, "empty circuit"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() < 3 || h[0] != "inputs" || h[2] != "outputs" {
            return Err(bad(hl, "expected \"inputs N outputs ...\""));
        }
        let num = |line: usize, t: &str| t.parse::<usize>().map_err(|_| bad(line, &format!("bad number {t:?}")));
        let mut b = GateCircuit::builder(num(hl, h[1])?);
        let outputs: Vec<usize> = h[3..].iter().map(|t| num(hl, t)).collect::<Result<_>>()?;
        for (ln, line) in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 4 {
                return Err(bad(ln, "expected \"id OP in1 in2\""));
            }
            let (id, a, c) = (num(ln, t[0])?, num(ln, t[2])?, num(ln, t[3])?);
            if id != b.c.wires() {
                return Err(bad(ln, &format!("gate id {id} out of order")));
            }
            if a >= id || c >= id {
                return Err(bad(ln, "gate reads a later wire"));
            }
            match t[1] {
                "XOR" => b.xor(a, c),
                "AND" => b.and(a, c),
                "NOT" => b.not(a),
                op => return Err(bad(ln, &format!("unknown op {op:?}"))),
            };
        }
        let wires = b.c.wires();
        for o in outputs {
            if o >= wires {
                return Err(bad(hl, &format!("output wire {o} does not exist")));
            }
            b.output(o);
        }
        Ok(b.finish())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppa_shape() {
        for bits in [2u32, 4, 8, 16, 32, 64] {
            let c = build_ppa_sub(bits).unwrap();
            let l = bits as usize;
            let log = bits.trailing_zeros() as usize;
            assert_eq!(c.and_count(), l * log, "bits {bits}");
            assert_eq!(c.and_depth(), log, "bits {bits}");
        }
        assert!(build_ppa_sub(12).is_err());
    }

    #[test]
    fn sub_example() {
        let c = build_ppa_sub(8).unwrap();
        assert_eq!(c.eval_words(13, 5, 8).unwrap(), 8);
        assert_eq!(c.eval_words(5, 13, 8).unwrap(), 248);
    }

    #[test]
    fn rca_shape() {
        let c = build_rca_sub(8).unwrap();
        assert_eq!(c.and_count(), 7);
        assert_eq!(c.and_depth(), 7);
        assert_eq!(build_rca_add(8).unwrap().eval_words(200, 100, 8).unwrap(), 44);
    }

    #[test]
    fn text_round_trip() {
        let c = build_ppa_sub(4).unwrap();
        let back: GateCircuit = c.to_string().parse().unwrap();
        assert_eq!(back, c);
        let err = "inputs 2 outputs 3\n3 NAND 1 2\n".parse::<GateCircuit>().unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
