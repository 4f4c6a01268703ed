//! MSB extraction, activations and regression training over shares.

use std::io::{Read, Write};
use std::path::Path;

use crate::arith::{dot_product_trunc, mult};
use crate::convert::{a2b, bit2a, bit_inject};
use crate::ctx::{MsbMode, Party};
use crate::error::{Error, Result};
use crate::net::Phase;
use crate::party::{PartyId, PartySet, P0, P1, P2, P3};
use crate::ring::{half, one, Ring};
use crate::sharing::{reconstruct_to, share, vshare_many, vshare_many_in, Masked, VJob};

const B: Ring = Ring::BOOL;

/// ⟦msb(v)⟧^B using the configured [`MsbMode`].
pub fn bit_extract(p: &mut Party, ring: Ring, v: &[Masked]) -> Result<Vec<Masked>> {
    match p.cfg().msb_mode {
        MsbMode::PaperBitext => bit_extract_masked(p, ring, v, None),
        MsbMode::A2bFallback => msb_via_a2b(p, ring, v),
    }
}

/// The top bit of a full boolean conversion. Exact for every input.
pub fn msb_via_a2b(p: &mut Party, ring: Ring, v: &[Masked]) -> Result<Vec<Masked>> {
    let top = ring.bits() as usize - 1;
    Ok(a2b(p, ring, v)?.into_iter().map(|bits| bits[top]).collect())
}

/// Mask-multiply-reveal extraction: ⟦msb(r)⟧^B ⊕ ⟦msb(r·v)⟧^B with r known
/// to P1 and P2 and r·v opened to P0 and P3.
///
/// `fixed_r` replaces the sampled masks, which lets tests reproduce inputs
/// where msb(v) ≠ msb(r) ⊕ msb(r·v).
pub fn bit_extract_masked(p: &mut Party, ring: Ring, v: &[Masked], fixed_r: Option<&[u64]>) -> Result<Vec<Masked>> {
    let n = v.len();
    p.offline();
    let r = match fixed_r {
        Some(r) if r.len() == n => r.iter().map(|x| ring.reduce(*x)).collect(),
        Some(_) => return Err(Error::InvalidArgument("one mask per value".into())),
        None => p.sample(PartySet::of(&[P1, P2]), "bitext.r", n, ring),
    };
    let rmsb: Vec<u64> = r.iter().map(|x| ring.msb(*x)).collect();
    let (rs, xs) = p.parallel(
        |p| Ok(vshare_many_in(p, ring, &[VJob::new(P1, P2, r.clone(), n)], "bitext.r", Phase::Offline)?.remove(0)),
        |p| Ok(vshare_many_in(p, B, &[VJob::new(P1, P2, rmsb, n)], "bitext.x", Phase::Offline)?.remove(0)),
    )?;

    p.online();
    let rv = mult(p, ring, &rs, v)?;
    let opened = reconstruct_to(p, ring, &rv, PartySet::of(&[P0, P3]))?;
    let y: Vec<u64> = opened.map_or_else(|| vec![0; n], |o| o.iter().map(|x| ring.msb(*x)).collect());
    let ys = vshare_many(p, B, &[VJob::new(P3, P0, y, n)], "bitext.y")?.remove(0);
    p.end_protocol()?;
    Ok(xs.iter().zip(&ys).map(|(a, b)| a.add(B, *b)).collect())
}

fn not_bits(me: PartyId, b: &[Masked]) -> Vec<Masked> {
    b.iter().map(|s| s.add_const(B, me, 1)).collect()
}

/// ⟦1 ⊕ msb(v)⟧^B, i.e. [v ≥ 0].
pub fn drelu(p: &mut Party, ring: Ring, v: &[Masked]) -> Result<Vec<Masked>> {
    let b = bit_extract(p, ring, v)?;
    Ok(not_bits(p.id(), &b))
}

/// ⟦max(0, v)⟧^A for signed v.
pub fn relu(p: &mut Party, ring: Ring, v: &[Masked]) -> Result<Vec<Masked>> {
    let d = drelu(p, ring, v)?;
    bit_inject(p, ring, &d, v)
}

/// Piecewise-linear sigmoid: 0 below −1/2, v + 1/2 in between, 1 from 1/2
/// on. Both comparisons are extracted in one batch.
pub fn sigmoid(p: &mut Party, ring: Ring, v: &[Masked]) -> Result<Vec<Masked>> {
    let n = v.len();
    let f = p.frac_bits();
    let me = p.id();
    let h = ring.reduce(half(f));
    let up: Vec<Masked> = v.iter().map(|s| s.add_const(ring, me, h)).collect();
    let down: Vec<Masked> = v.iter().map(|s| s.add_const(ring, me, ring.neg(h))).collect();
    let both = bit_extract(p, ring, &[up.clone(), down].concat())?;
    let (b1, b2) = both.split_at(n);
    let nb1 = not_bits(me, b1);
    let nb2 = not_bits(me, b2);
    let mid = mult(p, B, &nb1, b2)?;
    let (lin, sat) = p.parallel(|p| bit_inject(p, ring, &mid, &up), |p| bit2a(p, ring, &nb2))?;
    let one = ring.reduce(one(f));
    Ok(lin.iter().zip(&sat).map(|(a, b)| a.add(ring, b.scale(ring, one))).collect())
}

/// Plaintext version of [`sigmoid`] on raw fixed-point values.
pub fn sigmoid_plain(ring: Ring, f: u32, v: u64) -> u64 {
    let h = ring.to_signed(ring.reduce(half(f)));
    let x = ring.to_signed(v);
    if x < -h {
        0
    } else if x < h {
        ring.from_signed(x + h)
    } else {
        ring.reduce(one(f))
    }
}

/// Row-major matrix of arithmetic sharings.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SharedMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Masked>,
}

impl SharedMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Masked>) -> Result<SharedMatrix> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!("{} entries for a {rows}×{cols} matrix", data.len())));
        }
        Ok(SharedMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Masked] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<Masked> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    /// Rows `start..start + len`, wrapping around the end.
    pub fn batch(&self, start: usize, len: usize) -> SharedMatrix {
        let data = (0..len).flat_map(|k| self.row((start + k) % self.rows).to_vec()).collect();
        SharedMatrix { rows: len, cols: self.cols, data }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    Linear,
    Logistic,
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Model> {
        match s {
            "linreg" | "linear" => Ok(Model::Linear),
            "logreg" | "logistic" => Ok(Model::Logistic),
            _ => Err(Error::InvalidArgument(format!("unknown model {s:?}"))),
        }
    }
}

/// X∘w with one truncation, followed by the activation.
pub fn forward(p: &mut Party, x: &SharedMatrix, w: &[Masked], model: Model) -> Result<Vec<Masked>> {
    let ring = p.ring();
    if w.len() != x.cols() {
        return Err(Error::InvalidArgument(format!("{} weights for {} features", w.len(), x.cols())));
    }
    let xs: Vec<Vec<Masked>> = (0..x.rows()).map(|i| x.row(i).to_vec()).collect();
    let ws = vec![w.to_vec(); x.rows()];
    let z = dot_product_trunc(p, ring, &xs, &ws, p.frac_bits())?;
    match model {
        Model::Linear => Ok(z),
        Model::Logistic => sigmoid(p, ring, &z),
    }
}

/// One gradient step w − 2^{−lr_shift}·Xᵀ(act(Xw) − y). The scale α/B is
/// folded into the backward truncation.
pub fn train_step(p: &mut Party, x: &SharedMatrix, y: &[Masked], w: &[Masked], lr_shift: u32, model: Model) -> Result<Vec<Masked>> {
    let ring = p.ring();
    if y.len() != x.rows() {
        return Err(Error::InvalidArgument(format!("{} labels for {} rows", y.len(), x.rows())));
    }
    let yhat = forward(p, x, w, model)?;
    let err: Vec<Masked> = yhat.iter().zip(y).map(|(a, b)| a.sub(ring, *b)).collect();
    let cols: Vec<Vec<Masked>> = (0..x.cols()).map(|j| x.col(j)).collect();
    let errs = vec![err; x.cols()];
    let grad = dot_product_trunc(p, ring, &cols, &errs, p.frac_bits() + lr_shift)?;
    Ok(w.iter().zip(&grad).map(|(a, g)| a.sub(ring, *g)).collect())
}

pub fn linreg_step(p: &mut Party, x: &SharedMatrix, y: &[Masked], w: &[Masked], lr_shift: u32) -> Result<Vec<Masked>> {
    train_step(p, x, y, w, lr_shift, Model::Linear)
}

pub fn logreg_step(p: &mut Party, x: &SharedMatrix, y: &[Masked], w: &[Masked], lr_shift: u32) -> Result<Vec<Masked>> {
    train_step(p, x, y, w, lr_shift, Model::Logistic)
}

/// log₂(B/α) for a learning rate α = 2^{−k} and a power-of-two batch.
pub fn lr_shift(lr: f64, batch: usize) -> Result<u32> {
    let k = -lr.log2();
    if !(lr > 0.0 && lr <= 1.0) || k.fract() != 0.0 {
        return Err(Error::InvalidArgument(format!("learning rate {lr} is not a power-of-two reciprocal")));
    }
    if !batch.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("batch size {batch} is not a power of two")));
    }
    Ok(k as u32 + batch.trailing_zeros())
}

/// A plaintext dataset in raw fixed-point form.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: usize,
    /// Row-major, `features` values per row.
    pub x: Vec<u64>,
    pub y: Vec<u64>,
}

impl Dataset {
    pub fn rows(&self) -> usize {
        self.y.len()
    }

    /// Reads a CSV whose last column is the label. A header row is
    /// skipped when its first field is not a number.
    pub fn from_csv(r: impl Read, ring: Ring, f: u32) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(r);
        let mut features = None;
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 1;
            let vals: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            let vals = match vals {
                Ok(v) => v,
                Err(_) if i == 0 => continue,
                Err(e) => return Err(Error::Parse { line, msg: e.to_string() }),
            };
            if vals.len() < 2 {
                return Err(Error::Parse { line, msg: "need at least one feature and a label".into() });
            }
            let d = *features.get_or_insert(vals.len() - 1);
            if vals.len() != d + 1 {
                return Err(Error::Parse { line, msg: format!("expected {} columns, found {}", d + 1, vals.len()) });
            }
            for (k, v) in vals.iter().enumerate() {
                let raw = encode(ring, f, *v).map_err(|e| Error::Parse { line, msg: e.to_string() })?;
                if k < d {
                    x.push(raw);
                } else {
                    y.push(raw);
                }
            }
        }
        let features = features.ok_or_else(|| Error::InvalidArgument("dataset has no rows".into()))?;
        Ok(Dataset { features, x, y })
    }

    pub fn load(path: &Path, ring: Ring, f: u32) -> Result<Dataset> {
        Dataset::from_csv(std::fs::File::open(path)?, ring, f)
    }
}

/// Fixed-point encoding into an arbitrary ring.
pub fn encode(ring: Ring, f: u32, x: f64) -> Result<u64> {
    let scaled = (x * 2f64.powi(f as i32)).round();
    let limit = 2f64.powi(ring.bits() as i32 - 1);
    if !scaled.is_finite() || scaled.abs() >= limit {
        return Err(Error::FixedOverflow(x));
    }
    Ok(ring.from_signed(scaled as i64))
}

pub fn decode(ring: Ring, f: u32, raw: u64) -> f64 {
    ring.to_signed(raw) as f64 / 2f64.powi(f as i32)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrainParams {
    pub model: Model,
    pub iterations: usize,
    pub batch: usize,
    pub lr_shift: u32,
}

/// Shares `data` from `owner`, starts from zero weights and runs
/// `iterations` steps over consecutive batches.
pub fn train(p: &mut Party, owner: PartyId, data: &Dataset, params: &TrainParams) -> Result<Vec<Masked>> {
    let ring = p.ring();
    let (n, d) = (data.rows(), data.features);
    let empty = p.id() != owner;
    let xv = if empty { Vec::new() } else { data.x.clone() };
    let yv = if empty { Vec::new() } else { data.y.clone() };
    let x = SharedMatrix::new(n, d, share(p, owner, ring, &xv, n * d)?)?;
    let y = share(p, owner, ring, &yv, n)?;
    let mut w = vec![Masked::default(); d];
    for it in 0..params.iterations {
        let start = (it * params.batch) % n;
        let xb = x.batch(start, params.batch);
        let yb: Vec<Masked> = (0..params.batch).map(|k| y[(start + k) % n]).collect();
        w = train_step(p, &xb, &yb, &w, params.lr_shift, params.model)?;
    }
    Ok(w)
}

/// The same training loop in the clear with the same truncation points;
/// every truncation is an arithmetic shift.
pub fn train_plain(ring: Ring, f: u32, data: &Dataset, params: &TrainParams) -> Vec<u64> {
    let (n, d) = (data.rows(), data.features);
    let mut w = vec![0u64; d];
    for it in 0..params.iterations {
        let start = (it * params.batch) % n;
        let rows: Vec<usize> = (0..params.batch).map(|k| (start + k) % n).collect();
        let err: Vec<u64> = rows
            .iter()
            .map(|&i| {
                let z = ring.sar((0..d).fold(0, |s, j| ring.add(s, ring.mul(data.x[i * d + j], w[j]))), f);
                let a = if params.model == Model::Logistic { sigmoid_plain(ring, f, z) } else { z };
                ring.sub(a, data.y[i])
            })
            .collect();
        for j in 0..d {
            let g = rows.iter().zip(&err).fold(0, |s, (&i, e)| ring.add(s, ring.mul(data.x[i * d + j], *e)));
            w[j] = ring.sub(w[j], ring.sar(g, f + params.lr_shift));
        }
    }
    w
}

/// Forward pass revealed only to `output`; `None` at every other party.
pub fn predict(p: &mut Party, x: &SharedMatrix, w: &[Masked], model: Model, output: PartyId) -> Result<Option<Vec<u64>>> {
    let yhat = forward(p, x, w, model)?;
    reconstruct_to(p, p.ring(), &yhat, output.set())
}

const MODEL_MAGIC: &[u8; 4] = b"TRDM";

/// One party's share of a weight vector: a 16-byte header (magic, ℓ, f, d
/// as little-endian u32) followed by m and the three λ slots per weight.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelShare {
    pub ring: Ring,
    pub frac_bits: u32,
    pub weights: Vec<Masked>,
}

impl ModelShare {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 32 * self.weights.len());
        out.extend_from_slice(MODEL_MAGIC);
        for v in [self.ring.bits(), self.frac_bits, self.weights.len() as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for w in &self.weights {
            for v in [w.m, w.lam[0], w.lam[1], w.lam[2]] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ModelShare> {
        let bad = |msg: &str| Error::InvalidArgument(format!("model file: {msg}"));
        if bytes.len() < 16 || &bytes[..4] != MODEL_MAGIC {
            return Err(bad("bad header"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
        let ring = Ring::new(word(1))?;
        let (frac_bits, d) = (word(2), word(3) as usize);
        let body = &bytes[16..];
        if body.len() != 32 * d {
            return Err(bad("truncated body"));
        }
        let u = |k: usize| u64::from_le_bytes(body[8 * k..8 * k + 8].try_into().unwrap());
        let weights = (0..d).map(|i| Masked { m: u(4 * i), lam: [u(4 * i + 1), u(4 * i + 2), u(4 * i + 3)] }).collect();
        Ok(ModelShare { ring, frac_bits, weights })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ModelShare> {
        ModelShare::from_bytes(&std::fs::read(path)?)
    }
}
