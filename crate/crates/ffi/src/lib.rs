//! C ABI over the four-party runtime.
//!
//! A `TridentSession` holds a configuration; each call runs all four
//! parties in-process on plaintext inputs (P1 and P2 act as input owners)
//! and writes the opened result. Every function returns a
//! [`TridentStatus`]; on failure, [`trident_last_error`] describes it.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use trident::adversary::{parse_scenarios, run_suite, BUNDLED_SUITE};
use trident::arith::mult;
use trident::bench::{bench, BenchParams, Protocol};
use trident::ml::{self, relu, sigmoid, train_plain, Dataset, Model, TrainParams};
use trident::sharing::{reconstruct, share};
use trident::{run, Config, Error, MsbMode, Ring, P1, P2};

/// Result of every exported call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TridentStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Abort = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TridentMsbMode {
    A2bFallback = 0,
    PaperBitext = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TridentModel {
    Linear = 0,
    Logistic = 1,
}

/// Measured cost of one protocol, totalled over all instances.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TridentCost {
    pub offline_rounds: u64,
    pub offline_bits: u64,
    pub online_rounds: u64,
    pub online_bits: u64,
    pub expected_online_rounds: u64,
    pub expected_online_bits_per_instance: u64,
    /// 1 when the measured cost equals the closed form exactly.
    pub pass: u8,
}

/// Opaque session handle.
pub struct TridentSession {
    cfg: Config,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TridentStatus {
    match e {
        Error::Parse { .. } | Error::Csv(_) => TridentStatus::Parse,
        Error::Io(_) => TridentStatus::Io,
        e if e.is_abort() => TridentStatus::Abort,
        _ => TridentStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic for `trident_last_error`.
fn guard(f: impl FnOnce() -> Result<(), Error>) -> TridentStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TridentStatus::Ok,
        Ok(Err(e)) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            TridentStatus::Panic
        }
    }
}

fn null(what: &str) -> Error {
    Error::InvalidArgument(format!("{what} is null"))
}

unsafe fn session<'a>(s: *const TridentSession) -> Result<&'a TridentSession, Error> {
    s.as_ref().ok_or_else(|| null("session"))
}

unsafe fn input<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Error> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn output<'a, T>(p: *mut T, n: usize, what: &str) -> Result<&'a mut [T], Error> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, n))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Error> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Error::InvalidArgument(format!("{what}: {e}")))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn trident_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a session over Z_{2^ring_bits} with `frac_bits` fractional bits.
///
/// # Safety
/// `seed` must point to `seed_len` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trident_session_new(
    seed: *const u8,
    seed_len: usize,
    ring_bits: u32,
    frac_bits: u32,
    out: *mut *mut TridentSession,
) -> TridentStatus {
    if out.is_null() {
        set_error("out is null".into());
        return TridentStatus::NullPointer;
    }
    guard(|| {
        let seed = input(seed, seed_len, "seed")?.to_vec();
        let ring = Ring::new(ring_bits)?;
        if frac_bits + 2 > ring.bits() {
            return Err(Error::InvalidArgument(format!("{frac_bits} fractional bits do not fit ℓ={ring_bits}")));
        }
        let cfg = Config { seed, ring, frac_bits, ..Config::default() };
        *out = Box::into_raw(Box::new(TridentSession { cfg }));
        Ok(())
    })
}

/// # Safety
/// `s` must come from `trident_session_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn trident_session_free(s: *mut TridentSession) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be a live session.
#[no_mangle]
pub unsafe extern "C" fn trident_session_set_msb_mode(s: *mut TridentSession, mode: TridentMsbMode) -> TridentStatus {
    if s.is_null() {
        set_error("session is null".into());
        return TridentStatus::NullPointer;
    }
    guard(|| {
        (*s).cfg.msb_mode = match mode {
            TridentMsbMode::A2bFallback => MsbMode::A2bFallback,
            TridentMsbMode::PaperBitext => MsbMode::PaperBitext,
        };
        Ok(())
    })
}

/// Fixed-point encoding of `x` in the session's ring.
///
/// # Safety
/// `s` must be a live session and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn trident_encode(s: *const TridentSession, x: f64, out: *mut u64) -> TridentStatus {
    guard(|| {
        let cfg = &session(s)?.cfg;
        *output(out, 1, "out")?.first_mut().expect("one slot") = ml::encode(cfg.ring, cfg.frac_bits, x)?;
        Ok(())
    })
}

/// # Safety
/// `s` must be a live session and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn trident_decode(s: *const TridentSession, raw: u64, out: *mut f64) -> TridentStatus {
    guard(|| {
        let cfg = &session(s)?.cfg;
        *output(out, 1, "out")?.first_mut().expect("one slot") = ml::decode(cfg.ring, cfg.frac_bits, raw);
        Ok(())
    })
}

/// Element-wise product of `x` (owned by P1) and `y` (owned by P2).
///
/// # Safety
/// `x`, `y` and `out` must each hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn trident_mult(
    s: *const TridentSession,
    x: *const u64,
    y: *const u64,
    n: usize,
    out: *mut u64,
) -> TridentStatus {
    guard(|| {
        let cfg = &session(s)?.cfg;
        let (x, y, out) = (input(x, n, "x")?, input(y, n, "y")?, output(out, n, "out")?);
        let ring = cfg.ring;
        let r = run(cfg, |p| {
            let a = share(p, P1, ring, x, n)?;
            let b = share(p, P2, ring, y, n)?;
            let z = mult(p, ring, &a, &b)?;
            reconstruct(p, ring, &z)
        });
        out.copy_from_slice(&r.into_values()?[0]);
        Ok(())
    })
}

type Activation = fn(&mut trident::Party, Ring, &[trident::sharing::Masked]) -> trident::Result<Vec<trident::sharing::Masked>>;

unsafe fn activation(s: *const TridentSession, x: *const u64, n: usize, out: *mut u64, f: Activation) -> TridentStatus {
    guard(|| {
        let cfg = &session(s)?.cfg;
        let (x, out) = (input(x, n, "x")?, output(out, n, "out")?);
        let ring = cfg.ring;
        let r = run(cfg, |p| {
            let a = share(p, P1, ring, x, n)?;
            let z = f(p, ring, &a)?;
            reconstruct(p, ring, &z)
        });
        out.copy_from_slice(&r.into_values()?[0]);
        Ok(())
    })
}

/// ReLU of fixed-point inputs owned by P1.
///
/// # Safety
/// `x` and `out` must each hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn trident_relu(s: *const TridentSession, x: *const u64, n: usize, out: *mut u64) -> TridentStatus {
    activation(s, x, n, out, relu)
}

/// Piecewise-linear sigmoid of fixed-point inputs owned by P1.
///
/// # Safety
/// `x` and `out` must each hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn trident_sigmoid(s: *const TridentSession, x: *const u64, n: usize, out: *mut u64) -> TridentStatus {
    activation(s, x, n, out, sigmoid)
}

#[allow(clippy::too_many_arguments)]
unsafe fn train_inputs(
    model: TridentModel,
    x: *const u64,
    y: *const u64,
    rows: usize,
    features: usize,
    iterations: usize,
    batch: usize,
    lr_log2: u32,
) -> Result<(Dataset, TrainParams), Error> {
    if rows == 0 || features == 0 || batch == 0 || batch > rows {
        return Err(Error::InvalidArgument("need rows, features and 1 <= batch <= rows".into()));
    }
    let n = rows.checked_mul(features).ok_or_else(|| Error::InvalidArgument("shape overflows".into()))?;
    let data = Dataset { features, x: input(x, n, "x")?.to_vec(), y: input(y, rows, "y")?.to_vec() };
    let model = match model {
        TridentModel::Linear => Model::Linear,
        TridentModel::Logistic => Model::Logistic,
    };
    let lr = ml::lr_shift(0.5f64.powi(lr_log2 as i32), batch)?;
    Ok((data, TrainParams { model, iterations, batch, lr_shift: lr }))
}

/// Trains on `rows` fixed-point samples owned by P1 and writes the opened
/// weights. `x` is row-major with `features` columns; the learning rate is
/// 2^-lr_log2.
///
/// # Safety
/// `x` must hold `rows * features` values, `y` `rows`, `weights` `features`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn trident_train(
    s: *const TridentSession,
    model: TridentModel,
    x: *const u64,
    y: *const u64,
    rows: usize,
    features: usize,
    iterations: usize,
    batch: usize,
    lr_log2: u32,
    weights: *mut u64,
) -> TridentStatus {
    guard(|| {
        let cfg = &session(s)?.cfg;
        let (data, params) = train_inputs(model, x, y, rows, features, iterations, batch, lr_log2)?;
        let out = output(weights, features, "weights")?;
        let ring = cfg.ring;
        let r = run(cfg, |p| {
            let w = ml::train(p, P1, &data, &params)?;
            reconstruct(p, ring, &w)
        });
        out.copy_from_slice(&r.into_values()?[0]);
        Ok(())
    })
}

/// The same training in the clear, for comparison.
///
/// # Safety
/// As for `trident_train`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn trident_train_plain(
    s: *const TridentSession,
    model: TridentModel,
    x: *const u64,
    y: *const u64,
    rows: usize,
    features: usize,
    iterations: usize,
    batch: usize,
    lr_log2: u32,
    weights: *mut u64,
) -> TridentStatus {
    guard(|| {
        let cfg = &session(s)?.cfg;
        let (data, params) = train_inputs(model, x, y, rows, features, iterations, batch, lr_log2)?;
        let out = output(weights, features, "weights")?;
        out.copy_from_slice(&train_plain(cfg.ring, cfg.frac_bits, &data, &params));
        Ok(())
    })
}

/// Measures `count` instances of the named protocol.
///
/// # Safety
/// `protocol` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn trident_bench(
    s: *const TridentSession,
    protocol: *const c_char,
    count: usize,
    out: *mut TridentCost,
) -> TridentStatus {
    guard(|| {
        let cfg = &session(s)?.cfg;
        let proto: Protocol = text(protocol, "protocol")?.parse()?;
        let out = output(out, 1, "out")?.first_mut().expect("one slot");
        let row = bench(cfg, proto, &BenchParams { count, ..BenchParams::default() })?;
        let m = &row.measured;
        *out = TridentCost {
            offline_rounds: m.offline.rounds,
            offline_bits: m.offline.payload_bits,
            online_rounds: m.online.rounds,
            online_bits: m.online.payload_bits,
            expected_online_rounds: row.online.rounds,
            expected_online_bits_per_instance: row.online.bits,
            pass: u8::from(row.pass()),
        };
        Ok(())
    })
}

/// Runs tamper scenarios (the bundled suite when `scenarios` is null) and
/// reports how many ran and how many broke the abort-or-correct guarantee.
///
/// # Safety
/// `scenarios` must be null or NUL-terminated; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn trident_adversary(
    s: *const TridentSession,
    scenarios: *const c_char,
    total: *mut usize,
    violations: *mut usize,
) -> TridentStatus {
    guard(|| {
        let cfg = &session(s)?.cfg;
        let src = if scenarios.is_null() { BUNDLED_SUITE } else { text(scenarios, "scenarios")? };
        let (total, violations) = (output(total, 1, "total")?, output(violations, 1, "violations")?);
        let report = run_suite(cfg, &parse_scenarios(src)?)?;
        total[0] = report.rows.len();
        violations[0] = report.violations();
        Ok(())
    })
}
