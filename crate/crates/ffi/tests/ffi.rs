use std::ffi::{CStr, CString};
use std::ptr;

use trident_ffi::*;

struct Session(*mut TridentSession);

impl Session {
    fn new(ring_bits: u32) -> Session {
        let seed = b"ffi";
        let mut s = ptr::null_mut();
        let st = unsafe { trident_session_new(seed.as_ptr(), seed.len(), ring_bits, 13, &mut s) };
        assert_eq!(st, TridentStatus::Ok);
        assert!(!s.is_null());
        Session(s)
    }

    fn encode(&self, x: f64) -> u64 {
        let mut v = 0;
        assert_eq!(unsafe { trident_encode(self.0, x, &mut v) }, TridentStatus::Ok);
        v
    }

    fn decode(&self, raw: u64) -> f64 {
        let mut v = 0.0;
        assert_eq!(unsafe { trident_decode(self.0, raw, &mut v) }, TridentStatus::Ok);
        v
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        unsafe { trident_session_free(self.0) };
    }
}

fn last_error() -> String {
    let p = trident_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn mult_matches_wrapping_product() {
    let s = Session::new(64);
    let x = [3u64, u64::MAX, 1 << 40, 0];
    let y = [5u64, 2, 1 << 30, 77];
    let mut out = [0u64; 4];
    assert_eq!(unsafe { trident_mult(s.0, x.as_ptr(), y.as_ptr(), 4, out.as_mut_ptr()) }, TridentStatus::Ok);
    let want: Vec<u64> = x.iter().zip(&y).map(|(a, b)| a.wrapping_mul(*b)).collect();
    assert_eq!(out.to_vec(), want);
}

#[test]
fn relu_and_sigmoid_on_fixed_point() {
    let s = Session::new(64);
    let xs = [-2.5, -0.25, 0.0, 0.25, 3.0];
    let raw: Vec<u64> = xs.iter().map(|x| s.encode(*x)).collect();
    let mut out = vec![0u64; xs.len()];
    assert_eq!(unsafe { trident_relu(s.0, raw.as_ptr(), raw.len(), out.as_mut_ptr()) }, TridentStatus::Ok);
    let got: Vec<f64> = out.iter().map(|v| s.decode(*v)).collect();
    assert_eq!(got, vec![0.0, 0.0, 0.0, 0.25, 3.0]);
    assert_eq!(unsafe { trident_sigmoid(s.0, raw.as_ptr(), raw.len(), out.as_mut_ptr()) }, TridentStatus::Ok);
    let got: Vec<f64> = out.iter().map(|v| s.decode(*v)).collect();
    let want = [0.0, 0.25, 0.5, 0.75, 1.0];
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() <= 2.0 / 8192.0, "{g} vs {w}");
    }
}

#[test]
fn paper_msb_mode_is_selectable() {
    let s = Session::new(64);
    assert_eq!(unsafe { trident_session_set_msb_mode(s.0, TridentMsbMode::PaperBitext) }, TridentStatus::Ok);
    let name = CString::new("relu").unwrap();
    let mut c = TridentCost::default();
    assert_eq!(unsafe { trident_bench(s.0, name.as_ptr(), 8, &mut c) }, TridentStatus::Ok);
    assert_eq!(c.pass, 1);
    assert_eq!(c.online_rounds, 4);
    assert_eq!(c.online_bits, 8 * (8 * 64 + 2));
}

#[test]
fn training_matches_the_plain_loop() {
    let s = Session::new(64);
    let rows = 16;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..rows {
        let (a, b) = ((i as f64 - 8.0) / 8.0, ((i * 5 % 16) as f64 - 8.0) / 8.0);
        x.extend([s.encode(a), s.encode(b)]);
        y.push(s.encode(0.5 * a - 0.25 * b));
    }
    let (mut secure, mut plain) = ([0u64; 2], [0u64; 2]);
    for (f, w) in [(trident_train as unsafe extern "C" fn(_, _, _, _, _, _, _, _, _, _) -> _, &mut secure), (trident_train_plain, &mut plain)] {
        let st = unsafe { f(s.0, TridentModel::Linear, x.as_ptr(), y.as_ptr(), rows, 2, 40, 4, 2, w.as_mut_ptr()) };
        assert_eq!(st, TridentStatus::Ok, "{}", last_error());
    }
    for (a, b) in secure.iter().zip(&plain) {
        assert!((s.decode(*a) - s.decode(*b)).abs() < 1e-2);
    }
    assert!((s.decode(secure[0]) - 0.5).abs() < 0.1);
}

#[test]
fn adversary_suite_reports_no_violations() {
    let s = Session::new(64);
    let text = CString::new("P1 mult mult.gamma add:1\nP0 rec rec.lam flip:3\n").unwrap();
    let (mut total, mut bad) = (0usize, 9usize);
    assert_eq!(unsafe { trident_adversary(s.0, text.as_ptr(), &mut total, &mut bad) }, TridentStatus::Ok);
    assert_eq!((total, bad), (2, 0));
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { trident_session_new(ptr::null(), 0, 63, 13, &mut h) }, TridentStatus::InvalidArgument);
    assert!(last_error().contains("63"));
    assert!(h.is_null());
    assert_eq!(unsafe { trident_session_new(ptr::null(), 0, 64, 13, ptr::null_mut()) }, TridentStatus::NullPointer);

    let s = Session::new(64);
    let mut out = [0u64; 2];
    assert_eq!(unsafe { trident_relu(s.0, ptr::null(), 2, out.as_mut_ptr()) }, TridentStatus::InvalidArgument);
    assert!(last_error().contains("x is null"));
    assert_eq!(unsafe { trident_relu(ptr::null(), ptr::null(), 0, out.as_mut_ptr()) }, TridentStatus::InvalidArgument);

    let name = CString::new("softmax").unwrap();
    let mut c = TridentCost::default();
    assert_eq!(unsafe { trident_bench(s.0, name.as_ptr(), 4, &mut c) }, TridentStatus::InvalidArgument);

    let bad = CString::new("P0 mult mult.gamma\n").unwrap();
    let (mut t, mut v) = (0, 0);
    assert_eq!(unsafe { trident_adversary(s.0, bad.as_ptr(), &mut t, &mut v) }, TridentStatus::Parse);
    assert!(last_error().contains("line 1"));

    let mut w = [0u64; 1];
    let st = unsafe { trident_train(s.0, TridentModel::Linear, out.as_ptr(), out.as_ptr(), 1, 1, 1, 1, 0, w.as_mut_ptr()) };
    assert_eq!(st, TridentStatus::Ok);
    let st = unsafe { trident_train(s.0, TridentModel::Linear, out.as_ptr(), out.as_ptr(), 1, 1, 1, 2, 0, w.as_mut_ptr()) };
    assert_eq!(st, TridentStatus::InvalidArgument);
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/trident.h")).unwrap();
    for f in [
        "trident_last_error",
        "trident_session_new",
        "trident_session_free",
        "trident_session_set_msb_mode",
        "trident_encode",
        "trident_decode",
        "trident_mult",
        "trident_relu",
        "trident_sigmoid",
        "trident_train",
        "trident_train_plain",
        "trident_bench",
        "trident_adversary",
    ] {
        assert!(h.contains(&format!("{f}(")), "{f} missing");
    }
    assert!(h.contains("typedef struct TridentSession TridentSession;"));
    assert!(h.contains("TRIDENT_STATUS_ABORT = 4"));
}
