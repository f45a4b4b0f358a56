//! C ABI for the `netregime` library.
//!
//! Every fallible function returns an [`NrStatus`] and writes its result
//! through an out-pointer. On failure the message is available from
//! [`nr_last_error_message`] on the same thread until the next call.
//! Networks are exposed as opaque [`NrNetwork`] handles owned by the caller
//! and released with [`nr_network_free`]; strings returned by the library are
//! released with [`nr_string_free`].

#![allow(clippy::missing_safety_doc, clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use netregime::cutset::{evaluate_cutset, select_cut_width, upper_bound_exponent, CutsetOptions};
use netregime::harness::fit_exponent;
use netregime::network::{generate_network, snr_short};
use netregime::percolation::crossing_probability;
use netregime::regime::{classify, scheme_exponents, Scheme};
use netregime::scheme::{hc_throughput, multihop_throughput};
use netregime::{Constants, Error, NetworkInstance, PhysicalParams};

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    DegenerateInstance = 3,
    EmptyHalf = 4,
    OutOfRegime = 5,
    Numerical = 6,
    InsufficientData = 7,
    Certification = 8,
    Io = 9,
    Internal = 10,
    Panic = 11,
}

/// Opaque handle to a generated network.
pub struct NrNetwork {
    inner: NetworkInstance,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct NrRegimePoint {
    /// Regime number, 1 to 4.
    pub regime: u8,
    pub exponent: f64,
    pub on_snr_long_boundary: bool,
    pub on_snr_short_boundary: bool,
    pub on_alpha_three: bool,
}

/// Scheme identifiers used in [`NrSchemeExponents::optimal`].
pub const NR_SCHEME_MULTIHOP: u8 = 0;
pub const NR_SCHEME_HC: u8 = 1;
pub const NR_SCHEME_BURSTY_HC: u8 = 2;
pub const NR_SCHEME_HYBRID: u8 = 3;

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct NrSchemeExponents {
    pub multihop: f64,
    pub hierarchical: f64,
    /// Only meaningful when `hybrid_valid` is set.
    pub hybrid: f64,
    pub hybrid_valid: bool,
    pub optimal: u8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct NrCutsetSummary {
    pub w_hat: f64,
    pub snr_s: f64,
    pub dof_term: f64,
    pub power_term: f64,
    pub snr_total: f64,
    pub mc_logdet: f64,
    pub mc_stderr: f64,
    pub chain_holds: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct NrCrossingSummary {
    pub empirical_rate: f64,
    pub failure_rate: f64,
    pub failure_stderr: f64,
    pub analytic_bound: f64,
    pub flag: bool,
    pub all_certified: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct NrFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> NrStatus {
    match err {
        Error::InvalidParameter(_) | Error::Json(_) | Error::Csv(_) => NrStatus::InvalidParameter,
        Error::DegenerateInstance(_) => NrStatus::DegenerateInstance,
        Error::EmptyHalf { .. } => NrStatus::EmptyHalf,
        Error::OutOfRegime(_) => NrStatus::OutOfRegime,
        Error::Numerical(_) | Error::TableNotApplicable => NrStatus::Numerical,
        Error::InsufficientData(_) => NrStatus::InsufficientData,
        Error::Certification { .. } => NrStatus::Certification,
        Error::Io { .. } => NrStatus::Io,
        Error::Experiment(_) => NrStatus::Internal,
    }
}

/// Runs `f`, stores its value in `out` and translates errors and panics.
fn guard<T>(out: *mut T, f: impl FnOnce() -> netregime::Result<T>) -> NrStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    if out.is_null() {
        set_error("output pointer is null".into());
        return NrStatus::NullPointer;
    }
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => {
            unsafe { out.write(v) };
            NrStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            NrStatus::Panic
        }
    }
}

fn null_error(what: &str) -> netregime::Error {
    Error::InvalidParameter(format!("{what} is null"))
}

/// Message for the last failed call on this thread, or null if it succeeded.
/// The pointer stays valid until the next library call on this thread.
#[no_mangle]
pub extern "C" fn nr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Generates `n_pairs` source-destination pairs uniformly in a `2 sqrt(area) x sqrt(area)` rectangle.
#[no_mangle]
pub unsafe extern "C" fn nr_network_generate(
    n_pairs: usize,
    area: f64,
    seed: u64,
    out: *mut *mut NrNetwork,
) -> NrStatus {
    guard(out, || {
        let inner = generate_network(n_pairs, area, seed)?;
        Ok(Box::into_raw(Box::new(NrNetwork { inner })))
    })
}

/// Generates a network whose area gives `SNR_s = n^beta` under unit physical parameters.
#[no_mangle]
pub unsafe extern "C" fn nr_network_generate_for_beta(
    n_pairs: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    out: *mut *mut NrNetwork,
) -> NrStatus {
    guard(out, || {
        let params = PhysicalParams::unit(alpha)?;
        let area = params.area_for_snr(n_pairs, (n_pairs as f64).powf(beta))?;
        let inner = generate_network(n_pairs, area, seed)?;
        Ok(Box::into_raw(Box::new(NrNetwork { inner })))
    })
}

/// Releases a handle from one of the generate functions. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nr_network_free(network: *mut NrNetwork) {
    if !network.is_null() {
        drop(unsafe { Box::from_raw(network) });
    }
}

unsafe fn network_ref<'a>(network: *const NrNetwork) -> netregime::Result<&'a NetworkInstance> {
    unsafe { network.as_ref() }.map(|h| &h.inner).ok_or_else(|| null_error("network"))
}

/// Total node count, `2 n_pairs`.
#[no_mangle]
pub unsafe extern "C" fn nr_network_node_count(network: *const NrNetwork, out: *mut usize) -> NrStatus {
    guard(out, || Ok(unsafe { network_ref(network) }?.node_count()))
}

#[no_mangle]
pub unsafe extern "C" fn nr_network_area(network: *const NrNetwork, out: *mut f64) -> NrStatus {
    guard(out, || Ok(unsafe { network_ref(network) }?.area))
}

/// Serializes the network to JSON. Release the string with [`nr_string_free`].
#[no_mangle]
pub unsafe extern "C" fn nr_network_to_json(network: *const NrNetwork, out: *mut *mut c_char) -> NrStatus {
    guard(out, || {
        let json = unsafe { network_ref(network) }?.to_json()?;
        Ok(CString::new(json).map_err(|e| Error::InvalidParameter(e.to_string()))?.into_raw())
    })
}

/// Parses a network previously produced by [`nr_network_to_json`].
#[no_mangle]
pub unsafe extern "C" fn nr_network_from_json(json: *const c_char, out: *mut *mut NrNetwork) -> NrStatus {
    guard(out, || {
        if json.is_null() {
            return Err(null_error("json"));
        }
        let s = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let inner = NetworkInstance::from_json(s)?;
        Ok(Box::into_raw(Box::new(NrNetwork { inner })))
    })
}

/// Releases a string returned by the library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

#[no_mangle]
pub unsafe extern "C" fn nr_classify(alpha: f64, beta: f64, out: *mut NrRegimePoint) -> NrStatus {
    guard(out, || {
        let p = classify(alpha, beta)?;
        Ok(NrRegimePoint {
            regime: p.regime.id(),
            exponent: p.exponent,
            on_snr_long_boundary: p.boundary.snr_long_0db,
            on_snr_short_boundary: p.boundary.snr_short_0db,
            on_alpha_three: p.boundary.alpha_three,
        })
    })
}

/// Nearest-neighbour SNR under unit physical parameters.
#[no_mangle]
pub unsafe extern "C" fn nr_snr_short(n_pairs: usize, area: f64, alpha: f64, out: *mut f64) -> NrStatus {
    guard(out, || {
        if n_pairs == 0 || !(area > 0.0) {
            return Err(Error::InvalidParameter("n_pairs and area must be positive".into()));
        }
        Ok(snr_short(&PhysicalParams::unit(alpha)?, n_pairs, area))
    })
}

#[no_mangle]
pub unsafe extern "C" fn nr_upper_bound_exponent(alpha: f64, beta: f64, out: *mut f64) -> NrStatus {
    guard(out, || upper_bound_exponent(alpha, beta))
}

#[no_mangle]
pub unsafe extern "C" fn nr_scheme_exponents(alpha: f64, beta: f64, out: *mut NrSchemeExponents) -> NrStatus {
    guard(out, || {
        let s = scheme_exponents(alpha, beta)?;
        Ok(NrSchemeExponents {
            multihop: s.multihop,
            hierarchical: s.hierarchical,
            hybrid: s.hybrid.unwrap_or(f64::NAN),
            hybrid_valid: s.hybrid.is_some(),
            optimal: match s.optimal {
                Scheme::Multihop => NR_SCHEME_MULTIHOP,
                Scheme::HierarchicalCooperation => NR_SCHEME_HC,
                Scheme::BurstyHierarchicalCooperation => NR_SCHEME_BURSTY_HC,
                Scheme::Hybrid => NR_SCHEME_HYBRID,
            },
        })
    })
}

/// Aggregate multihop throughput in bits/s/Hz.
#[no_mangle]
pub unsafe extern "C" fn nr_multihop_throughput(n: usize, snr_s: f64, k2: f64, out: *mut f64) -> NrStatus {
    guard(out, || {
        let c = Constants {
            k2,
            ..Constants::default()
        };
        Ok(multihop_throughput(n, snr_s, &c)?.aggregate_t)
    })
}

/// Aggregate hierarchical-cooperation throughput with default constants.
#[no_mangle]
pub unsafe extern "C" fn nr_hc_throughput(n: usize, snr_s: f64, alpha: f64, bursty: bool, out: *mut f64) -> NrStatus {
    guard(out, || Ok(hc_throughput(n, snr_s, alpha, &Constants::default(), bursty)?.aggregate_t))
}

#[no_mangle]
pub unsafe extern "C" fn nr_select_cut_width(snr_s: f64, n: usize, alpha: f64, out: *mut f64) -> NrStatus {
    guard(out, || select_cut_width(snr_s, n, alpha))
}

/// Evaluates the cutset bound on `network` with default constants and the idealized cut.
#[no_mangle]
pub unsafe extern "C" fn nr_cutset_report(
    network: *const NrNetwork,
    alpha: f64,
    trials: usize,
    phase_seed: u64,
    out: *mut NrCutsetSummary,
) -> NrStatus {
    guard(out, || {
        let inst = unsafe { network_ref(network) }?;
        let opts = CutsetOptions {
            trials,
            phase_seed,
            ..CutsetOptions::default()
        };
        let r = evaluate_cutset(inst, &PhysicalParams::unit(alpha)?, &opts)?;
        Ok(NrCutsetSummary {
            w_hat: r.w_hat,
            snr_s: r.snr_s,
            dof_term: r.dof_term,
            power_term: r.power_term,
            snr_total: r.snr_total,
            mc_logdet: r.mc_logdet,
            mc_stderr: r.mc_stderr,
            chain_holds: r.chain_holds,
        })
    })
}

#[no_mangle]
pub unsafe extern "C" fn nr_crossing_probability(
    n: usize,
    c: f64,
    trials: usize,
    seed: u64,
    out: *mut NrCrossingSummary,
) -> NrStatus {
    guard(out, || {
        let s = crossing_probability(n, c, trials, seed)?;
        Ok(NrCrossingSummary {
            empirical_rate: s.empirical_rate,
            failure_rate: s.failure_rate,
            failure_stderr: s.failure_stderr,
            analytic_bound: s.analytic_bound,
            flag: s.flag,
            all_certified: s.all_certified,
        })
    })
}

/// Least-squares fit of `log y` against `log x` over `len` points.
#[no_mangle]
pub unsafe extern "C" fn nr_fit_exponent(xs: *const f64, ys: *const f64, len: usize, out: *mut NrFit) -> NrStatus {
    guard(out, || {
        if xs.is_null() || ys.is_null() {
            return Err(null_error("data array"));
        }
        let (xs, ys) = unsafe { (std::slice::from_raw_parts(xs, len), std::slice::from_raw_parts(ys, len)) };
        let points: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
        let f = fit_exponent(&points, None)?;
        Ok(NrFit {
            slope: f.slope,
            intercept: f.intercept,
            r_squared: f.r_squared,
        })
    })
}
