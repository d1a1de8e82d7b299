//! C ABI for the wcfa library.
//!
//! Handles are opaque pointers owned by this library; every constructor has
//! a matching `_free`. Functions return a [`WcfaStatus`] code; on any
//! non-`OK` status the thread-local error message is readable through
//! [`wcfa_last_error`]. All paths and tags are NUL-terminated UTF-8.

// C entry points take raw pointers by contract; every function checks for
// null before dereferencing, validity beyond that is the caller's side of
// the ABI.
#![allow(clippy::not_unsafe_ptr_arg_deref)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use wcfa::artifact::ModelArtifact;
use wcfa::curve::{write_curve, CurveFormat, CurveRow, FaCurve};
use wcfa::data::{load_score_table, PairScoreTable, ScoreFormat};
use wcfa::estimator::{bootstrap_ci, worst_case_fa_empirical, FaQuery, SimConfig};
use wcfa::model::ModelSpec;
use wcfa::rng::{derive_seed, stream};
use wcfa::train::{extrapolate, train_discriminative, TrainConfig};
use wcfa::Error;

/// Status code of every fallible C-ABI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WcfaStatus {
    Ok = 0,
    /// File could not be read or written.
    IoError = 1,
    /// Input file or argument failed to parse.
    ParseError = 2,
    /// Arguments violate a precondition.
    InvalidArgument = 3,
    /// A panic or internal invariant failure; report as a bug.
    InternalError = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> WcfaStatus {
    match err {
        Error::Io { .. } => WcfaStatus::IoError,
        Error::MalformedRow { .. } | Error::NonFiniteScore { .. } | Error::VersionMismatch(_) => {
            WcfaStatus::ParseError
        }
        _ => WcfaStatus::InvalidArgument,
    }
}

/// Copies the last error message (UTF-8, NUL-terminated) into `buf` and
/// returns the full message length in bytes (excluding the NUL). Pass a
/// null `buf` to query the needed capacity.
#[no_mangle]
pub extern "C" fn wcfa_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Loaded, immutable score table.
pub struct WcfaTable(PairScoreTable);

/// Fitted or loaded model artifact.
pub struct WcfaModel(ModelArtifact);

/// Computed result curve.
pub struct WcfaCurve(FaCurve);

/// One curve record.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct WcfaCurveRow {
    pub n: u64,
    pub tau: f64,
    pub p_fa: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Optional knobs for `wcfa_fit`; zero-initialize and override what you
/// need, zero fields fall back to defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct WcfaFitOptions {
    pub seed: u64,
    pub steps: u32,
    pub batch_size: u32,
    pub trials_per_estimate: u32,
    pub n_train_max: u32,
    pub scores_per_pair: u32,
    pub learning_rate: f64,
    pub sigmoid_scale: f64,
    pub softmax_scale: f64,
}

fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, WcfaStatus> {
    if ptr.is_null() {
        set_error(format!("{what} is null"));
        return Err(WcfaStatus::InvalidArgument);
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        WcfaStatus::InvalidArgument
    })
}

fn read_slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], WcfaStatus> {
    if len == 0 {
        set_error(format!("{what} is empty"));
        return Err(WcfaStatus::InvalidArgument);
    }
    if ptr.is_null() {
        set_error(format!("{what} is null"));
        return Err(WcfaStatus::InvalidArgument);
    }
    Ok(unsafe { std::slice::from_raw_parts(ptr, len) })
}

fn guarded<T>(
    out: *mut *mut T,
    body: impl FnOnce() -> Result<T, WcfaStatus> + std::panic::UnwindSafe,
) -> WcfaStatus {
    if out.is_null() {
        set_error("output pointer is null");
        return WcfaStatus::InvalidArgument;
    }
    unsafe { *out = ptr::null_mut() };
    match catch_unwind(body) {
        Ok(Ok(value)) => {
            unsafe { *out = Box::into_raw(Box::new(value)) };
            set_error("");
            WcfaStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            WcfaStatus::InternalError
        }
    }
}

fn lib_err(e: Error) -> WcfaStatus {
    let status = status_of(&e);
    set_error(e.to_string());
    status
}

/// Loads and groups a score file. `format` is `"csv"` or `"jsonl"`;
/// `partition` may be null to accept a single-partition file as-is.
#[no_mangle]
pub extern "C" fn wcfa_table_load(
    path: *const c_char,
    format: *const c_char,
    partition: *const c_char,
    out: *mut *mut WcfaTable,
) -> WcfaStatus {
    guarded(out, || {
        let path = read_str(path, "path")?;
        let format = match read_str(format, "format")? {
            "csv" => ScoreFormat::Csv,
            "jsonl" => ScoreFormat::Jsonl,
            other => {
                set_error(format!("unknown score format {other:?}"));
                return Err(WcfaStatus::InvalidArgument);
            }
        };
        let partition = if partition.is_null() {
            None
        } else {
            Some(read_str(partition, "partition")?)
        };
        load_score_table(path, format, partition)
            .map(WcfaTable)
            .map_err(lib_err)
    })
}

#[no_mangle]
pub extern "C" fn wcfa_table_free(table: *mut WcfaTable) {
    if !table.is_null() {
        drop(unsafe { Box::from_raw(table) });
    }
}

/// Number of distinct ordered speaker pairs.
#[no_mangle]
pub extern "C" fn wcfa_table_pair_count(table: *const WcfaTable) -> usize {
    if table.is_null() {
        return 0;
    }
    unsafe { &*table }.0.n_pairs()
}

/// Total number of retained scores.
#[no_mangle]
pub extern "C" fn wcfa_table_score_count(table: *const WcfaTable) -> usize {
    if table.is_null() {
        return 0;
    }
    unsafe { &*table }.0.total_scores()
}

/// Empirical worst-case FA curve over the given `N` grid and thresholds,
/// with 99% percentile-bootstrap confidence intervals.
#[no_mangle]
pub extern "C" fn wcfa_estimate(
    table: *const WcfaTable,
    n_grid: *const u64,
    n_count: usize,
    taus: *const f64,
    tau_count: usize,
    trials: u32,
    seed: u64,
    out: *mut *mut WcfaCurve,
) -> WcfaStatus {
    guarded(out, || {
        if table.is_null() {
            set_error("table is null");
            return Err(WcfaStatus::InvalidArgument);
        }
        let table = &unsafe { &*table }.0;
        let n_grid = read_slice(n_grid, n_count, "n_grid")?;
        let taus = read_slice(taus, tau_count, "taus")?;
        let mut curve = FaCurve::new();
        for &n in n_grid {
            for (ti, &tau) in taus.iter().enumerate() {
                let est = worst_case_fa_empirical(
                    table,
                    &FaQuery {
                        n: n as usize,
                        tau,
                    },
                    &SimConfig {
                        trials: trials as usize,
                        seed: derive_seed(seed, &[n, ti as u64]),
                        with_replacement: false,
                    },
                )
                .map_err(lib_err)?;
                let mut rng = stream(seed, &[30, n, ti as u64]);
                let (lo, hi) = bootstrap_ci(&est.per_trial, 0.99, 1000, &mut rng);
                curve
                    .push(CurveRow {
                        n,
                        tau,
                        p_fa: est.p_fa,
                        ci_lo: lo.min(est.p_fa).max(0.0),
                        ci_hi: hi.max(est.p_fa).min(1.0),
                    })
                    .map_err(lib_err)?;
            }
        }
        Ok(WcfaCurve(curve))
    })
}

/// Fits a score model discriminatively. `family` is `"gaussian-ls"`,
/// `"pwl-ls"` or `"plda"`; `dim` applies to PLDA; `warp` adds a learnable
/// monotone score warp. `options` may be null for defaults.
#[no_mangle]
pub extern "C" fn wcfa_fit(
    table: *const WcfaTable,
    family: *const c_char,
    dim: u32,
    warp: bool,
    options: *const WcfaFitOptions,
    out: *mut *mut WcfaModel,
) -> WcfaStatus {
    guarded(out, || {
        if table.is_null() {
            set_error("table is null");
            return Err(WcfaStatus::InvalidArgument);
        }
        let table = &unsafe { &*table }.0;
        let family = read_str(family, "family")?;
        let opts = if options.is_null() {
            WcfaFitOptions::default()
        } else {
            unsafe { *options }
        };

        let warp_shape = if warp {
            let pooled = table.pooled_scores();
            let lo = pooled.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = pooled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            Some(ModelSpec::warp_for_range(lo, hi, 16).map_err(lib_err)?)
        } else {
            None
        };
        let spec = match family {
            "gaussian-ls" => ModelSpec::gaussian_ls(warp_shape),
            "pwl-ls" => ModelSpec::pwl_ls(16, warp_shape).map_err(lib_err)?,
            "plda" => ModelSpec::plda(dim as usize, warp_shape).map_err(lib_err)?,
            other => {
                set_error(format!("unknown model family {other:?}"));
                return Err(WcfaStatus::InvalidArgument);
            }
        };

        let defaults = TrainConfig::default();
        let pick_u = |v: u32, d: usize| if v == 0 { d } else { v as usize };
        let pick_f = |v: f64, d: f64| if v == 0.0 { d } else { v };
        let cfg = TrainConfig {
            t_train: pick_u(opts.trials_per_estimate, defaults.t_train),
            batch_size: pick_u(opts.batch_size, defaults.batch_size),
            lr: pick_f(opts.learning_rate, defaults.lr),
            steps: pick_u(opts.steps, defaults.steps),
            alpha: pick_f(opts.sigmoid_scale, defaults.alpha),
            beta: pick_f(opts.softmax_scale, defaults.beta),
            n_train_max: pick_u(opts.n_train_max, defaults.n_train_max),
            scores_per_pair: pick_u(opts.scores_per_pair, defaults.scores_per_pair),
            seed: opts.seed,
            ..defaults
        }
        .calibrated_to(table);

        let (artifact, _log) = train_discriminative(&spec, table, &cfg).map_err(lib_err)?;
        Ok(WcfaModel(artifact))
    })
}

/// Loads a model artifact saved by `wcfa_fit`/`wcfa_model_save`.
#[no_mangle]
pub extern "C" fn wcfa_model_load(path: *const c_char, out: *mut *mut WcfaModel) -> WcfaStatus {
    guarded(out, || {
        let path = read_str(path, "path")?;
        ModelArtifact::load(path).map(WcfaModel).map_err(lib_err)
    })
}

#[no_mangle]
pub extern "C" fn wcfa_model_save(model: *const WcfaModel, path: *const c_char) -> WcfaStatus {
    if model.is_null() {
        set_error("model is null");
        return WcfaStatus::InvalidArgument;
    }
    let path = match read_str(path, "path") {
        Ok(p) => p,
        Err(s) => return s,
    };
    match unsafe { &*model }.0.save(path) {
        Ok(()) => {
            set_error("");
            WcfaStatus::Ok
        }
        Err(e) => lib_err(e),
    }
}

#[no_mangle]
pub extern "C" fn wcfa_model_free(model: *mut WcfaModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Model-based worst-case FA curve; `N` may far exceed any observed
/// population.
#[no_mangle]
pub extern "C" fn wcfa_extrapolate(
    model: *const WcfaModel,
    n_grid: *const u64,
    n_count: usize,
    taus: *const f64,
    tau_count: usize,
    trials: u32,
    scores_per_pair: u32,
    seed: u64,
    out: *mut *mut WcfaCurve,
) -> WcfaStatus {
    guarded(out, || {
        if model.is_null() {
            set_error("model is null");
            return Err(WcfaStatus::InvalidArgument);
        }
        let model = &unsafe { &*model }.0;
        let n_grid = read_slice(n_grid, n_count, "n_grid")?;
        let taus = read_slice(taus, tau_count, "taus")?;
        let ns: Vec<usize> = n_grid.iter().map(|&n| n as usize).collect();
        extrapolate(
            model,
            &ns,
            taus,
            trials as usize,
            scores_per_pair.max(1) as usize,
            seed,
        )
        .map(WcfaCurve)
        .map_err(lib_err)
    })
}

/// Number of rows in a curve.
#[no_mangle]
pub extern "C" fn wcfa_curve_len(curve: *const WcfaCurve) -> usize {
    if curve.is_null() {
        return 0;
    }
    unsafe { &*curve }.0.rows().len()
}

/// Copies row `index` into `row`.
#[no_mangle]
pub extern "C" fn wcfa_curve_row(
    curve: *const WcfaCurve,
    index: usize,
    row: *mut WcfaCurveRow,
) -> WcfaStatus {
    if curve.is_null() || row.is_null() {
        set_error("curve or row is null");
        return WcfaStatus::InvalidArgument;
    }
    let rows = unsafe { &*curve }.0.rows();
    match rows.get(index) {
        Some(r) => {
            unsafe {
                *row = WcfaCurveRow {
                    n: r.n,
                    tau: r.tau,
                    p_fa: r.p_fa,
                    ci_lo: r.ci_lo,
                    ci_hi: r.ci_hi,
                };
            }
            set_error("");
            WcfaStatus::Ok
        }
        None => {
            set_error(format!("row index {index} out of range ({})", rows.len()));
            WcfaStatus::InvalidArgument
        }
    }
}

/// Writes a curve to disk; `format` is `"csv"`, `"json"` or `"svg"`.
#[no_mangle]
pub extern "C" fn wcfa_curve_write(
    curve: *const WcfaCurve,
    path: *const c_char,
    format: *const c_char,
) -> WcfaStatus {
    if curve.is_null() {
        set_error("curve is null");
        return WcfaStatus::InvalidArgument;
    }
    let result = catch_unwind(AssertUnwindSafe(|| -> Result<(), WcfaStatus> {
        let path = read_str(path, "path")?;
        let format = match read_str(format, "format")? {
            "csv" => CurveFormat::Csv,
            "json" => CurveFormat::Json,
            "svg" => CurveFormat::Svg,
            other => {
                set_error(format!("unknown curve format {other:?}"));
                return Err(WcfaStatus::InvalidArgument);
            }
        };
        write_curve(&unsafe { &*curve }.0, path, format).map_err(lib_err)
    }));
    match result {
        Ok(Ok(())) => {
            set_error("");
            WcfaStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal error: panic in wcfa_curve_write");
            WcfaStatus::InternalError
        }
    }
}

#[no_mangle]
pub extern "C" fn wcfa_curve_free(curve: *mut WcfaCurve) {
    if !curve.is_null() {
        drop(unsafe { Box::from_raw(curve) });
    }
}
