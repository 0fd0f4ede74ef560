//! C ABI over `nhmm-core`.
//!
//! Conventions:
//! * Every fallible function returns an `int` status, `NHMM_OK` on success.
//! * On failure `nhmm_last_error()` gives a message for the calling thread. The
//!   pointer stays valid until the next failing call on that thread.
//! * Objects are opaque handles created by `*_load` / `nhmm_synthesize` and
//!   released with the matching `*_free`. Passing NULL to a free is a no-op.
//! * Panics never cross the boundary; they surface as `NHMM_ERR_PANIC`.
//! * A model handle is read-only after loading and may be shared across threads.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nhmm_core::lattice::{forward_loglik, model_lattice, EmissionLattice};
use nhmm_core::model::checkpoint::Checkpoint;
use nhmm_core::numerics::{AdamConfig, Tensor};
use nhmm_core::synthesis::{default_quantile, synthesize, AcousticMode, DurationMode, SynthesisOptions, Termination};
use nhmm_core::Error;

pub const NHMM_OK: c_int = 0;
/// A required pointer argument was NULL.
pub const NHMM_ERR_NULL: c_int = 1;
pub const NHMM_ERR_IO: c_int = 2;
/// Malformed checkpoint or feature file.
pub const NHMM_ERR_FORMAT: c_int = 3;
/// Bad data: unknown symbol, too few frames for the symbols, non-finite values.
pub const NHMM_ERR_INPUT: c_int = 4;
/// Invalid option values.
pub const NHMM_ERR_CONFIG: c_int = 5;
pub const NHMM_ERR_NUMERICAL: c_int = 6;
pub const NHMM_ERR_PANIC: c_int = 7;
/// Argument shapes or sizes are inconsistent.
pub const NHMM_ERR_CONTRACT: c_int = 8;

pub const NHMM_ACOUSTIC_MEAN: c_int = 0;
pub const NHMM_ACOUSTIC_SAMPLED: c_int = 1;
pub const NHMM_DURATION_QUANTILE: c_int = 0;
pub const NHMM_DURATION_SAMPLED: c_int = 1;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> c_int {
    match e {
        Error::Contract(_) => NHMM_ERR_CONTRACT,
        Error::Config(_) => NHMM_ERR_CONFIG,
        Error::Input(_) | Error::Infeasible { .. } | Error::TooManyPaths { .. } => NHMM_ERR_INPUT,
        Error::Format { .. } => NHMM_ERR_FORMAT,
        Error::Io(_) => NHMM_ERR_IO,
        Error::Numerical(_) => NHMM_ERR_NUMERICAL,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (c_int, String)>) -> c_int {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NHMM_OK,
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            NHMM_ERR_PANIC
        }
    }
}

fn core(e: Error) -> (c_int, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (c_int, String) {
    (NHMM_ERR_NULL, format!("{what} is NULL"))
}

/// Reads `len` elements; NULL is accepted only when `len` is 0.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (c_int, String)> {
    if len == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(null(what))
    } else {
        Ok(std::slice::from_raw_parts(p, len))
    }
}

/// A loaded checkpoint.
pub struct NhmmModel {
    ck: Checkpoint,
}

/// Output of `nhmm_synthesize`.
pub struct NhmmSynthResult {
    /// De-normalized frames, row-major `frames × dim`.
    data: Vec<f64>,
    frames: usize,
    dim: usize,
    alignment: Vec<usize>,
    durations: Vec<usize>,
    completed: bool,
}

/// Synthesis settings; fill with `nhmm_synth_options_default` first.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct NhmmSynthOptions {
    /// `NHMM_ACOUSTIC_MEAN` or `NHMM_ACOUSTIC_SAMPLED`.
    pub acoustic_mode: c_int,
    /// `NHMM_DURATION_QUANTILE` or `NHMM_DURATION_SAMPLED`.
    pub duration_mode: c_int,
    /// Quantile threshold in (0, 1).
    pub quantile: f64,
    /// Frame cap; 0 selects 30 frames per state.
    pub max_frames: usize,
    pub seed: u64,
    /// Non-zero keeps pre-net dropout on.
    pub dropout: c_int,
}

/// Message for the last failure on this thread, or NULL if none.
#[no_mangle]
pub extern "C" fn nhmm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nhmm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a checkpoint file. On success `*out` owns a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn nhmm_model_load(path: *const c_char, out: *mut *mut NhmmModel) -> c_int {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (NHMM_ERR_INPUT, "path is not UTF-8".to_string()))?;
        let (ck, _) = Checkpoint::load(path, AdamConfig::default()).map_err(core)?;
        *out = Box::into_raw(Box::new(NhmmModel { ck }));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle from `nhmm_model_load` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nhmm_model_free(model: *mut NhmmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn model_ref<'a>(model: *const NhmmModel) -> Result<&'a NhmmModel, (c_int, String)> {
    model.as_ref().ok_or_else(|| null("model"))
}

/// Feature dimension, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nhmm_model_acoustic_dim(model: *const NhmmModel) -> usize {
    model.as_ref().map_or(0, |m| m.ck.model.config().acoustic_dim)
}

/// HMM states per input symbol, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nhmm_model_states_per_symbol(model: *const NhmmModel) -> usize {
    model.as_ref().map_or(0, |m| m.ck.model.config().states_per_symbol)
}

/// Vocabulary size, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nhmm_model_vocab_size(model: *const NhmmModel) -> usize {
    model.as_ref().map_or(0, |m| m.ck.vocab.len())
}

/// Looks up the ID of `symbol`.
///
/// # Safety
/// `model` must be a live handle, `symbol` NUL-terminated, `out_id` writable.
#[no_mangle]
pub unsafe extern "C" fn nhmm_model_symbol_id(
    model: *const NhmmModel,
    symbol: *const c_char,
    out_id: *mut usize,
) -> c_int {
    guard(|| {
        let m = model_ref(model)?;
        if symbol.is_null() {
            return Err(null("symbol"));
        }
        if out_id.is_null() {
            return Err(null("out_id"));
        }
        let s = CStr::from_ptr(symbol).to_string_lossy();
        let id =
            m.ck.vocab
                .id(&s)
                .ok_or_else(|| (NHMM_ERR_INPUT, format!("unknown symbol {s:?}")))?;
        *out_id = id;
        Ok(())
    })
}

/// Deterministic defaults: mean frames, quantile durations, the model's default
/// threshold, dropout on, seed 0.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nhmm_synth_options_default(model: *const NhmmModel, out: *mut NhmmSynthOptions) -> c_int {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = default_options(m);
        Ok(())
    })
}

fn default_options(m: &NhmmModel) -> NhmmSynthOptions {
    NhmmSynthOptions {
        acoustic_mode: NHMM_ACOUSTIC_MEAN,
        duration_mode: NHMM_DURATION_QUANTILE,
        quantile: default_quantile(m.ck.model.config().states_per_symbol),
        max_frames: 0,
        seed: 0,
        dropout: 1,
    }
}

fn to_options(o: &NhmmSynthOptions) -> Result<SynthesisOptions, (c_int, String)> {
    let acoustic = match o.acoustic_mode {
        NHMM_ACOUSTIC_MEAN => AcousticMode::Mean,
        NHMM_ACOUSTIC_SAMPLED => AcousticMode::Sampled,
        v => return Err((NHMM_ERR_CONFIG, format!("unknown acoustic mode {v}"))),
    };
    let duration = match o.duration_mode {
        NHMM_DURATION_QUANTILE => DurationMode::Quantile,
        NHMM_DURATION_SAMPLED => DurationMode::Sampled,
        v => return Err((NHMM_ERR_CONFIG, format!("unknown duration mode {v}"))),
    };
    Ok(SynthesisOptions {
        acoustic,
        duration,
        quantile: o.quantile,
        state_quantiles: Default::default(),
        max_frames: (o.max_frames > 0).then_some(o.max_frames),
        seed: o.seed,
        dropout: o.dropout != 0,
    })
}

/// Generates frames for `symbols` (IDs). `options` may be NULL for defaults.
/// On success `*out` owns a new result handle.
///
/// # Safety
/// `model` must be a live handle, `symbols` must hold `len` IDs, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nhmm_synthesize(
    model: *const NhmmModel,
    symbols: *const usize,
    len: usize,
    options: *const NhmmSynthOptions,
    out: *mut *mut NhmmSynthResult,
) -> c_int {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let m = model_ref(model)?;
        let symbols = slice(symbols, len, "symbols")?;
        let opts = to_options(&options.as_ref().copied().unwrap_or_else(|| default_options(m)))?;
        let r = synthesize(&m.ck.model, symbols, &opts).map_err(core)?;
        let frames = m.ck.norm.invert(&r.frames).map_err(core)?;
        *out = Box::into_raw(Box::new(NhmmSynthResult {
            frames: frames.rows(),
            dim: frames.cols(),
            data: frames.data().to_vec(),
            alignment: r.alignment.states().to_vec(),
            durations: r.durations,
            completed: r.termination == Termination::Completed,
        }));
        Ok(())
    })
}

/// # Safety
/// `result` must be NULL or a handle from `nhmm_synthesize` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nhmm_synth_result_free(result: *mut NhmmSynthResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of generated frames, or 0 for NULL.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nhmm_synth_result_frames(result: *const NhmmSynthResult) -> usize {
    result.as_ref().map_or(0, |r| r.frames)
}

/// Frame dimension, or 0 for NULL.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nhmm_synth_result_dim(result: *const NhmmSynthResult) -> usize {
    result.as_ref().map_or(0, |r| r.dim)
}

/// Row-major `frames × dim` features, valid while the handle lives.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nhmm_synth_result_data(result: *const NhmmSynthResult) -> *const f64 {
    result.as_ref().map_or(ptr::null(), |r| r.data.as_ptr())
}

/// 0-based state index of every frame (`frames` entries).
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nhmm_synth_result_alignment(result: *const NhmmSynthResult) -> *const usize {
    result.as_ref().map_or(ptr::null(), |r| r.alignment.as_ptr())
}

/// Frames spent in each state; `*states` receives the state count.
///
/// # Safety
/// `result` must be NULL or a live handle; `states` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn nhmm_synth_result_durations(
    result: *const NhmmSynthResult,
    states: *mut usize,
) -> *const usize {
    match result.as_ref() {
        Some(r) => {
            if !states.is_null() {
                *states = r.durations.len();
            }
            r.durations.as_ptr()
        }
        None => ptr::null(),
    }
}

/// 1 if every state was visited and left, 0 if the frame cap stopped generation.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nhmm_synth_result_completed(result: *const NhmmSynthResult) -> c_int {
    result.as_ref().map_or(0, |r| r.completed as c_int)
}

/// Exact log likelihood of raw (unnormalized) `frames × dim` features given
/// symbol IDs, with pre-net dropout off. Returns the density of the normalized
/// features, as used in training.
///
/// # Safety
/// `symbols` must hold `len` IDs, `features` `frames·dim` values, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nhmm_loglik(
    model: *const NhmmModel,
    symbols: *const usize,
    len: usize,
    features: *const f64,
    frames: usize,
    dim: usize,
    out: *mut f64,
) -> c_int {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let symbols = slice(symbols, len, "symbols")?;
        let n = frames
            .checked_mul(dim)
            .ok_or_else(|| (NHMM_ERR_CONTRACT, "frames * dim overflows".to_string()))?;
        let data = slice(features, n, "features")?;
        if frames == 0 || dim != m.ck.model.config().acoustic_dim {
            return Err((
                NHMM_ERR_CONTRACT,
                format!(
                    "expected at least one frame of dimension {}",
                    m.ck.model.config().acoustic_dim
                ),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err((NHMM_ERR_INPUT, "features contain non-finite values".into()));
        }
        let x =
            m.ck.norm
                .apply(&Tensor::new(frames, dim, data.to_vec()))
                .map_err(core)?;
        let lat = model_lattice(&m.ck.model, symbols, &x).map_err(core)?;
        *out = forward_loglik(&lat).map_err(core)?;
        Ok(())
    })
}

/// Forward algorithm over a caller-supplied `frames × states` lattice
/// (row-major by frame): emission log densities and log transition pairs.
///
/// # Safety
/// Each array must hold `frames·states` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nhmm_forward_loglik(
    frames: usize,
    states: usize,
    emission: *const f64,
    log_tau: *const f64,
    log_stay: *const f64,
    out: *mut f64,
) -> c_int {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let n = frames
            .checked_mul(states)
            .ok_or_else(|| (NHMM_ERR_CONTRACT, "frames * states overflows".to_string()))?;
        let e = slice(emission, n, "emission")?.to_vec();
        let t = slice(log_tau, n, "log_tau")?.to_vec();
        let s = slice(log_stay, n, "log_stay")?.to_vec();
        let lat = EmissionLattice::new(frames, states, e, t, s).map_err(core)?;
        *out = forward_loglik(&lat).map_err(core)?;
        Ok(())
    })
}
