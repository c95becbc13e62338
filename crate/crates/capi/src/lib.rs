//! C ABI over the core toolkit: opaque handles for dictionaries and
//! sampling plans, flat interleaved buffers for sequences and maps, and
//! status codes with a per-thread error message.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use num_complex::Complex64;

use blip_mri::bloch::{BlochDictionary, ExcitationSequence, ParameterGrid, TissueParams};
use blip_mri::projection::project_image;
use blip_mri::recon::{blip, mrf_baseline, ReconConfig, StepsizeMode};
use blip_mri::sampling::{adjoint, forward, KSpaceData, SamplingPlan, SubsampledAxis};
use blip_mri::types::{GridDims, ImageSequence};
use blip_mri::Error;

/// Result of every C-ABI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlipStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NumericFailure = 4,
    IoFailure = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap();
    });
}

fn status_of(err: &Error) -> BlipStatus {
    match err {
        Error::DimensionMismatch { .. } | Error::Voxel { .. } => BlipStatus::DimensionMismatch,
        Error::SimulationFailure { .. }
        | Error::Divergence { .. }
        | Error::StepsizeUnderflow { .. }
        | Error::DegenerateSampling => BlipStatus::NumericFailure,
        Error::Io(_) | Error::Format { .. } => BlipStatus::IoFailure,
        _ => BlipStatus::InvalidArgument,
    }
}

fn fail(err: Error) -> BlipStatus {
    let status = status_of(&err);
    set_error(&err.to_string());
    status
}

fn guard(f: impl FnOnce() -> BlipStatus) -> BlipStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            BlipStatus::Panic
        }
    }
}

macro_rules! require_nonnull {
    ($($ptr:expr),+ $(,)?) => {
        $(
            if $ptr.is_null() {
                set_error(concat!("null argument: ", stringify!($ptr)));
                return BlipStatus::NullArgument;
            }
        )+
    };
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `cap`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to at least `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn blip_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn blip_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Opaque response dictionary handle.
pub struct BlipDictionary {
    inner: BlochDictionary,
}

/// Opaque sampling plan handle.
pub struct BlipPlan {
    inner: SamplingPlan,
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize) -> &'a [T] {
    std::slice::from_raw_parts(ptr, len)
}

unsafe fn complex_vec(ptr: *const f64, n: usize) -> Vec<Complex64> {
    slice(ptr, 2 * n)
        .chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect()
}

unsafe fn write_complex(out: *mut f64, data: &[Complex64]) {
    let out = std::slice::from_raw_parts_mut(out, 2 * data.len());
    for (pair, z) in out.chunks_exact_mut(2).zip(data) {
        pair[0] = z.re;
        pair[1] = z.im;
    }
}

unsafe fn excitation_from(
    flip_angles: *const f64,
    rep_times: *const f64,
    seq_len: usize,
) -> Result<ExcitationSequence, Error> {
    ExcitationSequence::new(
        slice(flip_angles, seq_len).to_vec(),
        slice(rep_times, seq_len).to_vec(),
    )
}

/// Simulate one unit-density response. `out` receives `seq_len` interleaved
/// complex samples.
///
/// # Safety
/// `flip_angles` and `rep_times` must point to `seq_len` doubles; `out` must
/// have room for `2 * seq_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn blip_simulate_response(
    t1_ms: f64,
    t2_ms: f64,
    df_hz: f64,
    flip_angles: *const f64,
    rep_times: *const f64,
    seq_len: usize,
    out: *mut f64,
) -> BlipStatus {
    guard(|| {
        require_nonnull!(flip_angles, rep_times, out);
        let theta = match TissueParams::new(t1_ms, t2_ms, df_hz) {
            Ok(t) => t,
            Err(e) => return fail(e),
        };
        let exc = match excitation_from(flip_angles, rep_times, seq_len) {
            Ok(e) => e,
            Err(e) => return fail(e),
        };
        match blip_mri::bloch::simulate_response(&theta, &exc) {
            Ok(resp) => {
                write_complex(out, &resp);
                BlipStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Build a response dictionary over the Cartesian product of the given
/// axes (filtered to `t2 <= t1`) under the given excitation.
///
/// # Safety
/// Axis pointers must address the stated number of doubles; `flip_angles`
/// and `rep_times` must address `seq_len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn blip_dictionary_build(
    t1_values: *const f64,
    num_t1: usize,
    t2_values: *const f64,
    num_t2: usize,
    df_values: *const f64,
    num_df: usize,
    flip_angles: *const f64,
    rep_times: *const f64,
    seq_len: usize,
    out: *mut *mut BlipDictionary,
) -> BlipStatus {
    guard(|| {
        require_nonnull!(t1_values, t2_values, df_values, flip_angles, rep_times, out);
        let grid = match ParameterGrid::new(
            slice(t1_values, num_t1).to_vec(),
            slice(t2_values, num_t2).to_vec(),
            slice(df_values, num_df).to_vec(),
        ) {
            Ok(g) => g,
            Err(e) => return fail(e),
        };
        let exc = match excitation_from(flip_angles, rep_times, seq_len) {
            Ok(e) => e,
            Err(e) => return fail(e),
        };
        match BlochDictionary::build(&grid, &exc) {
            Ok(dict) => {
                *out = Box::into_raw(Box::new(BlipDictionary { inner: dict }));
                BlipStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Load a dictionary from the binary format written by `blip_dictionary_save`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn blip_dictionary_load(
    path: *const c_char,
    out: *mut *mut BlipDictionary,
) -> BlipStatus {
    guard(|| {
        require_nonnull!(path, out);
        let path = match CStr::from_ptr(path).to_str() {
            Ok(s) => s,
            Err(_) => {
                set_error("path is not valid UTF-8");
                return BlipStatus::InvalidArgument;
            }
        };
        match blip_mri::io::load_dictionary(std::path::Path::new(path)) {
            Ok(dict) => {
                *out = Box::into_raw(Box::new(BlipDictionary { inner: dict }));
                BlipStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Save a dictionary to disk.
///
/// # Safety
/// `dict` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn blip_dictionary_save(
    dict: *const BlipDictionary,
    path: *const c_char,
) -> BlipStatus {
    guard(|| {
        require_nonnull!(dict, path);
        let path = match CStr::from_ptr(path).to_str() {
            Ok(s) => s,
            Err(_) => {
                set_error("path is not valid UTF-8");
                return BlipStatus::InvalidArgument;
            }
        };
        match blip_mri::io::save_dictionary(&(*dict).inner, std::path::Path::new(path)) {
            Ok(()) => BlipStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Number of atoms, or 0 for a null handle.
///
/// # Safety
/// `dict` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn blip_dictionary_num_atoms(dict: *const BlipDictionary) -> usize {
    if dict.is_null() {
        return 0;
    }
    (*dict).inner.num_atoms()
}

/// Sequence length, or 0 for a null handle.
///
/// # Safety
/// `dict` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn blip_dictionary_seq_len(dict: *const BlipDictionary) -> usize {
    if dict.is_null() {
        return 0;
    }
    (*dict).inner.seq_len()
}

/// Release a dictionary handle. Null is a no-op.
///
/// # Safety
/// `dict` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn blip_dictionary_free(dict: *mut BlipDictionary) {
    if !dict.is_null() {
        drop(Box::from_raw(dict));
    }
}

/// Create a sampling plan. `cols = 0` selects a 1-D grid of `rows` voxels;
/// `decimate_cols != 0` decimates the column axis instead of rows.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn blip_plan_create(
    p: usize,
    num_frames: usize,
    rows: usize,
    cols: usize,
    decimate_cols: i32,
    seed: u64,
    out: *mut *mut BlipPlan,
) -> BlipStatus {
    guard(|| {
        require_nonnull!(out);
        let grid = if cols == 0 {
            GridDims::OneD(rows)
        } else {
            GridDims::TwoD { rows, cols }
        };
        let axis = if decimate_cols != 0 {
            SubsampledAxis::Cols
        } else {
            SubsampledAxis::Rows
        };
        match SamplingPlan::new(p, num_frames, grid, axis, seed) {
            Ok(plan) => {
                *out = Box::into_raw(Box::new(BlipPlan { inner: plan }));
                BlipStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Samples kept per frame, or 0 for a null handle.
///
/// # Safety
/// `plan` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn blip_plan_samples_per_frame(plan: *const BlipPlan) -> usize {
    if plan.is_null() {
        return 0;
    }
    (*plan).inner.samples_per_frame()
}

/// Release a plan handle. Null is a no-op.
///
/// # Safety
/// `plan` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn blip_plan_free(plan: *mut BlipPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

unsafe fn image_from(plan: &SamplingPlan, image: *const f64) -> Result<ImageSequence, Error> {
    let n = plan.grid.num_voxels();
    let l = plan.num_frames();
    ImageSequence::from_data(plan.grid, l, complex_vec(image, n * l))
}

/// Apply the observation map. `image` holds `N*L` interleaved complex
/// entries (voxel-major); `out_kspace` receives `M*L` entries (frame-major).
///
/// # Safety
/// Buffers must match the plan's dimensions.
#[no_mangle]
pub unsafe extern "C" fn blip_forward(
    plan: *const BlipPlan,
    image: *const f64,
    out_kspace: *mut f64,
) -> BlipStatus {
    guard(|| {
        require_nonnull!(plan, image, out_kspace);
        let plan = &(*plan).inner;
        let x = match image_from(plan, image) {
            Ok(x) => x,
            Err(e) => return fail(e),
        };
        match forward(&x, plan) {
            Ok(y) => {
                write_complex(out_kspace, y.samples());
                BlipStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Apply the adjoint map: zero-fill and inverse DFT per frame.
///
/// # Safety
/// Buffers must match the plan's dimensions.
#[no_mangle]
pub unsafe extern "C" fn blip_adjoint(
    plan: *const BlipPlan,
    kspace: *const f64,
    out_image: *mut f64,
) -> BlipStatus {
    guard(|| {
        require_nonnull!(plan, kspace, out_image);
        let plan = &(*plan).inner;
        let m = plan.samples_per_frame();
        let samples = complex_vec(kspace, m * plan.num_frames());
        let y = match KSpaceData::from_parts(samples, plan.clone()) {
            Ok(y) => y,
            Err(e) => return fail(e),
        };
        match adjoint(&y) {
            Ok(x) => {
                write_complex(out_image, x.data());
                BlipStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

unsafe fn write_maps(
    maps: &blip_mri::projection::ParameterMaps,
    out_rho: *mut f64,
    out_t1: *mut f64,
    out_t2: *mut f64,
    out_df: *mut f64,
) {
    let n = maps.num_voxels();
    std::slice::from_raw_parts_mut(out_rho, n).copy_from_slice(&maps.rho);
    std::slice::from_raw_parts_mut(out_t1, n).copy_from_slice(&maps.t1);
    std::slice::from_raw_parts_mut(out_t2, n).copy_from_slice(&maps.t2);
    std::slice::from_raw_parts_mut(out_df, n).copy_from_slice(&maps.df);
}

/// Project every voxel sequence onto the dictionary cone and read out the
/// matched parameters.
///
/// # Safety
/// `image` and `out_image` hold `num_voxels * L` interleaved complex
/// entries; the map outputs hold `num_voxels` doubles each.
#[no_mangle]
pub unsafe extern "C" fn blip_project_image(
    dict: *const BlipDictionary,
    image: *const f64,
    num_voxels: usize,
    out_image: *mut f64,
    out_rho: *mut f64,
    out_t1: *mut f64,
    out_t2: *mut f64,
    out_df: *mut f64,
) -> BlipStatus {
    guard(|| {
        require_nonnull!(dict, image, out_image, out_rho, out_t1, out_t2, out_df);
        let dict = &(*dict).inner;
        let l = dict.seq_len();
        let x = match ImageSequence::from_data(
            GridDims::OneD(num_voxels),
            l,
            complex_vec(image, num_voxels * l),
        ) {
            Ok(x) => x,
            Err(e) => return fail(e),
        };
        match project_image(&x, dict) {
            Ok((seq, maps)) => {
                write_complex(out_image, seq.data());
                write_maps(&maps, out_rho, out_t1, out_t2, out_df);
                BlipStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Iterated-projection reconstruction from undersampled k-space.
/// `fixed_mu > 0` selects the fixed stepsize; otherwise the adaptive rule
/// is used. Map outputs may not be null; `out_iterations` may be null.
///
/// # Safety
/// `kspace` holds `M*L` interleaved complex entries for the plan;
/// `out_image` holds `N*L`; map outputs hold `N` doubles each.
#[no_mangle]
pub unsafe extern "C" fn blip_reconstruct(
    dict: *const BlipDictionary,
    plan: *const BlipPlan,
    kspace: *const f64,
    max_iters: usize,
    halt_tol: f64,
    fixed_mu: f64,
    out_image: *mut f64,
    out_rho: *mut f64,
    out_t1: *mut f64,
    out_t2: *mut f64,
    out_df: *mut f64,
    out_iterations: *mut usize,
) -> BlipStatus {
    guard(|| {
        require_nonnull!(dict, plan, kspace, out_image, out_rho, out_t1, out_t2, out_df);
        let dict = &(*dict).inner;
        let plan = &(*plan).inner;
        let m = plan.samples_per_frame();
        let samples = complex_vec(kspace, m * plan.num_frames());
        let y = match KSpaceData::from_parts(samples, plan.clone()) {
            Ok(y) => y,
            Err(e) => return fail(e),
        };
        let cfg = ReconConfig {
            max_iters,
            stepsize: if fixed_mu > 0.0 {
                StepsizeMode::Fixed(fixed_mu)
            } else {
                StepsizeMode::Adaptive
            },
            halt_tol,
        };
        match blip(&y, dict, &cfg, None) {
            Ok(res) => {
                write_complex(out_image, res.sequence.data());
                write_maps(&res.maps, out_rho, out_t1, out_t2, out_df);
                if !out_iterations.is_null() {
                    *out_iterations = res.trace.records.len();
                }
                BlipStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Matched-filter baseline: back projection scaled by `N/M`, then one
/// projection onto the dictionary cone.
///
/// # Safety
/// Buffer contracts as in `blip_reconstruct`.
#[no_mangle]
pub unsafe extern "C" fn blip_mrf_baseline(
    dict: *const BlipDictionary,
    plan: *const BlipPlan,
    kspace: *const f64,
    out_image: *mut f64,
    out_rho: *mut f64,
    out_t1: *mut f64,
    out_t2: *mut f64,
    out_df: *mut f64,
) -> BlipStatus {
    guard(|| {
        require_nonnull!(dict, plan, kspace, out_image, out_rho, out_t1, out_t2, out_df);
        let dict = &(*dict).inner;
        let plan = &(*plan).inner;
        let m = plan.samples_per_frame();
        let samples = complex_vec(kspace, m * plan.num_frames());
        let y = match KSpaceData::from_parts(samples, plan.clone()) {
            Ok(y) => y,
            Err(e) => return fail(e),
        };
        match mrf_baseline(&y, dict) {
            Ok((seq, maps)) => {
                write_complex(out_image, seq.data());
                write_maps(&maps, out_rho, out_t1, out_t2, out_df);
                BlipStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Image-sequence signal-to-error ratio in dB (clamped at +300).
///
/// # Safety
/// `truth` and `estimate` hold `num_voxels * num_frames` interleaved
/// complex entries each.
#[no_mangle]
pub unsafe extern "C" fn blip_ser_db(
    truth: *const f64,
    estimate: *const f64,
    num_voxels: usize,
    num_frames: usize,
    out: *mut f64,
) -> BlipStatus {
    guard(|| {
        require_nonnull!(truth, estimate, out);
        let grid = GridDims::OneD(num_voxels);
        let n = num_voxels * num_frames;
        let t = ImageSequence::from_data(grid, num_frames, complex_vec(truth, n));
        let e = ImageSequence::from_data(grid, num_frames, complex_vec(estimate, n));
        match (t, e) {
            (Ok(t), Ok(e)) => match blip_mri::analysis::ser_db(&t, &e) {
                Ok(v) => {
                    *out = v;
                    BlipStatus::Ok
                }
                Err(err) => fail(err),
            },
            (Err(err), _) | (_, Err(err)) => fail(err),
        }
    })
}
