//! C ABI for `hardy_tree`.
//!
//! Every function returns an [`HtStatus`]; on failure a description is
//! available from [`ht_last_error_message`] on the same thread. Handles are
//! opaque and must be released with the matching `*_free` function. Strings
//! returned by the library are released with [`ht_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use hardy_tree::bounds::{bennett_bound, theorem1_bound, BoundReport};
use hardy_tree::io::Instance;
use hardy_tree::operator::{apply_summation, mixed_operator_norm, operator_norm, SolverOptions};
use hardy_tree::partition::{
    build_partition, reduce, verify_partition, SigmaPartition, VerifyOptions,
};
use hardy_tree::{Error, Exponents, RootedTree, WeightPair};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SizeCapExceeded = 3,
    InvalidInput = 4,
    NonFinite = 5,
    Panic = 6,
    Internal = 7,
}

/// A rooted tree with weights `u`, `w`.
pub struct HtInstance(Instance);

/// A sigma-partition together with the exponents it was reduced with.
pub struct HtPartition {
    partition: SigmaPartition,
    exponents: Exponents,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HtSolverOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub certificate_starts: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HtNormResult {
    pub value: f64,
    pub iterations: usize,
    pub restarts_used: usize,
    pub converged: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HtBound {
    pub value: f64,
    pub argmax: usize,
    pub in_regime: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(HtStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::SizeCapExceeded { .. } => HtStatus::SizeCapExceeded,
            Error::NonFiniteIterate => HtStatus::NonFinite,
            Error::Format(_) | Error::Json(_) => HtStatus::InvalidInput,
            Error::Io(_) => HtStatus::Internal,
            _ => HtStatus::InvalidArgument,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(HtStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HtStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            HtStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn as_slice_mut<'a, T>(p: *mut T, n: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, n))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn check_len(expected: usize, found: usize) -> Result<(), Fail> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found }.into())
    }
}

fn bound_out(b: &BoundReport) -> HtBound {
    HtBound {
        value: b.value,
        argmax: b.argmax,
        in_regime: b.in_regime,
    }
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ht_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn ht_solver_options_default() -> HtSolverOptions {
    let d = SolverOptions::default();
    HtSolverOptions {
        restarts: d.restarts,
        max_iter: d.max_iter,
        tol: d.tol,
        seed: d.seed,
        certificate_starts: d.include_certificate_starts,
    }
}

/// Builds an instance from a parent array (`-1` marks the root).
///
/// # Safety
/// `parents`, `u` and `w` must point to `n` readable elements; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ht_instance_from_parents(
    parents: *const i64,
    u: *const f64,
    w: *const f64,
    n: usize,
    out: *mut *mut HtInstance,
) -> HtStatus {
    guard(|| {
        let parents = as_slice(parents, n, "parents")?;
        let mut ids = Vec::with_capacity(n);
        for (v, &p) in parents.iter().enumerate() {
            ids.push(match p {
                -1 => None,
                p if p >= 0 => Some(p as usize),
                p => {
                    return Err(Fail(
                        HtStatus::InvalidArgument,
                        format!("vertex {v} has parent {p}; use -1 for the root"),
                    ))
                }
            });
        }
        let tree = RootedTree::from_parents(&ids)?;
        let weights = WeightPair::for_tree(
            &tree,
            as_slice(u, n, "u")?.to_vec(),
            as_slice(w, n, "w")?.to_vec(),
        )?;
        let inst = Instance::new(tree, weights)?;
        write_out(out, Box::into_raw(Box::new(HtInstance(inst))), "out")
    })
}

/// Parses an instance from the JSON file format.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ht_instance_from_json(
    json: *const c_char,
    out: *mut *mut HtInstance,
) -> HtStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Fail(HtStatus::InvalidInput, e.to_string()))?;
        let inst = Instance::from_json(text)?;
        write_out(out, Box::into_raw(Box::new(HtInstance(inst))), "out")
    })
}

/// Serializes an instance; free the result with [`ht_string_free`].
///
/// # Safety
/// `inst` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ht_instance_to_json(
    inst: *const HtInstance,
    out: *mut *mut c_char,
) -> HtStatus {
    guard(|| {
        let text = as_ref(inst, "inst")?.0.to_json();
        let c = CString::new(text).expect("JSON has no NUL bytes");
        write_out(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `s` must come from this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn ht_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `inst` must come from this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn ht_instance_free(inst: *mut HtInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Number of vertices, or 0 for a null handle.
///
/// # Safety
/// `inst` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ht_instance_len(inst: *const HtInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.0.len())
}

/// `out[v] = w(v) Σ_{a <= v} u(a) f(a)`.
///
/// # Safety
/// `f` and `out` must hold `n` elements, `n` equal to the instance size.
#[no_mangle]
pub unsafe extern "C" fn ht_apply_summation(
    inst: *const HtInstance,
    f: *const f64,
    n: usize,
    out: *mut f64,
) -> HtStatus {
    guard(|| {
        let inst = &as_ref(inst, "inst")?.0;
        check_len(inst.len(), n)?;
        let g = apply_summation(&inst.tree, &inst.weights, as_slice(f, n, "f")?)?;
        as_slice_mut(out, n, "out")?.copy_from_slice(&g);
        Ok(())
    })
}

unsafe fn norm_common(
    inst: *const HtInstance,
    p: f64,
    q: f64,
    opts: *const HtSolverOptions,
    out: *mut HtNormResult,
    maximizer: *mut f64,
    mixed: bool,
) -> HtStatus {
    guard(|| {
        let inst = &as_ref(inst, "inst")?.0;
        let e = Exponents::new(p, q)?;
        let o = opts
            .as_ref()
            .copied()
            .unwrap_or_else(|| ht_solver_options_default());
        let solver = SolverOptions {
            restarts: o.restarts,
            max_iter: o.max_iter,
            tol: o.tol,
            seed: o.seed,
            include_certificate_starts: o.certificate_starts,
            ..SolverOptions::default()
        };
        let est = if mixed {
            mixed_operator_norm(&inst.tree, &inst.weights, &e, &solver)?
        } else {
            operator_norm(&inst.tree, &inst.weights, &e, &solver)?
        };
        if !maximizer.is_null() {
            as_slice_mut(maximizer, inst.len(), "maximizer")?.copy_from_slice(&est.maximizer);
        }
        let result = HtNormResult {
            value: est.value,
            iterations: est.iterations,
            restarts_used: est.restarts_used,
            converged: est.converged,
        };
        write_out(out, result, "out")
    })
}

/// Certified lower estimate of the `l_p -> l_q` norm. `opts` may be null for
/// defaults; `maximizer` may be null, otherwise it receives `n` values.
///
/// # Safety
/// Pointers must be valid as described.
#[no_mangle]
pub unsafe extern "C" fn ht_operator_norm(
    inst: *const HtInstance,
    p: f64,
    q: f64,
    opts: *const HtSolverOptions,
    out: *mut HtNormResult,
    maximizer: *mut f64,
) -> HtStatus {
    norm_common(inst, p, q, opts, out, maximizer, false)
}

/// As [`ht_operator_norm`], for the `l_q(l_p) -> l_q` norm over depth levels.
///
/// # Safety
/// Pointers must be valid as described for [`ht_operator_norm`].
#[no_mangle]
pub unsafe extern "C" fn ht_mixed_operator_norm(
    inst: *const HtInstance,
    p: f64,
    q: f64,
    opts: *const HtSolverOptions,
    out: *mut HtNormResult,
    maximizer: *mut f64,
) -> HtStatus {
    norm_common(inst, p, q, opts, out, maximizer, true)
}

/// `M = max_v ‖u‖_{p'}([root, v]) ‖w‖_q(T_v)`.
///
/// # Safety
/// `inst` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ht_theorem1_bound(
    inst: *const HtInstance,
    p: f64,
    q: f64,
    out: *mut HtBound,
) -> HtStatus {
    guard(|| {
        let inst = &as_ref(inst, "inst")?.0;
        let e = Exponents::new(p, q)?;
        let b = theorem1_bound(&inst.tree, &inst.weights, &e)?;
        write_out(out, bound_out(&b), "out")
    })
}

/// Chain criterion for sequences `u`, `w` of length `n`.
///
/// # Safety
/// `u` and `w` must hold `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ht_bennett_bound(
    u: *const f64,
    w: *const f64,
    n: usize,
    p: f64,
    q: f64,
    out: *mut HtBound,
) -> HtStatus {
    guard(|| {
        let e = Exponents::new(p, q)?;
        let b = bennett_bound(as_slice(u, n, "u")?, as_slice(w, n, "w")?, &e)?;
        write_out(out, bound_out(&b), "out")
    })
}

/// Builds and reduces the sigma-partition of `inst`.
///
/// # Safety
/// `inst` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ht_partition_build(
    inst: *const HtInstance,
    p: f64,
    q: f64,
    sigma: f64,
    out: *mut *mut HtPartition,
) -> HtStatus {
    guard(|| {
        let inst = &as_ref(inst, "inst")?.0;
        let e = Exponents::new(p, q)?;
        let (t, wt) = (&inst.tree, &inst.weights);
        let partition = reduce(t, wt, &e, build_partition(t, &wt.w, q, sigma)?)?;
        let handle = HtPartition {
            partition,
            exponents: e,
        };
        write_out(out, Box::into_raw(Box::new(handle)), "out")
    })
}

/// Number of blocks, or 0 for a null handle.
///
/// # Safety
/// `part` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ht_partition_block_count(part: *const HtPartition) -> usize {
    part.as_ref().map_or(0, |p| p.partition.block_count())
}

/// Block index of every vertex.
///
/// # Safety
/// `out` must hold `n` elements, `n` equal to the instance size.
#[no_mangle]
pub unsafe extern "C" fn ht_partition_membership(
    part: *const HtPartition,
    out: *mut usize,
    n: usize,
) -> HtStatus {
    guard(|| {
        let m = &as_ref(part, "part")?.partition.membership;
        check_len(m.len(), n)?;
        as_slice_mut(out, n, "out")?.copy_from_slice(m);
        Ok(())
    })
}

/// The reduced tree with block weights, as a new instance handle.
///
/// # Safety
/// `part` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ht_partition_reduced(
    part: *const HtPartition,
    out: *mut *mut HtInstance,
) -> HtStatus {
    guard(|| {
        let r = as_ref(part, "part")?
            .partition
            .reduced
            .as_ref()
            .expect("built partitions are reduced");
        let inst = Instance::new(r.tree.clone(), r.weights())?;
        write_out(out, Box::into_raw(Box::new(HtInstance(inst))), "out")
    })
}

/// Runs every partition check; `all_passed` receives the verdict.
///
/// # Safety
/// `inst` must be the instance `part` was built from; `all_passed` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ht_partition_verify(
    inst: *const HtInstance,
    part: *const HtPartition,
    all_passed: *mut bool,
) -> HtStatus {
    guard(|| {
        let inst = &as_ref(inst, "inst")?.0;
        let part = as_ref(part, "part")?;
        check_len(part.partition.membership.len(), inst.len())?;
        let report = verify_partition(
            &inst.tree,
            &inst.weights,
            &part.exponents,
            &part.partition,
            &VerifyOptions::default(),
        )?;
        if let Some(c) = report.checks.iter().find(|c| !c.passed) {
            set_last_error(format!("check {} failed: {}", c.name, c.detail));
        }
        write_out(all_passed, report.all_passed(), "all_passed")
    })
}

/// # Safety
/// `part` must come from this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn ht_partition_free(part: *mut HtPartition) {
    if !part.is_null() {
        drop(Box::from_raw(part));
    }
}
