use std::ffi::{CStr, CString};
use std::ptr;

use hardy_tree_ffi::*;

fn chain(n: usize, u: f64, w: f64) -> *mut HtInstance {
    let parents: Vec<i64> = (0..n as i64).map(|k| k - 1).collect();
    let (uu, ww) = (vec![u; n], vec![w; n]);
    let mut inst = ptr::null_mut();
    let st = unsafe {
        ht_instance_from_parents(parents.as_ptr(), uu.as_ptr(), ww.as_ptr(), n, &mut inst)
    };
    assert_eq!(st, HtStatus::Ok);
    inst
}

fn last_error() -> String {
    let p = ht_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn single_vertex_norm_and_bound() {
    let inst = chain(1, 2.0, 3.0);
    let mut res = HtNormResult::default();
    let mut maximizer = [0.0];
    let st = unsafe {
        ht_operator_norm(
            inst,
            2.0,
            3.0,
            ptr::null(),
            &mut res,
            maximizer.as_mut_ptr(),
        )
    };
    assert_eq!(st, HtStatus::Ok);
    assert!((res.value - 6.0).abs() < 1e-12);
    assert!((maximizer[0] - 1.0).abs() < 1e-12);
    let mut b = HtBound::default();
    assert_eq!(
        unsafe { ht_theorem1_bound(inst, 2.0, 3.0, &mut b) },
        HtStatus::Ok
    );
    assert!((b.value - 6.0).abs() < 1e-12);
    unsafe { ht_instance_free(inst) };
}

#[test]
fn chain3_bound_and_summation() {
    let inst = chain(3, 1.0, 1.0);
    assert_eq!(unsafe { ht_instance_len(inst) }, 3);
    let mut b = HtBound::default();
    assert_eq!(
        unsafe { ht_theorem1_bound(inst, 2.0, 3.0, &mut b) },
        HtStatus::Ok
    );
    assert!((b.value - 2f64.powf(5.0 / 6.0)).abs() < 1e-12);
    assert_eq!(b.argmax, 1);
    assert!(b.in_regime);

    let f = [1.0, 2.0, 3.0];
    let mut g = [0.0; 3];
    assert_eq!(
        unsafe { ht_apply_summation(inst, f.as_ptr(), 3, g.as_mut_ptr()) },
        HtStatus::Ok
    );
    assert_eq!(g, [1.0, 3.0, 6.0]);
    assert_eq!(
        unsafe { ht_apply_summation(inst, f.as_ptr(), 2, g.as_mut_ptr()) },
        HtStatus::InvalidArgument
    );
    assert!(last_error().contains("dimension mismatch"));

    let mut opts = ht_solver_options_default();
    assert_eq!(opts.restarts, 32);
    opts.restarts = 4;
    let mut res = HtNormResult::default();
    let st = unsafe { ht_mixed_operator_norm(inst, 2.0, 3.0, &opts, &mut res, ptr::null_mut()) };
    assert_eq!(st, HtStatus::Ok);
    assert!(res.value >= b.value * (1.0 - 1e-9));
    unsafe { ht_instance_free(inst) };
}

#[test]
fn bennett_matches_chain_bound_on_a_path() {
    let u = [1.0, 0.5, 0.25, 2.0];
    let w = [0.3, 1.0, 0.1, 0.7];
    let mut b = HtBound::default();
    assert_eq!(
        unsafe { ht_bennett_bound(u.as_ptr(), w.as_ptr(), 4, 2.0, 3.0, &mut b) },
        HtStatus::Ok
    );
    let parents = [-1i64, 0, 1, 2];
    let mut inst = ptr::null_mut();
    unsafe { ht_instance_from_parents(parents.as_ptr(), u.as_ptr(), w.as_ptr(), 4, &mut inst) };
    let mut m = HtBound::default();
    unsafe { ht_theorem1_bound(inst, 2.0, 3.0, &mut m) };
    assert!((b.value - m.value).abs() <= 1e-12 * m.value);
    assert_eq!(
        unsafe { ht_bennett_bound(u.as_ptr(), w.as_ptr(), 4, 3.0, 2.0, &mut b) },
        HtStatus::InvalidArgument
    );
    unsafe { ht_instance_free(inst) };
}

#[test]
fn json_round_trip() {
    let text = CString::new(
        r#"{"root": 0, "vertices": [{"id": 0, "parent": null, "u": 0.1, "w": 0.2},
            {"id": 1, "parent": 0, "u": 0.3, "w": 0.7}]}"#,
    )
    .unwrap();
    let mut inst = ptr::null_mut();
    assert_eq!(
        unsafe { ht_instance_from_json(text.as_ptr(), &mut inst) },
        HtStatus::Ok
    );
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { ht_instance_to_json(inst, &mut s) }, HtStatus::Ok);
    let mut again = ptr::null_mut();
    assert_eq!(
        unsafe { ht_instance_from_json(s, &mut again) },
        HtStatus::Ok
    );
    let mut s2 = ptr::null_mut();
    unsafe { ht_instance_to_json(again, &mut s2) };
    assert_eq!(unsafe { CStr::from_ptr(s) }, unsafe { CStr::from_ptr(s2) });
    unsafe {
        ht_string_free(s);
        ht_string_free(s2);
        ht_instance_free(inst);
        ht_instance_free(again);
    }

    let bad = CString::new("{\"root\": 0}").unwrap();
    let mut none = ptr::null_mut();
    assert_eq!(
        unsafe { ht_instance_from_json(bad.as_ptr(), &mut none) },
        HtStatus::InvalidInput
    );
    assert!(none.is_null());
}

#[test]
fn partition_handle() {
    let n = 4;
    let parents: Vec<i64> = (0..n as i64).map(|k| k - 1).collect();
    let geo: Vec<f64> = (0..n).map(|k| 0.01f64.powi(k as i32)).collect();
    let mut inst = ptr::null_mut();
    unsafe { ht_instance_from_parents(parents.as_ptr(), geo.as_ptr(), geo.as_ptr(), n, &mut inst) };
    let mut part = ptr::null_mut();
    assert_eq!(
        unsafe { ht_partition_build(inst, 1.5, 2.0, 0.1, &mut part) },
        HtStatus::Ok
    );
    assert_eq!(unsafe { ht_partition_block_count(part) }, 4);
    let mut membership = [9usize; 4];
    assert_eq!(
        unsafe { ht_partition_membership(part, membership.as_mut_ptr(), 4) },
        HtStatus::Ok
    );
    assert_eq!(membership, [0, 1, 2, 3]);
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { ht_partition_reduced(part, &mut d) }, HtStatus::Ok);
    assert_eq!(unsafe { ht_instance_len(d) }, 4);
    let mut ok = false;
    assert_eq!(
        unsafe { ht_partition_verify(inst, part, &mut ok) },
        HtStatus::Ok
    );
    assert!(ok);
    assert_eq!(
        unsafe { ht_partition_build(inst, 1.5, 2.0, 1.5, &mut part) },
        HtStatus::InvalidArgument
    );
    unsafe {
        ht_instance_free(d);
        ht_partition_free(part);
        ht_instance_free(inst);
    }
}

#[test]
fn invalid_inputs_report_status() {
    let mut inst = ptr::null_mut();
    let u = [1.0, 1.0];
    let st = unsafe { ht_instance_from_parents(ptr::null(), u.as_ptr(), u.as_ptr(), 2, &mut inst) };
    assert_eq!(st, HtStatus::NullPointer);
    assert!(last_error().contains("parents"));

    let parents = [-1i64, -1];
    let st =
        unsafe { ht_instance_from_parents(parents.as_ptr(), u.as_ptr(), u.as_ptr(), 2, &mut inst) };
    assert_eq!(st, HtStatus::InvalidArgument);
    assert!(last_error().contains("multiple roots"));

    let neg = [-1.0, 1.0];
    let parents = [-1i64, 0];
    let st = unsafe {
        ht_instance_from_parents(parents.as_ptr(), neg.as_ptr(), u.as_ptr(), 2, &mut inst)
    };
    assert_eq!(st, HtStatus::InvalidArgument);

    let mut res = HtNormResult::default();
    let st = unsafe {
        ht_operator_norm(
            ptr::null(),
            2.0,
            3.0,
            ptr::null(),
            &mut res,
            ptr::null_mut(),
        )
    };
    assert_eq!(st, HtStatus::NullPointer);
    assert_eq!(unsafe { ht_instance_len(ptr::null()) }, 0);
    unsafe {
        ht_instance_free(ptr::null_mut());
        ht_partition_free(ptr::null_mut());
        ht_string_free(ptr::null_mut());
    }
}
