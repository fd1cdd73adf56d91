//! Exercises the C entry points exactly as a foreign caller would: through
//! raw pointers and status codes.

use std::ffi::{c_char, CStr, CString};

use amclab_capi::*;

fn last_error() -> String {
    let mut buf = vec![0u8; 256];
    let n = unsafe { amclab_last_error(buf.as_mut_ptr() as *mut c_char, buf.len()) };
    let n = n.min(buf.len() - 1);
    String::from_utf8_lossy(&buf[..n]).into_owned()
}

fn new_lab(config: &str) -> *mut Lab {
    let text = CString::new(config).unwrap();
    let mut lab: *mut Lab = std::ptr::null_mut();
    let code = unsafe { amclab_lab_new(text.as_ptr(), &mut lab) };
    assert_eq!(code, AMCLAB_OK, "{}", last_error());
    assert!(!lab.is_null());
    lab
}

#[test]
fn version_is_a_readable_static_string() {
    let p = amclab_version();
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap();
    assert!(s.starts_with("amclab"));
    // Stable across calls (same static storage).
    assert_eq!(p, amclab_version());
}

#[test]
fn lab_lifecycle_and_geometry() {
    let lab = new_lab("channel.n_bs=8\nchannel.n_ue=2\ndata.window=3\ndata.catalog=mini\n");
    let (mut n_bs, mut n_ue, mut window) = (0usize, 0usize, 0usize);
    let code = unsafe { amclab_lab_geometry(lab, &mut n_bs, &mut n_ue, &mut window) };
    assert_eq!(code, AMCLAB_OK);
    assert_eq!((n_bs, n_ue, window), (8, 2, 3));
    let mut count = 0usize;
    assert_eq!(unsafe { amclab_lab_scenario_count(lab, &mut count) }, AMCLAB_OK);
    assert_eq!(count, 2);
    unsafe { amclab_lab_free(lab) };
    // Freeing null is a no-op.
    unsafe { amclab_lab_free(std::ptr::null_mut()) };
}

#[test]
fn null_arguments_and_bad_config_report_codes_and_messages() {
    let mut lab: *mut Lab = std::ptr::null_mut();
    let code = unsafe { amclab_lab_new(std::ptr::null(), &mut lab) };
    assert_eq!(code, AMCLAB_NULL_ARGUMENT);

    let bad = CString::new("no.such.key=1\n").unwrap();
    let code = unsafe { amclab_lab_new(bad.as_ptr(), &mut lab) };
    assert_eq!(code, AMCLAB_CONFIG_ERROR);
    assert!(last_error().contains("no.such.key"), "{}", last_error());
    assert!(lab.is_null());

    // Truncation still nul-terminates and reports the full length.
    let mut tiny = [0u8; 4];
    let n = unsafe { amclab_last_error(tiny.as_mut_ptr() as *mut c_char, tiny.len()) };
    assert!(n > 3);
    assert_eq!(tiny[3], 0);
}

#[test]
fn oracle_matches_the_native_call_across_the_sweep() {
    let lab = new_lab("");
    let table = amclab::phy::McsTable::builtin();
    let link = amclab::phy::LinkConfig::default();
    for i in 0..200 {
        let sinr_db = -10.0 + i as f64 * 0.25;
        let mut got = 0u8;
        let code = unsafe { amclab_lab_oracle_mcs(lab, sinr_db, &mut got) };
        assert_eq!(code, AMCLAB_OK);
        let want = amclab::phy::oracle_mcs(10f64.powf(sinr_db / 10.0), &table, &link);
        assert_eq!(got, want, "at {sinr_db} dB");
    }
    let mut got = 0u8;
    assert_eq!(
        unsafe { amclab_lab_oracle_mcs(lab, f64::NAN, &mut got) },
        AMCLAB_NUMERIC_ERROR
    );
    unsafe { amclab_lab_free(lab) };
}

#[test]
fn ber_entry_points_agree_with_the_library() {
    let lab = new_lab("");
    let mut ber = -1.0;
    assert_eq!(unsafe { amclab_qam_ber(16, 10.0, &mut ber) }, AMCLAB_OK);
    let want = amclab::phy::qam_ber_uncoded(10.0, 16).unwrap();
    assert_eq!(ber, want);
    assert_eq!(unsafe { amclab_qam_ber(15, 10.0, &mut ber) }, AMCLAB_CONFIG_ERROR);

    let mut coded = -1.0;
    assert_eq!(unsafe { amclab_lab_coded_ber(lab, 12.0, 17, &mut coded) }, AMCLAB_OK);
    assert!(coded > 0.0 && coded < 0.5);
    assert_eq!(
        unsafe { amclab_lab_coded_ber(lab, 12.0, 9, &mut coded) },
        AMCLAB_DATA_ERROR
    );
    unsafe { amclab_lab_free(lab) };
}

#[test]
fn doppler_rho_matches_and_validates() {
    let mut rho = 0.0;
    assert_eq!(unsafe { amclab_doppler_rho(3.0, 3.6e9, 1e-3, &mut rho) }, AMCLAB_OK);
    assert_eq!(rho, amclab::channel::doppler_rho(3.0, 3.6e9, 1e-3));
    assert_eq!(
        unsafe { amclab_doppler_rho(f64::INFINITY, 3.6e9, 1e-3, &mut rho) },
        AMCLAB_NUMERIC_ERROR
    );
}

#[test]
fn channel_frames_fill_caller_buffers_deterministically() {
    let cfg = "channel.n_bs=8\nchannel.n_ue=2\ndata.catalog=mini\n";
    let lab = new_lab(cfg);
    let (n_bs, n_ue, t) = (8usize, 2usize, 4u32);
    let len = t as usize * n_bs * n_ue * 2;
    let mut a = vec![0.0f64; len];
    let code = unsafe { amclab_lab_channel_frames(lab, 0, 0, t, a.as_mut_ptr(), len) };
    assert_eq!(code, AMCLAB_OK, "{}", last_error());
    assert!(a.iter().any(|&v| v != 0.0));
    assert!(a.iter().all(|v| v.is_finite()));

    // Same request, fresh lab: identical bytes.
    let lab2 = new_lab(cfg);
    let mut b = vec![0.0f64; len];
    assert_eq!(
        unsafe { amclab_lab_channel_frames(lab2, 0, 0, t, b.as_mut_ptr(), len) },
        AMCLAB_OK
    );
    assert_eq!(a, b);

    // Wrong buffer size and bad scenario index are rejected.
    assert_eq!(
        unsafe { amclab_lab_channel_frames(lab, 0, 0, t, a.as_mut_ptr(), len - 1) },
        AMCLAB_DATA_ERROR
    );
    assert_eq!(
        unsafe { amclab_lab_channel_frames(lab, 9, 0, t, a.as_mut_ptr(), len) },
        AMCLAB_DATA_ERROR
    );
    unsafe {
        amclab_lab_free(lab);
        amclab_lab_free(lab2);
    }
}

#[test]
fn frame_labels_match_the_oracle_entry_point() {
    let lab = new_lab("channel.n_bs=8\nchannel.n_ue=2\ndata.catalog=mini\n");
    let (n_ue, t) = (2usize, 5u32);
    let len = t as usize * n_ue;
    let mut sinr_db = vec![0.0f64; len];
    let mut mcs = vec![0u8; len];
    let code = unsafe {
        amclab_lab_frame_labels(lab, 0, 0, t, sinr_db.as_mut_ptr(), mcs.as_mut_ptr(), len)
    };
    assert_eq!(code, AMCLAB_OK, "{}", last_error());
    for i in 0..len {
        assert!((10..=24).contains(&mcs[i]));
        let mut from_oracle = 0u8;
        assert_eq!(
            unsafe { amclab_lab_oracle_mcs(lab, sinr_db[i], &mut from_oracle) },
            AMCLAB_OK
        );
        assert_eq!(mcs[i], from_oracle);
    }
    assert_eq!(
        unsafe {
            amclab_lab_frame_labels(lab, 0, 0, t, sinr_db.as_mut_ptr(), mcs.as_mut_ptr(), len + 1)
        },
        AMCLAB_DATA_ERROR
    );
    unsafe { amclab_lab_free(lab) };
}
