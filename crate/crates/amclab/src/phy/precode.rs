//! Zero-forcing downlink precoder and its post-equalization SINR.

use super::{LinkConfig, SinrVector};
use crate::channel::ChannelFrame;
use crate::linalg::{hermitian_eigenvalues, solve_hermitian, CMat};
use crate::{Error, Result};

/// Relative eigenvalue floor below which the user set is treated as
/// unservable by zero forcing.
const SINGULARITY_RATIO: f64 = 1e-12;

/// Zero-forcing precoder for one frame.
///
/// With G the n_ue x n_bs effective downlink matrix (the transpose of the
/// frame), the precoder is W0 = G^H (G G^H)^-1, stored as n_bs x n_ue with
/// one column per user, so that G W0 = I. Fails with a numeric error when
/// the Gram matrix's eigenvalue spread indicates a singular user set.
pub fn zf_precoder(frame: &ChannelFrame) -> Result<CMat> {
    let (n_bs, n_ue) = (frame.n_bs, frame.n_ue);
    if n_ue > n_bs {
        return Err(Error::Numeric(format!(
            "zero forcing needs at least as many antennas as users ({n_bs} < {n_ue})"
        )));
    }
    let g = CMat::from_fn(n_ue, n_bs, |k, a| frame.at(a, k));
    let gram = g.mul(&g.conj_t());
    let eig = hermitian_eigenvalues(&gram)?;
    let (max, min) = (eig[0], eig[n_ue - 1]);
    if !(min > SINGULARITY_RATIO * max) {
        return Err(Error::Numeric(format!(
            "singular user set: eigenvalue ratio {:e} below floor",
            if max > 0.0 { min / max } else { 0.0 }
        )));
    }
    // W0^H = (G G^H)^-1 G solves gram * X = G, then W0 = X^H.
    let x = solve_hermitian(&gram, &g)?;
    Ok(x.conj_t())
}

/// Post-equalization SINR per user under zero forcing.
///
/// Total transmit power splits evenly across users; with unit-gain forced
/// streams the k-th user sees sinr_k = P / (n_ue * noise * ||w0_k||^2).
///
/// # Example
/// ```
/// # use amclab::channel::ChannelFrame;
/// # use amclab::phy::{post_zf_sinr, zf_precoder, LinkConfig};
/// # use num_complex::Complex64;
/// let mut f = ChannelFrame { n_bs: 2, n_ue: 2, frame_index: 0, seed: 0,
///     re: vec![0.0; 4], im: vec![0.0; 4] };
/// f.set(0, 0, Complex64::new(1.0, 0.0));
/// f.set(1, 1, Complex64::new(2.0, 0.0));
/// let w0 = zf_precoder(&f).unwrap();
/// let link = LinkConfig { tx_power_w: 2.0, noise_power: 1.0, ..LinkConfig::default() };
/// let sinr = post_zf_sinr(&w0, &link).unwrap();
/// assert!((sinr.user(0) - 1.0).abs() < 1e-12);
/// assert!((sinr.user(1) - 4.0).abs() < 1e-12);
/// ```
pub fn post_zf_sinr(w0: &CMat, link: &LinkConfig) -> Result<SinrVector> {
    link.validate()?;
    let n_ue = w0.cols;
    let per_user = link.tx_power_w / n_ue as f64;
    let sinr: Vec<f64> = (0..n_ue)
        .map(|k| per_user / (link.noise_power * w0.col_norm_sqr(k)))
        .collect();
    SinrVector::new(sinr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{gen_static_frame, place_users, ScenarioConfig};
    use num_complex::Complex64;

    fn diag_frame(gains: &[f64]) -> ChannelFrame {
        let n = gains.len();
        let mut f = ChannelFrame {
            n_bs: n,
            n_ue: n,
            frame_index: 0,
            seed: 0,
            re: vec![0.0; n * n],
            im: vec![0.0; n * n],
        };
        for (k, &g) in gains.iter().enumerate() {
            f.set(k, k, Complex64::new(g, 0.0));
        }
        f
    }

    #[test]
    fn diagonal_channel_inverts_elementwise() {
        let f = diag_frame(&[1.0, 2.0]);
        let w0 = zf_precoder(&f).unwrap();
        assert!((w0.at(0, 0) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((w0.at(1, 1) - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        assert!(w0.at(0, 1).norm() < 1e-12 && w0.at(1, 0).norm() < 1e-12);

        let link = LinkConfig { tx_power_w: 2.0, noise_power: 1.0, ..LinkConfig::default() };
        let sinr = post_zf_sinr(&w0, &link).unwrap();
        assert!((sinr.user(0) - 1.0).abs() < 1e-12);
        assert!((sinr.user(1) - 4.0).abs() < 1e-12);
        assert!((sinr.user_db(1) - 10.0 * 4f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn random_channels_are_forced_to_identity() {
        let cfg = ScenarioConfig { master_seed: 31, ..ScenarioConfig::default() };
        for t in 0..20 {
            let geom = place_users(&cfg, t).unwrap();
            let frame = gen_static_frame(&cfg, &geom, t);
            let w0 = zf_precoder(&frame).unwrap();
            assert_eq!((w0.rows, w0.cols), (cfg.n_bs, cfg.n_ue));
            let g = CMat::from_fn(cfg.n_ue, cfg.n_bs, |k, a| frame.at(a, k));
            let prod = g.mul(&w0);
            for i in 0..cfg.n_ue {
                for j in 0..cfg.n_ue {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (prod.at(i, j) - Complex64::new(want, 0.0)).norm() < 1e-9,
                        "frame {t} entry ({i},{j}) = {}",
                        prod.at(i, j)
                    );
                }
            }
        }
    }

    #[test]
    fn duplicate_user_columns_are_rejected_as_singular() {
        let cfg = ScenarioConfig { master_seed: 8, ..ScenarioConfig::default() };
        let geom = place_users(&cfg, 0).unwrap();
        let mut frame = gen_static_frame(&cfg, &geom, 0);
        for a in 0..frame.n_bs {
            let v = frame.at(a, 0);
            frame.set(a, 1, v);
        }
        assert!(matches!(zf_precoder(&frame), Err(Error::Numeric(_))));
    }

    #[test]
    fn more_users_than_antennas_is_an_error() {
        let f = ChannelFrame {
            n_bs: 2,
            n_ue: 3,
            frame_index: 0,
            seed: 0,
            re: vec![1.0; 6],
            im: vec![0.0; 6],
        };
        assert!(zf_precoder(&f).is_err());
    }

    #[test]
    fn stronger_channels_give_higher_sinr() {
        // Scaling the whole channel up shrinks the precoder norms.
        let weak = diag_frame(&[1.0, 1.0]);
        let strong = diag_frame(&[3.0, 3.0]);
        let link = LinkConfig::default();
        let s_weak = post_zf_sinr(&zf_precoder(&weak).unwrap(), &link).unwrap();
        let s_strong = post_zf_sinr(&zf_precoder(&strong).unwrap(), &link).unwrap();
        for k in 0..2 {
            assert!(s_strong.user(k) > s_weak.user(k));
            assert!((s_strong.user(k) / s_weak.user(k) - 9.0).abs() < 1e-9);
        }
    }
}
