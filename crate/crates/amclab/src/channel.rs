//! Clustered-scatterer fading channel for a uniform linear array downlink.
//!
//! A frame is the complex gain matrix between `n_bs` array elements and
//! `n_ue` single-antenna users. Each user's column mixes an optional
//! line-of-sight steering vector with a sum of scattered paths whose arrival
//! angles sit inside a narrow cluster; users that share a cluster share the
//! scatterer offsets, which is what makes their columns correlate. Static
//! scenarios redraw everything independently per frame index; mobile
//! scenarios advance user positions and evolve the diffuse part with a
//! first-order Gauss-Markov recursion whose coefficient follows the Jakes
//! autocorrelation at the configured speed.
//!
//! All randomness is counter-based: any (frame, user, scatterer) draw is
//! reproducible in isolation from the master seed.

use crate::rng::{tag, Stream};
use crate::special::bessel_j0;
use crate::{Error, Result};
use num_complex::Complex64;

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.99792458e8;

/// Element spacing in wavelengths for the uniform linear array.
pub const ELEMENT_SPACING_WL: f64 = 0.5;

/// How user azimuths are laid out at placement time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlacementMode {
    /// Azimuths separated by at least twice the cluster spread, each user
    /// scattering independently.
    Uncorrelated,
    /// All users inside one cluster, sharing its scatterers.
    OneCluster,
    /// Users split evenly across two clusters with well-separated centers.
    TwoClusters,
    /// Independent uniform azimuths over the full circle.
    RandomPlacement,
}

impl PlacementMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlacementMode::Uncorrelated => "uncorrelated",
            PlacementMode::OneCluster => "one_cluster",
            PlacementMode::TwoClusters => "two_clusters",
            PlacementMode::RandomPlacement => "random",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uncorrelated" => Ok(PlacementMode::Uncorrelated),
            "one_cluster" => Ok(PlacementMode::OneCluster),
            "two_clusters" => Ok(PlacementMode::TwoClusters),
            "random" => Ok(PlacementMode::RandomPlacement),
            other => Err(Error::Config(format!("unknown placement mode: {other}"))),
        }
    }
}

/// Line-of-sight condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LosState {
    /// Rician mixing with the configured K factor.
    Los,
    /// Pure scattering (K = 0).
    Nlos,
}

impl LosState {
    pub fn as_str(&self) -> &'static str {
        match self {
            LosState::Los => "los",
            LosState::Nlos => "nlos",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "los" => Ok(LosState::Los),
            "nlos" => Ok(LosState::Nlos),
            other => Err(Error::Config(format!("unknown line-of-sight state: {other}"))),
        }
    }
}

/// Whether frames are independent draws or a temporally correlated chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mobility {
    Static,
    Mobile,
}

impl Mobility {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mobility::Static => "static",
            Mobility::Mobile => "mobile",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(Mobility::Static),
            "mobile" => Ok(Mobility::Mobile),
            other => Err(Error::Config(format!("unknown mobility: {other}"))),
        }
    }
}

/// Full description of one simulated cell scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub n_bs: usize,
    pub n_ue: usize,
    pub mode: PlacementMode,
    pub los: LosState,
    pub mobility: Mobility,
    /// Scattered paths per cluster.
    pub n_scatterers: usize,
    /// Half-width of a cluster's angular extent, radians.
    pub cluster_spread_rad: f64,
    /// Rician K factor in dB, applied only under line of sight.
    pub rician_k_db: f64,
    /// User speed, m/s. Zero freezes geometry and the fading chain.
    pub speed_mps: f64,
    pub carrier_hz: f64,
    /// Frame duration, seconds.
    pub frame_s: f64,
    pub cell_radius_m: f64,
    pub master_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_bs: 32,
            n_ue: 4,
            mode: PlacementMode::Uncorrelated,
            los: LosState::Nlos,
            mobility: Mobility::Static,
            n_scatterers: 8,
            cluster_spread_rad: 0.05,
            rician_k_db: 10.0,
            speed_mps: 0.0,
            carrier_hz: 3.6e9,
            frame_s: 1e-3,
            cell_radius_m: 100.0,
            master_seed: 1,
        }
    }
}

/// Azimuth band users are placed in, radians. Kept inside the half-plane
/// where a linear array resolves angles unambiguously, except for
/// `RandomPlacement` which deliberately spans the full circle.
const AZIMUTH_LIMIT: f64 = 1.2;

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bs == 0 || self.n_ue == 0 {
            return Err(Error::Config("array and user counts must be positive".into()));
        }
        if self.n_ue > self.n_bs {
            return Err(Error::Config(format!(
                "cannot zero-force {} users with {} antennas",
                self.n_ue, self.n_bs
            )));
        }
        if self.n_scatterers == 0 {
            return Err(Error::Config("need at least one scatterer per cluster".into()));
        }
        if !(self.cluster_spread_rad > 0.0 && self.cluster_spread_rad < std::f64::consts::PI) {
            return Err(Error::Config(format!(
                "cluster_spread_rad must lie in (0, pi), got {}",
                self.cluster_spread_rad
            )));
        }
        match self.mode {
            PlacementMode::Uncorrelated => {
                let slot = 2.0 * AZIMUTH_LIMIT / self.n_ue as f64;
                if slot / 2.0 <= self.cluster_spread_rad {
                    return Err(Error::Config(format!(
                        "{} users cannot keep 2x spread {} separation inside the placement band",
                        self.n_ue, self.cluster_spread_rad
                    )));
                }
            }
            PlacementMode::OneCluster => {
                if self.cluster_spread_rad >= AZIMUTH_LIMIT {
                    return Err(Error::Config(
                        "cluster spread exceeds the placement band".into(),
                    ));
                }
            }
            PlacementMode::TwoClusters => {
                if self.n_ue % 2 != 0 {
                    return Err(Error::Config(format!(
                        "two_clusters placement needs an even user count, got {}",
                        self.n_ue
                    )));
                }
                // Centers live in [2*spread, limit - spread] on each side.
                if 3.0 * self.cluster_spread_rad >= AZIMUTH_LIMIT {
                    return Err(Error::Config(
                        "cluster spread too wide for two separated clusters".into(),
                    ));
                }
            }
            PlacementMode::RandomPlacement => {}
        }
        if !(self.speed_mps >= 0.0 && self.speed_mps.is_finite()) {
            return Err(Error::Config(format!("speed_mps must be non-negative, got {}", self.speed_mps)));
        }
        if self.mobility == Mobility::Static && self.speed_mps != 0.0 {
            return Err(Error::Config("static scenarios must have zero speed".into()));
        }
        if !(self.carrier_hz > 0.0 && self.frame_s > 0.0 && self.cell_radius_m > 0.0) {
            return Err(Error::Config("carrier, frame duration, and cell radius must be positive".into()));
        }
        Ok(())
    }
}

/// Positions and motion of the users at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct UserGeometry {
    /// Azimuth of each user as seen from the array, radians.
    pub azimuth_rad: Vec<f64>,
    /// Distance from the array, meters, in (0, cell_radius].
    pub distance_m: Vec<f64>,
    /// Direction each user moves in, radians, fixed per episode.
    pub velocity_dir_rad: Vec<f64>,
    /// Cluster id per user; users with equal ids share scatterer offsets.
    pub cluster: Vec<usize>,
}

/// One channel realization: column k is user k's complex gain vector,
/// stored as separate real and imaginary planes in row-major
/// (antenna, user) order. Every entry is finite.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelFrame {
    pub n_bs: usize,
    pub n_ue: usize,
    pub frame_index: u32,
    /// Master seed of the episode that produced this frame.
    pub seed: u64,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ChannelFrame {
    fn zeros(n_bs: usize, n_ue: usize, frame_index: u32, seed: u64) -> Self {
        ChannelFrame {
            n_bs,
            n_ue,
            frame_index,
            seed,
            re: vec![0.0; n_bs * n_ue],
            im: vec![0.0; n_bs * n_ue],
        }
    }

    #[inline]
    pub fn at(&self, antenna: usize, user: usize) -> Complex64 {
        let i = antenna * self.n_ue + user;
        Complex64::new(self.re[i], self.im[i])
    }

    #[inline]
    pub fn set(&mut self, antenna: usize, user: usize, v: Complex64) {
        let i = antenna * self.n_ue + user;
        self.re[i] = v.re;
        self.im[i] = v.im;
    }

    /// Squared Euclidean norm of one user's column.
    pub fn col_norm_sqr(&self, user: usize) -> f64 {
        (0..self.n_bs).map(|a| self.at(a, user).norm_sqr()).sum()
    }

    pub fn assert_finite(&self) -> Result<()> {
        if self.re.iter().chain(self.im.iter()).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numeric(format!("non-finite channel entry in frame {}", self.frame_index)))
        }
    }
}

/// Array response of the uniform linear array toward an azimuth:
/// element m carries phase 2 pi spacing m sin(azimuth).
///
/// # Example
/// ```
/// let a = amclab::channel::steering_vector(2, 0.5, std::f64::consts::FRAC_PI_2);
/// assert!((a[0].re - 1.0).abs() < 1e-12);
/// assert!((a[1].re + 1.0).abs() < 1e-12);
/// ```
pub fn steering_vector(n_bs: usize, spacing_wl: f64, azimuth_rad: f64) -> Vec<Complex64> {
    let k = 2.0 * std::f64::consts::PI * spacing_wl * azimuth_rad.sin();
    (0..n_bs).map(|m| Complex64::from_polar(1.0, k * m as f64)).collect()
}

/// Draw user positions for one frame of an episode.
///
/// Post-conditions per mode: `Uncorrelated` guarantees pairwise azimuth gaps
/// of at least twice the cluster spread; `OneCluster` keeps every azimuth
/// within one spread of a common center; `TwoClusters` splits users evenly
/// across two centers at least four spreads apart; `RandomPlacement` draws
/// independent uniform azimuths over the full circle.
pub fn place_users(cfg: &ScenarioConfig, frame_index: u32) -> Result<UserGeometry> {
    cfg.validate()?;
    let mut s = Stream::new(cfg.master_seed, &[tag::PLACEMENT, frame_index as u64]);
    let n = cfg.n_ue;
    let spread = cfg.cluster_spread_rad;
    let mut azimuth = vec![0.0; n];
    let mut cluster = vec![0usize; n];
    match cfg.mode {
        PlacementMode::Uncorrelated => {
            // Slot grid with jitter; worst-case neighbor gap is exactly 2x spread.
            let slot = 2.0 * AZIMUTH_LIMIT / n as f64;
            let jitter = slot / 2.0 - spread;
            for (k, az) in azimuth.iter_mut().enumerate() {
                let center = -AZIMUTH_LIMIT + slot * (k as f64 + 0.5);
                *az = center + s.range(-jitter, jitter);
                cluster[k] = k;
            }
        }
        PlacementMode::OneCluster => {
            let center = s.range(-(AZIMUTH_LIMIT - spread), AZIMUTH_LIMIT - spread);
            for (k, az) in azimuth.iter_mut().enumerate() {
                *az = center + s.range(-spread, spread);
                cluster[k] = 0;
            }
        }
        PlacementMode::TwoClusters => {
            let lo = s.range(-(AZIMUTH_LIMIT - spread), -2.0 * spread);
            let hi = s.range(2.0 * spread, AZIMUTH_LIMIT - spread);
            for (k, az) in azimuth.iter_mut().enumerate() {
                let (center, id) = if k < n / 2 { (lo, 0) } else { (hi, 1) };
                *az = center + s.range(-spread, spread);
                cluster[k] = id;
            }
        }
        PlacementMode::RandomPlacement => {
            for (k, az) in azimuth.iter_mut().enumerate() {
                *az = s.range(-std::f64::consts::PI, std::f64::consts::PI);
                cluster[k] = k;
            }
        }
    }
    // Uniform over the disc: radius scales with sqrt of a uniform draw.
    let distance: Vec<f64> = (0..n).map(|_| cfg.cell_radius_m * s.uniform().sqrt().max(1e-3)).collect();
    let velocity: Vec<f64> = (0..n)
        .map(|_| s.range(-std::f64::consts::PI, std::f64::consts::PI))
        .collect();
    Ok(UserGeometry { azimuth_rad: azimuth, distance_m: distance, velocity_dir_rad: velocity, cluster })
}

/// Geometry after `frame_index` frames of straight-line motion at the
/// configured speed. Positions are recomputed from the frame-zero state, so
/// the result is independent of evaluation order.
pub fn geometry_at(cfg: &ScenarioConfig, start: &UserGeometry, frame_index: u32) -> UserGeometry {
    if cfg.speed_mps == 0.0 || frame_index == 0 {
        return start.clone();
    }
    let step = cfg.speed_mps * cfg.frame_s * frame_index as f64;
    let mut out = start.clone();
    for k in 0..start.azimuth_rad.len() {
        let (x0, y0) = (
            start.distance_m[k] * start.azimuth_rad[k].cos(),
            start.distance_m[k] * start.azimuth_rad[k].sin(),
        );
        let x = x0 + step * start.velocity_dir_rad[k].cos();
        let y = y0 + step * start.velocity_dir_rad[k].sin();
        // atan2 can land on +pi exactly; keep azimuths in [-pi, pi).
        let mut az = y.atan2(x);
        if az >= std::f64::consts::PI {
            az -= 2.0 * std::f64::consts::PI;
        }
        out.azimuth_rad[k] = az;
        out.distance_m[k] = (x * x + y * y).sqrt().max(1e-3);
    }
    out
}

/// Rician K factor as a linear ratio for the scenario.
fn k_factor(cfg: &ScenarioConfig) -> f64 {
    match cfg.los {
        LosState::Los => 10f64.powf(cfg.rician_k_db / 10.0),
        LosState::Nlos => 0.0,
    }
}

/// Line-of-sight component of user k's column (zero under NLOS).
fn los_mean(cfg: &ScenarioConfig, geom: &UserGeometry, user: usize) -> Vec<Complex64> {
    let k = k_factor(cfg);
    let w = (k / (k + 1.0)).sqrt();
    steering_vector(cfg.n_bs, ELEMENT_SPACING_WL, geom.azimuth_rad[user])
        .into_iter()
        .map(|a| a * w)
        .collect()
}

/// One independent channel realization for the given geometry.
///
/// User k's column is sqrt(K/(K+1)) a(azimuth_k) plus sqrt(1/(K+1)) times
/// the average of `n_scatterers` paths g a(azimuth_k + delta), where the
/// offsets delta are drawn within one cluster spread and shared by every
/// user of the cluster, and each path gain g is an independent standard
/// complex normal. The column norm is n_bs in expectation. Deterministic
/// given (master_seed, frame_index).
pub fn gen_static_frame(cfg: &ScenarioConfig, geom: &UserGeometry, frame_index: u32) -> ChannelFrame {
    let l = cfg.n_scatterers;
    let mut frame = ChannelFrame::zeros(cfg.n_bs, cfg.n_ue, frame_index, cfg.master_seed);
    let k = k_factor(cfg);
    let scatter_w = (1.0 / (k + 1.0)).sqrt() / (l as f64).sqrt();
    for user in 0..cfg.n_ue {
        let mut col: Vec<Complex64> = los_mean(cfg, geom, user);
        let cluster = geom.cluster[user] as u64;
        for path in 0..l {
            let mut angle_s = Stream::new(
                cfg.master_seed,
                &[tag::SCATTER_ANGLE, frame_index as u64, cluster, path as u64],
            );
            let delta = angle_s.range(-cfg.cluster_spread_rad, cfg.cluster_spread_rad);
            let mut gain_s = Stream::new(
                cfg.master_seed,
                &[tag::FADING, frame_index as u64, user as u64, path as u64],
            );
            let g = gain_s.complex_normal() * scatter_w;
            let a = steering_vector(cfg.n_bs, ELEMENT_SPACING_WL, geom.azimuth_rad[user] + delta);
            for (dst, av) in col.iter_mut().zip(a) {
                *dst += g * av;
            }
        }
        for (antenna, v) in col.into_iter().enumerate() {
            frame.set(antenna, user, v);
        }
    }
    frame
}

/// Frame-to-frame fading correlation at a given speed: the Jakes model
/// autocorrelation J0(2 pi f_D T) with Doppler f_D = speed * carrier / c.
///
/// # Example
/// ```
/// let rho = amclab::channel::doppler_rho(2.8, 3.6e9, 1e-3);
/// assert!((rho - 0.98889).abs() < 1e-3);
/// assert_eq!(amclab::channel::doppler_rho(0.0, 3.6e9, 1e-3), 1.0);
/// ```
pub fn doppler_rho(speed_mps: f64, carrier_hz: f64, frame_s: f64) -> f64 {
    let doppler = speed_mps * carrier_hz / SPEED_OF_LIGHT;
    bessel_j0(2.0 * std::f64::consts::PI * doppler * frame_s).clamp(-1.0, 1.0)
}

/// Advance a mobile chain by one frame.
///
/// The scattered part follows H_t = rho (H_{t-1} - mean_{t-1})
/// + sqrt(1 - rho^2) (W_t - mean_t) around the line-of-sight mean at each
/// instant, where W_t is an independent innovation frame drawn at the
/// geometry users reach after `frame_index` frames of motion from
/// `start_geom`. Recursing on the scattered part only keeps the per-entry
/// marginal identical to the one `gen_static_frame` draws, for any K factor
/// (a recursion on the full matrix would inflate the line-of-sight mean by
/// sqrt((1+rho)/(1-rho))). At rho = 1 the frame is returned unchanged apart
/// from its index.
pub fn evolve_frame(
    prev: &ChannelFrame,
    rho: f64,
    cfg: &ScenarioConfig,
    start_geom: &UserGeometry,
    frame_index: u32,
) -> Result<ChannelFrame> {
    if !(rho.is_finite() && rho.abs() <= 1.0) {
        return Err(Error::Config(format!("correlation coefficient must lie in [-1, 1], got {rho}")));
    }
    if rho == 1.0 {
        let mut same = prev.clone();
        same.frame_index = frame_index;
        return Ok(same);
    }
    let innov_w = (1.0 - rho * rho).sqrt();
    let geom_prev = geometry_at(cfg, start_geom, prev.frame_index);
    let geom_now = geometry_at(cfg, start_geom, frame_index);
    let innovation = gen_static_frame(cfg, &geom_now, frame_index);
    let mut frame = ChannelFrame::zeros(cfg.n_bs, cfg.n_ue, frame_index, cfg.master_seed);
    for user in 0..cfg.n_ue {
        let mean_prev = los_mean(cfg, &geom_prev, user);
        let mean_now = los_mean(cfg, &geom_now, user);
        for antenna in 0..cfg.n_bs {
            let diffuse_prev = prev.at(antenna, user) - mean_prev[antenna];
            let diffuse_innov = innovation.at(antenna, user) - mean_now[antenna];
            frame.set(
                antenna,
                user,
                mean_now[antenna] + rho * diffuse_prev + innov_w * diffuse_innov,
            );
        }
    }
    Ok(frame)
}

/// Generate an episode of `t_len` frames starting at `start_index`.
///
/// Static scenarios redraw placement and fading independently per frame
/// index. Mobile scenarios place users at episode frame zero, advance their
/// geometry to `start_index`, draw the first frame there, then evolve frame
/// by frame with the scenario's Doppler correlation. Either way the output
/// is a pure function of (config, master_seed, start_index). Returns the
/// frames plus the frame-zero geometry.
pub fn gen_sequence(
    cfg: &ScenarioConfig,
    t_len: u32,
    start_index: u32,
) -> Result<(Vec<ChannelFrame>, UserGeometry)> {
    cfg.validate()?;
    if t_len == 0 {
        return Err(Error::Config("sequence length must be at least 1".into()));
    }
    let start = place_users(cfg, 0)?;
    let mut frames = Vec::with_capacity(t_len as usize);
    match cfg.mobility {
        Mobility::Static => {
            for t in start_index..start_index + t_len {
                let geom = place_users(cfg, t)?;
                let f = gen_static_frame(cfg, &geom, t);
                f.assert_finite()?;
                frames.push(f);
            }
        }
        Mobility::Mobile => {
            let rho = doppler_rho(cfg.speed_mps, cfg.carrier_hz, cfg.frame_s);
            for t in start_index..start_index + t_len {
                let f = if t == start_index {
                    let geom = geometry_at(cfg, &start, t);
                    gen_static_frame(cfg, &geom, t)
                } else {
                    evolve_frame(frames.last().unwrap(), rho, cfg, &start, t)?
                };
                f.assert_finite()?;
                frames.push(f);
            }
        }
    }
    Ok((frames, start))
}
