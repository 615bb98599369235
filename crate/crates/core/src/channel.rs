//! Line-of-sight link budget and per-slot link capacities.
//!
//! Received power is `tx_power - fspl(d) - shadowing` over the inter-antenna
//! distance `vehicle_separation + vehicle_length`. A full-duplex receiver that
//! is itself transmitting in the same slot sees its own signal leaking through
//! the on-board antenna separation (`vehicle_length`) and attenuated by
//! `sic_level`. All powers add in the linear domain.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{LinkId, LinkSet, Topology};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Coherence {
    /// Fresh shadowing draw every slot.
    PerSlot,
    /// One draw per frame; capacities are constant within a frame.
    #[default]
    PerFrame,
}

/// Radio parameters. Frequencies in Hz, powers in dBm, gains and losses in
/// dB, lengths in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub carrier_freq: f64,
    pub bandwidth: f64,
    pub tx_power: f64,
    pub shadowing_mean: f64,
    pub shadowing_std: f64,
    /// Thermal noise power spectral density in dBm/Hz.
    pub noise_psd: f64,
    pub noise_figure: f64,
    pub sic_level: f64,
    pub vehicle_length: f64,
    pub vehicle_separation: f64,
    pub coherence: Coherence,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            carrier_freq: 30e9,
            bandwidth: 200e6,
            tx_power: 23.0,
            shadowing_mean: 0.0,
            shadowing_std: 8.0,
            noise_psd: -174.0,
            noise_figure: 0.0,
            sic_level: 40.0,
            vehicle_length: 5.0,
            vehicle_separation: 33.33,
            coherence: Coherence::PerFrame,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("channel.carrier_freq", self.carrier_freq),
            ("channel.bandwidth", self.bandwidth),
            ("channel.vehicle_length", self.vehicle_length),
            ("channel.vehicle_separation", self.vehicle_separation),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field, format!("must be positive, got {v}")));
            }
        }
        if self.sic_level.is_nan() || self.sic_level < 0.0 {
            return Err(Error::config(
                "channel.sic_level",
                format!("must be non-negative, got {}", self.sic_level),
            ));
        }
        if !(self.shadowing_std.is_finite() && self.shadowing_std >= 0.0) {
            return Err(Error::config(
                "channel.shadowing_std",
                format!("must be non-negative, got {}", self.shadowing_std),
            ));
        }
        for (field, v) in [
            ("channel.tx_power", self.tx_power),
            ("channel.shadowing_mean", self.shadowing_mean),
            ("channel.noise_psd", self.noise_psd),
            ("channel.noise_figure", self.noise_figure),
        ] {
            if !v.is_finite() {
                return Err(Error::config(field, format!("must be finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Distance between the transmit antenna of one vehicle and the receive
    /// antenna of its neighbour.
    pub fn link_distance(&self) -> f64 {
        self.vehicle_separation + self.vehicle_length
    }

    pub fn noise_dbm(&self) -> f64 {
        self.noise_psd + 10.0 * self.bandwidth.log10() + self.noise_figure
    }

    /// Self-interference power left at a full-duplex receiver after cancellation.
    pub fn residual_si_dbm(&self) -> f64 {
        let leak = path_loss(self.vehicle_length, self.carrier_freq)
            .expect("vehicle_length validated positive");
        self.tx_power - leak - self.sic_level
    }

    /// Mean received power without shadowing.
    pub fn median_rx_dbm(&self) -> f64 {
        let pl = path_loss(self.link_distance(), self.carrier_freq)
            .expect("link distance validated positive");
        self.tx_power - pl
    }
}

/// Free-space path loss in dB.
pub fn path_loss(distance: f64, freq: f64) -> Result<f64> {
    if distance.is_nan() || distance <= 0.0 {
        return Err(Error::NonPositiveDistance(distance));
    }
    Ok(20.0 * (4.0 * std::f64::consts::PI * distance * freq / SPEED_OF_LIGHT).log10())
}

fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

fn shannon_bits(bandwidth: f64, slot_duration: f64, signal_mw: f64, noise_mw: f64) -> f64 {
    let c = bandwidth * (signal_mw / noise_mw).ln_1p() / std::f64::consts::LN_2 * slot_duration;
    if c.is_finite() && c > 0.0 {
        c
    } else {
        0.0
    }
}

/// Capacity in bits per slot of `link` when the links in `active` transmit
/// together and the link suffers `shadowing_draw` dB of extra loss.
pub fn link_capacity(
    config: &ChannelConfig,
    topology: &Topology,
    link: LinkId,
    active: LinkSet,
    shadowing_draw: f64,
    slot_duration: f64,
) -> Result<f64> {
    let l = topology.link(link)?;
    let signal = dbm_to_mw(config.median_rx_dbm() - shadowing_draw);
    let mut noise = dbm_to_mw(config.noise_dbm());
    let rx_transmits = topology.tx_links(l.rx).iter().any(|&t| active.contains(t));
    if topology.is_full_duplex(l.rx) && rx_transmits {
        noise += dbm_to_mw(config.residual_si_dbm());
    }
    Ok(shannon_bits(config.bandwidth, slot_duration, signal, noise))
}

/// Link capacities for one coherence interval. The capacity of a link depends
/// on the transmission set only through self-interference at its receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityMap {
    shadowing_db: Vec<f64>,
    clean: Vec<f64>,
    with_si: Vec<f64>,
    /// Links transmitted by the receiver of each link, empty for HD receivers.
    si_sources: Vec<LinkSet>,
}

impl CapacityMap {
    pub fn from_shadowing(
        config: &ChannelConfig,
        topology: &Topology,
        shadowing_db: Vec<f64>,
        slot_duration: f64,
    ) -> Self {
        assert_eq!(shadowing_db.len(), topology.num_links());
        let noise = dbm_to_mw(config.noise_dbm());
        let si = dbm_to_mw(config.residual_si_dbm());
        let rx0 = config.median_rx_dbm();
        let mut clean = Vec::with_capacity(shadowing_db.len());
        let mut with_si = Vec::with_capacity(shadowing_db.len());
        let mut si_sources = Vec::with_capacity(shadowing_db.len());
        for (link, &s) in topology.links().iter().zip(&shadowing_db) {
            let signal = dbm_to_mw(rx0 - s);
            clean.push(shannon_bits(config.bandwidth, slot_duration, signal, noise));
            with_si.push(shannon_bits(
                config.bandwidth,
                slot_duration,
                signal,
                noise + si,
            ));
            si_sources.push(if topology.is_full_duplex(link.rx) {
                topology.tx_links(link.rx).iter().copied().collect()
            } else {
                LinkSet::EMPTY
            });
        }
        CapacityMap {
            shadowing_db,
            clean,
            with_si,
            si_sources,
        }
    }

    /// Capacity of `link` in bits/slot when `active` is the transmission set.
    pub fn capacity(&self, link: LinkId, active: LinkSet) -> f64 {
        let i = link.index();
        if self.si_sources[i].0 & active.0 != 0 {
            self.with_si[i]
        } else {
            self.clean[i]
        }
    }

    /// Capacity with no other transmission in the slot.
    pub fn standalone(&self, link: LinkId) -> f64 {
        self.clean[link.index()]
    }

    pub fn shadowing(&self) -> &[f64] {
        &self.shadowing_db
    }
}

/// Draws one shadowing value per directional link and returns the resulting
/// capacities.
pub fn draw_capacities<R: Rng + ?Sized>(
    config: &ChannelConfig,
    topology: &Topology,
    rng: &mut R,
    slot_duration: f64,
) -> CapacityMap {
    let normal = Normal::new(config.shadowing_mean, config.shadowing_std)
        .expect("shadowing_std validated non-negative");
    let draws = (0..topology.num_links())
        .map(|_| normal.sample(rng))
        .collect();
    CapacityMap::from_shadowing(config, topology, draws, slot_duration)
}

/// Channel state evolving over slots with the configured coherence interval.
#[derive(Debug)]
pub struct ChannelProcess<R> {
    rng: R,
    frame_len: u64,
    slot_duration: f64,
    config: ChannelConfig,
    interval: Option<u64>,
    current: Option<CapacityMap>,
    draws: u64,
}

impl<R: Rng> ChannelProcess<R> {
    pub fn new(config: ChannelConfig, rng: R, frame_len: u64, slot_duration: f64) -> Self {
        ChannelProcess {
            rng,
            frame_len: frame_len.max(1),
            slot_duration,
            config,
            interval: None,
            current: None,
            draws: 0,
        }
    }

    /// Capacities for `slot`, redrawing when a new coherence interval begins.
    pub fn at(&mut self, topology: &Topology, slot: u64) -> &CapacityMap {
        let interval = match self.config.coherence {
            Coherence::PerSlot => slot,
            Coherence::PerFrame => slot / self.frame_len,
        };
        if self.interval != Some(interval) {
            self.interval = Some(interval);
            self.draws += 1;
            self.current = Some(draw_capacities(
                &self.config,
                topology,
                &mut self.rng,
                self.slot_duration,
            ));
        }
        self.current.as_ref().expect("drawn above")
    }

    /// Number of shadowing draws so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const SLOT: f64 = 125e-6;

    fn platoon(fd: &[usize]) -> Topology {
        Topology::new(5, &fd.iter().copied().collect()).unwrap()
    }

    #[test]
    fn path_loss_unit_argument() {
        let f = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI);
        assert_abs_diff_eq!(path_loss(1.0, f).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn path_loss_at_platoon_spacing() {
        // 20*log10(4*pi*38.33*30e9/c), evaluated offline
        assert_abs_diff_eq!(
            path_loss(38.33, 30e9).unwrap(),
            93.660_984_701_363_66,
            epsilon = 1e-9
        );
    }

    #[test]
    fn path_loss_doubling_distance() {
        let a = path_loss(10.0, 30e9).unwrap();
        let b = path_loss(20.0, 30e9).unwrap();
        assert_abs_diff_eq!(b - a, 20.0 * 2f64.log10(), epsilon = 1e-12);
    }

    #[test]
    fn path_loss_rejects_nonpositive_distance() {
        assert!(path_loss(0.0, 30e9).is_err());
        assert!(path_loss(-1.0, 30e9).is_err());
    }

    #[test]
    fn link_budget_matches_hand_computation() {
        let cfg = ChannelConfig::default();
        let t = platoon(&[]);
        let c = link_capacity(
            &cfg,
            &t,
            LinkId(1),
            LinkSet::EMPTY.with(LinkId(1)),
            0.0,
            SLOT,
        )
        .unwrap();
        // 200 MHz * log2(1 + 10^(2.0328715/1)) * 125 us
        assert_abs_diff_eq!(c, 169_159.168_142_336, epsilon = 1e-3);
        assert!(c > 136_000.0);
    }

    #[test]
    fn perfect_cancellation_removes_self_interference() {
        let t = platoon(&[1]);
        let perfect = ChannelConfig {
            sic_level: f64::INFINITY,
            ..ChannelConfig::default()
        };
        let active: LinkSet = [LinkId(1), LinkId(2)].into_iter().collect();
        let with = link_capacity(&perfect, &t, LinkId(1), active, 3.0, SLOT).unwrap();
        let alone = link_capacity(
            &perfect,
            &t,
            LinkId(1),
            LinkSet::EMPTY.with(LinkId(1)),
            3.0,
            SLOT,
        )
        .unwrap();
        assert_eq!(with, alone);
    }

    #[test]
    fn half_duplex_receiver_ignores_sic() {
        let t = platoon(&[]);
        let active: LinkSet = [LinkId(1), LinkId(3)].into_iter().collect();
        let caps: Vec<f64> = [0.0, 10.0, 40.0]
            .iter()
            .map(|&sic| {
                let cfg = ChannelConfig {
                    sic_level: sic,
                    ..ChannelConfig::default()
                };
                link_capacity(&cfg, &t, LinkId(1), active, 1.5, SLOT).unwrap()
            })
            .collect();
        assert!(caps.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn better_cancellation_never_hurts() {
        let t = platoon(&[1]);
        let active: LinkSet = [LinkId(1), LinkId(2)].into_iter().collect();
        let cap = |sic| {
            let cfg = ChannelConfig {
                sic_level: sic,
                ..ChannelConfig::default()
            };
            link_capacity(&cfg, &t, LinkId(1), active, 0.0, SLOT).unwrap()
        };
        assert!(cap(40.0) >= cap(10.0));
        assert_abs_diff_eq!(cap(40.0), 151_660.952_342_241, epsilon = 1e-3);
        assert_abs_diff_eq!(cap(10.0), 5_659.442_259_454, epsilon = 1e-3);
    }

    #[test]
    fn capacity_decreases_with_distance() {
        let t = platoon(&[]);
        let active = LinkSet::EMPTY.with(LinkId(1));
        let mut last = f64::INFINITY;
        for sep in [10.0, 20.0, 33.33, 60.0, 120.0] {
            let cfg = ChannelConfig {
                vehicle_separation: sep,
                ..ChannelConfig::default()
            };
            let c = link_capacity(&cfg, &t, LinkId(1), active, 0.0, SLOT).unwrap();
            assert!(c <= last);
            last = c;
        }
    }

    #[test]
    fn capacity_floors_at_zero() {
        let t = platoon(&[]);
        let cfg = ChannelConfig::default();
        let c = link_capacity(&cfg, &t, LinkId(1), LinkSet::EMPTY, 1e6, SLOT).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn map_agrees_with_direct_formula() {
        let t = platoon(&[1, 2]);
        let cfg = ChannelConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let map = draw_capacities(&cfg, &t, &mut rng, SLOT);
        for &set in t.conflict_free_sets() {
            for l in set.iter() {
                let direct =
                    link_capacity(&cfg, &t, l, set, map.shadowing()[l.index()], SLOT).unwrap();
                assert_eq!(map.capacity(l, set), direct);
            }
        }
    }

    #[test]
    fn zero_std_gives_identical_draws() {
        let t = platoon(&[]);
        let cfg = ChannelConfig {
            shadowing_std: 0.0,
            coherence: Coherence::PerSlot,
            ..ChannelConfig::default()
        };
        let mut p = ChannelProcess::new(cfg, ChaCha8Rng::seed_from_u64(1), 14, SLOT);
        let first = p.at(&t, 0).clone();
        for slot in 1..20 {
            assert_eq!(p.at(&t, slot), &first);
        }
        assert_eq!(p.draws(), 20);
    }

    #[test]
    fn same_seed_same_draws() {
        let t = platoon(&[]);
        let cfg = ChannelConfig::default();
        let a = draw_capacities(&cfg, &t, &mut ChaCha8Rng::seed_from_u64(9), SLOT);
        let b = draw_capacities(&cfg, &t, &mut ChaCha8Rng::seed_from_u64(9), SLOT);
        assert_eq!(a, b);
    }

    #[test]
    fn per_frame_coherence_holds_within_frame() {
        let t = platoon(&[]);
        let cfg = ChannelConfig::default();
        let mut p = ChannelProcess::new(cfg, ChaCha8Rng::seed_from_u64(5), 14, SLOT);
        let frame0 = p.at(&t, 0).clone();
        for slot in 1..14 {
            assert_eq!(p.at(&t, slot), &frame0);
        }
        assert_ne!(p.at(&t, 14), &frame0);
        assert_eq!(p.draws(), 2);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let bad = ChannelConfig {
            sic_level: -3.0,
            ..ChannelConfig::default()
        };
        assert!(
            matches!(bad.validate(), Err(Error::InvalidConfig { field, .. }) if field == "channel.sic_level")
        );
        let bad = ChannelConfig {
            bandwidth: 0.0,
            ..ChannelConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ChannelConfig {
            shadowing_std: -1.0,
            ..ChannelConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(ChannelConfig::default().validate().is_ok());
    }
}
