use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::Bits;
use crate::error::Result;
use crate::modem::{self, ModemConfig};
use crate::phy::{ChannelEndpoint, Party, PhyBackend, SampleSeries};
use crate::units::Micros;

/// What the peer of the transmitting party heard.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reception {
    pub bits: Bits,
    /// When the transmitter actually went quiet.
    pub tx_end: Micros,
    /// When the listener finished decoding and may respond.
    pub heard_at: Micros,
}

/// A half-duplex bit pipe between parties A and B.
pub trait BitChannel {
    /// Earliest instant at which a new transmission may start.
    fn now(&self) -> Micros;

    fn bit_time(&self) -> Micros;

    fn transmit(&mut self, from: Party, bits: &Bits, start: Micros) -> Result<Reception>;
}

/// Delivers every bit unchanged after a fixed turnaround.
#[derive(Clone, Debug)]
pub struct IdealChannel {
    pub bit_time: Micros,
    pub turnaround: Micros,
    clock: Micros,
}

impl IdealChannel {
    pub fn new(bit_time: Micros) -> Self {
        IdealChannel {
            bit_time,
            turnaround: bit_time,
            clock: 0,
        }
    }
}

impl BitChannel for IdealChannel {
    fn now(&self) -> Micros {
        self.clock
    }

    fn bit_time(&self) -> Micros {
        self.bit_time
    }

    fn transmit(&mut self, _from: Party, bits: &Bits, start: Micros) -> Result<Reception> {
        let tx_end = start + self.bit_time * bits.len() as Micros;
        let heard_at = tx_end + self.turnaround;
        self.clock = self.clock.max(heard_at);
        Ok(Reception {
            bits: bits.clone(),
            tx_end,
            heard_at,
        })
    }
}

/// Wraps another channel and, with probability `p` per transmission, flips
/// one burst of 1 to `max_burst` bits.
pub struct LossyChannel<C> {
    inner: C,
    p: f64,
    max_burst: usize,
    rng: ChaCha8Rng,
    pub corrupted: usize,
}

impl<C: BitChannel> LossyChannel<C> {
    pub fn new(inner: C, p: f64, seed: u64) -> Self {
        LossyChannel {
            inner,
            p,
            max_burst: 16,
            rng: ChaCha8Rng::seed_from_u64(seed),
            corrupted: 0,
        }
    }
}

pub fn flip_burst(bits: &mut [bool], rng: &mut impl Rng, max_burst: usize) {
    if bits.is_empty() {
        return;
    }
    let len = rng.gen_range(1..=max_burst.min(bits.len()));
    let start = rng.gen_range(0..=bits.len() - len);
    for i in 0..len {
        if i == 0 || i == len - 1 || rng.gen::<bool>() {
            bits[start + i] = !bits[start + i];
        }
    }
}

impl<C: BitChannel> BitChannel for LossyChannel<C> {
    fn now(&self) -> Micros {
        self.inner.now()
    }

    fn bit_time(&self) -> Micros {
        self.inner.bit_time()
    }

    fn transmit(&mut self, from: Party, bits: &Bits, start: Micros) -> Result<Reception> {
        let mut rx = self.inner.transmit(from, bits, start)?;
        if self.rng.gen_bool(self.p) {
            let mut v = rx.bits.into_inner();
            flip_burst(&mut v, &mut self.rng, self.max_burst);
            rx.bits = v.into();
            self.corrupted += 1;
        }
        Ok(rx)
    }
}

/// Modem on top of a physical layer. Each party keeps a listening cursor: a
/// reception covers everything from the end of that party's previous
/// activity up to one turnaround after the sender went quiet.
pub struct SimChannel<P> {
    phy: P,
    modem: ModemConfig,
    turnaround: Micros,
    listen_from: [Micros; 2],
    log: Option<Vec<(Party, SampleSeries)>>,
}

impl<P: PhyBackend> SimChannel<P> {
    pub fn new(phy: P, modem: ModemConfig) -> Self {
        SimChannel {
            phy,
            turnaround: modem.bit_time,
            modem,
            listen_from: [0; 2],
            log: None,
        }
    }

    /// Keeps every sample series for later inspection.
    pub fn record_samples(&mut self) {
        self.log = Some(Vec::new());
    }

    pub fn samples(&self) -> &[(Party, SampleSeries)] {
        self.log.as_deref().unwrap_or(&[])
    }

    pub fn phy(&self) -> &P {
        &self.phy
    }

    pub fn modem(&self) -> &ModemConfig {
        &self.modem
    }
}

impl<P: PhyBackend> BitChannel for SimChannel<P> {
    fn now(&self) -> Micros {
        self.listen_from[0].max(self.listen_from[1])
    }

    fn bit_time(&self) -> Micros {
        self.modem.bit_time
    }

    fn transmit(&mut self, from: Party, bits: &Bits, start: Micros) -> Result<Reception> {
        let to = from.peer();
        let tx_cores = self.phy.layout().tx_cores();
        let schedule = modem::modulate(bits, &self.modem, tx_cores).shifted(start);
        let sent = self.phy.transmit(ChannelEndpoint::sender(from), &schedule)?;
        let window = self.modem.window();
        let listen_start = self.listen_from[to.index()];
        let n = (sent.end + self.turnaround - listen_start) / window;
        let heard_at = listen_start + n * window;
        let series = self
            .phy
            .sample_frequency(ChannelEndpoint::receiver(to), window, listen_start, heard_at)?;
        let decoded = modem::receive(&series, &self.modem);
        if let Some(log) = &mut self.log {
            log.push((to, series));
        }
        self.listen_from[to.index()] = heard_at;
        self.listen_from[from.index()] = self.listen_from[from.index()].max(sent.end);
        Ok(Reception {
            bits: decoded,
            tx_end: sent.end,
            heard_at,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::{CoreLayout, SimConfig, SimulatedPhy};
    use crate::turbo::TurboPolicy;
    use crate::units::ms;

    #[test]
    fn ideal_timing() {
        let mut ch = IdealChannel::new(ms(5));
        let bits: Bits = "1011".parse().unwrap();
        let rx = ch.transmit(Party::A, &bits, ms(10)).unwrap();
        assert_eq!(rx.bits, bits);
        assert_eq!(rx.tx_end, ms(30));
        assert_eq!(rx.heard_at, ms(35));
        assert_eq!(ch.now(), ms(35));
    }

    #[test]
    fn bursts_flip_ends() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let mut v = vec![false; 40];
            flip_burst(&mut v, &mut rng, 16);
            let first = v.iter().position(|&b| b).unwrap();
            let last = v.iter().rposition(|&b| b).unwrap();
            assert!(last - first < 16);
        }
    }

    #[test]
    fn lossy_with_zero_probability_is_transparent() {
        let mut ch = LossyChannel::new(IdealChannel::new(ms(1)), 0.0, 3);
        let bits: Bits = "110010".parse().unwrap();
        assert_eq!(ch.transmit(Party::B, &bits, 0).unwrap().bits, bits);
        assert_eq!(ch.corrupted, 0);
    }

    #[test]
    fn simulated_round_trip_is_exact_without_noise() {
        let policy = TurboPolicy::xeon_silver_4108();
        let layout = CoreLayout::new(8, 2).unwrap();
        let phy = SimulatedPhy::new(SimConfig::new(policy, layout)).unwrap();
        let modem = ModemConfig::new(ms(8), 2_850_000).unwrap();
        let mut ch = SimChannel::new(phy, modem);
        let bits: Bits = "10101100 0110 1110 0001".parse().unwrap();
        let rx = ch.transmit(Party::A, &bits, 0).unwrap();
        assert_eq!(rx.tx_end, ms(8) * bits.len() as u64);
        assert_eq!(rx.heard_at, rx.tx_end + ms(8));
        let sync_at = modem::find_sync(&rx.bits, &"10101100".parse::<Bits>().unwrap(), 0).unwrap();
        assert_eq!(&rx.bits[sync_at - 8..sync_at - 8 + bits.len()], &bits[..]);

        let back: Bits = "10101100 1".parse().unwrap();
        let rx2 = ch.transmit(Party::B, &back, rx.heard_at).unwrap();
        // A listened through the turnaround gap first, which decodes as a 0
        assert_eq!(rx2.bits.to_string()[..10], *"0101011001");
    }
}
