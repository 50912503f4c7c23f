use criterion::{black_box, criterion_group, criterion_main, Criterion};

use turbocc::harness::{run_once, Scenario};
use turbocc::link::crc16;
use turbocc::modem::{self, ModemConfig};
use turbocc::turbo::{apply_policy, generate_noise, NoiseProfile};
use turbocc::units::{ms, MICROS_PER_SEC};
use turbocc::{Bits, TurboPolicy};

fn benches(c: &mut Criterion) {
    let policy = TurboPolicy::xeon_silver_4108();

    c.bench_function("crc16 9 bytes", |b| b.iter(|| crc16(black_box(b"123456789"))));

    let noise = NoiseProfile::idle_background(8, (2..8).collect(), 7);
    let activity = generate_noise(&noise, 10 * MICROS_PER_SEC).unwrap();
    c.bench_function("pcu over 10 s of idle noise", |b| {
        b.iter(|| apply_policy(&policy, black_box(&activity)).unwrap())
    });

    let cfg = ModemConfig::new(ms(8), 2_850_000).unwrap();
    let bits: Bits = (0..512).map(|i| (i * 7) % 3 == 0).collect();
    c.bench_function("modulate 512 bits", |b| b.iter(|| modem::modulate(black_box(&bits), &cfg, 2)));

    let s = Scenario::new("idle", policy.clone());
    c.bench_function("80-byte idle transfer at 7 ms", |b| b.iter(|| run_once(&s, ms(7), 1).unwrap()));
}

criterion_group!(channel, benches);
criterion_main!(channel);
