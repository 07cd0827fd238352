use criterion::{criterion_group, criterion_main, Criterion};
use keyheat_core::acoustic::{mfcc, process_recording, PipelineConfig};
use keyheat_core::synth::{typing_recording, SynthConfig};
use keyheat_core::thermal::TypingStyle;
use keyheat_core::AudioClip;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn features(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = SynthConfig::default();
    let rec = typing_recording("passw0rd", TypingStyle::HuntAndPeck, 0.3, Some(20.0), &cfg, &mut rng).unwrap();
    let n = (0.1 * f64::from(cfg.sample_rate)) as usize;
    let start = (rec.press_times[0] * f64::from(cfg.sample_rate)) as usize;
    let segment = AudioClip::new(rec.clip.samples()[start..start + n].to_vec(), cfg.sample_rate).unwrap();
    c.bench_function("mfcc/100ms", |b| b.iter(|| mfcc(&segment).unwrap()));
    let pipeline = PipelineConfig::default();
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(20);
    group.bench_function("process_recording/8 keys", |b| b.iter(|| process_recording(&rec.clip, &pipeline).unwrap()));
    group.finish();
}

criterion_group!(benches, features);
criterion_main!(benches);
