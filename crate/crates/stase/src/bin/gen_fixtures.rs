//! Regenerates the bundled data fixtures: a synthetic HRIR ring, ten room
//! impulse responses shaped to target decay times, and four demo stems.
//!
//! Everything is seeded and deterministic: running this twice produces
//! byte-identical files. Usage: `gen_fixtures [ROOT]` (default `data`).

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stase::audio_io::{write_wav, SampleFormat};
use stase::dsp_core::{
    fractional_delay, ild_filter_with, woodworth_tau, AudioBuffer, Ear, HeadModel,
    DEFAULT_ILD_MAX_DB, DEFAULT_SHELF_FC_HZ, DEFAULT_SHELF_SLOPE,
};

const FS: u32 = 48000;
const HRIR_LEN: usize = 128;
const HRIR_BASE_DELAY_SAMPLES: f64 = 8.0;

fn main() {
    let root = std::env::args().nth(1).unwrap_or_else(|| "data".to_string());
    let root = Path::new(&root);
    generate_hrir_ring(&root.join("hrir"));
    generate_rir_bank(&root.join("rir"));
    generate_demo_stems(&root.join("demo_stems"));
    println!("fixtures written under {}", root.display());
}

/// Folds any azimuth into the front-hemisphere lateral angle with the same
/// interaural geometry (rear angles mirror to the front).
fn lateral_of(azimuth_deg: f64) -> f64 {
    if azimuth_deg.abs() <= 90.0 {
        azimuth_deg
    } else {
        (180.0 - azimuth_deg.abs()) * azimuth_deg.signum()
    }
}

fn hrir_ear(lateral_abs: f64, delay_samples: f64, ear: Ear) -> Vec<f64> {
    let mut impulse = vec![0.0; HRIR_LEN];
    impulse[0] = 1.0;
    let x = AudioBuffer::mono(impulse, FS).unwrap();
    let delayed = fractional_delay(&x, delay_samples / FS as f64).unwrap();
    let shelved = ild_filter_with(
        &delayed,
        lateral_abs,
        ear,
        DEFAULT_ILD_MAX_DB,
        DEFAULT_SHELF_FC_HZ,
        DEFAULT_SHELF_SLOPE,
    )
    .unwrap();
    shelved
        .channel(0)
        .iter()
        .map(|v| v * std::f64::consts::FRAC_1_SQRT_2)
        .collect()
}

fn generate_hrir_ring(dir: &Path) {
    std::fs::create_dir_all(dir).expect("create hrir dir");
    let head = HeadModel::default();
    let mut manifest = Vec::new();
    for i in 0..72 {
        let az = -180.0 + 5.0 * i as f64;
        let lateral = lateral_of(az);
        let tau_samples = woodworth_tau(lateral.abs(), &head) * FS as f64;
        let near = hrir_ear(lateral.abs(), HRIR_BASE_DELAY_SAMPLES, Ear::Ipsilateral);
        let far = hrir_ear(
            lateral.abs(),
            HRIR_BASE_DELAY_SAMPLES + tau_samples,
            Ear::Contralateral,
        );
        let (left, right) = if lateral >= 0.0 {
            (far, near)
        } else {
            (near, far)
        };
        let name = format!("az{}{:03}.wav", if az < 0.0 { "m" } else { "p" }, az.abs() as u32);
        let buffer = AudioBuffer::stereo(left, right, FS).unwrap();
        write_wav(&dir.join(&name), &buffer, SampleFormat::Float32).expect("write hrir");
        manifest.push(serde_json::json!({
            "azimuth_deg": az,
            "elevation_deg": 0.0,
            "path": name,
        }));
    }
    let text = serde_json::to_string_pretty(&manifest).unwrap();
    std::fs::write(dir.join("manifest.json"), text + "\n").expect("write hrir manifest");
    println!("hrir: 72 positions, {} samples each", HRIR_LEN);
}

struct Environment {
    rir_id: &'static str,
    rt60_s: f64,
    keywords: &'static [&'static str],
}

const ENVIRONMENTS: &[Environment] = &[
    Environment { rir_id: "concert_hall", rt60_s: 1.9, keywords: &["hall", "concert", "orchestral", "symphony"] },
    Environment { rir_id: "intimate_room", rt60_s: 0.55, keywords: &["intimate", "room", "club", "cozy"] },
    Environment { rir_id: "dry_studio", rt60_s: 0.25, keywords: &["dry", "tight", "rock"] },
    Environment { rir_id: "small_chamber", rt60_s: 0.65, keywords: &["chamber", "small", "salon"] },
    Environment { rir_id: "medium_venue", rt60_s: 0.95, keywords: &["venue", "medium", "live"] },
    Environment { rir_id: "church", rt60_s: 2.4, keywords: &["church", "cathedral", "sacred"] },
    Environment { rir_id: "recital_hall", rt60_s: 1.2, keywords: &["recital", "formal"] },
    Environment { rir_id: "world_room", rt60_s: 0.8, keywords: &["world", "cultural", "circle"] },
    Environment { rir_id: "pro_studio", rt60_s: 0.35, keywords: &["professional", "booth", "studio", "recording"] },
    Environment { rir_id: "outdoor_field", rt60_s: 0.12, keywords: &["outdoor", "field", "festival", "open", "air"] },
];

fn generate_rir_bank(dir: &Path) {
    std::fs::create_dir_all(dir).expect("create rir dir");
    let mut manifest = Vec::new();
    for (index, env) in ENVIRONMENTS.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + index as u64);
        let fs = FS as f64;
        let len = ((env.rt60_s + 0.05) * fs).ceil() as usize;
        let tail_start = (0.007 * fs).round() as usize;
        let mut ir = vec![0.0; len];
        // Direct sound, then an exponentially decaying diffuse tail reaching
        // -60 dB at rt60.
        ir[0] = 0.9;
        for (n, v) in ir.iter_mut().enumerate().skip(tail_start) {
            let t = (n - tail_start) as f64 / fs;
            let envelope = 10f64.powf(-3.0 * t / env.rt60_s);
            *v += 0.25 * envelope * rng.random_range(-1.0..1.0);
        }
        let name = format!("{}.wav", env.rir_id);
        let buffer = AudioBuffer::mono(ir, FS).unwrap();
        write_wav(&dir.join(&name), &buffer, SampleFormat::Pcm16).expect("write rir");
        manifest.push(serde_json::json!({
            "rir_id": env.rir_id,
            "keywords": env.keywords,
            "path": name,
        }));
    }
    let text = serde_json::to_string_pretty(&manifest).unwrap();
    std::fs::write(dir.join("manifest.json"), text + "\n").expect("write rir manifest");
    println!("rir: {} environments", ENVIRONMENTS.len());
}

const STEM_SECONDS: f64 = 2.0;

fn tone(t: f64, freq: f64, harmonics: &[f64]) -> f64 {
    harmonics
        .iter()
        .enumerate()
        .map(|(k, amp)| amp * (2.0 * std::f64::consts::PI * freq * (k + 1) as f64 * t).sin())
        .sum()
}

fn lead_guitar() -> Vec<f64> {
    let notes = [329.63, 392.00, 440.00, 493.88];
    let n = (STEM_SECONDS * FS as f64) as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / FS as f64;
            let note = ((t / 0.5) as usize).min(notes.len() - 1);
            let t_note = t - note as f64 * 0.5;
            let envelope = (-3.0 * t_note).exp();
            0.28 * envelope * tone(t_note, notes[note], &[1.0, 0.5, 0.33, 0.25, 0.2, 0.16])
        })
        .collect()
}

fn bass() -> Vec<f64> {
    let pattern = [82.41, 82.41, 98.00, 82.41, 82.41, 110.00, 98.00, 82.41];
    let n = (STEM_SECONDS * FS as f64) as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / FS as f64;
            let step = ((t / 0.25) as usize).min(pattern.len() - 1);
            let t_note = t - step as f64 * 0.25;
            let envelope = (-6.0 * t_note).exp();
            0.45 * envelope * tone(t_note, pattern[step], &[1.0, 0.3])
        })
        .collect()
}

fn drums() -> Vec<f64> {
    let n = (STEM_SECONDS * FS as f64) as usize;
    let mut out = vec![0.0; n];
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let noise: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    for (i, v) in out.iter_mut().enumerate() {
        let t = i as f64 / FS as f64;
        let beat = t / 0.5;
        let in_beat = (beat.fract()) * 0.5;
        let beat_index = beat as usize;
        // Kick on every beat: a downward pitch sweep.
        if in_beat < 0.12 {
            let f = 45.0 + 65.0 * (-20.0 * in_beat).exp();
            *v += 0.8 * (-28.0 * in_beat).exp() * (2.0 * std::f64::consts::PI * f * in_beat).sin();
        }
        // Snare on beats 2 and 4: noise burst plus body.
        if beat_index % 2 == 1 && in_beat < 0.12 {
            *v += 0.5 * (-30.0 * in_beat).exp() * noise[i]
                + 0.2 * (-25.0 * in_beat).exp() * (2.0 * std::f64::consts::PI * 180.0 * in_beat).sin();
        }
        // Hats on eighth notes: short bright ticks.
        let eighth = (t / 0.25).fract() * 0.25;
        if eighth < 0.03 {
            let bright = if i > 0 { noise[i] - noise[i - 1] } else { noise[i] };
            *v += 0.18 * (-90.0 * eighth).exp() * bright;
        }
    }
    out
}

fn piano() -> Vec<f64> {
    let chords: [&[f64]; 2] = [&[261.63, 329.63, 392.00], &[349.23, 440.00, 523.25]];
    let n = (STEM_SECONDS * FS as f64) as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / FS as f64;
            let chord = ((t / 1.0) as usize).min(chords.len() - 1);
            let t_note = t - chord as f64;
            let envelope = (-1.8 * t_note).exp() * (1.0 - (-400.0 * t_note).exp());
            let sum: f64 = chords[chord]
                .iter()
                .map(|f| tone(t_note, *f, &[1.0, 0.4, 0.15]))
                .sum();
            0.2 * envelope * sum
        })
        .collect()
}

fn generate_demo_stems(dir: &Path) {
    std::fs::create_dir_all(dir).expect("create stems dir");
    let stems: [(&str, Vec<f64>); 4] = [
        ("lead_guitar", lead_guitar()),
        ("bass", bass()),
        ("drums", drums()),
        ("piano", piano()),
    ];
    for (name, samples) in stems {
        let buffer = AudioBuffer::mono(samples, FS).unwrap();
        write_wav(
            &dir.join(format!("{name}.wav")),
            &buffer,
            SampleFormat::Pcm16,
        )
        .expect("write stem");
    }
    println!("demo_stems: 4 stems, {STEM_SECONDS} s each");
}
