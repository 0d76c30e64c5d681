//! Property-based invariants over the DSP primitives and the planning layer.

use proptest::prelude::*;

use stase::analysis::estimate_itd;
use stase::dsp_core::{
    convolve, convolve_direct, fractional_delay, ild_filter, itd_seconds, pan_gains,
    woodworth_tau, AudioBuffer, Ear, HeadModel,
};
use stase::scene_model::{merge_template, StemInfo, Template, TemplateSlot};
use stase::template_bank::{retrieve, TemplateBank};

const FS: u32 = 48000;

fn finite_signal(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 1..max_len)
}

proptest! {
    #[test]
    fn pan_power_is_conserved_and_sides_order(az in -90.0f64..=90.0) {
        let (l, r) = pan_gains(az);
        prop_assert!((l * l + r * r - 1.0).abs() < 1e-12);
        if az > 0.0 {
            prop_assert!(r > l);
        }
        if az < 0.0 {
            prop_assert!(l > r);
        }
    }

    #[test]
    fn itd_antisymmetry_is_exact(az in -90.0f64..=90.0) {
        let head = HeadModel::default();
        let (near, far) = itd_seconds(az, &head).unwrap();
        let (mirror_near, mirror_far) = itd_seconds(-az, &head).unwrap();
        prop_assert_eq!(near, mirror_far);
        prop_assert_eq!(far, mirror_near);
    }

    #[test]
    fn woodworth_tau_grows_with_angle(az in 0.0f64..89.0, step in 0.01f64..1.0) {
        let head = HeadModel::default();
        prop_assert!(woodworth_tau(az + step, &head) > woodworth_tau(az, &head));
    }

    #[test]
    fn fractional_delay_is_linear(
        x in finite_signal(256),
        y in finite_signal(256),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        delay_samples in 0.0f64..8.0,
    ) {
        let len = x.len().min(y.len());
        let x = &x[..len];
        let y = &y[..len];
        let delay_s = delay_samples / FS as f64;
        let mixed: Vec<f64> = x.iter().zip(y).map(|(xv, yv)| a * xv + b * yv).collect();
        let dm = fractional_delay(&AudioBuffer::mono(mixed, FS).unwrap(), delay_s).unwrap();
        let dx = fractional_delay(&AudioBuffer::mono(x.to_vec(), FS).unwrap(), delay_s).unwrap();
        let dy = fractional_delay(&AudioBuffer::mono(y.to_vec(), FS).unwrap(), delay_s).unwrap();
        for i in 0..len {
            let want = a * dx.channel(0)[i] + b * dy.channel(0)[i];
            prop_assert!((dm.channel(0)[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn convolution_agrees_with_the_direct_form(
        x in finite_signal(300),
        h in finite_signal(60),
    ) {
        let fft = convolve(
            &AudioBuffer::mono(x.clone(), FS).unwrap(),
            &AudioBuffer::mono(h.clone(), FS).unwrap(),
        )
        .unwrap();
        let direct = convolve_direct(&x, &h);
        prop_assert_eq!(fft.num_samples(), direct.len());
        for (a, b) in fft.channel(0).iter().zip(&direct) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn shelving_any_finite_input_stays_finite(
        x in finite_signal(512),
        az in -90.0f64..=90.0,
    ) {
        let buffer = AudioBuffer::mono(x, FS).unwrap();
        for ear in [Ear::Ipsilateral, Ear::Contralateral] {
            let shelved = ild_filter(&buffer, az, ear).unwrap();
            prop_assert!(shelved.channel(0).iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn float_wav_round_trips_exactly(
        left in finite_signal(1500),
        right in finite_signal(1500),
    ) {
        let len = left.len().min(right.len());
        // Quantize to f32 first; the file format stores nothing finer.
        let q = |v: &[f64]| v[..len].iter().map(|&s| s as f32 as f64).collect::<Vec<_>>();
        let buffer = AudioBuffer::stereo(q(&left), q(&right), FS).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        stase::audio_io::write_wav(&path, &buffer, stase::audio_io::SampleFormat::Float32).unwrap();
        let back = stase::audio_io::read_wav(&path).unwrap();
        prop_assert_eq!(back.sample_rate_hz(), FS);
        prop_assert_eq!(back.channel(0), buffer.channel(0));
        prop_assert_eq!(back.channel(1), buffer.channel(1));
    }

    #[test]
    fn channel_swap_negates_the_itd_estimate(
        noise in prop::collection::vec(-0.5f64..0.5, 2000..4000),
        offset in 1usize..40,
    ) {
        let len = noise.len();
        let mut right = vec![0.0; len];
        right[offset..].copy_from_slice(&noise[..len - offset]);
        let forward = AudioBuffer::stereo(noise.clone(), right.clone(), FS).unwrap();
        let swapped = AudioBuffer::stereo(right, noise, FS).unwrap();
        let itd_ab = estimate_itd(&forward).unwrap();
        let itd_ba = estimate_itd(&swapped).unwrap();
        prop_assert!((itd_ab + itd_ba).abs() < 1e-9);
        // A delayed right channel reads as a negative delay estimate.
        prop_assert!((itd_ab + offset as f64 / FS as f64).abs() < 1.5 / FS as f64);
    }

    #[test]
    fn retrieval_ignores_vocabulary_disjoint_additions(
        pick in 0usize..3,
        extra_keywords in prop::collection::vec("[qxz]{4,8}", 1..4),
    ) {
        let base = vec![
            toy_template("strings_hall", &["orchestra", "strings", "hall"]),
            toy_template("jazz_combo", &["jazz", "swing", "combo"]),
            toy_template("synth_stage", &["synth", "electronic", "stage"]),
        ];
        let query = base[pick].keywords.join(" ");
        let before = retrieve(&TemplateBank::from_templates(base.clone()).unwrap(), &query);
        prop_assert!(before.top().score > 0.0);

        let mut extended = base;
        let keywords: Vec<String> = extra_keywords.iter().map(|k| format!("{k}y")).collect();
        let mut noise_template = toy_template("zz_added", &[]);
        noise_template.keywords = keywords.clone();
        noise_template.description = keywords.join(" ");
        extended.push(noise_template);
        let after = retrieve(&TemplateBank::from_templates(extended).unwrap(), &query);
        prop_assert_eq!(&before.top().template_id, &after.top().template_id);
        prop_assert!((before.top().score - after.top().score).abs() < 1e-12);
    }

    #[test]
    fn unambiguous_template_merge_is_order_independent(perm in 0usize..24) {
        let names = ["guitar", "bass", "drums", "piano"];
        let mut stems: Vec<StemInfo> = names
            .iter()
            .map(|n| StemInfo { stem_id: n.to_string(), instrument: n.to_string() })
            .collect();
        // Index the permutation directly; 4 stems have 24 orderings.
        let mut order = Vec::new();
        let mut remaining: Vec<usize> = (0..4).collect();
        let mut code = perm;
        for radix in (1..=4).rev() {
            order.push(remaining.remove(code % radix));
            code /= radix;
        }
        stems = order.into_iter().map(|i| stems[i].clone()).collect();

        let template = Template {
            template_id: "quartet".into(),
            name: "Quartet".into(),
            keywords: vec!["quartet".into()],
            description: "four players".into(),
            slots: names
                .iter()
                .enumerate()
                .map(|(i, n)| TemplateSlot {
                    slot_instrument: n.to_string(),
                    azimuth_deg: -45.0 + 30.0 * i as f64,
                    elevation_deg: 0.0,
                    distance_m: 2.0,
                })
                .collect(),
            default_environment: "dry_studio".into(),
        };
        let plan = merge_template(&template, &stems);
        prop_assert_eq!(plan.sources.len(), 4);
        for source in &plan.sources {
            let slot_index = names.iter().position(|n| *n == source.source_id).unwrap();
            prop_assert_eq!(source.azimuth_deg, -45.0 + 30.0 * slot_index as f64);
            prop_assert_eq!(source.distance_m, 2.0);
        }
    }
}

fn toy_template(id: &str, keywords: &[&str]) -> Template {
    Template {
        template_id: id.to_string(),
        name: id.to_string(),
        keywords: keywords.iter().map(|k| k.to_string()).collect(),
        description: keywords.join(" "),
        slots: vec![TemplateSlot {
            slot_instrument: "lead".into(),
            azimuth_deg: 0.0,
            elevation_deg: 0.0,
            distance_m: 2.0,
        }],
        default_environment: "dry_studio".into(),
    }
}
