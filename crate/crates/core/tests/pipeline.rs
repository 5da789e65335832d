//! End-to-end checks across generator, separation, demodulation and metrics.

use ndarray::{array, Array2};
use xtalk_core::demod::{self, DemodConfig};
use xtalk_core::fastica::{self, FastIcaConfig};
use xtalk_core::metrics;
use xtalk_core::signalgen::{
    add_awgn, apply_crosstalk, make_scenario_tracks, synth_clean_pair, InterferometerParams,
    MixingModel,
};
use xtalk_core::MultichannelSignal;

const N: usize = 1 << 16;

fn mixed(kind: &str, a: Array2<f64>, snr_db: f64, seed: u64) -> (MultichannelSignal, MultichannelSignal) {
    let p = InterferometerParams::default();
    let t = make_scenario_tracks(kind, N, &p).unwrap();
    let clean = synth_clean_pair(&p, &t.track1, &t.track2, N).unwrap();
    let m = apply_crosstalk(&clean, &MixingModel::new(a).unwrap()).unwrap();
    (clean, add_awgn(&m, snr_db, seed).unwrap())
}

fn depths(s: &MultichannelSignal) -> [f64; 2] {
    let [f1, f2] = InterferometerParams::default().carriers();
    [
        metrics::envelope_depth(&s.channel_vec(0), s.sample_rate(), f1).unwrap(),
        metrics::envelope_depth(&s.channel_vec(1), s.sample_rate(), f2).unwrap(),
    ]
}

#[test]
fn coupled_envelope_depth_collapses_after_correction() {
    let p = InterferometerParams::default();
    let (_, m) = mixed("shot-ramp", array![[1.0, 0.4], [0.3, 1.0]], f64::INFINITY, 0);
    for d in depths(&m) {
        assert!(d > 0.2 && d < 1.0, "{d}");
    }
    let sep = fastica::separate(&m, &FastIcaConfig::default(), Some(&p.carriers())).unwrap();
    for d in depths(&sep.components) {
        assert!(d < 0.05, "{d}");
    }
}

#[test]
fn strong_coupling_depth_always_drops() {
    let p = InterferometerParams::default();
    for seed in 0..5 {
        let (_, m) = mixed("shot-ramp", array![[1.0, 0.9], [0.9, 1.0]], 40.0, seed);
        let sep = fastica::separate(&m, &FastIcaConfig::default().with_seed(seed), Some(&p.carriers())).unwrap();
        let (before, after) = (depths(&m), depths(&sep.components));
        for i in 0..2 {
            assert!(before[i] > after[i], "seed {seed} ch{i}: {} vs {}", before[i], after[i]);
        }
    }
}

#[test]
fn density_recovered_through_the_whole_chain() {
    let p = InterferometerParams::default();
    let t = make_scenario_tracks("shot-ramp", N, &p).unwrap();
    let (_, m) = mixed("shot-ramp", array![[1.0, 0.4], [0.3, 1.0]], f64::INFINITY, 0);
    let sep = fastica::separate(&m, &FastIcaConfig::default(), Some(&p.carriers())).unwrap();
    let cfg = DemodConfig::for_carriers(&p);
    let tc = demod::two_color_density(&sep.components, &p, &cfg).unwrap();
    assert!(tc.lost.is_empty());
    let r = tc.density.valid_range();
    let est: Vec<f64> = r.clone().map(|k| tc.density.samples[k]).collect();
    let truth: Vec<f64> = r.map(|k| t.density[k * cfg.decimation]).collect();
    let e = metrics::relative_rms_error(&est, &truth).unwrap();
    assert!(e < 1e-3, "{e}");
}

#[test]
fn isr_reports_sentinel_for_exact_inverse() {
    let (clean, m) = mixed("quiet", array![[1.0, 0.4], [0.3, 1.0]], f64::INFINITY, 0);
    let inv = MixingModel::new(array![[1.0, 0.4], [0.3, 1.0]]).unwrap().inverse().unwrap();
    let back = apply_crosstalk(&m, &inv).unwrap();
    for i in 0..2 {
        let v = metrics::isr(&back.channel_vec(i), &clean.channel_vec(i)).unwrap();
        assert!(v.value() < -250.0 || v == metrics::Db::NegInf, "{v}");
    }
}
