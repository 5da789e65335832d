//! Shared fixtures for the pipeline benchmarks.

use xtalk_core::signalgen::{apply_crosstalk, make_scenario_tracks, synth_clean_pair};
use xtalk_core::{InterferometerParams, MixingModel, MultichannelSignal};

/// Noiseless shot-ramp record of `n` samples mixed with `coupling`
/// (e.g. `"1,0.4;0.3,1"`).
pub fn mixed_record(n: usize, coupling: &str) -> MultichannelSignal {
    let p = InterferometerParams::default();
    let t = make_scenario_tracks("shot-ramp", n, &p).expect("valid scenario");
    let clean = synth_clean_pair(&p, &t.track1, &t.track2, n).expect("valid tracks");
    let model: MixingModel = coupling.parse().expect("valid coupling");
    apply_crosstalk(&clean, &model).expect("2x2 coupling")
}
