//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use xtalk_core::demod::{self, DensitySeries, TwoColor};
use xtalk_core::diplexer::{self, DiplexReport};
use xtalk_core::fastica::{self, Separation};
use xtalk_core::io::{self, fmt_f64, KeyValues};
use xtalk_core::metrics::{self, Db, QualityReport};
use xtalk_core::signalgen::{
    add_awgn, apply_crosstalk, quantize_adc, synth_clean_pair, Scenario, ScenarioTracks,
};
use xtalk_core::{Error, MultichannelSignal, SampleRange};

use crate::config::RunConfig;
use crate::CliError;

pub const MANIFEST: &str = "manifest.txt";
const PHASE_TRUTH: &str = "phase_truth.csv";
const DENSITY_TRUTH: &str = "density_truth.csv";

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.resolved_out_dir();
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    Ok(dir)
}

fn named(cfg: &RunConfig, stem: &str) -> String {
    format!("{stem}.{}", cfg.format.ext())
}

fn save(path: &Path, s: &MultichannelSignal) -> Result<(), CliError> {
    io::save_signal(path, s).map_err(|e| io_err(path, e))
}

fn load(path: &Path) -> Result<MultichannelSignal, CliError> {
    io::load_signal(path).map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn tracks(cfg: &RunConfig) -> Result<ScenarioTracks, CliError> {
    let scenario = Scenario {
        kind: cfg.scenario,
        plateau_density: cfg.plateau_density,
        vibration_amplitude: cfg.vibration_amplitude,
    };
    Ok(scenario.tracks(&cfg.interferometer, cfg.samples)?)
}

/// Coupling, then noise, then quantization.
fn corrupt(cfg: &RunConfig, clean: &MultichannelSignal) -> Result<MultichannelSignal, CliError> {
    let mut s = apply_crosstalk(clean, &cfg.coupling)?;
    if let Some(snr) = cfg.snr_db {
        s = add_awgn(&s, snr, cfg.seed)?;
    }
    if let Some(bits) = cfg.adc_bits {
        s = quantize_adc(&s, bits, cfg.adc_full_scale)?;
    }
    Ok(s)
}

fn envelope_depths(s: &MultichannelSignal, cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    let carriers = cfg.interferometer.carriers();
    (0..s.channels().min(2))
        .map(|i| Ok(metrics::envelope_depth(s.channel(i).as_slice().unwrap(), s.sample_rate(), carriers[i])?))
        .collect()
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

pub fn gen(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let t = tracks(cfg)?;
    let clean = synth_clean_pair(&cfg.interferometer, &t.track1, &t.track2, cfg.samples)?;
    let mixed = corrupt(cfg, &clean)?;
    let fs = cfg.interferometer.sample_rate;
    let phases = MultichannelSignal::from_channels(&[t.track1.samples.clone(), t.track2.samples.clone()], fs)?;
    let density = MultichannelSignal::single(t.density.clone(), fs)?;

    save(&dir.join(named(cfg, "clean")), &clean)?;
    save(&dir.join(named(cfg, "mixed")), &mixed)?;
    save(&dir.join(PHASE_TRUTH), &phases)?;
    save(&dir.join(DENSITY_TRUTH), &density)?;
    write_text(&dir.join(MANIFEST), &cfg.to_kv().to_string())?;

    let depth = envelope_depths(&mixed, cfg)?;
    println!(
        "wrote {} samples of `{}` to {}; mixed envelope depth {}",
        cfg.samples,
        cfg.scenario,
        dir.display(),
        join(&depth.iter().map(|d| format!("{d:.3}")).collect::<Vec<_>>())
    );
    Ok(())
}

pub fn mix(cfg: &RunConfig, input: &Path) -> Result<(), CliError> {
    let clean = load(input)?;
    let mixed = corrupt(cfg, &clean)?;
    let path = out_dir(cfg)?.join(named(cfg, "mixed"));
    save(&path, &mixed)?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Configuration and clean record of the generating run, if a manifest is
/// given or sits next to `input`.
struct Truth {
    cfg: RunConfig,
    dir: PathBuf,
    clean: MultichannelSignal,
}

fn find_truth(input: &Path, manifest: Option<&Path>) -> Result<Option<Truth>, CliError> {
    let path = match manifest {
        Some(p) => p.to_path_buf(),
        None => {
            let p = input.parent().unwrap_or(Path::new(".")).join(MANIFEST);
            if !p.exists() {
                return Ok(None);
            }
            p
        }
    };
    let mut cfg = RunConfig::default();
    cfg.merge_file(&path)?;
    let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let clean = load(&dir.join(named(&cfg, "clean")))?;
    Ok(Some(Truth { cfg, dir, clean }))
}

/// Per-channel standard deviation, so the gain matrix maps unit-variance
/// sources.
fn source_std(clean: &MultichannelSignal) -> Vec<f64> {
    (0..clean.channels())
        .map(|i| {
            let x = clean.channel_vec(i);
            let m = x.iter().sum::<f64>() / x.len() as f64;
            (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
        })
        .collect()
}

fn quality(
    cfg: &RunConfig,
    input: &MultichannelSignal,
    sep: &Separation,
    truth: Option<&Truth>,
) -> Result<QualityReport, CliError> {
    let c = sep.components.channels();
    let (mut isr_db, mut snr_db, mut gain) = (Vec::new(), Vec::new(), None);
    if let Some(t) = truth.filter(|t| t.clean.channels() == c && t.clean.len() == input.len()) {
        for i in 0..c {
            let truth_i = t.clean.channel_vec(i);
            isr_db.push(metrics::isr(&sep.components.channel_vec(i), &truth_i)?);
            // Wanted-source power over everything else in the raw input.
            snr_db.push(match metrics::isr(&input.channel_vec(i), &truth_i)? {
                Db::Finite(v) => Db::Finite(-v),
                Db::NegInf => Db::PosInf,
                Db::PosInf => Db::NegInf,
            });
        }
        if t.cfg.coupling.dim() == c {
            gain = Some(metrics::gain_matrix(
                &sep.result.ordered_unmixing(),
                t.cfg.coupling.matrix(),
                &source_std(&t.clean),
            ));
        }
    }
    let envelope_depth = if c == 2 { envelope_depths(&sep.components, cfg)? } else { Vec::new() };
    Ok(QualityReport { isr_db, snr_db, gain_matrix: gain, envelope_depth })
}

pub fn unmix(cfg: &RunConfig, input: &Path, manifest: Option<&Path>) -> Result<(), CliError> {
    let mixed = load(input)?;
    let dir = out_dir(cfg)?;
    let carriers = cfg.interferometer.carriers();
    let expected = (mixed.channels() == 2).then_some(&carriers[..]);
    let sep = fastica::separate(&mixed, &cfg.ica.with_seed(cfg.seed), expected)?;

    let mut state = sep.result.to_kv();
    state.extend(sep.transform.to_kv());
    write_text(&dir.join("separation.txt"), &state.to_string())?;

    let truth = find_truth(input, manifest)?;
    let report = quality(cfg, &mixed, &sep, truth.as_ref())?;
    write_text(&dir.join("unmix_report.txt"), &report.to_kv().to_string())?;

    if !sep.result.all_converged() {
        let units: Vec<usize> = (0..sep.result.channels()).filter(|&i| !sep.result.converged[i]).collect();
        return Err(CliError::Numeric(format!(
            "fastICA units {units:?} did not converge in {} iterations; partial report written",
            cfg.ica.max_iter
        )));
    }
    let path = dir.join(named(cfg, "corrected"));
    save(&path, &sep.components)?;
    println!(
        "wrote {}; iterations {}; ISR {} dB",
        path.display(),
        join(&sep.result.iterations),
        if report.isr_db.is_empty() { "n/a".to_string() } else { join(&report.isr_db) }
    );
    Ok(())
}

struct DensityError {
    rms: f64,
    /// `None` when the true density is identically zero.
    relative: Option<f64>,
    snr: Db,
}

fn density_truth_error(tc: &TwoColor, truth_dir: &Path, decimation: usize) -> Result<Option<DensityError>, CliError> {
    let path = truth_dir.join(DENSITY_TRUTH);
    if !path.exists() {
        return Ok(None);
    }
    let truth = load(&path)?.channel_vec(0);
    let r = tc.density.valid_range();
    if r.is_empty() || (r.end - 1) * decimation >= truth.len() {
        return Ok(None);
    }
    let t: Vec<f64> = r.clone().map(|m| truth[m * decimation]).collect();
    let e: Vec<f64> = r.clone().map(|m| tc.density.samples[m]).collect();
    let diff: Vec<f64> = e.iter().zip(&t).map(|(a, b)| a - b).collect();
    let rms = (diff.iter().map(|v| v * v).sum::<f64>() / diff.len() as f64).sqrt();
    let relative = match metrics::relative_rms_error(&e, &t) {
        Ok(v) => Some(v),
        Err(Error::ZeroPower(_)) => None,
        Err(err) => return Err(err.into()),
    };
    Ok(Some(DensityError { rms, relative, snr: metrics::snr(&t, &diff)? }))
}

fn series_signal(d: &DensitySeries) -> Result<MultichannelSignal, CliError> {
    Ok(MultichannelSignal::single(d.samples.clone(), d.sample_rate)?)
}

fn ranges_text(r: &[SampleRange]) -> String {
    if r.is_empty() {
        "none".into()
    } else {
        join(r)
    }
}

pub fn density(cfg: &RunConfig, input: &Path, manifest: Option<&Path>) -> Result<(), CliError> {
    let signal = load(input)?;
    let dir = out_dir(cfg)?;
    let tc = demod::two_color_density(&signal, &cfg.interferometer, &cfg.demod)?;
    let valid = tc.density.valid_range();
    let d = cfg.demod.decimation;

    let mut kv = KeyValues::new();
    kv.push("density.sample_rate", fmt_f64(tc.density.sample_rate));
    kv.push("density.valid", format!("{}..{}", valid.start, valid.end));
    kv.push("density.lost_ranges", ranges_text(&tc.lost));
    let lost_samples: usize = tc.lost.iter().map(|r| r.end - r.start).sum();
    let valid_samples = valid.len() * d;
    kv.push("density.lost_fraction", fmt_f64(lost_samples as f64 / valid_samples.max(1) as f64));
    let truth_dir = match manifest {
        Some(p) => Some(p.parent().unwrap_or(Path::new(".")).to_path_buf()),
        None => find_truth(input, None)?.map(|t| t.dir),
    };
    if let Some(td) = truth_dir {
        if let Some(err) = density_truth_error(&tc, &td, d)? {
            kv.push("density.rms_error", fmt_f64(err.rms));
            if let Some(rel) = err.relative {
                kv.push("density.relative_rms_error", fmt_f64(rel));
            }
            kv.push("density.snr_db", err.snr);
        }
    }
    write_text(&dir.join("density_report.txt"), &kv.to_string())?;

    if !tc.lost.is_empty() && lost_samples >= valid_samples {
        return Err(CliError::Numeric(format!(
            "phase tracking lost over the whole record ({} ranges); no density written",
            tc.lost.len()
        )));
    }
    let phases = MultichannelSignal::from_channels(
        &[tc.phase1.samples.clone(), tc.phase2.samples.clone()],
        tc.phase1.sample_rate,
    )?;
    save(&dir.join("phase.csv"), &phases)?;
    save(&dir.join("density.csv"), &series_signal(&tc.density)?)?;
    if tc.lost.is_empty() {
        println!("wrote density ({} samples, settled {}..{})", tc.density.samples.len(), valid.start, valid.end);
        Ok(())
    } else {
        for r in &tc.lost {
            eprintln!("phase tracking lost on input samples {r}");
        }
        Err(CliError::Partial(format!(
            "phase tracking lost on {} ranges ({lost_samples} of {valid_samples} settled samples); density written",
            tc.lost.len()
        )))
    }
}

pub fn diplex(cfg: &RunConfig, input: Option<&Path>) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let composite = match input {
        Some(p) => load(p)?,
        None => {
            let p = &cfg.diplex;
            let s = diplexer::composite_tones(p.f_a, p.f_b, 1.0, 1.0, cfg.diplex_sample_rate, cfg.diplex_samples)?;
            save(&dir.join(named(cfg, "composite")), &s)?;
            s
        }
    };
    let d = diplexer::diplex(&composite, &cfg.diplex, &cfg.ica.with_seed(cfg.seed))?;
    let report = DiplexReport::measure(&d, &cfg.diplex)?;
    save(&dir.join(named(cfg, "diplex")), &d.output)?;
    save(&dir.join(named(cfg, "fir_only")), &d.fir_only)?;
    let mut kv = report.to_kv();
    kv.push("diplex.trimmed", d.trimmed);
    write_text(&dir.join("diplex_report.txt"), &kv.to_string())?;
    println!(
        "diplexed {} samples; residual FIR-only {} dB, FIR+ICA {} dB",
        composite.len(),
        join(&report.fir_only_residual_db),
        join(&report.residual_db)
    );
    Ok(())
}

fn gain_text(g: &Array2<f64>) -> String {
    g.rows()
        .into_iter()
        .map(|r| r.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join(";")
}

/// Uncorrected versus corrected quality for a run directory.
pub fn report(cfg: &RunConfig, run_dir: &Path) -> Result<(), CliError> {
    let manifest = run_dir.join(MANIFEST);
    let mut run = RunConfig::default();
    run.merge_file(&manifest)?;
    let clean = load(&run_dir.join(named(&run, "clean")))?;
    let mixed = load(&run_dir.join(named(&run, "mixed")))?;
    let corrected_path = run_dir.join(named(&run, "corrected"));

    let mut kv = KeyValues::new();
    let mut csv_cols = vec!["scenario".to_string(), "seed".to_string()];
    let mut csv_vals = vec![run.scenario.to_string(), run.seed.to_string()];
    let mut add = |kv: &mut KeyValues, key: String, value: String| {
        kv.push(&key, &value);
        csv_cols.push(key.replace('.', "_"));
        csv_vals.push(value);
    };

    let isr_of = |s: &MultichannelSignal| -> Result<Vec<Db>, CliError> {
        (0..2).map(|i| Ok(metrics::isr(&s.channel_vec(i), &clean.channel_vec(i))?)).collect()
    };
    add(&mut kv, "uncorrected.isr_db".into(), join(&isr_of(&mixed)?));
    add(&mut kv, "uncorrected.envelope_depth".into(), join(&envelope_depths(&mixed, &run)?.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>()));
    if corrected_path.exists() {
        let corrected = load(&corrected_path)?;
        add(&mut kv, "corrected.isr_db".into(), join(&isr_of(&corrected)?));
        add(
            &mut kv,
            "corrected.envelope_depth".into(),
            join(&envelope_depths(&corrected, &run)?.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>()),
        );
        let sep_path = run_dir.join("separation.txt");
        if sep_path.exists() {
            let kvs = KeyValues::load(&sep_path).map_err(|e| io_err(&sep_path, e))?;
            let result = fastica::SeparationResult::from_kv(&kvs).map_err(|e| io_err(&sep_path, e))?;
            let g = metrics::gain_matrix(&result.ordered_unmixing(), run.coupling.matrix(), &source_std(&clean));
            add(&mut kv, "corrected.gain_matrix".into(), gain_text(&g));
            add(&mut kv, "corrected.signed_permutation".into(), metrics::is_signed_permutation(&g, 1e-3).to_string());
        }
    }

    // Density recovered with and without correction, against the truth.
    let truth = load(&run_dir.join(DENSITY_TRUTH))?.channel_vec(0);
    let mut density_row = |kv: &mut KeyValues, label: &str, s: &MultichannelSignal| -> Result<(), CliError> {
        let tc = demod::two_color_density(s, &run.interferometer, &run.demod)?;
        add(kv, format!("{label}.lost_ranges"), tc.lost.len().to_string());
        let r = tc.density.valid_range();
        let d = run.demod.decimation;
        let t: Vec<f64> = r.clone().map(|m| truth[m * d]).collect();
        let diff: Vec<f64> = r.map(|m| tc.density.samples[m] - truth[m * d]).collect();
        let snr = match metrics::snr(&t, &diff) {
            Ok(v) => v.to_string(),
            Err(Error::DimensionMismatch(_)) => "n/a".into(),
            Err(e) => return Err(e.into()),
        };
        add(kv, format!("{label}.density_snr_db"), snr);
        Ok(())
    };
    density_row(&mut kv, "uncorrected", &mixed)?;
    if corrected_path.exists() {
        density_row(&mut kv, "corrected", &load(&corrected_path)?)?;
    }

    let dir = out_dir(cfg)?;
    write_text(&dir.join("report.txt"), &kv.to_string())?;
    let quoted: Vec<String> = csv_vals
        .iter()
        .map(|v| if v.contains(',') { format!("\"{v}\"") } else { v.clone() })
        .collect();
    write_text(&dir.join("report.csv"), &format!("{}\n{}\n", csv_cols.join(","), quoted.join(",")))?;
    print!("{kv}");
    Ok(())
}
