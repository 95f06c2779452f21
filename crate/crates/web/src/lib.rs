//! WebAssembly bindings for the browser demo. Every export returns a flat
//! `Float64Array`; the page knows the row layout.

use wasm_bindgen::prelude::*;

use mdiqcc::analyzer::{projection_probabilities, qber_x, AnalyzerPhase};
use mdiqcc::forward::infinite_decoy_key_rate;
use mdiqcc::optimize::four_intensity_rate;
use mdiqcc::{AnalysisConfig, PulseModel, SourceSpec, SystemModel};

fn js_err(e: mdiqcc::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Pulse width in ps to the line-shape parameter; 200 ps gives the
/// library default.
fn gamma_from_fwhm(fwhm_ps: f64) -> f64 {
    2.0 * std::f64::consts::LN_2 / (fwhm_ps * fwhm_ps)
}

/// X-basis error rate on a `steps x steps` grid of Bob/Charlie delays in
/// `[-range_ps, range_ps]`, row-major with Bob's delay as the row.
#[wasm_bindgen]
pub fn qber_surface(visibility: f64, fwhm_ps: f64, range_ps: f64, steps: usize) -> Result<Vec<f64>, JsError> {
    if steps < 2 || !(fwhm_ps > 0.0) {
        return Err(JsError::new("need steps >= 2 and fwhm > 0"));
    }
    let gamma = gamma_from_fwhm(fwhm_ps);
    let at = |i: usize| -range_ps + 2.0 * range_ps * i as f64 / (steps - 1) as f64;
    let mut out = Vec::with_capacity(steps * steps);
    for i in 0..steps {
        for j in 0..steps {
            out.push(qber_x(&PulseModel::with_delays(gamma, at(i), at(j)), visibility).map_err(js_err)?);
        }
    }
    Ok(out)
}

/// Rows of `(loss_db, finite four-intensity rate, infinite-decoy rate)`.
/// The finite rate uses the experiment's operating point and an i.i.d.
/// sending schedule of `pulses` triples.
#[wasm_bindgen]
pub fn key_rate_curve(
    loss_from: f64,
    loss_to: f64,
    points: usize,
    pulses: f64,
    det_eff: f64,
    e_d: f64,
    visibility: f64,
) -> Result<Vec<f64>, JsError> {
    if points < 2 {
        return Err(JsError::new("need at least two points"));
    }
    let base = SystemModel::symmetric(1.0, 1e-6, e_d, visibility, 1.16).map_err(js_err)?;
    let config = AnalysisConfig {
        quadrature_points: 16,
        ..AnalysisConfig::default()
    };
    let source = SourceSpec::EXPERIMENT;
    let mut out = Vec::with_capacity(3 * points);
    for i in 0..points {
        let loss = loss_from + (loss_to - loss_from) * i as f64 / (points - 1) as f64;
        let sys = base.with_eta(SystemModel::eta_from_total_loss(loss, det_eff));
        sys.validate().map_err(js_err)?;
        out.push(loss);
        out.push(four_intensity_rate(&source, &sys, pulses, &config));
        out.push(infinite_decoy_key_rate(&source, &sys).map_err(js_err)?);
    }
    Ok(out)
}

/// Rows of `(phase sum, P(Φ+), P(Φ-))` as the analyzer phase sum sweeps
/// `[0, 2π]`, for equal intensities `mu` and delay `dt_ps` between users.
#[wasm_bindgen]
pub fn projection_vs_phase(mu: f64, dt_ps: f64, fwhm_ps: f64, points: usize) -> Result<Vec<f64>, JsError> {
    if points < 2 || !(fwhm_ps > 0.0) {
        return Err(JsError::new("need points >= 2 and fwhm > 0"));
    }
    let pulse = PulseModel::with_delays(gamma_from_fwhm(fwhm_ps), dt_ps, -dt_ps);
    let mut out = Vec::with_capacity(3 * points);
    for i in 0..points {
        let g = std::f64::consts::TAU * i as f64 / (points - 1) as f64;
        let phase = AnalyzerPhase { gamma1: g, gamma2: 0.0, gamma3: 0.0 };
        let (plus, minus) = projection_probabilities(mu, &pulse, &phase, 16).map_err(js_err)?;
        out.extend([g, plus, minus]);
    }
    Ok(out)
}
