//! WebAssembly bindings for the browser demo in `www/`.

use wasm_bindgen::prelude::*;

pub mod demo;

fn js(e: lss_core::LssError) -> JsError {
    JsError::new(&e.to_string())
}

/// Samples of a synthetic series. `snr_db` is ignored when not finite.
#[wasm_bindgen]
pub fn generate(kind: &str, length: usize, seed: u32, snr_db: f64) -> Result<Vec<f64>, JsError> {
    let snr = snr_db.is_finite().then_some(snr_db);
    demo::series(kind, length, seed as u64, snr).map(|s| s.into_values()).map_err(js)
}

/// `[cd(1), ..., cd(ed_max), saturated (0/1), label (1 = non-stochastic)]`.
#[wasm_bindgen]
pub fn cd_curve(kind: &str, length: usize, seed: u32, snr_db: f64, ed_max: usize, max_points: usize) -> Result<Vec<f64>, JsError> {
    let snr = snr_db.is_finite().then_some(snr_db);
    let s = demo::series(kind, length, seed as u64, snr).map_err(js)?;
    let (curve, label) = demo::cd_curve(&s, ed_max, max_points).map_err(js)?;
    let mut out = curve.cd_values;
    out.push(if curve.saturation { 1.0 } else { 0.0 });
    out.push(label.index() as f64);
    Ok(out)
}

#[wasm_bindgen]
pub struct WebLab {
    inner: demo::Lab,
    occupancy: f64,
}

#[wasm_bindgen]
impl WebLab {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, length: usize, per_kind: usize, epochs: usize, resolution: usize) -> Result<WebLab, JsError> {
        let inner = demo::Lab::train(seed as u64, length, per_kind, epochs, resolution).map_err(js)?;
        Ok(WebLab { inner, occupancy: 0.0 })
    }

    pub fn resolution(&self) -> usize {
        self.inner.resolution()
    }

    /// RGBA pixels of the signature; occupancy is kept for [`WebLab::occupancy`].
    pub fn signature(&mut self, kind: &str, length: usize, seed: u32, snr_db: f64) -> Result<Vec<u8>, JsError> {
        let snr = snr_db.is_finite().then_some(snr_db);
        let s = demo::series(kind, length, seed as u64, snr).map_err(js)?;
        let sig = self.inner.signature(&s).map_err(js)?;
        self.occupancy = sig.occupancy;
        Ok(sig.rgba)
    }

    pub fn occupancy(&self) -> f64 {
        self.occupancy
    }
}
