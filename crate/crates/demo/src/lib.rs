//! Browser bindings for three library operations.

use superrmt::berezin::supersphere_volume;
use superrmt::ensembles::{EnsembleSpec, SymmetryClass};
use superrmt::spectral::{dos_estimate, semicircle_mass, z_gen_quadrature, Bins, SourceMatrix, SpectralMethod};
use superrmt::C64;
use wasm_bindgen::prelude::*;

fn js(e: superrmt::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Class A density of states. Returns `[center, histogram, semicircle]`
/// triples, flattened.
#[wasm_bindgen]
pub fn semicircle_dos(n: usize, nsamples: usize, bins: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    let v = 1.0;
    let spec = EnsembleSpec::new(SymmetryClass::A, n, v).map_err(js)?;
    let h = dos_estimate(&spec, nsamples, Bins { lo: -2.5 * v, hi: 2.5 * v, n: bins }, seed as u64, SpectralMethod::Fast).map_err(js)?;
    let mut out = Vec::with_capacity(3 * bins);
    for (i, c) in h.centers().into_iter().enumerate() {
        let (lo, hi) = (h.edges[i], h.edges[i + 1]);
        out.extend([c, h.density[i], semicircle_mass(lo, hi, n, v) / (hi - lo)]);
    }
    Ok(out)
}

/// Volume of the supersphere `S^{p|2}` as `[re, im, error]`.
#[wasm_bindgen]
pub fn supersphere_vol(p: usize) -> Result<Vec<f64>, JsError> {
    let r = supersphere_volume(p).map_err(js)?;
    Ok(vec![r.value.re, r.value.im, r.error])
}

/// Generating function at `N = 1`, `n = 1` by quadrature, as `[re, im, error]`.
#[wasm_bindgen]
pub fn z_gen(class: &str, alpha_re: f64, alpha_im: f64, beta_re: f64, beta_im: f64) -> Result<Vec<f64>, JsError> {
    let cls: SymmetryClass = class.parse().map_err(js)?;
    let spec = EnsembleSpec::new(cls, 1, 1.0).map_err(js)?;
    let src = SourceMatrix::new(cls, vec![C64::new(alpha_re, alpha_im)], vec![C64::new(beta_re, beta_im)]).map_err(js)?;
    let (z, e) = z_gen_quadrature(&spec, &src).map_err(js)?;
    Ok(vec![z.re, z.im, e])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volumes_and_z() {
        let v = supersphere_vol(2).unwrap();
        assert!((v[0] - 4.0 * std::f64::consts::PI).abs() < 1e-6);
        assert_eq!(z_gen("A", 0.3, -1.0, 0.3, -1.0).unwrap()[0], 1.0);
    }

    #[test]
    fn dos_triples() {
        let d = semicircle_dos(20, 200, 10, 1).unwrap();
        assert_eq!(d.len(), 30);
    }
}
