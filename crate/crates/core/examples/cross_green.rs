//! Back-propagated conjugate products of two Green's functions.
//!
//! Without a screen the product peaks at the pair separation; with a screen
//! the single-field image blurs while a close pair keeps a sharp peak.
//!
//! `cargo run --release --example cross_green`

use speckle_ica::imaging::{cross_green_image, dort_image, BackPropagator};
use speckle_ica::optics::{green_rgo_camera, Modality, OpticsConfig, Screen};

fn contrast(values: &ndarray::Array2<num_complex::Complex64>) -> f64 {
    let m = values.mapv(|z| z.norm());
    m.fold(0.0f64, |a, &b| a.max(b)) / m.mean().unwrap_or(1.0)
}

fn main() -> speckle_ica::Result<()> {
    let mut cfg = OpticsConfig::desk(Modality::Shg, 0.75);
    cfg.screen_k0_sigma = 1.0;
    let bp = BackPropagator::new(&cfg.camera());
    let (xi, xj) = ([1.2, -0.7], [-0.9, 1.6]);
    let flat = Screen::flat(&cfg);
    let g = cross_green_image(green_rgo_camera(&cfg, xi, &flat).view(), green_rgo_camera(&cfg, xj, &flat).view(), &bp)?;
    let off = g.peak_offset(true);
    println!("pixel {:.3}λ", bp.pitch());
    println!("flat screen: peak at ({:.3}, {:.3})λ, separation ({:.3}, {:.3})λ", off[0] * g.pitch, off[1] * g.pitch, xi[0] - xj[0], xi[1] - xj[1]);

    let screen = Screen::generate(&cfg)?;
    let gi = green_rgo_camera(&cfg, xi, &screen);
    let gj = green_rgo_camera(&cfg, xj, &screen);
    let single = dort_image(gi.view(), &bp)?;
    let pair = cross_green_image(gi.view(), gj.view(), &bp)?;
    println!("screen l_c = {:.2}λ", cfg.screen_l_c());
    println!("contrast of single-field image {:.1}, of pair product {:.1}", contrast(&single.values), contrast(&pair.values));
    Ok(())
}
