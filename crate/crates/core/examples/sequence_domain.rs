//! Moving impedance matrices between the dq and modified sequence domains and
//! classifying mirror-frequency coupling.

use zcouple::domains::{a_z, dq_to_pn, map_frequencies, mfd_classify, pn_to_dq, DEFAULT_MFD_THRESHOLD};
use zcouple::freqresp::{make_grid, GridKind};
use zcouple::models::analytic_models;
use zcouple::params::{SystemParams, Units};

fn main() -> zcouple::Result<()> {
    let p = SystemParams::case_study();
    let grid = make_grid(10.0, 1000.0, 5, GridKind::Logarithmic, p.f_n)?;

    let a = a_z();
    println!("A_Z A_Z^H = {:?}", (a * a.adjoint()).entries());

    println!("dq frequency -> positive / negative sequence frequency (Hz):");
    for m in map_frequencies(&grid) {
        let hz = |w: f64| w / (2.0 * std::f64::consts::PI);
        println!("  {:8.2} -> {:8.2} / {:8.2}", hz(m.omega_dq), hz(m.omega_p), hz(m.omega_n));
    }

    for pll in [false, true] {
        let zl = analytic_models(&p, &grid, pll, Units::PerUnit)?.load;
        let zl_pn = dq_to_pn(&zl)?;
        let back = pn_to_dq(&zl_pn)?;
        let rep = mfd_classify(&zl_pn, DEFAULT_MFD_THRESHOLD)?;
        println!(
            "PLL {:<3}: round trip error {:.1e}, max off-diagonal ratio {:.3e}, mirror-frequency decoupled: {}",
            if pll { "on" } else { "off" },
            zl.max_rel_diff(&back),
            rep.max_ratio(),
            rep.all_mfd()
        );
    }
    Ok(())
}
