//! Decoupling norms on a grid with X/R = 0.1: the dq domain becomes the
//! better-decoupled representation at low frequency.

use zcouple::domains::to_domain;
use zcouple::freqresp::{make_grid, Domain, GridKind};
use zcouple::models::analytic_models;
use zcouple::params::{SystemParams, Units};
use zcouple::stability::{epsilon_norm, MinorLoopSet, DEFAULT_EPS_THRESHOLD};

fn main() -> zcouple::Result<()> {
    let p = SystemParams::case_study().with_xr(0.1);
    println!("Z_th = {:.4} pu (X/R = {:.2})", p.z_th, p.xr());
    let grid = make_grid(10.0, 1000.0, 40, GridKind::Logarithmic, p.f_n)?;
    let m = analytic_models(&p, &grid, true, Units::PerUnit)?;
    let eps = |dom| -> zcouple::Result<Vec<f64>> {
        let set = MinorLoopSet::from_impedances(&to_domain(&m.source, dom)?, &to_domain(&m.load, dom)?)?;
        Ok(epsilon_norm(&set.exact, DEFAULT_EPS_THRESHOLD)?.abs())
    };
    let (dq, pn) = (eps(Domain::Dq)?, eps(Domain::Pn)?);
    println!("{:>8}  {:>8}  {:>8}", "f (Hz)", "|eps_dq|", "|eps_pn|");
    for (k, f) in grid.hz().iter().enumerate() {
        println!("{f:8.1}  {:8.4}  {:8.4}", dq[k], pn[k]);
    }
    if let Some(k) = (0..grid.len()).find(|&k| dq[k] >= pn[k]) {
        println!("dq stops being the better-decoupled domain near {:.1} Hz", grid.hz()[k]);
    }
    Ok(())
}
