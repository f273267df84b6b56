//! Identifies source and load impedances from simulated shunt injections and
//! compares them with the analytic models.

use zcouple::domains::to_domain;
use zcouple::extraction::{pipeline, ExtractOptions};
use zcouple::freqresp::{make_grid, Domain, GridKind};
use zcouple::models::analytic_models;
use zcouple::params::{SystemParams, Units};
use zcouple::timesim::{Case, SimConfig};

fn main() -> zcouple::Result<()> {
    let p = SystemParams::case_study();
    let grid = make_grid(10.0, 1000.0, 6, GridKind::Logarithmic, p.f_n)?;
    let cfg = SimConfig::new(p, Case::Mfc);

    for dom in [Domain::Dq, Domain::Pn] {
        let res = pipeline(&cfg, &grid, dom, &ExtractOptions::new(dom))?;
        let an = analytic_models(&p, &res.grid, true, Units::Ohm)?;
        let zl = res.z_load.as_ref().expect("both injections were run");
        let zl_an = to_domain(&an.load, dom)?;
        println!("{dom} domain (grid snapped to {:?} Hz)", res.grid.hz());
        for (k, f) in res.grid.hz().iter().enumerate() {
            let (e, a) = (zl.values()[k], zl_an.values()[k]);
            let err = e.max_abs_diff(&a) / a.max_abs();
            println!("  {f:7.1} Hz  |Z11| {:8.4} ohm  error {:.2e}  cond {:.2}", e.a11().norm(), err, res.cond[k]);
        }
    }
    Ok(())
}
