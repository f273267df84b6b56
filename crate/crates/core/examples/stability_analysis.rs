//! Minor-loop gains, eigenvalue loci, decoupling norm and Nyquist verdicts for
//! the case-study system.

use zcouple::domains::to_domain;
use zcouple::freqresp::{make_grid, Domain, GridKind};
use zcouple::models::analytic_models;
use zcouple::params::{SystemParams, Units};
use zcouple::stability::{
    det_winding, eig_loci_closed_form, epsilon_norm, nyquist_verdict, Closure, MinorLoopSet, NyquistOptions,
    DEFAULT_EPS_THRESHOLD,
};

fn main() -> zcouple::Result<()> {
    let p = SystemParams::case_study();
    let sweep = make_grid(10.0, 1000.0, 8, GridKind::Logarithmic, p.f_n)?;
    let contour = make_grid(0.01, 20_000.0, 4000, GridKind::Logarithmic, p.f_n)?;

    for (name, pll) in [("MFD", false), ("MFC", true)] {
        println!("Case {name}");
        let m = analytic_models(&p, &sweep, pll, Units::PerUnit)?;
        for dom in [Domain::Dq, Domain::Pn] {
            let set = MinorLoopSet::from_impedances(&to_domain(&m.source, dom)?, &to_domain(&m.load, dom)?)?;
            let eps = epsilon_norm(&set.exact, DEFAULT_EPS_THRESHOLD)?;
            let exact = eig_loci_closed_form(&set.exact)?;
            let semidec = eig_loci_closed_form(&set.semidec)?;
            println!(
                "  {dom}: max |eps| = {:.3}, {} of {} points above {}, semidec loci off by up to {:.3}",
                eps.max_abs(),
                eps.violations.len(),
                sweep.len(),
                DEFAULT_EPS_THRESHOLD,
                exact.max_distance(&semidec)
            );
        }

        let wide = analytic_models(&p, &contour, pll, Units::PerUnit)?;
        let set = MinorLoopSet::from_impedances(&wide.source, &wide.load)?;
        let v = nyquist_verdict(&eig_loci_closed_form(&set.exact)?, NyquistOptions::default());
        println!(
            "  Nyquist: {} (encirclements {:?}, det route {}, closest approach {:.3}, {})",
            v.label(),
            v.encirclements,
            det_winding(&set.exact, Closure::ConjugateSymmetric),
            v.min_distance,
            v.note
        );
    }
    Ok(())
}
