//! Operating point and analytic source/load impedances of the case-study
//! converter, with and without the PLL.

use zcouple::domains::dq_to_pn;
use zcouple::freqresp::{make_grid, GridKind};
use zcouple::models::analytic_models;
use zcouple::params::{SystemParams, Units};

fn main() -> zcouple::Result<()> {
    let p = SystemParams::case_study();
    let grid = make_grid(1.0, 1000.0, 7, GridKind::Logarithmic, p.f_n)?;

    for pll in [false, true] {
        let m = analytic_models(&p, &grid, pll, Units::PerUnit)?;
        let op = m.op;
        println!("PLL {}", if pll { "on" } else { "off" });
        println!(
            "  V_pcc = {:.4} pu, I_L = {:.3} pu, modulation index {:.3}",
            op.v_pcc.norm() / p.v_base(),
            op.i_l / p.i_base(),
            op.modulation_index(&p)
        );
        let pn = dq_to_pn(&m.load)?;
        println!("  {:>8}  {:>10} {:>10} {:>10}  {:>10} {:>10}", "f (Hz)", "|Zdd|", "|Zdq|", "|Zqq|", "|Zpp|", "|Zpn|");
        for (k, f) in grid.hz().iter().enumerate() {
            let z = m.load.values()[k];
            let s = pn.values()[k];
            println!(
                "  {f:8.2}  {:10.4} {:10.4} {:10.4}  {:10.4} {:10.2e}",
                z.a11().norm(),
                z.a12().norm(),
                z.a22().norm(),
                s.a11().norm(),
                s.a12().norm()
            );
        }
    }

    let zs = analytic_models(&p, &grid, false, Units::PerUnit)?.source;
    println!(
        "grid impedance off-diagonal |Z_dq| = {:.4} pu (w1 L_th)",
        zs.values()[0].a12().norm()
    );
    Ok(())
}
