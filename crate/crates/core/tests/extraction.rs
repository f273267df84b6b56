use std::f64::consts::PI;

use num_complex::Complex64;
use zcouple::domains::dq_to_pn;
use zcouple::extraction::{measure, pipeline, Baseline, ExtractOptions, ModelKind, COND_FLAG, DEFAULT_WINDOW_S};
use zcouple::freqresp::{make_grid, Domain, FrequencyGrid, GridKind, Mat2};
use zcouple::params::SystemParams;
use zcouple::timesim::{Case, InjectionKind, InjectionSpec, SimConfig};

fn grid(n: usize) -> FrequencyGrid {
    make_grid(10.0, 1000.0, n, GridKind::Logarithmic, 50.0).unwrap()
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn source_channels_match_rl_branch_in_sequence_domain() {
    let p = SystemParams::case_study();
    let cfg = SimConfig::new(p, Case::Mfd);
    let res = pipeline(&cfg, &grid(6), Domain::Pn, &ExtractOptions::new(Domain::Pn)).unwrap();
    let [Some(zp), Some(zn)] = &res.source_channels else { panic!("missing channels") };
    let w1 = p.w1();
    for (k, &w) in res.grid.points().iter().enumerate() {
        let rl = |wx: f64| Complex64::new(p.r_th(), wx * p.l_th());
        assert!(rel(zp.values()[k], rl(w + w1)) < 5e-3, "Z_p at {} Hz", w / (2.0 * PI));
        assert!(rel(zn.values()[k], rl(w - w1)) < 5e-3, "Z_n at {} Hz", w / (2.0 * PI));
    }
}

#[test]
fn dq_and_sequence_extractions_agree() {
    let cfg = SimConfig::new(SystemParams::case_study(), Case::Mfc);
    let g = FrequencyGrid::from_hz(&[12.5, 37.5, 147.5, 402.5, 997.5], 50.0).unwrap();
    let dq = pipeline(&cfg, &g, Domain::Dq, &ExtractOptions::new(Domain::Dq)).unwrap();
    let pn = pipeline(&cfg, &g, Domain::Pn, &ExtractOptions::new(Domain::Pn)).unwrap();
    assert!(dq.grid.same_as(&pn.grid));
    let mapped = dq_to_pn(dq.z_load.as_ref().unwrap()).unwrap();
    let measured = pn.z_load.as_ref().unwrap();
    for (a, b) in mapped.values().iter().zip(measured.values()) {
        assert!(a.max_abs_diff(b) < 0.03 * b.max_abs(), "{a:?} vs {b:?}");
    }
}

#[test]
fn decoupled_sequence_channels_equal_matrix_diagonal_only_for_mfd() {
    let mut worst = [0.0f64; 2];
    for (i, case) in [Case::Mfd, Case::Mfc].into_iter().enumerate() {
        let cfg = SimConfig::new(SystemParams::case_study(), case);
        let res = pipeline(&cfg, &grid(5), Domain::Pn, &ExtractOptions::new(Domain::Pn)).unwrap();
        let z = res.z_load.as_ref().unwrap();
        let [Some(lp), Some(ln)] = &res.load_channels else { panic!("missing channels") };
        for (k, m) in z.values().iter().enumerate() {
            worst[i] = worst[i].max(rel(lp.values()[k], m.a11())).max(rel(ln.values()[k], m.a22()));
        }
    }
    println!("decoupled vs matrix diagonal: MFD {:.2e}, MFC {:.2e}", worst[0], worst[1]);
    assert!(worst[0] < 0.01);
}

#[test]
fn halving_the_step_barely_moves_the_estimate() {
    let p = SystemParams::case_study();
    let g = FrequencyGrid::from_hz(&[97.5], 50.0).unwrap();
    let mut opts = ExtractOptions::new(Domain::Dq);
    opts.models = vec![ModelKind::Matrix];
    let coarse = SimConfig::new(p, Case::Mfc);
    let mut fine = coarse.clone();
    fine.dt /= 2.0;
    let a = pipeline(&coarse, &g, Domain::Dq, &opts).unwrap();
    let b = pipeline(&fine, &g, Domain::Dq, &opts).unwrap();
    let (za, zb) = (a.z_load.unwrap().values()[0], b.z_load.unwrap().values()[0]);
    assert!(za.max_abs_diff(&zb) < 1e-3 * zb.max_abs());
}

#[test]
fn fixed_frame_converter_does_not_answer_at_the_mirror() {
    let cfg = SimConfig::new(SystemParams::case_study(), Case::Mfd);
    let baseline = Baseline::run(&cfg).unwrap();
    for f in [20.0, 147.5, 402.5] {
        let ph = measure(&cfg, &baseline, InjectionSpec::new(InjectionKind::Pn1, f), DEFAULT_WINDOW_S).unwrap();
        for x in [ph.v, ph.i_load, ph.i_source] {
            assert!(x[1].norm() < 0.01 * x[0].norm(), "mirror response at {f} Hz");
        }
    }
}

#[test]
fn doubling_the_injection_doubles_the_response() {
    let cfg = SimConfig::new(SystemParams::case_study(), Case::Mfc);
    for dom in [Domain::Dq, Domain::Pn] {
        let mut opts = ExtractOptions::new(dom);
        opts.linearity_points = 3;
        let res = pipeline(&cfg, &grid(3), dom, &opts).unwrap();
        assert_eq!(res.linearity.len(), 3);
        for d in &res.linearity {
            assert!(d.delta < 0.01, "{d:?}");
        }
    }
}

/// The source-side current matrix stays below 10 for both orthogonal pairs.
/// The load-side matrix is reported; it peaks near the mirror region.
#[test]
fn injection_pairs_are_well_conditioned() {
    let g = grid(20);
    for case in [Case::Mfd, Case::Mfc] {
        let cfg = SimConfig::new(SystemParams::case_study(), case);
        for dom in [Domain::Dq, Domain::Pn] {
            let res = pipeline(&cfg, &g, dom, &ExtractOptions::new(dom)).unwrap();
            let (mut src, mut load) = (0.0f64, 0.0f64);
            for pair in res.phasors.chunks(2) {
                src = src.max(Mat2::from_columns(pair[0].i_source, pair[1].i_source).condition_number());
                load = load.max(Mat2::from_columns(pair[0].i_load, pair[1].i_load).condition_number());
            }
            println!("{} {dom}: source cond {src:.2}, load cond {load:.2}", case.name());
            assert!(src < 10.0);
            assert!(load < COND_FLAG);
            assert!(res.flagged_hz.is_empty());
        }
    }
}
