//! TOML run configuration.
//!
//! Every key is optional; missing keys take the case-study values. Unknown
//! keys are rejected with the offending name and its line.
//!
//! ```toml
//! z_th_pu_re = 0.02
//! z_th_pu_im = 0.4
//! case = "mfc"
//! inj_kind = "pn1"
//! f_inj_hz = 97.5
//! ```

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::timesim::{Case, InjectionKind, InjectionSpec, SimConfig, DEFAULT_I_INJ_PU};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub v_th_volt: Option<f64>,
    pub s_base_va: Option<f64>,
    pub f_n_hz: Option<f64>,
    pub v_dc_volt: Option<f64>,
    pub z_th_pu_re: Option<f64>,
    pub z_th_pu_im: Option<f64>,
    pub z_s_pu_re: Option<f64>,
    pub z_s_pu_im: Option<f64>,
    pub kp_pu: Option<f64>,
    pub ti_s: Option<f64>,
    pub k_pll: Option<f64>,
    pub t_pll_s: Option<f64>,
    pub t_d_s: Option<f64>,
    pub id_ref_pu: Option<f64>,
    pub iq_ref_pu: Option<f64>,
    pub pll_enabled: Option<bool>,
    pub case: Option<Case>,
    pub dt_s: Option<f64>,
    pub t_end_s: Option<f64>,
    pub inj_kind: Option<String>,
    pub f_inj_hz: Option<f64>,
    pub i_inj_pu: Option<f64>,
}

/// A resolved configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub sim: SimConfig,
    /// Amplitude used by sweeps; also the amplitude of `sim.injection`.
    pub i_inj_pu: f64,
}

impl RunConfig {
    pub fn params(&self) -> &SystemParams {
        &self.sim.params
    }

    pub fn pll_enabled(&self) -> bool {
        self.sim.case.pll_enabled()
    }

    pub fn case_study(case: Case) -> Self {
        RunConfig {
            sim: SimConfig::new(SystemParams::case_study(), case),
            i_inj_pu: DEFAULT_I_INJ_PU,
        }
    }
}

impl ConfigFile {
    /// Every key filled in from a resolved configuration.
    pub fn snapshot(c: &RunConfig) -> Self {
        let p = &c.sim.params;
        let inj = c.sim.injection;
        ConfigFile {
            v_th_volt: Some(p.v_th),
            s_base_va: Some(p.s_base),
            f_n_hz: Some(p.f_n),
            v_dc_volt: Some(p.v_dc),
            z_th_pu_re: Some(p.z_th.re),
            z_th_pu_im: Some(p.z_th.im),
            z_s_pu_re: Some(p.z_s.re),
            z_s_pu_im: Some(p.z_s.im),
            kp_pu: Some(p.kp),
            ti_s: Some(p.ti),
            k_pll: Some(p.k_pll),
            t_pll_s: Some(p.t_pll),
            t_d_s: Some(p.t_d),
            id_ref_pu: Some(p.id_ref),
            iq_ref_pu: Some(p.iq_ref),
            pll_enabled: Some(c.pll_enabled()),
            case: Some(c.sim.case),
            dt_s: Some(c.sim.dt),
            t_end_s: Some(c.sim.t_end),
            inj_kind: Some(inj.map_or("none", |i| i.kind.name()).to_string()),
            f_inj_hz: inj.map(|i| i.f_inj),
            i_inj_pu: Some(c.i_inj_pu),
        }
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let d = SystemParams::case_study();
        let params = SystemParams {
            v_th: self.v_th_volt.unwrap_or(d.v_th),
            s_base: self.s_base_va.unwrap_or(d.s_base),
            f_n: self.f_n_hz.unwrap_or(d.f_n),
            v_dc: self.v_dc_volt.unwrap_or(d.v_dc),
            z_th: Complex64::new(self.z_th_pu_re.unwrap_or(d.z_th.re), self.z_th_pu_im.unwrap_or(d.z_th.im)),
            z_s: Complex64::new(self.z_s_pu_re.unwrap_or(d.z_s.re), self.z_s_pu_im.unwrap_or(d.z_s.im)),
            kp: self.kp_pu.unwrap_or(d.kp),
            ti: self.ti_s.unwrap_or(d.ti),
            k_pll: self.k_pll.unwrap_or(d.k_pll),
            t_pll: self.t_pll_s.unwrap_or(d.t_pll),
            t_d: self.t_d_s.unwrap_or(d.t_d),
            id_ref: self.id_ref_pu.unwrap_or(d.id_ref),
            iq_ref: self.iq_ref_pu.unwrap_or(d.iq_ref),
        };
        params.validate().map_err(|e| Error::Config(e.to_string()))?;
        let case = match (self.case, self.pll_enabled) {
            (Some(c), Some(pll)) if c.pll_enabled() != pll => {
                return Err(Error::Config(format!(
                    "case = \"{}\" contradicts pll_enabled = {pll}",
                    c.name()
                )))
            }
            (Some(c), _) => c,
            (None, Some(true)) => Case::Mfc,
            (None, Some(false)) => Case::Mfd,
            (None, None) => Case::Mfc,
        };
        let i_inj_pu = self.i_inj_pu.unwrap_or(DEFAULT_I_INJ_PU);
        let injection = match self.inj_kind.as_deref() {
            None | Some("none") => {
                if self.f_inj_hz.is_some() {
                    return Err(Error::Config("f_inj_hz given without inj_kind".into()));
                }
                None
            }
            Some(k) => {
                let kind = InjectionKind::parse(k).ok_or_else(|| {
                    Error::Config(format!("inj_kind = \"{k}\": expected one of none, dq1, dq2, pn1, pn2"))
                })?;
                let f_inj = self
                    .f_inj_hz
                    .ok_or_else(|| Error::Config(format!("inj_kind = \"{k}\" needs f_inj_hz")))?;
                Some(InjectionSpec {
                    kind,
                    f_inj,
                    amplitude_pu: i_inj_pu,
                })
            }
        };
        let mut sim = SimConfig::new(params, case);
        if let Some(dt) = self.dt_s {
            sim.dt = dt;
        }
        if let Some(t) = self.t_end_s {
            sim.t_end = t;
        }
        sim.injection = injection;
        sim.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(RunConfig { sim, i_inj_pu })
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    file.resolve()
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_case_study() {
        let c = parse_config("").unwrap();
        assert_eq!(c.sim.params, SystemParams::case_study());
        assert_eq!(c.sim.case, Case::Mfc);
        assert!(c.sim.injection.is_none());
    }

    #[test]
    fn all_keys() {
        let text = r#"
v_th_volt = 690.0
s_base_va = 1e6
f_n_hz = 50.0
v_dc_volt = 1400.0
z_th_pu_re = 0.0398
z_th_pu_im = 0.00398
z_s_pu_re = 0.002
z_s_pu_im = 0.1
kp_pu = 0.255
ti_s = 0.0025
k_pll = 60.0
t_pll_s = 0.033
t_d_s = 1e-4
id_ref_pu = 1.0
iq_ref_pu = 0.0
pll_enabled = false
case = "mfd"
dt_s = 1e-5
t_end_s = 2.0
inj_kind = "pn2"
f_inj_hz = 97.5
i_inj_pu = 0.01
"#;
        let c = parse_config(text).unwrap();
        assert_eq!(c.sim.case, Case::Mfd);
        assert_eq!(c.sim.params.z_th, Complex64::new(0.0398, 0.00398));
        assert_eq!(c.sim.params.id_ref, 1.0);
        let inj = c.sim.injection.unwrap();
        assert_eq!(inj.kind, InjectionKind::Pn2);
        assert_eq!(inj.amplitude_pu, 0.01);
        assert_eq!(c.sim.t_end, 2.0);
    }

    #[test]
    fn unknown_key_is_named_with_line() {
        let e = parse_config("kp_pu = 0.2\nkq_pu = 1.0\n").unwrap_err().to_string();
        assert!(e.contains("kq_pu"), "{e}");
        assert!(e.contains("line 2"), "{e}");
    }

    #[test]
    fn snapshot_resolves_to_itself() {
        let c = parse_config("case = \"mfd\"\ninj_kind = \"dq2\"\nf_inj_hz = 30.0\n").unwrap();
        let snap = ConfigFile::snapshot(&c);
        assert_eq!(snap.resolve().unwrap(), c);
        let text = toml::to_string(&snap).unwrap();
        assert_eq!(parse_config(&text).unwrap(), c);
    }

    #[test]
    fn contradictions_are_rejected() {
        assert!(parse_config("case = \"mfd\"\npll_enabled = true\n").is_err());
        assert!(parse_config("f_inj_hz = 10.0\n").is_err());
        assert!(parse_config("inj_kind = \"dq3\"\nf_inj_hz = 10.0\n").is_err());
        assert!(parse_config("ti_s = -1.0\n").is_err());
        assert_eq!(parse_config("pll_enabled = false\n").unwrap().sim.case, Case::Mfd);
    }
}
