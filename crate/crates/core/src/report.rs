//! Deterministic output rendering: CSV tables, JSON records, run manifests.
//!
//! Every float in a CSV goes through [`format_sci`], scientific notation with
//! twelve significant digits, so identical runs produce byte-identical files.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::{quadrature_stats, Fig2Row};
use crate::dynamics::Trajectory;
use crate::error::Error;
use crate::model::{EffectiveParams, SystemParams};
use crate::Result;

/// Fixed scientific format, twelve significant digits. NaN and infinities
/// render as lowercase words so flagged table rows stay diff-stable.
pub fn format_sci(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.11e}")
    }
}

/// One row of the squeeze-versus-time table emitted by the resonant command.
#[derive(Debug, Clone, Copy)]
pub struct SeriesRow {
    pub t: f64,
    pub r: f64,
    pub var_min: f64,
    pub squeezing_pct: f64,
    /// Conditional population of the monitored atomic level, present only
    /// for runs that track the atom.
    pub pop_i: Option<f64>,
}

/// Renders the time-series table. The population column appears only when
/// some row carries it.
pub fn render_series_csv(rows: &[SeriesRow]) -> String {
    let with_pop = rows.iter().any(|r| r.pop_i.is_some());
    let mut out = String::from(if with_pop {
        "t,r,var_min,squeezing_pct,pop_i\n"
    } else {
        "t,r,var_min,squeezing_pct\n"
    });
    for row in rows {
        out.push_str(&format_sci(row.t));
        out.push(',');
        out.push_str(&format_sci(row.r));
        out.push(',');
        out.push_str(&format_sci(row.var_min));
        out.push(',');
        out.push_str(&format_sci(row.squeezing_pct));
        if with_pop {
            out.push(',');
            out.push_str(&format_sci(row.pop_i.unwrap_or(f64::NAN)));
        }
        out.push('\n');
    }
    out
}

/// Renders the detuning-sweep table with its exact header.
pub fn render_fig2_csv(rows: &[Fig2Row]) -> String {
    let mut out = String::from("delta_big,p_coupling,r_off,r_on,ratio\n");
    for row in rows {
        out.push_str(&format_sci(row.delta_big));
        out.push(',');
        out.push_str(&format_sci(row.p_coupling));
        out.push(',');
        out.push_str(&format_sci(row.r_off));
        out.push(',');
        out.push_str(&format_sci(row.r_on));
        out.push(',');
        out.push_str(&format_sci(row.ratio));
        out.push('\n');
    }
    out
}

/// Renders a propagated field trajectory: per-record extremal statistics,
/// optionally followed by the raw amplitudes (two columns per level).
pub fn render_trajectory_csv(traj: &Trajectory, include_amplitudes: bool) -> Result<String> {
    let mut header = String::from("t,min_variance,r_extracted,phi_extracted");
    if include_amplitudes {
        if let Some(state) = traj.states.first() {
            for n in 0..state.dim() {
                header.push_str(&format!(",re_{n},im_{n}"));
            }
        }
    }
    header.push('\n');
    let mut out = header;
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let stats = quadrature_stats(state)?;
        out.push_str(&format_sci(*t));
        out.push(',');
        out.push_str(&format_sci(stats.var_min));
        out.push(',');
        out.push_str(&format_sci(stats.inferred_r()));
        out.push(',');
        out.push_str(&format_sci(stats.phi_min));
        if include_amplitudes {
            for amp in state.amps.iter() {
                out.push(',');
                out.push_str(&format_sci(amp.re));
                out.push(',');
                out.push_str(&format_sci(amp.im));
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Provenance record written next to every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub duration_seconds: f64,
    pub params: serde_json::Value,
    pub effective: serde_json::Value,
    pub warnings: Vec<String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, params: &SystemParams, eff: Option<&EffectiveParams>) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            duration_seconds: 0.0,
            params: params_echo(params),
            effective: eff.map(effective_echo).unwrap_or(serde_json::Value::Null),
            warnings: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Appends warnings, keeping each distinct message once.
    pub fn add_warnings<I: IntoIterator<Item = String>>(&mut self, items: I) {
        for w in items {
            if !self.warnings.contains(&w) {
                self.warnings.push(w);
            }
        }
    }
}

/// Echoes resolved parameters under their config-file key names.
pub fn params_echo(p: &SystemParams) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    let mut put = |k: &str, v: f64| {
        map.insert(k.to_string(), serde_json::json!(v));
    };
    put("lambda_g_re", p.lambda_g.re);
    put("lambda_g_im", p.lambda_g.im);
    put("lambda_e_re", p.lambda_e.re);
    put("lambda_e_im", p.lambda_e.im);
    put("omega_rabi_re", p.omega_rabi.re);
    put("omega_rabi_im", p.omega_rabi.im);
    put("delta", p.delta);
    put("big_delta", p.big_delta);
    put("omega_cavity", p.omega_cavity);
    put("gamma_a", p.gamma_a);
    put("gamma_c", p.gamma_c);
    if let Some(profile) = &p.profile {
        put("waist_m", profile.waist_m);
        put("speed_mps", profile.speed_mps);
    }
    map.insert("n_max".to_string(), serde_json::json!(p.n_max));
    serde_json::Value::Object(map)
}

/// Echoes the derived quantities, splitting the complex pump into parts.
pub fn effective_echo(eff: &EffectiveParams) -> serde_json::Value {
    serde_json::json!({
        "chi": eff.chi,
        "varpi": eff.varpi,
        "xi_re": eff.xi.re,
        "xi_im": eff.xi.im,
        "xi_abs": eff.xi_abs(),
        "theta": eff.theta(),
        "nu": eff.nu,
        "p_coupling": eff.p,
    })
}

/// The manifest that accompanies `output`: `<output>.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    name.push_str(".manifest.json");
    output.with_file_name(name)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, &e))
}

/// Writes `manifest` next to `output` and returns the manifest's path.
pub fn write_manifest(manifest: &RunManifest, output: &Path) -> Result<PathBuf> {
    let path = manifest_path(output);
    let body = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::InvalidParams(format!("manifest serialization failed: {e}")))?;
    write_text(&path, &format!("{body}\n"))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve_td, EvolutionConfig};
    use crate::hilbert::{number, vacuum, FockBasis, OperatorMatrix};
    use crate::model::derive_effective;

    #[test]
    fn scientific_format_is_twelve_digits_and_total() {
        assert_eq!(format_sci(1.0666666666666667), "1.06666666667e0");
        assert_eq!(format_sci(-2.5e-7), "-2.50000000000e-7");
        assert_eq!(format_sci(0.0), "0.00000000000e0");
        assert_eq!(format_sci(f64::NAN), "nan");
        assert_eq!(format_sci(f64::INFINITY), "inf");
        assert_eq!(format_sci(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn series_table_toggles_the_population_column() {
        let base = SeriesRow {
            t: 0.0,
            r: 0.0,
            var_min: 0.25,
            squeezing_pct: 0.0,
            pop_i: None,
        };
        let plain = render_series_csv(&[base]);
        assert!(plain.starts_with("t,r,var_min,squeezing_pct\n"));
        assert_eq!(plain.lines().count(), 2);

        let tracked = render_series_csv(&[SeriesRow {
            pop_i: Some(0.97),
            ..base
        }]);
        assert!(tracked.starts_with("t,r,var_min,squeezing_pct,pop_i\n"));
        assert!(tracked.lines().nth(1).unwrap().ends_with("9.70000000000e-1"));
    }

    #[test]
    fn sweep_table_has_the_exact_header_and_renders_flagged_rows() {
        let rows = [Fig2Row {
            delta_big: 1.6e5,
            p_coupling: f64::NAN,
            r_off: f64::NAN,
            r_on: 1.0666666666666667,
            ratio: f64::NAN,
            flagged: true,
        }];
        let text = render_fig2_csv(&rows);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "delta_big,p_coupling,r_off,r_on,ratio");
        assert_eq!(
            lines.next().unwrap(),
            "1.60000000000e5,nan,nan,1.06666666667e0,nan"
        );
    }

    #[test]
    fn rendering_is_deterministic() {
        let rows = [SeriesRow {
            t: 1e-4,
            r: 0.5333,
            var_min: 0.086,
            squeezing_pct: 65.6,
            pop_i: None,
        }];
        assert_eq!(render_series_csv(&rows), render_series_csv(&rows));
    }

    #[test]
    fn trajectory_export_carries_stats_and_optional_amplitudes() {
        let basis = FockBasis::new(5);
        let n_op = number(basis);
        let h = move |_t: f64| {
            OperatorMatrix::new(n_op.mat.mapv(|z| 1e3 * z), n_op.tag).unwrap()
        };
        let traj = evolve_td(&vacuum(basis), h, &EvolutionConfig::new(1e-5, 1e-6)).unwrap();
        let plain = render_trajectory_csv(&traj, false).unwrap();
        assert!(plain.starts_with("t,min_variance,r_extracted,phi_extracted\n"));

        let full = render_trajectory_csv(&traj, true).unwrap();
        let header = full.lines().next().unwrap();
        assert_eq!(header.split(',').count(), 4 + 2 * basis.dim());
        assert!(header.ends_with("re_5,im_5"));
    }

    #[test]
    fn manifest_echoes_keys_and_dedupes_warnings() {
        let params = crate::model::SystemParams::reference();
        let eff = derive_effective(&params).unwrap();
        let mut manifest = RunManifest::new("resonant", &params, Some(&eff));
        manifest.add_warnings(vec!["a".into(), "b".into(), "a".into()]);
        assert_eq!(manifest.warnings, vec!["a".to_string(), "b".to_string()]);

        let json = serde_json::to_value(&manifest).unwrap();
        assert_eq!(json["params"]["lambda_g_re"], serde_json::json!(3e5));
        assert_eq!(json["params"]["n_max"], serde_json::json!(63));
        assert_eq!(json["effective"]["chi"], serde_json::json!(8e4));
        // resonant reference: no finite coupling ratio
        assert!(json["effective"]["p_coupling"].is_null());
        assert_eq!(json["version"], serde_json::json!(env!("CARGO_PKG_VERSION")));
    }

    #[test]
    fn manifest_path_appends_the_full_suffix() {
        let p = manifest_path(Path::new("/tmp/out/series.csv"));
        assert_eq!(p, Path::new("/tmp/out/series.csv.manifest.json"));
    }
}
