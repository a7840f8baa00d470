//! Command implementations behind the `hkmetric` binary. Every command writes
//! to caller-supplied sinks and returns its exit code.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curvature::{frame_curvature_of, orientation_of};
use crate::expsum::ExpSumPotential;
use crate::geometry::{GeometryError, LocalGeometry, NEAR_LOCUS_GUARD};
use crate::jets::RealChartPoint;
use crate::spectrum::{expand, Mode, SpectrumData, SpectrumError};
use crate::verify::{full_report, report_to_json, SuiteConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: malformed spectrum file: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error("bad box '{0}': expected lo:hi or four comma-separated lo:hi ranges with lo < hi")]
    BadBox(String),
    #[error("bad point '{0}': expected four comma-separated numbers")]
    BadPoint(String),
    #[error("grid must have at least one node per axis")]
    BadGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexEntry {
    pub re: f64,
    pub im: f64,
}

impl From<ComplexEntry> for Complex64 {
    fn from(c: ComplexEntry) -> Self {
        Complex64::new(c.re, c.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeEntry {
    pub alpha: ComplexEntry,
    #[serde(rename = "F")]
    pub f: ComplexEntry,
    #[serde(rename = "G")]
    pub g: ComplexEntry,
}

/// On-disk spectrum: `{"nu": .., "modes": [{"alpha": {re, im}, "F": .., "G": ..}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumFile {
    pub nu: f64,
    pub modes: Vec<ModeEntry>,
}

impl SpectrumFile {
    pub fn to_spectrum(&self) -> Result<SpectrumData, SpectrumError> {
        SpectrumData::new(
            self.nu,
            self.modes.iter().map(|m| Mode::new(m.alpha.into(), m.f.into(), m.g.into())),
        )
    }
}

/// A parsed and expanded spectrum file.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub spectrum: SpectrumData,
    pub potential: ExpSumPotential,
    /// Number of modes folded into an earlier one with the same `alpha`.
    pub merged: usize,
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    let file: SpectrumFile =
        serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.into(), source })?;
    let spectrum = file.to_spectrum()?;
    let potential = expand(&spectrum)?;
    let merged = file.modes.len() - spectrum.modes().len();
    Ok(Loaded { spectrum, potential, merged })
}

/// `lo:hi` for every axis, or four comma-separated `lo:hi` ranges.
pub fn parse_box(text: &str) -> Result<[(f64, f64); 4], CliError> {
    let bad = || CliError::BadBox(text.to_string());
    let range = |s: &str| -> Result<(f64, f64), CliError> {
        let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        if lo.is_finite() && hi.is_finite() && lo < hi {
            Ok((lo, hi))
        } else {
            Err(bad())
        }
    };
    let parts: Vec<&str> = text.split(',').collect();
    match parts.len() {
        1 => Ok([range(parts[0])?; 4]),
        4 => Ok([range(parts[0])?, range(parts[1])?, range(parts[2])?, range(parts[3])?]),
        _ => Err(bad()),
    }
}

pub fn parse_point(text: &str) -> Result<RealChartPoint, CliError> {
    let bad = || CliError::BadPoint(text.to_string());
    let xs: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
        .collect::<Option<_>>()
        .ok_or_else(bad)?;
    let xs: [f64; 4] = xs.try_into().map_err(|_| bad())?;
    Ok(RealChartPoint(xs))
}

fn input_error(err: &mut dyn Write, e: &CliError) -> i32 {
    let _ = writeln!(err, "error: {e}");
    EXIT_INPUT
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn cmd_validate(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let loaded = match load(path) {
        Ok(l) => l,
        Err(e) => return input_error(err, &e),
    };
    if loaded.merged > 0 {
        let _ = writeln!(err, "notice: {} mode(s) with repeated alpha merged", loaded.merged);
    }
    let closure = loaded.potential.conjugation_check();
    if !closure.pass {
        let _ = writeln!(err, "error: expansion is not conjugation-closed (terms {:?})", closure.unpaired);
        return EXIT_INPUT;
    }
    let _ = writeln!(
        out,
        "ok: {} mode(s), {} term(s), nu = {}",
        loaded.spectrum.modes().len(),
        loaded.potential.len(),
        loaded.spectrum.nu()
    );
    EXIT_PASS
}

pub fn cmd_expand(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let loaded = match load(path) {
        Ok(l) => l,
        Err(e) => return input_error(err, &e),
    };
    let _ = writeln!(out, "term,K_re,K_im,lp_re,lp_im,lq_re,lq_im,l2_re,l2_im,lw_re,lw_im");
    for (i, t) in loaded.potential.terms().iter().enumerate() {
        let fields: Vec<String> = std::iter::once(t.amplitude)
            .chain(t.exponents())
            .flat_map(|z| [sci(z.re), sci(z.im)])
            .collect();
        let _ = writeln!(out, "{i},{}", fields.join(","));
    }
    EXIT_PASS
}

pub struct VerifyOptions {
    pub points: usize,
    pub seed: u64,
    pub bounds: Option<String>,
    pub report: Option<PathBuf>,
}

pub fn cmd_verify(path: &Path, opts: &VerifyOptions, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let bounds = match opts.bounds.as_deref().map(parse_box).transpose() {
        Ok(b) => b,
        Err(e) => return input_error(err, &e),
    };
    let loaded = match load(path) {
        Ok(l) => l,
        Err(e) => return input_error(err, &e),
    };
    let mut config = SuiteConfig { n_points: opts.points, seed: opts.seed, ..SuiteConfig::default() };
    if let Some(b) = bounds {
        config.bounds = b;
    }
    let report = full_report(&loaded.potential, loaded.spectrum.nu(), &config);
    for c in &report.checks {
        let status = match (c.informational, c.pass) {
            (true, _) => "INFO",
            (false, true) => "PASS",
            (false, false) => "FAIL",
        };
        let worst = c.worst_residual.map_or("-".to_string(), |w| format!("{w:.3e}"));
        let note = c.note.as_deref().map(|n| format!("  ({n})")).unwrap_or_default();
        let _ = writeln!(out, "{status} {:<24} worst {worst:>10}  tol {:.0e}  n={}{note}", c.name, c.tolerance, c.evaluated);
    }
    if let Some(s) = report.orientation_sign {
        let _ = writeln!(out, "orientation sign {s}");
    }
    if let Some(rpath) = &opts.report {
        if let Err(source) = fs::write(rpath, report_to_json(&report)) {
            return input_error(err, &CliError::Io { path: rpath.clone(), source });
        }
    }
    if report.pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

fn local_geometry(
    path: &Path,
    at: &str,
    err: &mut dyn Write,
) -> Result<LocalGeometry, i32> {
    let at = parse_point(at).map_err(|e| input_error(err, &e))?;
    let loaded = load(path).map_err(|e| input_error(err, &e))?;
    match LocalGeometry::new(&loaded.potential, loaded.spectrum.nu(), &at, NEAR_LOCUS_GUARD) {
        Ok(g) => Ok(g),
        Err(GeometryError::NearLocus { locus, c2 }) => {
            let _ = writeln!(err, "near singular locus: c^2 - |a|^2 = {locus:.6e} (c^2 = {c2:.6e})");
            Err(EXIT_FAIL)
        }
        Err(e) => {
            let _ = writeln!(err, "{e}");
            Err(EXIT_FAIL)
        }
    }
}

pub fn cmd_metric(path: &Path, at: &str, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let geo = match local_geometry(path, at, err) {
        Ok(g) => g,
        Err(code) => return code,
    };
    let g = match geo.metric() {
        Ok(g) => g,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_FAIL;
        }
    };
    let _ = writeln!(out, "v = {}", sci(geo.jet.value()));
    let _ = writeln!(out, "c^2 - |a|^2 = {}", sci(geo.locus));
    let _ = writeln!(out, "metric:");
    for row in g.0 {
        let _ = writeln!(out, "  {}", row.map(sci).join("  "));
    }
    let eig = g.eigenvalues();
    let _ = writeln!(out, "eigenvalues: {}", eig.map(sci).join("  "));
    if eig[0] > 0.0 {
        EXIT_PASS
    } else {
        let _ = writeln!(err, "metric is not positive definite here (c^2 < |a|^2)");
        EXIT_FAIL
    }
}

pub fn cmd_curvature(path: &Path, at: &str, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let geo = match local_geometry(path, at, err) {
        Ok(g) => g,
        Err(code) => return code,
    };
    let result = frame_curvature_of(&geo).and_then(|f| Ok((orientation_of(&geo)?, f)));
    let (sign, frame) = match result {
        Ok(x) => x,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_FAIL;
        }
    };
    let duality = frame.duality(sign);
    let dens = frame.densities(sign);
    let _ = writeln!(out, "orientation sign {sign}");
    let _ = writeln!(out, "|Riemann| = {}", sci(frame.riemann_norm()));
    let _ = writeln!(out, "|Ricci|/|Riemann| = {}", sci(frame.ricci_ratio()));
    let _ = writeln!(out, "scalar = {}", sci(frame.scalar()));
    let _ = writeln!(out, "asd residual = {}", sci(duality.asd_residual));
    let _ = writeln!(out, "chi density = {}", sci(dens.chi_density));
    let _ = writeln!(out, "tau density = {}", sci(dens.tau_density));
    let _ = writeln!(out, "hitchin saturation = {}", sci(dens.saturation_residual()));
    EXIT_PASS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanField {
    Locus,
    V,
    Asd,
}

/// Value of `field` at one grid node; NaN where it is undefined.
pub fn scan_value(potential: &ExpSumPotential, nu: f64, at: &RealChartPoint, field: ScanField) -> f64 {
    match field {
        ScanField::V => potential.eval(&at.coord()).unwrap_or(f64::NAN),
        ScanField::Locus => potential
            .jet(&at.coord(), 1)
            .map(|j| crate::geometry::singular_locus_value(&crate::geometry::FirstDerivs::from_jet(&j), nu))
            .unwrap_or(f64::NAN),
        ScanField::Asd => crate::curvature::asd_residual(potential, nu, at).unwrap_or(f64::NAN),
    }
}

/// Nodes of an `n⁴` grid, last coordinate fastest.
pub fn grid_points(bounds: &[(f64, f64); 4], n: usize) -> Vec<RealChartPoint> {
    let node = |k: usize, i: usize| {
        let (lo, hi) = bounds[k];
        if n == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    let mut pts = Vec::with_capacity(n.pow(4));
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    pts.push(RealChartPoint([node(0, a), node(1, b), node(2, c), node(3, d)]));
                }
            }
        }
    }
    pts
}

pub struct ScanOptions {
    pub grid: usize,
    pub bounds: Option<String>,
    pub field: ScanField,
    pub output: Option<PathBuf>,
}

pub fn cmd_scan(path: &Path, opts: &ScanOptions, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let bounds = match opts.bounds.as_deref().map(parse_box).transpose() {
        Ok(b) => b.unwrap_or(crate::verify::DEFAULT_BOX),
        Err(e) => return input_error(err, &e),
    };
    if opts.grid == 0 {
        return input_error(err, &CliError::BadGrid);
    }
    let loaded = match load(path) {
        Ok(l) => l,
        Err(e) => return input_error(err, &e),
    };
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let rows = std::iter::once(["x1", "x2", "x3", "x4", "value"].map(String::from)).chain(
            grid_points(&bounds, opts.grid).into_iter().map(|p| {
                let v = scan_value(&loaded.potential, loaded.spectrum.nu(), &p, opts.field);
                [p.0[0], p.0[1], p.0[2], p.0[3], v].map(sci)
            }),
        );
        for row in rows {
            if let Err(e) = w.write_record(&row) {
                let _ = writeln!(err, "error: {e}");
                return EXIT_INPUT;
            }
        }
        if let Err(e) = w.flush() {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    }
    let written = match &opts.output {
        Some(p) => fs::write(p, &buf).map_err(|source| CliError::Io { path: p.clone(), source }),
        None => out.write_all(&buf).map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
    };
    match written {
        Ok(()) => EXIT_PASS,
        Err(e) => input_error(err, &e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_syntax() {
        assert_eq!(parse_box("-1:1").unwrap(), [(-1.0, 1.0); 4]);
        let b = parse_box("0:1,-2:2,0:0.5,-1:0").unwrap();
        assert_eq!(b[1], (-2.0, 2.0));
        for bad in ["", "1:0", "0:1,0:1", "a:b", "0:1,0:1,0:1,0:inf", "-1..1"] {
            assert!(parse_box(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn point_syntax() {
        assert_eq!(parse_point("0.1, 0.2,0.3,0.4").unwrap().0, [0.1, 0.2, 0.3, 0.4]);
        assert!(parse_point("1,2,3").is_err());
        assert!(parse_point("1,2,3,x").is_err());
    }

    #[test]
    fn grid_order_and_size() {
        let pts = grid_points(&[(0.0, 1.0); 4], 2);
        assert_eq!(pts.len(), 16);
        assert_eq!(pts[1].0, [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(pts[15].0, [1.0; 4]);
        assert_eq!(grid_points(&[(0.0, 2.0); 4], 1)[0].0, [1.0; 4]);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"{"nu":0,"modes":[{"alpha":{"re":1,"im":0},"F":{"re":1,"im":0},"G":{"re":0,"im":0},"H":1}]}"#;
        assert!(serde_json::from_str::<SpectrumFile>(text).is_err());
    }
}
