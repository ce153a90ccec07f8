//! Frozen parameter sets of the reference figures.
//!
//! Each entry lists its parameters and which of them are artifact choices
//! rather than part of the figure definition. Bump [`REGISTRY_VERSION`] on
//! any change.

use std::f64::consts::PI;
use std::str::FromStr;

use rayon::prelude::*;
use serde_json::json;
use specklamp::coefficients::ase_coefficient;
use specklamp::correlations::{c_tv_at_zero, c_vv, c_vv_at_zero, CorrelationArgs, CorrelationKind};
use specklamp::statistics::{
    photocount_variance, windowed_correlation, AseSweep, DynamicsMode, StrongWaveSweep,
};

use crate::config::Range;
use crate::error::CliError;
use crate::table::Table;

pub const REGISTRY_VERSION: u32 = 1;

const THICKNESS: f64 = 100.0;
const G: f64 = 100.0;
const NBC: f64 = 10.0;
const ETA: f64 = -1.0;
const FLUX_RATIO: f64 = 10.0;
const FIG3_THICKNESSES: [f64; 3] = [10.0, 100.0, 1000.0];
const FIG5_X: [f64; 2] = [0.0, 1.0];
const FIG9_X: [f64; 3] = [0.5, 1.0, 2.0];
const TIME_X: [f64; 4] = [0.5, 1.0, 2.0, 2.5];

const X_AXIS: Range = Range::linear(0.0, 0.999 * PI, 200);
const Y_AXIS: Range = Range::linear(0.0, 10.0, 201);
const FIG5_NB: Range = Range::logarithmic(1e-3, 1e9, 121);
const FIG9_NB: Range = Range::logarithmic(1e-2, 1e8, 101);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureId {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
}

impl FromStr for FigureId {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "fig3" => FigureId::Fig3,
            "fig4" => FigureId::Fig4,
            "fig5" => FigureId::Fig5,
            "fig6" => FigureId::Fig6,
            "fig7" => FigureId::Fig7,
            "fig8" => FigureId::Fig8,
            "fig9" => FigureId::Fig9,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown figure id `{other}`; expected one of {}",
                    FigureId::ALL.map(FigureId::name).join(", ")
                )))
            }
        })
    }
}

fn rows_par<T: Sync>(
    points: &[T],
    f: impl Fn(&T) -> Result<Vec<f64>, CliError> + Sync + Send,
) -> Result<Vec<Vec<f64>>, CliError> {
    points.par_iter().map(f).collect()
}

/// Rows plus how many operating points raised validity warnings.
fn sweep_rows(
    pts: &[(f64, f64)],
    f: impl Fn(f64, f64) -> Result<(f64, bool), CliError> + Sync + Send,
) -> Result<(Vec<Vec<f64>>, usize), CliError> {
    let rows: Vec<(Vec<f64>, bool)> = pts
        .par_iter()
        .map(|&(x, nb)| f(x, nb).map(|(v, w)| (vec![x, nb, v], w)))
        .collect::<Result<_, CliError>>()?;
    let warned = rows.iter().filter(|r| r.1).count();
    Ok((rows.into_iter().map(|r| r.0).collect(), warned))
}

fn pairs(a: &[f64], b: &[f64]) -> Vec<(f64, f64)> {
    a.iter().flat_map(|&p| b.iter().map(move |&q| (p, q))).collect()
}

impl FigureId {
    pub const ALL: [FigureId; 7] = [
        FigureId::Fig3,
        FigureId::Fig4,
        FigureId::Fig5,
        FigureId::Fig6,
        FigureId::Fig7,
        FigureId::Fig8,
        FigureId::Fig9,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::Fig6 => "fig6",
            FigureId::Fig7 => "fig7",
            FigureId::Fig8 => "fig8",
            FigureId::Fig9 => "fig9",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            FigureId::Fig3 => "mean spontaneous-emission coefficient Vb against x for three thicknesses",
            FigureId::Fig4 => "equal-time correlation C_TV(0) against x",
            FigureId::Fig5 => "strong-wave normalized variance against mean photocount, x = 0 and 1",
            FigureId::Fig6 => "C_VV(t) against y = sqrt(t/t_c) for several x",
            FigureId::Fig7 => "equal-time correlation C_VV(0) against x",
            FigureId::Fig8 => "windowed variance d_VV against y = sqrt(tau/t_c) for several x",
            FigureId::Fig9 => "spontaneous-emission normalized variance against mean photocount for three x",
        }
    }

    pub fn parameters(self) -> serde_json::Value {
        match self {
            FigureId::Fig3 => json!({"L_over_ell": FIG3_THICKNESSES, "x": X_AXIS}),
            FigureId::Fig4 | FigureId::Fig7 => json!({"g": G, "x": X_AXIS}),
            FigureId::Fig5 => json!({
                "L_over_ell": THICKNESS, "nbc": NBC, "flux_ratio": FLUX_RATIO,
                "g": G, "eta": ETA, "x": FIG5_X, "nb": FIG5_NB,
            }),
            FigureId::Fig6 => json!({"L_over_ell": THICKNESS, "g": G, "x": TIME_X, "y": Y_AXIS}),
            FigureId::Fig8 => json!({"L_over_ell": THICKNESS, "g": G, "x": TIME_X, "y": Y_AXIS}),
            FigureId::Fig9 => json!({
                "L_over_ell": THICKNESS, "nbc": NBC, "g": G, "eta": ETA,
                "x": FIG9_X, "nb": FIG9_NB,
            }),
        }
    }

    /// Parameters not fixed by the figure definition.
    pub fn artifact_choices(self) -> Vec<String> {
        let mut v: Vec<&str> = match self {
            FigureId::Fig3 => vec!["x"],
            FigureId::Fig4 | FigureId::Fig7 => vec!["g", "x"],
            FigureId::Fig5 => vec!["nb"],
            FigureId::Fig6 | FigureId::Fig8 => vec!["L_over_ell", "g", "x", "y"],
            FigureId::Fig9 => vec!["x", "nb"],
        };
        v.sort_unstable();
        v.into_iter().map(|k| format!("{}.{k}", self.name())).collect()
    }

    /// The figure table and any validity warnings of its operating points.
    pub fn compute(self) -> Result<(Table, Vec<String>), CliError> {
        let mut t;
        let mut warned = 0;
        match self {
            FigureId::Fig3 => {
                t = Table::new("fig3", &["L_over_ell", "x", "Vb"]);
                let pts = pairs(&FIG3_THICKNESSES, &X_AXIS.points()?);
                t.extend(rows_par(&pts, |&(l, x)| Ok(vec![l, x, ase_coefficient(x, 1.0 / l)]))?);
            }
            FigureId::Fig4 => {
                t = Table::new("fig4", &["x", "C_TV0"]);
                t.extend(rows_par(&X_AXIS.points()?, |&x| Ok(vec![x, c_tv_at_zero(x, G)]))?);
            }
            FigureId::Fig7 => {
                t = Table::new("fig7", &["x", "C_VV0"]);
                t.extend(rows_par(&X_AXIS.points()?, |&x| Ok(vec![x, c_vv_at_zero(x, G)]))?);
            }
            FigureId::Fig5 => {
                t = Table::new("fig5", &["x", "nb", "delta2"]);
                let pts = pairs(&FIG5_X, &FIG5_NB.points()?);
                let (rows, w) = sweep_rows(&pts, |x, nb| {
                    let sweep = StrongWaveSweep {
                        thickness_over_ell: THICKNESS,
                        g: G,
                        x,
                        eta: ETA,
                        nbc: NBC,
                        flux_ratio: FLUX_RATIO,
                    };
                    let m = sweep.model_at(nb)?;
                    let v = photocount_variance(&m, DynamicsMode::Dynamic)?;
                    Ok((v.total, !m.warnings().is_empty()))
                })?;
                t.extend(rows);
                warned = w;
            }
            FigureId::Fig6 => {
                t = Table::new("fig6", &["x", "y", "C_VV"]);
                let pts = pairs(&TIME_X, &Y_AXIS.points()?);
                t.extend(rows_par(&pts, |&(x, y)| {
                    Ok(vec![x, y, c_vv(&CorrelationArgs::new(x, y, 1.0 / THICKNESS, G))])
                })?);
            }
            FigureId::Fig8 => {
                t = Table::new("fig8", &["x", "y", "delta2_VV"]);
                let pts = pairs(&TIME_X, &Y_AXIS.points()?);
                t.extend(rows_par(&pts, |&(x, y)| {
                    let d = windowed_correlation(CorrelationKind::VV, x, 1.0 / THICKNESS, G, y * y)?;
                    Ok(vec![x, y, d])
                })?);
            }
            FigureId::Fig9 => {
                t = Table::new("fig9", &["x", "nb", "delta2"]);
                let pts = pairs(&FIG9_X, &FIG9_NB.points()?);
                let (rows, w) = sweep_rows(&pts, |x, nb| {
                    let sweep = AseSweep {
                        thickness_over_ell: THICKNESS,
                        g: G,
                        x,
                        eta: ETA,
                        nbc: NBC,
                    };
                    let m = sweep.model_at(nb)?;
                    let v = photocount_variance(&m, DynamicsMode::Dynamic)?;
                    Ok((v.total, !m.warnings().is_empty()))
                })?;
                t.extend(rows);
                warned = w;
            }
        }
        let warnings = if warned > 0 {
            vec![format!(
                "{}: {warned} of {} points fall outside the asymptotic validity bounds",
                self.name(),
                t.rows.len()
            )]
        } else {
            Vec::new()
        };
        Ok((t, warnings))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in FigureId::ALL {
            assert_eq!(id.name().parse::<FigureId>().unwrap(), id);
        }
        assert!("fig10".parse::<FigureId>().is_err());
    }

    #[test]
    fn artifact_choices_name_real_parameters() {
        for id in FigureId::ALL {
            let p = id.parameters();
            for key in id.artifact_choices() {
                let k = key.split_once('.').unwrap().1;
                assert!(p.get(k).is_some(), "{key}");
            }
        }
    }
}
