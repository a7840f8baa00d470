//! Levi-Civita connection, Riemann and Ricci tensors, Hodge duality and the
//! curvature identities of the hyper-Kähler metrics, from exact second-order
//! Taylor data of the metric.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;
use thiserror::Error;

use crate::expsum::ExpSumPotential;
use crate::geometry::{
    kahler_triple, GeometryError, LocalGeometry, TwoForm, NEAR_LOCUS_GUARD, PAIRS,
};
use crate::jets::{RealChartPoint, TaylorScalar};

type T3 = [[[f64; 4]; 4]; 4];
type T4 = [[[[f64; 4]; 4]; 4]; 4];

/// Tolerance for the Kähler triple to count as (anti-)self-dual when fixing the orientation.
pub const ORIENTATION_TOL: f64 = 1e-8;
/// Relative singular-value threshold for the Killing rank.
pub const KILLING_RANK_TOL: f64 = 1e-8;
const SATURATION_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurvatureError {
    #[error("metric is not invertible")]
    Degenerate,
    #[error("metric is not positive definite")]
    NotPositive,
    #[error("Kähler triple is neither self-dual nor anti-self-dual (defects {plus:e}, {minus:e})")]
    Orientation { plus: f64, minus: f64 },
    #[error("only {found} points pass the guards, need at least {needed}")]
    TooFewPoints { found: usize, needed: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Real metric with first and second chart derivatives:
/// `dg[k][i][j] = ∂_k g_ij`, `ddg[k][l][i][j] = ∂_k∂_l g_ij`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricField {
    pub g: [[f64; 4]; 4],
    pub dg: T3,
    pub ddg: T4,
}

impl MetricField {
    pub fn from_taylor(m: &[[TaylorScalar; 4]; 4]) -> Self {
        Self {
            g: std::array::from_fn(|i| std::array::from_fn(|j| m[i][j].value.re)),
            dg: std::array::from_fn(|k| std::array::from_fn(|i| std::array::from_fn(|j| m[i][j].grad[k].re))),
            ddg: std::array::from_fn(|k| {
                std::array::from_fn(|l| std::array::from_fn(|i| std::array::from_fn(|j| m[i][j].h(k, l).re)))
            }),
        }
    }

    pub fn constant(g: [[f64; 4]; 4]) -> Self {
        Self { g, dg: [[[0.0; 4]; 4]; 4], ddg: [[[[0.0; 4]; 4]; 4]; 4] }
    }

    pub fn inverse(&self) -> Result<[[f64; 4]; 4], CurvatureError> {
        invert(&self.g)
    }
}

fn mat4(g: &[[f64; 4]; 4]) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| g[i][j])
}

fn invert(g: &[[f64; 4]; 4]) -> Result<[[f64; 4]; 4], CurvatureError> {
    let inv = mat4(g).try_inverse().ok_or(CurvatureError::Degenerate)?;
    if inv.iter().any(|x| !x.is_finite()) {
        return Err(CurvatureError::Degenerate);
    }
    Ok(std::array::from_fn(|i| std::array::from_fn(|j| inv[(i, j)])))
}

/// `Γ^a_bc` and its first derivatives `dgamma[k][a][b][c] = ∂_k Γ^a_bc`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Christoffel {
    pub gamma: T3,
    pub dgamma: T4,
}

pub fn christoffel(metric: &MetricField) -> Result<Christoffel, CurvatureError> {
    let ginv = metric.inverse()?;
    let (dg, ddg) = (&metric.dg, &metric.ddg);
    // lowered symbols Γ_dbc and their derivatives
    let low: T3 = std::array::from_fn(|d| {
        std::array::from_fn(|b| std::array::from_fn(|c| 0.5 * (dg[b][d][c] + dg[c][d][b] - dg[d][b][c])))
    });
    let dlow: T4 = std::array::from_fn(|k| {
        std::array::from_fn(|d| {
            std::array::from_fn(|b| {
                std::array::from_fn(|c| 0.5 * (ddg[k][b][d][c] + ddg[k][c][d][b] - ddg[k][d][b][c]))
            })
        })
    });
    // ∂_k g^{-1} = -g^{-1} (∂_k g) g^{-1}
    let dginv: T3 = std::array::from_fn(|k| {
        let m = -(mat4(&ginv) * mat4(&dg[k]) * mat4(&ginv));
        std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
    });
    let mut gamma = [[[0.0; 4]; 4]; 4];
    let mut dgamma = [[[[0.0; 4]; 4]; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                gamma[a][b][c] = (0..4).map(|d| ginv[a][d] * low[d][b][c]).sum();
                for k in 0..4 {
                    dgamma[k][a][b][c] =
                        (0..4).map(|d| dginv[k][a][d] * low[d][b][c] + ginv[a][d] * dlow[k][d][b][c]).sum();
                }
            }
        }
    }
    Ok(Christoffel { gamma, dgamma })
}

/// `∇_k g_ij`, which vanishes for the Levi-Civita connection.
pub fn metric_compatibility(metric: &MetricField, conn: &Christoffel) -> T3 {
    let (g, gam) = (&metric.g, &conn.gamma);
    std::array::from_fn(|k| {
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                metric.dg[k][i][j] - (0..4).map(|l| gam[l][k][i] * g[l][j] + gam[l][k][j] * g[i][l]).sum::<f64>()
            })
        })
    })
}

/// `R^a_bcd = ∂_cΓ^a_db - ∂_dΓ^a_cb + Γ^a_ce Γ^e_db - Γ^a_de Γ^e_cb`.
pub fn riemann_up(gamma: &T3, dgamma: &T4) -> T4 {
    std::array::from_fn(|a| {
        std::array::from_fn(|b| {
            std::array::from_fn(|c| {
                std::array::from_fn(|d| {
                    dgamma[c][a][d][b] - dgamma[d][a][c][b]
                        + (0..4).map(|e| gamma[a][c][e] * gamma[e][d][b] - gamma[a][d][e] * gamma[e][c][b]).sum::<f64>()
                })
            })
        })
    })
}

/// Levi-Civita symbol `ε_abcd` with `ε_1234 = 1`.
pub fn levi_civita(idx: [usize; 4]) -> f64 {
    let mut p = idx;
    let mut sign = 1.0;
    for i in 0..4 {
        if p[i] > 3 {
            return 0.0;
        }
        for j in i + 1..4 {
            if p[i] == p[j] {
                return 0.0;
            }
        }
    }
    for i in 0..4 {
        while p[i] != i {
            let t = p[i];
            p.swap(i, t);
            sign = -sign;
        }
    }
    sign
}

/// `(*F)_ab = ½ s √det g ε_abcd F^cd` for a positive definite metric.
pub fn hodge_star(form: &TwoForm, g: &[[f64; 4]; 4], orientation_sign: f64) -> Result<TwoForm, CurvatureError> {
    let m = mat4(g);
    if m.cholesky().is_none() {
        return Err(CurvatureError::NotPositive);
    }
    let ginv = invert(g)?;
    Ok(hodge_with(form, &ginv, orientation_sign * m.determinant().sqrt()))
}

fn hodge_with(form: &TwoForm, ginv: &[[f64; 4]; 4], vol: f64) -> TwoForm {
    let f = form.matrix();
    let mut up = [[0.0; 4]; 4];
    for c in 0..4 {
        for d in 0..4 {
            up[c][d] = (0..4)
                .flat_map(|i| (0..4).map(move |j| (i, j)))
                .map(|(i, j)| ginv[c][i] * ginv[d][j] * f[i][j])
                .sum();
        }
    }
    TwoForm(PAIRS.map(|(a, b)| {
        let mut s = 0.0;
        for c in 0..4 {
            for d in 0..4 {
                s += levi_civita([a, b, c, d]) * up[c][d];
            }
        }
        0.5 * vol * s
    }))
}

/// Volume-form coefficients of `(1/16π²) Ω^a_b ∧ *Ω^b_a` and `(1/24π²) Ω^a_b ∧ Ω^b_a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityPair {
    pub chi_density: f64,
    pub tau_density: f64,
}

impl DensityPair {
    /// `|χ + (3/2)τ| / (|χ| + |τ| + ε)`.
    pub fn saturation_residual(&self) -> f64 {
        (self.chi_density + 1.5 * self.tau_density).abs()
            / (self.chi_density.abs() + self.tau_density.abs() + SATURATION_FLOOR)
    }
}

/// Curvature of a metric at one point, before any orientation choice.
#[derive(Debug, Clone)]
pub struct Curvature {
    pub g: [[f64; 4]; 4],
    pub ginv: [[f64; 4]; 4],
    pub sqrt_det: f64,
    pub christoffel: Christoffel,
    /// `R^a_bcd`.
    pub riemann_up: T4,
    /// `R_abcd`.
    pub riemann: T4,
}

impl Curvature {
    pub fn from_metric(metric: &MetricField) -> Result<Self, CurvatureError> {
        let conn = christoffel(metric)?;
        let up = riemann_up(&conn.gamma, &conn.dgamma);
        let g = metric.g;
        let riemann = std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                std::array::from_fn(|c| std::array::from_fn(|d| (0..4).map(|e| g[a][e] * up[e][b][c][d]).sum()))
            })
        });
        let det = mat4(&g).determinant();
        Ok(Self {
            g,
            ginv: metric.inverse()?,
            sqrt_det: det.abs().sqrt(),
            christoffel: conn,
            riemann_up: up,
            riemann,
        })
    }

    pub fn riemann_norm(&self) -> f64 {
        self.riemann.iter().flatten().flatten().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `R_bd = R^a_bad`.
    pub fn ricci(&self) -> [[f64; 4]; 4] {
        std::array::from_fn(|b| std::array::from_fn(|d| (0..4).map(|a| self.riemann_up[a][b][a][d]).sum()))
    }

    pub fn scalar(&self) -> f64 {
        let r = self.ricci();
        (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).map(|(i, j)| self.ginv[i][j] * r[i][j]).sum()
    }

    /// `‖Ric‖ / ‖Riem‖` in chart components; 0 for flat data.
    pub fn ricci_ratio(&self) -> f64 {
        let n = self.riemann_norm();
        if n == 0.0 {
            return 0.0;
        }
        self.ricci().iter().flatten().map(|x| x * x).sum::<f64>().sqrt() / n
    }

    /// Worst of the pair antisymmetries, pair symmetry and first Bianchi identity,
    /// relative to the largest component.
    pub fn symmetry_residual(&self) -> f64 {
        symmetry_defect(&self.riemann)
    }

    /// `Ω^a_b` with components `R^a_bcd` on the last pair.
    pub fn curvature_forms(&self) -> [[TwoForm; 4]; 4] {
        std::array::from_fn(|a| {
            std::array::from_fn(|b| TwoForm(PAIRS.map(|(c, d)| self.riemann_up[a][b][c][d])))
        })
    }

    fn star(&self, form: &TwoForm, sign: f64) -> TwoForm {
        hodge_with(form, &self.ginv, sign * self.sqrt_det)
    }

    /// Self-dual and anti-self-dual part norms and `‖Ω + *Ω‖ / ‖Ω‖`.
    pub fn duality(&self, sign: f64) -> Duality {
        duality_of(&self.curvature_forms(), |f| self.star(f, sign))
    }

    pub fn densities(&self, sign: f64) -> DensityPair {
        densities_of(&self.curvature_forms(), |f| self.star(f, sign), sign * self.sqrt_det)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Duality {
    pub sd_part_norm: f64,
    pub asd_part_norm: f64,
    pub asd_residual: f64,
    pub flat: bool,
}

/// Curvature summary at a point of a solution, with the calibrated orientation.
#[derive(Debug, Clone)]
pub struct CurvaturePack {
    pub riemann: T4,
    pub ricci: [[f64; 4]; 4],
    pub scalar: f64,
    pub asd_residual: f64,
    pub sd_part_norm: f64,
    pub asd_part_norm: f64,
    pub flat: bool,
    pub symmetry_residual: f64,
    pub ricci_ratio: f64,
    pub orientation_sign: f64,
    pub densities: DensityPair,
}

/// Curvature in a real orthonormal coframe, from the Cartan structure
/// equations `dω^a = -Γ^a_b∧ω^b`, `Ω^a_b = dΓ^a_b + Γ^a_c∧Γ^c_b`.
///
/// Frame components stay well scaled where the chart metric is nearly
/// degenerate, which is the regime close to the singular locus.
#[derive(Debug, Clone)]
pub struct FrameCurvature {
    /// `e[a][i] = ω^a_i`.
    pub e: [[f64; 4]; 4],
    /// `einv[i][a]`: chart components of the dual frame vector `e_a`.
    pub einv: [[f64; 4]; 4],
    pub det: f64,
    /// `de[k][a][i] = ∂_k ω^a_i`.
    pub de: T3,
    /// Connection coefficients `γ_abc = Γ_ab(e_c)`.
    pub gamma: T3,
    /// `R_abcd = Ω_ab(e_c, e_d)`.
    pub riemann: T4,
}

impl FrameCurvature {
    pub fn new(omega: &[[TaylorScalar; 4]; 4]) -> Result<Self, CurvatureError> {
        let e: [[f64; 4]; 4] = std::array::from_fn(|a| std::array::from_fn(|i| omega[a][i].value.re));
        let de: T3 = std::array::from_fn(|k| std::array::from_fn(|a| std::array::from_fn(|i| omega[a][i].grad[k].re)));
        let dde: T4 = std::array::from_fn(|k| {
            std::array::from_fn(|l| std::array::from_fn(|a| std::array::from_fn(|i| omega[a][i].h(k, l).re)))
        });
        let einv = invert(&e)?;
        let dinv: T3 = std::array::from_fn(|k| {
            let m = -(mat4(&einv) * mat4(&de[k]) * mat4(&einv));
            std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
        });
        // dω^a in chart components and its chart derivatives
        let dw: T3 = std::array::from_fn(|a| std::array::from_fn(|i| std::array::from_fn(|j| de[i][a][j] - de[j][a][i])));
        let ddw: T4 = std::array::from_fn(|k| {
            std::array::from_fn(|a| {
                std::array::from_fn(|i| std::array::from_fn(|j| dde[k][i][a][j] - dde[k][j][a][i]))
            })
        });
        let mut cc = [[[0.0; 4]; 4]; 4];
        let mut dcc = [[[[0.0; 4]; 4]; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for i in 0..4 {
                        for j in 0..4 {
                            cc[a][b][c] += dw[a][i][j] * einv[i][b] * einv[j][c];
                            for k in 0..4 {
                                dcc[k][a][b][c] += ddw[k][a][i][j] * einv[i][b] * einv[j][c]
                                    + dw[a][i][j] * (dinv[k][i][b] * einv[j][c] + einv[i][b] * dinv[k][j][c]);
                            }
                        }
                    }
                }
            }
        }
        let connection = |c: &T3, a: usize, b: usize, d: usize| 0.5 * (c[a][b][d] + c[b][d][a] - c[d][a][b]);
        let gamma: T3 = std::array::from_fn(|a| std::array::from_fn(|b| std::array::from_fn(|c| connection(&cc, a, b, c))));
        // frame derivative e_f(γ_abc)
        let egamma: T4 = std::array::from_fn(|f| {
            std::array::from_fn(|a| {
                std::array::from_fn(|b| {
                    std::array::from_fn(|c| (0..4).map(|k| einv[k][f] * connection(&dcc[k], a, b, c)).sum())
                })
            })
        });
        let riemann = std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                std::array::from_fn(|c| {
                    std::array::from_fn(|d| {
                        egamma[c][a][b][d] - egamma[d][a][b][c]
                            + (0..4)
                                .map(|f| {
                                    gamma[a][b][f] * cc[f][c][d] + gamma[a][f][c] * gamma[f][b][d]
                                        - gamma[a][f][d] * gamma[f][b][c]
                                })
                                .sum::<f64>()
                    })
                })
            })
        });
        Ok(Self { e, einv, det: mat4(&e).determinant(), de, gamma, riemann })
    }

    pub fn riemann_norm(&self) -> f64 {
        self.riemann.iter().flatten().flatten().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn ricci(&self) -> [[f64; 4]; 4] {
        std::array::from_fn(|b| std::array::from_fn(|d| (0..4).map(|a| self.riemann[a][b][a][d]).sum()))
    }

    pub fn scalar(&self) -> f64 {
        let r = self.ricci();
        (0..4).map(|i| r[i][i]).sum()
    }

    pub fn ricci_ratio(&self) -> f64 {
        let n = self.riemann_norm();
        if n == 0.0 {
            return 0.0;
        }
        self.ricci().iter().flatten().map(|x| x * x).sum::<f64>().sqrt() / n
    }

    pub fn symmetry_residual(&self) -> f64 {
        symmetry_defect(&self.riemann)
    }

    /// Chart components of a frame tensor `T_abcd`.
    pub fn riemann_chart(&self) -> T4 {
        let e = &self.e;
        let mut out = [[[[0.0; 4]; 4]; 4]; 4];
        for (i, o1) in out.iter_mut().enumerate() {
            for (j, o2) in o1.iter_mut().enumerate() {
                for (k, o3) in o2.iter_mut().enumerate() {
                    for (l, o) in o3.iter_mut().enumerate() {
                        let mut s = 0.0;
                        for a in 0..4 {
                            for b in 0..4 {
                                for c in 0..4 {
                                    for d in 0..4 {
                                        s += self.riemann[a][b][c][d] * e[a][i] * e[b][j] * e[c][k] * e[d][l];
                                    }
                                }
                            }
                        }
                        *o = s;
                    }
                }
            }
        }
        out
    }

    /// Chart Christoffel symbols `Γ^i_jk` from `∇ω^a = -Γ^a_b ⊗ ω^b`.
    pub fn christoffel_chart(&self) -> T3 {
        let (e, einv, g) = (&self.e, &self.einv, &self.gamma);
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                std::array::from_fn(|k| {
                    (0..4)
                        .map(|a| {
                            let mut s = self.de[j][a][k];
                            for b in 0..4 {
                                for c in 0..4 {
                                    s += g[a][b][c] * e[c][j] * e[b][k];
                                }
                            }
                            einv[i][a] * s
                        })
                        .sum()
                })
            })
        })
    }

    /// `R^i_jkl` over the chart.
    pub fn riemann_up_chart(&self) -> T4 {
        let low = self.riemann_chart();
        let ginv: [[f64; 4]; 4] =
            std::array::from_fn(|i| std::array::from_fn(|j| (0..4).map(|a| self.einv[i][a] * self.einv[j][a]).sum()));
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                std::array::from_fn(|k| std::array::from_fn(|l| (0..4).map(|m| ginv[i][m] * low[m][j][k][l]).sum()))
            })
        })
    }

    pub fn ricci_chart(&self) -> [[f64; 4]; 4] {
        let r = self.ricci();
        let e = &self.e;
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                (0..4).flat_map(|a| (0..4).map(move |b| (a, b))).map(|(a, b)| r[a][b] * e[a][i] * e[b][j]).sum()
            })
        })
    }

    /// Frame components `F(e_a, e_b)` of a chart 2-form.
    pub fn to_frame(&self, form: &TwoForm) -> TwoForm {
        let f = form.matrix();
        TwoForm(PAIRS.map(|(a, b)| {
            let mut s = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    s += f[i][j] * self.einv[i][a] * self.einv[j][b];
                }
            }
            s
        }))
    }

    /// Orientation of the frame relative to `s · dx¹∧dx²∧dx³∧dx⁴`.
    fn frame_sign(&self, sign: f64) -> f64 {
        sign * self.det.signum()
    }

    /// Hodge star of frame components for the orientation `sign` of the chart.
    pub fn star(&self, form: &TwoForm, sign: f64) -> TwoForm {
        hodge_with(form, &IDENTITY, self.frame_sign(sign))
    }

    pub fn curvature_forms(&self) -> [[TwoForm; 4]; 4] {
        std::array::from_fn(|a| std::array::from_fn(|b| TwoForm(PAIRS.map(|(c, d)| self.riemann[a][b][c][d]))))
    }

    pub fn duality(&self, sign: f64) -> Duality {
        duality_of(&self.curvature_forms(), |f| self.star(f, sign))
    }

    pub fn densities(&self, sign: f64) -> DensityPair {
        densities_of(&self.curvature_forms(), |f| self.star(f, sign), self.frame_sign(sign))
    }
}

const IDENTITY: [[f64; 4]; 4] = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];

fn symmetry_defect(r: &T4) -> f64 {
    let scale = r.iter().flatten().flatten().flatten().map(|x| x.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let x = r[a][b][c][d];
                    for defect in [
                        x + r[b][a][c][d],
                        x + r[a][b][d][c],
                        x - r[c][d][a][b],
                        x + r[a][c][d][b] + r[a][d][b][c],
                    ] {
                        worst = worst.max(defect.abs());
                    }
                }
            }
        }
    }
    worst / scale
}

fn duality_of(forms: &[[TwoForm; 4]; 4], star: impl Fn(&TwoForm) -> TwoForm) -> Duality {
    let (mut sd, mut asd, mut total) = (0.0, 0.0, 0.0);
    for f in forms.iter().flatten() {
        let s = star(f);
        sd += f.add(&s).0.iter().map(|x| x * x).sum::<f64>() * 0.25;
        asd += f.sub(&s).0.iter().map(|x| x * x).sum::<f64>() * 0.25;
        total += f.0.iter().map(|x| x * x).sum::<f64>();
    }
    let flat = total == 0.0;
    Duality {
        sd_part_norm: sd.sqrt(),
        asd_part_norm: asd.sqrt(),
        asd_residual: if flat { 0.0 } else { 2.0 * sd.sqrt() / total.sqrt() },
        flat,
    }
}

fn densities_of(forms: &[[TwoForm; 4]; 4], star: impl Fn(&TwoForm) -> TwoForm, vol: f64) -> DensityPair {
    let (mut chi, mut tau) = (0.0, 0.0);
    for a in 0..4 {
        for b in 0..4 {
            let (x, y) = (&forms[a][b], &forms[b][a]);
            chi += x.wedge_top(&star(y));
            tau += x.wedge_top(y);
        }
    }
    DensityPair { chi_density: chi / vol / (16.0 * PI * PI), tau_density: tau / vol / (24.0 * PI * PI) }
}

pub fn frame_curvature_of(geo: &LocalGeometry) -> Result<FrameCurvature, CurvatureError> {
    let frame = geo.real_coframe_taylor()?;
    FrameCurvature::new(&frame.omega)
}

/// Worst self-duality defects `max_i ‖*θ_i ∓ θ_i‖/‖θ_i‖` of the Kähler triple
/// for the chart orientation, as `(self-dual, anti-self-dual)`.
pub fn triple_duality(geo: &LocalGeometry, frame: &FrameCurvature) -> Result<(f64, f64), CurvatureError> {
    let triple = kahler_triple(&geo.coframe()?);
    let forms = triple.forms.map(|t| frame.to_frame(&t));
    let defect = |flip: f64| {
        forms
            .iter()
            .map(|t| frame.star(t, 1.0).sub(&TwoForm(t.0.map(|x| flip * x))).norm_frobenius() / t.norm_frobenius())
            .fold(0.0, f64::max)
    };
    Ok((defect(1.0), defect(-1.0)))
}

/// Sign `s` making the Kähler triple self-dual under `*_s`.
pub fn orientation_of(geo: &LocalGeometry) -> Result<f64, CurvatureError> {
    orientation_with(geo, &frame_curvature_of(geo)?)
}

fn orientation_with(geo: &LocalGeometry, frame: &FrameCurvature) -> Result<f64, CurvatureError> {
    let (plus, minus) = triple_duality(geo, frame)?;
    if plus <= ORIENTATION_TOL {
        Ok(1.0)
    } else if minus <= ORIENTATION_TOL {
        Ok(-1.0)
    } else {
        Err(CurvatureError::Orientation { plus, minus })
    }
}

/// Chart-component curvature of the metric at a point (Christoffel route).
pub fn curvature_of(geo: &LocalGeometry) -> Result<Curvature, CurvatureError> {
    Curvature::from_metric(&MetricField::from_taylor(&geo.metric_taylor()?))
}

pub fn pack(geo: &LocalGeometry) -> Result<CurvaturePack, CurvatureError> {
    let frame = frame_curvature_of(geo)?;
    let sign = orientation_with(geo, &frame)?;
    let dual = frame.duality(sign);
    Ok(CurvaturePack {
        riemann: frame.riemann_chart(),
        ricci: frame.ricci_chart(),
        scalar: frame.scalar(),
        asd_residual: dual.asd_residual,
        sd_part_norm: dual.sd_part_norm,
        asd_part_norm: dual.asd_part_norm,
        flat: dual.flat,
        symmetry_residual: frame.symmetry_residual(),
        ricci_ratio: frame.ricci_ratio(),
        orientation_sign: sign,
        densities: frame.densities(sign),
    })
}

fn local(potential: &ExpSumPotential, nu: f64, at: &RealChartPoint) -> Result<LocalGeometry, CurvatureError> {
    Ok(LocalGeometry::new(potential, nu, at, NEAR_LOCUS_GUARD)?)
}

pub fn riemann(potential: &ExpSumPotential, nu: f64, at: &RealChartPoint) -> Result<CurvaturePack, CurvatureError> {
    pack(&local(potential, nu, at)?)
}

pub fn calibrate_orientation(potential: &ExpSumPotential, nu: f64, at: &RealChartPoint) -> Result<f64, CurvatureError> {
    orientation_of(&local(potential, nu, at)?)
}

pub fn asd_residual(potential: &ExpSumPotential, nu: f64, at: &RealChartPoint) -> Result<f64, CurvatureError> {
    Ok(riemann(potential, nu, at)?.asd_residual)
}

/// `(DensityPair, saturation residual)` at a point.
pub fn hitchin_density(
    potential: &ExpSumPotential,
    nu: f64,
    at: &RealChartPoint,
) -> Result<(DensityPair, f64), CurvatureError> {
    let d = riemann(potential, nu, at)?.densities;
    Ok((d, d.saturation_residual()))
}

/// Components `(123, 124, 134, 234)` of `dθ` and the matching sums of
/// absolute values of the three terms in each.
pub fn exterior_derivative(form: &[TaylorScalar; 6]) -> ([Complex64; 4], [f64; 4]) {
    const TRIPLES: [(usize, usize, usize); 4] = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)];
    let slot = |i: usize, j: usize| PAIRS.iter().position(|&p| p == (i, j)).expect("ordered pair");
    let mut d = [Complex64::new(0.0, 0.0); 4];
    let mut scale = [0.0; 4];
    for (n, &(i, j, k)) in TRIPLES.iter().enumerate() {
        let terms = [form[slot(j, k)].grad[i], -form[slot(i, k)].grad[j], form[slot(i, j)].grad[k]];
        d[n] = terms.iter().sum();
        scale[n] = terms.iter().map(|z| z.norm()).sum();
    }
    (d, scale)
}

/// `‖dθ‖` relative to the size of the terms that cancel in it; 0 for constant forms.
pub fn closedness_of(form: &[TaylorScalar; 6]) -> f64 {
    let (d, scale) = exterior_derivative(form);
    let num = d.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let den = scale.iter().map(|x| x * x).sum::<f64>().sqrt();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn closedness_of_geometry(geo: &LocalGeometry) -> Result<[f64; 3], CurvatureError> {
    let frame = geo.real_coframe_taylor()?;
    Ok(frame.kahler_triple().map(|form| closedness_of(&form)))
}

pub fn closedness_residual(potential: &ExpSumPotential, nu: f64, at: &RealChartPoint) -> Result<[f64; 3], CurvatureError> {
    closedness_of_geometry(&local(potential, nu, at)?)
}

/// Riemann tensor `R^a_bcd` with `∂Γ` replaced by Richardson-extrapolated
/// central differences (steps `step` and `step/2`) of Christoffel symbols
/// evaluated at shifted points; only first derivatives of the metric are used.
pub fn riemann_fd_oracle(
    potential: &ExpSumPotential,
    nu: f64,
    at: &RealChartPoint,
    step: f64,
) -> Result<T4, CurvatureError> {
    let gamma_at = |x: &RealChartPoint| -> Result<T3, CurvatureError> {
        let geo = LocalGeometry::new(potential, nu, x, 0.0)?;
        Ok(frame_curvature_of(&geo)?.christoffel_chart())
    };
    let central = |k: usize, h: f64| -> Result<T3, CurvatureError> {
        let (plus, minus) = (gamma_at(&at.shifted(k, h))?, gamma_at(&at.shifted(k, -h))?);
        Ok(std::array::from_fn(|a| {
            std::array::from_fn(|b| std::array::from_fn(|c| (plus[a][b][c] - minus[a][b][c]) / (2.0 * h)))
        }))
    };
    let gamma = gamma_at(at)?;
    let mut dgamma = [[[[0.0; 4]; 4]; 4]; 4];
    for (k, slab) in dgamma.iter_mut().enumerate() {
        let (coarse, fine) = (central(k, step)?, central(k, 0.5 * step)?);
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    slab[a][b][c] = (4.0 * fine[a][b][c] - coarse[a][b][c]) / 3.0;
                }
            }
        }
    }
    Ok(riemann_up(&gamma, &dgamma))
}

/// Translational symmetry analysis of the metric over a set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct KillingReport {
    pub rank: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    /// Unit chart directions `k` with `k·∇g_μν ≈ 0` at every point used.
    pub null_directions: Vec<[f64; 4]>,
    pub points_used: usize,
}

pub const KILLING_MIN_POINTS: usize = 10;

/// Stacks the chart gradients of the ten metric components over all guarded
/// points and reads the rank off the singular values. Each point's block is
/// scaled to unit maximum so that no region dominates.
pub fn killing_scan(
    potential: &ExpSumPotential,
    nu: f64,
    points: &[RealChartPoint],
) -> Result<KillingReport, CurvatureError> {
    let mut rows: Vec<[f64; 4]> = Vec::new();
    let mut used = 0;
    for at in points {
        let Ok(geo) = LocalGeometry::new(potential, nu, at, NEAR_LOCUS_GUARD) else { continue };
        let Ok(m) = geo.metric_taylor() else { continue };
        let block: Vec<[f64; 4]> =
            PAIRS_WITH_DIAG.iter().map(|&(i, j)| m[i][j].grad.map(|z| z.re)).collect();
        let scale = block.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max);
        if !(scale.is_finite()) {
            continue;
        }
        used += 1;
        if scale > 0.0 {
            rows.extend(block.iter().map(|r| r.map(|x| x / scale)));
        }
    }
    if used < KILLING_MIN_POINTS {
        return Err(CurvatureError::TooFewPoints { found: used, needed: KILLING_MIN_POINTS });
    }
    if rows.is_empty() {
        return Ok(KillingReport {
            rank: 0,
            singular_values: vec![0.0; 4],
            null_directions: (0..4).map(|k| std::array::from_fn(|i| if i == k { 1.0 } else { 0.0 })).collect(),
            points_used: used,
        });
    }
    let m = DMatrix::from_fn(rows.len(), 4, |r, c| rows[r][c]);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let mut pairs: Vec<(f64, [f64; 4])> = (0..svd.singular_values.len())
        .map(|k| (svd.singular_values[k], std::array::from_fn(|c| v_t[(k, c)])))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let top = pairs[0].0;
    let threshold = KILLING_RANK_TOL * top;
    let rank = pairs.iter().filter(|p| p.0 > threshold).count();
    Ok(KillingReport {
        rank,
        singular_values: pairs.iter().map(|p| p.0).collect(),
        null_directions: pairs.iter().filter(|p| p.0 <= threshold).map(|p| p.1).collect(),
        points_used: used,
    })
}

const PAIRS_WITH_DIAG: [(usize, usize); 10] =
    [(0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::lift_coordinate;

    fn identity() -> [[f64; 4]; 4] {
        std::array::from_fn(|i| std::array::from_fn(|j| if i == j { 1.0 } else { 0.0 }))
    }

    fn taylor_metric(f: impl Fn(&[TaylorScalar; 4]) -> [[TaylorScalar; 4]; 4], at: &RealChartPoint) -> MetricField {
        let x = std::array::from_fn(|i| lift_coordinate(i, at));
        MetricField::from_taylor(&f(&x))
    }

    #[test]
    fn constant_metric_has_no_connection() {
        let g = [[2.0, 0.3, 0.0, 0.1], [0.3, 1.0, 0.0, 0.0], [0.0, 0.0, 1.5, 0.2], [0.1, 0.0, 0.2, 1.0]];
        let c = christoffel(&MetricField::constant(g)).unwrap();
        assert!(c.gamma.iter().flatten().flatten().all(|&x| x == 0.0));
        let curv = Curvature::from_metric(&MetricField::constant(g)).unwrap();
        let d = curv.duality(1.0);
        assert!(d.flat);
        assert_eq!(d.asd_residual, 0.0);
        let dens = curv.densities(1.0);
        assert_eq!((dens.chi_density, dens.tau_density), (0.0, 0.0));
    }

    #[test]
    fn polar_toy_metric() {
        let at = RealChartPoint::new(1.7, 0.4, -0.2, 0.9);
        let field = taylor_metric(
            |x| {
                let one = TaylorScalar::real(1.0);
                let zero = TaylorScalar::real(0.0);
                let mut g = [[zero; 4]; 4];
                g[0][0] = one;
                g[1][1] = x[0] * x[0];
                g[2][2] = one;
                g[3][3] = one;
                g
            },
            &at,
        );
        let c = christoffel(&field).unwrap();
        assert!((c.gamma[1][0][1] - 1.0 / 1.7).abs() < 1e-15);
        assert!((c.gamma[1][1][0] - 1.0 / 1.7).abs() < 1e-15);
        assert!((c.gamma[0][1][1] + 1.7).abs() < 1e-15);
        let curv = Curvature::from_metric(&field).unwrap();
        assert!(curv.riemann_norm() < 1e-14);
        let nabla = metric_compatibility(&field, &c);
        assert!(nabla.iter().flatten().flatten().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn round_sphere_factor() {
        // dθ² + sin²θ dφ² ⊕ flat: Ricci = metric on the sphere factor, scalar 2
        let at = RealChartPoint::new(0.8, 0.1, 0.0, 0.0);
        let field = taylor_metric(
            |x| {
                let one = TaylorScalar::real(1.0);
                let zero = TaylorScalar::real(0.0);
                let s = x[0].scale(Complex64::new(0.0, 1.0)).exp();
                let sin = (s - s.conj()).scale(Complex64::new(0.0, -0.5));
                let mut g = [[zero; 4]; 4];
                g[0][0] = one;
                g[1][1] = sin * sin;
                g[2][2] = one;
                g[3][3] = one;
                g
            },
            &at,
        );
        let curv = Curvature::from_metric(&field).unwrap();
        assert!((curv.scalar() - 2.0).abs() < 1e-12);
        let ric = curv.ricci();
        assert!((ric[0][0] - 1.0).abs() < 1e-12);
        assert!((ric[1][1] - 0.8f64.sin().powi(2)).abs() < 1e-12);
        assert!(curv.symmetry_residual() < 1e-14);
    }

    #[test]
    fn frame_route_round_sphere() {
        // ω¹ = dθ, ω² = sin θ dφ, ω³ = dx³, ω⁴ = dx⁴
        let at = RealChartPoint::new(0.8, 0.1, 0.0, 0.0);
        let x: [TaylorScalar; 4] = std::array::from_fn(|i| lift_coordinate(i, &at));
        let s = x[0].scale(Complex64::new(0.0, 1.0)).exp();
        let sin = (s - s.conj()).scale(Complex64::new(0.0, -0.5));
        let one = TaylorScalar::real(1.0);
        let zero = TaylorScalar::real(0.0);
        let omega = [[one, zero, zero, zero], [zero, sin, zero, zero], [zero, zero, one, zero], [zero, zero, zero, one]];
        let f = FrameCurvature::new(&omega).unwrap();
        assert!((f.riemann[0][1][0][1] - 1.0).abs() < 1e-13);
        assert!((f.scalar() - 2.0).abs() < 1e-13);
        assert!(f.symmetry_residual() < 1e-14);
        let chart = f.riemann_chart();
        assert!((chart[0][1][0][1] - 0.8f64.sin().powi(2)).abs() < 1e-13);
    }

    #[test]
    fn frame_route_rotated_flat_frame() {
        // a position-dependent rotation of the Euclidean coframe is still flat
        let at = RealChartPoint::new(0.3, -0.7, 0.2, 0.5);
        let x: [TaylorScalar; 4] = std::array::from_fn(|i| lift_coordinate(i, &at));
        let angle = x[0] * x[1] + x[2];
        let r = angle.scale(Complex64::new(0.0, 1.0)).exp();
        let cos = (r + r.conj()).scale(Complex64::new(0.5, 0.0));
        let sin = (r - r.conj()).scale(Complex64::new(0.0, -0.5));
        let one = TaylorScalar::real(1.0);
        let zero = TaylorScalar::real(0.0);
        let omega = [[cos, sin, zero, zero], [-sin, cos, zero, zero], [zero, zero, one, zero], [zero, zero, zero, one]];
        let f = FrameCurvature::new(&omega).unwrap();
        assert!(f.riemann_norm() < 1e-13);
    }

    #[test]
    fn euclidean_hodge() {
        let e12 = TwoForm([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let s = hodge_star(&e12, &identity(), 1.0).unwrap();
        assert_eq!(s.0, [0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let e13 = TwoForm([0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(hodge_star(&e13, &identity(), 1.0).unwrap().0, [0.0, 0.0, 0.0, 0.0, -1.0, 0.0]);
        let flipped = hodge_star(&e12, &identity(), -1.0).unwrap();
        assert_eq!(flipped.0, [0.0, 0.0, 0.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn hodge_involution_on_random_forms() {
        let g = [[2.0, 0.3, 0.0, 0.1], [0.3, 1.0, 0.0, 0.0], [0.0, 0.0, 1.5, 0.2], [0.1, 0.0, 0.2, 1.0]];
        let mut state = 11u64;
        for _ in 0..50 {
            let f = TwoForm(std::array::from_fn(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            }));
            let ss = hodge_star(&hodge_star(&f, &g, 1.0).unwrap(), &g, 1.0).unwrap();
            assert!(ss.sub(&f).norm_frobenius() < 1e-12 * f.norm_frobenius());
            // ⟨F, *G⟩ = ⟨*F, G⟩ and ⟨F, *F⟩ = F∧F / vol
            let ginv = invert(&g).unwrap();
            let sf = hodge_star(&f, &g, 1.0).unwrap();
            let vol = mat4(&g).determinant().sqrt();
            assert!((f.inner(&sf, &ginv) - f.wedge_top(&f) / vol).abs() < 1e-12);
            assert!((f.wedge_top(&sf) / vol - f.inner(&f, &ginv)).abs() < 1e-12);
        }
    }

    #[test]
    fn non_positive_metric_rejected() {
        let mut g = identity();
        g[3][3] = -1.0;
        let f = TwoForm([1.0; 6]);
        assert_eq!(hodge_star(&f, &g, 1.0), Err(CurvatureError::NotPositive));
    }

    #[test]
    fn levi_civita_parity() {
        assert_eq!(levi_civita([0, 1, 2, 3]), 1.0);
        assert_eq!(levi_civita([1, 0, 2, 3]), -1.0);
        assert_eq!(levi_civita([2, 3, 0, 1]), 1.0);
        assert_eq!(levi_civita([3, 2, 1, 0]), 1.0);
        assert_eq!(levi_civita([0, 0, 2, 3]), 0.0);
    }

    #[test]
    fn constant_form_is_closed() {
        let form = [0.3, -1.0, 2.0, 0.5, 0.0, 7.0].map(TaylorScalar::real);
        assert_eq!(closedness_of(&form), 0.0);
    }

    #[test]
    fn exact_form_is_closed_and_generic_is_not() {
        let at = RealChartPoint::new(0.3, -0.2, 0.5, 0.1);
        let x: [TaylorScalar; 4] = std::array::from_fn(|i| lift_coordinate(i, &at));
        let zero = TaylorScalar::real(0.0);
        // d(x1 x3 dx2) = x3 dx1∧dx2 - x1 dx2∧dx3
        let exact = [x[2], zero, zero, -x[0], zero, zero];
        assert_eq!(closedness_of(&exact), 0.0);
        let generic = [x[2], zero, zero, x[0], zero, zero];
        assert!(closedness_of(&generic) > 0.4);
    }
}
