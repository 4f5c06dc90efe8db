//! Hodgkin-Huxley-style membrane models loaded from a parameter document.
//!
//! The document carries per-gate α/β rate coefficients in the classic
//! exponential-rational template
//!
//! ```text
//! C(v) = (c1 e^{c2 (v+c3)} + c4 (v+c5)) / (e^{c6 (v+c3)} + c7),
//! ```
//!
//! a list of ionic currents built from a fixed set of expression templates,
//! the concentration dynamics, a rest state and a stimulation protocol. The
//! loader validates everything up front and rejects unknown template ids and
//! constants; errors name the offending field.
//!
//! The resulting split problem has a = diag(−1/τ_i, 0, ..., 0) over the gate
//! block (with w_∞ = α/(α+β) and τ = 1/(α+β), so a_i = −(α_i+β_i) and
//! b_i = α_i) and zeros for concentrations and the potential, which go
//! entirely into the remainder. State layout is (gates, concentrations, v)
//! with the potential last.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::SplitProblem;

/// Coefficients of one α or β rate function.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateCoeffs {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateDoc {
    pub name: String,
    pub alpha: RateCoeffs,
    pub beta: RateCoeffs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurrentDoc {
    pub name: String,
    pub template: String,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationDoc {
    pub template: String,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
}

/// Stimulation pulses: a C^∞ bump of peak `amplitude` supported on
/// [start, start+duration) within each period (one-shot when period is 0).
/// The smooth shape keeps the right-hand side infinitely differentiable, so
/// pulse edges do not cap the observable convergence order of the multistep
/// schemes. Delivered charge is amplitude · duration · 0.3838.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulationDoc {
    pub amplitude: f64,
    pub start: f64,
    pub duration: f64,
    pub period: f64,
}

impl StimulationDoc {
    pub fn current(&self, t: f64) -> f64 {
        if self.duration <= 0.0 {
            return 0.0;
        }
        let tp = if self.period > 0.0 {
            t.rem_euclid(self.period)
        } else {
            t
        };
        let u = (tp - self.start) / self.duration;
        if u <= 0.0 || u >= 1.0 {
            return 0.0;
        }
        self.amplitude * (4.0 - 1.0 / (u * (1.0 - u))).exp()
    }
}

/// Full membrane model parameter document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MembraneModelDoc {
    pub name: String,
    /// Number of gating variables.
    pub p: usize,
    /// Number of ionic concentrations.
    pub q: usize,
    pub gates: Vec<GateDoc>,
    pub currents: Vec<CurrentDoc>,
    pub concentration_dynamics: ConcentrationDoc,
    /// Initial state in (gates, concentrations, v) layout.
    pub rest_state: Vec<f64>,
    pub stimulation: StimulationDoc,
}

impl MembraneModelDoc {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ModelSchema {
            field: "document".into(),
            message: e.to_string(),
        })
    }
}

/// Evaluate a rate template at potential v. The (c1=0, c7=−1) shape is the
/// x/expm1 form with a removable singularity handled through its limit.
pub fn rate(v: f64, k: &RateCoeffs) -> f64 {
    let x = v + k.c3;
    let num = k.c1 * (k.c2 * x).exp() + k.c4 * (v + k.c5);
    if k.c7 == -1.0 && k.c1 == 0.0 {
        let den = (k.c6 * x).exp_m1();
        if den == 0.0 {
            return k.c4 / k.c6;
        }
        return num / den;
    }
    num / den_plain(x, k)
}

fn den_plain(x: f64, k: &RateCoeffs) -> f64 {
    (k.c6 * x).exp() + k.c7
}

/// Gate target w_∞ = α/(α+β) and time constant τ = 1/(α+β) at potential v.
pub fn gate_steady_state(gate: &GateDoc, v: f64) -> (f64, f64) {
    let alpha = rate(v, &gate.alpha);
    let beta = rate(v, &gate.beta);
    let s = alpha + beta;
    (alpha / s, 1.0 / s)
}

const CURRENT_TEMPLATES: &[&str] = &[
    "gated_linear",
    "calcium_gated",
    "inward_rectifier_br",
    "gated_rectifier",
];

#[derive(Debug, Clone)]
enum Current {
    /// I = (g Π w_i^{p_i} + g_leak) (v − e_rev)
    GatedLinear {
        g: f64,
        g_leak: f64,
        e_rev: f64,
        gates: Vec<(usize, i32)>,
    },
    /// I = g Π w_i^{p_i} (v − (e_a + e_b ln c)); reversal tracks the
    /// concentration
    CalciumGated {
        g: f64,
        e_a: f64,
        e_b: f64,
        gates: Vec<(usize, i32)>,
    },
    /// Time-independent rectifier:
    /// I = s (a1 (e^{a2(v+a3)} − 1) / (e^{a4(v+a5)} + e^{a6(v+a7)})
    ///      + b1 (v+b2) / (1 − e^{b3(v+b2)}))
    InwardRectifierBr {
        s: f64,
        a1: f64,
        a2: f64,
        a3: f64,
        a4: f64,
        a5: f64,
        a6: f64,
        a7: f64,
        b1: f64,
        b2: f64,
        b3: f64,
    },
    /// I = Π w_i^{p_i} · s (e^{a1(v+a2)} − 1) / e^{a3(v+a4)}
    GatedRectifier {
        s: f64,
        a1: f64,
        a2: f64,
        a3: f64,
        a4: f64,
        gates: Vec<(usize, i32)>,
    },
}

impl Current {
    fn eval(&self, gates: &[f64], conc: &[f64], v: f64) -> f64 {
        match self {
            Current::GatedLinear {
                g,
                g_leak,
                e_rev,
                gates: gs,
            } => (g * gate_product(gates, gs) + g_leak) * (v - e_rev),
            Current::CalciumGated { g, e_a, e_b, gates: gs } => {
                let e_rev = e_a + e_b * conc[0].ln();
                g * gate_product(gates, gs) * (v - e_rev)
            }
            Current::InwardRectifierBr {
                s,
                a1,
                a2,
                a3,
                a4,
                a5,
                a6,
                a7,
                b1,
                b2,
                b3,
            } => {
                let first = a1 * ((a2 * (v + a3)).exp() - 1.0)
                    / ((a4 * (v + a5)).exp() + (a6 * (v + a7)).exp());
                let x = v + b2;
                let den = -(b3 * x).exp_m1();
                let second = if den == 0.0 { -b1 / b3 } else { b1 * x / den };
                s * (first + second)
            }
            Current::GatedRectifier {
                s,
                a1,
                a2,
                a3,
                a4,
                gates: gs,
            } => {
                gate_product(gates, gs) * s * ((a1 * (v + a2)).exp() - 1.0)
                    / (a3 * (v + a4)).exp()
            }
        }
    }
}

fn gate_product(gates: &[f64], powers: &[(usize, i32)]) -> f64 {
    powers
        .iter()
        .map(|&(idx, p)| gates[idx].powi(p))
        .product()
}

struct ConstantReader<'a> {
    field: String,
    map: &'a BTreeMap<String, f64>,
    taken: Vec<&'a str>,
}

impl<'a> ConstantReader<'a> {
    fn new(field: impl Into<String>, map: &'a BTreeMap<String, f64>) -> Self {
        ConstantReader {
            field: field.into(),
            map,
            taken: Vec::new(),
        }
    }

    fn required(&mut self, key: &'static str) -> Result<f64> {
        self.taken.push(key);
        self.map.get(key).copied().ok_or_else(|| Error::ModelSchema {
            field: format!("{}.constants.{key}", self.field),
            message: "required constant missing".into(),
        })
    }

    fn optional(&mut self, key: &'static str, default: f64) -> f64 {
        self.taken.push(key);
        self.map.get(key).copied().unwrap_or(default)
    }

    /// Interpret the remaining `pow_<gate>` keys as integer gate exponents.
    fn gate_powers(&mut self, gate_index: &BTreeMap<&str, usize>) -> Result<Vec<(usize, i32)>> {
        let mut out = Vec::new();
        for (key, &val) in self.map {
            if let Some(gate) = key.strip_prefix("pow_") {
                let idx = *gate_index.get(gate).ok_or_else(|| Error::ModelSchema {
                    field: format!("{}.constants.{key}", self.field),
                    message: format!("unknown gate `{gate}`"),
                })?;
                let p = val.round();
                if (val - p).abs() > 1e-9 || p < 1.0 || p > 8.0 {
                    return Err(Error::ModelSchema {
                        field: format!("{}.constants.{key}", self.field),
                        message: format!("gate exponent {val} must be a small positive integer"),
                    });
                }
                out.push((idx, p as i32));
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// All keys must have been consumed by `required`/`optional`/`gate_powers`.
    fn finish(self) -> Result<()> {
        for key in self.map.keys() {
            if key.starts_with("pow_") {
                continue;
            }
            if !self.taken.contains(&key.as_str()) {
                return Err(Error::ModelSchema {
                    field: format!("{}.constants.{key}", self.field),
                    message: "unknown constant for this template".into(),
                });
            }
        }
        Ok(())
    }
}

fn compile_current(
    doc: &CurrentDoc,
    pos: usize,
    gate_index: &BTreeMap<&str, usize>,
    q: usize,
) -> Result<Current> {
    let field = format!("currents[{pos}]");
    let mut rd = ConstantReader::new(field.clone(), &doc.constants);
    let current = match doc.template.as_str() {
        "gated_linear" => Current::GatedLinear {
            g: rd.required("g")?,
            g_leak: rd.optional("g_leak", 0.0),
            e_rev: rd.required("e_rev")?,
            gates: rd.gate_powers(gate_index)?,
        },
        "calcium_gated" => {
            if q != 1 {
                return Err(Error::ModelSchema {
                    field: format!("{field}.template"),
                    message: format!("calcium_gated needs exactly one concentration, q = {q}"),
                });
            }
            Current::CalciumGated {
                g: rd.required("g")?,
                e_a: rd.required("e_a")?,
                e_b: rd.required("e_b")?,
                gates: rd.gate_powers(gate_index)?,
            }
        }
        "inward_rectifier_br" => Current::InwardRectifierBr {
            s: rd.required("s")?,
            a1: rd.required("a1")?,
            a2: rd.required("a2")?,
            a3: rd.required("a3")?,
            a4: rd.required("a4")?,
            a5: rd.required("a5")?,
            a6: rd.required("a6")?,
            a7: rd.required("a7")?,
            b1: rd.required("b1")?,
            b2: rd.required("b2")?,
            b3: rd.required("b3")?,
        },
        "gated_rectifier" => Current::GatedRectifier {
            s: rd.required("s")?,
            a1: rd.required("a1")?,
            a2: rd.required("a2")?,
            a3: rd.required("a3")?,
            a4: rd.required("a4")?,
            gates: rd.gate_powers(gate_index)?,
        },
        other => {
            return Err(Error::ModelSchema {
                field: format!("{field}.template"),
                message: format!(
                    "unknown current template `{other}` (known: {})",
                    CURRENT_TEMPLATES.join(", ")
                ),
            })
        }
    };
    rd.finish()?;
    Ok(current)
}

struct CalciumDynamics {
    coupling: f64,
    relaxation: f64,
    resting: f64,
    /// Index into the compiled current list of the coupled calcium current.
    coupled_current: usize,
}

fn compile_concentration(
    doc: &ConcentrationDoc,
    q: usize,
    currents: &[Current],
) -> Result<Option<CalciumDynamics>> {
    match doc.template.as_str() {
        "none" => {
            if q != 0 {
                return Err(Error::ModelSchema {
                    field: "concentration_dynamics.template".into(),
                    message: format!("template `none` requires q = 0, got {q}"),
                });
            }
            Ok(None)
        }
        "br_calcium" => {
            if q != 1 {
                return Err(Error::ModelSchema {
                    field: "concentration_dynamics.template".into(),
                    message: format!("br_calcium requires q = 1, got {q}"),
                });
            }
            let coupled: Vec<usize> = currents
                .iter()
                .enumerate()
                .filter(|(_, c)| matches!(c, Current::CalciumGated { .. }))
                .map(|(i, _)| i)
                .collect();
            if coupled.len() != 1 {
                return Err(Error::ModelSchema {
                    field: "concentration_dynamics.template".into(),
                    message: format!(
                        "br_calcium couples to exactly one calcium_gated current, found {}",
                        coupled.len()
                    ),
                });
            }
            let mut rd = ConstantReader::new("concentration_dynamics", &doc.constants);
            let dyn_ = CalciumDynamics {
                coupling: rd.required("current_coupling")?,
                relaxation: rd.required("relaxation_rate")?,
                resting: rd.required("resting_value")?,
                coupled_current: coupled[0],
            };
            rd.finish()?;
            Ok(Some(dyn_))
        }
        other => Err(Error::ModelSchema {
            field: "concentration_dynamics.template".into(),
            message: format!("unknown concentration template `{other}` (known: none, br_calcium)"),
        }),
    }
}

fn validate_structure(doc: &MembraneModelDoc) -> Result<()> {
    if doc.gates.len() != doc.p {
        return Err(Error::ModelSchema {
            field: "p".into(),
            message: format!("p = {} but {} gates declared", doc.p, doc.gates.len()),
        });
    }
    let n = doc.p + doc.q + 1;
    if doc.rest_state.len() != n {
        return Err(Error::ModelSchema {
            field: "rest_state".into(),
            message: format!(
                "expected p+q+1 = {n} entries, got {}",
                doc.rest_state.len()
            ),
        });
    }
    for (i, v) in doc.rest_state.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::ModelSchema {
                field: format!("rest_state[{i}]"),
                message: "must be finite".into(),
            });
        }
    }
    for (i, g) in doc.gates.iter().enumerate() {
        if g.name.is_empty() {
            return Err(Error::ModelSchema {
                field: format!("gates[{i}].name"),
                message: "gate name must not be empty".into(),
            });
        }
    }
    let s = &doc.stimulation;
    if !(s.amplitude.is_finite() && s.start >= 0.0 && s.duration >= 0.0 && s.period >= 0.0) {
        return Err(Error::ModelSchema {
            field: "stimulation".into(),
            message: "amplitude must be finite; start, duration, period non-negative".into(),
        });
    }
    Ok(())
}

/// Build the split problem for a validated membrane model document.
///
/// The stabilizer covers exactly the gate relaxation rates; concentrations
/// and the potential are integrated through the remainder. A diagnostic
/// warning is logged once if a concentration goes negative during a run.
pub fn br_model(doc: &MembraneModelDoc) -> Result<SplitProblem> {
    validate_structure(doc)?;
    let gate_index: BTreeMap<&str, usize> = doc
        .gates
        .iter()
        .enumerate()
        .map(|(i, g)| (g.name.as_str(), i))
        .collect();
    if gate_index.len() != doc.gates.len() {
        return Err(Error::ModelSchema {
            field: "gates".into(),
            message: "duplicate gate names".into(),
        });
    }
    let currents: Vec<Current> = doc
        .currents
        .iter()
        .enumerate()
        .map(|(i, c)| compile_current(c, i, &gate_index, doc.q))
        .collect::<Result<_>>()?;
    let calcium = compile_concentration(&doc.concentration_dynamics, doc.q, &currents)?;

    let p = doc.p;
    let q = doc.q;
    let gates: Vec<GateDoc> = doc.gates.clone();
    let stim = doc.stimulation;
    let model_name = doc.name.clone();
    let negative_conc_seen = Arc::new(AtomicBool::new(false));

    let mut units: Vec<&str> = vec!["-"; p];
    units.extend(std::iter::repeat_n("mol/L", q));
    units.push("mV");

    Ok(SplitProblem::new(
        model_name.clone(),
        doc.rest_state.clone(),
        400.0,
        move |t, y, a, b| {
            let (w, rest) = y.split_at(p);
            let (c, v_slice) = rest.split_at(q);
            let v = v_slice[0];

            for (i, gate) in gates.iter().enumerate() {
                let alpha = rate(v, &gate.alpha);
                let beta = rate(v, &gate.beta);
                a[i] = -(alpha + beta);
                b[i] = alpha;
            }

            if q > 0 && c[0] < 0.0 && !negative_conc_seen.swap(true, Ordering::Relaxed) {
                log::warn!(
                    "{model_name}: concentration went negative ({}) at t = {t}",
                    c[0]
                );
            }

            let mut total = 0.0;
            let mut coupled_value = 0.0;
            for (i, cur) in currents.iter().enumerate() {
                let val = cur.eval(w, c, v);
                total += val;
                if let Some(ca) = &calcium {
                    if ca.coupled_current == i {
                        coupled_value = val;
                    }
                }
            }

            if let Some(ca) = &calcium {
                a[p] = 0.0;
                b[p] = ca.coupling * coupled_value + ca.relaxation * (ca.resting - c[0]);
            }

            a[p + q] = 0.0;
            b[p + q] = -total + stim.current(t);
        },
    )
    .with_units(&units))
}

/// Load a model document from disk and build the split problem.
pub fn br_model_from_path(path: impl AsRef<Path>) -> Result<SplitProblem> {
    br_model(&MembraneModelDoc::from_path(path)?)
}
