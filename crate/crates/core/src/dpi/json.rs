use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::circuit::{Gate, GateKind, MAX_XOR_ARITY};
use super::encode::gate_clauses;
use super::{is_identifier, Atom, Clause, ComponentId, Dpi, DpiError, Literal, WireValue};

#[derive(Debug, Error)]
pub enum JsonError {
    #[error("cannot read or write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error(transparent)]
    Dpi(#[from] DpiError),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DpiDoc {
    components: Vec<ComponentId>,
    sd: SdDoc,
    #[serde(default)]
    obs: Vec<FactDoc>,
    #[serde(default)]
    meas: Vec<FactDoc>,
    #[serde(default)]
    priors: BTreeMap<String, f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SdDoc {
    Gates { gates: Vec<GateDoc> },
    Clauses { clauses: Vec<Vec<LiteralDoc>> },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GateDoc {
    comp: ComponentId,
    kind: GateKind,
    out: String,
    #[serde(rename = "in")]
    inputs: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LiteralDoc {
    atom: String,
    #[serde(default)]
    neg: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactDoc {
    var: String,
    #[serde(serialize_with = "bit_out", deserialize_with = "bit_in")]
    val: bool,
}

fn bit_out<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u8(u8::from(*v))
}

fn bit_in<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Bit {
        B(bool),
        N(u8),
    }
    match Bit::deserialize(d)? {
        Bit::B(b) => Ok(b),
        Bit::N(0) => Ok(false),
        Bit::N(1) => Ok(true),
        Bit::N(n) => Err(serde::de::Error::custom(format!("wire value must be 0 or 1, got {n}"))),
    }
}

fn parse_atom(s: &str) -> Result<Atom, JsonError> {
    if let Some(comp) = s.strip_prefix("ok:") {
        Ok(Atom::Ok(ComponentId::new(comp)?))
    } else if is_identifier(s) {
        Ok(Atom::Wire(s.to_string()))
    } else {
        Err(JsonError::Schema(format!("invalid atom {s:?}")))
    }
}

fn facts(docs: Vec<FactDoc>) -> Result<Vec<WireValue>, JsonError> {
    docs.into_iter()
        .map(|f| {
            if f.var.starts_with("ok:") {
                Err(DpiError::NonWireFact(f.var).into())
            } else {
                Ok(WireValue::new(f.var, f.val))
            }
        })
        .collect()
}

/// Parses a DPI document from a JSON string.
pub fn parse_dpi_json(text: &str) -> Result<Dpi, JsonError> {
    let doc: DpiDoc = serde_json::from_str(text)?;
    let sd = match doc.sd {
        SdDoc::Gates { gates } => {
            let mut sd = Vec::new();
            for g in gates {
                if !doc.components.contains(&g.comp) {
                    return Err(DpiError::UnknownComponent(g.comp.to_string()).into());
                }
                let n = g.inputs.len();
                let arity_ok = if g.kind.is_unary() { n == 1 } else { n >= 2 && (g.kind != GateKind::Xor || n <= MAX_XOR_ARITY) };
                if !arity_ok {
                    return Err(JsonError::Schema(format!("gate {} has {n} inputs", g.comp)));
                }
                if let Some(bad) = std::iter::once(&g.out).chain(&g.inputs).find(|w| !is_identifier(w)) {
                    return Err(JsonError::Schema(format!("invalid wire name {bad:?}")));
                }
                sd.extend(gate_clauses(&Gate {
                    id: g.comp,
                    kind: g.kind,
                    out: g.out,
                    inputs: g.inputs,
                }));
            }
            sd
        }
        SdDoc::Clauses { clauses } => clauses
            .into_iter()
            .map(|lits| {
                lits.into_iter()
                    .map(|l| {
                        Ok(Literal {
                            atom: parse_atom(&l.atom)?,
                            negated: l.neg,
                        })
                    })
                    .collect::<Result<Vec<_>, JsonError>>()
                    .map(Clause::new)
            })
            .collect::<Result<_, _>>()?,
    };
    let priors = doc
        .priors
        .into_iter()
        .map(|(k, p)| Ok((ComponentId::new(k)?, p)))
        .collect::<Result<BTreeMap<_, _>, JsonError>>()?;
    Ok(Dpi::new(sd, doc.components, facts(doc.obs)?, facts(doc.meas)?, &priors)?)
}

pub fn load_dpi_json(path: impl AsRef<Path>) -> Result<Dpi, JsonError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| JsonError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dpi_json(&text)
}

/// Serializes an instance in clause form.
pub fn to_dpi_json(dpi: &Dpi) -> String {
    let fact = |f: &WireValue| FactDoc {
        var: f.var.clone(),
        val: f.val,
    };
    let doc = DpiDoc {
        components: dpi.components().to_vec(),
        sd: SdDoc::Clauses {
            clauses: dpi
                .system_description()
                .iter()
                .map(|c| {
                    c.literals()
                        .iter()
                        .map(|l| LiteralDoc {
                            atom: l.atom.to_string(),
                            neg: l.negated,
                        })
                        .collect()
                })
                .collect(),
        },
        obs: dpi.observations().iter().map(fact).collect(),
        meas: dpi.measurements().iter().map(fact).collect(),
        priors: dpi
            .components()
            .iter()
            .zip(dpi.priors())
            .map(|(c, &p)| (c.to_string(), p))
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("DPI documents always serialize")
}

pub fn save_dpi_json(dpi: &Dpi, path: impl AsRef<Path>) -> Result<(), JsonError> {
    let path = path.as_ref();
    fs::write(path, to_dpi_json(dpi)).map_err(|source| JsonError::Io {
        path: path.display().to_string(),
        source,
    })
}
