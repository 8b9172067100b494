//! Line-oriented circuit description language.
//!
//! ```text
//! circuit fulladder
//! inputs a b cin
//! outputs sum carry
//! gate X1 xor a b        # gate id doubles as its output wire
//! wire sum = X2          # names the output wire of X2
//! obs a=1 b=0 cin=1 sum=1 carry=0
//! prior X1 0.01
//! prior-kind or 0.6
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use super::circuit::{CircuitError, CircuitSpec, Gate, GateKind};
use super::{is_identifier, ComponentId, WireValue};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DslErrorKind {
    Syntax(String),
    UndeclaredVariable(String),
    DuplicateGate(String),
    Cycle(String),
    Invalid(String),
}

impl fmt::Display for DslErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DslErrorKind::Syntax(m) => write!(f, "syntax error: {m}"),
            DslErrorKind::UndeclaredVariable(v) => write!(f, "undeclared variable {v:?}"),
            DslErrorKind::DuplicateGate(g) => write!(f, "duplicate gate id {g:?}"),
            DslErrorKind::Cycle(g) => write!(f, "combinational cycle through gate {g:?}"),
            DslErrorKind::Invalid(m) => f.write_str(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {col}: {kind}")]
pub struct DslError {
    pub line: usize,
    pub col: usize,
    pub kind: DslErrorKind,
}

#[derive(Debug, Clone)]
struct Token<'a> {
    text: &'a str,
    col: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let line = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() || ch == '=' {
            if let Some(s) = start.take() {
                tokens.push(Token { text: &line[s..i], col: s + 1 });
            }
            if ch == '=' {
                tokens.push(Token { text: "=", col: i + 1 });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push(Token { text: &line[s..], col: s + 1 });
    }
    tokens
}

struct Pos {
    line: usize,
    col: usize,
}

struct Parser {
    spec: CircuitSpec,
    gate_pos: Vec<Pos>,
    gate_input_pos: Vec<Vec<Pos>>,
    outputs_pos: Vec<Pos>,
    obs_pos: Vec<Pos>,
    aliases: HashMap<String, (String, Pos)>,
    declared: HashMap<String, Pos>,
}

impl Parser {
    fn err(line: usize, col: usize, kind: DslErrorKind) -> DslError {
        DslError { line, col, kind }
    }

    fn ident(&self, line: usize, tok: &Token<'_>) -> Result<String, DslError> {
        if is_identifier(tok.text) {
            Ok(tok.text.to_string())
        } else {
            Err(Self::err(line, tok.col, DslErrorKind::Syntax(format!("expected identifier, found {:?}", tok.text))))
        }
    }

    fn declare(&mut self, name: &str, line: usize, col: usize) -> Result<(), DslError> {
        if let Some(prev) = self.declared.get(name) {
            let kind = DslErrorKind::Invalid(format!("{name:?} already declared at line {}", prev.line));
            return Err(Self::err(line, col, kind));
        }
        self.declared.insert(name.to_string(), Pos { line, col });
        Ok(())
    }

    fn statement(&mut self, line: usize, toks: &[Token<'_>]) -> Result<(), DslError> {
        let head = &toks[0];
        let rest = &toks[1..];
        let need = |n: usize, what: &str| -> Result<(), DslError> {
            if rest.len() < n {
                let col = toks.last().map(|t| t.col + t.text.len()).unwrap_or(1);
                Err(Self::err(line, col, DslErrorKind::Syntax(format!("{} expects {what}", head.text))))
            } else {
                Ok(())
            }
        };
        match head.text {
            "circuit" => {
                need(1, "a name")?;
                self.spec.name = rest.iter().map(|t| t.text).collect::<Vec<_>>().join(" ");
            }
            "inputs" => {
                for t in rest {
                    let name = self.ident(line, t)?;
                    self.declare(&name, line, t.col)?;
                    self.spec.inputs.push(name);
                }
            }
            "outputs" => {
                for t in rest {
                    let name = self.ident(line, t)?;
                    self.spec.outputs.push(name);
                    self.outputs_pos.push(Pos { line, col: t.col });
                }
            }
            "gate" => {
                need(3, "an id, a kind and inputs")?;
                let id_tok = &rest[0];
                let id = self.ident(line, id_tok)?;
                if self.spec.gates.iter().any(|g| g.id.as_str() == id) {
                    return Err(Self::err(line, id_tok.col, DslErrorKind::DuplicateGate(id)));
                }
                let kind: GateKind = rest[1]
                    .text
                    .parse()
                    .map_err(|m| Self::err(line, rest[1].col, DslErrorKind::Syntax(m)))?;
                self.declare(&id, line, id_tok.col)?;
                let mut inputs = Vec::new();
                let mut pos = Vec::new();
                for t in &rest[2..] {
                    inputs.push(self.ident(line, t)?);
                    pos.push(Pos { line, col: t.col });
                }
                self.spec.gates.push(Gate {
                    id: ComponentId::new(id).expect("checked identifier"),
                    kind,
                    out: String::new(),
                    inputs,
                });
                self.gate_pos.push(Pos { line, col: id_tok.col });
                self.gate_input_pos.push(pos);
            }
            "wire" => {
                if rest.len() != 3 || rest[1].text != "=" {
                    return Err(Self::err(line, head.col, DslErrorKind::Syntax("expected `wire <name> = <gate>`".into())));
                }
                let name = self.ident(line, &rest[0])?;
                let target = self.ident(line, &rest[2])?;
                self.declare(&name, line, rest[0].col)?;
                self.aliases.insert(target, (name, Pos { line, col: rest[2].col }));
            }
            "obs" => {
                if !rest.len().is_multiple_of(3) {
                    let col = toks.last().unwrap().col;
                    return Err(Self::err(line, col, DslErrorKind::Syntax("expected `var=0|1` bindings".into())));
                }
                for triple in rest.chunks(3) {
                    let var = self.ident(line, &triple[0])?;
                    if triple[1].text != "=" {
                        return Err(Self::err(line, triple[1].col, DslErrorKind::Syntax("expected `=`".into())));
                    }
                    let val = match triple[2].text {
                        "0" => false,
                        "1" => true,
                        other => {
                            return Err(Self::err(line, triple[2].col, DslErrorKind::Syntax(format!("expected 0 or 1, found {other:?}"))))
                        }
                    };
                    self.spec.observations.push(WireValue::new(var, val));
                    self.obs_pos.push(Pos { line, col: triple[0].col });
                }
            }
            "prior" => {
                if rest.len() != 2 {
                    return Err(Self::err(line, head.col, DslErrorKind::Syntax("expected `prior <gate> <p>`".into())));
                }
                let id = self.ident(line, &rest[0])?;
                let p = parse_prob(line, &rest[1])?;
                self.spec.priors.insert(ComponentId::new(id).expect("checked identifier"), p);
            }
            "prior-kind" => {
                if rest.len() != 2 {
                    return Err(Self::err(line, head.col, DslErrorKind::Syntax("expected `prior-kind <kind> <p>`".into())));
                }
                let kind: GateKind = rest[0]
                    .text
                    .parse()
                    .map_err(|m| Self::err(line, rest[0].col, DslErrorKind::Syntax(m)))?;
                let p = parse_prob(line, &rest[1])?;
                self.spec.kind_priors.insert(kind, p);
            }
            other => {
                return Err(Self::err(line, head.col, DslErrorKind::Syntax(format!("unknown statement {other:?}"))));
            }
        }
        Ok(())
    }

    fn finish(mut self) -> Result<CircuitSpec, DslError> {
        // Alias targets must be gates; the alias becomes the gate's output wire name.
        let mut resolve: HashMap<String, String> = HashMap::new();
        for w in &self.spec.inputs {
            resolve.insert(w.clone(), w.clone());
        }
        for g in &mut self.spec.gates {
            let out = match self.aliases.remove(g.id.as_str()) {
                Some((alias, _)) => alias,
                None => g.id.to_string(),
            };
            resolve.insert(g.id.to_string(), out.clone());
            resolve.insert(out.clone(), out.clone());
            g.out = out;
        }
        if let Some((target, (_, pos))) = self.aliases.into_iter().next() {
            return Err(Self::err(pos.line, pos.col, DslErrorKind::UndeclaredVariable(target)));
        }

        let lookup = |name: &str, pos: &Pos| {
            resolve
                .get(name)
                .cloned()
                .ok_or_else(|| Self::err(pos.line, pos.col, DslErrorKind::UndeclaredVariable(name.to_string())))
        };
        for (g, positions) in self.spec.gates.iter_mut().zip(&self.gate_input_pos) {
            for (w, pos) in g.inputs.iter_mut().zip(positions) {
                *w = lookup(w, pos)?;
            }
        }
        for (w, pos) in self.spec.outputs.iter_mut().zip(&self.outputs_pos) {
            *w = lookup(w, pos)?;
        }
        for (o, pos) in self.spec.observations.iter_mut().zip(&self.obs_pos) {
            o.var = lookup(&o.var, pos)?;
        }
        for id in self.spec.priors.keys() {
            if self.spec.gate(id.as_str()).is_none() {
                return Err(Self::err(0, 0, DslErrorKind::Invalid(format!("prior for unknown gate {id}"))));
            }
        }

        match self.spec.validate() {
            Ok(_) => Ok(self.spec),
            Err(e) => {
                let gate_pos = |id: &str| {
                    let i = self.spec.gates.iter().position(|g| g.id.as_str() == id).unwrap_or(0);
                    self.gate_pos.get(i).map(|p| (p.line, p.col)).unwrap_or((0, 0))
                };
                let (kind, (line, col)) = match e {
                    CircuitError::Cycle(g) => {
                        let p = gate_pos(&g);
                        (DslErrorKind::Cycle(g), p)
                    }
                    CircuitError::Arity { ref gate, .. } => {
                        let p = gate_pos(gate);
                        (DslErrorKind::Invalid(e.to_string()), p)
                    }
                    CircuitError::DuplicateGate(g) => {
                        let p = gate_pos(&g);
                        (DslErrorKind::DuplicateGate(g), p)
                    }
                    CircuitError::UndeclaredVariable(v) => (DslErrorKind::UndeclaredVariable(v), (0, 0)),
                    other => (DslErrorKind::Invalid(other.to_string()), (0, 0)),
                };
                Err(Self::err(line, col, kind))
            }
        }
    }
}

fn parse_prob(line: usize, tok: &Token<'_>) -> Result<f64, DslError> {
    let p: f64 = tok.text.parse().map_err(|_| DslError {
        line,
        col: tok.col,
        kind: DslErrorKind::Syntax(format!("expected a probability, found {:?}", tok.text)),
    })?;
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err(DslError {
            line,
            col: tok.col,
            kind: DslErrorKind::Invalid(format!("prior {p} is outside (0,1)")),
        })
    }
}

pub fn parse_circuit_dsl(text: &str) -> Result<CircuitSpec, DslError> {
    let mut parser = Parser {
        spec: CircuitSpec::default(),
        gate_pos: Vec::new(),
        gate_input_pos: Vec::new(),
        outputs_pos: Vec::new(),
        obs_pos: Vec::new(),
        aliases: HashMap::new(),
        declared: HashMap::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        let toks = tokenize(raw);
        if toks.is_empty() {
            continue;
        }
        parser.statement(i + 1, &toks)?;
    }
    parser.finish()
}

/// Renders a circuit back into the DSL.
pub fn render_circuit_dsl(spec: &CircuitSpec) -> String {
    let mut out = String::new();
    if !spec.name.is_empty() {
        out.push_str(&format!("circuit {}\n", spec.name));
    }
    out.push_str(&format!("inputs {}\n", spec.inputs.join(" ")));
    out.push_str(&format!("outputs {}\n", spec.outputs.join(" ")));
    let mut aliases = BTreeMap::new();
    for g in &spec.gates {
        let ins: Vec<&str> = g.inputs.iter().map(|w| w.as_str()).collect();
        out.push_str(&format!("gate {} {} {}\n", g.id, g.kind, ins.join(" ")));
        if g.out != g.id.as_str() {
            aliases.insert(g.out.clone(), g.id.to_string());
        }
    }
    for (alias, id) in aliases {
        out.push_str(&format!("wire {alias} = {id}\n"));
    }
    if !spec.observations.is_empty() {
        let obs: Vec<String> = spec.observations.iter().map(|o| o.to_string()).collect();
        out.push_str(&format!("obs {}\n", obs.join(" ")));
    }
    for (id, p) in &spec.priors {
        out.push_str(&format!("prior {id} {p}\n"));
    }
    for (kind, p) in &spec.kind_priors {
        out.push_str(&format!("prior-kind {kind} {p}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::FULL_ADDER_DSL;

    #[test]
    fn parses_full_adder() {
        let spec = parse_circuit_dsl(FULL_ADDER_DSL).unwrap();
        let ids: Vec<&str> = spec.gates.iter().map(|g| g.id.as_str()).collect();
        assert_eq!(ids, ["X1", "X2", "A1", "A2", "O1"]);
        assert_eq!(spec.outputs, ["sum", "carry"]);
        assert_eq!(spec.gate("X2").unwrap().out, "sum");
        assert_eq!(spec.gate("X2").unwrap().inputs, ["X1", "cin"]);
        assert_eq!(spec.gate("O1").unwrap().inputs, ["A1", "A2"]);
        assert_eq!(spec.observations.len(), 5);
    }

    #[test]
    fn empty_gate_list_is_valid() {
        let spec = parse_circuit_dsl("inputs a\nobs a=1\n").unwrap();
        assert!(spec.gates.is_empty());
        assert_eq!(spec.observations, vec![WireValue::new("a", true)]);
    }

    #[test]
    fn undeclared_wire_is_reported_with_position() {
        let err = parse_circuit_dsl("inputs a b\ngate G1 and a q\n").unwrap_err();
        assert_eq!(err.kind, DslErrorKind::UndeclaredVariable("q".into()));
        assert_eq!((err.line, err.col), (2, 15));
    }

    #[test]
    fn duplicate_gate_is_reported() {
        let err = parse_circuit_dsl("inputs a b\ngate G1 and a b\ngate G1 or a b\n").unwrap_err();
        assert_eq!(err.kind, DslErrorKind::DuplicateGate("G1".into()));
        assert_eq!(err.line, 3);
    }

    #[test]
    fn cycle_is_reported() {
        let err = parse_circuit_dsl("inputs a\ngate G1 and a G2\ngate G2 buf G1\n").unwrap_err();
        assert!(matches!(err.kind, DslErrorKind::Cycle(_)));
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(parse_circuit_dsl("frobnicate x").unwrap_err().kind, DslErrorKind::Syntax(_)));
        assert!(matches!(parse_circuit_dsl("inputs a\nobs a=2").unwrap_err().kind, DslErrorKind::Syntax(_)));
        assert!(matches!(parse_circuit_dsl("inputs a b\ngate G nand a b").unwrap_err().kind, DslErrorKind::Syntax(_)));
        assert!(matches!(parse_circuit_dsl("inputs a\nprior-kind or 1.5").unwrap_err().kind, DslErrorKind::Invalid(_)));
    }

    #[test]
    fn render_round_trips() {
        let spec = parse_circuit_dsl(FULL_ADDER_DSL).unwrap();
        let again = parse_circuit_dsl(&render_circuit_dsl(&spec)).unwrap();
        assert_eq!(spec, again);
    }
}
