use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintSense {
    Le,
    Eq,
    Ge,
}

impl ConstraintSense {
    fn symbol(&self) -> &'static str {
        match self {
            ConstraintSense::Le => "<=",
            ConstraintSense::Eq => "=",
            ConstraintSense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: ConstraintSense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Amount by which `values` violate this row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            ConstraintSense::Le => (lhs - self.rhs).max(0.0),
            ConstraintSense::Ge => (self.rhs - lhs).max(0.0),
            ConstraintSense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
    pub direction: Direction,
}

impl Objective {
    pub fn value(&self, values: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|&(v, c)| c * values[v.0])
                .sum::<f64>()
    }
}

/// A linear model under construction: declared variables, linear rows and
/// an optional objective.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelHandle {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Option<Objective>,
}

impl ModelHandle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.push_var(name.into(), VarKind::Continuous, lower, upper)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.push_var(name.into(), VarKind::Binary, 0.0, 1.0)
    }

    fn push_var(&mut self, name: String, kind: VarKind, lower: f64, upper: f64) -> VarId {
        self.variables.push(Variable {
            name,
            kind,
            lower,
            upper,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        sense: ConstraintSense,
        rhs: f64,
    ) -> usize {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            sense,
            rhs,
        });
        self.constraints.len() - 1
    }

    /// Pins a variable by an equality row.
    pub fn fix(&mut self, name: impl Into<String>, var: VarId, value: f64) -> usize {
        self.add_constraint(name, vec![(var, 1.0)], ConstraintSense::Eq, value)
    }

    pub fn set_objective(&mut self, direction: Direction, terms: Vec<(VarId, f64)>, constant: f64) {
        self.objective = Some(Objective {
            terms,
            constant,
            direction,
        });
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn find_var(&self, name: &str) -> Option<VarId> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .map(VarId)
    }

    /// Checks that every row references declared variables, bounds are
    /// ordered and binaries stay within `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        let n = self.variables.len();
        for (i, v) in self.variables.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(Error::InvalidModel(format!(
                    "variable {i} ({}) has bounds [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(Error::InvalidModel(format!(
                    "binary {} has bounds [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "row {} has rhs {}",
                    c.name, c.rhs
                )));
            }
            for &(v, coef) in &c.terms {
                if v.0 >= n {
                    return Err(Error::InvalidModel(format!(
                        "row {} references undeclared variable {}",
                        c.name, v.0
                    )));
                }
                if !coef.is_finite() {
                    return Err(Error::InvalidModel(format!(
                        "row {} has coefficient {coef}",
                        c.name
                    )));
                }
            }
        }
        if let Some(obj) = &self.objective {
            if obj.terms.iter().any(|&(v, c)| v.0 >= n || !c.is_finite()) {
                return Err(Error::InvalidModel(
                    "objective references undeclared variable".into(),
                ));
            }
        }
        Ok(())
    }

    /// Plain-text dump in CPLEX LP syntax. Rows and columns appear in
    /// declaration order so dumps of equal models are byte-identical.
    pub fn to_lp_string(&self) -> String {
        let mut s = String::new();
        let name = |v: VarId| self.variables[v.0].name.as_str();
        let expr = |terms: &[(VarId, f64)]| {
            if terms.is_empty() {
                return "0".to_string();
            }
            let mut e = String::new();
            for (i, &(v, c)) in terms.iter().enumerate() {
                match (i, c < 0.0) {
                    (0, false) => {}
                    (0, true) => e.push('-'),
                    (_, false) => e.push_str(" + "),
                    (_, true) => e.push_str(" - "),
                }
                let _ = write!(e, "{} {}", c.abs(), name(v));
            }
            e
        };
        match &self.objective {
            Some(obj) => {
                s.push_str(match obj.direction {
                    Direction::Minimize => "Minimize\n",
                    Direction::Maximize => "Maximize\n",
                });
                let _ = writeln!(s, " obj: {}", expr(&obj.terms));
            }
            None => s.push_str("Minimize\n obj: 0\n"),
        }
        s.push_str("Subject To\n");
        for (i, c) in self.constraints.iter().enumerate() {
            let label = if c.name.is_empty() {
                format!("c{i}")
            } else {
                c.name.clone()
            };
            let _ = writeln!(
                s,
                " {label}: {} {} {}",
                expr(&c.terms),
                c.sense.symbol(),
                c.rhs
            );
        }
        s.push_str("Bounds\n");
        for v in &self.variables {
            if v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0 {
                continue;
            }
            let lo = if v.lower.is_finite() {
                v.lower.to_string()
            } else {
                "-inf".into()
            };
            let hi = if v.upper.is_finite() {
                v.upper.to_string()
            } else {
                "+inf".into()
            };
            let _ = writeln!(s, " {lo} <= {} <= {hi}", v.name);
        }
        let binaries: Vec<&str> = self
            .variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .map(|v| v.name.as_str())
            .collect();
        if !binaries.is_empty() {
            s.push_str("Binaries\n");
            for b in binaries {
                let _ = writeln!(s, " {b}");
            }
        }
        s.push_str("End\n");
        s
    }
}
