//! Hierarchical mixed design spaces.
//!
//! A space mixes continuous, integer and categorical variables and carries
//! two kinds of structure on top of the plain box:
//!
//! * activation rules make a variable meaningful only when its parent
//!   takes one of a set of values (at most one rule per variable, and the
//!   parent graph must be acyclic), and
//! * value rules restrict a variable's admissible values as a function of
//!   a controlling variable's current value.
//!
//! Inactive variables are canonicalized to a fixed imputation value
//! (midpoint for continuous, lower bound for integer, first level for
//! categorical) so that any two points agreeing on their active variables
//! are literally equal, which keeps surrogate training data free of
//! spurious distinctions. [`DesignSpace::correct`] is the single entry
//! point producing canonical points; everything downstream consumes only
//! corrected [`DesignPoint`]s.
//!
//! For surrogates the space maps to a fixed-length relaxed vector:
//! continuous and integer variables min-max normalized to `[0, 1]`,
//! categoricals one-hot encoded.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::lhs;

/// Default cap on the discrete cartesian product size for enumeration.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Domain of a single variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum VariableKind {
    Continuous { lower: f64, upper: f64 },
    Integer { lower: i64, upper: i64 },
    Categorical { levels: Vec<String> },
}

impl VariableKind {
    pub fn is_discrete(&self) -> bool {
        !matches!(self, VariableKind::Continuous { .. })
    }

    fn name(&self) -> &'static str {
        match self {
            VariableKind::Continuous { .. } => "continuous",
            VariableKind::Integer { .. } => "integer",
            VariableKind::Categorical { .. } => "categorical",
        }
    }

    /// Number of raw domain values; `None` for continuous.
    fn domain_size(&self) -> Option<u128> {
        match self {
            VariableKind::Continuous { .. } => None,
            VariableKind::Integer { lower, upper } => {
                Some((upper - lower).max(0) as u128 + 1)
            }
            VariableKind::Categorical { levels } => Some(levels.len() as u128),
        }
    }
}

/// A named variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: VariableKind,
}

/// A typed value of one variable. Categorical values are level indices
/// into the variable's declared level list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Continuous(f64),
    Integer(i64),
    Categorical(usize),
}

impl Value {
    fn kind_name(&self) -> &'static str {
        match self {
            Value::Continuous(_) => "continuous",
            Value::Integer(_) => "integer",
            Value::Categorical(_) => "categorical",
        }
    }

    /// Total order across all values; used for canonical sorting and
    /// deduplication of enumerated assignments.
    pub fn total_cmp(&self, other: &Value) -> Ordering {
        use Value::*;
        match (self, other) {
            (Continuous(a), Continuous(b)) => a.total_cmp(b),
            (Integer(a), Integer(b)) => a.cmp(b),
            (Categorical(a), Categorical(b)) => a.cmp(b),
            (Continuous(_), _) => Ordering::Less,
            (_, Continuous(_)) => Ordering::Greater,
            (Integer(_), _) => Ordering::Less,
            (_, Integer(_)) => Ordering::Greater,
        }
    }
}

/// Makes `child` meaningful only when `parent` is itself active and holds
/// one of `activating_values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationRule {
    pub child: usize,
    pub parent: usize,
    pub activating_values: Vec<Value>,
}

/// Restricts `target` to a value set chosen by the current value of
/// `controller`. Controller values without a table row leave the target
/// unconstrained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueRule {
    pub target: usize,
    pub controller: usize,
    pub table: Vec<(Value, Vec<Value>)>,
}

/// A hierarchical mixed design space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpace {
    pub variables: Vec<VariableSpec>,
    pub activation_rules: Vec<ActivationRule>,
    pub value_rules: Vec<ValueRule>,
    /// Variables whose corrected values define an architecture signature.
    pub signature_vars: Vec<usize>,
}

/// A corrected point: canonical values plus the activity mask they imply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub values: Vec<Value>,
    pub active: Vec<bool>,
}

/// One problem found by [`DesignSpace::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    /// Index of the variable or rule the problem is about, when one applies.
    pub subject: Option<usize>,
    pub kind: DiagnosticKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiagnosticKind {
    DegenerateBounds,
    NoLevels,
    DuplicateName,
    RuleIndexOutOfRange,
    MultipleActivationRules,
    ActivationCycle,
    ContinuousActivationParent,
    ActivationValueTypeMismatch,
    EmptyAllowedSet,
    ValueRuleTypeMismatch,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            DiagnosticKind::DegenerateBounds => "bounds do not satisfy lower < upper",
            DiagnosticKind::NoLevels => "categorical variable has no levels",
            DiagnosticKind::DuplicateName => "variable name already used",
            DiagnosticKind::RuleIndexOutOfRange => "rule references a variable index out of range",
            DiagnosticKind::MultipleActivationRules => "variable has more than one activation rule",
            DiagnosticKind::ActivationCycle => "activation parents form a cycle",
            DiagnosticKind::ContinuousActivationParent => "activation parent is continuous",
            DiagnosticKind::ActivationValueTypeMismatch => {
                "activating value type does not match the parent"
            }
            DiagnosticKind::EmptyAllowedSet => "value rule row has an empty allowed set",
            DiagnosticKind::ValueRuleTypeMismatch => {
                "value rule row type does not match controller or target"
            }
        };
        match self.subject {
            Some(i) => write!(f, "{what} (index {i})"),
            None => write!(f, "{what}"),
        }
    }
}

/// Typed failure of a space operation.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceError {
    /// Value count does not match the variable count.
    LengthMismatch { expected: usize, found: usize },
    /// A value's type does not match its variable's declared kind.
    SchemaMismatch { variable: usize, expected: &'static str, found: &'static str },
    /// A continuous value was NaN or infinite.
    NonFinite { variable: usize },
    /// A categorical value indexed past the declared levels.
    LevelOutOfRange { variable: usize, level: usize, levels: usize },
    /// The discrete cartesian product exceeds the enumeration cap.
    EnumerationTooLarge { cartesian: u128, cap: u128 },
    /// Enumeration requested on a space without discrete variables.
    NoDiscreteVariables,
    /// Architecture counting requested with no signature variables.
    EmptySignature,
    /// An encoded vector's length does not match the encoding width.
    EncodedLengthMismatch { expected: usize, found: usize },
}

impl fmt::Display for SpaceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceError::LengthMismatch { expected, found } => {
                write!(f, "expected {expected} values, got {found}")
            }
            SpaceError::SchemaMismatch { variable, expected, found } => {
                write!(f, "schema mismatch at variable {variable}: expected {expected}, got {found}")
            }
            SpaceError::NonFinite { variable } => {
                write!(f, "non-finite value for variable {variable}")
            }
            SpaceError::LevelOutOfRange { variable, level, levels } => {
                write!(f, "level {level} out of range for variable {variable} ({levels} levels)")
            }
            SpaceError::EnumerationTooLarge { cartesian, cap } => {
                write!(f, "cartesian product {cartesian} exceeds enumeration cap {cap}")
            }
            SpaceError::NoDiscreteVariables => write!(f, "space has no discrete variables"),
            SpaceError::EmptySignature => write!(f, "space declares no signature variables"),
            SpaceError::EncodedLengthMismatch { expected, found } => {
                write!(f, "expected encoded vector of length {expected}, got {found}")
            }
        }
    }
}

impl core::error::Error for SpaceError {}

/// Result of enumerating the discrete part of a space.
#[derive(Debug, Clone)]
pub struct DiscreteEnumeration {
    /// Distinct corrected assignments, sorted canonically.
    pub assignments: Vec<DesignPoint>,
    /// Size of the raw cartesian product the assignments were drawn from.
    pub cartesian: u128,
}

impl DesignSpace {
    /// Structural checks; one diagnostic per violation, empty when sound.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let n = self.variables.len();

        for (i, v) in self.variables.iter().enumerate() {
            match &v.kind {
                VariableKind::Continuous { lower, upper } => {
                    if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
                        out.push(Diagnostic { subject: Some(i), kind: DiagnosticKind::DegenerateBounds });
                    }
                }
                VariableKind::Integer { lower, upper } => {
                    if lower >= upper {
                        out.push(Diagnostic { subject: Some(i), kind: DiagnosticKind::DegenerateBounds });
                    }
                }
                VariableKind::Categorical { levels } => {
                    if levels.is_empty() {
                        out.push(Diagnostic { subject: Some(i), kind: DiagnosticKind::NoLevels });
                    }
                }
            }
            if self.variables[..i].iter().any(|w| w.name == v.name) {
                out.push(Diagnostic { subject: Some(i), kind: DiagnosticKind::DuplicateName });
            }
        }

        let mut rule_for: Vec<Option<&ActivationRule>> = vec![None; n];
        for (r, rule) in self.activation_rules.iter().enumerate() {
            if rule.child >= n || rule.parent >= n {
                out.push(Diagnostic { subject: Some(r), kind: DiagnosticKind::RuleIndexOutOfRange });
                continue;
            }
            if rule_for[rule.child].is_some() {
                out.push(Diagnostic { subject: Some(r), kind: DiagnosticKind::MultipleActivationRules });
            } else {
                rule_for[rule.child] = Some(rule);
            }
            match &self.variables[rule.parent].kind {
                VariableKind::Continuous { .. } => {
                    out.push(Diagnostic { subject: Some(r), kind: DiagnosticKind::ContinuousActivationParent });
                }
                kind => {
                    let ok = rule.activating_values.iter().all(|v| match (v, kind) {
                        (Value::Integer(_), VariableKind::Integer { .. }) => true,
                        (Value::Categorical(_), VariableKind::Categorical { .. }) => true,
                        _ => false,
                    });
                    if !ok {
                        out.push(Diagnostic {
                            subject: Some(r),
                            kind: DiagnosticKind::ActivationValueTypeMismatch,
                        });
                    }
                }
            }
        }

        // Cycle check: follow parent links from every variable; a walk
        // longer than the variable count must have looped.
        for start in 0..n {
            let mut cur = start;
            let mut hops = 0usize;
            while let Some(rule) = rule_for.get(cur).and_then(|r| *r) {
                cur = rule.parent;
                hops += 1;
                if hops > n {
                    out.push(Diagnostic { subject: Some(start), kind: DiagnosticKind::ActivationCycle });
                    break;
                }
            }
        }

        for (r, rule) in self.value_rules.iter().enumerate() {
            if rule.target >= n || rule.controller >= n {
                out.push(Diagnostic { subject: Some(r), kind: DiagnosticKind::RuleIndexOutOfRange });
                continue;
            }
            for (ctrl_value, allowed) in &rule.table {
                if allowed.is_empty() {
                    out.push(Diagnostic { subject: Some(r), kind: DiagnosticKind::EmptyAllowedSet });
                }
                let ctrl_ok = value_matches_kind(ctrl_value, &self.variables[rule.controller].kind);
                let tgt_ok = allowed
                    .iter()
                    .all(|v| value_matches_kind(v, &self.variables[rule.target].kind));
                if !ctrl_ok || !tgt_ok {
                    out.push(Diagnostic { subject: Some(r), kind: DiagnosticKind::ValueRuleTypeMismatch });
                }
            }
        }

        out
    }

    /// Canonical value a variable takes while inactive: midpoint for
    /// continuous, lower bound for integer, first level for categorical.
    pub fn imputation_value(&self, variable: usize) -> Value {
        match &self.variables[variable].kind {
            VariableKind::Continuous { lower, upper } => Value::Continuous(0.5 * (lower + upper)),
            VariableKind::Integer { lower, .. } => Value::Integer(*lower),
            VariableKind::Categorical { .. } => Value::Categorical(0),
        }
    }

    /// Activity mask implied by `values`: a variable is active iff it has
    /// no activation rule, or its parent is active and currently holds one
    /// of the rule's activating values. The fixpoint is reached no matter
    /// how the rules are ordered.
    pub fn compute_activity(&self, values: &[Value]) -> Vec<bool> {
        let n = self.variables.len();
        let mut active = vec![true; n];
        for _ in 0..n + 1 {
            let mut changed = false;
            for rule in &self.activation_rules {
                let want = active[rule.parent]
                    && rule.activating_values.iter().any(|v| *v == values[rule.parent]);
                if active[rule.child] != want {
                    active[rule.child] = want;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        active
    }

    /// Canonicalizes raw values into a [`DesignPoint`]: clips to bounds,
    /// resolves activity, imputes inactive variables and repairs value-rule
    /// violations (nearest allowed value for numeric targets, first allowed
    /// level for categorical ones). Idempotent: correcting a corrected
    /// point's values reproduces it exactly.
    pub fn correct(&self, raw: &[Value]) -> Result<DesignPoint, SpaceError> {
        if raw.len() != self.variables.len() {
            return Err(SpaceError::LengthMismatch {
                expected: self.variables.len(),
                found: raw.len(),
            });
        }

        let mut values = Vec::with_capacity(raw.len());
        for (i, (value, spec)) in raw.iter().zip(&self.variables).enumerate() {
            match (value, &spec.kind) {
                (Value::Continuous(x), VariableKind::Continuous { lower, upper }) => {
                    if !x.is_finite() {
                        return Err(SpaceError::NonFinite { variable: i });
                    }
                    values.push(Value::Continuous(x.clamp(*lower, *upper)));
                }
                (Value::Integer(x), VariableKind::Integer { lower, upper }) => {
                    values.push(Value::Integer((*x).clamp(*lower, *upper)));
                }
                (Value::Categorical(k), VariableKind::Categorical { levels }) => {
                    if *k >= levels.len() {
                        return Err(SpaceError::LevelOutOfRange {
                            variable: i,
                            level: *k,
                            levels: levels.len(),
                        });
                    }
                    values.push(Value::Categorical(*k));
                }
                (v, kind) => {
                    return Err(SpaceError::SchemaMismatch {
                        variable: i,
                        expected: kind.name(),
                        found: v.kind_name(),
                    });
                }
            }
        }

        // Imputation can change a value-rule controller and a repaired
        // value can change activity, so iterate the three steps to a
        // fixpoint. One extra pass suffices for rule-free spaces; the cap
        // covers adversarial chains.
        let mut active = self.compute_activity(&values);
        for _ in 0..self.variables.len() + 2 {
            let mut changed = false;
            for (i, is_active) in active.iter().enumerate() {
                if !is_active {
                    let imputed = self.imputation_value(i);
                    if values[i] != imputed {
                        values[i] = imputed;
                        changed = true;
                    }
                }
            }
            for rule in &self.value_rules {
                if !active[rule.target] {
                    continue;
                }
                let allowed = rule
                    .table
                    .iter()
                    .find(|(ctrl, _)| *ctrl == values[rule.controller])
                    .map(|(_, allowed)| allowed.as_slice());
                let Some(allowed) = allowed else { continue };
                if allowed.is_empty() || allowed.iter().any(|v| *v == values[rule.target]) {
                    continue;
                }
                values[rule.target] = repair_value(&values[rule.target], allowed);
                changed = true;
            }
            let next = self.compute_activity(&values);
            if next != active {
                active = next;
                changed = true;
            }
            if !changed {
                break;
            }
        }

        Ok(DesignPoint { values, active })
    }

    /// Whether `point` is exactly what [`DesignSpace::correct`] would
    /// produce from its own values.
    pub fn is_corrected(&self, point: &DesignPoint) -> bool {
        match self.correct(&point.values) {
            Ok(p) => p == *point,
            Err(_) => false,
        }
    }

    /// Width of the relaxed encoding: one coordinate per continuous or
    /// integer variable, one per categorical level.
    pub fn encoded_dim(&self) -> usize {
        self.variables
            .iter()
            .map(|v| match &v.kind {
                VariableKind::Categorical { levels } => levels.len(),
                _ => 1,
            })
            .sum()
    }

    /// Maps each encoded coordinate to its variable index. One-hot blocks
    /// share the variable index, which is what lets a surrogate tie one
    /// length-scale to a whole categorical variable.
    pub fn encoding_groups(&self) -> Vec<usize> {
        let mut groups = Vec::with_capacity(self.encoded_dim());
        for (i, v) in self.variables.iter().enumerate() {
            let width = match &v.kind {
                VariableKind::Categorical { levels } => levels.len(),
                _ => 1,
            };
            for _ in 0..width {
                groups.push(i);
            }
        }
        groups
    }

    /// Relaxed encoding of a corrected point: min-max normalized numeric
    /// coordinates, one-hot categorical blocks. Because inactive variables
    /// are imputed, points equal on their active variables encode to equal
    /// vectors.
    pub fn encode(&self, point: &DesignPoint) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.encoded_dim());
        for (value, spec) in point.values.iter().zip(&self.variables) {
            match (value, &spec.kind) {
                (Value::Continuous(v), VariableKind::Continuous { lower, upper }) => {
                    x.push((v - lower) / (upper - lower));
                }
                (Value::Integer(v), VariableKind::Integer { lower, upper }) => {
                    x.push((v - lower) as f64 / (upper - lower) as f64);
                }
                (Value::Categorical(k), VariableKind::Categorical { levels }) => {
                    for level in 0..levels.len() {
                        x.push(if level == *k { 1.0 } else { 0.0 });
                    }
                }
                _ => unreachable!("corrected points match the schema"),
            }
        }
        x
    }

    /// Decodes a relaxed vector back into a corrected point: coordinates
    /// are clipped to `[0, 1]`, integers round to the nearest level (ties
    /// away from zero), one-hot blocks take their arg-max (first index on
    /// ties), and the result goes through [`DesignSpace::correct`].
    pub fn decode(&self, x: &[f64]) -> Result<DesignPoint, SpaceError> {
        if x.len() != self.encoded_dim() {
            return Err(SpaceError::EncodedLengthMismatch {
                expected: self.encoded_dim(),
                found: x.len(),
            });
        }
        let mut raw = Vec::with_capacity(self.variables.len());
        let mut at = 0usize;
        for spec in &self.variables {
            match &spec.kind {
                VariableKind::Continuous { lower, upper } => {
                    let t = x[at].clamp(0.0, 1.0);
                    raw.push(Value::Continuous(lower + t * (upper - lower)));
                    at += 1;
                }
                VariableKind::Integer { lower, upper } => {
                    let t = x[at].clamp(0.0, 1.0);
                    let offset = libm::round(t * (upper - lower) as f64) as i64;
                    raw.push(Value::Integer(lower + offset));
                    at += 1;
                }
                VariableKind::Categorical { levels } => {
                    let block = &x[at..at + levels.len()];
                    let mut arg = 0usize;
                    for (i, v) in block.iter().enumerate() {
                        if *v > block[arg] {
                            arg = i;
                        }
                    }
                    raw.push(Value::Categorical(arg));
                    at += levels.len();
                }
            }
        }
        self.correct(&raw)
    }

    /// Latin hypercube design of `n` corrected points: one LHS draw on the
    /// relaxed cube, decoded. Deterministic for a given generator state.
    pub fn sample_doe<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<DesignPoint> {
        lhs::sample(n, self.encoded_dim(), rng)
            .iter()
            .map(|row| self.decode(row).expect("lhs rows match the encoding width"))
            .collect()
    }

    /// Enumerates every distinct corrected assignment of the discrete
    /// variables, continuous variables held at their imputation values.
    /// Refuses (with the raw cartesian size) when that product exceeds
    /// `cap`.
    pub fn enumerate_discrete(&self, cap: u128) -> Result<DiscreteEnumeration, SpaceError> {
        let discrete: Vec<usize> = self
            .variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind.is_discrete())
            .map(|(i, _)| i)
            .collect();
        if discrete.is_empty() {
            return Err(SpaceError::NoDiscreteVariables);
        }

        let mut cartesian: u128 = 1;
        for &i in &discrete {
            let size = self.variables[i].kind.domain_size().unwrap_or(1).max(1);
            cartesian = cartesian.saturating_mul(size);
        }
        if cartesian > cap {
            return Err(SpaceError::EnumerationTooLarge { cartesian, cap });
        }

        let base: Vec<Value> =
            (0..self.variables.len()).map(|i| self.imputation_value(i)).collect();
        let mut assignments = Vec::new();
        let mut counter = vec![0u128; discrete.len()];
        loop {
            let mut raw = base.clone();
            for (slot, &var) in discrete.iter().enumerate() {
                raw[var] = match &self.variables[var].kind {
                    VariableKind::Integer { lower, .. } => {
                        Value::Integer(lower + counter[slot] as i64)
                    }
                    VariableKind::Categorical { .. } => Value::Categorical(counter[slot] as usize),
                    VariableKind::Continuous { .. } => unreachable!(),
                };
            }
            assignments.push(self.correct(&raw)?);

            let mut slot = 0usize;
            loop {
                if slot == discrete.len() {
                    break;
                }
                counter[slot] += 1;
                let size = self.variables[discrete[slot]].kind.domain_size().unwrap();
                if counter[slot] < size {
                    break;
                }
                counter[slot] = 0;
                slot += 1;
            }
            if slot == discrete.len() {
                break;
            }
        }

        assignments.sort_by(|a, b| cmp_values(&a.values, &b.values));
        assignments.dedup_by(|a, b| cmp_values(&a.values, &b.values) == Ordering::Equal);
        Ok(DiscreteEnumeration { assignments, cartesian })
    }

    /// Number of distinct architecture signatures among the enumerated
    /// discrete assignments (inactive signature variables sit at their
    /// imputation values, so collapsed variants count once).
    pub fn count_architectures(&self, cap: u128) -> Result<usize, SpaceError> {
        if self.signature_vars.is_empty() {
            return Err(SpaceError::EmptySignature);
        }
        let enumeration = self.enumerate_discrete(cap)?;
        let mut signatures: Vec<Vec<Value>> = enumeration
            .assignments
            .iter()
            .map(|p| self.signature_vars.iter().map(|&i| p.values[i]).collect())
            .collect();
        signatures.sort_by(|a, b| cmp_values(a, b));
        signatures.dedup_by(|a, b| cmp_values(a, b) == Ordering::Equal);
        Ok(signatures.len())
    }

    /// Index of the variable named `name`.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }
}

fn value_matches_kind(value: &Value, kind: &VariableKind) -> bool {
    matches!(
        (value, kind),
        (Value::Continuous(_), VariableKind::Continuous { .. })
            | (Value::Integer(_), VariableKind::Integer { .. })
            | (Value::Categorical(_), VariableKind::Categorical { .. })
    )
}

fn cmp_values(a: &[Value], b: &[Value]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

/// Nearest allowed value for numeric targets (ties to the smaller value),
/// first allowed level in declaration order for categorical ones.
pub(crate) fn repair_value(current: &Value, allowed: &[Value]) -> Value {
    match current {
        Value::Integer(x) => {
            let mut best: Option<(i64, i64)> = None;
            for v in allowed {
                if let Value::Integer(a) = v {
                    let d = (a - x).abs();
                    let better = match best {
                        None => true,
                        Some((bd, bv)) => d < bd || (d == bd && *a < bv),
                    };
                    if better {
                        best = Some((d, *a));
                    }
                }
            }
            best.map(|(_, v)| Value::Integer(v)).unwrap_or(*current)
        }
        Value::Continuous(x) => {
            let mut best: Option<(f64, f64)> = None;
            for v in allowed {
                if let Value::Continuous(a) = v {
                    let d = libm::fabs(a - x);
                    let better = match best {
                        None => true,
                        Some((bd, bv)) => d < bd || (d == bd && *a < bv),
                    };
                    if better {
                        best = Some((d, *a));
                    }
                }
            }
            best.map(|(_, v)| Value::Continuous(v)).unwrap_or(*current)
        }
        Value::Categorical(_) => {
            let mut lowest: Option<usize> = None;
            for v in allowed {
                if let Value::Categorical(k) = v {
                    if lowest.map_or(true, |cur| *k < cur) {
                        lowest = Some(*k);
                    }
                }
            }
            lowest.map(Value::Categorical).unwrap_or(*current)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn continuous(name: &str, lower: f64, upper: f64) -> VariableSpec {
        VariableSpec { name: name.into(), kind: VariableKind::Continuous { lower, upper } }
    }

    fn integer(name: &str, lower: i64, upper: i64) -> VariableSpec {
        VariableSpec { name: name.into(), kind: VariableKind::Integer { lower, upper } }
    }

    fn categorical(name: &str, levels: &[&str]) -> VariableSpec {
        VariableSpec {
            name: name.into(),
            kind: VariableKind::Categorical { levels: levels.iter().map(|s| (*s).into()).collect() },
        }
    }

    /// mode ("a"|"b") gates count (1..4); count in {3,4} gates width.
    fn chain_space() -> DesignSpace {
        DesignSpace {
            variables: vec![
                categorical("mode", &["a", "b"]),
                integer("count", 1, 4),
                continuous("width", 0.0, 10.0),
            ],
            activation_rules: vec![
                ActivationRule { child: 1, parent: 0, activating_values: vec![Value::Categorical(1)] },
                ActivationRule {
                    child: 2,
                    parent: 1,
                    activating_values: vec![Value::Integer(3), Value::Integer(4)],
                },
            ],
            value_rules: vec![],
            signature_vars: vec![0, 1],
        }
    }

    #[test]
    fn imputation_is_midpoint_lower_bound_first_level() {
        let s = chain_space();
        assert_eq!(s.imputation_value(0), Value::Categorical(0));
        assert_eq!(s.imputation_value(1), Value::Integer(1));
        assert_eq!(s.imputation_value(2), Value::Continuous(5.0));
    }

    #[test]
    fn correct_clips_to_bounds() {
        let s = chain_space();
        let p = s
            .correct(&[Value::Categorical(1), Value::Integer(9), Value::Continuous(-3.0)])
            .unwrap();
        assert_eq!(p.values[1], Value::Integer(4));
        // count = 4 keeps width active, so the clipped value survives.
        assert_eq!(p.values[2], Value::Continuous(0.0));
        assert_eq!(p.active, vec![true, true, true]);
    }

    #[test]
    fn inactivity_cascades_down_the_chain() {
        let s = chain_space();
        let p = s
            .correct(&[Value::Categorical(0), Value::Integer(4), Value::Continuous(7.0)])
            .unwrap();
        // mode = "a" deactivates count, which deactivates width even though
        // count's raw value (4) would have activated it.
        assert_eq!(p.active, vec![true, false, false]);
        assert_eq!(p.values[1], Value::Integer(1));
        assert_eq!(p.values[2], Value::Continuous(5.0));
    }

    #[test]
    fn activity_mask_ignores_rule_order() {
        let mut s = chain_space();
        let values = [Value::Categorical(1), Value::Integer(3), Value::Continuous(1.0)];
        let forward = s.compute_activity(&values);
        s.activation_rules.reverse();
        assert_eq!(forward, s.compute_activity(&values));
    }

    #[test]
    fn value_rule_repairs_to_nearest_with_tie_to_smaller() {
        let s = DesignSpace {
            variables: vec![integer("n", 1, 3), integer("k", 1, 9)],
            activation_rules: vec![],
            value_rules: vec![ValueRule {
                target: 1,
                controller: 0,
                table: vec![
                    (Value::Integer(1), vec![Value::Integer(2), Value::Integer(6)]),
                    (Value::Integer(2), vec![Value::Integer(1)]),
                ],
            }],
            signature_vars: vec![0],
        };
        // k = 4 is equidistant from 2 and 6: the smaller wins.
        let p = s.correct(&[Value::Integer(1), Value::Integer(4)]).unwrap();
        assert_eq!(p.values[1], Value::Integer(2));
        let p = s.correct(&[Value::Integer(2), Value::Integer(9)]).unwrap();
        assert_eq!(p.values[1], Value::Integer(1));
        // Controller value 3 has no table row: unconstrained.
        let p = s.correct(&[Value::Integer(3), Value::Integer(9)]).unwrap();
        assert_eq!(p.values[1], Value::Integer(9));
    }

    #[test]
    fn value_rule_repairs_categorical_to_first_allowed() {
        let s = DesignSpace {
            variables: vec![
                categorical("kind", &["x", "y"]),
                categorical("opt", &["p", "q", "r"]),
            ],
            activation_rules: vec![],
            value_rules: vec![ValueRule {
                target: 1,
                controller: 0,
                table: vec![(
                    Value::Categorical(0),
                    vec![Value::Categorical(2), Value::Categorical(1)],
                )],
            }],
            signature_vars: vec![0],
        };
        let p = s.correct(&[Value::Categorical(0), Value::Categorical(0)]).unwrap();
        // Declaration order decides: level 1 ("q") beats level 2 ("r").
        assert_eq!(p.values[1], Value::Categorical(1));
    }

    #[test]
    fn correct_rejects_malformed_input() {
        let s = chain_space();
        assert!(matches!(
            s.correct(&[Value::Categorical(0)]),
            Err(SpaceError::LengthMismatch { expected: 3, found: 1 })
        ));
        assert!(matches!(
            s.correct(&[Value::Integer(0), Value::Integer(1), Value::Continuous(0.0)]),
            Err(SpaceError::SchemaMismatch { variable: 0, expected: "categorical", found: "integer" })
        ));
        assert!(matches!(
            s.correct(&[Value::Categorical(5), Value::Integer(1), Value::Continuous(0.0)]),
            Err(SpaceError::LevelOutOfRange { variable: 0, level: 5, levels: 2 })
        ));
        assert!(matches!(
            s.correct(&[Value::Categorical(0), Value::Integer(1), Value::Continuous(f64::NAN)]),
            Err(SpaceError::NonFinite { variable: 2 })
        ));
    }

    #[test]
    fn decode_rounds_integers_with_ties_away_from_zero() {
        let s = DesignSpace {
            variables: vec![integer("n", 1, 3)],
            activation_rules: vec![],
            value_rules: vec![],
            signature_vars: vec![0],
        };
        // 0.49 * 2 = 0.98 rounds to 1, so the decoded level is 2.
        assert_eq!(s.decode(&[0.49]).unwrap().values[0], Value::Integer(2));
        // 0.25 * 2 = 0.5 is a tie and rounds up (away from zero) to 2.
        assert_eq!(s.decode(&[0.25]).unwrap().values[0], Value::Integer(2));
        assert_eq!(s.decode(&[0.0]).unwrap().values[0], Value::Integer(1));
        assert_eq!(s.decode(&[1.0]).unwrap().values[0], Value::Integer(3));
        // Out-of-cube coordinates clip first.
        assert_eq!(s.decode(&[7.0]).unwrap().values[0], Value::Integer(3));
    }

    #[test]
    fn decode_one_hot_tie_takes_first_index() {
        let s = DesignSpace {
            variables: vec![categorical("c", &["p", "q", "r"])],
            activation_rules: vec![],
            value_rules: vec![],
            signature_vars: vec![0],
        };
        assert_eq!(s.decode(&[0.4, 0.4, 0.1]).unwrap().values[0], Value::Categorical(0));
        assert_eq!(s.decode(&[0.1, 0.4, 0.4]).unwrap().values[0], Value::Categorical(1));
    }

    #[test]
    fn decode_checks_vector_length() {
        let s = chain_space();
        assert!(matches!(
            s.decode(&[0.0; 3]),
            Err(SpaceError::EncodedLengthMismatch { expected: 4, found: 3 })
        ));
    }

    #[test]
    fn encoded_dim_counts_one_hot_blocks() {
        let s = chain_space();
        assert_eq!(s.encoded_dim(), 2 + 1 + 1);
        assert_eq!(s.encoding_groups(), vec![0, 0, 1, 2]);
    }

    #[test]
    fn points_equal_on_active_variables_encode_equally() {
        let s = chain_space();
        // Raw width differs but mode = "a" makes it inactive in both.
        let a = s
            .correct(&[Value::Categorical(0), Value::Integer(2), Value::Continuous(1.0)])
            .unwrap();
        let b = s
            .correct(&[Value::Categorical(0), Value::Integer(4), Value::Continuous(9.0)])
            .unwrap();
        assert_eq!(s.encode(&a), s.encode(&b));
    }

    #[test]
    fn sample_doe_yields_corrected_points() {
        let s = chain_space();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let doe = s.sample_doe(25, &mut rng);
        assert_eq!(doe.len(), 25);
        for p in &doe {
            assert!(s.is_corrected(p));
        }
    }

    #[test]
    fn enumerate_counts_cartesian_and_distinct_assignments() {
        let s = chain_space();
        let e = s.enumerate_discrete(DEFAULT_ENUMERATION_CAP).unwrap();
        // Raw product: mode (2) x count (4) = 8. With mode = "a" the count
        // collapses to its imputation, leaving 1 + 4 distinct assignments.
        assert_eq!(e.cartesian, 8);
        assert_eq!(e.assignments.len(), 5);
        for p in &e.assignments {
            assert!(s.is_corrected(p));
        }
        // Architectures project onto (mode, count): all five remain.
        assert_eq!(s.count_architectures(DEFAULT_ENUMERATION_CAP).unwrap(), 5);
    }

    #[test]
    fn enumerate_enforces_the_cap() {
        let s = chain_space();
        assert!(matches!(
            s.enumerate_discrete(7),
            Err(SpaceError::EnumerationTooLarge { cartesian: 8, cap: 7 })
        ));
    }

    #[test]
    fn enumerate_requires_discrete_variables() {
        let s = DesignSpace {
            variables: vec![continuous("x", 0.0, 1.0)],
            activation_rules: vec![],
            value_rules: vec![],
            signature_vars: vec![],
        };
        assert!(matches!(s.enumerate_discrete(10), Err(SpaceError::NoDiscreteVariables)));
        assert!(matches!(s.count_architectures(10), Err(SpaceError::EmptySignature)));
    }

    #[test]
    fn validate_flags_each_structural_problem() {
        let s = DesignSpace {
            variables: vec![
                continuous("x", 2.0, 2.0),
                categorical("c", &[]),
                integer("x", 3, 1),
            ],
            activation_rules: vec![
                ActivationRule { child: 0, parent: 9, activating_values: vec![] },
                ActivationRule { child: 1, parent: 0, activating_values: vec![Value::Integer(1)] },
                ActivationRule { child: 1, parent: 2, activating_values: vec![Value::Integer(1)] },
            ],
            value_rules: vec![ValueRule {
                target: 2,
                controller: 1,
                table: vec![(Value::Categorical(0), vec![])],
            }],
            signature_vars: vec![0],
        };
        let diags = s.validate();
        let has = |kind: DiagnosticKind| diags.iter().any(|d| d.kind == kind);
        assert!(has(DiagnosticKind::DegenerateBounds));
        assert!(has(DiagnosticKind::NoLevels));
        assert!(has(DiagnosticKind::DuplicateName));
        assert!(has(DiagnosticKind::RuleIndexOutOfRange));
        assert!(has(DiagnosticKind::MultipleActivationRules));
        assert!(has(DiagnosticKind::ContinuousActivationParent));
        assert!(has(DiagnosticKind::EmptyAllowedSet));
    }

    #[test]
    fn validate_detects_activation_cycles() {
        let s = DesignSpace {
            variables: vec![integer("a", 0, 1), integer("b", 0, 1)],
            activation_rules: vec![
                ActivationRule { child: 0, parent: 1, activating_values: vec![Value::Integer(1)] },
                ActivationRule { child: 1, parent: 0, activating_values: vec![Value::Integer(1)] },
            ],
            value_rules: vec![],
            signature_vars: vec![0],
        };
        assert!(s.validate().iter().any(|d| d.kind == DiagnosticKind::ActivationCycle));
    }

    #[test]
    fn validate_accepts_the_chain_space() {
        assert!(chain_space().validate().is_empty());
    }

    #[test]
    fn space_serializes_with_stable_field_names() {
        let s = chain_space();
        let json = serde_json::to_value(&s).unwrap();
        let obj = json.as_object().unwrap();
        for key in ["variables", "activation_rules", "value_rules", "signature_vars"] {
            assert!(obj.contains_key(key), "missing {key}");
        }
        let round: DesignSpace = serde_json::from_value(json).unwrap();
        assert_eq!(round, s);
    }

    proptest! {
        #[test]
        fn correct_is_idempotent(
            mode in 0usize..2,
            count in -3i64..8,
            width in -20.0f64..30.0,
        ) {
            let s = chain_space();
            let raw = [Value::Categorical(mode), Value::Integer(count), Value::Continuous(width)];
            let once = s.correct(&raw).unwrap();
            let twice = s.correct(&once.values).unwrap();
            prop_assert_eq!(&twice, &once);
            prop_assert!(s.is_corrected(&once));
        }

        #[test]
        fn decode_inverts_encode_on_corrected_points(
            mode in 0usize..2,
            count in 1i64..5,
            width in 0.0f64..10.0,
        ) {
            let s = chain_space();
            let p = s
                .correct(&[Value::Categorical(mode), Value::Integer(count), Value::Continuous(width)])
                .unwrap();
            let back = s.decode(&s.encode(&p)).unwrap();
            // Discrete values must survive exactly; the min-max round trip
            // may cost continuous values a final bit.
            prop_assert_eq!(&back.active, &p.active);
            for (a, b) in back.values.iter().zip(&p.values) {
                match (a, b) {
                    (Value::Continuous(x), Value::Continuous(y)) => {
                        prop_assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
                    }
                    _ => prop_assert_eq!(a, b),
                }
            }
        }

        #[test]
        fn encoded_coordinates_stay_in_unit_cube(
            mode in 0usize..2,
            count in -3i64..8,
            width in -20.0f64..30.0,
        ) {
            let s = chain_space();
            let raw = [Value::Categorical(mode), Value::Integer(count), Value::Continuous(width)];
            let x = s.encode(&s.correct(&raw).unwrap());
            prop_assert_eq!(x.len(), s.encoded_dim());
            for v in x {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
