//! Generic Takagi-Sugeno-Kang inference engine.
//!
//! Supports zero- and first-order rule consequents over exactly two input
//! variables, with product-AND firing and weighted-average defuzzification.
//! Systems are immutable after construction; evaluation is pure.

use thiserror::Error;

/// Floor applied to the first input inside reciprocal consequent terms so
/// that `cr / x1` stays finite as `x1 -> 0`.
pub const RECIPROCAL_GUARD: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FuzzyError {
    #[error("membership parameters out of order: {detail}")]
    InvalidParameters { detail: String },
    #[error("unknown membership label `{label}` for input `{input}`")]
    UnknownLabel { label: String, input: String },
    #[error("system `{system}` has no rules")]
    EmptyRuleBase { system: String },
    #[error("input `{input}` of system `{system}` has no membership coverage at {x}")]
    DomainGap {
        system: String,
        input: String,
        x: f64,
    },
    #[error("rule-base hole in system `{system}`: no rule fires at ({x1}, {x2})")]
    RuleBaseHole { system: String, x1: f64, x2: f64 },
    #[error("invalid domain for input `{input}`: [{lo}, {hi}]")]
    InvalidDomain { input: String, lo: f64, hi: f64 },
}

/// A piecewise-linear or crisp membership function.
///
/// Construct through the validating constructors; the ordering invariants
/// (`a <= b <= c <= d`) are checked there, after which evaluation is total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MembershipFunction {
    Triangle { a: f64, b: f64, c: f64 },
    Trapezoid { a: f64, b: f64, c: f64, d: f64 },
    /// Step function: 1 for x < threshold, else 0.
    CrispBelow { threshold: f64 },
    /// Step function: 1 for x >= threshold, else 0.
    CrispAtOrAbove { threshold: f64 },
}

impl MembershipFunction {
    pub fn triangle(a: f64, b: f64, c: f64) -> Result<Self, FuzzyError> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) || !(a <= b && b <= c) {
            return Err(FuzzyError::InvalidParameters {
                detail: format!("triangle({a}, {b}, {c}) requires finite a <= b <= c"),
            });
        }
        Ok(Self::Triangle { a, b, c })
    }

    pub fn trapezoid(a: f64, b: f64, c: f64, d: f64) -> Result<Self, FuzzyError> {
        if !(a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite())
            || !(a <= b && b <= c && c <= d)
        {
            return Err(FuzzyError::InvalidParameters {
                detail: format!("trapezoid({a}, {b}, {c}, {d}) requires finite a <= b <= c <= d"),
            });
        }
        Ok(Self::Trapezoid { a, b, c, d })
    }

    pub fn crisp_below(threshold: f64) -> Self {
        Self::CrispBelow { threshold }
    }

    pub fn crisp_at_or_above(threshold: f64) -> Self {
        Self::CrispAtOrAbove { threshold }
    }

    /// Membership degree in [0, 1]. Total for any finite `x`.
    pub fn evaluate(&self, x: f64) -> f64 {
        match *self {
            Self::Triangle { a, b, c } => {
                if x < a || x > c {
                    0.0
                } else if x == b {
                    1.0
                } else if x < b {
                    (x - a) / (b - a)
                } else {
                    (c - x) / (c - b)
                }
            }
            Self::Trapezoid { a, b, c, d } => {
                if x < a || x > d {
                    0.0
                } else if x >= b && x <= c {
                    1.0
                } else if x < b {
                    (x - a) / (b - a)
                } else {
                    (d - x) / (d - c)
                }
            }
            Self::CrispBelow { threshold } => {
                if x < threshold {
                    1.0
                } else {
                    0.0
                }
            }
            Self::CrispAtOrAbove { threshold } => {
                if x >= threshold {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Rescale all parameters by a positive factor (unit changes).
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0, "scale factor must be positive");
        match *self {
            Self::Triangle { a, b, c } => Self::Triangle {
                a: a * factor,
                b: b * factor,
                c: c * factor,
            },
            Self::Trapezoid { a, b, c, d } => Self::Trapezoid {
                a: a * factor,
                b: b * factor,
                c: c * factor,
                d: d * factor,
            },
            Self::CrispBelow { threshold } => Self::CrispBelow {
                threshold: threshold * factor,
            },
            Self::CrispAtOrAbove { threshold } => Self::CrispAtOrAbove {
                threshold: threshold * factor,
            },
        }
    }

    /// Upper bound on |dmu/dx| over the edges (infinite for crisp shapes).
    pub fn max_slope(&self) -> f64 {
        fn edge(lo: f64, hi: f64) -> f64 {
            if hi > lo {
                1.0 / (hi - lo)
            } else {
                0.0
            }
        }
        match *self {
            Self::Triangle { a, b, c } => edge(a, b).max(edge(b, c)),
            Self::Trapezoid { a, b, c, d } => edge(a, b).max(edge(c, d)),
            Self::CrispBelow { .. } | Self::CrispAtOrAbove { .. } => f64::INFINITY,
        }
    }

    /// Parameter values where the shape changes slope (used by the exact
    /// coverage checks).
    fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Self::Triangle { a, b, c } => vec![a, b, c],
            Self::Trapezoid { a, b, c, d } => vec![a, b, c, d],
            Self::CrispBelow { threshold } | Self::CrispAtOrAbove { threshold } => vec![threshold],
        }
    }
}

/// Rule consequent `c0 + cr / max(x1, guard) + c1*x1 + c2*x2`.
///
/// Zero-order rules carry only `c0`; the reciprocal term exists for rule
/// bases whose output grows as the first input approaches zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Consequent {
    pub constant: f64,
    pub reciprocal: f64,
    pub x1_coeff: f64,
    pub x2_coeff: f64,
}

impl Consequent {
    pub fn constant(value: f64) -> Self {
        Self {
            constant: value,
            reciprocal: 0.0,
            x1_coeff: 0.0,
            x2_coeff: 0.0,
        }
    }

    pub fn affine(constant: f64, x1_coeff: f64, x2_coeff: f64) -> Self {
        Self {
            constant,
            reciprocal: 0.0,
            x1_coeff,
            x2_coeff,
        }
    }

    pub fn with_reciprocal(mut self, reciprocal: f64) -> Self {
        self.reciprocal = reciprocal;
        self
    }

    pub fn evaluate(&self, x1: f64, x2: f64) -> f64 {
        self.constant
            + self.reciprocal / x1.max(RECIPROCAL_GUARD)
            + self.x1_coeff * x1
            + self.x2_coeff * x2
    }

    /// Bound on |d/dx1| and |d/dx2| at a point (for continuity checks).
    pub fn gradient_bound(&self, x1: f64) -> f64 {
        let g = x1.max(RECIPROCAL_GUARD);
        self.x1_coeff.abs().max(self.x2_coeff.abs()) + self.reciprocal.abs() / (g * g)
    }
}

/// One input variable: a domain and its labelled membership functions.
#[derive(Debug, Clone)]
pub struct InputVariable {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    labels: Vec<String>,
    mfs: Vec<MembershipFunction>,
}

impl InputVariable {
    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn membership(&self, index: usize) -> &MembershipFunction {
        &self.mfs[index]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    /// Probe set that exactly decides positivity questions for piecewise
    /// linear and step shapes: domain ends, every breakpoint in range, and
    /// the midpoint of each interval between consecutive probes.
    fn probe_points(&self) -> Vec<f64> {
        let mut pts = vec![self.lo, self.hi];
        for mf in &self.mfs {
            for b in mf.breakpoints() {
                if b > self.lo && b < self.hi {
                    pts.push(b);
                }
            }
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        let mut all = Vec::with_capacity(pts.len() * 2);
        for pair in pts.windows(2) {
            all.push(pair[0]);
            all.push(0.5 * (pair[0] + pair[1]));
        }
        all.push(*pts.last().unwrap());
        all
    }

    fn coverage_gap(&self) -> Option<f64> {
        self.probe_points()
            .into_iter()
            .find(|&x| self.mfs.iter().all(|mf| mf.evaluate(x) <= 0.0))
    }
}

#[derive(Debug, Clone)]
struct CompiledRule {
    mf1: usize,
    mf2: usize,
    consequent: Consequent,
}

/// A two-input TSK system: fuzzification, product-AND rule firing, and
/// weighted-average defuzzification with an output clamp.
#[derive(Debug, Clone)]
pub struct TskSystem {
    name: String,
    input1: InputVariable,
    input2: InputVariable,
    rules: Vec<CompiledRule>,
    output_lo: f64,
    output_hi: f64,
}

impl TskSystem {
    pub fn builder(name: &str) -> TskSystemBuilder {
        TskSystemBuilder::new(name)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input1(&self) -> &InputVariable {
        &self.input1
    }

    pub fn input2(&self) -> &InputVariable {
        &self.input2
    }

    pub fn output_range(&self) -> (f64, f64) {
        (self.output_lo, self.output_hi)
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    /// Rule table as (input-1 membership index, input-2 membership index,
    /// consequent) triples, for introspection and independent checking.
    pub fn rules(&self) -> Vec<(usize, usize, Consequent)> {
        self.rules
            .iter()
            .map(|r| (r.mf1, r.mf2, r.consequent))
            .collect()
    }

    /// Inference with the output clamped to the declared range.
    pub fn infer(&self, x1: f64, x2: f64) -> Result<f64, FuzzyError> {
        self.infer_unclamped(x1, x2)
            .map(|y| y.clamp(self.output_lo, self.output_hi))
    }

    /// The raw defuzzified weighted average, before the output clamp.
    ///
    /// Inputs are still clamped into their declared domains.
    pub fn infer_unclamped(&self, x1: f64, x2: f64) -> Result<f64, FuzzyError> {
        let x1 = self.input1.clamp(x1);
        let x2 = self.input2.clamp(x2);
        let mut weighted = 0.0;
        let mut total = 0.0;
        for rule in &self.rules {
            let w = self.input1.mfs[rule.mf1].evaluate(x1) * self.input2.mfs[rule.mf2].evaluate(x2);
            if w > 0.0 {
                weighted += w * rule.consequent.evaluate(x1, x2);
                total += w;
            }
        }
        if total <= 0.0 {
            return Err(FuzzyError::RuleBaseHole {
                system: self.name.clone(),
                x1,
                x2,
            });
        }
        Ok(weighted / total)
    }

    /// Firing strengths of all rules at a (clamped) input pair.
    pub fn firing_strengths(&self, x1: f64, x2: f64) -> Vec<f64> {
        let x1 = self.input1.clamp(x1);
        let x2 = self.input2.clamp(x2);
        self.rules
            .iter()
            .map(|r| self.input1.mfs[r.mf1].evaluate(x1) * self.input2.mfs[r.mf2].evaluate(x2))
            .collect()
    }

    /// Exact verification that the rule base fires somewhere on every point
    /// of the domain rectangle.
    ///
    /// Within a cell of the per-input breakpoint grid each membership is
    /// linear (or constant) and nonnegative, so it is either identically
    /// zero on the cell or positive on its interior; checking every probe
    /// pair therefore decides joint coverage exactly.
    pub fn verify_rule_coverage(&self) -> Result<(), FuzzyError> {
        for &x1 in &self.input1.probe_points() {
            for &x2 in &self.input2.probe_points() {
                let fired = self.rules.iter().any(|r| {
                    self.input1.mfs[r.mf1].evaluate(x1) > 0.0
                        && self.input2.mfs[r.mf2].evaluate(x2) > 0.0
                });
                if !fired {
                    return Err(FuzzyError::RuleBaseHole {
                        system: self.name.clone(),
                        x1,
                        x2,
                    });
                }
            }
        }
        Ok(())
    }

    /// Local bound on |d(output)/dx| from the weighted-average structure:
    /// slope contributions of the weights times the consequent spread plus
    /// the largest consequent gradient. Infinite if a crisp shape fires.
    pub fn local_lipschitz_bound(&self, x1: f64, x2: f64) -> f64 {
        let x1 = self.input1.clamp(x1);
        let x2 = self.input2.clamp(x2);
        let mut total_w = 0.0;
        let mut slope_sum = 0.0;
        let mut cons_min = f64::INFINITY;
        let mut cons_max = f64::NEG_INFINITY;
        let mut grad_max: f64 = 0.0;
        for rule in &self.rules {
            let m1 = self.input1.mfs[rule.mf1].evaluate(x1);
            let m2 = self.input2.mfs[rule.mf2].evaluate(x2);
            let w = m1 * m2;
            total_w += w;
            slope_sum += self.input1.mfs[rule.mf1].max_slope() * m2
                + self.input2.mfs[rule.mf2].max_slope() * m1;
            let c = rule.consequent.evaluate(x1, x2);
            cons_min = cons_min.min(c);
            cons_max = cons_max.max(c);
            grad_max = grad_max.max(rule.consequent.gradient_bound(x1));
        }
        if total_w <= 0.0 {
            return f64::INFINITY;
        }
        slope_sum * (cons_max - cons_min).max(0.0) / total_w + grad_max
    }
}

/// Declarative construction for [`TskSystem`]; all validation happens in
/// [`TskSystemBuilder::build`].
pub struct TskSystemBuilder {
    name: String,
    input1: Option<(String, f64, f64)>,
    input2: Option<(String, f64, f64)>,
    mfs1: Vec<(String, MembershipFunction)>,
    mfs2: Vec<(String, MembershipFunction)>,
    rules: Vec<(String, String, Consequent)>,
    output: (f64, f64),
}

impl TskSystemBuilder {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            input1: None,
            input2: None,
            mfs1: Vec::new(),
            mfs2: Vec::new(),
            rules: Vec::new(),
            output: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn input1(mut self, name: &str, lo: f64, hi: f64) -> Self {
        self.input1 = Some((name.to_string(), lo, hi));
        self
    }

    pub fn input2(mut self, name: &str, lo: f64, hi: f64) -> Self {
        self.input2 = Some((name.to_string(), lo, hi));
        self
    }

    pub fn membership1(mut self, label: &str, mf: MembershipFunction) -> Self {
        self.mfs1.push((label.to_string(), mf));
        self
    }

    pub fn membership2(mut self, label: &str, mf: MembershipFunction) -> Self {
        self.mfs2.push((label.to_string(), mf));
        self
    }

    pub fn rule(mut self, label1: &str, label2: &str, consequent: Consequent) -> Self {
        self.rules
            .push((label1.to_string(), label2.to_string(), consequent));
        self
    }

    pub fn output_range(mut self, lo: f64, hi: f64) -> Self {
        self.output = (lo, hi);
        self
    }

    pub fn build(self) -> Result<TskSystem, FuzzyError> {
        let make_input = |spec: Option<(String, f64, f64)>,
                          mfs: Vec<(String, MembershipFunction)>|
         -> Result<InputVariable, FuzzyError> {
            let (name, lo, hi) = spec.expect("input declaration missing");
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(FuzzyError::InvalidDomain {
                    input: name,
                    lo,
                    hi,
                });
            }
            let (labels, funcs): (Vec<_>, Vec<_>) = mfs.into_iter().unzip();
            Ok(InputVariable {
                name,
                lo,
                hi,
                labels,
                mfs: funcs,
            })
        };
        let input1 = make_input(self.input1, self.mfs1)?;
        let input2 = make_input(self.input2, self.mfs2)?;
        if self.rules.is_empty() {
            return Err(FuzzyError::EmptyRuleBase { system: self.name });
        }
        let mut rules = Vec::with_capacity(self.rules.len());
        for (l1, l2, consequent) in self.rules {
            let mf1 = input1
                .label_index(&l1)
                .ok_or_else(|| FuzzyError::UnknownLabel {
                    label: l1.clone(),
                    input: input1.name.clone(),
                })?;
            let mf2 = input2
                .label_index(&l2)
                .ok_or_else(|| FuzzyError::UnknownLabel {
                    label: l2.clone(),
                    input: input2.name.clone(),
                })?;
            rules.push(CompiledRule {
                mf1,
                mf2,
                consequent,
            });
        }
        for input in [&input1, &input2] {
            if let Some(x) = input.coverage_gap() {
                return Err(FuzzyError::DomainGap {
                    system: self.name,
                    input: input.name.clone(),
                    x,
                });
            }
        }
        Ok(TskSystem {
            name: self.name,
            input1,
            input2,
            rules,
            output_lo: self.output.0,
            output_hi: self.output.1,
        })
    }
}
