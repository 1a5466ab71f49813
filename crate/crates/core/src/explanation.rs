//! The end-to-end contrastive pipeline and its presentation.
//!
//! [`explain`] answers "why the fact and not the foil?" for one instance:
//! it determines the foil, samples and weights a local neighbourhood,
//! grows a foil tree on model labels, finds the fact- and foil-leaves and
//! merges the complement of their rule sets into literals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureMeta, Scaler};
use crate::error::{Error, Result};
use crate::foil::{
    complement, determine_foil, find_fact_leaf, find_foil_leaf, foil_labels, merge_literals,
    FoilTree, NodeId, StrategyKind, TreeParams,
};
use crate::models::ClassifierOracle;
use crate::sampling::{
    default_kernel_width, generate_local, proximity_weights, SamplingMethod, DEFAULT_SAMPLE_SIZE,
};

pub use crate::foil::Literal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplainerConfig {
    pub sampling: SamplingMethod,
    pub n_samples: usize,
    /// `None` uses `0.75 * sqrt(n_features)`.
    pub kernel_width: Option<f64>,
    pub tree: TreeParams,
    pub strategy: StrategyKind,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        ExplainerConfig {
            sampling: SamplingMethod::SampledExisting,
            n_samples: DEFAULT_SAMPLE_SIZE,
            kernel_width: None,
            tree: TreeParams::default(),
            strategy: StrategyKind::Nearest,
        }
    }
}

impl ExplainerConfig {
    pub fn validate(&self) -> Result<()> {
        self.tree.validate()?;
        self.strategy.validate()?;
        if let Some(w) = self.kernel_width {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidArgument(format!("kernel width must be > 0, got {w}")));
            }
        }
        Ok(())
    }

    pub fn kernel_width_for(&self, n_features: usize) -> f64 {
        self.kernel_width.unwrap_or_else(|| default_kernel_width(n_features))
    }
}

/// A contrastive answer.
///
/// `literals` are empty in two distinct situations: the questioned point
/// already sits in a foil-labelled leaf (`zero_length`), or the local tree
/// has no foil leaf at all (`foil_region_found == false`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub fact: usize,
    pub foil: usize,
    pub literals: Vec<Literal>,
    pub instance: Vec<f64>,
    pub fact_leaf: NodeId,
    pub foil_leaf: Option<NodeId>,
    /// Weighted agreement of the foil tree with the model on its local sample.
    pub fidelity: f64,
    pub zero_length: bool,
    pub foil_region_found: bool,
}

impl Explanation {
    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("explanation serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("explanation serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidArgument(format!("bad explanation json: {e}")))
    }
}

/// An explanation together with the tree it was read from.
#[derive(Debug, Clone)]
pub struct ExplainOutcome {
    pub explanation: Explanation,
    pub tree: FoilTree,
}

/// Runs the full pipeline; see the module documentation.
pub fn explain<M: ClassifierOracle + ?Sized>(
    model: &M,
    train: &Dataset,
    x_q: &[f64],
    requested_foil: Option<usize>,
    config: &ExplainerConfig,
    seed: u64,
) -> Result<Explanation> {
    explain_with_tree(model, train, x_q, requested_foil, config, seed).map(|o| o.explanation)
}

pub fn explain_with_tree<M: ClassifierOracle + ?Sized>(
    model: &M,
    train: &Dataset,
    x_q: &[f64],
    requested_foil: Option<usize>,
    config: &ExplainerConfig,
    seed: u64,
) -> Result<ExplainOutcome> {
    let scaler = Scaler::fit(&train.x)?;
    explain_prepared(model, train, &scaler, x_q, requested_foil, config, seed)
}

/// As [`explain_with_tree`], reusing a scaler fitted on `train`.
pub fn explain_prepared<M: ClassifierOracle + ?Sized>(
    model: &M,
    train: &Dataset,
    scaler: &Scaler,
    x_q: &[f64],
    requested_foil: Option<usize>,
    config: &ExplainerConfig,
    seed: u64,
) -> Result<ExplainOutcome> {
    config.validate()?;
    let d = train.n_features();
    if x_q.len() != d || model.n_features() != d {
        return Err(Error::ArityMismatch {
            expected: d,
            got: if x_q.len() != d { x_q.len() } else { model.n_features() },
        });
    }
    let fact = model.predict(x_q);
    let foil = determine_foil(model, x_q, requested_foil)?;

    let mut sample = generate_local(train, x_q, config.sampling, config.n_samples, seed)?;
    sample.push_query(x_q);
    let sample = proximity_weights(sample, x_q, scaler, config.kernel_width_for(d))?;

    let labels = foil_labels(&sample.points, model, foil);
    let tree = FoilTree::fit(&sample.points, &sample.weights, &labels, fact, foil, config.tree, seed)?;
    let fidelity = tree.weighted_agreement(&sample.points, &sample.weights, &labels);

    let fact_leaf = find_fact_leaf(&tree, x_q)?;
    let foil_leaf = find_foil_leaf(&tree, fact_leaf, &config.strategy);
    let literals = match foil_leaf {
        Some(leaf) => merge_literals(&complement(&tree, fact_leaf, leaf)?, &train.features)?,
        None => Vec::new(),
    };
    let explanation = Explanation {
        fact,
        foil,
        zero_length: foil_leaf == Some(fact_leaf),
        foil_region_found: foil_leaf.is_some(),
        literals,
        instance: x_q.to_vec(),
        fact_leaf,
        foil_leaf,
        fidelity,
    };
    Ok(ExplainOutcome { explanation, tree })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verbosity {
    /// Direction words only.
    #[default]
    Qualitative,
    /// Direction words followed by the thresholds.
    Quantitative,
}

impl FromStr for Verbosity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qualitative" => Ok(Verbosity::Qualitative),
            "quantitative" => Ok(Verbosity::Quantitative),
            _ => Err(Error::InvalidArgument(format!("unknown verbosity '{s}'"))),
        }
    }
}

impl fmt::Display for Verbosity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verbosity::Qualitative => "qualitative",
            Verbosity::Quantitative => "quantitative",
        })
    }
}

/// Shortest decimal that round-trips, limited to four significant digits.
pub fn format_number(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let shortest = format!("{v}");
    let digits = shortest.chars().filter(|c| c.is_ascii_digit()).collect::<String>();
    let significant = digits.trim_start_matches('0').trim_end_matches('0').len();
    if significant <= 4 {
        return shortest;
    }
    let rounded: f64 = format!("{v:.3e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn quote(s: &str) -> String {
    format!("'{s}'")
}

/// Clause for one literal, e.g. `the 'petal width (cm)' should be smaller`.
pub fn literal_phrase(lit: &Literal, name: &str, verbosity: Verbosity) -> String {
    let body = match (lit.lower, lit.upper, verbosity) {
        (None, Some(_), Verbosity::Qualitative) => "should be smaller".to_string(),
        (Some(_), None, Verbosity::Qualitative) => "should be larger".to_string(),
        (Some(_), Some(_), Verbosity::Qualitative) => "should be between two bounds".to_string(),
        (None, Some(u), Verbosity::Quantitative) => {
            format!("should be smaller than or equal to {}", format_number(u))
        }
        (Some(l), None, Verbosity::Quantitative) => format!("should be larger than {}", format_number(l)),
        (Some(l), Some(u), Verbosity::Quantitative) => {
            format!("should be between {} and {}", format_number(l), format_number(u))
        }
        (None, None, _) => "is unconstrained".to_string(),
    };
    format!("the {} {body}", quote(name))
}

fn join_clauses(parts: &[String]) -> String {
    match parts {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

/// "How much smaller and larger?" style question naming the directions used,
/// or plain "How much?" when an interval is involved.
fn follow_up_question(literals: &[Literal]) -> String {
    let mut words: Vec<&str> = Vec::new();
    for l in literals {
        let w = match (l.lower, l.upper) {
            (None, Some(_)) => "smaller",
            (Some(_), None) => "larger",
            _ => return "How much?".to_string(),
        };
        if !words.contains(&w) {
            words.push(w);
        }
    }
    format!("How much {}?", words.join(" and "))
}

/// Renders the explanation as template dialogue lines. The qualitative
/// level has the fact statement, the question and the answer; the
/// quantitative level adds the "how much?" follow-up and its answer.
pub fn render_text(
    e: &Explanation,
    class_names: &[String],
    features: &[FeatureMeta],
    verbosity: Verbosity,
) -> Vec<String> {
    let class = |i: usize| {
        class_names
            .get(i)
            .cloned()
            .unwrap_or_else(|| format!("class {i}"))
    };
    let feature = |i: usize| {
        features
            .get(i)
            .map(|f| f.name.clone())
            .unwrap_or_else(|| format!("feature {i}"))
    };
    let (fact, foil) = (quote(&class(e.fact)), quote(&class(e.foil)));
    let mut lines = vec![
        format!("System: The predicted class is {fact}."),
        format!("User: Why {fact} and not {foil}?"),
    ];

    if e.literals.is_empty() {
        let answer = if e.foil_region_found || e.zero_length {
            format!("System: No difference between {fact} and {foil} was found for this instance.")
        } else {
            format!("System: The foil region for {foil} was not found locally, so no difference can be given.")
        };
        lines.push(answer);
        return lines;
    }

    let qualitative: Vec<String> = e
        .literals
        .iter()
        .map(|l| literal_phrase(l, &feature(l.feature), Verbosity::Qualitative))
        .collect();
    lines.push(format!(
        "System: Because for it to be {foil} {}.",
        join_clauses(&qualitative)
    ));
    if verbosity == Verbosity::Quantitative {
        lines.push(format!("User: {}", follow_up_question(&e.literals)));
        let quantitative: Vec<String> = e
            .literals
            .iter()
            .map(|l| literal_phrase(l, &feature(l.feature), Verbosity::Quantitative))
            .collect();
        lines.push(format!("System: {}.", capitalize(&join_clauses(&quantitative))));
    }
    lines
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(lower: Option<f64>, upper: Option<f64>) -> Literal {
        Literal {
            feature: 3,
            name: "petal width (cm)".into(),
            lower,
            upper,
        }
    }

    #[test]
    fn qualitative_upper_bound() {
        assert_eq!(
            literal_phrase(&lit(None, Some(0.8)), "petal width (cm)", Verbosity::Qualitative),
            "the 'petal width (cm)' should be smaller"
        );
    }

    #[test]
    fn quantitative_upper_bound() {
        assert_eq!(
            literal_phrase(&lit(None, Some(0.8)), "petal width (cm)", Verbosity::Quantitative),
            "the 'petal width (cm)' should be smaller than or equal to 0.8"
        );
    }

    #[test]
    fn interval_templates() {
        assert_eq!(
            literal_phrase(&lit(Some(0.8), Some(1.75)), "petal width (cm)", Verbosity::Quantitative),
            "the 'petal width (cm)' should be between 0.8 and 1.75"
        );
        assert!(literal_phrase(&lit(Some(0.8), Some(1.75)), "x", Verbosity::Qualitative)
            .contains("should be between"));
    }

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(0.8), "0.8");
        assert_eq!(format_number(3.3000000000000003), "3.3");
        assert_eq!(format_number(1.75), "1.75");
        assert_eq!(format_number(127.5), "127.5");
        assert_eq!(format_number(0.123456), "0.1235");
        assert_eq!(format_number(12345.6), "12350");
        assert_eq!(format_number(-2.44444), "-2.444");
    }

    fn empty(zero_length: bool, found: bool) -> Explanation {
        Explanation {
            fact: 0,
            foil: 1,
            literals: vec![],
            instance: vec![1.0],
            fact_leaf: 1,
            foil_leaf: found.then_some(1),
            fidelity: 1.0,
            zero_length,
            foil_region_found: found,
        }
    }

    #[test]
    fn zero_length_has_fixed_sentence() {
        let names = vec!["setosa".to_string(), "versicolor".to_string()];
        let lines = render_text(&empty(true, true), &names, &[], Verbosity::Quantitative);
        assert_eq!(
            lines.last().unwrap(),
            "System: No difference between 'setosa' and 'versicolor' was found for this instance."
        );
        let lines = render_text(&empty(false, false), &names, &[], Verbosity::Qualitative);
        assert!(lines.last().unwrap().contains("not found locally"));
    }

    #[test]
    fn dialogue_joins_literals() {
        let e = Explanation {
            literals: vec![
                lit(None, Some(0.8)),
                Literal {
                    feature: 1,
                    name: "sepal width (cm)".into(),
                    lower: Some(3.3),
                    upper: None,
                },
            ],
            zero_length: false,
            ..empty(false, true)
        };
        let names = vec!["Setosa".to_string(), "Versicolor".to_string()];
        let feats: Vec<FeatureMeta> = ["sepal length (cm)", "sepal width (cm)", "petal length (cm)", "petal width (cm)"]
            .into_iter()
            .map(FeatureMeta::numeric)
            .collect();
        let lines = render_text(&e, &names, &feats, Verbosity::Quantitative);
        assert_eq!(lines[0], "System: The predicted class is 'Setosa'.");
        assert_eq!(lines[1], "User: Why 'Setosa' and not 'Versicolor'?");
        assert_eq!(
            lines[2],
            "System: Because for it to be 'Versicolor' the 'petal width (cm)' should be smaller and the 'sepal width (cm)' should be larger."
        );
        assert_eq!(lines[3], "User: How much smaller and larger?");
        assert_eq!(
            lines[4],
            "System: The 'petal width (cm)' should be smaller than or equal to 0.8 and the 'sepal width (cm)' should be larger than 3.3."
        );
    }
}
