//! Report documents with stable field names, and their aligned text tables.
//!
//! Rationals are written as `p/q` (integers without the denominator) and the
//! same strings appear in both the JSON and the text form.

use std::fmt::{self, Write as _};

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::asymptotics::{AsymptoticScalar, Rational};
use crate::hierarchy::{ClusterTime, ClusterTree};
use crate::metastable::{
    full_report, metastable_mixture, LatticePoint, MetastableError, StateDistribution, TimeClass,
    TimeScaleLattice,
};
use crate::model::ReducedSpec;
use crate::montecarlo::{ConcreteKernel, OccupationResult};

pub fn rational_text(q: &Rational) -> String {
    q.to_string()
}

/// Ordered label to value map.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelMap(pub Vec<(String, String)>);

impl LabelMap {
    pub fn get(&self, label: &str) -> Option<&str> {
        self.0
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for LabelMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(l, v)| format!("{l}: {v}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

impl Serialize for LabelMap {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for LabelMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = LabelMap;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of labels to strings")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<LabelMap, A::Error> {
                let mut out = Vec::new();
                while let Some(entry) = access.next_entry::<String, String>()? {
                    out.push(entry);
                }
                Ok(LabelMap(out))
            }
        }
        d.deserialize_map(V)
    }
}

/// Aligned plain-text table.
pub fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let last = cells.len() - 1;
        for (c, cell) in cells.iter().enumerate() {
            if c == last {
                out.push_str(cell);
            } else {
                let _ = write!(out, "{cell:<w$}  ", w = widths[c]);
            }
        }
        out.push('\n');
    };
    line(headers.to_vec());
    for row in rows {
        line(row.iter().map(String::as_str).collect());
    }
    out
}

fn scale_text(tree: &ClusterTree, s: &AsymptoticScalar) -> String {
    s.display(tree.basis()).to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterDoc {
    pub rank: usize,
    pub index: usize,
    pub members: Vec<String>,
    /// Closed class of the limit chain one rank below; absent at rank 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed: Option<bool>,
    pub time_scale: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<usize>,
    /// Invariant measure over the subclusters one rank below.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<LabelMap>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeDoc {
    pub scale: String,
    pub rank: usize,
    pub cluster: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisDoc {
    pub states: Vec<String>,
    pub top_rank: usize,
    pub clusters: Vec<ClusterDoc>,
    /// `kernels[r][k][l]`: leading-order transition law between rank-`r` clusters.
    pub kernels: Vec<Vec<Vec<String>>>,
    /// `visits[r][i]`: expected visits to state `i` before leaving its rank-`r` cluster.
    pub visits: Vec<Vec<String>>,
    pub lattice: Vec<LatticeDoc>,
}

impl AnalysisDoc {
    pub fn new(tree: &ClusterTree, lattice: &TimeScaleLattice) -> AnalysisDoc {
        let labels = tree.labels();
        let top = tree.top_rank();
        let mut clusters = Vec::new();
        for r in 0..=top {
            for (k, members) in tree.clusters(r).expect("rank in range").iter().enumerate() {
                let below = r.checked_sub(1).map(|s| &tree.levels()[s]);
                let measure = below.map(|level| {
                    LabelMap(
                        level.measures[k]
                            .iter()
                            .map(|(sub, w)| (sub.to_string(), rational_text(w)))
                            .collect(),
                    )
                });
                clusters.push(ClusterDoc {
                    rank: r,
                    index: k,
                    members: members.iter().map(|&i| labels[i].clone()).collect(),
                    closed: below.map(|level| level.is_closed(k)),
                    time_scale: match tree.time_scale(r, k).expect("cluster exists") {
                        ClusterTime::Finite(s) => scale_text(tree, s),
                        ClusterTime::Infinity => "inf".into(),
                    },
                    parent: tree.levels().get(r).map(|level| level.parent[k]),
                    measure,
                });
            }
        }
        let kernels = tree
            .levels()
            .iter()
            .map(|level| {
                level
                    .kernel
                    .iter()
                    .map(|row| row.iter().map(|v| scale_text(tree, v)).collect())
                    .collect()
            })
            .collect();
        let visits = (0..top)
            .map(|r| {
                (0..tree.state_count())
                    .map(|i| scale_text(tree, tree.visit_count(i, r).expect("rank below top")))
                    .collect()
            })
            .collect();
        AnalysisDoc {
            states: labels.to_vec(),
            top_rank: top,
            clusters,
            kernels,
            visits,
            lattice: lattice
                .classes()
                .iter()
                .map(|c| LatticeDoc {
                    scale: scale_text(tree, &c.scale),
                    rank: c.rank,
                    cluster: c.cluster,
                })
                .collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "states: {}\ntop rank: {}\n\n",
            self.states.join(" "),
            self.top_rank
        );
        let rows: Vec<Vec<String>> = self
            .clusters
            .iter()
            .map(|c| {
                vec![
                    c.rank.to_string(),
                    c.index.to_string(),
                    format!("{{{}}}", c.members.join(",")),
                    c.closed
                        .map_or("-".into(), |b| if b { "yes" } else { "no" }.into()),
                    c.time_scale.clone(),
                    c.measure.as_ref().map_or("-".into(), |m| m.to_string()),
                ]
            })
            .collect();
        out.push_str(&table(
            &[
                "rank",
                "cluster",
                "members",
                "closed",
                "time scale",
                "measure",
            ],
            &rows,
        ));
        out.push_str("\nlattice\n");
        let rows: Vec<Vec<String>> = self
            .lattice
            .iter()
            .enumerate()
            .map(|(i, c)| {
                vec![
                    i.to_string(),
                    c.scale.clone(),
                    format!("({}, {})", c.rank, c.cluster),
                ]
            })
            .collect();
        out.push_str(&table(&["class", "scale", "cluster"], &rows));
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowDoc {
    pub interval: usize,
    pub lower: String,
    pub upper: String,
    pub representative: String,
    pub mu: LabelMap,
    /// Marginal on current states, present when `mu` is on pair states.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginal: Option<LabelMap>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetastableDoc {
    pub start: String,
    pub rows: Vec<RowDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetastableReportDoc {
    pub reports: Vec<MetastableDoc>,
}

/// How measures on a reduced spec are labelled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Presentation {
    /// Labels of the spec's own states.
    States,
    /// Pair states with the marginal alongside.
    Pairs,
    /// Summed onto the current state of each pair.
    Marginal,
}

impl Presentation {
    pub fn for_spec(spec: &ReducedSpec, pairs: bool) -> Presentation {
        match (&spec.origin, pairs) {
            (None, _) => Presentation::States,
            (Some(_), true) => Presentation::Pairs,
            (Some(_), false) => Presentation::Marginal,
        }
    }
}

/// Marginal of a distribution on pair states, in order of first appearance.
pub fn marginal_map(spec: &ReducedSpec, mu: &StateDistribution) -> LabelMap {
    let mut acc: Vec<(String, Rational)> = Vec::new();
    for (s, w) in mu.iter() {
        let label = spec.marginal_label(s);
        match acc.iter_mut().find(|(l, _)| l == label) {
            Some((_, total)) => *total += w,
            None => acc.push((label.to_string(), w.clone())),
        }
    }
    let order = |l: &str| {
        spec.origin
            .as_ref()
            .and_then(|o| o.states.iter().position(|x| x == l))
            .unwrap_or(usize::MAX)
    };
    acc.sort_by_key(|(l, _)| order(l));
    LabelMap(
        acc.into_iter()
            .map(|(l, w)| (l, rational_text(&w)))
            .collect(),
    )
}

fn state_map(spec: &ReducedSpec, mu: &StateDistribution) -> LabelMap {
    LabelMap(
        mu.iter()
            .map(|(s, w)| (spec.states[s].clone(), rational_text(w)))
            .collect(),
    )
}

fn present(
    spec: &ReducedSpec,
    mu: &StateDistribution,
    how: Presentation,
) -> (LabelMap, Option<LabelMap>) {
    match how {
        Presentation::States => (state_map(spec, mu), None),
        Presentation::Pairs => (state_map(spec, mu), Some(marginal_map(spec, mu))),
        Presentation::Marginal => (marginal_map(spec, mu), None),
    }
}

/// Limit shares of the start weights of `label`.
pub fn start_distribution(spec: &ReducedSpec, label: &str) -> Option<Vec<(usize, Rational)>> {
    let weights = spec.start_weights(label)?;
    let scalars: Vec<AsymptoticScalar> = weights.iter().map(|(_, w)| w.clone()).collect();
    let total = AsymptoticScalar::sum(&scalars);
    let out: Vec<(usize, Rational)> = weights
        .iter()
        .filter_map(|(i, w)| {
            let share = w.limit_ratio(&total).ok()?.as_rational()?;
            (share > Rational::from_integer(0.into())).then_some((*i, share))
        })
        .collect();
    (!out.is_empty()).then_some(out)
}

impl MetastableDoc {
    /// Every lattice interval for one start label.
    pub fn full(
        spec: &ReducedSpec,
        tree: &ClusterTree,
        lattice: &TimeScaleLattice,
        start_label: &str,
        start: &[(usize, Rational)],
        how: Presentation,
    ) -> Result<MetastableDoc, MetastableError> {
        let rows = full_report(tree, lattice, start)?
            .into_iter()
            .map(|row| {
                let (mu, marginal) = present(spec, &row.mu, how);
                RowDoc {
                    interval: row.interval,
                    lower: lattice.point_text(&row.lower),
                    upper: lattice.point_text(&row.upper),
                    representative: scale_text(tree, &row.representative),
                    mu,
                    marginal,
                }
            })
            .collect();
        Ok(MetastableDoc {
            start: start_label.to_string(),
            rows,
        })
    }

    /// A single time scale; commensurate scales are refused.
    pub fn at_time(
        spec: &ReducedSpec,
        tree: &ClusterTree,
        lattice: &TimeScaleLattice,
        start_label: &str,
        start: &[(usize, Rational)],
        t: &AsymptoticScalar,
        how: Presentation,
    ) -> Result<MetastableDoc, MetastableError> {
        let interval = match lattice.classify(t)? {
            TimeClass::Interval(i) => i,
            TimeClass::Commensurate(c) => {
                return Err(MetastableError::Commensurate {
                    time: scale_text(tree, t),
                    scale: lattice.point_text(&LatticePoint::Class(c)),
                    class: c,
                })
            }
        };
        let (lower, upper) = lattice.bounds(interval);
        let (mu, marginal) = present(spec, &metastable_mixture(tree, lattice, start, t)?, how);
        Ok(MetastableDoc {
            start: start_label.to_string(),
            rows: vec![RowDoc {
                interval,
                lower: lattice.point_text(&lower),
                upper: lattice.point_text(&upper),
                representative: scale_text(tree, t),
                mu,
                marginal,
            }],
        })
    }
}

impl MetastableReportDoc {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (n, report) in self.reports.iter().enumerate() {
            if n > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "start {}", report.start);
            let with_marginal = report.rows.iter().any(|r| r.marginal.is_some());
            let rows: Vec<Vec<String>> = report
                .rows
                .iter()
                .map(|r| {
                    let mut row = vec![
                        r.interval.to_string(),
                        r.lower.clone(),
                        r.upper.clone(),
                        r.representative.clone(),
                        r.mu.to_string(),
                    ];
                    if with_marginal {
                        row.push(r.marginal.as_ref().map_or("-".into(), |m| m.to_string()));
                    }
                    row
                })
                .collect();
            let mut headers = vec!["interval", "lower", "upper", "t", "mu"];
            if with_marginal {
                headers.push("marginal");
            }
            out.push_str(&table(&headers, &rows));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimStateDoc {
    pub state: String,
    pub count: u64,
    pub frequency: f64,
    pub lo: f64,
    pub hi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationDoc {
    pub start: String,
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_scale: Option<String>,
    pub time: f64,
    pub samples: u64,
    pub seed: u64,
    pub rng: String,
    pub sampler: String,
    pub states: Vec<SimStateDoc>,
    /// Transitions whose evaluated probability underflowed to zero.
    pub underflowed: Vec<[String; 2]>,
    /// Largest `|frequency - predicted|`, when a prediction exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_deviation: Option<f64>,
}

impl SimulationDoc {
    /// Empirical occupancy aggregated onto the labels of `predicted` (or of
    /// `labels` if there is none), optionally marginalized.
    pub fn new(
        spec: &ReducedSpec,
        kernel: &ConcreteKernel,
        result: &OccupationResult,
        start: &str,
        time_scale: Option<String>,
        predicted: Option<&LabelMap>,
        marginal: bool,
    ) -> SimulationDoc {
        let mut groups: Vec<(String, u64)> = Vec::new();
        for (s, &c) in result.counts.iter().enumerate() {
            let label = if marginal {
                spec.marginal_label(s)
            } else {
                spec.states[s].as_str()
            };
            match groups.iter_mut().find(|(l, _)| l == label) {
                Some((_, total)) => *total += c,
                None => groups.push((label.to_string(), c)),
            }
        }
        let n = result.samples;
        let mut max_dev: Option<f64> = None;
        let states = groups
            .into_iter()
            .map(|(label, count)| {
                let iv = crate::montecarlo::wilson_interval(count, n);
                let frequency = count as f64 / n as f64;
                let predicted = predicted.map(|p| p.get(&label).unwrap_or("0").to_string());
                if let Some(p) = &predicted {
                    let value = crate::asymptotics::parse_rational(p)
                        .and_then(|q| num_traits::ToPrimitive::to_f64(&q))
                        .unwrap_or(f64::NAN);
                    let dev = (frequency - value).abs();
                    max_dev = Some(max_dev.map_or(dev, |m: f64| m.max(dev)));
                }
                SimStateDoc {
                    state: label,
                    count,
                    frequency,
                    lo: iv.lo,
                    hi: iv.hi,
                    predicted,
                }
            })
            .collect();
        SimulationDoc {
            start: start.to_string(),
            eps: result.eps,
            time_scale,
            time: result.time,
            samples: n,
            seed: result.seed,
            rng: result.rng.clone(),
            sampler: format!("{:?}", result.sampler).to_lowercase(),
            states,
            underflowed: kernel
                .underflowed()
                .iter()
                .map(|&(i, j)| [spec.states[i].clone(), spec.states[j].clone()])
                .collect(),
            max_deviation: max_dev,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "start {}  eps {}  t {}{}\nsamples {}  seed {}  sampler {}  rng {}\n\n",
            self.start,
            self.eps,
            self.time,
            self.time_scale
                .as_ref()
                .map_or(String::new(), |s| format!(" ({s})")),
            self.samples,
            self.seed,
            self.sampler,
            self.rng,
        );
        let with_pred = self.states.iter().any(|s| s.predicted.is_some());
        let rows: Vec<Vec<String>> = self
            .states
            .iter()
            .map(|s| {
                let mut row = vec![
                    s.state.clone(),
                    s.count.to_string(),
                    s.frequency.to_string(),
                    format!("[{}, {}]", s.lo, s.hi),
                ];
                if with_pred {
                    row.push(s.predicted.clone().unwrap_or_default());
                }
                row
            })
            .collect();
        let mut headers = vec!["state", "count", "frequency", "95% interval"];
        if with_pred {
            headers.push("predicted");
        }
        out.push_str(&table(&headers, &rows));
        if let Some(d) = self.max_deviation {
            let _ = writeln!(out, "\nmax deviation {d}");
        }
        for [a, b] in &self.underflowed {
            let _ = writeln!(out, "underflow: {a} -> {b} evaluates to 0");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::load;
    use crate::presets;

    fn tree_of(doc: crate::model::SpecDocument) -> (ReducedSpec, ClusterTree, TimeScaleLattice) {
        let spec = load(&doc.to_json()).unwrap().0.into_reduced().unwrap();
        let tree = ClusterTree::build(&spec).unwrap();
        let lattice = TimeScaleLattice::new(&tree);
        (spec, tree, lattice)
    }

    #[test]
    fn two_well_documents() {
        let (spec, tree, lattice) = tree_of(presets::two_well());
        let a = AnalysisDoc::new(&tree, &lattice);
        let scales: Vec<&str> = a.lattice.iter().map(|c| c.scale.as_str()).collect();
        assert_eq!(scales, ["1", "2*eps^-1", "2*eps^-2"]);
        let text = a.to_text();
        assert!(text.contains("2*eps^-2"));
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<AnalysisDoc>(&json).unwrap(), a);

        let start = start_distribution(&spec, "1").unwrap();
        let doc =
            MetastableDoc::full(&spec, &tree, &lattice, "1", &start, Presentation::States).unwrap();
        assert_eq!(doc.rows.len(), 4);
        assert_eq!(
            doc.rows[1].mu.0,
            [("1".into(), "1/2".into()), ("2".into(), "1/2".into())]
        );
        assert_eq!(
            doc.rows[2].mu.0,
            [("3".into(), "1/2".into()), ("4".into(), "1/2".into())]
        );
        let report = MetastableReportDoc { reports: vec![doc] };
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains(r#""mu":{"1":"1/2","2":"1/2"}"#));
        assert_eq!(
            serde_json::from_str::<MetastableReportDoc>(&json).unwrap(),
            report
        );
    }

    #[test]
    fn pair_presentation_marginalizes() {
        let (spec, tree, lattice) = tree_of(presets::heteroclinic());
        assert!(spec.origin.is_some());
        let start = start_distribution(&spec, "a").unwrap();
        let pairs =
            MetastableDoc::full(&spec, &tree, &lattice, "a", &start, Presentation::Pairs).unwrap();
        let marg = MetastableDoc::full(&spec, &tree, &lattice, "a", &start, Presentation::Marginal)
            .unwrap();
        for (p, m) in pairs.rows.iter().zip(&marg.rows) {
            assert_eq!(p.marginal.as_ref(), Some(&m.mu));
            assert!(p.mu.0.iter().all(|(l, _)| l.contains("->")));
        }
    }

    #[test]
    fn tables_align() {
        let t = table(&["a", "bb"], &[vec!["xxx".into(), "y".into()]]);
        assert_eq!(t, "a    bb\nxxx  y\n");
    }
}
