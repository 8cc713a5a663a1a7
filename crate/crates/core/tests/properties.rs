// SPDX-License-Identifier: Apache-2.0

//! Invariants over notebooks assembled from random cell sequences.

use std::collections::BTreeSet;

use headergen::annotate::apply;
use headergen::callgraph::{attribute_transitive, extract_callsites};
use headergen::classify::TaxonomyDB;
use headergen::eag::ExtendedAssignmentGraph;
use headergen::frontend::{parse_script, DefUseChains, ImportTable};
use headergen::notebook::{flatten, CellKind, NotebookDoc};
use headergen::stubs::TypeStubDB;
use headergen::{analyze, Options};
use proptest::prelude::*;

const CELLS: &[&str] = &[
    "import pandas as pd\nimport numpy as np",
    "from sklearn.linear_model import LogisticRegression\nfrom sklearn.ensemble import RandomForestClassifier",
    "import matplotlib.pyplot as plt\nimport seaborn as sns",
    "df = pd.read_csv('train.csv')\ndf.head()",
    "df['total'] = df.a + df.b\ndf = df.dropna()",
    "X = df[['a', 'b']].values\ny = df.label.values",
    "model = LogisticRegression()\nmodel.fit(X, y)",
    "model = RandomForestClassifier()\nmodel.fit(X, y)\nmodel.predict(X)",
    "def fit(m):\n    m.fit(X, y)\n    return m.predict(X)\npred = fit(model)",
    "def load(path):\n    return pd.read_csv(path)\ndf = load('other.csv')",
    "for c in ['a', 'b']:\n    df[c] = df[c].fillna(0)",
    "if len(df) > 10:\n    df = df.sample(10)\nelse:\n    df = df.copy()",
    "sns.heatmap(df.corr())\nplt.show()",
    "print(df[0:5])\ndf.describe()",
    "class Wrapper:\n    def __init__(self, m):\n        self.m = m\n    def run(self):\n        return self.m.fit(X, y)\nWrapper(model).run()",
    "values = [np.zeros(3), np.ones(3)]\nfor v in values:\n    v.sum()",
    "!pip install seaborn\n%matplotlib inline",
    "x = 1\nx = x + 1",
];

fn notebook() -> impl Strategy<Value = NotebookDoc> {
    prop::collection::vec((0..CELLS.len(), any::<bool>()), 0..8).prop_map(|picks| {
        let cells: Vec<(CellKind, &str)> = picks
            .into_iter()
            .map(|(i, md)| if md && i % 3 == 0 { (CellKind::Markdown, "## notes") } else { (CellKind::Code, CELLS[i]) })
            .collect();
        NotebookDoc::from_sources(cells)
    })
}

fn code_sources(nb: &NotebookDoc) -> Vec<(CellKind, String)> {
    nb.cells.iter().filter(|c| c.annotation.is_none()).map(|c| (c.kind, c.source.clone())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn propagation_is_at_a_fixed_point(nb in notebook()) {
        let stubs = TypeStubDB::shipped();
        let script = flatten(&nb);
        let ir = parse_script(&script).unwrap();
        let duc = DefUseChains::build(&ir);
        let mut eag = ExtendedAssignmentGraph::build(&ir, &duc, &stubs);
        let before = eag.nodes().clone();
        prop_assert!(!eag.propagate_once());
        prop_assert_eq!(&before, eag.nodes());
    }

    #[test]
    fn transitive_attribution_is_idempotent(nb in notebook()) {
        let stubs = TypeStubDB::shipped();
        let script = flatten(&nb);
        let ir = parse_script(&script).unwrap();
        let duc = DefUseChains::build(&ir);
        let imports = ImportTable::build(&ir);
        let mut eag = ExtendedAssignmentGraph::build(&ir, &duc, &stubs);
        let direct = extract_callsites(&mut eag, &imports, &script.map);
        let once = attribute_transitive(&direct, &mut eag, &imports, &script.map);
        let twice = attribute_transitive(&once, &mut eag, &imports, &script.map);
        prop_assert!(direct.pairs().is_subset(&once.pairs()));
        prop_assert_eq!(once.pairs(), twice.pairs());
    }

    #[test]
    fn flow_sensitive_values_are_within_all_definitions(nb in notebook()) {
        let stubs = TypeStubDB::shipped();
        let script = flatten(&nb);
        let ir = parse_script(&script).unwrap();
        let duc = DefUseChains::build(&ir);
        let eag = ExtendedAssignmentGraph::build(&ir, &duc, &stubs);
        for (&line, entries) in duc.locations() {
            for (name, _) in entries {
                let at_line = eag.points_to(name, line);
                let mut all = BTreeSet::new();
                for other in duc.locations().values() {
                    for (n, def) in other {
                        if n == name {
                            all.extend(eag.values(&headergen::eag::Node::Def(*def)));
                        }
                    }
                }
                let known: BTreeSet<_> = at_line.iter().filter(|v| **v != headergen::eag::Value::Unknown).cloned().collect();
                prop_assert!(known.is_subset(&all), "{} at {}", name, line);
            }
        }
    }

    #[test]
    fn non_shadowing_rules_only_add_categories(nb in notebook(), pick in any::<prop::sample::Index>(), sub in 0usize..4) {
        let stubs = TypeStubDB::shipped();
        let db = TaxonomyDB::shipped();
        let base = analyze(&nb, &stubs, &db, Options::default()).unwrap();
        let unruled: Vec<String> = base
            .report
            .sites()
            .flat_map(|s| s.callee_fqns.iter().cloned())
            .filter(|f| !f.starts_with('<') && db.classify_callsite(f).is_empty())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        prop_assume!(!unruled.is_empty());
        let subs = ["Data Loading", "Visualization", "Model Training", "Feature Selection"];
        let extended = db.clone().with_rule(pick.get(&unruled), &[subs[sub]]);
        let more = analyze(&nb, &stubs, &extended, Options::default()).unwrap();
        for (ci, cats) in &base.classification.cells {
            prop_assert!(more.classification.cells.get(ci).is_some_and(|m| m.is_superset(cats)), "cell {}", ci);
        }
    }

    #[test]
    fn top_levels_are_the_parents_of_sub_categories(nb in notebook()) {
        let stubs = TypeStubDB::shipped();
        let db = TaxonomyDB::shipped();
        let a = analyze(&nb, &stubs, &db, Options::default()).unwrap();
        for (&ci, subs) in &a.classification.cells {
            let parents: BTreeSet<&str> = subs.iter().map(|s| db.taxonomy.parent(s).expect("known sub-category")).collect();
            let tops: BTreeSet<&str> = a.classification.top_level(ci, &db.taxonomy).into_iter().collect();
            prop_assert_eq!(parents, tops);
        }
    }

    #[test]
    fn annotating_is_idempotent_and_keeps_user_cells(nb in notebook()) {
        let stubs = TypeStubDB::shipped();
        let db = TaxonomyDB::shipped();
        let a = analyze(&nb, &stubs, &db, Options::default()).unwrap();
        let once = apply(&nb, &a.annotations(&db, &stubs));
        prop_assert_eq!(code_sources(&once), code_sources(&nb));
        let again = analyze(&once, &stubs, &db, Options::default()).unwrap();
        prop_assert_eq!(again.report.pairs(), a.report.pairs());
        let twice = apply(&once, &again.annotations(&db, &stubs));
        prop_assert_eq!(twice.to_json_string(), once.to_json_string());
    }
}
