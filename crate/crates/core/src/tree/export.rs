//! Text and Graphviz renderings of a tree.

use std::fmt::Write as _;

use super::SurvivalTree;

fn vote_note(tree: &SurvivalTree, id: usize) -> Option<String> {
    let vote = tree.nodes[id].split.as_ref()?.vote.as_ref()?;
    let frac = vote.winner_fraction();
    Some(format!(
        "vote {} {}/{} ({:.3})",
        tree.names[vote.winner],
        vote.tallies[vote.winner],
        vote.replicates,
        frac
    ))
}

impl SurvivalTree {
    /// One node per line, indented by depth: the condition leading to the
    /// node, its size and events, then either the split (with logrank
    /// statistic and vote share when present) or the leaf's cumulative
    /// hazard after its last event.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut stack = vec![(0usize, "root".to_string())];
        while let Some((id, cond)) = stack.pop() {
            let node = &self.nodes[id];
            let _ = write!(
                out,
                "{}[{}] {} n={} events={}",
                "  ".repeat(node.depth),
                id,
                cond,
                node.samples.len(),
                node.n_events
            );
            match &node.split {
                Some(s) => {
                    let (l, r) = s.rule.describe(&self.names, &self.levels);
                    let _ = write!(out, " split: {} logrank={:.4}", l, s.statistic);
                    if let Some(v) = vote_note(self, id) {
                        let _ = write!(out, " {v}");
                    }
                    stack.push((s.right, r));
                    stack.push((s.left, l));
                }
                None => {
                    let _ = write!(out, " H_last={:.4}", node.curve.last_value());
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph tree {\n  node [shape=box, fontname=\"Helvetica\"];\n");
        for node in &self.nodes {
            let label = match &node.split {
                Some(s) => {
                    let (l, _) = s.rule.describe(&self.names, &self.levels);
                    let mut lab = format!("{}\\nn={} events={}\\nlogrank={:.3}", l, node.samples.len(), node.n_events, s.statistic);
                    if let Some(v) = vote_note(self, node.id) {
                        lab.push_str("\\n");
                        lab.push_str(&v);
                    }
                    lab
                }
                None => format!(
                    "leaf\\nn={} events={}\\nH_last={:.3}",
                    node.samples.len(),
                    node.n_events,
                    node.curve.last_value()
                ),
            };
            let _ = writeln!(out, "  n{} [label=\"{}\"];", node.id, label.replace('"', "'"));
            if let Some(s) = &node.split {
                let _ = writeln!(out, "  n{} -> n{} [label=\"yes\"];", node.id, s.left);
                let _ = writeln!(out, "  n{} -> n{} [label=\"no\"];", node.id, s.right);
            }
        }
        out.push_str("}\n");
        out
    }
}
