//! Graph and indicator exports: DOT, lossless JSON, and a plain SVG plot.

use chrono::NaiveDate;

use crate::error::Result;
use crate::graph::{ImpactGraph, Vertex, VertexKind};

#[derive(Debug, Clone)]
pub struct DotOptions {
    /// Label only this many vertices, picked by descending in-degree.
    pub label_top: usize,
}

impl Default for DotOptions {
    fn default() -> Self {
        DotOptions { label_top: 5 }
    }
}

/// Render the graph as DOT. Vertex sizes grow with in-degree and only the
/// `label_top` highest in-degree vertices carry labels, so dense graphs stay
/// readable.
pub fn export_dot(graph: &ImpactGraph, opts: &DotOptions) -> String {
    let mut ranked: Vec<(&Vertex, usize)> =
        graph.vertices().map(|v| (v, graph.in_degree(v))).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let labeled: Vec<&Vertex> =
        ranked.iter().take(opts.label_top).map(|(v, _)| *v).collect();

    let mut out = String::from("digraph impacts {\n");
    out.push_str("    rankdir=LR;\n");
    out.push_str("    node [style=filled fillcolor=\"#dbe9f6\"];\n");
    for vertex in graph.vertices() {
        let indegree = graph.in_degree(vertex);
        let width = 0.4 + 0.25 * indegree as f64;
        let fontsize = 10.0 + 2.0 * indegree as f64;
        let shape = match vertex.kind {
            VertexKind::Article => "box",
            VertexKind::Entity => "ellipse",
            VertexKind::Stock => "doublecircle",
        };
        let label = if labeled.contains(&vertex) { vertex.key.as_str() } else { "" };
        out.push_str(&format!(
            "    \"{id}\" [shape={shape} width={width:.2} height={height:.2} \
             fontsize={fontsize:.0} label=\"{label}\"];\n",
            id = escape(&node_id(vertex)),
            height = width / 2.0,
            label = escape(label),
        ));
    }
    out.push('\n');
    for edge in graph.edges() {
        out.push_str(&format!(
            "    \"{}\" -> \"{}\" [label=\"{}\"];\n",
            escape(&node_id(&edge.from)),
            escape(&node_id(&edge.to)),
            edge.day,
        ));
    }
    out.push_str("}\n");
    out
}

fn node_id(vertex: &Vertex) -> String {
    let kind = match vertex.kind {
        VertexKind::Article => "article",
        VertexKind::Entity => "entity",
        VertexKind::Stock => "stock",
    };
    format!("{kind}:{}", vertex.key)
}

fn escape(text: &str) -> String {
    text.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Lossless JSON form of a graph.
pub fn graph_to_json(graph: &ImpactGraph) -> Result<String> {
    let mut text = serde_json::to_string_pretty(graph)?;
    text.push('\n');
    Ok(text)
}

/// Load a graph exported by `graph_to_json`, validating its invariants.
pub fn graph_from_json(text: &str) -> Result<ImpactGraph> {
    let graph: ImpactGraph = serde_json::from_str(text)?;
    graph.validate()?;
    Ok(graph)
}

/// Minimal line plot of the crisis indicator against its binary labels:
/// indicator as a polyline, labels as a step line.
pub fn indicator_svg(rows: &[(NaiveDate, f64, u8)]) -> String {
    const WIDTH: f64 = 800.0;
    const HEIGHT: f64 = 300.0;
    const MARGIN: f64 = 40.0;
    let inner_w = WIDTH - 2.0 * MARGIN;
    let inner_h = HEIGHT - 2.0 * MARGIN;

    let x = |i: usize| {
        if rows.len() <= 1 {
            MARGIN + inner_w / 2.0
        } else {
            MARGIN + inner_w * i as f64 / (rows.len() - 1) as f64
        }
    };
    let y = |v: f64| MARGIN + inner_h * (1.0 - v.clamp(0.0, 1.0));

    let indicator: Vec<String> =
        rows.iter().enumerate().map(|(i, (_, p, _))| format!("{:.1},{:.1}", x(i), y(*p))).collect();
    let labels: Vec<String> = rows
        .iter()
        .enumerate()
        .map(|(i, (_, _, l))| format!("{:.1},{:.1}", x(i), y(*l as f64)))
        .collect();

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    );
    svg.push_str(&format!(
        "  <rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{inner_w}\" height=\"{inner_h}\" \
         fill=\"none\" stroke=\"#999\"/>\n"
    ));
    if !rows.is_empty() {
        svg.push_str(&format!(
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1.5\"/>\n",
            labels.join(" ")
        ));
        svg.push_str(&format!(
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"#2e6da4\" stroke-width=\"2\"/>\n",
            indicator.join(" ")
        ));
        svg.push_str(&format!(
            "  <text x=\"{MARGIN}\" y=\"{:.1}\" font-size=\"12\">{}</text>\n",
            HEIGHT - 8.0,
            rows[0].0
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"12\">{}</text>\n",
            WIDTH - MARGIN,
            HEIGHT - 8.0,
            rows[rows.len() - 1].0
        ));
    }
    svg.push_str("  <text x=\"8\" y=\"20\" font-size=\"12\">crisis indicator (blue) vs label (red)</text>\n");
    svg.push_str("</svg>\n");
    svg
}
