//! Static view exports from a finished run directory: a GraphML cluster
//! graph weighted by the interaction strengths, and CSV tables of the
//! embedding and per-node assignments.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use tinyblock_core::embed::read_embedding;
use tinyblock_core::error::{Error, Result};

use crate::pipeline::RunReport;

/// Supported export formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    GraphMl,
    Csv,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "graphml" => Ok(ExportFormat::GraphMl),
            "csv" => Ok(ExportFormat::Csv),
            other => Err(Error::validation(format!(
                "unknown export format {other:?}; supported formats: graphml, csv"
            ))),
        }
    }
}

/// Write the requested views next to (or into `out`, when given) the run
/// directory holding `report.json`. Returns the files written.
pub fn export_views(
    report_path: &Path,
    format: ExportFormat,
    out: Option<&Path>,
) -> Result<Vec<PathBuf>> {
    let report: RunReport = serde_json::from_str(&fs::read_to_string(report_path)?)?;
    let run_dir = report_path
        .parent()
        .ok_or_else(|| Error::validation("report path has no parent directory"))?;
    let out_dir = out.unwrap_or(run_dir);
    fs::create_dir_all(out_dir)?;
    match format {
        ExportFormat::GraphMl => {
            let path = out_dir.join("clusters.graphml");
            let mut w = std::io::BufWriter::new(fs::File::create(&path)?);
            write_graphml(&report, &mut w)?;
            w.flush()?;
            Ok(vec![path])
        }
        ExportFormat::Csv => {
            let labels = read_label_file(&run_dir.join("predicted_labels.txt"))?;
            let mut outputs = Vec::new();

            let embedding_path = run_dir.join("embedding.bin");
            let emb = read_embedding(BufReader::new(fs::File::open(&embedding_path)?))?;
            let emb_csv = out_dir.join("embedding.csv");
            {
                let mut w = std::io::BufWriter::new(fs::File::create(&emb_csv)?);
                write!(w, "node")?;
                for c in 0..emb.cols() {
                    write!(w, ",z{c}")?;
                }
                writeln!(w)?;
                for (i, (name, _)) in labels.iter().enumerate() {
                    write!(w, "{name}")?;
                    for c in 0..emb.cols() {
                        write!(w, ",{}", emb.get(i, c))?;
                    }
                    writeln!(w)?;
                }
                w.flush()?;
            }
            outputs.push(emb_csv);

            let node_csv = out_dir.join("node_table.csv");
            {
                let flagged: HashMap<usize, bool> = report
                    .clusters
                    .iter()
                    .map(|c| (c.cluster_id, c.flagged))
                    .collect();
                let engagement = read_engagement(&run_dir.join("node_engagement.csv"))?;
                let mut w = std::io::BufWriter::new(fs::File::create(&node_csv)?);
                write!(w, "node,cluster,flagged")?;
                if engagement.is_some() {
                    write!(w, ",engagement")?;
                }
                writeln!(w)?;
                for (i, (name, cluster)) in labels.iter().enumerate() {
                    write!(
                        w,
                        "{name},{cluster},{}",
                        u8::from(*flagged.get(cluster).unwrap_or(&false))
                    )?;
                    if let Some(fe) = &engagement {
                        write!(w, ",{}", fe.get(i).copied().unwrap_or(0.0))?;
                    }
                    writeln!(w)?;
                }
                w.flush()?;
            }
            outputs.push(node_csv);
            Ok(outputs)
        }
    }
}

fn read_label_file(path: &Path) -> Result<Vec<(String, usize)>> {
    let file = fs::File::open(path)?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        match (tokens.next(), tokens.next()) {
            (Some(name), Some(label)) => {
                let label = label
                    .parse()
                    .map_err(|_| Error::parse(lineno + 1, "bad label"))?;
                out.push((name.to_string(), label));
            }
            _ => return Err(Error::parse(lineno + 1, "expected node and label")),
        }
    }
    Ok(out)
}

fn read_engagement(path: &Path) -> Result<Option<Vec<f64>>> {
    if !path.exists() {
        return Ok(None);
    }
    let file = fs::File::open(path)?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let value = line
            .rsplit(',')
            .next()
            .and_then(|v| v.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::parse(lineno + 1, "bad engagement row"))?;
        out.push(value);
    }
    Ok(Some(out))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// One node per cluster; undirected edges wherever the off-diagonal
/// interaction is positive, weighted by it.
pub fn write_graphml<W: Write>(report: &RunReport, w: &mut W) -> Result<()> {
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(
        w,
        r#"<graphml xmlns="http://graphml.graphdrawing.org/xmlns">"#
    )?;
    writeln!(
        w,
        r#"  <key id="size" for="node" attr.name="size" attr.type="long"/>"#
    )?;
    writeln!(
        w,
        r#"  <key id="edge_probability" for="node" attr.name="edge_probability" attr.type="double"/>"#
    )?;
    writeln!(
        w,
        r#"  <key id="flagged" for="node" attr.name="flagged" attr.type="boolean"/>"#
    )?;
    writeln!(
        w,
        r#"  <key id="creed" for="node" attr.name="creed" attr.type="string"/>"#
    )?;
    writeln!(
        w,
        r#"  <key id="psi" for="edge" attr.name="psi" attr.type="double"/>"#
    )?;
    writeln!(w, r#"  <graph id="clusters" edgedefault="undirected">"#)?;

    let creeds: HashMap<usize, &str> = report
        .creeds
        .iter()
        .filter_map(|c| c.creed.as_deref().map(|name| (c.cluster_id, name)))
        .collect();
    let mut clusters: Vec<_> = report.clusters.iter().collect();
    clusters.sort_by_key(|c| c.cluster_id);
    for cluster in clusters {
        writeln!(w, r#"    <node id="c{}">"#, cluster.cluster_id)?;
        writeln!(w, r#"      <data key="size">{}</data>"#, cluster.size)?;
        writeln!(
            w,
            r#"      <data key="edge_probability">{}</data>"#,
            cluster.edge_probability
        )?;
        writeln!(w, r#"      <data key="flagged">{}</data>"#, cluster.flagged)?;
        if let Some(creed) = creeds.get(&cluster.cluster_id) {
            writeln!(w, r#"      <data key="creed">{}</data>"#, xml_escape(creed))?;
        }
        writeln!(w, r#"    </node>"#)?;
    }
    for entry in &report.meso {
        if entry.c != entry.p && entry.psi > 0.0 {
            writeln!(
                w,
                r#"    <edge source="c{}" target="c{}"><data key="psi">{}</data></edge>"#,
                entry.c, entry.p, entry.psi
            )?;
        }
    }
    writeln!(w, r#"  </graph>"#)?;
    writeln!(w, r#"</graphml>"#)?;
    Ok(())
}

/// Re-parse the psi weights from a GraphML file produced by
/// [`write_graphml`]. Used to verify the export round-trips.
pub fn parse_graphml_psi<R: BufRead>(reader: R) -> Result<Vec<(usize, usize, f64)>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if !line.starts_with("<edge ") {
            continue;
        }
        let grab = |key: &str| -> Result<&str> {
            let pat = format!("{key}=\"c");
            let start = line
                .find(&pat)
                .ok_or_else(|| Error::parse(lineno + 1, "missing edge endpoint"))?
                + pat.len();
            let end = line[start..]
                .find('"')
                .ok_or_else(|| Error::parse(lineno + 1, "unterminated attribute"))?;
            Ok(&line[start..start + end])
        };
        let source: usize = grab("source")?
            .parse()
            .map_err(|_| Error::parse(lineno + 1, "bad source id"))?;
        let target: usize = grab("target")?
            .parse()
            .map_err(|_| Error::parse(lineno + 1, "bad target id"))?;
        let open = line
            .find(r#"<data key="psi">"#)
            .ok_or_else(|| Error::parse(lineno + 1, "missing psi"))?
            + r#"<data key="psi">"#.len();
        let close = line[open..]
            .find("</data>")
            .ok_or_else(|| Error::parse(lineno + 1, "unterminated psi"))?;
        let psi: f64 = line[open..open + close]
            .parse()
            .map_err(|_| Error::parse(lineno + 1, "bad psi value"))?;
        out.push((source, target, psi));
    }
    Ok(out)
}
