"""Minimal deterministic GraphML and GEXF writers.

Both formats carry the same payload: undirected nodes/edges with typed
attributes. Output is byte-stable for identical input (fixed key ordering,
no timestamps), so exports can be digest-compared across runs. External
viewers and graph libraries are the intended readers.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

GRAPHML_NS = "http://graphml.graphdrawing.org/xmlns"
GEXF_NS = "http://www.gexf.net/1.2draft"

_XML_TYPES = {str: "string", int: "int", float: "double", bool: "boolean"}
_GEXF_TYPES = {str: "string", int: "integer", float: "double", bool: "boolean"}


@dataclass
class GraphDoc:
    """Format-independent graph payload."""

    nodes: list[tuple[str, dict]] = field(default_factory=list)  # (id, attrs)
    edges: list[tuple[str, str, dict]] = field(default_factory=list)  # (src, dst, attrs)
    node_attr_types: dict[str, type] = field(default_factory=dict)
    edge_attr_types: dict[str, type] = field(default_factory=dict)

    def add_node(self, node_id: str, **attrs) -> None:
        for k, v in attrs.items():
            self.node_attr_types.setdefault(k, type(v))
        self.nodes.append((node_id, attrs))

    def add_edge(self, src: str, dst: str, **attrs) -> None:
        for k, v in attrs.items():
            self.edge_attr_types.setdefault(k, type(v))
        self.edges.append((src, dst, attrs))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_graphml(doc: GraphDoc, path: str | Path) -> None:
    root = ET.Element("graphml", xmlns=GRAPHML_NS)
    key_ids: dict[tuple[str, str], str] = {}
    for domain, types in (("node", doc.node_attr_types), ("edge", doc.edge_attr_types)):
        for name in sorted(types):
            key_id = f"d{len(key_ids)}"
            key_ids[(domain, name)] = key_id
            ET.SubElement(
                root,
                "key",
                id=key_id,
                attrib={
                    "for": domain,
                    "attr.name": name,
                    "attr.type": _XML_TYPES[types[name]],
                },
            )
    graph = ET.SubElement(root, "graph", id="G", edgedefault="undirected")
    for node_id, attrs in doc.nodes:
        el = ET.SubElement(graph, "node", id=node_id)
        for name in sorted(attrs):
            data = ET.SubElement(el, "data", key=key_ids[("node", name)])
            data.text = _fmt(attrs[name])
    for i, (src, dst, attrs) in enumerate(doc.edges):
        el = ET.SubElement(graph, "edge", id=f"e{i}", source=src, target=dst)
        for name in sorted(attrs):
            data = ET.SubElement(el, "data", key=key_ids[("edge", name)])
            data.text = _fmt(attrs[name])
    tree = ET.ElementTree(root)
    ET.indent(tree)
    tree.write(path, encoding="utf-8", xml_declaration=True)
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        fh.write("\n")


def write_gexf(doc: GraphDoc, path: str | Path) -> None:
    root = ET.Element("gexf", xmlns=GEXF_NS, version="1.2")
    graph = ET.SubElement(root, "graph", defaultedgetype="undirected", mode="static")
    attr_ids: dict[tuple[str, str], str] = {}
    for domain, types in (("node", doc.node_attr_types), ("edge", doc.edge_attr_types)):
        # "label" rides on the element itself in GEXF, not in attvalues
        names = sorted(n for n in types if not (domain == "node" and n == "label"))
        if not names:
            continue
        attrs_el = ET.SubElement(graph, "attributes", attrib={"class": domain})
        for name in names:
            attr_id = f"{domain[0]}{len(attr_ids)}"
            attr_ids[(domain, name)] = attr_id
            ET.SubElement(
                attrs_el,
                "attribute",
                id=attr_id,
                title=name,
                type=_GEXF_TYPES[types[name]],
            )
    nodes_el = ET.SubElement(graph, "nodes")
    for node_id, attrs in doc.nodes:
        label = str(attrs.get("label", node_id))
        el = ET.SubElement(nodes_el, "node", id=node_id, label=label)
        rest = {k: v for k, v in attrs.items() if k != "label"}
        if rest:
            values = ET.SubElement(el, "attvalues")
            for name in sorted(rest):
                ET.SubElement(
                    values,
                    "attvalue",
                    attrib={"for": attr_ids[("node", name)], "value": _fmt(rest[name])},
                )
    edges_el = ET.SubElement(graph, "edges")
    for i, (src, dst, attrs) in enumerate(doc.edges):
        edge_attrs = {"id": f"e{i}", "source": src, "target": dst}
        rest = dict(attrs)
        if "weight" in rest:
            edge_attrs["weight"] = _fmt(rest.pop("weight"))
        el = ET.SubElement(edges_el, "edge", attrib=edge_attrs)
        if rest:
            values = ET.SubElement(el, "attvalues")
            for name in sorted(rest):
                ET.SubElement(
                    values,
                    "attvalue",
                    attrib={"for": attr_ids[("edge", name)], "value": _fmt(rest[name])},
                )
    tree = ET.ElementTree(root)
    ET.indent(tree)
    tree.write(path, encoding="utf-8", xml_declaration=True)
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        fh.write("\n")


def write_graph(doc: GraphDoc, path: str | Path) -> None:
    """Dispatch on file extension: .graphml or .gexf."""
    path = Path(path)
    if path.suffix.lower() == ".gexf":
        write_gexf(doc, path)
    else:
        write_graphml(doc, path)
