import { describe, expect, it } from "vitest";

import {
  addChild,
  deleteNode,
  findNode,
  isDescendant,
  leafIds,
  moveNode,
  renameNode,
  toTocText,
} from "../../src/outlineEdit.js";
import type { OutlineNodeView } from "../../src/types.js";

function node(id: string, title: string, children: OutlineNodeView[] = []): OutlineNodeView {
  return { node_id: id, title, marker: null, source_cluster: null, children };
}

function sample(): OutlineNodeView[] {
  return [
    node("n1", "Scope", [node("n2", "Jurisdiction"), node("n3", "Admissibility")]),
    node("n4", "Merits"),
  ];
}

describe("toTocText", () => {
  it("serializes with 4-space indentation", () => {
    expect(toTocText(sample())).toBe(
      "Scope\n    Jurisdiction\n    Admissibility\nMerits",
    );
  });

  it("keeps markers", () => {
    const roots = [{ ...node("n1", "Scope"), marker: "I." }];
    expect(toTocText(roots)).toBe("I. Scope");
  });
});

describe("renameNode", () => {
  it("renames without mutating the input", () => {
    const roots = sample();
    const next = renameNode(roots, "n2", "Territorial jurisdiction");
    expect(findNode(next!, "n2")!.title).toBe("Territorial jurisdiction");
    expect(findNode(roots, "n2")!.title).toBe("Jurisdiction");
  });

  it("rejects empty and multi-line titles", () => {
    expect(renameNode(sample(), "n2", "   ")).toBeNull();
    expect(renameNode(sample(), "n2", "two\nlines")).toBeNull();
  });

  it("rejects unknown nodes", () => {
    expect(renameNode(sample(), "missing", "x")).toBeNull();
  });
});

describe("deleteNode", () => {
  it("removes a nested node", () => {
    const next = deleteNode(sample(), "n2")!;
    expect(findNode(next, "n2")).toBeNull();
    expect(leafIds(next)).toEqual(["n3", "n4"]);
  });

  it("refuses to empty the outline", () => {
    const single = [node("n1", "Only")];
    expect(deleteNode(single, "n1")).toBeNull();
  });
});

describe("addChild", () => {
  it("appends a subsection", () => {
    const next = addChild(sample(), "n4", "Proportionality")!;
    expect(findNode(next, "n4")!.children.map((c) => c.title)).toEqual(["Proportionality"]);
  });

  it("appends a new root when parent is null", () => {
    const next = addChild(sample(), null, "Remedies")!;
    expect(next.map((r) => r.title)).toEqual(["Scope", "Merits", "Remedies"]);
  });
});

describe("moveNode", () => {
  it("moves a node under a new parent", () => {
    const next = moveNode(sample(), "n3", "n4", 0)!;
    expect(findNode(next, "n4")!.children.map((c) => c.node_id)).toEqual(["n3"]);
    expect(findNode(next, "n1")!.children.map((c) => c.node_id)).toEqual(["n2"]);
  });

  it("moves to top level", () => {
    const next = moveNode(sample(), "n2", null, 0)!;
    expect(next.map((r) => r.node_id)).toEqual(["n2", "n1", "n4"]);
  });

  it("blocks moving a node into its own descendant", () => {
    expect(isDescendant(sample(), "n1", "n2")).toBe(true);
    expect(moveNode(sample(), "n1", "n2", 0)).toBeNull();
  });

  it("blocks moving a node into itself", () => {
    expect(moveNode(sample(), "n1", "n1", 0)).toBeNull();
  });

  it("reorders siblings", () => {
    const next = moveNode(sample(), "n4", null, 0)!;
    expect(next.map((r) => r.node_id)).toEqual(["n4", "n1"]);
  });
});

describe("leafIds", () => {
  it("collects generation targets in document order", () => {
    expect(leafIds(sample())).toEqual(["n2", "n3", "n4"]);
  });
});
